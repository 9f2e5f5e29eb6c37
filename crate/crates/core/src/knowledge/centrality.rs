//! Centrality measures on undirected simple graphs given as sorted
//! adjacency lists over `0..n`.

use std::collections::VecDeque;

/// Number of centrality measures per node.
pub const MEASURES: usize = 6;

/// Measure order used everywhere a centrality row appears.
pub const MEASURE_NAMES: [&str; MEASURES] =
    ["degree", "pagerank", "eigenvector", "kcore", "closeness", "harmonic"];

pub const PAGERANK_DAMPING: f64 = 0.85;
pub const PAGERANK_TOL: f64 = 1e-10;
pub const PAGERANK_MAX_ITER: usize = 200;

pub fn degree(adj: &[Vec<usize>]) -> Vec<f64> {
    adj.iter().map(|l| l.len() as f64).collect()
}

/// Power iteration from the uniform vector. Dangling mass is spread
/// uniformly. Returns the scores and the L1 residual after every iteration.
pub fn pagerank(adj: &[Vec<usize>], damping: f64, tol: f64, max_iter: usize) -> (Vec<f64>, Vec<f64>) {
    let n = adj.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let nf = n as f64;
    let mut x = vec![1.0 / nf; n];
    let mut residuals = Vec::new();
    for _ in 0..max_iter {
        let dangling: f64 = (0..n).filter(|&i| adj[i].is_empty()).map(|i| x[i]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        let mut next = vec![base; n];
        for (u, nb) in adj.iter().enumerate() {
            if nb.is_empty() {
                continue;
            }
            let share = damping * x[u] / nb.len() as f64;
            for &v in nb {
                next[v] += share;
            }
        }
        // Keep the total exactly one against rounding drift.
        let s: f64 = next.iter().sum();
        for v in &mut next {
            *v /= s;
        }
        let r: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        residuals.push(r);
        x = next;
        if r < tol {
            break;
        }
    }
    (x, residuals)
}

/// Dominant eigenvector of the adjacency matrix with unit L2 norm, found by
/// power iteration on `A + I` (same eigenvectors, no oscillation on
/// bipartite graphs).
pub fn eigenvector(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    if n == 0 {
        return Vec::new();
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..20_000 {
        let mut next = x.clone();
        for (u, nb) in adj.iter().enumerate() {
            for &v in nb {
                next[v] += x[u];
            }
        }
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return next;
        }
        for v in &mut next {
            *v /= norm;
        }
        let delta = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if delta < 1e-14 {
            break;
        }
    }
    x
}

/// Core numbers by repeated removal of minimum-degree vertices.
pub fn k_core(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let mut deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); max_deg + 1];
    for (v, &d) in deg.iter().enumerate() {
        buckets[d].push(v);
    }
    let mut core = vec![0usize; n];
    let mut removed = vec![false; n];
    let mut k = 0;
    let mut d = 0;
    let mut done = 0;
    while done < n {
        // Lowest non-empty bucket holding a live vertex at its current degree.
        while d <= max_deg {
            match buckets[d].pop() {
                Some(v) if !removed[v] && deg[v] == d => {
                    k = k.max(d);
                    core[v] = k;
                    removed[v] = true;
                    done += 1;
                    for &w in &adj[v] {
                        if !removed[w] && deg[w] > 0 {
                            deg[w] -= 1;
                            buckets[deg[w]].push(w);
                            d = d.min(deg[w]);
                        }
                    }
                    break;
                }
                Some(_) => {}
                None => d += 1,
            }
        }
    }
    core.into_iter().map(|c| c as f64).collect()
}

fn bfs(adj: &[Vec<usize>], s: usize, dist: &mut [usize], queue: &mut VecDeque<usize>) {
    dist.fill(usize::MAX);
    dist[s] = 0;
    queue.clear();
    queue.push_back(s);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
}

/// Closeness with the Wasserman-Faust correction for disconnected graphs
/// and harmonic centrality (sum of inverse distances).
pub fn closeness_harmonic(adj: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
    let n = adj.len();
    let mut closeness = vec![0.0; n];
    let mut harmonic = vec![0.0; n];
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        bfs(adj, s, &mut dist, &mut queue);
        let (mut reach, mut total, mut h) = (0usize, 0usize, 0.0);
        for (v, &d) in dist.iter().enumerate() {
            if v != s && d != usize::MAX {
                reach += 1;
                total += d;
                h += 1.0 / d as f64;
            }
        }
        if total > 0 {
            let r = reach as f64;
            closeness[s] = (r / (n - 1) as f64) * (r / total as f64);
        }
        harmonic[s] = h;
    }
    (closeness, harmonic)
}

/// All measures, unnormalized, one row per node.
pub fn raw_centralities(adj: &[Vec<usize>]) -> Vec<[f64; MEASURES]> {
    let deg = degree(adj);
    let (pr, _) = pagerank(adj, PAGERANK_DAMPING, PAGERANK_TOL, PAGERANK_MAX_ITER);
    let ev = eigenvector(adj);
    let kc = k_core(adj);
    let (cl, hm) = closeness_harmonic(adj);
    (0..adj.len())
        .map(|i| [deg[i], pr[i], ev[i], kc[i], cl[i], hm[i]])
        .collect()
}

/// Relative spread below which a column counts as constant, so rounding
/// noise on symmetric graphs is not stretched to the full unit range.
pub const CONSTANT_SPREAD: f64 = 1e-12;

/// Min-max scales every column to `[0, 1]`. A constant column maps to 1
/// where the value is positive and 0 otherwise.
pub fn normalize_columns(rows: &mut [[f64; MEASURES]]) {
    for c in 0..MEASURES {
        let lo = rows.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
        for r in rows.iter_mut() {
            r[c] = if hi - lo > CONSTANT_SPREAD * hi.abs().max(lo.abs()) {
                (r[c] - lo) / (hi - lo)
            } else if r[c] > 0.0 {
                1.0
            } else {
                0.0
            };
        }
    }
}

/// Normalized centrality rows.
pub fn centralities(adj: &[Vec<usize>]) -> Vec<[f64; MEASURES]> {
    let mut rows = raw_centralities(adj);
    normalize_columns(&mut rows);
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Vec<Vec<usize>> {
        vec![vec![1], vec![0, 2], vec![1]]
    }

    #[test]
    fn two_node_pagerank_is_even() {
        let (pr, _) = pagerank(&[vec![1], vec![0]], 0.85, 1e-10, 200);
        assert!((pr[0] - 0.5).abs() < 1e-12 && (pr[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn path_degrees_and_cores() {
        assert_eq!(degree(&path3()), vec![1.0, 2.0, 1.0]);
        assert_eq!(k_core(&path3()), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn triangle_eigenvector_uniform() {
        let ev = eigenvector(&[vec![1, 2], vec![0, 2], vec![0, 1]]);
        for v in ev {
            assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_node_defaults() {
        let rows = centralities(&[vec![]]);
        assert_eq!(rows[0], [0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn clique_with_tail_cores() {
        // K4 on 0..4 plus tail 3-4
        let adj = vec![vec![1, 2, 3], vec![0, 2, 3], vec![0, 1, 3], vec![0, 1, 2, 4], vec![3]];
        assert_eq!(k_core(&adj), vec![3.0, 3.0, 3.0, 3.0, 1.0]);
    }
}
