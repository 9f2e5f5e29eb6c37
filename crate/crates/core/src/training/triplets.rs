use rand::Rng as _;

use crate::rng;

/// Same-type triplets `(i, plus, minus)` (indices into `labels`) with
/// `|y_plus - y_i| > |y_minus - y_i|`. Candidates are drawn uniformly; after
/// `100 * count` draws the sampler gives up and returns what it has, with
/// the flag set.
pub fn sample_triplets(labels: &[(usize, f64)], count: usize, seed: u64) -> (Vec<(usize, usize, usize)>, bool) {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut types: Vec<usize> = labels.iter().map(|l| l.0).collect();
    types.sort_unstable();
    types.dedup();
    for &t in &types {
        let g: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].0 == t).collect();
        if g.len() >= 3 {
            groups.push(g);
        }
    }
    let mut out = Vec::with_capacity(count);
    if groups.is_empty() || count == 0 {
        return (out, count > 0);
    }
    let total: usize = groups.iter().map(Vec::len).sum();
    let mut r = rng::derived(seed, rng::tag("triplets"));
    let mut draws = 0;
    while out.len() < count && draws < 100 * count {
        draws += 1;
        // Pick the group proportionally to its size.
        let mut pick = r.random_range(0..total);
        let g = groups
            .iter()
            .find(|g| {
                if pick < g.len() {
                    true
                } else {
                    pick -= g.len();
                    false
                }
            })
            .expect("pick < total");
        let i = g[r.random_range(0..g.len())];
        let p = g[r.random_range(0..g.len())];
        let m = g[r.random_range(0..g.len())];
        if i == p || i == m || p == m {
            continue;
        }
        let y = |k: usize| labels[k].1;
        if (y(p) - y(i)).abs() > (y(m) - y(i)).abs() {
            out.push((i, p, m));
        }
    }
    let short = out.len() < count;
    (out, short)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_direction() {
        let labels = [(0, 0.0), (0, 1.0), (0, 10.0)];
        let (t, _) = sample_triplets(&labels, 50, 1);
        assert!(!t.is_empty());
        for (i, p, m) in t {
            assert!((labels[p].1 - labels[i].1).abs() > (labels[m].1 - labels[i].1).abs());
        }
        assert_eq!(sample_triplets(&labels, 20, 4), sample_triplets(&labels, 20, 4));
    }

    #[test]
    fn impossible_filter_reports_shortfall() {
        let labels = [(0, 1.0), (0, 1.0), (0, 1.0)];
        let (t, short) = sample_triplets(&labels, 5, 1);
        assert!(t.is_empty() && short);
    }
}
