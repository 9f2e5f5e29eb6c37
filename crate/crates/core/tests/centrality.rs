mod common;

use common::*;
use hinimp::knowledge::centrality::{centralities, raw_centralities, MEASURE_NAMES};
use rand::Rng;

fn check(adj: &[Vec<usize>]) {
    let got_raw = raw_centralities(adj);
    let mut want = oracle_rows(adj);
    for c in 0..6 {
        for i in 0..adj.len() {
            assert!(
                (got_raw[i][c] - want[i][c]).abs() < 1e-8,
                "{} raw at {i}: {} vs {}",
                MEASURE_NAMES[c],
                got_raw[i][c],
                want[i][c]
            );
        }
    }
    let got = centralities(adj);
    min_max(&mut want);
    for c in 0..6 {
        let g: Vec<f64> = got.iter().map(|r| r[c]).collect();
        let w: Vec<f64> = want.iter().map(|r| r[c]).collect();
        for i in 0..adj.len() {
            assert!((g[i] - w[i]).abs() < 1e-8, "{} normalized at {i}: {g:?} vs {w:?} raw {:?}", MEASURE_NAMES[c], got_raw.iter().map(|r| r[c]).collect::<Vec<_>>());
        }
        assert!(same_ranking(&g, &w, 1e-9), "{} ranking", MEASURE_NAMES[c]);
    }
}

#[test]
fn connected_graphs_match_brute_force() {
    let mut r = rng(21);
    for _ in 0..60 {
        let n = r.random_range(2..=50);
        let p = r.random_range(0.0..0.3);
        check(&random_simple_graph(&mut r, n, p, true));
    }
}

#[test]
fn disconnected_graphs_match_brute_force() {
    let mut r = rng(22);
    for _ in 0..60 {
        let n = r.random_range(1..=50);
        let p = r.random_range(0.0..0.1);
        check(&random_simple_graph(&mut r, n, p, false));
    }
}

#[test]
fn star_center_dominates_every_measure() {
    let n = 9;
    let mut adj = vec![vec![0]; n];
    adj[0] = (1..n).collect();
    for row in centralities(&adj).iter().skip(1) {
        for c in [0, 1, 2, 4, 5] {
            assert!(row[c] < 1.0);
        }
    }
    assert!(centralities(&adj)[0].iter().all(|&x| x == 1.0));
}
