mod common;

use common::*;
use hinimp::metapath::{commuting_matrix, enumerate_metapaths, induce_subnetwork};

#[test]
fn commuting_counts_match_dfs() {
    let mut r = rng(7);
    for _ in 0..60 {
        let g = random_hin(&mut r, 60);
        for len in 2..=4 {
            let Some(p) = random_schema_path(&mut r, &g, len) else { continue };
            let cm = commuting_matrix(&g, &p).unwrap();
            let oracle = dfs_counts(&g, &p);
            let mut seen = 0;
            for (i, u) in cm.row_nodes.iter().enumerate() {
                for (j, v) in cm.col_nodes.iter().enumerate() {
                    let want = oracle.get(&(u.0, v.0)).copied().unwrap_or(0);
                    assert_eq!(cm.counts.get(i, j), want, "{} at ({u:?}, {v:?})", p.display(&g));
                    seen += usize::from(want > 0);
                }
            }
            assert_eq!(seen, oracle.len());
        }
    }
}

#[test]
fn induced_members_are_the_nodes_on_instances() {
    let mut r = rng(8);
    for _ in 0..40 {
        let g = random_hin(&mut r, 40);
        for (k, p) in enumerate_metapaths(&g, 5).iter().enumerate() {
            let s = induce_subnetwork(&g, p, k).unwrap();
            let oracle = dfs_counts(&g, p);
            let mut want: Vec<usize> = oracle.keys().flat_map(|&(a, b)| [a, b]).collect();
            want.sort_unstable();
            want.dedup();
            let got: Vec<usize> = s.members.iter().map(|v| v.0).collect();
            assert_eq!(got, want);
            for &(u, v, c) in &s.weighted_edges {
                assert_ne!(u, v);
                assert_eq!(oracle[&(u.0, v.0)], c);
            }
            for (m, &d) in s.members.iter().zip(&s.commuting_diag) {
                assert_eq!(oracle.get(&(m.0, m.0)).copied().unwrap_or(0), d);
            }
        }
    }
}

#[test]
fn enumerated_metapaths_are_symmetric_and_bounded() {
    let mut r = rng(9);
    for _ in 0..30 {
        let g = random_hin(&mut r, 30);
        let all = enumerate_metapaths(&g, 5);
        for p in &all {
            assert!(p.node_types.len() <= 5);
            let rev: Vec<_> = p.node_types.iter().rev().copied().collect();
            assert_eq!(p.node_types, rev);
            assert!(p.check_schema(&g).is_ok());
        }
        let mut sorted = all.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), all.len());
    }
}

#[test]
fn parse_round_trips_display() {
    let mut r = rng(10);
    let g = random_hin(&mut r, 30);
    for p in enumerate_metapaths(&g, 5) {
        let text = p.display(&g);
        assert_eq!(hinimp::metapath::Metapath::parse(&text, &g).unwrap(), p);
    }
}
