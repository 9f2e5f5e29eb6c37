mod common;

use common::*;
use hinimp::experiment::planted_spec;
use hinimp::graph::{generate_synthetic, load_graph, save_graph, validate, GraphBuilder};
use hinimp::NodeId;

#[test]
fn save_then_load_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(30);
    for i in 0..5 {
        let mut g = random_hin(&mut r, 40);
        if i % 2 == 0 {
            let spec = planted_spec(i);
            g = generate_synthetic(&hinimp::graph::SyntheticSpec { seed: i, ..spec }).unwrap();
        }
        let (n, e, f) = (dir.path().join("n.tsv"), dir.path().join("e.tsv"), dir.path().join("f.tsv"));
        let feats = g.feature_dim().is_some();
        save_graph(&g, &n, &e, feats.then_some(f.as_path())).unwrap();
        let back = load_graph(&n, &e, feats.then_some(f.as_path())).unwrap();
        assert_eq!(back.node_count(), g.node_count());
        assert_eq!(back.edges(), g.edges());
        assert_eq!(back.labels(), g.labels());
        for v in 0..g.node_count() {
            assert_eq!(back.feature(NodeId(v)), g.feature(NodeId(v)));
            assert_eq!(back.orig_id(NodeId(v)), g.orig_id(NodeId(v)));
        }
        assert_eq!(hinimp::knowledge::graph_fingerprint(&back), hinimp::knowledge::graph_fingerprint(&g));
    }
}

#[test]
fn loader_reports_the_offending_line() {
    let dir = tempfile::tempdir().unwrap();
    let (n, e) = (dir.path().join("n.tsv"), dir.path().join("e.tsv"));
    std::fs::write(&n, "a\tA\t1.0\np\tP\n").unwrap();
    std::fs::write(&e, "a\tp\tw\na\tq\tw\n").unwrap();
    let msg = load_graph(&n, &e, None).unwrap_err().to_string();
    assert!(msg.contains('2') && msg.contains('q'), "{msg}");
    std::fs::write(&e, "a\tp\tw\n").unwrap();
    std::fs::write(&n, "a\tA\tbig\np\tP\n").unwrap();
    assert!(load_graph(&n, &e, None).is_err());
}

#[test]
fn validation_rejects_a_single_type_single_relation_graph() {
    let mut b = GraphBuilder::new();
    b.add_node("x", "T", None).unwrap();
    b.add_node("y", "T", None).unwrap();
    b.add_edge("x", "y", "e").unwrap();
    assert!(b.build().is_err());
}

#[test]
fn planted_graph_has_the_benchmark_shape() {
    let g = generate_synthetic(&planted_spec(1)).unwrap();
    assert_eq!(g.node_types().len(), 3);
    assert_eq!(g.node_count(), 1000);
    assert!(validate(&g).is_empty());
    let author = g.node_types().get("author").unwrap();
    let labeled: Vec<NodeId> = (0..g.node_count()).map(NodeId).filter(|&v| g.label(v).is_some()).collect();
    assert_eq!(labeled.len(), 300);
    assert!(labeled.iter().all(|&v| g.node_type(v).0 == author));
    // Labels follow degree: Spearman against total degree is high.
    let y: Vec<f64> = labeled.iter().map(|&v| g.label(v).unwrap()).collect();
    let d: Vec<f64> = labeled.iter().map(|&v| g.total_degree(v) as f64).collect();
    assert!(hinimp::metrics::spearman(&d, &y).unwrap() > 0.9);
    assert_eq!(g, generate_synthetic(&planted_spec(1)).unwrap());
}

#[test]
fn homogenized_collapses_types() {
    let g = generate_synthetic(&planted_spec(2)).unwrap();
    let h = g.homogenized();
    assert_eq!(h.node_types().len(), 1);
    assert_eq!(h.edge_types().len(), 1);
    assert_eq!(h.edge_count(), g.edge_count());
    assert_eq!(h.labels(), g.labels());
}
