//! TSV ingestion and export.
//!
//! * nodes: `orig_id<TAB>type_name<TAB>[importance]`
//! * edges: `src_orig_id<TAB>dst_orig_id<TAB>edge_type_name`
//! * features: `orig_id<TAB>f1,f2,...,fF`
//!
//! Lines starting with `#` and blank lines are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{GraphBuilder, HeterogeneousGraph, NodeId};
use crate::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Loads and validates a graph. Types are registered in first-seen order and
/// node ids are re-mapped to dense indices in file order.
pub fn load_graph(
    nodes_path: &Path,
    edges_path: &Path,
    features_path: Option<&Path>,
) -> Result<HeterogeneousGraph> {
    let mut b = GraphBuilder::new();

    let text = read(nodes_path)?;
    for (ln, line) in data_lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_err(nodes_path, ln, "expected 2 or 3 tab-separated fields"));
        }
        let label = match fields.get(2).map(|s| s.trim()) {
            None | Some("") => None,
            Some(s) => Some(
                s.parse::<f64>()
                    .map_err(|_| parse_err(nodes_path, ln, format!("bad importance {s:?}")))?,
            ),
        };
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(parse_err(nodes_path, ln, "empty id or type"));
        }
        b.add_node(fields[0], fields[1], label)
            .map_err(|e| parse_err(nodes_path, ln, e.to_string()))?;
    }

    let text = read(edges_path)?;
    for (ln, line) in data_lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(edges_path, ln, "expected 3 tab-separated fields"));
        }
        b.add_edge(fields[0], fields[1], fields[2])
            .map_err(|e| parse_err(edges_path, ln, e.to_string()))?;
    }

    if let Some(fp) = features_path {
        let text = read(fp)?;
        let mut dim: Option<usize> = None;
        for (ln, line) in data_lines(&text) {
            let (id, rest) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(fp, ln, "expected id<TAB>values"))?;
            let values = rest
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| parse_err(fp, ln, "bad feature value"))?;
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(parse_err(
                        fp,
                        ln,
                        format!("feature dimension mismatch: expected {d}, found {}", values.len()),
                    ))
                }
                _ => {}
            }
            b.set_features(id, values)
                .map_err(|e| parse_err(fp, ln, e.to_string()))?;
        }
    }

    b.build()
}

/// Writes the three TSV files. Floats use shortest round-trip formatting, so
/// loading the output reproduces the graph exactly.
pub fn save_graph(
    g: &HeterogeneousGraph,
    nodes_path: &Path,
    edges_path: &Path,
    features_path: Option<&Path>,
) -> Result<()> {
    let mut s = String::from("# orig_id\ttype\timportance\n");
    for i in 0..g.node_count() {
        let v = NodeId(i);
        match g.label(v) {
            Some(y) => writeln!(s, "{}\t{}\t{}", g.orig_id(v), g.node_type_name(v), y),
            None => writeln!(s, "{}\t{}\t", g.orig_id(v), g.node_type_name(v)),
        }
        .expect("writing to a String");
    }
    fs::write(nodes_path, s).map_err(|e| Error::io(nodes_path, e))?;

    let mut s = String::from("# src\tdst\tedge_type\n");
    for e in g.edges() {
        writeln!(
            s,
            "{}\t{}\t{}",
            g.orig_id(e.src),
            g.orig_id(e.dst),
            g.edge_types().name(e.etype.0)
        )
        .expect("writing to a String");
    }
    fs::write(edges_path, s).map_err(|e| Error::io(edges_path, e))?;

    if let Some(fp) = features_path {
        let mut s = String::new();
        for i in 0..g.node_count() {
            if let Some(f) = g.feature(NodeId(i)) {
                let vals: Vec<String> = f.iter().map(|x| x.to_string()).collect();
                writeln!(s, "{}\t{}", g.orig_id(NodeId(i)), vals.join(",")).expect("writing to a String");
            }
        }
        fs::write(fp, s).map_err(|e| Error::io(fp, e))?;
    }
    Ok(())
}
