//! Line-oriented text dump of a graph:
//!
//! ```text
//! N <id> <kind> <x> <y> [label]
//! E <id1> <id2> <length> <certainty>
//! ```
//!
//! `kind` is one of `gv`, `frontier`, `coverage`, `dual`; `certainty` is
//! `deterministic` or `uncertain`. Blank lines and `#` comments are ignored.

use super::{Certainty, HybridTopoGraph, NodeId, NodeKind, TopoNode};
use crate::error::GraphError;
use crate::geom::Point2;
use std::collections::BTreeMap;
use std::fmt::Write;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Snapshot {
    pub graph: HybridTopoGraph,
    /// Optional per-node partition label (center index).
    pub labels: BTreeMap<NodeId, usize>,
}

fn kind_token(n: &TopoNode) -> &'static str {
    match (n.kind, n.dual) {
        (_, true) => "dual",
        (NodeKind::Gv, _) => "gv",
        (NodeKind::Frontier, _) => "frontier",
        (NodeKind::Coverage, _) => "coverage",
    }
}

pub fn write_snapshot(g: &HybridTopoGraph, labels: Option<&BTreeMap<NodeId, usize>>) -> String {
    let mut out = String::new();
    for n in g.nodes() {
        let _ = write!(out, "N {} {} {} {}", n.id, kind_token(n), n.pos.x, n.pos.y);
        if let Some(l) = labels.and_then(|m| m.get(&n.id)) {
            let _ = write!(out, " {l}");
        }
        out.push('\n');
    }
    for e in g.edges() {
        let c = match e.certainty {
            Certainty::Deterministic => "deterministic",
            Certainty::Uncertain => "uncertain",
        };
        let _ = writeln!(out, "E {} {} {} {}", e.a, e.b, e.length, c);
    }
    out
}

fn field<'a>(parts: &[&'a str], i: usize, line: usize, what: &str) -> Result<&'a str, GraphError> {
    parts.get(i).copied().ok_or_else(|| GraphError::Parse {
        line,
        msg: format!("missing {what}"),
    })
}

fn num<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T, GraphError> {
    s.parse().map_err(|_| GraphError::Parse {
        line,
        msg: format!("bad {what} `{s}`"),
    })
}

pub fn parse_snapshot(text: &str) -> Result<Snapshot, GraphError> {
    let mut snap = Snapshot::default();
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = l.split_whitespace().collect();
        match parts[0] {
            "N" => {
                let id = NodeId(num(field(&parts, 1, line, "node id")?, line, "node id")?);
                let (kind, dual) = match field(&parts, 2, line, "kind")? {
                    "gv" => (NodeKind::Gv, false),
                    "frontier" => (NodeKind::Frontier, false),
                    "coverage" => (NodeKind::Coverage, false),
                    "dual" => (NodeKind::Coverage, true),
                    k => {
                        return Err(GraphError::Parse {
                            line,
                            msg: format!("unknown kind `{k}`"),
                        })
                    }
                };
                let x: f64 = num(field(&parts, 3, line, "x")?, line, "x")?;
                let y: f64 = num(field(&parts, 4, line, "y")?, line, "y")?;
                if !x.is_finite() || !y.is_finite() {
                    return Err(GraphError::Parse {
                        line,
                        msg: "non-finite position".into(),
                    });
                }
                let mut node = TopoNode::new(id, kind, Point2::new(x, y));
                node.dual = dual;
                snap.graph.add_node(node).map_err(|e| GraphError::Parse {
                    line,
                    msg: e.to_string(),
                })?;
                if let Some(l) = parts.get(5) {
                    snap.labels.insert(id, num(l, line, "label")?);
                }
                if parts.len() > 6 {
                    return Err(GraphError::Parse {
                        line,
                        msg: "trailing fields".into(),
                    });
                }
            }
            "E" => {
                if parts.len() != 5 {
                    return Err(GraphError::Parse {
                        line,
                        msg: "edge needs 4 fields".into(),
                    });
                }
                let a = NodeId(num(parts[1], line, "node id")?);
                let b = NodeId(num(parts[2], line, "node id")?);
                let len: f64 = num(parts[3], line, "length")?;
                let c = match parts[4] {
                    "deterministic" => Certainty::Deterministic,
                    "uncertain" => Certainty::Uncertain,
                    k => {
                        return Err(GraphError::Parse {
                            line,
                            msg: format!("unknown certainty `{k}`"),
                        })
                    }
                };
                edges.push((line, a, b, len, c));
            }
            t => {
                return Err(GraphError::Parse {
                    line,
                    msg: format!("unknown record `{t}`"),
                })
            }
        }
    }
    for (line, a, b, len, c) in edges {
        snap.graph
            .add_edge(a, b, c)
            .map_err(|e| GraphError::Parse {
                line,
                msg: e.to_string(),
            })?;
        let stored = snap.graph.edge(a, b).expect("just added").length;
        if (stored - len).abs() > 1e-6 {
            return Err(GraphError::Parse {
                line,
                msg: format!("length {len} does not match endpoint distance {stored}"),
            });
        }
    }
    Ok(snap)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn round_trip_with_labels() {
        let mut g = path_graph(3);
        let mut f = TopoNode::new(
            NodeId::compose(4, 2),
            NodeKind::Coverage,
            Point2::new(2.0, 1.5),
        );
        f.dual = true;
        g.add_node(f).unwrap();
        g.add_edge(id(2), f.id, Certainty::Uncertain).unwrap();
        let labels: BTreeMap<NodeId, usize> =
            [(id(0), 0), (id(1), 0), (id(2), 1)].into_iter().collect();
        let text = write_snapshot(&g, Some(&labels));
        let back = parse_snapshot(&text).unwrap();
        assert_eq!(back.graph, g);
        assert_eq!(back.labels, labels);
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(
            parse_snapshot("N 1 gv 0 0\nQ\n"),
            Err(GraphError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_snapshot("N 1 blob 0 0\n"),
            Err(GraphError::Parse { line: 1, .. })
        ));
        assert!(parse_snapshot("N 1 gv 0 0\nN 2 gv 1 0\nE 1 2 5.0 deterministic\n").is_err());
        assert!(parse_snapshot("N 1 gv 0 0\nE 1 3 1.0 deterministic\n").is_err());
        assert!(parse_snapshot("# comment\n\nN 1 gv 0 0\n").is_ok());
    }
}
