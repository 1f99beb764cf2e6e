//! Extended (lag-node) and compact causal graphs built from estimated
//! coefficients, with neighborhood queries, cycle diagnostics and export.
//!
//! Node order is fixed: in the extended graph nodes `0..p` are the
//! contemporaneous variables and `p..2p` their lag-1 copies (suffix `-L1`);
//! the compact graph has the `p` variables only. Variable 0 is the risk
//! parameter.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CoefficientSet;

pub const LAG_SUFFIX: &str = "-L1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphKind {
    Extended,
    Compact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StnNode {
    pub variable_index: usize,
    pub lag: u8,
    pub label: String,
}

/// Directed graph over [`StnNode`]s. Edges are `(source, target)` node indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StnGraph {
    pub kind: GraphKind,
    pub nodes: Vec<StnNode>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl StnGraph {
    pub fn new(kind: GraphKind, nodes: Vec<StnNode>, edges: BTreeSet<(usize, usize)>) -> Result<Self> {
        let n = nodes.len();
        if let Some(&(s, t)) = edges.iter().find(|&&(s, t)| s >= n || t >= n) {
            return Err(Error::Graph(format!("edge ({s}, {t}) references a missing node")));
        }
        if kind == GraphKind::Extended {
            if let Some(&(s, t)) = edges.iter().find(|&&(_, t)| nodes[t].lag != 0) {
                return Err(Error::Graph(format!(
                    "edge {} -> {} targets a lagged node",
                    nodes[s].label, nodes[t].label
                )));
            }
        }
        if kind == GraphKind::Compact && nodes.iter().any(|v| v.lag != 0) {
            return Err(Error::Graph("compact graph nodes must be contemporaneous".into()));
        }
        Ok(Self { kind, nodes, edges })
    }

    /// `p` contemporaneous nodes, optionally followed by `p` lag-1 copies.
    pub fn variable_nodes(names: &[String], with_lags: bool) -> Vec<StnNode> {
        let mut nodes: Vec<StnNode> = names
            .iter()
            .enumerate()
            .map(|(i, n)| StnNode {
                variable_index: i,
                lag: 0,
                label: n.clone(),
            })
            .collect();
        if with_lags {
            nodes.extend(names.iter().enumerate().map(|(i, n)| StnNode {
                variable_index: i,
                lag: 1,
                label: format!("{n}{LAG_SUFFIX}"),
            }));
        }
        nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn has_edge(&self, source: usize, target: usize) -> bool {
        self.edges.contains(&(source, target))
    }

    /// `adjacency[i][j]` is true iff `i -> j`.
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let n = self.nodes.len();
        let mut a = vec![vec![false; n]; n];
        for &(s, t) in &self.edges {
            a[s][t] = true;
        }
        a
    }

    pub fn from_adjacency(
        kind: GraphKind,
        nodes: Vec<StnNode>,
        adjacency: &[Vec<bool>],
    ) -> Result<Self> {
        let n = nodes.len();
        if adjacency.len() != n || adjacency.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!("adjacency must be {n}x{n}")));
        }
        let edges = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| adjacency[i][j])
            .collect();
        Self::new(kind, nodes, edges)
    }

    /// Edges leaving any node of the risk parameter, self-loops excluded.
    /// Empty under the default mask.
    pub fn risk_out_edges(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .copied()
            .filter(|&(s, t)| {
                self.nodes[s].variable_index == 0 && self.nodes[t].variable_index != 0
            })
            .collect()
    }
}

/// One node per variable and per lag-1 copy; `j -> i` when `|ψ_ij| > threshold`
/// and `j-L1 -> i` when `|φ_ij| > threshold`.
pub fn extended_graph(coeffs: &CoefficientSet, names: &[String], threshold: f64) -> Result<StnGraph> {
    coeffs.check_dims()?;
    let p = coeffs.p();
    if names.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{} names for {} variables",
            names.len(),
            p
        )));
    }
    if !(threshold >= 0.0) {
        return Err(Error::InvalidConfig(format!("threshold must be >= 0, got {threshold}")));
    }
    let mut edges = BTreeSet::new();
    for i in 0..p {
        for j in 0..p {
            if coeffs.psi[(i, j)].abs() > threshold {
                edges.insert((j, i));
            }
            if coeffs.phi[(i, j)].abs() > threshold {
                edges.insert((p + j, i));
            }
        }
    }
    StnGraph::new(GraphKind::Extended, StnGraph::variable_nodes(names, true), edges)
}

/// Collapses lags: `j -> i` iff the extended graph has `j -> i` or `j-L1 -> i`.
/// Own-lag persistence becomes a self-loop.
pub fn compact_graph(extended: &StnGraph) -> Result<StnGraph> {
    if extended.kind != GraphKind::Extended {
        return Err(Error::Graph("compact_graph expects an extended graph".into()));
    }
    let p = extended.nodes.iter().filter(|n| n.lag == 0).count();
    let names: Vec<String> = extended.nodes[..p].iter().map(|n| n.label.clone()).collect();
    let edges = extended
        .edges
        .iter()
        .map(|&(s, t)| {
            (
                extended.nodes[s].variable_index,
                extended.nodes[t].variable_index,
            )
        })
        .collect();
    StnGraph::new(GraphKind::Compact, StnGraph::variable_nodes(&names, false), edges)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub n_in: BTreeSet<usize>,
    pub n_out: BTreeSet<usize>,
    pub ne: BTreeSet<usize>,
    pub cl: BTreeSet<usize>,
}

/// In/out neighborhoods of `node` (self excluded), their union and its closure.
pub fn neighborhoods(graph: &StnGraph, node: usize) -> Result<Neighborhood> {
    if node >= graph.nodes.len() {
        return Err(Error::Graph(format!("node {node} does not exist")));
    }
    let n_in: BTreeSet<usize> = graph
        .edges
        .iter()
        .filter(|&&(s, t)| t == node && s != node)
        .map(|&(s, _)| s)
        .collect();
    let n_out: BTreeSet<usize> = graph
        .edges
        .iter()
        .filter(|&&(s, t)| s == node && t != node)
        .map(|&(_, t)| t)
        .collect();
    let ne: BTreeSet<usize> = n_in.union(&n_out).copied().collect();
    let mut cl = ne.clone();
    cl.insert(node);
    Ok(Neighborhood { n_in, n_out, ne, cl })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Acyclicity {
    pub acyclic: bool,
    /// A closed walk `[v0, v1, ..., v0]` when a cycle exists.
    pub witness: Option<Vec<usize>>,
}

/// Depth-first cycle search. Self-loops are skipped when `ignore_self_loops`.
pub fn is_acyclic(graph: &StnGraph, ignore_self_loops: bool) -> Acyclicity {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let n = graph.nodes.len();
    let mut succ = vec![Vec::new(); n];
    for &(s, t) in &graph.edges {
        if s == t && ignore_self_loops {
            continue;
        }
        succ[s].push(t);
    }
    let mut mark = vec![Mark::New; n];
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        // stack of (node, next successor position); the stack is the current path
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = Mark::Open;
        while let Some(top) = stack.last_mut() {
            let (v, pos) = *top;
            if pos < succ[v].len() {
                top.1 += 1;
                let w = succ[v][pos];
                match mark[w] {
                    Mark::New => {
                        mark[w] = Mark::Open;
                        stack.push((w, 0));
                    }
                    Mark::Open => {
                        let start = stack.iter().position(|&(u, _)| u == w).unwrap();
                        let mut cycle: Vec<usize> = stack[start..].iter().map(|&(u, _)| u).collect();
                        cycle.push(w);
                        return Acyclicity {
                            acyclic: false,
                            witness: Some(cycle),
                        };
                    }
                    Mark::Done => {}
                }
            } else {
                mark[v] = Mark::Done;
                stack.pop();
            }
        }
    }
    Acyclicity {
        acyclic: true,
        witness: None,
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz DOT text. The risk parameter is drawn as a box, lag nodes dashed.
pub fn export_dot(graph: &StnGraph) -> String {
    let name = match graph.kind {
        GraphKind::Extended => "stn_extended",
        GraphKind::Compact => "stn_compact",
    };
    let mut out = String::new();
    writeln!(out, "digraph {name} {{").unwrap();
    writeln!(out, "  rankdir=LR;").unwrap();
    for (i, node) in graph.nodes.iter().enumerate() {
        let shape = if node.variable_index == 0 { "box" } else { "ellipse" };
        let style = if node.lag > 0 { ", style=dashed" } else { "" };
        writeln!(
            out,
            "  n{i} [label=\"{}\", shape={shape}{style}];",
            dot_escape(&node.label)
        )
        .unwrap();
    }
    for &(s, t) in &graph.edges {
        writeln!(out, "  n{s} -> n{t};").unwrap();
    }
    out.push_str("}\n");
    out
}

/// 0/1 adjacency in node order, plus CSV with node labels on both axes.
pub fn export_adjacency(graph: &StnGraph) -> Result<(Vec<Vec<u8>>, String)> {
    let matrix: Vec<Vec<u8>> = graph
        .adjacency()
        .into_iter()
        .map(|r| r.into_iter().map(u8::from).collect())
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(graph.nodes.iter().map(|n| n.label.clone()));
    w.write_record(&header)?;
    for (node, row) in graph.nodes.iter().zip(&matrix) {
        let mut rec = vec![node.label.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let text = String::from_utf8(bytes).expect("csv output is utf-8");
    Ok((matrix, text))
}
