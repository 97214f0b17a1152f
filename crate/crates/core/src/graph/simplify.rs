//! Attribute-free unipartite projections of a collaboration graph.
//!
//! An HCP -> HCP edge `a -> b` exists iff some note was written (or otherwise
//! fed) by `a` and read by `b`; the note projection mirrors this through HCPs.
//! Self-loops are dropped.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{CollabGraph, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SimplifiedKind {
    #[serde(rename = "all-hcp")]
    AllHcp,
    #[serde(rename = "all-note")]
    AllNote,
}

impl SimplifiedKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SimplifiedKind::AllHcp => "all-hcp",
            SimplifiedKind::AllNote => "all-note",
        }
    }

    fn keeps(self) -> NodeKind {
        match self {
            SimplifiedKind::AllHcp => NodeKind::Hcp,
            SimplifiedKind::AllNote => NodeKind::Note,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplifiedGraph {
    pub patient_id: String,
    pub kind: SimplifiedKind,
    /// Node ids in the order of the source graph.
    pub nodes: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl SimplifiedGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }
}

fn reroute(graph: &CollabGraph, kind: SimplifiedKind) -> SimplifiedGraph {
    let keep = kind.keeps();
    let mut remap = vec![usize::MAX; graph.num_nodes()];
    let mut nodes = Vec::new();
    for (i, node) in graph.nodes.iter().enumerate() {
        if node.kind() == keep {
            remap[i] = nodes.len();
            nodes.push(node.id.clone());
        }
    }

    // For each intermediate node, pair its kept in-neighbors with its kept out-neighbors.
    let n = graph.num_nodes();
    let mut ins: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut outs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(s, d) in &graph.edges {
        outs[s].push(d);
        ins[d].push(s);
    }
    let mut edges = BTreeSet::new();
    for mid in (0..n).filter(|&m| graph.nodes[m].kind() != keep) {
        for &a in &ins[mid] {
            for &b in &outs[mid] {
                if a != b && remap[a] != usize::MAX && remap[b] != usize::MAX {
                    edges.insert((remap[a], remap[b]));
                }
            }
        }
    }

    SimplifiedGraph {
        patient_id: graph.patient_id.clone(),
        kind,
        nodes,
        edges: edges.into_iter().collect(),
    }
}

pub fn simplify_to_hcp(graph: &CollabGraph) -> SimplifiedGraph {
    reroute(graph, SimplifiedKind::AllHcp)
}

pub fn simplify_to_notes(graph: &CollabGraph) -> SimplifiedGraph {
    reroute(graph, SimplifiedKind::AllNote)
}
