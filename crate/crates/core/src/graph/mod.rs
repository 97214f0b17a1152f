//! Per-patient collaboration graphs built from windowed access logs.
//!
//! Notes and HCPs are nodes; a write is an edge HCP -> note and a read is an
//! edge note -> HCP, so edges follow the direction information flows.
//! Repeated accesses collapse to a single unweighted edge.

mod dump;
mod features;
mod simplify;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{AccessLogEvent, Action, HcpProfile, NoteProfile};

pub use dump::{read_graph_dump, write_graph_dump, write_simplified_dump, GraphDumpRecord};
pub use features::{
    encode_features, encode_node, feature_name, FeatureLayout, FEATURE_DIM, LAYOUT,
};
pub use simplify::{simplify_to_hcp, simplify_to_notes, SimplifiedGraph, SimplifiedKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeWindows {
    pub observation_start: f64,
    pub observation_end: f64,
    pub gap_end: f64,
}

impl Default for TimeWindows {
    fn default() -> Self {
        TimeWindows {
            observation_start: -90.0,
            observation_end: 270.0,
            gap_end: 365.0,
        }
    }
}

impl TimeWindows {
    pub fn validate(&self) -> Result<()> {
        if !(self.observation_start < self.observation_end && self.observation_end < self.gap_end) {
            return Err(Error::config(
                "windows",
                format!(
                    "need observation_start < observation_end < gap_end, got {} / {} / {}",
                    self.observation_start, self.observation_end, self.gap_end
                ),
            ));
        }
        Ok(())
    }

    /// Closed observation interval.
    pub fn observes(&self, t: f64) -> bool {
        t >= self.observation_start && t <= self.observation_end
    }
}

/// Events inside the observation window, in their original order.
pub fn filter_window(events: &[AccessLogEvent], windows: &TimeWindows) -> Vec<AccessLogEvent> {
    events
        .iter()
        .filter(|e| windows.observes(e.t))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Note,
    Hcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeAttrs {
    Note {
        intent: usize,
        content: usize,
        is_inpatient: bool,
    },
    Hcp {
        title: usize,
        hcp_type: usize,
        specialty: usize,
        is_resident: bool,
    },
}

impl NodeAttrs {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodeAttrs::Note { .. } => NodeKind::Note,
            NodeAttrs::Hcp { .. } => NodeKind::Hcp,
        }
    }
}

impl From<&NoteProfile> for NodeAttrs {
    fn from(n: &NoteProfile) -> Self {
        NodeAttrs::Note {
            intent: n.intent,
            content: n.content,
            is_inpatient: n.is_inpatient,
        }
    }
}

impl From<&HcpProfile> for NodeAttrs {
    fn from(h: &HcpProfile) -> Self {
        NodeAttrs::Hcp {
            title: h.title,
            hcp_type: h.hcp_type,
            specialty: h.specialty,
            is_resident: h.is_resident,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub id: String,
    pub attrs: NodeAttrs,
}

impl GraphNode {
    pub fn kind(&self) -> NodeKind {
        self.attrs.kind()
    }
}

/// Directed attributed bipartite graph for one patient.
///
/// Nodes are sorted by `(id, kind)`; edges are node-index pairs sorted
/// lexicographically, which matches id order.
#[derive(Debug, Clone, PartialEq)]
pub struct CollabGraph {
    pub patient_id: String,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(usize, usize)>,
    /// Latest timestamp among the events the graph was built from.
    pub latest_event: Option<f64>,
}

impl CollabGraph {
    pub fn empty(patient_id: impl Into<String>) -> Self {
        CollabGraph {
            patient_id: patient_id.into(),
            nodes: Vec::new(),
            edges: Vec::new(),
            latest_event: None,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// True when every edge joins a note and an HCP.
    pub fn is_bipartite(&self) -> bool {
        self.edges
            .iter()
            .all(|&(s, d)| self.nodes[s].kind() != self.nodes[d].kind())
    }

    pub fn hcp_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind() == NodeKind::Hcp)
            .count()
    }

    pub fn note_count(&self) -> usize {
        self.nodes.len() - self.hcp_count()
    }
}

/// Profile lookup by id.
pub struct ProfileIndex<'a> {
    hcps: HashMap<&'a str, &'a HcpProfile>,
    notes: HashMap<&'a str, &'a NoteProfile>,
}

impl<'a> ProfileIndex<'a> {
    pub fn new(hcps: &'a [HcpProfile], notes: &'a [NoteProfile]) -> Self {
        ProfileIndex {
            hcps: hcps.iter().map(|h| (h.hcp_id.as_str(), h)).collect(),
            notes: notes.iter().map(|n| (n.note_id.as_str(), n)).collect(),
        }
    }

    pub fn hcp(&self, id: &str) -> Option<&'a HcpProfile> {
        self.hcps.get(id).copied()
    }

    pub fn note(&self, id: &str) -> Option<&'a NoteProfile> {
        self.notes.get(id).copied()
    }
}

/// Builds the collaboration graph of one patient from window-filtered events.
pub fn build_graph(
    patient_id: &str,
    events: &[AccessLogEvent],
    profiles: &ProfileIndex<'_>,
) -> Result<CollabGraph> {
    let mut nodes: BTreeMap<(&str, NodeKind), NodeAttrs> = BTreeMap::new();
    let mut latest: Option<f64> = None;
    for e in events {
        if e.patient_id != patient_id {
            return Err(Error::Referential(format!(
                "event for patient {} passed while building {patient_id}",
                e.patient_id
            )));
        }
        let hcp = profiles.hcp(&e.hcp_id).ok_or_else(|| {
            Error::Referential(format!("{patient_id}: unknown hcp_id {}", e.hcp_id))
        })?;
        let note = profiles.note(&e.note_id).ok_or_else(|| {
            Error::Referential(format!("{patient_id}: unknown note_id {}", e.note_id))
        })?;
        nodes.insert((&e.hcp_id, NodeKind::Hcp), hcp.into());
        nodes.insert((&e.note_id, NodeKind::Note), note.into());
        latest = Some(latest.map_or(e.t, |l: f64| l.max(e.t)));
    }

    let index: HashMap<(&str, NodeKind), usize> =
        nodes.keys().enumerate().map(|(i, &key)| (key, i)).collect();
    let mut edges = BTreeSet::new();
    for e in events {
        let h = index[&(e.hcp_id.as_str(), NodeKind::Hcp)];
        let n = index[&(e.note_id.as_str(), NodeKind::Note)];
        edges.insert(match e.action {
            Action::Write => (h, n),
            Action::Read => (n, h),
        });
    }

    Ok(CollabGraph {
        patient_id: patient_id.to_string(),
        nodes: nodes
            .into_iter()
            .map(|((id, _), attrs)| GraphNode {
                id: id.to_string(),
                attrs,
            })
            .collect(),
        edges: edges.into_iter().collect(),
        latest_event: latest,
    })
}
