//! Fixed-width node feature encoding.
//!
//! Both node kinds share one 131-dim space:
//!
//! | block              | width | offset |
//! |--------------------|-------|--------|
//! | node kind          | 2     | 0      |
//! | note intent        | 5     | 2      |
//! | note content       | 32    | 7      |
//! | note inpatient     | 1     | 39     |
//! | hcp title          | 7     | 40     |
//! | hcp type           | 12    | 47     |
//! | hcp specialty      | 71    | 59     |
//! | hcp resident       | 1     | 130    |
//!
//! Blocks that do not apply to a node's kind stay zero.

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::synth::taxonomy::{
    CONTENTS, HCP_TYPES, INTENTS, N_CONTENTS, N_HCP_TYPES, N_INTENTS, N_SPECIALTIES, N_TITLES,
    SPECIALTIES, TITLES,
};

use super::{CollabGraph, NodeAttrs};

#[derive(Debug, Clone, Copy)]
pub struct FeatureLayout {
    pub kind: usize,
    pub intent: usize,
    pub content: usize,
    pub inpatient: usize,
    pub title: usize,
    pub hcp_type: usize,
    pub specialty: usize,
    pub resident: usize,
}

pub const LAYOUT: FeatureLayout = FeatureLayout {
    kind: 0,
    intent: 2,
    content: 2 + N_INTENTS,
    inpatient: 2 + N_INTENTS + N_CONTENTS,
    title: 3 + N_INTENTS + N_CONTENTS,
    hcp_type: 3 + N_INTENTS + N_CONTENTS + N_TITLES,
    specialty: 3 + N_INTENTS + N_CONTENTS + N_TITLES + N_HCP_TYPES,
    resident: 3 + N_INTENTS + N_CONTENTS + N_TITLES + N_HCP_TYPES + N_SPECIALTIES,
};

pub const FEATURE_DIM: usize = LAYOUT.resident + 1;

const KIND_NOTE: usize = 0;
const KIND_HCP: usize = 1;

impl FeatureLayout {
    pub fn specialty_feature(&self, specialty: usize) -> usize {
        self.specialty + specialty
    }
}

fn check(block: &str, value: usize, card: usize) -> Result<usize> {
    if value >= card {
        return Err(Error::Encoding(format!(
            "{block} index {value} out of range 0..{card}"
        )));
    }
    Ok(value)
}

/// Writes the encoding of `attrs` into `row`, which must be zeroed.
pub fn encode_node(attrs: &NodeAttrs, row: &mut [f64]) -> Result<()> {
    debug_assert_eq!(row.len(), FEATURE_DIM);
    match *attrs {
        NodeAttrs::Note {
            intent,
            content,
            is_inpatient,
        } => {
            row[LAYOUT.kind + KIND_NOTE] = 1.0;
            row[LAYOUT.intent + check("intent", intent, N_INTENTS)?] = 1.0;
            row[LAYOUT.content + check("content", content, N_CONTENTS)?] = 1.0;
            row[LAYOUT.inpatient] = f64::from(u8::from(is_inpatient));
        }
        NodeAttrs::Hcp {
            title,
            hcp_type,
            specialty,
            is_resident,
        } => {
            row[LAYOUT.kind + KIND_HCP] = 1.0;
            row[LAYOUT.title + check("title", title, N_TITLES)?] = 1.0;
            row[LAYOUT.hcp_type + check("hcp_type", hcp_type, N_HCP_TYPES)?] = 1.0;
            row[LAYOUT.specialty + check("specialty", specialty, N_SPECIALTIES)?] = 1.0;
            row[LAYOUT.resident] = f64::from(u8::from(is_resident));
        }
    }
    Ok(())
}

/// One row per node, in node order.
pub fn encode_features(graph: &CollabGraph) -> Result<Matrix> {
    let mut m = Matrix::zeros(graph.num_nodes(), FEATURE_DIM);
    for (i, node) in graph.nodes.iter().enumerate() {
        encode_node(&node.attrs, m.row_mut(i))?;
    }
    Ok(m)
}

/// Human-readable name of feature column `j`, e.g. `hcp.specialty=General Practice`.
pub fn feature_name(j: usize) -> String {
    let l = LAYOUT;
    match j {
        _ if j == l.kind + KIND_NOTE => "kind=note".to_string(),
        _ if j == l.kind + KIND_HCP => "kind=hcp".to_string(),
        _ if j < l.content => format!("note.intent={}", INTENTS[j - l.intent]),
        _ if j < l.inpatient => format!("note.content={}", CONTENTS[j - l.content]),
        _ if j == l.inpatient => "note.inpatient".to_string(),
        _ if j < l.hcp_type => format!("hcp.title={}", TITLES[j - l.title]),
        _ if j < l.specialty => format!("hcp.type={}", HCP_TYPES[j - l.hcp_type]),
        _ if j < l.resident => format!("hcp.specialty={}", SPECIALTIES[j - l.specialty]),
        _ if j == l.resident => "hcp.resident".to_string(),
        _ => panic!("feature index {j} out of range 0..{FEATURE_DIM}"),
    }
}
