//! Line-delimited graph dumps: one header, then nodes by id, then edges in
//! lexicographic order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{CollabGraph, GraphNode, NodeAttrs, NodeKind, SimplifiedGraph};
use crate::error::{Error, Result};
use crate::provenance::RunMeta;

pub const DUMP_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum GraphDumpRecord {
    Graph {
        schema_version: u32,
        patient_id: String,
        structure: String,
        latest_event: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        provenance: Option<RunMeta>,
    },
    Node {
        id: String,
        kind: NodeKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        attrs: Option<NodeAttrs>,
    },
    Edge {
        src: String,
        dst: String,
    },
}

fn emit<W: Write>(out: &mut W, record: &GraphDumpRecord) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, record).map_err(std::io::Error::other)?;
    out.write_all(b"\n")
}

pub fn write_graph_dump<W: Write>(
    graph: &CollabGraph,
    provenance: Option<&RunMeta>,
    out: &mut W,
) -> std::io::Result<()> {
    emit(
        out,
        &GraphDumpRecord::Graph {
            schema_version: DUMP_SCHEMA_VERSION,
            patient_id: graph.patient_id.clone(),
            structure: "bipartite".into(),
            latest_event: graph.latest_event,
            provenance: provenance.cloned(),
        },
    )?;
    for node in &graph.nodes {
        emit(
            out,
            &GraphDumpRecord::Node {
                id: node.id.clone(),
                kind: node.kind(),
                attrs: Some(node.attrs),
            },
        )?;
    }
    for &(s, d) in &graph.edges {
        emit(
            out,
            &GraphDumpRecord::Edge {
                src: graph.nodes[s].id.clone(),
                dst: graph.nodes[d].id.clone(),
            },
        )?;
    }
    Ok(())
}

pub fn write_simplified_dump<W: Write>(
    graph: &SimplifiedGraph,
    provenance: Option<&RunMeta>,
    out: &mut W,
) -> std::io::Result<()> {
    let kind = match graph.kind {
        super::SimplifiedKind::AllHcp => NodeKind::Hcp,
        super::SimplifiedKind::AllNote => NodeKind::Note,
    };
    emit(
        out,
        &GraphDumpRecord::Graph {
            schema_version: DUMP_SCHEMA_VERSION,
            patient_id: graph.patient_id.clone(),
            structure: graph.kind.as_str().into(),
            latest_event: None,
            provenance: provenance.cloned(),
        },
    )?;
    for id in &graph.nodes {
        emit(
            out,
            &GraphDumpRecord::Node {
                id: id.clone(),
                kind,
                attrs: None,
            },
        )?;
    }
    for &(s, d) in &graph.edges {
        emit(
            out,
            &GraphDumpRecord::Edge {
                src: graph.nodes[s].clone(),
                dst: graph.nodes[d].clone(),
            },
        )?;
    }
    Ok(())
}

/// Reads a bipartite dump written by [`write_graph_dump`].
pub fn read_graph_dump<R: BufRead>(input: R, source: &std::path::Path) -> Result<CollabGraph> {
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        reason,
    };
    let mut graph: Option<CollabGraph> = None;
    let mut index = std::collections::HashMap::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GraphDumpRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
        match (record, graph.as_mut()) {
            (
                GraphDumpRecord::Graph {
                    schema_version,
                    patient_id,
                    structure,
                    latest_event,
                    ..
                },
                None,
            ) => {
                if schema_version != DUMP_SCHEMA_VERSION {
                    return Err(Error::SchemaVersion {
                        path: source.to_path_buf(),
                        found: schema_version,
                        expected: DUMP_SCHEMA_VERSION,
                    });
                }
                if structure != "bipartite" {
                    return Err(parse_err(
                        i + 1,
                        format!("not a bipartite dump: {structure}"),
                    ));
                }
                let mut g = CollabGraph::empty(patient_id);
                g.latest_event = latest_event;
                graph = Some(g);
            }
            (GraphDumpRecord::Node { id, attrs, .. }, Some(g)) => {
                let attrs =
                    attrs.ok_or_else(|| parse_err(i + 1, "node without attributes".into()))?;
                index.insert((id.clone(), attrs.kind()), g.nodes.len());
                g.nodes.push(GraphNode { id, attrs });
            }
            (GraphDumpRecord::Edge { src, dst }, Some(g)) => {
                let lookup = |id: &str| {
                    index
                        .get(&(id.to_string(), NodeKind::Hcp))
                        .or_else(|| index.get(&(id.to_string(), NodeKind::Note)))
                        .copied()
                        .ok_or_else(|| {
                            Error::Referential(format!("edge endpoint {id} not declared"))
                        })
                };
                g.edges.push((lookup(&src)?, lookup(&dst)?));
            }
            (_, _) => return Err(parse_err(i + 1, "unexpected record order".into())),
        }
    }
    graph.ok_or_else(|| parse_err(1, "empty dump".into()))
}
