//! Experiment harness: per-cancer-type datasets, stratified k-fold
//! cross-validation, the three-model comparison and report emission.

mod compare;
mod folds;
mod metrics;
mod report;

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::graph::{
    build_graph, filter_window, simplify_to_hcp, simplify_to_notes, CollabGraph, ProfileIndex,
    SimplifiedKind, TimeWindows,
};
use crate::models::{degree_features, GraphInput, Instance, ModelKind};
use crate::synth::{AccessLogEvent, CancerType, Cohort, PatientRecord};

pub use crate::provenance::{provenance_comment, RunMeta};
pub use compare::{
    cell_seed, run_comparison, CellOutcome, CellReport, EvalConfig, ExperimentReport, FoldResult,
    Protocol,
};
pub use folds::{stratified_kfold, Fold};
pub use metrics::{evaluate, Metrics, SURVIVED_AT};
pub use report::{write_report_csv, write_report_json, write_report_svg};

/// Everything the models need about one patient.
#[derive(Debug, Clone)]
pub struct PatientExample {
    pub patient_id: String,
    pub cancer_type: CancerType,
    pub survived: bool,
    pub graph: GraphInput,
    pub comorbidity: Vec<f64>,
    pub topo_hcp: GraphInput,
    pub topo_note: GraphInput,
}

impl PatientExample {
    pub fn new(patient: &PatientRecord, graph: &CollabGraph) -> Result<Self> {
        Ok(PatientExample {
            patient_id: patient.patient_id.clone(),
            cancer_type: patient.cancer_type,
            survived: patient.survived,
            graph: GraphInput::from_graph(graph)?,
            comorbidity: patient.comorbidity_vector(),
            topo_hcp: degree_features(&simplify_to_hcp(graph))?,
            topo_note: degree_features(&simplify_to_notes(graph))?,
        })
    }

    /// The input this patient presents to a model of `kind`.
    pub fn instance(&self, kind: ModelKind) -> Instance<'_> {
        match kind {
            ModelKind::CollabOnly | ModelKind::AttrOnly => Instance::Graph(&self.graph),
            ModelKind::ComorbidityOnly => Instance::Comorbidity(&self.comorbidity),
            ModelKind::Combined => Instance::Combined(&self.graph, &self.comorbidity),
            ModelKind::TopoOnly(SimplifiedKind::AllHcp) => {
                Instance::Topo(SimplifiedKind::AllHcp, &self.topo_hcp)
            }
            ModelKind::TopoOnly(SimplifiedKind::AllNote) => {
                Instance::Topo(SimplifiedKind::AllNote, &self.topo_note)
            }
        }
    }
}

/// Fails with a leakage error if `graph` was built from any event after the
/// observation window.
pub fn assert_no_leakage(graph: &CollabGraph, windows: &TimeWindows) -> Result<()> {
    match graph.latest_event {
        Some(t) if t > windows.observation_end || t < windows.observation_start => {
            Err(Error::Leakage {
                patient_id: graph.patient_id.clone(),
                t,
            })
        }
        _ => Ok(()),
    }
}

/// Groups events by patient, preserving their order.
pub fn events_by_patient(events: &[AccessLogEvent]) -> HashMap<&str, Vec<AccessLogEvent>> {
    let mut map: HashMap<&str, Vec<AccessLogEvent>> = HashMap::new();
    for e in events {
        map.entry(e.patient_id.as_str())
            .or_default()
            .push(e.clone());
    }
    map
}

/// Observation-window graphs of every patient, in patient order.
pub fn build_cohort_graphs(cohort: &Cohort, windows: &TimeWindows) -> Result<Vec<CollabGraph>> {
    windows.validate()?;
    let profiles = ProfileIndex::new(&cohort.hcps, &cohort.notes);
    let by_patient = events_by_patient(&cohort.events);
    cohort
        .patients
        .iter()
        .map(|p| {
            let events = by_patient
                .get(p.patient_id.as_str())
                .map(|e| filter_window(e, windows))
                .unwrap_or_default();
            build_graph(&p.patient_id, &events, &profiles)
        })
        .collect()
}

/// Per-cancer-type example sets; every graph passes the leakage guard.
pub fn prepare_datasets(
    patients: &[PatientRecord],
    graphs: &[CollabGraph],
    windows: &TimeWindows,
) -> Result<BTreeMap<CancerType, Vec<PatientExample>>> {
    if patients.len() != graphs.len() {
        return Err(Error::dimension(
            "graphs per patient",
            patients.len(),
            graphs.len(),
        ));
    }
    let mut out: BTreeMap<CancerType, Vec<PatientExample>> = BTreeMap::new();
    for (p, g) in patients.iter().zip(graphs) {
        if p.patient_id != g.patient_id {
            return Err(Error::Referential(format!(
                "graph {} paired with patient {}",
                g.patient_id, p.patient_id
            )));
        }
        assert_no_leakage(g, windows)?;
        out.entry(p.cancer_type)
            .or_default()
            .push(PatientExample::new(p, g)?);
    }
    Ok(out)
}
