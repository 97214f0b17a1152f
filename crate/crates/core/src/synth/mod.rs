//! Synthetic cohorts and EHR access logs with planted survival signals.
//!
//! A generated cohort stands in for a private clinical dataset: patients with
//! demographics, cancer type/stage, a 39-dim comorbidity vector and a survival
//! label, plus the HCPs and notes of their care and the timestamped read/write
//! events that connect them. Every synthetic patient is alive at day +365; the
//! survival label refers to the outcome after that point.

mod dataset;
mod generate;
pub mod taxonomy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{read_dataset, write_dataset, SCHEMA_VERSION};
pub use generate::{generate_cohort, logit, sigmoid, SeverityPlan, LOGIT_NOISE_SD};

use taxonomy::{N_COMORBIDITIES, N_CONTENTS, N_HCP_TYPES, N_INTENTS, N_SPECIALTIES, N_TITLES};

/// Earliest event time, in days relative to diagnosis.
pub const LOG_START: f64 = -90.0;
/// Latest event time, in days relative to diagnosis.
pub const LOG_END: f64 = 365.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CancerType {
    Breast,
    Lung,
    Colorectal,
}

impl CancerType {
    pub const ALL: [CancerType; 3] = [CancerType::Breast, CancerType::Lung, CancerType::Colorectal];

    pub fn as_str(self) -> &'static str {
        match self {
            CancerType::Breast => "breast",
            CancerType::Lung => "lung",
            CancerType::Colorectal => "colorectal",
        }
    }
}

impl std::fmt::Display for CancerType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CancerType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "breast" => Ok(CancerType::Breast),
            "lung" => Ok(CancerType::Lung),
            "colorectal" => Ok(CancerType::Colorectal),
            other => Err(Error::config(
                "cancer_type",
                format!("unknown cancer type {other:?} (expected breast, lung or colorectal)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum CancerStage {
    Stage2,
    Stage3,
}

impl From<CancerStage> for u8 {
    fn from(s: CancerStage) -> u8 {
        match s {
            CancerStage::Stage2 => 2,
            CancerStage::Stage3 => 3,
        }
    }
}

impl TryFrom<u8> for CancerStage {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            2 => Ok(CancerStage::Stage2),
            3 => Ok(CancerStage::Stage3),
            other => Err(format!("cancer_stage must be 2 or 3, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Insurance {
    Private,
    Public,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub cancer_type: CancerType,
    pub cancer_stage: CancerStage,
    pub gender: Gender,
    pub age: u32,
    pub insurance: Insurance,
    pub comorbidities: Vec<u8>,
    pub survived: bool,
}

impl PatientRecord {
    pub fn comorbidity_count(&self) -> usize {
        self.comorbidities.iter().filter(|&&c| c == 1).count()
    }

    pub fn comorbidity_vector(&self) -> Vec<f64> {
        self.comorbidities.iter().map(|&c| f64::from(c)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.comorbidities.len() != N_COMORBIDITIES {
            return Err(Error::invariant(
                "PatientRecord.comorbidities",
                format!(
                    "{}: expected {N_COMORBIDITIES} entries, found {}",
                    self.patient_id,
                    self.comorbidities.len()
                ),
            ));
        }
        if let Some(bad) = self.comorbidities.iter().find(|&&c| c > 1) {
            return Err(Error::invariant(
                "PatientRecord.comorbidities",
                format!("{}: entry {bad} is not binary", self.patient_id),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcpProfile {
    pub hcp_id: String,
    pub title: usize,
    pub hcp_type: usize,
    pub specialty: usize,
    pub is_resident: bool,
}

impl HcpProfile {
    pub fn validate(&self) -> Result<()> {
        check_index("HcpProfile.title", &self.hcp_id, self.title, N_TITLES)?;
        check_index(
            "HcpProfile.hcp_type",
            &self.hcp_id,
            self.hcp_type,
            N_HCP_TYPES,
        )?;
        check_index(
            "HcpProfile.specialty",
            &self.hcp_id,
            self.specialty,
            N_SPECIALTIES,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteProfile {
    pub note_id: String,
    pub intent: usize,
    pub content: usize,
    pub is_inpatient: bool,
}

impl NoteProfile {
    pub fn validate(&self) -> Result<()> {
        check_index("NoteProfile.intent", &self.note_id, self.intent, N_INTENTS)?;
        check_index(
            "NoteProfile.content",
            &self.note_id,
            self.content,
            N_CONTENTS,
        )
    }
}

fn check_index(field: &str, id: &str, value: usize, card: usize) -> Result<()> {
    if value >= card {
        return Err(Error::invariant(
            field,
            format!("{id}: index {value} out of range 0..{card}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessLogEvent {
    pub patient_id: String,
    pub hcp_id: String,
    pub note_id: String,
    pub action: Action,
    pub t: f64,
}

impl AccessLogEvent {
    pub fn validate(&self) -> Result<()> {
        if !(LOG_START..=LOG_END).contains(&self.t) {
            return Err(Error::invariant(
                "AccessLogEvent.t",
                format!(
                    "{} by {} on {}: t = {} outside [{LOG_START}, {LOG_END}]",
                    self.patient_id, self.hcp_id, self.note_id, self.t
                ),
            ));
        }
        Ok(())
    }
}

/// Every note has exactly one write, and no read precedes it.
pub fn validate_note_writes(events: &[AccessLogEvent]) -> Result<()> {
    use std::collections::HashMap;

    let mut writes: HashMap<&str, (usize, f64)> = HashMap::new();
    for e in events.iter().filter(|e| e.action == Action::Write) {
        let entry = writes.entry(&e.note_id).or_insert((0, e.t));
        entry.0 += 1;
        if entry.0 > 1 {
            return Err(Error::invariant(
                "AccessLogEvent.action",
                format!("note {} has more than one write event", e.note_id),
            ));
        }
    }
    for e in events.iter().filter(|e| e.action == Action::Read) {
        match writes.get(e.note_id.as_str()) {
            None => {
                return Err(Error::invariant(
                    "AccessLogEvent.action",
                    format!("note {} is read but never written", e.note_id),
                ))
            }
            Some(&(_, tw)) if e.t < tw => {
                return Err(Error::invariant(
                    "AccessLogEvent.t",
                    format!(
                        "note {} read at t = {} before its write at t = {tw}",
                        e.note_id, e.t
                    ),
                ))
            }
            _ => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cohort {
    pub patients: Vec<PatientRecord>,
    pub hcps: Vec<HcpProfile>,
    pub notes: Vec<NoteProfile>,
    pub events: Vec<AccessLogEvent>,
}

impl Cohort {
    pub fn validate(&self) -> Result<()> {
        for p in &self.patients {
            p.validate()?;
        }
        for h in &self.hcps {
            h.validate()?;
        }
        for n in &self.notes {
            n.validate()?;
        }
        for e in &self.events {
            e.validate()?;
        }
        validate_note_writes(&self.events)
    }

    pub fn patients_of(&self, cancer: CancerType) -> impl Iterator<Item = &PatientRecord> {
        self.patients
            .iter()
            .filter(move |p| p.cancer_type == cancer)
    }
}

/// Target survived fraction per cancer type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSkew {
    pub breast: f64,
    pub lung: f64,
    pub colorectal: f64,
}

impl ClassSkew {
    pub fn get(&self, cancer: CancerType) -> f64 {
        match cancer {
            CancerType::Breast => self.breast,
            CancerType::Lung => self.lung,
            CancerType::Colorectal => self.colorectal,
        }
    }
}

impl Default for ClassSkew {
    fn default() -> Self {
        ClassSkew {
            breast: 0.85,
            lung: 0.65,
            colorectal: 0.85,
        }
    }
}

/// Generator settings. Omitted fields take their defaults, so an omitted
/// `class_skew` means the default skews; only an explicit `null` (JSON)
/// disables calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub patients_per_cancer: usize,
    /// Survival probability of a patient with no GP and no comorbidities when
    /// `class_skew` is unset.
    pub survival_base_rate: f64,
    pub gp_effect: f64,
    pub comorbidity_effect: f64,
    pub hcp_pool_size: usize,
    pub mean_notes_per_patient: f64,
    pub mean_reads_per_note: f64,
    /// When set, each cancer type is calibrated to this survived fraction.
    pub class_skew: Option<ClassSkew>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            patients_per_cancer: 200,
            survival_base_rate: 0.5,
            gp_effect: 2.0,
            comorbidity_effect: 0.5,
            hcp_pool_size: 300,
            mean_notes_per_patient: 12.0,
            mean_reads_per_note: 2.0,
            class_skew: Some(ClassSkew::default()),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        fn open_unit(field: &str, v: f64) -> Result<()> {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(field, format!("must lie in (0, 1), got {v}")));
            }
            Ok(())
        }
        open_unit("survival_base_rate", self.survival_base_rate)?;
        if self.patients_per_cancer == 0 {
            return Err(Error::config("patients_per_cancer", "must be > 0"));
        }
        if self.hcp_pool_size == 0 {
            return Err(Error::config("hcp_pool_size", "must be > 0"));
        }
        if !(self.gp_effect.is_finite() && self.gp_effect >= 0.0) {
            return Err(Error::config(
                "gp_effect",
                format!("must be finite and >= 0, got {}", self.gp_effect),
            ));
        }
        if !(self.comorbidity_effect.is_finite() && self.comorbidity_effect >= 0.0) {
            return Err(Error::config(
                "comorbidity_effect",
                format!("must be finite and >= 0, got {}", self.comorbidity_effect),
            ));
        }
        for (field, v) in [
            ("mean_notes_per_patient", self.mean_notes_per_patient),
            ("mean_reads_per_note", self.mean_reads_per_note),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if let Some(skew) = &self.class_skew {
            open_unit("class_skew.breast", skew.breast)?;
            open_unit("class_skew.lung", skew.lung)?;
            open_unit("class_skew.colorectal", skew.colorectal)?;
        }
        Ok(())
    }
}
