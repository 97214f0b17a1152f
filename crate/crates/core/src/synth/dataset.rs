//! Line-delimited JSON dataset files.
//!
//! A dataset directory holds `patients.jsonl`, `hcps.jsonl`, `notes.jsonl`,
//! `events.jsonl` (one record per line, each carrying `schema_version`) and a
//! `manifest.json` with record counts and the generating config.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::taxonomy::TAXONOMY_VERSION;
use super::{Cohort, SynthConfig};
use crate::error::{Error, Result};
use crate::provenance::RunMeta;

pub const SCHEMA_VERSION: u32 = 1;

const PATIENTS: &str = "patients.jsonl";
const HCPS: &str = "hcps.jsonl";
const NOTES: &str = "notes.jsonl";
const EVENTS: &str = "events.jsonl";
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordCounts {
    pub patients: usize,
    pub hcps: usize,
    pub notes: usize,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub taxonomy_version: u32,
    pub counts: RecordCounts,
    pub config: Option<SynthConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<RunMeta>,
}

fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let mut value = serde_json::to_value(record).expect("records serialize to objects");
        let map = value.as_object_mut().expect("records serialize to objects");
        let mut line = serde_json::Map::with_capacity(map.len() + 1);
        line.insert("schema_version".into(), SCHEMA_VERSION.into());
        line.append(map);
        serde_json::to_writer(&mut out, &line).expect("in-memory JSON value");
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            reason,
        };
        let mut value: Value = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let map = value
            .as_object_mut()
            .ok_or_else(|| parse_err("record is not an object".into()))?;
        let version = map
            .remove("schema_version")
            .ok_or_else(|| parse_err("missing schema_version".into()))?;
        let version = version
            .as_u64()
            .ok_or_else(|| parse_err("schema_version is not an integer".into()))?;
        if version != u64::from(SCHEMA_VERSION) {
            return Err(Error::SchemaVersion {
                path: path.to_path_buf(),
                found: version as u32,
                expected: SCHEMA_VERSION,
            });
        }
        records.push(serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(records)
}

/// Writes `cohort` into directory `dir`, creating it if needed. The manifest
/// records the generating config and provenance when given.
pub fn write_dataset(
    cohort: &Cohort,
    config: Option<&SynthConfig>,
    provenance: Option<&RunMeta>,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_records(&dir.join(PATIENTS), &cohort.patients)?;
    write_records(&dir.join(HCPS), &cohort.hcps)?;
    write_records(&dir.join(NOTES), &cohort.notes)?;
    write_records(&dir.join(EVENTS), &cohort.events)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        taxonomy_version: TAXONOMY_VERSION,
        counts: RecordCounts {
            patients: cohort.patients.len(),
            hcps: cohort.hcps.len(),
            notes: cohort.notes.len(),
            events: cohort.events.len(),
        },
        config: config.cloned(),
        provenance: provenance.cloned(),
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: e.line(),
        reason: e.to_string(),
    })?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path,
            found: manifest.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    if manifest.taxonomy_version != TAXONOMY_VERSION {
        return Err(Error::invariant(
            "Manifest.taxonomy_version",
            format!(
                "dataset uses taxonomy v{}, this build knows v{TAXONOMY_VERSION}",
                manifest.taxonomy_version
            ),
        ));
    }
    Ok(manifest)
}

/// Reads a dataset directory and checks every record invariant.
pub fn read_dataset(dir: &Path) -> Result<Cohort> {
    let manifest = read_manifest(dir)?;
    let cohort = Cohort {
        patients: read_records(&dir.join(PATIENTS))?,
        hcps: read_records(&dir.join(HCPS))?,
        notes: read_records(&dir.join(NOTES))?,
        events: read_records(&dir.join(EVENTS))?,
    };
    let found = RecordCounts {
        patients: cohort.patients.len(),
        hcps: cohort.hcps.len(),
        notes: cohort.notes.len(),
        events: cohort.events.len(),
    };
    if found != manifest.counts {
        return Err(Error::invariant(
            "Manifest.counts",
            format!("manifest lists {:?}, files hold {found:?}", manifest.counts),
        ));
    }
    cohort.validate()?;
    Ok(cohort)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_cohort, SynthConfig};

    fn small_config() -> SynthConfig {
        SynthConfig {
            patients_per_cancer: 5,
            hcp_pool_size: 60,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn round_trip_is_field_exact() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config();
        let cohort = generate_cohort(&config).unwrap();
        write_dataset(&cohort, Some(&config), None, dir.path()).unwrap();
        assert_eq!(read_dataset(dir.path()).unwrap(), cohort);
        assert_eq!(read_manifest(dir.path()).unwrap().config, Some(config));
    }

    #[test]
    fn empty_cohort_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&Cohort::default(), None, None, dir.path()).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert!(back.patients.is_empty() && back.events.is_empty());
    }

    #[test]
    fn out_of_range_read_time_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cohort = generate_cohort(&small_config()).unwrap();
        write_dataset(&cohort, None, None, dir.path()).unwrap();
        let path = dir.path().join(EVENTS);
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let idx = lines.iter().position(|l| l.contains("\"read\"")).unwrap();
        let mut v: Value = serde_json::from_str(&lines[idx]).unwrap();
        v["t"] = 400.0.into();
        lines[idx] = v.to_string();
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        let err = read_dataset(dir.path()).unwrap_err();
        assert!(
            matches!(&err, Error::Invariant { field, .. } if field == "AccessLogEvent.t"),
            "{err}"
        );
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let cohort = generate_cohort(&small_config()).unwrap();
        write_dataset(&cohort, None, None, dir.path()).unwrap();
        let path = dir.path().join(NOTES);
        let mut text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[2] = "{not json";
        text = lines.join("\n");
        fs::write(&path, text).unwrap();
        match read_dataset(dir.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn schema_version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let cohort = generate_cohort(&small_config()).unwrap();
        write_dataset(&cohort, None, None, dir.path()).unwrap();
        let path = dir.path().join(HCPS);
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"schema_version\":1", "\"schema_version\":9");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            read_dataset(dir.path()).unwrap_err(),
            Error::SchemaVersion { found: 9, .. }
        ));
    }
}
