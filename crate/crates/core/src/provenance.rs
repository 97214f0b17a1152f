//! Provenance stamped into every emitted artifact.

use serde::{Deserialize, Serialize};

/// Which configuration, seed and tool version produced an artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub config_hash: String,
    pub tool_version: String,
}

/// One comment line carrying provenance, for delimiter-separated outputs.
pub fn provenance_comment(meta: &RunMeta) -> String {
    format!(
        "# config_hash={} seed={} tool_version={}\n",
        meta.config_hash, meta.seed, meta.tool_version
    )
}
