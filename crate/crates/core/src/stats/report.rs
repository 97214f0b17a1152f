use std::fs;
use std::path::Path;

use super::CorrelationEntry;
use crate::error::{Error, Result};
use crate::eval::{provenance_comment, RunMeta};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per (group, variable); undefined coefficients are blank with the
/// reason in the `error` column.
pub fn write_correlations_csv(
    entries: &[CorrelationEntry],
    meta: &RunMeta,
    path: &Path,
) -> Result<()> {
    let mut buf = provenance_comment(meta).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "group",
            "variable",
            "n",
            "pearson_r",
            "pearson_p",
            "spearman_rho",
            "spearman_p",
            "error",
        ])
        .map_err(|e| Error::io(path, e.into()))?;
        for e in entries {
            w.write_record([
                e.group.clone(),
                e.variable.to_string(),
                e.n.to_string(),
                opt(e.pearson_r),
                opt(e.pearson_p),
                opt(e.spearman_rho),
                opt(e.spearman_p),
                e.error.clone().unwrap_or_default(),
            ])
            .map_err(|e| Error::io(path, e.into()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}
