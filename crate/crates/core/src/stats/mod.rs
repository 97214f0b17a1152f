//! Confounder analysis: Pearson and Spearman correlations, with two-sided
//! p-values, between survival and gender, cancer stage, age and insurance.
//!
//! Both p-values use the Student-t transform
//! `t = r·√((n−2)/(1−r²))` with `n − 2` degrees of freedom; the tail
//! probability comes from the regularized incomplete beta function.

mod report;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::synth::{CancerStage, CancerType, Gender, Insurance, PatientRecord};

pub use report::write_correlations_csv;

/// P(T ≤ t) for Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, df / (df + t * t));
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value of a correlation coefficient `r` over `n` pairs.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let r2 = r * r;
    if r2 >= 1.0 {
        return 0.0;
    }
    // P(|T| ≥ |t|) = I_{df/(df+t²)}(df/2, 1/2) and df/(df+t²) = 1 − r².
    beta_reg(df / 2.0, 0.5, 1.0 - r2).clamp(0.0, 1.0)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::dimension("correlation pair", x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::DegenerateData(format!(
            "correlation needs at least 3 pairs, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input".into()));
    }
    Ok(())
}

fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    for (name, s) in [("x", sxx), ("y", syy)] {
        if s == 0.0 {
            return Err(Error::UndefinedCorrelation(format!("`{name}` is constant")));
        }
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Sample Pearson correlation and its two-sided p-value.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_pair(x, y)?;
    let r = pearson_r(x, y)?;
    Ok((r, correlation_p_value(r, x.len())))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        order[i..=j].iter().for_each(|&k| ranks[k] = rank);
        i = j + 1;
    }
    ranks
}

/// Spearman's rho (Pearson over average ranks) and its two-sided p-value.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_pair(x, y)?;
    let r = pearson_r(&average_ranks(x), &average_ranks(y))?;
    Ok((r, correlation_p_value(r, x.len())))
}

/// The four variables checked against survival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confounder {
    Gender,
    Stage,
    Age,
    Insurance,
}

impl Confounder {
    pub const ALL: [Confounder; 4] = [
        Confounder::Gender,
        Confounder::Stage,
        Confounder::Age,
        Confounder::Insurance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Confounder::Gender => "gender",
            Confounder::Stage => "stage",
            Confounder::Age => "age",
            Confounder::Insurance => "insurance",
        }
    }

    /// Numeric coding: female = 1, stage 3 = 1, private insurance = 1, age in years.
    pub fn encode(self, p: &PatientRecord) -> f64 {
        match self {
            Confounder::Gender => f64::from(u8::from(p.gender == Gender::Female)),
            Confounder::Stage => f64::from(u8::from(p.cancer_stage == CancerStage::Stage3)),
            Confounder::Age => f64::from(p.age),
            Confounder::Insurance => f64::from(u8::from(p.insurance == Insurance::Private)),
        }
    }
}

impl std::fmt::Display for Confounder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of the confounder table. Coefficients are absent, and `error`
/// says why, when a correlation is undefined for the group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    /// A cancer type, or `pooled` for all patients together.
    pub group: String,
    pub variable: Confounder,
    pub n: usize,
    pub pearson_r: Option<f64>,
    pub pearson_p: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub spearman_p: Option<f64>,
    pub error: Option<String>,
}

fn entry(
    group: &str,
    variable: Confounder,
    patients: &[&PatientRecord],
) -> Result<CorrelationEntry> {
    let x: Vec<f64> = patients.iter().map(|p| variable.encode(p)).collect();
    let y: Vec<f64> = patients
        .iter()
        .map(|p| f64::from(u8::from(p.survived)))
        .collect();
    let mut e = CorrelationEntry {
        group: group.to_string(),
        variable,
        n: patients.len(),
        pearson_r: None,
        pearson_p: None,
        spearman_rho: None,
        spearman_p: None,
        error: None,
    };
    match pearson(&x, &y).and_then(|pr| Ok((pr, spearman(&x, &y)?))) {
        Ok(((r, p), (rho, sp))) => {
            e.pearson_r = Some(r);
            e.pearson_p = Some(p);
            e.spearman_rho = Some(rho);
            e.spearman_p = Some(sp);
        }
        Err(err @ Error::UndefinedCorrelation(_)) => e.error = Some(err.to_string()),
        Err(err) => return Err(err.context(format!("{group} / {variable}"))),
    }
    Ok(e)
}

/// Correlation of survival with each confounder, per cancer type (in
/// declaration order, skipping absent types) and optionally pooled.
pub fn confounder_report(
    patients: &[PatientRecord],
    pooled: bool,
) -> Result<Vec<CorrelationEntry>> {
    if patients.is_empty() {
        return Err(Error::DegenerateData(
            "confounder report over no patients".into(),
        ));
    }
    let mut out = Vec::new();
    for cancer in CancerType::ALL {
        let group: Vec<&PatientRecord> = patients
            .iter()
            .filter(|p| p.cancer_type == cancer)
            .collect();
        if group.is_empty() {
            continue;
        }
        for v in Confounder::ALL {
            out.push(entry(cancer.as_str(), v, &group)?);
        }
    }
    if pooled {
        let all: Vec<&PatientRecord> = patients.iter().collect();
        for v in Confounder::ALL {
            out.push(entry("pooled", v, &all)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identical_vectors_are_perfectly_correlated() {
        let (r, p) = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(close(r, 1.0, 1e-15));
        assert!(p < 1e-6, "{p}");
        assert_eq!(correlation_p_value(1.0, 3), 0.0);
    }

    #[test]
    fn small_example_has_r_point_eight() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 1.0, 4.0, 3.0, 5.0];
        let (r, p) = pearson(&x, &y).unwrap();
        // cov = 8/4, var = 10/4 each.
        assert!(close(r, 0.8, 1e-15));
        assert!(close(p, 0.1041, 1e-4), "{p}");
    }

    #[test]
    fn affine_maps_give_unit_magnitude() {
        let x = [0.3, -1.0, 2.5, 4.0, 0.0];
        let up: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let down: Vec<f64> = x.iter().map(|v| -0.5 * v + 3.0).collect();
        assert!(close(pearson(&x, &up).unwrap().0, 1.0, 1e-12));
        assert!(close(pearson(&x, &down).unwrap().0, -1.0, 1e-12));
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(
            average_ranks(&[1.0, 2.0, 2.0, 4.0]),
            vec![1.0, 2.5, 2.5, 4.0]
        );
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 3.0]),
            vec![3.0, 1.0, 3.0, 3.0]
        );
        let (rho, _) = spearman(&[1.0, 2.0, 2.0, 4.0], &[10.0, 20.0, 20.0, 40.0]).unwrap();
        assert!(close(rho, 1.0, 1e-15));
    }

    #[test]
    fn spearman_reversal_and_monotone_invariance() {
        assert!(close(
            spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().0,
            -1.0,
            1e-15
        ));
        let x = [0.1, 0.7, 0.3, 0.9, 0.5];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.exp() * 10.0).collect();
        assert!(close(spearman(&x, &y).unwrap().0, 1.0, 1e-15));
    }

    #[test]
    fn constant_input_is_an_error_not_zero() {
        let err = pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::UndefinedCorrelation(_)));
        assert!(matches!(
            spearman(&[1.0, 2.0, 3.0], &[5.0; 3]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn t_cdf_is_symmetric() {
        for t in [0.0, 0.5, 2.0, 7.0] {
            assert!(close(
                student_t_cdf(t, 10.0) + student_t_cdf(-t, 10.0),
                1.0,
                1e-14
            ));
        }
        assert_eq!(student_t_cdf(0.0, 4.0), 0.5);
        assert_eq!(student_t_cdf(f64::INFINITY, 4.0), 1.0);
    }

    #[test]
    fn confounder_codings() {
        let p = PatientRecord {
            patient_id: "P".into(),
            cancer_type: CancerType::Lung,
            cancer_stage: CancerStage::Stage3,
            gender: Gender::Female,
            age: 61,
            insurance: Insurance::Public,
            comorbidities: vec![0; crate::synth::taxonomy::N_COMORBIDITIES],
            survived: true,
        };
        let codes: Vec<f64> = Confounder::ALL.iter().map(|c| c.encode(&p)).collect();
        assert_eq!(codes, vec![1.0, 1.0, 61.0, 0.0]);
    }
}
