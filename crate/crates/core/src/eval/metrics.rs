use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Instance, Model};

/// Probabilities at or above this are predicted "survived" (ties included).
pub const SURVIVED_AT: f64 = 0.5;

/// Per-class counts of correct predictions, as in a Table-1 style layout.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub n_survived: usize,
    pub n_deceased: usize,
    pub correct_survived: usize,
    pub correct_deceased: usize,
    pub accuracy: f64,
}

impl Metrics {
    pub fn from_predictions(probs: &[f64], labels: &[bool]) -> Metrics {
        let mut m = Metrics::default();
        for (&p, &y) in probs.iter().zip(labels) {
            let predicted = p >= SURVIVED_AT;
            if y {
                m.n_survived += 1;
                m.correct_survived += usize::from(predicted);
            } else {
                m.n_deceased += 1;
                m.correct_deceased += usize::from(!predicted);
            }
        }
        m.finish()
    }

    fn finish(mut self) -> Metrics {
        let n = self.n_survived + self.n_deceased;
        self.accuracy = if n == 0 {
            0.0
        } else {
            (self.correct_survived + self.correct_deceased) as f64 / n as f64
        };
        self
    }

    /// Summed counts (accuracy recomputed from the totals).
    pub fn sum(parts: &[Metrics]) -> Metrics {
        parts
            .iter()
            .fold(Metrics::default(), |acc, m| Metrics {
                n_survived: acc.n_survived + m.n_survived,
                n_deceased: acc.n_deceased + m.n_deceased,
                correct_survived: acc.correct_survived + m.correct_survived,
                correct_deceased: acc.correct_deceased + m.correct_deceased,
                accuracy: 0.0,
            })
            .finish()
    }
}

/// Thresholded evaluation of a frozen model.
pub fn evaluate(model: &Model, instances: &[Instance<'_>], labels: &[bool]) -> Result<Metrics> {
    if instances.len() != labels.len() {
        return Err(Error::dimension(
            "evaluation labels",
            instances.len(),
            labels.len(),
        ));
    }
    let probs = instances
        .iter()
        .map(|&x| model.predict(x))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Metrics::from_predictions(&probs, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use crate::synth::taxonomy::N_COMORBIDITIES;

    #[test]
    fn hand_counted_four_instances() {
        let probs = [0.9, 0.2, 0.6, 0.1];
        let labels = [true, true, false, false];
        let m = Metrics::from_predictions(&probs, &labels);
        assert_eq!(
            (
                m.n_survived,
                m.n_deceased,
                m.correct_survived,
                m.correct_deceased
            ),
            (2, 2, 1, 1)
        );
        assert_eq!(m.accuracy, 0.5);
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let labels = [true, false, true];
        assert_eq!(
            Metrics::from_predictions(&[1.0, 0.0, 0.8], &labels).accuracy,
            1.0
        );
        let m = Metrics::from_predictions(&[0.5; 3], &labels);
        assert_eq!((m.correct_survived, m.correct_deceased), (2, 0));
    }

    #[test]
    fn zero_model_predicts_everyone_survived() {
        let model = Model::zeros(ModelKind::ComorbidityOnly, 4).unwrap();
        let x = vec![0.0; N_COMORBIDITIES];
        let inst = [Instance::Comorbidity(&x), Instance::Comorbidity(&x)];
        let m = evaluate(&model, &inst, &[true, false]).unwrap();
        assert_eq!((m.correct_survived, m.correct_deceased), (1, 0));
    }

    #[test]
    fn sums_add_counts() {
        let a = Metrics::from_predictions(&[0.9, 0.1], &[true, true]);
        let b = Metrics::from_predictions(&[0.1], &[false]);
        let s = Metrics::sum(&[a, b]);
        assert_eq!(
            (
                s.n_survived,
                s.n_deceased,
                s.correct_survived,
                s.correct_deceased
            ),
            (2, 1, 1, 1)
        );
        assert!((s.accuracy - 2.0 / 3.0).abs() < 1e-15);
    }
}
