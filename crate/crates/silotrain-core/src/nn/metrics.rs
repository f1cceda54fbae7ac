//! Binary cross-entropy, thresholded accuracy, and the ordering used to
//! compare candidate models.

use alloc::format;
use alloc::string::String;

use super::NnError;

/// Predictions are clamped into `[EPSILON, 1 - EPSILON]` before the log.
pub const EPSILON: f64 = 1e-7;

/// Mean binary cross-entropy over a prediction/label pairing.
pub fn bce_loss(predictions: &[f64], labels: &[f64]) -> Result<f64, NnError> {
    if predictions.len() != labels.len() {
        return Err(NnError::Dimension(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(NnError::Domain(String::from(
            "loss needs at least one prediction",
        )));
    }
    let mut sum = 0.0;
    for (&p, &y) in predictions.iter().zip(labels) {
        let p = p.clamp(EPSILON, 1.0 - EPSILON);
        sum -= y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p);
    }
    Ok(sum / predictions.len() as f64)
}

/// Fraction of predictions whose thresholded class matches the label.
/// A prediction exactly at the threshold counts as class 1.
pub fn accuracy(predictions: &[f64], labels: &[f64], threshold: f64) -> Result<f64, NnError> {
    if predictions.len() != labels.len() {
        return Err(NnError::Dimension(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(NnError::Domain(String::from(
            "accuracy needs at least one prediction",
        )));
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| {
            let class = if p >= threshold { 1.0 } else { 0.0 };
            class == y
        })
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Evaluation result ordered by accuracy first, then by lower loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub accuracy: f64,
    pub loss: f64,
}

impl Metric {
    /// Strictly better: higher accuracy, or equal accuracy with lower loss.
    /// A full tie is not an improvement.
    pub fn beats(&self, other: &Metric) -> bool {
        self.accuracy > other.accuracy
            || (self.accuracy == other.accuracy && self.loss < other.loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar-by-scalar reference, kept deliberately naive.
    fn bce_by_hand(p: &[f64], y: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..p.len() {
            let mut pi = p[i];
            if pi < EPSILON {
                pi = EPSILON;
            }
            if pi > 1.0 - EPSILON {
                pi = 1.0 - EPSILON;
            }
            total += -(y[i] * pi.ln() + (1.0 - y[i]) * (1.0 - pi).ln());
        }
        total / p.len() as f64
    }

    #[test]
    fn matches_scalar_reference() {
        let p = [0.9, 0.1, 0.5, 0.999, 0.02, 0.77];
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let got = bce_loss(&p, &y).unwrap();
        let want = bce_by_hand(&p, &y);
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }

    #[test]
    fn perfect_confident_predictions_hit_clamp_floor() {
        let p = [1.0, 0.0];
        let y = [1.0, 0.0];
        let got = bce_loss(&p, &y).unwrap();
        let want = -((1.0f64 - EPSILON).ln());
        assert!((got - want).abs() < 1e-12);
        assert!(got > 0.0);
    }

    #[test]
    fn extreme_wrong_prediction_stays_finite() {
        let got = bce_loss(&[0.0], &[1.0]).unwrap();
        assert!(got.is_finite());
        assert!((got - (-(EPSILON.ln()))).abs() < 1e-9);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            bce_loss(&[0.5], &[1.0, 0.0]),
            Err(NnError::Dimension(_))
        ));
        assert!(matches!(
            accuracy(&[0.5], &[1.0, 0.0], 0.5),
            Err(NnError::Dimension(_))
        ));
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(bce_loss(&[], &[]), Err(NnError::Domain(_))));
        assert!(matches!(accuracy(&[], &[], 0.5), Err(NnError::Domain(_))));
    }

    #[test]
    fn accuracy_hand_count() {
        // Hand count: 0.9->1 (hit), 0.5->1 at threshold (hit), 0.3->0 vs 1
        // (miss), 0.1->0 (hit). Three of four.
        let p = [0.9, 0.5, 0.3, 0.1];
        let y = [1.0, 1.0, 1.0, 0.0];
        let got = accuracy(&p, &y, 0.5).unwrap();
        assert_eq!(got, 0.75);
    }

    #[test]
    fn metric_ordering() {
        let a = Metric { accuracy: 0.9, loss: 0.5 };
        assert!(Metric { accuracy: 0.95, loss: 0.9 }.beats(&a));
        assert!(Metric { accuracy: 0.9, loss: 0.4 }.beats(&a));
        assert!(!Metric { accuracy: 0.9, loss: 0.5 }.beats(&a));
        assert!(!Metric { accuracy: 0.9, loss: 0.6 }.beats(&a));
        assert!(!Metric { accuracy: 0.85, loss: 0.1 }.beats(&a));
    }
}
