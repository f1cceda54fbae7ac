//! Exponential smoothing for reporting curves.

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("smoothing factor must be in [0,1), got {0}")]
    BadFactor(f64),
}

/// A raw series with its exponentially smoothed companion.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSeries {
    pub raw: Vec<f64>,
    pub factor: f64,
    pub smoothed: Vec<f64>,
}

/// `s[t] = factor * s[t-1] + (1 - factor) * raw[t]`, seeded with `s[-1] = 0`.
pub fn ema_smooth(raw: &[f64], factor: f64) -> Result<SmoothedSeries, SeriesError> {
    if !(factor.is_finite() && (0.0..1.0).contains(&factor)) {
        return Err(SeriesError::BadFactor(factor));
    }
    let mut smoothed = Vec::with_capacity(raw.len());
    let mut prev = 0.0;
    for &value in raw {
        prev = factor * prev + (1.0 - factor) * value;
        smoothed.push(prev);
    }
    Ok(SmoothedSeries {
        raw: raw.to_vec(),
        factor,
        smoothed,
    })
}

/// The smoothing strength used for all reported curves.
pub const REPORT_FACTOR: f64 = 0.6;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_unrolled_two_steps() {
        // s0 = 0.4*1 = 0.4; s1 = 0.6*0.4 + 0.4*0 = 0.24.
        let out = ema_smooth(&[1.0, 0.0], 0.6).unwrap();
        assert!((out.smoothed[0] - 0.4).abs() < 1e-15);
        assert!((out.smoothed[1] - 0.24).abs() < 1e-15);
    }

    #[test]
    fn constant_series_follows_closed_form() {
        // For raw = c the recurrence gives s[t] = c * (1 - 0.6^(t+1)).
        let c = 0.83;
        let out = ema_smooth(&[c; 12], 0.6).unwrap();
        for (t, &s) in out.smoothed.iter().enumerate() {
            let want = c * (1.0 - 0.6f64.powi(t as i32 + 1));
            assert!((s - want).abs() < 1e-12, "t={t}: {s} vs {want}");
        }
    }

    #[test]
    fn brute_force_recurrence_agreement() {
        let raw: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let out = ema_smooth(&raw, 0.6).unwrap();
        let mut prev = 0.0;
        for (i, &r) in raw.iter().enumerate() {
            prev = 0.6 * prev + 0.4 * r;
            assert!((out.smoothed[i] - prev).abs() < 1e-12);
        }
    }

    #[test]
    fn factor_zero_is_identity() {
        let raw = [0.3, 0.9, 0.1];
        let out = ema_smooth(&raw, 0.0).unwrap();
        assert_eq!(out.smoothed, raw.to_vec());
    }

    #[test]
    fn rejects_factor_one_and_above() {
        assert!(ema_smooth(&[1.0], 1.0).is_err());
        assert!(ema_smooth(&[1.0], -0.1).is_err());
        assert!(ema_smooth(&[1.0], f64::NAN).is_err());
    }

    #[test]
    fn empty_series_allowed() {
        let out = ema_smooth(&[], 0.6).unwrap();
        assert!(out.smoothed.is_empty());
    }
}
