use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A ground-truth break carried along with simulated data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueBreak {
    /// Last sample index (1-based) of the regime ending at the break.
    pub break_time: usize,
    /// Frequency at which the spectrum jumps, in radians.
    pub frequency: f64,
}

/// A univariate sample `X_1, ..., X_T`.
///
/// Time indices used across the crate are 1-based, so `value(t)` returns
/// the `t`-th observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    truth: Option<Vec<TrueBreak>>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Size(format!(
                "a series needs at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite observation at t = {}",
                pos + 1
            )));
        }
        Ok(Self {
            values,
            truth: None,
        })
    }

    /// Attaches ground-truth break metadata. Break times must be strictly
    /// increasing and lie strictly inside `(1, T)`.
    pub fn with_truth(mut self, truth: Vec<TrueBreak>) -> Result<Self> {
        let len = self.values.len();
        for (i, b) in truth.iter().enumerate() {
            if b.break_time <= 1 || b.break_time >= len {
                return Err(Error::Config(format!(
                    "break time {} outside (1, {len})",
                    b.break_time
                )));
            }
            if i > 0 && truth[i - 1].break_time >= b.break_time {
                return Err(Error::Config("break times must be strictly increasing".into()));
            }
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn truth(&self) -> Option<&[TrueBreak]> {
        self.truth.as_deref()
    }

    /// Observation at 1-based time `t`.
    pub fn value(&self, t: usize) -> f64 {
        self.values[t - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Returns the globally mean-corrected series. Truth metadata is kept.
    pub fn demeaned(&self) -> Self {
        let mean = self.mean();
        Self {
            values: self.values.iter().map(|v| v - mean).collect(),
            truth: self.truth.clone(),
        }
    }

    /// Multiplies every observation by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            truth: self.truth.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_and_non_finite() {
        assert!(matches!(TimeSeries::new(vec![1.0]), Err(Error::Size(_))));
        assert!(matches!(
            TimeSeries::new(vec![1.0, f64::NAN, 2.0]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn truth_must_be_increasing_and_interior() {
        let x = TimeSeries::new(vec![0.0; 10]).unwrap();
        let b = |t| TrueBreak {
            break_time: t,
            frequency: 0.0,
        };
        assert!(x.clone().with_truth(vec![b(3), b(7)]).is_ok());
        assert!(x.clone().with_truth(vec![b(7), b(3)]).is_err());
        assert!(x.clone().with_truth(vec![b(1)]).is_err());
        assert!(x.with_truth(vec![b(10)]).is_err());
    }

    #[test]
    fn demeaning_centers() {
        let x = TimeSeries::new(vec![1.0, 2.0, 3.0, 6.0]).unwrap().demeaned();
        assert!(x.mean().abs() < 1e-15);
        assert_eq!(x.value(1), -2.0);
    }
}
