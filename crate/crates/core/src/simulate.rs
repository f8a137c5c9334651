//! Data-generating processes used to study size, power and localization.
//!
//! Every model is an AR(1) recursion `X_t = ρ(t/T) X_{t-1} + σ(t/T) e_t`
//! with i.i.d. standard normal `e_t` and regime-dependent parameters.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::series::{TimeSeries, TrueBreak};

pub const DEFAULT_BREAKS: (f64, f64) = (0.33, 0.66);
pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Model {
    /// Stationary AR(1) with coefficient `rho`.
    M1 { rho: f64 },
    /// AR(1) with `ρ(u) = 0.4 cos(0.8 − cos 2u)`.
    M2,
    /// Breaks in persistence then variance.
    M3 { l1: f64, l2: f64 },
    /// Smooth M2 dynamics interrupted by a persistent AR(0.8) regime.
    M4 { l1: f64, l2: f64 },
    /// White noise with `σ²(u) = max{1.5, 1 + cos(1 + cos 10u)}`.
    M5,
    /// White noise, then AR(0.6), then AR(0.6) with larger innovations.
    M6 { l1: f64, l2: f64 },
    /// Same process as M4.
    M7 { l1: f64, l2: f64 },
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::M1 { .. } => "M1",
            Model::M2 => "M2",
            Model::M3 { .. } => "M3",
            Model::M4 { .. } => "M4",
            Model::M5 => "M5",
            Model::M6 { .. } => "M6",
            Model::M7 { .. } => "M7",
        }
    }

    fn breaks(&self) -> Option<(f64, f64)> {
        match *self {
            Model::M3 { l1, l2 } | Model::M4 { l1, l2 } | Model::M6 { l1, l2 } | Model::M7 { l1, l2 } => {
                Some((l1, l2))
            }
            _ => None,
        }
    }

    pub fn has_breaks(&self) -> bool {
        self.breaks().is_some()
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::M1 { rho } => write!(f, "M1({rho})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Model {
    type Err = Error;

    /// Parses `M1`, `M1(0.6)`, `M2`, ..., `M7` (case-insensitive). Models
    /// with breaks use the default break fractions; M1 defaults to ρ = 0.3.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_uppercase();
        let (l1, l2) = DEFAULT_BREAKS;
        if let Some(rest) = s.strip_prefix("M1") {
            let rho = if rest.is_empty() {
                0.3
            } else {
                rest.trim_start_matches('(')
                    .trim_end_matches(')')
                    .parse()
                    .map_err(|_| Error::Config(format!("invalid M1 coefficient in '{s}'")))?
            };
            return Ok(Model::M1 { rho });
        }
        match s.as_str() {
            "M2" => Ok(Model::M2),
            "M3" => Ok(Model::M3 { l1, l2 }),
            "M4" => Ok(Model::M4 { l1, l2 }),
            "M5" => Ok(Model::M5),
            "M6" => Ok(Model::M6 { l1, l2 }),
            "M7" => Ok(Model::M7 { l1, l2 }),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

/// AR coefficient of M2 and the smooth regimes of M4.
pub fn m2_coefficient(u: f64) -> f64 {
    0.4 * (0.8 - (2.0 * u).cos()).cos()
}

/// Innovation variance of M5.
pub fn m5_variance(u: f64) -> f64 {
    (1.0 + (1.0 + (10.0 * u).cos()).cos()).max(1.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub model: Model,
    pub len: usize,
    pub burn_in: usize,
}

impl DgpSpec {
    pub fn new(model: Model, len: usize) -> Result<Self> {
        let spec = Self {
            model,
            len,
            burn_in: DEFAULT_BURN_IN,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.len < 2 {
            return Err(Error::Config(format!("length {} < 2", self.len)));
        }
        if self.burn_in < 100 {
            return Err(Error::Config(format!("burn-in {} < 100", self.burn_in)));
        }
        if let Model::M1 { rho } = self.model {
            if !(rho.abs() < 1.0) {
                return Err(Error::Config(format!("|rho| = {} must be < 1", rho.abs())));
            }
        }
        if let Some((l1, l2)) = self.model.breaks() {
            if !(0.0 < l1 && l1 < l2 && l2 < 1.0) {
                return Err(Error::Config(format!(
                    "break fractions ({l1}, {l2}) must satisfy 0 < l1 < l2 < 1"
                )));
            }
            let (t1, t2) = self.break_times().unwrap();
            if t1 <= 1 || t2 >= self.len || t1 >= t2 {
                return Err(Error::Config(format!(
                    "break times ({t1}, {t2}) degenerate for T = {}",
                    self.len
                )));
            }
        }
        Ok(())
    }

    /// `(⌊T l1⌋, ⌊T l2⌋)`: the last index of the first and second regimes.
    pub fn break_times(&self) -> Option<(usize, usize)> {
        self.model.breaks().map(|(l1, l2)| {
            (
                (self.len as f64 * l1).floor() as usize,
                (self.len as f64 * l2).floor() as usize,
            )
        })
    }

    /// Regime number (1, 2 or 3) active at 1-based time `t`.
    fn regime_at_time(&self, t: usize) -> usize {
        match self.break_times() {
            Some((_, t2)) if t > t2 => 3,
            Some((t1, _)) if t > t1 => 2,
            _ => 1,
        }
    }

    /// Regime active at rescaled time `u`, left-continuous at the breaks.
    fn regime_at_fraction(&self, u: f64) -> usize {
        match self.model.breaks() {
            Some((_, l2)) if u > l2 => 3,
            Some((l1, _)) if u > l1 => 2,
            _ => 1,
        }
    }

    /// `(ρ, σ)` of the given regime at rescaled time `u`.
    fn parameters(&self, regime: usize, u: f64) -> (f64, f64) {
        match self.model {
            Model::M1 { rho } => (rho, 1.0),
            Model::M2 => (m2_coefficient(u), 1.0),
            Model::M3 { .. } => match regime {
                1 => (0.3, 1.0),
                2 => (0.6, 0.7),
                _ => (0.6, 1.0),
            },
            Model::M4 { .. } | Model::M7 { .. } => match regime {
                2 => (0.8, 1.0),
                _ => (m2_coefficient(u), 0.7),
            },
            Model::M5 => (0.0, m5_variance(u).sqrt()),
            Model::M6 { .. } => match regime {
                1 => (0.0, 0.7),
                2 => (0.6, 0.7),
                _ => (0.6, 1.0),
            },
        }
    }

    /// `(ρ(t/T), σ(t/T))` at 1-based time `t`.
    pub fn parameters_at(&self, t: usize) -> (f64, f64) {
        self.parameters(self.regime_at_time(t), t as f64 / self.len as f64)
    }

    /// Local spectral density `σ²/(2π |1 − ρ e^{-iω}|²)` at rescaled time
    /// `u`.
    pub fn theoretical_spectrum(&self, u: f64, omega: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Config(format!("rescaled time {u} outside [0, 1]")));
        }
        let (rho, sigma) = self.parameters(self.regime_at_fraction(u), u);
        Ok(sigma * sigma / (2.0 * PI * (1.0 - 2.0 * rho * omega.cos() + rho * rho)))
    }

    pub fn truth(&self) -> Option<Vec<TrueBreak>> {
        self.break_times().map(|(t1, t2)| {
            vec![
                TrueBreak {
                    break_time: t1,
                    frequency: 0.0,
                },
                TrueBreak {
                    break_time: t2,
                    frequency: 0.0,
                },
            ]
        })
    }
}

/// Draws one path of `spec` from the stream of `seed`. The recursion is
/// run for `burn_in` steps at the `t = 1` parameters before recording.
pub fn simulate(spec: &DgpSpec, seed: u64) -> Result<TimeSeries> {
    spec.validate()?;
    let mut rng = rng::stream(seed, &[]);
    let mut noise = || -> f64 { StandardNormal.sample(&mut rng) };
    let (rho0, sigma0) = spec.parameters_at(1);
    let mut prev = 0.0;
    for _ in 0..spec.burn_in {
        prev = rho0 * prev + sigma0 * noise();
    }
    let mut values = Vec::with_capacity(spec.len);
    for t in 1..=spec.len {
        let (rho, sigma) = spec.parameters_at(t);
        prev = rho * prev + sigma * noise();
        values.push(prev);
    }
    let series = TimeSeries::new(values)?;
    match spec.truth() {
        Some(truth) => series.with_truth(truth),
        None => Ok(series),
    }
}
