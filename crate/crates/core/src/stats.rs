//! Max-type change-point statistics and their extreme-value calibration.
//!
//! For a frequency ω the contrast of block `r` compares the left-looking
//! average of block `r` with the right-looking average of block `r + 1`.
//! `S_max` studentizes it by the local long-run deviation, `R_max` uses the
//! ratio of the two averages. After normalization
//! `√log M_T (√M_S · max − γ_{M_T})` both converge to the law
//! `P(V ≤ v) = exp(−π^{-1/2} e^{−v})`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blocks::BlockAverages;
use crate::config::SpectralConfig;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::series::TimeSeries;
use crate::spectral::SpectralEngine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    Smax,
    SDmax,
    Rmax,
    RDmax,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [Self::Smax, Self::SDmax, Self::Rmax, Self::RDmax];

    pub fn is_double_sup(self) -> bool {
        matches!(self, Self::SDmax | Self::RDmax)
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Smax => "smax",
            Self::SDmax => "sdmax",
            Self::Rmax => "rmax",
            Self::RDmax => "rdmax",
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "smax" => Ok(Self::Smax),
            "sdmax" => Ok(Self::SDmax),
            "rmax" => Ok(Self::Rmax),
            "rdmax" => Ok(Self::RDmax),
            other => Err(Error::Config(format!("unknown statistic '{other}'"))),
        }
    }
}

/// `v_α` solving `exp(−π^{-1/2} e^{−v}) = 1 − α`.
pub fn critical_value(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("level {alpha} outside (0, 1)")));
    }
    Ok(-(PI.sqrt() * -(1.0 - alpha).ln()).ln())
}

/// Limit distribution function `exp(−π^{-1/2} e^{−v})`.
pub fn limit_cdf(v: f64) -> f64 {
    (-(-v).exp() / PI.sqrt()).exp()
}

/// Centering `γ_M = (4 log M − 2 log log M)^{1/2}`.
pub fn gamma_mt(n_blocks: usize) -> Result<f64> {
    if n_blocks < 3 {
        return Err(Error::Config(format!(
            "centering needs at least 3 blocks, got {n_blocks}"
        )));
    }
    let l = (n_blocks as f64).ln();
    Ok((4.0 * l - 2.0 * l.ln()).sqrt())
}

/// `√log M_T (√M_S · raw − γ_{M_T})`.
pub fn normalize(raw: f64, config: &SpectralConfig) -> Result<f64> {
    let gamma = gamma_mt(config.n_blocks)?;
    Ok((config.n_blocks as f64).ln().sqrt()
        * ((config.points_per_block as f64).sqrt() * raw - gamma))
}

/// Per-frequency maximum over blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyDetail {
    pub omega: f64,
    pub raw_max: f64,
    pub normalized: f64,
    pub argmax_r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: Statistic,
    /// Tested frequency for the single-frequency statistics.
    pub omega: Option<f64>,
    /// Inner maximum over blocks (at `argmax_omega` for double-sup forms).
    pub raw_max: f64,
    pub normalized: f64,
    pub gamma_mt: f64,
    pub critical_value: f64,
    pub alpha: f64,
    /// `1 − exp(−π^{-1/2} e^{−normalized})`.
    pub p_value: f64,
    pub reject: bool,
    /// Block `r` whose contrast with block `r + 1` attains the maximum.
    pub argmax_r: usize,
    pub argmax_omega: Option<f64>,
    /// `n'_ω` for double-sup forms.
    pub n_omega_effective: Option<usize>,
    pub floored_variances: usize,
    pub per_frequency: Vec<FrequencyDetail>,
}

/// Block averages of the demeaned series at a fixed list of frequencies,
/// shared by all four statistics.
#[derive(Debug, Clone)]
pub struct StatisticPanel {
    config: SpectralConfig,
    averages: BlockAverages,
}

impl StatisticPanel {
    pub fn new(x: &TimeSeries, config: &SpectralConfig, frequencies: &[f64]) -> Result<Self> {
        if x.len() != config.sample_len {
            return Err(Error::Config(format!(
                "configuration built for T = {} applied to a series of length {}",
                config.sample_len,
                x.len()
            )));
        }
        config.validate()?;
        let engine = SpectralEngine::new(&x.demeaned(), config, frequencies);
        let averages = BlockAverages::compute(&engine, config)?;
        Ok(Self {
            config: config.clone(),
            averages,
        })
    }

    pub fn averages(&self) -> &BlockAverages {
        &self.averages
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.averages.frequencies
    }

    /// Studentized contrasts `|f̃_{L,r} − f̃_{R,r+1}| / (σ̂_{L,r} + ε_f)` for
    /// `r = 1..=M_T − 2` at frequency position `k`.
    pub fn studentized_contrasts(&self, k: usize) -> Result<Vec<f64>> {
        let a = &self.averages;
        let eps = self.config.epsilon_f;
        (0..self.config.n_blocks - 2)
            .map(|i| {
                let denom = a.sigma_left[i][k] + eps;
                if denom <= 0.0 {
                    return Err(Error::DegenerateVariance {
                        block: i + 1,
                        omega: a.frequencies[k],
                    });
                }
                Ok((a.f_tilde_left[i][k] - a.f_tilde_right[i + 1][k]).abs() / denom)
            })
            .collect()
    }

    /// Ratio contrasts `|f̃_{L,r} / (f̃_{R,r+1} + ε_f) − 1|`.
    pub fn ratio_contrasts(&self, k: usize) -> Result<Vec<f64>> {
        let a = &self.averages;
        let eps = self.config.epsilon_f;
        (0..self.config.n_blocks - 2)
            .map(|i| {
                let denom = a.f_tilde_right[i + 1][k] + eps;
                if denom == 0.0 {
                    return Err(Error::DegenerateDenominator {
                        block: i + 1,
                        omega: a.frequencies[k],
                    });
                }
                Ok((a.f_tilde_left[i][k] / denom - 1.0).abs())
            })
            .collect()
    }

    fn detail(&self, k: usize, ratio: bool) -> Result<FrequencyDetail> {
        let contrasts = if ratio {
            self.ratio_contrasts(k)?
        } else {
            self.studentized_contrasts(k)?
        };
        let (idx, raw_max) = argmax_first(&contrasts);
        Ok(FrequencyDetail {
            omega: self.averages.frequencies[k],
            raw_max,
            normalized: normalize(raw_max, &self.config)?,
            argmax_r: idx + 1,
        })
    }

    /// Single-frequency statistic (`Smax` or `Rmax`) at position `k`.
    pub fn single(&self, statistic: Statistic, k: usize, alpha: f64) -> Result<TestReport> {
        let ratio = match statistic {
            Statistic::Smax => false,
            Statistic::Rmax => true,
            other => {
                return Err(Error::Config(format!(
                    "{other} is a double-sup statistic"
                )))
            }
        };
        let d = self.detail(k, ratio)?;
        self.report(statistic, Some(d.omega), d.clone(), d.normalized, None, vec![d], alpha)
    }

    /// Double-sup statistic (`SDmax` or `RDmax`) over the positions
    /// `positions`, with centering count `n_effective`.
    pub fn double_sup(
        &self,
        statistic: Statistic,
        positions: &[usize],
        n_effective: usize,
        alpha: f64,
    ) -> Result<TestReport> {
        let ratio = match statistic {
            Statistic::SDmax => false,
            Statistic::RDmax => true,
            other => {
                return Err(Error::Config(format!(
                    "{other} is a single-frequency statistic"
                )))
            }
        };
        if positions.is_empty() || n_effective == 0 {
            return Err(Error::Grid("empty thinned frequency set".into()));
        }
        let details: Vec<FrequencyDetail> = positions
            .iter()
            .map(|&k| self.detail(k, ratio))
            .collect::<Result<_>>()?;
        let norms: Vec<f64> = details.iter().map(|d| d.normalized).collect();
        let (best, max_norm) = argmax_first(&norms);
        let normalized = max_norm - (n_effective as f64).ln();
        let top = details[best].clone();
        self.report(statistic, None, top, normalized, Some(n_effective), details, alpha)
    }

    #[allow(clippy::too_many_arguments)]
    fn report(
        &self,
        statistic: Statistic,
        omega: Option<f64>,
        top: FrequencyDetail,
        normalized: f64,
        n_effective: Option<usize>,
        per_frequency: Vec<FrequencyDetail>,
        alpha: f64,
    ) -> Result<TestReport> {
        let critical = critical_value(alpha)?;
        Ok(TestReport {
            statistic,
            omega,
            raw_max: top.raw_max,
            normalized,
            gamma_mt: gamma_mt(self.config.n_blocks)?,
            critical_value: critical,
            alpha,
            p_value: 1.0 - limit_cdf(normalized),
            reject: normalized >= critical,
            argmax_r: top.argmax_r,
            argmax_omega: n_effective.map(|_| top.omega),
            n_omega_effective: n_effective,
            floored_variances: self.averages.floored_cells,
            per_frequency,
        })
    }
}

/// First position attaining the maximum.
pub(crate) fn argmax_first(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

pub fn s_max(x: &TimeSeries, omega: f64, config: &SpectralConfig, alpha: f64) -> Result<TestReport> {
    StatisticPanel::new(x, config, &[omega])?.single(Statistic::Smax, 0, alpha)
}

pub fn r_max(x: &TimeSeries, omega: f64, config: &SpectralConfig, alpha: f64) -> Result<TestReport> {
    StatisticPanel::new(x, config, &[omega])?.single(Statistic::Rmax, 0, alpha)
}

pub fn s_dmax(
    x: &TimeSeries,
    config: &SpectralConfig,
    grid: &FrequencyGrid,
    alpha: f64,
) -> Result<TestReport> {
    double_sup_on_grid(x, config, grid, Statistic::SDmax, alpha)
}

pub fn r_dmax(
    x: &TimeSeries,
    config: &SpectralConfig,
    grid: &FrequencyGrid,
    alpha: f64,
) -> Result<TestReport> {
    double_sup_on_grid(x, config, grid, Statistic::RDmax, alpha)
}

fn double_sup_on_grid(
    x: &TimeSeries,
    config: &SpectralConfig,
    grid: &FrequencyGrid,
    statistic: Statistic,
    alpha: f64,
) -> Result<TestReport> {
    let thinned = grid.thinned();
    let panel = StatisticPanel::new(x, config, &thinned)?;
    let positions: Vec<usize> = (0..thinned.len()).collect();
    panel.double_sup(statistic, &positions, grid.n_thinned_effective(), alpha)
}

/// All four statistics from one pass over the data: the single-frequency
/// forms at `omega`, the double-sup forms over the thinned grid.
pub fn all_statistics(
    x: &TimeSeries,
    omega: f64,
    config: &SpectralConfig,
    grid: &FrequencyGrid,
    alpha: f64,
) -> Result<Vec<TestReport>> {
    let mut freqs = vec![omega];
    freqs.extend(grid.thinned());
    let panel = StatisticPanel::new(x, config, &freqs)?;
    let positions: Vec<usize> = (1..freqs.len()).collect();
    let n_eff = grid.n_thinned_effective();
    Ok(vec![
        panel.single(Statistic::Smax, 0, alpha)?,
        panel.double_sup(Statistic::SDmax, &positions, n_eff, alpha)?,
        panel.single(Statistic::Rmax, 0, alpha)?,
        panel.double_sup(Statistic::RDmax, &positions, n_eff, alpha)?,
    ])
}
