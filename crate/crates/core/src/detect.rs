//! Change-point localization.
//!
//! The contrast `D_r(ω) = M_S^{-1/2} |Σ_{S_{L,r}} f_L − Σ_{S_{R,r}} f_R|`
//! compares the spectra just before and just after a split time `r`. A
//! single break is located by maximizing it over a coarse grid of splits;
//! multiple breaks are found by [`algorithm1`], a wild sequential top-down
//! search that refines each coarse split with random draws, tests for the
//! presence of a break, records the best split and excludes its
//! neighborhood.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{long_run_variance, lr_sets, split_is_valid};
use crate::config::SpectralConfig;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::rng;
use crate::series::TimeSeries;
use crate::spectral::{Side, SpectralEngine};
use crate::stats::{argmax_first, StatisticPanel};

/// Lower and upper ends of the bracket searched by [`estimate_theta`].
pub const THETA_BRACKET: (f64, f64) = (0.05, 3.0);

/// Share of the largest per-block contrasts discarded before taking the
/// null maximum in [`estimate_theta`].
pub const THETA_TRIM: f64 = 0.2;

/// Evaluates split contrasts of one demeaned series over a frequency grid.
#[derive(Debug)]
pub struct Detector {
    config: SpectralConfig,
    grid: FrequencyGrid,
    engine: SpectralEngine,
}

impl Detector {
    pub fn new(x: &TimeSeries, config: &SpectralConfig, grid: &FrequencyGrid) -> Result<Self> {
        if x.len() != config.sample_len {
            return Err(Error::Config(format!(
                "configuration built for T = {} applied to a series of length {}",
                config.sample_len,
                x.len()
            )));
        }
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            grid: grid.clone(),
            engine: SpectralEngine::new(&x.demeaned(), config, grid.full()),
        })
    }

    pub fn config(&self) -> &SpectralConfig {
        &self.config
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    fn sides(&self, r: usize) -> Result<(Vec<&[f64]>, Vec<&[f64]>)> {
        let (left, right) = lr_sets(r, &self.config)?;
        let l = left
            .indices
            .iter()
            .map(|&j| self.engine.smoothed(j, Side::Left))
            .collect::<Result<_>>()?;
        let rr = right
            .indices
            .iter()
            .map(|&j| self.engine.smoothed(j, Side::Right))
            .collect::<Result<_>>()?;
        Ok((l, rr))
    }

    /// `D_r(ω)` at every frequency of the full grid.
    pub fn d_profile(&self, r: usize) -> Result<Vec<f64>> {
        let (left, right) = self.sides(r)?;
        let scale = (self.config.points_per_block as f64).sqrt();
        Ok((0..self.grid.full().len())
            .map(|k| {
                let sl: f64 = left.iter().map(|row| row[k]).sum();
                let sr: f64 = right.iter().map(|row| row[k]).sum();
                (sl - sr).abs() / scale
            })
            .collect())
    }

    /// `max_ω D_r(ω)` and the grid position attaining it.
    pub fn max_d(&self, r: usize) -> Result<(f64, usize)> {
        let profile = self.d_profile(r)?;
        let (k, v) = argmax_first(&profile);
        Ok((v, k))
    }

    /// Studentized contrast of split `r` on the thinned grid:
    /// `max_{ω∈Π'} |f̄_{L,r} − f̄_{R,r}| / (σ̂_{L,r} + ε_f)` with block means
    /// `f̄` and the long-run deviation of the left set.
    pub fn studentized_split(&self, r: usize) -> Result<f64> {
        let (left, right) = self.sides(r)?;
        let m = self.config.points_per_block as f64;
        let mut best = f64::MIN;
        let mut column = vec![0.0; left.len()];
        for &k in self.grid.thinned_indices() {
            for (c, row) in column.iter_mut().zip(&left) {
                *c = row[k];
            }
            let lrv = long_run_variance(&column, self.config.lrv_kernel, self.config.lrv_bandwidth);
            let denom = lrv.value.sqrt() + self.config.epsilon_f;
            if denom <= 0.0 {
                return Err(Error::DegenerateVariance {
                    block: r,
                    omega: self.grid.full()[k],
                });
            }
            let ml = column.iter().sum::<f64>() / m;
            let mr = right.iter().map(|row| row[k]).sum::<f64>() / m;
            best = best.max((ml - mr).abs() / denom);
        }
        Ok(best)
    }

    /// Coarse split grid `{2m_T, 3m_T, ...}` up to `(M_T − 1) m_T − n_T`,
    /// restricted to valid splits.
    pub fn coarse_splits(&self) -> Vec<usize> {
        let c = &self.config;
        let upper = ((c.n_blocks - 1) * c.block_len).saturating_sub(c.window_len);
        (2..)
            .map(|i| i * c.block_len)
            .take_while(|&r| r <= upper)
            .filter(|&r| split_is_valid(r, c))
            .collect()
    }
}

/// `D_r(ω)` for the demeaned series.
pub fn d_stat(x: &TimeSeries, r: usize, omega: f64, config: &SpectralConfig) -> Result<f64> {
    let detector = Detector::new(x, config, &FrequencyGrid::single(omega))?;
    Ok(detector.d_profile(r)?[0])
}

/// Single-break estimate: the coarse split maximizing `max_ω D_r(ω)` and the
/// frequency attaining it. Ties go to the earliest split.
pub fn single_break(
    x: &TimeSeries,
    config: &SpectralConfig,
    grid: &FrequencyGrid,
) -> Result<(usize, f64)> {
    let detector = Detector::new(x, config, grid)?;
    let splits = detector.coarse_splits();
    if splits.is_empty() {
        return Err(Error::Size(format!(
            "no valid split candidates for T = {}",
            config.sample_len
        )));
    }
    let mut best = (splits[0], f64::MIN, 0);
    for &r in &splits {
        let (v, k) = detector.max_d(r)?;
        if v > best.1 {
            best = (r, v, k);
        }
    }
    Ok((best.0, grid.full()[best.2]))
}

/// Solution of `m* = (√log(T/m*) · T^θ / D)^{2/(2θ+1)}` together with
/// `M* = ⌊T/m*⌋`.
///
/// The coupled pair is solved on the continuous relaxation `M* = T/m*`,
/// whose right-hand side is decreasing in `m*` and so has a unique root;
/// the integer part is taken afterwards. `m*` is kept at most `T/2` so
/// that `log M* > 0`.
pub fn optimal_block_len(sample_len: usize, theta: f64, d: f64) -> Result<(f64, usize)> {
    if !(theta > 0.0 && d > 0.0) {
        return Err(Error::Config(format!("theta = {theta} and D = {d} must be positive")));
    }
    let t = sample_len as f64;
    let cap = t / 2.0;
    let exponent = 2.0 / (2.0 * theta + 1.0);
    let rhs = |m: f64| ((t / m).ln().sqrt() * t.powf(theta) / d).powf(exponent);
    // g(m) = rhs(m) − m is decreasing; bracket and bisect.
    let (mut lo, mut hi) = (1.0f64, cap);
    if rhs(hi) >= hi {
        return Ok((cap, (t / cap).floor() as usize));
    }
    if rhs(lo) <= lo {
        return Err(Error::Numerics(format!(
            "no block length solves the threshold equation for θ = {theta}"
        )));
    }
    let mut iterations = 0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if rhs(mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 200 {
            return Err(Error::Numerics("block length bisection did not converge".into()));
        }
    }
    let m = 0.5 * (lo + hi);
    Ok((m, ((t / m).floor() as usize).max(2)))
}

/// `2 √(log M* / m*)` for regularity `theta` with `D = 1`.
pub fn null_level(sample_len: usize, theta: f64) -> Result<f64> {
    let (m, big_m) = optimal_block_len(sample_len, theta, 1.0)?;
    Ok(2.0 * ((big_m as f64).ln() / m).sqrt())
}

/// Threshold `2 D* √(log M* / m*)` of the break test, with `D = 1`.
pub fn psi_threshold(config: &SpectralConfig) -> Result<f64> {
    if !(config.d_star > 2.0) {
        return Err(Error::Config(format!("D* = {} must exceed 2", config.d_star)));
    }
    Ok(config.d_star * null_level(config.sample_len, config.theta)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub theta: f64,
    /// Trimmed null maximum the estimate was calibrated to.
    pub s_star: f64,
    /// True when no root lies inside the bracket and a boundary was
    /// returned.
    pub at_boundary: bool,
}

/// Solves `s* = 2 √(log M*(θ) / m*(θ))` for θ by bisection over
/// [`THETA_BRACKET`]. The right-hand side decreases in θ.
pub fn theta_for_level(s_star: f64, sample_len: usize) -> Result<ThetaEstimate> {
    let (lo_b, hi_b) = THETA_BRACKET;
    let f = |theta: f64| -> Result<f64> { Ok(null_level(sample_len, theta)? - s_star) };
    let (mut lo, mut hi) = (lo_b, hi_b);
    if f(lo)? <= 0.0 {
        return Ok(ThetaEstimate {
            theta: lo,
            s_star,
            at_boundary: true,
        });
    }
    if f(hi)? >= 0.0 {
        return Ok(ThetaEstimate {
            theta: hi,
            s_star,
            at_boundary: true,
        });
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThetaEstimate {
        theta: 0.5 * (lo + hi),
        s_star,
        at_boundary: false,
    })
}

/// Data-driven regularity exponent: the per-block studentized contrasts
/// (maximized over the thinned grid) are sorted, the largest
/// [`THETA_TRIM`] share is discarded, and θ is calibrated so that the
/// null level matches the largest remaining contrast.
pub fn estimate_theta(
    x: &TimeSeries,
    config: &SpectralConfig,
    grid: &FrequencyGrid,
) -> Result<ThetaEstimate> {
    let thinned = grid.thinned();
    let panel = StatisticPanel::new(x, config, &thinned)?;
    let blocks = config.n_blocks - 2;
    let mut per_block = vec![f64::MIN; blocks];
    for k in 0..thinned.len() {
        for (b, v) in per_block.iter_mut().zip(panel.studentized_contrasts(k)?) {
            *b = b.max(v);
        }
    }
    per_block.sort_by(|a, b| a.total_cmp(b));
    let keep = ((blocks as f64 * (1.0 - THETA_TRIM)).floor() as usize).max(1);
    let s_star = per_block[keep - 1];
    theta_for_level(s_star, config.sample_len)
}

/// Where the regularity exponent used by the break test comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThetaSource {
    /// `config.theta` as given.
    Configured,
    /// [`estimate_theta`] on the data.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub seed: u64,
    pub theta: ThetaSource,
}

impl DetectOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            theta: ThetaSource::Estimated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    #[serde(rename = "t")]
    pub t_hat: usize,
    #[serde(rename = "lambda")]
    pub lambda_hat: f64,
    #[serde(rename = "omega")]
    pub omega_hat: f64,
    #[serde(rename = "d")]
    pub d_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub candidates: usize,
    pub draws: usize,
    pub gate: f64,
    pub threshold: f64,
    pub rejected: bool,
    pub estimate: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointSet {
    pub m_hat: usize,
    /// Chronological.
    pub estimates: Vec<ChangePoint>,
    pub theta: f64,
    pub theta_at_boundary: bool,
    pub threshold: f64,
    pub trace: Vec<IterationTrace>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    /// Coarse grid point the candidate was seeded from.
    grid_point: usize,
    split: usize,
    d_max: f64,
    omega_pos: usize,
}

/// Multiple change-point search with wild refinement, using
/// [`DetectOptions::new`] defaults.
pub fn algorithm1(
    x: &TimeSeries,
    config: &SpectralConfig,
    grid: &FrequencyGrid,
    seed: u64,
) -> Result<ChangePointSet> {
    algorithm1_with(x, config, grid, &DetectOptions::new(seed))
}

/// Wild sequential top-down search.
///
/// Each iteration (1) refines every candidate split other than `2m_T` with
/// `K` draws without replacement from the `m_T` points ending at its
/// coarse grid point, keeping whichever of the incumbent and the draws
/// maximizes `max_ω D`; (2) stops when the largest studentized split
/// contrast falls below the threshold; (3) records the candidate with the
/// largest `max_ω D`; (4) drops every candidate within `v_T` of it. Draws
/// never land inside an exclusion window.
pub fn algorithm1_with(
    x: &TimeSeries,
    config: &SpectralConfig,
    grid: &FrequencyGrid,
    options: &DetectOptions,
) -> Result<ChangePointSet> {
    let (theta, theta_at_boundary) = match options.theta {
        ThetaSource::Configured => (config.theta, false),
        ThetaSource::Estimated => {
            let est = estimate_theta(x, config, grid)?;
            (est.theta, est.at_boundary)
        }
    };
    let mut gate_config = config.clone();
    gate_config.theta = theta;
    let threshold = psi_threshold(&gate_config)?;

    let detector = Detector::new(x, config, grid)?;
    let coarse = detector.coarse_splits();
    if coarse.is_empty() {
        return Err(Error::Size(format!(
            "no valid split candidates for T = {}",
            config.sample_len
        )));
    }
    let first_point = 2 * config.block_len;
    let mut candidates: Vec<Candidate> = coarse
        .iter()
        .map(|&r| {
            let (d_max, omega_pos) = detector.max_d(r)?;
            Ok(Candidate {
                grid_point: r,
                split: r,
                d_max,
                omega_pos,
            })
        })
        .collect::<Result<_>>()?;

    let radius = config.exclusion_radius;
    let guard = config.sample_len.div_ceil(radius);
    let mut found: Vec<ChangePoint> = Vec::new();
    let mut trace = Vec::new();
    let mut iteration = 0;

    while !candidates.is_empty() {
        if iteration >= guard {
            return Err(Error::Algorithm(format!(
                "no termination after {guard} iterations"
            )));
        }
        let excluded = |r: usize| found.iter().any(|cp| cp.t_hat.abs_diff(r) <= radius);

        // (1) wild refinement
        let refined: Vec<Candidate> = candidates
            .par_iter()
            .map(|c| {
                if c.grid_point == first_point {
                    return Ok(*c);
                }
                let lo = c.grid_point + 1 - config.block_len;
                let pool: Vec<usize> = (lo..=c.grid_point)
                    .filter(|&r| !excluded(r) && split_is_valid(r, config))
                    .collect();
                let mut best = *c;
                if pool.is_empty() {
                    return Ok(best);
                }
                let mut stream = rng::stream(
                    options.seed,
                    &[c.grid_point as u64, iteration as u64],
                );
                let k = config.draws.min(pool.len());
                let mut draws: Vec<usize> = index::sample(&mut stream, pool.len(), k)
                    .into_iter()
                    .map(|i| pool[i])
                    .collect();
                draws.sort_unstable();
                for r in draws {
                    let (v, pos) = detector.max_d(r)?;
                    if v > best.d_max {
                        best.split = r;
                        best.d_max = v;
                        best.omega_pos = pos;
                    }
                }
                Ok(best)
            })
            .collect::<Result<_>>()?;
        candidates = refined;

        // (2) test
        let gates: Vec<f64> = candidates
            .par_iter()
            .map(|c| detector.studentized_split(c.split))
            .collect::<Result<_>>()?;
        let gate = gates.iter().copied().fold(f64::MIN, f64::max);
        let rejected = gate >= threshold;
        let mut entry = IterationTrace {
            iteration,
            candidates: candidates.len(),
            draws: config.draws,
            gate,
            threshold,
            rejected,
            estimate: None,
        };
        if !rejected {
            trace.push(entry);
            break;
        }

        // (3) estimate
        let mut best = candidates[0];
        for c in &candidates[1..] {
            if c.d_max > best.d_max || (c.d_max == best.d_max && c.split < best.split) {
                best = *c;
            }
        }
        found.push(ChangePoint {
            t_hat: best.split,
            lambda_hat: best.split as f64 / config.sample_len as f64,
            omega_hat: grid.full()[best.omega_pos],
            d_value: best.d_max,
        });
        entry.estimate = Some(best.split);
        trace.push(entry);

        // (4) exclude
        candidates.retain(|c| c.split.abs_diff(best.split) > radius);
        iteration += 1;
    }

    found.sort_by_key(|cp| cp.t_hat);
    Ok(ChangePointSet {
        m_hat: found.len(),
        estimates: found,
        theta,
        theta_at_boundary,
        threshold,
        trace,
    })
}

/// `max_ω D_r(ω)` for every valid split `r`, for plotting.
pub fn d_profile_all(
    x: &TimeSeries,
    config: &SpectralConfig,
    grid: &FrequencyGrid,
) -> Result<Vec<(usize, f64, f64)>> {
    let detector = Detector::new(x, config, grid)?;
    (1..config.sample_len)
        .filter(|&r| split_is_valid(r, config))
        .map(|r| {
            let (v, k) = detector.max_d(r)?;
            Ok((r, v, grid.full()[k]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate, DgpSpec, Model};

    #[test]
    fn zero_series_has_zero_contrast() {
        let cfg = SpectralConfig::default_for(500, None).unwrap();
        let x = TimeSeries::new(vec![0.0; 500]).unwrap();
        assert_eq!(d_stat(&x, 200, 0.0, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn invalid_split_propagates() {
        let cfg = SpectralConfig::default_for(500, None).unwrap();
        let x = TimeSeries::new(vec![1.0; 500]).unwrap();
        assert!(matches!(
            d_stat(&x, cfg.block_len - 1, 0.0, &cfg),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn constant_series_ties_go_to_first_split() {
        let cfg = SpectralConfig::default_for(1000, None).unwrap();
        let grid = FrequencyGrid::for_config(&cfg).unwrap();
        let x = TimeSeries::new(vec![4.0; 1000]).unwrap();
        let (t, _) = single_break(&x, &cfg, &grid).unwrap();
        assert_eq!(t, 2 * cfg.block_len);
    }

    #[test]
    fn coarse_splits_at_one_thousand() {
        let cfg = SpectralConfig::default_for(1000, None).unwrap();
        let grid = FrequencyGrid::for_config(&cfg).unwrap();
        let x = TimeSeries::new(vec![0.0; 1000]).unwrap();
        let d = Detector::new(&x, &cfg, &grid).unwrap();
        assert_eq!(d.coarse_splits(), vec![190, 285, 380, 475, 570, 665]);
    }

    /// Independent root of `m = (√log(T/m) T^θ)^{2/(2θ+1)}` by plain
    /// fixed-point iteration with damping.
    fn fixed_point_oracle(t: f64, theta: f64) -> f64 {
        let mut m = t.powf(0.66);
        for _ in 0..10_000 {
            let next = ((t / m).ln().sqrt() * t.powf(theta)).powf(2.0 / (2.0 * theta + 1.0));
            m = 0.5 * m + 0.5 * next;
        }
        m
    }

    #[test]
    fn threshold_matches_fixed_point_oracle() {
        let cfg = SpectralConfig::default_for(1000, None).unwrap();
        let m_oracle = fixed_point_oracle(1000.0, 1.0);
        // Frozen from the oracle: m* ≈ 127.2, M* = 7.
        assert!((m_oracle - 127.2).abs() < 0.1, "{m_oracle}");
        let (m, big_m) = optimal_block_len(1000, 1.0, 1.0).unwrap();
        assert!((m - m_oracle).abs() < 1e-6);
        assert_eq!(big_m, 7);
        let expected = 2.0 * 2.1 * (7f64.ln() / m_oracle).sqrt();
        assert!((psi_threshold(&cfg).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn threshold_decreases_with_theta() {
        let mut cfg = SpectralConfig::default_for(1000, None).unwrap();
        let mut last = f64::MAX;
        for theta in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            cfg.theta = theta;
            let (m, _) = optimal_block_len(1000, theta, 1.0).unwrap();
            let v = psi_threshold(&cfg).unwrap();
            assert!(v <= last);
            last = v;
            if theta >= 4.0 {
                assert!(m > 300.0);
            }
        }
        cfg.d_star = 2.0;
        assert!(matches!(psi_threshold(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn theta_root_is_consistent() {
        let level = null_level(1000, 1.0).unwrap();
        let est = theta_for_level(level, 1000).unwrap();
        assert!((est.theta - 1.0).abs() < 1e-6, "{est:?}");
        assert!(!est.at_boundary);
        let high = theta_for_level(100.0, 1000).unwrap();
        assert!(high.at_boundary && high.theta == THETA_BRACKET.0);
        let low = theta_for_level(1e-6, 1000).unwrap();
        assert!(low.at_boundary && low.theta == THETA_BRACKET.1);
    }

    #[test]
    fn planted_break_at_grid_point() {
        // Noiseless surrogate: a sinusoid whose amplitude jumps exactly
        // at 4 m_T. Every contrast except the one at the break mixes both
        // regimes on at most one side.
        let cfg = SpectralConfig::default_for(1000, None).unwrap();
        let grid = FrequencyGrid::for_config(&cfg).unwrap();
        let brk = 4 * cfg.block_len;
        let x = TimeSeries::new(
            (1..=1000)
                .map(|t| {
                    let a = if t <= brk { 1.0 } else { 3.0 };
                    a * (1.3 * t as f64).sin()
                })
                .collect(),
        )
        .unwrap();
        let (t, _) = single_break(&x, &cfg, &grid).unwrap();
        assert_eq!(t, brk);
    }

    #[test]
    fn refinement_never_lowers_the_contrast() {
        let cfg = SpectralConfig::default_for(1000, None).unwrap();
        let grid = FrequencyGrid::for_config(&cfg).unwrap();
        let spec = DgpSpec::new("M6".parse().unwrap(), 1000).unwrap();
        let x = simulate(&spec, 3).unwrap();
        let det = Detector::new(&x, &cfg, &grid).unwrap();
        let set = algorithm1(&x, &cfg, &grid, 9).unwrap();
        for cp in &set.estimates {
            let (v, _) = det.max_d(cp.t_hat).unwrap();
            assert_eq!(v, cp.d_value);
            let grid_point = cp.t_hat.div_ceil(cfg.block_len) * cfg.block_len;
            if split_is_valid(grid_point, &cfg) {
                assert!(v >= det.max_d(grid_point).unwrap().0);
            }
        }
        for pair in set.estimates.windows(2) {
            assert!(pair[1].t_hat - pair[0].t_hat > cfg.exclusion_radius);
        }
        assert_eq!(set.m_hat, set.estimates.len());
        let _ = Model::M2;
    }
}
