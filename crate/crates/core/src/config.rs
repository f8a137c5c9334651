//! Tuning parameters and their default growth rules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest sample size accepted by [`SpectralConfig::default_for`].
pub const MIN_SAMPLE_LEN: usize = 64;

/// Data taper applied inside each local window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Taper {
    Rectangular,
}

/// Frequency-smoothing kernel `W`, normalized to integrate to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SmootherKernel {
    /// Parzen window on `[-1, 1]`, rescaled by 4/3.
    Parzen,
    /// Triangle `1 - |x|` on `[-1, 1]`.
    Bartlett,
    /// Box of height one on `[-1/2, 1/2]`.
    Uniform,
}

impl SmootherKernel {
    pub fn eval(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Self::Parzen => {
                let w = if a <= 0.5 {
                    1.0 - 6.0 * a * a + 6.0 * a * a * a
                } else if a <= 1.0 {
                    2.0 * (1.0 - a).powi(3)
                } else {
                    0.0
                };
                w * 4.0 / 3.0
            }
            Self::Bartlett => (1.0 - a).max(0.0),
            Self::Uniform => {
                if a <= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Half-width of the support.
    pub fn support(self) -> f64 {
        match self {
            Self::Parzen | Self::Bartlett => 1.0,
            Self::Uniform => 0.5,
        }
    }
}

/// Lag-window kernel `K₁` of the local long-run variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LrvKernel {
    Bartlett,
}

impl LrvKernel {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Bartlett => (1.0 - x.abs()).max(0.0),
        }
    }
}

macro_rules! impl_enum_str {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match self {
                    $(Self::$variant => f.write_str($name),)+
                }
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok(Self::$variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} '{other}'",
                        stringify!($ty)
                    ))),
                }
            }
        }
    };
}

impl_enum_str!(Taper { Rectangular => "rectangular" });
impl_enum_str!(SmootherKernel { Parzen => "parzen", Bartlett => "bartlett", Uniform => "uniform" });
impl_enum_str!(LrvKernel { Bartlett => "bartlett" });

/// All tuning parameters of the estimators, tests and the detection
/// algorithm for one sample size.
///
/// The sub-sampling quantities (`stride`, `points_per_block`,
/// `n_blocks`, `lrv_bandwidth`) are derived from `sample_len` and
/// `block_len` and are recomputed by [`SpectralConfig::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Sample size `T`.
    pub sample_len: usize,
    /// Block length `m_T`.
    pub block_len: usize,
    /// Local window length `n_T` (even).
    pub window_len: usize,
    /// Frequency-smoothing bandwidth `b_{W,T}`.
    pub freq_bandwidth: f64,
    /// Sub-sampling stride `m_{S,T} = ⌊√m_T⌋`.
    pub stride: usize,
    /// Points per block `M_{S,T} = ⌊m_T / m_{S,T}⌋`.
    pub points_per_block: usize,
    /// Number of blocks `M_T = ⌊T / m_T⌋ - 1`.
    pub n_blocks: usize,
    pub taper: Taper,
    pub smoother_kernel: SmootherKernel,
    pub lrv_kernel: LrvKernel,
    /// Long-run variance bandwidth `b_{1,T} = M_{S,T}^{-1/3}`.
    pub lrv_bandwidth: f64,
    /// Number of frequencies in the full grid.
    pub n_omega: usize,
    /// Offset of the last grid frequency below π.
    pub epsilon_grid: f64,
    /// Wild draws per candidate, `K`.
    pub draws: usize,
    /// Exclusion radius `v_T` around each detected break.
    pub exclusion_radius: usize,
    /// Regularity exponent θ.
    pub theta: f64,
    /// Threshold constant `D* > 2`.
    pub d_star: f64,
    /// Floor added to denominators.
    pub epsilon_f: f64,
}

impl SpectralConfig {
    /// Builds a configuration from the four primary sizes, filling every
    /// other parameter with its default rule.
    pub fn new(
        sample_len: usize,
        block_len: usize,
        window_len: usize,
        freq_bandwidth: f64,
    ) -> Result<Self> {
        if block_len < 4 {
            return Err(Error::Config(format!("block length {block_len} < 4")));
        }
        let mut cfg = Self {
            sample_len,
            block_len,
            window_len,
            freq_bandwidth,
            stride: 0,
            points_per_block: 0,
            n_blocks: 0,
            taper: Taper::Rectangular,
            smoother_kernel: SmootherKernel::Parzen,
            lrv_kernel: LrvKernel::Bartlett,
            lrv_bandwidth: 0.0,
            n_omega: window_len,
            epsilon_grid: std::f64::consts::PI / window_len.max(1) as f64,
            draws: 10.min(block_len),
            exclusion_radius: (sample_len as f64).powf(0.666).floor() as usize,
            theta: 1.0,
            d_star: 2.1,
            epsilon_f: 0.0,
        };
        cfg.exclusion_radius = cfg.exclusion_radius.max(block_len + 1);
        cfg.refresh_derived();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default tuning for a sample of size `sample_len` and an optional
    /// regularity exponent (θ = 1 when absent).
    pub fn default_for(sample_len: usize, theta: Option<f64>) -> Result<Self> {
        if sample_len < MIN_SAMPLE_LEN {
            return Err(Error::Config(format!(
                "sample size {sample_len} below the minimum of {MIN_SAMPLE_LEN}"
            )));
        }
        let t = sample_len as f64;
        let block_len = t.powf(0.66).floor() as usize;
        let mut window_len = t.powf(0.62).floor() as usize;
        window_len -= window_len % 2;
        let freq_bandwidth = (window_len as f64).powf(-1.0 / 6.0);
        let mut cfg = Self::new(sample_len, block_len, window_len, freq_bandwidth)?;
        cfg.draws = if sample_len <= 1000 { 10 } else { block_len / 3 };
        if let Some(theta) = theta {
            cfg.theta = theta;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn refresh_derived(&mut self) {
        self.stride = integer_sqrt(self.block_len).max(1);
        self.points_per_block = self.block_len / self.stride;
        self.n_blocks = (self.sample_len / self.block_len).saturating_sub(1);
        self.lrv_bandwidth = (self.points_per_block as f64).powf(-1.0 / 3.0);
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.window_len < 2 || self.window_len % 2 != 0 {
            return fail(format!("window length {} must be even and ≥ 2", self.window_len));
        }
        if self.window_len >= self.sample_len {
            return fail(format!(
                "window length {} must be below the sample size {}",
                self.window_len, self.sample_len
            ));
        }
        if self.block_len < 4 {
            return fail(format!("block length {} < 4", self.block_len));
        }
        if self.stride != integer_sqrt(self.block_len)
            || self.points_per_block != self.block_len / self.stride
            || self.stride < 1
        {
            return fail("sub-sampling stride and block cardinality are inconsistent".into());
        }
        if self.points_per_block < 2 {
            return fail(format!("{} points per block < 2", self.points_per_block));
        }
        if self.n_blocks != (self.sample_len / self.block_len).saturating_sub(1) {
            return fail("block count is inconsistent with the sample size".into());
        }
        if self.n_blocks < 3 {
            return fail(format!("{} blocks < 3", self.n_blocks));
        }
        if !(self.freq_bandwidth > 0.0 && self.freq_bandwidth < 1.0) {
            return fail(format!("bandwidth {} outside (0, 1)", self.freq_bandwidth));
        }
        if self.lrv_bandwidth != (self.points_per_block as f64).powf(-1.0 / 3.0) {
            return fail("long-run variance bandwidth must equal M_S^(-1/3)".into());
        }
        if self.draws < 1 || self.draws > self.block_len {
            return fail(format!("draws {} outside [1, {}]", self.draws, self.block_len));
        }
        if self.exclusion_radius <= self.block_len || self.exclusion_radius >= self.sample_len {
            return fail(format!(
                "exclusion radius {} outside ({}, {})",
                self.exclusion_radius, self.block_len, self.sample_len
            ));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return fail(format!("theta {} must be positive", self.theta));
        }
        if !(self.d_star > 2.0 && self.d_star.is_finite()) {
            return fail(format!("D* = {} must exceed 2", self.d_star));
        }
        if !(self.epsilon_f >= 0.0 && self.epsilon_f.is_finite()) {
            return fail(format!("epsilon_f = {} must be ≥ 0", self.epsilon_f));
        }
        Ok(())
    }

    /// Serializes the independent parameters as `key = value` lines.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("sample_len", self.sample_len.to_string());
        line("block_len", self.block_len.to_string());
        line("window_len", self.window_len.to_string());
        line("freq_bandwidth", format!("{:?}", self.freq_bandwidth));
        line("taper", self.taper.to_string());
        line("smoother_kernel", self.smoother_kernel.to_string());
        line("lrv_kernel", self.lrv_kernel.to_string());
        line("n_omega", self.n_omega.to_string());
        line("epsilon_grid", format!("{:?}", self.epsilon_grid));
        line("draws", self.draws.to_string());
        line("exclusion_radius", self.exclusion_radius.to_string());
        line("theta", format!("{:?}", self.theta));
        line("d_star", format!("{:?}", self.d_star));
        line("epsilon_f", format!("{:?}", self.epsilon_f));
        out
    }

    /// Applies `key = value` overrides. Blank lines and `#` comments are
    /// skipped. Derived quantities are recomputed afterwards and the
    /// result is validated.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
        }
        self.refresh_derived();
        self.validate()
    }

    /// Sets a single parameter by name without revalidating.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
        }
        match key {
            "sample_len" => self.sample_len = num(key, value)?,
            "block_len" => self.block_len = num(key, value)?,
            "window_len" => self.window_len = num(key, value)?,
            "freq_bandwidth" => self.freq_bandwidth = num(key, value)?,
            "taper" => self.taper = value.parse()?,
            "smoother_kernel" => self.smoother_kernel = value.parse()?,
            "lrv_kernel" => self.lrv_kernel = value.parse()?,
            "n_omega" => self.n_omega = num(key, value)?,
            "epsilon_grid" => self.epsilon_grid = num(key, value)?,
            "draws" => self.draws = num(key, value)?,
            "exclusion_radius" => self.exclusion_radius = num(key, value)?,
            "theta" => self.theta = num(key, value)?,
            "d_star" => self.d_star = num(key, value)?,
            "epsilon_f" => self.epsilon_f = num(key, value)?,
            "stride" | "points_per_block" | "n_blocks" | "lrv_bandwidth" => {
                return Err(Error::Config(format!("{key} is derived and cannot be set")))
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parses a full configuration from `key = value` text, starting from
    /// the defaults for the `sample_len` found in the text.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let sample_len = text
            .lines()
            .filter_map(|l| l.split('#').next()?.split_once('='))
            .find(|(k, _)| k.trim() == "sample_len")
            .ok_or_else(|| Error::Config("missing sample_len".into()))?
            .1
            .trim()
            .parse()
            .map_err(|_| Error::Config("invalid sample_len".into()))?;
        let mut cfg = Self::default_for(sample_len, None)?;
        cfg.apply_kv(text)?;
        Ok(cfg)
    }
}

fn integer_sqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_at_one_thousand() {
        let cfg = SpectralConfig::default_for(1000, None).unwrap();
        assert_eq!(cfg.block_len, 95);
        assert_eq!(cfg.window_len, 72);
        assert!((cfg.freq_bandwidth - 0.4903).abs() < 5e-5);
        assert_eq!(cfg.exclusion_radius, 99);
        assert_eq!(cfg.stride, 9);
        assert_eq!(cfg.points_per_block, 10);
        assert_eq!(cfg.n_blocks, 9);
        assert_eq!(cfg.draws, 10);
        assert!((cfg.lrv_bandwidth - 0.4642).abs() < 5e-5);
        assert_eq!(cfg.theta, 1.0);
        assert_eq!(cfg.d_star, 2.1);
        assert_eq!(cfg.epsilon_f, 0.0);
        assert_eq!(cfg.taper, Taper::Rectangular);
    }

    #[test]
    fn draws_scale_above_one_thousand() {
        let cfg = SpectralConfig::default_for(2000, Some(0.5)).unwrap();
        assert_eq!(cfg.draws, cfg.block_len / 3);
        assert_eq!(cfg.theta, 0.5);
    }

    #[test]
    fn too_short_is_rejected() {
        assert!(matches!(
            SpectralConfig::default_for(32, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn kernels_integrate_to_one() {
        for k in [
            SmootherKernel::Parzen,
            SmootherKernel::Bartlett,
            SmootherKernel::Uniform,
        ] {
            let n = 200_000;
            let h = 2.0 / n as f64;
            let area: f64 = (0..n).map(|i| k.eval(-1.0 + (i as f64 + 0.5) * h) * h).sum();
            assert!((area - 1.0).abs() < 1e-6, "{k}: {area}");
        }
    }

    #[test]
    fn kv_round_trip_and_errors() {
        let mut cfg = SpectralConfig::default_for(1000, None).unwrap();
        cfg.epsilon_f = 1e-8;
        cfg.smoother_kernel = SmootherKernel::Bartlett;
        let text = cfg.to_kv_string();
        assert_eq!(SpectralConfig::from_kv_str(&text).unwrap(), cfg);

        let mut c2 = cfg.clone();
        let err = c2.apply_kv("theta = 1.5\nbogus\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(c2.clone().apply_kv("stride = 3").is_err());
        assert!(c2.apply_kv("d_star = 2.0").is_err());
    }

    #[test]
    fn d_star_must_exceed_two() {
        let mut cfg = SpectralConfig::default_for(500, None).unwrap();
        cfg.d_star = 2.0;
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]
        #[test]
        fn defaults_satisfy_invariants(t in 64usize..=5000) {
            let cfg = SpectralConfig::default_for(t, None).unwrap();
            prop_assert!(cfg.validate().is_ok());
            prop_assert!(cfg.block_len < cfg.exclusion_radius);
            prop_assert_eq!(cfg.window_len % 2, 0);
        }

        #[test]
        fn defaults_are_monotone(t in 64usize..5000) {
            let a = SpectralConfig::default_for(t, None).unwrap();
            let b = SpectralConfig::default_for(t + 1, None).unwrap();
            prop_assert!(a.block_len <= b.block_len);
            prop_assert!(a.window_len <= b.window_len);
            prop_assert!(a.exclusion_radius <= b.exclusion_radius);
        }
    }
}
