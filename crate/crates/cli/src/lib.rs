//! Plumbing behind the `evospec` binary: CSV ingestion, run manifests,
//! one function per subcommand and the Monte Carlo harness.

pub mod io;
pub mod montecarlo;

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use evospec::blocks::{autocovariances, block_set};
use evospec::detect::{algorithm1_with, d_profile_all, single_break};
use evospec::spectral::spectrum_field;
use evospec::stats::StatisticPanel;
use evospec::{
    ChangePointSet, DetectOptions, FrequencyGrid, LocalSpectrum, Side, SpectralConfig,
    SpectralEngine, Statistic, TestReport, ThetaSource, TimeSeries,
};
use serde::Serialize;

pub use io::{read_series, write_series};
pub use montecarlo::{detection_summary, rejection_rates, replicate, thread_pool};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] evospec::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Frequencies swept by the single-frequency statistics when none are
/// given: four values evenly spread on `[0, π)`.
pub const DEFAULT_OMEGAS: [f64; 4] = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];

/// Everything a subcommand needs besides its positional input.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub reps: usize,
    pub alpha: f64,
    pub stats: Vec<Statistic>,
    pub omegas: Vec<f64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub debug_dumps: bool,
    pub theta_source: ThetaSource,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            config_path: None,
            seed: 0,
            reps: 1000,
            alpha: 0.05,
            stats: Statistic::ALL.to_vec(),
            omegas: DEFAULT_OMEGAS.to_vec(),
            out: None,
            threads: None,
            debug_dumps: false,
            theta_source: ThetaSource::Estimated,
        }
    }
}

impl RunManifest {
    /// Default configuration for `sample_len`, with overrides from the
    /// config file if one was given.
    pub fn config_for(&self, sample_len: usize) -> Result<SpectralConfig> {
        let mut cfg = SpectralConfig::default_for(sample_len, None)?;
        if let Some(path) = &self.config_path {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            cfg.apply_kv(&text)?;
        }
        Ok(cfg)
    }

    /// Path next to `out` with `suffix` replacing its extension, or
    /// `fallback` in the working directory when there is no `out`.
    pub fn sidecar(&self, suffix: &str, fallback: &str) -> PathBuf {
        match &self.out {
            Some(p) => p.with_extension(suffix),
            None => PathBuf::from(fallback),
        }
    }
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                }),
                _ => Ok(()),
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestOutput {
    #[serde(rename = "T")]
    pub sample_len: usize,
    pub reports: Vec<TestReport>,
}

impl TestOutput {
    pub fn any_reject(&self) -> bool {
        self.reports.iter().any(|r| r.reject)
    }

    /// Fixed-column summary, one line per report.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<7} {:>8} {:>11} {:>11} {:>9} {:>9} {:>6}\n",
            "stat", "omega", "raw_max", "normalized", "crit", "p", "reject"
        );
        for r in &self.reports {
            let omega = r.omega.or(r.argmax_omega).unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{:<7} {:>8.4} {:>11.5} {:>11.5} {:>9.4} {:>9.4} {:>6}\n",
                r.statistic.to_string(),
                omega,
                r.raw_max,
                r.normalized,
                r.critical_value,
                r.p_value,
                if r.reject { "yes" } else { "no" }
            ));
        }
        out
    }
}

/// Runs the requested statistics on `x`: single-frequency forms at every
/// manifest frequency, double-sup forms once over the thinned grid.
pub fn run_test(x: &TimeSeries, manifest: &RunManifest) -> Result<TestOutput> {
    let cfg = manifest.config_for(x.len())?;
    let grid = FrequencyGrid::for_config(&cfg)?;
    let singles: Vec<Statistic> = manifest
        .stats
        .iter()
        .copied()
        .filter(|s| !s.is_double_sup())
        .collect();
    let doubles: Vec<Statistic> = manifest
        .stats
        .iter()
        .copied()
        .filter(|s| s.is_double_sup())
        .collect();

    let mut freqs = if singles.is_empty() {
        Vec::new()
    } else {
        manifest.omegas.clone()
    };
    let n_single = freqs.len();
    if !doubles.is_empty() {
        freqs.extend(grid.thinned());
    }
    let panel = StatisticPanel::new(x, &cfg, &freqs)?;
    let mut reports = Vec::new();
    for k in 0..n_single {
        for &s in &singles {
            reports.push(panel.single(s, k, manifest.alpha)?);
        }
    }
    let positions: Vec<usize> = (n_single..freqs.len()).collect();
    for &s in &doubles {
        reports.push(panel.double_sup(s, &positions, grid.n_thinned_effective(), manifest.alpha)?);
    }
    if manifest.debug_dumps {
        let path = manifest.sidecar("gamma.csv", "gamma_profile.csv");
        fs::write(&path, gamma_profile(x, &cfg, &freqs)?).map_err(io_err(&path))?;
    }
    Ok(TestOutput {
        sample_len: x.len(),
        reports,
    })
}

/// Autocovariance profile behind every block long-run variance, as CSV
/// with columns `block,omega,lag,gamma,weight`.
pub fn gamma_profile(x: &TimeSeries, cfg: &SpectralConfig, freqs: &[f64]) -> Result<String> {
    let engine = SpectralEngine::new(&x.demeaned(), cfg, freqs);
    let mut out = String::from("block,omega,lag,gamma,weight\n");
    for r in 1..cfg.n_blocks {
        let set = block_set(r, cfg)?;
        let rows: Vec<&[f64]> = set
            .indices
            .iter()
            .map(|&j| engine.smoothed(j, Side::Left))
            .collect::<evospec::Result<_>>()?;
        for (k, omega) in freqs.iter().enumerate() {
            let column: Vec<f64> = rows.iter().map(|row| row[k]).collect();
            for (lag, g) in autocovariances(&column).iter().enumerate() {
                let w = cfg.lrv_kernel.eval(cfg.lrv_bandwidth * lag as f64);
                out.push_str(&format!("{r},{omega},{lag},{g},{w}\n"));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SingleBreak {
    pub t: usize,
    pub omega: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectOutput {
    #[serde(rename = "T")]
    pub sample_len: usize,
    pub seed: u64,
    pub single_break: SingleBreak,
    #[serde(flatten)]
    pub changes: ChangePointSet,
}

/// Multiple break search plus the single-break estimate.
pub fn run_detect(x: &TimeSeries, manifest: &RunManifest) -> Result<DetectOutput> {
    let cfg = manifest.config_for(x.len())?;
    let grid = FrequencyGrid::for_config(&cfg)?;
    let (t, omega) = single_break(x, &cfg, &grid)?;
    let options = DetectOptions {
        seed: manifest.seed,
        theta: manifest.theta_source,
    };
    let changes = algorithm1_with(x, &cfg, &grid, &options)?;
    Ok(DetectOutput {
        sample_len: x.len(),
        seed: manifest.seed,
        single_break: SingleBreak { t, omega },
        changes,
    })
}

/// `max_ω D_r(ω)` at every valid split as CSV `r,d_max,omega`.
pub fn d_profile_csv(x: &TimeSeries, manifest: &RunManifest) -> Result<String> {
    let cfg = manifest.config_for(x.len())?;
    let grid = FrequencyGrid::for_config(&cfg)?;
    let mut out = String::from("r,d_max,omega\n");
    for (r, d, w) in d_profile_all(x, &cfg, &grid)? {
        out.push_str(&format!("{r},{d},{w}\n"));
    }
    Ok(out)
}

/// Smoothed local spectrum at the anchors used by the block statistics,
/// over the full frequency grid.
pub fn run_spectrum(x: &TimeSeries, side: Side, manifest: &RunManifest) -> Result<LocalSpectrum> {
    let cfg = manifest.config_for(x.len())?;
    let grid = FrequencyGrid::for_config(&cfg)?;
    Ok(spectrum_field(&x.demeaned(), side, &cfg, &grid)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use evospec::{simulate, DgpSpec};

    fn manifest() -> RunManifest {
        RunManifest::default()
    }

    #[test]
    fn test_output_counts_reports() {
        let x = simulate(&DgpSpec::new("M1".parse().unwrap(), 500).unwrap(), 1).unwrap();
        let out = run_test(&x, &manifest()).unwrap();
        // 2 single statistics × 4 frequencies + 2 double-sup forms
        assert_eq!(out.reports.len(), 10);
        assert_eq!(out.table().lines().count(), 11);
    }

    #[test]
    fn panel_reports_match_standalone_statistics() {
        let x = simulate(&DgpSpec::new("M3".parse().unwrap(), 600).unwrap(), 4).unwrap();
        let m = RunManifest {
            omegas: vec![0.5],
            ..manifest()
        };
        let out = run_test(&x, &m).unwrap();
        let cfg = m.config_for(600).unwrap();
        let grid = FrequencyGrid::for_config(&cfg).unwrap();
        let direct = evospec::stats::s_max(&x, 0.5, &cfg, 0.05).unwrap();
        assert_eq!(out.reports[0].normalized, direct.normalized);
        let direct = evospec::stats::r_dmax(&x, &cfg, &grid, 0.05).unwrap();
        assert_eq!(out.reports[3].normalized, direct.normalized);
    }

    #[test]
    fn gamma_profile_has_a_row_per_lag() {
        let x = simulate(&DgpSpec::new("M1".parse().unwrap(), 500).unwrap(), 2).unwrap();
        let cfg = SpectralConfig::default_for(500, None).unwrap();
        let csv = gamma_profile(&x, &cfg, &[0.0, 1.0]).unwrap();
        let rows = (cfg.n_blocks - 1) * 2 * cfg.points_per_block;
        assert_eq!(csv.lines().count(), rows + 1);
    }
}
