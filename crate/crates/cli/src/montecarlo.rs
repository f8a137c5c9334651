//! Replicated simulations: rejection frequencies of the tests and the
//! distribution of the multiple-break estimates.

use evospec::detect::algorithm1_with;
use evospec::rng::derive_seed;
use evospec::stats::StatisticPanel;
use evospec::{simulate, DetectOptions, DgpSpec, Error, FrequencyGrid, Statistic, TimeSeries};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use crate::{CliError, Result, RunManifest};

/// Smallest replication count accepted by the harness.
pub const MIN_REPLICATIONS: usize = 100;

/// Worker pool with `threads` workers, or one per available core.
pub fn thread_pool(threads: Option<usize>) -> Result<ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| CliError::Pool(e.to_string()))
}

/// Runs `f` on replications `0..reps` of `spec`. Replication `i` draws
/// from the stream derived from `(seed, i)`; results come back in
/// replication order whatever the scheduling.
pub fn replicate<T, F>(
    spec: &DgpSpec,
    reps: usize,
    seed: u64,
    threads: Option<usize>,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &TimeSeries) -> evospec::Result<T> + Sync,
{
    let pool = thread_pool(threads)?;
    let out = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|i| {
                let x = simulate(spec, derive_seed(seed, &[i as u64]))?;
                f(i, &x)
            })
            .collect::<evospec::Result<Vec<T>>>()
    })?;
    Ok(out)
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPLICATIONS {
        return Err(Error::Config(format!(
            "{reps} replications, at least {MIN_REPLICATIONS} required"
        ))
        .into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionRow {
    pub model: String,
    #[serde(rename = "T")]
    pub sample_len: usize,
    /// Statistic name, with the frequency in parentheses for the
    /// single-frequency forms.
    pub statistic: String,
    pub alpha: f64,
    pub reject_rate: f64,
    pub replications: usize,
    pub seed: u64,
}

pub const REJECTION_HEADER: &str = "model,T,statistic,alpha,reject_rate,replications,seed";

pub fn rejection_csv(rows: &[RejectionRow]) -> String {
    let mut out = format!("{REJECTION_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.model, r.sample_len, r.statistic, r.alpha, r.reject_rate, r.replications, r.seed
        ));
    }
    out
}

/// Label of a statistic in the Monte Carlo tables.
pub fn statistic_label(statistic: Statistic, omega: Option<f64>) -> String {
    match omega {
        Some(w) => format!("{statistic}({w:.4})"),
        None => statistic.to_string(),
    }
}

/// Rejection frequency of every requested statistic over `manifest.reps`
/// replications of `spec`.
pub fn rejection_rates(spec: &DgpSpec, manifest: &RunManifest) -> Result<Vec<RejectionRow>> {
    check_reps(manifest.reps)?;
    let cfg = manifest.config_for(spec.len)?;
    let grid = FrequencyGrid::for_config(&cfg)?;
    let singles: Vec<Statistic> = manifest.stats.iter().copied().filter(|s| !s.is_double_sup()).collect();
    let doubles: Vec<Statistic> = manifest.stats.iter().copied().filter(|s| s.is_double_sup()).collect();
    let omegas = if singles.is_empty() { Vec::new() } else { manifest.omegas.clone() };
    let mut freqs = omegas.clone();
    freqs.extend(grid.thinned());
    let positions: Vec<usize> = (omegas.len()..freqs.len()).collect();

    let mut labels = Vec::new();
    for &w in &omegas {
        for &s in &singles {
            labels.push(statistic_label(s, Some(w)));
        }
    }
    for &s in &doubles {
        labels.push(statistic_label(s, None));
    }

    let decisions = replicate(spec, manifest.reps, manifest.seed, manifest.threads, |_, x| {
        let panel = StatisticPanel::new(x, &cfg, &freqs)?;
        let mut row = Vec::with_capacity(labels.len());
        for k in 0..omegas.len() {
            for &s in &singles {
                row.push(panel.single(s, k, manifest.alpha)?.reject);
            }
        }
        for &s in &doubles {
            row.push(
                panel
                    .double_sup(s, &positions, grid.n_thinned_effective(), manifest.alpha)?
                    .reject,
            );
        }
        Ok(row)
    })?;

    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(c, statistic)| {
            let hits = decisions.iter().filter(|row| row[c]).count();
            RejectionRow {
                model: spec.model.to_string(),
                sample_len: spec.len,
                statistic,
                alpha: manifest.alpha,
                reject_rate: hits as f64 / manifest.reps as f64,
                replications: manifest.reps,
                seed: manifest.seed,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn quartiles(mut values: Vec<f64>) -> Quartiles {
    values.sort_by(|a, b| a.total_cmp(b));
    Quartiles {
        q25: quantile(&values, 0.25),
        median: quantile(&values, 0.5),
        q75: quantile(&values, 0.75),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionSummary {
    pub model: String,
    #[serde(rename = "T")]
    pub sample_len: usize,
    pub replications: usize,
    pub seed: u64,
    /// True number of breaks.
    pub m0: usize,
    /// Share of replications with `m̂ = m0`.
    pub fraction_correct: f64,
    /// `m_hat_counts[k]` replications found `k` breaks.
    pub m_hat_counts: Vec<usize>,
    /// Quartiles of the `l`-th estimated date among replications with
    /// `m̂ = m0`.
    pub break_dates: Vec<Quartiles>,
}

impl DetectionSummary {
    pub fn csv(&self) -> String {
        let mut out = String::from("model,T,replications,seed,m0,fraction_correct,break,q25,median,q75\n");
        for (l, q) in self.break_dates.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                self.model,
                self.sample_len,
                self.replications,
                self.seed,
                self.m0,
                self.fraction_correct,
                l + 1,
                q.q25,
                q.median,
                q.q75
            ));
        }
        out
    }
}

/// Runs the multiple-break search on every replication of `spec`.
pub fn detection_summary(spec: &DgpSpec, manifest: &RunManifest) -> Result<DetectionSummary> {
    check_reps(manifest.reps)?;
    let cfg = manifest.config_for(spec.len)?;
    let grid = FrequencyGrid::for_config(&cfg)?;
    let m0 = spec.truth().map_or(0, |t| t.len());
    let found = replicate(spec, manifest.reps, manifest.seed, manifest.threads, |i, x| {
        let options = DetectOptions {
            seed: derive_seed(manifest.seed, &[i as u64, 1]),
            theta: manifest.theta_source,
        };
        let set = algorithm1_with(x, &cfg, &grid, &options)?;
        Ok(set.estimates.iter().map(|e| e.t_hat).collect::<Vec<_>>())
    })?;

    let most = found.iter().map(Vec::len).max().unwrap_or(0);
    let mut m_hat_counts = vec![0; most.max(m0) + 1];
    for f in &found {
        m_hat_counts[f.len()] += 1;
    }
    let correct: Vec<&Vec<usize>> = found.iter().filter(|f| f.len() == m0).collect();
    let break_dates = (0..m0)
        .map(|l| quartiles(correct.iter().map(|f| f[l] as f64).collect()))
        .collect();
    Ok(DetectionSummary {
        model: spec.model.to_string(),
        sample_len: spec.len,
        replications: manifest.reps,
        seed: manifest.seed,
        m0,
        fraction_correct: correct.len() as f64 / manifest.reps as f64,
        m_hat_counts,
        break_dates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.25), 1.75);
    }

    #[test]
    fn too_few_replications() {
        let spec = DgpSpec::new("M1".parse().unwrap(), 200).unwrap();
        let m = RunManifest {
            reps: 10,
            ..RunManifest::default()
        };
        assert!(matches!(
            rejection_rates(&spec, &m),
            Err(CliError::Core(Error::Config(_)))
        ));
    }

    #[test]
    fn rates_do_not_depend_on_thread_count() {
        let spec = DgpSpec::new("M3".parse().unwrap(), 300).unwrap();
        let base = RunManifest {
            reps: 100,
            seed: 5,
            omegas: vec![0.0],
            ..RunManifest::default()
        };
        let one = rejection_rates(&spec, &RunManifest { threads: Some(1), ..base.clone() }).unwrap();
        let four = rejection_rates(&spec, &RunManifest { threads: Some(4), ..base }).unwrap();
        assert_eq!(one, four);
        assert_eq!(one.len(), 4);
        assert!(rejection_csv(&one).starts_with(REJECTION_HEADER));
    }
}
