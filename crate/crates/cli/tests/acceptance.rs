//! Acceptance suite: size, power, estimation and numerical properties at
//! the reference tolerances. Prints one PASS/FAIL line per criterion.
//!
//! Exits with status 1 on any failure only when `EVOSPEC_ACCEPTANCE_STRICT`
//! is set to a non-empty value other than `0`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use evospec::detect::{algorithm1, single_break};
use evospec::rng::stream;
use evospec::spectral::{local_periodogram, smooth_local_periodogram, TaperWindow};
use evospec::stats::{all_statistics, limit_cdf, s_max};
use evospec::{
    simulate, DgpSpec, FrequencyGrid, Side, SpectralConfig, SpectralEngine, Taper, TimeSeries,
};
use evospec_cli::montecarlo::{detection_summary, rejection_rates, replicate, thread_pool, RejectionRow};
use evospec_cli::RunManifest;
use rand::Rng;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn manifest(reps: usize, omega: f64) -> RunManifest {
    RunManifest {
        seed: SEED,
        reps,
        omegas: vec![omega],
        ..RunManifest::default()
    }
}

fn rate(rows: &[RejectionRow], prefix: &str) -> f64 {
    rows.iter()
        .find(|r| r.statistic.starts_with(prefix))
        .map(|r| r.reject_rate)
        .expect("statistic present")
}

fn rates(model: &str, len: usize, reps: usize) -> Vec<RejectionRow> {
    let spec = DgpSpec::new(model.parse().unwrap(), len).unwrap();
    rejection_rates(&spec, &manifest(reps, 0.0)).unwrap()
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
fn ks_distance(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.total_cmp(b));
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn size_table1_single() -> Outcome {
    let rows = rates("M1(0.3)", 500, 2000);
    let s = rate(&rows, "smax(");
    let r = rate(&rows, "rmax(");
    outcome(
        within(s, 0.02, 0.07) && within(r, 0.02, 0.08),
        format!("M1(0.3) T=500: Smax(0) {s:.4} in [0.02, 0.07], Rmax(0) {r:.4} in [0.02, 0.08]"),
    )
}

fn size_table1_double() -> Outcome {
    let rows = rates("M2", 1000, 2000);
    let s = rate(&rows, "sdmax");
    let r = rate(&rows, "rdmax");
    outcome(
        within(s, 0.03, 0.09) && within(r, 0.01, 0.07),
        format!("M2 T=1000: SDmax {s:.4} in [0.03, 0.09], RDmax {r:.4} in [0.01, 0.07]"),
    )
}

fn power_breaks() -> Outcome {
    let m3 = rates("M3", 1000, 1000);
    let m4 = rates("M4", 1000, 1000);
    let s = rate(&m3, "smax(");
    let r = rate(&m3, "rmax(");
    let sd = rate(&m4, "sdmax");
    outcome(
        s >= 0.80 && r >= 0.90 && sd >= 0.95,
        format!("M3 T=1000: Smax(0) {s:.4} >= 0.80, Rmax(0) {r:.4} >= 0.90; M4: SDmax {sd:.4} >= 0.95"),
    )
}

fn power_smooth() -> Outcome {
    let rows = rates("M5", 1000, 1000);
    let s = rate(&rows, "sdmax");
    let r = rate(&rows, "rdmax");
    outcome(
        s >= 0.80 && s > r,
        format!("M5 T=1000: SDmax {s:.4} >= 0.80 and > RDmax {r:.4}"),
    )
}

fn estimation() -> Outcome {
    let m = manifest(1000, 0.0);
    let m6 = detection_summary(&DgpSpec::new("M6".parse().unwrap(), 1000).unwrap(), &m).unwrap();
    let m7 = detection_summary(&DgpSpec::new("M7".parse().unwrap(), 1000).unwrap(), &m).unwrap();
    let t1 = m6.break_dates.first().map_or(f64::NAN, |q| q.median);
    let t2 = m6.break_dates.get(1).map_or(f64::NAN, |q| q.median);
    outcome(
        m6.fraction_correct >= 0.75
            && within(t1, 300.0, 365.0)
            && within(t2, 630.0, 695.0)
            && m7.fraction_correct >= 0.70,
        format!(
            "M6 T=1000: share m=2 {:.4} >= 0.75, median T1 {t1} in [300, 365], median T2 {t2} in [630, 695] (m counts {:?}); M7: share m=2 {:.4} >= 0.70 (m counts {:?})",
            m6.fraction_correct, m6.m_hat_counts, m7.fraction_correct, m7.m_hat_counts
        ),
    )
}

fn null_distribution() -> Outcome {
    let spec = DgpSpec::new("M1(0.3)".parse().unwrap(), 2000).unwrap();
    let cfg = SpectralConfig::default_for(2000, None).unwrap();
    let values = replicate(&spec, 2000, SEED, None, |_, x| {
        Ok(s_max(x, 0.0, &cfg, 0.05)?.normalized)
    })
    .unwrap();
    let ks = ks_distance(values, limit_cdf);
    outcome(
        ks < 0.08,
        format!("M1(0.3) T=2000: KS distance of normalized Smax(0) {ks:.4} < 0.08"),
    )
}

fn chi_square_limit() -> Outcome {
    let n = 256;
    let taper = TaperWindow::new(Taper::Rectangular, n);
    let spec = DgpSpec::new("M1(0)".parse().unwrap(), n).unwrap();
    let pairs = replicate(&spec, 2000, SEED, None, |_, x| {
        let a = local_periodogram(x, n, Side::Left, PI / 3.0, &taper)?;
        let b = local_periodogram(x, n, Side::Left, 2.0 * PI / 3.0, &taper)?;
        Ok((a * 2.0 * PI, b * 2.0 * PI))
    })
    .unwrap();
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let corr = correlation(&a, &b);
    let ks = ks_distance(a, |v| 1.0 - (-v.max(0.0)).exp());
    outcome(
        ks < 0.05 && corr.abs() < 0.05,
        format!("white noise n=256: KS vs chi2_2/2 {ks:.4} < 0.05, |corr(pi/3, 2pi/3)| {:.4} < 0.05", corr.abs()),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = stream(SEED, &[8]);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let len = rng.gen_range(200..=800);
        let cfg = SpectralConfig::default_for(len, None).unwrap();
        let x = TimeSeries::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let side = if i % 2 == 0 { Side::Left } else { Side::Right };
        let j = match side {
            Side::Left => rng.gen_range(cfg.window_len..=len),
            Side::Right => rng.gen_range(1..=len - cfg.window_len),
        };
        let omega = rng.gen_range(-PI..PI);
        let engine = SpectralEngine::new(&x, &cfg, &[omega]);
        let fast = engine.smoothed_at(j, side, 0).unwrap();
        let slow = smooth_local_periodogram(&x, j, side, omega, &cfg).unwrap();
        worst = worst.max((fast - slow).abs() / slow.abs().max(f64::MIN_POSITIVE));

        let taper = TaperWindow::new(cfg.taper, cfg.window_len);
        let ordinates = engine.fourier_ordinates(j, side).unwrap();
        let s = rng.gen_range(1..cfg.window_len);
        let w = 2.0 * PI * s as f64 / cfg.window_len as f64;
        let direct = local_periodogram(&x, j, side, w, &taper).unwrap();
        worst = worst.max((ordinates[s - 1] - direct).abs() / direct.abs().max(1e-300));
    }
    outcome(
        worst < 1e-10,
        format!("100 random (series, j, omega): worst relative gap {worst:.3e} < 1e-10"),
    )
}

fn invariants() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (model, seed) in [("M1(0.3)", 1), ("M3", 2), ("M5", 3), ("M6", 4), ("M7", 5)] {
        let spec = DgpSpec::new(model.parse().unwrap(), 1000).unwrap();
        let cfg = SpectralConfig::default_for(1000, None).unwrap();
        let grid = FrequencyGrid::for_config(&cfg).unwrap();
        let x = simulate(&spec, seed).unwrap();
        let y = x.scaled(3.0);

        let a = all_statistics(&x, 0.0, &cfg, &grid, 0.05).unwrap();
        let b = all_statistics(&y, 0.0, &cfg, &grid, 0.05).unwrap();
        for (p, q) in a.iter().zip(&b) {
            let rel = (p.normalized - q.normalized).abs() / p.normalized.abs().max(1.0);
            if rel > 1e-9 || p.argmax_r != q.argmax_r || p.argmax_omega != q.argmax_omega || p.reject != q.reject {
                ok = false;
                notes.push(format!("{model} {} differs under scaling", p.statistic));
            }
        }
        if single_break(&x, &cfg, &grid).unwrap() != single_break(&y, &cfg, &grid).unwrap() {
            ok = false;
            notes.push(format!("{model} single-break estimate differs under scaling"));
        }
        let dx = algorithm1(&x, &cfg, &grid, seed).unwrap();
        let dy = algorithm1(&y, &cfg, &grid, seed).unwrap();
        let times = |d: &evospec::ChangePointSet| d.estimates.iter().map(|e| (e.t_hat, e.omega_hat)).collect::<Vec<_>>();
        let decisions = |d: &evospec::ChangePointSet| d.trace.iter().map(|e| e.rejected).collect::<Vec<_>>();
        if times(&dx) != times(&dy) || decisions(&dx) != decisions(&dy) {
            ok = false;
            notes.push(format!("{model} break search differs under scaling"));
        }

        let one = thread_pool(Some(1)).unwrap().install(|| algorithm1(&x, &cfg, &grid, seed).unwrap());
        let eight = thread_pool(Some(8)).unwrap().install(|| algorithm1(&x, &cfg, &grid, seed).unwrap());
        if one != eight || one != dx {
            ok = false;
            notes.push(format!("{model} break search depends on thread count"));
        }
    }
    let detail = if ok {
        "x -> 3x leaves statistics, argmax and break decisions unchanged; 1 vs 8 threads identical".to_string()
    } else {
        notes.join("; ")
    };
    outcome(ok, detail)
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--nocapture` or a filter;
    // the suite always runs in full.
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 size, single frequency", size_table1_single),
        ("2 size, double sup", size_table1_double),
        ("3 power, breaks", power_breaks),
        ("4 power, smooth change", power_smooth),
        ("5 break estimation", estimation),
        ("6 null distribution", null_distribution),
        ("7 chi-square limit", chi_square_limit),
        ("8 fast path vs direct sum", oracle_equivalence),
        ("9 scale and thread invariance", invariants),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    let strict = std::env::var("EVOSPEC_ACCEPTANCE_STRICT").is_ok_and(|v| !v.is_empty() && v != "0");
    if strict && failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
