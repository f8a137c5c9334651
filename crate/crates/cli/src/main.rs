use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use evospec::{simulate, DgpSpec, Model, Side, Statistic, ThetaSource};
use evospec_cli::montecarlo::rejection_csv;
use evospec_cli::{
    d_profile_csv, detection_summary, emit, read_series, rejection_rates, run_detect,
    run_spectrum, run_test, write_series, RunManifest, DEFAULT_OMEGAS,
};

#[derive(Parser)]
#[command(name = "evospec", version, about = "Tests and estimates breaks in the spectrum of a time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// `key = value` file overriding the default tuning parameters
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo replications
    #[arg(long, global = true, default_value_t = 1000)]
    reps: usize,
    #[arg(long, global = true, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, global = true, value_enum, default_value_t = StatArg::All)]
    stat: StatArg,
    /// Single frequency for smax/rmax, in radians
    #[arg(long, global = true, conflicts_with = "omegas")]
    omega: Option<f64>,
    /// Comma-separated frequencies for smax/rmax [default: 0,π/4,π/2,3π/4]
    #[arg(long, global = true, value_delimiter = ',')]
    omegas: Option<Vec<f64>>,
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "EVOSPEC_THREADS")]
    threads: Option<usize>,
    /// Write intermediate diagnostics next to the output
    #[arg(long, global = true)]
    debug_dumps: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the break tests on a single-column CSV
    Test {
        input: PathBuf,
        /// Exit with status 2 when any test rejects
        #[arg(long)]
        fail_on_reject: bool,
    },
    /// Locate breaks in a single-column CSV
    Detect {
        input: PathBuf,
        /// Also write max_ω D_r(ω) for every split as CSV
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ThetaArg::Estimated)]
        theta_source: ThetaArg,
    },
    /// Simulate one path of a model; writes a truth sidecar for models with breaks
    Simulate {
        /// M1, M1(rho), M2, ..., M7
        #[arg(long)]
        model: String,
        #[arg(short = 'T', long = "len")]
        len: usize,
    },
    /// Replicate a model and report rejection rates or break estimates
    Montecarlo {
        #[arg(long)]
        model: String,
        #[arg(short = 'T', long = "len")]
        len: usize,
        /// Summarize the multiple-break search instead of the tests
        #[arg(long)]
        detect: bool,
        #[arg(long, value_enum, default_value_t = ThetaArg::Estimated)]
        theta_source: ThetaArg,
    },
    /// Smoothed local spectrum at the block anchors as CSV
    Spectrum {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = SideArg::Left)]
        side: SideArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StatArg {
    Smax,
    Sdmax,
    Rmax,
    Rdmax,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ThetaArg {
    Estimated,
    Configured,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

impl Cli {
    fn manifest(&self, theta: Option<ThetaArg>) -> anyhow::Result<RunManifest> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("--alpha must lie in (0, 1)");
        }
        let stats = match self.stat {
            StatArg::Smax => vec![Statistic::Smax],
            StatArg::Sdmax => vec![Statistic::SDmax],
            StatArg::Rmax => vec![Statistic::Rmax],
            StatArg::Rdmax => vec![Statistic::RDmax],
            StatArg::All => Statistic::ALL.to_vec(),
        };
        let omegas = match (&self.omega, &self.omegas) {
            (Some(w), _) => vec![*w],
            (None, Some(ws)) => ws.clone(),
            (None, None) => DEFAULT_OMEGAS.to_vec(),
        };
        Ok(RunManifest {
            config_path: self.config.clone(),
            seed: self.seed,
            reps: self.reps,
            alpha: self.alpha,
            stats,
            omegas,
            out: self.out.clone(),
            threads: self.threads,
            debug_dumps: self.debug_dumps,
            theta_source: match theta.unwrap_or(ThetaArg::Estimated) {
                ThetaArg::Estimated => ThetaSource::Estimated,
                ThetaArg::Configured => ThetaSource::Configured,
            },
        })
    }
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Test {
            input,
            fail_on_reject,
        } => {
            let manifest = cli.manifest(None)?;
            let x = read_series(input)?;
            let result = run_test(&x, &manifest)?;
            emit(out, &(serde_json::to_string_pretty(&result)? + "\n"))?;
            eprint!("{}", result.table());
            if *fail_on_reject && result.any_reject() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Detect {
            input,
            profile,
            theta_source,
        } => {
            let manifest = cli.manifest(Some(*theta_source))?;
            let x = read_series(input)?;
            let result = run_detect(&x, &manifest)?;
            emit(out, &(serde_json::to_string_pretty(&result)? + "\n"))?;
            if let Some(path) = profile {
                std::fs::write(path, d_profile_csv(&x, &manifest)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Simulate { model, len } => {
            let model: Model = model.parse()?;
            let spec = DgpSpec::new(model, *len)?;
            let x = simulate(&spec, cli.seed)?;
            match out {
                Some(path) => {
                    write_series(path, &x)?;
                    if let Some(truth) = spec.truth() {
                        let sidecar = path.with_extension("truth.json");
                        let body = serde_json::json!({
                            "model": model.to_string(),
                            "T": len,
                            "seed": cli.seed,
                            "breaks": truth,
                        });
                        std::fs::write(&sidecar, serde_json::to_string_pretty(&body)? + "\n")
                            .with_context(|| format!("writing {}", sidecar.display()))?;
                    }
                }
                None => emit(None, &evospec_cli::io::series_csv(&x))?,
            }
        }
        Command::Montecarlo {
            model,
            len,
            detect,
            theta_source,
        } => {
            let manifest = cli.manifest(Some(*theta_source))?;
            let spec = DgpSpec::new(model.parse()?, *len)?;
            let (csv, json) = if *detect {
                let summary = detection_summary(&spec, &manifest)?;
                (summary.csv(), serde_json::to_string_pretty(&summary)?)
            } else {
                let rows = rejection_rates(&spec, &manifest)?;
                (rejection_csv(&rows), serde_json::to_string_pretty(&rows)?)
            };
            emit(out, &csv)?;
            if let Some(path) = out {
                let sidecar = path.with_extension("json");
                std::fs::write(&sidecar, json + "\n")
                    .with_context(|| format!("writing {}", sidecar.display()))?;
            }
        }
        Command::Spectrum { input, side } => {
            let manifest = cli.manifest(None)?;
            let x = read_series(input)?;
            let side = match side {
                SideArg::Left => Side::Left,
                SideArg::Right => Side::Right,
            };
            let field = run_spectrum(&x, side, &manifest)?;
            let mut buf = Vec::new();
            field.write_csv(&mut buf)?;
            emit(out, &String::from_utf8(buf)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
