use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qpelab::experiment::{self, ExperimentConfig, Table};
use qpelab::Error;

#[derive(Parser)]
#[command(name = "qpelab", version, about = "Phase-estimation experiments on a statevector simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a τ sweep described by a JSON config and fit the phases.
    Run {
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory (default: out/<config stem>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit analysis tables as CSV.
    Analyze {
        #[command(subcommand)]
        table: Analysis,
        /// Write the table here instead of stdout.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Analysis {
    /// Accuracy error of the majority and mean-direction estimators.
    ErrorCurves {
        #[arg(long, default_value_t = 2)]
        r_min: usize,
        #[arg(long, default_value_t = 6)]
        r_max: usize,
        #[arg(long, default_value_t = 10_000)]
        points: usize,
    },
    /// Sampling σ of the mean direction against shot count.
    Dispersion {
        #[arg(long, default_value_t = 3)]
        r_min: usize,
        #[arg(long, default_value_t = 6)]
        r_max: usize,
        #[arg(long, value_delimiter = ',', default_value = "256,1024,4096,16384")]
        shots: Vec<u64>,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 0.3)]
        phi: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Product-formula error norm against τ on the compact Hubbard dimer.
    TrotterError {
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        orders: Vec<u8>,
        #[arg(long, default_value_t = 0.35)]
        t: f64,
        #[arg(long, default_value_t = 0.2)]
        u: f64,
        #[arg(long, default_value_t = 1)]
        n: u64,
        #[arg(long, default_value_t = 0.01)]
        tau_min: f64,
        #[arg(long, default_value_t = 0.1)]
        tau_max: f64,
        #[arg(long, default_value_t = 8)]
        points: usize,
    },
}

enum Failure {
    Lab(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lab(e)
    }
}

fn run(config: &Path, jobs: Option<usize>, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Ok(s) = std::env::var("QPELAB_SEED") {
        cfg.seed = s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("QPELAB_SEED={s:?} is not an unsigned integer")))?;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be positive".into()).into());
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Failure::Io(e.to_string()))?;
    let record = pool.install(|| experiment::run_experiment(&cfg))?;
    let dir = out.unwrap_or_else(|| {
        let stem = config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        Path::new("out").join(stem)
    });
    experiment::write_outputs(&record, &dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    for (i, r) in record.runs.iter().enumerate() {
        println!(
            "run {i} [{}]: m = {:.6} ± {:.6}, eps_hat = {:.6} ± {:.6}, eps_hat_unshifted = {:.6}, chi2/ndf = {:.4}",
            r.initial_state, r.fit.m, r.fit.dm, r.fit.eps_hat, r.fit.d_eps, r.eps_hat_unshifted, r.fit.chi2_per_ndf
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn emit(table: &Table, out: Option<&Path>) -> Result<(), Failure> {
    let csv = table.to_csv()?;
    match out {
        Some(p) => std::fs::write(p, csv).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn analyze(table: Analysis, out: Option<&Path>) -> Result<(), Failure> {
    match table {
        Analysis::ErrorCurves { r_min, r_max, points } => emit(&experiment::analyze_error_curves(r_min, r_max, points)?, out),
        Analysis::Dispersion { r_min, r_max, shots, reps, phi, seed } => {
            let (t, slopes) = experiment::analyze_dispersion(r_min, r_max, &shots, reps, phi, seed)?;
            for (r, s) in slopes {
                eprintln!("R = {r}: log-log slope {s:.4}");
            }
            emit(&t, out)
        }
        Analysis::TrotterError { orders, t, u, n, tau_min, tau_max, points } => {
            if points < 2 || !(tau_min > 0.0) || !(tau_max > tau_min) {
                return Err(Error::Config("need points >= 2 and 0 < tau-min < tau-max".into()).into());
            }
            let ratio = (tau_max / tau_min).ln() / (points - 1) as f64;
            let taus: Vec<f64> = (0..points).map(|i| tau_min * (ratio * i as f64).exp()).collect();
            let (tab, slopes) = experiment::analyze_trotter_error(&orders, t, u, n, &taus)?;
            for (o, s) in slopes {
                eprintln!("order {o}: log-log slope {s:.4}");
            }
            emit(&tab, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, jobs, out } => run(&config, jobs, out),
        Command::Analyze { table, out } => analyze(table, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lab(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::InvalidArgument(_) => 2,
                Error::TooManyQubits { .. } => 3,
                _ => 1,
            })
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
