use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use pttk::io::{load, save, Artifact};
use pttk::metrics::relative_error;
use pttk::{global_offline, offline, OfflineOptions, RealMatrix};
use pttk_cli::experiment::Problem;
use pttk_cli::report::{to_csv, write_reports};
use pttk_cli::{run_experiment, ExperimentConfig, HarnessError, Mode};

const EXIT_UNCONVERGED: u8 = 2;
const EXIT_CONFIG: u8 = 3;

/// Parametric kernel-matrix compression with tensor trains.
#[derive(Parser)]
#[command(name = "pttk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the offline stage and write a PTTK1 file.
    Compress {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Tolerance; defaults to the first `eps` of the configuration.
        #[arg(long)]
        eps: Option<f64>,
        /// Override a configuration entry, e.g. `--set n_sources=100000`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Load a PTTK1 file and evaluate it at one parameter vector.
    Instantiate {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated parameter values.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        theta: String,
        /// Write the dense approximation as CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Configuration that produced the file; enables an error report on regenerated points.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Truncation tolerance of the compressed symmetric variant.
        #[arg(long)]
        compress: Option<f64>,
    },
    /// Run an experiment configuration and write CSV and JSON reports.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Report path prefix; overrides `output` of the configuration.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run per-sample ACA on an experiment configuration.
    BaselineAca {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_UNCONVERGED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                HarnessError::Config(_) => EXIT_CONFIG,
                _ => 1,
            })
        }
    }
}

fn env_seed() -> Result<Option<u64>, HarnessError> {
    match std::env::var("PTTK_SEED") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| HarnessError::Config(format!("PTTK_SEED `{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::parse_with_overrides(&text, overrides, env_seed()?)
}

/// Returns whether everything converged.
fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Compress { config, output, eps, overrides } => compress(&load_config(&config, &overrides)?, &output, eps),
        Command::Instantiate { input, theta, dump, config, overrides, compress } => {
            let cfg = config.map(|c| load_config(&c, &overrides)).transpose()?;
            instantiate(&input, &theta, dump.as_deref(), cfg.as_ref(), compress)
        }
        Command::Experiment { config, output, overrides } => {
            let mut cfg = load_config(&config, &overrides)?;
            if output.is_some() {
                cfg.output = output;
            }
            experiment(&cfg)
        }
        Command::BaselineAca { config, output, overrides } => {
            let mut cfg = load_config(&config, &overrides)?;
            cfg.mode = Mode::AcaBaseline;
            if output.is_some() {
                cfg.output = output;
            }
            experiment(&cfg)
        }
    }
}

fn experiment(cfg: &ExperimentConfig) -> Result<bool, HarnessError> {
    let mut cfg = cfg.clone();
    let out = cfg.output.take();
    let rows = run_experiment(&cfg)?;
    print!("{}", to_csv(&rows)?);
    if let Some(out) = out {
        cfg.output = Some(out.clone());
        let (csv, json) = write_reports(&out, &cfg, &rows)?;
        eprintln!("wrote {} and {}", csv.display(), json.display());
    }
    if let Some(bad) = rows.iter().find(|r| r.status.starts_with("error")) {
        return Err(HarnessError::Report(format!("tolerance {}: {}", bad.tol, bad.status)));
    }
    Ok(rows.iter().all(|r| r.is_converged()))
}

fn compress(cfg: &ExperimentConfig, output: &Path, eps: Option<f64>) -> Result<bool, HarnessError> {
    let eps = eps.unwrap_or(cfg.eps[0]);
    let problem = Problem::new(cfg)?;
    let opts = OfflineOptions { n: cfg.nodes, eps, seed: cfg.seed, max_sweeps: cfg.max_sweeps };
    let start = Instant::now();
    let artifact = match cfg.mode {
        Mode::Ttk | Mode::Pttk => Artifact::Parametric(offline(&problem.oracle, &problem.sources, &problem.targets, &opts)?),
        Mode::Global1 | Mode::Global2 => Artifact::Global(global_offline(&problem.oracle, &problem.sources, &opts, cfg.clip)?),
        Mode::AcaBaseline => return Err(HarnessError::Config("mode aca-baseline has no offline stage to save".into())),
    };
    let secs = start.elapsed().as_secs_f64();
    save(output, &artifact)?;
    let meta = match &artifact {
        Artifact::Parametric(f) => {
            println!("ranks {:?} storage {} reals", f.ranks(), f.storage());
            &f.meta
        }
        Artifact::Global(g) => {
            println!("basis rank {} storage {} reals", g.basis_rank(), g.storage());
            &g.meta
        }
        Artifact::Tt(_) => unreachable!("offline produces factorizations"),
    };
    println!(
        "offline {secs:.3} s, {} kernel evaluations, {} sweeps, sampled error {:.3e}{}",
        meta.evaluations,
        meta.sweeps,
        meta.sample_error,
        if meta.converged { "" } else { " (unconverged)" }
    );
    println!("wrote {}", output.display());
    Ok(meta.converged)
}

fn parse_theta(s: &str) -> Result<Vec<f64>, HarnessError> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().map_err(|_| HarnessError::Config(format!("theta entry `{v}` is not a number"))))
        .collect()
}

fn instantiate(input: &Path, theta: &str, dump: Option<&Path>, cfg: Option<&ExperimentConfig>, compress: Option<f64>) -> Result<bool, HarnessError> {
    let theta = parse_theta(theta)?;
    let artifact = load(input)?;
    let start = Instant::now();
    // `block(rows, cols)` evaluates part of the approximation.
    let (block, converged): (Box<dyn Fn(&[usize], &[usize]) -> pttk::Result<RealMatrix>>, bool) = match &artifact {
        Artifact::Parametric(f) => {
            let h = f.online(&theta)?;
            println!("H(theta) {}x{} in {:.3e} s", h.nrows(), h.ncols(), start.elapsed().as_secs_f64());
            let (s, t) = (f.s.clone(), f.t.clone());
            (Box::new(move |r, c| Ok(s.select_rows(r) * &h * t.select_rows(c).transpose())), f.meta.converged)
        }
        Artifact::Global(g) => {
            let inst = g.online(&theta, compress.unwrap_or(g.meta.eps), compress.is_some())?;
            println!(
                "rank {} in {:.3e} s, estimated relative error {:.3e}",
                inst.rank(),
                start.elapsed().as_secs_f64(),
                inst.relative_error
            );
            let converged = g.meta.converged;
            let g = g.clone();
            (Box::new(move |r, c| inst.evaluate(&g, r, c)), converged)
        }
        Artifact::Tt(_) => return Err(HarnessError::Config(format!("{} holds a bare tensor train, not a factorization", input.display()))),
    };
    let (ns, nt) = match &artifact {
        Artifact::Parametric(f) => (f.s.nrows(), f.t.nrows()),
        Artifact::Global(g) => (g.q.nrows(), g.q.nrows()),
        Artifact::Tt(_) => unreachable!(),
    };
    if let Some(path) = dump {
        let k = block(&(0..ns).collect::<Vec<_>>(), &(0..nt).collect::<Vec<_>>())?;
        let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Report(e.to_string()))?;
        for row in k.row_iter() {
            w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(|e| HarnessError::Report(e.to_string()))?;
        }
        w.flush()?;
        println!("wrote {}", path.display());
    }
    if let Some(cfg) = cfg {
        let problem = Problem::new(cfg)?;
        if (problem.sources.nrows(), problem.targets.nrows()) != (ns, nt) {
            return Err(HarnessError::Config(format!("the file holds {ns}x{nt} points, the configuration generates {}x{}", problem.sources.nrows(), problem.targets.nrows())));
        }
        let (rows, cols) = problem.error_indices(cfg, 0);
        let exact = problem.oracle.matrix(&problem.sources.select_rows(&rows), &problem.targets.select_rows(&cols), &theta)?;
        let approx = block(&rows, &cols)?;
        println!("relative {}-norm error {:.6e} on {}x{} entries", cfg.error_norm, relative_error(&exact, &approx, cfg.error_norm)?, rows.len(), cols.len());
    }
    Ok(converged)
}
