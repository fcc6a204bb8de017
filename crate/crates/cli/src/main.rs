use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use symtc::altmin::{SampleMode, UpdateOrder};
use symtc::harness::{
    config_header, convergence_run, max3lin_trials, phase_sweep, spectral_sweep, write_csv,
    ConvergenceConfig, PhaseSweepConfig, SpectralSweepConfig,
};
use symtc::max3lin::{
    brute_force_solutions, counterexample_report, generate_planted, propagation_connected, Propagation,
    solve_as_completion, Lin3SolveConfig, BRUTE_FORCE_LIMIT,
};
use symtc::pipeline::{complete, CompletionConfig};
use symtc::sampling::empirical_p;
use symtc::spectral::{loglog_slope, median};
use symtc::tensor::rmse;

/// Exit status for runs that finished without reaching their target.
const NOT_CONVERGED: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "symtc", version, about = "Low-rank symmetric tensor completion experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format for tabular results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Split,
    Reuse,
}

impl From<Mode> for SampleMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Split => SampleMode::Split,
            Mode::Reuse => SampleMode::Reuse,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Order {
    Batch,
    GaussSeidel,
}

impl From<Order> for UpdateOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::Batch => UpdateOrder::Batch,
            Order::GaussSeidel => UpdateOrder::GaussSeidel,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Lin3Mode {
    Solve,
    Audit,
    Counterexample,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Complete an observed tensor file and write the recovered model.
    Complete {
        /// Observed entries in `symtensor3` text format.
        tensor: PathBuf,
        #[arg(long, short)]
        rank: usize,
        /// Outer iterations.
        #[arg(long, default_value_t = 50)]
        tau: usize,
        /// Sampling probability (defaults to the observed fraction).
        #[arg(long)]
        p: Option<f64>,
        /// Incoherence cap for clipping the initial estimate.
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, value_enum, default_value_t = Mode::Reuse)]
        sample_mode: Mode,
        #[arg(long, value_enum, default_value_t = Order::Batch)]
        update_order: Order,
        /// Exit 0 only if the final fit error is at most this.
        #[arg(long, default_value_t = 1e-9)]
        fit_threshold: f64,
        /// Re-clip every iterate at `--mu`.
        #[arg(long)]
        reclip: bool,
        #[arg(long)]
        rtpm_trials: Option<usize>,
        #[arg(long)]
        rtpm_iters: Option<usize>,
        /// Ground-truth model JSON; adds rmse and d_infinity to the trace.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Where to write the convergence trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Recovery rate over a grid of (n, r, rho, alpha).
    Phase {
        #[arg(long = "n", value_delimiter = ',', default_values_t = [30, 50, 70])]
        n_list: Vec<usize>,
        #[arg(long = "r", value_delimiter = ',', default_values_t = [3])]
        r_list: Vec<usize>,
        #[arg(long = "rho", value_delimiter = ',', default_values_t = [0.0])]
        rho_list: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        alpha_min: f64,
        #[arg(long, default_value_t = 10.0)]
        alpha_max: f64,
        #[arg(long, default_value_t = 10)]
        alpha_steps: usize,
        #[arg(long, default_value_t = 40)]
        trials: usize,
        #[arg(long, default_value_t = 1e-7)]
        threshold: f64,
        #[arg(long, default_value_t = 300)]
        tau: usize,
        #[arg(long, value_enum, default_value_t = Mode::Reuse)]
        sample_mode: Mode,
        #[arg(long, value_enum, default_value_t = Order::GaussSeidel)]
        update_order: Order,
        /// Singular values of every truth (defaults to all ones).
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
    },
    /// Trace of a single run with the truth retained.
    Convergence {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        r: usize,
        #[arg(long, default_value_t = 12.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
        #[arg(long, default_value_t = 100)]
        tau: usize,
        #[arg(long, default_value_t = 1e-13)]
        fit_tolerance: f64,
        #[arg(long, default_value_t = 1e-7)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = Mode::Reuse)]
        sample_mode: Mode,
        #[arg(long, value_enum, default_value_t = Order::Batch)]
        update_order: Order,
        /// Start from the truth (debugging: the trace should be all zeros).
        #[arg(long)]
        init_truth: bool,
    },
    /// Centered-norm ratio of the sampled tensor over an alpha grid.
    Spectral {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [16.0, 64.0, 256.0])]
        alphas: Vec<f64>,
        /// Independent instances per alpha.
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 30)]
        iters: usize,
    },
    /// Planted MAX-3LIN solved as rank-1 completion.
    Max3lin {
        #[arg(long, value_enum, default_value_t = Lin3Mode::Solve)]
        mode: Lin3Mode,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Equation probability; overrides `--alpha`.
        #[arg(long)]
        p: Option<f64>,
        /// Sets `p = alpha ln n / n^{3/2}`.
        #[arg(long, default_value_t = 40.0)]
        alpha: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 50)]
        tau: usize,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_rows<T: serde::Serialize, C: serde::Serialize>(
    common: &Common,
    config: &C,
    rows: &[T],
) -> Result<()> {
    let mut w = output(&common.out)?;
    match common.format {
        Format::Csv => write_csv(&mut w, Some(&config_header(config)?), rows)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &json!({ "config": config, "rows": rows }))?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    let common = &cli.common;
    if let Some(t) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Complete {
            tensor,
            rank,
            tau,
            p,
            mu,
            sample_mode,
            update_order,
            fit_threshold,
            reclip,
            rtpm_trials,
            rtpm_iters,
            truth,
            trace,
        } => {
            let omega = symtc::io::load_tensor(&tensor)
                .with_context(|| format!("reading {}", tensor.display()))?;
            if omega.is_empty() {
                bail!("{} has no observed entries", tensor.display());
            }
            let truth = truth
                .map(|t| symtc::io::load_model(&t).with_context(|| format!("reading {}", t.display())))
                .transpose()?;
            let mut cfg = CompletionConfig::new(rank, p.unwrap_or_else(|| empirical_p(&omega)), common.seed);
            cfg.outer_iters = tau;
            cfg.mu = mu;
            cfg.sample_mode = sample_mode.into();
            cfg.update_order = update_order.into();
            cfg.fit_tolerance = fit_threshold;
            cfg.reclip = reclip;
            cfg.rtpm_trials = rtpm_trials;
            cfg.rtpm_iters = rtpm_iters;
            eprintln!("{}", config_header(&cfg)?);
            let res = complete(&omega, &cfg, truth.as_ref())?;
            let mut w = output(&common.out)?;
            serde_json::to_writer_pretty(&mut w, &res.model)?;
            writeln!(w)?;
            w.flush()?;
            if let Some(path) = trace {
                let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                symtc::io::write_trace_csv(BufWriter::new(f), &res.trace)?;
            }
            let fit = res.trace.final_fit_error().unwrap_or(f64::INFINITY);
            match &truth {
                Some(t) => eprintln!("fit_error {fit:e} rmse {:e}", rmse(&res.model, t)?),
                None => eprintln!("fit_error {fit:e}"),
            }
            Ok(if fit <= fit_threshold { 0 } else { NOT_CONVERGED })
        }
        Command::Phase {
            n_list,
            r_list,
            rho_list,
            alpha_min,
            alpha_max,
            alpha_steps,
            trials,
            threshold,
            tau,
            sample_mode,
            update_order,
            sigmas,
        } => {
            let cfg = PhaseSweepConfig {
                n_list,
                r_list,
                rho_list,
                alpha_min,
                alpha_max,
                alpha_steps,
                trials,
                threshold,
                seed: common.seed,
                sample_mode: sample_mode.into(),
                update_order: update_order.into(),
                outer_iters: tau,
                sigmas,
            };
            let rows = phase_sweep(&cfg)?;
            for row in rows.iter().filter(|r| r.clamped) {
                eprintln!("note: p clamped to 1 at n={} r={} rho={} alpha={}", row.n, row.r, row.rho, row.alpha);
            }
            emit_rows(common, &cfg, &rows)?;
            Ok(0)
        }
        Command::Convergence {
            n,
            r,
            alpha,
            rho,
            tau,
            fit_tolerance,
            threshold,
            sample_mode,
            update_order,
            init_truth,
        } => {
            let mut cfg = ConvergenceConfig::new(n, r, alpha, common.seed);
            cfg.rho = rho;
            cfg.threshold = threshold;
            cfg.init_from_truth = init_truth;
            cfg.settings.outer_iters = tau;
            cfg.settings.fit_tolerance = fit_tolerance;
            cfg.settings.sample_mode = sample_mode.into();
            cfg.settings.update_order = update_order.into();
            let run = convergence_run(&cfg)?;
            emit_rows(common, &cfg, &run.trace.rows)?;
            Ok(if run.recovered { 0 } else { NOT_CONVERGED })
        }
        Command::Spectral { n, r, alphas, seeds, restarts, iters } => {
            let cfg = SpectralSweepConfig { n, r, alphas, seeds, restarts, iters, seed: common.seed };
            let rows = spectral_sweep(&cfg)?;
            let medians: Vec<f64> = cfg
                .alphas
                .iter()
                .map(|&a| {
                    let v: Vec<f64> = rows.iter().filter(|x| x.alpha == a).map(|x| x.ratio).collect();
                    median(&v)
                })
                .collect();
            if let Ok(slope) = loglog_slope(&cfg.alphas, &medians) {
                eprintln!("log-log slope of median ratio vs alpha: {slope:.3}");
            }
            emit_rows(common, &cfg, &rows)?;
            Ok(0)
        }
        Command::Max3lin { mode, n, p, alpha, trials, tau } => {
            let p = p.unwrap_or_else(|| (alpha * (n as f64).ln() / (n as f64).powf(1.5)).min(1.0));
            let config = json!({ "mode": format!("{mode:?}").to_lowercase(), "n": n, "p": p,
                                 "trials": trials, "tau": tau, "seed": common.seed });
            let report = match mode {
                Lin3Mode::Counterexample => serde_json::to_value(counterexample_report()?)?,
                Lin3Mode::Solve => {
                    let rows = max3lin_trials(n, p, trials, common.seed, tau)?;
                    let ok = rows.iter().filter(|r| r.success).count();
                    json!({ "config": config, "success_rate": ok as f64 / rows.len().max(1) as f64, "rows": rows })
                }
                Lin3Mode::Audit => {
                    let inst = generate_planted(n, p, common.seed)?;
                    let connectivity = if inst.is_empty() {
                        serde_json::Value::Null
                    } else {
                        // One-based, like the counterexample report.
                        let prop = match propagation_connected(&inst)? {
                            Propagation::Connected(seq) => {
                                Propagation::Connected(seq.into_iter().map(|e| e.map(|v| v + 1)).collect())
                            }
                            other => other,
                        };
                        serde_json::to_value(prop)?
                    };
                    let solutions = (n <= BRUTE_FORCE_LIMIT)
                        .then(|| brute_force_solutions(&inst))
                        .transpose()?;
                    let solved = if inst.is_empty() {
                        serde_json::Value::Null
                    } else {
                        let mut cfg = Lin3SolveConfig::new(common.seed);
                        cfg.outer_iters = tau;
                        serde_json::to_value(solve_as_completion(&inst, &cfg)?)?
                    };
                    json!({
                        "config": config,
                        "equations": inst.len(),
                        "propagation": connectivity,
                        "solution_count": solutions.as_ref().map(Vec::len),
                        "planted_is_solution": solutions.as_ref()
                            .map(|s| inst.planted.as_ref().is_some_and(|x| s.contains(x))),
                        "solve": solved,
                    })
                }
            };
            let mut w = output(&common.out)?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
