//! `stiefel-bench`: LEV, PRW, ODE self-check and metric/mode sweep runs with
//! CSV traces.
//!
//! Settings come from an optional flat `key = value` file (`--config`), and
//! any flag given on the command line overrides the file. Exit codes: 0 ok,
//! 2 config error, 3 numeric failure, 4 I/O.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CliError, Settings};

#[derive(Parser, Debug)]
#[command(name = "stiefel-bench", version, about = "Benchmarks for momentum optimizers on the Stiefel manifold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Leading-eigenvector problem: trace, oracle gap, optional timing sweep.
    Lev(LevArgs),
    /// Projection robust Wasserstein run on synthetic or file-loaded clouds.
    Prw(PrwArgs),
    /// Invariant checks of the continuous dynamics and the integrator order.
    OdeCheck(OdeArgs),
    /// LEV over a grid of metric parameters and rotation-map modes.
    Sweep(SweepArgs),
}

/// Flags shared by the optimizer-driven subcommands.
#[derive(Args, Debug)]
struct OptimizerArgs {
    /// Flat `key = value` settings file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["sgd", "adam", "son-sgd", "son-adam", "cayley-gd"])]
    opt: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Metric parameter, `a < 1`; 0 is Euclidean, 0.5 canonical.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, value_parser = ["euler", "cayley", "expm"])]
    phi1: Option<String>,
    #[arg(long, value_parser = ["euler", "cayley", "exact"])]
    phi2: Option<String>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    trace_every: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LevArgs {
    #[command(flatten)]
    common: OptimizerArgs,
    /// Comma-separated sizes; switches to timing mode at fixed m.
    #[arg(long)]
    timing_ns: Option<String>,
}

#[derive(Args, Debug)]
struct PrwArgs {
    #[command(flatten)]
    common: OptimizerArgs,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Points per cloud for the synthetic instance.
    #[arg(long)]
    points: Option<usize>,
    /// Entropic regularisation.
    #[arg(long)]
    reg: Option<f64>,
    #[arg(long)]
    x_file: Option<PathBuf>,
    #[arg(long)]
    y_file: Option<PathBuf>,
    #[arg(long)]
    r_file: Option<PathBuf>,
    #[arg(long)]
    c_file: Option<PathBuf>,
    #[arg(long)]
    inner_steps: Option<usize>,
    #[arg(long)]
    sinkhorn_tol: Option<f64>,
    #[arg(long)]
    sinkhorn_max_iter: Option<usize>,
}

#[derive(Args, Debug)]
struct OdeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Comma-separated friction values, each > 0.
    #[arg(long, allow_hyphen_values = true)]
    gammas: Option<String>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: OptimizerArgs,
    /// Comma-separated metric parameters.
    #[arg(long, allow_hyphen_values = true)]
    a_values: Option<String>,
    /// Comma-separated rotation-map modes.
    #[arg(long)]
    phi1_modes: Option<String>,
    /// Gap threshold for the iterations-to-tolerance column.
    #[arg(long)]
    tol: Option<f64>,
}

fn load(config: &Option<PathBuf>) -> Result<Settings, CliError> {
    match config {
        Some(path) => Settings::from_file(path),
        None => Ok(Settings::default()),
    }
}

fn display(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

impl OptimizerArgs {
    fn settings(&self) -> Result<Settings, CliError> {
        let mut s = load(&self.config)?;
        s.set_opt("n", &self.n);
        s.set_opt("m", &self.m);
        s.set_opt("seed", &self.seed);
        s.set_opt("opt", &self.opt);
        s.set_opt("eta", &self.eta);
        s.set_opt("mu", &self.mu);
        s.set_opt("beta1", &self.beta1);
        s.set_opt("beta2", &self.beta2);
        s.set_opt("eps", &self.eps);
        s.set_opt("a", &self.a);
        s.set_opt("phi1", &self.phi1);
        s.set_opt("phi2", &self.phi2);
        s.set_opt("iters", &self.iters);
        s.set_opt("trace-every", &self.trace_every);
        s.set_opt("out", &display(&self.out));
        Ok(s)
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Lev(args) => {
            let mut s = args.common.settings()?;
            s.set_opt("timing-ns", &args.timing_ns);
            commands::cmd_lev(&s)
        }
        Command::Prw(args) => {
            let mut s = args.common.settings()?;
            s.set_opt("d", &args.d);
            s.set_opt("k", &args.k);
            s.set_opt("points", &args.points);
            s.set_opt("reg", &args.reg);
            s.set_opt("x-file", &display(&args.x_file));
            s.set_opt("y-file", &display(&args.y_file));
            s.set_opt("r-file", &display(&args.r_file));
            s.set_opt("c-file", &display(&args.c_file));
            s.set_opt("inner-steps", &args.inner_steps);
            s.set_opt("sinkhorn-tol", &args.sinkhorn_tol);
            s.set_opt("sinkhorn-max-iter", &args.sinkhorn_max_iter);
            commands::cmd_prw(&s)
        }
        Command::OdeCheck(args) => {
            let mut s = load(&args.config)?;
            s.set_opt("n", &args.n);
            s.set_opt("m", &args.m);
            s.set_opt("seed", &args.seed);
            s.set_opt("a", &args.a);
            s.set_opt("gammas", &args.gammas);
            s.set_opt("t-end", &args.t_end);
            s.set_opt("dt", &args.dt);
            s.set_opt("tol", &args.tol);
            commands::cmd_ode_check(&s)
        }
        Command::Sweep(args) => {
            let mut s = args.common.settings()?;
            s.set_opt("a-values", &args.a_values);
            s.set_opt("phi1-modes", &args.phi1_modes);
            s.set_opt("tol", &args.tol);
            commands::cmd_sweep(&s)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stiefel-bench: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
