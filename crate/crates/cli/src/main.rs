use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cellsearch::montecarlo::SearchMode;
use cellsearch_cli::{
    apply_overrides, cmd_analytic, cmd_figures, cmd_optimize, cmd_simulate, load_config,
    Overrides,
};

/// Analytic and Monte Carlo evaluation of initial cell-search latency and
/// detection failure in directional mmWave networks.
#[derive(Parser)]
#[command(name = "cellsearch", version, about)]
struct Cli {
    /// TOML configuration file; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// BS density in BS per square meter.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Number of BS beam sectors.
    #[arg(long, global = true)]
    n_bs: Option<u32>,
    /// Number of UE beam sectors.
    #[arg(long, global = true)]
    n_ue: Option<u32>,
    /// SINR detection threshold, linear.
    #[arg(long = "t", global = true)]
    sinr_threshold: Option<f64>,
    /// Mini-slot budget for random beamforming.
    #[arg(long, global = true)]
    n_c: Option<u32>,
    /// Scan cycles when the budget follows the sector count.
    #[arg(long, global = true)]
    k: Option<u32>,
    /// Master seed for Monte Carlo commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per sweep point.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative tolerance override for the quadrature.
    #[arg(long, global = true)]
    quad_rel_tol: Option<f64>,
    /// Monte Carlo worker threads (0 = all cores; never affects results).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Search scheme: random-beamforming or exhaustive.
    #[arg(long, global = true, value_parser = parse_scheme)]
    scheme: Option<SearchMode>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed forms and quadrature across a sweep.
    Analytic,
    /// Run Monte Carlo trials with analytic columns alongside.
    Simulate,
    /// Pick the BS sector count minimizing latency under a failure cap.
    Optimize {
        /// Failure-probability cap.
        #[arg(long)]
        p_f_max: Option<f64>,
        #[arg(long)]
        n_bs_min: Option<u32>,
        #[arg(long)]
        n_bs_max: Option<u32>,
        /// Enable the joint grid over UE sectors (needs both bounds).
        #[arg(long)]
        n_ue_min: Option<u32>,
        #[arg(long)]
        n_ue_max: Option<u32>,
    },
    /// Write the reference trade-off curves as CSV files.
    Figures,
}

fn parse_scheme(s: &str) -> Result<SearchMode, String> {
    match s {
        "random-beamforming" | "rb" => Ok(SearchMode::RandomBeamforming),
        "exhaustive" | "eh" => Ok(SearchMode::Exhaustive),
        other => Err(format!(
            "unknown scheme `{other}` (expected random-beamforming or exhaustive)"
        )),
    }
}

fn main() -> ExitCode {
    // Argument mistakes are configuration errors (exit 1); clap's default
    // exit code of 2 is reserved for numerical failures here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let overrides = Overrides {
        lambda: cli.lambda,
        n_bs: cli.n_bs,
        n_ue: cli.n_ue,
        sinr_threshold: cli.sinr_threshold,
        n_c: cli.n_c,
        k: cli.k,
        seed: cli.seed,
        trials: cli.trials,
        out: cli.out,
        quad_rel_tol: cli.quad_rel_tol,
        workers: cli.workers,
        scheme: cli.scheme,
    };

    let result = load_config(cli.config.as_deref()).and_then(|mut cfg| {
        apply_overrides(&mut cfg, &overrides);
        match &cli.command {
            Command::Analytic => cmd_analytic(&cfg),
            Command::Simulate => cmd_simulate(&cfg),
            Command::Optimize {
                p_f_max,
                n_bs_min,
                n_bs_max,
                n_ue_min,
                n_ue_max,
            } => {
                if let Some(v) = p_f_max {
                    cfg.optimize.p_f_max = *v;
                }
                if let Some(v) = n_bs_min {
                    cfg.optimize.n_bs_min = *v;
                }
                if let Some(v) = n_bs_max {
                    cfg.optimize.n_bs_max = *v;
                }
                if let Some(v) = n_ue_min {
                    cfg.optimize.n_ue_min = Some(*v);
                }
                if let Some(v) = n_ue_max {
                    cfg.optimize.n_ue_max = Some(*v);
                }
                cmd_optimize(&cfg)
            }
            Command::Figures => cmd_figures(&cfg),
        }
    });

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
