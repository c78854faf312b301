//! Command-line front end.
//!
//! Every subcommand writes its files under `--out` and prints a JSON summary
//! on stdout. Failures print one JSON error record on stderr and exit with
//! status 1 (2 for usage errors).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use cogpower::channel::read_gains_csv;
use cogpower::config::load_scenario;
use cogpower::experiments::{
    self, build_game, fading_seed, load_sweep, reproduce_figure, run_sweep, termination_for, write_sweep_csv, ChannelMode,
    EvalOptions, Figure,
};
use cogpower::game::{PowerProfile, SampledGame};
use cogpower::learning::{run_with, Mode, RunOptions};
use cogpower::metrics;
use cogpower::oracle;
use cogpower::prelude::*;

#[derive(Parser, Debug)]
#[command(name = "cogpower", version, about = "Priced multi-carrier power allocation: learning, oracles and sweeps")]
struct Cli {
    /// Scenario TOML (default: the built-in 10-user, 10-subcarrier scenario).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario or sweep seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Size factor for figure presets: K = S = round(10 f), round(30 f²) replications.
    #[arg(long, global = true, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Static)]
    mode: ModeArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Static,
    Ergodic,
}

impl From<ModeArg> for ChannelMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Static => ChannelMode::Static,
            ModeArg::Ergodic => ChannelMode::Ergodic,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Runs exponential learning on one scenario.
    Run,
    /// Runs a sweep described by a TOML file with a `[sweep]` table.
    Sweep {
        spec: PathBuf,
    },
    /// Certifies the scenario's equilibrium, or a given power profile. In
    /// ergodic mode, maximises the sampled ergodic potential instead.
    Oracle {
        /// K×S power matrix in CSV (one row per user, Watt).
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Regenerates the data behind a figure (fig1 … fig9).
    Reproduce {
        figure: String,
    },
    /// Compares the learned allocation with uniform full-power allocation.
    Baseline,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": msg.trim() } }));
            return ExitCode::from(2);
        }
    };
    match dispatch(&cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            ExitCode::FAILURE
        }
    }
}

fn scenario(cli: &Cli) -> Result<NetworkConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_scenario(&fs::read_to_string(path)?)?,
        None => NetworkConfig::default_scenario(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> Result<&Path> {
    fs::create_dir_all(&cli.out)?;
    Ok(&cli.out)
}

fn dispatch(cli: &Cli) -> Result<serde_json::Value> {
    match &cli.command {
        Command::Run => cmd_run(cli),
        Command::Sweep { spec } => cmd_sweep(cli, spec),
        Command::Oracle { profile } => cmd_oracle(cli, profile.as_deref()),
        Command::Reproduce { figure } => {
            let figure: Figure = figure.parse()?;
            let files = reproduce_figure(figure, cli.seed.unwrap_or(42), cli.scale, &cli.out)?;
            Ok(json!({ "figure": figure.to_string(), "files": files }))
        }
        Command::Baseline => cmd_baseline(cli),
    }
}

fn cmd_run(cli: &Cli) -> Result<serde_json::Value> {
    let cfg = scenario(cli)?;
    let mode = ChannelMode::from(cli.mode);
    let game = build_game(&cfg, mode)?;
    let run_mode = match mode {
        ChannelMode::Static => Mode::Static,
        ChannelMode::Ergodic => Mode::Ergodic(FadingProcess::new(game.gains().clone(), game.pu_gain(), fading_seed(&cfg))?),
    };
    let options = RunOptions {
        log_stride: cfg.run.log_stride,
        ..Default::default()
    };
    let record = run_with(&game, &cfg.run.schedule, &termination_for(&cfg, false), run_mode, options)?;
    let dir = out_dir(cli)?;
    let trajectory = dir.join("trajectory.csv");
    record.write_csv(game.i_max(), fs::File::create(&trajectory)?)?;
    let report = metrics::report(&game, record.final_powers());
    let gap = match mode {
        ChannelMode::Static => Some(oracle::best_response_gap(&game, record.final_powers())?),
        ChannelMode::Ergodic => None,
    };
    let summary = json!({
        "reason": record.reason,
        "iterations": record.iterations,
        "converged_at": record.converged_at,
        "stc_switch": record.stc_switch,
        "metrics": report,
        "best_response_gap": gap,
        "final_powers": record.final_powers().as_array().rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
        "files": [trajectory],
    });
    fs::write(dir.join("run.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

fn cmd_sweep(cli: &Cli, spec_path: &Path) -> Result<serde_json::Value> {
    let mut spec = load_sweep(&fs::read_to_string(spec_path)?)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if matches!(cli.mode, ModeArg::Ergodic) {
        spec.mode = ChannelMode::Ergodic;
    }
    let rows = run_sweep(&spec)?;
    let dir = out_dir(cli)?;
    let path = dir.join("sweep.csv");
    write_sweep_csv(spec.parameter, &rows, fs::File::create(&path)?)?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    Ok(json!({ "rows": rows.len(), "failed": failed, "files": [path] }))
}

fn cmd_oracle(cli: &Cli, profile: Option<&Path>) -> Result<serde_json::Value> {
    let cfg = scenario(cli)?;
    let game = Game::from_config(&cfg)?;
    let dir = out_dir(cli)?;
    let summary = match profile {
        Some(path) => {
            let p = PowerProfile::new(read_gains_csv(fs::File::open(path)?)?, game.max_power())?;
            let gaps = oracle::best_response_gap(&game, &p)?;
            json!({
                "potential": game.potential(&p),
                "best_response_gap": gaps,
                "kkt_residual": oracle::kkt_residual(&game, &p),
            })
        }
        None if matches!(cli.mode, ModeArg::Ergodic) => {
            let mean = build_game(&cfg, ChannelMode::Ergodic)?;
            let mut fading = FadingProcess::new(mean.gains().clone(), mean.pu_gain(), fading_seed(&cfg))?;
            let sampled = SampledGame::draw(mean, &mut fading, experiments::ERGODIC_SAMPLES)?;
            // Every user on the first subcarrier: a cheap, low reference point.
            let crowded = oracle::vertex_profile(sampled.game(), &vec![1; cfg.num_users]);
            let tol = experiments::ergodic_tolerance(&sampled, sampled.potential(&crowded));
            let best = oracle::maximize_ergodic_potential(&sampled, tol)?;
            json!({ "maximum": best, "tolerance": tol })
        }
        None => {
            let cert = maximize_potential(&game, oracle::DEFAULT_TOL)?;
            serde_json::to_value(&cert)?
        }
    };
    fs::write(dir.join("oracle.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

fn cmd_baseline(cli: &Cli) -> Result<serde_json::Value> {
    let cfg = scenario(cli)?;
    let mode = ChannelMode::from(cli.mode);
    let opts = EvalOptions {
        mode,
        ..Default::default()
    };
    let summary = experiments::evaluate(&cfg, opts)?;
    let game = build_game(&cfg, mode)?;
    let (_, uniform) = uniform_baseline(&game);
    let dir = out_dir(cli)?;
    let path = dir.join("baseline.csv");
    let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
    w.write_record(["policy", "sum_rate_bits", "pu_rate", "revenue", "mean_psi", "total_power"])?;
    w.write_record([
        "proposed".to_string(),
        summary.sum_rate_bits.to_string(),
        summary.pu_rate.to_string(),
        summary.revenue.to_string(),
        summary.mean_psi.to_string(),
        summary.total_power.to_string(),
    ])?;
    w.write_record([
        "uniform".to_string(),
        uniform.sum_rate_bits.to_string(),
        uniform.pu_rate.to_string(),
        uniform.revenue.to_string(),
        uniform.mean_psi.to_string(),
        uniform.total_power.to_string(),
    ])?;
    w.flush()?;
    let ratio = if uniform.revenue > 0.0 {
        Some(summary.revenue / uniform.revenue)
    } else {
        None
    };
    Ok(json!({ "proposed": summary, "uniform": uniform, "revenue_ratio": ratio, "files": [path] }))
}
