use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hybrid_owc::balancer::{distributed_lagrangian, export_trace, RateMatrix};
use hybrid_owc::downlink::{BiaSchedule, Scheme};
use hybrid_owc::harness::{
    build_drop, emit_cdf, emit_results, run_cdf_experiment, run_sum_rate_sweep, solve_drop, ExperimentSpec,
    Format, Mode,
};
use hybrid_owc::optics::channel_matrix;
use hybrid_owc::scenario::{build_grid_scenario, ScenarioConfig};
use hybrid_owc::{Error, Result};

#[derive(Parser)]
#[command(name = "hybrid-owc", version, about = "Hybrid optical wireless / WiFi network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean sum rate over a grid of user counts and beam waists.
    Sweep(ExperimentArgs),
    /// Empirical CDF of the per-drop sum rate.
    Cdf(ExperimentArgs),
    /// Per-user channel matrices of one drop.
    ChannelDump(DropArgs),
    /// Load-balance a single drop and report the association.
    Solve(SolveArgs),
    /// Build and self-check a BIA supersymbol.
    VerifyBia(BiaArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Scenario JSON; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "bia")]
    scheme: Vec<Scheme>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "hybrid")]
    mode: Vec<Mode>,
    /// Comma-separated user counts.
    #[arg(long, value_delimiter = ',')]
    users: Vec<usize>,
    /// Comma-separated beam waists in micrometres.
    #[arg(long = "waist-um", value_delimiter = ',')]
    waist_um: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    drops: usize,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct DropArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    drop: DropArgs,
    #[arg(long, value_enum, default_value = "bia")]
    scheme: Scheme,
    #[arg(long, value_enum, default_value = "hybrid")]
    mode: Mode,
    /// Also write the solver trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BiaArgs {
    /// Number of transmitters L.
    #[arg(long, default_value_t = 4)]
    aps: usize,
    /// Number of users K.
    #[arg(long, default_value_t = 3)]
    users: usize,
    /// Write the slot table here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = match path {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io { path: p.to_owned(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn specs(args: &ExperimentArgs) -> Result<Vec<ExperimentSpec>> {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let mut out = Vec::new();
    for &scheme in &args.scheme {
        for &mode in &args.mode {
            let mut spec = ExperimentSpec::new(cfg.clone(), scheme, mode);
            if !args.users.is_empty() {
                spec.users = args.users.clone();
            }
            if !args.waist_um.is_empty() {
                spec.waists_um = args.waist_um.clone();
            }
            spec.drops = args.drops;
            spec.validate()?;
            out.push(spec);
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct SolveReport {
    scheme: Scheme,
    mode: Mode,
    seed: u64,
    rates_bps: Vec<Vec<f64>>,
    association: Vec<Option<usize>>,
    wifi_column: usize,
    utility: Option<f64>,
    converged: Option<bool>,
    iterations: usize,
    sum_rate_bps: f64,
    status: String,
}

fn solve(args: &SolveArgs) -> Result<()> {
    let cfg = load_config(args.drop.config.as_deref(), args.drop.seed)?;
    let instance = build_drop(&cfg, args.scheme, args.mode)?;
    let (sum_rate_bps, status) = solve_drop(&instance, &Default::default())?;
    let r = &instance.rates;
    let served: Vec<usize> = (0..r.nrows()).filter(|&k| r.row(k).iter().any(|&v| v > 0.0)).collect();
    let mut association = vec![None; r.nrows()];
    let (mut utility, mut converged, mut iterations) = (None, None, 0);
    if !served.is_empty() {
        let sub = RateMatrix::new(nalgebra::DMatrix::from_fn(served.len(), r.ncols(), |i, j| r[(served[i], j)]))?;
        let out = distributed_lagrangian(&sub, &Default::default())?;
        for (i, &k) in served.iter().enumerate() {
            association[k] = Some(out.assignment.choice[i]);
        }
        if let Some(path) = &args.trace {
            export_trace(&out.trace, path)?;
        }
        utility = Some(out.utility);
        converged = Some(out.converged);
        iterations = out.iterations;
    }
    let report = SolveReport {
        scheme: args.scheme,
        mode: args.mode,
        seed: cfg.seed,
        rates_bps: r.row_iter().map(|row| row.iter().copied().collect()).collect(),
        association,
        wifi_column: r.ncols() - 1,
        utility,
        converged,
        iterations,
        sum_rate_bps,
        status,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_text(args.drop.out.as_deref(), &text)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep(args) => {
            let mut rows = Vec::new();
            for spec in specs(&args)? {
                rows.extend(run_sum_rate_sweep(&spec)?);
            }
            emit_results(&rows, args.format, &args.out)
        }
        Command::Cdf(args) => {
            let mut series = Vec::new();
            for spec in specs(&args)? {
                series.extend(run_cdf_experiment(&spec)?);
            }
            emit_cdf(&series, args.format, &args.out)
        }
        Command::ChannelDump(args) => {
            let cfg = load_config(args.config.as_deref(), args.seed)?;
            let s = build_grid_scenario(&cfg)?;
            let mut text = String::new();
            for u in &s.users {
                let h = channel_matrix(u, &s.optical_aps)?;
                text.push_str(&format!(
                    "# user {} at ({:.4}, {:.4}, {:.4})\n",
                    u.id, u.position.x, u.position.y, u.position.z
                ));
                text.push_str(&h.to_csv());
            }
            write_text(args.out.as_deref(), &text)
        }
        Command::Solve(args) => solve(&args),
        Command::VerifyBia(args) => {
            let schedule = BiaSchedule::new(args.aps, args.users)?;
            schedule.verify().map_err(Error::Infeasible)?;
            if let Some(path) = &args.out {
                write_text(Some(path), &schedule.to_table())?;
            }
            let mut stdout = std::io::stdout();
            let _ = writeln!(
                stdout,
                "L={} K={}: {} slots ({} + {}), {} alignment blocks per user, e = {}",
                args.aps,
                args.users,
                schedule.len(),
                schedule.block1_len(),
                schedule.block2_len(),
                schedule.alignment_blocks_per_user(),
                schedule.resource_fraction()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
