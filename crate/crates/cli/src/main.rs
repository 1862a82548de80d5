//! `flumech`: parameter sweeps over the device models, written as CSV
//! tables plus a JSON manifest.

mod commands;
mod config;
mod error;
mod output;
mod sweep;

use std::fs;
use std::path::PathBuf;
use std::sync::atomic::AtomicBool;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{Command, RunConfig};
use error::CliError;
use output::{Header, Row, TableSpec};

const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "flumech", version, about = "Sweeps over cavity-transmon-mechanics models")]
struct Cli {
    #[command(subcommand)]
    sub: Sub,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; overrides the config.
    #[arg(long, global = true, env = "FLUMECH_WORKERS")]
    workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true, env = "FLUMECH_OUT_DIR")]
    out: Option<PathBuf>,
    /// Continue from the checkpoint in the output directory.
    #[arg(long, global = true)]
    resume: bool,
    /// Seed for Monte-Carlo fits; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Stop at the first checkpoint with at least this many points done.
    #[arg(long, global = true, hide = true)]
    stop_after: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Transition frequencies and Lindblad |S21| against flux.
    Spectrum,
    /// Optomechanical damping and frequency shift on a drive × detuning grid.
    Backaction,
    /// Detunings where the mechanical damping changes sign.
    InstabilityMap,
    /// Monte-Carlo round trip of the absorption line fit.
    Ceqa,
    /// Fit a measured absorption trace.
    Fit,
    /// Fixed points and their stability for the three-mode model.
    FixedPoints,
    /// Instability map of the driven polariton transitions.
    PolaritonMap,
    /// Time-domain runs with comb detection.
    Timedomain,
    /// Stark, gain, thermometry and reflection calibrations.
    Calibrate,
    /// Run whatever command the config names.
    Sweep,
}

impl Sub {
    fn command(self) -> Option<Command> {
        Some(match self {
            Sub::Spectrum => Command::Spectrum,
            Sub::Backaction => Command::Backaction,
            Sub::InstabilityMap => Command::InstabilityMap,
            Sub::Ceqa => Command::Ceqa,
            Sub::Fit => Command::Fit,
            Sub::FixedPoints => Command::FixedPoints,
            Sub::PolaritonMap => Command::PolaritonMap,
            Sub::Timedomain => Command::Timedomain,
            Sub::Calibrate => Command::Calibrate,
            Sub::Sweep => return None,
        })
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => println!("{report}"),
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::config("--config", "a config file is required"))?;
    let mut cfg = RunConfig::load(path)?;
    let cmd = cfg.resolve_command(cli.sub.command())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = Some(o.clone());
    }
    cfg.validate(cmd)?;
    let hash = cfg.config_hash(cmd)?;
    let job = commands::build(&cfg, cmd)?;

    let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).map_err(|e| CliError::config("out_dir", format!("{}: {e}", out.display())))?;
    let probe = out.join(".write-test");
    fs::write(&probe, b"").and_then(|_| fs::remove_file(&probe)).map_err(|e| CliError::config("out_dir", format!("{} is not writable: {e}", out.display())))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(1))
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let opts = sweep::SweepOptions { checkpoint_every: cfg.checkpoint_every, resume: cli.resume, stop_after: cli.stop_after };
    let cancel = AtomicBool::new(false);
    let results = pool.install(|| sweep::run(job.as_ref(), &out, &hash, &opts, &cancel))?;

    // Single writer: tables are assembled in point order.
    let specs = job.tables();
    let mut tables: Vec<(TableSpec, Vec<Row>)> = specs.into_iter().map(|s| (s, Vec::new())).collect();
    let mut holes = Vec::new();
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok(rows) => {
                for (t, rs) in tables.iter_mut().zip(rows) {
                    t.1.extend(rs.iter().cloned());
                }
            }
            Err(msg) => holes.push(vec![i.to_string(), job.describe(i), msg.clone()]),
        }
    }
    tables.extend(job.finalize(&results));
    tables.push((TableSpec::new("holes", &["index", "point", "message"]), holes.clone()));

    let header = Header { command: cmd.name(), config_hash: &hash, code_version: CODE_VERSION };
    let mut files = Vec::new();
    for (spec, rows) in &tables {
        files.push(output::write_table(&out, spec, rows, &header)?);
        if cfg.plot {
            if let Some(svg) = output::heat_map_svg(spec, rows) {
                output::write_atomic(&out.join(format!("{}.svg", spec.name)), svg.as_bytes())?;
            }
        }
    }
    let total = results.len();
    let over_budget = holes.len() as f64 > cfg.failure_budget * total as f64;
    let manifest = json!({
        "code_version": CODE_VERSION,
        "command": cmd.name(),
        "config_hash": hash,
        "config": cfg,
        "numerics": cfg.numerics_view(cmd)?,
        "points": total,
        "holes": holes.len(),
        "status": if over_budget { "failure_budget_exceeded" } else { "ok" },
        "files": files,
        "summary": job.summary(&results),
    });
    output::write_atomic(&out.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("json").as_bytes())?;
    let _ = fs::remove_dir_all(sweep::checkpoint_dir(&out));
    if over_budget {
        return Err(CliError::Budget { failed: holes.len(), total, budget: cfg.failure_budget });
    }
    Ok(json!({ "status": "ok", "command": cmd.name(), "out": out, "config_hash": hash, "points": total, "holes": holes.len() }))
}
