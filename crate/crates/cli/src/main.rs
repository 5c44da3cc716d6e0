mod config;
mod runners;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;
use twostep_core::io::sha256_hex;

use config::ExperimentConfig;
use runners::{Failure, Out};

const EXIT_IO: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_RHAT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "twostep",
    version,
    about = "Surrogate training and uncertainty propagation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Which {
    Run,
    Sbc,
    Timing,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment TOML file.
    config: PathBuf,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides `jobs` from the config.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; overrides `out` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment.
    Run(Common),
    /// Simulation-based calibration (config kind must be `sbc`).
    Sbc(Common),
    /// Time the I-step over polynomial degree and cluster count.
    Timing(Common),
}

fn fail(code: u8, kind: &str, message: &str) -> ExitCode {
    let e = json!({ "error": { "kind": kind, "message": message, "exit_code": code } });
    eprintln!("{e}");
    ExitCode::from(code)
}

fn load(which: Which, args: &Common) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate(which == Which::Timing)?;
    match (which, cfg.kind) {
        (Which::Sbc, config::Kind::Sbc) | (Which::Timing, _) => {}
        (Which::Sbc, k) => return Err(format!("the sbc command needs kind = \"sbc\", got {k:?}")),
        (Which::Run, config::Kind::Sbc) => {
            return Err("kind = \"sbc\" runs through the sbc command".into())
        }
        (Which::Run, _) => {}
    }
    Ok(cfg)
}

fn provenance(
    which: Which,
    args: &Common,
    cfg: &ExperimentConfig,
    out: &Out,
    result: &serde_json::Value,
) -> serde_json::Value {
    let bytes = std::fs::read(&args.config).unwrap_or_default();
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let files: serde_json::Map<_, _> = out
        .files
        .iter()
        .map(|(n, h)| (n.clone(), json!(h)))
        .collect();
    json!({
        "tool": "twostep",
        "version": env!("CARGO_PKG_VERSION"),
        "command": match which { Which::Run => "run", Which::Sbc => "sbc", Which::Timing => "timing" },
        "kind": cfg.kind,
        "seed": cfg.seed,
        "jobs": cfg.jobs,
        "config_path": args.config.display().to_string(),
        "config_sha256": sha256_hex(&bytes),
        "config": cfg,
        "created_unix": created,
        "files": files,
        "diagnostics": out.diagnostics,
        "result": result,
    })
}

fn execute(which: Which, args: &Common) -> ExitCode {
    let cfg = match load(which, args) {
        Ok(c) => c,
        Err(msg) => return fail(EXIT_SCHEMA, "schema", &msg),
    };
    let jobs = cfg.jobs.unwrap_or(1);
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
    {
        return fail(EXIT_IO, "io", &e.to_string());
    }
    let dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| Path::new("out").to_path_buf());
    let mut out = match Out::new(&dir) {
        Ok(o) => o,
        Err(Failure::Io(m) | Failure::Numerical(m)) => return fail(EXIT_IO, "io", &m),
    };
    let result = match which {
        Which::Timing => runners::run_timing(&cfg, &mut out),
        _ => runners::run(&cfg, &mut out),
    };
    let result = match result {
        Ok(r) => r,
        Err(Failure::Numerical(m)) => return fail(EXIT_NUMERICAL, "numerical", &m),
        Err(Failure::Io(m)) => return fail(EXIT_IO, "io", &m),
    };
    let prov = provenance(which, args, &cfg, &out, &result);
    if let Err(Failure::Io(m) | Failure::Numerical(m)) = out.json("provenance.json", &prov) {
        return fail(EXIT_IO, "io", &m);
    }
    if !out.diagnostics.is_empty() {
        return fail(EXIT_RHAT, "convergence", &out.diagnostics.join("; "));
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(a) => execute(Which::Run, a),
        Command::Sbc(a) => execute(Which::Sbc, a),
        Command::Timing(a) => execute(Which::Timing, a),
    }
}
