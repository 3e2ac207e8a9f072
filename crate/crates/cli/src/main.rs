//! `lgmem`: run, sweep and inspect optical-memory experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O or output verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lgmem::config::ExperimentConfig;
use lgmem::experiment::{self, RunOptions};
use lgmem::grid::{GridSpec, PolarGrid};
use lgmem::modes::{decompose, power_spectrum, synthesize_slm, ModeCoefficients, ModeIndex};
use lgmem::Error;

#[derive(Parser)]
#[command(name = "lgmem", version, about = "Single-photon OAM optical memory simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reference and memory runs of every case; writes histograms and metrics.
    Run(RunArgs),
    /// One full run per value of a scalar config field; writes a CSV.
    Sweep(SweepArgs),
    /// LG power spectrum of a synthesized input beam.
    Decompose(DecomposeArgs),
    /// Loads and checks a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `trials`.
    #[arg(long)]
    trials: Option<u64>,
    /// Caps the number of worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory; defaults to the config's `output_dir`, then
    /// `$LGMEM_OUT_DIR`, then `lgmem-out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Dotted path of the field, e.g. `schedule.hold_us` or `cases.0.phase_only`.
    #[arg(long)]
    param: String,
    /// Comma-separated JSON scalars.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// Output directory for `sweep.csv` (same defaults as `run`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Take the target from a case of this config.
    #[arg(long, conflicts_with = "mode")]
    config: Option<PathBuf>,
    /// Case name (default: the first case).
    #[arg(long, requires = "config")]
    case: Option<String>,
    /// Target modes as `p:l` or `p:l:re:im`; repeatable.
    #[arg(long)]
    mode: Vec<String>,
    #[arg(long)]
    phase_only: bool,
    #[arg(long, default_value_t = 50.0)]
    waist_um: f64,
    #[arg(long, default_value_t = 8)]
    p_max: usize,
    #[arg(long, default_value_t = 5)]
    l_max: usize,
    /// Only list entries at or above this power.
    #[arg(long, default_value_t = 1e-6)]
    threshold: f64,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::InvalidArgument(_)
        | Error::TruncationExceedsGrid { .. }
        | Error::WindingOutOfRange { .. }
        | Error::EmptyTarget
        | Error::ZeroPower
        | Error::GridMismatch(_) => 2,
        Error::Numerical(_) | Error::LayoutMismatch(_) | Error::ZeroReference => 3,
        Error::Io { .. } | Error::Verify { .. } => 4,
    }
}

fn load(common: &Common) -> lgmem::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os("LGMEM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("lgmem-out"))
}

fn write(path: &Path, text: &str) -> lgmem::Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(args: RunArgs) -> lgmem::Result<()> {
    let cfg = load(&args.common)?;
    let dir = out_dir(args.out, &cfg);
    let out = experiment::run(
        &cfg,
        RunOptions {
            workers: args.common.workers,
        },
    )?;
    let files = experiment::write_outputs(&out, &dir)?;
    write(&dir.join("config.json"), &(cfg.to_json() + "\n"))?;
    for m in &out.report.cases {
        let dr = m
            .distinction_ratio
            .map(|d| {
                format!(
                    ", distinction ratio {:.2} dB (reference) / {:.2} dB (retrieval)",
                    d.reference_db, d.retrieval_db
                )
            })
            .unwrap_or_default();
        let imb = m
            .imbalance
            .reference
            .map(|i| format!(", imbalance {:+.4}", i))
            .unwrap_or_default();
        println!(
            "{}: efficiency {:.4} ± {:.4}{dr}{imb}",
            m.case, m.efficiency.value, m.efficiency.stderr
        );
    }
    println!(
        "config hash {} seed {}; {} files in {}",
        out.report.config_hash,
        cfg.master_seed,
        files.len() + 1,
        dir.display()
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> lgmem::Result<()> {
    let cfg = load(&args.common)?;
    let values = args
        .values
        .iter()
        .map(|v| serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.clone())))
        .collect::<Vec<_>>();
    let rows = experiment::sweep(
        &cfg,
        &args.param,
        &values,
        RunOptions {
            workers: args.common.workers,
        },
    )?;
    let dir = out_dir(args.out, &cfg);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join("sweep.csv");
    experiment::write_sweep_csv(&rows, &path)?;
    for r in &rows {
        println!(
            "{} = {}: {} efficiency {:.4} ± {:.4}",
            args.param, r.value, r.metrics.case, r.metrics.efficiency.value, r.metrics.efficiency.stderr
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_mode(s: &str) -> lgmem::Result<(ModeIndex, f64, f64)> {
    let bad = || Error::InvalidArgument(format!("mode `{s}` is not `p:l` or `p:l:re:im`"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 && parts.len() != 4 {
        return Err(bad());
    }
    let p = parts[0].parse().map_err(|_| bad())?;
    let l = parts[1].parse().map_err(|_| bad())?;
    let (re, im) = if parts.len() == 4 {
        (
            parts[2].parse().map_err(|_| bad())?,
            parts[3].parse().map_err(|_| bad())?,
        )
    } else {
        (1.0, 0.0)
    };
    Ok((ModeIndex::new(p, l), re, im))
}

fn decompose_cmd(args: DecomposeArgs) -> lgmem::Result<()> {
    let (grid, target, phase_only, input_waist, p_max, l_max) = if let Some(path) = &args.config {
        let cfg = ExperimentConfig::load(path)?;
        let k = match &args.case {
            Some(name) => cfg
                .cases
                .iter()
                .position(|c| &c.name == name)
                .ok_or_else(|| Error::config("cases", format!("no case named `{name}`")))?,
            None => 0,
        };
        let c = &cfg.cases[k];
        (
            experiment::polar_grid(&cfg)?,
            experiment::case_target(&cfg, k)?,
            c.phase_only,
            c.slm_input_waist_um,
            cfg.basis.p_max,
            cfg.basis.l_max,
        )
    } else {
        if args.mode.is_empty() {
            return Err(Error::InvalidArgument("give --config or at least one --mode".into()));
        }
        let mut t = ModeCoefficients::new(args.waist_um);
        for s in &args.mode {
            let (m, re, im) = parse_mode(s)?;
            if m.l.unsigned_abs() as usize > args.l_max || m.p as usize > args.p_max {
                return Err(Error::InvalidArgument(format!(
                    "mode `{s}` lies outside the basis p <= {}, |l| <= {}",
                    args.p_max, args.l_max
                )));
            }
            t = t.with(m, lgmem::scalar::C::new(re, im));
        }
        let grid = std::sync::Arc::new(PolarGrid::new(args.waist_um, GridSpec::default())?);
        (
            grid,
            t.normalized()?,
            args.phase_only,
            args.waist_um,
            args.p_max,
            args.l_max,
        )
    };
    let field = synthesize_slm(grid, &target, phase_only, input_waist)?;
    let coeffs = decompose(&field, p_max, l_max)?;
    println!("p,l,power");
    for (m, pw) in power_spectrum(&coeffs) {
        if pw >= args.threshold {
            println!("{},{},{:.10}", m.p, m.l, pw);
        }
    }
    println!("# captured {:.10} of {:.10}", coeffs.power(), field.power());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Decompose(a) => decompose_cmd(a),
        Command::Validate { config } => ExperimentConfig::load(&config).map(|c| {
            println!("{}: valid, config hash {}", config.display(), c.hash());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
