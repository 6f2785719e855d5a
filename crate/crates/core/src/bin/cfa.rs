use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfa::exp::{self, ExperimentConfig};
use cfa::policy::{Theta, Variant};
use cfa::{Error, Result};

/// Tune and evaluate parameterized lookahead policies for energy storage.
#[derive(Parser, Debug)]
#[command(name = "cfa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config (TOML); defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tune one variant at one forecast quality.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Variant,
        #[arg(long)]
        sigma_f: f64,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Compare a tuned (or benchmark) policy with the benchmark on common paths.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Variant,
        #[arg(long)]
        sigma_f: f64,
        #[arg(long)]
        n_paths: Option<usize>,
        /// Checkpoint to evaluate; defaults to the one `train` wrote in --out-dir.
        #[arg(long, alias = "resume")]
        checkpoint: Option<PathBuf>,
    },
    /// Train and evaluate every variant at every forecast quality in the config.
    Table1 {
        #[command(flatten)]
        common: Common,
    },
    /// Emit multiplier curves and storage trajectories from checkpoints in --out-dir.
    Curves {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 35.0)]
        sigma_f: f64,
    },
    /// Dump one sample path as a CSV bundle; --seed picks the path.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sigma_f: f64,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn run(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Train { common, variant, sigma_f, resume } => {
            let cfg = load_config(&common)?;
            let resume = resume.map(|p| exp::load_checkpoint(&cfg, &p)).transpose()?;
            let cp = exp::train(&cfg, variant, sigma_f, &common.out_dir, resume)?;
            exp::write_manifest(&cfg, &common.out_dir, "train")?;
            println!("{variant} sigma_f={sigma_f} theta={:?}", cp.progress.theta);
            Ok(0)
        }
        Command::Evaluate { common, variant, sigma_f, n_paths, checkpoint } => {
            let cfg = load_config(&common)?;
            let theta = if variant == Variant::Benchmark {
                Theta::Benchmark
            } else {
                let path = checkpoint.unwrap_or_else(|| exp::checkpoint_path(&common.out_dir, variant, sigma_f));
                let cp = exp::load_checkpoint(&cfg, &path)?;
                if cp.variant != variant {
                    return Err(Error::Config(format!("checkpoint holds {}, not {variant}", cp.variant)));
                }
                cp.theta()?
            };
            let row = exp::evaluate(&cfg, &theta, sigma_f, n_paths.unwrap_or(cfg.n_eval_paths), &common.out_dir)?;
            exp::write_manifest(&cfg, &common.out_dir, "evaluate")?;
            let e = &row.evaluation;
            println!(
                "{variant} sigma_f={sigma_f} mean={:.2} delta={:.4} se={:.4}",
                e.mean, e.delta, e.delta_std_error
            );
            Ok(0)
        }
        Command::Table1 { common } => {
            let cfg = load_config(&common)?;
            let table = exp::table1(&cfg, &common.out_dir)?;
            exp::write_manifest(&cfg, &common.out_dir, "table1")?;
            let mut code = 0;
            for cell in &table.cells {
                match cell {
                    exp::CellOutcome::Done(r) => println!(
                        "{:<12} sigma_f={:<5} delta={:+.4} se={:.4}",
                        r.variant.name(),
                        r.sigma_f,
                        r.evaluation.delta,
                        r.evaluation.delta_std_error
                    ),
                    exp::CellOutcome::Failed { variant, sigma_f, kind, message } => {
                        eprintln!("error kind={kind} cell={variant}/{sigma_f} message={message:?}");
                        if code == 0 {
                            code = if *kind == "numerical" { 3 } else { 2 };
                        }
                    }
                }
            }
            Ok(code)
        }
        Command::Curves { common, sigma_f } => {
            let cfg = load_config(&common)?;
            exp::curves(&cfg, sigma_f, &common.out_dir)?;
            exp::write_manifest(&cfg, &common.out_dir, "curves")?;
            Ok(0)
        }
        Command::Sample { common, sigma_f } => {
            let cfg = load_config(&common)?;
            if !(sigma_f.is_finite() && sigma_f >= 0.0) {
                return Err(Error::InvalidParameters(format!("sigma_f must be nonnegative, got {sigma_f}")));
            }
            exp::sample(&cfg, sigma_f, cfg.master_seed, &common.out_dir)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("error kind=usage code=1");
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error kind={} code={code} message={:?}", e.kind(), e.to_string());
            ExitCode::from(code as u8)
        }
    }
}
