use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fathom_core::data::synth_generate;
use fathom_core::run::{self, Checkpoint, RunConfig};
use fathom_core::{Error, Result};

#[derive(Parser)]
#[command(name = "fathom", version, about = "Federated multi-task attention models for sensor time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write report, checkpoint and message log.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Score a checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Data source to evaluate on; defaults to the checkpoint's own config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Where to write eval.json; stdout only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write attention CSVs and the spike summary for test windows.
    ExportAttention {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Generate synthetic tasks and write their manifest.
    Synth {
        /// Run config with a `synth` block.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &Path, seed: Option<u64>, workers: Option<usize>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn eval_config(checkpoint: &Checkpoint, config: Option<&Path>, workers: Option<usize>) -> Result<RunConfig> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => checkpoint.config.clone(),
    };
    if workers.is_some() {
        cfg.workers = workers;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            out,
            seed,
            workers,
        } => {
            let mut cfg = load_config(&config, seed, workers)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let result = run::train(&cfg)?;
            result.write(&cfg.output_dir)?;
            let m = &result.report.macro_metrics;
            println!(
                "{}: best epoch {} of {}, test loss {:.5}{}{}",
                cfg.variant,
                result.report.best_epoch,
                result.report.epochs_run,
                m.loss,
                m.f1.map(|f| format!(", F1 {f:.4}")).unwrap_or_default(),
                m.smape.map(|s| format!(", SMAPE {s:.4}")).unwrap_or_default(),
            );
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::Eval {
            checkpoint,
            config,
            out,
            workers,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let cfg = eval_config(&ck, config.as_deref(), workers)?;
            let report = run::evaluate(&ck, &cfg)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
                    run::write_json(&dir.join("eval.json"), &report)?;
                }
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }
        Command::ExportAttention {
            checkpoint,
            config,
            out,
            workers,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let cfg = eval_config(&ck, config.as_deref(), workers)?;
            let files = run::export(&ck, &cfg, &out)?;
            println!("wrote {} files to {}", files.len(), out.display());
        }
        Command::Synth { config, out, seed } => {
            let cfg = load_config(&config, seed, None)?;
            let synth = cfg
                .synth_config()
                .ok_or_else(|| Error::Config {
                    field: "synth".into(),
                    message: "the synth command needs a `synth` block".into(),
                })?;
            let (datasets, manifest) = synth_generate(&synth)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            run::write_json(&out.join("manifest.json"), &manifest)?;
            println!(
                "generated {} tasks of {} windows; manifest in {}",
                datasets.len(),
                synth.windows,
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("FATHOM_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
