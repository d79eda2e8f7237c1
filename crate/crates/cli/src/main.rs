//! Command-line experiment runner: derive-params, gen-dataset, train,
//! sweep-snr, verify-theory. Every command is deterministic under
//! (config, seed) and exits nonzero on validation failures or violated
//! bounds.

use clap::{Parser, Subcommand};
use dsce_core::config::ExperimentConfig;
use dsce_core::dataset;
use dsce_core::estimator::write_sweep_csv;
use dsce_core::nn::{read_checkpoint, write_checkpoint};
use dsce_core::pipeline::{sweep_snr, train_on_samples, write_history_csv};
use dsce_core::theory::{default_suite, write_reports_csv};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dsce",
    about = "Doubly selective OFDM channel lab: simulate, train, evaluate, verify"
)]
struct Cli {
    /// Experiment config (TOML). Omit to use the built-in N=32 defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived physical parameters for the configured system.
    DeriveParams,
    /// Generate the training/testing datasets and write them to disk.
    GenDataset {
        /// Output directory (created if missing).
        #[arg(long, default_value = "dataset")]
        out: PathBuf,
        /// Also export CSV copies of both sets.
        #[arg(long)]
        csv: bool,
    },
    /// Train a network on a generated dataset and write a checkpoint.
    Train {
        /// Directory produced by gen-dataset; omit to generate in memory.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint across the SNR grid on fresh test sets.
    SweepSnr {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Run the numerical verification suite for the probability claims.
    VerifyTheory {
        #[arg(long, default_value = "theory_reports.csv")]
        out: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            ExperimentConfig::from_toml(&text).map_err(|e| e.to_string())?
        }
        None => ExperimentConfig::desk_default(32),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    cfg.validated().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), String> {
    let cfg = load_config(&cli)?;
    let physics = cfg.validated().map_err(|e| e.to_string())?;
    match cli.command {
        Command::DeriveParams => {
            print!("{}", cfg.derived_table().map_err(|e| e.to_string())?);
            Ok(())
        }
        Command::GenDataset { out, csv } => {
            fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            let spec = cfg.dataset_spec();
            let (train, test) = dataset::generate(&spec, &physics).map_err(|e| e.to_string())?;
            let hash = physics.config_hash();
            write_dataset(&out.join("train.bin"), &train, hash)?;
            write_dataset(&out.join("test.bin"), &test, hash)?;
            if csv {
                export_csv(&out.join("train.csv"), &train, hash)?;
                export_csv(&out.join("test.csv"), &test, hash)?;
            }
            let manifest = serde_json::json!({
                "config_hash": format!("{hash:016x}"),
                "master_seed": cfg.master_seed,
                "n_train": train.len(),
                "n_test": test.len(),
                "input_dim": physics.input_dim(),
                "label_dim": physics.label_dim(),
                "files": {"train": "train.bin", "test": "test.bin"},
            });
            fs::write(
                out.join("manifest.json"),
                serde_json::to_string_pretty(&manifest).expect("manifest"),
            )
            .map_err(|e| e.to_string())?;
            println!(
                "wrote {} training and {} testing samples to {}",
                train.len(),
                test.len(),
                out.display()
            );
            Ok(())
        }
        Command::Train { dataset: ds, out } => {
            fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            let train_all = match ds {
                Some(dir) => {
                    let bytes = fs::read(dir.join("train.bin")).map_err(|e| e.to_string())?;
                    let (samples, hash) =
                        dataset::read_binary(&mut bytes.as_slice()).map_err(|e| e.to_string())?;
                    if hash != physics.config_hash() {
                        return Err(format!(
                            "dataset was generated under config hash {hash:016x}, \
                             current config hashes to {:016x}",
                            physics.config_hash()
                        ));
                    }
                    samples
                }
                None => {
                    let spec = cfg.dataset_spec();
                    dataset::generate(&spec, &physics)
                        .map_err(|e| e.to_string())?
                        .0
                }
            };
            let model = train_on_samples(&cfg, &physics, &train_all).map_err(|e| e.to_string())?;
            let mut ckpt = Vec::new();
            write_checkpoint(
                &model.net,
                &model.opt,
                &model.report.history,
                physics.config_hash(),
                &mut ckpt,
            )
            .map_err(|e| e.to_string())?;
            fs::write(out.join("checkpoint.bin"), ckpt).map_err(|e| e.to_string())?;
            let mut hist = Vec::new();
            write_history_csv(&model.report, &mut hist).map_err(|e| e.to_string())?;
            fs::write(out.join("history.csv"), hist).map_err(|e| e.to_string())?;
            let last = model.report.history.last().expect("at least one epoch");
            println!(
                "trained {} epochs (best epoch {}, val loss {:.6e}); checkpoint in {}",
                model.report.history.len(),
                model.report.best_epoch,
                model.report.best_val_loss,
                out.display()
            );
            println!(
                "final epoch: train {:.6e}, val {:.6e}, drift {:.4}",
                last.train_loss, last.val_loss, last.weight_drift
            );
            Ok(())
        }
        Command::SweepSnr { checkpoint, out } => {
            let bytes = fs::read(&checkpoint).map_err(|e| e.to_string())?;
            let (net, _, _, hash) =
                read_checkpoint(&mut bytes.as_slice()).map_err(|e| e.to_string())?;
            if hash != physics.config_hash() {
                return Err(format!(
                    "checkpoint was trained under config hash {hash:016x}, \
                     current config hashes to {:016x}",
                    physics.config_hash()
                ));
            }
            let rows = sweep_snr(&cfg, &physics, &net).map_err(|e| e.to_string())?;
            let mut buf = Vec::new();
            write_sweep_csv(&rows, &mut buf).map_err(|e| e.to_string())?;
            fs::write(&out, buf).map_err(|e| e.to_string())?;
            for r in &rows {
                println!("snr {:>5} dB: mse {:.8}", r.snr_db, r.mse);
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::VerifyTheory { out } => {
            let reports = default_suite(&physics, cfg.master_seed).map_err(|e| e.to_string())?;
            let mut buf = Vec::new();
            write_reports_csv(&reports, &mut buf).map_err(|e| e.to_string())?;
            fs::write(&out, buf).map_err(|e| e.to_string())?;
            let mut all_hold = true;
            for r in &reports {
                println!("{:<28} {}", r.claim, r.verdict.as_str());
                all_hold &= r.holds();
            }
            println!("wrote {}", out.display());
            if all_hold {
                Ok(())
            } else {
                Err("at least one bound was violated beyond 3 sigma".into())
            }
        }
    }
}

fn write_dataset(
    path: &Path,
    samples: &[dsce_core::dataset::LabeledSample],
    hash: u64,
) -> Result<(), String> {
    let mut buf = Vec::new();
    dataset::write_binary(samples, hash, &mut buf).map_err(|e| e.to_string())?;
    fs::write(path, buf).map_err(|e| e.to_string())
}

fn export_csv(
    path: &Path,
    samples: &[dsce_core::dataset::LabeledSample],
    hash: u64,
) -> Result<(), String> {
    let mut buf = Vec::new();
    dataset::write_csv(samples, hash, &mut buf).map_err(|e| e.to_string())?;
    fs::write(path, buf).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
