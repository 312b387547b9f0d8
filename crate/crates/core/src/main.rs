use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use belpm_core::config::ModelConfig;
use belpm_core::error::{Error, Result};
use belpm_core::harness::{compare_structures, metrics_csv, run_experiment, structures_csv, write_report, ExperimentSpec};
use belpm_core::io;
use belpm_core::learning::{train_phase1, train_phase2};
use belpm_core::series::{add_noise, embed, generate_henon, generate_lorenz, HenonParams, LorenzParams};
use belpm_core::{nmse, mse, BelpmModel, Kernel, WknnRegressor};

#[derive(Parser)]
#[command(name = "belpm", version, about = "Emotional-learning k-NN forecaster for chaotic time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Lorenz,
    Henon,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Belpm,
    Wknn,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a chaotic series as `t,value` CSV.
    Generate {
        #[arg(long, value_enum)]
        system: SystemArg,
        #[arg(long)]
        n: usize,
        /// Integration step (Lorenz only).
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 0.0)]
        noise_std: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Delay-embed a series into a `x0..x{R-1},target` dataset.
    Embed {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        lag: usize,
        #[arg(long, default_value_t = 1)]
        horizon: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a dataset and save it as JSON.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// TOML model configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model_out: PathBuf,
        /// Write the learning curve as CSV.
        #[arg(long)]
        history_out: Option<PathBuf>,
    },
    /// Predict the rows of a dataset or input table.
    Predict {
        #[arg(long, value_enum, default_value = "belpm")]
        method: MethodArg,
        /// Trained model (belpm).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Training dataset (wknn).
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value = "exponential")]
        kernel: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Adapt the kernel scales online over the data, this many passes (belpm).
        #[arg(long, default_value_t = 0)]
        adapt_epochs: usize,
    },
    /// Print NMSE and MSE of predictions against targets as JSON.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Run a benchmark spec and write the reports into a directory.
    Benchmark {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { system, n, dt, noise_std, seed, out } => {
            let clean = match system {
                SystemArg::Lorenz => generate_lorenz(&LorenzParams::default(), dt, n)?,
                SystemArg::Henon => generate_henon(&HenonParams::default(), n)?,
            };
            io::write_series(&add_noise(&clean, noise_std, seed)?, out)
        }
        Command::Embed { series, dim, lag, horizon, out } => {
            let ds = embed(&io::read_series(series)?, dim, lag, horizon)?;
            io::write_dataset(&ds, out)
        }
        Command::Train { data, config, model_out, history_out } => {
            let cfg = match config {
                Some(path) => ModelConfig::load(path)?,
                None => ModelConfig::default(),
            };
            let ds = io::read_dataset(data)?;
            let mut model = BelpmModel::new(&ds, cfg.k_a, cfg.k_o, cfg.kernel()?)?;
            let history = train_phase1(&mut model, None, &cfg.train_config())?;
            model.save(model_out)?;
            if let Some(path) = history_out {
                fs::write(path, history.to_csv())?;
            }
            let last = history.epochs.last().or(history.initial.as_ref());
            println!(
                "{}",
                json!({
                    "epochs": history.epochs.len(),
                    "train_nmse": last.and_then(|r| r.train_nmse),
                    "parameters": model.parameter_count(),
                })
            );
            Ok(())
        }
        Command::Predict { method, model, train, k, kernel, data, out, adapt_epochs } => {
            let table = io::read_inputs(data)?;
            let predictions = match method {
                MethodArg::Belpm => {
                    let path = model.ok_or_else(|| Error::InvalidArgument("--model is required".into()))?;
                    let mut model = BelpmModel::load(path)?;
                    if adapt_epochs > 0 {
                        let targets = table.targets.clone().unwrap_or_else(|| vec![0.0; table.inputs.len()]);
                        let dim = model.dim();
                        let stream = belpm_core::EmbeddedDataset::new(table.inputs.clone(), targets, dim, 1, 1)?;
                        let cfg = belpm_core::TrainConfig { phase2_epochs: adapt_epochs, ..Default::default() };
                        train_phase2(&mut model, &stream, &cfg)?.predictions
                    } else {
                        model.predict_all(&table.inputs)?
                    }
                }
                MethodArg::Wknn => {
                    let path = train.ok_or_else(|| Error::InvalidArgument("--train is required".into()))?;
                    let kernel: Kernel = kernel.parse()?;
                    let reg = WknnRegressor::with_heuristic_b(io::read_dataset(path)?, k, kernel)?;
                    reg.predict_all(&table.inputs)?
                }
            };
            io::write_predictions(&predictions, table.targets.as_deref(), out)
        }
        Command::Evaluate { pred, target } => {
            let p = io::read_column(pred, "prediction", false)?;
            let y = io::read_column(target, "target", true)?;
            let mse = mse(&p, &y)?;
            let nmse = nmse(&p, &y)?;
            println!("{}", json!({ "n": y.len(), "nmse": nmse, "mse": mse }));
            Ok(())
        }
        Command::Benchmark { spec, out } => {
            let spec = ExperimentSpec::load(spec)?;
            let report = run_experiment(&spec)?;
            write_report(&report, &out)?;
            print!("{}", metrics_csv(&report));
            if !spec.sweep.is_empty() {
                let rows = compare_structures(&spec, &spec.sweep)?;
                let table = structures_csv(&rows);
                fs::write(out.join("structures.csv"), &table)?;
                print!("{table}");
            }
            let failure = report.errors().next().map(|e| (e.code, format!("{}: {}", e.stage, e.message)));
            match failure {
                Some((3, msg)) => Err(Error::Numeric(msg)),
                Some((_, msg)) => Err(Error::InvalidArgument(msg)),
                None => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
