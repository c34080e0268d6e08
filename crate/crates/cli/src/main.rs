use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use prn_cli::experiment::{self, ModelCache, Options};
use prn_cli::{CliError, CliResult, ExperimentConfig};
use prn_core::io::load_checkpoint;
use prn_core::predict::Algorithm;
use prn_core::training::EpochRecord;

#[derive(Parser, Debug)]
#[command(name = "prn", version, about = "Train recurrent predictors on noisy trajectories and study their rollouts")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config (default `out/<name>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Suppress per-epoch progress on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    #[value(name = "csv+svg")]
    CsvSvg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the noisy training sequences and the segment corpus.
    Gen,
    /// Train the network and write `checkpoint.json` and `train_log.csv`.
    Train {
        /// Start from this checkpoint instead of a fresh initialization.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Epoch count, overriding the config; 0 copies the start checkpoint.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Roll the trained network out on noisy inputs.
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// mw, ew, or ml.
        #[arg(long)]
        algo: Option<Algorithm>,
        /// Prediction horizon.
        #[arg(short, long)]
        p: Option<usize>,
    },
    /// Noise propagation, contraction, and scatter reports.
    Analyze {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// One-step prediction scatter over repeated noisy realizations.
    DemoAveraging {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// gen, train, predict, and analyze in one go.
    Run,
}

fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn options(cli: &Cli, cfg: &ExperimentConfig) -> Options {
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| Path::new("out").join(&cfg.name));
    Options {
        out,
        svg: cli.format == Format::CsvSvg,
    }
}

fn progress(quiet: bool) -> impl FnMut(&EpochRecord) {
    move |r: &EpochRecord| {
        if !quiet {
            match r.validation_error {
                Some(v) => eprintln!("epoch {:>3}  train {:.6}  validation {:.6}  clipped {}", r.epoch, r.train_error, v, r.clip_events),
                None => eprintln!("epoch {:>3}  train {:.6}  clipped {}", r.epoch, r.train_error, r.clip_events),
            }
        }
    }
}

fn load(path: &Path) -> CliResult<prn_core::io::Checkpoint> {
    load_checkpoint(path).map_err(|e| match e {
        prn_core::Error::Io(io) => CliError::io(path, io),
        other => other.into(),
    })
}

fn print_predictions(outcomes: &[experiment::PredictionOutcome]) {
    for o in outcomes {
        let r = &o.report;
        let ratio = r.smoothness_ratio.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<24} a_i={:<5} start={:<5} rmse={:.5} smoothness_ratio={}  -> {}",
            o.trajectory.label(),
            o.amplitude,
            o.start,
            r.rmse_pred_vs_truth,
            ratio,
            o.file.display()
        );
    }
}

fn print_scatters(scatters: &[(prn_cli::config::ScatterConfig, prn_core::analysis::ScatterReport)]) {
    for (s, r) in scatters {
        println!(
            "scatter {} start={} m={} a={} trials={}: |mean - f| = {:.5}",
            s.trajectory.label(),
            s.start,
            s.m,
            s.amplitude,
            s.trials,
            r.mean_error()
        );
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let mut cfg = load_config(cli)?;
    let opts = options(cli, &cfg);
    match &cli.command {
        Command::Gen => {
            let s = experiment::cmd_gen(&cfg, &opts)?;
            println!("{} segments", s.segments);
            for f in s.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Train { checkpoint, epochs } => {
            if let Some(e) = epochs {
                cfg.train.epochs = *e;
                cfg.validate()?;
            }
            let initial = match checkpoint.as_ref().or(cfg.checkpoint.as_ref()) {
                Some(p) => Some(load(p)?),
                None => None,
            };
            let outcome = experiment::cmd_train(&cfg, initial, &opts, &mut progress(cli.quiet))?;
            println!(
                "checkpoint {} ({} epochs) -> {}",
                outcome.checkpoint.id(),
                outcome.records.len(),
                opts.out.join(experiment::CHECKPOINT_FILE).display()
            );
        }
        Command::Predict { checkpoint, algo, p } => {
            let ck = experiment::resolve_checkpoint(&cfg, checkpoint.as_deref(), &opts)?;
            let outcomes = experiment::cmd_predict(&cfg, &ck, &opts, *algo, *p)?;
            print_predictions(&outcomes);
        }
        Command::Analyze { checkpoint } => {
            let ck = experiment::resolve_checkpoint(&cfg, checkpoint.as_deref(), &opts)?;
            let a = experiment::cmd_analyze(&cfg, &ck, &opts)?;
            for (amp, res) in &a.residual_scaling {
                println!("noise a={amp}: max residual {res:.3e}");
            }
            if let Some(r) = a.max_spectral_radius {
                println!("largest spectral radius along the trajectory: {r:.4}");
            }
            print_scatters(&a.scatters);
        }
        Command::DemoAveraging { checkpoint, trials } => {
            let ck = experiment::resolve_checkpoint(&cfg, checkpoint.as_deref(), &opts)?;
            let s = experiment::cmd_demo_averaging(&cfg, &ck, &opts, *trials)?;
            print_scatters(&s);
        }
        Command::Run => {
            let out = experiment::run_all(&cfg, &opts, &mut ModelCache::default(), &mut progress(cli.quiet))?;
            println!("checkpoint {}", out.checkpoint.id());
            print_predictions(&out.predictions);
            if let Some(a) = &out.analysis {
                print_scatters(&a.scatters);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
