//! The commands behind the `prn` binary.
//!
//! Every random choice is drawn from a seed derived from the master seed by
//! `derive_seed_path(master, [stream, ...])`, with the streams listed in
//! [`streams`]. Prediction and analysis seeds are keyed by the trajectory
//! and amplitude rather than by list position, so two configs that share a
//! master seed feed identical noisy inputs to their networks.

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use prn_core::analysis::{
    contraction_profile, noise_propagation, prediction_scatter, residual_scaling, smoothness, ScatterReport,
    ScatterSpec, SmoothnessReport,
};
use prn_core::io::{
    load_checkpoint, save_checkpoint, write_contraction_report, write_corpus, write_noise_report,
    write_prediction_csv, write_residual_scaling, write_scatter_report, write_sequence_csv,
    write_smoothness_report, write_training_log, Checkpoint, PredictionMeta, SeedLineage,
};
use prn_core::predict::{predict, PredictionRun};
use prn_core::rnn::{init_params, NetworkParameters};
use prn_core::seed::derive_seed_path;
use prn_core::training::{train_with, EpochRecord};
use prn_core::trajectory::{build_training_corpus, sample, NoiseModel, NoisySequence, TrainingCorpus, TrajectorySpec};

use crate::config::{ExperimentConfig, ScatterConfig};
use crate::error::{CliError, CliResult};
use crate::svg::{Plot, Series, Style};

pub mod streams {
    /// `[SEQUENCE, trajectory index, realization]`
    pub const SEQUENCE: u64 = 1;
    /// `[CORPUS, trajectory index]`
    pub const CORPUS: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    /// `[PREDICT, trajectory key, amplitude bits, start]`
    pub const PREDICT: u64 = 5;
    /// `[NOISE, trajectory key, start]`
    pub const NOISE: u64 = 6;
    /// `[SCATTER, trajectory key, start, m, amplitude bits]`
    pub const SCATTER: u64 = 7;
}

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const PREDICT_SUMMARY_FILE: &str = "predict_summary.csv";

#[derive(Debug, Clone)]
pub struct Options {
    pub out: PathBuf,
    pub svg: bool,
}

impl Options {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Options {
            out: out.into(),
            svg: false,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn create(&self, name: &str) -> CliResult<File> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        let path = self.path(name);
        File::create(&path).map_err(|e| CliError::io(&path, e))
    }

    fn write_svg(&self, name: &str, plot: &Plot) -> CliResult<()> {
        if self.svg {
            let path = self.path(name);
            std::fs::write(&path, plot.to_svg()).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Stable 64-bit key of a trajectory (FNV-1a of its label).
pub fn trajectory_key(spec: &TrajectorySpec) -> u64 {
    spec.label()
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn amp_tag(a: f64) -> String {
    format!("a{a}")
}

/// Number of grid points on a trajectory: the whole `0 ≤ t ≤ 1` range for
/// parabolas, `sequence_len` for periodic curves.
pub fn grid_len(cfg: &ExperimentConfig, spec: &TrajectorySpec) -> usize {
    if spec.is_finite() {
        let mut n = (1.0 / cfg.data.dt).floor() as usize + 1;
        while n > 1 && (n - 1) as f64 * cfg.data.dt > 1.0 {
            n -= 1;
        }
        n
    } else {
        cfg.data.sequence_len
    }
}

fn noise_for(cfg: &ExperimentConfig, spec: &TrajectorySpec, a: f64, seed: u64) -> NoiseModel {
    NoiseModel::for_spec(spec, a, seed).with_distribution(cfg.data.noise)
}

/// Noisy training sequences, one list of realizations per trajectory.
pub fn training_sequences(cfg: &ExperimentConfig) -> CliResult<Vec<Vec<NoisySequence>>> {
    cfg.data
        .trajectories
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let n = grid_len(cfg, spec);
            if n < cfg.data.max_len + 1 {
                return Err(CliError::Config(format!(
                    "{} has {n} grid points, segments of length {} need {}",
                    spec.label(),
                    cfg.data.max_len,
                    cfg.data.max_len + 1
                )));
            }
            (0..cfg.data.realizations)
                .map(|r| {
                    let seed = derive_seed_path(cfg.seed, &[streams::SEQUENCE, k as u64, r as u64]);
                    Ok(sample(spec, 0.0, cfg.data.dt, n, &noise_for(cfg, spec, cfg.data.a0, seed))?)
                })
                .collect()
        })
        .collect()
}

/// The merged training corpus, `segments_per_trajectory` segments per curve.
pub fn build_corpus(cfg: &ExperimentConfig, sequences: &[Vec<NoisySequence>]) -> CliResult<TrainingCorpus> {
    let parts = sequences
        .iter()
        .enumerate()
        .map(|(k, seqs)| {
            build_training_corpus(
                seqs,
                cfg.data.min_len,
                cfg.data.max_len,
                cfg.data.segments_per_trajectory,
                derive_seed_path(cfg.seed, &[streams::CORPUS, k as u64]),
            )
        })
        .collect::<prn_core::Result<Vec<_>>>()?;
    Ok(TrainingCorpus::merge(parts)?)
}

#[derive(Debug, Clone)]
pub struct GenSummary {
    pub segments: usize,
    pub files: Vec<PathBuf>,
}

/// Writes the first realization of every training trajectory and the corpus.
pub fn cmd_gen(cfg: &ExperimentConfig, opts: &Options) -> CliResult<GenSummary> {
    let sequences = training_sequences(cfg)?;
    let corpus = build_corpus(cfg, &sequences)?;
    let mut files = Vec::new();
    for (spec, seqs) in cfg.data.trajectories.iter().zip(&sequences) {
        let name = format!("sequence_{}.csv", spec.label());
        write_sequence_csv(&seqs[0], opts.create(&name)?)?;
        files.push(opts.path(&name));
        opts.write_svg(&format!("sequence_{}.svg", spec.label()), &sequence_plot(spec, &seqs[0]))?;
    }
    write_corpus(&corpus, opts.create(CORPUS_FILE)?)?;
    files.push(opts.path(CORPUS_FILE));
    Ok(GenSummary {
        segments: corpus.len(),
        files,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub records: Vec<EpochRecord>,
    pub corpus_size: usize,
}

/// Trains (or, with zero epochs, passes through) the configured network.
pub fn train_model(
    cfg: &ExperimentConfig,
    initial: Option<Checkpoint>,
    progress: &mut dyn FnMut(&EpochRecord),
) -> CliResult<TrainOutcome> {
    let d = cfg.dim();
    let init_seed = derive_seed_path(cfg.seed, &[streams::INIT]);
    let shuffle_seed = derive_seed_path(cfg.seed, &[streams::SHUFFLE]);
    let start = match initial {
        Some(ck) => {
            let p = &ck.params;
            if (p.kind(), p.n(), p.d()) != (cfg.network.cell, cfg.network.n, d) {
                return Err(CliError::Config(format!(
                    "checkpoint holds a {} network with n={} d={}, config asks for {} n={} d={d}",
                    p.kind(),
                    p.n(),
                    p.d(),
                    cfg.network.cell,
                    cfg.network.n
                )));
            }
            ck
        }
        None => {
            let mut ck = Checkpoint::new(init_params(cfg.network.cell, cfg.network.n, d, init_seed)?);
            ck.lineage = SeedLineage {
                master_seed: Some(cfg.seed),
                init_seed: Some(init_seed),
                shuffle_seed: None,
            };
            ck.metadata.insert("epochs".into(), "0".into());
            ck
        }
    };
    if cfg.train.epochs == 0 {
        return Ok(TrainOutcome {
            checkpoint: start,
            records: Vec::new(),
            corpus_size: 0,
        });
    }

    let corpus = build_corpus(cfg, &training_sequences(cfg)?)?;
    let tc = cfg.train.to_train_config(shuffle_seed);
    let resumed_from = start.id();
    let history = train_with(start.params.clone(), &corpus, &tc, |rec, _| {
        progress(rec);
        Ok(())
    })?;
    let last = history.epochs.last().cloned();
    let prior_epochs: usize = start
        .metadata
        .get("epochs")
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);

    let mut ck = Checkpoint::new(history.final_params);
    ck.lineage = SeedLineage {
        master_seed: Some(cfg.seed),
        init_seed: start.lineage.init_seed,
        shuffle_seed: Some(shuffle_seed),
    };
    let meta = &mut ck.metadata;
    meta.insert("a0".into(), cfg.data.a0.to_string());
    meta.insert(
        "trajectories".into(),
        cfg.data.trajectories.iter().map(|s| s.label()).collect::<Vec<_>>().join(" "),
    );
    meta.insert("epochs".into(), (prior_epochs + tc.epochs).to_string());
    meta.insert("train_size".into(), history.train_size.to_string());
    meta.insert("validation_size".into(), history.validation_size.to_string());
    meta.insert("initial_train_error".into(), history.initial_train_error.to_string());
    if let Some(rec) = last {
        meta.insert("final_train_error".into(), rec.train_error.to_string());
        if let Some(v) = rec.validation_error {
            meta.insert("final_validation_error".into(), v.to_string());
        }
    }
    if prior_epochs > 0 || start.lineage.shuffle_seed.is_some() {
        meta.insert("resumed_from".into(), resumed_from);
    }
    Ok(TrainOutcome {
        checkpoint: ck,
        records: history.epochs,
        corpus_size: corpus.len(),
    })
}

pub fn cmd_train(
    cfg: &ExperimentConfig,
    initial: Option<Checkpoint>,
    opts: &Options,
    progress: &mut dyn FnMut(&EpochRecord),
) -> CliResult<TrainOutcome> {
    let outcome = train_model(cfg, initial, progress)?;
    write_train_outputs(&outcome, opts)?;
    Ok(outcome)
}

fn write_train_outputs(outcome: &TrainOutcome, opts: &Options) -> CliResult<()> {
    write_training_log(&outcome.records, opts.create(TRAIN_LOG_FILE)?)?;
    save_checkpoint(&outcome.checkpoint, &opts.path(CHECKPOINT_FILE))
        .map_err(|e| io_context(e, &opts.path(CHECKPOINT_FILE)))?;
    if !outcome.records.is_empty() {
        opts.write_svg("train_log.svg", &training_plot(&outcome.records))?;
    }
    Ok(())
}

fn io_context(e: prn_core::Error, path: &Path) -> CliError {
    match e {
        prn_core::Error::Io(io) => CliError::io(path, io),
        other => other.into(),
    }
}

/// Model for `predict`/`analyze`: an explicit path, else the checkpoint in
/// the output directory, else the one named in the config.
pub fn resolve_checkpoint(cfg: &ExperimentConfig, explicit: Option<&Path>, opts: &Options) -> CliResult<Checkpoint> {
    let in_out = opts.path(CHECKPOINT_FILE);
    let path = match (explicit, &cfg.checkpoint) {
        (Some(p), _) => p.to_path_buf(),
        (None, _) if in_out.is_file() => in_out,
        (None, Some(p)) => p.clone(),
        (None, None) => {
            return Err(CliError::Config(format!(
                "no checkpoint: run `train` first or pass --checkpoint ({} not found)",
                in_out.display()
            )))
        }
    };
    let ck = load_checkpoint(&path).map_err(|e| io_context(e, &path))?;
    if ck.params.d() != cfg.dim() {
        return Err(CliError::Config(format!(
            "checkpoint {} has dimension {}, config trajectories have {}",
            path.display(),
            ck.params.d(),
            cfg.dim()
        )));
    }
    Ok(ck)
}

#[derive(Debug, Clone)]
pub struct PredictionOutcome {
    pub trajectory: TrajectorySpec,
    pub amplitude: f64,
    pub start: usize,
    pub input: Vec<f64>,
    pub run: PredictionRun,
    pub truth: Vec<f64>,
    pub noisy_continuation: Vec<f64>,
    pub report: SmoothnessReport,
    pub file: PathBuf,
}

impl PredictionOutcome {
    pub fn stem(&self) -> String {
        format!("{}_{}_s{}", self.trajectory.label(), amp_tag(self.amplitude), self.start)
    }
}

/// Runs every configured `(trajectory, amplitude, start)` prediction.
pub fn run_predictions(
    cfg: &ExperimentConfig,
    params: &NetworkParameters,
    algorithm_override: Option<prn_core::predict::Algorithm>,
    p_override: Option<usize>,
) -> CliResult<Vec<PredictionOutcome>> {
    let pc = cfg
        .predict
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no [predict] section".into()))?;
    let algorithm = algorithm_override.unwrap_or(pc.algorithm);
    let p = p_override.unwrap_or(pc.p);
    if p == 0 {
        return Err(CliError::Config("prediction horizon must be positive".into()));
    }
    let d = params.d();
    let mut out = Vec::new();
    for spec in cfg.predict_trajectories() {
        for &a in &pc.input_amplitudes {
            for &start in &pc.starts {
                let len = start + pc.m + p;
                if len > grid_len(cfg, &spec) {
                    return Err(CliError::Config(format!(
                        "{}: start {start} + m {} + p {p} runs past the trajectory ({} points)",
                        spec.label(),
                        pc.m,
                        grid_len(cfg, &spec)
                    )));
                }
                let seed = derive_seed_path(cfg.seed, &[streams::PREDICT, trajectory_key(&spec), a.to_bits(), start as u64]);
                let seq = sample(&spec, 0.0, cfg.data.dt, len, &noise_for(cfg, &spec, a, seed))?;
                let input = seq.points_range(start..start + pc.m).to_vec();
                let run = predict(params, algorithm, &input, p, pc.cap)?;
                let truth = seq.truth_range(start + pc.m..len).to_vec();
                let noisy = seq.points_range(start + pc.m..len).to_vec();
                let report = smoothness(&run, &truth, (a > 0.0).then_some(&noisy[..]))?;
                debug_assert_eq!(truth.len(), p * d);
                let mut o = PredictionOutcome {
                    trajectory: spec,
                    amplitude: a,
                    start,
                    input,
                    run,
                    truth,
                    noisy_continuation: noisy,
                    report,
                    file: PathBuf::new(),
                };
                o.file = PathBuf::from(format!("prediction_{}.csv", o.stem()));
                out.push(o);
            }
        }
    }
    Ok(out)
}

pub fn cmd_predict(
    cfg: &ExperimentConfig,
    ck: &Checkpoint,
    opts: &Options,
    algorithm_override: Option<prn_core::predict::Algorithm>,
    p_override: Option<usize>,
) -> CliResult<Vec<PredictionOutcome>> {
    let mut outcomes = run_predictions(cfg, &ck.params, algorithm_override, p_override)?;
    let id = ck.id();
    let mut summary = String::from("trajectory,a_i,start,rmse_pred_vs_truth,rmse_input_vs_truth,smoothness_ratio,max_deviation\n");
    for o in &mut outcomes {
        let meta = PredictionMeta {
            checkpoint_id: Some(id.clone()),
            extra: vec![
                ("trajectory".into(), o.trajectory.label()),
                ("a_i".into(), o.amplitude.to_string()),
                ("start".into(), o.start.to_string()),
            ],
        };
        let name = o.file.to_string_lossy().into_owned();
        write_prediction_csv(&o.run, Some(&o.truth), &meta, opts.create(&name)?)?;
        o.file = opts.path(&name);
        write_smoothness_report(&o.report, &o.run, &o.truth, opts.create(&format!("smoothness_{}.csv", o.stem()))?)?;
        opts.write_svg(&format!("prediction_{}.svg", o.stem()), &prediction_plot(cfg.data.dt, o))?;
        let r = &o.report;
        summary.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            o.trajectory.label(),
            o.amplitude,
            o.start,
            r.rmse_pred_vs_truth,
            r.rmse_input_vs_truth.map(|v| v.to_string()).unwrap_or_default(),
            r.smoothness_ratio.map(|v| v.to_string()).unwrap_or_default(),
            r.max_deviation
        ));
    }
    let path = opts.path(PREDICT_SUMMARY_FILE);
    std::fs::create_dir_all(&opts.out).map_err(|e| CliError::io(&opts.out, e))?;
    std::fs::write(&path, summary).map_err(|e| CliError::io(&path, e))?;
    Ok(outcomes)
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOutcome {
    pub residual_scaling: Vec<(f64, f64)>,
    pub max_spectral_radius: Option<f64>,
    pub scatters: Vec<(ScatterConfig, ScatterReport)>,
}

fn scatter_stem(s: &ScatterConfig) -> String {
    format!("{}_s{}_m{}_{}", s.trajectory.label(), s.start, s.m, amp_tag(s.amplitude))
}

/// Runs the configured scatter experiments.
pub fn run_scatters(cfg: &ExperimentConfig, params: &NetworkParameters, trials: Option<usize>) -> CliResult<Vec<(ScatterConfig, ScatterReport)>> {
    let Some(a) = &cfg.analyze else {
        return Ok(Vec::new());
    };
    a.scatter
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if let Some(k) = trials {
                s.trials = k;
            }
            if s.start + s.m + 1 > grid_len(cfg, &s.trajectory) {
                return Err(CliError::Config(format!("scatter segment runs past {}", s.trajectory.label())));
            }
            let spec = ScatterSpec {
                trajectory: s.trajectory,
                dt: cfg.data.dt,
                start: s.start,
                m: s.m,
                amplitude: s.amplitude,
                trials: s.trials,
                seed: derive_seed_path(
                    cfg.seed,
                    &[streams::SCATTER, trajectory_key(&s.trajectory), s.start as u64, s.m as u64, s.amplitude.to_bits()],
                ),
            };
            let report = prediction_scatter(params, &spec)?;
            Ok((s, report))
        })
        .collect()
}

fn write_scatters(cfg: &ExperimentConfig, scatters: &[(ScatterConfig, ScatterReport)], opts: &Options) -> CliResult<()> {
    for (s, report) in scatters {
        write_scatter_report(report, opts.create(&format!("scatter_{}.csv", scatter_stem(s)))?)?;
        opts.write_svg(&format!("scatter_{}.svg", scatter_stem(s)), &scatter_plot(cfg.data.dt, s, report)?)?;
    }
    Ok(())
}

/// Noise propagation, contraction, residual scaling, and scatter reports.
pub fn cmd_analyze(cfg: &ExperimentConfig, ck: &Checkpoint, opts: &Options) -> CliResult<AnalyzeOutcome> {
    let ac = cfg
        .analyze
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no [analyze] section".into()))?;
    let params = &ck.params;
    let mut outcome = AnalyzeOutcome::default();
    if let Some(na) = &ac.noise {
        let spec = na.trajectory;
        if na.start + na.m > grid_len(cfg, &spec) {
            return Err(CliError::Config(format!("noise analysis runs past {}", spec.label())));
        }
        let clean = sample(&spec, 0.0, cfg.data.dt, na.start + na.m, &noise_for(cfg, &spec, 0.0, 0))?;
        let truth = clean.truth_range(na.start..na.start + na.m);
        let seed = derive_seed_path(cfg.seed, &[streams::NOISE, trajectory_key(&spec), na.start as u64]);
        let xi = noise_for(cfg, &spec, 1.0, seed).draw_xi(na.m);
        let label = spec.label();

        let report = noise_propagation(params, truth, &xi, na.amplitudes[0])?;
        write_noise_report(&report, opts.create(&format!("noise_{label}.csv"))?)?;
        let scaling = residual_scaling(params, truth, &xi, &na.amplitudes)?;
        write_residual_scaling(&scaling, opts.create(&format!("residual_scaling_{label}.csv"))?)?;
        let profile = contraction_profile(params, truth)?;
        write_contraction_report(&profile, opts.create(&format!("contraction_{label}.csv"))?)?;
        opts.write_svg(
            &format!("noise_{label}.svg"),
            &Plot {
                title: format!("noise propagation, {label}, a={}", na.amplitudes[0]),
                x_label: "step i".into(),
                y_label: "norm".into(),
                series: vec![
                    indexed("|sigma_i|", "blue", Style::Line, &report.sigma_norms()),
                    indexed("|s_i - s^_i|", "red", Style::Line, &report.deviations),
                    indexed("residual", "black", Style::Dashed, &report.residuals),
                    indexed("spectral radius", "green", Style::Line, &profile.spectral_radius),
                ],
            },
        )?;
        outcome.residual_scaling = scaling;
        outcome.max_spectral_radius = profile.spectral_radius.iter().copied().reduce(f64::max);
    }
    outcome.scatters = run_scatters(cfg, params, None)?;
    write_scatters(cfg, &outcome.scatters, opts)?;
    Ok(outcome)
}

/// Scatter experiments only, optionally with a different trial count.
pub fn cmd_demo_averaging(
    cfg: &ExperimentConfig,
    ck: &Checkpoint,
    opts: &Options,
    trials: Option<usize>,
) -> CliResult<Vec<(ScatterConfig, ScatterReport)>> {
    let scatters = run_scatters(cfg, &ck.params, trials)?;
    if scatters.is_empty() {
        return Err(CliError::Config("config has no [[analyze.scatter]] entries".into()));
    }
    write_scatters(cfg, &scatters, opts)?;
    Ok(scatters)
}

/// Trained checkpoints keyed by everything that determines them, so that
/// several configs sharing one training run train only once.
#[derive(Debug, Default)]
pub struct ModelCache {
    models: HashMap<String, TrainOutcome>,
}

impl ModelCache {
    pub fn key(cfg: &ExperimentConfig) -> String {
        let parts = (cfg.seed, &cfg.data, &cfg.network, &cfg.train, &cfg.checkpoint);
        serde_json::to_string(&parts).expect("config serializes")
    }

    pub fn get(&self, cfg: &ExperimentConfig) -> Option<&TrainOutcome> {
        self.models.get(&Self::key(cfg))
    }

    pub fn insert(&mut self, cfg: &ExperimentConfig, outcome: TrainOutcome) {
        self.models.insert(Self::key(cfg), outcome);
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub checkpoint: Checkpoint,
    pub predictions: Vec<PredictionOutcome>,
    pub analysis: Option<AnalyzeOutcome>,
}

/// `gen`, `train`, `predict`, and `analyze` in sequence, as far as the
/// config has sections for them. A training run found in `cache` is
/// written out again instead of being repeated.
pub fn run_all(
    cfg: &ExperimentConfig,
    opts: &Options,
    cache: &mut ModelCache,
    progress: &mut dyn FnMut(&EpochRecord),
) -> CliResult<RunOutcome> {
    cmd_gen(cfg, opts)?;
    let checkpoint = match cache.get(cfg) {
        Some(outcome) => {
            write_train_outputs(outcome, opts)?;
            outcome.checkpoint.clone()
        }
        None => {
            let initial = match &cfg.checkpoint {
                Some(p) => Some(load_checkpoint(p).map_err(|e| io_context(e, p))?),
                None => None,
            };
            let outcome = cmd_train(cfg, initial, opts, progress)?;
            let ck = outcome.checkpoint.clone();
            cache.insert(cfg, outcome);
            ck
        }
    };
    let predictions = match cfg.predict {
        Some(_) => cmd_predict(cfg, &checkpoint, opts, None, None)?,
        None => Vec::new(),
    };
    let analysis = match cfg.analyze {
        Some(_) => Some(cmd_analyze(cfg, &checkpoint, opts)?),
        None => None,
    };
    Ok(RunOutcome {
        checkpoint,
        predictions,
        analysis,
    })
}

fn indexed(label: &str, color: &'static str, style: Style, values: &[f64]) -> Series {
    Series::new(
        label,
        color,
        style,
        values.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect(),
    )
}

/// Points of a row-major `len × d` buffer as plot coordinates: `(t, value)`
/// in 1D, the trajectory plane in 2D.
fn coords(values: &[f64], d: usize, t0: f64, dt: f64) -> Vec<(f64, f64)> {
    values
        .chunks_exact(d)
        .enumerate()
        .map(|(j, v)| if d == 1 { (t0 + j as f64 * dt, v[0]) } else { (v[0], v[1]) })
        .collect()
}

fn axis_labels(d: usize) -> (String, String) {
    if d == 1 {
        ("t".into(), "value".into())
    } else {
        ("x".into(), "y".into())
    }
}

fn sequence_plot(spec: &TrajectorySpec, seq: &NoisySequence) -> Plot {
    let shown = seq.len().min(300);
    let d = seq.dim;
    let (x_label, y_label) = axis_labels(d);
    Plot {
        title: format!("{} training sequence, a0={}", spec.label(), seq.amplitude_used),
        x_label,
        y_label,
        series: vec![
            Series::new("noisy", "green", Style::Dots, coords(seq.points_range(0..shown), d, 0.0, seq.dt)),
            Series::new("smooth", "black", Style::Line, coords(seq.truth_range(0..shown), d, 0.0, seq.dt)),
        ],
    }
}

fn training_plot(records: &[EpochRecord]) -> Plot {
    let mut series = vec![Series::new(
        "train",
        "blue",
        Style::Line,
        records.iter().map(|r| (r.epoch as f64, r.train_error)).collect(),
    )];
    if records.iter().all(|r| r.validation_error.is_some()) {
        series.push(Series::new(
            "validation",
            "red",
            Style::Line,
            records.iter().map(|r| (r.epoch as f64, r.validation_error.unwrap_or(f64::NAN))).collect(),
        ));
    }
    Plot {
        title: "training error".into(),
        x_label: "epoch".into(),
        y_label: "mean squared error".into(),
        series,
    }
}

fn prediction_plot(dt: f64, o: &PredictionOutcome) -> Plot {
    let d = o.run.dim;
    let m = o.input.len() / d;
    let t_in = o.start as f64 * dt;
    let t_out = (o.start + m) as f64 * dt;
    let (x_label, y_label) = axis_labels(d);
    Plot {
        title: format!(
            "{} {}, a_i={}, m={m}, p={}",
            o.trajectory.label(),
            o.run.algorithm,
            o.amplitude,
            o.run.horizon
        ),
        x_label,
        y_label,
        series: vec![
            Series::new("input", "green", Style::Dots, coords(&o.input, d, t_in, dt)),
            Series::new("data", "red", Style::Dots, coords(&o.noisy_continuation, d, t_out, dt)),
            Series::new("prediction", "blue", Style::Line, coords(&o.run.predictions, d, t_out, dt)),
            Series::new("smooth", "black", Style::Dashed, coords(&o.truth, d, t_out, dt)),
        ],
    }
}

fn scatter_plot(dt: f64, s: &ScatterConfig, r: &ScatterReport) -> CliResult<Plot> {
    let d = r.mean.len();
    let target = s.start + s.m;
    let clean = sample(&s.trajectory, 0.0, dt, target + 1, &NoiseModel::for_spec(&s.trajectory, 0.0, 0))?;
    let curve = coords(clean.truth_range(s.start..target + 1), d, s.start as f64 * dt, dt);
    let at = |v: &[f64], shift: f64| if d == 1 { (target as f64 * dt + shift, v[0]) } else { (v[0], v[1]) };
    let (x_label, y_label) = axis_labels(d);
    Ok(Plot {
        title: format!("{} one-step scatter, {} trials, a={}", s.trajectory.label(), s.trials, s.amplitude),
        x_label,
        y_label,
        series: vec![
            Series::new("smooth", "black", Style::Line, curve),
            Series::new("noisy targets", "red", Style::Dots, r.noisy_targets.iter().map(|v| at(v, 0.25 * dt)).collect()),
            Series::new("predictions", "blue", Style::Dots, r.predictions.iter().map(|v| at(v, 0.0)).collect()),
            Series::new("mean", "black", Style::Dots, vec![at(&r.mean, 0.0)]),
        ],
    })
}
