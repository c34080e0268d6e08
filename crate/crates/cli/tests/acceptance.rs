//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! The cheap checks run on random networks. The rest train the shipped
//! presets (twice, to check byte-level reproducibility), so a full run
//! takes tens of minutes on one core.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use prn_cli::experiment::{self, streams, ModelCache, Options, PredictionOutcome, RunOutcome};
use prn_cli::ExperimentConfig;
use prn_core::analysis::{prediction_scatter, residual_scaling, ScatterSpec};
use prn_core::predict::{max_abs_difference, predict_ew, predict_ml};
use prn_core::rnn::{init_params, CellKind, NetworkParameters};
use prn_core::seed::derive_seed_path;
use prn_core::training::{backward, finite_diff_grad, train, TrainConfig};
use prn_core::trajectory::{build_training_corpus, sample, NoiseModel, Segment, TrajectorySpec};

type Check = Result<(bool, String), String>;

const PRESETS: [&str; 9] = [
    "sine-triangle-a015",
    "parabolas-a040",
    "fig1",
    "fig2",
    "fig2a",
    "fig4",
    "fig4a",
    "fig5",
    "fig6",
];

fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn load_preset(name: &str) -> Result<ExperimentConfig, String> {
    ExperimentConfig::load(&presets_dir().join(format!("{name}.toml"))).map_err(|e| format!("{name}: {e}"))
}

/// Uniform values on `[-1, 1]`.
fn uniform(count: usize, seed: u64) -> Vec<f64> {
    NoiseModel::for_spec(&TrajectorySpec::Sine, 1.0, seed).draw_xi(count)
}

fn noisy_sine(start: usize, len: usize, a: f64, seed: u64) -> Vec<f64> {
    let spec = TrajectorySpec::Sine;
    let seq = sample(&spec, 0.0, 0.01, start + len, &NoiseModel::for_spec(&spec, a, seed)).unwrap();
    seq.points_range(start..start + len).to_vec()
}

fn quickly_trained(kind: CellKind, n: usize, seed: u64) -> NetworkParameters {
    let spec = TrajectorySpec::Sine;
    let seq = sample(&spec, 0.0, 0.01, 400, &NoiseModel::for_spec(&spec, 0.15, seed)).unwrap();
    let corpus = build_training_corpus(&[seq], 5, 50, 200, seed).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        shuffle_seed: seed,
        ..TrainConfig::default()
    };
    train(init_params(kind, n, 1, seed).unwrap(), &corpus, &cfg).unwrap().final_params
}

fn ac1() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let kind = if i % 2 == 0 { CellKind::Basic } else { CellKind::Lstm };
        let n = if (i / 2) % 2 == 0 { 5 } else { 20 };
        let seed = derive_seed_path(1, &[i]);
        let params = if (i / 4) % 2 == 0 {
            init_params(kind, n, 1, seed).unwrap()
        } else {
            quickly_trained(kind, n, seed)
        };
        for m in [5, 50] {
            let input = noisy_sine(100, m, 0.15, seed + m as u64);
            let ml = predict_ml(&params, &input, 100).map_err(|e| e.to_string())?;
            let ew = predict_ew(&params, &input, 100, None).map_err(|e| e.to_string())?;
            worst = worst.max(max_abs_difference(&ml, &ew));
        }
    }
    Ok((worst <= 1e-9, format!("50 networks, max |ML - EW| = {worst:.3e} (limit 1e-9)")))
}

fn relative_error(g: f64, fd: f64) -> f64 {
    (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6)
}

fn ac2() -> Check {
    let mut worst: f64 = 0.0;
    let mut trials = 0;
    for trial in 0..50u64 {
        let kind = if trial % 2 == 0 { CellKind::Basic } else { CellKind::Lstm };
        let m = [1, 5, 50][(trial as usize / 2) % 3];
        let seed = derive_seed_path(2, &[trial]);
        let n = 2 + (trial as usize % 5);
        let d = 1 + (trial as usize / 6) % 2;
        let mut p = init_params(kind, n, d, seed).unwrap();
        let jitter = uniform(p.len(), seed + 1);
        for (v, j) in p.as_mut_slice().iter_mut().zip(jitter) {
            *v += 0.2 * j;
        }
        let seg = Segment::new(uniform(m * d, seed + 2), uniform(d, seed + 3));
        let g = backward(&p, &seg).map_err(|e| e.to_string())?;
        let fd = finite_diff_grad(&p, &seg, 1e-5).map_err(|e| e.to_string())?;
        worst = g.iter().zip(&fd).map(|(&a, &b)| relative_error(a, b)).fold(worst, f64::max);
        trials += 1;
    }
    Ok((worst <= 1e-4, format!("{trials} trials, worst relative error {worst:.3e} (limit 1e-4)")))
}

fn ac3() -> Check {
    let spec = TrajectorySpec::Sine;
    let truth = sample(&spec, 0.0, 0.01, 50, &NoiseModel::for_spec(&spec, 0.0, 0)).unwrap().truth;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 0..10u64 {
        let kind = if k % 2 == 0 { CellKind::Basic } else { CellKind::Lstm };
        let p = init_params(kind, 20, 1, derive_seed_path(3, &[k])).unwrap();
        let xi = uniform(50, derive_seed_path(3, &[k, 1]));
        let table = residual_scaling(&p, &truth, &xi, &[0.2, 0.1, 0.05, 0.025]).map_err(|e| e.to_string())?;
        for w in table.windows(2) {
            let f = w[0].1 / w[1].1;
            lo = lo.min(f);
            hi = hi.max(f);
        }
    }
    let ok = (3.0..=5.0).contains(&lo) && (3.0..=5.0).contains(&hi);
    Ok((ok, format!("10 networks, shrink factor per halving in [{lo:.3}, {hi:.3}] (required within [3, 5])")))
}

/// Root-mean-square pooling of per-start RMSE values.
fn pooled(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

fn select<'a>(outcomes: &'a [PredictionOutcome], label: &str, a: f64) -> Vec<&'a PredictionOutcome> {
    outcomes
        .iter()
        .filter(|o| o.trajectory.label() == label && o.amplitude == a)
        .collect()
}

fn pooled_ratio(sel: &[&PredictionOutcome]) -> f64 {
    let pred = pooled(sel.iter().map(|o| o.report.rmse_pred_vs_truth));
    let input = pooled(sel.iter().map(|o| o.report.rmse_input_vs_truth.unwrap_or(f64::NAN)));
    pred / input
}

fn ac4(runs: &BTreeMap<&str, RunOutcome>) -> Check {
    let fig2a = &runs["fig2a"].predictions;
    let mut ok = true;
    let mut parts = Vec::new();
    for wave in ["sine", "triangle"] {
        let sel = select(fig2a, wave, 0.15);
        let ratio = pooled_ratio(&sel);
        let each: Vec<String> = sel
            .iter()
            .map(|o| format!("{:.2}", o.report.smoothness_ratio.unwrap_or(f64::NAN)))
            .collect();
        ok &= ratio <= 0.5;
        parts.push(format!("{wave} {ratio:.3} (per start {})", each.join(" ")));
    }
    Ok((ok, format!("smoothness ratio at a_i=0.15, p=200: {} (limit 0.5)", parts.join("; "))))
}

fn ac5(runs: &BTreeMap<&str, RunOutcome>) -> Check {
    let clean = select(&runs["fig1"].predictions, "sine", 0.75);
    let noisy = select(&runs["fig2a"].predictions, "sine", 0.75);
    if clean.len() != noisy.len() || clean.is_empty() {
        return Err("fig1 and fig2a predict different cases at a_i=0.75".into());
    }
    for (c, n) in clean.iter().zip(&noisy) {
        if c.start != n.start || c.input != n.input {
            return Err(format!("inputs differ at start {}", c.start));
        }
    }
    let rc = pooled(clean.iter().map(|o| o.report.rmse_pred_vs_truth));
    let rn = pooled(noisy.iter().map(|o| o.report.rmse_pred_vs_truth));
    let ratio = rc / rn;
    Ok((
        ratio >= 2.0,
        format!("sine at a_i=0.75: RMSE a0=0 net {rc:.4}, a0=0.15 net {rn:.4}, ratio {ratio:.2} (required >= 2)"),
    ))
}

fn ac6(cfg: &ExperimentConfig, trained: &NetworkParameters) -> Check {
    let a0 = cfg.data.a0;
    let bound = 0.3 * a0;
    let scatter = cfg
        .analyze
        .as_ref()
        .and_then(|a| a.scatter.iter().find(|s| s.m == 50))
        .ok_or("fig5 has no m=50 scatter")?;
    let spec_at = |start: usize, seed_tag: u64| ScatterSpec {
        trajectory: scatter.trajectory,
        dt: cfg.data.dt,
        start,
        m: scatter.m,
        amplitude: a0,
        trials: 100,
        seed: derive_seed_path(cfg.seed, &[streams::SCATTER, seed_tag, start as u64]),
    };
    let main = prediction_scatter(trained, &spec_at(scatter.start, 0)).map_err(|e| e.to_string())?;
    let err = main.mean_error();

    let untrained = init_params(cfg.network.cell, cfg.network.n, cfg.dim(), derive_seed_path(cfg.seed, &[streams::INIT]))
        .map_err(|e| e.to_string())?;
    let starts: Vec<usize> = (0..20).map(|k| 1000 + 37 * k).collect();
    let mut untrained_fail = 0;
    let mut trained_pass = 0;
    for &s in &starts {
        let spec = spec_at(s, 1);
        if prediction_scatter(&untrained, &spec).map_err(|e| e.to_string())?.mean_error() > bound {
            untrained_fail += 1;
        }
        if prediction_scatter(trained, &spec).map_err(|e| e.to_string())?.mean_error() <= bound {
            trained_pass += 1;
        }
    }
    let ok = err <= bound && untrained_fail * 5 >= starts.len() * 4;
    Ok((
        ok,
        format!(
            "K=100, start {} m=50: |mean - f| = {err:.4} (limit {bound:.3}); untrained net fails on {untrained_fail}/{} segments (required >= 80%); trained net passes on {trained_pass}/{}",
            scatter.start,
            starts.len(),
            starts.len()
        ),
    ))
}

fn ac7(runs: &BTreeMap<&str, RunOutcome>) -> Check {
    let b4 = "parabola_h1_b4";
    let desc = runs["fig4"]
        .predictions
        .iter()
        .find(|o| o.trajectory.label() == b4 && o.amplitude == 0.15 && o.start == 31)
        .ok_or("fig4 has no descending b=4 case at a_i=0.15")?;
    let ratio = desc.report.smoothness_ratio.unwrap_or(f64::NAN);
    let mut record = Vec::new();
    for b in ["parabola_h1_b1", "parabola_h1_b2", b4] {
        let r15 = pooled(select(&runs["fig4"].predictions, b, 0.75).iter().map(|o| o.report.rmse_pred_vs_truth));
        let r40 = pooled(select(&runs["fig4a"].predictions, b, 0.75).iter().map(|o| o.report.rmse_pred_vs_truth));
        record.push(format!("{b} {r40:.4} vs {r15:.4}"));
    }
    Ok((
        ratio <= 0.7,
        format!(
            "b=4 descending ratio {ratio:.3} (limit 0.7); recorded RMSE at a_i=0.75, a0=0.4 vs a0=0.15: {}",
            record.join(", ")
        ),
    ))
}

fn csv_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(csv_files(&path));
        } else if path.extension().is_some_and(|e| e == "csv") {
            let bytes = fs::read(&path).unwrap();
            out.push((path.strip_prefix(dir).unwrap().to_path_buf(), bytes));
        }
    }
    out.sort();
    out
}

fn run_presets(root: &Path) -> Result<BTreeMap<&'static str, RunOutcome>, String> {
    let mut cache = ModelCache::default();
    let mut runs = BTreeMap::new();
    for name in PRESETS {
        let cfg = load_preset(name)?;
        let t = Instant::now();
        let out = experiment::run_all(&cfg, &Options::new(root.join(name)), &mut cache, &mut |_| {})
            .map_err(|e| format!("{name}: {e}"))?;
        eprintln!("  {name}: {:.0}s", t.elapsed().as_secs_f64());
        runs.insert(name, out);
    }
    Ok(runs)
}

fn ac8(first: &Path, second: &Path) -> Check {
    let a = csv_files(first);
    let b = csv_files(second);
    let names = |v: &[(PathBuf, Vec<u8>)]| v.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>();
    if names(&a) != names(&b) {
        return Ok((false, "the two runs wrote different file sets".into()));
    }
    let differing: Vec<String> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} presets, {} CSV files byte-identical across two runs", PRESETS.len(), a.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    ))
}

fn report(results: &mut Vec<bool>, name: &str, check: Check) {
    let (ok, detail) = check.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!("{name} {}: {detail}", if ok { "PASS" } else { "FAIL" });
    results.push(ok);
}

fn main() {
    let mut results = Vec::new();
    report(&mut results, "AC-1", ac1());
    report(&mut results, "AC-2", ac2());
    report(&mut results, "AC-3", ac3());

    let scratch = tempfile::tempdir().expect("temp dir");
    let first = scratch.path().join("first");
    let second = scratch.path().join("second");
    eprintln!("running presets (first pass)");
    let runs = run_presets(&first);
    eprintln!("running presets (second pass)");
    let rerun = run_presets(&second);

    match &runs {
        Ok(runs) => {
            report(&mut results, "AC-4", ac4(runs));
            report(&mut results, "AC-5", ac5(runs));
            let fig5 = load_preset("fig5");
            let check = fig5.and_then(|cfg| ac6(&cfg, &runs["fig5"].checkpoint.params));
            report(&mut results, "AC-6", check);
            report(&mut results, "AC-7", ac7(runs));
        }
        Err(e) => {
            for ac in ["AC-4", "AC-5", "AC-6", "AC-7"] {
                report(&mut results, ac, Err(e.clone()));
            }
        }
    }
    let det = match (&runs, &rerun) {
        (Ok(_), Ok(_)) => ac8(&first, &second),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    report(&mut results, "AC-8", det);

    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
