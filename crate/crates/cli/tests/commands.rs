use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prn_core::io::{load_checkpoint, read_prediction_csv};

const TINY: &str = r#"
version = 1
name = "tiny"
seed = 17

[data]
trajectories = [{ kind = "sine" }]
a0 = 0.15
segments_per_trajectory = 120
sequence_len = 300
max_len = 20

[network]
cell = "lstm"
n = 4

[train]
epochs = 2

[predict]
input_amplitudes = [0.0, 0.15]
m = 10
p = 25
starts = [0, 7]

[analyze.noise]
trajectory = { kind = "sine" }
start = 20
m = 15
amplitudes = [0.2, 0.1]

[[analyze.scatter]]
trajectory = { kind = "sine" }
start = 30
m = 10
amplitude = 0.15
trials = 5
"#;

struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
        Sandbox { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn prn(&self, out: &str, args: &[&str]) -> Output {
        let config = self.path("tiny.toml");
        let out = self.path(out);
        Command::new(env!("CARGO_BIN_EXE_prn"))
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .arg("-q")
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, out: &str, args: &[&str]) {
        let o = self.prn(out, args);
        assert!(o.status.success(), "prn {args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn gen_is_reproducible_and_seeded() {
    let sb = Sandbox::new();
    sb.ok("a", &["gen"]);
    sb.ok("b", &["gen"]);
    sb.ok("c", &["--seed", "18", "gen"]);
    let corpus = |d: &str| fs::read(sb.path(d).join("corpus.jsonl")).unwrap();
    assert_eq!(corpus("a"), corpus("b"));
    assert_ne!(corpus("a"), corpus("c"));
    assert_eq!(csv_files(&sb.path("a")), csv_files(&sb.path("b")));
}

#[test]
fn run_twice_gives_identical_csvs() {
    let sb = Sandbox::new();
    sb.ok("a", &["run"]);
    sb.ok("b", &["run"]);
    let a = csv_files(&sb.path("a"));
    assert!(a.iter().any(|(n, _)| n.starts_with("prediction_")));
    assert!(a.iter().any(|(n, _)| n.starts_with("scatter_")));
    assert!(a.iter().any(|(n, _)| n == "train_log.csv"));
    assert_eq!(a, csv_files(&sb.path("b")));
}

#[test]
fn memoryless_files_match_expanding_window() {
    let sb = Sandbox::new();
    sb.ok("ml", &["train"]);
    sb.ok("ml", &["predict", "--algo", "ml"]);
    let ck = sb.path("ml/checkpoint.json");
    sb.ok("ew", &["predict", "--algo", "ew", "--checkpoint", ck.to_str().unwrap()]);
    let name = "prediction_sine_a0.15_s7.csv";
    let ml = read_prediction_csv(fs::File::open(sb.path("ml").join(name)).unwrap()).unwrap();
    let ew = read_prediction_csv(fs::File::open(sb.path("ew").join(name)).unwrap()).unwrap();
    assert_eq!(ml.predictions.len(), 25);
    let worst = ml
        .predictions
        .iter()
        .zip(&ew.predictions)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-9, "{worst:e}");
}

#[test]
fn horizon_one_writes_one_row() {
    let sb = Sandbox::new();
    sb.ok("o", &["train", "--epochs", "1"]);
    sb.ok("o", &["predict", "-p", "1"]);
    let t = read_prediction_csv(fs::File::open(sb.path("o/prediction_sine_a0_s0.csv")).unwrap()).unwrap();
    assert_eq!(t.predictions.len(), 1);
    assert!(t.meta.contains(&("p".to_string(), "1".to_string())));
}

#[test]
fn zero_epochs_passes_the_checkpoint_through() {
    let sb = Sandbox::new();
    sb.ok("first", &["train", "--epochs", "1"]);
    let ck = sb.path("first/checkpoint.json");
    sb.ok("again", &["train", "--epochs", "0", "--checkpoint", ck.to_str().unwrap()]);
    let a = load_checkpoint(&ck).unwrap();
    let b = load_checkpoint(&sb.path("again/checkpoint.json")).unwrap();
    assert_eq!(a.id(), b.id());
    assert_eq!(fs::read(&ck).unwrap(), fs::read(sb.path("again/checkpoint.json")).unwrap());
}

#[test]
fn resumed_training_records_its_origin() {
    let sb = Sandbox::new();
    sb.ok("first", &["train", "--epochs", "1"]);
    let ck = sb.path("first/checkpoint.json");
    sb.ok("more", &["train", "--epochs", "1", "--checkpoint", ck.to_str().unwrap()]);
    let first = load_checkpoint(&ck).unwrap();
    let more = load_checkpoint(&sb.path("more/checkpoint.json")).unwrap();
    assert_eq!(more.metadata.get("resumed_from"), Some(&first.id()));
    assert_eq!(more.metadata.get("epochs").map(String::as_str), Some("2"));
}

#[test]
fn exit_codes() {
    let sb = Sandbox::new();
    // Nothing trained yet.
    assert_eq!(sb.prn("x", &["predict"]).status.code(), Some(2));

    fs::write(sb.path("bad.toml"), TINY.replace("a0 = 0.15", "a0 = 0.15\nbogus = 1")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_prn"))
        .args(["--config", sb.path("bad.toml").to_str().unwrap(), "gen"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    fs::create_dir_all(sb.path("y")).unwrap();
    fs::write(sb.path("y/checkpoint.json"), "{\"format\": \"something else\"}").unwrap();
    assert_eq!(sb.prn("y", &["predict"]).status.code(), Some(4));

    let missing = sb.path("nowhere.json");
    assert_eq!(
        sb.prn("z", &["predict", "--checkpoint", missing.to_str().unwrap()]).status.code(),
        Some(4)
    );
}

#[test]
fn svg_output_is_opt_in() {
    let sb = Sandbox::new();
    sb.ok("plain", &["gen"]);
    sb.ok("plots", &["--format", "csv+svg", "gen"]);
    let has_svg = |d: &str| {
        fs::read_dir(sb.path(d))
            .unwrap()
            .any(|e| e.unwrap().path().extension().is_some_and(|x| x == "svg"))
    };
    assert!(!has_svg("plain"));
    assert!(has_svg("plots"));
}
