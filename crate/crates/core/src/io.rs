//! On-disk formats.
//!
//! * sequence CSV: `t,g_1[,g_2],f_1[,f_2]`
//! * corpus: JSON lines, a header object followed by one object per segment
//! * checkpoint: one JSON document with named row-major arrays
//! * prediction, training-log, and report CSVs
//!
//! Floats are written in Rust's shortest round-trip form, so reading a
//! file back reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{ContractionProfile, NoiseReport, ScatterReport, SmoothnessReport};
use crate::error::{Error, Result};
use crate::predict::PredictionRun;
use crate::rnn::{Activation, CellKind, NetworkParameters};
use crate::training::EpochRecord;
use crate::trajectory::{NoisySequence, Segment, TrajectorySpec, TrainingCorpus};

pub const CORPUS_FORMAT: &str = "prn-corpus";
pub const CORPUS_VERSION: u32 = 1;
pub const CHECKPOINT_FORMAT: &str = "prn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

fn join(values: impl IntoIterator<Item = f64>) -> String {
    let mut s = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{v}").unwrap();
    }
    s
}

fn numbered(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}_{i}")).collect()
}

// ---------------------------------------------------------------------------
// Sequence CSV

pub fn write_sequence_csv<W: Write>(seq: &NoisySequence, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    let d = seq.dim;
    let mut header = vec!["t".to_string()];
    header.extend(numbered("g", d));
    header.extend(numbered("f", d));
    writeln!(w, "{}", header.join(","))?;
    for j in 0..seq.len() {
        let row = std::iter::once(seq.time(j))
            .chain(seq.point(j).iter().copied())
            .chain(seq.truth_at(j).iter().copied());
        writeln!(w, "{}", join(row))?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a sequence CSV: `(t, g, f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceTable {
    pub dim: usize,
    pub t: Vec<f64>,
    pub points: Vec<f64>,
    pub truth: Vec<f64>,
}

impl SequenceTable {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: {s:?} is not a number")))
}

pub fn read_sequence_csv<R: Read>(input: R) -> Result<SequenceTable> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty sequence file".into()))??;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let d = match cols.as_slice() {
        ["t", "g_1", "f_1"] => 1,
        ["t", "g_1", "g_2", "f_1", "f_2"] => 2,
        _ => return Err(Error::Format(format!("unexpected sequence header {header:?}"))),
    };
    let mut table = SequenceTable {
        dim: d,
        t: Vec::new(),
        points: Vec::new(),
        truth: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|v| parse_f64(v, i + 2))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != 1 + 2 * d {
            return Err(Error::Format(format!("line {}: expected {} fields", i + 2, 1 + 2 * d)));
        }
        table.t.push(vals[0]);
        table.points.extend_from_slice(&vals[1..1 + d]);
        table.truth.extend_from_slice(&vals[1 + d..]);
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Corpus

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusHeader {
    format: String,
    version: u32,
    dim: usize,
    min_len: usize,
    max_len: usize,
    count: usize,
    sequence_count: usize,
    source_specs: Vec<TrajectorySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentRecord {
    m: usize,
    input: Vec<f64>,
    target: Vec<f64>,
    source: usize,
    start: usize,
}

pub fn write_corpus<W: Write>(corpus: &TrainingCorpus, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    let header = CorpusHeader {
        format: CORPUS_FORMAT.into(),
        version: CORPUS_VERSION,
        dim: corpus.dim,
        min_len: corpus.min_len,
        max_len: corpus.max_len,
        count: corpus.len(),
        sequence_count: corpus.sequence_count,
        source_specs: corpus.source_specs.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for seg in &corpus.segments {
        let rec = SegmentRecord {
            m: seg.len(),
            input: seg.input.clone(),
            target: seg.target.clone(),
            source: seg.source,
            start: seg.start,
        };
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_corpus<R: Read>(input: R) -> Result<TrainingCorpus> {
    let mut lines = BufReader::new(input).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty corpus file".into()))??;
    let header: CorpusHeader = serde_json::from_str(&first)?;
    if header.format != CORPUS_FORMAT {
        return Err(Error::Format(format!("not a corpus file (format {:?})", header.format)));
    }
    if header.version != CORPUS_VERSION {
        return Err(Error::Format(format!(
            "corpus format version {} is not supported (expected {CORPUS_VERSION})",
            header.version
        )));
    }
    let mut segments = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SegmentRecord = serde_json::from_str(&line)?;
        if rec.target.len() != header.dim || rec.input.len() != rec.m * header.dim {
            return Err(Error::Format(format!("segment {i} has inconsistent shape")));
        }
        segments.push(Segment {
            input: rec.input,
            target: rec.target,
            source: rec.source,
            start: rec.start,
        });
    }
    if segments.len() != header.count {
        return Err(Error::Format(format!(
            "header announces {} segments, file has {}",
            header.count,
            segments.len()
        )));
    }
    Ok(TrainingCorpus {
        dim: header.dim,
        min_len: header.min_len,
        max_len: header.max_len,
        source_specs: header.source_specs,
        sequence_count: header.sequence_count,
        segments,
    })
}

// ---------------------------------------------------------------------------
// Checkpoint

/// Where a set of parameters came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedLineage {
    pub master_seed: Option<u64>,
    pub init_seed: Option<u64>,
    pub shuffle_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParameters,
    pub lineage: SeedLineage,
    /// Free-form training metadata (recipe, epochs, final errors, ...).
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(params: NetworkParameters) -> Self {
        Checkpoint {
            params,
            lineage: SeedLineage::default(),
            metadata: BTreeMap::new(),
        }
    }

    /// FNV-1a digest of the parameter bits, as 16 hex digits.
    pub fn id(&self) -> String {
        params_digest(&self.params)
    }
}

pub fn params_digest(params: &NetworkParameters) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    feed(params.kind().to_string().as_bytes());
    feed(&(params.n() as u64).to_le_bytes());
    feed(&(params.d() as u64).to_le_bytes());
    for v in params.as_slice() {
        feed(&v.to_bits().to_le_bytes());
    }
    format!("{h:016x}")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedArray {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    cell_kind: CellKind,
    n: usize,
    d: usize,
    #[serde(default)]
    activation: Activation,
    seed_lineage: SeedLineage,
    #[serde(default)]
    training: BTreeMap<String, String>,
    arrays: Vec<NamedArray>,
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, out: W) -> Result<()> {
    let p = &ckpt.params;
    if !p.as_slice().iter().all(|v| v.is_finite()) {
        return Err(Error::Format("cannot store non-finite parameters".into()));
    }
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        cell_kind: p.kind(),
        n: p.n(),
        d: p.d(),
        activation: p.activation(),
        seed_lineage: ckpt.lineage.clone(),
        training: ckpt.metadata.clone(),
        arrays: p
            .blocks()
            .into_iter()
            .map(|b| NamedArray {
                data: p.as_slice()[b.range()].to_vec(),
                name: b.name,
                rows: b.rows,
                cols: b.cols,
            })
            .collect(),
    };
    let mut w = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut w, &file)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<Checkpoint> {
    let file: CheckpointFile = serde_json::from_reader(BufReader::new(input))?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(Error::Format(format!("not a checkpoint (format {:?})", file.format)));
    }
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "checkpoint format version {} is not supported (expected {CHECKPOINT_VERSION})",
            file.version
        )));
    }
    let mut params = NetworkParameters::zeros(file.cell_kind, file.n, file.d)?.with_activation(file.activation);
    let blocks = params.blocks();
    if blocks.len() != file.arrays.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} arrays, a {} network needs {}",
            file.arrays.len(),
            file.cell_kind,
            blocks.len()
        )));
    }
    for (block, arr) in blocks.iter().zip(&file.arrays) {
        if arr.name != block.name || arr.rows != block.rows || arr.cols != block.cols || arr.data.len() != block.len() {
            return Err(Error::Format(format!(
                "array {:?} ({}x{}) does not match expected {:?} ({}x{})",
                arr.name, arr.rows, arr.cols, block.name, block.rows, block.cols
            )));
        }
        params.as_mut_slice()[block.range()].copy_from_slice(&arr.data);
    }
    Ok(Checkpoint {
        params,
        lineage: file.seed_lineage,
        metadata: file.training,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    write_checkpoint(ckpt, std::fs::File::create(path)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(std::fs::File::open(path)?)
}

// ---------------------------------------------------------------------------
// Training log

pub fn write_training_log<W: Write>(records: &[EpochRecord], out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "epoch,train_error,val_error,clip_events")?;
    for r in records {
        let val = r.validation_error.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", r.epoch, r.train_error, val, r.clip_events)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Prediction CSV

/// Run metadata written as `# key=value` comment lines.
#[derive(Debug, Clone, Default)]
pub struct PredictionMeta {
    pub checkpoint_id: Option<String>,
    pub extra: Vec<(String, String)>,
}

pub fn write_prediction_csv<W: Write>(
    run: &PredictionRun,
    truth: Option<&[f64]>,
    meta: &PredictionMeta,
    out: W,
) -> Result<()> {
    let d = run.dim;
    if let Some(t) = truth {
        if t.len() != run.predictions.len() {
            return Err(Error::invalid("ground truth length differs from the prediction"));
        }
    }
    let mut w = BufWriter::new(out);
    writeln!(w, "# algorithm={}", run.algorithm)?;
    writeln!(w, "# m={}", run.input_len())?;
    writeln!(w, "# p={}", run.horizon)?;
    match run.window_cap {
        Some(c) => writeln!(w, "# cap={c}")?,
        None => writeln!(w, "# cap=none")?,
    }
    writeln!(w, "# checkpoint={}", meta.checkpoint_id.as_deref().unwrap_or("none"))?;
    for (k, v) in &meta.extra {
        writeln!(w, "# {k}={v}")?;
    }
    let mut header = vec!["round".to_string()];
    header.extend(numbered("xbar", d));
    if truth.is_some() {
        header.extend(numbered("f", d));
    }
    writeln!(w, "{}", header.join(","))?;
    for k in 0..run.horizon {
        let mut row: Vec<f64> = run.prediction(k).to_vec();
        if let Some(t) = truth {
            row.extend_from_slice(&t[k * d..(k + 1) * d]);
        }
        writeln!(w, "{},{}", k + 1, join(row))?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed prediction CSV: metadata comments and the `xbar` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub meta: Vec<(String, String)>,
    pub dim: usize,
    pub predictions: Vec<f64>,
    pub truth: Option<Vec<f64>>,
}

pub fn read_prediction_csv<R: Read>(input: R) -> Result<PredictionTable> {
    let mut meta = Vec::new();
    let mut header: Option<Vec<String>> = None;
    let mut predictions = Vec::new();
    let mut truth = Vec::new();
    let mut dim = 0;
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.trim().split_once('=') {
                meta.push((k.to_string(), v.to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        match &header {
            None => {
                let cols: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
                dim = cols.iter().filter(|c| c.starts_with("xbar_")).count();
                if dim == 0 || cols[0] != "round" {
                    return Err(Error::Format(format!("unexpected prediction header {line:?}")));
                }
                header = Some(cols);
            }
            Some(cols) => {
                let vals = line
                    .split(',')
                    .map(|v| parse_f64(v, i + 1))
                    .collect::<Result<Vec<_>>>()?;
                if vals.len() != cols.len() {
                    return Err(Error::Format(format!("line {}: wrong field count", i + 1)));
                }
                predictions.extend_from_slice(&vals[1..1 + dim]);
                truth.extend_from_slice(&vals[1 + dim..]);
            }
        }
    }
    let has_truth = header.as_ref().is_some_and(|h| h.len() > 1 + dim);
    Ok(PredictionTable {
        meta,
        dim,
        predictions,
        truth: has_truth.then_some(truth),
    })
}

// ---------------------------------------------------------------------------
// Reports

pub fn write_noise_report<W: Write>(report: &NoiseReport, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "# amplitude={}", report.amplitude)?;
    writeln!(w, "i,sigma_norm,jacobian_sr,residual")?;
    for (i, ((s, sr), r)) in report
        .sigma_norms()
        .into_iter()
        .zip(&report.jacobian_sr)
        .zip(&report.residuals)
        .enumerate()
    {
        writeln!(w, "{},{},{},{}", i + 1, s, sr, r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_smoothness_report<W: Write>(
    report: &SmoothnessReport,
    run: &PredictionRun,
    truth: &[f64],
    out: W,
) -> Result<()> {
    let d = run.dim;
    let mut w = BufWriter::new(out);
    let mut header = vec!["round".to_string()];
    if d == 1 {
        header.push("pred".into());
        header.push("truth".into());
    } else {
        header.extend(numbered("pred", d));
        header.extend(numbered("truth", d));
    }
    header.push("deviation".into());
    writeln!(w, "{}", header.join(","))?;
    for k in 0..run.horizon {
        let row = run
            .prediction(k)
            .iter()
            .chain(&truth[k * d..(k + 1) * d])
            .copied()
            .chain(std::iter::once(report.per_step_deviation[k]));
        writeln!(w, "{},{}", k + 1, join(row))?;
    }
    writeln!(w, "# rmse_pred_vs_truth={}", report.rmse_pred_vs_truth)?;
    if let Some(v) = report.rmse_input_vs_truth {
        writeln!(w, "# rmse_input_vs_truth={v}")?;
    }
    if let Some(v) = report.smoothness_ratio {
        writeln!(w, "# smoothness_ratio={v}")?;
    }
    writeln!(w, "# max_deviation={}", report.max_deviation)?;
    w.flush()?;
    Ok(())
}

pub fn write_scatter_report<W: Write>(report: &ScatterReport, out: W) -> Result<()> {
    let d = report.mean.len();
    let mut w = BufWriter::new(out);
    let mut header = vec!["trial".to_string()];
    if d == 1 {
        header.push("pred".into());
    } else {
        header.extend(numbered("pred", d));
    }
    writeln!(w, "{}", header.join(","))?;
    for (k, p) in report.predictions.iter().enumerate() {
        writeln!(w, "{},{}", k + 1, join(p.iter().copied()))?;
    }
    writeln!(w, "mean,{}", join(report.mean.iter().copied()))?;
    writeln!(w, "truth,{}", join(report.truth_target.iter().copied()))?;
    w.flush()?;
    Ok(())
}

pub fn write_contraction_report<W: Write>(profile: &ContractionProfile, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "i,spectral_radius,operator_norm")?;
    for (i, (r, s)) in profile.spectral_radius.iter().zip(&profile.operator_norm).enumerate() {
        writeln!(w, "{},{r},{s}", i + 1)?;
    }
    w.flush()?;
    Ok(())
}

/// `a,max_residual,shrink_factor` rows.
pub fn write_residual_scaling<W: Write>(table: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "a,max_residual,shrink_factor")?;
    for (i, (a, r)) in table.iter().enumerate() {
        let ratio = if i == 0 { String::new() } else { (table[i - 1].1 / r).to_string() };
        writeln!(w, "{a},{r},{ratio}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::predict_ml;
    use crate::rnn::init_params;
    use crate::trajectory::{build_training_corpus, sample, NoiseModel};
    use proptest::prelude::*;

    #[test]
    fn sequence_csv_round_trip() {
        let spec = TrajectorySpec::parabola(1.0, 2.0).unwrap();
        let s = sample(&spec, 0.0, 0.01, 101, &NoiseModel::for_spec(&spec, 0.3, 4)).unwrap();
        let mut buf = Vec::new();
        write_sequence_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,g_1,g_2,f_1,f_2\n"));
        let t = read_sequence_csv(&buf[..]).unwrap();
        assert_eq!(t.points, s.points);
        assert_eq!(t.truth, s.truth);
        assert_eq!(t.len(), 101);
        assert!(read_sequence_csv("x,y\n".as_bytes()).is_err());
    }

    #[test]
    fn corpus_round_trip() {
        let s = sample(&TrajectorySpec::Sine, 0.0, 0.01, 500, &NoiseModel::for_spec(&TrajectorySpec::Sine, 0.15, 1)).unwrap();
        let c = build_training_corpus(&[s], 5, 50, 40, 2).unwrap();
        let mut buf = Vec::new();
        write_corpus(&c, &mut buf).unwrap();
        assert_eq!(read_corpus(&buf[..]).unwrap(), c);

        let text = String::from_utf8(buf).unwrap();
        let bumped = text.replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(read_corpus(bumped.as_bytes()), Err(Error::Format(_))));
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(read_corpus(truncated.as_bytes()).is_err());
    }

    #[test]
    fn checkpoint_rejects_mismatch() {
        let p = init_params(CellKind::Lstm, 3, 1, 1).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&Checkpoint::new(p), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let wrong_kind = text.replacen("\"lstm\"", "\"basic\"", 1);
        assert!(read_checkpoint(wrong_kind.as_bytes()).is_err());
        let wrong_version = text.replacen("\"version\": 1", "\"version\": 9", 1);
        assert!(matches!(read_checkpoint(wrong_version.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn prediction_csv_round_trip() {
        let p = init_params(CellKind::Basic, 4, 2, 3).unwrap();
        let run = predict_ml(&p, &[0.1, 0.2, 0.3, 0.4], 5).unwrap();
        let truth: Vec<f64> = (0..10).map(|i| i as f64 / 7.0).collect();
        let meta = PredictionMeta {
            checkpoint_id: Some(params_digest(&p)),
            extra: vec![("a_i".into(), "0.15".into())],
        };
        let mut buf = Vec::new();
        write_prediction_csv(&run, Some(&truth), &meta, &mut buf).unwrap();
        let t = read_prediction_csv(&buf[..]).unwrap();
        assert_eq!(t.dim, 2);
        assert_eq!(t.predictions, run.predictions);
        assert_eq!(t.truth.unwrap(), truth);
        assert!(t.meta.contains(&("algorithm".into(), "ml".into())));
        assert!(t.meta.contains(&("cap".into(), "none".into())));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn checkpoint_round_trip_is_bitwise(seed in any::<u64>(), lstm in any::<bool>(), n in 1usize..8, d in 1usize..=2, scale in -1e6f64..1e6) {
            let kind = if lstm { CellKind::Lstm } else { CellKind::Basic };
            let mut p = init_params(kind, n, d, seed).unwrap();
            for (i, v) in p.as_mut_slice().iter_mut().enumerate() {
                *v *= scale.powi((i % 3) as i32 - 1);
            }
            let mut ck = Checkpoint::new(p.clone());
            ck.lineage.init_seed = Some(seed);
            ck.metadata.insert("epochs".into(), "50".into());
            let mut buf = Vec::new();
            write_checkpoint(&ck, &mut buf).unwrap();
            let back = read_checkpoint(&buf[..]).unwrap();
            let bits = |q: &NetworkParameters| q.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back.params), bits(&p));
            prop_assert_eq!(back.id(), ck.id());
            prop_assert_eq!(&back.lineage, &ck.lineage);
            prop_assert_eq!(&back.metadata, &ck.metadata);
        }
    }
}
