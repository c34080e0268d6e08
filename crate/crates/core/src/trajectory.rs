//! Smooth trajectories, additive noise, and seq-to-one training corpora.
//!
//! A trajectory `f(t)` is sampled at `t0 + j*dt`; the observed sequence is
//! `g_j = f_j + a * scale ∘ xi_j` with `xi_j` drawn i.i.d. from a symmetric
//! distribution. Segments for training are cut out of one or more observed
//! sequences and paired with the point that immediately follows them.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// A noise-free curve `f(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TrajectorySpec {
    /// `sin(2πt)`
    Sine,
    /// `1/2 + arcsin(sin 2πt)/π`, a triangle wave with range [0, 1].
    Triangle,
    /// `{b(t - 1/2), 4h t(1 - t)}` for `t` in [0, 1]: range `b`, vertex height `h`.
    Parabola { h: f64, b: f64 },
}

impl TrajectorySpec {
    pub fn parabola(h: f64, b: f64) -> Result<Self> {
        let spec = TrajectorySpec::Parabola { h, b };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TrajectorySpec::Parabola { h, b } if !(h > 0.0 && b > 0.0) => Err(Error::invalid(
                format!("parabola needs h > 0 and b > 0, got h = {h}, b = {b}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrajectorySpec::Sine | TrajectorySpec::Triangle => 1,
            TrajectorySpec::Parabola { .. } => 2,
        }
    }

    /// Whether the curve is defined only on `[0, 1]`.
    pub fn is_finite(&self) -> bool {
        matches!(self, TrajectorySpec::Parabola { .. })
    }

    pub fn label(&self) -> String {
        match *self {
            TrajectorySpec::Sine => "sine".to_string(),
            TrajectorySpec::Triangle => "triangle".to_string(),
            TrajectorySpec::Parabola { h, b } => format!("parabola_h{h}_b{b}"),
        }
    }

    /// Default noise multipliers per component; the horizontal parabola
    /// component is perturbed ten times less than the vertical one.
    pub fn default_noise_scale(&self) -> Vec<f64> {
        match self {
            TrajectorySpec::Sine | TrajectorySpec::Triangle => vec![1.0],
            TrajectorySpec::Parabola { .. } => vec![0.1, 1.0],
        }
    }

    /// Writes `f(t)` into `out` (length [`dim`](Self::dim)).
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        match *self {
            TrajectorySpec::Sine => out[0] = (2.0 * PI * t).sin(),
            TrajectorySpec::Triangle => out[0] = 0.5 + (2.0 * PI * t).sin().asin() / PI,
            TrajectorySpec::Parabola { h, b } => {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::Domain { t });
                }
                out[0] = b * (t - 0.5);
                out[1] = 4.0 * h * t * (1.0 - t);
            }
        }
        Ok(())
    }
}

/// Evaluates the smooth curve at `t`.
pub fn eval_smooth(spec: &TrajectorySpec, t: f64) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut out = vec![0.0; spec.dim()];
    spec.eval_into(t, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    /// Uniform on [-1, 1], so the amplitude is a hard bound.
    #[default]
    UniformSymmetric,
    /// Standard normal.
    Gaussian,
}

impl NoiseDistribution {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            NoiseDistribution::UniformSymmetric => rng.random_range(-1.0..=1.0),
            NoiseDistribution::Gaussian => rng.sample(StandardNormal),
        }
    }

    /// Variance of one draw.
    pub fn variance(self) -> f64 {
        match self {
            NoiseDistribution::UniformSymmetric => 1.0 / 3.0,
            NoiseDistribution::Gaussian => 1.0,
        }
    }
}

/// White additive noise `a * scale ∘ xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub amplitude: f64,
    pub distribution: NoiseDistribution,
    pub per_component_scale: Vec<f64>,
    pub seed: u64,
}

impl NoiseModel {
    /// Noise with the default per-component scale for `spec`.
    pub fn for_spec(spec: &TrajectorySpec, amplitude: f64, seed: u64) -> Self {
        NoiseModel {
            amplitude,
            distribution: NoiseDistribution::default(),
            per_component_scale: spec.default_noise_scale(),
            seed,
        }
    }

    pub fn with_distribution(mut self, distribution: NoiseDistribution) -> Self {
        self.distribution = distribution;
        self
    }

    /// Raw unit-amplitude draws `xi_j` (already multiplied by the per-component scale).
    pub fn draw_xi(&self, n: usize) -> Vec<f64> {
        let mut rng = rng_from_seed(self.seed);
        let d = self.per_component_scale.len();
        let mut xi = Vec::with_capacity(n * d);
        for _ in 0..n {
            for &scale in &self.per_component_scale {
                xi.push(scale * self.distribution.draw(&mut rng));
            }
        }
        xi
    }
}

/// Observed points `g_j` alongside the truth `f_j`, both stored row-major (`len × dim`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisySequence {
    pub spec: TrajectorySpec,
    pub t0: f64,
    pub dt: f64,
    pub dim: usize,
    pub points: Vec<f64>,
    pub truth: Vec<f64>,
    pub amplitude_used: f64,
}

impl NoisySequence {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn truth_at(&self, j: usize) -> &[f64] {
        &self.truth[j * self.dim..(j + 1) * self.dim]
    }

    /// Observed points for indices `range`, row-major.
    pub fn points_range(&self, range: std::ops::Range<usize>) -> &[f64] {
        &self.points[range.start * self.dim..range.end * self.dim]
    }

    pub fn truth_range(&self, range: std::ops::Range<usize>) -> &[f64] {
        &self.truth[range.start * self.dim..range.end * self.dim]
    }
}

/// Samples `n` points of `spec` starting at `t0` with step `dt` and adds noise.
pub fn sample(
    spec: &TrajectorySpec,
    t0: f64,
    dt: f64,
    n: usize,
    noise: &NoiseModel,
) -> Result<NoisySequence> {
    spec.validate()?;
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if n == 0 {
        return Err(Error::invalid("sequence length must be at least 1"));
    }
    if !(noise.amplitude >= 0.0) {
        return Err(Error::invalid(format!(
            "noise amplitude must be non-negative, got {}",
            noise.amplitude
        )));
    }
    let dim = spec.dim();
    if noise.per_component_scale.len() != dim {
        return Err(Error::invalid(format!(
            "noise scale has {} components, trajectory has {dim}",
            noise.per_component_scale.len()
        )));
    }

    let mut truth = vec![0.0; n * dim];
    for (j, row) in truth.chunks_exact_mut(dim).enumerate() {
        spec.eval_into(t0 + j as f64 * dt, row)?;
    }
    let xi = noise.draw_xi(n);
    let points = truth
        .iter()
        .zip(&xi)
        .map(|(f, x)| f + noise.amplitude * x)
        .collect();

    Ok(NoisySequence {
        spec: *spec,
        t0,
        dt,
        dim,
        points,
        truth,
        amplitude_used: noise.amplitude,
    })
}

/// One training example: `m` consecutive points and the point after them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Row-major `m × dim`.
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    /// Index of the source sequence the segment was cut from.
    pub source: usize,
    /// Index of the first input point within the source sequence.
    pub start: usize,
}

impl Segment {
    pub fn new(input: Vec<f64>, target: Vec<f64>) -> Self {
        Segment {
            input,
            target,
            source: 0,
            start: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    pub fn len(&self) -> usize {
        self.input.len() / self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingCorpus {
    pub dim: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub source_specs: Vec<TrajectorySpec>,
    /// Number of source sequences the `source` indices refer to.
    pub sequence_count: usize,
    pub segments: Vec<Segment>,
}

impl TrainingCorpus {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Concatenates corpora built from different trajectory families.
    /// Source indices of later corpora are shifted past the earlier ones.
    pub fn merge(parts: Vec<TrainingCorpus>) -> Result<TrainingCorpus> {
        let mut iter = parts.into_iter();
        let mut merged = iter
            .next()
            .ok_or_else(|| Error::invalid("nothing to merge"))?;
        for part in iter {
            if part.dim != merged.dim {
                return Err(Error::invalid(format!(
                    "cannot merge corpora of dimension {} and {}",
                    merged.dim, part.dim
                )));
            }
            let offset = merged.sequence_count;
            merged.min_len = merged.min_len.min(part.min_len);
            merged.max_len = merged.max_len.max(part.max_len);
            for spec in part.source_specs {
                if !merged.source_specs.contains(&spec) {
                    merged.source_specs.push(spec);
                }
            }
            merged.sequence_count += part.sequence_count;
            merged
                .segments
                .extend(part.segments.into_iter().map(|mut s| {
                    s.source += offset;
                    s
                }));
        }
        Ok(merged)
    }
}

/// Draws `count` segments uniformly over all valid `(sequence, start, length)`
/// placements with `min_len <= length <= max_len` whose target still lies on
/// the source sequence.
pub fn build_training_corpus(
    sequences: &[NoisySequence],
    min_len: usize,
    max_len: usize,
    count: usize,
    seed: u64,
) -> Result<TrainingCorpus> {
    if sequences.is_empty() {
        return Err(Error::invalid("no source sequences"));
    }
    if min_len == 0 || min_len > max_len {
        return Err(Error::invalid(format!(
            "segment length bounds must satisfy 1 <= min <= max, got [{min_len}, {max_len}]"
        )));
    }
    if count == 0 {
        return Err(Error::invalid("segment count must be at least 1"));
    }
    let dim = sequences[0].dim;
    for (index, seq) in sequences.iter().enumerate() {
        if seq.dim != dim {
            return Err(Error::invalid("source sequences differ in dimension"));
        }
        if seq.len() < max_len + 1 {
            return Err(Error::SequenceTooShort {
                index,
                len: seq.len(),
                required: max_len + 1,
            });
        }
    }

    // Cumulative placement counts over (sequence, length) cells; a cell with
    // length m on a sequence of L points has L - m valid starts.
    let lengths = max_len - min_len + 1;
    let mut cumulative = Vec::with_capacity(sequences.len() * lengths);
    let mut total: u64 = 0;
    for seq in sequences {
        for m in min_len..=max_len {
            total += (seq.len() - m) as u64;
            cumulative.push(total);
        }
    }

    let mut rng = rng_from_seed(seed);
    let mut segments = Vec::with_capacity(count);
    for _ in 0..count {
        let r = rng.random_range(0..total);
        let cell = cumulative.partition_point(|&c| c <= r);
        let before = if cell == 0 { 0 } else { cumulative[cell - 1] };
        let source = cell / lengths;
        let m = min_len + cell % lengths;
        let start = (r - before) as usize;
        let seq = &sequences[source];
        debug_assert!(start + m < seq.len());
        segments.push(Segment {
            input: seq.points_range(start..start + m).to_vec(),
            target: seq.point(start + m).to_vec(),
            source,
            start,
        });
    }

    let mut source_specs = Vec::new();
    for seq in sequences {
        if !source_specs.contains(&seq.spec) {
            source_specs.push(seq.spec);
        }
    }

    Ok(TrainingCorpus {
        dim,
        min_len,
        max_len,
        source_specs,
        sequence_count: sequences.len(),
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        assert!((eval_smooth(&TrajectorySpec::Sine, 0.25).unwrap()[0] - 1.0).abs() < 1e-15);
        assert_eq!(eval_smooth(&TrajectorySpec::Triangle, 0.0).unwrap(), vec![0.5]);
        let p = TrajectorySpec::parabola(1.0, 2.0).unwrap();
        assert_eq!(eval_smooth(&p, 0.5).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn parabola_domain() {
        let p = TrajectorySpec::parabola(1.0, 2.0).unwrap();
        assert!(matches!(eval_smooth(&p, 1.01), Err(Error::Domain { .. })));
        assert!(matches!(eval_smooth(&p, -0.01), Err(Error::Domain { .. })));
        assert!(eval_smooth(&p, 1.0).is_ok());
        assert!(TrajectorySpec::parabola(0.0, 1.0).is_err());
        assert!(TrajectorySpec::parabola(1.0, -1.0).is_err());
    }

    #[test]
    fn sample_zero_noise_is_truth() {
        let noise = NoiseModel::for_spec(&TrajectorySpec::Sine, 0.0, 9);
        let s = sample(&TrajectorySpec::Sine, 0.0, 0.01, 3, &noise).unwrap();
        assert_eq!(s.points, s.truth);
        let expected = [0.0, (0.02 * PI).sin(), (0.04 * PI).sin()];
        for (a, b) in s.truth.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn parabola_sample_past_end_is_domain_error() {
        let p = TrajectorySpec::parabola(1.0, 1.0).unwrap();
        let noise = NoiseModel::for_spec(&p, 0.1, 1);
        assert!(sample(&p, 0.0, 0.01, 101, &noise).is_ok());
        assert!(matches!(
            sample(&p, 0.0, 0.01, 102, &noise),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn uniform_noise_respects_amplitude_bound() {
        for spec in [
            TrajectorySpec::Sine,
            TrajectorySpec::Triangle,
            TrajectorySpec::parabola(1.0, 4.0).unwrap(),
        ] {
            let noise = NoiseModel::for_spec(&spec, 0.15, 3);
            let n = if spec.is_finite() { 101 } else { 5000 };
            let s = sample(&spec, 0.0, 0.01, n, &noise).unwrap();
            let scale = spec.default_noise_scale();
            for j in 0..s.len() {
                for c in 0..s.dim {
                    let dev = (s.point(j)[c] - s.truth_at(j)[c]).abs();
                    assert!(dev <= 0.15 * scale[c] + 1e-15, "j={j} c={c} dev={dev}");
                }
            }
        }
    }

    #[test]
    fn uniform_noise_mean_is_zero() {
        let n = 100_000;
        let noise = NoiseModel::for_spec(&TrajectorySpec::Sine, 0.4, 11);
        let s = sample(&TrajectorySpec::Sine, 0.0, 0.01, n, &noise).unwrap();
        let mean: f64 = s
            .points
            .iter()
            .zip(&s.truth)
            .map(|(g, f)| g - f)
            .sum::<f64>()
            / n as f64;
        let bound = 4.0 * (0.4 / 3f64.sqrt()) / (n as f64).sqrt();
        assert!(mean.abs() <= bound, "mean {mean} bound {bound}");
    }

    #[test]
    fn gaussian_noise_is_centred() {
        let n = 100_000;
        let noise = NoiseModel::for_spec(&TrajectorySpec::Sine, 0.4, 12)
            .with_distribution(NoiseDistribution::Gaussian);
        let s = sample(&TrajectorySpec::Sine, 0.0, 0.01, n, &noise).unwrap();
        let diffs: Vec<f64> = s.points.iter().zip(&s.truth).map(|(g, f)| g - f).collect();
        let mean = diffs.iter().sum::<f64>() / n as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 4.0 * 0.4 / (n as f64).sqrt());
        assert!((var / 0.16 - 1.0).abs() < 0.03);
    }

    #[test]
    fn corpus_single_placement() {
        let noise = NoiseModel::for_spec(&TrajectorySpec::Sine, 0.1, 1);
        let s = sample(&TrajectorySpec::Sine, 0.0, 0.01, 51, &noise).unwrap();
        let c = build_training_corpus(std::slice::from_ref(&s), 50, 50, 1, 5).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.segments[0].input, s.points_range(0..50));
        assert_eq!(c.segments[0].target, s.point(50));
    }

    #[test]
    fn corpus_rejects_short_source() {
        let noise = NoiseModel::for_spec(&TrajectorySpec::Sine, 0.1, 1);
        let s = sample(&TrajectorySpec::Sine, 0.0, 0.01, 50, &noise).unwrap();
        assert!(matches!(
            build_training_corpus(&[s], 5, 50, 10, 5),
            Err(Error::SequenceTooShort { required: 51, .. })
        ));
    }

    #[test]
    fn corpus_sizes_match_recipes() {
        let sine = sample(
            &TrajectorySpec::Sine,
            0.0,
            0.01,
            50_000,
            &NoiseModel::for_spec(&TrajectorySpec::Sine, 0.15, 1),
        )
        .unwrap();
        let tri = sample(
            &TrajectorySpec::Triangle,
            0.0,
            0.01,
            50_000,
            &NoiseModel::for_spec(&TrajectorySpec::Triangle, 0.15, 2),
        )
        .unwrap();
        let merged = TrainingCorpus::merge(vec![
            build_training_corpus(&[sine], 5, 50, 6000, 3).unwrap(),
            build_training_corpus(&[tri], 5, 50, 6000, 4).unwrap(),
        ])
        .unwrap();
        assert_eq!(merged.len(), 12_000);
        assert_eq!(merged.sequence_count, 2);
        assert_eq!(merged.source_specs.len(), 2);

        let mut parts = Vec::new();
        for (k, b) in [1.0, 2.0, 4.0].into_iter().enumerate() {
            let spec = TrajectorySpec::parabola(1.0, b).unwrap();
            let seqs: Vec<_> = (0..20)
                .map(|r| sample(&spec, 0.0, 0.01, 101, &NoiseModel::for_spec(&spec, 0.4, r)).unwrap())
                .collect();
            parts.push(build_training_corpus(&seqs, 5, 50, 6000, k as u64).unwrap());
        }
        let merged = TrainingCorpus::merge(parts).unwrap();
        assert_eq!(merged.len(), 18_000);
        assert!(merged.segments.iter().all(|s| (5..=50).contains(&s.len())));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sampling_is_deterministic(seed in any::<u64>(), a in 0.0f64..1.0, n in 1usize..200) {
            let spec = TrajectorySpec::Triangle;
            let noise = NoiseModel::for_spec(&spec, a, seed);
            let s1 = sample(&spec, 0.3, 0.01, n, &noise).unwrap();
            let s2 = sample(&spec, 0.3, 0.01, n, &noise).unwrap();
            prop_assert_eq!(s1.points.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                            s2.points.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }

        #[test]
        fn zero_amplitude_is_identity(seed in any::<u64>(), h in 0.1f64..3.0, b in 0.1f64..5.0) {
            for spec in [TrajectorySpec::Sine, TrajectorySpec::Triangle, TrajectorySpec::Parabola { h, b }] {
                let noise = NoiseModel::for_spec(&spec, 0.0, seed);
                let s = sample(&spec, 0.0, 0.01, 101, &noise).unwrap();
                prop_assert_eq!(&s.points, &s.truth);
            }
        }

        #[test]
        fn truth_ranges(t in -50.0f64..50.0, tp in 0.0f64..=1.0, h in 0.1f64..3.0, b in 0.1f64..5.0) {
            let s = eval_smooth(&TrajectorySpec::Sine, t).unwrap()[0];
            prop_assert!((-1.0..=1.0).contains(&s));
            let tr = eval_smooth(&TrajectorySpec::Triangle, t).unwrap()[0];
            prop_assert!((0.0..=1.0).contains(&tr));
            let p = eval_smooth(&TrajectorySpec::Parabola { h, b }, tp).unwrap();
            prop_assert!(p[0] >= -b / 2.0 && p[0] <= b / 2.0);
            prop_assert!(p[1] >= 0.0 && p[1] <= h);
        }

        #[test]
        fn segment_target_adjacency(seed in any::<u64>(), min_len in 1usize..10, extra in 0usize..20) {
            let max_len = min_len + extra;
            let spec = TrajectorySpec::parabola(1.0, 2.0).unwrap();
            let seqs: Vec<_> = (0..3)
                .map(|r| sample(&spec, 0.0, 0.01, 101, &NoiseModel::for_spec(&spec, 0.2, seed ^ r)).unwrap())
                .collect();
            let corpus = build_training_corpus(&seqs, min_len, max_len, 200, seed).unwrap();
            for seg in &corpus.segments {
                let m = seg.len();
                prop_assert!(m >= min_len && m <= max_len);
                let src = &seqs[seg.source];
                prop_assert!(seg.start + m < src.len());
                prop_assert_eq!(&seg.input[..], src.points_range(seg.start..seg.start + m));
                prop_assert_eq!(&seg.target[..], src.point(seg.start + m));
            }
        }
    }
}
