//! Seq-to-one training: mean-square loss, backpropagation through time, Adam.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matvec_t_acc, outer_acc};
use crate::rnn::{
    advance, check_sequence, lstm_preactivations, readout_exposed, sigmoid, Activation, CellKind,
    NetworkParameters,
};
use crate::seed::{derive_seed, rng_from_seed};
use crate::trajectory::{Segment, TrainingCorpus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub validation_fraction: f64,
    pub shuffle_seed: u64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Train only the readout, leaving the cell weights untouched.
    pub freeze_cell: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            validation_fraction: 0.2,
            shuffle_seed: 0,
            clip_norm: Some(5.0),
            freeze_cell: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::invalid("validation fraction must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::invalid("clip norm must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_error: f64,
    pub validation_error: Option<f64>,
    pub clip_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub initial_train_error: f64,
    pub epochs: Vec<EpochRecord>,
    pub train_size: usize,
    pub validation_size: usize,
    pub final_params: NetworkParameters,
}

/// `(1/N) Σ |x̄ − x|²` over `segments`.
pub fn loss(params: &NetworkParameters, segments: &[Segment]) -> Result<f64> {
    if segments.is_empty() {
        return Err(Error::invalid("loss over an empty set of segments"));
    }
    let mut state = vec![0.0; params.state_dim()];
    let mut scratch = Vec::new();
    let mut total = 0.0;
    for seg in segments {
        check_segment(params, seg)?;
        state.iter_mut().for_each(|v| *v = 0.0);
        advance(params, &mut state, &seg.input, &mut scratch);
        let pred = readout_exposed(params, &state[..params.n()]);
        total += squared_error(&pred, &seg.target);
    }
    Ok(total / segments.len() as f64)
}

fn squared_error(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum()
}

fn check_segment(params: &NetworkParameters, seg: &Segment) -> Result<()> {
    check_sequence(params, &seg.input)?;
    if seg.target.len() != params.d() {
        return Err(Error::invalid(format!(
            "target has dimension {}, network has {}",
            seg.target.len(),
            params.d()
        )));
    }
    Ok(())
}

/// Reusable buffers for backpropagation through time.
#[derive(Debug, Default)]
pub struct BpttWorkspace {
    /// Exposed states `h_0..h_m` (`h_0 = 0`).
    h: Vec<f64>,
    /// LSTM cell states `c_0..c_m`.
    c: Vec<f64>,
    /// LSTM gate activations per step (input, forget, output, candidate).
    gates: Vec<f64>,
    pre: Vec<f64>,
    dh: Vec<f64>,
    dh_prev: Vec<f64>,
    dc: Vec<f64>,
    dz: Vec<f64>,
}

/// Adds the gradient of the single-segment squared error to `grad` and
/// returns that error.
pub fn accumulate_gradient(
    params: &NetworkParameters,
    seg: &Segment,
    grad: &mut [f64],
    ws: &mut BpttWorkspace,
) -> f64 {
    debug_assert_eq!(grad.len(), params.len());
    match params.kind() {
        CellKind::Basic => bptt_basic(params, seg, grad, ws),
        CellKind::Lstm => bptt_lstm(params, seg, grad, ws),
    }
}

fn readout_backward(
    params: &NetworkParameters,
    h_last: &[f64],
    target: &[f64],
    grad: &mut [f64],
    dh: &mut Vec<f64>,
) -> f64 {
    let (n, d) = (params.n(), params.d());
    let pred = readout_exposed(params, h_last);
    let err = squared_error(&pred, target);
    let dy: Vec<f64> = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t)).collect();
    let off = params.cell_len();
    outer_acc(&mut grad[off..off + d * n], &dy, h_last);
    for (g, &v) in grad[off + d * n..off + d * n + d].iter_mut().zip(&dy) {
        *g += v;
    }
    let (w, _) = params.readout_parts();
    dh.clear();
    dh.resize(n, 0.0);
    matvec_t_acc(dh, w, &dy);
    err
}

fn bptt_basic(params: &NetworkParameters, seg: &Segment, grad: &mut [f64], ws: &mut BpttWorkspace) -> f64 {
    let (n, d) = (params.n(), params.d());
    let m = seg.len();
    let (wx, wsm, b) = params.gate(0);
    ws.h.clear();
    ws.h.resize((m + 1) * n, 0.0);
    for t in 0..m {
        let (prev, next) = ws.h.split_at_mut((t + 1) * n);
        let s_prev = &prev[t * n..];
        let s = &mut next[..n];
        s.copy_from_slice(b);
        crate::linalg::matvec_acc(s, wx, &seg.input[t * d..(t + 1) * d]);
        crate::linalg::matvec_acc(s, wsm, s_prev);
        if params.activation() == Activation::Tanh {
            s.iter_mut().for_each(|v| *v = v.tanh());
        }
    }
    let err = readout_backward(params, &ws.h[m * n..], &seg.target, grad, &mut ws.dh);

    let (gx, rest) = grad.split_at_mut(n * d);
    let (gs, rest) = rest.split_at_mut(n * n);
    let gb = &mut rest[..n];
    ws.dz.clear();
    ws.dz.resize(n, 0.0);
    for t in (0..m).rev() {
        let s = &ws.h[(t + 1) * n..(t + 2) * n];
        let s_prev = &ws.h[t * n..(t + 1) * n];
        for k in 0..n {
            let deriv = match params.activation() {
                Activation::Tanh => 1.0 - s[k] * s[k],
                Activation::Identity => 1.0,
            };
            ws.dz[k] = ws.dh[k] * deriv;
        }
        outer_acc(gx, &ws.dz, &seg.input[t * d..(t + 1) * d]);
        outer_acc(gs, &ws.dz, s_prev);
        for (g, &v) in gb.iter_mut().zip(&ws.dz) {
            *g += v;
        }
        if t > 0 {
            ws.dh_prev.clear();
            ws.dh_prev.resize(n, 0.0);
            matvec_t_acc(&mut ws.dh_prev, wsm, &ws.dz);
            std::mem::swap(&mut ws.dh, &mut ws.dh_prev);
        }
    }
    err
}

fn bptt_lstm(params: &NetworkParameters, seg: &Segment, grad: &mut [f64], ws: &mut BpttWorkspace) -> f64 {
    let (n, d) = (params.n(), params.d());
    let m = seg.len();
    ws.h.clear();
    ws.h.resize((m + 1) * n, 0.0);
    ws.c.clear();
    ws.c.resize((m + 1) * n, 0.0);
    ws.gates.clear();
    ws.gates.resize(m * 4 * n, 0.0);
    ws.pre.resize(4 * n, 0.0);
    for t in 0..m {
        let x = &seg.input[t * d..(t + 1) * d];
        lstm_preactivations(params, x, &ws.h[t * n..(t + 1) * n], &mut ws.pre);
        let gates = &mut ws.gates[t * 4 * n..(t + 1) * 4 * n];
        for k in 0..n {
            let i = sigmoid(ws.pre[k]);
            let f = sigmoid(ws.pre[n + k]);
            let o = sigmoid(ws.pre[2 * n + k]);
            let g = ws.pre[3 * n + k].tanh();
            gates[k] = i;
            gates[n + k] = f;
            gates[2 * n + k] = o;
            gates[3 * n + k] = g;
            let c = f * ws.c[t * n + k] + i * g;
            ws.c[(t + 1) * n + k] = c;
            ws.h[(t + 1) * n + k] = o * c.tanh();
        }
    }
    let err = readout_backward(params, &ws.h[m * n..], &seg.target, grad, &mut ws.dh);

    ws.dc.clear();
    ws.dc.resize(n, 0.0);
    ws.dz.clear();
    ws.dz.resize(4 * n, 0.0);
    for t in (0..m).rev() {
        let gates = &ws.gates[t * 4 * n..(t + 1) * 4 * n];
        let c = &ws.c[(t + 1) * n..(t + 2) * n];
        let c_prev = &ws.c[t * n..(t + 1) * n];
        for k in 0..n {
            let (i, f, o, g) = (gates[k], gates[n + k], gates[2 * n + k], gates[3 * n + k]);
            let tc = c[k].tanh();
            let dh = ws.dh[k];
            let dc = ws.dc[k] + dh * o * (1.0 - tc * tc);
            ws.dz[k] = dc * g * i * (1.0 - i);
            ws.dz[n + k] = dc * c_prev[k] * f * (1.0 - f);
            ws.dz[2 * n + k] = dh * tc * o * (1.0 - o);
            ws.dz[3 * n + k] = dc * i * (1.0 - g * g);
            ws.dc[k] = dc * f;
        }
        let x = &seg.input[t * d..(t + 1) * d];
        let h_prev = &ws.h[t * n..(t + 1) * n];
        ws.dh_prev.clear();
        ws.dh_prev.resize(n, 0.0);
        for gate in 0..4 {
            let dz = &ws.dz[gate * n..(gate + 1) * n];
            let off = params.gate_offset(gate);
            let (gu, rest) = grad[off..].split_at_mut(n * d);
            let (gv, rest) = rest.split_at_mut(n * n);
            outer_acc(gu, dz, x);
            outer_acc(gv, dz, h_prev);
            for (gb, &v) in rest[..n].iter_mut().zip(dz) {
                *gb += v;
            }
            if t > 0 {
                let (_, v, _) = params.gate(gate);
                matvec_t_acc(&mut ws.dh_prev, v, dz);
            }
        }
        std::mem::swap(&mut ws.dh, &mut ws.dh_prev);
    }
    err
}

/// Gradient of the single-segment squared error with respect to every
/// parameter, in the flat parameter layout.
pub fn backward(params: &NetworkParameters, segment: &Segment) -> Result<Vec<f64>> {
    check_segment(params, segment)?;
    let mut grad = vec![0.0; params.len()];
    accumulate_gradient(params, segment, &mut grad, &mut BpttWorkspace::default());
    Ok(grad)
}

/// Mean loss and mean gradient over a batch.
pub fn batch_gradient(params: &NetworkParameters, segments: &[Segment]) -> Result<(f64, Vec<f64>)> {
    if segments.is_empty() {
        return Err(Error::invalid("gradient over an empty batch"));
    }
    let mut grad = vec![0.0; params.len()];
    let mut ws = BpttWorkspace::default();
    let mut total = 0.0;
    for seg in segments {
        check_segment(params, seg)?;
        total += accumulate_gradient(params, seg, &mut grad, &mut ws);
    }
    let k = segments.len() as f64;
    grad.iter_mut().for_each(|g| *g /= k);
    Ok((total / k, grad))
}

/// Central-difference gradient of the single-segment loss.
pub fn finite_diff_grad(params: &NetworkParameters, segment: &Segment, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let segs = std::slice::from_ref(segment);
    let mut probe = params.clone();
    let mut grad = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let orig = probe.as_slice()[k];
        probe.as_mut_slice()[k] = orig + eps;
        let up = loss(&probe, segs)?;
        probe.as_mut_slice()[k] = orig - eps;
        let down = loss(&probe, segs)?;
        probe.as_mut_slice()[k] = orig;
        grad.push((up - down) / (2.0 * eps));
    }
    Ok(grad)
}

/// First and second moment estimates and the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// One bias-corrected Adam update of `theta[range]`; moments outside the
    /// range are left untouched.
    pub fn update_range(
        &mut self,
        theta: &mut [f64],
        grad: &[f64],
        range: std::ops::Range<usize>,
        config: &TrainConfig,
    ) {
        self.t += 1;
        let (b1, b2) = (config.beta1, config.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for k in range {
            let g = grad[k];
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g;
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            theta[k] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }

    pub fn update(&mut self, theta: &mut [f64], grad: &[f64], config: &TrainConfig) {
        self.update_range(theta, grad, 0..theta.len(), config);
    }
}

pub fn adam_step(
    params: &NetworkParameters,
    grad: &[f64],
    state: &AdamState,
    config: &TrainConfig,
) -> Result<(NetworkParameters, AdamState)> {
    if grad.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::invalid("gradient or optimizer state does not match parameters"));
    }
    let mut next = params.clone();
    let mut st = state.clone();
    st.update(next.as_mut_slice(), grad, config);
    Ok((next, st))
}

/// Splits `0..len` into `(train, validation)` index sets, deterministically in `seed`.
pub fn split_indices(len: usize, validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut rng_from_seed(derive_seed(seed, 0)));
    let mut n_val = (len as f64 * validation_fraction).round() as usize;
    if validation_fraction > 0.0 {
        n_val = n_val.clamp(1, len.saturating_sub(1));
    }
    let train = idx.split_off(n_val);
    (train, idx)
}

/// Mini-batches of training indices for one epoch: shuffle, bucket by exact
/// segment length (keeping the shuffled order inside each bucket), chunk,
/// then shuffle the batch order.
pub fn epoch_batches(corpus: &[Segment], train: &[usize], batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut rng = rng_from_seed(derive_seed(seed, 1 + epoch as u64));
    let mut order = train.to_vec();
    order.shuffle(&mut rng);
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in order {
        buckets.entry(corpus[i].len()).or_default().push(i);
    }
    let mut batches: Vec<Vec<usize>> = buckets
        .into_values()
        .flat_map(|b| b.chunks(batch_size).map(<[usize]>::to_vec).collect::<Vec<_>>())
        .collect();
    batches.shuffle(&mut rng);
    batches
}

fn subset(corpus: &[Segment], idx: &[usize]) -> Vec<Segment> {
    idx.iter().map(|&i| corpus[i].clone()).collect()
}

/// Trains `params` on `corpus`.
pub fn train(params: NetworkParameters, corpus: &TrainingCorpus, config: &TrainConfig) -> Result<TrainHistory> {
    train_with(params, corpus, config, |_, _| Ok(()))
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with<F>(
    mut params: NetworkParameters,
    corpus: &TrainingCorpus,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainHistory>
where
    F: FnMut(&EpochRecord, &NetworkParameters) -> Result<()>,
{
    config.validate()?;
    if corpus.dim != params.d() {
        return Err(Error::invalid(format!(
            "corpus dimension {} does not match network dimension {}",
            corpus.dim,
            params.d()
        )));
    }
    let segments = &corpus.segments;
    if segments.is_empty() {
        return Err(Error::invalid("empty training corpus"));
    }
    if config.validation_fraction > 0.0 && segments.len() < 2 {
        return Err(Error::invalid("need at least two segments to hold out a validation split"));
    }
    let (train_idx, val_idx) = split_indices(segments.len(), config.validation_fraction, config.shuffle_seed);
    let train_set = subset(segments, &train_idx);
    let val_set = subset(segments, &val_idx);

    let initial_train_error = loss(&params, &train_set)?;
    let update_range = if config.freeze_cell {
        params.cell_len()..params.len()
    } else {
        0..params.len()
    };

    let mut adam = AdamState::new(params.len());
    let mut grad = vec![0.0; params.len()];
    let mut ws = BpttWorkspace::default();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let batches = epoch_batches(segments, &train_idx, config.batch_size, config.shuffle_seed, epoch);
        let mut clip_events = 0;
        for (b, batch) in batches.iter().enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += accumulate_gradient(&params, &segments[i], &mut grad, &mut ws);
            }
            let k = batch.len() as f64;
            batch_loss /= k;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: batch_loss,
                });
            }
            grad.iter_mut().for_each(|g| *g /= k);
            if let Some(limit) = config.clip_norm {
                let norm = grad[update_range.clone()].iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > limit {
                    let scale = limit / norm;
                    grad.iter_mut().for_each(|g| *g *= scale);
                    clip_events += 1;
                }
            }
            adam.update_range(params.as_mut_slice(), &grad, update_range.clone(), config);
        }

        let train_error = loss(&params, &train_set)?;
        if !train_error.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: batches.len(),
                loss: train_error,
            });
        }
        let validation_error = if val_set.is_empty() {
            None
        } else {
            Some(loss(&params, &val_set)?)
        };
        let record = EpochRecord {
            epoch: epoch + 1,
            train_error,
            validation_error,
            clip_events,
        };
        on_epoch(&record, &params)?;
        history.push(record);
    }

    Ok(TrainHistory {
        initial_train_error,
        epochs: history,
        train_size: train_set.len(),
        validation_size: val_set.len(),
        final_params: params,
    })
}
