//! Noise propagation through the state map, contraction diagnostics,
//! smoothness of rollouts, and the one-step averaging experiment.
//!
//! For an input `x_i = f_i + a xi_i` the state splits to first order as
//! `s_i ≈ ŝ_i + a σ_i` with
//!
//! ```text
//! ŝ_i = F(f_i, ŝ_{i-1})
//! σ_i = J_x(f_i, ŝ_{i-1}) xi_i + J_s(f_i, ŝ_{i-1}) σ_{i-1},   σ_0 = 0
//! ```
//!
//! For the LSTM the recursion runs over the extended state `[h, c]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm, operator_norm, spectral_radius};
use crate::rnn::{cell_step, forward, jacobian_s, jacobians, InnerState, NetworkParameters};
use crate::predict::PredictionRun;
use crate::seed::derive_seed;
use crate::trajectory::{sample, NoiseModel, TrajectorySpec};

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseReport {
    pub amplitude: f64,
    /// `σ_i`, one extended-state vector per input step.
    pub sigma_trace: Vec<Vec<f64>>,
    /// Spectral radius of `J_{s,i-1}` used at step `i`.
    pub jacobian_sr: Vec<f64>,
    /// `|s_i − (ŝ_i + a σ_i)|`.
    pub residuals: Vec<f64>,
    /// `|s_i − ŝ_i|`, the actual noise carried by the state.
    pub deviations: Vec<f64>,
    pub noiseless_states: Vec<InnerState>,
    pub noisy_states: Vec<InnerState>,
}

impl NoiseReport {
    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn sigma_norms(&self) -> Vec<f64> {
        self.sigma_trace.iter().map(|s| norm(s)).collect()
    }
}

fn check_trace(params: &NetworkParameters, truth: &[f64]) -> Result<()> {
    if truth.is_empty() || !truth.len().is_multiple_of(params.d()) {
        return Err(Error::invalid(format!(
            "trajectory of {} values is not a non-empty sequence of {}-dimensional points",
            truth.len(),
            params.d()
        )));
    }
    Ok(())
}

/// Runs the noiseless and noisy forward passes side by side with the
/// first-order σ recursion.
pub fn noise_propagation(params: &NetworkParameters, truth: &[f64], xi: &[f64], a: f64) -> Result<NoiseReport> {
    check_trace(params, truth)?;
    if xi.len() != truth.len() {
        return Err(Error::invalid("noise and trajectory differ in length"));
    }
    if !(a >= 0.0) {
        return Err(Error::invalid("noise amplitude must be non-negative"));
    }
    let d = params.d();
    let steps = truth.len() / d;
    let mut clean = InnerState::zero(params);
    let mut noisy = InnerState::zero(params);
    let mut sigma = vec![0.0; params.state_dim()];
    let mut report = NoiseReport {
        amplitude: a,
        sigma_trace: Vec::with_capacity(steps),
        jacobian_sr: Vec::with_capacity(steps),
        residuals: Vec::with_capacity(steps),
        deviations: Vec::with_capacity(steps),
        noiseless_states: Vec::with_capacity(steps),
        noisy_states: Vec::with_capacity(steps),
    };
    for i in 0..steps {
        let f = &truth[i * d..(i + 1) * d];
        let e = &xi[i * d..(i + 1) * d];
        let (jx, js) = jacobians(params, f, &clean);
        let mut next_sigma = jx.mul_vec(e);
        for (ns, v) in next_sigma.iter_mut().zip(js.mul_vec(&sigma)) {
            *ns += v;
        }
        sigma = next_sigma;
        report.jacobian_sr.push(spectral_radius(&js)?);

        let x: Vec<f64> = f.iter().zip(e).map(|(fv, ev)| fv + a * ev).collect();
        clean = cell_step(params, f, &clean);
        noisy = cell_step(params, &x, &noisy);

        let mut residual = 0.0;
        let mut deviation = 0.0;
        for ((s, sh), sg) in noisy.as_slice().iter().zip(clean.as_slice()).zip(&sigma) {
            let r = s - (sh + a * sg);
            residual += r * r;
            deviation += (s - sh) * (s - sh);
        }
        report.residuals.push(residual.sqrt());
        report.deviations.push(deviation.sqrt());
        report.sigma_trace.push(sigma.clone());
        report.noiseless_states.push(clean.clone());
        report.noisy_states.push(noisy.clone());
    }
    Ok(report)
}

/// Maximum first-order residual at each amplitude, for the same noise draw.
pub fn residual_scaling(params: &NetworkParameters, truth: &[f64], xi: &[f64], amplitudes: &[f64]) -> Result<Vec<(f64, f64)>> {
    amplitudes
        .iter()
        .map(|&a| Ok((a, noise_propagation(params, truth, xi, a)?.max_residual())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionProfile {
    /// Largest eigenvalue modulus of `J_s` at each step.
    pub spectral_radius: Vec<f64>,
    /// Largest singular value of `J_s` at each step. Exceeds the spectral
    /// radius for non-normal Jacobians; only this bounds one-step growth.
    pub operator_norm: Vec<f64>,
}

/// `J_s` along the noiseless trajectory: at step `i` the Jacobian is taken at
/// `(f_i, ŝ_{i-1})`.
pub fn contraction_profile(params: &NetworkParameters, truth: &[f64]) -> Result<ContractionProfile> {
    check_trace(params, truth)?;
    let d = params.d();
    let mut state = InnerState::zero(params);
    let mut profile = ContractionProfile {
        spectral_radius: Vec::new(),
        operator_norm: Vec::new(),
    };
    for f in truth.chunks_exact(d) {
        let js = jacobian_s(params, f, &state);
        profile.spectral_radius.push(spectral_radius(&js)?);
        profile.operator_norm.push(operator_norm(&js)?);
        state = cell_step(params, f, &state);
    }
    Ok(profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub rmse_pred_vs_truth: f64,
    /// RMSE of the noisy continuation against the truth, when supplied.
    pub rmse_input_vs_truth: Option<f64>,
    /// `rmse_pred_vs_truth / rmse_input_vs_truth`.
    pub smoothness_ratio: Option<f64>,
    pub max_deviation: f64,
    /// `|x̄_{m+k} − f_{m+k}|` per round.
    pub per_step_deviation: Vec<f64>,
}

fn rms_distance(a: &[f64], b: &[f64], d: usize) -> (f64, Vec<f64>) {
    let per: Vec<f64> = a
        .chunks_exact(d)
        .zip(b.chunks_exact(d))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
        .collect();
    let rms = (per.iter().map(|e| e * e).sum::<f64>() / per.len() as f64).sqrt();
    (rms, per)
}

/// Compares a rollout with the noise-free continuation and, optionally, with
/// the noisy continuation an input of the same amplitude would have shown.
/// RMSE is `sqrt(mean_k |v_k − f_k|²)`.
pub fn smoothness(pred: &PredictionRun, truth_continuation: &[f64], noisy_continuation: Option<&[f64]>) -> Result<SmoothnessReport> {
    let d = pred.dim;
    if truth_continuation.len() != pred.predictions.len() {
        return Err(Error::invalid(format!(
            "truth continuation has {} values, prediction has {}",
            truth_continuation.len(),
            pred.predictions.len()
        )));
    }
    let (rmse_pred, per_step) = rms_distance(&pred.predictions, truth_continuation, d);
    let max_deviation = per_step.iter().copied().fold(0.0, f64::max);
    let (rmse_input, ratio) = match noisy_continuation {
        None => (None, None),
        Some(noisy) => {
            if noisy.len() != truth_continuation.len() {
                return Err(Error::invalid("noisy continuation has the wrong length"));
            }
            let (rmse_in, _) = rms_distance(noisy, truth_continuation, d);
            let ratio = if rmse_pred == 0.0 {
                0.0
            } else if rmse_in == 0.0 {
                f64::INFINITY
            } else {
                rmse_pred / rmse_in
            };
            (Some(rmse_in), Some(ratio))
        }
    };
    Ok(SmoothnessReport {
        rmse_pred_vs_truth: rmse_pred,
        rmse_input_vs_truth: rmse_input,
        smoothness_ratio: ratio,
        max_deviation,
        per_step_deviation: per_step,
    })
}

/// One fixed stretch of a trajectory observed under many noise draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterSpec {
    pub trajectory: TrajectorySpec,
    pub dt: f64,
    /// Index of the first input point on the grid `t_j = j * dt`.
    pub start: usize,
    /// Input length.
    pub m: usize,
    pub amplitude: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterReport {
    /// One-step prediction per trial.
    pub predictions: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// `f` at the target index.
    pub truth_target: Vec<f64>,
    /// The noisy version of the target point in each trial.
    pub noisy_targets: Vec<Vec<f64>>,
}

impl ScatterReport {
    /// `|mean − f_target|`.
    pub fn mean_error(&self) -> f64 {
        self.mean
            .iter()
            .zip(&self.truth_target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Runs one-step prediction on `trials` independent noisy realizations of
/// the same segment. Trial `k` draws its noise from `derive_seed(seed, k)`.
pub fn prediction_scatter(params: &NetworkParameters, spec: &ScatterSpec) -> Result<ScatterReport> {
    if spec.trials < 2 {
        return Err(Error::invalid("scatter needs at least two trials"));
    }
    if spec.m == 0 {
        return Err(Error::invalid("segment length must be at least 1"));
    }
    if spec.trajectory.dim() != params.d() {
        return Err(Error::invalid("trajectory and network dimensions differ"));
    }
    let d = params.d();
    let mut predictions = Vec::with_capacity(spec.trials);
    let mut noisy_targets = Vec::with_capacity(spec.trials);
    let mut truth_target = Vec::new();
    for k in 0..spec.trials {
        let noise = NoiseModel::for_spec(&spec.trajectory, spec.amplitude, derive_seed(spec.seed, k as u64));
        // Sampled from t = 0 so the grid matches every other consumer of the trajectory.
        let seq = sample(&spec.trajectory, 0.0, spec.dt, spec.start + spec.m + 1, &noise)?;
        let target = spec.start + spec.m;
        let pred = forward(params, seq.points_range(spec.start..target))?.prediction;
        predictions.push(pred);
        noisy_targets.push(seq.point(target).to_vec());
        if k == 0 {
            truth_target = seq.truth_at(target).to_vec();
        }
    }
    let mut mean = vec![0.0; d];
    for p in &predictions {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / spec.trials as f64;
        }
    }
    Ok(ScatterReport {
        predictions,
        mean,
        truth_target,
        noisy_targets,
    })
}
