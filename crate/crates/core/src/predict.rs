//! Autoregressive rollouts: moving window (MW), expanding window (EW), and
//! the memoryless autonomous map (ML).
//!
//! After the first round, EW only ever appends the previous prediction to a
//! sequence whose state it has already computed, so EW and ML produce the
//! same sequence. ML drops the input buffer and iterates
//! `H(s) = F(L(s), s)` from the last input state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rnn::{cell_step, check_sequence, final_state, readout, InnerState, NetworkParameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Mw,
    Ew,
    Ml,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Mw => "mw",
            Algorithm::Ew => "ew",
            Algorithm::Ml => "ml",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mw" => Ok(Algorithm::Mw),
            "ew" => Ok(Algorithm::Ew),
            "ml" => Ok(Algorithm::Ml),
            other => Err(Error::invalid(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// How EW obtains the state of the grown sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EwMode {
    /// Extend the retained state by one step per round.
    #[default]
    Incremental,
    /// Re-feed the whole sequence from the zero state every round.
    Recompute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRun {
    pub algorithm: Algorithm,
    pub dim: usize,
    /// Row-major `m × dim`.
    pub input: Vec<f64>,
    pub horizon: usize,
    /// Row-major `horizon × dim`: `x̄_{m+1} .. x̄_{m+p}`.
    pub predictions: Vec<f64>,
    /// Exposed state at the readout of each round.
    pub state_trace: Vec<Vec<f64>>,
    pub window_cap: Option<usize>,
}

impl PredictionRun {
    pub fn input_len(&self) -> usize {
        self.input.len() / self.dim
    }

    pub fn prediction(&self, k: usize) -> &[f64] {
        &self.predictions[k * self.dim..(k + 1) * self.dim]
    }
}

fn check_args(params: &NetworkParameters, input: &[f64], p: usize) -> Result<()> {
    check_sequence(params, input)?;
    if p == 0 {
        return Err(Error::invalid("prediction horizon must be at least 1"));
    }
    Ok(())
}

fn run(algorithm: Algorithm, params: &NetworkParameters, input: &[f64], p: usize, cap: Option<usize>) -> PredictionRun {
    PredictionRun {
        algorithm,
        dim: params.d(),
        input: input.to_vec(),
        horizon: p,
        predictions: Vec::with_capacity(p * params.d()),
        state_trace: Vec::with_capacity(p),
        window_cap: cap,
    }
}

/// MW rollout, calling `on_round(k, window)` with the window fed at round `k` (0-based).
pub fn predict_mw_with<F>(params: &NetworkParameters, input: &[f64], p: usize, mut on_round: F) -> Result<PredictionRun>
where
    F: FnMut(usize, &[f64]),
{
    check_args(params, input, p)?;
    let d = params.d();
    let mut out = run(Algorithm::Mw, params, input, p, None);
    let mut window = input.to_vec();
    for k in 0..p {
        on_round(k, &window);
        let state = final_state(params, &window)?;
        let pred = readout(params, &state);
        out.state_trace.push(state.exposed().to_vec());
        window.drain(..d);
        window.extend_from_slice(&pred);
        out.predictions.extend_from_slice(&pred);
    }
    Ok(out)
}

/// Moving window: drop the oldest point and append the newest prediction.
pub fn predict_mw(params: &NetworkParameters, input: &[f64], p: usize) -> Result<PredictionRun> {
    predict_mw_with(params, input, p, |_, _| {})
}

/// Expanding window: append every prediction to the input. With a cap `M`
/// the window stops growing at `M` points and slides from then on.
pub fn predict_ew(params: &NetworkParameters, input: &[f64], p: usize, cap: Option<usize>) -> Result<PredictionRun> {
    predict_ew_mode(params, input, p, cap, EwMode::Incremental)
}

pub fn predict_ew_mode(
    params: &NetworkParameters,
    input: &[f64],
    p: usize,
    cap: Option<usize>,
    mode: EwMode,
) -> Result<PredictionRun> {
    check_args(params, input, p)?;
    let d = params.d();
    let m = input.len() / d;
    if let Some(limit) = cap {
        if m > limit {
            return Err(Error::invalid(format!(
                "input length {m} exceeds the window cap {limit}"
            )));
        }
    }
    let mut out = run(Algorithm::Ew, params, input, p, cap);
    let mut window = input.to_vec();
    let mut state = final_state(params, &window)?;
    for k in 0..p {
        let pred = readout(params, &state);
        out.state_trace.push(state.exposed().to_vec());
        out.predictions.extend_from_slice(&pred);
        if k + 1 == p {
            break;
        }
        let at_cap = cap.is_some_and(|limit| window.len() / d >= limit);
        window.extend_from_slice(&pred);
        if at_cap {
            window.drain(..d);
            state = final_state(params, &window)?;
        } else {
            state = match mode {
                EwMode::Incremental => cell_step(params, &pred, &state),
                EwMode::Recompute => final_state(params, &window)?,
            };
        }
        if let Some(limit) = cap {
            debug_assert!(window.len() / d <= limit);
        }
    }
    Ok(out)
}

/// `H(s) = F(L(s), s)`: feed the network its own prediction.
pub fn autonomous_map(params: &NetworkParameters, s: &InnerState) -> InnerState {
    cell_step(params, &readout(params, s), s)
}

/// Memoryless rollout: one pass over the input, then iterate [`autonomous_map`].
pub fn predict_ml(params: &NetworkParameters, input: &[f64], p: usize) -> Result<PredictionRun> {
    check_args(params, input, p)?;
    let mut out = run(Algorithm::Ml, params, input, p, None);
    let mut state = final_state(params, input)?;
    for k in 0..p {
        out.predictions.extend_from_slice(&readout(params, &state));
        out.state_trace.push(state.exposed().to_vec());
        if k + 1 < p {
            state = autonomous_map(params, &state);
        }
    }
    Ok(out)
}

/// Dispatches on `algorithm`; `cap` only affects EW.
pub fn predict(
    params: &NetworkParameters,
    algorithm: Algorithm,
    input: &[f64],
    p: usize,
    cap: Option<usize>,
) -> Result<PredictionRun> {
    match algorithm {
        Algorithm::Mw => predict_mw(params, input, p),
        Algorithm::Ew => predict_ew(params, input, p, cap),
        Algorithm::Ml => predict_ml(params, input, p),
    }
}

/// Largest component-wise difference between two prediction sequences.
pub fn max_abs_difference(a: &PredictionRun, b: &PredictionRun) -> f64 {
    assert_eq!(a.predictions.len(), b.predictions.len());
    a.predictions
        .iter()
        .zip(&b.predictions)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
