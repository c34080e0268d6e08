use crate::error::{Error, Result};
use crate::linalg::{dot, matvec_acc, Matrix};

use super::params::{Activation, CellKind, NetworkParameters};

/// Recurrent state. For the basic cell this is the activation vector `s`;
/// for the LSTM it is the extended vector `[h, c]`. The readout only ever
/// sees the first `n` entries (`s` or `h`).
#[derive(Debug, Clone, PartialEq)]
pub struct InnerState {
    n: usize,
    data: Vec<f64>,
}

impl InnerState {
    pub fn zero(params: &NetworkParameters) -> Self {
        InnerState {
            n: params.n(),
            data: vec![0.0; params.state_dim()],
        }
    }

    /// Builds a state from its full vector (`n` or `2n` entries).
    pub fn from_vec(params: &NetworkParameters, data: Vec<f64>) -> Result<Self> {
        if data.len() != params.state_dim() {
            return Err(Error::invalid(format!(
                "state has {} entries, network expects {}",
                data.len(),
                params.state_dim()
            )));
        }
        Ok(InnerState { n: params.n(), data })
    }

    /// The part of the state fed to the readout.
    pub fn exposed(&self) -> &[f64] {
        &self.data[..self.n]
    }

    /// LSTM cell memory, if any.
    pub fn cell(&self) -> Option<&[f64]> {
        (self.data.len() > self.n).then(|| &self.data[self.n..])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gate pre-activations `U_g x + V_g h + c_g` for all four LSTM gates,
/// written to `pre` (length `4n`, gate-major).
pub(crate) fn lstm_preactivations(params: &NetworkParameters, x: &[f64], h: &[f64], pre: &mut [f64]) {
    let n = params.n();
    for g in 0..4 {
        let (u, v, c) = params.gate(g);
        let out = &mut pre[g * n..(g + 1) * n];
        out.copy_from_slice(c);
        matvec_acc(out, u, x);
        matvec_acc(out, v, h);
    }
}

/// One application of the state map, writing the new full state into `out`.
/// `scratch` is resized as needed and may be reused across calls.
pub(crate) fn step_into(
    params: &NetworkParameters,
    x: &[f64],
    s: &[f64],
    out: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    let n = params.n();
    match params.kind() {
        CellKind::Basic => {
            let (wx, ws, b) = params.gate(0);
            out.copy_from_slice(b);
            matvec_acc(out, wx, x);
            matvec_acc(out, ws, s);
            if params.activation() == Activation::Tanh {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        CellKind::Lstm => {
            scratch.resize(4 * n, 0.0);
            lstm_preactivations(params, x, &s[..n], scratch);
            let (h_out, c_out) = out.split_at_mut(n);
            let c_prev = &s[n..];
            for k in 0..n {
                let i = sigmoid(scratch[k]);
                let f = sigmoid(scratch[n + k]);
                let o = sigmoid(scratch[2 * n + k]);
                let g = scratch[3 * n + k].tanh();
                let c = f * c_prev[k] + i * g;
                c_out[k] = c;
                h_out[k] = o * c.tanh();
            }
        }
    }
}

fn check_shapes(params: &NetworkParameters, x: &[f64], s: &InnerState) {
    assert_eq!(x.len(), params.d(), "input has wrong dimension");
    assert_eq!(s.dim(), params.state_dim(), "state has wrong dimension");
}

/// `s' = F(x, s)`.
///
/// # Panics
///
/// If `x` or `s` do not match the network's shapes.
pub fn cell_step(params: &NetworkParameters, x: &[f64], s: &InnerState) -> InnerState {
    check_shapes(params, x, s);
    let mut out = vec![0.0; params.state_dim()];
    let mut scratch = Vec::new();
    step_into(params, x, &s.data, &mut out, &mut scratch);
    let next = InnerState { n: s.n, data: out };
    debug_assert!(
        !x.iter().all(|v| v.is_finite()) || !s.is_finite() || next.is_finite(),
        "non-finite state from finite input"
    );
    next
}

/// `x̄ = W s + b` on the exposed state.
pub fn readout(params: &NetworkParameters, s: &InnerState) -> Vec<f64> {
    assert_eq!(s.dim(), params.state_dim(), "state has wrong dimension");
    readout_exposed(params, s.exposed())
}

pub(crate) fn readout_exposed(params: &NetworkParameters, h: &[f64]) -> Vec<f64> {
    let (w, b) = params.readout_parts();
    let n = params.n();
    b.iter()
        .enumerate()
        .map(|(r, &br)| br + dot(&w[r * n..(r + 1) * n], h))
        .collect()
}

/// States after each input and the one-step prediction from the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub states: Vec<InnerState>,
    pub prediction: Vec<f64>,
}

/// Feeds `xs` (row-major `m × d`) through the network from the zero state.
pub fn forward(params: &NetworkParameters, xs: &[f64]) -> Result<ForwardPass> {
    check_sequence(params, xs)?;
    let d = params.d();
    let mut states = Vec::with_capacity(xs.len() / d);
    let mut scratch = Vec::new();
    let mut s = InnerState::zero(params);
    for x in xs.chunks_exact(d) {
        let mut next = vec![0.0; params.state_dim()];
        step_into(params, x, &s.data, &mut next, &mut scratch);
        s = InnerState { n: s.n, data: next };
        states.push(s.clone());
    }
    let prediction = readout(params, &s);
    Ok(ForwardPass { states, prediction })
}

pub(crate) fn check_sequence(params: &NetworkParameters, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::invalid("input sequence is empty"));
    }
    if !xs.len().is_multiple_of(params.d()) {
        return Err(Error::invalid(format!(
            "input of {} values is not a whole number of {}-dimensional points",
            xs.len(),
            params.d()
        )));
    }
    Ok(())
}

/// Advances `state` over `xs` in place without keeping the intermediate states.
pub(crate) fn advance(params: &NetworkParameters, state: &mut Vec<f64>, xs: &[f64], scratch: &mut Vec<f64>) {
    let mut next = vec![0.0; state.len()];
    for x in xs.chunks_exact(params.d()) {
        step_into(params, x, state, &mut next, scratch);
        std::mem::swap(state, &mut next);
    }
}

/// Final state after feeding `xs` from the zero state.
pub fn final_state(params: &NetworkParameters, xs: &[f64]) -> Result<InnerState> {
    check_sequence(params, xs)?;
    let mut s = vec![0.0; params.state_dim()];
    advance(params, &mut s, xs, &mut Vec::new());
    Ok(InnerState { n: params.n(), data: s })
}

/// Analytic `∂F/∂x` and `∂F/∂s` at `(x, s)`, shaped `state_dim × d` and
/// `state_dim × state_dim`.
pub fn jacobians(params: &NetworkParameters, x: &[f64], s: &InnerState) -> (Matrix, Matrix) {
    check_shapes(params, x, s);
    let (n, d) = (params.n(), params.d());
    let sd = params.state_dim();
    let mut jx = Matrix::zeros(sd, d);
    let mut js = Matrix::zeros(sd, sd);
    match params.kind() {
        CellKind::Basic => {
            let next = cell_step(params, x, s);
            let (wx, ws, _) = params.gate(0);
            for k in 0..n {
                let a = match params.activation() {
                    Activation::Tanh => 1.0 - next.data[k] * next.data[k],
                    Activation::Identity => 1.0,
                };
                for j in 0..d {
                    jx[(k, j)] = a * wx[k * d + j];
                }
                for j in 0..n {
                    js[(k, j)] = a * ws[k * n + j];
                }
            }
        }
        CellKind::Lstm => {
            let mut pre = vec![0.0; 4 * n];
            lstm_preactivations(params, x, s.exposed(), &mut pre);
            let c_prev = &s.data[n..];
            let (ui, vi, _) = params.gate(0);
            let (uf, vf, _) = params.gate(1);
            let (uo, vo, _) = params.gate(2);
            let (ug, vg, _) = params.gate(3);
            for k in 0..n {
                let i = sigmoid(pre[k]);
                let f = sigmoid(pre[n + k]);
                let o = sigmoid(pre[2 * n + k]);
                let g = pre[3 * n + k].tanh();
                let c = f * c_prev[k] + i * g;
                let tc = c.tanh();
                // Sensitivities of c' and h' to each gate pre-activation.
                let dc_di = g * i * (1.0 - i);
                let dc_df = c_prev[k] * f * (1.0 - f);
                let dc_dg = i * (1.0 - g * g);
                let dh_dc = o * (1.0 - tc * tc);
                let dh_do = tc * o * (1.0 - o);

                let row = |u: &[f64], j: usize, w: usize| u[k * w + j];
                for j in 0..d {
                    let dc = dc_di * row(ui, j, d) + dc_df * row(uf, j, d) + dc_dg * row(ug, j, d);
                    jx[(n + k, j)] = dc;
                    jx[(k, j)] = dh_do * row(uo, j, d) + dh_dc * dc;
                }
                for j in 0..n {
                    let dc = dc_di * row(vi, j, n) + dc_df * row(vf, j, n) + dc_dg * row(vg, j, n);
                    js[(n + k, j)] = dc;
                    js[(k, j)] = dh_do * row(vo, j, n) + dh_dc * dc;
                }
                js[(n + k, n + k)] = f;
                js[(k, n + k)] = dh_dc * f;
            }
        }
    }
    (jx, js)
}

pub fn jacobian_x(params: &NetworkParameters, x: &[f64], s: &InnerState) -> Matrix {
    jacobians(params, x, s).0
}

pub fn jacobian_s(params: &NetworkParameters, x: &[f64], s: &InnerState) -> Matrix {
    jacobians(params, x, s).1
}
