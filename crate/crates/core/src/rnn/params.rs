use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Basic,
    Lstm,
}

impl std::fmt::Display for CellKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CellKind::Basic => "basic",
            CellKind::Lstm => "lstm",
        })
    }
}

/// Nonlinearity of the basic cell. `Identity` turns the cell into a linear
/// map, which makes first-order noise propagation exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

/// LSTM gates in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];

    pub fn name(self) -> &'static str {
        match self {
            Gate::Input => "input",
            Gate::Forget => "forget",
            Gate::Output => "output",
            Gate::Candidate => "candidate",
        }
    }
}

/// A contiguous block of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_bias(&self) -> bool {
        matches!(self.name.as_str(), "b" | "b_s") || self.name.starts_with("c_")
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Weights of a one-layer recurrent network with a linear readout, stored
/// as one flat vector.
///
/// Layout, all matrices row-major:
///
/// * basic cell: `W_x (n×d)`, `W_s (n×n)`, `b_s (n)`
/// * LSTM cell: for each gate in input, forget, output, candidate order:
///   `U (n×d)`, `V (n×n)`, `c (n)`
/// * readout: `W (d×n)`, `b (d)`
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters {
    kind: CellKind,
    n: usize,
    d: usize,
    activation: Activation,
    data: Vec<f64>,
}

impl NetworkParameters {
    pub fn zeros(kind: CellKind, n: usize, d: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("network needs at least one neuron"));
        }
        if !(1..=2).contains(&d) {
            return Err(Error::invalid(format!("input dimension must be 1 or 2, got {d}")));
        }
        Ok(NetworkParameters {
            kind,
            n,
            d,
            activation: Activation::Tanh,
            data: vec![0.0; Self::param_count(kind, n, d)],
        })
    }

    pub fn from_flat(kind: CellKind, n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(kind, n, d)?;
        if data.len() != p.data.len() {
            return Err(Error::invalid(format!(
                "expected {} parameters for {kind} n={n} d={d}, got {}",
                p.data.len(),
                data.len()
            )));
        }
        p.data = data;
        Ok(p)
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn param_count(kind: CellKind, n: usize, d: usize) -> usize {
        Self::cell_len_for(kind, n, d) + d * n + d
    }

    fn gate_block_len(n: usize, d: usize) -> usize {
        n * d + n * n + n
    }

    fn cell_len_for(kind: CellKind, n: usize, d: usize) -> usize {
        match kind {
            CellKind::Basic => Self::gate_block_len(n, d),
            CellKind::Lstm => 4 * Self::gate_block_len(n, d),
        }
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    /// Neuron count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Input/output dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Dimension of the full recurrent state: `n` for the basic cell,
    /// `2n` (hidden then cell) for the LSTM.
    pub fn state_dim(&self) -> usize {
        match self.kind {
            CellKind::Basic => self.n,
            CellKind::Lstm => 2 * self.n,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Length of the cell part of the flat vector; the readout follows it.
    pub fn cell_len(&self) -> usize {
        Self::cell_len_for(self.kind, self.n, self.d)
    }

    /// Offset of the `U`/`W_x` block of gate `g` (basic cell: `g = 0`).
    pub(crate) fn gate_offset(&self, g: usize) -> usize {
        g * Self::gate_block_len(self.n, self.d)
    }

    /// `(input weights, recurrent weights, bias)` of gate `g`.
    pub(crate) fn gate(&self, g: usize) -> (&[f64], &[f64], &[f64]) {
        let (n, d) = (self.n, self.d);
        let o = self.gate_offset(g);
        (
            &self.data[o..o + n * d],
            &self.data[o + n * d..o + n * d + n * n],
            &self.data[o + n * d + n * n..o + n * d + n * n + n],
        )
    }

    /// Readout `(W, b)`.
    pub(crate) fn readout_parts(&self) -> (&[f64], &[f64]) {
        let o = self.cell_len();
        let (n, d) = (self.n, self.d);
        (&self.data[o..o + d * n], &self.data[o + d * n..o + d * n + d])
    }

    /// Named blocks of the flat vector in storage order.
    pub fn blocks(&self) -> Vec<ParamBlock> {
        let (n, d) = (self.n, self.d);
        let mut out = Vec::new();
        let mut push = |name: String, rows: usize, cols: usize, offset: &mut usize| {
            out.push(ParamBlock {
                name,
                offset: *offset,
                rows,
                cols,
            });
            *offset += rows * cols;
        };
        let mut off = 0;
        match self.kind {
            CellKind::Basic => {
                push("W_x".into(), n, d, &mut off);
                push("W_s".into(), n, n, &mut off);
                push("b_s".into(), n, 1, &mut off);
            }
            CellKind::Lstm => {
                for g in Gate::ALL {
                    push(format!("U_{}", g.name()), n, d, &mut off);
                    push(format!("V_{}", g.name()), n, n, &mut off);
                    push(format!("c_{}", g.name()), n, 1, &mut off);
                }
            }
        }
        push("W".into(), d, n, &mut off);
        push("b".into(), d, 1, &mut off);
        out
    }

    pub fn block(&self, name: &str) -> Option<ParamBlock> {
        self.blocks().into_iter().find(|b| b.name == name)
    }

    pub fn block_slice(&self, name: &str) -> Option<&[f64]> {
        self.block(name).map(|b| &self.data[b.range()])
    }

    pub fn block_slice_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let b = self.block(name)?;
        Some(&mut self.data[b.range()])
    }

    /// Whether a flat index addresses a bias entry (used to skip biases in
    /// initialization and relative-error reporting).
    pub fn is_bias_index(&self, idx: usize) -> bool {
        self.blocks()
            .iter()
            .any(|b| b.is_bias() && b.range().contains(&idx))
    }
}

/// Random parameters: weights uniform on `[-1/√n, 1/√n]`, biases zero, and
/// the LSTM forget-gate bias set to one.
pub fn init_params(kind: CellKind, n: usize, d: usize, seed: u64) -> Result<NetworkParameters> {
    let mut p = NetworkParameters::zeros(kind, n, d)?;
    let r = 1.0 / (n as f64).sqrt();
    let mut rng = rng_from_seed(seed);
    for block in p.blocks() {
        let slice = &mut p.data[block.range()];
        if block.is_bias() {
            let fill = if block.name == "c_forget" { 1.0 } else { 0.0 };
            slice.iter_mut().for_each(|x| *x = fill);
        } else {
            slice
                .iter_mut()
                .for_each(|x| *x = rng.random_range(-r..=r));
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let a = init_params(CellKind::Basic, 20, 1, 7).unwrap();
        let b = init_params(CellKind::Basic, 20, 1, 7).unwrap();
        assert_eq!(a, b);
        let c = init_params(CellKind::Basic, 20, 1, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_bounds() {
        let p = init_params(CellKind::Basic, 20, 1, 7).unwrap();
        let r = 1.0 / 20f64.sqrt();
        assert!(p.as_slice().iter().all(|w| w.abs() <= r));
        assert!(p.block_slice("b_s").unwrap().iter().all(|&b| b == 0.0));
        assert!(p.block_slice("b").unwrap().iter().all(|&b| b == 0.0));
        assert!(p.block_slice("W_x").unwrap().iter().any(|&w| w != 0.0));
    }

    #[test]
    fn lstm_forget_bias_is_one() {
        let p = init_params(CellKind::Lstm, 20, 2, 3).unwrap();
        // Forget gate block starts after the input gate block.
        let block = 20 * 2 + 20 * 20 + 20;
        let off = block + 20 * 2 + 20 * 20;
        assert!(p.as_slice()[off..off + 20].iter().all(|&b| b == 1.0));
        assert_eq!(p.block("c_forget").unwrap().offset, off);
        for name in ["c_input", "c_output", "c_candidate", "b"] {
            assert!(p.block_slice(name).unwrap().iter().all(|&b| b == 0.0), "{name}");
        }
    }

    #[test]
    fn layout_covers_vector() {
        for kind in [CellKind::Basic, CellKind::Lstm] {
            for (n, d) in [(1, 1), (5, 2), (20, 1)] {
                let p = NetworkParameters::zeros(kind, n, d).unwrap();
                let blocks = p.blocks();
                let mut off = 0;
                for b in &blocks {
                    assert_eq!(b.offset, off);
                    off += b.len();
                }
                assert_eq!(off, p.len());
                assert_eq!(off, NetworkParameters::param_count(kind, n, d));
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(NetworkParameters::zeros(CellKind::Basic, 0, 1).is_err());
        assert!(NetworkParameters::zeros(CellKind::Lstm, 3, 3).is_err());
        assert!(NetworkParameters::from_flat(CellKind::Basic, 2, 1, vec![0.0; 3]).is_err());
    }
}
