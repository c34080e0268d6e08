//! The recurrent network: parameters, state map, readout, and Jacobians.

mod cell;
mod params;

pub use cell::{
    cell_step, final_state, forward, jacobian_s, jacobian_x, jacobians, readout, ForwardPass,
    InnerState,
};
pub(crate) use cell::{advance, check_sequence, lstm_preactivations, readout_exposed, sigmoid};
pub use params::{init_params, Activation, CellKind, Gate, NetworkParameters, ParamBlock};
