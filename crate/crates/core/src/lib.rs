//! Seq-to-one recurrent predictors trained on noisy trajectories.
//!
//! The crate covers the whole pipeline: noisy trajectory generation
//! ([`trajectory`]), the recurrent network itself ([`rnn`]), training by
//! backpropagation through time with Adam ([`training`]), the three rollout
//! algorithms ([`predict`]), noise-propagation and smoothness diagnostics
//! ([`analysis`]), and the on-disk formats ([`io`]).

pub mod analysis;
pub mod error;
pub mod io;
pub mod linalg;
pub mod predict;
pub mod rnn;
pub mod seed;
pub mod trajectory;
pub mod training;

pub use error::{Error, Result};
