//! Fluctuation theory toolkit for Markov additive processes (MAPs) with a
//! finite modulating space: exact event-driven path simulation, first-passage
//! overshoots, closed-form overshoot resolvents and stationary laws, ladder
//! height estimation, convolution identities relating parent and ladder Levy
//! systems, ergodicity and beta-mixing diagnostics, and the bridge to real
//! self-similar Markov processes.

pub mod config;
pub mod ergodicity;
pub mod error;
pub mod exponents;
pub mod ladder_est;
pub mod ladder_sim;
pub mod lamperti;
pub mod law;
pub mod model;
pub mod path;
pub mod quad;
pub mod rng;
pub mod samplers;
pub mod simulate;
pub mod vigon;

pub use error::{MapError, Result};
