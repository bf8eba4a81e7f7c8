//! Complex-frequency reflection zeros, pulse synthesis and transient
//! simulation of three qubits coupled to a shared bus.

pub mod bloch;
pub mod circuit;
pub mod config;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod ode;
pub mod poly;
pub mod protocol;
pub mod pulse;
pub mod response;

pub use error::{Error, Result};
pub use model::{BlochParams, CircuitParams, ComplexFreq, QConvention};
