//! Inference of quantum causal structure between two qubits from
//! interventionist and passive Pauli-measurement data.

pub mod causal_map;
pub mod demo;
pub mod error;
pub mod fitting;
pub mod linalg;
pub mod passive;
pub mod qubit;
pub mod scenario;
pub mod serial;
pub mod tomography;

pub use causal_map::{
    choi_fidelity, make_cc_map, make_dc_map, mix_maps, CausalMap, ChoiState, ValidityReport,
};
pub use error::{Error, Result};
pub use linalg::{CMatrix, Layout, Sys, C64};
pub use qubit::{
    bell_state, pauli, pauli_projector, Bell, ChannelOperator, DensityOperator, Outcome, PauliIndex,
};
pub use scenario::{CountTable, Distribution, Scheme, Tuple};
