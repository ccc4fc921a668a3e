//! Subspace-based classical simulation of parameterized quantum circuits.

pub mod circuit;
pub mod dense;
pub mod diagnostics;
pub mod dla;
pub mod error;
pub mod expectation;
pub mod gsim;
pub mod hamming;
pub mod lightcone;
pub mod matchgate;
pub mod pauli;
pub mod propagation;
pub mod seed;
pub mod shadows;
pub mod statevector;

pub use circuit::{Circuit, FixedGate, Gate, GateKind, ParamDistribution, SamplingLaw};
pub use error::{Result, SimError};
pub use pauli::{Pauli, PauliString, PauliSum, Phase};
pub use statevector::DenseState;
