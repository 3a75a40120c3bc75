//! Exact single-excitation dynamics of an XX spin chain whose two edge qubits
//! couple to independent non-Markovian bosonic reservoirs.

pub mod kernels;
pub mod inversion;
pub mod laplace;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod quad;
pub mod specfun;
