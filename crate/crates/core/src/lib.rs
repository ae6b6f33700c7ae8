//! Feasibility engine for quantum (SLOCC) and stochastic classical network coding.
//!
//! A distribution task over a network is achievable iff the task tensor factors
//! into one tensor per internal node, contracted along the network's edges. The
//! only difference between the quantum and classical settings is the scalar
//! domain: complex numbers versus non-negative reals.
//!
//! Module map:
//! - [`tensor`]: labeled dense tensors, contraction, distance, scale matching.
//! - [`network`]: the weighted graph model and canonical instances.
//! - [`task`]: distribution task tensors and their builders.
//! - [`verify`]: node assignments, verification, lifting and bundled solutions.
//! - [`search`]: alternating least-squares search and the reduced square search.
//! - [`rank`]: numerical rank, fooling sets and non-negative rank bounds.
//! - [`sim`]: state-vector simulation of the corresponding quantum protocols.
//! - [`io`]: JSON file formats for networks, tasks, assignments and protocols.

pub mod error;
pub mod io;
pub mod network;
pub mod rank;
pub mod search;
pub mod sim;
pub mod task;
pub mod tensor;
pub mod verify;

mod linalg;

pub use error::{Error, Result};
pub use network::{CanonicalInstance, Network};
pub use task::DistributionTask;
pub use tensor::{Axis, DenseTensor, Domain, Scalar};
pub use verify::NodeAssignment;
