//! Supervised discovery of CPDAGs from correlation matrices.
//!
//! The crate is organised around the pipeline it implements:
//!
//! * [`graph`]: adjacency-matrix encodings of DAGs and CPDAGs, d-separation,
//!   Markov equivalence, Meek orientation and consistent extensions.
//! * [`sim`]: random DAGs, linear Gaussian SEMs, correlation features and
//!   training corpora.
//! * [`net`]: the four-branch convolutional network mapping correlation
//!   matrices to edge-mark probabilities, with hand-written backpropagation.
//! * [`postprocess`]: cutoff and backwards PC-orientation (BPCO) turning
//!   probabilities into adjacency matrices.
//! * [`pc`]: the PC algorithm baseline with Fisher-z or oracle tests.
//! * [`metrics`]: adjacency and conditional orientation metrics.
//!
//! Adjacency matrices follow the convention `m[i][j] = 1` iff there is an
//! edge mark from `X_j` into `X_i`: a directed edge `X_j -> X_i` sets only
//! `m[i][j]`, an undirected edge sets both cells.

pub mod error;
pub mod graph;
pub mod metrics;
pub mod net;
pub mod pc;
pub mod postprocess;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
pub use graph::{PdagMatrix, VStructure};
