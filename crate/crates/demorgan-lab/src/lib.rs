//! Finite-model toolkit for Belnap-Dunn logic and its extensions.
//!
//! Formulas and rules live in [`formula`], finite De Morgan matrices in [`matrix`],
//! their dual frames in [`frame`], graphs in [`graph`], and the graph-to-matrix
//! constructions in [`bridge`]. [`logics`] names the standard logics, and [`suite`]
//! holds the acceptance checks shared by the CLI and the test suite.

pub mod bridge;
pub mod cli;
pub mod error;
pub mod formula;
pub mod frame;
pub mod graph;
pub mod logics;
pub mod matrix;
pub mod pool;
pub mod suite;

pub use error::{Error, Result};
pub use formula::{Formula, RuleInstance};
pub use frame::Frame;
pub use graph::Graph;

pub use matrix::FinMatrix;
