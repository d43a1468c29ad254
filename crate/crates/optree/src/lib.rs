//! Globally optimal model trees — decision trees with linear SVM leaf
//! models — learned by solving mixed-integer linear programs with an
//! embedded branch-and-bound solver.

pub mod error;
pub mod lu;
pub mod milp;
pub mod bnb;
pub mod cli;
pub mod data;
pub mod evaluation;
pub mod formulation;
pub mod simplex;
pub mod synth;
pub mod topology;
pub mod tree;
pub mod tuner;

pub use error::{Error, Result};
