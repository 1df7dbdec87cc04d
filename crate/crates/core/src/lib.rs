//! Learning causal Bayesian networks from incomplete categorical data.
//!
//! Structure comes from bootstrap-resampled Structural EM under prior
//! knowledge (required / forbidden edges, temporal tiers); the bootstrap
//! graphs are averaged into a single network by thresholding edge
//! confidence, and the network's parameters are fitted by EM. The fitted
//! network predicts the posterior of a target variable, which is evaluated
//! with ROC/AUC.

pub mod bn;
pub mod bootstrap;
pub mod data;
mod error;
pub mod eval;
pub mod graph;
pub mod params;
pub mod structure;

pub use bn::{BnError, CausalBayesianNetwork, Cpt, Variable};
pub use data::{Dataset, DataError};
pub use error::{Error, Result};
pub use graph::{Constraints, Dag, EditMove, GraphError, MoveKind, PriorKnowledge};

#[cfg(feature = "cli")]
pub mod cli;
