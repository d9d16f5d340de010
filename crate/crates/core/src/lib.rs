//! Mean-field Kuramoto stability toolkit: partially locked states, their
//! linear spectrum, weighted-norm field evolution, finite ensembles and
//! the bimodal bifurcation diagram.

pub mod bicauchy;
pub mod dist;
pub mod meanfield;
pub mod error;
pub mod finiten;
pub mod pls;
pub mod spectral;
pub mod quad;

pub use dist::{FrequencyDistribution, WeightedNorm};
pub use error::{KdError, Result};
