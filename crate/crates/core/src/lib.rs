//! Discretization of sampled metric measure spaces into ε-net graphs, with
//! numerical certificates for doubling, measure comparability, bi-Lipschitz
//! distortion, discrete Poincaré inequalities, one-complex extensions and
//! pointed Gromov-Hausdorff conditions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod complex;
pub mod error;
pub mod exec;
pub mod ghcheck;
pub mod graph;
mod index;
pub mod net;
pub mod poincare;
pub mod reproduce;
pub mod spaces;
pub mod unity;

pub use error::{Error, Result};
pub use graph::{build_graph, NetGraph, VertexFunction};
pub use net::{build_maximal_net, hausdorff_gap, refine_nested, EpsNet};
pub use spaces::{BallSpec, MeasureKind, Rational, SampledSpace};
pub use ghcheck::{gh_condition_check, multiscale_report, MultiscaleConfig, MultiscaleReport};

/// Library version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
