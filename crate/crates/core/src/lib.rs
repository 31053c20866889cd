//! Equilibrium states, transfer operators and decay of correlations for skew products
//! `F(x, y) = (f(x), G(x, y))` with a piecewise expanding base and contracting fibers on
//! `K = [0, 1]`.

pub mod base_rpf;
pub mod disintegration;
pub mod error;
pub mod fit;
pub mod holder_norm;
pub mod io;
pub mod signed_measure;
pub mod statistics;
pub mod systems;
pub mod transfer;

pub use base_rpf::{build_rpf, twisted_operator, BaseMap, HypothesisReport, Potential, RPFDiscretization};
pub use disintegration::{CellGrid, DisintegratedMeasure, Observable, Reference};
pub use error::{Error, Result};
pub use holder_norm::{dual_norm, HolderExponent};
pub use signed_measure::AtomicSignedMeasure;
pub use transfer::{FiberMap, OperatorConfig, SkewSystem};
