//! Statistical shape analysis of discrete skeletal representations.
//!
//! A ds-rep samples an object's interior as a skeletal sheet plus spokes
//! reaching the boundary. This crate implements two parameterizations of
//! such models and the statistics on top of them:
//!
//! * the conventional global parameterization (`GpDsRep`), analyzed after
//!   Procrustes alignment, and
//! * a hierarchical local parameterization (`LpDsRep`) in which every frame,
//!   connection and spoke is expressed relative to its parent frame, making
//!   the representation translation- and rotation-invariant by construction.
//!
//! On top of the data model sit population means (including constrained
//! frame means on SO(3)), nonparametric permutation tests per geometric
//! object property with BH/Bonferroni control, and a simulation toolkit for
//! bending, twisting and noising skeletal shapes.

pub mod dsrep;
pub mod error;
pub mod hierarchy;
pub mod hypothesis;
pub mod io;
pub mod reparam;
pub mod report;
pub mod seeding;
pub mod simulate;
pub mod sphere;
pub mod stats;

pub use error::{Error, Result};
