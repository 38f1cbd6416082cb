//! Numerical toolkit for Musielak-Orlicz function spaces.
//!
//! The crate computes modulars and Luxemburg norms for a catalog of
//! parametric Musielak-Orlicz functions, estimates singular-point sets with
//! machine-checkable divergence certificates, constructs smooth
//! compactly-supported approximants of indicator functions, and produces
//! refutation witnesses for smooth candidates where approximation is
//! impossible.

pub mod density;
pub mod descriptor;
pub mod error;
pub mod experiment;
pub mod family;
pub mod function;
pub mod geometry;
pub mod luxemburg;
pub mod modular;
pub mod rationals;
pub mod singular;

pub use error::{Error, Result};
pub use geometry::{nested_open_covers, set_ops, BoxSet, Cuboid, SetOp};
