//! Mean curvature flow of radial graphs over the self-shrinking cylinder
//! `R x S^1(sqrt 2)`: steppers, Gaussian distance diagnostics, the
//! degenerate/nondegenerate classification, perturbation experiments and
//! barrier checks.

pub mod error;
pub mod geometry;
pub mod io;
pub mod spectral;
pub mod flow;
pub mod metrics;
pub mod classify;
pub mod perturb;
pub mod barriers;
pub mod config;
pub mod cli;

pub use error::{Error, Result};
