//! Colored geometric random graphs (CGRGs) on the flat d-torus.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] samples CGRGs with color-dependent connection radii.
//! * [`empirical`] extracts local views, empirical measures and type pairs.
//! * [`kernel`] evaluates the Poisson-fiber limit law, relative entropy and
//!   the rate functions built on it.
//! * [`distortion`] holds single-letter distortions and distortion balls.
//! * [`rate_distortion`] computes cumulants, Legendre transforms and
//!   Monte Carlo ball exponents.
//! * [`wsn`] fits sensor-network data to the two-class model.

pub mod distortion;
pub mod empirical;
pub mod error;
pub mod graph;
pub mod kernel;
pub mod numeric;
pub mod rate_distortion;
pub mod rng;
pub mod wsn;

pub use distortion::{DistortionFn, DistortionKind};
pub use empirical::{LocalView, Measure, TypePair};
pub use error::{Error, Result};
pub use graph::{Alphabet, ColoredGeometricGraph, ModelParams};
pub use kernel::PoissonFiberKernel;
pub use numeric::ExtReal;
