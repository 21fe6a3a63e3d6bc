//! Simulation and non-parametric kernel estimation for multivariate Hawkes
//! processes from second-order statistics.
//!
//! The estimator works in the frequency domain: the binned-count covariance is
//! transformed, divided by the bin-overlap spectrum, square-rooted as a
//! minimal-phase filter through a discrete Hilbert transform, and mapped back to
//! the kernel. See [`spectral`] for the inversion and [`covariance`] for the
//! estimator and its analytic counterpart.

pub mod analysis;
pub mod covariance;
pub mod error;
pub mod events;
pub mod io;
pub mod kernels;
pub mod pipeline;
pub mod quadrature;
pub mod simulator;
pub mod spectral;

pub use error::{HawkesError, Result};
pub use kernels::{BackgroundRate, HawkesModel, KernelEntry, KernelSpec, MeanIntensity};
