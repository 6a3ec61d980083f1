//! Analytic evaluation, optimization and Monte Carlo validation of the
//! offloading gain in clustered device-to-device caching networks.
//!
//! Devices form a Thomas cluster process (Poisson parents, Gaussian
//! daughters), request files with Zipf popularity, cache them with a
//! probabilistic placement vector and share them inside their own cluster
//! over a slotted-ALOHA channel with Rayleigh fading. Delivery succeeds when
//! the signal-to-interference ratio exceeds a threshold.
//!
//! * [`model`] holds the parameter types, Zipf popularity and the baseline
//!   caching policies.
//! * [`numerics`] provides the densities, the Gamma function and the
//!   adaptive quadrature the analytics are built on.
//! * [`analytics`] evaluates the interference Laplace transforms, the rate
//!   coverage and the offloading gain.
//! * [`optimizer`] searches the access probability and solves the KKT
//!   system for the optimal caching vector.
//! * [`simulator`] samples network realizations and estimates the same
//!   quantities without the analytic approximations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod error;
pub mod model;
pub mod numerics;
pub mod optimizer;
pub mod simulator;

pub use error::{Error, Result};
