//! Densities, special functions and quadrature used by the analytics.

mod quadrature;
mod special;

pub use quadrature::{
    integrate_from, integrate_interval, integrate_semi_infinite, Quadrature, QuadratureSpec,
};
pub use special::{bessel_i0e, gamma_fn, rayleigh_pdf, rice_pdf};

pub(crate) use quadrature::{adaptive_panels, panel_estimate, panels_integrate, Panel};
pub(crate) use special::{rayleigh_density, rice_density};
