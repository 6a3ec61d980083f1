//! Interference Laplace transforms, rate coverage and offloading gain.
//!
//! The SIR threshold enters only through `s = ϑ·r^α`. The transmit power
//! multiplies both the desired signal and every interferer, and noise is not
//! modelled, so it cancels and is never read here.

use std::cell::Cell;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{CachingPolicy, ContentLibrary, NetworkParams};
use crate::numerics::{
    adaptive_panels, gamma_fn, integrate_from, integrate_interval, panel_estimate,
    panels_integrate, rayleigh_density, rice_density, Panel, Quadrature, QuadratureSpec,
};

/// Gaussian and Rayleigh envelopes are cut at this many scale lengths;
/// the neglected mass is below `exp(-72)`.
pub const ENVELOPE_CUTOFF: f64 = 12.0;

/// Slack allowed on a raw probability before it is treated as a numerical
/// failure instead of being clamped.
pub const PROBABILITY_SLACK: f64 = 1e-9;

/// Laplace variable `s = ϑ·r^α` (units m^α).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LaplaceArg(f64);

impl LaplaceArg {
    pub fn new(s: f64) -> Result<Self> {
        if s >= 0.0 && s.is_finite() {
            Ok(LaplaceArg(s))
        } else {
            Err(Error::invalid(
                "s",
                format!("must be finite and >= 0, got {s}"),
            ))
        }
    }

    /// Laplace variable seen by a receiver served from distance `r`.
    pub fn at_distance(r: f64, params: &NetworkParams) -> Self {
        LaplaceArg(params.theta * r.powf(params.alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A numerically evaluated quantity with an absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounded {
    pub value: f64,
    pub error: f64,
}

/// Rate coverage Υ with its numerical error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageResult {
    pub value: f64,
    pub error_estimate: f64,
}

/// Quadrature tolerances for the nested coverage integrals.
///
/// `inner` drives the Rice-kernel integral φ(s, v), `middle` the integrals
/// over cluster distance and interferer distance, `outer` the average over
/// the serving distance. The defaults keep the total error on Υ below 1e-6.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Analytics {
    pub inner: QuadratureSpec,
    pub middle: QuadratureSpec,
    pub outer: QuadratureSpec,
}

impl Default for Analytics {
    fn default() -> Self {
        Analytics {
            inner: QuadratureSpec {
                rel_tol: 1e-10,
                abs_tol: 1e-300,
                max_subdivisions: 2048,
            },
            middle: QuadratureSpec {
                rel_tol: 1e-9,
                abs_tol: 1e-300,
                max_subdivisions: 2048,
            },
            outer: QuadratureSpec::default(),
        }
    }
}

#[inline]
fn path_loss_kernel(s: f64, u: f64, alpha: f64) -> f64 {
    // s / (s + u^α), written to stay exact as u → 0
    1.0 / (1.0 + u.powf(alpha) / s)
}

fn relative(q: &Quadrature) -> f64 {
    if q.value > 0.0 {
        q.error / q.value
    } else {
        0.0
    }
}

impl Analytics {
    /// φ(s, v): mean path-loss kernel of a device scattered around a
    /// cluster centre at distance `v`.
    pub fn phi(&self, s: LaplaceArg, v: f64, params: &NetworkParams) -> Result<Quadrature> {
        let s = s.value();
        if s == 0.0 {
            return Ok(Quadrature {
                value: 0.0,
                error: 0.0,
                subdivisions: 0,
            });
        }
        let sigma = params.sigma;
        let lo = (v - ENVELOPE_CUTOFF * sigma).max(0.0);
        let hi = v + ENVELOPE_CUTOFF * sigma;
        integrate_interval(
            |u| path_loss_kernel(s, u, params.alpha) * rice_density(u, v, sigma),
            lo,
            hi,
            &self.inner,
        )
    }

    /// Laplace transform of the interference from all other clusters.
    pub fn laplace_inter(&self, s: LaplaceArg, params: &NetworkParams) -> Result<Bounded> {
        params.validate()?;
        let mean_active = params.q * params.n_bar;
        if s.value() == 0.0 || mean_active == 0.0 {
            return Ok(Bounded {
                value: 1.0,
                error: 0.0,
            });
        }
        let worst_rel = Cell::new(0.0_f64);
        let failure = Cell::new(None::<Error>);
        let integrand = |v: f64| match self.phi(s, v, params) {
            Ok(phi) => {
                worst_rel.set(worst_rel.get().max(relative(&phi)));
                -(-mean_active * phi.value).exp_m1() * v
            }
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        };

        let knee = s.value().powf(1.0 / params.alpha);
        let split = knee + ENVELOPE_CUTOFF * params.sigma;
        let head = integrate_interval(integrand, 0.0, split, &self.middle);
        let tail = integrate_from(integrand, split, split, &self.middle);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        let (head, tail) = (head?, tail?);
        let exponent = head.value + tail.value;
        let exponent_err = head.error + tail.error + worst_rel.get() * exponent;

        let scale = 2.0 * PI * params.lambda_p;
        let value = (-scale * exponent).exp();
        Ok(Bounded {
            value,
            error: value * scale * exponent_err,
        })
    }

    /// Laplace transform of the intra-cluster interference, treating the
    /// interferer distances as independent Rayleigh(√2σ) variables.
    pub fn laplace_intra(&self, s: LaplaceArg, params: &NetworkParams) -> Result<Bounded> {
        params.validate()?;
        let mean_active = params.q * params.n_bar;
        if s.value() == 0.0 || mean_active == 0.0 {
            return Ok(Bounded {
                value: 1.0,
                error: 0.0,
            });
        }
        let scale = 2f64.sqrt() * params.sigma;
        let cutoff = ENVELOPE_CUTOFF * scale;
        let mean = integrate_interval(
            |h| path_loss_kernel(s.value(), h, params.alpha) * rayleigh_density(h, scale),
            0.0,
            cutoff,
            &self.middle,
        )?;
        // kernel ≤ 1, so the truncated tail is at most the Rayleigh survival
        let truncation = (-0.5 * ENVELOPE_CUTOFF * ENVELOPE_CUTOFF).exp();
        let value = (-mean_active * mean.value).exp();
        Ok(Bounded {
            value,
            error: value * mean_active * (mean.error + truncation),
        })
    }

    /// Coverage given the serving distance: `q·L_inter(s)·L_intra(s)`.
    pub fn conditional_coverage(&self, r: f64, params: &NetworkParams) -> Result<Bounded> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid(
                "r",
                format!("must be finite and > 0, got {r}"),
            ));
        }
        let s = LaplaceArg::at_distance(r, params);
        let inter = self.laplace_inter(s, params)?;
        let intra = self.laplace_intra(s, params)?;
        Ok(Bounded {
            value: params.q * inter.value * intra.value,
            error: params.q * (inter.value * intra.error + intra.value * inter.error),
        })
    }

    /// Rate coverage Υ: the conditional coverage averaged over the
    /// Rayleigh(√2σ) serving distance.
    pub fn rate_coverage(&self, params: &NetworkParams) -> Result<CoverageResult> {
        params.validate()?;
        if params.q == 0.0 {
            return Ok(CoverageResult {
                value: 0.0,
                error_estimate: 0.0,
            });
        }
        let scale = 2f64.sqrt() * params.sigma;
        let worst = Cell::new(0.0_f64);
        let failure = Cell::new(None::<Error>);
        let integrand = |r: f64| {
            if r == 0.0 {
                return 0.0;
            }
            match self.conditional_coverage(r, params) {
                Ok(c) => {
                    worst.set(worst.get().max(c.error));
                    rayleigh_density(r, scale) * c.value
                }
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            }
        };
        let quad = integrate_interval(integrand, 0.0, ENVELOPE_CUTOFF * scale, &self.outer);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        let quad = quad?;
        let truncation = params.q * (-0.5 * ENVELOPE_CUTOFF * ENVELOPE_CUTOFF).exp();
        let value = checked_probability(quad.value, "rate_coverage")?;
        Ok(CoverageResult {
            value,
            error_estimate: quad.error + worst.get() + truncation,
        })
    }
}

/// Access probabilities the tabulated kernel is refined against.
const REFERENCE_Q: [f64; 4] = [0.1, 0.4, 0.7, 1.0];

/// Active-interferer scalings `c/n̄` the φ tables are refined against; the
/// first entry stands for the linear regime `1 − e^{−cφ} ≈ cφ`.
const REFERENCE_LOAD: [f64; 4] = [1e-6, 0.25, 0.5, 1.0];

#[derive(Debug, Clone, Copy)]
struct ClusterSample {
    v: f64,
    jacobian: f64,
    phi: f64,
}

#[derive(Debug, Clone)]
struct ServingSample {
    density: f64,
    intra_mean: f64,
    intra_err: f64,
    phi_rel_err: f64,
    clusters: Vec<Panel<ClusterSample>>,
    reference: [f64; REFERENCE_Q.len()],
}

/// Rate coverage tabulated for repeated evaluation at varying access
/// probability.
///
/// φ(s, v) depends on the geometry (σ, α, ϑ) only, so it is computed once
/// per serving-distance node on an adaptive grid of cluster distances.
/// Afterwards `Υ(q)` costs a few thousand exponentials. The panels are
/// refined against several reference access probabilities, and every
/// evaluation reports its own Gauss–Kronrod error estimate.
#[derive(Debug, Clone)]
pub struct CoverageKernel {
    params: NetworkParams,
    serving: Vec<Panel<ServingSample>>,
}

impl ServingSample {
    fn inter_exponent(&self, load: f64) -> (f64, f64) {
        let (x, err) = panels_integrate(&self.clusters, |c| {
            -(-load * c.phi).exp_m1() * c.v * c.jacobian
        });
        (x, err + self.phi_rel_err * x)
    }

    fn conditional(&self, params: &NetworkParams, q: f64) -> Bounded {
        let load = q * params.n_bar;
        let (x, x_err) = self.inter_exponent(load);
        let scale = 2.0 * PI * params.lambda_p;
        let inter = (-scale * x).exp();
        let intra = (-load * self.intra_mean).exp();
        Bounded {
            value: q * inter * intra,
            error: q * inter * intra * (scale * x_err + load * self.intra_err),
        }
    }
}

impl CoverageKernel {
    /// Tabulates the kernel for the geometry, density and device count of
    /// `params`; its access probability is ignored.
    pub fn new(analytics: &Analytics, params: &NetworkParams) -> Result<Self> {
        params.validate()?;
        let scale = 2f64.sqrt() * params.sigma;
        let cutoff = ENVELOPE_CUTOFF * scale;
        let truncation = (-0.5 * ENVELOPE_CUTOFF * ENVELOPE_CUTOFF).exp();

        let sample = |r: f64| -> Result<ServingSample> {
            let s = LaplaceArg::at_distance(r, params);
            let intra = integrate_interval(
                |h| path_loss_kernel(s.value(), h, params.alpha) * rayleigh_density(h, scale),
                0.0,
                cutoff,
                &analytics.middle,
            )?;
            let mut worst_rel = 0.0_f64;
            let mut phi_at = |v: f64, jacobian: f64| -> Result<ClusterSample> {
                let phi = analytics.phi(s, v, params)?;
                worst_rel = worst_rel.max(relative(&phi));
                Ok(ClusterSample {
                    v,
                    jacobian,
                    phi: phi.value,
                })
            };
            let project = |c: &ClusterSample, k: usize| {
                let load = REFERENCE_LOAD[k] * params.n_bar;
                -(-load * c.phi).exp_m1() / load * c.v * c.jacobian
            };
            let split = s.value().powf(1.0 / params.alpha) + ENVELOPE_CUTOFF * params.sigma;
            let mut clusters = adaptive_panels(
                0.0,
                split,
                &analytics.middle,
                REFERENCE_LOAD.len(),
                |v| phi_at(v, 1.0),
                project,
            )?;
            clusters.extend(adaptive_panels(
                0.0,
                1.0,
                &analytics.middle,
                REFERENCE_LOAD.len(),
                |t| {
                    let w = 1.0 - t;
                    phi_at(split + split * t / w, split / (w * w))
                },
                project,
            )?);
            let mut out = ServingSample {
                density: rayleigh_density(r, scale),
                intra_mean: intra.value,
                intra_err: intra.error + truncation,
                phi_rel_err: worst_rel,
                clusters,
                reference: [0.0; REFERENCE_Q.len()],
            };
            out.reference = REFERENCE_Q.map(|q| out.density * out.conditional(params, q).value);
            Ok(out)
        };
        let serving = adaptive_panels(
            0.0,
            cutoff,
            &analytics.outer,
            REFERENCE_Q.len(),
            sample,
            |s: &ServingSample, k| s.reference[k],
        )?;
        Ok(CoverageKernel {
            params: *params,
            serving,
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    /// Υ at access probability `q`, all other parameters as tabulated.
    pub fn rate_coverage(&self, q: f64) -> Result<CoverageResult> {
        let params = self.params.with_q(q);
        params.validate()?;
        if q == 0.0 {
            return Ok(CoverageResult {
                value: 0.0,
                error_estimate: 0.0,
            });
        }
        let mut worst = 0.0_f64;
        let mut value = 0.0;
        let mut error = 0.0;
        for panel in &self.serving {
            let conditional: Vec<Bounded> = panel
                .samples
                .iter()
                .map(|s| s.conditional(&params, q))
                .collect();
            worst = conditional.iter().fold(worst, |w, c| w.max(c.error));
            let mut fv = [0.0; 21];
            for ((slot, s), c) in fv.iter_mut().zip(&panel.samples).zip(&conditional) {
                *slot = s.density * c.value;
            }
            let (v, e) = panel_estimate(panel.a, panel.b, &fv);
            value += v;
            error += e;
        }
        let truncation = q * (-0.5 * ENVELOPE_CUTOFF * ENVELOPE_CUTOFF).exp();
        Ok(CoverageResult {
            value: checked_probability(value, "rate_coverage")?,
            error_estimate: error + worst + truncation,
        })
    }
}

/// Clamps `raw` into [0, 1] when it lies within [`PROBABILITY_SLACK`] of the
/// interval; anything further out is a numerical failure.
pub fn checked_probability(raw: f64, context: &'static str) -> Result<f64> {
    if (-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&raw) {
        Ok(raw.clamp(0.0, 1.0))
    } else {
        Err(Error::ProbabilityOutOfRange {
            value: raw,
            context,
        })
    }
}

pub fn laplace_inter(s: LaplaceArg, params: &NetworkParams) -> Result<f64> {
    Analytics::default()
        .laplace_inter(s, params)
        .map(|b| b.value)
}

pub fn laplace_intra(s: LaplaceArg, params: &NetworkParams) -> Result<f64> {
    Analytics::default()
        .laplace_intra(s, params)
        .map(|b| b.value)
}

pub fn conditional_coverage(r: f64, params: &NetworkParams) -> Result<f64> {
    Analytics::default()
        .conditional_coverage(r, params)
        .map(|b| b.value)
}

pub fn rate_coverage(params: &NetworkParams) -> Result<CoverageResult> {
    Analytics::default().rate_coverage(params)
}

/// `Σ_i p_i b_i + p_i (1 − b_i)(1 − e^{−b_i n̄})·Υ` for a given coverage Υ.
pub fn offloading_gain_with_coverage(
    library: &ContentLibrary,
    policy: &CachingPolicy,
    n_bar: f64,
    upsilon: f64,
) -> Result<f64> {
    if policy.len() != library.n_f() {
        return Err(Error::LengthMismatch {
            expected: library.n_f(),
            actual: policy.len(),
        });
    }
    policy.check_box()?;
    if !(0.0..=1.0).contains(&upsilon) {
        return Err(Error::invalid(
            "upsilon",
            format!("must lie in [0, 1], got {upsilon}"),
        ));
    }
    let raw: f64 = library
        .popularity()
        .iter()
        .zip(policy.probabilities())
        .map(|(&p, &b)| p * b + p * (1.0 - b) * -(-b * n_bar).exp_m1() * upsilon)
        .sum();
    checked_probability(raw, "offloading_gain")
}

/// Offloading gain with the quadrature rate coverage. Υ does not depend on
/// the policy, so it is evaluated once.
pub fn offloading_gain(
    params: &NetworkParams,
    library: &ContentLibrary,
    policy: &CachingPolicy,
) -> Result<f64> {
    let upsilon = rate_coverage(params)?;
    offloading_gain_with_coverage(library, policy, params.n_bar, upsilon.value)
}

/// Coverage with a single active D2D link per cluster:
/// `1 / (4σ²πλ_p ϑ^{2/α} Γ(1+2/α) Γ(1−2/α) + 1)`.
pub fn closed_form_single_link_coverage(params: &NetworkParams) -> Result<f64> {
    params.validate()?;
    let delta = 2.0 / params.alpha;
    let gammas = gamma_fn(1.0 + delta)? * gamma_fn(1.0 - delta)?;
    let denom = 4.0
        * params.sigma
        * params.sigma
        * PI
        * params.lambda_p
        * params.theta.powf(delta)
        * gammas
        + 1.0;
    Ok(1.0 / denom)
}

/// Offloading gain with the single-link closed-form coverage substituted.
pub fn closed_form_offloading_gain(
    params: &NetworkParams,
    library: &ContentLibrary,
    policy: &CachingPolicy,
) -> Result<f64> {
    let upsilon = closed_form_single_link_coverage(params)?;
    offloading_gain_with_coverage(library, policy, params.n_bar, upsilon)
}
