//! Parameter types, unit conversions, Zipf popularity and caching policies.
//!
//! Everything in here is computed in SI linear units: cluster density in
//! clusters per square meter, distances in meters, thresholds as linear
//! ratios. Conversions from the configuration units (clusters/km², dB) live
//! at the bottom of the module.

use crate::error::{Error, Result};

/// Tolerance on `Σ b_i = M` used by [`validate_policy`].
pub const BUDGET_TOL: f64 = 1e-9;

/// Tolerance on `Σ p_i = 1` for a popularity vector.
pub const POPULARITY_TOL: f64 = 1e-12;

/// Physical, geometric and channel-access parameters of the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    /// Cluster (parent) density, clusters per m².
    pub lambda_p: f64,
    /// Mean number of devices per cluster.
    pub n_bar: f64,
    /// Standard deviation of the Gaussian daughter displacement, m.
    pub sigma: f64,
    /// Path-loss exponent, must exceed 2.
    pub alpha: f64,
    /// SIR threshold, linear.
    pub theta: f64,
    /// D2D transmit power, W. Cancels out of the SIR; validated only.
    pub p_d: f64,
    /// Slotted-ALOHA channel access probability.
    pub q: f64,
}

impl NetworkParams {
    /// Default network: σ = 10 m, α = 4, n̄ = 4, λ_p = 10 clusters/km²,
    /// ϑ = 0 dB, P_d = 1 W and q = 0.5.
    pub fn table_defaults() -> Self {
        NetworkParams {
            lambda_p: per_km2_to_per_m2(10.0),
            n_bar: 4.0,
            sigma: 10.0,
            alpha: 4.0,
            theta: db_to_linear(0.0),
            p_d: 1.0,
            q: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        }
        positive("lambda_p", self.lambda_p)?;
        positive("n_bar", self.n_bar)?;
        positive("sigma", self.sigma)?;
        positive("theta", self.theta)?;
        positive("p_d", self.p_d)?;
        if !(self.alpha.is_finite() && self.alpha > 2.0) {
            return Err(Error::invalid(
                "alpha",
                format!("must be finite and > 2, got {}", self.alpha),
            ));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::invalid(
                "q",
                format!("must lie in [0, 1], got {}", self.q),
            ));
        }
        Ok(())
    }

    pub fn with_q(self, q: f64) -> Self {
        NetworkParams { q, ..self }
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        NetworkParams { sigma, ..self }
    }

    pub fn with_lambda_p(self, lambda_p: f64) -> Self {
        NetworkParams { lambda_p, ..self }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        NetworkParams { theta, ..self }
    }

    pub fn with_n_bar(self, n_bar: f64) -> Self {
        NetworkParams { n_bar, ..self }
    }
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self::table_defaults()
    }
}

/// The file catalog: size, per-device cache size and Zipf popularity.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentLibrary {
    n_f: usize,
    m: usize,
    beta: f64,
    popularity: Vec<f64>,
}

impl ContentLibrary {
    pub fn new(n_f: usize, m: usize, beta: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "cache size must be at least one file"));
        }
        if m > n_f {
            return Err(Error::InfeasibleBudget { m, n_f });
        }
        let popularity = zipf_popularity(n_f, beta)?;
        Ok(ContentLibrary {
            n_f,
            m,
            beta,
            popularity,
        })
    }

    /// N_f = 100, M = 8, β = 0.5.
    pub fn table_defaults() -> Self {
        Self::new(100, 8, 0.5).expect("default library is valid")
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn popularity(&self) -> &[f64] {
        &self.popularity
    }

    /// Every device can hold the whole catalog.
    pub fn is_degenerate(&self) -> bool {
        self.m == self.n_f
    }
}

/// Zipf request probabilities `p_i = i^{-β} / Σ_k k^{-β}` for `i = 1..=n_f`.
pub fn zipf_popularity(n_f: usize, beta: f64) -> Result<Vec<f64>> {
    if n_f == 0 {
        return Err(Error::invalid(
            "n_f",
            "library must contain at least one file",
        ));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::invalid(
            "beta",
            format!("must be finite and >= 0, got {beta}"),
        ));
    }
    let weights: Vec<f64> = (1..=n_f).map(|i| (i as f64).powf(-beta)).collect();
    let total = neumaier_sum(weights.iter().copied());
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Compensated summation; keeps long popularity sums accurate to a few ulps.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Per-file caching probabilities `b_i`.
///
/// Construction only checks that the entries are finite; the box and budget
/// constraints are checked against a library by [`validate_policy`].
#[derive(Debug, Clone, PartialEq)]
pub struct CachingPolicy {
    b: Vec<f64>,
}

impl CachingPolicy {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = b.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(
                "b",
                format!("entry {i} is not finite ({v})"),
            ));
        }
        Ok(CachingPolicy { b })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn total(&self) -> f64 {
        neumaier_sum(self.b.iter().copied())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.b
    }

    pub(crate) fn check_box(&self) -> Result<()> {
        match self.b.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
            Some(i) => Err(Error::invalid(
                "b",
                format!("b[{i}] = {} outside [0, 1]", self.b[i]),
            )),
            None => Ok(()),
        }
    }
}

/// `b_i = M / N_f` for every file.
pub fn uniform_policy(library: &ContentLibrary) -> CachingPolicy {
    let b = library.m as f64 / library.n_f as f64;
    CachingPolicy {
        b: vec![b; library.n_f],
    }
}

/// Popularity-proportional placement scaled to the cache budget.
///
/// Entries that would exceed one are clamped and the leftover budget is
/// spread proportionally over the remaining files, repeating until nothing
/// exceeds one. Each round caps at least one new file, so there are at most
/// `N_f` rounds.
pub fn zipf_policy(library: &ContentLibrary) -> CachingPolicy {
    let p = library.popularity();
    let n = p.len();
    let mut b = vec![0.0; n];
    let mut capped = vec![false; n];
    let mut n_capped = 0usize;
    loop {
        let budget = library.m as f64 - n_capped as f64;
        let free_mass = neumaier_sum((0..n).filter(|&i| !capped[i]).map(|i| p[i]));
        if budget <= 0.0 || free_mass <= 0.0 {
            for i in (0..n).filter(|&i| !capped[i]) {
                b[i] = 0.0;
            }
            break;
        }
        let mut newly_capped = false;
        for i in 0..n {
            if capped[i] {
                continue;
            }
            b[i] = p[i] / free_mass * budget;
            if b[i] >= 1.0 {
                b[i] = 1.0;
                capped[i] = true;
                n_capped += 1;
                newly_capped = true;
            }
        }
        if !newly_capped {
            break;
        }
    }
    CachingPolicy { b }
}

/// One broken constraint of a caching policy.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyViolation {
    /// `b[index]` lies outside `[0, 1]`.
    OutOfBounds { index: usize, value: f64 },
    /// `Σ b_i` differs from the cache size by more than [`BUDGET_TOL`].
    Budget { total: f64, expected: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyReport {
    pub violations: Vec<PolicyViolation>,
}

impl PolicyReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the box constraint `0 ≤ b_i ≤ 1` and the budget `Σ b_i = M`.
pub fn validate_policy(policy: &CachingPolicy, library: &ContentLibrary) -> Result<PolicyReport> {
    if policy.len() != library.n_f() {
        return Err(Error::LengthMismatch {
            expected: library.n_f(),
            actual: policy.len(),
        });
    }
    let mut violations: Vec<PolicyViolation> = policy
        .b
        .iter()
        .enumerate()
        .filter(|(_, v)| !(0.0..=1.0).contains(*v))
        .map(|(index, &value)| PolicyViolation::OutOfBounds { index, value })
        .collect();
    let total = policy.total();
    let expected = library.m() as f64;
    if (total - expected).abs() > BUDGET_TOL {
        violations.push(PolicyViolation::Budget { total, expected });
    }
    Ok(PolicyReport { violations })
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn per_km2_to_per_m2(density: f64) -> f64 {
    density * 1e-6
}

pub fn per_m2_to_per_km2(density: f64) -> f64 {
    density * 1e6
}
