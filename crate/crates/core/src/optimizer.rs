//! Two-stage maximization of the offloading gain.
//!
//! The rate coverage does not involve the caching vector, so the access
//! probability is chosen first by maximizing Υ(q), and the caching vector is
//! then the solution of the concave placement problem at that Υ.

use crate::analytics::{offloading_gain_with_coverage, Analytics, CoverageKernel};
use crate::error::{Error, Result};
use crate::model::{CachingPolicy, ContentLibrary, NetworkParams};

/// Points of the coarse scan over `q ∈ [0, 1]`.
pub const ACCESS_GRID_POINTS: usize = 21;
/// Step of the central difference used for `dΥ/dq`.
pub const DERIVATIVE_STEP: f64 = 1e-4;
/// Bisection steps before the access search gives up.
pub const MAX_BISECTION_STEPS: usize = 60;
/// Default width of the final bracket around `q*`.
pub const DEFAULT_SEARCH_TOL: f64 = 1e-4;
/// Default tolerance on `|Σ b_i − M|`.
pub const DEFAULT_BUDGET_TOL: f64 = 1e-9;
/// Width below which the per-file root bisection stops.
pub const ROOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessSearchResult {
    pub q_star: f64,
    pub upsilon_star: f64,
    /// Rate-coverage evaluations spent on the grid and the bisection.
    pub iterations: usize,
    /// False when the coarse grid showed more than one local maximum; the
    /// search then refines around the best grid point only.
    pub unimodal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CachingSolution {
    pub b_star: CachingPolicy,
    pub v_star: f64,
    pub objective: f64,
}

/// Maximizes Υ(q) over `[0, 1]`.
pub fn optimize_access(params: &NetworkParams, search_tol: f64) -> Result<AccessSearchResult> {
    let kernel = CoverageKernel::new(&Analytics::default(), params)?;
    optimize_access_with(&kernel, search_tol)
}

/// [`optimize_access`] on an already tabulated kernel.
pub fn optimize_access_with(
    kernel: &CoverageKernel,
    search_tol: f64,
) -> Result<AccessSearchResult> {
    if !(search_tol > 0.0) {
        return Err(Error::invalid(
            "search_tol",
            format!("must be > 0, got {search_tol}"),
        ));
    }
    let mut evaluations = 0usize;
    let mut upsilon = |q: f64| -> Result<f64> {
        evaluations += 1;
        Ok(kernel.rate_coverage(q)?.value)
    };

    let step = 1.0 / (ACCESS_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..ACCESS_GRID_POINTS).map(|k| k as f64 * step).collect();
    let values = grid
        .iter()
        .map(|&q| upsilon(q))
        .collect::<Result<Vec<f64>>>()?;
    let best = (0..values.len())
        .max_by(|&i, &j| values[i].total_cmp(&values[j]).then(j.cmp(&i)))
        .expect("grid is not empty");
    let unimodal = is_unimodal(&values);

    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let mut steps = 0usize;
    while hi - lo > search_tol {
        if steps == MAX_BISECTION_STEPS {
            return Err(Error::SolverNonConvergence {
                solver: "access bisection",
                iterations: steps,
                best: 0.5 * (lo + hi),
            });
        }
        let mid = 0.5 * (lo + hi);
        let (a, b) = if mid + DERIVATIVE_STEP > 1.0 {
            (mid - DERIVATIVE_STEP, mid)
        } else if mid - DERIVATIVE_STEP < 0.0 {
            (mid, mid + DERIVATIVE_STEP)
        } else {
            (mid - DERIVATIVE_STEP, mid + DERIVATIVE_STEP)
        };
        let slope = upsilon(b)? - upsilon(a)?;
        if slope > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }

    let mut q_star = grid[best];
    let mut upsilon_star = values[best];
    for q in [lo, 0.5 * (lo + hi), hi] {
        let u = upsilon(q)?;
        if u > upsilon_star {
            q_star = q;
            upsilon_star = u;
        }
    }
    Ok(AccessSearchResult {
        q_star,
        upsilon_star,
        iterations: evaluations,
        unimodal,
    })
}

/// True when the sequence rises (weakly) to its maximum and then falls.
fn is_unimodal(values: &[f64]) -> bool {
    let mut falling = false;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        if d < -1e-12 {
            falling = true;
        } else if d > 1e-12 && falling {
            return false;
        }
    }
    true
}

/// `∂P_o/∂b_i = p_i + p_i·Υ·(n̄(1−b_i)e^{−n̄ b_i} − (1 − e^{−n̄ b_i}))`.
pub fn caching_derivative(b: f64, p: f64, n_bar: f64, upsilon: f64) -> f64 {
    let decay = (-n_bar * b).exp();
    p + p * upsilon * (n_bar * (1.0 - b) * decay - (1.0 - decay))
}

/// `∂²P_o/∂b_i² = −p_i·Υ·n̄·e^{−n̄ b_i}·(2 + n̄(1 − b_i))`, never positive.
pub fn caching_second_derivative(b: f64, p: f64, n_bar: f64, upsilon: f64) -> f64 {
    -p * upsilon * n_bar * (-n_bar * b).exp() * (2.0 + n_bar * (1.0 - b))
}

/// Caching probability of one file at dual price `v`.
pub fn caching_response(v: f64, p: f64, n_bar: f64, upsilon: f64) -> f64 {
    let at_one = caching_derivative(1.0, p, n_bar, upsilon);
    let at_zero = caching_derivative(0.0, p, n_bar, upsilon);
    if v < at_one {
        return 1.0;
    }
    if v > at_zero {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if caching_derivative(mid, p, n_bar, upsilon) > v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Optimal caching vector for a fixed rate coverage `upsilon`.
///
/// Each `b_i(v)` is the clipped root of `∂P_o/∂b_i = v`; the dual price is
/// found by bisection on `[0, max_i p_i(1 + n̄Υ)]` where `Σ b_i(v)` falls
/// from `N_f` to zero.
pub fn optimize_caching(
    params: &NetworkParams,
    library: &ContentLibrary,
    upsilon: f64,
    tol: f64,
) -> Result<CachingSolution> {
    if !(0.0..=1.0).contains(&upsilon) {
        return Err(Error::invalid(
            "upsilon",
            format!("must lie in [0, 1], got {upsilon}"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be > 0, got {tol}")));
    }
    if !(params.n_bar > 0.0 && params.n_bar.is_finite()) {
        return Err(Error::invalid(
            "n_bar",
            format!("must be > 0, got {}", params.n_bar),
        ));
    }
    let n_bar = params.n_bar;
    let p = library.popularity();
    let budget = library.m() as f64;

    let finish = |b: Vec<f64>, v_star: f64| -> Result<CachingSolution> {
        let b_star = CachingPolicy::new(b)?;
        let objective = offloading_gain_with_coverage(library, &b_star, n_bar, upsilon)?;
        Ok(CachingSolution {
            b_star,
            v_star,
            objective,
        })
    };

    if library.is_degenerate() {
        return finish(vec![1.0; p.len()], 0.0);
    }
    if upsilon * n_bar == 0.0 {
        let (b, v) = greedy_fill(p, library.m());
        return finish(b, v);
    }

    let response = |v: f64| -> Vec<f64> {
        p.iter()
            .map(|&pi| caching_response(v, pi, n_bar, upsilon))
            .collect()
    };
    let total = |b: &[f64]| crate::model::neumaier_sum(b.iter().copied());

    // Aim well inside `tol`; accept anything within it once the bracket
    // can no longer shrink.
    let target = tol * 1e-3;
    let mut lo = 0.0_f64;
    let mut hi = p
        .iter()
        .fold(0.0_f64, |m, &pi| m.max(pi * (1.0 + n_bar * upsilon)));
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let b = response(mid);
        let excess = total(&b) - budget;
        if excess.abs() <= target {
            return finish(b, mid);
        }
        if best.as_ref().is_none_or(|(e, _, _)| excess.abs() < *e) {
            best = Some((excess.abs(), b, mid));
        }
        if excess > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    match best {
        Some((e, b, v)) if e <= tol => finish(b, v),
        other => Err(Error::SolverNonConvergence {
            solver: "caching dual bisection",
            iterations: 400,
            best: other.map_or(0.5 * (lo + hi), |(_, _, v)| v),
        }),
    }
}

/// Self-caching only (Υ = 0): fill the most popular files, splitting the
/// leftover budget evenly among files tied at the boundary.
fn greedy_fill(p: &[f64], m: usize) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&i, &j| p[j].total_cmp(&p[i]).then(i.cmp(&j)));
    let mut b = vec![0.0; p.len()];
    let boundary = p[order[m - 1]];
    let above: Vec<usize> = order.iter().copied().filter(|&i| p[i] > boundary).collect();
    let tied: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| p[i] == boundary)
        .collect();
    for &i in &above {
        b[i] = 1.0;
    }
    let share = (m - above.len()) as f64 / tied.len() as f64;
    for &i in &tied {
        b[i] = share;
    }
    (b, boundary)
}

/// Largest violation of the KKT conditions of the placement problem:
/// stationarity on interior coordinates, the threshold inequalities on the
/// bounds.
pub fn kkt_violation(
    solution: &CachingSolution,
    library: &ContentLibrary,
    n_bar: f64,
    upsilon: f64,
) -> f64 {
    let v = solution.v_star;
    library
        .popularity()
        .iter()
        .zip(solution.b_star.probabilities())
        .map(|(&p, &b)| {
            let d = caching_derivative(b, p, n_bar, upsilon);
            if b <= 0.0 {
                (d - v).max(0.0)
            } else if b >= 1.0 {
                (v - d).max(0.0)
            } else {
                (d - v).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Runs the access search, then solves the placement at the optimal Υ.
pub fn solve_joint(
    params: &NetworkParams,
    library: &ContentLibrary,
) -> Result<(AccessSearchResult, CachingSolution)> {
    let access = optimize_access(params, DEFAULT_SEARCH_TOL)?;
    let caching = optimize_caching(params, library, access.upsilon_star, DEFAULT_BUDGET_TOL)?;
    Ok((access, caching))
}
