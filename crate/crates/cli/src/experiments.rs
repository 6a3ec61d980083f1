//! The four run modes. Each returns the tables to write, keyed by path.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use cachesim_core::analytics::{
    closed_form_single_link_coverage, offloading_gain_with_coverage, Analytics, CoverageKernel,
};
use cachesim_core::model::{
    uniform_policy, zipf_policy, CachingPolicy, ContentLibrary, NetworkParams,
};
use cachesim_core::optimizer::{optimize_access_with, optimize_caching, DEFAULT_BUDGET_TOL};
use cachesim_core::simulator::{estimate, estimate_coverage};

use crate::config::{Access, CoverageMethod, ExperimentConfig, Mode, Scheme};
use crate::csv::{format_g9, Cell, Table};
use crate::error::CliError;

pub type Outputs = Vec<(PathBuf, Table)>;

pub const SWEEP_HEADER: [&str; 9] = [
    "value",
    "q",
    "upsilon_analytic",
    "upsilon_sim",
    "po_pc",
    "po_zipf",
    "po_uniform",
    "upsilon_sim_halfwidth",
    "wall_time_s",
];

pub fn run_mode(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Analyze => analyze(cfg),
        Mode::Optimize => optimize(cfg),
        Mode::Simulate => simulate(cfg),
        Mode::Sweep => sweep(cfg),
    }
}

fn kernel(params: &NetworkParams) -> Result<CoverageKernel, CliError> {
    Ok(CoverageKernel::new(&Analytics::default(), params)?)
}

/// Access probability and analytic coverage of one operating point.
struct OperatingPoint {
    q: Option<f64>,
    upsilon: f64,
    error: Option<f64>,
}

fn operating_point(
    cfg: &ExperimentConfig,
    params: &NetworkParams,
    shared: Option<&CoverageKernel>,
) -> Result<OperatingPoint, CliError> {
    match cfg.coverage {
        CoverageMethod::ClosedForm => Ok(OperatingPoint {
            q: match cfg.network.q {
                Access::Fixed(q) => Some(q),
                Access::Optimal => None,
            },
            upsilon: closed_form_single_link_coverage(params)?,
            error: None,
        }),
        CoverageMethod::Quadrature => {
            let owned;
            let k = match shared {
                Some(k) => k,
                None => {
                    owned = kernel(params)?;
                    &owned
                }
            };
            let q = match cfg.network.q {
                Access::Fixed(q) => q,
                Access::Optimal => optimize_access_with(k, cfg.optimize.search_tol)?.q_star,
            };
            let cov = k.rate_coverage(q)?;
            Ok(OperatingPoint {
                q: Some(q),
                upsilon: cov.value,
                error: Some(cov.error_estimate),
            })
        }
    }
}

fn pc_policy(
    params: &NetworkParams,
    library: &ContentLibrary,
    upsilon: f64,
) -> Result<CachingPolicy, CliError> {
    Ok(optimize_caching(params, library, upsilon, DEFAULT_BUDGET_TOL)?.b_star)
}

/// Offloading gains of the optimized, Zipf and uniform schemes.
fn scheme_gains(
    params: &NetworkParams,
    library: &ContentLibrary,
    upsilon: f64,
) -> Result<[f64; 3], CliError> {
    let pc = optimize_caching(params, library, upsilon, DEFAULT_BUDGET_TOL)?.objective;
    let zipf =
        offloading_gain_with_coverage(library, &zipf_policy(library), params.n_bar, upsilon)?;
    let uniform =
        offloading_gain_with_coverage(library, &uniform_policy(library), params.n_bar, upsilon)?;
    Ok([pc, zipf, uniform])
}

fn analyze(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let start = Instant::now();
    let params = cfg.network_params()?;
    let library = cfg.content_library()?;
    let point = operating_point(cfg, &params, None)?;
    let [pc, zipf, uniform] = scheme_gains(&params, &library, point.upsilon)?;
    let mut table = Table::new(vec![
        "q",
        "upsilon_analytic",
        "upsilon_error",
        "po_pc",
        "po_zipf",
        "po_uniform",
        "wall_time_s",
    ]);
    table.push(vec![
        point.q.into(),
        point.upsilon.into(),
        point.error.into(),
        pc.into(),
        zipf.into(),
        uniform.into(),
        start.elapsed().as_secs_f64().into(),
    ]);
    Ok(vec![(cfg.output_path.clone(), table)])
}

fn boundary_count(policy: &CachingPolicy) -> usize {
    policy
        .probabilities()
        .iter()
        .filter(|&&b| b <= 1e-12 || b >= 1.0 - 1e-12)
        .count()
}

/// Counts per equal-width bin over `[0, 1]`; 1 falls in the last bin.
pub fn histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &v in values {
        let k = ((v * bins as f64).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn optimize(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let start = Instant::now();
    let params = cfg.network_params()?;
    let library = cfg.content_library()?;
    let k = kernel(&params)?;
    let access = optimize_access_with(&k, cfg.optimize.search_tol)?;
    let best = optimize_caching(&params, &library, access.upsilon_star, DEFAULT_BUDGET_TOL)?;
    let zipf = zipf_policy(&library);
    let uniform = uniform_policy(&library);
    let po =
        |p: &CachingPolicy, u: f64| offloading_gain_with_coverage(&library, p, params.n_bar, u);
    let q_sub = cfg.optimize.suboptimal_q_factor * access.q_star;
    let upsilon_sub = k.rate_coverage(q_sub)?.value;
    let sub = optimize_caching(&params, &library, upsilon_sub, DEFAULT_BUDGET_TOL)?;

    let mut summary = Table::new(vec![
        "q_star",
        "upsilon_star",
        "unimodal",
        "v_star",
        "po_pc",
        "po_zipf",
        "po_uniform",
        "q_sub",
        "upsilon_sub",
        "po_pc_sub",
        "boundary_files_star",
        "boundary_files_sub",
        "wall_time_s",
    ]);
    summary.push(vec![
        access.q_star.into(),
        access.upsilon_star.into(),
        access.unimodal.into(),
        best.v_star.into(),
        best.objective.into(),
        po(&zipf, access.upsilon_star)?.into(),
        po(&uniform, access.upsilon_star)?.into(),
        q_sub.into(),
        upsilon_sub.into(),
        sub.objective.into(),
        boundary_count(&best.b_star).into(),
        boundary_count(&sub.b_star).into(),
        start.elapsed().as_secs_f64().into(),
    ]);

    let mut policy = Table::new(vec![
        "file",
        "popularity",
        "b_pc",
        "b_pc_sub",
        "b_zipf",
        "b_uniform",
    ]);
    for i in 0..library.n_f() {
        policy.push(vec![
            (i + 1).into(),
            library.popularity()[i].into(),
            best.b_star.probabilities()[i].into(),
            sub.b_star.probabilities()[i].into(),
            zipf.probabilities()[i].into(),
            uniform.probabilities()[i].into(),
        ]);
    }

    let bins = cfg.optimize.histogram_bins;
    let at_star = histogram(best.b_star.probabilities(), bins);
    let at_sub = histogram(sub.b_star.probabilities(), bins);
    let mut hist = Table::new(vec!["bin_lo", "bin_hi", "count_q_star", "count_q_sub"]);
    for j in 0..bins {
        hist.push(vec![
            (j as f64 / bins as f64).into(),
            ((j + 1) as f64 / bins as f64).into(),
            at_star[j].into(),
            at_sub[j].into(),
        ]);
    }

    let out = &cfg.output_path;
    Ok(vec![
        (out.clone(), summary),
        (sibling(out, "policy"), policy),
        (sibling(out, "histogram"), hist),
    ])
}

fn simulate(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let start = Instant::now();
    let params = cfg.network_params()?;
    let library = cfg.content_library()?;
    let point = operating_point(
        &ExperimentConfig {
            coverage: CoverageMethod::Quadrature,
            ..cfg.clone()
        },
        &params,
        None,
    )?;
    let q = point.q.expect("quadrature point has q");
    let policy = match cfg.sim_policy {
        Scheme::Pc => pc_policy(&params, &library, point.upsilon)?,
        Scheme::Zipf => zipf_policy(&library),
        Scheme::Uniform => uniform_policy(&library),
    };
    let po_analytic =
        offloading_gain_with_coverage(&library, &policy, params.n_bar, point.upsilon)?;
    let est = estimate(&params.with_q(q), &library, &policy, &cfg.sim)?;
    let d = est.deliveries;
    let mut table = Table::new(vec![
        "scheme",
        "q",
        "upsilon_analytic",
        "upsilon_sim",
        "upsilon_sim_halfwidth",
        "po_analytic",
        "po_sim",
        "po_sim_halfwidth",
        "self_cache",
        "d2d_success",
        "d2d_sir_fail",
        "server_inactive",
        "no_caterer",
        "wall_time_s",
    ]);
    table.push(vec![
        cfg.sim_policy.as_str().into(),
        q.into(),
        point.upsilon.into(),
        est.upsilon_hat().into(),
        est.coverage.wilson_halfwidth().into(),
        po_analytic.into(),
        est.p_o_hat().into(),
        est.offloading.wilson_halfwidth().into(),
        d.self_cache.into(),
        d.d2d_success.into(),
        d.d2d_sir_fail.into(),
        d.server_inactive.into(),
        d.no_caterer.into(),
        start.elapsed().as_secs_f64().into(),
    ]);
    Ok(vec![(cfg.output_path.clone(), table)])
}

/// Rows of one sweep (one series value), in sweep order.
pub fn sweep_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let variable = cfg
        .sweep
        .variable
        .ok_or_else(|| CliError::config("sweep.variable", "missing"))?;
    let shared = if cfg.coverage == CoverageMethod::Quadrature && !variable.affects_coverage() {
        Some(kernel(&cfg.network_params()?)?)
    } else {
        None
    };
    let rows = cfg
        .sweep
        .values
        .par_iter()
        .map(|&value| -> Result<Vec<Cell>, CliError> {
            let start = Instant::now();
            let mut point_cfg = cfg.clone();
            variable.apply(&mut point_cfg, value)?;
            let params = point_cfg.network_params()?;
            let library = point_cfg.content_library()?;
            let point = operating_point(&point_cfg, &params, shared.as_ref())?;
            let [pc, zipf, uniform] = scheme_gains(&params, &library, point.upsilon)?;
            let sim = match (cfg.sweep.simulate, point.q) {
                (true, Some(q)) => Some(estimate_coverage(&params.with_q(q), &cfg.sim)?),
                _ => None,
            };
            Ok(vec![
                value.into(),
                point.q.into(),
                point.upsilon.into(),
                sim.map(|s| s.value()).into(),
                pc.into(),
                zipf.into(),
                uniform.into(),
                sim.map(|s| s.wilson_halfwidth()).into(),
                start.elapsed().as_secs_f64().into(),
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(SWEEP_HEADER.to_vec());
    for row in rows {
        table.push(row);
    }
    Ok(table)
}

fn sweep(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let Some(series) = cfg.sweep.series_variable else {
        return Ok(vec![(cfg.output_path.clone(), sweep_table(cfg)?)]);
    };
    let mut out = Vec::new();
    for &s in &cfg.sweep.series_values {
        let mut series_cfg = cfg.clone();
        series.apply(&mut series_cfg, s)?;
        let path = sibling(
            &cfg.output_path,
            &format!("{}_{}", series.as_str(), format_g9(s)),
        );
        out.push((path, sweep_table(&series_cfg)?));
    }
    Ok(out)
}
