//! Acceptance checks. Prints one PASS/FAIL line per criterion, with the
//! measured quantities indented underneath, and exits non-zero if any fail.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};

use cachesim_core::analytics::{
    closed_form_offloading_gain, closed_form_single_link_coverage, laplace_inter, laplace_intra,
    offloading_gain_with_coverage, rate_coverage, Analytics, CoverageKernel, LaplaceArg,
};
use cachesim_core::model::{
    db_to_linear, per_km2_to_per_m2, uniform_policy, validate_policy, zipf_policy, CachingPolicy,
    ContentLibrary, NetworkParams,
};
use cachesim_core::numerics::{
    integrate_from, integrate_interval, integrate_semi_infinite, rayleigh_pdf, rice_pdf,
    QuadratureSpec,
};
use cachesim_core::optimizer::{optimize_access_with, optimize_caching, DEFAULT_SEARCH_TOL};
use cachesim_core::simulator::{estimate, estimate_coverage, SimulationConfig};

struct Report {
    pass: bool,
    lines: Vec<String>,
}

impl Report {
    fn new() -> Self {
        Self {
            pass: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines
            .push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.lines.push(format!("     {line}"));
    }
}

fn table() -> NetworkParams {
    NetworkParams::table_defaults()
}

fn kernel(params: &NetworkParams) -> CoverageKernel {
    CoverageKernel::new(&Analytics::default(), params).expect("kernel")
}

fn gains(library: &ContentLibrary, params: &NetworkParams, upsilon: f64) -> [f64; 3] {
    let pc = optimize_caching(params, library, upsilon, 1e-9)
        .expect("pc")
        .objective;
    let z = offloading_gain_with_coverage(library, &zipf_policy(library), params.n_bar, upsilon)
        .unwrap();
    let u = offloading_gain_with_coverage(library, &uniform_policy(library), params.n_bar, upsilon)
        .unwrap();
    [pc, z, u]
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn criterion_1() -> Report {
    let mut r = Report::new();
    let config = SimulationConfig {
        trials: 200_000,
        ..SimulationConfig::default()
    };
    for sigma in [5.0, 10.0, 20.0, 30.0] {
        let params = table().with_sigma(sigma);
        let k = kernel(&params);
        for q in [0.2, 0.5, 0.8] {
            let start = Instant::now();
            let analytic = k.rate_coverage(q).unwrap().value;
            let sim = estimate_coverage(&params.with_q(q), &config).unwrap();
            let secs = start.elapsed().as_secs_f64();
            let diff = (analytic - sim.value()).abs();
            r.check(
                diff <= 0.03 && secs <= 60.0,
                format!(
                    "sigma={sigma:>4} q={q}: analytic={analytic:.4} sim={:.4} (+/-{:.4}) |diff|={diff:.4} <= 0.03, {secs:.1}s <= 60s",
                    sim.value(),
                    sim.wilson_halfwidth()
                ),
            );
        }
    }
    r
}

fn criterion_2() -> Report {
    let mut r = Report::new();
    let sigmas = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
    let fig1 = |lambda: f64, sigma: f64| {
        let p = NetworkParams {
            n_bar: 5.0,
            ..table()
        }
        .with_q(0.3)
        .with_lambda_p(per_km2_to_per_m2(lambda))
        .with_sigma(sigma);
        rate_coverage(&p).unwrap().value
    };
    let mut grid = Vec::new();
    for lambda in [10.0, 20.0] {
        let row: Vec<f64> = sigmas.iter().map(|&s| fig1(lambda, s)).collect();
        r.check(
            strictly_decreasing(&row),
            format!("coverage strictly decreasing in sigma at lambda_p={lambda}/km2: {row:.5?}"),
        );
        grid.push(row);
    }
    let in_lambda = grid[0].iter().zip(&grid[1]).all(|(a, b)| b < a);
    r.check(
        in_lambda,
        "coverage strictly decreasing in lambda_p at every sigma".into(),
    );

    let library = ContentLibrary::table_defaults();
    let closed = |lambda: f64, sigma: f64| -> [f64; 3] {
        let p = table()
            .with_lambda_p(per_km2_to_per_m2(lambda))
            .with_sigma(sigma);
        let u = closed_form_single_link_coverage(&p).unwrap();
        let pc = optimize_caching(&p, &library, u, 1e-9).unwrap().b_star;
        [pc, zipf_policy(&library), uniform_policy(&library)]
            .map(|b| closed_form_offloading_gain(&p, &library, &b).unwrap())
    };
    let lambdas = [10.0, 20.0, 30.0];
    let values: Vec<Vec<[f64; 3]>> = lambdas
        .iter()
        .map(|&l| sigmas.iter().map(|&s| closed(l, s)).collect())
        .collect();
    for (scheme, name) in ["pc", "zipf", "uniform"].iter().enumerate() {
        for (li, l) in lambdas.iter().enumerate() {
            let row: Vec<f64> = values[li].iter().map(|v| v[scheme]).collect();
            r.check(
                strictly_decreasing(&row),
                format!("closed-form P_o ({name}) strictly decreasing in sigma at lambda_p={l}: {row:.5?}"),
            );
        }
        let ok = (0..sigmas.len()).all(|si| {
            let col: Vec<f64> = (0..lambdas.len())
                .map(|li| values[li][si][scheme])
                .collect();
            strictly_decreasing(&col)
        });
        r.check(
            ok,
            format!("closed-form P_o ({name}) strictly decreasing in lambda_p at every sigma"),
        );
    }
    r
}

fn criterion_3() -> Report {
    let mut r = Report::new();
    let start = Instant::now();
    let mut stars = Vec::new();
    for db in [0.0, 3.0, 6.0] {
        let k = kernel(&table().with_theta(db_to_linear(db)));
        let res = optimize_access_with(&k, DEFAULT_SEARCH_TOL).unwrap();
        r.note(format!(
            "theta={db} dB: q*={:.4} coverage={:.5} unimodal={}",
            res.q_star, res.upsilon_star, res.unimodal
        ));
        stars.push(res.q_star);
    }
    r.check(stars[0] >= 0.8, format!("q*(0 dB)={:.4} >= 0.8", stars[0]));
    r.check(
        stars.windows(2).all(|w| w[1] <= w[0]),
        format!("q* nonincreasing over 0,3,6 dB: {stars:.4?}"),
    );
    let secs = start.elapsed().as_secs_f64();
    r.check(secs <= 300.0, format!("runtime {secs:.1}s <= 300s"));
    r
}

fn criterion_4() -> Report {
    let mut r = Report::new();
    let params = table();
    let library = ContentLibrary::table_defaults();
    let k = kernel(&params);
    let mut ordered = true;
    let mut worst = f64::INFINITY;
    for j in 1..=20 {
        let q = j as f64 * 0.05;
        let u = k.rate_coverage(q).unwrap().value;
        let [pc, z, un] = gains(&library, &params, u);
        ordered &= pc >= z && z >= un - 1e-9;
        worst = worst.min((pc - z).min(z - un));
    }
    r.check(
        ordered,
        format!("P_o(pc) >= P_o(zipf) >= P_o(uniform) - 1e-9 on q = 0.05..1.00 (smallest margin {worst:.3e})"),
    );
    let star = optimize_access_with(&k, DEFAULT_SEARCH_TOL).unwrap();
    let beta1 = ContentLibrary::new(100, 8, 1.0).unwrap();
    let [pc, z, _] = gains(&beta1, &params, star.upsilon_star);
    let gap = (pc - z) / z;
    r.check(
        (0.05..=0.15).contains(&gap),
        format!(
            "beta=1, q*={:.4}: P_o(pc)={pc:.5} P_o(zipf)={z:.5} relative gap {:.2}% in [5%, 15%]",
            star.q_star,
            100.0 * gap
        ),
    );
    r
}

fn criterion_5() -> Report {
    let mut r = Report::new();
    let params = table();
    let library = ContentLibrary::new(100, 8, 0.0).unwrap();
    let k = kernel(&params);
    let star = optimize_access_with(&k, DEFAULT_SEARCH_TOL).unwrap();
    for (label, u) in [
        ("q*", star.upsilon_star),
        ("q=0.3", k.rate_coverage(0.3).unwrap().value),
        ("q=1", k.rate_coverage(1.0).unwrap().value),
    ] {
        let [pc, z, un] = gains(&library, &params, u);
        let spread = pc.max(z).max(un) - pc.min(z).min(un);
        r.check(
            spread <= 1e-9,
            format!("beta=0 at {label}: spread of the three schemes {spread:.2e} <= 1e-9"),
        );
    }
    r
}

/// Objective of the placement problem, written out independently.
fn placement_objective(p: &[f64], b: &[f64], n_bar: f64, upsilon: f64) -> f64 {
    p.iter()
        .zip(b)
        .map(|(&p, &b)| p * b + p * (1.0 - b) * (1.0 - (-n_bar * b).exp()) * upsilon)
        .sum()
}

/// Projected Newton ascent with finite-difference derivatives and a
/// backtracking line search; the objective is separable, so the diagonal
/// Hessian is exact.
fn brute_force_placement(p: &[f64], m: f64, n_bar: f64, upsilon: f64) -> Vec<f64> {
    let term =
        |i: usize, b: f64| p[i] * b + p[i] * (1.0 - b) * (1.0 - (-n_bar * b).exp()) * upsilon;
    let n = p.len();
    let project = |x: &[f64], w: &[f64]| -> Vec<f64> {
        let total = |tau: f64| {
            x.iter()
                .zip(w)
                .map(|(&x, &w)| (x - tau / w).clamp(0.0, 1.0))
                .sum::<f64>()
        };
        let (mut lo, mut hi) = (-1e12, 1e12);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if total(mid) > m {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        x.iter()
            .zip(w)
            .map(|(&x, &w)| (x - tau / w).clamp(0.0, 1.0))
            .collect()
    };
    let mut b = vec![m / n as f64; n];
    let h = 1e-5;
    for _ in 0..500 {
        let grad: Vec<f64> = (0..n)
            .map(|i| (term(i, b[i] + h) - term(i, b[i] - h)) / (2.0 * h))
            .collect();
        let curv: Vec<f64> = (0..n)
            .map(|i| {
                let c = -(term(i, b[i] + 1e-4) - 2.0 * term(i, b[i]) + term(i, b[i] - 1e-4)) / 1e-8;
                c.max(1e-9)
            })
            .collect();
        let target: Vec<f64> = (0..n).map(|i| b[i] + grad[i] / curv[i]).collect();
        let proposal = project(&target, &curv);
        let f0 = placement_objective(p, &b, n_bar, upsilon);
        let mut t = 1.0;
        let mut next = b.clone();
        while t > 1e-12 {
            let cand: Vec<f64> = b
                .iter()
                .zip(&proposal)
                .map(|(&a, &c)| a + t * (c - a))
                .collect();
            if placement_objective(p, &cand, n_bar, upsilon) >= f0 {
                next = cand;
                break;
            }
            t *= 0.5;
        }
        b = next;
    }
    b
}

fn criterion_6() -> Report {
    let mut r = Report::new();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_coord: f64 = 0.0;
    let mut worst_obj: f64 = 0.0;
    let mut failures = 0;
    for case in 0..50 {
        let n_f = rng.random_range(1..=5usize);
        let m = rng.random_range(1..=n_f.min(2));
        let beta = rng.random_range(0.0..=2.0);
        let upsilon = rng.random_range(0.1..=1.0);
        let n_bar = rng.random_range(0.5..=8.0);
        let library = ContentLibrary::new(n_f, m, beta).unwrap();
        let params = NetworkParams { n_bar, ..table() };
        let sol = optimize_caching(&params, &library, upsilon, 1e-9).unwrap();
        let oracle = brute_force_placement(library.popularity(), m as f64, n_bar, upsilon);
        let coord = sol
            .b_star
            .probabilities()
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let obj = (sol.objective
            - placement_objective(library.popularity(), &oracle, n_bar, upsilon))
        .abs();
        worst_coord = worst_coord.max(coord);
        worst_obj = worst_obj.max(obj);
        if coord > 1e-3 || obj > 1e-6 {
            failures += 1;
            r.note(format!(
                "case {case}: N_f={n_f} M={m} beta={beta:.3} n_bar={n_bar:.3} upsilon={upsilon:.3} coord={coord:.2e} obj={obj:.2e}"
            ));
        }
    }
    r.check(
        failures == 0,
        format!("50 instances: worst coordinate gap {worst_coord:.2e} <= 1e-3, worst objective gap {worst_obj:.2e} <= 1e-6"),
    );
    let secs = start.elapsed().as_secs_f64();
    r.check(secs <= 120.0, format!("runtime {secs:.2}s <= 120s"));
    r
}

/// Monte Carlo `E[e^{-sI}]` for inter-cluster interference seen from the
/// origin, with its standard error.
fn mc_inter(s: f64, params: &NetworkParams, realizations: u64, seed: u64) -> (f64, f64) {
    let radius = 1500.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parents = Poisson::new(params.lambda_p * std::f64::consts::PI * radius * radius).unwrap();
    let members = Poisson::new(params.n_bar).unwrap();
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..realizations {
        let mut interference = 0.0;
        let count: f64 = parents.sample(&mut rng);
        for _ in 0..count as usize {
            let rad = radius * rng.random::<f64>().sqrt();
            let ang = std::f64::consts::TAU * rng.random::<f64>();
            let (cx, cy) = (rad * ang.cos(), rad * ang.sin());
            let n: f64 = members.sample(&mut rng);
            for _ in 0..n as usize {
                let dx: f64 = StandardNormal.sample(&mut rng);
                let dy: f64 = StandardNormal.sample(&mut rng);
                if rng.random_bool(params.q) {
                    let g: f64 = Exp1.sample(&mut rng);
                    let d = (cx + params.sigma * dx).hypot(cy + params.sigma * dy);
                    interference += g * d.powf(-params.alpha);
                }
            }
        }
        let x = (-s * interference).exp();
        sum += x;
        sq += x * x;
    }
    let n = realizations as f64;
    let mean = sum / n;
    (mean, ((sq / n - mean * mean) / n).sqrt())
}

/// Monte Carlo `E[e^{-sI}]` for the interference from the other members of
/// the typical device's own cluster, with exact distances.
fn mc_intra(s: f64, params: &NetworkParams, realizations: u64, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members = Poisson::new(params.n_bar).unwrap();
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..realizations {
        let tx: f64 = StandardNormal.sample(&mut rng);
        let ty: f64 = StandardNormal.sample(&mut rng);
        let (x0, y0) = (params.sigma * tx, params.sigma * ty);
        let mut interference = 0.0;
        let n: f64 = members.sample(&mut rng);
        for _ in 0..n as usize {
            let dx: f64 = StandardNormal.sample(&mut rng);
            let dy: f64 = StandardNormal.sample(&mut rng);
            if rng.random_bool(params.q) {
                let g: f64 = Exp1.sample(&mut rng);
                let d = (params.sigma * dx - x0).hypot(params.sigma * dy - y0);
                interference += g * d.powf(-params.alpha);
            }
        }
        let x = (-s * interference).exp();
        sum += x;
        sq += x * x;
    }
    let n = realizations as f64;
    let mean = sum / n;
    (mean, ((sq / n - mean * mean) / n).sqrt())
}

fn criterion_7() -> Report {
    let mut r = Report::new();
    let realizations = 100_000;
    for (k, (dist, q)) in [
        (5.0, 0.5),
        (5.0, 0.8),
        (10.0, 0.2),
        (10.0, 0.5),
        (20.0, 0.2),
    ]
    .into_iter()
    .enumerate()
    {
        let params = table().with_q(q);
        let s = LaplaceArg::at_distance(dist, &params);
        let inter = laplace_inter(s, &params).unwrap();
        let intra = laplace_intra(s, &params).unwrap();
        let (mc_e, se_e) = mc_inter(s.value(), &params, realizations, 70 + k as u64);
        let (mc_a, se_a) = mc_intra(s.value(), &params, realizations, 700 + k as u64);
        let rel_e = (inter - mc_e).abs() / mc_e;
        let rel_a = (intra - mc_a).abs() / mc_a;
        r.check(
            rel_e <= 0.02,
            format!("s={:.0} (r={dist} m) q={q}: inter {inter:.5} vs MC {mc_e:.5} (se {se_e:.1e}) rel {:.2}% <= 2%", s.value(), 100.0 * rel_e),
        );
        r.check(
            rel_a <= 0.03,
            format!("s={:.0} (r={dist} m) q={q}: intra {intra:.5} vs MC {mc_a:.5} (se {se_a:.1e}) rel {:.2}% <= 3%", s.value(), 100.0 * rel_a),
        );
    }
    r
}

fn criterion_8() -> Report {
    let mut r = Report::new();
    // 1 / (1 + 4 * 10^2 * pi * 1e-5 * pi / 2) = 1 / (1 + 0.002 pi^2).
    let hand = 0.980_642_885_326_175_7;
    let value = closed_form_single_link_coverage(&table()).unwrap();
    let rel = (value - hand).abs() / hand;
    r.check(
        rel <= 1e-12,
        format!("single-link coverage {value:.15} vs hand value {hand:.15} (rel {rel:.1e})"),
    );
    let params = table();
    let library = ContentLibrary::table_defaults();
    let p = library.popularity();
    for (name, policy) in [
        (
            "pc",
            optimize_caching(&params, &library, value, 1e-9)
                .unwrap()
                .b_star,
        ),
        ("zipf", zipf_policy(&library)),
        ("uniform", uniform_policy(&library)),
    ] {
        let closed = closed_form_offloading_gain(&params, &library, &policy).unwrap();
        let substituted = placement_objective(p, policy.probabilities(), params.n_bar, value);
        let diff = (closed - substituted).abs();
        r.check(
            diff <= 1e-12,
            format!("{name}: closed-form gain equals substituted gain, diff {diff:.1e} <= 1e-12"),
        );
    }
    r
}

fn criterion_9() -> Report {
    let mut r = Report::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_budget: f64 = 0.0;
    let mut all_valid = true;
    for _ in 0..200 {
        let n_f = rng.random_range(1..=300usize);
        let m = rng.random_range(1..=n_f);
        let beta = rng.random_range(0.0..3.0);
        let library = ContentLibrary::new(n_f, m, beta).unwrap();
        let upsilon = rng.random_range(0.0..=1.0);
        for policy in [
            zipf_policy(&library),
            uniform_policy(&library),
            optimize_caching(&table(), &library, upsilon, 1e-9)
                .unwrap()
                .b_star,
        ] {
            all_valid &= validate_policy(&policy, &library).unwrap().is_ok();
            worst_budget = worst_budget.max((policy.total() - m as f64).abs());
        }
    }
    r.check(
        all_valid && worst_budget <= 1e-9,
        format!("policy budgets exact on 200 random libraries: worst |sum b - M| = {worst_budget:.1e} <= 1e-9"),
    );

    let spec = QuadratureSpec::default();
    let sigma = 10.0;
    let mut worst_norm: f64 = 0.0;
    for v in [0.0, sigma, 50.0 * sigma] {
        let f = |u: f64| rice_pdf(u, v, sigma).unwrap();
        let lo = (v - 12.0 * sigma).max(0.0);
        let hi = v + 12.0 * sigma;
        let total = integrate_interval(f, 0.0, lo, &spec).unwrap().value
            + integrate_interval(f, lo, hi, &spec).unwrap().value
            + integrate_from(f, hi, sigma, &spec).unwrap().value;
        worst_norm = worst_norm.max((total - 1.0).abs());
    }
    let rayleigh =
        integrate_semi_infinite(|x| rayleigh_pdf(x, 2f64.sqrt() * sigma).unwrap(), &spec)
            .unwrap()
            .value;
    worst_norm = worst_norm.max((rayleigh - 1.0).abs());
    r.check(
        worst_norm <= 1e-8,
        format!("Rice and Rayleigh densities normalize: worst error {worst_norm:.1e} <= 1e-8"),
    );

    let base = rate_coverage(&table()).unwrap().value;
    let mut worst_pd: f64 = 0.0;
    for p_d in [1e-3, 1e-1, 1.0, 10.0, 1e3] {
        let p = NetworkParams { p_d, ..table() };
        worst_pd = worst_pd.max((rate_coverage(&p).unwrap().value - base).abs());
    }
    r.check(
        worst_pd <= 1e-12,
        format!("coverage invariant to transmit power over 1e-3..1e3 W: {worst_pd:.1e} <= 1e-12"),
    );

    let library = ContentLibrary::table_defaults();
    let policy: CachingPolicy = zipf_policy(&library);
    let config = SimulationConfig {
        trials: 20_000,
        ..SimulationConfig::default()
    };
    let a = estimate(&table(), &library, &policy, &config).unwrap();
    let b = estimate(&table(), &library, &policy, &config).unwrap();
    let bits = a.p_o_hat().to_bits() == b.p_o_hat().to_bits()
        && a.upsilon_hat().to_bits() == b.upsilon_hat().to_bits()
        && a.deliveries == b.deliveries;
    r.check(
        bits,
        format!(
            "same seed, bit-identical estimates (p_o={}, upsilon={})",
            a.p_o_hat(),
            a.upsilon_hat()
        ),
    );
    r
}

type Criterion = (u32, &'static str, fn() -> Report);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "analytics vs simulation coverage", criterion_1),
        (2, "monotonicity in sigma and lambda_p", criterion_2),
        (3, "optimal access probability", criterion_3),
        (4, "scheme ordering and PC-vs-Zipf gap", criterion_4),
        (5, "beta=0 coincidence", criterion_5),
        (6, "KKT solver vs brute-force oracle", criterion_6),
        (7, "Laplace transforms vs Monte Carlo", criterion_7),
        (8, "closed-form cross-check", criterion_8),
        (9, "property suites", criterion_9),
    ];
    let mut passed = 0;
    for (id, title, run) in criteria {
        let start = Instant::now();
        let report = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Report {
                pass: false,
                lines: vec![format!("FAIL panicked: {msg}")],
            }
        });
        let verdict = if report.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id} [{title}]: {verdict} ({:.1}s)",
            start.elapsed().as_secs_f64()
        );
        for line in &report.lines {
            println!("    {line}");
        }
        passed += usize::from(report.pass);
    }
    println!("acceptance: {passed}/9 criteria passed");
    if passed != 9 {
        std::process::exit(1);
    }
}
