//! Monte Carlo ground truth for the clustered network.
//!
//! Every trial draws its own network snapshot from a ChaCha stream keyed by
//! `(seed, trial_index)`, so results do not depend on how trials are spread
//! over worker threads. Distances are exact; there is no distance
//! approximation anywhere in this module.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CachingPolicy, ContentLibrary, NetworkParams};

/// Default radius of the disc on which parent points are drawn.
pub const DEFAULT_WINDOW_RADIUS: f64 = 1000.0;
/// Smallest accepted window, in units of σ.
pub const MIN_WINDOW_SIGMAS: f64 = 20.0;
/// Standard normal quantile of the reported two-sided 95% interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// How the serving device of a coverage trial is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CatererModel {
    /// The serving device is an extra Gaussian point of the representative
    /// cluster; all Poisson members of that cluster remain potential
    /// interferers.
    #[default]
    Palm,
    /// The serving device is one of the Poisson members (clusters without
    /// members are redrawn), and it is removed from the interferer set.
    Member,
}

impl CatererModel {
    pub fn as_str(self) -> &'static str {
        match self {
            CatererModel::Palm => "palm",
            CatererModel::Member => "member",
        }
    }
}

impl std::str::FromStr for CatererModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "palm" => Ok(CatererModel::Palm),
            "member" => Ok(CatererModel::Member),
            other => Err(Error::invalid(
                "caterer",
                format!("expected `palm` or `member`, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub trials: u64,
    /// Meters.
    pub window_radius: f64,
    pub seed: u64,
    pub fading_draws_per_trial: u32,
    pub caterer: CatererModel,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            trials: 200_000,
            window_radius: DEFAULT_WINDOW_RADIUS,
            seed: 0x5eed,
            fading_draws_per_trial: 1,
            caterer: CatererModel::Palm,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self, params: &NetworkParams) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.fading_draws_per_trial == 0 {
            return Err(Error::invalid(
                "fading_draws_per_trial",
                "must be at least 1",
            ));
        }
        let min = MIN_WINDOW_SIGMAS * params.sigma;
        if !(self.window_radius.is_finite() && self.window_radius >= min) {
            return Err(Error::invalid(
                "window_radius",
                format!(
                    "must be at least {min} m (20 sigma), got {}",
                    self.window_radius
                ),
            ));
        }
        Ok(())
    }

    /// Number of independent samples behind each estimate.
    pub fn samples(&self) -> u64 {
        self.trials * u64::from(self.fading_draws_per_trial)
    }
}

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub center: Point,
    pub members: Vec<Point>,
}

/// One snapshot: the representative cluster (centre at the origin) first,
/// followed by the clusters of the parent process.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub typical: Point,
    pub clusters: Vec<Cluster>,
}

impl Network {
    pub fn representative(&self) -> &Cluster {
        &self.clusters[0]
    }

    pub fn parent_count(&self) -> usize {
        self.clusters.len() - 1
    }

    fn outer_members(&self) -> impl Iterator<Item = &Point> {
        self.clusters[1..].iter().flat_map(|c| c.members.iter())
    }

    /// Members of each cluster that transmit in one ALOHA slot.
    pub fn active_counts(&self, q: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
        self.clusters
            .iter()
            .map(|c| c.members.iter().filter(|_| transmits(rng, q)).count())
            .collect()
    }
}

/// One slotted-ALOHA access decision.
pub fn transmits(rng: &mut ChaCha8Rng, q: f64) -> bool {
    rng.random_bool(q)
}

fn stream(seed: u64, trial_index: u64, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index.wrapping_mul(2).wrapping_add(lane));
    rng
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as usize
}

fn gaussian_offset(rng: &mut ChaCha8Rng, center: Point, sigma: f64) -> Point {
    let dx: f64 = StandardNormal.sample(rng);
    let dy: f64 = StandardNormal.sample(rng);
    [center[0] + sigma * dx, center[1] + sigma * dy]
}

fn members(rng: &mut ChaCha8Rng, center: Point, params: &NetworkParams) -> Vec<Point> {
    let n = poisson(rng, params.n_bar);
    (0..n)
        .map(|_| gaussian_offset(rng, center, params.sigma))
        .collect()
}

fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Draws the snapshot of trial `trial_index`.
pub fn sample_network(
    params: &NetworkParams,
    config: &SimulationConfig,
    trial_index: u64,
) -> Network {
    let mut rng = stream(config.seed, trial_index, 0);
    let origin = [0.0, 0.0];
    let typical = gaussian_offset(&mut rng, origin, params.sigma);
    let mut clusters = vec![Cluster {
        center: origin,
        members: members(&mut rng, origin, params),
    }];
    let area = std::f64::consts::PI * config.window_radius * config.window_radius;
    let parents = poisson(&mut rng, params.lambda_p * area);
    for _ in 0..parents {
        let radius = config.window_radius * rng.random::<f64>().sqrt();
        let angle = std::f64::consts::TAU * rng.random::<f64>();
        let center = [radius * angle.cos(), radius * angle.sin()];
        let members = members(&mut rng, center, params);
        clusters.push(Cluster { center, members });
    }
    Network { typical, clusters }
}

/// Result of one slot on the typical device's D2D link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkOutcome {
    ServerInactive,
    /// SIR is `+∞` when no other device transmits.
    Attempt {
        sir: f64,
        serving_distance: f64,
    },
}

impl LinkOutcome {
    pub fn covered(&self, theta: f64) -> bool {
        matches!(*self, LinkOutcome::Attempt { sir, .. } if sir > theta)
    }
}

/// Serving link and interference given the caterer position; `skip` marks
/// one representative member that does not transmit (the caterer itself).
fn link(
    network: &Network,
    rep: &[Point],
    caterer: Point,
    skip: Option<usize>,
    params: &NetworkParams,
    rng: &mut ChaCha8Rng,
) -> LinkOutcome {
    if !transmits(rng, params.q) {
        return LinkOutcome::ServerInactive;
    }
    let rx = network.typical;
    let serving_distance = distance(rx, caterer);
    let g0: f64 = Exp1.sample(rng);
    let signal = g0 * serving_distance.powf(-params.alpha);
    let mut interference = 0.0;
    let mut add = |p: &Point, rng: &mut ChaCha8Rng| {
        if transmits(rng, params.q) {
            let g: f64 = Exp1.sample(rng);
            interference += g * distance(rx, *p).powf(-params.alpha);
        }
    };
    for (k, p) in rep.iter().enumerate() {
        if Some(k) != skip {
            add(p, rng);
        }
    }
    for p in network.outer_members() {
        add(p, rng);
    }
    let sir = if interference > 0.0 {
        signal / interference
    } else {
        f64::INFINITY
    };
    LinkOutcome::Attempt {
        sir,
        serving_distance,
    }
}

/// One coverage slot: pick a caterer, draw ALOHA activity and fading.
pub fn run_coverage_trial(
    network: &Network,
    params: &NetworkParams,
    caterer: CatererModel,
    rng: &mut ChaCha8Rng,
) -> LinkOutcome {
    match caterer {
        CatererModel::Palm => {
            let serving = gaussian_offset(rng, [0.0, 0.0], params.sigma);
            link(
                network,
                &network.representative().members,
                serving,
                None,
                params,
                rng,
            )
        }
        CatererModel::Member => {
            let redrawn;
            let rep = if network.representative().members.is_empty() {
                redrawn = loop {
                    let m = members(rng, [0.0, 0.0], params);
                    if !m.is_empty() {
                        break m;
                    }
                };
                redrawn.as_slice()
            } else {
                network.representative().members.as_slice()
            };
            let k = rng.random_range(0..rep.len());
            link(network, rep, rep[k], Some(k), params, rng)
        }
    }
}

/// Realizes cache contents with exactly `M` files per device: a device caches
/// file `i` when one of `u, u+1, …, u+M−1` falls in `[C_{i−1}, C_i)`, where
/// `C` is the cumulative caching vector and `u ~ U[0, 1)`.
#[derive(Debug, Clone)]
pub struct CacheSampler {
    cumulative: Vec<f64>,
}

impl CacheSampler {
    pub fn new(policy: &CachingPolicy) -> Self {
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(policy.len() + 1);
        cumulative.push(0.0);
        for &b in policy.probabilities() {
            acc += b;
            cumulative.push(acc);
        }
        Self { cumulative }
    }

    pub fn caches(&self, file: usize, u: f64) -> bool {
        let lo = (self.cumulative[file] - u).ceil();
        let hi = (self.cumulative[file + 1] - u).ceil();
        hi > lo
    }

    /// All files cached by a device with offset `u`.
    pub fn contents(&self, u: f64) -> Vec<usize> {
        (0..self.cumulative.len() - 1)
            .filter(|&i| self.caches(i, u))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Delivery {
    SelfCache,
    D2dSuccess,
    D2dSirFail,
    ServerInactive,
    NoCaterer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub requested_file: usize,
    pub delivery: Delivery,
    pub sir: Option<f64>,
    pub serving_distance: Option<f64>,
}

impl TrialOutcome {
    pub fn offloaded(&self) -> bool {
        matches!(self.delivery, Delivery::SelfCache | Delivery::D2dSuccess)
    }
}

fn draw_file(rng: &mut ChaCha8Rng, cumulative_popularity: &[f64]) -> usize {
    let x = rng.random::<f64>() * cumulative_popularity[cumulative_popularity.len() - 1];
    cumulative_popularity
        .partition_point(|&c| c <= x)
        .min(cumulative_popularity.len() - 1)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// One content request of the typical device.
pub fn run_offloading_trial(
    network: &Network,
    params: &NetworkParams,
    library: &ContentLibrary,
    policy: &CachingPolicy,
    rng: &mut ChaCha8Rng,
) -> TrialOutcome {
    let sampler = CacheSampler::new(policy);
    let popularity = cumulative(library.popularity());
    offloading_trial(network, params, &popularity, &sampler, rng)
}

fn offloading_trial(
    network: &Network,
    params: &NetworkParams,
    popularity: &[f64],
    sampler: &CacheSampler,
    rng: &mut ChaCha8Rng,
) -> TrialOutcome {
    let file = draw_file(rng, popularity);
    let outcome = |delivery, link: Option<(f64, f64)>| TrialOutcome {
        requested_file: file,
        delivery,
        sir: link.map(|l| l.0),
        serving_distance: link.map(|l| l.1),
    };
    if sampler.caches(file, rng.random::<f64>()) {
        return outcome(Delivery::SelfCache, None);
    }
    let rep = &network.representative().members;
    let holders: Vec<usize> = (0..rep.len())
        .filter(|_| sampler.caches(file, rng.random::<f64>()))
        .collect();
    if holders.is_empty() {
        return outcome(Delivery::NoCaterer, None);
    }
    let k = holders[rng.random_range(0..holders.len())];
    match link(network, rep, rep[k], Some(k), params, rng) {
        LinkOutcome::ServerInactive => outcome(Delivery::ServerInactive, None),
        LinkOutcome::Attempt {
            sir,
            serving_distance,
        } => {
            let delivery = if sir > params.theta {
                Delivery::D2dSuccess
            } else {
                Delivery::D2dSirFail
            };
            outcome(delivery, Some((sir, serving_distance)))
        }
    }
}

/// Proportion with its Wilson 95% halfwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportion {
    pub successes: u64,
    pub samples: u64,
}

impl Proportion {
    pub fn value(&self) -> f64 {
        self.successes as f64 / self.samples as f64
    }

    pub fn wilson_halfwidth(&self) -> f64 {
        wilson_halfwidth(self.successes, self.samples)
    }
}

pub fn wilson_halfwidth(successes: u64, samples: u64) -> f64 {
    if samples == 0 {
        return f64::NAN;
    }
    let n = samples as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DeliveryTally {
    pub self_cache: u64,
    pub d2d_success: u64,
    pub d2d_sir_fail: u64,
    pub server_inactive: u64,
    pub no_caterer: u64,
}

impl DeliveryTally {
    fn record(&mut self, d: Delivery) {
        match d {
            Delivery::SelfCache => self.self_cache += 1,
            Delivery::D2dSuccess => self.d2d_success += 1,
            Delivery::D2dSirFail => self.d2d_sir_fail += 1,
            Delivery::ServerInactive => self.server_inactive += 1,
            Delivery::NoCaterer => self.no_caterer += 1,
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            self_cache: self.self_cache + o.self_cache,
            d2d_success: self.d2d_success + o.d2d_success,
            d2d_sir_fail: self.d2d_sir_fail + o.d2d_sir_fail,
            server_inactive: self.server_inactive + o.server_inactive,
            no_caterer: self.no_caterer + o.no_caterer,
        }
    }

    pub fn total(&self) -> u64 {
        self.self_cache
            + self.d2d_success
            + self.d2d_sir_fail
            + self.server_inactive
            + self.no_caterer
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub offloading: Proportion,
    pub coverage: Proportion,
    pub deliveries: DeliveryTally,
}

impl Estimate {
    pub fn p_o_hat(&self) -> f64 {
        self.offloading.value()
    }

    pub fn upsilon_hat(&self) -> f64 {
        self.coverage.value()
    }
}

fn check_policy(library: &ContentLibrary, policy: &CachingPolicy) -> Result<()> {
    if policy.len() != library.n_f() {
        return Err(Error::LengthMismatch {
            expected: library.n_f(),
            actual: policy.len(),
        });
    }
    policy.check_box()
}

/// Coverage-only estimate of Υ.
pub fn estimate_coverage(params: &NetworkParams, config: &SimulationConfig) -> Result<Proportion> {
    params.validate()?;
    config.validate(params)?;
    let covered = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let network = sample_network(params, config, t);
            let mut rng = stream(config.seed, t, 1);
            (0..config.fading_draws_per_trial)
                .filter(|_| {
                    run_coverage_trial(&network, params, config.caterer, &mut rng)
                        .covered(params.theta)
                })
                .count() as u64
        })
        .sum();
    Ok(Proportion {
        successes: covered,
        samples: config.samples(),
    })
}

/// Joint estimate of the offloading gain and the rate coverage.
pub fn estimate(
    params: &NetworkParams,
    library: &ContentLibrary,
    policy: &CachingPolicy,
    config: &SimulationConfig,
) -> Result<Estimate> {
    params.validate()?;
    config.validate(params)?;
    check_policy(library, policy)?;
    let sampler = CacheSampler::new(policy);
    let popularity = cumulative(library.popularity());
    let (covered, deliveries) = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let network = sample_network(params, config, t);
            let mut rng = stream(config.seed, t, 1);
            let mut covered = 0u64;
            let mut tally = DeliveryTally::default();
            for _ in 0..config.fading_draws_per_trial {
                if run_coverage_trial(&network, params, config.caterer, &mut rng)
                    .covered(params.theta)
                {
                    covered += 1;
                }
                tally.record(
                    offloading_trial(&network, params, &popularity, &sampler, &mut rng).delivery,
                );
            }
            (covered, tally)
        })
        .reduce(
            || (0, DeliveryTally::default()),
            |a, b| (a.0 + b.0, a.1.merge(b.1)),
        );
    let samples = config.samples();
    Ok(Estimate {
        offloading: Proportion {
            successes: deliveries.self_cache + deliveries.d2d_success,
            samples,
        },
        coverage: Proportion {
            successes: covered,
            samples,
        },
        deliveries,
    })
}

/// Per-trial generator for callers driving the trial functions directly.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    stream(seed, trial_index, 1)
}
