use crate::error::{Error, Result};

/// Tolerances for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 2048,
        }
    }
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = QuadratureSpec {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid(
                "rel_tol",
                format!("must be > 0, got {}", self.rel_tol),
            ));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::invalid(
                "abs_tol",
                format!("must be > 0, got {}", self.abs_tol),
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::invalid("max_subdivisions", "must be >= 1"));
        }
        Ok(())
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Converged integral with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

// 21-point Gauss–Kronrod rule (QUADPACK qk21). XGK[2k+1] are the 10-point
// Gauss nodes; XGK[10] is the centre.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208067348000,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Number of abscissae in one Gauss–Kronrod panel.
pub(crate) const PANEL_NODES: usize = 21;

/// Abscissae of the 21-point rule on `[a, b]`: entries `2j`/`2j+1` are the
/// mirrored pair at `XGK[j]`, entry 20 is the centre.
pub(crate) fn panel_nodes(a: f64, b: f64) -> [f64; PANEL_NODES] {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut x = [center; PANEL_NODES];
    for j in 0..10 {
        x[2 * j] = center - half * XGK[j];
        x[2 * j + 1] = center + half * XGK[j];
    }
    x
}

/// Kronrod value and QUADPACK error estimate from the integrand values at
/// [`panel_nodes`].
pub(crate) fn panel_estimate(a: f64, b: f64, fv: &[f64; PANEL_NODES]) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let f_center = fv[20];
    let mut kronrod = f_center * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = f_center.abs() * WGK[10];
    for j in 0..10 {
        let (f1, f2) = (fv[2 * j], fv[2 * j + 1]);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }

    let value = kronrod * half;
    let abs_sum = abs_sum * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    let round_off = 50.0 * f64::EPSILON * abs_sum;
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(round_off);
    }
    (value, error)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let x = panel_nodes(a, b);
    let fv = x.map(f);
    let (value, error) = panel_estimate(a, b, &fv);
    Segment { a, b, value, error }
}

/// A Gauss–Kronrod panel holding one sample per abscissa.
#[derive(Debug, Clone)]
pub(crate) struct Panel<T> {
    pub a: f64,
    pub b: f64,
    pub samples: Vec<T>,
}

impl<T> Panel<T> {
    pub fn estimate(&self, project: impl Fn(&T) -> f64) -> (f64, f64) {
        let mut fv = [0.0; PANEL_NODES];
        for (slot, s) in fv.iter_mut().zip(&self.samples) {
            *slot = project(s);
        }
        panel_estimate(self.a, self.b, &fv)
    }
}

/// Sum of the panel estimates of one projection: `(value, error)`.
pub(crate) fn panels_integrate<T>(panels: &[Panel<T>], project: impl Fn(&T) -> f64) -> (f64, f64) {
    panels.iter().fold((0.0, 0.0), |(v, e), p| {
        let (pv, pe) = p.estimate(&project);
        (v + pv, e + pe)
    })
}

/// Adaptive panel refinement for a family of integrands sharing one
/// expensive sample per abscissa.
///
/// `sample` is called once per abscissa; `project(sample, k)` yields the
/// value of family member `k` there. Panels are bisected until every member
/// meets the tolerance, so the returned panels integrate all of them.
pub(crate) fn adaptive_panels<T, S, P>(
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
    family: usize,
    mut sample: S,
    project: P,
) -> Result<Vec<Panel<T>>>
where
    S: FnMut(f64) -> Result<T>,
    P: Fn(&T, usize) -> f64,
{
    spec.validate()?;
    struct Scored<T> {
        panel: Panel<T>,
        est: Vec<(f64, f64)>,
    }
    let mut build = |a: f64, b: f64| -> Result<Scored<T>> {
        let samples = panel_nodes(a, b)
            .into_iter()
            .map(&mut sample)
            .collect::<Result<Vec<T>>>()?;
        let panel = Panel { a, b, samples };
        let est = (0..family)
            .map(|k| panel.estimate(|s| project(s, k)))
            .collect();
        Ok(Scored { panel, est })
    };

    let mut panels = vec![build(a, b)?];
    loop {
        let mut targets = Vec::with_capacity(family);
        let mut converged = true;
        let mut worst_total = (0.0, 0.0);
        for k in 0..family {
            let value: f64 = panels.iter().map(|p| p.est[k].0).sum();
            let error: f64 = panels.iter().map(|p| p.est[k].1).sum();
            if !(value.is_finite() && error.is_finite()) {
                return Err(Error::QuadratureNonConvergence {
                    value,
                    error,
                    subdivisions: panels.len(),
                });
            }
            let target = spec.target(value);
            if error > target {
                converged = false;
                worst_total = (value, error);
            }
            targets.push(target);
        }
        if converged {
            return Ok(panels.into_iter().map(|p| p.panel).collect());
        }
        if panels.len() >= spec.max_subdivisions {
            return Err(Error::QuadratureNonConvergence {
                value: worst_total.0,
                error: worst_total.1,
                subdivisions: panels.len(),
            });
        }
        let score = |p: &Scored<T>| {
            p.est
                .iter()
                .zip(&targets)
                .map(|(&(_, e), &t)| e / t)
                .fold(0.0_f64, f64::max)
        };
        let worst = (0..panels.len())
            .max_by(|&i, &j| score(&panels[i]).total_cmp(&score(&panels[j])))
            .expect("at least one panel");
        let old = panels.swap_remove(worst);
        let mid = 0.5 * (old.panel.a + old.panel.b);
        if mid <= old.panel.a || mid >= old.panel.b {
            return Err(Error::QuadratureNonConvergence {
                value: worst_total.0,
                error: worst_total.1,
                subdivisions: panels.len() + 1,
            });
        }
        panels.push(build(old.panel.a, mid)?);
        panels.push(build(mid, old.panel.b)?);
    }
}

/// Adaptive Gauss–Kronrod integration of `f` over the finite interval
/// `[a, b]`, bisecting the segment with the largest error estimate until
/// the total estimate meets the tolerance.
pub fn integrate_interval<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid(
            "interval",
            format!("[{a}, {b}] must be finite"),
        ));
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            subdivisions: 1,
        });
    }
    if a > b {
        let q = integrate_interval(f, b, a, spec)?;
        return Ok(Quadrature {
            value: -q.value,
            ..q
        });
    }

    let mut segments = vec![gauss_kronrod(&f, a, b)];
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !(value.is_finite() && error.is_finite()) {
            return Err(Error::QuadratureNonConvergence {
                value,
                error,
                subdivisions: segments.len(),
            });
        }
        if error <= spec.target(value) {
            return Ok(Quadrature {
                value,
                error,
                subdivisions: segments.len(),
            });
        }
        if segments.len() >= spec.max_subdivisions {
            return Err(Error::QuadratureNonConvergence {
                value,
                error,
                subdivisions: segments.len(),
            });
        }

        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        // segment too narrow to split further in floating point
        if mid <= seg.a || mid >= seg.b {
            segments.push(seg);
            let value: f64 = segments.iter().map(|s| s.value).sum();
            let error: f64 = segments.iter().map(|s| s.error).sum();
            return Err(Error::QuadratureNonConvergence {
                value,
                error,
                subdivisions: segments.len(),
            });
        }
        segments.push(gauss_kronrod(&f, seg.a, mid));
        segments.push(gauss_kronrod(&f, mid, seg.b));
    }
}

/// Integrates `f` over `[a, ∞)` through `x = a + scale·t/(1−t)`, `t ∈ [0, 1)`.
///
/// `scale` should be of the order of the integrand's decay length so that
/// the mass is spread over the unit interval.
pub fn integrate_from<F>(f: F, a: f64, scale: f64, spec: &QuadratureSpec) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid("scale", format!("must be > 0, got {scale}")));
    }
    let mapped = |t: f64| {
        let w = 1.0 - t;
        let x = a + scale * t / w;
        if !x.is_finite() {
            return 0.0;
        }
        let fx = f(x);
        if fx == 0.0 {
            0.0
        } else {
            fx * scale / (w * w)
        }
    };
    integrate_interval(mapped, 0.0, 1.0, spec)
}

/// Integrates `f` over `[0, ∞)`.
pub fn integrate_semi_infinite<F>(f: F, spec: &QuadratureSpec) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    integrate_from(f, 0.0, 1.0, spec)
}
