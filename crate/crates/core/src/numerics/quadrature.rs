//! Gauss-Legendre quadrature: an adaptive bisection scheme over possibly unbounded
//! intervals, plus precomputed composite rules for integrands evaluated many times
//! on the same domain.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub gauss_legendre_order: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            max_subdivisions: 200,
            gauss_legendre_order: 20,
        }
    }
}

impl QuadratureOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidInput("quadrature tolerances must be positive".into()));
        }
        if self.gauss_legendre_order < 2 {
            return Err(Error::InvalidInput("Gauss-Legendre order must be at least 2".into()));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::InvalidInput("max_subdivisions must be positive".into()));
        }
        Ok(())
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared, lazily built rule of order `n`.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(GaussLegendre::new(n)))
            .clone()
    }

    fn apply<F: FnMut(f64) -> f64 + ?Sized>(&self, a: f64, b: f64, g: &mut F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * g(mid + half * x);
        }
        s * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Closed, half-open or open interval; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn real_line() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn positive_half_line() -> Self {
        Self::new(0.0, f64::INFINITY)
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }
}

/// Change of variables applied before the interval map. `Log` integrates in
/// `u = ln x` (for x > 0), which absorbs integrable power singularities at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substitution {
    Identity,
    Log,
}

/// An integration domain with placement hints for the unbounded maps.
///
/// `center` and `scale` are expressed in the substituted variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub interval: Interval,
    pub substitution: Substitution,
    pub center: f64,
    pub scale: f64,
}

impl Domain {
    pub fn new(interval: Interval) -> Self {
        Self {
            interval,
            substitution: Substitution::Identity,
            center: 0.0,
            scale: 1.0,
        }
    }

    pub fn log_positive(interval: Interval) -> Self {
        Self {
            interval,
            substitution: Substitution::Log,
            center: 0.0,
            scale: 1.0,
        }
    }

    pub fn with_hint(mut self, center: f64, scale: f64) -> Self {
        if center.is_finite() {
            self.center = center;
        }
        if scale.is_finite() && scale > 0.0 {
            self.scale = scale;
        }
        self
    }

    fn map(&self) -> Result<Map> {
        let (lo, hi) = match self.substitution {
            Substitution::Identity => (self.interval.lo, self.interval.hi),
            Substitution::Log => {
                if self.interval.lo < 0.0 {
                    return Err(Error::Domain("log substitution needs a nonnegative interval".into()));
                }
                (self.interval.lo.ln(), self.interval.hi.ln())
            }
        };
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Domain(format!("invalid interval [{lo}, {hi}]")));
        }
        let s = self.scale;
        Ok(match (lo.is_finite(), hi.is_finite()) {
            (true, true) => Map::Finite { lo, hi },
            (false, false) => Map::Line { c: self.center, s },
            (true, false) => Map::Lower { lo, s },
            (false, true) => Map::Upper { hi, s },
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Finite { lo: f64, hi: f64 },
    Line { c: f64, s: f64 },
    Lower { lo: f64, s: f64 },
    Upper { hi: f64, s: f64 },
}

impl Map {
    /// Maps t in [-1, 1] to (u, du/dt).
    #[inline]
    fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            Map::Finite { lo, hi } => {
                let half = 0.5 * (hi - lo);
                (lo + half * (t + 1.0), half)
            }
            Map::Line { c, s } => {
                let d = 1.0 - t * t;
                (c + s * t / d, s * (1.0 + t * t) / (d * d))
            }
            Map::Lower { lo, s } => {
                let tau = 0.5 * (t + 1.0);
                let d = 1.0 - tau;
                (lo + s * tau / d, 0.5 * s / (d * d))
            }
            Map::Upper { hi, s } => {
                let tau = 0.5 * (1.0 - t);
                let d = 1.0 - tau;
                (hi - s * tau / d, 0.5 * s / (d * d))
            }
        }
    }
}

/// Integrand on the canonical variable t, including all Jacobians.
fn canonical<'a, F: FnMut(f64) -> f64 + 'a>(
    domain: &Domain,
    mut f: F,
) -> Result<impl FnMut(f64) -> f64 + 'a> {
    let map = domain.map()?;
    let sub = domain.substitution;
    Ok(move |t: f64| {
        let (u, jac) = map.eval(t);
        if !u.is_finite() || !jac.is_finite() {
            return 0.0;
        }
        match sub {
            Substitution::Identity => f(u) * jac,
            Substitution::Log => {
                let x = u.exp();
                if x == 0.0 || !x.is_finite() {
                    return 0.0;
                }
                let v = f(x);
                if v == 0.0 {
                    0.0
                } else {
                    v * x * jac
                }
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
    pub fallback_used: bool,
}

struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrates `f` over `interval` by adaptive bisection of Gauss-Legendre panels.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    interval: Interval,
    opts: &QuadratureOptions,
) -> Result<Integral> {
    integrate_domain(f, &Domain::new(interval), opts)
}

/// Adaptive integration over a [`Domain`]. Unbounded ends are mapped onto [-1, 1]
/// with `x = c + s t/(1-t^2)` (two-sided) or `x = lo + s τ/(1-τ)` (one-sided).
/// When refinement stalls at `max_subdivisions`, a dense composite rule is used
/// instead and the discrepancy is reported as the error estimate.
pub fn integrate_domain<F: FnMut(f64) -> f64>(
    f: F,
    domain: &Domain,
    opts: &QuadratureOptions,
) -> Result<Integral> {
    opts.validate()?;
    if domain.interval.lo == domain.interval.hi {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
            subdivisions: 0,
            fallback_used: false,
        });
    }
    let rule = GaussLegendre::cached(opts.gauss_legendre_order);
    let mut g = canonical(domain, f)?;
    let mut evals = 0usize;
    let order = rule.nodes.len();

    let mut make_panel = |a: f64, b: f64, whole: Option<f64>, g: &mut dyn FnMut(f64) -> f64| {
        let m = 0.5 * (a + b);
        let whole = whole.unwrap_or_else(|| {
            evals += order;
            rule.apply(a, b, g)
        });
        let left = rule.apply(a, m, g);
        let right = rule.apply(m, b, g);
        evals += 2 * order;
        Panel {
            a,
            b,
            left,
            right,
            err: (whole - left - right).abs(),
        }
    };

    const INITIAL_PANELS: usize = 4;
    let mut heap = BinaryHeap::new();
    for k in 0..INITIAL_PANELS {
        let a = -1.0 + 2.0 * k as f64 / INITIAL_PANELS as f64;
        let b = -1.0 + 2.0 * (k + 1) as f64 / INITIAL_PANELS as f64;
        heap.push(make_panel(a, b, None, &mut g));
    }

    let mut subdivisions = 0usize;
    loop {
        let (value, err) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.left + p.right, e + p.err));
        if !value.is_finite() || !err.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite partial integral ({value}) on {:?}",
                domain.interval
            )));
        }
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if err <= target {
            return Ok(Integral {
                value,
                abs_error: err,
                evaluations: evals,
                subdivisions,
                fallback_used: false,
            });
        }
        if subdivisions >= opts.max_subdivisions {
            let panels = 8 * opts.max_subdivisions;
            let dense_value = composite_t(&mut g, panels, &rule);
            evals += panels * order;
            if !dense_value.is_finite() {
                return Err(Error::Quadrature("dense fallback rule is non-finite".into()));
            }
            return Ok(Integral {
                value: dense_value,
                abs_error: (dense_value - value).abs(),
                evaluations: evals,
                subdivisions,
                fallback_used: true,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let m = 0.5 * (worst.a + worst.b);
        heap.push(make_panel(worst.a, m, Some(worst.left), &mut g));
        heap.push(make_panel(m, worst.b, Some(worst.right), &mut g));
        subdivisions += 1;
    }
}

fn composite_t<G: FnMut(f64) -> f64>(g: &mut G, panels: usize, rule: &GaussLegendre) -> f64 {
    let h = 2.0 / panels as f64;
    (0..panels)
        .map(|k| {
            let a = -1.0 + h * k as f64;
            rule.apply(a, a + h, g)
        })
        .sum()
}

/// A fixed set of nodes and weights approximating an integral over a domain.
/// Building it once lets callers cache integrand factors at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NodeRule {
    /// Composite Gauss-Legendre rule with `panels` equal panels in the canonical
    /// variable, mapped onto `domain`. Nodes with vanishing weight are dropped.
    pub fn composite(domain: &Domain, panels: usize, order: usize) -> Result<Self> {
        if panels == 0 || order < 2 {
            return Err(Error::InvalidInput("composite rule needs panels >= 1 and order >= 2".into()));
        }
        let map = domain.map()?;
        let gl = GaussLegendre::cached(order);
        let h = 2.0 / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for k in 0..panels {
            let a = -1.0 + h * k as f64;
            let mid = a + 0.5 * h;
            for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                let t = mid + 0.5 * h * x;
                let (u, jac) = map.eval(t);
                let (node, wt) = match domain.substitution {
                    Substitution::Identity => (u, w * 0.5 * h * jac),
                    Substitution::Log => {
                        let x = u.exp();
                        (x, w * 0.5 * h * jac * x)
                    }
                };
                if node.is_finite() && wt.is_finite() && wt > 0.0 {
                    if domain.substitution == Substitution::Log && node == 0.0 {
                        continue;
                    }
                    nodes.push(node);
                    weights.push(wt);
                }
            }
        }
        Ok(Self { nodes, weights })
    }

    /// Plain Gauss-Legendre panels between consecutive `breaks`.
    pub fn piecewise(breaks: &[f64], order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidInput("piecewise rule needs order >= 2".into()));
        }
        let gl = GaussLegendre::cached(order);
        let mut nodes = Vec::with_capacity(breaks.len().saturating_sub(1) * order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(a.is_finite() && b.is_finite()) || b < a {
                return Err(Error::Domain(format!("bad panel [{a}, {b}]")));
            }
            if b == a {
                continue;
            }
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, wt) in gl.nodes.iter().zip(&gl.weights) {
                nodes.push(mid + half * x);
                weights.push(wt * half);
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn append(&mut self, other: NodeRule) {
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| {
                let v = f(x);
                if v == 0.0 {
                    0.0
                } else {
                    w * v
                }
            })
            .sum()
    }
}
