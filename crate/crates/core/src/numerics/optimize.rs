//! Derivative-free minimizers: Nelder-Mead for d >= 2 and Brent's method on an interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub max_evals: usize,
    pub x_tolerance: f64,
    pub f_tolerance: f64,
    pub initial_simplex_scale: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_evals: 5000,
            x_tolerance: 1e-8,
            f_tolerance: 1e-8,
            initial_simplex_scale: 0.1,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_tolerance > 0.0 && self.f_tolerance > 0.0 && self.initial_simplex_scale > 0.0) {
            return Err(Error::InvalidInput("optimizer tolerances and simplex scale must be positive".into()));
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidInput("max_evals must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    SimplexSize,
    FunctionSpread,
    MaxEvals,
    /// Gradient max-norm below `f_tolerance`.
    Gradient,
    /// Accepted step below `x_tolerance`.
    StepSize,
    /// Backtracking found no decrease.
    LineSearch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub termination: Termination,
}

#[inline]
fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Nelder-Mead simplex search with reflection 1, expansion 2, contraction 1/2 and
/// shrink 1/2. The initial simplex is `x0` plus one step per coordinate of length
/// `initial_simplex_scale * max(1, |x0_i|)`. NaN values are treated as `+inf`.
pub fn nelder_mead<F>(mut objective: F, x0: &[f64], opts: &OptimizerOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    opts.validate()?;
    let d = x0.len();
    if d < 2 {
        return Err(Error::InvalidInput(format!(
            "Nelder-Mead needs dimension >= 2, got {d}; use brent_min in one dimension"
        )));
    }
    let f0 = objective(x0);
    if !f0.is_finite() {
        return Err(Error::NonFinite(x0.to_vec()));
    }
    let mut evals = 1usize;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += opts.initial_simplex_scale * x0[i].abs().max(1.0);
        let fx = sanitize(objective(&x));
        evals += 1;
        simplex.push((x, fx));
    }

    let mut centroid = vec![0.0; d];
    let mut trial = vec![0.0; d];
    let mut trial2 = vec![0.0; d];
    let termination;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_best = simplex[0].1;
        let f_worst = simplex[d].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < opts.x_tolerance {
            termination = Termination::SimplexSize;
            break;
        }
        if (f_worst - f_best).abs() < opts.f_tolerance {
            termination = Termination::FunctionSpread;
            break;
        }
        if evals >= opts.max_evals {
            termination = Termination::MaxEvals;
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..d] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / d as f64;
            }
        }
        let worst = simplex[d].0.clone();
        let point = |coef: f64, out: &mut Vec<f64>| {
            for ((o, c), w) in out.iter_mut().zip(&centroid).zip(&worst) {
                *o = c + coef * (c - w);
            }
        };

        point(1.0, &mut trial);
        let fr = sanitize(objective(&trial));
        evals += 1;
        let f_second_worst = simplex[d - 1].1;
        if fr < f_best {
            point(2.0, &mut trial2);
            let fe = sanitize(objective(&trial2));
            evals += 1;
            simplex[d] = if fe < fr {
                (trial2.clone(), fe)
            } else {
                (trial.clone(), fr)
            };
            continue;
        }
        if fr < f_second_worst {
            simplex[d] = (trial.clone(), fr);
            continue;
        }
        let (fc, accept) = if fr < f_worst {
            point(0.5, &mut trial2);
            let fc = sanitize(objective(&trial2));
            evals += 1;
            (fc, fc <= fr)
        } else {
            point(-0.5, &mut trial2);
            let fc = sanitize(objective(&trial2));
            evals += 1;
            (fc, fc < f_worst)
        };
        if accept {
            simplex[d] = (trial2.clone(), fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for (x, fx) in simplex.iter_mut().skip(1) {
            for (xi, bi) in x.iter_mut().zip(&best) {
                *xi = bi + 0.5 * (*xi - bi);
            }
            *fx = sanitize(objective(x));
            evals += 1;
        }
    }
    let (x, f) = simplex.swap_remove(0);
    Ok(Minimum {
        x,
        f,
        evals,
        termination,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub x: f64,
    pub f: f64,
    pub evals: usize,
}

/// Brent's golden-section / parabolic-interpolation minimizer on `[lo, hi]`.
///
/// `+inf` values act as walls; a NaN value is an error.
pub fn brent_min<F>(mut objective: F, lo: f64, hi: f64, opts: &OptimizerOptions) -> Result<ScalarMinimum>
where
    F: FnMut(f64) -> f64,
{
    opts.validate()?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput(format!("brent_min needs a finite interval lo < hi, got [{lo}, {hi}]")));
    }
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut eval = |x: f64, evals: &mut usize| -> Result<f64> {
        *evals += 1;
        let v = objective(x);
        if v.is_nan() {
            Err(Error::NonFinite(vec![x]))
        } else {
            Ok(v)
        }
    };

    let mut evals = 0usize;
    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = eval(x, &mut evals)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    while evals < opts.max_evals {
        let m = 0.5 * (a + b);
        let tol = sqrt_eps * x.abs() + opts.x_tolerance / 3.0;
        let tol2 = 2.0 * tol;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol && fx.is_finite() && fw.is_finite() && fv.is_finite() {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol } else { -tol };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol { x + d } else if d > 0.0 { x + tol } else { x - tol };
        let fu = eval(u, &mut evals)?;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok(ScalarMinimum { x, f: fx, evals })
}

/// Runs [`brent_min`] on `pieces` consecutive subintervals of `[lo, hi]`, spaced
/// geometrically when `log_spaced` (requires `lo > 0`), and returns every local
/// minimum found, best first.
pub fn brent_multistart<F>(
    mut objective: F,
    lo: f64,
    hi: f64,
    pieces: usize,
    log_spaced: bool,
    opts: &OptimizerOptions,
) -> Result<Vec<ScalarMinimum>>
where
    F: FnMut(f64) -> f64,
{
    if pieces == 0 {
        return Err(Error::InvalidInput("brent_multistart needs at least one piece".into()));
    }
    if log_spaced && lo <= 0.0 {
        return Err(Error::InvalidInput("log-spaced pieces need lo > 0".into()));
    }
    let edge = |k: usize| -> f64 {
        let s = k as f64 / pieces as f64;
        if k == pieces {
            hi
        } else if log_spaced {
            (lo.ln() + s * (hi.ln() - lo.ln())).exp()
        } else {
            lo + s * (hi - lo)
        }
    };
    let mut found = Vec::with_capacity(pieces);
    for k in 0..pieces {
        let (a, b) = (edge(k), edge(k + 1));
        found.push(brent_min(&mut objective, a, b, opts)?);
    }
    found.sort_by(|p, q| p.f.total_cmp(&q.f));
    Ok(found)
}

/// BFGS with Armijo backtracking for smooth objectives. `objective` returns the
/// value and gradient; `+inf` (or NaN) values act as walls and make the line
/// search back off. The first step is limited to `initial_simplex_scale * max(1, |x0|)`.
pub fn bfgs<F>(objective: F, x0: &[f64], opts: &OptimizerOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let free = vec![(f64::NEG_INFINITY, f64::INFINITY); x0.len()];
    bfgs_box(objective, x0, &free, opts)
}

/// [`bfgs`] on a box: steps are projected onto the box and coordinates held at a
/// bound by the gradient are frozen until the gradient lets them go.
pub fn bfgs_box<F>(mut objective: F, x0: &[f64], bounds: &[(f64, f64)], opts: &OptimizerOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    opts.validate()?;
    let d = x0.len();
    if d == 0 || bounds.len() != d || bounds.iter().any(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::InvalidInput("bfgs needs matching, ordered bounds".into()));
    }
    let project = |x: &[f64]| -> Vec<f64> { x.iter().zip(bounds).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect() };
    let projected = |g: &[f64], x: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|i| {
                let held = (x[i] <= bounds[i].0 && g[i] > 0.0) || (x[i] >= bounds[i].1 && g[i] < 0.0);
                if held {
                    0.0
                } else {
                    g[i]
                }
            })
            .collect()
    };
    let mut x = project(x0);
    let (mut f, mut g) = objective(&x);
    let mut evals = 1;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(x.clone()));
    }
    let mut h = identity(d);
    let mut first = true;
    let mut active = vec![false; d];
    let termination = loop {
        let now: Vec<bool> = (0..d)
            .map(|i| (x[i] <= bounds[i].0 && g[i] > 0.0) || (x[i] >= bounds[i].1 && g[i] < 0.0))
            .collect();
        if now != active {
            active = now;
            h = identity(d);
            first = true;
        }
        let pg: Vec<f64> = (0..d).map(|i| if active[i] { 0.0 } else { g[i] }).collect();
        if norm_inf(&pg) <= opts.f_tolerance {
            break Termination::Gradient;
        }
        if evals >= opts.max_evals {
            break Termination::MaxEvals;
        }
        let mut dir: Vec<f64> = (0..d).map(|i| if active[i] { 0.0 } else { -dot(&h[i], &pg) }).collect();
        if !(dot(&pg, &dir) < 0.0) {
            h = identity(d);
            dir = pg.iter().map(|v| -v).collect();
            first = true;
        }
        let mut t = 1.0;
        if first {
            let cap = opts.initial_simplex_scale * norm_inf(&x).max(1.0);
            t = (cap / norm_inf(&dir)).min(1.0);
        }
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            let xn = project(&trial);
            let decrease: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            let (fnew, gnew) = objective(&xn);
            evals += 1;
            if fnew.is_finite() && gnew.iter().all(|v| v.is_finite()) {
                let armijo = fnew <= f + 1e-4 * decrease;
                // below the rounding level of f only the gradient can tell progress
                let noise = 1e-13 * (1.0 + f.abs());
                let approximate = -decrease <= noise
                    && fnew <= f + noise
                    && norm_inf(&projected(&gnew, &xn)) < norm_inf(&pg);
                if armijo || approximate {
                    accepted = Some((xn, fnew, gnew));
                    break;
                }
            }
            if evals >= opts.max_evals {
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            break if evals >= opts.max_evals { Termination::MaxEvals } else { Termination::LineSearch };
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let step = norm_inf(&s);
        let df = f - fnew;
        x = xn;
        f = fnew;
        g = gnew;
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) {
            if first {
                // scale the initial inverse Hessian to the observed curvature
                let scale = sy / dot(&y, &y);
                h = identity(d).into_iter().map(|r| r.into_iter().map(|v| v * scale).collect()).collect();
            }
            let hy: Vec<f64> = (0..d).map(|i| dot(&h[i], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..d {
                for j in 0..d {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
            first = false;
        }
        if step <= opts.x_tolerance * (1.0 + norm_inf(&x)) && df.abs() <= opts.f_tolerance * (1.0 + f.abs()) {
            break Termination::StepSize;
        }
    };
    Ok(Minimum {
        x,
        f,
        evals,
        termination,
    })
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
