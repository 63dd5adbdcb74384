//! Derivative-free optimizers and quadrature shared by every objective.

mod optimize;
mod quadrature;

pub use optimize::{
    bfgs, bfgs_box, brent_min, brent_multistart, nelder_mead, Minimum, OptimizerOptions, ScalarMinimum, Termination,
};
pub use quadrature::{
    integrate, integrate_domain, Domain, GaussLegendre, Integral, Interval, NodeRule, QuadratureOptions,
    Substitution,
};

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn normal_pdf(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
    }

    fn cauchy(a: f64, y: f64) -> f64 {
        a / (PI * (a * a + y * y))
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in [2, 5, 10, 20, 32] {
            let gl = GaussLegendre::new(n);
            let s: f64 = gl.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}: {s}");
            // exact for polynomials of degree 2n - 1
            let m: f64 = gl
                .nodes
                .iter()
                .zip(&gl.weights)
                .map(|(x, w)| w * x.powi(2 * n as i32 - 2))
                .sum();
            assert!((m - 2.0 / (2.0 * n as f64 - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_on_half_line() {
        let r = integrate(|x| (-x).exp(), Interval::positive_half_line(), &QuadratureOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{r:?}");
        assert!(!r.fallback_used);
    }

    #[test]
    fn cauchy_ratio_closed_form() {
        let (a, b) = (1.0, 2.0);
        let r = integrate(
            |y| cauchy(b, y).powi(2) / cauchy(a, y),
            Interval::real_line(),
            &QuadratureOptions::default(),
        )
        .unwrap();
        assert!((r.value - (a * a + b * b) / (2.0 * a * b)).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn gaussian_square_integral() {
        let r = integrate(|x| normal_pdf(x).powi(2), Interval::real_line(), &QuadratureOptions::default()).unwrap();
        assert!((r.value - 1.0 / (2.0 * PI.sqrt())).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn upper_bounded_and_finite_intervals() {
        let opts = QuadratureOptions::default();
        let r = integrate(|x| x.exp(), Interval::new(f64::NEG_INFINITY, 0.0), &opts).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
        let r = integrate(|x| x.sin(), Interval::new(0.0, PI), &opts).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10);
        let r = integrate(|x| x, Interval::new(1.0, 1.0), &opts).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn log_substitution_handles_power_singularity() {
        // Weibull(shape 1/2, scale 1) density has an x^{-1/2} pole at 0.
        let f = |x: f64| 0.5 * x.powf(-0.5) * (-x.sqrt()).exp();
        let dom = Domain::log_positive(Interval::positive_half_line());
        let r = integrate_domain(f, &dom, &QuadratureOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8, "{r:?}");
        let rule = NodeRule::composite(&dom, 48, 20).unwrap();
        assert!((rule.integrate(f) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn stalled_refinement_falls_back() {
        let opts = QuadratureOptions {
            max_subdivisions: 2,
            abs_tol: 1e-15,
            rel_tol: 1e-15,
            ..Default::default()
        };
        let r = integrate(|x| (x - 0.3).abs().sqrt(), Interval::new(0.0, 1.0), &opts).unwrap();
        assert!(r.fallback_used);
        let exact = (2.0 / 3.0) * (0.3f64.powf(1.5) + 0.7f64.powf(1.5));
        assert!((r.value - exact).abs() < 1e-4, "{} vs {exact}", r.value);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let r = integrate(|_| f64::NAN, Interval::new(0.0, 1.0), &QuadratureOptions::default());
        assert!(matches!(r, Err(crate::error::Error::Quadrature(_))));
    }

    #[test]
    fn linearity_on_smooth_functions() {
        let opts = QuadratureOptions::default();
        let f = |x: f64| normal_pdf(x - 1.0);
        let g = |x: f64| (-x * x).exp() * x.cos();
        let (alpha, beta) = (2.5, -0.75);
        let i_f = integrate(f, Interval::real_line(), &opts).unwrap();
        let i_g = integrate(g, Interval::real_line(), &opts).unwrap();
        let i_comb = integrate(|x| alpha * f(x) + beta * g(x), Interval::real_line(), &opts).unwrap();
        let tol = i_comb.abs_error + alpha.abs() * i_f.abs_error + beta.abs() * i_g.abs_error + 1e-12;
        assert!((i_comb.value - alpha * i_f.value - beta * i_g.value).abs() <= tol.max(1e-9));
    }

    #[test]
    fn unbounded_agrees_with_truncated() {
        let opts = QuadratureOptions::default();
        let f = |x: f64| (-(x - 0.5).powi(2)).exp();
        let full = integrate(f, Interval::real_line(), &opts).unwrap();
        let cut = integrate(f, Interval::new(-12.0, 13.0), &opts).unwrap();
        assert!((full.value - cut.value).abs() < 1e-6);
    }
}
