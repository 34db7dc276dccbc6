//! Analytic predictions and bounds for the eigencomponents.
//!
//! Conventions: `n` is a horizon, so `expected_component(.., n)` predicts
//! `E[<x_{n+1} - x_*, v_l>]` and uses the steps `alpha_0 ..= alpha_n`.

mod moments;
mod rates;

pub use moments::{
    moment_coefficients, moment_path, second_moment_recursion, MomentCoefficients, MomentPath,
};
pub use rates::{
    rate_bounds_harmonic, rate_bounds_polynomial, Decay, HarmonicRates, PolynomialRates, RateBound,
};

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{component, ProblemConstants, SyntheticProblem};
use crate::schedule::StepSchedule;

/// The per-step coefficient functions of the second-moment recursion, bound
/// to one problem's constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientFunctions {
    /// `M * L~`
    pub m_l_tilde: f64,
    pub c_a: f64,
    pub sigma_max_sq: f64,
    pub sigma_min_sq: f64,
    pub f_star: f64,
    pub sigma_noise_sq: f64,
}

impl CoefficientFunctions {
    pub fn new(c: &ProblemConstants) -> Self {
        CoefficientFunctions {
            m_l_tilde: c.rows as f64 * c.l_tilde,
            c_a: c.c_a,
            sigma_max_sq: c.sigma_max_sq,
            sigma_min_sq: c.sigma_min_sq,
            f_star: c.f_star,
            sigma_noise_sq: c.sigma_noise_sq,
        }
    }

    /// `1 - 2 alpha sigma_l^2`
    #[inline]
    pub fn a(&self, alpha: f64, sigma_l_sq: f64) -> f64 {
        1.0 - 2.0 * alpha * sigma_l_sq
    }

    /// `alpha^2 M L~ c(A) sigma_max^2`
    #[inline]
    pub fn b(&self, alpha: f64) -> f64 {
        alpha * alpha * self.m_l_tilde * self.c_a * self.sigma_max_sq
    }

    /// `2 alpha^2 M L~ F_*`
    #[inline]
    pub fn c(&self, alpha: f64) -> f64 {
        2.0 * alpha * alpha * self.m_l_tilde * self.f_star
    }

    /// `1 - alpha sigma_min^2`
    #[inline]
    pub fn p(&self, alpha: f64) -> f64 {
        1.0 - alpha * self.sigma_min_sq
    }

    /// `2 alpha^2 sigma^2`
    #[inline]
    pub fn q(&self, alpha: f64) -> f64 {
        2.0 * alpha * alpha * self.sigma_noise_sq
    }

    /// `M L~ c(A) sigma_max^2`, the constant multiplying `alpha^2` in `b`.
    pub fn b_scale(&self) -> f64 {
        self.m_l_tilde * self.c_a * self.sigma_max_sq
    }
}

/// Running product of `(1 - alpha_k sigma^2)` kept as log-magnitude and sign.
#[derive(Debug, Clone, Copy)]
struct SignedLogProduct {
    log_mag: f64,
    /// Neumaier compensation term for `log_mag`.
    comp: f64,
    negative: bool,
    zero: bool,
}

impl SignedLogProduct {
    fn one() -> Self {
        SignedLogProduct {
            log_mag: 0.0,
            comp: 0.0,
            negative: false,
            zero: false,
        }
    }

    fn add_log(&mut self, t: f64) {
        let s = self.log_mag + t;
        if self.log_mag.abs() >= t.abs() {
            self.comp += (self.log_mag - s) + t;
        } else {
            self.comp += (t - s) + self.log_mag;
        }
        self.log_mag = s;
    }

    fn mul_factor(&mut self, f: f64) {
        if f == 0.0 {
            self.zero = true;
        } else {
            self.negative ^= f < 0.0;
            self.add_log(f.abs().ln());
        }
    }

    /// Multiply by `1 - x` with `ln_1p` accuracy for small `x`.
    fn mul_one_minus(&mut self, x: f64) {
        let f = 1.0 - x;
        if f == 0.0 {
            self.zero = true;
        } else if f > 0.0 {
            self.add_log((-x).ln_1p());
        } else {
            self.negative = !self.negative;
            self.add_log((x - 1.0).ln());
        }
    }

    fn value(&self) -> f64 {
        if self.zero {
            return 0.0;
        }
        let m = (self.log_mag + self.comp).exp();
        if self.negative {
            -m
        } else {
            m
        }
    }
}

/// `prod_{k=0}^{n} (1 - alpha_k sigma^2)`.
pub fn mean_factor(schedule: &StepSchedule, sigma_sq: f64, n: usize) -> f64 {
    if let StepSchedule::Fixed { alpha } = *schedule {
        let f = 1.0 - alpha * sigma_sq;
        let mut acc = SignedLogProduct::one();
        if f == 0.0 {
            return 0.0;
        }
        let count = (n + 1) as f64;
        let log_f = if f > 0.0 {
            (-alpha * sigma_sq).ln_1p()
        } else {
            f.abs().ln()
        };
        acc.add_log(count * log_f);
        acc.negative = f < 0.0 && (n + 1) % 2 == 1;
        return acc.value();
    }
    let mut acc = SignedLogProduct::one();
    for k in 0..=n {
        acc.mul_one_minus(schedule.step_at(k) * sigma_sq);
        if acc.zero {
            return 0.0;
        }
    }
    acc.value()
}

/// Mean factors at recorded iterations: entry `r` is
/// `prod_{k < iters[r]} (1 - alpha_k sigma^2)` (1 at iteration 0), computed
/// in one pass. `iters` must be ascending.
pub fn mean_factor_curve(schedule: &StepSchedule, sigma_sq: f64, iters: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(iters.len());
    let mut acc = SignedLogProduct::one();
    let mut k = 0usize;
    for &target in iters {
        while k < target {
            acc.mul_one_minus(schedule.step_at(k) * sigma_sq);
            k += 1;
        }
        out.push(acc.value());
    }
    out
}

/// Exact `E[<x_{n+1} - x_*, v_l> | x_0]` for SGD (and the GD iterate itself).
pub fn expected_component(
    p: &SyntheticProblem,
    schedule: &StepSchedule,
    l: usize,
    x0: &DVector<f64>,
    n: usize,
) -> Result<f64> {
    let c0 = component(p, x0, l)?;
    if c0 == 0.0 {
        return Ok(0.0);
    }
    Ok(mean_factor(schedule, p.sigma_sq(l)?, n) * c0)
}

/// `(b/(b+n))^{a sigma_l^2} |c0|`, a bound on `|E[<x_{n+1} - x_*, v_l>]|`
/// under `alpha_k = a/(b+k)`. Requires `a, b > 0`.
pub fn mean_bound_harmonic(a: f64, b: f64, sigma_l_sq: f64, c0: f64, n: usize) -> f64 {
    (b / (b + n as f64)).powf(a * sigma_l_sq) * c0.abs()
}

/// Root-exponential bound on `|E[<x_{n+1} - x_*, v_l>]|` under
/// `alpha_k = a/(b+k)^gamma`. Requires `1/2 < gamma < 1`.
pub fn mean_bound_polynomial(
    a: f64,
    b: f64,
    gamma: f64,
    sigma_l_sq: f64,
    c0: f64,
    n: usize,
) -> f64 {
    let e = 1.0 - gamma;
    let rate = a * sigma_l_sq / e;
    (rate * (b.powf(e) - (b + n as f64).powf(e))).exp() * c0.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedMomentBound {
    pub bound: f64,
    /// `1 - 2 alpha sigma_min^2 + alpha^2 M L~ c(A) sigma_max^2`
    pub base: f64,
    /// `0 < base < 1`
    pub contractive: bool,
}

/// Fixed-step bound `base^{n+1} ||x_0 - x_*||^2` on `E[<x_{n+1} - x_*, v_l>^2]`,
/// valid for consistent problems only.
pub fn second_moment_bound_fixed(
    p: &SyntheticProblem,
    consts: &ProblemConstants,
    alpha: f64,
    x0: &DVector<f64>,
    n: usize,
) -> Result<FixedMomentBound> {
    if !p.is_consistent() {
        return Err(Error::Hypothesis(
            "the fixed-step second-moment bound needs a consistent problem".into(),
        ));
    }
    let f = CoefficientFunctions::new(consts);
    let base = 1.0 - 2.0 * alpha * f.sigma_min_sq + f.b(alpha);
    let e0 = (x0 - p.x_star()).norm_squared();
    Ok(FixedMomentBound {
        bound: base.powf((n + 1) as f64) * e0,
        base,
        contractive: base > 0.0 && base < 1.0,
    })
}

/// `(1 - sigma_l^2/||A||_F^2)^k <x_0 - x_*, v_l>`: the exact mean of
/// randomized Kaczmarz with squared-row-norm sampling on a consistent problem.
pub fn kaczmarz_expected_component(
    p: &SyntheticProblem,
    l: usize,
    x0: &DVector<f64>,
    k: usize,
) -> Result<f64> {
    if !p.is_consistent() {
        return Err(Error::Hypothesis(
            "the Kaczmarz mean formula needs a consistent problem".into(),
        ));
    }
    let c0 = component(p, x0, l)?;
    let frob_sq: f64 = p.sigma().iter().map(|s| s * s).sum();
    let ratio = p.sigma_sq(l)? / frob_sq;
    let mut acc = SignedLogProduct::one();
    if k > 0 {
        if ratio == 1.0 {
            return Ok(0.0);
        }
        acc.add_log(k as f64 * (-ratio).ln_1p());
    }
    Ok(acc.value() * c0)
}

/// Kaczmarz mean factors `(1 - sigma_l^2/||A||_F^2)^k` at the given iterations.
pub fn kaczmarz_factor_curve(p: &SyntheticProblem, l: usize, iters: &[usize]) -> Result<Vec<f64>> {
    let frob_sq: f64 = p.sigma().iter().map(|s| s * s).sum();
    let ratio = p.sigma_sq(l)? / frob_sq;
    Ok(iters
        .iter()
        .map(|&k| {
            if k == 0 {
                1.0
            } else if ratio == 1.0 {
                0.0
            } else {
                (k as f64 * (-ratio).ln_1p()).exp()
            }
        })
        .collect())
}

/// Multiply by a single signed factor; used by tests of the log-domain product.
#[doc(hidden)]
pub fn signed_log_product(factors: &[f64]) -> f64 {
    let mut acc = SignedLogProduct::one();
    for &f in factors {
        acc.mul_factor(f);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_problem, compute_constants, Consistency, Spacing, SpectrumSpec};
    use crate::solvers::initial_point;

    fn problem(consistency: Consistency) -> SyntheticProblem {
        let spec = SpectrumSpec {
            rows: 12,
            cols: 5,
            sigma_min: 0.3,
            sigma_max: 1.0,
            spacing: Spacing::Linear,
            seed: 2,
        };
        build_problem(&spec, consistency, 1).unwrap()
    }

    #[test]
    fn log_product_matches_direct_product() {
        let f = [0.5, -0.25, 3.0, -1.5, 0.9];
        let direct: f64 = f.iter().product();
        assert!((signed_log_product(&f) - direct).abs() < 1e-15);
        assert_eq!(signed_log_product(&[1.0, 0.0, 2.0]), 0.0);
    }

    #[test]
    fn fixed_mean_factor_is_power() {
        let s = StepSchedule::fixed(0.3).unwrap();
        for n in [0usize, 1, 7, 100] {
            let want = (1.0 - 0.3 * 0.8f64).powi(n as i32 + 1);
            let got = mean_factor(&s, 0.8, n);
            assert!((got - want).abs() <= 1e-13 * want.abs(), "{n}");
        }
        // negative factor alternates sign
        let s = StepSchedule::fixed(1.5).unwrap();
        assert!(mean_factor(&s, 1.0, 0) < 0.0);
        assert!(mean_factor(&s, 1.0, 1) > 0.0);
    }

    #[test]
    fn long_products_do_not_underflow_silently() {
        let s = StepSchedule::harmonic(0.5, 20.0).unwrap();
        let n = 1_000_000;
        let got = mean_factor(&s, 1.0, n);
        // direct product in extended care: sum of ln_1p in pairwise order
        let mut logs: Vec<f64> = (0..=n).map(|k| (-0.5 / (20.0 + k as f64)).ln_1p()).collect();
        while logs.len() > 1 {
            logs = logs.chunks(2).map(|c| c.iter().sum()).collect();
        }
        let want = logs[0].exp();
        assert!((got - want).abs() <= 1e-10 * want);
    }

    #[test]
    fn curve_matches_pointwise() {
        let s = StepSchedule::polynomial(0.2, 5.0, 0.8).unwrap();
        let iters = [0usize, 1, 2, 10, 57, 300];
        let curve = mean_factor_curve(&s, 0.6, &iters);
        assert_eq!(curve[0], 1.0);
        for (r, &k) in iters.iter().enumerate().skip(1) {
            let direct = mean_factor(&s, 0.6, k - 1);
            assert!((curve[r] - direct).abs() <= 1e-13 * direct.abs());
        }
    }

    #[test]
    fn expected_component_zero_and_fixed() {
        let p = problem(Consistency::Consistent);
        let s = StepSchedule::fixed(0.1).unwrap();
        assert_eq!(expected_component(&p, &s, 2, p.x_star(), 50).unwrap(), 0.0);
        let x0 = initial_point(&p, 1.0, 3);
        let c0 = component(&p, &x0, 2).unwrap();
        let s2 = p.sigma_sq(2).unwrap();
        let want = (1.0 - 0.1 * s2).powi(11) * c0;
        let got = expected_component(&p, &s, 2, &x0, 10).unwrap();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn harmonic_mean_bound_values() {
        assert_eq!(mean_bound_harmonic(0.5, 20.0, 1.0, -2.0, 0), 2.0);
        let v = mean_bound_harmonic(0.5, 20.0, 1.0, 1.0, 180);
        assert!((v - 0.1f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn polynomial_mean_bound_at_zero() {
        assert!((mean_bound_polynomial(0.2, 5.0, 0.8, 1.0, -0.7, 0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn polynomial_bound_tracks_harmonic_near_gamma_one() {
        for n in [1usize, 10, 100, 1000] {
            let h = mean_bound_harmonic(0.5, 20.0, 0.8, 1.0, n);
            let p = mean_bound_polynomial(0.5, 20.0, 0.999, 0.8, 1.0, n);
            assert!((p - h).abs() <= 0.05 * h, "n={n} h={h} p={p}");
        }
    }

    #[test]
    fn fixed_bound_hypothesis_and_values() {
        let p = problem(Consistency::Consistent);
        let c = compute_constants(&p);
        let alpha = 0.01;
        let z = second_moment_bound_fixed(&p, &c, alpha, p.x_star(), 5).unwrap();
        assert_eq!(z.bound, 0.0);
        let x0 = initial_point(&p, 2.0, 1);
        let f = CoefficientFunctions::new(&c);
        let base = 1.0 - 2.0 * alpha * c.sigma_min_sq + alpha * alpha * f.b_scale();
        let one = second_moment_bound_fixed(&p, &c, alpha, &x0, 0).unwrap();
        assert!((one.bound - base * 4.0).abs() < 1e-12);
        assert_eq!(one.base, base);

        let q = problem(Consistency::Inconsistent { noise_level: 0.2 });
        let cq = compute_constants(&q);
        assert!(matches!(
            second_moment_bound_fixed(&q, &cq, alpha, &x0, 3),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn afun_below_pfun_and_consistent_c_q_vanish() {
        let p = problem(Consistency::Consistent);
        let c = compute_constants(&p);
        let f = CoefficientFunctions::new(&c);
        for &alpha in &[1e-4, 1e-2, 0.1, 0.5, 2.0] {
            for l in 1..=5 {
                assert!(f.a(alpha, p.sigma_sq(l).unwrap()) <= f.p(alpha));
            }
            assert_eq!(f.c(alpha), 0.0);
            assert!(f.q(alpha) <= 1e-18 * p.b().norm_squared());
        }
    }

    #[test]
    fn kaczmarz_prediction_basics() {
        let p = problem(Consistency::Consistent);
        let x0 = initial_point(&p, 1.0, 5);
        let c0 = component(&p, &x0, 3).unwrap();
        assert_eq!(kaczmarz_expected_component(&p, 3, &x0, 0).unwrap(), c0);
        let q = problem(Consistency::Inconsistent { noise_level: 0.1 });
        assert!(kaczmarz_expected_component(&q, 1, &x0, 3).is_err());

        let one = nalgebra::DMatrix::from_element(1, 1, 1.0);
        let scalar = SyntheticProblem::consistent(
            one.clone(),
            DVector::from_element(1, 2.0),
            one,
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let x = DVector::from_element(1, 4.0);
        assert_eq!(kaczmarz_expected_component(&scalar, 1, &x, 1).unwrap(), 0.0);
    }
}
