use nalgebra::DVector;
use serde::Serialize;

use super::CoefficientFunctions;
use crate::error::Result;
use crate::problem::{component, ProblemConstants, SyntheticProblem};
use crate::schedule::StepSchedule;

/// `A_0, B_0, C_0` of the backward recursion for horizon `n`.
/// `E[<x_{n+1} - x_*, v_l>^2] <= A_0 c_0^2 + B_0 ||x_0 - x_*||^2 + C_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCoefficients {
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
    /// Some `1 - 2 alpha_k sigma_l^2` was negative; the signed value was kept
    /// and the bound is outside the regime it was derived for.
    pub negative_a: bool,
}

impl MomentCoefficients {
    pub fn bound(&self, comp_sq: f64, norm_sq: f64) -> f64 {
        self.a0 * comp_sq + self.b0 * norm_sq + self.c0
    }
}

/// All `A_k, B_k, C_k` for `k = 0..=n+1`; index `k` holds the coefficient
/// of the recursion started at step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPath {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub negative_a: bool,
}

/// Backward recursion from `A_{n+1} = 1, B_{n+1} = C_{n+1} = 0`.
pub fn moment_coefficients(
    f: &CoefficientFunctions,
    schedule: &StepSchedule,
    sigma_l_sq: f64,
    n: usize,
) -> MomentCoefficients {
    let (mut a, mut b, mut c) = (1.0f64, 0.0f64, 0.0f64);
    let mut negative_a = false;
    for k in (0..=n).rev() {
        let alpha = schedule.step_at(k);
        let af = f.a(alpha, sigma_l_sq);
        negative_a |= af < 0.0;
        // C and B read the old A_{k+1}, B_{k+1}
        c += a * f.c(alpha) + b * f.q(alpha);
        b = a * f.b(alpha) + b * f.p(alpha);
        a *= af;
    }
    MomentCoefficients {
        a0: a,
        b0: b,
        c0: c,
        negative_a,
    }
}

pub fn moment_path(
    f: &CoefficientFunctions,
    schedule: &StepSchedule,
    sigma_l_sq: f64,
    n: usize,
) -> MomentPath {
    let mut a = vec![0.0; n + 2];
    let mut b = vec![0.0; n + 2];
    let mut c = vec![0.0; n + 2];
    a[n + 1] = 1.0;
    let mut negative_a = false;
    for k in (0..=n).rev() {
        let alpha = schedule.step_at(k);
        let af = f.a(alpha, sigma_l_sq);
        negative_a |= af < 0.0;
        a[k] = a[k + 1] * af;
        b[k] = a[k + 1] * f.b(alpha) + b[k + 1] * f.p(alpha);
        c[k] = a[k + 1] * f.c(alpha) + b[k + 1] * f.q(alpha) + c[k + 1];
    }
    MomentPath { a, b, c, negative_a }
}

/// Second-moment bound on the `l`-th component after `n + 1` steps from `x0`.
pub fn second_moment_recursion(
    p: &SyntheticProblem,
    consts: &ProblemConstants,
    schedule: &StepSchedule,
    l: usize,
    x0: &DVector<f64>,
    n: usize,
) -> Result<(MomentCoefficients, f64)> {
    let c0 = component(p, x0, l)?;
    let e0 = (x0 - p.x_star()).norm_squared();
    let f = CoefficientFunctions::new(consts);
    let m = moment_coefficients(&f, schedule, p.sigma_sq(l)?, n);
    let bound = m.bound(c0 * c0, e0);
    Ok((m, bound))
}
