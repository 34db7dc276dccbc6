//! Closed-form upper bounds on the recursion coefficients for decaying steps.

use serde::Serialize;

use super::CoefficientFunctions;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decay {
    /// `~ n^{-exponent}`
    Power { exponent: f64 },
    /// `~ exp(-rate n^power)`
    RootExponential { rate: f64, power: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBound {
    pub value: f64,
    pub decay: Decay,
}

impl RateBound {
    fn power(value: f64, exponent: f64) -> Self {
        RateBound {
            value,
            decay: Decay::Power { exponent },
        }
    }
}

/// Bounds for `alpha_k = a/(b+k)`. `C_0` is bounded by
/// `q_b_sum + a_c_sum + c_last`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarmonicRates {
    pub a0: RateBound,
    pub b0: RateBound,
    /// `sum_{i=1}^n q(alpha_{i-1}) B_i`
    pub q_b_sum: RateBound,
    /// `sum_{i=1}^n A_i C(alpha_{i-1})`
    pub a_c_sum: RateBound,
    /// `C(alpha_n)`, evaluated exactly.
    pub c_last: RateBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolynomialRates {
    pub a0: RateBound,
    pub b0: RateBound,
    pub q_b_sum: RateBound,
    pub a_c_sum: RateBound,
    pub c_last: RateBound,
}

macro_rules! totals {
    ($t:ty) => {
        impl $t {
            pub fn c0(&self) -> f64 {
                self.q_b_sum.value + self.a_c_sum.value + self.c_last.value
            }

            /// Closed-form bound on `E[<x_{n+1} - x_*, v_l>^2]`.
            pub fn total(&self, comp_sq: f64, norm_sq: f64) -> f64 {
                self.a0.value * comp_sq + self.b0.value * norm_sq + self.c0()
            }
        }
    };
}
totals!(HarmonicRates);
totals!(PolynomialRates);

fn check_b(b: f64) -> Result<()> {
    if b > 1.0 {
        Ok(())
    } else {
        Err(Error::UnsupportedRegime(format!(
            "closed forms need b > 1, got {b}"
        )))
    }
}

pub fn rate_bounds_harmonic(
    f: &CoefficientFunctions,
    a: f64,
    b: f64,
    sigma_l_sq: f64,
    n: usize,
) -> Result<HarmonicRates> {
    check_b(b)?;
    let s = a * f.sigma_min_sq;
    let u = a * sigma_l_sq;
    if s == 2.0 {
        return Err(Error::UnsupportedRegime(
            "a sigma_min^2 = 2 is the threshold between the two q*B regimes".into(),
        ));
    }
    if u == 0.5 {
        return Err(Error::UnsupportedRegime(
            "a sigma_l^2 = 1/2 is the threshold between the two A*C regimes".into(),
        ));
    }
    let nf = n as f64;
    let k = f.b_scale();
    let ml_f = f.m_l_tilde * f.f_star;

    let a0 = RateBound::power((b / (b + nf)).powf(2.0 * u), 2.0 * u);
    let b0 = RateBound::power(
        a * a * k / (b - 1.0) * ((b + 1.0) / (b + nf + 1.0)).powf(s),
        s,
    );

    let qb_pre = 2.0 * a.powi(4) * k * f.sigma_noise_sq * ((b + 1.0) / (b - 1.0)).powi(3);
    let q_b_sum = if s < 2.0 {
        RateBound::power(
            qb_pre / (2.0 - s) * (b + 1.0).powf(s - 2.0) / (b + nf + 1.0).powf(s),
            s,
        )
    } else {
        RateBound::power(qb_pre / (s - 2.0) / (b + nf + 1.0).powi(2), 2.0)
    };

    let ac_pre = 2.0 * a * a * ml_f * (b / (b - 1.0)).powi(2);
    let a_c_sum = if u < 0.5 {
        RateBound::power(
            ac_pre * b.powf(2.0 * u - 1.0) / (1.0 - 2.0 * u) / (b + nf).powf(2.0 * u),
            2.0 * u,
        )
    } else {
        RateBound::power(ac_pre / (2.0 * u - 1.0) / (b + nf), 1.0)
    };

    let alpha_n = a / (b + nf);
    Ok(HarmonicRates {
        a0,
        b0,
        q_b_sum,
        a_c_sum,
        c_last: RateBound::power(f.c(alpha_n), 2.0),
    })
}

pub fn rate_bounds_polynomial(
    f: &CoefficientFunctions,
    a: f64,
    b: f64,
    gamma: f64,
    sigma_l_sq: f64,
    n: usize,
) -> Result<PolynomialRates> {
    check_b(b)?;
    if !(gamma > 0.5 && gamma < 1.0) {
        return Err(Error::UnsupportedRegime(format!(
            "gamma must lie in the open interval (1/2, 1), got {gamma}"
        )));
    }
    let nf = n as f64;
    let e = 1.0 - gamma;
    let k = f.b_scale();
    let c = a * f.sigma_min_sq / e;
    let c1 = 2.0 * a * sigma_l_sq / e;
    let half = 1.0 - 0.5f64.powf(e);
    let g = 2.0 * gamma - 1.0;

    let a0 = RateBound {
        value: (c1 * (b.powf(e) - (b + nf).powf(e))).exp(),
        decay: Decay::RootExponential { rate: c1, power: e },
    };
    let b0 = RateBound {
        value: a * a * k / g
            * (c * ((b + 1.0).powf(e) - (b + nf + 1.0).powf(e))).exp()
            * (b - 1.0).powf(1.0 - 2.0 * gamma),
        decay: Decay::RootExponential { rate: c, power: e },
    };

    // q(alpha) = 2 alpha^2 sigma^2 carries a factor 2 that cancels the 1/2
    // from the geometric-sum step, so the constant has no trailing 1/2.
    let h = (-c * half * (b + nf + 1.0).powf(e)).exp() * (b + 1.0).powf(2.0 - 4.0 * gamma)
        + ((b + nf + 1.0) / 2.0).powf(2.0 - 4.0 * gamma);
    let q_b_sum = RateBound::power(
        a.powi(4) * k * f.sigma_noise_sq / (g * g)
            * ((b - 1.0) / (b + 1.0)).powf(1.0 - 4.0 * gamma)
            * h,
        4.0 * gamma - 2.0,
    );

    let h2 = (-c1 * half * nf.powf(e)).exp() * b.powf(1.0 - 2.0 * gamma)
        + ((b + nf) / 2.0).powf(1.0 - 2.0 * gamma);
    let a_c_sum = RateBound::power(
        2.0 * a * a * f.m_l_tilde * f.f_star / g * ((b - 1.0) / b).powf(-2.0 * gamma) * h2,
        g,
    );

    let alpha_n = a / (b + nf).powf(gamma);
    Ok(PolynomialRates {
        a0,
        b0,
        q_b_sum,
        a_c_sum,
        c_last: RateBound::power(f.c(alpha_n), 2.0 * gamma),
    })
}
