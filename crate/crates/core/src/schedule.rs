use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemConstants;

/// Step-size family. Iterations are indexed from 0: `step_at(k)` is the step
/// that produces `x_{k+1}` from `x_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StepSchedule {
    Fixed { alpha: f64 },
    /// `a / (b + k)`
    Harmonic { a: f64, b: f64 },
    /// `a / (b + k)^gamma` with `1/2 < gamma < 1`
    Polynomial { a: f64, b: f64, gamma: f64 },
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSchedule(format!("{name} must be positive, got {x}")))
    }
}

impl StepSchedule {
    pub fn fixed(alpha: f64) -> Result<Self> {
        let s = StepSchedule::Fixed { alpha };
        s.check()?;
        Ok(s)
    }

    pub fn harmonic(a: f64, b: f64) -> Result<Self> {
        let s = StepSchedule::Harmonic { a, b };
        s.check()?;
        Ok(s)
    }

    pub fn polynomial(a: f64, b: f64, gamma: f64) -> Result<Self> {
        let s = StepSchedule::Polynomial { a, b, gamma };
        s.check()?;
        Ok(s)
    }

    /// Parameter constraints; endpoints `gamma = 1/2` and `gamma = 1` are rejected.
    pub fn check(&self) -> Result<()> {
        match *self {
            StepSchedule::Fixed { alpha } => positive("alpha", alpha),
            StepSchedule::Harmonic { a, b } => {
                positive("a", a)?;
                positive("b", b)
            }
            StepSchedule::Polynomial { a, b, gamma } => {
                positive("a", a)?;
                positive("b", b)?;
                if gamma > 0.5 && gamma < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidSchedule(format!(
                        "gamma must lie in the open interval (1/2, 1), got {gamma}"
                    )))
                }
            }
        }
    }

    #[inline]
    pub fn step_at(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Fixed { alpha } => alpha,
            StepSchedule::Harmonic { a, b } => a / (b + k as f64),
            StepSchedule::Polynomial { a, b, gamma } => a / (b + k as f64).powf(gamma),
        }
    }

    pub fn is_decaying(&self) -> bool {
        !matches!(self, StepSchedule::Fixed { .. })
    }

    pub fn family(&self) -> &'static str {
        match self {
            StepSchedule::Fixed { .. } => "fixed",
            StepSchedule::Harmonic { .. } => "harmonic",
            StepSchedule::Polynomial { .. } => "polynomial",
        }
    }

    /// Compact human-readable form, used in CSV headers.
    pub fn describe(&self) -> String {
        match *self {
            StepSchedule::Fixed { alpha } => format!("fixed(alpha={alpha})"),
            StepSchedule::Harmonic { a, b } => format!("harmonic(a={a}, b={b})"),
            StepSchedule::Polynomial { a, b, gamma } => {
                format!("polynomial(a={a}, b={b}, gamma={gamma})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// Some `alpha_k` exceeds `1/(2 M L~)`; the second-moment recursion may not hold there.
    StepAboveMomentLimit {
        first_k: usize,
        last_k: usize,
        count: usize,
        limit: f64,
    },
    /// Fixed step outside `(0, 2/(M L~ c(A)^2))`; the fixed-step closed form is not contractive.
    FixedOutsideWindow { alpha: f64, upper: f64 },
    /// `|1 - alpha_0 sigma_max^2| >= 1`; the mean recursion is not contractive.
    MeanNonContractive { factor: f64 },
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diagnostic::StepAboveMomentLimit {
                first_k,
                last_k,
                count,
                limit,
            } => write!(
                f,
                "step exceeds 1/(2 M L~) = {limit:.6e} at {count} iteration(s) k = {first_k}..={last_k}"
            ),
            Diagnostic::FixedOutsideWindow { alpha, upper } => write!(
                f,
                "fixed step {alpha:.6e} outside the contraction window (0, {upper:.6e})"
            ),
            Diagnostic::MeanNonContractive { factor } => write!(
                f,
                "|1 - alpha_0 sigma_max^2| = {factor:.6e} >= 1: mean recursion not contractive"
            ),
        }
    }
}

/// Check the schedule against the validity windows of the bounds for the
/// first `iters` steps (`k = 0..iters`). Diagnostics are warnings; runs proceed.
pub fn validate(s: &StepSchedule, c: &ProblemConstants, iters: usize) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let ml = c.rows as f64 * c.l_tilde;
    let limit = 1.0 / (2.0 * ml);

    // steps are nonincreasing, so the violating k form a prefix for decaying schedules
    let violating: Vec<usize> = match s {
        StepSchedule::Fixed { alpha } => {
            if *alpha > limit {
                (0..iters.max(1)).collect()
            } else {
                Vec::new()
            }
        }
        _ => {
            let mut k = 0;
            let mut v = Vec::new();
            while k < iters.max(1) && s.step_at(k) > limit {
                v.push(k);
                k += 1;
            }
            v
        }
    };
    if let (Some(&first_k), Some(&last_k)) = (violating.first(), violating.last()) {
        out.push(Diagnostic::StepAboveMomentLimit {
            first_k,
            last_k,
            count: violating.len(),
            limit,
        });
    }

    if let StepSchedule::Fixed { alpha } = *s {
        let upper = 2.0 / (ml * c.c_a * c.c_a);
        if !(alpha > 0.0 && alpha < upper) {
            out.push(Diagnostic::FixedOutsideWindow { alpha, upper });
        }
    }

    let factor = (1.0 - s.step_at(0) * c.sigma_max_sq).abs();
    if factor >= 1.0 {
        out.push(Diagnostic::MeanNonContractive { factor });
    }
    out
}
