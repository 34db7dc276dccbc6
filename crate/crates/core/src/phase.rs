//! Log-log slope comparison between an early and a late window.

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseReport {
    pub slope_early: f64,
    pub slope_late: f64,
    pub margin: f64,
    /// `slope_late > slope_early + margin`: the late window decays more slowly.
    pub transition_detected: bool,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::PhaseFit(format!(
            "need at least 2 points in a window, got {}",
            points.len()
        )));
    }
    let mut lx = Vec::with_capacity(points.len());
    let mut ly = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if !(x.is_finite() && y.is_finite() && x > 0.0 && y > 0.0) {
            return Err(Error::PhaseFit(format!(
                "log-log fit needs positive finite values, got ({x}, {y})"
            )));
        }
        lx.push(x.ln());
        ly.push(y.ln());
    }
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in lx.iter().zip(&ly) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        return Err(Error::PhaseFit("window has a single distinct iteration".into()));
    }
    Ok(sxy / sxx)
}

/// Compare slopes over the inclusive iteration windows `early` and `late`.
/// `series` is `(iteration, value)` pairs.
pub fn detect_phase_transition(
    series: &[(f64, f64)],
    early: (f64, f64),
    late: (f64, f64),
    margin: f64,
) -> Result<PhaseReport> {
    if !(early.0 < early.1 && late.0 < late.1) {
        return Err(Error::PhaseFit("each window needs start < end".into()));
    }
    if early.1 > late.0 {
        return Err(Error::PhaseFit(format!(
            "windows must be disjoint and ordered, got {early:?} and {late:?}"
        )));
    }
    let pick = |w: (f64, f64)| -> Vec<(f64, f64)> {
        series
            .iter()
            .copied()
            .filter(|&(k, _)| k >= w.0 && k <= w.1)
            .collect()
    };
    let slope_early = loglog_slope(&pick(early))?;
    let slope_late = loglog_slope(&pick(late))?;
    Ok(PhaseReport {
        slope_early,
        slope_late,
        margin,
        transition_detected: slope_late > slope_early + margin,
    })
}
