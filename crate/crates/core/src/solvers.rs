//! GD, uniform-sampling SGD and randomized Kaczmarz with eigencomponent probes.
//!
//! Row indices are 0-based; eigencomponent indices `l` are 1-based, matching
//! the `v_1, ..., v_N` ordering by descending singular value.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DivergedRun, Error, Result};
use crate::problem::{dot, SyntheticProblem};
use crate::rng::{mix_seed, stream, RowSampler};
use crate::schedule::StepSchedule;

/// Abort threshold on `||x_k - x_*||^2` relative to its initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gd,
    Sgd,
    Kaczmarz,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Sgd => "sgd",
            Method::Kaczmarz => "kaczmarz",
        }
    }

    pub fn needs_schedule(&self) -> bool {
        !matches!(self, Method::Kaczmarz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Recording {
    All,
    Geometric { points_per_decade: usize },
}

impl Default for Recording {
    fn default() -> Self {
        Recording::Geometric {
            points_per_decade: 64,
        }
    }
}

/// Ascending iteration indices to record; always contains 0 and `iters`.
pub fn recorded_iterations(iters: usize, recording: &Recording) -> Vec<usize> {
    let mut out = match *recording {
        Recording::All => (0..=iters).collect::<Vec<_>>(),
        Recording::Geometric { points_per_decade } => {
            let ppd = points_per_decade.max(1);
            let mut v = vec![0];
            let mut decade = 1usize;
            'outer: loop {
                for j in 0..ppd {
                    let k = (decade as f64 * 10f64.powf(j as f64 / ppd as f64)).round() as usize;
                    if k > iters {
                        break 'outer;
                    }
                    v.push(k);
                }
                match decade.checked_mul(10) {
                    Some(d) => decade = d,
                    None => break,
                }
            }
            v.push(iters);
            v
        }
    };
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMeta {
    pub method: Method,
    pub schedule: Option<StepSchedule>,
    pub seed: u64,
    pub problem_digest: String,
}

/// Recorded trajectory. `components[j][r]` is `<x_k - x_*, v_l>` for
/// `l = probes[j]` and `k = iters[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub probes: Vec<usize>,
    pub iters: Vec<usize>,
    pub components: Vec<Vec<f64>>,
    pub norm_sq: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepetitionPlan {
    pub repetitions: usize,
    pub base_seed: u64,
}

impl RepetitionPlan {
    pub fn seed_for(&self, repetition: usize) -> u64 {
        mix_seed(self.base_seed, repetition as u64)
    }
}

/// `x_star + radius * w` with `w` uniform on the unit sphere.
pub fn initial_point(p: &SyntheticProblem, radius: f64, seed: u64) -> DVector<f64> {
    let mut rng = stream(seed);
    let mut w = DVector::from_fn(p.cols(), |_, _| StandardNormal.sample(&mut rng));
    let n = w.norm();
    if n > 0.0 {
        w /= n;
    }
    p.x_star() + w * radius
}

fn check_dim(p: &SyntheticProblem, x: &DVector<f64>) -> Result<()> {
    if x.len() != p.cols() {
        return Err(Error::Dimension(format!(
            "iterate has length {}, expected {}",
            x.len(),
            p.cols()
        )));
    }
    Ok(())
}

fn check_row(p: &SyntheticProblem, i: usize) -> Result<()> {
    if i >= p.rows() {
        return Err(Error::RowOutOfRange {
            row: i,
            rows: p.rows(),
        });
    }
    Ok(())
}

#[inline]
fn axpy(x: &mut [f64], c: f64, a: &[f64]) {
    for (xi, ai) in x.iter_mut().zip(a) {
        *xi += c * ai;
    }
}

fn gd_in_place(p: &SyntheticProblem, x: &mut [f64], alpha: f64, grad: &mut [f64]) {
    grad.iter_mut().for_each(|g| *g = 0.0);
    for i in 0..p.rows() {
        let row = p.row(i);
        let r = dot(row, x) - p.b()[i];
        axpy(grad, r, row);
    }
    axpy(x, -alpha, grad);
}

#[inline]
fn sgd_in_place(p: &SyntheticProblem, x: &mut [f64], alpha: f64, i: usize) {
    let row = p.row(i);
    let r = p.b()[i] - dot(row, x);
    axpy(x, alpha * p.rows() as f64 * r, row);
}

#[inline]
fn kaczmarz_in_place(p: &SyntheticProblem, x: &mut [f64], i: usize, row_norm_sq: f64) {
    let row = p.row(i);
    let r = p.b()[i] - dot(row, x);
    axpy(x, r / row_norm_sq, row);
}

/// `x - alpha (A^T A x - A^T b)`.
pub fn gd_step(p: &SyntheticProblem, x: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
    check_dim(p, x)?;
    let mut out = x.clone();
    let mut grad = vec![0.0; p.cols()];
    gd_in_place(p, out.as_mut_slice(), alpha, &mut grad);
    Ok(out)
}

/// `x + alpha M (b_i - <a_i, x>) a_i` for 0-based row `i`.
pub fn sgd_step(
    p: &SyntheticProblem,
    x: &DVector<f64>,
    alpha: f64,
    i: usize,
) -> Result<DVector<f64>> {
    check_dim(p, x)?;
    check_row(p, i)?;
    let mut out = x.clone();
    sgd_in_place(p, out.as_mut_slice(), alpha, i);
    Ok(out)
}

/// Projection of `x` onto the hyperplane `<a_i, x> = b_i`.
pub fn kaczmarz_step(p: &SyntheticProblem, x: &DVector<f64>, i: usize) -> Result<DVector<f64>> {
    check_dim(p, x)?;
    check_row(p, i)?;
    let row = p.row(i);
    let nsq = dot(row, row);
    if nsq == 0.0 {
        return Err(Error::ZeroRow(i));
    }
    let mut out = x.clone();
    kaczmarz_in_place(p, out.as_mut_slice(), i, nsq);
    Ok(out)
}

/// Run one trajectory from `x0` for `iters` steps.
///
/// Row draws come from a single stream keyed by `seed`, one draw per
/// iteration, so the sampled rows do not depend on the recording policy.
#[allow(clippy::too_many_arguments)]
pub fn run_trajectory(
    p: &SyntheticProblem,
    method: Method,
    schedule: Option<&StepSchedule>,
    x0: &DVector<f64>,
    iters: usize,
    seed: u64,
    probes: &[usize],
    recording: &Recording,
) -> Result<Trace> {
    check_dim(p, x0)?;
    if iters == 0 {
        return Err(Error::Dimension("iters must be at least 1".into()));
    }
    for &l in probes {
        p.check_index(l)?;
    }
    let schedule = match (method.needs_schedule(), schedule) {
        (true, None) => return Err(Error::MissingSchedule(method.name())),
        (true, Some(s)) => {
            s.check()?;
            Some(*s)
        }
        (false, _) => None,
    };

    let n = p.cols();
    let m = p.rows();
    let row_norms: Vec<f64> = (0..m).map(|i| dot(p.row(i), p.row(i))).collect();
    if method == Method::Kaczmarz {
        if let Some(i) = row_norms.iter().position(|&r| r == 0.0) {
            return Err(Error::ZeroRow(i));
        }
    }
    let sampler = match method {
        Method::Kaczmarz => RowSampler::weighted(&row_norms),
        _ => RowSampler::uniform(m),
    };
    let mut rng = stream(seed);

    let record_at = recorded_iterations(iters, recording);
    let probe_vecs: Vec<&[f64]> = probes
        .iter()
        .map(|&l| p.right_singular(l))
        .collect::<Result<_>>()?;
    let xs = p.x_star().as_slice();

    let mut x = x0.as_slice().to_vec();
    let mut diff = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut components: Vec<Vec<f64>> = vec![Vec::with_capacity(record_at.len()); probes.len()];
    let mut norm_sq = Vec::with_capacity(record_at.len());

    let mut record = |x: &[f64], diff: &mut [f64], ns: f64| {
        for (d, (xi, si)) in diff.iter_mut().zip(x.iter().zip(xs)) {
            *d = xi - si;
        }
        for (j, v) in probe_vecs.iter().enumerate() {
            components[j].push(dot(diff, v));
        }
        norm_sq.push(ns);
    };

    let initial = sq_dist(&x, xs);
    record(&x, &mut diff, initial);
    let mut next = 1;

    for k in 0..iters {
        match method {
            Method::Gd => {
                let alpha = schedule.as_ref().map(|s| s.step_at(k)).unwrap_or_default();
                gd_in_place(p, &mut x, alpha, &mut grad);
            }
            Method::Sgd => {
                let alpha = schedule.as_ref().map(|s| s.step_at(k)).unwrap_or_default();
                let i = sampler.draw(&mut rng);
                sgd_in_place(p, &mut x, alpha, i);
            }
            Method::Kaczmarz => {
                let i = sampler.draw(&mut rng);
                kaczmarz_in_place(p, &mut x, i, row_norms[i]);
            }
        }
        let ns = sq_dist(&x, xs);
        if !ns.is_finite() || (initial > 0.0 && ns > DIVERGENCE_FACTOR * initial) {
            return Err(Error::Diverged { iteration: k + 1 });
        }
        if next < record_at.len() && record_at[next] == k + 1 {
            record(&x, &mut diff, ns);
            next += 1;
        }
    }

    Ok(Trace {
        meta: TraceMeta {
            method,
            schedule,
            seed,
            problem_digest: p.digest(),
        },
        probes: probes.to_vec(),
        iters: record_at,
        components,
        norm_sq,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Per-iteration means and standard errors across repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub meta: TraceMeta,
    pub repetitions: usize,
    pub seeds: Vec<u64>,
    pub probes: Vec<usize>,
    pub iters: Vec<usize>,
    pub mean_comp: Vec<Vec<f64>>,
    pub mean_comp_sq: Vec<Vec<f64>>,
    pub mean_norm_sq: Vec<f64>,
    pub stderr_comp: Vec<Vec<f64>>,
    pub stderr_comp_sq: Vec<Vec<f64>>,
    pub stderr_norm_sq: Vec<f64>,
}

impl EnsembleSummary {
    /// Position of iteration `k` among the recorded iterations.
    pub fn index_of(&self, k: usize) -> Option<usize> {
        self.iters.binary_search(&k).ok()
    }

    pub fn probe_index(&self, l: usize) -> Option<usize> {
        self.probes.iter().position(|&p| p == l)
    }
}

/// Mean and standard error of the mean (sample variance, `n - 1`).
fn mean_stderr(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    // shift by the first value so identical samples give exactly zero spread
    let Some(shift) = values.clone().next() else {
        return (f64::NAN, 0.0);
    };
    let md = values.clone().map(|v| v - shift).sum::<f64>() / n as f64;
    if n < 2 {
        return (shift + md, 0.0);
    }
    let var = values.map(|v| (v - shift - md).powi(2)).sum::<f64>() / (n - 1) as f64;
    (shift + md, (var / n as f64).sqrt())
}

/// Run `plan.repetitions` independent trajectories from the same `x0` and
/// aggregate them in repetition order.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble(
    p: &SyntheticProblem,
    method: Method,
    schedule: Option<&StepSchedule>,
    x0: &DVector<f64>,
    iters: usize,
    plan: &RepetitionPlan,
    probes: &[usize],
    recording: &Recording,
) -> Result<EnsembleSummary> {
    if plan.repetitions == 0 {
        return Err(Error::Dimension("repetitions must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..plan.repetitions).map(|r| plan.seed_for(r)).collect();
    let results: Vec<Result<Trace>> = seeds
        .par_iter()
        .map(|&s| run_trajectory(p, method, schedule, x0, iters, s, probes, recording))
        .collect();

    let mut traces = Vec::with_capacity(results.len());
    let mut diverged = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(t) => traces.push(t),
            Err(Error::Diverged { iteration }) => diverged.push(DivergedRun {
                repetition: r,
                seed: seeds[r],
                iteration,
            }),
            Err(e) => return Err(e),
        }
    }
    if !diverged.is_empty() {
        return Err(Error::EnsembleDiverged {
            runs: diverged,
            total: plan.repetitions,
        });
    }

    let reps = traces.len();
    let first = &traces[0];
    let n_rec = first.iters.len();
    let n_probe = probes.len();
    let mut mean_comp = vec![vec![0.0; n_rec]; n_probe];
    let mut mean_comp_sq = vec![vec![0.0; n_rec]; n_probe];
    let mut stderr_comp = vec![vec![0.0; n_rec]; n_probe];
    let mut stderr_comp_sq = vec![vec![0.0; n_rec]; n_probe];
    let mut mean_norm_sq = vec![0.0; n_rec];
    let mut stderr_norm_sq = vec![0.0; n_rec];

    for r in 0..n_rec {
        for j in 0..n_probe {
            let vals = traces.iter().map(|t| t.components[j][r]);
            (mean_comp[j][r], stderr_comp[j][r]) = mean_stderr(vals.clone(), reps);
            (mean_comp_sq[j][r], stderr_comp_sq[j][r]) = mean_stderr(vals.map(|c| c * c), reps);
        }
        (mean_norm_sq[r], stderr_norm_sq[r]) =
            mean_stderr(traces.iter().map(|t| t.norm_sq[r]), reps);
    }

    let mut meta = first.meta.clone();
    meta.seed = plan.base_seed;
    Ok(EnsembleSummary {
        meta,
        repetitions: reps,
        seeds,
        probes: probes.to_vec(),
        iters: first.iters.clone(),
        mean_comp,
        mean_comp_sq,
        mean_norm_sq,
        stderr_comp,
        stderr_comp_sq,
        stderr_norm_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_problem, component, Consistency, Spacing, SpectrumSpec};

    fn problem(m: usize, n: usize, consistency: Consistency) -> SyntheticProblem {
        let spec = SpectrumSpec {
            rows: m,
            cols: n,
            sigma_min: 0.2,
            sigma_max: 1.0,
            spacing: Spacing::Linear,
            seed: 17,
        };
        build_problem(&spec, consistency, 3).unwrap()
    }

    #[test]
    fn recording_contains_endpoints_and_decades() {
        let r = recorded_iterations(10_000, &Recording::default());
        assert_eq!(r[0], 0);
        assert_eq!(*r.last().unwrap(), 10_000);
        for k in [1, 10, 100, 1000] {
            assert!(r.contains(&k), "{k}");
        }
        assert!(r.windows(2).all(|w| w[0] < w[1]));
        let all = recorded_iterations(5, &Recording::All);
        assert_eq!(all, vec![0, 1, 2, 3, 4, 5]);
        let odd = recorded_iterations(37, &Recording::Geometric { points_per_decade: 4 });
        assert_eq!(*odd.last().unwrap(), 37);
    }

    #[test]
    fn gd_fixed_point_and_decoupling() {
        let p = problem(9, 4, Consistency::Inconsistent { noise_level: 0.2 });
        let out = gd_step(&p, p.x_star(), 0.3).unwrap();
        assert!((out - p.x_star()).norm() < 1e-13);

        let x = initial_point(&p, 1.0, 5);
        let alpha = 0.7;
        let y = gd_step(&p, &x, alpha).unwrap();
        for l in 1..=4 {
            let s2 = p.sigma_sq(l).unwrap();
            let before = component(&p, &x, l).unwrap();
            let after = component(&p, &y, l).unwrap();
            assert!((after - (1.0 - alpha * s2) * before).abs() < 1e-12);
        }
    }

    #[test]
    fn gd_with_inverse_top_curvature_kills_first_component() {
        let p = problem(6, 3, Consistency::Consistent);
        let v1 = DVector::from_column_slice(p.right_singular(1).unwrap());
        let x = p.x_star() + v1;
        let alpha = 1.0 / p.sigma_sq(1).unwrap();
        let y = gd_step(&p, &x, alpha).unwrap();
        assert!(component(&p, &y, 1).unwrap().abs() < 1e-14);
    }

    #[test]
    fn sgd_average_is_gd() {
        let p = problem(7, 3, Consistency::Inconsistent { noise_level: 0.4 });
        let x = initial_point(&p, 2.0, 8);
        let alpha = 0.05;
        let mut avg = DVector::zeros(3);
        for i in 0..7 {
            avg += sgd_step(&p, &x, alpha, i).unwrap();
        }
        avg /= 7.0;
        let gd = gd_step(&p, &x, alpha).unwrap();
        assert!((avg - gd).amax() < 1e-12);
    }

    #[test]
    fn sgd_single_row_is_gd() {
        let u = nalgebra::DMatrix::from_element(1, 1, 1.0);
        let p = SyntheticProblem::consistent(
            u.clone(),
            DVector::from_element(1, 1.5),
            u,
            DVector::from_element(1, 2.0),
        )
        .unwrap();
        for &(x, alpha) in &[(0.0, 0.1), (3.0, 0.4), (-1.0, 1.0)] {
            let x = DVector::from_element(1, x);
            let d = sgd_step(&p, &x, alpha, 0).unwrap() - gd_step(&p, &x, alpha).unwrap();
            assert!(d.amax() < 1e-14);
        }
    }

    #[test]
    fn consistent_fixed_point_for_every_row() {
        let p = problem(8, 5, Consistency::Consistent);
        for i in 0..8 {
            let s = sgd_step(&p, p.x_star(), 0.1, i).unwrap();
            assert_eq!(s.as_slice(), p.x_star().as_slice());
            let k = kaczmarz_step(&p, p.x_star(), i).unwrap();
            assert!((k - p.x_star()).amax() < 1e-15);
        }
        assert!(sgd_step(&p, p.x_star(), 0.1, 8).is_err());
    }

    #[test]
    fn kaczmarz_lands_on_hyperplane() {
        let p = problem(5, 3, Consistency::Inconsistent { noise_level: 1.0 });
        let x = initial_point(&p, 3.0, 1);
        for i in 0..5 {
            let y = kaczmarz_step(&p, &x, i).unwrap();
            let lhs = dot(p.row(i), y.as_slice());
            assert!((lhs - p.b()[i]).abs() <= 1e-12 * p.b()[i].abs().max(1.0));
            let again = kaczmarz_step(&p, &y, i).unwrap();
            assert!((again - &y).amax() < 1e-14);
        }
    }

    #[test]
    fn kaczmarz_scalar_solve() {
        let one = nalgebra::DMatrix::from_element(1, 1, 1.0);
        let p = SyntheticProblem::consistent(
            one.clone(),
            DVector::from_element(1, 2.0),
            one,
            DVector::from_element(1, 3.0),
        )
        .unwrap();
        assert_eq!(p.b()[0], 6.0);
        for x in [-5.0, 0.0, 11.0] {
            let y = kaczmarz_step(&p, &DVector::from_element(1, x), 0).unwrap();
            assert_eq!(y[0], 3.0);
        }
    }

    #[test]
    fn trajectory_requires_schedule() {
        let p = problem(4, 2, Consistency::Consistent);
        let x0 = initial_point(&p, 1.0, 0);
        let r = run_trajectory(&p, Method::Sgd, None, &x0, 5, 0, &[1], &Recording::All);
        assert!(matches!(r, Err(Error::MissingSchedule("sgd"))));
        let r = run_trajectory(&p, Method::Kaczmarz, None, &x0, 5, 0, &[3], &Recording::All);
        assert!(matches!(r, Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn single_sgd_iteration_matches_step() {
        let p = problem(6, 3, Consistency::Inconsistent { noise_level: 0.3 });
        let x0 = initial_point(&p, 1.0, 2);
        let s = StepSchedule::fixed(0.05).unwrap();
        let seed = 99;
        let t = run_trajectory(&p, Method::Sgd, Some(&s), &x0, 1, seed, &[1, 2, 3], &Recording::All)
            .unwrap();
        let i = RowSampler::uniform(6).draw(&mut stream(seed));
        let y = sgd_step(&p, &x0, 0.05, i).unwrap();
        for (j, l) in [1, 2, 3].into_iter().enumerate() {
            assert_eq!(t.components[j][1], component(&p, &y, l).unwrap());
        }
    }

    #[test]
    fn traces_independent_of_recording() {
        let p = problem(10, 4, Consistency::Consistent);
        let x0 = initial_point(&p, 1.0, 2);
        let s = StepSchedule::harmonic(0.5, 5.0).unwrap();
        let all = run_trajectory(&p, Method::Sgd, Some(&s), &x0, 300, 4, &[1, 4], &Recording::All)
            .unwrap();
        let geo = run_trajectory(
            &p,
            Method::Sgd,
            Some(&s),
            &x0,
            300,
            4,
            &[1, 4],
            &Recording::Geometric {
                points_per_decade: 8,
            },
        )
        .unwrap();
        for (r, &k) in geo.iters.iter().enumerate() {
            assert_eq!(geo.norm_sq[r], all.norm_sq[k]);
            assert_eq!(geo.components[1][r], all.components[1][k]);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let p = problem(5, 3, Consistency::Consistent);
        let x0 = initial_point(&p, 1.0, 2);
        let s = StepSchedule::fixed(10.0).unwrap();
        let r = run_trajectory(&p, Method::Gd, Some(&s), &x0, 1000, 0, &[1], &Recording::All);
        match r {
            Err(Error::Diverged { iteration }) => assert!(iteration > 1 && iteration < 1000),
            other => panic!("{other:?}"),
        }
        let plan = RepetitionPlan {
            repetitions: 3,
            base_seed: 1,
        };
        let r = run_ensemble(&p, Method::Sgd, Some(&s), &x0, 1000, &plan, &[1], &Recording::All);
        match r {
            Err(Error::EnsembleDiverged { runs, total }) => {
                assert_eq!(total, 3);
                assert_eq!(runs.len(), 3);
                assert_eq!(runs[1].seed, plan.seed_for(1));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_repetition_ensemble_equals_trace() {
        let p = problem(8, 4, Consistency::Consistent);
        let x0 = initial_point(&p, 1.0, 3);
        let s = StepSchedule::polynomial(0.3, 4.0, 0.7).unwrap();
        let plan = RepetitionPlan {
            repetitions: 1,
            base_seed: 21,
        };
        let rec = Recording::Geometric {
            points_per_decade: 10,
        };
        let e = run_ensemble(&p, Method::Sgd, Some(&s), &x0, 200, &plan, &[2, 3], &rec).unwrap();
        let t =
            run_trajectory(&p, Method::Sgd, Some(&s), &x0, 200, plan.seed_for(0), &[2, 3], &rec)
                .unwrap();
        assert_eq!(e.mean_comp, t.components);
        assert_eq!(e.mean_norm_sq, t.norm_sq);
        assert!(e.stderr_comp.iter().flatten().all(|&s| s == 0.0));
    }

    #[test]
    fn gd_ensemble_has_zero_spread() {
        let p = problem(8, 4, Consistency::Consistent);
        let x0 = initial_point(&p, 1.0, 3);
        let s = StepSchedule::fixed(0.2).unwrap();
        let plan = RepetitionPlan {
            repetitions: 5,
            base_seed: 2,
        };
        let e = run_ensemble(&p, Method::Gd, Some(&s), &x0, 50, &plan, &[1, 4], &Recording::All)
            .unwrap();
        assert!(e.stderr_comp.iter().flatten().all(|&s| s == 0.0));
        assert!(e.stderr_norm_sq.iter().all(|&s| s == 0.0));
    }
}
