//! Python bindings: `import eigsgd`.

use std::collections::BTreeMap;

use nalgebra::DVector;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use eigsgd::config::{parse_config, FigurePreset, Scale};
use eigsgd::problem::compute_constants;
use eigsgd::solvers::{self, RepetitionPlan};
use eigsgd::{theory, Consistency, Error, Method, Recording, Spacing, SpectrumSpec};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn method(name: &str) -> PyResult<Method> {
    match name {
        "gd" => Ok(Method::Gd),
        "sgd" => Ok(Method::Sgd),
        "kaczmarz" => Ok(Method::Kaczmarz),
        _ => Err(PyValueError::new_err(format!(
            "unknown method `{name}` (gd, sgd, kaczmarz)"
        ))),
    }
}

fn recording(points_per_decade: Option<usize>) -> Recording {
    match points_per_decade {
        None => Recording::All,
        Some(points_per_decade) => Recording::Geometric { points_per_decade },
    }
}

#[pyclass(name = "Schedule", frozen, from_py_object)]
#[derive(Clone)]
struct PySchedule(eigsgd::StepSchedule);

#[pymethods]
impl PySchedule {
    #[staticmethod]
    fn fixed(alpha: f64) -> PyResult<Self> {
        eigsgd::StepSchedule::fixed(alpha).map(Self).map_err(err)
    }

    /// a / (b + k)
    #[staticmethod]
    fn harmonic(a: f64, b: f64) -> PyResult<Self> {
        eigsgd::StepSchedule::harmonic(a, b).map(Self).map_err(err)
    }

    /// a / (b + k)^gamma
    #[staticmethod]
    fn polynomial(a: f64, b: f64, gamma: f64) -> PyResult<Self> {
        eigsgd::StepSchedule::polynomial(a, b, gamma)
            .map(Self)
            .map_err(err)
    }

    fn step_at(&self, k: usize) -> f64 {
        self.0.step_at(k)
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.0.family()
    }

    fn __repr__(&self) -> String {
        format!("Schedule({})", self.0.describe())
    }
}

#[pyclass(name = "Problem", frozen)]
struct PyProblem(eigsgd::SyntheticProblem);

#[pymethods]
impl PyProblem {
    /// Random A = U diag(sigma) V^T; consistent unless `noise_level` is given.
    #[new]
    #[pyo3(signature = (rows, cols, sigma_min, sigma_max, seed, noise_level=None, geometric=false))]
    fn new(
        rows: usize,
        cols: usize,
        sigma_min: f64,
        sigma_max: f64,
        seed: u64,
        noise_level: Option<f64>,
        geometric: bool,
    ) -> PyResult<Self> {
        let spec = SpectrumSpec {
            rows,
            cols,
            sigma_min,
            sigma_max,
            spacing: if geometric {
                Spacing::Geometric
            } else {
                Spacing::Linear
            },
            seed,
        };
        let consistency = match noise_level {
            None => Consistency::Consistent,
            Some(noise_level) => Consistency::Inconsistent { noise_level },
        };
        eigsgd::build_problem(&spec, consistency, seed)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn rows(&self) -> usize {
        self.0.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.0.cols()
    }

    /// Row-major copy of A.
    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        (0..self.0.rows()).map(|i| self.0.row(i).to_vec()).collect()
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.0.b().iter().copied().collect()
    }

    #[getter]
    fn sigma(&self) -> Vec<f64> {
        self.0.sigma().iter().copied().collect()
    }

    #[getter]
    fn x_star(&self) -> Vec<f64> {
        self.0.x_star().iter().copied().collect()
    }

    #[getter]
    fn f_star(&self) -> f64 {
        self.0.f_star()
    }

    #[getter]
    fn consistent(&self) -> bool {
        self.0.is_consistent()
    }

    #[getter]
    fn digest(&self) -> String {
        self.0.digest()
    }

    /// <x - x_*, v_l>, l is 1-based.
    fn component(&self, x: Vec<f64>, l: usize) -> PyResult<f64> {
        eigsgd::component(&self.0, &DVector::from_vec(x), l).map_err(err)
    }

    fn constants(&self) -> BTreeMap<&'static str, f64> {
        let c = compute_constants(&self.0);
        BTreeMap::from([
            ("m_l_tilde", c.rows as f64 * c.l_tilde),
            ("l_tilde", c.l_tilde),
            ("c_a", c.c_a),
            ("frob_sq", c.frob_sq),
            ("sigma_noise_sq", c.sigma_noise_sq),
            ("sigma_min_sq", c.sigma_min_sq),
            ("sigma_max_sq", c.sigma_max_sq),
            ("f_star", c.f_star),
        ])
    }

    #[pyo3(signature = (radius=1.0, seed=0))]
    fn initial_point(&self, radius: f64, seed: u64) -> Vec<f64> {
        solvers::initial_point(&self.0, radius, seed)
            .iter()
            .copied()
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem({}x{}, {}, digest={})",
            self.0.rows(),
            self.0.cols(),
            if self.0.is_consistent() {
                "consistent"
            } else {
                "inconsistent"
            },
            &self.0.digest()[..12]
        )
    }
}

#[pyclass(name = "Trace", frozen, get_all)]
struct PyTrace {
    probes: Vec<usize>,
    iters: Vec<usize>,
    /// components[i][r]: probe i at iters[r]
    components: Vec<Vec<f64>>,
    norm_sq: Vec<f64>,
}

#[pyclass(name = "Ensemble", frozen, get_all)]
struct PyEnsemble {
    repetitions: usize,
    seeds: Vec<u64>,
    probes: Vec<usize>,
    iters: Vec<usize>,
    mean_comp: Vec<Vec<f64>>,
    mean_comp_sq: Vec<Vec<f64>>,
    mean_norm_sq: Vec<f64>,
    stderr_comp: Vec<Vec<f64>>,
    stderr_comp_sq: Vec<Vec<f64>>,
    stderr_norm_sq: Vec<f64>,
}

/// One trajectory. `points_per_decade=None` records every iteration.
#[pyfunction]
#[pyo3(signature = (problem, method, x0, iters, probes, schedule=None, seed=0, points_per_decade=None))]
#[allow(clippy::too_many_arguments)]
fn run_trajectory(
    py: Python<'_>,
    problem: &PyProblem,
    method: &str,
    x0: Vec<f64>,
    iters: usize,
    probes: Vec<usize>,
    schedule: Option<PySchedule>,
    seed: u64,
    points_per_decade: Option<usize>,
) -> PyResult<PyTrace> {
    let m = self::method(method)?;
    let x0 = DVector::from_vec(x0);
    let t = py
        .detach(|| {
            solvers::run_trajectory(
                &problem.0,
                m,
                schedule.as_ref().map(|s| &s.0),
                &x0,
                iters,
                seed,
                &probes,
                &recording(points_per_decade),
            )
        })
        .map_err(err)?;
    Ok(PyTrace {
        probes: t.probes,
        iters: t.iters,
        components: t.components,
        norm_sq: t.norm_sq,
    })
}

#[pyfunction]
#[pyo3(signature = (problem, method, x0, iters, probes, repetitions, schedule=None, seed=0, points_per_decade=Some(64)))]
#[allow(clippy::too_many_arguments)]
fn run_ensemble(
    py: Python<'_>,
    problem: &PyProblem,
    method: &str,
    x0: Vec<f64>,
    iters: usize,
    probes: Vec<usize>,
    repetitions: usize,
    schedule: Option<PySchedule>,
    seed: u64,
    points_per_decade: Option<usize>,
) -> PyResult<PyEnsemble> {
    let m = self::method(method)?;
    let x0 = DVector::from_vec(x0);
    let plan = RepetitionPlan {
        repetitions,
        base_seed: seed,
    };
    let e = py
        .detach(|| {
            solvers::run_ensemble(
                &problem.0,
                m,
                schedule.as_ref().map(|s| &s.0),
                &x0,
                iters,
                &plan,
                &probes,
                &recording(points_per_decade),
            )
        })
        .map_err(err)?;
    Ok(PyEnsemble {
        repetitions: e.repetitions,
        seeds: e.seeds,
        probes: e.probes,
        iters: e.iters,
        mean_comp: e.mean_comp,
        mean_comp_sq: e.mean_comp_sq,
        mean_norm_sq: e.mean_norm_sq,
        stderr_comp: e.stderr_comp,
        stderr_comp_sq: e.stderr_comp_sq,
        stderr_norm_sq: e.stderr_norm_sq,
    })
}

/// prod_{k=0}^{n} (1 - alpha_k sigma_sq)
#[pyfunction]
fn mean_factor(schedule: &PySchedule, sigma_sq: f64, n: usize) -> f64 {
    theory::mean_factor(&schedule.0, sigma_sq, n)
}

/// Expected l-th component after n+1 steps of SGD (or GD).
#[pyfunction]
fn expected_component(
    problem: &PyProblem,
    schedule: &PySchedule,
    l: usize,
    x0: Vec<f64>,
    n: usize,
) -> PyResult<f64> {
    theory::expected_component(&problem.0, &schedule.0, l, &DVector::from_vec(x0), n).map_err(err)
}

/// Upper bound on E<x_{n+1} - x_*, v_l>^2 from the backward recursion.
#[pyfunction]
fn second_moment_bound(
    problem: &PyProblem,
    schedule: &PySchedule,
    l: usize,
    x0: Vec<f64>,
    n: usize,
) -> PyResult<f64> {
    let c = compute_constants(&problem.0);
    theory::second_moment_recursion(&problem.0, &c, &schedule.0, l, &DVector::from_vec(x0), n)
        .map(|(_, bound)| bound)
        .map_err(err)
}

/// Expected l-th component after k Kaczmarz steps on a consistent problem.
#[pyfunction]
fn kaczmarz_expected_component(
    problem: &PyProblem,
    l: usize,
    x0: Vec<f64>,
    k: usize,
) -> PyResult<f64> {
    theory::kaczmarz_expected_component(&problem.0, l, &DVector::from_vec(x0), k).map_err(err)
}

/// Returns (slope_early, slope_late, transition_detected).
#[pyfunction]
#[pyo3(signature = (series, early, late, margin=eigsgd::phase::DEFAULT_MARGIN))]
fn detect_phase_transition(
    series: Vec<(f64, f64)>,
    early: (f64, f64),
    late: (f64, f64),
    margin: f64,
) -> PyResult<(f64, f64, bool)> {
    eigsgd::phase::detect_phase_transition(&series, early, late, margin)
        .map(|r| (r.slope_early, r.slope_late, r.transition_detected))
        .map_err(err)
}

/// TOML config of a figure preset.
#[pyfunction]
#[pyo3(signature = (name, scale="paper"))]
fn preset(name: &str, scale: &str) -> PyResult<String> {
    let p: FigurePreset = name.parse().map_err(err)?;
    let s: Scale = scale.parse().map_err(PyValueError::new_err)?;
    Ok(p.config().at_scale(s).map_err(err)?.to_toml())
}

/// Run a TOML config in memory; returns {file name: contents}.
#[pyfunction]
#[pyo3(signature = (config, scale="paper"))]
fn compute(py: Python<'_>, config: &str, scale: &str) -> PyResult<BTreeMap<String, String>> {
    let s: Scale = scale.parse().map_err(PyValueError::new_err)?;
    let cfg = parse_config(config).and_then(|c| c.at_scale(s)).map_err(err)?;
    let bundle = py.detach(|| eigsgd::experiment::compute(&cfg)).map_err(err)?;
    Ok(bundle
        .files
        .into_iter()
        .map(|(n, b)| (n, String::from_utf8_lossy(&b).into_owned()))
        .collect())
}

#[pymodule(name = "eigsgd")]
fn eigsgd_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySchedule>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(run_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(mean_factor, m)?)?;
    m.add_function(wrap_pyfunction!(expected_component, m)?)?;
    m.add_function(wrap_pyfunction!(second_moment_bound, m)?)?;
    m.add_function(wrap_pyfunction!(kaczmarz_expected_component, m)?)?;
    m.add_function(wrap_pyfunction!(detect_phase_transition, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(compute, m)?)?;
    Ok(())
}
