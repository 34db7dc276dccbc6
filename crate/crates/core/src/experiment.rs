//! Runs a config end to end and renders the artifact bundle.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{DivergedRun, Error, Result};
use crate::output::{ensemble_table, write_files, Table};
use crate::problem::{component, compute_constants, ProblemConstants, SyntheticProblem};
use crate::schedule::{self, StepSchedule};
use crate::solvers::{recorded_iterations, run_ensemble, EnsembleSummary, Method};
use crate::theory::{
    kaczmarz_factor_curve, mean_bound_harmonic, mean_bound_polynomial, mean_factor_curve,
    moment_coefficients, rate_bounds_harmonic, rate_bounds_polynomial, second_moment_bound_fixed,
    CoefficientFunctions,
};

/// Environment variable that overrides the configured output directory.
pub const OUT_ENV: &str = "EIGSGD_OUT";

/// `--out`, then `EIGSGD_OUT`, then the config's `output.dir`.
pub fn resolve_out_dir(cli: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output.dir.clone(),
    }
}

pub fn config_digest(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
}

/// Predictions and bounds at the recorded iterations. Recorded iteration `k`
/// uses the horizon `n = k - 1`; `k = 0` gives the initial values.
pub fn theory_table(
    cfg: &ExperimentConfig,
    p: &SyntheticProblem,
    consts: &ProblemConstants,
    x0: &DVector<f64>,
    iters: &[usize],
    warnings: &mut Vec<String>,
) -> Result<Table> {
    let method = cfg.method.kind;
    let sched = cfg.schedule;
    let coeffs = CoefficientFunctions::new(consts);
    let e0 = (x0 - p.x_star()).norm_squared();
    let nan = vec![f64::NAN; iters.len()];

    let mut columns = Vec::new();
    let mut data: Vec<Vec<f64>> = Vec::new();
    let mut negative_a = false;

    for &l in &cfg.run.probes {
        let c0 = component(p, x0, l)?;
        let sl = p.sigma_sq(l)?;

        let pred = match (method, &sched) {
            (Method::Kaczmarz, _) if p.is_consistent() => kaczmarz_factor_curve(p, l, iters)?
                .into_iter()
                .map(|f| f * c0)
                .collect(),
            (Method::Kaczmarz, _) => nan.clone(),
            (_, Some(s)) => mean_factor_curve(s, sl, iters)
                .into_iter()
                .map(|f| f * c0)
                .collect(),
            (_, None) => nan.clone(),
        };

        let at = |f: &dyn Fn(usize) -> f64, k0: f64| -> Vec<f64> {
            iters
                .iter()
                .map(|&k| if k == 0 { k0 } else { f(k - 1) })
                .collect()
        };

        let bound_mean = match sched {
            Some(StepSchedule::Harmonic { a, b }) if method == Method::Sgd => {
                at(&|n| mean_bound_harmonic(a, b, sl, c0, n), c0.abs())
            }
            Some(StepSchedule::Polynomial { a, b, gamma }) if method == Method::Sgd => {
                at(&|n| mean_bound_polynomial(a, b, gamma, sl, c0, n), c0.abs())
            }
            _ => nan.clone(),
        };

        let bound_sq = match (method, &sched) {
            (Method::Sgd, Some(s)) => {
                let vals: Vec<(f64, bool)> = iters
                    .par_iter()
                    .map(|&k| {
                        if k == 0 {
                            (c0 * c0, false)
                        } else {
                            let m = moment_coefficients(&coeffs, s, sl, k - 1);
                            (m.bound(c0 * c0, e0), m.negative_a)
                        }
                    })
                    .collect();
                negative_a |= vals.iter().any(|v| v.1);
                vals.into_iter().map(|v| v.0).collect()
            }
            _ => nan.clone(),
        };

        let closed_sq = match (method, sched) {
            (Method::Sgd, Some(StepSchedule::Fixed { alpha })) if p.is_consistent() => at(
                &|n| {
                    second_moment_bound_fixed(p, consts, alpha, x0, n)
                        .map(|b| b.bound)
                        .unwrap_or(f64::NAN)
                },
                c0 * c0,
            ),
            (Method::Sgd, Some(StepSchedule::Harmonic { a, b })) => {
                match rate_bounds_harmonic(&coeffs, a, b, sl, 0) {
                    Err(e) => {
                        warnings.push(format!("closed-form bounds unavailable for l={l}: {e}"));
                        nan.clone()
                    }
                    Ok(_) => at(
                        &|n| {
                            rate_bounds_harmonic(&coeffs, a, b, sl, n)
                                .map(|r| r.total(c0 * c0, e0))
                                .unwrap_or(f64::NAN)
                        },
                        c0 * c0,
                    ),
                }
            }
            (Method::Sgd, Some(StepSchedule::Polynomial { a, b, gamma })) => {
                match rate_bounds_polynomial(&coeffs, a, b, gamma, sl, 0) {
                    Err(e) => {
                        warnings.push(format!("closed-form bounds unavailable for l={l}: {e}"));
                        nan.clone()
                    }
                    Ok(_) => at(
                        &|n| {
                            rate_bounds_polynomial(&coeffs, a, b, gamma, sl, n)
                                .map(|r| r.total(c0 * c0, e0))
                                .unwrap_or(f64::NAN)
                        },
                        c0 * c0,
                    ),
                }
            }
            _ => nan.clone(),
        };

        columns.push(format!("pred_mean_{l}"));
        data.push(pred);
        columns.push(format!("bound_mean_{l}"));
        data.push(bound_mean);
        columns.push(format!("bound_sq_{l}"));
        data.push(bound_sq);
        columns.push(format!("closed_sq_{l}"));
        data.push(closed_sq);
        if let Some(StepSchedule::Polynomial { a, b, .. }) = sched {
            let h = StepSchedule::Harmonic { a, b };
            columns.push(format!("pred_gamma1_{l}"));
            data.push(
                mean_factor_curve(&h, sl, iters)
                    .into_iter()
                    .map(|f| f * c0)
                    .collect(),
            );
        }
    }
    if negative_a {
        warnings.push(
            "some step makes 1 - 2 alpha sigma_l^2 negative; the recursion bound kept the signed value"
                .into(),
        );
    }

    let rows = (0..iters.len())
        .map(|r| data.iter().map(|c| c[r]).collect())
        .collect();
    let comments = vec![
        "eigsgd theory".to_string(),
        format!(
            "method={} schedule={} problem={}",
            method.name(),
            sched.map(|s| s.describe()).unwrap_or_else(|| "none".into()),
            p.digest()
        ),
        "pred_mean_l = exact mean of <x_k - x_*, v_l>; bound_mean_l = closed-form bound on its magnitude; bound_sq_l = recursion bound on the second moment; closed_sq_l = closed-form second-moment bound; pred_gamma1_l = mean prediction with gamma = 1; nan = not applicable".into(),
        format!(
            "columns: iter,{}",
            columns.join(",")
        ),
    ];
    Ok(Table {
        comments,
        key: "iter".into(),
        columns,
        keys: iters.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceReport {
    pub total: usize,
    pub runs: Vec<DivergedRunReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergedRunReport {
    pub repetition: usize,
    pub seed: u64,
    pub iteration: usize,
}

impl From<&DivergedRun> for DivergedRunReport {
    fn from(r: &DivergedRun) -> Self {
        DivergedRunReport {
            repetition: r.repetition,
            seed: r.seed,
            iteration: r.iteration,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    pub problem: u64,
    pub instance: u64,
    pub x0: u64,
    pub base: u64,
    pub repetitions: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub created_unix: u64,
    pub config_sha256: String,
    pub config: String,
    pub problem_digest: String,
    pub seeds: Seeds,
    pub constants: ProblemConstants,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    pub divergence: Option<DivergenceReport>,
}

/// Everything a run produces, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub summary: Option<EnsembleSummary>,
    pub theory: Option<Table>,
    pub files: Vec<(String, Vec<u8>)>,
    pub manifest: Manifest,
}

impl Bundle {
    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }
}

fn validation_warnings(cfg: &ExperimentConfig, consts: &ProblemConstants) -> Vec<String> {
    match (&cfg.schedule, cfg.method.kind) {
        (Some(s), Method::Sgd) => schedule::validate(s, consts, cfg.run.iters)
            .into_iter()
            .map(|d| d.to_string())
            .collect(),
        _ => Vec::new(),
    }
}

/// Build the problem, run the ensemble, evaluate the theory and render every
/// artifact in memory. Divergence yields a bundle with only the manifest.
pub fn compute(cfg: &ExperimentConfig) -> Result<Bundle> {
    cfg.validate()?;
    let p = cfg.build_problem()?;
    let consts = compute_constants(&p);
    let x0 = cfg.initial_point(&p);
    let plan = cfg.plan();
    let mut warnings = validation_warnings(cfg, &consts);

    let mut manifest = Manifest {
        tool: "eigsgd",
        version: env!("CARGO_PKG_VERSION"),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config_sha256: config_digest(cfg),
        config: cfg.to_toml(),
        problem_digest: p.digest(),
        seeds: Seeds {
            problem: cfg.problem.seed,
            instance: cfg.instance_seed(),
            x0: cfg.x0_seed(),
            base: plan.base_seed,
            repetitions: (0..plan.repetitions).map(|r| plan.seed_for(r)).collect(),
        },
        constants: consts,
        files: Vec::new(),
        warnings: Vec::new(),
        divergence: None,
    };

    let summary = match run_ensemble(
        &p,
        cfg.method.kind,
        cfg.schedule.as_ref(),
        &x0,
        cfg.run.iters,
        &plan,
        &cfg.run.probes,
        &cfg.run.recording,
    ) {
        Ok(s) => s,
        Err(Error::EnsembleDiverged { runs, total }) => {
            manifest.divergence = Some(DivergenceReport {
                total,
                runs: runs.iter().map(DivergedRunReport::from).collect(),
            });
            manifest.warnings = warnings;
            manifest.files = vec!["manifest.json".into()];
            let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
            return Ok(Bundle {
                summary: None,
                theory: None,
                files: vec![("manifest.json".into(), json)],
                manifest,
            });
        }
        Err(e) => return Err(e),
    };

    let mut files = vec![(
        "ensemble.csv".to_string(),
        ensemble_table(&summary, &[]).to_bytes()?,
    )];
    let iters = recorded_iterations(cfg.run.iters, &cfg.run.recording);
    let theory = if cfg.output.emit_theory {
        let t = theory_table(cfg, &p, &consts, &x0, &iters, &mut warnings)?;
        files.push(("theory.csv".into(), t.to_bytes()?));
        Some(t)
    } else {
        None
    };
    if cfg.output.emit_plot_script {
        files.push((
            "plot.py".into(),
            plot_script(cfg, cfg.output.emit_theory).into_bytes(),
        ));
    }
    manifest.warnings = warnings;
    manifest.files = files.iter().map(|(n, _)| n.clone()).collect();
    manifest.files.push("manifest.json".into());
    files.push((
        "manifest.json".into(),
        serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
    ));
    Ok(Bundle {
        summary: Some(summary),
        theory,
        files,
        manifest,
    })
}

/// `compute`, then write the bundle into `dir`. A divergent ensemble writes
/// its manifest and returns the divergence error.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<Bundle> {
    let bundle = compute(cfg)?;
    write_files(dir, &bundle.files)?;
    if let Some(d) = &bundle.manifest.divergence {
        return Err(Error::EnsembleDiverged {
            runs: d
                .runs
                .iter()
                .map(|r| DivergedRun {
                    repetition: r.repetition,
                    seed: r.seed,
                    iteration: r.iteration,
                })
                .collect(),
            total: d.total,
        });
    }
    Ok(bundle)
}

/// Matplotlib script over the declared CSV columns. Component panels are
/// log-log and show `|value|` floored at 1e-16.
pub fn plot_script(cfg: &ExperimentConfig, with_theory: bool) -> String {
    let probes = cfg
        .run
        .probes
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let title = format!(
        "{} {}x{} {}",
        cfg.method.kind.name(),
        cfg.problem.rows,
        cfg.problem.cols,
        cfg.schedule.map(|s| s.describe()).unwrap_or_default()
    );
    PLOT_TEMPLATE
        .replace("@PROBES@", &probes)
        .replace("@THEORY@", if with_theory { "True" } else { "False" })
        .replace("@TITLE@", &title.replace('"', "'"))
}

const PLOT_TEMPLATE: &str = r##"# Generated by eigsgd. Usage: python plot.py [output.png]
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
PROBES = [@PROBES@]
WITH_THEORY = @THEORY@
FLOOR = 1e-16

# measured: (color, linestyle, marker); prediction: (color, linestyle)
STYLES = [
    (("blue", "-", "o"), ("lightblue", "-")),
    (("green", "--", "+"), ("lightgreen", "--")),
    (("red", "-.", "*"), ("lightcoral", "-.")),
]


def read(name):
    with open(os.path.join(HERE, name)) as f:
        rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    return {h: [float(r[i]) for r in body] for i, h in enumerate(header)}


def mag(xs, scale):
    return [max(abs(x / scale), FLOOR) for x in xs]


ens = read("ensemble.csv")
theo = read("theory.csv") if WITH_THEORY else None
k = [max(v, 1.0) for v in ens["iter"]]

fig, ax = plt.subplots(figsize=(7, 5))
for j, l in enumerate(PROBES):
    (mc, ml, mm), (pc, pl) = STYLES[j % len(STYLES)]
    c0 = ens["comp_%d" % l][0] or 1.0
    ax.plot(k, mag(ens["comp_%d" % l], c0), color=mc, linestyle=ml, marker=mm,
            markevery=0.05, label="<x_k-x*, v_%d> / <x_0-x*, v_%d>" % (l, l))
    if theo is not None and ("pred_mean_%d" % l) in theo:
        ax.plot(k, mag(theo["pred_mean_%d" % l], c0), color=pc, linestyle=pl,
                label="prediction, l=%d" % l)
    if theo is not None and j == 0 and ("pred_gamma1_%d" % l) in theo:
        ax.plot(k, mag(theo["pred_gamma1_%d" % l], c0), color="plum", linestyle="-",
                label="prediction with gamma=1, l=%d" % l)
e0 = ens["norm_sq"][0] or 1.0
ax.plot(k, mag(ens["norm_sq"], e0), color="gold", linestyle="-",
        label="||x_k-x*||^2 / ||x_0-x*||^2")
ax.set_xscale("log")
ax.set_yscale("log")
ax.set_xlabel("iteration k")
ax.set_title("@TITLE@")
ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, "plot.png"), dpi=150)
"##;
