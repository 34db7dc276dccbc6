//! TOML experiment configs and the figure presets.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{build_problem, Consistency, Spacing, SpectrumSpec, SyntheticProblem};
use crate::rng::mix_seed;
use crate::schedule::StepSchedule;
use crate::solvers::{initial_point, Method, Recording, RepetitionPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsistencyKind {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub rows: usize,
    pub cols: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    #[serde(default)]
    pub spacing: Spacing,
    pub seed: u64,
    pub consistency: ConsistencyKind,
    /// Required for inconsistent problems, rejected for consistent ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_level: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub kind: Method,
}

fn default_radius() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub iters: usize,
    pub probes: Vec<usize>,
    pub repetitions: usize,
    /// Base seed of the repetition streams.
    pub seed: u64,
    #[serde(default = "default_radius")]
    pub x0_radius: f64,
    #[serde(default)]
    pub recording: Recording,
}

fn yes() -> bool {
    true
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub emit_theory: bool,
    #[serde(default = "yes")]
    pub emit_plot_script: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            emit_theory: true,
            emit_plot_script: true,
        }
    }
}

/// Replacements applied by `--scale desk`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeskSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub method: MethodSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<StepSchedule>,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desk: Option<DeskSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    Desk,
    #[default]
    Paper,
}

impl FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(format!("unknown scale `{s}` (expected desk or paper)")),
        }
    }
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.message()))?;
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().message())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.spectrum()
            .validate()
            .map_err(|e| Error::config("problem", strip(e)))?;
        match (self.problem.consistency, self.problem.noise_level) {
            (ConsistencyKind::Consistent, Some(_)) => {
                return Err(Error::config(
                    "problem.noise_level",
                    "only allowed for inconsistent problems",
                ))
            }
            (ConsistencyKind::Inconsistent, None) => {
                return Err(Error::config(
                    "problem.noise_level",
                    "required for inconsistent problems",
                ))
            }
            (ConsistencyKind::Inconsistent, Some(v)) if !(v.is_finite() && v > 0.0) => {
                return Err(Error::config("problem.noise_level", "must be positive"))
            }
            (ConsistencyKind::Inconsistent, _) if self.problem.rows == self.problem.cols => {
                return Err(Error::config(
                    "problem.rows",
                    "an inconsistent problem needs rows > cols",
                ))
            }
            _ => {}
        }
        match (&self.schedule, self.method.kind.needs_schedule()) {
            (None, true) => {
                return Err(Error::config(
                    "schedule",
                    format!("required for method {}", self.method.kind.name()),
                ))
            }
            (Some(_), false) => {
                return Err(Error::config("schedule", "must be absent for kaczmarz"))
            }
            (Some(s), true) => s.check().map_err(|e| Error::config("schedule", strip(e)))?,
            (None, false) => {}
        }
        let r = &self.run;
        if r.iters == 0 {
            return Err(Error::config("run.iters", "must be at least 1"));
        }
        if r.repetitions == 0 {
            return Err(Error::config("run.repetitions", "must be at least 1"));
        }
        if !(r.x0_radius.is_finite() && r.x0_radius > 0.0) {
            return Err(Error::config("run.x0_radius", "must be positive"));
        }
        check_probes("run.probes", &r.probes, self.problem.cols)?;
        if let Some(d) = &self.desk {
            let cols = d.cols.unwrap_or(self.problem.cols);
            if let Some(p) = &d.probes {
                check_probes("desk.probes", p, cols)?;
            }
        }
        Ok(())
    }

    pub fn spectrum(&self) -> SpectrumSpec {
        SpectrumSpec {
            rows: self.problem.rows,
            cols: self.problem.cols,
            sigma_min: self.problem.sigma_min,
            sigma_max: self.problem.sigma_max,
            spacing: self.problem.spacing,
            seed: self.problem.seed,
        }
    }

    pub fn consistency(&self) -> Consistency {
        match self.problem.consistency {
            ConsistencyKind::Consistent => Consistency::Consistent,
            ConsistencyKind::Inconsistent => Consistency::Inconsistent {
                noise_level: self.problem.noise_level.unwrap_or(0.0),
            },
        }
    }

    pub fn plan(&self) -> RepetitionPlan {
        RepetitionPlan {
            repetitions: self.run.repetitions,
            base_seed: self.run.seed,
        }
    }

    /// Seed of `x_true` and of the inconsistency perturbation.
    pub fn instance_seed(&self) -> u64 {
        mix_seed(self.problem.seed, 3)
    }

    /// Seed of the shared starting point.
    pub fn x0_seed(&self) -> u64 {
        mix_seed(self.problem.seed, 4)
    }

    pub fn build_problem(&self) -> Result<SyntheticProblem> {
        build_problem(&self.spectrum(), self.consistency(), self.instance_seed())
    }

    pub fn initial_point(&self, p: &SyntheticProblem) -> nalgebra::DVector<f64> {
        initial_point(p, self.run.x0_radius, self.x0_seed())
    }

    /// Apply the `[desk]` overrides for `Scale::Desk`; the result carries no
    /// `[desk]` section. `Scale::Paper` returns the config unchanged.
    pub fn at_scale(&self, scale: Scale) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        if scale == Scale::Desk {
            if let Some(d) = c.desk.take() {
                if let Some(v) = d.rows {
                    c.problem.rows = v;
                }
                if let Some(v) = d.cols {
                    c.problem.cols = v;
                }
                if let Some(v) = d.iters {
                    c.run.iters = v;
                }
                if let Some(v) = d.probes {
                    c.run.probes = v;
                }
                if let Some(v) = d.repetitions {
                    c.run.repetitions = v;
                }
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn check_probes(path: &str, probes: &[usize], cols: usize) -> Result<()> {
    if probes.is_empty() {
        return Err(Error::config(path, "at least one probe is required"));
    }
    if let Some(&l) = probes.iter().find(|&&l| l == 0 || l > cols) {
        return Err(Error::config(path, format!("probe {l} outside 1..={cols}")));
    }
    Ok(())
}

/// Message of a validation error without the variant prefix duplication.
fn strip(e: Error) -> String {
    match e {
        Error::InvalidSpec(m) | Error::InvalidSchedule(m) => m,
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigurePreset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl FigurePreset {
    pub const ALL: [FigurePreset; 8] = [
        FigurePreset::Fig1,
        FigurePreset::Fig2,
        FigurePreset::Fig3,
        FigurePreset::Fig4,
        FigurePreset::Fig5,
        FigurePreset::Fig6,
        FigurePreset::Fig7,
        FigurePreset::Fig8,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FigurePreset::Fig1 => "fig1",
            FigurePreset::Fig2 => "fig2",
            FigurePreset::Fig3 => "fig3",
            FigurePreset::Fig4 => "fig4",
            FigurePreset::Fig5 => "fig5",
            FigurePreset::Fig6 => "fig6",
            FigurePreset::Fig7 => "fig7",
            FigurePreset::Fig8 => "fig8",
        }
    }

    fn number(&self) -> u64 {
        FigurePreset::ALL.iter().position(|p| p == self).unwrap() as u64 + 1
    }

    /// Full-size configuration. fig4 and fig8 carry a `[desk]` section.
    pub fn config(&self) -> ExperimentConfig {
        use FigurePreset::*;
        let n = self.number();
        let small = |consistency: ConsistencyKind| ProblemSection {
            rows: 30,
            cols: 20,
            sigma_min: 0.1,
            sigma_max: 1.0,
            spacing: Spacing::Linear,
            seed: n,
            consistency,
            noise_level: match consistency {
                ConsistencyKind::Consistent => None,
                ConsistencyKind::Inconsistent => Some(0.1),
            },
        };
        let run = |iters: usize, probes: Vec<usize>, repetitions: usize| RunSection {
            iters,
            probes,
            repetitions,
            seed: 100 + n,
            x0_radius: 1.0,
            recording: Recording::default(),
        };
        let output = OutputSection {
            dir: PathBuf::from(format!("out/{}", self.name())),
            ..OutputSection::default()
        };
        let sgd = MethodSection { kind: Method::Sgd };
        let harmonic = |a, b| Some(StepSchedule::Harmonic { a, b });
        let polynomial = |a, b, gamma| Some(StepSchedule::Polynomial { a, b, gamma });
        let large = |rows, cols| ProblemSection {
            rows,
            cols,
            sigma_min: 0.01,
            sigma_max: 1.0,
            spacing: Spacing::Linear,
            seed: n,
            consistency: ConsistencyKind::Consistent,
            noise_level: None,
        };
        let desk = Some(DeskSection {
            rows: Some(1000),
            cols: Some(300),
            iters: Some(100_000),
            probes: Some(vec![1, 150, 300]),
            repetitions: None,
        });

        let (problem, method, schedule, run, desk) = match self {
            Fig1 => (
                large(300, 150),
                MethodSection {
                    kind: Method::Kaczmarz,
                },
                None,
                run(10_000, vec![1, 135, 150], 1),
                None,
            ),
            Fig2 => (
                small(ConsistencyKind::Consistent),
                sgd,
                harmonic(0.5, 20.0),
                run(10_000, vec![1, 10, 20], 20),
                None,
            ),
            Fig3 => (
                small(ConsistencyKind::Inconsistent),
                sgd,
                harmonic(0.5, 20.0),
                run(10_000, vec![1, 10, 20], 20),
                None,
            ),
            Fig4 => (
                large(10_000, 3000),
                sgd,
                harmonic(0.5, 150.0),
                run(1_000_000, vec![1, 1500, 3000], 1),
                desk,
            ),
            Fig5 => (
                small(ConsistencyKind::Consistent),
                sgd,
                polynomial(0.2, 5.0, 0.8),
                run(10_000, vec![1, 10, 20], 20),
                None,
            ),
            Fig6 => (
                small(ConsistencyKind::Inconsistent),
                sgd,
                polynomial(0.2, 5.0, 0.8),
                run(10_000, vec![1, 10, 20], 20),
                None,
            ),
            Fig7 => (
                small(ConsistencyKind::Consistent),
                sgd,
                polynomial(0.2, 5.0, 0.8),
                run(100_000, vec![1, 10, 20], 20),
                None,
            ),
            Fig8 => (
                large(10_000, 2000),
                sgd,
                polynomial(0.06, 50.0, 0.7),
                run(1_000_000, vec![1, 1000, 2000], 1),
                desk,
            ),
        };
        ExperimentConfig {
            problem,
            method,
            schedule,
            run,
            output,
            desk,
        }
    }
}

impl FromStr for FigurePreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FigurePreset::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config("preset", format!("unknown preset `{s}` (fig1..fig8)")))
    }
}
