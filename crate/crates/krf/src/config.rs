//! Experiment and run configuration files.

use std::path::{Path, PathBuf};

use krf_core::diagnostics::ClassifyParams;
use krf_core::geometry::{self, Bump};
use krf_core::{
    carlson_griffiths_initial, poincare_cusp, ConformalMetric, EndCondition, FlowMode,
    PotentialFarRule, RunConfig, Scheme, SurfaceModel, Tolerances, Topology,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::manifold::{ManifoldSpec, Scalar};

/// Environment variable that replaces `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "KRF_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub manifold: Option<ManifoldSpec>,
    /// Initial class; for surface runs the measured area is used instead.
    #[serde(default)]
    pub omega0: Option<Vec<Scalar>>,
    #[serde(default)]
    pub run: Option<RunSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("krf-out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|source| CliError::Parse {
            path: origin.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, path)
    }

    /// `output_dir`, unless overridden by the environment.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn label(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        self.manifold
            .as_ref()
            .map_or_else(|| String::from("experiment"), ManifoldSpec::label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologySpec {
    OnePuncture,
    TwoPuncture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndSpec {
    Cusp(f64),
    Cap,
    Flat,
    Truncated,
}

impl From<EndSpec> for EndCondition {
    fn from(e: EndSpec) -> Self {
        match e {
            EndSpec::Cusp(c) => EndCondition::CuspMatch { c },
            EndSpec::Cap => EndCondition::SmoothCap,
            EndSpec::Flat => EndCondition::FlatEnd,
            EndSpec::Truncated => EndCondition::Truncated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    #[serde(default)]
    pub amplitude: Option<f64>,
    /// Area of the round part; sets `amplitude = area/4π`.
    #[serde(default)]
    pub area: Option<f64>,
    #[serde(default)]
    pub hermitian_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Modes `1..=modes` get seeded amplitudes in `[−amplitude, amplitude]`.
    pub modes: u32,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    CarlsonGriffiths { c: f64, bump: BumpSpec },
    Poincare { c: f64 },
    RoundSphere { area: f64 },
    Flat { level: f64 },
    FlatPerturbed {
        level: f64,
        #[serde(default)]
        modes: Vec<(u32, f64)>,
        #[serde(default)]
        noise: Option<NoiseSpec>,
    },
    Cigar { lambda: f64, center: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    #[default]
    Normalized,
    Unnormalized,
    FlatLongtime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    #[default]
    ExplicitRk4,
    ImplicitMetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarRuleSpec {
    Neumann,
    Dirichlet,
    Extrapolate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default)]
    pub solver: Option<f64>,
    #[serde(default)]
    pub newton: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySpec {
    #[serde(default)]
    pub growth_factor: Option<f64>,
    #[serde(default)]
    pub band: Option<f64>,
    #[serde(default)]
    pub min_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub topology: TopologySpec,
    pub grid: GridSpec,
    pub ends: [EndSpec; 2],
    pub initial: InitialSpec,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default)]
    pub scheme: SchemeSpec,
    pub t_end: f64,
    #[serde(default)]
    pub cfl: Option<f64>,
    #[serde(default)]
    pub tolerances: Option<ToleranceSpec>,
    #[serde(default)]
    pub record_interval: Option<f64>,
    #[serde(default)]
    pub far_rule: Option<FarRuleSpec>,
    #[serde(default)]
    pub prefer_exact_ricci: Option<bool>,
    #[serde(default)]
    pub resolution_factor: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub initial_dt: Option<f64>,
    #[serde(default)]
    pub classify: Option<ClassifySpec>,
}

impl RunSpec {
    pub fn model(&self) -> Result<SurfaceModel, CliError> {
        let topology = match self.topology {
            TopologySpec::OnePuncture => Topology::OnePuncture,
            TopologySpec::TwoPuncture => Topology::TwoPuncture,
        };
        let grid = krf_core::Grid::new(self.grid.x_min, self.grid.x_max, self.grid.n)?;
        Ok(SurfaceModel::new(topology, grid, self.ends[0].into(), self.ends[1].into())?)
    }

    pub fn initial_metric(&self, seed: u64) -> Result<ConformalMetric, CliError> {
        let model = self.model()?;
        let metric = match &self.initial {
            InitialSpec::CarlsonGriffiths { c, bump } => {
                let mut b = match (bump.amplitude, bump.area) {
                    (Some(a), None) => Bump {
                        amplitude: a,
                        hermitian_scale: None,
                    },
                    (None, Some(area)) => Bump::with_area(area),
                    _ => {
                        return Err(CliError::Config(String::from(
                            "bump needs exactly one of amplitude or area",
                        )))
                    }
                };
                b.hermitian_scale = bump.hermitian_scale;
                carlson_griffiths_initial(&model, *c, b)?
            }
            InitialSpec::Poincare { c } => poincare_cusp(*c, &model)?,
            InitialSpec::RoundSphere { area } => geometry::round_sphere(&model, *area)?,
            InitialSpec::Flat { level } => geometry::flat(&model, *level)?,
            InitialSpec::FlatPerturbed { level, modes, noise } => {
                let mut all = modes.clone();
                if let Some(noise) = noise {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    for k in 1..=noise.modes {
                        let a = noise.amplitude * rng.gen_range(-1.0..=1.0);
                        all.push((k, a));
                    }
                }
                geometry::flat_perturbed(&model, *level, &all)?
            }
            InitialSpec::Cigar { lambda, center } => geometry::cigar(&model, *lambda, *center)?,
        };
        Ok(metric)
    }

    pub fn run_config(&self) -> RunConfig {
        let d = RunConfig::default();
        let tol = self.tolerances.unwrap_or(ToleranceSpec {
            solver: None,
            newton: None,
        });
        let cls = self.classify.unwrap_or(ClassifySpec {
            growth_factor: None,
            band: None,
            min_samples: None,
        });
        let dc = ClassifyParams::default();
        RunConfig {
            mode: match self.mode {
                ModeSpec::Normalized => FlowMode::Normalized,
                ModeSpec::Unnormalized => FlowMode::Unnormalized,
                ModeSpec::FlatLongtime => FlowMode::FlatLongtime,
            },
            scheme: match self.scheme {
                SchemeSpec::ExplicitRk4 => Scheme::ExplicitRk4,
                SchemeSpec::ImplicitMetric => Scheme::ImplicitMetric,
            },
            t_end: self.t_end,
            cfl: self.cfl.unwrap_or(d.cfl),
            tolerances: Tolerances {
                solver: tol.solver.unwrap_or(d.tolerances.solver),
                newton: tol.newton.unwrap_or(d.tolerances.newton),
            },
            record_interval: self.record_interval,
            far_rule: self.far_rule.map(|r| match r {
                FarRuleSpec::Neumann => PotentialFarRule::Neumann,
                FarRuleSpec::Dirichlet => PotentialFarRule::Dirichlet,
                FarRuleSpec::Extrapolate => PotentialFarRule::Extrapolate,
            }),
            prefer_exact_ricci: self.prefer_exact_ricci.unwrap_or(d.prefer_exact_ricci),
            resolution_factor: self.resolution_factor.unwrap_or(d.resolution_factor),
            max_steps: self.max_steps.unwrap_or(d.max_steps),
            initial_dt: self.initial_dt,
            classify: ClassifyParams {
                growth_factor: cls.growth_factor.unwrap_or(dc.growth_factor),
                band: cls.band.unwrap_or(dc.band),
                min_samples: cls.min_samples.unwrap_or(dc.min_samples),
            },
            ..d
        }
    }
}
