//! JSON run configuration and its resolution into solver inputs.
//!
//! Unknown keys are rejected everywhere. The top-level `metadata` key is
//! accepted and ignored, so a run's sidecar can be fed back as a config.

use crate::error::CliError;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use spinchain::inversion::{InversionPlan, Method};
use spinchain::kernels::load_tabulated;
use spinchain::model::{validate, ChainSpec, InitialState, ReservoirSpec, TimeGrid, ValidatedConfig};
use spinchain::oracle::{Scheme, VolterraConfig};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub chain: ChainConfig,
    pub reservoirs: Reservoirs,
    pub initial: InitialConfig,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inversion: Option<InversionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volterra: Option<VolterraSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
    #[serde(default, skip_serializing)]
    pub metadata: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n_sites: usize,
    #[serde(default = "one")]
    pub coupling: f64,
    pub omega_eg: f64,
}

fn one() -> f64 {
    1.0
}

/// Either `both`, or `left` and `right`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Reservoirs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub both: Option<ReservoirConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<ReservoirConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<ReservoirConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReservoirConfig {
    Lorentzian {
        g: f64,
        gamma: f64,
        #[serde(default)]
        detuning: f64,
    },
    Ohmic {
        g: f64,
        omega_c: f64,
        s_param: f64,
    },
    /// `samples` inline, or `file` with two columns; a relative `file` is
    /// taken from the config's directory.
    Tabulated {
        g: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<Vec<[f64; 2]>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum InitialConfig {
    Preset(Preset),
    /// `[re, im]` per site.
    Amplitudes(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    FirstSite,
    LastSite,
    Center,
    UniformChannel,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_max: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Laplace,
    Volterra,
    Pseudomode,
    CrossCheck,
}

impl Backend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::Laplace => "laplace",
            Backend::Volterra => "volterra",
            Backend::Pseudomode => "pseudomode",
            Backend::CrossCheck => "cross-check",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour_shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_terms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub euler_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    FourierEuler,
    Talbot,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VolterraSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeName>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Pc2,
    Trapezoid,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub backend: Option<Backend>,
    pub out_dir: Option<PathBuf>,
    pub tol: Option<f64>,
}

/// Everything a run needs, checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ValidatedConfig,
    pub grid: TimeGrid,
    pub backend: Backend,
    pub plan: InversionPlan,
    pub volterra: VolterraConfig,
    pub out_dir: PathBuf,
    pub stem: String,
    /// The input config with defaults filled in and tables inlined.
    pub canonical: RunConfig,
}

pub fn read_value(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config("ParseError", format!("{}: {e}", path.display())))
}

pub fn from_value(value: serde_json::Value) -> Result<RunConfig, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::config("SchemaError", e.to_string()))
}

impl ReservoirConfig {
    fn to_spec(&self, base_dir: &Path) -> Result<ReservoirSpec, CliError> {
        Ok(match self {
            ReservoirConfig::Lorentzian { g, gamma, detuning } => ReservoirSpec::lorentzian(*g, *gamma, *detuning),
            ReservoirConfig::Ohmic { g, omega_c, s_param } => ReservoirSpec::ohmic(*g, *omega_c, *s_param),
            ReservoirConfig::Tabulated { g, samples, file } => {
                let samples = match (samples, file) {
                    (Some(s), None) => s.iter().map(|p| (p[0], p[1])).collect(),
                    (None, Some(f)) => load_tabulated(&base_dir.join(f))
                        .map_err(|e| CliError::config("ParseError", e.to_string()))?,
                    _ => {
                        return Err(CliError::config(
                            "SchemaError",
                            "tabulated reservoir needs exactly one of `samples` and `file`",
                        ))
                    }
                };
                ReservoirSpec::Tabulated { g: *g, samples }
            }
        })
    }

    fn inlined(spec: &ReservoirSpec) -> Self {
        match spec {
            ReservoirSpec::Lorentzian { g, gamma, detuning } => {
                ReservoirConfig::Lorentzian { g: *g, gamma: *gamma, detuning: *detuning }
            }
            ReservoirSpec::Ohmic { g, omega_c, s_param } => {
                ReservoirConfig::Ohmic { g: *g, omega_c: *omega_c, s_param: *s_param }
            }
            ReservoirSpec::Tabulated { g, samples } => ReservoirConfig::Tabulated {
                g: *g,
                samples: Some(samples.iter().map(|&(w, j)| [w, j]).collect()),
                file: None,
            },
        }
    }
}

impl Reservoirs {
    fn pair(&self) -> Result<[&ReservoirConfig; 2], CliError> {
        match (&self.both, &self.left, &self.right) {
            (Some(b), None, None) => Ok([b, b]),
            (None, Some(l), Some(r)) => Ok([l, r]),
            _ => Err(CliError::config("SchemaError", "reservoirs needs either `both` or `left` and `right`")),
        }
    }
}

fn initial_state(init: &InitialConfig, n: usize) -> Result<InitialState, CliError> {
    let model = |e: spinchain::model::ModelError| CliError::config(e.kind(), e.to_string());
    match init {
        InitialConfig::Preset(Preset::FirstSite) => InitialState::site(n, 1).map_err(model),
        InitialConfig::Preset(Preset::LastSite) => InitialState::site(n, n).map_err(model),
        InitialConfig::Preset(Preset::Center) => {
            if n % 2 == 0 {
                return Err(CliError::config("ParamError", format!("preset `center` needs odd n_sites, got {n}")));
            }
            InitialState::site(n, (n + 1) / 2).map_err(model)
        }
        InitialConfig::Preset(Preset::UniformChannel) => InitialState::uniform_channel(n).map_err(model),
        InitialConfig::Amplitudes(a) => InitialState::new(a.iter().map(|p| C64::new(p[0], p[1])).collect()).map_err(model),
    }
}

impl RunConfig {
    /// Resolve against the config's directory and the command-line
    /// overrides, then validate.
    pub fn resolve(&self, base_dir: &Path, overrides: &Overrides) -> Result<Resolved, CliError> {
        let model = |e: spinchain::model::ModelError| CliError::config(e.kind(), e.to_string());
        let chain = ChainSpec::new(self.chain.n_sites, self.chain.coupling, self.chain.omega_eg);
        // Dimension problems are reported before anything that depends on N.
        chain.check().map_err(model)?;
        let [left, right] = self.reservoirs.pair()?;
        let (r1, r2) = (left.to_spec(base_dir)?, right.to_spec(base_dir)?);
        let init = initial_state(&self.initial, chain.n_sites)?;
        let config = validate(&chain, &r1, &r2, &init).map_err(model)?;
        let grid = TimeGrid::uniform(self.grid.t_max, self.grid.n_points).map_err(model)?;

        let inv = self.inversion.unwrap_or_default();
        let mut plan = match inv.method {
            Some(MethodName::Talbot) => InversionPlan::talbot(),
            _ => InversionPlan::default(),
        };
        plan.contour_shift = inv.contour_shift.unwrap_or(plan.contour_shift);
        plan.n_terms = inv.n_terms.unwrap_or(plan.n_terms);
        plan.euler_depth = inv.euler_depth.unwrap_or(plan.euler_depth);
        plan.target_tol = overrides.tol.or(inv.target_tol).unwrap_or(plan.target_tol);
        plan.check().map_err(|e| CliError::config("PlanError", e.to_string()))?;

        let vs = self.volterra.unwrap_or_default();
        let volterra = VolterraConfig {
            dt: vs.dt.unwrap_or(VolterraConfig::default().dt),
            scheme: match vs.scheme {
                Some(SchemeName::Trapezoid) => Scheme::Trapezoid,
                _ => Scheme::PredictorCorrector2,
            },
        };

        let backend = overrides.backend.or(self.backend).unwrap_or(if config.both_lorentzian() {
            Backend::Laplace
        } else {
            Backend::CrossCheck
        });
        let uses_volterra = backend == Backend::Volterra || (backend == Backend::CrossCheck && !config.both_lorentzian());
        if uses_volterra {
            volterra.check(&config.chain).map_err(|e| CliError::config("StepError", e.to_string()))?;
        }
        if backend == Backend::Pseudomode && !config.both_lorentzian() {
            return Err(CliError::config("KindError", "pseudomode backend needs Lorentzian reservoirs"));
        }

        let output = self.output.clone().unwrap_or_default();
        let out_dir = overrides.out_dir.clone().or(output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
        let stem = output.stem.clone().unwrap_or_else(|| "trajectory".to_string());

        let reservoirs = if r1 == r2 {
            Reservoirs { both: Some(ReservoirConfig::inlined(&r1)), left: None, right: None }
        } else {
            Reservoirs { both: None, left: Some(ReservoirConfig::inlined(&r1)), right: Some(ReservoirConfig::inlined(&r2)) }
        };
        let canonical = RunConfig {
            chain: self.chain,
            reservoirs,
            initial: self.initial.clone(),
            grid: self.grid,
            backend: Some(backend),
            inversion: Some(InversionConfig {
                method: Some(match plan.method {
                    Method::FourierEuler => MethodName::FourierEuler,
                    Method::FixedTalbot => MethodName::Talbot,
                }),
                contour_shift: Some(plan.contour_shift),
                n_terms: Some(plan.n_terms),
                euler_depth: Some(plan.euler_depth),
                target_tol: Some(plan.target_tol),
            }),
            volterra: Some(VolterraSettings {
                dt: Some(volterra.dt),
                scheme: Some(match volterra.scheme {
                    Scheme::PredictorCorrector2 => SchemeName::Pc2,
                    Scheme::Trapezoid => SchemeName::Trapezoid,
                }),
            }),
            output: Some(OutputConfig { dir: None, stem: Some(stem.clone()) }),
            metadata: None,
        };
        Ok(Resolved { config, grid, backend, plan, volterra, out_dir, stem, canonical })
    }
}
