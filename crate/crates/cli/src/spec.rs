//! Experiment configuration: the TOML schema, named input states and the
//! compiled-in presets.

use std::f64::consts::PI;
use std::path::Path;

use polardd::cavity::{CavityConfig, Layout};
use polardd::engine::{suggested_order, EvolutionConfig, Method, PhaseDistribution, DEFAULT_SPHERE_POINTS};
use polardd::io::{GEOMETRIC_ROUND_TRIP_NS, ROUND_TRIP_NS};
use polardd::jones::{BlochVector, JonesVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One experiment. Every field that affects the output is explicit here, so
/// the copy echoed into a run manifest replays the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Free-text note on which experiment the configuration reproduces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirrors: Option<String>,
    pub layout: String,
    /// Noise delay in radians; generic layouts only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub phi0: f64,
    pub sigma_phi: f64,
    pub n_max: usize,
    #[serde(default)]
    pub half_cycles: bool,
    #[serde(default)]
    pub inputs: Vec<InputSpec>,
    /// Noise delays for `sweep-theta`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thetas: Vec<f64>,
    #[serde(default = "default_sphere_points")]
    pub sphere_points: usize,
    #[serde(default)]
    pub method: MethodSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_sphere_points() -> usize {
    DEFAULT_SPHERE_POINTS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSpec {
    /// One of H, V, D, A, R, L, E.
    Named(String),
    Bloch {
        bloch: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodSpec {
    /// Gauss-Hermite rule; the order is picked from the layout and `n_max`
    /// when left out.
    Quadrature {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order: Option<usize>,
    },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for MethodSpec {
    fn default() -> Self {
        MethodSpec::Quadrature { order: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TimeAxis {
    /// 6.80 ns per round trip, the measured peak spacing.
    #[default]
    Measured,
    /// 2.01 m / c per round trip.
    Geometric,
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub time_axis: TimeAxis,
    /// Overrides the time axis spacing when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns_per_round_trip: Option<f64>,
}

impl OutputSpec {
    pub fn ns_per_round_trip(&self) -> Option<f64> {
        self.ns_per_round_trip.or(match self.time_axis {
            TimeAxis::Measured => Some(ROUND_TRIP_NS),
            TimeAxis::Geometric => Some(GEOMETRIC_ROUND_TRIP_NS),
            TimeAxis::None => None,
        })
    }
}

/// A labelled pure input state.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedInput {
    pub label: String,
    pub bloch: BlochVector,
}

/// Bloch vector of a named state. E is the equal-weight V, A, R direction.
pub fn named_state(name: &str) -> Option<BlochVector> {
    let j = match name {
        "H" => JonesVector::horizontal(),
        "V" => JonesVector::vertical(),
        "D" => JonesVector::diagonal(),
        "A" => JonesVector::antidiagonal(),
        "R" => JonesVector::right(),
        "L" => JonesVector::left(),
        "E" => {
            let c = 1.0 / 3f64.sqrt();
            return Some(BlochVector::new(-c, c, -c));
        }
        _ => return None,
    };
    Some(j.bloch())
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentSpec {
    pub fn layout(&self) -> Result<Layout, CliError> {
        Ok(self.layout.parse::<Layout>()?)
    }

    /// Cavity with `theta` replacing the configured noise delay.
    pub fn cavity_at(&self, theta: Option<f64>) -> Result<CavityConfig, CliError> {
        let layout = self.layout()?;
        if layout.uses_theta() {
            let t = theta
                .or(self.theta)
                .ok_or_else(|| config_err(format!("layout {layout} needs theta")))?;
            Ok(CavityConfig::generic(layout, t)?)
        } else {
            Ok(CavityConfig::fixed(layout)?)
        }
    }

    pub fn cavity(&self) -> Result<CavityConfig, CliError> {
        self.cavity_at(None)
    }

    pub fn dist(&self) -> Result<PhaseDistribution, CliError> {
        Ok(PhaseDistribution::new(self.phi0, self.sigma_phi)?)
    }

    pub fn evolution(&self) -> Result<EvolutionConfig, CliError> {
        let method = match self.method {
            MethodSpec::Quadrature { order: Some(order) } => Method::Quadrature { order },
            MethodSpec::Quadrature { order: None } => {
                return Err(config_err("quadrature order was not resolved"));
            }
            MethodSpec::MonteCarlo { samples, seed } => Method::MonteCarlo { samples, seed },
        };
        Ok(EvolutionConfig::new(self.n_max, method)?.with_half_cycles(self.half_cycles))
    }

    pub fn seed(&self) -> Option<u64> {
        match self.method {
            MethodSpec::MonteCarlo { seed, .. } => Some(seed),
            MethodSpec::Quadrature { .. } => None,
        }
    }

    pub fn named_inputs(&self) -> Result<Vec<NamedInput>, CliError> {
        let mut out: Vec<NamedInput> = Vec::new();
        for (k, input) in self.inputs.iter().enumerate() {
            let (label, bloch) = match input {
                InputSpec::Named(name) => {
                    let b = named_state(name)
                        .ok_or_else(|| config_err(format!("unknown input state {name:?}, expected one of H V D A R L E")))?;
                    (name.clone(), b)
                }
                InputSpec::Bloch { bloch, label } => {
                    let b = BlochVector::new(bloch[0], bloch[1], bloch[2]);
                    if (b.norm() - 1.0).abs() > 1e-6 {
                        return Err(config_err(format!(
                            "input {bloch:?} is not a pure state (norm {})",
                            b.norm()
                        )));
                    }
                    let b = b.normalized().ok_or_else(|| config_err("zero input vector"))?;
                    (label.clone().unwrap_or_else(|| format!("input{k}")), b)
                }
            };
            if !valid_label(&label) {
                return Err(config_err(format!("input label {label:?} must be alphanumeric, '-' or '_'")));
            }
            if out.iter().any(|i| i.label == label) {
                return Err(config_err(format!("duplicate input label {label:?}")));
            }
            out.push(NamedInput { label, bloch });
        }
        Ok(out)
    }

    /// Checks the whole spec and fills in the quadrature order, so that the
    /// result is self-contained.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        if !valid_label(&self.name) {
            return Err(config_err(format!("name {:?} must be non-empty alphanumeric, '-' or '_'", self.name)));
        }
        let cfg = self.cavity()?;
        if !cfg.layout().uses_theta() && self.theta.is_some() {
            return Err(config_err(format!("layout {} takes no theta", cfg.layout())));
        }
        let dist = self.dist()?;
        if let MethodSpec::Quadrature { order: None } = self.method {
            let order = self
                .thetas
                .iter()
                .map(|&t| self.cavity_at(Some(t)))
                .collect::<Result<Vec<_>, _>>()?
                .iter()
                .chain(std::iter::once(&cfg))
                .map(|c| suggested_order(c, &dist, self.n_max.max(1)))
                .max()
                .unwrap_or_default();
            self.method = MethodSpec::Quadrature { order: Some(order) };
        }
        self.evolution()?;
        self.named_inputs()?;
        if self.sphere_points < 16 {
            return Err(config_err("sphere_points must be at least 16"));
        }
        if let Some(ns) = self.output.ns_per_round_trip {
            if !(ns.is_finite() && ns > 0.0) {
                return Err(config_err("ns_per_round_trip must be positive"));
            }
        }
        Ok(self)
    }
}

fn valid_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Reads a spec from a config file. A run manifest is accepted too; its
/// `[spec]` table is used.
pub fn load_config(path: &Path) -> Result<ExperimentSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let spec = match table.get("spec") {
        Some(toml::Value::Table(t)) => t.clone(),
        Some(_) => return Err(config_err(format!("{}: `spec` must be a table", path.display()))),
        None => table,
    };
    spec.try_into()
        .map_err(|e| config_err(format!("{}: {e}", path.display())))
}

pub struct Preset {
    pub name: &'static str,
    pub mirrors: &'static str,
    build: fn() -> ExperimentSpec,
}

impl Preset {
    pub fn spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            mirrors: Some(self.mirrors.to_string()),
            ..(self.build)()
        }
    }
}

const SIGMA_PHI: f64 = 0.0839;
const PHI0: f64 = -0.2182;

fn base(name: &str, layout: Layout, inputs: &[&str], n_max: usize) -> ExperimentSpec {
    ExperimentSpec {
        name: name.to_string(),
        mirrors: None,
        layout: layout.name().to_string(),
        theta: None,
        phi0: PHI0,
        sigma_phi: SIGMA_PHI,
        n_max,
        half_cycles: false,
        inputs: inputs.iter().map(|s| InputSpec::Named(s.to_string())).collect(),
        thetas: Vec::new(),
        sphere_points: DEFAULT_SPHERE_POINTS,
        method: MethodSpec::default(),
        output: OutputSpec::default(),
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "stokes",
        mirrors: "Stokes parameters versus round trips in the compensated cavity, inputs H, D, R",
        build: || base("stokes", Layout::ZCompensated, &["H", "D", "R"], 40),
    },
    Preset {
        name: "bare",
        mirrors: "purity and fidelity versus round trips in the bare cavity",
        build: || base("bare", Layout::Bare, &["H", "D", "R"], 30),
    },
    Preset {
        name: "z-compensated",
        mirrors: "purity and fidelity versus round trips with the Z flip compensated",
        build: || base("z-compensated", Layout::ZCompensated, &["H", "D", "R"], 30),
    },
    Preset {
        name: "pauli",
        mirrors: "Pauli group decoupling, purity and fidelity versus double round trips",
        build: || base("pauli", Layout::PauliGroup, &["H", "D", "R"], 20),
    },
    Preset {
        name: "carr-purcell",
        mirrors: "Carr-Purcell decoupling, purity and fidelity versus double round trips",
        build: || base("carr-purcell", Layout::CarrPurcell, &["H", "D", "R"], 20),
    },
    Preset {
        name: "elliptical",
        mirrors: "elliptical input E under generic noise for several noise delays, without control",
        build: || ExperimentSpec {
            theta: Some(PI / 4.0),
            thetas: vec![PI / 8.0, PI / 4.0, PI / 2.0],
            ..base("elliptical", Layout::GenericFree, &["E"], 20)
        },
    },
    Preset {
        name: "sphere-average",
        mirrors: "sphere-averaged purity and fidelity versus double round trips for several noise delays, with control",
        build: || ExperimentSpec {
            theta: Some(PI / 2.0),
            thetas: vec![0.0, PI / 8.0, PI / 4.0, PI / 2.0],
            ..base("sphere-average", Layout::GenericBB, &[], 20)
        },
    },
];

pub fn preset(name: &str) -> Result<ExperimentSpec, CliError> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .map(Preset::spec)
        .ok_or_else(|| {
            let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
            config_err(format!("unknown preset {name:?}, available: {}", names.join(", ")))
        })
}
