//! Experiment configuration: schema, defaults and validation diagnostics.

use std::fmt;

use delone::calculus::{Term, TlcFunction};
use delone::sets::DeloneSpec;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::Value;

/// A validation failure, located in the config text where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            column: None,
            field: field.into(),
            message: message.into(),
        }
    }

    fn at(mut self, text: &str, offset: usize) -> Self {
        let (l, c) = line_col(text, offset);
        self.line = Some(l);
        self.column = Some(c);
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: ")?,
            (Some(l), None) => write!(f, "line {l}: ")?,
            _ => {}
        }
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "field `{}`: {}", self.field, self.message)
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |k| k + 1) + 1;
    (line, col)
}

/// Byte offset of a borrowed raw value inside the text it was parsed from.
fn offset_of(text: &str, raw: &RawValue) -> usize {
    raw.get().as_ptr() as usize - text.as_ptr() as usize
}

/// Re-bases a serde error raised while parsing `raw` onto the full text.
fn nested_error(text: &str, raw: &RawValue, field: &str, e: serde_json::Error) -> ConfigError {
    let base = offset_of(text, raw);
    let inner = raw.get();
    // serde reports 1-based lines and columns inside the fragment
    let mut off = 0;
    for _ in 1..e.line() {
        off += inner[off..].find('\n').map_or(inner.len() - off, |k| k + 1);
    }
    off += e.column().saturating_sub(1);
    let msg = e.to_string();
    let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
    ConfigError::field(field, msg).at(text, base + off.min(inner.len()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Generate,
    Metric,
    Frequencies,
    Diffuse,
    Semigroup,
    Equilibrium,
    Strongfeller,
    Ito,
    Spectrum,
    Evolve,
    KoopmanScan,
    Hodge,
    Liouville,
    Sobolev,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 14] = [
        ExperimentKind::Generate,
        ExperimentKind::Metric,
        ExperimentKind::Frequencies,
        ExperimentKind::Diffuse,
        ExperimentKind::Semigroup,
        ExperimentKind::Equilibrium,
        ExperimentKind::Strongfeller,
        ExperimentKind::Ito,
        ExperimentKind::Spectrum,
        ExperimentKind::Evolve,
        ExperimentKind::KoopmanScan,
        ExperimentKind::Hodge,
        ExperimentKind::Liouville,
        ExperimentKind::Sobolev,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Generate => "generate",
            ExperimentKind::Metric => "metric",
            ExperimentKind::Frequencies => "frequencies",
            ExperimentKind::Diffuse => "diffuse",
            ExperimentKind::Semigroup => "semigroup",
            ExperimentKind::Equilibrium => "equilibrium",
            ExperimentKind::Strongfeller => "strongfeller",
            ExperimentKind::Ito => "ito",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::KoopmanScan => "koopman-scan",
            ExperimentKind::Hodge => "hodge",
            ExperimentKind::Liouville => "liouville",
            ExperimentKind::Sobolev => "sobolev",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ExperimentKind::Generate => "points of a patch and the Delone constants (r, R)",
            ExperimentKind::Metric => "pairwise hull metric and orbit distances of hull points",
            ExperimentKind::Frequencies => "cluster frequencies over growing windows",
            ExperimentKind::Diffuse => "sample paths of the orbit diffusion (stochastic)",
            ExperimentKind::Semigroup => "heat semigroup values by quadrature or Monte Carlo",
            ExperimentKind::Equilibrium => "distance of T_t f from its mean over time",
            ExperimentKind::Strongfeller => "witness that the semigroup is not strong Feller",
            ExperimentKind::Ito => "Itô formula residual (stochastic)",
            ExperimentKind::Spectrum => "eigenvalues and multiplicities of the local Laplacian",
            ExperimentKind::Evolve => "heat or Schrödinger evolution in the product eigenbasis",
            ExperimentKind::KoopmanScan => "Fourier–Bohr amplitudes at candidate frequencies",
            ExperimentKind::Hodge => "orthogonal complement of the gradients in a field space",
            ExperimentKind::Liouville => "kernel of the assembled Dirichlet form",
            ExperimentKind::Sobolev => "Sobolev norms, with optional tlc projections",
        }
    }
}

/// A test function, built against the configured tiling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant {
        value: f64,
    },
    LetterIndicator {
        letter: char,
    },
    /// Profile around the points of the listed cells (all cells when
    /// omitted); a `cos⁴` bump unless `terms` are given.
    Comb {
        level: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cells: Option<Vec<u32>>,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        terms: Option<Vec<Term>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        smoothness: Option<usize>,
    },
    /// The same profile on every tile.
    Tiles {
        terms: Vec<Term>,
        #[serde(default)]
        smoothness: usize,
    },
    Tlc {
        function: TlcFunction,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum RuleSpec {
    Composite { c: f64, panel: f64, order: usize },
    Hermite { order: usize },
}

impl Default for RuleSpec {
    fn default() -> Self {
        match delone::diffusion::Rule::default() {
            delone::diffusion::Rule::Composite { c, panel, order } => RuleSpec::Composite { c, panel, order },
            delone::diffusion::Rule::Hermite { order } => RuleSpec::Hermite { order },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SemigroupMethod {
    #[default]
    Quadrature,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolveKind {
    Heat,
    Schrodinger,
}

fn default_probe() -> f64 {
    50.0
}
fn default_tol() -> f64 {
    1e-9
}
fn default_paths() -> usize {
    100_000
}
fn default_true() -> bool {
    true
}
fn default_two() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateParams {
    #[serde(default)]
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default = "default_probe")]
    pub probe: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricParams {
    pub points: Vec<Value>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyParams {
    pub clusters: Vec<String>,
    pub windows: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffuseParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Value>,
    pub times: Vec<f64>,
    pub paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupParams {
    pub function: FunctionSpec,
    pub times: Vec<f64>,
    #[serde(default)]
    pub points: Vec<Value>,
    #[serde(default)]
    pub method: SemigroupMethod,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub rule: RuleSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumParams {
    pub functions: Vec<FunctionSpec>,
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Value>,
    #[serde(default)]
    pub rule: RuleSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrongFellerParams {
    #[serde(default = "default_one")]
    pub level: usize,
    #[serde(default = "default_inner")]
    pub inner: f64,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_t_start")]
    pub t_start: f64,
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default)]
    pub rule: RuleSpec,
}

fn default_one() -> usize {
    1
}
fn default_inner() -> f64 {
    0.2
}
fn default_depth() -> usize {
    9
}
fn default_t_start() -> f64 {
    1.0
}
fn default_cap() -> usize {
    40
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItoParams {
    pub function: FunctionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Value>,
    pub t: f64,
    pub dt: f64,
    pub paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    pub level: usize,
    pub epsilon: f64,
    pub modes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    pub level: usize,
    pub epsilon: f64,
    pub modes: usize,
    pub kind: EvolveKind,
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<Vec<f64>>>,
    /// `[i, j]`: the basis vector `b_i^C ⊗ b_j^B`, `j` counted from 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KoopmanParams {
    pub function: FunctionSpec,
    pub alphas: Vec<f64>,
    pub window: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HodgeParams {
    pub level: usize,
    pub modes: usize,
    /// Potentials live this many levels finer than the fields.
    #[serde(default = "default_two")]
    pub potential_refinement: usize,
    /// Defaults to `2·modes + 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_modes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiouvilleParams {
    pub level: usize,
    pub modes: usize,
    #[serde(default = "default_true")]
    pub glued: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolevParams {
    pub function: FunctionSpec,
    #[serde(default = "default_two")]
    pub max_order: usize,
    #[serde(default)]
    pub project_levels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Generate(GenerateParams),
    Metric(MetricParams),
    Frequencies(FrequencyParams),
    Diffuse(DiffuseParams),
    Semigroup(SemigroupParams),
    Equilibrium(EquilibriumParams),
    Strongfeller(StrongFellerParams),
    Ito(ItoParams),
    Spectrum(SpectrumParams),
    Evolve(EvolveParams),
    KoopmanScan(KoopmanParams),
    Hodge(HodgeParams),
    Liouville(LiouvilleParams),
    Sobolev(SobolevParams),
}

impl Params {
    fn parse(kind: ExperimentKind, s: &str) -> serde_json::Result<Self> {
        use serde_json::from_str as p;
        Ok(match kind {
            ExperimentKind::Generate => Params::Generate(p(s)?),
            ExperimentKind::Metric => Params::Metric(p(s)?),
            ExperimentKind::Frequencies => Params::Frequencies(p(s)?),
            ExperimentKind::Diffuse => Params::Diffuse(p(s)?),
            ExperimentKind::Semigroup => Params::Semigroup(p(s)?),
            ExperimentKind::Equilibrium => Params::Equilibrium(p(s)?),
            ExperimentKind::Strongfeller => Params::Strongfeller(p(s)?),
            ExperimentKind::Ito => Params::Ito(p(s)?),
            ExperimentKind::Spectrum => Params::Spectrum(p(s)?),
            ExperimentKind::Evolve => Params::Evolve(p(s)?),
            ExperimentKind::KoopmanScan => Params::KoopmanScan(p(s)?),
            ExperimentKind::Hodge => Params::Hodge(p(s)?),
            ExperimentKind::Liouville => Params::Liouville(p(s)?),
            ExperimentKind::Sobolev => Params::Sobolev(p(s)?),
        })
    }

    /// Whether the run draws random numbers and so needs a seed.
    pub fn is_stochastic(&self) -> bool {
        match self {
            Params::Diffuse(_) | Params::Ito(_) => true,
            Params::Semigroup(p) => p.method == SemigroupMethod::MonteCarlo,
            _ => false,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig<'a> {
    #[serde(borrow)]
    spec: &'a RawValue,
    experiment: ExperimentKind,
    #[serde(borrow, default)]
    parameters: Option<&'a RawValue>,
    #[serde(default)]
    seed: Option<u64>,
    output_dir: String,
}

/// A schema-checked configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub spec: DeloneSpec,
    pub experiment: ExperimentKind,
    pub parameters: Params,
    pub seed: Option<u64>,
    pub output_dir: String,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
            ConfigError {
                line: Some(e.line()),
                column: Some(e.column()),
                field: String::new(),
                message: msg,
            }
        })?;
        let spec: DeloneSpec =
            serde_json::from_str(raw.spec.get()).map_err(|e| nested_error(text, raw.spec, "spec", e))?;
        let parameters = match raw.parameters {
            Some(p) => Params::parse(raw.experiment, p.get()).map_err(|e| nested_error(text, p, "parameters", e))?,
            None => Params::parse(raw.experiment, "{}").map_err(|e| {
                ConfigError::field(
                    "parameters",
                    format!("missing: {}", e.to_string().split(" at line ").next().unwrap_or("")),
                )
            })?,
        };
        let mut parameters = parameters;
        if let Params::Hodge(h) = &mut parameters {
            h.potential_modes.get_or_insert(2 * h.modes + 2);
        }
        if parameters.is_stochastic() && raw.seed.is_none() {
            let err = ConfigError::field(
                "seed",
                format!(
                    "a `{}` run draws random numbers and needs a seed",
                    raw.experiment.name()
                ),
            );
            return Err(err.at(text, 0));
        }
        if raw.output_dir.trim().is_empty() {
            return Err(ConfigError::field("output_dir", "must not be empty"));
        }
        Ok(Config {
            spec,
            experiment: raw.experiment,
            parameters,
            seed: raw.seed,
            output_dir: raw.output_dir,
        })
    }
}
