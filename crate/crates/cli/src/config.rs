//! Experiment configuration files.
//!
//! One TOML file per experiment. Every table rejects unknown keys. See the
//! README for the full schema.

use std::fmt;
use std::path::{Path, PathBuf};

use infospec::channel::KrausChannel;
use infospec::spectrum::CrossingCurve;
use infospec::{DensityMatrix, EstimatorConfig, HermitianOperator, SubsystemShape, C64};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.to_string() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Spectrum,
    Compress,
    Mixed,
    Capacity,
    Densecode,
    Verify,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Compress => "compress",
            Self::Mixed => "mixed",
            Self::Capacity => "capacity",
            Self::Densecode => "densecode",
            Self::Verify => "verify",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Experiment id written to every row; defaults to the kind.
    pub name: Option<String>,
    #[serde(default)]
    pub ns: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub estimator: EstimatorSection,
    pub spectrum: Option<SpectrumSection>,
    pub compress: Option<CompressSection>,
    pub mixed: Option<MixedSection>,
    pub capacity: Option<CapacitySection>,
    pub densecode: Option<DensecodeSection>,
    pub verify: Option<VerifySection>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveChoice {
    #[default]
    Mass,
    Excess,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_bisection")]
    pub bisection_steps: u32,
    #[serde(default)]
    pub curve: CurveChoice,
    #[serde(default = "default_true")]
    pub auto_widen: bool,
}

fn default_window() -> [f64; 2] {
    [-4.0, 4.0]
}
fn default_points() -> usize {
    64
}
fn default_epsilon() -> f64 {
    0.01
}
fn default_bisection() -> u32 {
    10
}
fn default_true() -> bool {
    true
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            window: default_window(),
            points: default_points(),
            epsilon: default_epsilon(),
            bisection_steps: default_bisection(),
            curve: CurveChoice::Mass,
            auto_widen: true,
        }
    }
}

impl EstimatorSection {
    pub fn to_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            window: (self.window[0], self.window[1]),
            points: self.points,
            epsilon: self.epsilon,
            bisection_steps: self.bisection_steps,
            curve: match self.curve {
                CurveChoice::Mass => CrossingCurve::Mass,
                CurveChoice::Excess => CrossingCurve::Excess,
            },
            auto_widen: self.auto_widen,
        }
    }
}

/// A state on one system, or a named bipartite preset.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// `diag(p, 1-p)`.
    Qubit { p: f64 },
    Diagonal { probs: Vec<f64> },
    MaximallyMixed { dim: usize },
    Named { name: String },
}

/// Named two-qubit states.
pub const NAMED_STATES: &[&str] = &["bell", "product", "plus-minus-mix"];

impl StateSpec {
    pub fn validate(&self, field: &str) -> Result<(), ConfigError> {
        self.build(field).map(|_| ())
    }

    pub fn build(&self, field: &str) -> Result<DensityMatrix, ConfigError> {
        let state = match self {
            Self::Qubit { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(invalid(format!("{field}.p"), format!("{p} outside [0, 1]")));
                }
                DensityMatrix::diagonal(&[*p, 1.0 - p])
            }
            Self::Diagonal { probs } => DensityMatrix::diagonal(probs),
            Self::MaximallyMixed { dim } => {
                if *dim == 0 {
                    return Err(invalid(format!("{field}.dim"), "must be positive"));
                }
                Ok(DensityMatrix::maximally_mixed(*dim))
            }
            Self::Named { name } => named_state(name).ok_or_else(|| {
                invalid(format!("{field}.name"), format!("unknown preset `{name}`; expected one of {NAMED_STATES:?}"))
            })?,
        };
        state.map_err(|e| invalid(field, e))
    }

    /// Parameter string for the CSV `params` column.
    pub fn label(&self) -> String {
        match self {
            Self::Qubit { p } => format!("qubit(p={p})"),
            Self::Diagonal { probs } => {
                let parts: Vec<String> = probs.iter().map(|p| p.to_string()).collect();
                format!("diag({})", parts.join(" "))
            }
            Self::MaximallyMixed { dim } => format!("mixed(dim={dim})"),
            Self::Named { name } => name.clone(),
        }
    }
}

fn named_state(name: &str) -> Option<infospec::Result<DensityMatrix>> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let c = |x: f64| C64::new(x, 0.0);
    Some(match name {
        "bell" => DensityMatrix::pure(&[c(r), c(0.0), c(0.0), c(r)]),
        "product" => DensityMatrix::diagonal(&[0.7, 0.3])
            .and_then(|a| DensityMatrix::diagonal(&[0.6, 0.4]).map(|b| a.tensor(&b))),
        "plus-minus-mix" => {
            let pp = DensityMatrix::pure(&[c(0.5), c(0.5), c(0.5), c(0.5)]);
            let mm = DensityMatrix::pure(&[c(0.5), c(-0.5), c(-0.5), c(0.5)]);
            pp.and_then(|a| mm.and_then(|b| DensityMatrix::mixture(0.5, &a, &b)))
        }
        _ => return None,
    })
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    Identity,
    Diagonal { values: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Identity { dim: usize },
    BitFlip { f: f64 },
    Dephasing { dim: usize },
    Depolarizing { dim: usize },
}

impl ChannelSpec {
    pub fn build(&self, field: &str) -> Result<KrausChannel, ConfigError> {
        let ch = match self {
            Self::Identity { dim } | Self::Dephasing { dim } | Self::Depolarizing { dim } if *dim == 0 => {
                return Err(invalid(format!("{field}.dim"), "must be positive"))
            }
            Self::Identity { dim } => Ok(KrausChannel::identity(*dim)),
            Self::BitFlip { f } => KrausChannel::bit_flip(*f),
            Self::Dephasing { dim } => Ok(KrausChannel::dephasing(*dim)),
            Self::Depolarizing { dim } => Ok(KrausChannel::completely_depolarizing(*dim)),
        };
        ch.map_err(|e| invalid(field, e))
    }

    pub fn label(&self) -> String {
        match self {
            Self::Identity { dim } => format!("identity(dim={dim})"),
            Self::BitFlip { f } => format!("bit_flip(f={f})"),
            Self::Dephasing { dim } => format!("dephasing(dim={dim})"),
            Self::Depolarizing { dim } => format!("depolarizing(dim={dim})"),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub source: StateSpec,
    /// Divergence reference; entropies are estimated when absent or `identity`.
    pub reference: Option<ReferenceSpec>,
    /// Extra rows sampling the spectral curve on this many γ points of the window.
    #[serde(default)]
    pub curve_points: usize,
}

impl SpectrumSection {
    pub fn reference_operator(&self, dim: usize) -> Result<Option<HermitianOperator>, ConfigError> {
        match &self.reference {
            None | Some(ReferenceSpec::Identity) => Ok(None),
            Some(ReferenceSpec::Diagonal { values }) => {
                if values.len() != dim {
                    return Err(invalid("spectrum.reference.values", format!("expected {dim} entries")));
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(invalid("spectrum.reference.values", "entries must be finite and nonnegative"));
                }
                Ok(Some(HermitianOperator::from_real_diagonal(values)))
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressSection {
    pub source: StateSpec,
    /// Rates relative to the per-letter von Neumann entropy.
    pub rate_offsets: Vec<f64>,
    /// γ grid size for the tightest converse bound.
    #[serde(default = "default_points")]
    pub converse_points: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedSection {
    pub sigma: StateSpec,
    pub omega: StateSpec,
    pub t: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    pub channel: ChannelSpec,
    /// Candidate input distributions over computational basis states.
    pub priors: Vec<Vec<f64>>,
    pub simulate: Option<SimulateSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensecodeSection {
    pub state: StateSpec,
    /// Factor dimensions `[d_A, d_B]`; defaults to two qubits.
    #[serde(default = "default_bipartite")]
    pub shape: [usize; 2],
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub formula_copies: Vec<usize>,
    /// Restarts for the multi-copy entropy search; defaults to `restarts`.
    pub formula_restarts: Option<usize>,
    pub simulate: Option<SimulateSection>,
}

fn default_bipartite() -> [usize; 2] {
    [2, 2]
}
fn default_restarts() -> usize {
    16
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Suite names; see [`crate::verify::SUITES`].
    pub suites: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_string(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn id(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.experiment.as_str().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let est = &self.estimator;
        if !(est.epsilon > 0.0 && est.epsilon < 0.5) {
            return Err(invalid("estimator.epsilon", format!("{} outside (0, 0.5)", est.epsilon)));
        }
        if !(est.window[0] < est.window[1]) || !est.window.iter().all(|w| w.is_finite()) {
            return Err(invalid("estimator.window", "need finite lo < hi"));
        }
        if est.points < 2 {
            return Err(invalid("estimator.points", "need at least 2"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "must be nonempty"));
        }
        let needs_ns = self.experiment != ExperimentKind::Verify;
        if needs_ns && self.ns.is_empty() {
            return Err(invalid("ns", "must be nonempty"));
        }
        if self.ns.contains(&0) {
            return Err(invalid("ns", "block lengths must be positive"));
        }
        let missing = |s: &str| invalid(s, format!("section required for experiment `{}`", self.experiment.as_str()));
        match self.experiment {
            ExperimentKind::Spectrum => {
                let s = self.spectrum.as_ref().ok_or_else(|| missing("spectrum"))?;
                let rho = s.source.build("spectrum.source")?;
                s.reference_operator(rho.dim())?;
            }
            ExperimentKind::Compress => {
                let s = self.compress.as_ref().ok_or_else(|| missing("compress"))?;
                s.source.validate("compress.source")?;
                if s.rate_offsets.is_empty() {
                    return Err(invalid("compress.rate_offsets", "must be nonempty"));
                }
                if s.converse_points < 2 {
                    return Err(invalid("compress.converse_points", "need at least 2"));
                }
            }
            ExperimentKind::Mixed => {
                let s = self.mixed.as_ref().ok_or_else(|| missing("mixed"))?;
                let a = s.sigma.build("mixed.sigma")?;
                let b = s.omega.build("mixed.omega")?;
                if a.dim() != b.dim() {
                    return Err(invalid("mixed.omega", "dimension differs from sigma"));
                }
                if !(s.t > 0.0 && s.t < 1.0) {
                    return Err(invalid("mixed.t", format!("{} outside (0, 1)", s.t)));
                }
            }
            ExperimentKind::Capacity => {
                let s = self.capacity.as_ref().ok_or_else(|| missing("capacity"))?;
                let ch = s.channel.build("capacity.channel")?;
                if s.priors.is_empty() {
                    return Err(invalid("capacity.priors", "need at least one candidate"));
                }
                for (i, p) in s.priors.iter().enumerate() {
                    if p.len() != ch.in_dim() {
                        return Err(invalid(format!("capacity.priors[{i}]"), format!("expected {} entries", ch.in_dim())));
                    }
                    let total: f64 = p.iter().sum();
                    if p.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                        return Err(invalid(format!("capacity.priors[{i}]"), "not a probability vector"));
                    }
                }
                if let Some(sim) = &s.simulate {
                    validate_simulate(sim, "capacity.simulate")?;
                }
            }
            ExperimentKind::Densecode => {
                let s = self.densecode.as_ref().ok_or_else(|| missing("densecode"))?;
                let rho = s.state.build("densecode.state")?;
                SubsystemShape::bipartite(s.shape[0], s.shape[1])
                    .and_then(|sh| sh.check_dim(rho.dim()))
                    .map_err(|e| invalid("densecode.shape", e))?;
                if s.restarts == 0 || s.formula_restarts == Some(0) {
                    return Err(invalid("densecode.restarts", "must be positive"));
                }
                if s.formula_copies.contains(&0) {
                    return Err(invalid("densecode.formula_copies", "copies must be positive"));
                }
                if let Some(sim) = &s.simulate {
                    validate_simulate(sim, "densecode.simulate")?;
                }
            }
            ExperimentKind::Verify => {
                let s = self.verify.as_ref().ok_or_else(|| missing("verify"))?;
                if s.suites.is_empty() {
                    return Err(invalid("verify.suites", "must be nonempty"));
                }
                if let Some(bad) = s.suites.iter().find(|x| !crate::verify::SUITES.contains(&x.as_str())) {
                    return Err(invalid("verify.suites", format!("unknown suite `{bad}`")));
                }
            }
        }
        Ok(())
    }
}

fn validate_simulate(sim: &SimulateSection, field: &str) -> Result<(), ConfigError> {
    if sim.n == 0 {
        return Err(invalid(format!("{field}.n"), "must be positive"));
    }
    if sim.m == 0 {
        return Err(invalid(format!("{field}.m"), "must be positive"));
    }
    if !sim.gamma.is_finite() {
        return Err(invalid(format!("{field}.gamma"), "must be finite"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "spectrum"
ns = [2, 4]
[spectrum]
source = { kind = "qubit", p = 0.25 }
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL, "inline").unwrap();
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.estimator.points, 64);
        assert_eq!(cfg.id(), "spectrum");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}bogus = 1\n");
        let err = ExperimentConfig::from_toml(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn parse_errors_carry_a_line() {
        let err = ExperimentConfig::from_toml("experiment = \"spectrum\"\nns = [1,\n", "inline").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn epsilon_range_is_enforced() {
        let text = format!("{MINIMAL}[estimator]\nepsilon = 0.5\n");
        let err = ExperimentConfig::from_toml(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("estimator.epsilon"), "{err}");
    }

    #[test]
    fn unknown_preset_is_rejected() {
        let text = "experiment = \"densecode\"\nns = [1]\n[densecode]\nstate = { kind = \"named\", name = \"ghz\" }\n";
        let err = ExperimentConfig::from_toml(text, "inline").unwrap_err();
        assert!(err.to_string().contains("densecode.state.name"), "{err}");
    }

    #[test]
    fn missing_section_and_empty_ns() {
        let err = ExperimentConfig::from_toml("experiment = \"mixed\"\nns = [1]\n", "inline").unwrap_err();
        assert!(err.to_string().contains("`mixed`"), "{err}");
        let text = MINIMAL.replace("ns = [2, 4]", "ns = []");
        assert!(ExperimentConfig::from_toml(&text, "inline").is_err());
    }

    #[test]
    fn named_states_are_valid() {
        for name in NAMED_STATES {
            let s = StateSpec::Named { name: name.to_string() }.build("x").unwrap();
            assert_eq!(s.dim(), 4);
        }
    }
}
