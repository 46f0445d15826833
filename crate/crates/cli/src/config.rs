//! Run configuration: a TOML document with one table per concern. Every
//! field has a default except `kind`; unknown keys are rejected.

use std::fmt;

use serde::{Deserialize, Serialize};

use qsky_core::{Boundary, Integrator, KlReference, StrokeBath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spectrum,
    TopologySweep,
    IrrworkSweep,
    TransitionMatrix,
    Phases,
    EfficiencyCurve,
    OttoCycle,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Spectrum,
        ExperimentKind::TopologySweep,
        ExperimentKind::IrrworkSweep,
        ExperimentKind::TransitionMatrix,
        ExperimentKind::Phases,
        ExperimentKind::EfficiencyCurve,
        ExperimentKind::OttoCycle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::TopologySweep => "topology-sweep",
            ExperimentKind::IrrworkSweep => "irrwork-sweep",
            ExperimentKind::TransitionMatrix => "transition-matrix",
            ExperimentKind::Phases => "phases",
            ExperimentKind::EfficiencyCurve => "efficiency-curve",
            ExperimentKind::OttoCycle => "otto-cycle",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// Evenly spaced points between `start` and `stop`, both exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
    /// When false the grid is the half-open `(start, stop]` with `points`
    /// entries.
    #[serde(default = "yes")]
    pub include_start: bool,
}

fn yes() -> bool {
    true
}

/// A single value, an explicit list, or a generated range.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Grid {
    Value(f64),
    List(Vec<f64>),
    Range(Range),
}

// Dispatch on the TOML shape so that errors inside a range table name the
// offending key instead of "no variant matched".
impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct GridVisitor;

        impl<'de> serde::de::Visitor<'de> for GridVisitor {
            type Value = Grid;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number, a list of numbers or a {start, stop, points} table")
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Grid, E> {
                Ok(Grid::Value(v))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Grid, E> {
                Ok(Grid::Value(v as f64))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Grid, E> {
                Ok(Grid::Value(v as f64))
            }

            fn visit_seq<A: serde::de::SeqAccess<'de>>(self, mut seq: A) -> Result<Grid, A::Error> {
                let mut out = Vec::new();
                while let Some(x) = seq.next_element::<f64>()? {
                    out.push(x);
                }
                Ok(Grid::List(out))
            }

            fn visit_map<A: serde::de::MapAccess<'de>>(self, map: A) -> Result<Grid, A::Error> {
                Range::deserialize(serde::de::value::MapAccessDeserializer::new(map)).map(Grid::Range)
            }
        }

        d.deserialize_any(GridVisitor)
    }
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Value(x) => vec![*x],
            Grid::List(v) => v.clone(),
            Grid::Range(r) => {
                let (first, intervals) = if r.include_start {
                    (0, r.points.saturating_sub(1))
                } else {
                    (1, r.points)
                };
                if intervals == 0 {
                    return vec![r.start; r.points.min(1)];
                }
                (first..first + r.points)
                    .map(|k| {
                        if k == intervals {
                            return r.stop;
                        }
                        let s = k as f64 / intervals as f64;
                        match r.spacing {
                            Spacing::Linear => (1.0 - s) * r.start + s * r.stop,
                            Spacing::Log => r.start * (r.stop / r.start).powf(s),
                        }
                    })
                    .collect()
            }
        }
    }

    fn check(&self, path: &str) -> Result<(), ConfigError> {
        let values = self.values();
        if values.is_empty() {
            return Err(ConfigError::at(path, "grid is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::at(path, "grid values must be finite"));
        }
        if let Grid::Range(r) = self {
            if r.spacing == Spacing::Log && !(r.start > 0.0 && r.stop > 0.0) {
                return Err(ConfigError::at(path, "log spacing needs positive endpoints"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    ClassicalUp,
    None,
}

impl From<BoundaryKind> for Boundary {
    fn from(b: BoundaryKind) -> Self {
        match b {
            BoundaryKind::ClassicalUp => Boundary::ClassicalFerromagneticUp,
            BoundaryKind::None => Boundary::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Quantum region is `n × n`.
    pub n: usize,
    pub delta: Grid,
    /// DMI values for the static experiments.
    pub dmi: Grid,
    pub boundary: BoundaryKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n: 3,
            delta: Grid::List(vec![0.25, 0.51, 0.75]),
            dmi: Grid::Range(Range {
                start: 0.0,
                stop: 2.0,
                points: 41,
                spacing: Spacing::Linear,
                include_start: true,
            }),
            boundary: BoundaryKind::ClassicalUp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub d0: f64,
    /// Quench end points; defaults depend on the experiment.
    pub d1: Option<Grid>,
    pub rates: Vec<f64>,
    /// Initial levels propagated by `transition-matrix` (0 = all).
    pub levels: usize,
    /// Level followed by `phases`.
    pub level: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            d0: 0.0,
            d1: None,
            rates: vec![0.01, 0.05, 0.1, 0.5],
            levels: 8,
            level: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BathChoice {
    Cold,
    Hot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlChoice {
    Equilibrium,
    Propagated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalConfig {
    pub beta: Grid,
    pub t_cold: f64,
    /// Defaults to 40 log-spaced points in `(t_cold, 20]`.
    pub t_hot: Option<Grid>,
    pub skyrmion_count: u32,
    pub stroke4_bath: BathChoice,
    pub kl_reference: KlChoice,
    /// Finite rate for strokes ii and iv of `otto-cycle`; ideal strokes
    /// when absent.
    pub driven_rate: Option<f64>,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        ThermalConfig {
            beta: Grid::Value(0.5),
            t_cold: 0.5,
            t_hot: None,
            skyrmion_count: 1,
            stroke4_bath: BathChoice::Cold,
            kl_reference: KlChoice::Equilibrium,
            driven_rate: None,
        }
    }
}

impl ThermalConfig {
    pub fn stroke4_bath(&self) -> StrokeBath {
        match self.stroke4_bath {
            BathChoice::Cold => StrokeBath::Cold,
            BathChoice::Hot => StrokeBath::Hot,
        }
    }

    pub fn kl_reference(&self) -> KlReference {
        match self.kl_reference {
            KlChoice::Equilibrium => KlReference::Equilibrium,
            KlChoice::Propagated => KlReference::Propagated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorChoice {
    Midpoint,
    CommutatorFree4,
}

impl From<IntegratorChoice> for Integrator {
    fn from(i: IntegratorChoice) -> Self {
        match i {
            IntegratorChoice::Midpoint => Integrator::Midpoint,
            IntegratorChoice::CommutatorFree4 => Integrator::CommutatorFree4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericConfig {
    pub max_spins: usize,
    /// Largest dimension diagonalized densely; larger spectra use Lanczos.
    pub dense_cap: usize,
    /// Levels requested from Lanczos beyond the dense cap.
    pub lowest_k: usize,
    pub residual_tol: f64,
    pub orthonormality_tol: f64,
    pub cluster_tol: f64,
    pub moment_floor: f64,
    pub min_retained_weight: f64,
    pub initial_steps: usize,
    pub max_halvings: usize,
    pub step_tol: f64,
    pub global_tol: f64,
    pub chunk_columns: usize,
    pub integrator: IntegratorChoice,
    pub gap_floor: f64,
    pub phase_grid: usize,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig {
            max_spins: qsky_core::DEFAULT_MAX_QUANTUM_SPINS,
            dense_cap: 4096,
            lowest_k: 32,
            residual_tol: 1e-8,
            orthonormality_tol: 1e-10,
            cluster_tol: 1e-10,
            moment_floor: qsky_core::DEFAULT_MOMENT_FLOOR,
            min_retained_weight: 0.999,
            initial_steps: 2000,
            max_halvings: 5,
            step_tol: 1e-10,
            global_tol: 1e-6,
            chunk_columns: 32,
            integrator: IntegratorChoice::Midpoint,
            gap_floor: 1e-8,
            phase_grid: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "qsky-out".into(),
            formats: vec!["csv".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub thermal: ThermalConfig,
    #[serde(default)]
    pub numeric: NumericConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    /// Dotted key path, empty for document-level errors.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: &str, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Parses, fills experiment-dependent defaults and validates.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = toml::Deserializer::new(text);
    let mut config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.into_inner().message().trim().to_string();
        ConfigError {
            path: if path == "." { String::new() } else { path },
            message,
        }
    })?;
    config.fill_defaults();
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    /// Defaults for every block with the experiment-dependent fields
    /// filled in.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            kind,
            model: ModelConfig::default(),
            protocol: ProtocolConfig::default(),
            thermal: ThermalConfig::default(),
            numeric: NumericConfig::default(),
            output: OutputConfig::default(),
        };
        c.fill_defaults();
        c
    }

    fn fill_defaults(&mut self) {
        if self.protocol.d1.is_none() {
            self.protocol.d1 = Some(match self.kind {
                ExperimentKind::IrrworkSweep => Grid::Range(Range {
                    start: 0.1,
                    stop: 2.0,
                    points: 20,
                    spacing: Spacing::Linear,
                    include_start: true,
                }),
                ExperimentKind::EfficiencyCurve | ExperimentKind::OttoCycle => Grid::Value(2.0),
                _ => Grid::Value(0.4),
            });
        }
        if self.thermal.t_hot.is_none() {
            self.thermal.t_hot = Some(Grid::Range(Range {
                start: self.thermal.t_cold,
                stop: 20.0,
                points: 40,
                spacing: Spacing::Log,
                include_start: false,
            }));
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn d1_grid(&self) -> Vec<f64> {
        self.protocol.d1.as_ref().map(Grid::values).unwrap_or_default()
    }

    pub fn t_hot_grid(&self) -> Vec<f64> {
        self.thermal.t_hot.as_ref().map(Grid::values).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if m.n == 0 {
            return Err(ConfigError::at("model.n", "must be at least 1"));
        }
        if m.n * m.n > self.numeric.max_spins {
            return Err(ConfigError::at(
                "model.n",
                format!(
                    "{} quantum spins exceed numeric.max_spins = {}",
                    m.n * m.n,
                    self.numeric.max_spins
                ),
            ));
        }
        m.delta.check("model.delta")?;
        if m.delta.values().iter().any(|d| *d < 0.0) {
            return Err(ConfigError::at("model.delta", "anisotropy must be non-negative"));
        }
        m.dmi.check("model.dmi")?;

        let p = &self.protocol;
        if !p.d0.is_finite() {
            return Err(ConfigError::at("protocol.d0", "must be finite"));
        }
        match &p.d1 {
            Some(g) => g.check("protocol.d1")?,
            None => return Err(ConfigError::at("protocol.d1", "missing")),
        }
        if p.rates.is_empty() {
            return Err(ConfigError::at("protocol.rates", "grid is empty"));
        }
        if let Some(bad) = p.rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(ConfigError::at(
                "protocol.rates",
                format!("rates must be positive, got {bad}"),
            ));
        }

        let t = &self.thermal;
        t.beta.check("thermal.beta")?;
        if t.beta.values().iter().any(|&b| b.is_nan() || b <= 0.0) {
            return Err(ConfigError::at("thermal.beta", "inverse temperatures must be positive"));
        }
        if !(t.t_cold.is_finite() && t.t_cold > 0.0) {
            return Err(ConfigError::at("thermal.t_cold", "must be positive"));
        }
        match &t.t_hot {
            Some(g) => g.check("thermal.t_hot")?,
            None => return Err(ConfigError::at("thermal.t_hot", "missing")),
        }
        if self.t_hot_grid().iter().any(|&th| th.is_nan() || th <= t.t_cold) {
            return Err(ConfigError::at(
                "thermal.t_hot",
                "every hot temperature must exceed t_cold",
            ));
        }
        if t.skyrmion_count == 0 {
            return Err(ConfigError::at("thermal.skyrmion_count", "must be positive"));
        }
        if let Some(r) = t.driven_rate {
            if !(r.is_finite() && r > 0.0) {
                return Err(ConfigError::at("thermal.driven_rate", "must be positive"));
            }
        }

        let n = &self.numeric;
        let positive = [
            ("numeric.residual_tol", n.residual_tol),
            ("numeric.orthonormality_tol", n.orthonormality_tol),
            ("numeric.cluster_tol", n.cluster_tol),
            ("numeric.moment_floor", n.moment_floor),
            ("numeric.step_tol", n.step_tol),
            ("numeric.global_tol", n.global_tol),
            ("numeric.gap_floor", n.gap_floor),
        ];
        for (path, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::at(path, format!("tolerance must be positive, got {v}")));
            }
        }
        if !(n.min_retained_weight > 0.0 && n.min_retained_weight <= 1.0) {
            return Err(ConfigError::at("numeric.min_retained_weight", "must lie in (0, 1]"));
        }
        let counts = [
            ("numeric.dense_cap", n.dense_cap),
            ("numeric.lowest_k", n.lowest_k),
            ("numeric.initial_steps", n.initial_steps),
            ("numeric.chunk_columns", n.chunk_columns),
            ("numeric.phase_grid", n.phase_grid),
        ];
        for (path, v) in counts {
            if v == 0 {
                return Err(ConfigError::at(path, "must be at least 1"));
            }
        }

        if self.output.formats.is_empty() {
            return Err(ConfigError::at("output.formats", "no output format selected"));
        }
        if let Some(f) = self.output.formats.iter().find(|f| f.as_str() != "csv") {
            return Err(ConfigError::at(
                "output.formats",
                format!("unsupported format {f:?} (only \"csv\")"),
            ));
        }
        Ok(())
    }
}
