//! Run configuration: TOML file plus `key=value` overrides, validated and
//! materialized with every default filled in.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use floquet_core::channels::{well_from_a, Boundary, Variant, WellModel};
use floquet_core::matching::{SolverOptions, StepControl};
use floquet_core::waves::{Parity, TruncationScheme};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Parse(String),
    #[error("override `{0}` is not of the form key=value")]
    BadOverride(String),
    #[error("well: give exactly one of `d` and `A_over_pi`, not both")]
    ConflictingWell,
    #[error("well: one of `d` and `A_over_pi` is required")]
    MissingWellSize,
    #[error("`{key}` must be positive, got {value}")]
    NonPositive { key: &'static str, value: f64 },
    #[error("`{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("no run mode given; valid modes: {}", Mode::list())]
    MissingMode,
    #[error("unknown mode `{0}`; valid modes: {valid}", valid = Mode::list())]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    StaticSpectrum,
    PoleTrace,
    CriticalPoint,
    Scatter,
    ScatterGrid,
    Emission,
    Verify,
    EpScan,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::StaticSpectrum,
        Mode::PoleTrace,
        Mode::CriticalPoint,
        Mode::Scatter,
        Mode::ScatterGrid,
        Mode::Emission,
        Mode::Verify,
        Mode::EpScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::StaticSpectrum => "static-spectrum",
            Mode::PoleTrace => "pole-trace",
            Mode::CriticalPoint => "critical-point",
            Mode::Scatter => "scatter",
            Mode::ScatterGrid => "scatter-grid",
            Mode::Emission => "emission",
            Mode::Verify => "verify",
            Mode::EpScan => "ep-scan",
        }
    }

    fn list() -> String {
        Self::ALL.map(Mode::name).join(", ")
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| ConfigError::UnknownMode(s.to_string()))
    }
}

/// A list of values, either explicit or evenly spaced with both ends included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Linspace { start: f64, stop: f64, count: usize },
}

impl Default for Grid {
    fn default() -> Self {
        Grid::Values(Vec::new())
    }
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::Values(ref v) => v.clone(),
            Grid::Linspace { start, count: 1, .. } => vec![start],
            Grid::Linspace { start, stop, count } => {
                (0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellSection {
    #[serde(rename = "V0")]
    pub v0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(rename = "A_over_pi", default, skip_serializing_if = "Option::is_none")]
    pub a_over_pi: Option<f64>,
    #[serde(default = "default_variant")]
    pub p: u8,
}

fn default_variant() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    /// Target drive amplitude for traces, the value for single solves.
    #[serde(rename = "F2")]
    pub f2: f64,
    /// Where a pole trace starts.
    #[serde(rename = "F2_start")]
    pub f2_start: f64,
    #[serde(rename = "F2_range")]
    pub f2_range: Grid,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self { f2: 0.0, f2_start: 0.0, f2_range: Grid::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationSection {
    pub j_neg: i32,
    pub j_pos: i32,
    pub l_max: usize,
    pub n_t: usize,
    /// Defaults to the sector of the seed state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parity: Option<ParityName>,
}

impl Default for TruncationSection {
    fn default() -> Self {
        Self { j_neg: 6, j_pos: 6, l_max: 8, n_t: 64, parity: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityName {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryName {
    Emission,
    Capture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedSection {
    /// Static state (l, index) used as the zero-drive starting guess.
    pub l: usize,
    pub index: usize,
    /// Explicit [Re, Im] guess; replaces the static state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<[f64; 2]>,
    pub boundary: BoundaryName,
}

impl Default for SeedSection {
    fn default() -> Self {
        Self { l: 0, index: 0, omega: None, boundary: BoundaryName::Emission }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub eps_flux: f64,
    pub eps_threshold: f64,
    pub tol_sv: f64,
    pub tol_k: f64,
    pub tol_c: f64,
    pub max_iter: usize,
    pub step_initial: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Accepted trace points before a trace gives up.
    pub max_points: usize,
    /// Largest relative residual accepted by verify mode.
    pub verify_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverOptions::default();
        let c = StepControl::default();
        Self {
            eps_flux: s.eps_flux,
            eps_threshold: s.eps_threshold,
            tol_sv: s.tol_sv,
            tol_k: s.tol_k,
            tol_c: s.tol_c,
            max_iter: s.max_iter,
            step_initial: c.initial,
            step_min: c.min,
            step_max: c.max,
            max_points: c.max_points,
            verify_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterSection {
    pub omega: f64,
    pub omega_range: Grid,
    /// Incoming channel (j, l1).
    pub input: (i32, usize),
}

impl Default for ScatterSection {
    fn default() -> Self {
        Self { omega: 0.1, omega_range: Grid::default(), input: (0, 0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxisName {
    #[serde(rename = "A_over_pi")]
    AOverPi,
    #[serde(rename = "V0")]
    Depth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Swept parameter; the other well size stays fixed.
    pub axis: SweepAxisName,
    pub range: Grid,
    pub l_max: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { axis: SweepAxisName::AOverPi, range: Grid::default(), l_max: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmissionSection {
    /// Polar angles sampled on [0, pi], ends included.
    pub theta_count: usize,
}

impl Default for EmissionSection {
    fn default() -> Self {
        Self { theta_count: 19 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Sidecar JSON written by an earlier run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<PathBuf>,
    pub points: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { solution: None, points: 20 }
    }
}

/// Everything a run needs, with defaults materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub well: WellSection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub truncation: TruncationSection,
    #[serde(default)]
    pub seed: SeedSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub scatter: ScatterSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub emission: EmissionSection,
    #[serde(default)]
    pub verify: VerifySection,
}

fn default_workers() -> usize {
    1
}

/// Splits `a.b.c=value` and parses the value as a TOML literal, falling back
/// to a bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::BadOverride(spec.to_string()));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().unwrap();
    let mut node = table;
    for p in parents {
        let entry = node.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| ConfigError::BadOverride(format!("`{p}` is not a table in {spec}")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
        cfg.materialize()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, overrides)
    }

    /// Fills the derived well size and parity and checks every invariant.
    fn materialize(&mut self) -> Result<(), ConfigError> {
        if self.well.d.is_some() && self.well.a_over_pi.is_some() {
            return Err(ConfigError::ConflictingWell);
        }
        let well = self.well_model()?;
        self.well.d = Some(well.d);
        self.well.a_over_pi = Some(well.a_over_pi());
        self.truncation.parity.get_or_insert(match Parity::of(0, self.seed.l) {
            Parity::Even => ParityName::Even,
            Parity::Odd => ParityName::Odd,
        });
        let s = &self.solver;
        for (key, value) in [
            ("solver.eps_flux", s.eps_flux),
            ("solver.eps_threshold", s.eps_threshold),
            ("solver.tol_sv", s.tol_sv),
            ("solver.tol_k", s.tol_k),
            ("solver.tol_c", s.tol_c),
            ("solver.step_initial", s.step_initial),
            ("solver.step_min", s.step_min),
            ("solver.step_max", s.step_max),
            ("solver.verify_tol", s.verify_tol),
        ] {
            if value.is_nan() || value <= 0.0 {
                return Err(ConfigError::NonPositive { key, value });
            }
        }
        if s.max_points < 2 {
            return Err(ConfigError::Invalid { key: "solver.max_points", reason: "must be at least 2".into() });
        }
        if s.max_iter == 0 {
            return Err(ConfigError::Invalid { key: "solver.max_iter", reason: "must be at least 1".into() });
        }
        if self.workers == 0 {
            return Err(ConfigError::Invalid { key: "workers", reason: "must be at least 1".into() });
        }
        if self.drive.f2 < 0.0 || self.drive.f2_start < 0.0 {
            return Err(ConfigError::Invalid { key: "drive.F2", reason: "drive amplitudes are nonnegative".into() });
        }
        for (key, grid) in [("drive.F2_range", &self.drive.f2_range), ("scatter.omega_range", &self.scatter.omega_range), ("sweep.range", &self.sweep.range)] {
            if let Grid::Linspace { count, start, stop } = *grid {
                if count >= 2 && start == stop {
                    return Err(ConfigError::Invalid { key, reason: "start equals stop".into() });
                }
            }
        }
        self.truncation_scheme()?;
        Ok(())
    }

    pub fn variant(&self) -> Result<Variant, ConfigError> {
        Variant::from_index(self.well.p)
            .ok_or_else(|| ConfigError::Invalid { key: "well.p", reason: format!("variant {} not in 1..=4", self.well.p) })
    }

    pub fn well_model(&self) -> Result<WellModel, ConfigError> {
        let variant = self.variant()?;
        let w = &self.well;
        let well = match (w.d, w.a_over_pi) {
            (Some(d), _) => WellModel::from_radius(w.v0, d, variant).map_err(invalid_well)?,
            (None, Some(a)) => well_from_a(a, w.v0, variant).map_err(invalid_well)?,
            (None, None) => return Err(ConfigError::MissingWellSize),
        };
        Ok(well)
    }

    pub fn truncation_scheme(&self) -> Result<TruncationScheme, ConfigError> {
        let t = &self.truncation;
        let parity = match t.parity {
            Some(ParityName::Odd) => Parity::Odd,
            Some(ParityName::Even) => Parity::Even,
            None => Parity::of(0, self.seed.l),
        };
        TruncationScheme::new(t.j_neg, t.j_pos, t.l_max, t.n_t, parity)
            .map_err(|e| ConfigError::Invalid { key: "truncation", reason: e.to_string() })
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            eps_flux: s.eps_flux,
            eps_threshold: s.eps_threshold,
            tol_sv: s.tol_sv,
            tol_k: s.tol_k,
            max_iter: s.max_iter,
            tol_c: s.tol_c,
        }
    }

    pub fn step_control(&self) -> StepControl {
        let s = &self.solver;
        StepControl {
            initial: s.step_initial,
            min: s.step_min,
            max: s.step_max,
            max_points: s.max_points,
            ..StepControl::default()
        }
    }

    pub fn boundary(&self) -> Boundary {
        match self.seed.boundary {
            BoundaryName::Emission => Boundary::Emission,
            BoundaryName::Capture => Boundary::Capture,
        }
    }

    /// Same physics and numerics; drive target, output and mode may differ.
    pub fn resumable_from(&self, other: &RunConfig) -> bool {
        self.well == other.well
            && self.truncation == other.truncation
            && self.seed == other.seed
            && self.solver == other.solver
            && self.drive.f2_start == other.drive.f2_start
    }
}

fn invalid_well(e: floquet_core::channels::ChannelError) -> ConfigError {
    ConfigError::Invalid { key: "well", reason: e.to_string() }
}
