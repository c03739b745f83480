//! Experiment configuration, end-to-end runs, roughness/angle sweeps and
//! method comparisons, with CSV and JSON outputs.
//!
//! Configs are TOML. Lengths are in wavelengths and angles in degrees:
//!
//! ```toml
//! n = 512
//! dx = 0.125
//! grazing_angle_deg = 10.0
//! outputs = ["trace", "spectrum"]
//!
//! [surface]
//! kind = "gaussian_spectrum"
//! rms_height = 0.2
//! corr_length = 2.0
//! ```

use crate::eigen::{self, EigenBasis, EigenError};
use crate::exec::{self, Execution};
use crate::kernel::{self, Discretization, IncidentField, KernelError, DEFAULT_DENSE_LIMIT};
use crate::linalg::{self, ZERO};
use crate::lr_series::{self, SeriesError, SeriesState};
use crate::shanks::{self, ShanksError, TraceRow, Transform, VectorSequence};
use crate::surface::{self, SurfaceError, SurfaceKind, SurfaceProfile, SurfaceStats};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

/// Residual tolerance for full eigendecompositions, relative to `||B||_F`.
pub const EIGEN_TOL: f64 = 1e-8;

pub const PRESETS: [&str; 4] = ["flat", "convergent", "semiconvergent", "divergent"];

const PRESET_FLAT: &str = r#"
n = 256
grazing_angle_deg = 10.0
max_terms = 10
shanks_order = 0

[surface]
kind = "flat"
rms_height = 0.0
corr_length = 1.0
"#;

const PRESET_CONVERGENT: &str = r#"
n = 512
grazing_angle_deg = 10.0
max_terms = 60
shanks_order = 2
seed = 1

[surface]
kind = "gaussian_spectrum"
rms_height = 0.2
corr_length = 2.0
"#;

const PRESET_SEMICONVERGENT: &str = r#"
n = 256
grazing_angle_deg = 10.0
max_terms = 60
shanks_order = 2
seed = 1

[surface]
kind = "gaussian_spectrum"
rms_height = 0.62
corr_length = 1.0
"#;

const PRESET_DIVERGENT: &str = r#"
n = 256
grazing_angle_deg = 10.0
max_terms = 50
shanks_order = 2
seed = 1

[surface]
kind = "gaussian_spectrum"
rms_height = 0.7
corr_length = 1.0
"#;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Field { field: &'static str, message: String },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Shanks(#[from] ShanksError),
    #[error("the dense reference is unavailable for n = {n} (limit {limit})")]
    NoOracle { n: usize, limit: usize },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// 2 for configuration problems, 1 for I/O, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io { .. } => 1,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Trace,
    Spectrum,
    Field,
    Shanks,
    Eigsub,
    FieldMap,
    Surface,
    Report,
}

impl OutputKind {
    pub fn file_name(self) -> &'static str {
        match self {
            OutputKind::Trace => "trace.csv",
            OutputKind::Spectrum => "spectrum.csv",
            OutputKind::Field => "field.csv",
            OutputKind::Shanks => "shanks.csv",
            OutputKind::Eigsub => "eigsub.csv",
            OutputKind::FieldMap => "field_map.csv",
            OutputKind::Surface => "surface.csv",
            OutputKind::Report => "report.json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub kind: SurfaceKind,
    #[serde(default)]
    pub rms_height: f64,
    #[serde(default = "default_corr")]
    pub corr_length: f64,
    /// Share of the grid taken by the rough patch (embedded surfaces).
    #[serde(default = "default_patch_fraction")]
    pub patch_fraction: f64,
    /// Ramp length on each side of the patch as a share of the grid.
    #[serde(default = "default_ramp_fraction")]
    pub ramp_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMapConfig {
    /// Heights above the highest surface point, in wavelengths.
    #[serde(default = "default_z_levels")]
    pub z_levels: Vec<f64>,
    /// Samples across the central half of the surface.
    #[serde(default = "default_x_samples")]
    pub x_samples: usize,
}

impl Default for FieldMapConfig {
    fn default() -> Self {
        Self {
            z_levels: default_z_levels(),
            x_samples: default_x_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Grid spacing in wavelengths.
    #[serde(default = "default_dx")]
    pub dx: f64,
    pub surface: SurfaceConfig,
    #[serde(default = "default_angle")]
    pub grazing_angle_deg: f64,
    /// Gaussian taper half-width in wavelengths; a quarter of the surface
    /// length when absent.
    #[serde(default)]
    pub taper_width: Option<f64>,
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_shanks_order")]
    pub shanks_order: usize,
    /// Eigencomponents removed before iterating; the dilating count when absent.
    #[serde(default)]
    pub eig_subtract_k: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub outputs: Vec<OutputKind>,
    /// Best residual at or below this counts as converged in sweeps.
    #[serde(default = "default_converged_residual")]
    pub converged_residual: f64,
    /// Full eigendecompositions are skipped above this size.
    #[serde(default = "default_eigen_limit")]
    pub eigen_limit: usize,
    #[serde(default)]
    pub field_map: FieldMapConfig,
}

fn default_corr() -> f64 {
    1.0
}
fn default_patch_fraction() -> f64 {
    0.5
}
fn default_ramp_fraction() -> f64 {
    0.0625
}
fn default_z_levels() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_x_samples() -> usize {
    64
}
fn default_wavelength() -> f64 {
    1.0
}
fn default_n() -> usize {
    1024
}
fn default_dx() -> f64 {
    0.125
}
fn default_angle() -> f64 {
    10.0
}
fn default_max_terms() -> usize {
    60
}
fn default_patience() -> usize {
    lr_series::DEFAULT_PATIENCE
}
fn default_shanks_order() -> usize {
    2
}
fn default_seed() -> u64 {
    1
}
fn default_converged_residual() -> f64 {
    1e-6
}
fn default_eigen_limit() -> usize {
    1024
}

fn field_err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.into(),
    }
}

fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field_err(field, format!("must be a positive finite number, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Option<Self> {
        let text = match name {
            "flat" => PRESET_FLAT,
            "convergent" => PRESET_CONVERGENT,
            "semiconvergent" => PRESET_SEMICONVERGENT,
            "divergent" => PRESET_DIVERGENT,
            _ => return None,
        };
        Some(Self::from_toml_str(text).expect("shipped presets are valid"))
    }

    /// A preset name or a path to a TOML file.
    pub fn load(spec: &str) -> Result<Self, ConfigError> {
        if let Some(cfg) = Self::preset(spec) {
            return Ok(cfg);
        }
        let path = Path::new(spec);
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("wavelength", self.wavelength)?;
        positive("dx", self.dx)?;
        if self.n < 16 || !self.n.is_power_of_two() {
            return Err(field_err("n", format!("must be a power of two >= 16, got {}", self.n)));
        }
        if self.dx > 0.25 {
            return Err(field_err("dx", format!("must be at most 0.25 wavelengths, got {}", self.dx)));
        }
        if !(self.grazing_angle_deg > 0.0 && self.grazing_angle_deg < 90.0) {
            return Err(field_err(
                "grazing_angle_deg",
                format!("must lie in (0, 90), got {}", self.grazing_angle_deg),
            ));
        }
        if let Some(t) = self.taper_width {
            positive("taper_width", t)?;
        }
        if self.max_terms == 0 {
            return Err(field_err("max_terms", "must be at least 1"));
        }
        if let Some(k) = self.eig_subtract_k {
            if k >= self.n {
                return Err(field_err("eig_subtract_k", format!("must be below n = {}", self.n)));
            }
        }
        positive("converged_residual", self.converged_residual)?;
        let s = &self.surface;
        if !(s.rms_height >= 0.0 && s.rms_height.is_finite()) {
            return Err(field_err("surface.rms_height", format!("must be >= 0, got {}", s.rms_height)));
        }
        positive("surface.corr_length", s.corr_length)?;
        if !(s.patch_fraction > 0.0 && s.patch_fraction <= 1.0) {
            return Err(field_err("surface.patch_fraction", "must lie in (0, 1]"));
        }
        if !(s.ramp_fraction >= 0.0 && s.ramp_fraction < 0.5) {
            return Err(field_err("surface.ramp_fraction", "must lie in [0, 0.5)"));
        }
        for z in &self.field_map.z_levels {
            positive("field_map.z_levels", *z)?;
        }
        if self.field_map.x_samples == 0 {
            return Err(field_err("field_map.x_samples", "must be at least 1"));
        }
        self.surface_stats()
            .validate()
            .map_err(|e| field_err("surface", e.to_string()))?;
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn surface_stats(&self) -> SurfaceStats {
        SurfaceStats {
            rms_height: self.surface.rms_height * self.wavelength,
            corr_length: self.surface.corr_length * self.wavelength,
            seed: self.seed,
            kind: self.surface.kind,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Surface, operator and incident field built from a config.
#[derive(Debug, Clone)]
pub struct Problem {
    pub surface: SurfaceProfile,
    pub disc: Discretization,
    pub incident: IncidentField,
}

impl Problem {
    pub fn build(cfg: &ExperimentConfig, exec: Execution) -> Result<Self, HarnessError> {
        let surface = build_surface(cfg)?;
        let k = cfg.wavenumber();
        let disc = Discretization::assemble_with(&surface, k, exec)?;
        let incident = incident_for(cfg, &surface)?;
        Ok(Self {
            surface,
            disc,
            incident,
        })
    }
}

pub fn build_surface(cfg: &ExperimentConfig) -> Result<SurfaceProfile, HarnessError> {
    let n = cfg.n;
    let dx = cfg.dx * cfg.wavelength;
    let stats = cfg.surface_stats();
    let s = match stats.kind {
        SurfaceKind::Flat => surface::flat(n, dx)?,
        SurfaceKind::GaussianSpectrum => {
            surface::generate_gaussian(n, dx, stats.rms_height, stats.corr_length, stats.seed)?
        }
        // amplitude sqrt(2) * rms, period = corr_length
        SurfaceKind::Sinusoid => surface::sinusoid(n, dx, stats.rms_height * 2f64.sqrt(), stats.corr_length, 0.0)?,
        SurfaceKind::EmbeddedPatch => {
            let target = (n as f64 * cfg.surface.patch_fraction) as usize;
            let pn = if target < 16 { 16 } else { 1usize << target.ilog2() };
            let ramp = (n as f64 * cfg.surface.ramp_fraction) as usize;
            let offset = (n.saturating_sub(pn)) / 2;
            let patch = surface::generate_gaussian(pn, dx, stats.rms_height, stats.corr_length, stats.seed)?;
            surface::embed_patch(n, dx, &patch, offset, ramp)?
        }
    };
    Ok(s)
}

fn incident_for(cfg: &ExperimentConfig, s: &SurfaceProfile) -> Result<IncidentField, HarnessError> {
    let taper = cfg
        .taper_width
        .map(|t| t * cfg.wavelength)
        .unwrap_or(cfg.n as f64 * cfg.dx * cfg.wavelength / 4.0);
    Ok(kernel::incident_plane_wave(
        s,
        cfg.wavenumber(),
        cfg.grazing_angle_deg.to_radians(),
        taper,
    )?)
}

/// Writes declared outputs into one directory; undeclared kinds are skipped.
#[derive(Debug, Clone)]
pub struct OutputSink {
    dir: PathBuf,
    declared: BTreeSet<OutputKind>,
}

impl OutputSink {
    pub fn new(dir: impl Into<PathBuf>, declared: impl IntoIterator<Item = OutputKind>) -> Self {
        Self {
            dir: dir.into(),
            declared: declared.into_iter().collect(),
        }
    }

    pub fn declare(&mut self, kind: OutputKind) {
        self.declared.insert(kind);
    }

    pub fn wants(&self, kind: OutputKind) -> bool {
        self.declared.contains(&kind)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Returns the written path, or `None` when `kind` was not declared.
    pub fn write(&self, kind: OutputKind, contents: &str) -> Result<Option<PathBuf>, HarnessError> {
        if !self.wants(kind) {
            return Ok(None);
        }
        let io = |source| HarnessError::Io {
            path: self.dir.clone(),
            source,
        };
        std::fs::create_dir_all(&self.dir).map_err(io)?;
        let path = self.dir.join(kind.file_name());
        std::fs::write(&path, contents).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(Some(path))
    }
}

fn wants(sink: Option<&OutputSink>, kind: OutputKind) -> bool {
    sink.is_some_and(|s| s.wants(kind))
}

fn emit(sink: Option<&OutputSink>, kind: OutputKind, contents: impl FnOnce() -> String) -> Result<(), HarnessError> {
    if let Some(s) = sink {
        if s.wants(kind) {
            s.write(kind, &contents())?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub assembly: f64,
    pub oracle: f64,
    pub series: f64,
    pub eigen: f64,
    pub shanks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub terms_computed: usize,
    pub diverged: bool,
    /// Index chosen by the residual stopping rule.
    pub best_index: usize,
    pub best_residual: f64,
    pub best_error: Option<f64>,
    /// Smallest error over all partial sums.
    pub min_error: Option<f64>,
    pub dilating_count: Option<usize>,
    pub dominant_lambda: Option<ComplexValue>,
    pub eigsub_k: Option<usize>,
    pub eigsub_min_error: Option<f64>,
    pub shanks_min_error: Option<f64>,
    pub timings: Timings,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Equality ignoring timings.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self {
            timings: Timings::default(),
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn min_of(v: &[f64]) -> Option<f64> {
    v.iter().copied().filter(|e| e.is_finite()).reduce(f64::min)
}

/// Everything a run computes, for callers that need more than the report.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub problem: Problem,
    pub series: SeriesState,
    pub oracle: Option<Vec<Complex64>>,
    pub errors: Option<Vec<f64>>,
    pub basis: Option<EigenBasis>,
}

/// End-to-end pipeline: assembly, series with residual stopping, reference
/// solve, spectrum, eigencomponent subtraction and Shanks acceleration.
pub fn run(cfg: &ExperimentConfig, exec: Execution, sink: Option<&OutputSink>) -> Result<RunReport, HarnessError> {
    run_detailed(cfg, exec, sink).map(|(r, _)| r)
}

pub fn run_detailed(
    cfg: &ExperimentConfig,
    exec: Execution,
    sink: Option<&OutputSink>,
) -> Result<(RunReport, RunArtifacts), HarnessError> {
    cfg.validate()?;
    let mut timings = Timings::default();

    let t = Instant::now();
    let problem = Problem::build(cfg, exec)?;
    timings.assembly = secs(t);
    let (disc, psi) = (&problem.disc, &problem.incident.values);

    let t = Instant::now();
    let series = lr_series::iterate(disc, psi, cfg.max_terms)?;
    timings.series = secs(t);
    let best_index = series.stop_index(cfg.patience);
    let best_residual = series.residuals[best_index];

    let t = Instant::now();
    let oracle = if cfg.n <= DEFAULT_DENSE_LIMIT {
        Some(disc.direct_solve(psi)?)
    } else {
        None
    };
    timings.oracle = secs(t);
    let errors = oracle.as_ref().map(|o| lr_series::error_vs_oracle(&series, o));

    let t = Instant::now();
    let basis = if cfg.n <= cfg.eigen_limit {
        Some(eigen::eigen_of_b(disc, EIGEN_TOL)?)
    } else {
        None
    };
    let dominant_lambda = match &basis {
        Some(b) => b.pairs.first().map(|p| p.lambda),
        None => eigen::power_iteration(|v| disc.apply_b(v), psi, 2000, 1e-8)
            .ok()
            .map(|p| p.lambda),
    };
    let dilating_count = basis.as_ref().map(eigen::count_dilating);

    let mut eigsub_k = None;
    let mut eigsub_min_error = None;
    if let Some(b) = &basis {
        let k = cfg.eig_subtract_k.unwrap_or(eigen::count_dilating(b));
        if k > 0 || wants(sink, OutputKind::Eigsub) {
            let curve = eigsub_curve(disc, psi, b, k, cfg.max_terms, oracle.as_deref())?;
            eigsub_k = Some(k);
            eigsub_min_error = min_of(&curve.iter().map(|r| r.error_vs_oracle).collect::<Vec<_>>());
            emit(sink, OutputKind::Eigsub, || shanks::trace_csv(&curve))?;
        }
    }
    timings.eigen = secs(t);

    let t = Instant::now();
    let mut shanks_min_error = None;
    if cfg.shanks_order > 0 && series.len() > 2 * cfg.shanks_order {
        let rows = shanks_rows(disc, psi, &series, Transform::Vector, cfg.shanks_order, oracle.as_deref(), exec)?;
        let last: Vec<f64> = rows
            .iter()
            .filter(|r| r.order == cfg.shanks_order)
            .map(|r| r.error_vs_oracle)
            .collect();
        shanks_min_error = min_of(&last);
        emit(sink, OutputKind::Shanks, || shanks::trace_csv(&rows))?;
    }
    timings.shanks = secs(t);

    emit(sink, OutputKind::Trace, || series.trace_csv(errors.as_deref()))?;
    emit(sink, OutputKind::Surface, || problem.surface.to_csv())?;
    if let Some(b) = &basis {
        emit(sink, OutputKind::Spectrum, || b.spectrum_csv())?;
    }
    emit(sink, OutputKind::Field, || {
        field_csv(problem.surface.x(), &problem.incident.values, &series.partial_sums[best_index])
    })?;
    if wants(sink, OutputKind::FieldMap) {
        let samples = field_map(cfg, &problem, &series.partial_sums[best_index], exec)?;
        emit(sink, OutputKind::FieldMap, || field_map_csv(&samples))?;
    }

    let report = RunReport {
        config: cfg.clone(),
        terms_computed: series.len(),
        diverged: series.diverged,
        best_index,
        best_residual,
        best_error: errors.as_ref().map(|e| e[best_index]),
        min_error: errors.as_deref().and_then(min_of),
        dilating_count,
        dominant_lambda: dominant_lambda.map(Into::into),
        eigsub_k,
        eigsub_min_error,
        shanks_min_error,
        timings,
    };
    emit(sink, OutputKind::Report, || report.to_json())?;
    Ok((
        report,
        RunArtifacts {
            problem,
            series,
            oracle,
            errors,
            basis,
        },
    ))
}

/// `x,re_inc,im_inc,re,im` for the surface solution.
pub fn field_csv(x: &[f64], incident: &[Complex64], field: &[Complex64]) -> String {
    let mut s = String::from("x,re_inc,im_inc,re,im\n");
    for ((x, i), f) in x.iter().zip(incident).zip(field) {
        let _ = writeln!(s, "{x},{},{},{},{}", i.re, i.im, f.re, f.im);
    }
    s
}

/// Series on the field with the leading `k` eigencomponents removed; each
/// partial sum has their exact contribution added back before scoring.
pub fn eigsub_curve(
    disc: &Discretization,
    psi: &[Complex64],
    basis: &EigenBasis,
    k: usize,
    max_terms: usize,
    oracle: Option<&[Complex64]>,
) -> Result<Vec<TraceRow>, HarnessError> {
    let corr = eigen::eigen_correction(disc, psi, basis, k)?;
    let st = match lr_series::iterate(disc, &corr.modified_incident, max_terms) {
        Ok(st) => st,
        // every component was removed
        Err(SeriesError::ZeroIncident) => {
            let r = disc.relative_residual(&corr.exact_part, psi)?;
            let e = oracle.map_or(f64::NAN, |o| linalg::rel_err(&corr.exact_part, o));
            return Ok(vec![TraceRow {
                orig_terms_consumed: 0,
                order: k,
                residual: r,
                error_vs_oracle: e,
            }]);
        }
        Err(e) => return Err(e.into()),
    };
    st.partial_sums
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let full = linalg::add(s, &corr.exact_part);
            Ok(TraceRow {
                orig_terms_consumed: m + 1,
                order: k,
                residual: disc.relative_residual(&full, psi)?,
                error_vs_oracle: oracle.map_or(f64::NAN, |o| linalg::rel_err(&full, o)),
            })
        })
        .collect()
}

/// Trace rows for orders `1..=order` of `transform` applied to the partial
/// sums, indexed by original terms consumed.
pub fn shanks_rows(
    disc: &Discretization,
    psi: &[Complex64],
    series: &SeriesState,
    transform: Transform,
    order: usize,
    oracle: Option<&[Complex64]>,
    exec: Execution,
) -> Result<Vec<TraceRow>, HarnessError> {
    let mut seq = VectorSequence::from_series(series);
    let mut rows = Vec::new();
    for m in 1..=order {
        if seq.len() < 3 {
            break;
        }
        seq = shanks::repeated(transform, &seq, 1, exec)?.0;
        rows.extend(score(disc, psi, seq.items(), m, oracle, exec)?);
    }
    Ok(rows)
}

fn score(
    disc: &Discretization,
    psi: &[Complex64],
    items: &[Vec<Complex64>],
    order: usize,
    oracle: Option<&[Complex64]>,
    exec: Execution,
) -> Result<Vec<TraceRow>, HarnessError> {
    let scored = exec::map_range(exec, items.len(), |j| {
        disc.relative_residual(&items[j], psi).map(|r| TraceRow {
            orig_terms_consumed: shanks::terms_consumed(j, order),
            order,
            residual: r,
            error_vs_oracle: oracle.map_or(f64::NAN, |o| linalg::rel_err(&items[j], o)),
        })
    });
    Ok(scored.into_iter().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Raw,
    Pointwise,
    Vector,
    TwoMode,
    Eigsub,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodCurve {
    pub method: Method,
    pub rows: Vec<TraceRow>,
}

impl MethodCurve {
    pub fn min_error(&self) -> Option<f64> {
        min_of(&self.rows.iter().map(|r| r.error_vs_oracle).collect::<Vec<_>>())
    }

    /// Smallest error among rows consuming at most `terms` original terms.
    pub fn min_error_within(&self, terms: usize) -> Option<f64> {
        min_of(
            &self
                .rows
                .iter()
                .filter(|r| r.orig_terms_consumed <= terms)
                .map(|r| r.error_vs_oracle)
                .collect::<Vec<_>>(),
        )
    }
}

/// `method,order,orig_terms_consumed,residual,error_vs_oracle`
pub fn comparison_csv(curves: &[MethodCurve]) -> String {
    let mut s = String::from("method,order,orig_terms_consumed,residual,error_vs_oracle\n");
    for c in curves {
        let name = serde_json::to_value(c.method).expect("method serializes");
        for r in &c.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:e},{:e}",
                name.as_str().unwrap_or_default(),
                r.order,
                r.orig_terms_consumed,
                r.residual,
                r.error_vs_oracle
            );
        }
    }
    s
}

/// Error curves of raw L-R, pointwise and vector Shanks (orders
/// `1..=shanks_order`, one curve per order) and eigencomponent subtraction.
pub fn compare_methods(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<MethodCurve>, HarnessError> {
    cfg.validate()?;
    if cfg.n > DEFAULT_DENSE_LIMIT {
        return Err(HarnessError::NoOracle {
            n: cfg.n,
            limit: DEFAULT_DENSE_LIMIT,
        });
    }
    let problem = Problem::build(cfg, exec)?;
    let (disc, psi) = (&problem.disc, &problem.incident.values);
    let series = lr_series::iterate(disc, psi, cfg.max_terms)?;
    let oracle = disc.direct_solve(psi)?;
    let errors = lr_series::error_vs_oracle(&series, &oracle);
    let mut curves = vec![MethodCurve {
        method: Method::Raw,
        rows: series
            .residuals
            .iter()
            .zip(&errors)
            .enumerate()
            .map(|(m, (r, e))| TraceRow {
                orig_terms_consumed: m + 1,
                order: 0,
                residual: *r,
                error_vs_oracle: *e,
            })
            .collect(),
    }];
    for (method, transform) in [(Method::Pointwise, Transform::Pointwise), (Method::Vector, Transform::Vector)] {
        let rows = shanks_rows(disc, psi, &series, transform, cfg.shanks_order, Some(&oracle), exec)?;
        for m in 1..=cfg.shanks_order {
            let r: Vec<TraceRow> = rows.iter().filter(|r| r.order == m).copied().collect();
            if !r.is_empty() {
                curves.push(MethodCurve { method, rows: r });
            }
        }
    }
    if cfg.n <= cfg.eigen_limit {
        let basis = eigen::eigen_of_b(disc, EIGEN_TOL)?;
        let k = cfg.eig_subtract_k.unwrap_or(eigen::count_dilating(&basis));
        curves.push(MethodCurve {
            method: Method::Eigsub,
            rows: eigsub_curve(disc, psi, &basis, k, cfg.max_terms, Some(&oracle))?,
        });
    }
    Ok(curves)
}

/// Vector Shanks pass to identify the dominant mode, then the two-mode
/// transform on the same partial sums.
pub fn two_mode_rows(
    disc: &Discretization,
    psi: &[Complex64],
    series: &SeriesState,
    oracle: Option<&[Complex64]>,
    exec: Execution,
) -> Result<(Vec<TraceRow>, shanks::SecondMode), HarnessError> {
    let seq = VectorSequence::from_series(series);
    let (_, diag) = shanks::vector_shanks(&seq)?;
    let items = seq.items();
    // last step whose ratio is usable
    let j = (0..diag.lambdas.len())
        .rev()
        .find(|&j| (diag.lambdas[j] - 1.0).norm() > shanks::RATIO_GUARD && diag.lambdas[j].norm() > 0.0)
        .unwrap_or(0);
    let lambda = diag.lambdas[j];
    // S_k = S + lambda^k v  =>  dS_j = lambda^j (lambda - 1) v
    let denom = lambda.powi(j as i32) * (lambda - 1.0);
    let v = if denom.norm() > 0.0 {
        linalg::scale(&linalg::sub(&items[j + 1], &items[j]), Complex64::new(1.0, 0.0) / denom)
    } else {
        vec![ZERO; seq.dim()]
    };
    let (out, mode) = shanks::two_mode_shanks(&seq, lambda, &v)?;
    let rows = score(disc, psi, out.items(), 1, oracle, exec)?;
    Ok((rows, mode))
}

/// Sample of the field above the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub x: f64,
    pub z: f64,
    pub scattered: Complex64,
    pub total: Complex64,
}

/// Field on `field_map.x_samples` points across the central half of the
/// surface at each configured height (in wavelengths, above `max h`).
/// Returns samples height-major.
pub fn field_map(
    cfg: &ExperimentConfig,
    problem: &Problem,
    solution: &[Complex64],
    exec: Execution,
) -> Result<Vec<FieldSample>, HarnessError> {
    let s = &problem.surface;
    let (x0, len) = (s.x()[0], s.length());
    let nx = cfg.field_map.x_samples;
    let xs: Vec<f64> = (0..nx)
        .map(|i| x0 + len * (0.25 + 0.5 * (i as f64 + 0.5) / nx as f64))
        .collect();
    let top = s.h().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let zs: Vec<f64> = cfg.field_map.z_levels.iter().map(|z| top + z * cfg.wavelength).collect();
    field_map_at(problem, solution, &xs, &zs, exec)
}

pub fn field_map_at(
    problem: &Problem,
    solution: &[Complex64],
    xs: &[f64],
    zs: &[f64],
    exec: Execution,
) -> Result<Vec<FieldSample>, HarnessError> {
    let xc = problem.surface.midpoint();
    let pts: Vec<(f64, f64)> = zs.iter().flat_map(|&z| xs.iter().map(move |&x| (x, z))).collect();
    let out = exec::map_range(exec, pts.len(), |i| {
        let (x, z) = pts[i];
        problem.disc.scattered_field(solution, x, z).map(|hs| FieldSample {
            x,
            z,
            scattered: hs,
            total: hs + kernel::incident_at(&problem.incident, xc, x, z),
        })
    });
    Ok(out.into_iter().collect::<Result<_, _>>()?)
}

/// `x,z,re,im` of the total field.
pub fn field_map_csv(samples: &[FieldSample]) -> String {
    let mut s = String::from("x,z,re,im\n");
    for p in samples {
        let _ = writeln!(s, "{},{},{},{}", p.x, p.z, p.total.re, p.total.im);
    }
    s
}

/// Aggregates over one `(rms_height, angle)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub rms_height: f64,
    pub angle_deg: f64,
    pub ensemble: usize,
    pub mean_dilating: f64,
    pub mean_best_residual: f64,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone, Copy)]
struct MemberOutcome {
    dilating: usize,
    best_residual: f64,
    converged: bool,
}

/// Ensemble statistics over every `(rms, angle)` pair. Member `i` uses seed
/// `base.seed + i`, so the surfaces are shared across angles and only the
/// incident field changes.
pub fn sweep(
    base: &ExperimentConfig,
    rms_heights: &[f64],
    angles_deg: &[f64],
    ensemble: usize,
    exec: Execution,
) -> Result<Vec<SweepCell>, HarnessError> {
    base.validate()?;
    if rms_heights.is_empty() || angles_deg.is_empty() || ensemble == 0 {
        return Err(ConfigError::Field {
            field: "sweep",
            message: "rms list, angle list and ensemble size must be nonempty".into(),
        }
        .into());
    }
    if base.n > base.eigen_limit {
        return Err(field_err("n", format!("sweeps need n <= eigen_limit = {}", base.eigen_limit)).into());
    }
    let mut configs = Vec::with_capacity(rms_heights.len() * angles_deg.len());
    for &rms in rms_heights {
        for &angle in angles_deg {
            let mut c = base.clone();
            c.surface.rms_height = rms;
            c.grazing_angle_deg = angle;
            if rms == 0.0 {
                c.surface.kind = SurfaceKind::Flat;
            }
            c.validate()?;
            configs.push(c);
        }
    }
    // one task per (rms, member): assemble and decompose once, then every angle
    let tasks: Vec<(usize, u64)> = (0..rms_heights.len())
        .flat_map(|r| (0..ensemble as u64).map(move |m| (r, m)))
        .collect();
    let na = angles_deg.len();
    let results = exec::map_range(exec, tasks.len(), |t| -> Result<Vec<MemberOutcome>, HarnessError> {
        let (r, m) = tasks[t];
        let first = configs[r * na].with_seed(base.seed + m);
        let surface = build_surface(&first)?;
        let disc = Discretization::assemble_with(&surface, first.wavenumber(), Execution::Sequential)?;
        let basis = eigen::eigen_of_b(&disc, EIGEN_TOL)?;
        let dilating = eigen::count_dilating(&basis);
        (0..na)
            .map(|a| {
                let cfg = configs[r * na + a].with_seed(base.seed + m);
                let inc = incident_for(&cfg, &surface)?;
                let st = lr_series::iterate(&disc, &inc.values, cfg.max_terms)?;
                let best_residual = st.residuals[st.stop_index(cfg.patience)];
                Ok(MemberOutcome {
                    dilating,
                    best_residual,
                    converged: best_residual <= cfg.converged_residual,
                })
            })
            .collect()
    });
    let results: Vec<Vec<MemberOutcome>> = results.into_iter().collect::<Result<_, _>>()?;
    let mut cells = Vec::with_capacity(configs.len());
    for (r, &rms) in rms_heights.iter().enumerate() {
        for (a, &angle) in angles_deg.iter().enumerate() {
            let members: Vec<MemberOutcome> = (0..ensemble).map(|m| results[r * ensemble + m][a]).collect();
            let nf = ensemble as f64;
            cells.push(SweepCell {
                rms_height: rms,
                angle_deg: angle,
                ensemble,
                mean_dilating: members.iter().map(|o| o.dilating as f64).sum::<f64>() / nf,
                mean_best_residual: members.iter().map(|o| o.best_residual).sum::<f64>() / nf,
                converged_fraction: members.iter().filter(|o| o.converged).count() as f64 / nf,
            });
        }
    }
    Ok(cells)
}

/// `rms_height,angle_deg,ensemble,mean_dilating,mean_best_residual,converged_fraction`
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut s = String::from("rms_height,angle_deg,ensemble,mean_dilating,mean_best_residual,converged_fraction\n");
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{:e},{}",
            c.rms_height, c.angle_deg, c.ensemble, c.mean_dilating, c.mean_best_residual, c.converged_fraction
        );
    }
    s
}

/// Kendall rank correlation (tau-a).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let p = (x[j] - x[i]) * (y[j] - y[i]);
            s += p.signum() * f64::from(p != 0.0);
        }
    }
    s / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for name in PRESETS {
            let cfg = ExperimentConfig::preset(name).unwrap();
            cfg.validate().unwrap();
        }
        assert!(ExperimentConfig::preset("nope").is_none());
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_toml_str("[surface]\nkind = \"flat\"\n").unwrap();
        assert_eq!((cfg.n, cfg.dx, cfg.wavelength), (1024, 0.125, 1.0));
        assert_eq!(cfg.patience, lr_series::DEFAULT_PATIENCE);
        assert!(cfg.outputs.is_empty());
    }

    #[test]
    fn field_level_errors() {
        let base = "[surface]\nkind = \"gaussian_spectrum\"\nrms_height = 0.1\ncorr_length = 1.0\n";
        let cases = [
            ("n = 100\n", "n"),
            ("grazing_angle_deg = 90.0\n", "grazing_angle_deg"),
            ("grazing_angle_deg = 0.0\n", "grazing_angle_deg"),
            ("wavelength = -1.0\n", "wavelength"),
            ("dx = 0.5\n", "dx"),
            ("taper_width = 0.0\n", "taper_width"),
            ("max_terms = 0\n", "max_terms"),
        ];
        for (line, field) in cases {
            let err = ExperimentConfig::from_toml_str(&format!("{line}{base}")).unwrap_err();
            match err {
                ConfigError::Field { field: f, .. } => assert_eq!(f, field, "{line}"),
                other => panic!("{line}: {other}"),
            }
        }
        let bad = base.replace("0.1", "-0.1");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&bad),
            Err(ConfigError::Field { field: "surface.rms_height", .. })
        ));
        assert!(matches!(
            ExperimentConfig::from_toml_str(&format!("bogus = 1\n{base}")),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ExperimentConfig::preset("divergent").unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn exit_codes() {
        let e: HarnessError = field_err("n", "x").into();
        assert_eq!(e.exit_code(), 2);
        let e: HarnessError = SeriesError::NoTerms.into();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn kendall_cases() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 5.0, 9.0]), 1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]), 4.0 / 6.0);
        assert_eq!(kendall_tau(&[1.0, 2.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn surfaces_for_every_kind() {
        let mut cfg = ExperimentConfig::preset("convergent").unwrap();
        cfg.n = 256;
        for kind in [
            SurfaceKind::Flat,
            SurfaceKind::GaussianSpectrum,
            SurfaceKind::Sinusoid,
            SurfaceKind::EmbeddedPatch,
        ] {
            cfg.surface.kind = kind;
            let s = build_surface(&cfg).unwrap();
            assert_eq!(s.len(), 256);
            assert_eq!(s.is_flat(), kind == SurfaceKind::Flat);
        }
        cfg.surface.kind = SurfaceKind::EmbeddedPatch;
        let s = build_surface(&cfg).unwrap();
        assert_eq!(s.h()[0], 0.0);
        assert_eq!(s.h()[255], 0.0);
    }

    #[test]
    fn sink_skips_undeclared() {
        let dir = tempfile::tempdir().unwrap();
        let sink = OutputSink::new(dir.path(), [OutputKind::Trace]);
        assert!(sink.write(OutputKind::Spectrum, "x").unwrap().is_none());
        let p = sink.write(OutputKind::Trace, "y").unwrap().unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "y");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
