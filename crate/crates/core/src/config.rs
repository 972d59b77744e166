//! Experiment configuration files.
//!
//! TOML with one section per concern: `[system]` (array and region),
//! `[estimation]` (pilot phase), `[monte_carlo]`, `[design]`, `[experiment]`
//! and optional per-experiment sections. Unknown keys are rejected. Every
//! missing or invalid key is reported at once.
//!
//! ```toml
//! [system]
//! carrier_frequency_hz = 300e9
//! num_antennas = 129
//! spacing_m = 0.005
//! # ...
//!
//! [estimation]
//! grid_sizes = ["4M", "10M"]
//! ```

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::DesignSearch;
use crate::evaluation::MonteCarloSettings;
use crate::geometry::{ArrayGeometry, RegionOfInterest};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

/// A grid-size target, either absolute or a multiple of the antenna count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GridSize {
    Absolute(usize),
    TimesAntennas(usize),
}

impl GridSize {
    pub fn resolve(self, num_antennas: usize) -> usize {
        match self {
            GridSize::Absolute(q) => q,
            GridSize::TimesAntennas(f) => f * num_antennas,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some(f) = s.strip_suffix('M') {
            let f = f.trim();
            if f.is_empty() {
                return Some(GridSize::TimesAntennas(1));
            }
            return f.parse().ok().map(GridSize::TimesAntennas);
        }
        s.parse().ok().map(GridSize::Absolute)
    }
}

impl fmt::Display for GridSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSize::Absolute(q) => write!(f, "{q}"),
            GridSize::TimesAntennas(k) => write!(f, "{k}M"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawGridSize {
    Int(i64),
    Text(String),
}

impl RawGridSize {
    fn parse(&self) -> Option<GridSize> {
        match self {
            RawGridSize::Int(q) if *q > 0 => Some(GridSize::Absolute(*q as usize)),
            RawGridSize::Int(_) => None,
            RawGridSize::Text(s) => GridSize::parse(s),
        }
    }

    fn describe(&self) -> String {
        match self {
            RawGridSize::Int(q) => q.to_string(),
            RawGridSize::Text(s) => format!("\"{s}\""),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSystem {
    carrier_frequency_hz: Option<f64>,
    bandwidth_hz: Option<f64>,
    aperture_m: Option<f64>,
    num_antennas: Option<i64>,
    spacing_m: Option<f64>,
    height_m: Option<f64>,
    rho_min_m: Option<f64>,
    rho_max_m: Option<f64>,
    phi_min_rad: Option<f64>,
    phi_max_rad: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawEstimation {
    pilot_length: Option<i64>,
    rf_chains: Option<i64>,
    power_dbm: Option<f64>,
    noise_dbm: Option<f64>,
    users: Option<i64>,
    ue_distribution: Option<String>,
    grid_sizes: Option<Vec<RawGridSize>>,
    pilot_slots: Option<i64>,
    sparsity: Option<i64>,
    whiten: Option<bool>,
    coherence_block: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawMonteCarlo {
    drops: Option<i64>,
    realizations: Option<i64>,
    nmse_opt_samples: Option<i64>,
    seed: Option<u64>,
    powers_dbm: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExplicitDesign {
    grid_size: RawGridSize,
    level_curves: i64,
    beta: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawDesign {
    tolerance: Option<f64>,
    coarse_candidates: Option<i64>,
    refine_top: Option<i64>,
    refine_points: Option<i64>,
    curve_range: Option<Vec<i64>>,
    max_distance_m: Option<f64>,
    proposed: Option<Vec<RawExplicitDesign>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawExperiment {
    name: Option<String>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawCoherenceSweep {
    beta_min: Option<f64>,
    beta_max: Option<f64>,
    points: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawLevelCurves {
    gammas: Option<Vec<f64>>,
    points_per_curve: Option<i64>,
    heights_m: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawGridExport {
    level_curves: Option<i64>,
    beta: Option<f64>,
    baseline_betas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawDesignSurface {
    curve_counts: Option<Vec<i64>>,
    betas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    system: Option<RawSystem>,
    estimation: Option<RawEstimation>,
    monte_carlo: Option<RawMonteCarlo>,
    design: Option<RawDesign>,
    experiment: Option<RawExperiment>,
    coherence_sweep: Option<RawCoherenceSweep>,
    level_curves: Option<RawLevelCurves>,
    grid_export: Option<RawGridExport>,
    design_surface: Option<RawDesignSurface>,
}

/// Array, carrier and region of interest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub aperture_m: Option<f64>,
    pub num_antennas: usize,
    pub spacing_m: f64,
    pub height_m: f64,
    pub rho_min_m: f64,
    pub rho_max_m: f64,
    pub phi_min_rad: f64,
    pub phi_max_rad: f64,
    /// `c / f_c`.
    pub wavelength_m: f64,
}

/// Pilot phase and estimator settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationConfig {
    /// Pilot length `τ_p`.
    pub pilot_length: usize,
    pub rf_chains: usize,
    /// Nominal transmit power for single-power runs.
    pub power_dbm: f64,
    pub noise_dbm: f64,
    pub users: usize,
    pub ue_distribution: String,
    pub grid_sizes: Vec<GridSize>,
    /// Combining slots per user; defaults to `τ_p`.
    pub pilot_slots: usize,
    pub sparsity: usize,
    pub whiten: bool,
    /// Coherence block `τ_c`; sets the SE prelog `(τ_c − τ_p)/τ_c`.
    pub coherence_block: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloConfig {
    pub drops: usize,
    pub realizations: usize,
    pub nmse_opt_samples: usize,
    pub seed: u64,
    pub powers_dbm: Vec<f64>,
}

/// A proposed grid fixed by hand instead of searched.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplicitDesign {
    pub grid_size: GridSize,
    pub level_curves: usize,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignConfig {
    pub tolerance: f64,
    pub coarse_candidates: usize,
    pub refine_top: usize,
    pub refine_points: usize,
    pub curve_range: Option<(usize, usize)>,
    pub max_distance_m: Option<f64>,
    pub proposed: Vec<ExplicitDesign>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSection {
    pub name: Option<String>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceSweepConfig {
    pub beta_min: f64,
    pub beta_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCurvesConfig {
    /// Level-curve values `g`.
    pub gammas: Vec<f64>,
    pub points_per_curve: usize,
    pub heights_m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridExportConfig {
    pub level_curves: usize,
    pub beta: f64,
    pub baseline_betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSurfaceConfig {
    pub curve_counts: Vec<usize>,
    pub betas: Vec<f64>,
}

/// A fully validated configuration with defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub estimation: EstimationConfig,
    pub monte_carlo: MonteCarloConfig,
    pub design: DesignConfig,
    pub experiment: ExperimentSection,
    pub coherence_sweep: CoherenceSweepConfig,
    pub level_curves: LevelCurvesConfig,
    pub grid_export: GridExportConfig,
    pub design_surface: DesignSurfaceConfig,
    /// Non-fatal consistency findings.
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text).map_err(|e| match e {
        ConfigError::Parse { message, .. } => ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Parses configuration text; `Parse` errors carry an empty path.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: PathBuf::new(),
        message: e.to_string(),
    })?;
    let cfg = Validator::default().run(raw)?;
    for w in &cfg.warnings {
        log::warn!("{w}");
    }
    Ok(cfg)
}

#[derive(Default)]
struct Validator {
    errors: Vec<String>,
    warnings: Vec<String>,
}

impl Validator {
    fn required<T>(&mut self, v: Option<T>, key: &str) -> Option<T> {
        if v.is_none() {
            self.errors.push(format!("missing key `{key}`"));
        }
        v
    }

    fn count(&mut self, v: Option<i64>, key: &str, min: i64) -> Option<usize> {
        match v {
            Some(x) if x >= min => Some(x as usize),
            Some(x) => {
                self.errors
                    .push(format!("`{key}` must be ≥ {min}, got {x}"));
                None
            }
            None => None,
        }
    }

    fn positive(&mut self, v: Option<f64>, key: &str) -> Option<f64> {
        match v {
            Some(x) if x > 0.0 && x.is_finite() => Some(x),
            Some(x) => {
                self.errors
                    .push(format!("`{key}` must be positive and finite, got {x}"));
                None
            }
            None => None,
        }
    }

    fn finite(&mut self, v: Option<f64>, key: &str) -> Option<f64> {
        match v {
            Some(x) if x.is_finite() => Some(x),
            Some(x) => {
                self.errors.push(format!("`{key}` must be finite, got {x}"));
                None
            }
            None => None,
        }
    }

    fn run(mut self, raw: RawConfig) -> Result<ExperimentConfig, ConfigError> {
        let s = raw.system.unwrap_or_default();
        let fc = self.required(s.carrier_frequency_hz, "system.carrier_frequency_hz");
        let fc = self.positive(fc, "system.carrier_frequency_hz");
        let bw = self.required(s.bandwidth_hz, "system.bandwidth_hz");
        let bw = self.positive(bw, "system.bandwidth_hz");
        let aperture = self.positive(s.aperture_m, "system.aperture_m");
        let m = self.required(s.num_antennas, "system.num_antennas");
        let m = self.count(m, "system.num_antennas", 1);
        let spacing = self.required(s.spacing_m, "system.spacing_m");
        let spacing = self.positive(spacing, "system.spacing_m");
        let height = self.required(s.height_m, "system.height_m");
        let height = self.finite(height, "system.height_m");
        if let Some(h) = height.filter(|h| *h < 0.0) {
            self.errors
                .push(format!("`system.height_m` must be ≥ 0, got {h}"));
        }
        let rho_min = self.required(s.rho_min_m, "system.rho_min_m");
        let rho_min = self.positive(rho_min, "system.rho_min_m");
        let rho_max = self.required(s.rho_max_m, "system.rho_max_m");
        let rho_max = self.positive(rho_max, "system.rho_max_m");
        let phi_min = self.required(s.phi_min_rad, "system.phi_min_rad");
        let phi_min = self.finite(phi_min, "system.phi_min_rad");
        let phi_max = self.required(s.phi_max_rad, "system.phi_max_rad");
        let phi_max = self.finite(phi_max, "system.phi_max_rad");
        if let (Some(a), Some(b)) = (rho_min, rho_max) {
            if a >= b {
                self.errors
                    .push(format!("need rho_min_m < rho_max_m, got {a} ≥ {b}"));
            }
        }
        if let (Some(a), Some(b)) = (phi_min, phi_max) {
            if !(a >= -FRAC_PI_2 - 1e-12 && a < b && b <= FRAC_PI_2 + 1e-12) {
                self.errors.push(format!(
                    "need −π/2 ≤ phi_min_rad < phi_max_rad ≤ π/2, got [{a}, {b}]"
                ));
            }
        }
        let wavelength = fc.map(|f| SPEED_OF_LIGHT / f);
        if let (Some(d), Some(l)) = (spacing, wavelength) {
            if ((d / l) / 5.0 - 1.0).abs() > 0.01 {
                self.warnings.push(format!(
                    "spacing {d} m is {:.3} wavelengths, expected 5",
                    d / l
                ));
            }
        }
        if let (Some(a), Some(d), Some(m)) = (aperture, spacing, m) {
            let expect = (m as f64 - 1.0) * d;
            if (a - expect).abs() > 0.01 * expect.max(1e-12) {
                self.warnings
                    .push(format!("aperture_m = {a} but (M−1)·spacing = {expect}"));
            }
        }

        let e = raw.estimation.unwrap_or_default();
        let tau_p = self.required(e.pilot_length, "estimation.pilot_length");
        let tau_p = self.count(tau_p, "estimation.pilot_length", 1);
        let n_rf = self.required(e.rf_chains, "estimation.rf_chains");
        let n_rf = self.count(n_rf, "estimation.rf_chains", 1);
        let power = self.required(e.power_dbm, "estimation.power_dbm");
        let power = self.finite(power, "estimation.power_dbm");
        let noise = self.required(e.noise_dbm, "estimation.noise_dbm");
        let noise = self.finite(noise, "estimation.noise_dbm");
        let users = self.required(e.users, "estimation.users");
        let users = self.count(users, "estimation.users", 1);
        let dist = e.ue_distribution.unwrap_or_else(|| "uniform-area".into());
        if dist != "uniform-area" {
            self.errors.push(format!(
                "`estimation.ue_distribution` must be \"uniform-area\", got \"{dist}\""
            ));
        }
        let raw_sizes = self
            .required(e.grid_sizes, "estimation.grid_sizes")
            .unwrap_or_default();
        let mut grid_sizes = Vec::new();
        for r in &raw_sizes {
            match r.parse() {
                Some(q) => grid_sizes.push(q),
                None => self.errors.push(format!(
                    "`estimation.grid_sizes`: cannot read {} as a grid size",
                    r.describe()
                )),
            }
        }
        let slots = self
            .count(e.pilot_slots, "estimation.pilot_slots", 1)
            .or(tau_p);
        let sparsity = self
            .count(e.sparsity, "estimation.sparsity", 1)
            .unwrap_or(1);
        if sparsity > 5 {
            self.errors
                .push(format!("`estimation.sparsity` must be ≤ 5, got {sparsity}"));
        }
        if let (Some(t), Some(r)) = (slots, n_rf) {
            if sparsity > t * r {
                self.errors.push(format!(
                    "`estimation.sparsity` {sparsity} exceeds the {} measurements",
                    t * r
                ));
            }
        }
        let coherence_block = self.count(e.coherence_block, "estimation.coherence_block", 1);
        if let (Some(tc), Some(tp)) = (coherence_block, tau_p) {
            if tc <= tp {
                self.errors.push(format!(
                    "`estimation.coherence_block` ({tc}) must exceed pilot_length ({tp})"
                ));
            }
        }

        let mc = raw.monte_carlo.unwrap_or_default();
        let drops = self.count(mc.drops, "monte_carlo.drops", 0).unwrap_or(100);
        let realizations = self
            .count(mc.realizations, "monte_carlo.realizations", 1)
            .unwrap_or(50);
        let samples = self
            .count(mc.nmse_opt_samples, "monte_carlo.nmse_opt_samples", 1)
            .unwrap_or(2000);
        let powers = mc
            .powers_dbm
            .unwrap_or_else(|| MonteCarloSettings::default().powers_dbm);
        if powers.is_empty() || powers.iter().any(|p| !p.is_finite()) {
            self.errors
                .push("`monte_carlo.powers_dbm` must be a non-empty list of finite values".into());
        }

        let d = raw.design.unwrap_or_default();
        let tolerance = d.tolerance.unwrap_or(0.01);
        if !(tolerance > 0.0 && tolerance < 1.0) {
            self.errors.push(format!(
                "`design.tolerance` must lie in (0, 1), got {tolerance}"
            ));
        }
        let coarse = self
            .count(d.coarse_candidates, "design.coarse_candidates", 1)
            .unwrap_or(64);
        let refine_top = self
            .count(d.refine_top, "design.refine_top", 0)
            .unwrap_or(3);
        let refine_points = self
            .count(d.refine_points, "design.refine_points", 0)
            .unwrap_or(12);
        let curve_range = match d.curve_range.as_deref() {
            None => None,
            Some([lo, hi]) if *lo >= 1 && lo <= hi => Some((*lo as usize, *hi as usize)),
            Some(other) => {
                self.errors.push(format!(
                    "`design.curve_range` must be [lo, hi] with 1 ≤ lo ≤ hi, got {other:?}"
                ));
                None
            }
        };
        let max_distance = self.positive(d.max_distance_m, "design.max_distance_m");
        if let (Some(r0), Some(h)) = (max_distance, height) {
            if r0 <= h {
                self.errors.push(format!(
                    "`design.max_distance_m` ({r0}) must exceed the height ({h})"
                ));
            }
        }
        let mut proposed = Vec::new();
        for (i, p) in d.proposed.unwrap_or_default().iter().enumerate() {
            let size = p.grid_size.parse();
            if size.is_none() {
                self.errors.push(format!(
                    "`design.proposed[{i}].grid_size` is not a grid size"
                ));
            }
            if p.level_curves < 1 {
                self.errors
                    .push(format!("`design.proposed[{i}].level_curves` must be ≥ 1"));
            }
            if !(p.beta > 0.0 && p.beta.is_finite()) {
                self.errors
                    .push(format!("`design.proposed[{i}].beta` must be positive"));
            }
            if let Some(grid_size) = size {
                proposed.push(ExplicitDesign {
                    grid_size,
                    level_curves: p.level_curves.max(1) as usize,
                    beta: p.beta,
                });
            }
        }

        let x = raw.experiment.unwrap_or_default();

        let cs = raw.coherence_sweep.unwrap_or_default();
        let coherence_sweep = CoherenceSweepConfig {
            beta_min: self
                .positive(cs.beta_min, "coherence_sweep.beta_min")
                .unwrap_or(0.5),
            beta_max: self
                .positive(cs.beta_max, "coherence_sweep.beta_max")
                .unwrap_or(3.0),
            points: self
                .count(cs.points, "coherence_sweep.points", 2)
                .unwrap_or(26),
        };
        if coherence_sweep.beta_min >= coherence_sweep.beta_max {
            self.errors
                .push("need coherence_sweep.beta_min < beta_max".into());
        }

        let lc = raw.level_curves.unwrap_or_default();
        let heights = lc
            .heights_m
            .unwrap_or_else(|| vec![0.0, height.unwrap_or(0.0)]);
        if heights.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            self.errors
                .push("`level_curves.heights_m` must be finite and ≥ 0".into());
        }
        let gammas = lc
            .gammas
            .unwrap_or_else(|| vec![-0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6]);
        if gammas.is_empty() || gammas.iter().any(|g| !(g.abs() <= 1.0)) {
            self.errors
                .push("`level_curves.gammas` must be a non-empty list within [−1, 1]".into());
        }
        let level_curves = LevelCurvesConfig {
            gammas,
            points_per_curve: self
                .count(lc.points_per_curve, "level_curves.points_per_curve", 2)
                .unwrap_or(200),
            heights_m: heights,
        };

        let ge = raw.grid_export.unwrap_or_default();
        let baseline_betas = ge.baseline_betas.unwrap_or_else(|| vec![2.5, 1.56]);
        if baseline_betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            self.errors
                .push("`grid_export.baseline_betas` must be positive".into());
        }
        let grid_export = GridExportConfig {
            level_curves: self
                .count(ge.level_curves, "grid_export.level_curves", 1)
                .unwrap_or(9),
            beta: self.positive(ge.beta, "grid_export.beta").unwrap_or(0.57),
            baseline_betas,
        };

        let ds = raw.design_surface.unwrap_or_default();
        let curve_counts = match ds.curve_counts {
            Some(v) if v.iter().all(|&c| c >= 1) && !v.is_empty() => {
                v.into_iter().map(|c| c as usize).collect()
            }
            Some(_) => {
                self.errors.push(
                    "`design_surface.curve_counts` must be a non-empty list of counts ≥ 1".into(),
                );
                Vec::new()
            }
            None => Vec::new(),
        };
        let betas = ds.betas.unwrap_or_default();
        if betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            self.errors
                .push("`design_surface.betas` must be positive".into());
        }

        if !self.errors.is_empty() {
            return Err(ConfigError::Invalid(self.errors));
        }
        let (Some(fc), Some(bw), Some(m), Some(spacing), Some(height)) =
            (fc, bw, m, spacing, height)
        else {
            unreachable!("missing keys are reported above")
        };
        let (Some(rho_min), Some(rho_max), Some(phi_min), Some(phi_max)) =
            (rho_min, rho_max, phi_min, phi_max)
        else {
            unreachable!("missing keys are reported above")
        };
        let (Some(tau_p), Some(n_rf), Some(power), Some(noise), Some(users), Some(slots)) =
            (tau_p, n_rf, power, noise, users, slots)
        else {
            unreachable!("missing keys are reported above")
        };
        Ok(ExperimentConfig {
            system: SystemConfig {
                carrier_frequency_hz: fc,
                bandwidth_hz: bw,
                aperture_m: aperture,
                num_antennas: m,
                spacing_m: spacing,
                height_m: height,
                rho_min_m: rho_min,
                rho_max_m: rho_max,
                phi_min_rad: phi_min,
                phi_max_rad: phi_max,
                wavelength_m: SPEED_OF_LIGHT / fc,
            },
            estimation: EstimationConfig {
                pilot_length: tau_p,
                rf_chains: n_rf,
                power_dbm: power,
                noise_dbm: noise,
                users,
                ue_distribution: dist,
                grid_sizes,
                pilot_slots: slots,
                sparsity,
                whiten: e.whiten.unwrap_or(false),
                coherence_block,
            },
            monte_carlo: MonteCarloConfig {
                drops,
                realizations,
                nmse_opt_samples: samples,
                seed: mc.seed.unwrap_or(0),
                powers_dbm: powers,
            },
            design: DesignConfig {
                tolerance,
                coarse_candidates: coarse,
                refine_top,
                refine_points,
                curve_range,
                max_distance_m: max_distance,
                proposed,
            },
            experiment: ExperimentSection {
                name: x.name,
                output_dir: x.output_dir,
            },
            coherence_sweep,
            level_curves,
            grid_export,
            design_surface: DesignSurfaceConfig {
                curve_counts,
                betas,
            },
            warnings: self.warnings,
        })
    }
}

impl ExperimentConfig {
    pub fn geometry(&self) -> crate::Result<ArrayGeometry> {
        let s = &self.system;
        ArrayGeometry::new(s.num_antennas, s.spacing_m, s.height_m, s.wavelength_m)
    }

    pub fn region(&self) -> crate::Result<RegionOfInterest> {
        let s = &self.system;
        RegionOfInterest::new(s.rho_min_m, s.rho_max_m, s.phi_min_rad, s.phi_max_rad)
    }

    /// Grid-size targets in points.
    pub fn grid_sizes(&self) -> Vec<usize> {
        self.estimation
            .grid_sizes
            .iter()
            .map(|q| q.resolve(self.system.num_antennas))
            .collect()
    }

    /// `(τ_c − τ_p)/τ_c` when a coherence block is configured, else 1.
    pub fn prelog(&self) -> f64 {
        match self.estimation.coherence_block {
            Some(tc) => (tc - self.estimation.pilot_length) as f64 / tc as f64,
            None => 1.0,
        }
    }

    pub fn monte_carlo_settings(&self) -> MonteCarloSettings {
        MonteCarloSettings {
            drops: self.monte_carlo.drops,
            realizations: self.monte_carlo.realizations,
            powers_dbm: self.monte_carlo.powers_dbm.clone(),
            users: self.estimation.users,
            rf_chains: self.estimation.rf_chains,
            pilot_slots: self.estimation.pilot_slots,
            noise_dbm: self.estimation.noise_dbm,
            sparsity: self.estimation.sparsity,
            prelog: self.prelog(),
            whiten: self.estimation.whiten,
            perfect_csi: false,
            seed: self.monte_carlo.seed,
        }
    }

    pub fn design_search(&self) -> DesignSearch {
        DesignSearch {
            curve_range: self.design.curve_range,
            coarse_candidates: self.design.coarse_candidates,
            refine_top: self.design.refine_top,
            refine_points: self.design.refine_points,
            tolerance: self.design.tolerance,
        }
    }

    /// Hand-fixed proposed design for grid size `q`, if configured.
    pub fn explicit_design(&self, q: usize) -> Option<&ExplicitDesign> {
        self.design
            .proposed
            .iter()
            .find(|d| d.grid_size.resolve(self.system.num_antennas) == q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const REFERENCE: &str = include_str!("../configs/reference.toml");

    #[test]
    fn reference_file_values() {
        let c = parse_config_str(REFERENCE).unwrap();
        assert_eq!(c.system.num_antennas, 129);
        assert_eq!(c.system.height_m, 15.0);
        assert_eq!(c.estimation.users, 10);
        assert_eq!(c.estimation.rf_chains, 10);
        assert_eq!(c.estimation.pilot_length, 10);
        assert_eq!(c.estimation.noise_dbm, -86.0);
        assert_eq!(c.estimation.power_dbm, 15.0);
        assert_eq!(c.grid_sizes(), vec![516, 1290]);
        assert!((c.system.spacing_m / c.system.wavelength_m - 5.0).abs() < 0.01);
        assert!(c.warnings.is_empty(), "{:?}", c.warnings);
        let g = c.geometry().unwrap();
        assert!((g.aperture() - 0.64).abs() < 1e-12);
        c.region().unwrap();
    }

    #[test]
    fn grid_size_forms() {
        assert_eq!(GridSize::parse("4M").unwrap().resolve(129), 516);
        assert_eq!(GridSize::parse("10M").unwrap().resolve(129), 1290);
        assert_eq!(GridSize::parse("M").unwrap().resolve(129), 129);
        assert_eq!(GridSize::parse("777").unwrap().resolve(129), 777);
        assert!(GridSize::parse("4N").is_none());
        assert_eq!(GridSize::TimesAntennas(4).to_string(), "4M");
    }

    #[test]
    fn missing_keys_are_all_named() {
        let text = REFERENCE
            .lines()
            .filter(|l| !l.starts_with("rho_max_m") && !l.starts_with("users"))
            .collect::<Vec<_>>()
            .join("\n");
        match parse_config_str(&text) {
            Err(ConfigError::Invalid(v)) => {
                assert!(v.iter().any(|e| e.contains("system.rho_max_m")), "{v:?}");
                assert!(v.iter().any(|e| e.contains("estimation.users")), "{v:?}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = format!("{REFERENCE}\n[system_extra]\nfoo = 1\n");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("system_extra"), "{err}");
        let text = REFERENCE.replace("num_antennas = 129", "num_antennas = 129\nnum_antenas = 3");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("num_antenas") && err.contains("line"), "{err}");
    }

    #[test]
    fn invalid_values_are_collected() {
        let text = REFERENCE
            .replace("rho_min_m = 5.0", "rho_min_m = 30.0")
            .replace("rf_chains = 10", "rf_chains = 0");
        match parse_config_str(&text) {
            Err(ConfigError::Invalid(v)) => assert!(v.len() >= 2, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spacing_mismatch_warns() {
        let text = REFERENCE.replace("spacing_m = 0.005", "spacing_m = 0.004");
        let c = parse_config_str(&text).unwrap();
        assert!(c.warnings.iter().any(|w| w.contains("wavelengths")));
    }

    #[test]
    fn derived_settings() {
        let mut c = parse_config_str(REFERENCE).unwrap();
        assert_eq!(c.prelog(), 1.0);
        c.estimation.coherence_block = Some(200);
        assert!((c.prelog() - 0.95).abs() < 1e-15);
        let s = c.monte_carlo_settings();
        assert_eq!(s.pilot_slots, 10);
        assert_eq!(s.powers_dbm.len(), 9);
        assert_eq!(c.explicit_design(516).unwrap().level_curves, 310);
        assert!(c.explicit_design(1000).is_none());
    }
}
