//! Named figure-data experiments.
//!
//! Each experiment turns a configuration into one or more CSV tables; the
//! runner writes them into `<out>/<experiment>/` next to a JSON manifest that
//! records the configuration, its hash, the seed, the crate version and the
//! wall time. A directory whose manifest was produced from a different
//! configuration is not overwritten unless forced.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::design::{
    baseline_beta_for_target_q, design_surface, geometric_curve_counts, optimize_design,
    surface_csv, NmseOptEvaluator,
};
use crate::dictionary::grid::level_curve_trace;
use crate::dictionary::{
    assemble_dictionary, build_baseline_grid, build_proposed_grid, fresnel_g, mutual_coherence,
    GridDesignParams, PolarGrid,
};
use crate::evaluation::{run_monte_carlo, DesignUnderTest, Metric, MonteCarloResult};
use crate::geometry::{ArrayGeometry, RegionOfInterest};
use crate::report::{sig9, CsvTable};
use crate::rng::{self, purpose};
use crate::units::to_db;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CoherenceSweep,
    LevelCurves,
    GridExport,
    DesignSurface,
    NmseVsPower,
    SeVsPower,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::CoherenceSweep,
        Experiment::LevelCurves,
        Experiment::GridExport,
        Experiment::DesignSurface,
        Experiment::NmseVsPower,
        Experiment::SeVsPower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::CoherenceSweep => "coherence-sweep",
            Experiment::LevelCurves => "level-curves",
            Experiment::GridExport => "grid-export",
            Experiment::DesignSurface => "design-surface",
            Experiment::NmseVsPower => "nmse-vs-power",
            Experiment::SeVsPower => "se-vs-power",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

/// A named CSV produced by an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub content: String,
}

impl Artifact {
    fn new(file_name: impl Into<String>, table: &CsvTable) -> Self {
        Self {
            file_name: file_name.into(),
            content: table.to_csv_string(),
        }
    }
}

/// A grid chosen for comparison at one target size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChosenDesign {
    pub name: String,
    pub target: usize,
    pub n_curves: usize,
    pub beta: f64,
    pub size: usize,
    /// `NMSE_opt` on the shared sample set, when evaluated.
    pub nmse_opt: Option<f64>,
    /// Whether the proposed pair came from the search or the configuration.
    pub searched: bool,
}

fn geometry_and_region(config: &ExperimentConfig) -> Result<(ArrayGeometry, RegionOfInterest)> {
    Ok((config.geometry()?, config.region()?))
}

fn proposed_params(config: &ExperimentConfig, n_curves: usize, beta: f64) -> GridDesignParams {
    let p = GridDesignParams::new(n_curves, beta);
    match config.design.max_distance_m {
        Some(r0) => p.with_max_distance(r0),
        None => p,
    }
}

/// The shared `NMSE_opt` sample set for a seed.
pub fn nmse_opt_evaluator(config: &ExperimentConfig, seed: u64) -> Result<NmseOptEvaluator> {
    let (geom, roi) = geometry_and_region(config)?;
    let mut r = rng::stream(seed, purpose::NMSE_OPT_SAMPLES, 0);
    NmseOptEvaluator::sample(&geom, &roi, config.monte_carlo.nmse_opt_samples, &mut r)
}

/// Proposed and baseline grids of (approximately) `target` points.
///
/// The proposed pair is taken from the configuration when one is given for
/// this size, otherwise found by [`optimize_design`]. The baseline β is
/// solved so that its grid has the same size.
pub fn designs_for_target(
    config: &ExperimentConfig,
    target: usize,
    evaluator: &NmseOptEvaluator,
) -> Result<[(ChosenDesign, PolarGrid); 2]> {
    let (geom, roi) = geometry_and_region(config)?;
    let tol = config.design.tolerance;
    let (n_curves, beta, searched) = match config.explicit_design(target) {
        Some(d) => (d.level_curves, d.beta, false),
        None => {
            let res = optimize_design(target, &geom, &roi, evaluator, &config.design_search())?;
            (res.best.n_curves, res.best.beta, true)
        }
    };
    let proposed = build_proposed_grid(&proposed_params(config, n_curves, beta), &geom, &roi)?;
    let base_beta = baseline_beta_for_target_q(target, &geom, &roi, tol)?;
    let baseline = build_baseline_grid(base_beta, &geom, &roi)?;
    let chosen =
        |name: &str, grid: &PolarGrid, n: usize, b: f64, searched: bool| -> Result<ChosenDesign> {
            Ok(ChosenDesign {
                name: name.into(),
                target,
                n_curves: n,
                beta: b,
                size: grid.len(),
                nmse_opt: Some(evaluator.evaluate(grid)?),
                searched,
            })
        };
    Ok([
        (
            chosen("proposed", &proposed, n_curves, beta, searched)?,
            proposed,
        ),
        (
            chosen("baseline", &baseline, geom.num_antennas(), base_beta, false)?,
            baseline,
        ),
    ])
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Baseline grid size and normalized coherence over a β sweep.
pub fn coherence_sweep(config: &ExperimentConfig) -> Result<CsvTable> {
    let (geom, roi) = geometry_and_region(config)?;
    let s = &config.coherence_sweep;
    let mut t = CsvTable::new(&["beta", "q", "coherence", "fresnel_abs"]);
    for beta in linspace(s.beta_min, s.beta_max, s.points) {
        let grid = build_baseline_grid(beta, &geom, &roi)?;
        let mu = if grid.len() >= 2 {
            mutual_coherence(&assemble_dictionary(&grid, &geom)?)?
        } else {
            0.0
        };
        t.push(vec![
            sig9(beta),
            grid.len().to_string(),
            sig9(mu),
            sig9(fresnel_g(beta).norm()),
        ]);
    }
    Ok(t)
}

/// Ground-plane traces of the configured level curves for each height.
pub fn level_curves(config: &ExperimentConfig) -> Result<CsvTable> {
    let (_, roi) = geometry_and_region(config)?;
    let lc = &config.level_curves;
    let mut t = CsvTable::new(&["height_m", "k", "gamma", "rho", "phi", "x", "y"]);
    for &b in &lc.heights_m {
        for (k, &g) in lc.gammas.iter().enumerate() {
            for (rho, phi) in
                level_curve_trace(g, b, roi.rho_min(), roi.rho_max(), lc.points_per_curve)
            {
                if phi < roi.phi_min() - 1e-12 || phi > roi.phi_max() + 1e-12 {
                    continue;
                }
                t.push(vec![
                    sig9(b),
                    k.to_string(),
                    sig9(g),
                    sig9(rho),
                    sig9(phi),
                    sig9(rho * phi.cos()),
                    sig9(rho * phi.sin()),
                ]);
            }
        }
    }
    Ok(t)
}

fn beta_tag(beta: f64) -> String {
    format!("{beta:.4}")
        .trim_end_matches('0')
        .trim_end_matches('.')
        .replace('.', "p")
}

/// Grid exports: the configured example grid, the configured baseline βs and
/// the proposed/baseline pairs for every target size.
pub fn grid_export(config: &ExperimentConfig, seed: u64) -> Result<Vec<Artifact>> {
    let (geom, roi) = geometry_and_region(config)?;
    let ge = &config.grid_export;
    let mut out = Vec::new();
    let mut summary = CsvTable::new(&["file", "design", "target", "n_gamma", "beta", "q"]);

    let example = build_proposed_grid(
        &proposed_params(config, ge.level_curves, ge.beta),
        &geom,
        &roi,
    )?;
    let name = format!("proposed_n{}_b{}.csv", ge.level_curves, beta_tag(ge.beta));
    summary.push(vec![
        name.clone(),
        "proposed".into(),
        String::new(),
        ge.level_curves.to_string(),
        sig9(ge.beta),
        example.len().to_string(),
    ]);
    out.push(Artifact::new(name, &example.to_csv()));

    for &beta in &ge.baseline_betas {
        let grid = build_baseline_grid(beta, &geom, &roi)?;
        let name = format!("baseline_b{}.csv", beta_tag(beta));
        summary.push(vec![
            name.clone(),
            "baseline".into(),
            String::new(),
            geom.num_antennas().to_string(),
            sig9(beta),
            grid.len().to_string(),
        ]);
        out.push(Artifact::new(name, &grid.to_csv()));
    }

    let sizes = config.grid_sizes();
    if !sizes.is_empty() {
        let ev = nmse_opt_evaluator(config, seed)?;
        for q in sizes {
            for (chosen, grid) in designs_for_target(config, q, &ev)? {
                let name = format!("{}_q{}.csv", chosen.name, q);
                summary.push(vec![
                    name.clone(),
                    chosen.name.clone(),
                    q.to_string(),
                    chosen.n_curves.to_string(),
                    sig9(chosen.beta),
                    grid.len().to_string(),
                ]);
                out.push(Artifact::new(name, &grid.to_csv()));
            }
        }
    }
    out.insert(0, Artifact::new("grids.csv", &summary));
    Ok(out)
}

/// `NMSE_opt` surface over `(N_Γ, β)` plus the constrained search for every
/// target size.
pub fn design_surface_experiment(config: &ExperimentConfig, seed: u64) -> Result<Vec<Artifact>> {
    let (geom, roi) = geometry_and_region(config)?;
    let ev = nmse_opt_evaluator(config, seed)?;
    let m = geom.num_antennas();
    let counts = if config.design_surface.curve_counts.is_empty() {
        geometric_curve_counts(m, 8 * m, 12)
    } else {
        config.design_surface.curve_counts.clone()
    };
    let betas = if config.design_surface.betas.is_empty() {
        linspace(1.0, 3.0, 11)
    } else {
        config.design_surface.betas.clone()
    };
    let surface = design_surface(&counts, &betas, &geom, &roi, &ev)?;
    let mut out = vec![Artifact::new("design_surface.csv", &surface_csv(&surface))];

    let mut best = CsvTable::new(&[
        "target",
        "n_gamma",
        "beta",
        "q",
        "nmse_opt_db",
        "candidates",
        "skipped",
    ]);
    for q in config.grid_sizes() {
        let res = optimize_design(q, &geom, &roi, &ev, &config.design_search())?;
        let mut trace = CsvTable::new(&["n_gamma", "beta", "q", "nmse_opt_db"]);
        let mut sorted = res.trace.clone();
        sorted.sort_by_key(|c| c.n_curves);
        for c in &sorted {
            trace.push(vec![
                c.n_curves.to_string(),
                sig9(c.beta),
                c.size.to_string(),
                sig9(c.nmse_opt_db()),
            ]);
        }
        out.push(Artifact::new(format!("design_search_q{q}.csv"), &trace));
        best.push(vec![
            q.to_string(),
            res.best.n_curves.to_string(),
            sig9(res.best.beta),
            res.best.size.to_string(),
            sig9(res.nmse_opt_db()),
            res.trace.len().to_string(),
            res.skipped.len().to_string(),
        ]);
    }
    out.push(Artifact::new("design_optimum.csv", &best));
    Ok(out)
}

/// Proposed vs baseline Monte-Carlo at one target size.
pub fn compare_designs(
    config: &ExperimentConfig,
    target: usize,
    seed: u64,
) -> Result<(Vec<ChosenDesign>, MonteCarloResult)> {
    let (geom, roi) = geometry_and_region(config)?;
    let ev = nmse_opt_evaluator(config, seed)?;
    let mut chosen = Vec::new();
    let mut designs = Vec::new();
    for (c, grid) in designs_for_target(config, target, &ev)? {
        designs.push(DesignUnderTest {
            name: c.name.clone(),
            dictionary: assemble_dictionary(&grid, &geom)?,
        });
        chosen.push(c);
    }
    let mut settings = config.monte_carlo_settings();
    settings.seed = seed;
    let result = run_monte_carlo(&geom, &roi, &designs, &settings)?;
    Ok((chosen, result))
}

fn filtered_csv(result: &MonteCarloResult, metrics: &[Metric]) -> String {
    let mut t = CsvTable::new(&["p_dbm", "design", "metric", "value", "stderr"]);
    for c in result.points.iter().filter(|c| metrics.contains(&c.metric)) {
        t.push(vec![
            sig9(c.power_dbm),
            c.design.clone(),
            c.metric.name().to_string(),
            sig9(c.value),
            sig9(c.stderr),
        ]);
    }
    let mut s = t.to_csv_string();
    if result.is_empty() {
        s.push_str("# empty\n");
    }
    s
}

fn designs_table(chosen: &[ChosenDesign]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "target",
        "design",
        "n_gamma",
        "beta",
        "q",
        "nmse_opt_db",
        "searched",
    ]);
    for c in chosen {
        t.push(vec![
            c.target.to_string(),
            c.name.clone(),
            c.n_curves.to_string(),
            sig9(c.beta),
            c.size.to_string(),
            c.nmse_opt.map(|v| sig9(to_db(v))).unwrap_or_default(),
            c.searched.to_string(),
        ]);
    }
    t
}

fn power_sweep(
    config: &ExperimentConfig,
    seed: u64,
    stem: &str,
    metrics: &[Metric],
) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    let mut all_chosen = Vec::new();
    for q in config.grid_sizes() {
        let (chosen, result) = compare_designs(config, q, seed)?;
        for (d, e) in &result.failed_drops {
            log::warn!("{stem} q={q}: drop {d} failed: {e}");
        }
        out.push(Artifact {
            file_name: format!("{stem}_q{q}.csv"),
            content: filtered_csv(&result, metrics),
        });
        all_chosen.extend(chosen);
    }
    out.insert(0, Artifact::new("designs.csv", &designs_table(&all_chosen)));
    Ok(out)
}

/// Produces every CSV of `experiment` without touching the filesystem.
pub fn produce(
    experiment: Experiment,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<Artifact>> {
    Ok(match experiment {
        Experiment::CoherenceSweep => vec![Artifact::new(
            "coherence_sweep.csv",
            &coherence_sweep(config)?,
        )],
        Experiment::LevelCurves => vec![Artifact::new("level_curves.csv", &level_curves(config)?)],
        Experiment::GridExport => grid_export(config, seed)?,
        Experiment::DesignSurface => design_surface_experiment(config, seed)?,
        Experiment::NmseVsPower => power_sweep(
            config,
            seed,
            "nmse_vs_power",
            &[Metric::NmseDb, Metric::NmseOptDb],
        )?,
        Experiment::SeVsPower => power_sweep(
            config,
            seed,
            "se_vs_power",
            &[Metric::SumSeMr, Metric::SumSeMmse],
        )?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub sha256: String,
}

/// Run record written next to the CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: Experiment,
    pub seed: u64,
    pub version: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub wall_time_s: f64,
    pub files: Vec<ManifestFile>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the configuration echo, the seed and the experiment name.
pub fn config_hash(experiment: Experiment, config: &ExperimentConfig, seed: u64) -> Result<String> {
    let echo = serde_json::to_string(config)?;
    Ok(sha256_hex(
        format!("{experiment}\n{seed}\n{echo}").as_bytes(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the configured seed.
    pub seed: Option<u64>,
    /// Overwrite a directory produced by a different configuration.
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub manifest: Manifest,
}

fn check_existing(dir: &Path, hash: &str, force: bool) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    if force || !path.exists() {
        return Ok(());
    }
    let text = std::fs::read_to_string(&path)?;
    let same = serde_json::from_str::<Manifest>(&text)
        .map(|m| m.config_hash == hash)
        .unwrap_or(false);
    if same {
        Ok(())
    } else {
        Err(Error::ManifestMismatch(dir.display().to_string()))
    }
}

/// Runs `experiment` and writes its CSVs and manifest to
/// `<out_dir>/<experiment>/`.
pub fn run_experiment(
    experiment: Experiment,
    config: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<RunSummary> {
    let seed = opts.seed.unwrap_or(config.monte_carlo.seed);
    let hash = config_hash(experiment, config, seed)?;
    let dir = opts.out_dir.join(experiment.name());
    check_existing(&dir, &hash, opts.force)?;

    let start = Instant::now();
    let artifacts = produce(experiment, config, seed)?;
    let wall_time_s = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let mut listed = Vec::new();
    for a in &artifacts {
        let path = dir.join(&a.file_name);
        std::fs::write(&path, a.content.as_bytes())?;
        listed.push(ManifestFile {
            name: a.file_name.clone(),
            sha256: sha256_hex(a.content.as_bytes()),
        });
        files.push(path);
    }
    let manifest = Manifest {
        experiment,
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash,
        config: serde_json::to_value(config)?,
        wall_time_s,
        files: listed,
    };
    std::fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    log::info!(
        "{experiment}: wrote {} files to {} in {wall_time_s:.1} s",
        files.len(),
        dir.display()
    );
    Ok(RunSummary {
        dir,
        files,
        manifest,
    })
}
