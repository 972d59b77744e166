//! Grid construction: level curves, on-curve distance sampling and the two
//! grid builders (level-curve design and the ground-level baseline).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::{ArrayGeometry, RegionOfInterest, ScenePoint};
use crate::report::{sig9, CsvTable};
use crate::{Error, Result};

/// `Γ = √(1 − (b/R)²) · sin φ`.
pub fn gamma(range: f64, phi: f64, height: f64) -> Result<f64> {
    if !(range > 0.0) || range < height {
        return Err(Error::BelowArrayHeight {
            distance: range,
            height,
        });
    }
    let ratio = height / range;
    Ok((1.0 - ratio * ratio).sqrt() * phi.sin())
}

/// Largest `|Γ|` reached inside the RoI, `ρ_max / √(ρ_max² + b²) · sin φ_max`.
///
/// For asymmetric sectors the larger of `|sin φ_min|` and `|sin φ_max|` is used.
pub fn gamma_max(roi: &RegionOfInterest, height: f64) -> f64 {
    let s = roi.phi_max().sin().abs().max(roi.phi_min().sin().abs());
    roi.rho_max() / roi.rho_max().hypot(height) * s
}

/// `Γ_k = Γ_max (2k − N_Γ + 1) / N_Γ`, k = 0 … N_Γ − 1.
pub fn level_curve_values(n_curves: usize, gamma_max: f64) -> Vec<f64> {
    let n = n_curves as f64;
    (0..n_curves)
        .map(|k| gamma_max * (2.0 * k as f64 - n + 1.0) / n)
        .collect()
}

/// Distance scale `Z = (1/2λ)(Mδ/β)²(1 − Γ²)` shared by both designs.
pub fn distance_scale(gamma: f64, beta: f64, geom: &ArrayGeometry) -> f64 {
    let aperture = geom.num_antennas() as f64 * geom.spacing();
    (aperture / beta).powi(2) * (1.0 - gamma * gamma) / (2.0 * geom.wavelength())
}

/// Walks `R_{n,k} = Z R0 / (Z + n R0)` along one level curve, yielding the
/// samples whose ground projection is inside the RoI.
///
/// Samples beyond `ρ_max` are skipped; the walk ends at the first sample that
/// is closer than `ρ_min`, leaves the angular sector or has no real
/// ground-plane solution (`R²(1 − Γ²) < b²`).
#[derive(Debug, Clone)]
pub struct CurveWalk<'a> {
    gamma: f64,
    scale: f64,
    inv_r0: f64,
    height: f64,
    roi: &'a RegionOfInterest,
    n: usize,
    ended: Option<WalkEnd>,
}

/// Why a curve walk stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkEnd {
    LeftRoi,
    BelowHeight,
}

impl<'a> CurveWalk<'a> {
    pub fn new(
        gamma: f64,
        beta: f64,
        max_distance: f64,
        geom: &ArrayGeometry,
        roi: &'a RegionOfInterest,
    ) -> Self {
        Self {
            gamma,
            scale: distance_scale(gamma, beta, geom),
            inv_r0: 1.0 / max_distance,
            height: geom.height(),
            roi,
            n: 0,
            ended: None,
        }
    }

    pub fn end_reason(&self) -> Option<WalkEnd> {
        self.ended
    }
}

impl Iterator for CurveWalk<'_> {
    /// `(n, R_{n,k}, point)`
    type Item = (usize, f64, ScenePoint);

    fn next(&mut self) -> Option<Self::Item> {
        if self.ended.is_some() {
            return None;
        }
        loop {
            let n = self.n;
            self.n += 1;
            // Z/(n + Z/R0) == Z R0/(Z + n R0), finite for R0 = ∞.
            let range = self.scale / (n as f64 + self.scale * self.inv_r0);
            let x2 = range * range * (1.0 - self.gamma * self.gamma) - self.height * self.height;
            if !(x2 >= 0.0) || !(range > 0.0) {
                self.ended = Some(WalkEnd::BelowHeight);
                return None;
            }
            let x = x2.sqrt();
            let y = range * self.gamma;
            if !x.is_finite() || x.hypot(y) > self.roi.rho_max() * (1.0 + 1e-9) {
                continue;
            }
            let point = ScenePoint::new(x, y, -self.height);
            if !self.roi.contains(&point) {
                self.ended = Some(WalkEnd::LeftRoi);
                return None;
            }
            return Some((n, range, point));
        }
    }
}

/// On-curve distances `R_{n,k}` inside the RoI, strictly decreasing.
pub fn distance_samples(
    gamma_k: f64,
    beta: f64,
    max_distance: f64,
    geom: &ArrayGeometry,
    roi: &RegionOfInterest,
) -> Vec<f64> {
    CurveWalk::new(gamma_k, beta, max_distance, geom, roi)
        .map(|(_, r, _)| r)
        .collect()
}

/// Parameters of the level-curve grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDesignParams {
    pub level_curves: usize,
    pub beta: f64,
    /// `R0`; `None` means `√(ρ_max² + b²)`.
    pub max_distance: Option<f64>,
}

impl GridDesignParams {
    pub fn new(level_curves: usize, beta: f64) -> Self {
        Self {
            level_curves,
            beta,
            max_distance: None,
        }
    }

    pub fn with_max_distance(mut self, r0: f64) -> Self {
        self.max_distance = Some(r0);
        self
    }

    pub fn resolved_max_distance(&self, geom: &ArrayGeometry, roi: &RegionOfInterest) -> f64 {
        self.max_distance
            .unwrap_or_else(|| roi.default_max_distance(geom.height()))
    }

    fn validate(&self, geom: &ArrayGeometry) -> Result<()> {
        if self.level_curves == 0 {
            return Err(Error::InvalidParameter(
                "at least one level curve is required".into(),
            ));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if let Some(r0) = self.max_distance {
            if !(r0 > geom.height()) {
                return Err(Error::InvalidParameter(format!(
                    "R0 = {r0} must exceed the array height {}",
                    geom.height()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridDesign {
    LevelCurves(GridDesignParams),
    Baseline { beta: f64 },
}

/// A grid point with the indices and coordinates that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub point: ScenePoint,
    /// Level-curve index (or angular index for the baseline).
    pub curve: usize,
    /// Distance index `n`.
    pub sample: usize,
    /// `Γ_k` (or `Φ_m` for the baseline).
    pub gamma: f64,
    /// Distance from the array centre.
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    points: Vec<GridPoint>,
    design: GridDesign,
    /// Curves (or angles) that contributed no point.
    pub empty_curves: usize,
    /// Curves cut short by `R²(1 − Γ²) < b²`.
    pub cut_below_height: usize,
}

impl PolarGrid {
    pub fn from_points(points: Vec<GridPoint>, design: GridDesign) -> Self {
        Self {
            points,
            design,
            empty_curves: 0,
            cut_below_height: 0,
        }
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn scene_points(&self) -> impl Iterator<Item = &ScenePoint> {
        self.points.iter().map(|g| &g.point)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn design(&self) -> &GridDesign {
        &self.design
    }

    /// Union with another grid's points (provenance kept as-is).
    pub fn extended_with(&self, extra: &[GridPoint]) -> Self {
        let mut out = self.clone();
        out.points.extend_from_slice(extra);
        out
    }

    /// CSV with header `k,n,gamma,R,x,y,z`, 9 significant digits.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["k", "n", "gamma", "R", "x", "y", "z"]);
        for g in &self.points {
            t.push(vec![
                g.curve.to_string(),
                g.sample.to_string(),
                sig9(g.gamma),
                sig9(g.range),
                sig9(g.point.x),
                sig9(g.point.y),
                sig9(g.point.z),
            ]);
        }
        t
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.to_csv().write_to(w)
    }
}

/// Level-curve grid: `N_Γ` curves, distances sampled on each, points at
/// `[√(R²(1 − Γ_k²) − b²), R Γ_k, −b]`.
pub fn build_proposed_grid(
    params: &GridDesignParams,
    geom: &ArrayGeometry,
    roi: &RegionOfInterest,
) -> Result<PolarGrid> {
    params.validate(geom)?;
    let r0 = params.resolved_max_distance(geom, roi);
    let curves = level_curve_values(params.level_curves, gamma_max(roi, geom.height()));
    let mut grid = PolarGrid::from_points(Vec::new(), GridDesign::LevelCurves(*params));
    for (k, &gk) in curves.iter().enumerate() {
        let mut walk = CurveWalk::new(gk, params.beta, r0, geom, roi);
        let before = grid.points.len();
        for (n, range, point) in walk.by_ref() {
            grid.points.push(GridPoint {
                point,
                curve: k,
                sample: n,
                gamma: gk,
                range,
            });
        }
        if grid.points.len() == before {
            grid.empty_curves += 1;
        }
        if walk.end_reason() == Some(WalkEnd::BelowHeight) {
            grid.cut_below_height += 1;
        }
    }
    if grid.empty_curves > 0 || grid.cut_below_height > 0 {
        log::debug!(
            "level-curve grid N={} beta={}: {} empty curves, {} cut below height",
            params.level_curves,
            params.beta,
            grid.empty_curves,
            grid.cut_below_height
        );
    }
    Ok(grid)
}

/// Number of points [`build_proposed_grid`] would produce, without allocating.
pub fn proposed_grid_size(
    params: &GridDesignParams,
    geom: &ArrayGeometry,
    roi: &RegionOfInterest,
) -> usize {
    let r0 = params.resolved_max_distance(geom, roi);
    level_curve_values(params.level_curves, gamma_max(roi, geom.height()))
        .into_iter()
        .map(|gk| CurveWalk::new(gk, params.beta, r0, geom, roi).count())
        .sum()
}

/// Baseline grid: `M` angles `sin φ = (2m − M + 1)/M`, ground distances
/// `ρ_n = Z/n` (n ≥ 1) clipped to the RoI, points on the ground plane.
pub fn build_baseline_grid(
    beta: f64,
    geom: &ArrayGeometry,
    roi: &RegionOfInterest,
) -> Result<PolarGrid> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let mut grid = PolarGrid::from_points(Vec::new(), GridDesign::Baseline { beta });
    let (s_lo, s_hi) = (roi.phi_min().sin() - 1e-12, roi.phi_max().sin() + 1e-12);
    let m_total = geom.num_antennas();
    for m in 0..m_total {
        let phi_sin = (2.0 * m as f64 - m_total as f64 + 1.0) / m_total as f64;
        if phi_sin < s_lo || phi_sin > s_hi {
            continue;
        }
        let phi = phi_sin.asin();
        let z = distance_scale(phi_sin, beta, geom);
        let before = grid.points.len();
        let first = ((z / roi.rho_max()).floor() as usize).max(1);
        for n in first.. {
            let rho = z / n as f64;
            if rho > roi.rho_max() * (1.0 + 1e-9) {
                continue;
            }
            if rho < roi.rho_min() * (1.0 - 1e-9) {
                break;
            }
            let point = ScenePoint::on_ground(rho, phi, geom.height());
            grid.points.push(GridPoint {
                point,
                curve: m,
                sample: n,
                gamma: phi_sin,
                range: point.range(),
            });
        }
        if grid.points.len() == before {
            grid.empty_curves += 1;
        }
    }
    Ok(grid)
}

/// Ground-plane trace `(ρ, φ)` of the level curve `Γ = g` for a BS at height
/// `b`, sampled at `n_points` ranges in `[rho_lo, rho_hi]`. Ranges where the
/// curve does not exist (`|g| R/ρ > 1`) are omitted.
pub fn level_curve_trace(
    g: f64,
    height: f64,
    rho_lo: f64,
    rho_hi: f64,
    n_points: usize,
) -> Vec<(f64, f64)> {
    let steps = n_points.max(2) - 1;
    (0..=steps)
        .filter_map(|i| {
            let rho = rho_lo + (rho_hi - rho_lo) * i as f64 / steps as f64;
            let s = g * rho.hypot(height) / rho;
            (s.abs() <= 1.0).then(|| (rho, s.asin()))
        })
        .collect()
}
