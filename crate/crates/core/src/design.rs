//! Optimal-NMSE scoring of a grid and the `(N_Γ, β)` search at fixed grid size.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::channel_vector;
use crate::dictionary::build_baseline_grid;
use crate::dictionary::grid::{
    build_proposed_grid, proposed_grid_size, GridDesignParams, PolarGrid,
};
use crate::geometry::{sample_ue_positions, ArrayGeometry, RegionOfInterest, ScenePoint};
use crate::linalg::SplitMatrix;
use crate::report::{sig9, CsvTable};
use crate::units::to_db;
use crate::{Error, Result};

/// Fixed set of user positions shared by every grid it scores, so candidate
/// designs are compared with common random numbers.
#[derive(Debug, Clone)]
pub struct NmseOptEvaluator {
    geom: ArrayGeometry,
    positions: Vec<ScenePoint>,
    /// Conjugate-transposed unit-norm user channels, `S × M`.
    users: SplitMatrix,
}

impl NmseOptEvaluator {
    pub fn from_positions(geom: &ArrayGeometry, positions: Vec<ScenePoint>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter(
                "NMSE_opt needs at least one sample".into(),
            ));
        }
        let users = normalized_channels(geom, positions.iter())?;
        let users = SplitMatrix::adjoint_of_columns(
            users.iter().map(|c| c.as_slice()),
            geom.num_antennas(),
        );
        Ok(Self {
            geom: *geom,
            positions,
            users,
        })
    }

    /// `n_samples` users drawn uniformly over the RoI area.
    pub fn sample<R: Rng + ?Sized>(
        geom: &ArrayGeometry,
        roi: &RegionOfInterest,
        n_samples: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Self::from_positions(
            geom,
            sample_ue_positions(roi, geom.height(), n_samples, rng),
        )
    }

    pub fn positions(&self) -> &[ScenePoint] {
        &self.positions
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geom
    }

    /// Per-sample `max_g |h(g)^H h(r)|² / (‖h(g)‖² ‖h(r)‖²)`.
    pub fn best_correlations(&self, grid: &PolarGrid) -> Result<Vec<f64>> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        const BLOCK: usize = 1024;
        let m = self.geom.num_antennas();
        let points: Vec<&ScenePoint> = grid.scene_points().collect();
        let mut best = vec![0.0f64; self.positions.len()];
        for chunk in points.chunks(BLOCK) {
            let cols = normalized_channels(&self.geom, chunk.iter().copied())?;
            let mut g = SplitMatrix {
                re: nalgebra::DMatrix::zeros(m, cols.len()),
                im: nalgebra::DMatrix::zeros(m, cols.len()),
            };
            for (j, col) in cols.iter().enumerate() {
                for (i, c) in col.iter().enumerate() {
                    g.re[(i, j)] = c.re;
                    g.im[(i, j)] = c.im;
                }
            }
            let corr = self.users.abs_sqr_product(&g);
            for (s, b) in best.iter_mut().enumerate() {
                let row_max = corr.row(s).iter().fold(0.0f64, |a, &v| a.max(v));
                *b = b.max(row_max);
            }
        }
        Ok(best.into_iter().map(|v| v.min(1.0)).collect())
    }

    /// `NMSE_opt = 1 − E{max_g corr²}` over the stored samples.
    pub fn evaluate(&self, grid: &PolarGrid) -> Result<f64> {
        let best = self.best_correlations(grid)?;
        let mean = best.iter().sum::<f64>() / best.len() as f64;
        Ok((1.0 - mean).clamp(0.0, 1.0))
    }
}

fn normalized_channels<'a, I>(
    geom: &ArrayGeometry,
    points: I,
) -> Result<Vec<Vec<num_complex::Complex64>>>
where
    I: Iterator<Item = &'a ScenePoint>,
{
    points
        .map(|p| {
            let h = channel_vector(p, geom)?;
            Ok(h.normalized()?.iter().copied().collect())
        })
        .collect()
}

/// Monte-Carlo `NMSE_opt` of `grid` with `n_samples` fresh users.
pub fn nmse_opt<R: Rng + ?Sized>(
    grid: &PolarGrid,
    geom: &ArrayGeometry,
    roi: &RegionOfInterest,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    NmseOptEvaluator::sample(geom, roi, n_samples, rng)?.evaluate(grid)
}

/// Inclusive band of acceptable grid sizes around `target`.
pub fn size_band(target: usize, tolerance: f64) -> (usize, usize) {
    let t = target as f64;
    let lo = (t * (1.0 - tolerance)).ceil().max(1.0) as usize;
    let hi = (t * (1.0 + tolerance)).floor() as usize;
    (lo.min(target), hi.max(target))
}

const BETA_BRACKET: (f64, f64) = (1e-2, 1e3);

/// Largest β whose grid size is at least the lower band edge, found by
/// bisection on the non-increasing map `β ↦ Q(β)`.
fn solve_beta<F: Fn(f64) -> usize>(
    count: F,
    target: usize,
    tolerance: f64,
    n_curves: usize,
) -> Result<(f64, usize)> {
    let (lo_band, hi_band) = size_band(target, tolerance);
    let (mut lo, mut hi) = BETA_BRACKET;
    let q_lo = count(lo);
    if q_lo < lo_band {
        return Err(Error::UnreachableTarget {
            target,
            n_curves,
            nearest: q_lo,
        });
    }
    if count(hi) >= lo_band {
        lo = hi;
    } else {
        for _ in 0..200 {
            if hi / lo < 1.0 + 1e-13 {
                break;
            }
            let mid = (lo * hi).sqrt();
            if count(mid) >= lo_band {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let q = count(lo);
    if q > hi_band {
        return Err(Error::UnreachableTarget {
            target,
            n_curves,
            nearest: q,
        });
    }
    Ok((lo, q))
}

/// β for which the level-curve grid with `n_curves` curves reaches `target`
/// points within `±tolerance` (relative), preferring the largest such β.
pub fn beta_for_target_q(
    n_curves: usize,
    target: usize,
    geom: &ArrayGeometry,
    roi: &RegionOfInterest,
    tolerance: f64,
) -> Result<f64> {
    let count = |beta: f64| proposed_grid_size(&GridDesignParams::new(n_curves, beta), geom, roi);
    solve_beta(count, target, tolerance, n_curves).map(|(b, _)| b)
}

/// Same inversion for the baseline grid, whose only knob is β.
pub fn baseline_beta_for_target_q(
    target: usize,
    geom: &ArrayGeometry,
    roi: &RegionOfInterest,
    tolerance: f64,
) -> Result<f64> {
    let count = |beta: f64| {
        build_baseline_grid(beta, geom, roi)
            .map(|g| g.len())
            .unwrap_or(0)
    };
    solve_beta(count, target, tolerance, geom.num_antennas()).map(|(b, _)| b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignCandidate {
    pub n_curves: usize,
    pub beta: f64,
    pub size: usize,
    pub nmse_opt: f64,
}

impl DesignCandidate {
    pub fn nmse_opt_db(&self) -> f64 {
        to_db(self.nmse_opt)
    }

    pub fn params(&self) -> GridDesignParams {
        GridDesignParams::new(self.n_curves, self.beta)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignResult {
    pub target: usize,
    pub best: DesignCandidate,
    /// Every evaluated candidate, in evaluation order.
    pub trace: Vec<DesignCandidate>,
    /// Curve counts whose target size was unreachable.
    pub skipped: Vec<usize>,
}

impl DesignResult {
    pub fn nmse_opt_db(&self) -> f64 {
        self.best.nmse_opt_db()
    }

    pub fn params(&self) -> GridDesignParams {
        self.best.params()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSearch {
    /// Inclusive `N_Γ` range; `None` means `[M, min(Q, 8M)]`.
    pub curve_range: Option<(usize, usize)>,
    /// Geometric coarse-scan size.
    pub coarse_candidates: usize,
    /// Number of best coarse candidates whose neighbourhoods are refined.
    pub refine_top: usize,
    /// Extra curve counts evaluated per refined neighbourhood.
    pub refine_points: usize,
    /// Relative grid-size tolerance.
    pub tolerance: f64,
}

impl Default for DesignSearch {
    fn default() -> Self {
        Self {
            curve_range: None,
            coarse_candidates: 64,
            refine_top: 3,
            refine_points: 12,
            tolerance: 0.01,
        }
    }
}

impl DesignSearch {
    pub fn resolved_range(&self, target: usize, geom: &ArrayGeometry) -> (usize, usize) {
        let m = geom.num_antennas();
        self.curve_range
            .unwrap_or((m.min(target), target.min(8 * m)))
    }
}

/// Geometrically spaced, deduplicated integers in `[lo, hi]`.
pub fn geometric_curve_counts(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let (lo, hi) = (lo.max(1), hi.max(lo.max(1)));
    if count <= 1 || lo == hi {
        return vec![lo];
    }
    let ratio = (hi as f64 / lo as f64).ln();
    let mut out: Vec<usize> = (0..count)
        .map(|i| (lo as f64 * (ratio * i as f64 / (count - 1) as f64).exp()).round() as usize)
        .map(|n| n.clamp(lo, hi))
        .collect();
    out.dedup();
    out
}

fn evaluate_candidates(
    counts: &[usize],
    target: usize,
    geom: &ArrayGeometry,
    roi: &RegionOfInterest,
    evaluator: &NmseOptEvaluator,
    tolerance: f64,
) -> Result<Vec<std::result::Result<DesignCandidate, usize>>> {
    counts
        .par_iter()
        .map(
            |&n| match beta_for_target_q(n, target, geom, roi, tolerance) {
                Ok(beta) => {
                    let grid = build_proposed_grid(&GridDesignParams::new(n, beta), geom, roi)?;
                    Ok(Ok(DesignCandidate {
                        n_curves: n,
                        beta,
                        size: grid.len(),
                        nmse_opt: evaluator.evaluate(&grid)?,
                    }))
                }
                Err(Error::UnreachableTarget { .. }) => Ok(Err(n)),
                Err(e) => Err(e),
            },
        )
        .collect()
}

/// Scans `N_Γ`, solves β for the target size on each, scores every grid with
/// the shared evaluator and returns the minimum-`NMSE_opt` design.
///
/// A geometric coarse scan is followed by an integer scan around the best few
/// coarse candidates; the optimum surface is jagged in `N_Γ`.
pub fn optimize_design(
    target: usize,
    geom: &ArrayGeometry,
    roi: &RegionOfInterest,
    evaluator: &NmseOptEvaluator,
    search: &DesignSearch,
) -> Result<DesignResult> {
    let (lo, hi) = search.resolved_range(target, geom);
    if lo > hi {
        return Err(Error::InvalidParameter(format!(
            "empty level-curve range [{lo}, {hi}]"
        )));
    }
    let coarse = geometric_curve_counts(lo, hi, search.coarse_candidates);
    let mut trace = Vec::new();
    let mut skipped = Vec::new();
    for r in evaluate_candidates(&coarse, target, geom, roi, evaluator, search.tolerance)? {
        match r {
            Ok(c) => trace.push(c),
            Err(n) => skipped.push(n),
        }
    }
    if trace.is_empty() {
        return Err(Error::NoFeasibleDesign(target));
    }

    if search.refine_top > 0 && search.refine_points > 0 {
        let mut ranked: Vec<usize> = (0..trace.len()).collect();
        ranked.sort_by(|&a, &b| trace[a].nmse_opt.total_cmp(&trace[b].nmse_opt));
        let mut extra = Vec::new();
        for &idx in ranked.iter().take(search.refine_top) {
            let n = trace[idx].n_curves;
            let pos = coarse.binary_search(&n).unwrap_or(0);
            let left = if pos > 0 { coarse[pos - 1] } else { n };
            let right = coarse.get(pos + 1).copied().unwrap_or(n);
            let span = right - left;
            let stride = (span / (search.refine_points + 1)).max(1);
            let mut c = left + stride;
            while c < right {
                if !coarse.contains(&c) && !extra.contains(&c) {
                    extra.push(c);
                }
                c += stride;
            }
        }
        extra.sort_unstable();
        for r in evaluate_candidates(&extra, target, geom, roi, evaluator, search.tolerance)? {
            match r {
                Ok(c) => trace.push(c),
                Err(n) => skipped.push(n),
            }
        }
    }

    let best = *trace
        .iter()
        .min_by(|a, b| {
            a.nmse_opt
                .total_cmp(&b.nmse_opt)
                .then(a.n_curves.cmp(&b.n_curves))
        })
        .expect("non-empty trace");
    skipped.sort_unstable();
    Ok(DesignResult {
        target,
        best,
        trace,
        skipped,
    })
}

/// One cell of the `(N_Γ, β)` surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub n_curves: usize,
    pub beta: f64,
    pub size: usize,
    pub nmse_opt: f64,
}

/// `NMSE_opt` over the full `curve_counts × betas` product.
pub fn design_surface(
    curve_counts: &[usize],
    betas: &[f64],
    geom: &ArrayGeometry,
    roi: &RegionOfInterest,
    evaluator: &NmseOptEvaluator,
) -> Result<Vec<SurfacePoint>> {
    let cells: Vec<(usize, f64)> = curve_counts
        .iter()
        .flat_map(|&n| betas.iter().map(move |&b| (n, b)))
        .collect();
    cells
        .par_iter()
        .map(|&(n, beta)| {
            let grid = build_proposed_grid(&GridDesignParams::new(n, beta), geom, roi)?;
            let nmse_opt = if grid.is_empty() {
                1.0
            } else {
                evaluator.evaluate(&grid)?
            };
            Ok(SurfacePoint {
                n_curves: n,
                beta,
                size: grid.len(),
                nmse_opt,
            })
        })
        .collect()
}

/// CSV `n_gamma,beta,q,nmse_opt_db`.
pub fn surface_csv(points: &[SurfacePoint]) -> CsvTable {
    let mut t = CsvTable::new(&["n_gamma", "beta", "q", "nmse_opt_db"]);
    for p in points {
        t.push(vec![
            p.n_curves.to_string(),
            sig9(p.beta),
            p.size.to_string(),
            sig9(to_db(p.nmse_opt)),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::grid::GridPoint;
    use crate::rng;
    use std::f64::consts::PI;

    fn setup() -> (ArrayGeometry, RegionOfInterest) {
        (
            ArrayGeometry::new(129, 0.005, 15.0, 0.001).unwrap(),
            RegionOfInterest::new(5.0, 25.0, -PI / 3.0, PI / 3.0).unwrap(),
        )
    }

    /// Direct per-pair evaluation of the best correlation, independent of the
    /// split-matrix path.
    fn brute_force_nmse(grid: &PolarGrid, users: &[ScenePoint], g: &ArrayGeometry) -> f64 {
        let gh: Vec<_> = grid
            .scene_points()
            .map(|p| channel_vector(p, g).unwrap().normalized().unwrap())
            .collect();
        let mut acc = 0.0;
        for u in users {
            let h = channel_vector(u, g).unwrap().normalized().unwrap();
            acc += gh.iter().map(|c| c.dotc(&h).norm_sqr()).fold(0.0, f64::max);
        }
        1.0 - acc / users.len() as f64
    }

    #[test]
    fn evaluator_matches_brute_force() {
        let (g, roi) = setup();
        let grid = build_proposed_grid(&GridDesignParams::new(60, 1.4), &g, &roi).unwrap();
        let users = sample_ue_positions(&roi, 15.0, 50, &mut rng::master(1));
        let ev = NmseOptEvaluator::from_positions(&g, users.clone()).unwrap();
        let fast = ev.evaluate(&grid).unwrap();
        assert!((fast - brute_force_nmse(&grid, &users, &g)).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&fast));
    }

    #[test]
    fn grid_containing_sample_contributes_no_error() {
        let (g, roi) = setup();
        let users = sample_ue_positions(&roi, 15.0, 3, &mut rng::master(2));
        let pts = users
            .iter()
            .map(|&point| GridPoint {
                point,
                curve: 0,
                sample: 0,
                gamma: point.gamma(),
                range: point.range(),
            })
            .collect();
        let grid =
            PolarGrid::from_points(pts, crate::dictionary::GridDesign::Baseline { beta: 1.0 });
        let ev = NmseOptEvaluator::from_positions(&g, users).unwrap();
        assert!(ev.evaluate(&grid).unwrap() < 1e-12);
    }

    #[test]
    fn adding_points_never_hurts() {
        let (g, roi) = setup();
        let ev = NmseOptEvaluator::sample(&g, &roi, 200, &mut rng::master(4)).unwrap();
        let base = build_proposed_grid(&GridDesignParams::new(40, 1.5), &g, &roi).unwrap();
        let more = build_baseline_grid(2.0, &g, &roi).unwrap();
        let union = base.extended_with(more.points());
        let a = ev.evaluate(&base).unwrap();
        let b = ev.evaluate(&union).unwrap();
        assert!(b <= a + 1e-15);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let (g, roi) = setup();
        let empty = PolarGrid::from_points(
            Vec::new(),
            crate::dictionary::GridDesign::Baseline { beta: 1.0 },
        );
        assert!(matches!(
            nmse_opt(&empty, &g, &roi, 10, &mut rng::master(0)),
            Err(Error::EmptyGrid)
        ));
    }

    #[test]
    fn nmse_opt_is_deterministic_per_seed() {
        let (g, roi) = setup();
        let grid = build_proposed_grid(&GridDesignParams::new(50, 1.8), &g, &roi).unwrap();
        let a = nmse_opt(&grid, &g, &roi, 100, &mut rng::master(9)).unwrap();
        let b = nmse_opt(&grid, &g, &roi, 100, &mut rng::master(9)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn size_band_edges() {
        assert_eq!(size_band(516, 0.01), (511, 521));
        assert_eq!(size_band(10, 0.0), (10, 10));
    }

    #[test]
    fn beta_solver_hits_band_and_prefers_largest() {
        let (g, roi) = setup();
        let beta = beta_for_target_q(310, 516, &g, &roi, 0.01).unwrap();
        let q = proposed_grid_size(&GridDesignParams::new(310, beta), &g, &roi);
        assert!((511..=521).contains(&q), "{q}");
        // A slightly larger β falls below the band.
        let q_up = proposed_grid_size(&GridDesignParams::new(310, beta * (1.0 + 1e-9)), &g, &roi);
        assert!(q_up < 511, "{q_up}");
    }

    #[test]
    fn one_point_per_curve_target() {
        let (g, roi) = setup();
        let beta = beta_for_target_q(200, 200, &g, &roi, 0.0).unwrap();
        let grid = build_proposed_grid(&GridDesignParams::new(200, beta), &g, &roi).unwrap();
        assert_eq!(grid.len(), 200);
        assert!(grid.points().iter().all(|p| p.sample == 0));
    }

    #[test]
    fn unreachable_target_reports_nearest() {
        let (g, roi) = setup();
        // Fewer points than curves can never be produced.
        match beta_for_target_q(300, 100, &g, &roi, 0.01) {
            Err(Error::UnreachableTarget { nearest, .. }) => assert_eq!(nearest, 300),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn geometric_counts() {
        let c = geometric_curve_counts(129, 1032, 64);
        assert_eq!(c.first(), Some(&129));
        assert_eq!(c.last(), Some(&1032));
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert!(c.len() <= 64);
        assert_eq!(geometric_curve_counts(5, 5, 10), vec![5]);
    }

    #[test]
    fn optimizer_returns_trace_minimum() {
        let (g, roi) = setup();
        let ev = NmseOptEvaluator::sample(&g, &roi, 150, &mut rng::master(12)).unwrap();
        let search = DesignSearch {
            coarse_candidates: 8,
            refine_top: 1,
            refine_points: 3,
            ..DesignSearch::default()
        };
        let res = optimize_design(300, &g, &roi, &ev, &search).unwrap();
        assert!(res.trace.iter().all(|c| res.best.nmse_opt <= c.nmse_opt));
        assert!(res.trace.iter().all(|c| (297..=303).contains(&c.size)));
        assert!(res.trace.len() > 8 - res.skipped.len());
    }

    #[test]
    fn surface_csv_layout() {
        let (g, roi) = setup();
        let ev = NmseOptEvaluator::sample(&g, &roi, 20, &mut rng::master(3)).unwrap();
        let s = design_surface(&[129, 200], &[1.0, 2.0, 3.0], &g, &roi, &ev).unwrap();
        assert_eq!(s.len(), 6);
        let csv = surface_csv(&s).to_csv_string();
        assert!(csv.starts_with("n_gamma,beta,q,nmse_opt_db\n"));
        assert_eq!(csv.lines().count(), 7);
    }
}
