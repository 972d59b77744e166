//! Polar-domain grids and dictionaries.

pub mod analysis;
pub mod grid;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::geometry::ArrayGeometry;
use crate::linalg::SplitMatrix;
use crate::{Error, Result};

pub use analysis::{
    correlation_exact, dirichlet_correlation, fresnel_g, fresnel_integrals, same_curve_beta,
    Correlation,
};
pub use grid::{
    build_baseline_grid, build_proposed_grid, distance_samples, gamma, gamma_max,
    level_curve_values, proposed_grid_size, GridDesign, GridDesignParams, GridPoint, PolarGrid,
};

/// Unit-norm array responses over a grid.
///
/// Atoms follow the channel phase convention `exp(−j 2π r_m/λ)/√M`, i.e. the
/// conjugate of [`ArrayGeometry::steering_vector`], so that a line-of-sight
/// channel from a grid point is a scaled (and tapered) copy of its atom.
/// Coherence values are unaffected by the conjugation.
#[derive(Debug, Clone)]
pub struct Dictionary {
    atoms: DMatrix<Complex64>,
    grid: PolarGrid,
}

impl Dictionary {
    pub fn atoms(&self) -> &DMatrix<Complex64> {
        &self.atoms
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }

    pub fn num_antennas(&self) -> usize {
        self.atoms.nrows()
    }
}

pub fn assemble_dictionary(grid: &PolarGrid, geom: &ArrayGeometry) -> Result<Dictionary> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let m = geom.num_antennas();
    let scale = 1.0 / (m as f64).sqrt();
    let columns = grid
        .scene_points()
        .map(|p| {
            geom.steering_vector(p).map(|s| {
                nalgebra::DVector::from_iterator(m, s.into_iter().map(|c| c.conj() * scale))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dictionary {
        atoms: DMatrix::from_columns(&columns),
        grid: grid.clone(),
    })
}

/// `μ = max_{i≠j} |w_i^H w_j|` over the unit-norm atoms.
pub fn mutual_coherence(dict: &Dictionary) -> Result<f64> {
    let q = dict.len();
    if q < 2 {
        return Err(Error::DegenerateDictionary(q));
    }
    const BLOCK: usize = 512;
    let w = SplitMatrix::from_complex(dict.atoms());
    let mut best = 0.0f64;
    for i0 in (0..q).step_by(BLOCK) {
        let ni = BLOCK.min(q - i0);
        let left = w.columns(i0, ni).adjoint();
        for j0 in (i0..q).step_by(BLOCK) {
            let nj = BLOCK.min(q - j0);
            let gram = left.abs_sqr_product(&w.columns(j0, nj));
            for c in 0..nj {
                for r in 0..ni {
                    if i0 + r < j0 + c {
                        best = best.max(gram[(r, c)]);
                    }
                }
            }
        }
    }
    Ok(best.sqrt().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RegionOfInterest;
    use std::f64::consts::PI;

    fn setup() -> (ArrayGeometry, RegionOfInterest) {
        (
            ArrayGeometry::new(129, 0.005, 15.0, 0.001).unwrap(),
            RegionOfInterest::new(5.0, 25.0, -PI / 3.0, PI / 3.0).unwrap(),
        )
    }

    fn brute_force_coherence(d: &Dictionary) -> f64 {
        let a = d.atoms();
        let mut best = 0.0f64;
        for i in 0..a.ncols() {
            for j in 0..a.ncols() {
                if i != j {
                    best = best.max(a.column(i).dotc(&a.column(j)).norm());
                }
            }
        }
        best
    }

    #[test]
    fn atoms_are_unit_norm_and_ordered() {
        let (g, roi) = setup();
        let grid = build_proposed_grid(&GridDesignParams::new(20, 1.5), &g, &roi).unwrap();
        let d = assemble_dictionary(&grid, &g).unwrap();
        assert_eq!(d.len(), grid.len());
        for (q, gp) in grid.points().iter().enumerate() {
            assert!((d.atoms().column(q).norm() - 1.0).abs() < 1e-12);
            let s = g.steering_vector(&gp.point).unwrap();
            assert!((d.atoms()[(7, q)] - s[7].conj() / 129f64.sqrt()).norm() < 1e-15);
        }
        let gram = d.atoms().adjoint() * d.atoms();
        for i in 0..d.len() {
            assert!((gram[(i, i)].re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_grid_rejected() {
        let (g, _) = setup();
        let empty = PolarGrid::from_points(Vec::new(), GridDesign::Baseline { beta: 1.0 });
        assert!(matches!(
            assemble_dictionary(&empty, &g),
            Err(Error::EmptyGrid)
        ));
    }

    #[test]
    fn coherence_matches_brute_force() {
        let (g, roi) = setup();
        for beta in [0.8, 1.7, 3.0] {
            let grid = build_baseline_grid(beta, &g, &roi).unwrap();
            let d = assemble_dictionary(&grid, &g).unwrap();
            let mu = mutual_coherence(&d).unwrap();
            assert!((mu - brute_force_coherence(&d)).abs() < 1e-10);
            assert!(mu > 0.0 && mu <= 1.0);
        }
    }

    #[test]
    fn duplicate_atom_gives_unit_coherence() {
        let (g, roi) = setup();
        let grid = build_proposed_grid(&GridDesignParams::new(5, 2.0), &g, &roi).unwrap();
        let dup = grid.extended_with(&grid.points()[..1]);
        let d = assemble_dictionary(&dup, &g).unwrap();
        assert!((mutual_coherence(&d).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherence_ignores_column_order() {
        let (g, roi) = setup();
        let grid = build_proposed_grid(&GridDesignParams::new(30, 1.2), &g, &roi).unwrap();
        let mut pts = grid.points().to_vec();
        pts.reverse();
        pts.rotate_left(7);
        let shuffled = PolarGrid::from_points(pts, *grid.design());
        let a = mutual_coherence(&assemble_dictionary(&grid, &g).unwrap()).unwrap();
        let b = mutual_coherence(&assemble_dictionary(&shuffled, &g).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn single_atom_is_degenerate() {
        let (g, roi) = setup();
        let grid = build_proposed_grid(&GridDesignParams::new(1, 1e4), &g, &roi).unwrap();
        let d = assemble_dictionary(&grid, &g).unwrap();
        assert!(matches!(
            mutual_coherence(&d),
            Err(Error::DegenerateDictionary(1))
        ));
    }
}
