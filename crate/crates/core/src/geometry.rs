//! Array and scene geometry.
//!
//! The ULA lies along the y axis at z = 0 with its centroid at the origin;
//! users sit on the ground plane z = −b.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform linear array with `num_antennas` isotropic elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    num_antennas: usize,
    spacing: f64,
    height: f64,
    wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(num_antennas: usize, spacing: f64, height: f64, wavelength: f64) -> Result<Self> {
        if num_antennas == 0 {
            return Err(Error::InvalidParameter(
                "array needs at least one antenna".into(),
            ));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "antenna spacing must be positive, got {spacing}"
            )));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if !(height >= 0.0 && height.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "array height must be non-negative, got {height}"
            )));
        }
        Ok(Self {
            num_antennas,
            spacing,
            height,
            wavelength,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Same array at a different height.
    pub fn with_height(&self, height: f64) -> Result<Self> {
        Self::new(self.num_antennas, self.spacing, height, self.wavelength)
    }

    /// Signed element offset `i(m) = m − (M−1)/2`.
    pub fn index_offset(&self, m: usize) -> f64 {
        m as f64 - (self.num_antennas as f64 - 1.0) / 2.0
    }

    /// Distance between the two extreme elements.
    pub fn aperture(&self) -> f64 {
        (self.num_antennas as f64 - 1.0) * self.spacing
    }

    pub fn antenna_position(&self, m: usize) -> ScenePoint {
        ScenePoint::new(0.0, self.index_offset(m) * self.spacing, 0.0)
    }

    pub fn antenna_positions(&self) -> Vec<ScenePoint> {
        (0..self.num_antennas)
            .map(|m| self.antenna_position(m))
            .collect()
    }

    /// Euclidean distance from `p` to every antenna, ordered by antenna index.
    pub fn exact_distances(&self, p: &ScenePoint) -> Result<Vec<f64>> {
        (0..self.num_antennas)
            .map(|m| {
                let r = p.distance_to(&self.antenna_position(m));
                if !r.is_finite() {
                    Err(Error::InvalidParameter(format!(
                        "non-finite scene point {p:?}"
                    )))
                } else if r > 0.0 {
                    Ok(r)
                } else {
                    Err(Error::CoincidentPoint { antenna: m })
                }
            })
            .collect()
    }

    /// Second-order expansion of `r_m − R` for a point at distance `range`
    /// from the array centre with effective angular coordinate `gamma`.
    pub fn parabolic_distance(&self, range: f64, gamma: f64, m: usize) -> f64 {
        let i = self.index_offset(m);
        let d = self.spacing;
        -d * gamma * i + d * d / (2.0 * range) * (1.0 - gamma * gamma) * i * i
    }

    /// Array response `exp(+j 2π/λ ‖p − u_m‖)`; unit modulus per entry.
    pub fn steering_vector(&self, p: &ScenePoint) -> Result<Vec<Complex64>> {
        let k = self.wavenumber();
        Ok(self
            .exact_distances(p)?
            .into_iter()
            .map(|r| Complex64::from_polar(1.0, k * r))
            .collect())
    }
}

/// Annular ground-plane sector where users live.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    rho_min: f64,
    rho_max: f64,
    phi_min: f64,
    phi_max: f64,
}

/// Relative slack used by RoI membership so points constructed exactly on the
/// boundary (e.g. the `n = 0` sample at `R0`) are kept.
const ROI_SLACK: f64 = 1e-9;

impl RegionOfInterest {
    pub fn new(rho_min: f64, rho_max: f64, phi_min: f64, phi_max: f64) -> Result<Self> {
        if !(rho_min > 0.0 && rho_min < rho_max && rho_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "RoI needs 0 < rho_min < rho_max, got [{rho_min}, {rho_max}]"
            )));
        }
        let half_pi = PI / 2.0 + 1e-12;
        if !(phi_min >= -half_pi && phi_min < phi_max && phi_max <= half_pi) {
            return Err(Error::InvalidParameter(format!(
                "RoI needs -pi/2 <= phi_min < phi_max <= pi/2, got [{phi_min}, {phi_max}]"
            )));
        }
        Ok(Self {
            rho_min,
            rho_max,
            phi_min,
            phi_max,
        })
    }

    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn phi_min(&self) -> f64 {
        self.phi_min
    }

    pub fn phi_max(&self) -> f64 {
        self.phi_max
    }

    /// Distance from the array centre to the farthest ground ring, `√(ρ_max² + b²)`.
    pub fn default_max_distance(&self, height: f64) -> f64 {
        self.rho_max.hypot(height)
    }

    pub fn contains_ground(&self, rho: f64, phi: f64) -> bool {
        rho >= self.rho_min * (1.0 - ROI_SLACK)
            && rho <= self.rho_max * (1.0 + ROI_SLACK)
            && phi >= self.phi_min - ROI_SLACK
            && phi <= self.phi_max + ROI_SLACK
    }

    /// Whether the ground projection of `p` lies inside the sector.
    pub fn contains(&self, p: &ScenePoint) -> bool {
        self.contains_ground(p.ground_range(), p.azimuth())
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.phi_max - self.phi_min) * (self.rho_max.powi(2) - self.rho_min.powi(2))
    }
}

/// A point in the 3D scene, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ScenePoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Ground-plane point `[ρ cos φ, ρ sin φ, −b]`.
    pub fn on_ground(rho: f64, phi: f64, height: f64) -> Self {
        Self::new(rho * phi.cos(), rho * phi.sin(), -height)
    }

    pub fn distance_to(&self, other: &ScenePoint) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Distance `R` from the array centre.
    pub fn range(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Horizontal distance `ρ` from the point below the array centre.
    pub fn ground_range(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Ground azimuth `φ = atan2(y, x)`.
    pub fn azimuth(&self) -> f64 {
        self.y.atan2(self.x)
    }

    /// `cos θ · sin φ = y / R`, the coordinate that sets the linear phase
    /// slope across the array.
    pub fn gamma(&self) -> f64 {
        self.y / self.range()
    }
}

/// Draws `n` users uniformly over the RoI area (density ∝ ρ).
pub fn sample_ue_positions<R: Rng + ?Sized>(
    roi: &RegionOfInterest,
    height: f64,
    n: usize,
    rng: &mut R,
) -> Vec<ScenePoint> {
    let (r2_lo, r2_hi) = (roi.rho_min.powi(2), roi.rho_max.powi(2));
    (0..n)
        .map(|_| {
            let phi = rng.random_range(roi.phi_min..=roi.phi_max);
            let u: f64 = rng.random();
            let rho = (r2_lo + u * (r2_hi - r2_lo)).sqrt();
            ScenePoint::on_ground(rho, phi, height)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn reference_array(height: f64) -> ArrayGeometry {
        ArrayGeometry::new(129, 0.005, height, 0.001).unwrap()
    }

    fn table_roi() -> RegionOfInterest {
        RegionOfInterest::new(5.0, 25.0, -PI / 3.0, PI / 3.0).unwrap()
    }

    #[test]
    fn antenna_layout() {
        let g = reference_array(15.0);
        let pos = g.antenna_positions();
        assert_eq!(pos.len(), 129);
        assert!((pos[0].y + 0.32).abs() < 1e-15);
        assert_eq!((pos[0].x, pos[0].z), (0.0, 0.0));
        let span = pos[128].y - pos[0].y;
        assert!((span - 0.64).abs() < 1e-12);
        assert!((g.aperture() - 0.64).abs() < 1e-12);
        for m in 0..129 {
            assert!((pos[m].y + pos[128 - m].y).abs() < 1e-15);
        }

        let single = ArrayGeometry::new(1, 0.3, 2.0, 0.01).unwrap();
        assert_eq!(
            single.antenna_positions(),
            vec![ScenePoint::new(0.0, 0.0, 0.0)]
        );
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(ArrayGeometry::new(0, 0.005, 0.0, 0.001).is_err());
        assert!(ArrayGeometry::new(4, 0.0, 0.0, 0.001).is_err());
        assert!(ArrayGeometry::new(4, 0.005, -1.0, 0.001).is_err());
        assert!(ArrayGeometry::new(4, 0.005, 0.0, 0.0).is_err());
        assert!(RegionOfInterest::new(5.0, 5.0, -1.0, 1.0).is_err());
        assert!(RegionOfInterest::new(0.0, 5.0, -1.0, 1.0).is_err());
        assert!(RegionOfInterest::new(1.0, 5.0, 1.0, -1.0).is_err());
        assert!(RegionOfInterest::new(1.0, 5.0, -2.0, 1.0).is_err());
    }

    #[test]
    fn distances_below_array() {
        let g = reference_array(15.0);
        let r = g
            .exact_distances(&ScenePoint::new(0.0, 0.0, -15.0))
            .unwrap();
        for (m, rm) in r.iter().enumerate() {
            let i = g.index_offset(m) * 0.005;
            assert!((rm - (225.0 + i * i).sqrt()).abs() < 1e-12);
        }

        let one = ArrayGeometry::new(1, 0.005, 0.0, 0.001).unwrap();
        assert_eq!(
            one.exact_distances(&ScenePoint::new(0.0, 10.0, 0.0))
                .unwrap(),
            vec![10.0]
        );

        let r = g
            .exact_distances(&ScenePoint::new(5.0, 0.0, -15.0))
            .unwrap();
        let oracle = (25.0f64 + 0.32 * 0.32 + 225.0).sqrt();
        assert!((r[128] - oracle).abs() < 1e-12);
        assert!((r[0] - oracle).abs() < 1e-12);
    }

    #[test]
    fn coincident_point_is_an_error() {
        let g = reference_array(0.0);
        let p = g.antenna_position(17);
        assert!(matches!(
            g.exact_distances(&p),
            Err(Error::CoincidentPoint { antenna: 17 })
        ));
        assert!(g.steering_vector(&p).is_err());
    }

    #[test]
    fn parabolic_distance_special_cases() {
        let g = reference_array(15.0);
        assert_eq!(g.parabolic_distance(10.0, 0.0, 64), 0.0);
        for m in [0, 10, 100, 128] {
            let expect = -0.005 * g.index_offset(m);
            assert!((g.parabolic_distance(7.0, 1.0, m) - expect).abs() < 1e-15);
        }
    }

    /// Exact `r_m − R` vs. the parabolic expansion; the error decays with R.
    #[test]
    fn parabolic_distance_converges_with_range() {
        let g = reference_array(15.0);
        let gamma: f64 = 0.5;
        let mut last = f64::INFINITY;
        for range in [18.0, 20.0, 40.0, 80.0, 160.0] {
            // Point at distance R with y/R = gamma and z = -b.
            let y = range * gamma;
            let x = (range * range - y * y - 225.0).sqrt();
            let p = ScenePoint::new(x, y, -15.0);
            assert!((p.gamma() - gamma).abs() < 1e-12);
            let exact = g.exact_distances(&p).unwrap();
            let err = exact
                .iter()
                .enumerate()
                .map(|(m, r)| (r - range - g.parabolic_distance(range, gamma, m)).abs())
                .fold(0.0, f64::max);
            assert!(err < last, "error {err} did not decay at R={range}");
            // Third-order term scale: δ³ i³ / R² with |i| ≤ 64.
            assert!(
                err <= 0.32f64.powi(3) / range.powi(2),
                "R={range} err={err}"
            );
            last = err;
        }
    }

    #[test]
    fn parabolic_matches_at_ten_meters() {
        let g = reference_array(0.0);
        let (range, gamma) = (10.0_f64, 0.5_f64);
        let p = ScenePoint::new(range * (1.0 - gamma * gamma).sqrt(), range * gamma, 0.0);
        let exact = g.exact_distances(&p).unwrap()[128] - range;
        let approx = g.parabolic_distance(range, gamma, 128);
        assert!((exact - approx).abs() < 2e-4, "{exact} vs {approx}");
    }

    #[test]
    fn steering_vector_is_unit_modulus() {
        let g = reference_array(15.0);
        let p = ScenePoint::on_ground(12.0, 0.4, 15.0);
        let s = g.steering_vector(&p).unwrap();
        assert!(s.iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
        let energy: f64 = s.iter().map(|c| c.norm_sqr()).sum();
        assert!((energy / 129.0 - 1.0).abs() < 1e-12);
        let self_corr: Complex64 = s.iter().map(|c| c.conj() * c).sum();
        assert!((self_corr.norm() / 129.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distances_mirror_for_points_in_xz_plane() {
        let g = reference_array(15.0);
        let r = g
            .exact_distances(&ScenePoint::new(7.3, 0.0, -15.0))
            .unwrap();
        for m in 0..129 {
            assert!((r[m] - r[128 - m]).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_users_stay_in_roi_and_are_deterministic() {
        let roi = table_roi();
        let a = sample_ue_positions(&roi, 15.0, 1000, &mut rng::master(11));
        let b = sample_ue_positions(&roi, 15.0, 1000, &mut rng::master(11));
        assert_eq!(a, b);
        for p in &a {
            assert!(p.ground_range() >= 5.0 && p.ground_range() <= 25.0);
            assert!(p.azimuth() >= -PI / 3.0 && p.azimuth() <= PI / 3.0);
            assert_eq!(p.z, -15.0);
        }
    }

    #[test]
    fn sampled_rho_squared_mean() {
        let roi = table_roi();
        let pts = sample_ue_positions(&roi, 15.0, 100_000, &mut rng::master(3));
        let mean = pts.iter().map(|p| p.ground_range().powi(2)).sum::<f64>() / pts.len() as f64;
        let expect = (25.0 + 625.0) / 2.0;
        assert!((mean / expect - 1.0).abs() < 0.01, "{mean}");
    }

    /// Area uniformity: chi-square over an 8×8 equal-area (ρ², φ) partition.
    #[test]
    fn sampled_users_pass_chi_square() {
        let roi = table_roi();
        let n = 64_000;
        let pts = sample_ue_positions(&roi, 15.0, n, &mut rng::master(5));
        let mut counts = [[0usize; 8]; 8];
        for p in &pts {
            let u = (p.ground_range().powi(2) - 25.0) / 600.0;
            let v = (p.azimuth() + PI / 3.0) / (2.0 * PI / 3.0);
            let i = ((u * 8.0) as usize).min(7);
            let j = ((v * 8.0) as usize).min(7);
            counts[i][j] += 1;
        }
        let expected = n as f64 / 64.0;
        let chi2: f64 = counts
            .iter()
            .flatten()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 63 degrees of freedom, alpha = 0.01.
        assert!(chi2 < 92.010, "chi2 = {chi2}");
    }

    proptest! {
        #[test]
        fn steering_norm_is_sqrt_m(rho in 5.0f64..25.0, phi in -1.0f64..1.0, m in 1usize..200) {
            let g = ArrayGeometry::new(m, 0.005, 15.0, 0.001).unwrap();
            let s = g.steering_vector(&ScenePoint::on_ground(rho, phi, 15.0)).unwrap();
            let energy: f64 = s.iter().map(|c| c.norm_sqr()).sum();
            prop_assert!((energy / m as f64 - 1.0).abs() < 1e-12);
        }

        #[test]
        fn ground_points_round_trip(rho in 0.1f64..100.0, phi in -1.5f64..1.5, b in 0.0f64..30.0) {
            let p = ScenePoint::on_ground(rho, phi, b);
            prop_assert!((p.ground_range() - rho).abs() < 1e-9 * rho);
            prop_assert!((p.azimuth() - phi).abs() < 1e-12);
            prop_assert_eq!(p.z, -b);
        }
    }
}
