//! Hybrid-combiner pilot observations and P-SOMP sparse channel estimation.
//!
//! During the pilot phase the BS sees each user through `τ` slots of analog
//! combining, `y_i = √p·K·A_iᵀ h + A_iᵀ ñ_i`, where every `A_i` is an
//! `M × N_RF` matrix of random `±1/√M` entries. Stacking the slots gives
//! `y = √p·K·A h + n`. P-SOMP then greedily picks dictionary atoms against
//! the sensing matrix `Ψ = √p·K·A W` and refits by least squares.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::ChannelVector;
use crate::dictionary::Dictionary;
use crate::geometry::ArrayGeometry;
use crate::linalg::SplitMatrix;
use crate::{Error, Result};

/// Per-slot analog combiners `A_i ∈ {±1/√M}^{M × N_RF}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerStack {
    slots: Vec<DMatrix<f64>>,
}

impl CombinerStack {
    pub fn from_slots(slots: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = slots.first().ok_or_else(|| {
            Error::InvalidParameter("combiner stack needs at least one slot".into())
        })?;
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::InvalidParameter("empty combiner slot".into()));
        }
        if let Some(bad) = slots.iter().find(|a| a.shape() != shape) {
            return Err(Error::DimensionMismatch {
                expected: shape.0 * shape.1,
                actual: bad.nrows() * bad.ncols(),
            });
        }
        Ok(Self { slots })
    }

    pub fn slots(&self) -> &[DMatrix<f64>] {
        &self.slots
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.slots[0].nrows()
    }

    pub fn rf_chains(&self) -> usize {
        self.slots[0].ncols()
    }

    /// Number of combined measurements, `τ·N_RF`.
    pub fn measurements(&self) -> usize {
        self.num_slots() * self.rf_chains()
    }

    /// `A = [A_1 ⋯ A_τ]ᵀ`, of size `τN_RF × M`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let (m, r) = (self.num_antennas(), self.rf_chains());
        let mut a = DMatrix::zeros(self.measurements(), m);
        for (i, slot) in self.slots.iter().enumerate() {
            a.rows_mut(i * r, r).copy_from(&slot.transpose());
        }
        a
    }
}

/// Draws `τ` slots of i.i.d. equiprobable `±1/√M` combiners.
pub fn generate_combiners<R: Rng + ?Sized>(
    geom: &ArrayGeometry,
    rf_chains: usize,
    slots: usize,
    rng: &mut R,
) -> Result<CombinerStack> {
    if rf_chains == 0 || slots == 0 {
        return Err(Error::InvalidParameter(format!(
            "need N_RF ≥ 1 and τ ≥ 1, got N_RF={rf_chains}, τ={slots}"
        )));
    }
    let m = geom.num_antennas();
    let v = 1.0 / (m as f64).sqrt();
    let slots = (0..slots)
        .map(|_| {
            DMatrix::from_fn(
                m,
                rf_chains,
                |_, _| if rng.random::<bool>() { v } else { -v },
            )
        })
        .collect();
    CombinerStack::from_slots(slots)
}

/// Combined pilot signal of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub y: DVector<Complex64>,
    /// Transmit power, W.
    pub power: f64,
    /// Number of users sharing the pilot phase.
    pub users: usize,
    /// Per-antenna noise power, W.
    pub noise_power: f64,
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Combined unit-power noise `[A_1ᵀ ñ_1; …; A_τᵀ ñ_τ]` with `ñ_i ~ CN(0, I_M)`.
///
/// Scaling by `√(σ²K)` gives the pilot noise, so one draw can be reused
/// across transmit powers.
pub fn draw_combined_noise<R: Rng + ?Sized>(
    comb: &CombinerStack,
    rng: &mut R,
) -> DVector<Complex64> {
    let (m, r) = (comb.num_antennas(), comb.rf_chains());
    let mut out = DVector::zeros(comb.measurements());
    let mut raw = DVector::<Complex64>::zeros(m);
    for (i, slot) in comb.slots().iter().enumerate() {
        raw.iter_mut().for_each(|c| *c = complex_gaussian(rng));
        for j in 0..r {
            let col = slot.column(j);
            out[i * r + j] = raw.iter().zip(col.iter()).map(|(c, &a)| c * a).sum();
        }
    }
    out
}

/// `√p·K·A h`.
pub fn noiseless_pilot(
    h: &DVector<Complex64>,
    comb: &CombinerStack,
    power: f64,
    users: usize,
) -> Result<DVector<Complex64>> {
    if h.len() != comb.num_antennas() {
        return Err(Error::DimensionMismatch {
            expected: comb.num_antennas(),
            actual: h.len(),
        });
    }
    let gain = power.sqrt() * users as f64;
    let (re, im) = real_times_complex(&comb.stacked(), h);
    Ok(DVector::from_iterator(
        re.len(),
        re.iter()
            .zip(im.iter())
            .map(|(&a, &b)| Complex64::new(a, b) * gain),
    ))
}

fn real_times_complex(a: &DMatrix<f64>, h: &DVector<Complex64>) -> (DVector<f64>, DVector<f64>) {
    (a * h.map(|c| c.re), a * h.map(|c| c.im))
}

/// Observation from a precomputed noiseless part and a unit noise draw.
pub fn observation_from_parts(
    noiseless: &DVector<Complex64>,
    unit_noise: &DVector<Complex64>,
    power: f64,
    users: usize,
    noise_power: f64,
) -> Result<PilotObservation> {
    if noiseless.len() != unit_noise.len() {
        return Err(Error::DimensionMismatch {
            expected: noiseless.len(),
            actual: unit_noise.len(),
        });
    }
    let noise_scale = (noise_power * users as f64).sqrt();
    Ok(PilotObservation {
        y: noiseless + unit_noise * Complex64::from(noise_scale),
        power,
        users,
        noise_power,
    })
}

/// `y = √p·K·A h + n` with per-slot noise `n_i = A_iᵀ ñ_i`, `ñ_i ~ CN(0, σ²K·I)`.
pub fn simulate_pilot<R: Rng + ?Sized>(
    h: &ChannelVector,
    comb: &CombinerStack,
    power: f64,
    users: usize,
    noise_power: f64,
    rng: &mut R,
) -> Result<PilotObservation> {
    if !(power > 0.0) || noise_power < 0.0 || users == 0 {
        return Err(Error::InvalidParameter(format!(
            "pilot needs p > 0, σ² ≥ 0 and K ≥ 1 (p={power}, σ²={noise_power}, K={users})"
        )));
    }
    let clean = noiseless_pilot(&h.coefficients, comb, power, users)?;
    let noise = draw_combined_noise(comb, rng);
    observation_from_parts(&clean, &noise, power, users, noise_power)
}

/// Outcome of one P-SOMP run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    /// One channel estimate per jointly processed observation.
    pub estimates: Vec<DVector<Complex64>>,
    /// Selected dictionary columns, in selection order.
    pub support: Vec<usize>,
    /// Residual norm before the first iteration and after each one.
    pub residual_norms: Vec<f64>,
    /// Atoms rejected because they made the least-squares problem singular.
    pub rejected: Vec<usize>,
}

impl EstimationResult {
    /// Estimate of the first (usually only) observation.
    pub fn estimate(&self) -> &DVector<Complex64> {
        &self.estimates[0]
    }
}

/// Sensing matrix `A W` for one combiner stack, with cached column norms.
///
/// Build once per combiner realization and reuse for every user and power.
#[derive(Debug, Clone)]
pub struct PsompEstimator<'a> {
    dict: &'a Dictionary,
    /// Effective combining operator (whitened if requested), `τN_RF × M`.
    operator: DMatrix<f64>,
    /// Per-slot inverse Cholesky factors used to whiten observations.
    whitening: Option<Vec<DMatrix<f64>>>,
    rf_chains: usize,
    psi: SplitMatrix,
    norms: Vec<f64>,
}

impl<'a> PsompEstimator<'a> {
    pub fn new(comb: &CombinerStack, dict: &'a Dictionary, whiten: bool) -> Result<Self> {
        if dict.num_antennas() != comb.num_antennas() {
            return Err(Error::DimensionMismatch {
                expected: comb.num_antennas(),
                actual: dict.num_antennas(),
            });
        }
        let r = comb.rf_chains();
        let (operator, whitening) = if whiten {
            let mut op = DMatrix::zeros(comb.measurements(), comb.num_antennas());
            let mut factors = Vec::with_capacity(comb.num_slots());
            for (i, slot) in comb.slots().iter().enumerate() {
                let gram = slot.transpose() * slot;
                let chol = gram.cholesky().ok_or(Error::SingularCombiner)?;
                let inv = chol.l().try_inverse().ok_or(Error::SingularCombiner)?;
                op.rows_mut(i * r, r).copy_from(&(&inv * slot.transpose()));
                factors.push(inv);
            }
            (op, Some(factors))
        } else {
            (comb.stacked(), None)
        };
        let w = dict.atoms();
        let psi = SplitMatrix {
            re: &operator * w.map(|c| c.re),
            im: &operator * w.map(|c| c.im),
        };
        let norms = (0..psi.ncols())
            .map(|q| (psi.re.column(q).norm_squared() + psi.im.column(q).norm_squared()).sqrt())
            .collect();
        Ok(Self {
            dict,
            operator,
            whitening,
            rf_chains: r,
            psi,
            norms,
        })
    }

    pub fn dictionary(&self) -> &Dictionary {
        self.dict
    }

    /// Effective `τN_RF × M` operator the sensing matrix is built from.
    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    fn prepare(&self, y: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if y.len() != self.psi.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.psi.nrows(),
                actual: y.len(),
            });
        }
        let Some(factors) = &self.whitening else {
            return Ok(y.clone());
        };
        let r = self.rf_chains;
        let mut out = y.clone();
        for (i, inv) in factors.iter().enumerate() {
            let seg = y.rows(i * r, r);
            let re = inv * seg.map(|c| c.re);
            let im = inv * seg.map(|c| c.im);
            for j in 0..r {
                out[i * r + j] = Complex64::new(re[j], im[j]);
            }
        }
        Ok(out)
    }

    fn psi_column(&self, q: usize) -> DVector<Complex64> {
        DVector::from_iterator(
            self.psi.nrows(),
            self.psi
                .re
                .column(q)
                .iter()
                .zip(self.psi.im.column(q).iter())
                .map(|(&a, &b)| Complex64::new(a, b)),
        )
    }

    /// `|ψ_qᴴ r|` for every column `q`.
    fn correlations(&self, r: &DVector<Complex64>) -> DVector<f64> {
        let (rr, ri) = (r.map(|c| c.re), r.map(|c| c.im));
        let re = self.psi.re.tr_mul(&rr) + self.psi.im.tr_mul(&ri);
        let im = self.psi.re.tr_mul(&ri) - self.psi.im.tr_mul(&rr);
        re.zip_map(&im, |a, b| a.hypot(b))
    }

    /// Single-observation P-SOMP.
    pub fn estimate(&self, obs: &PilotObservation, sparsity: usize) -> Result<EstimationResult> {
        self.estimate_joint(std::slice::from_ref(obs), sparsity)
    }

    /// Joint support selection over several observations sharing this
    /// combiner stack: atoms are ranked by `Σ_j |ψ_qᴴ r_j| / ‖ψ_q‖`, and each
    /// observation gets its own least-squares coefficients.
    pub fn estimate_joint(
        &self,
        obs: &[PilotObservation],
        sparsity: usize,
    ) -> Result<EstimationResult> {
        if obs.is_empty() {
            return Err(Error::InvalidParameter(
                "no observations to estimate from".into(),
            ));
        }
        let measurements = self.psi.nrows();
        if sparsity == 0 || sparsity > measurements {
            return Err(Error::InvalidParameter(format!(
                "sparsity must lie in [1, {measurements}], got {sparsity}"
            )));
        }
        let ys = obs
            .iter()
            .map(|o| self.prepare(&o.y))
            .collect::<Result<Vec<_>>>()?;
        let mut residuals = ys.clone();
        let frob =
            |rs: &[DVector<Complex64>]| rs.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt();
        let mut residual_norms = vec![frob(&residuals)];

        let q_total = self.dict.len();
        let mut excluded = vec![false; q_total];
        for (q, &n) in self.norms.iter().enumerate() {
            if n == 0.0 {
                excluded[q] = true;
            }
        }
        let mut support: Vec<usize> = Vec::with_capacity(sparsity);
        let mut rejected = Vec::new();
        let mut coeffs: Vec<DVector<Complex64>> = Vec::new();

        while support.len() < sparsity {
            let mut score = DVector::<f64>::zeros(q_total);
            for r in &residuals {
                score += self.correlations(r);
            }
            let pick = (0..q_total)
                .filter(|&q| !excluded[q])
                .max_by(|&a, &b| (score[a] / self.norms[a]).total_cmp(&(score[b] / self.norms[b])));
            let Some(pick) = pick else { break };
            excluded[pick] = true;
            support.push(pick);

            let basis: Vec<DVector<Complex64>> =
                support.iter().map(|&q| self.psi_column(q)).collect();
            let psi_s = DMatrix::from_columns(&basis);
            match least_squares(&psi_s, &ys) {
                Some(x) => {
                    for (j, y) in ys.iter().enumerate() {
                        residuals[j] = y - &psi_s * &x[j];
                    }
                    coeffs = x;
                    residual_norms.push(frob(&residuals));
                }
                None => {
                    support.pop();
                    rejected.push(pick);
                }
            }
        }

        let gain_inv = 1.0 / (obs[0].power.sqrt() * obs[0].users as f64);
        let w = self.dict.atoms();
        let m = self.dict.num_antennas();
        let estimates = coeffs
            .iter()
            .map(|x| {
                let mut h = DVector::<Complex64>::zeros(m);
                for (c, &q) in x.iter().zip(support.iter()) {
                    h += w.column(q) * (*c * gain_inv);
                }
                h
            })
            .collect::<Vec<_>>();
        let estimates = if estimates.is_empty() {
            vec![DVector::zeros(m); obs.len()]
        } else {
            estimates
        };
        Ok(EstimationResult {
            estimates,
            support,
            residual_norms,
            rejected,
        })
    }
}

/// Least-squares coefficients through the normal equations, or `None` when
/// the support columns are numerically dependent.
fn least_squares(
    psi_s: &DMatrix<Complex64>,
    ys: &[DVector<Complex64>],
) -> Option<Vec<DVector<Complex64>>> {
    let gram = psi_s.adjoint() * psi_s;
    let chol = gram.clone().cholesky()?;
    let l = chol.l();
    for i in 0..gram.nrows() {
        if l[(i, i)].norm_sqr() <= 1e-10 * gram[(i, i)].re {
            return None;
        }
    }
    Some(ys.iter().map(|y| chol.solve(&psi_s.ad_mul(y))).collect())
}

/// One-shot P-SOMP: builds the sensing matrix and estimates `obs`.
pub fn psomp_estimate(
    obs: &PilotObservation,
    comb: &CombinerStack,
    dict: &Dictionary,
    sparsity: usize,
) -> Result<EstimationResult> {
    PsompEstimator::new(comb, dict, false)?.estimate(obs, sparsity)
}

/// `‖ĥ − h‖² / ‖h‖²`.
pub fn nmse(estimate: &DVector<Complex64>, truth: &DVector<Complex64>) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: estimate.len(),
        });
    }
    let denom = truth.norm_squared();
    if denom == 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok((estimate - truth).norm_squared() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::channel_vector;
    use crate::dictionary::{assemble_dictionary, build_proposed_grid, GridDesignParams};
    use crate::geometry::RegionOfInterest;
    use crate::rng;
    use crate::units::{dbm_to_watt, to_db};
    use std::f64::consts::PI;

    fn small() -> (ArrayGeometry, RegionOfInterest) {
        (
            ArrayGeometry::new(16, 0.005, 2.0, 0.001).unwrap(),
            RegionOfInterest::new(1.0, 4.0, -PI / 3.0, PI / 3.0).unwrap(),
        )
    }

    fn reference_setup() -> (ArrayGeometry, RegionOfInterest) {
        (
            ArrayGeometry::new(129, 0.005, 15.0, 0.001).unwrap(),
            RegionOfInterest::new(5.0, 25.0, -PI / 3.0, PI / 3.0).unwrap(),
        )
    }

    #[test]
    fn combiner_entries_and_columns() {
        let (g, _) = reference_setup();
        let c = generate_combiners(&g, 10, 3, &mut rng::master(1)).unwrap();
        let v = 1.0 / 129f64.sqrt();
        assert_eq!(c.num_slots(), 3);
        assert_eq!(c.measurements(), 30);
        for slot in c.slots() {
            assert!(slot.iter().all(|&a| a == v || a == -v));
            for col in slot.column_iter() {
                assert!((col.norm() - 1.0).abs() < 1e-12);
            }
        }
        let a = c.stacked();
        assert_eq!(a.shape(), (30, 129));
        assert_eq!(a.row(12).transpose(), c.slots()[1].column(2));
        assert_eq!(
            c,
            generate_combiners(&g, 10, 3, &mut rng::master(1)).unwrap()
        );
        assert!(generate_combiners(&g, 0, 3, &mut rng::master(1)).is_err());
    }

    #[test]
    fn combiner_gram_has_identity_mean() {
        let g = ArrayGeometry::new(32, 0.005, 15.0, 0.001).unwrap();
        let mut r = rng::master(2);
        let n_rf = 6;
        let mut acc = DMatrix::<f64>::zeros(n_rf, n_rf);
        let draws = 500;
        for _ in 0..draws {
            let c = generate_combiners(&g, n_rf, 1, &mut r).unwrap();
            let a = &c.slots()[0];
            acc += a.transpose() * a;
        }
        acc /= draws as f64;
        let eye = DMatrix::<f64>::identity(n_rf, n_rf);
        assert!((acc - &eye).norm() / eye.norm() < 0.05);
    }

    #[test]
    fn noise_covariance_matches() {
        let g = ArrayGeometry::new(16, 0.005, 15.0, 0.001).unwrap();
        let mut r = rng::master(3);
        let comb = generate_combiners(&g, 4, 1, &mut r).unwrap();
        let (sigma2, k) = (2.0, 3);
        let h = DVector::from_element(16, Complex64::new(0.0, 0.0));
        let src = crate::geometry::ScenePoint::new(1.0, 0.0, 0.0);
        let ch = ChannelVector {
            coefficients: h,
            source: src,
        };
        let draws = 10_000;
        let mut cov = DMatrix::<Complex64>::zeros(4, 4);
        for _ in 0..draws {
            let n = simulate_pilot(&ch, &comb, 1.0, k, sigma2, &mut r)
                .unwrap()
                .y;
            cov += &n * n.adjoint();
        }
        cov /= Complex64::from(draws as f64);
        let a = &comb.slots()[0];
        let expect = (a.transpose() * a * (sigma2 * k as f64)).map(Complex64::from);
        assert!((cov - &expect).norm() / expect.norm() < 0.05);
    }

    #[test]
    fn noiseless_pilot_is_linear() {
        let (g, _) = reference_setup();
        let comb = generate_combiners(&g, 10, 2, &mut rng::master(4)).unwrap();
        let h =
            channel_vector(&crate::geometry::ScenePoint::on_ground(10.0, 0.3, 15.0), &g).unwrap();
        let mut r = rng::master(5);
        let y = simulate_pilot(&h, &comb, 0.5, 10, 0.0, &mut r).unwrap().y;
        let direct = noiseless_pilot(&h.coefficients, &comb, 0.5, 10).unwrap();
        assert!((&y - &direct).norm() < 1e-15 * direct.norm().max(1.0));
        let c = Complex64::new(0.3, -2.0);
        let scaled = noiseless_pilot(&(&h.coefficients * c), &comb, 0.5, 10).unwrap();
        assert!((scaled - direct * c).norm() < 1e-12 * y.norm());
        assert!(simulate_pilot(&h, &comb, 0.0, 10, 1.0, &mut r).is_err());
    }

    #[test]
    fn nmse_reference_values() {
        let h = DVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.0)]);
        assert_eq!(nmse(&h, &h).unwrap(), 0.0);
        assert!((nmse(&DVector::zeros(2), &h).unwrap() - 1.0).abs() < 1e-15);
        assert!((nmse(&(&h * Complex64::from(2.0)), &h).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            nmse(&h, &DVector::zeros(2)),
            Err(Error::ZeroChannel)
        ));
        assert!(nmse(&DVector::zeros(3), &h).is_err());
    }

    fn noiseless(h: &ChannelVector, comb: &CombinerStack) -> PilotObservation {
        PilotObservation {
            y: noiseless_pilot(&h.coefficients, comb, dbm_to_watt(15.0), 10).unwrap(),
            power: dbm_to_watt(15.0),
            users: 10,
            noise_power: 0.0,
        }
    }

    #[test]
    fn on_grid_noiseless_recovery() {
        let (g, roi) = reference_setup();
        let grid = build_proposed_grid(&GridDesignParams::new(310, 1.81), &g, &roi).unwrap();
        let dict = assemble_dictionary(&grid, &g).unwrap();
        let comb = generate_combiners(&g, 10, 10, &mut rng::master(6)).unwrap();
        let est = PsompEstimator::new(&comb, &dict, false).unwrap();
        for q in [0, 77, 200, grid.len() - 1] {
            let h = channel_vector(&grid.points()[q].point, &g).unwrap();
            let res = est.estimate(&noiseless(&h, &comb), 1).unwrap();
            assert_eq!(res.support, vec![q]);
            let e = to_db(nmse(res.estimate(), &h.coefficients).unwrap());
            assert!(e <= -30.0, "q={q}: {e} dB");
        }
    }

    #[test]
    fn exhaustive_small_instance() {
        let (g, roi) = small();
        let full = build_proposed_grid(&GridDesignParams::new(8, 0.3), &g, &roi).unwrap();
        let stride = full.len() / 24;
        assert!(stride >= 1, "grid too small: {}", full.len());
        let pts: Vec<_> = full
            .points()
            .iter()
            .step_by(stride)
            .take(24)
            .cloned()
            .collect();
        assert_eq!(pts.len(), 24);
        let grid = crate::dictionary::PolarGrid::from_points(pts, *full.design());
        let dict = assemble_dictionary(&grid, &g).unwrap();
        // τ·N_RF = 32 ≥ Q = 24
        let comb = generate_combiners(&g, 8, 4, &mut rng::master(7)).unwrap();
        let est = PsompEstimator::new(&comb, &dict, false).unwrap();
        for q in 0..grid.len() {
            let h = channel_vector(&grid.points()[q].point, &g).unwrap();
            let res = est.estimate(&noiseless(&h, &comb), 1).unwrap();
            assert_eq!(res.support, vec![q]);
            assert!(to_db(nmse(res.estimate(), &h.coefficients).unwrap()) <= -30.0);
        }
    }

    #[test]
    fn residuals_shrink_and_are_orthogonal() {
        let (g, roi) = reference_setup();
        let grid = build_proposed_grid(&GridDesignParams::new(200, 1.6), &g, &roi).unwrap();
        let dict = assemble_dictionary(&grid, &g).unwrap();
        let mut r = rng::master(8);
        let comb = generate_combiners(&g, 10, 10, &mut r).unwrap();
        let h = channel_vector(
            &crate::geometry::ScenePoint::on_ground(12.3, -0.41, 15.0),
            &g,
        )
        .unwrap();
        let p = dbm_to_watt(10.0);
        let obs = simulate_pilot(&h, &comb, p, 10, dbm_to_watt(-86.0), &mut r).unwrap();
        let est = PsompEstimator::new(&comb, &dict, false).unwrap();
        let res = est.estimate(&obs, 5).unwrap();
        assert_eq!(res.support.len(), 5);
        assert_eq!(res.residual_norms.len(), 6);
        for w in res.residual_norms.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        // Rebuild the residual from the estimate and check Ψ_Sᴴ r ≈ 0.
        let gain = p.sqrt() * 10.0;
        let resid = &obs.y - noiseless_pilot(res.estimate(), &comb, p, 10).unwrap();
        for &q in &res.support {
            let psi = est.psi_column(q) * Complex64::from(gain);
            let ip = psi.dotc(&resid).norm();
            assert!(ip <= 1e-8 * psi.norm() * obs.y.norm(), "{ip}");
        }
    }

    #[test]
    fn global_phase_equivariance() {
        let (g, roi) = reference_setup();
        let grid = build_proposed_grid(&GridDesignParams::new(200, 1.6), &g, &roi).unwrap();
        let dict = assemble_dictionary(&grid, &g).unwrap();
        let comb = generate_combiners(&g, 10, 4, &mut rng::master(9)).unwrap();
        let h =
            channel_vector(&crate::geometry::ScenePoint::on_ground(8.0, 0.2, 15.0), &g).unwrap();
        let phase = Complex64::from_polar(1.0, 1.234);
        let rotated = ChannelVector {
            coefficients: &h.coefficients * phase,
            source: h.source,
        };
        let p = dbm_to_watt(15.0);
        let sigma2 = dbm_to_watt(-86.0);
        let a = simulate_pilot(&h, &comb, p, 10, sigma2, &mut rng::master(10)).unwrap();
        let mut b = simulate_pilot(&rotated, &comb, p, 10, sigma2, &mut rng::master(10)).unwrap();
        // same noise, rotated with the channel
        let noise = &a.y - noiseless_pilot(&h.coefficients, &comb, p, 10).unwrap();
        b.y = noiseless_pilot(&rotated.coefficients, &comb, p, 10).unwrap() + noise * phase;
        let est = PsompEstimator::new(&comb, &dict, false).unwrap();
        let ra = est.estimate(&a, 2).unwrap();
        let rb = est.estimate(&b, 2).unwrap();
        assert_eq!(ra.support, rb.support);
        assert!((ra.estimate() * phase - rb.estimate()).norm() < 1e-9 * ra.estimate().norm());
        let na = nmse(ra.estimate(), &h.coefficients).unwrap();
        let nb = nmse(rb.estimate(), &rotated.coefficients).unwrap();
        assert!((na - nb).abs() < 1e-9);
    }

    #[test]
    fn dependent_support_is_refused() {
        let a = DMatrix::from_fn(6, 2, |i, j| Complex64::new(i as f64 + 1.0, j as f64));
        let y = vec![DVector::from_element(6, Complex64::new(1.0, 0.0))];
        assert!(least_squares(&a, &y).is_some());
        let dup = DMatrix::from_columns(&[
            a.column(0).into_owned(),
            a.column(1).into_owned(),
            a.column(0) * Complex64::new(0.0, 2.0),
        ]);
        assert!(least_squares(&dup, &y).is_none());
    }

    #[test]
    fn duplicated_atom_is_never_selected_twice() {
        let (g, roi) = small();
        let grid = build_proposed_grid(&GridDesignParams::new(8, 0.3), &g, &roi).unwrap();
        let first = grid.points()[3];
        let dup = grid.extended_with(&[first]);
        let dict = assemble_dictionary(&dup, &g).unwrap();
        let comb = generate_combiners(&g, 8, 4, &mut rng::master(11)).unwrap();
        let h = channel_vector(&grid.points()[3].point, &g).unwrap();
        let res = PsompEstimator::new(&comb, &dict, false)
            .unwrap()
            .estimate(&noiseless(&h, &comb), 3)
            .unwrap();
        assert_eq!(res.support.len(), 3);
        let dup_idx = dup.len() - 1;
        assert!(res.support[0] == 3 || res.support[0] == dup_idx);
        assert!(!(res.support.contains(&3) && res.support.contains(&dup_idx)));
    }

    #[test]
    fn joint_selection_and_whitening() {
        let (g, roi) = reference_setup();
        let grid = build_proposed_grid(&GridDesignParams::new(200, 1.6), &g, &roi).unwrap();
        let dict = assemble_dictionary(&grid, &g).unwrap();
        let mut r = rng::master(12);
        let comb = generate_combiners(&g, 10, 5, &mut r).unwrap();
        let q = 150;
        let h = channel_vector(&grid.points()[q].point, &g).unwrap();
        let p = dbm_to_watt(15.0);
        let obs: Vec<_> = (0..3)
            .map(|_| simulate_pilot(&h, &comb, p, 10, dbm_to_watt(-86.0), &mut r).unwrap())
            .collect();
        let plain = PsompEstimator::new(&comb, &dict, false).unwrap();
        let joint = plain.estimate_joint(&obs, 1).unwrap();
        assert_eq!(joint.estimates.len(), 3);
        assert_eq!(joint.support, vec![q]);

        let white = PsompEstimator::new(&comb, &dict, true).unwrap();
        let res = white.estimate(&noiseless(&h, &comb), 1).unwrap();
        assert_eq!(res.support, vec![q]);
        assert!(to_db(nmse(res.estimate(), &h.coefficients).unwrap()) <= -30.0);

        let too_many = generate_combiners(
            &ArrayGeometry::new(4, 0.005, 1.0, 0.001).unwrap(),
            8,
            1,
            &mut r,
        )
        .unwrap();
        let g4 = ArrayGeometry::new(4, 0.005, 1.0, 0.001).unwrap();
        let roi4 = RegionOfInterest::new(1.0, 3.0, -1.0, 1.0).unwrap();
        let d4 = assemble_dictionary(
            &build_proposed_grid(&GridDesignParams::new(4, 1.0), &g4, &roi4).unwrap(),
            &g4,
        )
        .unwrap();
        assert!(matches!(
            PsompEstimator::new(&too_many, &d4, true),
            Err(Error::SingularCombiner)
        ));
    }
}
