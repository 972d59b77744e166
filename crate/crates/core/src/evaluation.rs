//! Uplink sum spectral efficiency with MR and MMSE combining, and the drop
//! loop that produces NMSE / SE curves over a transmit-power sweep.
//!
//! SE uses the use-and-then-forget bound
//!
//! ```text
//! SINR_k = p|E{v_kᴴh_k}|² / (p Σ_i E{|v_kᴴh_i|²} − p|E{v_kᴴh_k}|² + σ² E{‖v_k‖²})
//! ```
//!
//! with expectations over pilot-noise and combiner realizations. Channels are
//! deterministic once user positions are drawn, so each drop conditions on
//! its positions and drop averaging happens outside the bound.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::channel_matrix;
use crate::design::NmseOptEvaluator;
use crate::dictionary::Dictionary;
use crate::estimation::{
    draw_combined_noise, generate_combiners, nmse, observation_from_parts, PsompEstimator,
};
use crate::geometry::{sample_ue_positions, ArrayGeometry, RegionOfInterest, ScenePoint};
use crate::report::{sig9, CsvTable};
use crate::rng::{self, purpose};
use crate::units::{dbm_to_watt, to_db};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinerKind {
    Mr,
    Mmse,
}

/// `v_k = ĥ_k`.
pub fn mr_combiner(estimates: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    estimates.clone()
}

/// `v_k = p (p Σ_i ĥ_i ĥ_iᴴ + σ² I_M)⁻¹ ĥ_k`, evaluated as
/// `p Ĥ (p ĤᴴĤ + σ² I_K)⁻¹` so only a `K × K` system is solved.
pub fn mmse_combiner(
    estimates: &DMatrix<Complex64>,
    power: f64,
    noise_power: f64,
) -> Result<DMatrix<Complex64>> {
    if !(power > 0.0) || !(noise_power > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "MMSE combining needs p > 0 and σ² > 0 (p={power}, σ²={noise_power})"
        )));
    }
    let k = estimates.ncols();
    let p = Complex64::from(power);
    let mut gram = estimates.ad_mul(estimates) * p;
    for i in 0..k {
        gram[(i, i)] += noise_power;
    }
    let chol = gram.cholesky().ok_or_else(|| {
        Error::InvalidParameter("MMSE Gram matrix is not positive definite".into())
    })?;
    let inv = chol.inverse();
    Ok(estimates * inv * p)
}

/// Running sums for the three expectations of the bound.
#[derive(Debug, Clone, PartialEq)]
pub struct UatfAccumulator {
    count: usize,
    signal: Vec<Complex64>,
    received: Vec<f64>,
    combiner_norm: Vec<f64>,
}

impl UatfAccumulator {
    pub fn new(users: usize) -> Self {
        Self {
            count: 0,
            signal: vec![Complex64::new(0.0, 0.0); users],
            received: vec![0.0; users],
            combiner_norm: vec![0.0; users],
        }
    }

    /// Adds one realization of the combiners `V` against the true channels `H`.
    pub fn add(
        &mut self,
        combiners: &DMatrix<Complex64>,
        channels: &DMatrix<Complex64>,
    ) -> Result<()> {
        let k = self.signal.len();
        if combiners.ncols() != k || channels.ncols() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: combiners.ncols().min(channels.ncols()),
            });
        }
        if combiners.nrows() != channels.nrows() {
            return Err(Error::DimensionMismatch {
                expected: channels.nrows(),
                actual: combiners.nrows(),
            });
        }
        let g = combiners.ad_mul(channels);
        for u in 0..k {
            self.signal[u] += g[(u, u)];
            self.received[u] += g.row(u).iter().map(|c| c.norm_sqr()).sum::<f64>();
            self.combiner_norm[u] += combiners.column(u).norm_squared();
        }
        self.count += 1;
        Ok(())
    }

    pub fn realizations(&self) -> usize {
        self.count
    }

    /// Per-user SINR from the accumulated moments.
    pub fn sinr(&self, power: f64, noise_power: f64) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::InvalidParameter(
                "no realizations accumulated".into(),
            ));
        }
        let n = self.count as f64;
        (0..self.signal.len())
            .map(|u| {
                let mean = self.signal[u] / n;
                let num = power * mean.norm_sqr();
                let interference = power * self.received[u] / n - num;
                let den = interference.max(0.0) + noise_power * self.combiner_norm[u] / n;
                let s = num / den;
                if s.is_finite() && s >= 0.0 {
                    Ok(s)
                } else if num == 0.0 && den == 0.0 {
                    Ok(0.0)
                } else {
                    Err(Error::NonFiniteSinr { user: u })
                }
            })
            .collect()
    }
}

/// `prelog · Σ_k log2(1 + SINR_k)`.
pub fn sum_se(sinr: &[f64], prelog: f64) -> f64 {
    prelog * sinr.iter().map(|s| (1.0 + s).log2()).sum::<f64>()
}

fn combine(
    kind: CombinerKind,
    est: &DMatrix<Complex64>,
    power: f64,
    noise_power: f64,
) -> Result<DMatrix<Complex64>> {
    match kind {
        CombinerKind::Mr => Ok(mr_combiner(est)),
        CombinerKind::Mmse => mmse_combiner(est, power, noise_power),
    }
}

/// UatF sum SE given channel estimates from independent realizations.
/// Returns the per-user SINRs and the sum SE.
pub fn uatf_sum_se(
    channels: &DMatrix<Complex64>,
    estimates: &[DMatrix<Complex64>],
    kind: CombinerKind,
    power: f64,
    noise_power: f64,
    prelog: f64,
) -> Result<(Vec<f64>, f64)> {
    let mut acc = UatfAccumulator::new(channels.ncols());
    for est in estimates {
        acc.add(&combine(kind, est, power, noise_power)?, channels)?;
    }
    let sinr = acc.sinr(power, noise_power)?;
    let se = sum_se(&sinr, prelog);
    Ok((sinr, se))
}

/// Sum SE with the true channels used as estimates.
pub fn perfect_csi_sum_se(
    channels: &DMatrix<Complex64>,
    kind: CombinerKind,
    power: f64,
    noise_power: f64,
    prelog: f64,
) -> Result<(Vec<f64>, f64)> {
    uatf_sum_se(
        channels,
        std::slice::from_ref(channels),
        kind,
        power,
        noise_power,
        prelog,
    )
}

/// Monte-Carlo controls and the pilot-phase parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSettings {
    pub drops: usize,
    /// Pilot-noise / combiner realizations per drop.
    pub realizations: usize,
    pub powers_dbm: Vec<f64>,
    pub users: usize,
    pub rf_chains: usize,
    /// Combining slots `τ` per user.
    pub pilot_slots: usize,
    pub noise_dbm: f64,
    pub sparsity: usize,
    pub prelog: f64,
    pub whiten: bool,
    /// Adds a `perfect-csi` design that uses the true channels.
    pub perfect_csi: bool,
    pub seed: u64,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self {
            drops: 100,
            realizations: 50,
            powers_dbm: (0..=8).map(|i| 2.5 * i as f64).collect(),
            users: 10,
            rf_chains: 10,
            pilot_slots: 10,
            noise_dbm: -86.0,
            sparsity: 1,
            prelog: 1.0,
            whiten: false,
            perfect_csi: false,
            seed: 0,
        }
    }
}

impl MonteCarloSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.realizations == 0 {
            return bad("realizations must be ≥ 1");
        }
        if self.users == 0 || self.rf_chains == 0 || self.pilot_slots == 0 {
            return bad("users, rf_chains and pilot_slots must be ≥ 1");
        }
        if self.sparsity == 0 || self.sparsity > self.rf_chains * self.pilot_slots {
            return bad("sparsity must lie in [1, pilot_slots·rf_chains]");
        }
        if self.powers_dbm.is_empty() || self.powers_dbm.iter().any(|p| !p.is_finite()) {
            return bad("power sweep must be a non-empty list of finite dBm values");
        }
        if !(self.prelog > 0.0 && self.prelog <= 1.0) {
            return bad("prelog must lie in (0, 1]");
        }
        Ok(())
    }
}

/// A named dictionary under evaluation.
#[derive(Debug, Clone)]
pub struct DesignUnderTest {
    pub name: String,
    pub dictionary: Dictionary,
}

/// Results of one design at one transmit power within a drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DropOutcome {
    pub design: String,
    pub power_dbm: f64,
    /// Mean per-user NMSE over realizations (linear); 0 for perfect CSI.
    pub nmse: f64,
    /// Grid-intrinsic `NMSE_opt` of this drop's users (linear).
    pub nmse_opt: f64,
    pub sinr_mr: Vec<f64>,
    pub sinr_mmse: Vec<f64>,
    pub sum_se_mr: f64,
    pub sum_se_mmse: f64,
    /// Estimates from the last realization, `M × K`.
    pub last_estimates: DMatrix<Complex64>,
}

/// One user placement and everything evaluated on it.
#[derive(Debug, Clone, PartialEq)]
pub struct DropResult {
    pub index: usize,
    pub positions: Vec<ScenePoint>,
    pub channels: DMatrix<Complex64>,
    pub outcomes: Vec<DropOutcome>,
}

struct Slot {
    nmse_sum: f64,
    mr: UatfAccumulator,
    mmse: UatfAccumulator,
    last: DMatrix<Complex64>,
}

/// Evaluates every design at every power on drop `index`.
pub fn run_drop(
    index: usize,
    geom: &ArrayGeometry,
    roi: &RegionOfInterest,
    designs: &[DesignUnderTest],
    settings: &MonteCarloSettings,
) -> Result<DropResult> {
    let mut rng = rng::stream(settings.seed, purpose::DROPS, index as u64);
    let k = settings.users;
    let positions = sample_ue_positions(roi, geom.height(), k, &mut rng);
    let channels = channel_matrix(&positions, geom)?;
    let noise_power = dbm_to_watt(settings.noise_dbm);
    let powers: Vec<f64> = settings
        .powers_dbm
        .iter()
        .map(|&d| dbm_to_watt(d))
        .collect();

    let evaluator = NmseOptEvaluator::from_positions(geom, positions.clone())?;
    let nmse_opts = designs
        .iter()
        .map(|d| {
            let best = evaluator.best_correlations(d.dictionary.grid())?;
            Ok((1.0 - best.iter().sum::<f64>() / k as f64).clamp(0.0, 1.0))
        })
        .collect::<Result<Vec<f64>>>()?;

    let fresh = || Slot {
        nmse_sum: 0.0,
        mr: UatfAccumulator::new(k),
        mmse: UatfAccumulator::new(k),
        last: DMatrix::zeros(geom.num_antennas(), k),
    };
    let mut slots: Vec<Vec<Slot>> = designs
        .iter()
        .map(|_| powers.iter().map(|_| fresh()).collect())
        .collect();

    for _ in 0..settings.realizations {
        let comb = generate_combiners(geom, settings.rf_chains, settings.pilot_slots, &mut rng)?;
        let noise: Vec<_> = (0..k)
            .map(|_| draw_combined_noise(&comb, &mut rng))
            .collect();
        let a = comb.stacked();
        let ah_re = &a * channels.map(|c| c.re);
        let ah_im = &a * channels.map(|c| c.im);
        for (d, design) in designs.iter().enumerate() {
            let est = PsompEstimator::new(&comb, &design.dictionary, settings.whiten)?;
            for (pi, &p) in powers.iter().enumerate() {
                let gain = p.sqrt() * k as f64;
                let mut estimates = DMatrix::<Complex64>::zeros(geom.num_antennas(), k);
                let slot = &mut slots[d][pi];
                for (u, unit_noise) in noise.iter().enumerate() {
                    let clean = nalgebra::DVector::from_iterator(
                        ah_re.nrows(),
                        ah_re
                            .column(u)
                            .iter()
                            .zip(ah_im.column(u).iter())
                            .map(|(&x, &y)| Complex64::new(x, y) * gain),
                    );
                    let obs = observation_from_parts(&clean, unit_noise, p, k, noise_power)?;
                    let res = est.estimate(&obs, settings.sparsity)?;
                    let truth = channels.column(u).into_owned();
                    slot.nmse_sum += nmse(res.estimate(), &truth)?;
                    estimates.set_column(u, res.estimate());
                }
                slot.mr.add(&mr_combiner(&estimates), &channels)?;
                slot.mmse
                    .add(&mmse_combiner(&estimates, p, noise_power)?, &channels)?;
                slot.last = estimates;
            }
        }
    }

    let mut outcomes = Vec::new();
    for (d, design) in designs.iter().enumerate() {
        for (pi, &p) in powers.iter().enumerate() {
            let slot = &slots[d][pi];
            let sinr_mr = slot.mr.sinr(p, noise_power)?;
            let sinr_mmse = slot.mmse.sinr(p, noise_power)?;
            outcomes.push(DropOutcome {
                design: design.name.clone(),
                power_dbm: settings.powers_dbm[pi],
                nmse: slot.nmse_sum / (k * settings.realizations) as f64,
                nmse_opt: nmse_opts[d],
                sum_se_mr: sum_se(&sinr_mr, settings.prelog),
                sum_se_mmse: sum_se(&sinr_mmse, settings.prelog),
                sinr_mr,
                sinr_mmse,
                last_estimates: slot.last.clone(),
            });
        }
    }
    if settings.perfect_csi {
        for (pi, &p) in powers.iter().enumerate() {
            let (sinr_mr, se_mr) =
                perfect_csi_sum_se(&channels, CombinerKind::Mr, p, noise_power, settings.prelog)?;
            let (sinr_mmse, se_mmse) = perfect_csi_sum_se(
                &channels,
                CombinerKind::Mmse,
                p,
                noise_power,
                settings.prelog,
            )?;
            outcomes.push(DropOutcome {
                design: PERFECT_CSI.to_string(),
                power_dbm: settings.powers_dbm[pi],
                nmse: 0.0,
                nmse_opt: 0.0,
                sinr_mr,
                sinr_mmse,
                sum_se_mr: se_mr,
                sum_se_mmse: se_mmse,
                last_estimates: channels.clone(),
            });
        }
    }
    Ok(DropResult {
        index,
        positions,
        channels,
        outcomes,
    })
}

pub const PERFECT_CSI: &str = "perfect-csi";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    NmseDb,
    NmseOptDb,
    SumSeMr,
    SumSeMmse,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::NmseDb,
        Metric::NmseOptDb,
        Metric::SumSeMr,
        Metric::SumSeMmse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::NmseDb => "nmse_db",
            Metric::NmseOptDb => "nmse_opt_db",
            Metric::SumSeMr => "sum_se_mr",
            Metric::SumSeMmse => "sum_se_mmse",
        }
    }

    fn extract(self, o: &DropOutcome) -> f64 {
        match self {
            Metric::NmseDb => o.nmse,
            Metric::NmseOptDb => o.nmse_opt,
            Metric::SumSeMr => o.sum_se_mr,
            Metric::SumSeMmse => o.sum_se_mmse,
        }
    }

    fn in_db(self) -> bool {
        matches!(self, Metric::NmseDb | Metric::NmseOptDb)
    }
}

/// Drop-averaged value of one metric.
///
/// NMSE metrics are averaged in linear scale and then converted; their
/// standard error is mapped to dB to first order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub power_dbm: f64,
    pub design: String,
    pub metric: Metric,
    pub value: f64,
    pub stderr: f64,
    pub drops: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub points: Vec<CurvePoint>,
    pub drops_completed: usize,
    /// `(drop index, error)` for drops that failed and were left out.
    pub failed_drops: Vec<(usize, String)>,
}

impl MonteCarloResult {
    /// True when no drop contributed, e.g. a zero-drop configuration.
    pub fn is_empty(&self) -> bool {
        self.drops_completed == 0
    }

    pub fn get(&self, design: &str, metric: Metric, power_dbm: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|c| {
            c.design == design && c.metric == metric && (c.power_dbm - power_dbm).abs() < 1e-9
        })
    }

    /// CSV `p_dbm,design,metric,value,stderr`. An empty result has the header
    /// followed by a single `# empty` line.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["p_dbm", "design", "metric", "value", "stderr"]);
        for c in &self.points {
            t.push(vec![
                sig9(c.power_dbm),
                c.design.clone(),
                c.metric.name().to_string(),
                sig9(c.value),
                sig9(c.stderr),
            ]);
        }
        t
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = self.to_csv().to_csv_string();
        if self.is_empty() {
            s.push_str("# empty\n");
        }
        s
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Aggregates completed drops into curves.
pub fn aggregate(
    drops: &[DropResult],
    settings: &MonteCarloSettings,
    designs: &[String],
) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    if drops.is_empty() {
        return out;
    }
    for &p in &settings.powers_dbm {
        for name in designs {
            for metric in Metric::ALL {
                if name == PERFECT_CSI && metric.in_db() {
                    continue;
                }
                let values: Vec<f64> = drops
                    .iter()
                    .flat_map(|d| d.outcomes.iter())
                    .filter(|o| &o.design == name && (o.power_dbm - p).abs() < 1e-12)
                    .map(|o| metric.extract(o))
                    .collect();
                let (mean, se) = mean_stderr(&values);
                let (value, stderr) = if metric.in_db() {
                    (to_db(mean), 10.0 / std::f64::consts::LN_10 * se / mean)
                } else {
                    (mean, se)
                };
                out.push(CurvePoint {
                    power_dbm: p,
                    design: name.clone(),
                    metric,
                    value,
                    stderr,
                    drops: values.len(),
                });
            }
        }
    }
    out
}

/// Runs every drop (concurrently, each on its own random stream) and
/// aggregates NMSE, `NMSE_opt` and sum-SE curves over the power sweep.
/// Failed drops are recorded and excluded instead of aborting the run.
pub fn run_monte_carlo(
    geom: &ArrayGeometry,
    roi: &RegionOfInterest,
    designs: &[DesignUnderTest],
    settings: &MonteCarloSettings,
) -> Result<MonteCarloResult> {
    settings.validate()?;
    let names: Vec<String> = designs.iter().map(|d| d.name.clone()).collect();
    if let Some(dup) = names
        .iter()
        .enumerate()
        .find(|(i, n)| names[..*i].contains(n))
    {
        return Err(Error::InvalidParameter(format!(
            "duplicate design name '{}'",
            dup.1
        )));
    }
    let results: Vec<(usize, Result<DropResult>)> = (0..settings.drops)
        .into_par_iter()
        .map(|d| (d, run_drop(d, geom, roi, designs, settings)))
        .collect();
    let mut ok = Vec::new();
    let mut failed_drops = Vec::new();
    for (d, r) in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                log::warn!("drop {d} failed: {e}");
                failed_drops.push((d, e.to_string()));
            }
        }
    }
    let mut all_names = names;
    if settings.perfect_csi {
        all_names.push(PERFECT_CSI.to_string());
    }
    Ok(MonteCarloResult {
        points: aggregate(&ok, settings, &all_names),
        drops_completed: ok.len(),
        failed_drops,
    })
}
