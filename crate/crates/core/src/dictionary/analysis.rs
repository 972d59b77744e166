//! Correlation analysis between steering vectors of two scene points: the
//! quadratic-phase approximation, its Fresnel-integral limit for points on a
//! common level curve and the Dirichlet-kernel far-field limit.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::geometry::{ArrayGeometry, ScenePoint};
use crate::Result;

/// Both routes for the normalized correlation of two steering vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    /// `|(1/M) Σ_m exp(j(A i + B i²))|` over symmetric offsets `i`.
    pub quadratic: f64,
    /// `|s(p)^H s(q)| / M` with exact distances.
    pub exact: f64,
    /// Linear phase coefficient `A = (2πδ/λ)(Γ_q − Γ_p)`.
    pub linear_coeff: f64,
    /// Quadratic phase coefficient `B = (πδ²/λ)[(1−Γ_p²)/R_p − (1−Γ_q²)/R_q]`.
    pub quadratic_coeff: f64,
}

pub fn phase_coefficients(p: &ScenePoint, q: &ScenePoint, geom: &ArrayGeometry) -> (f64, f64) {
    let (d, lambda) = (geom.spacing(), geom.wavelength());
    let (gp, gq) = (p.gamma(), q.gamma());
    let a = 2.0 * PI * d / lambda * (gq - gp);
    let b = PI * d * d / lambda * ((1.0 - gp * gp) / p.range() - (1.0 - gq * gq) / q.range());
    (a, b)
}

/// `|(1/M) Σ exp(j(A i + B i²))|`, `i = m − (M−1)/2`.
pub fn quadratic_phase_sum(a: f64, b: f64, geom: &ArrayGeometry) -> f64 {
    let m = geom.num_antennas();
    let sum: Complex64 = (0..m)
        .map(|idx| {
            let i = geom.index_offset(idx);
            Complex64::from_polar(1.0, a * i + b * i * i)
        })
        .sum();
    sum.norm() / m as f64
}

pub fn correlation_exact(
    p: &ScenePoint,
    q: &ScenePoint,
    geom: &ArrayGeometry,
) -> Result<Correlation> {
    let sp = geom.steering_vector(p)?;
    let sq = geom.steering_vector(q)?;
    let inner: Complex64 = sp.iter().zip(&sq).map(|(a, b)| a.conj() * b).sum();
    let (a, b) = phase_coefficients(p, q, geom);
    Ok(Correlation {
        quadratic: quadratic_phase_sum(a, b, geom),
        exact: inner.norm() / geom.num_antennas() as f64,
        linear_coeff: a,
        quadratic_coeff: b,
    })
}

/// `β` for two ranges on the level curve `Γ = g`:
/// `β² = M²δ²(1 − g²)/(2λ) · |1/R_p − 1/R_q|`.
pub fn same_curve_beta(r_p: f64, r_q: f64, g: f64, geom: &ArrayGeometry) -> f64 {
    let md = geom.num_antennas() as f64 * geom.spacing();
    (md * md * (1.0 - g * g) / (2.0 * geom.wavelength()) * (1.0 / r_p - 1.0 / r_q).abs()).sqrt()
}

/// Range `R_q < R_p` on the curve `Γ = g` at Fresnel distance `β` from `R_p`.
pub fn range_at_beta(r_p: f64, g: f64, beta: f64, geom: &ArrayGeometry) -> f64 {
    let md = geom.num_antennas() as f64 * geom.spacing();
    let step = 2.0 * geom.wavelength() * beta * beta / (md * md * (1.0 - g * g));
    1.0 / (1.0 / r_p + step)
}

/// Fresnel integrals `(C(x), S(x))` with kernels `cos(πt²/2)`, `sin(πt²/2)`,
/// by adaptive Gauss–Kronrod quadrature to `1e−10` absolute error.
pub fn fresnel_integrals(x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, 0.0);
    }
    let sign = x.signum();
    let x = x.abs();
    // One panel per half oscillation of the integrand keeps the recursion shallow.
    let panels = ((x * x).ceil() as usize).max(1);
    let mut c = 0.0;
    let mut s = 0.0;
    // Below ~1e−14 the Kronrod–Gauss difference is dominated by roundoff.
    let tol = (1e-10 / panels as f64).max(1e-14);
    let edges = |i: usize| x * (i as f64 / panels as f64).sqrt();
    for i in 0..panels {
        let (lo, hi) = (edges(i), edges(i + 1));
        c += adaptive_gk(&|t: f64| (FRAC_PI_2 * t * t).cos(), lo, hi, tol, 16);
        s += adaptive_gk(&|t: f64| (FRAC_PI_2 * t * t).sin(), lo, hi, tol, 16);
    }
    (sign * c, sign * s)
}

/// `G(β) = (C(β) + j S(β)) / β`.
pub fn fresnel_g(beta: f64) -> Complex64 {
    let (c, s) = fresnel_integrals(beta);
    Complex64::new(c, s) / beta
}

/// Far-field correlation `|sin(πMδΔΓ/λ) / (M sin(πδΔΓ/λ))|`; removable
/// singularities evaluate to 1.
pub fn dirichlet_correlation(delta_gamma: f64, geom: &ArrayGeometry) -> f64 {
    let m = geom.num_antennas() as f64;
    let x = PI * geom.spacing() * delta_gamma / geom.wavelength();
    let den = m * x.sin();
    if den.abs() < 1e-12 {
        return 1.0;
    }
    ((m * x).sin() / den).abs()
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return value;
    }
    let mid = 0.5 * (a + b);
    adaptive_gk(f, a, mid, 0.5 * tol, depth - 1) + adaptive_gk(f, mid, b, 0.5 * tol, depth - 1)
}
