//! Deterministic line-of-sight near-field channels.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::geometry::{ArrayGeometry, ScenePoint};
use crate::{Error, Result};

/// Channel from a single-antenna user to every BS antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub coefficients: DVector<Complex64>,
    pub source: ScenePoint,
}

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coefficients.norm()
    }

    /// Unit-norm copy of the coefficients.
    pub fn normalized(&self) -> Result<DVector<Complex64>> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroChannel);
        }
        Ok(self.coefficients.unscale(n))
    }
}

/// `h_m = λ/(4π r_m) · exp(−j 2π r_m / λ)` with exact spherical distances.
pub fn channel_vector(p: &ScenePoint, geom: &ArrayGeometry) -> Result<ChannelVector> {
    let lambda = geom.wavelength();
    let k = geom.wavenumber();
    let r = geom.exact_distances(p)?;
    let coefficients = DVector::from_iterator(
        r.len(),
        r.iter()
            .map(|&rm| Complex64::from_polar(lambda / (4.0 * PI * rm), -k * rm)),
    );
    Ok(ChannelVector {
        coefficients,
        source: *p,
    })
}

/// Stacks one channel per position as the columns of an `M × K` matrix.
pub fn channel_matrix(
    positions: &[ScenePoint],
    geom: &ArrayGeometry,
) -> Result<DMatrix<Complex64>> {
    if positions.is_empty() {
        return Err(Error::InvalidParameter(
            "channel matrix needs at least one user".into(),
        ));
    }
    let columns = positions
        .iter()
        .map(|p| channel_vector(p, geom).map(|h| h.coefficients))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&columns))
}
