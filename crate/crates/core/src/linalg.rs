//! Complex inner products through real matrix products.
//!
//! nalgebra dispatches large `f64` products to `matrixmultiply`, so splitting
//! a complex matrix into real and imaginary planes is much faster than
//! multiplying `Complex64` matrices directly.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// A complex matrix stored as separate real and imaginary planes.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMatrix {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl SplitMatrix {
    pub fn from_complex(m: &DMatrix<Complex64>) -> Self {
        Self {
            re: m.map(|c| c.re),
            im: m.map(|c| c.im),
        }
    }

    /// Builds the *conjugate transpose* of the matrix whose columns are `cols`.
    pub fn adjoint_of_columns<'a, I>(cols: I, rows: usize) -> Self
    where
        I: ExactSizeIterator<Item = &'a [Complex64]>,
    {
        let n = cols.len();
        let mut re = DMatrix::zeros(n, rows);
        let mut im = DMatrix::zeros(n, rows);
        for (i, col) in cols.enumerate() {
            for (j, c) in col.iter().enumerate() {
                re[(i, j)] = c.re;
                im[(i, j)] = -c.im;
            }
        }
        Self { re, im }
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            re: self.re.transpose(),
            im: -self.im.transpose(),
        }
    }

    pub fn columns(&self, start: usize, count: usize) -> Self {
        Self {
            re: self.re.columns(start, count).into_owned(),
            im: self.im.columns(start, count).into_owned(),
        }
    }

    /// `|self · other|²` element-wise.
    pub fn abs_sqr_product(&self, other: &SplitMatrix) -> DMatrix<f64> {
        let re = &self.re * &other.re - &self.im * &other.im;
        let im = &self.re * &other.im + &self.im * &other.re;
        re.zip_map(&im, |a, b| a * a + b * b)
    }
}
