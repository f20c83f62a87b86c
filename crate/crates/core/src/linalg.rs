//! Log-domain determinants and factorizations of dense real matrices.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};

/// A pivot is treated as zero when its magnitude falls below this fraction of
/// the largest absolute row sum of the matrix.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Partial-pivoting LU with its log absolute determinant.
#[derive(Debug, Clone)]
pub struct Factorization {
    lu: LU<f64, Dyn, Dyn>,
    log_abs_det: f64,
}

impl Factorization {
    pub fn new(matrix: &DMatrix<f64>, origin: &str) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let max_row = matrix
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0_f64, f64::max);
        let floor = PIVOT_FLOOR * max_row;
        let lu = matrix.clone().lu();
        let u = lu.u();
        let mut log_abs_det = 0.0;
        for i in 0..u.nrows() {
            let pivot = u[(i, i)].abs();
            if !(pivot >= floor) || pivot == 0.0 {
                return Err(Error::SingularJacobian {
                    origin: origin.to_string(),
                    pivot,
                    floor,
                });
            }
            log_abs_det += pivot.ln();
        }
        Ok(Self { lu, log_abs_det })
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.lu
            .solve(rhs)
            .expect("factorization was checked for singular pivots")
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.lu
            .try_inverse()
            .expect("factorization was checked for singular pivots")
    }
}

/// `ln |det(matrix)|` from the LU pivots; the determinant itself is never
/// formed.
pub fn log_abs_det(matrix: &DMatrix<f64>) -> Result<f64> {
    Factorization::new(matrix, "matrix").map(|f| f.log_abs_det)
}
