//! SVD-based minimum-norm least squares.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used throughout the solver.
pub const RCOND: f64 = 1e-10;

/// Moore-Penrose pseudoinverse of a dense matrix, truncated at
/// `rcond * sigma_max`.
#[derive(Clone, Debug)]
pub struct PseudoInverse {
    pinv: DMatrix<f64>,
    rank: usize,
    singular_values: DVector<f64>,
}

impl PseudoInverse {
    pub fn new(a: &DMatrix<f64>, rcond: f64) -> Self {
        let (rows, cols) = a.shape();
        if rows == 0 || cols == 0 {
            return Self {
                pinv: DMatrix::zeros(cols, rows),
                rank: 0,
                singular_values: DVector::zeros(0),
            };
        }
        let svd = a.clone().svd(true, true);
        let u = svd.u.expect("left singular vectors requested");
        let v_t = svd.v_t.expect("right singular vectors requested");
        let s = svd.singular_values;
        let s_max = s.iter().copied().fold(0.0, f64::max);
        let cutoff = rcond * s_max;
        let mut pinv = DMatrix::zeros(cols, rows);
        let mut rank = 0;
        for (i, &si) in s.iter().enumerate() {
            if si > cutoff && si > 0.0 {
                rank += 1;
                // pinv += v_i * u_i^T / s_i
                pinv.ger(1.0 / si, &v_t.row(i).transpose(), &u.column(i), 1.0);
            }
        }
        Self {
            pinv,
            rank,
            singular_values: s,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn apply(&self, b: &DVector<f64>) -> DVector<f64> {
        &self.pinv * b
    }
}

/// Minimum-norm minimizer of `||A x - b||`, with the numerical rank of `A`.
pub fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> (DVector<f64>, usize) {
    let p = PseudoInverse::new(a, rcond);
    (p.apply(b), p.rank())
}
