//! Smallest singular value of a complex matrix via one-sided Jacobi.
//!
//! The one-sided scheme orthogonalizes column pairs directly, which keeps the
//! absolute accuracy of small singular values at the `eps * ||A||` level. A
//! Gram-matrix route (eigenvalues of conj(A)'A) would square the condition
//! number and lose half the digits, which the pencil residual checks cannot
//! afford.

use nalgebra::DMatrix;

use crate::linalg::c64;

const MAX_SWEEPS: usize = 64;

/// Smallest singular value of `a`.
pub fn sigma_min(a: &DMatrix<c64>) -> f64 {
    singular_values(a).into_iter().fold(f64::INFINITY, f64::min)
}

/// All singular values, unordered.
pub fn singular_values(a: &DMatrix<c64>) -> Vec<f64> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    // Work on the tall orientation so column norms are the singular values.
    let mut u = if rows >= cols {
        a.clone_owned()
    } else {
        a.adjoint()
    };
    let m = u.nrows();
    let n = u.ncols();
    let eps = f64::EPSILON;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = c64::new(0.0, 0.0);
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    app += up.norm_sqr();
                    aqq += uq.norm_sqr();
                    apq += up.conj() * uq;
                }
                let mag = apq.norm();
                if mag <= eps * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                // Jacobi angle for the 2x2 Hermitian Gram block.
                let theta = (aqq - app) / (2.0 * mag);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let phase = apq / mag;
                let phase_conj = phase.conj();
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = up * c - uq * phase_conj * s;
                    u[(i, q)] = up * phase * s + uq * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    (0..n)
        .map(|j| (0..m).map(|i| u[(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect()
}
