//! Small dense linear-algebra kernels shared across the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

mod eig;
mod svd;

pub use eig::eigenvalues;
pub use svd::{sigma_min, singular_values};

#[allow(non_camel_case_types)]
pub type c64 = Complex<f64>;

/// Sort complex numbers by real part, then imaginary part (total order).
pub fn sort_complex(values: &mut [c64]) {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Infinity norm of a complex matrix (maximum absolute row sum).
pub fn inf_norm(a: &DMatrix<c64>) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Reciprocal condition estimate of a complex matrix in the infinity norm,
/// computed from the explicit inverse. Returns 0 when the matrix has no
/// LU inverse at all.
pub fn rcond_inf(a: &DMatrix<c64>) -> f64 {
    let norm_a = inf_norm(a);
    if norm_a == 0.0 {
        return 0.0;
    }
    match a.clone_owned().try_inverse() {
        Some(inv) => {
            let norm_inv = inf_norm(&inv);
            if norm_inv == 0.0 {
                0.0
            } else {
                1.0 / (norm_a * norm_inv)
            }
        }
        None => 0.0,
    }
}

/// One eigenvector of `a` for the (approximate) eigenvalue `shift`,
/// computed by inverse iteration in complex arithmetic.
pub fn inverse_iteration(a: &DMatrix<f64>, shift: c64) -> Option<DVector<c64>> {
    let n = a.nrows();
    if n == 0 {
        return None;
    }
    let scale = a.norm().max(1.0);
    // Nudge the shift off the exact eigenvalue so the factorization stays
    // usable; inverse iteration converges in very few steps regardless.
    for attempt in 0..4 {
        let mu = shift + c64::new(1.0, 1.0) * scale * 1e-12 * (attempt as f64);
        let mut shifted = a.map(|x| c64::new(x, 0.0));
        for i in 0..n {
            shifted[(i, i)] -= mu;
        }
        let lu = shifted.lu();
        let mut v = DVector::from_fn(n, |i, _| c64::new(1.0, (i as f64 + 1.0).recip()));
        v /= c64::new(v.norm(), 0.0);
        let mut ok = true;
        for _ in 0..8 {
            match lu.solve(&v) {
                Some(w) => {
                    let norm = w.norm();
                    if !norm.is_finite() || norm == 0.0 {
                        ok = false;
                        break;
                    }
                    v = w / c64::new(norm, 0.0);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Some(v);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rcond_identity_is_one() {
        let a = DMatrix::from_diagonal_element(3, 3, c64::new(1.0, 0.0));
        assert!((rcond_inf(&a) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rcond_singular_is_tiny() {
        let mut a = DMatrix::from_element(2, 2, c64::new(1.0, 0.0));
        a[(1, 1)] = c64::new(1.0 + 1e-15, 0.0);
        assert!(rcond_inf(&a) < 1e-13);
    }

    #[test]
    fn inverse_iteration_recovers_eigenvector() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let v = inverse_iteration(&a, c64::new(3.0, 0.0)).unwrap();
        // Eigenvector of eigenvalue 3 is (1, 1)/sqrt(2).
        let ratio = v[0] / v[1];
        assert!((ratio - c64::new(1.0, 0.0)).norm() < 1e-8);
    }
}
