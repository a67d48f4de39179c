//! Dense nonsymmetric eigenvalue computation.
//!
//! Classic three-stage scheme: diagonal balancing, Householder reduction to
//! upper Hessenberg form, then the implicit double-shift QR iteration with
//! exceptional shifts. Eigenvalues only; Schur vectors are never accumulated.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::c64;

/// Eigenvalues of a real square matrix.
///
/// The iteration budget is `30 * n` QR sweeps in total; exceeding it is
/// reported as [`Error::EigenNonConvergence`].
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<c64>> {
    assert_eq!(a.nrows(), a.ncols(), "eigenvalues: matrix must be square");
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone_owned();
    balance(&mut h);
    hessenberg(&mut h);
    francis_qr(&mut h)
}

/// Iterative row/column norm equalization (similarity scaling by powers of 2,
/// so no rounding error is introduced).
fn balance(a: &mut DMatrix<f64>) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            while cc < r / RADIX {
                f *= RADIX;
                cc *= sqrdx;
            }
            while cc > r * RADIX {
                f /= RADIX;
                cc /= sqrdx;
            }
            if (cc + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= g;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Householder similarity reduction to upper Hessenberg form.
fn hessenberg(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    if n < 3 {
        return;
    }
    let mut ort = vec![0.0; n];
    for m in 1..n - 1 {
        let mut scale = 0.0;
        for i in m..n {
            scale += a[(i, m - 1)].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut h = 0.0;
        for i in (m..n).rev() {
            ort[i] = a[(i, m - 1)] / scale;
            h += ort[i] * ort[i];
        }
        let mut g = h.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        h -= ort[m] * g;
        ort[m] -= g;

        // Apply the reflection from both sides: (I - u uᵀ/h) A (I - u uᵀ/h).
        for j in m..n {
            let mut f = 0.0;
            for i in (m..n).rev() {
                f += ort[i] * a[(i, j)];
            }
            f /= h;
            for i in m..n {
                a[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..n {
            let mut f = 0.0;
            for j in (m..n).rev() {
                f += ort[j] * a[(i, j)];
            }
            f /= h;
            for j in m..n {
                a[(i, j)] -= f * ort[j];
            }
        }
        a[(m, m - 1)] = scale * g;
        for i in m + 1..n {
            a[(i, m - 1)] = 0.0;
        }
    }
}

/// Implicit double-shift QR iteration on an upper Hessenberg matrix.
fn francis_qr(h: &mut DMatrix<f64>) -> Result<Vec<c64>> {
    let n = h.nrows();
    let eps = f64::EPSILON;
    let budget = 30 * n;
    let mut total_sweeps = 0usize;

    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += h[(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(vec![c64::new(0.0, 0.0); n]);
    }

    let a = |h: &DMatrix<f64>, i: isize, j: isize| h[(i as usize, j as usize)];

    let mut nn: isize = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        'search: loop {
            // Look for a negligible subdiagonal element.
            let mut l = nn;
            while l >= 1 {
                let mut s = a(h, l - 1, l - 1).abs() + a(h, l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a(h, l, l - 1).abs() <= eps * s {
                    h[(l as usize, (l - 1) as usize)] = 0.0;
                    break;
                }
                l -= 1;
            }

            let mut x = a(h, nn, nn);
            if l == nn {
                // One real eigenvalue deflates.
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
                break 'search;
            }
            let mut y = a(h, nn - 1, nn - 1);
            let mut w = a(h, nn, nn - 1) * a(h, nn - 1, nn);
            if l == nn - 1 {
                // A 2x2 block deflates: solve its characteristic equation.
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let z = p + z.copysign(if p == 0.0 { 1.0 } else { p });
                    wr[(nn - 1) as usize] = x + z;
                    wr[nn as usize] = wr[(nn - 1) as usize];
                    if z != 0.0 {
                        wr[nn as usize] = x - w / z;
                    }
                    wi[(nn - 1) as usize] = 0.0;
                    wi[nn as usize] = 0.0;
                } else {
                    wr[(nn - 1) as usize] = x + p;
                    wr[nn as usize] = x + p;
                    wi[(nn - 1) as usize] = -z;
                    wi[nn as usize] = z;
                }
                nn -= 2;
                break 'search;
            }

            if total_sweeps >= budget {
                return Err(Error::EigenNonConvergence(budget));
            }
            if its == 10 || its == 20 {
                // Exceptional shift to break stagnation.
                t += x;
                for i in 0..=nn {
                    let d = a(h, i, i) - x;
                    h[(i as usize, i as usize)] = d;
                }
                let s = a(h, nn, nn - 1).abs() + a(h, nn - 1, nn - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            total_sweeps += 1;

            // Find two consecutive small subdiagonals where the implicit
            // double shift can start.
            let mut m = nn - 2;
            let mut p = 0.0;
            let mut q = 0.0;
            let mut r = 0.0;
            while m >= l {
                let z = a(h, m, m);
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a(h, m + 1, m) + a(h, m, m + 1);
                q = a(h, m + 1, m + 1) - z - rr - ss;
                r = a(h, m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a(h, m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (a(h, m - 1, m - 1).abs() + z.abs() + a(h, m + 1, m + 1).abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                h[(i as usize, (i - 2) as usize)] = 0.0;
                if i != m + 2 {
                    h[(i as usize, (i - 3) as usize)] = 0.0;
                }
            }

            // Double QR sweep on rows l..=nn, columns m..=nn.
            for k in m..=nn - 1 {
                if k != m {
                    p = a(h, k, k - 1);
                    q = a(h, k + 1, k - 1);
                    r = if k != nn - 1 { a(h, k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r)
                    .sqrt()
                    .copysign(if p == 0.0 { 1.0 } else { p });
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        let v = -a(h, k, k - 1);
                        h[(k as usize, (k - 1) as usize)] = v;
                    }
                } else {
                    h[(k as usize, (k - 1) as usize)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nn {
                    let mut pp = a(h, k, j) + q * a(h, k + 1, j);
                    if k != nn - 1 {
                        pp += r * a(h, k + 2, j);
                        let v = a(h, k + 2, j) - pp * z;
                        h[((k + 2) as usize, j as usize)] = v;
                    }
                    let v1 = a(h, k + 1, j) - pp * y;
                    h[((k + 1) as usize, j as usize)] = v1;
                    let v0 = a(h, k, j) - pp * x;
                    h[(k as usize, j as usize)] = v0;
                }
                let mmin = if nn < k + 3 { nn } else { k + 3 };
                for i in l..=mmin {
                    let mut pp = x * a(h, i, k) + y * a(h, i, k + 1);
                    if k != nn - 1 {
                        pp += z * a(h, i, k + 2);
                        let v = a(h, i, k + 2) - pp * r;
                        h[(i as usize, (k + 2) as usize)] = v;
                    }
                    let v1 = a(h, i, k + 1) - pp * q;
                    h[(i as usize, (k + 1) as usize)] = v1;
                    let v0 = a(h, i, k) - pp;
                    h[(i as usize, k as usize)] = v0;
                }
            }
        }
    }

    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| c64::new(re, im))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sort_complex;

    fn assert_spectrum(a: &DMatrix<f64>, expected: &[c64], tol: f64) {
        let mut got = eigenvalues(a).unwrap();
        let mut want = expected.to_vec();
        sort_complex(&mut got);
        sort_complex(&mut want);
        for (g, w) in got.iter().zip(&want) {
            assert!(
                (g - w).norm() <= tol,
                "eigenvalue mismatch: got {g}, want {w} (all: {got:?})"
            );
        }
    }

    #[test]
    fn identity_4x4() {
        let a = DMatrix::<f64>::identity(4, 4);
        assert_spectrum(&a, &[c64::new(1.0, 0.0); 4], 1e-14);
    }

    #[test]
    fn companion_2x2_complex_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -1.0]);
        let im = (7.0f64).sqrt() / 2.0;
        assert_spectrum(&a, &[c64::new(-0.5, -im), c64::new(-0.5, im)], 1e-12);
    }

    #[test]
    fn upper_triangular_reads_diagonal() {
        let a = DMatrix::from_row_slice(3, 3, &[3.0, 5.0, -1.0, 0.0, -2.0, 4.0, 0.0, 0.0, 7.0]);
        assert_spectrum(
            &a,
            &[c64::new(3.0, 0.0), c64::new(-2.0, 0.0), c64::new(7.0, 0.0)],
            1e-12,
        );
    }

    #[test]
    fn zero_matrix() {
        let a = DMatrix::<f64>::zeros(5, 5);
        assert_spectrum(&a, &[c64::new(0.0, 0.0); 5], 0.0);
    }

    #[test]
    fn defective_jordan_block() {
        // Jordan block with eigenvalue 2 (algebraic multiplicity 3).
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 2.0]);
        let eigs = eigenvalues(&a).unwrap();
        for e in eigs {
            assert!((e - c64::new(2.0, 0.0)).norm() < 1e-4);
        }
    }

    #[test]
    fn badly_scaled_matrix_balances() {
        // Similarity-scaled version of a well-behaved matrix.
        let base = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, -1.0, 0.0, 3.0, 0.25, -2.0, 4.0]);
        let d = [1e6, 1.0, 1e-6];
        let mut scaled = base.clone();
        for i in 0..3 {
            for j in 0..3 {
                scaled[(i, j)] = base[(i, j)] * d[i] / d[j];
            }
        }
        let mut e1 = eigenvalues(&base).unwrap();
        let mut e2 = eigenvalues(&scaled).unwrap();
        sort_complex(&mut e1);
        sort_complex(&mut e2);
        for (a, b) in e1.iter().zip(&e2) {
            assert!((a - b).norm() < 1e-8 * base.norm(), "{a} vs {b}");
        }
    }
}
