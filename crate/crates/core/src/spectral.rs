//! Full system Jacobian, its eigenspectrum, the quadratic matrix pencil, and
//! stability margins.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::equilibrium::FlowJacobian;
use crate::error::{Error, Result};
use crate::linalg::{self, c64, sort_complex};
use crate::netmodel::ReducedSystem;

/// Relative tolerance (times `||J||_F`) below which an eigenvalue belongs to
/// the zero cluster.
pub const ZERO_TOL_REL: f64 = 1e-7;
/// Relative tolerance (times `||J||_F`) inside which a real-part margin is
/// considered indistinguishable from zero.
pub const RE_TOL_REL: f64 = 1e-7;

/// The 2n x 2n Jacobian of the swing-equation vector field:
/// zero block, identity block, -M^-1 L, -M^-1 D, with
/// M = (1/omega_s) diag(M_i) and D = (1/omega_s) diag(D_i).
#[derive(Debug, Clone)]
pub struct SystemJacobian {
    pub j: DMatrix<f64>,
    pub n: usize,
}

pub fn build_jacobian(sys: &ReducedSystem, l: &FlowJacobian) -> Result<SystemJacobian> {
    let n = sys.n;
    if l.l.nrows() != n || l.l.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: l.l.nrows(),
        });
    }
    for (i, &m) in sys.m.iter().enumerate() {
        if !m.is_finite() || m <= 0.0 {
            return Err(Error::NonPositiveParameter {
                name: "m",
                index: i,
                value: m,
            });
        }
    }
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        for k in 0..n {
            j[(n + i, k)] = -sys.omega_s / sys.m[i] * l.l[(i, k)];
        }
        j[(n + i, n + i)] = -sys.d[i] / sys.m[i];
    }
    Ok(SystemJacobian { j, n })
}

/// Eigenvalues of a real square matrix (backward-stable dense method:
/// balancing, Hessenberg reduction, shifted QR).
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<c64>> {
    linalg::eigenvalues(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    AsymptoticallyStableReduced,
    Unstable,
    InconclusiveZeroCluster,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// All eigenvalues of J, sorted by real then imaginary part.
    pub eigenvalues: Vec<c64>,
    /// Indices of eigenvalues with |lambda| <= zero_tol.
    pub zero_cluster: Vec<usize>,
    /// Nonzero eigenvalue closest to the imaginary axis; ties prefer the
    /// smaller |Im|, then nonnegative Im.
    pub lambda2: Option<c64>,
    /// Largest real part over eigenvalues outside the zero cluster.
    pub max_re_nonzero: Option<f64>,
    /// Normalized pencil residual per eigenvalue, when computed.
    pub pencil_residuals: Option<Vec<f64>>,
    pub zero_tol: f64,
    pub re_tol: f64,
    pub j_norm: f64,
}

/// Compute the spectrum of an assembled Jacobian and classify it.
pub fn analyze_spectrum(jac: &SystemJacobian) -> Result<SpectrumReport> {
    let mut eigs = linalg::eigenvalues(&jac.j)?;
    sort_complex(&mut eigs);
    let j_norm = jac.j.norm();
    let zero_tol = ZERO_TOL_REL * j_norm;
    let re_tol = RE_TOL_REL * j_norm;

    let zero_cluster: Vec<usize> = eigs
        .iter()
        .enumerate()
        .filter(|(_, e)| e.norm() <= zero_tol)
        .map(|(i, _)| i)
        .collect();
    let in_cluster = |i: usize| zero_cluster.binary_search(&i).is_ok();

    let mut lambda2 = None::<c64>;
    let mut max_re = None::<f64>;
    for (i, e) in eigs.iter().enumerate() {
        if in_cluster(i) {
            continue;
        }
        max_re = Some(max_re.map_or(e.re, |m: f64| m.max(e.re)));
        let better = match lambda2 {
            None => true,
            Some(cur) => {
                let key = (e.re.abs(), e.im.abs(), e.im < 0.0);
                let cur_key = (cur.re.abs(), cur.im.abs(), cur.im < 0.0);
                key < cur_key
            }
        };
        if better {
            lambda2 = Some(*e);
        }
    }

    Ok(SpectrumReport {
        eigenvalues: eigs,
        zero_cluster,
        lambda2,
        max_re_nonzero: max_re,
        pencil_residuals: None,
        zero_tol,
        re_tol,
        j_norm,
    })
}

/// Convenience: flow Jacobian, system Jacobian, and spectrum at `delta`.
pub fn spectrum_at(sys: &ReducedSystem, delta: &[f64]) -> Result<(SystemJacobian, SpectrumReport)> {
    let l = crate::equilibrium::flow_jacobian(sys, delta)?;
    let jac = build_jacobian(sys, &l)?;
    let report = analyze_spectrum(&jac)?;
    Ok((jac, report))
}

/// Normalized singularity measure of the quadratic pencil
/// P(lambda) = lambda^2 M + lambda D + L at a complex point:
/// sigma_min(P) / ||P||_F. Zero signals singularity.
pub fn pencil_residual(sys: &ReducedSystem, l: &FlowJacobian, lambda: c64) -> f64 {
    let p = pencil_matrix(sys, l, lambda);
    let norm = p.norm();
    if norm == 0.0 {
        return 0.0;
    }
    linalg::sigma_min(&p) / norm
}

fn pencil_matrix(sys: &ReducedSystem, l: &FlowJacobian, lambda: c64) -> DMatrix<c64> {
    let n = sys.n;
    let mut p = l.l.map(|x| c64::new(x, 0.0));
    for i in 0..n {
        p[(i, i)] += lambda * lambda * (sys.m[i] / sys.omega_s) + lambda * (sys.d[i] / sys.omega_s);
    }
    p
}

/// Fill in per-eigenvalue pencil residuals.
pub fn attach_pencil_residuals(report: &mut SpectrumReport, sys: &ReducedSystem, l: &FlowJacobian) {
    let residuals = report
        .eigenvalues
        .iter()
        .map(|&e| pencil_residual(sys, l, e))
        .collect();
    report.pencil_residuals = Some(residuals);
}

/// Classify a spectrum computed at an equilibrium.
pub fn stability_verdict(report: &SpectrumReport) -> StabilityVerdict {
    match report.max_re_nonzero {
        Some(max_re) if max_re > report.re_tol => StabilityVerdict::Unstable,
        Some(max_re) if report.zero_cluster.len() == 1 && max_re < -report.re_tol => {
            StabilityVerdict::AsymptoticallyStableReduced
        }
        _ => StabilityVerdict::InconclusiveZeroCluster,
    }
}

/// Coefficients (ascending) of det P(lambda), a real polynomial of degree
/// 2n, recovered by evaluation-interpolation on a circle around the origin.
/// Intended as the independent route for checking the pencil/Jacobian
/// spectral equivalence on small systems.
///
/// The sampling radius is the pencil's natural frequency scale
/// sqrt(||L||_inf / max_i M_i/omega_s): the interpolation conditioning of
/// the low-order coefficients degrades as radius^(2n), and root magnitudes
/// cluster around this scale, so a matrix-norm radius (orders larger) loses
/// the constant term entirely.
pub fn pencil_det_polynomial(sys: &ReducedSystem, l: &FlowJacobian) -> Result<Vec<f64>> {
    let n = sys.n;
    if l.l.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: l.l.nrows(),
        });
    }
    let degree = 2 * n;
    let k = degree + 1;
    let l_inf =
        l.l.row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
    let m_max = sys.m.iter().map(|m| m / sys.omega_s).fold(0.0f64, f64::max);
    let radius = (l_inf / m_max).sqrt().max(1.0);

    let mut samples = Vec::with_capacity(k);
    for idx in 0..k {
        let angle = 2.0 * PI * idx as f64 / k as f64;
        let z = c64::from_polar(radius, angle);
        let p = pencil_matrix(sys, l, z);
        samples.push(p.lu().determinant());
    }

    // Inverse DFT, then undo the radius scaling per power.
    let mut coeffs = Vec::with_capacity(k);
    for m in 0..k {
        let mut acc = c64::new(0.0, 0.0);
        for (idx, det) in samples.iter().enumerate() {
            let angle = -2.0 * PI * (idx * m) as f64 / k as f64;
            acc += det * c64::from_polar(1.0, angle);
        }
        acc /= k as f64;
        coeffs.push(acc / radius.powi(m as i32));
    }
    Ok(coeffs.into_iter().map(|c| c.re).collect())
}

/// Roots of a real polynomial (ascending coefficients) via the companion
/// matrix of its monic form.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<c64>> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last() == Some(&0.0) {
        c.pop();
    }
    let degree = c.len().saturating_sub(1);
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = c[degree];
    let mut companion = DMatrix::zeros(degree, degree);
    for i in 0..degree {
        companion[(i, degree - 1)] = -c[i] / lead;
        if i > 0 {
            companion[(i, i - 1)] = 1.0;
        }
    }
    let mut roots = linalg::eigenvalues(&companion)?;
    sort_complex(&mut roots);
    Ok(roots)
}

/// A real direction spanning the dominant unstable mode, as a 2n state
/// vector, when the spectrum has an eigenvalue with positive real part.
pub fn unstable_direction(jac: &SystemJacobian, report: &SpectrumReport) -> Option<Vec<f64>> {
    let in_cluster: std::collections::BTreeSet<usize> =
        report.zero_cluster.iter().copied().collect();
    let lambda = report
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(i, e)| !in_cluster.contains(i) && e.re > 0.0)
        .max_by(|(_, a), (_, b)| a.re.total_cmp(&b.re))
        .map(|(_, e)| *e)?;
    let v = linalg::inverse_iteration(&jac.j, lambda)?;
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let (mut dir, n) = if norm(&re) >= norm(&im) {
        let n = norm(&re);
        (re, n)
    } else {
        let n = norm(&im);
        (im, n)
    };
    if n == 0.0 {
        return None;
    }
    for x in &mut dir {
        *x /= n;
    }
    Some(dir)
}
