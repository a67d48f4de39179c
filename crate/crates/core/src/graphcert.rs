//! The weighted digraph induced by the flow Jacobian, the operating-region
//! check, Laplacian structure verification, and the per-node algebraic
//! stability certificate with its retuning and margin-sweep extensions.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{self, Equilibrium, FlowJacobian, SolveOptions};
use crate::error::{Error, Result};
use crate::linalg::{self, c64};
use crate::netmodel::ReducedSystem;
use crate::spectral;

/// Numerical margin for the strict interval boundaries of the operating
/// region, radians.
pub const PHI_MARGIN_DEFAULT: f64 = 1e-9;
/// Tolerance on |omega| for the "speeds at rest" part of the region check.
pub const OMEGA_TOL: f64 = 1e-9;
/// Eigenvalues of L with real part below this are flagged as violations.
pub const LAPLACIAN_RE_TOL: f64 = -1e-9;
/// Principal minors below this are flagged as violations.
pub const MINOR_TOL: f64 = -1e-10;
/// Largest machine count for which all principal minors are enumerated.
pub const MINOR_MAX_N: usize = 8;
/// Relative threshold (times ||L||_inf) for the zero-eigenvalue cluster of L.
pub const L_ZERO_TOL_REL: f64 = 1e-7;

/// Per-node certificate terms are evaluated in parallel above this size.
const PAR_THRESHOLD: usize = 64;

/// One directed arc of the induced graph.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    /// w_ij = V_i V_j Y_ij sin(phi_ij)
    pub weight: f64,
    /// phi_ij = theta_ij - delta_i + delta_j
    pub phi: f64,
}

/// Weighted digraph induced by the flow Jacobian at a given angle vector.
/// An arc (i, j) exists iff Y_ij > 0 and i != j.
#[derive(Debug, Clone)]
pub struct InducedDigraph {
    pub n: usize,
    pub arcs: Vec<Arc>,
    /// phi for every ordered pair (defined whether or not the arc exists).
    pub phi: DMatrix<f64>,
}

pub fn induced_digraph(sys: &ReducedSystem, delta: &[f64]) -> Result<InducedDigraph> {
    let n = sys.n;
    if delta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: delta.len(),
        });
    }
    let mut arcs = Vec::new();
    let mut phi = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let angle = sys.y_ang[i][j] - delta[i] + delta[j];
            phi[(i, j)] = angle;
            if i != j && sys.y_mag[i][j] > 0.0 {
                arcs.push(Arc {
                    from: i,
                    to: j,
                    weight: sys.v_mag[i] * sys.v_mag[j] * sys.y_mag[i][j] * angle.sin(),
                    phi: angle,
                });
            }
        }
    }
    Ok(InducedDigraph { n, arcs, phi })
}

/// Out-degree-minus-adjacency Laplacian of the digraph. Reconstructs the
/// flow Jacobian entrywise.
pub fn digraph_laplacian(graph: &InducedDigraph) -> DMatrix<f64> {
    let n = graph.n;
    let mut l = DMatrix::zeros(n, n);
    for arc in &graph.arcs {
        l[(arc.from, arc.to)] = -arc.weight;
        l[(arc.from, arc.from)] += arc.weight;
    }
    l
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaCheck {
    pub in_omega: bool,
    pub phi_min: Option<f64>,
    pub phi_max: Option<f64>,
    /// Arcs whose phi falls outside the open interval (0, pi).
    pub violating_pairs: Vec<(usize, usize, f64)>,
}

/// Strict-interval membership check: every arc angle in (0, pi) and all
/// speeds at rest, with a numerical margin on the boundaries.
pub fn check_omega(graph: &InducedDigraph, omega: &[f64]) -> OmegaCheck {
    check_omega_with_margin(graph, omega, PHI_MARGIN_DEFAULT)
}

pub fn check_omega_with_margin(graph: &InducedDigraph, omega: &[f64], margin: f64) -> OmegaCheck {
    let mut phi_min = None::<f64>;
    let mut phi_max = None::<f64>;
    let mut violating = Vec::new();
    for arc in &graph.arcs {
        phi_min = Some(phi_min.map_or(arc.phi, |m: f64| m.min(arc.phi)));
        phi_max = Some(phi_max.map_or(arc.phi, |m: f64| m.max(arc.phi)));
        if !(arc.phi > margin && arc.phi < PI - margin) {
            violating.push((arc.from, arc.to, arc.phi));
        }
    }
    let omega_ok = omega.iter().all(|w| w.abs() <= OMEGA_TOL);
    OmegaCheck {
        in_omega: violating.is_empty() && omega_ok,
        phi_min,
        phi_max,
        violating_pairs: violating,
    }
}

/// True iff every node reaches every other along positive-weight arcs
/// (two-pass reachability over the graph and its reverse).
pub fn strongly_connected(graph: &InducedDigraph) -> bool {
    let n = graph.n;
    if n <= 1 {
        return true;
    }
    let mut fwd = vec![Vec::new(); n];
    let mut rev = vec![Vec::new(); n];
    for arc in &graph.arcs {
        if arc.weight > 0.0 {
            fwd[arc.from].push(arc.to);
            rev[arc.to].push(arc.from);
        }
    }
    let reaches_all = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    };
    reaches_all(&fwd) && reaches_all(&rev)
}

/// Structural report on the flow Jacobian as a singular M-matrix candidate.
#[derive(Debug, Clone)]
pub struct LaplacianReport {
    /// Whether the operating-region precondition held; the checks run either
    /// way so violations can be inspected.
    pub applicable: bool,
    /// ||L 1||_inf
    pub row_sum_inf: f64,
    pub sign_pattern_ok: bool,
    pub sign_violations: Vec<(usize, usize)>,
    /// Every Gershgorin disc (center L_ii, radius = off-diagonal row sum)
    /// lies in the closed right half-plane.
    pub gershgorin_ok: bool,
    pub eigenvalues: Vec<c64>,
    pub min_re: f64,
    /// Eigenvalues with real part below the tolerance.
    pub re_violations: Vec<c64>,
    /// Size of the zero cluster |lambda| <= L_ZERO_TOL_REL * ||L||_inf.
    pub zero_count: usize,
    /// All principal minors enumerated (only for n <= MINOR_MAX_N).
    pub minors_checked: bool,
    pub min_minor: Option<f64>,
    pub ok: bool,
}

pub fn laplacian_properties(l: &FlowJacobian, omega: &OmegaCheck) -> Result<LaplacianReport> {
    let n = l.l.nrows();
    let mut row_sum_inf = 0.0f64;
    let mut sign_violations = Vec::new();
    let mut gershgorin_ok = true;
    for i in 0..n {
        let mut row_sum = 0.0;
        let mut radius = 0.0;
        for j in 0..n {
            row_sum += l.l[(i, j)];
            if i == j {
                if l.l[(i, j)] < 0.0 {
                    sign_violations.push((i, j));
                }
            } else {
                radius += l.l[(i, j)].abs();
                if l.l[(i, j)] > 0.0 {
                    sign_violations.push((i, j));
                }
            }
        }
        row_sum_inf = row_sum_inf.max(row_sum.abs());
        // Disc [center - radius, center + radius] must not cross into the
        // open left half-plane (up to roundoff in the radius sum).
        let center = l.l[(i, i)];
        if center - radius < LAPLACIAN_RE_TOL {
            gershgorin_ok = false;
        }
    }

    let eigenvalues = {
        let mut e = linalg::eigenvalues(&l.l)?;
        linalg::sort_complex(&mut e);
        e
    };
    let min_re = eigenvalues
        .iter()
        .map(|e| e.re)
        .fold(f64::INFINITY, f64::min);
    let re_violations: Vec<c64> = eigenvalues
        .iter()
        .copied()
        .filter(|e| e.re < LAPLACIAN_RE_TOL)
        .collect();
    let l_norm =
        l.l.row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max);
    let zero_count = eigenvalues
        .iter()
        .filter(|e| e.norm() <= L_ZERO_TOL_REL * l_norm.max(f64::MIN_POSITIVE))
        .count();

    let (minors_checked, min_minor) = if n <= MINOR_MAX_N {
        let mut min_minor = f64::INFINITY;
        for mask in 1u32..(1 << n) {
            let idx: Vec<usize> = (0..n).filter(|&k| mask & (1 << k) != 0).collect();
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| l.l[(idx[a], idx[b])]);
            let det = sub.lu().determinant();
            min_minor = min_minor.min(det);
        }
        (true, Some(min_minor))
    } else {
        (false, None)
    };

    let sign_pattern_ok = sign_violations.is_empty();
    let ok = sign_pattern_ok
        && gershgorin_ok
        && re_violations.is_empty()
        && zero_count >= 1
        && min_minor.is_none_or(|m| m >= MINOR_TOL);
    Ok(LaplacianReport {
        applicable: omega.in_omega,
        row_sum_inf,
        sign_pattern_ok,
        sign_violations,
        gershgorin_ok,
        eigenvalues,
        min_re,
        re_violations,
        zero_count,
        minors_checked,
        min_minor,
        ok,
    })
}

/// Which units the per-node damping bound is evaluated in.
///
/// `Theorem` evaluates D_i^2 / (2 M_i) on the raw machine constants;
/// `Proof` evaluates D_i^2 / (2 M_i omega_s), matching the speed-scaled
/// matrices the linearized dynamics are written in. The two coincide at
/// omega_s = 1 and differ by the factor omega_s otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundUnits {
    Theorem,
    Proof,
}

fn bound_value(m: f64, d: f64, omega_s: f64, units: BoundUnits) -> f64 {
    match units {
        BoundUnits::Theorem => d * d / (2.0 * m),
        BoundUnits::Proof => d * d / (2.0 * m * omega_s),
    }
}

/// Per-node certificate: flow sums, bounds, slacks, and the reactive-power
/// diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    /// S_i = F_i - bound_i; all nonpositive certifies stability.
    pub s: Vec<f64>,
    /// F_i: off-diagonal flow sum (equals the diagonal of L at the point).
    pub flow_sum: Vec<f64>,
    /// D_i^2/(2 M_i) (or the omega_s-scaled variant).
    pub bound: Vec<f64>,
    /// Reactive power injected from each node, including the self term.
    pub q: Vec<f64>,
    pub certified: bool,
    /// Node with the largest slack S_i.
    pub worst_node: usize,
    pub bound_units: BoundUnits,
}

/// Evaluate the certificate at a converged equilibrium. Per-node terms are
/// independent; large systems evaluate them in parallel with deterministic
/// ordering.
pub fn certificate(sys: &ReducedSystem, eq: &Equilibrium, units: BoundUnits) -> CertificateReport {
    let n = sys.n;
    let delta = &eq.delta_star;
    let node_terms = |i: usize| -> (f64, f64) {
        let mut flow = 0.0;
        for j in 0..n {
            if j == i || sys.y_mag[i][j] == 0.0 {
                continue;
            }
            flow += sys.v_mag[i]
                * sys.v_mag[j]
                * sys.y_mag[i][j]
                * (sys.y_ang[i][j] - delta[i] + delta[j]).sin();
        }
        let self_term = sys.v_mag[i] * sys.v_mag[i] * sys.y_mag[i][i] * sys.y_ang[i][i].sin();
        (flow, -(flow + self_term))
    };
    let terms: Vec<(f64, f64)> = if n >= PAR_THRESHOLD {
        (0..n).into_par_iter().map(node_terms).collect()
    } else {
        (0..n).map(node_terms).collect()
    };

    let flow_sum: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let q: Vec<f64> = terms.iter().map(|t| t.1).collect();
    let bound: Vec<f64> = (0..n)
        .map(|i| bound_value(sys.m[i], sys.d[i], sys.omega_s, units))
        .collect();
    let s: Vec<f64> = (0..n).map(|i| flow_sum[i] - bound[i]).collect();
    finish_report(s, flow_sum, bound, q, units)
}

fn finish_report(
    s: Vec<f64>,
    flow_sum: Vec<f64>,
    bound: Vec<f64>,
    q: Vec<f64>,
    units: BoundUnits,
) -> CertificateReport {
    let mut worst = 0;
    for i in 1..s.len() {
        if s[i] > s[worst] {
            worst = i;
        }
    }
    let certified = s.iter().all(|&v| v <= 0.0);
    CertificateReport {
        s,
        flow_sum,
        bound,
        q,
        certified,
        worst_node: worst,
        bound_units: units,
    }
}

/// Re-evaluate the certificate for new machine parameters at the same
/// operating point. The flow sums and reactive diagnostics are unchanged by
/// retuning M and D; an identity retune reproduces the input report
/// bit-for-bit.
pub fn retune_certificate(
    base: &CertificateReport,
    m_new: &[f64],
    d_new: &[f64],
    omega_s: f64,
) -> Result<CertificateReport> {
    let n = base.flow_sum.len();
    if m_new.len() != n || d_new.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m_new.len().min(d_new.len()),
        });
    }
    for (i, &m) in m_new.iter().enumerate() {
        if !m.is_finite() || m <= 0.0 {
            return Err(Error::NonPositiveParameter {
                name: "m",
                index: i,
                value: m,
            });
        }
    }
    for (i, &d) in d_new.iter().enumerate() {
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::NonPositiveParameter {
                name: "d",
                index: i,
                value: d,
            });
        }
    }
    let bound: Vec<f64> = (0..n)
        .map(|i| bound_value(m_new[i], d_new[i], omega_s, base.bound_units))
        .collect();
    let s: Vec<f64> = (0..n).map(|i| base.flow_sum[i] - bound[i]).collect();
    Ok(finish_report(
        s,
        base.flow_sum.clone(),
        bound,
        base.q.clone(),
        base.bound_units,
    ))
}

/// Which family of parameters a margin sweep scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    InertiaScale,
    DampingScale,
    LoadingScale,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub sweep_param: f64,
    pub min_s: f64,
    pub re_lambda2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginTable {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
    /// Sweep values where the equilibrium diverged or the spectrum had no
    /// usable margin eigenvalue.
    pub skipped: Vec<f64>,
}

impl MarginTable {
    /// Plot-ready CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep_param,min_S,re_lambda2\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                row.sweep_param, row.min_s, row.re_lambda2
            ));
        }
        out
    }
}

/// Sweep inertia/damping scalings or mechanical-power loadings, recording
/// the certificate margin min_i S_i against the spectral margin Re(lambda2).
pub fn certificate_margin_search(
    sys: &ReducedSystem,
    eq: &Equilibrium,
    spec: &SweepSpec,
    units: BoundUnits,
) -> Result<MarginTable> {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut warm_start = eq.delta_star.clone();
    for &value in &spec.values {
        if !value.is_finite() || value <= 0.0 {
            skipped.push(value);
            continue;
        }
        let mut scaled = sys.clone();
        let point = match spec.parameter {
            SweepParameter::InertiaScale => {
                for m in &mut scaled.m {
                    *m *= value;
                }
                // The operating point is untouched by machine retuning.
                Some(eq.delta_star.clone())
            }
            SweepParameter::DampingScale => {
                for d in &mut scaled.d {
                    *d *= value;
                }
                Some(eq.delta_star.clone())
            }
            SweepParameter::LoadingScale => {
                for p in &mut scaled.p_mech {
                    *p *= value;
                }
                match equilibrium::solve_equilibrium(&scaled, &warm_start, &SolveOptions::default())
                {
                    Ok(new_eq) => {
                        warm_start = new_eq.delta_star.clone();
                        Some(new_eq.delta_star)
                    }
                    Err(_) => None,
                }
            }
        };
        let Some(delta) = point else {
            skipped.push(value);
            continue;
        };
        let eq_point = Equilibrium {
            delta_star: delta.clone(),
            omega_star: vec![0.0; scaled.n],
            residual_inf: 0.0,
            reference_index: eq.reference_index,
            slack_adjustment: 0.0,
            iterations: 0,
            trace: Vec::new(),
        };
        let cert = certificate(&scaled, &eq_point, units);
        let (_, spectrum) = spectral::spectrum_at(&scaled, &delta)?;
        match spectrum.lambda2 {
            Some(l2) => rows.push(SweepRow {
                sweep_param: value,
                min_s: cert.s.iter().copied().fold(f64::INFINITY, f64::min),
                re_lambda2: l2.re,
            }),
            None => skipped.push(value),
        }
    }
    Ok(MarginTable {
        parameter: spec.parameter,
        rows,
        skipped,
    })
}
