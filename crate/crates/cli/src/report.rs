//! Machine-readable analysis report (schema 1).
//!
//! Field order is declaration order; floats serialize at 17 significant
//! digits, so identical inputs produce byte-identical reports.

use serde::Serialize;

use swingcert_core::equilibrium::{wrap_angle, Equilibrium};
use swingcert_core::graphcert::{
    BoundUnits, CertificateReport, LaplacianReport, MarginTable, OmegaCheck,
};
use swingcert_core::linalg::c64;
use swingcert_core::simulate::ExperimentSummary;
use swingcert_core::spectral::{SpectrumReport, StabilityVerdict};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct CaseMeta {
    pub path: String,
    pub format: String,
    pub machines: usize,
    pub base_mva: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumSection {
    /// Angles reduced into (-pi, pi] for reporting.
    pub delta_star: Vec<f64>,
    pub omega_star: Vec<f64>,
    pub residual_inf: f64,
    pub reference_index: usize,
    pub slack_adjustment: f64,
    pub iterations: usize,
}

impl EquilibriumSection {
    pub fn from_core(eq: &Equilibrium) -> Self {
        Self {
            delta_star: eq.delta_star.iter().map(|&d| wrap_angle(d)).collect(),
            omega_star: eq.omega_star.clone(),
            residual_inf: eq.residual_inf,
            reference_index: eq.reference_index,
            slack_adjustment: eq.slack_adjustment,
            iterations: eq.iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaSection {
    pub in_omega: bool,
    pub phi_min: Option<f64>,
    pub phi_max: Option<f64>,
    pub violating_pairs: Vec<(usize, usize, f64)>,
}

impl OmegaSection {
    pub fn from_core(check: &OmegaCheck) -> Self {
        Self {
            in_omega: check.in_omega,
            phi_min: check.phi_min,
            phi_max: check.phi_max,
            violating_pairs: check.violating_pairs.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSection {
    pub certified: bool,
    pub worst_node: usize,
    pub s: Vec<f64>,
    pub flow_sum: Vec<f64>,
    pub bound: Vec<f64>,
    pub q: Vec<f64>,
}

impl CertificateSection {
    pub fn from_core(cert: &CertificateReport) -> Self {
        Self {
            certified: cert.certified,
            worst_node: cert.worst_node,
            s: cert.s.clone(),
            flow_sum: cert.flow_sum.clone(),
            bound: cert.bound.clone(),
            q: cert.q.clone(),
        }
    }
}

fn pair(z: c64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplacianSection {
    pub applicable: bool,
    pub ok: bool,
    pub row_sum_inf: f64,
    pub sign_pattern_ok: bool,
    pub gershgorin_ok: bool,
    pub min_re: f64,
    pub zero_count: usize,
    pub minors_checked: bool,
    pub min_minor: Option<f64>,
    pub eigenvalues: Vec<[f64; 2]>,
}

impl LaplacianSection {
    pub fn from_core(report: &LaplacianReport) -> Self {
        Self {
            applicable: report.applicable,
            ok: report.ok,
            row_sum_inf: report.row_sum_inf,
            sign_pattern_ok: report.sign_pattern_ok,
            gershgorin_ok: report.gershgorin_ok,
            min_re: report.min_re,
            zero_count: report.zero_count,
            minors_checked: report.minors_checked,
            min_minor: report.min_minor,
            eigenvalues: report.eigenvalues.iter().map(|&e| pair(e)).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSection {
    pub eigenvalues: Vec<[f64; 2]>,
    pub zero_cluster: Vec<usize>,
    pub lambda2: Option<[f64; 2]>,
    pub max_re_nonzero: Option<f64>,
    pub zero_tol: f64,
    pub re_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pencil_residuals: Option<Vec<f64>>,
}

impl SpectrumSection {
    pub fn from_core(report: &SpectrumReport) -> Self {
        Self {
            eigenvalues: report.eigenvalues.iter().map(|&e| pair(e)).collect(),
            zero_cluster: report.zero_cluster.clone(),
            lambda2: report.lambda2.map(pair),
            max_re_nonzero: report.max_re_nonzero,
            zero_tol: report.zero_tol,
            re_tol: report.re_tol,
            pencil_residuals: report.pencil_residuals.clone(),
        }
    }
}

/// The three per-case summary columns: coupling-angle domain (over pi),
/// certificate slack domain, and the spectral margin |Re(lambda2)|.
#[derive(Debug, Clone, Serialize)]
pub struct SummarySection {
    pub phi_over_pi_range: Option<[f64; 2]>,
    pub s_range: [f64; 2],
    pub abs_re_lambda2: Option<f64>,
}

impl SummarySection {
    pub fn build(omega: &OmegaCheck, cert: &CertificateReport, spectrum: &SpectrumReport) -> Self {
        let phi_over_pi_range = match (omega.phi_min, omega.phi_max) {
            (Some(lo), Some(hi)) => Some([lo / std::f64::consts::PI, hi / std::f64::consts::PI]),
            _ => None,
        };
        let s_lo = cert.s.iter().copied().fold(f64::INFINITY, f64::min);
        let s_hi = cert.s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            phi_over_pi_range,
            s_range: [s_lo, s_hi],
            abs_re_lambda2: spectrum.lambda2.map(|l| l.re.abs()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub parse_ms: f64,
    pub reduce_ms: f64,
    pub solve_ms: f64,
    pub certificate_ms: f64,
    pub spectrum_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub schema: u32,
    pub case: CaseMeta,
    pub bound_units: BoundUnits,
    pub equilibrium: EquilibriumSection,
    pub omega_check: OmegaSection,
    pub certificate: CertificateSection,
    pub laplacian_properties: LaplacianSection,
    pub spectrum: SpectrumSection,
    pub verdict: StabilityVerdict,
    pub summary: SummarySection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<MarginTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<ExperimentSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<Timings>,
    /// Set when a certified case shows an unstable spectrum: that outcome
    /// would contradict the certificate's guarantee and indicates a
    /// numerical defect, so it is escalated instead of reported quietly.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RetuneReport {
    pub schema: u32,
    pub case: CaseMeta,
    pub bound_units: BoundUnits,
    pub m_new: Vec<f64>,
    pub d_new: Vec<f64>,
    pub old: CertificateSection,
    pub new: CertificateSection,
    pub old_verdict: StabilityVerdict,
    pub new_verdict: StabilityVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub schema: u32,
    pub error: String,
}
