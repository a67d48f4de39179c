//! Flow function of the swing equations, its Jacobian, and the Newton
//! solver for equilibrium points.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::netmodel::ReducedSystem;

/// Electrical power injected by each machine as a function of all rotor
/// angles, including the self term:
///
/// `P_e_i = sum_j V_i V_j Y_ij cos(theta_ij - delta_i + delta_j)`
pub fn flow_function(sys: &ReducedSystem, delta: &[f64]) -> Result<Vec<f64>> {
    let n = sys.n;
    if delta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: delta.len(),
        });
    }
    let mut p = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            let y = sys.y_mag[i][j];
            if y == 0.0 {
                continue;
            }
            acc += sys.v_mag[i] * sys.v_mag[j] * y * (sys.y_ang[i][j] - delta[i] + delta[j]).cos();
        }
        p[i] = acc;
    }
    Ok(p)
}

/// Jacobian L of the flow function. Row sums vanish by construction: the
/// diagonal is assembled as the sum of the negated off-diagonal terms.
#[derive(Debug, Clone)]
pub struct FlowJacobian {
    pub l: DMatrix<f64>,
    pub evaluated_at: Vec<f64>,
}

pub fn flow_jacobian(sys: &ReducedSystem, delta: &[f64]) -> Result<FlowJacobian> {
    let n = sys.n;
    if delta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: delta.len(),
        });
    }
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let w = sys.v_mag[i]
                * sys.v_mag[j]
                * sys.y_mag[i][j]
                * (sys.y_ang[i][j] - delta[i] + delta[j]).sin();
            l[(i, j)] = -w;
            diag += w;
        }
        l[(i, i)] = diag;
    }
    Ok(FlowJacobian {
        l,
        evaluated_at: delta.to_vec(),
    })
}

/// An equilibrium point of the swing equations.
#[derive(Debug, Clone, Serialize)]
pub struct Equilibrium {
    /// Rotor angles, radians (unwrapped).
    pub delta_star: Vec<f64>,
    /// Speed deviations; identically zero at an equilibrium.
    pub omega_star: Vec<f64>,
    /// Infinity norm of the mismatch at non-reference machines.
    pub residual_inf: f64,
    pub reference_index: usize,
    /// Mismatch absorbed by the reference machine (nonzero in lossy
    /// networks).
    pub slack_adjustment: f64,
    pub iterations: usize,
    /// Residual infinity norm per iteration, starting with the initial one.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Reference machine; defaults to the machine with the largest inertia.
    pub reference: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50,
            reference: None,
        }
    }
}

const MAX_BACKTRACK: usize = 8;

/// Newton iteration on the n-1 non-reference angles; the reference angle
/// stays at its initial value. Backtracks by half steps when the residual
/// norm increases.
pub fn solve_equilibrium(
    sys: &ReducedSystem,
    delta_init: &[f64],
    opts: &SolveOptions,
) -> Result<Equilibrium> {
    let n = sys.n;
    if delta_init.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: delta_init.len(),
        });
    }
    let reference = opts.reference.unwrap_or_else(|| {
        let mut best = 0;
        for i in 1..n {
            if sys.m[i] > sys.m[best] {
                best = i;
            }
        }
        best
    });
    if reference >= n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: reference,
        });
    }
    let free: Vec<usize> = (0..n).filter(|&i| i != reference).collect();

    let residual = |delta: &[f64]| -> Result<Vec<f64>> {
        let p = flow_function(sys, delta)?;
        Ok(free.iter().map(|&i| sys.p_mech[i] - p[i]).collect())
    };
    let inf = |g: &[f64]| g.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));

    let mut delta = delta_init.to_vec();
    let mut g = residual(&delta)?;
    let mut g_norm = inf(&g);
    let mut trace = vec![g_norm];

    let mut iterations = 0;
    while g_norm > opts.tolerance {
        if iterations >= opts.max_iterations {
            return Err(Error::NewtonNonConvergence { iterations, trace });
        }
        // Reduced Newton matrix: L with the reference row/column deleted.
        let jac = flow_jacobian(sys, &delta)?;
        let m = n - 1;
        let reduced = DMatrix::from_fn(m, m, |a, b| jac.l[(free[a], free[b])]);
        let rhs = DVector::from_vec(g.clone());
        let step = reduced
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularNewtonMatrix {
                iteration: iterations,
            })?;

        // Half-step backtracking when the residual grows.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_BACKTRACK {
            let mut trial = delta.clone();
            for (a, &i) in free.iter().enumerate() {
                trial[i] += lambda * step[a];
            }
            let g_trial = residual(&trial)?;
            let trial_norm = inf(&g_trial);
            if trial_norm <= g_norm || lambda <= 1.0 / (1 << MAX_BACKTRACK) as f64 {
                delta = trial;
                g = g_trial;
                g_norm = trial_norm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // Unreachable: the final backtracking step always accepts.
            return Err(Error::NewtonNonConvergence { iterations, trace });
        }
        iterations += 1;
        trace.push(g_norm);
    }

    let p = flow_function(sys, &delta)?;
    Ok(Equilibrium {
        omega_star: vec![0.0; n],
        residual_inf: g_norm,
        reference_index: reference,
        slack_adjustment: sys.p_mech[reference] - p[reference],
        iterations,
        trace,
        delta_star: delta,
    })
}

/// Reduce an angle to (-pi, pi] for reporting; internal angles stay
/// unwrapped.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = x - two_pi * (x / two_pi).round();
    if w <= -PI {
        w += two_pi;
    }
    w
}
