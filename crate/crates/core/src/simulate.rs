//! Time-domain integration of the swing equations: fixed-step RK4 plus a
//! seeded perturbation experiment around an equilibrium.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::netmodel::ReducedSystem;

/// State derivative of the swing equations at `state = [delta; omega]`:
/// delta' = omega, omega'_i = (omega_s/M_i)(P_m_i - P_e_i) - (D_i/M_i) omega_i.
pub fn swing_rhs(sys: &ReducedSystem, state: &[f64]) -> Result<Vec<f64>> {
    let n = sys.n;
    if state.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: state.len(),
        });
    }
    let mut out = vec![0.0; 2 * n];
    rhs_into(sys, state, &mut out);
    Ok(out)
}

fn rhs_into(sys: &ReducedSystem, state: &[f64], out: &mut [f64]) {
    let n = sys.n;
    let (delta, omega) = state.split_at(n);
    for i in 0..n {
        out[i] = omega[i];
        let mut pe = 0.0;
        for j in 0..n {
            let y = sys.y_mag[i][j];
            if y == 0.0 {
                continue;
            }
            pe += sys.v_mag[i] * sys.v_mag[j] * y * (sys.y_ang[i][j] - delta[i] + delta[j]).cos();
        }
        out[n + i] = sys.omega_s / sys.m[i] * (sys.p_mech[i] - pe) - sys.d[i] / sys.m[i] * omega[i];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Converged,
    Diverged,
    Undecided,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub classification: Classification,
    /// Distance to the supplied equilibrium at the end, when one was given.
    pub final_distance: Option<f64>,
    /// Time at which integration halted early (divergence), if it did.
    pub halted_at: Option<f64>,
}

impl Trajectory {
    /// CSV with header `t,delta_1..delta_n,omega_1..omega_n`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |s| s.len() / 2);
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",delta_{i}"));
        }
        for i in 1..=n {
            out.push_str(&format!(",omega_{i}"));
        }
        out.push('\n');
        for (t, state) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t}"));
            for x in state {
                out.push_str(&format!(",{x}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Diverged when ||x|| exceeds this factor times max(1, ||x0||).
    pub blowup_factor: f64,
    /// Diverged when any angle magnitude exceeds this, radians.
    pub angle_limit: f64,
    /// Converged when the final distance to the equilibrium is below
    /// 0.1 x initial distance, or below this absolute floor.
    pub converge_abs_tol: f64,
    /// Keep every k-th sample (the final state is always kept).
    pub record_stride: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 20.0,
            blowup_factor: 1e3,
            angle_limit: 1e3,
            converge_abs_tol: 1e-8,
            record_stride: 1,
        }
    }
}

const CONVERGE_CONTRACTION: f64 = 0.1;

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Distance to the equilibrium in reference-relative coordinates: rotor
/// angles are referred to the reference machine, which quotients out the
/// translation family {delta* + alpha 1}. A lossy trajectory settles onto a
/// translated member of that family, so the distance in absolute angles
/// would never contract.
fn distance_to(eq: &Equilibrium, state: &[f64]) -> f64 {
    let n = eq.delta_star.len();
    let r = eq.reference_index.min(n - 1);
    let mut acc = 0.0;
    for i in 0..n {
        let dd = (state[i] - state[r]) - (eq.delta_star[i] - eq.delta_star[r]);
        let dw = state[n + i];
        acc += dd * dd + dw * dw;
    }
    acc.sqrt()
}

/// Classic fixed-step RK4 over `[0, t_end]`. Integration halts early on
/// blow-up or non-finite state; classification follows the distance to the
/// supplied equilibrium when one is given.
pub fn integrate(
    sys: &ReducedSystem,
    state0: &[f64],
    target: Option<&Equilibrium>,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let n = sys.n;
    if state0.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: state0.len(),
        });
    }
    assert!(opts.dt > 0.0, "integrate: dt must be positive");
    assert!(
        opts.t_end >= opts.dt,
        "integrate: t_end must cover one step"
    );
    let steps = (opts.t_end / opts.dt).round() as usize;
    let stride = opts.record_stride.max(1);
    let blowup = opts.blowup_factor * norm2(state0).max(1.0);

    let dim = 2 * n;
    let mut x = state0.to_vec();
    let mut times = Vec::with_capacity(steps / stride + 2);
    let mut states = Vec::with_capacity(steps / stride + 2);
    times.push(0.0);
    states.push(x.clone());

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];

    let mut halted_at = None;
    let dt = opts.dt;
    for step in 1..=steps {
        rhs_into(sys, &x, &mut k1);
        for i in 0..dim {
            stage[i] = x[i] + 0.5 * dt * k1[i];
        }
        rhs_into(sys, &stage, &mut k2);
        for i in 0..dim {
            stage[i] = x[i] + 0.5 * dt * k2[i];
        }
        rhs_into(sys, &stage, &mut k3);
        for i in 0..dim {
            stage[i] = x[i] + dt * k3[i];
        }
        rhs_into(sys, &stage, &mut k4);
        for i in 0..dim {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = step as f64 * dt;
        if step % stride == 0 || step == steps {
            times.push(t);
            states.push(x.clone());
        }
        let finite = x.iter().all(|v| v.is_finite());
        let angles_ok = x[..n].iter().all(|v| v.abs() <= opts.angle_limit);
        if !finite || !angles_ok || norm2(&x) > blowup {
            halted_at = Some(t);
            if *times.last().unwrap() != t {
                times.push(t);
                states.push(x.clone());
            }
            break;
        }
    }

    let classification = if halted_at.is_some() {
        Classification::Diverged
    } else if let Some(eq) = target {
        let d_end = distance_to(eq, &x);
        let d_start = distance_to(eq, state0);
        if d_end <= (CONVERGE_CONTRACTION * d_start).max(opts.converge_abs_tol) {
            Classification::Converged
        } else {
            Classification::Undecided
        }
    } else {
        Classification::Undecided
    };
    let final_distance = target.map(|eq| distance_to(eq, &x));

    Ok(Trajectory {
        times,
        states,
        classification,
        final_distance,
        halted_at,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub n_samples: usize,
    pub radius: f64,
    pub seed: u64,
    pub fraction_converged: f64,
    pub converged: usize,
    pub diverged: usize,
    pub undecided: usize,
    pub classifications: Vec<Classification>,
    /// Sample with the largest final distance (diverged samples dominate).
    pub worst_sample: Option<usize>,
    pub worst_final_distance: Option<f64>,
}

/// Angle perturbation for one experiment sample: seeded, orthogonal to the
/// all-ones translation direction, scaled to `radius`.
pub fn sample_perturbation(n: usize, radius: f64, seed: u64, sample: usize) -> Vec<f64> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (sample as u64).wrapping_mul(0x9E3779B97F4A7C15));
    let mut perturb: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = perturb.iter().sum::<f64>() / n as f64;
    for p in &mut perturb {
        *p -= mean;
    }
    let norm = norm2(&perturb);
    if norm > 0.0 && radius > 0.0 {
        for p in &mut perturb {
            *p *= radius / norm;
        }
    } else {
        perturb.iter_mut().for_each(|p| *p = 0.0);
    }
    perturb
}

/// Integrate `n_samples` random angle perturbations of norm `radius` around
/// the equilibrium. Perturbations live in the angle subspace orthogonal to
/// the all-ones translation direction; speeds start at rest. Per-sample
/// seeds make the aggregate deterministic under any parallel schedule.
pub fn perturbation_experiment(
    sys: &ReducedSystem,
    eq: &Equilibrium,
    n_samples: usize,
    radius: f64,
    seed: u64,
    opts: &IntegrateOptions,
) -> Result<ExperimentSummary> {
    assert!(radius >= 0.0, "perturbation radius must be nonnegative");
    let n = sys.n;
    let outcomes: Vec<(Classification, Option<f64>)> = (0..n_samples)
        .into_par_iter()
        .map(|sample| {
            let perturb = sample_perturbation(n, radius, seed, sample);
            let mut state0 = vec![0.0; 2 * n];
            for i in 0..n {
                state0[i] = eq.delta_star[i] + perturb[i];
            }
            let mut opts = opts.clone();
            // Only terminal data is needed here.
            opts.record_stride = usize::MAX;
            let traj = integrate(sys, &state0, Some(eq), &opts)?;
            Ok((traj.classification, traj.final_distance))
        })
        .collect::<Result<_>>()?;

    let mut converged = 0;
    let mut diverged = 0;
    let mut undecided = 0;
    let mut worst: Option<(usize, f64)> = None;
    for (i, (class, dist)) in outcomes.iter().enumerate() {
        match class {
            Classification::Converged => converged += 1,
            Classification::Diverged => diverged += 1,
            Classification::Undecided => undecided += 1,
        }
        if let Some(d) = dist {
            if worst.is_none_or(|(_, wd)| *d > wd) {
                worst = Some((i, *d));
            }
        }
    }
    let fraction = if n_samples == 0 {
        1.0
    } else {
        converged as f64 / n_samples as f64
    };
    Ok(ExperimentSummary {
        n_samples,
        radius,
        seed,
        fraction_converged: fraction,
        converged,
        diverged,
        undecided,
        classifications: outcomes.iter().map(|(c, _)| *c).collect(),
        worst_sample: worst.map(|(i, _)| i),
        worst_final_distance: worst.map(|(_, d)| d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{flow_function, solve_equilibrium, SolveOptions};
    use std::f64::consts::FRAC_PI_2;

    fn two_machine_damped() -> ReducedSystem {
        ReducedSystem {
            n: 2,
            v_mag: vec![1.0, 1.0],
            y_mag: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            y_ang: vec![vec![0.0, FRAC_PI_2], vec![FRAC_PI_2, 0.0]],
            m: vec![1.0, 1.0],
            d: vec![2.0, 2.0],
            p_mech: vec![0.0, 0.0],
            omega_s: 1.0,
        }
    }

    fn rest_equilibrium(sys: &ReducedSystem) -> Equilibrium {
        solve_equilibrium(sys, &vec![0.0; sys.n], &SolveOptions::default()).unwrap()
    }

    #[test]
    fn derivative_vanishes_at_equilibrium() {
        let mut sys = two_machine_damped();
        // Make the rest point an exact equilibrium in floating point.
        sys.p_mech = flow_function(&sys, &[0.0, 0.0]).unwrap();
        let rhs = swing_rhs(&sys, &[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(rhs, vec![0.0; 4]);
    }

    #[test]
    fn pure_damping_decay() {
        let sys = ReducedSystem {
            n: 1,
            v_mag: vec![1.0],
            y_mag: vec![vec![0.0]],
            y_ang: vec![vec![0.0]],
            m: vec![1.0],
            d: vec![1.0],
            p_mech: vec![0.0],
            omega_s: 1.0,
        };
        let rhs = swing_rhs(&sys, &[0.0, 1.0]).unwrap();
        assert_eq!(rhs, vec![1.0, -1.0]);
    }

    #[test]
    fn start_at_equilibrium_stays_there() {
        let sys = two_machine_damped();
        let eq = rest_equilibrium(&sys);
        let opts = IntegrateOptions {
            t_end: 1.0,
            ..Default::default()
        };
        let traj = integrate(&sys, &[0.0, 0.0, 0.0, 0.0], Some(&eq), &opts).unwrap();
        assert_eq!(traj.classification, Classification::Converged);
        let last = traj.states.last().unwrap();
        assert!(last.iter().all(|&x| x.abs() < 1e-12), "{last:?}");
    }

    #[test]
    fn small_perturbation_converges() {
        let sys = two_machine_damped();
        let eq = rest_equilibrium(&sys);
        let traj = integrate(
            &sys,
            &[0.01, -0.01, 0.0, 0.0],
            Some(&eq),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(traj.classification, Classification::Converged);
    }

    #[test]
    fn power_beyond_transfer_capacity_diverges() {
        // P_m exceeds the maximum transmittable power: no equilibrium
        // exists and the leading machine pulls away without bound.
        let mut sys = two_machine_damped();
        sys.d = vec![0.1, 0.1];
        sys.p_mech = vec![1.5, -1.5];
        let traj = integrate(
            &sys,
            &[0.0, 0.0, 0.0, 0.0],
            None,
            &IntegrateOptions {
                t_end: 60.0,
                angle_limit: 50.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(traj.classification, Classification::Diverged);
        assert!(traj.halted_at.is_some());
    }

    #[test]
    fn trajectory_csv_shape() {
        let sys = two_machine_damped();
        let opts = IntegrateOptions {
            t_end: 0.01,
            record_stride: 5,
            ..Default::default()
        };
        let traj = integrate(&sys, &[0.0, 0.0, 0.0, 0.0], None, &opts).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,delta_1,delta_2,omega_1,omega_2");
        for line in lines {
            assert_eq!(line.split(',').count(), 5);
        }
    }

    #[test]
    fn zero_radius_experiment_trivially_converges() {
        let sys = two_machine_damped();
        let eq = rest_equilibrium(&sys);
        let opts = IntegrateOptions {
            t_end: 0.5,
            ..Default::default()
        };
        let summary = perturbation_experiment(&sys, &eq, 8, 0.0, 7, &opts).unwrap();
        assert_eq!(summary.fraction_converged, 1.0);
    }

    #[test]
    fn experiment_is_seed_deterministic() {
        let sys = two_machine_damped();
        let eq = rest_equilibrium(&sys);
        let opts = IntegrateOptions {
            t_end: 2.0,
            ..Default::default()
        };
        let a = perturbation_experiment(&sys, &eq, 6, 0.05, 99, &opts).unwrap();
        let b = perturbation_experiment(&sys, &eq, 6, 0.05, 99, &opts).unwrap();
        assert_eq!(a.classifications, b.classifications);
        assert_eq!(a.worst_final_distance, b.worst_final_distance);
    }

    #[test]
    fn translation_of_angles_preserves_relative_motion() {
        let sys = two_machine_damped();
        let mut with_power = sys.clone();
        with_power.p_mech = vec![0.3, -0.3];
        let base = integrate(
            &with_power,
            &[0.05, 0.0, 0.0, 0.0],
            None,
            &IntegrateOptions {
                t_end: 5.0,
                ..Default::default()
            },
        )
        .unwrap();
        let alpha = 0.7;
        let shifted = integrate(
            &with_power,
            &[0.05 + alpha, alpha, 0.0, 0.0],
            None,
            &IntegrateOptions {
                t_end: 5.0,
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in base.states.iter().zip(&shifted.states) {
            let rel_a = a[0] - a[1];
            let rel_b = b[0] - b[1];
            assert!((rel_a - rel_b).abs() <= 1e-9, "{rel_a} vs {rel_b}");
        }
    }
}
