//! Synthetic operating-region systems for randomized sweeps and tests.
//!
//! Systems are manufactured directly at an equilibrium: pick rotor angles,
//! draw admittance phases so every coupling angle lands strictly inside
//! (0, pi), wire a connected support graph, and set the mechanical powers to
//! the resulting electrical injections. Phases are drawn independently per
//! direction, so the flow Jacobian is genuinely nonsymmetric.

use std::f64::consts::PI;

use rand::Rng;

use crate::equilibrium::{flow_function, Equilibrium};
use crate::netmodel::ReducedSystem;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_range: (usize, usize),
    /// Probability of each extra edge beyond the random spanning tree.
    pub extra_edge_prob: f64,
    /// Log-uniform range of coupling magnitudes Y_ij.
    pub y_range: (f64, f64),
    pub v_range: (f64, f64),
    /// Log-uniform inertia range, seconds.
    pub m_range: (f64, f64),
    /// Log-uniform damping range.
    pub d_range: (f64, f64),
    /// Coupling angles are kept in (margin, pi - margin).
    pub phi_margin: f64,
    /// Probability of a nonzero self-admittance per machine.
    pub self_term_prob: f64,
    pub omega_s: f64,
    /// Rotor angles are drawn from (-spread, spread).
    pub delta_spread: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_range: (2, 10),
            extra_edge_prob: 0.3,
            y_range: (0.2, 3.0),
            v_range: (0.85, 1.15),
            m_range: (0.5, 12.0),
            d_range: (0.3, 5.0),
            phi_margin: 0.05,
            self_term_prob: 0.5,
            omega_s: 1.0,
            delta_spread: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSystem {
    pub system: ReducedSystem,
    pub delta_star: Vec<f64>,
}

fn log_uniform(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    (rng.random_range(range.0.ln()..range.1.ln())).exp()
}

/// Draw a random system whose manufactured equilibrium lies strictly inside
/// the operating region, with connected undirected support.
pub fn random_omega_system(rng: &mut impl Rng, cfg: &SynthConfig) -> SynthSystem {
    let n = rng.random_range(cfg.n_range.0..=cfg.n_range.1);
    let delta: Vec<f64> = (0..n)
        .map(|_| rng.random_range(-cfg.delta_spread..cfg.delta_spread))
        .collect();
    let v: Vec<f64> = (0..n)
        .map(|_| rng.random_range(cfg.v_range.0..cfg.v_range.1))
        .collect();

    let mut edges = Vec::new();
    for k in 1..n {
        let parent = rng.random_range(0..k);
        edges.push((parent, k));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !edges.contains(&(i, j)) && rng.random_bool(cfg.extra_edge_prob) {
                edges.push((i, j));
            }
        }
    }

    let mut y_mag = vec![vec![0.0; n]; n];
    let mut y_ang = vec![vec![0.0; n]; n];
    for &(i, j) in &edges {
        let magnitude = log_uniform(rng, cfg.y_range);
        // Independent coupling angles per direction, both inside the region.
        let phi_ij = rng.random_range(cfg.phi_margin..PI - cfg.phi_margin);
        let phi_ji = rng.random_range(cfg.phi_margin..PI - cfg.phi_margin);
        y_mag[i][j] = magnitude;
        y_mag[j][i] = magnitude;
        y_ang[i][j] = phi_ij + delta[i] - delta[j];
        y_ang[j][i] = phi_ji + delta[j] - delta[i];
    }
    for i in 0..n {
        if rng.random_bool(cfg.self_term_prob) {
            y_mag[i][i] = log_uniform(rng, cfg.y_range);
            y_ang[i][i] = rng.random_range(-PI..PI);
        }
    }

    let mut system = ReducedSystem {
        n,
        v_mag: v,
        y_mag,
        y_ang,
        m: (0..n).map(|_| log_uniform(rng, cfg.m_range)).collect(),
        d: (0..n).map(|_| log_uniform(rng, cfg.d_range)).collect(),
        p_mech: vec![0.0; n],
        omega_s: cfg.omega_s,
    };
    system.p_mech = flow_function(&system, &delta).expect("dimensions are consistent");
    SynthSystem {
        system,
        delta_star: delta,
    }
}

/// The manufactured point as an [`Equilibrium`]: mechanical powers were set
/// to the flow function there, so residuals are exactly zero.
pub fn exact_equilibrium(synth: &SynthSystem) -> Equilibrium {
    let n = synth.system.n;
    let mut reference = 0;
    for i in 1..n {
        if synth.system.m[i] > synth.system.m[reference] {
            reference = i;
        }
    }
    Equilibrium {
        delta_star: synth.delta_star.clone(),
        omega_star: vec![0.0; n],
        residual_inf: 0.0,
        reference_index: reference,
        slack_adjustment: 0.0,
        iterations: 0,
        trace: Vec::new(),
    }
}

/// Rescale damping so every node clears its bound by a margin drawn from
/// `slack_range`, making the system certified by construction (theorem
/// units). The operating point is untouched.
pub fn force_certified(synth: &mut SynthSystem, slack_range: (f64, f64), rng: &mut impl Rng) {
    let sys = &mut synth.system;
    let flows = crate::equilibrium::flow_jacobian(sys, &synth.delta_star)
        .expect("dimensions are consistent");
    for i in 0..sys.n {
        let margin = rng.random_range(slack_range.0..slack_range.1);
        let target = flows.l[(i, i)] + margin;
        sys.d[i] = (2.0 * sys.m[i] * target.max(margin)).sqrt();
    }
}
