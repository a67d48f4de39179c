//! Algebraic small-signal stability certificates for lossy multi-machine
//! swing equations, cross-validated against direct eigenvalue analysis,
//! quadratic-pencil residuals, and time-domain simulation.
//!
//! Pipeline: parse a network case ([`netmodel`]), Kron-reduce it to machine
//! internal nodes, solve for an equilibrium ([`equilibrium`]), then
//!
//! - evaluate the per-node certificate and the induced-digraph structure
//!   ([`graphcert`]),
//! - compute the Jacobian spectrum and pencil residuals ([`spectral`]),
//! - confirm the verdict in the time domain ([`simulate`]).
//!
//! All operations are pure functions of their inputs; values are immutable
//! after construction and safe to share across threads.
//!
//! ```rust
//! use swingcert_core::{equilibrium, graphcert, spectral};
//! use swingcert_core::netmodel::ReducedSystem;
//!
//! // Two machines over a purely reactive unit coupling.
//! let half_pi = std::f64::consts::FRAC_PI_2;
//! let sys = ReducedSystem {
//!     n: 2,
//!     v_mag: vec![1.0, 1.0],
//!     y_mag: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
//!     y_ang: vec![vec![0.0, half_pi], vec![half_pi, 0.0]],
//!     m: vec![1.0, 1.0],
//!     d: vec![2.0, 2.0],
//!     p_mech: vec![0.5, -0.5],
//!     omega_s: 1.0,
//! };
//!
//! let eq = equilibrium::solve_equilibrium(&sys, &[0.0, 0.0], &Default::default()).unwrap();
//! assert!((eq.delta_star[0] - eq.delta_star[1] - std::f64::consts::PI / 6.0).abs() < 1e-9);
//!
//! let cert = graphcert::certificate(&sys, &eq, graphcert::BoundUnits::Theorem);
//! assert!(cert.certified);
//!
//! let (_, spectrum) = spectral::spectrum_at(&sys, &eq.delta_star).unwrap();
//! assert_eq!(
//!     spectral::stability_verdict(&spectrum),
//!     spectral::StabilityVerdict::AsymptoticallyStableReduced,
//! );
//! ```

pub mod equilibrium;
pub mod error;
pub mod graphcert;
pub mod jsonfmt;
pub mod linalg;
pub mod netmodel;
pub mod simulate;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
