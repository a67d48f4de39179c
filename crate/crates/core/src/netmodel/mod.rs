//! Network case parsing, Y-bus assembly, and Kron reduction down to
//! generator internal nodes.
//!
//! Two input formats are supported: a native JSON schema (the canonical
//! interchange format) and a MATPOWER-subset text format (import only, see
//! [`matpower`]). A case that carries a `reduced` block bypasses parsing and
//! reduction entirely.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::linalg::{c64, rcond_inf};

pub mod matpower;

/// Reciprocal condition estimate below which the eliminated block is
/// treated as singular.
pub const ELIMINATION_RCOND_MIN: f64 = 1e-13;

/// Default synchronous angular velocity (60 Hz system), elec. rad/s.
pub const DEFAULT_OMEGA_S: f64 = 2.0 * PI * 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: i64,
    pub bus_type: BusType,
    /// Active load, per unit.
    pub p_load: f64,
    /// Reactive load, per unit.
    pub q_load: f64,
    /// Voltage magnitude, per unit (setpoint or solved).
    pub v_mag: f64,
    /// Voltage angle, radians.
    pub v_ang: f64,
    pub base_kv: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchRecord {
    pub from_bus: i64,
    pub to_bus: i64,
    /// Series resistance, per unit.
    pub r: f64,
    /// Series reactance, per unit.
    pub x: f64,
    /// Total line charging susceptance, per unit.
    #[serde(default)]
    pub b_shunt: f64,
    /// Off-nominal tap ratio at the from side; 1 if none.
    #[serde(default = "one")]
    pub tap: f64,
    #[serde(default = "yes")]
    pub status: bool,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorDynamics {
    pub bus: i64,
    /// Inertia constant, seconds.
    pub inertia_m: f64,
    /// Damping coefficient, unitless.
    pub damping_d: f64,
    /// Transient reactance, per unit.
    pub xd_prime: f64,
    /// Mechanical power, per unit; derived from the solved injection when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_mech: Option<f64>,
}

/// Solved bus voltages, parallel to the (id-sorted) bus list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub v_mag: Vec<f64>,
    pub v_ang: Vec<f64>,
}

/// The n-machine classical model: everything the downstream analysis needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedSystem {
    pub n: usize,
    /// Internal EMF magnitudes, per unit.
    pub v_mag: Vec<f64>,
    /// Magnitudes of the reduced admittance matrix entries, per unit.
    pub y_mag: Vec<Vec<f64>>,
    /// Angles of the reduced admittance matrix entries, radians.
    pub y_ang: Vec<Vec<f64>>,
    /// Inertia constants, seconds.
    pub m: Vec<f64>,
    /// Damping coefficients, unitless.
    pub d: Vec<f64>,
    /// Mechanical powers, per unit.
    pub p_mech: Vec<f64>,
    /// Synchronous angular velocity, elec. rad/s.
    pub omega_s: f64,
}

impl ReducedSystem {
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let check = |len: usize, what: &'static str| -> Result<()> {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
            let _ = what;
            Ok(())
        };
        check(self.v_mag.len(), "v_mag")?;
        check(self.m.len(), "m")?;
        check(self.d.len(), "d")?;
        check(self.p_mech.len(), "p_mech")?;
        check(self.y_mag.len(), "y_mag rows")?;
        check(self.y_ang.len(), "y_ang rows")?;
        for row in &self.y_mag {
            check(row.len(), "y_mag cols")?;
        }
        for row in &self.y_ang {
            check(row.len(), "y_ang cols")?;
        }
        for (i, &m) in self.m.iter().enumerate() {
            if !m.is_finite() || m <= 0.0 {
                return Err(Error::NonPositiveParameter {
                    name: "m",
                    index: i,
                    value: m,
                });
            }
        }
        for (i, &d) in self.d.iter().enumerate() {
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::NonPositiveParameter {
                    name: "d",
                    index: i,
                    value: d,
                });
            }
        }
        if !self.omega_s.is_finite() || self.omega_s <= 0.0 {
            return Err(Error::NonPositiveParameter {
                name: "omega_s",
                index: 0,
                value: self.omega_s,
            });
        }
        for row in &self.y_mag {
            for (j, &y) in row.iter().enumerate() {
                if y < 0.0 {
                    return Err(Error::NonPositiveParameter {
                        name: "y_mag",
                        index: j,
                        value: y,
                    });
                }
            }
        }
        Ok(())
    }
}

/// `reduced` block of the native format: a [`ReducedSystem`] plus optional
/// initial internal angles for the equilibrium solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedBlock {
    #[serde(flatten)]
    pub system: ReducedSystem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_init: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormat {
    MatpowerSubset,
    NativeJson,
}

/// Everything a case file can carry.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParsedCase {
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
    #[serde(default)]
    pub buses: Vec<BusRecord>,
    #[serde(default)]
    pub branches: Vec<BranchRecord>,
    #[serde(default)]
    pub generators: Vec<GeneratorDynamics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<Solution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced: Option<ReducedBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_s: Option<f64>,
    /// Generator active-power dispatch from a MATPOWER gen table (bus, p.u.).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gen_dispatch: Vec<(i64, f64)>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

fn default_base_mva() -> f64 {
    100.0
}

/// Parse a case from text in the declared format and validate
/// cross-references.
pub fn parse_case(source: &str, format: CaseFormat) -> Result<ParsedCase> {
    let mut case = match format {
        CaseFormat::NativeJson => {
            serde_json::from_str::<ParsedCase>(source).map_err(|e| Error::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?
        }
        CaseFormat::MatpowerSubset => matpower::parse(source)?,
    };
    validate_case(&case)?;
    case.buses.sort_by_key(|b| b.id);
    case.generators.sort_by_key(|g| g.bus);
    Ok(case)
}

fn validate_case(case: &ParsedCase) -> Result<()> {
    if let Some(reduced) = &case.reduced {
        reduced.system.validate()?;
        if let Some(d) = &reduced.delta_init {
            if d.len() != reduced.system.n {
                return Err(Error::DimensionMismatch {
                    expected: reduced.system.n,
                    got: d.len(),
                });
            }
        }
    }
    if case.buses.is_empty() {
        // Reduced-only files have no bus-level data to validate.
        return Ok(());
    }
    let mut ids = BTreeMap::new();
    for bus in &case.buses {
        if ids.insert(bus.id, ()).is_some() {
            return Err(Error::DuplicateBus(bus.id));
        }
    }
    let slack = case
        .buses
        .iter()
        .filter(|b| b.bus_type == BusType::Slack)
        .count();
    if slack != 1 {
        return Err(Error::SlackCount(slack));
    }
    for br in &case.branches {
        for (end, ctx) in [(br.from_bus, "branch from"), (br.to_bus, "branch to")] {
            if !ids.contains_key(&end) {
                return Err(Error::DanglingBus {
                    bus: end,
                    context: ctx,
                });
            }
        }
        if br.from_bus == br.to_bus {
            return Err(Error::BadBranch {
                from: br.from_bus,
                to: br.to_bus,
                field: "from_bus == to_bus",
            });
        }
        if br.r < 0.0 {
            return Err(Error::BadBranch {
                from: br.from_bus,
                to: br.to_bus,
                field: "r < 0",
            });
        }
        if br.x == 0.0 {
            return Err(Error::BadBranch {
                from: br.from_bus,
                to: br.to_bus,
                field: "x == 0",
            });
        }
    }
    let mut gen_seen = BTreeMap::new();
    for gen in &case.generators {
        if !ids.contains_key(&gen.bus) {
            return Err(Error::DanglingBus {
                bus: gen.bus,
                context: "generator",
            });
        }
        if gen_seen.insert(gen.bus, ()).is_some() {
            return Err(Error::DuplicateGeneratorBus(gen.bus));
        }
        for (value, field) in [
            (gen.inertia_m, "inertia_m"),
            (gen.damping_d, "damping_d"),
            (gen.xd_prime, "xd_prime"),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::BadDynamics {
                    bus: gen.bus,
                    field,
                });
            }
        }
    }
    if let Some(sol) = &case.solution {
        if sol.v_mag.len() != case.buses.len() || sol.v_ang.len() != case.buses.len() {
            return Err(Error::DimensionMismatch {
                expected: case.buses.len(),
                got: sol.v_mag.len().min(sol.v_ang.len()),
            });
        }
        if sol.v_mag.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::MissingSolution);
        }
    }
    Ok(())
}

/// Canonical JSON emission: id-sorted tables, fixed key order, floats at 17
/// significant digits. `parse -> emit` is a fixed point on its own output.
pub fn emit_normalized(case: &ParsedCase) -> String {
    let mut normalized = case.clone();
    normalized.warnings.clear();
    // Sort tables; the solution arrays follow the bus permutation.
    let mut order: Vec<usize> = (0..normalized.buses.len()).collect();
    order.sort_by_key(|&k| normalized.buses[k].id);
    if let Some(sol) = &normalized.solution {
        let v_mag = order.iter().map(|&k| sol.v_mag[k]).collect();
        let v_ang = order.iter().map(|&k| sol.v_ang[k]).collect();
        normalized.solution = Some(Solution { v_mag, v_ang });
    }
    normalized.buses.sort_by_key(|b| b.id);
    normalized.branches.sort_by_key(|a| (a.from_bus, a.to_bus));
    normalized.generators.sort_by_key(|g| g.bus);
    let mut text = jsonfmt::to_string_pretty(&normalized).expect("case serialization");
    text.push('\n');
    text
}

/// Standard bus admittance matrix over `buses` (in slice order).
pub fn assemble_ybus(buses: &[BusRecord], branches: &[BranchRecord]) -> Result<DMatrix<c64>> {
    let n = buses.len();
    let index: BTreeMap<i64, usize> = buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect();
    let mut y = DMatrix::zeros(n, n);
    let mut in_service = 0usize;
    for br in branches {
        if !br.status {
            continue;
        }
        if br.r == 0.0 && br.x == 0.0 {
            return Err(Error::ZeroImpedanceBranch {
                from: br.from_bus,
                to: br.to_bus,
            });
        }
        in_service += 1;
        let f = *index.get(&br.from_bus).ok_or(Error::DanglingBus {
            bus: br.from_bus,
            context: "branch from",
        })?;
        let t = *index.get(&br.to_bus).ok_or(Error::DanglingBus {
            bus: br.to_bus,
            context: "branch to",
        })?;
        let ys = c64::new(1.0, 0.0) / c64::new(br.r, br.x);
        let bc = c64::new(0.0, br.b_shunt / 2.0);
        let tap = if br.tap == 0.0 { 1.0 } else { br.tap };
        y[(f, f)] += (ys + bc) / (tap * tap);
        y[(t, t)] += ys + bc;
        y[(f, t)] -= ys / tap;
        y[(t, f)] -= ys / tap;
    }
    if in_service == 0 {
        return Err(Error::EmptyNetwork);
    }
    Ok(y)
}

/// Schur-complement elimination of all nodes not in `retained`.
///
/// Retained-node current/voltage relations are preserved exactly for any
/// voltage profile with zero current injection at eliminated nodes.
pub fn kron_reduce(y_full: &DMatrix<c64>, retained: &[usize]) -> Result<DMatrix<c64>> {
    let n = y_full.nrows();
    assert_eq!(n, y_full.ncols(), "kron_reduce: matrix must be square");
    for &r in retained {
        assert!(r < n, "kron_reduce: retained index {r} out of range");
    }
    let mut keep = vec![false; n];
    for &r in retained {
        keep[r] = true;
    }
    let eliminated: Vec<usize> = (0..n).filter(|&k| !keep[k]).collect();
    if eliminated.is_empty() {
        return Ok(DMatrix::from_fn(retained.len(), retained.len(), |i, j| {
            y_full[(retained[i], retained[j])]
        }));
    }

    let nr = retained.len();
    let ne = eliminated.len();
    let y_rr = DMatrix::from_fn(nr, nr, |i, j| y_full[(retained[i], retained[j])]);
    let y_re = DMatrix::from_fn(nr, ne, |i, j| y_full[(retained[i], eliminated[j])]);
    let y_er = DMatrix::from_fn(ne, nr, |i, j| y_full[(eliminated[i], retained[j])]);
    let y_ee = DMatrix::from_fn(ne, ne, |i, j| y_full[(eliminated[i], eliminated[j])]);

    let rcond = rcond_inf(&y_ee);
    if rcond < ELIMINATION_RCOND_MIN {
        return Err(Error::SingularElimination { rcond });
    }
    let x = y_ee
        .lu()
        .solve(&y_er)
        .ok_or(Error::SingularElimination { rcond })?;
    Ok(y_rr - y_re * x)
}

/// Result of reducing a network case to its machine internal nodes.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub system: ReducedSystem,
    /// Internal EMF angles from the solved operating point; the natural
    /// initial guess for the equilibrium solver.
    pub delta_init: Vec<f64>,
    /// Solved net active-power injection per machine, per unit.
    pub gen_injection: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Build the classical-model [`ReducedSystem`]: constant-impedance loads from
/// the solved voltages, internal EMF nodes behind `xd_prime`, Kron
/// elimination of every non-internal node.
pub fn build_reduced_system(
    buses: &[BusRecord],
    branches: &[BranchRecord],
    dynamics: &[GeneratorDynamics],
    solution: &Solution,
    omega_s: f64,
) -> Result<Reduction> {
    if dynamics.is_empty() {
        return Err(Error::NoDynamics);
    }
    let nb = buses.len();
    let ng = dynamics.len();
    if solution.v_mag.len() != nb || solution.v_ang.len() != nb {
        return Err(Error::DimensionMismatch {
            expected: nb,
            got: solution.v_mag.len().min(solution.v_ang.len()),
        });
    }
    let index: BTreeMap<i64, usize> = buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect();
    let mut warnings = Vec::new();

    let y_network = assemble_ybus(buses, branches)?;
    let v: Vec<c64> = (0..nb)
        .map(|k| c64::from_polar(solution.v_mag[k], solution.v_ang[k]))
        .collect();
    if solution
        .v_mag
        .iter()
        .any(|&vm| !vm.is_finite() || vm <= 0.0)
    {
        return Err(Error::MissingSolution);
    }

    // Net injection into the network at every bus, from the solution.
    let injections: Vec<c64> = (0..nb)
        .map(|k| {
            let i_k: c64 = (0..nb).map(|j| y_network[(k, j)] * v[j]).sum();
            v[k] * i_k.conj()
        })
        .collect();

    // Sanity check the supplied power flow at buses without machines.
    let gen_bus: Vec<usize> = dynamics
        .iter()
        .map(|g| {
            index.get(&g.bus).copied().ok_or(Error::DanglingBus {
                bus: g.bus,
                context: "generator",
            })
        })
        .collect::<Result<_>>()?;
    let mut has_gen = vec![false; nb];
    for &b in &gen_bus {
        has_gen[b] = true;
    }
    for k in 0..nb {
        if !has_gen[k] {
            let mismatch = injections[k] + c64::new(buses[k].p_load, buses[k].q_load);
            if mismatch.norm() > 1e-6 {
                warnings.push(format!(
                    "power-flow mismatch {:.3e} p.u. at bus {}; solution may not be converged",
                    mismatch.norm(),
                    buses[k].id
                ));
            }
        }
    }

    // Loads become constant shunt admittances at the solved voltages.
    let mut y_aug = DMatrix::zeros(nb + ng, nb + ng);
    y_aug.view_mut((0, 0), (nb, nb)).copy_from(&y_network);
    for k in 0..nb {
        if buses[k].p_load != 0.0 || buses[k].q_load != 0.0 {
            let y_load = c64::new(buses[k].p_load, -buses[k].q_load) / solution.v_mag[k].powi(2);
            y_aug[(k, k)] += y_load;
        }
    }

    // Internal EMF nodes behind the transient reactance.
    let mut v_mag = Vec::with_capacity(ng);
    let mut delta_init = Vec::with_capacity(ng);
    let mut gen_injection = Vec::with_capacity(ng);
    let mut p_mech = Vec::with_capacity(ng);
    for (g, dyn_g) in dynamics.iter().enumerate() {
        let b = gen_bus[g];
        // Machine output = network injection plus the local load it covers.
        let s_gen = injections[b] + c64::new(buses[b].p_load, buses[b].q_load);
        let i_term = (s_gen / v[b]).conj();
        let emf = v[b] + c64::new(0.0, dyn_g.xd_prime) * i_term;
        v_mag.push(emf.norm());
        delta_init.push(emf.arg());
        gen_injection.push(s_gen.re);
        p_mech.push(dyn_g.p_mech.unwrap_or(s_gen.re));

        let y_g = c64::new(1.0, 0.0) / c64::new(0.0, dyn_g.xd_prime);
        let int = nb + g;
        y_aug[(int, int)] += y_g;
        y_aug[(b, b)] += y_g;
        y_aug[(int, b)] -= y_g;
        y_aug[(b, int)] -= y_g;
    }

    let retained: Vec<usize> = (nb..nb + ng).collect();
    let y_red = kron_reduce(&y_aug, &retained)?;

    let y_mag = (0..ng)
        .map(|i| (0..ng).map(|j| y_red[(i, j)].norm()).collect())
        .collect();
    let y_ang = (0..ng)
        .map(|i| (0..ng).map(|j| y_red[(i, j)].arg()).collect())
        .collect();

    let system = ReducedSystem {
        n: ng,
        v_mag,
        y_mag,
        y_ang,
        m: dynamics.iter().map(|g| g.inertia_m).collect(),
        d: dynamics.iter().map(|g| g.damping_d).collect(),
        p_mech,
        omega_s,
    };
    system.validate()?;
    Ok(Reduction {
        system,
        delta_init,
        gen_injection,
        warnings,
    })
}

/// Resolve a parsed case into a ready-to-analyze reduced system.
///
/// A `reduced` block wins; otherwise the case must carry a solution and
/// dynamics for at least one generator.
pub fn resolve_case(case: &ParsedCase) -> Result<Reduction> {
    if let Some(block) = &case.reduced {
        block.system.validate()?;
        let n = block.system.n;
        return Ok(Reduction {
            system: block.system.clone(),
            delta_init: block.delta_init.clone().unwrap_or_else(|| vec![0.0; n]),
            gen_injection: Vec::new(),
            warnings: Vec::new(),
        });
    }
    if case.generators.is_empty() {
        return Err(match case.gen_dispatch.first() {
            Some(&(bus, _)) => Error::MissingDynamics(bus),
            None => Error::NoDynamics,
        });
    }
    let solution = case.solution.as_ref().ok_or(Error::MissingSolution)?;
    let omega_s = case.omega_s.unwrap_or(DEFAULT_OMEGA_S);
    build_reduced_system(
        &case.buses,
        &case.branches,
        &case.generators,
        solution,
        omega_s,
    )
}
