//! MATPOWER-subset import: `mpc.baseMVA`, `mpc.bus`, `mpc.gen`, `mpc.branch`.
//!
//! Standard case files carry no machine dynamics, so `M`, `D`, and `x'_d`
//! come from a sidecar JSON merged in with [`merge_dynamics`]. Unknown tables
//! and extra columns are ignored with a warning. VM/VA columns are taken as
//! the solved operating point.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::netmodel::{BranchRecord, BusRecord, BusType, GeneratorDynamics, ParsedCase, Solution};

const BUS_COLS: usize = 13;
const GEN_COLS: usize = 10;
const BRANCH_COLS: usize = 11;

pub fn parse(source: &str) -> Result<ParsedCase> {
    let mut case = ParsedCase {
        base_mva: 100.0,
        ..Default::default()
    };
    let mut bus_rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut gen_rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut branch_rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut seen_base = false;

    #[derive(PartialEq, Clone, Copy)]
    enum Table {
        None,
        Bus,
        Gen,
        Branch,
        Ignored,
    }
    let mut table = Table::None;

    for (lineno0, raw) in source.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = match raw.find('%') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }

        if table == Table::None {
            if let Some(rest) = trimmed.strip_prefix("mpc.") {
                let (name, tail) = match rest.find(['=', ' ', '\t']) {
                    Some(p) => (
                        rest[..p].trim(),
                        rest[p..].trim_start_matches(['=', ' ', '\t']),
                    ),
                    None => (rest.trim(), ""),
                };
                match name {
                    "baseMVA" => {
                        let value = tail.trim_end_matches(';').trim();
                        case.base_mva = value.parse().map_err(|_| Error::Parse {
                            line: lineno,
                            column: 1,
                            message: format!("invalid baseMVA value `{value}`"),
                        })?;
                        seen_base = true;
                        continue;
                    }
                    "bus" => table = Table::Bus,
                    "gen" => table = Table::Gen,
                    "branch" => table = Table::Branch,
                    "version" => continue,
                    other => {
                        case.warnings
                            .push(format!("line {lineno}: ignoring table mpc.{other}"));
                        if tail.contains('[') && !tail.contains("];") {
                            table = Table::Ignored;
                        }
                        continue;
                    }
                }
                // A table header may carry rows on the same line; the subset
                // fixtures keep rows on their own lines.
                if tail.contains("];") {
                    table = Table::None;
                }
                continue;
            }
            if trimmed.starts_with("function") || trimmed.starts_with("clear") {
                continue;
            }
            return Err(Error::Parse {
                line: lineno,
                column: 1,
                message: format!("unexpected statement `{trimmed}`"),
            });
        }

        // Inside a table.
        if trimmed.starts_with("];") || trimmed == "]" {
            table = Table::None;
            continue;
        }
        if table == Table::Ignored {
            continue;
        }
        let row_text = trimmed.trim_end_matches(';');
        let mut row = Vec::new();
        for (k, tok) in row_text.split_whitespace().enumerate() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                column: k + 1,
                message: format!("invalid number `{tok}`"),
            })?;
            row.push(v);
        }
        if row.is_empty() {
            continue;
        }
        match table {
            Table::Bus => bus_rows.push((lineno, row)),
            Table::Gen => gen_rows.push((lineno, row)),
            Table::Branch => branch_rows.push((lineno, row)),
            _ => unreachable!(),
        }
    }

    if !seen_base {
        case.warnings
            .push("no mpc.baseMVA found; assuming 100 MVA".to_string());
    }
    let base = case.base_mva;

    let mut v_mag = Vec::new();
    let mut v_ang = Vec::new();
    let mut warned_extra_bus = false;
    for (lineno, row) in &bus_rows {
        if row.len() < BUS_COLS {
            return Err(Error::Parse {
                line: *lineno,
                column: row.len(),
                message: format!("bus row needs {BUS_COLS} columns, found {}", row.len()),
            });
        }
        if row.len() > BUS_COLS && !warned_extra_bus {
            warned_extra_bus = true;
            case.warnings
                .push(format!("line {lineno}: extra bus columns ignored"));
        }
        let bus_type = match row[1] as i64 {
            3 => BusType::Slack,
            2 => BusType::Pv,
            1 => BusType::Pq,
            other => {
                case.warnings.push(format!(
                    "line {lineno}: bus type {other} treated as PQ (out-of-service?)"
                ));
                BusType::Pq
            }
        };
        if row[4] != 0.0 || row[5] != 0.0 {
            case.warnings.push(format!(
                "line {lineno}: bus shunt GS/BS not modeled, ignored"
            ));
        }
        case.buses.push(BusRecord {
            id: row[0] as i64,
            bus_type,
            p_load: row[2] / base,
            q_load: row[3] / base,
            v_mag: row[7],
            v_ang: row[8].to_radians(),
            base_kv: row[9],
        });
        v_mag.push(row[7]);
        v_ang.push(row[8].to_radians());
    }

    for (lineno, row) in &gen_rows {
        if row.len() < GEN_COLS {
            return Err(Error::Parse {
                line: *lineno,
                column: row.len(),
                message: format!("gen row needs {GEN_COLS} columns, found {}", row.len()),
            });
        }
        let status = row[7] != 0.0;
        if !status {
            case.warnings
                .push(format!("line {lineno}: out-of-service generator skipped"));
            continue;
        }
        case.gen_dispatch.push((row[0] as i64, row[1] / base));
    }

    let mut warned_extra_branch = false;
    for (lineno, row) in &branch_rows {
        if row.len() < BRANCH_COLS {
            return Err(Error::Parse {
                line: *lineno,
                column: row.len(),
                message: format!(
                    "branch row needs {BRANCH_COLS} columns, found {}",
                    row.len()
                ),
            });
        }
        if row.len() > BRANCH_COLS && !warned_extra_branch {
            warned_extra_branch = true;
            case.warnings
                .push(format!("line {lineno}: extra branch columns ignored"));
        }
        if row[9] != 0.0 {
            case.warnings
                .push(format!("line {lineno}: phase shift not modeled, ignored"));
        }
        case.branches.push(BranchRecord {
            from_bus: row[0] as i64,
            to_bus: row[1] as i64,
            r: row[2],
            x: row[3],
            b_shunt: row[4],
            tap: if row[8] == 0.0 { 1.0 } else { row[8] },
            status: row[10] != 0.0,
        });
    }

    // The bus solution arrays follow the final id-sorted bus order.
    let mut order: Vec<usize> = (0..case.buses.len()).collect();
    order.sort_by_key(|&k| case.buses[k].id);
    case.solution = Some(Solution {
        v_mag: order.iter().map(|&k| v_mag[k]).collect(),
        v_ang: order.iter().map(|&k| v_ang[k]).collect(),
    });
    Ok(case)
}

#[derive(Deserialize)]
struct Sidecar {
    #[serde(default)]
    omega_s: Option<f64>,
    machines: Vec<SidecarMachine>,
}

#[derive(Deserialize)]
struct SidecarMachine {
    bus: i64,
    inertia_m: f64,
    damping_d: f64,
    xd_prime: f64,
    #[serde(default)]
    p_mech: Option<f64>,
}

/// Merge a dynamics sidecar (JSON) into a parsed MATPOWER case. Mechanical
/// power defaults to the gen-table dispatch when the sidecar omits it.
pub fn merge_dynamics(case: &mut ParsedCase, sidecar_json: &str) -> Result<()> {
    let sidecar: Sidecar = serde_json::from_str(sidecar_json).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: format!("dynamics sidecar: {e}"),
    })?;
    if case.omega_s.is_none() {
        case.omega_s = sidecar.omega_s;
    }
    for machine in sidecar.machines {
        let dispatch = case
            .gen_dispatch
            .iter()
            .find(|(bus, _)| *bus == machine.bus)
            .map(|&(_, p)| p);
        if dispatch.is_none() && !case.buses.iter().any(|b| b.id == machine.bus) {
            return Err(Error::DanglingBus {
                bus: machine.bus,
                context: "dynamics sidecar",
            });
        }
        case.generators.push(GeneratorDynamics {
            bus: machine.bus,
            inertia_m: machine.inertia_m,
            damping_d: machine.damping_d,
            xd_prime: machine.xd_prime,
            p_mech: machine.p_mech.or(dispatch),
        });
    }
    case.generators.sort_by_key(|g| g.bus);
    Ok(())
}
