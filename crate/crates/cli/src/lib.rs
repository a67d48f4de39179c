//! `swingcert`: certify small-signal stability of swing-equation equilibria
//! and cross-validate against the Jacobian spectrum, pencil residuals, and
//! time-domain simulation.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use swingcert_core::equilibrium::{self, Equilibrium, SolveOptions};
use swingcert_core::graphcert::{self, BoundUnits, SweepParameter, SweepSpec};
use swingcert_core::jsonfmt;
use swingcert_core::netmodel::{self, CaseFormat, ParsedCase, ReducedBlock, Reduction};
use swingcert_core::simulate::{self, IntegrateOptions};
use swingcert_core::spectral::{self, StabilityVerdict};
use swingcert_core::{Error, Result};

pub mod report;
use report::*;

/// Exit codes of `certify`/`report`: 0 certified, 2 uncertified but the
/// spectrum is stable, 3 unstable, 4 inconclusive, 1 error.
pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_STABLE_UNCERTIFIED: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "swingcert",
    version,
    about = "Algebraic stability certificates for multi-machine swing equations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundUnitsArg {
    Theorem,
    Proof,
}

impl From<BoundUnitsArg> for BoundUnits {
    fn from(value: BoundUnitsArg) -> Self {
        match value {
            BoundUnitsArg::Theorem => BoundUnits::Theorem,
            BoundUnitsArg::Proof => BoundUnits::Proof,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct CaseArgs {
    /// Case file (.m for the MATPOWER subset, .json otherwise).
    pub case: PathBuf,
    /// Machine dynamics sidecar JSON (required for MATPOWER cases).
    #[arg(long)]
    pub dynamics: Option<PathBuf>,
    /// Reference machine index (default: largest inertia).
    #[arg(long)]
    pub reference: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the full certification pipeline and emit a report.
    Certify {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, value_enum, default_value = "theorem")]
        bound_units: BoundUnitsArg,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
        /// Margin sweep, e.g. "d=1,2,4" or "pm=0.8:1.2:5" (m, d, or pm).
        #[arg(long)]
        sweep: Option<String>,
        /// Append a perturbation experiment to the report.
        #[arg(long)]
        simulate: bool,
        /// Record per-stage timings (timings vary run to run, so reports
        /// carry them only on request).
        #[arg(long)]
        timings: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Emit the eigenvalues of the system Jacobian as CSV.
    Spectrum {
        #[command(flatten)]
        case: CaseArgs,
        /// Append a per-eigenvalue pencil-residual column.
        #[arg(long)]
        pencil_check: bool,
    },
    /// Re-evaluate the certificate for new machine parameters.
    Retune {
        #[command(flatten)]
        case: CaseArgs,
        /// New inertia values, comma separated.
        #[arg(long, value_name = "M1,M2,...")]
        m: String,
        /// New damping values, comma separated.
        #[arg(long, value_name = "D1,D2,...")]
        d: String,
        #[arg(long, value_enum, default_value = "theorem")]
        bound_units: BoundUnitsArg,
    },
    /// Reduce a network case and emit the machine-level system as JSON
    /// (itself a loadable case).
    Reduce {
        #[command(flatten)]
        case: CaseArgs,
    },
    /// Time-domain experiment around the equilibrium.
    Simulate {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = 0.01)]
        radius: f64,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 20.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Emit one perturbed trajectory as CSV instead of the summary.
        #[arg(long)]
        trajectory: bool,
    },
    /// Full pipeline plus simulation in one report.
    Report {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, value_enum, default_value = "theorem")]
        bound_units: BoundUnitsArg,
        #[arg(long, default_value_t = 0.01)]
        radius: f64,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        timings: bool,
    },
}

/// Cap the global thread pool from SWINGCERT_THREADS, when set.
pub fn init_threads() {
    if let Ok(value) = std::env::var("SWINGCERT_THREADS") {
        if let Ok(n) = value.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok((output, sink, code)) => {
            if let Err(e) = write_output(&output, sink.as_deref()) {
                eprintln!("swingcert: {e}");
                return EXIT_ERROR;
            }
            code
        }
        Err(e) => {
            let diag = ErrorReport {
                schema: SCHEMA_VERSION,
                error: e.to_string(),
            };
            println!("{}", jsonfmt::to_string_pretty(&diag).unwrap());
            eprintln!("swingcert: {e}");
            EXIT_ERROR
        }
    }
}

fn write_output(text: &str, out: Option<&Path>) -> std::io::Result<()> {
    // Exactly one trailing newline regardless of how the text was built.
    let trimmed = text.trim_end_matches('\n');
    match out {
        Some(path) => fs::write(path, format!("{trimmed}\n")),
        None => {
            println!("{trimmed}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(String, Option<PathBuf>, i32)> {
    match cli.command {
        Command::Certify {
            case,
            bound_units,
            format,
            sweep,
            simulate,
            timings,
            seed,
        } => {
            let out = case.out.clone();
            let loaded = load_case(&case)?;
            let sweep_spec = sweep.as_deref().map(parse_sweep_spec).transpose()?;
            let options = PipelineOptions {
                bound_units: bound_units.into(),
                reference: case.reference,
                sweep: sweep_spec,
                simulate: simulate.then_some(SimulateParams {
                    radius: 0.01,
                    samples: 32,
                    seed,
                    t_end: 20.0,
                    dt: 1e-3,
                }),
                timings,
            };
            let outcome = analyze(&loaded, &options)?;
            let text = match format {
                OutputFormat::Json => jsonfmt::to_string_pretty(&outcome.report).unwrap(),
                OutputFormat::Csv => certify_csv(&outcome.report),
            };
            Ok((text, out, outcome.exit_code))
        }
        Command::Spectrum { case, pencil_check } => {
            let out = case.out.clone();
            let loaded = load_case(&case)?;
            let text = spectrum_csv(&loaded, case.reference, pencil_check)?;
            Ok((text, out, 0))
        }
        Command::Retune {
            case,
            m,
            d,
            bound_units,
        } => {
            let out = case.out.clone();
            let loaded = load_case(&case)?;
            let m_new = parse_float_list(&m)?;
            let d_new = parse_float_list(&d)?;
            let text = retune(&loaded, case.reference, bound_units.into(), &m_new, &d_new)?;
            Ok((text, out, 0))
        }
        Command::Reduce { case } => {
            let out = case.out.clone();
            let loaded = load_case(&case)?;
            let block = ReducedBlock {
                system: loaded.reduction.system.clone(),
                delta_init: Some(loaded.reduction.delta_init.clone()),
            };
            #[derive(serde::Serialize)]
            struct ReducedOut {
                reduced: ReducedBlock,
            }
            let mut text = jsonfmt::to_string_pretty(&ReducedOut { reduced: block }).unwrap();
            text.push('\n');
            Ok((text, out, 0))
        }
        Command::Simulate {
            case,
            radius,
            samples,
            seed,
            t_end,
            dt,
            trajectory,
        } => {
            let out = case.out.clone();
            let loaded = load_case(&case)?;
            let text = simulate_cmd(
                &loaded,
                case.reference,
                SimulateParams {
                    radius,
                    samples,
                    seed,
                    t_end,
                    dt,
                },
                trajectory,
            )?;
            Ok((text, out, 0))
        }
        Command::Report {
            case,
            bound_units,
            radius,
            samples,
            seed,
            timings,
        } => {
            let out = case.out.clone();
            let loaded = load_case(&case)?;
            let options = PipelineOptions {
                bound_units: bound_units.into(),
                reference: case.reference,
                sweep: None,
                simulate: Some(SimulateParams {
                    radius,
                    samples,
                    seed,
                    t_end: 20.0,
                    dt: 1e-3,
                }),
                timings,
            };
            let outcome = analyze(&loaded, &options)?;
            let text = jsonfmt::to_string_pretty(&outcome.report).unwrap();
            Ok((text, out, outcome.exit_code))
        }
    }
}

/// A case file resolved to its reduced machine-level system.
pub struct LoadedCase {
    pub meta: CaseMeta,
    pub case: ParsedCase,
    pub reduction: Reduction,
    pub parse_ms: f64,
    pub reduce_ms: f64,
}

pub fn load_case(args: &CaseArgs) -> Result<LoadedCase> {
    let t0 = Instant::now();
    let source = fs::read_to_string(&args.case)?;
    let format = if args.case.extension().is_some_and(|e| e == "m") {
        CaseFormat::MatpowerSubset
    } else {
        CaseFormat::NativeJson
    };
    let mut case = netmodel::parse_case(&source, format)?;
    if let Some(path) = &args.dynamics {
        let sidecar = fs::read_to_string(path)?;
        netmodel::matpower::merge_dynamics(&mut case, &sidecar)?;
    }
    let parse_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let reduction = netmodel::resolve_case(&case)?;
    let reduce_ms = t1.elapsed().as_secs_f64() * 1e3;

    let mut warnings = case.warnings.clone();
    warnings.extend(reduction.warnings.iter().cloned());
    let meta = CaseMeta {
        path: args.case.display().to_string(),
        format: match (format, case.reduced.is_some()) {
            (_, true) => "reduced".to_string(),
            (CaseFormat::MatpowerSubset, false) => "matpower_subset".to_string(),
            (CaseFormat::NativeJson, false) => "native_json".to_string(),
        },
        machines: reduction.system.n,
        base_mva: case.reduced.is_none().then_some(case.base_mva),
        warnings,
    };
    Ok(LoadedCase {
        meta,
        case,
        reduction,
        parse_ms,
        reduce_ms,
    })
}

#[derive(Debug, Clone)]
pub struct SimulateParams {
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
    pub t_end: f64,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub bound_units: BoundUnits,
    pub reference: Option<usize>,
    pub sweep: Option<SweepSpec>,
    pub simulate: Option<SimulateParams>,
    pub timings: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            bound_units: BoundUnits::Theorem,
            reference: None,
            sweep: None,
            simulate: None,
            timings: false,
        }
    }
}

pub struct AnalysisOutcome {
    pub report: AnalysisReport,
    pub exit_code: i32,
}

/// Full pipeline: equilibrium, region check, Laplacian structure,
/// certificate, spectrum, verdict, and optional sweep/simulation.
pub fn analyze(loaded: &LoadedCase, options: &PipelineOptions) -> Result<AnalysisOutcome> {
    let sys = &loaded.reduction.system;

    let t0 = Instant::now();
    let eq = equilibrium::solve_equilibrium(
        sys,
        &loaded.reduction.delta_init,
        &SolveOptions {
            reference: options.reference,
            ..Default::default()
        },
    )?;
    let solve_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let graph = graphcert::induced_digraph(sys, &eq.delta_star)?;
    let omega = graphcert::check_omega(&graph, &eq.omega_star);
    let jac_l = equilibrium::flow_jacobian(sys, &eq.delta_star)?;
    let laplacian = graphcert::laplacian_properties(&jac_l, &omega)?;
    let cert = graphcert::certificate(sys, &eq, options.bound_units);
    let certificate_ms = t1.elapsed().as_secs_f64() * 1e3;

    let t2 = Instant::now();
    let sys_jac = spectral::build_jacobian(sys, &jac_l)?;
    let spectrum = spectral::analyze_spectrum(&sys_jac)?;
    let verdict = spectral::stability_verdict(&spectrum);
    let spectrum_ms = t2.elapsed().as_secs_f64() * 1e3;

    let sweep = match &options.sweep {
        Some(spec) => Some(graphcert::certificate_margin_search(
            sys,
            &eq,
            spec,
            options.bound_units,
        )?),
        None => None,
    };

    let mut simulate_ms = None;
    let simulation = match &options.simulate {
        Some(params) => {
            let t3 = Instant::now();
            let summary = simulate::perturbation_experiment(
                sys,
                &eq,
                params.samples,
                params.radius,
                params.seed,
                &IntegrateOptions {
                    dt: params.dt,
                    t_end: params.t_end,
                    record_stride: usize::MAX,
                    ..Default::default()
                },
            )?;
            simulate_ms = Some(t3.elapsed().as_secs_f64() * 1e3);
            Some(summary)
        }
        None => None,
    };

    let consistency_error = if cert.certified && verdict == StabilityVerdict::Unstable {
        Some(
            "certified system reported an unstable spectrum; this contradicts the certificate \
             and indicates a numerical defect"
                .to_string(),
        )
    } else {
        None
    };

    let exit_code = if consistency_error.is_some() {
        EXIT_ERROR
    } else if cert.certified {
        EXIT_CERTIFIED
    } else {
        match verdict {
            StabilityVerdict::AsymptoticallyStableReduced => EXIT_STABLE_UNCERTIFIED,
            StabilityVerdict::Unstable => EXIT_UNSTABLE,
            StabilityVerdict::InconclusiveZeroCluster => EXIT_INCONCLUSIVE,
        }
    };

    let report = AnalysisReport {
        schema: SCHEMA_VERSION,
        case: loaded.meta.clone(),
        bound_units: options.bound_units,
        equilibrium: EquilibriumSection::from_core(&eq),
        omega_check: OmegaSection::from_core(&omega),
        certificate: CertificateSection::from_core(&cert),
        laplacian_properties: LaplacianSection::from_core(&laplacian),
        spectrum: SpectrumSection::from_core(&spectrum),
        verdict,
        summary: SummarySection::build(&omega, &cert, &spectrum),
        sweep,
        simulation,
        timings_ms: options.timings.then_some(Timings {
            parse_ms: loaded.parse_ms,
            reduce_ms: loaded.reduce_ms,
            solve_ms,
            certificate_ms,
            spectrum_ms,
            simulate_ms,
        }),
        consistency_error,
    };
    Ok(AnalysisOutcome { report, exit_code })
}

fn certify_csv(report: &AnalysisReport) -> String {
    if let Some(sweep) = &report.sweep {
        return sweep.to_csv();
    }
    let mut out = String::from("node,flow_sum,bound,s,q\n");
    for i in 0..report.certificate.s.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i,
            report.certificate.flow_sum[i],
            report.certificate.bound[i],
            report.certificate.s[i],
            report.certificate.q[i],
        ));
    }
    out
}

fn solve_loaded(loaded: &LoadedCase, reference: Option<usize>) -> Result<Equilibrium> {
    equilibrium::solve_equilibrium(
        &loaded.reduction.system,
        &loaded.reduction.delta_init,
        &SolveOptions {
            reference,
            ..Default::default()
        },
    )
}

fn spectrum_csv(
    loaded: &LoadedCase,
    reference: Option<usize>,
    pencil_check: bool,
) -> Result<String> {
    let sys = &loaded.reduction.system;
    let eq = solve_loaded(loaded, reference)?;
    let jac_l = equilibrium::flow_jacobian(sys, &eq.delta_star)?;
    let sys_jac = spectral::build_jacobian(sys, &jac_l)?;
    let mut spectrum = spectral::analyze_spectrum(&sys_jac)?;
    if pencil_check {
        spectral::attach_pencil_residuals(&mut spectrum, sys, &jac_l);
    }
    let mut out = String::from(if pencil_check {
        "re,im,pencil_residual\n"
    } else {
        "re,im\n"
    });
    for (k, e) in spectrum.eigenvalues.iter().enumerate() {
        match &spectrum.pencil_residuals {
            Some(res) => out.push_str(&format!("{},{},{}\n", e.re, e.im, res[k])),
            None => out.push_str(&format!("{},{}\n", e.re, e.im)),
        }
    }
    Ok(out)
}

fn retune(
    loaded: &LoadedCase,
    reference: Option<usize>,
    units: BoundUnits,
    m_new: &[f64],
    d_new: &[f64],
) -> Result<String> {
    let sys = &loaded.reduction.system;
    let eq = solve_loaded(loaded, reference)?;
    let old_cert = graphcert::certificate(sys, &eq, units);
    let new_cert = graphcert::retune_certificate(&old_cert, m_new, d_new, sys.omega_s)?;

    let (_, old_spectrum) = spectral::spectrum_at(sys, &eq.delta_star)?;
    let mut retuned_sys = sys.clone();
    retuned_sys.m = m_new.to_vec();
    retuned_sys.d = d_new.to_vec();
    let (_, new_spectrum) = spectral::spectrum_at(&retuned_sys, &eq.delta_star)?;

    let report = RetuneReport {
        schema: SCHEMA_VERSION,
        case: loaded.meta.clone(),
        bound_units: units,
        m_new: m_new.to_vec(),
        d_new: d_new.to_vec(),
        old: CertificateSection::from_core(&old_cert),
        new: CertificateSection::from_core(&new_cert),
        old_verdict: spectral::stability_verdict(&old_spectrum),
        new_verdict: spectral::stability_verdict(&new_spectrum),
    };
    Ok(jsonfmt::to_string_pretty(&report).unwrap())
}

fn simulate_cmd(
    loaded: &LoadedCase,
    reference: Option<usize>,
    params: SimulateParams,
    trajectory: bool,
) -> Result<String> {
    let sys = &loaded.reduction.system;
    let eq = solve_loaded(loaded, reference)?;
    if trajectory {
        // One representative run: the first experiment sample, fully
        // recorded.
        let opts = IntegrateOptions {
            dt: params.dt,
            t_end: params.t_end,
            ..Default::default()
        };
        let state0 = perturbed_state(sys, &eq, params.radius, params.seed);
        let traj = simulate::integrate(sys, &state0, Some(&eq), &opts)?;
        return Ok(traj.to_csv());
    }
    let summary = simulate::perturbation_experiment(
        sys,
        &eq,
        params.samples,
        params.radius,
        params.seed,
        &IntegrateOptions {
            dt: params.dt,
            t_end: params.t_end,
            record_stride: usize::MAX,
            ..Default::default()
        },
    )?;
    #[derive(serde::Serialize)]
    struct SimOut {
        schema: u32,
        case: CaseMeta,
        experiment: swingcert_core::simulate::ExperimentSummary,
    }
    Ok(jsonfmt::to_string_pretty(&SimOut {
        schema: SCHEMA_VERSION,
        case: loaded.meta.clone(),
        experiment: summary,
    })
    .unwrap())
}

/// Deterministic sample-0 perturbed state, matching the experiment's
/// sampling scheme.
fn perturbed_state(
    sys: &swingcert_core::netmodel::ReducedSystem,
    eq: &Equilibrium,
    radius: f64,
    seed: u64,
) -> Vec<f64> {
    use swingcert_core::simulate::sample_perturbation;
    let perturb = sample_perturbation(sys.n, radius, seed, 0);
    let mut state = vec![0.0; 2 * sys.n];
    for i in 0..sys.n {
        state[i] = eq.delta_star[i] + perturb[i];
    }
    state
}

fn parse_float_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: 1,
                column: 1,
                message: format!("invalid number `{tok}` in list"),
            })
        })
        .collect()
}

/// Sweep specs: `m=...`, `d=...`, or `pm=...`; values either a comma list
/// or `start:stop:count`.
pub fn parse_sweep_spec(text: &str) -> Result<SweepSpec> {
    let (name, rest) = text.split_once('=').ok_or_else(|| Error::Parse {
        line: 1,
        column: 1,
        message: format!("sweep spec `{text}` must look like d=1,2,4 or pm=0.8:1.2:5"),
    })?;
    let parameter = match name.trim() {
        "m" => SweepParameter::InertiaScale,
        "d" => SweepParameter::DampingScale,
        "pm" => SweepParameter::LoadingScale,
        other => {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("unknown sweep parameter `{other}` (expected m, d, or pm)"),
            })
        }
    };
    let values = if rest.contains(':') {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("range sweep `{rest}` must be start:stop:count"),
            });
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad_number(parts[0]))?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad_number(parts[1]))?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad_number(parts[2]))?;
        if count < 2 {
            vec![start]
        } else {
            (0..count)
                .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
                .collect()
        }
    } else {
        parse_float_list(rest)?
    };
    Ok(SweepSpec { parameter, values })
}

fn bad_number(tok: &str) -> Error {
    Error::Parse {
        line: 1,
        column: 1,
        message: format!("invalid number `{tok}` in sweep spec"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_spec_comma_list() {
        let spec = parse_sweep_spec("d=1,2,4").unwrap();
        assert_eq!(spec.parameter, SweepParameter::DampingScale);
        assert_eq!(spec.values, vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn sweep_spec_linspace() {
        let spec = parse_sweep_spec("pm=0.8:1.2:5").unwrap();
        assert_eq!(spec.parameter, SweepParameter::LoadingScale);
        assert_eq!(spec.values, vec![0.8, 0.9, 1.0, 1.1, 1.2]);
    }

    #[test]
    fn sweep_spec_rejects_unknown_parameter() {
        assert!(parse_sweep_spec("x=1,2").is_err());
        assert!(parse_sweep_spec("d:1,2").is_err());
    }
}
