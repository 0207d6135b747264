use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::{Matrix3, Vector3};

use pwlcone::auxiliary::{phi, tau_hat};
use pwlcone::cone::{analyze, ExistenceReport, SolverConfig};
use pwlcone::io::{parse_system, system_to_json, write_trace_csv, TraceSummary};
use pwlcone::simulate::{trace_orbit, TraceConfig};
use pwlcone::synthesis::{synthesize, synthesize_balanced, BalancedInput, SynthesisInput, SynthesisOutput};
use pwlcone::{Error, PwlSystem};

#[derive(Parser)]
#[command(name = "pwlcone", version, about = "Invariant cones and periodic orbits of two-zone piecewise-linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for invariant cones and classify their dynamics.
    Analyze(AnalyzeArgs),
    /// Build a system with a center cone at the given phase angles.
    Synthesize(SynthesizeArgs),
    /// Trace an orbit and write it as CSV.
    Simulate(SimulateArgs),
    /// Evaluate phi_gamma(tau).
    Phi {
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long, allow_hyphen_values = true)]
        tau: f64,
    },
    /// First zero of phi_gamma on (0, 2 pi].
    TauHat {
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
    },
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    system: PathBuf,
    /// Write the report as JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the summary.
    #[arg(long)]
    json: bool,
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long, default_value_t = 1e-12)]
    residual_tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    center_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    degeneracy_tol: f64,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    k: f64,
    #[arg(long, allow_hyphen_values = true)]
    c: f64,
    #[arg(long, allow_hyphen_values = true)]
    tau_minus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tau_plus: Option<f64>,
    /// Balanced construction (c = 0): alpha+.
    #[arg(long, allow_hyphen_values = true)]
    alpha_plus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta_plus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta_minus: Option<f64>,
    /// Balanced construction (c = 0): common real eigenvalue.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    system: PathBuf,
    /// Initial state `x1,y,z`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_triple)]
    x0: Vector3<f64>,
    #[arg(long, default_value_t = 2)]
    crossings: usize,
    #[arg(long, default_value_t = 1e3)]
    t_max: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 400)]
    samples_per_dwell: usize,
    #[arg(long, default_value_t = 1e-6)]
    closure_tol: f64,
}

fn parse_triple(s: &str) -> Result<Vector3<f64>, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok(Vector3::new(a, b, c)),
        _ => Err(format!("expected three comma-separated numbers, got {}", parts.len())),
    }
}

/// Process exit status for a library error.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NotFocusType(_) => 2,
        Error::Malformed(_) | Error::NotObservable { .. } | Error::NotContinuous { .. } | Error::Domain(_) => 3,
        Error::OmegaTildeViolation(_) | Error::ZeroOffset => 4,
        Error::NonPositiveBeta { .. } => 5,
        _ => 6,
    }
}

enum Failure {
    Model(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

fn io_failure(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load_system(path: &std::path::Path) -> Result<PwlSystem, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    Ok(parse_system(&text)?)
}

fn print_matrix(name: &str, a: &Matrix3<f64>) {
    println!("{name} =");
    for i in 0..3 {
        println!("  [{:>14.6} {:>14.6} {:>14.6}]", a[(i, 0)], a[(i, 1)], a[(i, 2)]);
    }
}

fn print_summary(report: &ExistenceReport) {
    println!("invariant cones: {}", report.cones.len());
    for c in &report.cones {
        println!(
            "  tau- = {:.12} tau+ = {:.12} u0 = {:.12} u1 = {:.12} ratio = {:.12} {:?} {:?}",
            c.tau_minus, c.tau_plus, c.u0, c.u1, c.return_ratio, c.kind, c.dynamics
        );
    }
    for f in &report.families {
        println!(
            "  family ({:?}) with {} sampled cones{}",
            f.source,
            f.points.len(),
            if f.has_center() { ", contains centers" } else { "" }
        );
    }
    println!("necessary screen: {:?}", report.necessary_screen);
    println!("periodic orbits: {}", if report.periodic { "yes" } else { "no" });
    for note in &report.notes {
        println!("note: {note}");
    }
}

fn run_analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let system = load_system(&args.system)?;
    let cfg = SolverConfig {
        grid: args.grid,
        residual_tol: args.residual_tol,
        center_tol: args.center_tol,
        degeneracy_tol: args.degeneracy_tol,
        ..SolverConfig::default()
    };
    let report = analyze(&system, &cfg)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = &args.out {
        fs::write(path, &json).map_err(|e| io_failure(path, e))?;
    }
    if args.json {
        println!("{json}");
    } else {
        print_summary(&report);
    }
    Ok(())
}

fn run_synthesize(args: &SynthesizeArgs) -> Result<(), Failure> {
    let out: SynthesisOutput = if args.c == 0.0 {
        match (args.alpha_plus, args.beta_plus, args.beta_minus, args.lambda) {
            (Some(alpha_plus), Some(beta_plus), Some(beta_minus), Some(lambda)) => {
                synthesize_balanced(&BalancedInput { alpha_plus, beta_plus, beta_minus, lambda })?
            }
            _ => return Err(Error::ZeroOffset.into()),
        }
    } else {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Failure::Model(Error::OmegaTildeViolation(format!("--{name} is required when c != 0"))))
        };
        synthesize(&SynthesisInput {
            gamma: need(args.gamma, "gamma")?,
            k: args.k,
            c: args.c,
            tau_minus: need(args.tau_minus, "tau-minus")?,
            tau_plus: need(args.tau_plus, "tau-plus")?,
        })?
    };
    for (name, e) in [("-", &out.eigen_minus), ("+", &out.eigen_plus)] {
        println!(
            "lambda{name} = {:.10}  alpha{name} +- beta{name} j = {:.10} +- {:.10} j",
            e.lambda(),
            e.alpha(),
            e.beta()
        );
    }
    print_matrix("A-", &out.system.minus.matrix);
    print_matrix("A+", &out.system.plus.matrix);
    if let Some(path) = &args.out {
        fs::write(path, system_to_json(&out.system)).map_err(|e| io_failure(path, e))?;
    }
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let system = load_system(&args.system)?;
    let cfg = TraceConfig { samples_per_dwell: args.samples_per_dwell, closure_tol: args.closure_tol };
    let trace = trace_orbit(&system, &args.x0, args.crossings, args.t_max, &cfg)?;
    let file = fs::File::create(&args.out).map_err(|e| io_failure(&args.out, e))?;
    write_trace_csv(&trace, std::io::BufWriter::new(file)).map_err(|e| io_failure(&args.out, e))?;
    let summary = TraceSummary::from(&trace);
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Synthesize(a) => run_synthesize(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Phi { gamma, tau } => {
            println!("{:.17e}", phi(*gamma, *tau));
            Ok(())
        }
        Command::TauHat { gamma } => {
            println!("{:.17e}", tau_hat(*gamma).tau_hat);
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
