use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use qcx::distortion::{chichra_sum, distortion_check, extremal_distortion_map, BoundReport, CLOSED_FORM_TOL};
use qcx::job::{bounds_csv, emit_report, load_config, run_job_until, write_outputs, JobStatus, Overrides, ReportFormat, Stage};
use qcx::neumann::PoleParam;
use qcx::verify::verify_all;
use qcx::Error;

const CONFIG_ERROR: u8 = 2;

/// Numerical toolkit for quasiconformal meromorphic maps of the disk.
#[derive(Parser)]
#[command(name = "qcx", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Beltrami equation and report the Neumann series.
    Solve(JobArgs),
    /// Solve and extract Laurent coefficients.
    Coeffs(JobArgs),
    /// Run the full bound suite.
    Bounds(JobArgs),
    /// Check the closed-form extremal distortion map.
    Extremal(ExtremalArgs),
    /// Run the quick self-check suite.
    VerifyAll(VerifyArgs),
}

#[derive(Args)]
struct JobArgs {
    /// JSON job configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Directory for report.json, coeffs.json and fields/*.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every field to <out>/fields.
    #[arg(long)]
    dump: bool,
    /// Report format printed to stdout: json or csv.
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct ExtremalArgs {
    #[arg(long)]
    p: f64,
    /// Real part of the equality point.
    #[arg(long, allow_hyphen_values = true)]
    z0_re: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    z0_im: f64,
    #[arg(long, default_value_t = 64)]
    n_max: usize,
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, env = "QCX_GRID_N", default_value_t = 128)]
    grid_n: usize,
    #[arg(long, default_value = "json")]
    format: String,
}

fn print_reports(reports: &[BoundReport], format: ReportFormat) -> qcx::Result<()> {
    let text = match format {
        ReportFormat::Json => serde_json::to_string_pretty(reports)? + "\n",
        ReportFormat::Csv => bounds_csv(reports)?,
    };
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn run_job_command(args: &JobArgs, stage: Stage) -> Result<JobStatus, Error> {
    let format: ReportFormat = args.format.parse()?;
    let overrides = Overrides {
        p: args.p,
        k: args.k,
        grid_n: args.grid_n,
        tol: args.tol,
    };
    let cfg = load_config(&args.config, &overrides)?;
    let result = run_job_until(&cfg, stage)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = &args.out {
        write_outputs(&cfg, &result, dir, args.dump)?;
    }
    std::io::stdout().write_all(emit_report(&result, format)?.as_bytes())?;
    for b in result.bounds.iter().filter(|b| !b.pass) {
        eprintln!("FAIL {}: lhs {:e} > rhs {:e}", b.name, b.lhs, b.rhs);
    }
    Ok(result.status())
}

fn run_extremal(args: &ExtremalArgs) -> Result<JobStatus, Error> {
    let format: ReportFormat = args.format.parse()?;
    let p = PoleParam::new(args.p)?;
    let z0 = Complex64::new(args.z0_re, args.z0_im);
    let map = extremal_distortion_map(z0, p, Complex64::new(0.0, 0.0))?;
    let reports = vec![
        distortion_check(map.derivative(z0)?, z0, p, CLOSED_FORM_TOL)?,
        chichra_sum(&map.laurent(args.n_max)),
    ];
    print_reports(&reports, format)?;
    Ok(status_of(&reports))
}

fn run_verify(args: &VerifyArgs) -> Result<JobStatus, Error> {
    let format: ReportFormat = args.format.parse()?;
    let reports = verify_all(args.grid_n)?;
    for r in &reports {
        eprintln!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.name);
    }
    print_reports(&reports, format)?;
    Ok(status_of(&reports))
}

fn status_of(reports: &[BoundReport]) -> JobStatus {
    if reports.iter().all(|r| r.pass) {
        JobStatus::AllPass
    } else {
        JobStatus::BoundFailed
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => run_job_command(a, Stage::Solve),
        Command::Coeffs(a) => run_job_command(a, Stage::Coefficients),
        Command::Bounds(a) => run_job_command(a, Stage::Bounds),
        Command::Extremal(a) => run_extremal(a),
        Command::VerifyAll(a) => run_verify(a),
    };
    match outcome {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e.root() {
                Error::NonContractive(_) | Error::MaxTermsExceeded { .. } => 3,
                _ => CONFIG_ERROR,
            };
            ExitCode::from(code)
        }
    }
}
