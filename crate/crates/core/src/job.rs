//! Configuration-driven pipeline: build `μ`, solve, extract coefficients and
//! run the bound suite.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::coeffs::{
    coeff_bound, coeff_from_map, extremal_dilatation_for_coeff, LaurentCoefficients,
};
use crate::distortion::{
    chichra_sum_with_tolerance, distortion_bound_qc, distortion_check, sample_points, BoundReport,
    QUADRATURE_TOL,
};
use crate::error::{Error, Result};
use crate::grid::{build_grid, DiskGrid, GridFunction};
use crate::neumann::{
    solve_beltrami, DilatationField, NeumannSolution, PoleParam, SolutionSummary, SolverOptions,
};
use crate::reconstruct::{
    budget_c, deviation_bound, first_order_map, pointwise_extremal_dilatation, tune_theta,
    HolderRegion, ReconstructedMap, ThetaSearch,
};
use crate::transforms::{operator_norm_bound, TransformConfig, Method};

/// Environment variable overriding the default grid size.
pub const GRID_ENV: &str = "QCX_GRID_N";

/// Slack added to coefficient bounds checked on discrete data.
pub const COEFF_SLACK: f64 = 2e-3;
/// Slack for the first-order budget and the deviation bound.
pub const QUADRATURE_SLACK: f64 = 5e-3;
/// Slack for the distortion bound with numerically obtained `f′`.
pub const DISTORTION_SLACK: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MuSpec {
    /// `μ ≡ k`.
    Constant,
    /// `μ ≡ 0`.
    Zero,
    /// Smooth random field with `‖μ‖_∞ = k`.
    Random { seed: u64 },
    /// Extremal dilatation for the `n`-th coefficient.
    CoeffExtremal { n: usize },
    /// Pointwise extremal dilatation at the `ψ`-plane point `z`; `theta`
    /// defaults to the phase maximising the deviation there.
    PointwiseExtremal {
        z: [f64; 2],
        #[serde(default)]
        theta: Option<f64>,
    },
    /// CSV dump `x,y,re,im` on the job's grid.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Report,
    Coeffs,
    FieldDump,
}

fn default_q() -> f64 {
    2.0
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_terms() -> usize {
    64
}
fn default_contour_r() -> f64 {
    2.0
}
fn default_n_max() -> usize {
    8
}
fn default_outputs() -> Vec<Output> {
    vec![Output::Report, Output::Coeffs]
}
fn default_pad() -> usize {
    2
}
fn default_samples() -> usize {
    25
}
fn default_sample_radius() -> f64 {
    0.7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub p: f64,
    pub k: f64,
    pub mu_spec: MuSpec,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_q")]
    pub q: f64,
    /// `A_q`, required when `q > 2`.
    #[serde(default)]
    pub a_q: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Output>,
    #[serde(rename = "contour_R", default = "default_contour_r")]
    pub contour_r: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// `k₀` of the first-order budget; defaults to `0.5` for `k < 0.5` and
    /// `(1+k)/2` otherwise.
    #[serde(default)]
    pub k0: Option<f64>,
    #[serde(default = "default_pad")]
    pub pad_factor: usize,
    /// Number of interior sample points for the pointwise bounds.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_sample_radius")]
    pub sample_radius: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_grid_n() -> usize {
    256
}

impl JobConfig {
    pub fn pole(&self) -> PoleParam {
        PoleParam::new(self.p).expect("validated")
    }

    pub fn k0(&self) -> f64 {
        self.k0
            .unwrap_or(if self.k < 0.5 { 0.5 } else { 0.5 * (1.0 + self.k) })
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            q: self.q,
            tol: self.tol,
            max_terms: self.max_terms,
            a_q: self.a_q,
            transform: TransformConfig::new(self.pad_factor, Method::Fast).expect("validated"),
        }
    }

    fn validate(&mut self, base: &Path) -> Result<()> {
        let fail = |path: &str, message: String| Error::Config {
            path: path.into(),
            message,
        };
        if !(0.0..1.0).contains(&self.p) {
            return Err(fail("p", Error::InvalidPole(self.p).to_string()));
        }
        if !(0.0..1.0).contains(&self.k) {
            return Err(fail("k", Error::InvalidDilatationBound(self.k).to_string()));
        }
        if self.grid_n < 8 || !self.grid_n.is_multiple_of(2) {
            return Err(fail("grid_n", Error::InvalidGridSize(self.grid_n).to_string()));
        }
        if !(self.contour_r > 1.0) {
            return Err(fail("contour_R", format!("contour_R must exceed 1 (got {})", self.contour_r)));
        }
        if !(self.q >= 2.0) || !self.q.is_finite() {
            return Err(fail("q", format!("q must satisfy 2 ≤ q < ∞ (got {})", self.q)));
        }
        if self.q > 2.0 {
            operator_norm_bound(self.q, self.a_q).map_err(|e| fail("a_q", e.to_string()))?;
        }
        if !(self.tol > 0.0) {
            return Err(fail("tol", format!("tol must be positive (got {})", self.tol)));
        }
        if self.max_terms == 0 {
            return Err(fail("max_terms", "max_terms must be at least 1".into()));
        }
        if self.n_max == 0 {
            return Err(fail("n_max", "n_max must be at least 1".into()));
        }
        if self.pad_factor < 2 {
            return Err(fail("pad_factor", Error::InvalidPadFactor(self.pad_factor).to_string()));
        }
        let k0 = self.k0();
        if !(self.k < k0 && k0 < 1.0) {
            return Err(fail("k0", format!("k0 must satisfy k < k0 < 1 (got {k0})")));
        }
        if self.samples == 0 {
            return Err(fail("samples", "samples must be at least 1".into()));
        }
        if !(self.sample_radius > 0.0 && self.sample_radius <= 0.99) {
            return Err(fail(
                "sample_radius",
                format!("sample_radius must lie in (0, 0.99] (got {})", self.sample_radius),
            ));
        }
        match &mut self.mu_spec {
            MuSpec::CoeffExtremal { n: 0 } => {
                return Err(fail("mu_spec.coeff_extremal.n", "n must be at least 1".into()));
            }
            MuSpec::File(path) => {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
                let grid = build_grid(self.grid_n)?;
                load_mu_file(&grid, path, self.k).map_err(|e| fail("mu_spec.file", e.to_string()))?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// Command-line overrides applied on top of the configuration document.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub p: Option<f64>,
    pub k: Option<f64>,
    pub grid_n: Option<usize>,
    pub tol: Option<f64>,
}

/// Parse and validate a configuration document. Relative `file` paths are
/// resolved against the working directory.
pub fn parse_config(text: &str) -> Result<JobConfig> {
    parse_config_with(text, &Overrides::default(), Path::new("."))
}

/// Read a configuration file; relative paths inside it are resolved against
/// its directory.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<JobConfig> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_with(&text, overrides, base)
}

pub fn parse_config_with(text: &str, overrides: &Overrides, base: &Path) -> Result<JobConfig> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| Error::Config {
        path: ".".into(),
        message: e.to_string(),
    })?;
    let obj = value.as_object_mut().ok_or_else(|| Error::Config {
        path: ".".into(),
        message: "configuration must be a JSON object".into(),
    })?;
    if !obj.contains_key("grid_n") {
        if let Ok(raw) = std::env::var(GRID_ENV) {
            let n: usize = raw.trim().parse().map_err(|_| Error::Config {
                path: "grid_n".into(),
                message: format!("{GRID_ENV} must be an integer (got `{raw}`)"),
            })?;
            obj.insert("grid_n".into(), n.into());
        }
    }
    if let Some(p) = overrides.p {
        obj.insert("p".into(), p.into());
    }
    if let Some(k) = overrides.k {
        obj.insert("k".into(), k.into());
    }
    if let Some(n) = overrides.grid_n {
        obj.insert("grid_n".into(), n.into());
    }
    if let Some(t) = overrides.tol {
        obj.insert("tol".into(), t.into());
    }
    let mut cfg: JobConfig = serde_path_to_error::deserialize(value).map_err(|e| Error::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    cfg.validate(base)?;
    Ok(cfg)
}

fn load_mu_file(grid: &Arc<DiskGrid>, path: &Path, k: f64) -> Result<DilatationField> {
    let file = fs::File::open(path)?;
    let mu = GridFunction::read_csv(grid, file)?;
    DilatationField::new(mu, k)
}

/// Build the dilatation described by the configuration.
pub fn build_mu(cfg: &JobConfig, grid: &Arc<DiskGrid>) -> Result<DilatationField> {
    let p = cfg.pole();
    match &cfg.mu_spec {
        MuSpec::Constant => DilatationField::constant(grid, Complex64::new(cfg.k, 0.0)),
        MuSpec::Zero => Ok(DilatationField::zero(grid)),
        MuSpec::Random { seed } => DilatationField::smooth_random(grid, cfg.k, *seed),
        MuSpec::CoeffExtremal { n } => extremal_dilatation_for_coeff(grid, *n, p, cfg.k),
        MuSpec::PointwiseExtremal { z, theta } => {
            pointwise_extremal_dilatation(grid, Complex64::new(z[0], z[1]), p, cfg.k, theta.unwrap_or(0.0))
        }
        MuSpec::File(path) => load_mu_file(grid, path, cfg.k),
    }
}

/// How far the pipeline runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Solve,
    Coefficients,
    Bounds,
}

#[derive(Debug, Clone)]
pub struct JobResult {
    pub solution: SolutionSummary,
    pub coefficients: Option<LaurentCoefficients>,
    pub bounds: Vec<BoundReport>,
    pub warnings: Vec<String>,
    pub theta: Option<ThetaSearch>,
    pub mu: DilatationField,
    pub neumann: NeumannSolution,
}

/// Process exit status of a job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobStatus {
    AllPass,
    BoundFailed,
    NotConverged,
}

impl JobStatus {
    pub fn code(self) -> i32 {
        match self {
            JobStatus::AllPass => 0,
            JobStatus::BoundFailed => 1,
            JobStatus::NotConverged => 3,
        }
    }
}

impl JobResult {
    pub fn all_pass(&self) -> bool {
        self.bounds.iter().all(|b| b.pass)
    }

    pub fn status(&self) -> JobStatus {
        if !self.solution.converged {
            JobStatus::NotConverged
        } else if !self.all_pass() {
            JobStatus::BoundFailed
        } else {
            JobStatus::AllPass
        }
    }

    /// Field dumps as `(file name, field)` pairs: `mu`, `omega` and every
    /// Neumann term.
    pub fn fields(&self) -> Vec<(String, &GridFunction)> {
        let mut out = vec![
            ("mu.csv".to_string(), self.mu.mu()),
            ("omega.csv".to_string(), &self.neumann.omega),
        ];
        for (i, t) in self.neumann.terms.iter().enumerate() {
            out.push((format!("phi_{:02}.csv", i + 1), t));
        }
        out
    }
}

pub fn run_job(cfg: &JobConfig) -> Result<JobResult> {
    run_job_until(cfg, Stage::Bounds)
}

pub fn run_job_until(cfg: &JobConfig, stage: Stage) -> Result<JobResult> {
    let grid = build_grid(cfg.grid_n).map_err(|e| e.in_stage("grid"))?;
    let p = cfg.pole();
    let mut mu = build_mu(cfg, &grid).map_err(|e| e.in_stage("dilatation"))?;
    let mut warnings = Vec::new();
    let opts = cfg.solver_options();

    let solve = |mu: &DilatationField, warnings: &mut Vec<String>| -> Result<NeumannSolution> {
        match solve_beltrami(mu, p, &opts) {
            Ok(sol) => Ok(sol),
            Err(Error::MaxTermsExceeded { max_terms, last_norm, partial }) => {
                warnings.push(format!(
                    "slow convergence: {max_terms} terms computed, last term norm {last_norm:e} > tol {}",
                    cfg.tol
                ));
                Ok(*partial)
            }
            Err(e) => Err(e),
        }
    };

    let mut theta = None;
    if let MuSpec::PointwiseExtremal { z, theta: None } = cfg.mu_spec {
        let z = Complex64::new(z[0], z[1]);
        let base = solve(&mu, &mut Vec::new()).map_err(|e| e.in_stage("solve"))?;
        let search = tune_theta(&base, z);
        mu = pointwise_extremal_dilatation(&grid, z, p, cfg.k, search.theta)
            .map_err(|e| e.in_stage("dilatation"))?;
        theta = Some(search);
    }
    let neumann = solve(&mu, &mut warnings).map_err(|e| e.in_stage("solve"))?;
    if !neumann.converged && warnings.is_empty() {
        warnings.push(format!(
            "residual {:e} exceeds 10·tol = {:e}",
            neumann.residual,
            10.0 * cfg.tol
        ));
    }

    let mut result = JobResult {
        solution: neumann.summary(),
        coefficients: None,
        bounds: Vec::new(),
        warnings,
        theta,
        mu,
        neumann,
    };
    if stage >= Stage::Coefficients {
        let map = ReconstructedMap::new(&result.neumann);
        let coeffs = coeff_from_map(&map, cfg.contour_r, cfg.n_max).map_err(|e| e.in_stage("coefficients"))?;
        result.coefficients = Some(coeffs);
    }
    if stage >= Stage::Bounds {
        result.bounds = bound_suite(cfg, &result).map_err(|e| e.in_stage("bounds"))?;
    }
    Ok(result)
}

fn worst(name: String, rows: Vec<(Complex64, f64, f64)>, tolerance: f64, slack: f64) -> BoundReport {
    let (z, lhs, rhs) = rows
        .into_iter()
        .min_by(|a, b| (a.2 - a.1).total_cmp(&(b.2 - b.1)))
        .expect("nonempty sample set");
    BoundReport::with_slack(name, lhs, rhs, tolerance, slack, z)
}

fn bound_suite(cfg: &JobConfig, result: &JobResult) -> Result<Vec<BoundReport>> {
    let p = cfg.pole();
    let k = cfg.k;
    let map = ReconstructedMap::new(&result.neumann);
    let coeffs = result.coefficients.as_ref().expect("coefficients computed");
    let mut out = Vec::new();

    for n in 1..=cfg.n_max {
        let bound = coeff_bound(n, p, k)?;
        out.push(BoundReport::with_slack(
            format!("coeff_bound[{n}]"),
            coeffs.get(n).norm(),
            bound,
            QUADRATURE_TOL,
            COEFF_SLACK,
            Complex64::new(n as f64, 0.0),
        ));
    }
    out.push(chichra_sum_with_tolerance(coeffs, QUADRATURE_TOL));

    let samples: Vec<Complex64> = sample_points(cfg.samples, cfg.sample_radius, cfg.seed)
        .into_iter()
        .filter(|z| z.norm() > 1e-9 && (z - p.get()).norm() > 1e-9)
        .collect();
    if samples.is_empty() {
        return Ok(out);
    }
    let tag = |name: &str| format!("{name}[{} samples]", samples.len());
    let hq = operator_norm_bound(cfg.q, cfg.a_q)?;
    let c = budget_c(p, cfg.q, cfg.k0(), hq, HolderRegion::interior(cfg.sample_radius)?)?;
    let grid = result.mu.grid();

    let mut distortion = Vec::new();
    let mut qc = Vec::new();
    let mut deviation = Vec::new();
    let mut first_order = Vec::new();
    for &z in &samples {
        let fp = map.f_derivative(z)?;
        let d = distortion_check(fp, z, p, QUADRATURE_TOL)?;
        distortion.push((z, d.lhs, d.rhs));
        qc.push((z, d.lhs, distortion_bound_qc(z, p, k)?));
        let f = map.f(z)?;
        let principal = 1.0 / (z - p.get());
        deviation.push((z, (f - principal).norm(), deviation_bound(grid, k, p, z, c)?));
        let fo = first_order_map(&result.mu, p, z)?;
        first_order.push((z, (f - fo).norm(), c * k * k));
    }
    out.push(worst(tag("distortion"), distortion, QUADRATURE_TOL, 0.0));
    out.push(worst(tag("qc_distortion"), qc, QUADRATURE_TOL, DISTORTION_SLACK));
    out.push(worst(tag("deviation"), deviation, QUADRATURE_TOL, QUADRATURE_SLACK));
    out.push(worst(tag("first_order_budget"), first_order, QUADRATURE_TOL, QUADRATURE_SLACK));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::invalid(format!(
                "unsupported format `{other}` (expected json or csv)"
            ))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        })
    }
}

#[derive(Serialize)]
struct SolutionSection<'a> {
    #[serde(flatten)]
    summary: &'a SolutionSummary,
    theta: Option<&'a ThetaSearch>,
    warnings: &'a [String],
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    solution: SolutionSection<'a>,
    coefficients: Option<&'a LaurentCoefficients>,
    bounds: &'a [BoundReport],
}

/// Render the report. JSON carries `solution`, `coefficients` and `bounds`;
/// CSV has one row per bound.
pub fn emit_report(result: &JobResult, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let doc = ReportDocument {
                solution: SolutionSection {
                    summary: &result.solution,
                    theta: result.theta.as_ref(),
                    warnings: &result.warnings,
                },
                coefficients: result.coefficients.as_ref(),
                bounds: &result.bounds,
            };
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => bounds_csv(&result.bounds),
    }
}

pub fn bounds_csv(bounds: &[BoundReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "lhs", "rhs", "margin", "equality"])?;
    for b in bounds {
        w.serialize((&b.name, b.lhs, b.rhs, b.margin, b.equality))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Write the requested outputs into `dir`: `report.json`, `coeffs.json` and
/// `fields/*.csv`.
pub fn write_outputs(cfg: &JobConfig, result: &JobResult, dir: &Path, dump: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if cfg.outputs.contains(&Output::Report) {
        let path = dir.join("report.json");
        fs::write(&path, emit_report(result, ReportFormat::Json)?)?;
        written.push(path);
    }
    if let (true, Some(coeffs)) = (cfg.outputs.contains(&Output::Coeffs), &result.coefficients) {
        let path = dir.join("coeffs.json");
        fs::write(&path, serde_json::to_string_pretty(coeffs)? + "\n")?;
        written.push(path);
    }
    if dump || cfg.outputs.contains(&Output::FieldDump) {
        let fields = dir.join("fields");
        fs::create_dir_all(&fields)?;
        for (name, f) in result.fields() {
            let path = fields.join(name);
            f.write_csv(fs::File::create(&path)?)?;
            written.push(path);
        }
    }
    Ok(written)
}
