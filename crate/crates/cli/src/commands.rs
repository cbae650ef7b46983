use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use qpin_core::characterize::{
    gamma_mixture_gap, gamma_mixture_gap_by_quadrature, gaussian_mixture_quantile_gap,
    gaussian_mixture_quantile_gap_by_quadrature, log_convexity, transform_root_scan, LogConvexity,
};
use qpin_core::deny::{DEGENERATE_EXPONENT, ITERATION_WINDOW};
use qpin_core::nef::{scan_pin_residuals, ScanFailure};
use qpin_core::specfun::{m_star, p_star, std_normal_cdf, std_normal_quantile};
use qpin_core::{
    parse_table, AdditiveKernel, Alpha, BaseMeasure, DenyOperator, Error, Grid, GridFunction,
    IterateOptions, Kernel, MultiplicativeKernel, Pin, Projection, RootScan, Support,
};

use crate::output::{num, to_csv, to_json, Format};

/// A finished report and whether it met its tolerance.
pub struct Run {
    pub bytes: Vec<u8>,
    pub within_tolerance: bool,
    /// Set when parts of the computation failed but a partial report exists.
    pub numeric_failure: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::NumericFailure { .. }) => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Input(msg) => f.write_str(msg),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult = Result<Run, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn render<T: Serialize>(format: Format, report: &T, csv: impl FnOnce() -> Vec<u8>) -> Vec<u8> {
    match format {
        Format::Json => to_json(report),
        Format::Csv => csv(),
    }
}

// ---------------------------------------------------------------- pstar / mstar

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct PstarArgs {
    /// Quantile level in (0, 1).
    #[arg(long)]
    alpha: Alpha,
    /// Pinned point of the scale family.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
}

#[derive(Serialize)]
struct PstarReport {
    command: &'static str,
    alpha: f64,
    a: f64,
    p_star: f64,
    residual: f64,
    bracket: [f64; 2],
    iterations: usize,
}

impl PstarArgs {
    pub fn run(&self, format: Format) -> CliResult {
        let ps = p_star(self.alpha, self.a)?;
        let report = PstarReport {
            command: "pstar",
            alpha: self.alpha.value(),
            a: self.a,
            p_star: ps.value,
            residual: ps.residual,
            bracket: ps.bracket,
            iterations: ps.iterations,
        };
        let bytes = render(format, &report, || {
            to_csv(
                &[
                    "alpha",
                    "a",
                    "p_star",
                    "residual",
                    "bracket_lo",
                    "bracket_hi",
                    "iterations",
                ],
                &[vec![
                    num(report.alpha),
                    num(report.a),
                    num(report.p_star),
                    num(report.residual),
                    num(report.bracket[0]),
                    num(report.bracket[1]),
                    report.iterations.to_string(),
                ]],
                &[],
            )
        });
        Ok(Run {
            bytes,
            within_tolerance: true,
            numeric_failure: None,
        })
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct MstarArgs {
    /// Quantile level in (0, 1).
    #[arg(long)]
    alpha: Alpha,
    /// Pinned offset of the location family.
    #[arg(long, default_value_t = 0.0)]
    b: f64,
}

#[derive(Serialize)]
struct MstarReport {
    command: &'static str,
    alpha: f64,
    b: f64,
    m_star: f64,
    quantile: f64,
    /// |Φ(b - m*) - alpha|.
    residual: f64,
}

impl MstarArgs {
    pub fn run(&self, format: Format) -> CliResult {
        if !self.b.is_finite() {
            return Err(usage(format!("--b must be finite, got {}", self.b)));
        }
        let m = m_star(self.alpha, self.b);
        let report = MstarReport {
            command: "mstar",
            alpha: self.alpha.value(),
            b: self.b,
            m_star: m,
            quantile: std_normal_quantile(self.alpha),
            residual: (std_normal_cdf(self.b - m)? - self.alpha.value()).abs(),
        };
        let bytes = render(format, &report, || {
            to_csv(
                &["alpha", "b", "m_star", "quantile", "residual"],
                &[vec![
                    num(report.alpha),
                    num(report.b),
                    num(report.m_star),
                    num(report.quantile),
                    num(report.residual),
                ]],
                &[],
            )
        });
        Ok(Run {
            bytes,
            within_tolerance: true,
            numeric_failure: None,
        })
    }
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Location,
    Scale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseSource {
    /// Gaussian N(m*, 1) or gamma weight with shape p*.
    Builtin,
    /// The builtin base with m* or p* shifted by --perturb.
    Perturbed,
    /// A two-column density table.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    kind: Family,
    /// Quantile level in (0, 1).
    #[arg(long)]
    alpha: Alpha,
    /// Pinned offset (location family).
    #[arg(long, default_value_t = 0.0)]
    b: f64,
    /// Pinned point (scale family).
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// First tilt; defaults to -5 (location) or 0.1 (scale).
    #[arg(long)]
    t_min: Option<f64>,
    /// Last tilt; defaults to 5 (location) or 10 (scale).
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of tilts.
    #[arg(long, default_value_t = 41)]
    t_count: usize,
    /// Tilt spacing; defaults to linear (location) or log (scale).
    #[arg(long, value_enum)]
    t_spacing: Option<Spacing>,
    #[arg(long, value_enum, default_value_t = BaseSource::Builtin)]
    base: BaseSource,
    /// Shift applied to m* or p* by `--base perturbed`.
    #[arg(long, default_value_t = 0.2)]
    perturb: f64,
    /// Density table used by `--base file`.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Exit 1 if any |residual| exceeds this.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    command: &'static str,
    kind: Family,
    alpha: f64,
    /// b (location) or a (scale).
    pinned: f64,
    base: BaseSource,
    /// m or p of an analytic base; null for a table.
    base_parameter: Option<f64>,
    tol: f64,
    max_abs: f64,
    within_tol: bool,
    t: Vec<f64>,
    residuals: Vec<f64>,
    failures: Vec<ScanFailure>,
}

fn tilt_grid(lo: f64, hi: f64, count: usize, spacing: Spacing) -> Result<Vec<f64>, CliError> {
    if !(lo.is_finite() && hi.is_finite()) || count == 0 || (count > 1 && !(lo < hi)) {
        return Err(usage(format!(
            "invalid tilt grid [{lo}, {hi}] with {count} points"
        )));
    }
    if spacing == Spacing::Log && !(lo > 0.0) {
        return Err(usage("log-spaced tilts need --t-min > 0"));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let last = (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            let s = i as f64 / last;
            if i == count - 1 {
                hi
            } else {
                match spacing {
                    Spacing::Linear => lo + (hi - lo) * s,
                    Spacing::Log => (lo.ln() + (hi.ln() - lo.ln()) * s).exp(),
                }
            }
        })
        .collect())
}

impl VerifyArgs {
    pub fn run(&self, format: Format) -> CliResult {
        if !(self.tol >= 0.0) {
            return Err(usage("--tol must be nonnegative"));
        }
        let (support, pin, pinned) = match self.kind {
            Family::Location => (Support::Line, Pin::Location { b: self.b }, self.b),
            Family::Scale => (Support::HalfLine, Pin::Scale { a: self.a }, self.a),
        };
        let (default_lo, default_hi, default_spacing) = match self.kind {
            Family::Location => (-5.0, 5.0, Spacing::Linear),
            Family::Scale => (0.1, 10.0, Spacing::Log),
        };
        let ts = tilt_grid(
            self.t_min.unwrap_or(default_lo),
            self.t_max.unwrap_or(default_hi),
            self.t_count,
            self.t_spacing.unwrap_or(default_spacing),
        )?;
        let shift = match self.base {
            BaseSource::Perturbed => self.perturb,
            _ => 0.0,
        };
        let (base, parameter) = match (self.base, self.kind) {
            (BaseSource::File, _) => {
                let path = self
                    .file
                    .as_ref()
                    .ok_or_else(|| usage("--base file needs --file"))?;
                let table = parse_table(&read_file(path)?)?;
                (BaseMeasure::from_table(&table, support)?, None)
            }
            (_, Family::Location) => {
                let m = m_star(self.alpha, self.b) + shift;
                (BaseMeasure::gaussian(m)?, Some(m))
            }
            (_, Family::Scale) => {
                let p = p_star(self.alpha, self.a)?.value + shift;
                (BaseMeasure::gamma(p)?, Some(p))
            }
        };
        let scan = scan_pin_residuals(&base, self.alpha, pin, &ts)?;
        let within_tol = scan.failures.is_empty() && scan.max_abs <= self.tol;
        let report = VerifyReport {
            command: "verify",
            kind: self.kind,
            alpha: self.alpha.value(),
            pinned,
            base: self.base,
            base_parameter: parameter,
            tol: self.tol,
            max_abs: scan.max_abs,
            within_tol,
            t: scan.parameters,
            residuals: scan.residuals,
            failures: scan.failures,
        };
        let bytes = render(format, &report, || {
            let rows: Vec<Vec<String>> = report
                .t
                .iter()
                .zip(&report.residuals)
                .map(|(t, r)| vec![num(*t), num(*r)])
                .collect();
            let mut comments = vec![format!("max_abs {}", num(report.max_abs))];
            comments.extend(
                report
                    .failures
                    .iter()
                    .map(|f| format!("failure t={} {}", num(f.t), f.message)),
            );
            to_csv(&["t", "residual"], &rows, &comments)
        });
        let numeric_failure = report.failures.first().map(|first| {
            format!(
                "{} of {} tilts could not be evaluated; first: {}",
                report.failures.len(),
                report.t.len(),
                first.message
            )
        });
        Ok(Run {
            bytes,
            within_tolerance: within_tol,
            numeric_failure,
        })
    }
}

// ---------------------------------------------------------------- kernel

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    /// MGF of the location kernel H.
    Mgf,
    /// Mellin transform of the scale kernel K.
    Mellin,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct KernelArgs {
    #[arg(value_enum)]
    kind: TransformKind,
    /// Quantile level in (0, 1).
    #[arg(long)]
    alpha: Alpha,
    /// Scan start; defaults to m-3 (mgf) or -p*+0.1 (mellin).
    #[arg(long)]
    lo: Option<f64>,
    /// Scan end; defaults to m+3 (mgf) or 4 (mellin).
    #[arg(long)]
    hi: Option<f64>,
    /// Points compared against quadrature.
    #[arg(long, default_value_t = 21)]
    steps: usize,
    /// Points of the root and log-convexity scans.
    #[arg(long, default_value_t = 401)]
    scan_points: usize,
    /// Exit 1 if closed form and quadrature differ by more than this.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
}

#[derive(Serialize)]
struct KernelRow {
    x: f64,
    closed_form: f64,
    quadrature: f64,
    diff: f64,
}

#[derive(Serialize)]
struct KernelReport {
    command: &'static str,
    kind: TransformKind,
    alpha: f64,
    /// m (mgf) or p* (mellin).
    parameter: f64,
    range: [f64; 2],
    tol: f64,
    max_abs_diff: f64,
    within_tol: bool,
    rows: Vec<KernelRow>,
    roots: RootScan,
    log_convexity: LogConvexity,
}

impl KernelArgs {
    pub fn run(&self, format: Format) -> CliResult {
        if self.steps < 2 {
            return Err(usage("--steps must be at least 2"));
        }
        let (kernel, parameter, lo, hi) = match self.kind {
            TransformKind::Mgf => {
                let k = AdditiveKernel::new(self.alpha);
                (
                    Kernel::Additive(k),
                    k.m,
                    self.lo.unwrap_or(k.m - 3.0),
                    self.hi.unwrap_or(k.m + 3.0),
                )
            }
            TransformKind::Mellin => {
                let k = MultiplicativeKernel::new(self.alpha)?;
                let p = k.p_star;
                (
                    Kernel::Multiplicative(k),
                    p,
                    self.lo.unwrap_or(-p + 0.1),
                    self.hi.unwrap_or(4.0),
                )
            }
        };
        if !(lo < hi) {
            return Err(usage(format!("scan range [{lo}, {hi}] is empty")));
        }
        let mut rows = Vec::with_capacity(self.steps);
        let mut max_abs_diff = 0.0f64;
        for i in 0..self.steps {
            let x = if i == self.steps - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (self.steps - 1) as f64
            };
            let closed_form = kernel.transform(x)?;
            let quadrature = kernel.transform_by_quadrature(x)?;
            let diff = closed_form - quadrature;
            max_abs_diff = max_abs_diff.max(diff.abs());
            rows.push(KernelRow {
                x,
                closed_form,
                quadrature,
                diff,
            });
        }
        let roots = transform_root_scan(&kernel, lo, hi, self.scan_points)?;
        let convexity = log_convexity(&kernel, lo, hi, self.scan_points)?;
        let within_tol = max_abs_diff <= self.tol;
        let report = KernelReport {
            command: "kernel",
            kind: self.kind,
            alpha: self.alpha.value(),
            parameter,
            range: [lo, hi],
            tol: self.tol,
            max_abs_diff,
            within_tol,
            rows,
            roots,
            log_convexity: convexity,
        };
        let bytes = render(format, &report, || {
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| vec![num(r.x), num(r.closed_form), num(r.quadrature), num(r.diff)])
                .collect();
            let mut comments: Vec<String> = report
                .roots
                .roots
                .iter()
                .map(|r| format!("root {} tangent={}", num(r.value), r.tangent))
                .collect();
            comments.push(format!(
                "expected {}",
                report
                    .roots
                    .expected
                    .iter()
                    .map(|v| num(*v))
                    .collect::<Vec<_>>()
                    .join(" ")
            ));
            comments.push(format!(
                "complete={} matches_expected={}",
                report.roots.complete, report.roots.matches_expected
            ));
            comments.push(format!("max_abs_diff {}", num(report.max_abs_diff)));
            comments.push(format!(
                "log_convexity_min_second_difference {}",
                num(report.log_convexity.min_second_difference)
            ));
            to_csv(
                &["s_or_u", "closed_form", "quadrature", "diff"],
                &rows,
                &comments,
            )
        });
        Ok(Run {
            bytes,
            within_tolerance: within_tol,
            numeric_failure: None,
        })
    }
}

// ---------------------------------------------------------------- deny

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// 1 (additive) or t⁻¹ (multiplicative).
    Const,
    /// e^{-mx}; additive only.
    Exp,
    /// t^{p*-2}; multiplicative only.
    Power,
    /// Sum of both fixed points.
    Mixture,
    /// Two-column table on the operator grid.
    File,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct DenyArgs {
    #[arg(value_enum)]
    kind: OperatorKind,
    /// Quantile level in (0, 1).
    #[arg(long)]
    alpha: Alpha,
    #[arg(long, value_enum, default_value_t = Init::Const)]
    init: Init,
    /// Starting function for `--init file`; its grid replaces the grid flags.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Applications of the operator.
    #[arg(long, default_value_t = 50)]
    iters: usize,
    /// Grid start; defaults to -120 (additive) or -150 (multiplicative, in log t).
    #[arg(long)]
    grid_lo: Option<f64>,
    /// Grid end; defaults to 120 (additive) or 200 (multiplicative).
    #[arg(long)]
    grid_hi: Option<f64>,
    /// Grid points; defaults to 12001 (additive) or 14001 (multiplicative).
    #[arg(long)]
    grid_n: Option<usize>,
    /// Start of the window where residuals are measured; defaults to [-10, 10]
    /// on the default grid and to the interior otherwise.
    #[arg(long, requires = "window_hi")]
    window_lo: Option<f64>,
    /// End of the residual window.
    #[arg(long, requires = "window_lo")]
    window_hi: Option<f64>,
    /// Amplitude of a sin perturbation added to the start (times t⁻¹ when multiplicative).
    #[arg(long, default_value_t = 0.0)]
    perturb: f64,
    /// Project onto the first fixed point only (1, or t⁻¹ when multiplicative).
    #[arg(long)]
    collapse: bool,
}

#[derive(Serialize)]
struct IterationRow {
    iteration: usize,
    residual: f64,
    relative_residual: f64,
    orthogonal_residual: f64,
    c0: f64,
    c1: f64,
}

#[derive(Serialize)]
struct DenyReport {
    command: &'static str,
    kind: OperatorKind,
    alpha: f64,
    /// Exponent r of the second fixed point e^{-rv} in the convolution variable.
    root: f64,
    grid: Grid,
    kernel_window: [f64; 2],
    interior_range: [f64; 2],
    evaluation_window: [f64; 2],
    init: Init,
    perturb: f64,
    iterations: Vec<IterationRow>,
    projection: Projection,
}

impl DenyArgs {
    fn start(&self, op: &DenyOperator, kernel: &Kernel) -> Result<GridFunction, CliError> {
        let r = kernel.conv_root();
        let amp = self.perturb;
        let grid = op.grid();
        let f = match (self.kind, self.init) {
            (OperatorKind::Additive, Init::Const) => {
                GridFunction::from_fn(grid, |x| 1.0 + amp * x.sin())
            }
            (OperatorKind::Additive, Init::Exp) => {
                GridFunction::from_fn(grid, |x| (-r * x).exp() + amp * x.sin())
            }
            (OperatorKind::Additive, Init::Mixture) => {
                GridFunction::from_fn(grid, |x| 1.0 + (-r * x).exp() + amp * x.sin())
            }
            // In log t: t⁻¹ = e^{-v}, t^{p*-2} = e^{-(1+r)v} with r = 1 - p*.
            (OperatorKind::Multiplicative, Init::Const) => {
                GridFunction::from_fn(grid, |v| (-v).exp() * (1.0 + amp * v.sin()))
            }
            (OperatorKind::Multiplicative, Init::Power) => GridFunction::from_fn(grid, |v| {
                (-(1.0 + r) * v).exp() + amp * v.sin() * (-v).exp()
            }),
            (OperatorKind::Multiplicative, Init::Mixture) => GridFunction::from_fn(grid, |v| {
                (-v).exp() * (1.0 + (-r * v).exp() + amp * v.sin())
            }),
            (OperatorKind::Additive, Init::Power) => {
                return Err(usage("--init power applies to the multiplicative operator"))
            }
            (OperatorKind::Multiplicative, Init::Exp) => {
                return Err(usage("--init exp applies to the additive operator"))
            }
            (_, Init::File) => unreachable!(),
        };
        Ok(f?)
    }

    pub fn run(&self, format: Format) -> CliResult {
        let kernel = match self.kind {
            OperatorKind::Additive => Kernel::Additive(AdditiveKernel::new(self.alpha)),
            OperatorKind::Multiplicative => {
                Kernel::Multiplicative(MultiplicativeKernel::new(self.alpha)?)
            }
        };
        let file_start = match self.init {
            Init::File => {
                let path = self
                    .file
                    .as_ref()
                    .ok_or_else(|| usage("--init file needs --file"))?;
                Some(GridFunction::from_table(&parse_table(&read_file(path)?)?)?)
            }
            _ => None,
        };
        let grid = match &file_start {
            Some(f) => f.grid,
            None => {
                let std = match self.kind {
                    OperatorKind::Additive => Grid::iteration_additive(),
                    OperatorKind::Multiplicative => Grid::iteration_log(),
                };
                Grid::new(
                    self.grid_lo.unwrap_or(std.lo),
                    self.grid_hi.unwrap_or(std.hi),
                    self.grid_n.unwrap_or(std.n),
                )?
            }
        };
        let r = kernel.conv_root();
        if !self.collapse && r != 0.0 && r.abs() < DEGENERATE_EXPONENT {
            return Err(usage(format!(
                "the two fixed points nearly coincide (exponent {r:e}); pass --collapse to project on one of them"
            )));
        }
        let op = DenyOperator::new(kernel, grid)?;
        let f0 = match file_start {
            Some(f) => f,
            None => self.start(&op, &kernel)?,
        };
        let default_grid = self.init != Init::File
            && self.grid_lo.is_none()
            && self.grid_hi.is_none()
            && self.grid_n.is_none();
        let window = match (self.window_lo, self.window_hi) {
            (Some(a), Some(b)) => Some([a, b]),
            _ if default_grid => Some(ITERATION_WINDOW),
            _ => None,
        };
        let opts = IterateOptions {
            window,
            project: true,
            collapse: self.collapse,
        };
        let rep = op.iterate(&f0, self.iters, &opts)?;
        let projection = op.project(&rep.final_function, window, self.collapse)?;
        let iterations = (0..rep.residuals.len())
            .map(|i| IterationRow {
                iteration: i,
                residual: rep.residuals[i],
                relative_residual: rep.relative_residuals[i],
                orthogonal_residual: rep.orthogonal_residuals[i],
                c0: rep.projections[i][0],
                c1: rep.projections[i][1],
            })
            .collect();
        let report = DenyReport {
            command: "deny",
            kind: self.kind,
            alpha: self.alpha.value(),
            root: kernel.conv_root(),
            grid,
            kernel_window: op.window(),
            interior_range: rep.interior_range,
            evaluation_window: rep.window,
            init: self.init,
            perturb: self.perturb,
            iterations,
            projection,
        };
        let bytes = render(format, &report, || {
            let rows: Vec<Vec<String>> = report
                .iterations
                .iter()
                .map(|r| {
                    vec![
                        r.iteration.to_string(),
                        num(r.residual),
                        num(r.relative_residual),
                        num(r.orthogonal_residual),
                        num(r.c0),
                        num(r.c1),
                    ]
                })
                .collect();
            let p = &report.projection;
            let comments = vec![
                format!(
                    "interior {} {}",
                    num(report.interior_range[0]),
                    num(report.interior_range[1])
                ),
                format!(
                    "window {} {}",
                    num(report.evaluation_window[0]),
                    num(report.evaluation_window[1])
                ),
                format!(
                    "projection c0={} c1={} orthogonal_residual={} collapsed={}",
                    num(p.coefficients[0]),
                    num(p.coefficients[1]),
                    num(p.orthogonal_residual),
                    p.collapsed
                ),
            ];
            to_csv(
                &[
                    "iteration",
                    "residual",
                    "relative_residual",
                    "orthogonal_residual",
                    "c0",
                    "c1",
                ],
                &rows,
                &comments,
            )
        });
        Ok(Run {
            bytes,
            within_tolerance: true,
            numeric_failure: None,
        })
    }
}

// ---------------------------------------------------------------- counterexample

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mixture {
    /// w·N(m,1) + (1-w)·N(0,1).
    Gaussian,
    /// y^{p*-1} + c1.
    Gamma,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct CounterexampleArgs {
    #[arg(value_enum)]
    kind: Mixture,
    /// Quantile level in (0, 1).
    #[arg(long)]
    alpha: Alpha,
    /// Weight of N(m,1) in the Gaussian mixture.
    #[arg(long, default_value_t = 0.5)]
    weight: f64,
    /// Constant added to the power weight.
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    /// Exit 1 if closed form and quadrature differ by more than this.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Serialize)]
struct CounterexampleReport {
    command: &'static str,
    kind: Mixture,
    alpha: f64,
    /// w (gaussian) or c1 (gamma).
    parameter: f64,
    gap: f64,
    numeric: f64,
    diff: f64,
    tol: f64,
    agrees: bool,
}

impl CounterexampleArgs {
    pub fn run(&self, format: Format) -> CliResult {
        let (parameter, gap, numeric) = match self.kind {
            Mixture::Gaussian => (
                self.weight,
                gaussian_mixture_quantile_gap(self.alpha, self.weight)?,
                gaussian_mixture_quantile_gap_by_quadrature(self.alpha, self.weight)?,
            ),
            Mixture::Gamma => (
                self.c1,
                gamma_mixture_gap(self.alpha, self.c1)?,
                gamma_mixture_gap_by_quadrature(self.alpha, self.c1)?,
            ),
        };
        let diff = (gap - numeric).abs();
        let report = CounterexampleReport {
            command: "counterexample",
            kind: self.kind,
            alpha: self.alpha.value(),
            parameter,
            gap,
            numeric,
            diff,
            tol: self.tol,
            agrees: diff <= self.tol,
        };
        let bytes = render(format, &report, || {
            to_csv(
                &["alpha", "parameter", "gap", "numeric", "diff"],
                &[vec![
                    num(report.alpha),
                    num(parameter),
                    num(gap),
                    num(numeric),
                    num(diff),
                ]],
                &[],
            )
        });
        Ok(Run {
            bytes,
            within_tolerance: report.agrees,
            numeric_failure: None,
        })
    }
}
