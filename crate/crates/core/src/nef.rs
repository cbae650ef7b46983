//! Base measures, exponential tilting, transforms and the quantile-pinning
//! residuals.
//!
//! A base measure on ℝ generates the location-side family
//! `P_t(dx) = e^{tx} P₀(dx) / M(t)`; a base measure on (0, ∞) generates the
//! scale-side family `Q_{-t}(dy) = e^{-ty} Q(dy) / L(t)`, t > 0.
//!
//! Tabulated densities are integrated on their own uniform grid with the
//! trapezoid rule plus the Euler–Maclaurin end correction `-h²/12 [F']`,
//! which makes node-to-node accumulation fourth order for smooth integrands.
//! A half-line table whose first node sits one step from the origin gets a
//! fitted head `c·y^β·e^{-γy}` (through its first three nodes) so integrable
//! singularities at 0, such as `y^{-1/2}`, are integrated exactly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_with, Interval, QuadConfig};
use crate::specfun::{log_gamma, norm_cdf, reg_gamma_cdf, std_normal_pdf, Alpha, FRAC_1_SQRT_2PI};
use crate::table::{validate_uniform, Table, SPACING_RTOL};

/// Relative tail mass beyond a table's ends tolerated inside its tilt validity range.
pub const TAIL_TOL: f64 = 1e-10;
/// Largest `|t|·h` for which a tabulated transform is considered resolved.
pub const MAX_TILT_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Support {
    Line,
    HalfLine,
}

/// `c·y^β·e^{-γy}` fitted through the first three nodes of a half-line table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerHead {
    pub c: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl PowerHead {
    fn fit(ys: [f64; 3], ds: [f64; 3]) -> Result<Option<Self>> {
        if ds.iter().any(|&d| d <= 0.0) {
            return Ok(None);
        }
        let l10 = (ys[1] / ys[0]).ln();
        let l21 = (ys[2] / ys[1]).ln();
        let h = ys[1] - ys[0];
        let r10 = (ds[1] / ds[0]).ln();
        let r21 = (ds[2] / ds[1]).ln();
        let beta = (r10 - r21) / (l10 - l21);
        let gamma = (beta * l10 - r10) / h;
        if !(beta > -1.0) {
            return Err(Error::config(format!(
                "tabulated density behaves like y^{beta:.4} near 0 and is not integrable"
            )));
        }
        let c = ds[0] / (ys[0].powf(beta) * (-gamma * ys[0]).exp());
        if !c.is_finite() || !beta.is_finite() || !gamma.is_finite() {
            return Ok(None);
        }
        Ok(Some(PowerHead { c, beta, gamma }))
    }

    fn eval(&self, y: f64) -> f64 {
        self.c * y.powf(self.beta) * (-self.gamma * y).exp()
    }

    /// ∫₀^Y e^{-ty} c y^β e^{-γy} dy via y = Y s^{1/(β+1)}.
    fn integral(&self, t: f64, upper: f64) -> Result<f64> {
        if upper <= 0.0 {
            return Ok(0.0);
        }
        let k = self.beta + 1.0;
        let rate = (t + self.gamma) * upper;
        let r = integrate_with(
            |s: f64| (-rate * s.powf(1.0 / k)).exp(),
            Interval::new(0.0, 1.0)?,
            &QuadConfig::with_tol(1e-16).rel_tol(1e-12),
        )?;
        Ok(self.c * upper.powf(k) / k * r.value)
    }
}

/// A nonnegative density sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tabulated {
    support: Support,
    lo: f64,
    step: f64,
    values: Vec<f64>,
    head: Option<PowerHead>,
    /// Last node covered by the head model (half-line only).
    head_end: usize,
    tilt_range: [f64; 2],
}

impl Tabulated {
    fn new(support: Support, xs: &[f64], values: &[f64]) -> Result<Self> {
        if xs.len() != values.len() {
            return Err(Error::config("grid and values differ in length"));
        }
        validate_uniform(xs)?;
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config(
                "tabulated density values must be finite and nonnegative",
            ));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::config("tabulated density is identically zero"));
        }
        let n = xs.len();
        let lo = xs[0];
        let step = (xs[n - 1] - lo) / (n - 1) as f64;
        let mut head = None;
        let mut head_end = 0;
        if support == Support::HalfLine {
            if !(lo > 0.0) {
                return Err(Error::config(
                    "half-line table must start at a positive abscissa",
                ));
            }
            if lo <= step * (1.0 + SPACING_RTOL) && values[0] > 0.0 {
                head = PowerHead::fit([xs[0], xs[1], xs[2]], [values[0], values[1], values[2]])?;
                if head.is_none() {
                    // Flat extrapolation of the first value down to 0.
                    head = Some(PowerHead {
                        c: values[0],
                        beta: 0.0,
                        gamma: 0.0,
                    });
                }
                let span = (xs[n - 1] - lo) / 4.0;
                head_end = ((0.5f64.min(span)) / step).round() as usize;
                head_end = head_end.clamp(2, n - 1);
            }
        }
        let mut tab = Tabulated {
            support,
            lo,
            step,
            values: values.to_vec(),
            head,
            head_end,
            tilt_range: [0.0, 0.0],
        };
        tab.tilt_range = tab.find_tilt_range()?;
        Ok(tab)
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn grid(&self) -> (f64, f64, usize) {
        (self.lo, self.hi(), self.values.len())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn head(&self) -> Option<PowerHead> {
        self.head
    }

    /// Tilts for which the truncated transform's relative tail error is below [`TAIL_TOL`].
    pub fn tilt_range(&self) -> [f64; 2] {
        self.tilt_range
    }

    fn hi(&self) -> f64 {
        self.lo + self.step * (self.values.len() - 1) as f64
    }

    fn node(&self, i: usize) -> f64 {
        self.lo + self.step * i as f64
    }

    /// Sign of the exponent: e^{tx} on the line, e^{-ty} on the half-line.
    fn tilt_sign(&self) -> f64 {
        match self.support {
            Support::Line => 1.0,
            Support::HalfLine => -1.0,
        }
    }

    /// Log-scale shift keeping e^{±t x_i} d_i representable.
    fn shift(&self, t: f64) -> f64 {
        let sgn = self.tilt_sign();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0.0)
            .map(|(i, &d)| sgn * t * self.node(i) + d.ln())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// e^{-shift} ∫_{start}^{x} e^{±t y} d(y) dy, with `start` = 0 on the half-line.
    fn scaled_integral(&self, t: f64, x: f64, shift: f64) -> Result<f64> {
        let n = self.values.len();
        let sgn = self.tilt_sign();
        let x = x.min(self.hi());
        let weighted = |i: usize, v: f64| -> f64 {
            if v == 0.0 {
                0.0
            } else {
                (sgn * t * self.node(i) - shift).exp() * v
            }
        };
        let mut total = 0.0;
        let mut body_start = 0;
        if let Some(head) = &self.head {
            let j = self.head_end;
            let y_j = self.node(j);
            let upto = x.min(y_j);
            total += head.integral(t, upto)? * (-shift).exp();
            if upto > self.lo {
                let rem: Vec<f64> = (0..=j)
                    .map(|i| weighted(i, 1.0) * (self.values[i] - head.eval(self.node(i))))
                    .collect();
                total += cumulative(&rem, self.step, (upto - self.lo) / self.step);
            }
            body_start = j;
        }
        let start_x = self.node(body_start);
        if x > start_x {
            let f: Vec<f64> = (body_start..n)
                .map(|i| weighted(i, self.values[i]))
                .collect();
            total += cumulative(&f, self.step, (x - start_x) / self.step);
        }
        Ok(total)
    }

    fn check_tilt(&self, t: f64) -> Result<()> {
        let [a, b] = self.tilt_range;
        if t.is_finite() && a <= t && t <= b {
            Ok(())
        } else {
            Err(Error::numeric(
                format!("tilt {t} outside the table's validity range [{a}, {b}]"),
                None,
            ))
        }
    }

    /// Transform (M or L) at t, without the validity check.
    fn transform_unchecked(&self, t: f64) -> Result<f64> {
        let s = self.shift(t);
        Ok(self.scaled_integral(t, self.hi(), s)? * s.exp())
    }

    fn transform(&self, t: f64) -> Result<f64> {
        self.check_tilt(t)?;
        let v = self.transform_unchecked(t)?;
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::numeric(
                format!("transform of tabulated base not finite at t = {t}"),
                Some(v),
            ))
        }
    }

    fn tilted_cdf(&self, t: f64, x: f64) -> Result<f64> {
        self.check_tilt(t)?;
        let start = match self.support {
            Support::Line => self.lo,
            Support::HalfLine => 0.0,
        };
        if x <= start {
            return Ok(0.0);
        }
        if x >= self.hi() {
            return Ok(1.0);
        }
        let s = self.shift(t);
        let total = self.scaled_integral(t, self.hi(), s)?;
        let part = self.scaled_integral(t, x, s)?;
        Ok((part / total).clamp(0.0, 1.0))
    }

    /// Relative mass an exponential extrapolation puts beyond the table ends.
    fn tail_ratio(&self, t: f64) -> Result<f64> {
        let n = self.values.len();
        let h = self.step;
        let sgn = self.tilt_sign();
        let s = self.shift(t);
        let total = self.scaled_integral(t, self.hi(), s)?;
        let mut tail = 0.0;
        // Upper end: d(x) ≈ d(hi) e^{-λ(x - hi)}.
        let (d1, d0) = (self.values[n - 1], self.values[n - 2]);
        if d1 > 0.0 {
            if d0 <= 0.0 {
                return Ok(f64::INFINITY);
            }
            let lambda = -(d1 / d0).ln() / h;
            let rate = lambda - sgn * t;
            if !(rate > 0.0) {
                return Ok(f64::INFINITY);
            }
            tail += d1 * (sgn * t * self.hi() - s).exp() / rate;
        }
        if self.support == Support::Line {
            let (d0, d1) = (self.values[0], self.values[1]);
            if d0 > 0.0 {
                if d1 <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                let lambda = (d1 / d0).ln() / h;
                let rate = lambda + t;
                if !(rate > 0.0) {
                    return Ok(f64::INFINITY);
                }
                tail += d0 * (t * self.lo - s).exp() / rate;
            }
        }
        Ok(tail / total)
    }

    fn find_tilt_range(&self) -> Result<[f64; 2]> {
        let limit = MAX_TILT_STEP / self.step;
        let ok = |t: f64| self.tail_ratio(t).map(|r| r <= TAIL_TOL).unwrap_or(false);
        match self.support {
            Support::Line => {
                if !ok(0.0) {
                    return Err(Error::config(
                        "tabulated density does not decay fast enough at the grid ends (tail mass above 1e-10)",
                    ));
                }
                Ok([edge(&ok, 0.0, -limit), edge(&ok, 0.0, limit)])
            }
            Support::HalfLine => {
                if !ok(limit) {
                    return Err(Error::config(
                        "tabulated half-line density has no tilt with tail mass below 1e-10",
                    ));
                }
                Ok([edge(&ok, limit, limit * 1e-9), limit])
            }
        }
    }
}

/// Furthest point from `anchor` toward `limit` that still satisfies `ok`,
/// located by a 200-point scan followed by bisection.
fn edge<F: Fn(f64) -> bool>(ok: &F, anchor: f64, limit: f64) -> f64 {
    const SCAN: usize = 200;
    let mut good = anchor;
    for i in 1..=SCAN {
        let t = anchor + (limit - anchor) * i as f64 / SCAN as f64;
        if ok(t) {
            good = t;
        } else {
            let mut bad = t;
            for _ in 0..40 {
                let mid = 0.5 * (good + bad);
                if ok(mid) {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            return good;
        }
    }
    good
}

/// ∫ of the sampled function from node 0 to position `pos` (in steps),
/// trapezoid with Euler–Maclaurin end correction on whole cells and a
/// quadratic interpolant on the trailing partial cell.
fn cumulative(f: &[f64], h: f64, pos: f64) -> f64 {
    let n = f.len();
    if n == 0 || pos <= 0.0 {
        return 0.0;
    }
    let max = (n - 1) as f64;
    let pos = pos.min(max);
    let mut k = pos.floor() as usize;
    let mut theta = pos - k as f64;
    if k >= n - 1 {
        k = n - 1;
        theta = 0.0;
    }
    let deriv = |i: usize| -> f64 {
        if n < 3 {
            return if n == 2 { (f[1] - f[0]) / h } else { 0.0 };
        }
        if i == 0 {
            (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
        } else {
            (f[i + 1] - f[i - 1]) / (2.0 * h)
        }
    };
    let mut total = 0.0;
    if k > 0 {
        let sum: f64 = f[..=k].iter().sum();
        total = h * (sum - 0.5 * (f[0] + f[k]));
        total -= h * h / 12.0 * (deriv(k) - deriv(0));
    }
    if theta > 0.0 {
        let (nodes, vals) = if n < 3 {
            ([0.0, 1.0, 2.0], [f[k], f[k + 1], f[k + 1]])
        } else if k == 0 {
            ([0.0, 1.0, 2.0], [f[0], f[1], f[2]])
        } else {
            ([-1.0, 0.0, 1.0], [f[k - 1], f[k], f[k + 1]])
        };
        total += h * quadratic_partial(nodes, vals, theta);
    }
    total
}

/// ∫₀^θ q(s) ds for the quadratic through `(nodes[i], vals[i])`.
fn quadratic_partial(nodes: [f64; 3], vals: [f64; 3], theta: f64) -> f64 {
    let [a, b, c] = nodes;
    let d1 = (vals[1] - vals[0]) / (b - a);
    let d2 = ((vals[2] - vals[1]) / (c - b) - d1) / (c - a);
    let i0 = theta;
    let i1 = theta * theta / 2.0 - a * theta;
    let i2 = theta.powi(3) / 3.0 - (a + b) * theta * theta / 2.0 + a * b * theta;
    vals[0] * i0 + d1 * i1 + d2 * i2
}

/// Base measure generating an exponential family.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseMeasure {
    /// Density φ(x - m) on ℝ.
    GaussianLocation {
        m: f64,
    },
    /// Weight y^{p-1}/Γ(p) on (0, ∞).
    GammaWeight {
        p: f64,
    },
    TabulatedLine(Tabulated),
    TabulatedHalfline(Tabulated),
}

impl BaseMeasure {
    pub fn gaussian(m: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::domain(format!(
                "gaussian location must be finite, got {m}"
            )));
        }
        Ok(BaseMeasure::GaussianLocation { m })
    }

    pub fn gamma(p: f64) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::domain(format!(
                "gamma weight exponent must be positive, got {p}"
            )));
        }
        Ok(BaseMeasure::GammaWeight { p })
    }

    pub fn tabulated_line(xs: &[f64], values: &[f64]) -> Result<Self> {
        Ok(BaseMeasure::TabulatedLine(Tabulated::new(
            Support::Line,
            xs,
            values,
        )?))
    }

    pub fn tabulated_halfline(xs: &[f64], values: &[f64]) -> Result<Self> {
        Ok(BaseMeasure::TabulatedHalfline(Tabulated::new(
            Support::HalfLine,
            xs,
            values,
        )?))
    }

    pub fn from_table(table: &Table, support: Support) -> Result<Self> {
        match support {
            Support::Line => Self::tabulated_line(&table.xs, &table.ys),
            Support::HalfLine => Self::tabulated_halfline(&table.xs, &table.ys),
        }
    }

    /// Samples `density` on `n` uniform nodes of `[lo, hi]`.
    pub fn sample_line<F: Fn(f64) -> f64>(density: F, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let xs = uniform_nodes(lo, hi, n)?;
        let ys: Vec<f64> = xs.iter().map(|&x| density(x)).collect();
        Self::tabulated_line(&xs, &ys)
    }

    /// Samples `density` on `step, 2·step, …, n·step`.
    pub fn sample_halfline<F: Fn(f64) -> f64>(density: F, step: f64, n: usize) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::domain("half-line sampling step must be positive"));
        }
        let xs: Vec<f64> = (1..=n).map(|i| step * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| density(x)).collect();
        Self::tabulated_halfline(&xs, &ys)
    }

    pub fn support(&self) -> Support {
        match self {
            BaseMeasure::GaussianLocation { .. } | BaseMeasure::TabulatedLine(_) => Support::Line,
            BaseMeasure::GammaWeight { .. } | BaseMeasure::TabulatedHalfline(_) => {
                Support::HalfLine
            }
        }
    }

    /// Admissible tilt parameters.
    pub fn tilt_range(&self) -> [f64; 2] {
        match self {
            BaseMeasure::GaussianLocation { .. } => [f64::NEG_INFINITY, f64::INFINITY],
            BaseMeasure::GammaWeight { .. } => [0.0, f64::INFINITY],
            BaseMeasure::TabulatedLine(t) | BaseMeasure::TabulatedHalfline(t) => t.tilt_range(),
        }
    }

    fn require(&self, support: Support, what: &str) -> Result<()> {
        if self.support() == support {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{what} needs a {support:?}-supported base measure"
            )))
        }
    }
}

fn uniform_nodes(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 3 || !(lo < hi) {
        return Err(Error::domain(format!(
            "invalid sampling grid [{lo}, {hi}] with {n} nodes"
        )));
    }
    let h = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| lo + h * i as f64).collect())
}

/// Moment generating function M(t) = ∫ e^{tx} P₀(dx) of a line-supported base.
pub fn mgf(base: &BaseMeasure, t: f64) -> Result<f64> {
    base.require(Support::Line, "mgf")?;
    if !t.is_finite() {
        return Err(Error::domain(format!("tilt must be finite, got {t}")));
    }
    match base {
        BaseMeasure::GaussianLocation { m } => {
            let v = (t * m + 0.5 * t * t).exp();
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::numeric(format!("M({t}) overflows"), None))
            }
        }
        BaseMeasure::TabulatedLine(tab) => tab.transform(t),
        _ => unreachable!(),
    }
}

/// Laplace transform L(t) = ∫ e^{-ty} Q(dy) of a half-line base, t > 0.
pub fn laplace(base: &BaseMeasure, t: f64) -> Result<f64> {
    base.require(Support::HalfLine, "laplace")?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!(
            "laplace transform needs t > 0, got {t}"
        )));
    }
    match base {
        BaseMeasure::GammaWeight { p } => Ok(t.powf(-p)),
        BaseMeasure::TabulatedHalfline(tab) => tab.transform(t),
        _ => unreachable!(),
    }
}

/// M(t) of an analytic line base by adaptive quadrature of its density.
pub fn mgf_by_quadrature(base: &BaseMeasure, t: f64) -> Result<f64> {
    match base {
        BaseMeasure::GaussianLocation { m } => {
            let m = *m;
            // e^{tx} φ(x - m) = M(t) φ(x - m - t); integrate the product directly.
            let f = move |x: f64| FRAC_1_SQRT_2PI * (t * x - 0.5 * (x - m) * (x - m)).exp();
            let scale_ref = (t * m + 0.5 * t * t).exp();
            let cfg = QuadConfig::with_tol(1e-14 * scale_ref.max(1e-300))
                .rel_tol(1e-13)
                .center(m + t)
                .scale(2.0);
            Ok(integrate_with(f, Interval::real_line(), &cfg)?.value)
        }
        BaseMeasure::TabulatedLine(_) => mgf(base, t),
        _ => Err(Error::domain("mgf needs a line-supported base measure")),
    }
}

/// L(t) of an analytic half-line base by adaptive quadrature.
pub fn laplace_by_quadrature(base: &BaseMeasure, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!(
            "laplace transform needs t > 0, got {t}"
        )));
    }
    match base {
        BaseMeasure::GammaWeight { p } => {
            let p = *p;
            // y = s^{1/p} turns y^{p-1} dy / Γ(p) into ds / Γ(p + 1).
            let f = move |s: f64| (-t * s.powf(1.0 / p)).exp();
            let cfg = QuadConfig::with_tol(1e-300)
                .rel_tol(1e-11)
                .scale(t.powf(-p));
            let r = integrate_with(f, Interval::from(0.0)?, &cfg)?;
            Ok(r.value / (log_gamma(p + 1.0)?).exp())
        }
        BaseMeasure::TabulatedHalfline(_) => laplace(base, t),
        _ => Err(Error::domain("laplace needs a half-line base measure")),
    }
}

/// Distribution function at `x` of the tilted law: P_t((-∞, x]) on the line,
/// Q_{-t}((0, x]) on the half-line.
pub fn tilted_cdf(base: &BaseMeasure, t: f64, x: f64) -> Result<f64> {
    if x.is_nan() || !t.is_finite() {
        return Err(Error::domain("tilted_cdf arguments must not be NaN"));
    }
    match base {
        BaseMeasure::GaussianLocation { m } => Ok(norm_cdf(x - m - t)),
        BaseMeasure::GammaWeight { p } => {
            if !(t > 0.0) {
                return Err(Error::domain(format!(
                    "scale tilt must be positive, got {t}"
                )));
            }
            if x <= 0.0 {
                return Ok(0.0);
            }
            reg_gamma_cdf(*p, t * x)
        }
        BaseMeasure::TabulatedLine(tab) => tab.tilted_cdf(t, x),
        BaseMeasure::TabulatedHalfline(tab) => {
            if !(t > 0.0) {
                return Err(Error::domain(format!(
                    "scale tilt must be positive, got {t}"
                )));
            }
            tab.tilted_cdf(t, x)
        }
    }
}

/// F_t(b + t) - alpha for the location family.
pub fn location_pin_residual(base: &BaseMeasure, alpha: Alpha, b: f64, t: f64) -> Result<f64> {
    base.require(Support::Line, "location pin residual")?;
    if !b.is_finite() {
        return Err(Error::domain(format!("b must be finite, got {b}")));
    }
    Ok(tilted_cdf(base, t, b + t)? - alpha.value())
}

/// G_t(a / t) - alpha for the scale family.
pub fn scale_pin_residual(base: &BaseMeasure, alpha: Alpha, a: f64, t: f64) -> Result<f64> {
    base.require(Support::HalfLine, "scale pin residual")?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain(format!("a must be positive, got {a}")));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!(
            "scale tilt must be positive, got {t}"
        )));
    }
    Ok(tilted_cdf(base, t, a / t)? - alpha.value())
}

/// Which pinning condition a scan checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Pin {
    /// `b + t` is the alpha-quantile of P_t.
    Location { b: f64 },
    /// `a / t` is the alpha-quantile of Q_{-t}.
    Scale { a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanFailure {
    pub index: usize,
    pub t: f64,
    pub message: String,
}

/// Residuals of a pinning condition over a list of tilts.
///
/// A tilt whose evaluation failed keeps its slot with a NaN residual and is
/// listed in `failures`; `max_abs` covers the successful entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub parameters: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_abs: f64,
    pub failures: Vec<ScanFailure>,
}

impl ResidualReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn scan_pin_residuals(
    base: &BaseMeasure,
    alpha: Alpha,
    pin: Pin,
    t_values: &[f64],
) -> Result<ResidualReport> {
    if t_values.is_empty() {
        return Err(Error::domain("scan needs at least one tilt value"));
    }
    let mut residuals = Vec::with_capacity(t_values.len());
    let mut failures = Vec::new();
    let mut max_abs = 0.0f64;
    for (index, &t) in t_values.iter().enumerate() {
        let r = match pin {
            Pin::Location { b } => location_pin_residual(base, alpha, b, t),
            Pin::Scale { a } => scale_pin_residual(base, alpha, a, t),
        };
        match r {
            Ok(v) => {
                max_abs = max_abs.max(v.abs());
                residuals.push(v);
            }
            Err(e) => {
                residuals.push(f64::NAN);
                failures.push(ScanFailure {
                    index,
                    t,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(ResidualReport {
        parameters: t_values.to_vec(),
        residuals,
        max_abs,
        failures,
    })
}

/// M(t+s) - M(t)M(s)e^{ts} with M normalized by M(0), so the residual is
/// insensitive to the total mass of a tabulated base.
pub fn location_identity_residual(base: &BaseMeasure, s: f64, t: f64) -> Result<f64> {
    base.require(Support::Line, "location identity residual")?;
    let m0 = mgf(base, 0.0)?;
    let m = |u: f64| mgf(base, u).map(|v| v / m0);
    Ok(m(t + s)? - m(t)? * m(s)? * (t * s).exp())
}

/// L(t + ts)/L(t) - L(1 + s)/L(1).
pub fn scale_identity_residual(base: &BaseMeasure, s: f64, t: f64) -> Result<f64> {
    base.require(Support::HalfLine, "scale identity residual")?;
    if !(s > 0.0) || !(t > 0.0) {
        return Err(Error::domain(format!(
            "scale identity needs s, t > 0, got s={s}, t={t}"
        )));
    }
    let lhs = laplace(base, t + t * s)? / laplace(base, t)?;
    let rhs = laplace(base, 1.0 + s)? / laplace(base, 1.0)?;
    Ok(lhs - rhs)
}

/// u·c''(u) + c'(u) for c = log L, by central differences with step `h`.
pub fn log_transform_ode_residual(base: &BaseMeasure, u: f64, h: f64) -> Result<f64> {
    base.require(Support::HalfLine, "log-transform ODE residual")?;
    if !(h > 0.0) || !(u > h) {
        return Err(Error::domain(format!("need u > h > 0, got u={u}, h={h}")));
    }
    let c = |x: f64| laplace(base, x).map(f64::ln);
    let (cm, c0, cp) = (c(u - h)?, c(u)?, c(u + h)?);
    let d1 = (cp - cm) / (2.0 * h);
    let d2 = (cp - 2.0 * c0 + cm) / (h * h);
    Ok(u * d2 + d1)
}

/// Standard normal density sampled for building tabulated examples.
pub fn gaussian_density(m: f64) -> impl Fn(f64) -> f64 {
    move |x| std_normal_pdf(x - m)
}

/// Quadrature of a density's tail to check tabulation error bounds.
pub fn tail_mass<F: Fn(f64) -> f64>(density: F, from: f64) -> Result<f64> {
    Ok(integrate(density, Interval::from(from)?, 1e-14)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{m_star, p_star};

    fn alpha(v: f64) -> Alpha {
        Alpha::new(v).unwrap()
    }

    fn tab_normal() -> BaseMeasure {
        BaseMeasure::sample_line(gaussian_density(0.0), -20.0, 20.0, 4001).unwrap()
    }

    #[test]
    fn gaussian_mgf_closed_form() {
        let b = BaseMeasure::gaussian(0.0).unwrap();
        assert_eq!(mgf(&b, 0.0).unwrap(), 1.0);
        let b = BaseMeasure::gaussian(0.7).unwrap();
        for t in [-2.0, 0.3, 1.5] {
            let want = (t * 0.7 + t * t / 2.0f64).exp();
            assert!((mgf(&b, t).unwrap() - want).abs() < 1e-14 * want);
        }
    }

    #[test]
    fn gaussian_mgf_matches_quadrature() {
        let b = BaseMeasure::gaussian(-0.4).unwrap();
        for t in [-3.0, -1.0, 0.0, 0.5, 2.0, 4.0] {
            let closed = mgf(&b, t).unwrap();
            let quad = mgf_by_quadrature(&b, t).unwrap();
            assert!((closed - quad).abs() <= 1e-8 * closed.max(1.0), "t={t}");
        }
    }

    #[test]
    fn tabulated_normal_mgf() {
        let b = tab_normal();
        let v = mgf(&b, 1.0).unwrap();
        assert!((v - 0.5f64.exp()).abs() < 1e-8, "{v}");
        assert!((mgf(&b, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_normal_tilted_cdf() {
        let b = tab_normal();
        let v = tilted_cdf(&b, 0.7, 1.2).unwrap();
        assert!((v - norm_cdf(0.5)).abs() < 1e-8, "{v}");
        // off-node query
        let v = tilted_cdf(&b, -0.3, 0.123_456).unwrap();
        assert!((v - norm_cdf(0.423_456)).abs() < 1e-8, "{v}");
    }

    #[test]
    fn tabulated_tilt_range_is_enforced() {
        let b = tab_normal();
        let [lo, hi] = b.tilt_range();
        assert!(lo < -5.0 && hi > 5.0, "{lo} {hi}");
        assert!(matches!(
            mgf(&b, hi + 1.0),
            Err(Error::NumericFailure { .. })
        ));
    }

    #[test]
    fn gamma_laplace_closed_form() {
        let b = BaseMeasure::gamma(1.0).unwrap();
        assert_eq!(laplace(&b, 2.0).unwrap(), 0.5);
        let b = BaseMeasure::gamma(2.5).unwrap();
        assert!((laplace(&b, 3.0).unwrap() - 3f64.powf(-2.5)).abs() < 1e-15);
        assert!(laplace(&b, 0.0).is_err());
        assert!(laplace(&b, -1.0).is_err());
    }

    #[test]
    fn gamma_laplace_matches_quadrature() {
        for p in [0.3, 1.0, 2.7] {
            let b = BaseMeasure::gamma(p).unwrap();
            for t in [0.2, 1.0, 5.0] {
                let closed = laplace(&b, t).unwrap();
                let quad = laplace_by_quadrature(&b, t).unwrap();
                assert!(
                    (closed - quad).abs() <= 1e-8 * closed,
                    "p={p} t={t} {closed} {quad}"
                );
            }
        }
    }

    #[test]
    fn tabulated_inverse_sqrt_weight() {
        let g = std::f64::consts::PI.sqrt();
        let b = BaseMeasure::sample_halfline(|y| y.powf(-0.5) / g, 0.01, 6000).unwrap();
        let v = laplace(&b, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn support_mismatch_is_domain_error() {
        let g = BaseMeasure::gaussian(0.0).unwrap();
        let q = BaseMeasure::gamma(1.0).unwrap();
        assert!(matches!(laplace(&g, 1.0), Err(Error::Domain(_))));
        assert!(matches!(mgf(&q, 1.0), Err(Error::Domain(_))));
        assert!(scale_pin_residual(&g, alpha(0.5), 1.0, 1.0).is_err());
        assert!(location_pin_residual(&q, alpha(0.5), 0.0, 1.0).is_err());
    }

    #[test]
    fn location_pin_examples() {
        let a = alpha(0.3);
        let base = BaseMeasure::gaussian(m_star(a, 1.3)).unwrap();
        for t in [-4.0, 0.0, 2.5] {
            assert!(location_pin_residual(&base, a, 1.3, t).unwrap().abs() <= 1e-12);
        }
        let base = BaseMeasure::gaussian(1.0).unwrap();
        let r = location_pin_residual(&base, alpha(0.5), 0.0, 0.0).unwrap();
        assert!((r - (norm_cdf(-1.0) - 0.5)).abs() < 1e-15);
        assert!((r + 0.3413).abs() < 1e-4);
    }

    #[test]
    fn scale_pin_examples() {
        let base = BaseMeasure::gamma(2.0).unwrap();
        let r = scale_pin_residual(&base, alpha(0.5), 1.0, 3.0).unwrap();
        let want = (1.0 - 2.0 * (-1.0f64).exp()) - 0.5;
        assert!((r - want).abs() <= 1e-12);

        let a = alpha(0.42);
        let ps = p_star(a, 2.0).unwrap().value;
        let base = BaseMeasure::gamma(ps).unwrap();
        for t in [0.1, 1.0, 10.0] {
            assert!(scale_pin_residual(&base, a, 2.0, t).unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn scan_records_failures() {
        let b = tab_normal();
        let [_, hi] = b.tilt_range();
        let report = scan_pin_residuals(
            &b,
            alpha(0.5),
            Pin::Location { b: 0.0 },
            &[0.0, 0.5, hi + 2.0],
        )
        .unwrap();
        assert_eq!(report.residuals.len(), 3);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].index, 2);
        assert!(report.residuals[2].is_nan());
        assert!(report.max_abs < 1e-8);
        assert!(scan_pin_residuals(&b, alpha(0.5), Pin::Location { b: 0.0 }, &[]).is_err());
    }

    #[test]
    fn identity_residuals() {
        let g = BaseMeasure::gaussian(0.4).unwrap();
        assert!(location_identity_residual(&g, 0.7, -1.1).unwrap().abs() < 1e-12);
        let q = BaseMeasure::gamma(1.7).unwrap();
        assert!(scale_identity_residual(&q, 0.7, 2.2).unwrap().abs() < 1e-12);
        assert_eq!(scale_identity_residual(&q, 0.7, 1.0).unwrap(), 0.0);
        let tab = tab_normal();
        assert_eq!(location_identity_residual(&tab, 0.0, 0.8).unwrap(), 0.0);
    }

    #[test]
    fn ode_residual_vanishes_for_power_weights() {
        for (p, u) in [(1.0, 1.0), (2.3, 2.0), (0.4, 0.7)] {
            let q = BaseMeasure::gamma(p).unwrap();
            let r = log_transform_ode_residual(&q, u, 1e-4).unwrap();
            assert!(r.abs() < 1e-6, "p={p} u={u} r={r}");
        }
        let q = BaseMeasure::gamma(1.0).unwrap();
        assert!(log_transform_ode_residual(&q, 1e-5, 1e-4).is_err());
    }

    #[test]
    fn bad_tables_rejected() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        assert!(BaseMeasure::tabulated_line(&xs, &[0.0; 4]).is_err());
        assert!(BaseMeasure::tabulated_line(&xs, &[1.0, -1.0, 1.0, 1.0]).is_err());
        assert!(BaseMeasure::tabulated_line(&xs, &[1.0, 1.0, 1.0]).is_err());
        assert!(BaseMeasure::tabulated_halfline(&xs, &[1.0; 4]).is_err());
        // y^{-1.5} is not integrable at 0
        assert!(BaseMeasure::sample_halfline(|y| y.powf(-1.5) * (-y).exp(), 0.01, 4000).is_err());
    }
}
