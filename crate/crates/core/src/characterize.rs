//! The convolution kernels behind the two characterizations, their
//! transforms, root scans of `transform = 1`, and the mixture gaps showing why
//! the second exponential solution is excluded.
//!
//! Both kernels are built in reduced coordinates: `b = 0` for the location
//! kernel H, `a = 1` for the scale kernel K.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with, Interval, QuadConfig};
use crate::roots::bisect;
use crate::specfun::{
    log_gamma, m_star, norm_cdf, p_star, reg_gamma_cdf, std_normal_pdf, Alpha, SQRT_2PI,
};

/// Roots of `transform - 1` closer than this are reported as one tangent root.
pub const ROOT_MERGE_TOL: f64 = 1e-7;
/// Largest `|transform - 1|` accepted at a tangent root.
pub const TANGENT_TOL: f64 = 1e-10;
/// Final bracket width of a refined root.
pub const ROOT_WIDTH: f64 = 1e-12;

/// Asymmetric absolute value: `-c·x` for `x < 0`, `x` for `x > 0`.
pub fn abs_c(c: f64, x: f64) -> f64 {
    if x < 0.0 {
        -c * x
    } else {
        x
    }
}

fn quad_cfg() -> QuadConfig {
    QuadConfig::with_tol(1e-15).rel_tol(1e-13)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdditiveKernel {
    pub alpha: Alpha,
    pub c: f64,
    pub m: f64,
}

impl AdditiveKernel {
    pub fn new(alpha: Alpha) -> Self {
        AdditiveKernel {
            alpha,
            c: alpha.odds(),
            m: m_star(alpha, 0.0),
        }
    }

    /// H(x) = e^{m²/2}/(1+C) · abs_C(x) · e^{-(x+m)²/2}.
    pub fn density(&self, x: f64) -> f64 {
        if !x.is_finite() {
            return 0.0;
        }
        abs_c(self.c, x) / (1.0 + self.c) * (-x * (0.5 * x + self.m)).exp()
    }

    /// ∫e^{sx}H(x)dx in closed form.
    pub fn mgf(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::domain(format!("s must be finite, got {s}")));
        }
        let d = s - self.m;
        Ok(1.0 + SQRT_2PI * (0.5 * d * d).exp() * d * (norm_cdf(d) - self.alpha.value()))
    }

    /// ∫e^{sx}H(x)dx by adaptive quadrature, split at the kink.
    pub fn mgf_by_quadrature(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::domain(format!("s must be finite, got {s}")));
        }
        // e^{sx}H(x) ∝ abs_C(x)·e^{-(x - (s-m))²/2}, negligible 15 units from its centre.
        let centre = s - self.m;
        let lo = centre.min(0.0) - 15.0;
        let hi = centre.max(0.0) + 15.0;
        let f = |x: f64| (s * x).exp() * self.density(x);
        let left = integrate_with(f, Interval::new(lo, 0.0)?, &quad_cfg())?.value;
        let right = integrate_with(f, Interval::new(0.0, hi)?, &quad_cfg())?.value;
        Ok(left + right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiplicativeKernel {
    pub alpha: Alpha,
    pub c: f64,
    pub p_star: f64,
}

impl MultiplicativeKernel {
    pub fn new(alpha: Alpha) -> Result<Self> {
        Ok(MultiplicativeKernel {
            alpha,
            c: alpha.odds(),
            p_star: p_star(alpha, 1.0)?.value,
        })
    }

    /// K(y) = e/(1+C) · abs_C(1-y) · e^{-y} · y^{p*-1}.
    pub fn density(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::domain(format!("K is defined for y > 0, got {y}")));
        }
        if y.is_infinite() {
            return Ok(0.0);
        }
        Ok(
            abs_c(self.c, 1.0 - y) / (1.0 + self.c)
                * (1.0 - y + (self.p_star - 1.0) * y.ln()).exp(),
        )
    }

    /// ∫y^u K(y)dy in closed form, u > -p*.
    pub fn mellin(&self, u: f64) -> Result<f64> {
        let q = self.p_star + u;
        if !(q > 0.0) || !u.is_finite() {
            return Err(Error::domain(format!(
                "mellin transform needs u > -p* = {}, got {u}",
                -self.p_star
            )));
        }
        let bracket = self.alpha.value() - reg_gamma_cdf(q, 1.0)?;
        Ok(1.0 + std::f64::consts::E * log_gamma(q)?.exp() * (q - 1.0) * bracket)
    }

    /// ∫y^u K(y)dy by adaptive quadrature, split at the kink y = 1.
    pub fn mellin_by_quadrature(&self, u: f64) -> Result<f64> {
        let q = self.p_star + u;
        if !(q > 0.0) || !u.is_finite() {
            return Err(Error::domain(format!(
                "mellin transform needs u > -p* = {}, got {u}",
                -self.p_star
            )));
        }
        let norm = std::f64::consts::E / (1.0 + self.c);
        // y = s^{1/q} absorbs the y^{q-1} singularity at 0.
        let head = |s: f64| {
            let y = s.powf(1.0 / q);
            (1.0 - y) * (-y).exp()
        };
        let left = integrate_with(head, Interval::new(0.0, 1.0)?, &quad_cfg())?.value / q;
        let tail = |y: f64| {
            if y.is_infinite() {
                0.0
            } else {
                self.c * (y - 1.0) * (-y + (q - 1.0) * y.ln()).exp()
            }
        };
        let cfg = quad_cfg().scale(q.max(1.0));
        let right = integrate_with(tail, Interval::from(1.0)?, &cfg)?.value;
        Ok(norm * (left + right))
    }

    /// K(e^z)·e^z, the density of log Y when Y has density K.
    pub fn log_density(&self, z: f64) -> f64 {
        if z > 50.0 {
            return 0.0;
        }
        if z < -745.0 {
            return 0.0;
        }
        let y = z.exp();
        abs_c(self.c, 1.0 - y) / (1.0 + self.c) * (1.0 - y + self.p_star * z).exp()
    }
}

/// Either kernel, viewed through the convolution variable: `x` for H and
/// `z = log y` for K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    Additive(AdditiveKernel),
    Multiplicative(MultiplicativeKernel),
}

impl Kernel {
    pub fn alpha(&self) -> Alpha {
        match self {
            Kernel::Additive(k) => k.alpha,
            Kernel::Multiplicative(k) => k.alpha,
        }
    }

    /// MGF of H or Mellin transform of K.
    pub fn transform(&self, x: f64) -> Result<f64> {
        match self {
            Kernel::Additive(k) => k.mgf(x),
            Kernel::Multiplicative(k) => k.mellin(x),
        }
    }

    pub fn transform_by_quadrature(&self, x: f64) -> Result<f64> {
        match self {
            Kernel::Additive(k) => k.mgf_by_quadrature(x),
            Kernel::Multiplicative(k) => k.mellin_by_quadrature(x),
        }
    }

    /// Infimum of the transform's domain.
    pub fn transform_lower_bound(&self) -> f64 {
        match self {
            Kernel::Additive(_) => f64::NEG_INFINITY,
            Kernel::Multiplicative(k) => -k.p_star,
        }
    }

    /// The nonzero root r of `transform = 1` (0 in the tangent case).
    pub fn second_root(&self) -> f64 {
        match self {
            Kernel::Additive(k) => k.m,
            Kernel::Multiplicative(k) => 1.0 - k.p_star,
        }
    }

    /// Roots of `transform = 1`, with a nearly double root collapsed to 0.
    pub fn expected_roots(&self) -> Vec<f64> {
        let r = self.second_root();
        if r.abs() < ROOT_MERGE_TOL {
            vec![0.0]
        } else if r < 0.0 {
            vec![r, 0.0]
        } else {
            vec![0.0, r]
        }
    }

    /// Density in the convolution variable.
    pub fn conv_density(&self, z: f64) -> f64 {
        match self {
            Kernel::Additive(k) => k.density(z),
            Kernel::Multiplicative(k) => k.log_density(z),
        }
    }

    /// Exponent r with ∫κ(z)e^{rz}dz = 1, so e^{-rv} is a fixed point of
    /// convolution with κ. For H this is m; for log-K it is 1 - p*.
    pub fn conv_root(&self) -> f64 {
        self.second_root()
    }

    /// κ'(0+) - κ'(0-); both kernels vanish at 0 with slopes -C/(1+C) and 1/(1+C)
    /// (or their mirror), so the jump is 1.
    pub fn kink_jump(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub value: f64,
    pub bracket: [f64; 2],
    /// No sign change: `transform - 1` touches zero.
    pub tangent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootScan {
    pub range: [f64; 2],
    pub roots: Vec<Root>,
    pub expected: Vec<f64>,
    /// Every expected root lies inside the scanned range.
    pub complete: bool,
    /// Found and expected roots agree one to one within 1e-9, and the tangent
    /// flag is set exactly when a single root is expected.
    pub matches_expected: bool,
}

/// Locates the roots of `transform - 1` on `[lo, hi]` sampled at `n` points.
///
/// Sign changes are refined by bisection; local minima of the samples are
/// refined by bisection on a central difference and kept as tangent roots
/// when `|transform - 1| ≤ TANGENT_TOL` there.
pub fn transform_root_scan(kernel: &Kernel, lo: f64, hi: f64, n: usize) -> Result<RootScan> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::domain(format!("invalid scan range [{lo}, {hi}]")));
    }
    if n < 3 {
        return Err(Error::domain(format!(
            "root scan needs at least 3 points, got {n}"
        )));
    }
    if lo <= kernel.transform_lower_bound() {
        return Err(Error::domain(format!(
            "scan range starts at {lo}, outside the transform domain (> {})",
            kernel.transform_lower_bound()
        )));
    }
    let f = |x: f64| kernel.transform(x).map(|v| v - 1.0);
    let step = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect::<Result<_>>()?;

    let mut found: Vec<Root> = Vec::new();
    let mut failure = None;
    let mut eval = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    for i in 0..n {
        if fs[i] == 0.0 {
            let left = if i > 0 { fs[i - 1] } else { fs[i + 1] };
            let right = if i + 1 < n { fs[i + 1] } else { fs[i - 1] };
            found.push(Root {
                value: xs[i],
                bracket: [xs[i], xs[i]],
                tangent: left.signum() == right.signum() && left != 0.0,
            });
        }
        if i + 1 < n && fs[i] * fs[i + 1] < 0.0 {
            if let Some(b) = bisect(&mut eval, xs[i], xs[i + 1], ROOT_WIDTH, 200) {
                found.push(Root {
                    value: b.root,
                    bracket: [b.lo, b.hi],
                    tangent: false,
                });
            }
        }
    }
    for i in 1..n - 1 {
        let (a, b, c) = (fs[i - 1], fs[i], fs[i + 1]);
        let one_signed = (a >= 0.0 && b >= 0.0 && c >= 0.0) || (a <= 0.0 && b <= 0.0 && c <= 0.0);
        if !(one_signed && b.abs() <= a.abs() && b.abs() <= c.abs()) || b == 0.0 {
            continue;
        }
        let delta = 1e-5 * step;
        let mut slope = |x: f64| eval(x + delta) - eval(x - delta);
        let Some(bis) = bisect(&mut slope, xs[i - 1], xs[i + 1], ROOT_WIDTH, 200) else {
            continue;
        };
        let v = eval(bis.root);
        if v.abs() <= TANGENT_TOL {
            found.push(Root {
                value: bis.root,
                bracket: [bis.lo, bis.hi],
                tangent: true,
            });
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }

    found.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut roots: Vec<Root> = Vec::new();
    for r in found {
        match roots.last_mut() {
            Some(last) if (r.value - last.value).abs() < ROOT_MERGE_TOL => {
                // Two sign changes this close are a numerically split double root.
                last.tangent = true;
                last.bracket = [
                    last.bracket[0].min(r.bracket[0]),
                    last.bracket[1].max(r.bracket[1]),
                ];
                if r.bracket[1] - r.bracket[0] < last.bracket[1] - last.bracket[0] {
                    last.value = r.value;
                }
            }
            _ => roots.push(r),
        }
    }

    let expected = kernel.expected_roots();
    let complete = expected.iter().all(|&r| lo <= r && r <= hi);
    let matches_expected = roots.len() == expected.len()
        && roots
            .iter()
            .zip(&expected)
            .all(|(r, &e)| (r.value - e).abs() <= 1e-9)
        && roots.iter().all(|r| r.tangent == (expected.len() == 1));
    Ok(RootScan {
        range: [lo, hi],
        roots,
        expected,
        complete,
        matches_expected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogConvexity {
    pub min_second_difference: f64,
    pub at: f64,
}

impl LogConvexity {
    pub fn passes(&self, slack: f64) -> bool {
        self.min_second_difference >= -slack
    }
}

/// Smallest second difference of log(transform) over `n` uniform points of `[lo, hi]`.
pub fn log_convexity(kernel: &Kernel, lo: f64, hi: f64, n: usize) -> Result<LogConvexity> {
    if n < 3 || !(lo < hi) || lo <= kernel.transform_lower_bound() {
        return Err(Error::domain(format!(
            "invalid convexity grid [{lo}, {hi}] with {n} points"
        )));
    }
    let step = (hi - lo) / (n - 1) as f64;
    let logs: Vec<f64> = (0..n)
        .map(|i| kernel.transform(lo + step * i as f64).map(f64::ln))
        .collect::<Result<_>>()?;
    let mut out = LogConvexity {
        min_second_difference: f64::INFINITY,
        at: lo,
    };
    for i in 1..n - 1 {
        let d2 = logs[i + 1] - 2.0 * logs[i] + logs[i - 1];
        if d2 < out.min_second_difference {
            out = LogConvexity {
                min_second_difference: d2,
                at: lo + step * i as f64,
            };
        }
    }
    Ok(out)
}

fn check_weight(w: f64) -> Result<()> {
    if (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "mixture weight must lie in [0, 1], got {w}"
        )))
    }
}

/// CDF at 0 of `w·N(m,1) + (1-w)·N(0,1)` minus alpha, with m = -Φ⁻¹(α):
/// `(1-w)(1/2 - α)`.
pub fn gaussian_mixture_quantile_gap(alpha: Alpha, w: f64) -> Result<f64> {
    check_weight(w)?;
    Ok((1.0 - w) * (0.5 - alpha.value()))
}

/// The same gap, integrating the mixture density over (-∞, 0].
pub fn gaussian_mixture_quantile_gap_by_quadrature(alpha: Alpha, w: f64) -> Result<f64> {
    check_weight(w)?;
    let m = m_star(alpha, 0.0);
    let density = |x: f64| w * std_normal_pdf(x - m) + (1.0 - w) * std_normal_pdf(x);
    let cfg = quad_cfg().center(m.min(0.0));
    let mass = integrate_with(density, Interval::up_to(0.0)?, &cfg)?.value;
    Ok(mass - alpha.value())
}

/// Pinning defect at t = 1 of `q(y) = y^{p*-1} + c1`: `c1·(1 - (1+C)/e)`.
pub fn gamma_mixture_gap(alpha: Alpha, c1: f64) -> Result<f64> {
    if !(c1 >= 0.0) || !c1.is_finite() {
        return Err(Error::domain(format!(
            "c1 must be finite and nonnegative, got {c1}"
        )));
    }
    Ok(c1 * (1.0 - (1.0 + alpha.odds()) / std::f64::consts::E))
}

/// `∫₀¹ e^{-y}q(y)dy - C∫₁^∞ e^{-y}q(y)dy` for `q(y) = y^{p*-1} + c1`, by quadrature.
pub fn gamma_mixture_gap_by_quadrature(alpha: Alpha, c1: f64) -> Result<f64> {
    if !(c1 >= 0.0) || !c1.is_finite() {
        return Err(Error::domain(format!(
            "c1 must be finite and nonnegative, got {c1}"
        )));
    }
    let p = p_star(alpha, 1.0)?.value;
    let c = alpha.odds();
    // y = s^{1/p} on (0, 1] removes the y^{p-1} singularity.
    let power_head = integrate_with(
        |s: f64| (-s.powf(1.0 / p)).exp(),
        Interval::new(0.0, 1.0)?,
        &quad_cfg(),
    )?
    .value
        / p;
    let const_head =
        integrate_with(|y: f64| (-y).exp(), Interval::new(0.0, 1.0)?, &quad_cfg())?.value;
    let tail = |y: f64| {
        if y.is_infinite() {
            0.0
        } else {
            (-y).exp() * (y.powf(p - 1.0) + c1)
        }
    };
    let tail = integrate_with(tail, Interval::from(1.0)?, &quad_cfg().scale(p.max(1.0)))?.value;
    Ok(power_head + c1 * const_head - c * tail)
}
