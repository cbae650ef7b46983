//! Special functions: the standard normal law, log-gamma, the regularized
//! lower incomplete gamma function, and the two characterizing-parameter
//! solvers `m_star` and `p_star`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::bisect;

/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// √(2π)
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// A probability threshold strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Alpha(value))
        } else {
            Err(Error::domain(format!(
                "alpha must lie in (0, 1), got {value}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Odds `C = alpha / (1 - alpha)`.
    #[inline]
    pub fn odds(self) -> f64 {
        self.0 / (1.0 - self.0)
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Alpha::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

impl std::str::FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::domain(format!("not a number: {s:?}")))?;
        Alpha::new(v)
    }
}

#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ(x) without argument validation.
#[inline]
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal distribution function Φ(x).
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!(
            "normal cdf argument must be finite, got {x}"
        )));
    }
    Ok(norm_cdf(x))
}

/// Φ⁻¹(alpha).
///
/// Acklam's rational approximation followed by two Halley steps against
/// [`std_normal_cdf`].
pub fn std_normal_quantile(alpha: Alpha) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let p = alpha.value();
    if p == 0.5 {
        return 0.0;
    }
    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    for _ in 0..2 {
        // Work on the smaller tail so the residual keeps its relative accuracy.
        let e = if x <= 0.0 {
            norm_cdf(x) - p
        } else {
            (1.0 - p) - norm_cdf(-x)
        };
        let u = e * SQRT_2PI * (0.5 * x * x).exp();
        let step = u / (1.0 + 0.5 * x * u);
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    x
}

/// log Γ(p) for p > 0.
pub fn log_gamma(p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::domain(format!("log_gamma needs p > 0, got {p}")));
    }
    Ok(libm::lgamma(p))
}

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 100_000;

/// E_p(x): distribution function of Ga(p, 1) at x, i.e. the regularized lower
/// incomplete gamma function.
///
/// Series for `x < p + 1`, Lentz continued fraction for the complement otherwise.
pub fn reg_gamma_cdf(p: f64, x: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::domain(format!(
            "gamma shape must be positive, got {p}"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!(
            "gamma cdf argument must be >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    // log of x^p e^{-x} / Γ(p)
    let log_prefactor = p * x.ln() - x - libm::lgamma(p);
    if x < p + 1.0 {
        let mut term = 1.0 / p;
        let mut sum = term;
        let mut n = 1.0;
        for _ in 0..GAMMA_MAX_ITER {
            term *= x / (p + n);
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                return Ok((log_prefactor.exp() * sum).min(1.0));
            }
            n += 1.0;
        }
        Err(Error::numeric(
            format!("incomplete gamma series did not converge for p={p}, x={x}"),
            Some(log_prefactor.exp() * sum),
        ))
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - p;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let i = i as f64;
            let an = -i * (i - p);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                let q = log_prefactor.exp() * h;
                return Ok((1.0 - q).max(0.0));
            }
        }
        Err(Error::numeric(
            format!("incomplete gamma continued fraction did not converge for p={p}, x={x}"),
            Some(1.0 - log_prefactor.exp() * h),
        ))
    }
}

/// Result of [`p_star`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PStar {
    pub value: f64,
    /// |E_p(a) - alpha| at `value`.
    pub residual: f64,
    /// Final bracket `[lo, hi]` containing the root.
    pub bracket: [f64; 2],
    /// Bracket expansions plus bisection steps.
    pub iterations: usize,
}

/// Maximum number of upper-bracket doublings in [`p_star`].
pub const P_STAR_MAX_EXPANSIONS: usize = 200;

/// The unique p > 0 with E_p(a) = alpha.
///
/// p ↦ E_p(a) decreases strictly from 1 (p → 0) to 0 (p → ∞). The lower
/// bracket uses 1 - E_p(a) ≤ p/a, so E_lo(a) > alpha whenever
/// lo < a(1 - alpha); the upper end starts at 1 and doubles.
pub fn p_star(alpha: Alpha, a: f64) -> Result<PStar> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain(format!("p_star needs a > 0, got {a}")));
    }
    let target = alpha.value();
    let g = |p: f64| reg_gamma_cdf(p, a).map(|e| e - target);

    let mut lo = 1e-8_f64.min(0.5 * a * (1.0 - target));
    let mut hi = 1.0_f64.max(2.0 * lo);
    let mut iterations = 0;
    if g(lo)? <= 0.0 {
        return Err(Error::numeric(
            format!("p_star lower bracket {lo} does not satisfy E_p(a) > alpha"),
            None,
        ));
    }
    while g(hi)? > 0.0 {
        iterations += 1;
        if iterations > P_STAR_MAX_EXPANSIONS {
            return Err(Error::numeric(
                format!("p_star bracket not found after {P_STAR_MAX_EXPANSIONS} expansions"),
                Some(hi),
            ));
        }
        lo = hi;
        hi *= 2.0;
    }

    let width_tol = 1e-13_f64.max(4.0 * f64::EPSILON * hi);
    // reg_gamma_cdf never fails inside a valid bracket; treat a failure as NaN so bisection stops.
    let b = bisect(|p| g(p).unwrap_or(f64::NAN), lo, hi, width_tol, 400).ok_or_else(|| {
        Error::numeric(
            format!("p_star bracket [{lo}, {hi}] lost its sign change"),
            None,
        )
    })?;
    iterations += b.iterations;

    let mut best = (b.root, g(b.root)?.abs());
    for cand in [b.lo, b.hi] {
        let r = g(cand)?.abs();
        if r < best.1 {
            best = (cand, r);
        }
    }
    Ok(PStar {
        value: best.0,
        residual: best.1,
        bracket: [b.lo, b.hi],
        iterations,
    })
}

/// m* = b - Φ⁻¹(alpha): the mean of the Gaussian base law whose tilts pin
/// `b + t` at level alpha.
pub fn m_star(alpha: Alpha, b: f64) -> f64 {
    b - std_normal_quantile(alpha)
}
