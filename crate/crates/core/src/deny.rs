//! Discretized convolution fixed-point operators `f ↦ κ ∗ f`.
//!
//! The additive operator convolves with H on a uniform x-grid. The
//! multiplicative operator `(Sg)(t) = ∫K(t/y)g(y)dy/y` is applied to g
//! sampled on a uniform grid in v = log t: with `G(v) = e^v·g(e^v)` it becomes
//! a plain convolution of G with `K(e^z)e^z`, and its fixed points `t⁻¹`,
//! `t^{p*-2}` become `1`, `e^{(p*-1)v}`. Residuals of the multiplicative
//! operator are measured on G.
//!
//! The trapezoid sum is corrected for the kink of both kernels at 0, which
//! would otherwise limit accuracy to O(h²). Values beyond the grid are taken
//! as 0, so results are accurate only on the interior, where the kernel window
//! (all but 1e-10 of the mass of κ and of its exponential conjugate
//! `κ(z)e^{rz}`) stays inside the grid.

use std::io::{self, Write};

use serde::Serialize;

use crate::characterize::{AdditiveKernel, Kernel, MultiplicativeKernel};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_with, Interval, QuadConfig};
use crate::table::{write_table, Table};

/// Kernel mass allowed outside the window (split between the two sides).
pub const KERNEL_TAIL: f64 = 1e-10;
/// Smallest grid accepted.
pub const MIN_POINTS: usize = 16;
/// Below this size the second basis exponent counts as degenerate.
pub const DEGENERATE_EXPONENT: f64 = 1e-6;
/// Evaluation window used with the iteration grids.
pub const ITERATION_WINDOW: [f64; 2] = [-10.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config(format!("invalid grid range [{lo}, {hi}]")));
        }
        if n < MIN_POINTS {
            return Err(Error::config(format!(
                "grid needs at least {MIN_POINTS} points, got {n}"
            )));
        }
        Ok(Grid { lo, hi, n })
    }

    /// x ∈ [-20, 20], spacing 0.01.
    pub fn standard_additive() -> Self {
        Grid {
            lo: -20.0,
            hi: 20.0,
            n: 4001,
        }
    }

    /// v = log t ∈ [-40, 8], spacing 0.01. The left margin must hold the
    /// slowly decaying `e^{p*z}` tail of log-K.
    pub fn standard_log() -> Self {
        Grid {
            lo: -40.0,
            hi: 8.0,
            n: 4801,
        }
    }

    /// x ∈ [-120, 120], spacing 0.02. Zero truncation loses mass at the grid
    /// ends on every step; this leaves 50 iterations of margin around
    /// [`ITERATION_WINDOW`].
    pub fn iteration_additive() -> Self {
        Grid {
            lo: -120.0,
            hi: 120.0,
            n: 12001,
        }
    }

    /// v ∈ [-150, 200], spacing 0.025. The wide right margin is for the
    /// `e^{z}` left tail of the kernel conjugate to `t^{p*-2}`.
    pub fn iteration_log() -> Self {
        Grid {
            lo: -150.0,
            hi: 200.0,
            n: 14001,
        }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i == self.n - 1 {
            self.hi
        } else {
            self.lo + self.step() * i as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Indices of the nodes inside `[a, b]` (with a 1e-9 step tolerance).
    fn index_range(&self, a: f64, b: f64) -> Option<(usize, usize)> {
        let h = self.step();
        let first = ((a - self.lo) / h - 1e-9).ceil().max(0.0) as usize;
        let last = ((b - self.lo) / h + 1e-9).floor();
        if last < 0.0 {
            return None;
        }
        let last = (last as usize).min(self.n - 1);
        (first <= last).then_some((first, last))
    }
}

/// Samples of a function on a uniform grid.
///
/// Values may be signed so that perturbations and differences can be
/// represented; [`GridFunction::is_nonnegative`] checks positivity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::config(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.n
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("non-finite value at grid index {i}")));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn from_table(table: &Table) -> Result<Self> {
        let grid = Grid::new(table.xs[0], table.xs[table.len() - 1], table.len())?;
        Self::new(grid, table.ys.clone())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn write<W: Write>(&self, out: W, header: Option<&str>) -> io::Result<()> {
        write_table(out, header, &self.grid.points(), &self.values)
    }
}

/// Smallest `[lo, hi]` (to 1e-3) outside which κ and `κ(z)e^{rz}` each have
/// at most `KERNEL_TAIL / 2` mass per side.
pub fn kernel_window(kernel: &Kernel) -> Result<[f64; 2]> {
    let r = kernel.conv_root();
    let target = 0.5 * KERNEL_TAIL;
    let cfg = QuadConfig::with_tol(1e-16).rel_tol(1e-6);
    let tail = |z: f64, left: bool| -> Result<f64> {
        let dom = if left {
            Interval::up_to(z)?
        } else {
            Interval::from(z)?
        };
        let plain = integrate_with(|x: f64| kernel.conv_density(x), dom, &cfg)?.value;
        let tilted = integrate_with(
            |x: f64| {
                let d = kernel.conv_density(x);
                if d == 0.0 {
                    0.0
                } else {
                    d * (r * x).exp()
                }
            },
            dom,
            &cfg,
        )?
        .value;
        Ok(plain.max(tilted))
    };
    let side = |sign: f64| -> Result<f64> {
        let left = sign < 0.0;
        let mut inner = 0.0;
        let mut outer = sign;
        while tail(outer, left)? > target {
            inner = outer;
            outer *= 2.0;
            if outer.abs() > 1e4 {
                return Err(Error::numeric(
                    "kernel tail does not decay within |z| < 1e4",
                    None,
                ));
            }
        }
        while (outer - inner).abs() > 1e-3 {
            let mid = 0.5 * (inner + outer);
            if tail(mid, left)? > target {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        Ok(outer)
    };
    Ok([side(-1.0)?, side(1.0)?])
}

/// A convolution operator bound to a kernel and a grid.
#[derive(Debug, Clone)]
pub struct DenyOperator {
    kernel: Kernel,
    grid: Grid,
    window: [f64; 2],
    k_lo: isize,
    /// `weights[k - k_lo]` multiplies `f(t_i - k h)`.
    weights: Vec<f64>,
    interior: (usize, usize),
}

impl DenyOperator {
    pub fn new(kernel: Kernel, grid: Grid) -> Result<Self> {
        let window = kernel_window(&kernel)?;
        Self::with_window(kernel, grid, window)
    }

    fn with_window(kernel: Kernel, grid: Grid, window: [f64; 2]) -> Result<Self> {
        let h = grid.step();
        let k_lo = (window[0] / h).floor() as isize;
        let k_hi = (window[1] / h).ceil() as isize;
        let i_min = k_hi;
        let i_max = grid.n as isize - 1 + k_lo;
        if i_min > i_max {
            return Err(Error::config(format!(
                "grid [{}, {}] has no interior: the kernel reaches [{:.3}, {:.3}], so the grid needs a left margin of {:.3}, a right margin of {:.3} and a width above {:.3}",
                grid.lo,
                grid.hi,
                window[0],
                window[1],
                window[1],
                -window[0],
                window[1] - window[0]
            )));
        }
        let mut weights: Vec<f64> = (k_lo..=k_hi)
            .map(|k| h * kernel.conv_density(k as f64 * h))
            .collect();
        // Euler–Maclaurin term for the derivative jump of κ at z = 0.
        weights[(-k_lo) as usize] += h * h / 12.0 * kernel.kink_jump();
        Ok(DenyOperator {
            kernel,
            grid,
            window,
            k_lo,
            weights,
            interior: (i_min as usize, i_max as usize),
        })
    }

    pub fn additive(kernel: AdditiveKernel, grid: Grid) -> Result<Self> {
        Self::new(Kernel::Additive(kernel), grid)
    }

    pub fn multiplicative(kernel: MultiplicativeKernel, grid: Grid) -> Result<Self> {
        Self::new(Kernel::Multiplicative(kernel), grid)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Kernel window in the convolution variable.
    pub fn window(&self) -> [f64; 2] {
        self.window
    }

    pub fn interior_range(&self) -> [f64; 2] {
        [
            self.grid.point(self.interior.0),
            self.grid.point(self.interior.1),
        ]
    }

    fn is_multiplicative(&self) -> bool {
        matches!(self.kernel, Kernel::Multiplicative(_))
    }

    /// Samples in the representation the convolution acts on.
    fn to_conv(&self, f: &GridFunction) -> Vec<f64> {
        if self.is_multiplicative() {
            f.values
                .iter()
                .enumerate()
                .map(|(i, v)| v * self.grid.point(i).exp())
                .collect()
        } else {
            f.values.clone()
        }
    }

    fn from_conv(&self, values: Vec<f64>) -> Vec<f64> {
        if self.is_multiplicative() {
            values
                .iter()
                .enumerate()
                .map(|(i, v)| v * (-self.grid.point(i)).exp())
                .collect()
        } else {
            values
        }
    }

    fn convolve(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len() as isize;
        (0..n)
            .map(|i| {
                // j = i - k must stay in [0, n).
                let k_first = (i - (n - 1)).max(self.k_lo);
                let k_last = i.min(self.k_lo + self.weights.len() as isize - 1);
                let mut acc = 0.0;
                for k in k_first..=k_last {
                    acc += self.weights[(k - self.k_lo) as usize] * f[(i - k) as usize];
                }
                acc
            })
            .collect()
    }

    fn check_grid(&self, f: &GridFunction) -> Result<()> {
        if f.grid == self.grid {
            Ok(())
        } else {
            Err(Error::config(
                "grid function does not live on the operator's grid",
            ))
        }
    }

    /// Applies the operator once; accurate on the interior only.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check_grid(f)?;
        let out = self.from_conv(self.convolve(&self.to_conv(f)));
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("operator output overflowed", None));
        }
        GridFunction::new(self.grid, out)
    }

    fn window_indices(&self, window: Option<[f64; 2]>) -> Result<(usize, usize)> {
        let Some([a, b]) = window else {
            return Ok(self.interior);
        };
        let [ia, ib] = self.interior_range();
        let tol = 1e-9 * self.grid.step();
        if !(a < b) || a < ia - tol || b > ib + tol {
            return Err(Error::config(format!(
                "evaluation window [{a}, {b}] must lie inside the interior [{ia}, {ib}]"
            )));
        }
        self.grid.index_range(a, b).ok_or_else(|| {
            Error::config(format!(
                "evaluation window [{a}, {b}] contains no grid point"
            ))
        })
    }

    /// `sup |Tf - f|` over the interior, in the convolution representation.
    pub fn residual(&self, f: &GridFunction) -> Result<f64> {
        self.check_grid(f)?;
        let g = self.to_conv(f);
        let tg = self.convolve(&g);
        let (a, b) = self.interior;
        Ok(sup_diff(&tg[a..=b], &g[a..=b]))
    }

    /// Runs `n_iters` steps of `f ← Tf` and records residuals before each step
    /// and after the last.
    pub fn iterate(
        &self,
        f0: &GridFunction,
        n_iters: usize,
        opts: &IterateOptions,
    ) -> Result<OperatorReport> {
        self.check_grid(f0)?;
        if n_iters == 0 {
            return Err(Error::config("iteration count must be at least 1"));
        }
        let (a, b) = self.window_indices(opts.window)?;
        let mut f = self.to_conv(f0);
        let mut residuals = Vec::with_capacity(n_iters + 1);
        let mut relative_residuals = Vec::with_capacity(n_iters + 1);
        let mut orthogonal_residuals = Vec::new();
        let mut projections = Vec::new();
        for step in 0..=n_iters {
            let tf = self.convolve(&f);
            if tf.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(
                    format!("iterate overflowed at iteration {step}"),
                    None,
                ));
            }
            let res = sup_diff(&tf[a..=b], &f[a..=b]);
            let scale = f[a..=b].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            residuals.push(res);
            relative_residuals.push(if scale > 0.0 { res / scale } else { res });
            if opts.project {
                let p = self.project_conv(&f, (a, b), opts.collapse)?;
                orthogonal_residuals.push(p.orthogonal_residual);
                projections.push(p.coefficients);
            }
            if step < n_iters {
                f = tf;
            }
        }
        let final_function = GridFunction::new(self.grid, self.from_conv(f))?;
        Ok(OperatorReport {
            interior_range: self.interior_range(),
            window: [self.grid.point(a), self.grid.point(b)],
            sup_residual: *residuals.last().unwrap(),
            residuals,
            relative_residuals,
            orthogonal_residuals,
            projections,
            final_function,
        })
    }

    /// Least-squares fit of f by the fixed-point basis over the window
    /// (default: the interior), with nonnegative coefficients.
    pub fn project(
        &self,
        f: &GridFunction,
        window: Option<[f64; 2]>,
        collapse: bool,
    ) -> Result<Projection> {
        self.check_grid(f)?;
        let idx = self.window_indices(window)?;
        self.project_conv(&self.to_conv(f), idx, collapse)
    }

    fn project_conv(
        &self,
        g: &[f64],
        (a, b): (usize, usize),
        collapse: bool,
    ) -> Result<Projection> {
        let r = self.kernel.conv_root();
        let collapsed = collapse || r == 0.0;
        if !collapsed && r.abs() < DEGENERATE_EXPONENT {
            return Err(Error::config(format!(
                "basis exponent {r:e} is nearly degenerate; request the one-function basis explicitly"
            )));
        }
        let vs: Vec<f64> = (a..=b).map(|i| self.grid.point(i)).collect();
        let y = &g[a..=b];
        let ones = vec![1.0; vs.len()];
        let expo: Vec<f64> = vs.iter().map(|v| (-r * v).exp()).collect();
        let coefficients = if collapsed {
            [least_squares(&[&ones], y)[0].max(0.0), 0.0]
        } else {
            let c = least_squares(&[&ones, &expo], y);
            if c[0] >= 0.0 && c[1] >= 0.0 {
                [c[0], c[1]]
            } else {
                let only0 = least_squares(&[&ones], y)[0].max(0.0);
                let only1 = least_squares(&[&expo], y)[0].max(0.0);
                let err0 = sup_fit_error(y, &[(&ones, only0)]);
                let err1 = sup_fit_error(y, &[(&expo, only1)]);
                if err0 <= err1 {
                    [only0, 0.0]
                } else {
                    [0.0, only1]
                }
            }
        };
        let orthogonal_residual =
            sup_fit_error(y, &[(&ones, coefficients[0]), (&expo, coefficients[1])]);
        Ok(Projection {
            coefficients,
            orthogonal_residual,
            collapsed,
            range: [vs[0], vs[vs.len() - 1]],
        })
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn sup_fit_error(y: &[f64], terms: &[(&Vec<f64>, f64)]) -> f64 {
    (0..y.len())
        .map(|i| (y[i] - terms.iter().map(|(b, c)| c * b[i]).sum::<f64>()).abs())
        .fold(0.0, f64::max)
}

/// Least squares via modified Gram–Schmidt (applied twice for stability).
fn least_squares(basis: &[&Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = basis.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = vec![vec![0.0; k]; k];
    for (j, b) in basis.iter().enumerate() {
        let mut v = (*b).clone();
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let d = dot(qi, &v);
                r[i][j] += d;
                for (vv, qq) in v.iter_mut().zip(qi) {
                    *vv -= d * qq;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        r[j][j] = norm;
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        q.push(v);
    }
    let qty: Vec<f64> = q.iter().map(|qi| dot(qi, y)).collect();
    let mut c = vec![0.0; k];
    for j in (0..k).rev() {
        let s: f64 = (j + 1..k).map(|l| r[j][l] * c[l]).sum();
        c[j] = if r[j][j] > 0.0 {
            (qty[j] - s) / r[j][j]
        } else {
            0.0
        };
    }
    c
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IterateOptions {
    /// Where residuals are measured; defaults to the interior.
    pub window: Option<[f64; 2]>,
    /// Also project each iterate onto the fixed-point basis.
    pub project: bool,
    pub collapse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    /// Coefficients of (1, e^{-mx}) or (t⁻¹, t^{p*-2}).
    pub coefficients: [f64; 2],
    /// Sup-norm of the remainder over `range`.
    pub orthogonal_residual: f64,
    pub collapsed: bool,
    pub range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorReport {
    pub interior_range: [f64; 2],
    pub window: [f64; 2],
    /// Residual after the last iteration.
    pub sup_residual: f64,
    /// `sup |Tf_k - f_k|` over the window for k = 0..=n_iters.
    pub residuals: Vec<f64>,
    /// The same divided by `sup |f_k|`.
    pub relative_residuals: Vec<f64>,
    pub orthogonal_residuals: Vec<f64>,
    pub projections: Vec<[f64; 2]>,
    #[serde(skip)]
    pub final_function: GridFunction,
}

/// `∫H(t-x)f(x)dx` on f's grid.
pub fn apply_additive(kernel: &AdditiveKernel, f: &GridFunction) -> Result<GridFunction> {
    DenyOperator::additive(*kernel, f.grid)?.apply(f)
}

/// `∫K(t/y)g(y)dy/y` for g sampled as `v ↦ g(e^v)`.
pub fn apply_multiplicative(
    kernel: &MultiplicativeKernel,
    g: &GridFunction,
) -> Result<GridFunction> {
    DenyOperator::multiplicative(*kernel, g.grid)?.apply(g)
}
