//! Numerical toolkit for exponential families whose tilts keep a fixed point
//! pinned at a fixed quantile level.
//!
//! - [`specfun`]: normal CDF/quantile, regularized incomplete gamma, `m*` and `p*`.
//! - [`quadrature`]: adaptive Gauss–Kronrod on finite and infinite intervals.
//! - [`nef`]: base measures, tilted laws, transforms and pinning residuals.
//! - [`characterize`]: the convolution kernels H and K, their transforms and roots.
//! - [`deny`]: discretized convolution fixed-point operators and projections.

pub mod characterize;
pub mod deny;
pub mod error;
pub mod nef;
pub mod quadrature;
pub mod roots;
pub mod specfun;
pub mod table;

pub use characterize::{AdditiveKernel, Kernel, MultiplicativeKernel, RootScan};
pub use deny::{DenyOperator, Grid, GridFunction, IterateOptions, OperatorReport, Projection};
pub use error::{Error, Result};
pub use nef::{BaseMeasure, Pin, ResidualReport, Support};
pub use quadrature::{Interval, QuadConfig, QuadResult};
pub use specfun::{Alpha, PStar};
pub use table::{parse_table, Table};
