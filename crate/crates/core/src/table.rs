//! Two-column numeric text format shared by tabulated base measures and grid
//! functions.
//!
//! One `x value` pair per line, separated by whitespace or a comma. Blank
//! lines and lines starting with `#` are ignored. The `x` column must be
//! strictly increasing and uniformly spaced.

use std::io::{self, Write};

use crate::error::{Error, Result};

/// Relative tolerance on the spacing of the `x` column.
pub const SPACING_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Table {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Spacing of the (validated) uniform `x` column.
    pub fn spacing(&self) -> f64 {
        (self.xs[self.xs.len() - 1] - self.xs[0]) / (self.xs.len() - 1) as f64
    }
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 2 columns, found {}", fields.len()),
            });
        }
        let mut nums = [0.0; 2];
        for (slot, field) in nums.iter_mut().zip(&fields) {
            *slot = field.parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("not a number: {field:?}"),
            })?;
            if !slot.is_finite() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
        }
        xs.push(nums[0]);
        ys.push(nums[1]);
    }
    let table = Table { xs, ys };
    validate_uniform(&table.xs)?;
    Ok(table)
}

/// Checks that `xs` has at least 3 strictly increasing, uniformly spaced entries.
pub fn validate_uniform(xs: &[f64]) -> Result<()> {
    if xs.len() < 3 {
        return Err(Error::Parse {
            line: 0,
            message: format!("need at least 3 rows, found {}", xs.len()),
        });
    }
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    if !(h > 0.0) {
        return Err(Error::Parse {
            line: 0,
            message: "x column must be strictly increasing".into(),
        });
    }
    for (i, w) in xs.windows(2).enumerate() {
        let d = w[1] - w[0];
        if !(d > 0.0) {
            return Err(Error::Parse {
                line: i + 2,
                message: "x column must be strictly increasing".into(),
            });
        }
        if (d - h).abs() > SPACING_RTOL * h {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("non-uniform spacing: step {d} vs mean {h}"),
            });
        }
    }
    Ok(())
}

/// Writes `xs`/`ys` in the two-column format with 17 significant digits.
pub fn write_table<W: Write>(
    mut out: W,
    header: Option<&str>,
    xs: &[f64],
    ys: &[f64],
) -> io::Result<()> {
    if let Some(h) = header {
        for line in h.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    for (x, y) in xs.iter().zip(ys) {
        writeln!(out, "{x:.16e} {y:.16e}")?;
    }
    Ok(())
}
