use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "n,h,ndof,err_h1_u,err_l2_p,err_triple,rate_h1_u,wall_s";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub ndof: usize,
    pub err_h1_u: f64,
    pub err_l2_p: f64,
    pub err_triple: f64,
    pub wall_s: f64,
}

/// Per-mesh errors of a refinement study, coarsest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceReport {
    pub label: String,
    pub rows: Vec<ConvergenceRow>,
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_rate(h: &[f64], e: &[f64]) -> Result<f64> {
    if h.len() != e.len() || h.len() < 2 {
        return Err(Error::InvalidInput("rate fit needs at least two (h, e) pairs".into()));
    }
    if h.iter().chain(e).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput("rate fit needs positive finite values".into()));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("rate fit needs distinct mesh sizes".into()));
    }
    Ok(sxy / sxx)
}

/// Which error column a rate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorColumn {
    H1Velocity,
    L2Pressure,
    Triple,
}

impl ConvergenceReport {
    pub fn new(label: impl Into<String>) -> Self {
        Self { label: label.into(), rows: Vec::new() }
    }

    /// Appends a row; mesh sizes must strictly decrease.
    pub fn push(&mut self, row: ConvergenceRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if !(row.h < last.h) {
                return Err(Error::InvalidInput(format!("h must decrease: {} after {}", row.h, last.h)));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    fn column(&self, c: ErrorColumn) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match c {
                ErrorColumn::H1Velocity => r.err_h1_u,
                ErrorColumn::L2Pressure => r.err_l2_p,
                ErrorColumn::Triple => r.err_triple,
            })
            .collect()
    }

    /// Rate fitted over the three finest meshes (all meshes if fewer).
    pub fn fitted_rate(&self, c: ErrorColumn) -> Result<f64> {
        let k = self.rows.len().min(3);
        let start = self.rows.len() - k;
        let h: Vec<f64> = self.rows[start..].iter().map(|r| r.h).collect();
        fit_rate(&h, &self.column(c)[start..])
    }

    /// Pairwise H1 rate between consecutive meshes; `None` for the first.
    pub fn local_rates(&self) -> Vec<Option<f64>> {
        (0..self.rows.len())
            .map(|i| {
                if i == 0 {
                    return None;
                }
                let (a, b) = (&self.rows[i - 1], &self.rows[i]);
                Some((a.err_h1_u / b.err_h1_u).ln() / (a.h / b.h).ln())
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(CSV_HEADER);
        s.push('\n');
        for (r, rate) in self.rows.iter().zip(self.local_rates()) {
            let rate = rate.map_or_else(|| "nan".to_string(), fmt_float);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.n,
                fmt_float(r.h),
                r.ndof,
                fmt_float(r.err_h1_u),
                fmt_float(r.err_l2_p),
                fmt_float(r.err_triple),
                rate,
                fmt_float(r.wall_s)
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(label: impl Into<String>, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::InvalidInput("unexpected CSV header".into()));
        }
        let mut report = Self::new(label);
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(Error::InvalidInput(format!("line {}: expected 8 fields", i + 2)));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|e| Error::InvalidInput(format!("line {}: {e}", i + 2)))
            };
            let int = |s: &str| -> Result<usize> {
                s.parse::<usize>().map_err(|e| Error::InvalidInput(format!("line {}: {e}", i + 2)))
            };
            report.push(ConvergenceRow {
                n: int(f[0])?,
                h: num(f[1])?,
                ndof: int(f[2])?,
                err_h1_u: num(f[3])?,
                err_l2_p: num(f[4])?,
                err_triple: num(f[5])?,
                wall_s: num(f[7])?,
            })?;
        }
        Ok(report)
    }
}

/// 17 significant digits, round-trip exact.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Closed interval an observed rate must fall into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBand {
    pub min: f64,
    pub max: f64,
}

impl RateBand {
    pub fn around(center: f64, half_width: f64) -> Self {
        Self { min: center - half_width, max: center + half_width }
    }

    pub fn at_least(min: f64) -> Self {
        Self { min, max: f64::INFINITY }
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.min && r <= self.max
    }
}

impl std::fmt::Display for RateBand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.max.is_infinite() {
            write!(f, ">= {}", self.min)
        } else {
            write!(f, "[{}, {}]", self.min, self.max)
        }
    }
}
