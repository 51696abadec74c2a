//! Recovery of `xx^T` from `<xx^T, P_j>`: the measurement map, a PSD feasibility solver,
//! isometry diagnostics and dual certificates.

mod certificate;
mod isometry;
mod solver;

pub use certificate::{
    check_certificate, default_batch_size, golfing_certificate, golfing_depth, CertificateCheck,
    CertificateReport, GolfingParams,
};
pub use isometry::{
    deterministic_guarantee, isometry_constants, r_operator, truncated_r, truncated_r_at,
    truncation_threshold, GuaranteeVerdict, IsometryConstants,
};
pub use solver::{solve_feasibility, RecoveryResult};

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symcore::{eigen_of, sym_dim, SymMatrix};

/// Measurements `b_j = <xx^T, P_j>` together with the trace constraint `|x|^2`.
#[derive(Clone, Debug)]
pub struct MeasurementSet {
    matrices: Vec<SymMatrix>,
    values: Vec<f64>,
    trace_value: f64,
}

impl MeasurementSet {
    pub fn new(matrices: Vec<SymMatrix>, values: Vec<f64>, trace_value: f64) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one measurement is required".into(),
            ));
        }
        if matrices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: matrices.len(),
                found: values.len(),
            });
        }
        let d = matrices[0].dim();
        if let Some(bad) = matrices.iter().find(|m| m.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        if !trace_value.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            matrices,
            values,
            trace_value,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[SymMatrix] {
        &self.matrices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn trace_value(&self) -> f64 {
        self.trace_value
    }

    /// Largest violation over the trace constraint and every measurement.
    pub fn max_violation(&self, x: &SymMatrix) -> f64 {
        let mut worst = (x.trace() - self.trace_value).abs();
        for (p, b) in self.matrices.iter().zip(&self.values) {
            worst = worst.max((x.as_matrix().dot(p.as_matrix()) - b).abs());
        }
        worst
    }

    /// Header `d k n trace_value`, then one line per measurement: the value followed by
    /// the upper triangle of `P_j`, row-major.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let k = max_rank(&self.matrices)?;
        writeln!(
            out,
            "{} {} {} {:.16e}",
            self.dim(),
            k,
            self.len(),
            self.trace_value
        )?;
        for (p, b) in self.matrices.iter().zip(&self.values) {
            write!(out, "{b:.16e}")?;
            for v in p.upper() {
                write!(out, " {v:.16e}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (hl, header) = lines
            .next()
            .ok_or_else(|| perr(1, "missing header".into()))?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(perr(hl, "header must be `d k n trace_value`".into()));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| perr(hl, e.to_string()));
        let (d, _k, n) = (int(fields[0])?, int(fields[1])?, int(fields[2])?);
        let trace_value: f64 = fields[3].parse().map_err(|e| perr(hl, format!("{e}")))?;
        let width = sym_dim(d) + 1;
        let mut matrices = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| perr(hl, format!("expected {n} measurement lines")))?;
            let vals: Vec<f64> = line?
                .split_whitespace()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| perr(ln, e.to_string()))?;
            if vals.len() != width {
                return Err(perr(
                    ln,
                    format!("expected {width} numbers, found {}", vals.len()),
                ));
            }
            values.push(vals[0]);
            matrices
                .push(SymMatrix::from_upper(d, &vals[1..]).map_err(|e| perr(ln, e.to_string()))?);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(perr(ln, "trailing data after the last measurement".into()));
        }
        Self::new(matrices, values, trace_value)
    }
}

/// `b_j = x^T P_j x` and `trace_value = |x|^2`.
pub fn measure(x: &DVector<f64>, ps: &[SymMatrix]) -> Result<MeasurementSet> {
    for p in ps {
        if p.dim() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: p.dim(),
            });
        }
    }
    let values = ps.iter().map(|p| p.quad_form(x)).collect();
    MeasurementSet::new(ps.to_vec(), values, x.norm_squared())
}

/// Numerical rank (eigenvalues above `1e-10` times the largest) maximized over the set.
pub(crate) fn max_rank(ps: &[SymMatrix]) -> Result<usize> {
    let mut k = 0;
    for p in ps {
        let e = eigen_of(p.as_matrix().clone())?;
        let top = e.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let r = e.values.iter().filter(|v| v.abs() > 1e-10 * top).count();
        k = k.max(r);
    }
    Ok(k)
}

/// Rows `svec(M)` stacked into an `n x D` matrix.
pub(crate) fn svec_rows(ms: &[SymMatrix]) -> DMatrix<f64> {
    let big = sym_dim(ms[0].dim());
    let mut a = DMatrix::zeros(ms.len(), big);
    for (r, m) in ms.iter().enumerate() {
        a.row_mut(r).copy_from(&m.svec().transpose());
    }
    a
}
