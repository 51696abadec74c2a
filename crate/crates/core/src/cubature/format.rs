//! Plain-text ensemble files.
//!
//! ```text
//! d k t_claimed n_atoms
//! weight a_11 a_12 ... a_1d a_22 ... a_dd
//! ...
//! ```
//!
//! Numbers are written with 17 significant digits, so a write/read cycle is bit-exact.

use std::io::{BufRead, Write};

use super::WeightedEnsemble;
use crate::error::{Error, Result};
use crate::symcore::{spectral_decompose, sym_dim, Spectrum, SymMatrix};

/// Eigenvalues this close to 0 or 1 are snapped when the spectrum is rebuilt on read.
const SNAP_TOL: f64 = 1e-10;

pub fn write_ensemble<W: Write>(ens: &WeightedEnsemble, mut out: W) -> Result<()> {
    let lambda = super::AtomSource::spectrum(ens);
    writeln!(
        out,
        "{} {} {} {}",
        lambda.dim(),
        lambda.rank(),
        ens.claimed_strength(),
        ens.len()
    )?;
    for (a, w) in ens.atoms().iter().zip(ens.weights()) {
        write!(out, "{w:.16e}")?;
        for v in a.upper() {
            write!(out, " {v:.16e}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Reads an ensemble; the spectrum is taken from the first atom's eigenvalues, keeping
/// the `k` largest.
pub fn read_ensemble<R: BufRead>(input: R) -> Result<WeightedEnsemble> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let header = header?;
    let fields: Vec<usize> = header
        .split_whitespace()
        .map(|f| f.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(hline, format!("bad header: {e}")))?;
    let [d, k, t_claimed, n] = fields[..] else {
        return Err(parse_err(hline, "header must be `d k t_claimed n_atoms`"));
    };
    if d == 0 || k == 0 || k > d || n == 0 {
        return Err(parse_err(hline, "header values out of range"));
    }
    let width = sym_dim(d) + 1;
    let mut atoms = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(hline, format!("expected {n} atom lines")))?;
        let line = line?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(ln, e.to_string()))?;
        if vals.len() != width {
            return Err(parse_err(
                ln,
                format!("expected {width} numbers, found {}", vals.len()),
            ));
        }
        weights.push(vals[0]);
        atoms.push(SymMatrix::from_upper(d, &vals[1..]).map_err(|e| parse_err(ln, e.to_string()))?);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing data after the last atom"));
    }
    let ev = spectral_decompose(&atoms[0])?.values;
    let values: Vec<f64> = ev
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if i >= k || v.abs() <= SNAP_TOL {
                0.0
            } else if (v - 1.0).abs() <= SNAP_TOL {
                1.0
            } else {
                v
            }
        })
        .collect();
    let spectrum = Spectrum::new(values)?;
    WeightedEnsemble::new(spectrum, atoms, weights, t_claimed)
}
