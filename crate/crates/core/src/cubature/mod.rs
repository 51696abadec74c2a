//! Ensembles on the orbit `{O D_lambda O^T}`: Haar sampling, finitely supported weighted
//! ensembles, strength verification and moment-matching construction.

mod construct;
mod format;
mod verify;

pub use construct::{construct_cubature, Construction};
pub use format::{read_ensemble, write_ensemble};
pub use verify::{
    verify_strength, verify_tight_fusion, VerificationReport, VerifyKind, VerifyMode,
    EXACT_DIM_LIMIT,
};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::symcore::{spectral_decompose, Spectrum, SymMatrix};

/// Tolerance on `|sum w - 1|`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Tolerance on atom eigenvalues against the spectrum.
pub const ATOM_SPECTRUM_TOL: f64 = 1e-8;

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix, with each column of `Q`
/// multiplied by the sign of the matching diagonal entry of `R`.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for i in 0..d {
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
        }
    }
    q
}

/// `O D_lambda O^T` for a Haar-random `O`.
pub fn haar_sample<R: Rng + ?Sized>(lambda: &Spectrum, rng: &mut R) -> SymMatrix {
    let o = haar_orthogonal(lambda.dim(), rng);
    atom_from_frame(lambda, &o)
}

/// `sum_i lambda_i o_i o_i^T` over the nonzero part of the spectrum.
pub(crate) fn atom_from_frame(lambda: &Spectrum, o: &DMatrix<f64>) -> SymMatrix {
    let k = lambda.rank();
    let cols = o.columns(0, k);
    let mut scaled = cols.clone_owned();
    for (i, &l) in lambda.values()[..k].iter().enumerate() {
        scaled.column_mut(i).scale_mut(l);
    }
    SymMatrix::symmetrized(scaled * cols.transpose())
}

/// Uniform point on the unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 0.0 {
            return v / n;
        }
    }
}

/// Gaussian symmetric matrix normalized to unit Frobenius norm.
pub fn random_unit_sym<R: Rng + ?Sized>(d: usize, rng: &mut R) -> SymMatrix {
    loop {
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = SymMatrix::symmetrized(&g + g.transpose());
        let n = s.frobenius_norm();
        if n > 0.0 {
            return s.scaled(1.0 / n);
        }
    }
}

/// Anything that produces i.i.d. measurement matrices on a fixed orbit.
pub trait AtomSource {
    fn spectrum(&self) -> &Spectrum;
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SymMatrix;

    fn draw_many<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<SymMatrix> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

/// The continuous orthogonally invariant measure itself.
#[derive(Clone, Debug)]
pub struct HaarSource {
    spectrum: Spectrum,
}

impl HaarSource {
    pub fn new(spectrum: Spectrum) -> Self {
        Self { spectrum }
    }
}

impl AtomSource for HaarSource {
    fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SymMatrix {
        haar_sample(&self.spectrum, rng)
    }
}

/// A finitely supported probability measure on the orbit of `D_lambda`.
#[derive(Clone, Debug)]
pub struct WeightedEnsemble {
    spectrum: Spectrum,
    atoms: Vec<SymMatrix>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    claimed_strength: usize,
}

impl WeightedEnsemble {
    /// Validates that every atom lies on the orbit and the weights form a distribution.
    /// `claimed_strength` is informational (0 when unknown).
    pub fn new(
        spectrum: Spectrum,
        atoms: Vec<SymMatrix>,
        weights: Vec<f64>,
        claimed_strength: usize,
    ) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter(
                "ensemble needs at least one atom".into(),
            ));
        }
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total = compensated_sum(&weights);
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {total:.17}, not 1"
            )));
        }
        let d = spectrum.dim();
        for (j, a) in atoms.iter().enumerate() {
            if a.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: a.dim(),
                });
            }
            let ev = spectral_decompose(a)?.values;
            let dev = ev
                .iter()
                .zip(spectrum.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if dev > ATOM_SPECTRUM_TOL {
                return Err(Error::InvalidSpectrum(format!(
                    "atom {j} deviates from the spectrum by {dev:.3e}"
                )));
            }
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            spectrum,
            atoms,
            weights,
            cumulative,
            claimed_strength,
        })
    }

    /// Equal weights on the given atoms.
    pub fn uniform(spectrum: Spectrum, atoms: Vec<SymMatrix>) -> Result<Self> {
        let n = atoms.len().max(1);
        let weights = vec![1.0 / n as f64; atoms.len()];
        Self::new(spectrum, atoms, weights, 0)
    }

    pub fn atoms(&self) -> &[SymMatrix] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    pub fn claimed_strength(&self) -> usize {
        self.claimed_strength
    }

    /// Index of the atom selected by `u` in `[0, 1)` under inverse-CDF sampling.
    fn select(&self, u: f64) -> usize {
        let total = *self.cumulative.last().unwrap();
        let target = u * total;
        let idx = self.cumulative.partition_point(|&c| c <= target);
        if idx < self.atoms.len() {
            idx
        } else {
            self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
        }
    }

    /// `n` independent draws; atom `j` has probability `w_j`.
    pub fn draw_iid<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<SymMatrix> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

impl AtomSource for WeightedEnsemble {
    fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SymMatrix {
        let u: f64 = rng.random();
        self.atoms[self.select(u)].clone()
    }
}

/// Neumaier summation; plain accumulation drifts by ~1e-12 over 1e5 equal weights.
pub(crate) fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0_f64;
    let mut c = 0.0_f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// `(C(d(d+1)/2 + t - 1, t), C(d + 2t - 1, 2t))`: the dimension of degree-`t` polynomials
/// on the symmetric matrices, and of degree-`2t` forms in `d` variables.
pub fn pol_dim_bounds(d: usize, t: usize) -> Result<(u64, u64)> {
    if d == 0 || t == 0 {
        return Err(Error::InvalidParameter("d and t must be at least 1".into()));
    }
    let (d, t) = (d as u64, t as u64);
    let big = d * (d + 1) / 2;
    Ok((binomial(big + t - 1, t), binomial(d + 2 * t - 1, 2 * t)))
}

/// All nondecreasing index tuples of length `t` over `0..n`.
pub(crate) fn multisets(n: usize, t: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, t, &mut Vec::new(), &mut out);
    out
}
