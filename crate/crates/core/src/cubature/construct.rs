//! Finite cubatures by moment matching over a random Haar pool.
//!
//! Each pool atom contributes one column of moment values; nonnegative least squares
//! finds weights reproducing the analytic moments, near-zero weights are pruned, and the
//! support is re-solved and renormalized before an independent verification pass.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{
    atom_from_frame, compensated_sum, haar_orthogonal, multisets, pol_dim_bounds, verify_strength,
    VerificationReport, VerifyMode, WeightedEnsemble, EXACT_DIM_LIMIT,
};
use crate::error::{Error, Result};
use crate::moments::{coefficient_moment, cross_moment, dirichlet_moment, MomentCoefficients};
use crate::nnls::nnls;
use crate::symcore::{sym_basis, sym_dim, Spectrum, SymMatrix};
use crate::zonal::MAX_ZONAL_DEGREE;

/// Weights below this are dropped before the support is re-solved.
pub const PRUNE_THRESHOLD: f64 = 1e-10;
/// Probe count for randomized post-construction checks.
const RANDOMIZED_PROBES: usize = 2000;

#[derive(Clone, Debug)]
pub struct Construction {
    pub ensemble: WeightedEnsemble,
    pub verification: VerificationReport,
    pub pool_size: usize,
    /// Euclidean residual of the row-normalized moment system after the final solve.
    pub fit_residual: f64,
}

impl Construction {
    pub fn support(&self) -> usize {
        self.ensemble.len()
    }
}

/// Moment rows for one pool: `rows x pool` design matrix and targets.
struct MomentSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl MomentSystem {
    /// Scales every row to unit norm; rows that vanish on the pool are kept as is.
    fn normalized(mut self) -> Self {
        for r in 0..self.a.nrows() {
            let n = self.a.row(r).norm();
            if n > 0.0 {
                self.a.row_mut(r).scale_mut(1.0 / n);
                self.b[r] /= n;
            }
        }
        self
    }

    fn restricted(&self, cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.a.nrows(), cols.len(), |r, c| self.a[(r, cols[c])])
    }
}

/// All basis-tuple moments of strengths `1..=t`, plus the normalization row.
fn full_system(lambda: &Spectrum, t: usize, atoms: &[SymMatrix]) -> Result<MomentSystem> {
    let d = lambda.dim();
    let basis = sym_basis(d);
    let coeffs = MomentCoefficients::new(lambda).ok();
    let coords: Vec<DVector<f64>> = atoms.iter().map(|a| a.svec()).collect();
    let tuples: Vec<Vec<usize>> = (1..=t).flat_map(|s| multisets(sym_dim(d), s)).collect();
    let rows = tuples.len() + 1;
    let mut a = DMatrix::zeros(rows, atoms.len());
    let mut b = DVector::zeros(rows);
    for (r, tuple) in tuples.iter().enumerate() {
        let args: Vec<SymMatrix> = tuple.iter().map(|&i| basis[i].clone()).collect();
        b[r] = match &coeffs {
            Some(c) => coefficient_moment(c, &args)?,
            None => cross_moment(lambda, &args)?,
        };
        for (j, c) in coords.iter().enumerate() {
            a[(r, j)] = tuple.iter().map(|&i| c[i]).product();
        }
    }
    a.row_mut(rows - 1).fill(1.0);
    b[rows - 1] = 1.0;
    Ok(MomentSystem { a, b })
}

/// Rank-one atoms `v v^T` with `|v|^2 = lambda_1`: matching every degree-`2t` monomial of
/// `v` is equivalent to matching all degree-`t` moments in the matrix entries.
fn rank_one_system(lambda: &Spectrum, t: usize, vectors: &[DVector<f64>]) -> Result<MomentSystem> {
    let d = lambda.dim();
    let scale = lambda.values()[0].powi(t as i32);
    let monomials = multisets(d, 2 * t);
    let rows = monomials.len() + 1;
    let mut a = DMatrix::zeros(rows, vectors.len());
    let mut b = DVector::zeros(rows);
    for (r, mono) in monomials.iter().enumerate() {
        let mut exps = vec![0usize; d];
        for &i in mono {
            exps[i] += 1;
        }
        b[r] = if exps.iter().all(|e| e % 2 == 0) {
            let half: Vec<usize> = exps.iter().map(|e| e / 2).collect();
            scale * dirichlet_moment(d, &half)?
        } else {
            0.0
        };
        for (j, v) in vectors.iter().enumerate() {
            a[(r, j)] = mono.iter().map(|&i| v[i]).product();
        }
    }
    a.row_mut(rows - 1).fill(1.0);
    b[rows - 1] = 1.0;
    Ok(MomentSystem { a, b })
}

/// Builds a weighted ensemble of strength `t` from `pool_size` Haar atoms and verifies it.
///
/// The full tuple system is used whenever exact verification is available. For rank-one
/// spectra beyond that size, the equivalent monomial system is solved instead, needing a
/// pool only as large as the number of degree-`2t` monomials; verification is then
/// randomized.
pub fn construct_cubature<R: Rng + ?Sized>(
    lambda: &Spectrum,
    t: usize,
    pool_size: usize,
    target_residual: f64,
    rng: &mut R,
) -> Result<Construction> {
    if t == 0 || t > MAX_ZONAL_DEGREE {
        return Err(Error::UnsupportedDegree { t });
    }
    let d = lambda.dim();
    if d < t {
        return Err(Error::DegenerateDimension { d, t });
    }
    let exact = sym_dim(d) <= EXACT_DIM_LIMIT;
    let rank_one = lambda.rank() == 1 && !exact;
    let (full, diag) = pol_dim_bounds(d, t)?;
    let needed = if rank_one { diag } else { full };
    if (pool_size as u64) < needed {
        return Err(Error::InvalidParameter(format!(
            "pool size {pool_size} is below the polynomial dimension bound {needed}"
        )));
    }

    let frames: Vec<DMatrix<f64>> = (0..pool_size).map(|_| haar_orthogonal(d, rng)).collect();
    let atoms: Vec<SymMatrix> = frames.iter().map(|o| atom_from_frame(lambda, o)).collect();
    let system = if rank_one {
        let root = lambda.values()[0].sqrt();
        let vectors: Vec<DVector<f64>> = frames.iter().map(|o| o.column(0) * root).collect();
        rank_one_system(lambda, t, &vectors)?
    } else {
        full_system(lambda, t, &atoms)?
    }
    .normalized();

    let first = nnls(&system.a, &system.b);
    let support: Vec<usize> = (0..pool_size)
        .filter(|&j| first.x[j] >= PRUNE_THRESHOLD)
        .collect();
    if support.is_empty() {
        return Err(Error::ResidualNotReached {
            achieved: first.residual_norm,
            target: target_residual,
        });
    }
    let second = nnls(&system.restricted(&support), &system.b);
    let kept: Vec<usize> = (0..support.len()).filter(|&i| second.x[i] > 0.0).collect();
    let total: f64 = kept.iter().map(|&i| second.x[i]).sum();
    let weights: Vec<f64> = kept.iter().map(|&i| second.x[i] / total).collect();
    let chosen: Vec<SymMatrix> = kept.iter().map(|&i| atoms[support[i]].clone()).collect();
    let ensemble = WeightedEnsemble::new(lambda.clone(), chosen, renormalize(weights), t)?;

    let mode = if exact {
        VerifyMode::Exact
    } else {
        VerifyMode::Randomized {
            probes: RANDOMIZED_PROBES,
        }
    };
    let verification = verify_strength(&ensemble, t, target_residual, mode, rng)?;
    if !verification.passed {
        return Err(Error::ResidualNotReached {
            achieved: verification.max_residual,
            target: target_residual,
        });
    }
    Ok(Construction {
        ensemble,
        verification,
        pool_size,
        fit_residual: second.residual_norm,
    })
}

/// Pushes the rounding error of the sum into the largest weight.
fn renormalize(mut w: Vec<f64>) -> Vec<f64> {
    let total = compensated_sum(&w);
    if let Some((imax, _)) = w.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        w[imax] += 1.0 - total;
    }
    w
}
