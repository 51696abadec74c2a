use rand::Rng;

use super::{multisets, random_unit_sym, random_unit_vector, WeightedEnsemble};
use crate::error::{Error, Result};
use crate::moments::{cross_moment, rank1_projector_moment, trace_moment};
use crate::symcore::{hs_inner, sym_basis, sym_dim, SymMatrix};
use crate::zonal::MAX_ZONAL_DEGREE;

/// Largest `d(d+1)/2` for which exact verification enumerates all basis tuples.
pub const EXACT_DIM_LIMIT: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    /// Every multiset of basis elements of size `t`.
    Exact,
    /// `probes` random unit-Frobenius test matrices.
    Randomized { probes: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyKind {
    Exact,
    Randomized,
}

impl std::fmt::Display for VerifyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VerifyKind::Exact => "exact",
            VerifyKind::Randomized => "randomized",
        })
    }
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub claimed_strength: usize,
    pub mode: VerifyKind,
    pub max_residual: f64,
    pub probes_used: usize,
    pub passed: bool,
}

impl VerificationReport {
    fn new(t: usize, mode: VerifyKind, max_residual: f64, probes: usize, tol: f64) -> Self {
        Self {
            claimed_strength: t,
            mode,
            max_residual,
            probes_used: probes,
            passed: max_residual <= tol,
        }
    }
}

/// Compares the ensemble's degree-`t` moments with the orbit's analytic moments.
pub fn verify_strength<R: Rng + ?Sized>(
    ens: &WeightedEnsemble,
    t: usize,
    tol: f64,
    mode: VerifyMode,
    rng: &mut R,
) -> Result<VerificationReport> {
    if t == 0 || t > MAX_ZONAL_DEGREE {
        return Err(Error::UnsupportedDegree { t });
    }
    let lambda = super::AtomSource::spectrum(ens);
    let d = lambda.dim();
    if d < t {
        return Err(Error::DegenerateDimension { d, t });
    }
    match mode {
        VerifyMode::Exact => {
            let big = sym_dim(d);
            if big > EXACT_DIM_LIMIT {
                return Err(Error::ExactModeTooLarge {
                    dim: big,
                    limit: EXACT_DIM_LIMIT,
                });
            }
            let basis = sym_basis(d);
            let coords: Vec<_> = ens.atoms().iter().map(|a| a.svec()).collect();
            let tuples = multisets(big, t);
            let mut worst = 0.0_f64;
            for tuple in &tuples {
                let args: Vec<SymMatrix> = tuple.iter().map(|&i| basis[i].clone()).collect();
                let want = cross_moment(lambda, &args)?;
                let got: f64 = coords
                    .iter()
                    .zip(ens.weights())
                    .map(|(c, w)| w * tuple.iter().map(|&i| c[i]).product::<f64>())
                    .sum();
                worst = worst.max((got - want).abs());
            }
            Ok(VerificationReport::new(
                t,
                VerifyKind::Exact,
                worst,
                tuples.len(),
                tol,
            ))
        }
        VerifyMode::Randomized { probes } => {
            let mut worst = 0.0_f64;
            for _ in 0..probes {
                let x = random_unit_sym(d, rng);
                let want = trace_moment(lambda, t, &x)?;
                let got = weighted_power(ens, &x, t)?;
                worst = worst.max((got - want).abs());
            }
            Ok(VerificationReport::new(
                t,
                VerifyKind::Randomized,
                worst,
                probes,
                tol,
            ))
        }
    }
}

fn weighted_power(ens: &WeightedEnsemble, x: &SymMatrix, t: usize) -> Result<f64> {
    let mut acc = 0.0;
    for (a, w) in ens.atoms().iter().zip(ens.weights()) {
        acc += w * hs_inner(a, x)?.powi(t as i32);
    }
    Ok(acc)
}

/// The weaker rank-one test `sum_j w_j <P_j, xx^T>^t` against the analytic moment, on
/// uniformly random unit `x`. Spectra made of zeros and ones admit any `t`.
pub fn verify_tight_fusion<R: Rng + ?Sized>(
    ens: &WeightedEnsemble,
    t: usize,
    tol: f64,
    n_probes: usize,
    rng: &mut R,
) -> Result<VerificationReport> {
    let lambda = super::AtomSource::spectrum(ens);
    let d = lambda.dim();
    let projector = lambda.is_projector();
    if t == 0 || (!projector && t > MAX_ZONAL_DEGREE) {
        return Err(Error::UnsupportedDegree { t });
    }
    let mut worst = 0.0_f64;
    for _ in 0..n_probes {
        let x = random_unit_vector(d, rng);
        let xx = SymMatrix::outer(&x);
        let want = if projector {
            rank1_projector_moment(lambda.rank(), d, t, 1.0)?
        } else {
            trace_moment(lambda, t, &xx)?
        };
        let got = weighted_power(ens, &xx, t)?;
        worst = worst.max((got - want).abs());
    }
    Ok(VerificationReport::new(
        t,
        VerifyKind::Randomized,
        worst,
        n_probes,
        tol,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubature::haar_sample;
    use crate::symcore::Spectrum;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis_ensemble(d: usize) -> WeightedEnsemble {
        let atoms = (0..d)
            .map(|i| {
                let mut v = DVector::zeros(d);
                v[i] = 1.0;
                SymMatrix::outer(&v)
            })
            .collect();
        WeightedEnsemble::uniform(Spectrum::e1(d).unwrap(), atoms).unwrap()
    }

    #[test]
    fn single_atom_fails_strength_one() {
        let l = Spectrum::e1(2).unwrap();
        let ens = WeightedEnsemble::new(l.clone(), vec![l.diag()], vec![1.0], 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = verify_strength(&ens, 1, 1e-8, VerifyMode::Exact, &mut rng).unwrap();
        assert!(!rep.passed);
        assert!((rep.max_residual - 0.5).abs() < 1e-14);
        assert_eq!(rep.probes_used, 3);
    }

    #[test]
    fn basis_ensemble_is_a_one_design_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in 2..6 {
            let ens = basis_ensemble(d);
            assert!(
                verify_tight_fusion(&ens, 1, 1e-12, 200, &mut rng)
                    .unwrap()
                    .passed
            );
            assert!(
                !verify_tight_fusion(&ens, 2, 1e-6, 200, &mut rng)
                    .unwrap()
                    .passed
            );
            let rep = verify_strength(&ens, 1, 1e-12, VerifyMode::Exact, &mut rng).unwrap();
            assert!(rep.passed);
        }
    }

    #[test]
    fn large_haar_ensemble_passes_at_sampling_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = Spectrum::projector(4, 2).unwrap();
        let n = 100_000;
        let atoms: Vec<_> = (0..n).map(|_| haar_sample(&l, &mut rng)).collect();
        for _ in 0..10 {
            let x = random_unit_sym(4, &mut rng);
            let vals: Vec<f64> = atoms
                .iter()
                .map(|a| hs_inner(a, &x).unwrap().powi(2))
                .collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let want = trace_moment(&l, 2, &x).unwrap();
            assert!((mean - want).abs() < 5.0 * se, "{mean} vs {want}, se {se}");
        }
        let ens = WeightedEnsemble::uniform(l.clone(), atoms).unwrap();
        let fus = verify_tight_fusion(&ens, 2, 5.0 / (n as f64).sqrt(), 20, &mut rng).unwrap();
        assert!(fus.passed, "residual {}", fus.max_residual);
    }

    #[test]
    fn guards() {
        let ens = basis_ensemble(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(matches!(
            verify_strength(&ens, 4, 1e-8, VerifyMode::Exact, &mut rng),
            Err(Error::UnsupportedDegree { t: 4 })
        ));
        let big = basis_ensemble(8);
        assert!(matches!(
            verify_strength(&big, 2, 1e-8, VerifyMode::Exact, &mut rng),
            Err(Error::ExactModeTooLarge { dim: 36, limit: 30 })
        ));
        assert!(verify_tight_fusion(&big, 6, 1.0, 5, &mut rng).is_ok());
        let general = WeightedEnsemble::new(
            Spectrum::new(vec![1.0, 0.5, 0.0]).unwrap(),
            vec![SymMatrix::from_diagonal(&[1.0, 0.5, 0.0])],
            vec![1.0],
            0,
        )
        .unwrap();
        assert!(matches!(
            verify_tight_fusion(&general, 4, 1.0, 5, &mut rng),
            Err(Error::UnsupportedDegree { t: 4 })
        ));
    }
}
