//! Sampling oracles for the analytic moment formulas.

mod common;

use nalgebra::DMatrix;
use retrieval_core::cubature::{
    haar_orthogonal, haar_sample, random_unit_vector, verify_tight_fusion, AtomSource, HaarSource,
    WeightedEnsemble,
};
use retrieval_core::moments::cross_moment;
use retrieval_core::recover::{r_operator, truncation_threshold};
use retrieval_core::rng::stream;
use retrieval_core::symcore::hs_inner;
use retrieval_core::{MomentCoefficients, Spectrum, SymMatrix};

use common::{random_sym, upper, worst_z, Welford};

fn unit_diag(d: usize, i: usize) -> SymMatrix {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    SymMatrix::from_diagonal(&v)
}

#[test]
fn mixed_moment_of_two_diagonal_units() {
    let l = Spectrum::projector(4, 2).unwrap();
    let (e11, e22) = (unit_diag(4, 0), unit_diag(4, 1));
    let want = cross_moment(&l, &[e11.clone(), e22.clone()]).unwrap();
    let mut rng = stream(201);
    let mut w = Welford::new(1);
    for _ in 0..1_000_000 {
        let p = haar_sample(&l, &mut rng);
        w.push(&[p.get(0, 0) * p.get(1, 1)]);
    }
    assert!(
        worst_z(&w, &[want], 0.0) <= 3.0,
        "{} vs {want}",
        w.mean()[0]
    );
}

#[test]
fn frame_operator_is_unbiased() {
    let l = Spectrum::new(vec![1.0, 0.5, 0.0, 0.0]).unwrap();
    let c = MomentCoefficients::new(&l).unwrap();
    let mut rng = stream(202);
    let x = random_sym(4, &mut rng);
    let want = upper(&x.add_identity(c.a2() * x.trace()));
    let mut w = Welford::new(want.len());
    let src = HaarSource::new(l);
    for _ in 0..100_000 {
        let batch = src.draw_many(4, &mut rng);
        w.push(&upper(&r_operator(&batch, &c, &x).unwrap()));
    }
    assert!(worst_z(&w, &want, 1e-14) <= 3.0);
}

#[test]
fn default_truncation_keeps_nearly_all_draws() {
    let (d, k, t, s) = (16, 1, 3, 3.0);
    let thr = truncation_threshold(s, t, k, d, 1.0 - 2.0 / t as f64);
    let l = Spectrum::e1(d).unwrap();
    let mut rng = stream(203);
    let x = random_unit_vector(d, &mut rng);
    let z = random_unit_vector(d, &mut rng);
    let n = 100_000;
    let kept = (0..n)
        .filter(|_| {
            let p = haar_sample(&l, &mut rng);
            p.quad_form(&x) <= thr && p.quad_form(&z) <= thr
        })
        .count();
    assert!(kept as f64 >= 0.99 * n as f64, "kept {kept}/{n}");
}

#[test]
fn haar_ensemble_is_a_tight_two_fusion_frame_at_sampling_tolerance() {
    let l = Spectrum::projector(4, 2).unwrap();
    let mut rng = stream(204);
    let atoms = HaarSource::new(l.clone()).draw_many(100_000, &mut rng);
    let ens = WeightedEnsemble::uniform(l, atoms).unwrap();
    // E <P, xx^T>^2 = (1)(2)/((2)(3)) = 1/3 with variance below 1/3, so 5 SE < 1e-2.
    let r = verify_tight_fusion(&ens, 2, 1e-2, 200, &mut rng).unwrap();
    assert!(r.passed, "residual {}", r.max_residual);
}

#[test]
fn rotated_draws_have_the_same_second_moments() {
    let l = Spectrum::new(vec![1.0, 0.3, 0.0]).unwrap();
    let mut rng = stream(205);
    let q: DMatrix<f64> = haar_orthogonal(3, &mut rng);
    let probes: Vec<SymMatrix> = (0..5).map(|_| random_sym(3, &mut rng)).collect();
    let mut plain = Welford::new(probes.len());
    let mut rotated = Welford::new(probes.len());
    for _ in 0..200_000 {
        let p = haar_sample(&l, &mut rng);
        let qp = SymMatrix::from_matrix(&q * p.as_matrix() * q.transpose()).unwrap();
        let m = |a: &SymMatrix| -> Vec<f64> {
            probes
                .iter()
                .map(|x| hs_inner(a, x).unwrap().powi(2))
                .collect()
        };
        plain.push(&m(&p));
        rotated.push(&m(&qp));
    }
    for ((a, b), (sa, sb)) in plain
        .mean()
        .iter()
        .zip(rotated.mean())
        .zip(plain.se().iter().zip(rotated.se()))
    {
        assert!(
            (a - b).abs() <= 4.0 * (sa * sa + sb * sb).sqrt(),
            "{a} vs {b}"
        );
    }
}
