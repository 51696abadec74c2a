#![allow(dead_code)]

use rand::Rng;
use retrieval_core::cubature::random_unit_sym;
use retrieval_core::{Spectrum, SymMatrix};

/// Random direction with a random scale in `[0.5, 2.5)`.
pub fn random_sym<R: Rng>(d: usize, rng: &mut R) -> SymMatrix {
    let s = rng.random_range(0.5..2.5);
    random_unit_sym(d, rng).scaled(s)
}

/// Nonconstant spectrum with a random number of nonzero entries in `(0.05, 1)`.
pub fn random_spectrum<R: Rng>(d: usize, rng: &mut R) -> Spectrum {
    let k = rng.random_range(1..d);
    let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Spectrum::padded(&v, d).unwrap()
}

/// Running mean and variance of a fixed-length vector of samples.
pub struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub fn new(len: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn push(&mut self, xs: &[f64]) {
        self.n += 1;
        for (i, &x) in xs.iter().enumerate() {
            let delta = x - self.mean[i];
            self.mean[i] += delta / self.n as f64;
            self.m2[i] += delta * (x - self.mean[i]);
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Standard errors of the means.
    pub fn se(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2.iter().map(|m| (m / (n - 1.0) / n).sqrt()).collect()
    }
}

/// Upper triangle of `m`, row-major.
pub fn upper(m: &SymMatrix) -> Vec<f64> {
    m.upper()
}

/// Largest `|mean - want| / se` over entries, with `slack` absorbing zero-variance entries.
pub fn worst_z(w: &Welford, want: &[f64], slack: f64) -> f64 {
    w.mean()
        .iter()
        .zip(w.se())
        .zip(want)
        .map(|((m, se), t)| {
            let diff = (m - t).abs();
            if diff <= slack {
                0.0
            } else {
                diff / se
            }
        })
        .fold(0.0, f64::max)
}
