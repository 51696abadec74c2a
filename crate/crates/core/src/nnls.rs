//! Lawson–Hanson active-set nonnegative least squares, `min |Ax - b|` subject to `x >= 0`.
//!
//! The passive-set factorization is updated in place: Householder reflections when a
//! column enters, Givens rotations when one leaves, with `Q^T` kept explicitly.

use nalgebra::{DMatrix, DVector};

pub(crate) struct NnlsSolution {
    pub x: DVector<f64>,
    pub residual_norm: f64,
}

struct Factorization {
    // Orthogonal factor; column `i` of `q` is row `i` of `Q^T`.
    q: DMatrix<f64>,
    qtb: DVector<f64>,
    // Transformed passive columns `Q^T a_j`; only the first `cols.len()` rows are nonzero.
    cols: Vec<DVector<f64>>,
    index: Vec<usize>,
}

impl Factorization {
    fn new(b: &DVector<f64>) -> Self {
        let m = b.len();
        Self {
            q: DMatrix::identity(m, m),
            qtb: b.clone(),
            cols: Vec::new(),
            index: Vec::new(),
        }
    }

    /// Returns false (leaving the factorization untouched) if the column is dependent.
    fn push(&mut self, j: usize, a: &DVector<f64>, scale: f64) -> bool {
        let m = self.qtb.len();
        let p = self.cols.len();
        if p >= m {
            return false;
        }
        let mut v = self.q.tr_mul(a);
        let tail = v.rows(p, m - p).norm();
        if tail <= 1e-12 * scale {
            return false;
        }
        let alpha = if v[p] > 0.0 { -tail } else { tail };
        let mut u = v.rows(p, m - p).into_owned();
        u[0] -= alpha;
        let unorm = u.norm();
        if unorm > 0.0 {
            u /= unorm;
            let mut block = self.q.columns_mut(p, m - p);
            let s = &block * &u;
            block.ger(-2.0, &s, &u, 1.0);
            let mut tb = self.qtb.rows_mut(p, m - p);
            let dot = u.dot(&tb);
            tb.axpy(-2.0 * dot, &u, 1.0);
        }
        v[p] = alpha;
        v.rows_mut(p + 1, m - p - 1).fill(0.0);
        self.cols.push(v);
        self.index.push(j);
        true
    }

    fn remove(&mut self, pos: usize) {
        self.cols.remove(pos);
        self.index.remove(pos);
        for i in pos..self.cols.len() {
            let (a, b) = (self.cols[i][i], self.cols[i][i + 1]);
            let r = a.hypot(b);
            if r == 0.0 {
                continue;
            }
            let (c, s) = (a / r, b / r);
            for col in self.cols.iter_mut().skip(i) {
                let (x, y) = (col[i], col[i + 1]);
                col[i] = c * x + s * y;
                col[i + 1] = -s * x + c * y;
            }
            self.cols[i][i + 1] = 0.0;
            let (left, right) = self.q.as_mut_slice().split_at_mut((i + 1) * self.qtb.len());
            let qi = &mut left[i * self.qtb.len()..];
            let qn = &mut right[..self.qtb.len()];
            for (x, y) in qi.iter_mut().zip(qn.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = c * a + s * b;
                *y = -s * a + c * b;
            }
            let (x, y) = (self.qtb[i], self.qtb[i + 1]);
            self.qtb[i] = c * x + s * y;
            self.qtb[i + 1] = -s * x + c * y;
        }
    }

    /// Least-squares coefficients on the passive set, by back substitution.
    fn solve(&self) -> Vec<f64> {
        let p = self.cols.len();
        let mut z = vec![0.0; p];
        for i in (0..p).rev() {
            let mut acc = self.qtb[i];
            for (k, zk) in z.iter().enumerate().skip(i + 1) {
                acc -= self.cols[k][i] * zk;
            }
            z[i] = acc / self.cols[i][i];
        }
        z
    }
}

pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> NnlsSolution {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m, "nnls: row count mismatch");
    let scale = a.amax().max(f64::MIN_POSITIVE) * (m as f64).sqrt();
    let mut x: DVector<f64> = DVector::zeros(n);
    let mut passive = vec![false; n];
    let mut fact = Factorization::new(b);
    let grad_tol = 1e-14 * scale * b.norm().max(1e-300) * (n as f64).sqrt();
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let mut resid: DVector<f64> = b.clone();
        for &j in &fact.index {
            resid.axpy(-x[j], &a.column(j), 1.0);
        }
        let w = a.tr_mul(&resid);
        let mut rejected = vec![false; n];
        let mut entered = None;
        loop {
            let cand = (0..n)
                .filter(|&j| !passive[j] && !rejected[j] && w[j] > grad_tol)
                .max_by(|&i, &j| w[i].total_cmp(&w[j]));
            let Some(j) = cand else { break };
            if !fact.push(j, &a.column(j).into_owned(), scale) {
                rejected[j] = true;
                continue;
            }
            let z = fact.solve();
            if *z.last().unwrap() <= 0.0 {
                fact.remove(fact.cols.len() - 1);
                rejected[j] = true;
                continue;
            }
            passive[j] = true;
            entered = Some(z);
            break;
        }
        let Some(mut z) = entered else { break };

        loop {
            if z.iter().all(|&v| v > 0.0) {
                for (pos, &j) in fact.index.iter().enumerate() {
                    x[j] = z[pos];
                }
                break;
            }
            let mut step = f64::INFINITY;
            let mut blocking = 0;
            for (pos, &j) in fact.index.iter().enumerate() {
                if z[pos] <= 0.0 {
                    let s = x[j] / (x[j] - z[pos]);
                    if s < step {
                        step = s;
                        blocking = j;
                    }
                }
            }
            for (pos, &j) in fact.index.iter().enumerate() {
                x[j] += step * (z[pos] - x[j]);
            }
            x[blocking] = 0.0;
            let floor = 1e-14 * x.amax();
            let mut pos = 0;
            while pos < fact.index.len() {
                let j = fact.index[pos];
                if x[j] <= floor {
                    x[j] = 0.0;
                    passive[j] = false;
                    fact.remove(pos);
                    z.remove(pos);
                } else {
                    pos += 1;
                }
            }
            if fact.index.is_empty() {
                break;
            }
            z = fact.solve();
        }
    }
    let residual_norm = (b - a * &x).norm();
    NnlsSolution { x, residual_norm }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unconstrained_optimum_is_recovered_when_nonnegative() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let sol = nnls(&a, &b);
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && (sol.x[1] - 2.0).abs() < 1e-12);
        assert!(sol.residual_norm < 1e-12);
    }

    #[test]
    fn negative_direction_is_clamped() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![-1.0, 2.0]);
        let sol = nnls(&a, &b);
        assert_eq!(sol.x[0], 0.0);
        assert!((sol.x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kkt_conditions_hold_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..30 {
            let (m, n) = (5 + trial % 7, 3 + (trial * 5) % 17);
            let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let sol = nnls(&a, &b);
            let w = a.tr_mul(&(&b - &a * &sol.x));
            for j in 0..n {
                assert!(sol.x[j] >= 0.0);
                assert!(w[j] < 1e-9, "dual infeasible: {}", w[j]);
                if sol.x[j] > 0.0 {
                    assert!(w[j].abs() < 1e-9, "complementarity: {}", w[j]);
                }
            }
        }
    }

    #[test]
    fn consistent_convex_combination_is_matched() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (m, n) = (12, 60);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(0.0..1.0));
        let mut w = DVector::zeros(n);
        for j in 0..n {
            w[j] = rng.random_range(0.0..1.0);
        }
        let b = &a * &w;
        let sol = nnls(&a, &b);
        assert!(sol.residual_norm < 1e-12 * b.norm());
    }
}
