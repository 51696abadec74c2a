//! Trace moments `E <P, X>^t` of the orthogonally invariant measure on the orbit of
//! `D_lambda`, their polarized cross-moments, and the operators derived from them.
//!
//! Two independent routes compute the same moments for `t <= 3`:
//! [`trace_moment`] sums `C_pi(X) C_pi(D) / C_pi(I)` over partitions and polarizes,
//! while [`coefficient_moment`] expands the multilinear form with the
//! precomputed [`MomentCoefficients`].

use crate::error::{Error, Result};
use crate::symcore::{hs_inner, power_sums, Spectrum, SymMatrix};
use crate::zonal::{partitions, zonal_at_identity, zonal_from_power_sums, MAX_ZONAL_DEGREE};

/// The six `alpha_pi` coefficients of the multilinear moment forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alphas {
    pub one: f64,
    pub one_one: f64,
    pub two: f64,
    pub one_one_one: f64,
    pub two_one: f64,
    pub three: f64,
}

/// Everything the closed-form moment operators need for one spectrum, computed once.
#[derive(Clone, Debug)]
pub struct MomentCoefficients {
    spectrum: Spectrum,
    d: usize,
    s: [f64; 3],
    q: [f64; 3],
    alpha: Alphas,
    a1: f64,
    a2: f64,
}

impl MomentCoefficients {
    /// Rejects constant spectra, for which `d s_2 = s_1^2` and `a_1` is undefined.
    pub fn new(spectrum: &Spectrum) -> Result<Self> {
        let d = spectrum.dim();
        let ps = spectrum.power_sums(3);
        let (s1, s2, s3) = (ps[0], ps[1], ps[2]);
        let df = d as f64;
        let spread = 2.0 * df * s2 - 2.0 * s1 * s1;
        if spread <= 1e-12 * df * s2 {
            return Err(Error::DegenerateSpectrum);
        }
        let q = [
            df,
            (df - 1.0) * df * (df + 2.0),
            (df - 2.0) * (df - 1.0) * df * (df + 2.0) * (df + 4.0),
        ];
        let alpha = Alphas {
            one: s1,
            one_one: (df + 1.0) * s1 * s1 - 2.0 * s2,
            two: spread,
            one_one_one: (df * df + 3.0 * df - 2.0) * s1.powi(3) - 6.0 * (df + 2.0) * s1 * s2
                + 16.0 * s3,
            two_one: -6.0 * (df + 2.0) * s1.powi(3) + 6.0 * (df * df + 2.0 * df + 4.0) * s1 * s2
                - 24.0 * df * s3,
            three: 16.0 * s1.powi(3) - 24.0 * df * s1 * s2 + 8.0 * df * df * s3,
        };
        let a1 = df * (df + 2.0) * (df - 1.0) / spread;
        let a2 = alpha.one_one / spread;
        Ok(Self {
            spectrum: spectrum.clone(),
            d,
            s: [s1, s2, s3],
            q,
            alpha,
            a1,
            a2,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Power sums `(s_1, s_2, s_3)` of `D_lambda`.
    pub fn power_sums(&self) -> [f64; 3] {
        self.s
    }

    /// Normalizers `(q_1, q_2, q_3)`.
    pub fn normalizers(&self) -> [f64; 3] {
        self.q
    }

    pub fn alphas(&self) -> Alphas {
        self.alpha
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }
}

fn check_degree(d: usize, t: usize) -> Result<()> {
    if t == 0 || t > MAX_ZONAL_DEGREE {
        return Err(Error::UnsupportedDegree { t });
    }
    if d < t {
        return Err(Error::DegenerateDimension { d, t });
    }
    Ok(())
}

fn check_dim(d: usize, x: &SymMatrix) -> Result<()> {
    if x.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.dim(),
        });
    }
    Ok(())
}

/// `mu^t(X) = E <P, X>^t` for `t <= 3` via the zonal-polynomial expansion.
pub fn trace_moment(lambda: &Spectrum, t: usize, x: &SymMatrix) -> Result<f64> {
    let d = lambda.dim();
    check_degree(d, t)?;
    check_dim(d, x)?;
    let px = power_sums(x, 3)?;
    let px = [px[0], px[1], px[2]];
    let pd = lambda.power_sums(3);
    let pd = [pd[0], pd[1], pd[2]];
    let mut total = 0.0;
    for pi in partitions(t, d) {
        let cx = zonal_from_power_sums(&pi, px)?;
        let cd = zonal_from_power_sums(&pi, pd)?;
        let ci = zonal_at_identity(&pi, d)?;
        total += cx * cd / ci;
    }
    Ok(total)
}

/// Cross-moment `E <P, X_1> ... <P, X_t>` by polarization:
/// `(1/t!) sum_J (-1)^(t + |J|) mu^t(sum_{j in J} X_j)`.
pub fn cross_moment(lambda: &Spectrum, xs: &[SymMatrix]) -> Result<f64> {
    let t = xs.len();
    let d = lambda.dim();
    check_degree(d, t)?;
    for x in xs {
        check_dim(d, x)?;
    }
    let mut total = 0.0;
    for mask in 1u32..(1 << t) {
        let mut sum = SymMatrix::zeros(d);
        for (j, x) in xs.iter().enumerate() {
            if mask & (1 << j) != 0 {
                sum += x;
            }
        }
        let sign = if (t as u32 + mask.count_ones()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        total += sign * trace_moment(lambda, t, &sum)?;
    }
    let factorial: f64 = (1..=t).map(|i| i as f64).product();
    Ok(total / factorial)
}

/// The same cross-moment through the explicit multilinear coefficient form.
pub fn coefficient_moment(coeffs: &MomentCoefficients, xs: &[SymMatrix]) -> Result<f64> {
    let t = xs.len();
    let d = coeffs.d;
    check_degree(d, t)?;
    for x in xs {
        check_dim(d, x)?;
    }
    let a = &coeffs.alpha;
    let q = &coeffs.q;
    let v = match xs {
        [x1] => a.one * x1.trace() / q[0],
        [x1, x2] => (a.one_one * x1.trace() * x2.trace() + a.two * hs_inner(x1, x2)?) / q[1],
        [x1, x2, x3] => {
            let (t1, t2, t3) = (x1.trace(), x2.trace(), x3.trace());
            let triple = (x1.as_matrix() * x2.as_matrix()).dot(x3.as_matrix());
            (a.one_one_one * t1 * t2 * t3
                + a.two_one / 3.0
                    * (t1 * hs_inner(x2, x3)? + t2 * hs_inner(x1, x3)? + t3 * hs_inner(x1, x2)?)
                + a.three * triple)
                / q[2]
        }
        _ => unreachable!("degree checked above"),
    };
    Ok(v)
}

/// Rising factorial `a (a + 1) ... (a + t - 1)`, with `(a)_0 = 1`.
pub fn pochhammer(a: f64, t: usize) -> f64 {
    (0..t).map(|i| a + i as f64).product()
}

/// `E <P, xx^T>^t = (k/2)_t / (d/2)_t |x|^(2t)` for rank-`k` orthogonal projectors.
pub fn rank1_projector_moment(k: usize, d: usize, t: usize, norm_sq: f64) -> Result<f64> {
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!(
            "projector rank {k} must lie in 1..={d}"
        )));
    }
    Ok(pochhammer(k as f64 / 2.0, t) / pochhammer(d as f64 / 2.0, t) * norm_sq.powi(t as i32))
}

/// Mixed Dirichlet(1/2, ..., 1/2) moment `prod_i (1/2)_{b_i} / (d/2)_{|b|}`, the
/// expectation of `prod_i <P, x_i x_i^T>^{b_i}` for a uniform rank-one projector and an
/// orthonormal basis `x_i`. `beta` may be shorter than `d` (missing entries are zero).
pub fn dirichlet_moment(d: usize, beta: &[usize]) -> Result<f64> {
    if beta.len() > d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: beta.len(),
        });
    }
    let total: usize = beta.iter().sum();
    if total == 0 {
        return Err(Error::InvalidParameter(
            "multi-index must have |beta| >= 1".into(),
        ));
    }
    let num: f64 = beta.iter().map(|&b| pochhammer(0.5, b)).product();
    Ok(num / pochhammer(d as f64 / 2.0, total))
}

/// `E <P, X>^t` for uniform rank-one projectors and any `t`, from the eigenvalues of `X`.
///
/// Expands `sum_{|beta| = t} t!/beta! alpha^beta prod (1/2)_{beta_i} / (d/2)_t` as the
/// `z^t` coefficient of `prod_i sum_b (1/2)_b / b! (alpha_i z)^b`.
pub fn rank1_general_moment(d: usize, t: usize, eigenvalues: &[f64]) -> Result<f64> {
    if eigenvalues.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: eigenvalues.len(),
        });
    }
    if t == 0 {
        return Ok(1.0);
    }
    let mut series = vec![0.0; t + 1];
    series[0] = 1.0;
    for &a in eigenvalues {
        // factor_b = (1/2)_b / b! a^b
        let mut factor = vec![1.0; t + 1];
        for b in 1..=t {
            factor[b] = factor[b - 1] * (0.5 + (b - 1) as f64) / b as f64 * a;
        }
        let mut next = vec![0.0; t + 1];
        for (i, &si) in series.iter().enumerate() {
            if si == 0.0 {
                continue;
            }
            for (b, &fb) in factor.iter().enumerate().take(t + 1 - i) {
                next[i + b] += si * fb;
            }
        }
        series = next;
    }
    let t_fact: f64 = (1..=t).map(|i| i as f64).product();
    Ok(series[t] * t_fact / pochhammer(d as f64 / 2.0, t))
}

fn require_dim(coeffs: &MomentCoefficients, min_d: usize, x: &SymMatrix) -> Result<()> {
    if coeffs.d < min_d {
        return Err(Error::DegenerateDimension {
            d: coeffs.d,
            t: min_d,
        });
    }
    check_dim(coeffs.d, x)
}

/// `E <P, X> P = (X + a_2 trace(X) I) / a_1`.
pub fn expectation_operator(coeffs: &MomentCoefficients, x: &SymMatrix) -> Result<SymMatrix> {
    require_dim(coeffs, 2, x)?;
    Ok(x.add_identity(coeffs.a2 * x.trace())
        .scaled(1.0 / coeffs.a1))
}

/// `E <P, X_1> <P, X_2> P`.
///
/// The `alpha_(3)` contribution is the Jordan product `(X_1 X_2 + X_2 X_1) / 2`, so that
/// `<result, X_3>` reproduces the three-argument cross-moment exactly.
pub fn second_order_operator(
    coeffs: &MomentCoefficients,
    x1: &SymMatrix,
    x2: &SymMatrix,
) -> Result<SymMatrix> {
    require_dim(coeffs, 3, x1)?;
    check_dim(coeffs.d, x2)?;
    let a = &coeffs.alpha;
    let (t1, t2) = (x1.trace(), x2.trace());
    let mut out = x1.jordan(x2).scaled(a.three);
    out.axpy(a.two_one / 3.0 * t1, x2);
    out.axpy(a.two_one / 3.0 * t2, x1);
    let id = a.one_one_one * t1 * t2 + a.two_one / 3.0 * hs_inner(x1, x2)?;
    Ok(out.add_identity(id).scaled(1.0 / coeffs.q[2]))
}

/// `S: X -> X - a_2 / (1 + a_2 d) trace(X) I`, the inverse of `a_1 E <P, .> P`.
pub fn s_map(coeffs: &MomentCoefficients, x: &SymMatrix) -> Result<SymMatrix> {
    require_dim(coeffs, 2, x)?;
    let c = coeffs.a2 / (1.0 + coeffs.a2 * coeffs.d as f64);
    Ok(x.add_identity(-c * x.trace()))
}

/// Upper bound `(k t / d)^t` on `E <P, xx^T>^t` for unit `x`.
pub fn moment_bound(k: usize, d: usize, t: usize) -> Result<f64> {
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!(
            "rank {k} must lie in 1..={d}"
        )));
    }
    Ok((k as f64 * t as f64 / d as f64).powi(t as i32))
}
