use nalgebra::{DMatrix, DVector};

use super::{max_rank, svec_rows};
use crate::error::{Error, Result};
use crate::moments::MomentCoefficients;
use crate::symcore::{eigen_of, hs_inner, SymMatrix, TangentAnchor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsometryConstants {
    /// Smallest eigenvalue of `(1/n) sum_j <B_a, P_j><B_b, P_j>` over an orthonormal
    /// basis `B_a` of the tangent space at `xx^T`.
    pub alpha: f64,
    /// Largest eigenvalue of the same form over all symmetric matrices.
    pub beta_exact: f64,
    /// Largest numerical rank among the `P_j`, an a priori bound on `beta_exact` for
    /// matrices with eigenvalues in `[0, 1]`.
    pub beta_bound: f64,
}

pub fn isometry_constants(ps: &[SymMatrix], x: &DVector<f64>) -> Result<IsometryConstants> {
    if ps.is_empty() {
        return Err(Error::InvalidParameter("no measurement matrices".into()));
    }
    let anchor = TangentAnchor::new(x.clone())?;
    let d = anchor.dim();
    for p in ps {
        if p.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.dim(),
            });
        }
    }
    let n = ps.len() as f64;
    let rows = svec_rows(ps);
    let full = rows.tr_mul(&rows) / n;
    let beta_exact = eigen_of(full)?.values[0];

    let basis = anchor.tangent_basis();
    let coeffs = DMatrix::from_fn(ps.len(), basis.len(), |j, a| {
        ps[j].as_matrix().dot(basis[a].as_matrix())
    });
    let tangent = coeffs.tr_mul(&coeffs) / n;
    let alpha = *eigen_of(tangent)?.values.last().unwrap();
    Ok(IsometryConstants {
        alpha,
        beta_exact,
        beta_bound: max_rank(ps)? as f64,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GuaranteeVerdict {
    pub holds: bool,
    /// `sqrt(beta / alpha)`.
    pub lhs: f64,
    /// `(1 - delta) / gamma`.
    pub rhs: f64,
    pub reason: Option<String>,
}

/// The strict inequality `sqrt(beta / alpha) < (1 - delta) / gamma`, which makes `xx^T`
/// the only feasible point.
pub fn deterministic_guarantee(alpha: f64, beta: f64, gamma: f64, delta: f64) -> GuaranteeVerdict {
    let fail = |lhs: f64, rhs: f64, why: &str| GuaranteeVerdict {
        holds: false,
        lhs,
        rhs,
        reason: Some(why.to_string()),
    };
    if !(alpha > 0.0) {
        return fail(f64::INFINITY, f64::NAN, "lower isometry fails (alpha <= 0)");
    }
    if !(beta >= 0.0) {
        return fail(f64::NAN, f64::NAN, "beta must be nonnegative");
    }
    let lhs = (beta / alpha).sqrt();
    if !(gamma >= 0.0) || !(delta >= 0.0) {
        return fail(lhs, f64::NAN, "gamma and delta must be nonnegative");
    }
    if delta >= 1.0 {
        return fail(lhs, (1.0 - delta) / gamma, "delta >= 1");
    }
    let rhs = if gamma == 0.0 {
        f64::INFINITY
    } else {
        (1.0 - delta) / gamma
    };
    let holds = lhs < rhs;
    GuaranteeVerdict {
        holds,
        lhs,
        rhs,
        reason: (!holds).then(|| "inequality not satisfied".to_string()),
    }
}

/// `(a_1 / n) sum_j <X, P_j> P_j`.
pub fn r_operator(
    ps: &[SymMatrix],
    coeffs: &MomentCoefficients,
    x: &SymMatrix,
) -> Result<SymMatrix> {
    weighted_frame(ps, coeffs, x, |_| true)
}

fn weighted_frame(
    ps: &[SymMatrix],
    coeffs: &MomentCoefficients,
    x: &SymMatrix,
    keep: impl Fn(usize) -> bool,
) -> Result<SymMatrix> {
    let d = coeffs.dim();
    if x.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.dim(),
        });
    }
    let mut out = SymMatrix::zeros(d);
    for (j, p) in ps.iter().enumerate() {
        if keep(j) {
            out.axpy(hs_inner(x, p)?, p);
        }
    }
    Ok(out.scaled(coeffs.a1() / ps.len().max(1) as f64))
}

/// `(s + 1) t k d^(-r)`.
pub fn truncation_threshold(s: f64, t: usize, k: usize, d: usize, r_rate: f64) -> f64 {
    (s + 1.0) * t as f64 * k as f64 * (d as f64).powf(-r_rate)
}

/// [`r_operator`] restricted to atoms with `<P_j, uu^T> <= threshold` and
/// `<P_j, zz^T> <= threshold`, where `u` is the unit anchor direction and `z` the unit
/// direction of `Z = q (z u^T + u z^T)`. The normalization stays `1/n` over the full batch.
pub fn truncated_r_at(
    ps: &[SymMatrix],
    coeffs: &MomentCoefficients,
    anchor: &TangentAnchor,
    z_mat: &SymMatrix,
    threshold: f64,
    x: &SymMatrix,
) -> Result<SymMatrix> {
    let (_, z) = anchor.decompose(z_mat)?;
    let u = anchor.unit();
    let keep: Vec<bool> = ps
        .iter()
        .map(|p| p.quad_form(u) <= threshold && p.quad_form(&z) <= threshold)
        .collect();
    weighted_frame(ps, coeffs, x, |j| keep[j])
}

/// [`truncated_r_at`] with the threshold `(s + 1) t k d^(-r_rate)`.
#[allow(clippy::too_many_arguments)]
pub fn truncated_r(
    ps: &[SymMatrix],
    coeffs: &MomentCoefficients,
    anchor: &TangentAnchor,
    z_mat: &SymMatrix,
    s: f64,
    t: usize,
    r_rate: f64,
    x: &SymMatrix,
) -> Result<SymMatrix> {
    if !(r_rate > 0.0 && r_rate <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "truncation rate {r_rate} must lie in (0, 1]"
        )));
    }
    let k = coeffs.spectrum().rank();
    let thr = truncation_threshold(s, t, k, coeffs.dim(), r_rate);
    truncated_r_at(ps, coeffs, anchor, z_mat, thr, x)
}
