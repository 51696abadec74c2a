//! Alternating projections between the affine constraint set and the PSD cone.
//!
//! Everything runs in `svec` coordinates, where the Frobenius geometry is Euclidean. The
//! constraint rows `svec(I), svec(P_1), ...` are factored once through the eigenvectors of
//! their Gram matrix, which gives both the minimum-norm feasible point and the projector
//! onto the row space.

use nalgebra::{DMatrix, DVector};

use super::{svec_rows, MeasurementSet};
use crate::error::{Error, Result};
use crate::symcore::{eigen_of, recompose, SymMatrix};

/// Relative eigenvalue floor deciding the numerical rank of the constraint Gram matrix.
const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub x_hat: SymMatrix,
    pub converged: bool,
    pub iterations: usize,
    /// Largest violation of the trace and measurement constraints by `x_hat`.
    pub feasibility_residual: f64,
    /// Gap between the two largest eigenvalues of `x_hat`.
    pub spectral_gap: f64,
    /// Top eigenvector of `x_hat` scaled by the square root of its eigenvalue.
    pub extracted_x: DVector<f64>,
}

impl RecoveryResult {
    fn from_estimate(
        x_hat: SymMatrix,
        converged: bool,
        iterations: usize,
        m: &MeasurementSet,
    ) -> Result<Self> {
        let e = eigen_of(x_hat.as_matrix().clone())?;
        let top = e.values[0];
        let second = e.values.get(1).copied().unwrap_or(0.0);
        let extracted_x = e.vectors.column(0) * top.max(0.0).sqrt();
        Ok(Self {
            feasibility_residual: m.max_violation(&x_hat),
            x_hat,
            converged,
            iterations,
            spectral_gap: top - second,
            extracted_x,
        })
    }

    /// Flat key/value view for tabular output.
    pub fn to_record(&self) -> Vec<(&'static str, String)> {
        vec![
            ("converged", self.converged.to_string()),
            ("iterations", self.iterations.to_string()),
            (
                "feasibility_residual",
                format!("{:.6e}", self.feasibility_residual),
            ),
            ("spectral_gap", format!("{:.6e}", self.spectral_gap)),
        ]
    }

    /// `|x_hat - xx^T|_F / |x|^2`.
    pub fn relative_error(&self, x: &DVector<f64>) -> f64 {
        let diff = self.x_hat.as_matrix() - x * x.transpose();
        diff.norm() / x.norm_squared()
    }
}

struct AffineSet {
    offset: DVector<f64>,
    range: DMatrix<f64>,
}

impl AffineSet {
    fn new(m: &MeasurementSet) -> Result<Self> {
        let d = m.dim();
        let mut rows_m = Vec::with_capacity(m.len() + 1);
        rows_m.push(SymMatrix::identity(d));
        rows_m.extend_from_slice(m.matrices());
        let a = svec_rows(&rows_m);
        let mut b = DVector::zeros(m.len() + 1);
        b[0] = m.trace_value();
        b.rows_mut(1, m.len()).copy_from_slice(m.values());

        let gram = a.tr_mul(&a);
        let e = eigen_of(gram)?;
        let top = e.values[0].max(f64::MIN_POSITIVE);
        let r = e.values.iter().take_while(|&&v| v > RANK_TOL * top).count();
        let range = e.vectors.columns(0, r).into_owned();
        let inv: DVector<f64> = DVector::from_iterator(r, e.values[..r].iter().map(|v| 1.0 / v));
        let pinv_apply = |rhs: &DVector<f64>| -> DVector<f64> {
            let coeff = range.tr_mul(&a.tr_mul(rhs)).component_mul(&inv);
            &range * coeff
        };
        let mut offset = pinv_apply(&b);
        let resid = &b - &a * &offset;
        offset += pinv_apply(&resid);
        let resid = (&b - &a * &offset).amax();
        let scale = b.amax().max(1.0);
        if resid > 1e-8 * scale {
            return Err(Error::Infeasible { residual: resid });
        }
        Ok(Self { offset, range })
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        v - &self.range * self.range.tr_mul(v) + &self.offset
    }
}

/// Finds a PSD matrix matching all constraints, starting from the minimum-norm solution
/// of the linear constraints. The returned matrix is always exactly PSD; `converged`
/// means every constraint holds to within `tol`.
pub fn solve_feasibility(m: &MeasurementSet, tol: f64, max_iter: usize) -> Result<RecoveryResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let d = m.dim();
    if m.trace_value() == 0.0 {
        let zero = SymMatrix::zeros(d);
        let viol = m.max_violation(&zero);
        if viol > tol {
            return Err(Error::Infeasible { residual: viol });
        }
        return RecoveryResult::from_estimate(zero, true, 0, m);
    }
    let affine = AffineSet::new(m)?;
    let mut y = affine.offset.clone();
    let mut x = SymMatrix::zeros(d);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let e = eigen_of(SymMatrix::from_svec(d, &y)?.into_matrix())?;
        x = recompose(&e, |v| v.max(0.0));
        let v = x.svec();
        let next = affine.project(&v);
        let gap = (&next - &v).norm();
        y = next;
        // Each constraint row has norm at most sqrt(d), so this bounds every violation.
        if gap * (d as f64).sqrt() <= tol && m.max_violation(&x) <= tol {
            converged = true;
            break;
        }
    }
    RecoveryResult::from_estimate(x, converged, iterations, m)
}
