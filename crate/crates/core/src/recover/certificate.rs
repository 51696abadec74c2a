//! Dual certificates: direct measurement of `(gamma, delta)` and span membership, and the
//! golfing construction that builds a certificate from independent measurement batches.

use nalgebra::DVector;
use rand::Rng;

use super::isometry::truncated_r;
use super::svec_rows;
use crate::cubature::AtomSource;
use crate::error::{Error, Result};
use crate::moments::{s_map, MomentCoefficients};
use crate::symcore::{eigen_of, SymMatrix, TangentAnchor};

/// Relative residual below which a matrix counts as lying in `span{I, P_j}`.
pub const SPAN_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateCheck {
    pub passes: bool,
    /// `|Y_T - xx^T|_F`.
    pub gamma_measured: f64,
    /// `|Y_{T-perp}|_op`.
    pub delta_measured: f64,
    pub in_span: bool,
    pub span_residual: f64,
}

/// Splits `Y` along the tangent space at `xx^T` and tests membership in `span{I, P_j}`
/// by projecting onto the range of the frame operator of `{I, P_j}`.
pub fn check_certificate(
    y: &SymMatrix,
    x: &DVector<f64>,
    ps: &[SymMatrix],
    gamma: f64,
    delta: f64,
) -> Result<CertificateCheck> {
    let anchor = TangentAnchor::new(x.clone())?;
    let d = anchor.dim();
    if y.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: y.dim(),
        });
    }
    let tangent = anchor.project(y)?;
    let gamma_measured = (&tangent - &anchor.signal()).frobenius_norm();
    let delta_measured = (y - &tangent).op_norm()?;

    let mut gens = Vec::with_capacity(ps.len() + 1);
    gens.push(SymMatrix::identity(d));
    gens.extend_from_slice(ps);
    let rows = svec_rows(&gens);
    let e = eigen_of(rows.tr_mul(&rows))?;
    let top = e.values[0].max(f64::MIN_POSITIVE);
    let r = e.values.iter().take_while(|&&v| v > 1e-12 * top).count();
    let range = e.vectors.columns(0, r);
    let v = y.svec();
    let span_residual = (&v - range * range.tr_mul(&v)).norm();
    let in_span = span_residual <= SPAN_TOL * y.frobenius_norm().max(1.0);
    Ok(CertificateCheck {
        passes: in_span && gamma_measured <= gamma && delta_measured <= delta,
        gamma_measured,
        delta_measured,
        in_span,
        span_residual,
    })
}

#[derive(Clone, Debug)]
pub struct GolfingParams {
    pub c0: f64,
    pub s: f64,
    pub r_rate: f64,
    /// Moment order entering the truncation threshold.
    pub t: usize,
    pub batch_size: usize,
    pub max_repeats: usize,
}

impl GolfingParams {
    /// `c0 = 10`, `s = c0`, `t = 3`, `r = 1 - 2/t`, and a batch of
    /// `ceil(multiplier * 3 t d^(2-r) ln d)` atoms.
    pub fn defaults(d: usize, multiplier: f64) -> Self {
        let c0 = 10.0;
        let t = 3;
        let r_rate = 1.0 - 2.0 / t as f64;
        Self {
            c0,
            s: c0,
            r_rate,
            t,
            batch_size: default_batch_size(d, t, r_rate, multiplier),
            max_repeats: 20,
        }
    }
}

pub fn default_batch_size(d: usize, t: usize, r_rate: f64, multiplier: f64) -> usize {
    let d = d as f64;
    (multiplier * 3.0 * t as f64 * d.powf(2.0 - r_rate) * d.ln())
        .ceil()
        .max(1.0) as usize
}

/// `ceil(log_{1/B} d) + 2` with `B = sqrt(2) / c0`.
pub fn golfing_depth(d: usize, c0: f64) -> Result<usize> {
    let b = std::f64::consts::SQRT_2 / c0;
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "contraction B = sqrt(2)/c0 = {b} must lie in (0, 1)"
        )));
    }
    Ok(((d as f64).ln() / (1.0 / b).ln()).ceil().max(0.0) as usize + 2)
}

#[derive(Clone, Debug)]
pub struct CertificateReport {
    pub y: SymMatrix,
    pub gamma_measured: f64,
    pub delta_measured: f64,
    pub in_span: bool,
    /// Batches drawn, rejected ones included.
    pub batches_used: usize,
    /// Redraws needed at each stage.
    pub repeats: Vec<usize>,
    /// `|Q_0|_F, |Q_1|_F, ..., |Q_l|_F`.
    pub q_norms: Vec<f64>,
    pub depth: usize,
    /// Contraction factor `B` enforced at each stage.
    pub contraction: f64,
    /// Atoms of the accepted batches; `Y` lies in their span together with `I`.
    pub atoms: Vec<SymMatrix>,
}

impl CertificateReport {
    pub fn to_record(&self) -> Vec<(&'static str, String)> {
        let reps: Vec<String> = self.repeats.iter().map(|r| r.to_string()).collect();
        vec![
            ("gamma_measured", format!("{:.6e}", self.gamma_measured)),
            ("delta_measured", format!("{:.6e}", self.delta_measured)),
            ("in_span", self.in_span.to_string()),
            ("batches_used", self.batches_used.to_string()),
            ("repeats", reps.join(";")),
            ("depth", self.depth.to_string()),
            ("atoms", self.atoms.len().to_string()),
        ]
    }
}

/// Golfing: `Y_i = Y_{i-1} + S R_{Q_{i-1}} Q_{i-1}` with `Q_i = xx^T - (Y_i)_T` for unit
/// `x`, each stage on a fresh batch that must pass
/// `|P_{T-perp} S R Q|_op <= A |Q|_F` and `|P_T (S R - I) Q|_F <= B |Q|_F`.
pub fn golfing_certificate<S: AtomSource, R: Rng + ?Sized>(
    x: &DVector<f64>,
    source: &S,
    coeffs: &MomentCoefficients,
    params: &GolfingParams,
    rng: &mut R,
) -> Result<CertificateReport> {
    let norm = x.norm();
    if !(norm > 0.0) {
        return Err(Error::ZeroVector);
    }
    let d = x.len();
    if coeffs.dim() != d || source.spectrum().dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: coeffs.dim(),
        });
    }
    if params.batch_size == 0 {
        return Err(Error::InvalidParameter(
            "batch size must be positive".into(),
        ));
    }
    let depth = golfing_depth(d, params.c0)?;
    let a = 1.0 / params.c0;
    let b = std::f64::consts::SQRT_2 * a;
    let anchor = TangentAnchor::new(x / norm)?;

    let mut y = SymMatrix::zeros(d);
    let mut q = anchor.signal();
    let mut q_norms = vec![q.frobenius_norm()];
    let mut repeats = Vec::with_capacity(depth);
    let mut atoms = Vec::new();
    let mut batches_used = 0;
    for stage in 1..=depth {
        let qn = q.frobenius_norm();
        let mut accepted = None;
        let mut last = (f64::NAN, f64::NAN);
        for attempt in 0..=params.max_repeats {
            batches_used += 1;
            let batch = source.draw_many(params.batch_size, rng);
            let rq = truncated_r(
                &batch,
                coeffs,
                &anchor,
                &q,
                params.s,
                params.t,
                params.r_rate,
                &q,
            )?;
            let w = s_map(coeffs, &rq)?;
            let wt = anchor.project(&w)?;
            let op_ratio = (&w - &wt).op_norm()? / qn;
            let tan_ratio = (&wt - &q).frobenius_norm() / qn;
            last = (op_ratio, tan_ratio);
            if op_ratio <= a && tan_ratio <= b {
                accepted = Some((attempt, batch, w, wt));
                break;
            }
        }
        let Some((attempt, batch, w, wt)) = accepted else {
            return Err(Error::RepeatsExhausted {
                stage,
                repeats: params.max_repeats,
                op_ratio: last.0,
                tangent_ratio: last.1,
            });
        };
        repeats.push(attempt);
        atoms.extend(batch);
        y += &w;
        q -= &wt;
        q_norms.push(q.frobenius_norm());
    }
    let check = check_certificate(&y, anchor.unit(), &atoms, f64::INFINITY, f64::INFINITY)?;
    Ok(CertificateReport {
        y,
        gamma_measured: check.gamma_measured,
        delta_measured: check.delta_measured,
        in_span: check.in_span,
        batches_used,
        repeats,
        q_norms,
        depth,
        contraction: b,
        atoms,
    })
}
