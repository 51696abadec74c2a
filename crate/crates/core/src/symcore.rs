//! Real symmetric matrices with the Hilbert-Schmidt inner product, measurement
//! spectra, and the tangent space of rank-one matrices at `xx^T`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry above which construction is rejected instead of symmetrized.
pub const SYMMETRY_TOL: f64 = 1e-10;

const EIGEN_MAX_SWEEPS: usize = 10_000;

/// An element of the space of `d x d` real symmetric matrices.
///
/// The full square is stored; every constructor guarantees `m[(i, j)] == m[(j, i)]`
/// bit-for-bit.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{}", self.m)
    }
}

/// Eigenvalues in nonincreasing order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Number of coordinates of a `d x d` symmetric matrix, `d(d+1)/2`.
pub fn sym_dim(d: usize) -> usize {
    d * (d + 1) / 2
}

fn mirror(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

impl SymMatrix {
    /// Wraps a square matrix, symmetrizing float noise and rejecting real asymmetry.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidParameter(
                "dimension must be at least 1".into(),
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = m.norm();
        let asym = (&m - m.transpose()).norm();
        if norm > 0.0 && asym > SYMMETRY_TOL * norm {
            return Err(Error::NotSymmetric {
                asymmetry: asym / norm,
            });
        }
        let mut m = m;
        mirror(&mut m);
        Ok(Self { m })
    }

    /// Builds from row-major nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: r.len(),
                });
            }
        }
        Self::from_matrix(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    /// Symmetrizes an arbitrary square matrix as `(M + M^T) / 2` without checking.
    pub(crate) fn symmetrized(mut m: DMatrix<f64>) -> Self {
        mirror(&mut m);
        Self { m }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            m: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
        }
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(values)),
        }
    }

    /// `x x^T`.
    pub fn outer(x: &DVector<f64>) -> Self {
        Self {
            m: x * x.transpose(),
        }
    }

    /// `x z^T + z x^T`.
    pub fn sym_outer(x: &DVector<f64>, z: &DVector<f64>) -> Self {
        let xz = x * z.transpose();
        Self::symmetrized(&xz + xz.transpose())
    }

    /// Upper-triangle entries in row-major order, `d(d+1)/2` values.
    pub fn from_upper(d: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != sym_dim(d) {
            return Err(Error::DimensionMismatch {
                expected: sym_dim(d),
                found: upper.len(),
            });
        }
        let mut m = DMatrix::zeros(d, d);
        let mut it = upper.iter();
        for i in 0..d {
            for j in i..d {
                let v = *it.next().unwrap();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(Self { m })
    }

    pub fn upper(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(sym_dim(d));
        for i in 0..d {
            for j in i..d {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    /// Coordinates in the orthonormal basis returned by [`sym_basis`]: diagonal entries
    /// as-is, off-diagonal entries scaled by `sqrt(2)`, upper triangle row-major.
    /// The Euclidean inner product of two coordinate vectors equals [`hs_inner`].
    pub fn svec(&self) -> DVector<f64> {
        let d = self.dim();
        let mut out = DVector::zeros(sym_dim(d));
        let mut idx = 0;
        for i in 0..d {
            for j in i..d {
                out[idx] = if i == j {
                    self.m[(i, i)]
                } else {
                    std::f64::consts::SQRT_2 * self.m[(i, j)]
                };
                idx += 1;
            }
        }
        out
    }

    pub fn from_svec(d: usize, v: &DVector<f64>) -> Result<Self> {
        if v.len() != sym_dim(d) {
            return Err(Error::DimensionMismatch {
                expected: sym_dim(d),
                found: v.len(),
            });
        }
        let mut m = DMatrix::zeros(d, d);
        let mut idx = 0;
        for i in 0..d {
            for j in i..d {
                if i == j {
                    m[(i, i)] = v[idx];
                } else {
                    let e = v[idx] * std::f64::consts::FRAC_1_SQRT_2;
                    m[(i, j)] = e;
                    m[(j, i)] = e;
                }
                idx += 1;
            }
        }
        Ok(Self { m })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// `x^T X x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.m * x))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { m: &self.m * c }
    }

    /// `X + c I`.
    pub fn add_identity(&self, c: f64) -> Self {
        let mut m = self.m.clone();
        for i in 0..self.dim() {
            m[(i, i)] += c;
        }
        Self { m }
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &SymMatrix) {
        self.m.zip_apply(&other.m, |a, b| *a += c * b);
    }

    /// Jordan product `(XY + YX) / 2`.
    pub fn jordan(&self, other: &SymMatrix) -> Self {
        let p = &self.m * &other.m;
        Self::symmetrized(&p + p.transpose()).scaled(0.5)
    }

    /// Largest eigenvalue magnitude.
    pub fn op_norm(&self) -> Result<f64> {
        let e = spectral_decompose(self)?;
        Ok(e.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.is_finite())
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            m: &self.m + &rhs.m,
        }
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            m: &self.m - &rhs.m,
        }
    }
}

impl Add for SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: SymMatrix) -> SymMatrix {
        SymMatrix { m: self.m + rhs.m }
    }
}

impl Sub for SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: SymMatrix) -> SymMatrix {
        SymMatrix { m: self.m - rhs.m }
    }
}

impl AddAssign<&SymMatrix> for SymMatrix {
    fn add_assign(&mut self, rhs: &SymMatrix) {
        self.m += &rhs.m;
    }
}

impl SubAssign<&SymMatrix> for SymMatrix {
    fn sub_assign(&mut self, rhs: &SymMatrix) {
        self.m -= &rhs.m;
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, c: f64) -> SymMatrix {
        self.scaled(c)
    }
}

impl Mul<f64> for SymMatrix {
    type Output = SymMatrix;
    fn mul(self, c: f64) -> SymMatrix {
        SymMatrix { m: self.m * c }
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self.scaled(-1.0)
    }
}

/// Orthonormal basis `{E_ii, (E_ij + E_ji)/sqrt(2)}` of the symmetric matrices, in
/// the same order as [`SymMatrix::svec`].
pub fn sym_basis(d: usize) -> Vec<SymMatrix> {
    let mut out = Vec::with_capacity(sym_dim(d));
    for i in 0..d {
        for j in i..d {
            let mut m = DMatrix::zeros(d, d);
            if i == j {
                m[(i, i)] = 1.0;
            } else {
                m[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
                m[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
            }
            out.push(SymMatrix { m });
        }
    }
    out
}

fn check_dims(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Hilbert-Schmidt inner product `trace(XY)`.
pub fn hs_inner(x: &SymMatrix, y: &SymMatrix) -> Result<f64> {
    check_dims(x, y)?;
    Ok(x.m.dot(&y.m))
}

/// Eigen-decomposition with nonincreasing eigenvalues.
pub fn spectral_decompose(x: &SymMatrix) -> Result<Eigen> {
    eigen_of(x.m.clone())
}

pub(crate) fn eigen_of(m: DMatrix<f64>) -> Result<Eigen> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let d = m.nrows();
    let eig =
        SymmetricEigen::try_new(m, f64::EPSILON, EIGEN_MAX_SWEEPS).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let vectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigen { values, vectors })
}

/// `V diag(f(values)) V^T`.
pub(crate) fn recompose(e: &Eigen, f: impl Fn(f64) -> f64) -> SymMatrix {
    let mut scaled = e.vectors.clone();
    for (c, &v) in e.values.iter().enumerate() {
        let s = f(v);
        scaled.column_mut(c).scale_mut(s);
    }
    SymMatrix::symmetrized(&scaled * e.vectors.transpose())
}

/// Frobenius-nearest positive semidefinite matrix.
pub fn psd_project(x: &SymMatrix) -> Result<SymMatrix> {
    let e = spectral_decompose(x)?;
    Ok(recompose(&e, |v| v.max(0.0)))
}

/// `(trace(X), trace(X^2), ..., trace(X^t_max))` from the eigenvalues.
pub fn power_sums(x: &SymMatrix, t_max: usize) -> Result<Vec<f64>> {
    if t_max == 0 {
        return Err(Error::InvalidParameter("t_max must be at least 1".into()));
    }
    let e = spectral_decompose(x)?;
    Ok(power_sums_of(&e.values, t_max))
}

pub(crate) fn power_sums_of(values: &[f64], t_max: usize) -> Vec<f64> {
    (1..=t_max)
        .map(|i| values.iter().map(|v| v.powi(i as i32)).sum())
        .collect()
}

/// The eigenvalue profile `1 >= l_1 >= ... >= l_k > 0 = l_{k+1} = ... = l_d` of a
/// measurement orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    rank: usize,
}

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSpectrum("empty spectrum".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpectrum("non-finite entry".into()));
        }
        if values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidSpectrum("entries must lie in [0, 1]".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidSpectrum(
                "entries must be nonincreasing".into(),
            ));
        }
        let rank = values.iter().filter(|&&v| v > 0.0).count();
        if rank == 0 {
            return Err(Error::InvalidSpectrum(
                "at least one entry must be positive".into(),
            ));
        }
        Ok(Self { values, rank })
    }

    /// `k` ones followed by `d - k` zeros.
    pub fn projector(d: usize, k: usize) -> Result<Self> {
        if k == 0 || k > d {
            return Err(Error::InvalidSpectrum(format!(
                "projector rank {k} must lie in 1..={d}"
            )));
        }
        let mut v = vec![0.0; d];
        v[..k].iter_mut().for_each(|x| *x = 1.0);
        Self::new(v)
    }

    /// `(1, 0, ..., 0)`.
    pub fn e1(d: usize) -> Result<Self> {
        Self::projector(d, 1)
    }

    /// Nonzero part padded with zeros up to dimension `d`.
    pub fn padded(nonzero: &[f64], d: usize) -> Result<Self> {
        if nonzero.len() > d {
            return Err(Error::InvalidSpectrum(format!(
                "{} values do not fit dimension {d}",
                nonzero.len()
            )));
        }
        let mut v = nonzero.to_vec();
        v.resize(d, 0.0);
        Self::new(v)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `D_lambda`.
    pub fn diag(&self) -> SymMatrix {
        SymMatrix::from_diagonal(&self.values)
    }

    /// `s_i = trace(D^i)` for `i = 1..=t_max`.
    pub fn power_sums(&self, t_max: usize) -> Vec<f64> {
        power_sums_of(&self.values, t_max)
    }

    /// True when every entry is 0 or 1, i.e. atoms are orthogonal projectors.
    pub fn is_projector(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// A nonzero vector `x` fixing the tangent space `T_x = {x z^T + z x^T}`.
#[derive(Clone, Debug)]
pub struct TangentAnchor {
    x: DVector<f64>,
    unit: DVector<f64>,
    norm_sq: f64,
}

impl TangentAnchor {
    pub fn new(x: DVector<f64>) -> Result<Self> {
        let norm_sq = x.norm_squared();
        if !(norm_sq > 0.0) || !norm_sq.is_finite() {
            return Err(Error::ZeroVector);
        }
        let unit = &x / norm_sq.sqrt();
        Ok(Self { x, unit, norm_sq })
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn unit(&self) -> &DVector<f64> {
        &self.unit
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `x x^T` for the stored (not normalized) vector.
    pub fn signal(&self) -> SymMatrix {
        SymMatrix::outer(&self.x)
    }

    fn check(&self, m: &SymMatrix) -> Result<()> {
        if m.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.dim(),
            });
        }
        Ok(())
    }

    /// Orthogonal projection onto `T_x`:
    /// `X -> P X + X P - <X, P> P` with `P = u u^T`, `u = x / |x|`.
    pub fn project(&self, m: &SymMatrix) -> Result<SymMatrix> {
        self.check(m)?;
        Ok(self.project_unchecked(m))
    }

    pub(crate) fn project_unchecked(&self, m: &SymMatrix) -> SymMatrix {
        let u = &self.unit;
        let v = m.as_matrix() * u;
        let c = u.dot(&v);
        let uv = u * v.transpose();
        let mut out = &uv + uv.transpose();
        out.ger(-c, u, u, 1.0);
        SymMatrix::symmetrized(out)
    }

    /// Projection onto the orthogonal complement of `T_x`.
    pub fn project_complement(&self, m: &SymMatrix) -> Result<SymMatrix> {
        Ok(m - &self.project(m)?)
    }

    /// Writes `Z` in `T_x` as `q (z u^T + u z^T)` with `q >= 0`, `|z| = 1`, `u` the unit
    /// anchor. From `Z u = q (z + (z.u) u)` and `u^T Z u = 2 q (z.u)` follows
    /// `q z = Z u - (u^T Z u / 2) u`.
    pub fn decompose(&self, z_mat: &SymMatrix) -> Result<(f64, DVector<f64>)> {
        self.check(z_mat)?;
        let norm = z_mat.frobenius_norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        let off = (z_mat - &self.project_unchecked(z_mat)).frobenius_norm() / norm;
        if off > 1e-8 {
            return Err(Error::NotInTangentSpace { residual: off });
        }
        let u = &self.unit;
        let zu = z_mat.as_matrix() * u;
        let w = &zu - u * (0.5 * u.dot(&zu));
        let q = w.norm();
        if q == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok((q, w / q))
    }

    /// Orthonormal basis of `T_x`: `u u^T` and `(u v_i^T + v_i u^T)/sqrt(2)` for an
    /// orthonormal completion `v_2..v_d` of `u`.
    pub fn tangent_basis(&self) -> Vec<SymMatrix> {
        let d = self.dim();
        let frame = orthonormal_completion(&self.unit);
        let mut out = Vec::with_capacity(d);
        out.push(SymMatrix::outer(&self.unit));
        for i in 1..d {
            let v = frame.column(i).into_owned();
            out.push(SymMatrix::sym_outer(&self.unit, &v).scaled(std::f64::consts::FRAC_1_SQRT_2));
        }
        out
    }
}

/// Householder reflection whose first column is `+-u`; columns form an orthonormal basis.
fn orthonormal_completion(u: &DVector<f64>) -> DMatrix<f64> {
    let d = u.len();
    let mut v = u.clone();
    let sign = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign;
    let vv = v.norm_squared();
    let mut h = DMatrix::identity(d, d);
    if vv > 0.0 {
        h.ger(-2.0 / vv, &v, &v, 1.0);
    }
    h
}

/// Tangent-space projection as a free function.
pub fn tangent_project(anchor: &TangentAnchor, x: &SymMatrix) -> Result<SymMatrix> {
    anchor.project(x)
}

/// Tangent-space decomposition as a free function.
pub fn tangent_decompose(anchor: &TangentAnchor, z: &SymMatrix) -> Result<(f64, DVector<f64>)> {
    anchor.decompose(z)
}
