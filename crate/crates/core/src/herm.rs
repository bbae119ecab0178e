//! Complex Hermitian matrices, matrix tuples and the dense linear algebra
//! shared by the rest of the crate.
//!
//! Everything is built on `nalgebra::DMatrix<Complex64>`. Hermitian inputs are
//! symmetrized on construction (`A <- (A + A*)/2`) so that round-off in user
//! data never leaks into the eigensolver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{RangeError, Result};

/// Dense complex matrix.
pub type CMat = DMatrix<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Tolerance on `|X*X - I|` accepted by [`Isometry::new`].
pub const ISOMETRY_TOL: f64 = 1e-10;

pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn real_diag(values: &[f64]) -> CMat {
    let n = values.len();
    CMat::from_fn(
        n,
        n,
        |i, j| if i == j { cplx(values[i], 0.0) } else { ZERO },
    )
}

/// Largest absolute entry deviation from Hermitian symmetry.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermMatrix(CMat);

impl HermMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(RangeError::dim("matrix columns", m.nrows(), m.ncols()));
        }
        if m.nrows() == 0 {
            return Err(RangeError::Invalid(
                "matrix dimension must be at least 1".into(),
            ));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(RangeError::Invalid("matrix has non-finite entries".into()));
        }
        let sym = (&m + m.adjoint()).scale(0.5);
        Ok(HermMatrix(sym))
    }

    pub fn from_real_diag(values: &[f64]) -> Result<Self> {
        Self::new(real_diag(values))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(RangeError::dim("row length", n, r.len()));
            }
        }
        Self::new(CMat::from_fn(n, n, |i, j| cplx(rows[i][j], 0.0)))
    }

    pub fn identity(n: usize) -> Self {
        HermMatrix(identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        HermMatrix(CMat::zeros(n, n))
    }

    pub fn scalar(x: f64) -> Self {
        HermMatrix(CMat::from_element(1, 1, cplx(x, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &CMat {
        &self.0
    }

    pub fn into_mat(self) -> CMat {
        self.0
    }

    pub fn eig(&self) -> Result<HermEigen> {
        herm_eig(self)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eig()?.values[0])
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        let e = self.eig()?;
        Ok(e.values[e.values.len() - 1])
    }

    pub fn scale(&self, c: f64) -> HermMatrix {
        HermMatrix(self.0.scale(c))
    }

    pub fn add(&self, other: &HermMatrix) -> Result<HermMatrix> {
        if self.dim() != other.dim() {
            return Err(RangeError::dim("matrix", self.dim(), other.dim()));
        }
        Ok(HermMatrix(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &HermMatrix) -> Result<HermMatrix> {
        if self.dim() != other.dim() {
            return Err(RangeError::dim("matrix", self.dim(), other.dim()));
        }
        Ok(HermMatrix(&self.0 - &other.0))
    }

    /// `L* self L` for any `dim x k` matrix `L`.
    pub fn congruence(&self, l: &CMat) -> Result<HermMatrix> {
        if l.nrows() != self.dim() {
            return Err(RangeError::dim("congruence rows", self.dim(), l.nrows()));
        }
        HermMatrix::new(l.adjoint() * &self.0 * l)
    }

    /// Real trace inner product `Re tr(self * other)`.
    pub fn trace_inner(&self, other: &HermMatrix) -> f64 {
        self.0
            .zip_fold(&other.0.transpose(), 0.0, |acc, a, b| acc + (a * b).re)
    }

    /// Block direct sum `self ⊕ other`.
    pub fn direct_sum(&self, other: &HermMatrix) -> HermMatrix {
        let (a, b) = (self.dim(), other.dim());
        let mut m = CMat::zeros(a + b, a + b);
        m.view_mut((0, 0), (a, a)).copy_from(&self.0);
        m.view_mut((a, a), (b, b)).copy_from(&other.0);
        HermMatrix(m)
    }

    pub fn principal_submatrix(&self, start: usize, len: usize) -> Result<HermMatrix> {
        if start + len > self.dim() || len == 0 {
            return Err(RangeError::Invalid(format!(
                "principal block {start}..{} outside dimension {}",
                start + len,
                self.dim()
            )));
        }
        Ok(HermMatrix(
            self.0.view((start, start), (len, len)).into_owned(),
        ))
    }
}

/// Spectral decomposition `A = U diag(values) U*` with ascending values.
#[derive(Clone, Debug)]
pub struct HermEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermEigen {
    /// Rebuild `U diag(f(values)) U*`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CMat {
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            scaled.column_mut(k).scale_mut(s);
        }
        scaled * self.vectors.adjoint()
    }
}

pub fn herm_eig(a: &HermMatrix) -> Result<HermEigen> {
    let n = a.dim();
    let eig = SymmetricEigen::try_new(a.0.clone(), f64::EPSILON, 100 * n * n.max(8))
        .ok_or(RangeError::SolverFailure { dim: n })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermEigen { values, vectors })
}

/// Nearest positive semidefinite matrix in Frobenius norm.
pub fn psd_project(a: &HermMatrix) -> Result<HermMatrix> {
    let e = herm_eig(a)?;
    if e.values[0] >= 0.0 {
        return Ok(a.clone());
    }
    HermMatrix::new(e.map_values(|x| x.max(0.0)))
}

/// Positive square root, clipping negative eigenvalues.
pub fn psd_sqrt(a: &HermMatrix) -> Result<HermMatrix> {
    let e = herm_eig(a)?;
    HermMatrix::new(e.map_values(|x| x.max(0.0).sqrt()))
}

/// Inverse square root of a positive definite matrix.
pub fn pd_inv_sqrt(a: &HermMatrix) -> Result<HermMatrix> {
    let e = herm_eig(a)?;
    if e.values[0] <= 0.0 {
        return Err(RangeError::Invalid(format!(
            "matrix is not positive definite (min eigenvalue {:e})",
            e.values[0]
        )));
    }
    HermMatrix::new(e.map_values(|x| 1.0 / x.sqrt()))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            out.view_mut((i * br, j * bc), (br, bc))
                .zip_apply(b, |o, x| *o = s * x);
        }
    }
    out
}

/// Accumulate `out += a ⊗ b`.
fn kron_add(out: &mut CMat, a: &CMat, b: &CMat) {
    let (br, bc) = b.shape();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            out.view_mut((i * br, j * bc), (br, bc))
                .zip_apply(b, |o, x| *o += s * x);
        }
    }
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if a.iter().all(|z| *z == ZERO) {
        return 0.0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    sv.iter().cloned().fold(0.0, f64::max)
}

/// Maximum spectral norm of `a - b`; both must share a shape.
pub fn norm_diff(a: &CMat, b: &CMat) -> f64 {
    spectral_norm(&(a - b))
}

/// `|X*X - I|` in spectral norm.
pub fn isometry_defect(x: &CMat) -> f64 {
    let g = x.adjoint() * x - identity(x.ncols());
    spectral_norm(&g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermTuple {
    mats: Vec<HermMatrix>,
}

impl HermTuple {
    pub fn new(mats: Vec<HermMatrix>) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| RangeError::Invalid("tuple must contain at least one matrix".into()))?;
        let d = first.dim();
        for (j, m) in mats.iter().enumerate() {
            if m.dim() != d {
                return Err(RangeError::dim(format!("tuple[{j}]"), d, m.dim()));
            }
        }
        Ok(HermTuple { mats })
    }

    pub fn from_mats(mats: Vec<CMat>) -> Result<Self> {
        Self::new(
            mats.into_iter()
                .map(HermMatrix::new)
                .collect::<Result<_>>()?,
        )
    }

    /// Scalar tuple (q = 1) from a point in R^m.
    pub fn from_point(x: &[f64]) -> Result<Self> {
        Self::new(x.iter().map(|&v| HermMatrix::scalar(v)).collect())
    }

    /// `(D_1, ..., D_m)` with `D_j = diag(columns[k][j])`.
    pub fn diagonal(points: &[Vec<f64>]) -> Result<Self> {
        let m = points
            .first()
            .map(|p| p.len())
            .ok_or_else(|| RangeError::Invalid("no diagonal points".into()))?;
        let mut mats = Vec::with_capacity(m);
        for j in 0..m {
            let diag: Vec<f64> = points.iter().map(|p| p[j]).collect();
            mats.push(HermMatrix::from_real_diag(&diag)?);
        }
        Self::new(mats)
    }

    /// Tuple length m.
    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mats[0].dim()
    }

    pub fn get(&self, j: usize) -> &HermMatrix {
        &self.mats[j]
    }

    pub fn mats(&self) -> &[HermMatrix] {
        &self.mats
    }

    pub fn iter(&self) -> std::slice::Iter<'_, HermMatrix> {
        self.mats.iter()
    }

    pub fn map(&self, f: impl Fn(&HermMatrix) -> Result<HermMatrix>) -> Result<HermTuple> {
        HermTuple::new(self.mats.iter().map(f).collect::<Result<_>>()?)
    }

    pub fn congruence(&self, l: &CMat) -> Result<HermTuple> {
        self.map(|a| a.congruence(l))
    }

    pub fn direct_sum(&self, other: &HermTuple) -> Result<HermTuple> {
        check_len(self.len(), other.len())?;
        HermTuple::new(
            self.mats
                .iter()
                .zip(other.iter())
                .map(|(a, b)| a.direct_sum(b))
                .collect(),
        )
    }

    /// `I_p ⊗ T_j` componentwise.
    pub fn amplify(&self, p: usize) -> Result<HermTuple> {
        self.map(|a| HermMatrix::new(kron(&identity(p), a.as_mat())))
    }

    pub fn add(&self, other: &HermTuple) -> Result<HermTuple> {
        check_len(self.len(), other.len())?;
        HermTuple::new(
            self.mats
                .iter()
                .zip(other.iter())
                .map(|(a, b)| a.add(b))
                .collect::<Result<_>>()?,
        )
    }

    /// Largest spectral-norm distance between matching components.
    pub fn max_distance(&self, other: &HermTuple) -> Result<f64> {
        check_len(self.len(), other.len())?;
        if self.dim() != other.dim() {
            return Err(RangeError::dim("tuple dimension", self.dim(), other.dim()));
        }
        Ok(self
            .mats
            .iter()
            .zip(other.iter())
            .map(|(a, b)| norm_diff(a.as_mat(), b.as_mat()))
            .fold(0.0, f64::max))
    }

    /// Scalar entries of a q = 1 tuple.
    pub fn as_point(&self) -> Option<Vec<f64>> {
        (self.dim() == 1).then(|| self.mats.iter().map(|a| a.as_mat()[(0, 0)].re).collect())
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(RangeError::LengthMismatch { expected, found });
    }
    Ok(())
}

/// Coefficients `(R_0, R_1, ..., R_m)` of a matrix pencil, all `q x q`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormTestTuple {
    mats: Vec<CMat>,
}

impl NormTestTuple {
    pub fn new(mats: Vec<CMat>) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| RangeError::Invalid("pencil needs at least R_0".into()))?;
        let q = first.nrows();
        if q == 0 {
            return Err(RangeError::Invalid(
                "pencil coefficients must be non-empty".into(),
            ));
        }
        for (j, r) in mats.iter().enumerate() {
            if r.nrows() != q || r.ncols() != q {
                return Err(RangeError::dim(
                    format!("R[{j}]"),
                    q,
                    r.nrows().max(r.ncols()),
                ));
            }
        }
        Ok(NormTestTuple { mats })
    }

    /// Scalar pencil (q = 1) from real coefficients.
    pub fn scalar(coeffs: &[f64]) -> Result<Self> {
        Self::new(
            coeffs
                .iter()
                .map(|&c| CMat::from_element(1, 1, cplx(c, 0.0)))
                .collect(),
        )
    }

    /// `(I_q, 0, ..., 0)` with m trailing zeros.
    pub fn identity_pencil(q: usize, m: usize) -> Self {
        let mut mats = vec![identity(q)];
        mats.extend((0..m).map(|_| CMat::zeros(q, q)));
        NormTestTuple { mats }
    }

    pub fn q(&self) -> usize {
        self.mats[0].nrows()
    }

    /// Number of non-constant coefficients m.
    pub fn m(&self) -> usize {
        self.mats.len() - 1
    }

    pub fn r0(&self) -> &CMat {
        &self.mats[0]
    }

    pub fn coeffs(&self) -> &[CMat] {
        &self.mats[1..]
    }

    pub fn mats(&self) -> &[CMat] {
        &self.mats
    }

    pub fn scaled(&self, c: f64) -> NormTestTuple {
        NormTestTuple {
            mats: self.mats.iter().map(|r| r.scale(c)).collect(),
        }
    }
}

/// Build `R_0 ⊗ I + Σ_j R_j ⊗ T_j`.
pub fn pencil_matrix(r: &NormTestTuple, t: &HermTuple) -> Result<CMat> {
    check_len(r.m(), t.len())?;
    let q = r.q();
    let d = t.dim();
    let mut out = CMat::zeros(q * d, q * d);
    kron_add(&mut out, r.r0(), &identity(d));
    for (rj, tj) in r.coeffs().iter().zip(t.iter()) {
        kron_add(&mut out, rj, tj.as_mat());
    }
    Ok(out)
}

/// `|R_0 ⊗ I + Σ_j R_j ⊗ T_j|` in spectral norm.
pub fn pencil_norm(r: &NormTestTuple, t: &HermTuple) -> Result<f64> {
    Ok(spectral_norm(&pencil_matrix(r, t)?))
}

/// A `rows x cols` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Isometry(CMat);

impl Isometry {
    pub fn new(x: CMat) -> Result<Self> {
        Self::with_tolerance(x, ISOMETRY_TOL)
    }

    pub fn with_tolerance(x: CMat, tol: f64) -> Result<Self> {
        if x.ncols() == 0 || x.ncols() > x.nrows() {
            return Err(RangeError::Invalid(format!(
                "isometry shape {}x{} needs 1 <= cols <= rows",
                x.nrows(),
                x.ncols()
            )));
        }
        let residual = isometry_defect(&x);
        if !(residual <= tol) {
            return Err(RangeError::NotIsometry { residual });
        }
        Ok(Isometry(x))
    }

    /// Coordinate embedding onto the basis vectors `indices`.
    pub fn coordinate(rows: usize, indices: &[usize]) -> Result<Self> {
        let mut x = CMat::zeros(rows, indices.len());
        for (c, &i) in indices.iter().enumerate() {
            if i >= rows {
                return Err(RangeError::Invalid(format!(
                    "coordinate {i} outside {rows}"
                )));
            }
            x[(i, c)] = ONE;
        }
        Self::new(x)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_mat(&self) -> &CMat {
        &self.0
    }

    pub fn into_mat(self) -> CMat {
        self.0
    }

    pub fn defect(&self) -> f64 {
        isometry_defect(&self.0)
    }

    /// `(X* A_1 X, ..., X* A_m X)`.
    pub fn compress(&self, a: &HermTuple) -> Result<HermTuple> {
        a.congruence(&self.0)
    }
}

/// Orthonormalize the columns of `x` (Householder QR, phases fixed so the
/// diagonal of R is nonnegative).
pub fn orthonormalize(x: &CMat) -> CMat {
    let qr = x.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..q.ncols().min(r.nrows()) {
        let d = r[(k, k)];
        let n = d.norm();
        if n > 0.0 {
            let phase = d / n;
            let col = q.column(k).map(|z| z * phase);
            q.set_column(k, &col);
        }
    }
    q
}

/// Gram-Schmidt (two passes) of `candidates` against an existing orthonormal
/// basis; vectors whose residual norm falls below `drop_tol` are discarded.
pub fn extend_orthonormal(basis: &CMat, candidates: &CMat, drop_tol: f64) -> CMat {
    let n = basis.nrows().max(candidates.nrows());
    let mut cols: Vec<DVector<Complex64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    for cand in candidates.column_iter() {
        let mut v = cand.into_owned();
        let scale = v.norm();
        if scale == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for u in &cols {
                let proj = u.dotc(&v);
                v.axpy(-proj, u, ONE);
            }
        }
        let nv = v.norm();
        if nv > drop_tol * scale.max(1.0) {
            cols.push(v.unscale(nv));
        }
    }
    if cols.is_empty() {
        return CMat::zeros(n, 0);
    }
    CMat::from_columns(&cols)
}

/// Orthonormal basis of the span of the columns of `x`.
pub fn column_space(x: &CMat, drop_tol: f64) -> CMat {
    extend_orthonormal(&CMat::zeros(x.nrows(), 0), x, drop_tol)
}

/// Extend an isometry to a unitary whose leading columns are `x`.
pub fn complete_to_unitary(x: &CMat) -> CMat {
    let n = x.nrows();
    extend_orthonormal(x, &identity(n), 1e-12)
}

/// Orthonormal basis of the orthogonal complement of the column span of `basis`
/// (assumed orthonormal).
pub fn orthogonal_complement(basis: &CMat) -> CMat {
    let full = complete_to_unitary(basis);
    full.columns(basis.ncols(), full.ncols() - basis.ncols())
        .into_owned()
}

/// Orthonormal-coordinate vectorization of a Hermitian matrix: diagonal entries,
/// then `√2 Re` and `√2 Im` of the strict upper triangle. Isometric for the real
/// inner product `Re tr(X* Y)`.
pub(crate) fn svec(a: &CMat) -> DVector<f64> {
    let n = a.nrows();
    let mut v = DVector::zeros(n * n);
    let mut k = 0;
    for i in 0..n {
        v[k] = a[(i, i)].re;
        k += 1;
    }
    let s2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        for j in (i + 1)..n {
            v[k] = s2 * a[(i, j)].re;
            v[k + 1] = s2 * a[(i, j)].im;
            k += 2;
        }
    }
    v
}

pub(crate) fn unsvec(v: &[f64], n: usize) -> CMat {
    let mut a = CMat::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        a[(i, i)] = cplx(v[k], 0.0);
        k += 1;
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in (i + 1)..n {
            let z = cplx(h * v[k], h * v[k + 1]);
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
            k += 2;
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        cplx(re, 0.0)
    }

    #[test]
    fn kron_identity_and_diagonal() {
        assert_eq!(kron(&identity(2), &identity(3)), identity(6));
        let z = real_diag(&[1.0, -1.0]);
        assert_eq!(kron(&z, &identity(2)), real_diag(&[1.0, 1.0, -1.0, -1.0]));
        let b = CMat::from_fn(2, 3, |i, j| cplx(i as f64, j as f64));
        let a = CMat::from_element(1, 1, cplx(2.0, -1.0));
        assert_eq!(kron(&a, &b), b.map(|x| x * cplx(2.0, -1.0)));
    }

    #[test]
    fn spectral_norm_examples() {
        assert!((spectral_norm(&real_diag(&[3.0, -5.0])) - 5.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&CMat::zeros(3, 3)), 0.0);
        let nil = CMat::from_row_slice(2, 2, &[c(0.0), c(2.0), c(0.0), c(0.0)]);
        assert!((spectral_norm(&nil) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eig_examples() {
        let e = herm_eig(&HermMatrix::identity(3)).unwrap();
        assert!(e.values.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let e = herm_eig(&HermMatrix::from_real_diag(&[2.0, -1.0]).unwrap()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-12 && (e.values[1] - 2.0).abs() < 1e-12);
        let x = HermMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let e = herm_eig(&x).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-12 && (e.values[1] - 1.0).abs() < 1e-12);
        let rebuilt = e.map_values(|v| v);
        assert!(norm_diff(&rebuilt, x.as_mat()) < 1e-12);
    }

    #[test]
    fn complex_eig_residual() {
        let a = CMat::from_fn(5, 5, |i, j| {
            cplx((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i as f64) - (j as f64))
        });
        let h = HermMatrix::new(a).unwrap();
        let e = h.eig().unwrap();
        let resid = norm_diff(&e.map_values(|v| v), h.as_mat());
        assert!(resid <= 1e-10 * spectral_norm(h.as_mat()));
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(isometry_defect(&e.vectors) < 1e-10);
    }

    #[test]
    fn psd_project_examples() {
        let p = psd_project(&HermMatrix::from_real_diag(&[1.0, -2.0]).unwrap()).unwrap();
        assert!(norm_diff(p.as_mat(), &real_diag(&[1.0, 0.0])) < 1e-12);
        let id = HermMatrix::identity(3);
        assert_eq!(psd_project(&id).unwrap(), id);
        let neg = HermMatrix::identity(3).scale(-1.0);
        assert!(spectral_norm(psd_project(&neg).unwrap().as_mat()) < 1e-12);
    }

    #[test]
    fn constructor_symmetrizes() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0), cplx(2.0, 1.0), cplx(0.0, 0.0), c(3.0)]);
        let h = HermMatrix::new(a).unwrap();
        assert!(hermitian_defect(h.as_mat()) < 1e-12);
        assert!(HermMatrix::new(CMat::zeros(2, 3)).is_err());
        assert!(HermMatrix::new(CMat::zeros(0, 0)).is_err());
    }

    #[test]
    fn pencil_norm_examples() {
        let t = HermTuple::new(vec![HermMatrix::from_real_diag(&[1.0, -1.0]).unwrap()]).unwrap();
        let r = NormTestTuple::scalar(&[0.0, 1.0]).unwrap();
        assert!((pencil_norm(&r, &t).unwrap() - 1.0).abs() < 1e-12);
        let id = NormTestTuple::identity_pencil(3, 1);
        assert!((pencil_norm(&id, &t).unwrap() - 1.0).abs() < 1e-12);
        let bad = NormTestTuple::scalar(&[0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            pencil_norm(&bad, &t),
            Err(RangeError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn svec_is_isometric_inverse() {
        let a = HermMatrix::new(CMat::from_fn(4, 4, |i, j| {
            cplx((i + 2 * j) as f64, (i as f64) - 2.0 * (j as f64))
        }))
        .unwrap();
        let v = svec(a.as_mat());
        assert!((v.norm() - a.as_mat().norm()).abs() < 1e-12);
        assert!(norm_diff(&unsvec(v.as_slice(), 4), a.as_mat()) < 1e-12);
    }

    #[test]
    fn unitary_completion() {
        let x = orthonormalize(&CMat::from_fn(5, 2, |i, j| {
            cplx((i + j) as f64, (i * j) as f64 - 1.0)
        }));
        assert!(isometry_defect(&x) < 1e-12);
        let u = complete_to_unitary(&x);
        assert_eq!(u.shape(), (5, 5));
        assert!(isometry_defect(&u) < 1e-12);
        assert!(norm_diff(&u.columns(0, 2).into_owned(), &x) < 1e-12);
        let comp = orthogonal_complement(&x);
        assert!(spectral_norm(&(comp.adjoint() * &x)) < 1e-12);
    }

    #[test]
    fn isometry_rejects_non_orthonormal() {
        let x = CMat::from_element(2, 1, c(1.0));
        assert!(matches!(
            Isometry::new(x),
            Err(RangeError::NotIsometry { .. })
        ));
        let e = Isometry::coordinate(3, &[0, 2]).unwrap();
        assert_eq!(e.cols(), 2);
    }
}
