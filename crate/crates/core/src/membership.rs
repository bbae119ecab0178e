//! Membership oracle for the joint q-matricial range of a finite tuple.
//!
//! `B ∈ W^q(A)` iff some Choi matrix `J` (`dq x dq`) is PSD, has identity
//! partial trace, and maps every `A_j` to `B_j`. The PSD cone and the affine
//! constraint set are intersected with Dykstra's alternating projections.
//!
//! Outcomes:
//! * a PSD iterate that satisfies the affine constraints (directly, after an
//!   exact affine correction, or after a face-restricted correction) becomes a
//!   `Member` certificate;
//! * a persistent gap is turned into a separating pencil, which is a
//!   candidate norm-inequality witness; any witness that re-verifies yields
//!   `NotMember`;
//! * otherwise `Inconclusive`, carrying the final gap.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::choi::{ChoiMatrix, UNITAL_TOL};
use crate::error::{RangeError, Result};
use crate::herm::{
    check_len, identity, kron, pencil_matrix, svec, unsvec, CMat, HermMatrix, HermTuple,
    NormTestTuple,
};
use crate::witness::{search_witness_from, Witness, WitnessOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Member,
    NotMember,
    Inconclusive,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Member => "Member",
            Status::NotMember => "NotMember",
            Status::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct MembershipVerdict {
    pub status: Status,
    /// Certificate for `Member`.
    pub certificate: Option<ChoiMatrix>,
    /// Norm-inequality witness for `NotMember`.
    pub witness: Option<Witness>,
    /// Frobenius distance between the final pair of projected iterates.
    pub gap: f64,
    pub iterations: usize,
}

impl MembershipVerdict {
    pub fn is_member(&self) -> bool {
        self.status == Status::Member
    }

    pub fn is_not_member(&self) -> bool {
        self.status == Status::NotMember
    }
}

#[derive(Clone, Debug)]
pub struct MembershipOptions {
    pub max_iter: usize,
    pub gap_tol: f64,
    pub member_tol: f64,
    /// Iterations between certificate / separation probes.
    pub check_every: usize,
    pub witness: WitnessOptions,
    /// Skip the randomized witness search when the separating pencil fails.
    pub skip_search: bool,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        MembershipOptions {
            max_iter: 5000,
            gap_tol: 1e-6,
            member_tol: 1e-7,
            check_every: 10,
            witness: WitnessOptions::default(),
            skip_search: false,
        }
    }
}

impl MembershipOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.witness.seed = seed;
        self
    }
}

/// Linear constraint operator `L(J) = (Σ_k J_kk, Φ_J(A_1), ..., Φ_J(A_m))` in
/// orthonormal Hermitian coordinates, with the data for the affine projection.
struct AffineConstraints {
    n: usize,
    q: usize,
    m: usize,
    a: HermTuple,
    /// `c x n²` with `c = (m+1) q²`.
    op: DMatrix<f64>,
    /// `L^T (L L^T)^+`, `n² x c`.
    pinv: DMatrix<f64>,
    /// `(L L^T)^+`.
    gram_pinv: DMatrix<f64>,
    target: DVector<f64>,
}

impl AffineConstraints {
    fn new(a: &HermTuple, b: &HermTuple) -> Result<Self> {
        let (d, q, m) = (a.dim(), b.dim(), a.len());
        let n = d * q;
        let rows_per = q * q;
        let c = (m + 1) * rows_per;
        let mut op = DMatrix::<f64>::zeros(c, n * n);
        // Row for output basis element F is svec(L*(F)); L* = I_d ⊗ Y_0 + Σ A_j^T ⊗ Y_j.
        let mut unit = vec![0.0; rows_per];
        for s in 0..rows_per {
            unit.iter_mut().for_each(|x| *x = 0.0);
            unit[s] = 1.0;
            let f = unsvec(&unit, q);
            let row0 = svec(&kron(&identity(d), &f));
            op.row_mut(s).copy_from(&row0.transpose());
            for (j, aj) in a.iter().enumerate() {
                let row = svec(&kron(&aj.as_mat().transpose(), &f));
                op.row_mut((j + 1) * rows_per + s)
                    .copy_from(&row.transpose());
            }
        }
        let gram = &op * op.transpose();
        let gram_pinv = sym_pinv(&gram);
        let pinv = op.transpose() * &gram_pinv;
        let mut target = DVector::zeros(c);
        target.rows_mut(0, rows_per).copy_from(&svec(&identity(q)));
        for (j, bj) in b.iter().enumerate() {
            target
                .rows_mut((j + 1) * rows_per, rows_per)
                .copy_from(&svec(bj.as_mat()));
        }
        Ok(AffineConstraints {
            n,
            q,
            m,
            a: a.clone(),
            op,
            pinv,
            gram_pinv,
            target,
        })
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.op * x - &self.target
    }

    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.pinv * self.residual(x)
    }

    /// Dual coefficients `y` with `L^T y ≈ w` (least squares).
    fn dual_of(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.gram_pinv * (&self.op * w)
    }

    /// Component of the target outside the range of `L`; nonzero iff the
    /// affine set is empty.
    fn inconsistency(&self) -> DVector<f64> {
        let proj = &self.op * (&self.pinv * &self.target);
        &self.target - proj
    }

    fn split_dual(&self, y: &DVector<f64>) -> Vec<CMat> {
        let rows_per = self.q * self.q;
        (0..=self.m)
            .map(|j| unsvec(&y.as_slice()[j * rows_per..(j + 1) * rows_per], self.q))
            .collect()
    }
}

/// Moore-Penrose inverse of a symmetric PSD real matrix.
fn sym_pinv(g: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(g.clone());
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cutoff = top * 1e-12 * g.nrows().max(1) as f64;
    let mut inv_vals = eig.eigenvalues.clone();
    for v in inv_vals.iter_mut() {
        *v = if *v > cutoff { 1.0 / *v } else { 0.0 };
    }
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&inv_vals) * v.transpose()
}

fn psd_project_vec(x: &DVector<f64>, n: usize) -> Result<(DVector<f64>, f64)> {
    let h = HermMatrix::new(unsvec(x.as_slice(), n))?;
    let e = h.eig()?;
    let min = e.values[0];
    if min >= 0.0 {
        return Ok((x.clone(), min));
    }
    Ok((svec(&e.map_values(|v| v.max(0.0))), min))
}

/// Decide `B ∈ W^q(A)`.
pub fn membership(
    b: &HermTuple,
    a: &HermTuple,
    opts: &MembershipOptions,
) -> Result<MembershipVerdict> {
    check_len(a.len(), b.len())?;
    let (d, q) = (a.dim(), b.dim());
    let n = d * q;
    let cons = AffineConstraints::new(a, b)?;

    // Affine relation violated: separate immediately.
    let incons = cons.inconsistency();
    if incons.norm() > 1e-9 * (1.0 + cons.target.norm()) {
        let cand = separating_pencils(&cons, &incons);
        if let Some(w) = best_verified(&cand, a, b, opts.witness.gap_tol)? {
            return Ok(MembershipVerdict {
                status: Status::NotMember,
                certificate: None,
                witness: Some(w),
                gap: incons.norm(),
                iterations: 0,
            });
        }
    }

    // Start at the normalized trace map, a UCP point.
    let mut x = svec(ChoiMatrix::normalized_trace(d, q).matrix().as_mat());
    let mut p = DVector::<f64>::zeros(n * n);
    let mut r = DVector::<f64>::zeros(n * n);
    let mut gap = f64::INFINITY;
    let check_every = opts.check_every.max(1);
    let mut last_sep: Option<DVector<f64>> = None;

    for it in 1..=opts.max_iter {
        let y = cons.project(&(&x + &p));
        p = &x + &p - &y;
        let (xn, _) = psd_project_vec(&(&y + &r), n)?;
        r = &y + &r - &xn;
        x = xn;
        gap = (&y - &x).norm();

        let checkpoint = it % check_every == 0 || it == opts.max_iter;
        if !checkpoint {
            continue;
        }
        if let Some(cert) = try_certify(&cons, &x, opts.member_tol, it % (10 * check_every) == 0)? {
            return Ok(MembershipVerdict {
                status: Status::Member,
                certificate: Some(cert),
                witness: None,
                gap,
                iterations: it,
            });
        }
        if gap > opts.gap_tol {
            let w = &y - &x;
            let cand = separating_pencils(&cons, &cons.dual_of(&w));
            if let Some(wit) = best_verified(&cand, a, b, opts.witness.gap_tol)? {
                return Ok(MembershipVerdict {
                    status: Status::NotMember,
                    certificate: None,
                    witness: Some(wit),
                    gap,
                    iterations: it,
                });
            }
            last_sep = Some(w);
        }
    }

    if let Some(cert) = try_certify(&cons, &x, opts.member_tol, true)? {
        return Ok(MembershipVerdict {
            status: Status::Member,
            certificate: Some(cert),
            witness: None,
            gap,
            iterations: opts.max_iter,
        });
    }

    if !opts.skip_search {
        let seeds = last_sep
            .map(|w| separating_pencils(&cons, &cons.dual_of(&w)))
            .unwrap_or_default();
        let found = search_witness_from(
            b,
            |r: &NormTestTuple| crate::herm::pencil_norm(r, a),
            &opts.witness,
            &seeds,
            true,
        )?;
        if let Some(w) = found {
            return Ok(MembershipVerdict {
                status: Status::NotMember,
                certificate: None,
                witness: Some(w),
                gap,
                iterations: opts.max_iter,
            });
        }
    }

    Ok(MembershipVerdict {
        status: Status::Inconclusive,
        certificate: None,
        witness: None,
        gap,
        iterations: opts.max_iter,
    })
}

const FACTORED_ITERS: usize = 40;

/// Turn a PSD iterate into an exact certificate if possible.
fn try_certify(
    cons: &AffineConstraints,
    x: &DVector<f64>,
    member_tol: f64,
    with_face: bool,
) -> Result<Option<ChoiMatrix>> {
    let n = cons.n;
    // Exact affine correction, then PSD check.
    let z = cons.project(x);
    let zh = HermMatrix::new(unsvec(z.as_slice(), n))?;
    let zmin = zh.min_eigenvalue()?;
    let scale = 1.0 + zh.as_mat().norm();
    if zmin >= -1e-12 * scale {
        if let Some(c) = finalize(cons, &zh, member_tol)? {
            return Ok(Some(c));
        }
    }
    if with_face {
        if let Some(c) = face_correction(cons, x, member_tol)? {
            return Ok(Some(c));
        }
        return factored_correction(cons, x, member_tol);
    }
    Ok(None)
}

/// Damped Gauss-Newton on `J = V V*` starting from `V = x^{1/2}`: every
/// iterate is PSD by construction, and the affine residual
/// `L(V V*) - b` is driven to zero with minimum-norm steps.
fn factored_correction(
    cons: &AffineConstraints,
    x: &DVector<f64>,
    member_tol: f64,
) -> Result<Option<ChoiMatrix>> {
    let n = cons.n;
    let xh = HermMatrix::new(unsvec(x.as_slice(), n))?;
    let mut v = crate::herm::psd_sqrt(&xh)?.into_mat();
    let gens: Vec<CMat> = (0..cons.op.nrows())
        .map(|s| {
            let row: Vec<f64> = cons.op.row(s).iter().copied().collect();
            unsvec(&row, n)
        })
        .collect();
    let residual = |v: &CMat| -> DVector<f64> { cons.residual(&svec(&(v * v.adjoint()))) };
    let mut res = residual(&v);
    let scale = 1.0 + cons.target.norm();
    let mut mu = 1e-6;
    for _ in 0..FACTORED_ITERS {
        if res.norm() <= 1e-13 * scale {
            break;
        }
        // Row s: gradient of <G_s, V V*> in the real coordinates of V.
        let mut jac = DMatrix::<f64>::zeros(gens.len(), 2 * n * n);
        for (s, g) in gens.iter().enumerate() {
            let gv = g * &v;
            for (k, z) in gv.iter().enumerate() {
                jac[(s, 2 * k)] = 2.0 * z.re;
                jac[(s, 2 * k + 1)] = 2.0 * z.im;
            }
        }
        let jjt = &jac * jac.transpose();
        let mut accepted = false;
        for _ in 0..12 {
            let mut lhs = jjt.clone();
            for d in 0..lhs.nrows() {
                lhs[(d, d)] += mu * (1.0 + jjt[(d, d)]);
            }
            let Some(chol) = lhs.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let step = jac.transpose() * chol.solve(&res);
            let mut cand = v.clone();
            for (k, z) in cand.iter_mut().enumerate() {
                *z -= num_complex::Complex64::new(step[2 * k], step[2 * k + 1]);
            }
            let rc = residual(&cand);
            if rc.norm() < res.norm() {
                v = cand;
                res = rc;
                mu = (mu * 0.1).max(1e-15);
                accepted = true;
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    if res.norm() > 1e-9 * scale {
        return Ok(None);
    }
    finalize(cons, &HermMatrix::new(&v * v.adjoint())?, member_tol)
}

/// Restrict to the face spanned by the dominant eigenvectors of `x` and solve
/// the affine constraints there.
fn face_correction(
    cons: &AffineConstraints,
    x: &DVector<f64>,
    member_tol: f64,
) -> Result<Option<ChoiMatrix>> {
    let n = cons.n;
    let xh = HermMatrix::new(unsvec(x.as_slice(), n))?;
    let e = xh.eig()?;
    let top = e.values[n - 1].max(1e-300);
    let mut tried = usize::MAX;
    for rel in [1e-3, 1e-5, 1e-7, 1e-9] {
        let keep: Vec<usize> = (0..n).filter(|&i| e.values[i] > rel * top).collect();
        let r = keep.len();
        if r == 0 || r == tried || r == n {
            continue;
        }
        tried = r;
        let v = CMat::from_fn(n, r, |i, c| e.vectors[(i, keep[c])]);
        // Columns: svec(V E V*) for each basis element E of Herm(r).
        let mut basis = vec![0.0; r * r];
        let mut lift = DMatrix::<f64>::zeros(n * n, r * r);
        for s in 0..r * r {
            basis.iter_mut().for_each(|b| *b = 0.0);
            basis[s] = 1.0;
            let ev = unsvec(&basis, r);
            lift.set_column(s, &svec(&(&v * ev * v.adjoint())));
        }
        let restricted = &cons.op * &lift;
        let w0 = svec(&CMat::from_fn(r, r, |i, j| {
            if i == j {
                num_complex::Complex64::new(e.values[keep[i]], 0.0)
            } else {
                num_complex::Complex64::new(0.0, 0.0)
            }
        }));
        let resid = &cons.target - &restricted * &w0;
        let g = &restricted * restricted.transpose();
        let w = &w0 + restricted.transpose() * (sym_pinv(&g) * resid);
        let wm = HermMatrix::new(unsvec(w.as_slice(), r))?;
        if wm.min_eigenvalue()? < -1e-12 * (1.0 + wm.as_mat().norm()) {
            continue;
        }
        let j = HermMatrix::new(&v * wm.as_mat() * v.adjoint())?;
        if let Some(c) = finalize(cons, &j, member_tol)? {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

/// Clip to PSD, renormalize to exact unitality and check the image residual.
fn finalize(
    cons: &AffineConstraints,
    j: &HermMatrix,
    member_tol: f64,
) -> Result<Option<ChoiMatrix>> {
    let (d, q) = (cons.a.dim(), cons.q);
    let clipped = crate::herm::psd_project(j)?;
    let raw = ChoiMatrix::new(d, q, clipped)?;
    if raw.unital_defect() > 1e-3 {
        return Ok(None);
    }
    let cert = match raw.renormalized() {
        Ok(c) => c,
        Err(_) => return Ok(None),
    };
    if cert.unital_defect() > UNITAL_TOL || cert.min_eigenvalue()? < -crate::choi::CP_TOL {
        return Ok(None);
    }
    let target = cons.split_dual(&cons.target);
    let mut worst = 0.0f64;
    for (j, aj) in cons.a.iter().enumerate() {
        let img = cert.apply_mat(aj.as_mat())?;
        worst = worst.max(crate::herm::spectral_norm(&(img - &target[j + 1])));
    }
    Ok((worst <= member_tol).then_some(cert))
}

/// Candidate witnesses from dual coefficients `y` of a separating direction.
///
/// Writing `w = L*(Y_0, ..., Y_m)`, the pencil `P(X) = Y_0^T ⊗ I + Σ Y_j^T ⊗ X_j`
/// is negative semidefinite at `A` while `⟨Ω, P(B) Ω⟩ = ⟨y, b⟩ > 0`. Shifting
/// `R_0` by the midpoint of the spectrum of `P(A)` turns this into a norm
/// inequality violation.
fn separating_pencils(cons: &AffineConstraints, y: &DVector<f64>) -> Vec<NormTestTuple> {
    let ys = cons.split_dual(y);
    let coeffs: Vec<CMat> = ys.iter().map(|m| m.transpose()).collect();
    let mut out = Vec::new();
    for sign in [1.0, -1.0] {
        let mats: Vec<CMat> = coeffs.iter().map(|c| c.scale(sign)).collect();
        if let Ok(r) = NormTestTuple::new(mats) {
            if let Ok(shifted) = center_on(&r, &cons.a) {
                out.push(shifted);
            }
        }
    }
    out
}

/// Shift `R_0` so the Hermitian pencil at `A` has spectrum symmetric about 0.
fn center_on(r: &NormTestTuple, a: &HermTuple) -> Result<NormTestTuple> {
    let p = HermMatrix::new(pencil_matrix(r, a)?)?;
    let e = p.eig()?;
    let mid = 0.5 * (e.values[0] + e.values[e.values.len() - 1]);
    let mut mats = r.mats().to_vec();
    mats[0] -= identity(r.q()).scale(mid);
    NormTestTuple::new(mats)
}

fn best_verified(
    candidates: &[NormTestTuple],
    a: &HermTuple,
    b: &HermTuple,
    gap_tol: f64,
) -> Result<Option<Witness>> {
    let mut best: Option<Witness> = None;
    for r in candidates {
        let w = Witness::evaluate(r, b, |r: &NormTestTuple| crate::herm::pencil_norm(r, a))?;
        if w.gap > gap_tol && best.as_ref().is_none_or(|bw| w.gap > bw.gap) {
            best = Some(w);
        }
    }
    Ok(best)
}

/// Check a claimed certificate against `(A, B)`: returns the worst image
/// residual, or an error if the map is not UCP.
pub fn certificate_residual(cert: &ChoiMatrix, a: &HermTuple, b: &HermTuple) -> Result<f64> {
    check_len(a.len(), b.len())?;
    if cert.d_in() != a.dim() || cert.q_out() != b.dim() {
        return Err(RangeError::dim(
            "certificate",
            a.dim() * b.dim(),
            cert.d_in() * cert.q_out(),
        ));
    }
    cert.validate_ucp()?;
    let img = cert.apply_tuple(a)?;
    img.max_distance(b)
}
