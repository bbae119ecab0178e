//! Simplices, barycentric POVMs and their Naimark dilations.
//!
//! If `W(T) ⊆ S` for a simplex `S` with vertices `v_1..v_{m+1}`, the
//! barycentric coordinates of `S` evaluated at `T` form a POVM, and the
//! Naimark isometry `X = Σ_k Q_k^{1/2} ⊗ e_k` realizes
//! `T_j = X* (I ⊗ D_j) X` with `D_j = diag(v_{j1}, ..., v_{j,m+1})`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{RangeError, Result};
use crate::essential::BlockRepetitionModel;
use crate::herm::{
    check_len, identity, pencil_norm, psd_sqrt, spectral_norm, CMat, HermMatrix, HermTuple,
    Isometry, NormTestTuple,
};
use crate::membership::{membership, MembershipOptions, Status};
use crate::sampling;
use crate::spatial::realize_in_model;
use crate::witness::{vertex_pencil_norm, HOLDS_TOL};

/// Largest accepted condition number of the `(1, v_k)` vertex matrix.
pub const MAX_CONDITION: f64 = 1e10;
/// Negative eigenvalues of POVM elements down to this value are accepted.
pub const POVM_PSD_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Simplex {
    vertices: Vec<Vec<f64>>,
    /// Row k holds the affine coefficients of the k-th barycentric coordinate.
    bary: DMatrix<f64>,
}

impl Simplex {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let count = vertices.len();
        if count < 2 {
            return Err(RangeError::Invalid(
                "a simplex needs at least two vertices".into(),
            ));
        }
        let m = count - 1;
        for (k, v) in vertices.iter().enumerate() {
            if v.len() != m {
                return Err(RangeError::dim(format!("vertices[{k}]"), m, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(RangeError::Invalid(format!("vertices[{k}] is not finite")));
            }
        }
        let hom = DMatrix::from_fn(
            count,
            count,
            |k, c| if c == 0 { 1.0 } else { vertices[k][c - 1] },
        );
        let sv = hom.clone().svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition = if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        };
        if !(condition <= MAX_CONDITION) {
            return Err(RangeError::DegenerateSimplex { condition });
        }
        let bary = hom
            .transpose()
            .try_inverse()
            .ok_or(RangeError::DegenerateSimplex { condition })?;
        Ok(Simplex { vertices, bary })
    }

    /// The standard simplex `{0, e_1, ..., e_m}`.
    pub fn standard(m: usize) -> Self {
        let mut v = vec![vec![0.0; m]];
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            v.push(e);
        }
        Simplex::new(v).expect("standard simplex is non-degenerate")
    }

    pub fn m(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// `(D_1, ..., D_m)`, `D_j = diag(v_{j1}, ..., v_{j,m+1})`.
    pub fn vertex_tuple(&self) -> HermTuple {
        HermTuple::diagonal(&self.vertices).expect("vertices share a length")
    }

    pub fn barycentric(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m(), x.len())?;
        Ok((0..=self.m())
            .map(|k| {
                self.bary[(k, 0)]
                    + (0..self.m())
                        .map(|j| self.bary[(k, j + 1)] * x[j])
                        .sum::<f64>()
            })
            .collect())
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        Ok(self.barycentric(x)?.iter().all(|&l| l >= -tol))
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.vertices.len() as f64;
        (0..self.m())
            .map(|j| self.vertices.iter().map(|v| v[j]).sum::<f64>() / n)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    elements: Vec<HermMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<HermMatrix>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| RangeError::Invalid("empty POVM".into()))?;
        let d = first.dim();
        let mut sum = CMat::zeros(d, d);
        for (k, q) in elements.iter().enumerate() {
            if q.dim() != d {
                return Err(RangeError::dim(format!("povm[{k}]"), d, q.dim()));
            }
            let min_eig = q.min_eigenvalue()?;
            if min_eig < -POVM_PSD_TOL {
                return Err(RangeError::NotInSimplex { vertex: k, min_eig });
            }
            sum += q.as_mat();
        }
        let residual = spectral_norm(&(sum - identity(d)));
        if residual > 1e-9 {
            return Err(RangeError::NotComplete { residual });
        }
        Ok(Povm { elements })
    }

    pub fn elements(&self) -> &[HermMatrix] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }
}

/// `Q_k = λ_k(T)`: barycentric coordinates of `S` evaluated at the tuple.
pub fn barycentric_povm(t: &HermTuple, s: &Simplex) -> Result<Povm> {
    check_len(s.m(), t.len())?;
    let d = t.dim();
    let mut elements = Vec::with_capacity(s.m() + 1);
    let mut worst: Option<(usize, f64)> = None;
    for k in 0..=s.m() {
        let mut q = identity(d).scale(s.bary[(k, 0)]);
        for (j, tj) in t.iter().enumerate() {
            q += tj.as_mat().scale(s.bary[(k, j + 1)]);
        }
        let q = HermMatrix::new(q)?;
        let min_eig = q.min_eigenvalue()?;
        if min_eig < -POVM_PSD_TOL && worst.is_none_or(|(_, w)| min_eig < w) {
            worst = Some((k, min_eig));
        }
        elements.push(q);
    }
    if let Some((vertex, min_eig)) = worst {
        return Err(RangeError::NotInSimplex { vertex, min_eig });
    }
    Povm::new(elements)
}

/// `Σ_k v_{jk} Q_k` for each coordinate j.
pub fn povm_reconstruction(povm: &Povm, s: &Simplex) -> Result<HermTuple> {
    check_len(s.m() + 1, povm.elements.len())?;
    let d = povm.dim();
    let mut mats = Vec::with_capacity(s.m());
    for j in 0..s.m() {
        let mut acc = CMat::zeros(d, d);
        for (q, v) in povm.elements.iter().zip(s.vertices()) {
            acc += q.as_mat().scale(v[j]);
        }
        mats.push(HermMatrix::new(acc)?);
    }
    HermTuple::new(mats)
}

/// Naimark isometry `X: C^d -> C^d ⊗ C^{m+1}`, `X = Σ_k Q_k^{1/2} ⊗ e_k`
/// (row `a*(m+1) + k` holds row `a` of `Q_k^{1/2}`).
pub fn naimark_dilate(povm: &Povm) -> Result<Isometry> {
    let d = povm.dim();
    let n = povm.elements.len();
    let roots: Vec<HermMatrix> = povm.elements.iter().map(psd_sqrt).collect::<Result<_>>()?;
    let mut x = CMat::zeros(d * n, d);
    for (k, r) in roots.iter().enumerate() {
        for a in 0..d {
            for b in 0..d {
                x[(a * n + k, b)] = r.as_mat()[(a, b)];
            }
        }
    }
    // Clipping in the square roots can leave X*X off identity by ~1e-9.
    let gram = HermMatrix::new(x.adjoint() * &x)?;
    let fix = crate::herm::pd_inv_sqrt(&gram)?;
    Isometry::new(x * fix.as_mat())
}

/// `X* (I_d ⊗ D_j) X` for each j.
pub fn dilation_compression(x: &Isometry, s: &Simplex) -> Result<HermTuple> {
    let n = s.m() + 1;
    if !x.rows().is_multiple_of(n) {
        return Err(RangeError::dim("dilation rows", n, x.rows() % n));
    }
    let blocks = x.rows() / n;
    let mut mats = Vec::with_capacity(s.m());
    for j in 0..s.m() {
        let diag: Vec<f64> = (0..blocks * n).map(|r| s.vertices()[r % n][j]).collect();
        let mut dx = x.as_mat().clone();
        for (r, &v) in diag.iter().enumerate() {
            dx.row_mut(r).scale_mut(v);
        }
        mats.push(HermMatrix::new(x.as_mat().adjoint() * dx)?);
    }
    HermTuple::new(mats)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormBound {
    pub bound: f64,
    pub lhs: f64,
    pub holds: bool,
}

/// `|R_0 ⊗ I + Σ R_j ⊗ T_j| <= max_k |R_0 + Σ_j v_{jk} R_j|` for `W(T) ⊆ S`.
pub fn simplex_norm_bound(r: &NormTestTuple, t: &HermTuple, s: &Simplex) -> Result<NormBound> {
    barycentric_povm(t, s)?;
    let lhs = pencil_norm(r, t)?;
    let bound = vertex_pencil_norm(r, s)?;
    Ok(NormBound {
        bound,
        lhs,
        holds: lhs <= bound + HOLDS_TOL,
    })
}

#[derive(Clone, Debug)]
pub struct SimplexCheckOptions {
    pub membership: MembershipOptions,
    /// Random pencils per probe for the norm bound.
    pub norm_samples: usize,
    /// Kraus operators per sampled probe map.
    pub probe_kraus: usize,
    pub seed: u64,
}

impl Default for SimplexCheckOptions {
    fn default() -> Self {
        SimplexCheckOptions {
            membership: MembershipOptions::default(),
            norm_samples: 20,
            probe_kraus: 2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeOutcome {
    pub index: usize,
    pub in_simplex: bool,
    pub member_after: Status,
    pub realization_residual: f64,
    pub worst_norm_excess: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PreservationReport {
    pub q: usize,
    pub vertex_status: Vec<Status>,
    pub probes: Vec<ProbeOutcome>,
    pub precondition_failure: Option<String>,
    pub passed: bool,
}

/// Check that after the preserving perturbation every sampled `B ∈ W^q(M)`
/// is a member of `W^q(A + K)`, is realized as a compression of `A + K`, and
/// obeys the vertex norm bound.
pub fn simplex_preservation_check(
    model: &BlockRepetitionModel,
    s: &Simplex,
    q: usize,
    probes: usize,
    opts: &SimplexCheckOptions,
) -> Result<PreservationReport> {
    check_len(model.m(), s.m())?;
    let body = model.body();
    let mut report = PreservationReport {
        q,
        vertex_status: Vec::new(),
        probes: Vec::new(),
        precondition_failure: None,
        passed: false,
    };

    for (k, v) in s.vertices().iter().enumerate() {
        let b = HermTuple::from_point(v)?;
        let verdict = model.essential_membership(&b, &opts.membership)?;
        report.vertex_status.push(verdict.status);
        if verdict.status != Status::Member && report.precondition_failure.is_none() {
            report.precondition_failure = Some(format!(
                "vertex {k} is not an essential member ({})",
                verdict.status
            ));
        }
    }

    let perturbation = model.preserving_perturbation()?;
    let perturbed = perturbation.perturbed_model()?;
    let a_plus_k = perturbed.materialize()?;
    let mut rng = sampling::substream(opts.seed, q as u64);

    for index in 0..probes {
        let phi = sampling::ucp_map(&mut rng, body.dim(), q, opts.probe_kraus)?;
        let b = phi.apply_tuple(body)?;
        let in_simplex = barycentric_povm(&b, s).is_ok();
        if !in_simplex && report.precondition_failure.is_none() {
            report.precondition_failure = Some(format!("probe {index} leaves the simplex"));
        }

        let verdict = membership(&b, &a_plus_k, &opts.membership)?;

        let rank = phi.kraus_decomposition()?.len();
        let host = perturbed.with_level(perturbed.level().max(rank));
        let realization_residual = match realize_in_model(&b, &host, &phi) {
            Ok(x) => x.compress(&host.materialize()?)?.max_distance(&b)?,
            Err(_) => f64::INFINITY,
        };

        let mut worst_norm_excess = f64::NEG_INFINITY;
        if in_simplex {
            for _ in 0..opts.norm_samples {
                let r = sampling::norm_test_tuple(&mut rng, q, s.m());
                let nb = simplex_norm_bound(&r, &b, s)?;
                worst_norm_excess = worst_norm_excess.max(nb.lhs - nb.bound);
            }
        }

        let passed = in_simplex
            && verdict.status == Status::Member
            && realization_residual <= 1e-7
            && worst_norm_excess <= HOLDS_TOL;
        report.probes.push(ProbeOutcome {
            index,
            in_simplex,
            member_after: verdict.status,
            realization_residual,
            worst_norm_excess,
            passed,
        });
    }

    report.passed = report.precondition_failure.is_none() && report.probes.iter().all(|p| p.passed);
    Ok(report)
}

/// Vertex diagonal tuple conjugated by a unitary and padded with interior
/// points: a body whose numerical range is exactly `S`.
pub fn simplex_body(s: &Simplex, interior: &[Vec<f64>], u: Option<&CMat>) -> Result<HermTuple> {
    let mut points = s.vertices().to_vec();
    points.extend(interior.iter().cloned());
    let d = HermTuple::diagonal(&points)?;
    match u {
        Some(u) => d.congruence(u),
        None => Ok(d),
    }
}
