//! Choi representation of linear maps `M_d -> M_q`.
//!
//! Block convention: the input index is outer and the output index inner, so
//! block `(k, l)` (rows `k*q..(k+1)*q`, columns `l*q..(l+1)*q`) of `J` holds
//! `Φ(E_kl)`. A map is completely positive iff `J` is PSD and unital iff
//! `Σ_k J_kk = I_q`.

use crate::error::{RangeError, Result};
use crate::herm::{
    check_len, cplx, identity, kron, pd_inv_sqrt, spectral_norm, CMat, HermMatrix, HermTuple,
    Isometry, ZERO,
};

/// PSD tolerance on the smallest eigenvalue of `J`.
pub const CP_TOL: f64 = 1e-9;
/// Tolerance on `|Σ_k J_kk - I|`.
pub const UNITAL_TOL: f64 = 1e-8;
/// Relative eigenvalue cutoff for Kraus extraction.
pub const KRAUS_CUTOFF: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    d_in: usize,
    q_out: usize,
    j: HermMatrix,
}

impl ChoiMatrix {
    pub fn new(d_in: usize, q_out: usize, j: HermMatrix) -> Result<Self> {
        if d_in == 0 || q_out == 0 {
            return Err(RangeError::Invalid(
                "Choi dimensions must be positive".into(),
            ));
        }
        if j.dim() != d_in * q_out {
            return Err(RangeError::dim("Choi matrix", d_in * q_out, j.dim()));
        }
        Ok(ChoiMatrix { d_in, q_out, j })
    }

    pub fn identity_map(d: usize) -> Self {
        Self::from_kraus(&[identity(d)]).expect("identity Kraus operator")
    }

    /// `T ↦ X* T X`.
    pub fn compression(x: &Isometry) -> Self {
        Self::from_kraus(std::slice::from_ref(x.as_mat())).expect("isometry is a Kraus operator")
    }

    /// `T ↦ (tr T / d) I_q`; its Choi matrix is `I_{dq} / d`.
    pub fn normalized_trace(d: usize, q: usize) -> Self {
        let j = HermMatrix::identity(d * q).scale(1.0 / d as f64);
        ChoiMatrix {
            d_in: d,
            q_out: q,
            j,
        }
    }

    /// Choi matrix of `T ↦ Σ_i K_i* T K_i`, each `K_i` of shape `d_in x q_out`.
    pub fn from_kraus(kraus: &[CMat]) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| RangeError::Invalid("empty Kraus list".into()))?;
        let (d, q) = first.shape();
        let n = d * q;
        let mut j = CMat::zeros(n, n);
        for k in kraus {
            if k.shape() != (d, q) {
                return Err(RangeError::dim(
                    "Kraus operator",
                    d * q,
                    k.nrows() * k.ncols(),
                ));
            }
            // v[(k, a)] = conj(K[k, a]); J += v v*
            let v = CMat::from_fn(n, 1, |r, _| k[(r / q, r % q)].conj());
            j += &v * v.adjoint();
        }
        Self::new(d, q, HermMatrix::new(j)?)
    }

    /// Normalize arbitrary Kraus operators `G_i` to `G_i S^{-1/2}` with
    /// `S = Σ G_i* G_i`, giving a UCP map.
    pub fn from_unnormalized_kraus(raw: &[CMat]) -> Result<Self> {
        let first = raw
            .first()
            .ok_or_else(|| RangeError::Invalid("empty Kraus list".into()))?;
        let q = first.ncols();
        let mut s = CMat::zeros(q, q);
        for g in raw {
            s += g.adjoint() * g;
        }
        let inv = pd_inv_sqrt(&HermMatrix::new(s)?)?;
        let kraus: Vec<CMat> = raw.iter().map(|g| g * inv.as_mat()).collect();
        Self::from_kraus(&kraus)
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn q_out(&self) -> usize {
        self.q_out
    }

    pub fn matrix(&self) -> &HermMatrix {
        &self.j
    }

    /// `Φ(E_kl)`.
    pub fn block(&self, k: usize, l: usize) -> CMat {
        let q = self.q_out;
        self.j.as_mat().view((k * q, l * q), (q, q)).into_owned()
    }

    /// `Φ(T) = Σ_{k,l} T_kl Φ(E_kl)` for an arbitrary square `T`.
    pub fn apply_mat(&self, t: &CMat) -> Result<CMat> {
        if t.nrows() != self.d_in || t.ncols() != self.d_in {
            return Err(RangeError::dim("map input", self.d_in, t.nrows()));
        }
        let q = self.q_out;
        let jm = self.j.as_mat();
        let mut out = CMat::zeros(q, q);
        for k in 0..self.d_in {
            for l in 0..self.d_in {
                let s = t[(k, l)];
                if s == ZERO {
                    continue;
                }
                out.zip_apply(&jm.view((k * q, l * q), (q, q)), |o, x| *o += s * x);
            }
        }
        Ok(out)
    }

    pub fn apply(&self, t: &HermMatrix) -> Result<HermMatrix> {
        HermMatrix::new(self.apply_mat(t.as_mat())?)
    }

    pub fn apply_tuple(&self, t: &HermTuple) -> Result<HermTuple> {
        t.map(|a| self.apply(a))
    }

    /// `Φ(I) = Σ_k J_kk`.
    pub fn unit_image(&self) -> CMat {
        let mut s = CMat::zeros(self.q_out, self.q_out);
        for k in 0..self.d_in {
            s += self.block(k, k);
        }
        s
    }

    pub fn unital_defect(&self) -> f64 {
        spectral_norm(&(self.unit_image() - identity(self.q_out)))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        self.j.min_eigenvalue()
    }

    /// Check complete positivity and unitality within the module tolerances.
    pub fn validate_ucp(&self) -> Result<()> {
        let min_eig = self.min_eigenvalue()?;
        if min_eig < -CP_TOL {
            return Err(RangeError::NotCompletelyPositive { min_eig });
        }
        let residual = self.unital_defect();
        if residual > UNITAL_TOL {
            return Err(RangeError::NotUnital { residual });
        }
        Ok(())
    }

    /// Replace `Φ` by `S^{-1/2} Φ(·) S^{-1/2}` with `S = Φ(I)`; exact unitality
    /// at the cost of an `O(|S - I|)` change in the images.
    pub fn renormalized(&self) -> Result<ChoiMatrix> {
        let s = HermMatrix::new(self.unit_image())?;
        let inv = pd_inv_sqrt(&s)?;
        let w = kron(&identity(self.d_in), inv.as_mat());
        let j = self.j.congruence(&w)?;
        ChoiMatrix::new(self.d_in, self.q_out, j)
    }

    /// Choi matrix of `T ↦ I_p ⊗ Φ(T)`, a map `M_d -> M_{pq}`.
    pub fn amplified(&self, p: usize) -> Result<ChoiMatrix> {
        let (d, q) = (self.d_in, self.q_out);
        let pq = p * q;
        let ip = identity(p);
        let mut j = CMat::zeros(d * pq, d * pq);
        for k in 0..d {
            for l in 0..d {
                let blk = kron(&ip, &self.block(k, l));
                j.view_mut((k * pq, l * pq), (pq, pq)).copy_from(&blk);
            }
        }
        ChoiMatrix::new(d, pq, HermMatrix::new(j)?)
    }

    /// Kraus operators `K_i` (`d_in x q_out`) with `Φ(T) = Σ K_i* T K_i`, from
    /// the eigendecomposition of `J`; eigenvalues below `1e-10 · max(1, λ_max)`
    /// are dropped.
    pub fn kraus_decomposition(&self) -> Result<Vec<CMat>> {
        let e = self.j.eig()?;
        let min_eig = e.values[0];
        if min_eig < -CP_TOL {
            return Err(RangeError::NotCompletelyPositive { min_eig });
        }
        let top = e.values[e.values.len() - 1].max(1.0);
        let (d, q) = (self.d_in, self.q_out);
        let mut out = Vec::new();
        for idx in (0..e.values.len()).rev() {
            let lam = e.values[idx];
            if lam <= KRAUS_CUTOFF * top {
                continue;
            }
            let s = lam.sqrt();
            let u = e.vectors.column(idx);
            out.push(CMat::from_fn(d, q, |k, a| {
                u[k * q + a].conj() * cplx(s, 0.0)
            }));
        }
        if out.is_empty() {
            out.push(CMat::zeros(d, q));
        }
        Ok(out)
    }
}

/// Operator convex combination `Σ_i L_i* B^{(i)} L_i`, componentwise.
pub fn cstar_combine(tuples: &[HermTuple], weights: &[CMat]) -> Result<HermTuple> {
    check_len(tuples.len(), weights.len())?;
    let first = tuples
        .first()
        .ok_or_else(|| RangeError::Invalid("no tuples to combine".into()))?;
    let (m, q) = (first.len(), first.dim());
    let mut completeness = CMat::zeros(q, q);
    for (i, (t, l)) in tuples.iter().zip(weights).enumerate() {
        check_len(m, t.len())?;
        if t.dim() != q {
            return Err(RangeError::dim(format!("tuples[{i}]"), q, t.dim()));
        }
        if l.shape() != (q, q) {
            return Err(RangeError::dim(format!("weights[{i}]"), q, l.nrows()));
        }
        completeness += l.adjoint() * l;
    }
    let residual = spectral_norm(&(completeness - identity(q)));
    if residual > 1e-8 {
        return Err(RangeError::NotComplete { residual });
    }
    let mut mats = Vec::with_capacity(m);
    for j in 0..m {
        let mut acc = CMat::zeros(q, q);
        for (t, l) in tuples.iter().zip(weights) {
            acc += l.adjoint() * t.get(j).as_mat() * l;
        }
        mats.push(HermMatrix::new(acc)?);
    }
    HermTuple::new(mats)
}
