//! Block-repetition models of operators modulo compacts.
//!
//! A model is a head tuple `F` (dimension `h`, the finite-rank part) followed
//! by infinitely many copies of a body tuple `M` (dimension `d`), truncated at
//! `n` body blocks: `A_j(n) = F_j ⊕ (I_n ⊗ M_j)`.
//!
//! Compact perturbations can only touch finitely many body blocks, and
//! infinitely many identical copies of `M` survive any of them. The essential
//! pencil norm is therefore exactly `|R_0 ⊗ I + Σ R_j ⊗ M_j|`, so the
//! essential q-matricial range of the model is `W^q(M)`. Everything in this
//! module is exact within the model class; no limits are taken.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{RangeError, Result};
use crate::herm::{
    check_len, identity, kron, pencil_norm, spectral_norm, CMat, HermMatrix, HermTuple,
    NormTestTuple,
};
use crate::membership::{membership, MembershipOptions, MembershipVerdict};

#[derive(Clone, Debug, PartialEq)]
pub struct BlockRepetitionModel {
    head: Option<HermTuple>,
    body: HermTuple,
    level: usize,
}

impl BlockRepetitionModel {
    pub fn new(head: Option<HermTuple>, body: HermTuple, level: usize) -> Result<Self> {
        if let Some(h) = &head {
            check_len(body.len(), h.len())?;
        }
        Ok(BlockRepetitionModel { head, body, level })
    }

    pub fn head(&self) -> Option<&HermTuple> {
        self.head.as_ref()
    }

    pub fn body(&self) -> &HermTuple {
        &self.body
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Tuple length m.
    pub fn m(&self) -> usize {
        self.body.len()
    }

    pub fn head_dim(&self) -> usize {
        self.head.as_ref().map_or(0, |h| h.dim())
    }

    pub fn body_dim(&self) -> usize {
        self.body.dim()
    }

    pub fn total_dim(&self) -> usize {
        self.head_dim() + self.level * self.body_dim()
    }

    /// First row of body block `block` in the materialized operator.
    pub fn body_offset(&self, block: usize) -> usize {
        self.head_dim() + block * self.body_dim()
    }

    pub fn with_level(&self, level: usize) -> Self {
        BlockRepetitionModel {
            level,
            ..self.clone()
        }
    }

    /// Same body and level, head replaced by `F + K'` for a head-supported
    /// finite-rank perturbation `K'`.
    pub fn with_head_perturbation(&self, k: &HermTuple) -> Result<Self> {
        let head = self
            .head
            .as_ref()
            .ok_or_else(|| RangeError::Invalid("model has no head to perturb".into()))?;
        if k.dim() != head.dim() {
            return Err(RangeError::dim("head perturbation", head.dim(), k.dim()));
        }
        Self::new(Some(head.add(k)?), self.body.clone(), self.level)
    }

    /// `A(n) = F ⊕ (I_n ⊗ M)`.
    pub fn materialize(&self) -> Result<HermTuple> {
        if self.total_dim() == 0 {
            return Err(RangeError::Invalid(
                "model with no head and level 0 is empty".into(),
            ));
        }
        let tail = if self.level > 0 {
            Some(self.body.amplify(self.level)?)
        } else {
            None
        };
        match (&self.head, tail) {
            (Some(h), Some(t)) => h.direct_sum(&t),
            (Some(h), None) => Ok(h.clone()),
            (None, Some(t)) => Ok(t),
            (None, None) => unreachable!(),
        }
    }

    /// Norm of the pencil at the image of the model modulo compacts.
    pub fn essential_pencil_norm(&self, r: &NormTestTuple) -> Result<f64> {
        pencil_norm(r, &self.body)
    }

    /// Membership in the essential q-matricial range, i.e. in `W^q(M)`.
    pub fn essential_membership(
        &self,
        b: &HermTuple,
        opts: &MembershipOptions,
    ) -> Result<MembershipVerdict> {
        membership(b, &self.body, opts)
    }

    /// Linear independence of `{I, M_1, ..., M_m}` under the trace inner
    /// product. A dependent set comes with coefficients `(a_0, ..., a_m)`
    /// (largest entry 1, first nonzero entry positive) such that
    /// `a_0 I + Σ a_j M_j ≈ 0`.
    pub fn interior_test(&self) -> Result<InteriorTest> {
        let d = self.body_dim();
        let mut gens: Vec<HermMatrix> = vec![HermMatrix::identity(d)];
        gens.extend(self.body.iter().cloned());
        let k = gens.len();
        let gram = DMatrix::from_fn(k, k, |a, b| gens[a].trace_inner(&gens[b]));
        let eig = nalgebra::SymmetricEigen::new(gram);
        let (mut imin, mut imax) = (0, 0);
        for i in 0..k {
            if eig.eigenvalues[i] < eig.eigenvalues[imin] {
                imin = i;
            }
            if eig.eigenvalues[i] > eig.eigenvalues[imax] {
                imax = i;
            }
        }
        let (lmin, lmax) = (eig.eigenvalues[imin], eig.eigenvalues[imax]);
        let independent = lmin > 1e-10 * lmax;
        let mut gram_eigenvalues: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        gram_eigenvalues.sort_by(f64::total_cmp);
        if independent {
            return Ok(InteriorTest {
                independent,
                witness: None,
                residual: None,
                gram_eigenvalues,
            });
        }
        let mut a: Vec<f64> = eig.eigenvectors.column(imin).iter().cloned().collect();
        let amax = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let sign = a
            .iter()
            .find(|x| x.abs() > 1e-9 * amax)
            .map_or(1.0, |x| x.signum());
        a.iter_mut().for_each(|x| *x *= sign / amax);
        let mut combo = identity(d).scale(a[0]);
        for (aj, mj) in a[1..].iter().zip(self.body.iter()) {
            combo += mj.as_mat().scale(*aj);
        }
        Ok(InteriorTest {
            independent,
            residual: Some(spectral_norm(&combo)),
            witness: Some(a),
            gram_eigenvalues,
        })
    }

    /// Finite-rank head perturbation making the truncated operator exactly
    /// block periodic: `A(n) + K = I_{h/d + n} ⊗ M`.
    ///
    /// When `h` is not a multiple of `d`, the head is first padded with the
    /// leading principal block of `M` of the missing size; the padded model is
    /// returned alongside `K`.
    pub fn preserving_perturbation(&self) -> Result<Perturbation> {
        let d = self.body_dim();
        let h = self.head_dim();
        let model = if !h.is_multiple_of(d) {
            let pad = d - h % d;
            let filler = self.body.map(|mj| mj.principal_submatrix(0, pad))?;
            let head = self.head.as_ref().expect("h > 0").direct_sum(&filler)?;
            Self::new(Some(head), self.body.clone(), self.level)?
        } else {
            self.clone()
        };
        let k = match model.head() {
            None => PerturbationTuple {
                head: None,
                rank_bound: 0,
            },
            Some(f) => {
                let copies = f.dim() / d;
                let periodic = self.body.amplify(copies)?;
                let diff = HermTuple::new(
                    periodic
                        .iter()
                        .zip(f.iter())
                        .map(|(p, fj)| p.sub(fj))
                        .collect::<Result<_>>()?,
                )?;
                PerturbationTuple {
                    rank_bound: f.dim(),
                    head: Some(diff),
                }
            }
        };
        Ok(Perturbation { model, k })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InteriorTest {
    pub independent: bool,
    pub witness: Option<Vec<f64>>,
    /// `|a_0 I + Σ a_j M_j|` for the returned witness.
    pub residual: Option<f64>,
    pub gram_eigenvalues: Vec<f64>,
}

/// Head-supported self-adjoint perturbation; zero outside the head block.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationTuple {
    pub head: Option<HermTuple>,
    pub rank_bound: usize,
}

impl PerturbationTuple {
    /// Embed into a tuple of dimension `total`, zero outside the head.
    pub fn materialize(&self, m: usize, total: usize) -> Result<HermTuple> {
        let mut mats = Vec::with_capacity(m);
        for j in 0..m {
            let mut k = CMat::zeros(total, total);
            if let Some(h) = &self.head {
                let hd = h.dim();
                if hd > total {
                    return Err(RangeError::dim("perturbation support", total, hd));
                }
                k.view_mut((0, 0), (hd, hd)).copy_from(h.get(j).as_mat());
            }
            mats.push(HermMatrix::new(k)?);
        }
        HermTuple::new(mats)
    }
}

#[derive(Clone, Debug)]
pub struct Perturbation {
    /// Model after head padding (identical to the input when `d | h`).
    pub model: BlockRepetitionModel,
    pub k: PerturbationTuple,
}

impl Perturbation {
    /// `A + K` as a model: head `I_{h/d} ⊗ M`, same body and level.
    pub fn perturbed_model(&self) -> Result<BlockRepetitionModel> {
        let head = match (&self.model.head, &self.k.head) {
            (Some(f), Some(k)) => Some(f.add(k)?),
            _ => None,
        };
        BlockRepetitionModel::new(head, self.model.body.clone(), self.model.level)
    }

    /// `K` materialized at the model's truncation level.
    pub fn k_tuple(&self) -> Result<HermTuple> {
        self.k.materialize(self.model.m(), self.model.total_dim())
    }
}

/// Body `M` with `M_2 = α I + β M_1` style dependence: the extra matrices are
/// affine combinations of the first.
pub fn dependent_body(base: &HermMatrix, coeffs: &[(f64, f64)]) -> Result<HermTuple> {
    let d = base.dim();
    let mut mats = vec![base.clone()];
    for &(alpha, beta) in coeffs {
        mats.push(HermMatrix::new(
            identity(d).scale(alpha) + base.as_mat().scale(beta),
        )?);
    }
    HermTuple::new(mats)
}

/// `I_k ⊗ M` as a dense tuple; convenience for tests and reports.
pub fn periodic(body: &HermTuple, copies: usize) -> Result<HermTuple> {
    body.map(|mj| HermMatrix::new(kron(&identity(copies), mj.as_mat())))
}
