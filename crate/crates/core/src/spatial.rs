//! Compressions onto q-dimensional subspaces.
//!
//! A UCP certificate `Φ` for `B ∈ W^q(M)` has Kraus operators `K_1..K_r`;
//! stacking them gives an isometry `V: C^q -> C^r ⊗ C^d` with
//! `V* (I_r ⊗ M_j) V = B_j`. Inside a block-repetition model `I_r ⊗ M` is a run
//! of `r` body blocks, so `V` is an exact compression of the truncated operator.
//! [`block_compress`] repeats this on mutually orthogonal, mutually
//! non-interacting subspaces to produce block diagonal compressions.

use serde::Serialize;

use crate::choi::ChoiMatrix;
use crate::error::{RangeError, Result};
use crate::essential::BlockRepetitionModel;
use crate::herm::{
    check_len, column_space, orthogonal_complement, pd_inv_sqrt, spectral_norm, CMat, HermMatrix,
    HermTuple, Isometry,
};
use crate::membership::MembershipOptions;
use crate::sampling;

/// Image residual accepted from an exact Stinespring realization.
pub const REALIZE_TOL: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct CompressionSample {
    pub x: Isometry,
    pub values: HermTuple,
}

pub fn sample_compressions(
    a: &HermTuple,
    q: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<CompressionSample>> {
    if q == 0 || q > a.dim() {
        return Err(RangeError::Invalid(format!(
            "compression size {q} must lie in 1..={}",
            a.dim()
        )));
    }
    let mut rng = sampling::rng(seed);
    (0..count)
        .map(|_| {
            let x = sampling::isometry(&mut rng, a.dim(), q);
            let values = x.compress(a)?;
            Ok(CompressionSample { x, values })
        })
        .collect()
}

/// Stinespring isometry `V` (rows `r*d`, block `i` = `K_i`) with
/// `V* (I_r ⊗ M_j) V = B_j`.
pub fn realize_member(b: &HermTuple, m: &HermTuple, phi: &ChoiMatrix) -> Result<Isometry> {
    check_len(m.len(), b.len())?;
    if phi.d_in() != m.dim() || phi.q_out() != b.dim() {
        return Err(RangeError::dim(
            "certificate",
            m.dim() * b.dim(),
            phi.d_in() * phi.q_out(),
        ));
    }
    phi.validate_ucp()?;
    let kraus = phi.kraus_decomposition()?;
    let (d, q) = (m.dim(), b.dim());
    let r = kraus.len();
    let mut v = CMat::zeros(r * d, q);
    for (i, k) in kraus.iter().enumerate() {
        v.view_mut((i * d, 0), (d, q)).copy_from(k);
    }
    // Absorb the residual non-unitality of the certificate.
    let gram = HermMatrix::new(v.adjoint() * &v)?;
    let v = v * pd_inv_sqrt(&gram)?.as_mat();
    let v = Isometry::new(v)?;
    let residual = periodic_compression(&v, m)?.max_distance(b)?;
    if residual > REALIZE_TOL {
        return Err(RangeError::ToleranceExceeded {
            what: "realization residual".into(),
            value: residual,
            tol: REALIZE_TOL,
        });
    }
    Ok(v)
}

/// `V* (I_r ⊗ M_j) V` for `V` with `r*d` rows.
pub fn periodic_compression(v: &Isometry, m: &HermTuple) -> Result<HermTuple> {
    let d = m.dim();
    if !v.rows().is_multiple_of(d) {
        return Err(RangeError::dim("stacked rows", d, v.rows() % d));
    }
    let r = v.rows() / d;
    let q = v.cols();
    m.map(|mj| {
        let mut acc = CMat::zeros(q, q);
        for i in 0..r {
            let k = v.as_mat().rows(i * d, d);
            acc += k.adjoint() * mj.as_mat() * k;
        }
        HermMatrix::new(acc)
    })
}

/// Place the blocks of a stacked isometry into the given body blocks of the
/// materialized model.
pub fn embed_in_blocks(
    v: &Isometry,
    model: &BlockRepetitionModel,
    blocks: &[usize],
) -> Result<Isometry> {
    let d = model.body_dim();
    if v.rows() != blocks.len() * d {
        return Err(RangeError::dim("embedded rows", blocks.len() * d, v.rows()));
    }
    if let Some(&worst) = blocks.iter().max() {
        if worst >= model.level() {
            return Err(RangeError::TruncationTooSmall {
                level: model.level(),
                required: worst + 1,
            });
        }
    }
    let mut x = CMat::zeros(model.total_dim(), v.cols());
    for (i, &b) in blocks.iter().enumerate() {
        let off = model.body_offset(b);
        x.view_mut((off, 0), (d, v.cols()))
            .copy_from(&v.as_mat().rows(i * d, d));
    }
    Isometry::new(x)
}

/// Realize `B` as a compression of the truncated model, using body blocks
/// `0..r` only (so it is also a compression after any head perturbation).
pub fn realize_in_model(
    b: &HermTuple,
    model: &BlockRepetitionModel,
    phi: &ChoiMatrix,
) -> Result<Isometry> {
    let v = realize_member(b, model.body(), phi)?;
    let r = v.rows() / model.body_dim();
    if r > model.level() {
        return Err(RangeError::TruncationTooSmall {
            level: model.level(),
            required: r,
        });
    }
    let blocks: Vec<usize> = (0..r).collect();
    embed_in_blocks(&v, model, &blocks)
}

#[derive(Clone, Debug, Serialize)]
pub struct StageDiagnostics {
    pub stage: usize,
    /// Dimension of span{Z, A_j Z} before this stage.
    pub subspace_dim: usize,
    pub blocks_used: Vec<usize>,
    /// `|Y* Z|` for the complement basis Y.
    pub complement_overlap: f64,
    /// `max_j |Y* A_j Z|`.
    pub complement_coupling: f64,
}

#[derive(Clone, Debug)]
pub struct BlockCompression {
    pub z: Isometry,
    /// Diagonal blocks of `Z* A_j Z`, one tuple per target.
    pub blocks: Vec<HermTuple>,
    pub stages: Vec<StageDiagnostics>,
    /// Largest spectral norm of an off-diagonal block of `Z* A_j Z`.
    pub max_offdiag: f64,
    /// `max_{i,j} |B̃_ij - B_ij|`.
    pub max_deviation: f64,
    pub level: usize,
}

/// Compress the model so that `Z* A_j Z = ⊕_i B̃_ij` with `|B̃_ij - B_ij| <= eps`.
///
/// Stage `k+1` takes the span `L` of `Z` and all `A_j Z`, realizes the next
/// target inside body blocks orthogonal to `L`, and appends it in the
/// coordinates of an orthonormal basis `Y` of `L^⊥`. Since `Y* Z = 0` and
/// `Y* A_j Z = 0`, the new columns neither overlap nor interact with the old.
pub fn block_compress(
    model: &BlockRepetitionModel,
    targets: &[HermTuple],
    eps: f64,
    opts: &MembershipOptions,
) -> Result<BlockCompression> {
    let certs = certify_targets(model, targets, opts)?;
    block_compress_certified(model, targets, &certs, eps)
}

/// As [`block_compress`], starting at the exact level the certificates need
/// and doubling on `TruncationTooSmall`.
pub fn block_compress_auto(
    model: &BlockRepetitionModel,
    targets: &[HermTuple],
    eps: f64,
    opts: &MembershipOptions,
) -> Result<BlockCompression> {
    let certs = certify_targets(model, targets, opts)?;
    let mut need = 0;
    for c in &certs {
        need += c.kraus_decomposition()?.len();
    }
    let mut level = model.level().max(need).max(1);
    loop {
        match block_compress_certified(&model.with_level(level), targets, &certs, eps) {
            Err(RangeError::TruncationTooSmall { .. }) if level < 1 << 16 => level *= 2,
            other => return other,
        }
    }
}

fn certify_targets(
    model: &BlockRepetitionModel,
    targets: &[HermTuple],
    opts: &MembershipOptions,
) -> Result<Vec<ChoiMatrix>> {
    targets
        .iter()
        .enumerate()
        .map(|(index, t)| {
            let v = model.essential_membership(t, opts)?;
            v.certificate.ok_or(RangeError::NotCertified {
                index,
                status: v.status.to_string(),
            })
        })
        .collect()
}

pub fn block_compress_certified(
    model: &BlockRepetitionModel,
    targets: &[HermTuple],
    certs: &[ChoiMatrix],
    eps: f64,
) -> Result<BlockCompression> {
    check_len(targets.len(), certs.len())?;
    let p = targets
        .first()
        .ok_or_else(|| RangeError::Invalid("no targets".into()))?
        .dim();
    for (i, t) in targets.iter().enumerate() {
        if t.dim() != p {
            return Err(RangeError::dim(format!("targets[{i}]"), p, t.dim()));
        }
        check_len(model.m(), t.len())?;
    }
    let d = model.body_dim();
    let a = model.materialize()?;
    let total = model.total_dim();
    let mut z = CMat::zeros(total, 0);
    let mut stages = Vec::with_capacity(targets.len());

    for (i, (target, cert)) in targets.iter().zip(certs).enumerate() {
        let v = realize_member(target, model.body(), cert)?;
        let r = v.rows() / d;

        if i == 0 {
            let blocks: Vec<usize> = (0..r).collect();
            if r > model.level() {
                return Err(RangeError::TruncationTooSmall {
                    level: model.level(),
                    required: r,
                });
            }
            z = embed_in_blocks(&v, model, &blocks)?.into_mat();
            stages.push(StageDiagnostics {
                stage: 0,
                subspace_dim: 0,
                blocks_used: blocks,
                complement_overlap: 0.0,
                complement_coupling: 0.0,
            });
            continue;
        }

        // L = span{Z, A_1 Z, ..., A_m Z}
        let mut gens = z.clone();
        for aj in a.iter() {
            let az = aj.as_mat() * &z;
            gens = concat_columns(&gens, &az);
        }
        let l_basis = column_space(&gens, 1e-12);
        let y = orthogonal_complement(&l_basis);
        let complement_overlap = spectral_norm(&(y.adjoint() * &z));
        let complement_coupling = a
            .iter()
            .map(|aj| spectral_norm(&(y.adjoint() * aj.as_mat() * &z)))
            .fold(0.0, f64::max);

        let free: Vec<usize> = (0..model.level())
            .filter(|&b| {
                let off = model.body_offset(b);
                l_basis.rows(off, d).norm() <= 1e-12
            })
            .collect();
        if free.len() < r {
            return Err(RangeError::TruncationTooSmall {
                level: model.level(),
                required: model.level() + r - free.len(),
            });
        }
        let blocks = free[..r].to_vec();
        let x2_full = embed_in_blocks(&v, model, &blocks)?.into_mat();
        // Coordinates in L^⊥; the realization already lives there.
        let x2 = y.adjoint() * &x2_full;
        let lifted = &y * &x2;
        let drift = spectral_norm(&(&lifted - &x2_full));
        if drift > 1e-9 {
            return Err(RangeError::ToleranceExceeded {
                what: format!("stage {i} leaves the complement"),
                value: drift,
                tol: 1e-9,
            });
        }
        z = concat_columns(&z, &lifted);
        stages.push(StageDiagnostics {
            stage: i,
            subspace_dim: l_basis.ncols(),
            blocks_used: blocks,
            complement_overlap,
            complement_coupling,
        });
    }

    let z = Isometry::with_tolerance(z, 1e-9)?;
    let compressed = z.compress(&a)?;
    let n = targets.len();
    let mut max_offdiag = 0.0f64;
    let mut blocks = Vec::with_capacity(n);
    for i in 0..n {
        let tuple = compressed.map(|c| c.principal_submatrix(i * p, p))?;
        blocks.push(tuple);
        for k in 0..n {
            if k == i {
                continue;
            }
            for c in compressed.iter() {
                let off = c.as_mat().view((i * p, k * p), (p, p)).into_owned();
                max_offdiag = max_offdiag.max(spectral_norm(&off));
            }
        }
    }
    let mut max_deviation = 0.0f64;
    for (blk, t) in blocks.iter().zip(targets) {
        max_deviation = max_deviation.max(blk.max_distance(t)?);
    }
    if max_deviation > eps {
        return Err(RangeError::ToleranceExceeded {
            what: "block deviation".into(),
            value: max_deviation,
            tol: eps,
        });
    }
    Ok(BlockCompression {
        z,
        blocks,
        stages,
        max_offdiag,
        max_deviation,
        level: model.level(),
    })
}

fn concat_columns(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::membership::{membership, Status};

    #[test]
    fn full_dimension_compression_is_unitary_conjugation() {
        let mut rng = sampling::rng(31);
        let a = sampling::hermitian_tuple(&mut rng, 2, 3);
        let s = sample_compressions(&a, 3, 2, 5).unwrap();
        for sample in &s {
            let u = sample.x.as_mat();
            assert!(crate::herm::isometry_defect(&u.adjoint()) < 1e-10);
            let back = sample.values.congruence(&u.adjoint()).unwrap();
            assert!(back.max_distance(&a).unwrap() < 1e-10);
        }
        assert!(sample_compressions(&a, 4, 1, 0).is_err());
    }

    #[test]
    fn coordinate_compressions_are_principal_submatrices() {
        let a = HermTuple::diagonal(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let x = Isometry::coordinate(3, &[0, 2]).unwrap();
        let c = x.compress(&a).unwrap();
        assert_eq!(c.get(0).as_mat()[(1, 1)].re, 5.0);
        assert_eq!(c.get(1).as_mat()[(0, 0)].re, 2.0);
    }

    #[test]
    fn samples_are_never_refuted() {
        let mut rng = sampling::rng(32);
        let a = sampling::hermitian_tuple(&mut rng, 2, 4);
        for s in sample_compressions(&a, 2, 3, 7).unwrap() {
            let v = membership(&s.values, &a, &MembershipOptions::default()).unwrap();
            assert_ne!(v.status, Status::NotMember);
        }
    }

    #[test]
    fn compression_certificate_realizes_original_isometry() {
        let mut rng = sampling::rng(33);
        let m = sampling::hermitian_tuple(&mut rng, 2, 4);
        let x = sampling::isometry(&mut rng, 4, 2);
        let b = x.compress(&m).unwrap();
        let phi = ChoiMatrix::compression(&x);
        let v = realize_member(&b, &m, &phi).unwrap();
        assert_eq!(v.rows(), 4);
        // Equal up to a global phase.
        let overlap = x.as_mat().adjoint() * v.as_mat();
        let phase = overlap[(0, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-10);
        assert!(crate::herm::norm_diff(v.as_mat(), &x.as_mat().map(|z| z * phase)) < 1e-10);
    }

    #[test]
    fn random_member_realized() {
        let mut rng = sampling::rng(34);
        let m = sampling::hermitian_tuple(&mut rng, 2, 3);
        let phi = sampling::ucp_map(&mut rng, 3, 2, 4).unwrap();
        let b = phi.apply_tuple(&m).unwrap();
        let v = realize_member(&b, &m, &phi).unwrap();
        assert!(
            periodic_compression(&v, &m)
                .unwrap()
                .max_distance(&b)
                .unwrap()
                <= 1e-7
        );
        assert!(v.defect() <= 1e-10);
    }

    #[test]
    fn vertex_of_diagonal_body_uses_coordinate_embedding() {
        let m = HermTuple::diagonal(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let b = HermTuple::from_point(&[1.0, 0.0]).unwrap();
        let x = Isometry::coordinate(3, &[1]).unwrap();
        let v = realize_member(&b, &m, &ChoiMatrix::compression(&x)).unwrap();
        assert!((v.as_mat()[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn realization_rejects_non_unital_certificate() {
        let m = HermTuple::diagonal(&[vec![0.0], vec![1.0]]).unwrap();
        let b = HermTuple::from_point(&[0.5]).unwrap();
        let phi = ChoiMatrix::new(2, 1, HermMatrix::identity(2)).unwrap();
        assert!(matches!(
            realize_member(&b, &m, &phi),
            Err(RangeError::NotUnital { .. })
        ));
    }

    #[test]
    fn embedding_reports_required_level() {
        let mut rng = sampling::rng(35);
        let body = sampling::hermitian_tuple(&mut rng, 2, 2);
        let model = BlockRepetitionModel::new(None, body.clone(), 1).unwrap();
        let phi = sampling::ucp_map(&mut rng, 2, 2, 3).unwrap();
        let b = phi.apply_tuple(&body).unwrap();
        match realize_in_model(&b, &model, &phi) {
            Err(RangeError::TruncationTooSmall { level, required }) => {
                assert_eq!(level, 1);
                assert!(required >= 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn block_compress_single_target_matches_realization() {
        let mut rng = sampling::rng(36);
        let body = sampling::hermitian_tuple(&mut rng, 2, 3);
        let phi = sampling::ucp_map(&mut rng, 3, 2, 2).unwrap();
        let b = phi.apply_tuple(&body).unwrap();
        let model =
            BlockRepetitionModel::new(Some(sampling::hermitian_tuple(&mut rng, 2, 2)), body, 6)
                .unwrap();
        let out = block_compress_certified(&model, std::slice::from_ref(&b), &[phi], 1e-6).unwrap();
        assert_eq!(out.blocks.len(), 1);
        assert!(out.max_deviation <= 1e-9);
    }

    #[test]
    fn block_compress_identical_targets() {
        let mut rng = sampling::rng(37);
        let body = sampling::hermitian_tuple(&mut rng, 2, 3);
        let phi = sampling::ucp_map(&mut rng, 3, 2, 2).unwrap();
        let b = phi.apply_tuple(&body).unwrap();
        let model =
            BlockRepetitionModel::new(Some(sampling::hermitian_tuple(&mut rng, 2, 1)), body, 2)
                .unwrap();
        let out = block_compress_auto(
            &model,
            &[b.clone(), b.clone()],
            1e-6,
            &MembershipOptions::default(),
        )
        .unwrap();
        assert!(out.level >= 2);
        let used: usize = out.stages.iter().map(|s| s.blocks_used.len()).sum();
        assert!(used <= out.level);
        assert!(out.max_offdiag <= 1e-9);
        assert!(out.z.defect() <= 1e-9);
        for s in &out.stages[1..] {
            assert!(s.complement_overlap <= 1e-9 && s.complement_coupling <= 1e-9);
        }
        for blk in &out.blocks {
            assert!(blk.max_distance(&b).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn block_compress_rejects_non_members() {
        let body = HermTuple::diagonal(&[vec![0.0], vec![1.0]]).unwrap();
        let model = BlockRepetitionModel::new(None, body, 4).unwrap();
        let out = HermTuple::from_point(&[2.0]).unwrap();
        assert!(matches!(
            block_compress(&model, &[out], 1e-6, &MembershipOptions::default()),
            Err(RangeError::NotCertified { index: 0, .. })
        ));
    }
}
