//! Rank-(p,q) matricial ranges.
//!
//! `B ∈ Λ_{p,q}(A)` when a single isometry `X` (`pq` columns) gives
//! `X* A_j X = I_p ⊗ B_j` for every `j`. Inside a block-repetition model this
//! is realized exactly by amplifying a UCP certificate; for arbitrary finite
//! tuples only a heuristic search is offered.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::choi::ChoiMatrix;
use crate::error::{RangeError, Result};
use crate::essential::BlockRepetitionModel;
use crate::herm::{check_len, orthogonal_complement, svec, CMat, HermTuple, Isometry};
use crate::membership::{membership, MembershipOptions, Status};
use crate::sampling;
use crate::spatial::{realize_in_model, REALIZE_TOL};

#[derive(Clone, Debug)]
pub struct LambdaWitness {
    pub x: Isometry,
    /// `max_j |X* A_j X - I_p ⊗ B_j|`.
    pub residual: f64,
}

fn lambda_residual(x: &Isometry, a: &HermTuple, b: &HermTuple, p: usize) -> Result<f64> {
    x.compress(a)?.max_distance(&b.amplify(p)?)
}

/// Realize `I_p ⊗ B` as a compression of the truncated model from a
/// certificate `Φ` for `B ∈ W^q(M)`, via the map `T ↦ I_p ⊗ Φ(T)`.
pub fn lambda_realize(
    b: &HermTuple,
    model: &BlockRepetitionModel,
    p: usize,
    phi: &ChoiMatrix,
) -> Result<LambdaWitness> {
    if p == 0 {
        return Err(RangeError::Invalid("p must be positive".into()));
    }
    check_len(model.m(), b.len())?;
    let amplified = phi.amplified(p)?;
    let target = b.amplify(p)?;
    let x = realize_in_model(&target, model, &amplified)?;
    let residual = lambda_residual(&x, &model.materialize()?, b, p)?;
    if residual > REALIZE_TOL {
        return Err(RangeError::ToleranceExceeded {
            what: "lambda residual".into(),
            value: residual,
            tol: REALIZE_TOL,
        });
    }
    Ok(LambdaWitness { x, residual })
}

#[derive(Clone, Debug)]
pub struct LambdaSearchOptions {
    /// Gradient iterations across all restarts.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Objective value accepted as a witness.
    pub tol: f64,
}

impl Default for LambdaSearchOptions {
    fn default() -> Self {
        LambdaSearchOptions {
            budget: 20_000,
            restarts: 30,
            seed: 0,
            tol: 1e-10,
        }
    }
}

/// Minimize `f(X) = Σ_j |X* A_j X - I_p ⊗ B_j|_F²` over isometries by
/// gradient steps followed by polar re-orthonormalization. Returns a witness
/// only when `f < tol`; `None` means nothing was found.
pub fn lambda_search(
    b: &HermTuple,
    a: &HermTuple,
    p: usize,
    opts: &LambdaSearchOptions,
) -> Result<Option<LambdaWitness>> {
    check_len(a.len(), b.len())?;
    let k = p * b.dim();
    if p == 0 || k > a.dim() {
        return Ok(None);
    }
    let targets: Vec<CMat> = b.amplify(p)?.iter().map(|t| t.as_mat().clone()).collect();
    let mats: Vec<CMat> = a.iter().map(|t| t.as_mat().clone()).collect();
    let restarts = opts.restarts.max(1);
    let per_restart = (opts.budget / restarts).max(1);

    let objective = |x: &CMat| -> (f64, Vec<CMat>) {
        let mut f = 0.0;
        let mut res = Vec::with_capacity(mats.len());
        for (aj, cj) in mats.iter().zip(&targets) {
            let e = x.adjoint() * aj * x - cj;
            f += e.norm_squared();
            res.push(e);
        }
        (f, res)
    };

    let run = |idx: usize| -> Option<CMat> {
        let mut rng = sampling::substream(opts.seed, idx as u64);
        let mut x = sampling::isometry(&mut rng, a.dim(), k).into_mat();
        let (mut f, mut res) = objective(&x);
        let mut iters = 0;
        while iters < per_restart && f >= opts.tol {
            iters += 1;
            if f < POLISH_START {
                let (xp, fp) = lm_polish(&x, &mats, &objective, opts.tol, &mut iters, per_restart);
                x = xp;
                f = fp;
                break;
            }
            let mut grad = CMat::zeros(x.nrows(), x.ncols());
            for (aj, e) in mats.iter().zip(&res) {
                grad += aj * &x * e;
            }
            grad *= crate::herm::cplx(4.0, 0.0);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand = polar(&(&x - grad.scale(t)));
                let (fc, rc) = objective(&cand);
                if fc < f {
                    x = cand;
                    f = fc;
                    res = rc;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (f < opts.tol).then_some(x)
    };

    let found: Vec<Option<CMat>> = (0..restarts).into_par_iter().map(run).collect();
    match found.into_iter().flatten().next() {
        Some(x) => {
            let x = Isometry::with_tolerance(x, 1e-9)?;
            let residual = lambda_residual(&x, a, b, p)?;
            Ok(Some(LambdaWitness { x, residual }))
        }
        None => Ok(None),
    }
}

/// Objective value below which gradient steps hand over to damped
/// Gauss-Newton steps.
const POLISH_START: f64 = 1e-2;

/// Levenberg-Marquardt in tangent coordinates `Δ = X Ω + X_⊥ K`
/// (`Ω` skew-Hermitian), retracted onto the isometries after every step.
fn lm_polish<F>(
    x0: &CMat,
    mats: &[CMat],
    objective: &F,
    tol: f64,
    iters: &mut usize,
    max_iters: usize,
) -> (CMat, f64)
where
    F: Fn(&CMat) -> (f64, Vec<CMat>),
{
    let mut x = x0.clone();
    let (mut f, mut res) = objective(&x);
    let mut mu = 1e-3;
    while *iters < max_iters && f >= tol {
        *iters += 1;
        let basis = tangent_basis(&x);
        let r = stack_residuals(&res);
        let mut jac = DMatrix::<f64>::zeros(r.len(), basis.len());
        for (col, delta) in basis.iter().enumerate() {
            let de: Vec<CMat> = mats
                .iter()
                .map(|aj| {
                    let t = delta.adjoint() * aj * &x;
                    &t + t.adjoint()
                })
                .collect();
            jac.column_mut(col).copy_from(&stack_residuals(&de));
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..20 {
            let mut lhs = jtj.clone();
            for d in 0..basis.len() {
                lhs[(d, d)] += mu * (1.0 + jtj[(d, d)]);
            }
            let Some(step) = lhs.cholesky().map(|c| c.solve(&jtr)) else {
                mu *= 10.0;
                continue;
            };
            let mut cand = x.clone();
            for (c, delta) in step.iter().zip(&basis) {
                cand -= delta.scale(*c);
            }
            let cand = polar(&cand);
            let (fc, rc) = objective(&cand);
            if fc < f {
                x = cand;
                f = fc;
                res = rc;
                mu = (mu * 0.3).max(1e-12);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (x, f)
}

/// Real basis of the tangent space of the isometries at `x`.
fn tangent_basis(x: &CMat) -> Vec<CMat> {
    let (n, k) = (x.nrows(), x.ncols());
    let perp = orthogonal_complement(x);
    let one = crate::herm::cplx(1.0, 0.0);
    let i = crate::herm::cplx(0.0, 1.0);
    let mut out = Vec::with_capacity(k * k + 2 * (n - k) * k);
    for a in 0..k {
        for b in a..k {
            let mut re = CMat::zeros(k, k);
            let mut im = CMat::zeros(k, k);
            if a == b {
                im[(a, a)] = i;
                out.push(x * im);
            } else {
                re[(a, b)] = one;
                re[(b, a)] = -one;
                im[(a, b)] = i;
                im[(b, a)] = i;
                out.push(x * re);
                out.push(x * im);
            }
        }
    }
    for r in 0..perp.ncols() {
        for c in 0..k {
            for z in [one, i] {
                let mut kmat = CMat::zeros(perp.ncols(), k);
                kmat[(r, c)] = z;
                out.push(&perp * kmat);
            }
        }
    }
    out
}

/// Real coordinates of a list of Hermitian residuals: diagonal real parts and
/// `√2`-weighted upper-triangular real and imaginary parts.
fn stack_residuals(res: &[CMat]) -> DVector<f64> {
    let mut out = Vec::new();
    for e in res {
        out.extend(svec(e).iter().copied());
    }
    DVector::from_vec(out)
}

/// Nearest isometry `U V*` from the thin SVD.
fn polar(y: &CMat) -> CMat {
    let svd = y.clone().svd(true, true);
    svd.u.expect("u") * svd.v_t.expect("v_t")
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaProbe {
    pub index: usize,
    pub essential: Status,
    /// Residual of the exact realization, for essential members.
    pub realization_residual: Option<f64>,
    /// For essential non-members: whether the search produced anything.
    pub search_found: Option<bool>,
    /// For essential non-members: verdict of `B` against `A + K`.
    pub refuted: Option<Status>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaReport {
    pub p: usize,
    pub q: usize,
    pub probes: Vec<LambdaProbe>,
    pub passed: bool,
}

#[derive(Clone, Debug, Default)]
pub struct LambdaCheckOptions {
    pub membership: MembershipOptions,
    pub search: LambdaSearchOptions,
}

/// Compare essential membership with rank-(p,q) behaviour of `A + K`:
/// members must be realized exactly, non-members must admit no search
/// witness and must be refuted at the q level.
pub fn lambda_ess_check(
    model: &BlockRepetitionModel,
    p: usize,
    q: usize,
    probes: &[HermTuple],
    opts: &LambdaCheckOptions,
) -> Result<LambdaReport> {
    let perturbed = model.preserving_perturbation()?.perturbed_model()?;
    let a_plus_k = perturbed.materialize()?;
    let mut out = Vec::with_capacity(probes.len());
    for (index, b) in probes.iter().enumerate() {
        if b.dim() != q {
            return Err(RangeError::dim(format!("probes[{index}]"), q, b.dim()));
        }
        let verdict = model.essential_membership(b, &opts.membership)?;
        let mut probe = LambdaProbe {
            index,
            essential: verdict.status,
            realization_residual: None,
            search_found: None,
            refuted: None,
            passed: false,
        };
        match verdict.status {
            Status::Member => {
                let phi = verdict.certificate.expect("member carries a certificate");
                let rank = p * phi.kraus_decomposition()?.len();
                let host = perturbed.with_level(perturbed.level().max(rank));
                let res = lambda_realize(b, &host, p, &phi).map(|w| w.residual);
                probe.realization_residual = Some(res.as_ref().copied().unwrap_or(f64::INFINITY));
                probe.passed = matches!(res, Ok(r) if r <= REALIZE_TOL);
            }
            Status::NotMember => {
                let search = LambdaSearchOptions {
                    seed: opts.search.seed.wrapping_add(index as u64),
                    ..opts.search.clone()
                };
                let found = lambda_search(b, &a_plus_k, p, &search)?.is_some();
                let refuted = membership(b, &a_plus_k, &opts.membership)?.status;
                probe.search_found = Some(found);
                probe.refuted = Some(refuted);
                probe.passed = !found && refuted == Status::NotMember;
            }
            Status::Inconclusive => {}
        }
        out.push(probe);
    }
    let passed = out.iter().all(|p| p.passed);
    Ok(LambdaReport {
        p,
        q,
        probes: out,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herm::{kron, HermMatrix};
    use crate::spatial::realize_member;

    #[test]
    fn p_one_matches_realize_member() {
        let mut rng = sampling::rng(41);
        let body = sampling::hermitian_tuple(&mut rng, 2, 3);
        let phi = sampling::ucp_map(&mut rng, 3, 2, 2).unwrap();
        let b = phi.apply_tuple(&body).unwrap();
        let model = BlockRepetitionModel::new(None, body.clone(), 6).unwrap();
        let w = lambda_realize(&b, &model, 1, &phi).unwrap();
        let v = realize_member(&b, &body, &phi).unwrap();
        assert!(
            crate::herm::norm_diff(&w.x.as_mat().rows(0, v.rows()).into_owned(), v.as_mat())
                < 1e-10
        );
    }

    #[test]
    fn amplified_member_realized() {
        let mut rng = sampling::rng(42);
        let body = sampling::hermitian_tuple(&mut rng, 2, 3);
        let phi = sampling::ucp_map(&mut rng, 3, 2, 2).unwrap();
        let b = phi.apply_tuple(&body).unwrap();
        let model =
            BlockRepetitionModel::new(Some(sampling::hermitian_tuple(&mut rng, 2, 2)), body, 8)
                .unwrap();
        let w = lambda_realize(&b, &model, 2, &phi).unwrap();
        assert!(w.residual <= 1e-7);
        assert!(w.x.defect() <= 1e-9);
        // Dropping one tensor copy still realizes p = 1.
        let x1 = Isometry::new(w.x.as_mat().columns(0, 2).into_owned()).unwrap();
        assert!(lambda_residual(&x1, &model.materialize().unwrap(), &b, 1).unwrap() <= 1e-7);
    }

    #[test]
    fn explicit_block_is_coordinate_embedded() {
        let b = HermTuple::from_point(&[0.3, -0.2]).unwrap();
        let body = HermTuple::diagonal(&[vec![0.3, -0.2], vec![1.0, 0.0]]).unwrap();
        let model = BlockRepetitionModel::new(None, body.clone(), 2).unwrap();
        let x = Isometry::coordinate(2, &[0]).unwrap();
        let w = lambda_realize(&b, &model, 2, &ChoiMatrix::compression(&x)).unwrap();
        assert!(w.residual < 1e-14);
        // Supported on the first coordinate of each body block.
        for col in 0..2 {
            assert!(w.x.as_mat()[(1, col)].norm() < 1e-12 && w.x.as_mat()[(3, col)].norm() < 1e-12);
        }
    }

    #[test]
    fn planted_instance_recovered() {
        let mut rng = sampling::rng(43);
        let b = sampling::hermitian_tuple(&mut rng, 2, 2);
        let junk = sampling::hermitian_tuple(&mut rng, 2, 2);
        let planted = b.amplify(2).unwrap().direct_sum(&junk).unwrap();
        let u = sampling::unitary(&mut rng, 6);
        let a = planted.congruence(&u).unwrap();
        let w = lambda_search(&b, &a, 2, &LambdaSearchOptions::default())
            .unwrap()
            .expect("planted witness");
        assert!(w.residual <= 1e-5);
        assert!(w.x.defect() <= 1e-9);
    }

    #[test]
    fn norm_excess_finds_nothing() {
        let a =
            HermTuple::new(vec![HermMatrix::from_real_diag(&[1.0, -1.0, 0.5]).unwrap()]).unwrap();
        let b = HermTuple::from_point(&[2.0]).unwrap();
        let opts = LambdaSearchOptions {
            budget: 600,
            restarts: 3,
            ..Default::default()
        };
        assert!(lambda_search(&b, &a, 1, &opts).unwrap().is_none());
        assert!(lambda_search(&b, &a, 4, &opts).unwrap().is_none());
    }

    #[test]
    fn common_eigenvector_found() {
        let a = HermTuple::diagonal(&[vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let b = HermTuple::from_point(&[0.0, 0.0]).unwrap();
        let w = lambda_search(&b, &a, 1, &LambdaSearchOptions::default())
            .unwrap()
            .unwrap();
        assert!((w.x.as_mat()[(1, 0)].norm() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn ess_check_on_simplex_vertices() {
        let body = HermTuple::diagonal(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let model =
            BlockRepetitionModel::new(Some(HermTuple::from_point(&[3.0, 3.0]).unwrap()), body, 2)
                .unwrap();
        let probes: Vec<HermTuple> = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
            .iter()
            .map(|v| HermTuple::from_point(v).unwrap())
            .collect();
        let report =
            lambda_ess_check(&model, 2, 1, &probes, &LambdaCheckOptions::default()).unwrap();
        assert!(report.passed, "{report:?}");
        let far = vec![HermTuple::from_point(&[3.0, 3.0]).unwrap()];
        let opts = LambdaCheckOptions {
            search: LambdaSearchOptions {
                budget: 300,
                restarts: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        let report = lambda_ess_check(&model, 2, 1, &far, &opts).unwrap();
        assert_eq!(report.probes[0].essential, Status::NotMember);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn kron_layout_matches_amplify() {
        let b = HermTuple::from_point(&[0.7]).unwrap();
        let amp = b.amplify(3).unwrap();
        let direct = kron(&crate::herm::identity(3), b.get(0).as_mat());
        assert!(crate::herm::norm_diff(amp.get(0).as_mat(), &direct) < 1e-15);
    }
}
