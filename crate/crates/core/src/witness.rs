//! Norm-inequality evaluation and the randomized search for violations.
//!
//! `B ∈ W^q(A)` exactly when
//! `|R_0 ⊗ I_q + Σ R_j ⊗ B_j| <= |R_0 ⊗ I + Σ R_j ⊗ A_j|` for every choice of
//! `q x q` coefficients. A coefficient tuple violating the inequality is a
//! sound refutation; failing to find one proves nothing.

use rayon::prelude::*;

use crate::error::Result;
use crate::herm::{
    cplx, identity, pencil_norm, spectral_norm, CMat, HermTuple, NormTestTuple, ZERO,
};
use crate::sampling::{self, SeededRng};
use crate::simplex::Simplex;

/// Slack allowed by [`check_inequality`].
pub const HOLDS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn check_inequality<F>(r: &NormTestTuple, b: &HermTuple, ref_norm: F) -> Result<InequalityCheck>
where
    F: Fn(&NormTestTuple) -> Result<f64>,
{
    let lhs = pencil_norm(r, b)?;
    let rhs = ref_norm(r)?;
    Ok(InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + HOLDS_TOL,
    })
}

/// A pencil violating the norm inequality, rescaled so that `rhs = 1`
/// (or `lhs = 1` when the reference norm vanishes). `gap = lhs - rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub r: NormTestTuple,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

impl Witness {
    pub fn evaluate<F>(r: &NormTestTuple, b: &HermTuple, ref_norm: F) -> Result<Witness>
    where
        F: Fn(&NormTestTuple) -> Result<f64>,
    {
        let lhs = pencil_norm(r, b)?;
        let rhs = ref_norm(r)?;
        let scale = if rhs > 1e-12 {
            1.0 / rhs
        } else if lhs > 0.0 {
            1.0 / lhs
        } else {
            1.0
        };
        let r = r.scaled(scale);
        let lhs = pencil_norm(&r, b)?;
        let rhs = ref_norm(&r)?;
        Ok(Witness {
            r,
            lhs,
            rhs,
            gap: lhs - rhs,
        })
    }
}

#[derive(Clone, Debug)]
pub struct WitnessOptions {
    /// Total objective evaluations across all restarts.
    pub budget: usize,
    pub restarts: usize,
    pub gap_tol: f64,
    pub seed: u64,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        WitnessOptions {
            budget: 20_000,
            restarts: 50,
            gap_tol: 1e-6,
            seed: 0,
        }
    }
}

/// Randomized search for a violating pencil.
pub fn search_witness<F>(
    b: &HermTuple,
    ref_norm: F,
    opts: &WitnessOptions,
) -> Result<Option<Witness>>
where
    F: Fn(&NormTestTuple) -> Result<f64> + Sync,
{
    search_witness_from(b, ref_norm, opts, &[], false)
}

/// Like [`search_witness`], but first tries (and polishes) the given starting
/// pencils. With `stop_at_first`, returns as soon as any sound witness appears.
pub fn search_witness_from<F>(
    b: &HermTuple,
    ref_norm: F,
    opts: &WitnessOptions,
    starts: &[NormTestTuple],
    stop_at_first: bool,
) -> Result<Option<Witness>>
where
    F: Fn(&NormTestTuple) -> Result<f64> + Sync,
{
    let q = b.dim();
    let m = b.len();
    let restarts = opts.restarts.max(1);
    let per_restart = (opts.budget / restarts).max(1);
    let score = |r: &NormTestTuple| -> Result<f64> {
        let lhs = pencil_norm(r, b)?;
        let rhs = ref_norm(r)?;
        let floor = 1e-12 * r.mats().iter().map(spectral_norm).fold(0.0, f64::max);
        Ok((lhs - rhs) / rhs.max(floor).max(1e-300))
    };

    let mut best: Option<Witness> = None;
    let consider = |w: Witness, best: &mut Option<Witness>| {
        if w.gap > opts.gap_tol && best.as_ref().is_none_or(|bw| w.gap > bw.gap) {
            *best = Some(w);
        }
    };

    for s in starts
        .iter()
        .filter(|s| s.q() == q && s.m() == m)
        .cloned()
        .chain(coordinate_pencils(q, m))
    {
        let w = Witness::evaluate(&s, b, &ref_norm)?;
        consider(w, &mut best);
    }
    if stop_at_first && best.is_some() {
        return Ok(best);
    }

    let run = |idx: usize| -> Result<Option<Witness>> {
        let mut rng = sampling::substream(opts.seed, idx as u64);
        let start = match starts.get(idx) {
            Some(s) if s.q() == q && s.m() == m => s.clone(),
            _ => sampling::norm_test_tuple(&mut rng, q, m),
        };
        let r = polish(start, &score, per_restart, &mut rng)?;
        let r = snap(r, &score)?;
        let w = Witness::evaluate(&r, b, &ref_norm)?;
        Ok((w.gap > opts.gap_tol).then_some(w))
    };

    if stop_at_first {
        for idx in 0..restarts {
            if let Some(w) = run(idx)? {
                consider(w, &mut best);
                return Ok(best);
            }
        }
        return Ok(best);
    }

    let results: Vec<Result<Option<Witness>>> = (0..restarts).into_par_iter().map(run).collect();
    for res in results {
        if let Some(w) = res? {
            consider(w, &mut best);
        }
    }
    Ok(best)
}

/// Derivative-free coordinate polishing of the real and imaginary parts of
/// every coefficient entry.
fn polish<S>(
    start: NormTestTuple,
    score: &S,
    budget: usize,
    rng: &mut SeededRng,
) -> Result<NormTestTuple>
where
    S: Fn(&NormTestTuple) -> Result<f64>,
{
    let q = start.q();
    let mut mats = start.mats().to_vec();
    let coords = mats.len() * q * q * 2;
    let mut current = score(&start)?;
    let mut evals = 1;
    let mut step = 0.5;
    let mut order: Vec<usize> = (0..coords).collect();
    while evals < budget && step > 1e-5 {
        let mut improved = false;
        // Fisher-Yates with the seeded stream keeps sweeps reproducible.
        for i in (1..order.len()).rev() {
            let k = (sampling::uniform(rng, 0.0, 1.0) * (i + 1) as f64) as usize;
            order.swap(i, k.min(i));
        }
        for &c in &order {
            if evals >= budget {
                break;
            }
            let (mat, rest) = (c / (2 * q * q), c % (2 * q * q));
            let (entry, imag) = (rest / 2, rest % 2 == 1);
            let (i, j) = (entry / q, entry % q);
            let delta = if imag {
                cplx(0.0, step)
            } else {
                cplx(step, 0.0)
            };
            for dir in [1.0, -1.0] {
                mats[mat][(i, j)] += delta * dir;
                let cand = NormTestTuple::new(mats.clone())?;
                let s = score(&cand)?;
                evals += 1;
                if s > current {
                    current = s;
                    improved = true;
                    break;
                }
                mats[mat][(i, j)] -= delta * dir;
                if evals >= budget {
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    NormTestTuple::new(mats)
}

/// `R_j = ±I` for a single `j`, all other coefficients zero.
fn coordinate_pencils(q: usize, m: usize) -> Vec<NormTestTuple> {
    let mut out = Vec::with_capacity(2 * m);
    for j in 1..=m {
        for sign in [1.0, -1.0] {
            let mut mats = vec![CMat::zeros(q, q); m + 1];
            mats[j] = identity(q).scale(sign);
            out.extend(NormTestTuple::new(mats).ok());
        }
    }
    out
}

/// Round small entries to zero and near-integer ratios to exact values,
/// keeping each change only if the score does not drop.
fn snap<S>(r: NormTestTuple, score: &S) -> Result<NormTestTuple>
where
    S: Fn(&NormTestTuple) -> Result<f64>,
{
    let scale = r.mats().iter().map(spectral_norm).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(r);
    }
    let mut best = r.scaled(1.0 / scale);
    let mut current = score(&best)?;
    for grid in [1e-3, 1e-2, 1e-1] {
        let mats: Vec<CMat> = best
            .mats()
            .iter()
            .map(|c| c.map(|z| cplx((z.re / grid).round() * grid, (z.im / grid).round() * grid)))
            .collect();
        if mats.iter().all(|c| c.iter().all(|z| *z == ZERO)) {
            continue;
        }
        let cand = NormTestTuple::new(mats)?;
        let s = score(&cand)?;
        if s >= current {
            current = s;
            best = cand;
        }
    }
    Ok(best)
}

/// `max_k |R_0 + Σ_j v_{jk} R_j|` over the simplex vertices.
pub fn vertex_pencil_norm(r: &NormTestTuple, s: &Simplex) -> Result<f64> {
    crate::herm::check_len(s.m(), r.m())?;
    let mut best = 0.0f64;
    for v in s.vertices() {
        let mut acc = r.r0().clone();
        for (rj, &vj) in r.coeffs().iter().zip(v) {
            acc += rj.scale(vj);
        }
        best = best.max(spectral_norm(&acc));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herm::HermMatrix;

    fn diag_a() -> HermTuple {
        HermTuple::new(vec![HermMatrix::from_real_diag(&[1.0, -1.0]).unwrap()]).unwrap()
    }

    #[test]
    fn identity_pencil_holds_with_equality() {
        let a = diag_a();
        let b = HermTuple::from_point(&[0.3]).unwrap();
        let r = NormTestTuple::identity_pencil(1, 1);
        let c = check_inequality(&r, &b, |r| pencil_norm(r, &a)).unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-12 && (c.rhs - 1.0).abs() < 1e-12 && c.holds);
    }

    #[test]
    fn outside_point_fails_inequality() {
        let a = diag_a();
        let b = HermTuple::from_point(&[2.0]).unwrap();
        let r = NormTestTuple::scalar(&[0.0, 1.0]).unwrap();
        let c = check_inequality(&r, &b, |r| pencil_norm(r, &a)).unwrap();
        assert!((c.lhs - 2.0).abs() < 1e-12 && (c.rhs - 1.0).abs() < 1e-12 && !c.holds);
    }

    #[test]
    fn search_finds_norm_witness() {
        let a = diag_a();
        let b = HermTuple::from_point(&[1.5]).unwrap();
        let opts = WitnessOptions {
            budget: 2000,
            restarts: 10,
            ..Default::default()
        };
        let w = search_witness(&b, |r| pencil_norm(r, &a), &opts)
            .unwrap()
            .unwrap();
        assert!(w.gap >= 0.5 - 1e-9);
        // Re-evaluated from scratch.
        let lhs = pencil_norm(&w.r, &b).unwrap();
        let rhs = pencil_norm(&w.r, &a).unwrap();
        assert!(lhs > rhs + 1e-9);
    }

    #[test]
    fn search_never_refutes_a_member() {
        let a = diag_a();
        let b = HermTuple::new(vec![HermMatrix::from_real_diag(&[0.9, -0.2]).unwrap()]).unwrap();
        let opts = WitnessOptions {
            budget: 4000,
            restarts: 8,
            ..Default::default()
        };
        assert!(search_witness(&b, |r| pencil_norm(r, &a), &opts)
            .unwrap()
            .is_none());
    }

    #[test]
    fn search_is_deterministic() {
        let a = diag_a();
        let b = HermTuple::from_point(&[1.2]).unwrap();
        let opts = WitnessOptions {
            budget: 800,
            restarts: 4,
            seed: 9,
            ..Default::default()
        };
        let w1 = search_witness(&b, |r| pencil_norm(r, &a), &opts).unwrap();
        let w2 = search_witness(&b, |r| pencil_norm(r, &a), &opts).unwrap();
        assert_eq!(w1, w2);
    }

    #[test]
    fn vertex_norm_examples() {
        let s = Simplex::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let r = NormTestTuple::scalar(&[0.0, 1.0]).unwrap();
        assert!((vertex_pencil_norm(&r, &s).unwrap() - 1.0).abs() < 1e-12);
        let id = NormTestTuple::identity_pencil(2, 1);
        assert!((vertex_pencil_norm(&id, &s).unwrap() - 1.0).abs() < 1e-12);
    }
}
