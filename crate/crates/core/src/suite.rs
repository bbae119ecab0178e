//! Property-based theorem suite at desk scale.
//!
//! Each criterion draws its own instances from `substream(seed, id)` and
//! reports counts only (no timings), so a report is a pure function of the
//! configuration.

use serde::Serialize;

use crate::choi::cstar_combine;
use crate::error::Result;
use crate::essential::{dependent_body, BlockRepetitionModel};
use crate::herm::{pencil_norm, spectral_norm, CMat, HermMatrix, HermTuple};
use crate::lambda::{lambda_ess_check, LambdaCheckOptions, LambdaSearchOptions};
use crate::membership::{membership, MembershipOptions, Status};
use crate::sampling::{self, SeededRng};
use crate::simplex::{
    barycentric_povm, dilation_compression, naimark_dilate, simplex_body, simplex_norm_bound,
    simplex_preservation_check, Simplex, SimplexCheckOptions,
};
use crate::spatial::block_compress_auto;
use crate::support::{boundary_polyline, planar_margin, support_value, Polyline, ANGLE_GRID};
use crate::witness::{check_inequality, search_witness, WitnessOptions};

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Reduced instance counts for smoke runs.
    pub quick: bool,
}

impl SuiteConfig {
    pub fn new(seed: u64) -> Self {
        SuiteConfig { seed, quick: false }
    }

    pub fn quick(seed: u64) -> Self {
        SuiteConfig { seed, quick: true }
    }

    fn count(&self, full: usize, quick: usize) -> usize {
        if self.quick {
            quick
        } else {
            full
        }
    }

    fn rng(&self, id: u64) -> SeededRng {
        sampling::substream(self.seed, id)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub summary: String,
}

impl CriterionResult {
    fn new(id: u32, name: &str, passed: bool, summary: String) -> Self {
        CriterionResult {
            id,
            name: name.into(),
            passed,
            summary,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "criterion {}: {} - {} ({})",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.summary
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PolylineEntry {
    pub model: usize,
    pub body_dim: usize,
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub quick: bool,
    pub criteria: Vec<CriterionResult>,
    pub polylines: Vec<PolylineEntry>,
    pub passed: bool,
}

pub const CRITERIA: [u32; 7] = [1, 2, 3, 4, 5, 6, 7];

pub fn run_criterion(id: u32, cfg: &SuiteConfig) -> Result<CriterionResult> {
    match id {
        1 => norm_consistency(cfg),
        2 => model_identity(cfg),
        3 => cstar_convexity(cfg),
        4 => interior_dichotomy(cfg),
        5 => simplex_dilation(cfg),
        6 => block_compression(cfg),
        7 => preservation_pipeline(cfg),
        _ => Err(crate::RangeError::Invalid(format!(
            "unknown criterion {id}"
        ))),
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let criteria = CRITERIA
        .iter()
        .map(|&id| run_criterion(id, cfg))
        .collect::<Result<Vec<_>>>()?;
    let polylines = model_polylines(cfg)?;
    let passed = criteria.iter().all(|c| c.passed);
    Ok(SuiteReport {
        seed: cfg.seed,
        quick: cfg.quick,
        criteria,
        polylines,
        passed,
    })
}

fn opts(rng: &mut SeededRng) -> MembershipOptions {
    use rand::Rng;
    MembershipOptions::default().with_seed(rng.random())
}

/// Membership verdicts against the pencil-norm characterization.
pub fn norm_consistency(cfg: &SuiteConfig) -> Result<CriterionResult> {
    let mut rng = cfg.rng(1);
    let instances = cfg.count(50, 6);
    let trials = cfg.count(1000, 100);
    let budget = cfg.count(20_000, 2_000);
    let (mut members, mut refuted, mut inconclusive, mut contradictions) = (0, 0, 0, 0);
    let mut worst_violation = f64::NEG_INFINITY;
    for i in 0..instances {
        let a = sampling::hermitian_tuple(&mut rng, 2, 6);
        let b = match i % 3 {
            0 => sampling::ucp_map(&mut rng, 6, 2, 2)?.apply_tuple(&a)?,
            1 => sampling::hermitian_tuple(&mut rng, 2, 2).map(|m| Ok(m.scale(2.0)))?,
            _ => {
                // Member pushed outward from the centre of the range.
                let inner = sampling::ucp_map(&mut rng, 6, 2, 3)?.apply_tuple(&a)?;
                let centre = sampling::ucp_map(&mut rng, 6, 2, 6)?.apply_tuple(&a)?;
                let t = sampling::uniform(&mut rng, 1.0, 1.6);
                HermTuple::new(
                    inner
                        .iter()
                        .zip(centre.iter())
                        .map(|(x, c)| c.add(&x.sub(c)?.scale(t)))
                        .collect::<Result<_>>()?,
                )?
            }
        };
        let o = opts(&mut rng);
        let verdict = membership(&b, &a, &o)?;
        match verdict.status {
            Status::Member => {
                members += 1;
                let mut bad = false;
                for _ in 0..trials {
                    let r = sampling::norm_test_tuple(&mut rng, 2, 2);
                    let c = check_inequality(&r, &b, |r| pencil_norm(r, &a))?;
                    let v = (c.lhs - c.rhs) / c.rhs.max(1e-12);
                    worst_violation = worst_violation.max(v);
                    bad |= v > 1e-6;
                }
                let wopts = WitnessOptions {
                    budget,
                    seed: o.witness.seed,
                    ..Default::default()
                };
                if let Some(w) = search_witness(&b, |r| pencil_norm(r, &a), &wopts)? {
                    worst_violation = worst_violation.max(w.gap);
                    bad = true;
                }
                contradictions += bad as usize;
            }
            Status::NotMember => {
                refuted += 1;
                let ok = verdict.witness.as_ref().is_some_and(|w| {
                    let lhs = pencil_norm(&w.r, &b).unwrap_or(f64::NAN);
                    let rhs = pencil_norm(&w.r, &a).unwrap_or(f64::NAN);
                    lhs - rhs > o.witness.gap_tol
                });
                contradictions += (!ok) as usize;
            }
            Status::Inconclusive => inconclusive += 1,
        }
    }
    Ok(CriterionResult::new(
        1,
        "norm characterization consistency",
        contradictions == 0,
        format!(
            "{instances} instances: {members} member, {refuted} refuted, {inconclusive} inconclusive; \
             {contradictions} contradictions; worst relative violation {worst_violation:.3e}"
        ),
    ))
}

/// Bodies with m = 2 of several shapes: triangles, ellipses, hulls of an
/// ellipse and a point.
fn random_body(rng: &mut SeededRng, kind: usize) -> Result<HermTuple> {
    match kind % 4 {
        0 => {
            let s = random_simplex(rng, 2);
            let u = sampling::unitary(rng, 3);
            simplex_body(&s, &[], Some(&u))
        }
        1 => Ok(sampling::hermitian_tuple(rng, 2, 2)),
        2 => Ok(sampling::hermitian_tuple(rng, 2, 3)),
        _ => {
            let e = sampling::hermitian_tuple(rng, 2, 2);
            let p = vec![sampling::gaussian(rng) * 1.5, sampling::gaussian(rng) * 1.5];
            let t = e.direct_sum(&HermTuple::from_point(&p)?)?;
            let u = sampling::unitary(rng, 3);
            t.congruence(&u)
        }
    }
}

pub(crate) fn random_simplex(rng: &mut SeededRng, m: usize) -> Simplex {
    loop {
        let v: Vec<Vec<f64>> = (0..=m)
            .map(|_| (0..m).map(|_| 1.5 * sampling::gaussian(rng)).collect())
            .collect();
        if let Ok(s) = Simplex::new(v) {
            // Keep the simplices well conditioned.
            let vol = simplex_volume(&s);
            if vol > 0.3 {
                return s;
            }
        }
    }
}

fn simplex_volume(s: &Simplex) -> f64 {
    let m = s.m();
    let v = s.vertices();
    let mat = nalgebra::DMatrix::from_fn(m, m, |i, j| v[i + 1][j] - v[0][j]);
    mat.determinant().abs()
}

fn random_head(rng: &mut SeededRng, m: usize, h: usize) -> HermTuple {
    sampling::hermitian_tuple(rng, m, h)
        .map(|x| Ok(x.scale(3.0)))
        .expect("finite")
}

fn c2_models(cfg: &SuiteConfig) -> Result<Vec<BlockRepetitionModel>> {
    let mut rng = cfg.rng(102);
    (0..cfg.count(20, 4))
        .map(|k| {
            let body = random_body(&mut rng, k)?;
            let h = 1 + k % 3;
            BlockRepetitionModel::new(Some(random_head(&mut rng, 2, h)), body, 2)
        })
        .collect()
}

/// Essential membership against the support-function oracle (q = 1) and
/// stability of certified members under head perturbations (q = 2).
pub fn model_identity(cfg: &SuiteConfig) -> Result<CriterionResult> {
    let mut rng = cfg.rng(2);
    let models = c2_models(cfg)?;
    let probes = cfg.count(200, 25);
    let band = 1e-4;
    let (mut inside, mut outside, mut banded, mut disagreements) = (0, 0, 0, 0);
    for model in &models {
        let body = model.body();
        let hi: Vec<f64> = (0..2)
            .map(|j| {
                let mut e = vec![0.0; 2];
                e[j] = 1.0;
                support_value(body, &e)
            })
            .collect::<Result<_>>()?;
        let lo: Vec<f64> = (0..2)
            .map(|j| {
                let mut e = vec![0.0; 2];
                e[j] = -1.0;
                support_value(body, &e).map(|v| -v)
            })
            .collect::<Result<_>>()?;
        for _ in 0..probes {
            let x: Vec<f64> = (0..2)
                .map(|j| {
                    let pad = 0.25 * (hi[j] - lo[j]) + 0.05;
                    sampling::uniform(&mut rng, lo[j] - pad, hi[j] + pad)
                })
                .collect();
            let margin = planar_margin(body, &x, ANGLE_GRID)?;
            if margin.abs() <= band {
                banded += 1;
                continue;
            }
            let expect = if margin > 0.0 {
                Status::Member
            } else {
                Status::NotMember
            };
            if margin > 0.0 {
                inside += 1;
            } else {
                outside += 1;
            }
            let verdict =
                model.essential_membership(&HermTuple::from_point(&x)?, &opts(&mut rng))?;
            disagreements += (verdict.status != expect) as usize;
        }
    }

    let perturbations = cfg.count(10, 2);
    let (mut q2_checked, mut q2_rejected) = (0, 0);
    for model in &models {
        let host = model.with_level(1);
        for _ in 0..perturbations {
            let scale = sampling::uniform(&mut rng, 0.5, 4.0);
            let k = sampling::hermitian_tuple(&mut rng, 2, model.head_dim())
                .map(|x| Ok(x.scale(scale)))?;
            let perturbed = host.with_head_perturbation(&k)?.materialize()?;
            let phi = sampling::ucp_map(&mut rng, model.body_dim(), 2, 2)?;
            let b = phi.apply_tuple(model.body())?;
            let verdict = membership(&b, &perturbed, &opts(&mut rng))?;
            q2_checked += 1;
            q2_rejected += (verdict.status != Status::Member) as usize;
        }
    }
    Ok(CriterionResult::new(
        2,
        "block-repetition model identity",
        disagreements == 0 && q2_rejected == 0,
        format!(
            "{} models; q=1: {inside} inside, {outside} outside, {banded} in band, {disagreements} disagreements; \
             q=2: {q2_checked} certified probes under head perturbations, {q2_rejected} not accepted",
            models.len()
        ),
    ))
}

/// Operator convex combinations of members stay members.
pub fn cstar_convexity(cfg: &SuiteConfig) -> Result<CriterionResult> {
    let mut rng = cfg.rng(3);
    let samples = cfg.count(500, 20);
    let hosts = 10;
    let bodies: Vec<HermTuple> = (0..hosts)
        .map(|_| sampling::hermitian_tuple(&mut rng, 2, 3))
        .collect();
    let (mut members, mut refuted, mut inconclusive) = (0, 0, 0);
    for i in 0..samples {
        let body = &bodies[i % hosts];
        let count = 2 + i % 3;
        let tuples = (0..count)
            .map(|_| sampling::ucp_map(&mut rng, 3, 2, 1 + i % 2)?.apply_tuple(body))
            .collect::<Result<Vec<_>>>()?;
        let weights = sampling::complete_weights(&mut rng, 2, count);
        let c = cstar_combine(&tuples, &weights)?;
        let mut o = opts(&mut rng);
        o.member_tol = 1e-6;
        match membership(&c, body, &o)?.status {
            Status::Member => members += 1,
            Status::NotMember => refuted += 1,
            Status::Inconclusive => inconclusive += 1,
        }
    }
    Ok(CriterionResult::new(
        3,
        "C*-convexity",
        refuted == 0,
        format!("{samples} combinations: {members} member, {inconclusive} inconclusive, {refuted} refuted"),
    ))
}

/// Largest `r` (by bisection) such that every corner of the cube of
/// half-width `r` around `c` is a certified member.
pub fn probe_radius(body: &HermTuple, c: &[f64], rng: &mut SeededRng) -> Result<f64> {
    let m = c.len();
    let corners_member = |r: f64, rng: &mut SeededRng| -> Result<bool> {
        for mask in 0..(1usize << m) {
            let x: Vec<f64> = (0..m)
                .map(|j| c[j] + if mask >> j & 1 == 1 { r } else { -r })
                .collect();
            if membership(&HermTuple::from_point(&x)?, body, &opts(rng))?.status != Status::Member {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let mut hi = (0..m)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            let up = support_value(body, &e)? - c[j];
            e[j] = -1.0;
            let down = support_value(body, &e)? + c[j];
            Ok(up.min(down))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let mut lo = 0.0;
    if hi <= 0.0 {
        return Ok(0.0);
    }
    if corners_member(hi, rng)? {
        return Ok(hi);
    }
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if corners_member(mid, rng)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Linear dependence of `{I, M_j}` against the shape of the essential range.
pub fn interior_dichotomy(cfg: &SuiteConfig) -> Result<CriterionResult> {
    let mut rng = cfg.rng(4);
    let each = cfg.count(10, 2);
    let mut failures = Vec::new();
    let mut worst_relation = 0.0f64;
    let mut smallest_radius = f64::INFINITY;
    let mut dep_members = 0;

    for k in 0..each {
        let base = sampling::hermitian(&mut rng, 3);
        let coeffs = [(sampling::gaussian(&mut rng), sampling::gaussian(&mut rng))];
        let body = dependent_body(&base, &coeffs)?;
        let model = BlockRepetitionModel::new(Some(random_head(&mut rng, 2, 1)), body.clone(), 2)?;
        let t = model.interior_test()?;
        let Some(a) = t.witness.filter(|_| !t.independent) else {
            failures.push(format!("dependent model {k} reported independent"));
            continue;
        };
        for i in 0..cfg.count(10, 4) {
            let q = 1 + i % 2;
            let b = if i % 3 == 2 {
                sampling::hermitian_tuple(&mut rng, 2, q)
            } else {
                sampling::ucp_map(&mut rng, 3, q, 2)?.apply_tuple(&body)?
            };
            if model.essential_membership(&b, &opts(&mut rng))?.status == Status::Member {
                dep_members += 1;
                let mut rel = crate::herm::identity(q).scale(a[0]);
                for (aj, bj) in a[1..].iter().zip(b.iter()) {
                    rel += bj.as_mat().scale(*aj);
                }
                let r = spectral_norm(&rel);
                worst_relation = worst_relation.max(r);
                if r > 1e-7 {
                    failures.push(format!(
                        "dependent model {k}: member violates relation by {r:.3e}"
                    ));
                }
            }
        }
    }

    for k in 0..each {
        let body = sampling::hermitian_tuple(&mut rng, 2, 3);
        let model = BlockRepetitionModel::new(Some(random_head(&mut rng, 2, 2)), body.clone(), 2)?;
        if !model.interior_test()?.independent {
            failures.push(format!("independent model {k} reported dependent"));
            continue;
        }
        let c: Vec<f64> = body.iter().map(|mj| mj.as_mat().trace().re / 3.0).collect();
        let r = probe_radius(&body, &c, &mut rng)?;
        smallest_radius = smallest_radius.min(r);
        if r <= 0.0 {
            failures.push(format!("independent model {k}: no probe ball"));
            continue;
        }
        let safe = 0.9 * r;
        let m = body.len() as f64;
        for _ in 0..cfg.count(6, 2) {
            let b = HermTuple::new(
                c.iter()
                    .map(|&cj| {
                        let h = sampling::hermitian(&mut rng, 2);
                        let n = spectral_norm(h.as_mat());
                        let s = sampling::uniform(&mut rng, 0.5, 1.0) * safe / m / n;
                        HermMatrix::scalar(cj)
                            .direct_sum(&HermMatrix::scalar(cj))
                            .add(&h.scale(s))
                    })
                    .collect::<Result<_>>()?,
            )?;
            let st = model.essential_membership(&b, &opts(&mut rng))?.status;
            if st != Status::Member {
                failures.push(format!("independent model {k}: ball probe {st}"));
            }
        }
    }
    Ok(CriterionResult::new(
        4,
        "interior dichotomy",
        failures.is_empty(),
        format!(
            "{each}+{each} models; {dep_members} dependent-model members, worst relation {worst_relation:.3e}; \
             smallest probe radius {smallest_radius:.3e}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    ))
}

/// Barycentric POVMs, Naimark dilations and the vertex norm bound.
pub fn simplex_dilation(cfg: &SuiteConfig) -> Result<CriterionResult> {
    let mut rng = cfg.rng(5);
    let tuples = cfg.count(100, 10);
    let pencils = cfg.count(200, 20);
    let dim = 5;
    let mut failures = 0;
    let (mut worst_recon, mut worst_excess, mut worst_eq) = (0.0f64, f64::NEG_INFINITY, 0.0f64);
    for _ in 0..tuples {
        let s = random_simplex(&mut rng, 2);
        let weights = sampling::complete_weights(&mut rng, dim, 3);
        let effects: Vec<CMat> = weights.iter().map(|l| l.adjoint() * l).collect();
        let t = HermTuple::new(
            (0..2)
                .map(|j| {
                    let mut acc = CMat::zeros(dim, dim);
                    for (v, e) in s.vertices().iter().zip(&effects) {
                        acc += e.scale(v[j]);
                    }
                    HermMatrix::new(acc)
                })
                .collect::<Result<_>>()?,
        )?;
        let Ok(povm) = barycentric_povm(&t, &s) else {
            failures += 1;
            continue;
        };
        let x = naimark_dilate(&povm)?;
        let recon = dilation_compression(&x, &s)?.max_distance(&t)?;
        worst_recon = worst_recon.max(recon);
        failures += (recon > 1e-8) as usize;
        for _ in 0..pencils {
            let r = sampling::norm_test_tuple(&mut rng, dim, 2);
            let nb = simplex_norm_bound(&r, &t, &s)?;
            worst_excess = worst_excess.max(nb.lhs - nb.bound);
            failures += (!nb.holds) as usize;
        }
        let d = s.vertex_tuple();
        let r = sampling::norm_test_tuple(&mut rng, 3, 2);
        let nb = simplex_norm_bound(&r, &d, &s)?;
        let eq = (nb.lhs - nb.bound).abs();
        worst_eq = worst_eq.max(eq);
        failures += (eq > 1e-10) as usize;
    }
    Ok(CriterionResult::new(
        5,
        "simplex dilation and norm bound",
        failures == 0,
        format!(
            "{tuples} tuples: worst reconstruction {worst_recon:.3e}, worst bound excess {worst_excess:.3e}, \
             worst equality gap {worst_eq:.3e}, {failures} failures"
        ),
    ))
}

/// Block diagonal compressions for three targets at p = 1 and p = 2.
pub fn block_compression(cfg: &SuiteConfig) -> Result<CriterionResult> {
    let mut rng = cfg.rng(6);
    let mut lines = Vec::new();
    let mut passed = true;
    for p in [1usize, 2] {
        let (model, targets) = if p == 1 {
            let s = random_simplex(&mut rng, 2);
            let body = simplex_body(&s, &[], None)?;
            let model = BlockRepetitionModel::new(Some(random_head(&mut rng, 2, 2)), body, 3)?;
            let targets = s
                .vertices()
                .iter()
                .map(|v| HermTuple::from_point(v))
                .collect::<Result<Vec<_>>>()?;
            (model, targets)
        } else {
            let body = sampling::hermitian_tuple(&mut rng, 2, 3);
            let targets = (0..3)
                .map(|_| sampling::ucp_map(&mut rng, 3, 2, 2)?.apply_tuple(&body))
                .collect::<Result<Vec<_>>>()?;
            let model = BlockRepetitionModel::new(Some(random_head(&mut rng, 2, 1)), body, 3)?;
            (model, targets)
        };
        let out = block_compress_auto(&model, &targets, 1e-6, &opts(&mut rng))?;
        let ok = out.max_offdiag <= 1e-9 && out.max_deviation <= 1e-6 && out.z.defect() <= 1e-9;
        passed &= ok;
        lines.push(format!(
            "p={p}: level {}, off-diagonal {:.3e}, deviation {:.3e}",
            out.level, out.max_offdiag, out.max_deviation
        ));
    }
    Ok(CriterionResult::new(
        6,
        "block compression",
        passed,
        lines.join("; "),
    ))
}

fn pipeline_models(
    rng: &mut SeededRng,
    count: usize,
) -> Result<Vec<(BlockRepetitionModel, Option<Simplex>)>> {
    (0..count)
        .map(|k| {
            let h = 1 + k % 3;
            if k % 5 < 3 {
                let s = random_simplex(rng, 2);
                let interior = if k % 2 == 0 {
                    vec![s.centroid()]
                } else {
                    vec![]
                };
                let u = sampling::unitary(rng, 3 + interior.len());
                let body = simplex_body(&s, &interior, Some(&u))?;
                Ok((
                    BlockRepetitionModel::new(Some(random_head(rng, 2, h)), body, 1)?,
                    Some(s),
                ))
            } else {
                let body = sampling::hermitian_tuple(rng, 2, 3);
                Ok((
                    BlockRepetitionModel::new(Some(random_head(rng, 2, h)), body, 1)?,
                    None,
                ))
            }
        })
        .collect()
}

/// Essential-range preservation under the constructed perturbation.
pub fn preservation_pipeline(cfg: &SuiteConfig) -> Result<CriterionResult> {
    let mut rng = cfg.rng(7);
    let models = pipeline_models(&mut rng, cfg.count(10, 2))?;
    let mut failures = Vec::new();
    let (mut simplex_probes, mut lambda_probes) = (0, 0);
    let mut worst_norm_gap = 0.0f64;

    for (k, (model, simplex)) in models.iter().enumerate() {
        let pert = model.preserving_perturbation()?;
        let a_plus_k = pert.perturbed_model()?.materialize()?;
        for _ in 0..cfg.count(20, 5) {
            let r = sampling::norm_test_tuple(&mut rng, 2, 2);
            let gap = (pencil_norm(&r, &a_plus_k)? - model.essential_pencil_norm(&r)?).abs();
            worst_norm_gap = worst_norm_gap.max(gap);
        }
        if let Some(s) = simplex {
            for q in 1..=3 {
                let o = SimplexCheckOptions {
                    membership: opts(&mut rng),
                    seed: rand::Rng::random(&mut rng),
                    ..Default::default()
                };
                let rep = simplex_preservation_check(model, s, q, cfg.count(3, 1), &o)?;
                simplex_probes += rep.probes.len();
                if !rep.passed {
                    failures.push(format!(
                        "model {k} simplex q={q}: {}",
                        rep.precondition_failure
                            .unwrap_or_else(|| "probe failed".into())
                    ));
                }
            }
        }
        let body = model.body();
        let mut probes = (0..cfg.count(3, 1))
            .map(|_| sampling::ucp_map(&mut rng, body.dim(), 2, 2)?.apply_tuple(body))
            .collect::<Result<Vec<_>>>()?;
        for _ in 0..cfg.count(2, 1) {
            // First coordinate beyond the spectrum of M_1.
            let top = body.get(0).max_eigenvalue()?;
            let h = sampling::hermitian_in_ball(&mut rng, 2, 0.25);
            let b0 = h.add(&HermMatrix::identity(2).scale(top + 0.5))?;
            probes.push(HermTuple::new(vec![
                b0,
                sampling::hermitian_in_ball(&mut rng, 2, 0.25),
            ])?);
        }
        let lo = LambdaCheckOptions {
            membership: opts(&mut rng),
            search: LambdaSearchOptions {
                seed: rand::Rng::random(&mut rng),
                budget: cfg.count(6_000, 1_500),
                ..Default::default()
            },
        };
        let rep = lambda_ess_check(model, 2, 2, &probes, &lo)?;
        lambda_probes += rep.probes.len();
        if !rep.passed {
            let bad: Vec<String> = rep
                .probes
                .iter()
                .filter(|p| !p.passed)
                .map(|p| format!("{}:{}", p.index, p.essential))
                .collect();
            failures.push(format!("model {k} lambda probes {}", bad.join(",")));
        }
    }
    if worst_norm_gap > 1e-10 {
        failures.push(format!(
            "perturbed pencil norm differs by {worst_norm_gap:.3e}"
        ));
    }

    let regression = head_outlier_regression(&mut rng)?;
    if !regression {
        failures.push("head-outlier regression".into());
    }
    Ok(CriterionResult::new(
        7,
        "perturbation pipeline",
        failures.is_empty(),
        format!(
            "{} models, {simplex_probes} simplex probes, {lambda_probes} lambda probes, \
             worst norm gap {worst_norm_gap:.3e}, head-outlier regression {}{}",
            models.len(),
            if regression {
                "reproduced"
            } else {
                "NOT reproduced"
            },
            if failures.is_empty() {
                String::new()
            } else {
                format!("; {}", failures.join("; "))
            }
        ),
    ))
}

/// Head `(5)`, body `diag(1, -1)`: the outlier is a member of the truncated
/// range, not of the essential range, and not of the perturbed range.
pub fn head_outlier_regression(rng: &mut SeededRng) -> Result<bool> {
    let model = BlockRepetitionModel::new(
        Some(HermTuple::from_point(&[5.0])?),
        HermTuple::new(vec![HermMatrix::from_real_diag(&[1.0, -1.0])?])?,
        3,
    )?;
    let b = HermTuple::from_point(&[5.0])?;
    let before = membership(&b, &model.materialize()?, &opts(rng))?.status;
    let essential = model.essential_membership(&b, &opts(rng))?.status;
    let after_model = model.preserving_perturbation()?.perturbed_model()?;
    let after = membership(&b, &after_model.materialize()?, &opts(rng))?.status;
    Ok(before == Status::Member && essential == Status::NotMember && after == Status::NotMember)
}

/// Boundary polylines of `W(M)` for the m = 2 models of criterion 2.
pub fn model_polylines(cfg: &SuiteConfig) -> Result<Vec<PolylineEntry>> {
    c2_models(cfg)?
        .iter()
        .enumerate()
        .map(|(model, m)| {
            let Polyline { points } = boundary_polyline(m.body(), ANGLE_GRID)?;
            Ok(PolylineEntry {
                model,
                body_dim: m.body_dim(),
                points,
            })
        })
        .collect()
}
