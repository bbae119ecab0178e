//! Support function of the joint numerical range (q = 1).
//!
//! `W(M)` is compact and convex with support function
//! `h(u) = λ_max(Σ u_j M_j)`. A point `x` lies in `W(M)` iff
//! `⟨u, x⟩ <= h(u)` for all directions `u`; sampling directions gives an
//! outer approximation and maximizing eigenvectors give boundary points.

use serde::Serialize;

use crate::error::Result;
use crate::herm::{check_len, CMat, HermTuple};
use crate::sampling;

pub const ANGLE_GRID: usize = 720;

pub fn support_value(m: &HermTuple, u: &[f64]) -> Result<f64> {
    check_len(m.len(), u.len())?;
    direction_pencil(m, u).max_eigenvalue()
}

fn direction_pencil(m: &HermTuple, u: &[f64]) -> crate::herm::HermMatrix {
    let mut acc = CMat::zeros(m.dim(), m.dim());
    for (mj, &uj) in m.iter().zip(u) {
        acc += mj.as_mat().scale(uj);
    }
    crate::herm::HermMatrix::new(acc).expect("finite combination")
}

/// Unit directions: an angle grid for `m = 2`, `(±1)` for `m = 1`, seeded
/// Gaussian directions otherwise.
pub fn directions(m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match m {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut rng = sampling::rng(seed);
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..m).map(|_| sampling::gaussian(&mut rng)).collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.into_iter().map(|x| x / n).collect()
                })
                .collect()
        }
    }
}

/// `min_u (h(u) - ⟨u, x⟩)` over the given directions; negative means `x` is
/// separated from `W(M)`.
pub fn support_margin(m: &HermTuple, x: &[f64], dirs: &[Vec<f64>]) -> Result<f64> {
    check_len(m.len(), x.len())?;
    let mut worst = f64::INFINITY;
    for u in dirs {
        let h = support_value(m, u)?;
        let ux: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
        worst = worst.min(h - ux);
    }
    Ok(worst)
}

/// Margin for m = 2: the angle grid, then golden-section refinement of the
/// three smallest grid values within one grid step. Flat boundary pieces
/// whose normals fall between grid angles are resolved this way.
pub fn planar_margin(m: &HermTuple, x: &[f64], grid: usize) -> Result<f64> {
    check_len(2, m.len())?;
    check_len(2, x.len())?;
    let g = |t: f64| -> Result<f64> {
        let u = [t.cos(), t.sin()];
        Ok(support_value(m, &u)? - u[0] * x[0] - u[1] * x[1])
    };
    let step = 2.0 * std::f64::consts::PI / grid as f64;
    let mut values: Vec<(f64, f64)> = (0..grid)
        .map(|k| {
            let t = step * k as f64;
            g(t).map(|v| (v, t))
        })
        .collect::<Result<_>>()?;
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = values[0].0;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for &(_, t0) in values.iter().take(3) {
        let (mut a, mut b) = (t0 - step, t0 + step);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let (mut gc, mut gd) = (g(c)?, g(d)?);
        for _ in 0..60 {
            if gc < gd {
                b = d;
                d = c;
                gd = gc;
                c = b - ratio * (b - a);
                gc = g(c)?;
            } else {
                a = c;
                c = d;
                gc = gd;
                d = a + ratio * (b - a);
                gd = g(d)?;
            }
        }
        best = best.min(gc).min(gd);
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
}

/// Boundary of `W(M_1, M_2)` traced by maximizing eigenvectors over the
/// angle grid.
pub fn boundary_polyline(m: &HermTuple, samples: usize) -> Result<Polyline> {
    check_len(2, m.len())?;
    let mut points = Vec::with_capacity(samples + 1);
    for u in directions(2, samples, 0) {
        let e = direction_pencil(m, &u).eig()?;
        let v = e.vectors.column(e.values.len() - 1).into_owned();
        let coord = |mj: &crate::herm::HermMatrix| (v.adjoint() * mj.as_mat() * &v)[(0, 0)].re;
        points.push([coord(m.get(0)), coord(m.get(1))]);
    }
    if let Some(first) = points.first().copied() {
        points.push(first);
    }
    Ok(Polyline { points })
}
