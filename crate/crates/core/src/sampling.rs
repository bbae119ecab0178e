//! Seeded random generators for matrices, isometries and UCP maps.
//!
//! All randomness in the crate flows through [`rng`], so every routine that
//! takes a seed is reproducible bit for bit.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::choi::ChoiMatrix;
use crate::error::Result;
use crate::herm::{cplx, orthonormalize, CMat, HermMatrix, HermTuple, Isometry, NormTestTuple};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream for sub-task `index` of a seeded job.
pub fn substream(seed: u64, index: u64) -> SeededRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index.wrapping_add(1));
    r
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Matrix with i.i.d. standard complex Gaussian entries (real and imaginary
/// parts each unit normal).
pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cplx(gaussian(rng), gaussian(rng)))
}

pub fn real_gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cplx(gaussian(rng), 0.0))
}

/// Random Hermitian matrix `(G + G*)/2` with Gaussian `G`.
pub fn hermitian(rng: &mut impl Rng, n: usize) -> HermMatrix {
    HermMatrix::new(gaussian_matrix(rng, n, n)).expect("square finite matrix")
}

pub fn hermitian_tuple(rng: &mut impl Rng, m: usize, n: usize) -> HermTuple {
    HermTuple::new((0..m).map(|_| hermitian(rng, n)).collect()).expect("equal dimensions")
}

/// Hermitian matrix with spectral norm exactly `radius` (for nonzero draws).
pub fn hermitian_in_ball(rng: &mut impl Rng, n: usize, radius: f64) -> HermMatrix {
    let h = hermitian(rng, n);
    let nrm = crate::herm::spectral_norm(h.as_mat());
    if nrm == 0.0 {
        return HermMatrix::zeros(n);
    }
    h.scale(radius / nrm)
}

/// Isometry from an orthonormalized Gaussian matrix.
pub fn isometry(rng: &mut impl Rng, rows: usize, cols: usize) -> Isometry {
    let g = gaussian_matrix(rng, rows, cols);
    Isometry::new(orthonormalize(&g)).expect("QR yields orthonormal columns")
}

pub fn unitary(rng: &mut impl Rng, n: usize) -> CMat {
    isometry(rng, n, n).into_mat()
}

pub fn norm_test_tuple(rng: &mut impl Rng, q: usize, m: usize) -> NormTestTuple {
    NormTestTuple::new((0..=m).map(|_| gaussian_matrix(rng, q, q)).collect()).expect("equal shapes")
}

/// Random UCP map `M_d -> M_q` with `kraus_count` Kraus operators,
/// normalized so that `Σ K_i* K_i = I_q`.
pub fn ucp_map(rng: &mut impl Rng, d: usize, q: usize, kraus_count: usize) -> Result<ChoiMatrix> {
    let raw: Vec<CMat> = (0..kraus_count.max(1))
        .map(|_| gaussian_matrix(rng, d, q))
        .collect();
    ChoiMatrix::from_unnormalized_kraus(&raw)
}

/// Weights `L_1..L_N` (each `q x q`) with `Σ L_j* L_j = I_q`.
pub fn complete_weights(rng: &mut impl Rng, q: usize, count: usize) -> Vec<CMat> {
    let stacked = gaussian_matrix(rng, q * count, q);
    let v = orthonormalize(&stacked);
    (0..count).map(|j| v.rows(j * q, q).into_owned()).collect()
}

pub fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
