//! Seeded random operators for randomized checks and test-model generation.

use crate::linalg::{c, dagger, diag_real, eigh, trace, CMatrix, C64};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type QrmRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> QrmRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut QrmRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn complex_normal(rng: &mut QrmRng) -> C64 {
    c(normal(rng), normal(rng))
}

/// Square matrix with i.i.d. complex Gaussian entries.
pub fn random_matrix(rng: &mut QrmRng, n: usize) -> CMatrix {
    Array2::from_shape_fn((n, n), |_| complex_normal(rng))
}

pub fn random_hermitian(rng: &mut QrmRng, n: usize) -> CMatrix {
    let g = random_matrix(rng, n);
    (&g + &dagger(&g)).mapv(|z| z * 0.5)
}

/// Full-rank density matrix `G G† / tr(G G†)`.
pub fn random_density(rng: &mut QrmRng, n: usize) -> CMatrix {
    let g = random_matrix(rng, n);
    let p = g.dot(&dagger(&g));
    let t = trace(&p);
    p.mapv(|z| z / t)
}

/// Haar-ish unitary from the eigenvectors of a random Hermitian matrix.
pub fn random_unitary(rng: &mut QrmRng, n: usize) -> CMatrix {
    let h = random_hermitian(rng, n);
    eigh(&h).expect("Hermitian eigensolve of a finite matrix").1
}

/// Probability vector with entries bounded away from zero.
pub fn random_probabilities(rng: &mut QrmRng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Commuting pair `(H, τ)` diagonal in a common random basis, with a
/// nondegenerate spectrum for `H`.
pub fn random_commuting_pair(rng: &mut QrmRng, n: usize) -> (CMatrix, CMatrix) {
    let u = random_unitary(rng, n);
    let e: Vec<f64> = (0..n).map(|k| k as f64 + rng.random_range(-0.3..0.3)).collect();
    let t = random_probabilities(rng, n);
    let h = u.dot(&diag_real(&e)).dot(&dagger(&u));
    let tau = u.dot(&diag_real(&t)).dot(&dagger(&u));
    (h, tau)
}

pub fn uniform(rng: &mut QrmRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn uniform_usize(rng: &mut QrmRng, lo: usize, hi_inclusive: usize) -> usize {
    rng.random_range(lo..=hi_inclusive)
}
