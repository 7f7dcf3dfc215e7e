#![allow(dead_code)]

use bwb_core::SymMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn orthogonal(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    gaussian(rng, d, d).qr().q()
}

/// `U diag(λ) Uᵀ` with eigenvalues drawn log-uniformly from `[lo, hi]`.
pub fn pd_with_spectrum(rng: &mut impl Rng, d: usize, lo: f64, hi: f64) -> SymMatrix {
    let u = orthogonal(rng, d);
    let lam: Vec<f64> = (0..d)
        .map(|_| (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp())
        .collect();
    from_eigen(&u, &lam)
}

pub fn from_eigen(u: &DMatrix<f64>, lam: &[f64]) -> SymMatrix {
    let d = lam.len();
    let m = u * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(lam)) * u.transpose();
    let m = (&m + m.transpose()) * 0.5;
    assert_eq!(m.nrows(), d);
    SymMatrix::new(m).unwrap()
}

pub fn random_pd(rng: &mut impl Rng, d: usize) -> SymMatrix {
    pd_with_spectrum(rng, d, 0.2, 5.0)
}

/// PSD matrix of rank `r < d`.
pub fn random_psd_rank(rng: &mut impl Rng, d: usize, r: usize) -> SymMatrix {
    let g = gaussian(rng, d, r);
    let m = &g * g.transpose();
    SymMatrix::new((&m + m.transpose()) * 0.5).unwrap()
}

pub fn random_sym(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let g = gaussian(rng, d, d);
    (&g + g.transpose()) * 0.5
}

/// Spectral norm through the SVD, a route separate from the crate's eigensolver.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// `Σ √λ_k(QS)` from the (real, non-negative) eigenvalues of the non-symmetric
/// product `QS`, obtained by a Schur decomposition.
pub fn trace_sqrt_of_product(q: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    let prod = q * s;
    prod.complex_eigenvalues().iter().map(|z| z.re.max(0.0).sqrt()).sum()
}

/// Squared distance via the eigenvalues of `QS`.
pub fn bw_sq_oracle(q: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    q.trace() + s.trace() - 2.0 * trace_sqrt_of_product(q, s)
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
