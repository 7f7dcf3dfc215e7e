//! Operator-level diagnostics around a base point `Q`: centred maps
//! `T_i = T_Q^{S_i} − I`, their covariance `Σ = (1/n) Σ T_i ⊗ T_i`, the gluing
//! operator `F = −(1/n) Σ m_i dT_Q^{S_i}`, the sandwich `Ξ = F^{-1} Σ F^{-1}`,
//! discrepancy scalars, and Monte-Carlo draws of the Gaussian limits `‖Z‖_F`
//! and `‖𝔸 Z‖_F` for `Z ~ N(0, Ξ)`.
//!
//! Data weights of the [`SampleSet`] are not used here; every item counts once.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::barycenter::SampleSet;
use crate::error::{BwError, Result};
use crate::geometry::{self, DifferentialFactors};
use crate::linalg::{self, SymEigen};
use crate::matrix::SymMatrix;
use crate::operator::SymOperator;
use crate::rng::{self, Purpose};

/// Draws per independent random stream in [`sample_gaussian_stat`].
pub const GAUSSIAN_CHUNK: usize = 4096;

fn check_base(q: &SymMatrix, data: &SampleSet) -> Result<()> {
    if q.dim() != data.dim() {
        return Err(BwError::shape(data.dim(), q.dim()));
    }
    q.require_pd("base point")
}

/// `T_Q^{S_i} − I` for every item.
pub fn centred_maps(q: &SymMatrix, data: &SampleSet) -> Result<Vec<SymMatrix>> {
    check_base(q, data)?;
    let d = q.dim();
    let id = DMatrix::<f64>::identity(d, d);
    Ok(data
        .matrices()
        .iter()
        .map(|s| SymMatrix::from_symmetric(geometry::ot_map_raw(q.matrix(), s.matrix()) - &id))
        .collect())
}

/// `Σ = (1/n) Σ_i vec(T_i) vec(T_i)ᵀ`.
pub fn sigma_op(q: &SymMatrix, data: &SampleSet) -> Result<SymOperator> {
    let maps = centred_maps(q, data)?;
    let m = linalg::sym_dim(q.dim());
    let mut acc = DMatrix::zeros(m, m);
    for t in &maps {
        let v = linalg::vec_sym(t.matrix());
        acc.ger(1.0, &v, &v, 1.0);
    }
    acc /= maps.len() as f64;
    Ok(SymOperator::from_symmetric(q.dim(), acc))
}

/// `F = −(1/n) Σ_i m_i dT_Q^{S_i}`, multipliers defaulting to one. Items with a
/// non-zero multiplier must be positive definite.
pub fn f_op(q: &SymMatrix, data: &SampleSet, multipliers: Option<&[f64]>) -> Result<SymOperator> {
    check_base(q, data)?;
    let n = data.len();
    let ones;
    let mult = match multipliers {
        Some(m) if m.len() != n => {
            return Err(BwError::shape(format!("{n} multipliers"), m.len()));
        }
        Some(m) => m,
        None => {
            ones = vec![1.0; n];
            &ones[..]
        }
    };
    let singular: Vec<usize> = data
        .matrices()
        .iter()
        .zip(mult)
        .enumerate()
        .filter(|(_, (s, &u))| u != 0.0 && !s.is_pd())
        .map(|(i, _)| i)
        .collect();
    if !singular.is_empty() {
        return Err(BwError::Domain(format!(
            "map differential needs positive definite targets; singular items {singular:?}"
        )));
    }
    let terms: Vec<(f64, DifferentialFactors)> = data
        .matrices()
        .iter()
        .zip(mult)
        .filter(|(_, &u)| u != 0.0)
        .map(|(s, &u)| (u, DifferentialFactors::new(q.matrix(), s.matrix())))
        .collect();
    let scale = -1.0 / n as f64;
    Ok(SymOperator::from_linear_map(q.dim(), |x| {
        let mut acc = DMatrix::zeros(x.nrows(), x.ncols());
        for (u, factors) in &terms {
            acc += factors.apply(x) * *u;
        }
        acc * scale
    }))
}

/// `Ξ = F^{-1} Σ F^{-1}`, symmetrized.
pub fn xi_op(sigma: &SymOperator, f: &SymOperator) -> Result<SymOperator> {
    let f_inv = f.inverse()?;
    sigma.sandwich(&f_inv)
}

/// Discrepancies between a reference pair `(Q_ref, F_ref)` and a candidate `(Q, F)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiscrepancyScalars {
    /// `‖Q_ref^{-1/2} Q Q_ref^{-1/2} − I‖`.
    pub q: f64,
    /// `‖F_ref^{-1/2} F F_ref^{-1/2} − Id‖`.
    pub f: f64,
    /// `2·√κ(F_ref)·(q + f)`.
    pub eta: f64,
}

pub fn discrepancy(
    q_ref: &SymMatrix,
    q: &SymMatrix,
    f_ref: &SymOperator,
    f: &SymOperator,
) -> Result<DiscrepancyScalars> {
    q_ref.check_same_dim(q)?;
    q_ref.require_pd("reference barycenter")?;
    q.require_pd("barycenter")?;
    let q_ref_inv_half = SymEigen::new(q_ref.matrix()).map(|l| 1.0 / l.sqrt());
    let mut rel_q = &q_ref_inv_half * q.matrix() * &q_ref_inv_half;
    rel_q -= DMatrix::identity(q.dim(), q.dim());
    let q_dev = SymEigen::new(&linalg::symmetrized(rel_q)).spectral_radius();

    let f_ref_inv_half = f_ref.inv_sqrt()?;
    let rel_f = f.sandwich(&f_ref_inv_half)?.sub(&SymOperator::identity(f.dim_base()))?;
    let f_dev = rel_f.norm();

    let kappa = geometry::condition_number(f_ref)?;
    Ok(DiscrepancyScalars {
        q: q_dev,
        f: f_dev,
        eta: 2.0 * kappa.sqrt() * (q_dev + f_dev),
    })
}

/// Operators evaluated at one base point.
#[derive(Clone, Debug)]
pub struct DiagnosticBundle {
    pub sigma: SymOperator,
    pub f: SymOperator,
    pub xi: SymOperator,
    pub a: SymOperator,
    pub base_point: SymMatrix,
}

impl DiagnosticBundle {
    /// Empirical operators `Σ̂`, `F̂`, `Ξ̂`, `𝔸` at `q`.
    pub fn at(q: &SymMatrix, data: &SampleSet) -> Result<Self> {
        let sigma = sigma_op(q, data)?;
        let f = f_op(q, data, None)?;
        let xi = xi_op(&sigma, &f)?;
        let a = geometry::a_operator(q)?;
        Ok(DiagnosticBundle {
            sigma,
            f,
            xi,
            a,
            base_point: q.clone(),
        })
    }

    /// `𝔸 Ξ 𝔸`, the covariance of `𝔸 Z`.
    pub fn a_xi_a(&self) -> Result<SymOperator> {
        self.xi.sandwich(&self.a)
    }
}

/// Draws `Z ~ N(0, Ξ)` through the PSD square root of `Ξ` and returns `‖Z‖_F`
/// (or `‖A Z‖_F` when `a` is given) per draw. Draw `k` comes from stream
/// `(seed, k / GAUSSIAN_CHUNK)`, so the output is independent of worker count.
pub fn sample_gaussian_stat(
    xi: &SymOperator,
    a: Option<&SymOperator>,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_draws == 0 {
        return Err(BwError::Config("n_draws must be at least 1".into()));
    }
    let root = xi.sqrt_psd()?;
    let factor = match a {
        Some(a) => {
            if a.dim_base() != xi.dim_base() {
                return Err(BwError::shape(xi.dim_base(), a.dim_base()));
            }
            a.matrix() * root.matrix()
        }
        None => root.matrix().clone(),
    };
    let m = factor.nrows();
    let n_chunks = n_draws.div_ceil(GAUSSIAN_CHUNK);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, Purpose::Gaussian, c as u64);
            let len = GAUSSIAN_CHUNK.min(n_draws - c * GAUSSIAN_CHUNK);
            (0..len)
                .map(|_| {
                    let g = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
                    (&factor * g).norm()
                })
                .collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// Raw Gaussian vectors `vec(Z)` (for covariance checks).
pub fn sample_gaussian_vectors(xi: &SymOperator, n_draws: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let root = xi.sqrt_psd()?;
    let m = root.dim();
    let mut out = Vec::with_capacity(n_draws);
    for c in 0..n_draws.div_ceil(GAUSSIAN_CHUNK) {
        let mut rng = rng::stream(seed, Purpose::Gaussian, c as u64);
        let len = GAUSSIAN_CHUNK.min(n_draws - c * GAUSSIAN_CHUNK);
        for _ in 0..len {
            let g = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            out.push(root.matrix() * g);
        }
    }
    Ok(out)
}
