//! Bures–Wasserstein geometry on PSD matrices.
//!
//! For PSD `Q`, `S` the squared distance is
//! `d²(Q, S) = tr Q + tr S − 2 tr (S^{1/2} Q S^{1/2})^{1/2}`, and the optimal
//! push-forward from `Q` to `S` is `T = S^{1/2} (S^{1/2} Q S^{1/2})^{-1/2} S^{1/2}`
//! (pseudo-inverse in the middle), which satisfies `T Q T = S`.
//!
//! The map differential `dT` is obtained by differentiating `T Q T = S` in `Q`:
//! `dT·(Q T) + (T Q)·dT = −T X T`. Substituting `dT = T^{1/2} W T^{1/2}` turns
//! this into the symmetric Sylvester equation `W M + M W = −T^{1/2} X T^{1/2}`
//! with `M = T^{1/2} Q T^{1/2}` (similar to `T Q`), solved entrywise in the
//! eigenbasis of `M`.

use nalgebra::DMatrix;

use crate::error::{BwError, Result};
use crate::linalg::{self, SymEigen, DEFAULT_RANK_TOL, EPS_SYM};
use crate::matrix::{Definiteness, SymMatrix};
use crate::operator::SymOperator;

/// Squared distance on raw symmetric matrices; PSD-ness is not checked.
pub fn bw_distance_sq_raw(q: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    let s_half = linalg::sqrt_psd_raw(s);
    let inner = linalg::symmetrized(&s_half * q * &s_half);
    (q.trace() + s.trace() - 2.0 * linalg::trace_sqrt_psd(&inner)).max(0.0)
}

/// Bures–Wasserstein distance between two PSD matrices.
pub fn bw_distance(q: &SymMatrix, s: &SymMatrix) -> Result<f64> {
    q.check_same_dim(s)?;
    q.require_psd("bw_distance first argument")?;
    s.require_psd("bw_distance second argument")?;
    Ok(bw_distance_sq_raw(q.matrix(), s.matrix()).sqrt())
}

/// Optimal push-forward on raw matrices: `S^{1/2} pinv_sqrt(S^{1/2} Q S^{1/2}) S^{1/2}`.
pub fn ot_map_raw(q: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    let s_half = linalg::sqrt_psd_raw(s);
    let inner = linalg::symmetrized(&s_half * q * &s_half);
    let mid = linalg::pinv_sqrt_raw(&inner, DEFAULT_RANK_TOL);
    linalg::symmetrized(&s_half * mid * &s_half)
}

/// Optimal push-forward `T_Q^S` from a PD matrix `Q` to a PSD matrix `S`.
pub fn ot_map(q: &SymMatrix, s: &SymMatrix) -> Result<SymMatrix> {
    q.check_same_dim(s)?;
    q.require_pd("ot_map source")?;
    s.require_psd("ot_map target")?;
    let t = ot_map_raw(q.matrix(), s.matrix());
    let class = if s.is_pd() {
        Definiteness::PositiveDefinite
    } else {
        Definiteness::PositiveSemiDefinite
    };
    Ok(SymMatrix::from_parts(t, class))
}

/// Precomputed factors of the map differential at `(Q, S)`: `dT(X) = −G·[(GᵀXG) ⊘ (μ_i + μ_j)]·Gᵀ`.
pub(crate) struct DifferentialFactors {
    g: DMatrix<f64>,
    inv_sums: DMatrix<f64>,
}

impl DifferentialFactors {
    pub(crate) fn new(q: &DMatrix<f64>, s: &DMatrix<f64>) -> Self {
        let t = ot_map_raw(q, s);
        let t_half = linalg::sqrt_psd_raw(&t);
        let m = linalg::symmetrized(&t_half * q * &t_half);
        let eig = SymEigen::new(&m);
        let d = q.nrows();
        let inv_sums = DMatrix::from_fn(d, d, |i, j| 1.0 / (eig.values[i] + eig.values[j]));
        DifferentialFactors {
            g: t_half * eig.vectors,
            inv_sums,
        }
    }

    pub(crate) fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let inner = (self.g.transpose() * x * &self.g).component_mul(&self.inv_sums);
        linalg::symmetrized(-(&self.g * inner * self.g.transpose()))
    }

    pub(crate) fn operator(&self) -> SymOperator {
        SymOperator::from_linear_map(self.g.nrows(), |x| self.apply(x))
    }
}

/// Fréchet differential `X ↦ dT_Q^S(X)` of the push-forward with respect to its
/// source. Self-adjoint and negative definite for PD `Q`, `S`.
pub fn ot_map_differential(q: &SymMatrix, s: &SymMatrix) -> Result<SymOperator> {
    q.check_same_dim(s)?;
    q.require_pd("ot_map_differential source")?;
    if !s.is_pd() {
        return Err(BwError::Domain(
            "ot_map_differential requires a positive definite target".into(),
        ));
    }
    Ok(DifferentialFactors::new(q.matrix(), s.matrix()).operator())
}

/// The operator `𝔸_Q = (−½ dT_Q^Q)^{1/2}`; in the eigenbasis of `Q` it scales
/// entry `(i, j)` by `1/√(2(q_i + q_j))`.
pub fn a_operator(q: &SymMatrix) -> Result<SymOperator> {
    q.require_pd("a_operator base point")?;
    let eig = q.eigen();
    let d = q.dim();
    let v = eig.vectors;
    let scale = DMatrix::from_fn(d, d, |i, j| {
        1.0 / (2.0 * (eig.values[i] + eig.values[j])).sqrt()
    });
    Ok(SymOperator::from_linear_map(d, |x| {
        let inner = (v.transpose() * x * &v).component_mul(&scale);
        &v * inner * v.transpose()
    }))
}

/// Spectral functionals of a PSD operator Ψ with eigenvalues `λ_1 ≥ λ_2 ≥ …`:
/// `Λ_r² = Σ_{k≥r} λ_k²`, `κ = (Λ_1 Λ_2)^{-1/2}` and `γ = κ·tr Ψ`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SpectrumDiag {
    /// Non-increasing.
    pub eigenvalues: Vec<f64>,
    pub lambda1_sq: f64,
    pub lambda2_sq: f64,
    pub varkappa: f64,
    pub gamma: f64,
    pub trace: f64,
}

pub fn spectrum_diag(psi: &SymOperator) -> Result<SpectrumDiag> {
    let eig = psi.eigen();
    let scale = eig.spectral_radius();
    if eig.min() < -EPS_SYM * scale {
        return Err(BwError::Domain(
            "spectrum_diag requires a positive semi-definite operator".into(),
        ));
    }
    SpectrumDiag::from_eigenvalues(&eig.values)
}

impl SpectrumDiag {
    /// Builds the diagnostics from the eigenvalues of a PSD operator (any order).
    /// Values below `EPS_SYM` relative to the largest are treated as zero.
    pub fn from_eigenvalues(values: &[f64]) -> Result<SpectrumDiag> {
        let scale = values.iter().fold(0.0_f64, |a, l| a.max(l.abs()));
        let mut eigenvalues: Vec<f64> = values
            .iter()
            .map(|&l| if l < EPS_SYM * scale { 0.0 } else { l })
            .collect();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let lambda2_sq: f64 = eigenvalues.iter().skip(1).map(|l| l * l).sum();
        let lambda1_sq = lambda2_sq + eigenvalues.first().map_or(0.0, |l| l * l);
        if lambda1_sq == 0.0 || lambda2_sq.sqrt() <= EPS_SYM * lambda1_sq.sqrt() {
            return Err(BwError::Rank(
                "operator has rank at most one, varkappa undefined".into(),
            ));
        }
        let varkappa = (lambda1_sq.sqrt() * lambda2_sq.sqrt()).powf(-0.5);
        let trace = eigenvalues.iter().sum::<f64>();
        Ok(SpectrumDiag {
            eigenvalues,
            lambda1_sq,
            lambda2_sq,
            varkappa,
            gamma: varkappa * trace,
            trace,
        })
    }
}

/// Symmetric objects with a real spectrum.
pub trait Spectral {
    fn spectrum(&self) -> SymEigen;
}

impl Spectral for SymMatrix {
    fn spectrum(&self) -> SymEigen {
        self.eigen()
    }
}

impl Spectral for SymOperator {
    fn spectrum(&self) -> SymEigen {
        self.eigen()
    }
}

/// Condition number `‖X‖·‖X^{-1}‖ = max|λ| / min|λ|` of a symmetric invertible input.
pub fn condition_number<T: Spectral + ?Sized>(x: &T) -> Result<f64> {
    let eig = x.spectrum();
    let hi = eig.spectral_radius();
    let lo = eig
        .values
        .iter()
        .map(|l| l.abs())
        .fold(f64::INFINITY, f64::min);
    if hi == 0.0 || lo <= EPS_SYM * hi {
        return Err(BwError::Domain(
            "condition number of a singular input".into(),
        ));
    }
    Ok(hi / lo)
}
