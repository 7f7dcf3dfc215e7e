//! Weighted Bures–Wasserstein barycenter by fixed-point iteration.
//!
//! With normalized weights `w̃_i = w_i / Σ w` the barycenter solves
//! `Q = Σ w̃_i (Q^{1/2} S_i Q^{1/2})^{1/2}`. The solver iterates
//! `Q ← Q^{-1/2} (Σ w̃_i (Q^{1/2} S_i Q^{1/2})^{1/2})² Q^{-1/2}`, which keeps
//! iterates PSD and decreases the weighted Fréchet functional at every step.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{BwError, Result};
use crate::geometry;
use crate::linalg::{self, SymEigen};
use crate::matrix::{Definiteness, SymMatrix};

/// An ordered sample of PSD matrices with non-negative weights.
#[derive(Clone, Debug)]
pub struct SampleSet {
    matrices: Arc<[SymMatrix]>,
    weights: Vec<f64>,
}

impl SampleSet {
    /// Unit weights.
    pub fn new(matrices: Vec<SymMatrix>) -> Result<Self> {
        let n = matrices.len();
        Self::with_weights(matrices, vec![1.0; n])
    }

    pub fn with_weights(matrices: Vec<SymMatrix>, weights: Vec<f64>) -> Result<Self> {
        let set = SampleSet::unchecked(matrices, weights)?;
        set.validate_weights()?;
        Ok(set)
    }

    /// Shape and PSD checks only; weight validity is checked by [`Self::validate_weights`].
    fn unchecked(matrices: Vec<SymMatrix>, weights: Vec<f64>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(BwError::shape("at least one matrix", 0));
        }
        if weights.len() != matrices.len() {
            return Err(BwError::shape(
                format!("{} weights", matrices.len()),
                weights.len(),
            ));
        }
        let d = matrices[0].dim();
        for (i, m) in matrices.iter().enumerate() {
            if m.dim() != d {
                return Err(BwError::shape(
                    format!("{d}x{d} matrix"),
                    format!("{0}x{0} at index {i}", m.dim()),
                ));
            }
            if !m.is_psd() {
                return Err(BwError::Domain(format!("matrix {i} is not PSD")));
            }
        }
        Ok(SampleSet {
            matrices: matrices.into(),
            weights,
        })
    }

    fn validate_weights(&self) -> Result<()> {
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(BwError::Weight(
                "weights must be finite and non-negative".into(),
            ));
        }
        if self.weight_sum() <= 0.0 {
            return Err(BwError::Weight("weights sum to zero".into()));
        }
        if !self.has_positive_definite_support() {
            return Err(BwError::Domain(
                "no positively weighted matrix is positive definite".into(),
            ));
        }
        Ok(())
    }

    /// Same matrices, new weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<SampleSet> {
        if weights.len() != self.len() {
            return Err(BwError::shape(format!("{} weights", self.len()), weights.len()));
        }
        let set = SampleSet {
            matrices: Arc::clone(&self.matrices),
            weights,
        };
        set.validate_weights()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn matrices(&self) -> &[SymMatrix] {
        &self.matrices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Normalized weights `w_i / Σ w`.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let total = self.weight_sum();
        self.weights.iter().map(|w| w / total).collect()
    }

    /// `(normalized weight, matrix)` for positively weighted items, in index order.
    pub(crate) fn active(&self) -> impl Iterator<Item = (f64, &DMatrix<f64>)> {
        let total = self.weight_sum();
        self.weights
            .iter()
            .zip(self.matrices.iter())
            .filter(|(w, _)| **w > 0.0)
            .map(move |(w, m)| (w / total, m.matrix()))
    }

    pub fn has_positive_definite_support(&self) -> bool {
        self.weights
            .iter()
            .zip(self.matrices.iter())
            .any(|(w, m)| *w > 0.0 && m.is_pd())
    }

    /// Weighted Euclidean mean `Σ w̃_i S_i`.
    pub fn euclidean_mean(&self) -> SymMatrix {
        let d = self.dim();
        let mut acc = DMatrix::zeros(d, d);
        for (w, s) in self.active() {
            acc += s * w;
        }
        SymMatrix::from_symmetric(linalg::symmetrized(acc))
    }
}

#[derive(Clone, Debug)]
pub enum Init {
    EuclideanMean,
    Provided(SymMatrix),
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Threshold on [`residual`] (Frobenius norm relative to `tr Q`).
    pub tol: f64,
    pub init: Init,
    /// Eigenvalues of iterates are floored at `eig_floor·tr Q` before inversion.
    pub eig_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 500,
            tol: 1e-10,
            init: Init::EuclideanMean,
            eig_floor: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(BwError::Config("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(BwError::Config("max_iter must be at least 1".into()));
        }
        if !(self.eig_floor >= 0.0) {
            return Err(BwError::Config("eig_floor must be non-negative".into()));
        }
        Ok(())
    }

    pub fn warm_started(&self, q0: SymMatrix) -> SolverConfig {
        SolverConfig {
            init: Init::Provided(q0),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct BarycenterResult {
    pub q: SymMatrix,
    /// Number of fixed-point map evaluations.
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// One evaluation of the fixed-point map at `Q`.
#[derive(Clone, Debug)]
pub struct FixedPointStep {
    /// `Σ w̃_i (Q^{1/2} S_i Q^{1/2})^{1/2}`.
    pub mean_root: DMatrix<f64>,
    /// `‖Q − mean_root‖_F / tr Q`.
    pub residual: f64,
    /// Weighted Fréchet functional `Σ w̃_i d²(Q, S_i)` at `Q`.
    pub objective: f64,
    /// The next iterate `Q^{-1/2} mean_root² Q^{-1/2}`.
    pub next: DMatrix<f64>,
}

/// Evaluates the fixed-point map at `q`; zero-weight items are skipped.
pub fn fixed_point_step(q: &DMatrix<f64>, data: &SampleSet, eig_floor: f64) -> FixedPointStep {
    let d = q.nrows();
    let tr_q = q.trace();
    let eig = SymEigen::new(q);
    let floor = eig_floor * tr_q;
    let q_half = eig.map(|l| l.max(0.0).sqrt());
    let q_inv_half = eig.map(|l| 1.0 / l.max(floor).sqrt());

    let mut mean_root = DMatrix::zeros(d, d);
    let mut mean_trace_s = 0.0;
    for (w, s) in data.active() {
        let inner = linalg::symmetrized(&q_half * s * &q_half);
        mean_root += linalg::sqrt_psd_raw(&inner) * w;
        mean_trace_s += w * s.trace();
    }
    linalg::symmetrize_mut(&mut mean_root);

    let residual = (q - &mean_root).norm() / tr_q;
    let objective = (tr_q + mean_trace_s - 2.0 * mean_root.trace()).max(0.0);
    let next = linalg::symmetrized(&q_inv_half * (&mean_root * &mean_root) * &q_inv_half);
    FixedPointStep {
        mean_root,
        residual,
        objective,
        next,
    }
}

/// Weighted barycenter of `data`.
pub fn barycenter(data: &SampleSet, cfg: &SolverConfig) -> Result<BarycenterResult> {
    cfg.validate()?;
    data.validate_weights()?;
    let mut q = match &cfg.init {
        Init::EuclideanMean => data.euclidean_mean().into_matrix(),
        Init::Provided(q0) => {
            if q0.dim() != data.dim() {
                return Err(BwError::shape(data.dim(), q0.dim()));
            }
            q0.require_pd("initial iterate")?;
            q0.matrix().clone()
        }
    };

    let mut residual = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let step = fixed_point_step(&q, data, cfg.eig_floor);
        residual = step.residual;
        if residual <= cfg.tol {
            return Ok(BarycenterResult {
                q: finish(q),
                iterations: it,
                residual,
                converged: true,
            });
        }
        if it < cfg.max_iter {
            q = step.next;
        }
    }
    Ok(BarycenterResult {
        q: finish(q),
        iterations: cfg.max_iter,
        residual,
        converged: false,
    })
}

fn finish(q: DMatrix<f64>) -> SymMatrix {
    let m = SymMatrix::from_symmetric(q);
    debug_assert!(m.definiteness() != Definiteness::Indefinite);
    m
}

/// Fixed-point residual `‖Q − Σ w̃_i (Q^{1/2} S_i Q^{1/2})^{1/2}‖_F / tr Q`.
pub fn residual(q: &SymMatrix, data: &SampleSet) -> Result<f64> {
    check_base(q, data)?;
    Ok(fixed_point_step(q.matrix(), data, 0.0).residual)
}

/// Weighted Fréchet functional `Σ w̃_i d²(Q, S_i)`.
pub fn objective(q: &SymMatrix, data: &SampleSet) -> Result<f64> {
    check_base(q, data)?;
    Ok(data
        .active()
        .map(|(w, s)| w * geometry::bw_distance_sq_raw(q.matrix(), s))
        .sum())
}

/// `‖Σ w̃_i T_Q^{S_i} − I‖_F`; vanishes exactly at the weighted barycenter.
pub fn mean_map_check(q: &SymMatrix, data: &SampleSet) -> Result<f64> {
    check_base(q, data)?;
    let d = q.dim();
    let mut acc = -DMatrix::<f64>::identity(d, d);
    for (w, s) in data.active() {
        acc += geometry::ot_map_raw(q.matrix(), s) * w;
    }
    Ok(acc.norm())
}

fn check_base(q: &SymMatrix, data: &SampleSet) -> Result<()> {
    if q.dim() != data.dim() {
        return Err(BwError::shape(data.dim(), q.dim()));
    }
    q.require_pd("base point")
}
