//! Monte-Carlo reference for the sampling law of `√n·ρ(Q_n, Q_*)`: a large
//! sample stands in for the population barycenter `Q_*`, then many independent
//! datasets of size `n` are fitted and compared with it.

use rayon::prelude::*;
use serde::Serialize;

use crate::barycenter::{barycenter, BarycenterResult, SampleSet, SolverConfig};
use crate::bootstrap::{EmpiricalCdf, StatKind};
use crate::error::{BwError, Result};
use crate::matrix::SymMatrix;
use crate::rng;
use crate::sbm::{self, SbmConfig};

/// A reproducible source of i.i.d. PSD matrices.
pub trait DataSource: Sync {
    /// `n` matrices; the whole sample is a function of `seed`.
    fn draw(&self, n: usize, seed: u64) -> Result<Vec<SymMatrix>>;
}

/// Inverse regularized Laplacians of block-model graphs.
#[derive(Clone, Debug)]
pub struct SbmSource {
    pub config: SbmConfig,
    pub r: f64,
}

impl DataSource for SbmSource {
    fn draw(&self, n: usize, seed: u64) -> Result<Vec<SymMatrix>> {
        let cfg = SbmConfig {
            seed,
            ..self.config.clone()
        };
        sbm::generate_dataset(&cfg, self.r, n, 0)
    }
}

/// Seed of the reference sample.
pub fn reference_seed(seed: u64) -> u64 {
    rng::child_seed(seed, 0)
}

/// Seed of repetition `rep` of the sampling experiment.
pub fn repetition_seed(seed: u64, rep: usize) -> u64 {
    rng::child_seed(seed, rep as u64 + 1)
}

/// Barycenter of `n_truth` fresh matrices, standing in for `Q_*`.
pub fn reference_barycenter(
    source: &dyn DataSource,
    n_truth: usize,
    solver: &SolverConfig,
    seed: u64,
) -> Result<BarycenterResult> {
    if n_truth == 0 {
        return Err(BwError::Config("n_truth must be at least 1".into()));
    }
    let data = SampleSet::new(source.draw(n_truth, reference_seed(seed))?)?;
    barycenter(&data, solver)
}

/// `√n·ρ(Q_n^{(k)}, q_star)` for `n_reps` independent datasets, in repetition order.
pub fn sampling_distribution(
    source: &dyn DataSource,
    q_star: &SymMatrix,
    n: usize,
    n_reps: usize,
    stat_kind: StatKind,
    solver: &SolverConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if n == 0 || n_reps == 0 {
        return Err(BwError::Config("n and n_reps must be at least 1".into()));
    }
    let scale = (n as f64).sqrt();
    (0..n_reps)
        .into_par_iter()
        .map(|k| {
            let data = SampleSet::new(source.draw(n, repetition_seed(seed, k))?)?;
            let q_n = barycenter(&data, solver)?.q;
            Ok(scale * stat_kind.distance(&q_n, q_star)?)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TruthReport {
    pub stat_kind: StatKind,
    pub n: usize,
    pub n_truth: usize,
    pub n_reps: usize,
    pub seed: u64,
    pub reference_iterations: usize,
    pub reference_residual: f64,
    pub reference_converged: bool,
    #[serde(skip)]
    pub q_star: SymMatrix,
    pub replicates: Vec<f64>,
    pub warnings: Vec<String>,
}

impl TruthReport {
    pub fn cdf(&self) -> EmpiricalCdf {
        EmpiricalCdf::new(self.replicates.clone()).expect("replicates are finite")
    }
}

/// Reference barycenter followed by the sampling experiment.
#[allow(clippy::too_many_arguments)]
pub fn run_truth(
    source: &dyn DataSource,
    n_truth: usize,
    n: usize,
    n_reps: usize,
    stat_kind: StatKind,
    solver: &SolverConfig,
    seed: u64,
) -> Result<TruthReport> {
    let mut warnings = Vec::new();
    if n_truth < n {
        warnings.push(format!(
            "n_truth = {n_truth} is below n = {n}; the reference barycenter is noisier than the estimates it judges"
        ));
    }
    let reference = reference_barycenter(source, n_truth, solver, seed)?;
    if !reference.converged {
        warnings.push(format!(
            "reference barycenter stopped after {} iterations at residual {:.3e}",
            reference.iterations, reference.residual
        ));
    }
    let replicates = sampling_distribution(source, &reference.q, n, n_reps, stat_kind, solver, seed)?;
    Ok(TruthReport {
        stat_kind,
        n,
        n_truth,
        n_reps,
        seed,
        reference_iterations: reference.iterations,
        reference_residual: reference.residual,
        reference_converged: reference.converged,
        q_star: reference.q,
        replicates,
        warnings,
    })
}
