//! Bures–Wasserstein barycenters of positive semi-definite matrices and
//! multiplier-bootstrap uncertainty for them.

pub mod barycenter;
pub mod bootstrap;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod linalg;
pub mod matrix;
pub mod operator;
pub mod rng;
pub mod sbm;
pub mod truth;

pub use barycenter::{barycenter, mean_map_check, residual, BarycenterResult, Init, SampleSet, SolverConfig};
pub use bootstrap::{
    confidence_bands, draw_weights, ks_distance, quantile, run_bootstrap, BootstrapReport, EmpiricalCdf, StatKind,
    WeightScheme,
};
pub use error::{BwError, IoError, Result};
pub use estimators::{discrepancy, f_op, sample_gaussian_stat, sigma_op, xi_op, DiagnosticBundle, DiscrepancyScalars};
pub use geometry::{a_operator, bw_distance, condition_number, ot_map, ot_map_differential, spectrum_diag, SpectrumDiag};
pub use matrix::{pinv_sqrt, sqrt_psd, Definiteness, SymMatrix};
pub use operator::SymOperator;
