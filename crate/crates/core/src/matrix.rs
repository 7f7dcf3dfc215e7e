use std::fmt;

use nalgebra::DMatrix;

use crate::error::{BwError, Result};
use crate::linalg::{self, SymEigen, EPS_SYM};

/// Definiteness class of a symmetric matrix, decided from its spectrum with the
/// relative tolerance [`EPS_SYM`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Definiteness {
    /// `λ_min > ε·‖M‖`.
    PositiveDefinite,
    /// `λ_min ≥ −ε·‖M‖` but not positive definite.
    PositiveSemiDefinite,
    Indefinite,
}

impl Definiteness {
    pub fn from_eigen(eig: &SymEigen) -> Self {
        let scale = eig.spectral_radius();
        let lo = eig.min();
        if scale == 0.0 {
            Definiteness::PositiveSemiDefinite
        } else if lo > EPS_SYM * scale {
            Definiteness::PositiveDefinite
        } else if lo >= -EPS_SYM * scale {
            Definiteness::PositiveSemiDefinite
        } else {
            Definiteness::Indefinite
        }
    }
}

/// A real symmetric `d×d` matrix with exactly symmetric storage and a cached
/// definiteness class.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
    definiteness: Definiteness,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymMatrix")
            .field("dim", &self.dim())
            .field("definiteness", &self.definiteness)
            .field("data", &self.data)
            .finish()
    }
}

impl SymMatrix {
    /// Checks squareness and symmetry (relative to the largest entry), then stores
    /// the symmetric part.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if !data.is_square() {
            return Err(BwError::shape(
                "square matrix",
                format!("{}x{}", data.nrows(), data.ncols()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(BwError::Domain("matrix has non-finite entries".into()));
        }
        let scale = data.amax();
        let asym = linalg::asymmetry(&data);
        if asym > EPS_SYM * scale.max(f64::MIN_POSITIVE) && asym > 0.0 {
            return Err(BwError::Domain(format!(
                "matrix is not symmetric (max asymmetry {asym:e}, scale {scale:e})"
            )));
        }
        Ok(Self::from_symmetric(linalg::symmetrized(data)))
    }

    /// Wraps a matrix already known to be symmetric, classifying its spectrum.
    pub(crate) fn from_symmetric(data: DMatrix<f64>) -> Self {
        let definiteness = Definiteness::from_eigen(&SymEigen::new(&data));
        SymMatrix { data, definiteness }
    }

    /// Wraps a matrix whose class is known from how it was built.
    pub(crate) fn from_parts(data: DMatrix<f64>, definiteness: Definiteness) -> Self {
        debug_assert_eq!(linalg::asymmetry(&data), 0.0);
        SymMatrix { data, definiteness }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(BwError::shape(format!("{d} columns"), bad.len()));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        SymMatrix {
            data: DMatrix::identity(d, d),
            definiteness: Definiteness::PositiveDefinite,
        }
    }

    pub fn zeros(d: usize) -> Self {
        SymMatrix {
            data: DMatrix::zeros(d, d),
            definiteness: Definiteness::PositiveSemiDefinite,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let d = diag.len();
        Self::new(DMatrix::from_fn(d, d, |i, j| if i == j { diag[i] } else { 0.0 }))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn definiteness(&self) -> Definiteness {
        self.definiteness
    }

    pub fn is_psd(&self) -> bool {
        self.definiteness != Definiteness::Indefinite
    }

    pub fn is_pd(&self) -> bool {
        self.definiteness == Definiteness::PositiveDefinite
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn eigen(&self) -> SymEigen {
        SymEigen::new(&self.data)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().values
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix::from_symmetric(&self.data * c)
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.check_same_dim(other)?;
        Ok(SymMatrix::from_symmetric(&self.data + &other.data))
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.check_same_dim(other)?;
        Ok(SymMatrix::from_symmetric(&self.data - &other.data))
    }

    /// `B·M·Bᵀ` for a square `B`, symmetrized.
    pub fn congruence(&self, b: &DMatrix<f64>) -> Result<SymMatrix> {
        if b.ncols() != self.dim() {
            return Err(BwError::shape(self.dim(), b.ncols()));
        }
        Ok(SymMatrix::from_symmetric(linalg::symmetrized(
            b * &self.data * b.transpose(),
        )))
    }

    pub(crate) fn check_same_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(BwError::shape(
                format!("{0}x{0}", self.dim()),
                format!("{0}x{0}", other.dim()),
            ));
        }
        Ok(())
    }

    pub(crate) fn require_psd(&self, what: &str) -> Result<()> {
        if self.is_psd() {
            Ok(())
        } else {
            Err(BwError::Domain(format!("{what} must be positive semi-definite")))
        }
    }

    pub(crate) fn require_pd(&self, what: &str) -> Result<()> {
        if self.is_pd() {
            Ok(())
        } else {
            Err(BwError::Domain(format!("{what} must be positive definite")))
        }
    }
}

/// Eigendecomposition-based PSD square root; small negative eigenvalues are clamped.
pub fn sqrt_psd(m: &SymMatrix) -> Result<SymMatrix> {
    m.require_psd("sqrt_psd input")?;
    let root = linalg::sqrt_psd_raw(m.matrix());
    let class = match m.definiteness() {
        Definiteness::PositiveDefinite => Definiteness::PositiveDefinite,
        _ => Definiteness::PositiveSemiDefinite,
    };
    Ok(SymMatrix::from_parts(root, class))
}

/// Pseudo-inverse square root `(M^{1/2})^+` with relative rank cut-off `rank_tol`.
/// The zero matrix maps to zero.
pub fn pinv_sqrt(m: &SymMatrix, rank_tol: f64) -> Result<SymMatrix> {
    m.require_psd("pinv_sqrt input")?;
    Ok(SymMatrix::from_symmetric(linalg::pinv_sqrt_raw(
        m.matrix(),
        rank_tol,
    )))
}
