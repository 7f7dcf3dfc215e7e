use nalgebra::{DMatrix, DVector};

use crate::error::{BwError, Result};
use crate::linalg::{self, SymEigen, EPS_SYM};
use crate::matrix::SymMatrix;

/// A self-adjoint linear operator on the space of real symmetric `d×d` matrices,
/// stored as an `m×m` symmetric matrix (`m = d(d+1)/2`) in the orthonormal basis
/// of [`linalg::vec_sym`]. Operator norms of the operator are matrix norms of
/// this representation.
#[derive(Clone, Debug, PartialEq)]
pub struct SymOperator {
    dim_base: usize,
    data: DMatrix<f64>,
}

impl SymOperator {
    /// Wraps an `m×m` representation; rejects non-symmetric input.
    pub fn new(dim_base: usize, data: DMatrix<f64>) -> Result<Self> {
        let m = linalg::sym_dim(dim_base);
        if data.nrows() != m || data.ncols() != m {
            return Err(BwError::shape(
                format!("{m}x{m}"),
                format!("{}x{}", data.nrows(), data.ncols()),
            ));
        }
        let scale = data.amax();
        let asym = linalg::asymmetry(&data);
        if asym > 0.0 && asym > 1e3 * EPS_SYM * scale {
            return Err(BwError::Domain(format!(
                "operator is not self-adjoint (asymmetry {asym:e})"
            )));
        }
        Ok(SymOperator {
            dim_base,
            data: linalg::symmetrized(data),
        })
    }

    pub(crate) fn from_symmetric(dim_base: usize, data: DMatrix<f64>) -> Self {
        SymOperator {
            dim_base,
            data: linalg::symmetrized(data),
        }
    }

    /// Builds the representation of a linear map `X ↦ f(X)` by applying it to each
    /// basis element. The map is assumed self-adjoint; the result is symmetrized.
    pub fn from_linear_map(dim_base: usize, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        let m = linalg::sym_dim(dim_base);
        let mut data = DMatrix::zeros(m, m);
        for p in 0..m {
            let image = f(&linalg::basis_element(dim_base, p));
            data.set_column(p, &linalg::vec_sym(&image));
        }
        Self::from_symmetric(dim_base, data)
    }

    pub fn identity(dim_base: usize) -> Self {
        let m = linalg::sym_dim(dim_base);
        SymOperator {
            dim_base,
            data: DMatrix::identity(m, m),
        }
    }

    pub fn zeros(dim_base: usize) -> Self {
        let m = linalg::sym_dim(dim_base);
        SymOperator {
            dim_base,
            data: DMatrix::zeros(m, m),
        }
    }

    pub fn dim_base(&self) -> usize {
        self.dim_base
    }

    /// Dimension `m` of the space the operator acts on.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.data * v
    }

    pub fn apply_raw(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::unvec_sym(self.dim_base, &(&self.data * linalg::vec_sym(x)))
    }

    pub fn apply(&self, x: &SymMatrix) -> Result<SymMatrix> {
        if x.dim() != self.dim_base {
            return Err(BwError::shape(self.dim_base, x.dim()));
        }
        Ok(SymMatrix::from_symmetric(self.apply_raw(x.matrix())))
    }

    pub fn scaled(&self, c: f64) -> SymOperator {
        SymOperator {
            dim_base: self.dim_base,
            data: &self.data * c,
        }
    }

    pub fn add(&self, other: &SymOperator) -> Result<SymOperator> {
        self.check_same_dim(other)?;
        Ok(SymOperator::from_symmetric(
            self.dim_base,
            &self.data + &other.data,
        ))
    }

    pub fn sub(&self, other: &SymOperator) -> Result<SymOperator> {
        self.check_same_dim(other)?;
        Ok(SymOperator::from_symmetric(
            self.dim_base,
            &self.data - &other.data,
        ))
    }

    /// Sandwich product `B·self·B`, self-adjoint whenever both factors are.
    pub fn sandwich(&self, b: &SymOperator) -> Result<SymOperator> {
        self.check_same_dim(b)?;
        Ok(SymOperator::from_symmetric(
            self.dim_base,
            &b.data * &self.data * &b.data,
        ))
    }

    /// Plain composition `self ∘ other`; errors if the product is not self-adjoint.
    pub fn compose(&self, other: &SymOperator) -> Result<SymOperator> {
        self.check_same_dim(other)?;
        SymOperator::new(self.dim_base, &self.data * &other.data)
    }

    pub fn eigen(&self) -> SymEigen {
        SymEigen::new(&self.data)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().values
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    /// Operator norm (largest absolute eigenvalue).
    pub fn norm(&self) -> f64 {
        self.eigen().spectral_radius()
    }

    /// Schatten-1 (nuclear) norm.
    pub fn nuclear_norm(&self) -> f64 {
        self.eigen().values.iter().map(|l| l.abs()).sum()
    }

    pub fn is_psd(&self) -> bool {
        let eig = self.eigen();
        eig.min() >= -EPS_SYM * eig.spectral_radius()
    }

    pub fn is_pd(&self) -> bool {
        let eig = self.eigen();
        eig.min() > EPS_SYM * eig.spectral_radius()
    }

    /// Inverse of a non-singular operator.
    pub fn inverse(&self) -> Result<SymOperator> {
        let eig = self.eigen();
        let scale = eig.spectral_radius();
        if eig.values.iter().any(|l| l.abs() <= EPS_SYM * scale) || scale == 0.0 {
            return Err(BwError::Domain("operator is singular".into()));
        }
        Ok(SymOperator::from_symmetric(
            self.dim_base,
            eig.map(|l| 1.0 / l),
        ))
    }

    /// PSD square root; eigenvalues below zero are clamped.
    pub fn sqrt_psd(&self) -> Result<SymOperator> {
        let eig = self.eigen();
        if eig.min() < -EPS_SYM * eig.spectral_radius() {
            return Err(BwError::Domain("operator is not positive semi-definite".into()));
        }
        Ok(SymOperator::from_symmetric(
            self.dim_base,
            eig.map(|l| l.max(0.0).sqrt()),
        ))
    }

    /// Inverse square root of a PD operator.
    pub fn inv_sqrt(&self) -> Result<SymOperator> {
        let eig = self.eigen();
        if eig.min() <= EPS_SYM * eig.spectral_radius() {
            return Err(BwError::Domain("operator is not positive definite".into()));
        }
        Ok(SymOperator::from_symmetric(
            self.dim_base,
            eig.map(|l| 1.0 / l.sqrt()),
        ))
    }

    fn check_same_dim(&self, other: &SymOperator) -> Result<()> {
        if self.dim_base != other.dim_base {
            return Err(BwError::shape(
                format!("operator on {}x{} matrices", self.dim_base, self.dim_base),
                format!("{}x{}", other.dim_base, other.dim_base),
            ));
        }
        Ok(())
    }
}
