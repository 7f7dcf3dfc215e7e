//! Dense symmetric eigen-kernels shared by every module.
//!
//! Everything spectral in the crate goes through [`SymEigen`] (backed by faer's
//! self-adjoint eigensolver): square roots, pseudo-inverses, operator norms and
//! the Sylvester solves behind the map differential. Matrices here are raw `DMatrix<f64>` values assumed symmetric;
//! the checked wrappers live in [`crate::matrix`] and [`crate::operator`].

use std::cell::RefCell;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd;
use nalgebra::{DMatrix, DVector};

thread_local! {
    /// Per-thread scratch space for the eigensolver, keyed by dimension.
    static EVD_WORKSPACE: RefCell<(usize, MemBuffer)> = RefCell::new((0, MemBuffer::new(faer::dyn_stack::StackReq::EMPTY)));
}

/// Relative tolerance for symmetry and PSD checks.
pub const EPS_SYM: f64 = 1e-10;

/// Default relative rank cut-off for pseudo-inverses.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Eigendecomposition `M = V diag(values) Vᵀ` with eigenvalues sorted ascending.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn new(m: &DMatrix<f64>) -> Self {
        debug_assert!(m.is_square());
        let n = m.nrows();
        let mut values = vec![0.0; n];
        let mut vectors = DMatrix::zeros(n, n);
        if n == 0 {
            return SymEigen { values, vectors };
        }
        let a = faer::MatRef::from_column_major_slice(m.as_slice(), n, n);
        let u = faer::MatMut::from_column_major_slice_mut(vectors.as_mut_slice(), n, n);
        let s = faer::ColMut::from_slice_mut(&mut values).as_diagonal_mut();
        EVD_WORKSPACE.with(|cell| {
            let mut cache = cell.borrow_mut();
            if cache.0 != n {
                let req = evd::self_adjoint_evd_scratch::<f64>(
                    n,
                    evd::ComputeEigenvectors::Yes,
                    faer::Par::Seq,
                    Default::default(),
                );
                *cache = (n, MemBuffer::new(req));
            }
            evd::self_adjoint_evd(
                a,
                s,
                Some(u),
                faer::Par::Seq,
                MemStack::new(&mut cache.1),
                Default::default(),
            )
            .expect("self-adjoint eigensolver converges on finite input");
        });
        SymEigen { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Largest absolute eigenvalue (spectral norm of the matrix).
    pub fn spectral_radius(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    /// `V diag(f(λ)) Vᵀ`, symmetrized.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (c, &lambda) in self.values.iter().enumerate() {
            let s = f(lambda);
            scaled.column_mut(c).scale_mut(s);
        }
        let mut out = &scaled * self.vectors.transpose();
        symmetrize_mut(&mut out);
        out
    }
}

/// Replaces `m` by `(m + mᵀ)/2` so that storage is exactly symmetric.
pub fn symmetrize_mut(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn symmetrized(mut m: DMatrix<f64>) -> DMatrix<f64> {
    symmetrize_mut(&mut m);
    m
}

/// Largest entrywise asymmetry `max |m_ij − m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// PSD square root with negative eigenvalues clamped to zero.
pub fn sqrt_psd_raw(m: &DMatrix<f64>) -> DMatrix<f64> {
    SymEigen::new(m).map(|l| l.max(0.0).sqrt())
}

/// Square root and inverse square root from one decomposition; eigenvalues are
/// floored at `floor` before inversion.
pub fn sqrt_and_inv_sqrt(m: &DMatrix<f64>, floor: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = SymEigen::new(m);
    let root = eig.map(|l| l.max(floor).sqrt());
    let inv_root = eig.map(|l| 1.0 / l.max(floor).sqrt());
    (root, inv_root)
}

/// Trace of the PSD square root, i.e. the sum of square roots of clamped eigenvalues.
pub fn trace_sqrt_psd(m: &DMatrix<f64>) -> f64 {
    SymEigen::new(m).values.iter().map(|l| l.max(0.0).sqrt()).sum()
}

/// Pseudo-inverse square root: eigenvalues above `rank_tol·λ_max` go to `λ^{-1/2}`,
/// the rest to zero.
pub fn pinv_sqrt_raw(m: &DMatrix<f64>, rank_tol: f64) -> DMatrix<f64> {
    let eig = SymEigen::new(m);
    let cut = rank_tol * eig.max().max(0.0);
    if eig.max() <= 0.0 {
        return DMatrix::zeros(m.nrows(), m.ncols());
    }
    eig.map(|l| if l > cut { 1.0 / l.sqrt() } else { 0.0 })
}

/// Dimension `d(d+1)/2` of the space of real symmetric `d×d` matrices.
pub fn sym_dim(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Index pairs `(k, l)`, `k ≤ l`, in row-major upper-triangular order; position in
/// this list is the coordinate index of the orthonormal basis.
pub fn basis_pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |k| (k..d).map(move |l| (k, l)))
}

/// Coordinates of a symmetric matrix in the orthonormal basis
/// `{E_kk} ∪ {(E_kl + E_lk)/√2 : k < l}`. The map is an isometry between the
/// Frobenius norm and the Euclidean norm.
pub fn vec_sym(x: &DMatrix<f64>) -> DVector<f64> {
    let d = x.nrows();
    let mut v = DVector::zeros(sym_dim(d));
    for (p, (k, l)) in basis_pairs(d).enumerate() {
        v[p] = if k == l {
            x[(k, k)]
        } else {
            std::f64::consts::SQRT_2 * 0.5 * (x[(k, l)] + x[(l, k)])
        };
    }
    v
}

/// Inverse of [`vec_sym`].
pub fn unvec_sym(d: usize, v: &DVector<f64>) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), sym_dim(d));
    let mut x = DMatrix::zeros(d, d);
    for (p, (k, l)) in basis_pairs(d).enumerate() {
        if k == l {
            x[(k, k)] = v[p];
        } else {
            let e = v[p] * std::f64::consts::FRAC_1_SQRT_2;
            x[(k, l)] = e;
            x[(l, k)] = e;
        }
    }
    x
}

/// Basis element number `p` as a matrix.
pub fn basis_element(d: usize, p: usize) -> DMatrix<f64> {
    let mut v = DVector::zeros(sym_dim(d));
    v[p] = 1.0;
    unvec_sym(d, &v)
}

/// Frobenius inner product `tr(XᵀY)`.
pub fn frob_inner(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    x.component_mul(y).sum()
}
