//! Dense symmetric and positive semidefinite matrix primitives.
//!
//! Every matrix handed to the estimation code goes through one of the two
//! newtypes here. [`SymmetricMatrix`] symmetrizes its input on construction,
//! [`PsdMatrix`] additionally clamps eigenvalues that are negative within the
//! PSD tolerance `1e-9 * max(1, lambda_max)`.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_mismatch, Error, Result};

/// Relative tolerance for accepting slightly negative eigenvalues as zero.
pub const PSD_REL_TOL: f64 = 1e-9;

/// Relative asymmetry above which construction is rejected instead of
/// silently symmetrized.
const ASYMMETRY_REL_TOL: f64 = 1e-8;

/// Absolute floor used where a tolerance would otherwise scale to zero.
pub const ABS_FLOOR: f64 = 1e-12;

/// Tolerance below which an eigenvalue counts as negative for a matrix whose
/// largest eigenvalue is `lambda_max`.
pub fn psd_tol(lambda_max: f64) -> f64 {
    PSD_REL_TOL * lambda_max.max(1.0)
}

/// A dense real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Validates squareness and finiteness, then symmetrizes `(S + Sᵀ)/2`.
    ///
    /// Inputs whose asymmetry exceeds `1e-8` relative to their largest entry
    /// are rejected.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > ASYMMETRY_REL_TOL * scale {
            return Err(Error::InvalidInput(format!(
                "matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without validation; for products known to be symmetric.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl Deref for SymmetricMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// A dense positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix(SymmetricMatrix);

impl PsdMatrix {
    /// Checks the spectrum and clamps eigenvalues in `[-psd_tol, 0)` to zero.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::from_symmetric(SymmetricMatrix::new(m)?)
    }

    pub fn from_symmetric(s: SymmetricMatrix) -> Result<Self> {
        let eig = sym_eig(&s);
        let lmax = eig.values.max();
        let lmin = eig.values.min();
        if lmin < -psd_tol(lmax) {
            return Err(Error::NotPsd { min_eigenvalue: lmin });
        }
        if lmin < 0.0 {
            Ok(Self(SymmetricMatrix::symmetrized(
                eig.reconstruct_with(|l| l.max(0.0)),
            )))
        } else {
            Ok(Self(s))
        }
    }

    /// Wraps a matrix that is PSD by construction (Gram products, convex
    /// combinations of PSD matrices). Only symmetrizes.
    pub(crate) fn from_psd_product(m: DMatrix<f64>) -> Self {
        Self(SymmetricMatrix::symmetrized(m))
    }

    pub fn identity(d: usize) -> Self {
        Self(SymmetricMatrix::identity(d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(SymmetricMatrix::zeros(d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_symmetric(SymmetricMatrix::from_diagonal(diag)?)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidInput(format!("scale factor {c} must be >= 0")));
        }
        Ok(Self::from_psd_product(self.as_matrix() * c))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_symmetric(&self) -> &SymmetricMatrix {
        &self.0
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.0.as_matrix()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0.into_inner()
    }
}

impl Deref for PsdMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        self.0.as_matrix()
    }
}

impl From<PsdMatrix> for SymmetricMatrix {
    fn from(p: PsdMatrix) -> Self {
        p.0
    }
}

/// Eigendecomposition `S = V diag(values) Vᵀ` with eigenvalues sorted in
/// descending order and orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEig {
    /// Returns `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled = scale_columns(&self.vectors, self.values.iter().map(|&l| f(l)));
        &scaled * self.vectors.transpose()
    }

    pub fn max(&self) -> f64 {
        self.values.get(0).copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.as_slice().last().copied().unwrap_or(0.0)
    }
}

/// Symmetric eigendecomposition, eigenvalues descending.
pub fn sym_eig(s: &SymmetricMatrix) -> SymEig {
    let d = s.dim();
    if d == 0 {
        return SymEig {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let eig = s.as_matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SymEig { values, vectors }
}

/// Principal square root of a PSD matrix.
pub fn psd_sqrt(s: &PsdMatrix) -> PsdMatrix {
    let eig = sym_eig(s.as_symmetric());
    PsdMatrix::from_psd_product(eig.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// `Tr[(S2^{1/2} S1 S2^{1/2})^{1/2}]`.
pub fn trace_sqrt_product(s1: &PsdMatrix, s2: &PsdMatrix) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(dim_mismatch("trace_sqrt_product", s1.dim(), s2.dim()));
    }
    Ok(trace_sqrt_product_with_root(s1, &psd_sqrt(s2)))
}

/// Same as [`trace_sqrt_product`] with a precomputed `root = S2^{1/2}`.
pub(crate) fn trace_sqrt_product_with_root(s1: &PsdMatrix, root: &PsdMatrix) -> f64 {
    let inner = root.as_matrix() * s1.as_matrix() * root.as_matrix();
    let eig = sym_eig(&SymmetricMatrix::symmetrized(inner));
    eig.values.iter().map(|&l| l.max(0.0).sqrt()).sum()
}

/// Solves `G X = B` for symmetric positive definite `G` via Cholesky.
pub fn solve_spd(g: &PsdMatrix, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != g.dim() {
        return Err(dim_mismatch("solve_spd right-hand side rows", g.dim(), b.nrows()));
    }
    let chol = g
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    Ok(chol.solve(b))
}

/// Frobenius inner product `⟨A, B⟩ = Tr[Aᵀ B]`.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// Multiplies column `j` of `m` by the `j`-th item of `factors`.
pub(crate) fn scale_columns(
    m: &DMatrix<f64>,
    factors: impl IntoIterator<Item = f64>,
) -> DMatrix<f64> {
    let mut out = m.clone();
    for (mut col, f) in out.column_iter_mut().zip(factors) {
        col *= f;
    }
    out
}

/// Block-diagonal matrix `diag(a, b)`.
pub(crate) fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

/// Largest eigenvalue of `HᵀH`, computed on the smaller Gram matrix.
pub(crate) fn gram_lambda_max(h: &DMatrix<f64>) -> f64 {
    let gram = if h.nrows() <= h.ncols() {
        h * h.transpose()
    } else {
        h.transpose() * h
    };
    sym_eig(&SymmetricMatrix::symmetrized(gram)).max()
}
