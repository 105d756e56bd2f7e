//! Dual objective `f(Σx, Σw) = Tr[Σx − Σx Hᵀ (H Σx Hᵀ + Σw)⁻¹ H Σx]`, the
//! MMSE of the Bayes estimator under a normal prior with these covariances,
//! together with its gradients and Hessian.

use nalgebra::DMatrix;

use crate::error::{dim_mismatch, Result};
use crate::linalg::{solve_spd, PsdMatrix, SymmetricMatrix};

use super::CovariancePair;

/// Partial gradients of `f` with respect to `Σx` and `Σw`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub d_x: PsdMatrix,
    pub d_w: PsdMatrix,
}

/// Quantities shared by the objective, its gradients and the Bayes estimator.
pub(crate) struct Evaluation {
    pub value: f64,
    /// `G = H Σx Hᵀ + Σw`.
    pub g: PsdMatrix,
    /// `A = Σx Hᵀ G⁻¹` (n × m).
    pub gain: DMatrix<f64>,
}

impl Evaluation {
    pub fn new(pair: &CovariancePair, h: &DMatrix<f64>) -> Result<Self> {
        check_dims(pair, h)?;
        let hs = h * pair.sigma_x.as_matrix();
        let g = PsdMatrix::from_psd_product(&hs * h.transpose() + pair.sigma_w.as_matrix());
        let b = solve_spd(&g, &hs)?;
        let value = pair.sigma_x.trace() - hs.dot(&b);
        Ok(Self {
            value,
            g,
            gain: b.transpose(),
        })
    }

    pub fn gradients(&self, h: &DMatrix<f64>) -> Gradients {
        let n = h.ncols();
        let k = DMatrix::identity(n, n) - &self.gain * h;
        Gradients {
            d_x: PsdMatrix::from_psd_product(k.transpose() * &k),
            d_w: PsdMatrix::from_psd_product(self.gain.transpose() * &self.gain),
        }
    }
}

fn check_dims(pair: &CovariancePair, h: &DMatrix<f64>) -> Result<()> {
    if pair.sigma_x.dim() != h.ncols() {
        return Err(dim_mismatch("sigma_x vs H columns", h.ncols(), pair.sigma_x.dim()));
    }
    if pair.sigma_w.dim() != h.nrows() {
        return Err(dim_mismatch("sigma_w vs H rows", h.nrows(), pair.sigma_w.dim()));
    }
    Ok(())
}

/// `Tr[Σx − Σx Hᵀ G⁻¹ H Σx]` with `G = H Σx Hᵀ + Σw`.
pub fn objective_f(pair: &CovariancePair, h: &DMatrix<f64>) -> Result<f64> {
    Ok(Evaluation::new(pair, h)?.value)
}

/// `D_x = KᵀK` with `K = I − Σx Hᵀ G⁻¹ H`, and `D_w = G⁻¹ H Σx² Hᵀ G⁻¹`.
pub fn gradients(pair: &CovariancePair, h: &DMatrix<f64>) -> Result<Gradients> {
    Ok(Evaluation::new(pair, h)?.gradients(h))
}

/// Second directional derivative of `−f` at `pair` along `(Δx, Δw)`.
pub fn hessian_quadratic_form(
    pair: &CovariancePair,
    h: &DMatrix<f64>,
    delta_x: &SymmetricMatrix,
    delta_w: &SymmetricMatrix,
) -> Result<f64> {
    check_dims(pair, h)?;
    if delta_x.dim() != h.ncols() {
        return Err(dim_mismatch("delta_x vs H columns", h.ncols(), delta_x.dim()));
    }
    if delta_w.dim() != h.nrows() {
        return Err(dim_mismatch("delta_w vs H rows", h.nrows(), delta_w.dim()));
    }
    let eval = Evaluation::new(pair, h)?;
    let grads = eval.gradients(h);
    let (x, w) = (delta_x.as_matrix(), delta_w.as_matrix());

    // G⁻¹ H and G⁻¹.
    let ginv_h = solve_spd(&eval.g, h)?;
    let ginv = solve_spd(&eval.g, &DMatrix::identity(h.nrows(), h.nrows()))?;

    // xx block: 2 D_x ⊗ Hᵀ G⁻¹ H.
    let m = h.transpose() * &ginv_h;
    let xx = 2.0 * (x * &m * x).dot(grads.d_x.as_matrix());

    // xw block, counted twice.
    let b1 = h.transpose() * grads.d_w.as_matrix() - &eval.gain;
    let xw = 4.0 * (x * b1 * w).dot(&ginv_h.transpose());

    // ww block: 2 D_w ⊗ G⁻¹.
    let ww = 2.0 * (w * ginv * w).dot(grads.d_w.as_matrix());

    Ok(xx + xw + ww)
}
