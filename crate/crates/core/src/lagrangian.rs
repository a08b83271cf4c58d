//! The saddle objective `L(w, z) = f(w) + w^T diag(z) w - z^T 1`.
//!
//! Sign convention: the dual term enters with a plus sign exactly as written
//! above, so `grad_w L = grad f + 2 diag(z) w` and the stationary dual point
//! at a sign vector `w` is `z = -1/2 diag(w) grad f(w)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, is_sign_vector};
use crate::losses::LossModel;

/// Primal weights and dual multipliers, one multiplier per constraint `w_i^2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPair {
    pub w: DVector<f64>,
    pub z: DVector<f64>,
}

impl DualPair {
    pub fn new(w: DVector<f64>, z: DVector<f64>) -> Result<Self> {
        if w.len() != z.len() {
            return Err(Error::DimensionMismatch {
                what: "dual multipliers",
                expected: w.len(),
                got: z.len(),
            });
        }
        if !all_finite(w.as_slice()) || !all_finite(z.as_slice()) {
            return Err(Error::NonFinite("dual pair"));
        }
        Ok(Self { w, z })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }
}

fn check(model: &LossModel, p: &DualPair) -> Result<()> {
    model.check_weights(&p.w)?;
    if p.z.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "dual multipliers",
            expected: model.dim(),
            got: p.z.len(),
        });
    }
    Ok(())
}

pub fn lagrangian_value(model: &LossModel, p: &DualPair) -> Result<f64> {
    check(model, p)?;
    Ok(value_unchecked(model, &p.w, &p.z))
}

pub fn grad_w(model: &LossModel, p: &DualPair) -> Result<DVector<f64>> {
    check(model, p)?;
    Ok(grad_w_unchecked(model, &p.w, &p.z))
}

/// `w_i^2 - 1` for each constraint.
pub fn grad_z(model: &LossModel, p: &DualPair) -> Result<DVector<f64>> {
    check(model, p)?;
    Ok(grad_z_unchecked(&p.w))
}

/// `hess f(w) + 2 diag(z)`.
pub fn hess_w(model: &LossModel, p: &DualPair) -> Result<DMatrix<f64>> {
    check(model, p)?;
    let mut h = model.hessian_unchecked(&p.w);
    for i in 0..p.dim() {
        h[(i, i)] += 2.0 * p.z[i];
    }
    Ok(h)
}

/// Mixed second derivative `d^2 L / dw dz = 2 diag(w)`.
pub fn cross_hess(model: &LossModel, p: &DualPair) -> Result<DMatrix<f64>> {
    check(model, p)?;
    Ok(DMatrix::from_diagonal(&(&p.w * 2.0)))
}

/// Dual point making `(w_star, z)` stationary: `z = -1/2 diag(w_star) grad f(w_star)`.
pub fn analytic_dual(model: &LossModel, w_star: &DVector<f64>) -> Result<DVector<f64>> {
    model.check_weights(w_star)?;
    if !is_sign_vector(w_star) {
        return Err(Error::NotSignVector);
    }
    let g = model.gradient_unchecked(w_star);
    Ok(g.component_mul(w_star) * -0.5)
}

pub(crate) fn value_unchecked(model: &LossModel, w: &DVector<f64>, z: &DVector<f64>) -> f64 {
    let penalty: f64 = w
        .iter()
        .zip(z.iter())
        .map(|(wi, zi)| zi * (wi * wi - 1.0))
        .sum();
    model.value_unchecked(w) + penalty
}

pub(crate) fn grad_w_unchecked(
    model: &LossModel,
    w: &DVector<f64>,
    z: &DVector<f64>,
) -> DVector<f64> {
    let mut g = model.gradient_unchecked(w);
    for i in 0..w.len() {
        g[i] += 2.0 * z[i] * w[i];
    }
    g
}

pub(crate) fn grad_z_unchecked(w: &DVector<f64>) -> DVector<f64> {
    w.map(|x| x * x - 1.0)
}
