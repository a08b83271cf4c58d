//! Convex objectives over linear predictions `u = X w`.
//!
//! Every loss here is a sum of per-row terms of the prediction `x_i^T w`, so
//! value, gradient and Hessian all factor through `X`:
//!
//! * gradient `= X^T g(u)` with `g` the per-row derivative,
//! * Hessian  `= X^T diag(h(u)) X` with `h` the per-row curvature.
//!
//! The squared loss keeps the un-halved convention `||Xw - y||^2`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::all_finite;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Squared,
    Huber { delta: f64 },
    /// `sum |r_i|`, the Huber loss in the `delta -> 0` limit divided by `delta`.
    L1,
    /// Logistic loss on labels in `{0, 1}`.
    CrossEntropy,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Squared => "l2",
            LossKind::Huber { .. } => "huber",
            LossKind::L1 => "l1",
            LossKind::CrossEntropy => "ce",
        }
    }
}

/// A loss bound to its data. Immutable after construction.
#[derive(Debug, Clone)]
pub struct LossModel {
    kind: LossKind,
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl LossModel {
    pub fn new(kind: LossKind, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidParameter(format!(
                "data matrix must be non-empty, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                what: "targets",
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if !all_finite(x.as_slice()) {
            return Err(Error::NonFinite("data matrix"));
        }
        if !all_finite(y.as_slice()) {
            return Err(Error::NonFinite("targets"));
        }
        match kind {
            LossKind::Huber { delta } if !(delta > 0.0 && delta.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "huber delta must be positive, got {delta}"
                )));
            }
            LossKind::CrossEntropy if y.iter().any(|&v| v != 0.0 && v != 1.0) => {
                return Err(Error::InvalidParameter(
                    "cross-entropy labels must be 0 or 1".into(),
                ));
            }
            _ => {}
        }
        Ok(Self { kind, x, y })
    }

    pub fn squared(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::new(LossKind::Squared, x, y)
    }

    pub fn huber(x: DMatrix<f64>, y: DVector<f64>, delta: f64) -> Result<Self> {
        Self::new(LossKind::Huber { delta }, x, y)
    }

    pub fn l1(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::new(LossKind::L1, x, y)
    }

    pub fn cross_entropy(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::new(LossKind::CrossEntropy, x, y)
    }

    /// Same data, different loss.
    pub fn with_kind(&self, kind: LossKind) -> Result<Self> {
        Self::new(kind, self.x.clone(), self.y.clone())
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Number of rows `m`.
    pub fn samples(&self) -> usize {
        self.x.nrows()
    }

    /// Number of weights `n`.
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub(crate) fn check_weights(&self, w: &DVector<f64>) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "weights",
                expected: self.dim(),
                got: w.len(),
            });
        }
        if !all_finite(w.as_slice()) {
            return Err(Error::NonFinite("weights"));
        }
        Ok(())
    }

    pub fn value(&self, w: &DVector<f64>) -> Result<f64> {
        self.check_weights(w)?;
        Ok(self.value_unchecked(w))
    }

    pub fn gradient(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_weights(w)?;
        Ok(self.gradient_unchecked(w))
    }

    pub fn hessian(&self, w: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_weights(w)?;
        Ok(self.hessian_unchecked(w))
    }

    /// Per-row curvature `h_i` such that the Hessian is `X^T diag(h) X`.
    pub fn curvature_weights(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_weights(w)?;
        Ok(self.curvature_from_predictions(&(&self.x * w)))
    }

    pub(crate) fn value_unchecked(&self, w: &DVector<f64>) -> f64 {
        self.value_from_predictions(&(&self.x * w))
    }

    pub(crate) fn gradient_unchecked(&self, w: &DVector<f64>) -> DVector<f64> {
        let u = &self.x * w;
        self.x.tr_mul(&self.slope_from_predictions(&u))
    }

    pub(crate) fn hessian_unchecked(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let h = self.curvature_from_predictions(&(&self.x * w));
        let mut scaled = self.x.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= h[i];
        }
        self.x.tr_mul(&scaled)
    }

    /// Loss value given the prediction vector `u = X w`.
    pub(crate) fn value_from_predictions(&self, u: &DVector<f64>) -> f64 {
        let y = &self.y;
        match self.kind {
            LossKind::Squared => u.iter().zip(y.iter()).map(|(a, b)| (a - b).powi(2)).sum(),
            LossKind::Huber { delta } => u
                .iter()
                .zip(y.iter())
                .map(|(a, b)| huber(a - b, delta))
                .sum(),
            LossKind::L1 => u.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()).sum(),
            LossKind::CrossEntropy => u
                .iter()
                .zip(y.iter())
                .map(|(&a, &b)| softplus(a) - b * a)
                .sum(),
        }
    }

    fn slope_from_predictions(&self, u: &DVector<f64>) -> DVector<f64> {
        let y = &self.y;
        DVector::from_iterator(
            u.len(),
            u.iter().zip(y.iter()).map(|(&a, &b)| match self.kind {
                LossKind::Squared => 2.0 * (a - b),
                LossKind::Huber { delta } => huber_slope(a - b, delta),
                LossKind::L1 => sign0(a - b),
                LossKind::CrossEntropy => sigmoid(a) - b,
            }),
        )
    }

    fn curvature_from_predictions(&self, u: &DVector<f64>) -> DVector<f64> {
        let y = &self.y;
        DVector::from_iterator(
            u.len(),
            u.iter().zip(y.iter()).map(|(&a, &b)| match self.kind {
                LossKind::Squared => 2.0,
                LossKind::Huber { delta } => huber_curvature(a - b, delta),
                LossKind::L1 => 0.0,
                LossKind::CrossEntropy => {
                    let s = sigmoid(a);
                    s * (1.0 - s)
                }
            }),
        )
    }
}

/// Scalar Huber loss: `r^2 / 2` inside `[-delta, delta]`, `|r| delta - delta^2 / 2` outside.
pub fn huber(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        0.5 * r * r
    } else {
        r.abs() * delta - 0.5 * delta * delta
    }
}

/// Derivative of [`huber`]. Both one-sided limits agree at the kink.
pub fn huber_slope(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        r
    } else {
        delta * r.signum()
    }
}

/// Second derivative of [`huber`]; 1 on the closed quadratic zone.
pub fn huber_curvature(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        1.0
    } else {
        0.0
    }
}

fn sign0(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^a)` without overflow.
fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(kind: LossKind, x: f64, y: f64) -> LossModel {
        LossModel::new(
            kind,
            DMatrix::from_element(1, 1, x),
            DVector::from_element(1, y),
        )
        .unwrap()
    }

    #[test]
    fn squared_exact_fit_is_zero() {
        let m = LossModel::squared(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 1.0]))
            .unwrap();
        let w = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(m.value(&w).unwrap(), 0.0);
        assert_eq!(m.gradient(&w).unwrap(), DVector::zeros(2));
    }

    #[test]
    fn squared_identity_hessian() {
        let m = LossModel::squared(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let h = m.hessian(&DVector::from_vec(vec![0.3, -7.0])).unwrap();
        assert_eq!(h, DMatrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn huber_linear_zone() {
        let m = single(LossKind::Huber { delta: 1.0 }, 1.0, 0.0);
        let w = DVector::from_element(1, 3.0);
        assert_eq!(m.value(&w).unwrap(), 2.5);
        assert_eq!(m.gradient(&w).unwrap()[0], 1.0);
        assert_eq!(m.hessian(&w).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn huber_hessian_selects_quadratic_rows() {
        let m = LossModel::huber(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![0.0, 5.0]),
            1.0,
        )
        .unwrap();
        let h = m.hessian(&DVector::zeros(2)).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn huber_kink_slope_is_delta() {
        assert_eq!(huber_slope(2.0, 2.0), 2.0);
        assert_eq!(huber_slope(-2.0, 2.0), -2.0);
        assert_eq!(huber(2.0, 2.0), 2.0);
    }

    #[test]
    fn l1_subgradient_at_zero_residual() {
        let m = single(LossKind::L1, 1.0, 2.0);
        let w = DVector::from_element(1, 2.0);
        assert_eq!(m.value(&w).unwrap(), 0.0);
        assert_eq!(m.gradient(&w).unwrap()[0], 0.0);
        assert_eq!(m.hessian(&w).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn cross_entropy_is_stable_for_large_margins() {
        let m = single(LossKind::CrossEntropy, 1.0, 1.0);
        let v = m.value(&DVector::from_element(1, -800.0)).unwrap();
        assert!((v - 800.0).abs() < 1e-9);
        let v = m.value(&DVector::from_element(1, 800.0)).unwrap();
        assert!(v >= 0.0 && v < 1e-300);
        let g = m.gradient(&DVector::from_element(1, -800.0)).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = DMatrix::identity(2, 2);
        assert!(matches!(
            LossModel::squared(x.clone(), DVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            LossModel::huber(x.clone(), DVector::zeros(2), 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            LossModel::cross_entropy(x.clone(), DVector::from_vec(vec![0.0, 0.5])),
            Err(Error::InvalidParameter(_))
        ));
        let mut bad = x.clone();
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(
            LossModel::squared(bad, DVector::zeros(2)),
            Err(Error::NonFinite(_))
        ));
        let m = LossModel::squared(x, DVector::zeros(2)).unwrap();
        assert!(m.value(&DVector::zeros(3)).is_err());
        assert!(m.gradient(&DVector::from_vec(vec![f64::INFINITY, 0.0])).is_err());
    }
}
