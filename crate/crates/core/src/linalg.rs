//! Small dense helpers shared by the solver modules.

use nalgebra::{DMatrix, DVector};

/// Eigenvalues with magnitude below this are reported as exactly zero.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Smallest eigenvalue of a symmetric matrix, with [`EIGEN_FLOOR`] snapping.
pub fn lambda_min(a: &DMatrix<f64>) -> f64 {
    let v = a.clone().symmetric_eigenvalues().min();
    snap(v)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(a: &DMatrix<f64>) -> f64 {
    let v = a.clone().symmetric_eigenvalues().max();
    snap(v)
}

fn snap(v: f64) -> f64 {
    if v.abs() < EIGEN_FLOOR {
        0.0
    } else {
        v
    }
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Index and value of the entry with the largest magnitude.
pub fn argmax_abs(v: &DVector<f64>) -> (usize, f64) {
    let mut best = (0, 0.0_f64);
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best.1 {
            best = (i, x.abs());
        }
    }
    best
}

/// Entrywise sign with `sign(0) = +1`.
pub fn binarize(w: &DVector<f64>) -> DVector<f64> {
    w.map(|x| if x < 0.0 { -1.0 } else { 1.0 })
}

pub fn is_sign_vector(w: &DVector<f64>) -> bool {
    w.iter().all(|&x| x == 1.0 || x == -1.0)
}

pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// `max_i |w_i^2 - 1|`.
pub fn constraint_violation(w: &DVector<f64>) -> f64 {
    w.iter().fold(0.0_f64, |acc, x| acc.max((x * x - 1.0).abs()))
}

/// Solve `a x = b` for symmetric positive-definite `a`; `None` if `a` is not PD.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().cholesky().map(|c| c.solve(b))
}
