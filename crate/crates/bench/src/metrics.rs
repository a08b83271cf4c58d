//! Scores reported per run.

use nalgebra::DVector;

/// Fraction of wrong signs, `||w* - w||_1 / (2 n)`, for sign vectors.
pub fn hamming_error(w_star: &DVector<f64>, w_hat: &DVector<f64>) -> f64 {
    assert_eq!(w_star.len(), w_hat.len(), "weight dimensions differ");
    assert!(!w_star.is_empty(), "empty weight vector");
    let l1: f64 = w_star.iter().zip(w_hat.iter()).map(|(a, b)| (a - b).abs()).sum();
    l1 / (2.0 * w_star.len() as f64)
}

/// `||u - u_hat||_2 / ||u||_2`. A zero reference gives 0 for a zero
/// prediction and infinity otherwise.
pub fn nrmse(u: &DVector<f64>, u_hat: &DVector<f64>) -> f64 {
    assert_eq!(u.len(), u_hat.len(), "target lengths differ");
    let err = (u - u_hat).norm();
    let scale = u.norm();
    if scale > 0.0 {
        err / scale
    } else if err == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Mean and sample standard deviation of the finite entries.
///
/// Returns `None` when no entry is finite; a single entry has deviation 0.
pub fn mean_std(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Some((mean, var.sqrt()))
}
