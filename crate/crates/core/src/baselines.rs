//! Comparison methods that return binary weights.
//!
//! * `lr`: unconstrained fit, then sign rounding.
//! * `lpr`: box relaxation `w in [-1, 1]^n`, then sign rounding.
//! * `ste`: straight-through estimator on a latent real vector.
//! * `sdr`: semidefinite relaxation of the homogenized squared loss, solved
//!   with a low-rank factorization and rounded from the top eigenvector.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::descent::{projected_descent, projected_residual, DescentOptions};
use crate::error::{Error, Result};
use crate::linalg::{binarize, lambda_max, solve_spd};
use crate::losses::{LossKind, LossModel};
use crate::optimizers::initial_weights;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub method: &'static str,
    pub w_binary: DVector<f64>,
    pub w_relaxed: Option<DVector<f64>>,
    pub iters: usize,
    /// Loss at `w_binary`.
    pub objective: f64,
    pub converged: bool,
    /// Optimal value of the relaxed problem where one is solved (`lpr`, `sdr`).
    pub relaxation_value: Option<f64>,
}

const RIDGE: f64 = 1e-10;

fn finish(
    method: &'static str,
    model: &LossModel,
    relaxed: Option<DVector<f64>>,
    w_binary: DVector<f64>,
    iters: usize,
    converged: bool,
    relaxation_value: Option<f64>,
) -> BaselineResult {
    BaselineResult {
        method,
        objective: model.value_unchecked(&w_binary),
        w_binary,
        w_relaxed: relaxed,
        iters,
        converged,
        relaxation_value,
    }
}

fn value_and_gradient(model: &LossModel) -> impl Fn(&DVector<f64>) -> (f64, DVector<f64>) + '_ {
    move |w| (model.value_unchecked(w), model.gradient_unchecked(w))
}

/// `1/L` for the smooth losses; L1 has no global smoothness constant.
fn safe_step(model: &LossModel) -> Option<f64> {
    let scale = match model.kind() {
        LossKind::Squared => 2.0,
        LossKind::Huber { .. } => 1.0,
        LossKind::CrossEntropy => 0.25,
        LossKind::L1 => return None,
    };
    let x = model.x();
    let l = scale * lambda_max(&x.tr_mul(x));
    (l > 0.0).then(|| 1.0 / l)
}

fn descent_options(model: &LossModel) -> DescentOptions {
    let safe = safe_step(model);
    DescentOptions {
        initial_step: safe.unwrap_or(1.0),
        safe_step: safe,
        ..Default::default()
    }
}

/// Unconstrained fit rounded to signs.
///
/// Squared loss uses the ridge-stabilized normal equations and falls back to
/// the SVD minimum-norm solution when they are singular. Other losses use
/// first-order descent from zero.
pub fn lr_round(model: &LossModel) -> BaselineResult {
    let x = model.x();
    let (w, iters, converged) = match model.kind() {
        LossKind::Squared => {
            let mut a = x.tr_mul(x);
            for i in 0..a.nrows() {
                a[(i, i)] += RIDGE;
            }
            let b = x.tr_mul(model.y());
            let w = solve_spd(&a, &b).unwrap_or_else(|| {
                x.clone()
                    .svd(true, true)
                    .solve(model.y(), 1e-12)
                    .unwrap_or_else(|_| DVector::zeros(model.dim()))
            });
            (w, 1, true)
        }
        _ => {
            let opts = descent_options(model);
            let r = projected_descent(value_and_gradient(model), DVector::zeros(model.dim()), &opts);
            (r.x, r.iters, r.converged)
        }
    };
    let wb = binarize(&w);
    finish("lr", model, Some(w), wb, iters, converged, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LprConfig {
    pub max_iters: usize,
    /// Stop once consecutive iterates differ by at most this (infinity norm)
    /// and the box KKT residual is at most `kkt_tol`.
    pub step_tol: f64,
    pub kkt_tol: f64,
}

impl Default for LprConfig {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            step_tol: 1e-8,
            kkt_tol: 1e-7,
        }
    }
}

/// Projected descent on `[-1, 1]^n`, then sign rounding.
pub fn lpr(model: &LossModel, cfg: &LprConfig) -> BaselineResult {
    let opts = DescentOptions {
        max_iters: cfg.max_iters,
        grad_tol: 0.0,
        step_tol: cfg.step_tol,
        step_residual_tol: cfg.kkt_tol,
        bound: Some(1.0),
        ..descent_options(model)
    };
    let r = projected_descent(value_and_gradient(model), DVector::zeros(model.dim()), &opts);
    let wb = binarize(&r.x);
    finish("lpr", model, Some(r.x), wb, r.iters, r.converged, Some(r.value))
}

/// Projected-gradient KKT residual of the box problem at `w`.
pub fn box_kkt_residual(model: &LossModel, w: &DVector<f64>) -> Result<f64> {
    let g = model.gradient(w)?;
    Ok(projected_residual(w, &g, Some(1.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteConfig {
    pub steps: usize,
    pub step_size: f64,
    /// Latent weights are clipped to `[-latent_clip, latent_clip]`.
    pub latent_clip: f64,
    /// Seed for the uniform latent start when no start is given.
    pub seed: u64,
}

impl Default for SteConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            step_size: 0.1,
            latent_clip: 1.5,
            seed: 0,
        }
    }
}

/// Straight-through estimator: the forward pass uses `sign(w)`, the backward
/// pass treats the sign as the identity on `[-1, 1]` and as zero outside.
pub fn ste(model: &LossModel, cfg: &SteConfig, w0: Option<&DVector<f64>>) -> Result<BaselineResult> {
    if !(cfg.step_size > 0.0 && cfg.step_size.is_finite()) {
        return Err(Error::InvalidParameter(format!("ste step size must be positive, got {}", cfg.step_size)));
    }
    if !(cfg.latent_clip >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "ste latent clip must be at least 1, got {}",
            cfg.latent_clip
        )));
    }
    let mut w = match w0 {
        Some(w0) => {
            model.check_weights(w0)?;
            w0.clone()
        }
        None => initial_weights(model.dim(), cfg.seed),
    };
    let clip = cfg.latent_clip;
    for _ in 0..cfg.steps {
        let g = model.gradient_unchecked(&binarize(&w));
        for i in 0..w.len() {
            if w[i].abs() <= 1.0 {
                w[i] = (w[i] - cfg.step_size * g[i]).clamp(-clip, clip);
            }
        }
    }
    let wb = binarize(&w);
    Ok(finish("ste", model, Some(w), wb, cfg.steps, true, None))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdrConfig {
    /// Factorization rank; `ceil(sqrt(2 (n + 1)))` when absent.
    pub rank: Option<usize>,
    pub restarts: usize,
    /// Sweeps over all rows per restart.
    pub max_iters: usize,
    /// Stop once the Riemannian gradient norm falls below `tol * (1 + |objective|)`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SdrConfig {
    fn default() -> Self {
        Self {
            rank: None,
            restarts: 3,
            max_iters: 20_000,
            tol: 1e-10,
            seed: 0,
        }
    }
}

pub const SDR_MAX_DIM: usize = 200;

pub fn default_sdr_rank(n: usize) -> usize {
    (2.0 * (n + 1) as f64).sqrt().ceil() as usize
}

/// Homogenized form `Q` with `[w; t]^T Q [w; t] = ||X w - t y||^2`.
pub fn homogenized_form(model: &LossModel) -> DMatrix<f64> {
    let x = model.x();
    let y = model.y();
    let n = model.dim();
    let mut q = DMatrix::zeros(n + 1, n + 1);
    q.view_mut((0, 0), (n, n)).copy_from(&x.tr_mul(x));
    let xty = x.tr_mul(y);
    for i in 0..n {
        q[(i, n)] = -xty[i];
        q[(n, i)] = -xty[i];
    }
    q[(n, n)] = y.norm_squared();
    q
}

fn normalize_rows(v: &mut DMatrix<f64>) {
    for mut row in v.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        } else {
            row[0] = 1.0;
        }
    }
}

fn sdr_objective(q: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    (v.transpose() * q * v).trace()
}

/// Largest row norm of the Riemannian gradient `2 (Q V - diag(diag(Q V V^T)) V)`.
fn riemannian_gradient_norm(q: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let g = q * v;
    (0..v.nrows())
        .map(|i| {
            let radial = v.row(i).dot(&g.row(i));
            (0..v.ncols()).map(|j| (g[(i, j)] - radial * v[(i, j)]).powi(2)).sum::<f64>().sqrt() * 2.0
        })
        .fold(0.0, f64::max)
}

/// Row-by-row exact minimization on the product of unit spheres: row `i`
/// moves to `-g_i / ||g_i||` with `g_i = sum_{j != i} Q_ij v_j`.
fn sdr_descend(q: &DMatrix<f64>, mut v: DMatrix<f64>, cfg: &SdrConfig) -> (DMatrix<f64>, f64, usize, bool) {
    let (rows, rank) = v.shape();
    let mut qv = q * &v;
    let mut g = vec![0.0; rank];
    for sweep in 0..cfg.max_iters {
        let obj = sdr_objective(q, &v);
        if riemannian_gradient_norm(q, &v) <= cfg.tol * (1.0 + obj.abs()) {
            return (v, obj, sweep, true);
        }
        for i in 0..rows {
            for (k, gk) in g.iter_mut().enumerate() {
                *gk = qv[(i, k)] - q[(i, i)] * v[(i, k)];
            }
            let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            for k in 0..rank {
                let new = -g[k] / norm;
                let delta = new - v[(i, k)];
                if delta != 0.0 {
                    for r in 0..rows {
                        qv[(r, k)] += q[(r, i)] * delta;
                    }
                    v[(i, k)] = new;
                }
            }
        }
    }
    let obj = sdr_objective(q, &v);
    (v, obj, cfg.max_iters, false)
}

/// Semidefinite relaxation `min tr(Q Y)` over `Y >= 0`, `diag(Y) = 1`,
/// through `Y = V V^T` with unit-norm rows. Rounds the top eigenvector of the
/// best `Y` and de-homogenizes by the sign of its last coordinate.
pub fn sdr(model: &LossModel, cfg: &SdrConfig) -> Result<BaselineResult> {
    if model.kind() != LossKind::Squared {
        return Err(Error::Unsupported("sdr requires the squared loss".into()));
    }
    let n = model.dim();
    if n > SDR_MAX_DIM {
        return Err(Error::InvalidParameter(format!("sdr supports n <= {SDR_MAX_DIM}, got {n}")));
    }
    let rank = cfg.rank.unwrap_or_else(|| default_sdr_rank(n)).clamp(1, n + 1);
    let q = homogenized_form(model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut best: Option<(DMatrix<f64>, f64)> = None;
    let mut iters = 0;
    let mut converged = true;
    for _ in 0..cfg.restarts.max(1) {
        let mut v0 = DMatrix::from_fn(n + 1, rank, |_, _| StandardNormal.sample(&mut rng));
        normalize_rows(&mut v0);
        let (v, obj, it, ok) = sdr_descend(&q, v0, cfg);
        iters += it;
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((v, obj));
            converged = ok;
        }
    }
    let (v, relaxation_value) = best.expect("at least one restart");

    let svd = v.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let top = svd.singular_values.imax();
    let lead = u.column(top);
    let t = if lead[n] < 0.0 { -1.0 } else { 1.0 };
    let w_relaxed = DVector::from_fn(n, |i, _| lead[i] * t);
    let w_binary = binarize(&w_relaxed);
    Ok(finish("sdr", model, Some(w_relaxed), w_binary, iters, converged, Some(relaxation_value)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lr_identity_design() {
        let model = LossModel::squared(DMatrix::identity(2, 2), DVector::from_vec(vec![0.3, -2.0])).unwrap();
        let r = lr_round(&model);
        let relaxed = r.w_relaxed.unwrap();
        assert!((relaxed[0] - 0.3).abs() < 1e-9 && (relaxed[1] + 2.0).abs() < 1e-9);
        assert_eq!(r.w_binary.as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn lr_rank_deficient_is_finite() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let model = LossModel::squared(x, DVector::from_vec(vec![2.0, -1.0])).unwrap();
        let r = lr_round(&model);
        let w = r.w_relaxed.unwrap();
        assert!(w.iter().all(|v| v.is_finite()));
        // Minimum-norm solution splits the first equation evenly.
        assert!((w[0] - 1.0).abs() < 1e-6 && (w[1] - 1.0).abs() < 1e-6);
        assert!((w[2] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn lpr_clips_scalar() {
        let model = LossModel::squared(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 5.0)).unwrap();
        let r = lpr(&model, &LprConfig::default());
        assert_eq!(r.w_relaxed.unwrap()[0], 1.0);
        assert_eq!(r.w_binary[0], 1.0);
    }

    #[test]
    fn ste_masks_saturated_latents() {
        let model = LossModel::squared(DMatrix::identity(2, 2), DVector::from_vec(vec![-3.0, -3.0])).unwrap();
        let cfg = SteConfig {
            steps: 1,
            step_size: 0.1,
            ..Default::default()
        };
        let w0 = DVector::from_vec(vec![1.2, 0.5]);
        let r = ste(&model, &cfg, Some(&w0)).unwrap();
        let latent = r.w_relaxed.unwrap();
        assert_eq!(latent[0], 1.2);
        // gradient at sign(w) = (1, 1): 2 * (1 - (-3)) = 8
        assert!((latent[1] - (0.5 - 0.8)).abs() < 1e-12);
    }

    #[test]
    fn sdr_requires_squared_loss() {
        let model = LossModel::l1(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        assert!(matches!(sdr(&model, &SdrConfig::default()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn homogenized_form_matches_loss() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.3, 0.3]);
        let y = DVector::from_vec(vec![0.1, -0.7, 2.0]);
        let model = LossModel::squared(x, y).unwrap();
        let q = homogenized_form(&model);
        for (w, t) in [([1.0, -1.0], 1.0), ([-1.0, -1.0], -1.0)] {
            let wt = DVector::from_vec(vec![w[0], w[1], t]);
            let lifted = wt.dot(&(&q * &wt));
            let direct = model.value(&(DVector::from_row_slice(&w) * t)).unwrap();
            assert!((lifted - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn default_rank() {
        assert_eq!(default_sdr_rank(30), 8);
        assert_eq!(default_sdr_rank(1), 2);
    }
}
