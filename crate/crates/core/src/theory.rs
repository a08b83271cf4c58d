//! Executable optimality conditions for the binary maximin problem.
//!
//! The central test is `||grad f(w*)||_inf < lambda_min(hess f(w*))` at a sign
//! vector `w*`. For sub-quadratic `f` it certifies that `w*` is the binary
//! minimizer, that the duality gap is zero, and that the pair
//! `(w*, -1/2 diag(w*) grad f(w*))` is the unique local maximin point.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{self, derive_seed, GeneratorSpec, Noise, XScale};
use crate::error::{Error, Result};
use crate::lagrangian::{self, DualPair};
use crate::linalg::{argmax_abs, inf_norm, is_sign_vector, lambda_min};
use crate::losses::{huber_curvature, LossModel};
use crate::optimizers::{inner_min, InnerMinOptions};

/// The generating binary vector and noise of a synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub w_star: DVector<f64>,
    pub e: DVector<f64>,
    pub sigma: f64,
    pub outlier_mask: Option<Vec<bool>>,
}

impl GroundTruth {
    pub fn outlier_fraction(&self) -> f64 {
        match &self.outlier_mask {
            Some(mask) if !mask.is_empty() => {
                mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64
            }
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConditionDetail {
    /// Index attaining the infinity norm on the left-hand side.
    pub tightest_index: usize,
    /// Rows breaking the outlier-separation requirement (Huber check only).
    pub separation_violations: Vec<usize>,
    /// Left-hand side recomputed with `c_i = delta * sign(e_i)` on outliers,
    /// the actual Huber gradient contribution (Huber check only).
    pub scaled_lhs: Option<f64>,
    pub c: Option<DVector<f64>>,
    pub d: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub holds: bool,
    /// Infinity-norm side.
    pub lhs: f64,
    /// Eigenvalue side.
    pub rhs: f64,
    pub margin: f64,
    pub detail: ConditionDetail,
}

fn report(lhs_vec: &DVector<f64>, gram: &DMatrix<f64>, extra_ok: bool, mut detail: ConditionDetail) -> ConditionReport {
    let (idx, lhs) = argmax_abs(lhs_vec);
    let rhs = lambda_min(gram);
    detail.tightest_index = idx;
    ConditionReport {
        holds: lhs < rhs && extra_ok,
        lhs,
        rhs,
        margin: rhs - lhs,
        detail,
    }
}

fn check_truth(x: &DMatrix<f64>, gt: &GroundTruth) -> Result<()> {
    if gt.w_star.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            what: "w_star",
            expected: x.ncols(),
            got: gt.w_star.len(),
        });
    }
    if gt.e.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            what: "noise",
            expected: x.nrows(),
            got: gt.e.len(),
        });
    }
    Ok(())
}

/// `||grad f(w*)||_inf < lambda_min(hess f(w*))` for any loss.
pub fn check_general(model: &LossModel, w_star: &DVector<f64>) -> Result<ConditionReport> {
    model.check_weights(w_star)?;
    if !is_sign_vector(w_star) {
        return Err(Error::NotSignVector);
    }
    let g = model.gradient_unchecked(w_star);
    let h = model.hessian_unchecked(w_star);
    Ok(report(&g, &h, true, ConditionDetail::default()))
}

/// `||X^T e||_inf < lambda_min(X^T X)`: the general condition for the squared
/// loss with both sides divided by two.
pub fn check_linear(x: &DMatrix<f64>, gt: &GroundTruth) -> Result<ConditionReport> {
    check_truth(x, gt)?;
    Ok(report(&x.tr_mul(&gt.e), &x.tr_mul(x), true, ConditionDetail::default()))
}

/// Huber condition `||X^T c||_inf < lambda_min(sum_i d_i x_i x_i^T)` with
///
/// * `c_i = e_i` and `d_i = 1` when `|e_i| <= delta`,
/// * `c_i = sign(e_i)` and `d_i = 0` otherwise,
///
/// plus the per-row separation `|e_i| <= delta` or `|e_i| >= delta + 2 ||x_i||_2`.
pub fn check_huber(x: &DMatrix<f64>, gt: &GroundTruth, delta: f64) -> Result<ConditionReport> {
    check_truth(x, gt)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("huber delta must be positive, got {delta}")));
    }
    let e = &gt.e;
    let m = x.nrows();
    let d = DVector::from_fn(m, |i, _| huber_curvature(e[i], delta));
    let c = DVector::from_fn(m, |i, _| if d[i] == 1.0 { e[i] } else { e[i].signum() });
    let c_scaled = DVector::from_fn(m, |i, _| if d[i] == 1.0 { e[i] } else { delta * e[i].signum() });

    let separation_violations: Vec<usize> = (0..m)
        .filter(|&i| {
            let a = e[i].abs();
            !(a <= delta || a >= delta + 2.0 * x.row(i).norm())
        })
        .collect();

    let mut weighted = x.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= d[i];
    }
    let gram = x.tr_mul(&weighted);
    let detail = ConditionDetail {
        scaled_lhs: Some(inf_norm(&x.tr_mul(&c_scaled))),
        c: Some(c.clone()),
        d: Some(d),
        separation_violations: separation_violations.clone(),
        ..Default::default()
    };
    Ok(report(&x.tr_mul(&c), &gram, separation_violations.is_empty(), detail))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub trials: usize,
    /// Pairs with `f(w1) < f(w2)` whose second-order model at `w2` is `>= 0`.
    pub violations: usize,
    /// Pairs with `f(w1) - f(w2)` below the second-order model (beyond rounding).
    pub strong_violations: usize,
    /// Largest value of the second-order model seen (negative is good).
    pub worst_margin: f64,
    /// Largest `|f(w1) - f(w2) - model|`.
    pub max_strong_residual: f64,
}

/// Source of candidate `(w1, w2)` pairs; the probe orders each pair by value.
pub type PairSampler<'a> = Box<dyn FnMut() -> (DVector<f64>, DVector<f64>) + 'a>;

const MAX_RESAMPLES: usize = 1000;

/// Sampled check of the sub-quadratic property
/// `(w1 - w2)^T grad f(w2) + 1/2 (w1 - w2)^T hess f(w2) (w1 - w2) < 0`
/// whenever `f(w1) < f(w2)`, and of its strong variant
/// `f(w1) - f(w2) >= ` the same expression.
pub fn subquadratic_probe(model: &LossModel, mut sampler: PairSampler<'_>, trials: usize) -> Result<ProbeReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let mut out = ProbeReport {
        trials,
        violations: 0,
        strong_violations: 0,
        worst_margin: f64::NEG_INFINITY,
        max_strong_residual: 0.0,
    };
    for _ in 0..trials {
        let mut pair = None;
        for _ in 0..MAX_RESAMPLES {
            let (a, b) = sampler();
            model.check_weights(&a)?;
            model.check_weights(&b)?;
            let (fa, fb) = (model.value_unchecked(&a), model.value_unchecked(&b));
            if fa < fb {
                pair = Some((a, b, fa, fb));
                break;
            } else if fb < fa {
                pair = Some((b, a, fb, fa));
                break;
            }
        }
        let (w1, w2, f1, f2) = pair.ok_or(Error::SamplerExhausted)?;
        let d = &w1 - &w2;
        let g = model.gradient_unchecked(&w2);
        let h = model.hessian_unchecked(&w2);
        let taylor = d.dot(&g) + 0.5 * d.dot(&(&h * &d));
        let diff = f1 - f2;
        let rounding = 1e-12 * (1.0 + f1.abs() + f2.abs());

        if taylor >= 0.0 {
            out.violations += 1;
        }
        if diff < taylor - rounding {
            out.strong_violations += 1;
        }
        out.worst_margin = out.worst_margin.max(taylor);
        out.max_strong_residual = out.max_strong_residual.max((diff - taylor).abs());
    }
    Ok(out)
}

/// Pairs drawn uniformly from `[-radius, radius]^n`.
pub fn box_pairs(n: usize, radius: f64, seed: u64) -> PairSampler<'static> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Box::new(move || {
        let a = DVector::from_fn(n, |_, _| rng.random_range(-radius..=radius));
        let b = DVector::from_fn(n, |_, _| rng.random_range(-radius..=radius));
        (a, b)
    })
}

fn random_signs(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
}

/// Pairs of independent uniform sign vectors.
pub fn sign_pairs(n: usize, seed: u64) -> PairSampler<'static> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Box::new(move || (random_signs(&mut rng, n), random_signs(&mut rng, n)))
}

/// Pairs `(anchor, w)` with `w` a uniform sign vector.
pub fn anchored_sign_pairs(anchor: DVector<f64>, seed: u64) -> PairSampler<'static> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = anchor.len();
    Box::new(move || (anchor.clone(), random_signs(&mut rng, n)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMaximinReport {
    pub holds: bool,
    pub grad_w_norm: f64,
    pub grad_z_norm: f64,
    pub hess_min_eig: f64,
    pub min_abs_w: f64,
}

/// Second-order sufficient conditions: stationarity in both players,
/// `hess_w L > 0`, and an invertible cross Hessian `2 diag(w)`.
pub fn verify_local_maximin(model: &LossModel, p: &DualPair, tol: f64) -> Result<LocalMaximinReport> {
    let grad_w_norm = inf_norm(&lagrangian::grad_w(model, p)?);
    let grad_z_norm = inf_norm(&lagrangian::grad_z(model, p)?);
    let hess_min_eig = lambda_min(&lagrangian::hess_w(model, p)?);
    let min_abs_w = p.w.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    Ok(LocalMaximinReport {
        holds: grad_w_norm <= tol && grad_z_norm <= tol && hess_min_eig > tol && min_abs_w > tol,
        grad_w_norm,
        grad_z_norm,
        hess_min_eig,
        min_abs_w,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityGap {
    pub p_hat: f64,
    /// `-inf` when the inner problem is unbounded.
    pub d_hat: f64,
    pub gap: f64,
}

/// `f(w_hat) - min_w L(w, z_hat)`. For non-quadratic losses the inner
/// minimization is local and starts from `w_hat`.
pub fn duality_gap(model: &LossModel, w_hat: &DVector<f64>, z_hat: &DVector<f64>) -> Result<DualityGap> {
    model.check_weights(w_hat)?;
    if !is_sign_vector(w_hat) {
        return Err(Error::NotSignVector);
    }
    let p_hat = model.value_unchecked(w_hat);
    let opts = InnerMinOptions {
        start: Some(w_hat.clone()),
        ..Default::default()
    };
    let d_hat = inner_min(model, z_hat, &opts)?.value();
    Ok(DualityGap {
        p_hat,
        d_hat,
        gap: p_hat - d_hat,
    })
}

pub const BRUTE_FORCE_MAX_DIM: usize = 22;

/// Exact minimizer over `{-1, +1}^n` by enumeration in Gray-code order.
/// Ties go to the lexicographically first vector with `+1` before `-1`.
pub fn brute_force_min(model: &LossModel) -> Result<(DVector<f64>, f64)> {
    let n = model.dim();
    if n > BRUTE_FORCE_MAX_DIM {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_DIM,
        });
    }
    let x = model.x();
    // bit j set <=> w_j = -1; coordinate 0 is the most significant for tie-breaks.
    let key = |bits: u64| -> u64 {
        (0..n).fold(0u64, |acc, j| acc | (((bits >> j) & 1) << (n - 1 - j)))
    };
    let weights = |bits: u64| DVector::from_fn(n, |j, _| if (bits >> j) & 1 == 1 { -1.0 } else { 1.0 });

    let mut bits = 0u64;
    let mut u = x * weights(bits);
    let mut best_bits = bits;
    let mut best = model.value_from_predictions(&u);
    let mut best_key = key(bits);

    for k in 1..(1u64 << n) {
        let j = k.trailing_zeros() as usize;
        let was_pos = (bits >> j) & 1 == 0;
        bits ^= 1 << j;
        if k % 1024 == 0 {
            u = x * weights(bits);
        } else {
            let s = if was_pos { -2.0 } else { 2.0 };
            u.axpy(s, &x.column(j), 1.0);
        }
        let v = model.value_from_predictions(&u);
        if v < best || (v == best && key(bits) < best_key) {
            best = v;
            best_bits = bits;
            best_key = key(bits);
        }
    }
    let w = weights(best_bits);
    let p_star = model.value_unchecked(&w);
    Ok((w, p_star))
}

/// Generating regimes for the high-probability condition statements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// Standard Gaussian `X`, Gaussian noise, checked with [`check_linear`].
    Linear { m: usize, n: usize, sigma: f64 },
    /// Standard Gaussian `X`, `floor(fraction * m)` outliers of the given
    /// magnitude and zero noise elsewhere, checked with [`check_huber`].
    SparseOutliers {
        m: usize,
        n: usize,
        fraction: f64,
        magnitude: f64,
        delta: f64,
    },
}

impl Regime {
    /// Closed-form lower bound on the pass probability; may be negative.
    pub fn bound(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Regime::Linear { m, n, .. } => {
                1.0 - 13.0 * n as f64 * (2.0 / PI).sqrt() * (-(m as f64) / 8.0).exp()
            }
            Regime::SparseOutliers { m, n, .. } => {
                1.0 - 5.0 * n as f64 * (m as f64 / PI).sqrt() * (-(m as f64) / 16.0).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionRate {
    pub passes: usize,
    pub trials: usize,
    pub frequency: f64,
    pub bound: f64,
    pub meets_bound: bool,
}

/// Monte-Carlo pass frequency of the regime's checker. Trial `t` uses the
/// seed `derive_seed(seed, t)`.
pub fn empirical_condition_rate(regime: Regime, trials: usize, seed: u64) -> Result<ConditionRate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let mut passes = 0;
    for t in 0..trials {
        let trial_seed = derive_seed(seed, t as u64);
        let holds = match regime {
            Regime::Linear { m, n, sigma } => {
                let inst = data::generate(&GeneratorSpec {
                    m,
                    n,
                    x_scale: XScale::Unit,
                    noise: Noise::Gaussian { sigma },
                    seed: trial_seed,
                })?;
                check_linear(&inst.x, &inst.truth)?.holds
            }
            Regime::SparseOutliers {
                m,
                n,
                fraction,
                magnitude,
                delta,
            } => {
                let inst = data::generate(&GeneratorSpec {
                    m,
                    n,
                    x_scale: XScale::Unit,
                    noise: Noise::SparseOutliers { fraction, magnitude },
                    seed: trial_seed,
                })?;
                check_huber(&inst.x, &inst.truth, delta)?.holds
            }
        };
        passes += holds as usize;
    }
    let frequency = passes as f64 / trials as f64;
    let bound = regime.bound();
    Ok(ConditionRate {
        passes,
        trials,
        frequency,
        bound,
        meets_bound: frequency >= bound,
    })
}
