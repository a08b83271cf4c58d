//! First-order saddle-point solvers for `max_z min_w L(w, z)`.
//!
//! The primal player descends with step `eta`, the dual player ascends with
//! step `eta * gamma`. `gamma` is multiplied by `gamma_growth` once per epoch,
//! where an epoch is `n` iterations, and saturates at `gamma_max`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lagrangian::{self, DualPair};
use crate::linalg::{binarize, constraint_violation, inf_norm};
use crate::losses::{LossKind, LossModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Simultaneous descent/ascent.
    Gda,
    /// Dual step first, then a primal step from the refreshed gradient.
    GdaAlternating,
    /// Optimistic updates `2 g_t - g_{t-1}`.
    Ogda,
    /// Lookahead step, then the real step from the lookahead gradients.
    Extragradient,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Gda => "gda",
            Method::GdaAlternating => "gda-alternating",
            Method::Ogda => "ogda",
            Method::Extragradient => "extragradient",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gda" => Ok(Method::Gda),
            "gda-alternating" => Ok(Method::GdaAlternating),
            "ogda" => Ok(Method::Ogda),
            "extragradient" => Ok(Method::Extragradient),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub method: Method,
    /// Primal step size.
    pub eta: f64,
    /// Initial dual/primal step ratio.
    pub gamma0: f64,
    /// Multiplicative change of the ratio per epoch.
    pub gamma_growth: f64,
    /// Ceiling on the ratio; `f64::INFINITY` leaves the schedule unbounded.
    pub gamma_max: f64,
    /// Adaptive-moment preconditioning on both players.
    pub adaptive: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub max_iters: usize,
    pub binarize_tol: f64,
    pub grad_tol: f64,
    pub seed: u64,
    /// Record the iterate every this many iterations; 0 disables tracing.
    pub trace_every: usize,
    /// `||w||_inf` above this aborts with [`Error::Diverged`].
    pub divergence_cap: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            method: Method::Gda,
            eta: 0.02,
            gamma0: 1.0,
            gamma_growth: 1.02,
            gamma_max: 2.0,
            adaptive: false,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            max_iters: 20_000,
            binarize_tol: 1e-4,
            grad_tol: 1e-4,
            seed: 0,
            trace_every: 0,
            divergence_cap: 1e6,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("eta", self.eta)?;
        positive("gamma0", self.gamma0)?;
        positive("gamma_growth", self.gamma_growth)?;
        positive("binarize_tol", self.binarize_tol)?;
        positive("grad_tol", self.grad_tol)?;
        positive("adam_eps", self.adam_eps)?;
        if !(self.gamma_max >= self.gamma0) {
            return Err(Error::InvalidParameter(format!(
                "gamma_max must be at least gamma0, got {}",
                self.gamma_max
            )));
        }
        positive("divergence_cap", self.divergence_cap)?;
        if !(self.eta * self.gamma0).is_finite() {
            return Err(Error::InvalidParameter("eta * gamma0 is not finite".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        Ok(())
    }

    /// Ratio in force after `epochs` completed epochs.
    pub fn gamma_at_epoch(&self, epochs: usize) -> f64 {
        (self.gamma0 * self.gamma_growth.powi(epochs as i32)).min(self.gamma_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub w: DVector<f64>,
    pub z: DVector<f64>,
    pub lagrangian: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub w_final: DVector<f64>,
    /// Entrywise sign of `w_final`, with `sign(0) = +1`.
    pub w_binary: DVector<f64>,
    pub z_final: DVector<f64>,
    pub converged: bool,
    pub iters: usize,
    /// `max_i |w_i^2 - 1|`.
    pub final_constraint_violation: f64,
    /// `||grad_w L||_inf` at the final iterate.
    pub final_grad_w_norm: f64,
    pub final_gamma: f64,
    pub trace: Option<Vec<TraceEntry>>,
}

#[derive(Debug, Clone)]
struct Adam {
    m: DVector<f64>,
    v: DVector<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize, cfg: &SolveConfig) -> Self {
        Self {
            m: DVector::zeros(n),
            v: DVector::zeros(n),
            t: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
        }
    }

    fn direction(&mut self, g: &DVector<f64>) -> DVector<f64> {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        self.m.zip_apply(g, |m, gi| *m = b1 * *m + (1.0 - b1) * gi);
        self.v.zip_apply(g, |v, gi| *v = b2 * *v + (1.0 - b2) * gi * gi);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        self.m
            .zip_map(&self.v, |m, v| (m / c1) / ((v / c2).sqrt() + self.eps))
    }
}

/// Per-player gradient transform: identity or adaptive moments.
#[derive(Debug, Clone)]
struct Preconditioner(Option<Adam>);

impl Preconditioner {
    fn new(n: usize, cfg: &SolveConfig) -> Self {
        Self(cfg.adaptive.then(|| Adam::new(n, cfg)))
    }

    fn apply(&mut self, g: DVector<f64>) -> DVector<f64> {
        match &mut self.0 {
            Some(adam) => adam.direction(&g),
            None => g,
        }
    }
}

/// Uniform `[-1, 1]^n` start drawn from `seed`.
pub fn initial_weights(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0))
}

/// Run the configured saddle-point iteration from `w0` (or a seeded uniform
/// start) with `z = 0`.
///
/// Hitting `max_iters` is not an error; the result reports `converged = false`.
pub fn solve(model: &LossModel, config: &SolveConfig, w0: Option<&DVector<f64>>) -> Result<SolveResult> {
    config.validate()?;
    let n = model.dim();
    let mut w = match w0 {
        Some(w0) => {
            model.check_weights(w0)?;
            w0.clone()
        }
        None => initial_weights(n, config.seed),
    };
    let mut z = DVector::<f64>::zeros(n);

    let eta = config.eta;
    let mut gamma = config.gamma0;
    let mut epochs = 0usize;
    let mut pre_w = Preconditioner::new(n, config);
    let mut pre_z = Preconditioner::new(n, config);
    let mut prev_dirs: Option<(DVector<f64>, DVector<f64>)> = None;

    let mut trace = (config.trace_every > 0).then(Vec::new);
    let record = |trace: &mut Option<Vec<TraceEntry>>, iter: usize, w: &DVector<f64>, z: &DVector<f64>| {
        if let Some(t) = trace.as_mut() {
            t.push(TraceEntry {
                iter,
                w: w.clone(),
                z: z.clone(),
                lagrangian: lagrangian::value_unchecked(model, w, z),
            });
        }
    };
    record(&mut trace, 0, &w, &z);

    let mut iters = 0;
    let mut converged = false;
    let mut gw;
    loop {
        gw = lagrangian::grad_w_unchecked(model, &w, &z);
        if constraint_violation(&w) <= config.binarize_tol && inf_norm(&gw) <= config.grad_tol {
            converged = true;
            break;
        }
        if iters == config.max_iters {
            break;
        }

        let last = (w.clone(), z.clone());
        let dual_step = eta * gamma;
        match config.method {
            Method::Gda => {
                let gz = lagrangian::grad_z_unchecked(&w);
                w -= pre_w.apply(gw.clone()) * eta;
                z += pre_z.apply(gz) * dual_step;
            }
            Method::GdaAlternating => {
                let gz = lagrangian::grad_z_unchecked(&w);
                z += pre_z.apply(gz) * dual_step;
                let fresh = lagrangian::grad_w_unchecked(model, &w, &z);
                w -= pre_w.apply(fresh) * eta;
            }
            Method::Ogda => {
                let gz = lagrangian::grad_z_unchecked(&w);
                let dw = pre_w.apply(gw.clone());
                let dz = pre_z.apply(gz);
                let (pw, pz) = prev_dirs.take().unwrap_or_else(|| (dw.clone(), dz.clone()));
                w -= (&dw * 2.0 - pw) * eta;
                z += (&dz * 2.0 - pz) * dual_step;
                prev_dirs = Some((dw, dz));
            }
            Method::Extragradient => {
                let gz = lagrangian::grad_z_unchecked(&w);
                let w_half = &w - pre_w.apply(gw.clone()) * eta;
                let z_half = &z + pre_z.apply(gz) * dual_step;
                let gw_half = lagrangian::grad_w_unchecked(model, &w_half, &z_half);
                let gz_half = lagrangian::grad_z_unchecked(&w_half);
                w -= pre_w.apply(gw_half) * eta;
                z += pre_z.apply(gz_half) * dual_step;
            }
        }
        iters += 1;

        let finite = w.iter().chain(z.iter()).all(|v| v.is_finite());
        if !finite || inf_norm(&w) > config.divergence_cap {
            return Err(Error::Diverged {
                iter: iters,
                last: Box::new(DualPair { w: last.0, z: last.1 }),
            });
        }
        if iters % n == 0 {
            epochs += 1;
            gamma = config.gamma_at_epoch(epochs);
        }
        if config.trace_every > 0 && iters % config.trace_every == 0 {
            record(&mut trace, iters, &w, &z);
        }
    }

    if let Some(t) = trace.as_ref() {
        if t.last().map(|e| e.iter) != Some(iters) {
            record(&mut trace, iters, &w, &z);
        }
    }

    Ok(SolveResult {
        w_binary: binarize(&w),
        final_constraint_violation: constraint_violation(&w),
        final_grad_w_norm: inf_norm(&gw),
        final_gamma: gamma,
        w_final: w,
        z_final: z,
        converged,
        iters,
        trace,
    })
}

#[derive(Debug, Clone)]
pub struct InnerMinOptions {
    /// Starting point for the iterative path; zero when absent.
    pub start: Option<DVector<f64>>,
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Iterates with `||w||_inf` beyond this are taken as evidence of unboundedness.
    pub norm_cap: f64,
}

impl Default for InnerMinOptions {
    fn default() -> Self {
        Self {
            start: None,
            grad_tol: 1e-10,
            max_iters: 500,
            norm_cap: 1e6,
        }
    }
}

/// Dual function evaluation `d(z) = min_w L(w, z)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerMin {
    Bounded {
        w: DVector<f64>,
        value: f64,
        converged: bool,
    },
    Unbounded,
}

impl InnerMin {
    pub fn value(&self) -> f64 {
        match self {
            InnerMin::Bounded { value, .. } => *value,
            InnerMin::Unbounded => f64::NEG_INFINITY,
        }
    }
}

/// Minimize `L(., z)`.
///
/// The squared loss is solved in closed form, `(X^T X + diag(z)) w = X^T y`,
/// and is unbounded unless that matrix is positive definite. Other losses use
/// damped Newton with a gradient fallback: the result is a local minimizer
/// reached from `opts.start`.
pub fn inner_min(model: &LossModel, z: &DVector<f64>, opts: &InnerMinOptions) -> Result<InnerMin> {
    if z.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "dual multipliers",
            expected: model.dim(),
            got: z.len(),
        });
    }
    if !z.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("dual multipliers"));
    }
    if let Some(s) = &opts.start {
        model.check_weights(s)?;
    }

    if model.kind() == LossKind::Squared {
        let x = model.x();
        let mut a = x.tr_mul(x);
        for i in 0..z.len() {
            a[(i, i)] += z[i];
        }
        let b = x.tr_mul(model.y());
        return Ok(match a.cholesky() {
            Some(c) => {
                let w = c.solve(&b);
                let value = lagrangian::value_unchecked(model, &w, z);
                InnerMin::Bounded {
                    w,
                    value,
                    converged: true,
                }
            }
            None => InnerMin::Unbounded,
        });
    }

    let n = model.dim();
    let mut w = opts.start.clone().unwrap_or_else(|| DVector::zeros(n));
    let mut value = lagrangian::value_unchecked(model, &w, z);
    for _ in 0..opts.max_iters {
        let g = lagrangian::grad_w_unchecked(model, &w, z);
        if inf_norm(&g) <= opts.grad_tol {
            return Ok(InnerMin::Bounded {
                w,
                value,
                converged: true,
            });
        }
        let mut h: DMatrix<f64> = model.hessian_unchecked(&w);
        for i in 0..n {
            h[(i, i)] += 2.0 * z[i];
        }
        let newton = h.cholesky().map(|c| -c.solve(&g)).filter(|d| d.dot(&g) < 0.0);
        let dir = newton.unwrap_or_else(|| -&g);
        let slope = dir.dot(&g);

        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = &w + &dir * t;
            if inf_norm(&cand) > opts.norm_cap {
                return Ok(InnerMin::Unbounded);
            }
            let vc = lagrangian::value_unchecked(model, &cand, z);
            if vc <= value + 1e-4 * t * slope {
                w = cand;
                value = vc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(InnerMin::Bounded {
        w,
        value,
        converged: false,
    })
}
