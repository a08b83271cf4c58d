//! Projected gradient descent with backtracking, used by the relaxation
//! baselines and the first-order fallback paths.

use nalgebra::DVector;

#[derive(Debug, Clone)]
pub(crate) struct DescentOptions {
    pub max_iters: usize,
    /// Stop once the projected-gradient residual drops below this.
    pub grad_tol: f64,
    /// Stop once `||x_{k+1} - x_k||_inf` drops below this while the
    /// residual is at most `step_residual_tol`.
    pub step_tol: f64,
    pub step_residual_tol: f64,
    pub initial_step: f64,
    /// Steps at or below this always pass the backtracking test (`1/L` for
    /// an `L`-smooth objective), so rounding noise cannot shrink the step.
    pub safe_step: Option<f64>,
    /// Clip every coordinate to `[-b, b]` when set.
    pub bound: Option<f64>,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            grad_tol: 1e-9,
            step_tol: 1e-12,
            step_residual_tol: f64::INFINITY,
            initial_step: 1.0,
            safe_step: None,
            bound: None,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DescentResult {
    pub x: DVector<f64>,
    pub value: f64,
    pub iters: usize,
    pub converged: bool,
}

fn project(x: &mut DVector<f64>, bound: Option<f64>) {
    if let Some(b) = bound {
        x.apply(|v| *v = v.clamp(-b, b));
    }
}

/// `||x - P(x - g)||_inf`, which is `||g||_inf` without bounds.
pub(crate) fn projected_residual(x: &DVector<f64>, g: &DVector<f64>, bound: Option<f64>) -> f64 {
    let mut probe = x - g;
    project(&mut probe, bound);
    (x - probe).amax()
}

pub(crate) fn projected_descent<F>(objective: F, x0: DVector<f64>, opts: &DescentOptions) -> DescentResult
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut x = x0;
    project(&mut x, opts.bound);
    let (mut fx, mut g) = objective(&x);
    let mut t = opts.initial_step;
    let mut iters = 0;
    let mut converged = false;

    while iters < opts.max_iters {
        if projected_residual(&x, &g, opts.bound) <= opts.grad_tol {
            converged = true;
            break;
        }
        // Backtrack on the quadratic upper-bound model of the step.
        let mut accepted = None;
        for _ in 0..80 {
            let mut cand = &x - &g * t;
            project(&mut cand, opts.bound);
            let d = &cand - &x;
            let (fc, gc) = objective(&cand);
            let floor = opts.safe_step.is_some_and(|s| t <= s);
            if fc.is_finite() && (floor || fc <= fx + g.dot(&d) + d.norm_squared() / (2.0 * t)) {
                accepted = Some((cand, fc, gc, d.amax()));
                break;
            }
            t *= 0.5;
        }
        iters += 1;
        let Some((cand, fc, gc, moved)) = accepted else {
            break;
        };
        x = cand;
        fx = fc;
        g = gc;
        if moved <= opts.step_tol && projected_residual(&x, &g, opts.bound) <= opts.step_residual_tol {
            converged = true;
            break;
        }
        t *= 2.0;
    }

    DescentResult {
        x,
        value: fx,
        iters,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_constrained_quadratic() {
        // min (x - 3)^2 + (y + 0.5)^2 on [-1, 1]^2
        let f = |v: &DVector<f64>| {
            let val = (v[0] - 3.0).powi(2) + (v[1] + 0.5).powi(2);
            let g = DVector::from_vec(vec![2.0 * (v[0] - 3.0), 2.0 * (v[1] + 0.5)]);
            (val, g)
        };
        let opts = DescentOptions {
            bound: Some(1.0),
            ..Default::default()
        };
        let r = projected_descent(f, DVector::zeros(2), &opts);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-12);
        assert!((r.x[1] + 0.5).abs() < 1e-8);
    }
}
