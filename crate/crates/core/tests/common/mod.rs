#![allow(dead_code)]

use maximin::{LossKind, LossModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        scale * v
    })
}

pub fn signs(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
}

pub fn all_kinds() -> [LossKind; 4] {
    [
        LossKind::Squared,
        LossKind::Huber { delta: 0.7 },
        LossKind::L1,
        LossKind::CrossEntropy,
    ]
}

/// Random model of the given kind; cross-entropy targets are 0/1.
pub fn random_model(rng: &mut ChaCha8Rng, kind: LossKind, m: usize, n: usize) -> LossModel {
    let x = gaussian_matrix(rng, m, n);
    let y = match kind {
        LossKind::CrossEntropy => DVector::from_fn(m, |_, _| if rng.random_bool(0.5) { 1.0 } else { 0.0 }),
        _ => gaussian_vector(rng, m, 2.0),
    };
    LossModel::new(kind, x, y).unwrap()
}

/// Straight-line re-implementation of every loss, one row at a time.
pub fn naive_value(model: &LossModel, w: &DVector<f64>) -> f64 {
    let x = model.x();
    let y = model.y();
    let mut total = 0.0;
    for i in 0..x.nrows() {
        let mut u = 0.0;
        for j in 0..x.ncols() {
            u += x[(i, j)] * w[j];
        }
        let r = u - y[i];
        total += match model.kind() {
            LossKind::Squared => r * r,
            LossKind::Huber { delta } => {
                if r.abs() <= delta {
                    0.5 * r * r
                } else {
                    delta * r.abs() - 0.5 * delta * delta
                }
            }
            LossKind::L1 => r.abs(),
            LossKind::CrossEntropy => {
                let p = 1.0 / (1.0 + (-u).exp());
                -(y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln())
            }
        };
    }
    total
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn vec_rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}
