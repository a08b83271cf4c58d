//! Regression with binary (`+-1`) weights through Lagrangian maximin optimization.
//!
//! The constrained problem `min f(w) s.t. w_i^2 = 1` is relaxed to the saddle
//! problem `max_z min_w f(w) + w^T diag(z) w - z^T 1` and solved with
//! gradient descent-ascent variants. Alongside the solver the crate provides:
//!
//! * [`losses`]: squared, Huber, L1 and cross-entropy objectives over `X w`,
//! * [`lagrangian`]: the saddle objective, its derivatives and the analytic dual point,
//! * [`optimizers`]: GDA, alternating GDA, optimistic GDA and extra-gradient,
//! * [`theory`]: executable optimality conditions and exhaustive search,
//! * [`baselines`]: sign-rounded regression, box relaxation, STE and SDR,
//! * [`data`]: synthetic generators and a delimited-table pipeline.

pub mod baselines;
pub(crate) mod descent;
pub mod data;
pub mod error;
pub mod lagrangian;
pub mod linalg;
pub mod losses;
pub mod optimizers;
pub mod theory;

pub use error::{Error, Result};
pub use lagrangian::DualPair;
pub use losses::{LossKind, LossModel};
pub use optimizers::{solve, Method, SolveConfig, SolveResult};
