//! Optimizers for the agent: bias-corrected Adam, global gradient clipping,
//! and K-FAC second-order preconditioning over Kronecker-factored curvature.

mod adam;
mod error;
mod kfac;
mod optimizer;
mod quadratic;

pub use adam::{clip_grad_norm, AdamConfig, AdamState};
pub use error::{OptimError, Result};
pub use kfac::{KfacConfig, KfacLayerState};
pub use optimizer::{Assignment, OptimConfig, Optimizer};
pub use quadratic::KroneckerQuadratic;
