//! CP and Tucker decomposition solvers plus reconstruction and coefficient
//! accounting for factored weight tensors.

mod count;
mod cp;
mod error;
mod svd;
mod tucker;

pub use count::{cp_param_count, dense_count, tucker_param_count};
pub use cp::{cp_als, cp_reconstruct, CPDecomposition, CpFit, CpOptions};
pub use error::{DecompError, Result};
pub use svd::{leading_left_singular_vectors, sym_pinv};
pub use tucker::{tucker_hooi, tucker_reconstruct, TuckerDecomposition, TuckerFit, TuckerOptions};
