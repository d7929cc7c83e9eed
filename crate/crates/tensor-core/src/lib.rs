//! Dense multilinear-algebra kernel: tensor storage, unfoldings, mode-n
//! products, generalized contractions, and Kronecker products.
//!
//! All operations are pure functions of immutable inputs and safe to call
//! concurrently; tensors and matrices are plain value types.

mod error;
mod io;
mod matrix;
pub mod rng;
mod tensor;

pub use error::{Result, TensorError};
pub use io::{load_tensor, read_tensor, save_tensor, write_tensor};
pub use matrix::{kronecker, sym_eig, sym_inverse, Matrix};
pub use tensor::{
    fold, generalized_inner_product, mode_n_product, outer_product, unfold, DenseTensor, Dtype,
    IndexIter,
};
