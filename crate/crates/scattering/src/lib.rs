//! Fixed-weight convolutional front-end computing order-0/1/2 wavelet
//! scattering coefficients, replacing the first learned convolution.

mod config;
mod error;
mod fft;
mod filters;
mod transform;

pub use config::ScatteringConfig;
pub use error::{Result, ScatteringError};
pub use filters::{build_filter_bank, BandPass, FilterBank};
pub use transform::{circular_conv2d, scatter, scatter_full, ScatterPath, ScatteringOutput};
