//! The scattering cascade: circular convolutions, modulus nonlinearity,
//! lowpass averaging and output subsampling.

use crate::config::ScatteringConfig;
use crate::error::{Result, ScatteringError};
use crate::fft::C64;
use crate::filters::FilterBank;
use serde::{Deserialize, Serialize};
use tensor_core::DenseTensor;

/// Where one output channel came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScatterPath {
    pub input_channel: usize,
    pub order: u8,
    /// (scale, orientation) of the first band-pass, when order >= 1.
    pub lambda1: Option<(usize, usize)>,
    /// (scale, orientation) of the second band-pass, when order == 2.
    pub lambda2: Option<(usize, usize)>,
}

/// Channel-stacked scattering coefficients plus the channel -> path table.
#[derive(Debug, Clone)]
pub struct ScatteringOutput {
    pub coeffs: DenseTensor,
    pub paths: Vec<ScatterPath>,
}

/// Exact circular convolution of two equally sized real images, computed in
/// the frequency domain.
pub fn circular_conv2d(x: &DenseTensor, f: &DenseTensor) -> Result<DenseTensor> {
    if x.shape() != f.shape() || x.num_modes() != 2 {
        return Err(ScatteringError::SizeMismatch(format!(
            "circular_conv2d: {:?} vs {:?}",
            x.shape(),
            f.shape()
        )));
    }
    let (h, w) = (x.shape()[0], x.shape()[1]);
    let fft = crate::fft::Fft2::new(h, w);
    let xs = fft.forward_real(x.data());
    let fs = fft.forward_real(f.data());
    let mut prod: Vec<C64> = xs.iter().zip(&fs).map(|(a, b)| a * b).collect();
    fft.inverse(&mut prod);
    DenseTensor::from_vec(vec![h, w], prod.iter().map(|c| c.re).collect()).map_err(Into::into)
}

/// Scattering transform of an `(H, W)` image or `(C, H, W)` channel stack.
/// Channels are processed independently; outputs are subsampled by `2^J`.
pub fn scatter(x: &DenseTensor, bank: &FilterBank, cfg: &ScatteringConfig) -> Result<ScatteringOutput> {
    scatter_with_subsampling(x, bank, cfg, true)
}

/// Same cascade without the final subsampling; used to check translation
/// covariance at full resolution.
pub fn scatter_full(
    x: &DenseTensor,
    bank: &FilterBank,
    cfg: &ScatteringConfig,
) -> Result<ScatteringOutput> {
    scatter_with_subsampling(x, bank, cfg, false)
}

fn scatter_with_subsampling(
    x: &DenseTensor,
    bank: &FilterBank,
    cfg: &ScatteringConfig,
    subsample: bool,
) -> Result<ScatteringOutput> {
    if bank.config != *cfg {
        return Err(ScatteringError::InvalidConfig(
            "filter bank built for a different config".into(),
        ));
    }
    let (channels, h, w) = match x.shape() {
        [h, w] => (1usize, *h, *w),
        [c, h, w] => (*c, *h, *w),
        other => {
            return Err(ScatteringError::InputShape {
                expected: vec![cfg.height, cfg.width],
                got: other.to_vec(),
            })
        }
    };
    if h != cfg.height || w != cfg.width {
        return Err(ScatteringError::InputShape {
            expected: vec![cfg.height, cfg.width],
            got: vec![h, w],
        });
    }

    let stride = if subsample { cfg.subsampling() } else { 1 };
    let (oh, ow) = (h / stride, w / stride);
    let n_paths = cfg.paths_per_channel();
    let mut coeffs = Vec::with_capacity(channels * n_paths * oh * ow);
    let mut paths = Vec::with_capacity(channels * n_paths);

    let plane = h * w;
    for c in 0..channels {
        let img = &x.data()[c * plane..(c + 1) * plane];
        for (path, map) in scatter_channel(img, bank, cfg)? {
            paths.push(ScatterPath {
                input_channel: c,
                ..path
            });
            for oy in 0..oh {
                for ox in 0..ow {
                    coeffs.push(map[(oy * stride) * w + ox * stride]);
                }
            }
        }
    }

    Ok(ScatteringOutput {
        coeffs: DenseTensor::from_vec(vec![channels * n_paths, oh, ow], coeffs)?,
        paths,
    })
}

/// Full-resolution scattering maps of a single channel, in path order:
/// order 0, then order 1 by (j1, theta1), then order 2 by (j1, theta1, j2,
/// theta2) restricted to frequency-decreasing paths j2 > j1.
fn scatter_channel(
    img: &[f64],
    bank: &FilterBank,
    cfg: &ScatteringConfig,
) -> Result<Vec<(ScatterPath, Vec<f64>)>> {
    let fft = &bank.fft;
    let spectrum = fft.forward_real(img);

    let lowpass = |spec: &[C64]| -> Vec<f64> {
        let mut prod: Vec<C64> = spec
            .iter()
            .zip(&bank.phi)
            .map(|(a, &p)| a * p)
            .collect();
        fft.inverse(&mut prod);
        prod.iter().map(|v| v.re).collect()
    };
    let modulus = |spec: &[C64], psi: &[C64]| -> Vec<f64> {
        let mut prod: Vec<C64> = spec.iter().zip(psi).map(|(a, b)| a * b).collect();
        fft.inverse(&mut prod);
        prod.iter().map(|v| v.norm()).collect()
    };

    let mut out = Vec::with_capacity(cfg.paths_per_channel());
    out.push((
        ScatterPath {
            input_channel: 0,
            order: 0,
            lambda1: None,
            lambda2: None,
        },
        lowpass(&spectrum),
    ));

    if cfg.max_order == 0 {
        return Ok(out);
    }

    for j1 in 0..cfg.j {
        for t1 in 0..cfg.l {
            let psi1 = bank.psi_spectrum(j1, t1);
            let u1 = modulus(&spectrum, &psi1);
            let u1_spec = fft.forward_real(&u1);
            out.push((
                ScatterPath {
                    input_channel: 0,
                    order: 1,
                    lambda1: Some((j1, t1)),
                    lambda2: None,
                },
                lowpass(&u1_spec),
            ));
            if cfg.max_order < 2 {
                continue;
            }
            for j2 in (j1 + 1)..cfg.j {
                for t2 in 0..cfg.l {
                    let psi2 = bank.psi_spectrum(j2, t2);
                    let u2 = modulus(&u1_spec, &psi2);
                    let u2_spec = fft.forward_real(&u2);
                    out.push((
                        ScatterPath {
                            input_channel: 0,
                            order: 2,
                            lambda1: Some((j1, t1)),
                            lambda2: Some((j2, t2)),
                        },
                        lowpass(&u2_spec),
                    ));
                }
            }
        }
    }
    Ok(out)
}
