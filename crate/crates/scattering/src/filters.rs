//! Morlet band-pass filters and a Gaussian lowpass, sampled directly on the
//! full-resolution frequency grid with periodization.

use crate::config::ScatteringConfig;
use crate::error::{Result, ScatteringError};
use crate::fft::{C64, Fft2};

const SIGMA0: f64 = 0.8; // spatial width at scale 2^0
const XI0: f64 = 3.0 * std::f64::consts::PI / 4.0; // center frequency at scale 2^0
const ALIASES: i64 = 2; // periodization range in units of 2*pi

/// One band-pass filter, stored in the frequency domain as paired real
/// arrays. The Morlet construction yields a real spectrum (`im == 0`), but
/// complex spectra are carried for generality.
#[derive(Debug, Clone)]
pub struct BandPass {
    pub scale: usize,
    pub orientation: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Complete filter bank for one input size: `J*L` band-pass filters plus the
/// scale-`2^J` Gaussian lowpass, all at full input resolution in frequency.
pub struct FilterBank {
    pub config: ScatteringConfig,
    pub psi: Vec<BandPass>,
    pub phi: Vec<f64>,
    pub(crate) fft: Fft2,
}

impl FilterBank {
    pub fn psi_at(&self, scale: usize, orientation: usize) -> &BandPass {
        &self.psi[scale * self.config.l + orientation]
    }

    pub(crate) fn psi_spectrum(&self, scale: usize, orientation: usize) -> Vec<C64> {
        let p = self.psi_at(scale, orientation);
        p.re.iter()
            .zip(&p.im)
            .map(|(&re, &im)| C64::new(re, im))
            .collect()
    }
}

/// Builds Morlet band-pass filters at scales `2^0 .. 2^(J-1)` and orientations
/// `l*pi/L`, plus the Gaussian lowpass at scale `2^J`. A Gaussian correction
/// term makes every band-pass exactly zero-mean, the lowpass is normalized to
/// unit DC gain, and the whole bank is scaled to a unit Littlewood-Paley
/// frame bound.
pub fn build_filter_bank(cfg: &ScatteringConfig) -> Result<FilterBank> {
    cfg.validate()?;
    let (h, w) = (cfg.height, cfg.width);
    let n = h * w;

    let mut psi = Vec::with_capacity(cfg.j * cfg.l);
    for scale in 0..cfg.j {
        let sigma = SIGMA0 * (1usize << scale) as f64;
        let xi = XI0 / (1usize << scale) as f64;
        let slant = 4.0 / cfg.l as f64;
        for orientation in 0..cfg.l {
            let theta = orientation as f64 * std::f64::consts::PI / cfg.l as f64;
            let (ct, st) = (theta.cos(), theta.sin());

            let mut centered = vec![0.0f64; n];
            let mut envelope = vec![0.0f64; n];
            for (idx, (c, e)) in centered.iter_mut().zip(envelope.iter_mut()).enumerate() {
                let (wy, wx) = bin_frequency(idx, h, w);
                *c = periodized_gaussian(wy, wx, sigma, slant, ct, st, xi);
                *e = periodized_gaussian(wy, wx, sigma, slant, ct, st, 0.0);
            }
            // zero-mean correction: subtract beta * envelope so the DC bin vanishes
            let beta = centered[0] / envelope[0];
            let re: Vec<f64> = centered
                .iter()
                .zip(&envelope)
                .map(|(c, e)| c - beta * e)
                .collect();
            psi.push(BandPass {
                scale,
                orientation,
                re,
                im: vec![0.0; n],
            });
        }
    }

    // Gaussian lowpass at scale 2^J, unit DC gain.
    let sigma_low = SIGMA0 * (1usize << cfg.j) as f64;
    let mut phi = vec![0.0f64; n];
    for (idx, p) in phi.iter_mut().enumerate() {
        let (wy, wx) = bin_frequency(idx, h, w);
        *p = periodized_gaussian(wy, wx, sigma_low, 1.0, 1.0, 0.0, 0.0);
    }
    let dc = phi[0];
    if dc <= 0.0 {
        return Err(ScatteringError::InvalidConfig(
            "degenerate lowpass: zero DC gain".into(),
        ));
    }
    for p in phi.iter_mut() {
        *p /= dc;
    }

    // Frame normalization. For real inputs the effective Littlewood-Paley
    // sum pairs each frequency with its reflection:
    //   kappa(w) = |phi(w)|^2 + (1/2) * sum_l (|psi_l(w)|^2 + |psi_l(-w)|^2)
    // Scale the band-passes by the largest constant keeping kappa <= 1
    // everywhere; phi itself stays fixed to preserve unit DC gain.
    let mut scale_sq = f64::INFINITY;
    for idx in 0..n {
        let refl = reflect_bin(idx, h, w);
        let mut half_sum = 0.0;
        for p in &psi {
            half_sum += 0.5 * (p.re[idx] * p.re[idx] + p.re[refl] * p.re[refl]);
        }
        if half_sum > 1e-300 {
            let headroom = (1.0 - phi[idx] * phi[idx]).max(0.0);
            scale_sq = scale_sq.min(headroom / half_sum);
        }
    }
    if scale_sq.is_finite() {
        let c = scale_sq.sqrt();
        for p in &mut psi {
            for v in &mut p.re {
                *v *= c;
            }
        }
    }

    Ok(FilterBank {
        config: *cfg,
        psi,
        phi,
        fft: Fft2::new(h, w),
    })
}

/// Angular frequency of a flat bin index, mapped to the principal branch.
fn bin_frequency(idx: usize, h: usize, w: usize) -> (f64, f64) {
    let u = idx / w;
    let v = idx % w;
    let fu = if u <= h / 2 { u as f64 } else { u as f64 - h as f64 };
    let fv = if v <= w / 2 { v as f64 } else { v as f64 - w as f64 };
    (
        2.0 * std::f64::consts::PI * fu / h as f64,
        2.0 * std::f64::consts::PI * fv / w as f64,
    )
}

/// Flat index of the reflected frequency `-w` (mod 2*pi).
fn reflect_bin(idx: usize, h: usize, w: usize) -> usize {
    let u = idx / w;
    let v = idx % w;
    let ru = (h - u) % h;
    let rv = (w - v) % w;
    ru * w + rv
}

/// Anisotropic Gaussian centered at `xi` along direction `(ct, st)`,
/// periodized over the frequency torus.
fn periodized_gaussian(wy: f64, wx: f64, sigma: f64, slant: f64, ct: f64, st: f64, xi: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut acc = 0.0;
    for my in -ALIASES..=ALIASES {
        for mx in -ALIASES..=ALIASES {
            let ay = wy + two_pi * my as f64;
            let ax = wx + two_pi * mx as f64;
            // rotate into the filter frame; x axis along the wave direction
            let par = ax * ct + ay * st;
            let perp = -ax * st + ay * ct;
            let d_par = par - xi;
            let q = sigma * sigma * (d_par * d_par + (perp * perp) / (slant * slant)) / 2.0;
            acc += (-q).exp();
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(j: usize, l: usize, size: usize) -> ScatteringConfig {
        ScatteringConfig {
            j,
            l,
            max_order: 2,
            height: size,
            width: size,
        }
    }

    #[test]
    fn bank_counts() {
        let bank = build_filter_bank(&cfg(1, 1, 8)).unwrap();
        assert_eq!(bank.psi.len(), 1);
        let bank = build_filter_bank(&cfg(3, 8, 32)).unwrap();
        assert_eq!(bank.psi.len(), 24);
    }

    #[test]
    fn band_passes_are_zero_mean() {
        // spatial mean == DC bin of the spectrum; check the normalized form
        let bank = build_filter_bank(&cfg(3, 4, 32)).unwrap();
        for p in &bank.psi {
            // spatial kernel via inverse FFT
            let mut buf: Vec<C64> = p
                .re
                .iter()
                .zip(&p.im)
                .map(|(&re, &im)| C64::new(re, im))
                .collect();
            bank.fft.inverse(&mut buf);
            let sum: f64 = buf.iter().map(|c| c.re).sum();
            let l1: f64 = buf.iter().map(|c| c.norm()).sum();
            assert!(sum.abs() / l1 < 1e-6, "psi mean {} l1 {}", sum, l1);
        }
    }

    #[test]
    fn lowpass_has_unit_dc() {
        let bank = build_filter_bank(&cfg(2, 4, 16)).unwrap();
        assert!((bank.phi[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn littlewood_paley_bounded_by_one() {
        let bank = build_filter_bank(&cfg(2, 4, 16)).unwrap();
        let (h, w) = (16, 16);
        for idx in 0..h * w {
            let refl = reflect_bin(idx, h, w);
            let mut kappa = bank.phi[idx] * bank.phi[idx];
            for p in &bank.psi {
                kappa += 0.5 * (p.re[idx] * p.re[idx] + p.re[refl] * p.re[refl]);
            }
            assert!(kappa <= 1.0 + 1e-12, "kappa {} at bin {}", kappa, idx);
        }
    }

    #[test]
    fn rejects_oversized_j() {
        assert!(build_filter_bank(&cfg(4, 2, 8)).is_err());
    }
}
