use crate::error::{Result, ScatteringError};
use serde::{Deserialize, Serialize};

/// Scattering transform parameters.
///
/// `j` is the maximum log-scale (lowpass width `2^j`), `l` the orientation
/// count per scale, `max_order` in 0..=2. Output maps are subsampled by
/// `2^j`, so both spatial sizes must be divisible by it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringConfig {
    pub j: usize,
    pub l: usize,
    pub max_order: u8,
    pub height: usize,
    pub width: usize,
}

impl ScatteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.j < 1 {
            return Err(ScatteringError::InvalidConfig("J must be >= 1".into()));
        }
        if self.l < 1 {
            return Err(ScatteringError::InvalidConfig("L must be >= 1".into()));
        }
        if self.max_order > 2 {
            return Err(ScatteringError::InvalidConfig(format!(
                "max_order must be 0, 1 or 2, got {}",
                self.max_order
            )));
        }
        let sub = self.subsampling();
        if sub > self.height || sub > self.width {
            return Err(ScatteringError::InvalidConfig(format!(
                "J={} too large for {}x{} input",
                self.j, self.height, self.width
            )));
        }
        if self.height % sub != 0 || self.width % sub != 0 {
            return Err(ScatteringError::InvalidConfig(format!(
                "spatial size {}x{} not divisible by 2^J = {}",
                self.height, self.width, sub
            )));
        }
        Ok(())
    }

    pub fn subsampling(&self) -> usize {
        1usize << self.j
    }

    pub fn output_height(&self) -> usize {
        self.height / self.subsampling()
    }

    pub fn output_width(&self) -> usize {
        self.width / self.subsampling()
    }

    /// Scattering paths per input channel:
    /// `1 + J*L + L^2 * J*(J-1)/2`, truncated at `max_order`.
    pub fn paths_per_channel(&self) -> usize {
        let mut n = 1;
        if self.max_order >= 1 {
            n += self.j * self.l;
        }
        if self.max_order >= 2 {
            n += self.l * self.l * self.j * (self.j - 1) / 2;
        }
        n
    }
}
