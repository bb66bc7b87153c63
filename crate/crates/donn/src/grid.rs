//! Sampling grid shared by fields, layers and detector layouts.

use crate::error::{DonnError, Result};

/// Uniform 2D sampling grid with a physical pitch and design wavelength.
///
/// Sample `(iy, ix)` sits at physical coordinates
/// `x = (ix + 0.5 - nx/2) * pitch`, `y = (iy + 0.5 - ny/2) * pitch`,
/// so the grid is centred on the optical axis. All lengths are in
/// micrometres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Sample spacing in um.
    pub pitch: f64,
    /// Wavelength in um.
    pub wavelength: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        if nx < 1 || ny < 1 {
            return Err(DonnError::InvalidParameter(format!(
                "grid dimensions must be at least 1x1, got {nx}x{ny}"
            )));
        }
        if !(pitch > 0.0) {
            return Err(DonnError::InvalidParameter(format!(
                "grid pitch must be positive, got {pitch}"
            )));
        }
        if !(wavelength > 0.0) {
            return Err(DonnError::InvalidParameter(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            pitch,
            wavelength,
        })
    }

    pub fn square(n: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        Self::new(n, n, pitch, wavelength)
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical width nx * pitch in um.
    pub fn width(&self) -> f64 {
        self.nx as f64 * self.pitch
    }

    /// Physical height ny * pitch in um.
    pub fn height(&self) -> f64 {
        self.ny as f64 * self.pitch
    }

    /// x coordinate of the centre of column `ix`.
    pub fn x_at(&self, ix: usize) -> f64 {
        (ix as f64 + 0.5 - self.nx as f64 / 2.0) * self.pitch
    }

    /// y coordinate of the centre of row `iy`.
    pub fn y_at(&self, iy: usize) -> f64 {
        (iy as f64 + 0.5 - self.ny as f64 / 2.0) * self.pitch
    }
}

impl Default for GridSpec {
    /// 120x120 samples at 1 um pitch, 1.55 um wavelength.
    fn default() -> Self {
        Self {
            nx: 120,
            ny: 120,
            pitch: 1.0,
            wavelength: 1.55,
        }
    }
}

/// Spatial frequency in cycles/um of DFT bin `k` on an axis with `n`
/// samples at spacing `pitch`. Bins above `n/2` wrap to negative
/// frequencies.
pub fn bin_frequency(k: usize, n: usize, pitch: f64) -> f64 {
    let signed = if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    };
    signed as f64 / (n as f64 * pitch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_extent() {
        let g = GridSpec::default();
        assert_eq!(g.width(), 120.0);
        assert_eq!(g.height(), 120.0);
        assert_eq!(g.wavelength, 1.55);
    }

    #[test]
    fn coordinates_are_centred() {
        let g = GridSpec::square(4, 2.0, 1.0).unwrap();
        assert_eq!(g.x_at(0), -3.0);
        assert_eq!(g.x_at(3), 3.0);
        assert_eq!(g.x_at(1) + g.x_at(2), 0.0);
    }

    #[test]
    fn frequencies_wrap() {
        // n = 8, pitch 1: bins 0..=4 map to 0..0.5, bins 5..7 to negative.
        assert_eq!(bin_frequency(0, 8, 1.0), 0.0);
        assert_eq!(bin_frequency(4, 8, 1.0), 0.5);
        assert_eq!(bin_frequency(5, 8, 1.0), -0.375);
        assert_eq!(bin_frequency(7, 8, 1.0), -0.125);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::new(0, 4, 1.0, 1.55).is_err());
        assert!(GridSpec::new(4, 4, 0.0, 1.55).is_err());
        assert!(GridSpec::new(4, 4, 1.0, -1.0).is_err());
    }
}
