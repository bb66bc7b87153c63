//! Image-to-wavefield encoding.
//!
//! Pixels map to field amplitude (pixel/255, phase 0), nearest-neighbour
//! upsampled, centred in the grid and renormalized to unit total power so
//! detector readings are comparable across samples.

use ndarray::Array2;
use num_complex::Complex64;

use crate::dataio::idx::{IMAGE_COLS, IMAGE_ROWS};
use crate::error::{DonnError, Result};
use crate::field::WaveField;
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodingSpec {
    /// Nearest-neighbour upsample factor.
    pub upsample: usize,
}

impl Default for EncodingSpec {
    /// x4: a 28x28 image fills 112x112 of the default 120x120 grid.
    fn default() -> Self {
        Self { upsample: 4 }
    }
}

impl EncodingSpec {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.upsample == 0 {
            return Err(DonnError::InvalidParameter("upsample must be >= 1".into()));
        }
        let (w, h) = (IMAGE_COLS * self.upsample, IMAGE_ROWS * self.upsample);
        if w > grid.nx || h > grid.ny {
            return Err(DonnError::InvalidParameter(format!(
                "upsampled image {w}x{h} does not fit the {}x{} grid",
                grid.nx, grid.ny
            )));
        }
        Ok(())
    }
}

/// Encode one 28x28 image as an amplitude field of unit total power
/// (all-zero images stay zero).
pub fn encode_image(image: &[u8], spec: &EncodingSpec, grid: GridSpec) -> Result<WaveField> {
    if image.len() != IMAGE_ROWS * IMAGE_COLS {
        return Err(DonnError::InvalidParameter(format!(
            "expected {} pixels, got {}",
            IMAGE_ROWS * IMAGE_COLS,
            image.len()
        )));
    }
    spec.validate(&grid)?;
    let u = spec.upsample;
    let (w, h) = (IMAGE_COLS * u, IMAGE_ROWS * u);
    let (ox, oy) = ((grid.nx - w) / 2, (grid.ny - h) / 2);

    let mut samples: Array2<Complex64> = Array2::zeros((grid.ny, grid.nx));
    for py in 0..IMAGE_ROWS {
        for px in 0..IMAGE_COLS {
            let a = image[py * IMAGE_COLS + px] as f64 / 255.0;
            if a == 0.0 {
                continue;
            }
            for dy in 0..u {
                for dx in 0..u {
                    samples[[oy + py * u + dy, ox + px * u + dx]] = Complex64::new(a, 0.0);
                }
            }
        }
    }
    Ok(WaveField::new(grid, samples)?.normalized_power())
}
