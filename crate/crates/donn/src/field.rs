//! Complex scalar wavefields on a physical grid, with the spectral
//! transforms used by angular-spectrum propagation.
//!
//! Transform convention: `fft2` is the plain unnormalized DFT and `ifft2`
//! carries the 1/(nx*ny) factor, so `ifft2(fft2(f)) == f` to round-off and
//! spatial power equals spectral power divided by nx*ny (Parseval).

use std::cell::RefCell;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::error::{DonnError, Result};
use crate::grid::GridSpec;

/// Complex scalar optical field sampled on a [`GridSpec`].
///
/// Values are immutable after construction; operations return new fields.
#[derive(Debug, Clone)]
pub struct WaveField {
    grid: GridSpec,
    samples: Array2<Complex64>,
}

impl WaveField {
    /// Wrap samples laid out as `[ny, nx]` row-major.
    pub fn new(grid: GridSpec, samples: Array2<Complex64>) -> Result<Self> {
        if samples.dim() != (grid.ny, grid.nx) {
            return Err(DonnError::GridMismatch(format!(
                "samples are {:?}, grid expects ({}, {})",
                samples.dim(),
                grid.ny,
                grid.nx
            )));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let samples = Array2::zeros((grid.ny, grid.nx));
        Self { grid, samples }
    }

    pub fn constant(grid: GridSpec, value: Complex64) -> Self {
        let samples = Array2::from_elem((grid.ny, grid.nx), value);
        Self { grid, samples }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &Array2<Complex64> {
        &self.samples
    }

    pub fn into_samples(self) -> Array2<Complex64> {
        self.samples
    }

    /// Total power sum |s|^2 over all samples.
    pub fn total_power(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Forward spectral transform of the samples.
    pub fn spectrum(&self) -> Array2<Complex64> {
        fft2(&self.samples)
    }

    /// Build a field from frequency coefficients (inverse transform).
    pub fn from_spectrum(grid: GridSpec, spectrum: &Array2<Complex64>) -> Result<Self> {
        Self::new(grid, ifft2(spectrum))
    }

    /// Rescale so that total power is 1. Zero fields are left untouched.
    pub fn normalized_power(mut self) -> Self {
        let p = self.total_power();
        if p > 0.0 {
            let s = 1.0 / p.sqrt();
            self.samples.mapv_inplace(|c| c * s);
        }
        self
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

fn fft2_dir(a: &Array2<Complex64>, direction: FftDirection) -> Array2<Complex64> {
    let (ny, nx) = a.dim();
    // Row pass: rows are contiguous in standard layout, so one process()
    // call transforms all of them.
    let mut rows = a.as_standard_layout().into_owned();
    plan(nx, direction).process(rows.as_slice_mut().expect("standard layout"));
    // Column pass via transpose.
    let mut cols = rows.reversed_axes().as_standard_layout().into_owned();
    plan(ny, direction).process(cols.as_slice_mut().expect("standard layout"));
    cols.reversed_axes().as_standard_layout().into_owned()
}

/// Unnormalized 2D forward DFT.
pub fn fft2(a: &Array2<Complex64>) -> Array2<Complex64> {
    fft2_dir(a, FftDirection::Forward)
}

/// 2D inverse DFT scaled by 1/(nx*ny); exact inverse of [`fft2`].
pub fn ifft2(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (ny, nx) = a.dim();
    let mut out = fft2_dir(a, FftDirection::Inverse);
    let scale = 1.0 / (nx * ny) as f64;
    out.mapv_inplace(|c| c * scale);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use ndarray::Array2;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn random_field(grid: GridSpec, seed: u64) -> WaveField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = Array2::from_shape_fn((grid.ny, grid.nx), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        WaveField::new(grid, samples).unwrap()
    }

    #[test]
    fn total_power_zero_field() {
        let g = GridSpec::square(4, 1.0, 1.55).unwrap();
        assert_eq!(WaveField::zeros(g).total_power(), 0.0);
    }

    #[test]
    fn total_power_unit_field() {
        let g = GridSpec::square(4, 1.0, 1.55).unwrap();
        let f = WaveField::constant(g, Complex64::new(1.0, 0.0));
        assert_eq!(f.total_power(), 16.0);
    }

    #[test]
    fn total_power_single_sample() {
        let g = GridSpec::square(4, 1.0, 1.55).unwrap();
        let mut s = Array2::zeros((4, 4));
        s[[1, 2]] = Complex64::new(3.0, 4.0);
        let f = WaveField::new(g, s).unwrap();
        assert!((f.total_power() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn constant_field_is_dc_only() {
        let g = GridSpec::square(8, 1.0, 1.55).unwrap();
        let c = Complex64::new(0.7, -0.3);
        let spec = WaveField::constant(g, c).spectrum();
        let dc = spec[[0, 0]];
        assert!((dc - c * 64.0).norm() < 1e-12);
        let off_dc: f64 = spec
            .indexed_iter()
            .filter(|((iy, ix), _)| !(*iy == 0 && *ix == 0))
            .map(|(_, v)| v.norm())
            .sum();
        assert!(off_dc < 1e-10);
    }

    #[test]
    fn round_trip_is_identity() {
        let g = GridSpec::square(8, 1.0, 1.55).unwrap();
        let f = random_field(g, 7);
        let back = WaveField::from_spectrum(g, &f.spectrum()).unwrap();
        let max_err = f
            .samples()
            .iter()
            .zip(back.samples().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-12, "round trip error {max_err}");
    }

    #[test]
    fn single_frequency_hits_single_bin() {
        // exp(i 2 pi (3 x / N)) along x concentrates in bin kx = 3.
        let n = 8;
        let g = GridSpec::square(n, 1.0, 1.55).unwrap();
        let samples = Array2::from_shape_fn((n, n), |(_, ix)| {
            Complex64::from_polar(1.0, TAU * 3.0 * ix as f64 / n as f64)
        });
        let f = WaveField::new(g, samples).unwrap();
        let spec = f.spectrum();
        // Matches the direct double-sum DFT bin for bin.
        let direct = reference::dft2_direct(f.samples());
        let max_err = spec
            .iter()
            .zip(direct.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-9, "fft vs direct DFT differ by {max_err}");
        for ((iy, ix), v) in spec.indexed_iter() {
            if iy == 0 && ix == 3 {
                assert!((v - Complex64::new(64.0, 0.0)).norm() < 1e-9);
            } else {
                assert!(v.norm() < 1e-9, "bin ({iy},{ix}) = {v}");
            }
        }
    }

    #[test]
    fn parseval_consistency() {
        let g = GridSpec::new(8, 6, 1.0, 1.55).unwrap();
        let f = random_field(g, 13);
        let space = f.total_power();
        let freq: f64 = f.spectrum().iter().map(|c| c.norm_sqr()).sum::<f64>() / g.len() as f64;
        assert!((space - freq).abs() / space < 1e-10);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let g = GridSpec::square(4, 1.0, 1.55).unwrap();
        let s = Array2::zeros((4, 5));
        assert!(WaveField::new(g, s).is_err());
    }

    #[test]
    fn normalized_power_is_unit_or_zero() {
        let g = GridSpec::square(4, 1.0, 1.55).unwrap();
        let f = random_field(g, 3).normalized_power();
        assert!((f.total_power() - 1.0).abs() < 1e-12);
        let z = WaveField::zeros(g).normalized_power();
        assert_eq!(z.total_power(), 0.0);
    }
}
