//! Brute-force reference implementations used by the test suites.
//!
//! Everything here is evaluated with explicit O(N^4) double sums and its
//! own frequency bookkeeping, independent of the FFT-based code paths it
//! validates. Intended for grids of 32x32 or smaller.

use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::field::WaveField;
use crate::propagation::EvanescentPolicy;

/// Direct forward DFT: S[ky,kx] = sum f[iy,ix] exp(-i 2 pi (kx ix/nx + ky iy/ny)).
pub fn dft2_direct(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (ny, nx) = a.dim();
    Array2::from_shape_fn((ny, nx), |(ky, kx)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for iy in 0..ny {
            for ix in 0..nx {
                let phase = -TAU
                    * (kx as f64 * ix as f64 / nx as f64 + ky as f64 * iy as f64 / ny as f64);
                acc += a[[iy, ix]] * Complex64::from_polar(1.0, phase);
            }
        }
        acc
    })
}

/// Direct inverse DFT with the 1/(nx*ny) factor.
pub fn idft2_direct(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (ny, nx) = a.dim();
    let scale = 1.0 / (nx * ny) as f64;
    Array2::from_shape_fn((ny, nx), |(iy, ix)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for ky in 0..ny {
            for kx in 0..nx {
                let phase = TAU
                    * (kx as f64 * ix as f64 / nx as f64 + ky as f64 * iy as f64 / ny as f64);
                acc += a[[ky, kx]] * Complex64::from_polar(1.0, phase);
            }
        }
        acc * scale
    })
}

/// Angular-spectrum propagation by explicit double sums, treating the grid
/// as one full period (no padding). Mirrors the per-bin transfer factor
/// with its own inline evaluation.
pub fn propagate_direct(field: &WaveField, z: f64, policy: EvanescentPolicy) -> WaveField {
    let g = *field.grid();
    let (ny, nx) = (g.ny, g.nx);
    let lambda = g.wavelength;
    let k0 = TAU / lambda;

    let mut spectrum = dft2_direct(field.samples());
    for ky in 0..ny {
        for kx in 0..nx {
            let fx = signed_bin(kx, nx) / (nx as f64 * g.pitch);
            let fy = signed_bin(ky, ny) / (ny as f64 * g.pitch);
            let s = 1.0 - (lambda * fx).powi(2) - (lambda * fy).powi(2);
            let h = if s >= 0.0 {
                Complex64::from_polar(1.0, k0 * z * s.sqrt())
            } else {
                match policy {
                    EvanescentPolicy::ZeroOut => Complex64::new(0.0, 0.0),
                    EvanescentPolicy::KeepDecaying => {
                        Complex64::new((-k0 * z.abs() * (-s).sqrt()).exp(), 0.0)
                    }
                }
            };
            spectrum[[ky, kx]] *= h;
        }
    }

    let samples = idft2_direct(&spectrum);
    WaveField::new(g, samples).expect("same grid")
}

fn signed_bin(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}
