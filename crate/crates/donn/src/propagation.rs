//! Free-space propagation between planes by the angular-spectrum method.
//!
//! A field is decomposed into plane waves with a forward transform, each
//! frequency bin is multiplied by the transfer factor
//! `H = exp(i k z sqrt(1 - (lambda fx)^2 - (lambda fy)^2))`, and the field
//! is recomposed. Bins with `(lambda fx)^2 + (lambda fy)^2 > 1` are
//! evanescent; they are zeroed by default or attenuated under
//! [`EvanescentPolicy::KeepDecaying`].
//!
//! Propagation is linear circular convolution on the (optionally padded)
//! grid. Zero-padding by `pad_factor` suppresses periodic wraparound; the
//! result is cropped back to the original window, which models light
//! leaving the finite aperture as lost.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, OnceLock, RwLock};

use ndarray::{s, Array2, Zip};
use num_complex::Complex64;

use crate::field::{fft2, ifft2, WaveField};
use crate::grid::{bin_frequency, GridSpec};

/// Handling of evanescent frequency bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvanescentPolicy {
    /// Discard evanescent content (default; preserves unitarity tests).
    ZeroOut,
    /// Keep it with the physical exponential decay over |z|.
    KeepDecaying,
}

/// Sampling hygiene knobs for [`propagate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationParams {
    /// Zero-padding multiple applied before the spectral step (>= 1).
    pub pad_factor: usize,
    pub policy: EvanescentPolicy,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            pad_factor: 2,
            policy: EvanescentPolicy::ZeroOut,
        }
    }
}

/// Frequency-domain transfer function of diffraction over distance `z` um.
/// Negative `z` means back-propagation.
pub fn transfer_function(
    grid: &GridSpec,
    z: f64,
    policy: EvanescentPolicy,
) -> Array2<Complex64> {
    let lambda = grid.wavelength;
    let k0 = TAU / lambda;
    Array2::from_shape_fn((grid.ny, grid.nx), |(ky, kx)| {
        let fx = bin_frequency(kx, grid.nx, grid.pitch);
        let fy = bin_frequency(ky, grid.ny, grid.pitch);
        let s = 1.0 - (lambda * fx).powi(2) - (lambda * fy).powi(2);
        if s >= 0.0 {
            Complex64::from_polar(1.0, k0 * z * s.sqrt())
        } else {
            match policy {
                EvanescentPolicy::ZeroOut => Complex64::new(0.0, 0.0),
                EvanescentPolicy::KeepDecaying => {
                    Complex64::new((-k0 * z.abs() * (-s).sqrt()).exp(), 0.0)
                }
            }
        }
    })
}

#[derive(PartialEq, Eq, Hash)]
struct TransferKey {
    nx: usize,
    ny: usize,
    pitch: u64,
    wavelength: u64,
    z: u64,
    policy: EvanescentPolicy,
}

fn transfer_cache() -> &'static RwLock<HashMap<TransferKey, Arc<Array2<Complex64>>>> {
    static CACHE: OnceLock<RwLock<HashMap<TransferKey, Arc<Array2<Complex64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Cached transfer function keyed by (grid, z, policy). Safe for
/// concurrent readers; population takes the write lock once per key.
pub fn transfer_function_cached(
    grid: &GridSpec,
    z: f64,
    policy: EvanescentPolicy,
) -> Arc<Array2<Complex64>> {
    let key = TransferKey {
        nx: grid.nx,
        ny: grid.ny,
        pitch: grid.pitch.to_bits(),
        wavelength: grid.wavelength.to_bits(),
        z: z.to_bits(),
        policy,
    };
    if let Some(h) = transfer_cache().read().expect("cache lock").get(&key) {
        return Arc::clone(h);
    }
    let h = Arc::new(transfer_function(grid, z, policy));
    let mut cache = transfer_cache().write().expect("cache lock");
    Arc::clone(cache.entry(key).or_insert(h))
}

/// Propagate a field over `z` um of free space.
///
/// `propagate(f, 0)` returns the field unchanged, and
/// `propagate(propagate(f, z1), z2)` matches `propagate(f, z1 + z2)` when
/// the padding keeps wraparound and aperture leakage negligible.
pub fn propagate(field: &WaveField, z: f64, params: &PropagationParams) -> WaveField {
    if z == 0.0 {
        return field.clone();
    }
    let g = *field.grid();
    let pad = params.pad_factor.max(1);

    if pad == 1 {
        let h = transfer_function_cached(&g, z, params.policy);
        let mut spectrum = field.spectrum();
        Zip::from(&mut spectrum).and(&*h).for_each(|s, &h| *s *= h);
        return WaveField::new(g, ifft2(&spectrum)).expect("same grid");
    }

    let (pny, pnx) = (g.ny * pad, g.nx * pad);
    let padded_grid = GridSpec::new(pnx, pny, g.pitch, g.wavelength).expect("valid padded grid");
    let (oy, ox) = ((pny - g.ny) / 2, (pnx - g.nx) / 2);

    let mut padded: Array2<Complex64> = Array2::zeros((pny, pnx));
    padded
        .slice_mut(s![oy..oy + g.ny, ox..ox + g.nx])
        .assign(field.samples());

    let mut spectrum = fft2(&padded);
    let h = transfer_function_cached(&padded_grid, z, params.policy);
    Zip::from(&mut spectrum).and(&*h).for_each(|s, &h| *s *= h);
    let out = ifft2(&spectrum);

    let cropped = out.slice(s![oy..oy + g.ny, ox..ox + g.nx]).to_owned();
    WaveField::new(g, cropped).expect("same grid")
}
