//! Binary persistence of networks and correcting layers.
//!
//! Layout (all multi-byte payload values little-endian):
//!
//! ```text
//! "RODN"  magic, 4 bytes
//! u8      format version (1)
//! u32     nx, u32 ny
//! f64     pitch um, f64 wavelength um
//! u32     layer count L
//! f64*(L+1) distances um
//! f64     theta_max, f64 k_ratio
//! u32     detector region count (10), then per region f64 cx, cy, side
//! u32     pad_factor, u8 evanescent policy (0 zero-out, 1 keep-decaying)
//! u8      binarized flag, u8 correcting-layer flag
//! f64*L*ny*nx  phases, row-major per layer
//! f64*100 correcting matrix W, row-major (only when flagged)
//! ```
//!
//! Amplitudes are reconstructed on load: crystalline neurons (phase equal
//! to theta_max) carry sqrt(k_ratio), everything else 1.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::correcting::CorrectingLayer;
use crate::error::{DonnError, Result};
use crate::grid::GridSpec;
use crate::network::{DetectorLayout, DetectorRegion, DiffractiveLayer, DiffractiveNetwork, NeuronPhysics};
use crate::propagation::{EvanescentPolicy, PropagationParams};

pub const MAGIC: &[u8; 4] = b"RODN";
pub const VERSION: u8 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() < self.pos + n {
            return Err(DonnError::Format(format!(
                "file truncated at byte {} while reading {what}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

fn push_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Serialize a network (and optional correcting layer) to bytes.
pub fn network_to_bytes(net: &DiffractiveNetwork, correcting: Option<&CorrectingLayer>) -> Vec<u8> {
    let grid = net.grid();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(grid.nx as u32).to_le_bytes());
    out.extend_from_slice(&(grid.ny as u32).to_le_bytes());
    push_f64(&mut out, grid.pitch);
    push_f64(&mut out, grid.wavelength);
    out.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
    for d in &net.distances {
        push_f64(&mut out, *d);
    }
    push_f64(&mut out, net.physics.theta_max);
    push_f64(&mut out, net.physics.k_ratio);
    out.extend_from_slice(&(net.detectors.regions.len() as u32).to_le_bytes());
    for r in &net.detectors.regions {
        push_f64(&mut out, r.cx);
        push_f64(&mut out, r.cy);
        push_f64(&mut out, r.side);
    }
    out.extend_from_slice(&(net.propagation.pad_factor as u32).to_le_bytes());
    out.push(match net.propagation.policy {
        EvanescentPolicy::ZeroOut => 0,
        EvanescentPolicy::KeepDecaying => 1,
    });
    out.push(net.binarized as u8);
    out.push(correcting.is_some() as u8);
    for layer in &net.layers {
        for p in layer.phases.iter() {
            push_f64(&mut out, *p);
        }
    }
    if let Some(c) = correcting {
        for v in c.w.iter() {
            push_f64(&mut out, *v);
        }
    }
    out
}

/// Parse bytes produced by [`network_to_bytes`].
pub fn network_from_bytes(bytes: &[u8]) -> Result<(DiffractiveNetwork, Option<CorrectingLayer>)> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(DonnError::Format(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(DonnError::Format(format!(
            "unsupported format version {version}"
        )));
    }
    let nx = r.u32("nx")? as usize;
    let ny = r.u32("ny")? as usize;
    let pitch = r.f64("pitch")?;
    let wavelength = r.f64("wavelength")?;
    let grid = GridSpec::new(nx, ny, pitch, wavelength)?;

    let layer_count = r.u32("layer count")? as usize;
    if layer_count == 0 || layer_count > 1024 {
        return Err(DonnError::Format(format!(
            "implausible layer count {layer_count}"
        )));
    }
    let mut distances = Vec::with_capacity(layer_count + 1);
    for i in 0..=layer_count {
        distances.push(r.f64(&format!("distance {i}"))?);
    }
    let physics = NeuronPhysics {
        theta_max: r.f64("theta_max")?,
        k_ratio: r.f64("k_ratio")?,
    };
    let region_count = r.u32("detector count")? as usize;
    if region_count != 10 {
        return Err(DonnError::Format(format!(
            "expected 10 detector regions, file declares {region_count}"
        )));
    }
    let mut regions = Vec::with_capacity(region_count);
    for i in 0..region_count {
        regions.push(DetectorRegion {
            cx: r.f64(&format!("detector {i} cx"))?,
            cy: r.f64(&format!("detector {i} cy"))?,
            side: r.f64(&format!("detector {i} side"))?,
        });
    }
    let pad_factor = r.u32("pad factor")? as usize;
    let policy = match r.u8("evanescent policy")? {
        0 => EvanescentPolicy::ZeroOut,
        1 => EvanescentPolicy::KeepDecaying,
        p => {
            return Err(DonnError::Format(format!(
                "unknown evanescent policy byte {p}"
            )))
        }
    };
    let binarized = match r.u8("binarized flag")? {
        0 => false,
        1 => true,
        b => return Err(DonnError::Format(format!("bad binarized flag {b}"))),
    };
    let has_correcting = match r.u8("correcting flag")? {
        0 => false,
        1 => true,
        b => return Err(DonnError::Format(format!("bad correcting flag {b}"))),
    };

    let amp = physics.crystalline_amplitude();
    let mut layers = Vec::with_capacity(layer_count);
    for l in 0..layer_count {
        let mut phases = Array2::zeros((ny, nx));
        for iy in 0..ny {
            for ix in 0..nx {
                let p = r.f64(&format!("layer {l} phase ({iy},{ix})"))?;
                if binarized && p != 0.0 && p != physics.theta_max {
                    return Err(DonnError::Format(format!(
                        "binary-flagged file has phase {p} outside {{0, {}}} in layer {l}",
                        physics.theta_max
                    )));
                }
                phases[[iy, ix]] = p;
            }
        }
        let mut layer = DiffractiveLayer::with_phases(grid, phases)?;
        if binarized {
            ndarray::Zip::from(&mut layer.amplitudes)
                .and(&layer.phases)
                .for_each(|a, &p| {
                    *a = if p == physics.theta_max && p != 0.0 { amp } else { 1.0 };
                });
        }
        layers.push(layer);
    }

    let correcting = if has_correcting {
        let mut w = Array2::zeros((10, 10));
        for i in 0..10 {
            for j in 0..10 {
                w[[i, j]] = r.f64(&format!("correcting W ({i},{j})"))?;
            }
        }
        Some(CorrectingLayer { w })
    } else {
        None
    };

    if r.pos != bytes.len() {
        return Err(DonnError::Format(format!(
            "{} trailing bytes after byte {}",
            bytes.len() - r.pos,
            r.pos
        )));
    }

    physics.validate()?;
    let detectors = DetectorLayout { regions };
    detectors.validate(&grid)?;
    if distances.iter().any(|d| !(*d > 0.0)) {
        return Err(DonnError::Format("non-positive distance in file".into()));
    }

    let net = DiffractiveNetwork {
        layers,
        distances,
        physics,
        detectors,
        propagation: PropagationParams { pad_factor, policy },
        binarized,
    };
    Ok((net, correcting))
}

pub fn save_network(
    net: &DiffractiveNetwork,
    correcting: Option<&CorrectingLayer>,
    path: &Path,
) -> Result<()> {
    fs::write(path, network_to_bytes(net, correcting))?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<(DiffractiveNetwork, Option<CorrectingLayer>)> {
    network_from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sample_net(binarized: bool) -> DiffractiveNetwork {
        let grid = GridSpec::square(24, 1.0, 1.55).unwrap();
        let mut net = DiffractiveNetwork::uniform(
            grid,
            3,
            50.0,
            NeuronPhysics::default(),
            PropagationParams::default(),
        )
        .unwrap();
        for (l, layer) in net.layers.iter_mut().enumerate() {
            for ((iy, ix), p) in layer.phases.indexed_iter_mut() {
                *p = if binarized {
                    if (iy * 7 + ix * 3 + l) % 2 == 0 {
                        PI
                    } else {
                        0.0
                    }
                } else {
                    ((iy * 13 + ix * 5 + l) % 11) as f64 / 3.0 - 1.5
                };
            }
        }
        net.binarized = binarized;
        net
    }

    #[test]
    fn round_trip_preserves_everything() {
        for binarized in [false, true] {
            let net = sample_net(binarized);
            let correcting = CorrectingLayer::identity();
            let bytes = network_to_bytes(&net, Some(&correcting));
            let (back, c2) = network_from_bytes(&bytes).unwrap();
            assert_eq!(back.layers.len(), net.layers.len());
            assert_eq!(back.distances, net.distances);
            assert_eq!(back.physics, net.physics);
            assert_eq!(back.binarized, net.binarized);
            assert_eq!(back.detectors, net.detectors);
            assert_eq!(back.propagation, net.propagation);
            for (a, b) in back.layers.iter().zip(net.layers.iter()) {
                assert_eq!(a.phases, b.phases, "bit-identical phases");
                assert_eq!(a.amplitudes, b.amplitudes);
            }
            assert_eq!(c2.unwrap().w, CorrectingLayer::identity().w);
        }
    }

    #[test]
    fn no_correcting_round_trip() {
        let net = sample_net(true);
        let bytes = network_to_bytes(&net, None);
        let (_, c) = network_from_bytes(&bytes).unwrap();
        assert!(c.is_none());
    }

    #[test]
    fn truncation_reports_offset() {
        let net = sample_net(true);
        let bytes = network_to_bytes(&net, None);
        let err = network_from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("truncated at byte"), "{msg}");
    }

    #[test]
    fn bad_magic_rejected() {
        let net = sample_net(false);
        let mut bytes = network_to_bytes(&net, None);
        bytes[0] = b'X';
        assert!(network_from_bytes(&bytes).is_err());
    }

    #[test]
    fn binary_flag_with_loose_weights_rejected() {
        let net = sample_net(true);
        let mut bytes = network_to_bytes(&net, None);
        // Overwrite the first phase with a non-binary value.
        let offset = bytes.len() - 3 * 24 * 24 * 8;
        bytes[offset..offset + 8].copy_from_slice(&0.5f64.to_le_bytes());
        let err = network_from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");
    }
}
