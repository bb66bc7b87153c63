//! The diffractive network: phase layers of binary PCM neurons, detector
//! readout, the geometry-to-physics model and error injection.

use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

use crate::error::{DonnError, Result};
use crate::field::WaveField;
use crate::grid::GridSpec;
use crate::phase::wrap_positive;
use crate::propagation::{propagate, PropagationParams};

/// Behavioural parameters of one optical neuron: the phase-shift
/// difference between crystalline and amorphous states and the ratio of
/// their power transmittances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronPhysics {
    /// Phase-shift difference in radians; pi at the design point.
    pub theta_max: f64,
    /// Crystalline/amorphous power-transmittance ratio; 1 at design.
    pub k_ratio: f64,
}

impl Default for NeuronPhysics {
    fn default() -> Self {
        Self {
            theta_max: PI,
            k_ratio: 1.0,
        }
    }
}

impl NeuronPhysics {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_max > 0.0 && self.theta_max < TAU) {
            return Err(DonnError::InvalidParameter(format!(
                "theta_max must lie in (0, 2pi), got {}",
                self.theta_max
            )));
        }
        if !(self.k_ratio > 0.0) {
            return Err(DonnError::InvalidParameter(format!(
                "k_ratio must be positive, got {}",
                self.k_ratio
            )));
        }
        Ok(())
    }

    /// Amplitude factor of the crystalline state relative to amorphous.
    pub fn crystalline_amplitude(&self) -> f64 {
        self.k_ratio.sqrt()
    }
}

/// Material state of a PCM neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeuronState {
    Amorphous,
    Crystalline,
}

/// Complex transmission coefficient of a neuron in the given state. The
/// amorphous state is the unit reference; the crystalline state carries
/// amplitude sqrt(K) and phase theta_max.
pub fn neuron_transmission(state: NeuronState, physics: &NeuronPhysics) -> Complex64 {
    match state {
        NeuronState::Amorphous => Complex64::new(1.0, 0.0),
        NeuronState::Crystalline => {
            Complex64::from_polar(physics.crystalline_amplitude(), physics.theta_max)
        }
    }
}

/// Physical cell geometry that determines (theta_max, k_ratio).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronGeometry {
    /// Etch depth in um.
    pub thickness: f64,
    /// Side length of the PCM fill in um.
    pub side: f64,
    /// Cell pitch in um.
    pub cell_pitch: f64,
    pub n_crystalline: f64,
    pub n_amorphous: f64,
    /// Background / cladding index.
    pub n_clad: f64,
    /// Wavelength in um.
    pub wavelength: f64,
}

impl Default for NeuronGeometry {
    fn default() -> Self {
        Self {
            thickness: 1.0,
            side: 0.8,
            cell_pitch: 1.0,
            n_crystalline: 3.28,
            n_amorphous: 4.05,
            n_clad: 1.444,
            wavelength: 1.55,
        }
    }
}

/// Thin-slab analytic estimate of the neuron physics from its geometry:
/// the two states differ by the optical path through the PCM fill,
/// `theta = 2 pi t (n_amorphous - n_crystalline) / lambda` wrapped to
/// [0, 2pi), and interface-reflection differences are neglected so K = 1.
pub fn slab_phase_model(geom: &NeuronGeometry) -> Result<NeuronPhysics> {
    if !(geom.thickness >= 0.0)
        || !(geom.side > 0.0)
        || !(geom.cell_pitch > 0.0)
        || !(geom.wavelength > 0.0)
        || !(geom.n_crystalline > 0.0)
        || !(geom.n_amorphous > 0.0)
        || !(geom.n_clad > 0.0)
    {
        return Err(DonnError::InvalidGeometry(format!("{geom:?}")));
    }
    if geom.side > geom.cell_pitch {
        return Err(DonnError::InvalidGeometry(format!(
            "side {} exceeds cell pitch {}",
            geom.side, geom.cell_pitch
        )));
    }
    let theta = wrap_positive(TAU * geom.thickness * (geom.n_amorphous - geom.n_crystalline)
        / geom.wavelength);
    Ok(NeuronPhysics {
        theta_max: theta,
        k_ratio: 1.0,
    })
}

/// One diffractive plane: per-neuron phases (radians) and amplitude
/// factors. Phases are real-valued during training and restricted to
/// {0, theta_max} after binarization.
#[derive(Debug, Clone)]
pub struct DiffractiveLayer {
    pub grid: GridSpec,
    pub phases: Array2<f64>,
    pub amplitudes: Array2<f64>,
}

impl DiffractiveLayer {
    /// All-amorphous layer: zero phase, unit amplitude.
    pub fn neutral(grid: GridSpec) -> Self {
        Self {
            grid,
            phases: Array2::zeros((grid.ny, grid.nx)),
            amplitudes: Array2::from_elem((grid.ny, grid.nx), 1.0),
        }
    }

    pub fn with_phases(grid: GridSpec, phases: Array2<f64>) -> Result<Self> {
        if phases.dim() != (grid.ny, grid.nx) {
            return Err(DonnError::GridMismatch(format!(
                "layer phases are {:?}, grid expects ({}, {})",
                phases.dim(),
                grid.ny,
                grid.nx
            )));
        }
        Ok(Self {
            grid,
            amplitudes: Array2::from_elem((grid.ny, grid.nx), 1.0),
            phases,
        })
    }

    /// Complex transmission coefficient of neuron (iy, ix).
    pub fn transmission(&self, iy: usize, ix: usize) -> Complex64 {
        Complex64::from_polar(self.amplitudes[[iy, ix]], self.phases[[iy, ix]])
    }
}

/// Elementwise product of the field with the layer transmission.
pub fn apply_layer(field: &WaveField, layer: &DiffractiveLayer) -> Result<WaveField> {
    if *field.grid() != layer.grid {
        return Err(DonnError::GridMismatch(
            "field and layer grids differ".into(),
        ));
    }
    let mut out = field.samples().clone();
    ndarray::Zip::from(&mut out)
        .and(&layer.phases)
        .and(&layer.amplitudes)
        .for_each(|s, &p, &a| *s *= Complex64::from_polar(a, p));
    WaveField::new(*field.grid(), out)
}

/// Square photodetector region, centre and side in um.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorRegion {
    pub cx: f64,
    pub cy: f64,
    pub side: f64,
}

impl DetectorRegion {
    /// Membership is half-open, [c - side/2, c + side/2), so touching
    /// regions never share a sample.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let h = self.side / 2.0;
        x >= self.cx - h && x < self.cx + h && y >= self.cy - h && y < self.cy + h
    }
}

/// Ten detector regions indexed by class.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorLayout {
    pub regions: Vec<DetectorRegion>,
}

impl DetectorLayout {
    /// Default layout: three rows of 3, 4 and 3 squares centred on the
    /// grid. For a 120 um extent this gives 10 um squares with 20 um row
    /// spacing and 10 um horizontal gaps; other extents scale in
    /// proportion. Classes run 0..=2 top row, 3..=6 middle, 7..=9 bottom.
    pub fn three_four_three(extent: f64) -> Self {
        let u = extent / 12.0;
        let side = u;
        let mut regions = Vec::with_capacity(10);
        for &(row_y, xs) in &[
            (-2.0 * u, &[-2.0 * u, 0.0, 2.0 * u][..]),
            (0.0, &[-3.0 * u, -1.0 * u, 1.0 * u, 3.0 * u][..]),
            (2.0 * u, &[-2.0 * u, 0.0, 2.0 * u][..]),
        ] {
            for &x in xs {
                regions.push(DetectorRegion {
                    cx: x,
                    cy: row_y,
                    side,
                });
            }
        }
        Self { regions }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.regions.len() != 10 {
            return Err(DonnError::InvalidParameter(format!(
                "detector layout needs 10 regions, got {}",
                self.regions.len()
            )));
        }
        let (hw, hh) = (grid.width() / 2.0, grid.height() / 2.0);
        for (i, r) in self.regions.iter().enumerate() {
            if r.side <= 0.0 {
                return Err(DonnError::InvalidParameter(format!(
                    "detector {i} has non-positive side"
                )));
            }
            let h = r.side / 2.0;
            if r.cx - h < -hw || r.cx + h > hw || r.cy - h < -hh || r.cy + h > hh {
                return Err(DonnError::InvalidParameter(format!(
                    "detector {i} extends outside the grid"
                )));
            }
        }
        for i in 0..self.regions.len() {
            for j in (i + 1)..self.regions.len() {
                let (a, b) = (&self.regions[i], &self.regions[j]);
                let overlap_x = (a.cx - b.cx).abs() < (a.side + b.side) / 2.0;
                let overlap_y = (a.cy - b.cy).abs() < (a.side + b.side) / 2.0;
                if overlap_x && overlap_y {
                    return Err(DonnError::InvalidParameter(format!(
                        "detectors {i} and {j} overlap"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Area-weighted detector powers: X_i = sum over samples whose centres
/// lie in region i of |s|^2 * pitch^2.
pub fn detect(field: &WaveField, layout: &DetectorLayout) -> [f64; 10] {
    let g = field.grid();
    let cell = g.pitch * g.pitch;
    let mut x = [0.0; 10];
    for ((iy, ix), v) in field.samples().indexed_iter() {
        let px = g.x_at(ix);
        let py = g.y_at(iy);
        for (i, r) in layout.regions.iter().enumerate() {
            if r.contains(px, py) {
                x[i] += v.norm_sqr() * cell;
                break;
            }
        }
    }
    x
}

/// Index of the largest detector reading; ties break to the lowest index.
pub fn classify(x: &[f64; 10]) -> usize {
    let mut best = 0;
    for i in 1..10 {
        if x[i] > x[best] {
            best = i;
        }
    }
    best
}

/// Perturbation applied to a trained network.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorSpec {
    /// Per-gap distance shifts in um; length must match `distances`.
    AxialShift(Vec<f64>),
    /// Replacement phase-shift difference theta' in radians.
    PhaseDifference(f64),
    /// Replacement transmittance ratio K'.
    TransmittanceRatio(f64),
    /// Perturbed geometry mapped through the slab phase model.
    Geometry(NeuronGeometry),
}

/// Intermediate fields of one forward pass, kept for training and export.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Field arriving at each layer (before the layer multiply).
    pub arriving: Vec<WaveField>,
    /// Field at the detector plane.
    pub detector_field: WaveField,
    /// Detector powers.
    pub x: [f64; 10],
}

/// Ordered stack of diffractive layers with inter-plane distances,
/// neuron physics, detector layout and propagation settings.
#[derive(Debug, Clone)]
pub struct DiffractiveNetwork {
    pub layers: Vec<DiffractiveLayer>,
    /// Gaps in um: input->L1, L1->L2, ..., Llast->detector.
    pub distances: Vec<f64>,
    pub physics: NeuronPhysics,
    pub detectors: DetectorLayout,
    pub propagation: PropagationParams,
    /// True once every phase is exactly 0 or theta_max.
    pub binarized: bool,
}

impl DiffractiveNetwork {
    pub fn new(
        grid: GridSpec,
        layer_count: usize,
        distances: Vec<f64>,
        physics: NeuronPhysics,
        detectors: DetectorLayout,
        propagation: PropagationParams,
    ) -> Result<Self> {
        if layer_count == 0 {
            return Err(DonnError::InvalidParameter("need at least one layer".into()));
        }
        if distances.len() != layer_count + 1 {
            return Err(DonnError::InvalidParameter(format!(
                "{} layers need {} distances, got {}",
                layer_count,
                layer_count + 1,
                distances.len()
            )));
        }
        if distances.iter().any(|d| !(*d > 0.0)) {
            return Err(DonnError::InvalidParameter(
                "all inter-plane distances must be positive".into(),
            ));
        }
        physics.validate()?;
        detectors.validate(&grid)?;
        let layers = (0..layer_count)
            .map(|_| DiffractiveLayer::neutral(grid))
            .collect();
        Ok(Self {
            layers,
            distances,
            physics,
            detectors,
            propagation,
            binarized: false,
        })
    }

    /// Default-geometry network: square grid, uniform gaps, scaled 3-4-3
    /// detector layout.
    pub fn uniform(
        grid: GridSpec,
        layer_count: usize,
        gap: f64,
        physics: NeuronPhysics,
        propagation: PropagationParams,
    ) -> Result<Self> {
        let detectors = DetectorLayout::three_four_three(grid.width().min(grid.height()));
        Self::new(
            grid,
            layer_count,
            vec![gap; layer_count + 1],
            physics,
            detectors,
            propagation,
        )
    }

    pub fn grid(&self) -> &GridSpec {
        &self.layers[0].grid
    }

    /// Full forward pass keeping the per-layer arriving fields.
    pub fn forward_trace(&self, input: &WaveField) -> Result<ForwardTrace> {
        if input.grid() != self.grid() {
            return Err(DonnError::GridMismatch(
                "input grid does not match network grid".into(),
            ));
        }
        let mut arriving = Vec::with_capacity(self.layers.len());
        let mut field = propagate(input, self.distances[0], &self.propagation);
        for (l, layer) in self.layers.iter().enumerate() {
            arriving.push(field.clone());
            field = apply_layer(&field, layer)?;
            field = propagate(&field, self.distances[l + 1], &self.propagation);
        }
        let x = detect(&field, &self.detectors);
        Ok(ForwardTrace {
            arriving,
            detector_field: field,
            x,
        })
    }

    /// Detector powers and output field for one input.
    pub fn forward(&self, input: &WaveField) -> Result<([f64; 10], WaveField)> {
        let trace = self.forward_trace(input)?;
        Ok((trace.x, trace.detector_field))
    }

    /// Copy with a perturbation applied; `self` is untouched.
    pub fn inject_error(&self, spec: &ErrorSpec) -> Result<Self> {
        let mut net = self.clone();
        match spec {
            ErrorSpec::AxialShift(shifts) => {
                if shifts.len() != net.distances.len() {
                    return Err(DonnError::InvalidParameter(format!(
                        "axial shift needs {} entries, got {}",
                        net.distances.len(),
                        shifts.len()
                    )));
                }
                for (d, s) in net.distances.iter_mut().zip(shifts) {
                    *d += s;
                    if !(*d > 0.0) {
                        return Err(DonnError::InvalidParameter(format!(
                            "perturbed distance {d} is not positive"
                        )));
                    }
                }
            }
            ErrorSpec::PhaseDifference(theta_new) => {
                let physics = NeuronPhysics {
                    theta_max: *theta_new,
                    k_ratio: net.physics.k_ratio,
                };
                net.reexpress_binary_states(physics)?;
            }
            ErrorSpec::TransmittanceRatio(k_new) => {
                let physics = NeuronPhysics {
                    theta_max: net.physics.theta_max,
                    k_ratio: *k_new,
                };
                net.reexpress_binary_states(physics)?;
            }
            ErrorSpec::Geometry(geom) => {
                let physics = slab_phase_model(geom)?;
                net.reexpress_binary_states(physics)?;
            }
        }
        Ok(net)
    }

    /// Rewrite every crystalline neuron with new physics. Requires a
    /// binarized network, where "crystalline" is well defined.
    fn reexpress_binary_states(&mut self, physics: NeuronPhysics) -> Result<()> {
        if !self.binarized {
            return Err(DonnError::InvalidParameter(
                "neuron-state errors apply to binarized networks only".into(),
            ));
        }
        physics.validate()?;
        let old_theta = self.physics.theta_max;
        let amp = physics.crystalline_amplitude();
        for layer in &mut self.layers {
            ndarray::Zip::from(&mut layer.phases)
                .and(&mut layer.amplitudes)
                .for_each(|p, a| {
                    // Binarized phases are exactly 0 or old_theta.
                    if *p == old_theta {
                        *p = physics.theta_max;
                        *a = amp;
                    } else {
                        *a = 1.0;
                    }
                });
        }
        self.physics = physics;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::EvanescentPolicy;
    use ndarray::Array2;
    use num_complex::Complex64;

    fn small_grid() -> GridSpec {
        GridSpec::square(16, 1.0, 1.55).unwrap()
    }

    fn gaussian_input(grid: GridSpec) -> WaveField {
        let samples = Array2::from_shape_fn((grid.ny, grid.nx), |(iy, ix)| {
            let x = grid.x_at(ix) / 4.0;
            let y = grid.y_at(iy) / 4.0;
            Complex64::new((-(x * x + y * y)).exp(), 0.0)
        });
        WaveField::new(grid, samples).unwrap().normalized_power()
    }

    #[test]
    fn transmission_reference_states() {
        let physics = NeuronPhysics::default();
        assert_eq!(
            neuron_transmission(NeuronState::Amorphous, &physics),
            Complex64::new(1.0, 0.0)
        );
        let c = neuron_transmission(NeuronState::Crystalline, &physics);
        assert!((c - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn transmission_scales_with_k_and_theta() {
        let physics = NeuronPhysics {
            theta_max: 0.8 * PI,
            k_ratio: 1.21,
        };
        let c = neuron_transmission(NeuronState::Crystalline, &physics);
        let expect = Complex64::from_polar(1.1, 0.8 * PI);
        assert!((c - expect).norm() < 1e-12);
    }

    #[test]
    fn identity_layer_preserves_field() {
        let g = small_grid();
        let f = gaussian_input(g);
        let out = apply_layer(&f, &DiffractiveLayer::neutral(g)).unwrap();
        for (a, b) in f.samples().iter().zip(out.samples().iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pi_layer_negates_field() {
        let g = small_grid();
        let f = gaussian_input(g);
        let layer =
            DiffractiveLayer::with_phases(g, Array2::from_elem((g.ny, g.nx), PI)).unwrap();
        let out = apply_layer(&f, &layer).unwrap();
        for (a, b) in f.samples().iter().zip(out.samples().iter()) {
            assert!((a + b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_neuron_quarter_phase() {
        let g = small_grid();
        let f = WaveField::constant(g, Complex64::new(1.0, 0.0));
        let mut phases = Array2::zeros((g.ny, g.nx));
        phases[[3, 5]] = PI / 2.0;
        let layer = DiffractiveLayer::with_phases(g, phases).unwrap();
        let out = apply_layer(&f, &layer).unwrap();
        for ((iy, ix), v) in out.samples().indexed_iter() {
            if iy == 3 && ix == 5 {
                assert!((v - Complex64::new(0.0, 1.0)).norm() < 1e-15);
            } else {
                assert_eq!(*v, Complex64::new(1.0, 0.0));
            }
        }
    }

    #[test]
    fn layer_conserves_power_at_unit_amplitude() {
        let g = small_grid();
        let f = gaussian_input(g);
        let phases = Array2::from_shape_fn((g.ny, g.nx), |(iy, ix)| {
            ((iy * 31 + ix * 17) % 7) as f64 - 3.0
        });
        let layer = DiffractiveLayer::with_phases(g, phases).unwrap();
        let out = apply_layer(&f, &layer).unwrap();
        assert!((out.total_power() - f.total_power()).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let g = small_grid();
        let other = GridSpec::square(8, 1.0, 1.55).unwrap();
        let f = WaveField::zeros(other);
        assert!(apply_layer(&f, &DiffractiveLayer::neutral(g)).is_err());
    }

    #[test]
    fn default_layout_is_valid_and_spec_positioned() {
        let g = GridSpec::default();
        let layout = DetectorLayout::three_four_three(120.0);
        layout.validate(&g).unwrap();
        assert_eq!(layout.regions.len(), 10);
        assert_eq!(layout.regions[0].cy, -20.0);
        assert_eq!(layout.regions[3].cx, -30.0);
        assert_eq!(layout.regions[6].cx, 30.0);
        assert_eq!(layout.regions[9].cy, 20.0);
        assert_eq!(layout.regions[0].side, 10.0);
    }

    #[test]
    fn detect_uniform_field_equal_regions() {
        let g = GridSpec::default();
        let layout = DetectorLayout::three_four_three(120.0);
        let f = WaveField::constant(g, Complex64::new(0.3, 0.4));
        let x = detect(&f, &layout);
        for i in 1..10 {
            assert!((x[i] - x[0]).abs() < 1e-12);
        }
        // 10x10 samples of |0.3+0.4i|^2 = 0.25 each.
        assert!((x[0] - 100.0 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn detect_zero_field_is_zero() {
        let g = GridSpec::default();
        let layout = DetectorLayout::three_four_three(120.0);
        assert_eq!(detect(&WaveField::zeros(g), &layout), [0.0; 10]);
    }

    #[test]
    fn detect_disjoint_support() {
        let g = GridSpec::default();
        let layout = DetectorLayout::three_four_three(120.0);
        let r3 = layout.regions[3];
        let mut samples: Array2<Complex64> = Array2::zeros((g.ny, g.nx));
        for ((iy, ix), v) in samples.indexed_iter_mut() {
            if r3.contains(g.x_at(ix), g.y_at(iy)) {
                *v = Complex64::new(2.0, 0.0);
            }
        }
        let f = WaveField::new(g, samples).unwrap();
        let x = detect(&f, &layout);
        for (i, xi) in x.iter().enumerate() {
            if i == 3 {
                assert!((xi - f.total_power()).abs() < 1e-12);
            } else {
                assert_eq!(*xi, 0.0);
            }
        }
    }

    #[test]
    fn classify_rules() {
        let mut onehot = [0.0; 10];
        onehot[7] = 1.0;
        assert_eq!(classify(&onehot), 7);
        assert_eq!(classify(&[0.5; 10]), 0);
        let mut x = [0.05; 10];
        x[0] = 0.1;
        x[1] = 0.9;
        assert_eq!(classify(&x), 1);
    }

    #[test]
    fn slab_model_matches_design_point() {
        let physics = slab_phase_model(&NeuronGeometry::default()).unwrap();
        // 2 pi * 1 um * 0.77 / 1.55 um = 0.99355 pi, i.e. about pi.
        assert!((physics.theta_max - 2.0 * PI * 0.77 / 1.55).abs() < 1e-12);
        assert!((physics.theta_max / PI - 0.99355).abs() < 1e-4);
        assert_eq!(physics.k_ratio, 1.0);
    }

    #[test]
    fn slab_model_is_linear_in_thickness() {
        let mut geom = NeuronGeometry::default();
        geom.thickness = 0.0;
        assert_eq!(slab_phase_model(&geom).unwrap().theta_max, 0.0);
        geom.thickness = 1.05;
        let t105 = slab_phase_model(&geom).unwrap().theta_max;
        assert!((t105 / PI - 1.05 * 0.99355).abs() < 1e-4);
        geom.thickness = 1.0;
        let t1 = slab_phase_model(&geom).unwrap().theta_max;
        geom.thickness = 2.0;
        let t2 = slab_phase_model(&geom).unwrap().theta_max;
        assert!((t2 - wrap_positive(2.0 * t1)).abs() < 1e-12);
    }

    #[test]
    fn slab_model_rejects_bad_geometry() {
        let mut geom = NeuronGeometry::default();
        geom.side = 1.2;
        assert!(slab_phase_model(&geom).is_err());
    }

    fn binarized_test_net() -> DiffractiveNetwork {
        let g = small_grid();
        let mut net = DiffractiveNetwork::uniform(
            g,
            2,
            20.0,
            NeuronPhysics::default(),
            PropagationParams {
                pad_factor: 1,
                policy: EvanescentPolicy::ZeroOut,
            },
        )
        .unwrap();
        for (l, layer) in net.layers.iter_mut().enumerate() {
            for ((iy, ix), p) in layer.phases.indexed_iter_mut() {
                if (iy + ix + l) % 2 == 0 {
                    *p = PI;
                }
            }
        }
        net.binarized = true;
        net
    }

    #[test]
    fn forward_zero_input_gives_zero_powers() {
        let net = binarized_test_net();
        let (x, _) = net.forward(&WaveField::zeros(*net.grid())).unwrap();
        assert_eq!(x, [0.0; 10]);
    }

    #[test]
    fn forward_powers_scale_quadratically() {
        let net = binarized_test_net();
        let f = gaussian_input(*net.grid());
        let scaled = WaveField::new(
            *net.grid(),
            f.samples().mapv(|c| c * Complex64::new(0.0, 2.0)),
        )
        .unwrap();
        let (x1, _) = net.forward(&f).unwrap();
        let (x2, _) = net.forward(&scaled).unwrap();
        for i in 0..10 {
            assert!((x2[i] - 4.0 * x1[i]).abs() < 1e-9 * x1[i].max(1.0));
        }
    }

    #[test]
    fn forward_matches_hand_chained_modules() {
        let g = small_grid();
        let net = DiffractiveNetwork::uniform(
            g,
            3,
            20.0,
            NeuronPhysics::default(),
            PropagationParams::default(),
        )
        .unwrap();
        let input = gaussian_input(g);
        let (x, _) = net.forward(&input).unwrap();

        let p = &net.propagation;
        let mut f = propagate(&input, 20.0, p);
        for layer in &net.layers {
            f = apply_layer(&f, layer).unwrap();
            f = propagate(&f, 20.0, p);
        }
        let expect = detect(&f, &net.detectors);
        for i in 0..10 {
            assert!((x[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn inject_null_axial_shift_is_identity() {
        let net = binarized_test_net();
        let f = gaussian_input(*net.grid());
        let shifted = net.inject_error(&ErrorSpec::AxialShift(vec![0.0; 3])).unwrap();
        let (x0, _) = net.forward(&f).unwrap();
        let (x1, _) = shifted.forward(&f).unwrap();
        assert_eq!(x0, x1);
    }

    #[test]
    fn inject_same_theta_is_noop() {
        let net = binarized_test_net();
        let f = gaussian_input(*net.grid());
        let same = net.inject_error(&ErrorSpec::PhaseDifference(PI)).unwrap();
        let (x0, _) = net.forward(&f).unwrap();
        let (x1, _) = same.forward(&f).unwrap();
        for i in 0..10 {
            assert!((x0[i] - x1[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn inject_k_ratio_rescales_crystalline_amplitudes() {
        let net = binarized_test_net();
        let k_new = 1.2;
        let hit = net
            .inject_error(&ErrorSpec::TransmittanceRatio(k_new))
            .unwrap();
        let amp = k_new.sqrt();
        for (layer, orig) in hit.layers.iter().zip(net.layers.iter()) {
            for ((iy, ix), a) in layer.amplitudes.indexed_iter() {
                if orig.phases[[iy, ix]] == PI {
                    assert!((a - amp).abs() < 1e-15);
                } else {
                    assert_eq!(*a, 1.0);
                }
            }
        }
    }

    #[test]
    fn inject_error_round_trip_restores_outputs() {
        let net = binarized_test_net();
        let f = gaussian_input(*net.grid());
        let (x0, _) = net.forward(&f).unwrap();

        let perturbed = net
            .inject_error(&ErrorSpec::AxialShift(vec![0.7, -0.3, 0.2]))
            .unwrap();
        let restored = perturbed
            .inject_error(&ErrorSpec::AxialShift(vec![-0.7, 0.3, -0.2]))
            .unwrap();
        let (x1, _) = restored.forward(&f).unwrap();
        for i in 0..10 {
            assert!((x0[i] - x1[i]).abs() < 1e-10);
        }

        let hit = net
            .inject_error(&ErrorSpec::PhaseDifference(0.8 * PI))
            .unwrap();
        let back = hit.inject_error(&ErrorSpec::PhaseDifference(PI)).unwrap();
        let (x2, _) = back.forward(&f).unwrap();
        for i in 0..10 {
            assert!((x0[i] - x2[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn inject_error_rejects_nonpositive_distance() {
        let net = binarized_test_net();
        assert!(net
            .inject_error(&ErrorSpec::AxialShift(vec![-25.0, 0.0, 0.0]))
            .is_err());
    }

    #[test]
    fn neuron_state_errors_require_binarized_network() {
        let g = small_grid();
        let net = DiffractiveNetwork::uniform(
            g,
            1,
            20.0,
            NeuronPhysics::default(),
            PropagationParams::default(),
        )
        .unwrap();
        assert!(net.inject_error(&ErrorSpec::PhaseDifference(0.9 * PI)).is_err());
    }
}
