//! Flat key=value run configuration covering every tunable default.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are
//! rejected, so typos fail loudly before any work starts.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::adam::AdamParams;
use crate::correcting::CorrectingTrainOptions;
use crate::error::{DonnError, Result};
use crate::grid::GridSpec;
use crate::loss::{PenaltyForm, SoftmaxParams};
use crate::network::{DetectorLayout, DetectorRegion, DiffractiveNetwork, NeuronPhysics};
use crate::propagation::{EvanescentPolicy, PropagationParams};
use crate::training::{PenaltySchedule, TrainMode, TrainOptions};
use crate::dataio::encode::EncodingSpec;

/// Detector placement: the scaled 3-4-3 default or explicit regions.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectorConfig {
    ThreeFourThree,
    Explicit(Vec<DetectorRegion>),
}

/// Every tunable in one place, with the documented defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub pitch_um: f64,
    pub wavelength_um: f64,

    pub layer_count: usize,
    /// Gaps input->L1, ..., Llast->detector. A single value repeats.
    pub distances_um: Vec<f64>,
    pub theta_max: f64,
    pub k_ratio: f64,
    pub detectors: DetectorConfig,

    pub pad_factor: usize,
    pub evanescent: EvanescentPolicy,

    pub upsample: usize,

    pub softmax_scale: f64,
    pub softmax_mean_normalize: bool,
    pub penalty_form: PenaltyForm,

    pub gamma_start: f64,
    pub gamma_max: f64,
    pub ramp_epochs: usize,
    pub hold_epochs: usize,

    pub train_mode: TrainMode,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub val_count: usize,
    pub seed: u64,
    /// Use only the first N training samples (0 = all).
    pub train_take: usize,

    pub correcting_epochs: usize,
    pub correcting_lr: f64,
    pub correcting_batch_size: usize,

    pub sweep_retrain_epochs: usize,
    /// Training samples used when retraining the correcting layer inside
    /// a sweep (keeps per-point cost bounded).
    pub sweep_retrain_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid_nx: 120,
            grid_ny: 120,
            pitch_um: 1.0,
            wavelength_um: 1.55,
            layer_count: 3,
            distances_um: vec![50.0; 4],
            theta_max: PI,
            k_ratio: 1.0,
            detectors: DetectorConfig::ThreeFourThree,
            pad_factor: 2,
            evanescent: EvanescentPolicy::ZeroOut,
            upsample: 4,
            softmax_scale: 10.0,
            softmax_mean_normalize: true,
            penalty_form: PenaltyForm::SmoothWell,
            gamma_start: -1e-3,
            gamma_max: 1e-1,
            ramp_epochs: 300,
            hold_epochs: 200,
            train_mode: TrainMode::Penalty,
            batch_size: 64,
            learning_rate: 1e-2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            val_count: 2000,
            seed: 42,
            train_take: 0,
            correcting_epochs: 100,
            correcting_lr: 1e-2,
            correcting_batch_size: 256,
            sweep_retrain_epochs: 20,
            sweep_retrain_samples: 10000,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid_nx, self.grid_ny, self.pitch_um, self.wavelength_um)
    }

    pub fn physics(&self) -> NeuronPhysics {
        NeuronPhysics {
            theta_max: self.theta_max,
            k_ratio: self.k_ratio,
        }
    }

    pub fn propagation(&self) -> PropagationParams {
        PropagationParams {
            pad_factor: self.pad_factor,
            policy: self.evanescent,
        }
    }

    pub fn encoding(&self) -> EncodingSpec {
        EncodingSpec {
            upsample: self.upsample,
        }
    }

    pub fn softmax(&self) -> SoftmaxParams {
        SoftmaxParams {
            scale: self.softmax_scale,
            mean_normalize: self.softmax_mean_normalize,
        }
    }

    pub fn schedule(&self) -> PenaltySchedule {
        PenaltySchedule {
            gamma_start: self.gamma_start,
            gamma_max: self.gamma_max,
            ramp_epochs: self.ramp_epochs,
            hold_epochs: self.hold_epochs,
        }
    }

    pub fn adam(&self) -> AdamParams {
        AdamParams {
            lr: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            mode: self.train_mode,
            batch_size: self.batch_size,
            adam: self.adam(),
            softmax: self.softmax(),
            penalty_form: self.penalty_form,
            seed: self.seed,
            val_count: self.val_count,
            warm_start: false,
        }
    }

    pub fn correcting_options(&self) -> CorrectingTrainOptions {
        CorrectingTrainOptions {
            epochs: self.correcting_epochs,
            batch_size: self.correcting_batch_size,
            adam: AdamParams {
                lr: self.correcting_lr,
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                eps: self.adam_eps,
            },
            softmax: self.softmax(),
            seed: self.seed,
            val_count: self.val_count,
        }
    }

    pub fn detector_layout(&self) -> DetectorLayout {
        match &self.detectors {
            DetectorConfig::ThreeFourThree => {
                let extent = (self.grid_nx as f64 * self.pitch_um)
                    .min(self.grid_ny as f64 * self.pitch_um);
                DetectorLayout::three_four_three(extent)
            }
            DetectorConfig::Explicit(regions) => DetectorLayout {
                regions: regions.clone(),
            },
        }
    }

    /// Fresh untrained network from this configuration.
    pub fn build_network(&self) -> Result<DiffractiveNetwork> {
        let grid = self.grid()?;
        let distances = if self.distances_um.len() == 1 {
            vec![self.distances_um[0]; self.layer_count + 1]
        } else {
            self.distances_um.clone()
        };
        DiffractiveNetwork::new(
            grid,
            self.layer_count,
            distances,
            self.physics(),
            self.detector_layout(),
            self.propagation(),
        )
    }

    /// Parse `key = value` text, starting from the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                DonnError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| DonnError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| DonnError::Config(format!("bad value for {key}: {value}")))
        }
        match key {
            "grid.nx" => self.grid_nx = num(key, value)?,
            "grid.ny" => self.grid_ny = num(key, value)?,
            "grid.pitch_um" => self.pitch_um = num(key, value)?,
            "grid.wavelength_um" => self.wavelength_um = num(key, value)?,
            "net.layers" => self.layer_count = num(key, value)?,
            "net.distances_um" => {
                self.distances_um = value
                    .split(',')
                    .map(|s| num("net.distances_um", s.trim()))
                    .collect::<Result<Vec<f64>>>()?;
            }
            "physics.theta" => self.theta_max = parse_angle(value)?,
            "physics.k_ratio" => self.k_ratio = num(key, value)?,
            "detectors.layout" => {
                self.detectors = if value == "three_four_three" {
                    DetectorConfig::ThreeFourThree
                } else {
                    let regions = value
                        .split(';')
                        .map(|triple| {
                            let parts: Vec<&str> = triple.split(':').collect();
                            if parts.len() != 3 {
                                return Err(DonnError::Config(format!(
                                    "detector region needs cx:cy:side, got {triple}"
                                )));
                            }
                            Ok(DetectorRegion {
                                cx: num("detectors.layout", parts[0])?,
                                cy: num("detectors.layout", parts[1])?,
                                side: num("detectors.layout", parts[2])?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    DetectorConfig::Explicit(regions)
                };
            }
            "propagation.pad_factor" => self.pad_factor = num(key, value)?,
            "propagation.evanescent" => {
                self.evanescent = match value {
                    "zero_out" => EvanescentPolicy::ZeroOut,
                    "keep_decaying" => EvanescentPolicy::KeepDecaying,
                    _ => {
                        return Err(DonnError::Config(format!(
                            "evanescent policy must be zero_out or keep_decaying, got {value}"
                        )))
                    }
                };
            }
            "encoding.upsample" => self.upsample = num(key, value)?,
            "loss.scale" => self.softmax_scale = num(key, value)?,
            "loss.mean_normalize" => self.softmax_mean_normalize = num(key, value)?,
            "penalty.form" => {
                self.penalty_form = match value {
                    "smooth_well" => PenaltyForm::SmoothWell,
                    "literal" => PenaltyForm::Literal,
                    _ => {
                        return Err(DonnError::Config(format!(
                            "penalty form must be smooth_well or literal, got {value}"
                        )))
                    }
                };
            }
            "schedule.gamma_start" => self.gamma_start = num(key, value)?,
            "schedule.gamma_max" => self.gamma_max = num(key, value)?,
            "schedule.ramp_epochs" => self.ramp_epochs = num(key, value)?,
            "schedule.hold_epochs" => self.hold_epochs = num(key, value)?,
            "train.mode" => {
                self.train_mode = match value {
                    "penalty" => TrainMode::Penalty,
                    "ste" => TrainMode::Ste,
                    _ => {
                        return Err(DonnError::Config(format!(
                            "train mode must be penalty or ste, got {value}"
                        )))
                    }
                };
            }
            "train.batch_size" => self.batch_size = num(key, value)?,
            "train.lr" => self.learning_rate = num(key, value)?,
            "train.beta1" => self.adam_beta1 = num(key, value)?,
            "train.beta2" => self.adam_beta2 = num(key, value)?,
            "train.eps" => self.adam_eps = num(key, value)?,
            "train.val_count" => self.val_count = num(key, value)?,
            "train.seed" => self.seed = num(key, value)?,
            "train.take" => self.train_take = num(key, value)?,
            "correcting.epochs" => self.correcting_epochs = num(key, value)?,
            "correcting.lr" => self.correcting_lr = num(key, value)?,
            "correcting.batch_size" => self.correcting_batch_size = num(key, value)?,
            "sweep.retrain_epochs" => self.sweep_retrain_epochs = num(key, value)?,
            "sweep.retrain_samples" => self.sweep_retrain_samples = num(key, value)?,
            _ => return Err(DonnError::Config(format!("unknown key: {key}"))),
        }
        Ok(())
    }

    /// Render every key; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "grid.nx = {}", self.grid_nx);
        let _ = writeln!(s, "grid.ny = {}", self.grid_ny);
        let _ = writeln!(s, "grid.pitch_um = {}", self.pitch_um);
        let _ = writeln!(s, "grid.wavelength_um = {}", self.wavelength_um);
        let _ = writeln!(s, "net.layers = {}", self.layer_count);
        let _ = writeln!(
            s,
            "net.distances_um = {}",
            self.distances_um
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(s, "physics.theta = {}", self.theta_max);
        let _ = writeln!(s, "physics.k_ratio = {}", self.k_ratio);
        match &self.detectors {
            DetectorConfig::ThreeFourThree => {
                let _ = writeln!(s, "detectors.layout = three_four_three");
            }
            DetectorConfig::Explicit(regions) => {
                let specs: Vec<String> = regions
                    .iter()
                    .map(|r| format!("{}:{}:{}", r.cx, r.cy, r.side))
                    .collect();
                let _ = writeln!(s, "detectors.layout = {}", specs.join(";"));
            }
        }
        let _ = writeln!(s, "propagation.pad_factor = {}", self.pad_factor);
        let _ = writeln!(
            s,
            "propagation.evanescent = {}",
            match self.evanescent {
                EvanescentPolicy::ZeroOut => "zero_out",
                EvanescentPolicy::KeepDecaying => "keep_decaying",
            }
        );
        let _ = writeln!(s, "encoding.upsample = {}", self.upsample);
        let _ = writeln!(s, "loss.scale = {}", self.softmax_scale);
        let _ = writeln!(s, "loss.mean_normalize = {}", self.softmax_mean_normalize);
        let _ = writeln!(
            s,
            "penalty.form = {}",
            match self.penalty_form {
                PenaltyForm::SmoothWell => "smooth_well",
                PenaltyForm::Literal => "literal",
            }
        );
        let _ = writeln!(s, "schedule.gamma_start = {}", self.gamma_start);
        let _ = writeln!(s, "schedule.gamma_max = {}", self.gamma_max);
        let _ = writeln!(s, "schedule.ramp_epochs = {}", self.ramp_epochs);
        let _ = writeln!(s, "schedule.hold_epochs = {}", self.hold_epochs);
        let _ = writeln!(
            s,
            "train.mode = {}",
            match self.train_mode {
                TrainMode::Penalty => "penalty",
                TrainMode::Ste => "ste",
            }
        );
        let _ = writeln!(s, "train.batch_size = {}", self.batch_size);
        let _ = writeln!(s, "train.lr = {}", self.learning_rate);
        let _ = writeln!(s, "train.beta1 = {}", self.adam_beta1);
        let _ = writeln!(s, "train.beta2 = {}", self.adam_beta2);
        let _ = writeln!(s, "train.eps = {}", self.adam_eps);
        let _ = writeln!(s, "train.val_count = {}", self.val_count);
        let _ = writeln!(s, "train.seed = {}", self.seed);
        let _ = writeln!(s, "train.take = {}", self.train_take);
        let _ = writeln!(s, "correcting.epochs = {}", self.correcting_epochs);
        let _ = writeln!(s, "correcting.lr = {}", self.correcting_lr);
        let _ = writeln!(s, "correcting.batch_size = {}", self.correcting_batch_size);
        let _ = writeln!(s, "sweep.retrain_epochs = {}", self.sweep_retrain_epochs);
        let _ = writeln!(s, "sweep.retrain_samples = {}", self.sweep_retrain_samples);
        s
    }
}

/// Angles accept plain radians or a `pi` suffix: `0.8pi`, `pi`, `1.2pi`.
pub fn parse_angle(value: &str) -> Result<f64> {
    let v = value.trim();
    if let Some(mult) = v.strip_suffix("pi") {
        let m = mult.trim();
        let factor: f64 = if m.is_empty() {
            1.0
        } else {
            m.parse()
                .map_err(|_| DonnError::Config(format!("bad angle: {value}")))?
        };
        Ok(factor * PI)
    } else {
        v.parse()
            .map_err(|_| DonnError::Config(format!("bad angle: {value}")))
    }
}
