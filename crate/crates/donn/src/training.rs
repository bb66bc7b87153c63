//! Training of the optical section.
//!
//! Gradients flow through an explicit adjoint of the forward model. With
//! `A = dL/d(conj(field))` seeded at the detector plane, the adjoint of a
//! propagation over z is a propagation over -z (conjugated transfer
//! function), the adjoint of a layer multiply is the conjugated
//! transmission, and each phase gradient is the pointwise Wirtinger term
//! `dL/dtheta_i = 2 Im(A_i conj(w_i))` where `w` is the layer output. The
//! result matches central finite differences; see the gradient tests and
//! the acceptance suite.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::adam::{Adam, AdamParams};
use crate::dataio::encode::{encode_image, EncodingSpec};
use crate::dataio::idx::Dataset;
use crate::error::{DonnError, Result};
use crate::field::WaveField;
use crate::loss::{
    cross_entropy, penalty_grad, penalty_total, softmax, PenaltyForm, SoftmaxParams,
};
use crate::network::{apply_layer, classify, DiffractiveNetwork};
use crate::phase::wrap;
use crate::propagation::propagate;

/// Piecewise-linear penalty coefficient: from `gamma_start` (negative,
/// spreading weights toward the binarization thresholds) up to
/// `gamma_max` over `ramp_epochs`, then held for `hold_epochs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySchedule {
    pub gamma_start: f64,
    pub gamma_max: f64,
    pub ramp_epochs: usize,
    pub hold_epochs: usize,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            gamma_start: -1e-3,
            gamma_max: 1e-1,
            ramp_epochs: 300,
            hold_epochs: 200,
        }
    }
}

impl PenaltySchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_start < 0.0 && self.gamma_max > 0.0) {
            return Err(DonnError::InvalidParameter(format!(
                "penalty schedule needs gamma_start < 0 < gamma_max, got {} and {}",
                self.gamma_start, self.gamma_max
            )));
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.ramp_epochs + self.hold_epochs
    }

    /// Coefficient for a given epoch index.
    pub fn gamma_at(&self, epoch: usize) -> f64 {
        if epoch >= self.ramp_epochs || self.ramp_epochs <= 1 {
            return self.gamma_max;
        }
        let t = epoch as f64 / (self.ramp_epochs - 1) as f64;
        self.gamma_start + (self.gamma_max - self.gamma_start) * t
    }
}

/// Binarizing function: 0 on (-(pi - theta/2), theta/2], else theta.
pub fn binarize_phase(theta: f64, theta_max: f64) -> f64 {
    let w = wrap(theta);
    if w > -(PI - theta_max / 2.0) && w <= theta_max / 2.0 {
        0.0
    } else {
        theta_max
    }
}

pub fn binarize_phases(phases: &Array2<f64>, theta_max: f64) -> Array2<f64> {
    phases.mapv(|t| binarize_phase(t, theta_max))
}

/// Copy of the network with every phase snapped to {0, theta_max},
/// crystalline amplitudes set to sqrt(k_ratio) and the binary flag set.
pub fn binarize_network(net: &DiffractiveNetwork) -> DiffractiveNetwork {
    let mut out = net.clone();
    let theta = net.physics.theta_max;
    let amp = net.physics.crystalline_amplitude();
    for layer in &mut out.layers {
        layer.phases = binarize_phases(&layer.phases, theta);
        ndarray::Zip::from(&mut layer.amplitudes)
            .and(&layer.phases)
            .for_each(|a, &p| *a = if p == theta { amp } else { 1.0 });
    }
    out.binarized = true;
    out
}

/// Per-sample gradient of the data term (mean cross-entropy contribution).
#[derive(Debug, Clone)]
pub struct SampleGrad {
    pub ce: f64,
    pub x: [f64; 10],
    pub predicted: usize,
    pub grads: Vec<Array2<f64>>,
}

/// d(cross-entropy о softmax о logit shaping)/dX.
fn loss_grad_wrt_x(
    x: &[f64; 10],
    label: usize,
    params: &SoftmaxParams,
) -> ([f64; 10], f64, [f64; 10]) {
    let y = softmax(x, params);
    let ce = cross_entropy(&y, label);
    let mut dx = [0.0; 10];
    if y[label] <= crate::loss::CE_FLOOR {
        // The loss sits on its clamp floor: flat, so the gradient is zero.
        return (dx, ce, y);
    }
    let mut g = y;
    g[label] -= 1.0;
    if params.mean_normalize {
        let mu = x.iter().sum::<f64>() / 10.0;
        if mu > 0.0 {
            let gdotx: f64 = (0..10).map(|k| g[k] * x[k]).sum();
            for j in 0..10 {
                dx[j] = params.scale / mu * (g[j] - gdotx / (10.0 * mu));
            }
        }
        // All-zero powers carry no usable signal; gradient stays zero.
    } else {
        for j in 0..10 {
            dx[j] = params.scale * g[j];
        }
    }
    (dx, ce, y)
}

/// Adjoint pass for one sample: gradient of the cross-entropy with
/// respect to every layer phase. The penalty term is handled separately
/// because it does not depend on the sample.
pub fn backward_data(
    net: &DiffractiveNetwork,
    input: &WaveField,
    label: usize,
    softmax_params: &SoftmaxParams,
) -> Result<SampleGrad> {
    if label > 9 {
        return Err(DonnError::InvalidParameter(format!(
            "label {label} out of range"
        )));
    }
    let trace = net.forward_trace(input)?;
    let (dx, ce, _) = loss_grad_wrt_x(&trace.x, label, softmax_params);
    let g = net.grid();
    let cell = g.pitch * g.pitch;

    // Seed the adjoint at the detector plane: A = dL/d(conj F).
    let mut adjoint_samples: Array2<Complex64> =
        Array2::zeros((g.ny, g.nx));
    for ((iy, ix), a) in adjoint_samples.indexed_iter_mut() {
        let px = g.x_at(ix);
        let py = g.y_at(iy);
        for (r, region) in net.detectors.regions.iter().enumerate() {
            if region.contains(px, py) {
                *a = trace.detector_field.samples()[[iy, ix]] * (dx[r] * cell);
                break;
            }
        }
    }
    let mut adjoint = WaveField::new(*g, adjoint_samples)?;

    let layer_count = net.layers.len();
    let mut grads: Vec<Array2<f64>> = (0..layer_count)
        .map(|_| Array2::zeros((g.ny, g.nx)))
        .collect();

    for l in (0..layer_count).rev() {
        // Undo the propagation that followed layer l.
        let a_w = propagate(&adjoint, -net.distances[l + 1], &net.propagation);
        let layer = &net.layers[l];
        let w = apply_layer(&trace.arriving[l], layer)?;

        ndarray::Zip::from(&mut grads[l])
            .and(a_w.samples())
            .and(w.samples())
            .for_each(|gr, &a, &wv| {
                *gr = 2.0 * (a * wv.conj()).im;
            });

        if l > 0 {
            let mut next = a_w.into_samples();
            ndarray::Zip::from(&mut next)
                .and(&layer.phases)
                .and(&layer.amplitudes)
                .for_each(|s, &p, &amp| *s *= Complex64::from_polar(amp, -p));
            adjoint = WaveField::new(*g, next)?;
        }
    }

    Ok(SampleGrad {
        ce,
        x: trace.x,
        predicted: classify(&trace.x),
        grads,
    })
}

/// Full single-sample gradient of cross-entropy plus the per-neuron
/// normalized penalty at coefficient `gamma`; matches central finite
/// differences of the same loss.
pub fn backward(
    net: &DiffractiveNetwork,
    input: &WaveField,
    label: usize,
    gamma: f64,
    softmax_params: &SoftmaxParams,
    penalty_form: PenaltyForm,
) -> Result<(f64, Vec<Array2<f64>>)> {
    let mut sg = backward_data(net, input, label, softmax_params)?;
    let theta = net.physics.theta_max;
    let n_total: usize = net.layers.iter().map(|l| l.phases.len()).sum();
    if gamma != 0.0 {
        for (grad, layer) in sg.grads.iter_mut().zip(&net.layers) {
            ndarray::Zip::from(grad).and(&layer.phases).for_each(|g, &p| {
                *g += penalty_grad(p, gamma, theta, penalty_form) / n_total as f64;
            });
        }
    }
    let phase_refs: Vec<&Array2<f64>> = net.layers.iter().map(|l| &l.phases).collect();
    let loss = sg.ce + penalty_total(&phase_refs, gamma, theta, penalty_form);
    Ok((loss, sg.grads))
}

/// Whether training uses the penalty schedule on real-valued phases or a
/// straight-through estimator over binarized phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Penalty,
    Ste,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub mode: TrainMode,
    pub batch_size: usize,
    pub adam: AdamParams,
    pub softmax: SoftmaxParams,
    pub penalty_form: PenaltyForm,
    pub seed: u64,
    /// Samples held out from the end of the dataset for validation.
    pub val_count: usize,
    /// Start from the phases already in the network instead of a random
    /// draw (used to fine-tune a pretrained run).
    pub warm_start: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            mode: TrainMode::Penalty,
            batch_size: 64,
            adam: AdamParams::default(),
            softmax: SoftmaxParams::default(),
            penalty_form: PenaltyForm::SmoothWell,
            seed: 42,
            val_count: 2000,
            warm_start: false,
        }
    }
}

/// Real-valued weights plus optimizer state.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub weights: Vec<Array2<f64>>,
    pub adam: Adam,
    pub epoch: usize,
}

impl TrainState {
    /// Seeded uniform (-pi, pi] initialization matching the layer shapes.
    pub fn init(net: &DiffractiveNetwork, adam: AdamParams, rng: &mut impl rand::Rng) -> Self {
        let shapes: Vec<(usize, usize)> = net.layers.iter().map(|l| l.phases.dim()).collect();
        let weights = shapes
            .iter()
            .map(|&s| Array2::from_shape_simple_fn(s, || PI - 2.0 * PI * rng.gen::<f64>()))
            .collect();
        Self {
            weights,
            adam: Adam::new(adam, &shapes),
            epoch: 0,
        }
    }

    /// Start from the network's current phases (wrapped), fresh moments.
    pub fn from_network(net: &DiffractiveNetwork, adam: AdamParams) -> Self {
        let shapes: Vec<(usize, usize)> = net.layers.iter().map(|l| l.phases.dim()).collect();
        let weights = net
            .layers
            .iter()
            .map(|l| l.phases.mapv(wrap))
            .collect();
        Self {
            weights,
            adam: Adam::new(adam, &shapes),
            epoch: 0,
        }
    }

    /// One Adam update; weights re-wrapped to (-pi, pi].
    pub fn adam_step(&mut self, grads: &[Array2<f64>]) {
        self.adam.step(&mut self.weights, grads, true);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub gamma: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    /// Accuracy of the network as trained (real-valued in penalty mode).
    pub val_acc: f64,
    /// Accuracy of the binarized snapshot of this epoch.
    pub binarized_val_acc: f64,
}

#[derive(Debug)]
pub struct TrainResult {
    /// Binarized network from the best epoch, ready for inference or
    /// correcting-layer training.
    pub net: DiffractiveNetwork,
    /// The selected epoch's real-valued network (pre-binarization), the
    /// right starting point for fine-tuning runs.
    pub real_net: DiffractiveNetwork,
    pub metrics: Vec<EpochMetrics>,
    /// Validation accuracy of the selected epoch's real-valued network.
    pub pre_binarize_val_acc: f64,
    /// Binarized validation accuracy of the selected epoch.
    pub binarized_val_acc: f64,
    /// Epoch whose weights were selected (by binarized validation
    /// accuracy; the last epoch when no validation split exists).
    pub selected_epoch: usize,
}

fn write_phases(net: &mut DiffractiveNetwork, weights: &[Array2<f64>]) {
    for (layer, w) in net.layers.iter_mut().zip(weights) {
        layer.phases.assign(w);
    }
}

/// Classification accuracy of a network over a slice of samples.
fn accuracy_over(
    net: &DiffractiveNetwork,
    data: &Dataset,
    indices: &[usize],
    encoding: &EncodingSpec,
) -> Result<f64> {
    if indices.is_empty() {
        return Ok(f64::NAN);
    }
    let correct = indices
        .par_iter()
        .map(|&i| {
            let field = encode_image(&data.images[i], encoding, *net.grid())?;
            let (x, _) = net.forward(&field)?;
            Ok(usize::from(classify(&x) == data.labels[i] as usize))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / indices.len() as f64)
}

/// Train the optical section with the penalty schedule (in the mode set
/// by `opts.mode`: real-valued forward, or binarized STE forward with the
/// penalty anchoring the latent weights), then binarize.
pub fn train_optical(
    net: &DiffractiveNetwork,
    data: &Dataset,
    encoding: &EncodingSpec,
    schedule: &PenaltySchedule,
    opts: &TrainOptions,
) -> Result<TrainResult> {
    train_optical_with(net, data, encoding, schedule, opts, &mut |_, _| Ok(()))
}

/// As [`train_optical`], invoking `on_epoch` after each epoch (metrics
/// plus the binarized snapshot of the epoch) for logging and checkpoints.
pub fn train_optical_with(
    net: &DiffractiveNetwork,
    data: &Dataset,
    encoding: &EncodingSpec,
    schedule: &PenaltySchedule,
    opts: &TrainOptions,
    on_epoch: &mut dyn FnMut(&EpochMetrics, &DiffractiveNetwork) -> Result<()>,
) -> Result<TrainResult> {
    schedule.validate()?;
    let epochs = schedule.total_epochs();
    let gamma_fn = |epoch: usize| schedule.gamma_at(epoch);
    run_training(net, data, encoding, epochs, &gamma_fn, opts, on_epoch)
}

/// Straight-through-estimator training: binarized phases in the forward
/// pass, gradients passed through the binarizer unchanged.
pub fn ste_train_optical(
    net: &DiffractiveNetwork,
    data: &Dataset,
    encoding: &EncodingSpec,
    epochs: usize,
    opts: &TrainOptions,
) -> Result<TrainResult> {
    ste_train_optical_with(net, data, encoding, epochs, opts, &mut |_, _| Ok(()))
}

/// As [`ste_train_optical`] with a per-epoch callback.
pub fn ste_train_optical_with(
    net: &DiffractiveNetwork,
    data: &Dataset,
    encoding: &EncodingSpec,
    epochs: usize,
    opts: &TrainOptions,
    on_epoch: &mut dyn FnMut(&EpochMetrics, &DiffractiveNetwork) -> Result<()>,
) -> Result<TrainResult> {
    let opts = TrainOptions {
        mode: TrainMode::Ste,
        ..*opts
    };
    run_training(net, data, encoding, epochs, &|_| 0.0, &opts, on_epoch)
}

fn run_training(
    net: &DiffractiveNetwork,
    data: &Dataset,
    encoding: &EncodingSpec,
    epochs: usize,
    gamma_fn: &dyn Fn(usize) -> f64,
    opts: &TrainOptions,
    on_epoch: &mut dyn FnMut(&EpochMetrics, &DiffractiveNetwork) -> Result<()>,
) -> Result<TrainResult> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if data.is_empty() {
        return Err(DonnError::InvalidParameter("dataset is empty".into()));
    }
    encoding.validate(net.grid())?;
    if opts.batch_size == 0 {
        return Err(DonnError::InvalidParameter("batch size must be >= 1".into()));
    }
    let n = data.len();
    let val_count = opts.val_count.min(n / 2);
    let train_count = n - val_count;
    if train_count == 0 {
        return Err(DonnError::InvalidParameter(
            "no training samples left after validation split".into(),
        ));
    }
    let val_indices: Vec<usize> = (train_count..n).collect();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let mut state = if opts.warm_start {
        TrainState::from_network(net, opts.adam)
    } else {
        TrainState::init(net, opts.adam, &mut rng)
    };
    let mut work = net.clone();
    let grid = *net.grid();
    let n_total: usize = work.layers.iter().map(|l| l.phases.len()).sum();

    let mut metrics = Vec::with_capacity(epochs);
    let mut indices: Vec<usize> = (0..train_count).collect();
    // Best epoch by the deployment metric: binarized validation accuracy.
    let mut best: Option<(f64, usize, Vec<Array2<f64>>)> = None;

    for epoch in 0..epochs {
        state.epoch = epoch;
        let gamma = gamma_fn(epoch);
        indices.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut correct = 0usize;

        for batch in indices.chunks(opts.batch_size) {
            write_phases(&mut work, &state.weights);
            let grad_net = match opts.mode {
                TrainMode::Penalty => work.clone(),
                TrainMode::Ste => binarize_network(&work),
            };

            let sample_grads: Vec<SampleGrad> = batch
                .par_iter()
                .map(|&i| {
                    let field = encode_image(&data.images[i], encoding, grid)?;
                    backward_data(&grad_net, &field, data.labels[i] as usize, &opts.softmax)
                })
                .collect::<Result<Vec<_>>>()?;

            let inv = 1.0 / batch.len() as f64;
            let mut grads: Vec<Array2<f64>> = state
                .weights
                .iter()
                .map(|w| Array2::zeros(w.dim()))
                .collect();
            let mut ce_sum = 0.0;
            for (sg, &i) in sample_grads.iter().zip(batch) {
                ce_sum += sg.ce;
                if sg.predicted == data.labels[i] as usize {
                    correct += 1;
                }
                for (g, s) in grads.iter_mut().zip(&sg.grads) {
                    *g += s;
                }
            }
            for g in &mut grads {
                g.mapv_inplace(|v| v * inv);
            }

            let mut batch_loss = ce_sum * inv;
            if gamma != 0.0 {
                for (g, w) in grads.iter_mut().zip(&state.weights) {
                    ndarray::Zip::from(g).and(w).for_each(|g, &p| {
                        *g += penalty_grad(p, gamma, net.physics.theta_max, opts.penalty_form)
                            / n_total as f64;
                    });
                }
                let refs: Vec<&Array2<f64>> = state.weights.iter().collect();
                batch_loss +=
                    penalty_total(&refs, gamma, net.physics.theta_max, opts.penalty_form);
            }

            if !batch_loss.is_finite() {
                return Err(DonnError::Diverged(format!(
                    "non-finite loss at epoch {epoch}"
                )));
            }
            loss_sum += batch_loss;
            batches += 1;
            state.adam_step(&grads);
        }

        write_phases(&mut work, &state.weights);
        let binarized = binarize_network(&work);
        let (val_acc, binarized_val_acc) = match opts.mode {
            TrainMode::Penalty => (
                accuracy_over(&work, data, &val_indices, encoding)?,
                accuracy_over(&binarized, data, &val_indices, encoding)?,
            ),
            TrainMode::Ste => {
                // The STE forward pass is already binarized.
                let acc = accuracy_over(&binarized, data, &val_indices, encoding)?;
                (acc, acc)
            }
        };
        if val_count > 0 && best.as_ref().map_or(true, |(b, _, _)| binarized_val_acc >= *b) {
            best = Some((binarized_val_acc, epoch, state.weights.clone()));
        }
        let m = EpochMetrics {
            epoch,
            gamma,
            train_loss: loss_sum / batches.max(1) as f64,
            train_acc: correct as f64 / train_count as f64,
            val_acc,
            binarized_val_acc,
        };
        on_epoch(&m, &binarized)?;
        metrics.push(m);
    }

    let (selected_epoch, selected_weights) = match &best {
        Some((_, epoch, weights)) => (*epoch, weights.clone()),
        None => (epochs.saturating_sub(1), state.weights.clone()),
    };
    write_phases(&mut work, &selected_weights);
    let pre_binarize_val_acc = accuracy_over(&work, data, &val_indices, encoding)?;
    let final_net = binarize_network(&work);
    let binarized_val_acc = accuracy_over(&final_net, data, &val_indices, encoding)?;

    Ok(TrainResult {
        net: final_net,
        real_net: work,
        metrics,
        pre_binarize_val_acc,
        binarized_val_acc,
        selected_epoch,
    })
}
