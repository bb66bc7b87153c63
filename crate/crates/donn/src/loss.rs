//! Classification loss and the binarization penalty.
//!
//! Detector powers are tiny and nearly uniform, so before the softmax the
//! ten readings are normalized to mean 1 and multiplied by a fixed logit
//! scale. The penalty is a double well over each neuron phase with zeros
//! exactly at the two realizable states; its coefficient Gamma sets both
//! direction and strength: positive drives phases to the targets,
//! negative spreads them toward the binarization thresholds.

use ndarray::Array2;

use crate::phase::wrap;

/// Logit shaping applied before the softmax.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftmaxParams {
    /// Fixed logit scale.
    pub scale: f64,
    /// Normalize the input vector to mean 1 first (all-zero input maps
    /// to the zero logit vector, i.e. a uniform distribution).
    pub mean_normalize: bool,
}

impl Default for SoftmaxParams {
    fn default() -> Self {
        Self {
            scale: 10.0,
            mean_normalize: true,
        }
    }
}

/// Logits from detector powers: scale * x / mean(x) under mean
/// normalization, scale * x otherwise.
pub fn logits(x: &[f64; 10], params: &SoftmaxParams) -> [f64; 10] {
    let mut z = [0.0; 10];
    if params.mean_normalize {
        let mu = x.iter().sum::<f64>() / 10.0;
        if mu <= 0.0 {
            return z;
        }
        for i in 0..10 {
            z[i] = params.scale * x[i] / mu;
        }
    } else {
        for i in 0..10 {
            z[i] = params.scale * x[i];
        }
    }
    z
}

/// Numerically stable softmax of the shaped logits.
pub fn softmax(x: &[f64; 10], params: &SoftmaxParams) -> [f64; 10] {
    softmax_of_logits(&logits(x, params))
}

pub fn softmax_of_logits(z: &[f64; 10]) -> [f64; 10] {
    let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut y = [0.0; 10];
    let mut sum = 0.0;
    for i in 0..10 {
        y[i] = (z[i] - zmax).exp();
        sum += y[i];
    }
    for v in &mut y {
        *v /= sum;
    }
    y
}

/// Probability floor inside [`cross_entropy`]; losses saturate (with zero
/// gradient) once the labelled class drops below it.
pub const CE_FLOOR: f64 = 1e-12;

/// Negative natural log-likelihood of the labelled class, floored at
/// [`CE_FLOOR`] to avoid infinities.
pub fn cross_entropy(y: &[f64; 10], label: usize) -> f64 {
    -y[label].max(CE_FLOOR).ln()
}

/// Which penalty profile to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyForm {
    /// Gamma * d0^2 * dT^2 with d0, dT the circular distances to the two
    /// targets (default).
    SmoothWell,
    /// Gamma * (|theta| + |theta - Theta|). Flat on [0, Theta]; kept for
    /// comparison runs.
    Literal,
}

/// Penalty value for one neuron phase.
pub fn penalty(theta: f64, gamma: f64, theta_max: f64, form: PenaltyForm) -> f64 {
    match form {
        PenaltyForm::SmoothWell => {
            let d0 = wrap(theta);
            let dt = wrap(theta - theta_max);
            gamma * d0 * d0 * dt * dt
        }
        PenaltyForm::Literal => {
            let d0 = wrap(theta);
            let dt = wrap(theta - theta_max);
            gamma * (d0.abs() + dt.abs())
        }
    }
}

/// d penalty / d theta for one neuron phase.
pub fn penalty_grad(theta: f64, gamma: f64, theta_max: f64, form: PenaltyForm) -> f64 {
    match form {
        PenaltyForm::SmoothWell => {
            let d0 = wrap(theta);
            let dt = wrap(theta - theta_max);
            2.0 * gamma * d0 * dt * (dt + d0)
        }
        PenaltyForm::Literal => {
            let d0 = wrap(theta);
            let dt = wrap(theta - theta_max);
            gamma * (d0.signum() + dt.signum())
        }
    }
}

/// Penalty summed over every neuron and divided by the neuron count, so
/// its scale does not depend on the grid size.
pub fn penalty_total(
    phase_layers: &[&Array2<f64>],
    gamma: f64,
    theta_max: f64,
    form: PenaltyForm,
) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let count: usize = phase_layers.iter().map(|p| p.len()).sum();
    if count == 0 {
        return 0.0;
    }
    let sum: f64 = phase_layers
        .iter()
        .flat_map(|p| p.iter())
        .map(|&t| penalty(t, gamma, theta_max, form))
        .sum();
    sum / count as f64
}

/// Mean cross-entropy over a batch plus the per-neuron-normalized
/// penalty over all weights.
pub fn total_loss(
    batch_x: &[[f64; 10]],
    labels: &[usize],
    phase_layers: &[&Array2<f64>],
    gamma: f64,
    theta_max: f64,
    softmax_params: &SoftmaxParams,
    form: PenaltyForm,
) -> f64 {
    assert_eq!(batch_x.len(), labels.len());
    let ce: f64 = batch_x
        .iter()
        .zip(labels)
        .map(|(x, &l)| cross_entropy(&softmax(x, softmax_params), l))
        .sum::<f64>()
        / batch_x.len().max(1) as f64;
    ce + penalty_total(phase_layers, gamma, theta_max, form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn softmax_uniform_input() {
        let y = softmax(&[3.0; 10], &SoftmaxParams::default());
        for v in y {
            assert!((v - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_zero_input_is_uniform() {
        let y = softmax(&[0.0; 10], &SoftmaxParams::default());
        for v in y {
            assert!((v - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_saturates_on_dominant_input() {
        let mut x = [0.0; 10];
        x[0] = 1000.0;
        let y = softmax(&x, &SoftmaxParams::default());
        assert!(y[0] > 0.999);
    }

    #[test]
    fn softmax_raw_two_vs_ones() {
        // (2,1,...,1) with unit scale and no normalization.
        let params = SoftmaxParams {
            scale: 1.0,
            mean_normalize: false,
        };
        let mut x = [1.0; 10];
        x[0] = 2.0;
        let y = softmax(&x, &params);
        let e = std::f64::consts::E;
        let expect = e * e / (e * e + 9.0 * e);
        assert!((y[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_cases() {
        let mut y = [0.0; 10];
        y[4] = 1.0;
        assert_eq!(cross_entropy(&y, 4), 0.0);
        assert!((cross_entropy(&[0.1; 10], 2) - 10.0_f64.ln()).abs() < 1e-12);
        let mut half = [0.5 / 9.0; 10];
        half[7] = 0.5;
        assert!((cross_entropy(&half, 7) - 2.0_f64.ln()).abs() < 1e-12);
        let zero = [0.0; 10];
        assert!(cross_entropy(&zero, 0).is_finite());
    }

    #[test]
    fn penalty_zero_at_targets() {
        for theta in [0.0, PI] {
            assert_eq!(penalty(theta, 1.0, PI, PenaltyForm::SmoothWell), 0.0);
            assert_eq!(penalty_grad(theta, 1.0, PI, PenaltyForm::SmoothWell), 0.0);
        }
    }

    #[test]
    fn penalty_midpoint_value() {
        let p = penalty(PI / 2.0, 1.0, PI, PenaltyForm::SmoothWell);
        assert!((p - PI.powi(4) / 16.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_zero_gamma() {
        assert_eq!(penalty(1.234, 0.0, PI, PenaltyForm::SmoothWell), 0.0);
    }

    #[test]
    fn penalty_drives_toward_nearest_target_for_positive_gamma() {
        // Gradient descent moves theta opposite the gradient sign, so a
        // well that pulls toward target T needs sign(grad) = sign(theta-T).
        for &theta in &[0.3, 1.2, 1.8, 2.5, -0.4, -1.3, -1.8, -2.6] {
            let g = penalty_grad(theta, 1.0, PI, PenaltyForm::SmoothWell);
            let d0 = wrap(theta);
            let dt = wrap(theta - PI);
            if d0.abs() < dt.abs() {
                assert_eq!(g.signum(), d0.signum(), "theta = {theta}");
            } else {
                assert_eq!(g.signum(), dt.signum(), "theta = {theta}");
            }
            // Negative gamma reverses the force.
            let gneg = penalty_grad(theta, -1.0, PI, PenaltyForm::SmoothWell);
            assert_eq!(gneg, -g);
        }
    }

    #[test]
    fn penalty_gradient_matches_finite_difference() {
        let h = 1e-6;
        for &theta in &[0.3, 1.0, 2.5, -0.7, -2.0] {
            for &gamma in &[1.0, -0.5] {
                for form in [PenaltyForm::SmoothWell, PenaltyForm::Literal] {
                    let fd = (penalty(theta + h, gamma, PI, form)
                        - penalty(theta - h, gamma, PI, form))
                        / (2.0 * h);
                    let an = penalty_grad(theta, gamma, PI, form);
                    assert!(
                        (fd - an).abs() < 1e-6,
                        "theta {theta} gamma {gamma} {form:?}: fd {fd} vs {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn literal_form_is_flat_between_targets() {
        let p1 = penalty(0.2, 1.0, PI, PenaltyForm::Literal);
        let p2 = penalty(2.0, 1.0, PI, PenaltyForm::Literal);
        assert!((p1 - PI).abs() < 1e-12);
        assert!((p2 - PI).abs() < 1e-12);
        assert_eq!(penalty_grad(1.0, 1.0, PI, PenaltyForm::Literal), 0.0);
    }

    #[test]
    fn total_loss_composes_ce_and_penalty() {
        use ndarray::Array2;
        let phases = Array2::from_elem((4, 4), PI / 2.0);
        let layers = [&phases];
        // Zero detector powers -> uniform softmax -> ln 10.
        let loss = total_loss(
            &[[0.0; 10]],
            &[3],
            &layers,
            1.0,
            PI,
            &SoftmaxParams::default(),
            PenaltyForm::SmoothWell,
        );
        let expect = 10.0_f64.ln() + PI.powi(4) / 16.0;
        assert!((loss - expect).abs() < 1e-12);

        let no_penalty = total_loss(
            &[[0.0; 10]],
            &[3],
            &layers,
            0.0,
            PI,
            &SoftmaxParams::default(),
            PenaltyForm::SmoothWell,
        );
        assert!((no_penalty - 10.0_f64.ln()).abs() < 1e-12);
    }
}
