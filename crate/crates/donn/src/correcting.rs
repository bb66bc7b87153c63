//! Cascaded linear correcting layer: a trainable 10x10 map on the
//! detector powers, L = W X, classified by the largest entry. Trained
//! separately with the optical section frozen, so the detector powers can
//! be precomputed once per sample.

use ndarray::Array2;
use rayon::prelude::*;

use crate::adam::{Adam, AdamParams};
use crate::dataio::encode::{encode_image, EncodingSpec};
use crate::dataio::idx::Dataset;
use crate::error::{DonnError, Result};
use crate::loss::{cross_entropy, logits, softmax_of_logits, SoftmaxParams};
use crate::network::{classify, DiffractiveNetwork};

/// 10x10 real matrix mapping detector powers to class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectingLayer {
    pub w: Array2<f64>,
}

impl CorrectingLayer {
    pub fn identity() -> Self {
        Self {
            w: Array2::eye(10),
        }
    }

    pub fn random(seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Self {
            w: Array2::from_shape_simple_fn((10, 10), || rng.gen_range(-0.1..0.1)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.dim() != (10, 10) {
            return Err(DonnError::InvalidParameter(format!(
                "correcting matrix must be 10x10, got {:?}",
                self.w.dim()
            )));
        }
        if self.w.iter().any(|v| !v.is_finite()) {
            return Err(DonnError::InvalidParameter(
                "correcting matrix has non-finite entries".into(),
            ));
        }
        Ok(())
    }

    /// L = W X.
    pub fn apply(&self, x: &[f64; 10]) -> [f64; 10] {
        let mut out = [0.0; 10];
        for i in 0..10 {
            let mut acc = 0.0;
            for j in 0..10 {
                acc += self.w[[i, j]] * x[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn classify(&self, x: &[f64; 10]) -> usize {
        classify(&self.apply(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectingTrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamParams,
    pub softmax: SoftmaxParams,
    pub seed: u64,
    /// Samples held out from the end of the dataset for validation.
    pub val_count: usize,
}

impl Default for CorrectingTrainOptions {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 256,
            adam: AdamParams::default(),
            softmax: SoftmaxParams::default(),
            seed: 42,
            val_count: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectingEpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

/// Detector powers for every sample of a dataset under a frozen network.
pub fn detector_features(
    net: &DiffractiveNetwork,
    data: &Dataset,
    encoding: &EncodingSpec,
) -> Result<Vec<[f64; 10]>> {
    encoding.validate(net.grid())?;
    data.images
        .par_iter()
        .map(|img| {
            let field = encode_image(img, encoding, *net.grid())?;
            Ok(net.forward(&field)?.0)
        })
        .collect()
}

/// Train W by Adam on softmax cross-entropy of W (shaped X), with the
/// optical section frozen. Detector powers are computed once up front.
/// Returns the matrix of the best validation epoch.
pub fn train_correcting(
    net: &DiffractiveNetwork,
    data: &Dataset,
    encoding: &EncodingSpec,
    opts: &CorrectingTrainOptions,
) -> Result<(CorrectingLayer, Vec<CorrectingEpochMetrics>)> {
    if !net.binarized {
        return Err(DonnError::InvalidParameter(
            "correcting layer trains against a binarized optical section".into(),
        ));
    }
    let features = detector_features(net, data, encoding)?;
    train_correcting_on_features(&features, &data.labels, opts)
}

/// Same training loop over precomputed detector powers.
pub fn train_correcting_on_features(
    features: &[[f64; 10]],
    labels: &[u8],
    opts: &CorrectingTrainOptions,
) -> Result<(CorrectingLayer, Vec<CorrectingEpochMetrics>)> {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};

    if features.is_empty() || features.len() != labels.len() {
        return Err(DonnError::InvalidParameter(format!(
            "features/labels mismatch: {} vs {}",
            features.len(),
            labels.len()
        )));
    }
    if opts.batch_size == 0 {
        return Err(DonnError::InvalidParameter("batch size must be >= 1".into()));
    }
    let n = features.len();
    let val_count = opts.val_count.min(n / 2);
    let train_count = n - val_count;

    // The trained model sees mean-normalized scaled powers, exactly the
    // logit shaping used for the optical section (W = I reproduces it).
    let shaped: Vec<[f64; 10]> = features.iter().map(|x| logits(x, &opts.softmax)).collect();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let mut layer = CorrectingLayer::random(rng.gen_range(0..u64::MAX));
    let mut adam = Adam::new(opts.adam, &[(10, 10)]);

    let mut best: Option<(f64, Array2<f64>)> = None;
    let mut metrics = Vec::with_capacity(opts.epochs);
    let mut indices: Vec<usize> = (0..train_count).collect();

    for epoch in 0..opts.epochs {
        indices.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut correct = 0usize;

        for batch in indices.chunks(opts.batch_size) {
            let mut grad = Array2::<f64>::zeros((10, 10));
            let mut ce_sum = 0.0;
            for &i in batch {
                let f = &shaped[i];
                let label = labels[i] as usize;
                let z = layer.apply(f);
                let y = softmax_of_logits(&z);
                ce_sum += cross_entropy(&y, label);
                if classify(&z) == label {
                    correct += 1;
                }
                for r in 0..10 {
                    let gy = y[r] - if r == label { 1.0 } else { 0.0 };
                    for c in 0..10 {
                        grad[[r, c]] += gy * f[c];
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            grad.mapv_inplace(|v| v * inv);
            let batch_loss = ce_sum * inv;
            if !batch_loss.is_finite() {
                return Err(DonnError::Diverged(format!(
                    "non-finite correcting loss at epoch {epoch}"
                )));
            }
            loss_sum += batch_loss;
            batches += 1;
            let mut w = vec![layer.w.clone()];
            adam.step(&mut w, &[grad], false);
            layer.w = w.pop().expect("one array");
        }

        let val_acc = if val_count > 0 {
            let hits = (train_count..n)
                .filter(|&i| classify(&layer.apply(&shaped[i])) == labels[i] as usize)
                .count();
            hits as f64 / val_count as f64
        } else {
            f64::NAN
        };
        if val_count > 0 && best.as_ref().map_or(true, |(b, _)| val_acc > *b) {
            best = Some((val_acc, layer.w.clone()));
        }
        metrics.push(CorrectingEpochMetrics {
            epoch,
            train_loss: loss_sum / batches.max(1) as f64,
            train_acc: correct as f64 / train_count.max(1) as f64,
            val_acc,
        });
    }

    if let Some((_, w)) = best {
        layer.w = w;
    }
    layer.validate()?;
    Ok((layer, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_apply_is_identity() {
        let layer = CorrectingLayer::identity();
        let x = [0.1, 0.5, 0.2, 0.0, 0.9, 0.3, 0.4, 0.6, 0.7, 0.8];
        assert_eq!(layer.apply(&x), x);
    }

    #[test]
    fn scaling_preserves_argmax() {
        let mut layer = CorrectingLayer::identity();
        layer.w.mapv_inplace(|v| v * 2.0);
        let x = [0.1, 0.5, 0.2, 0.0, 0.9, 0.3, 0.4, 0.6, 0.7, 0.8];
        assert_eq!(layer.classify(&x), classify(&x));
    }

    #[test]
    fn permutation_matrix_permutes() {
        let mut w = Array2::zeros((10, 10));
        for i in 0..10 {
            w[[i, (i + 1) % 10]] = 1.0;
        }
        let layer = CorrectingLayer { w };
        let mut x = [0.0; 10];
        x[1] = 1.0;
        let l = layer.apply(&x);
        assert_eq!(l[0], 1.0);
        assert_eq!(classify(&l), 0);
    }

    #[test]
    fn separable_features_reach_full_accuracy() {
        // One-hot-ish features per class are linearly separable.
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let class = i % 10;
            let mut x = [0.05; 10];
            x[class] = 0.6 + 0.01 * (i % 7) as f64;
            features.push(x);
            labels.push(class as u8);
        }
        let opts = CorrectingTrainOptions {
            epochs: 60,
            batch_size: 32,
            val_count: 40,
            ..Default::default()
        };
        let (layer, metrics) = train_correcting_on_features(&features, &labels, &opts).unwrap();
        let last = metrics.last().unwrap();
        assert_eq!(last.train_acc, 1.0, "{last:?}");
        let hits = features
            .iter()
            .zip(&labels)
            .filter(|(x, &l)| {
                classify(&layer.apply(&logits(x, &SoftmaxParams::default()))) == l as usize
            })
            .count();
        assert_eq!(hits, features.len());
    }

    #[test]
    fn training_is_deterministic() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..100 {
            let class = (i * 7) % 10;
            let mut x = [0.1; 10];
            x[class] += 0.3;
            x[(class + 3) % 10] += 0.1;
            features.push(x);
            labels.push(class as u8);
        }
        let opts = CorrectingTrainOptions {
            epochs: 10,
            val_count: 20,
            ..Default::default()
        };
        let (a, ma) = train_correcting_on_features(&features, &labels, &opts).unwrap();
        let (b, mb) = train_correcting_on_features(&features, &labels, &opts).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(ma, mb);
    }

    #[test]
    fn refuses_non_binarized_network() {
        use crate::dataio::idx::Split;
        use crate::network::NeuronPhysics;
        use crate::propagation::PropagationParams;
        use crate::GridSpec;
        let grid = GridSpec::square(32, 1.0, 1.55).unwrap();
        let net = DiffractiveNetwork::uniform(
            grid,
            1,
            12.0,
            NeuronPhysics::default(),
            PropagationParams::default(),
        )
        .unwrap();
        let data = Dataset {
            images: vec![[0u8; 784]; 4],
            labels: vec![0; 4],
            split: Split::Train,
        };
        let err = train_correcting(
            &net,
            &data,
            &EncodingSpec { upsample: 1 },
            &CorrectingTrainOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("binarized"));
    }
}
