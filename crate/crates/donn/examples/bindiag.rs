//! Dissect what the binarization snap destroys on a reduced MNIST run.

use donn::adam::{Adam, AdamParams};
use donn::dataio::encode::{encode_image, EncodingSpec};
use donn::dataio::idx::{load_split_dir, Split};
use donn::loss::{penalty_grad, penalty_total, PenaltyForm, SoftmaxParams};
use donn::network::{classify, DiffractiveNetwork, NeuronPhysics};
use donn::phase::wrap;
use donn::training::{backward_data, binarize_network};
use donn::*;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::Path;

fn accuracy(net: &DiffractiveNetwork, data: &donn::dataio::idx::Dataset, enc: &EncodingSpec, from: usize, n: usize) -> f64 {
    let end = (from + n).min(data.len());
    let mut hits = 0;
    for i in from..end {
        let f = encode_image(&data.images[i], enc, *net.grid()).unwrap();
        let (x, _) = net.forward(&f).unwrap();
        if classify(&x) == data.labels[i] as usize { hits += 1; }
    }
    hits as f64 / (end - from) as f64
}

fn main() {
    let data = load_split_dir(Path::new("/root/data/mnist"), Split::Train).unwrap().take(6000);
    let grid = GridSpec::square(64, 1.0, 1.55).unwrap();
    let mut net = DiffractiveNetwork::uniform(grid, 3, 50.0, NeuronPhysics::default(), PropagationParams::default()).unwrap();
    let enc = EncodingSpec { upsample: 2 };
    let sp = SoftmaxParams::default();
    let train_n = 5000usize;

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let shapes: Vec<(usize, usize)> = net.layers.iter().map(|l| l.phases.dim()).collect();
    let mut weights: Vec<Array2<f64>> = shapes.iter().map(|&s| Array2::from_shape_simple_fn(s, || PI - 2.0 * PI * rng.gen::<f64>())).collect();
    let mut adam = Adam::new(AdamParams::default(), &shapes);
    let n_total: usize = shapes.iter().map(|s| s.0 * s.1).sum();

    let gammas = [-1e-3, 0.2, 0.5, 1.0, 1.5, 2.0, 2.0, 2.0, 2.0, 2.0];
    for (epoch, &gamma) in gammas.iter().enumerate() {
        let mut idx: Vec<usize> = (0..train_n).collect();
        idx.shuffle(&mut rng);
        for batch in idx.chunks(64) {
            for (layer, w) in net.layers.iter_mut().zip(&weights) { layer.phases.assign(w); }
            let mut grads: Vec<Array2<f64>> = shapes.iter().map(|&s| Array2::zeros(s)).collect();
            for &i in batch {
                let f = encode_image(&data.images[i], &enc, grid).unwrap();
                let sg = backward_data(&net, &f, data.labels[i] as usize, &sp).unwrap();
                for (g, s) in grads.iter_mut().zip(&sg.grads) { *g += s; }
            }
            let inv = 1.0 / batch.len() as f64;
            for (g, w) in grads.iter_mut().zip(&weights) {
                ndarray::Zip::from(g).and(w).for_each(|g, &p| {
                    *g = *g * inv + penalty_grad(p, gamma, PI, PenaltyForm::SmoothWell) / n_total as f64;
                });
            }
            adam.step(&mut weights, &grads, true);
        }
        for (layer, w) in net.layers.iter_mut().zip(&weights) { layer.phases.assign(w); }
        let bin = binarize_network(&net);
        let refs: Vec<&Array2<f64>> = weights.iter().collect();
        let pen = penalty_total(&refs, 1.0, PI, PenaltyForm::SmoothWell);
        println!("epoch {epoch} gamma {gamma:+.3}: real val {:.4}, bin val {:.4}, mean a2b2 {pen:.4}",
            accuracy(&net, &data, &enc, train_n, 1000), accuracy(&bin, &data, &enc, train_n, 1000));
    }

    // Distance-to-nearest-target histogram (bins of (pi/2)/10).
    let mut hist = [0usize; 10];
    let mut contested = 0usize;
    for w in &weights {
        for &p in w.iter() {
            let d0 = wrap(p).abs();
            let dt = wrap(p - PI).abs();
            let d = d0.min(dt);
            hist[((d / (PI / 2.0) * 10.0) as usize).min(9)] += 1;
            if d > 0.4 { contested += 1; }
        }
    }
    println!("distance histogram: {hist:?}");
    println!("contested (>0.4 rad): {contested} of {n_total}");

    // Partial binarization: snap only weights within `thr` of a target.
    for thr in [0.05, 0.15, 0.3, 0.6, 1.0, PI / 2.0] {
        let mut partial = net.clone();
        for (layer, w) in partial.layers.iter_mut().zip(&weights) {
            ndarray::Zip::from(&mut layer.phases).and(w).for_each(|p, &orig| {
                let d0 = wrap(orig).abs();
                let dt = wrap(orig - PI).abs();
                if d0.min(dt) <= thr {
                    *p = if d0 <= dt { 0.0 } else { PI };
                } else {
                    *p = orig;
                }
            });
        }
        println!("partial binarize thr {thr:.2}: val {:.4}", accuracy(&partial, &data, &enc, train_n, 1000));
    }

    // Cluster means: does the network prefer a different binary contrast?
    let (mut s0, mut c0, mut s1, mut c1) = (0.0f64, 0usize, 0.0f64, 0usize);
    for w in &weights {
        for &p in w.iter() {
            let d0 = wrap(p).abs();
            let dt = wrap(p - PI).abs();
            if d0 <= dt { s0 += wrap(p); c0 += 1; } else { s1 += wrap(p - PI); c1 += 1; }
        }
    }
    let (m0, m1) = (s0 / c0 as f64, PI + s1 / c1 as f64);
    println!("cluster means {m0:.4} / {m1:.4} rad, contrast {:.4} pi, sizes {c0}/{c1}", (m1 - m0) / PI);
    let mut cluster = net.clone();
    for (layer, w) in cluster.layers.iter_mut().zip(&weights) {
        ndarray::Zip::from(&mut layer.phases).and(w).for_each(|p, &orig| {
            let d0 = wrap(orig).abs();
            let dt = wrap(orig - PI).abs();
            *p = if d0 <= dt { m0 } else { m1 };
        });
    }
    println!("cluster-centred binary: val {:.4}", accuracy(&cluster, &data, &enc, train_n, 1000));
}
