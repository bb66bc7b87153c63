//! Rough per-sample cost probe for forward and backward passes.

use donn::dataio::encode::{encode_image, EncodingSpec};
use donn::loss::SoftmaxParams;
use donn::network::NeuronPhysics;
use donn::training::backward_data;
use donn::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn bench(n: usize, pad: usize, upsample: usize, reps: usize) {
    let grid = GridSpec::square(n, 1.0, 1.55).unwrap();
    let mut net = DiffractiveNetwork::uniform(
        grid,
        3,
        50.0,
        NeuronPhysics::default(),
        PropagationParams {
            pad_factor: pad,
            policy: EvanescentPolicy::ZeroOut,
        },
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for layer in &mut net.layers {
        layer.phases.mapv_inplace(|_| rng.gen_range(-3.0..3.0));
    }
    let mut img = [0u8; 784];
    for (i, v) in img.iter_mut().enumerate() {
        *v = ((i * 37) % 256) as u8;
    }
    let input = encode_image(&img, &EncodingSpec { upsample }, grid).unwrap();

    // warm caches
    let _ = net.forward(&input).unwrap();
    let t = Instant::now();
    for _ in 0..reps {
        let _ = net.forward(&input).unwrap();
    }
    let fwd = t.elapsed().as_secs_f64() / reps as f64;

    let sp = SoftmaxParams::default();
    let _ = backward_data(&net, &input, 3, &sp).unwrap();
    let t = Instant::now();
    for _ in 0..reps {
        let _ = backward_data(&net, &input, 3, &sp).unwrap();
    }
    let bwd = t.elapsed().as_secs_f64() / reps as f64;
    println!(
        "grid {n} pad {pad}: forward {:.2} ms, fwd+bwd {:.2} ms  | epoch(10k) {:.1} min, epoch(55k) {:.1} min",
        fwd * 1e3,
        (bwd) * 1e3,
        (bwd) * 10_000.0 / 60.0,
        (bwd) * 55_000.0 / 60.0
    );
}

fn main() {
    bench(64, 2, 2, 20);
    bench(64, 1, 2, 20);
    bench(120, 2, 4, 10);
    bench(120, 1, 4, 10);
}
