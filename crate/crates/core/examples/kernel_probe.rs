use sp2net::array::make_ula;
use sp2net::net::{backward_batch, forward_batch, Gradients, ModelParams};
use sp2net::rng::RngState;
use sp2net::scenario::sample_training_scenario;
use std::time::Instant;

fn main() {
    let geom = make_ula(16).unwrap();
    let mut rng = RngState::new(1);
    let model = ModelParams::init_random(vec![65, 256, 256, 1], vec![], &mut rng).unwrap();

    // Sample generation probe: 200 scenarios worth of draws.
    let t = Instant::now();
    let mut count = 0usize;
    for _ in 0..200 {
        let s = sample_training_scenario(&geom, &mut rng).unwrap();
        count += s.sources.len();
    }
    println!("200 scenario draws ({count} sources): {:.3}s", t.elapsed().as_secs_f64());

    // Batched kernels on 32768 x 65 inputs.
    let b = 32 * 1024;
    let inputs: Vec<f64> = (0..b * 65).map(|i| ((i * 2654435761) % 1000) as f64 / 500.0 - 1.0).collect();
    let targets = vec![0.3f64; b];
    let weights = vec![0.5f64; b];

    let t = Instant::now();
    let acts = forward_batch(&model, &inputs).unwrap();
    let fwd = t.elapsed().as_secs_f64();
    println!("forward_batch {b} samples: {fwd:.3}s");

    let mut grads = Gradients::zeros_like(&model);
    let t = Instant::now();
    let _ = backward_batch(&model, &acts, &targets, &weights, &mut grads).unwrap();
    let bwd = t.elapsed().as_secs_f64();
    println!("backward_batch {b} samples: {bwd:.3}s");
    let flops_fwd = (b * (65*256 + 256*256 + 256) * 2) as f64;
    println!("fwd {:.1} GF/s, bwd {:.1} GF/s", flops_fwd / fwd / 1e9, 2.0*flops_fwd / bwd / 1e9);
}
