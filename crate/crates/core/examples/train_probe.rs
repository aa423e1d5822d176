use sp2net::array::make_ula;
use sp2net::net::ModelParams;
use sp2net::rng::RngState;
use sp2net::train::{train, TargetSpec, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let scenarios: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let iters: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.001);
    let geom = make_ula(16).unwrap();
    let spec = TargetSpec::quadruple_of(&geom).unwrap();
    let cfg = TrainConfig {
        k_hypotheses: 80,
        scenarios_per_iteration: scenarios,
        learning_rate: lr,
        max_iterations: iters,
        validation_scenarios: 200,
        eval_interval: 100,
        patience: 1000,
        seed: 2024,
        verbose: true,
        ..TrainConfig::default()
    };
    let mut rng = RngState::new(cfg.seed);
    let model = ModelParams::init_random(vec![65, 256, 256, 1], vec![], &mut rng).unwrap();
    let t = std::time::Instant::now();
    let outcome = train(model, &cfg, &spec, &geom).unwrap();
    println!(
        "done in {:.0}s: lr {lr} scen {scenarios} baseline {:.6} best {:.6} ratio {:.4} at iter {}",
        t.elapsed().as_secs_f64(),
        outcome.baseline_val_mse,
        outcome.best_val_mse,
        outcome.best_val_mse / outcome.baseline_val_mse,
        outcome.best_iteration
    );
}
