//! Trains the MLP and the CNN on the same dataset and reports accuracy and
//! the RMSE of the regressed year per split.
//!
//! `cargo run --release --example train_models -- [seed]`

use std::time::Instant;

use xaibench::datagen::{generate, DatasetConfig};
use xaibench::models::{evaluate_performance, train, Arch, ModelSpec, TrainConfig};

fn main() -> xaibench::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let ds = generate(&DatasetConfig { seed, ..DatasetConfig::default() })?;
    println!("chance accuracy {:.3}", 1.0 / ds.config.classes as f64);
    for arch in [Arch::Mlp, Arch::Cnn] {
        let spec = ModelSpec::for_dataset(arch, &ds);
        let t = Instant::now();
        let model = train(&spec, &ds, &TrainConfig { seed, ..TrainConfig::default() })?;
        let p = evaluate_performance(&model, &ds)?;
        let last = model.train_log.last().expect("at least one epoch");
        println!(
            "{}: {} parameters, {} epochs in {:.1?} (final val loss {:.3})",
            arch.name(),
            model.network.param_count(),
            model.train_log.len(),
            t.elapsed(),
            last.val_loss
        );
        for (name, s) in [("train", p.train), ("val", p.val), ("test", p.test)] {
            println!("  {name:<5} accuracy {:.3}  rmse {:.2} years", s.accuracy, s.rmse);
        }
    }
    Ok(())
}
