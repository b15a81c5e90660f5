//! SEM-aware ranking on reference MLP faithfulness (ROAD) means.
//!
//! Neighbours tie when their means are within the larger SEM; ties chain,
//! and ranks are dense.
//!
//! `cargo run --example ranking`

use xaibench::benchmark::rank_methods;
use xaibench::metrics::Aggregate;

fn main() {
    let reference = [
        ("FusionGrad", 0.61, 0.04),
        ("InputGradients", 0.99, 0.02),
        ("LRP-z", 0.99, 0.02),
        ("Integrated Gradients", 1.000, 0.02),
        ("SmoothGrad", 0.65, 0.04),
        ("LRP-alpha-beta", 0.91, 0.02),
        ("Gradient", 0.66, 0.04),
        ("NoiseGrad", 0.61, 0.03),
    ];
    let scores: Vec<Aggregate> = reference.iter().map(|&(_, mean, sem)| Aggregate { mean, sem, n: 50 }).collect();
    let ranks = rank_methods(&scores, true);
    let mut order: Vec<usize> = (0..reference.len()).collect();
    order.sort_by_key(|&k| ranks[k]);
    for k in order {
        let (name, mean, sem) = reference[k];
        println!("{:>2}. {name:<22} {mean:.3} ± {sem:.2}", ranks[k]);
    }
}
