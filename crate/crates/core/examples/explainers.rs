//! Explains one correctly classified test map with every method and shows
//! how much of each map's positive relevance falls inside the ROI.
//!
//! `cargo run --release --example explainers -- [seed]`

use xaibench::benchmark::{select_samples, BenchmarkConfig};
use xaibench::datagen::{generate, DatasetConfig};
use xaibench::explain::{explanation_seed, Explainer, Method, XaiConfig};
use xaibench::models::{train, Arch, ModelSpec, TrainConfig};

fn main() -> xaibench::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let ds = generate(&DatasetConfig { seed, ..DatasetConfig::default() })?;
    let model = train(&ModelSpec::for_dataset(Arch::Mlp, &ds), &ds, &TrainConfig { seed, ..TrainConfig::default() })?;
    let bench = BenchmarkConfig { samples: 1, ..BenchmarkConfig::default() };
    let id = select_samples(&model, &ds, &bench, seed)?[0];
    let (x, class) = (ds.sample(id), ds.class_label[id]);
    println!("sample {id}: year {:.0}, class {class}", ds.year(id));

    let roi = ds.roi_mask();
    println!("{:<16} {:>10} {:>10} {:>10}", "method", "sum", "max |R|", "roi share");
    for method in Method::ALL {
        let e = Explainer::new(method, XaiConfig::default(), ds.value_range())?;
        let r = e.relevance(&model.network, &x, class, explanation_seed(seed, method, id))?;
        let pos: f64 = r.data().iter().map(|v| v.max(0.0)).sum();
        let inside: f64 = r.data().iter().zip(&roi).filter(|(_, &m)| m).map(|(v, _)| v.max(0.0)).sum();
        let peak = r.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let share = if pos > 0.0 { inside / pos } else { 0.0 };
        println!("{:<16} {:>10.4} {:>10.4} {:>10.3}", method.id(), r.sum(), peak, share);
    }
    println!("roi covers {:.3} of the map", roi.iter().filter(|&&m| m).count() as f64 / roi.len() as f64);
    Ok(())
}
