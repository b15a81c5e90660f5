//! Generates the default synthetic ensemble and prints what it contains.
//!
//! `cargo run --release --example datagen -- [seed]`

use xaibench::datagen::{generate, DatasetConfig, Split};

fn main() -> xaibench::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = DatasetConfig { seed, ..DatasetConfig::default() };
    let ds = generate(&cfg)?;
    let [v, h] = ds.map_shape();
    println!("{} maps of {v}x{h}, {} members x {} years, {} classes", ds.len(), cfg.members, cfg.years, cfg.classes);
    for split in [Split::Train, Split::Val, Split::Test] {
        println!("  {split:?}: {} maps", ds.indices(split).len());
    }
    let (lo, hi) = ds.value_range();
    println!("standardized values in [{lo:.2}, {hi:.2}]");

    // The ROI carries the year signal: its mean climbs with the year, the rest stays flat.
    let roi = ds.roi_mask();
    let mean_where = |i: usize, inside: bool| {
        let x = ds.sample(i);
        let vals: Vec<f64> = x.data().iter().zip(&roi).filter(|(_, &r)| r == inside).map(|(v, _)| *v).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    println!("{:>6} {:>6} {:>10} {:>10}", "year", "class", "roi mean", "rest mean");
    for year in (0..cfg.years).step_by(cfg.years / 8) {
        let i = year; // member 0
        println!(
            "{:>6.0} {:>6} {:>10.3} {:>10.3}",
            ds.year(i),
            ds.class_label[i],
            mean_where(i, true),
            mean_where(i, false)
        );
    }
    println!("class centres: {:?}", ds.central_year.iter().map(|y| *y as i64).collect::<Vec<_>>());
    Ok(())
}
