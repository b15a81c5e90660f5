//! Each metric on hand-made maps whose score is known in closed form.
//!
//! `cargo run --example metric_oracles`

use xaibench::metrics::{
    complexity_entropy, normalize_inverse, normalize_max, relevance_rank_accuracy, sparseness_gini, ssim_global,
    top_k, trapezoid_auc,
};
use xaibench::Tensor;

fn map(values: &[f64]) -> Tensor {
    Tensor::new(vec![2, values.len() / 2], values.to_vec()).expect("even length")
}

fn main() -> xaibench::Result<()> {
    let d = 8;
    let uniform = map(&[1.0; 8]);
    let mut one_hot = vec![0.0; d];
    one_hot[3] = 1.0;
    let one_hot = map(&one_hot);

    println!("complexity (entropy)");
    println!("  uniform  {:.6}  (ln d = {:.6})", complexity_entropy(&uniform)?, (d as f64).ln());
    println!("  one-hot  {:.6}", complexity_entropy(&one_hot)?);
    println!("sparseness (Gini)");
    println!("  constant {:.6}", sparseness_gini(&uniform)?);
    println!("  one-hot  {:.6}  ((d-1)/d = {:.6})", sparseness_gini(&one_hot)?, (d - 1) as f64 / d as f64);

    // ROI is the first row; a map that is large exactly there localizes perfectly.
    let roi: Vec<bool> = (0..d).map(|k| k < 4).collect();
    let aligned = map(&[4.0, 3.0, 2.0, 1.0, 0.1, 0.0, 0.0, 0.2]);
    let flipped = map(&[0.1, 0.0, 0.0, 0.2, 4.0, 3.0, 2.0, 1.0]);
    println!("localization, ROI = first row");
    println!("  aligned  TopK {:.3}  RRA {:.3}", top_k(&aligned, &roi, 4)?, relevance_rank_accuracy(&aligned, &roi)?);
    println!("  flipped  TopK {:.3}  RRA {:.3}", top_k(&flipped, &roi, 4)?, relevance_rank_accuracy(&flipped, &roi)?);

    println!("normalization");
    println!("  lower is better  [2, 4, 8]       -> {:?}", normalize_inverse(&[2.0, 4.0, 8.0])?);
    println!("  higher is better [0.2, 0.4, 0.8] -> {:?}", normalize_max(&[0.2, 0.4, 0.8])?);

    let a = [0.1, -0.5, 0.9, 0.3];
    println!("SSIM self-similarity {:.6}", ssim_global(&a, &a));
    println!("trapezoid AUC of [1, 0.5] at [1%, 50%] removed: {:.4}", trapezoid_auc(&[0.01, 0.5], &[1.0, 0.5]));
    Ok(())
}
