//! Checks the exact properties the attribution code relies on, on a trained
//! network of each architecture: gradients against central finite
//! differences, LRP-z conservation and integrated-gradients completeness.
//!
//! `cargo run --release --example attribution_axioms`

use xaibench::datagen::{generate, DatasetConfig};
use xaibench::explain::{gradient, integrated_gradients, lrp, LrpVariant};
use xaibench::models::{train, Arch, ModelSpec, TrainConfig};
use xaibench::Tensor;

fn main() -> xaibench::Result<()> {
    let ds = generate(&DatasetConfig::default())?;
    let hyper = TrainConfig { epochs: 10, ..TrainConfig::default() };
    for arch in [Arch::Mlp, Arch::Cnn] {
        let net = train(&ModelSpec::for_dataset(arch, &ds), &ds, &hyper)?.network;
        let mut worst = [0.0f64; 3];
        for i in (0..ds.len()).step_by(ds.len() / 20).take(20) {
            let x = ds.sample(i);
            let c = ds.class_label[i];
            let logit = |x: &Tensor| net.logits(x).map(|l| l.data()[c]);
            let f = logit(&x)?;

            let g = gradient(&net, &x, c)?;
            let k = i % x.len();
            let h = 1e-5;
            let mut up = x.clone();
            up.data_mut()[k] += h;
            let mut down = x.clone();
            down.data_mut()[k] -= h;
            let fd = (logit(&up)? - logit(&down)?) / (2.0 * h);
            worst[0] = worst[0].max((g.data()[k] - fd).abs() / fd.abs().max(1e-8));

            let r = lrp(&net, &x, c, LrpVariant::Z)?;
            worst[1] = worst[1].max((r.sum() - f).abs() / f.abs());

            let base = Tensor::zeros(x.shape());
            let ig = integrated_gradients(&net, &x, c, &base, 256)?;
            let delta = f - logit(&base)?;
            worst[2] = worst[2].max((ig.sum() - delta).abs() / delta.abs());
        }
        println!("{}:", arch.name());
        println!("  gradient vs finite difference, worst relative error {:.2e}", worst[0]);
        println!("  LRP-z |sum R - logit| / |logit|, worst                {:.2e}", worst[1]);
        println!("  IG completeness (256 steps), worst relative error     {:.2e}", worst[2]);
    }
    Ok(())
}
