use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn magnitudes(phi: &Tensor, metric: &'static str) -> Result<(Vec<f64>, f64)> {
    let a: Vec<f64> = phi.data().iter().map(|v| v.abs()).collect();
    let total: f64 = a.iter().sum();
    if !(total > 0.0) {
        return Err(Error::metric(metric, "explanation is all zero"));
    }
    Ok((a, total))
}

/// Shannon entropy (nats) of `|Φ_i| / Σ|Φ_j|`. Lower is more concise.
pub fn complexity_entropy(phi: &Tensor) -> Result<f64> {
    let (a, total) = magnitudes(phi, "complexity")?;
    let h: f64 = a.iter().map(|&v| v / total).filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum();
    // every term is >= 0; abs() only turns a -0.0 sum into 0.0
    Ok(h.abs())
}

/// Gini index of the sorted magnitudes. Higher is sparser.
pub fn sparseness_gini(phi: &Tensor) -> Result<f64> {
    let (mut a, total) = magnitudes(phi, "sparseness")?;
    a.sort_by(f64::total_cmp);
    let d = a.len() as f64;
    let num: f64 = a.iter().enumerate().map(|(i, &v)| (2.0 * (i as f64 + 1.0) - d - 1.0) * v).sum();
    Ok(num / (d * total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entropy_examples() {
        let d = 864;
        let uniform = Tensor::full(&[d], 0.3);
        assert!((complexity_entropy(&uniform).unwrap() - (d as f64).ln()).abs() < 1e-9);
        let mut one_hot = Tensor::zeros(&[d]);
        one_hot.data_mut()[17] = -2.0;
        assert_eq!(complexity_entropy(&one_hot).unwrap(), 0.0);
        let two = Tensor::from_vec(vec![1.0, 3.0]);
        assert!((complexity_entropy(&two).unwrap() - 0.5623).abs() < 1e-4);
        assert!(complexity_entropy(&Tensor::zeros(&[4])).is_err());
    }

    #[test]
    fn gini_examples() {
        assert_eq!(sparseness_gini(&Tensor::full(&[10], 0.5)).unwrap(), 0.0);
        let mut one_hot = Tensor::zeros(&[10]);
        one_hot.data_mut()[3] = 1.0;
        assert!((sparseness_gini(&one_hot).unwrap() - 0.9).abs() < 1e-12);
        assert!((sparseness_gini(&Tensor::from_vec(vec![3.0, 1.0])).unwrap() - 0.25).abs() < 1e-12);
        assert!(sparseness_gini(&Tensor::zeros(&[3])).is_err());
    }

    fn nonzero_map() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, 2..60).prop_filter("not all zero", |v| v.iter().any(|x| x.abs() > 1e-6))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn entropy_and_gini_ignore_order_and_scale(v in nonzero_map(), seed in any::<u64>(), k in 0.01f64..100.0) {
            let t = Tensor::from_vec(v.clone());
            let mut perm = v.clone();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut crate::rng::rng_for(seed, &[]));
            let p = Tensor::from_vec(perm);
            let s = t.scale(k);
            let (e, g) = (complexity_entropy(&t).unwrap(), sparseness_gini(&t).unwrap());
            prop_assert!((complexity_entropy(&p).unwrap() - e).abs() < 1e-9);
            prop_assert!((sparseness_gini(&p).unwrap() - g).abs() < 1e-9);
            prop_assert!((complexity_entropy(&s).unwrap() - e).abs() < 1e-9);
            prop_assert!((sparseness_gini(&s).unwrap() - g).abs() < 1e-9);
            prop_assert!(e >= -1e-12 && e <= (v.len() as f64).ln() + 1e-9);
            prop_assert!(g >= -1e-12 && g < 1.0);
        }
    }
}
