use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Indices of the `k` largest magnitudes, ties going to the lower index.
fn top_indices(phi: &Tensor, k: usize) -> Vec<usize> {
    let a = phi.data();
    let mut idx: Vec<usize> = (0..a.len()).collect();
    idx.sort_by(|&i, &j| a[j].abs().total_cmp(&a[i].abs()).then(i.cmp(&j)));
    idx.truncate(k);
    idx
}

fn check(phi: &Tensor, roi: &[bool], metric: &'static str) -> Result<usize> {
    if roi.len() != phi.len() {
        return Err(Error::ShapeMismatch {
            context: metric,
            expected: vec![phi.len()],
            actual: vec![roi.len()],
        });
    }
    let n = roi.iter().filter(|&&b| b).count();
    if n == 0 {
        return Err(Error::metric(metric, "region of interest is empty"));
    }
    Ok(n)
}

/// Share of the `k` highest-ranked pixels that fall inside the ROI.
pub fn top_k(phi: &Tensor, roi: &[bool], k: usize) -> Result<f64> {
    check(phi, roi, "top_k")?;
    if k == 0 || k > phi.len() {
        return Err(Error::metric("top_k", format!("k must lie in 1..={}, got {k}", phi.len())));
    }
    let hits = top_indices(phi, k).into_iter().filter(|&i| roi[i]).count();
    Ok(hits as f64 / k as f64)
}

/// Share of the `|roi|` highest-ranked pixels that fall inside the ROI.
pub fn relevance_rank_accuracy(phi: &Tensor, roi: &[bool]) -> Result<f64> {
    let n = check(phi, roi, "rra")?;
    let hits = top_indices(phi, n).into_iter().filter(|&i| roi[i]).count();
    Ok(hits as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn roi_first(d: usize, n: usize) -> Vec<bool> {
        (0..d).map(|i| i < n).collect()
    }

    #[test]
    fn aligned_and_disjoint_maps() {
        let d = 100;
        let roi = roi_first(d, 20);
        let aligned = Tensor::from_vec((0..d).map(|i| if i < 20 { 1.0 + i as f64 } else { 0.1 }).collect());
        assert_eq!(top_k(&aligned, &roi, 10).unwrap(), 1.0);
        assert_eq!(relevance_rank_accuracy(&aligned, &roi).unwrap(), 1.0);
        let disjoint = Tensor::from_vec((0..d).map(|i| if i < 20 { 0.0 } else { 1.0 }).collect());
        assert_eq!(top_k(&disjoint, &roi, 10).unwrap(), 0.0);
        assert_eq!(relevance_rank_accuracy(&disjoint, &roi).unwrap(), 0.0);
        assert!(top_k(&aligned, &vec![false; d], 10).is_err());
        assert!(relevance_rank_accuracy(&aligned, &vec![false; d]).is_err());
    }

    #[test]
    fn uniform_random_maps_hit_the_roi_at_its_area_fraction() {
        let d = 864;
        let roi = roi_first(d, 48);
        let mut r = crate::rng::rng_for(0, &[]);
        let trials = 2000;
        let mean: f64 = (0..trials)
            .map(|_| {
                let m = Tensor::from_vec((0..d).map(|_| r.random::<f64>()).collect());
                relevance_rank_accuracy(&m, &roi).unwrap()
            })
            .sum::<f64>()
            / trials as f64;
        assert!((mean - 48.0 / 864.0).abs() < 0.005, "{mean}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn joint_permutation_and_scale_invariance(
            v in prop::collection::vec(-3.0f64..3.0, 10..80),
            roi_bits in prop::collection::vec(any::<bool>(), 80),
            seed in any::<u64>(),
            scale in 0.01f64..100.0,
        ) {
            let d = v.len();
            let mut roi: Vec<bool> = roi_bits[..d].to_vec();
            roi[0] = true;
            let k = (d / 10).max(1);
            let t = Tensor::from_vec(v.clone());
            let mut perm: Vec<usize> = (0..d).collect();
            perm.shuffle(&mut crate::rng::rng_for(seed, &[]));
            let pv = Tensor::from_vec(perm.iter().map(|&i| v[i]).collect());
            let proi: Vec<bool> = perm.iter().map(|&i| roi[i]).collect();
            // distinct magnitudes keep the top set well defined under reordering
            let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            mags.sort_by(f64::total_cmp);
            prop_assume!(mags.windows(2).all(|w| w[1] > w[0]));
            let (a, b) = (top_k(&t, &roi, k).unwrap(), relevance_rank_accuracy(&t, &roi).unwrap());
            prop_assert_eq!(top_k(&pv, &proi, k).unwrap(), a);
            prop_assert_eq!(relevance_rank_accuracy(&pv, &proi).unwrap(), b);
            prop_assert_eq!(top_k(&t.scale(scale), &roi, k).unwrap(), a);
            prop_assert_eq!(relevance_rank_accuracy(&t.scale(scale), &roi).unwrap(), b);
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        }
    }
}
