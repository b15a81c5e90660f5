use serde::{Deserialize, Serialize};

/// Similarity between two maps used by the randomization metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Pearson,
    Spearman,
    /// Single-window structural similarity.
    Ssim,
}

impl Similarity {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Similarity::Pearson => pearson(a, b).unwrap_or(0.0),
            Similarity::Spearman => spearman(a, b).unwrap_or(0.0),
            Similarity::Ssim => ssim_global(a, b),
        }
    }
}

/// Pearson correlation, `None` when either series has zero variance
/// (up to rounding in the inputs).
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "pearson: length mismatch");
    let n = a.len() as f64;
    if a.len() < 2 {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let flat = |ss: f64, m: f64| ss <= 1e-24 * n * m * m || ss == 0.0;
    if flat(saa, ma) || flat(sbb, mb) {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    pearson(&ranks(a), &ranks(b))
}

/// SSIM over the whole map as one window. The data range is taken from both
/// maps together; `C1 = (0.01 L)²`, `C2 = (0.03 L)²`.
pub fn ssim_global(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "ssim: length mismatch");
    let n = a.len() as f64;
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range == 0.0 {
        return 1.0;
    }
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut vab, mut vaa, mut vbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        vab += (x - ma) * (y - mb);
        vaa += (x - ma).powi(2);
        vbb += (y - mb).powi(2);
    }
    let denom = (n - 1.0).max(1.0);
    let (vab, vaa, vbb) = (vab / denom, vaa / denom, vbb / denom);
    ((2.0 * ma * mb + c1) * (2.0 * vab + c2)) / ((ma * ma + mb * mb + c1) * (vaa + vbb + c2))
}
