//! Gumbel pair copulas and their calibration from Kendall's tau.
//!
//! The Gumbel family covers independence through strong positive
//! association with a single parameter `theta >= 1`:
//!
//! `C(u, v) = exp(-((-ln u)^t + (-ln v)^t)^(1/t))`
//!
//! Powers are taken in log space so large `theta` stays finite, and every
//! result is clamped into the Frechet-Hoeffding envelope.

use alloc::vec::Vec;
use rand::{seq::index::sample, SeedableRng};
use rand_chacha::ChaCha12Rng;
// test builds link std via dev-deps and resolve these methods inherently;
// plain no_std builds need the trait
#[allow(unused_imports)]
use num_traits::Float;

/// Upper cap for the Gumbel parameter; tau above `1 - 1/THETA_MAX`
/// saturates here.
pub const THETA_MAX: f64 = 50.0;
/// Rows sampled per pair when estimating tau on large tables.
pub const TAU_SUBSAMPLE: usize = 10_000;
/// Interior clamp applied to CDF arguments before taking logs.
const U_CLAMP: f64 = 1e-15;
/// Fixed seed for the tau row subsample, so refits are reproducible.
const TAU_SAMPLE_SEED: u64 = 0xC01_5E;

/// Gumbel copula CDF with exact boundary behaviour.
pub fn gumbel_cdf(u: f64, v: f64, theta: f64) -> f64 {
    debug_assert!(theta >= 1.0, "gumbel theta must be >= 1, got {theta}");
    // grounded boundaries first: axioms hold exactly, not just to rounding
    if u <= 0.0 || v <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 && v >= 1.0 {
        return 1.0;
    }
    if u >= 1.0 {
        return v;
    }
    if v >= 1.0 {
        return u;
    }
    if theta == 1.0 {
        return u * v;
    }
    let uc = u.clamp(U_CLAMP, 1.0 - U_CLAMP);
    let vc = v.clamp(U_CLAMP, 1.0 - U_CLAMP);
    // ln w = theta * ln(-ln u); sum the w's via log-sum-exp
    let lw1 = theta * (-uc.ln()).ln();
    let lw2 = theta * (-vc.ln()).ln();
    let (hi, lo) = if lw1 >= lw2 { (lw1, lw2) } else { (lw2, lw1) };
    let ln_sum = hi + (lo - hi).exp().ln_1p();
    let c = (-(ln_sum / theta).exp()).exp();
    c.clamp((u + v - 1.0).max(0.0), u.min(v))
}

/// Tie-corrected Kendall's tau (`tau_b`) in O(m log m). Tables larger than
/// [`TAU_SUBSAMPLE`] rows are subsampled deterministically. Returns 0 when
/// either margin is entirely tied.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "tau inputs must pair up");
    let len = x.len();
    if len < 2 {
        return 0.0;
    }
    let mut pairs: Vec<(f64, f64)> = if len > TAU_SUBSAMPLE {
        let mut rng = ChaCha12Rng::seed_from_u64(TAU_SAMPLE_SEED);
        sample(&mut rng, len, TAU_SUBSAMPLE)
            .iter()
            .map(|i| (x[i], y[i]))
            .collect()
    } else {
        x.iter().copied().zip(y.iter().copied()).collect()
    };
    let m = pairs.len() as i64;
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = m * (m - 1) / 2;
    let mut n1 = 0i64; // pairs tied in x
    let mut n3 = 0i64; // pairs tied in both
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        let g = (j - i) as i64;
        n1 += g * (g - 1) / 2;
        let mut k = i;
        while k < j {
            let mut l = k;
            while l < j && pairs[l].1 == pairs[k].1 {
                l += 1;
            }
            let gg = (l - k) as i64;
            n3 += gg * (gg - 1) / 2;
            k = l;
        }
        i = j;
    }

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let discordant = {
        let mut buf = ys.clone();
        count_inversions(&mut ys, &mut buf)
    };

    ys = pairs.iter().map(|p| p.1).collect();
    ys.sort_unstable_by(f64::total_cmp);
    let mut n2 = 0i64; // pairs tied in y
    let mut i = 0;
    while i < ys.len() {
        let mut j = i;
        while j < ys.len() && ys[j] == ys[i] {
            j += 1;
        }
        let g = (j - i) as i64;
        n2 += g * (g - 1) / 2;
        i = j;
    }

    let den = ((n0 - n1) as f64).sqrt() * ((n0 - n2) as f64).sqrt();
    if den == 0.0 {
        return 0.0;
    }
    let num = (n0 - n1 - n2 + n3 - 2 * discordant) as f64;
    (num / den).clamp(-1.0, 1.0)
}

/// Stable merge sort counting strict inversions (`i < j`, `a[i] > a[j]`).
/// With input pre-sorted by `(x, y)` these are exactly the discordant
/// pairs: x-ties were tie-broken by y and never invert.
fn count_inversions(a: &mut [f64], buf: &mut [f64]) -> i64 {
    let n = a.len();
    if n <= 1 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = a.split_at_mut(mid);
    let mut inv = count_inversions(left, &mut buf[..mid]) + count_inversions(right, &mut buf[mid..]);
    let (mut i, mut j) = (0, 0);
    for slot in buf[..n].iter_mut() {
        if i < left.len() && (j >= right.len() || left[i] <= right[j]) {
            *slot = left[i];
            i += 1;
        } else {
            inv += (left.len() - i) as i64;
            *slot = right[j];
            j += 1;
        }
    }
    a.copy_from_slice(&buf[..n]);
    inv
}

/// Map Kendall's tau to the Gumbel parameter: `theta = 1 / (1 - tau)`,
/// floored at independence for negative association and capped at
/// [`THETA_MAX`].
pub fn theta_from_tau(tau: f64) -> f64 {
    if !(tau > 0.0) {
        return 1.0;
    }
    if tau >= 1.0 - 1.0 / THETA_MAX {
        return THETA_MAX;
    }
    1.0 / (1.0 - tau)
}

/// Symmetric matrix of pairwise Gumbel parameters, stored as the strict
/// upper triangle. The diagonal reads as independence.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl ThetaMatrix {
    /// All-independence matrix for `n` attributes.
    pub fn identity(n: usize) -> Self {
        ThetaMatrix { n, upper: alloc::vec![1.0; n * (n - 1) / 2] }
    }

    pub fn from_upper(n: usize, upper: Vec<f64>) -> Self {
        assert_eq!(upper.len(), n * (n - 1) / 2, "triangle length mismatch");
        assert!(upper.iter().all(|&t| (1.0..=THETA_MAX).contains(&t)), "theta out of range");
        ThetaMatrix { n, upper }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "theta index out of range");
        if i == j {
            return 1.0;
        }
        self.upper[self.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, theta: f64) {
        assert!(i < self.n && j < self.n && i != j, "theta index out of range");
        assert!((1.0..=THETA_MAX).contains(&theta), "theta out of range");
        let k = self.idx(i, j);
        self.upper[k] = theta;
    }
}

/// Fit every pairwise theta from column data (sequential).
pub fn fit_theta_matrix(columns: &[&[f64]]) -> ThetaMatrix {
    let n = columns.len();
    let mut m = ThetaMatrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            m.set(i, j, theta_from_tau(kendall_tau(columns[i], columns[j])));
        }
    }
    m
}
