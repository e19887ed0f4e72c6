//! Per-column marginal CDFs as monotone cubic (PCHIP) splines, their
//! inverses, and dequantization of integer-coded columns.
//!
//! Continuous columns sample the empirical CDF at equi-width bin edges.
//! Integer-coded columns get an interval CDF: code `c` owns `[c, c + 1)`,
//! so the curve ramps from `P(X < c)` at `x = c` to `P(X <= c)` at
//! `x = c + 1`, with flat stretches over unobserved codes. Dequantization
//! then draws, per occurrence of `c`, a uniform level inside that ramp and
//! maps it back through the inverse CDF, which spreads the code's mass
//! over its own interval while preserving order across codes.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
// test builds link std via dev-deps and resolve these methods inherently;
// plain no_std builds need the trait
#[allow(unused_imports)]
use num_traits::Float;

/// Default number of equi-width bins for continuous columns.
pub const DEFAULT_BINS: usize = 5000;
/// Resolution of the precomputed inverse lookup table.
pub const INVERT_LUT_RESOLUTION: usize = 4096;
/// Guaranteed accuracy of [`MarginalCdf::invert_cdf`] in CDF units.
pub const INVERT_TOL: f64 = 1e-3;
const INVERT_ITERS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum FitError {
    Empty,
    NonFinite { row: usize },
    /// Integer-coded fit requested on non-integral data.
    NonIntegral { row: usize },
}

impl core::fmt::Display for FitError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FitError::Empty => write!(f, "cannot fit a marginal on an empty column"),
            FitError::NonFinite { row } => write!(f, "row {row}: non-finite value"),
            FitError::NonIntegral { row } => {
                write!(f, "row {row}: non-integral value in integer-coded column")
            }
        }
    }
}

impl core::error::Error for FitError {}

/// A monotone spline CDF: ascending knots, values in `[0, 1]` from exactly
/// 0 to exactly 1, with Fritsch–Carlson tangents.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalCdf {
    knots_x: Vec<f64>,
    knots_y: Vec<f64>,
    derivs: Vec<f64>,
    /// `x` positions of uniform CDF levels; rebuilt, never serialized.
    inverse_lut: Vec<f64>,
}

impl MarginalCdf {
    /// Rebuild a spline from persisted knots and tangents.
    pub fn from_parts(knots_x: Vec<f64>, knots_y: Vec<f64>, derivs: Vec<f64>) -> Result<Self, FitError> {
        assert!(
            knots_x.len() >= 2 && knots_x.len() == knots_y.len() && knots_x.len() == derivs.len(),
            "knot arrays must agree and hold at least two entries"
        );
        for (i, w) in knots_x.windows(2).enumerate() {
            assert!(w[0] < w[1], "knot x must be strictly ascending at {i}");
        }
        for (i, w) in knots_y.windows(2).enumerate() {
            assert!(w[0] <= w[1], "knot y must be non-decreasing at {i}");
        }
        assert_eq!(*knots_y.first().unwrap(), 0.0, "first knot must sit at 0");
        assert_eq!(*knots_y.last().unwrap(), 1.0, "last knot must sit at 1");
        let mut m = MarginalCdf { knots_x, knots_y, derivs, inverse_lut: Vec::new() };
        m.inverse_lut = m.build_lut();
        Ok(m)
    }

    pub fn knots_x(&self) -> &[f64] {
        &self.knots_x
    }

    pub fn knots_y(&self) -> &[f64] {
        &self.knots_y
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    /// `(min, max)` of the supported domain.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots_x[0], *self.knots_x.last().unwrap())
    }

    /// Evaluate the CDF; 0 below the domain, 1 above, clamped to `[0, 1]`.
    pub fn eval_cdf(&self, x: f64) -> f64 {
        if x.is_nan() || x <= self.knots_x[0] {
            return 0.0;
        }
        if x >= *self.knots_x.last().unwrap() {
            return 1.0;
        }
        let seg = self.knots_x.partition_point(|&kx| kx <= x) - 1;
        let (x0, x1) = (self.knots_x[seg], self.knots_x[seg + 1]);
        let (y0, y1) = (self.knots_y[seg], self.knots_y[seg + 1]);
        let (d0, d1) = (self.derivs[seg], self.derivs[seg + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (h00 * y0 + h * h10 * d0 + h01 * y1 + h * h11 * d1).clamp(0.0, 1.0)
    }

    /// Inverse CDF: returns `x` with `|eval_cdf(x) - u| <=` [`INVERT_TOL`].
    /// LUT bracket plus a short bisection refinement.
    pub fn invert_cdf(&self, u: f64) -> f64 {
        if u.is_nan() || u <= 0.0 {
            return self.knots_x[0];
        }
        if u >= 1.0 {
            return *self.knots_x.last().unwrap();
        }
        let r = self.inverse_lut.len();
        let idx = ((u * (r - 1) as f64) as usize).min(r - 2);
        let (mut lo, mut hi) = (self.inverse_lut[idx], self.inverse_lut[idx + 1]);
        for _ in 0..INVERT_ITERS {
            let mid = 0.5 * (lo + hi);
            if self.eval_cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn build_lut(&self) -> Vec<f64> {
        let r = INVERT_LUT_RESOLUTION;
        let mut lut = Vec::with_capacity(r);
        for i in 0..r {
            let u = i as f64 / (r - 1) as f64;
            lut.push(self.solve_level(u));
        }
        lut
    }

    /// Leftmost x with `eval_cdf(x) >= u`, resolved to build-time precision.
    fn solve_level(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.knots_x[0];
        }
        if u >= 1.0 {
            return *self.knots_x.last().unwrap();
        }
        let idx = self.knots_y.partition_point(|&ky| ky < u);
        if self.knots_y[idx] == u {
            return self.knots_x[idx];
        }
        let seg = idx - 1;
        let (mut lo, mut hi) = (self.knots_x[seg], self.knots_x[seg + 1]);
        for _ in 0..52 {
            let mid = 0.5 * (lo + hi);
            if self.eval_cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Fit a marginal CDF. `integer_coded` selects the interval construction
/// (discrete and categorical columns); otherwise the empirical CDF is
/// sampled at `bins` equi-width edges.
pub fn fit_marginal(values: &[f64], bins: usize, integer_coded: bool) -> Result<MarginalCdf, FitError> {
    if values.is_empty() {
        return Err(FitError::Empty);
    }
    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
        return Err(FitError::NonFinite { row });
    }
    let bins = bins.max(1);
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let (kx, ky) = if integer_coded {
        if let Some(row) = values.iter().position(|&v| v != v.trunc()) {
            return Err(FitError::NonIntegral { row });
        }
        interval_knots(&sorted, bins)
    } else {
        continuous_knots(&sorted, bins)
    };
    let derivs = fritsch_carlson(&kx, &ky);
    MarginalCdf::from_parts(kx, ky, derivs)
}

/// Exact interval CDF for integer codes: a ramp across each observed
/// code's unit interval, flats across gaps. Downsampled onto equi-width
/// edges when the exact polyline would exceed the knot budget.
fn interval_knots(sorted: &[f64], bins: usize) -> (Vec<f64>, Vec<f64>) {
    let n = sorted.len() as f64;
    let mut kx = Vec::new();
    let mut ky = Vec::new();
    kx.push(sorted[0]);
    ky.push(0.0);
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        let cum = j as f64 / n;
        let right = v + 1.0;
        kx.push(right);
        ky.push(cum);
        if j < sorted.len() && sorted[j] > right {
            kx.push(sorted[j]);
            ky.push(cum);
        }
        i = j;
    }
    *ky.last_mut().unwrap() = 1.0;
    if kx.len() > bins + 1 {
        return resample_polyline(&kx, &ky, bins);
    }
    (kx, ky)
}

/// Empirical CDF at equi-width edges; the first edge is pinned to 0 so the
/// spline starts exactly at the data minimum.
fn continuous_knots(sorted: &[f64], bins: usize) -> (Vec<f64>, Vec<f64>) {
    let n = sorted.len() as f64;
    let (min, max) = (sorted[0], *sorted.last().unwrap());
    if min == max {
        // Degenerate point mass on a continuous column: a sharp step.
        let w = f64::max(min.abs(), 1.0) * 1e-9;
        return (alloc::vec![min - w, min], alloc::vec![0.0, 1.0]);
    }
    let span = max - min;
    let mut kx = Vec::with_capacity(bins + 1);
    let mut ky = Vec::with_capacity(bins + 1);
    for j in 0..=bins {
        let e = if j == bins { max } else { min + span * (j as f64 / bins as f64) };
        if let Some(&prev) = kx.last() {
            if e <= prev {
                continue; // collapsed duplicate edge
            }
        }
        let y = if j == 0 { 0.0 } else { sorted.partition_point(|&t| t <= e) as f64 / n };
        kx.push(e);
        ky.push(y);
    }
    *ky.last_mut().unwrap() = 1.0;
    (kx, ky)
}

/// Sample a piecewise-linear CDF polyline at `bins` equi-width edges.
fn resample_polyline(px: &[f64], py: &[f64], bins: usize) -> (Vec<f64>, Vec<f64>) {
    let (min, max) = (px[0], *px.last().unwrap());
    let span = max - min;
    let mut kx = Vec::with_capacity(bins + 1);
    let mut ky = Vec::with_capacity(bins + 1);
    for j in 0..=bins {
        let e = if j == bins { max } else { min + span * (j as f64 / bins as f64) };
        if let Some(&prev) = kx.last() {
            if e <= prev {
                continue;
            }
        }
        kx.push(e);
        ky.push(polyline_at(px, py, e));
    }
    ky[0] = 0.0;
    *ky.last_mut().unwrap() = 1.0;
    (kx, ky)
}

fn polyline_at(px: &[f64], py: &[f64], x: f64) -> f64 {
    if x <= px[0] {
        return py[0];
    }
    if x >= *px.last().unwrap() {
        return *py.last().unwrap();
    }
    let seg = px.partition_point(|&kx| kx <= x) - 1;
    let t = (x - px[seg]) / (px[seg + 1] - px[seg]);
    py[seg] + t * (py[seg + 1] - py[seg])
}

/// Fritsch–Carlson monotone tangents for non-decreasing data.
fn fritsch_carlson(kx: &[f64], ky: &[f64]) -> Vec<f64> {
    let n = kx.len();
    if n == 2 {
        let s = (ky[1] - ky[0]) / (kx[1] - kx[0]);
        return alloc::vec![s, s];
    }
    let h: Vec<f64> = kx.windows(2).map(|w| w[1] - w[0]).collect();
    let s: Vec<f64> = ky
        .windows(2)
        .zip(&h)
        .map(|(w, &h)| (w[1] - w[0]) / h)
        .collect();
    let mut d = alloc::vec![0.0; n];
    for k in 1..n - 1 {
        // weighted harmonic mean; zero across sign changes or flats
        if s[k - 1] * s[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / s[k - 1] + w2 / s[k]);
        }
    }
    d[0] = endpoint_tangent(h[0], h[1], s[0], s[1]);
    d[n - 1] = endpoint_tangent(h[n - 2], h[n - 3], s[n - 2], s[n - 3]);
    d
}

/// One-sided three-point estimate with the usual shape-preserving clamps.
fn endpoint_tangent(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d * s0 <= 0.0 {
        0.0
    } else if s0 * s1 <= 0.0 && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

/// Replace every occurrence of integer code `c` with a draw from the
/// code's own stretch of the marginal: `u ~ U[F(c), F(c+1))`, mapped back
/// through the inverse CDF. Deterministic for a fixed seed, and order
/// statistics across codes are preserved.
pub fn dequantize_column(codes: &[f64], m: &MarginalCdf, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    codes
        .iter()
        .map(|&c| {
            let lo = m.eval_cdf(c);
            let hi = m.eval_cdf(c + 1.0);
            let u = lo + rng.gen::<f64>() * (hi - lo);
            m.invert_cdf(u)
        })
        .collect()
}
