//! Synthetic table generation with controlled dependence.
//!
//! Rows are drawn from a Gaussian copula: a correlated standard-normal
//! vector is pushed through Φ to get dependent uniforms, and each uniform
//! through a column-shape quantile function. The normal correlation ρ that
//! realizes a Kendall τ target is ρ = sin(πτ/2), so generated tables have
//! *known* pairwise rank correlation — the lever the accuracy experiments
//! turn.

use std::f64::consts::PI;

use colse_core::table::{build_numeric_column, build_string_column, ColumnKind, Table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Marginal shape of one synthetic column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthKind {
    /// Continuous, uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Continuous Gaussian.
    Normal { mean: f64, sd: f64 },
    /// Integer values `0..levels`; `skew` ≥ 0 weights level k by
    /// (k+1)^−skew (0 = uniform, larger = mass on low codes).
    Discrete { levels: usize, skew: f64 },
    /// Like `Discrete` but emitted as labels `c000.., c001..`.
    Categorical { levels: usize, skew: f64 },
}

/// Pairwise Kendall-τ targets between columns.
#[derive(Debug, Clone, PartialEq)]
pub enum TauSpec {
    /// Identity correlation: independent columns.
    Independent,
    /// One τ shared by every pair.
    Equi(f64),
    /// Upper triangle, row-major: τ(0,1), τ(0,2), …, τ(n−2,n−1).
    Pairwise(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub rows: usize,
    pub columns: Vec<(String, SynthKind)>,
    pub tau: TauSpec,
    pub seed: u64,
}

/// Generate a table per the config. Deterministic under seed.
///
/// # Panics
/// On an ill-formed config: zero rows/columns, τ outside (−1, 1), or a
/// `Pairwise` triangle of the wrong length.
pub fn generate_table(cfg: &SynthConfig) -> Table {
    let n = cfg.columns.len();
    assert!(cfg.rows > 0, "synthetic table needs at least one row");
    assert!(n > 0, "synthetic table needs at least one column");

    let corr = correlation_matrix(n, &cfg.tau);
    let chol = cholesky_with_shrink(corr, n);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    // Column-major uniforms: z = L·g per row, u = Φ(z).
    let mut uniforms: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.rows); n];
    let mut g = vec![0.0; n];
    for _ in 0..cfg.rows {
        for gi in g.iter_mut() {
            *gi = standard_normal(&mut rng);
        }
        for i in 0..n {
            let mut z = 0.0;
            for j in 0..=i {
                z += chol[i * n + j] * g[j];
            }
            uniforms[i].push(std_normal_cdf(z));
        }
    }

    let mut columns = Vec::with_capacity(n);
    let mut numeric = Vec::with_capacity(n);
    for ((name, kind), us) in cfg.columns.iter().zip(&uniforms) {
        let (meta, values) = match *kind {
            SynthKind::Uniform { lo, hi } => {
                let vals = us.iter().map(|&u| lo + (hi - lo) * u).collect();
                build_numeric_column(name, vals, Some(ColumnKind::Continuous)).unwrap()
            }
            SynthKind::Normal { mean, sd } => {
                let vals = us.iter().map(|&u| mean + sd * std_normal_quantile(u)).collect();
                build_numeric_column(name, vals, Some(ColumnKind::Continuous)).unwrap()
            }
            SynthKind::Discrete { levels, skew } => {
                let q = DiscreteQuantile::new(levels, skew);
                let vals = us.iter().map(|&u| q.level(u) as f64).collect();
                build_numeric_column(name, vals, Some(ColumnKind::DiscreteNumeric)).unwrap()
            }
            SynthKind::Categorical { levels, skew } => {
                let q = DiscreteQuantile::new(levels, skew);
                let labels: Vec<String> =
                    us.iter().map(|&u| format!("c{:03}", q.level(u))).collect();
                build_string_column(name, &labels).unwrap()
            }
        };
        columns.push(meta);
        numeric.push(values);
    }
    Table::from_parts(columns, numeric).unwrap()
}

/// Correlation matrix (row-major n×n) realizing the τ targets under a
/// Gaussian copula.
fn correlation_matrix(n: usize, tau: &TauSpec) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    let mut set = |i: usize, j: usize, t: f64| {
        assert!(t > -1.0 && t < 1.0, "tau target must lie in (-1, 1)");
        let rho = (PI * t / 2.0).sin();
        m[i * n + j] = rho;
        m[j * n + i] = rho;
    };
    match tau {
        TauSpec::Independent => {}
        TauSpec::Equi(t) => {
            for i in 0..n {
                for j in i + 1..n {
                    set(i, j, *t);
                }
            }
        }
        TauSpec::Pairwise(ts) => {
            assert_eq!(ts.len(), n * (n - 1) / 2, "pairwise tau triangle length");
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    set(i, j, ts[k]);
                    k += 1;
                }
            }
        }
    }
    m
}

/// Lower-triangular Cholesky factor. An arbitrary pairwise-τ triangle need
/// not be positive definite; shrink off-diagonals toward identity until
/// factorization succeeds (attenuates every dependence equally).
fn cholesky_with_shrink(mut m: Vec<f64>, n: usize) -> Vec<f64> {
    for _ in 0..64 {
        if let Some(l) = cholesky(&m, n) {
            return l;
        }
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m[i * n + j] *= 0.95;
                }
            }
        }
    }
    // identity always factors; unreachable in practice
    cholesky(&m, n).expect("correlation matrix failed to factor after shrinking")
}

fn cholesky(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 1e-12 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// One standard-normal draw (Box–Muller, first coordinate).
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Φ(z) via erfc for full-tail accuracy.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Φ⁻¹(u), Acklam's rational approximation (~1.15e-9 relative error),
/// good far beyond what data generation needs.
pub fn std_normal_quantile(u: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&u));
    let u = u.clamp(1e-300, 1.0 - 1e-16);

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const U_LOW: f64 = 0.02425;

    if u < U_LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - U_LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - u).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Quantile function over `levels` weights w_k ∝ (k+1)^−skew.
pub(crate) struct DiscreteQuantile {
    cum: Vec<f64>,
}

impl DiscreteQuantile {
    pub(crate) fn new(levels: usize, skew: f64) -> Self {
        assert!(levels >= 1, "discrete column needs at least one level");
        assert!(skew >= 0.0, "skew must be non-negative");
        let mut cum = Vec::with_capacity(levels);
        let mut total = 0.0;
        for k in 0..levels {
            total += ((k + 1) as f64).powf(-skew);
            cum.push(total);
        }
        for c in cum.iter_mut() {
            *c /= total;
        }
        DiscreteQuantile { cum }
    }

    pub(crate) fn level(&self, u: f64) -> usize {
        self.cum.partition_point(|&c| c < u).min(self.cum.len() - 1)
    }
}
