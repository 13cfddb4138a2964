//! Multi-model comparison statistics: Tukey's honestly-significant-difference
//! test over all group pairs, backed by a numeric studentized range
//! distribution.
//!
//! The studentized range CDF is evaluated as a double integral: the CDF of
//! the range of `k` standard normals (inner, Gauss-Legendre) integrated
//! against the scaled-chi density of the pooled standard deviation estimate
//! (outer, adaptive Simpson with panels centered on the density's peak).
//! Unequal group sizes use the Tukey-Kramer standard error.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Pairwise significance threshold used in reports.
pub const SIGNIFICANCE_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub name: String,
    pub n: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    /// Index into [`GroupComparison::groups`].
    pub group_a: usize,
    pub group_b: usize,
    /// `mean_a - mean_b`.
    pub mean_diff: f64,
    pub q_statistic: f64,
    pub p_value: f64,
    /// `p_value < 0.05`.
    pub significant: bool,
}

/// Result of [`tukey_hsd`]: group summaries, the pooled within-group
/// variance, and one comparison per unordered group pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub groups: Vec<GroupSummary>,
    pub ms_within: f64,
    pub df: f64,
    pub pairs: Vec<PairwiseComparison>,
}

/// Tukey HSD over named groups of per-case values.
///
/// Uses the pooled within-group variance `MSW` with `N - k` degrees of
/// freedom and the Tukey-Kramer statistic
/// `q = |m_i - m_j| / sqrt(MSW/2 * (1/n_i + 1/n_j))`; p-values come from the
/// studentized range distribution with `k` groups. Each group needs at least
/// two values.
pub fn tukey_hsd(groups: &[(String, Vec<f64>)]) -> Result<GroupComparison> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument(
            "tukey_hsd needs at least two groups".into(),
        ));
    }
    for (name, values) in groups {
        if values.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "group `{name}` has {} value(s); need at least 2",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "group `{name}` contains non-finite values"
            )));
        }
    }

    let k = groups.len();
    let total_n: usize = groups.iter().map(|(_, v)| v.len()).sum();
    let df = (total_n - k) as f64;
    if df < 1.0 {
        return Err(Error::InvalidArgument(
            "fewer than 1 degree of freedom for the pooled variance".into(),
        ));
    }

    let summaries: Vec<GroupSummary> = groups
        .iter()
        .map(|(name, values)| GroupSummary {
            name: name.clone(),
            n: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
        })
        .collect();

    let ss_within: f64 = groups
        .iter()
        .zip(&summaries)
        .map(|((_, values), s)| {
            values
                .iter()
                .map(|v| (v - s.mean) * (v - s.mean))
                .sum::<f64>()
        })
        .sum();
    let ms_within = ss_within / df;

    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            let diff = summaries[i].mean - summaries[j].mean;
            let se = (ms_within / 2.0
                * (1.0 / summaries[i].n as f64 + 1.0 / summaries[j].n as f64))
                .sqrt();
            let (q, p) = if se == 0.0 {
                // All residuals are zero: identical groups are a sure null,
                // any mean difference a sure rejection.
                if diff == 0.0 {
                    (0.0, 1.0)
                } else {
                    (f64::INFINITY, 0.0)
                }
            } else {
                let q = diff.abs() / se;
                (q, studentized_range_sf(q, k, df))
            };
            pairs.push(PairwiseComparison {
                group_a: i,
                group_b: j,
                mean_diff: diff,
                q_statistic: q,
                p_value: p,
                significant: p < SIGNIFICANCE_ALPHA,
            });
        }
    }

    Ok(GroupComparison {
        groups: summaries,
        ms_within,
        df,
        pairs,
    })
}

#[inline]
fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[inline]
fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// 32-point Gauss-Legendre nodes/weights on `[-1, 1]`, computed once by
/// Newton iteration on the Legendre recurrence.
fn gauss_legendre_32() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = 32usize;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                // Legendre P_n(x) and derivative by recurrence.
                let (mut p0, mut p1) = (1.0f64, x);
                for m in 2..=n {
                    let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0f64, x);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            out.push((x, w));
        }
        out
    })
}

fn gl_integrate<F: Fn(f64) -> f64>(a: f64, b: f64, f: &F) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut sum = 0.0;
    for &(x, w) in gauss_legendre_32() {
        sum += w * f(c + h * x);
    }
    sum * h
}

/// CDF of the range of `k` independent standard normals:
/// `P(W_k <= w) = k ∫ φ(u) [Φ(u + w) - Φ(u)]^{k-1} du`.
pub fn range_cdf(k: usize, w: f64) -> f64 {
    assert!(k >= 2, "range needs at least two samples");
    if w <= 0.0 {
        return 0.0;
    }
    if !w.is_finite() {
        return 1.0;
    }
    const U_MAX: f64 = 9.5;
    const PANELS: usize = 12;
    let f = |u: f64| {
        let span = normal_cdf(u + w) - normal_cdf(u);
        normal_pdf(u) * span.powi(k as i32 - 1)
    };
    let step = 2.0 * U_MAX / PANELS as f64;
    let mut total = 0.0;
    for p in 0..PANELS {
        let a = -U_MAX + p as f64 * step;
        total += gl_integrate(a, a + step, &f);
    }
    (k as f64 * total).clamp(0.0, 1.0)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a >= b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 28)
}

/// Degrees of freedom above which the pooled-SD spread is numerically
/// irrelevant and the infinite-df branch is used.
const DF_INFINITE_CUTOFF: f64 = 1e7;

/// CDF of the studentized range `Q = W_k / S` with `k` groups and `df`
/// degrees of freedom in the pooled standard deviation (`df = inf` allowed).
pub fn studentized_range_cdf(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2, "studentized range needs k >= 2");
    assert!(df > 0.0, "df must be positive");
    if q <= 0.0 {
        return 0.0;
    }
    if !q.is_finite() {
        return 1.0;
    }
    if df.is_infinite() || df > DF_INFINITE_CUTOFF {
        return range_cdf(k, q);
    }

    // Density of S = sqrt(chi2_df / df).
    let ln_norm = std::f64::consts::LN_2 + 0.5 * df * (0.5 * df).ln() - ln_gamma(0.5 * df);
    let ln_density = |s: f64| ln_norm + (df - 1.0) * s.ln() - 0.5 * df * s * s;
    let integrand = move |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let ld = ln_density(s);
        if ld < -46.0 {
            return 0.0;
        }
        ld.exp() * range_cdf(k, q * s)
    };

    // Upper bound: walk out until the density is negligible.
    let mut s_hi = 1.0;
    while ln_density(s_hi) > -46.0 && s_hi < 64.0 {
        s_hi += 0.25;
    }

    // Peak of the density sits near 1 with width ~1/sqrt(2 df); pin panel
    // boundaries there so large df cannot hide the spike from the sampler.
    let w = 1.0 / (2.0 * df).sqrt();
    let mut knots = vec![
        0.0,
        (1.0 - 8.0 * w).max(0.0),
        (1.0 - 2.0 * w).max(0.0),
        1.0 + 2.0 * w,
        1.0 + 8.0 * w,
        s_hi,
    ];
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut total = 0.0;
    for pair in knots.windows(2) {
        if pair[1] > s_hi {
            break;
        }
        total += adaptive_simpson(&integrand, pair[0], pair[1].min(s_hi), 2e-11);
    }
    total.clamp(0.0, 1.0)
}

/// Survival function `P(Q > q)`.
pub fn studentized_range_sf(q: f64, k: usize, df: f64) -> f64 {
    (1.0 - studentized_range_cdf(q, k, df)).clamp(0.0, 1.0)
}
