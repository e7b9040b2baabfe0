//! Descriptive and inferential statistics: group summaries, fixed-effects
//! one-way ANOVA (from raw samples or from summaries), Cohen's d, Pearson
//! correlation with its least-squares line, and F-distribution tail
//! probabilities.
//!
//! Variances use the sample (n − 1) convention throughout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Iteration cap for the incomplete-beta continued fraction.
const MAX_CF_ITERATIONS: usize = 10_000;
const CF_EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("degenerate: zero total variance")]
    ZeroTotalVariance,
    #[error("degenerate: pooled standard deviation is zero")]
    ZeroPooledSd,
    #[error("degenerate: constant variable")]
    ConstantVariable,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("incomplete beta did not converge for a={a}, b={b}, x={x} after {iterations} iterations (last step {last_delta:e})")]
    NonConvergence {
        a: f64,
        b: f64,
        x: f64,
        iterations: usize,
        last_delta: f64,
    },
}

/// Sample size, mean and sample standard deviation of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl GroupSummary {
    pub fn new(label: impl Into<String>, n: usize, mean: f64, sd: f64) -> Result<Self, StatsError> {
        if n < 2 {
            return Err(StatsError::InsufficientData { needed: 2, got: n });
        }
        if !mean.is_finite() || !sd.is_finite() || sd < 0.0 {
            return Err(StatsError::InvalidArgument(format!("mean {mean}, sd {sd}")));
        }
        Ok(Self {
            label: label.into(),
            n,
            mean,
            sd,
        })
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn variance(&self) -> f64 {
        self.sd * self.sd
    }
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Mean and sample SD of `samples`; requires at least two values.
pub fn summarize(samples: &[f64]) -> Result<GroupSummary, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::InsufficientData {
            needed: 2,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::InvalidArgument("non-finite sample".into()));
    }
    let m = mean(samples);
    let ss: f64 = samples.iter().map(|x| (x - m) * (x - m)).sum();
    Ok(GroupSummary {
        label: String::new(),
        n: samples.len(),
        mean: m,
        sd: (ss / (samples.len() - 1) as f64).sqrt(),
    })
}

/// Summary of the union of several groups, rebuilt from their summaries.
pub fn pooled_summary(groups: &[GroupSummary]) -> Result<GroupSummary, StatsError> {
    if groups.is_empty() {
        return Err(StatsError::TooFewGroups(0));
    }
    let n: usize = groups.iter().map(|g| g.n).sum();
    let grand = groups.iter().map(|g| g.n as f64 * g.mean).sum::<f64>() / n as f64;
    let sst: f64 = groups
        .iter()
        .map(|g| g.n as f64 * (g.mean - grand).powi(2) + (g.n - 1) as f64 * g.variance())
        .sum();
    GroupSummary::new("total", n, grand, (sst / (n - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    /// `+inf` when every group is constant but the means differ.
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
    pub ss_between: f64,
    pub ss_within: f64,
    pub eta_squared: f64,
    pub omega_squared: f64,
}

impl AnovaResult {
    pub fn ms_within(&self) -> f64 {
        self.ss_within / self.df_within as f64
    }

    pub fn ss_total(&self) -> f64 {
        self.ss_between + self.ss_within
    }
}

fn anova_from_parts(k: usize, n_total: usize, ss_between: f64, ss_within: f64) -> Result<AnovaResult, StatsError> {
    let df_between = k - 1;
    let df_within = n_total - k;
    let sst = ss_between + ss_within;
    if sst <= 0.0 {
        return Err(StatsError::ZeroTotalVariance);
    }
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;
    let (f, p) = if ss_within <= 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = ms_between / ms_within;
        (f, f_tail_p(f, df_between as u32, df_within as u32)?)
    };
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p,
        ss_between,
        ss_within,
        eta_squared: ss_between / sst,
        omega_squared: (ss_between - df_between as f64 * ms_within) / (sst + ms_within),
    })
}

/// Fixed-effects one-way ANOVA on raw samples.
pub fn anova_oneway<I, S>(groups: I) -> Result<AnovaResult, StatsError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[f64]>,
{
    let groups: Vec<S> = groups.into_iter().collect();
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    let mut means = Vec::with_capacity(groups.len());
    let mut ss_within = 0.0;
    let mut n_total = 0;
    for g in &groups {
        let g = g.as_ref();
        if g.len() < 2 {
            return Err(StatsError::InsufficientData {
                needed: 2,
                got: g.len(),
            });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::InvalidArgument("non-finite sample".into()));
        }
        let m = mean(g);
        ss_within += g.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
        n_total += g.len();
        means.push((g.len(), m));
    }
    let grand = groups.iter().flat_map(|g| g.as_ref().iter()).sum::<f64>() / n_total as f64;
    let ss_between = means.iter().map(|&(n, m)| n as f64 * (m - grand).powi(2)).sum();
    anova_from_parts(groups.len(), n_total, ss_between, ss_within)
}

/// One-way ANOVA computed from `(n, mean, sd)` per group.
pub fn anova_from_summary(groups: &[GroupSummary]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(g) = groups.iter().find(|g| g.n < 2) {
        return Err(StatsError::InsufficientData { needed: 2, got: g.n });
    }
    let n_total: usize = groups.iter().map(|g| g.n).sum();
    let grand = groups.iter().map(|g| g.n as f64 * g.mean).sum::<f64>() / n_total as f64;
    let ss_between = groups.iter().map(|g| g.n as f64 * (g.mean - grand).powi(2)).sum();
    let ss_within = groups.iter().map(|g| (g.n - 1) as f64 * g.variance()).sum();
    anova_from_parts(groups.len(), n_total, ss_between, ss_within)
}

/// `|m_a − m_b|` over the pooled sample SD.
pub fn cohens_d(a: &GroupSummary, b: &GroupSummary) -> Result<f64, StatsError> {
    if a.n < 2 || b.n < 2 {
        return Err(StatsError::InsufficientData {
            needed: 2,
            got: a.n.min(b.n),
        });
    }
    let pooled = (((a.n - 1) as f64 * a.variance() + (b.n - 1) as f64 * b.variance()) / (a.n + b.n - 2) as f64).sqrt();
    if pooled == 0.0 {
        if a.mean == b.mean {
            return Ok(0.0);
        }
        return Err(StatsError::ZeroPooledSd);
    }
    Ok((a.mean - b.mean).abs() / pooled)
}

/// A two-group comparison made after an omnibus test. No multiplicity correction is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub first: String,
    pub second: String,
    pub cohens_d: Option<f64>,
    pub anova: Option<AnovaResult>,
    pub correction: String,
}

pub fn pairwise_comparisons(groups: &[GroupSummary]) -> Vec<PairwiseComparison> {
    let mut out = Vec::new();
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            out.push(PairwiseComparison {
                first: a.label.clone(),
                second: b.label.clone(),
                cohens_d: cohens_d(a, b).ok(),
                anova: anova_from_summary(&[a.clone(), b.clone()]).ok(),
                correction: "uncorrected".into(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub r_squared: f64,
    pub n: usize,
    /// `r²(n−2)/(1−r²)`, infinite for a perfect fit.
    pub f_equivalent: f64,
    /// Two-sided, from the F(1, n−2) upper tail.
    pub p: f64,
    pub slope: f64,
    pub intercept: f64,
}

/// F statistic equivalent to a correlation of `r` over `n` pairs, with its p-value.
pub fn correlation_f(r: f64, n: usize) -> Result<(f64, f64), StatsError> {
    if n < 3 {
        return Err(StatsError::InsufficientData { needed: 3, got: n });
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(StatsError::InvalidArgument(format!("r = {r} outside [-1, 1]")));
    }
    let r2 = r * r;
    if r2 >= 1.0 {
        return Ok((f64::INFINITY, 0.0));
    }
    let f = r2 * (n - 2) as f64 / (1.0 - r2);
    Ok((f, f_tail_p(f, 1, (n - 2) as u32)?))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::InsufficientData { needed: 3, got: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::InvalidArgument("non-finite value".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantVariable);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let slope = sxy / sxx;
    let (f_equivalent, p) = correlation_f(r, n)?;
    Ok(CorrelationResult {
        r,
        r_squared: r * r,
        n,
        f_equivalent,
        p,
        slope,
        intercept: my - slope * mx,
    })
}

/// `P(F ≥ f)` for an F(df1, df2) variable.
pub fn f_tail_p(f: f64, df1: u32, df2: u32) -> Result<f64, StatsError> {
    if df1 == 0 || df2 == 0 {
        return Err(StatsError::InvalidArgument(format!(
            "degrees of freedom ({df1}, {df2})"
        )));
    }
    if f.is_nan() || f < 0.0 {
        return Err(StatsError::InvalidArgument(format!("F = {f}")));
    }
    if f == 0.0 {
        return Ok(1.0);
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    let (d1, d2) = (f64::from(df1), f64::from(df2));
    let x = d2 / (d2 + d1 * f);
    // 1 - x computed without cancellation for small f.
    let one_minus_x = d1 * f / (d2 + d1 * f);
    regularized_beta_split(d2 / 2.0, d1 / 2.0, x, one_minus_x)
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_beta(a: f64, b: f64, x: f64) -> Result<f64, StatsError> {
    regularized_beta_split(a, b, x, 1.0 - x)
}

fn regularized_beta_split(a: f64, b: f64, x: f64, one_minus_x: f64) -> Result<f64, StatsError> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(StatsError::InvalidArgument(format!("beta parameters a={a}, b={b}")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(StatsError::InvalidArgument(format!("x = {x} outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if one_minus_x == 0.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * one_minus_x.ln();
    let front = ln_front.exp();
    // The continued fraction converges fast only below the mean; use symmetry above it.
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_continued_fraction(a, b, x)? / a)
    } else {
        Ok(1.0 - front * beta_continued_fraction(b, a, one_minus_x)? / b)
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> Result<f64, StatsError> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    let mut delta = f64::NAN;
    for m in 1..=MAX_CF_ITERATIONS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(StatsError::NonConvergence {
        a,
        b,
        x,
        iterations: MAX_CF_ITERATIONS,
        last_delta: (delta - 1.0).abs(),
    })
}

/// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-15 relative for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize, m: f64, sd: f64) -> GroupSummary {
        GroupSummary::new("", n, m, sd).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn summarize_basic() {
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.n, s.mean, s.sd), (3, 2.0, 1.0));
        let s = summarize(&[5.0; 4]).unwrap();
        assert_eq!((s.mean, s.sd), (5.0, 0.0));
        assert_eq!(
            summarize(&[1.0]),
            Err(StatsError::InsufficientData { needed: 2, got: 1 })
        );
    }

    #[test]
    fn identical_groups_give_zero_f() {
        let r = anova_oneway([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(r.f, 0.0);
        assert_eq!(r.p, 1.0);
        assert_eq!((r.df_between, r.df_within), (1, 4));
    }

    #[test]
    fn constant_groups_with_different_means_are_infinite() {
        let r = anova_oneway([[1.0, 1.0], [2.0, 2.0]]).unwrap();
        assert!(r.f.is_infinite());
        assert_eq!(r.p, 0.0);
        assert_eq!(r.eta_squared, 1.0);
        assert_eq!(
            anova_oneway([[1.0, 1.0], [1.0, 1.0]]),
            Err(StatsError::ZeroTotalVariance)
        );
    }

    #[test]
    fn anova_preconditions() {
        assert_eq!(anova_oneway([[1.0, 2.0]]), Err(StatsError::TooFewGroups(1)));
        assert!(matches!(
            anova_oneway(vec![vec![1.0, 2.0], vec![3.0]]),
            Err(StatsError::InsufficientData { .. })
        ));
        assert_eq!(anova_from_summary(&[g(3, 1.0, 1.0)]), Err(StatsError::TooFewGroups(1)));
    }

    #[test]
    fn textbook_vs_experiment_jva() {
        let r = anova_from_summary(&[g(10, 31.30, 9.73), g(20, 45.55, 15.97)]).unwrap();
        assert!(close(r.f, 6.65, 0.05), "{}", r.f);
        assert_eq!((r.df_between, r.df_within), (1, 28));
        assert!(r.p < 0.05);
        let d = cohens_d(&g(10, 31.30, 9.73), &g(20, 45.55, 15.97)).unwrap();
        assert!(close(d, 1.00, 0.02), "{d}");
    }

    #[test]
    fn three_condition_jva() {
        let r = anova_from_summary(&[g(10, 31.30, 9.73), g(10, 46.50, 15.43), g(10, 44.60, 17.28)]).unwrap();
        assert!(close(r.f, 3.26, 0.05));
        assert_eq!((r.df_between, r.df_within), (2, 27));
        assert!(close(r.p, 0.054, 0.004), "{}", r.p);
        assert!(r.omega_squared <= r.eta_squared);
    }

    #[test]
    fn gender_tables() {
        let jva = anova_from_summary(&[g(15, 37.00, 15.05), g(7, 41.86, 16.72), g(8, 47.00, 15.46)]).unwrap();
        assert!(close(jva.f, 1.10, 0.05), "{}", jva.f);
        let post = anova_from_summary(&[g(15, 1.63, 1.29), g(7, 2.00, 1.04), g(8, 2.50, 1.28)]).unwrap();
        assert!(close(post.f, 1.29, 0.05), "{}", post.f);
        let posttest = anova_from_summary(&[g(10, 1.15, 0.95), g(20, 2.35, 1.20)]).unwrap();
        assert!(close(posttest.f, 7.56, 0.05));
        assert!(close(
            cohens_d(&g(10, 1.15, 0.95), &g(20, 2.35, 1.20)).unwrap(),
            1.06,
            0.02
        ));
    }

    #[test]
    fn cohens_d_edge_cases() {
        assert_eq!(cohens_d(&g(5, 2.0, 1.0), &g(5, 2.0, 1.0)), Ok(0.0));
        assert_eq!(
            cohens_d(&g(5, 2.0, 0.0), &g(5, 3.0, 0.0)),
            Err(StatsError::ZeroPooledSd)
        );
    }

    #[test]
    fn pearson_exact_line() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let c = pearson(&x, &y).unwrap();
        assert!(close(c.r, 1.0, 1e-12));
        assert!(close(c.slope, 2.0, 1e-12));
        assert!(close(c.intercept, 1.0, 1e-12));
        assert_eq!(c.p, 0.0);

        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert!(close(pearson(&x, &rev).unwrap().r, -1.0, 1e-12));
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(
            pearson(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]),
            Err(StatsError::ConstantVariable)
        );
        assert_eq!(
            pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::LengthMismatch(2, 3))
        );
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0, 2.0]),
            Err(StatsError::InsufficientData { .. })
        ));
    }

    #[test]
    fn correlation_identity() {
        let (f, p) = correlation_f(0.5, 30).unwrap();
        assert!(close(f, 9.33, 0.01));
        assert!(p < 0.005);
    }

    // Reference values from an independent statistics package.
    #[test]
    fn f_tail_reference_values() {
        let cases = [
            (3.26, 2, 27, 0.053927052261587165),
            (6.65, 1, 28, 0.01546311417337387),
            (1.10, 2, 27, 0.34733002020356984),
            (1.29, 2, 27, 0.29169939322119065),
            (0.5, 5, 100, 0.7755895192354815),
            (20.0, 1, 5, 0.006566271827563008),
            (7.56, 1, 28, 0.010333811619281007),
        ];
        for (f, d1, d2, want) in cases {
            let got = f_tail_p(f, d1, d2).unwrap();
            assert!(close(got, want, 1e-12), "F({d1},{d2}) at {f}: {got} vs {want}");
        }
        assert_eq!(f_tail_p(0.0, 3, 4), Ok(1.0));
        assert!(f_tail_p(-1.0, 3, 4).is_err());
        assert!(f_tail_p(1.0, 0, 4).is_err());
    }

    #[test]
    fn incomplete_beta_reference_values() {
        assert!(close(
            regularized_beta(2.5, 0.5, 0.3).unwrap(),
            0.018927124071945658,
            1e-13
        ));
        assert!(close(regularized_beta(10.0, 3.0, 0.9).unwrap(), 0.889130022255, 1e-11));
        assert!(close(regularized_beta(0.5, 0.5, 0.5).unwrap(), 0.5, 1e-13));
    }

    #[test]
    fn ln_gamma_at_integers() {
        let mut fact = 1.0f64;
        for n in 1..20 {
            assert!(close(ln_gamma(n as f64), fact.ln(), 1e-12), "n={n}");
            fact *= n as f64;
        }
        assert!(close(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), 1e-13));
    }

    #[test]
    fn pooled_totals() {
        let t = pooled_summary(&[g(10, 31.30, 9.73), g(10, 46.50, 15.43), g(10, 44.60, 17.28)]).unwrap();
        assert!(close(t.mean, 40.80, 0.005));
        assert_eq!(t.n, 30);
    }

    #[test]
    fn pairwise_is_labeled_uncorrected() {
        let pw = pairwise_comparisons(&[
            g(10, 1.15, 0.95).labeled("textbook"),
            g(10, 2.35, 1.03).labeled("tablet"),
            g(10, 2.35, 1.42).labeled("ar"),
        ]);
        assert_eq!(pw.len(), 3);
        assert!(pw.iter().all(|p| p.correction == "uncorrected"));
        assert_eq!((pw[0].first.as_str(), pw[0].second.as_str()), ("textbook", "tablet"));
    }
}
