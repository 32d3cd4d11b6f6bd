//! Hypothesis tests for association between a marker genotype and a trait.
//!
//! Degenerate inputs never raise: they yield a [`TestResult`] with
//! `testable == false`, which the power engine counts as a non-rejection.

mod special;

pub use special::{
    chi_square_sf, f_sf, ln_gamma, normal_pdf, normal_sf, reg_inc_beta, reg_upper_gamma,
};

use crate::adjustments::AnalysisSample;
use crate::error::{domain, Result};

/// Relative size below which a residual sum of squares counts as zero.
const DEGENERATE_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub df1: f64,
    pub df2: Option<f64>,
    pub p_value: Option<f64>,
    pub testable: bool,
    pub n_groups: usize,
}

impl TestResult {
    fn untestable(n_groups: usize) -> Self {
        TestResult {
            statistic: f64::NAN,
            df1: f64::NAN,
            df2: None,
            p_value: None,
            testable: false,
            n_groups,
        }
    }

    /// A non-testable result never rejects.
    pub fn rejects(&self, alpha: f64) -> bool {
        self.testable && self.p_value.is_some_and(|p| p < alpha)
    }
}

/// Which reference test a power run applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestKind {
    /// F tests: one-way ANOVA, or the covariate-adjusted F for samples carrying a covariate.
    Parametric,
    KruskalWallis,
}

/// Per-genotype accumulation of count, sum of values and sum of covariate.
#[derive(Debug, Default, Clone, Copy)]
struct GroupStats {
    n: usize,
    mean_y: f64,
    mean_m: f64,
}

fn group_stats(
    values: &[f64],
    groups: &[crate::genetics::Genotype],
    cov: Option<&[bool]>,
) -> [GroupStats; 3] {
    let mut stats = [GroupStats::default(); 3];
    for (i, (&y, g)) in values.iter().zip(groups).enumerate() {
        let s = &mut stats[g.index()];
        s.n += 1;
        s.mean_y += y;
        if let Some(c) = cov {
            s.mean_m += c[i] as u8 as f64;
        }
    }
    for s in stats.iter_mut().filter(|s| s.n > 0) {
        s.mean_y /= s.n as f64;
        s.mean_m /= s.n as f64;
    }
    stats
}

fn check_lengths(sample: &AnalysisSample) -> Result<()> {
    if sample.values.len() != sample.groups.len() {
        return domain(format!(
            "sample has {} values but {} group labels",
            sample.values.len(),
            sample.groups.len()
        ));
    }
    if let Some(c) = &sample.covariate {
        if c.len() != sample.values.len() {
            return domain("covariate length differs from values");
        }
    }
    Ok(())
}

/// One-way ANOVA F test over the genotype groups present in the sample.
pub fn one_way_anova(sample: &AnalysisSample) -> Result<TestResult> {
    check_lengths(sample)?;
    let values = &sample.values;
    let stats = group_stats(values, &sample.groups, None);
    let k = stats.iter().filter(|s| s.n > 0).count();
    let n = values.len();
    if k < 2 || n <= k {
        return Ok(TestResult::untestable(k));
    }
    let grand = values.iter().sum::<f64>() / n as f64;
    let ssb: f64 = stats
        .iter()
        .filter(|s| s.n > 0)
        .map(|s| s.n as f64 * (s.mean_y - grand).powi(2))
        .sum();
    let ssw: f64 = values
        .iter()
        .zip(&sample.groups)
        .map(|(y, g)| (y - stats[g.index()].mean_y).powi(2))
        .sum();
    let sst = ssb + ssw;
    if sst == 0.0 || ssw <= DEGENERATE_REL * sst {
        return Ok(TestResult::untestable(k));
    }
    let df1 = (k - 1) as f64;
    let df2 = (n - k) as f64;
    let f = (ssb / df1) / (ssw / df2);
    Ok(TestResult {
        statistic: f,
        df1,
        df2: Some(df2),
        p_value: Some(f_sf(f, df1, df2)?),
        testable: true,
        n_groups: k,
    })
}

/// Genotype F test in the linear model `value ~ 1 + genotype + treatment`.
///
/// The genotype effect is tested by extra sum of squares against the
/// reduced model `value ~ 1 + treatment`. A constant covariate drops out
/// and the test reduces to [`one_way_anova`].
pub fn anova_with_covariate(sample: &AnalysisSample) -> Result<TestResult> {
    check_lengths(sample)?;
    let Some(cov) = sample.covariate.as_deref() else {
        return domain("covariate-adjusted ANOVA needs a covariate");
    };
    let values = &sample.values;
    let n = values.len();
    let stats = group_stats(values, &sample.groups, Some(cov));
    let k = stats.iter().filter(|s| s.n > 0).count();
    if n == 0 || k < 2 {
        return Ok(TestResult::untestable(k));
    }

    let grand_y = values.iter().sum::<f64>() / n as f64;
    let grand_m = cov.iter().filter(|&&c| c).count() as f64 / n as f64;

    let (mut t_yy, mut t_ym, mut t_mm) = (0.0, 0.0, 0.0);
    let (mut w_yy, mut w_ym, mut w_mm) = (0.0, 0.0, 0.0);
    for ((&y, g), &c) in values.iter().zip(&sample.groups).zip(cov) {
        let m = c as u8 as f64;
        let s = &stats[g.index()];
        let (ty, tm) = (y - grand_y, m - grand_m);
        let (wy, wm) = (y - s.mean_y, m - s.mean_m);
        t_yy += ty * ty;
        t_ym += ty * tm;
        t_mm += tm * tm;
        w_yy += wy * wy;
        w_ym += wy * wm;
        w_mm += wm * wm;
    }

    if t_mm == 0.0 {
        return one_way_anova(sample);
    }
    if n < k + 2 || w_mm <= DEGENERATE_REL * t_mm {
        // treatment is a function of genotype, or no error df left
        return Ok(TestResult::untestable(k));
    }
    let rss_full = (w_yy - w_ym * w_ym / w_mm).max(0.0);
    let rss_reduced = (t_yy - t_ym * t_ym / t_mm).max(0.0);
    if t_yy == 0.0 || rss_full <= DEGENERATE_REL * t_yy {
        return Ok(TestResult::untestable(k));
    }
    let df1 = (k - 1) as f64;
    let df2 = (n - k - 1) as f64;
    let f = ((rss_reduced - rss_full).max(0.0) / df1) / (rss_full / df2);
    Ok(TestResult {
        statistic: f,
        df1,
        df2: Some(df2),
        p_value: Some(f_sf(f, df1, df2)?),
        testable: true,
        n_groups: k,
    })
}

/// Midranks (1-based) of `values`, plus the tie sum `sum(t^3 - t)`.
pub fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    (ranks, ties)
}

/// Kruskal-Wallis H test with tie correction and chi-square reference.
pub fn kruskal_wallis(sample: &AnalysisSample) -> Result<TestResult> {
    check_lengths(sample)?;
    let n = sample.values.len();
    let (ranks, ties) = midranks(&sample.values);
    let mut count = [0usize; 3];
    let mut rank_sum = [0.0f64; 3];
    for (r, g) in ranks.iter().zip(&sample.groups) {
        count[g.index()] += 1;
        rank_sum[g.index()] += r;
    }
    let k = count.iter().filter(|&&c| c > 0).count();
    if k < 2 {
        return Ok(TestResult::untestable(k));
    }
    let nf = n as f64;
    let correction = 1.0 - ties / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Ok(TestResult::untestable(k));
    }
    let centre = (nf + 1.0) / 2.0;
    let spread: f64 = count
        .iter()
        .zip(rank_sum)
        .filter(|(c, _)| **c > 0)
        .map(|(&c, s)| {
            let c = c as f64;
            c * (s / c - centre).powi(2)
        })
        .sum();
    let h = 12.0 / (nf * (nf + 1.0)) * spread / correction;
    let df = (k - 1) as f64;
    Ok(TestResult {
        statistic: h,
        df1: df,
        df2: None,
        p_value: Some(chi_square_sf(h, df)?),
        testable: true,
        n_groups: k,
    })
}

/// Applies the test appropriate for `kind` and the sample's shape.
pub fn run_test(kind: TestKind, sample: &AnalysisSample) -> Result<TestResult> {
    match kind {
        TestKind::Parametric if sample.covariate.is_some() => anova_with_covariate(sample),
        TestKind::Parametric => one_way_anova(sample),
        TestKind::KruskalWallis => kruskal_wallis(sample),
    }
}
