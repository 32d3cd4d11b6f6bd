//! Analysis methods mapping a simulated dataset to a testable sample.

use crate::error::{Error, Result};
use crate::genetics::Genotype;
use crate::trait_sim::{Dataset, Family};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocationEstimator {
    Mean,
    Median,
}

impl LocationEstimator {
    pub fn estimate(self, values: &mut [f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        match self {
            LocationEstimator::Mean => Some(values.iter().sum::<f64>() / values.len() as f64),
            LocationEstimator::Median => {
                values.sort_by(f64::total_cmp);
                let mid = values.len() / 2;
                Some(if values.len().is_multiple_of(2) {
                    (values[mid - 1] + values[mid]) / 2.0
                } else {
                    values[mid]
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    AllUnderlying,
    AllObserved,
    OmitAffected,
    OmitTreated,
    TreatmentCovariate,
    ConstantAdjustment(LocationEstimator),
    LevyAdjustment,
}

pub const METHOD_NAMES: [&str; 7] = [
    "underlying",
    "observed",
    "omit-affected",
    "omit-treated",
    "covariate",
    "constant",
    "levy",
];

impl Method {
    /// The full method set used for a trait family, in table order.
    ///
    /// Lognormal runs drop the covariate method and estimate the constant
    /// adjustment with medians.
    pub fn standard_set(family: Family) -> Vec<Method> {
        METHOD_NAMES
            .iter()
            .filter_map(|name| Method::from_cli(name, family).ok())
            .collect()
    }

    /// Parses a CLI method name for the given family.
    pub fn from_cli(name: &str, family: Family) -> Result<Method> {
        let estimator = match family {
            Family::Normal => LocationEstimator::Mean,
            Family::LogNormal => LocationEstimator::Median,
        };
        let method = match name {
            "underlying" => Method::AllUnderlying,
            "observed" => Method::AllObserved,
            "omit-affected" => Method::OmitAffected,
            "omit-treated" => Method::OmitTreated,
            "covariate" => Method::TreatmentCovariate,
            "constant" => Method::ConstantAdjustment(estimator),
            "levy" => Method::LevyAdjustment,
            other => {
                return Err(Error::Parse(format!(
                    "unknown method '{other}'; valid methods: {}",
                    METHOD_NAMES.join(", ")
                )))
            }
        };
        if family == Family::LogNormal && method == Method::TreatmentCovariate {
            return Err(Error::Config(
                "the covariate method is not available with the lognormal family (rank test)"
                    .into(),
            ));
        }
        Ok(method)
    }

    pub fn cli_name(self) -> &'static str {
        METHOD_NAMES[self.order()]
    }

    /// Position in table column order.
    pub fn order(self) -> usize {
        match self {
            Method::AllUnderlying => 0,
            Method::AllObserved => 1,
            Method::OmitAffected => 2,
            Method::OmitTreated => 3,
            Method::TreatmentCovariate => 4,
            Method::ConstantAdjustment(_) => 5,
            Method::LevyAdjustment => 6,
        }
    }

    pub fn column_label(self) -> &'static str {
        match self {
            Method::AllUnderlying => "All underlying",
            Method::AllObserved => "All observed",
            Method::OmitAffected => "Omit affected",
            Method::OmitTreated => "Omit treated",
            Method::TreatmentCovariate => "Treatment covariate",
            Method::ConstantAdjustment(_) => "Constant adjustment",
            Method::LevyAdjustment => "Levy adjustment",
        }
    }

    pub fn apply(self, ds: &Dataset) -> AnalysisSample {
        match self {
            Method::AllUnderlying => all_underlying(ds),
            Method::AllObserved => all_observed(ds),
            Method::OmitAffected => omit_affected(ds),
            Method::OmitTreated => omit_treated(ds),
            Method::TreatmentCovariate => treatment_covariate(ds),
            Method::ConstantAdjustment(est) => constant_adjustment(ds, est),
            Method::LevyAdjustment => levy_adjustment(ds),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalysisSample {
    pub values: Vec<f64>,
    /// Marker genotype of each value.
    pub groups: Vec<Genotype>,
    /// Treatment indicator per value, for covariate-adjusted tests.
    pub covariate: Option<Vec<bool>>,
    /// The medicine-effect estimate subtracted from treated values.
    pub adjustment_estimate: Option<f64>,
    /// Set when the constant adjustment could not be estimated.
    pub fallback: bool,
    /// Dataset index of the subject behind each value.
    pub subjects: Vec<usize>,
}

impl AnalysisSample {
    pub fn new(values: Vec<f64>, groups: Vec<Genotype>) -> Self {
        let subjects = (0..values.len()).collect();
        AnalysisSample {
            values,
            groups,
            subjects,
            ..Default::default()
        }
    }

    pub fn with_covariate(mut self, covariate: Vec<bool>) -> Self {
        self.covariate = Some(covariate);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn collect(
    ds: &Dataset,
    keep: impl Fn(&crate::trait_sim::Subject) -> bool,
    value: impl Fn(&crate::trait_sim::Subject) -> f64,
) -> AnalysisSample {
    let mut sample = AnalysisSample::default();
    for (i, s) in ds.subjects.iter().enumerate().filter(|(_, s)| keep(s)) {
        sample.values.push(value(s));
        sample.groups.push(s.marker_genotype);
        sample.subjects.push(i);
    }
    sample
}

pub fn all_underlying(ds: &Dataset) -> AnalysisSample {
    collect(ds, |_| true, |s| s.underlying)
}

pub fn all_observed(ds: &Dataset) -> AnalysisSample {
    collect(ds, |_| true, |s| s.observed)
}

/// Keeps untreated subjects observed below the threshold.
pub fn omit_affected(ds: &Dataset) -> AnalysisSample {
    let threshold = ds.config.threshold;
    collect(ds, |s| s.observed < threshold && !s.treated, |s| s.observed)
}

pub fn omit_treated(ds: &Dataset) -> AnalysisSample {
    collect(ds, |s| !s.treated, |s| s.observed)
}

pub fn treatment_covariate(ds: &Dataset) -> AnalysisSample {
    let covariate = ds.subjects.iter().map(|s| s.treated).collect();
    all_observed(ds).with_covariate(covariate)
}

/// Shifts treated values by the estimated medicine effect.
///
/// The estimate is the location of observed values among treated subjects
/// minus that among untreated subjects observed above the threshold.
/// When either group is empty the estimate is 0 and `fallback` is set.
pub fn constant_adjustment(ds: &Dataset, estimator: LocationEstimator) -> AnalysisSample {
    let threshold = ds.config.threshold;
    let mut treated: Vec<f64> = ds
        .subjects
        .iter()
        .filter(|s| s.treated)
        .map(|s| s.observed)
        .collect();
    let mut untreated_affected: Vec<f64> = ds
        .subjects
        .iter()
        .filter(|s| !s.treated && s.observed > threshold)
        .map(|s| s.observed)
        .collect();

    let estimate = estimator
        .estimate(&mut treated)
        .zip(estimator.estimate(&mut untreated_affected))
        .map(|(t, u)| t - u);

    let mut sample = all_observed(ds);
    match estimate {
        Some(m) => {
            for (v, s) in sample.values.iter_mut().zip(&ds.subjects) {
                if s.treated {
                    *v -= m;
                }
            }
            sample.adjustment_estimate = Some(m);
        }
        None => {
            sample.adjustment_estimate = Some(0.0);
            sample.fallback = true;
        }
    }
    sample
}

/// Residual-redistribution adjustment of treated values.
///
/// Residuals from the overall mean are walked from largest to smallest
/// (ties by subject index). An untreated subject keeps its residual; a
/// treated subject at position `k` receives the average of its own residual
/// and the `k - 1` modified residuals above it, so treated values move up.
pub fn levy_adjustment(ds: &Dataset) -> AnalysisSample {
    let mut sample = all_observed(ds);
    let n = ds.subjects.len();
    if n == 0 {
        return sample;
    }
    let mean = sample.values.iter().sum::<f64>() / n as f64;
    let residuals: Vec<f64> = sample.values.iter().map(|y| y - mean).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| residuals[b].total_cmp(&residuals[a]).then(a.cmp(&b)));

    let mut modified = vec![0.0; n];
    let mut prefix = 0.0;
    for (pos, &idx) in order.iter().enumerate() {
        let r = residuals[idx];
        let r_star = if ds.subjects[idx].treated {
            (r + prefix) / (pos + 1) as f64
        } else {
            r
        };
        modified[idx] = r_star;
        prefix += r_star;
    }
    for (i, v) in sample.values.iter_mut().enumerate() {
        if ds.subjects[i].treated {
            *v = *v - residuals[i] + modified[i];
        }
    }
    sample
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trait_sim::{simulate_dataset, StudyConfig, Subject};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn subject(underlying: f64, observed: f64, treated: bool) -> Subject {
        Subject {
            underlying,
            observed,
            qtl_genotype: Genotype::Het,
            marker_genotype: Genotype::Het,
            affected: underlying > 140.0,
            treated,
        }
    }

    fn dataset(subjects: Vec<Subject>) -> Dataset {
        Dataset {
            config: StudyConfig {
                n_subjects: subjects.len().max(3),
                ..Default::default()
            },
            subjects,
            replicate_index: 0,
        }
    }

    fn simulated(seed: u64, treat_prob: f64) -> Dataset {
        let cfg = StudyConfig {
            p: 0.5,
            d: 25.0,
            treat_prob,
            ..Default::default()
        };
        simulate_dataset(&cfg, 0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn underlying_and_observed() {
        let ds = dataset(vec![
            subject(120.0, 120.0, false),
            subject(150.0, 140.0, true),
        ]);
        assert_eq!(all_underlying(&ds).values, vec![120.0, 150.0]);
        assert_eq!(all_observed(&ds).values, vec![120.0, 140.0]);
        assert!(all_underlying(&ds).covariate.is_none());

        let untreated = simulated(1, 0.0);
        assert_eq!(all_underlying(&untreated), all_observed(&untreated));
        let full = simulated(2, 0.8);
        assert_eq!(all_underlying(&full).len(), 100);
        assert_eq!(all_observed(&full).len(), 100);
    }

    #[test]
    fn omit_rules() {
        let ds = dataset(vec![
            subject(120.0, 120.0, false),
            subject(150.0, 150.0, false),
            subject(145.0, 135.0, true),
        ]);
        assert_eq!(omit_affected(&ds).values, vec![120.0]);
        assert_eq!(omit_treated(&ds).values, vec![120.0, 150.0]);
        assert_eq!(omit_treated(&ds).subjects, vec![0, 1]);

        let treated_low = dataset(vec![subject(142.0, 130.0, true)]);
        assert!(omit_affected(&treated_low).is_empty());

        let all_low = dataset(vec![
            subject(100.0, 100.0, false),
            subject(130.0, 130.0, false),
        ]);
        assert_eq!(omit_affected(&all_low).len(), 2);

        let all_treated = dataset(vec![
            subject(150.0, 140.0, true),
            subject(160.0, 149.0, true),
        ]);
        assert!(omit_treated(&all_treated).is_empty());

        let none_treated = simulated(3, 0.0);
        assert_eq!(omit_treated(&none_treated).len(), 100);
    }

    #[test]
    fn covariate_indicators() {
        let ds = simulated(4, 0.0);
        let s = treatment_covariate(&ds);
        assert!(s.covariate.as_ref().unwrap().iter().all(|&c| !c));
        let ds = simulated(5, 0.8);
        let s = treatment_covariate(&ds);
        let cov = s.covariate.unwrap();
        assert_eq!(cov.len(), 100);
        assert_eq!(cov.iter().filter(|&&c| c).count(), ds.treated_count());
    }

    #[test]
    fn constant_adjustment_arithmetic() {
        let ds = dataset(vec![
            subject(145.0, 130.0, true),
            subject(148.0, 135.0, true),
            subject(145.0, 145.0, false),
            subject(150.0, 150.0, false),
            subject(110.0, 110.0, false),
        ]);
        let s = constant_adjustment(&ds, LocationEstimator::Mean);
        assert_eq!(s.adjustment_estimate, Some(-15.0));
        assert!(!s.fallback);
        assert_eq!(s.values, vec![145.0, 150.0, 145.0, 150.0, 110.0]);

        let med = constant_adjustment(&ds, LocationEstimator::Median);
        assert_eq!(med.adjustment_estimate, Some(-15.0));
    }

    #[test]
    fn constant_adjustment_fallback() {
        let ds = simulated(6, 0.0);
        let s = constant_adjustment(&ds, LocationEstimator::Mean);
        assert!(s.fallback);
        assert_eq!(s.adjustment_estimate, Some(0.0));
        assert_eq!(s.values, all_observed(&ds).values);

        // treated present but no untreated subject above threshold
        let ds = dataset(vec![
            subject(150.0, 141.0, true),
            subject(120.0, 120.0, false),
        ]);
        assert!(constant_adjustment(&ds, LocationEstimator::Median).fallback);
    }

    #[test]
    fn constant_adjustment_is_unbiased_on_average() {
        let cfg = StudyConfig {
            p: 0.5,
            d: 20.0,
            ..Default::default()
        };
        let sim = crate::trait_sim::Simulator::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let estimates: Vec<f64> = (0..1000)
            .map(|r| constant_adjustment(&sim.dataset(r, &mut rng), LocationEstimator::Mean))
            .filter(|s| !s.fallback)
            .map(|s| s.adjustment_estimate.unwrap())
            .collect();
        assert!(estimates.len() > 900);
        let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
        assert!((mean + 10.0).abs() < 0.5, "mean estimate {mean}");
    }

    #[test]
    fn levy_hand_example() {
        let ds = dataset(vec![
            subject(99.0, 99.0, false),
            subject(130.0, 120.0, true),
            subject(150.0, 150.0, false),
        ]);
        let s = levy_adjustment(&ds);
        for (got, want) in s.values.iter().zip([99.0, 135.0, 150.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn levy_uses_modified_prefix() {
        // r = {-20, -10, 10, 20}; walk 20, 10*, -10*, -20
        let ds = dataset(vec![
            subject(100.0, 100.0, false),
            subject(120.0, 110.0, true),
            subject(140.0, 130.0, true),
            subject(140.0, 140.0, false),
        ]);
        let s = levy_adjustment(&ds);
        for (got, want) in s
            .values
            .iter()
            .zip([100.0, 120.0 + 25.0 / 3.0, 135.0, 140.0])
        {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn levy_without_treatment_is_identity() {
        let ds = simulated(7, 0.0);
        assert_eq!(levy_adjustment(&ds).values, all_observed(&ds).values);
    }

    #[test]
    fn levy_largest_residual_treated_unchanged() {
        let ds = dataset(vec![
            subject(99.0, 99.0, false),
            subject(120.0, 120.0, false),
            subject(160.0, 150.0, true),
        ]);
        let s = levy_adjustment(&ds);
        assert_abs_diff_eq!(s.values[2], 150.0, epsilon = 1e-12);
    }

    #[test]
    fn method_names() {
        let normal = Method::standard_set(Family::Normal);
        assert_eq!(normal.len(), 7);
        assert!(normal.contains(&Method::ConstantAdjustment(LocationEstimator::Mean)));
        let lognormal = Method::standard_set(Family::LogNormal);
        assert_eq!(lognormal.len(), 6);
        assert!(!lognormal.contains(&Method::TreatmentCovariate));
        assert!(lognormal.contains(&Method::ConstantAdjustment(LocationEstimator::Median)));
        for (i, m) in normal.iter().enumerate() {
            assert_eq!(m.order(), i);
            assert_eq!(Method::from_cli(m.cli_name(), Family::Normal).unwrap(), *m);
        }
        let err = Method::from_cli("bogus", Family::Normal)
            .unwrap_err()
            .to_string();
        for name in METHOD_NAMES {
            assert!(err.contains(name), "{err}");
        }
        assert!(Method::from_cli("covariate", Family::LogNormal).is_err());
    }

    proptest! {
        #[test]
        fn untreated_values_never_altered(seed in any::<u64>(), tp in 0.0f64..=1.0) {
            let ds = simulated(seed, tp);
            for method in Method::standard_set(Family::Normal)
                .into_iter()
                .chain([Method::ConstantAdjustment(LocationEstimator::Median)])
            {
                let s = method.apply(&ds);
                for (v, &i) in s.values.iter().zip(&s.subjects) {
                    let subj = &ds.subjects[i];
                    if !subj.treated && method != Method::AllUnderlying {
                        prop_assert_eq!(*v, subj.observed);
                    }
                    prop_assert_eq!(s.groups.len(), s.values.len());
                }
            }
        }

        #[test]
        fn constant_mean_shift_exact(seed in any::<u64>()) {
            let ds = simulated(seed, 0.8);
            let s = constant_adjustment(&ds, LocationEstimator::Mean);
            let m = s.adjustment_estimate.unwrap();
            let treated: Vec<usize> = (0..ds.len()).filter(|&i| ds.subjects[i].treated).collect();
            if !treated.is_empty() {
                let adj = treated.iter().map(|&i| s.values[i]).sum::<f64>() / treated.len() as f64;
                let obs = treated.iter().map(|&i| ds.subjects[i].observed).sum::<f64>() / treated.len() as f64;
                prop_assert!((adj - (obs - m)).abs() < 1e-9);
            }
        }

        #[test]
        fn omit_affected_subset_of_omit_treated(seed in any::<u64>()) {
            let ds = simulated(seed, 0.8);
            let narrow = omit_affected(&ds).subjects;
            let wide = omit_treated(&ds).subjects;
            prop_assert!(narrow.iter().all(|i| wide.contains(i)));
        }

        #[test]
        fn levy_preserves_multiset_without_treatment(seed in any::<u64>()) {
            let ds = simulated(seed, 0.0);
            let mut a = levy_adjustment(&ds).values;
            let mut b = all_observed(&ds).values;
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }
    }
}
