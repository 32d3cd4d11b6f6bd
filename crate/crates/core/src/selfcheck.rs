//! Fixture checks run by the `selfcheck` subcommand.

use crate::adjustments::{levy_adjustment, AnalysisSample};
use crate::genetics::{haplotype_distribution, Genotype};
use crate::stattests::{
    anova_with_covariate, chi_square_sf, f_sf, kruskal_wallis, one_way_anova, reg_inc_beta,
};
use crate::trait_sim::{Dataset, StudyConfig, Subject};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn close(name: &str, got: crate::error::Result<f64>, want: f64, tol: f64) -> Check {
    match got {
        Ok(v) => Check {
            name: name.into(),
            passed: (v - want).abs() <= tol,
            detail: format!("got {v:.10}, want {want} ± {tol:e}"),
        },
        Err(e) => Check {
            name: name.into(),
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Published table points for the F and chi-square tails.
pub fn distribution_fixtures() -> Vec<Check> {
    vec![
        close("f_sf(0; 3, 7) = 1", f_sf(0.0, 3.0, 7.0), 1.0, 1e-4),
        close("f_sf(1; 10, 10) = 0.5", f_sf(1.0, 10.0, 10.0), 0.5, 1e-4),
        close(
            "f_sf(8; 1, 2) = 0.10557",
            f_sf(8.0, 1.0, 2.0),
            0.10557,
            1e-4,
        ),
        close(
            "f_sf(4.1028; 2, 10) = 0.05",
            f_sf(4.1028, 2.0, 10.0),
            0.05,
            1e-4,
        ),
        close("chi2_sf(0; 3) = 1", chi_square_sf(0.0, 3.0), 1.0, 1e-4),
        close(
            "chi2_sf(4.6052; 2) = 0.1",
            chi_square_sf(4.6052, 2.0),
            0.1,
            1e-4,
        ),
        close(
            "chi2_sf(3.8415; 1) = 0.05",
            chi_square_sf(3.8415, 1.0),
            0.05,
            1e-4,
        ),
        close(
            "chi2_sf(11.0705; 5) = 0.05",
            chi_square_sf(11.0705, 5.0),
            0.05,
            1e-4,
        ),
    ]
}

pub fn special_function_fixtures() -> Vec<Check> {
    vec![
        close("I_0(2, 3) = 0", reg_inc_beta(2.0, 3.0, 0.0), 0.0, 1e-10),
        close("I_1(2, 3) = 1", reg_inc_beta(2.0, 3.0, 1.0), 1.0, 1e-10),
        close("I_0.5(4, 4) = 0.5", reg_inc_beta(4.0, 4.0, 0.5), 0.5, 1e-10),
        close(
            "I_0.5(2, 3) = 0.6875",
            reg_inc_beta(2.0, 3.0, 0.5),
            0.6875,
            1e-10,
        ),
    ]
}

fn subject(observed: f64, treated: bool) -> Subject {
    Subject {
        underlying: observed,
        observed,
        qtl_genotype: Genotype::Het,
        marker_genotype: Genotype::Het,
        affected: observed > 140.0,
        treated,
    }
}

pub fn oracle_fixtures() -> Vec<Check> {
    use Genotype::*;
    let mut checks = Vec::new();

    let two = AnalysisSample::new(vec![1.0, 2.0, 3.0, 4.0], vec![HomMajor, HomMajor, Het, Het]);
    checks.push(close(
        "anova {1,2} vs {3,4}: F = 8",
        one_way_anova(&two).map(|r| r.statistic),
        8.0,
        1e-12,
    ));
    checks.push(close(
        "anova {1,2} vs {3,4}: p = 0.10557",
        one_way_anova(&two).map(|r| r.p_value.unwrap_or(f64::NAN)),
        0.10557,
        1e-4,
    ));

    let kw = AnalysisSample::new(
        vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        vec![HomMajor, HomMajor, Het, Het, HomMinor, HomMinor],
    );
    checks.push(close(
        "kruskal-wallis {1,2},{3,4},{5,6}: H = 32/7",
        kruskal_wallis(&kw).map(|r| r.statistic),
        32.0 / 7.0,
        1e-12,
    ));

    let values = vec![3.1, 4.7, 2.2, 8.9, 5.5, 6.0, 7.3, 1.4];
    let groups = vec![
        HomMajor, Het, HomMinor, Het, HomMajor, HomMinor, Het, HomMajor,
    ];
    let plain = AnalysisSample::new(values.clone(), groups.clone());
    let zero_cov = plain.clone().with_covariate(vec![false; values.len()]);
    let diff = one_way_anova(&plain)
        .and_then(|a| anova_with_covariate(&zero_cov).map(|b| (a.statistic - b.statistic).abs()));
    checks.push(close(
        "covariate-F with zero covariate equals ANOVA",
        diff,
        0.0,
        1e-9,
    ));

    let ds = Dataset {
        subjects: vec![
            subject(99.0, false),
            subject(120.0, true),
            subject(150.0, false),
        ],
        config: StudyConfig {
            n_subjects: 3,
            ..Default::default()
        },
        replicate_index: 0,
    };
    checks.push(close(
        "levy {99,120*,150}: treated -> 135",
        Ok(levy_adjustment(&ds).values[1]),
        135.0,
        1e-12,
    ));

    checks.push(close(
        "haplotypes (0.3, 0.14): P(AB) = 0.63",
        haplotype_distribution(0.3, 0.14).map(|h| h.freqs[0]),
        0.63,
        1e-12,
    ));
    checks
}

pub fn all_checks() -> Vec<Check> {
    let mut checks = special_function_fixtures();
    checks.extend(distribution_fixtures());
    checks.extend(oracle_fixtures());
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_passes() {
        for c in all_checks() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert_eq!(distribution_fixtures().len(), 8);
    }
}
