//! Monte Carlo power of single-marker QTL association tests when a
//! quantitative trait (blood pressure) is distorted by treatment, and of
//! the adjustment methods that try to undo it.
//!
//! The pipeline is [`trait_sim`] (genotypes from [`genetics`], trait
//! values, treatment) → [`adjustments`] (one sample per analysis method)
//! → [`stattests`] (ANOVA, covariate-adjusted F, Kruskal-Wallis), driven
//! replicate by replicate from [`power_engine`] and rendered by [`report`].

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjustments;
pub mod cli;
pub mod error;
pub mod genetics;
pub mod power_engine;
pub mod report;
pub mod selfcheck;
pub mod stattests;
pub mod trait_sim;

pub use adjustments::{AnalysisSample, LocationEstimator, Method};
pub use error::{Error, Result};
pub use genetics::{Genotype, HaplotypeDistribution};
pub use power_engine::{
    run_cell, run_grid, verify_estimator, CellResult, EstimatorParams, EstimatorReport, GridSpec,
    PowerTable,
};
pub use stattests::{TestKind, TestResult};
pub use trait_sim::{Dataset, Family, StudyConfig, Subject};
