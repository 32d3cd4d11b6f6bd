//! Simulation of blood-pressure datasets under treatment.
//!
//! Each subject gets a QTL/marker genotype pair, an underlying trait value
//! from the component of the QTL genotype, and, when the underlying value
//! exceeds the threshold, a chance of treatment that shifts the observed
//! value by a random medicine effect.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::genetics::{sample_genotype_pair, Genotype, HaplotypeDistribution};

/// Distribution family of the genotype components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Normal,
    LogNormal,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::LogNormal => "lognormal",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        match s {
            "normal" => Ok(Family::Normal),
            "lognormal" => Ok(Family::LogNormal),
            other => Err(Error::Parse(format!(
                "unknown family '{other}' (expected normal or lognormal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Minor-allele frequency at QTL and marker.
    pub p: f64,
    /// Spacing between adjacent genotype means (mm Hg).
    pub d: f64,
    pub delta_prime: f64,
    pub family: Family,
    pub baseline_mean: f64,
    pub component_sd: f64,
    pub threshold: f64,
    pub treat_prob: f64,
    pub med_effect_mean: f64,
    pub med_effect_sd: f64,
    pub n_subjects: usize,
    pub n_replicates: usize,
    pub alpha: f64,
    pub master_seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            p: 0.1,
            d: 10.0,
            delta_prime: 1.0,
            family: Family::Normal,
            baseline_mean: 120.0,
            component_sd: 20.0,
            threshold: 140.0,
            treat_prob: 0.8,
            med_effect_mean: -10.0,
            med_effect_sd: 3.0,
            n_subjects: 100,
            n_replicates: 1000,
            alpha: 0.05,
            master_seed: 0,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.p > 0.0 && self.p < 1.0) {
            return bad(format!("p must lie in (0, 1), got {}", self.p));
        }
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return bad(format!("d must be >= 0, got {}", self.d));
        }
        if !(0.0..=1.0).contains(&self.delta_prime) {
            return bad(format!(
                "delta-prime must lie in [0, 1], got {}",
                self.delta_prime
            ));
        }
        if !(self.component_sd > 0.0) {
            return bad(format!(
                "component sd must be > 0, got {}",
                self.component_sd
            ));
        }
        if !(0.0..=1.0).contains(&self.treat_prob) {
            return bad(format!(
                "treatment probability must lie in [0, 1], got {}",
                self.treat_prob
            ));
        }
        if !(self.med_effect_sd >= 0.0) {
            return bad(format!(
                "medicine effect sd must be >= 0, got {}",
                self.med_effect_sd
            ));
        }
        if self.n_subjects < 3 {
            return bad(format!("need at least 3 subjects, got {}", self.n_subjects));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.family == Family::LogNormal && self.baseline_mean - self.d <= 0.0 {
            return bad(format!(
                "lognormal components need positive means, but {} - {} <= 0",
                self.baseline_mean, self.d
            ));
        }
        Ok(())
    }

    /// Mean of the trait component for a QTL genotype.
    pub fn genotype_mean(&self, genotype: Genotype) -> f64 {
        match genotype {
            Genotype::HomMajor => self.baseline_mean - self.d,
            Genotype::Het => self.baseline_mean,
            Genotype::HomMinor => self.baseline_mean + self.d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentParams {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Parameters of the underlying normal on the log scale.
    LogNormal {
        log_mean: f64,
        log_sd: f64,
    },
}

/// Component distribution for a QTL genotype.
///
/// Lognormal components are moment-matched on the raw scale: their mean is
/// the genotype mean and their variance is `component_sd^2`.
pub fn component_params(config: &StudyConfig, genotype: Genotype) -> Result<ComponentParams> {
    let mean = config.genotype_mean(genotype);
    let sd = config.component_sd;
    match config.family {
        Family::Normal => Ok(ComponentParams::Normal { mean, sd }),
        Family::LogNormal => {
            if mean <= 0.0 {
                return domain(format!(
                    "lognormal component needs a positive mean, got {mean}"
                ));
            }
            let log_var = (1.0 + sd * sd / (mean * mean)).ln();
            Ok(ComponentParams::LogNormal {
                log_mean: mean.ln() - log_var / 2.0,
                log_sd: log_var.sqrt(),
            })
        }
    }
}

pub fn draw_underlying<R: Rng + ?Sized>(params: &ComponentParams, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    match *params {
        ComponentParams::Normal { mean, sd } => mean + sd * z,
        ComponentParams::LogNormal { log_mean, log_sd } => (log_mean + log_sd * z).exp(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreatmentOutcome {
    pub observed: f64,
    pub affected: bool,
    pub treated: bool,
}

/// Resolves treatment given the coin outcome and the medicine effect.
///
/// `accepted` and `effect` are ignored for unaffected subjects, and `effect`
/// is ignored when treatment is not accepted.
pub fn treatment_outcome(
    underlying: f64,
    threshold: f64,
    accepted: bool,
    effect: f64,
) -> TreatmentOutcome {
    let affected = underlying > threshold;
    let treated = affected && accepted;
    TreatmentOutcome {
        observed: if treated {
            underlying + effect
        } else {
            underlying
        },
        affected,
        treated,
    }
}

/// Draws treatment status and observed value for one subject.
pub fn apply_treatment<R: Rng + ?Sized>(
    underlying: f64,
    config: &StudyConfig,
    rng: &mut R,
) -> TreatmentOutcome {
    if underlying <= config.threshold {
        return treatment_outcome(underlying, config.threshold, false, 0.0);
    }
    let accepted = rng.random::<f64>() < config.treat_prob;
    let effect = if accepted {
        let z: f64 = rng.sample(StandardNormal);
        config.med_effect_mean + config.med_effect_sd * z
    } else {
        0.0
    };
    treatment_outcome(underlying, config.threshold, accepted, effect)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub underlying: f64,
    pub observed: f64,
    pub qtl_genotype: Genotype,
    pub marker_genotype: Genotype,
    pub affected: bool,
    pub treated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub subjects: Vec<Subject>,
    pub config: StudyConfig,
    pub replicate_index: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn treated_count(&self) -> usize {
        self.subjects.iter().filter(|s| s.treated).count()
    }

    /// Writes the dataset as CSV, one row per subject.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "subject,qtl_genotype,marker_genotype,underlying,observed,affected,treated"
        )?;
        for (i, s) in self.subjects.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{:.6},{:.6},{},{}",
                i + 1,
                s.qtl_genotype.qtl_label(),
                s.marker_genotype.marker_label(),
                s.underlying,
                s.observed,
                s.affected as u8,
                s.treated as u8
            )?;
        }
        Ok(())
    }
}

/// Everything about a config that stays fixed across its replicates.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: StudyConfig,
    haplotypes: HaplotypeDistribution,
    components: [ComponentParams; 3],
}

impl Simulator {
    pub fn new(config: &StudyConfig) -> Result<Self> {
        config.validate()?;
        let haplotypes = HaplotypeDistribution::from_normalized(config.p, config.delta_prime)?;
        let components = [
            component_params(config, Genotype::HomMajor)?,
            component_params(config, Genotype::Het)?,
            component_params(config, Genotype::HomMinor)?,
        ];
        Ok(Simulator {
            config: config.clone(),
            haplotypes,
            components,
        })
    }

    pub fn config(&self) -> &StudyConfig {
        &self.config
    }

    pub fn subject<R: Rng + ?Sized>(&self, rng: &mut R) -> Subject {
        let (qtl, marker) = sample_genotype_pair(&self.haplotypes, rng);
        let underlying = draw_underlying(&self.components[qtl.index()], rng);
        let t = apply_treatment(underlying, &self.config, rng);
        Subject {
            underlying,
            observed: t.observed,
            qtl_genotype: qtl,
            marker_genotype: marker,
            affected: t.affected,
            treated: t.treated,
        }
    }

    pub fn dataset<R: Rng + ?Sized>(&self, replicate_index: usize, rng: &mut R) -> Dataset {
        Dataset {
            subjects: (0..self.config.n_subjects)
                .map(|_| self.subject(rng))
                .collect(),
            config: self.config.clone(),
            replicate_index,
        }
    }
}

pub fn simulate_dataset<R: Rng + ?Sized>(
    config: &StudyConfig,
    replicate_index: usize,
    rng: &mut R,
) -> Result<Dataset> {
    Ok(Simulator::new(config)?.dataset(replicate_index, rng))
}
