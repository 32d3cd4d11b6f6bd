//! Biallelic QTL/marker genetics.
//!
//! The QTL carries alleles `A` (major, frequency `1 - p`) and `a` (minor,
//! frequency `p`); the marker carries `B`/`b` with the same frequencies.
//! Linkage between the two loci is expressed through the haplotype
//! distribution, and a subject's genotypes come from fusing two haplotypes
//! drawn independently from it.

use rand::Rng;

use crate::error::{domain, Result};

const SUM_TOL: f64 = 1e-12;

/// Genotype at a biallelic locus, indexed by the number of minor alleles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Genotype {
    HomMajor,
    Het,
    HomMinor,
}

impl Genotype {
    pub const ALL: [Genotype; 3] = [Genotype::HomMajor, Genotype::Het, Genotype::HomMinor];

    pub fn from_minor_count(count: u8) -> Genotype {
        match count {
            0 => Genotype::HomMajor,
            1 => Genotype::Het,
            _ => Genotype::HomMinor,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn qtl_label(self) -> &'static str {
        match self {
            Genotype::HomMajor => "AA",
            Genotype::Het => "Aa",
            Genotype::HomMinor => "aa",
        }
    }

    pub fn marker_label(self) -> &'static str {
        match self {
            Genotype::HomMajor => "BB",
            Genotype::Het => "Bb",
            Genotype::HomMinor => "bb",
        }
    }

    /// Accepts either the QTL or the marker spelling.
    pub fn from_label(label: &str) -> Option<Genotype> {
        match label {
            "AA" | "BB" => Some(Genotype::HomMajor),
            "Aa" | "Bb" => Some(Genotype::Het),
            "aa" | "bb" => Some(Genotype::HomMinor),
            _ => None,
        }
    }
}

fn check_allele_freq(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("allele frequency must lie in (0, 1), got {p}"));
    }
    Ok(())
}

/// Hardy-Weinberg genotype probabilities `(AA, Aa, aa)` for minor-allele frequency `p`.
pub fn genotype_probs(p: f64) -> Result<[f64; 3]> {
    check_allele_freq(p)?;
    let q = 1.0 - p;
    Ok([q * q, 2.0 * p * q, p * p])
}

/// Raw LD coefficient for a normalized value `delta_prime` in `[0, 1]`.
///
/// With equal allele frequencies at both loci the maximum attainable
/// positive LD is `p(1 - p)`. Negative normalized LD is rejected.
pub fn delta_from_normalized(p: f64, delta_prime: f64) -> Result<f64> {
    check_allele_freq(p)?;
    if !(0.0..=1.0).contains(&delta_prime) {
        return domain(format!(
            "normalized LD must lie in [0, 1], got {delta_prime}"
        ));
    }
    Ok(delta_prime * p * (1.0 - p))
}

/// One of the four two-locus haplotypes.
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Haplotype {
    AB,
    Ab,
    aB,
    ab,
}

impl Haplotype {
    /// Fixed order used for inverse-CDF sampling.
    pub const ORDER: [Haplotype; 4] = [Haplotype::AB, Haplotype::Ab, Haplotype::aB, Haplotype::ab];

    fn qtl_minor(self) -> u8 {
        matches!(self, Haplotype::aB | Haplotype::ab) as u8
    }

    fn marker_minor(self) -> u8 {
        matches!(self, Haplotype::Ab | Haplotype::ab) as u8
    }
}

/// Fuses two haplotypes into a `(qtl, marker)` genotype pair.
pub fn fuse(first: Haplotype, second: Haplotype) -> (Genotype, Genotype) {
    (
        Genotype::from_minor_count(first.qtl_minor() + second.qtl_minor()),
        Genotype::from_minor_count(first.marker_minor() + second.marker_minor()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaplotypeDistribution {
    /// Frequencies of `AB, Ab, aB, ab`.
    pub freqs: [f64; 4],
    pub p: f64,
    pub delta: f64,
    pub delta_prime: f64,
}

impl HaplotypeDistribution {
    /// Builds the distribution from a normalized LD value.
    pub fn from_normalized(p: f64, delta_prime: f64) -> Result<Self> {
        let delta = delta_from_normalized(p, delta_prime)?;
        haplotype_distribution(p, delta)
    }

    /// Probabilities in the order `AB, Ab, aB, ab`.
    pub fn probs(&self) -> [f64; 4] {
        self.freqs
    }

    pub fn sample_haplotype<R: Rng + ?Sized>(&self, rng: &mut R) -> Haplotype {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for (h, prob) in Haplotype::ORDER.iter().zip(self.probs()) {
            cum += prob;
            if u < cum {
                return *h;
            }
        }
        // u landed in the rounding gap above the last cumulative sum
        Haplotype::ORDER
            .iter()
            .zip(self.probs())
            .rev()
            .find(|(_, prob)| *prob > 0.0)
            .map(|(h, _)| *h)
            .unwrap_or(Haplotype::ab)
    }
}

/// Haplotype frequencies for minor-allele frequency `p` and raw LD `delta`.
pub fn haplotype_distribution(p: f64, delta: f64) -> Result<HaplotypeDistribution> {
    check_allele_freq(p)?;
    let q = 1.0 - p;
    let pq = p * q;
    let freqs = [
        ("AB", q * q + delta),
        ("Ab", pq - delta),
        ("aB", pq - delta),
        ("ab", p * p + delta),
    ];
    // absorb rounding at the complete-linkage boundary
    if let Some((name, f)) = freqs.iter().find(|(_, f)| !(*f >= -SUM_TOL)) {
        return domain(format!(
            "haplotype {name} frequency {f} is negative for p = {p}, delta = {delta}"
        ));
    }
    if let Some((name, f)) = freqs.iter().find(|(_, f)| *f > 1.0 + SUM_TOL) {
        return domain(format!(
            "haplotype {name} frequency {f} exceeds 1 for p = {p}, delta = {delta}"
        ));
    }
    let clamp = |f: f64| f.clamp(0.0, 1.0);
    let delta_prime = if pq > 0.0 { delta / pq } else { 0.0 };
    Ok(HaplotypeDistribution {
        freqs: freqs.map(|(_, f)| clamp(f)),
        p,
        delta,
        delta_prime,
    })
}

/// Draws two haplotypes i.i.d. and returns the fused `(qtl, marker)` genotypes.
pub fn sample_genotype_pair<R: Rng + ?Sized>(
    dist: &HaplotypeDistribution,
    rng: &mut R,
) -> (Genotype, Genotype) {
    let first = dist.sample_haplotype(rng);
    let second = dist.sample_haplotype(rng);
    fuse(first, second)
}
