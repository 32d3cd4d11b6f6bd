//! Replicated simulation, adjustment and testing over a parameter grid.
//!
//! Every replicate draws from its own ChaCha stream seeded by
//! [`replicate_seed`], so results depend only on the grid and the master
//! seed. Replicates are spread over a rayon pool and merged by counting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::adjustments::Method;
use crate::error::{Error, Result};
use crate::stattests::{normal_pdf, normal_sf, run_test, TestKind};
use crate::trait_sim::{Family, Simulator, StudyConfig};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 finalizer, a bijection on `u64`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the random stream for one replicate of one grid cell.
///
/// For any two fixed arguments the map from the third is a bijection.
pub fn replicate_seed(master_seed: u64, cell_index: u64, replicate_index: u64) -> u64 {
    let h = splitmix64(master_seed);
    let h = splitmix64(h ^ cell_index.wrapping_mul(GOLDEN | 1));
    splitmix64(h ^ replicate_index)
}

pub fn replicate_rng(master_seed: u64, cell_index: u64, replicate_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replicate_seed(master_seed, cell_index, replicate_index))
}

/// Runs `f` on a dedicated pool with `workers` threads, or on the global
/// pool when `workers` is `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

impl TestKind {
    pub fn for_family(family: Family) -> TestKind {
        match family {
            Family::Normal => TestKind::Parametric,
            Family::LogNormal => TestKind::KruskalWallis,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub config: StudyConfig,
    pub method: Method,
    pub power: f64,
    pub rejections: usize,
    pub replicates: usize,
    pub non_testable: usize,
    pub fallback_count: usize,
    pub mc_std_err: f64,
}

impl CellResult {
    pub fn from_counts(
        config: StudyConfig,
        method: Method,
        rejections: usize,
        replicates: usize,
        non_testable: usize,
        fallback_count: usize,
    ) -> Self {
        let power = if replicates == 0 {
            0.0
        } else {
            rejections as f64 / replicates as f64
        };
        let mc_std_err = if replicates == 0 {
            0.0
        } else {
            (power * (1.0 - power) / replicates as f64).sqrt()
        };
        CellResult {
            config,
            method,
            power,
            rejections,
            replicates,
            non_testable,
            fallback_count,
            mc_std_err,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    rejections: usize,
    non_testable: usize,
    fallbacks: usize,
}

impl Tally {
    fn merge(&mut self, other: Tally) {
        self.rejections += other.rejections;
        self.non_testable += other.non_testable;
        self.fallbacks += other.fallbacks;
    }
}

fn check_methods(methods: &[Method], test: TestKind, family: Family) -> Result<()> {
    if methods.is_empty() {
        return Err(Error::Config("no analysis methods selected".into()));
    }
    if methods.contains(&Method::TreatmentCovariate)
        && (test == TestKind::KruskalWallis || family == Family::LogNormal)
    {
        return Err(Error::Config(
            "the covariate method cannot be combined with the lognormal family or the rank test"
                .into(),
        ));
    }
    Ok(())
}

/// One replicate: simulate once, then analyse with every method.
fn run_replicate(
    sim: &Simulator,
    cell_index: u64,
    replicate: usize,
    methods: &[Method],
    test: TestKind,
) -> Result<Vec<Tally>> {
    let cfg = sim.config();
    let mut rng = replicate_rng(cfg.master_seed, cell_index, replicate as u64);
    let ds = sim.dataset(replicate, &mut rng);
    methods
        .iter()
        .map(|m| {
            let sample = m.apply(&ds);
            let result = run_test(test, &sample)?;
            Ok(Tally {
                rejections: result.rejects(cfg.alpha) as usize,
                non_testable: (!result.testable) as usize,
                fallbacks: sample.fallback as usize,
            })
        })
        .collect()
}

fn summarize(
    config: &StudyConfig,
    methods: &[Method],
    tallies: Vec<Vec<Tally>>,
) -> Vec<CellResult> {
    let mut totals = vec![Tally::default(); methods.len()];
    for rep in tallies {
        for (t, r) in totals.iter_mut().zip(rep) {
            t.merge(r);
        }
    }
    methods
        .iter()
        .zip(totals)
        .map(|(&m, t)| {
            CellResult::from_counts(
                config.clone(),
                m,
                t.rejections,
                config.n_replicates,
                t.non_testable,
                t.fallbacks,
            )
        })
        .collect()
}

/// Power of each method in one grid cell.
pub fn run_cell(
    config: &StudyConfig,
    cell_index: u64,
    methods: &[Method],
    test: TestKind,
) -> Result<Vec<CellResult>> {
    check_methods(methods, test, config.family)?;
    let sim = Simulator::new(config)?;
    let tallies = (0..config.n_replicates)
        .into_par_iter()
        .map(|r| run_replicate(&sim, cell_index, r, methods, test))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(config, methods, tallies))
}

/// Grid of study parameters sharing every other setting of `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub family: Family,
    pub ps: Vec<f64>,
    pub ds: Vec<f64>,
    pub delta_primes: Vec<f64>,
    pub methods: Vec<Method>,
    pub base: StudyConfig,
}

impl GridSpec {
    /// The full study grid for a trait family.
    pub fn standard(family: Family) -> Self {
        GridSpec {
            family,
            ps: vec![0.1, 0.3, 0.5],
            ds: vec![10.0, 15.0, 20.0, 25.0, 30.0],
            delta_primes: vec![1.0 / 3.0, 2.0 / 3.0, 1.0],
            methods: Method::standard_set(family),
            base: StudyConfig {
                family,
                ..Default::default()
            },
        }
    }

    pub fn test_kind(&self) -> TestKind {
        TestKind::for_family(self.family)
    }

    /// Cell configs in seeding order: delta-prime, then p, then d.
    pub fn cells(&self) -> Vec<StudyConfig> {
        let mut out = Vec::new();
        for &delta_prime in &self.delta_primes {
            for &p in &self.ps {
                for &d in &self.ds {
                    out.push(StudyConfig {
                        p,
                        d,
                        delta_prime,
                        family: self.family,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }

    fn family_offset(&self) -> u64 {
        let per_family = (self.delta_primes.len() * self.ps.len() * self.ds.len()) as u64;
        match self.family {
            Family::Normal => 0,
            Family::LogNormal => per_family,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerTable {
    pub family: Family,
    /// Sorted by delta-prime (descending), p, d, then method order.
    pub cells: Vec<CellResult>,
}

impl PowerTable {
    pub fn new(family: Family, mut cells: Vec<CellResult>) -> Self {
        cells.sort_by(|a, b| {
            b.config
                .delta_prime
                .total_cmp(&a.config.delta_prime)
                .then(a.config.p.total_cmp(&b.config.p))
                .then(a.config.d.total_cmp(&b.config.d))
                .then(a.method.order().cmp(&b.method.order()))
        });
        PowerTable { family, cells }
    }

    pub fn get(&self, delta_prime: f64, p: f64, d: f64, method: Method) -> Option<&CellResult> {
        const TOL: f64 = 1e-9;
        self.cells.iter().find(|c| {
            (c.config.delta_prime - delta_prime).abs() < TOL
                && (c.config.p - p).abs() < TOL
                && (c.config.d - d).abs() < TOL
                && c.method.order() == method.order()
        })
    }

    /// Distinct delta-prime values, descending.
    pub fn delta_primes(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !v.iter().any(|x| (x - c.config.delta_prime).abs() < 1e-9) {
                v.push(c.config.delta_prime);
            }
        }
        v
    }

    /// Methods present, in column order.
    pub fn methods(&self) -> Vec<Method> {
        let mut v: Vec<Method> = Vec::new();
        for c in &self.cells {
            if !v.contains(&c.method) {
                v.push(c.method);
            }
        }
        v.sort_by_key(|m| m.order());
        v
    }
}

/// Runs every cell of the grid. Output is independent of the pool size.
pub fn run_grid(spec: &GridSpec) -> Result<PowerTable> {
    if spec.ps.is_empty() || spec.ds.is_empty() || spec.delta_primes.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    let test = spec.test_kind();
    check_methods(&spec.methods, test, spec.family)?;
    let sims = spec
        .cells()
        .iter()
        .map(Simulator::new)
        .collect::<Result<Vec<_>>>()?;
    let offset = spec.family_offset();
    let reps = spec.base.n_replicates;

    let jobs: Vec<(usize, usize)> = (0..sims.len())
        .flat_map(|c| (0..reps).map(move |r| (c, r)))
        .collect();
    let tallies = jobs
        .into_par_iter()
        .map(|(c, r)| run_replicate(&sims[c], offset + c as u64, r, &spec.methods, test))
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::with_capacity(sims.len() * spec.methods.len());
    let mut it = tallies.into_iter();
    for sim in &sims {
        let chunk: Vec<Vec<Tally>> = it.by_ref().take(reps).collect();
        cells.extend(summarize(sim.config(), &spec.methods, chunk));
    }
    Ok(PowerTable::new(spec.family, cells))
}

/// Inputs of the single-normal model used to check the medicine-effect estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorParams {
    pub n: usize,
    pub mu: f64,
    pub sigma: f64,
    pub threshold: f64,
    pub treat_prob: f64,
    pub nu: f64,
    pub tau: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            n: 100,
            mu: 120.0,
            sigma: 20.0,
            threshold: 140.0,
            treat_prob: 0.8,
            nu: -10.0,
            tau: 3.0,
            replicates: 100_000,
            seed: 0,
        }
    }
}

pub const MIN_ESTIMATOR_REPLICATES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub nu_hat_mean: f64,
    pub nu_hat_variance: f64,
    /// `m sigma^2 / (k (m - k)) + tau^2 / k`, averaged over realized `(m, k)`.
    pub predicted_variance: f64,
    /// Same formula with the variance of the normal truncated at the threshold.
    pub predicted_variance_truncated: f64,
    pub truncated_mean: f64,
    pub truncated_variance: f64,
    pub replicates: usize,
    pub discarded: usize,
}

impl EstimatorReport {
    pub fn discard_rate(&self) -> f64 {
        self.discarded as f64 / (self.replicates + self.discarded) as f64
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "nu_hat_mean: {:.6}\nnu_hat_variance: {:.6}\npredicted_variance: {:.6}\n\
             predicted_variance_truncated: {:.6}\ntruncated_mean: {:.6}\n\
             truncated_variance: {:.6}\nreplicates: {}\ndiscarded: {}\ndiscard_rate: {:.6}\n",
            self.nu_hat_mean,
            self.nu_hat_variance,
            self.predicted_variance,
            self.predicted_variance_truncated,
            self.truncated_mean,
            self.truncated_variance,
            self.replicates,
            self.discarded,
            self.discard_rate()
        )
    }
}

/// Mean and variance of `N(mu, sigma^2)` conditioned on exceeding `threshold`.
pub fn truncated_normal_moments(mu: f64, sigma: f64, threshold: f64) -> (f64, f64) {
    let a = (threshold - mu) / sigma;
    let lambda = normal_pdf(a) / normal_sf(a);
    (
        mu + sigma * lambda,
        sigma * sigma * (1.0 + a * lambda - lambda * lambda),
    )
}

/// Monte Carlo check of the difference-of-means medicine-effect estimator.
///
/// Replicates with no treated or no untreated affected subject are
/// discarded and counted.
pub fn verify_estimator(params: &EstimatorParams) -> Result<EstimatorReport> {
    if !(params.treat_prob > 0.0 && params.treat_prob < 1.0) {
        return Err(Error::Config(format!(
            "treatment probability must lie in (0, 1), got {}",
            params.treat_prob
        )));
    }
    if params.replicates < MIN_ESTIMATOR_REPLICATES {
        return Err(Error::Config(format!(
            "need at least {MIN_ESTIMATOR_REPLICATES} replicates, got {}",
            params.replicates
        )));
    }
    if !(params.sigma > 0.0 && params.tau >= 0.0) || params.n == 0 {
        return Err(Error::Config(
            "sigma must be > 0, tau >= 0 and n > 0".into(),
        ));
    }

    let draws: Vec<Option<(f64, usize, usize)>> = (0..params.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(params.seed, 0, r as u64);
            let (mut m, mut k) = (0usize, 0usize);
            let (mut sum_treated, mut sum_untreated) = (0.0, 0.0);
            for _ in 0..params.n {
                let z: f64 = rng.sample(StandardNormal);
                let x = params.mu + params.sigma * z;
                if x <= params.threshold {
                    continue;
                }
                m += 1;
                if rng.random::<f64>() < params.treat_prob {
                    let e: f64 = rng.sample(StandardNormal);
                    k += 1;
                    sum_treated += x + params.nu + params.tau * e;
                } else {
                    sum_untreated += x;
                }
            }
            (k > 0 && k < m).then(|| {
                (
                    sum_treated / k as f64 - sum_untreated / (m - k) as f64,
                    m,
                    k,
                )
            })
        })
        .collect();

    let kept: Vec<(f64, usize, usize)> = draws.iter().flatten().copied().collect();
    let discarded = draws.len() - kept.len();
    if kept.len() < 2 {
        return Err(Error::Numeric(
            "all estimator replicates were degenerate".into(),
        ));
    }
    let count = kept.len() as f64;
    let mean = kept.iter().map(|t| t.0).sum::<f64>() / count;
    let variance = kept.iter().map(|t| (t.0 - mean).powi(2)).sum::<f64>() / (count - 1.0);

    let (trunc_mean, trunc_var) =
        truncated_normal_moments(params.mu, params.sigma, params.threshold);
    let sigma2 = params.sigma * params.sigma;
    let tau2 = params.tau * params.tau;
    let (mut structural, mut inv_k) = (0.0, 0.0);
    for &(_, m, k) in &kept {
        let (m, k) = (m as f64, k as f64);
        structural += m / (k * (m - k));
        inv_k += 1.0 / k;
    }
    structural /= count;
    inv_k /= count;

    Ok(EstimatorReport {
        nu_hat_mean: mean,
        nu_hat_variance: variance,
        predicted_variance: structural * sigma2 + inv_k * tau2,
        predicted_variance_truncated: structural * trunc_var + inv_k * tau2,
        truncated_mean: trunc_mean,
        truncated_variance: trunc_var,
        replicates: kept.len(),
        discarded,
    })
}
