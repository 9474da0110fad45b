//! Experiment runners, configuration and result files.
//!
//! Every runner is a pure function of its configuration (which includes the
//! seed); all randomness flows through [`stream_rng`] keyed by work-item
//! indices, and parallel results are folded in index order, so output files
//! are byte-identical across runs and worker counts.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chenstein::{
    binomial_poisson_tv, exact_s_pmf, BinaryProcessModel, ChenSteinReport,
};
use crate::error::{Error, Result};
use crate::orbit::{
    estimate_v_measure, horizon, is_short_return_center, short_return_horizon, visit_count,
    VEstimate, VerdictStatus,
};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{
    bootstrap_ci, fit_log_decay, poisson_pmf_table, poisson_tail, sup_distance, tv_to_poisson,
    BootstrapCi, DecayFit, Distances, EmpiricalPmf, DEFAULT_RESAMPLES,
};
use crate::systems::{
    ball_measure, sample_invariant_with, BallSpec, BirkhoffConfig, EmpiricalMeasure, MeasureKind,
    Metric, Point, SystemSpec,
};
use crate::tower::{
    build_tower, check_distortion, check_omega_decay, default_omega_grid, intermittent_return_tail,
    kac_check, omega, KacReport, TailFit, TowerSpec,
};

/// Crate version embedded in every result file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default split constant of the short-return reduction (must stay below 1/3).
pub const DEFAULT_B_FRAK: f64 = 0.25;

/// Which map to run, in config-file form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// `doubling`, `cat_map`, `intermittent` or `gauss`.
    pub name: String,
    pub alpha: Option<f64>,
    pub gauss_cutoff: Option<f64>,
    pub metric: Option<Metric>,
    pub lipschitz_a: Option<f64>,
    /// Orbit length of the Birkhoff measure estimate (intermittent map).
    pub birkhoff_orbit_len: Option<u64>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            name: "doubling".into(),
            alpha: None,
            gauss_cutoff: None,
            metric: None,
            lipschitz_a: None,
            birkhoff_orbit_len: None,
        }
    }
}

impl SystemConfig {
    /// The concrete system; Birkhoff estimates are seeded from `seed`.
    pub fn build(&self, seed: u64) -> Result<SystemSpec> {
        let mut spec = match self.name.as_str() {
            "doubling" => SystemSpec::doubling(),
            "cat_map" | "cat" => SystemSpec::cat_map(),
            "intermittent" | "lsv" => SystemSpec::intermittent(
                self.alpha
                    .ok_or_else(|| Error::Config("the intermittent map needs `alpha`".into()))?,
            )?,
            "gauss" => match self.gauss_cutoff {
                Some(c) => SystemSpec::gauss_with_cutoff(c)?,
                None => SystemSpec::gauss(),
            },
            other => return Err(Error::Config(format!("unknown system `{other}`"))),
        };
        if let Some(m) = self.metric {
            spec = spec.with_metric(m);
        }
        if let Some(a) = self.lipschitz_a {
            spec.lipschitz_a = a;
        }
        if let MeasureKind::EmpiricalBirkhoff(cfg) = spec.measure {
            spec.measure = MeasureKind::EmpiricalBirkhoff(BirkhoffConfig {
                orbit_len: self.birkhoff_orbit_len.unwrap_or(cfg.orbit_len),
                seed: derive_seed(seed, &[0xb1]),
                ..cfg
            });
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Tower hypotheses that have no constructive recipe; kept
/// as an informational record next to results.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssumptionParams {
    pub lambda_tail: Option<f64>,
    pub dimension_varsigma: Option<f64>,
    pub dimension_varsigma_hat: Option<f64>,
    pub xi: Option<f64>,
    pub regularity_a: Option<f64>,
}

fn default_t() -> f64 {
    1.0
}

fn default_rho_grid() -> Vec<f64> {
    [8, 10, 12, 14].iter().map(|&e| (-(e as f64)).exp2()).collect()
}

fn default_b_frak() -> f64 {
    DEFAULT_B_FRAK
}

fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// Configuration of the return-statistics, short-return and scaling runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default = "default_t")]
    pub t_param: f64,
    #[serde(default = "default_rho_grid")]
    pub rho_grid: Vec<f64>,
    #[serde(default = "default_centers")]
    pub n_centers: u64,
    #[serde(default = "default_starts")]
    pub n_starts_per_center: u64,
    /// Horizon constant; defaults to `1 / (4 ln A)` of the system.
    #[serde(default)]
    pub a_frak: Option<f64>,
    #[serde(default = "default_b_frak")]
    pub b_frak: f64,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    /// Centers sampled per radius by the short-return scan.
    #[serde(default = "default_v_samples")]
    pub v_samples: u64,
    #[serde(default)]
    pub assumptions: AssumptionParams,
}

fn default_centers() -> u64 {
    1000
}

fn default_starts() -> u64 {
    10
}

fn default_v_samples() -> u64 {
    10_000
}

impl ExperimentConfig {
    pub fn new(system: SystemConfig, seed: u64) -> Self {
        ExperimentConfig {
            system,
            t_param: default_t(),
            rho_grid: default_rho_grid(),
            n_centers: default_centers(),
            n_starts_per_center: default_starts(),
            a_frak: None,
            b_frak: DEFAULT_B_FRAK,
            seed,
            output_dir: default_output_dir(),
            bootstrap_resamples: DEFAULT_RESAMPLES,
            v_samples: default_v_samples(),
            assumptions: AssumptionParams::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.t_param > 0.0) {
            return bad(format!("t_param = {} must be positive", self.t_param));
        }
        if self.rho_grid.is_empty() {
            return bad("rho_grid is empty".into());
        }
        if self.rho_grid.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return bad("rho_grid entries must lie in (0, 1)".into());
        }
        if self.rho_grid.windows(2).any(|w| w[1] >= w[0]) {
            return bad("rho_grid must be strictly decreasing".into());
        }
        if self.n_centers == 0 || self.n_starts_per_center == 0 {
            return bad("n_centers and n_starts_per_center must be positive".into());
        }
        if let Some(a) = self.a_frak {
            if !(a > 0.0) {
                return bad(format!("a_frak = {a} must be positive"));
            }
        }
        if !(self.b_frak > 0.0 && self.b_frak < 1.0 / 3.0) {
            return bad(format!("b_frak = {} must lie in (0, 1/3)", self.b_frak));
        }
        if self.bootstrap_resamples < 2 {
            return bad("bootstrap_resamples must be at least 2".into());
        }
        Ok(())
    }

    fn a_frak_for(&self, system: &SystemSpec) -> f64 {
        self.a_frak.unwrap_or_else(|| system.default_a_frak())
    }
}

/// Ball measures, with the Birkhoff sample built once per run.
enum MeasureOracle {
    Exact,
    Birkhoff(EmpiricalMeasure),
}

impl MeasureOracle {
    fn new(system: &SystemSpec) -> Result<Self> {
        Ok(match system.measure {
            MeasureKind::EmpiricalBirkhoff(cfg) => {
                MeasureOracle::Birkhoff(EmpiricalMeasure::build(system, &cfg)?)
            }
            _ => MeasureOracle::Exact,
        })
    }

    fn measure(&self, system: &SystemSpec, ball: &BallSpec) -> Result<f64> {
        match self {
            MeasureOracle::Exact => Ok(ball_measure(system, ball)?.value),
            MeasureOracle::Birkhoff(m) => {
                Ok(m.ball_measure(ball.center.coords().0, ball.radius, ball.metric)?.value)
            }
        }
    }
}

/// One accepted center and its visit counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterRecord {
    /// Index among the sampled candidates.
    pub candidate: u64,
    pub coords: (f64, f64),
    pub mu_ball: f64,
    pub n: u64,
    pub visits: Vec<u64>,
    pub sup_distance: f64,
}

/// Everything measured at one radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoRecord {
    pub rho: f64,
    /// Mean of the ball measures over accepted centers.
    pub mu_ball: f64,
    /// Mean horizon `⌊t / μ(B)⌋` over accepted centers.
    pub mean_n: f64,
    pub j_horizon: u32,
    pub centers_attempted: u64,
    pub centers_excluded: u64,
    /// Accepted centers whose short-return status could not be certified.
    pub centers_unknown: u64,
    pub samples: u64,
    pub pmf: EmpiricalPmf,
    pub sup_distance: f64,
    pub distances: Distances,
    pub ci: BootstrapCi,
    pub centers: Vec<CenterRecord>,
    pub v_estimate: Option<VEstimate>,
}

/// Result of a return-statistics run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub version: String,
    pub config: ExperimentConfig,
    pub system: Option<SystemSpec>,
    pub a_frak: f64,
    pub records: Vec<RhoRecord>,
    pub decay_fit: Option<DecayFit>,
}

impl ExperimentResult {
    /// A result with no records (used for header-only output).
    pub fn empty(config: ExperimentConfig) -> Self {
        ExperimentResult {
            version: VERSION.into(),
            config,
            system: None,
            a_frak: 0.0,
            records: Vec::new(),
            decay_fit: None,
        }
    }
}

const STREAM_CENTER: u64 = 0xce47;
const STREAM_START: u64 = 0x57a7;
const STREAM_BOOT: u64 = 0xb0;

/// Samples centers, excludes very-short-return ones, runs independent orbits
/// from every accepted center and compares the pooled visit counts with
/// `Poi(t)`; finally fits the decay of the sup distance across radii.
pub fn run_return_stats(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let system = config.system.build(config.seed)?;
    let a_frak = config.a_frak_for(&system);
    let oracle = MeasureOracle::new(&system)?;
    let mut records = Vec::with_capacity(config.rho_grid.len());
    for (ri, &rho) in config.rho_grid.iter().enumerate() {
        records.push(return_stats_at(config, &system, &oracle, a_frak, ri as u64, rho)?);
    }
    let decay_fit = fit_records(&records, |r| r.sup_distance)?;
    Ok(ExperimentResult {
        version: VERSION.into(),
        config: config.clone(),
        system: Some(system),
        a_frak,
        records,
        decay_fit,
    })
}

fn fit_records(records: &[RhoRecord], f: impl Fn(&RhoRecord) -> f64) -> Result<Option<DecayFit>> {
    if records.len() < 3 {
        return Ok(None);
    }
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.rho, f(r))).collect();
    match fit_log_decay(&points) {
        Ok(fit) => Ok(Some(fit)),
        Err(Error::InsufficientData(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

struct Candidate {
    index: u64,
    center: Point,
    status: VerdictStatus,
}

fn return_stats_at(
    config: &ExperimentConfig,
    system: &SystemSpec,
    oracle: &MeasureOracle,
    a_frak: f64,
    ri: u64,
    rho: f64,
) -> Result<RhoRecord> {
    let j = short_return_horizon(rho, a_frak)?;
    let want = config.n_centers as usize;
    let max_attempts = 8 * config.n_centers + 64;
    let mut accepted: Vec<Candidate> = Vec::with_capacity(want);
    let (mut attempted, mut excluded) = (0u64, 0u64);
    // Candidates are screened in chunks; acceptance follows index order.
    while accepted.len() < want && attempted < max_attempts {
        let chunk = (config.n_centers - accepted.len() as u64).max(16).min(max_attempts - attempted);
        let batch: Vec<Candidate> = (attempted..attempted + chunk)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(config.seed, &[ri, STREAM_CENTER, i]);
                let center = sample_invariant_with(system, &mut rng, j as u64 + 64)?;
                let status = is_short_return_center(system, &center, rho, a_frak)?.status;
                Ok(Candidate { index: i, center, status })
            })
            .collect::<Result<_>>()?;
        for c in batch {
            attempted += 1;
            if c.status == VerdictStatus::Intersects {
                excluded += 1;
            } else {
                accepted.push(c);
                if accepted.len() == want {
                    break;
                }
            }
        }
    }
    if accepted.is_empty() {
        return Err(Error::AllCentersExcluded {
            attempted: attempted as usize,
        });
    }
    let unknown = accepted.iter().filter(|c| c.status == VerdictStatus::Unknown).count() as u64;
    let starts = config.n_starts_per_center;
    let t = config.t_param;
    let centers: Vec<CenterRecord> = accepted
        .par_iter()
        .map(|c| {
            let ball = BallSpec::unchecked(c.center.clone(), rho, system.metric);
            let mu = oracle.measure(system, &ball)?;
            let n = horizon(t, mu)?;
            let visits = (0..starts)
                .map(|s| {
                    let mut rng = stream_rng(config.seed, &[ri, STREAM_START, c.index, s]);
                    let start = sample_invariant_with(system, &mut rng, n)?;
                    visit_count(system, &ball, &start, n)
                })
                .collect::<Result<Vec<u64>>>()?;
            let pmf = EmpiricalPmf::from_samples(&visits)?;
            Ok(CenterRecord {
                candidate: c.index,
                coords: c.center.coords(),
                mu_ball: mu,
                n,
                visits,
                sup_distance: sup_distance(&pmf, t),
            })
        })
        .collect::<Result<_>>()?;
    let pooled: Vec<u64> = centers.iter().flat_map(|c| c.visits.iter().copied()).collect();
    let pmf = EmpiricalPmf::from_samples(&pooled)?;
    let k = centers.len() as f64;
    Ok(RhoRecord {
        rho,
        mu_ball: centers.iter().map(|c| c.mu_ball).sum::<f64>() / k,
        mean_n: centers.iter().map(|c| c.n as f64).sum::<f64>() / k,
        j_horizon: j,
        centers_attempted: attempted,
        centers_excluded: excluded,
        centers_unknown: unknown,
        samples: pooled.len() as u64,
        sup_distance: sup_distance(&pmf, t),
        distances: tv_to_poisson(&pmf, t),
        ci: bootstrap_ci(
            &pooled,
            t,
            config.bootstrap_resamples,
            derive_seed(config.seed, &[ri, STREAM_BOOT]),
        )?,
        pmf,
        centers,
        v_estimate: None,
    })
}

/// One row of the short-return reduction table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflationRow {
    pub n: u64,
    pub p: u32,
    pub ln_s_p: f64,
    pub s_p: f64,
    pub rho_prime: f64,
    pub n_prime: u64,
}

/// `ln(A^m − 1)` without overflow.
fn ln_pow_minus_one(ln_a: f64, m: f64) -> f64 {
    let x = m * ln_a;
    x + (-(-x).exp()).ln_1p()
}

/// `s_p = 2^p (A^{n 2^p} − 1) / (A^n − 1)`, in log form.
pub fn ln_inflation(a: f64, n: u64, p: u32) -> f64 {
    let ln_a = a.ln();
    let m = n as f64;
    p as f64 * std::f64::consts::LN_2 + ln_pow_minus_one(ln_a, m * (p as f64).exp2())
        - ln_pow_minus_one(ln_a, m)
}

/// Smallest `p` with `n 2^p > bJ`, i.e. `⌊lg bJ − lg n⌋ + 1`.
pub fn doubling_exponent(b_j: f64, n: u64) -> u32 {
    let mut p = 0;
    while (n as f64) * (p as f64).exp2() <= b_j {
        p += 1;
    }
    p
}

/// Rows `n = 1..=⌊bJ⌋` of the inflation table at radius `rho`.
pub fn inflation_table(a: f64, b_frak: f64, j: u32, rho: f64) -> Vec<InflationRow> {
    let b_j = b_frak * j as f64;
    (1..=b_j.floor() as u64)
        .map(|n| {
            let p = doubling_exponent(b_j, n);
            let ln_s = ln_inflation(a, n, p);
            InflationRow {
                n,
                p,
                ln_s_p: ln_s,
                s_p: ln_s.exp(),
                rho_prime: ln_s.exp() * rho,
                n_prime: n << p,
            }
        })
        .collect()
}

/// Per-radius short-return estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortReturnRecord {
    pub rho: f64,
    pub j_horizon: u32,
    pub estimate: VEstimate,
    pub inflation: Vec<InflationRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortReturnResult {
    pub version: String,
    pub config: ExperimentConfig,
    pub system: SystemSpec,
    pub a_frak: f64,
    pub records: Vec<ShortReturnRecord>,
    /// Decay fit of the upper estimates of `μ(V_ρ)`.
    pub decay_fit: Option<DecayFit>,
}

const STREAM_V: u64 = 0x5c;

pub fn run_short_return_scan(config: &ExperimentConfig) -> Result<ShortReturnResult> {
    config.validate()?;
    let system = config.system.build(config.seed)?;
    let a_frak = config.a_frak_for(&system);
    let records = config
        .rho_grid
        .iter()
        .enumerate()
        .map(|(ri, &rho)| {
            let j = short_return_horizon(rho, a_frak)?;
            let estimate = estimate_v_measure(
                &system,
                rho,
                a_frak,
                config.v_samples,
                derive_seed(config.seed, &[ri as u64, STREAM_V]),
            )?;
            Ok(ShortReturnRecord {
                rho,
                j_horizon: j,
                estimate,
                inflation: inflation_table(system.lipschitz_a, config.b_frak, j, rho),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let decay_fit = if records.len() >= 3 {
        let points: Vec<(f64, f64)> = records.iter().map(|r| (r.rho, r.estimate.upper)).collect();
        match fit_log_decay(&points) {
            Ok(f) => Some(f),
            Err(Error::InsufficientData(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(ShortReturnResult {
        version: VERSION.into(),
        config: config.clone(),
        system,
        a_frak,
        records,
        decay_fit,
    })
}

/// Return statistics with the short-return estimate attached to every radius.
pub fn run_scaling(config: &ExperimentConfig) -> Result<(ExperimentResult, ShortReturnResult)> {
    let mut stats = run_return_stats(config)?;
    let scan = run_short_return_scan(config)?;
    for (rec, sr) in stats.records.iter_mut().zip(&scan.records) {
        rec.v_estimate = Some(sr.estimate);
    }
    Ok((stats, scan))
}

/// Family of randomized binary processes for the Chen–Stein suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteKind {
    Iid,
    Markov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChenSteinConfig {
    #[serde(default = "default_suite_kind")]
    pub kind: SuiteKind,
    #[serde(default = "default_instances")]
    pub instances: u64,
    /// Instances draw `N` uniformly from `n_min..=n_max`.
    #[serde(default = "default_n_min")]
    pub n_min: u64,
    #[serde(default = "default_n_max")]
    pub n_max: u64,
    #[serde(default = "default_p_values")]
    pub p_values: Vec<u64>,
    /// Extra points beyond `N` covered by the finite interval family.
    #[serde(default = "default_interval_overhang")]
    pub interval_overhang: u64,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_suite_kind() -> SuiteKind {
    SuiteKind::Markov
}

fn default_instances() -> u64 {
    50
}

fn default_n_min() -> u64 {
    6
}

fn default_n_max() -> u64 {
    12
}

fn default_p_values() -> Vec<u64> {
    vec![2, 3, 4]
}

fn default_interval_overhang() -> u64 {
    10
}

impl ChenSteinConfig {
    pub fn new(kind: SuiteKind, seed: u64) -> Self {
        ChenSteinConfig {
            kind,
            instances: default_instances(),
            n_min: default_n_min(),
            n_max: default_n_max(),
            p_values: default_p_values(),
            interval_overhang: default_interval_overhang(),
            seed,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_min < 3 || self.n_min > self.n_max || self.n_max > crate::chenstein::DP_BUDGET {
            return Err(Error::Config(format!(
                "need 3 ≤ n_min ≤ n_max ≤ {} (got {}..={})",
                crate::chenstein::DP_BUDGET,
                self.n_min,
                self.n_max
            )));
        }
        if self.p_values.is_empty() || self.p_values.iter().any(|&p| p < 2) {
            return Err(Error::Config("p_values must be non-empty and at least 2".into()));
        }
        Ok(())
    }
}

/// One (instance, p) evaluation of the bound against the exact law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChenSteinCase {
    pub instance: u64,
    pub report: ChenSteinReport,
    /// Largest `|P(S = k) − Poi_t(k)|` over `k`.
    pub max_singleton_deviation: f64,
    /// Largest ratio deviation / bound over singletons and intervals.
    pub worst_ratio: f64,
    pub violations: u64,
    pub sets_checked: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChenSteinSuiteResult {
    pub version: String,
    pub config: ChenSteinConfig,
    pub cases: Vec<ChenSteinCase>,
    pub exact_pmfs: Vec<Vec<f64>>,
    pub violations: u64,
}

/// Absolute tolerance for comparing exact deviations with the bound.
pub const BOUND_TOLERANCE: f64 = 1e-12;

fn random_model(kind: SuiteKind, rng: &mut impl Rng) -> BinaryProcessModel {
    match kind {
        SuiteKind::Iid => BinaryProcessModel::IidBernoulli {
            eps: rng.random_range(0.02..0.3),
        },
        SuiteKind::Markov => loop {
            let a: f64 = rng.random_range(0.01..0.6);
            let b: f64 = rng.random_range(0.05..0.99);
            let m = BinaryProcessModel::TwoStateMarkov {
                transition: [[1.0 - a, a], [1.0 - b, b]],
                initial: None,
            };
            // Keep ε = a / (a + 1 − b) small enough for N ≥ 3 to be meaningful.
            if a / (a + 1.0 - b) < 0.4 {
                break m;
            }
        },
    }
}

/// Checks the bound on every singleton and interval `E` for one case.
pub fn check_bound_exhaustively(report: &ChenSteinReport, pmf: &[f64], overhang: u64) -> (f64, f64, u64, u64) {
    let t = report.t_param;
    let n = report.n;
    let k_top = n + overhang;
    let pois = poisson_pmf_table(t, k_top as usize);
    let mass_s = |k: u64| pmf.get(k as usize).copied().unwrap_or(0.0);
    let (mut max_single, mut worst, mut violations, mut checked) = (0.0f64, 0.0f64, 0u64, 0u64);
    let mut judge = |dev: f64, e_size: u64| {
        let bound = report.bound_total(e_size);
        worst = worst.max(dev / bound);
        checked += 1;
        if dev > bound + BOUND_TOLERANCE {
            violations += 1;
        }
    };
    for a in 0..=k_top {
        let mut ps = 0.0;
        let mut pn = 0.0;
        for b in a..=k_top {
            ps += mass_s(b);
            pn += pois[b as usize];
            let e_size = if a > n { 0 } else { b.min(n) - a + 1 };
            let dev = (ps - pn).abs();
            if a == b {
                max_single = max_single.max(dev);
            }
            judge(dev, e_size);
        }
        // Half-line [a, ∞).
        let ps: f64 = (a..=n).map(mass_s).sum();
        let pn = if a == 0 { 1.0 } else { poisson_tail(t, a - 1) };
        judge((ps - pn).abs(), if a > n { 0 } else { n - a + 1 });
    }
    (max_single, worst, violations, checked)
}

const STREAM_SUITE: u64 = 0xc5;

pub fn run_chen_stein_suite(config: &ChenSteinConfig) -> Result<ChenSteinSuiteResult> {
    config.validate()?;
    let per_instance: Vec<(Vec<ChenSteinCase>, Vec<f64>)> = (0..config.instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(config.seed, &[STREAM_SUITE, i]);
            let model = random_model(config.kind, &mut rng);
            let n = rng.random_range(config.n_min..=config.n_max);
            let eps = crate::chenstein::compute_eps(&model)?.value;
            // t inside [N ε, (N + 1) ε) so that ⌊t/ε⌋ = N.
            let t = (n as f64 + 0.5) * eps;
            let pmf = exact_s_pmf(&model, n)?;
            let mut cases = Vec::new();
            for &p in &config.p_values {
                if p + 1 >= n {
                    continue;
                }
                let report = ChenSteinReport::compute_with_n(&model, t, p, n)?;
                let (max_single, worst, violations, checked) =
                    check_bound_exhaustively(&report, &pmf, config.interval_overhang);
                cases.push(ChenSteinCase {
                    instance: i,
                    report,
                    max_singleton_deviation: max_single,
                    worst_ratio: worst,
                    violations,
                    sets_checked: checked,
                });
            }
            Ok((cases, pmf))
        })
        .collect::<Result<_>>()?;
    let (cases, exact_pmfs): (Vec<Vec<ChenSteinCase>>, Vec<Vec<f64>>) = per_instance.into_iter().unzip();
    let cases: Vec<ChenSteinCase> = cases.into_iter().flatten().collect();
    let violations = cases.iter().map(|c| c.violations).sum();
    Ok(ChenSteinSuiteResult {
        version: VERSION.into(),
        config: config.clone(),
        cases,
        exact_pmfs,
        violations,
    })
}

/// Exact binomial–Poisson distances on a grid of `(N, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinomialPoissonRow {
    pub n: u64,
    pub t: f64,
    pub exact_l1: f64,
    pub bound: f64,
}

pub fn binomial_poisson_grid(ns: &[u64], ts: &[f64]) -> Result<Vec<BinomialPoissonRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        for &t in ts {
            let (exact_l1, bound) = binomial_poisson_tv(n, t)?;
            rows.push(BinomialPoissonRow { n, t, exact_l1, bound });
        }
    }
    Ok(rows)
}

/// Tower experiment settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerConfig {
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_max_r")]
    pub max_r: u32,
    #[serde(default = "default_beams")]
    pub beams_per_height: u32,
    #[serde(default)]
    pub wobble_delta: f64,
    #[serde(default = "default_kac_steps")]
    pub kac_steps: u64,
    #[serde(default = "default_distortion_samples")]
    pub distortion_samples: u32,
    #[serde(default = "default_distortion_q")]
    pub distortion_q: u32,
    /// Intermittency exponents whose return tails are fitted.
    #[serde(default)]
    pub tail_alphas: Vec<f64>,
    #[serde(default = "default_tail_samples")]
    pub tail_samples: u64,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_lambdas() -> Vec<f64> {
    vec![5.0, 7.0, 9.0]
}

fn default_max_r() -> u32 {
    crate::tower::DEFAULT_MAX_R
}

fn default_beams() -> u32 {
    1
}

fn default_kac_steps() -> u64 {
    1_000_000
}

fn default_distortion_samples() -> u32 {
    1000
}

fn default_distortion_q() -> u32 {
    4
}

fn default_tail_samples() -> u64 {
    100_000
}

impl TowerConfig {
    pub fn new(seed: u64) -> Self {
        TowerConfig {
            lambdas: default_lambdas(),
            max_r: default_max_r(),
            beams_per_height: default_beams(),
            wobble_delta: 0.0,
            kac_steps: default_kac_steps(),
            distortion_samples: default_distortion_samples(),
            distortion_q: default_distortion_q(),
            tail_alphas: Vec::new(),
            tail_samples: default_tail_samples(),
            seed,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Measurements on one tower.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerRecord {
    pub tower: TowerSpec,
    pub theta: f64,
    pub omega_grid: Vec<u32>,
    pub omega_values: Vec<f64>,
    pub fitted_slope: f64,
    pub kac: KacReport,
    pub distortion_worst: f64,
    /// `δ / (1 − α)`.
    pub distortion_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRecord {
    pub alpha: f64,
    pub fit: TailFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerResult {
    pub version: String,
    pub config: TowerConfig,
    pub towers: Vec<TowerRecord>,
    pub tails: Vec<TailRecord>,
}

const STREAM_TOWER: u64 = 0x70;

pub fn run_tower(config: &TowerConfig) -> Result<TowerResult> {
    let towers = config
        .lambdas
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let tower = build_tower(lambda, config.max_r, config.beams_per_height)?
                .with_wobble(config.wobble_delta)?;
            let grid = default_omega_grid(config.max_r);
            let omega_values = grid.iter().map(|&s| omega(&tower, s)).collect();
            let seed = derive_seed(config.seed, &[STREAM_TOWER, i as u64]);
            Ok(TowerRecord {
                theta: (lambda - 1.0) / 2.0,
                fitted_slope: check_omega_decay(&tower, &grid)?,
                omega_grid: grid,
                omega_values,
                kac: kac_check(&tower, config.kac_steps, seed)?,
                distortion_worst: check_distortion(&tower, config.distortion_samples, config.distortion_q, seed),
                distortion_bound: config.wobble_delta / (1.0 - tower.alpha_contract),
                tower,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tails = config
        .tail_alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let system = SystemSpec::intermittent(alpha)?;
            let seed = derive_seed(config.seed, &[STREAM_TOWER, 0x7a, i as u64]);
            Ok(TailRecord {
                alpha,
                fit: intermittent_return_tail(&system, config.tail_samples, seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TowerResult {
        version: VERSION.into(),
        config: config.clone(),
        towers,
        tails,
    })
}

// ---------------------------------------------------------------------------
// Output files.

/// Column schema of `pmf.csv`.
pub const PMF_COLUMNS: [&str; 4] = ["rho", "k", "empirical", "poisson"];
/// Column schema of `summary.csv`.
pub const SUMMARY_COLUMNS: [&str; 17] = [
    "rho",
    "mu_ball",
    "mean_n",
    "j_horizon",
    "samples",
    "centers_attempted",
    "centers_excluded",
    "centers_unknown",
    "sup_distance",
    "tv_distance",
    "l1_distance",
    "sup_ci_lo",
    "sup_ci_hi",
    "tv_ci_lo",
    "tv_ci_hi",
    "kappa_hat",
    "r_squared",
];
/// Column schema of `centers.csv`.
pub const CENTER_COLUMNS: [&str; 7] = ["rho", "candidate", "x", "y", "n", "mean_visits", "sup_distance"];

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_rows<const C: usize>(path: &Path, header: [&str; C], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `value` as pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `pmf.csv`, `summary.csv`, `centers.csv` and `result.json` into `dir`.
pub fn emit_plot_data(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let t = result.config.t_param;
    let pmf_path = dir.join("pmf.csv");
    write_rows(
        &pmf_path,
        PMF_COLUMNS,
        result.records.iter().flat_map(|r| {
            let pois = poisson_pmf_table(t, r.pmf.k_max());
            r.pmf
                .masses
                .iter()
                .zip(pois)
                .enumerate()
                .map(|(k, (e, p))| vec![r.rho.to_string(), k.to_string(), e.to_string(), p.to_string()])
                .collect::<Vec<_>>()
        }),
    )?;
    let fit = result.decay_fit.as_ref();
    let summary_path = dir.join("summary.csv");
    write_rows(
        &summary_path,
        SUMMARY_COLUMNS,
        result.records.iter().map(|r| {
            vec![
                r.rho.to_string(),
                r.mu_ball.to_string(),
                r.mean_n.to_string(),
                r.j_horizon.to_string(),
                r.samples.to_string(),
                r.centers_attempted.to_string(),
                r.centers_excluded.to_string(),
                r.centers_unknown.to_string(),
                r.sup_distance.to_string(),
                r.distances.tv.to_string(),
                r.distances.l1.to_string(),
                r.ci.sup_lo.to_string(),
                r.ci.sup_hi.to_string(),
                r.ci.tv_lo.to_string(),
                r.ci.tv_hi.to_string(),
                fmt_opt(fit.map(|f| f.kappa_hat)),
                fmt_opt(fit.map(|f| f.r_squared)),
            ]
        }),
    )?;
    let centers_path = dir.join("centers.csv");
    write_rows(
        &centers_path,
        CENTER_COLUMNS,
        result.records.iter().flat_map(|r| {
            r.centers.iter().map(move |c| {
                let mean = c.visits.iter().sum::<u64>() as f64 / c.visits.len() as f64;
                vec![
                    r.rho.to_string(),
                    c.candidate.to_string(),
                    c.coords.0.to_string(),
                    c.coords.1.to_string(),
                    c.n.to_string(),
                    mean.to_string(),
                    c.sup_distance.to_string(),
                ]
            })
        }),
    )?;
    let json_path = dir.join("result.json");
    write_json(&json_path, result)?;
    Ok(vec![pmf_path, summary_path, centers_path, json_path])
}

/// A row of `pmf.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
pub struct PmfRow {
    pub rho: f64,
    pub k: u64,
    pub empirical: f64,
    pub poisson: f64,
}

/// A row of `summary.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
pub struct SummaryRow {
    pub rho: f64,
    pub mu_ball: f64,
    pub mean_n: f64,
    pub j_horizon: u32,
    pub samples: u64,
    pub centers_attempted: u64,
    pub centers_excluded: u64,
    pub centers_unknown: u64,
    pub sup_distance: f64,
    pub tv_distance: f64,
    pub l1_distance: f64,
    pub sup_ci_lo: f64,
    pub sup_ci_hi: f64,
    pub tv_ci_lo: f64,
    pub tv_ci_hi: f64,
    pub kappa_hat: Option<f64>,
    pub r_squared: Option<f64>,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

pub fn read_pmf_csv(path: &Path) -> Result<Vec<PmfRow>> {
    read_rows(path)
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    read_rows(path)
}

/// Writes `short_returns.csv`, `inflation.csv` and `short_returns.json`.
pub fn emit_short_returns(result: &ShortReturnResult, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let main = dir.join("short_returns.csv");
    write_rows(
        &main,
        ["rho", "j_horizon", "lower", "upper", "se", "samples", "intersects", "unknown"],
        result.records.iter().map(|r| {
            let e = &r.estimate;
            vec![
                r.rho.to_string(),
                r.j_horizon.to_string(),
                e.lower.to_string(),
                e.upper.to_string(),
                e.se.to_string(),
                e.samples.to_string(),
                e.intersects.to_string(),
                e.unknown.to_string(),
            ]
        }),
    )?;
    let infl = dir.join("inflation.csv");
    write_rows(
        &infl,
        ["rho", "n", "p", "ln_s_p", "rho_prime", "n_prime"],
        result.records.iter().flat_map(|r| {
            r.inflation.iter().map(move |row| {
                vec![
                    r.rho.to_string(),
                    row.n.to_string(),
                    row.p.to_string(),
                    row.ln_s_p.to_string(),
                    row.rho_prime.to_string(),
                    row.n_prime.to_string(),
                ]
            })
        }),
    )?;
    let json = dir.join("short_returns.json");
    write_json(&json, result)?;
    Ok(vec![main, infl, json])
}

/// Writes `chen_stein.csv`, `chen_stein_pmf.csv`, `binomial_poisson.csv` and
/// `chen_stein.json`.
pub fn emit_chen_stein(
    result: &ChenSteinSuiteResult,
    grid: &[BinomialPoissonRow],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let main = dir.join("chen_stein.csv");
    write_rows(
        &main,
        [
            "instance",
            "eps",
            "n",
            "t",
            "p",
            "r1",
            "r2",
            "bound_per_k",
            "max_singleton_deviation",
            "worst_ratio",
            "sets_checked",
            "violations",
        ],
        result.cases.iter().map(|c| {
            let r = &c.report;
            vec![
                c.instance.to_string(),
                r.eps.to_string(),
                r.n.to_string(),
                r.t_param.to_string(),
                r.p_gap.to_string(),
                r.r1.to_string(),
                r.r2.to_string(),
                r.bound_per_k.to_string(),
                c.max_singleton_deviation.to_string(),
                c.worst_ratio.to_string(),
                c.sets_checked.to_string(),
                c.violations.to_string(),
            ]
        }),
    )?;
    let pmf = dir.join("chen_stein_pmf.csv");
    write_rows(
        &pmf,
        ["instance", "k", "exact"],
        result.exact_pmfs.iter().enumerate().flat_map(|(i, p)| {
            p.iter()
                .enumerate()
                .map(move |(k, v)| vec![i.to_string(), k.to_string(), v.to_string()])
        }),
    )?;
    let bp = dir.join("binomial_poisson.csv");
    write_rows(
        &bp,
        ["n", "t", "exact_l1", "bound"],
        grid.iter()
            .map(|r| vec![r.n.to_string(), r.t.to_string(), r.exact_l1.to_string(), r.bound.to_string()]),
    )?;
    let json = dir.join("chen_stein.json");
    write_json(&json, &(result, grid))?;
    Ok(vec![main, pmf, bp, json])
}

/// Writes `towers.csv`, `omega.csv`, `tails.csv`, one `tower_<λ>.toml` per
/// tower, and `tower.json`.
pub fn emit_tower(result: &TowerResult, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut paths = Vec::new();
    let main = dir.join("towers.csv");
    write_rows(
        &main,
        [
            "lambda",
            "theta",
            "fitted_slope",
            "truncated_mass",
            "kac_empirical",
            "kac_expected",
            "kac_se",
            "distortion_worst",
            "distortion_bound",
        ],
        result.towers.iter().map(|t| {
            vec![
                t.tower.lambda_tail.to_string(),
                t.theta.to_string(),
                t.fitted_slope.to_string(),
                t.tower.truncated_mass.to_string(),
                t.kac.empirical.to_string(),
                t.kac.expected.to_string(),
                t.kac.std_error.to_string(),
                t.distortion_worst.to_string(),
                t.distortion_bound.to_string(),
            ]
        }),
    )?;
    paths.push(main);
    let om = dir.join("omega.csv");
    write_rows(
        &om,
        ["lambda", "s", "omega"],
        result.towers.iter().flat_map(|t| {
            t.omega_grid.iter().zip(&t.omega_values).map(move |(s, o)| {
                vec![t.tower.lambda_tail.to_string(), s.to_string(), o.to_string()]
            })
        }),
    )?;
    paths.push(om);
    let tails = dir.join("tails.csv");
    write_rows(
        &tails,
        ["alpha", "exponent", "r_squared", "k_min", "k_max", "samples"],
        result.tails.iter().map(|t| {
            vec![
                t.alpha.to_string(),
                t.fit.exponent.to_string(),
                t.fit.r_squared.to_string(),
                t.fit.k_min.to_string(),
                t.fit.k_max.to_string(),
                t.fit.samples.to_string(),
            ]
        }),
    )?;
    paths.push(tails);
    for t in &result.towers {
        let p = dir.join(format!("tower_{}.toml", t.tower.lambda_tail));
        fs::write(&p, t.tower.to_toml_string()?).map_err(|e| Error::io(&p, e))?;
        paths.push(p);
    }
    let json = dir.join("tower.json");
    write_json(&json, result)?;
    paths.push(json);
    Ok(paths)
}
