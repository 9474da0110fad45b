//! Young towers with polynomial return-time tails.
//!
//! The abstract tower is realised on the base `Λ = [0, 1)`, cut into
//! consecutive sub-intervals `Λ_i` whose lengths are proportional to their
//! masses. Every beam `Λ_i` climbs `R_i` levels and then returns onto the
//! whole base through a full branch. With `wobble_delta = 0` the return
//! branches are affine, so Jacobians, cylinders and separation times are
//! exactly computable; a positive `wobble_delta` bends every branch so that
//! the log-Jacobian of the inverse branch is `delta`-Lipschitz.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::stats::linear_fit;
use crate::systems::{lsv, SystemKind, SystemSpec};

/// Default truncation height of the return-time law.
pub const DEFAULT_MAX_R: u32 = 10_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TowerData {
    lambda_tail: f64,
    c1_tail: f64,
    max_r: u32,
    alpha_contract: f64,
    c0_dist: f64,
    #[serde(default)]
    wobble_delta: f64,
    #[serde(default)]
    truncated_mass: f64,
    base_masses: Vec<f64>,
    return_times: Vec<u32>,
}

/// A Young tower: beam masses `m(Λ_i)`, heights `R_i` and the constants of
/// the tail, contraction and distortion assumptions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TowerData", into = "TowerData")]
pub struct TowerSpec {
    pub lambda_tail: f64,
    pub c1_tail: f64,
    pub max_r: u32,
    pub base_masses: Vec<f64>,
    pub return_times: Vec<u32>,
    pub alpha_contract: f64,
    pub c0_dist: f64,
    pub wobble_delta: f64,
    /// Mass of `{R > max_r}` under the untruncated law, removed before normalising.
    pub truncated_mass: f64,
    starts: Vec<f64>,
    lengths: Vec<f64>,
}

impl From<TowerSpec> for TowerData {
    fn from(t: TowerSpec) -> Self {
        TowerData {
            lambda_tail: t.lambda_tail,
            c1_tail: t.c1_tail,
            max_r: t.max_r,
            alpha_contract: t.alpha_contract,
            c0_dist: t.c0_dist,
            wobble_delta: t.wobble_delta,
            truncated_mass: t.truncated_mass,
            base_masses: t.base_masses,
            return_times: t.return_times,
        }
    }
}

impl TryFrom<TowerData> for TowerSpec {
    type Error = Error;

    fn try_from(d: TowerData) -> Result<Self> {
        let mut t = TowerSpec {
            lambda_tail: d.lambda_tail,
            c1_tail: d.c1_tail,
            max_r: d.max_r,
            base_masses: d.base_masses,
            return_times: d.return_times,
            alpha_contract: d.alpha_contract,
            c0_dist: d.c0_dist,
            wobble_delta: d.wobble_delta,
            truncated_mass: d.truncated_mass,
            starts: Vec::new(),
            lengths: Vec::new(),
        };
        t.rebuild_partition();
        t.validate()?;
        Ok(t)
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `Σ_{k > m} k^{-s}` by Euler–Maclaurin (three terms).
fn zeta_tail(s: f64, m: f64) -> f64 {
    m.powf(1.0 - s) / (s - 1.0) - 0.5 * m.powf(-s) + s * m.powf(-s - 1.0) / 12.0
}

impl TowerSpec {
    /// Assembles a tower from explicit beams and derives the tail, contraction
    /// and distortion constants.
    pub fn from_beams(lambda_tail: f64, base_masses: Vec<f64>, return_times: Vec<u32>) -> Result<Self> {
        if base_masses.len() != return_times.len() || base_masses.is_empty() {
            return Err(Error::invalid("masses and return times must be non-empty and paired"));
        }
        let max_r = *return_times.iter().max().expect("non-empty");
        let mut t = TowerSpec {
            lambda_tail,
            c1_tail: 0.0,
            max_r,
            base_masses,
            return_times,
            alpha_contract: 0.0,
            c0_dist: 1.0,
            wobble_delta: 0.0,
            truncated_mass: 0.0,
            starts: Vec::new(),
            lengths: Vec::new(),
        };
        t.rebuild_partition();
        t.c1_tail = (1..=max_r)
            .map(|k| t.tail_mass(k) * (k as f64).powf(lambda_tail))
            .fold(0.0, f64::max);
        t.alpha_contract = t.max_inverse_slope();
        t.validate()?;
        Ok(t)
    }

    /// Bends every return branch by `delta` (see the module docs).
    pub fn with_wobble(mut self, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("wobble {delta} must be non-negative")));
        }
        self.wobble_delta = delta;
        self.alpha_contract = self.max_inverse_slope();
        self.validate()?;
        Ok(self)
    }

    fn rebuild_partition(&mut self) {
        let total: f64 = self.base_masses.iter().sum();
        self.lengths = self.base_masses.iter().map(|m| m / total).collect();
        let mut acc = 0.0;
        self.starts = self
            .lengths
            .iter()
            .map(|l| {
                let s = acc;
                acc += l;
                s
            })
            .collect();
    }

    fn max_inverse_slope(&self) -> f64 {
        let max_len = self.lengths.iter().copied().fold(0.0, f64::max);
        max_len * self.wobble_max_slope()
    }

    /// `max g'` of the bent inverse branch `g`.
    fn wobble_max_slope(&self) -> f64 {
        let d = self.wobble_delta;
        if d == 0.0 {
            1.0
        } else {
            (d / 2.0).exp() / wobble_norm(d)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_masses.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::invalid("beam masses must be positive"));
        }
        if self.return_times.contains(&0) {
            return Err(Error::invalid("return times must be at least 1"));
        }
        let g = self.return_times.iter().fold(0, |g, &r| gcd(g, r));
        if g != 1 {
            return Err(Error::invalid(format!(
                "gcd of the return times is {g}; the tower must be aperiodic"
            )));
        }
        if !(self.alpha_contract > 0.0 && self.alpha_contract < 1.0) {
            return Err(Error::invalid(format!(
                "contraction {} outside (0, 1)",
                self.alpha_contract
            )));
        }
        for k in 1..=self.max_r {
            let bound = self.c1_tail * (k as f64).powf(-self.lambda_tail);
            if self.tail_mass(k) > bound * (1.0 + 1e-9) {
                return Err(Error::invalid(format!("tail bound violated at k = {k}")));
            }
        }
        Ok(())
    }

    pub fn num_beams(&self) -> usize {
        self.base_masses.len()
    }

    pub fn base_mass(&self) -> f64 {
        self.base_masses.iter().sum()
    }

    /// `Σ R_i m(Λ_i)`.
    pub fn tower_mass(&self) -> f64 {
        self.return_times
            .iter()
            .zip(&self.base_masses)
            .map(|(&r, m)| r as f64 * m)
            .sum()
    }

    /// `m(R > k)`.
    pub fn tail_mass(&self, k: u32) -> f64 {
        self.return_times
            .iter()
            .zip(&self.base_masses)
            .filter(|(&r, _)| r > k)
            .map(|(_, m)| m)
            .sum()
    }

    /// `m(R = k)`.
    pub fn height_mass(&self, k: u32) -> f64 {
        self.return_times
            .iter()
            .zip(&self.base_masses)
            .filter(|(&r, _)| r == k)
            .map(|(_, m)| m)
            .sum()
    }

    /// Start and length of `Λ_i` inside the model base `[0, 1)`.
    pub fn beam_interval(&self, i: usize) -> (f64, f64) {
        (self.starts[i], self.lengths[i])
    }

    /// Beam containing the base coordinate `w`.
    pub fn beam_of(&self, w: f64) -> usize {
        let i = self.starts.partition_point(|&s| s <= w);
        i.saturating_sub(1).min(self.num_beams() - 1)
    }

    /// Serialises the tower as TOML.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}

fn wobble_norm(d: f64) -> f64 {
    ((d / 2.0).exp() - (-d / 2.0).exp()) / d
}

/// Inverse return branch shape `g : [0,1] → [0,1]` with `ln g'` `d`-Lipschitz.
fn wobble_g(d: f64, w: f64) -> f64 {
    if d == 0.0 {
        w
    } else {
        ((d * (w - 0.5)).exp() - (-d / 2.0).exp()) / ((d / 2.0).exp() - (-d / 2.0).exp())
    }
}

/// `h = g⁻¹`.
fn wobble_h(d: f64, u: f64) -> f64 {
    if d == 0.0 {
        u
    } else {
        let (lo, hi) = ((-d / 2.0).exp(), (d / 2.0).exp());
        (0.5 + (lo + u * (hi - lo)).ln() / d).clamp(0.0, 1.0)
    }
}

/// Builds the tower with `m(R = k) ∝ k^{-(λ+1)}` for `k = 1..=max_r`, split
/// into `n_beams_per_height` equal beams per height.
pub fn build_tower(lambda_tail: f64, max_r: u32, n_beams_per_height: u32) -> Result<TowerSpec> {
    if !(lambda_tail > 4.0) {
        return Err(Error::invalid(format!("tail exponent {lambda_tail} must exceed 4")));
    }
    if max_r < 3 {
        return Err(Error::invalid(format!("max_r = {max_r} must be at least 3")));
    }
    if n_beams_per_height == 0 {
        return Err(Error::invalid("need at least one beam per height"));
    }
    let s = lambda_tail + 1.0;
    let weights: Vec<f64> = (1..=max_r).map(|k| (k as f64).powf(-s)).collect();
    let z: f64 = weights.iter().rev().sum();
    let mut masses = Vec::with_capacity((max_r * n_beams_per_height) as usize);
    let mut heights = Vec::with_capacity(masses.capacity());
    for (k, w) in (1..=max_r).zip(&weights) {
        for _ in 0..n_beams_per_height {
            masses.push(w / z / n_beams_per_height as f64);
            heights.push(k);
        }
    }
    let mut t = TowerSpec::from_beams(lambda_tail, masses, heights)?;
    let removed = zeta_tail(s, max_r as f64);
    t.truncated_mass = removed / (z + removed);
    Ok(t)
}

/// `Ω(s) = sqrt(Σ_{R_i > s} R_i m(Λ_i))`.
pub fn omega(tower: &TowerSpec, s: u32) -> f64 {
    tower
        .return_times
        .iter()
        .zip(&tower.base_masses)
        .filter(|(&r, _)| r > s)
        .map(|(&r, m)| r as f64 * m)
        .sum::<f64>()
        .sqrt()
}

/// Log-spaced integer grid on `[4, max_r / 10]`.
pub fn default_omega_grid(max_r: u32) -> Vec<u32> {
    let (lo, hi) = (4.0f64, (max_r as f64 / 10.0).max(4.0));
    let mut grid: Vec<u32> = (0..20)
        .map(|i| (lo * (hi / lo).powf(i as f64 / 19.0)).round() as u32)
        .collect();
    grid.dedup();
    grid
}

/// Least-squares slope of `ln Ω(s)` against `ln s`; for a `k^{-(λ+1)}` height law it is
/// about `-(λ - 1) / 2`.
pub fn check_omega_decay(tower: &TowerSpec, s_range: &[u32]) -> Result<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = s_range
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| (s, omega(tower, s)))
        .filter(|&(_, o)| o > 0.0)
        .map(|(s, o)| ((s as f64).ln(), o.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "Ω is positive at only {} of the requested heights",
            xs.len()
        )));
    }
    Ok(linear_fit(&xs, &ys)?.slope)
}

/// A point of the tower: beam, level, and coordinate inside the beam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerPoint {
    pub base_index: usize,
    pub level: u32,
    pub fiber_coord: f64,
}

impl TowerPoint {
    pub fn base(base_index: usize, fiber_coord: f64) -> Self {
        TowerPoint {
            base_index,
            level: 0,
            fiber_coord,
        }
    }
}

/// Places a model-base coordinate into its beam.
pub fn base_point(tower: &TowerSpec, w: f64) -> TowerPoint {
    let i = tower.beam_of(w);
    let (start, len) = tower.beam_interval(i);
    TowerPoint::base(i, ((w - start) / len).clamp(0.0, 1.0 - f64::EPSILON))
}

/// Model-base coordinate of a base point.
pub fn base_coordinate(tower: &TowerSpec, x: &TowerPoint) -> f64 {
    let (start, len) = tower.beam_interval(x.base_index);
    start + len * x.fiber_coord
}

/// The return map on the base: `Λ_i ∋ x ↦ h(u)`, `u` the coordinate in `Λ_i`.
fn return_coordinate(tower: &TowerSpec, x: &TowerPoint) -> f64 {
    wobble_h(tower.wobble_delta, x.fiber_coord).min(1.0 - f64::EPSILON / 2.0)
}

/// One step of the tower map: climb, or return to the base from the top.
pub fn tower_step(tower: &TowerSpec, x: &TowerPoint) -> TowerPoint {
    if x.level + 1 < tower.return_times[x.base_index] {
        TowerPoint {
            level: x.level + 1,
            ..*x
        }
    } else {
        base_point(tower, return_coordinate(tower, x))
    }
}

/// Induced (first-return) map on the base.
pub fn return_map(tower: &TowerSpec, x: &TowerPoint) -> TowerPoint {
    base_point(tower, return_coordinate(tower, x))
}

/// Separation time, or `AtLeast(horizon)` if the itineraries agree that long.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Separation {
    At(u32),
    AtLeast(u32),
}

/// `s(x, y) = min{k ≥ 0 : T̂ᵏx, T̂ᵏy in distinct Λ_i}` for base points.
pub fn separation_time(tower: &TowerSpec, x: &TowerPoint, y: &TowerPoint, horizon: u32) -> Result<Separation> {
    if x.level != 0 || y.level != 0 {
        return Err(Error::invalid("separation time is defined for base points"));
    }
    let (mut a, mut b) = (*x, *y);
    for k in 0..horizon {
        if a.base_index != b.base_index {
            return Ok(Separation::At(k));
        }
        a = return_map(tower, &a);
        b = return_map(tower, &b);
    }
    Ok(Separation::AtLeast(horizon))
}

/// An itinerary `(i_0, ..., i_l)` of the return map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CylinderIndex {
    pub indices: Vec<usize>,
}

impl CylinderIndex {
    pub fn new(indices: Vec<usize>) -> Self {
        CylinderIndex { indices }
    }

    /// `l`, one less than the number of symbols.
    pub fn length(&self) -> usize {
        self.indices.len().saturating_sub(1)
    }
}

fn check_cylinder(tower: &TowerSpec, cyl: &CylinderIndex) -> Result<()> {
    if cyl.indices.is_empty() || cyl.indices.iter().any(|&i| i >= tower.num_beams()) {
        return Err(Error::invalid(format!("empty cylinder {:?}", cyl.indices)));
    }
    Ok(())
}

/// `ψ_{i_0} ∘ … ∘ ψ_{i_l}([0, 1))` with the inverse branches `ψ_i(w) = start_i + len_i g(w)`.
pub fn cylinder_interval(tower: &TowerSpec, cyl: &CylinderIndex) -> Result<(f64, f64)> {
    check_cylinder(tower, cyl)?;
    let d = tower.wobble_delta;
    let (mut lo, mut hi) = (0.0, 1.0);
    for &i in cyl.indices.iter().rev() {
        let (start, len) = tower.beam_interval(i);
        lo = start + len * wobble_g(d, lo);
        hi = start + len * wobble_g(d, hi);
    }
    Ok((lo, hi))
}

/// Diameter of the cylinder `ζ_{i_0 … i_l}` in the model base.
pub fn cylinder_diameter(tower: &TowerSpec, cyl: &CylinderIndex) -> Result<f64> {
    check_cylinder(tower, cyl)?;
    if tower.wobble_delta == 0.0 {
        Ok(cyl.indices.iter().map(|&i| tower.beam_interval(i).1).product())
    } else {
        let (lo, hi) = cylinder_interval(tower, cyl)?;
        Ok(hi - lo)
    }
}

/// `ln JT̂` at a base point.
fn log_jacobian(tower: &TowerSpec, x: &TowerPoint) -> f64 {
    let len = tower.beam_interval(x.base_index).1;
    let d = tower.wobble_delta;
    if d == 0.0 {
        -len.ln()
    } else {
        let w = wobble_h(d, x.fiber_coord);
        -len.ln() + wobble_norm(d).ln() - d * (w - 0.5)
    }
}

/// Worst `|ln JT̂^q x − ln JT̂^q y|` over sampled pairs with `s(x, y) ≥ q`.
pub fn check_distortion(tower: &TowerSpec, samples: u32, q: u32, seed: u64) -> f64 {
    if q == 0 {
        return 0.0;
    }
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, &[0xd157, i as u64]);
            for _ in 0..64 {
                let x = base_point(tower, rng.random::<f64>());
                let mut itinerary = Vec::with_capacity(q as usize);
                let mut p = x;
                let mut log_jx = 0.0;
                for _ in 0..q {
                    itinerary.push(p.base_index);
                    log_jx += log_jacobian(tower, &p);
                    p = return_map(tower, &p);
                }
                let (lo, hi) = cylinder_interval(tower, &CylinderIndex::new(itinerary.clone()))
                    .expect("itinerary of a real orbit");
                let y = base_point(tower, lo + (hi - lo) * rng.random::<f64>());
                let mut p = y;
                let mut log_jy = 0.0;
                let mut matched = true;
                for &sym in &itinerary {
                    if p.base_index != sym {
                        matched = false;
                        break;
                    }
                    log_jy += log_jacobian(tower, &p);
                    p = return_map(tower, &p);
                }
                if matched {
                    return (log_jx - log_jy).abs();
                }
            }
            0.0
        })
        .reduce(|| 0.0, f64::max)
}

/// Long-run fraction of time at level 0 against `m(Λ) / Σ R_i m(Λ_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KacReport {
    pub empirical: f64,
    pub expected: f64,
    pub std_error: f64,
    pub steps: u64,
}

/// Runs one orbit of `steps` tower steps from a uniform base start; the
/// standard error comes from 50 contiguous batches.
pub fn kac_check(tower: &TowerSpec, steps: u64, seed: u64) -> Result<KacReport> {
    const BATCHES: u64 = 50;
    if steps < BATCHES {
        return Err(Error::invalid(format!("need at least {BATCHES} steps")));
    }
    let mut rng = stream_rng(seed, &[0x4ac]);
    let mut x = base_point(tower, rng.random::<f64>());
    let mut fractions = Vec::with_capacity(BATCHES as usize);
    let mut total = 0u64;
    for b in 0..BATCHES {
        let size = steps * (b + 1) / BATCHES - steps * b / BATCHES;
        let mut at_base = 0u64;
        for _ in 0..size {
            at_base += (x.level == 0) as u64;
            x = tower_step(tower, &x);
        }
        total += at_base;
        fractions.push(at_base as f64 / size as f64);
    }
    let k = BATCHES as f64;
    let mean = fractions.iter().sum::<f64>() / k;
    let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(KacReport {
        empirical: total as f64 / steps as f64,
        expected: tower.base_mass() / tower.tower_mass(),
        std_error: (var / k).sqrt(),
        steps,
    })
}

/// Power-law fit of the first-return-time survival function of the LSV map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub exponent: f64,
    pub r_squared: f64,
    pub k_min: u64,
    pub k_max: u64,
    /// `(k, m(R > k))` pairs used in the fit.
    pub points: Vec<(u64, f64)>,
    pub samples: u64,
}

/// Minimum number of samples with `R > k` for `k` to enter the fit.
const TAIL_MIN_COUNT: usize = 100;

/// Return time to `Λ = (1/2, 1]` of a base point whose first image is `y`.
fn lsv_return_time(alpha: f64, y: f64, cap: u64) -> u64 {
    let mut r = 1;
    let mut x = y;
    while x <= 0.5 && r < cap {
        x = lsv(alpha, x);
        r += 1;
    }
    r
}

/// Simulates first returns of the LSV map to `(1/2, 1]` and fits the tail
/// exponent of `m(R > k)`.
///
/// A base point `x` is parametrised by its first image `y = 2x − 1`, which is
/// uniform on `(0, 1)` when `x` is uniform on the base. Starts are drawn from a
/// half-uniform, half-log-uniform mixture on `[y_min, 1)` and reweighted by
/// the likelihood ratio, so the survival function is unbiased while the
/// sample reaches return times near `10⁴` where the power law has set in.
pub fn intermittent_return_tail(system: &SystemSpec, samples: u64, seed: u64) -> Result<TailFit> {
    let alpha = match system.kind {
        SystemKind::Intermittent { alpha } if alpha > 0.0 && alpha < 1.0 => alpha,
        _ => return Err(Error::invalid("return tails need the intermittent map with alpha in (0, 1)")),
    };
    const TARGET_RETURN: f64 = 1e4;
    let y_min = (0.5 * (1.0 + alpha * TARGET_RETURN).powf(-1.0 / alpha)).max(1e-300);
    let log_span = -y_min.ln();
    let cap = 100 * TARGET_RETURN as u64;
    let draws: Vec<(u64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, &[0x7a11, i]);
            let y = if rng.random::<bool>() {
                rng.random::<f64>()
            } else {
                y_min * (log_span * rng.random::<f64>()).exp()
            };
            let density = 0.5 + if y >= y_min { 0.5 / (y * log_span) } else { 0.0 };
            (lsv_return_time(alpha, y, cap), 1.0 / density)
        })
        .collect();
    let total_weight: f64 = draws.iter().map(|d| d.1).sum();
    let mut by_time = draws;
    by_time.sort_by_key(|d| d.0);
    // Largest k with at least TAIL_MIN_COUNT samples strictly above it.
    let n = by_time.len();
    if n <= TAIL_MIN_COUNT {
        return Err(Error::InsufficientData(format!("only {n} return samples")));
    }
    let k_hi = by_time[n - TAIL_MIN_COUNT - 1].0;
    let k_lo = (k_hi / 100).max(10);
    if k_hi < 10 * k_lo {
        return Err(Error::InsufficientData(format!(
            "return-time tail usable only up to k = {k_hi}"
        )));
    }
    // Suffix sums of weights to evaluate m(R > k).
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + by_time[i].1;
    }
    let survival = |k: u64| {
        let idx = by_time.partition_point(|d| d.0 <= k);
        suffix[idx] / total_weight
    };
    let mut ks: Vec<u64> = (0..25)
        .map(|i| (k_lo as f64 * (k_hi as f64 / k_lo as f64).powf(i as f64 / 24.0)).round() as u64)
        .collect();
    ks.dedup();
    let points: Vec<(u64, f64)> = ks.iter().map(|&k| (k, survival(k))).collect();
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(TailFit {
        exponent: -fit.slope,
        r_squared: fit.r_squared,
        k_min: k_lo,
        k_max: k_hi,
        points,
        samples,
    })
}
