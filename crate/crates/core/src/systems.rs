//! Concrete dynamical systems: the doubling map, Arnold's cat map, the
//! Liverani–Saussol–Vaienti intermittent map and the Gauss map.
//!
//! Orbits of the doubling map and the cat map are computed exactly: the
//! doubling map acts on a finite binary expansion by shifting, and the cat map
//! acts on rational points `(x, y) / den` by integer matrix multiplication
//! modulo `den`. The intermittent and Gauss maps run in double precision; their
//! long orbits are pseudo-orbits and are only meaningful statistically
//! (shadowing), not pointwise.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Extra bits carried beyond the requested horizon of an [`BitPoint`].
pub const GUARD_BITS: u64 = 64;

/// Default horizon (number of exact doubling iterates) of sampled bit points.
pub const DEFAULT_HORIZON: u64 = 1024;

/// Denominator used for sampled cat-map points.
pub const CAT_DENOMINATOR: u64 = 1 << 52;

const TWO_POW_M53: f64 = 1.0 / 9_007_199_254_740_992.0;
const TWO_POW_M64: f64 = 1.0 / 18_446_744_073_709_551_616.0;

/// Golden ratio squared: the operator norm of the cat matrix and of its inverse.
const PHI_SQ: f64 = 2.618_033_988_749_895;

/// A finite binary expansion `0.b_0 b_1 b_2 ...` read from `offset`.
///
/// Applying the doubling map advances `offset`; the bits are shared, so
/// cloning and shifting are O(1).
#[derive(Clone, Debug)]
pub struct BitPoint {
    words: Arc<[u64]>,
    offset: u64,
    len: u64,
}

impl PartialEq for BitPoint {
    fn eq(&self, other: &Self) -> bool {
        let n = self.remaining();
        n == other.remaining() && (0..n).all(|i| self.bit(i) == other.bit(i))
    }
}

impl BitPoint {
    /// Builds a point from explicit bits (most significant first).
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64) + 1];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (63 - i % 64);
            }
        }
        BitPoint {
            words: words.into(),
            offset: 0,
            len: bits.len() as u64,
        }
    }

    /// Binary expansion of `num / den` with `horizon + GUARD_BITS` bits.
    pub fn from_ratio(num: u64, den: u64, horizon: u64) -> Result<Self> {
        if den == 0 || num >= den {
            return Err(Error::invalid(format!(
                "ratio {num}/{den} is not in [0, 1)"
            )));
        }
        let len = horizon + GUARD_BITS;
        let mut words = vec![0u64; (len as usize).div_ceil(64) + 1];
        let (mut r, d) = (num as u128, den as u128);
        for i in 0..len as usize {
            r *= 2;
            if r >= d {
                r -= d;
                words[i / 64] |= 1 << (63 - i % 64);
            }
        }
        Ok(BitPoint {
            words: words.into(),
            offset: 0,
            len,
        })
    }

    /// Uniformly random expansion supporting `horizon` exact iterates.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, horizon: u64) -> Self {
        let len = horizon + GUARD_BITS;
        let n = (len as usize).div_ceil(64);
        let mut words: Vec<u64> = (0..n).map(|_| rng.random()).collect();
        if len % 64 != 0 {
            words[n - 1] &= !0u64 << (64 - len % 64);
        }
        words.push(0);
        BitPoint {
            words: words.into(),
            offset: 0,
            len,
        }
    }

    /// Bits left after the current offset.
    pub fn remaining(&self) -> u64 {
        self.len - self.offset
    }

    /// Number of further exact doubling iterates (keeps `GUARD_BITS` in reserve).
    pub fn budget(&self) -> u64 {
        self.remaining().saturating_sub(GUARD_BITS)
    }

    fn bit(&self, i: u64) -> bool {
        let j = self.offset + i;
        self.words[(j / 64) as usize] >> (63 - j % 64) & 1 == 1
    }

    /// The 64 bits following `offset + shift` as a fixed-point fraction.
    #[inline]
    pub fn window_at(&self, shift: u64) -> u64 {
        let j = self.offset + shift;
        let (w, s) = ((j / 64) as usize, j % 64);
        let hi = self.words[w];
        if s == 0 {
            hi
        } else {
            let lo = self.words.get(w + 1).copied().unwrap_or(0);
            (hi << s) | (lo >> (64 - s))
        }
    }

    /// Current position as a 64-bit fixed-point fraction of the unit interval.
    pub fn fixed(&self) -> u64 {
        self.window_at(0)
    }

    /// Nearest double below the represented value (53 significant bits).
    pub fn to_f64(&self) -> f64 {
        (self.fixed() >> 11) as f64 * TWO_POW_M53
    }

    /// Applies the doubling map `n` times.
    pub fn shifted(&self, n: u64) -> Result<Self> {
        if n > self.budget() {
            return Err(Error::HorizonExceeded {
                n,
                budget: self.budget(),
            });
        }
        Ok(BitPoint {
            words: Arc::clone(&self.words),
            offset: self.offset + n,
            len: self.len,
        })
    }
}

/// A rational torus point `(x / den, y / den)` with `x, y < den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RationalPoint {
    pub x: u64,
    pub y: u64,
    pub den: u64,
}

impl RationalPoint {
    pub fn new(x: u64, y: u64, den: u64) -> Result<Self> {
        if den == 0 || den > 1 << 63 {
            return Err(Error::ModulusOverflow { den });
        }
        Ok(RationalPoint {
            x: x % den,
            y: y % den,
            den,
        })
    }

    pub fn to_f64(self) -> (f64, f64) {
        (
            self.x as f64 / self.den as f64,
            self.y as f64 / self.den as f64,
        )
    }
}

/// A phase-space point in one of the supported representations.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    ExactBits(BitPoint),
    ExactRational2D(RationalPoint),
    Float1D(f64),
    Float2D(f64, f64),
}

impl Point {
    fn name(&self) -> &'static str {
        match self {
            Point::ExactBits(_) => "ExactBits",
            Point::ExactRational2D(_) => "ExactRational2D",
            Point::Float1D(_) => "Float1D",
            Point::Float2D(..) => "Float2D",
        }
    }

    /// Coordinates as doubles (the second entry is 0 for 1D points).
    pub fn coords(&self) -> (f64, f64) {
        match self {
            Point::ExactBits(b) => (b.to_f64(), 0.0),
            Point::ExactRational2D(r) => r.to_f64(),
            Point::Float1D(x) => (*x, 0.0),
            Point::Float2D(x, y) => (*x, *y),
        }
    }

    pub fn is_2d(&self) -> bool {
        matches!(self, Point::ExactRational2D(_) | Point::Float2D(..))
    }

    /// Checks the coordinate-range invariants.
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| (0.0..1.0).contains(&v);
        let valid = match self {
            Point::ExactBits(b) => b.offset <= b.len,
            Point::ExactRational2D(r) => r.den > 0 && r.x < r.den && r.y < r.den,
            Point::Float1D(x) => ok(*x),
            Point::Float2D(x, y) => ok(*x) && ok(*y),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::invalid(format!("point {self:?} outside the phase space")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SystemKind {
    Doubling,
    CatMap,
    /// LSV map `x (1 + (2x)^alpha)` on `[0, 1/2]`, `2x - 1` on `(1/2, 1)`.
    Intermittent { alpha: f64 },
    Gauss,
}

impl SystemKind {
    pub fn name(&self) -> &'static str {
        match self {
            SystemKind::Doubling => "doubling",
            SystemKind::CatMap => "cat_map",
            SystemKind::Intermittent { .. } => "intermittent",
            SystemKind::Gauss => "gauss",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            SystemKind::CatMap => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `|x - y|` without wraparound.
    Interval,
    /// Sup norm on the torus (the circle distance in 1D).
    TorusMax,
    /// Euclidean distance on the torus (the circle distance in 1D).
    TorusEuclid,
}

/// Orbit settings for Birkhoff-average estimates of the invariant measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffConfig {
    pub orbit_len: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Number of contiguous batches used for the batch-means standard error.
    pub batches: u32,
}

impl Default for BirkhoffConfig {
    fn default() -> Self {
        BirkhoffConfig {
            orbit_len: 1_000_000,
            burn_in: 10_000,
            seed: 0,
            batches: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeasureKind {
    Lebesgue1D,
    Lebesgue2D,
    /// The Gauss measure `dx / ((1 + x) ln 2)`.
    GaussDensity,
    EmpiricalBirkhoff(BirkhoffConfig),
}

/// A concrete map with its metric, Lipschitz data and invariant measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub kind: SystemKind,
    /// `A = ‖DT‖ + ‖DT⁻¹‖`, or a documented finite surrogate.
    pub lipschitz_a: f64,
    pub measure: MeasureKind,
    pub metric: Metric,
    /// Burn-in iterates used when sampling from a non-Lebesgue measure.
    pub burn_in: u64,
}

impl SystemSpec {
    /// Doubling map on the circle: `A = 2 + 1/2`.
    pub fn doubling() -> Self {
        SystemSpec {
            kind: SystemKind::Doubling,
            lipschitz_a: 2.5,
            measure: MeasureKind::Lebesgue1D,
            metric: Metric::TorusMax,
            burn_in: 0,
        }
    }

    /// Cat map `(2 1; 1 1)`: both the matrix and its inverse have norm φ².
    pub fn cat_map() -> Self {
        SystemSpec {
            kind: SystemKind::CatMap,
            lipschitz_a: 2.0 * PHI_SQ,
            measure: MeasureKind::Lebesgue2D,
            metric: Metric::TorusMax,
            burn_in: 0,
        }
    }

    /// LSV map. `T' ∈ [1, 2 + alpha]`, so the surrogate `A = 3 + alpha` bounds
    /// `sup |T'| + sup |T'|⁻¹` on the whole circle.
    pub fn intermittent(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!(
                "intermittency exponent {alpha} outside (0, 1)"
            )));
        }
        Ok(SystemSpec {
            kind: SystemKind::Intermittent { alpha },
            lipschitz_a: 3.0 + alpha,
            measure: MeasureKind::EmpiricalBirkhoff(BirkhoffConfig::default()),
            metric: Metric::TorusMax,
            burn_in: 10_000,
        })
    }

    /// Gauss map with the surrogate `A = x_min⁻² + 1`, valid on `[x_min, 1)`.
    pub fn gauss_with_cutoff(x_min: f64) -> Result<Self> {
        if !(x_min > 0.0 && x_min < 1.0) {
            return Err(Error::invalid(format!("Gauss cutoff {x_min} outside (0, 1)")));
        }
        Ok(SystemSpec {
            kind: SystemKind::Gauss,
            lipschitz_a: 1.0 / (x_min * x_min) + 1.0,
            measure: MeasureKind::GaussDensity,
            metric: Metric::Interval,
            burn_in: 0,
        })
    }

    pub fn gauss() -> Self {
        Self::gauss_with_cutoff(0.125).expect("valid cutoff")
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_measure(mut self, measure: MeasureKind) -> Self {
        self.measure = measure;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lipschitz_a >= 2.0) {
            return Err(Error::invalid(format!(
                "lipschitz_a = {} must be at least 2",
                self.lipschitz_a
            )));
        }
        if let SystemKind::Intermittent { alpha } = self.kind {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::invalid(format!(
                    "intermittency exponent {alpha} outside (0, 1)"
                )));
            }
        }
        Ok(())
    }

    /// The short-return horizon constant `1 / (4 ln A)`.
    pub fn default_a_frak(&self) -> f64 {
        1.0 / (4.0 * self.lipschitz_a.ln())
    }
}

/// A metric ball `B_ρ(center)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BallSpec {
    pub center: Point,
    pub radius: f64,
    pub metric: Metric,
}

impl BallSpec {
    pub fn new(center: Point, radius: f64, metric: Metric) -> Result<Self> {
        center.validate()?;
        if !(radius > 0.0 && radius < 0.25) {
            return Err(Error::invalid(format!("radius {radius} outside (0, 1/4)")));
        }
        Ok(BallSpec {
            center,
            radius,
            metric,
        })
    }

    /// Same as [`BallSpec::new`] but allows any positive radius (the ball may
    /// cover the whole space).
    pub fn unchecked(center: Point, radius: f64, metric: Metric) -> Self {
        BallSpec {
            center,
            radius,
            metric,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        distance_in(self.metric, &self.center, p) < self.radius
    }
}

fn mismatch(system: &SystemSpec, p: &Point) -> Error {
    Error::RepresentationMismatch {
        system: system.kind.name(),
        point: p.name(),
    }
}

#[inline]
fn wrap01(v: f64) -> f64 {
    let f = v - v.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

#[inline]
pub(crate) fn lsv(alpha: f64, x: f64) -> f64 {
    if x <= 0.5 {
        let y = x * (1.0 + (2.0 * x).powf(alpha));
        if y >= 1.0 {
            0.0
        } else {
            y
        }
    } else {
        2.0 * x - 1.0
    }
}

#[inline]
pub(crate) fn gauss_map(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        wrap01(1.0 / x)
    }
}

#[inline]
fn cat_step(p: RationalPoint) -> RationalPoint {
    let d = p.den as u128;
    let (x, y) = (p.x as u128, p.y as u128);
    RationalPoint {
        x: ((2 * x + y) % d) as u64,
        y: ((x + y) % d) as u64,
        den: p.den,
    }
}

type Mat2 = [[u128; 2]; 2];

fn mat_mul_mod(a: &Mat2, b: &Mat2, m: u128) -> Mat2 {
    let mut c = [[0u128; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = ((a[i][0] * b[0][j]) % m + (a[i][1] * b[1][j]) % m) % m;
        }
    }
    c
}

/// `(2 1; 1 1)^n mod m` by repeated squaring.
pub fn cat_matrix_pow_mod(n: u64, m: u64) -> Result<[[u64; 2]; 2]> {
    if m == 0 || m > 1 << 63 {
        return Err(Error::ModulusOverflow { den: m });
    }
    let m = m as u128;
    let mut result: Mat2 = [[1 % m, 0], [0, 1 % m]];
    let mut base: Mat2 = [[2 % m, 1 % m], [1 % m, 1 % m]];
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = mat_mul_mod(&result, &base, m);
        }
        base = mat_mul_mod(&base, &base, m);
        e >>= 1;
    }
    Ok([
        [result[0][0] as u64, result[0][1] as u64],
        [result[1][0] as u64, result[1][1] as u64],
    ])
}

/// `T^n` (or `T^{-n}` for negative `n`) of a rational cat-map point.
pub fn cat_power_mod(p: &RationalPoint, n: i64) -> Result<RationalPoint> {
    let m = if n >= 0 {
        cat_matrix_pow_mod(n as u64, p.den)?
    } else {
        // (2 1; 1 1)⁻¹ = (1 -1; -1 2)
        let d = p.den as u128;
        let inv: Mat2 = [[1 % d, d - 1], [d - 1, 2 % d]];
        let mut result: Mat2 = [[1 % d, 0], [0, 1 % d]];
        let mut base = inv;
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                result = mat_mul_mod(&result, &base, d);
            }
            base = mat_mul_mod(&base, &base, d);
            e >>= 1;
        }
        [
            [result[0][0] as u64, result[0][1] as u64],
            [result[1][0] as u64, result[1][1] as u64],
        ]
    };
    let d = p.den as u128;
    let (px, py) = (p.x as u128, p.y as u128);
    let (m00, m01, m10, m11) = (m[0][0] as u128, m[0][1] as u128, m[1][0] as u128, m[1][1] as u128);
    Ok(RationalPoint {
        x: (((m00 * px) % d + (m01 * py) % d) % d) as u64,
        y: (((m10 * px) % d + (m11 * py) % d) % d) as u64,
        den: p.den,
    })
}

/// One application of the map.
pub fn apply(system: &SystemSpec, x: &Point) -> Result<Point> {
    Ok(match (&system.kind, x) {
        (SystemKind::Doubling, Point::ExactBits(b)) => Point::ExactBits(b.shifted(1)?),
        (SystemKind::Doubling, Point::Float1D(v)) => Point::Float1D(wrap01(2.0 * v)),
        (SystemKind::CatMap, Point::ExactRational2D(r)) => Point::ExactRational2D(cat_step(*r)),
        (SystemKind::CatMap, Point::Float2D(a, b)) => {
            Point::Float2D(wrap01(2.0 * a + b), wrap01(a + b))
        }
        (SystemKind::Intermittent { alpha }, Point::Float1D(v)) => Point::Float1D(lsv(*alpha, *v)),
        (SystemKind::Gauss, Point::Float1D(v)) => Point::Float1D(gauss_map(*v)),
        _ => return Err(mismatch(system, x)),
    })
}

/// `n`-fold composition of the map.
pub fn apply_n(system: &SystemSpec, x: &Point, n: u64) -> Result<Point> {
    match (&system.kind, x) {
        (SystemKind::Doubling, Point::ExactBits(b)) => Ok(Point::ExactBits(b.shifted(n)?)),
        (SystemKind::CatMap, Point::ExactRational2D(r)) => {
            Ok(Point::ExactRational2D(cat_power_mod(r, n as i64)?))
        }
        (SystemKind::Doubling, Point::Float1D(_))
        | (SystemKind::CatMap, Point::Float2D(..))
        | (SystemKind::Intermittent { .. }, Point::Float1D(_))
        | (SystemKind::Gauss, Point::Float1D(_)) => {
            let mut p = x.clone();
            for _ in 0..n {
                p = apply(system, &p)?;
            }
            Ok(p)
        }
        _ => Err(mismatch(system, x)),
    }
}

#[inline]
fn circle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Circle distance of two 64-bit fixed-point fractions, as a fixed-point value.
#[inline]
pub fn fixed_circle_distance(a: u64, b: u64) -> u64 {
    let d = a.wrapping_sub(b);
    d.min(d.wrapping_neg())
}

/// Distance under an explicit metric. Mixed exact/float arguments are compared
/// through their double coordinates.
pub fn distance_in(metric: Metric, x: &Point, y: &Point) -> f64 {
    if let (Point::ExactBits(a), Point::ExactBits(b)) = (x, y) {
        return match metric {
            Metric::Interval => {
                let (fa, fb) = (a.fixed(), b.fixed());
                fa.abs_diff(fb) as f64 * TWO_POW_M64
            }
            _ => fixed_circle_distance(a.fixed(), b.fixed()) as f64 * TWO_POW_M64,
        };
    }
    let (x0, x1) = x.coords();
    let (y0, y1) = y.coords();
    let two_d = x.is_2d() || y.is_2d();
    match metric {
        Metric::Interval => {
            if two_d {
                (x0 - y0).abs().max((x1 - y1).abs())
            } else {
                (x0 - y0).abs()
            }
        }
        Metric::TorusMax => {
            if two_d {
                circle_diff(x0, y0).max(circle_diff(x1, y1))
            } else {
                circle_diff(x0, y0)
            }
        }
        Metric::TorusEuclid => {
            if two_d {
                circle_diff(x0, y0).hypot(circle_diff(x1, y1))
            } else {
                circle_diff(x0, y0)
            }
        }
    }
}

/// Distance under the system's configured metric.
pub fn distance(system: &SystemSpec, x: &Point, y: &Point) -> f64 {
    distance_in(system.metric, x, y)
}

/// A measure value with its Monte Carlo standard error (0 when exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl MeasureEstimate {
    fn exact(value: f64) -> Self {
        MeasureEstimate {
            value,
            std_error: 0.0,
        }
    }
}

/// Arcs of the circle (or clipped intervals) covered by a 1D ball.
pub(crate) fn ball_arcs(center: f64, radius: f64, metric: Metric) -> Vec<(f64, f64)> {
    let (lo, hi) = (center - radius, center + radius);
    match metric {
        Metric::Interval => vec![(lo.max(0.0), hi.min(1.0))],
        _ if 2.0 * radius >= 1.0 => vec![(0.0, 1.0)],
        _ if lo < 0.0 => vec![(0.0, hi), (lo + 1.0, 1.0)],
        _ if hi > 1.0 => vec![(lo, 1.0), (0.0, hi - 1.0)],
        _ => vec![(lo, hi)],
    }
}

fn gauss_cdf(x: f64) -> f64 {
    (1.0 + x).ln() / LN_2
}

/// Birkhoff-sampled invariant measure of a 1D map.
///
/// The orbit is cut into contiguous batches, each kept sorted, so ball
/// measures are answered by binary search and their standard errors by batch
/// means.
#[derive(Clone, Debug)]
pub struct EmpiricalMeasure {
    batches: Vec<Vec<f64>>,
    orbit_len: u64,
}

impl EmpiricalMeasure {
    pub fn build(system: &SystemSpec, cfg: &BirkhoffConfig) -> Result<Self> {
        if system.kind.dimension() != 1 {
            return Err(Error::invalid(
                "Birkhoff measure estimates are implemented for 1D maps only",
            ));
        }
        if cfg.batches < 2 || cfg.orbit_len < cfg.batches as u64 {
            return Err(Error::invalid("Birkhoff orbit needs at least 2 batches"));
        }
        let mut rng = stream_rng(cfg.seed, &[0xb1_4b]);
        let mut p = Point::Float1D(rng.random::<f64>());
        for _ in 0..cfg.burn_in {
            p = apply(system, &p)?;
        }
        let b = cfg.batches as u64;
        let mut batches = Vec::with_capacity(b as usize);
        for i in 0..b {
            let size = (cfg.orbit_len * (i + 1)) / b - (cfg.orbit_len * i) / b;
            let mut batch = Vec::with_capacity(size as usize);
            for _ in 0..size {
                batch.push(p.coords().0);
                p = apply(system, &p)?;
            }
            batch.sort_by(f64::total_cmp);
            batches.push(batch);
        }
        Ok(EmpiricalMeasure {
            batches,
            orbit_len: cfg.orbit_len,
        })
    }

    fn count(batch: &[f64], lo: f64, hi: f64) -> usize {
        let a = batch.partition_point(|&v| v <= lo);
        let b = batch.partition_point(|&v| v < hi);
        b.saturating_sub(a)
    }

    pub fn ball_measure(&self, center: f64, radius: f64, metric: Metric) -> Result<MeasureEstimate> {
        let arcs = ball_arcs(center, radius, metric);
        let fractions: Vec<f64> = self
            .batches
            .iter()
            .map(|batch| {
                let hits: usize = arcs.iter().map(|&(lo, hi)| Self::count(batch, lo, hi)).sum();
                hits as f64 / batch.len() as f64
            })
            .collect();
        let total: f64 = self
            .batches
            .iter()
            .zip(&fractions)
            .map(|(b, f)| f * b.len() as f64)
            .sum();
        if total == 0.0 {
            return Err(Error::MeasureUnderflow {
                orbit_len: self.orbit_len,
            });
        }
        let value = total / self.orbit_len as f64;
        let k = fractions.len() as f64;
        let mean = fractions.iter().sum::<f64>() / k;
        let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (k - 1.0);
        Ok(MeasureEstimate {
            value,
            std_error: (var / k).sqrt(),
        })
    }
}

/// `μ(B_ρ(x))` for the system's invariant measure.
pub fn ball_measure(system: &SystemSpec, ball: &BallSpec) -> Result<MeasureEstimate> {
    let (c0, c1) = ball.center.coords();
    let r = ball.radius;
    match system.measure {
        MeasureKind::Lebesgue1D => Ok(MeasureEstimate::exact(match ball.metric {
            Metric::Interval => (c0 + r).min(1.0) - (c0 - r).max(0.0),
            _ => (2.0 * r).min(1.0),
        })),
        MeasureKind::Lebesgue2D => Ok(MeasureEstimate::exact(match ball.metric {
            Metric::TorusMax => (2.0 * r).min(1.0).powi(2),
            Metric::TorusEuclid if r <= 0.5 => PI * r * r,
            Metric::TorusEuclid => {
                return Err(Error::invalid(
                    "Euclidean torus balls with radius above 1/2 overlap themselves",
                ))
            }
            Metric::Interval => {
                let side = |c: f64| (c + r).min(1.0) - (c - r).max(0.0);
                side(c0) * side(c1)
            }
        })),
        MeasureKind::GaussDensity => Ok(MeasureEstimate::exact(
            ball_arcs(c0, r, ball.metric)
                .iter()
                .map(|&(lo, hi)| gauss_cdf(hi) - gauss_cdf(lo))
                .sum(),
        )),
        MeasureKind::EmpiricalBirkhoff(cfg) => {
            EmpiricalMeasure::build(system, &cfg)?.ball_measure(c0, r, ball.metric)
        }
    }
}

/// Draws a point distributed by the invariant measure; exact doubling points
/// carry `horizon` exact iterates.
pub fn sample_invariant_with<R: Rng + ?Sized>(
    system: &SystemSpec,
    rng: &mut R,
    horizon: u64,
) -> Result<Point> {
    Ok(match system.kind {
        SystemKind::Doubling => Point::ExactBits(BitPoint::random(rng, horizon)),
        SystemKind::CatMap => Point::ExactRational2D(RationalPoint {
            x: rng.random_range(0..CAT_DENOMINATOR),
            y: rng.random_range(0..CAT_DENOMINATOR),
            den: CAT_DENOMINATOR,
        }),
        SystemKind::Gauss => {
            let u: f64 = rng.random();
            Point::Float1D(wrap01(u.exp2() - 1.0))
        }
        SystemKind::Intermittent { .. } => {
            let mut p = Point::Float1D(rng.random::<f64>());
            for _ in 0..system.burn_in {
                p = apply(system, &p)?;
            }
            p
        }
    })
}

/// Deterministic sample for a seed.
pub fn sample_invariant(system: &SystemSpec, seed: u64) -> Result<Point> {
    let mut rng = stream_rng(seed, &[]);
    sample_invariant_with(system, &mut rng, DEFAULT_HORIZON)
}
