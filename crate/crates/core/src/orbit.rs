//! Hit sequences, the visit-counting function and very-short-return tests.
//!
//! A center `c` is a very-short-return center at radius `ρ` when the ball
//! `B_ρ(c)` meets one of its forward images `T^n B_ρ(c)` for some
//! `1 ≤ n < J`, `J = ⌊𝔞 |ln ρ|⌋`. Intersections are decided by the strongest
//! test available for the system:
//!
//! * `ExactInterval`: the image of the ball under a 1D piecewise-monotone map
//!   is propagated as a finite union of intervals;
//! * `ExactLinear`: the cat map is linear, so the image is a parallelogram and
//!   intersection reduces to a point-in-polygon test on the torus lifts;
//! * `SufficientCenter` / `NecessaryLipschitz`: if `d(Tⁿc, c) < ρ` the center
//!   itself witnesses the intersection; if `d(Tⁿc, c) > (Aⁿ + 1)ρ` the image
//!   cannot reach the ball. Anything in between is `Unknown`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::systems::{
    apply, apply_n, ball_arcs, ball_measure, cat_power_mod, distance_in, fixed_circle_distance,
    sample_invariant_with, BallSpec, Metric, Point, SystemKind, SystemSpec,
};

/// Maximum number of interval pieces (or torus lifts) examined per test.
pub const DEFAULT_PIECE_BUDGET: usize = 4096;

/// The visit indicators `1_B(Tⁿ y)` for `n = 0..N-1`.
#[derive(Clone, Debug)]
pub struct HitSeries {
    pub bits: Vec<bool>,
    pub ball: BallSpec,
    pub t_param: f64,
    pub n: u64,
    pub mu_ball: f64,
}

/// `N = ⌊t / μ(B)⌋`.
pub fn horizon(t: f64, mu_ball: f64) -> Result<u64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("t = {t} must be positive")));
    }
    if !(mu_ball > 0.0) {
        return Err(Error::invalid(format!("ball measure {mu_ball} must be positive")));
    }
    Ok((t / mu_ball).floor() as u64)
}

fn to_fixed(v: f64) -> u64 {
    if v >= 1.0 {
        u64::MAX
    } else {
        (v * 18_446_744_073_709_551_616.0) as u64
    }
}

/// Calls `f(n, hit)` for `n = 0..len`, using bit-window arithmetic for exact
/// doubling orbits.
fn scan_orbit(
    system: &SystemSpec,
    ball: &BallSpec,
    start: &Point,
    len: u64,
    mut f: impl FnMut(bool),
) -> Result<()> {
    if let (SystemKind::Doubling, Point::ExactBits(bits)) = (&system.kind, start) {
        if len > 0 && len - 1 > bits.budget() {
            return Err(Error::HorizonExceeded {
                n: len - 1,
                budget: bits.budget(),
            });
        }
        let c = match &ball.center {
            Point::ExactBits(cb) => cb.fixed(),
            other => to_fixed(other.coords().0),
        };
        let r = to_fixed(ball.radius);
        let circle = ball.metric != Metric::Interval;
        for n in 0..len {
            let w = bits.window_at(n);
            let d = if circle {
                fixed_circle_distance(w, c)
            } else {
                w.abs_diff(c)
            };
            f(ball.radius >= 1.0 || d < r);
        }
        return Ok(());
    }
    let mut p = start.clone();
    for n in 0..len {
        f(ball.contains(&p));
        if n + 1 < len {
            p = apply(system, &p)?;
        }
    }
    Ok(())
}

/// Hit sequence with a caller-supplied ball measure (used when the measure is
/// a cached Birkhoff estimate).
pub fn hit_sequence_with_measure(
    system: &SystemSpec,
    ball: &BallSpec,
    start: &Point,
    t: f64,
    mu_ball: f64,
) -> Result<HitSeries> {
    let n = horizon(t, mu_ball)?;
    let mut bits = Vec::with_capacity(n as usize);
    scan_orbit(system, ball, start, n, |hit| bits.push(hit))?;
    Ok(HitSeries {
        bits,
        ball: ball.clone(),
        t_param: t,
        n,
        mu_ball,
    })
}

/// `bits[n] = 1_B(Tⁿ start)` for `n < N = ⌊t / μ(B)⌋`.
pub fn hit_sequence(system: &SystemSpec, ball: &BallSpec, start: &Point, t: f64) -> Result<HitSeries> {
    let mu = ball_measure(system, ball)?.value;
    hit_sequence_with_measure(system, ball, start, t, mu)
}

/// `S = Σ bits[n]`.
pub fn count_visits(series: &HitSeries) -> u64 {
    series.bits.iter().filter(|&&b| b).count() as u64
}

/// Visit count over `len` iterates without materialising the sequence.
pub fn visit_count(system: &SystemSpec, ball: &BallSpec, start: &Point, len: u64) -> Result<u64> {
    let mut s = 0;
    scan_orbit(system, ball, start, len, |hit| s += hit as u64)?;
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Intersects,
    Disjoint,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShortReturnTest {
    SufficientCenter,
    NecessaryLipschitz,
    ExactInterval,
    ExactLinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShortReturnVerdict {
    pub status: VerdictStatus,
    pub witness_n: Option<u32>,
    pub test_used: ShortReturnTest,
}

impl ShortReturnVerdict {
    fn new(status: VerdictStatus, n: u32, test_used: ShortReturnTest) -> Self {
        ShortReturnVerdict {
            status,
            witness_n: (status == VerdictStatus::Intersects).then_some(n),
            test_used,
        }
    }

    fn from_bool(hit: bool, n: u32, test_used: ShortReturnTest) -> Self {
        let status = if hit {
            VerdictStatus::Intersects
        } else {
            VerdictStatus::Disjoint
        };
        Self::new(status, n, test_used)
    }
}

/// Lipschitz tier: certifies `Intersects` only through the center itself and
/// `Disjoint` through the expansion bound `(Aⁿ + 1)ρ`.
pub fn lipschitz_verdict(system: &SystemSpec, ball: &BallSpec, n: u32) -> Result<ShortReturnVerdict> {
    let image = apply_n(system, &ball.center, n as u64)?;
    let d = distance_in(ball.metric, &image, &ball.center);
    let rho = ball.radius;
    Ok(if d < rho {
        ShortReturnVerdict::new(VerdictStatus::Intersects, n, ShortReturnTest::SufficientCenter)
    } else if d > (system.lipschitz_a.powi(n as i32) + 1.0) * rho {
        ShortReturnVerdict::new(VerdictStatus::Disjoint, n, ShortReturnTest::NecessaryLipschitz)
    } else {
        ShortReturnVerdict::new(VerdictStatus::Unknown, n, ShortReturnTest::NecessaryLipschitz)
    })
}

/// Open intervals inside `[0, 1]`.
type Pieces = Vec<(f64, f64)>;

fn merge(mut pieces: Pieces) -> Pieces {
    pieces.retain(|(a, b)| b > a);
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Pieces = Vec::with_capacity(pieces.len());
    for (a, b) in pieces {
        match out.last_mut() {
            // Touching open intervals leave out a single point; keep them apart.
            Some(last) if a < last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn covers_all(pieces: &Pieces) -> bool {
    pieces.len() == 1 && pieces[0].0 <= 0.0 && pieces[0].1 >= 1.0
}

/// Image of one open interval under a 1D map, as open pieces.
fn interval_image(kind: &SystemKind, a: f64, b: f64, out: &mut Pieces) {
    match *kind {
        SystemKind::Doubling => {
            if a < 0.5 {
                out.push((2.0 * a, 2.0 * b.min(0.5)));
            }
            if b > 0.5 {
                out.push((2.0 * a.max(0.5) - 1.0, 2.0 * b - 1.0));
            }
        }
        SystemKind::Intermittent { alpha } => {
            let left = |x: f64| x * (1.0 + (2.0 * x).powf(alpha));
            if a < 0.5 {
                out.push((left(a), left(b.min(0.5))));
            }
            if b > 0.5 {
                out.push((2.0 * a.max(0.5) - 1.0, 2.0 * b - 1.0));
            }
        }
        SystemKind::Gauss => {
            if a <= 0.0 {
                out.push((0.0, 1.0));
                return;
            }
            // Branch k covers (1/(k+1), 1/k] and maps it onto [0, 1) decreasingly.
            let k_lo = (1.0 / b).floor().max(1.0);
            let k_hi = (1.0 / a).floor();
            if k_hi - k_lo >= 2.0 {
                out.push((0.0, 1.0));
                return;
            }
            let mut k = k_lo;
            while k <= k_hi {
                let lo = a.max(1.0 / (k + 1.0));
                let hi = b.min(1.0 / k);
                if hi > lo {
                    out.push(((1.0 / hi - k).max(0.0), (1.0 / lo - k).min(1.0)));
                }
                k += 1.0;
            }
        }
        SystemKind::CatMap => unreachable!("cat map is not a 1D map"),
    }
}

/// Propagates `B_ρ(c)` as an interval union and tests `B ∩ TⁿB ≠ ∅`.
pub fn interval_image_verdict(
    system: &SystemSpec,
    ball: &BallSpec,
    n: u32,
    budget: usize,
) -> Result<ShortReturnVerdict> {
    if system.kind.dimension() != 1 {
        return Err(Error::invalid("interval images need a 1D map"));
    }
    let c = ball.center.coords().0;
    let target = ball_arcs(c, ball.radius, ball.metric);
    let mut pieces = merge(target.clone());
    for step in 1..=n {
        let mut next = Vec::with_capacity(2 * pieces.len());
        for &(a, b) in &pieces {
            interval_image(&system.kind, a, b, &mut next);
        }
        pieces = merge(next);
        if covers_all(&pieces) {
            return Ok(ShortReturnVerdict::from_bool(true, n, ShortReturnTest::ExactInterval));
        }
        if pieces.len() > budget {
            return Err(Error::PieceBudget { n: step, budget });
        }
    }
    let hit = pieces
        .iter()
        .any(|&(a, b)| target.iter().any(|&(lo, hi)| a < hi && lo < b));
    Ok(ShortReturnVerdict::from_bool(hit, n, ShortReturnTest::ExactInterval))
}

/// Closed-form arc test for the doubling map on the circle: `TⁿB` is the arc
/// of half-width `2ⁿρ` around `Tⁿc`.
fn doubling_arc_verdict(ball: &BallSpec, n: u32) -> Result<ShortReturnVerdict> {
    let rho = ball.radius;
    let scale = (n as f64).exp2();
    if 2.0 * rho * scale >= 1.0 {
        return Ok(ShortReturnVerdict::from_bool(true, n, ShortReturnTest::ExactInterval));
    }
    let d = match &ball.center {
        Point::ExactBits(b) => {
            let image = b.shifted(n as u64)?;
            fixed_circle_distance(image.fixed(), b.fixed()) as f64 / 18_446_744_073_709_551_616.0
        }
        other => {
            let c = other.coords().0;
            let image = (c * scale).fract();
            let d = (image - c).abs();
            d.min(1.0 - d)
        }
    };
    Ok(ShortReturnVerdict::from_bool(
        d < rho * (1.0 + scale),
        n,
        ShortReturnTest::ExactInterval,
    ))
}

/// Signed integer powers of the cat matrix (`n < 0` uses the inverse).
fn cat_matrix_pow_signed(n: i64) -> [[f64; 2]; 2] {
    let base: [[i128; 2]; 2] = if n >= 0 { [[2, 1], [1, 1]] } else { [[1, -1], [-1, 2]] };
    let mut m: [[i128; 2]; 2] = [[1, 0], [0, 1]];
    for _ in 0..n.unsigned_abs() {
        m = [
            [
                m[0][0] * base[0][0] + m[0][1] * base[1][0],
                m[0][0] * base[0][1] + m[0][1] * base[1][1],
            ],
            [
                m[1][0] * base[0][0] + m[1][1] * base[1][0],
                m[1][0] * base[0][1] + m[1][1] * base[1][1],
            ],
        ];
    }
    [
        [m[0][0] as f64, m[0][1] as f64],
        [m[1][0] as f64, m[1][1] as f64],
    ]
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise convex hull (Andrew's monotone chain).
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn strictly_inside(hull: &[(f64, f64)], p: (f64, f64)) -> bool {
    hull.len() >= 3
        && (0..hull.len()).all(|i| cross(hull[i], hull[(i + 1) % hull.len()], p) > 0.0)
}

/// Exact test of `B ∩ TⁿB ≠ ∅` (or `T⁻ⁿ` for negative `n`) for the cat map
/// with square balls.
fn cat_linear_verdict(ball: &BallSpec, n: i64, budget: usize) -> Result<ShortReturnVerdict> {
    let rho = ball.radius;
    let m = cat_matrix_pow_signed(n);
    let delta = match &ball.center {
        Point::ExactRational2D(r) => {
            let image = cat_power_mod(r, n)?;
            let d = r.den as f64;
            (
                (r.x as i128 - image.x as i128) as f64 / d,
                (r.y as i128 - image.y as i128) as f64 / d,
            )
        }
        Point::Float2D(x, y) => {
            let ix = m[0][0] * x + m[0][1] * y;
            let iy = m[1][0] * x + m[1][1] * y;
            (x - (ix - ix.floor()), y - (iy - iy.floor()))
        }
        other => {
            return Err(Error::RepresentationMismatch {
                system: "cat_map",
                point: if other.is_2d() { "2D" } else { "1D" },
            })
        }
    };
    let corners = [(-rho, -rho), (rho, -rho), (rho, rho), (-rho, rho)];
    let mut sums = Vec::with_capacity(16);
    for &(u0, u1) in &corners {
        let (v0, v1) = (m[0][0] * u0 + m[0][1] * u1, m[1][0] * u0 + m[1][1] * u1);
        for &(w0, w1) in &corners {
            sums.push((v0 + w0, v1 + w1));
        }
    }
    let hull = convex_hull(sums);
    let reach = |row: [f64; 2]| rho * (row[0].abs() + row[1].abs() + 1.0);
    let (r0, r1) = (reach(m[0]), reach(m[1]));
    let k0 = ((-r0 - delta.0).ceil() as i64)..=((r0 - delta.0).floor() as i64);
    let k1 = ((-r1 - delta.1).ceil() as i64)..=((r1 - delta.1).floor() as i64);
    let lifts = (k0.end() - k0.start() + 1).max(0) as u128 * (k1.end() - k1.start() + 1).max(0) as u128;
    if lifts > budget as u128 {
        return Err(Error::PieceBudget {
            n: n.unsigned_abs() as u32,
            budget,
        });
    }
    let hit = k0.clone().any(|a| {
        k1.clone()
            .any(|b| strictly_inside(&hull, (delta.0 + a as f64, delta.1 + b as f64)))
    });
    Ok(ShortReturnVerdict::from_bool(
        hit,
        n.unsigned_abs() as u32,
        ShortReturnTest::ExactLinear,
    ))
}

/// Decides whether `B_ρ(c) ∩ TⁿB_ρ(c) ≠ ∅` with the strongest available test.
pub fn ball_image_intersects(system: &SystemSpec, ball: &BallSpec, n: u32) -> Result<ShortReturnVerdict> {
    if n == 0 {
        return Err(Error::invalid("short-return tests need n ≥ 1"));
    }
    match (&system.kind, ball.metric) {
        (SystemKind::Doubling, Metric::TorusMax | Metric::TorusEuclid) => doubling_arc_verdict(ball, n),
        (SystemKind::Doubling | SystemKind::Intermittent { .. } | SystemKind::Gauss, _) => {
            interval_image_verdict(system, ball, n, DEFAULT_PIECE_BUDGET)
        }
        (SystemKind::CatMap, Metric::TorusMax) => cat_linear_verdict(ball, n as i64, DEFAULT_PIECE_BUDGET),
        (SystemKind::CatMap, _) => lipschitz_verdict(system, ball, n),
    }
}

/// `B_ρ(c) ∩ T⁻ⁿB_ρ(c) ≠ ∅` for the invertible cat map.
pub fn ball_preimage_intersects(system: &SystemSpec, ball: &BallSpec, n: u32) -> Result<ShortReturnVerdict> {
    match (&system.kind, ball.metric) {
        (SystemKind::CatMap, Metric::TorusMax) => cat_linear_verdict(ball, -(n as i64), DEFAULT_PIECE_BUDGET),
        _ => Err(Error::invalid(
            "backward images are only available for the cat map with square balls",
        )),
    }
}

/// `J = ⌊𝔞 |ln ρ|⌋`.
pub fn short_return_horizon(rho: f64, a_frak: f64) -> Result<u32> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("radius {rho} outside (0, 1)")));
    }
    if !(a_frak > 0.0) {
        return Err(Error::invalid(format!("horizon constant {a_frak} must be positive")));
    }
    Ok((a_frak * rho.ln().abs()).floor() as u32)
}

fn primary_test(system: &SystemSpec, metric: Metric) -> ShortReturnTest {
    match (&system.kind, metric) {
        (SystemKind::CatMap, Metric::TorusMax) => ShortReturnTest::ExactLinear,
        (SystemKind::CatMap, _) => ShortReturnTest::NecessaryLipschitz,
        _ => ShortReturnTest::ExactInterval,
    }
}

/// Scans `n = 1..J-1` and reports the first intersecting image.
pub fn is_short_return_center(
    system: &SystemSpec,
    c: &Point,
    rho: f64,
    a_frak: f64,
) -> Result<ShortReturnVerdict> {
    let j = short_return_horizon(rho, a_frak)?;
    let ball = BallSpec::unchecked(c.clone(), rho, system.metric);
    let mut unknown = None;
    let mut last = primary_test(system, system.metric);
    for n in 1..j {
        let v = ball_image_intersects(system, &ball, n)?;
        match v.status {
            VerdictStatus::Intersects => return Ok(v),
            VerdictStatus::Unknown => unknown = unknown.or(Some(v)),
            VerdictStatus::Disjoint => last = v.test_used,
        }
    }
    Ok(unknown.unwrap_or(ShortReturnVerdict::new(VerdictStatus::Disjoint, 0, last)))
}

/// Two-sided Monte Carlo estimate of `μ(V_ρ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VEstimate {
    pub lower: f64,
    pub upper: f64,
    pub se: f64,
    pub samples: u64,
    pub intersects: u64,
    pub unknown: u64,
}

/// Samples `samples` centers from the invariant measure and classifies them.
///
/// `lower` counts certified `Intersects`, `upper` adds `Unknown`; `se` is the
/// binomial standard error of `upper`.
pub fn estimate_v_measure(
    system: &SystemSpec,
    rho: f64,
    a_frak: f64,
    samples: u64,
    seed: u64,
) -> Result<VEstimate> {
    if samples < 100 {
        return Err(Error::invalid(format!("need at least 100 samples, got {samples}")));
    }
    let j = short_return_horizon(rho, a_frak)?;
    let verdicts: Vec<VerdictStatus> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, &[0x5e7, i]);
            let c = sample_invariant_with(system, &mut rng, j as u64 + 8)?;
            Ok(is_short_return_center(system, &c, rho, a_frak)?.status)
        })
        .collect::<Result<_>>()?;
    let (intersects, unknown) = verdicts.iter().fold((0u64, 0u64), |(i, u), v| match v {
        VerdictStatus::Intersects => (i + 1, u),
        VerdictStatus::Unknown => (i, u + 1),
        VerdictStatus::Disjoint => (i, u),
    });
    let n = samples as f64;
    let lower = intersects as f64 / n;
    let upper = (intersects + unknown) as f64 / n;
    Ok(VEstimate {
        lower,
        upper,
        se: (upper * (1.0 - upper) / n).sqrt(),
        samples,
        intersects,
        unknown,
    })
}
