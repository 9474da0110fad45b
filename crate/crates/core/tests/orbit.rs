use hitstat::orbit::*;
use hitstat::rng::stream_rng;
use hitstat::systems::*;
use rand::Rng;

fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// `B ∩ TⁿB ≠ ∅` for the doubling map through preimages: `T⁻ⁿB` is the union
/// of the arcs of half-width `ρ/2ⁿ` around `(c + k)/2ⁿ`. Returns `None` when
/// the decision is within rounding of the boundary.
fn preimage_oracle(c: f64, rho: f64, n: u32) -> Option<bool> {
    let scale = (n as f64).exp2();
    let reach = rho + rho / scale;
    let mut best = f64::INFINITY;
    for k in 0..(1u64 << n) {
        best = best.min(circle_dist(c, (c + k as f64) / scale));
    }
    if (best - reach).abs() < 1e-12 {
        None
    } else {
        Some(best < reach)
    }
}

fn exact_center(c_num: u64, c_den: u64) -> Point {
    Point::ExactBits(BitPoint::from_ratio(c_num, c_den, 256).unwrap())
}

#[test]
fn doubling_worked_example() {
    let sys = SystemSpec::doubling();
    let rho = 2f64.powi(-8);
    let ball = BallSpec::new(exact_center(3, 10), rho, Metric::TorusMax).unwrap();
    for n in 1..=8 {
        let v = ball_image_intersects(&sys, &ball, n).unwrap();
        let oracle = preimage_oracle(0.3, rho, n).unwrap();
        assert_eq!(v.status == VerdictStatus::Intersects, oracle, "n = {n}");
        assert_ne!(v.status, VerdictStatus::Unknown);
    }
    // 0.3 = 0.0100110011..., T³(0.3) = 0.4 is 0.1 away: far outside for n = 3.
    assert_eq!(
        ball_image_intersects(&sys, &ball, 3).unwrap().status,
        VerdictStatus::Disjoint
    );
}

#[test]
fn doubling_verdicts_match_preimage_oracle() {
    let sys = SystemSpec::doubling();
    let mut rng = stream_rng(21, &[]);
    let mut checked = 0;
    let mut hits = 0;
    for _ in 0..2000 {
        let rho = [2f64.powi(-6), 2f64.powi(-9), 2f64.powi(-12)][rng.random_range(0..3)];
        let c = sample_invariant_with(&sys, &mut rng, 64).unwrap();
        let cf = c.coords().0;
        let ball = BallSpec::new(c, rho, Metric::TorusMax).unwrap();
        let float_ball = BallSpec::new(Point::Float1D(cf), rho, Metric::TorusMax).unwrap();
        for n in 1..=10 {
            let Some(oracle) = preimage_oracle(cf, rho, n) else { continue };
            let exact = ball_image_intersects(&sys, &ball, n).unwrap();
            let interval = interval_image_verdict(&sys, &float_ball, n, DEFAULT_PIECE_BUDGET).unwrap();
            assert_eq!(exact.status == VerdictStatus::Intersects, oracle);
            assert_ne!(interval.status, VerdictStatus::Unknown);
            assert_eq!(interval.status == VerdictStatus::Intersects, oracle);
            if oracle {
                assert_eq!(exact.witness_n, Some(n));
                hits += 1;
            }
            checked += 1;
        }
    }
    assert!(checked > 19_000 && hits > 100, "{checked} {hits}");
}

#[test]
fn short_return_scan_matches_oracle() {
    let sys = SystemSpec::doubling();
    let rho = 2f64.powi(-12);
    let mut rng = stream_rng(22, &[]);
    for a_frak in [1.0 / (4.0 * 4f64.ln()), 0.5, 1.0] {
        let j = short_return_horizon(rho, a_frak).unwrap();
        let mut short = 0;
        for _ in 0..500 {
            let c = sample_invariant_with(&sys, &mut rng, j as u64 + 8).unwrap();
            let cf = c.coords().0;
            let v = is_short_return_center(&sys, &c, rho, a_frak).unwrap();
            let oracle: Vec<Option<bool>> = (1..j).map(|n| preimage_oracle(cf, rho, n)).collect();
            if oracle.iter().any(|o| o.is_none()) {
                continue;
            }
            let first = oracle.iter().position(|o| *o == Some(true)).map(|i| i as u32 + 1);
            assert_eq!(v.witness_n, first, "a = {a_frak}, c = {cf}");
            assert_ne!(v.status, VerdictStatus::Unknown);
            short += first.is_some() as u32;
        }
        if a_frak == 1.0 {
            assert!(short > 0);
        }
    }
}

#[test]
fn horizon_values() {
    assert_eq!(short_return_horizon(2f64.powi(-12), 1.0).unwrap(), 8);
    assert_eq!(short_return_horizon(0.5, 0.18).unwrap(), 0);
    assert!(short_return_horizon(1.5, 0.5).is_err());
    assert!(short_return_horizon(0.1, 0.0).is_err());
    assert_eq!(horizon(1.0, 2f64.powi(-10)).unwrap(), 1024);
    assert!(horizon(0.0, 0.1).is_err());
}

/// `B ∩ TⁿB ≠ ∅` is witnessed by some `x ∈ B` with `Tⁿx ∈ B`; grid search
/// over exact rationals finds a witness when the overlap is not tiny.
fn cat_witness(c: &RationalPoint, rho: f64, n: i64, grid: u64) -> bool {
    let den = CAT_DENOMINATOR as f64;
    let ball = BallSpec::unchecked(Point::ExactRational2D(*c), rho, Metric::TorusMax);
    let step = 2.0 * rho / grid as f64;
    for i in 0..grid {
        for k in 0..grid {
            let dx = -rho + (i as f64 + 0.5) * step;
            let dy = -rho + (k as f64 + 0.5) * step;
            let shift = |v: u64, d: f64| ((v as f64 + d * den).rem_euclid(den)) as u64 % CAT_DENOMINATOR;
            let x = RationalPoint::new(shift(c.x, dx), shift(c.y, dy), CAT_DENOMINATOR).unwrap();
            let image = cat_power_mod(&x, n).unwrap();
            if ball.contains(&Point::ExactRational2D(image)) {
                return true;
            }
        }
    }
    false
}

fn random_cat_center(rng: &mut impl Rng) -> RationalPoint {
    match sample_invariant_with(&SystemSpec::cat_map(), rng, 0).unwrap() {
        Point::ExactRational2D(r) => r,
        _ => unreachable!(),
    }
}

#[test]
fn cat_verdicts_sound_against_witness_search() {
    let sys = SystemSpec::cat_map();
    let mut rng = stream_rng(23, &[]);
    let (mut witnessed, mut exact_hits) = (0, 0);
    for _ in 0..400 {
        let c = random_cat_center(&mut rng);
        let rho = 0.12;
        let ball = BallSpec::new(Point::ExactRational2D(c), rho, Metric::TorusMax).unwrap();
        for n in 1..=2u32 {
            let v = ball_image_intersects(&sys, &ball, n).unwrap();
            assert_eq!(v.test_used, ShortReturnTest::ExactLinear);
            assert_ne!(v.status, VerdictStatus::Unknown);
            if cat_witness(&c, rho, n as i64, 24) {
                witnessed += 1;
                assert_eq!(v.status, VerdictStatus::Intersects);
            }
            exact_hits += (v.status == VerdictStatus::Intersects) as u32;
            let lip = lipschitz_verdict(&sys, &ball, n).unwrap();
            match lip.status {
                VerdictStatus::Unknown => {}
                s => assert_eq!(s, v.status),
            }
        }
    }
    assert!(witnessed > 10);
    // Witness search is one-sided, but should find most true overlaps.
    assert!(witnessed as f64 >= 0.8 * exact_hits as f64, "{witnessed} / {exact_hits}");
}

#[test]
fn cat_forward_and_backward_agree() {
    let sys = SystemSpec::cat_map();
    let mut rng = stream_rng(24, &[]);
    for _ in 0..500 {
        let c = random_cat_center(&mut rng);
        let ball = BallSpec::new(Point::ExactRational2D(c), 0.05, Metric::TorusMax).unwrap();
        for n in 1..=4 {
            let f = ball_image_intersects(&sys, &ball, n).unwrap().status;
            let b = ball_preimage_intersects(&sys, &ball, n).unwrap().status;
            assert_eq!(f, b);
        }
    }
    let doubling = SystemSpec::doubling();
    let ball = BallSpec::new(Point::Float1D(0.2), 0.01, Metric::TorusMax).unwrap();
    assert!(ball_preimage_intersects(&doubling, &ball, 1).is_err());
}

#[test]
fn cat_euclid_uses_lipschitz_tier() {
    let sys = SystemSpec::cat_map().with_metric(Metric::TorusEuclid);
    let c = RationalPoint::new(1 << 50, 1 << 49, CAT_DENOMINATOR).unwrap();
    let ball = BallSpec::new(Point::ExactRational2D(c), 0.01, Metric::TorusEuclid).unwrap();
    let v = ball_image_intersects(&sys, &ball, 1).unwrap();
    assert_ne!(v.test_used, ShortReturnTest::ExactLinear);
}

#[test]
fn cat_short_return_measure_is_small() {
    let sys = SystemSpec::cat_map();
    for a_frak in [sys.default_a_frak(), 0.5] {
        for seed in [1, 2] {
            let v = estimate_v_measure(&sys, 1e-3, a_frak, 10_000, seed).unwrap();
            assert!(v.upper < 0.05, "a = {a_frak}: {v:?}");
            assert!(v.lower <= v.upper);
        }
    }
}

#[test]
fn v_estimate_is_deterministic_across_pools() {
    let sys = SystemSpec::doubling();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_v_measure(&sys, 2f64.powi(-10), 1.0, 2000, 9).unwrap())
    };
    assert_eq!(run(1), run(3));
    assert!(estimate_v_measure(&sys, 0.01, 1.0, 99, 9).is_err());
}

#[test]
fn visit_counts_are_additive() {
    let mut rng = stream_rng(25, &[]);
    let systems = [SystemSpec::doubling(), SystemSpec::cat_map(), SystemSpec::intermittent(0.3).unwrap()];
    for sys in &systems {
        for _ in 0..20 {
            let start = sample_invariant_with(sys, &mut rng, 600).unwrap();
            let c = sample_invariant_with(sys, &mut rng, 600).unwrap();
            let ball = BallSpec::new(c, 0.1, sys.metric).unwrap();
            let (a, b) = (rng.random_range(0..300u64), rng.random_range(0..300u64));
            let whole = visit_count(sys, &ball, &start, a + b).unwrap();
            let head = visit_count(sys, &ball, &start, a).unwrap();
            let mid = apply_n(sys, &start, a).unwrap();
            let tail = visit_count(sys, &ball, &mid, b).unwrap();
            assert_eq!(whole, head + tail);
            // Brute-force count through explicit iteration.
            let mut p = start.clone();
            let mut brute = 0;
            for n in 0..a + b {
                brute += ball.contains(&p) as u64;
                if n + 1 < a + b {
                    p = apply(sys, &p).unwrap();
                }
            }
            assert_eq!(whole, brute);
        }
    }
}

#[test]
fn orbit_that_never_enters_counts_zero() {
    let sys = SystemSpec::doubling();
    let fixed = Point::ExactBits(BitPoint::from_ratio(0, 1, 4096).unwrap());
    let ball = BallSpec::new(Point::Float1D(0.5), 0.1, Metric::TorusMax).unwrap();
    let series = hit_sequence(&sys, &ball, &fixed, 100.0).unwrap();
    assert_eq!(series.n, 500);
    assert_eq!(series.bits.len(), 500);
    assert_eq!(count_visits(&series), 0);
    // A period-two orbit {1/3, 2/3} with a ball around 1/3 hits every other step.
    let third = Point::ExactBits(BitPoint::from_ratio(1, 3, 4096).unwrap());
    let ball = BallSpec::new(Point::Float1D(1.0 / 3.0), 0.01, Metric::TorusMax).unwrap();
    assert_eq!(visit_count(&sys, &ball, &third, 1000).unwrap(), 500);
}

#[test]
fn exact_orbit_needs_budget() {
    let sys = SystemSpec::doubling();
    let start = Point::ExactBits(BitPoint::from_ratio(1, 7, 50).unwrap());
    let ball = BallSpec::new(Point::Float1D(0.5), 0.1, Metric::TorusMax).unwrap();
    assert!(visit_count(&sys, &ball, &start, 51).is_ok());
    assert!(visit_count(&sys, &ball, &start, 52).is_err());
}
