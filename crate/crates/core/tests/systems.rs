use hitstat::rng::stream_rng;
use hitstat::systems::*;
use hitstat::Error;

/// Kolmogorov–Smirnov statistic of a sample against U(0, 1).
fn ks_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

const KS_CRIT_1PCT: f64 = 1.63;

#[test]
fn doubling_pushforward_is_uniform() {
    let sys = SystemSpec::doubling();
    let mut rng = stream_rng(3, &[]);
    let n = 4000;
    let xs: Vec<f64> = (0..n)
        .map(|_| {
            let p = sample_invariant_with(&sys, &mut rng, 64).unwrap();
            apply_n(&sys, &p, 10).unwrap().coords().0
        })
        .collect();
    assert!(ks_uniform(xs) < KS_CRIT_1PCT / (n as f64).sqrt());
}

#[test]
fn cat_pushforward_is_uniform_in_each_coordinate() {
    let sys = SystemSpec::cat_map();
    let mut rng = stream_rng(4, &[]);
    let n = 4000;
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let p = sample_invariant_with(&sys, &mut rng, 0).unwrap();
            apply_n(&sys, &p, 10).unwrap().coords()
        })
        .collect();
    let crit = KS_CRIT_1PCT / (n as f64).sqrt();
    assert!(ks_uniform(pts.iter().map(|p| p.0).collect()) < crit);
    assert!(ks_uniform(pts.iter().map(|p| p.1).collect()) < crit);
    // x + y is uniform too when the pair is jointly uniform.
    assert!(ks_uniform(pts.iter().map(|p| (p.0 + p.1).fract()).collect()) < crit);
}

#[test]
fn doubling_is_exact_on_dyadics() {
    let sys = SystemSpec::doubling();
    let p = Point::ExactBits(BitPoint::from_ratio(3, 8, 64).unwrap());
    assert_eq!(apply(&sys, &p).unwrap().coords().0, 0.75);
    assert_eq!(apply_n(&sys, &p, 2).unwrap().coords().0, 0.5);
    assert_eq!(apply_n(&sys, &p, 3).unwrap().coords().0, 0.0);
    // 1/3 has period two.
    let third = Point::ExactBits(BitPoint::from_ratio(1, 3, 200).unwrap());
    let back = apply_n(&sys, &third, 100).unwrap().coords().0;
    assert!((back - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn doubling_horizon_is_enforced() {
    let sys = SystemSpec::doubling();
    let p = Point::ExactBits(BitPoint::from_ratio(1, 3, 10).unwrap());
    assert!(apply_n(&sys, &p, 10).is_ok());
    assert!(matches!(apply_n(&sys, &p, 11), Err(Error::HorizonExceeded { .. })));
}

#[test]
fn cat_inverse_round_trip() {
    let mut rng = stream_rng(5, &[]);
    for _ in 0..100 {
        let p = match sample_invariant_with(&SystemSpec::cat_map(), &mut rng, 0).unwrap() {
            Point::ExactRational2D(r) => r,
            _ => unreachable!(),
        };
        let f = cat_power_mod(&p, 1234).unwrap();
        assert_eq!(cat_power_mod(&f, -1234).unwrap(), p);
    }
}

#[test]
fn intermittent_branches() {
    let sys = SystemSpec::intermittent(0.5).unwrap();
    assert_eq!(apply(&sys, &Point::Float1D(0.75)).unwrap(), Point::Float1D(0.5));
    let y = apply(&sys, &Point::Float1D(0.25)).unwrap().coords().0;
    assert!((y - 0.25 * (1.0 + 0.5f64.sqrt())).abs() < 1e-15);
    assert_eq!(apply(&sys, &Point::Float1D(0.0)).unwrap(), Point::Float1D(0.0));
}

#[test]
fn gauss_measure_is_exact() {
    let sys = SystemSpec::gauss();
    let ball = BallSpec::new(Point::Float1D(0.5), 0.1, Metric::Interval).unwrap();
    let m = ball_measure(&sys, &ball).unwrap();
    let oracle = (1.6f64 / 1.4).ln() / 2f64.ln();
    assert!((m.value - oracle).abs() < 1e-14);
    assert_eq!(m.std_error, 0.0);
}

fn lsv_with_seed(alpha: f64, seed: u64) -> SystemSpec {
    SystemSpec::intermittent(alpha).unwrap().with_measure(MeasureKind::EmpiricalBirkhoff(BirkhoffConfig {
        seed,
        ..BirkhoffConfig::default()
    }))
}

#[test]
fn lsv_density_piles_up_at_the_neutral_point() {
    let sys = lsv_with_seed(0.2, 1);
    let ball = BallSpec::new(Point::Float1D(0.05), 0.05, Metric::Interval).unwrap();
    assert!(ball_measure(&sys, &ball).unwrap().value > 0.1);
}

/// Ulam's method: transfer matrix on equal bins, estimated by sampling each
/// bin uniformly, followed by power iteration.
fn ulam_density(alpha: f64, bins: usize, per_bin: usize) -> Vec<f64> {
    let sys = SystemSpec::intermittent(alpha).unwrap();
    let mut trans = vec![Vec::new(); bins];
    for (i, row) in trans.iter_mut().enumerate() {
        for s in 0..per_bin {
            let x = (i as f64 + (s as f64 + 0.5) / per_bin as f64) / bins as f64;
            let y = apply(&sys, &Point::Float1D(x)).unwrap().coords().0;
            row.push(((y * bins as f64) as usize).min(bins - 1));
        }
    }
    let mut v = vec![1.0 / bins as f64; bins];
    for _ in 0..5000 {
        let mut next = vec![0.0; bins];
        for (i, row) in trans.iter().enumerate() {
            for &j in row {
                next[j] += v[i] / per_bin as f64;
            }
        }
        v = next;
    }
    v
}

#[test]
fn birkhoff_measure_agrees_across_seeds_and_with_ulam() {
    let ball = BallSpec::new(Point::Float1D(0.7), 0.05, Metric::Interval).unwrap();
    let a = ball_measure(&lsv_with_seed(0.5, 11), &ball).unwrap();
    let b = ball_measure(&lsv_with_seed(0.5, 12), &ball).unwrap();
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.value - b.value).abs() < 4.0 * se + 1e-4, "{a:?} {b:?}");

    let v = ulam_density(0.5, 200, 400);
    // [0.65, 0.75) is exactly bins 130..150.
    let ulam: f64 = v[130..150].iter().sum();
    assert!((a.value - ulam).abs() / ulam < 0.05, "birkhoff {} ulam {ulam}", a.value);
}

#[test]
fn empirical_measure_rejects_2d() {
    let cfg = BirkhoffConfig::default();
    assert!(EmpiricalMeasure::build(&SystemSpec::cat_map(), &cfg).is_err());
}
