use hitstat::chenstein::{binomial_pmf, binomial_poisson_tv};
use hitstat::orbit::visit_count;
use hitstat::rng::stream_rng;
use hitstat::stats::*;
use hitstat::systems::{sample_invariant_with, BallSpec, Metric, Point, SystemSpec};
use hitstat::Error;
use rand::Rng;

/// Poisson draws by sequential inversion of the cdf.
fn poisson_draw(rng: &mut impl Rng, t: f64) -> u64 {
    let u: f64 = rng.random();
    let (mut k, mut p) = (0u64, (-t).exp());
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= t / k as f64;
        cdf += p;
    }
    k
}

#[test]
fn poisson_samples_are_close_to_poisson() {
    let mut rng = stream_rng(41, &[]);
    let samples: Vec<u64> = (0..100_000).map(|_| poisson_draw(&mut rng, 1.0)).collect();
    let pmf = EmpiricalPmf::from_samples(&samples).unwrap();
    assert!(tv_to_poisson(&pmf, 1.0).tv < 0.01);
    assert!(sup_distance(&pmf, 1.0) < 0.01);
    // A visibly different law is far away.
    assert!(tv_to_poisson(&pmf, 1.5).tv > 0.1);
}

#[test]
fn pmf_and_tail_are_consistent() {
    for t in [0.1, 1.0, 7.5, 40.0] {
        let table = poisson_pmf_table(t, 300);
        assert!((table.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for k in [0u64, 1, 5, 30, 100] {
            assert!((table[k as usize] - poisson_pmf(t, k)).abs() < 1e-14);
            let tail: f64 = table[k as usize + 1..].iter().sum();
            assert!((poisson_tail(t, k) - tail).abs() < 1e-12);
            assert!(poisson_tail(t, k) <= poisson_tail_bound(t, k) + 1e-15);
        }
    }
}

#[test]
fn binomial_tv_agrees_with_direct_distance() {
    for &(n, t) in &[(10u64, 0.5), (100, 1.0), (1000, 2.0)] {
        let bin = EmpiricalPmf::from_masses(binomial_pmf(n, t / n as f64));
        let pois = poisson_pmf_table(t, n as usize + 200);
        let direct = tv_distance(&bin, &pois);
        let (exact, _) = binomial_poisson_tv(n, t).unwrap();
        assert!((direct.l1 - exact).abs() < 1e-10);
        assert!((tv_to_poisson(&bin, t).l1 - exact).abs() < 1e-10);
        assert!((direct.tv - direct.l1 / 2.0).abs() < 1e-16);
    }
}

#[test]
fn truncated_poisson_is_close_to_itself() {
    let t = 3.0;
    let p = EmpiricalPmf::from_masses(poisson_pmf_table(t, 30));
    assert!(sup_distance(&p, t) < 1e-15);
    let d = tv_to_poisson(&p, t);
    assert!((d.l1 - poisson_tail(t, 30)).abs() < 1e-15);
}

#[test]
fn decay_fit_recovers_power_law() {
    let pts: Vec<(f64, f64)> = [2f64.powi(-8), 2f64.powi(-10), 2f64.powi(-12), 2f64.powi(-14)]
        .iter()
        .map(|&r: &f64| (r, 0.7 * r.ln().abs().powf(-1.5)))
        .collect();
    let fit = fit_log_decay(&pts).unwrap();
    assert!((fit.kappa_hat - 1.5).abs() < 1e-12);
    assert!((fit.intercept - 0.7f64.ln()).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    let mut with_zero = pts.clone();
    with_zero[0].1 = 0.0;
    with_zero[1].1 = 0.0;
    assert!(matches!(fit_log_decay(&with_zero), Err(Error::InsufficientData(_))));
}

#[test]
fn bootstrap_is_deterministic_and_brackets_estimate() {
    let mut rng = stream_rng(42, &[]);
    let samples: Vec<u64> = (0..2000).map(|_| poisson_draw(&mut rng, 2.0)).collect();
    let a = bootstrap_ci(&samples, 2.0, 200, 7).unwrap();
    let b = bootstrap_ci(&samples, 2.0, 200, 7).unwrap();
    assert_eq!(a, b);
    assert!(a.sup_lo <= a.sup_hi && a.tv_lo <= a.tv_hi);
    let pmf = EmpiricalPmf::from_samples(&samples).unwrap();
    let est = tv_to_poisson(&pmf, 2.0).tv;
    assert!(a.tv_lo <= est * 1.5 && est <= a.tv_hi * 1.5);
    assert!(bootstrap_ci(&[], 1.0, 10, 0).is_err());
}

fn doubling_counts(seed: u64, samples: usize) -> Vec<u64> {
    let sys = SystemSpec::doubling();
    let rho = 2f64.powi(-8);
    let n = (1.0 / (2.0 * rho)) as u64;
    let mut rng = stream_rng(seed, &[]);
    let c = Point::Float1D(0.3141592653589793);
    let ball = BallSpec::new(c, rho, Metric::TorusMax).unwrap();
    (0..samples)
        .map(|_| {
            let start = sample_invariant_with(&sys, &mut rng, n + 8).unwrap();
            visit_count(&sys, &ball, &start, n).unwrap()
        })
        .collect()
}

#[test]
fn doubling_counts_are_reproducible_and_poisson() {
    let a = EmpiricalPmf::from_samples(&doubling_counts(1, 10_000)).unwrap();
    let b = EmpiricalPmf::from_samples(&doubling_counts(2, 10_000)).unwrap();
    assert!(tv_distance(&a, &b.masses).tv < 0.03);
    assert!(sup_distance(&a, 1.0) < 0.05);
    assert_eq!(doubling_counts(3, 50), doubling_counts(3, 50));
}
