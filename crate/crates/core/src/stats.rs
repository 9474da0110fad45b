//! Empirical distributions, Poisson references, distances and scaling fits.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Zero-mass bins appended after the largest observed count.
pub const HISTOGRAM_GUARD: usize = 10;

/// Default number of bootstrap resamples.
pub const DEFAULT_RESAMPLES: usize = 200;

/// A probability mass function on `0..masses.len()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPmf {
    pub masses: Vec<f64>,
    /// Number of samples behind the masses (0 for analytic pmfs).
    pub total: u64,
}

impl EmpiricalPmf {
    /// Normalised histogram of `samples`, truncated at `max + HISTOGRAM_GUARD`.
    pub fn from_samples(samples: &[u64]) -> Result<Self> {
        let max = *samples
            .iter()
            .max()
            .ok_or_else(|| Error::invalid("empirical pmf needs at least one sample"))?;
        let mut counts = vec![0u64; max as usize + 1 + HISTOGRAM_GUARD];
        for &s in samples {
            counts[s as usize] += 1;
        }
        let n = samples.len() as f64;
        Ok(EmpiricalPmf {
            masses: counts.iter().map(|&c| c as f64 / n).collect(),
            total: samples.len() as u64,
        })
    }

    pub fn from_masses(masses: Vec<f64>) -> Self {
        EmpiricalPmf { masses, total: 0 }
    }

    pub fn k_max(&self) -> usize {
        self.masses.len().saturating_sub(1)
    }

    pub fn mass(&self, k: usize) -> f64 {
        self.masses.get(k).copied().unwrap_or(0.0)
    }
}

/// `e^{-t} t^k / k!`, accumulated in log space.
pub fn poisson_pmf(t: f64, k: u64) -> f64 {
    if t == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let lt = t.ln();
    let log_p = (1..=k).fold(-t, |acc, j| acc + lt - (j as f64).ln());
    log_p.exp()
}

/// `[Poi_t{0}, ..., Poi_t{k_max}]` by the recurrence `p_{k+1} = p_k t / (k+1)`
/// carried in log space.
pub fn poisson_pmf_table(t: f64, k_max: usize) -> Vec<f64> {
    if t == 0.0 {
        let mut v = vec![0.0; k_max + 1];
        v[0] = 1.0;
        return v;
    }
    let lt = t.ln();
    let mut log_p = -t;
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(log_p.exp());
    for k in 1..=k_max {
        log_p += lt - (k as f64).ln();
        out.push(log_p.exp());
    }
    out
}

/// `P(Poi_t > k)`, summed term by term (no cancellation).
pub fn poisson_tail(t: f64, k: u64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let lt = t.ln();
    let mut log_p = -t;
    for j in 1..=k + 1 {
        log_p += lt - (j as f64).ln();
    }
    let mut term = log_p.exp();
    let mut sum = 0.0;
    let mut j = k + 1;
    loop {
        sum += term;
        j += 1;
        term *= t / j as f64;
        if term <= sum * 1e-17 && j as f64 > t {
            break;
        }
    }
    sum
}

/// Taylor-remainder bound `t^{K+1} / (K+1)!` on `P(Poi_t > K)`.
pub fn poisson_tail_bound(t: f64, k: u64) -> f64 {
    (1..=k + 1).fold(1.0, |acc, j| acc * t / j as f64)
}

/// `sup_k |p(k) − Poi_t(k)|`, including the Poisson tail beyond the support of `p`.
pub fn sup_distance(p: &EmpiricalPmf, t: f64) -> f64 {
    let mut best = 0.0f64;
    let mut k = 0usize;
    loop {
        let q = poisson_pmf(t, k as u64);
        best = best.max((p.mass(k) - q).abs());
        // Past the mode and the support, the Poisson terms only shrink.
        if k >= p.masses.len() && k as f64 > t {
            break;
        }
        k += 1;
    }
    best
}

/// L1 and total-variation (half L1) distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub l1: f64,
    pub tv: f64,
}

/// Distance between two pmfs, zero-padded to a common length.
pub fn tv_distance(p: &EmpiricalPmf, q: &[f64]) -> Distances {
    let n = p.masses.len().max(q.len());
    let l1: f64 = (0..n)
        .map(|k| (p.mass(k) - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum();
    Distances { l1, tv: l1 / 2.0 }
}

/// Distance to `Poi_t`, with the Poisson mass beyond the support of `p` added
/// analytically.
pub fn tv_to_poisson(p: &EmpiricalPmf, t: f64) -> Distances {
    let n = p.masses.len();
    let reference = poisson_pmf_table(t, n.saturating_sub(1));
    let body: f64 = (0..n).map(|k| (p.masses[k] - reference[k]).abs()).sum();
    let l1 = body + if n == 0 { 1.0 } else { poisson_tail(t, n as u64 - 1) };
    Distances { l1, tv: l1 / 2.0 }
}

/// Ordinary least squares `y = slope x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "linear fit needs at least 2 paired points, got {}",
            xs.len().min(ys.len())
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fit of `error ≈ C |ln ρ|^{-κ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub kappa_hat: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(|ln ρ|, error)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
    /// Points discarded because their error was not positive.
    pub dropped: usize,
}

/// Least squares of `ln error` against `ln |ln ρ|`; `kappa_hat = -slope`.
pub fn fit_log_decay(points: &[(f64, f64)]) -> Result<DecayFit> {
    let mut used = Vec::with_capacity(points.len());
    let mut dropped = 0;
    for &(rho, err) in points {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::invalid(format!("radius {rho} outside (0, 1)")));
        }
        if err > 0.0 && err.is_finite() {
            used.push((rho.ln().abs(), err));
        } else {
            dropped += 1;
        }
    }
    let mut distinct: Vec<f64> = used.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs 3 distinct radii with positive error, got {}",
            distinct.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(DecayFit {
        kappa_hat: -fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        points: used,
        dropped,
    })
}

/// Percentile bootstrap intervals for the sup and TV distances to `Poi_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub sup_lo: f64,
    pub sup_hi: f64,
    pub tv_lo: f64,
    pub tv_hi: f64,
    pub resamples: usize,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// 95% percentile intervals; resample `r` draws from `stream_rng(seed, [r])`.
pub fn bootstrap_ci(samples: &[u64], t: f64, resamples: usize, seed: u64) -> Result<BootstrapCi> {
    if samples.is_empty() || resamples < 2 {
        return Err(Error::invalid("bootstrap needs samples and at least 2 resamples"));
    }
    let stats: Vec<(f64, f64)> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, &[0xb007, r as u64]);
            let draw: Vec<u64> = (0..samples.len())
                .map(|_| samples[rng.random_range(0..samples.len())])
                .collect();
            let pmf = EmpiricalPmf::from_samples(&draw).expect("non-empty");
            (sup_distance(&pmf, t), tv_to_poisson(&pmf, t).tv)
        })
        .collect();
    let mut sups: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let mut tvs: Vec<f64> = stats.iter().map(|s| s.1).collect();
    sups.sort_by(f64::total_cmp);
    tvs.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        sup_lo: quantile(&sups, 0.025),
        sup_hi: quantile(&sups, 0.975),
        tv_lo: quantile(&tvs, 0.025),
        tv_hi: quantile(&tvs, 0.975),
        resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn histogram_examples() {
        let p = EmpiricalPmf::from_samples(&[0, 0, 0, 0]).unwrap();
        assert_eq!(p.masses[0], 1.0);
        assert_eq!(p.masses.len(), 1 + HISTOGRAM_GUARD);
        let p = EmpiricalPmf::from_samples(&[1, 2, 1, 2]).unwrap();
        assert_eq!((p.masses[1], p.masses[2]), (0.5, 0.5));
        assert!(EmpiricalPmf::from_samples(&[]).is_err());
    }

    #[test]
    fn poisson_values() {
        assert!((poisson_pmf(1.0, 0) - (-1f64).exp()).abs() < 1e-15);
        assert!((poisson_pmf(1.0, 0) - 0.367_879_4).abs() < 1e-7);
        assert!((poisson_pmf(2.0, 2) - 0.270_670_6).abs() < 1e-7);
        let table = poisson_pmf_table(3.7, 40);
        for k in 0..40 {
            assert!((table[k + 1] / table[k] - 3.7 / (k + 1) as f64).abs() < 1e-12);
            assert!((table[k] - poisson_pmf(3.7, k as u64)).abs() < 1e-15);
        }
    }

    #[test]
    fn poisson_tail_matches_remainder() {
        for &t in &[0.5, 1.0, 2.0] {
            for k in 0..30u64 {
                let direct = 1.0 - poisson_pmf_table(t, k as usize).iter().sum::<f64>();
                let tail = poisson_tail(t, k);
                assert!((tail - direct).abs() < 1e-14, "t={t} k={k}");
                assert!(tail <= poisson_tail_bound(t, k) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn distances_examples() {
        let exact = EmpiricalPmf::from_masses(poisson_pmf_table(1.0, 50));
        assert!(sup_distance(&exact, 1.0) <= poisson_tail_bound(1.0, 50));
        assert!(poisson_tail_bound(1.0, 50) < 1e-63);
        let point = EmpiricalPmf::from_masses(vec![1.0]);
        assert!((sup_distance(&point, 1.0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
        let a = EmpiricalPmf::from_masses(vec![0.5, 0.5]);
        assert_eq!(tv_distance(&a, &[0.5, 0.5]).tv, 0.0);
        assert_eq!(tv_distance(&a, &[0.0, 0.0, 1.0]).tv, 1.0);
    }

    #[test]
    fn decay_fit_examples() {
        let rhos = [1e-2, 1e-3, 1e-4, 1e-5];
        let pts: Vec<(f64, f64)> = rhos.iter().map(|&r: &f64| (r, r.ln().abs().powi(-2))).collect();
        let fit = fit_log_decay(&pts).unwrap();
        assert!((fit.kappa_hat - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = rhos.iter().map(|&r| (r, 0.3)).collect();
        let fit = fit_log_decay(&pts).unwrap();
        assert!(fit.kappa_hat.abs() < 1e-12);
        let mut pts: Vec<(f64, f64)> = rhos.iter().map(|&r: &f64| (r, r.ln().abs().powi(-1))).collect();
        pts.push((1e-6, 0.0));
        let fit = fit_log_decay(&pts).unwrap();
        assert_eq!(fit.dropped, 1);
        assert!(fit_log_decay(&pts[..2]).is_err());
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let samples: Vec<u64> = (0..500).map(|i| (i * 7 % 5) as u64).collect();
        let a = bootstrap_ci(&samples, 2.0, 50, 9).unwrap();
        let b = bootstrap_ci(&samples, 2.0, 50, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.sup_lo <= a.sup_hi && a.tv_lo <= a.tv_hi);
    }

    fn simplex(v: Vec<f64>) -> Vec<f64> {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    }

    proptest! {
        #[test]
        fn tv_metric_axioms(
            a in prop::collection::vec(0.01f64..1.0, 6),
            b in prop::collection::vec(0.01f64..1.0, 6),
            c in prop::collection::vec(0.01f64..1.0, 6),
        ) {
            let (a, b, c) = (simplex(a), simplex(b), simplex(c));
            let pa = EmpiricalPmf::from_masses(a.clone());
            let pb = EmpiricalPmf::from_masses(b.clone());
            let dab = tv_distance(&pa, &b).tv;
            prop_assert!((dab - tv_distance(&pb, &a).tv).abs() < 1e-15);
            prop_assert!(tv_distance(&pa, &c).tv <= dab + tv_distance(&pb, &c).tv + 1e-15);
            prop_assert!((0.0..=1.0 + 1e-15).contains(&dab));
            prop_assert_eq!(tv_distance(&pa, &a).tv, 0.0);
        }

        #[test]
        fn sup_below_l1(a in prop::collection::vec(0.01f64..1.0, 1..12), t in 0.1f64..5.0) {
            let p = EmpiricalPmf::from_masses(simplex(a));
            prop_assert!(sup_distance(&p, t) <= tv_to_poisson(&p, t).l1 + 1e-15);
        }

        #[test]
        fn planted_exponent_recovered(kappa in 0.1f64..4.0, c in 0.01f64..10.0) {
            let pts: Vec<(f64, f64)> = [2f64.powi(-8), 2f64.powi(-10), 2f64.powi(-12), 2f64.powi(-14)]
                .iter()
                .map(|&r| (r, c * r.ln().abs().powf(-kappa)))
                .collect();
            let fit = fit_log_decay(&pts).unwrap();
            prop_assert!((fit.kappa_hat - kappa).abs() < 1e-9);
            prop_assert!(fit.r_squared > 1.0 - 1e-12);
        }
    }
}
