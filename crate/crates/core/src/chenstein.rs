//! Poisson approximation for stationary binary processes.
//!
//! For `S = X_1 + … + X_N`, `N = ⌊t/ε⌋`, the distance between the law of `S`
//! and `Poi(t)` on a set `E` is bounded by
//! `6t·#(E ∩ [0,N])·(N(R₁+R₂) + pε) + 2t²/N`, where `R₁` measures
//! long-range dependence across a gap `p` and `R₂` short-range clustering.
//! For i.i.d. and two-state Markov models every quantity here is exact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{poisson_pmf_table, poisson_tail};

/// Largest `N` accepted by the exact dynamic programs.
pub const DP_BUDGET: u64 = 10_000;

const ROW_TOLERANCE: f64 = 1e-12;

/// A stationary `{0,1}`-valued process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinaryProcessModel {
    IidBernoulli {
        eps: f64,
    },
    /// `transition[a][b] = P(X_{n+1} = b | X_n = a)`. The initial law defaults
    /// to the stationary one; any other initial law is rejected.
    TwoStateMarkov {
        transition: [[f64; 2]; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<[f64; 2]>,
    },
    /// `M` independent trajectories, each of one common length.
    EmpiricalSamples {
        trajectories: Vec<Vec<u8>>,
    },
}

/// A validated two-state chain with its stationary law.
#[derive(Clone, Copy, Debug)]
struct Chain {
    p: [[f64; 2]; 2],
    pi: [f64; 2],
}

impl Chain {
    fn step(&self, v: [f64; 2]) -> [f64; 2] {
        [
            v[0] * self.p[0][0] + v[1] * self.p[1][0],
            v[0] * self.p[0][1] + v[1] * self.p[1][1],
        ]
    }

    /// Law of `(state, count)` after each of `len` steps of a window whose
    /// first symbol has law `start`; calls `visit(l, row)` with
    /// `row[c] = P(window of length l sums to c)`.
    fn window_sums(&self, start: [f64; 2], len: usize, mut visit: impl FnMut(usize, &[f64])) {
        let mut cur = [vec![0.0; len + 1], vec![0.0; len + 1]];
        cur[0][0] = start[0];
        cur[1][1] = start[1];
        let mut row = vec![0.0; len + 1];
        for l in 1..=len {
            for c in 0..=l {
                row[c] = cur[0][c] + cur[1][c];
            }
            visit(l, &row[..=l]);
            if l == len {
                break;
            }
            let mut next = [vec![0.0; len + 1], vec![0.0; len + 1]];
            for c in 0..=l {
                let (a, b) = (cur[0][c], cur[1][c]);
                next[0][c] += a * self.p[0][0] + b * self.p[1][0];
                next[1][c + 1] += a * self.p[0][1] + b * self.p[1][1];
            }
            cur = next;
        }
    }
}

impl BinaryProcessModel {
    pub fn iid(eps: f64) -> Result<Self> {
        let m = BinaryProcessModel::IidBernoulli { eps };
        m.validate()?;
        Ok(m)
    }

    pub fn markov(transition: [[f64; 2]; 2]) -> Result<Self> {
        let m = BinaryProcessModel::TwoStateMarkov {
            transition,
            initial: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn empirical(trajectories: Vec<Vec<u8>>) -> Result<Self> {
        let m = BinaryProcessModel::EmpiricalSamples { trajectories };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BinaryProcessModel::IidBernoulli { eps } => {
                if !(0.0..=1.0).contains(eps) {
                    return Err(Error::invalid(format!("ε = {eps} is not a probability")));
                }
            }
            BinaryProcessModel::TwoStateMarkov { .. } => {
                self.chain()?;
            }
            BinaryProcessModel::EmpiricalSamples { trajectories } => {
                let len = trajectories.first().map(Vec::len).unwrap_or(0);
                if len == 0 {
                    return Err(Error::invalid("empirical model needs non-empty trajectories"));
                }
                if trajectories.iter().any(|t| t.len() != len) {
                    return Err(Error::invalid("trajectories must share one length"));
                }
                if trajectories.iter().flatten().any(|&x| x > 1) {
                    return Err(Error::invalid("trajectories must be 0/1 valued"));
                }
            }
        }
        Ok(())
    }

    fn chain(&self) -> Result<Option<Chain>> {
        match *self {
            BinaryProcessModel::IidBernoulli { eps } => Ok(Some(Chain {
                p: [[1.0 - eps, eps], [1.0 - eps, eps]],
                pi: [1.0 - eps, eps],
            })),
            BinaryProcessModel::TwoStateMarkov { transition: p, initial } => {
                for row in &p {
                    if row.iter().any(|&v| !(0.0..=1.0).contains(&v))
                        || (row[0] + row[1] - 1.0).abs() > ROW_TOLERANCE
                    {
                        return Err(Error::invalid(format!("transition row {row:?} is not stochastic")));
                    }
                }
                let flow = p[0][1] + p[1][0];
                if flow == 0.0 {
                    return Err(Error::hypothesis(
                        "transition matrix is the identity: the stationary law is not unique",
                    ));
                }
                let pi = [p[1][0] / flow, p[0][1] / flow];
                if let Some(init) = initial {
                    if (init[0] - pi[0]).abs() > ROW_TOLERANCE || (init[1] - pi[1]).abs() > ROW_TOLERANCE {
                        return Err(Error::hypothesis(format!(
                            "initial law {init:?} differs from the stationary law {pi:?}; the process must be stationary"
                        )));
                    }
                }
                Ok(Some(Chain { p, pi }))
            }
            BinaryProcessModel::EmpiricalSamples { .. } => Ok(None),
        }
    }

    fn trajectories(&self) -> Option<&[Vec<u8>]> {
        match self {
            BinaryProcessModel::EmpiricalSamples { trajectories } => Some(trajectories),
            _ => None,
        }
    }
}

/// Law of `S = X_1 + … + X_N` as a vector over `0..=N`.
pub fn exact_s_pmf(model: &BinaryProcessModel, n: u64) -> Result<Vec<f64>> {
    let chain = model
        .chain()?
        .ok_or_else(|| Error::invalid("empirical samples have no exact law; use an empirical pmf"))?;
    if n == 0 || n > DP_BUDGET {
        return Err(Error::invalid(format!("N = {n} outside 1..={DP_BUDGET}")));
    }
    let mut out = Vec::new();
    chain.window_sums(chain.pi, n as usize, |l, row| {
        if l == n as usize {
            out = row.to_vec();
        }
    });
    Ok(out)
}

/// `ε = P(X_1 = 1)` with a standard error (zero for exact models).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsEstimate {
    pub value: f64,
    pub std_error: f64,
}

pub fn compute_eps(model: &BinaryProcessModel) -> Result<EpsEstimate> {
    if let Some(chain) = model.chain()? {
        return Ok(EpsEstimate {
            value: chain.pi[1],
            std_error: 0.0,
        });
    }
    let trajs = model.trajectories().expect("empirical model");
    model.validate()?;
    // Stationarity makes every position an unbiased sample of X_1.
    let means: Vec<f64> = trajs
        .iter()
        .map(|t| t.iter().map(|&x| x as f64).sum::<f64>() / t.len() as f64)
        .collect();
    let m = means.len() as f64;
    let value = means.iter().sum::<f64>() / m;
    let std_error = if means.len() >= 2 {
        (means.iter().map(|v| (v - value).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
    } else {
        (value * (1.0 - value) / trajs[0].len() as f64).sqrt()
    };
    Ok(EpsEstimate { value, std_error })
}

/// `R₁` with the grid point attaining it (`None` when the grid is empty).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct R1Value {
    pub value: f64,
    pub argmax: Option<(u64, u64)>,
}

impl R1Value {
    fn offer(&mut self, value: f64, j: u64, q: u64) {
        let better = match self.argmax {
            None => true,
            Some(best) => value > self.value || (value == self.value && (j, q) < best),
        };
        if better {
            self.value = value;
            self.argmax = Some((j, q));
        }
    }

    fn merge(mut self, other: R1Value) -> R1Value {
        if let Some((j, q)) = other.argmax {
            self.offer(other.value, j, q);
        }
        self
    }
}

/// `R₁ = sup_{0<j<N−p, 0<q<N−p−j} |P(X₁=1 ∧ S_{p+1}^{N−j}=q) − ε P(S_{p+1}^{N−j}=q)|`.
///
/// Ties go to the smallest `j`, then the smallest `q`.
pub fn compute_r1(model: &BinaryProcessModel, n: u64, p: u64) -> Result<R1Value> {
    if p < 2 {
        return Err(Error::invalid(format!("gap p = {p} must be at least 2")));
    }
    if p + 1 >= n {
        return Err(Error::invalid(format!(
            "gap p = {p} leaves no window for N = {n} (need p < N − 1)"
        )));
    }
    let empty = R1Value {
        value: 0.0,
        argmax: None,
    };
    // Window lengths L = N − p − j for j = 1..N−p−1.
    let max_len = (n - p - 1) as usize;
    match model {
        BinaryProcessModel::IidBernoulli { .. } => {
            model.validate()?;
            let mut r = empty;
            if max_len >= 2 {
                r.offer(0.0, 1, 1);
            }
            Ok(r)
        }
        BinaryProcessModel::TwoStateMarkov { .. } => {
            if n > DP_BUDGET {
                return Err(Error::invalid(format!("N = {n} exceeds the DP budget {DP_BUDGET}")));
            }
            let chain = model.chain()?.expect("markov");
            let eps = chain.pi[1];
            // Law of X_{p+1} given X_1 = 1, scaled by P(X_1 = 1).
            let mut joint = [0.0, eps];
            for _ in 0..p {
                joint = chain.step(joint);
            }
            let mut joint_rows: Vec<Vec<f64>> = Vec::with_capacity(max_len);
            chain.window_sums(joint, max_len, |_, row| joint_rows.push(row.to_vec()));
            let mut r = empty;
            chain.window_sums(chain.pi, max_len, |l, row| {
                let j = n - p - l as u64;
                for q in 1..l {
                    let d = (joint_rows[l - 1][q] - eps * row[q]).abs();
                    r.offer(d, j, q as u64);
                }
            });
            Ok(r)
        }
        BinaryProcessModel::EmpiricalSamples { trajectories } => {
            model.validate()?;
            if (trajectories[0].len() as u64) < n {
                return Err(Error::invalid(format!(
                    "trajectories of length {} are shorter than N = {n}",
                    trajectories[0].len()
                )));
            }
            let eps = compute_eps(model)?.value;
            let m = trajectories.len() as f64;
            let prefix: Vec<Vec<u32>> = trajectories
                .iter()
                .map(|t| {
                    let mut acc = 0;
                    std::iter::once(0)
                        .chain(t.iter().map(|&x| {
                            acc += x as u32;
                            acc
                        }))
                        .collect()
                })
                .collect();
            let r = (1..=max_len as u64)
                .into_par_iter()
                .map(|j| {
                    // Window covers positions p+1..=N−j (1-based).
                    let (lo, hi) = (p as usize, (n - j) as usize);
                    let len = hi - lo;
                    let mut both = vec![0u32; len + 1];
                    let mut all = vec![0u32; len + 1];
                    for (t, pre) in trajectories.iter().zip(&prefix) {
                        let w = (pre[hi] - pre[lo]) as usize;
                        all[w] += 1;
                        both[w] += t[0] as u32;
                    }
                    let mut r = empty;
                    for q in 1..len {
                        let d = (both[q] as f64 / m - eps * all[q] as f64 / m).abs();
                        r.offer(d, j, q as u64);
                    }
                    r
                })
                .reduce(|| empty, R1Value::merge);
            Ok(r)
        }
    }
}

/// `R₂ = Σ_{n=2}^{p} P(X₁ = 1 ∧ X_n = 1)`.
pub fn compute_r2(model: &BinaryProcessModel, p: u64) -> Result<f64> {
    if p < 2 {
        return Err(Error::invalid(format!("gap p = {p} must be at least 2")));
    }
    match model {
        BinaryProcessModel::IidBernoulli { eps } => {
            model.validate()?;
            Ok((p - 1) as f64 * eps * eps)
        }
        BinaryProcessModel::TwoStateMarkov { .. } => {
            let chain = model.chain()?.expect("markov");
            let mut v = [0.0, chain.pi[1]];
            let mut sum = 0.0;
            for _ in 2..=p {
                v = chain.step(v);
                sum += v[1];
            }
            Ok(sum)
        }
        BinaryProcessModel::EmpiricalSamples { trajectories } => {
            model.validate()?;
            if (trajectories[0].len() as u64) < p {
                return Err(Error::invalid(format!("trajectories shorter than p = {p}")));
            }
            let m = trajectories.len() as f64;
            Ok((1..p as usize)
                .map(|k| trajectories.iter().filter(|t| t[0] == 1 && t[k] == 1).count() as f64 / m)
                .sum())
        }
    }
}

/// Inputs of the explicit Chen–Stein bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub eps: f64,
    pub n: u64,
    pub t: f64,
    pub p: u64,
    pub r1: f64,
    pub r2: f64,
}

/// `6t·#E·(N(R₁+R₂) + pε) + 2t²/N`, where `e_size = #(E ∩ [0, N])`.
pub fn chen_stein_bound(inputs: &BoundInputs, e_size: u64) -> Result<f64> {
    let BoundInputs { eps, n, t, p, r1, r2 } = *inputs;
    if !(t > 0.0) {
        return Err(Error::invalid(format!("t = {t} must be positive")));
    }
    if !(eps < t / 2.0) {
        return Err(Error::hypothesis(format!("ε < t/2 fails: ε = {eps}, t = {t}")));
    }
    if p < 2 {
        return Err(Error::hypothesis(format!("2 ≤ p fails: p = {p}")));
    }
    if p >= n {
        return Err(Error::hypothesis(format!("p < N fails: p = {p}, N = {n}")));
    }
    if !(r1 >= 0.0 && r2 >= 0.0 && eps >= 0.0) {
        return Err(Error::invalid("ε, R₁ and R₂ must be non-negative"));
    }
    let nf = n as f64;
    Ok(6.0 * t * e_size as f64 * (nf * (r1 + r2) + p as f64 * eps) + 2.0 * t * t / nf)
}

/// Everything the bound needs for one model, plus the exact law when available.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChenSteinReport {
    pub model: BinaryProcessModel,
    pub eps: f64,
    pub eps_std_error: f64,
    pub n: u64,
    pub t_param: f64,
    pub p_gap: u64,
    pub r1: f64,
    pub r1_argmax: Option<(u64, u64)>,
    pub r2: f64,
    /// Bound for a single-point set `E`.
    pub bound_per_k: f64,
}

impl ChenSteinReport {
    pub fn compute(model: &BinaryProcessModel, t: f64, p: u64) -> Result<Self> {
        let eps = compute_eps(model)?;
        if !(eps.value > 0.0) {
            return Err(Error::hypothesis("ε = P(X₁ = 1) is zero; N = ⌊t/ε⌋ is undefined"));
        }
        let n = (t / eps.value).floor() as u64;
        Self::compute_with_n(model, t, p, n)
    }

    /// As [`compute`](Self::compute), with `N` supplied (it should equal `⌊t/ε⌋`
    /// up to rounding in `ε`).
    pub fn compute_with_n(model: &BinaryProcessModel, t: f64, p: u64, n: u64) -> Result<Self> {
        let eps = compute_eps(model)?;
        let r2 = compute_r2(model, p)?;
        let mut report = ChenSteinReport {
            model: model.clone(),
            eps: eps.value,
            eps_std_error: eps.std_error,
            n,
            t_param: t,
            p_gap: p,
            r1: 0.0,
            r1_argmax: None,
            r2,
            bound_per_k: 0.0,
        };
        // Check the hypotheses before the O(N²) work.
        chen_stein_bound(&report.inputs(), 1)?;
        let r1 = compute_r1(model, n, p)?;
        report.r1 = r1.value;
        report.r1_argmax = r1.argmax;
        report.bound_per_k = chen_stein_bound(&report.inputs(), 1)?;
        Ok(report)
    }

    pub fn inputs(&self) -> BoundInputs {
        BoundInputs {
            eps: self.eps,
            n: self.n,
            t: self.t_param,
            p: self.p_gap,
            r1: self.r1,
            r2: self.r2,
        }
    }

    /// Bound for a set `E` with `#(E ∩ [0, N]) = e_size`.
    pub fn bound_total(&self, e_size: u64) -> f64 {
        chen_stein_bound(&self.inputs(), e_size).expect("hypotheses checked at construction")
    }
}

/// Exact `Σ_k |Bin(N, t/N){k} − Poi(t){k}|` and the bound `2t²/N`.
pub fn binomial_poisson_tv(n: u64, t: f64) -> Result<(f64, f64)> {
    if n == 0 || !(t > 0.0) || t > n as f64 {
        return Err(Error::invalid(format!("need N ≥ 1 and 0 < t/N ≤ 1 (N = {n}, t = {t})")));
    }
    let binom = binomial_pmf(n, t / n as f64);
    let pois = poisson_pmf_table(t, n as usize);
    let body: f64 = binom.iter().zip(&pois).map(|(b, q)| (b - q).abs()).sum();
    Ok((body + poisson_tail(t, n), 2.0 * t * t / n as f64))
}

/// `Bin(N, π)` over `0..=N`, in log space.
pub fn binomial_pmf(n: u64, pi: f64) -> Vec<f64> {
    let n_us = n as usize;
    if pi <= 0.0 {
        let mut v = vec![0.0; n_us + 1];
        v[0] = 1.0;
        return v;
    }
    if pi >= 1.0 {
        let mut v = vec![0.0; n_us + 1];
        v[n_us] = 1.0;
        return v;
    }
    let (lp, lq) = (pi.ln(), (-pi).ln_1p());
    let mut log_c = 0.0;
    (0..=n)
        .map(|k| {
            if k > 0 {
                log_c += ((n - k + 1) as f64).ln() - (k as f64).ln();
            }
            (log_c + k as f64 * lp + (n - k) as f64 * lq).exp()
        })
        .collect()
}
