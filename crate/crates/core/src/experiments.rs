//! Monte Carlo checks of the sample-complexity tail bounds for empirical
//! modal decompositions, and of the local Chernoff exponent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd_oracle, Matrix};
use crate::modal::{build_cdm, build_quasi_cdm, check_k, max_modes};
use crate::prob::{JointPmf, Pmf};

/// SplitMix64 finaliser.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one trial: the base seed xor-ed with a mixed (stream, trial) index.
pub fn trial_seed(seed: u64, stream: u64, trial: u64) -> u64 {
    splitmix64(seed ^ splitmix64((stream << 32) ^ trial))
}

/// Multinomial counts drawn as a chain of conditional binomials.
pub fn sample_counts(probs: &[f64], n: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() {
            counts[i] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let c = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        counts[i] = c;
        remaining -= c;
        mass -= p;
    }
    counts
}

/// Empirical joint of `n` i.i.d. draws.
pub fn empirical_joint(joint: &JointPmf, n: u64, rng: &mut ChaCha8Rng) -> JointPmf {
    let counts = sample_counts(joint.probs.as_slice(), n, rng);
    let data = counts.iter().map(|&c| c as f64 / n as f64).collect();
    JointPmf {
        x: joint.x.clone(),
        y: joint.y.clone(),
        probs: Matrix::new(joint.nx(), joint.ny(), data).expect("sized buffer"),
    }
}

fn check_delta(delta: f64, max: f64) -> Result<()> {
    if !(0.0..=max).contains(&delta) {
        return Err(Error::DeltaOutOfRange { delta, max });
    }
    Ok(())
}

/// P(Σ_{i≤k} |σ̂_i − σ_i| ≥ δ) ≤ exp(¼ − p₀²δ²n/(8k)), for δ ≤ √(k/2)/p₀.
pub fn sigma_tail_bound(p0: f64, delta: f64, n: usize, k: usize) -> Result<f64> {
    let k = k as f64;
    check_delta(delta, (k / 2.0).sqrt() / p0)?;
    Ok((0.25 - p0 * p0 * delta * delta * n as f64 / (8.0 * k)).exp())
}

/// Same event: (|X|+|Y|) exp(−p₀δ²n/(4k²)), for δ ≤ k.
pub fn sigma_tail_bound_alt(p0: f64, delta: f64, n: usize, k: usize, nx: usize, ny: usize) -> Result<f64> {
    let kf = k as f64;
    check_delta(delta, kf)?;
    Ok((nx + ny) as f64 * (-p0 * delta * delta * n as f64 / (4.0 * kf * kf)).exp())
}

/// E[(Σ|σ̂_i − σ_i|)²] ≤ (6k + 8k ln(nk))/(p₀² n), valid when n ≥ 16 ln(4kn).
pub fn sigma_mse_bound(p0: f64, n: usize, k: usize) -> (f64, bool) {
    let (nf, kf) = (n as f64, k as f64);
    let bound = (6.0 * kf + 8.0 * kf * (nf * kf).ln()) / (p0 * p0 * nf);
    (bound, nf >= 16.0 * (4.0 * kf * nf).ln())
}

/// P(μ₂ ≥ δ) ≤ (|X|+|Y|) exp(−p₀δ²n/(64k²)), for δ ≤ 4k.
pub fn feature_tail_bound(p0: f64, delta: f64, n: usize, k: usize, nx: usize, ny: usize) -> Result<f64> {
    let kf = k as f64;
    check_delta(delta, 4.0 * kf)?;
    Ok((nx + ny) as f64 * (-p0 * delta * delta * n as f64 / (64.0 * kf * kf)).exp())
}

/// P(μ₂ ≥ δ) ≤ exp(¼ − p₀²δ²n/(128k)), for δ ≤ (4/p₀)/√(k/2).
pub fn feature_tail_bound_alt(p0: f64, delta: f64, n: usize, k: usize) -> Result<f64> {
    let kf = k as f64;
    check_delta(delta, (4.0 / p0) / (kf / 2.0).sqrt())?;
    Ok((0.25 - p0 * p0 * delta * delta * n as f64 / (128.0 * kf)).exp())
}

/// P(μ₂′ ≥ δ) ≤ (|X|+|Y|) exp(−p₀δ²n/(16k²)), for δ ≤ 2k; follows from
/// μ₂′ ≤ 2k‖B̃ − B̂‖₂ and the spectral-norm concentration of the quasi-CDM.
pub fn feature_alt_tail_bound(p0: f64, delta: f64, n: usize, k: usize, nx: usize, ny: usize) -> Result<f64> {
    let kf = k as f64;
    check_delta(delta, 2.0 * kf)?;
    Ok((nx + ny) as f64 * (-p0 * delta * delta * n as f64 / (16.0 * kf * kf)).exp())
}

/// P(|Î − I| ≥ δ) ≤ exp(¼ − p₀⁴δ²n/(8k)), for δ ≤ √(k/2)/p₀².
pub fn mi_tail_bound(p0: f64, delta: f64, n: usize, k: usize) -> Result<f64> {
    let kf = k as f64;
    check_delta(delta, (kf / 2.0).sqrt() / (p0 * p0))?;
    Ok((0.25 - p0.powi(4) * delta * delta * n as f64 / (8.0 * kf)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Σ_{i≤k} |σ̂_i − σ_i|.
    Sigma,
    /// Σ_{i≤k} σ_i² − ‖B̃ Ψ̂^X‖_F².
    Mu2,
    /// ‖diag(σ) − Ψ̂^Yᵀ B̃ Ψ̂^X‖_F.
    Mu2Prime,
    /// ½ Σ_{i≤k} (σ̂_i² − σ_i²), signed; tails use its absolute value.
    MiError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCell {
    pub n: usize,
    pub delta: f64,
    pub k: usize,
    pub frequency: f64,
    pub bound: f64,
    pub stderr: f64,
    pub trials: usize,
    pub within_bound: bool,
}

/// Per-n summary of the metric over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub mean_stderr: f64,
    pub mean_square: f64,
    pub max: f64,
    pub min: f64,
    /// Only for the σ metric: the MSE bound and whether its precondition holds.
    pub mse_bound: Option<f64>,
    pub mse_precondition: Option<bool>,
    /// Only for μ₂′: trials where μ₂′ > 2k‖B̃ − B̂‖₂.
    pub deterministic_violations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailExperimentReport {
    pub metric: Metric,
    pub k: usize,
    pub p0: f64,
    pub trials: usize,
    pub seed: u64,
    pub cells: Vec<TailCell>,
    pub summaries: Vec<SampleSummary>,
}

impl TailExperimentReport {
    pub fn all_within_bounds(&self) -> bool {
        self.cells.iter().all(|c| c.within_bound)
    }

    pub fn cell(&self, n: usize, delta: f64) -> Option<&TailCell> {
        self.cells.iter().find(|c| c.n == n && c.delta == delta)
    }
}

struct Truth {
    px: Pmf,
    py: Pmf,
    cdm: Matrix,
    sigmas: Vec<f64>,
    p0: f64,
}

fn truth(joint: &JointPmf, k: usize) -> Result<Truth> {
    check_k(k, max_modes(joint.nx(), joint.ny()))?;
    if joint.probs.as_slice().iter().any(|&p| p <= 0.0) {
        return Err(Error::InvalidArgument("joint must be strictly positive".into()));
    }
    let cdm = build_cdm(joint)?;
    let sigmas = svd_oracle(&cdm.matrix)?.sigma;
    let p0 = cdm.px.min_prob().min(cdm.py.min_prob());
    Ok(Truth {
        px: cdm.px,
        py: cdm.py,
        cdm: cdm.matrix,
        sigmas,
        p0,
    })
}

/// One trial: the metric value, and for μ₂′ whether the deterministic bound held.
fn trial_value(joint: &JointPmf, t: &Truth, k: usize, n: usize, metric: Metric, seed: u64) -> Result<(f64, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emp = empirical_joint(joint, n as u64, &mut rng);
    let q = build_quasi_cdm(&emp, &t.px, &t.py)?;
    let svd = svd_oracle(&q.matrix)?;
    Ok(match metric {
        Metric::Sigma => {
            let v = (0..k).map(|i| (svd.sigma[i] - t.sigmas[i]).abs()).sum();
            (v, true)
        }
        Metric::MiError => {
            let v = 0.5 * (0..k).map(|i| svd.sigma[i].powi(2) - t.sigmas[i].powi(2)).sum::<f64>();
            (v, true)
        }
        Metric::Mu2 => {
            let proj = t.cdm.matmul(&svd.v.leading_cols(k))?;
            let total: f64 = t.sigmas[..k].iter().map(|s| s * s).sum();
            (total - proj.frobenius_norm().powi(2), true)
        }
        Metric::Mu2Prime => {
            let m = svd
                .u
                .leading_cols(k)
                .transpose()
                .matmul(&t.cdm)?
                .matmul(&svd.v.leading_cols(k))?;
            let v = m.sub(&Matrix::from_diag(&t.sigmas[..k]))?.frobenius_norm();
            let gap = svd_oracle(&t.cdm.sub(&q.matrix)?)?.sigma[0];
            (v, v <= 2.0 * k as f64 * gap + 1e-12)
        }
    })
}

fn bound_for(metric: Metric, t: &Truth, delta: f64, n: usize, k: usize, nx: usize, ny: usize) -> Result<f64> {
    let p0 = t.p0;
    match metric {
        Metric::Sigma => {
            let main = sigma_tail_bound(p0, delta, n, k)?;
            Ok(match sigma_tail_bound_alt(p0, delta, n, k, nx, ny) {
                Ok(alt) => main.min(alt),
                Err(_) => main,
            })
        }
        Metric::Mu2 => {
            let main = feature_tail_bound(p0, delta, n, k, nx, ny)?;
            Ok(match feature_tail_bound_alt(p0, delta, n, k) {
                Ok(alt) => main.min(alt),
                Err(_) => main,
            })
        }
        Metric::Mu2Prime => feature_alt_tail_bound(p0, delta, n, k, nx, ny),
        Metric::MiError => mi_tail_bound(p0, delta, n, k),
    }
}

/// Runs `trials` independent empirical decompositions per sample size and
/// tabulates how often the metric reaches each δ.
pub fn run_tail_experiment(
    joint: &JointPmf,
    metric: Metric,
    n_grid: &[usize],
    delta_grid: &[f64],
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<TailExperimentReport> {
    if trials == 0 || n_grid.is_empty() || n_grid.contains(&0) {
        return Err(Error::InvalidArgument("need trials > 0 and positive sample sizes".into()));
    }
    let t = truth(joint, k)?;
    let (nx, ny) = (joint.nx(), joint.ny());
    // Validate every δ before sampling.
    for &d in delta_grid {
        bound_for(metric, &t, d, n_grid[0], k, nx, ny)?;
    }
    let mut cells = Vec::new();
    let mut summaries = Vec::new();
    for (ni, &n) in n_grid.iter().enumerate() {
        let values: Vec<(f64, bool)> = (0..trials)
            .into_par_iter()
            .map(|tr| trial_value(joint, &t, k, n, metric, trial_seed(seed, ni as u64, tr as u64)))
            .collect::<Result<_>>()?;
        let tf = trials as f64;
        for &delta in delta_grid {
            let hits = values.iter().filter(|v| v.0.abs() >= delta).count();
            let f = hits as f64 / tf;
            let stderr = (f * (1.0 - f) / tf).sqrt();
            let bound = bound_for(metric, &t, delta, n, k, nx, ny)?;
            cells.push(TailCell {
                n,
                delta,
                k,
                frequency: f,
                bound,
                stderr,
                trials,
                within_bound: f <= bound + 3.0 * stderr,
            });
        }
        let xs: Vec<f64> = values.iter().map(|v| v.0).collect();
        let mean = xs.iter().sum::<f64>() / tf;
        let var = if trials > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (tf - 1.0)
        } else {
            0.0
        };
        let (mse_bound, mse_precondition) = if metric == Metric::Sigma {
            let (b, ok) = sigma_mse_bound(t.p0, n, k);
            (Some(b), Some(ok))
        } else {
            (None, None)
        };
        summaries.push(SampleSummary {
            n,
            mean,
            mean_stderr: (var / tf).sqrt(),
            mean_square: xs.iter().map(|x| x * x).sum::<f64>() / tf,
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            mse_bound,
            mse_precondition,
            deterministic_violations: (metric == Metric::Mu2Prime)
                .then(|| values.iter().filter(|v| !v.1).count()),
        });
    }
    Ok(TailExperimentReport {
        metric,
        k,
        p0: t.p0,
        trials,
        seed,
        cells,
        summaries,
    })
}

pub fn mc_sigma_tail(
    joint: &JointPmf,
    n_grid: &[usize],
    delta_grid: &[f64],
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<TailExperimentReport> {
    run_tail_experiment(joint, Metric::Sigma, n_grid, delta_grid, k, trials, seed)
}

/// `metric` must be [`Metric::Mu2`] or [`Metric::Mu2Prime`].
pub fn mc_feature_quality(
    joint: &JointPmf,
    n_grid: &[usize],
    delta_grid: &[f64],
    k: usize,
    trials: usize,
    seed: u64,
    metric: Metric,
) -> Result<TailExperimentReport> {
    if !matches!(metric, Metric::Mu2 | Metric::Mu2Prime) {
        return Err(Error::InvalidArgument("feature quality metric must be mu2 or mu2-prime".into()));
    }
    run_tail_experiment(joint, metric, n_grid, delta_grid, k, trials, seed)
}

pub fn mc_mi_error(
    joint: &JointPmf,
    n_grid: &[usize],
    delta_grid: &[f64],
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<TailExperimentReport> {
    run_tail_experiment(joint, Metric::MiError, n_grid, delta_grid, k, trials, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffCell {
    pub gamma: f64,
    pub n: usize,
    /// ln P(|Ê/E − 1| ≥ γ), estimated by exponentially tilted sampling.
    pub log_prob: f64,
    /// (2/(γ²n)) ln P.
    pub normalized: f64,
    /// Relative standard error of the probability estimate.
    pub rel_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffReport {
    /// −(E h)² / Var h.
    pub limit: f64,
    pub trials: usize,
    pub seed: u64,
    pub cells: Vec<ChernoffCell>,
    /// |normalized − limit| / |limit| at the smallest γ and largest n.
    pub relative_error: f64,
    /// Whether the distance to the limit shrinks with n at the smallest γ.
    pub monotone_in_n: bool,
}

struct Tilt<'a> {
    h: &'a [f64],
    p: &'a [f64],
}

impl Tilt<'_> {
    /// (log-partition Λ(θ), tilted mean).
    fn eval(&self, theta: f64) -> (f64, f64) {
        let top = self.h.iter().map(|&v| theta * v).fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        let mut m = 0.0;
        for (&v, &q) in self.h.iter().zip(self.p) {
            if q <= 0.0 {
                continue;
            }
            let w = q * (theta * v - top).exp();
            z += w;
            m += w * v;
        }
        (top + z.ln(), m / z)
    }

    fn tilted(&self, theta: f64) -> Vec<f64> {
        let (lam, _) = self.eval(theta);
        self.h
            .iter()
            .zip(self.p)
            .map(|(&v, &q)| if q > 0.0 { q * (theta * v - lam).exp() } else { 0.0 })
            .collect()
    }

    /// θ with tilted mean equal to `target`, searched on the side `sign`.
    fn solve(&self, target: f64, sign: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = sign;
        while (self.eval(hi).1 - target) * sign < 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi.abs() > 1e6 {
                break;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (self.eval(mid).1 - target) * sign < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn log_mean_exp(logs: &[f64], count: usize) -> f64 {
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return f64::NEG_INFINITY;
    }
    let s: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    top + (s / count as f64).ln()
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Estimates P(|Ê_n/E − 1| ≥ γ) for the empirical mean Ê_n of h(Z) over
/// n i.i.d. draws from `p`, using importance sampling tilted to each boundary.
pub fn chernoff_local(
    h: &[f64],
    p: &Pmf,
    gammas: &[f64],
    ns: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ChernoffReport> {
    if h.len() != p.len() {
        return Err(Error::ShapeMismatch("feature and distribution differ in size".into()));
    }
    if trials == 0 || gammas.is_empty() || ns.is_empty() {
        return Err(Error::InvalidArgument("need trials, gammas and sample sizes".into()));
    }
    let mean = p.expect(h);
    let var = p.expect(&h.iter().map(|v| (v - mean).powi(2)).collect::<Vec<_>>());
    if mean.abs() < 1e-15 {
        return Err(Error::ZeroMeanFeature);
    }
    if !(var > 0.0) {
        return Err(Error::InvalidArgument("feature has zero variance".into()));
    }
    let limit = -mean * mean / var;
    let tilt = Tilt { h, p: &p.probs };
    let hmax = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hmin = h.iter().copied().fold(f64::INFINITY, f64::min);
    let mut cells = Vec::new();
    for (gi, &gamma) in gammas.iter().enumerate() {
        let a = mean * (1.0 + gamma);
        let b = mean * (1.0 - gamma);
        let (upper, lower) = (a.max(b), a.min(b));
        for (ni, &n) in ns.iter().enumerate() {
            let stream = ((gi as u64) << 16) | ni as u64;
            let mut log_p = f64::NEG_INFINITY;
            let mut var_rel = 0.0;
            for (side, threshold, sign) in [(0u64, upper, 1.0), (1u64, lower, -1.0)] {
                let reachable = if sign > 0.0 { threshold < hmax } else { threshold > hmin };
                if !reachable {
                    continue;
                }
                let theta = tilt.solve(threshold, sign);
                let (lam, _) = tilt.eval(theta);
                let q = tilt.tilted(theta);
                let nf = n as f64;
                let slack = 1e-12 * threshold.abs().max(1.0);
                let logs: Vec<f64> = (0..trials)
                    .into_par_iter()
                    .map(|tr| {
                        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, (stream << 1) | side, tr as u64));
                        let counts = sample_counts(&q, n as u64, &mut rng);
                        let s: f64 = counts.iter().zip(h).map(|(&c, &v)| c as f64 * v).sum();
                        let hit = if sign > 0.0 { s / nf >= threshold - slack } else { s / nf <= threshold + slack };
                        if hit {
                            -theta * s + nf * lam
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect();
                let lm = log_mean_exp(&logs, trials);
                if lm.is_finite() {
                    let second = log_mean_exp(&logs.iter().map(|l| 2.0 * l).collect::<Vec<_>>(), trials);
                    let rel_var = ((second - 2.0 * lm).exp() - 1.0).max(0.0) / trials as f64;
                    // Combine relative variances weighted by each side's share.
                    let share_new = (lm - log_add(log_p, lm)).exp();
                    var_rel = var_rel * (1.0 - share_new).powi(2) + rel_var * share_new.powi(2);
                }
                log_p = log_add(log_p, lm);
            }
            cells.push(ChernoffCell {
                gamma,
                n,
                log_prob: log_p,
                normalized: 2.0 * log_p / (gamma * gamma * n as f64),
                rel_stderr: var_rel.sqrt(),
            });
        }
    }
    let gmin = gammas.iter().copied().fold(f64::INFINITY, f64::min);
    let nmax = *ns.iter().max().unwrap();
    let mut at_gmin: Vec<&ChernoffCell> = cells.iter().filter(|c| c.gamma == gmin).collect();
    at_gmin.sort_by_key(|c| c.n);
    let dist = |c: &ChernoffCell| (c.normalized - limit).abs();
    let monotone_in_n = at_gmin.windows(2).all(|w| dist(w[1]) <= dist(w[0]) + 1e-12);
    let best = at_gmin.iter().find(|c| c.n == nmax).expect("grid cell present");
    Ok(ChernoffReport {
        limit,
        trials,
        seed,
        relative_error: dist(best) / limit.abs(),
        cells,
        monotone_in_n,
    })
}
