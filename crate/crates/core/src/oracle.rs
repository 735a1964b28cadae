//! Independent brute-force and Monte-Carlo references used by the test suite
//! and by the solver's feasibility pre-check.
//!
//! Nothing here reuses the quadrature evaluators from [`crate::channel`]:
//! mutual information is re-derived with Simpson integration on its own grid,
//! and the max-harvest linear program is solved by exact vertex enumeration.
//! The random stream is a pure counter-based SplitMix64 mapping, so a fixed
//! seed produces a bit-identical stream under any partitioning of the sample
//! index range.

use thiserror::Error;

use crate::channel::{AmplitudeChannel, ChannelModel, DiscreteDistribution, RealAwgnChannel};
use crate::numerics;

const LN2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, Error)]
pub enum OracleError {
    #[error("invalid Monte-Carlo spec: {0}")]
    InvalidSpec(String),
    #[error("linear program is infeasible: every grid cost exceeds the budget {budget}")]
    LpInfeasible { budget: f64 },
    #[error("grid too large for vertex enumeration: {0} points (cap 1000)")]
    GridTooLarge(usize),
    #[error("finite-difference step {0} outside [1e-8, 1e-4]")]
    BadStep(f64),
    #[error("reference point {index} carries too little mass ({prob}) for the step")]
    ThinReference { index: usize, prob: f64 },
}

/// Monte-Carlo sampling request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSpec {
    pub sample_count: usize,
    pub seed: u64,
}

impl McSpec {
    pub fn new(sample_count: usize, seed: u64) -> Result<Self, OracleError> {
        if sample_count == 0 {
            return Err(OracleError::InvalidSpec("sample_count must be >= 1".into()));
        }
        Ok(Self { sample_count, seed })
    }
}

/// SplitMix64 output for a (seed, counter) pair.
fn splitmix64(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Uniform in [2^-53, 1], 53-bit resolution (never exactly zero, so logs are
/// always finite).
fn unit(seed: u64, counter: u64) -> f64 {
    let v = splitmix64(seed, counter) >> 11;
    (v as f64 + 1.0) * (1.0 / 9007199254740992.0)
}

/// Box-Muller pair from two counters.
fn gaussian_pair(seed: u64, counter: u64) -> (f64, f64) {
    let u1 = unit(seed, counter);
    let u2 = unit(seed, counter + 1);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

fn sample_support_index(dist: &DiscreteDistribution, u: f64) -> usize {
    let mut acc = 0.0;
    for (j, &p) in dist.probs().iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    dist.len() - 1
}

fn ln_mixture_real(channel: &RealAwgnChannel, dist: &DiscreteDistribution, y: f64) -> f64 {
    let inv2s = 1.0 / (2.0 * channel.sigma_n2);
    let mut max = f64::NEG_INFINITY;
    for (&x, &p) in dist.support().iter().zip(dist.probs()) {
        if p <= 0.0 {
            continue;
        }
        let d = y - x * channel.h_i;
        let e = p.ln() - d * d * inv2s;
        if e > max {
            max = e;
        }
    }
    let mut sum = 0.0;
    for (&x, &p) in dist.support().iter().zip(dist.probs()) {
        if p <= 0.0 {
            continue;
        }
        let d = y - x * channel.h_i;
        sum += (p.ln() - d * d * inv2s - max).exp();
    }
    max + sum.ln() - 0.5 * (2.0 * std::f64::consts::PI * channel.sigma_n2).ln()
}

fn ln_rician(channel: &AmplitudeChannel, r: f64, big_r: f64) -> f64 {
    let nu = r * channel.h_i_mag;
    let s2 = channel.sigma_n2;
    let ln_i0 = numerics::log_bessel_i0(big_r * nu / s2).expect("non-negative argument");
    big_r.ln() - s2.ln() - (big_r * big_r + nu * nu) / (2.0 * s2) + ln_i0
}

fn ln_mixture_amplitude(
    channel: &AmplitudeChannel,
    dist: &DiscreteDistribution,
    big_r: f64,
) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut terms = Vec::with_capacity(dist.len());
    for (&r, &p) in dist.support().iter().zip(dist.probs()) {
        if p <= 0.0 {
            terms.push(f64::NEG_INFINITY);
            continue;
        }
        let e = p.ln() + ln_rician(channel, r, big_r);
        if e > max {
            max = e;
        }
        terms.push(e);
    }
    max + terms.iter().map(|e| (e - max).exp()).sum::<f64>().ln()
}

/// Monte-Carlo estimate of the mutual information in bits, with its sample
/// standard error. Deterministic for a fixed seed.
pub fn mc_mutual_information(
    channel: &ChannelModel,
    dist: &DiscreteDistribution,
    spec: &McSpec,
) -> (f64, f64) {
    let n = spec.sample_count;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    match channel {
        ChannelModel::Real(ch) => {
            let sigma = ch.noise_sigma();
            let cond = -0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * ch.sigma_n2).log2();
            for s in 0..n {
                let base = 4 * s as u64;
                let j = sample_support_index(dist, unit(spec.seed, base));
                let (z, _) = gaussian_pair(spec.seed, base + 1);
                let x = dist.support()[j];
                let y = x * ch.h_i + sigma * z;
                // log2 p(y|x) - log2 p(y;F), with the conditional entropy
                // term taken analytically.
                let d = y - x * ch.h_i;
                let v = cond - d * d / (2.0 * ch.sigma_n2) * std::f64::consts::LOG2_E
                    + 0.5 * std::f64::consts::LOG2_E
                    - ln_mixture_real(ch, dist, y) / LN2;
                sum += v;
                sum2 += v * v;
            }
        }
        ChannelModel::Amplitude(ch) => {
            let sigma = ch.noise_sigma();
            let const_bits = (std::f64::consts::E * ch.sigma_n2).log2();
            for s in 0..n {
                let base = 4 * s as u64;
                let j = sample_support_index(dist, unit(spec.seed, base));
                let (z1, z2) = gaussian_pair(spec.seed, base + 1);
                let r = dist.support()[j];
                let re = r * ch.h_i_mag + sigma * z1;
                let im = sigma * z2;
                let big_r = (re * re + im * im).sqrt();
                // per-sample -log2(f_R(R)/R) - log2(e sigma^2)
                let v = -(ln_mixture_amplitude(ch, dist, big_r) - big_r.ln()) / LN2 - const_bits;
                sum += v;
                sum2 += v * v;
            }
        }
    }
    let mean = sum / n as f64;
    let var = (sum2 / n as f64 - mean * mean).max(0.0);
    let se = (var / n as f64).sqrt();
    (mean, se)
}

/// Exact solution of `max sum p_i v_i` over `p >= 0, sum p = 1,
/// sum p_i c_i <= budget` (`c_i = grid_i^2`) by vertex enumeration: optimal
/// basic solutions are single points (budget slack) or pairs straddling the
/// budget (budget tight).
pub fn lp_max_harvest(
    grid: &[f64],
    p_values: &[f64],
    sigma2: f64,
) -> Result<(DiscreteDistribution, f64), OracleError> {
    assert_eq!(grid.len(), p_values.len());
    if grid.len() > 1000 {
        return Err(OracleError::GridTooLarge(grid.len()));
    }
    let costs: Vec<f64> = grid.iter().map(|x| x * x).collect();
    let mut best_val = f64::NEG_INFINITY;
    let mut best: Option<(Vec<f64>, Vec<f64>)> = None;
    // Single-point vertices.
    for i in 0..grid.len() {
        if costs[i] <= sigma2 * (1.0 + 1e-15) && p_values[i] > best_val {
            best_val = p_values[i];
            best = Some((vec![grid[i]], vec![1.0]));
        }
    }
    // Pair vertices with the budget tight.
    for i in 0..grid.len() {
        if costs[i] >= sigma2 {
            continue;
        }
        for j in 0..grid.len() {
            if costs[j] <= sigma2 {
                continue;
            }
            let q = (sigma2 - costs[i]) / (costs[j] - costs[i]);
            let val = (1.0 - q) * p_values[i] + q * p_values[j];
            if val > best_val {
                best_val = val;
                let (xi, xj) = (grid[i], grid[j]);
                let (mut sup, mut pr) = (vec![xi, xj], vec![1.0 - q, q]);
                if xj < xi {
                    sup.swap(0, 1);
                    pr.swap(0, 1);
                }
                best = Some((sup, pr));
            }
        }
    }
    let (support, probs) = best.ok_or(OracleError::LpInfeasible { budget: sigma2 })?;
    // Collapse a vanished side of a pair so the support stays strictly sorted.
    let (support, probs): (Vec<f64>, Vec<f64>) = support
        .iter()
        .zip(&probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&s, &p)| (s, p))
        .unzip();
    let dist = DiscreteDistribution::normalized(support, probs)
        .expect("vertex distribution is valid");
    Ok((dist, best_val))
}

/// Simpson rule over `[a, b]` with an odd number of samples.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n_req: usize) -> f64 {
    let n = if n_req % 2 == 0 { n_req + 1 } else { n_req };
    let h = (b - a) / (n - 1) as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n - 1 {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

fn simpson_points(width: f64, sigma: f64) -> usize {
    // Step no wider than sigma/4 resolves the Gaussian/Rician kernels.
    ((width / (sigma / 4.0)).ceil() as usize + 9).min(400_001)
}

/// Mutual information of a weighted point set on the real channel, derived
/// from the entropy integral with Simpson quadrature. Weights need not sum
/// to one; the conditional-entropy term scales with their total, which makes
/// the function usable for renormalization-free directional derivatives.
pub fn extended_mi_real(channel: &RealAwgnChannel, support: &[f64], weights: &[f64]) -> f64 {
    let sigma = channel.noise_sigma();
    let s = support.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let half = s * channel.h_i.abs() + 12.0 * sigma;
    let n = simpson_points(2.0 * half, sigma);
    let norm = 1.0 / (2.0 * std::f64::consts::PI * channel.sigma_n2).sqrt();
    let inv2s = 1.0 / (2.0 * channel.sigma_n2);
    let neg_h_y = simpson(
        |y| {
            let p: f64 = support
                .iter()
                .zip(weights)
                .map(|(&x, &w)| {
                    let d = y - x * channel.h_i;
                    w * norm * (-d * d * inv2s).exp()
                })
                .sum();
            if p > 0.0 {
                p * p.log2()
            } else {
                0.0
            }
        },
        -half,
        half,
        n,
    );
    let total: f64 = weights.iter().sum();
    -neg_h_y
        - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * channel.sigma_n2).log2() * total
}

/// Amplitude-channel counterpart of [`extended_mi_real`].
pub fn extended_mi_amplitude(channel: &AmplitudeChannel, support: &[f64], weights: &[f64]) -> f64 {
    let sigma = channel.noise_sigma();
    let s = support.iter().fold(0.0f64, |a, &x| a.max(x));
    let upper = s * channel.h_i_mag + 12.0 * sigma;
    let n = simpson_points(upper, sigma);
    let integral = simpson(
        |big_r| {
            if big_r <= 0.0 {
                return 0.0;
            }
            let f: f64 = support
                .iter()
                .zip(weights)
                .map(|(&r, &w)| {
                    if w > 0.0 {
                        w * ln_rician(channel, r, big_r).exp()
                    } else {
                        0.0
                    }
                })
                .sum();
            if f > 0.0 {
                f * (f.ln() - big_r.ln()) / LN2
            } else {
                0.0
            }
        },
        0.0,
        upper,
        n,
    );
    let total: f64 = weights.iter().sum();
    -integral - (std::f64::consts::E * channel.sigma_n2).log2() * total
}

/// Central finite difference of the mutual information along the
/// renormalization-free direction `e_index - e_ref_index`, in bits per unit
/// probability. Matches `i(x_index; F) - i(x_ref; F)` for an interior
/// distribution.
pub fn finite_difference_gradient(
    channel: &ChannelModel,
    dist: &DiscreteDistribution,
    index: usize,
    ref_index: usize,
    step: f64,
) -> Result<f64, OracleError> {
    if !(1e-8..=1e-4).contains(&step) {
        return Err(OracleError::BadStep(step));
    }
    let p_ref = dist.probs()[ref_index];
    if p_ref < 2.0 * step {
        return Err(OracleError::ThinReference {
            index: ref_index,
            prob: p_ref,
        });
    }
    let eval = |delta: f64| {
        let mut w = dist.probs().to_vec();
        w[index] += delta;
        w[ref_index] -= delta;
        match channel {
            ChannelModel::Real(ch) => extended_mi_real(ch, dist.support(), &w),
            ChannelModel::Amplitude(ch) => extended_mi_amplitude(ch, dist.support(), &w),
        }
    };
    Ok((eval(step) - eval(-step)) / (2.0 * step))
}
