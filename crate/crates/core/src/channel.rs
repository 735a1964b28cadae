//! Information-theoretic kernels for the scalar AWGN channel with discrete
//! inputs, and for complex signalling reduced to an amplitude channel through
//! the Rician kernel.
//!
//! Everything is evaluated in the log domain: output densities via
//! log-sum-exp, the Rician kernel through `ln I0`, so that high-SNR and
//! near-saturation operating points never overflow.
//!
//! Besides the per-point operations, this module provides batched evaluators
//! ([`RealInfoEvaluator`], [`AmplitudeInfoEvaluator`]) that precompute the
//! likelihood matrix on a shared output grid. The solver iterates on those;
//! they agree with the per-point operations to quadrature accuracy.

use thiserror::Error;

use crate::numerics::{self, QuadratureSpec};

/// Default number of quadrature nodes for output-space integrals.
pub const DEFAULT_QUAD_NODES: usize = 2048;

const LN2: f64 = std::f64::consts::LN_2;
/// log2(e)
pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

#[derive(Debug, Clone, Error)]
pub enum ChannelError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
}

/// A discrete input distribution: strictly increasing support points with
/// non-negative probabilities summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self, ChannelError> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(ChannelError::InvalidDistribution(format!(
                "support/probability lengths {} vs {}",
                support.len(),
                probs.len()
            )));
        }
        for w in support.windows(2) {
            if !(w[0] < w[1]) {
                return Err(ChannelError::InvalidDistribution(format!(
                    "support not strictly increasing at {} >= {}",
                    w[0], w[1]
                )));
            }
        }
        let mut total = 0.0;
        for &p in &probs {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(ChannelError::InvalidDistribution(format!(
                    "probability {p} is not a finite non-negative number"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(ChannelError::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        if support.iter().any(|x| !x.is_finite()) {
            return Err(ChannelError::InvalidDistribution(
                "support contains non-finite points".into(),
            ));
        }
        Ok(Self { support, probs })
    }

    /// Build from non-negative weights, rescaling them to sum to one.
    pub fn normalized(support: Vec<f64>, weights: Vec<f64>) -> Result<Self, ChannelError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(ChannelError::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        let probs = weights.iter().map(|w| w / total).collect();
        Self::new(support, probs)
    }

    pub fn point_mass(x: f64) -> Self {
        Self {
            support: vec![x],
            probs: vec![1.0],
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Expectation of an arbitrary function of the input.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .map(|(&x, &p)| p * f(x))
            .sum()
    }

    /// Second moment E[x^2].
    pub fn mean_square(&self) -> f64 {
        self.expectation(|x| x * x)
    }

    pub fn max_abs_support(&self) -> f64 {
        self.support
            .iter()
            .fold(0.0f64, |acc, &x| acc.max(x.abs()))
    }

    /// Total-variation distance against another distribution on the merged
    /// support (zero probability where a point is absent).
    pub fn total_variation(&self, other: &DiscreteDistribution) -> f64 {
        let mut i = 0;
        let mut j = 0;
        let mut tv = 0.0;
        while i < self.len() || j < other.len() {
            if j >= other.len() || (i < self.len() && self.support[i] < other.support[j]) {
                tv += self.probs[i];
                i += 1;
            } else if i >= self.len() || other.support[j] < self.support[i] {
                tv += other.probs[j];
                j += 1;
            } else {
                tv += (self.probs[i] - other.probs[j]).abs();
                i += 1;
                j += 1;
            }
        }
        0.5 * tv
    }
}

/// Real scalar AWGN channel `y = h_i x + n`, `n ~ N(0, sigma_n2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealAwgnChannel {
    pub h_i: f64,
    pub sigma_n2: f64,
}

impl RealAwgnChannel {
    pub fn new(h_i: f64, sigma_n2: f64) -> Result<Self, ChannelError> {
        if h_i == 0.0 || !h_i.is_finite() {
            return Err(ChannelError::InvalidChannel(format!(
                "channel gain {h_i} must be finite and non-zero"
            )));
        }
        if !(sigma_n2 > 0.0) || !sigma_n2.is_finite() {
            return Err(ChannelError::InvalidChannel(format!(
                "noise power {sigma_n2} must be positive"
            )));
        }
        Ok(Self { h_i, sigma_n2 })
    }

    pub fn noise_sigma(&self) -> f64 {
        self.sigma_n2.sqrt()
    }

    /// Mixture output density p(y; F).
    pub fn output_pdf(&self, dist: &DiscreteDistribution, y: f64) -> f64 {
        let norm = 1.0 / (2.0 * std::f64::consts::PI * self.sigma_n2).sqrt();
        dist.support
            .iter()
            .zip(&dist.probs)
            .map(|(&x, &p)| {
                let d = y - x * self.h_i;
                p * norm * (-d * d / (2.0 * self.sigma_n2)).exp()
            })
            .sum()
    }

    /// log2 of the mixture output density, via log-sum-exp.
    pub fn log2_output_pdf(&self, dist: &DiscreteDistribution, y: f64) -> f64 {
        let inv2s = 1.0 / (2.0 * self.sigma_n2);
        let mut max = f64::NEG_INFINITY;
        for (&x, &p) in dist.support.iter().zip(&dist.probs) {
            if p <= 0.0 {
                continue;
            }
            let d = y - x * self.h_i;
            let e = p.ln() - d * d * inv2s;
            if e > max {
                max = e;
            }
        }
        let mut sum = 0.0;
        for (&x, &p) in dist.support.iter().zip(&dist.probs) {
            if p <= 0.0 {
                continue;
            }
            let d = y - x * self.h_i;
            sum += (p.ln() - d * d * inv2s - max).exp();
        }
        (max + sum.ln() - 0.5 * (2.0 * std::f64::consts::PI * self.sigma_n2).ln()) / LN2
    }

    /// Marginal information density `i(x; F)` in bits, by fixed quadrature
    /// over `y` in `x h +- (10 sigma + S |h|)` where `S` covers both the
    /// distribution support and `x` itself.
    pub fn marginal_info_density(
        &self,
        dist: &DiscreteDistribution,
        x: f64,
        quad_nodes: usize,
    ) -> f64 {
        let sigma = self.noise_sigma();
        let s = dist.max_abs_support().max(x.abs());
        let half = 10.0 * sigma + s * self.h_i.abs();
        let mean = x * self.h_i;
        let spec = QuadratureSpec::new(
            effective_nodes(quad_nodes, 2.0 * half, sigma),
            mean - half,
            mean + half,
        )
        .expect("window is non-degenerate");
        let (nodes, weights) = numerics::quadrature_nodes(&spec);
        let norm = 1.0 / (2.0 * std::f64::consts::PI * self.sigma_n2).sqrt();
        let inv2s = 1.0 / (2.0 * self.sigma_n2);
        let mut cross = 0.0;
        for (&y, &w) in nodes.iter().zip(&weights) {
            let d = y - mean;
            let k = norm * (-d * d * inv2s).exp();
            if k > 0.0 {
                cross += w * k * self.log2_output_pdf(dist, y);
            }
        }
        -0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * self.sigma_n2).log2() - cross
    }

    /// Mutual information `I(F) = sum_i p_i i(x_i; F)` in bits.
    pub fn mutual_information(&self, dist: &DiscreteDistribution, quad_nodes: usize) -> f64 {
        let mut eval = RealInfoEvaluator::new(*self, dist.support(), dist.max_abs_support(), quad_nodes);
        eval.set_probs(dist.probs());
        eval.mutual_information(dist.probs())
    }
}

/// Amplitude channel of complex signalling: input `r >= 0`, output amplitude
/// `R` with the Rician conditional kernel; `sigma_n2` is per dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeChannel {
    pub h_i_mag: f64,
    pub sigma_n2: f64,
}

impl AmplitudeChannel {
    pub fn new(h_i_mag: f64, sigma_n2: f64) -> Result<Self, ChannelError> {
        if !(h_i_mag > 0.0) || !h_i_mag.is_finite() {
            return Err(ChannelError::InvalidChannel(format!(
                "channel gain magnitude {h_i_mag} must be positive"
            )));
        }
        if !(sigma_n2 > 0.0) || !sigma_n2.is_finite() {
            return Err(ChannelError::InvalidChannel(format!(
                "noise power {sigma_n2} must be positive"
            )));
        }
        Ok(Self { h_i_mag, sigma_n2 })
    }

    pub fn noise_sigma(&self) -> f64 {
        self.sigma_n2.sqrt()
    }

    fn ln_kernel(&self, r: f64, big_r: f64) -> f64 {
        if big_r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let nu = r * self.h_i_mag;
        let arg = big_r * nu / self.sigma_n2;
        let ln_i0 = numerics::log_bessel_i0(arg).expect("non-negative argument");
        big_r.ln() - self.sigma_n2.ln() - (big_r * big_r + nu * nu) / (2.0 * self.sigma_n2) + ln_i0
    }

    /// Rician conditional density `K(r, R)` of the output amplitude.
    pub fn rician_kernel(&self, r: f64, big_r: f64) -> f64 {
        assert!(r >= 0.0 && big_r >= 0.0, "amplitudes must be non-negative");
        if big_r == 0.0 {
            return 0.0;
        }
        self.ln_kernel(r, big_r).exp()
    }

    /// Mixture output amplitude density `f_R(R; F_r)`.
    pub fn output_pdf(&self, dist: &DiscreteDistribution, big_r: f64) -> f64 {
        dist.support
            .iter()
            .zip(&dist.probs)
            .map(|(&r, &p)| p * self.rician_kernel(r, big_r))
            .sum()
    }

    fn ln_output_pdf(&self, dist: &DiscreteDistribution, big_r: f64) -> f64 {
        let mut max = f64::NEG_INFINITY;
        let mut es = Vec::with_capacity(dist.len());
        for (&r, &p) in dist.support.iter().zip(&dist.probs) {
            if p <= 0.0 {
                es.push(f64::NEG_INFINITY);
                continue;
            }
            let e = p.ln() + self.ln_kernel(r, big_r);
            if e > max {
                max = e;
            }
            es.push(e);
        }
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        max + es.iter().map(|e| (e - max).exp()).sum::<f64>().ln()
    }

    /// Marginal information density `i(r; F_r)` in bits:
    /// `-int K(r,R) log2(f_R(R)/R) dR - log2(e sigma_n2)`.
    pub fn marginal_info_density(
        &self,
        dist: &DiscreteDistribution,
        r: f64,
        quad_nodes: usize,
    ) -> f64 {
        let sigma = self.noise_sigma();
        let s = dist.max_abs_support().max(r);
        let upper = s * self.h_i_mag + 10.0 * sigma;
        let spec = QuadratureSpec::new(
            effective_nodes(quad_nodes, upper, sigma),
            0.0,
            upper,
        )
        .expect("window is non-degenerate");
        let (nodes, weights) = numerics::quadrature_nodes(&spec);
        let mut cross = 0.0;
        for (&big_r, &w) in nodes.iter().zip(&weights) {
            let k = self.rician_kernel(r, big_r);
            if k > 0.0 {
                let g = (self.ln_output_pdf(dist, big_r) - big_r.ln()) / LN2;
                cross += w * k * g;
            }
        }
        -cross - (std::f64::consts::E * self.sigma_n2).log2()
    }

    /// Mutual information of the complex channel for an amplitude
    /// distribution, in bits per channel use.
    pub fn mutual_information(&self, dist: &DiscreteDistribution, quad_nodes: usize) -> f64 {
        let mut eval =
            AmplitudeInfoEvaluator::new(*self, dist.support(), dist.max_abs_support(), quad_nodes);
        eval.set_probs(dist.probs());
        eval.mutual_information(dist.probs())
    }
}

/// Either side of the capacity problem: real scalar signalling or complex
/// signalling reduced to its amplitude channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    Real(RealAwgnChannel),
    Amplitude(AmplitudeChannel),
}

impl ChannelModel {
    pub fn noise_sigma(&self) -> f64 {
        match self {
            ChannelModel::Real(c) => c.noise_sigma(),
            ChannelModel::Amplitude(c) => c.noise_sigma(),
        }
    }

    /// Input domain lower edge for a peak amplitude `a`: `-a` for real
    /// signalling, `0` for the amplitude channel.
    pub fn domain_lower(&self, a: f64) -> f64 {
        match self {
            ChannelModel::Real(_) => -a,
            ChannelModel::Amplitude(_) => 0.0,
        }
    }

    /// Mutual information of a distribution under this channel, in bits.
    pub fn mutual_information(&self, dist: &DiscreteDistribution, quad_nodes: usize) -> f64 {
        match self {
            ChannelModel::Real(c) => c.mutual_information(dist, quad_nodes),
            ChannelModel::Amplitude(c) => c.mutual_information(dist, quad_nodes),
        }
    }
}

/// Choose a node count that both honours the requested budget and resolves
/// the noise scale (panels no wider than 1.5 sigma).
fn effective_nodes(requested: usize, width: f64, sigma: f64) -> usize {
    let panels = (width / (1.5 * sigma)).ceil().min(65536.0) as usize + 1;
    requested.max(16 * panels)
}

const UNDERFLOW_FLOOR: f64 = 1e-290;

/// Batched marginal-information evaluator for the real channel on a shared
/// output grid. Build once per (channel, support) pair, call
/// [`Self::set_probs`] whenever the probability vector changes.
#[derive(Debug, Clone)]
pub struct RealInfoEvaluator {
    channel: RealAwgnChannel,
    support: Vec<f64>,
    y_nodes: Vec<f64>,
    y_weights: Vec<f64>,
    /// Row-major likelihood matrix: kernel[j * nodes + n] = N(y_n; x_j h, s2).
    kernel: Vec<f64>,
    log2p: Vec<f64>,
    wlog2p: Vec<f64>,
    neg_cond_entropy: f64,
    ln_norm: f64,
}

impl RealInfoEvaluator {
    /// `domain_max` is the largest |x| the evaluator will be queried at; the
    /// shared window covers `+-(domain_max |h| + 10 sigma)`.
    pub fn new(
        channel: RealAwgnChannel,
        support: &[f64],
        domain_max: f64,
        quad_nodes: usize,
    ) -> Self {
        let sigma = channel.noise_sigma();
        let s = domain_max.max(support.iter().fold(0.0f64, |a, &x| a.max(x.abs())));
        let half = s * channel.h_i.abs() + 10.0 * sigma;
        let spec = QuadratureSpec::new(
            effective_nodes(quad_nodes, 2.0 * half, sigma),
            -half,
            half,
        )
        .expect("window is non-degenerate");
        let (y_nodes, y_weights) = numerics::quadrature_nodes(&spec);
        let n = y_nodes.len();
        let ln_norm = -0.5 * (2.0 * std::f64::consts::PI * channel.sigma_n2).ln();
        let inv2s = 1.0 / (2.0 * channel.sigma_n2);
        let mut kernel = vec![0.0; support.len() * n];
        for (j, &x) in support.iter().enumerate() {
            let mean = x * channel.h_i;
            let row = &mut kernel[j * n..(j + 1) * n];
            for (k, &y) in y_nodes.iter().enumerate() {
                let d = y - mean;
                row[k] = (ln_norm - d * d * inv2s).exp();
            }
        }
        let neg_cond_entropy =
            -0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * channel.sigma_n2).log2();
        Self {
            channel,
            support: support.to_vec(),
            y_nodes,
            y_weights,
            kernel,
            log2p: vec![0.0; n],
            wlog2p: vec![0.0; n],
            neg_cond_entropy,
            ln_norm,
        }
    }

    pub fn node_count(&self) -> usize {
        self.y_nodes.len()
    }

    /// Recompute the output log-density for a new probability vector.
    pub fn set_probs(&mut self, probs: &[f64]) {
        assert_eq!(probs.len(), self.support.len());
        let n = self.y_nodes.len();
        let mut p_out = vec![0.0f64; n];
        for (j, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let row = &self.kernel[j * n..(j + 1) * n];
            for (acc, &k) in p_out.iter_mut().zip(row) {
                *acc += p * k;
            }
        }
        let inv2s = 1.0 / (2.0 * self.channel.sigma_n2);
        for (k, &p) in p_out.iter().enumerate() {
            let ln_p = if p > UNDERFLOW_FLOOR {
                p.ln()
            } else {
                // Far tail: the direct sum underflowed, redo this node in
                // log space.
                let y = self.y_nodes[k];
                let mut max = f64::NEG_INFINITY;
                for (j, &pj) in probs.iter().enumerate() {
                    if pj <= 0.0 {
                        continue;
                    }
                    let d = y - self.support[j] * self.channel.h_i;
                    let e = pj.ln() - d * d * inv2s;
                    if e > max {
                        max = e;
                    }
                }
                let mut sum = 0.0;
                for (j, &pj) in probs.iter().enumerate() {
                    if pj <= 0.0 {
                        continue;
                    }
                    let d = y - self.support[j] * self.channel.h_i;
                    sum += (pj.ln() - d * d * inv2s - max).exp();
                }
                max + sum.ln() + self.ln_norm
            };
            self.log2p[k] = ln_p / LN2;
            self.wlog2p[k] = self.y_weights[k] * self.log2p[k];
        }
    }

    /// i(x_j; F) for every support point, using the log-density installed by
    /// the last [`Self::set_probs`] call.
    pub fn info_densities(&self) -> Vec<f64> {
        let n = self.y_nodes.len();
        self.support
            .iter()
            .enumerate()
            .map(|(j, _)| {
                let row = &self.kernel[j * n..(j + 1) * n];
                let cross: f64 = row.iter().zip(&self.wlog2p).map(|(&k, &w)| k * w).sum();
                self.neg_cond_entropy - cross
            })
            .collect()
    }

    /// i(x; F) at an arbitrary point inside the evaluator domain.
    pub fn info_density_at(&self, x: f64) -> f64 {
        let mean = x * self.channel.h_i;
        let inv2s = 1.0 / (2.0 * self.channel.sigma_n2);
        let mut cross = 0.0;
        for ((&y, &w), &l2p) in self
            .y_nodes
            .iter()
            .zip(&self.y_weights)
            .zip(&self.log2p)
        {
            let d = y - mean;
            let k = (self.ln_norm - d * d * inv2s).exp();
            cross += w * k * l2p;
        }
        self.neg_cond_entropy - cross
    }

    pub fn mutual_information(&self, probs: &[f64]) -> f64 {
        self.info_densities()
            .iter()
            .zip(probs)
            .map(|(&i, &p)| p * i)
            .sum()
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.y_weights
    }

    pub fn kernel_row(&self, j: usize) -> &[f64] {
        let n = self.y_nodes.len();
        &self.kernel[j * n..(j + 1) * n]
    }

    /// Output density at the quadrature nodes for the probabilities installed
    /// by the last [`Self::set_probs`] call.
    pub fn output_density_nodes(&self) -> Vec<f64> {
        self.log2p.iter().map(|l| (l * LN2).exp()).collect()
    }
}

/// Batched marginal-information evaluator for the amplitude channel.
#[derive(Debug, Clone)]
pub struct AmplitudeInfoEvaluator {
    channel: AmplitudeChannel,
    support: Vec<f64>,
    r_nodes: Vec<f64>,
    r_weights: Vec<f64>,
    kernel: Vec<f64>,
    /// log2(f_R(R_n)/R_n) after `set_probs`.
    glog2: Vec<f64>,
    wglog2: Vec<f64>,
    const_bits: f64,
}

impl AmplitudeInfoEvaluator {
    pub fn new(
        channel: AmplitudeChannel,
        support: &[f64],
        domain_max: f64,
        quad_nodes: usize,
    ) -> Self {
        let sigma = channel.noise_sigma();
        let s = domain_max.max(support.iter().fold(0.0f64, |a, &x| a.max(x.abs())));
        let upper = s * channel.h_i_mag + 10.0 * sigma;
        let spec = QuadratureSpec::new(effective_nodes(quad_nodes, upper, sigma), 0.0, upper)
            .expect("window is non-degenerate");
        let (r_nodes, r_weights) = numerics::quadrature_nodes(&spec);
        let n = r_nodes.len();
        let mut kernel = vec![0.0; support.len() * n];
        for (j, &r) in support.iter().enumerate() {
            let row = &mut kernel[j * n..(j + 1) * n];
            for (k, &big_r) in r_nodes.iter().enumerate() {
                row[k] = channel.ln_kernel(r, big_r).exp();
            }
        }
        Self {
            channel,
            support: support.to_vec(),
            r_nodes,
            r_weights,
            kernel,
            glog2: vec![0.0; n],
            wglog2: vec![0.0; n],
            const_bits: (std::f64::consts::E * channel.sigma_n2).log2(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.r_nodes.len()
    }

    pub fn set_probs(&mut self, probs: &[f64]) {
        assert_eq!(probs.len(), self.support.len());
        let n = self.r_nodes.len();
        let mut f_out = vec![0.0f64; n];
        for (j, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let row = &self.kernel[j * n..(j + 1) * n];
            for (acc, &k) in f_out.iter_mut().zip(row) {
                *acc += p * k;
            }
        }
        for (k, &f) in f_out.iter().enumerate() {
            let big_r = self.r_nodes[k];
            let ln_f = if f > UNDERFLOW_FLOOR {
                f.ln()
            } else {
                let mut max = f64::NEG_INFINITY;
                for (j, &pj) in probs.iter().enumerate() {
                    if pj <= 0.0 {
                        continue;
                    }
                    let e = pj.ln() + self.channel.ln_kernel(self.support[j], big_r);
                    if e > max {
                        max = e;
                    }
                }
                let mut sum = 0.0;
                for (j, &pj) in probs.iter().enumerate() {
                    if pj <= 0.0 {
                        continue;
                    }
                    let e = pj.ln() + self.channel.ln_kernel(self.support[j], big_r);
                    sum += (e - max).exp();
                }
                max + sum.ln()
            };
            self.glog2[k] = (ln_f - big_r.ln()) / LN2;
            self.wglog2[k] = self.r_weights[k] * self.glog2[k];
        }
    }

    pub fn info_densities(&self) -> Vec<f64> {
        let n = self.r_nodes.len();
        self.support
            .iter()
            .enumerate()
            .map(|(j, _)| {
                let row = &self.kernel[j * n..(j + 1) * n];
                let cross: f64 = row.iter().zip(&self.wglog2).map(|(&k, &w)| k * w).sum();
                -cross - self.const_bits
            })
            .collect()
    }

    pub fn info_density_at(&self, r: f64) -> f64 {
        let mut cross = 0.0;
        for ((&big_r, &w), &g) in self.r_nodes.iter().zip(&self.r_weights).zip(&self.glog2) {
            let k = self.channel.ln_kernel(r, big_r).exp();
            cross += w * k * g;
        }
        -cross - self.const_bits
    }

    pub fn mutual_information(&self, probs: &[f64]) -> f64 {
        self.info_densities()
            .iter()
            .zip(probs)
            .map(|(&i, &p)| p * i)
            .sum()
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.r_weights
    }

    pub fn kernel_row(&self, j: usize) -> &[f64] {
        let n = self.r_nodes.len();
        &self.kernel[j * n..(j + 1) * n]
    }

    /// Output amplitude density at the quadrature nodes for the probabilities
    /// installed by the last [`Self::set_probs`] call.
    pub fn output_density_nodes(&self) -> Vec<f64> {
        self.glog2
            .iter()
            .zip(&self.r_nodes)
            .map(|(g, r)| (g * LN2).exp() * r)
            .collect()
    }
}
