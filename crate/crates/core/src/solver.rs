//! Conditional-capacity solver: maximize mutual information over a
//! discretized input distribution subject to an average-power budget and
//! per-receiver minimum harvested-power constraints, for both real and
//! amplitude (complex) signalling.
//!
//! The returned solution is defined by its contract, not the method: it must
//! pass [`verify_optimality`], which checks the necessary-and-sufficient
//! condition `s(x) >= 0` (equality at mass points) on a refined grid.
//!
//! Internally the solver runs dual iteration on the multipliers with a
//! Blahut-Arimoto style fixed point maximizing the Lagrangian over the
//! probability simplex, followed by a small primal correction that enforces
//! the active moment constraints to machine precision. Everything is
//! deterministic: identical inputs produce bit-identical solutions.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::channel::{
    AmplitudeInfoEvaluator, ChannelModel, DiscreteDistribution, RealInfoEvaluator,
    DEFAULT_QUAD_NODES,
};
use crate::oracle;

const LN2: f64 = std::f64::consts::LN_2;
/// Probabilities below this are treated as numerical zeros of the simplex
/// solve when verifying mass-point conditions or clustering.
pub const DEFAULT_MASS_FLOOR: f64 = 1e-7;
const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error("EH constraint of receiver {receiver_id} infeasible: requires {p_req:.6e} W, at most {p_max:.6e} W is harvestable")]
    Infeasible {
        receiver_id: usize,
        p_req: f64,
        p_max: f64,
    },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("dual iteration failed: {0}")]
    DualFailure(String),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
}

/// One minimum-harvested-power constraint, with its power function cached
/// per evaluation point by the solver.
#[derive(Clone)]
pub struct EhConstraint {
    pub receiver_id: usize,
    pub power: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub p_req: f64,
}

impl EhConstraint {
    pub fn new(
        receiver_id: usize,
        power: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        p_req: f64,
    ) -> Self {
        Self {
            receiver_id,
            power,
            p_req,
        }
    }
}

impl fmt::Debug for EhConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EhConstraint")
            .field("receiver_id", &self.receiver_id)
            .field("p_req", &self.p_req)
            .finish()
    }
}

/// The discretized conditional-capacity problem.
#[derive(Debug, Clone)]
pub struct CapacityProblem {
    /// Candidate support points (strictly increasing; `[-A, A]` for real
    /// signalling, `[0, A]` for amplitude signalling).
    pub grid: Vec<f64>,
    pub channel: ChannelModel,
    /// Average-power budget sigma^2 (W).
    pub ap_budget: f64,
    pub eh_constraints: Vec<EhConstraint>,
}

/// Uniform candidate grid over the channel's input domain.
pub fn uniform_grid(channel: &ChannelModel, a: f64, points: usize) -> Vec<f64> {
    let lo = channel.domain_lower(a);
    (0..points)
        .map(|i| lo + (a - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct CapacitySolution {
    pub dist: DiscreteDistribution,
    /// Achieved mutual information (bits/channel use).
    pub rate: f64,
    /// Multiplier of the average-power constraint (bits/W).
    pub lambda0: f64,
    /// Per-receiver EH multipliers (bits/W), zero when inactive.
    pub lambdas: Vec<(usize, f64)>,
    /// Per-receiver average harvested powers (W).
    pub harvested: Vec<(usize, f64)>,
    pub status: SolveStatus,
}

impl CapacitySolution {
    pub fn lambda_for(&self, receiver_id: usize) -> Option<f64> {
        self.lambdas
            .iter()
            .find(|(id, _)| *id == receiver_id)
            .map(|(_, l)| *l)
    }

    pub fn harvested_for(&self, receiver_id: usize) -> Option<f64> {
        self.harvested
            .iter()
            .find(|(id, _)| *id == receiver_id)
            .map(|(_, p)| *p)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Verification tolerance; defaults to `1e-3 * max(rate, 0.01)` bits.
    pub kkt_tol: Option<f64>,
    pub quad_nodes: usize,
    /// Blahut-Arimoto duality-gap tolerance (bits) for the tight phase.
    pub inner_gap_tol: f64,
    pub max_inner_iterations: usize,
    pub mass_floor: f64,
    /// Relative feasibility margin of the up-front LP check.
    pub feasibility_margin: f64,
    /// Override of the uniform initial distribution (testing hook).
    pub initial_probs: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            kkt_tol: None,
            quad_nodes: DEFAULT_QUAD_NODES,
            inner_gap_tol: 1e-10,
            max_inner_iterations: 40_000,
            mass_floor: DEFAULT_MASS_FLOOR,
            feasibility_margin: 1e-12,
            initial_probs: None,
        }
    }
}

/// Corollary-style optimality report: `s` sampled on a refined grid, its
/// minimum, and the worst |s| over the solution's mass points.
#[derive(Debug, Clone)]
pub struct OptimalityReport {
    pub s_values: Vec<(f64, f64)>,
    pub min_s: f64,
    pub max_abs_s_at_mass: f64,
    pub kkt_tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Verification grid step; defaults to a quarter of the solve grid step.
    pub grid_step: Option<f64>,
    pub kkt_tol: Option<f64>,
    pub mass_floor: f64,
    pub quad_nodes: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            grid_step: None,
            kkt_tol: None,
            mass_floor: DEFAULT_MASS_FLOOR,
            quad_nodes: DEFAULT_QUAD_NODES,
        }
    }
}

enum Evaluator {
    Real(RealInfoEvaluator),
    Amplitude(AmplitudeInfoEvaluator),
}

impl Evaluator {
    fn build(channel: &ChannelModel, support: &[f64], domain_max: f64, nodes: usize) -> Self {
        match channel {
            ChannelModel::Real(c) => {
                Evaluator::Real(RealInfoEvaluator::new(*c, support, domain_max, nodes))
            }
            ChannelModel::Amplitude(c) => {
                Evaluator::Amplitude(AmplitudeInfoEvaluator::new(*c, support, domain_max, nodes))
            }
        }
    }

    fn set_probs(&mut self, probs: &[f64]) {
        match self {
            Evaluator::Real(e) => e.set_probs(probs),
            Evaluator::Amplitude(e) => e.set_probs(probs),
        }
    }

    fn info_densities(&self) -> Vec<f64> {
        match self {
            Evaluator::Real(e) => e.info_densities(),
            Evaluator::Amplitude(e) => e.info_densities(),
        }
    }

    fn info_density_at(&self, x: f64) -> f64 {
        match self {
            Evaluator::Real(e) => e.info_density_at(x),
            Evaluator::Amplitude(e) => e.info_density_at(x),
        }
    }

    fn quad_weights(&self) -> &[f64] {
        match self {
            Evaluator::Real(e) => e.quad_weights(),
            Evaluator::Amplitude(e) => e.quad_weights(),
        }
    }

    fn kernel_row(&self, j: usize) -> &[f64] {
        match self {
            Evaluator::Real(e) => e.kernel_row(j),
            Evaluator::Amplitude(e) => e.kernel_row(j),
        }
    }

    fn output_density_nodes(&self) -> Vec<f64> {
        match self {
            Evaluator::Real(e) => e.output_density_nodes(),
            Evaluator::Amplitude(e) => e.output_density_nodes(),
        }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    mi: f64,
    mean_sq: f64,
    harvested: Vec<f64>,
    /// Lagrangian value at the iterate (bits).
    lagrangian: f64,
    gap: f64,
    converged: bool,
}

struct SolveCtx<'a> {
    problem: &'a CapacityProblem,
    opts: &'a SolveOptions,
    cost: Vec<f64>,
    pl: Vec<Vec<f64>>,
    p_req: Vec<f64>,
    /// Demands as seen by the dual iteration (clamped away from P_max).
    dual_req: Vec<f64>,
    eval: Evaluator,
    probs: Vec<f64>,
    reward: Vec<f64>,
    logits: Vec<f64>,
    gap_tol: f64,
    gap_ceiling: f64,
    eval_budget: usize,
}

impl<'a> SolveCtx<'a> {
    fn moments_of(&self, probs: &[f64], dens: &[f64], reward: &[f64]) -> Moments {
        let mut mi = 0.0;
        let mut mean_sq = 0.0;
        let mut value = 0.0;
        let mut dmax = f64::NEG_INFINITY;
        for j in 0..probs.len() {
            let d = dens[j] + reward[j];
            mi += probs[j] * dens[j];
            mean_sq += probs[j] * self.cost[j];
            value += probs[j] * d;
            if d > dmax {
                dmax = d;
            }
        }
        let harvested = self
            .pl
            .iter()
            .map(|pv| pv.iter().zip(probs).map(|(&v, &p)| p * v).sum())
            .collect();
        Moments {
            mi,
            mean_sq,
            harvested,
            lagrangian: value,
            gap: dmax - value,
            converged: false,
        }
    }

    /// One consistent Lagrangian evaluation at the current iterate.
    fn eval_current(&mut self) -> (Moments, Vec<f64>) {
        self.eval.set_probs(&self.probs);
        let dens = self.eval.info_densities();
        let m = self.moments_of(&self.probs, &dens, &self.reward);
        (m, dens)
    }

    /// Log-domain multiplicative update `p <- p * 2^(i + reward)`.
    fn ba_step(&mut self, dens: &[f64]) {
        let n = self.probs.len();
        let mut emax = f64::NEG_INFINITY;
        for j in 0..n {
            self.logits[j] = self.probs[j].ln() + LN2 * (dens[j] + self.reward[j]);
            if self.logits[j] > emax {
                emax = self.logits[j];
            }
        }
        let mut sum = 0.0;
        for j in 0..n {
            self.probs[j] = (self.logits[j] - emax).exp();
            sum += self.probs[j];
        }
        for p in self.probs.iter_mut() {
            *p = (*p / sum).max(PROB_FLOOR);
        }
    }

    /// Maximize `I(F) + sum_j p_j reward_j` over the simplex, warm-starting
    /// from the current iterate. Multiplicative fixed-point updates with
    /// squared-extrapolation acceleration; the extrapolated candidate is only
    /// kept when it does not lose Lagrangian value, so ascent is preserved.
    fn ba(&mut self, lambda0: f64, lam: &[f64]) -> Moments {
        let n = self.cost.len();
        for j in 0..n {
            self.reward[j] = -lambda0 * self.cost[j];
        }
        for (l, &lv) in lam.iter().enumerate() {
            if lv != 0.0 {
                let pv = &self.pl[l];
                for j in 0..n {
                    self.reward[j] += lv * pv[j];
                }
            }
        }
        let reward_scale = self.reward.iter().fold(0.0f64, |a, &r| a.max(r.abs()));
        let tol = self.gap_tol.max(reward_scale * 1e-13).max(1e-13);
        // Warm starts can leave points crushed to the floor; points whose
        // advantage turned positive are reseeded here so they do not have to
        // climb hundreds of nats by plain multiplicative growth.
        const SEED: f64 = 1e-9;
        // Acceptance ceiling for the plateau exit: once the duality gap stops
        // improving it is dominated by near-degenerate neighbouring grid
        // points whose contribution is far below the verification tolerance.
        let ceiling = self.gap_ceiling;
        let reseed_thresh = tol.max(1e-6);
        let mut best_gap = f64::INFINITY;
        let mut stale_cycles = 0usize;
        let mut evals = 0usize;
        let trace = std::env::var("SWIPT_BA_TRACE").is_ok();
        loop {
            let (m0, dens0) = self.eval_current();
            evals += 1;
            if trace && evals % 100 == 1 {
                eprintln!("ba l0={lambda0:.6} evals={evals} gap={:.3e} L={:.9} tol={tol:.1e}", m0.gap, m0.lagrangian);
            }
            if m0.gap < 0.7 * best_gap {
                best_gap = m0.gap;
                stale_cycles = 0;
            } else {
                stale_cycles += 1;
            }
            if m0.gap <= tol || (stale_cycles >= 12 && m0.gap <= ceiling) {
                let mut m = m0;
                m.converged = true;
                return m;
            }
            if evals >= self.eval_budget.min(self.opts.max_inner_iterations) {
                return m0;
            }
            let mut reseeded = false;
            for j in 0..n {
                if self.probs[j] < SEED && dens0[j] + self.reward[j] > m0.lagrangian + reseed_thresh {
                    self.probs[j] = SEED;
                    reseeded = true;
                }
            }
            if reseeded {
                let sum: f64 = self.probs.iter().sum();
                for p in self.probs.iter_mut() {
                    *p /= sum;
                }
                continue;
            }
            let lp0: Vec<f64> = self.probs.iter().map(|p| p.ln()).collect();
            self.ba_step(&dens0);
            let (m1, dens1) = self.eval_current();
            evals += 1;
            if m1.gap <= tol {
                let mut m = m1;
                m.converged = true;
                return m;
            }
            let lp1: Vec<f64> = self.probs.iter().map(|p| p.ln()).collect();
            self.ba_step(&dens1);
            let p2 = self.probs.clone();
            // Squared extrapolation through the three iterates, done on the
            // logits so that both reviving points (log-linear growth) and the
            // live support (multiplicative contraction) accelerate.
            let mut rn = 0.0;
            let mut vn = 0.0;
            for j in 0..n {
                let r = lp1[j] - lp0[j];
                let v = p2[j].ln() - 2.0 * lp1[j] + lp0[j];
                rn += r * r;
                vn += v * v;
            }
            if vn > 0.0 && rn > 0.0 {
                let alpha = -(rn / vn).sqrt().clamp(1.0, 64.0);
                let mut emax = f64::NEG_INFINITY;
                for j in 0..n {
                    let r = lp1[j] - lp0[j];
                    let v = p2[j].ln() - 2.0 * lp1[j] + lp0[j];
                    self.logits[j] = lp0[j] - 2.0 * alpha * r + alpha * alpha * v;
                    if self.logits[j] > emax {
                        emax = self.logits[j];
                    }
                }
                let mut sum = 0.0;
                for j in 0..n {
                    self.probs[j] = (self.logits[j] - emax).exp();
                    sum += self.probs[j];
                }
                for p in self.probs.iter_mut() {
                    *p = (*p / sum).max(PROB_FLOOR);
                }
                let (mc, _) = self.eval_current();
                evals += 1;
                if mc.gap <= tol {
                    let mut m = mc;
                    m.converged = true;
                    return m;
                }
                // Keep the candidate only if it did not lose ground against
                // the plain double step; otherwise fall back to it.
                if !(mc.lagrangian >= m1.lagrangian) {
                    self.probs = p2;
                }
            }
        }
    }

    /// Multiplier of the AP constraint: zero when slack at `lambda0 = 0`,
    /// otherwise the Illinois root of `E[x^2](lambda0) = sigma^2`.
    fn solve_ap(&mut self, lam: &[f64], tol_rel: f64) -> Result<f64, SolverError> {
        let s2 = self.problem.ap_budget;
        let m0 = self.ba(0.0, lam);
        if m0.mean_sq <= s2 * (1.0 + 1e-12) {
            return Ok(0.0);
        }
        let mut lo = 0.0;
        let mut glo = m0.mean_sq - s2;
        let mut hi = 1.0 / s2;
        let mut ghi;
        loop {
            let m = self.ba(hi, lam);
            ghi = m.mean_sq - s2;
            if ghi < 0.0 {
                break;
            }
            lo = hi;
            glo = ghi;
            hi *= 4.0;
            if hi > 1e40 {
                return Err(SolverError::DualFailure(
                    "AP multiplier bracket exceeded 1e40".into(),
                ));
            }
        }
        let mut side = 0i8;
        let mut x = hi;
        for _ in 0..100 {
            x = (glo * hi - ghi * lo) / (glo - ghi);
            if !(x > lo && x < hi) {
                x = 0.5 * (lo + hi);
            }
            let m = self.ba(x, lam);
            let gx = m.mean_sq - s2;
            if gx.abs() <= tol_rel * s2 || (hi - lo) <= 1e-13 * hi {
                return Ok(x);
            }
            if gx > 0.0 {
                lo = x;
                glo = gx;
                if side == 1 {
                    ghi *= 0.5;
                }
                side = 1;
            } else {
                hi = x;
                ghi = gx;
                if side == -1 {
                    glo *= 0.5;
                }
                side = -1;
            }
        }
        Ok(x)
    }

    /// Multiplier of one EH constraint (others fixed): Illinois root of
    /// `E[P_l](lambda_l) = p_req`, or zero when already slack.
    fn solve_eh(
        &mut self,
        l: usize,
        lambda0: f64,
        lam: &[f64],
        tol_rel: f64,
    ) -> Result<f64, SolverError> {
        let target = self.dual_req[l];
        let mut lam_try = lam.to_vec();
        lam_try[l] = 0.0;
        let m0 = self.ba(lambda0, &lam_try);
        if m0.harvested[l] >= target * (1.0 - 1e-12) {
            return Ok(0.0);
        }
        let mut lo = 0.0;
        let mut glo = m0.harvested[l] - target;
        let mut hi = 1.0_f64.max(lam[l]).max(1.0 / target);
        let mut ghi;
        loop {
            lam_try[l] = hi;
            let m = self.ba(lambda0, &lam_try);
            ghi = m.harvested[l] - target;
            if ghi > 0.0 {
                break;
            }
            lo = hi;
            glo = ghi;
            hi *= 4.0;
            if hi > 1e40 {
                return Err(SolverError::DualFailure(format!(
                    "EH multiplier bracket for constraint {l} exceeded 1e40"
                )));
            }
        }
        let mut side = 0i8;
        let mut x = hi;
        for _ in 0..100 {
            x = (glo * hi - ghi * lo) / (glo - ghi);
            if !(x > lo && x < hi) {
                x = 0.5 * (lo + hi);
            }
            lam_try[l] = x;
            let m = self.ba(lambda0, &lam_try);
            let gx = m.harvested[l] - target;
            if gx.abs() <= tol_rel * target || (hi - lo) <= 1e-13 * hi {
                return Ok(x);
            }
            if gx < 0.0 {
                lo = x;
                glo = gx;
                if side == 1 {
                    ghi *= 0.5;
                }
                side = 1;
            } else {
                hi = x;
                ghi = gx;
                if side == -1 {
                    glo *= 0.5;
                }
                side = -1;
            }
        }
        Ok(x)
    }

    /// Scaled dual residual vector at (lambda0, lam): AP first when active,
    /// then the active EH demands.
    fn dual_residuals(
        &mut self,
        lambda0: f64,
        lam: &[f64],
        active: &[usize],
        ap_in: bool,
    ) -> Vec<f64> {
        let m = self.ba(lambda0, lam);
        let mut g = Vec::with_capacity(active.len() + 1);
        if ap_in {
            g.push((m.mean_sq - self.problem.ap_budget) / self.problem.ap_budget);
        }
        for &l in active {
            g.push((m.harvested[l] - self.dual_req[l]) / self.dual_req[l]);
        }
        g
    }

    /// Joint quasi-Newton (Broyden) refinement of the multipliers, for the
    /// case of near-collinear constraints where coordinate-wise bisection
    /// stalls. Returns the final worst relative residual.
    fn solve_joint(
        &mut self,
        lambda0: &mut f64,
        lam: &mut [f64],
        active: &[usize],
        tol_rel: f64,
    ) -> Result<f64, SolverError> {
        let ap_in = *lambda0 > 0.0;
        let k = active.len() + ap_in as usize;
        if k == 0 {
            return Ok(0.0);
        }
        let pack = |lambda0: f64, lam: &[f64]| -> Vec<f64> {
            let mut t = Vec::with_capacity(k);
            if ap_in {
                t.push(lambda0);
            }
            t.extend(active.iter().map(|&l| lam[l]));
            t
        };
        let unpack = |t: &[f64], lambda0: &mut f64, lam: &mut [f64]| {
            let mut i = 0;
            if ap_in {
                *lambda0 = t[0].max(0.0);
                i = 1;
            }
            for &l in active {
                lam[l] = t[i].max(0.0);
                i += 1;
            }
        };
        let mut theta = pack(*lambda0, lam);
        let mut g = self.dual_residuals(*lambda0, lam, active, ap_in);
        let norm_inf = |v: &[f64]| v.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        if norm_inf(&g) <= tol_rel {
            return Ok(norm_inf(&g));
        }
        // Finite-difference Jacobian.
        let mut jac = vec![0.0; k * k];
        for c in 0..k {
            let mut tb = theta.clone();
            let delta = 0.05 * tb[c].abs().max(1e-6 * (1.0 + tb[c].abs()));
            tb[c] += delta;
            unpack(&tb, lambda0, lam);
            let gb = self.dual_residuals(*lambda0, lam, active, ap_in);
            for r in 0..k {
                jac[r * k + c] = (gb[r] - g[r]) / delta;
            }
        }
        unpack(&theta, lambda0, lam);
        let mut best = norm_inf(&g);
        let mut best_theta = theta.clone();
        for _ in 0..40 {
            let mut a = jac.clone();
            let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            let Some(step) = solve_small_linear(&mut a, &rhs) else {
                break;
            };
            // Per-component damping: each multiplier may grow or shrink by
            // at most a factor of 8 per step (they can span many decades).
            let theta_new: Vec<f64> = theta
                .iter()
                .zip(&step)
                .map(|(&t, &s)| {
                    let lo = t / 8.0;
                    let hi = (t * 8.0).max(1e-9);
                    (t + s).clamp(lo, hi)
                })
                .collect();
            unpack(&theta_new, lambda0, lam);
            let g_new = self.dual_residuals(*lambda0, lam, active, ap_in);
            let gn = norm_inf(&g_new);
            // Broyden rank-one update.
            let dtheta: Vec<f64> = theta_new.iter().zip(&theta).map(|(a, b)| a - b).collect();
            let dd: f64 = dtheta.iter().map(|v| v * v).sum();
            if dd > 0.0 {
                let jd: Vec<f64> = (0..k)
                    .map(|r| (0..k).map(|c| jac[r * k + c] * dtheta[c]).sum::<f64>())
                    .collect();
                for r in 0..k {
                    let corr = (g_new[r] - g[r] - jd[r]) / dd;
                    for c in 0..k {
                        jac[r * k + c] += corr * dtheta[c];
                    }
                }
            }
            theta = theta_new;
            g = g_new;
            if gn <= tol_rel {
                return Ok(gn);
            }
            if gn < best {
                best = gn;
                best_theta = theta.clone();
            } else if gn > 10.0 * best {
                break;
            }
        }
        unpack(&best_theta, lambda0, lam);
        // Re-evaluate so the iterate state matches the returned multipliers.
        let g_final = self.dual_residuals(*lambda0, lam, active, ap_in);
        Ok(norm_inf(&g_final))
    }

    /// Gauss-Seidel rounds over the active multipliers until the AP budget
    /// and every active EH demand are met to `tol_rel` (best effort: stops
    /// early when the residual stalls at the map's noise floor). Returns the
    /// final worst relative residual.
    fn solve_active_set(
        &mut self,
        lambda0: &mut f64,
        lam: &mut [f64],
        active: &[usize],
        tol_rel: f64,
    ) -> Result<f64, SolverError> {
        let mut overall = f64::INFINITY;
        let mut best_state: Option<(f64, Vec<f64>)> = None;
        for _ in 0..6 {
            let mut best = f64::INFINITY;
            let mut stale = 0usize;
            for _ in 0..25 {
                for &l in active {
                    let v = self.solve_eh(l, *lambda0, lam, tol_rel)?;
                    lam[l] = v;
                }
                *lambda0 = self.solve_ap(lam, tol_rel)?;
                let m = self.ba(*lambda0, lam);
                let mut worst: f64 = 0.0;
                if *lambda0 > 0.0 {
                    worst = worst
                        .max((m.mean_sq - self.problem.ap_budget).abs() / self.problem.ap_budget);
                } else if m.mean_sq > self.problem.ap_budget * (1.0 + tol_rel) {
                    worst = f64::INFINITY;
                }
                for &l in active {
                    if lam[l] > 0.0 {
                        worst = worst
                            .max((m.harvested[l] - self.dual_req[l]).abs() / self.dual_req[l]);
                    } else if m.harvested[l] < self.dual_req[l] * (1.0 - tol_rel) {
                        worst = f64::INFINITY;
                    }
                }
                if worst <= tol_rel {
                    return Ok(worst);
                }
                if worst < overall {
                    overall = worst;
                    best_state = Some((*lambda0, lam.to_vec()));
                }
                if worst < 0.5 * best {
                    best = worst;
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= 2 {
                        break;
                    }
                }
            }
            // Coordinate-wise progress stalled (typically collinear
            // constraints); run the joint quasi-Newton update, then loop.
            let joint = self.solve_joint(lambda0, lam, active, tol_rel)?;
            if joint <= tol_rel {
                return Ok(joint);
            }
            let prev = overall;
            if joint < overall {
                overall = joint;
                best_state = Some((*lambda0, lam.to_vec()));
            }
            if joint >= prev * 0.5 && prev.is_finite() {
                break;
            }
        }
        if let Some((l0, best_lam)) = best_state {
            *lambda0 = l0;
            lam.copy_from_slice(&best_lam);
            let _ = self.ba(*lambda0, lam);
        }
        Ok(overall)
    }

    /// Second-order refinement on the identified support: projected Newton
    /// steps on the simplex resolve the near-degenerate mass splits between
    /// neighbouring grid points that the multiplicative fixed point leaves
    /// behind, converging to the unique grid optimum at machine precision.
    ///
    /// Two-phase active-set scheme: the current support is optimized to
    /// tolerance before any outside point (picked by its advantage) may
    /// enter, which keeps the step lengths from being pinned by
    /// freshly-seeded boundary points.
    fn newton_refine(&mut self) {
        const SUPPORT_FLOOR: f64 = 1e-9;
        const TOL: f64 = 2e-13;
        let n = self.probs.len();
        let mut support: Vec<usize> = (0..n).filter(|&j| self.probs[j] > SUPPORT_FLOOR).collect();
        if support.len() < 2 || support.len() > 300 {
            return;
        }
        for j in 0..n {
            if !support.contains(&j) {
                self.probs[j] = 0.0;
            }
        }
        let total: f64 = self.probs.iter().sum();
        for p in self.probs.iter_mut() {
            *p /= total;
        }
        let trace = std::env::var("SWIPT_NEWTON_TRACE").is_ok();
        let log2e = std::f64::consts::LOG2_E;
        let mut damp = 1e-9;
        let mut best_gap = f64::INFINITY;
        let mut stall = 0usize;
        let mut last_k = usize::MAX;
        for iter in 0..600 {
            let (m, dens) = self.eval_current();
            let value = m.lagrangian;
            let gap_in = support
                .iter()
                .map(|&j| (dens[j] + self.reward[j] - value).abs())
                .fold(0.0f64, f64::max);
            // Stall detection on the gradient gap, paused while the active
            // set is still changing (pruning holds the gap constant).
            if gap_in < 0.5 * best_gap || support.len() != last_k {
                if gap_in < 0.5 * best_gap {
                    best_gap = gap_in;
                }
                stall = 0;
            } else {
                stall += 1;
                if stall >= 12 {
                    return;
                }
            }
            last_k = support.len();
            if trace {
                eprintln!("newton it={iter} k={} gap_in={gap_in:.3e} L={value:.14}", support.len());
            }
            if gap_in <= TOL {
                // Inner problem solved; let the best outside point in, if any.
                let outside = (0..n)
                    .filter(|&j| self.probs[j] == 0.0)
                    .map(|j| (j, dens[j] + self.reward[j] - value))
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                match outside {
                    Some((j, adv)) if adv > 1e-11 => {
                        self.probs[j] = 1e-12;
                        support.push(j);
                        support.sort_unstable();
                        let total: f64 = self.probs.iter().sum();
                        for p in self.probs.iter_mut() {
                            *p /= total;
                        }
                        continue;
                    }
                    _ => return,
                }
            }
            // Newton KKT system on the simplex tangent:
            // [H 1; 1^T 0] [d; mu] = [-g; 0],
            // H_jk = -log2(e) sum_n w_n K_j K_k / p_out.
            let weights = self.eval.quad_weights().to_vec();
            let out = self.eval.output_density_nodes();
            let nn = weights.len();
            let k = support.len();
            let mut scaled: Vec<Vec<f64>> = Vec::with_capacity(k);
            for &j in &support {
                let row = self.eval.kernel_row(j);
                let mut sr = vec![0.0; nn];
                for i in 0..nn {
                    if out[i] > 1e-280 {
                        sr[i] = row[i] * (weights[i] / out[i]).sqrt();
                    }
                }
                scaled.push(sr);
            }
            let dim = k + 1;
            let mut hess = vec![0.0; k * k];
            let mut hmax: f64 = 0.0;
            for a in 0..k {
                for b in a..k {
                    let dot: f64 = scaled[a].iter().zip(&scaled[b]).map(|(&x, &y)| x * y).sum();
                    let h = -log2e * dot;
                    hess[a * k + b] = h;
                    hess[b * k + a] = h;
                    hmax = hmax.max(h.abs());
                }
            }
            let mut kkt = vec![0.0; dim * dim];
            let mut rhs = vec![0.0; dim];
            for a in 0..k {
                for b in 0..k {
                    kkt[a * dim + b] = hess[a * k + b];
                }
                // Levenberg damping: far below the flattest curvature of
                // interest, raised adaptively when the step misbehaves.
                kkt[a * dim + a] -= damp * hmax.max(1e-30);
                kkt[a * dim + k] = 1.0;
                kkt[k * dim + a] = 1.0;
                rhs[a] = -(dens[support[a]] + self.reward[support[a]] - value);
            }
            let Some(step) = solve_small_linear(&mut kkt, &rhs) else {
                if trace { eprintln!("newton: kkt solve failed"); }
                return;
            };
            // Predicted first-order ascent along the step.
            let pred: f64 = (0..k)
                .map(|a| (dens[support[a]] + self.reward[support[a]] - value) * step[a])
                .sum();
            if !(pred > 0.0) || !pred.is_finite() {
                if trace { eprintln!("newton: pred={pred:e}, damp={damp:e}"); }
                if damp < 1e2 {
                    damp *= 100.0;
                    continue;
                }
                return;
            }
            // Longest feasible fraction; points pinned at the boundary leave
            // the active set instead of freezing the step.
            let mut alpha: f64 = 1.0;
            for (a, &j) in support.iter().enumerate() {
                if step[a] < 0.0 {
                    alpha = alpha.min(-self.probs[j] / step[a]);
                }
            }
            if alpha < 1e-9 {
                let probs = &mut self.probs;
                let mut dropped = false;
                support.retain(|&j| {
                    let keep = probs[j] > 1e-9;
                    if !keep {
                        probs[j] = 0.0;
                        dropped = true;
                    }
                    keep
                });
                if support.len() < 2 {
                    return;
                }
                if dropped {
                    let total: f64 = self.probs.iter().sum();
                    for p in self.probs.iter_mut() {
                        *p /= total;
                    }
                } else if damp < 1e2 {
                    damp *= 100.0;
                } else {
                    return;
                }
                continue;
            }
            let backup = self.probs.clone();
            let mut scale = alpha.min(1.0);
            let mut accepted = false;
            for _ in 0..10 {
                for (a, &j) in support.iter().enumerate() {
                    self.probs[j] = (backup[j] + scale * step[a]).max(0.0);
                }
                let total: f64 = self.probs.iter().sum();
                for p in self.probs.iter_mut() {
                    *p /= total;
                }
                let (mt, _) = self.eval_current();
                if mt.lagrangian >= value + 0.05 * scale * pred - 1e-15 {
                    accepted = true;
                    break;
                }
                scale *= 0.25;
            }
            if !accepted {
                if trace { eprintln!("newton: line search failed (pred={pred:e}, alpha={alpha:e}, damp={damp:e})"); }
                self.probs = backup;
                if damp < 1e2 {
                    damp *= 100.0;
                    continue;
                }
                return;
            }
            damp = (damp / 30.0).max(1e-12);
            let probs = &mut self.probs;
            support.retain(|&j| probs[j] > 0.0);
            if support.len() < 2 {
                return;
            }
        }
    }

    /// Exact enforcement of the active moment equalities by reweighting along
    /// zero-sum directions. Each pass solves the joint system over all
    /// targets (iterated as refinement, which handles ill-conditioned nearly
    /// collinear constraints); a singular system falls back to one-at-a-time
    /// projections (exactly collinear targets are mutually consistent there).
    fn polish(&mut self, ap_active: bool, active: &[usize]) {
        let n = self.probs.len();
        let mut targets: Vec<(&[f64], f64)> = Vec::new();
        if ap_active {
            targets.push((&self.cost, self.problem.ap_budget));
        }
        for &l in active {
            targets.push((&self.pl[l], self.p_req[l]));
        }
        if targets.is_empty() {
            return;
        }
        let k = targets.len();
        let start = self.probs.clone();
        for _ in 0..200 {
            let means: Vec<f64> = targets
                .iter()
                .map(|(f, _)| f.iter().zip(&self.probs).map(|(&v, &p)| p * v).sum())
                .collect();
            let worst = targets
                .iter()
                .zip(&means)
                .map(|((_, t), m)| ((t - m) / t.abs().max(1e-300)).abs())
                .fold(0.0f64, f64::max);
            if worst < 1e-14 {
                return;
            }
            // Zero-sum directions d_b = p o (f_b - E[f_b]).
            let dirs: Vec<Vec<f64>> = targets
                .iter()
                .zip(&means)
                .map(|((f, _), &m)| {
                    (0..n).map(|j| self.probs[j] * (f[j] - m)).collect::<Vec<f64>>()
                })
                .collect();
            let mut mat = vec![0.0; k * k];
            for a in 0..k {
                for b in 0..k {
                    mat[a * k + b] = targets[a]
                        .0
                        .iter()
                        .zip(&dirs[b])
                        .map(|(&v, &d)| v * d)
                        .sum();
                }
            }
            let resid: Vec<f64> = targets
                .iter()
                .zip(&means)
                .map(|((_, t), m)| t - m)
                .collect();
            let applied = match solve_small_linear(&mut mat, &resid) {
                Some(alpha) if alpha.iter().all(|a| a.is_finite()) => {
                    let mut sum = 0.0;
                    for j in 0..n {
                        let delta: f64 = (0..k).map(|b| alpha[b] * dirs[b][j]).sum();
                        self.probs[j] = (self.probs[j] + delta).max(0.0);
                        sum += self.probs[j];
                    }
                    for p in self.probs.iter_mut() {
                        *p /= sum;
                    }
                    true
                }
                _ => false,
            };
            if !applied {
                // Singular joint system: sequential exact projections.
                for ((f, t), &m) in targets.iter().zip(&means) {
                    let mean: f64 = f.iter().zip(&self.probs).map(|(&v, &p)| p * v).sum();
                    let _ = m;
                    let var: f64 = f
                        .iter()
                        .zip(&self.probs)
                        .map(|(&v, &p)| p * (v - mean) * (v - mean))
                        .sum();
                    if !(var > 0.0) {
                        continue;
                    }
                    let alpha = (t - mean) / var;
                    let mut sum = 0.0;
                    for j in 0..n {
                        self.probs[j] =
                            (self.probs[j] + alpha * self.probs[j] * (f[j] - mean)).max(0.0);
                        sum += self.probs[j];
                    }
                    for p in self.probs.iter_mut() {
                        *p /= sum;
                    }
                }
            }
            // Net displacement guard: the correction must remain a small
            // reweighting of the dual iterate.
            let l1: f64 = self
                .probs
                .iter()
                .zip(&start)
                .map(|(a, b)| (a - b).abs())
                .sum();
            if l1 > 5e-2 {
                self.probs = start;
                return;
            }
        }
    }
}

/// Gaussian elimination with partial pivoting for the tiny polish systems.
fn solve_small_linear(mat: &mut [f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let k = rhs.len();
    let mut b = rhs.to_vec();
    for col in 0..k {
        let mut piv = col;
        for r in col + 1..k {
            if mat[r * k + col].abs() > mat[piv * k + col].abs() {
                piv = r;
            }
        }
        if mat[piv * k + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for c in 0..k {
                mat.swap(col * k + c, piv * k + c);
            }
            b.swap(col, piv);
        }
        for r in col + 1..k {
            let f = mat[r * k + col] / mat[col * k + col];
            for c in col..k {
                mat[r * k + c] -= f * mat[col * k + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for col in (0..k).rev() {
        let mut acc = b[col];
        for c in col + 1..k {
            acc -= mat[col * k + c] * x[c];
        }
        x[col] = acc / mat[col * k + col];
    }
    Some(x)
}

fn validate(problem: &CapacityProblem) -> Result<(), SolverError> {
    if problem.grid.len() < 2 {
        return Err(SolverError::Invalid("grid needs at least 2 points".into()));
    }
    for w in problem.grid.windows(2) {
        if !(w[0] < w[1]) {
            return Err(SolverError::Invalid(format!(
                "grid not strictly increasing at {} >= {}",
                w[0], w[1]
            )));
        }
    }
    if matches!(problem.channel, ChannelModel::Amplitude(_)) && problem.grid[0] < 0.0 {
        return Err(SolverError::Invalid(
            "amplitude grid must be non-negative".into(),
        ));
    }
    if !(problem.ap_budget > 0.0) {
        return Err(SolverError::Invalid(format!(
            "AP budget must be positive, got {}",
            problem.ap_budget
        )));
    }
    for c in &problem.eh_constraints {
        if !(c.p_req >= 0.0) {
            return Err(SolverError::Invalid(format!(
                "required power of receiver {} must be non-negative",
                c.receiver_id
            )));
        }
    }
    Ok(())
}

/// Solve the conditional-capacity problem.
pub fn solve(
    problem: &CapacityProblem,
    opts: &SolveOptions,
) -> Result<CapacitySolution, SolverError> {
    validate(problem)?;
    let n = problem.grid.len();
    let grid = &problem.grid;
    let cost: Vec<f64> = grid.iter().map(|&x| x * x).collect();
    let pl: Vec<Vec<f64>> = problem
        .eh_constraints
        .iter()
        .map(|c| grid.iter().map(|&x| (c.power)(x.abs())).collect())
        .collect();
    let p_req: Vec<f64> = problem.eh_constraints.iter().map(|c| c.p_req).collect();

    // Up-front feasibility via the grid LP. Demands essentially at the
    // harvestable maximum are solved on the max-harvest face (the multiplier
    // diverges there); demands merely close to it are clamped for the dual
    // iteration and restored by the exact moment polish afterwards.
    let mut dual_req = p_req.clone();
    let mut endpoint: Option<usize> = None;
    for (l, c) in problem.eh_constraints.iter().enumerate() {
        if c.p_req > 0.0 {
            let (_, p_max) = oracle::lp_max_harvest(grid, &pl[l], problem.ap_budget)?;
            if c.p_req > p_max * (1.0 - opts.feasibility_margin) {
                return Err(SolverError::Infeasible {
                    receiver_id: c.receiver_id,
                    p_req: c.p_req,
                    p_max,
                });
            }
            if c.p_req >= p_max * (1.0 - 1e-6) {
                endpoint = Some(l);
            }

            dual_req[l] = c.p_req.min(p_max * (1.0 - 1e-2));
        }
    }
    if let Some(l) = endpoint {
        if let Some(sol) = solve_on_max_harvest_face(problem, opts, l, &cost, &pl)? {
            return Ok(sol);
        }
    }

    let domain_max = grid.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let probs = match &opts.initial_probs {
        Some(p) => {
            if p.len() != n {
                return Err(SolverError::Invalid(format!(
                    "initial_probs length {} does not match grid {}",
                    p.len(),
                    n
                )));
            }
            let total: f64 = p.iter().sum();
            p.iter().map(|v| (v / total).max(PROB_FLOOR)).collect()
        }
        None => vec![1.0 / n as f64; n],
    };
    let mut ctx = SolveCtx {
        problem,
        opts,
        cost,
        pl,
        p_req,
        dual_req,
        eval: Evaluator::build(&problem.channel, grid, domain_max, opts.quad_nodes),
        probs,
        reward: vec![0.0; n],
        logits: vec![0.0; n],
        gap_tol: (opts.inner_gap_tol * 1e3).max(1e-5),
        gap_ceiling: 1e-4,
        eval_budget: 1500,
    };

    let n_eh = problem.eh_constraints.len();
    let mut lam = vec![0.0; n_eh];
    let mut lambda0;
    let mut active: Vec<usize> = Vec::new();
    let coarse = 1e-4;
    let tight = 1e-6;

    // Coarse phase: locate the active set and rough multipliers.
    lambda0 = ctx.solve_ap(&lam, coarse)?;
    for _ in 0..=n_eh {
        let m = ctx.ba(lambda0, &lam);
        let worst = (0..n_eh)
            .filter(|l| !active.contains(l) && ctx.dual_req[*l] > 0.0)
            .map(|l| (l, (ctx.dual_req[l] - m.harvested[l]) / ctx.dual_req[l]))
            .filter(|(_, v)| *v > 1e-9)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match worst {
            Some((l, _)) => {
                active.push(l);
                active.sort_unstable();
                ctx.solve_active_set(&mut lambda0, &mut lam, &active, coarse)?;
            }
            None => break,
        }
    }

    // Tight phase on the settled active set.
    ctx.gap_tol = opts.inner_gap_tol;
    ctx.eval_budget = 5000;
    let residual = if active.is_empty() {
        lambda0 = ctx.solve_ap(&lam, tight)?;
        0.0
    } else {
        ctx.solve_active_set(&mut lambda0, &mut lam, &active, tight)?
    };

    // Drop numerically inactive multipliers from the active set.
    active.retain(|&l| lam[l] > 0.0);
    ctx.eval_budget = opts.max_inner_iterations;
    let pre = ctx.ba(lambda0, &lam);
    ctx.newton_refine();
    let ap_active = lambda0 > 0.0;
    ctx.polish(ap_active, &active);

    // Final consistent evaluation on the polished distribution. The polish
    // step enforces the active moment equalities exactly, so feasibility and
    // complementary slackness are judged here rather than on the dual
    // iteration's residuals.
    ctx.eval.set_probs(&ctx.probs);
    let dens = ctx.eval.info_densities();
    let final_m = ctx.moments_of(&ctx.probs, &dens, &ctx.reward);

    let mut feasible = final_m.mean_sq <= problem.ap_budget * (1.0 + 1e-9);
    if ap_active {
        feasible &=
            (final_m.mean_sq - problem.ap_budget).abs() <= 1e-9 * problem.ap_budget;
    }
    for l in 0..n_eh {
        if ctx.p_req[l] > 0.0 && final_m.harvested[l] < ctx.p_req[l] * (1.0 - 1e-9) {
            feasible = false;
        }
        if lam[l] > 0.0 && (final_m.harvested[l] - ctx.p_req[l]).abs() > 1e-9 * ctx.p_req[l] {
            feasible = false;
        }
    }
    let status = if feasible && pre.converged && residual <= 2e-2 {
        SolveStatus::Optimal
    } else {
        if std::env::var("SWIPT_STATUS_TRACE").is_ok() {
            eprintln!(
                "status degraded: feasible={feasible} pre_converged={} residual={residual:.3e} mean_sq={} vs {} harvested={:?} p_req={:?} lam={lam:?}",
                pre.converged, final_m.mean_sq, problem.ap_budget, final_m.harvested, ctx.p_req
            );
        }
        SolveStatus::MaxIterations
    };

    let dist = DiscreteDistribution::normalized(grid.clone(), ctx.probs.clone())?;
    Ok(CapacitySolution {
        dist,
        rate: final_m.mi,
        lambda0,
        lambdas: problem
            .eh_constraints
            .iter()
            .enumerate()
            .map(|(l, c)| (c.receiver_id, lam[l]))
            .collect(),
        harvested: problem
            .eh_constraints
            .iter()
            .enumerate()
            .map(|(l, c)| (c.receiver_id, final_m.harvested[l]))
            .collect(),
        status,
    })
}

/// Capacity of the AP- and PP-constrained channel without EH constraints
/// (the EH entries act as probes only: their harvested powers are reported,
/// their demands set to zero).
pub fn smith_capacity(
    channel: &ChannelModel,
    a: f64,
    sigma2: f64,
    grid_points: usize,
    probes: &[EhConstraint],
    opts: &SolveOptions,
) -> Result<CapacitySolution, SolverError> {
    let problem = CapacityProblem {
        grid: uniform_grid(channel, a, grid_points),
        channel: *channel,
        ap_budget: sigma2,
        eh_constraints: probes
            .iter()
            .map(|c| EhConstraint::new(c.receiver_id, c.power.clone(), 0.0))
            .collect(),
    };
    solve(&problem, opts)
}

/// Achievable rate restricted to an `m`-symbol equispaced constellation.
pub fn ask_constellation_rate(
    channel: &ChannelModel,
    m: usize,
    a: f64,
    sigma2: f64,
    eh_constraints: Vec<EhConstraint>,
    opts: &SolveOptions,
) -> Result<CapacitySolution, SolverError> {
    if m < 2 {
        return Err(SolverError::Invalid(format!(
            "constellation needs at least 2 symbols, got {m}"
        )));
    }
    let problem = CapacityProblem {
        grid: uniform_grid(channel, a, m),
        channel: *channel,
        ap_budget: sigma2,
        eh_constraints,
    };
    solve(&problem, opts)
}

/// Merge adjacent mass points (probability above the floor) within
/// `merge_radius` into probability-weighted centroids; returns the clustered
/// distribution and the cluster count.
pub fn mass_point_clustering(
    dist: &DiscreteDistribution,
    merge_radius: f64,
) -> (DiscreteDistribution, usize) {
    mass_point_clustering_with_floor(dist, merge_radius, DEFAULT_MASS_FLOOR)
}

pub fn mass_point_clustering_with_floor(
    dist: &DiscreteDistribution,
    merge_radius: f64,
    mass_floor: f64,
) -> (DiscreteDistribution, usize) {
    let mut clusters: Vec<(f64, f64)> = Vec::new(); // (weighted position sum, prob)
    let mut last_x: Option<f64> = None;
    for (&x, &p) in dist.support().iter().zip(dist.probs()) {
        if p <= mass_floor {
            continue;
        }
        match last_x {
            Some(prev) if x - prev <= merge_radius * (1.0 + 1e-9) => {
                let c = clusters.last_mut().expect("cluster exists");
                c.0 += p * x;
                c.1 += p;
            }
            _ => clusters.push((p * x, p)),
        }
        last_x = Some(x);
    }
    if clusters.is_empty() {
        // Everything under the floor: fall back to the raw argmax.
        let (j, _) = dist
            .probs()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty distribution");
        return (DiscreteDistribution::point_mass(dist.support()[j]), 1);
    }
    let count = clusters.len();
    let support: Vec<f64> = clusters.iter().map(|(sx, p)| sx / p).collect();
    let weights: Vec<f64> = clusters.iter().map(|(_, p)| *p).collect();
    let clustered =
        DiscreteDistribution::normalized(support, weights).expect("clustered support is sorted");
    (clustered, count)
}

/// Solve a demand sitting at the harvestable maximum: restrict the problem
/// to the optimal face of the max-harvest LP (where E[P] is an affine
/// function of E[x^2]), maximize the rate over that face, and report
/// multipliers on the dual ridge so the optimality condition holds on the
/// full grid.
fn solve_on_max_harvest_face(
    problem: &CapacityProblem,
    opts: &SolveOptions,
    l_end: usize,
    cost: &[f64],
    pl: &[Vec<f64>],
) -> Result<Option<CapacitySolution>, SolverError> {
    let grid = &problem.grid;
    let n = grid.len();
    let v = &pl[l_end];
    let p_req = problem.eh_constraints[l_end].p_req;
    let (vertex, p_max) = oracle::lp_max_harvest(grid, v, problem.ap_budget)?;
    // LP duals: E[P] = y* E[x^2] + z* on the optimal face.
    let (y_star, z_star) = if vertex.len() == 2 {
        let (x1, x2) = (vertex.support()[0], vertex.support()[1]);
        let (c1, c2) = (x1 * x1, x2 * x2);
        let f = |x: f64| {
            let j = grid.iter().position(|&g| g == x).expect("vertex on grid");
            v[j]
        };
        if (c2 - c1).abs() < 1e-300 {
            (0.0, p_max)
        } else {
            let y = (f(x2) - f(x1)) / (c2 - c1);
            (y, f(x1) - y * c1)
        }
    } else {
        (0.0, p_max)
    };
    if !(y_star > 0.0) {
        // Flat face (harvest independent of the second moment there); the
        // general dual path handles this case.
        return Ok(None);
    }
    let scale = v.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1e-300);
    // Reduced costs: d_j >= 0, zero exactly on the face.
    let deficit: Vec<f64> = (0..n)
        .map(|j| (y_star * cost[j] + z_star - v[j]).max(0.0))
        .collect();
    let face: Vec<usize> = (0..n).filter(|&j| deficit[j] <= 1e-9 * scale).collect();
    if face.len() < 2 {
        return Ok(None);
    }
    let face_grid: Vec<f64> = face.iter().map(|&j| grid[j]).collect();
    let face_problem = CapacityProblem {
        grid: face_grid.clone(),
        channel: problem.channel,
        ap_budget: problem.ap_budget,
        eh_constraints: vec![],
    };
    let face_pl: Vec<Vec<f64>> = pl
        .iter()
        .map(|pv| face.iter().map(|&j| pv[j]).collect())
        .collect();
    let m = face.len();
    let mut ctx = SolveCtx {
        problem: &face_problem,
        opts,
        cost: face.iter().map(|&j| cost[j]).collect(),
        pl: face_pl,
        p_req: vec![0.0; pl.len()],
        dual_req: vec![0.0; pl.len()],
        eval: Evaluator::build(
            &problem.channel,
            &face_grid,
            grid.iter().fold(0.0f64, |a, &x| a.max(x.abs())),
            opts.quad_nodes,
        ),
        probs: vec![1.0 / m as f64; m],
        reward: vec![0.0; m],
        logits: vec![0.0; m],
        gap_tol: opts.inner_gap_tol,
        gap_ceiling: 1e-4,
        eval_budget: opts.max_inner_iterations,
    };
    // On the face E[P] = y* E[x^2] + z*, so the demand pins the second
    // moment at m0 (the AP budget sits a sliver above it). Solve
    // E[x^2](nu) = m0 for the signed multiplier of the reward nu*x^2:
    // negative when, unconstrained, the face optimum overshoots m0.
    let m0 = (p_req - z_star) / y_star;
    if m0 > problem.ap_budget * (1.0 + 1e-9) {
        return Ok(None);
    }
    let mut nu = 0.0;
    let e0 = ctx.ba(-nu, &[]).mean_sq;
    if (e0 - m0).abs() > 1e-12 * m0.max(1e-300) {
        // Bracket in the direction that moves E[x^2] towards m0
        // (E is increasing in nu).
        let (mut lo, mut hi);
        let (mut glo, mut ghi);
        let mut step = 1.0 / problem.ap_budget;
        if e0 > m0 {
            hi = 0.0;
            ghi = e0 - m0;
            loop {
                lo = -step;
                glo = ctx.ba(-lo, &[]).mean_sq - m0;
                if glo < 0.0 {
                    break;
                }
                hi = lo;
                ghi = glo;
                step *= 4.0;
                if step > 1e40 {
                    return Err(SolverError::DualFailure(
                        "face moment bracket exceeded 1e40".into(),
                    ));
                }
            }
        } else {
            lo = 0.0;
            glo = e0 - m0;
            loop {
                hi = step;
                ghi = ctx.ba(-hi, &[]).mean_sq - m0;
                if ghi > 0.0 {
                    break;
                }
                lo = hi;
                glo = ghi;
                step *= 4.0;
                if step > 1e40 {
                    return Err(SolverError::DualFailure(
                        "face moment bracket exceeded 1e40".into(),
                    ));
                }
            }
        }
        let mut side = 0i8;
        for _ in 0..120 {
            let x = (glo * hi - ghi * lo) / (glo - ghi);
            let x = if x > lo && x < hi { x } else { 0.5 * (lo + hi) };
            let gx = ctx.ba(-x, &[]).mean_sq - m0;
            nu = x;
            if gx.abs() <= 1e-9 * m0.max(1e-300) || (hi - lo) <= 1e-14 * (hi.abs() + lo.abs()).max(1e-12) {
                break;
            }
            if gx < 0.0 {
                lo = x;
                glo = gx;
                if side == -1 {
                    ghi *= 0.5;
                }
                side = -1;
            } else {
                hi = x;
                ghi = gx;
                if side == 1 {
                    glo *= 0.5;
                }
                side = 1;
            }
        }
    }
    let mu = nu;
    let _ = ctx.ba(-mu, &[]);
    ctx.newton_refine();
    // Exact enforcement of the demand (affine in the face probabilities).
    {
        let targets: Vec<(&[f64], f64)> = vec![(&ctx.pl[l_end], p_req)];
        let nface = ctx.probs.len();
        for _ in 0..100 {
            let (f, t) = &targets[0];
            let mean: f64 = f.iter().zip(&ctx.probs).map(|(&a, &b)| a * b).sum();
            if ((t - mean) / t.abs().max(1e-300)).abs() < 1e-14 {
                break;
            }
            let var: f64 = f
                .iter()
                .zip(&ctx.probs)
                .map(|(&a, &b)| b * (a - mean) * (a - mean))
                .sum();
            if !(var > 0.0) {
                break;
            }
            let alpha = (t - mean) / var;
            let mut sum = 0.0;
            for j in 0..nface {
                ctx.probs[j] = (ctx.probs[j] + alpha * ctx.probs[j] * (f[j] - mean)).max(0.0);
                sum += ctx.probs[j];
            }
            for p in ctx.probs.iter_mut() {
                *p /= sum;
            }
        }
    }
    ctx.eval.set_probs(&ctx.probs);
    let dens = ctx.eval.info_densities();
    let final_m = ctx.moments_of(&ctx.probs, &dens, &ctx.reward);
    let value = final_m.lagrangian;
    // Ridge multipliers: lambda_l large enough that every off-face point's
    // advantage is covered by its reduced cost, lambda0 = y* lambda_l - mu.
    let mut lam_end = (2.0 * mu.max(0.0) / y_star).max(1.0 / scale);
    for j in 0..n {
        if deficit[j] > 1e-9 * scale {
            let benefit = ctx.eval.info_density_at(grid[j]) + mu * cost[j] - value;
            if benefit > 0.0 {
                lam_end = lam_end.max(2.0 * benefit / deficit[j]);
            }
        }
    }
    let lambda0 = (y_star * lam_end - mu).max(0.0);
    // Embed the face distribution in the full grid.
    let mut probs = vec![0.0; n];
    for (idx, &j) in face.iter().enumerate() {
        probs[j] = ctx.probs[idx];
    }
    let harvested: Vec<(usize, f64)> = problem
        .eh_constraints
        .iter()
        .enumerate()
        .map(|(l, c)| {
            (
                c.receiver_id,
                pl[l].iter().zip(&probs).map(|(&a, &b)| a * b).sum(),
            )
        })
        .collect();
    let mut feasible = final_m.mean_sq <= problem.ap_budget * (1.0 + 1e-9);
    for (l, c) in problem.eh_constraints.iter().enumerate() {
        if c.p_req > 0.0 && l != l_end {
            let h = harvested[l].1;
            if h < c.p_req * (1.0 - 1e-9) {
                feasible = false;
            }
        }
    }
    let h_end = harvested[l_end].1;
    feasible &= (h_end - p_req).abs() <= 1e-9 * p_req;
    Ok(Some(CapacitySolution {
        dist: DiscreteDistribution::normalized(grid.clone(), probs)?,
        rate: final_m.mi,
        lambda0,
        lambdas: problem
            .eh_constraints
            .iter()
            .enumerate()
            .map(|(l, c)| (c.receiver_id, if l == l_end { lam_end } else { 0.0 }))
            .collect(),
        harvested,
        status: if feasible {
            SolveStatus::Optimal
        } else {
            SolveStatus::MaxIterations
        },
    }))
}

/// Least-squares fit of the multipliers from the equality part of the
/// optimality condition over the solution's mass points, for use when a
/// distribution arrives without duals (e.g. re-read from a file).
pub fn recover_multipliers(
    dist: &DiscreteDistribution,
    problem: &CapacityProblem,
    opts: &VerifyOptions,
) -> (f64, Vec<f64>) {
    let n_eh = problem.eh_constraints.len();
    let k = 1 + n_eh;
    let domain_max = problem.grid.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let mut eval = Evaluator::build(&problem.channel, dist.support(), domain_max, opts.quad_nodes);
    eval.set_probs(dist.probs());
    let dens = eval.info_densities();
    let rate: f64 = dens.iter().zip(dist.probs()).map(|(&i, &p)| p * i).sum();
    // Equality at mass points: i(x) - C = lambda0 (x^2 - s2) - sum_l lambda_l (P_l(x) - p_req).
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (j, (&x, &p)) in dist.support().iter().zip(dist.probs()).enumerate() {
        if p <= opts.mass_floor {
            continue;
        }
        let mut row = Vec::with_capacity(k);
        row.push(x * x - problem.ap_budget);
        for c in &problem.eh_constraints {
            row.push(-((c.power)(x.abs()) - c.p_req));
        }
        rows.push((row, dens[j] - rate));
    }
    if rows.len() < k {
        return (0.0, vec![0.0; n_eh]);
    }
    // Normal equations.
    let mut ata = vec![0.0; k * k];
    let mut atb = vec![0.0; k];
    for (row, b) in &rows {
        for a in 0..k {
            atb[a] += row[a] * b;
            for c in 0..k {
                ata[a * k + c] += row[a] * row[c];
            }
        }
    }
    // Tikhonov floor keeps the system solvable when a column is all zeros.
    for a in 0..k {
        ata[a * k + a] += 1e-30;
    }
    let sol = solve_small_linear(&mut ata, &atb).unwrap_or_else(|| vec![0.0; k]);
    let lambda0 = sol[0].max(0.0);
    let lambdas = sol[1..].iter().map(|v| v.max(0.0)).collect();
    (lambda0, lambdas)
}

/// Check the necessary-and-sufficient optimality condition on a refined grid:
/// `s(x) >= -tol` everywhere and `|s| <= tol` at every mass point.
pub fn verify_optimality(
    solution: &CapacitySolution,
    problem: &CapacityProblem,
    opts: &VerifyOptions,
) -> OptimalityReport {
    let grid = &problem.grid;
    let solve_step = grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let step = opts.grid_step.unwrap_or(solve_step / 4.0);
    let lo = grid[0];
    let hi = *grid.last().expect("non-empty grid");
    let count = ((hi - lo) / step).round() as usize + 1;

    let domain_max = hi.abs().max(lo.abs());
    let mut eval = Evaluator::build(
        &problem.channel,
        solution.dist.support(),
        domain_max,
        opts.quad_nodes,
    );
    eval.set_probs(solution.dist.probs());

    let lam_of = |receiver_id: usize| solution.lambda_for(receiver_id).unwrap_or(0.0);
    let s_at = |x: f64, eval: &Evaluator| {
        let mut s = solution.rate + solution.lambda0 * (x * x - problem.ap_budget);
        for c in &problem.eh_constraints {
            s -= lam_of(c.receiver_id) * ((c.power)(x.abs()) - c.p_req);
        }
        s - eval.info_density_at(x)
    };

    let mut s_values = Vec::with_capacity(count);
    let mut min_s = f64::INFINITY;
    for i in 0..count {
        let x = lo + (hi - lo) * i as f64 / (count - 1) as f64;
        let s = s_at(x, &eval);
        if s < min_s {
            min_s = s;
        }
        s_values.push((x, s));
    }
    let mut max_abs_s_at_mass: f64 = 0.0;
    for (&x, &p) in solution.dist.support().iter().zip(solution.dist.probs()) {
        if p > opts.mass_floor {
            max_abs_s_at_mass = max_abs_s_at_mass.max(s_at(x, &eval).abs());
        }
    }
    let kkt_tol = opts
        .kkt_tol
        .unwrap_or_else(|| 1e-3 * solution.rate.max(0.01));
    OptimalityReport {
        s_values,
        min_s,
        max_abs_s_at_mass,
        kkt_tol,
        pass: min_s >= -kkt_tol && max_abs_s_at_mass <= kkt_tol,
    }
}
