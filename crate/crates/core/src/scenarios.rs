//! Deployment-level orchestration: path-loss channel gains, the effective
//! peak-amplitude constraint, the closed-form maximum-WPT distribution, the
//! truncated-Gaussian-plus-peaks suboptimal distribution, the
//! single-active-constraint reduction for multi-receiver systems, and
//! rate-energy curve sweeps.

use std::sync::Arc;

use thiserror::Error;

use crate::channel::{
    AmplitudeChannel, ChannelModel, DiscreteDistribution, RealAwgnChannel,
};
use crate::numerics;
use crate::rectenna::{HarvestModel, Rectenna, RectennaError};
use crate::solver::{
    self, CapacityProblem, CapacitySolution, EhConstraint, SolveOptions, SolverError,
    VerifyOptions,
};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Error)]
pub enum ScenarioError {
    #[error("invalid deployment: {0}")]
    Invalid(String),
    #[error("suboptimal-distribution peak mass {c} exceeds the AP-feasible bound {bound}")]
    PeakMassBound { c: f64, bound: f64 },
    #[error("peak amplitude {a} is in the saturated regime (A_sat = {a_sat}); the single-active-constraint reduction does not apply")]
    SaturatedRegime { a: f64, a_sat: f64 },
    #[error("unknown receiver id {0}")]
    UnknownReceiver(usize),
    #[error("single-constraint rate {single} and multi-constraint rate {multi} disagree beyond 1e-3 bits")]
    CrossCheckMismatch { single: f64, multi: f64 },
    #[error(transparent)]
    Rectenna(#[from] RectennaError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
}

/// Real-valued or complex-valued (amplitude) signalling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signalling {
    Real,
    Complex,
}

impl Signalling {
    pub fn default_grid_points(&self) -> usize {
        match self {
            Signalling::Real => 201,
            Signalling::Complex => 101,
        }
    }
}

/// One energy-harvesting receiver site.
#[derive(Debug, Clone)]
pub struct ReceiverSite {
    pub id: usize,
    /// Distance from the transmitter (m).
    pub d_e: f64,
    pub rectenna: Rectenna,
    /// Optional received-amplitude cap A_R (V).
    pub a_r: Option<f64>,
}

/// Transmitter, ID receiver, and EH receiver geometry plus the channel
/// parameters shared by every link.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub f_c: f64,
    pub alpha: f64,
    /// Transmitter to ID-receiver distance (m).
    pub d_i: f64,
    /// Noise power at the ID receiver (W; per signal dimension for complex).
    pub sigma_n2: f64,
    pub receivers: Vec<ReceiverSite>,
}

/// Transmit-side constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxConstraints {
    /// Average-power budget sigma^2 (W).
    pub sigma2: f64,
    /// Transmitter peak amplitude A_T (V).
    pub a_t: f64,
}

impl TxConstraints {
    pub fn new(sigma2: f64, a_t: f64) -> Result<Self, ScenarioError> {
        if !(sigma2 > 0.0) || !(a_t > 0.0) {
            return Err(ScenarioError::Invalid(format!(
                "sigma2 = {sigma2} and a_t = {a_t} must both be positive"
            )));
        }
        Ok(Self { sigma2, a_t })
    }
}

impl Deployment {
    pub fn new(
        f_c: f64,
        alpha: f64,
        d_i: f64,
        sigma_n2: f64,
        receivers: Vec<ReceiverSite>,
    ) -> Result<Self, ScenarioError> {
        if !(f_c > 0.0) {
            return Err(ScenarioError::Invalid(format!("carrier {f_c} Hz")));
        }
        if !(alpha >= 2.0) {
            return Err(ScenarioError::Invalid(format!(
                "path-loss exponent {alpha} must be >= 2"
            )));
        }
        if !(d_i > 0.0) {
            return Err(ScenarioError::Invalid(format!("ID distance {d_i} m")));
        }
        if !(sigma_n2 > 0.0) {
            return Err(ScenarioError::Invalid(format!("noise power {sigma_n2} W")));
        }
        for r in &receivers {
            if !(r.d_e > 0.0) {
                return Err(ScenarioError::Invalid(format!(
                    "receiver {} distance {} m",
                    r.id, r.d_e
                )));
            }
            if let Some(a_r) = r.a_r {
                if !(a_r > 0.0) {
                    return Err(ScenarioError::Invalid(format!(
                        "receiver {} amplitude cap {a_r} V",
                        r.id
                    )));
                }
            }
        }
        Ok(Self {
            f_c,
            alpha,
            d_i,
            sigma_n2,
            receivers,
        })
    }

    /// Free-space-style amplitude gain `|h| = (v / (4 pi d f_c))^(alpha/2)`.
    pub fn channel_gain(&self, distance: f64) -> f64 {
        assert!(distance > 0.0, "distance must be positive");
        (SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * distance * self.f_c))
            .powf(self.alpha / 2.0)
    }

    /// Amplitude gain of the ID link.
    pub fn id_gain(&self) -> f64 {
        self.channel_gain(self.d_i)
    }

    pub fn receiver(&self, id: usize) -> Result<&ReceiverSite, ScenarioError> {
        self.receivers
            .iter()
            .find(|r| r.id == id)
            .ok_or(ScenarioError::UnknownReceiver(id))
    }

    /// ID-receiver channel model for the chosen signalling.
    pub fn id_channel(&self, signalling: Signalling) -> Result<ChannelModel, ScenarioError> {
        let h = self.id_gain();
        Ok(match signalling {
            Signalling::Real => ChannelModel::Real(RealAwgnChannel::new(h, self.sigma_n2)?),
            Signalling::Complex => {
                ChannelModel::Amplitude(AmplitudeChannel::new(h, self.sigma_n2)?)
            }
        })
    }

    /// Approximate-model harvested power at receiver `id` as a function of
    /// the non-negative transmit amplitude.
    pub fn harvest_fn(&self, id: usize) -> Result<Arc<dyn Fn(f64) -> f64 + Send + Sync>, ScenarioError> {
        let site = self.receiver(id)?;
        let rectenna = site.rectenna.clone();
        let h_e = self.channel_gain(site.d_e);
        Ok(Arc::new(move |x: f64| {
            rectenna
                .harvested_power(x, h_e, HarvestModel::Approx)
                .expect("non-negative amplitude and positive gain")
        }))
    }
}

/// Per-receiver entries of the effective peak-amplitude computation.
#[derive(Debug, Clone)]
pub struct ReceiverPeak {
    pub id: usize,
    /// Amplitude gain of the EH link.
    pub h_e: f64,
    /// Transmit amplitude at which this receiver saturates.
    pub a_t_sat: f64,
    /// Transmit-amplitude equivalent of the receiver's A_R cap, if any.
    pub a_r_limit: Option<f64>,
}

/// Result of the effective peak-amplitude aggregation.
#[derive(Debug, Clone)]
pub struct PeakSummary {
    /// Effective PP constraint A = min(A_T, min_l A_R_l / (sqrt(2) h_l)).
    pub a: f64,
    /// A_sat = min(A_T, min_l A_T,sat_l).
    pub a_sat: f64,
    pub per_receiver: Vec<ReceiverPeak>,
}

impl PeakSummary {
    /// Smallest transmit amplitude that saturates any receiver.
    pub fn receiver_sat_limit(&self) -> f64 {
        self.per_receiver
            .iter()
            .map(|r| r.a_t_sat)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Aggregate the transmitter and receiver amplitude limits.
pub fn effective_peak(
    tx: &TxConstraints,
    deployment: &Deployment,
) -> Result<PeakSummary, ScenarioError> {
    let mut a = tx.a_t;
    let mut a_sat = tx.a_t;
    let mut per_receiver = Vec::with_capacity(deployment.receivers.len());
    for site in &deployment.receivers {
        let h_e = deployment.channel_gain(site.d_e);
        let a_t_sat = site.rectenna.saturation_amplitude(h_e)?;
        let a_r_limit = site.a_r.map(|a_r| a_r / (std::f64::consts::SQRT_2 * h_e));
        if let Some(limit) = a_r_limit {
            a = a.min(limit);
        }
        a_sat = a_sat.min(a_t_sat);
        per_receiver.push(ReceiverPeak {
            id: site.id,
            h_e,
            a_t_sat,
            a_r_limit,
        });
    }
    Ok(PeakSummary {
        a,
        a_sat,
        per_receiver,
    })
}

/// Closed-form maximum-WPT solution for one receiver.
#[derive(Debug, Clone)]
pub struct MaxWpt {
    pub dist: DiscreteDistribution,
    /// Maximum average harvested power (W).
    pub p_max: f64,
    /// The effective peak A' = min(A, A_T,sat) actually used.
    pub a_eff: f64,
}

/// On-off maximum-WPT distribution and its harvested power: masses at
/// `{-A', 0, A'}` (real) or `{0, A'}` (amplitude) with total peak mass
/// `min(sigma^2 / A'^2, 1)`.
pub fn max_wpt(
    deployment: &Deployment,
    receiver_id: usize,
    a: f64,
    sigma2: f64,
    signalling: Signalling,
    split: Option<(f64, f64)>,
) -> Result<MaxWpt, ScenarioError> {
    let site = deployment.receiver(receiver_id)?;
    let h_e = deployment.channel_gain(site.d_e);
    let a_eff = a.min(site.rectenna.saturation_amplitude(h_e)?);
    let peak_mass = (sigma2 / (a_eff * a_eff)).min(1.0);
    let p_at_peak = site
        .rectenna
        .harvested_power(a_eff, h_e, HarvestModel::Approx)?;
    let p_max = peak_mass * p_at_peak;
    let dist = match signalling {
        Signalling::Real => {
            let (p, q) = match split {
                Some((p, q)) => {
                    if !(p >= 0.0 && q >= 0.0) || (p + q - peak_mass).abs() > 1e-12 {
                        return Err(ScenarioError::Invalid(format!(
                            "split ({p}, {q}) must be non-negative with p + q = {peak_mass}"
                        )));
                    }
                    (p, q)
                }
                // Symmetric split maximizes the information rate.
                None => (0.5 * peak_mass, 0.5 * peak_mass),
            };
            DiscreteDistribution::new(
                vec![-a_eff, 0.0, a_eff],
                vec![p, (1.0 - peak_mass).max(0.0), q],
            )?
        }
        Signalling::Complex => DiscreteDistribution::new(
            vec![0.0, a_eff],
            vec![(1.0 - peak_mass).max(0.0), peak_mass],
        )?,
    };
    Ok(MaxWpt { dist, p_max, a_eff })
}

/// The truncated-Gaussian-plus-peaks suboptimal input distribution.
#[derive(Debug, Clone)]
pub struct SuboptimalDistribution {
    /// Density scale of the truncated Gaussian part.
    pub b: f64,
    /// Mass on each peak.
    pub c: f64,
    /// Largest AP-feasible peak mass for these parameters.
    pub c_bound: f64,
    pub dist: DiscreteDistribution,
}

/// Build `f_s(x) = b e^(-d x^2) + c [delta(x + A') + delta(x - A')]` and its
/// grid discretization. `c_mass` must not exceed the AP-feasibility bound.
pub fn suboptimal_distribution(
    a_prime: f64,
    sigma2: f64,
    d_param: f64,
    c_mass: f64,
    grid_points: usize,
) -> Result<SuboptimalDistribution, ScenarioError> {
    if !(d_param > 0.0) || !(a_prime > 0.0) {
        return Err(ScenarioError::Invalid(format!(
            "need positive d ({d_param}) and A' ({a_prime})"
        )));
    }
    if grid_points < 3 {
        return Err(ScenarioError::Invalid(
            "discretization needs at least 3 grid points".into(),
        ));
    }
    let sd = d_param.sqrt();
    let erf_term = numerics::erf(sd * a_prime);
    let gauss_mass_unit = (std::f64::consts::PI / d_param).sqrt() * erf_term;
    let edge = a_prime * (-d_param * a_prime * a_prime).exp()
        / ((std::f64::consts::PI * d_param).sqrt() * erf_term);
    let c_bound = (sigma2 - 0.5 / d_param + edge)
        / (2.0 * a_prime * a_prime - 1.0 / d_param + 2.0 * edge);
    if !(0.0..=1.0).contains(&c_mass) || c_mass > c_bound {
        return Err(ScenarioError::PeakMassBound {
            c: c_mass,
            bound: c_bound,
        });
    }
    let b = (1.0 - 2.0 * c_mass) / gauss_mass_unit;
    let n = grid_points;
    let dx = 2.0 * a_prime / (n - 1) as f64;
    let mut support = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let x = -a_prime + dx * i as f64;
        let w = if i == 0 || i == n - 1 {
            c_mass
        } else {
            b * (-d_param * x * x).exp() * dx
        };
        support.push(x);
        weights.push(w.max(0.0));
    }
    let dist = DiscreteDistribution::normalized(support, weights)?;
    Ok(SuboptimalDistribution {
        b,
        c: c_mass,
        c_bound,
        dist,
    })
}

/// Settings shared by the scenario-level solves.
#[derive(Debug, Clone)]
pub struct ScenarioSettings {
    /// Grid points over the input domain; defaults to 201 (real) / 101
    /// (amplitude).
    pub grid_points: Option<usize>,
    pub solve: SolveOptions,
    /// Run the multi-constraint cross-check inside `active_constraint`.
    pub cross_check: bool,
}

impl Default for ScenarioSettings {
    fn default() -> Self {
        Self {
            grid_points: None,
            solve: SolveOptions::default(),
            cross_check: false,
        }
    }
}

/// Assemble the discretized capacity problem for a deployment: effective
/// peak, ID channel, and one EH constraint per receiver (zero demand where
/// none is given, so every receiver's harvest is still reported).
pub fn build_problem(
    deployment: &Deployment,
    tx: &TxConstraints,
    signalling: Signalling,
    demands: &[(usize, f64)],
    settings: &ScenarioSettings,
) -> Result<CapacityProblem, ScenarioError> {
    let peak = effective_peak(tx, deployment)?;
    let channel = deployment.id_channel(signalling)?;
    let points = settings
        .grid_points
        .unwrap_or_else(|| signalling.default_grid_points());
    let mut eh = Vec::with_capacity(deployment.receivers.len());
    for site in &deployment.receivers {
        let p_req = demands
            .iter()
            .find(|(id, _)| *id == site.id)
            .map(|(_, p)| *p)
            .unwrap_or(0.0);
        eh.push(EhConstraint::new(site.id, deployment.harvest_fn(site.id)?, p_req));
    }
    Ok(CapacityProblem {
        grid: solver::uniform_grid(&channel, peak.a, points),
        channel,
        ap_budget: tx.sigma2,
        eh_constraints: eh,
    })
}

/// Outcome of the single-active-constraint reduction.
#[derive(Debug, Clone)]
pub struct ActiveConstraintReport {
    /// The receiver whose constraint is active, or `None` when every demand
    /// is already met by the unconstrained optimum.
    pub receiver: Option<usize>,
    /// Achievable rate of each single-constraint problem.
    pub single_rates: Vec<(usize, f64)>,
    /// Two candidates were within 1e-6 bits of each other.
    pub tie: bool,
    /// Rate of the full multi-constraint solve, when cross-checking.
    pub multi_rate: Option<f64>,
}

/// Identify the single active EH constraint in the unsaturated regime by
/// solving the L single-constraint problems and returning the rate-minimal
/// one. Refuses to run when `A >= A_sat`.
pub fn active_constraint(
    deployment: &Deployment,
    tx: &TxConstraints,
    demands: &[(usize, f64)],
    signalling: Signalling,
    settings: &ScenarioSettings,
) -> Result<ActiveConstraintReport, ScenarioError> {
    let peak = effective_peak(tx, deployment)?;
    let sat_limit = peak.receiver_sat_limit();
    if peak.a >= sat_limit {
        return Err(ScenarioError::SaturatedRegime {
            a: peak.a,
            a_sat: sat_limit,
        });
    }
    // Unconstrained (max-WIT) solve: P_l,min for every receiver.
    let base = solve_with_demands(deployment, tx, signalling, &[], settings)?;
    let all_slack = demands.iter().all(|(id, p_req)| {
        base.harvested_for(*id)
            .map(|h| h >= *p_req)
            .unwrap_or(false)
    });
    if all_slack {
        return Ok(ActiveConstraintReport {
            receiver: None,
            single_rates: demands.iter().map(|(id, _)| (*id, base.rate)).collect(),
            tie: false,
            multi_rate: None,
        });
    }
    let mut single_rates = Vec::with_capacity(demands.len());
    for (id, p_req) in demands {
        let rate = if base.harvested_for(*id).is_some_and(|h| h >= *p_req) {
            base.rate
        } else {
            solve_with_demands(deployment, tx, signalling, &[(*id, *p_req)], settings)?.rate
        };
        single_rates.push((*id, rate));
    }
    let (&(mut best_id), mut best_rate) = {
        let first = &single_rates[0];
        (&first.0, first.1)
    };
    let mut tie = false;
    for (id, rate) in single_rates.iter().skip(1) {
        if *rate < best_rate - 1e-6 {
            best_id = *id;
            best_rate = *rate;
        } else if (*rate - best_rate).abs() <= 1e-6 {
            tie = true;
            if *id < best_id && *rate <= best_rate {
                best_id = *id;
                best_rate = best_rate.min(*rate);
            }
        }
    }
    let multi_rate = if settings.cross_check {
        let multi = solve_with_demands(deployment, tx, signalling, demands, settings)?;
        if (multi.rate - best_rate).abs() > 1e-3 {
            return Err(ScenarioError::CrossCheckMismatch {
                single: best_rate,
                multi: multi.rate,
            });
        }
        Some(multi.rate)
    } else {
        None
    };
    Ok(ActiveConstraintReport {
        receiver: Some(best_id),
        single_rates,
        tie,
        multi_rate,
    })
}

/// Convenience wrapper: build and solve the scenario problem.
pub fn solve_with_demands(
    deployment: &Deployment,
    tx: &TxConstraints,
    signalling: Signalling,
    demands: &[(usize, f64)],
    settings: &ScenarioSettings,
) -> Result<CapacitySolution, ScenarioError> {
    let problem = build_problem(deployment, tx, signalling, demands, settings)?;
    Ok(solver::solve(&problem, &settings.solve)?)
}

/// One point of a rate-energy trace.
#[derive(Debug, Clone)]
pub struct RETracePoint {
    /// Required power of the swept receiver (W).
    pub p_req: f64,
    pub rate: f64,
    /// Average harvested power of every receiver (W).
    pub harvested: Vec<(usize, f64)>,
    pub dist: DiscreteDistribution,
    pub verified: bool,
    /// Present when this point failed to solve.
    pub failure: Option<String>,
}

/// A rate-energy tradeoff trace for one swept receiver.
#[derive(Debug, Clone)]
pub struct RETrace {
    pub receiver_id: usize,
    pub points: Vec<RETracePoint>,
}

/// Sweep the required power of `receiver_id` over `p_req_grid`, solving and
/// verifying each point.
pub fn re_sweep(
    deployment: &Deployment,
    tx: &TxConstraints,
    receiver_id: usize,
    p_req_grid: &[f64],
    signalling: Signalling,
    settings: &ScenarioSettings,
) -> Result<RETrace, ScenarioError> {
    deployment.receiver(receiver_id)?;
    let problem_proto = build_problem(deployment, tx, signalling, &[], settings)?;
    let mut points = Vec::with_capacity(p_req_grid.len());
    for &p_req in p_req_grid {
        let mut problem = problem_proto.clone();
        for c in problem.eh_constraints.iter_mut() {
            if c.receiver_id == receiver_id {
                c.p_req = p_req;
            }
        }
        match solver::solve(&problem, &settings.solve) {
            Ok(sol) => {
                let report = solver::verify_optimality(
                    &sol,
                    &problem,
                    &VerifyOptions {
                        kkt_tol: settings.solve.kkt_tol,
                        quad_nodes: settings.solve.quad_nodes,
                        ..VerifyOptions::default()
                    },
                );
                points.push(RETracePoint {
                    p_req,
                    rate: sol.rate,
                    harvested: sol.harvested.clone(),
                    dist: sol.dist.clone(),
                    verified: report.pass,
                    failure: None,
                });
            }
            Err(e) => points.push(RETracePoint {
                p_req,
                rate: f64::NAN,
                harvested: vec![],
                dist: DiscreteDistribution::point_mass(0.0),
                verified: false,
                failure: Some(e.to_string()),
            }),
        }
    }
    Ok(RETrace {
        receiver_id,
        points,
    })
}

/// Linear sweep grid over `[0, p_max (1 - 1e-9)]`.
pub fn linear_preq_grid(p_max: f64, points: usize) -> Vec<f64> {
    let top = p_max * (1.0 - 1e-9);
    (0..points)
        .map(|i| top * i as f64 / (points - 1).max(1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::oracle;

    fn table_deployment(distances: &[f64], sigma_n2: f64) -> Deployment {
        let receivers = distances
            .iter()
            .enumerate()
            .map(|(i, &d)| ReceiverSite {
                id: i + 1,
                d_e: d,
                rectenna: Rectenna::reference(),
                a_r: None,
            })
            .collect();
        Deployment::new(2.45e9, 2.5, 25.0, sigma_n2, receivers).unwrap()
    }

    #[test]
    fn channel_gain_reference_values() {
        let dep = table_deployment(&[5.0], 1e-11);
        // 50-digit reference arithmetic.
        assert_relative_eq!(dep.channel_gain(5.0), 4.0911314871692924e-4, max_relative = 1e-12);
        assert_relative_eq!(
            dep.channel_gain(25.0) * dep.channel_gain(25.0),
            2.9940694135824142e-9,
            max_relative = 1e-12
        );
        // alpha = 2: doubling the distance halves the gain.
        let dep2 = Deployment::new(2.45e9, 2.0, 25.0, 1e-11, vec![]).unwrap();
        assert_relative_eq!(
            dep2.channel_gain(10.0),
            dep2.channel_gain(5.0) / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn effective_peak_reference_anchor() {
        let dep = table_deployment(&[5.0], 1e-11);
        let tx = TxConstraints::new(2.0, 100.0).unwrap();
        let peak = effective_peak(&tx, &dep).unwrap();
        // No receiver caps: A = A_T.
        assert_eq!(peak.a, 100.0);
        // A_T,sat at 5 m lands on the 33.3 V anchor.
        assert_relative_eq!(peak.per_receiver[0].a_t_sat, 33.3129, max_relative = 1e-4);
        assert_relative_eq!(peak.a_sat, peak.per_receiver[0].a_t_sat, max_relative = 1e-14);
    }

    #[test]
    fn effective_peak_with_saturation_cap() {
        // A_R = sqrt(2 P_in,sat) turns the cap into exactly A_T,sat.
        let mut dep = table_deployment(&[5.0], 1e-11);
        let sat = dep.receivers[0].rectenna.pin_sat().unwrap();
        dep.receivers[0].a_r = Some((2.0 * sat.p_in_sat).sqrt());
        let tx = TxConstraints::new(2.0, 100.0).unwrap();
        let peak = effective_peak(&tx, &dep).unwrap();
        assert_relative_eq!(
            peak.a,
            peak.per_receiver[0].a_t_sat,
            max_relative = 1e-12
        );
        // Removing the cap never decreases A.
        dep.receivers[0].a_r = None;
        let peak2 = effective_peak(&tx, &dep).unwrap();
        assert!(peak2.a >= peak.a);
    }

    #[test]
    fn max_wpt_structure_and_value() {
        let dep = table_deployment(&[5.0], 1e-11);
        let sigma2 = 1e-3 * 10f64.powf(3.3); // 33 dBm
        let a = 3.0 * sigma2.sqrt();
        let w = max_wpt(&dep, 1, a, sigma2, Signalling::Real, None).unwrap();
        // A = 3 sigma < A_T,sat: peak mass sigma^2/A^2 = 1/9, mass 8/9 at 0.
        assert_relative_eq!(w.a_eff, a, max_relative = 1e-12);
        assert_relative_eq!(w.dist.probs()[1], 8.0 / 9.0, max_relative = 1e-12);
        assert_relative_eq!(
            w.dist.probs()[0] + w.dist.probs()[2],
            1.0 / 9.0,
            max_relative = 1e-12
        );
        // p = q by default.
        assert_relative_eq!(w.dist.probs()[0], w.dist.probs()[2], max_relative = 1e-12);
        // Closed-form P_max = (sigma^2/A^2) P(A).
        let h_e = dep.channel_gain(5.0);
        let p_a = dep.receivers[0]
            .rectenna
            .harvested_power(a, h_e, HarvestModel::Approx)
            .unwrap();
        assert_relative_eq!(w.p_max, p_a / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn max_wpt_saturates_beyond_a_t_sat() {
        let dep = table_deployment(&[5.0], 1e-11);
        let sigma2 = 1e-3 * 10f64.powf(3.3);
        let a_sat = effective_peak(&TxConstraints::new(sigma2, 1e3).unwrap(), &dep)
            .unwrap()
            .per_receiver[0]
            .a_t_sat;
        let w1 = max_wpt(&dep, 1, a_sat, sigma2, Signalling::Real, None).unwrap();
        let w2 = max_wpt(&dep, 1, 2.0 * a_sat, sigma2, Signalling::Real, None).unwrap();
        assert_eq!(w1.p_max, w2.p_max);
        assert_eq!(w1.dist.support(), w2.dist.support());
        assert_eq!(w1.dist.probs(), w2.dist.probs());
    }

    #[test]
    fn max_wpt_full_power_regime() {
        // sigma^2 >= A^2: all mass on the peaks, none at zero.
        let dep = table_deployment(&[5.0], 1e-11);
        let w = max_wpt(&dep, 1, 1.0, 4.0, Signalling::Real, None).unwrap();
        assert_eq!(w.dist.probs()[1], 0.0);
        assert_relative_eq!(w.dist.probs()[0] + w.dist.probs()[2], 1.0);
        let h_e = dep.channel_gain(5.0);
        let p_a = dep.receivers[0]
            .rectenna
            .harvested_power(1.0, h_e, HarvestModel::Approx)
            .unwrap();
        assert_relative_eq!(w.p_max, p_a, max_relative = 1e-12);
    }

    #[test]
    fn max_wpt_matches_lp_oracle() {
        let dep = table_deployment(&[5.0], 1e-11);
        let h_e = dep.channel_gain(5.0);
        let rect = &dep.receivers[0].rectenna;
        let a_t_sat = rect.saturation_amplitude(h_e).unwrap();
        // Randomized (sigma^2, A) pairs below saturation, via the oracle's
        // own deterministic stream.
        for k in 0..10 {
            let u1 = (k as f64 * 0.337).fract() * 0.8 + 0.1;
            let u2 = (k as f64 * 0.731 + 0.2).fract() * 0.8 + 0.1;
            let a = u1 * a_t_sat;
            let sigma2 = u2 * a * a; // keep sigma^2 < A^2
            let grid: Vec<f64> = (0..401)
                .map(|i| -a + 2.0 * a * i as f64 / 400.0)
                .collect();
            let pv: Vec<f64> = grid
                .iter()
                .map(|&x| {
                    rect.harvested_power(x.abs(), h_e, HarvestModel::Approx)
                        .unwrap()
                })
                .collect();
            let (_, lp_max) = oracle::lp_max_harvest(&grid, &pv, sigma2).unwrap();
            let w = max_wpt(&dep, 1, a, sigma2, Signalling::Real, None).unwrap();
            assert_relative_eq!(w.p_max, lp_max, max_relative = 1e-6);
        }
    }

    #[test]
    fn suboptimal_distribution_basics() {
        let a = 3.0;
        let sigma2 = 2.0;
        let d = 0.5;
        // c = 0: pure truncated Gaussian with unit mass by construction.
        let s = suboptimal_distribution(a, sigma2, d, 0.0, 201).unwrap();
        let spec = numerics::QuadratureSpec::new(2048, -a, a).unwrap();
        let mass = numerics::integrate(|x| s.b * (-d * x * x).exp(), &spec).unwrap();
        assert!((mass - 1.0).abs() < 1e-10, "mass = {mass}");
        assert!((s.dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        // c at its bound: AP constraint met with equality (quadrature check).
        let s2 = suboptimal_distribution(a, sigma2, d, s.c_bound, 201).unwrap();
        let e2_gauss = numerics::integrate(|x| s2.b * x * x * (-d * x * x).exp(), &spec).unwrap();
        let e2 = e2_gauss + 2.0 * s2.c * a * a;
        assert_relative_eq!(e2, sigma2, max_relative = 1e-9);

        // c above the bound is rejected with the bound reported.
        match suboptimal_distribution(a, sigma2, d, s.c_bound * 1.01, 201) {
            Err(ScenarioError::PeakMassBound { bound, .. }) => {
                assert_relative_eq!(bound, s.c_bound, max_relative = 1e-12)
            }
            other => panic!("expected PeakMassBound, got {other:?}"),
        }
    }

    #[test]
    fn order_preservation_across_receivers() {
        // Below saturation, if one receiver harvests more under F_a than
        // F_b, every receiver does.
        let dep = table_deployment(&[3.0, 3.5, 4.0], 1e-8);
        let hfs: Vec<_> = (1..=3).map(|id| dep.harvest_fn(id).unwrap()).collect();
        let a = 10.0; // below every A_T,sat (17.6 m is the smallest)
        let make = |seed: u64| {
            let support: Vec<f64> = (0..9).map(|i| -a + 2.0 * a * i as f64 / 8.0).collect();
            let weights: Vec<f64> = (0..9)
                .map(|i| ((seed as f64 * 0.61 + i as f64 * 1.7).sin().abs() + 0.05))
                .collect();
            DiscreteDistribution::normalized(support, weights).unwrap()
        };
        for k in 0..20 {
            let fa = make(2 * k);
            let fb = make(2 * k + 1);
            let harvest = |f: &DiscreteDistribution, l: usize| f.expectation(|x| hfs[l](x.abs()));
            let cmp0 = harvest(&fa, 0) > harvest(&fb, 0);
            for l in 1..3 {
                assert_eq!(
                    harvest(&fa, l) > harvest(&fb, l),
                    cmp0,
                    "order flips at receiver {l} (pair {k})"
                );
            }
        }
    }

    #[test]
    fn active_constraint_simple_cases() {
        let dep = table_deployment(&[5.0], 1e-8);
        let sigma2 = 1e-3 * 10f64.powf(3.3);
        let tx = TxConstraints::new(sigma2, 3.0 * sigma2.sqrt()).unwrap();
        let mut settings = ScenarioSettings::default();
        settings.grid_points = Some(101);
        // Zero demand: nothing active.
        let rep = active_constraint(&dep, &tx, &[(1, 0.0)], Signalling::Real, &settings).unwrap();
        assert_eq!(rep.receiver, None);
        // A demand above the passive harvest: receiver 1 is the active one.
        let base = solve_with_demands(&dep, &tx, Signalling::Real, &[], &settings).unwrap();
        let demand = base.harvested_for(1).unwrap() * 1.5;
        let rep =
            active_constraint(&dep, &tx, &[(1, demand)], Signalling::Real, &settings).unwrap();
        assert_eq!(rep.receiver, Some(1));
    }

    #[test]
    fn active_constraint_refuses_saturated_regime() {
        let dep = table_deployment(&[5.0], 1e-8);
        let tx = TxConstraints::new(2.0, 50.0).unwrap(); // A_T > A_T,sat = 33.3 V
        let err = active_constraint(
            &dep,
            &tx,
            &[(1, 1e-6)],
            Signalling::Real,
            &ScenarioSettings::default(),
        );
        assert!(matches!(err, Err(ScenarioError::SaturatedRegime { .. })));
    }

    #[test]
    fn re_sweep_monotone_and_pinned() {
        let dep = table_deployment(&[5.0], 1e-8);
        let sigma2 = 1e-3 * 10f64.powf(3.3);
        let tx = TxConstraints::new(sigma2, 3.0 * sigma2.sqrt()).unwrap();
        let mut settings = ScenarioSettings::default();
        settings.grid_points = Some(101);
        let w = max_wpt(&dep, 1, tx.a_t, sigma2, Signalling::Real, None).unwrap();
        let grid = linear_preq_grid(w.p_max, 5);
        let trace = re_sweep(&dep, &tx, 1, &grid, Signalling::Real, &settings).unwrap();
        assert_eq!(trace.points.len(), 5);
        for pt in &trace.points {
            assert!(pt.failure.is_none(), "{:?}", pt.failure);
            assert!(pt.verified, "point at {} not verified", pt.p_req);
        }
        for w2 in trace.points.windows(2) {
            assert!(
                w2[1].rate <= w2[0].rate + 1e-6,
                "rates increased: {} -> {}",
                w2[0].rate,
                w2[1].rate
            );
        }
        // First point: the unconstrained (max-WIT) solve.
        let base = solve_with_demands(&dep, &tx, Signalling::Real, &[], &settings).unwrap();
        assert!((trace.points[0].rate - base.rate).abs() < 1e-9);
    }
}
