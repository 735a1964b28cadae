//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured values (run with `--nocapture` to see every line).
//!
//! The scenarios pin the reference build (SMS7630 rectenna at 2.45 GHz, the
//! free-space deployment geometry) and the numeric anchors at their stated
//! tolerances.

use std::sync::Arc;

use swipt_core::channel::{AmplitudeChannel, ChannelModel, DiscreteDistribution, RealAwgnChannel};
use swipt_core::oracle::{self, McSpec};
use swipt_core::rectenna::{HarvestModel, Rectenna};
use swipt_core::scenarios::{
    self, Deployment, ReceiverSite, ScenarioSettings, Signalling, TxConstraints,
};
use swipt_core::solver::{
    self, mass_point_clustering, verify_optimality, CapacityProblem, EhConstraint, SolveOptions,
    SolveStatus, VerifyOptions,
};

fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

fn w_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn single_receiver_deployment(d_e: f64, sigma_n2: f64) -> Deployment {
    Deployment::new(
        2.45e9,
        2.5,
        25.0,
        sigma_n2,
        vec![ReceiverSite {
            id: 1,
            d_e,
            rectenna: Rectenna::reference(),
            a_r: None,
        }],
    )
    .unwrap()
}

/// Deterministic pseudo-random stream for test inputs.
fn lcg(seed: &mut u64) -> f64 {
    *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    ((*seed >> 11) as f64) / ((1u64 << 53) as f64)
}

#[test]
fn criterion_01_saturation_anchor() {
    let dep = single_receiver_deployment(5.0, 1e-11);
    let rect = Rectenna::reference();
    let sat = rect.pin_sat().unwrap();
    let a_t_sat = sat.p_in_sat.sqrt() / dep.channel_gain(5.0);
    let dbm = w_to_dbm(sat.p_in_sat);
    let ok_a = (a_t_sat - 33.28).abs() / 33.28 <= 0.01;
    let ok_p = dbm > -8.0 && dbm < -6.5;
    println!(
        "criterion 01 ({}): A_T,sat = {a_t_sat:.3} V (anchor 33.28 +- 1%), P_in,sat = {dbm:.3} dBm (window (-8.0, -6.5))",
        verdict(ok_a && ok_p)
    );
    assert!(ok_a && ok_p);
}

#[test]
fn criterion_02_plateau() {
    let rect = Rectenna::reference();
    let sat = rect.pin_sat().unwrap();
    let beta_10x = rect.beta_from_pin(10.0 * sat.p_in_sat).unwrap();
    let p_approx = rect.pout_approx(beta_10x);
    let p_exact = rect.pout_exact(beta_10x).unwrap();
    let ok_approx = p_approx == 1.0e-4;
    let exact_err = (p_exact - 1.0e-4).abs() / 1.0e-4;
    let ok_exact = exact_err <= 0.05;
    println!(
        "criterion 02 ({}): approx plateau = {p_approx:.6e} W (exactly 1e-4: {}), exact model = {p_exact:.6e} W ({:.2}% from 1e-4, tolerance 5%)",
        verdict(ok_approx && ok_exact),
        verdict(ok_approx),
        exact_err * 100.0
    );
    assert!(ok_approx, "approx plateau must equal 1e-4 W exactly");
    // The exact model settles at (B_v + eta V_T ln(I_s/I_Bv)) / (2(1+R_s/R_L))
    // = 0.9577 V, i.e. 8.3% below the plateau power, for the SMS7630
    // asymmetry I_Bv/I_s = 20; the 5% bound cannot be met by this circuit.
    assert!(
        ok_exact,
        "exact model {p_exact:.6e} W deviates {:.2}% from 1e-4 W (> 5%)",
        exact_err * 100.0
    );
}

#[test]
fn criterion_03_model_agreement() {
    let rect = Rectenna::reference();
    let mut worst: f64 = 0.0;
    let mut dbm = -40.0;
    while dbm <= -20.0 + 1e-9 {
        let beta = rect.beta_from_pin(dbm_to_w(dbm)).unwrap();
        let pe = rect.pout_exact(beta).unwrap();
        let pl = rect.pout_lowpower(beta);
        worst = worst.max((pe - pl).abs() / pl);
        dbm += 0.5;
    }
    let ok = worst <= 0.02;
    println!(
        "criterion 03 ({}): worst exact-vs-closed-form deviation {worst:.3e} over [-40, -20] dBm (tolerance 2%)",
        verdict(ok)
    );
    assert!(ok);
}

#[test]
fn criterion_04_complex_capacity_anchor() {
    let sigma2 = dbm_to_w(43.0);
    let dep = single_receiver_deployment(5.0, dbm_to_w(-50.0));
    let tx = TxConstraints::new(sigma2, 3.0 * sigma2.sqrt()).unwrap();
    let sol =
        scenarios::solve_with_demands(&dep, &tx, Signalling::Complex, &[], &ScenarioSettings::default())
            .unwrap();
    let ok = (sol.rate - 2.0).abs() <= 0.05 && sol.status == SolveStatus::Optimal;
    println!(
        "criterion 04 ({}): complex no-EH rate = {:.4} bits/channel use (anchor 2.00 +- 0.05)",
        verdict(ok),
        sol.rate
    );
    assert!(ok, "rate = {}", sol.rate);
}

#[test]
fn criterion_05_optimality_verification() {
    // A representative set of Optimal solutions, each checked against the
    // necessary-and-sufficient condition on a 4x refined grid.
    let sigma2 = dbm_to_w(33.0);
    let dep = single_receiver_deployment(5.0, 1e-11);
    let tx = TxConstraints::new(sigma2, 3.0 * sigma2.sqrt()).unwrap();
    let settings = ScenarioSettings::default();
    let mut all_ok = true;

    let mut check = |name: &str, problem: &CapacityProblem, sol: &solver::CapacitySolution| {
        let report = verify_optimality(sol, problem, &VerifyOptions::default());
        all_ok &= report.pass && sol.status == SolveStatus::Optimal;
        println!(
            "  - {name}: status {:?}, min_s = {:.3e}, |s|_mass = {:.3e}, tol = {:.3e} ({})",
            sol.status,
            report.min_s,
            report.max_abs_s_at_mass,
            report.kkt_tol,
            verdict(report.pass)
        );
    };

    // Real, no EH demand.
    let p0 = scenarios::build_problem(&dep, &tx, Signalling::Real, &[], &settings).unwrap();
    let s0 = solver::solve(&p0, &settings.solve).unwrap();
    check("real max-WIT", &p0, &s0);

    // Real, binding EH demand at 60% of the max.
    let w = scenarios::max_wpt(&dep, 1, tx.a_t, sigma2, Signalling::Real, None).unwrap();
    let p1 = scenarios::build_problem(
        &dep,
        &tx,
        Signalling::Real,
        &[(1, 0.6 * w.p_max)],
        &settings,
    )
    .unwrap();
    let s1 = solver::solve(&p1, &settings.solve).unwrap();
    check("real EH-binding", &p1, &s1);

    // Real, demand at the harvestable maximum.
    let p2 = scenarios::build_problem(
        &dep,
        &tx,
        Signalling::Real,
        &[(1, w.p_max * (1.0 - 1e-9))],
        &settings,
    )
    .unwrap();
    let s2 = solver::solve(&p2, &settings.solve).unwrap();
    check("real max-WPT endpoint", &p2, &s2);

    // Complex, no EH and EH-binding.
    let dep_c = single_receiver_deployment(5.0, dbm_to_w(-50.0));
    let sigma2_c = dbm_to_w(43.0);
    let tx_c = TxConstraints::new(sigma2_c, 3.0 * sigma2_c.sqrt()).unwrap();
    let p3 = scenarios::build_problem(&dep_c, &tx_c, Signalling::Complex, &[], &settings).unwrap();
    let s3 = solver::solve(&p3, &settings.solve).unwrap();
    check("complex max-WIT", &p3, &s3);
    let wc = scenarios::max_wpt(&dep_c, 1, tx_c.a_t, sigma2_c, Signalling::Complex, None).unwrap();
    let p4 = scenarios::build_problem(
        &dep_c,
        &tx_c,
        Signalling::Complex,
        &[(1, 0.7 * wc.p_max)],
        &settings,
    )
    .unwrap();
    let s4 = solver::solve(&p4, &settings.solve).unwrap();
    check("complex EH-binding", &p4, &s4);

    println!("criterion 05 ({}): all Optimal solutions verified", verdict(all_ok));
    assert!(all_ok);
}

#[test]
fn criterion_06_max_wpt_equivalence() {
    let dep = single_receiver_deployment(5.0, 1e-11);
    let rect = Rectenna::reference();
    let h_e = dep.channel_gain(5.0);
    let a_t_sat = rect.saturation_amplitude(h_e).unwrap();
    let mut seed = 20260809u64;
    let mut worst: f64 = 0.0;
    let mut structure_ok = true;
    for _ in 0..10 {
        let a = (0.1 + 0.85 * lcg(&mut seed)) * a_t_sat;
        let sigma2 = (0.05 + 0.9 * lcg(&mut seed)) * a * a;
        let w = scenarios::max_wpt(&dep, 1, a, sigma2, Signalling::Real, None).unwrap();
        let grid: Vec<f64> = (0..401).map(|i| -a + 2.0 * a * i as f64 / 400.0).collect();
        let pv: Vec<f64> = grid
            .iter()
            .map(|&x| rect.harvested_power(x.abs(), h_e, HarvestModel::Approx).unwrap())
            .collect();
        let (_, lp_max) = oracle::lp_max_harvest(&grid, &pv, sigma2).unwrap();
        worst = worst.max((w.p_max - lp_max).abs() / lp_max);
        // Three-point structure with the peak mass split symmetrically.
        let peak = (sigma2 / (w.a_eff * w.a_eff)).min(1.0);
        structure_ok &= w.dist.support().len() == 3
            && (w.dist.support()[0] + w.a_eff).abs() < 1e-12
            && w.dist.support()[1].abs() < 1e-12
            && (w.dist.support()[2] - w.a_eff).abs() < 1e-12
            && (w.dist.probs()[0] - 0.5 * peak).abs() < 1e-12
            && (w.dist.probs()[1] - (1.0 - peak).max(0.0)).abs() < 1e-12;
    }
    let ok = worst <= 1e-6 && structure_ok;
    println!(
        "criterion 06 ({}): closed form vs LP worst relative gap {worst:.3e} (tolerance 1e-6), three-point structure {}",
        verdict(ok),
        verdict(structure_ok)
    );
    assert!(ok);
}

#[test]
fn criterion_07_single_active_constraint() {
    let sigma2 = dbm_to_w(43.0);
    let dep = Deployment::new(
        2.45e9,
        2.5,
        25.0,
        dbm_to_w(-50.0),
        vec![3.0, 3.5, 4.0]
            .into_iter()
            .enumerate()
            .map(|(i, d)| ReceiverSite {
                id: i + 1,
                d_e: d,
                rectenna: Rectenna::reference(),
                a_r: None,
            })
            .collect(),
    )
    .unwrap();
    let tx = TxConstraints::new(sigma2, 3.0 * sigma2.sqrt()).unwrap();
    let peak = scenarios::effective_peak(&tx, &dep).unwrap();
    assert!(peak.a < peak.receiver_sat_limit(), "scenario must be unsaturated");
    let settings = ScenarioSettings::default();

    // Receiver 2 carries a binding demand; receivers 1 and 3 ask for 80% of
    // what they passively harvest under receiver 2's solution.
    let w2 = scenarios::max_wpt(&dep, 2, peak.a, sigma2, Signalling::Complex, None).unwrap();
    let p2_req = 0.6 * w2.p_max;
    let single2 =
        scenarios::solve_with_demands(&dep, &tx, Signalling::Complex, &[(2, p2_req)], &settings)
            .unwrap();
    let demands = vec![
        (1, 0.8 * single2.harvested_for(1).unwrap()),
        (2, p2_req),
        (3, 0.8 * single2.harvested_for(3).unwrap()),
    ];
    let multi =
        scenarios::solve_with_demands(&dep, &tx, Signalling::Complex, &demands, &settings).unwrap();

    let rate_ok = (multi.rate - single2.rate).abs() <= 1e-3;
    let lam1 = multi.lambda_for(1).unwrap();
    let lam2 = multi.lambda_for(2).unwrap();
    let lam3 = multi.lambda_for(3).unwrap();
    let lambda_ok = lam2 > 1e-6 && lam1 < 1e-9 && lam3 < 1e-9;
    let h1 = multi.harvested_for(1).unwrap();
    let h2 = multi.harvested_for(2).unwrap();
    let h3 = multi.harvested_for(3).unwrap();
    let slack_ok = h1 > demands[0].1 && h3 > demands[2].1;
    let binding_ok = (h2 - p2_req).abs() <= 1e-9 * p2_req;
    let ok = rate_ok && lambda_ok && slack_ok && binding_ok;
    println!(
        "criterion 07 ({}): multi rate {:.6} vs single {:.6} (|d| = {:.2e} bits, tol 1e-3); lambdas = ({lam1:.2e}, {lam2:.2e}, {lam3:.2e}); binding gap {:.2e} rel; over-harvest {}",
        verdict(ok),
        multi.rate,
        single2.rate,
        (multi.rate - single2.rate).abs(),
        (h2 - p2_req).abs() / p2_req,
        verdict(slack_ok)
    );
    assert!(ok);
}

#[test]
fn criterion_08_re_curve_shape() {
    let sigma2 = dbm_to_w(33.0);
    let dep = single_receiver_deployment(5.0, 1e-11);
    let tx = TxConstraints::new(sigma2, 3.0 * sigma2.sqrt()).unwrap();
    let settings = ScenarioSettings::default();
    let w = scenarios::max_wpt(&dep, 1, tx.a_t, sigma2, Signalling::Real, None).unwrap();
    let grid = scenarios::linear_preq_grid(w.p_max, 10);
    let trace = scenarios::re_sweep(&dep, &tx, 1, &grid, Signalling::Real, &settings).unwrap();

    let mut monotone = true;
    for pair in trace.points.windows(2) {
        monotone &= pair[1].rate <= pair[0].rate + 1e-6;
    }
    let solved = trace.points.iter().all(|p| p.failure.is_none());

    let smith = scenarios::solve_with_demands(&dep, &tx, Signalling::Real, &[], &settings).unwrap();
    let first = &trace.points[0];
    let last = trace.points.last().unwrap();
    let start_ok = (first.rate - smith.rate).abs() <= 1e-3
        && (first.harvested[0].1 - smith.harvested_for(1).unwrap()).abs()
            <= 1e-9 * smith.harvested_for(1).unwrap();
    let wpt_rate = dep
        .id_channel(Signalling::Real)
        .unwrap()
        .mutual_information(&w.dist, 2048);
    let end_ok = (last.rate - wpt_rate).abs() <= 1e-3
        && (last.harvested[0].1 - w.p_max).abs() <= 1e-9 * w.p_max + 1e-9 * w.p_max;
    let ok = monotone && solved && start_ok && end_ok;
    println!(
        "criterion 08 ({}): monotone {}, endpoints ({:.6}, {:.4e}) -> Smith ({:.6}, {:.4e}); ({:.6}, {:.4e}) -> WPT ({:.6}, {:.4e})",
        verdict(ok),
        verdict(monotone),
        first.rate,
        first.harvested[0].1,
        smith.rate,
        smith.harvested_for(1).unwrap(),
        last.rate,
        last.harvested[0].1,
        wpt_rate,
        w.p_max
    );
    assert!(ok);
}

#[test]
fn criterion_09_re_region_saturates() {
    let sigma2 = dbm_to_w(33.0);
    let dep = single_receiver_deployment(5.0, 1e-11);
    let rect = Rectenna::reference();
    let a_sat = rect.saturation_amplitude(dep.channel_gain(5.0)).unwrap();

    let mut run = fn_trace(&dep, sigma2, a_sat, 201);
    let trace_sat = run.take().unwrap();
    // 281 points keeps +-A_T,sat on the wider grid exactly.
    let mut run2 = fn_trace(&dep, sigma2, 1.4 * a_sat, 281);
    let trace_wide = run2.take().unwrap();

    let mut worst_rate: f64 = 0.0;
    let mut worst_power: f64 = 0.0;
    for (a, b) in trace_sat.points.iter().zip(&trace_wide.points) {
        assert!(a.failure.is_none() && b.failure.is_none());
        worst_rate = worst_rate.max((a.rate - b.rate).abs() / a.rate.abs().max(1e-12));
        let (ha, hb) = (a.harvested[0].1, b.harvested[0].1);
        if ha > 0.0 {
            worst_power = worst_power.max((ha - hb).abs() / ha);
        }
    }
    let ok = worst_rate <= 0.02 && worst_power <= 0.02;
    println!(
        "criterion 09 ({}): traces at A_T,sat and 1.4 A_T,sat differ by at most {worst_rate:.3e} (rate) and {worst_power:.3e} (power), tolerance 2%",
        verdict(ok)
    );
    assert!(ok);

    fn fn_trace(
        dep: &Deployment,
        sigma2: f64,
        a_t: f64,
        grid_points: usize,
    ) -> Option<scenarios::RETrace> {
        let tx = TxConstraints::new(sigma2, a_t).unwrap();
        let mut settings = ScenarioSettings::default();
        settings.grid_points = Some(grid_points);
        // Common demand grid: top out at the saturated maximum, which both
        // peak amplitudes share.
        let w = scenarios::max_wpt(dep, 1, a_t, sigma2, Signalling::Real, None).unwrap();
        let grid = scenarios::linear_preq_grid(w.p_max, 6);
        Some(scenarios::re_sweep(dep, &tx, 1, &grid, Signalling::Real, &settings).unwrap())
    }
}

#[test]
fn criterion_10_suboptimal_distribution() {
    let sigma2 = dbm_to_w(33.0);
    let dep = single_receiver_deployment(5.0, 1e-11);
    let tx = TxConstraints::new(sigma2, 3.0 * sigma2.sqrt()).unwrap();
    let settings = ScenarioSettings::default();
    let a = tx.a_t;
    let harvest = dep.harvest_fn(1).unwrap();
    let channel = dep.id_channel(Signalling::Real).unwrap();
    let w = scenarios::max_wpt(&dep, 1, a, sigma2, Signalling::Real, None).unwrap();

    let mut all_ok = true;
    for frac in [0.35, 0.6, 0.85] {
        let target = frac * w.p_max;
        // Truncated-Gaussian width matched to the AP budget; peak mass from
        // a bisection on the achieved harvested power.
        let d_param = 1.0 / (2.0 * sigma2);
        let harvested_at = |c: f64| {
            let s = scenarios::suboptimal_distribution(a, sigma2, d_param, c, 201).unwrap();
            s.dist.expectation(|x| harvest(x.abs()))
        };
        let bound = scenarios::suboptimal_distribution(a, sigma2, d_param, 0.0, 201)
            .unwrap()
            .c_bound;
        let (mut lo, mut hi) = (0.0, bound);
        if harvested_at(hi) < target {
            all_ok = false;
            println!("  - level {frac}: unreachable with d = {d_param}");
            continue;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if harvested_at(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let sub = scenarios::suboptimal_distribution(a, sigma2, d_param, hi, 201).unwrap();
        let sub_power = sub.dist.expectation(|x| harvest(x.abs()));
        let sub_rate = channel.mutual_information(&sub.dist, 2048);
        let opt = scenarios::solve_with_demands(
            &dep,
            &tx,
            Signalling::Real,
            &[(1, sub_power)],
            &settings,
        )
        .unwrap();
        let ratio = sub_rate / opt.rate;
        let ok = ratio >= 0.92 && ratio <= 1.0 + 1e-6;
        all_ok &= ok;
        println!(
            "  - level {frac}: suboptimal rate {sub_rate:.5} vs optimal {:.5} at {sub_power:.3e} W -> ratio {ratio:.4} ({})",
            opt.rate,
            verdict(ok)
        );
    }
    println!(
        "criterion 10 ({}): superposition distribution reaches >= 92% of the optimal rate at matched harvest levels",
        verdict(all_ok)
    );
    assert!(all_ok);
}

#[test]
fn criterion_11_gradient_identity() {
    let mut seed = 7u64;
    let mut worst: f64 = 0.0;
    for trial in 0..5 {
        let complex = trial >= 3;
        let n = 8;
        let (support, channel): (Vec<f64>, ChannelModel) = if complex {
            (
                (0..n).map(|i| 0.15 + 2.0 * i as f64 / (n - 1) as f64).collect(),
                ChannelModel::Amplitude(AmplitudeChannel::new(1.0, 0.5).unwrap()),
            )
        } else {
            (
                (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect(),
                ChannelModel::Real(RealAwgnChannel::new(1.0, 0.8).unwrap()),
            )
        };
        let weights: Vec<f64> = (0..n).map(|_| 0.05 + lcg(&mut seed)).collect();
        let dist = DiscreteDistribution::normalized(support, weights).unwrap();
        let (idx, rf) = (n - 1, 1);
        let fd = oracle::finite_difference_gradient(&channel, &dist, idx, rf, 1e-6).unwrap();
        let diff = match &channel {
            ChannelModel::Real(c) => {
                c.marginal_info_density(&dist, dist.support()[idx], 2048)
                    - c.marginal_info_density(&dist, dist.support()[rf], 2048)
            }
            ChannelModel::Amplitude(c) => {
                c.marginal_info_density(&dist, dist.support()[idx], 2048)
                    - c.marginal_info_density(&dist, dist.support()[rf], 2048)
            }
        };
        let rel = (fd - diff).abs() / diff.abs().max(1e-9);
        worst = worst.max(rel);
    }
    let ok = worst <= 1e-4;
    println!(
        "criterion 11 ({}): worst finite-difference vs marginal-density relative error {worst:.3e} (tolerance 1e-4)",
        verdict(ok)
    );
    assert!(ok);
}

#[test]
fn criterion_12_mc_cross_check() {
    let mut seed = 99u64;
    let mut all_ok = true;
    for trial in 0..5 {
        let complex = trial >= 3;
        let n = 6;
        let (support, channel): (Vec<f64>, ChannelModel) = if complex {
            (
                (0..n).map(|i| 0.2 + 1.8 * i as f64 / (n - 1) as f64).collect(),
                ChannelModel::Amplitude(AmplitudeChannel::new(0.9, 0.6).unwrap()),
            )
        } else {
            (
                (0..n).map(|i| -1.8 + 3.6 * i as f64 / (n - 1) as f64).collect(),
                ChannelModel::Real(RealAwgnChannel::new(1.1, 0.9).unwrap()),
            )
        };
        let weights: Vec<f64> = (0..n).map(|_| 0.05 + lcg(&mut seed)).collect();
        let dist = DiscreteDistribution::normalized(support, weights).unwrap();
        let quad = channel.mutual_information(&dist, 2048);
        let (mc, se) =
            oracle::mc_mutual_information(&channel, &dist, &McSpec::new(1_000_000, 1000 + trial as u64).unwrap());
        let ok = (quad - mc).abs() <= 3.0 * se;
        all_ok &= ok;
        println!(
            "  - trial {trial}: quadrature {quad:.6}, MC {mc:.6} +- {se:.1e} ({})",
            verdict(ok)
        );
    }
    println!(
        "criterion 12 ({}): quadrature within 3 standard errors of the 1e6-sample Monte-Carlo",
        verdict(all_ok)
    );
    assert!(all_ok);
}

#[test]
fn criterion_13_linear_eh_degeneracy() {
    let sigma2 = dbm_to_w(33.0);
    let dep = single_receiver_deployment(5.0, 1e-11);
    let tx = TxConstraints::new(sigma2, 3.0 * sigma2.sqrt()).unwrap();
    let channel = dep.id_channel(Signalling::Real).unwrap();
    let a = tx.a_t;
    let mut all_ok = true;
    for kappa in [1e-10, 3e-9, 5e-8] {
        let p_max = kappa * sigma2; // AP binds: max E[kappa x^2] = kappa sigma^2
        for frac in [0.25, 0.7, 0.999] {
            let problem = CapacityProblem {
                grid: solver::uniform_grid(&channel, a, 201),
                channel,
                ap_budget: sigma2,
                eh_constraints: vec![EhConstraint::new(
                    1,
                    Arc::new(move |x: f64| kappa * x * x),
                    frac * p_max,
                )],
            };
            let sol = solver::solve(&problem, &SolveOptions::default()).unwrap();
            let slack = sol.lambda_for(1) == Some(0.0)
                && sol.harvested_for(1).unwrap() >= frac * p_max * (1.0 - 1e-9);
            all_ok &= slack;
        }
    }
    println!(
        "criterion 13 ({}): every feasible quadratic-EH demand is slack at the Smith solution (3 kappa values)",
        verdict(all_ok)
    );
    assert!(all_ok);
}
