//! `swipt` command line: rectenna curves, saturation thresholds,
//! conditional-capacity solves, rate-energy sweeps, and solution
//! verification, all driven by a scenario config file and emitting
//! plot-ready CSV.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{dbm_to_w, load_scenario, w_to_dbm, Scenario};
use swipt_core::rectenna::HarvestModel;
use swipt_core::scenarios::{self, Signalling};
use swipt_core::solver::{
    self, CapacitySolution, SolveStatus, SolverError, VerifyOptions,
};
use swipt_core::DiscreteDistribution;

const EXIT_OK: u8 = 0;
const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NO_CONVERGENCE: u8 = 4;

#[derive(Parser)]
#[command(name = "swipt", version, about = "Rate-energy analysis for SWIPT systems with nonlinear harvesters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Exact,
    Approx,
    Lowpower,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignallingArg {
    Real,
    Complex,
}

impl From<SignallingArg> for Signalling {
    fn from(s: SignallingArg) -> Self {
        match s {
            SignallingArg::Real => Signalling::Real,
            SignallingArg::Complex => Signalling::Complex,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Harvested DC power vs. input RF power for one rectenna.
    Pout {
        #[arg(long)]
        config: PathBuf,
        /// dBm sweep as start:stop:step, e.g. -40:-5:0.5
        #[arg(long)]
        range: String,
        #[arg(long, value_enum, default_value = "approx")]
        model: ModelArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Saturation threshold: beta_sat, P_in,sat, per-receiver A_T,sat.
    Pinsat {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve the conditional-capacity problem and dump the distribution.
    Capacity {
        #[arg(long)]
        config: PathBuf,
        /// Required DC powers in microwatts, one per receiver (missing = 0).
        #[arg(long, value_delimiter = ',')]
        preq_uw: Vec<f64>,
        #[arg(long, value_enum, default_value = "real")]
        signalling: SignallingArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate-energy tradeoff curve for one receiver.
    Recurve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        receiver: usize,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, value_enum, default_value = "real")]
        signalling: SignallingArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form maximum-WPT distribution and harvested power.
    Maxwpt {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        receiver: usize,
        #[arg(long, value_enum, default_value = "real")]
        signalling: SignallingArg,
    },
    /// Identify the single active EH constraint (unsaturated regime).
    Active {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        preq_uw: Vec<f64>,
        #[arg(long, value_enum, default_value = "real")]
        signalling: SignallingArg,
    },
    /// Re-verify a solution CSV against the optimality condition.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, value_delimiter = ',')]
        preq_uw: Vec<f64>,
        #[arg(long, value_enum, default_value = "real")]
        signalling: SignallingArg,
    },
}

/// Nine significant digits, stable across runs.
fn fmt9(v: f64) -> String {
    format!("{v:.8e}")
}

fn write_out(out: &Option<PathBuf>, contents: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{contents}");
            std::io::stdout().flush().map_err(|e| e.to_string())
        }
    }
}

fn provenance(sc: &Scenario) -> String {
    format!(
        "# config_hash={:016x} generator=swipt-{}\n",
        sc.config_hash,
        env!("CARGO_PKG_VERSION")
    )
}

fn parse_range(range: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("range must be start:stop:step, got '{range}'"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|e| format!("bad number '{p}': {e}")))
        .collect::<Result<_, _>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) {
        return Err(format!("step must be positive, got {step}"));
    }
    let mut points = Vec::new();
    let mut v = start;
    while v <= stop + 1e-12 {
        points.push(v);
        v += step;
    }
    Ok(points)
}

fn demands_from_uw(sc: &Scenario, preq_uw: &[f64]) -> Result<Vec<(usize, f64)>, String> {
    if preq_uw.len() > sc.deployment.receivers.len() {
        return Err(format!(
            "{} demands given but the deployment has {} receivers",
            preq_uw.len(),
            sc.deployment.receivers.len()
        ));
    }
    Ok(preq_uw
        .iter()
        .enumerate()
        .map(|(i, &uw)| (i + 1, uw * 1e-6))
        .collect())
}

fn solution_csv(sc: &Scenario, sol: &CapacitySolution, verified: bool) -> String {
    let mut s = provenance(sc);
    s.push_str("support_v,prob\n");
    for (&x, &p) in sol.dist.support().iter().zip(sol.dist.probs()) {
        s.push_str(&format!("{},{}\n", fmt9(x), fmt9(p)));
    }
    let lambdas = sol
        .lambdas
        .iter()
        .map(|(id, l)| format!("{id}:{}", fmt9(*l)))
        .collect::<Vec<_>>()
        .join(";");
    let harvested = sol
        .harvested
        .iter()
        .map(|(id, h)| format!("{id}:{}", fmt9(*h)))
        .collect::<Vec<_>>()
        .join(";");
    s.push_str(&format!(
        "# rate_bits={} lambda0={} lambdas={} harvested_w={} status={:?} verified={}\n",
        fmt9(sol.rate),
        fmt9(sol.lambda0),
        lambdas,
        harvested,
        sol.status,
        verified
    ));
    s
}

fn run() -> Result<u8, (u8, String)> {
    let cli = Cli::parse();
    match cli.command {
        Command::Pout { config, range, model, out } => {
            let sc = load_scenario(&config).map_err(|e| (EXIT_USAGE, e.to_string()))?;
            let points = parse_range(&range).map_err(|e| (EXIT_USAGE, e))?;
            let (model, name) = match model {
                ModelArg::Exact => (HarvestModel::Exact, "exact"),
                ModelArg::Approx => (HarvestModel::Approx, "approx"),
                ModelArg::Lowpower => (HarvestModel::LowPower, "lowpower"),
            };
            let mut csv = provenance(&sc);
            csv.push_str("pin_dbm,pout_w,model\n");
            for dbm in points {
                let beta = sc
                    .rectenna
                    .beta_from_pin(dbm_to_w(dbm))
                    .map_err(|e| (EXIT_USAGE, e.to_string()))?;
                let p = match model {
                    HarvestModel::Exact => sc
                        .rectenna
                        .pout_exact(beta)
                        .map_err(|e| (EXIT_NO_CONVERGENCE, e.to_string()))?,
                    HarvestModel::Approx => sc.rectenna.pout_approx(beta),
                    HarvestModel::LowPower => sc.rectenna.pout_lowpower(beta),
                };
                csv.push_str(&format!("{},{},{}\n", fmt9(dbm), fmt9(p), name));
            }
            write_out(&out, &csv).map_err(|e| (EXIT_USAGE, e))?;
            Ok(EXIT_OK)
        }
        Command::Pinsat { config } => {
            let sc = load_scenario(&config).map_err(|e| (EXIT_USAGE, e.to_string()))?;
            let sat = sc
                .rectenna
                .pin_sat()
                .map_err(|e| (EXIT_NO_CONVERGENCE, e.to_string()))?;
            println!("beta_sat={}", fmt9(sat.beta_sat));
            println!("p_in_sat_w={}", fmt9(sat.p_in_sat));
            println!("p_in_sat_dbm={}", fmt9(w_to_dbm(sat.p_in_sat)));
            let peak = scenarios::effective_peak(&sc.tx, &sc.deployment)
                .map_err(|e| (EXIT_NO_CONVERGENCE, e.to_string()))?;
            for r in &peak.per_receiver {
                println!("receiver={} a_t_sat_v={}", r.id, fmt9(r.a_t_sat));
            }
            println!("a_sat_v={}", fmt9(peak.a_sat));
            Ok(EXIT_OK)
        }
        Command::Capacity { config, preq_uw, signalling, out } => {
            let sc = load_scenario(&config).map_err(|e| (EXIT_USAGE, e.to_string()))?;
            let demands = demands_from_uw(&sc, &preq_uw).map_err(|e| (EXIT_USAGE, e))?;
            let problem = scenarios::build_problem(
                &sc.deployment,
                &sc.tx,
                signalling.into(),
                &demands,
                &sc.settings,
            )
            .map_err(|e| (EXIT_USAGE, e.to_string()))?;
            let sol = match solver::solve(&problem, &sc.settings.solve) {
                Ok(sol) => sol,
                Err(SolverError::Infeasible { receiver_id, p_req, p_max }) => {
                    return Err((
                        EXIT_INFEASIBLE,
                        format!(
                            "receiver {receiver_id} requires {} W but at most {} W is harvestable",
                            fmt9(p_req),
                            fmt9(p_max)
                        ),
                    ));
                }
                Err(e) => return Err((EXIT_NO_CONVERGENCE, e.to_string())),
            };
            let report = solver::verify_optimality(&sol, &problem, &verify_opts(&sc));
            let csv = solution_csv(&sc, &sol, report.pass);
            write_out(&out, &csv).map_err(|e| (EXIT_USAGE, e))?;
            if sol.status != SolveStatus::Optimal {
                return Err((EXIT_NO_CONVERGENCE, "solver stopped at the iteration cap".into()));
            }
            Ok(EXIT_OK)
        }
        Command::Recurve { config, receiver, points, signalling, out } => {
            let sc = load_scenario(&config).map_err(|e| (EXIT_USAGE, e.to_string()))?;
            if points < 2 {
                return Err((EXIT_USAGE, "need at least 2 sweep points".into()));
            }
            let signalling: Signalling = signalling.into();
            let peak = scenarios::effective_peak(&sc.tx, &sc.deployment)
                .map_err(|e| (EXIT_USAGE, e.to_string()))?;
            let w = scenarios::max_wpt(&sc.deployment, receiver, peak.a, sc.tx.sigma2, signalling, None)
                .map_err(|e| (EXIT_USAGE, e.to_string()))?;
            let grid = scenarios::linear_preq_grid(w.p_max, points);
            let trace = scenarios::re_sweep(
                &sc.deployment,
                &sc.tx,
                receiver,
                &grid,
                signalling,
                &sc.settings,
            )
            .map_err(|e| (EXIT_NO_CONVERGENCE, e.to_string()))?;
            let ids: Vec<usize> = sc.deployment.receivers.iter().map(|r| r.id).collect();
            let mut csv = provenance(&sc);
            let headers: Vec<String> = ids.iter().map(|id| format!("p_harv_w_{id}")).collect();
            csv.push_str(&format!("p_req_w,rate_bits,{},verified\n", headers.join(",")));
            let mut failures = 0usize;
            for pt in &trace.points {
                if pt.failure.is_some() {
                    failures += 1;
                    continue;
                }
                let harvests: Vec<String> = ids
                    .iter()
                    .map(|id| {
                        pt.harvested
                            .iter()
                            .find(|(hid, _)| hid == id)
                            .map(|(_, h)| fmt9(*h))
                            .unwrap_or_else(|| "nan".into())
                    })
                    .collect();
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt9(pt.p_req),
                    fmt9(pt.rate),
                    harvests.join(","),
                    pt.verified
                ));
            }
            write_out(&out, &csv).map_err(|e| (EXIT_USAGE, e))?;
            if failures > 0 {
                return Err((EXIT_NO_CONVERGENCE, format!("{failures} sweep points failed")));
            }
            Ok(EXIT_OK)
        }
        Command::Maxwpt { config, receiver, signalling } => {
            let sc = load_scenario(&config).map_err(|e| (EXIT_USAGE, e.to_string()))?;
            let peak = scenarios::effective_peak(&sc.tx, &sc.deployment)
                .map_err(|e| (EXIT_USAGE, e.to_string()))?;
            let w = scenarios::max_wpt(
                &sc.deployment,
                receiver,
                peak.a,
                sc.tx.sigma2,
                signalling.into(),
                None,
            )
            .map_err(|e| (EXIT_USAGE, e.to_string()))?;
            println!("p_max_w={}", fmt9(w.p_max));
            println!("a_eff_v={}", fmt9(w.a_eff));
            println!("support_v,prob");
            for (&x, &p) in w.dist.support().iter().zip(w.dist.probs()) {
                println!("{},{}", fmt9(x), fmt9(p));
            }
            Ok(EXIT_OK)
        }
        Command::Active { config, preq_uw, signalling } => {
            let sc = load_scenario(&config).map_err(|e| (EXIT_USAGE, e.to_string()))?;
            let demands = demands_from_uw(&sc, &preq_uw).map_err(|e| (EXIT_USAGE, e))?;
            let report = match scenarios::active_constraint(
                &sc.deployment,
                &sc.tx,
                &demands,
                signalling.into(),
                &sc.settings,
            ) {
                Ok(r) => r,
                Err(scenarios::ScenarioError::Solver(SolverError::Infeasible {
                    receiver_id,
                    p_req,
                    p_max,
                })) => {
                    return Err((
                        EXIT_INFEASIBLE,
                        format!(
                            "receiver {receiver_id} requires {} W but at most {} W is harvestable",
                            fmt9(p_req),
                            fmt9(p_max)
                        ),
                    ));
                }
                Err(e) => return Err((EXIT_USAGE, e.to_string())),
            };
            match report.receiver {
                Some(id) => println!("active_receiver={id}"),
                None => println!("active_receiver=none"),
            }
            if report.tie {
                eprintln!("warning: two single-constraint rates tie within 1e-6 bits; reporting the lower id");
            }
            for (id, rate) in &report.single_rates {
                println!("receiver={id} single_rate_bits={}", fmt9(*rate));
            }
            Ok(EXIT_OK)
        }
        Command::Verify { config, solution, preq_uw, signalling } => {
            let sc = load_scenario(&config).map_err(|e| (EXIT_USAGE, e.to_string()))?;
            let demands = demands_from_uw(&sc, &preq_uw).map_err(|e| (EXIT_USAGE, e))?;
            let text = std::fs::read_to_string(&solution)
                .map_err(|e| (EXIT_USAGE, format!("cannot read solution: {e}")))?;
            let dist = parse_solution_csv(&text).map_err(|e| (EXIT_USAGE, e))?;
            let problem = scenarios::build_problem(
                &sc.deployment,
                &sc.tx,
                signalling.into(),
                &demands,
                &sc.settings,
            )
            .map_err(|e| (EXIT_USAGE, e.to_string()))?;
            let opts = verify_opts(&sc);
            let (lambda0, lambdas) = solver::recover_multipliers(&dist, &problem, &opts);
            let rate = problem
                .channel
                .mutual_information(&dist, sc.settings.solve.quad_nodes);
            let rebuilt = CapacitySolution {
                dist,
                rate,
                lambda0,
                lambdas: problem
                    .eh_constraints
                    .iter()
                    .zip(&lambdas)
                    .map(|(c, &l)| (c.receiver_id, l))
                    .collect(),
                harvested: vec![],
                status: SolveStatus::Optimal,
            };
            let report = solver::verify_optimality(&rebuilt, &problem, &opts);
            println!(
                "verified={} rate_bits={} min_s={} max_abs_s_at_mass={} kkt_tol={}",
                report.pass,
                fmt9(rate),
                fmt9(report.min_s),
                fmt9(report.max_abs_s_at_mass),
                fmt9(report.kkt_tol)
            );
            if report.pass {
                Ok(EXIT_OK)
            } else {
                Ok(EXIT_VERIFY_FAILED)
            }
        }
    }
}

fn verify_opts(sc: &Scenario) -> VerifyOptions {
    VerifyOptions {
        kkt_tol: sc.settings.solve.kkt_tol,
        quad_nodes: sc.settings.solve.quad_nodes,
        ..VerifyOptions::default()
    }
}

fn parse_solution_csv(text: &str) -> Result<DiscreteDistribution, String> {
    let mut support = Vec::new();
    let mut probs = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("support_v") {
            continue;
        }
        let mut parts = line.split(',');
        let x: f64 = parts
            .next()
            .ok_or("missing support column")?
            .parse()
            .map_err(|e| format!("bad support value: {e}"))?;
        let p: f64 = parts
            .next()
            .ok_or("missing prob column")?
            .parse()
            .map_err(|e| format!("bad probability value: {e}"))?;
        support.push(x);
        probs.push(p);
    }
    DiscreteDistribution::normalized(support, probs).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
