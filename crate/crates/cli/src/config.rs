//! Scenario configuration: a sectioned key-value file (TOML) with explicit
//! units in every key name. Unknown keys are rejected so that unit mistakes
//! surface as load errors; dBm values are converted to watts exactly once,
//! here.

use serde::Deserialize;

use swipt_core::rectenna::{DiodeParams, Rectenna, RectifierParams, DEFAULT_THERMAL_VOLTAGE};
use swipt_core::scenarios::{Deployment, ReceiverSite, ScenarioSettings, TxConstraints};
use swipt_core::solver::SolveOptions;

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse(String),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Parse(e) => write!(f, "cannot parse config: {e}"),
            ConfigError::Invalid(e) => write!(f, "invalid config: {e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiodeSection {
    i_s_a: f64,
    eta: f64,
    i_bv_a: f64,
    b_v_v: f64,
    r_s_ohm: f64,
    c_j0_f: f64,
    v_t_v: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitSection {
    r_l_ohm: f64,
    c_l_f: f64,
    r_ant_ohm: f64,
    f_c_hz: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeploymentSection {
    alpha: f64,
    d_i_m: f64,
    d_e_m: Vec<f64>,
    a_r_v: Option<Vec<f64>>,
    sigma_n2_dbm: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TxSection {
    sigma2_dbm: f64,
    a_t_v: f64,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    grid_points: Option<usize>,
    kkt_tol: Option<f64>,
    quad_nodes: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    diode: DiodeSection,
    circuit: CircuitSection,
    deployment: DeploymentSection,
    tx: TxSection,
    solver: Option<SolverSection>,
}

/// Fully resolved scenario: SI units only.
pub struct Scenario {
    pub rectenna: Rectenna,
    pub deployment: Deployment,
    pub tx: TxConstraints,
    pub settings: ScenarioSettings,
    /// FNV-1a hash of the raw config bytes, for output provenance comments.
    pub config_hash: u64,
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn load_scenario(path: &std::path::Path) -> Result<Scenario, ConfigError> {
    let bytes = std::fs::read(path).map_err(ConfigError::Io)?;
    let text = String::from_utf8_lossy(&bytes);
    let raw: RawConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;

    let diode = DiodeParams {
        i_s: raw.diode.i_s_a,
        eta: raw.diode.eta,
        i_bv: raw.diode.i_bv_a,
        b_v: raw.diode.b_v_v,
        r_s: raw.diode.r_s_ohm,
        c_j0: raw.diode.c_j0_f,
        v_t: raw.diode.v_t_v.unwrap_or(DEFAULT_THERMAL_VOLTAGE),
    };
    let rectifier = RectifierParams {
        r_l: raw.circuit.r_l_ohm,
        c_l: raw.circuit.c_l_f,
        r_ant: raw.circuit.r_ant_ohm,
        f_c: raw.circuit.f_c_hz,
    };
    if let Some(w) = rectifier.lpf_warning() {
        eprintln!("warning: {w}");
    }
    let rectenna =
        Rectenna::new(diode, rectifier).map_err(|e| ConfigError::Invalid(e.to_string()))?;

    if let Some(caps) = &raw.deployment.a_r_v {
        if caps.len() != raw.deployment.d_e_m.len() {
            return Err(ConfigError::Invalid(format!(
                "a_r_v has {} entries but d_e_m has {}",
                caps.len(),
                raw.deployment.d_e_m.len()
            )));
        }
    }
    let receivers = raw
        .deployment
        .d_e_m
        .iter()
        .enumerate()
        .map(|(i, &d_e)| ReceiverSite {
            id: i + 1,
            d_e,
            rectenna: rectenna.clone(),
            a_r: raw.deployment.a_r_v.as_ref().map(|caps| caps[i]),
        })
        .collect();
    let deployment = Deployment::new(
        raw.circuit.f_c_hz,
        raw.deployment.alpha,
        raw.deployment.d_i_m,
        dbm_to_w(raw.deployment.sigma_n2_dbm),
        receivers,
    )
    .map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let tx = TxConstraints::new(dbm_to_w(raw.tx.sigma2_dbm), raw.tx.a_t_v)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let solver = raw.solver.unwrap_or_default();
    let mut solve = SolveOptions::default();
    solve.kkt_tol = solver.kkt_tol;
    if let Some(n) = solver.quad_nodes {
        solve.quad_nodes = n;
    }
    let settings = ScenarioSettings {
        grid_points: solver.grid_points,
        solve,
        cross_check: false,
    };

    Ok(Scenario {
        rectenna,
        deployment,
        tx,
        settings,
        config_hash: fnv1a64(&bytes),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const GOOD: &str = r#"
[diode]
i_s_a = 5e-6
eta = 1.05
i_bv_a = 100e-6
b_v_v = 2.0
r_s_ohm = 20.0
c_j0_f = 0.14e-12

[circuit]
r_l_ohm = 10e3
c_l_f = 1e-9
r_ant_ohm = 50.0
f_c_hz = 2.45e9

[deployment]
alpha = 2.5
d_i_m = 25.0
d_e_m = [5.0]
sigma_n2_dbm = -80.0

[tx]
sigma2_dbm = 33.0
a_t_v = 4.24
"#;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_and_converts_units() {
        let f = write_temp(GOOD);
        let sc = load_scenario(f.path()).unwrap();
        assert!((sc.tx.sigma2 - 1.9952623149688788).abs() < 1e-12);
        assert_eq!(sc.deployment.receivers.len(), 1);
        assert!((sc.deployment.sigma_n2 - 1e-11).abs() < 1e-24);
        // 0 dBm is 1 mW.
        assert!((dbm_to_w(0.0) - 1e-3).abs() < 1e-18);
        assert!((w_to_dbm(1e-3) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = GOOD.replace("a_t_v = 4.24", "a_t_v = 4.24\nbogus_key = 1.0");
        let f = write_temp(&bad);
        match load_scenario(f.path()) {
            Err(ConfigError::Parse(msg)) => assert!(msg.contains("bogus_key"), "{msg}"),
            other => panic!("expected parse error, got {:?}", other.is_ok()),
        }
    }

    #[test]
    fn rejects_mismatched_caps() {
        let bad = GOOD.replace("d_e_m = [5.0]", "d_e_m = [5.0]\na_r_v = [1.0, 2.0]");
        let f = write_temp(&bad);
        assert!(matches!(load_scenario(f.path()), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn hash_is_stable() {
        let f = write_temp(GOOD);
        let a = load_scenario(f.path()).unwrap().config_hash;
        let b = load_scenario(f.path()).unwrap().config_hash;
        assert_eq!(a, b);
    }
}
