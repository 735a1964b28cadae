//! Nonlinear rectenna circuit model: diode I-V with reverse breakdown,
//! rectifier input impedance, the Bessel argument `beta` of a sinusoidal
//! excitation, exact and approximate harvested DC power, and the saturation
//! threshold of the DC output.
//!
//! All quantities are SI (volts, watts, ohms, farads, hertz); dBm conversion
//! belongs to the CLI layer.

use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{self, NumericsError, RootSolveSpec};

/// Thermal voltage kT/q at 298.15 K, in volts.
pub const DEFAULT_THERMAL_VOLTAGE: f64 = 0.025692579121085847;

#[derive(Debug, Clone, Error)]
pub enum RectennaError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("{what}: argument {value} outside domain")]
    Domain { what: &'static str, value: f64 },
    #[error("DC balance solve failed at beta = {beta}, bracket [0, {bracket_hi}]: {source}")]
    VoltageSolve {
        beta: f64,
        bracket_hi: f64,
        source: NumericsError,
    },
    #[error("saturation threshold solve failed: {0}")]
    SaturationSolve(NumericsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Schottky diode parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiodeParams {
    /// Reverse-bias saturation current (A).
    pub i_s: f64,
    /// Ideality factor.
    pub eta: f64,
    /// Breakdown saturation current (A).
    pub i_bv: f64,
    /// Reverse breakdown voltage (V).
    pub b_v: f64,
    /// Series resistance (ohm).
    pub r_s: f64,
    /// Zero-bias junction capacitance (F).
    pub c_j0: f64,
    /// Thermal voltage (V).
    pub v_t: f64,
}

impl DiodeParams {
    /// SMS7630 Schottky diode at room temperature.
    pub fn sms7630() -> Self {
        Self {
            i_s: 5e-6,
            eta: 1.05,
            i_bv: 100e-6,
            b_v: 2.0,
            r_s: 20.0,
            c_j0: 0.14e-12,
            v_t: DEFAULT_THERMAL_VOLTAGE,
        }
    }

    fn validate(&self) -> Result<(), RectennaError> {
        let all = [
            ("i_s", self.i_s),
            ("eta", self.eta),
            ("i_bv", self.i_bv),
            ("b_v", self.b_v),
            ("r_s", self.r_s),
            ("c_j0", self.c_j0),
            ("v_t", self.v_t),
        ];
        for (name, v) in all {
            if !(v > 0.0) || !v.is_finite() {
                return Err(RectennaError::InvalidParams(format!(
                    "diode {name} must be strictly positive, got {v}"
                )));
            }
        }
        if !(1.0..=2.0).contains(&self.eta) {
            return Err(RectennaError::InvalidParams(format!(
                "ideality factor must lie in [1, 2], got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Rectifier and antenna parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifierParams {
    /// Load resistance (ohm).
    pub r_l: f64,
    /// Load (LPF) capacitance (F).
    pub c_l: f64,
    /// Antenna impedance (ohm).
    pub r_ant: f64,
    /// Carrier frequency (Hz).
    pub f_c: f64,
}

impl RectifierParams {
    /// 50-ohm antenna, 10 kOhm load, 1 nF LPF at 2.45 GHz.
    pub fn reference() -> Self {
        Self {
            r_l: 10e3,
            c_l: 1e-9,
            r_ant: 50.0,
            f_c: 2.45e9,
        }
    }

    fn validate(&self) -> Result<(), RectennaError> {
        let all = [
            ("r_l", self.r_l),
            ("c_l", self.c_l),
            ("r_ant", self.r_ant),
            ("f_c", self.f_c),
        ];
        for (name, v) in all {
            if !(v > 0.0) || !v.is_finite() {
                return Err(RectennaError::InvalidParams(format!(
                    "rectifier {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// The DC output is only ripple-free when the LPF time constant is much
    /// larger than the carrier period. Returns a human-readable warning when
    /// `r_l * c_l < 100 / f_c`.
    pub fn lpf_warning(&self) -> Option<String> {
        if self.r_l * self.c_l < 100.0 / self.f_c {
            Some(format!(
                "LPF time constant {:.3e} s is not large against the carrier period {:.3e} s; \
                 output ripple is not negligible",
                self.r_l * self.c_l,
                1.0 / self.f_c
            ))
        } else {
            None
        }
    }
}

/// Which harvested-power model to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarvestModel {
    /// Low-power Lambert-W closed form clipped at the breakdown plateau.
    Approx,
    /// Root of the full DC balance equation (forward + breakdown current).
    Exact,
    /// Low-power Lambert-W closed form without the plateau clip.
    LowPower,
}

/// Saturation threshold of the DC output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationPoint {
    /// Bessel argument at which the approximate model reaches the plateau.
    pub beta_sat: f64,
    /// Corresponding received RF input power (W).
    pub p_in_sat: f64,
}

/// A rectenna: diode + rectifier, with the derived constants of the
/// harvested-power function cached at construction.
#[derive(Debug, Clone)]
pub struct Rectenna {
    diode: DiodeParams,
    rectifier: RectifierParams,
    // Derived at construction, never mutated afterwards.
    a: f64,
    r_j0: f64,
    z_a_low: Complex64,
    b_coef: f64,
}

impl Rectenna {
    pub fn new(diode: DiodeParams, rectifier: RectifierParams) -> Result<Self, RectennaError> {
        diode.validate()?;
        rectifier.validate()?;
        let eta_vt = diode.eta * diode.v_t;
        let a = diode.i_s * (rectifier.r_l + diode.r_s) / eta_vt;
        let r_j0 = eta_vt / diode.i_s;
        let mut this = Self {
            diode,
            rectifier,
            a,
            r_j0,
            z_a_low: Complex64::new(0.0, 0.0),
            b_coef: 0.0,
        };
        this.z_a_low = this.input_impedance(r_j0);
        let re_inv = (1.0 / this.z_a_low.conj()).re;
        if !(re_inv > 0.0) {
            return Err(RectennaError::InvalidParams(format!(
                "Re{{1/Z_a*}} = {re_inv} is not positive; impedance model degenerate"
            )));
        }
        this.b_coef = 1.0 / (eta_vt * re_inv.sqrt());
        Ok(this)
    }

    /// Table-II reference build: SMS7630 diode and the 2.45 GHz rectifier.
    pub fn reference() -> Self {
        Self::new(DiodeParams::sms7630(), RectifierParams::reference())
            .expect("reference parameters are valid")
    }

    pub fn diode(&self) -> &DiodeParams {
        &self.diode
    }

    pub fn rectifier(&self) -> &RectifierParams {
        &self.rectifier
    }

    /// Dimensionless diode constant `a = I_s (R_L + R_s) / (eta V_T)`.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Zero-bias junction resistance `eta V_T / I_s` (ohm).
    pub fn r_j0(&self) -> f64 {
        self.r_j0
    }

    /// Rectifier input impedance at the low-power junction resistance.
    pub fn z_a_low(&self) -> Complex64 {
        self.z_a_low
    }

    /// Voltage-to-beta coefficient `B = [eta V_T sqrt(Re{1/Z_a*})]^-1` (1/V),
    /// evaluated at the low-power impedance.
    pub fn b_coef(&self) -> f64 {
        self.b_coef
    }

    /// Saturated harvested DC power `B_v^2 / (4 R_L)` (W).
    pub fn plateau_power(&self) -> f64 {
        self.diode.b_v * self.diode.b_v / (4.0 * self.rectifier.r_l)
    }

    /// Rectifier input impedance for a given junction resistance:
    /// `Z_a(R_d) = R_s + [1/R_d + j w_c C_j]^-1 + [1/R_L + j w_c C_L]^-1`
    /// with `C_j ~ C_j0`. `r_d` must be positive.
    pub fn input_impedance(&self, r_d: f64) -> Complex64 {
        assert!(r_d > 0.0, "junction resistance must be positive");
        let w_c = 2.0 * std::f64::consts::PI * self.rectifier.f_c;
        let diode_branch = 1.0 / Complex64::new(1.0 / r_d, w_c * self.diode.c_j0);
        let load_branch = 1.0 / Complex64::new(1.0 / self.rectifier.r_l, w_c * self.rectifier.c_l);
        Complex64::new(self.diode.r_s, 0.0) + diode_branch + load_branch
    }

    /// Bessel argument for a received RF power: `beta = B sqrt(2 P_in)`.
    pub fn beta_from_pin(&self, p_in: f64) -> Result<f64, RectennaError> {
        if !(p_in >= 0.0) {
            return Err(RectennaError::Domain {
                what: "beta_from_pin",
                value: p_in,
            });
        }
        Ok(self.b_coef * (2.0 * p_in).sqrt())
    }

    /// Inverse of [`Self::beta_from_pin`].
    pub fn pin_from_beta(&self, beta: f64) -> f64 {
        let v = beta / self.b_coef;
        0.5 * v * v
    }

    /// DC output voltage from the full balance equation (forward + breakdown
    /// current), as the unique root in `[0, B_v]`.
    ///
    /// The residual is scaled by `exp(-ln I0(beta))` so the solve never
    /// exponentiates `I0` directly; this keeps the iteration finite for
    /// arbitrarily large `beta`.
    pub fn vout_exact(&self, beta: f64) -> Result<f64, RectennaError> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(RectennaError::Domain {
                what: "vout_exact",
                value: beta,
            });
        }
        if beta == 0.0 {
            return Ok(0.0);
        }
        let d = &self.diode;
        let r_l = self.rectifier.r_l;
        let eta_vt = d.eta * d.v_t;
        let c = (1.0 + d.r_s / r_l) / eta_vt;
        let bv_exp = d.b_v / eta_vt;
        let ln_i0 = numerics::log_bessel_i0(beta)?;
        let scale = (-ln_i0).exp(); // may underflow to zero; handled below
        // residual * e^{-ln I0}:
        //   I_s e^{-cV} - I_bv e^{cV - bv_exp} - e^{-ln I0} (I_s - I_bv e^{-bv_exp} + V/R_L)
        let f = |v: f64| {
            d.i_s * (-c * v).exp() - d.i_bv * (c * v - bv_exp).exp()
                - scale * (d.i_s - d.i_bv * (-bv_exp).exp() + v / r_l)
        };
        let df = |v: f64| {
            -c * d.i_s * (-c * v).exp() - c * d.i_bv * (c * v - bv_exp).exp() - scale / r_l
        };
        // Low-power closed form as the starting point, clamped into the bracket.
        let guess = self
            .vout_lowpower(beta)
            .min(d.b_v * (1.0 - 1e-9))
            .max(d.b_v * 1e-12);
        let spec = RootSolveSpec::new(guess, 1e-15, 300).expect("static spec is valid");
        numerics::newton_root(f, df, (0.0, d.b_v), &spec).map_err(|source| {
            RectennaError::VoltageSolve {
                beta,
                bracket_hi: d.b_v,
                source,
            }
        })
    }

    /// Normalized residual of the DC balance equation at voltage `v`, for
    /// post-hoc validation of [`Self::vout_exact`] roots.
    pub fn balance_residual(&self, beta: f64, v: f64) -> Result<f64, RectennaError> {
        let d = &self.diode;
        let r_l = self.rectifier.r_l;
        let eta_vt = d.eta * d.v_t;
        let c = (1.0 + d.r_s / r_l) / eta_vt;
        let bv_exp = d.b_v / eta_vt;
        let ln_i0 = numerics::log_bessel_i0(beta)?;
        let scale = (-ln_i0).exp();
        let t1 = d.i_s * (-c * v).exp();
        let t2 = d.i_bv * (c * v - bv_exp).exp();
        let t3 = scale * (d.i_s - d.i_bv * (-bv_exp).exp() + v / r_l);
        Ok((t1 - t2 - t3) / (t1.abs() + t2.abs() + t3.abs() + f64::MIN_POSITIVE))
    }

    /// Harvested DC power from the exact balance equation (W).
    pub fn pout_exact(&self, beta: f64) -> Result<f64, RectennaError> {
        let v = self.vout_exact(beta)?;
        Ok(v * v / self.rectifier.r_l)
    }

    fn vout_lowpower(&self, beta: f64) -> f64 {
        if beta == 0.0 {
            return 0.0;
        }
        let ln_i0 = numerics::log_bessel_i0(beta).expect("beta validated by caller");
        let w = numerics::lambert_w0_from_log(self.a + self.a.ln() + ln_i0)
            .expect("argument is finite");
        (w / self.a - 1.0) * self.diode.i_s * self.rectifier.r_l
    }

    /// Low-power closed-form harvested DC power (W):
    /// `[W0(a e^a I0(beta))/a - 1]^2 I_s^2 R_L`, evaluated through logs.
    pub fn pout_lowpower(&self, beta: f64) -> f64 {
        assert!(beta >= 0.0 && beta.is_finite(), "beta must be finite and >= 0");
        if beta == 0.0 {
            return 0.0;
        }
        let v = self.vout_lowpower(beta);
        v * v / self.rectifier.r_l
    }

    /// Approximate saturation model: low-power closed form clipped at the
    /// breakdown plateau `B_v^2 / (4 R_L)`.
    pub fn pout_approx(&self, beta: f64) -> f64 {
        self.pout_lowpower(beta).min(self.plateau_power())
    }

    /// Input power at which the approximate model reaches the plateau, and
    /// the associated Bessel argument.
    pub fn pin_sat(&self) -> Result<SaturationPoint, RectennaError> {
        let d = &self.diode;
        let g = d.b_v / (2.0 * d.i_s * self.rectifier.r_l);
        let rhs = self.a * g + (1.0 + g).ln();
        // ln I0 is monotone; bracket by doubling.
        let mut hi = 1.0;
        while numerics::log_bessel_i0(hi)? < rhs {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(RectennaError::SaturationSolve(NumericsError::Convergence {
                    iterations: 0,
                    last_iterate: hi,
                    residual: rhs,
                }));
            }
        }
        let f = |b: f64| numerics::log_bessel_i0(b).map_or(f64::NAN, |v| v - rhs);
        let df = |b: f64| {
            let h = 1e-6 * b.max(1.0);
            (f(b + h) - f(b - h)) / (2.0 * h)
        };
        let spec = RootSolveSpec::new(0.5 * hi, 1e-12, 200).expect("static spec is valid");
        let beta_sat =
            numerics::newton_root(f, df, (0.0, hi), &spec).map_err(RectennaError::SaturationSolve)?;
        Ok(SaturationPoint {
            beta_sat,
            p_in_sat: self.pin_from_beta(beta_sat),
        })
    }

    /// Harvested DC power for a non-negative received-symbol amplitude and a
    /// channel amplitude gain: `P(beta = sqrt(2) B h_e x)` under the chosen
    /// model. Callers are responsible for passing `|x|` (the power function
    /// is even in the transmit symbol).
    pub fn harvested_power(
        &self,
        amplitude: f64,
        h_e: f64,
        model: HarvestModel,
    ) -> Result<f64, RectennaError> {
        if !(amplitude >= 0.0) {
            return Err(RectennaError::Domain {
                what: "harvested_power amplitude",
                value: amplitude,
            });
        }
        if !(h_e > 0.0) {
            return Err(RectennaError::Domain {
                what: "harvested_power channel gain",
                value: h_e,
            });
        }
        let beta = std::f64::consts::SQRT_2 * self.b_coef * h_e * amplitude;
        match model {
            HarvestModel::Approx => Ok(self.pout_approx(beta)),
            HarvestModel::LowPower => Ok(self.pout_lowpower(beta)),
            HarvestModel::Exact => self.pout_exact(beta),
        }
    }

    /// Transmit amplitude that drives this rectenna to its plateau through a
    /// channel of amplitude gain `h_e`: `sqrt(P_in,sat) / h_e`.
    pub fn saturation_amplitude(&self, h_e: f64) -> Result<f64, RectennaError> {
        let sat = self.pin_sat()?;
        Ok(sat.p_in_sat.sqrt() / h_e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> Rectenna {
        Rectenna::reference()
    }

    #[test]
    fn derived_constants_match_reference_arithmetic() {
        // 50-digit reference evaluation of the Table-II build.
        let r = reference();
        assert_relative_eq!(r.a(), 1.8571232373914030, max_relative = 1e-12);
        assert_relative_eq!(r.r_j0(), 5395.4416154280278, max_relative = 1e-12);
        assert_relative_eq!(r.b_coef(), 2230.1285770999539, max_relative = 1e-10);
        assert_relative_eq!(r.plateau_power(), 1.0e-4, max_relative = 1e-14);
    }

    #[test]
    fn input_impedance_against_complex_oracle() {
        let r = reference();
        let z = r.input_impedance(r.r_j0());
        assert_relative_eq!(z.re, 59.611820291193266, max_relative = 1e-10);
        assert_relative_eq!(z.im, -460.66692071918972, max_relative = 1e-10);

        // High-power approximation R_d -> R_L / 2.
        let z_hp = r.input_impedance(r.rectifier().r_l / 2.0);
        assert_relative_eq!(z_hp.re, 62.693113113174014, max_relative = 1e-10);
        assert_relative_eq!(z_hp.im, -460.11154752119881, max_relative = 1e-10);

        // R_d -> infinity: diode branch becomes purely reactive 1/(j w C_j).
        let z_inf = r.input_impedance(1e12);
        let w_c = 2.0 * std::f64::consts::PI * r.rectifier().f_c;
        let expected_im = -1.0 / (w_c * r.diode().c_j0);
        assert!((z_inf.re - r.diode().r_s).abs() < 1e-3);
        assert_relative_eq!(
            z_inf.im,
            expected_im - 1.0 / (w_c * r.rectifier().c_l),
            max_relative = 1e-6
        );
    }

    #[test]
    fn beta_round_trip_and_example() {
        let r = reference();
        assert_eq!(r.beta_from_pin(0.0).unwrap(), 0.0);
        let beta = r.beta_from_pin(1e-4).unwrap();
        assert_relative_eq!(beta, 2230.1285770999539 * (2e-4f64).sqrt(), max_relative = 1e-12);
        assert!((beta - 31.5).abs() < 0.1);
        let p = r.pin_from_beta(beta);
        assert_relative_eq!(p, 1e-4, max_relative = 1e-12);
        assert!(r.beta_from_pin(-1.0).is_err());
    }

    #[test]
    fn saturation_point_matches_reference() {
        let r = reference();
        let sat = r.pin_sat().unwrap();
        assert_relative_eq!(sat.beta_sat, 42.983389818291676, max_relative = 1e-9);
        assert_relative_eq!(sat.p_in_sat, 1.8574260134973832e-4, max_relative = 1e-9);
        let dbm = 10.0 * (sat.p_in_sat / 1e-3).log10();
        assert!((-8.0..-6.5).contains(&dbm), "p_in_sat = {dbm} dBm");
        // beta at P_in,sat reproduces beta_sat (definition consistency).
        let b = r.beta_from_pin(sat.p_in_sat).unwrap();
        assert_relative_eq!(b, sat.beta_sat, max_relative = 1e-12);
    }

    #[test]
    fn exact_voltage_reference_roots() {
        // Roots of the balance equation from a 50-digit bisection oracle.
        let r = reference();
        assert_eq!(r.vout_exact(0.0).unwrap(), 0.0);
        let beta_sat = 42.983389818291676;
        let v1 = r.vout_exact(beta_sat).unwrap();
        assert_relative_eq!(v1, 0.95500552186428788, max_relative = 1e-9);
        // Onset of saturation: within 10% of B_v / 2 = 1 V.
        assert!((v1 - 1.0).abs() / 1.0 < 0.10);
        // Deep saturation settles at the asymmetric-current asymptote
        // (B_v + eta V_T ln(I_s/I_Bv)) / (2 (1 + R_s/R_L)), about 4.2% below
        // B_v/2 for the SMS7630 ratio I_Bv/I_s = 20.
        let v3 = r.vout_exact(3.0 * beta_sat).unwrap();
        assert_relative_eq!(v3, 0.95767640075495503, max_relative = 1e-9);
        let v10 = r.vout_exact(10f64.sqrt() * beta_sat).unwrap();
        assert_relative_eq!(v10, 0.95767640075495503, max_relative = 1e-9);
        // Very large beta still solves cleanly in the scaled form.
        let vbig = r.vout_exact(1e4).unwrap();
        assert_relative_eq!(vbig, 0.95767640075495503, max_relative = 1e-9);
    }

    #[test]
    fn exact_power_values() {
        let r = reference();
        assert_eq!(r.pout_exact(0.0).unwrap(), 0.0);
        let beta_sat = 42.983389818291676;
        let p3 = r.pout_exact(3.0 * beta_sat).unwrap();
        assert_relative_eq!(p3, 9.1714408856296523e-5, max_relative = 1e-9);
        // Within 10% of the plateau B_v^2/(4 R_L) = 1e-4 W.
        assert!((p3 - 1e-4).abs() / 1e-4 < 0.10);
    }

    #[test]
    fn exact_agrees_with_lowpower_below_breakdown() {
        let r = reference();
        // -24 dBm input: breakdown term negligible, models agree far inside 2%.
        let p_in = 1e-3 * 10f64.powf(-24.0 / 10.0);
        let beta = r.beta_from_pin(p_in).unwrap();
        let pe = r.pout_exact(beta).unwrap();
        let pl = r.pout_lowpower(beta);
        assert_relative_eq!(pe, pl, max_relative = 1e-10);
        assert_relative_eq!(pl, 8.5268834456332103e-7, max_relative = 1e-9);
    }

    #[test]
    fn lowpower_zero_and_monotone() {
        let r = reference();
        assert_eq!(r.pout_lowpower(0.0), 0.0);
        let p1 = r.pout_lowpower(1.0);
        let p2 = r.pout_lowpower(2.0);
        assert!(p1 > 0.0);
        assert!(p2 > p1);
        // Reference value for beta = 1 from the arbitrary-precision pipeline.
        let w = numerics::lambert_w0(r.a() * r.a().exp() * 1.2660658777520084f64).unwrap();
        let expect = (w / r.a() - 1.0).powi(2) * r.diode().i_s.powi(2) * r.rectifier().r_l;
        assert_relative_eq!(p1, expect, max_relative = 1e-9);
    }

    #[test]
    fn approx_clips_at_plateau() {
        let r = reference();
        let sat = r.pin_sat().unwrap();
        assert_eq!(r.pout_approx(0.0), 0.0);
        assert_eq!(r.pout_approx(sat.beta_sat * 1.0000001), r.plateau_power());
        assert_eq!(r.pout_approx(3.0 * sat.beta_sat), 1.0e-4);
        assert!(r.pout_approx(sat.beta_sat * 0.999) < r.plateau_power());
    }

    #[test]
    fn approx_never_exceeds_plateau_on_grid() {
        let r = reference();
        let sat = r.pin_sat().unwrap();
        for i in 0..1000 {
            let beta = 5.0 * sat.beta_sat * i as f64 / 999.0;
            assert!(r.pout_approx(beta) <= r.plateau_power() * (1.0 + 1e-15));
        }
    }

    #[test]
    fn exact_and_approx_stay_within_factor_two() {
        let r = reference();
        let sat = r.pin_sat().unwrap();
        for i in 1..200 {
            let beta = 5.0 * sat.beta_sat * i as f64 / 199.0;
            let pe = r.pout_exact(beta).unwrap();
            let pa = r.pout_approx(beta);
            let ratio = pe / pa;
            assert!(
                (0.5..=2.0).contains(&ratio),
                "ratio {ratio} at beta = {beta}"
            );
        }
        // Below -20 dBm the two agree within 2%.
        for dbm in [-40.0, -30.0, -25.0, -20.0f64] {
            let beta = r.beta_from_pin(1e-3 * 10f64.powf(dbm / 10.0)).unwrap();
            let pe = r.pout_exact(beta).unwrap();
            let pa = r.pout_approx(beta);
            assert!((pe / pa - 1.0).abs() < 0.02, "{dbm} dBm");
        }
    }

    #[test]
    fn power_over_x_squared_is_increasing_before_saturation() {
        let r = reference();
        let h_e = 4.0911314871692924e-4; // 5 m, alpha 2.5
        let a_sat = r.saturation_amplitude(h_e).unwrap();
        let mut prev = 0.0;
        for i in 1..=200 {
            let x = a_sat * i as f64 / 201.0; // stay strictly below A_T,sat
            let p = r.harvested_power(x, h_e, HarvestModel::Approx).unwrap();
            let ratio = p / (x * x);
            assert!(ratio > prev, "P(x)/x^2 not increasing at x = {x}");
            prev = ratio;
        }
    }

    #[test]
    fn power_monotone_in_channel_gain() {
        let r = reference();
        let (h1, h2) = (5e-4, 4e-4);
        for i in 1..50 {
            let x = 30.0 * i as f64 / 50.0;
            let p1 = r.harvested_power(x, h1, HarvestModel::Approx).unwrap();
            let p2 = r.harvested_power(x, h2, HarvestModel::Approx).unwrap();
            assert!(p1 >= p2);
        }
    }

    #[test]
    fn harvested_power_edges() {
        let r = reference();
        let h_e = 4.0911314871692924e-4;
        assert_eq!(r.harvested_power(0.0, h_e, HarvestModel::Approx).unwrap(), 0.0);
        let a_sat = r.saturation_amplitude(h_e).unwrap();
        assert!((a_sat - 33.31).abs() < 0.35, "A_T,sat = {a_sat}");
        let p = r.harvested_power(a_sat * 1.000001, h_e, HarvestModel::Approx).unwrap();
        assert_eq!(p, r.plateau_power());
        // Evenness is the caller's job via |x|.
        let p1 = r.harvested_power(1.0, h_e, HarvestModel::Approx).unwrap();
        let p2 = r.harvested_power((-1.0f64).abs(), h_e, HarvestModel::Approx).unwrap();
        assert_eq!(p1, p2);
        assert!(r.harvested_power(-1.0, h_e, HarvestModel::Approx).is_err());
    }

    #[test]
    fn exact_roots_have_tiny_posthoc_residual() {
        let r = reference();
        let sat = r.pin_sat().unwrap();
        for mult in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let beta = sat.beta_sat * mult;
            let v = r.vout_exact(beta).unwrap();
            let resid = r.balance_residual(beta, v).unwrap();
            assert!(resid.abs() < 1e-10, "residual {resid} at beta = {beta}");
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut d = DiodeParams::sms7630();
        d.eta = 2.5;
        assert!(Rectenna::new(d, RectifierParams::reference()).is_err());
        let mut d = DiodeParams::sms7630();
        d.i_s = 0.0;
        assert!(Rectenna::new(d, RectifierParams::reference()).is_err());
        let mut rf = RectifierParams::reference();
        rf.f_c = -1.0;
        assert!(Rectenna::new(DiodeParams::sms7630(), rf).is_err());
    }

    #[test]
    fn lpf_warning_triggers_for_fast_carriers() {
        let mut rf = RectifierParams::reference();
        assert!(rf.lpf_warning().is_none());
        rf.c_l = 1e-15;
        assert!(rf.lpf_warning().is_some());
    }
}
