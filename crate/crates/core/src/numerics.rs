//! Special functions and generic numerical kernels used by the rest of the
//! crate: `ln I0` (log-domain modified Bessel function), the principal
//! Lambert-W branch (including huge arguments given in log form), the error
//! function, bracketed Newton root finding, and deterministic fixed-node
//! Gauss-Legendre quadrature.
//!
//! Everything here is a pure function of its arguments; there is no global
//! state beyond a lazily initialised quadrature node table.

use std::sync::OnceLock;

use thiserror::Error;

/// Errors produced by the numerical kernels.
#[derive(Debug, Clone, Error)]
pub enum NumericsError {
    /// Input outside the supported domain.
    #[error("{what}: argument {value} outside domain")]
    Domain { what: &'static str, value: f64 },
    /// Iteration budget exhausted before the tolerance was met.
    #[error("no convergence after {iterations} iterations (last x = {last_iterate}, residual = {residual})")]
    Convergence {
        iterations: usize,
        last_iterate: f64,
        residual: f64,
    },
    /// An integrand sample evaluated to a non-finite value.
    #[error("non-finite integrand sample {value} at x = {at}")]
    BadSample { at: f64, value: f64 },
    /// A spec struct violated one of its invariants.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

/// Fixed-node quadrature request: `node_count` total nodes on `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub node_count: usize,
    pub lower: f64,
    pub upper: f64,
}

impl QuadratureSpec {
    pub fn new(node_count: usize, lower: f64, upper: f64) -> Result<Self, NumericsError> {
        if node_count < 16 {
            return Err(NumericsError::InvalidSpec(format!(
                "node_count must be >= 16, got {node_count}"
            )));
        }
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(NumericsError::InvalidSpec(format!(
                "need finite lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self {
            node_count,
            lower,
            upper,
        })
    }
}

/// Bracketed Newton solve request. The bracket itself is passed to
/// [`newton_root`]; `abs_tolerance` is in the same units as the root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSolveSpec {
    pub initial_guess: f64,
    pub abs_tolerance: f64,
    pub max_iterations: usize,
}

impl RootSolveSpec {
    pub fn new(
        initial_guess: f64,
        abs_tolerance: f64,
        max_iterations: usize,
    ) -> Result<Self, NumericsError> {
        if !(abs_tolerance > 0.0) {
            return Err(NumericsError::InvalidSpec(format!(
                "abs_tolerance must be > 0, got {abs_tolerance}"
            )));
        }
        if max_iterations == 0 {
            return Err(NumericsError::InvalidSpec(
                "max_iterations must be >= 1".into(),
            ));
        }
        Ok(Self {
            initial_guess,
            abs_tolerance,
            max_iterations,
        })
    }
}

// Series/asymptotic cross-over for ln I0. Both branches agree to ~1e-13
// relative in a wide band around this point.
const BESSEL_SEAM: f64 = 50.0;

/// Natural log of the modified Bessel function of the first kind, order zero.
///
/// Power series below the seam, asymptotic expansion above it; never
/// overflows (`beta` up to at least 1e4 maps to `~beta`).
pub fn log_bessel_i0(beta: f64) -> Result<f64, NumericsError> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(NumericsError::Domain {
            what: "log_bessel_i0",
            value: beta,
        });
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    if beta <= BESSEL_SEAM {
        // I0(b) = sum_m (b/2)^(2m) / (m!)^2; all terms positive, no
        // cancellation, and the sum stays far below f64 overflow for b <= 50.
        let q = beta * beta / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..400 {
            term *= q / ((m * m) as f64);
            sum += term;
            if term < sum * 1e-18 {
                break;
            }
        }
        Ok(sum.ln())
    } else {
        // I0(b) ~ e^b / sqrt(2 pi b) * (1 + sum_k a_k / b^k) with
        // a_k = prod_{j<=k} (2j-1)^2 / (k! 8^k).
        let mut corr = 1.0;
        let mut term = 1.0;
        for k in 1..=10u32 {
            let odd = (2 * k - 1) as f64;
            term *= odd * odd / (8.0 * k as f64 * beta);
            corr += term;
        }
        Ok(beta - 0.5 * (2.0 * std::f64::consts::PI * beta).ln() + corr.ln())
    }
}

/// Principal branch of the Lambert W function on the non-negative real axis:
/// returns `w >= 0` with `w * e^w = y`.
pub fn lambert_w0(y: f64) -> Result<f64, NumericsError> {
    if !y.is_finite() || y < 0.0 {
        return Err(NumericsError::Domain {
            what: "lambert_w0",
            value: y,
        });
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut w = if y < std::f64::consts::E {
        // ln(1+y) overshoots slightly; Newton on the convex w e^w descends
        // monotonically from there.
        y.ln_1p()
    } else {
        let l = y.ln();
        l - l.ln().max(0.0)
    };
    for _ in 0..60 {
        let ew = w.exp();
        let f = w * ew - y;
        let step = f / (ew * (1.0 + w));
        w -= step;
        if step.abs() <= 1e-16 * w.abs().max(1e-300) {
            break;
        }
    }
    Ok(w.max(0.0))
}

/// Lambert W of `exp(log_y)`, computed without forming `exp(log_y)` when that
/// would overflow. Solves `w + ln w = log_y` for `log_y >= 1` and falls back
/// to [`lambert_w0`] below that.
pub fn lambert_w0_from_log(log_y: f64) -> Result<f64, NumericsError> {
    if !log_y.is_finite() {
        return Err(NumericsError::Domain {
            what: "lambert_w0_from_log",
            value: log_y,
        });
    }
    if log_y < 1.0 {
        // exp(log_y) < e is always representable here.
        return lambert_w0(log_y.exp());
    }
    // w + ln w = L is monotone in w on (0, inf); Newton from w = L - ln L.
    let l = log_y;
    let mut w = if l > 1.5 { l - l.ln() } else { 1.0 };
    for _ in 0..60 {
        let f = w + w.ln() - l;
        let step = f * w / (w + 1.0);
        w -= step;
        if step.abs() <= 1e-16 * w.abs() {
            break;
        }
    }
    Ok(w)
}

const FRAC_2_SQRT_PI: f64 = 1.128379167095512573896_f64; // 2/sqrt(pi)

/// Error function, absolute error below 1e-12 over the whole real line.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let val = if ax < 6.5 {
        // erf(x) = 2x/sqrt(pi) e^{-x^2} sum_n (2x^2)^n / (2n+1)!!
        // (all terms positive, no cancellation anywhere in the range).
        let x2 = ax * ax;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut m = 1.0;
        for _ in 0..400 {
            term *= 2.0 * x2 / (2.0 * m + 1.0);
            sum += term;
            if term < sum * 1e-18 {
                break;
            }
            m += 1.0;
        }
        (FRAC_2_SQRT_PI * ax * (-x2).exp() * sum).min(1.0)
    } else {
        1.0 // erfc(6.5) < 3e-20
    };
    if x < 0.0 {
        -val
    } else {
        val
    }
}

/// Bracketed Newton root finder. `bracket` must contain a sign change of `f`;
/// any Newton step that would leave the current bracket is replaced by
/// bisection, so convergence is guaranteed for continuous `f`.
pub fn newton_root<F, D>(
    f: F,
    df: D,
    bracket: (f64, f64),
    spec: &RootSolveSpec,
) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(NumericsError::InvalidSpec(format!(
            "bracket [{lo}, {hi}] is empty"
        )));
    }
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(NumericsError::InvalidSpec(format!(
            "no sign change on bracket [{lo}, {hi}] (f = {flo}, {fhi})"
        )));
    }
    let mut x = spec.initial_guess.clamp(lo, hi);
    let mut fx = f(x);
    for it in 0..spec.max_iterations {
        if fx == 0.0 {
            return Ok(x);
        }
        // Shrink the bracket around the sign change.
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        let dfx = df(x);
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        fx = f(x);
        // x-space convergence: with the bracket shrinking around the sign
        // change this bounds the residual by |f'| * abs_tolerance.
        let xtol = spec.abs_tolerance * x.abs().max(1.0);
        if step <= xtol || hi - lo <= xtol {
            return Ok(x);
        }
        if it + 1 == spec.max_iterations {
            break;
        }
    }
    Err(NumericsError::Convergence {
        iterations: spec.max_iterations,
        last_iterate: x,
        residual: fx,
    })
}

const PANEL_ORDER: usize = 16;

fn gl16() -> &'static [(f64, f64); PANEL_ORDER] {
    static NODES: OnceLock<[(f64, f64); PANEL_ORDER]> = OnceLock::new();
    NODES.get_or_init(|| {
        let mut out = [(0.0, 0.0); PANEL_ORDER];
        let n = PANEL_ORDER;
        // Roots of P_16 by Newton iteration on the Legendre recurrence.
        for i in 0..(n + 1) / 2 {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / pp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * pp * pp);
            out[i] = (-x, w);
            out[n - 1 - i] = (x, w);
        }
        out
    })
}

/// Nodes and weights of a composite 16-point Gauss-Legendre rule with at
/// least `spec.node_count` nodes on `[spec.lower, spec.upper]`.
pub fn quadrature_nodes(spec: &QuadratureSpec) -> (Vec<f64>, Vec<f64>) {
    let panels = spec.node_count.div_ceil(PANEL_ORDER);
    let width = (spec.upper - spec.lower) / panels as f64;
    let base = gl16();
    let mut nodes = Vec::with_capacity(panels * PANEL_ORDER);
    let mut weights = Vec::with_capacity(panels * PANEL_ORDER);
    for p in 0..panels {
        let a = spec.lower + p as f64 * width;
        let mid = a + 0.5 * width;
        for &(t, w) in base.iter() {
            nodes.push(mid + 0.5 * width * t);
            weights.push(0.5 * width * w);
        }
    }
    (nodes, weights)
}

/// Deterministic fixed-node quadrature of `f` over the interval in `spec`.
pub fn integrate<F>(f: F, spec: &QuadratureSpec) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    let (nodes, weights) = quadrature_nodes(spec);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights.iter()) {
        let v = f(*x);
        if !v.is_finite() {
            return Err(NumericsError::BadSample { at: *x, value: v });
        }
        acc += w * v;
    }
    Ok(acc)
}
