//! Steady-state moments of the driven Kerr oscillator from its exact
//! complex-P distribution.
//!
//! For the mode with drift `d<b>/dt = (i Delta - gamma/2) <b> + i Lambda
//! <b^+ b b> - i eta e^{i phi}`, the steady state admits closed-form
//! normal-ordered moments
//!
//! ```text
//! <b^+j b^i> = e^{-i phi (i-j)} (2 eta / Lambda)^{i+j}
//!              * [prod_{t<i} (c+t) prod_{t<j} (c*+t)]^{-1}
//!              * h(c+i, c*+j, z) / h(c, c*, z),
//! c = (Delta + i gamma/2) / Lambda,     z = 8 (eta / Lambda)^2,
//! h(x, y, z) = sum_n z^n / n! * Gamma(x)Gamma(y) / (Gamma(x+n)Gamma(y+n)).
//! ```
//!
//! The hypergeometric-style series is summed with a multiplicative term
//! recursion and a floating log-scale so that the huge intermediate terms at
//! strong drive (the peak term can exceed 1e300) never overflow.

use num_complex::Complex64 as C64;

use crate::error::{CoreError, Result};
use crate::linalg::{c, cr};

/// Parameters of a single driven Kerr mode; `damping` is the total linear
/// loss of the mode.
#[derive(Debug, Clone, Copy)]
pub struct KerrParams {
    pub detuning: f64,
    pub kerr: f64,
    pub damping: f64,
    pub drive: f64,
    pub drive_phase: f64,
}

impl KerrParams {
    /// The complex potential exponent c = 2 (Delta + i gamma/2) / Lambda.
    /// The factor of two follows from matching the stationary potential
    /// solution of the phase-space equation to the drift
    /// `(i Delta - gamma/2) beta + i Lambda beta^+ beta^2`; it is pinned
    /// independently by the linear (weak-drive) limit and by the Fock-space
    /// master-equation cross-check.
    pub fn exponent(&self) -> C64 {
        c(2.0 * self.detuning, self.damping) / cr(self.kerr)
    }

    /// Dimensionless drive parameter (eta / gamma) sqrt(Lambda / gamma)
    /// controlling the classical response.
    pub fn classical_drive(&self) -> f64 {
        self.drive / self.damping * (self.kerr / self.damping).sqrt()
    }
}

/// Exact normal-ordered steady-state moment `<b^+j b^i>`.
pub fn complexp_moment(params: &KerrParams, j: u32, i: u32) -> Result<C64> {
    if !(params.kerr > 0.0) || !(params.damping > 0.0) {
        return Err(CoreError::Numerical(
            "complex-P moments require positive Kerr strength and damping".into(),
        ));
    }
    if i == 0 && j == 0 {
        return Ok(cr(1.0));
    }
    if params.drive == 0.0 {
        // Undriven steady state is vacuum.
        return Ok(C64::ZERO);
    }
    let cc = params.exponent();
    let ratio = 2.0 * params.drive / params.kerr;
    let z = 2.0 * ratio * ratio;

    // log of (2 eta / Lambda)^{i+j} / [prod (c+t) prod (c*+t)]
    let mut log_pref = C64::new(((i + j) as f64) * ratio.abs().ln(), 0.0);
    if ratio < 0.0 && (i + j) % 2 == 1 {
        log_pref += C64::new(0.0, std::f64::consts::PI);
    }
    for t in 0..i {
        log_pref -= (cc + cr(t as f64)).ln();
    }
    for t in 0..j {
        log_pref -= (cc.conj() + cr(t as f64)).ln();
    }

    let num = log_series(cc + cr(i as f64), cc.conj() + cr(j as f64), z)?;
    let den = log_series(cc, cc.conj(), z)?;
    let phase = -params.drive_phase * (i as f64 - j as f64);
    let log_total = log_pref + num - den + C64::new(0.0, phase);
    Ok(log_total.exp())
}

/// Complex logarithm of h(x, y, z); summed with a floating scale.
fn log_series(x: C64, y: C64, z: f64) -> Result<C64> {
    const MAX_TERMS: usize = 100_000;
    const REL_TOL: f64 = 1e-15;
    // term = unit phase * exp(log magnitude); accumulator relative to `scale`.
    let mut term_log = 0.0f64;
    let mut term_phase = cr(1.0);
    let mut scale = 0.0f64;
    let mut acc = cr(1.0);
    let mut last_rel = f64::INFINITY;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        let factor = cr(z) / (cr(nf + 1.0) * (x + cr(nf)) * (y + cr(nf)));
        let fmag = factor.norm();
        if fmag == 0.0 {
            break;
        }
        term_log += fmag.ln();
        term_phase *= factor / cr(fmag);
        if term_log > scale + 40.0 {
            // Rescale the accumulator to keep exponents representable.
            acc = acc * cr((scale - term_log).exp());
            scale = term_log;
        }
        let contrib = term_phase * cr((term_log - scale).exp());
        acc += contrib;
        let accn = acc.norm().max(1e-300);
        last_rel = contrib.norm() / accn;
        // The terms grow before they decay; only stop once past the peak.
        if fmag < 1.0 && last_rel < REL_TOL {
            return Ok(acc.ln() + cr(scale));
        }
    }
    Err(CoreError::SeriesDivergence { max_terms: MAX_TERMS, last_term: last_rel })
}

/// All real positive solutions n = |b|^2 (scaled units) of the classical
/// steady-state cubic `n ((delta + n)^2 + 1/4) = drive^2`, sorted ascending;
/// `delta` and `drive` are in units of the total damping. One root below the
/// bistable region, three inside it.
pub fn classical_kerr_occupations(delta: f64, drive: f64) -> Vec<f64> {
    // n^3 + 2 delta n^2 + (delta^2 + 1/4) n - drive^2 = 0
    let a2 = 2.0 * delta;
    let a1 = delta * delta + 0.25;
    let a0 = -drive * drive;
    cubic_real_roots(a2, a1, a0)
        .into_iter()
        .filter(|&r| r > 1e-14)
        .collect()
}

/// Real roots of x^3 + a2 x^2 + a1 x + a0 via the trigonometric method.
fn cubic_real_roots(a2: f64, a1: f64, a0: f64) -> Vec<f64> {
    let p = a1 - a2 * a2 / 3.0;
    let q = 2.0 * a2.powi(3) / 27.0 - a2 * a1 / 3.0 + a0;
    let shift = -a2 / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if disc > 0.0 {
        let s = (-q / 2.0 + disc.sqrt()).cbrt();
        let t = (-q / 2.0 - disc.sqrt()).cbrt();
        vec![shift + s + t]
    } else {
        let r = (-p / 3.0).powf(1.5);
        let phi = (-q / (2.0 * r)).clamp(-1.0, 1.0).acos();
        let m = 2.0 * (-p / 3.0).sqrt();
        (0..3)
            .map(|k| shift + m * ((phi + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos())
            .collect()
    };
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}
