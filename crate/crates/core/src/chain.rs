//! Measurement-chain description and construction of all drift, diffusion,
//! coupling and nonlinear tensors in a fixed operator ordering.
//!
//! The chain is an `M`-mode linear source (single- and two-mode squeezing,
//! coherent drives, optional thermal baths) feeding a `K`-mode Kerr network
//! through non-reciprocal circulator hops; the Kerr modes are heterodyne
//! monitored at rate `gamma_h`. Everything is expressed on the ladder-operator
//! vector
//!
//! ```text
//! z = (a_1, a_1^+, ..., a_M, a_M^+, b_1, b_1^+, ..., b_K, b_K^+)
//! ```
//!
//! so every matrix satisfies the conjugate-pair involution: swapping the rows
//! and columns of each (mode, mode^+) pair and conjugating reproduces the
//! matrix.
//!
//! Sign conventions (fixed here once, used by every solver):
//!
//! * mode damping enters drift diagonals as `-kappa_tot/2`, with
//!   `kappa_tot = kappa_m + hop_m` for source modes and
//!   `gamma_k = gamma_h + hop_k` for Kerr modes;
//! * a squeezing term of strength `g` and phase `phi` couples `<o>` to
//!   `<o^+>` with coefficient `-i g e^{i phi}`, so `phi = pi/2` is a real
//!   positive coupling;
//! * coherent drives enter first-order drift as `-eta_m` on both rows of the
//!   pair, making the driven steady state `<a_1> = -2 eta_1 / (kappa - 2 G_1)`
//!   real and negative for a single squeezed mode at `phi = pi/2`;
//! * the circulator hop damps the source (`-hop/2` absorbed in `kappa_tot`)
//!   and drives the Kerr partner as `d<b_k>/dt = ... - hop_k <a_k>`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::{c, cr, CMat, CVec, I};

/// Index bookkeeping for the fixed operator ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_source: usize,
    pub n_kerr: usize,
}

impl Layout {
    pub fn new(n_source: usize, n_kerr: usize) -> Self {
        Layout { n_source, n_kerr }
    }

    /// Total length of the ladder-operator vector, 2(M+K).
    pub fn dim(&self) -> usize {
        2 * (self.n_source + self.n_kerr)
    }

    pub fn source_dim(&self) -> usize {
        2 * self.n_source
    }

    pub fn kerr_dim(&self) -> usize {
        2 * self.n_kerr
    }

    /// Row of the annihilation operator of source mode `m`.
    pub fn source_row(&self, m: usize) -> usize {
        debug_assert!(m < self.n_source);
        2 * m
    }

    /// Row of the annihilation operator of Kerr mode `k` in the full vector.
    pub fn kerr_row(&self, k: usize) -> usize {
        debug_assert!(k < self.n_kerr);
        2 * self.n_source + 2 * k
    }

    /// Inverse lookup: (is_kerr, mode index, is_dagger).
    pub fn mode_of_row(&self, row: usize) -> (bool, usize, bool) {
        assert!(row < self.dim());
        let dagger = row % 2 == 1;
        let pair = row / 2;
        if pair < self.n_source {
            (false, pair, dagger)
        } else {
            (true, pair - self.n_source, dagger)
        }
    }

    /// 2x2 change of basis from a ladder pair to (X, P) quadratures:
    /// X = (o + o^+)/sqrt(2), P = -i(o - o^+)/sqrt(2).
    pub fn u2() -> CMat {
        let s = cr(std::f64::consts::FRAC_1_SQRT_2);
        CMat::from_rows(&[&[s, s], &[-I * s, I * s]])
    }

    /// Block-diagonal quadrature change of basis over all Kerr modes.
    pub fn u_kerr(&self) -> CMat {
        let u = Self::u2();
        let mut out = CMat::zeros(self.kerr_dim(), self.kerr_dim());
        for k in 0..self.n_kerr {
            out.set_block(2 * k, 2 * k, &u);
        }
        out
    }

    /// Conjugate-pair involution: swap each (o, o^+) row/column pair and
    /// conjugate. Physical drift/diffusion matrices are fixed points.
    pub fn involution(m: &CMat) -> CMat {
        let n = m.rows;
        assert!(n % 2 == 0 && m.cols % 2 == 0);
        let swap = |i: usize| if i % 2 == 0 { i + 1 } else { i - 1 };
        CMat::from_fn(n, m.cols, |i, j| m[(swap(i), swap(j))].conj())
    }

    /// Largest deviation from the conjugate-pair structure.
    pub fn involution_defect(m: &CMat) -> f64 {
        Self::involution(m).sub(m).max_abs()
    }

    pub fn vector_pair_defect(v: &[C64]) -> f64 {
        assert!(v.len() % 2 == 0);
        (0..v.len() / 2)
            .map(|i| (v[2 * i].conj() - v[2 * i + 1]).norm())
            .fold(0.0, f64::max)
    }
}

/// Single-mode squeezing of one source mode.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SqueezeTerm {
    pub mode: usize,
    pub g: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Two-mode squeezing between a pair of source modes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TwoModeSqueezeTerm {
    pub a: usize,
    pub b: usize,
    pub g: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Number-conserving hop between two Kerr modes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct KerrHopTerm {
    pub a: usize,
    pub b: usize,
    pub g: f64,
}

/// Phase-preserving (two-mode) bilinear amplifier term between Kerr modes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PpTerm {
    pub a: usize,
    pub b: usize,
    pub g: f64,
}

/// Phase-sensitive (single-mode) bilinear amplifier term on one Kerr mode;
/// `phase` is the amplification phase.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PsTerm {
    pub mode: usize,
    pub g: f64,
    #[serde(default)]
    pub phase: f64,
}

/// One preparable state of the source, indexed by name.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LabelSpec {
    pub name: String,
    /// Coherent drive strength per source mode.
    pub drive: Vec<f64>,
    #[serde(default)]
    pub squeeze: Vec<SqueezeTerm>,
    #[serde(default)]
    pub two_mode_squeeze: Vec<TwoModeSqueezeTerm>,
    /// Thermal occupation of each source mode's unmonitored loss channel.
    #[serde(default)]
    pub thermal: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SourceSection {
    /// Unmonitored loss per source mode.
    pub loss: Vec<f64>,
    /// Circulator hop rate from source mode m into Kerr mode m (0 allowed).
    pub hop: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProcessorSection {
    pub detuning: Vec<f64>,
    /// Common Kerr strength.
    pub kerr: f64,
    /// Monitored decay rate, common to all Kerr modes.
    pub monitor_rate: f64,
    #[serde(default)]
    pub hop: Vec<KerrHopTerm>,
    #[serde(default)]
    pub pp: Vec<PpTerm>,
    #[serde(default)]
    pub ps: Vec<PsTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReadoutSection {
    /// Classical readout noise power in vacuum units.
    #[serde(default)]
    pub classical_noise: f64,
    /// Boxcar filter window length.
    pub window: f64,
    /// Filter start time; `None` means ten relaxation times of the chain.
    #[serde(default)]
    pub settle: Option<f64>,
}

/// Full parameterization of the measurement chain; the single source of
/// truth from which every solver builds its matrices. All rates are in units
/// of `rates_unit`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChainSpec {
    #[serde(default = "default_schema")]
    pub schema: u32,
    #[serde(default = "default_unit")]
    pub rates_unit: String,
    pub source: SourceSection,
    pub processor: ProcessorSection,
    pub readout: ReadoutSection,
    #[serde(rename = "label")]
    pub labels: Vec<LabelSpec>,
}

fn default_schema() -> u32 {
    1
}

fn default_unit() -> String {
    "kappa".to_string()
}

impl ChainSpec {
    pub fn n_source(&self) -> usize {
        self.source.loss.len()
    }

    pub fn n_kerr(&self) -> usize {
        self.processor.detuning.len()
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.n_source(), self.n_kerr())
    }

    /// Total loss of source mode m (unmonitored plus hop).
    pub fn source_damping(&self, m: usize) -> f64 {
        self.source.loss[m] + self.source.hop[m]
    }

    /// Total loss of Kerr mode k (monitored plus incoming hop).
    pub fn kerr_damping(&self, k: usize) -> f64 {
        let hop = if k < self.n_source() { self.source.hop[k] } else { 0.0 };
        self.processor.monitor_rate + hop
    }

    pub fn label_index(&self, name: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| CoreError::Config(format!("unknown label '{name}'")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("chain spec serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CoreError::Config(e.to_string()))
    }

    /// Checks every invariant, accumulating all violations.
    pub fn validate(&self) -> Result<()> {
        let mut errs: Vec<String> = Vec::new();
        let m = self.n_source();
        let k = self.n_kerr();
        if m < 1 {
            errs.push("need at least one source mode".into());
        }
        if k < 1 {
            errs.push("need at least one Kerr mode".into());
        }
        if self.source.hop.len() != m {
            errs.push(format!("hop list has {} entries for {m} source modes", self.source.hop.len()));
        }
        for (i, &v) in self.source.loss.iter().enumerate() {
            if !(v >= 0.0) {
                errs.push(format!("source loss[{i}] = {v} is negative"));
            }
        }
        for (i, &v) in self.source.hop.iter().enumerate() {
            if !(v >= 0.0) {
                errs.push(format!("hop[{i}] = {v} is negative"));
            }
            if v > 0.0 && i >= k {
                errs.push(format!("hop[{i}] > 0 but there is no Kerr mode {i}"));
            }
        }
        if !(self.processor.kerr >= 0.0) {
            errs.push(format!("kerr strength {} is negative", self.processor.kerr));
        }
        if !(self.processor.monitor_rate >= 0.0) {
            errs.push(format!("monitor rate {} is negative", self.processor.monitor_rate));
        }
        if !(self.readout.classical_noise >= 0.0) {
            errs.push(format!("classical noise {} is negative", self.readout.classical_noise));
        }
        if !(self.readout.window > 0.0) {
            errs.push(format!("filter window {} must be positive", self.readout.window));
        }
        for t in &self.processor.hop {
            if t.a >= k || t.b >= k || t.a == t.b {
                errs.push(format!("kerr hop ({}, {}) out of range", t.a, t.b));
            }
        }
        for t in &self.processor.pp {
            if t.a >= k || t.b >= k || t.a == t.b {
                errs.push(format!("pp term ({}, {}) out of range", t.a, t.b));
            }
            if !(t.g >= 0.0) {
                errs.push(format!("pp strength {} is negative", t.g));
            }
        }
        for t in &self.processor.ps {
            if t.mode >= k {
                errs.push(format!("ps term on mode {} out of range", t.mode));
            }
            if !(t.g >= 0.0) {
                errs.push(format!("ps strength {} is negative", t.g));
            }
        }
        if self.labels.is_empty() {
            errs.push("no labels defined".into());
        }
        let mut seen = std::collections::HashSet::new();
        for lab in &self.labels {
            if !seen.insert(lab.name.clone()) {
                errs.push(format!("duplicate label '{}'", lab.name));
            }
            if lab.drive.len() != m {
                errs.push(format!("label '{}': drive list length {} != {m}", lab.name, lab.drive.len()));
            }
            if !lab.thermal.is_empty() && lab.thermal.len() != m {
                errs.push(format!("label '{}': thermal list length {} != {m}", lab.name, lab.thermal.len()));
            }
            for th in &lab.thermal {
                if !(*th >= 0.0) {
                    errs.push(format!("label '{}': thermal occupation {th} is negative", lab.name));
                }
            }
            for t in &lab.squeeze {
                if t.mode >= m {
                    errs.push(format!("label '{}': squeeze mode {} out of range", lab.name, t.mode));
                }
                if !(t.g >= 0.0) {
                    errs.push(format!("label '{}': squeeze strength {} is negative", lab.name, t.g));
                }
            }
            for t in &lab.two_mode_squeeze {
                if t.a >= m || t.b >= m || t.a == t.b {
                    errs.push(format!("label '{}': two-mode squeeze pair ({}, {}) invalid", lab.name, t.a, t.b));
                }
                if !(t.g >= 0.0) {
                    errs.push(format!("label '{}': two-mode squeeze strength {} is negative", lab.name, t.g));
                }
            }
        }
        // Stability of the source drift for every label.
        if errs.is_empty() {
            for lab in &self.labels {
                let sys = self.build_unchecked(&lab.name)?;
                match sys.l_a.eigenvalues() {
                    Ok(ev) => {
                        if let Some(bad) = ev.iter().find(|z| z.re >= -1e-12) {
                            errs.push(format!(
                                "label '{}': source drift is not Hurwitz (eigenvalue {:.6}{:+.6}i)",
                                lab.name, bad.re, bad.im
                            ));
                        }
                    }
                    Err(e) => errs.push(format!("label '{}': eigenvalue failure: {e}", lab.name)),
                }
                if let Ok(ev) = sys.l_b.eigenvalues() {
                    if let Some(bad) = ev.iter().find(|z| z.re >= -1e-12) {
                        errs.push(format!(
                            "label '{}': linear Kerr-sector drift is unstable (eigenvalue {:.6}{:+.6}i); \
                             amplifier strength beyond threshold",
                            lab.name, bad.re, bad.im
                        ));
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CoreError::InvalidChain(errs))
        }
    }

    /// Builds the linear drift/diffusion/coupling description for one label.
    pub fn build(&self, label: &str) -> Result<LinearizedSystem> {
        self.validate()?;
        self.build_unchecked(label)
    }

    fn build_unchecked(&self, label: &str) -> Result<LinearizedSystem> {
        let idx = self.label_index(label)?;
        let lab = &self.labels[idx];
        let layout = self.layout();
        let m = self.n_source();
        let k = self.n_kerr();

        let mut l_a = CMat::zeros(2 * m, 2 * m);
        let mut d_a = CMat::zeros(2 * m, 2 * m);
        let mut eta = vec![C64::ZERO; 2 * m];
        for i in 0..m {
            let kt = self.source_damping(i);
            l_a[(2 * i, 2 * i)] = cr(-0.5 * kt);
            l_a[(2 * i + 1, 2 * i + 1)] = cr(-0.5 * kt);
            eta[2 * i] = cr(-lab.drive[i]);
            eta[2 * i + 1] = cr(-lab.drive[i]);
            if let Some(&nth) = lab.thermal.get(i) {
                let w = cr(self.source.loss[i] * nth);
                d_a[(2 * i, 2 * i + 1)] += w;
                d_a[(2 * i + 1, 2 * i)] += w;
            }
        }
        for t in &lab.squeeze {
            let g = -I * cr(t.g) * c(t.phase.cos(), t.phase.sin());
            let r = 2 * t.mode;
            l_a[(r, r + 1)] += g;
            l_a[(r + 1, r)] += g.conj();
            d_a[(r, r)] += g;
            d_a[(r + 1, r + 1)] += g.conj();
        }
        for t in &lab.two_mode_squeeze {
            let g = -I * cr(t.g) * c(t.phase.cos(), t.phase.sin());
            let (ra, rb) = (2 * t.a, 2 * t.b);
            l_a[(ra, rb + 1)] += g;
            l_a[(rb, ra + 1)] += g;
            l_a[(ra + 1, rb)] += g.conj();
            l_a[(rb + 1, ra)] += g.conj();
            d_a[(ra, rb)] += g;
            d_a[(rb, ra)] += g;
            d_a[(ra + 1, rb + 1)] += g.conj();
            d_a[(rb + 1, ra + 1)] += g.conj();
        }

        let mut gamma = CMat::zeros(2 * k, 2 * m);
        for i in 0..m.min(k) {
            if self.source.hop[i] > 0.0 {
                gamma[(2 * i, 2 * i)] = cr(self.source.hop[i]);
                gamma[(2 * i + 1, 2 * i + 1)] = cr(self.source.hop[i]);
            }
        }

        let mut l_b = CMat::zeros(2 * k, 2 * k);
        let mut d_b_lin = CMat::zeros(2 * k, 2 * k);
        let mut kerr_damping = Vec::with_capacity(k);
        for i in 0..k {
            let g_tot = self.kerr_damping(i);
            kerr_damping.push(g_tot);
            l_b[(2 * i, 2 * i)] = c(-0.5 * g_tot, self.processor.detuning[i]);
            l_b[(2 * i + 1, 2 * i + 1)] = c(-0.5 * g_tot, -self.processor.detuning[i]);
        }
        for t in &self.processor.hop {
            let g = -I * cr(t.g);
            l_b[(2 * t.a, 2 * t.b)] += g;
            l_b[(2 * t.b, 2 * t.a)] += g;
            l_b[(2 * t.a + 1, 2 * t.b + 1)] += g.conj();
            l_b[(2 * t.b + 1, 2 * t.a + 1)] += g.conj();
        }
        for t in &self.processor.pp {
            let g = cr(t.g);
            l_b[(2 * t.a, 2 * t.b + 1)] += g;
            l_b[(2 * t.b, 2 * t.a + 1)] += g;
            l_b[(2 * t.a + 1, 2 * t.b)] += g;
            l_b[(2 * t.b + 1, 2 * t.a)] += g;
            d_b_lin[(2 * t.a, 2 * t.b)] += g;
            d_b_lin[(2 * t.b, 2 * t.a)] += g;
            d_b_lin[(2 * t.a + 1, 2 * t.b + 1)] += g;
            d_b_lin[(2 * t.b + 1, 2 * t.a + 1)] += g;
        }
        for t in &self.processor.ps {
            // A single-mode bilinear of strength g amplifies like a squeezer
            // of strength 2g; `phase` rotates the amplified quadrature.
            let phi = std::f64::consts::FRAC_PI_2 + 2.0 * t.phase;
            let g = -I * cr(2.0 * t.g) * c(phi.cos(), phi.sin());
            let r = 2 * t.mode;
            l_b[(r, r + 1)] += g;
            l_b[(r + 1, r)] += g.conj();
            d_b_lin[(r, r)] += g;
            d_b_lin[(r + 1, r + 1)] += g.conj();
        }

        Ok(LinearizedSystem {
            layout,
            label: lab.name.clone(),
            l_a,
            d_a,
            eta,
            gamma,
            l_b,
            d_b_lin,
            eta_b: vec![C64::ZERO; 2 * k],
            kerr: self.processor.kerr,
            monitor_rate: self.processor.monitor_rate,
            kerr_damping,
        })
    }
}

/// Drift/diffusion matrices of the chain for one label, in physical rate
/// units and the fixed ordering of [`Layout`]. The Kerr-dependent pieces
/// (Jacobian, linearized diffusion, Hessian contraction) are functions of a
/// working point and live as the free functions below.
#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    pub layout: Layout,
    pub label: String,
    /// Source drift, 2M x 2M.
    pub l_a: CMat,
    /// Source diffusion, 2M x 2M symmetric.
    pub d_a: CMat,
    /// Source drive vector (enters d<a>/dt additively).
    pub eta: CVec,
    /// Non-reciprocal hop block, 2K x 2M; enters as d<b>/dt = ... - gamma <a>.
    pub gamma: CMat,
    /// Linear Kerr-sector drift (detunings, damping, hops, amplifier terms).
    pub l_b: CMat,
    /// Linear Kerr-sector diffusion from bilinear amplifier terms.
    pub d_b_lin: CMat,
    /// Direct coherent drive on the Kerr modes (zero for source-fed chains;
    /// used by benchmark configurations).
    pub eta_b: CVec,
    /// Common Kerr strength.
    pub kerr: f64,
    pub monitor_rate: f64,
    /// Total damping per Kerr mode.
    pub kerr_damping: Vec<f64>,
}

impl LinearizedSystem {
    /// A single directly driven Kerr mode with no source section: the
    /// workhorse benchmark configuration. `loss_extra` is the unmonitored
    /// input-port loss; the drive enters as `-i eta e^{i phase}` in d<b>/dt.
    pub fn driven_kerr(
        detuning: f64,
        kerr: f64,
        monitor_rate: f64,
        loss_extra: f64,
        drive: f64,
        drive_phase: f64,
    ) -> Self {
        let g_tot = monitor_rate + loss_extra;
        let l_b = CMat::from_rows(&[
            &[c(-0.5 * g_tot, detuning), C64::ZERO],
            &[C64::ZERO, c(-0.5 * g_tot, -detuning)],
        ]);
        let eb = -I * cr(drive) * c(drive_phase.cos(), drive_phase.sin());
        LinearizedSystem {
            layout: Layout::new(0, 1),
            label: "driven".into(),
            l_a: CMat::zeros(0, 0),
            d_a: CMat::zeros(0, 0),
            eta: vec![],
            gamma: CMat::zeros(2, 0),
            l_b,
            d_b_lin: CMat::zeros(2, 2),
            eta_b: vec![eb, eb.conj()],
            kerr,
            monitor_rate,
            kerr_damping: vec![g_tot],
        }
    }

    /// Reference rate for dimensionless Kerr-sector quantities: the common
    /// damping when the modes are symmetric, else the largest damping (only
    /// linear chains are allowed to be asymmetric).
    pub fn kerr_reference_rate(&self) -> f64 {
        self.kerr_damping_uniform()
            .unwrap_or_else(|_| self.kerr_damping.iter().cloned().fold(0.0, f64::max))
    }

    /// Common total Kerr-mode damping; errors if the modes are asymmetric.
    pub fn kerr_damping_uniform(&self) -> Result<f64> {
        let g0 = self.kerr_damping[0];
        if self.kerr_damping.iter().any(|&g| (g - g0).abs() > 1e-12 * g0.max(1.0)) {
            return Err(CoreError::Numerical(
                "Kerr modes have unequal total damping; scaled quantities are undefined".into(),
            ));
        }
        Ok(g0)
    }

    /// Dimensionless Kerr strength kerr / gamma.
    pub fn kerr_scaled(&self) -> Result<f64> {
        Ok(self.kerr / self.kerr_damping_uniform()?)
    }

    /// Full linear drift in block form [[L_a, 0], [-Gamma, L_b]].
    pub fn full_drift_linear(&self) -> CMat {
        let n = self.layout.dim();
        let sd = self.layout.source_dim();
        let mut a = CMat::zeros(n, n);
        a.set_block(0, 0, &self.l_a);
        a.set_block(sd, 0, &self.gamma.scale(cr(-1.0)));
        a.set_block(sd, sd, &self.l_b);
        a
    }

    /// Full linear diffusion diag(D_a, D_b_lin).
    pub fn full_diffusion_linear(&self) -> CMat {
        let n = self.layout.dim();
        let sd = self.layout.source_dim();
        let mut d = CMat::zeros(n, n);
        d.set_block(0, 0, &self.d_a);
        d.set_block(sd, sd, &self.d_b_lin);
        d
    }

    /// Full inhomogeneous drive (source drives stacked on Kerr drives).
    pub fn full_drive(&self) -> CVec {
        let mut f = self.eta.clone();
        f.extend_from_slice(&self.eta_b);
        f
    }

    /// Steady state of the linear source sector, `<a> = -L_a^{-1} eta`.
    pub fn source_steady_mean(&self) -> Result<CVec> {
        if self.layout.n_source == 0 {
            return Ok(vec![]);
        }
        let rhs: CVec = self.eta.iter().map(|z| -z).collect();
        self.l_a.solve_vec(&rhs)
    }
}

/// Scaled Kerr-sector Jacobian at a working point `bbar` (entries in
/// conjugate pairs, in units where the common damping is 1): the linear part
/// `L_b / gamma` plus the mode-local blocks
/// `[[2i|b|^2, i b^2], [-i b*^2, -2i|b|^2]]`.
pub fn kerr_jacobian(sys: &LinearizedSystem, bbar: &[C64]) -> Result<CMat> {
    let kd = sys.layout.kerr_dim();
    if bbar.len() != kd {
        return Err(CoreError::DimensionMismatch {
            context: format!("working point has {} entries, expected {kd}", bbar.len()),
        });
    }
    if Layout::vector_pair_defect(bbar) > 1e-9 * (1.0 + bbar.iter().map(|z| z.norm()).fold(0.0, f64::max)) {
        return Err(CoreError::DimensionMismatch {
            context: "working point is not in conjugate-pair layout".into(),
        });
    }
    let g = sys.kerr_damping_uniform()?;
    let mut j = sys.l_b.scale(cr(1.0 / g));
    add_kerr_blocks(&mut j, bbar, 1.0);
    Ok(j)
}

/// Adds `scale *` the mode-local Kerr Jacobian blocks evaluated at `b` to `j`.
pub(crate) fn add_kerr_blocks(j: &mut CMat, b: &[C64], scale: f64) {
    let k = b.len() / 2;
    for i in 0..k {
        let bk = b[2 * i];
        let bkd = b[2 * i + 1];
        let n2 = cr(2.0) * bk * bkd;
        j[(2 * i, 2 * i)] += I * n2 * cr(scale);
        j[(2 * i, 2 * i + 1)] += I * bk * bk * cr(scale);
        j[(2 * i + 1, 2 * i)] += -I * bkd * bkd * cr(scale);
        j[(2 * i + 1, 2 * i + 1)] += -I * n2 * cr(scale);
    }
}

/// Hessian double contraction: maps the mode-local covariance blocks of `c_b`
/// into the drift-shift vector, entry pair
/// `(i b^+ C_bb + 2i b C_b+b, -i b C_b+b+ - 2i b^+ C_b+b)` per mode. Cross-mode
/// covariances never enter: the nonlinearity is on-site.
pub fn kerr_hessian_contract(bbar: &[C64], c_b: &CMat) -> CVec {
    let kd = bbar.len();
    assert_eq!(c_b.rows, kd);
    assert_eq!(c_b.cols, kd);
    let mut h = vec![C64::ZERO; kd];
    for k in 0..kd / 2 {
        let b = bbar[2 * k];
        let bd = bbar[2 * k + 1];
        let cbb = c_b[(2 * k, 2 * k)];
        let cbdb = c_b[(2 * k, 2 * k + 1)];
        let cbdbd = c_b[(2 * k + 1, 2 * k + 1)];
        h[2 * k] = I * (bd * cbb + cr(2.0) * b * cbdb);
        h[2 * k + 1] = -I * (b * cbdbd + cr(2.0) * bd * cbdb);
    }
    h
}

/// Linearized Kerr diffusion at the working point: diag(i b_k^2, -i b_k^+2).
pub fn kerr_linearized_diffusion(bbar: &[C64]) -> CMat {
    let kd = bbar.len();
    let mut d = CMat::zeros(kd, kd);
    for k in 0..kd / 2 {
        d[(2 * k, 2 * k)] = I * bbar[2 * k] * bbar[2 * k];
        d[(2 * k + 1, 2 * k + 1)] = -I * bbar[2 * k + 1] * bbar[2 * k + 1];
    }
    d
}
