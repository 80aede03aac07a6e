//! Stochastic truncated cumulant equations of motion: measurement-conditioned
//! integration of first- and second-order cumulants of the full chain under
//! heterodyne monitoring of the Kerr modes, emitting raw record increments.
//!
//! The deterministic drift keeps every second-order-truncated term of the
//! Kerr hierarchy: first-order cumulants feel
//! `i kerr (<b^+><b>^2 + C_bb <b^+> + 2 C_b+b <b>)` per mode, and the
//! covariance evolves under the state-dependent drift with cumulant-corrected
//! Kerr blocks
//!
//! ```text
//! [[2i kerr (|<b>|^2 + C_b+b),   i kerr (<b>^2 + C_bb)], [c.c.]]
//! ```
//!
//! plus the inhomogeneous pair `i kerr (<b>^2 + C_bb)` on the (b, b) diagonal.
//! For one mode this reduces term by term to the closed single-oscillator
//! cumulant equations; for zero Kerr strength it is the exact Gaussian chain.
//!
//! Heterodyne monitoring adds, per monitored mode and step, the record-noise
//! kicks on every first-order cumulant through the covariance columns of that
//! mode (source means are conditioned through the cross block), and a
//! deterministic quadratic contraction of the covariance. Conditional
//! second-order cumulants carry no explicit noise term at this truncation
//! order, yet become stochastic for a nonlinear chain through their coupling
//! to the noisy means.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::chain::{ChainSpec, Layout, LinearizedSystem};
use crate::error::{CoreError, Result};
use crate::linalg::{cr, CMat, CVec};
use crate::readout::{FeatureSet, FeatureVector};

/// Integrator configuration. `dt` and times are in the chain's rate units.
#[derive(Debug, Clone, Copy)]
pub struct SdeConfig {
    pub dt: f64,
    pub t_total: f64,
    pub seed: u64,
    /// Keep every n-th cumulant state on the trajectory (0: endpoints only).
    pub store_stride: usize,
}

impl Default for SdeConfig {
    fn default() -> Self {
        // The benchmark-grade step; production ensembles override it after a
        // self-convergence check.
        SdeConfig { dt: 5e-5, t_total: 1.0, seed: 0, store_stride: 0 }
    }
}

/// Conditional cumulant state at one time.
#[derive(Debug, Clone)]
pub struct CumulantState {
    pub t: f64,
    pub mean: CVec,
    pub cov: CMat,
}

/// A single integrated trajectory: strided cumulant states plus the raw
/// heterodyne record increments of every monitored mode at every step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub layout: Layout,
    pub dt: f64,
    pub seed: u64,
    pub states: Vec<CumulantState>,
    /// Per monitored mode: in-phase record increments per step.
    pub record_i: Vec<Vec<f64>>,
    pub record_q: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn span(&self) -> f64 {
        self.record_i.first().map(|r| r.len() as f64 * self.dt).unwrap_or(0.0)
    }
}

/// Precomputed flat-matrix form of the chain for fast stepping.
pub struct SteomSystem {
    pub layout: Layout,
    n: usize,
    a_lin: Vec<C64>,
    d_lin: Vec<C64>,
    drive: CVec,
    kerr: f64,
    monitor_rate: f64,
}

impl SteomSystem {
    pub fn new(sys: &LinearizedSystem) -> Self {
        let n = sys.layout.dim();
        let a = sys.full_drift_linear();
        let d = sys.full_diffusion_linear();
        SteomSystem {
            layout: sys.layout,
            n,
            a_lin: a.data().to_vec(),
            d_lin: d.data().to_vec(),
            drive: sys.full_drive(),
            kerr: sys.kerr,
            monitor_rate: sys.monitor_rate,
        }
    }

    /// Full truncated deterministic drift of (mean, cov).
    pub fn deterministic_drift(&self, mean: &[C64], cov: &CMat) -> (CVec, CMat) {
        let mut dmean = vec![C64::ZERO; self.n];
        let mut dcov = CMat::zeros(self.n, self.n);
        let mut ws = Workspace::new(self.n);
        self.drift_into(mean, cov.data(), &mut dmean, dcov.data_mut(), &mut ws);
        (dmean, dcov)
    }

    /// Deterministic measurement contraction of the covariance (the Ito term
    /// quadratic in cumulants) for all monitored modes.
    pub fn measurement_backaction(&self, cov: &CMat) -> CMat {
        let mut out = CMat::zeros(self.n, self.n);
        self.backaction_into(cov.data(), out.data_mut());
        out
    }

    /// Stochastic mean kick for given Wiener increments, one (dWI, dWQ) pair
    /// per monitored mode.
    pub fn measurement_kick(&self, cov: &CMat, dw: &[(f64, f64)]) -> CVec {
        let mut out = vec![C64::ZERO; self.n];
        self.kick_into(cov.data(), dw, &mut out);
        out
    }

    fn drift_into(
        &self,
        mean: &[C64],
        cov: &[C64],
        dmean: &mut [C64],
        dcov: &mut [C64],
        ws: &mut Workspace,
    ) {
        let n = self.n;
        // dmean = A mean + f (+ Kerr cumulant drift)
        for i in 0..n {
            let mut acc = self.drive[i];
            for j in 0..n {
                acc += self.a_lin[i * n + j] * mean[j];
            }
            dmean[i] = acc;
        }
        // A_eff = A_lin + cumulant-corrected Kerr blocks; D_eff on diagonal.
        ws.a_eff.copy_from_slice(&self.a_lin);
        ws.d_eff.iter_mut().for_each(|z| *z = C64::ZERO);
        if self.kerr > 0.0 {
            let il = C64::new(0.0, self.kerr);
            for k in 0..self.layout.n_kerr {
                let r = self.layout.kerr_row(k);
                let b = mean[r];
                let bd = mean[r + 1];
                let cbb = cov[r * n + r];
                let cbdb = cov[r * n + r + 1];
                let cbdbd = cov[(r + 1) * n + r + 1];
                dmean[r] += il * (bd * b * b + cbb * bd + cr(2.0) * cbdb * b);
                dmean[r + 1] += -il * (b * bd * bd + cbdbd * b + cr(2.0) * cbdb * bd);
                let nn = b * bd + cbdb;
                let ss = b * b + cbb;
                ws.a_eff[r * n + r] += il * cr(2.0) * nn;
                ws.a_eff[r * n + r + 1] += il * ss;
                ws.a_eff[(r + 1) * n + r] += (il * ss).conj();
                ws.a_eff[(r + 1) * n + r + 1] += (il * cr(2.0) * nn).conj();
                ws.d_eff[r * n + r] = il * ss;
                ws.d_eff[(r + 1) * n + r + 1] = (il * ss).conj();
            }
        }
        // dcov = A_eff C + (A_eff C)^T + D_lin + D_eff  (C symmetric).
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::ZERO;
                for k in 0..n {
                    acc += ws.a_eff[i * n + k] * cov[k * n + j];
                }
                ws.m[i * n + j] = acc;
            }
        }
        for i in 0..n {
            for j in 0..n {
                dcov[i * n + j] =
                    ws.m[i * n + j] + ws.m[j * n + i] + self.d_lin[i * n + j] + ws.d_eff[i * n + j];
            }
        }
    }

    fn backaction_into(&self, cov: &[C64], dcov: &mut [C64]) {
        let n = self.n;
        let g = self.monitor_rate;
        for k in 0..self.layout.n_kerr {
            let r = self.layout.kerr_row(k);
            for i in 0..n {
                let u_i = cov[i * n + r];
                let v_i = cov[i * n + r + 1];
                for j in 0..n {
                    let u_j = cov[j * n + r];
                    let v_j = cov[j * n + r + 1];
                    dcov[i * n + j] -= cr(g) * (u_i * v_j + v_i * u_j);
                }
            }
        }
    }

    fn kick_into(&self, cov: &[C64], dw: &[(f64, f64)], dmean: &mut [C64]) {
        let n = self.n;
        let pref = (0.5 * self.monitor_rate).sqrt();
        for k in 0..self.layout.n_kerr {
            let r = self.layout.kerr_row(k);
            let (dwi, dwq) = dw[k];
            for i in 0..n {
                let u = cov[i * n + r];
                let v = cov[i * n + r + 1];
                dmean[i] += cr(pref)
                    * ((u + v) * cr(dwi) + C64::new(0.0, 1.0) * (v - u) * cr(dwq));
            }
        }
    }
}

struct Workspace {
    a_eff: Vec<C64>,
    d_eff: Vec<C64>,
    m: Vec<C64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            a_eff: vec![C64::ZERO; n * n],
            d_eff: vec![C64::ZERO; n * n],
            m: vec![C64::ZERO; n * n],
        }
    }
}

/// Fixed-step conditional integrator over one chain.
pub struct Stepper {
    sys: SteomSystem,
    ws: Workspace,
    dmean: CVec,
    dcov: Vec<C64>,
    pub t: f64,
    pub mean: CVec,
    pub cov: Vec<C64>,
    rng: ChaCha12Rng,
    dt: f64,
    sqrt_dt: f64,
    step_count: usize,
}

impl Stepper {
    pub fn new(sys: &LinearizedSystem, dt: f64, seed: u64) -> Self {
        let s = SteomSystem::new(sys);
        let n = s.n;
        Stepper {
            ws: Workspace::new(n),
            dmean: vec![C64::ZERO; n],
            dcov: vec![C64::ZERO; n * n],
            sys: s,
            t: 0.0,
            mean: vec![C64::ZERO; n],
            cov: vec![C64::ZERO; n * n],
            rng: ChaCha12Rng::seed_from_u64(seed),
            dt,
            sqrt_dt: dt.sqrt(),
            step_count: 0,
        }
    }

    pub fn set_state(&mut self, mean: &[C64], cov: &CMat) {
        self.mean.copy_from_slice(mean);
        self.cov.copy_from_slice(cov.data());
    }

    /// One Euler-Maruyama step; returns the raw record increments
    /// (dI_k, dQ_k) for each monitored mode over this step.
    pub fn step(&mut self) -> Result<Vec<(f64, f64)>> {
        let n = self.sys.n;
        let kn = self.sys.layout.n_kerr;
        let dt = self.dt;
        // Record increments use the pre-step conditional means.
        let sig = (2.0 * self.sys.monitor_rate).sqrt();
        let mut dw = Vec::with_capacity(kn);
        let mut records = Vec::with_capacity(kn);
        for k in 0..kn {
            let r = self.sys.layout.kerr_row(k);
            let g1: f64 = self.rng.sample(StandardNormal);
            let g2: f64 = self.rng.sample(StandardNormal);
            let (dwi, dwq) = (g1 * self.sqrt_dt, g2 * self.sqrt_dt);
            dw.push((dwi, dwq));
            records.push((
                sig * self.mean[r].re * dt + dwi,
                sig * self.mean[r].im * dt + dwq,
            ));
        }
        self.sys
            .drift_into(&self.mean, &self.cov, &mut self.dmean, &mut self.dcov, &mut self.ws);
        self.sys.backaction_into(&self.cov, &mut self.dcov);
        for i in 0..n {
            self.mean[i] += self.dmean[i] * cr(dt);
        }
        self.sys.kick_into(&self.cov, &dw, &mut self.mean);
        for i in 0..n * n {
            self.cov[i] += self.dcov[i] * cr(dt);
        }
        self.project();
        self.t += dt;
        self.step_count += 1;
        if !self.mean[0].re.is_finite() || !self.cov[0].re.is_finite() {
            return Err(CoreError::TrajectoryDiverged { step: self.step_count });
        }
        Ok(records)
    }

    /// Re-imposes symmetry and the conjugate-pair structure, which otherwise
    /// drift at floating-point order.
    fn project(&mut self) {
        let n = self.sys.n;
        for p in 0..n / 2 {
            let avg = 0.5 * (self.mean[2 * p] + self.mean[2 * p + 1].conj());
            self.mean[2 * p] = avg;
            self.mean[2 * p + 1] = avg.conj();
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let s = 0.5 * (self.cov[i * n + j] + self.cov[j * n + i]);
                self.cov[i * n + j] = s;
                self.cov[j * n + i] = s;
            }
        }
        let swap = |i: usize| if i % 2 == 0 { i + 1 } else { i - 1 };
        for i in 0..n {
            for j in i..n {
                let (si, sj) = (swap(i), swap(j));
                let a = self.cov[i * n + j];
                let b = self.cov[si * n + sj].conj();
                let avg = 0.5 * (a + b);
                self.cov[i * n + j] = avg;
                self.cov[j * n + i] = avg;
                self.cov[si * n + sj] = avg.conj();
                self.cov[sj * n + si] = avg.conj();
            }
        }
    }

    pub fn state(&self) -> CumulantState {
        let n = self.sys.n;
        let mut c = CMat::zeros(n, n);
        c.data_mut().copy_from_slice(&self.cov);
        CumulantState { t: self.t, mean: self.mean.clone(), cov: c }
    }
}

/// Integrates one full trajectory, storing strided states and every record
/// increment. Identical (system, config) pairs reproduce bit-identically.
pub fn integrate_trajectory(sys: &LinearizedSystem, config: &SdeConfig) -> Result<Trajectory> {
    let n_steps = (config.t_total / config.dt).round() as usize;
    let kn = sys.layout.n_kerr;
    let mut stepper = Stepper::new(sys, config.dt, config.seed);
    let mut record_i: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps); kn];
    let mut record_q: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps); kn];
    let mut states = Vec::new();
    states.push(stepper.state());
    for step in 0..n_steps {
        let recs = stepper.step()?;
        for (k, (ri, rq)) in recs.into_iter().enumerate() {
            record_i[k].push(ri);
            record_q[k].push(rq);
        }
        let keep = config.store_stride > 0 && (step + 1) % config.store_stride == 0;
        if keep || step + 1 == n_steps {
            states.push(stepper.state());
        }
    }
    Ok(Trajectory { layout: sys.layout, dt: config.dt, seed: config.seed, states, record_i, record_q })
}

/// Integrates up to `start + window` and streams the boxcar sums of the
/// records over the window; memory stays O(1) in the step count.
pub fn filtered_features(
    sys: &LinearizedSystem,
    dt: f64,
    seed: u64,
    window: f64,
    start: f64,
) -> Result<Vec<f64>> {
    let kn = sys.layout.n_kerr;
    let i0 = (start / dt).round() as usize;
    let i1 = ((start + window) / dt).round() as usize;
    let mut stepper = Stepper::new(sys, dt, seed);
    let mut acc = vec![0.0f64; 2 * kn];
    for step in 0..i1 {
        let recs = stepper.step()?;
        if step >= i0 {
            for (k, (ri, rq)) in recs.into_iter().enumerate() {
                acc[2 * k] += ri;
                acc[2 * k + 1] += rq;
            }
        }
    }
    let norm = 1.0 / (2.0 * window).sqrt();
    Ok(acc.into_iter().map(|x| x * norm).collect())
}

/// Integrates the deterministic truncated equations to their steady state
/// (no measurement conditioning); used for unconditional benchmarks.
pub fn deterministic_steady_state(
    sys: &LinearizedSystem,
    dt: f64,
    t_max: f64,
) -> Result<CumulantState> {
    let s = SteomSystem::new(sys);
    let n = s.n;
    let mut mean = vec![C64::ZERO; n];
    let mut cov = CMat::zeros(n, n);
    let steps = (t_max / dt).round() as usize;
    let mut last_change = f64::INFINITY;
    let mut t = 0.0;
    for step in 0..steps {
        // Classical fourth-order step on the drift.
        let (k1m, k1c) = s.deterministic_drift(&mean, &cov);
        let m2: CVec = (0..n).map(|i| mean[i] + k1m[i] * cr(0.5 * dt)).collect();
        let c2 = cov.add(&k1c.scale(cr(0.5 * dt)));
        let (k2m, k2c) = s.deterministic_drift(&m2, &c2);
        let m3: CVec = (0..n).map(|i| mean[i] + k2m[i] * cr(0.5 * dt)).collect();
        let c3 = cov.add(&k2c.scale(cr(0.5 * dt)));
        let (k3m, k3c) = s.deterministic_drift(&m3, &c3);
        let m4: CVec = (0..n).map(|i| mean[i] + k3m[i] * cr(dt)).collect();
        let c4 = cov.add(&k3c.scale(cr(dt)));
        let (k4m, k4c) = s.deterministic_drift(&m4, &c4);
        for i in 0..n {
            mean[i] += (k1m[i] + cr(2.0) * (k2m[i] + k3m[i]) + k4m[i]) * cr(dt / 6.0);
        }
        let dc = k1c.add(&k2c.scale(cr(2.0))).add(&k3c.scale(cr(2.0))).add(&k4c).scale(cr(dt / 6.0));
        cov = cov.add(&dc);
        t += dt;
        if step % 50 == 49 {
            last_change = k1m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(k1c.max_abs());
            if last_change < 1e-12 {
                return Ok(CumulantState { t, mean, cov });
            }
        }
        if !mean[0].re.is_finite() {
            return Err(CoreError::TrajectoryDiverged { step });
        }
    }
    if last_change < 1e-9 {
        Ok(CumulantState { t, mean, cov })
    } else {
        Err(CoreError::NonConvergence { residual: last_change, iterations: steps })
    }
}

/// Deterministic per-trajectory seed stream.
pub fn derive_seed(master: u64, label_index: usize, trajectory: usize) -> u64 {
    splitmix64(
        splitmix64(master ^ 0x243f_6a88_85a3_08d3)
            ^ ((label_index as u64) << 40)
            ^ trajectory as u64,
    )
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Ensemble controls for feature generation.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub dt: f64,
    pub master_seed: u64,
    pub window: f64,
    /// Filter start; `None` uses ten relaxation times of the slowest chain
    /// eigenvalue.
    pub start: Option<f64>,
}

/// Slowest relaxation time of the chain at its working point.
pub fn relaxation_time(sys: &LinearizedSystem) -> Result<f64> {
    let exp = crate::nvk::solve_expansion_point(sys)?;
    let j = crate::nvk::full_jacobian_scaled(sys, &exp)?;
    let gamma = sys.kerr_reference_rate();
    let ev = j.eigenvalues()?;
    let slowest = ev.iter().map(|z| -z.re).fold(f64::INFINITY, f64::min);
    if slowest <= 0.0 {
        return Err(CoreError::Numerical("chain is not relaxing; no settle time exists".into()));
    }
    Ok(1.0 / (slowest * gamma))
}

/// Runs `n_traj` independently seeded trajectories per label in parallel and
/// returns the filtered quadrature features. Deterministic for a fixed
/// master seed, independent of the worker count.
pub fn ensemble_run(
    spec: &ChainSpec,
    labels: &[&str],
    cfg: &EnsembleConfig,
) -> Result<FeatureSet> {
    let mut systems = Vec::new();
    for label in labels {
        systems.push(spec.build(label)?);
    }
    let start = match cfg.start {
        Some(s) => s,
        None => {
            let mut s: f64 = 0.0;
            for sys in &systems {
                s = s.max(10.0 * relaxation_time(sys)?);
            }
            s
        }
    };
    let jobs: Vec<(usize, usize)> = (0..labels.len())
        .flat_map(|li| (0..cfg.n_traj).map(move |t| (li, t)))
        .collect();
    let results: Vec<Result<(usize, usize, Vec<f64>)>> = jobs
        .into_par_iter()
        .map(|(li, t)| {
            let seed = derive_seed(cfg.master_seed, li, t);
            let vals = filtered_features(&systems[li], cfg.dt, seed, cfg.window, start)?;
            Ok((li, t, vals))
        })
        .collect();
    let mut vectors = Vec::with_capacity(labels.len() * cfg.n_traj);
    for r in results {
        let (li, t, values) = r?;
        vectors.push(FeatureVector { label: labels[li].to_string(), shot: t, values });
    }
    vectors.sort_by(|a, b| (a.label.clone(), a.shot).cmp(&(b.label.clone(), b.shot)));
    let n_modes = spec.n_kerr();
    Ok(FeatureSet {
        names: FeatureSet::quadrature_names(n_modes),
        window: cfg.window,
        start,
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, I};

    fn driven_kerr(lambda: f64, drive: f64, delta: f64) -> LinearizedSystem {
        // gamma = 1: monitored 2/3, unmonitored 1/3.
        LinearizedSystem::driven_kerr(delta, lambda, 2.0 / 3.0, 1.0 / 3.0, drive, 0.0)
    }

    /// Direct transcription of the closed single-mode truncated equations,
    /// written independently of the production drift for a term-by-term
    /// check:
    ///   d<b>    = (i d - g/2)<b> + i L <b^+><b>^2 - i eta
    ///             + i L (C_bb <b^+> + 2 C_b+b <b>)
    ///   dC_b+b  = -g C_b+b - i L (C_bb <b^+>^2 - C_bb^* <b>^2)
    ///   dC_bb   = (2 i d - g + i L (1 + 4|<b>|^2 + 6 C_b+b)) C_bb
    ///             + i L <b>^2 (1 + 2 C_b+b)
    fn single_mode_reference(
        lambda: f64,
        drive: f64,
        delta: f64,
        gamma: f64,
        b: C64,
        cbb: C64,
        cbdb: C64,
    ) -> (C64, C64, C64) {
        let il = I * cr(lambda);
        let db = c(-0.5 * gamma, delta) * b + il * b.conj() * b * b - I * cr(drive)
            + il * (cbb * b.conj() + cr(2.0) * cbdb * b);
        let dcbdb = cr(-gamma) * cbdb - il * (cbb * b.conj() * b.conj() - cbb.conj() * b * b);
        let dcbb = (c(-gamma, 2.0 * delta)
            + il * (cr(1.0) + cr(4.0) * b * b.conj() + cr(6.0) * cbdb))
            * cbb
            + il * b * b * (cr(1.0) + cr(2.0) * cbdb);
        (db, dcbdb, dcbb)
    }

    #[test]
    fn drift_reduces_to_single_mode_equations() {
        let (lambda, drive, delta) = (0.04, 0.7, -0.9);
        let sys = driven_kerr(lambda, drive, delta);
        let steom = SteomSystem::new(&sys);
        // Random but conjugate-consistent state.
        let b = c(0.6, -1.1);
        let cbb = c(0.21, 0.34);
        let cbdb = cr(0.17);
        let mean = vec![b, b.conj()];
        let mut cov = CMat::zeros(2, 2);
        cov[(0, 0)] = cbb;
        cov[(0, 1)] = cbdb;
        cov[(1, 0)] = cbdb;
        cov[(1, 1)] = cbb.conj();
        let (dm, dc) = steom.deterministic_drift(&mean, &cov);
        let (db, dcbdb, dcbb) = single_mode_reference(lambda, drive, delta, 1.0, b, cbb, cbdb);
        assert!((dm[0] - db).norm() < 1e-14, "{:?} vs {db:?}", dm[0]);
        assert!((dm[1] - db.conj()).norm() < 1e-14);
        assert!((dc[(0, 0)] - dcbb).norm() < 1e-14, "{:?} vs {dcbb:?}", dc[(0, 0)]);
        assert!((dc[(0, 1)] - dcbdb).norm() < 1e-14);
        assert!((dc[(1, 1)] - dcbb.conj()).norm() < 1e-14);
    }

    #[test]
    fn undriven_linear_mode_decays_at_half_and_full_rate() {
        let sys = driven_kerr(0.0, 0.0, 0.0);
        let steom = SteomSystem::new(&sys);
        let mean = vec![cr(2.0), cr(2.0)];
        let mut cov = CMat::zeros(2, 2);
        cov[(0, 1)] = cr(0.5);
        cov[(1, 0)] = cr(0.5);
        let (dm, dc) = steom.deterministic_drift(&mean, &cov);
        assert!((dm[0] - cr(-1.0)).norm() < 1e-15);
        assert!((dc[(0, 1)] - cr(-0.5)).norm() < 1e-15);
    }

    #[test]
    fn measurement_terms_match_transcription() {
        // Kick: sqrt(g/2) [(C_ob + C_b+o) dWI + i (C_b+o - C_ob) dWQ];
        // backaction: -g [C_o1b C_b+o2 + C_b+o1 C_o2b].
        let sys = driven_kerr(0.02, 0.4, -0.5);
        let steom = SteomSystem::new(&sys);
        let cbb = c(0.3, -0.2);
        let cbdb = cr(0.4);
        let mut cov = CMat::zeros(2, 2);
        cov[(0, 0)] = cbb;
        cov[(0, 1)] = cbdb;
        cov[(1, 0)] = cbdb;
        cov[(1, 1)] = cbb.conj();
        let (dwi, dwq) = (0.013, -0.021);
        let kick = steom.measurement_kick(&cov, &[(dwi, dwq)]);
        let pref = (0.5 * sys.monitor_rate).sqrt();
        let expect_b = cr(pref)
            * ((cbb + cbdb) * cr(dwi) + I * (cbdb - cbb) * cr(dwq));
        assert!((kick[0] - expect_b).norm() < 1e-15);
        assert!((kick[1] - expect_b.conj()).norm() < 1e-15);
        let ba = steom.measurement_backaction(&cov);
        let g = sys.monitor_rate;
        let expect_bb = -cr(g) * (cbb * cbdb + cbdb * cbb);
        let expect_bdb = -cr(g) * (cbdb * cbdb + cbb * cbb.conj());
        assert!((ba[(0, 0)] - expect_bb).norm() < 1e-14);
        assert!((ba[(0, 1)] - expect_bdb).norm() < 1e-14);
    }

    #[test]
    fn variance_backaction_strictly_decreases_occupation() {
        let sys = driven_kerr(0.0, 0.0, 0.0);
        let steom = SteomSystem::new(&sys);
        let mut cov = CMat::zeros(2, 2);
        cov[(0, 1)] = cr(0.8);
        cov[(1, 0)] = cr(0.8);
        let ba = steom.measurement_backaction(&cov);
        assert!(ba[(0, 1)].re < 0.0);
        assert!((ba[(0, 1)] - cr(-sys.monitor_rate * 0.64)).norm() < 1e-14);
    }

    #[test]
    fn zero_covariance_means_pure_wiener_records() {
        let sys = driven_kerr(0.0, 0.0, 0.0);
        let mut stepper = Stepper::new(&sys, 1e-3, 42);
        let mut sum_sq = 0.0;
        let n = 20_000;
        for _ in 0..n {
            let recs = stepper.step().unwrap();
            // No drive, no covariance: the kick is zero and the record is the
            // bare Wiener increment.
            assert!(stepper.mean[0].norm() < 1e-12);
            sum_sq += recs[0].0 * recs[0].0;
        }
        let var = sum_sq / n as f64;
        assert!((var - 1e-3).abs() < 4.0 * 1e-3 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn identical_seeds_reproduce_bit_exactly() {
        let spec = crate::nvk::tests::single_readout_chain(10.0, 0.0055, -0.67);
        let sys = spec.build("l1").unwrap();
        let cfg = SdeConfig { dt: 1e-3, t_total: 2.0, seed: 97, store_stride: 0 };
        let t1 = integrate_trajectory(&sys, &cfg).unwrap();
        let t2 = integrate_trajectory(&sys, &cfg).unwrap();
        assert_eq!(t1.record_i, t2.record_i);
        assert_eq!(t1.record_q, t2.record_q);
        let s1 = t1.states.last().unwrap();
        let s2 = t2.states.last().unwrap();
        assert_eq!(s1.mean, s2.mean);
        assert!(s1.cov.sub(&s2.cov).norm_fro() == 0.0);
    }

    #[test]
    fn linear_chain_covariance_is_seed_independent() {
        let spec = crate::nvk::tests::single_readout_chain(10.0, 0.0, -0.67);
        let sys = spec.build("l1").unwrap();
        let mk = |seed| {
            let cfg = SdeConfig { dt: 1e-3, t_total: 3.0, seed, store_stride: 0 };
            integrate_trajectory(&sys, &cfg).unwrap()
        };
        let a = mk(1);
        let b = mk(2);
        let ca = &a.states.last().unwrap().cov;
        let cb = &b.states.last().unwrap().cov;
        // Exactly equal: the covariance flow of a linear chain does not see
        // the noise realization.
        assert!(ca.sub(cb).norm_fro() == 0.0);
        // Means do differ between seeds.
        let ma = &a.states.last().unwrap().mean;
        let mb = &b.states.last().unwrap().mean;
        assert!(ma.iter().zip(mb).any(|(x, y)| (x - y).norm() > 1e-8));
    }

    #[test]
    fn nonlinear_chain_covariance_is_stochastic() {
        let spec = crate::nvk::tests::single_readout_chain(10.0, 0.0055, -0.67);
        let sys = spec.build("l1").unwrap();
        let mk = |seed| {
            let cfg = SdeConfig { dt: 1e-3, t_total: 30.0, seed, store_stride: 0 };
            integrate_trajectory(&sys, &cfg).unwrap()
        };
        let ca = mk(1).states.last().unwrap().cov.clone();
        let cb = mk(2).states.last().unwrap().cov.clone();
        assert!(ca.sub(&cb).norm_fro() > 1e-9);
    }

    #[test]
    fn unmonitored_source_marginals_are_seed_independent() {
        // Without the circulator hop nothing conditions the source sector;
        // keep the total source loss fixed when removing the hop.
        let mut spec = crate::nvk::tests::single_readout_chain(10.0, 0.0055, -0.67);
        spec.source.hop = vec![0.0, 0.0];
        spec.source.loss = vec![1.0, 1.0];
        let sys = spec.build("l1").unwrap();
        let mk = |seed| {
            let cfg = SdeConfig { dt: 1e-3, t_total: 5.0, seed, store_stride: 0 };
            integrate_trajectory(&sys, &cfg).unwrap()
        };
        let a = mk(5);
        let b = mk(9);
        let sa = a.states.last().unwrap();
        let sb = b.states.last().unwrap();
        for i in 0..4 {
            assert_eq!(sa.mean[i], sb.mean[i]);
            for j in 0..4 {
                assert_eq!(sa.cov[(i, j)], sb.cov[(i, j)]);
            }
        }
    }

    #[test]
    fn conditional_mean_averages_to_unconditional() {
        // Law of total expectation, checked at modest statistics.
        let spec = crate::nvk::tests::single_readout_chain(6.0, 0.0055, -0.67);
        let sys = spec.build("l1").unwrap();
        let t_end = 8.0;
        let det = {
            let s = SteomSystem::new(&sys);
            let n = s.n;
            let mut mean = vec![C64::ZERO; n];
            let mut cov = CMat::zeros(n, n);
            let dt = 1e-3;
            for _ in 0..(t_end / dt) as usize {
                let (dm, dc) = s.deterministic_drift(&mean, &cov);
                for i in 0..n {
                    mean[i] += dm[i] * cr(dt);
                }
                cov = cov.add(&dc.scale(cr(dt)));
            }
            mean
        };
        let n_seeds = 160;
        let mut acc = vec![C64::ZERO; 6];
        let mut acc2 = vec![0.0f64; 6];
        for seed in 0..n_seeds {
            let cfg = SdeConfig { dt: 1e-3, t_total: t_end, seed: derive_seed(7, 0, seed), store_stride: 0 };
            let tr = integrate_trajectory(&sys, &cfg).unwrap();
            let m = &tr.states.last().unwrap().mean;
            for i in 0..6 {
                acc[i] += m[i];
                acc2[i] += m[i].norm_sqr();
            }
        }
        for i in 0..6 {
            let mean_i = acc[i] / cr(n_seeds as f64);
            let var_i = (acc2[i] / n_seeds as f64 - mean_i.norm_sqr()).max(0.0);
            let se = (var_i / n_seeds as f64).sqrt();
            let dev = (mean_i - det[i]).norm();
            assert!(dev < 4.0 * se + 1e-3, "component {i}: dev {dev} vs se {se}");
        }
    }

    #[test]
    fn seed_derivation_is_stable_and_spread() {
        let a = derive_seed(1, 0, 0);
        let b = derive_seed(1, 0, 1);
        let c = derive_seed(1, 1, 0);
        let d = derive_seed(2, 0, 0);
        assert_eq!(a, derive_seed(1, 0, 0));
        assert!(a != b && a != c && a != d && b != c);
    }

    #[test]
    fn filtered_features_match_trajectory_boxcar() {
        let spec = crate::nvk::tests::single_readout_chain(10.0, 0.0055, -0.67);
        let sys = spec.build("l1").unwrap();
        let (dt, window, start) = (1e-3, 3.0, 1.0);
        let seed = 1234;
        let stream = filtered_features(&sys, dt, seed, window, start).unwrap();
        let cfg = SdeConfig { dt, t_total: start + window, seed, store_stride: 0 };
        let traj = integrate_trajectory(&sys, &cfg).unwrap();
        let boxed = crate::readout::boxcar_filter(&traj, window, start).unwrap();
        for (a, b) in stream.iter().zip(&boxed) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn deterministic_steady_state_matches_weak_limit() {
        // At zero Kerr strength the deterministic cumulant steady state is
        // the exact Gaussian chain solution.
        let spec = crate::nvk::tests::single_readout_chain(10.0, 0.0, -0.67);
        let sys = spec.build("l1").unwrap();
        let st = deterministic_steady_state(&sys, 2e-3, 200.0).unwrap();
        let sol = crate::nvk::solve(&sys).unwrap();
        for i in 0..4 {
            assert!((st.mean[i] - sol.expansion.mean_a[i]).norm() < 1e-6);
        }
        assert!(st.cov.sub(&sol.cov).norm_fro() < 1e-6);
    }
}
