//! Canonical benchmark tasks, linear-amplifier baselines, drive and noise
//! calibration, and parameter sweeps (isogain contours, the optimal-noise
//! trajectory, constant-separation curves).
//!
//! Every task is a binary discrimination problem between two source states
//! whose monitored-mode steady means coincide, so only the quantum
//! fluctuation statistics distinguish them. The defining equal-means property
//! is verified numerically at construction.

use rayon::prelude::*;

use crate::chain::{
    ChainSpec, KerrHopTerm, LabelSpec, PpTerm, ProcessorSection, PsTerm, ReadoutSection,
    SourceSection, SqueezeTerm, TwoModeSqueezeTerm,
};
use crate::error::{CoreError, Result};
use crate::metrics::{
    discrimination_report, log_negativity, qcb_gaussian, quad_state_from_cumulants,
    DiscriminationReport,
};
use crate::nvk::{self, FilterMode};
use crate::readout::GaussianSummary;
use crate::SIGMA_VAC_SQ;
use std::f64::consts::FRAC_PI_2;

/// The four canonical discrimination tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskId {
    /// Single-mode squeezed vs two-mode squeezed source, one monitored mode.
    I,
    /// Two-mode squeezed states of opposite squeezing phase, both modes
    /// monitored by a coupled Kerr pair.
    II,
    /// Thermal states of different temperature, one monitored mode.
    III,
    /// Single-mode squeezed states of opposite squeezing phase, one mode.
    IV,
}

impl std::fmt::Display for TaskId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TaskId::I => "I",
            TaskId::II => "II",
            TaskId::III => "III",
            TaskId::IV => "IV",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for TaskId {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(TaskId::I),
            "II" | "2" => Ok(TaskId::II),
            "III" | "3" => Ok(TaskId::III),
            "IV" | "4" => Ok(TaskId::IV),
            other => Err(CoreError::Config(format!("unknown task '{other}'"))),
        }
    }
}

/// A benchmark definition: the chain, its label pair, and the common
/// monitored-mode amplitude the drives are calibrated to.
#[derive(Debug, Clone)]
pub struct TaskDef {
    pub id: TaskId,
    pub spec: ChainSpec,
    pub labels: (String, String),
    pub amplitude: f64,
    /// Drive ratios eta_m / amplitude per label, kept for recalibration.
    drive_ratios: Vec<Vec<f64>>,
}

impl TaskDef {
    /// Rescales all drives to a new common amplitude and re-verifies the
    /// equal-means invariant.
    pub fn with_amplitude(&self, amplitude: f64) -> Result<TaskDef> {
        let mut spec = self.spec.clone();
        for (lab, ratios) in spec.labels.iter_mut().zip(&self.drive_ratios) {
            lab.drive = ratios.iter().map(|r| r * amplitude).collect();
        }
        let def = TaskDef {
            id: self.id,
            spec,
            labels: self.labels.clone(),
            amplitude,
            drive_ratios: self.drive_ratios.clone(),
        };
        def.verify_equal_means(1e-8)?;
        Ok(def)
    }

    /// Largest deviation between the two labels' monitored-mode steady means;
    /// errors above the tolerance.
    pub fn verify_equal_means(&self, tol: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let means: Vec<_> = [&self.labels.0, &self.labels.1]
            .iter()
            .map(|l| self.spec.build(l)?.source_steady_mean())
            .collect::<Result<Vec<_>>>()?;
        for (m, &hop) in self.spec.source.hop.iter().enumerate() {
            if hop > 0.0 {
                let d = (means[0][2 * m] - means[1][2 * m]).norm();
                worst = worst.max(d);
            }
        }
        let scale = self.amplitude.abs().max(1.0);
        if worst > tol * scale {
            return Err(CoreError::Numerical(format!(
                "task {}: monitored means differ by {worst:.3e}",
                self.id
            )));
        }
        Ok(worst)
    }
}

fn readout(window: f64) -> ReadoutSection {
    ReadoutSection { classical_noise: 0.0, window, settle: None }
}

/// The four benchmark tasks at their reference operating points, drives in
/// units of the common total source loss.
pub fn task_library() -> Vec<TaskDef> {
    let amp = 10.0;
    let task1 = TaskDef {
        id: TaskId::I,
        labels: ("l1".into(), "l2".into()),
        amplitude: amp,
        drive_ratios: vec![vec![0.20, 0.0], vec![0.32, 0.0]],
        spec: ChainSpec {
            schema: 1,
            rates_unit: "kappa".into(),
            source: SourceSection { loss: vec![0.5, 1.0], hop: vec![0.5, 0.0] },
            processor: ProcessorSection {
                detuning: vec![-0.67],
                kerr: 5.5e-3,
                monitor_rate: 0.5,
                hop: vec![],
                pp: vec![],
                ps: vec![],
            },
            readout: readout(500.0),
            labels: vec![
                LabelSpec {
                    name: "l1".into(),
                    drive: vec![0.20 * amp, 0.0],
                    squeeze: vec![SqueezeTerm { mode: 0, g: 0.3, phase: FRAC_PI_2 }],
                    two_mode_squeeze: vec![],
                    thermal: vec![],
                },
                LabelSpec {
                    name: "l2".into(),
                    drive: vec![0.32 * amp, 0.0],
                    squeeze: vec![],
                    two_mode_squeeze: vec![TwoModeSqueezeTerm { a: 0, b: 1, g: 0.3, phase: 0.0 }],
                    thermal: vec![],
                },
            ],
        },
    };
    let amp2 = 80.0;
    let task2 = TaskDef {
        id: TaskId::II,
        labels: ("l3".into(), "l4".into()),
        amplitude: amp2,
        drive_ratios: vec![vec![0.8, 0.8], vec![0.2, 0.2]],
        spec: ChainSpec {
            schema: 1,
            rates_unit: "kappa".into(),
            source: SourceSection { loss: vec![0.5, 0.5], hop: vec![0.5, 0.5] },
            processor: ProcessorSection {
                detuning: vec![1.15, -2.30],
                kerr: 7.0e-3,
                monitor_rate: 4.0,
                hop: vec![KerrHopTerm { a: 0, b: 1, g: 1.0 }],
                pp: vec![],
                ps: vec![],
            },
            readout: readout(500.0 / 4.5),
            labels: vec![
                LabelSpec {
                    name: "l3".into(),
                    drive: vec![0.8 * amp2, 0.8 * amp2],
                    squeeze: vec![],
                    two_mode_squeeze: vec![TwoModeSqueezeTerm {
                        a: 0,
                        b: 1,
                        g: 0.3,
                        phase: -FRAC_PI_2,
                    }],
                    thermal: vec![],
                },
                LabelSpec {
                    name: "l4".into(),
                    drive: vec![0.2 * amp2, 0.2 * amp2],
                    squeeze: vec![],
                    two_mode_squeeze: vec![TwoModeSqueezeTerm {
                        a: 0,
                        b: 1,
                        g: 0.3,
                        phase: FRAC_PI_2,
                    }],
                    thermal: vec![],
                },
            ],
        },
    };
    let task3 = TaskDef {
        id: TaskId::III,
        labels: ("l5".into(), "l6".into()),
        amplitude: amp,
        drive_ratios: vec![vec![0.5], vec![0.5]],
        spec: ChainSpec {
            schema: 1,
            rates_unit: "kappa".into(),
            source: SourceSection { loss: vec![0.5], hop: vec![0.5] },
            processor: ProcessorSection {
                detuning: vec![-0.67],
                kerr: 5.5e-3,
                monitor_rate: 0.5,
                hop: vec![],
                pp: vec![],
                ps: vec![],
            },
            readout: readout(500.0),
            labels: vec![
                LabelSpec {
                    name: "l5".into(),
                    drive: vec![0.5 * amp],
                    squeeze: vec![],
                    two_mode_squeeze: vec![],
                    thermal: vec![0.1],
                },
                LabelSpec {
                    name: "l6".into(),
                    drive: vec![0.5 * amp],
                    squeeze: vec![],
                    two_mode_squeeze: vec![],
                    thermal: vec![0.8],
                },
            ],
        },
    };
    let amp4 = 3.5;
    let task4 = TaskDef {
        id: TaskId::IV,
        labels: ("l7".into(), "l8".into()),
        amplitude: amp4,
        drive_ratios: vec![vec![0.20], vec![0.80]],
        spec: ChainSpec {
            schema: 1,
            rates_unit: "kappa".into(),
            source: SourceSection { loss: vec![0.5], hop: vec![0.5] },
            processor: ProcessorSection {
                // Total Kerr damping 1.5: detuning and Kerr chosen at -2/3
                // and 0.067 of it.
                detuning: vec![-1.0],
                kerr: 0.1005,
                monitor_rate: 1.0,
                hop: vec![],
                pp: vec![],
                ps: vec![],
            },
            readout: readout(500.0 / 1.5),
            labels: vec![
                LabelSpec {
                    name: "l7".into(),
                    drive: vec![0.20 * amp4],
                    squeeze: vec![SqueezeTerm { mode: 0, g: 0.3, phase: FRAC_PI_2 }],
                    two_mode_squeeze: vec![],
                    thermal: vec![],
                },
                LabelSpec {
                    name: "l8".into(),
                    drive: vec![0.80 * amp4],
                    squeeze: vec![SqueezeTerm { mode: 0, g: 0.3, phase: -FRAC_PI_2 }],
                    two_mode_squeeze: vec![],
                    thermal: vec![],
                },
            ],
        },
    };
    let tasks = vec![task1, task2, task3, task4];
    for t in &tasks {
        t.verify_equal_means(1e-8).expect("task library violates the equal-means invariant");
    }
    tasks
}

pub fn task(id: TaskId) -> TaskDef {
    task_library().into_iter().find(|t| t.id == id).unwrap()
}

/// Which linear quantum amplifier replaces the Kerr processor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmplifierKind {
    /// Two-mode (non-degenerate) amplifier: signal mode plus idler.
    PhasePreserving,
    /// Degenerate single-mode amplifier with a choice of amplified phase.
    PhaseSensitive { phase: f64 },
}

/// Replaces the task's nonlinear processor with a linear amplifier of
/// bilinear strength `g`, keeping couplings, losses and readout identical.
pub fn amplifier_baseline(task: &TaskDef, kind: AmplifierKind, g: f64) -> Result<ChainSpec> {
    let mut spec = task.spec.clone();
    spec.processor.kerr = 0.0;
    spec.processor.hop.clear();
    spec.processor.pp.clear();
    spec.processor.ps.clear();
    match kind {
        AmplifierKind::PhasePreserving => {
            if spec.processor.detuning.len() == 1 {
                // Add the idler mode at matching damping; it has no source
                // partner, so its total loss is the monitor rate alone.
                spec.processor.detuning.push(0.0);
            }
            spec.processor.detuning.iter_mut().for_each(|d| *d = 0.0);
            spec.processor.pp.push(PpTerm { a: 0, b: 1, g });
        }
        AmplifierKind::PhaseSensitive { phase } => {
            spec.processor.detuning.iter_mut().for_each(|d| *d = 0.0);
            spec.processor.ps.push(PsTerm { mode: 0, g, phase });
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Steady-state reflection power gain of the two-mode amplifier,
/// `sqrt(G) = (gamma_d^2 + 4 g^2) / (gamma_d^2 - 4 g^2)`.
pub fn pp_gain(g: f64, gamma_d: f64) -> f64 {
    let num = gamma_d * gamma_d + 4.0 * g * g;
    let den = gamma_d * gamma_d - 4.0 * g * g;
    (num / den).powi(2)
}

/// Inverse of [`pp_gain`]: the bilinear strength reaching a target power
/// gain.
pub fn pp_g_for_gain(gain: f64, gamma_d: f64) -> Result<f64> {
    if gain < 1.0 {
        return Err(CoreError::Config("amplifier gain must be at least one".into()));
    }
    let s = gain.sqrt();
    Ok(0.5 * gamma_d * ((s - 1.0) / (s + 1.0)).sqrt())
}

/// Input-referred added noise and quantum efficiency of a measurement chain
/// built on a two-mode amplifier of power gain `gain` with classical readout
/// noise `n_cl`.
#[derive(Debug, Clone, Copy)]
pub struct PpNoise {
    pub n_add: f64,
    pub efficiency: f64,
}

pub fn pp_noise_calibration(gain: f64, n_cl: f64) -> PpNoise {
    let n_add = |ncl: f64| SIGMA_VAC_SQ * (ncl / gain + (1.0 - 1.0 / gain));
    let quantum_only = n_add(0.0);
    let total = n_add(n_cl);
    PpNoise {
        n_add: total,
        efficiency: if total > 0.0 { quantum_only / total } else { 1.0 },
    }
}

/// Effective noise temperature of `n_cl` vacuum units of classical noise at
/// carrier angular frequency `omega` (rad/s), via n_cl = k_B T / (hbar omega).
pub fn effective_temperature(n_cl: f64, omega: f64) -> f64 {
    const HBAR: f64 = 1.054_571_817e-34;
    const KB: f64 = 1.380_649e-23;
    n_cl * HBAR * omega / KB
}

/// Full metric bundle for one label pair of a chain at one operating point.
#[derive(Debug, Clone)]
pub struct PairEvaluation {
    pub report: DiscriminationReport,
    pub summaries: (GaussianSummary, GaussianSummary),
    pub chi: f64,
    pub stable: bool,
    /// Output-field entanglement of the measured covariance (two-Kerr-mode
    /// chains only): the larger logarithmic negativity over the label pair.
    pub e_n: Option<f64>,
    /// Per-label logarithmic negativities.
    pub e_n_pair: Option<(f64, f64)>,
    /// Chernoff exponent of the reduced first-Kerr-mode states.
    pub zeta: Option<f64>,
    /// Chernoff exponent of the reduced first-source-mode states.
    pub zeta_qs: Option<f64>,
}

/// Solves both labels semi-analytically and assembles every metric: the
/// discrimination report of the filtered records, susceptibility at the
/// working point, output entanglement (K = 2) and Chernoff exponents of the
/// reduced internal states.
pub fn evaluate_pair(
    spec: &ChainSpec,
    labels: (&str, &str),
    window: f64,
    classical_noise: f64,
    mode: FilterMode,
) -> Result<PairEvaluation> {
    let sys_a = spec.build(labels.0)?;
    let sys_b = spec.build(labels.1)?;
    let sol_a = nvk::solve(&sys_a)?;
    let sol_b = nvk::solve(&sys_b)?;
    let sum_a = nvk::gaussian_summary(&sys_a, &sol_a, window, classical_noise, mode)?;
    let sum_b = nvk::gaussian_summary(&sys_b, &sol_b, window, classical_noise, mode)?;
    let report =
        discrimination_report((labels.0.to_string(), labels.1.to_string()), &sum_a, &sum_b, None)?;
    let chi = nvk::susceptibility(&sys_a, &sol_a.expansion)?;
    let stable = sol_a.expansion.stable && sol_b.expansion.stable;
    let (e_n, e_n_pair) = if spec.n_kerr() == 2 {
        let ea = log_negativity(&sum_a.cov)?;
        let eb = log_negativity(&sum_b.cov)?;
        (Some(ea.max(eb)), Some((ea, eb)))
    } else {
        (None, None)
    };
    let reduced = |sys: &crate::chain::LinearizedSystem, sol: &nvk::NvkSolution| {
        let sd = sys.layout.source_dim();
        let mean = sol.mean_b_total();
        let c_loc = sol.cov.block(sd..sd + 2, sd..sd + 2);
        quad_state_from_cumulants(&mean[0..2], &c_loc, true)
    };
    let zeta = qcb_gaussian(&reduced(&sys_a, &sol_a), &reduced(&sys_b, &sol_b)).ok();
    let qs_state = |sol: &nvk::NvkSolution| {
        let c_loc = sol.cov.block(0..2, 0..2);
        quad_state_from_cumulants(&sol.expansion.mean_a[0..2], &c_loc, true)
    };
    let zeta_qs = qcb_gaussian(&qs_state(&sol_a), &qs_state(&sol_b)).ok();
    Ok(PairEvaluation { report, summaries: (sum_a, sum_b), chi, stable, e_n, e_n_pair, zeta, zeta_qs })
}

/// One row of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub coords: Vec<(String, f64)>,
    pub chi: f64,
    pub dmu_norm: f64,
    pub sigma2_dmu: f64,
    pub sigma2_min: f64,
    pub sigma2_max: f64,
    pub d_f: f64,
    pub c_max: f64,
    pub e_n: Option<f64>,
    pub zeta: Option<f64>,
    pub zeta_qs: Option<f64>,
    pub stable: bool,
}

impl SweepRow {
    pub fn csv_header(coords: &[String]) -> String {
        let mut cols: Vec<String> = coords.to_vec();
        cols.extend(
            [
                "chi",
                "dmu_norm",
                "sigma2_dmu",
                "sigma2_min",
                "sigma2_max",
                "d_f",
                "c_max",
                "e_n",
                "zeta",
                "zeta_qs",
                "stable",
            ]
            .map(String::from),
        );
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols: Vec<String> = self.coords.iter().map(|(_, v)| format!("{v:.12e}")).collect();
        for v in [self.chi, self.dmu_norm, self.sigma2_dmu, self.sigma2_min, self.sigma2_max, self.d_f, self.c_max]
        {
            cols.push(format!("{v:.12e}"));
        }
        for v in [self.e_n, self.zeta, self.zeta_qs] {
            cols.push(v.map(|x| format!("{x:.12e}")).unwrap_or_else(|| "nan".into()));
        }
        cols.push(if self.stable { "1".into() } else { "0".into() });
        cols.join(",")
    }
}

/// Sweepable chain parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Kerr,
    Delta1,
    Coupling,
    ClassicalNoise,
    Window,
}

impl std::str::FromStr for SweepParam {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kerr" | "lambda" => Ok(SweepParam::Kerr),
            "delta1" | "detuning" => Ok(SweepParam::Delta1),
            "coupling" | "g12" => Ok(SweepParam::Coupling),
            "ncl" | "classical-noise" => Ok(SweepParam::ClassicalNoise),
            "window" | "filter-t" => Ok(SweepParam::Window),
            other => Err(CoreError::Config(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Kerr => "kerr",
            SweepParam::Delta1 => "delta1",
            SweepParam::Coupling => "g12",
            SweepParam::ClassicalNoise => "ncl",
            SweepParam::Window => "window",
        }
    }

    pub fn apply(&self, spec: &ChainSpec, v: f64) -> ChainSpec {
        let mut s = spec.clone();
        match self {
            SweepParam::Kerr => s.processor.kerr = v,
            SweepParam::Delta1 => s.processor.detuning[0] = v,
            SweepParam::Coupling => {
                if let Some(h) = s.processor.hop.first_mut() {
                    h.g = v;
                } else if s.processor.detuning.len() >= 2 {
                    s.processor.hop.push(KerrHopTerm { a: 0, b: 1, g: v });
                }
            }
            SweepParam::ClassicalNoise => s.readout.classical_noise = v,
            SweepParam::Window => s.readout.window = v,
        }
        s
    }
}

/// Evaluates the full metric row at every sweep value, in parallel.
pub fn sweep(
    task: &TaskDef,
    param: SweepParam,
    values: &[f64],
    mode: FilterMode,
) -> Result<Vec<SweepRow>> {
    let rows: Vec<Result<SweepRow>> = values
        .par_iter()
        .map(|&v| {
            let spec = param.apply(&task.spec, v);
            let window =
                if param == SweepParam::Window { v } else { spec.readout.window };
            let ncl = spec.readout.classical_noise;
            let ev = evaluate_pair(
                &spec,
                (&task.labels.0, &task.labels.1),
                window,
                ncl,
                mode,
            )?;
            Ok(SweepRow {
                coords: vec![(param.name().to_string(), v)],
                chi: ev.chi,
                dmu_norm: ev.report.delta_mu_norm,
                sigma2_dmu: ev.report.sigma2_dmu[0],
                sigma2_min: ev.report.sigma2_min[0],
                sigma2_max: ev.report.sigma2_max[0],
                d_f: ev.report.d_f,
                c_max: ev.report.c_max,
                e_n: ev.e_n,
                zeta: ev.zeta,
                zeta_qs: ev.zeta_qs,
                stable: ev.stable,
            })
        })
        .collect();
    rows.into_iter().collect()
}

/// Bisection for `f(x) = target` on a bracketing interval; `f` must be
/// continuous on it.
fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64, target: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo)? - target;
    let fhi = f(hi)? - target;
    if flo * fhi > 0.0 {
        return Err(CoreError::ContourNotFound { target });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)? - target;
        if fm.abs() < tol || hi - lo < 1e-12 * (1.0 + mid.abs()) {
            return Ok(mid);
        }
        if flo * fm <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Finds every detuning in the range where the susceptibility crosses
/// `target` at a stable working point, by grid scan plus bisection;
/// `chain_at` maps a detuning to the chain to evaluate. The susceptibility is
/// single-peaked along such cuts, so the contour is crossed at most twice.
pub fn chi_contour_deltas<F>(
    chain_at: F,
    label: &str,
    delta_range: (f64, f64),
    target: f64,
) -> Result<Vec<f64>>
where
    F: Fn(f64) -> ChainSpec,
{
    let chi_of = |d: f64| -> Result<f64> {
        let spec = chain_at(d);
        let sys = spec.build(label)?;
        let exp = nvk::solve_expansion_point(&sys)?;
        if !exp.stable {
            return Ok(f64::INFINITY);
        }
        nvk::susceptibility(&sys, &exp)
    };
    let n_scan = 48;
    let (d0, d1) = delta_range;
    let mut out = Vec::new();
    let mut prev = chi_of(d0)?;
    let mut prev_d = d0;
    for i in 1..=n_scan {
        let d = d0 + (d1 - d0) * i as f64 / n_scan as f64;
        let cur = chi_of(d)?;
        if prev.is_finite() && cur.is_finite() && (prev - target) * (cur - target) <= 0.0 {
            if let Ok(root) = bisect(&chi_of, prev_d, d, target, 1e-6) {
                out.push(root);
            }
        }
        prev = cur;
        prev_d = d;
    }
    if out.is_empty() {
        return Err(CoreError::ContourNotFound { target });
    }
    Ok(out)
}

/// First contour crossing, for single-root uses.
pub fn chi_contour_delta<F>(chain_at: F, label: &str, delta_range: (f64, f64), target: f64) -> Result<f64>
where
    F: Fn(f64) -> ChainSpec,
{
    Ok(chi_contour_deltas(chain_at, label, delta_range, target)?[0])
}

/// One point of the isogain/optimal-noise trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub g12: f64,
    pub kerr: f64,
    pub delta1: f64,
    pub row: SweepRow,
}

/// For each coupling value: finds, on a Kerr-strength grid, the detuning
/// holding the susceptibility at `target_chi` (with the second detuning
/// slaved to -2 delta_1), then keeps the contour point of minimal projected
/// noise. The result is the optimal-noise trajectory with all metrics.
pub fn isogain_optimal_noise_sweep(
    task: &TaskDef,
    target_chi: f64,
    g12_values: &[f64],
    kerr_grid: &[f64],
    delta_range: (f64, f64),
    mode: FilterMode,
) -> Result<Vec<TrajectoryPoint>> {
    let points: Vec<Result<TrajectoryPoint>> = g12_values
        .par_iter()
        .map(|&g12| {
            let mut best: Option<TrajectoryPoint> = None;
            let mut grid: Vec<f64> = kerr_grid.to_vec();
            // Coarse pass over the provided grid, then three shrinking
            // refinement passes around the running optimum.
            for refine in 0..4 {
                if refine > 0 {
                    let (lo, hi) = match &best {
                        None => break,
                        Some(b) => {
                            let step = (kerr_grid[kerr_grid.len() - 1] - kerr_grid[0])
                                / kerr_grid.len().max(2) as f64
                                / (2.0f64).powi(refine - 1);
                            (b.kerr - step, b.kerr + step)
                        }
                    };
                    grid = (0..7).map(|i| lo + (hi - lo) * i as f64 / 6.0).collect();
                }
            for &kerr in &grid {
                let chain_at = |d1: f64| {
                    let mut s = task.spec.clone();
                    s.processor.kerr = kerr;
                    s.processor.detuning[0] = d1;
                    if s.processor.detuning.len() > 1 {
                        s.processor.detuning[1] = -2.0 * d1;
                    }
                    if let Some(h) = s.processor.hop.first_mut() {
                        h.g = g12;
                    }
                    s
                };
                let roots = match chi_contour_deltas(
                    &chain_at,
                    &task.labels.0,
                    delta_range,
                    target_chi,
                ) {
                    Ok(r) => r,
                    Err(CoreError::ContourNotFound { .. }) => continue,
                    Err(e) => return Err(e),
                };
                for d1 in roots {
                    let spec = chain_at(d1);
                    let ev = evaluate_pair(
                        &spec,
                        (&task.labels.0, &task.labels.1),
                        spec.readout.window,
                        spec.readout.classical_noise,
                        mode,
                    )?;
                    let row = SweepRow {
                        coords: vec![
                            ("g12".into(), g12),
                            ("kerr".into(), kerr),
                            ("delta1".into(), d1),
                        ],
                        chi: ev.chi,
                        dmu_norm: ev.report.delta_mu_norm,
                        sigma2_dmu: ev.report.sigma2_dmu[0],
                        sigma2_min: ev.report.sigma2_min[0],
                        sigma2_max: ev.report.sigma2_max[0],
                        d_f: ev.report.d_f,
                        c_max: ev.report.c_max,
                        e_n: ev.e_n,
                        zeta: ev.zeta,
                        zeta_qs: ev.zeta_qs,
                        stable: ev.stable,
                    };
                    let better = match &best {
                        None => true,
                        Some(b) => row.sigma2_dmu < b.row.sigma2_dmu,
                    };
                    if better {
                        best = Some(TrajectoryPoint { g12, kerr, delta1: d1, row });
                    }
                }
            }
            }
            best.ok_or(CoreError::ContourNotFound { target: target_chi })
        })
        .collect();
    points.into_iter().collect()
}

/// Traces a constant-separation curve of a single-Kerr task through the
/// (kerr, detuning) plane: for each Kerr strength, bisects the detuning so
/// the filtered mean separation stays at `target_dmu`, and reports the
/// projected noise along the curve.
pub fn constant_separation_curve(
    task: &TaskDef,
    target_dmu: f64,
    kerr_grid: &[f64],
    delta_range: (f64, f64),
    mode: FilterMode,
) -> Result<Vec<SweepRow>> {
    let rows: Vec<Result<Vec<SweepRow>>> = kerr_grid
        .par_iter()
        .map(|&kerr| {
            let dmu_of = |d1: f64| -> Result<f64> {
                let mut s = task.spec.clone();
                s.processor.kerr = kerr;
                s.processor.detuning[0] = d1;
                let ev = evaluate_pair(
                    &s,
                    (&task.labels.0, &task.labels.1),
                    s.readout.window,
                    s.readout.classical_noise,
                    mode,
                )?;
                if !ev.stable {
                    return Ok(f64::NAN);
                }
                Ok(ev.report.delta_mu_norm)
            };
            let crossings = bisect_scan(&dmu_of, delta_range, target_dmu);
            let mut found = Vec::new();
            for d1 in crossings {
                let mut s = task.spec.clone();
                s.processor.kerr = kerr;
                s.processor.detuning[0] = d1;
                let ev = evaluate_pair(
                    &s,
                    (&task.labels.0, &task.labels.1),
                    s.readout.window,
                    s.readout.classical_noise,
                    mode,
                )?;
                found.push(SweepRow {
                    coords: vec![("kerr".into(), kerr), ("delta1".into(), d1)],
                    chi: ev.chi,
                    dmu_norm: ev.report.delta_mu_norm,
                    sigma2_dmu: ev.report.sigma2_dmu[0],
                    sigma2_min: ev.report.sigma2_min[0],
                    sigma2_max: ev.report.sigma2_max[0],
                    d_f: ev.report.d_f,
                    c_max: ev.report.c_max,
                    e_n: ev.e_n,
                    zeta: ev.zeta,
                    zeta_qs: ev.zeta_qs,
                    stable: ev.stable,
                });
            }
            Ok(found)
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    if out.is_empty() {
        return Err(CoreError::ContourNotFound { target: target_dmu });
    }
    Ok(out)
}

/// Grid scan collecting every sign change of `f - target` (skipping NaN
/// segments), each refined by bisection.
fn bisect_scan<F: Fn(f64) -> Result<f64>>(f: &F, range: (f64, f64), target: f64) -> Vec<f64> {
    let n = 48;
    let (x0, x1) = range;
    let mut prev: Option<(f64, f64)> = None;
    let mut out = Vec::new();
    for i in 0..=n {
        let x = x0 + (x1 - x0) * i as f64 / n as f64;
        let v = match f(x) {
            Ok(v) if v.is_finite() => v,
            _ => {
                prev = None;
                continue;
            }
        };
        if let Some((px, pv)) = prev {
            if (pv - target) * (v - target) <= 0.0 {
                if let Ok(root) = bisect(f, px, x, target, 1e-9 * (1.0 + target.abs())) {
                    out.push(root);
                }
            }
        }
        prev = Some((x, v));
    }
    out
}
