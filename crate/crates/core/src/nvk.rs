//! Semi-analytic weak-nonlinearity solver for the monitored chain: the
//! nonlinear van Kampen expansion truncated at second-order cumulants.
//!
//! The pipeline is: (1) a nonlinear working point `(mean_a, bbar)` solving the
//! classical steady state of the chain, with continuation in the drive toward
//! the (possibly bistable) operating region; (2) the steady covariance from
//! the continuous Lyapunov equation driven by the linearized diffusion;
//! (3) a covariance-driven shift of the Kerr-mode means through the Hessian
//! of the nonlinearity; (4) closed-form means and covariances of the
//! boxcar-filtered heterodyne records.
//!
//! Internally everything Kerr-sector is expressed in scaled units: rates in
//! units of the common Kerr-mode damping `gamma`, working point
//! `bbar = sqrt(kerr/gamma) <b>`. The measured statistics only involve the
//! invariant combinations `gamma_h T` and `gamma_h / gamma`.

use num_complex::Complex64 as C64;

use crate::chain::{
    kerr_hessian_contract, kerr_jacobian, kerr_linearized_diffusion, LinearizedSystem,
};
use crate::error::{CoreError, Result};
use crate::linalg::{self, cr, CMat, CVec};
use crate::readout::GaussianSummary;
use crate::SIGMA_VAC_SQ;

/// Classical working point of the chain for one label.
#[derive(Debug, Clone)]
pub struct ExpansionPoint {
    /// Steady source means (physical units).
    pub mean_a: CVec,
    /// Steady Kerr-mode means (physical units).
    pub mean_b: CVec,
    /// Scaled Kerr-mode means sqrt(kerr/gamma) <b>; zero for a linear chain.
    pub bbar: CVec,
    /// Norm of the steady-state defect of the scaled fixed-point equations.
    pub residual: f64,
    /// True when every eigenvalue of the scaled Jacobian has negative real
    /// part.
    pub stable: bool,
    /// How this point was reached.
    pub branch: Branch,
}

/// Continuation history of a working point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Linear chain, closed-form solve.
    Linear,
    /// Newton continuation from the undriven (vacuum) fixed point; inside a
    /// classically bistable region this is the low-amplitude branch.
    ContinuationFromVacuum,
}

/// Filter-window treatment of the measured covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    /// O(T) result, valid for windows short against the chain relaxation.
    Short,
    /// Leading long-window term, independent of the window length.
    LongLeading,
    /// Long-window result including the O(1/T) correction.
    LongNext,
    /// Exact finite-window expression via the drift exponential.
    General,
}

/// Full weak-nonlinearity solution for one label.
#[derive(Debug, Clone)]
pub struct NvkSolution {
    pub label: String,
    pub expansion: ExpansionPoint,
    /// Steady normal-ordered covariance of all modes (dimensionless), in the
    /// fixed operator ordering.
    pub cov: CMat,
    /// Covariance-driven shift of the Kerr-mode means (physical units).
    pub shift_b: CVec,
    /// Set when the measured-covariance evaluation had to fall back to the
    /// Pade exponential (ill-conditioned eigenbasis).
    pub exp_fallback: bool,
}

/// Newton/continuation controls; the defaults match the solver contract.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub continuation_steps: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tolerance: 1e-12, max_iterations: 200, continuation_steps: 20 }
    }
}

/// Solves the classical steady state of the chain: the source sector is
/// linear and closed-form; the Kerr sector is a damped Newton iteration with
/// geometric continuation in the effective drive from zero to its full value.
pub fn solve_expansion_point(sys: &LinearizedSystem) -> Result<ExpansionPoint> {
    solve_expansion_point_with(sys, &NewtonOptions::default())
}

pub fn solve_expansion_point_with(
    sys: &LinearizedSystem,
    opts: &NewtonOptions,
) -> Result<ExpansionPoint> {
    let mean_a = sys.source_steady_mean()?;
    let kd = sys.layout.kerr_dim();
    // Effective inhomogeneous Kerr drive: circulator feed plus direct drive.
    let mut f_b = sys.eta_b.clone();
    if sys.layout.n_source > 0 {
        let fed = sys.gamma.matvec(&mean_a);
        for i in 0..kd {
            f_b[i] -= fed[i];
        }
    }

    if sys.kerr == 0.0 {
        // Linear chain: L_b <b> + f_b = 0 exactly.
        let rhs: CVec = f_b.iter().map(|z| -z).collect();
        let mean_b = sys.l_b.solve_vec(&rhs)?;
        let ev = sys.l_b.eigenvalues()?;
        let stable = ev.iter().all(|z| z.re < 0.0);
        return Ok(ExpansionPoint {
            mean_a,
            mean_b,
            bbar: vec![C64::ZERO; kd],
            residual: 0.0,
            stable,
            branch: Branch::Linear,
        });
    }

    let gamma = sys.kerr_damping_uniform()?;
    let lam = sys.kerr_scaled()?;
    let sqrt_lam = lam.sqrt();
    let l_b_scaled = sys.l_b.scale(cr(1.0 / gamma));
    // Scaled fixed-point equation F(bbar) = Lb bbar + N(bbar) + s fbar = 0.
    let fbar: CVec = f_b.iter().map(|z| z * cr(sqrt_lam / gamma)).collect();
    let residual_of = |b: &CVec, s: f64| -> CVec {
        let mut r = l_b_scaled.matvec(b);
        for k in 0..kd / 2 {
            let bk = b[2 * k];
            let bkd = b[2 * k + 1];
            r[2 * k] += linalg::I * bkd * bk * bk;
            r[2 * k + 1] += -linalg::I * bk * bkd * bkd;
        }
        for i in 0..kd {
            r[i] += fbar[i] * cr(s);
        }
        r
    };
    let norm = |v: &CVec| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    let mut b = vec![C64::ZERO; kd];
    // Geometric drive ladder ending at the full drive.
    let n_steps = opts.continuation_steps.max(1);
    let s_min = 1e-3f64;
    let ladder: Vec<f64> = (0..n_steps)
        .map(|i| s_min.powf((n_steps - 1 - i) as f64 / (n_steps - 1).max(1) as f64))
        .collect();
    let mut total_iters = 0usize;
    let mut res = 0.0;
    for &s in &ladder {
        let mut r = residual_of(&b, s);
        res = norm(&r);
        let mut iters_here = 0usize;
        while res > opts.tolerance {
            total_iters += 1;
            iters_here += 1;
            if total_iters > opts.max_iterations {
                return Err(CoreError::NonConvergence { residual: res, iterations: total_iters });
            }
            let mut jac = l_b_scaled.clone();
            crate::chain::add_kerr_blocks(&mut jac, &b, 1.0);
            let neg_r: CVec = r.iter().map(|z| -z).collect();
            let step = jac.solve_vec(&neg_r).map_err(|_| CoreError::SingularJacobian)?;
            // Damped update: halve until the residual decreases.
            let mut alpha = 1.0f64;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: CVec =
                    (0..kd).map(|i| b[i] + step[i] * cr(alpha)).collect();
                let rt = residual_of(&trial, s);
                let nt = norm(&rt);
                if nt < res * (1.0 - 0.25 * alpha) || nt < opts.tolerance {
                    b = trial;
                    // Re-impose the conjugate-pair structure.
                    for k in 0..kd / 2 {
                        let avg = 0.5 * (b[2 * k] + b[2 * k + 1].conj());
                        b[2 * k] = avg;
                        b[2 * k + 1] = avg.conj();
                    }
                    r = residual_of(&b, s);
                    res = norm(&r);
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Err(CoreError::NonConvergence { residual: res, iterations: total_iters });
            }
            if iters_here > 60 {
                return Err(CoreError::NonConvergence { residual: res, iterations: total_iters });
            }
        }
    }

    let jac = kerr_jacobian(sys, &b)?;
    let stable = jac.eigenvalues()?.iter().all(|z| z.re < 0.0);
    let mean_b: CVec = b.iter().map(|z| z / cr(sqrt_lam)).collect();
    Ok(ExpansionPoint {
        mean_a,
        mean_b,
        bbar: b,
        residual: res,
        stable,
        branch: Branch::ContinuationFromVacuum,
    })
}

/// Scaled full-chain drift [[L_a, 0], [-Gamma, J_b]] at the working point.
pub fn full_jacobian_scaled(sys: &LinearizedSystem, exp: &ExpansionPoint) -> Result<CMat> {
    let gamma = sys.kerr_reference_rate();
    let n = sys.layout.dim();
    let sd = sys.layout.source_dim();
    let mut j = CMat::zeros(n, n);
    j.set_block(0, 0, &sys.l_a.scale(cr(1.0 / gamma)));
    j.set_block(sd, 0, &sys.gamma.scale(cr(-1.0 / gamma)));
    let jb = if sys.kerr == 0.0 {
        sys.l_b.scale(cr(1.0 / gamma))
    } else {
        kerr_jacobian(sys, &exp.bbar)?
    };
    j.set_block(sd, sd, &jb);
    Ok(j)
}

/// Scaled full-chain diffusion diag(D_a, D_b) at the working point.
pub fn full_diffusion_scaled(sys: &LinearizedSystem, exp: &ExpansionPoint) -> Result<CMat> {
    let gamma = sys.kerr_reference_rate();
    let n = sys.layout.dim();
    let sd = sys.layout.source_dim();
    let mut d = CMat::zeros(n, n);
    d.set_block(0, 0, &sys.d_a.scale(cr(1.0 / gamma)));
    let mut db = sys.d_b_lin.scale(cr(1.0 / gamma));
    if sys.kerr > 0.0 {
        db = db.add(&kerr_linearized_diffusion(&exp.bbar));
    }
    d.set_block(sd, sd, &db);
    Ok(d)
}

/// Steady covariance of the full chain from J C + C J^T + B = 0, with a
/// verified relative residual below 1e-10.
pub fn solve_lyapunov(sys: &LinearizedSystem, exp: &ExpansionPoint) -> Result<CMat> {
    let j = full_jacobian_scaled(sys, exp)?;
    let b = full_diffusion_scaled(sys, exp)?;
    let c = linalg::solve_lyapunov(&j, &b)?;
    let r = linalg::lyapunov_residual(&j, &c, &b);
    if b.norm_fro() > 0.0 && r > 1e-10 {
        return Err(CoreError::Numerical(format!("Lyapunov residual {r:.3e} above tolerance")));
    }
    Ok(c.symmetrize())
}

/// Covariance-driven shift of the Kerr-mode means,
/// `-sqrt(kerr/gamma) J_b^{-1} (H : C_b)`, in physical units.
pub fn mean_shift(sys: &LinearizedSystem, exp: &ExpansionPoint, cov: &CMat) -> Result<CVec> {
    let kd = sys.layout.kerr_dim();
    if sys.kerr == 0.0 {
        return Ok(vec![C64::ZERO; kd]);
    }
    let sd = sys.layout.source_dim();
    let c_b = cov.block(sd..sd + kd, sd..sd + kd);
    let h = kerr_hessian_contract(&exp.bbar, &c_b);
    let jb = kerr_jacobian(sys, &exp.bbar)?;
    let lu = jb.lu().map_err(|_| CoreError::SingularJacobian)?;
    if lu.pivot_ratio() < 1e-14 {
        return Err(CoreError::SingularJacobian);
    }
    let x = lu.solve_vec(&h);
    let lam = sys.kerr_scaled()?;
    Ok(x.iter().map(|z| -z * cr(lam.sqrt())).collect())
}

/// Complete weak-nonlinearity solution for one label.
pub fn solve(sys: &LinearizedSystem) -> Result<NvkSolution> {
    let expansion = solve_expansion_point(sys)?;
    let cov = solve_lyapunov(sys, &expansion)?;
    let shift_b = mean_shift(sys, &expansion, &cov)?;
    Ok(NvkSolution { label: sys.label.clone(), expansion, cov, shift_b, exp_fallback: false })
}

impl NvkSolution {
    /// Kerr-sector block of the covariance.
    pub fn cov_kerr<'a>(&self, sys: &LinearizedSystem) -> CMat {
        let sd = sys.layout.source_dim();
        let n = sys.layout.dim();
        self.cov.block(sd..n, sd..n)
    }

    /// Source block of the covariance.
    pub fn cov_source(&self, sys: &LinearizedSystem) -> CMat {
        let sd = sys.layout.source_dim();
        self.cov.block(0..sd, 0..sd)
    }

    /// Total physical Kerr-mode means including the covariance-driven shift.
    pub fn mean_b_total(&self) -> CVec {
        self.expansion
            .mean_b
            .iter()
            .zip(&self.shift_b)
            .map(|(m, s)| m + s)
            .collect()
    }
}

/// Filtered quadrature means `sqrt(gamma_h T / 2) U_K (mean_b + shift)` in
/// the (I_1, Q_1, ..., I_K, Q_K) real basis.
pub fn measured_mean(sys: &LinearizedSystem, sol: &NvkSolution, window: f64) -> Result<Vec<f64>> {
    let u = sys.layout.u_kerr();
    let m = u.matvec(&sol.mean_b_total());
    let pref = (sys.monitor_rate * window / 2.0).sqrt();
    let max_im = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if max_im > 1e-8 * scale {
        return Err(CoreError::Numerical(format!(
            "measured means are not real (imaginary part {max_im:.3e}); broken pair structure"
        )));
    }
    Ok(m.iter().map(|z| pref * z.re).collect())
}

/// Measured covariance of the filtered records for the requested window
/// treatment, including output vacuum and classical readout noise
/// `sigma_vac^2 (n_cl + 1) I`. Returns the matrix and a flag marking a Pade
/// fallback in the exponential evaluation.
pub fn measured_covariance(
    sys: &LinearizedSystem,
    sol: &NvkSolution,
    window: f64,
    classical_noise: f64,
    mode: FilterMode,
) -> Result<(CMat, bool)> {
    let gamma = sys.kerr_reference_rate();
    let layout = sys.layout;
    let kd = layout.kerr_dim();
    let sd = layout.source_dim();
    let n = layout.dim();
    let u = layout.u_kerr();
    let ratio = sys.monitor_rate / gamma;
    let tbar = gamma * window;
    let mut fallback = false;

    let quantum = match mode {
        FilterMode::Short => {
            let c_b = sol.cov.block(sd..n, sd..n);
            u.matmul(&c_b).matmul(&u.transpose()).scale(cr(0.5 * sys.monitor_rate * window))
        }
        FilterMode::LongLeading => {
            let j = full_jacobian_scaled(sys, &sol.expansion)?;
            let b = full_diffusion_scaled(sys, &sol.expansion)?;
            let jinv = j.inverse()?;
            let x = jinv.matmul(&b).matmul(&jinv.transpose());
            let xb = x.block(sd..n, sd..n);
            u.matmul(&xb).matmul(&u.transpose()).scale(cr(0.5 * ratio))
        }
        FilterMode::LongNext => {
            let j = full_jacobian_scaled(sys, &sol.expansion)?;
            let jinv = j.inverse()?;
            let jinv2 = jinv.matmul(&jinv);
            let c = &sol.cov;
            let lead = c.matmul(&jinv.transpose()).add(&jinv.matmul(c));
            let corr = c
                .matmul(&jinv2.transpose())
                .add(&jinv2.matmul(c))
                .scale(cr(1.0 / tbar));
            let x = lead.add(&corr).block(sd..n, sd..n);
            u.matmul(&x).matmul(&u.transpose()).scale(cr(-0.5 * ratio))
        }
        FilterMode::General => {
            let j = full_jacobian_scaled(sys, &sol.expansion)?;
            let jinv = j.inverse()?;
            let jinv2 = jinv.matmul(&jinv);
            let c = &sol.cov;
            let (ejt, fb) = j.scale(cr(tbar)).expm();
            fallback = fb;
            let idm = CMat::identity(n);
            let lead = c.matmul(&jinv.transpose()).add(&jinv.matmul(c)).scale(cr(-0.5));
            let tail = c
                .matmul(&jinv2.transpose())
                .matmul(&ejt.transpose().sub(&idm))
                .add(&jinv2.matmul(&ejt.sub(&idm)).matmul(c))
                .scale(cr(0.5 / tbar));
            let x = lead.add(&tail).block(sd..n, sd..n);
            u.matmul(&x).matmul(&u.transpose()).scale(cr(ratio))
        }
    };

    let mut sigma = CMat::identity(kd).scale(cr(SIGMA_VAC_SQ * (classical_noise + 1.0)));
    sigma = sigma.add(&quantum);
    let defect = sigma.max_imag();
    if defect > 1e-8 * sigma.norm_fro().max(1.0) {
        return Err(CoreError::Numerical(format!(
            "measured covariance has imaginary defect {defect:.3e}"
        )));
    }
    let real = sigma.map(|z| cr(z.re)).symmetrize();
    Ok((real, fallback))
}

/// Dimensionless linearized susceptibility: the largest eigenvalue magnitude
/// of the inverse scaled Kerr-sector Jacobian. Divergence near an instability
/// shows up as a large value together with `stable = false` on the point.
pub fn susceptibility(sys: &LinearizedSystem, exp: &ExpansionPoint) -> Result<f64> {
    let jb = if sys.kerr == 0.0 {
        sys.l_b.scale(cr(1.0 / sys.kerr_reference_rate()))
    } else {
        kerr_jacobian(sys, &exp.bbar)?
    };
    let ev = jb.eigenvalues()?;
    let min_mod = ev.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if min_mod < 1e-12 {
        return Ok(1e12);
    }
    Ok(1.0 / min_mod)
}

/// Closed-form susceptibility of a single Kerr mode at scaled detuning
/// `delta` (units of gamma) and scaled occupation `nbar = |bbar|^2`:
/// `|1 / (1/2 - sqrt((2 n)^2 - (delta + 4 n)^2))|` with `n = nbar / 2`.
pub fn susceptibility_single_mode(delta: f64, nbar: f64) -> f64 {
    let n = 0.5 * nbar;
    let disc = C64::new((2.0 * n).powi(2) - (delta + 4.0 * n).powi(2), 0.0);
    let den = cr(0.5) - disc.sqrt();
    let d = den.norm();
    if d < 1e-12 {
        1e12
    } else {
        1.0 / d
    }
}

/// Gaussian summary of the filtered measurement distribution for one label.
pub fn gaussian_summary(
    sys: &LinearizedSystem,
    sol: &NvkSolution,
    window: f64,
    classical_noise: f64,
    mode: FilterMode,
) -> Result<GaussianSummary> {
    let mean = measured_mean(sys, sol, window)?;
    let (cov, _) = measured_covariance(sys, sol, window, classical_noise, mode)?;
    Ok(GaussianSummary { mean, cov, n_samples: None })
}
