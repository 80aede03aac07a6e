//! Discrimination and correlation metrics on measured Gaussian
//! distributions: Fisher discriminant and the Gaussian classification
//! fidelity, linear-discriminant classification of feature sets, projected
//! noise geometry, logarithmic negativity of two-mode output covariances, and
//! the quantum Chernoff exponent for single-mode Gaussian states.
//!
//! All covariance inputs are real quadrature-basis, vacuum-inclusive
//! matrices. The one conversion from normal-ordered ladder cumulants lives
//! here: `Sigma_quad = sigma_vac^2 I + U C U^T`.

use num_complex::Complex64 as C64;

use crate::error::{CoreError, Result};
use crate::linalg::{cr, CMat, CVec};
use crate::readout::{FeatureSet, GaussianSummary};
use crate::SIGMA_VAC_SQ;

/// A Gaussian mode state in quadrature form: mean (X_1, P_1, ...) and the
/// vacuum-inclusive symmetric covariance.
#[derive(Debug, Clone)]
pub struct GaussianState {
    pub mean: Vec<f64>,
    pub cov: CMat,
}

impl GaussianState {
    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    /// Single-mode reduction: the (X_k, P_k) block.
    pub fn reduce_mode(&self, k: usize) -> GaussianState {
        let r = 2 * k;
        GaussianState {
            mean: vec![self.mean[r], self.mean[r + 1]],
            cov: self.cov.block(r..r + 2, r..r + 2),
        }
    }

    /// Smallest symplectic eigenvalue (vacuum value one half).
    pub fn symplectic_min(&self) -> Result<f64> {
        let nus = symplectic_eigenvalues(&self.cov)?;
        Ok(nus.into_iter().fold(f64::INFINITY, f64::min))
    }
}

/// The documented conversion from normal-ordered ladder cumulants to the
/// quadrature Gaussian state of the same modes:
/// mean_quad = U <z>, Sigma = sigma_vac^2 I + U C U^T.
pub fn quad_state_from_cumulants(mean: &[C64], cov: &CMat, include_vacuum: bool) -> GaussianState {
    let n_modes = mean.len() / 2;
    let u = block_u(n_modes);
    let mq = u.matvec(mean);
    let mut v = u.matmul(cov).matmul(&u.transpose());
    if include_vacuum {
        v = v.add(&CMat::identity(2 * n_modes).scale(cr(SIGMA_VAC_SQ)));
    }
    GaussianState { mean: mq.iter().map(|z| z.re).collect(), cov: v.map(|z| cr(z.re)).symmetrize() }
}

fn block_u(n_modes: usize) -> CMat {
    let u2 = crate::chain::Layout::u2();
    let mut u = CMat::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        u.set_block(2 * k, 2 * k, &u2);
    }
    u
}

/// Fisher discriminant output: the generalized signal-to-noise ratio, the
/// pooled covariance, and whether near-singularity regularization fired.
#[derive(Debug, Clone)]
pub struct FisherOutcome {
    pub d_f: f64,
    pub pooled: CMat,
    pub regularized: bool,
}

/// `D_F = dmu^T V^{-1} dmu` with `V = (Sigma_l + Sigma_p) / 2`; a ridge of
/// `1e-12 tr(V)/dim` is added when V is numerically singular.
pub fn fisher_discriminant(a: &GaussianSummary, b: &GaussianSummary) -> Result<FisherOutcome> {
    if a.dim() != b.dim() {
        return Err(CoreError::DimensionMismatch {
            context: format!("summaries have dims {} and {}", a.dim(), b.dim()),
        });
    }
    let d = a.dim();
    let dmu: Vec<f64> = a.mean.iter().zip(&b.mean).map(|(x, y)| x - y).collect();
    let pooled = a.cov.add(&b.cov).scale(cr(0.5));
    let mut v = pooled.clone();
    let mut regularized = false;
    let solve = loop {
        match v.lu() {
            Ok(lu) if lu.pivot_ratio() > 1e-13 => break lu,
            _ => {
                if regularized {
                    return Err(CoreError::Numerical("pooled covariance is singular".into()));
                }
                let ridge = 1e-12 * pooled.trace().re / d as f64;
                for i in 0..d {
                    v[(i, i)] += cr(ridge.max(1e-300));
                }
                regularized = true;
            }
        }
    };
    let dmu_c: CVec = dmu.iter().map(|&x| cr(x)).collect();
    let x = solve.solve_vec(&dmu_c);
    let d_f = dmu.iter().zip(&x).map(|(a, b)| a * b.re).sum::<f64>().max(0.0);
    Ok(FisherOutcome { d_f, pooled, regularized })
}

/// Classification fidelity of two equal-covariance Gaussians under the
/// optimal linear boundary: `(1 + erf(sqrt(D_F) / (2 sqrt(2)))) / 2`. The
/// erf argument is the Mahalanobis distance, i.e. the square root of the
/// quadratic discriminant; this is the unique form consistent with the
/// empirical accuracy of the trained boundary.
pub fn gaussian_accuracy(d_f: f64) -> f64 {
    0.5 * (1.0 + libm::erf(d_f.max(0.0).sqrt() / (2.0 * 2f64.sqrt())))
}

/// Linear decision rule: assign the first label when `w . y + bias > 0`.
#[derive(Debug, Clone)]
pub struct LinearBoundary {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearBoundary {
    pub fn decide(&self, y: &[f64]) -> bool {
        self.weights.iter().zip(y).map(|(w, x)| w * x).sum::<f64>() + self.bias > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Noise-aware discriminant, `w = V^{-1} dmu`.
    Fisher,
    /// Mean-separation bisector, ignoring noise anisotropy.
    Bisector,
}

/// Trains the linear boundary from two Gaussian summaries; the threshold is
/// the midpoint of the projected means.
pub fn train_boundary(
    a: &GaussianSummary,
    b: &GaussianSummary,
    kind: BoundaryKind,
) -> Result<LinearBoundary> {
    let fo = fisher_discriminant(a, b)?;
    let dmu: Vec<f64> = a.mean.iter().zip(&b.mean).map(|(x, y)| x - y).collect();
    let weights: Vec<f64> = match kind {
        BoundaryKind::Bisector => dmu.clone(),
        BoundaryKind::Fisher => {
            let dmu_c: CVec = dmu.iter().map(|&x| cr(x)).collect();
            fo.pooled.solve_vec(&dmu_c)?.iter().map(|z| z.re).collect()
        }
    };
    let mid: Vec<f64> = a.mean.iter().zip(&b.mean).map(|(x, y)| 0.5 * (x + y)).collect();
    let bias = -weights.iter().zip(&mid).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearBoundary { weights, bias })
}

/// Trains on one feature set and evaluates the empirical accuracy on
/// another; both must hold exactly the two labels of the task.
pub fn lda_classify(
    train: &FeatureSet,
    test: &FeatureSet,
    kind: BoundaryKind,
) -> Result<(f64, LinearBoundary)> {
    let labels = train.labels();
    if labels.len() != 2 {
        return Err(CoreError::Config(format!(
            "classification needs exactly two labels, got {}",
            labels.len()
        )));
    }
    let sum_a = train.summary(&labels[0])?;
    let sum_b = train.summary(&labels[1])?;
    let boundary = train_boundary(&sum_a, &sum_b, kind)?;
    let mut correct = 0usize;
    let mut total = 0usize;
    for v in &test.vectors {
        let predict_first = boundary.decide(&v.values);
        let is_first = v.label == labels[0];
        if predict_first == is_first {
            correct += 1;
        }
        total += 1;
    }
    if total == 0 {
        return Err(CoreError::TooFewSamples { needed: 1, got: 0 });
    }
    Ok((correct as f64 / total as f64, boundary))
}

/// Projected-noise geometry of a label pair.
#[derive(Debug, Clone)]
pub struct ProjectionGeometry {
    /// Unit vector along the mean separation.
    pub v_parallel: Vec<f64>,
    /// Noise along the separation, per label.
    pub sigma2_dmu: [f64; 2],
    /// Smallest noise eigenpair per label.
    pub min_pair: [(f64, Vec<f64>); 2],
    /// Largest noise eigenpair per label.
    pub max_pair: [(f64, Vec<f64>); 2],
    /// Orthonormal complement of the separation direction.
    pub perp: Vec<Vec<f64>>,
}

pub fn projection_geometry(a: &GaussianSummary, b: &GaussianSummary) -> Result<ProjectionGeometry> {
    let d = a.dim();
    let dmu: Vec<f64> = a.mean.iter().zip(&b.mean).map(|(x, y)| x - y).collect();
    let norm = dmu.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-300 {
        return Err(CoreError::Numerical("mean separation vanishes; no projection axis".into()));
    }
    let v_par: Vec<f64> = dmu.iter().map(|x| x / norm).collect();
    let project = |cov: &CMat| -> f64 {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += v_par[i] * cov[(i, j)].re * v_par[j];
            }
        }
        acc
    };
    let eig_pairs = |cov: &CMat| -> ((f64, Vec<f64>), (f64, Vec<f64>)) {
        let (vals, vecs) = cov.hermitian_eigen();
        let col = |k: usize| (0..d).map(|i| vecs[(i, k)].re).collect::<Vec<f64>>();
        ((vals[0], col(0)), (vals[d - 1], col(d - 1)))
    };
    let (amin, amax) = eig_pairs(&a.cov);
    let (bmin, bmax) = eig_pairs(&b.cov);
    // Gram-Schmidt complement of the separation direction.
    let mut basis: Vec<Vec<f64>> = vec![v_par.clone()];
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        for bvec in &basis {
            let dot: f64 = bvec.iter().zip(&e).map(|(x, y)| x * y).sum();
            for i in 0..d {
                e[i] -= dot * bvec[i];
            }
        }
        let n: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-10 {
            for x in e.iter_mut() {
                *x /= n;
            }
            basis.push(e);
        }
        if basis.len() == d {
            break;
        }
    }
    Ok(ProjectionGeometry {
        sigma2_dmu: [project(&a.cov), project(&b.cov)],
        min_pair: [amin, bmin],
        max_pair: [amax, bmax],
        perp: basis[1..].to_vec(),
        v_parallel: v_par,
    })
}

/// Logarithmic negativity of a two-mode quadrature covariance (vacuum
/// variance one half): `E_N = max(0, -ln 2 nu^-)` with
/// `nu^- = sqrt((d - sqrt(d^2 - 4 det S)) / 2)` and
/// `d = det S_11 + det S_22 - 2 det S_12`.
pub fn log_negativity(sigma: &CMat) -> Result<f64> {
    if sigma.rows != 4 || sigma.cols != 4 {
        return Err(CoreError::DimensionMismatch {
            context: format!("logarithmic negativity needs a 4x4 covariance, got {}x{}", sigma.rows, sigma.cols),
        });
    }
    let det2 = |m: &CMat| (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
    let s11 = sigma.block(0..2, 0..2);
    let s22 = sigma.block(2..4, 2..4);
    let s12 = sigma.block(0..2, 2..4);
    let d = det2(&s11) + det2(&s22) - 2.0 * det2(&s12);
    let det_full = sigma.determinant().re;
    let disc = d * d - 4.0 * det_full;
    if disc < -1e-10 * (1.0 + d * d) {
        return Err(CoreError::InvalidCovariance {
            reason: format!("d^2 - 4 det = {disc:.3e} is negative"),
        });
    }
    let inner = 0.5 * (d - disc.max(0.0).sqrt());
    if inner < -1e-10 {
        return Err(CoreError::InvalidCovariance {
            reason: format!("negative squared symplectic eigenvalue {inner:.3e}"),
        });
    }
    let nu_minus = inner.max(0.0).sqrt();
    Ok((-(2.0 * nu_minus).ln()).max(0.0))
}

/// Symplectic eigenvalues of a quadrature covariance: the positive imaginary
/// parts of the spectrum of Omega Sigma.
pub fn symplectic_eigenvalues(sigma: &CMat) -> Result<Vec<f64>> {
    let n = sigma.rows;
    if n % 2 != 0 {
        return Err(CoreError::DimensionMismatch { context: "odd quadrature dimension".into() });
    }
    let mut omega = CMat::zeros(n, n);
    for k in 0..n / 2 {
        omega[(2 * k, 2 * k + 1)] = cr(1.0);
        omega[(2 * k + 1, 2 * k)] = cr(-1.0);
    }
    let m = omega.matmul(sigma);
    let ev = m.eigenvalues()?;
    let mut nus: Vec<f64> = ev.iter().filter(|z| z.im > 0.0).map(|z| z.im).collect();
    nus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if nus.len() != n / 2 {
        return Err(CoreError::InvalidCovariance {
            reason: "spectrum of Omega Sigma is not in conjugate pairs".into(),
        });
    }
    Ok(nus)
}

/// Independent partial-transpose route to the logarithmic negativity: flips
/// the momentum of the second mode and reads the smallest symplectic
/// eigenvalue directly.
pub fn log_negativity_symplectic(sigma: &CMat) -> Result<f64> {
    let mut pt = sigma.clone();
    for i in 0..4 {
        if i != 3 {
            pt[(i, 3)] = -pt[(i, 3)];
            pt[(3, i)] = -pt[(3, i)];
        }
    }
    let nus = symplectic_eigenvalues(&pt)?;
    Ok((-(2.0 * nus[0]).ln()).max(0.0))
}

/// Gaussian quantum Chernoff exponent for two single-mode Gaussian states,
/// `-min_s ln tr(rho_a^s rho_b^{1-s})`, by bounded scalar minimization of the
/// Gaussian closed form. Verified against the Fock-space brute force.
pub fn qcb_gaussian(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    if a.n_modes() != 1 || b.n_modes() != 1 {
        return Err(CoreError::DimensionMismatch {
            context: "Chernoff closed form implemented for single-mode reductions".into(),
        });
    }
    // Convert to doubled units where the vacuum covariance is the identity.
    let va = a.cov.scale(cr(2.0));
    let vb = b.cov.scale(cr(2.0));
    let det = |m: &CMat| (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
    let nu_a = det(&va).max(0.0).sqrt();
    let nu_b = det(&vb).max(0.0).sqrt();
    for nu in [nu_a, nu_b] {
        if nu < 1.0 - 1e-7 {
            return Err(CoreError::InvalidCovariance {
                reason: format!("symplectic eigenvalue {:.6} below vacuum", 0.5 * nu),
            });
        }
    }
    let nu_a = nu_a.max(1.0);
    let nu_b = nu_b.max(1.0);
    let d: Vec<f64> = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| 2f64.sqrt() * (x - y))
        .collect();
    let g = |t: f64, nu: f64| -> f64 {
        2f64.powf(t) / ((nu + 1.0).powf(t) - (nu - 1.0).powf(t))
    };
    let lam = |t: f64, nu: f64| -> f64 {
        ((nu + 1.0).powf(t) + (nu - 1.0).powf(t)) / ((nu + 1.0).powf(t) - (nu - 1.0).powf(t))
    };
    let q = |s: f64| -> f64 {
        if s <= 0.0 || s >= 1.0 {
            return 1.0;
        }
        // Heated covariances (single mode: V(t) = Lambda_t(nu)/nu V).
        let m = va
            .scale(cr(lam(s, nu_a) / nu_a))
            .add(&vb.scale(cr(lam(1.0 - s, nu_b) / nu_b)));
        let dm = det(&m);
        if dm <= 0.0 {
            return f64::INFINITY;
        }
        // Quadratic form d^T M^{-1} d for the 2x2 M.
        let quad = (m[(1, 1)].re * d[0] * d[0] - 2.0 * m[(0, 1)].re * d[0] * d[1]
            + m[(0, 0)].re * d[1] * d[1])
            / dm;
        2.0 * g(s, nu_a) * g(1.0 - s, nu_b) / dm.sqrt() * (-0.5 * quad).exp()
    };
    // Coarse scan, then golden-section refinement.
    let grid = 101usize;
    let mut best = (0.5f64, f64::INFINITY);
    for i in 1..grid {
        let s = i as f64 / grid as f64;
        let v = q(s);
        if v < best.1 {
            best = (s, v);
        }
    }
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = ((best.0 - 0.02).max(1e-9), (best.0 + 0.02).min(1.0 - 1e-9));
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (q(x1), q(x2));
    while hi - lo > 1e-8 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = q(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = q(x2);
        }
    }
    let qmin = q(0.5 * (lo + hi)).min(best.1).min(1.0);
    Ok(-qmin.ln())
}

/// Everything the command-line front end reports for one label pair.
#[derive(Debug, Clone)]
pub struct DiscriminationReport {
    pub labels: (String, String),
    pub delta_mu: Vec<f64>,
    pub delta_mu_norm: f64,
    pub pooled_cov: CMat,
    pub d_f: f64,
    pub c_max: f64,
    pub sigma2_dmu: [f64; 2],
    pub sigma2_min: [f64; 2],
    pub sigma2_max: [f64; 2],
    pub empirical_accuracy: Option<f64>,
    pub boundary: LinearBoundary,
}

/// Builds the full report from two Gaussian summaries.
pub fn discrimination_report(
    labels: (String, String),
    a: &GaussianSummary,
    b: &GaussianSummary,
    empirical_accuracy: Option<f64>,
) -> Result<DiscriminationReport> {
    let fo = fisher_discriminant(a, b)?;
    let boundary = train_boundary(a, b, BoundaryKind::Fisher)?;
    let dmu: Vec<f64> = a.mean.iter().zip(&b.mean).map(|(x, y)| x - y).collect();
    let dmu_norm = dmu.iter().map(|x| x * x).sum::<f64>().sqrt();
    let geo = projection_geometry(a, b);
    let (s_dmu, s_min, s_max) = match geo {
        Ok(g) => (
            g.sigma2_dmu,
            [g.min_pair[0].0, g.min_pair[1].0],
            [g.max_pair[0].0, g.max_pair[1].0],
        ),
        Err(_) => {
            // Degenerate separation: report the eigenvalue range only.
            let (va, _) = a.cov.hermitian_eigen();
            let (vb, _) = b.cov.hermitian_eigen();
            let d = a.dim();
            ([f64::NAN, f64::NAN], [va[0], vb[0]], [va[d - 1], vb[d - 1]])
        }
    };
    Ok(DiscriminationReport {
        labels,
        delta_mu: dmu,
        delta_mu_norm: dmu_norm,
        pooled_cov: fo.pooled,
        d_f: fo.d_f,
        c_max: gaussian_accuracy(fo.d_f),
        sigma2_dmu: s_dmu,
        sigma2_min: s_min,
        sigma2_max: s_max,
        empirical_accuracy,
        boundary,
    })
}

impl DiscriminationReport {
    /// Flat key-value rendering for files and logs.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("label_a", self.labels.0.clone());
        kv("label_b", self.labels.1.clone());
        kv("delta_mu", format!("{:?}", self.delta_mu));
        kv("delta_mu_norm", format!("{:.12e}", self.delta_mu_norm));
        kv("d_f", format!("{:.12e}", self.d_f));
        kv("c_max", format!("{:.12}", self.c_max));
        kv("sigma2_dmu_a", format!("{:.12e}", self.sigma2_dmu[0]));
        kv("sigma2_dmu_b", format!("{:.12e}", self.sigma2_dmu[1]));
        kv("sigma2_min_a", format!("{:.12e}", self.sigma2_min[0]));
        kv("sigma2_min_b", format!("{:.12e}", self.sigma2_min[1]));
        kv("sigma2_max_a", format!("{:.12e}", self.sigma2_max[0]));
        kv("sigma2_max_b", format!("{:.12e}", self.sigma2_max[1]));
        if let Some(acc) = self.empirical_accuracy {
            kv("empirical_accuracy", format!("{acc:.6}"));
        }
        kv("boundary_w", format!("{:?}", self.boundary.weights));
        kv("boundary_bias", format!("{:.12e}", self.boundary.bias));
        for i in 0..self.pooled_cov.rows {
            let row: Vec<String> =
                (0..self.pooled_cov.cols).map(|j| format!("{:.12e}", self.pooled_cov[(i, j)].re)).collect();
            kv(&format!("pooled_cov_{i}"), row.join(" "));
        }
        out
    }
}
