//! From raw heterodyne records to feature vectors: boxcar filtering,
//! post-measurement classical noise, empirical Gaussian summaries, and the
//! quadratic post-processing used by linear-amplifier baselines.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};
use crate::linalg::{cr, CMat};
use crate::steom::Trajectory;
use crate::SIGMA_VAC_SQ;

/// One shot of filtered features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub label: String,
    pub shot: usize,
    pub values: Vec<f64>,
}

/// A set of feature vectors sharing the same feature names and filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub names: Vec<String>,
    /// Boxcar window length.
    pub window: f64,
    /// Filter start time.
    pub start: f64,
    pub vectors: Vec<FeatureVector>,
}

impl FeatureSet {
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for v in &self.vectors {
            if !out.contains(&v.label) {
                out.push(v.label.clone());
            }
        }
        out
    }

    pub fn rows_for(&self, label: &str) -> Vec<&FeatureVector> {
        self.vectors.iter().filter(|v| v.label == label).collect()
    }

    /// Empirical Gaussian summary of one label's rows.
    pub fn summary(&self, label: &str) -> Result<GaussianSummary> {
        let rows: Vec<&[f64]> =
            self.rows_for(label).into_iter().map(|v| v.values.as_slice()).collect();
        empirical_summary(&rows)
    }

    /// Standard quadrature feature names (I_1, Q_1, ...).
    pub fn quadrature_names(n_modes: usize) -> Vec<String> {
        (0..n_modes)
            .flat_map(|k| [format!("I{}", k + 1), format!("Q{}", k + 1)])
            .collect()
    }

    /// CSV with a header row naming the features, one row per shot, and a
    /// trailing label column.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.names.join(","));
        out.push_str(",label\n");
        for v in &self.vectors {
            for (i, x) in v.values.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{x:.17e}"));
            }
            out.push_str(&format!(",{}\n", v.label));
        }
        out
    }

    pub fn from_csv(text: &str, window: f64, start: f64) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| CoreError::Config("empty CSV".into()))?;
        let mut names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        if names.last().map(String::as_str) != Some("label") {
            return Err(CoreError::Config("feature CSV must end with a label column".into()));
        }
        names.pop();
        let mut vectors = Vec::new();
        for (shot, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != names.len() + 1 {
                return Err(CoreError::Config(format!(
                    "row {shot}: {} fields, expected {}",
                    fields.len(),
                    names.len() + 1
                )));
            }
            let values = fields[..names.len()]
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| CoreError::Config(e.to_string())))
                .collect::<Result<Vec<f64>>>()?;
            vectors.push(FeatureVector {
                label: fields[names.len()].trim().to_string(),
                shot,
                values,
            });
        }
        Ok(FeatureSet { names, window, start, vectors })
    }
}

/// Mean vector and covariance of a measured feature distribution, either
/// analytic (`n_samples: None`) or estimated from `n_samples` shots.
#[derive(Debug, Clone)]
pub struct GaussianSummary {
    pub mean: Vec<f64>,
    pub cov: CMat,
    pub n_samples: Option<usize>,
}

impl GaussianSummary {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Standard error of each mean component.
    pub fn mean_std_errors(&self) -> Vec<f64> {
        let n = self.n_samples.unwrap_or(usize::MAX) as f64;
        (0..self.dim()).map(|i| (self.cov[(i, i)].re / n).sqrt()).collect()
    }
}

/// Boxcar filter `(1 / sqrt(2 T)) sum of record increments` over the window
/// `[start, start + window)`, yielding (I_1, Q_1, ..., I_K, Q_K).
pub fn boxcar_filter(traj: &Trajectory, window: f64, start: f64) -> Result<Vec<f64>> {
    if window <= 0.0 {
        return Err(CoreError::FilterOutOfRange { start, end: start + window, span: traj.span() });
    }
    let dt = traj.dt;
    let n_steps = traj.record_i[0].len();
    let span = n_steps as f64 * dt;
    let i0 = (start / dt).round() as usize;
    let i1 = ((start + window) / dt).round() as usize;
    if i1 > n_steps || i0 >= i1 {
        return Err(CoreError::FilterOutOfRange { start, end: start + window, span });
    }
    let norm = 1.0 / (2.0 * window).sqrt();
    let mut out = Vec::with_capacity(2 * traj.record_i.len());
    for k in 0..traj.record_i.len() {
        let si: f64 = traj.record_i[k][i0..i1].iter().sum();
        let sq: f64 = traj.record_q[k][i0..i1].iter().sum();
        out.push(norm * si);
        out.push(norm * sq);
    }
    Ok(out)
}

/// Adds independent Gaussian classical readout noise of power
/// `n_cl sigma_vac^2` to every feature. White classical noise commutes with
/// the boxcar filter, so a single post-filter draw per feature is exactly
/// equivalent to per-step injection.
pub fn add_classical_noise<R: Rng>(set: &mut FeatureSet, n_cl: f64, rng: &mut R) {
    if n_cl == 0.0 {
        return;
    }
    let sd = (n_cl * SIGMA_VAC_SQ).sqrt();
    for v in &mut set.vectors {
        for x in &mut v.values {
            let g: f64 = rng.sample(StandardNormal);
            *x += sd * g;
        }
    }
}

/// Sample mean and unbiased sample covariance.
pub fn empirical_summary(rows: &[&[f64]]) -> Result<GaussianSummary> {
    let n = rows.len();
    if n < 2 {
        return Err(CoreError::TooFewSamples { needed: 2, got: n });
    }
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        if r.len() != d {
            return Err(CoreError::DimensionMismatch { context: "ragged feature rows".into() });
        }
        for i in 0..d {
            mean[i] += r[i];
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = CMat::zeros(d, d);
    for r in rows {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in 0..d {
                cov[(i, j)] += cr(di * (r[j] - mean[j]));
            }
        }
    }
    let cov = cov.scale(cr(1.0 / (n as f64 - 1.0)));
    Ok(GaussianSummary { mean, cov, n_samples: Some(n) })
}

/// Which quadratic monomials to form from the linear features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearKind {
    /// Per mode: (I_k^2, Q_k^2).
    LocalSquares,
    /// Per consecutive mode pair: (I_j I_k, Q_j Q_k).
    CrossProducts,
}

/// Quadratic post-processing: forms the requested monomials shot by shot and
/// averages them over groups of `group` shots within each label. With
/// `centered` the label's empirical mean is subtracted before squaring, the
/// variant used when the shared mean offset is known and removed.
pub fn nonlinear_features(
    set: &FeatureSet,
    kind: NonlinearKind,
    group: usize,
    centered: bool,
) -> Result<FeatureSet> {
    if group == 0 {
        return Err(CoreError::Config("group size must be positive".into()));
    }
    let n_modes = set.names.len() / 2;
    let names: Vec<String> = match kind {
        NonlinearKind::LocalSquares => (0..n_modes)
            .flat_map(|k| [format!("I{}sq", k + 1), format!("Q{}sq", k + 1)])
            .collect(),
        NonlinearKind::CrossProducts => (0..n_modes.saturating_sub(1))
            .flat_map(|k| {
                [format!("I{}I{}", k + 1, k + 2), format!("Q{}Q{}", k + 1, k + 2)]
            })
            .collect(),
    };
    if names.is_empty() {
        return Err(CoreError::Config("cross products need at least two modes".into()));
    }
    let mut vectors = Vec::new();
    for label in set.labels() {
        let rows = set.rows_for(&label);
        if rows.len() % group != 0 {
            return Err(CoreError::Config(format!(
                "label '{label}': {} shots not divisible by group {group}",
                rows.len()
            )));
        }
        let center: Vec<f64> = if centered {
            let d = set.names.len();
            let mut m = vec![0.0; d];
            for r in &rows {
                for i in 0..d {
                    m[i] += r.values[i];
                }
            }
            m.iter().map(|x| x / rows.len() as f64).collect()
        } else {
            vec![0.0; set.names.len()]
        };
        let monomials = |v: &[f64]| -> Vec<f64> {
            match kind {
                NonlinearKind::LocalSquares => (0..2 * n_modes)
                    .map(|i| (v[i] - center[i]) * (v[i] - center[i]))
                    .collect(),
                NonlinearKind::CrossProducts => (0..n_modes - 1)
                    .flat_map(|k| {
                        let (i1, q1) = (2 * k, 2 * k + 1);
                        let (i2, q2) = (2 * k + 2, 2 * k + 3);
                        [
                            (v[i1] - center[i1]) * (v[i2] - center[i2]),
                            (v[q1] - center[q1]) * (v[q2] - center[q2]),
                        ]
                    })
                    .collect(),
            }
        };
        for (gi, chunk) in rows.chunks(group).enumerate() {
            let mut acc = vec![0.0; names.len()];
            for r in chunk {
                for (a, m) in acc.iter_mut().zip(monomials(&r.values)) {
                    *a += m;
                }
            }
            for a in acc.iter_mut() {
                *a /= group as f64;
            }
            vectors.push(FeatureVector { label: label.clone(), shot: gi, values: acc });
        }
    }
    Ok(FeatureSet { names, window: set.window, start: set.start, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn set_from(values: Vec<Vec<f64>>, label: &str) -> FeatureSet {
        FeatureSet {
            names: FeatureSet::quadrature_names(values[0].len() / 2),
            window: 100.0,
            start: 0.0,
            vectors: values
                .into_iter()
                .enumerate()
                .map(|(shot, values)| FeatureVector { label: label.into(), shot, values })
                .collect(),
        }
    }

    #[test]
    fn summary_of_identical_samples_has_zero_covariance() {
        let set = set_from(vec![vec![1.0, -2.0]; 5], "x");
        let s = set.summary("x").unwrap();
        assert_eq!(s.mean, vec![1.0, -2.0]);
        assert!(s.cov.norm_fro() == 0.0);
    }

    #[test]
    fn summary_of_two_points_matches_hand_value() {
        let set = set_from(vec![vec![0.0, 0.0], vec![2.0, 4.0]], "x");
        let s = set.summary("x").unwrap();
        assert_eq!(s.mean, vec![1.0, 2.0]);
        // Unbiased: var = sum d^2 / (n-1) = (1 + 1) * 1 etc.
        assert!((s.cov[(0, 0)].re - 2.0).abs() < 1e-14);
        assert!((s.cov[(1, 1)].re - 8.0).abs() < 1e-14);
        assert!((s.cov[(0, 1)].re - 4.0).abs() < 1e-14);
    }

    #[test]
    fn summary_requires_two_samples() {
        let set = set_from(vec![vec![1.0, 1.0]], "x");
        assert!(matches!(set.summary("x"), Err(CoreError::TooFewSamples { .. })));
    }

    #[test]
    fn summary_matches_synthetic_gaussian() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n = 40_000;
        let mut rows = Vec::with_capacity(n);
        for shot in 0..n {
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            // Correlated pair: x = g1, y = 0.6 g1 + 0.8 g2.
            rows.push(FeatureVector {
                label: "x".into(),
                shot,
                values: vec![g1, 0.6 * g1 + 0.8 * g2],
            });
        }
        let set = FeatureSet {
            names: FeatureSet::quadrature_names(1),
            window: 1.0,
            start: 0.0,
            vectors: rows,
        };
        let s = set.summary("x").unwrap();
        let se = 3.0 / (n as f64).sqrt();
        assert!(s.mean[0].abs() < se && s.mean[1].abs() < se);
        assert!((s.cov[(0, 0)].re - 1.0).abs() < 4.0 * se);
        assert!((s.cov[(0, 1)].re - 0.6).abs() < 4.0 * se);
        assert!((s.cov[(1, 1)].re - 1.0).abs() < 4.0 * se);
    }

    #[test]
    fn classical_noise_zero_power_is_identity() {
        let mut set = set_from(vec![vec![1.0, 2.0], vec![3.0, 4.0]], "x");
        let before = set.clone();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        add_classical_noise(&mut set, 0.0, &mut rng);
        assert_eq!(set, before);
    }

    #[test]
    fn classical_noise_variance_increment() {
        let n = 60_000;
        let mut set = set_from(vec![vec![0.0, 0.0]; n], "x");
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let ncl = 3.0;
        add_classical_noise(&mut set, ncl, &mut rng);
        let s = set.summary("x").unwrap();
        let se = 3.0 * (2.0f64).sqrt() * ncl * SIGMA_VAC_SQ / (n as f64).sqrt();
        // Per-feature variance increment n_cl/2, independent across features.
        assert!((s.cov[(0, 0)].re - ncl * SIGMA_VAC_SQ).abs() < se);
        assert!((s.cov[(1, 1)].re - ncl * SIGMA_VAC_SQ).abs() < se);
        assert!(s.cov[(0, 1)].re.abs() < se);
    }

    #[test]
    fn local_squares_group_one_is_pointwise() {
        let set = set_from(vec![vec![2.0, -3.0]], "x");
        let nl = nonlinear_features(&set, NonlinearKind::LocalSquares, 1, false).unwrap();
        assert_eq!(nl.vectors[0].values, vec![4.0, 9.0]);
        assert_eq!(nl.names, vec!["I1sq", "Q1sq"]);
    }

    #[test]
    fn mean_of_squares_estimates_second_moment() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = 50_000;
        let (mu, var): (f64, f64) = (1.3, 0.7);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let g: f64 = rng.sample(StandardNormal);
                vec![mu + var.sqrt() * g, 0.0]
            })
            .collect();
        let set = set_from(rows, "x");
        let nl = nonlinear_features(&set, NonlinearKind::LocalSquares, 1, false).unwrap();
        let s = nl.summary("x").unwrap();
        let expect = var + mu * mu;
        assert!((s.mean[0] - expect).abs() < 0.05, "{} vs {expect}", s.mean[0]);
    }

    #[test]
    fn centered_squares_variance_scales_quadratically() {
        // Var of centered I^2 features is 2 Sigma^2 for Gaussian inputs: the
        // quadratic readout-noise amplification underlying amplifier
        // baselines.
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let n = 80_000;
        for sigma2 in [1.0, 9.0] {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let g: f64 = rng.sample(StandardNormal);
                    vec![(sigma2 as f64).sqrt() * g, 0.0]
                })
                .collect();
            let set = set_from(rows, "x");
            let nl = nonlinear_features(&set, NonlinearKind::LocalSquares, 1, true).unwrap();
            let s = nl.summary("x").unwrap();
            let expect = 2.0 * sigma2 * sigma2;
            let tol = 6.0 * expect * (2.0 / n as f64).sqrt() * 3.0;
            assert!(
                (s.cov[(0, 0)].re - expect).abs() < tol,
                "sigma2={sigma2}: {} vs {expect}",
                s.cov[(0, 0)].re
            );
        }
    }

    #[test]
    fn cross_products_need_two_modes() {
        let set = set_from(vec![vec![1.0, 2.0]], "x");
        assert!(nonlinear_features(&set, NonlinearKind::CrossProducts, 1, false).is_err());
        let set2 = set_from(vec![vec![1.0, 2.0, 3.0, 4.0]], "x");
        let nl = nonlinear_features(&set2, NonlinearKind::CrossProducts, 1, false).unwrap();
        assert_eq!(nl.vectors[0].values, vec![3.0, 8.0]);
    }

    #[test]
    fn group_averaging_divides_counts() {
        let set = set_from(vec![vec![1.0, 0.0], vec![3.0, 0.0], vec![5.0, 0.0], vec![7.0, 0.0]], "x");
        let nl = nonlinear_features(&set, NonlinearKind::LocalSquares, 2, false).unwrap();
        assert_eq!(nl.vectors.len(), 2);
        assert_eq!(nl.vectors[0].values[0], (1.0 + 9.0) / 2.0);
        assert!(nonlinear_features(&set, NonlinearKind::LocalSquares, 3, false).is_err());
        assert!(nonlinear_features(&set, NonlinearKind::LocalSquares, 0, false).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let set = set_from(vec![vec![1.5, -2.25], vec![0.125, 3.0]], "l1");
        let text = set.to_csv();
        let back = FeatureSet::from_csv(&text, set.window, set.start).unwrap();
        assert_eq!(set, back);
    }
}
