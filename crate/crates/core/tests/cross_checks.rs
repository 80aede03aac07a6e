//! Cross-module integration checks: oracle ground truth against the
//! truncated-cumulant solvers, stochastic self-consistency, and step-size
//! convergence of the conditional integrator.

use kerrnet_core::chain::ChainSpec;
use kerrnet_core::linalg::cr;
use kerrnet_core::nvk;
use kerrnet_core::oracle::FockChain;
use kerrnet_core::readout::FeatureSet;
use kerrnet_core::steom::{self, EnsembleConfig, SdeConfig};
use kerrnet_core::tasks::{self, TaskId};
use kerrnet_core::CMat;

/// A one-source/one-Kerr chain at moderate amplitude where the exact Fock
/// solve stays affordable: the squeezed-pair discrimination setting of the
/// K = M = 1 benchmark, scaled down.
fn small_verification_chain(amplitude: f64) -> ChainSpec {
    let task = tasks::task(TaskId::IV);
    let mut spec = task.spec.clone();
    for (lab, ratios) in spec.labels.iter_mut().zip([[0.20], [0.80]]) {
        lab.drive = ratios.iter().map(|r| r * amplitude).collect();
    }
    spec
}

#[test]
fn fock_ground_truth_matches_cumulant_steady_state() {
    // Exact master-equation steady state vs the deterministic truncated
    // cumulants for the strongly nonlinear single-readout chain.
    let spec = small_verification_chain(1.2);
    for label in ["l7", "l8"] {
        let sys = spec.build(label).unwrap();
        let st = steom::deterministic_steady_state(&sys, 1e-3, 3000.0).unwrap();
        let r = sys.layout.kerr_row(0);
        let chain = FockChain::from_chain(&spec, label, &[20, 12]).unwrap();
        let fock = chain.steady_state().unwrap();
        // The anti-squeezed source quadrature gives a slow Fock tail; a few
        // 1e-6 of boundary population is harmless at the percent-level
        // tolerances checked here.
        fock.check_tails(1e-5).unwrap();
        let b = &chain.mode_ops[1];
        let m = fock.moment(b, 0, 1);
        let n = fock.moment(b, 1, 1) - m.conj() * m;
        let cbb = fock.moment(b, 0, 2) - m * m;
        let dm = (st.mean[r].norm() - m.norm()).abs() / m.norm();
        assert!(dm < 0.02, "{label}: |mean| relative deviation {dm}");
        let dn = (st.cov[(r, r + 1)].re - n.re).abs() / n.re.abs().max(0.05);
        let dc = (st.cov[(r, r)].norm() - cbb.norm()).abs() / cbb.norm().max(0.05);
        assert!(dn < 0.25, "{label}: occupation deviation {dn}");
        assert!(dc < 0.25, "{label}: |c_bb| deviation {dc}");
        // The source sector is exact in both descriptions.
        let a = &chain.mode_ops[0];
        let ma = fock.moment(a, 0, 1);
        assert!((st.mean[0] - ma).norm() < 2e-3 * ma.norm().max(1.0));
    }
}

#[test]
fn nvk_linear_limit_closes_on_exact_gaussian_chain() {
    // With zero Kerr strength the semi-analytic measured statistics coincide
    // with the exact Gaussian solution of the unscaled chain.
    let task = tasks::task(TaskId::I);
    let spec = tasks::SweepParam::Kerr.apply(&task.spec, 0.0);
    for label in ["l1", "l2"] {
        let sys = spec.build(label).unwrap();
        let sol = nvk::solve(&sys).unwrap();
        let a = sys.full_drift_linear();
        let d = sys.full_diffusion_linear();
        let c_exact = kerrnet_core::linalg::solve_lyapunov(&a, &d).unwrap();
        assert!(
            sol.cov.sub(&c_exact).norm_fro() <= 1e-8 * c_exact.norm_fro().max(1.0),
            "{label}"
        );
        // Means: full linear steady state.
        let f = sys.full_drive();
        let rhs: Vec<_> = f.iter().map(|z| -z).collect();
        let mean_exact = a.solve_vec(&rhs).unwrap();
        let sd = sys.layout.source_dim();
        for k in 0..2 {
            assert!((sol.expansion.mean_b[k] - mean_exact[sd + k]).norm() < 1e-9);
        }
    }
}

#[test]
fn ensemble_covariance_obeys_law_of_total_covariance() {
    // E[C^c] plus the covariance of the conditional means reproduces the
    // unconditional covariance of the chain.
    let task = tasks::task(TaskId::I);
    let sys = task.spec.build("l1").unwrap();
    let t_end = 30.0;
    let n_seeds = 120;
    let dt = 2e-3;
    let n = sys.layout.dim();
    let mut mean_of_cov = CMat::zeros(n, n);
    let mut means: Vec<Vec<num_complex::Complex64>> = Vec::new();
    for s in 0..n_seeds {
        let cfg = SdeConfig {
            dt,
            t_total: t_end,
            seed: steom::derive_seed(5150, 0, s),
            store_stride: 0,
        };
        let tr = steom::integrate_trajectory(&sys, &cfg).unwrap();
        let last = tr.states.last().unwrap();
        mean_of_cov = mean_of_cov.add(&last.cov);
        means.push(last.mean.clone());
    }
    mean_of_cov = mean_of_cov.scale(cr(1.0 / n_seeds as f64));
    let avg: Vec<num_complex::Complex64> = (0..n)
        .map(|i| means.iter().map(|m| m[i]).sum::<num_complex::Complex64>() / cr(n_seeds as f64))
        .collect();
    let mut spread = CMat::zeros(n, n);
    for m in &means {
        for i in 0..n {
            for j in 0..n {
                spread[(i, j)] += (m[i] - avg[i]) * (m[j] - avg[j]);
            }
        }
    }
    spread = spread.scale(cr(1.0 / n_seeds as f64));
    let total = mean_of_cov.add(&spread);
    // Unconditional reference: deterministic truncated dynamics at t_end.
    let det = steom::deterministic_steady_state(&sys, dt, t_end);
    let reference = match det {
        Ok(st) => st.cov,
        Err(_) => {
            // Not yet stationary at t_end: integrate the drift directly.
            let s = steom::SteomSystem::new(&sys);
            let mut mean = vec![num_complex::Complex64::ZERO; n];
            let mut cov = CMat::zeros(n, n);
            for _ in 0..(t_end / dt) as usize {
                let (dm, dc) = s.deterministic_drift(&mean, &cov);
                for i in 0..n {
                    mean[i] += dm[i] * cr(dt);
                }
                cov = cov.add(&dc.scale(cr(dt)));
            }
            cov
        }
    };
    // Monte-Carlo agreement: a loose multiple of the sampling error of the
    // dominant entries.
    let scale = reference.norm_fro().max(1.0);
    let dev = total.sub(&reference).norm_fro() / scale;
    assert!(dev < 0.4, "law of total covariance violated: relative deviation {dev:.3}");
    // And the conditional covariance alone must under-count it.
    let dev_cond_only = mean_of_cov.sub(&reference).norm_fro() / scale;
    assert!(
        dev_cond_only > dev,
        "conditioning should strictly reduce the conditional covariance"
    );
}

#[test]
fn halving_the_step_leaves_filtered_features_statistically_unchanged() {
    // Weak self-convergence: feature means from independently seeded
    // ensembles at dt and dt/2 agree within combined sampling error.
    let task = tasks::task(TaskId::I);
    let window = 50.0;
    let run = |dt: f64, seed: u64| -> FeatureSet {
        let cfg = EnsembleConfig { n_traj: 100, dt, master_seed: seed, window, start: Some(40.0) };
        steom::ensemble_run(&task.spec, &["l1", "l2"], &cfg).unwrap()
    };
    let coarse = run(4e-3, 1001);
    let fine = run(2e-3, 2002);
    for label in ["l1", "l2"] {
        let a = coarse.summary(label).unwrap();
        let b = fine.summary(label).unwrap();
        for i in 0..2 {
            let se = ((a.cov[(i, i)].re + b.cov[(i, i)].re) / 100.0).sqrt();
            let dev = (a.mean[i] - b.mean[i]).abs();
            assert!(
                dev < 4.0 * se + 0.05 * a.mean[i].abs(),
                "{label} component {i}: dev {dev} vs se {se}"
            );
        }
    }
}

#[test]
fn record_mean_reproduces_filtered_quadrature_formula() {
    // E[I_k] = sqrt(gamma_h T / 2) <X_k> over the ensemble.
    let task = tasks::task(TaskId::III);
    let sys = task.spec.build("l5").unwrap();
    let window = 60.0;
    let cfg = EnsembleConfig { n_traj: 200, dt: 2e-3, master_seed: 7, window, start: Some(30.0) };
    let set = steom::ensemble_run(&task.spec, &["l5", "l6"], &cfg).unwrap();
    let st = steom::deterministic_steady_state(&sys, 1e-3, 2000.0).unwrap();
    let r = sys.layout.kerr_row(0);
    let expect_i = (sys.monitor_rate * window / 2.0).sqrt() * 2f64.sqrt() * st.mean[r].re;
    let sum = set.summary("l5").unwrap();
    let se = (sum.cov[(0, 0)].re / 200.0).sqrt();
    assert!(
        (sum.mean[0] - expect_i).abs() < 4.0 * se,
        "mean {} vs {} (se {se})",
        sum.mean[0],
        expect_i
    );
}
