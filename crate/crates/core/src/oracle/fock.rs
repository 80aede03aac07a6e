//! Dense Fock-space master-equation steady states for one- and two-mode
//! chains, plus a brute-force Chernoff-exponent evaluator on density
//! matrices. These are the ground-truth references for the cumulant solvers
//! and for the Gaussian discrimination-bound formulas.

use num_complex::Complex64 as C64;

use crate::chain::ChainSpec;
use crate::error::{CoreError, Result};
use crate::linalg::{c, cr, CMat, CVec, I};
use crate::oracle::KerrParams;

/// Minimal sparse complex matrix in triplet form with CSR conversion; only
/// what Liouvillian assembly needs.
#[derive(Debug, Clone)]
pub struct SpMat {
    pub rows: usize,
    pub cols: usize,
    trip: Vec<(usize, usize, C64)>,
}

impl SpMat {
    pub fn new(rows: usize, cols: usize) -> Self {
        SpMat { rows, cols, trip: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SpMat::new(n, n);
        for i in 0..n {
            m.push(i, i, cr(1.0));
        }
        m
    }

    /// Annihilation operator on a Fock space of dimension `dim`.
    pub fn annihilation(dim: usize) -> Self {
        let mut m = SpMat::new(dim, dim);
        for n in 1..dim {
            m.push(n - 1, n, cr((n as f64).sqrt()));
        }
        m
    }

    pub fn push(&mut self, i: usize, j: usize, v: C64) {
        debug_assert!(i < self.rows && j < self.cols);
        if v != C64::ZERO {
            self.trip.push((i, j, v));
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        SpMat {
            rows: self.rows,
            cols: self.cols,
            trip: self.trip.iter().map(|&(i, j, v)| (i, j, v * s)).collect(),
        }
    }

    pub fn add(&self, other: &SpMat) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut trip = self.trip.clone();
        trip.extend_from_slice(&other.trip);
        SpMat { rows: self.rows, cols: self.cols, trip }
    }

    pub fn adjoint(&self) -> Self {
        SpMat {
            rows: self.cols,
            cols: self.rows,
            trip: self.trip.iter().map(|&(i, j, v)| (j, i, v.conj())).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        SpMat {
            rows: self.cols,
            cols: self.rows,
            trip: self.trip.iter().map(|&(i, j, v)| (j, i, v)).collect(),
        }
    }

    pub fn conjugate(&self) -> Self {
        SpMat {
            rows: self.rows,
            cols: self.cols,
            trip: self.trip.iter().map(|&(i, j, v)| (i, j, v.conj())).collect(),
        }
    }

    pub fn kron(&self, other: &SpMat) -> Self {
        let mut out = SpMat::new(self.rows * other.rows, self.cols * other.cols);
        for &(i, j, a) in &self.trip {
            for &(k, l, b) in &other.trip {
                out.push(i * other.rows + k, j * other.cols + l, a * b);
            }
        }
        out
    }

    pub fn matmul(&self, other: &SpMat) -> Self {
        assert_eq!(self.cols, other.rows);
        // Index other's rows for the product.
        let mut by_row: Vec<Vec<(usize, C64)>> = vec![Vec::new(); other.rows];
        for &(i, j, v) in &other.trip {
            by_row[i].push((j, v));
        }
        let mut out = SpMat::new(self.rows, other.cols);
        for &(i, k, a) in &self.trip {
            for &(j, b) in &by_row[k] {
                out.push(i, j, a * b);
            }
        }
        out.compress()
    }

    /// Merges duplicate entries.
    pub fn compress(&self) -> Self {
        let mut trip = self.trip.clone();
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(trip.len());
        for (i, j, v) in trip {
            if let Some(last) = merged.last_mut() {
                if last.0 == i && last.1 == j {
                    last.2 += v;
                    continue;
                }
            }
            merged.push((i, j, v));
        }
        merged.retain(|&(_, _, v)| v.norm() > 0.0);
        SpMat { rows: self.rows, cols: self.cols, trip: merged }
    }

    pub fn to_csr(&self) -> Csr {
        let m = self.compress();
        let mut indptr = vec![0usize; m.rows + 1];
        for &(i, _, _) in &m.trip {
            indptr[i + 1] += 1;
        }
        for i in 0..m.rows {
            indptr[i + 1] += indptr[i];
        }
        let nnz = m.trip.len();
        let mut indices = vec![0usize; nnz];
        let mut data = vec![C64::ZERO; nnz];
        let mut cursor = indptr.clone();
        for &(i, j, v) in &m.trip {
            indices[cursor[i]] = j;
            data[cursor[i]] = v;
            cursor[i] += 1;
        }
        Csr { rows: m.rows, cols: m.cols, indptr, indices, data }
    }

    pub fn to_dense(&self) -> CMat {
        let mut out = CMat::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.trip {
            out[(i, j)] += v;
        }
        out
    }
}

/// Compressed sparse rows, for fast repeated products.
#[derive(Debug, Clone)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<C64>,
}

impl Csr {
    pub fn matvec_into(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for i in 0..self.rows {
            let mut acc = C64::ZERO;
            for idx in self.indptr[i]..self.indptr[i + 1] {
                acc += self.data[idx] * x[self.indices[idx]];
            }
            out[i] = acc;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> CVec {
        let mut out = vec![C64::ZERO; self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn max_row_abs_sum(&self) -> f64 {
        (0..self.rows)
            .map(|i| (self.indptr[i]..self.indptr[i + 1]).map(|k| self.data[k].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// A Fock-space model: Hamiltonian, collapse operators and per-mode ladder
/// operators on the joint Hilbert space.
pub struct FockChain {
    pub dims: Vec<usize>,
    pub hamiltonian: SpMat,
    /// (rate, operator) pairs; the dissipator rate D[c] enters as given.
    pub collapses: Vec<(f64, SpMat)>,
    /// Annihilation operator of each mode on the joint space.
    pub mode_ops: Vec<SpMat>,
}

impl FockChain {
    /// Single coherently driven Kerr mode with total damping
    /// `params.damping`; matches the drift convention
    /// `d<b>/dt = (i Delta - gamma/2)<b> + i Lambda <b^+bb> - i eta e^{i phi}`.
    pub fn driven_kerr(params: &KerrParams, dim: usize) -> Self {
        let b = SpMat::annihilation(dim);
        let bd = b.adjoint();
        let n = bd.matmul(&b);
        let b2 = b.matmul(&b);
        let kerr = bd.matmul(&bd).matmul(&b2);
        let drive = c(params.drive_phase.cos(), -params.drive_phase.sin()) * cr(params.drive);
        let h = n
            .scale(cr(-params.detuning))
            .add(&kerr.scale(cr(-0.5 * params.kerr)))
            .add(&b.scale(drive))
            .add(&bd.scale(drive.conj()));
        FockChain {
            dims: vec![dim],
            hamiltonian: h.compress(),
            collapses: vec![(params.damping, b.clone())],
            mode_ops: vec![b],
        }
    }

    /// One source mode coupled one-way into one Kerr mode, for a given label
    /// of the chain description. Cutoffs are Fock dimensions per mode.
    pub fn from_chain(spec: &ChainSpec, label: &str, cutoffs: &[usize]) -> Result<Self> {
        if spec.n_source() != 1 || spec.n_kerr() != 1 || cutoffs.len() != 2 {
            return Err(CoreError::DimensionMismatch {
                context: "Fock steady state supports exactly one source and one Kerr mode".into(),
            });
        }
        spec.validate()?;
        let idx = spec.label_index(label)?;
        let lab = &spec.labels[idx];
        let (na, nb) = (cutoffs[0], cutoffs[1]);
        let ia = SpMat::identity(na);
        let ib = SpMat::identity(nb);
        let a = SpMat::annihilation(na).kron(&ib);
        let b = ia.kron(&SpMat::annihilation(nb));
        let ad = a.adjoint();
        let bd = b.adjoint();

        let mut h = SpMat::new(na * nb, na * nb);
        // Source: single-mode squeezing (G/2)(e^{-i phi} a^2 + h.c.) and the
        // drive i eta (a - a^+), matching the drift gauge of `ChainSpec`.
        for t in &lab.squeeze {
            let g = cr(0.5 * t.g) * c(t.phase.cos(), -t.phase.sin());
            let a2 = a.matmul(&a);
            h = h.add(&a2.scale(g)).add(&a2.adjoint().scale(g.conj()));
        }
        let eta = lab.drive[0];
        h = h.add(&a.scale(I * cr(eta))).add(&ad.scale(-I * cr(eta)));
        // Circulator: coherent half (i/2) Gamma (a^+ b - b^+ a) plus the
        // collective dissipator below.
        let hop = spec.source.hop[0];
        if hop > 0.0 {
            let t = ad.matmul(&b);
            h = h.add(&t.scale(I * cr(0.5 * hop))).add(&t.adjoint().scale(-I * cr(0.5 * hop)));
        }
        // Kerr mode: detuning and nonlinearity.
        let nb_op = bd.matmul(&b);
        let b2 = b.matmul(&b);
        let kerr = bd.matmul(&bd).matmul(&b2);
        h = h
            .add(&nb_op.scale(cr(-spec.processor.detuning[0])))
            .add(&kerr.scale(cr(-0.5 * spec.processor.kerr)));

        let mut collapses: Vec<(f64, SpMat)> = Vec::new();
        let nth = lab.thermal.first().copied().unwrap_or(0.0);
        let kappa = spec.source.loss[0];
        if kappa > 0.0 {
            collapses.push((kappa * (nth + 1.0), a.clone()));
            if nth > 0.0 {
                collapses.push((kappa * nth, ad.clone()));
            }
        }
        if hop > 0.0 {
            collapses.push((hop, a.add(&b)));
        }
        if spec.processor.monitor_rate > 0.0 {
            collapses.push((spec.processor.monitor_rate, b.clone()));
        }
        Ok(FockChain {
            dims: vec![na, nb],
            hamiltonian: h.compress(),
            collapses,
            mode_ops: vec![a, b],
        })
    }

    pub fn hilbert_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Assembles the vectorized Liouvillian (row-major vec convention).
    pub fn liouvillian(&self) -> Csr {
        let n = self.hilbert_dim();
        let idn = SpMat::identity(n);
        let mut l = self
            .hamiltonian
            .kron(&idn)
            .scale(-I)
            .add(&idn.kron(&self.hamiltonian.transpose()).scale(I));
        for (rate, cop) in &self.collapses {
            let cd_c = cop.adjoint().matmul(cop);
            l = l
                .add(&cop.kron(&cop.conjugate()).scale(cr(*rate)))
                .add(&cd_c.kron(&idn).scale(cr(-0.5 * rate)))
                .add(&idn.kron(&cd_c.transpose()).scale(cr(-0.5 * rate)));
        }
        l.to_csr()
    }

    /// Steady state of the master equation. Small systems go through a dense
    /// solve of the trace-constrained Liouvillian; larger ones are relaxed in
    /// time with sparse fourth-order steps until the residual is negligible.
    pub fn steady_state(&self) -> Result<FockState> {
        let n = self.hilbert_dim();
        let dim = n * n;
        let lsp = self.liouvillian();
        let rho = if dim <= 4600 {
            self.steady_dense(&lsp)?
        } else {
            self.steady_relaxed(&lsp)?
        };
        let mut state = FockState { rho, dims: self.dims.clone() };
        state.hermitize();
        Ok(state)
    }

    fn steady_dense(&self, lsp: &Csr) -> Result<CMat> {
        let n = self.hilbert_dim();
        let dim = n * n;
        let mut dense = CMat::zeros(dim, dim);
        for i in 0..dim {
            for k in lsp.indptr[i]..lsp.indptr[i + 1] {
                dense[(i, lsp.indices[k])] = lsp.data[k];
            }
        }
        // Replace one redundant row (the trace-preserving combination makes
        // the system rank deficient by one) with the trace constraint.
        for replace_row in [0usize, dim - 1] {
            let mut sys = dense.clone();
            for j in 0..dim {
                sys[(replace_row, j)] = C64::ZERO;
            }
            for d in 0..n {
                sys[(replace_row, d * n + d)] = cr(1.0);
            }
            let mut rhs = vec![C64::ZERO; dim];
            rhs[replace_row] = cr(1.0);
            let x = match sys.solve_vec(&rhs) {
                Ok(x) => x,
                Err(_) => continue,
            };
            let resid = lsp.matvec(&x);
            let rn = resid.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let scale = lsp.max_row_abs_sum().max(1.0);
            if rn <= 1e-9 * scale {
                let mut rho = CMat::zeros(n, n);
                rho.data_mut().copy_from_slice(&x);
                return Ok(rho);
            }
        }
        Err(CoreError::Numerical("Fock steady-state solve failed the residual check".into()))
    }

    fn steady_relaxed(&self, lsp: &Csr) -> Result<CMat> {
        let n = self.hilbert_dim();
        let dim = n * n;
        let dt = 1.2 / lsp.max_row_abs_sum().max(1e-12);
        // Start from the joint vacuum.
        let mut rho = vec![C64::ZERO; dim];
        rho[0] = cr(1.0);
        let mut k1 = vec![C64::ZERO; dim];
        let mut k2 = vec![C64::ZERO; dim];
        let mut k3 = vec![C64::ZERO; dim];
        let mut k4 = vec![C64::ZERO; dim];
        let mut tmp = vec![C64::ZERO; dim];
        let max_steps = 2_000_000usize;
        let mut converged = false;
        let mut last_residual = f64::INFINITY;
        for step in 0..max_steps {
            lsp.matvec_into(&rho, &mut k1);
            for i in 0..dim {
                tmp[i] = rho[i] + cr(0.5 * dt) * k1[i];
            }
            lsp.matvec_into(&tmp, &mut k2);
            for i in 0..dim {
                tmp[i] = rho[i] + cr(0.5 * dt) * k2[i];
            }
            lsp.matvec_into(&tmp, &mut k3);
            for i in 0..dim {
                tmp[i] = rho[i] + cr(dt) * k3[i];
            }
            lsp.matvec_into(&tmp, &mut k4);
            for i in 0..dim {
                rho[i] += cr(dt / 6.0) * (k1[i] + cr(2.0) * (k2[i] + k3[i]) + k4[i]);
            }
            if step % 200 == 199 {
                // Renormalize the trace and test stationarity.
                let tr: C64 = (0..n).map(|d| rho[d * n + d]).sum();
                let trn = tr.norm().max(1e-300);
                for z in rho.iter_mut() {
                    *z = *z / trn;
                }
                lsp.matvec_into(&rho, &mut k1);
                last_residual = k1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if last_residual < 1e-10 {
                    converged = true;
                    break;
                }
            }
        }
        if !converged {
            return Err(CoreError::NonConvergence { residual: last_residual, iterations: max_steps });
        }
        let mut out = CMat::zeros(n, n);
        out.data_mut().copy_from_slice(&rho);
        Ok(out)
    }
}

/// Steady-state density matrix with per-mode dimensions.
pub struct FockState {
    pub rho: CMat,
    pub dims: Vec<usize>,
}

impl FockState {
    fn hermitize(&mut self) {
        let h = self.rho.add(&self.rho.adjoint()).scale(cr(0.5));
        let tr = h.trace();
        self.rho = h.scale(cr(1.0) / tr);
    }

    pub fn expectation(&self, op: &SpMat) -> C64 {
        // tr(O rho) = sum_ij O_ij rho_ji
        let csr = op.to_csr();
        let mut acc = C64::ZERO;
        for i in 0..csr.rows {
            for k in csr.indptr[i]..csr.indptr[i + 1] {
                acc += csr.data[k] * self.rho[(csr.indices[k], i)];
            }
        }
        acc
    }

    /// Normal-ordered moment `<(m^+)^j m^i>` of mode `mode` of the chain it
    /// was built from.
    pub fn moment(&self, op: &SpMat, j: u32, i: u32) -> C64 {
        let mut prod = SpMat::identity(op.rows);
        let opd = op.adjoint();
        for _ in 0..j {
            prod = prod.matmul(&opd);
        }
        for _ in 0..i {
            prod = prod.matmul(op);
        }
        self.expectation(&prod)
    }

    /// Population of the highest Fock level of one mode; must stay below the
    /// requested tolerance for the cutoff to be trusted.
    pub fn tail_population(&self, mode: usize) -> f64 {
        let n = self.rho.rows;
        let mut acc = 0.0;
        for d in 0..n {
            if self.index_of_mode(d, mode) == self.dims[mode] - 1 {
                acc += self.rho[(d, d)].re;
            }
        }
        acc
    }

    pub fn check_tails(&self, limit: f64) -> Result<()> {
        for mode in 0..self.dims.len() {
            let tail = self.tail_population(mode);
            if tail.abs() > limit {
                return Err(CoreError::CutoffTail { mode, tail, limit });
            }
        }
        Ok(())
    }

    fn index_of_mode(&self, joint: usize, mode: usize) -> usize {
        // Row-major joint index: mode 0 is the slowest.
        let mut rem = joint;
        let mut out = 0;
        for (m, _) in self.dims.iter().enumerate() {
            let stride: usize = self.dims[m + 1..].iter().product();
            let q = rem / stride;
            rem %= stride;
            if m == mode {
                out = q;
            }
        }
        debug_assert!(out < self.dims[mode]);
        out
    }

    /// Min eigenvalue and trace, for sanity asserts.
    pub fn spectrum_floor(&self) -> f64 {
        let (vals, _) = self.rho.hermitian_eigen();
        vals.first().copied().unwrap_or(0.0)
    }
}

/// Result of a brute-force Chernoff-bound evaluation.
#[derive(Debug, Clone, Copy)]
pub struct QcbOutcome {
    pub zeta: f64,
    pub s_opt: f64,
    /// Set when the overlap underflowed (near-orthogonal states); `zeta` is
    /// then a finite cap, not a converged value.
    pub capped: bool,
}

/// Brute-force Chernoff exponent -min_s ln tr(rho1^s rho2^{1-s}) by
/// eigendecomposition and a scanned, locally refined s-grid.
pub fn fock_qcb(rho1: &CMat, rho2: &CMat) -> Result<QcbOutcome> {
    for (name, r) in [("first", rho1), ("second", rho2)] {
        let herm = r.sub(&r.adjoint()).norm_fro();
        if herm > 1e-10 * r.norm_fro().max(1.0) {
            return Err(CoreError::InvalidCovariance { reason: format!("{name} state is not Hermitian") });
        }
    }
    let (mut ev1, v1) = rho1.hermitian_eigen();
    let (mut ev2, v2) = rho2.hermitian_eigen();
    for vals in [&mut ev1, &mut ev2] {
        for v in vals.iter_mut() {
            if *v < -1e-10 {
                return Err(CoreError::InvalidCovariance {
                    reason: format!("density matrix has eigenvalue {v:.3e}"),
                });
            }
            *v = v.max(0.0);
        }
    }
    let overlap_amp = v1.adjoint().matmul(&v2);
    let n1 = ev1.len();
    let n2 = ev2.len();
    let overlap: Vec<f64> = overlap_amp.data().iter().map(|z| z.norm_sqr()).collect();
    let q = |s: f64| -> f64 {
        let mut acc = 0.0;
        for i in 0..n1 {
            let li = ev1[i];
            if li == 0.0 && s > 0.0 {
                continue;
            }
            let lis = li.powf(s);
            for j in 0..n2 {
                let mj = ev2[j];
                if mj == 0.0 && s < 1.0 {
                    continue;
                }
                acc += lis * mj.powf(1.0 - s) * overlap[i * n2 + j];
            }
        }
        acc
    };
    // Coarse scan then golden-section refinement around the minimum.
    let grid = 101usize;
    let mut best = (0usize, f64::INFINITY);
    for g in 0..grid {
        let s = g as f64 / (grid - 1) as f64;
        let v = q(s);
        if v < best.1 {
            best = (g, v);
        }
    }
    let lo = if best.0 == 0 { 0.0 } else { (best.0 - 1) as f64 / (grid - 1) as f64 };
    let hi = if best.0 == grid - 1 { 1.0 } else { (best.0 + 1) as f64 / (grid - 1) as f64 };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = q(x1);
    let mut f2 = q(x2);
    for _ in 0..200 {
        if b - a < 1e-8 {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = q(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = q(x2);
        }
    }
    let s_opt = 0.5 * (a + b);
    let qmin = q(s_opt).min(best.1);
    if qmin < 1e-280 {
        return Ok(QcbOutcome { zeta: 644.0, s_opt, capped: true });
    }
    Ok(QcbOutcome { zeta: -qmin.ln(), s_opt, capped: false })
}

/// Builds the Fock representation of a single-mode Gaussian state with
/// quadrature mean `(x, p)` and quadrature covariance `v` (vacuum variance
/// one half convention): thermal core, then squeeze, then displace.
pub fn gaussian_state_fock(mean: [f64; 2], v: &CMat, dim: usize) -> Result<CMat> {
    assert!(v.rows == 2 && v.cols == 2);
    let det = (v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(1, 0)]).re;
    if det < 0.25 - 1e-9 {
        return Err(CoreError::InvalidCovariance {
            reason: format!("symplectic eigenvalue {:.6} below vacuum", det.max(0.0).sqrt()),
        });
    }
    let nu = det.max(0.25).sqrt();
    let nbar = (nu - 0.5).max(0.0);
    // Principal axes of the 2x2 real symmetric covariance.
    let vxx = v[(0, 0)].re;
    let vpp = v[(1, 1)].re;
    let vxp = 0.5 * (v[(0, 1)] + v[(1, 0)]).re;
    let mean_diag = 0.5 * (vxx + vpp);
    let half_diff = 0.5 * (vxx - vpp);
    let rad = (half_diff * half_diff + vxp * vxp).sqrt();
    let v_major = mean_diag + rad;
    let theta = 0.5 * vxp.atan2(half_diff);
    // squeeze parameter from the principal variance, v_major = nu e^{2r}
    let r = 0.5 * (v_major / nu).max(1.0).ln();

    let b = SpMat::annihilation(dim).to_dense();
    let bd = b.adjoint();
    // Thermal core.
    let mut rho = CMat::zeros(dim, dim);
    if nbar < 1e-14 {
        rho[(0, 0)] = cr(1.0);
    } else {
        let ratio = nbar / (1.0 + nbar);
        let mut w = 1.0 / (1.0 + nbar);
        for nlev in 0..dim {
            rho[(nlev, nlev)] = cr(w);
            w *= ratio;
        }
        let tr = rho.trace();
        rho = rho.scale(cr(1.0) / tr);
    }
    // Squeeze with the anti-squeezed axis along theta.
    if r > 1e-14 {
        let phi = 2.0 * theta + std::f64::consts::PI;
        let xi = cr(r) * c(phi.cos(), phi.sin());
        let gen = b.matmul(&b).scale(xi.conj() * cr(0.5)).sub(&bd.matmul(&bd).scale(xi * cr(0.5)));
        let (s, _) = gen.expm();
        rho = s.matmul(&rho).matmul(&s.adjoint());
    }
    // Displace to the requested mean: alpha = (x + i p) / sqrt(2).
    let alpha = c(mean[0], mean[1]) * cr(std::f64::consts::FRAC_1_SQRT_2);
    if alpha.norm() > 1e-14 {
        let gen = bd.scale(alpha).sub(&b.scale(alpha.conj()));
        let (d, _) = gen.expm();
        rho = d.matmul(&rho).matmul(&d.adjoint());
    }
    let tr = rho.trace();
    Ok(rho.scale(cr(1.0) / tr))
}
