//! Small dense complex linear algebra used throughout the crate.
//!
//! The matrices appearing in the cumulant description of a measurement chain
//! are tiny (2R x 2R with R the total mode count, typically R <= 6), so
//! everything here is a straightforward dense implementation: LU with partial
//! pivoting, a complex Hessenberg-QR eigensolver with Schur vector
//! accumulation, cyclic Jacobi for Hermitian matrices, and a scaling-and-
//! squaring matrix exponential.

use num_complex::Complex64 as C64;

use crate::error::{CoreError, Result};

/// Column vector of complex entries.
pub type CVec = Vec<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<C64>,
}

impl std::fmt::Debug for CMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4e}{:+.4e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![C64::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = cr(1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row slices; panics on ragged input.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let mut m = CMat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, z) in row.iter().enumerate() {
                m[(i, j)] = *z;
            }
        }
        m
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conjugate(&self) -> CMat {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn scale(&self, s: C64) -> CMat {
        self.map(|z| z * s)
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> CVec {
        assert_eq!(self.cols, v.len());
        let mut out = vec![C64::ZERO; self.rows];
        for i in 0..self.rows {
            let mut acc = C64::ZERO;
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Extracts the block with row range `r` and column range `c`.
    pub fn block(&self, r: std::ops::Range<usize>, c: std::ops::Range<usize>) -> CMat {
        CMat::from_fn(r.len(), c.len(), |i, j| self[(r.start + i, c.start + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &CMat) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    /// Kronecker product, consistent with row-major vectorization:
    /// vec(A X B^T) = (A kron B) vec(X).
    pub fn kron(&self, other: &CMat) -> CMat {
        let mut out = CMat::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == C64::ZERO {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum column sum of absolute values.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Symmetric part (unconjugated transpose).
    pub fn symmetrize(&self) -> CMat {
        self.add(&self.transpose()).scale(cr(0.5))
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<Lu> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign_swaps = 0usize;
        for k in 0..n {
            let mut p = k;
            let mut best = a[(k, k)].norm();
            for i in k + 1..n {
                let v = a[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(CoreError::SingularMatrix { size: n, pivot: k });
            }
            if p != k {
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(p, j)];
                    a[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign_swaps += 1;
            }
            let piv = a[(k, k)];
            for i in k + 1..n {
                let m = a[(i, k)] / piv;
                a[(i, k)] = m;
                if m != C64::ZERO {
                    for j in k + 1..n {
                        let akj = a[(k, j)];
                        a[(i, j)] -= m * akj;
                    }
                }
            }
        }
        Ok(Lu { lu: a, perm, sign_swaps })
    }

    pub fn solve_vec(&self, b: &[C64]) -> Result<CVec> {
        self.lu().map(|f| f.solve_vec(b))
    }

    pub fn solve_mat(&self, b: &CMat) -> Result<CMat> {
        self.lu().map(|f| f.solve_mat(b))
    }

    pub fn inverse(&self) -> Result<CMat> {
        self.solve_mat(&CMat::identity(self.rows))
    }

    pub fn determinant(&self) -> C64 {
        match self.lu() {
            Err(_) => C64::ZERO,
            Ok(f) => {
                let mut d = if f.sign_swaps % 2 == 0 { cr(1.0) } else { cr(-1.0) };
                for i in 0..f.lu.rows {
                    d *= f.lu[(i, i)];
                }
                d
            }
        }
    }

    /// Eigenvalues of a general complex matrix.
    pub fn eigenvalues(&self) -> Result<CVec> {
        Ok(self.schur()?.eigenvalues)
    }

    /// Full eigendecomposition A V = V diag(lambda) of a general complex
    /// matrix; eigenvector columns are normalized.
    pub fn eigendecomposition(&self) -> Result<Eig> {
        let schur = self.schur()?;
        let n = self.rows;
        let t = &schur.t;
        // Back-substitution on the triangular factor, one eigenvector per
        // eigenvalue, then rotate back with the Schur basis.
        let tnorm = t.norm_fro().max(f64::MIN_POSITIVE);
        let mut y = CMat::zeros(n, n);
        for k in 0..n {
            let lam = t[(k, k)];
            y[(k, k)] = cr(1.0);
            for i in (0..k).rev() {
                let mut s = C64::ZERO;
                for j in i + 1..=k {
                    s += t[(i, j)] * y[(j, k)];
                }
                let mut den = t[(i, i)] - lam;
                if den.norm() < 1e-300 + 1e-14 * tnorm {
                    den = cr(1e-14 * tnorm.max(1e-300));
                }
                y[(i, k)] = -s / den;
            }
        }
        let mut v = schur.z.matmul(&y);
        for k in 0..n {
            let nrm = (0..n).map(|i| v[(i, k)].norm_sqr()).sum::<f64>().sqrt();
            if nrm > 0.0 {
                for i in 0..n {
                    v[(i, k)] = v[(i, k)] / nrm;
                }
            }
        }
        Ok(Eig { values: schur.eigenvalues, vectors: v })
    }

    /// Complex Schur decomposition A = Z T Z^dagger (T upper triangular)
    /// via Hessenberg reduction and shifted QR with Givens rotations.
    pub fn schur(&self) -> Result<Schur> {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return Ok(Schur { t: self.clone(), z: self.clone(), eigenvalues: vec![] });
        }
        let (mut h, mut z) = self.hessenberg();
        let eps = f64::EPSILON;
        let mut hi = n - 1;
        let mut iters_at_hi = 0usize;
        let max_total = 60 * n.max(4);
        let mut total = 0usize;
        while hi > 0 {
            // Deflate converged subdiagonals.
            let mut lo = hi;
            while lo > 0 {
                let off = h[(lo, lo - 1)].norm();
                let diag = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
                if off <= eps * diag.max(f64::MIN_POSITIVE * 1e10) || off == 0.0 {
                    h[(lo, lo - 1)] = C64::ZERO;
                    break;
                }
                lo -= 1;
            }
            if lo == hi {
                hi -= 1;
                iters_at_hi = 0;
                continue;
            }
            total += 1;
            iters_at_hi += 1;
            if total > max_total {
                return Err(CoreError::EigenFailure { size: n });
            }
            // Wilkinson shift from the trailing 2x2 block, with an occasional
            // exceptional shift to break symmetry stalls.
            let shift = if iters_at_hi % 17 == 0 {
                h[(hi, hi)] + cr(0.75) * h[(hi, hi - 1)].norm()
            } else {
                let a = h[(hi - 1, hi - 1)];
                let b = h[(hi - 1, hi)];
                let cc = h[(hi, hi - 1)];
                let d = h[(hi, hi)];
                let tr2 = (a + d) * cr(0.5);
                let disc = ((a - d) * cr(0.5)).powu(2) + b * cc;
                let sq = disc.sqrt();
                let m1 = tr2 + sq;
                let m2 = tr2 - sq;
                if (m1 - d).norm() <= (m2 - d).norm() {
                    m1
                } else {
                    m2
                }
            };
            // One implicit shifted QR step on the active block [lo, hi]:
            // create the bulge from the shifted first column, then chase it
            // down by completed Givens similarities.
            for k in lo..hi {
                let (x, yv) = if k == lo {
                    (h[(lo, lo)] - shift, h[(lo + 1, lo)])
                } else {
                    (h[(k, k - 1)], h[(k + 1, k - 1)])
                };
                let (cs, sn) = givens(x, yv);
                // Left-apply G = [[c, s], [-conj(s), c]] to rows k, k+1.
                for j in k.saturating_sub(1)..n {
                    let t1 = h[(k, j)];
                    let t2 = h[(k + 1, j)];
                    h[(k, j)] = cr(cs) * t1 + sn * t2;
                    h[(k + 1, j)] = -sn.conj() * t1 + cr(cs) * t2;
                }
                if k > lo {
                    h[(k + 1, k - 1)] = C64::ZERO;
                }
                // Right-apply G^dagger to columns k, k+1 and accumulate Z.
                let imax = (k + 2).min(hi) + 1;
                for i in 0..imax {
                    let t1 = h[(i, k)];
                    let t2 = h[(i, k + 1)];
                    h[(i, k)] = t1 * cr(cs) + t2 * sn.conj();
                    h[(i, k + 1)] = -t1 * sn + t2 * cr(cs);
                }
                for i in 0..n {
                    let t1 = z[(i, k)];
                    let t2 = z[(i, k + 1)];
                    z[(i, k)] = t1 * cr(cs) + t2 * sn.conj();
                    z[(i, k + 1)] = -t1 * sn + t2 * cr(cs);
                }
            }
        }
        let eigenvalues = (0..n).map(|i| h[(i, i)]).collect();
        // Clean the numerically-zero lower triangle.
        for i in 0..n {
            for j in 0..i {
                h[(i, j)] = C64::ZERO;
            }
        }
        Ok(Schur { t: h, z, eigenvalues })
    }

    /// Householder reduction to upper Hessenberg form, returning (H, Q) with
    /// A = Q H Q^dagger.
    fn hessenberg(&self) -> (CMat, CMat) {
        let n = self.rows;
        let mut h = self.clone();
        let mut q = CMat::identity(n);
        if n < 3 {
            return (h, q);
        }
        for k in 0..n - 2 {
            // Build the Householder vector annihilating column k below k+1.
            let mut x: CVec = (k + 1..n).map(|i| h[(i, k)]).collect();
            let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if xnorm == 0.0 {
                continue;
            }
            let alpha = if x[0].norm() == 0.0 {
                cr(-xnorm)
            } else {
                -(x[0] / x[0].norm()) * xnorm
            };
            x[0] -= alpha;
            let vnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if vnorm == 0.0 {
                continue;
            }
            for z in x.iter_mut() {
                *z = *z / vnorm;
            }
            // H <- P H P with P = I - 2 v v^dagger acting on rows/cols k+1..n.
            for j in 0..n {
                let mut dot = C64::ZERO;
                for (idx, i) in (k + 1..n).enumerate() {
                    dot += x[idx].conj() * h[(i, j)];
                }
                dot *= cr(2.0);
                for (idx, i) in (k + 1..n).enumerate() {
                    let d = x[idx] * dot;
                    h[(i, j)] -= d;
                }
            }
            for i in 0..n {
                let mut dot = C64::ZERO;
                for (idx, j) in (k + 1..n).enumerate() {
                    dot += h[(i, j)] * x[idx];
                }
                dot *= cr(2.0);
                for (idx, j) in (k + 1..n).enumerate() {
                    let d = dot * x[idx].conj();
                    h[(i, j)] -= d;
                }
            }
            for i in 0..n {
                let mut dot = C64::ZERO;
                for (idx, j) in (k + 1..n).enumerate() {
                    dot += q[(i, j)] * x[idx];
                }
                dot *= cr(2.0);
                for (idx, j) in (k + 1..n).enumerate() {
                    let d = dot * x[idx].conj();
                    q[(i, j)] -= d;
                }
            }
        }
        (h, q)
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    /// Returns ascending real eigenvalues and the unitary of eigenvectors.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, CMat) {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut v = CMat::identity(n);
        let tol = 1e-14 * self.norm_fro().max(1e-300);
        for _sweep in 0..60 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= tol {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    let g = apq.norm();
                    if g <= tol * 1e-2 {
                        continue;
                    }
                    let phase = apq / g;
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let tau = (aqq - app) / (2.0 * g);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let cs = 1.0 / (1.0 + t * t).sqrt();
                    let sn = t * cs;
                    // Unitary J: J[p][p]=c, J[p][q]=s*phase, J[q][p]=-s*conj(phase), J[q][q]=c.
                    for i in 0..n {
                        let aip = a[(i, p)];
                        let aiq = a[(i, q)];
                        a[(i, p)] = aip * cr(cs) - aiq * sn * phase.conj();
                        a[(i, q)] = aip * sn * phase + aiq * cr(cs);
                    }
                    for j in 0..n {
                        let apj = a[(p, j)];
                        let aqj = a[(q, j)];
                        a[(p, j)] = cr(cs) * apj - sn * phase * aqj;
                        a[(q, j)] = sn * phase.conj() * apj + cr(cs) * aqj;
                    }
                    for i in 0..n {
                        let vip = v[(i, p)];
                        let viq = v[(i, q)];
                        v[(i, p)] = vip * cr(cs) - viq * sn * phase.conj();
                        v[(i, q)] = vip * sn * phase + viq * cr(cs);
                    }
                }
            }
        }
        let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (a[(i, i)].re, i)).collect();
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let vectors = CMat::from_fn(n, n, |i, j| v[(i, pairs[j].1)]);
        (values, vectors)
    }

    /// Matrix exponential. Uses diagonalization when the eigenbasis is well
    /// conditioned (estimate below 1e12) and falls back to Pade scaling and
    /// squaring otherwise. Returns the fallback flag with the result.
    pub fn expm(&self) -> (CMat, bool) {
        if let Ok(eig) = self.eigendecomposition() {
            if let Ok(vinv) = eig.vectors.inverse() {
                let cond = eig.vectors.norm_1() * vinv.norm_1();
                if cond < 1e12 {
                    let n = self.rows;
                    let mut d = CMat::zeros(n, n);
                    for i in 0..n {
                        d[(i, i)] = eig.values[i].exp();
                    }
                    let out = eig.vectors.matmul(&d).matmul(&vinv);
                    // Reject if reconstruction of A itself is poor.
                    let mut lam = CMat::zeros(n, n);
                    for i in 0..n {
                        lam[(i, i)] = eig.values[i];
                    }
                    let recon = eig.vectors.matmul(&lam).matmul(&vinv);
                    if recon.sub(self).norm_fro() <= 1e-10 * self.norm_fro().max(1.0) {
                        return (out, false);
                    }
                }
            }
        }
        (self.expm_pade(), true)
    }

    /// Pade-13 scaling-and-squaring exponential.
    pub fn expm_pade(&self) -> CMat {
        let n = self.rows;
        const B: [f64; 14] = [
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ];
        const THETA13: f64 = 5.371920351148152;
        let nrm = self.norm_1();
        let s = if nrm > THETA13 {
            (nrm / THETA13).log2().ceil().max(0.0) as u32
        } else {
            0
        };
        let a = self.scale(cr(1.0 / (2f64.powi(s as i32))));
        let a2 = a.matmul(&a);
        let a4 = a2.matmul(&a2);
        let a6 = a4.matmul(&a2);
        let idm = CMat::identity(n);
        let u_inner = a6
            .scale(cr(B[13]))
            .add(&a4.scale(cr(B[11])))
            .add(&a2.scale(cr(B[9])));
        let u = a.matmul(
            &a6.matmul(&u_inner)
                .add(&a6.scale(cr(B[7])))
                .add(&a4.scale(cr(B[5])))
                .add(&a2.scale(cr(B[3])))
                .add(&idm.scale(cr(B[1]))),
        );
        let v_inner = a6
            .scale(cr(B[12]))
            .add(&a4.scale(cr(B[10])))
            .add(&a2.scale(cr(B[8])));
        let v = a6
            .matmul(&v_inner)
            .add(&a6.scale(cr(B[6])))
            .add(&a4.scale(cr(B[4])))
            .add(&a2.scale(cr(B[2])))
            .add(&idm.scale(cr(B[0])));
        let num = v.add(&u);
        let den = v.sub(&u);
        let mut r = den.solve_mat(&num).expect("Pade denominator is singular");
        for _ in 0..s {
            r = r.matmul(&r);
        }
        r
    }
}

/// LU factors with the permutation applied during elimination.
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
    sign_swaps: usize,
}

impl Lu {
    pub fn solve_vec(&self, b: &[C64]) -> CVec {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut y: CVec = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                let lij = self.lu[(i, j)];
                let yj = y[j];
                y[i] -= lij * yj;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let uij = self.lu[(i, j)];
                let yj = y[j];
                y[i] -= uij * yj;
            }
            y[i] /= self.lu[(i, i)];
        }
        y
    }

    pub fn solve_mat(&self, b: &CMat) -> CMat {
        let mut out = CMat::zeros(b.rows, b.cols);
        for j in 0..b.cols {
            let col: CVec = (0..b.rows).map(|i| b[(i, j)]).collect();
            let x = self.solve_vec(&col);
            for i in 0..b.rows {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    /// Smallest pivot magnitude relative to the largest, a cheap singularity
    /// indicator.
    pub fn pivot_ratio(&self) -> f64 {
        let n = self.lu.rows;
        let mut mn = f64::INFINITY;
        let mut mx: f64 = 0.0;
        for i in 0..n {
            let v = self.lu[(i, i)].norm();
            mn = mn.min(v);
            mx = mx.max(v);
        }
        if mx == 0.0 {
            0.0
        } else {
            mn / mx
        }
    }
}

pub struct Schur {
    pub t: CMat,
    pub z: CMat,
    pub eigenvalues: CVec,
}

pub struct Eig {
    pub values: CVec,
    pub vectors: CMat,
}

/// Complex Givens rotation zeroing the second entry: with c real,
/// [[c, s], [-conj(s), c]] . [a; b] = [r; 0].
fn givens(a: C64, b: C64) -> (f64, C64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, C64::ZERO);
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let h = (an * an + bn * bn).sqrt();
    let cs = an / h;
    let sn = (a / an) * b.conj() / h;
    (cs, sn)
}

/// Solves the continuous Lyapunov equation J C + C J^T + B = 0 for C by a
/// dense solve of the vectorized system. The unconjugated transpose is used
/// throughout, matching the normal-ordered covariance convention.
pub fn solve_lyapunov(j: &CMat, b: &CMat) -> Result<CMat> {
    assert!(j.is_square() && b.rows == j.rows && b.cols == j.cols);
    let n = j.rows;
    let idm = CMat::identity(n);
    let op = j.kron(&idm).add(&idm.kron(j));
    let rhs: CVec = b.data().iter().map(|z| -z).collect();
    let lu = op.lu().map_err(|_| CoreError::SingularSylvester { min_pair_sum: 0.0 })?;
    if lu.pivot_ratio() < 1e-14 {
        let min_pair = match j.eigenvalues() {
            Ok(ev) => {
                let mut m = f64::INFINITY;
                for x in &ev {
                    for y in &ev {
                        m = m.min((x + y).norm());
                    }
                }
                m
            }
            Err(_) => 0.0,
        };
        return Err(CoreError::SingularSylvester { min_pair_sum: min_pair });
    }
    let x = lu.solve_vec(&rhs);
    let mut out = CMat::zeros(n, n);
    out.data_mut().copy_from_slice(&x);
    Ok(out)
}

/// Relative residual |J C + C J^T + B|_F / |B|_F.
pub fn lyapunov_residual(j: &CMat, c: &CMat, b: &CMat) -> f64 {
    let r = j.matmul(c).add(&c.matmul(&j.transpose())).add(b);
    let denom = b.norm_fro();
    if denom == 0.0 {
        r.norm_fro()
    } else {
        r.norm_fro() / denom
    }
}
