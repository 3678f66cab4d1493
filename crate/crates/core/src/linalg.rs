//! Dense real linear algebra: one-sided Jacobi SVD, Householder QR that
//! follows the sparsity profile of the sampling matrix, and a complete
//! orthogonal decomposition for rank-deficient least squares.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, got: bad.len() });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a != T::zero() {
                    axpy(a, other.row(k), out.row_mut(i));
                }
            }
        }
        Ok(out)
    }

    /// `A·x`.
    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: x.len() });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `Aᵀ·y`.
    pub fn tmul_vec(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, got: y.len() });
        }
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != T::zero() {
                axpy(yi, self.row(i), &mut out);
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> T {
        dot(&self.data, &self.data).sqrt()
    }

    /// Column-major copy of the entries.
    fn to_col_major(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.data.len()];
        for i in 0..self.rows {
            for (j, &v) in self.row(i).iter().enumerate() {
                out[j * self.rows + i] = v;
            }
        }
        out
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s = s + *x * *y;
    }
    s
}

/// `y += alpha·x`.
#[inline]
pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

fn norm2<T: Scalar>(x: &[T]) -> T {
    let scale = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let s: T = x.iter().map(|&v| (v / scale) * (v / scale)).sum();
    scale * s.sqrt()
}

/// Turns `x` into `[β, v₁, …]` with `(I - τ·v·vᵀ)·x = β·e₁`, `v₀ = 1`.
/// Returns `τ` (zero when `x` is already a multiple of `e₁`).
fn householder<T: Scalar>(x: &mut [T]) -> T {
    let alpha = x[0];
    let xnorm = norm2(&x[1..]);
    if xnorm == T::zero() {
        return T::zero();
    }
    let mut beta = alpha.hypot(xnorm);
    if alpha >= T::zero() {
        beta = -beta;
    }
    let tau = (beta - alpha) / beta;
    let scale = T::one() / (alpha - beta);
    for v in &mut x[1..] {
        *v = *v * scale;
    }
    x[0] = beta;
    tau
}

/// Applies `I - τ·v·vᵀ` (with `v = [1, tail]`) to `target`.
#[inline]
fn apply_householder<T: Scalar>(tail: &[T], tau: T, target: &mut [T]) {
    let (head, rest) = target.split_first_mut().expect("non-empty target");
    let s = tau * (*head + dot(tail, rest));
    if s == T::zero() {
        return;
    }
    *head = *head - s;
    axpy(-s, tail, rest);
}

/// Thin singular value decomposition `A = U·diag(s)·Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    /// `rows × k` with orthonormal columns, `k = min(rows, cols)`.
    pub u: DenseMatrix<T>,
    /// Descending.
    pub s: Vec<T>,
    /// `cols × k` with orthonormal columns.
    pub v: DenseMatrix<T>,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd<T: Scalar>(a: &DenseMatrix<T>) -> Result<Svd<T>> {
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if a.rows >= a.cols {
        jacobi_tall(a.rows, a.cols, a.to_col_major())
    } else {
        // The rows of A are the columns of Aᵀ.
        let t = jacobi_tall(a.cols, a.rows, a.data.clone())?;
        Ok(Svd { u: t.v, s: t.s, v: t.u })
    }
}

fn jacobi_tall<T: Scalar>(m: usize, n: usize, mut w: Vec<T>) -> Result<Svd<T>> {
    let mut v = vec![T::zero(); n * n];
    for j in 0..n {
        v[j * n + j] = T::one();
    }
    let eps = T::epsilon();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (lo, hi) = w.split_at_mut(q * m);
                let cp = &mut lo[p * m..(p + 1) * m];
                let cq = &mut hi[..m];
                let alpha = dot(cp, cp);
                let beta = dot(cq, cq);
                let gamma = dot(cp, cq);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(cp, cq, c, s);
                let (vlo, vhi) = v.split_at_mut(q * n);
                rotate(&mut vlo[p * n..(p + 1) * n], &mut vhi[..n], c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(T, usize)> = (0..n).map(|j| (norm2(&w[j * m..(j + 1) * m]), j)).collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite norms"));
    let mut u = DenseMatrix::zeros(m, n);
    let mut vv = DenseMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &(sigma, j)) in order.iter().enumerate() {
        s.push(sigma);
        for i in 0..n {
            vv.set(i, k, v[j * n + i]);
        }
        if sigma > T::zero() {
            for i in 0..m {
                u.set(i, k, w[j * m + i] / sigma);
            }
        } else {
            missing.push(k);
        }
    }
    complete_columns(&mut u, &missing);
    Ok(Svd { u, s, v: vv })
}

fn rotate<T: Scalar>(x: &mut [T], y: &mut [T], c: T, s: T) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Fills the listed zero columns of `u` with unit vectors orthogonal to
/// every other column (Gram–Schmidt on the canonical basis).
fn complete_columns<T: Scalar>(u: &mut DenseMatrix<T>, missing: &[usize]) {
    let (m, k) = (u.rows, u.cols);
    let mut candidate = 0;
    for &col in missing {
        while candidate < m {
            let mut e = vec![T::zero(); m];
            e[candidate] = T::one();
            candidate += 1;
            for _ in 0..2 {
                for other in 0..k {
                    if other == col {
                        continue;
                    }
                    let proj: T = (0..m).map(|i| u.get(i, other) * e[i]).sum();
                    for (i, ei) in e.iter_mut().enumerate() {
                        *ei = *ei - proj * u.get(i, other);
                    }
                }
            }
            let nrm = norm2(&e);
            if nrm > T::lit(0.5) {
                for (i, ei) in e.iter().enumerate() {
                    u.set(i, col, *ei / nrm);
                }
                break;
            }
        }
    }
}

/// How a least-squares problem was solved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveInfo {
    /// `svd`, `qr` or `cod`.
    pub method: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub tol: f64,
    /// Exact for `svd`, estimated otherwise.
    pub sigma_max: f64,
    /// Exact for `svd`, estimated for `qr`; for `cod` the smallest retained
    /// pivot.
    pub sigma_min: f64,
}

impl SolveInfo {
    pub fn condition(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }
}

/// Column count up to which [`LeastSquares`] uses the SVD.
pub const SVD_MAX_COLS: usize = 256;

enum Factor<T> {
    Svd(Svd<T>),
    Qr(ProfileQr<T>),
    CodOnR(ProfileQr<T>, Cod<T>),
    Cod(Cod<T>),
}

/// Factorization for repeated minimum-norm least-squares solves.
pub struct LeastSquares<T> {
    factor: Factor<T>,
    info: SolveInfo,
}

impl<T: Scalar> LeastSquares<T> {
    /// Factors `a`; singular values at most `tol` (default
    /// `max(rows, cols)·ε·σ_max`) are treated as zero.
    pub fn factor(a: &DenseMatrix<T>, tol: Option<T>) -> Result<Self> {
        if a.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(t) = tol {
            if !(t >= T::zero()) {
                return Err(Error::InvalidParameter(format!("tolerance must be non-negative, got {t}")));
            }
        }
        let (m, n) = (a.rows, a.cols);
        let default_tol = |smax: T| T::from_int(m.max(n) as i64) * T::epsilon() * smax;
        if n <= SVD_MAX_COLS || m.min(n) == 0 {
            let f = svd(a)?;
            let smax = f.s.first().copied().unwrap_or(T::zero());
            let tol = tol.unwrap_or_else(|| default_tol(smax));
            let rank = f.s.iter().filter(|&&s| s > tol).count();
            let smin = f.s.last().copied().unwrap_or(T::zero());
            let info = SolveInfo {
                method: "svd",
                rows: m,
                cols: n,
                rank,
                tol: tol.to_f64_lossy(),
                sigma_max: smax.to_f64_lossy(),
                sigma_min: smin.to_f64_lossy(),
            };
            return Ok(Self { factor: Factor::Svd(f), info });
        }
        if m < n {
            let smax = power_sigma_max_dense(a);
            let tol = tol.unwrap_or_else(|| default_tol(smax));
            let cod = Cod::factor(m, n, a.to_col_major(), tol);
            let info = cod.info(m, n, tol, smax);
            return Ok(Self { factor: Factor::Cod(cod), info });
        }
        let qr = ProfileQr::factor(a);
        let smax = qr.sigma_max_estimate();
        let tol = tol.unwrap_or_else(|| default_tol(smax));
        let min_diag = (0..n).map(|k| qr.r(k, k).abs()).fold(T::infinity(), T::min);
        let smin = if min_diag > tol { qr.sigma_min_estimate() } else { T::zero() };
        if smin > tol {
            let info = SolveInfo {
                method: "qr",
                rows: m,
                cols: n,
                rank: n,
                tol: tol.to_f64_lossy(),
                sigma_max: smax.to_f64_lossy(),
                sigma_min: smin.to_f64_lossy(),
            };
            return Ok(Self { factor: Factor::Qr(qr), info });
        }
        let cod = Cod::factor(n, n, qr.r_col_major(), tol);
        let info = cod.info(m, n, tol, smax);
        Ok(Self { factor: Factor::CodOnR(qr, cod), info })
    }

    pub fn info(&self) -> &SolveInfo {
        &self.info
    }

    pub fn solve(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.info.rows {
            return Err(Error::DimensionMismatch { expected: self.info.rows, got: y.len() });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let tol = T::lit(self.info.tol);
        Ok(match &self.factor {
            Factor::Svd(f) => {
                let n = f.v.rows;
                let mut c = vec![T::zero(); n];
                for (k, &s) in f.s.iter().enumerate() {
                    if s <= tol {
                        break;
                    }
                    let coef = (0..f.u.rows).map(|i| f.u.get(i, k) * y[i]).sum::<T>() / s;
                    for (i, ci) in c.iter_mut().enumerate() {
                        *ci = *ci + coef * f.v.get(i, k);
                    }
                }
                c
            }
            Factor::Qr(qr) => qr.solve(y),
            Factor::CodOnR(qr, cod) => {
                let qty = qr.apply_qt(y);
                let z = cod.solve(&qty[..qr.n]);
                qr.unpermute(&z)
            }
            Factor::Cod(cod) => cod.solve(y),
        })
    }
}

/// Minimum-norm least-squares solution `A†y`, with singular values at most
/// `tol` (default `max(rows, cols)·ε·σ_max`) treated as zero.
pub fn pinv_solve<T: Scalar>(a: &DenseMatrix<T>, y: &[T], tol: Option<T>) -> Result<Vec<T>> {
    if y.len() != a.rows {
        return Err(Error::DimensionMismatch { expected: a.rows, got: y.len() });
    }
    LeastSquares::factor(a, tol)?.solve(y)
}

/// Householder QR that only touches the nonzero profile.
///
/// Columns are reordered by their first nonzero row. When rows are sorted by
/// sample position, every column of a sampling matrix is nonzero on a
/// contiguous band of rows, and the reflector for column `k` spans rows
/// `k..=span[k]` only.
struct ProfileQr<T> {
    m: usize,
    n: usize,
    /// Column-major; `R` on and above the diagonal, reflector tails below.
    qr: Vec<T>,
    tau: Vec<T>,
    span: Vec<usize>,
    /// `perm[k]` is the original column stored at position `k`.
    perm: Vec<usize>,
}

impl<T: Scalar> ProfileQr<T> {
    fn factor(a: &DenseMatrix<T>) -> Self {
        let (m, n) = (a.rows, a.cols);
        let mut lo = vec![usize::MAX; n];
        let mut hi = vec![0usize; n];
        for i in 0..m {
            for (j, &v) in a.row(i).iter().enumerate() {
                if v != T::zero() {
                    lo[j] = lo[j].min(i);
                    hi[j] = i;
                }
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by_key(|&j| (lo[j], hi[j], j));
        let mut qr = vec![T::zero(); m * n];
        for i in 0..m {
            let row = a.row(i);
            for (pos, &j) in perm.iter().enumerate() {
                qr[pos * m + i] = row[j];
            }
        }
        let mut lo: Vec<usize> = perm.iter().map(|&j| lo[j]).collect();
        let mut hi: Vec<usize> = perm.iter().map(|&j| hi[j]).collect();
        let mut tau = vec![T::zero(); n];
        let mut span = vec![0usize; n];
        for k in 0..n {
            let hk = hi[k].max(k);
            span[k] = hk;
            let (left, right) = qr.split_at_mut((k + 1) * m);
            let colk = &mut left[k * m + k..=k * m + hk];
            let t = householder(colk);
            tau[k] = t;
            if t == T::zero() {
                continue;
            }
            let v = &colk[1..];
            for j in k + 1..n {
                if lo[j] > hk {
                    break;
                }
                if hi[j] < k {
                    continue;
                }
                let off = (j - k - 1) * m;
                apply_householder(v, t, &mut right[off + k..=off + hk]);
                lo[j] = lo[j].min(k);
                hi[j] = hi[j].max(hk);
            }
        }
        Self { m, n, qr, tau, span, perm }
    }

    fn r(&self, i: usize, k: usize) -> T {
        self.qr[k * self.m + i]
    }

    fn r_col(&self, k: usize) -> &[T] {
        &self.qr[k * self.m..k * self.m + k + 1]
    }

    fn apply_qt(&self, y: &[T]) -> Vec<T> {
        let mut b = y.to_vec();
        for k in 0..self.n {
            let hk = self.span[k];
            let tail = &self.qr[k * self.m + k + 1..=k * self.m + hk];
            apply_householder(tail, self.tau[k], &mut b[k..=hk]);
        }
        b
    }

    /// Solves `R·z = b[..n]` in place.
    fn back_substitute(&self, b: &mut [T]) {
        for k in (0..self.n).rev() {
            let zk = b[k] / self.r(k, k);
            b[k] = zk;
            axpy(-zk, &self.r_col(k)[..k], &mut b[..k]);
        }
    }

    fn unpermute(&self, z: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.n];
        for (pos, &j) in self.perm.iter().enumerate() {
            x[j] = z[pos];
        }
        x
    }

    fn solve(&self, y: &[T]) -> Vec<T> {
        let mut b = self.apply_qt(y);
        self.back_substitute(&mut b[..self.n]);
        self.unpermute(&b[..self.n])
    }

    fn r_mul(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for (k, &xk) in x.iter().enumerate() {
            axpy(xk, self.r_col(k), &mut out[..=k]);
        }
        out
    }

    fn rt_mul(&self, x: &[T]) -> Vec<T> {
        (0..self.n).map(|k| dot(self.r_col(k), &x[..=k])).collect()
    }

    /// Solves `Rᵀ·z = b` in place.
    fn forward_substitute_t(&self, b: &mut [T]) {
        for k in 0..self.n {
            let s = dot(&self.r_col(k)[..k], &b[..k]);
            b[k] = (b[k] - s) / self.r(k, k);
        }
    }

    fn sigma_max_estimate(&self) -> T {
        power_iteration(self.n, |x| self.rt_mul(&self.r_mul(x))).sqrt()
    }

    /// Largest eigenvalue of `(RᵀR)⁻¹` by power iteration; the estimate
    /// approaches `σ_min` from above.
    fn sigma_min_estimate(&self) -> T {
        let lam = power_iteration(self.n, |x| {
            let mut z = x.to_vec();
            self.forward_substitute_t(&mut z);
            self.back_substitute(&mut z);
            z
        });
        if lam.is_finite() && lam > T::zero() {
            T::one() / lam.sqrt()
        } else {
            T::zero()
        }
    }

    fn r_col_major(&self) -> Vec<T> {
        let n = self.n;
        let mut out = vec![T::zero(); n * n];
        for k in 0..n {
            out[k * n..k * n + k + 1].copy_from_slice(self.r_col(k));
        }
        out
    }
}

/// Dominant eigenvalue of a symmetric positive semidefinite operator.
fn power_iteration<T: Scalar>(n: usize, op: impl Fn(&[T]) -> Vec<T>) -> T {
    if n == 0 {
        return T::zero();
    }
    // Fixed, non-degenerate start vector.
    let mut x: Vec<T> = (0..n).map(|i| T::lit(1.0 + 0.5 * ((i as f64) * 0.618_033_988_7).fract())).collect();
    let nrm = norm2(&x);
    x.iter_mut().for_each(|v| *v = *v / nrm);
    let mut lam = T::zero();
    for _ in 0..60 {
        let y = op(&x);
        let ny = norm2(&y);
        if !(ny > T::zero()) || !ny.is_finite() {
            return ny;
        }
        let next = dot(&x, &y);
        x = y.into_iter().map(|v| v / ny).collect();
        if (next - lam).abs() <= T::lit(1e-6) * next.abs() {
            return next.max(lam);
        }
        lam = next;
    }
    lam
}

fn power_sigma_max_dense<T: Scalar>(a: &DenseMatrix<T>) -> T {
    power_iteration(a.cols, |x| a.tmul_vec(&a.mul_vec(x).expect("shape")).expect("shape")).sqrt()
}

/// Complete orthogonal decomposition `A·P = Q·[L 0; 0 0]·Z` from
/// column-pivoted Householder QR followed by an RZ reduction.
struct Cod<T> {
    m: usize,
    n: usize,
    a: Vec<T>,
    tau: Vec<T>,
    rz_tau: Vec<T>,
    jpvt: Vec<usize>,
    rank: usize,
}

impl<T: Scalar> Cod<T> {
    fn factor(m: usize, n: usize, mut a: Vec<T>, tol: T) -> Self {
        let kmax = m.min(n);
        let mut jpvt: Vec<usize> = (0..n).collect();
        let mut vn1: Vec<T> = (0..n).map(|j| norm2(&a[j * m..(j + 1) * m])).collect();
        let mut vn2 = vn1.clone();
        let mut tau = Vec::with_capacity(kmax);
        let tol3z = T::epsilon().sqrt();
        let mut rank = 0;
        for k in 0..kmax {
            let p = (k..n).fold(k, |best, j| if vn1[j] > vn1[best] { j } else { best });
            if p != k {
                for i in 0..m {
                    a.swap(p * m + i, k * m + i);
                }
                jpvt.swap(p, k);
                vn1.swap(p, k);
                vn2.swap(p, k);
            }
            if !(vn1[k] > tol) {
                break;
            }
            let (left, right) = a.split_at_mut((k + 1) * m);
            let colk = &mut left[k * m + k..(k + 1) * m];
            let t = householder(colk);
            tau.push(t);
            rank = k + 1;
            if colk[0].abs() <= tol {
                rank = k;
                break;
            }
            let v = &colk[1..];
            for j in k + 1..n {
                let colj = &mut right[(j - k - 1) * m..(j - k) * m];
                if t != T::zero() {
                    apply_householder(v, t, &mut colj[k..]);
                }
                if vn1[j] != T::zero() {
                    let r = colj[k].abs() / vn1[j];
                    let temp = (T::one() - r * r).max(T::zero());
                    let ratio = vn1[j] / vn2[j];
                    if temp * ratio * ratio <= tol3z {
                        vn1[j] = norm2(&colj[k + 1..]);
                        vn2[j] = vn1[j];
                    } else {
                        vn1[j] = vn1[j] * temp.sqrt();
                    }
                }
            }
        }
        let mut cod = Self { m, n, a, tau, rz_tau: Vec::new(), jpvt, rank };
        cod.reduce_trapezoid();
        cod
    }

    /// Annihilates the block `T[0..r, r..n]` from the right, leaving an upper
    /// triangular `L` in `T[0..r, 0..r]`. Reflector tails overwrite the block.
    fn reduce_trapezoid(&mut self) {
        let (m, n, r) = (self.m, self.n, self.rank);
        self.rz_tau = vec![T::zero(); r];
        if r == n {
            return;
        }
        let extra = n - r;
        let mut u = vec![T::zero(); extra + 1];
        let mut w = vec![T::zero(); r];
        for i in (0..r).rev() {
            u[0] = self.a[i * m + i];
            for j in 0..extra {
                u[j + 1] = self.a[(r + j) * m + i];
            }
            let t = householder(&mut u);
            self.rz_tau[i] = t;
            self.a[i * m + i] = u[0];
            for j in 0..extra {
                self.a[(r + j) * m + i] = u[j + 1];
            }
            if t == T::zero() || i == 0 {
                continue;
            }
            w[..i].copy_from_slice(&self.a[i * m..i * m + i]);
            for j in 0..extra {
                let col = &self.a[(r + j) * m..(r + j) * m + i];
                axpy(u[j + 1], col, &mut w[..i]);
            }
            for p in 0..i {
                self.a[i * m + p] = self.a[i * m + p] - t * w[p];
            }
            for j in 0..extra {
                let s = -t * u[j + 1];
                let col = &mut self.a[(r + j) * m..(r + j) * m + i];
                axpy(s, &w[..i], col);
            }
        }
    }

    fn solve(&self, b: &[T]) -> Vec<T> {
        let (m, n, r) = (self.m, self.n, self.rank);
        let mut b = b.to_vec();
        for (k, &t) in self.tau.iter().enumerate().take(r) {
            apply_householder(&self.a[k * m + k + 1..(k + 1) * m], t, &mut b[k..]);
        }
        let mut z = vec![T::zero(); n];
        z[..r].copy_from_slice(&b[..r]);
        for k in (0..r).rev() {
            let zk = z[k] / self.a[k * m + k];
            z[k] = zk;
            axpy(-zk, &self.a[k * m..k * m + k], &mut z[..k]);
        }
        let extra = n - r;
        for i in 0..r {
            let t = self.rz_tau[i];
            if t == T::zero() {
                continue;
            }
            let mut s = z[i];
            for j in 0..extra {
                s = s + self.a[(r + j) * m + i] * z[r + j];
            }
            s = s * t;
            z[i] = z[i] - s;
            for j in 0..extra {
                z[r + j] = z[r + j] - s * self.a[(r + j) * m + i];
            }
        }
        let mut x = vec![T::zero(); n];
        for (pos, &j) in self.jpvt.iter().enumerate() {
            x[j] = z[pos];
        }
        x
    }

    fn info(&self, rows: usize, cols: usize, tol: T, smax: T) -> SolveInfo {
        let smin = (0..self.rank).map(|k| self.a[k * self.m + k].abs()).fold(T::infinity(), T::min);
        SolveInfo {
            method: "cod",
            rows,
            cols,
            rank: self.rank,
            tol: tol.to_f64_lossy(),
            sigma_max: smax.to_f64_lossy(),
            sigma_min: if self.rank == 0 { 0.0 } else { smin.to_f64_lossy() },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    /// Symmetric eigenvalues by cyclic two-sided Jacobi rotations.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ev
    }

    /// `(AᵀA)⁻¹Aᵀy` by Gaussian elimination with partial pivoting.
    fn normal_equations(a: &DenseMatrix<f64>, y: &[f64]) -> Vec<f64> {
        let n = a.cols();
        let mut g: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| (0..a.rows()).map(|r| a.get(r, i) * a.get(r, j)).sum()).collect())
            .collect();
        let mut rhs: Vec<f64> = (0..n).map(|i| (0..a.rows()).map(|r| a.get(r, i) * y[r]).sum()).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| g[i][k].abs().partial_cmp(&g[j][k].abs()).unwrap()).unwrap();
            g.swap(k, p);
            rhs.swap(k, p);
            for i in k + 1..n {
                let f = g[i][k] / g[k][k];
                for j in k..n {
                    g[i][j] -= f * g[k][j];
                }
                rhs[i] -= f * rhs[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| g[k][j] * x[j]).sum();
            x[k] = (rhs[k] - s) / g[k][k];
        }
        x
    }

    fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den.max(f64::MIN_POSITIVE)
    }

    fn check_svd(a: &DenseMatrix<f64>) {
        let f = svd(a).unwrap();
        let k = a.rows().min(a.cols());
        assert_eq!(f.s.len(), k);
        assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        let us = DenseMatrix::from_fn(a.rows(), k, |i, j| f.u.get(i, j) * f.s[j]);
        let back = us.matmul(&f.v.transpose()).unwrap();
        let resid: f64 = back.data().iter().zip(a.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        assert!(resid <= 1e-12 * a.frobenius_norm().max(1.0), "residual {resid}");
        for q in [&f.u, &f.v] {
            let g = q.transpose().matmul(q).unwrap();
            for i in 0..k {
                for j in 0..k {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((g.get(i, j) - e).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn svd_small_cases() {
        assert_eq!(svd(&DenseMatrix::<f64>::identity(3)).unwrap().s, vec![1.0, 1.0, 1.0]);
        let d = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(svd(&d).unwrap().s, vec![3.0, 2.0]);
        let d = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, -3.0]]).unwrap();
        assert_eq!(svd(&d).unwrap().s, vec![3.0, 2.0]);
        check_svd(&random(5, 3, 1));
        check_svd(&random(3, 5, 2));
        check_svd(&random(40, 17, 3));
        check_svd(&DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap());
        check_svd(&DenseMatrix::<f64>::zeros(4, 2));
    }

    #[test]
    fn svd_matches_eigen_oracle() {
        let a = random(5, 3, 11);
        let ata: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| (0..5).map(|r| a.get(r, i) * a.get(r, j)).sum()).collect()).collect();
        let ev = jacobi_eigenvalues(ata);
        let s = svd(&a).unwrap().s;
        for (sv, e) in s.iter().zip(&ev) {
            assert!((sv * sv - e).abs() < 1e-10);
        }
    }

    #[test]
    fn svd_rejects_non_finite() {
        assert!(DenseMatrix::new(1, 1, vec![f64::NAN]).is_err());
        let bad = DenseMatrix { rows: 1, cols: 1, data: vec![f64::INFINITY] };
        assert_eq!(svd(&bad).unwrap_err(), Error::NonFinite);
    }

    #[test]
    fn pinv_small_examples() {
        let a = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let c: Vec<f64> = pinv_solve(&a, &[1.0, 3.0], None).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-15);
        let y = [0.3, -1.0, 7.5];
        let c = pinv_solve(&DenseMatrix::identity(3), &y, None).unwrap();
        assert_eq!(c, y.to_vec());
        assert!(matches!(pinv_solve(&a, &[1.0], None), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn pinv_matches_normal_equations() {
        for seed in 0..10 {
            let a = random(20, 5, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let y: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c = pinv_solve(&a, &y, None).unwrap();
            assert!(rel_diff(&c, &normal_equations(&a, &y)) < 1e-8);
        }
    }

    #[test]
    fn zero_column_gets_zero_coefficient() {
        let mut a = random(12, 4, 5);
        for i in 0..12 {
            a.set(i, 2, 0.0);
        }
        let y: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let c = pinv_solve(&a, &y, None).unwrap();
        assert_eq!(c[2], 0.0);
    }

    /// Banded sampling-like matrix: each column is supported on a window of
    /// rows, rows sorted by position.
    fn banded(rows: usize, cols: usize, width: usize, seed: u64) -> DenseMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DenseMatrix::zeros(rows, cols);
        for j in 0..cols {
            let start = j * (rows - width) / cols.max(1);
            for i in start..(start + width).min(rows) {
                a.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        a
    }

    #[test]
    fn profile_qr_matches_svd() {
        let a = banded(900, 300, 120, 9);
        let c_true: Vec<f64> = (0..300).map(|i| ((i * 37 % 101) as f64) / 50.0 - 1.0).collect();
        let y = a.mul_vec(&c_true).unwrap();
        let ls = LeastSquares::factor(&a, None).unwrap();
        assert_eq!(ls.info().method, "qr");
        assert_eq!(ls.info().rank, 300);
        let c = ls.solve(&y).unwrap();
        assert!(rel_diff(&c, &c_true) < 1e-10);

        // Least-squares residual must match the SVD route.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<f64> = (0..900).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = ls.solve(&y).unwrap();
        let reference = jacobi_tall(900, 300, a.to_col_major()).unwrap();
        let mut c_ref = vec![0.0; 300];
        for k in 0..300 {
            let coef: f64 = (0..900).map(|i| reference.u.get(i, k) * y[i]).sum::<f64>() / reference.s[k];
            for i in 0..300 {
                c_ref[i] += coef * reference.v.get(i, k);
            }
        }
        assert!(rel_diff(&c, &c_ref) < 1e-9);
        let smax = reference.s[0];
        let smin = reference.s[299];
        assert!((ls.info().sigma_max / smax - 1.0).abs() < 1e-3);
        assert!((ls.info().sigma_min / smin - 1.0).abs() < 1e-2);
    }

    #[test]
    fn rank_deficient_large_is_minimum_norm() {
        let mut a = banded(700, 280, 100, 21);
        // Duplicate a column: c and its twin share the weight equally.
        for i in 0..700 {
            let v = a.get(i, 10);
            a.set(i, 200, v);
        }
        let mut c_true = vec![0.0; 280];
        c_true[10] = 2.0;
        c_true[50] = -1.0;
        let y = a.mul_vec(&c_true).unwrap();
        let ls = LeastSquares::factor(&a, None).unwrap();
        assert_eq!(ls.info().method, "cod");
        assert_eq!(ls.info().rank, 279);
        let c = ls.solve(&y).unwrap();
        assert!((c[10] - 1.0).abs() < 1e-9 && (c[200] - 1.0).abs() < 1e-9);
        assert!((c[50] + 1.0).abs() < 1e-9);
        let fitted = a.mul_vec(&c).unwrap();
        assert!(rel_diff(&fitted, &y) < 1e-10);
    }

    #[test]
    fn wide_systems_use_cod() {
        let a = random(260, 300, 8);
        let y: Vec<f64> = (0..260).map(|i| (i as f64).sin()).collect();
        let ls = LeastSquares::factor(&a, None).unwrap();
        assert_eq!(ls.info().method, "cod");
        let c = ls.solve(&y).unwrap();
        assert!(rel_diff(&a.mul_vec(&c).unwrap(), &y) < 1e-10);
        // Minimum norm: c lies in the row space, c = Aᵀw.
        let w = pinv_solve(&a.matmul(&a.transpose()).unwrap(), &y, None).unwrap();
        assert!(rel_diff(&c, &a.tmul_vec(&w).unwrap()) < 1e-8);
    }

    #[test]
    fn explicit_tolerance_truncates() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1e-6]]).unwrap();
        let c = pinv_solve(&a, &[1.0, 1.0], Some(1e-3)).unwrap();
        assert_eq!(c, vec![1.0, 0.0]);
        assert!(pinv_solve(&a, &[1.0, 1.0], Some(-1.0)).is_err());
    }

    #[test]
    fn single_precision_svd() {
        let a = DenseMatrix::<f32>::from_rows(&[vec![4.0, 0.0], vec![3.0, 0.0]]).unwrap();
        let s = svd(&a).unwrap().s;
        assert!((s[0] - 5.0).abs() < 1e-5 && s[1] == 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn full_rank_round_trip(seed in 0u64..10_000, rows in 4usize..30, extra in 0usize..4) {
                let cols = (rows / 2).max(1).saturating_sub(extra).max(1);
                let a = random(rows, cols, seed);
                let c: Vec<f64> = (0..cols).map(|i| (i as f64 * 0.7).cos()).collect();
                let y = a.mul_vec(&c).unwrap();
                let got = pinv_solve(&a, &y, None).unwrap();
                let fitted = a.mul_vec(&got).unwrap();
                prop_assert!(rel_diff(&fitted, &y) < 1e-10);
            }
        }
    }
}
