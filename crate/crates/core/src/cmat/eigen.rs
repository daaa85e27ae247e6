//! Eigensolvers: cyclic Jacobi for small Hermitian matrices, Householder
//! tridiagonalization + implicit QL for large Hermitian spectra, and
//! Hessenberg reduction + shifted QR for general complex matrices.

use super::{CMatrix, C64};
use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Eigen-decomposition of a Hermitian matrix: `a V = V diag(values)`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Unitary; column `k` belongs to `values[k]`.
    pub vectors: CMatrix,
}

/// Eigenvalues and (unit-norm, generally non-orthogonal) eigenvectors of a
/// general complex matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
}

/// Hermitian eigen-decomposition by cyclic Jacobi rotations.
pub fn eig_herm(a: &CMatrix) -> Result<HermitianEigen> {
    let n = a.dim();
    let scale = a.norm_fro();
    let dev = a.hermitian_deviation();
    if dev > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian(dev));
    }
    let mut m = a.real_part();
    let mut v = CMatrix::identity(n);
    let target = (f64::EPSILON * scale).powi(2);
    let max_sweeps = 80;
    let mut sweeps = 0;
    loop {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum();
        if off <= target || n < 2 {
            break;
        }
        sweeps += 1;
        if sweeps > max_sweeps {
            return Err(Error::EigenNoConvergence(max_sweeps));
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE {
                    continue;
                }
                let alpha = m[(p, p)].re;
                let beta = m[(q, q)].re;
                // Rotation zeroing the real 2x2 [[α, r], [r, β]] after the phase
                // change diag(1, ū), u = apq/|apq|.
                let u = apq / r;
                let theta = (beta - alpha) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let ubar = u.conj();
                // Columns: A <- A J.
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * c - akq * ubar * s;
                    m[(k, q)] = akp * s + akq * ubar * c;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * ubar * s;
                    v[(k, q)] = vkp * s + vkq * ubar * c;
                }
                // Rows: A <- J* A.
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = apk * c - aqk * u * s;
                    m[(q, k)] = apk * s + aqk * u * c;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, |r, c| v[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

trait Field:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
{
    const ZERO: Self;
    fn conj(self) -> Self;
    fn abs(self) -> f64;
    fn real(self) -> f64;
    fn scale(self, x: f64) -> Self;
    /// `-sign(self) · norm` with the phase of `self` (or +norm direction for 0).
    fn reflector_alpha(self, norm: f64) -> Self;
}

impl Field for f64 {
    const ZERO: Self = 0.0;
    fn conj(self) -> Self {
        self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn real(self) -> f64 {
        self
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn reflector_alpha(self, norm: f64) -> Self {
        if self >= 0.0 {
            -norm
        } else {
            norm
        }
    }
}

impl Field for C64 {
    const ZERO: Self = ZERO;
    fn conj(self) -> Self {
        C64::conj(&self)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn real(self) -> f64 {
        self.re
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn reflector_alpha(self, norm: f64) -> Self {
        let r = self.norm();
        if r == 0.0 {
            C64::new(-norm, 0.0)
        } else {
            -(self / r) * norm
        }
    }
}

/// Reduces a Hermitian matrix (row-major, full storage) to real symmetric
/// tridiagonal form; returns the diagonal and the moduli of the subdiagonal.
fn tridiagonalize<T: Field>(a: &mut [T], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut v = vec![T::ZERO; n];
    let mut p = vec![T::ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let off = k + 1;
        let sigma = (off..n).map(|i| a[i * n + k].abs().powi(2)).sum::<f64>().sqrt();
        d[k] = a[k * n + k].real();
        if sigma == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let x0 = a[off * n + k];
        let alpha = x0.reflector_alpha(sigma);
        for i in 0..m {
            v[i] = a[(off + i) * n + k];
        }
        v[0] -= alpha;
        let vnorm2: f64 = v[..m].iter().map(|z| z.abs().powi(2)).sum();
        e[k] = sigma;
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;
        // p = τ A22 v
        for i in 0..m {
            let row = &a[(off + i) * n + off..(off + i) * n + n];
            let mut s = T::ZERO;
            for (aij, vj) in row.iter().zip(&v[..m]) {
                s += *aij * *vj;
            }
            p[i] = s.scale(tau);
        }
        // K = τ/2 v* p (real for Hermitian A22)
        let mut kk = T::ZERO;
        for i in 0..m {
            kk += v[i].conj() * p[i];
        }
        let kk = kk.real() * tau * 0.5;
        for i in 0..m {
            p[i] -= v[i].scale(kk);
        }
        // A22 <- A22 - v w* - w v*
        for i in 0..m {
            let vi = v[i];
            let wi = p[i];
            let row = &mut a[(off + i) * n + off..(off + i) * n + n];
            for j in 0..m {
                row[j] -= vi * p[j].conj() + wi * v[j].conj();
            }
        }
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + n - 2].real();
        e[n - 2] = a[(n - 1) * n + n - 2].abs();
    }
    if n >= 1 {
        d[n - 1] = a[(n - 1) * n + n - 1].real();
        e[n - 1] = 0.0;
    }
    (d, e)
}

/// Eigenvalues of a real symmetric tridiagonal matrix by implicit QL.
/// `e[i]` couples `i` and `i+1`; `e[n-1]` is ignored.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::EigenNoConvergence(iter));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvalues (ascending) of a Hermitian matrix of any size.
///
/// Uses Householder tridiagonalization; real input takes a real-arithmetic
/// path.
pub fn eigvals_herm(a: &CMatrix) -> Result<Vec<f64>> {
    let n = a.dim();
    let dev = a.hermitian_deviation();
    if dev > 1e-12 * a.norm_fro().max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian(dev));
    }
    if a.is_real() {
        let data: Vec<f64> = a.as_slice().iter().map(|z| z.re).collect();
        return eigvals_sym_real(data, n);
    }
    let mut data = a.as_slice().to_vec();
    let (mut d, mut e) = tridiagonalize(&mut data, n);
    tridiagonal_ql(&mut d, &mut e)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues (ascending) of a real symmetric matrix in row-major storage.
pub fn eigvals_sym_real(mut data: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    if data.len() != n * n {
        return Err(Error::Dimension(format!(
            "expected {} entries, got {}",
            n * n,
            data.len()
        )));
    }
    let (mut d, mut e) = tridiagonalize(&mut data, n);
    tridiagonal_ql(&mut d, &mut e)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Householder reduction to upper Hessenberg form, optionally accumulating
/// the unitary factor `Q` with `a = Q H Q*`.
fn hessenberg(a: &CMatrix, want_q: bool) -> (CMatrix, Option<CMatrix>) {
    let n = a.dim();
    let mut h = a.clone();
    let mut q = want_q.then(|| CMatrix::identity(n));
    let mut v = vec![ZERO; n];
    let mut s = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let off = k + 1;
        let m = n - off;
        let sigma = (off..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if sigma == 0.0 {
            continue;
        }
        let alpha = h[(off, k)].reflector_alpha(sigma);
        for i in 0..m {
            v[i] = h[(off + i, k)];
        }
        v[0] -= alpha;
        let vnorm2: f64 = v[..m].iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;
        // Left: rows off.., columns k..
        for x in s[k..n].iter_mut() {
            *x = ZERO;
        }
        for i in 0..m {
            let vi = v[i].conj();
            let row = h.row(off + i);
            for j in k..n {
                s[j] += vi * row[j];
            }
        }
        for i in 0..m {
            let f = v[i] * tau;
            for j in k..n {
                let sj = s[j];
                h[(off + i, j)] -= f * sj;
            }
        }
        h[(off, k)] = alpha;
        for i in off + 1..n {
            h[(i, k)] = ZERO;
        }
        // Right: all rows, columns off..
        let apply_right = |mat: &mut CMatrix| {
            for i in 0..n {
                let mut d = ZERO;
                for j in 0..m {
                    d += mat[(i, off + j)] * v[j];
                }
                let d = d * tau;
                for j in 0..m {
                    mat[(i, off + j)] -= d * v[j].conj();
                }
            }
        };
        apply_right(&mut h);
        if let Some(q) = q.as_mut() {
            apply_right(q);
        }
    }
    (h, q)
}

/// Shifted QR on an upper Hessenberg matrix. With `q` present the iteration
/// runs on the full matrix (producing a Schur form) and accumulates the
/// transformations; otherwise only the active window is updated.
fn hessenberg_qr(h: &mut CMatrix, mut q: Option<&mut CMatrix>) -> Result<()> {
    let n = h.dim();
    if n < 2 {
        return Ok(());
    }
    let full = q.is_some();
    let norm = h.norm_fro().max(f64::MIN_POSITIVE);
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let cap = 100 * n;
    let mut rots: Vec<(C64, C64)> = Vec::with_capacity(n);
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let mut scale = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if scale == 0.0 {
                scale = norm;
            }
            if h[(l, l - 1)].norm() <= f64::EPSILON * scale {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > cap {
            return Err(Error::EigenNoConvergence(total));
        }
        let a = h[(hi - 1, hi - 1)];
        let b = h[(hi - 1, hi)];
        let c = h[(hi, hi - 1)];
        let d = h[(hi, hi)];
        let mu = if iter % 11 == 10 {
            // Exceptional shift.
            d + C64::new(h[(hi, hi - 1)].norm() * 0.75, 0.0)
        } else {
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let m1 = (a + d) * 0.5 + disc;
            let m2 = (a + d) * 0.5 - disc;
            if (m1 - d).norm() < (m2 - d).norm() {
                m1
            } else {
                m2
            }
        };
        for k in l..=hi {
            h[(k, k)] -= mu;
        }
        let col_end = if full { n } else { hi + 1 };
        rots.clear();
        for k in l..hi {
            let x = h[(k, k)];
            let y = h[(k + 1, k)];
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (cs, sn) = if r == 0.0 {
                (C64::new(1.0, 0.0), ZERO)
            } else {
                (x / r, y / r)
            };
            rots.push((cs, sn));
            for j in k..col_end {
                let hk = h[(k, j)];
                let hk1 = h[(k + 1, j)];
                h[(k, j)] = cs.conj() * hk + sn.conj() * hk1;
                h[(k + 1, j)] = -sn * hk + cs * hk1;
            }
            h[(k + 1, k)] = ZERO;
        }
        let row_start = if full { 0 } else { l };
        for (idx, &(cs, sn)) in rots.iter().enumerate() {
            let k = l + idx;
            let row_end = (k + 1).min(hi);
            for i in row_start..=row_end {
                let hik = h[(i, k)];
                let hik1 = h[(i, k + 1)];
                h[(i, k)] = hik * cs + hik1 * sn;
                h[(i, k + 1)] = -hik * sn.conj() + hik1 * cs.conj();
            }
            if let Some(q) = q.as_deref_mut() {
                for i in 0..n {
                    let qik = q[(i, k)];
                    let qik1 = q[(i, k + 1)];
                    q[(i, k)] = qik * cs + qik1 * sn;
                    q[(i, k + 1)] = -qik * sn.conj() + qik1 * cs.conj();
                }
            }
        }
        for k in l..=hi {
            h[(k, k)] += mu;
        }
    }
    Ok(())
}

/// Eigenvalues of a general complex matrix (Hessenberg reduction followed by
/// shifted QR). Order is unspecified.
pub fn eig_general(a: &CMatrix) -> Result<Vec<C64>> {
    if !a.is_finite() {
        return Err(Error::NonFinite { row: 0, col: 0 });
    }
    let (mut h, _) = hessenberg(a, false);
    hessenberg_qr(&mut h, None)?;
    Ok((0..a.dim()).map(|i| h[(i, i)]).collect())
}

/// Eigenvalues and eigenvectors via a complex Schur decomposition and
/// triangular back-substitution.
pub fn eig_general_vectors(a: &CMatrix) -> Result<EigenDecomposition> {
    let n = a.dim();
    if !a.is_finite() {
        return Err(Error::NonFinite { row: 0, col: 0 });
    }
    let (mut t, q) = hessenberg(a, true);
    let mut q = q.expect("requested");
    hessenberg_qr(&mut t, Some(&mut q))?;
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let small = f64::EPSILON * t.norm_fro().max(f64::MIN_POSITIVE);
    let mut y = CMatrix::zeros(n);
    for k in 0..n {
        y[(k, k)] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = ZERO;
            for l in j + 1..=k {
                s += t[(j, l)] * y[(l, k)];
            }
            let mut den = t[(j, j)] - values[k];
            if den.norm() < small {
                den = C64::new(small, 0.0);
            }
            y[(j, k)] = -s / den;
        }
    }
    let mut vectors = q.matmul(&y);
    for k in 0..n {
        let norm = (0..n).map(|i| vectors[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..n {
                vectors[(i, k)] /= norm;
            }
        }
    }
    Ok(EigenDecomposition { values, vectors })
}
