//! Dense square complex matrices.
//!
//! Storage is row-major. Everything in this crate works with small
//! operator-valued arguments (pencil sizes up to a few dozen), with the
//! exception of the random-matrix harness which multiplies and diagonalizes
//! matrices of size ~10³; products above a small threshold are delegated to
//! `matrixmultiply`.

mod eigen;

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use eigen::{
    eig_general, eig_general_vectors, eig_herm, eigvals_herm, eigvals_sym_real, EigenDecomposition,
    HermitianEigen,
};

pub type C64 = Complex64;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Products of matrices at least this large go through `zgemm`.
const GEMM_THRESHOLD: usize = 24;

/// Dense n×n complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

/// Location of a matrix relative to the operator upper half-plane
/// `{b : (b - b*)/(2i) > 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlaneReport {
    pub in_upper: bool,
    /// Smallest eigenvalue of `(b - b*)/(2i)`.
    pub min_imag_eig: f64,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, C64::new(1.0, 0.0))
    }

    /// `z · I_n`.
    pub fn scalar(n: usize, z: C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = z;
        }
        m
    }

    pub fn diag(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        let d: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&d)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        CMatrix { n, data }
    }

    /// Builds a matrix from rows; rejects ragged input and non-finite entries.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, z) in row.iter().enumerate() {
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                data.push(*z);
            }
        }
        Ok(CMatrix { n, data })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    /// Row-major data without any validation; used by samplers that produce
    /// finite values by construction.
    pub(crate) fn from_vec_unchecked(n: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        CMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn scale(&self, z: C64) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|&x| x * z).collect(),
        }
    }

    pub fn scale_real(&self, x: f64) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|&z| z * x).collect(),
        }
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// `(b - b*)/(2i)`, the imaginary part in the operator sense.
    pub fn imag_part(&self) -> Self {
        Self::from_fn(self.n, |i, j| (self[(i, j)] - self[(j, i)].conj()) / (2.0 * I))
    }

    /// `(b + b*)/2`.
    pub fn real_part(&self) -> Self {
        Self::from_fn(self.n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// Largest entrywise deviation from `a = a*`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol * self.norm_fro().max(1.0)
    }

    /// Whether every entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// `self ⊗ I_m` (entries of `self` index the blocks).
    pub fn kron_identity(&self, m: usize) -> Self {
        let nm = self.n * m;
        let mut out = Self::zeros(nm);
        for i in 0..self.n {
            for j in 0..self.n {
                let z = self[(i, j)];
                if z != C64::new(0.0, 0.0) {
                    for k in 0..m {
                        out[(i * m + k, j * m + k)] = z;
                    }
                }
            }
        }
        out
    }

    /// `self ⊗ a`.
    pub fn kron(&self, a: &CMatrix) -> Self {
        let m = a.n;
        let mut out = Self::zeros(self.n * m);
        for i in 0..self.n {
            for j in 0..self.n {
                let z = self[(i, j)];
                if z == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = z * a[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Square block of size `size` starting at `(start, start)`.
    pub fn principal_block(&self, start: usize, size: usize) -> Self {
        Self::from_fn(size, |i, j| self[(start + i, start + j)])
    }

    /// Square block of size `size` with top-left corner at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, size: usize) -> Self {
        Self::from_fn(size, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &CMatrix) {
        for i in 0..b.n {
            for j in 0..b.n {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        if n >= GEMM_THRESHOLD {
            // SAFETY: both operands and the output are n×n contiguous row-major
            // buffers; `Complex64` is `repr(C)` with layout `[f64; 2]`.
            unsafe {
                matrixmultiply::zgemm(
                    matrixmultiply::CGemmOption::Standard,
                    matrixmultiply::CGemmOption::Standard,
                    n,
                    n,
                    n,
                    [1.0, 0.0],
                    self.data.as_ptr() as *const [f64; 2],
                    n as isize,
                    1,
                    other.data.as_ptr() as *const [f64; 2],
                    n as isize,
                    1,
                    [0.0, 0.0],
                    out.data.as_mut_ptr() as *mut [f64; 2],
                    n as isize,
                    1,
                );
            }
            return out;
        }
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                let orow = &mut out.data[i * n..(i + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Inverse by LU factorization with partial pivoting.
    ///
    /// A pivot below `n · ε_mach · ‖a‖_F` is reported as [`Error::Singular`].
    pub fn inv(&self) -> Result<CMatrix> {
        let n = self.n;
        if n == 0 {
            return Ok(CMatrix::zeros(0));
        }
        if n == 1 {
            let z = self.data[0];
            if z.norm() == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::Singular {
                    pivot: z.norm(),
                    col: 0,
                });
            }
            return Ok(CMatrix {
                n: 1,
                data: vec![z.inv()],
            });
        }
        if n == 2 {
            return self.inv2();
        }
        let threshold = n as f64 * f64::EPSILON * self.norm_fro();
        let mut lu = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (piv, pmax) = (col..n)
                .map(|r| (r, lu[r * n + col].norm()))
                .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if !(pmax > threshold) {
                return Err(Error::Singular { pivot: pmax, col });
            }
            if piv != col {
                for j in 0..n {
                    lu.swap(piv * n + j, col * n + j);
                }
                perm.swap(piv, col);
            }
            let d = lu[col * n + col].inv();
            for r in col + 1..n {
                let f = lu[r * n + col] * d;
                lu[r * n + col] = f;
                if f != C64::new(0.0, 0.0) {
                    for j in col + 1..n {
                        let u = lu[col * n + j];
                        lu[r * n + j] -= f * u;
                    }
                }
            }
        }
        // Solve LU X = P for each column of the identity.
        let mut out = CMatrix::zeros(n);
        let mut y = vec![C64::new(0.0, 0.0); n];
        for c in 0..n {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = if perm[i] == c {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
            }
            for i in 0..n {
                let mut s = y[i];
                for k in 0..i {
                    s -= lu[i * n + k] * y[k];
                }
                y[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= lu[i * n + k] * y[k];
                }
                y[i] = s / lu[i * n + i];
            }
            for i in 0..n {
                out.data[i * n + c] = y[i];
            }
        }
        Ok(out)
    }

    fn inv2(&self) -> Result<CMatrix> {
        let [a, b, c, d] = [self.data[0], self.data[1], self.data[2], self.data[3]];
        let det = a * d - b * c;
        let scale = self.norm_fro();
        if !(det.norm() > 4.0 * f64::EPSILON * scale * scale) {
            return Err(Error::Singular {
                pivot: det.norm(),
                col: 1,
            });
        }
        let r = det.inv();
        Ok(CMatrix {
            n: 2,
            data: vec![d * r, -b * r, -c * r, a * r],
        })
    }

    /// Reports whether `self` lies in the operator upper half-plane, with the
    /// smallest eigenvalue of its imaginary part as margin.
    pub fn uhp_check(&self) -> HalfPlaneReport {
        let im = self.imag_part();
        let min_imag_eig = match eig_herm(&im) {
            Ok(e) => e.values.first().copied().unwrap_or(f64::INFINITY),
            Err(_) => f64::NEG_INFINITY,
        };
        HalfPlaneReport {
            in_upper: min_imag_eig > 0.0,
            min_imag_eig,
        }
    }

    /// Cheap strict positivity test for `(b - b*)/(2i)` via Cholesky.
    pub(crate) fn in_upper_half_plane(&self) -> bool {
        let n = self.n;
        let im = self.imag_part();
        let mut l = vec![C64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut d = im[(j, j)].re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > 0.0) {
                return false;
            }
            let djj = d.sqrt();
            l[j * n + j] = C64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = im[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        true
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{})", self.n, self.n)?;
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|z| format!("{z:.6}")).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

macro_rules! elementwise {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&CMatrix> for &CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &CMatrix) -> CMatrix {
                assert_eq!(self.n, rhs.n, "dimension mismatch");
                CMatrix {
                    n: self.n,
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| a $op b).collect(),
                }
            }
        }
        impl $tr<CMatrix> for CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: CMatrix) -> CMatrix {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&CMatrix> for CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &CMatrix) -> CMatrix {
                (&self).$method(rhs)
            }
        }
    };
}

elementwise!(Add, add, +);
elementwise!(Sub, sub, -);

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&CMatrix> for CMatrix {
    fn sub_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl Mul<CMatrix> for CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: CMatrix) -> CMatrix {
        self.matmul(&rhs)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale_real(-1.0)
    }
}

impl Neg for CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale_real(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub(crate) fn random_matrix(n: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn inverse_of_diagonal() {
        let a = CMatrix::diag(&[c(0.0, 2.0), c(-1.0, 0.0)]);
        let ai = a.inv().unwrap();
        assert!((ai[(0, 0)] - c(0.0, -0.5)).norm() < 1e-15);
        assert!((ai[(1, 1)] - c(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(ai[(0, 1)], c(0.0, 0.0));
        let a3 = CMatrix::diag(&[c(0.0, 2.0), c(-1.0, 0.0), c(4.0, 0.0)]);
        let ai3 = a3.inv().unwrap();
        assert!((ai3[(2, 2)] - c(0.25, 0.0)).norm() < 1e-15);
        assert_eq!(ai3[(0, 2)], c(0.0, 0.0));
    }

    #[test]
    fn swap_is_an_involution() {
        let a = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(a.inv().unwrap(), a);
        let b = CMatrix::from_real_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!((&b.inv().unwrap() - &b).norm_fro() < 1e-15);
    }

    #[test]
    fn random_inverse_residual() {
        for seed in 0..20 {
            let a = &random_matrix(6, seed) + &CMatrix::scalar(6, c(3.0, 0.0));
            let ai = a.inv().unwrap();
            let r = (&(&a * &ai) - &CMatrix::identity(6)).norm_fro();
            assert!(r <= 1e-10 * 6.0 * a.norm_fro(), "residual {r}");
            let back = ai.inv().unwrap();
            assert!((&back - &a).norm_fro() <= 1e-10 * a.norm_fro());
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = CMatrix::from_real_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(a.inv(), Err(Error::Singular { .. })));
        let z = CMatrix::zeros(2);
        assert!(matches!(z.inv(), Err(Error::Singular { .. })));
    }

    #[test]
    fn non_finite_rejected() {
        let r = CMatrix::from_rows(&[vec![c(f64::NAN, 0.0)]]);
        assert!(matches!(r, Err(Error::NonFinite { row: 0, col: 0 })));
    }

    #[test]
    fn half_plane_examples() {
        let b = CMatrix::scalar(3, c(0.0, 0.1));
        let r = b.uhp_check();
        assert!(r.in_upper);
        assert!((r.min_imag_eig - 0.1).abs() < 1e-14);

        let lam = c(0.7, -0.4);
        let eps = 0.05;
        let l = CMatrix::from_rows(&[vec![c(0.0, eps), lam], vec![lam.conj(), c(0.0, eps)]])
            .unwrap();
        let im = l.imag_part();
        assert!((&im - &CMatrix::scalar(2, c(eps, 0.0))).norm_fro() < 1e-15);
        assert!(l.uhp_check().in_upper);

        let h = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(2.0, 1.0)], vec![c(2.0, -1.0), c(3.0, 0.0)]])
            .unwrap();
        let r = h.uhp_check();
        assert!(!r.in_upper);
        assert!(r.min_imag_eig.abs() < 1e-15);
    }

    #[test]
    fn gemm_path_matches_naive() {
        let a = random_matrix(30, 1);
        let b = random_matrix(30, 2);
        let fast = &a * &b;
        let slow = CMatrix::from_fn(30, |i, j| (0..30).map(|k| a[(i, k)] * b[(k, j)]).sum());
        assert!((&fast - &slow).norm_fro() < 1e-12);
    }

    #[test]
    fn kron_identity_layout() {
        let a = CMatrix::from_real_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let k = a.kron_identity(2);
        assert_eq!(k[(0, 2)], c(2.0, 0.0));
        assert_eq!(k[(1, 3)], c(2.0, 0.0));
        assert_eq!(k[(0, 3)], c(0.0, 0.0));
        assert_eq!(k, a.kron(&CMatrix::identity(2)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn upper_half_plane(n: usize) -> impl Strategy<Value = CMatrix> {
            (
                proptest::collection::vec(-2.0f64..2.0, 2 * n * n),
                proptest::collection::vec(0.05f64..2.0, n),
                proptest::collection::vec(-1.0f64..1.0, n * n),
            )
                .prop_map(move |(re, d, off)| {
                    // Real part arbitrary, imaginary part = L L* + diag(d) > 0.
                    let x = CMatrix::from_fn(n, |i, j| C64::new(re[2 * (i * n + j)], re[2 * (i * n + j) + 1]));
                    let l = CMatrix::from_fn(n, |i, j| C64::new(off[i * n + j], 0.0));
                    let pos = &(&l * &l.adjoint()) + &CMatrix::diag_real(&d);
                    &x.real_part() + &pos.scale(I)
                })
        }

        proptest! {
            #[test]
            fn minus_inverse_preserves_upper_half_plane(b in upper_half_plane(4)) {
                prop_assert!(b.uhp_check().in_upper);
                let m = -b.inv().unwrap();
                prop_assert!(m.uhp_check().in_upper);
                prop_assert!(m.in_upper_half_plane());
            }

            #[test]
            fn adjoint_flips_margin_sign(b in upper_half_plane(3)) {
                // Im(-b*) = Im(b), while Im(b*) = -Im(b).
                let r1 = b.uhp_check();
                let r2 = (-b.adjoint()).uhp_check();
                prop_assert!((r1.min_imag_eig - r2.min_imag_eig).abs() < 1e-12);
                let top = eig_herm(&b.imag_part()).unwrap().values.last().copied().unwrap();
                let r3 = b.adjoint().uhp_check();
                prop_assert!(!r3.in_upper);
                prop_assert!((r3.min_imag_eig + top).abs() < 1e-12);
            }

            #[test]
            fn inverse_is_involution(seed in 0u64..1000) {
                let a = &random_matrix(5, seed) + &CMatrix::scalar(5, C64::new(0.0, 2.5));
                let back = a.inv().unwrap().inv().unwrap();
                prop_assert!((&back - &a).norm_fro() <= 1e-10 * a.norm_fro());
            }
        }
    }
}
