//! Dense complex linear algebra sized for desk-scale Hilbert spaces.

// Provides float methods when std is absent from the build graph.
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance on `max |h - h†|` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues above `-PSD_CLAMP` are treated as round-off and clamped to 0.
pub const PSD_CLAMP: f64 = 1e-10;

/// Eigenvalues below `-PSD_REJECT` make a matrix not positive semidefinite.
pub const PSD_REJECT: f64 = 1e-8;

const JACOBI_OFF_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real row-major data.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// `|u⟩⟨v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        let mut m = Self::zeros(u.len(), v.len());
        for (i, &a) in u.iter().enumerate() {
            for (j, &b) in v.iter().enumerate() {
                m[(i, j)] = a * b.conj();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Side length of a square matrix.
    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Matrix product. Zero entries of `self` are skipped, so products with a
    /// sparse left factor (jump operators in a Fock basis, projectors) cost
    /// `O(nnz · cols)` rather than `O(n³)`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        let n = rhs.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let b_row = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum::<C64>()
            })
            .collect()
    }

    pub fn scale(&self, a: C64) -> Self {
        self.map(|z| z * a)
    }

    pub fn scale_real(&self, a: f64) -> Self {
        self.map(|z| z * a)
    }

    /// `self += a · x`.
    pub fn axpy(&mut self, a: C64, x: &Self) {
        assert_eq!((self.rows, self.cols), (x.rows, x.cols), "axpy shape mismatch");
        for (y, &xv) in self.data.iter_mut().zip(&x.data) {
            *y += a * xv;
        }
    }

    /// `self += a · x` for real `a`.
    pub fn axpy_real(&mut self, a: f64, x: &Self) {
        assert_eq!((self.rows, self.cols), (x.rows, x.cols), "axpy shape mismatch");
        for (y, &xv) in self.data.iter_mut().zip(&x.data) {
            *y += xv * a;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius inner product `⟨self, other⟩ = Tr(self† other)`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `max |h - h†|` entrywise.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// `(X + X†)/2`.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_real(0.5)
    }

    /// `(X - X†)/2`.
    pub fn anti_hermitian_part(&self) -> Self {
        (self - &self.adjoint()).scale_real(0.5)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        &self.matmul(other) + &other.matmul(self)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        self.map(|z| -z)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

/// Nonzero entries of a square operator, row-major.
///
/// Used on the hot path of generator application: left and right products
/// with a dense matrix touch only the stored entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn from_dense(m: &ComplexMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.rows {
            for j in 0..m.cols {
                let v = m[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self {
            dim: m.rows,
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// `out += self · x`.
    pub fn left_mul_acc(&self, x: &ComplexMatrix, out: &mut ComplexMatrix) {
        let n = x.cols;
        for &(i, k, v) in &self.entries {
            let src = &x.data[k * n..(k + 1) * n];
            let dst = &mut out.data[i * n..(i + 1) * n];
            for (o, &b) in dst.iter_mut().zip(src) {
                *o += v * b;
            }
        }
    }

    /// `out = x · self` (overwrites `out`).
    pub fn right_mul_into(&self, x: &ComplexMatrix, out: &mut ComplexMatrix) {
        out.data.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        let n = x.cols;
        for &(k, j, v) in &self.entries {
            for i in 0..x.rows {
                out.data[i * n + j] += x.data[i * n + k] * v;
            }
        }
    }

    /// `out += x · self`.
    pub fn right_mul_acc(&self, x: &ComplexMatrix, out: &mut ComplexMatrix) {
        let n = x.cols;
        for &(k, j, v) in &self.entries {
            for i in 0..x.rows {
                out.data[i * n + j] += x.data[i * n + k] * v;
            }
        }
    }
}

/// Kronecker product `a ⊗ b`; the index of `b` varies fastest.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            if aij.is_zero() {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out[(i * b.rows + k, j * b.cols + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Spectral decomposition `h = V diag(λ) V†` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors stored as columns, in the order of `eigenvalues`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `V f(Λ) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let fl = f(lam);
            if fl == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v[(i, k)] * fl;
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        out
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
///
/// Sweeps until the off-diagonal Frobenius norm drops below
/// `1e-12 · max(1, ‖h‖_F)`.
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<HermitianEigen> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch {
            expected: h.rows,
            found: h.cols,
        });
    }
    let deviation = h.hermitian_deviation();
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let n = h.rows;
    let mut a = h.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let tol = JACOBI_OFF_TOL * h.frobenius_norm().max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag < 1e-300 {
                    continue;
                }
                // Phase-rotate column q so the (p, q) entry is real and
                // positive, then apply the classical real Jacobi rotation.
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // U restricted to (p, q): [[c, s], [-s·φ̄, c·φ̄]] with φ = phase.
                let u_pp = C64::new(c, 0.0);
                let u_pq = C64::new(s, 0.0);
                let u_qp = -phase.conj() * s;
                let u_qq = phase.conj() * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[(p, q)] = C64::zero();
                a[(q, p)] = C64::zero();
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors[(row, col)] = v[(row, src)];
        }
    }
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Largest positive eigenvalue of a Hermitian matrix, or 0 if there is none.
pub fn lambda_max_plus(h: &ComplexMatrix) -> Result<f64> {
    Ok(hermitian_eig(h)?.max_eigenvalue().max(0.0))
}

/// Principal square root of a positive semidefinite matrix.
///
/// Eigenvalues in `[-1e-8, 0)` are clamped to zero; anything below is
/// rejected with [`Error::NotPsd`].
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m)?;
    let min = eig.min_eigenvalue();
    if min < -PSD_REJECT {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(eig.reconstruct_with(|lam| lam.max(0.0).sqrt()))
}

/// Trace norm `Σ|λ|` of a Hermitian matrix.
pub fn trace_norm(h: &ComplexMatrix) -> Result<f64> {
    Ok(hermitian_eig(h)?.eigenvalues.iter().map(|l| l.abs()).sum())
}

/// Pauli and ladder matrices in the `{|0⟩, |1⟩}` basis, used throughout as
/// `{|g⟩, |e⟩}` for two-level systems.
pub mod paulis {
    use super::{ComplexMatrix, C64};

    pub fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    pub fn sigma_y() -> ComplexMatrix {
        ComplexMatrix::from_vec(
            2,
            2,
            alloc::vec![
                C64::new(0.0, 0.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, 0.0),
            ],
        )
        .unwrap()
    }

    pub fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_real_diag(&[1.0, -1.0])
    }

    /// Lowering operator `|0⟩⟨1|` (`|g⟩⟨e|`).
    pub fn sigma_minus() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap()
    }

    /// Raising operator `|1⟩⟨0|`.
    pub fn sigma_plus() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.0, 0.0, 1.0, 0.0]).unwrap()
    }

    /// `|0⟩⟨0|`.
    pub fn p0() -> ComplexMatrix {
        ComplexMatrix::from_real_diag(&[1.0, 0.0])
    }

    /// `|1⟩⟨1|`.
    pub fn p1() -> ComplexMatrix {
        ComplexMatrix::from_real_diag(&[0.0, 1.0])
    }
}

#[cfg(test)]
mod tests {
    use super::paulis::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_matrix(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
        let data = (0..n * n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ComplexMatrix::from_vec(n, n, data).unwrap()
    }

    fn random_hermitian(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
        let a = random_matrix(rng, n);
        &a + &a.adjoint()
    }

    #[test]
    fn kron_identity() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
    }

    #[test]
    fn kron_ancilla_fastest() {
        // (s, a), (s', a') -> (2s + a, 2s' + a').
        let m = kron(&sigma_x(), &p0());
        for i in 0..4 {
            for j in 0..4 {
                let expected = if (i, j) == (0, 2) || (i, j) == (2, 0) {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(m[(i, j)], C64::new(expected, 0.0), "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn kron_diagonal() {
        let m = kron(
            &ComplexMatrix::from_real_diag(&[2.0, 3.0]),
            &ComplexMatrix::from_real_diag(&[5.0, 7.0]),
        );
        assert_eq!(m, ComplexMatrix::from_real_diag(&[10.0, 14.0, 15.0, 21.0]));
    }

    #[test]
    fn kron_associative() {
        let int = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = (0..4)
                .map(|_| C64::new(rng.random_range(-3..4) as f64, rng.random_range(-3..4) as f64))
                .collect();
            ComplexMatrix::from_vec(2, 2, data).unwrap()
        };
        let (a, b, c) = (int(1), int(2), int(3));
        assert_eq!(kron(&kron(&a, &b), &c), kron(&a, &kron(&b, &c)));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, b, c) = (
            random_matrix(&mut rng, 2),
            random_matrix(&mut rng, 3),
            random_matrix(&mut rng, 2),
        );
        let diff = &kron(&kron(&a, &b), &c) - &kron(&a, &kron(&b, &c));
        assert!(diff.max_abs() <= 1e-12);
    }

    #[test]
    fn eig_diagonal() {
        let e = hermitian_eig(&ComplexMatrix::from_real_diag(&[3.0, -1.0])).unwrap();
        assert_eq!(e.eigenvalues, alloc::vec![-1.0, 3.0]);
    }

    #[test]
    fn eig_sigma_x() {
        let e = hermitian_eig(&sigma_x()).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 9] {
            let h = random_hermitian(&mut rng, n);
            let e = hermitian_eig(&h).unwrap();
            let back = e.reconstruct_with(|l| l);
            assert!((&back - &h).max_abs() <= 1e-9, "n = {n}");
            let v = &e.eigenvectors;
            let gram = &v.matmul(&v.adjoint()) - &ComplexMatrix::identity(n);
            assert!(gram.max_abs() <= 1e-10);
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eig_unitary_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_hermitian(&mut rng, 5);
        let u = hermitian_eig(&random_hermitian(&mut rng, 5))
            .unwrap()
            .eigenvectors;
        let rotated = u.matmul(&h).matmul(&u.adjoint());
        let a = hermitian_eig(&h).unwrap().eigenvalues;
        let b = hermitian_eig(&rotated.hermitian_part()).unwrap().eigenvalues;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        assert!(matches!(
            hermitian_eig(&sigma_minus()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn lambda_max_plus_cases() {
        assert_eq!(
            lambda_max_plus(&ComplexMatrix::from_real_diag(&[-1.0, -2.0])).unwrap(),
            0.0
        );
        assert_eq!(
            lambda_max_plus(&ComplexMatrix::from_real_diag(&[3.0, -1.0])).unwrap(),
            3.0
        );
        // ½(e^{-s} - 1) σ₊σ₋ at s = -ln 2.
        let s = -core::f64::consts::LN_2;
        let h = sigma_plus()
            .matmul(&sigma_minus())
            .scale_real(0.5 * ((-s).exp() - 1.0));
        assert!((lambda_max_plus(&h).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn psd_sqrt_cases() {
        let r = psd_sqrt(&ComplexMatrix::from_real_diag(&[4.0, 9.0])).unwrap();
        assert!((&r - &ComplexMatrix::from_real_diag(&[2.0, 3.0])).max_abs() < 1e-15);

        let z = psd_sqrt(&ComplexMatrix::zeros(3, 3)).unwrap();
        assert_eq!(z.max_abs(), 0.0);

        // (1 - e^{-s}) J†J for the decay qubit at s = ln 2.
        let s = core::f64::consts::LN_2;
        let j = sigma_minus();
        let m = j.adjoint().matmul(&j).scale_real(1.0 - (-s).exp());
        let r = psd_sqrt(&m).unwrap();
        let expected = ComplexMatrix::from_real_diag(&[0.0, 0.5f64.sqrt()]);
        assert!((&r - &expected).max_abs() < 1e-15);
    }

    #[test]
    fn psd_sqrt_random_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [2, 4, 7] {
            let a = random_matrix(&mut rng, n);
            let m = a.adjoint().matmul(&a);
            let r = psd_sqrt(&m).unwrap();
            assert!((&r.matmul(&r) - &m).max_abs() <= 1e-9);
            assert!(r.is_hermitian(1e-12));
        }
    }

    #[test]
    fn psd_sqrt_clamps_and_rejects() {
        let r = psd_sqrt(&ComplexMatrix::from_real_diag(&[1.0, -1e-11])).unwrap();
        assert_eq!(r[(1, 1)], C64::zero());
        assert!(matches!(
            psd_sqrt(&ComplexMatrix::from_real_diag(&[1.0, -1e-6])),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        assert_eq!(
            ComplexMatrix::from_real(1, 2, &[1.0, f64::NAN]),
            Err(Error::NonFinite)
        );
        assert!(matches!(
            ComplexMatrix::from_real(2, 2, &[1.0]),
            Err(Error::BadShape { .. })
        ));
    }

    #[test]
    fn matmul_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_matrix(&mut rng, 4);
        let b = random_matrix(&mut rng, 4);
        let c = a.matmul(&b);
        for i in 0..4 {
            for j in 0..4 {
                let naive: C64 = (0..4).map(|k| a[(i, k)] * b[(k, j)]).sum();
                assert!((c[(i, j)] - naive).norm() < 1e-14);
            }
        }
    }
}
