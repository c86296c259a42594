//! Dense complex matrices for the small (K, N_r, N <= ~16) shapes used by
//! the link model.
//!
//! Storage is row-major with value semantics. All predicates take an absolute
//! entrywise tolerance; [`DEFAULT_TOL`] is used where callers do not care.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use crate::{Error, Result};

pub use num_complex::Complex64 as Complex;

/// Default absolute tolerance for equality and structure predicates.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl CMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / cols,
                col: idx % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a real-valued matrix from row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| Complex::new(x, 0.0)).collect())
    }

    /// Builds a matrix from nested rows. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<Complex>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty shape {rows}x{cols}");
        Self {
            rows,
            cols,
            data: vec![Complex::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[Complex]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Column vector (n x 1) from entries.
    pub fn column_vector(entries: &[Complex]) -> Self {
        Self {
            rows: entries.len(),
            cols: 1,
            data: entries.to_vec(),
        }
    }

    /// Block-diagonal assembly of square or rectangular blocks.
    pub fn block_diag(blocks: &[CMatrix]) -> Self {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut m = Self::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    m[(r0 + i, c0 + j)] = b[(i, j)];
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        m
    }

    /// Horizontal concatenation; all parts must share the row count.
    pub fn hstack(parts: &[CMatrix]) -> Result<Self> {
        let rows = parts.first().map_or(0, |p| p.rows);
        if parts.iter().any(|p| p.rows != rows) {
            return Err(Error::Dimension("hstack row mismatch".into()));
        }
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut m = Self::zeros(rows, cols);
        let mut c0 = 0;
        for p in parts {
            for i in 0..rows {
                for j in 0..p.cols {
                    m[(i, c0 + j)] = p[(i, j)];
                }
            }
            c0 += p.cols;
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn data(&self) -> &[Complex] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<Complex> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// Checked matrix product.
    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Hermitian transpose.
    pub fn adjoint(&self) -> CMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> CMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn trace(&self) -> Result<Complex> {
        if !self.is_square() {
            return Err(Error::Dimension(format!(
                "trace of non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    /// Real part of the trace.
    pub fn trace_re(&self) -> Result<f64> {
        self.trace().map(|t| t.re)
    }

    /// Sum of squared entry magnitudes.
    pub fn frob_norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&self, alpha: Complex) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * alpha).collect(),
        }
    }

    pub fn scale_re(&self, alpha: f64) -> CMatrix {
        self.scale(Complex::new(alpha, 0.0))
    }

    pub fn try_add(&self, other: &CMatrix) -> Result<CMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &CMatrix) -> Result<CMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &CMatrix, f: impl Fn(Complex, Complex) -> Complex) -> Result<CMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "elementwise op on {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Entrywise absolute-tolerance equality. Shapes must match exactly.
    pub fn approx_eq(&self, other: &CMatrix, tol: f64) -> bool {
        self.shape() == other.shape() && self.data.iter().zip(&other.data).all(|(a, b)| (a - b).norm() <= tol)
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)].norm() <= tol))
    }

    /// 0/1 matrix with exactly one 1 per row and per column.
    pub fn is_permutation(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let n = self.rows;
        let mut col_hits = vec![0usize; n];
        for i in 0..n {
            let mut row_hits = 0;
            for j in 0..n {
                let z = self[(i, j)];
                if (z - Complex::new(1.0, 0.0)).norm() <= tol {
                    row_hits += 1;
                    col_hits[j] += 1;
                } else if z.norm() > tol {
                    return false;
                }
            }
            if row_hits != 1 {
                return false;
            }
        }
        col_hits.iter().all(|&c| c == 1)
    }

    /// Exactly one unit-magnitude nonzero per row and column (a permutation
    /// times a unit-modulus diagonal).
    pub fn is_monomial_unit(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let n = self.rows;
        let mut col_hits = vec![0usize; n];
        for i in 0..n {
            let mut row_hits = 0;
            for j in 0..n {
                let mag = self[(i, j)].norm();
                if mag > tol {
                    if (mag - 1.0).abs() > tol {
                        return false;
                    }
                    row_hits += 1;
                    col_hits[j] += 1;
                }
            }
            if row_hits != 1 {
                return false;
            }
        }
        col_hits.iter().all(|&c| c == 1)
    }

    /// `||U U^H - I||_F^2 < tol * K` for square `U`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let gram = self * &self.adjoint();
        let dev = &gram - &CMatrix::identity(self.rows);
        dev.frob_norm_sq() < tol * self.rows as f64
    }

    /// For a matrix with at most one nonzero per column, returns for every
    /// column `j` the row index and value of that nonzero.
    pub fn column_support(&self, tol: f64) -> Option<Vec<(usize, Complex)>> {
        let mut out = Vec::with_capacity(self.cols);
        for j in 0..self.cols {
            let mut hit = None;
            for i in 0..self.rows {
                let z = self[(i, j)];
                if z.norm() > tol {
                    if hit.is_some() {
                        return None;
                    }
                    hit = Some((i, z));
                }
            }
            out.push(hit?);
        }
        Some(out)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

/// Panics on shape mismatch; use [`CMatrix::matmul`] for the checked form.
impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        self.try_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        self.try_sub(rhs).expect("matrix difference shape mismatch")
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}j  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use rand::Rng;

    pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
        let data = (0..rows * cols)
            .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        CMatrix::new(rows, cols, data).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_util::random_matrix;
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn naive_product(a: &CMatrix, b: &CMatrix) -> Vec<Vec<Complex>> {
        let mut out = vec![vec![c(0.0, 0.0); b.cols()]; a.rows()];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut re = 0.0;
                let mut im = 0.0;
                for k in 0..a.cols() {
                    let x = a[(i, k)];
                    let y = b[(k, j)];
                    re += x.re * y.re - x.im * y.im;
                    im += x.re * y.im + x.im * y.re;
                }
                *cell = c(re, im);
            }
        }
        out
    }

    #[test]
    fn identity_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 2, 3);
        assert!((&CMatrix::identity(2) * &a).approx_eq(&a, 0.0));
    }

    #[test]
    fn swap_times_diagonal() {
        let swap = CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let (s1, s2) = (c(0.3, 0.7), c(-1.0, 0.2));
        let d = CMatrix::from_diag(&[s1, s2]);
        let expect = CMatrix::new(2, 2, vec![c(0.0, 0.0), s2, s1, c(0.0, 0.0)]).unwrap();
        assert!((&swap * &d).approx_eq(&expect, 0.0));
    }

    #[test]
    fn product_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let a = random_matrix(&mut rng, 3, 3);
            let b = random_matrix(&mut rng, 3, 3);
            let p = a.matmul(&b).unwrap();
            let oracle = naive_product(&a, &b);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((p[(i, j)] - oracle[i][j]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn product_shape_mismatch() {
        let a = CMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&a), Err(Error::Dimension(_))));
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(CMatrix::new(2, 2, vec![c(0.0, 0.0); 3]).is_err());
        assert!(matches!(
            CMatrix::new(1, 2, vec![c(0.0, 0.0), c(f64::NAN, 0.0)]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(CMatrix::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn adjoint_cases() {
        let d = CMatrix::from_diag(&[c(0.0, 1.0), c(0.0, -1.0)]);
        let expect = CMatrix::from_diag(&[c(0.0, -1.0), c(0.0, 1.0)]);
        assert!(d.adjoint().approx_eq(&expect, 0.0));

        let p = CMatrix::from_real(3, 3, &[0., 1., 0., 0., 0., 1., 1., 0., 0.]).unwrap();
        assert!(p.adjoint().approx_eq(&p.transpose(), 0.0));
        assert!((&p * &p.adjoint()).approx_eq(&CMatrix::identity(3), 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 3, 4);
            assert_eq!(a.adjoint().adjoint(), a);
        }
    }

    #[test]
    fn trace_cases() {
        assert_eq!(CMatrix::identity(4).trace_re().unwrap(), 4.0);
        let d = CMatrix::from_diag(&[c(0.0, 1.0), c(0.0, -1.0)]);
        assert_eq!(d.trace_re().unwrap(), 0.0);
        assert!(CMatrix::zeros(2, 3).trace_re().is_err());

        // Tr(A^H) = Tr(A)^*
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 4, 4);
            let t = a.trace().unwrap();
            let th = a.adjoint().trace().unwrap();
            assert!((t.conj() - th).norm() < 1e-14);
            assert!((a.trace_re().unwrap() - a.adjoint().trace_re().unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn frobenius_cases() {
        assert_eq!(CMatrix::identity(3).frob_norm_sq(), 3.0);
        let h = CMatrix::from_real(2, 2, &[1.0, -1.0, 1.0, 1.0]).unwrap();
        assert_eq!(h.frob_norm_sq(), 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 3, 2);
            let gram = (&a.adjoint() * &a).trace_re().unwrap();
            assert!((a.frob_norm_sq() - gram).abs() < 1e-10);
        }
    }

    #[test]
    fn structure_predicates() {
        let p = CMatrix::from_real(3, 3, &[0., 0., 1., 1., 0., 0., 0., 1., 0.]).unwrap();
        assert!(p.is_permutation(DEFAULT_TOL));
        assert!(p.is_monomial_unit(DEFAULT_TOL));
        assert!(!p.is_diagonal(DEFAULT_TOL));
        let twice = CMatrix::from_real(2, 2, &[1., 1., 0., 0.]).unwrap();
        assert!(!twice.is_permutation(DEFAULT_TOL));
        let phased = &p * &CMatrix::from_diag(&[c(0.0, 1.0), c(-1.0, 0.0), c(0.6, 0.8)]);
        assert!(!phased.is_permutation(DEFAULT_TOL));
        assert!(phased.is_monomial_unit(DEFAULT_TOL));
        assert!(phased.is_unitary(DEFAULT_TOL));
        let scaled = phased.scale_re(1.1);
        assert!(!scaled.is_monomial_unit(DEFAULT_TOL));
        assert!(!scaled.is_unitary(DEFAULT_TOL));
    }

    #[test]
    fn block_diag_layout() {
        let a = CMatrix::from_diag(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let b = CMatrix::from_diag(&[c(0.0, 1.0)]);
        let q = CMatrix::block_diag(&[a, b]);
        assert_eq!(q.shape(), (3, 3));
        assert!(q.is_diagonal(0.0));
        assert_eq!(q.diag(), vec![c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0)]);
    }

    fn arb_complex() -> impl Strategy<Value = Complex> {
        (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| Complex::new(re, im))
    }

    fn arb_matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec(arb_complex(), rows * cols).prop_map(move |d| CMatrix::new(rows, cols, d).unwrap())
    }

    fn arb_permutation(n: usize) -> impl Strategy<Value = CMatrix> {
        Just((0..n).collect::<Vec<_>>()).prop_shuffle().prop_map(move |perm| {
            let mut m = CMatrix::zeros(n, n);
            for (i, &j) in perm.iter().enumerate() {
                m[(i, j)] = Complex::new(1.0, 0.0);
            }
            m
        })
    }

    /// Random unitary: product of a permutation, a phase diagonal and a
    /// 2x2 rotation embedded in the leading block.
    fn arb_unitary(n: usize) -> impl Strategy<Value = CMatrix> {
        (
            arb_permutation(n),
            proptest::collection::vec(0.0f64..std::f64::consts::TAU, n),
            0.0f64..std::f64::consts::TAU,
        )
            .prop_map(move |(p, phases, theta)| {
                let d = CMatrix::from_diag(&phases.iter().map(|&t| Complex::from_polar(1.0, t)).collect::<Vec<_>>());
                let mut r = CMatrix::identity(n);
                r[(0, 0)] = Complex::new(theta.cos(), 0.0);
                r[(0, 1)] = Complex::new(-theta.sin(), 0.0);
                r[(1, 0)] = Complex::new(theta.sin(), 0.0);
                r[(1, 1)] = Complex::new(theta.cos(), 0.0);
                &(&p * &d) * &r
            })
    }

    proptest! {
        #[test]
        fn permutation_conjugation_is_identity(p in arb_permutation(4), a in arb_matrix(4, 3)) {
            let back = &p * &(&p.adjoint() * &a);
            prop_assert!(back.approx_eq(&a, 1e-12));
        }

        #[test]
        fn product_is_associative(a in arb_matrix(3, 3), b in arb_matrix(3, 3), c in arb_matrix(3, 3)) {
            let left = &(&a * &b) * &c;
            let right = &a * &(&b * &c);
            prop_assert!(left.approx_eq(&right, 1e-10));
        }

        #[test]
        fn unitary_predicate_matches_gram_deviation(u in arb_unitary(4), bump in 0.01f64..0.5) {
            prop_assert!(u.is_unitary(1e-10));
            let gram_dev = (&(&u * &u.adjoint()) - &CMatrix::identity(4)).frob_norm_sq();
            prop_assert!(gram_dev < 1e-10 * 4.0);

            let mut v = u.clone();
            v[(0, 0)] += Complex::new(bump, 0.0);
            let dev = (&(&v * &v.adjoint()) - &CMatrix::identity(4)).frob_norm_sq();
            prop_assert_eq!(v.is_unitary(1e-10), dev < 1e-10 * 4.0);
            prop_assert!(!v.is_unitary(1e-10));
        }
    }
}
