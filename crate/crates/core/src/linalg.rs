//! Small dense complex matrices for the two-spin problem.
//!
//! Only dimensions 2 (one spin) and 4 (electron and nucleus) occur, so
//! matrices live in a fixed 16-entry array and are `Copy`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Largest allowed deviation from hermiticity for a generator.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("unsupported dimension {0}; only 2 and 4 are allowed")]
    BadDimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("kron of {0}x{0} and {1}x{1} does not give a 4x4 matrix")]
    KronTooLarge(usize, usize),
    #[error("generator is not hermitian (defect {0:.3e})")]
    NotHermitian(f64),
}

/// Dense complex matrix of dimension 2 or 4, row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: [C64; 16],
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Result<Self, LinalgError> {
        if dim != 2 && dim != 4 {
            return Err(LinalgError::BadDimension(dim));
        }
        Ok(Self { dim, data: [ZERO; 16] })
    }

    pub fn identity(dim: usize) -> Result<Self, LinalgError> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m.set(i, i, ONE);
        }
        Ok(m)
    }

    /// Builds a matrix from rows. The number of rows fixes the dimension.
    pub fn from_rows(rows: &[&[C64]]) -> Result<Self, LinalgError> {
        let mut m = Self::zeros(rows.len())?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != rows.len() {
                return Err(LinalgError::DimensionMismatch(rows.len(), row.len()));
            }
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        Ok(m)
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, LinalgError> {
        let mut m = Self::zeros(rows.len())?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != rows.len() {
                return Err(LinalgError::DimensionMismatch(rows.len(), row.len()));
            }
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, C64::new(*v, 0.0));
            }
        }
        Ok(m)
    }

    /// Diagonal matrix with the given entries.
    pub fn diag(entries: &[C64]) -> Result<Self, LinalgError> {
        let mut m = Self::zeros(entries.len())?;
        for (i, v) in entries.iter().enumerate() {
            m.set(i, i, *v);
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i * self.dim + j] = v;
    }

    /// Extracts the 2x2 block starting at (`row`, `col`) of a 4x4 matrix.
    pub fn block2(&self, row: usize, col: usize) -> CMatrix {
        assert_eq!(self.dim, 4, "block2 needs a 4x4 matrix");
        let mut b = CMatrix { dim: 2, data: [ZERO; 16] };
        for i in 0..2 {
            for j in 0..2 {
                b.set(i, j, self.get(row + i, col + j));
            }
        }
        b
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(i, j, self.get(j, i).conj());
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        let mut out = *self;
        for v in out.data[..self.dim * self.dim].iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn scale_real(&self, s: f64) -> CMatrix {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data[..self.dim * self.dim]
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Matrix product with a dimension check.
    pub fn try_mul(&self, rhs: &CMatrix) -> Result<CMatrix, LinalgError> {
        if self.dim != rhs.dim {
            return Err(LinalgError::DimensionMismatch(self.dim, rhs.dim));
        }
        Ok(self.mul_unchecked(rhs))
    }

    fn mul_unchecked(&self, rhs: &CMatrix) -> CMatrix {
        let n = self.dim;
        let mut out = CMatrix { dim: n, data: [ZERO; 16] };
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    /// Largest entry of `|self - other|`.
    pub fn distance(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        (*self - *other).max_abs()
    }

    /// Deviation from hermiticity, `max |A - A^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.distance(&self.adjoint())
    }

    /// Integer power by repeated squaring.
    pub fn powi(&self, mut n: u64) -> CMatrix {
        let mut result = CMatrix::identity(self.dim).expect("valid dimension");
        let mut base = *self;
        while n > 0 {
            if n & 1 == 1 {
                result = result * base;
            }
            base = base * base;
            n >>= 1;
        }
        result
    }
}

impl Mul for CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimensions differ");
        self.mul_unchecked(&rhs)
    }
}

impl Add for CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimensions differ");
        let mut out = self;
        for (a, b) in out.data.iter_mut().zip(rhs.data.iter()) {
            *a += *b;
        }
        out
    }
}

impl Sub for CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimensions differ");
        let mut out = self;
        for (a, b) in out.data.iter_mut().zip(rhs.data.iter()) {
            *a -= *b;
        }
        out
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let v = self.get(i, j);
                write!(f, "{:+.6}{:+.6}i  ", v.re, v.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Kronecker product. Only 2x2 with 2x2 is representable here.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, LinalgError> {
    if a.dim * b.dim != 4 {
        return Err(LinalgError::KronTooLarge(a.dim, b.dim));
    }
    let mut out = CMatrix::zeros(4)?;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out.set(2 * i + k, 2 * j + l, a.get(i, j) * b.get(k, l));
                }
            }
        }
    }
    Ok(out)
}

/// A matrix checked to be hermitian on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianGenerator(CMatrix);

impl HermitianGenerator {
    pub fn new(m: CMatrix) -> Result<Self, LinalgError> {
        let defect = m.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(LinalgError::NotHermitian(defect));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// Eigenvalues (ascending is not guaranteed) and a unitary whose
    /// columns are the matching eigenvectors.
    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        match self.0.dim {
            2 => eigen2(&self.0),
            _ => jacobi_eigen(&self.0),
        }
    }
}

/// `exp(-i H t)` through the spectral decomposition of `H`.
pub fn hermitian_expm(h: &HermitianGenerator, t: f64) -> CMatrix {
    let m = h.matrix();
    if m.dim == 2 {
        return expm2(m, t);
    }
    let (vals, v) = h.eigen();
    let phases: Vec<C64> = vals.iter().map(|e| C64::from_polar(1.0, -e * t)).collect();
    let d = CMatrix::diag(&phases).expect("dimension 4");
    v * d * v.adjoint()
}

/// `max |U^dagger U - I|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let id = CMatrix::identity(u.dim).expect("valid dimension");
    (u.adjoint() * *u).distance(&id)
}

// Closed form for 2x2: H = c0 I + r n.sigma.
fn pauli_decompose(m: &CMatrix) -> (f64, [f64; 3]) {
    let a = m.get(0, 0).re;
    let d = m.get(1, 1).re;
    let b = m.get(0, 1);
    ((a + d) / 2.0, [b.re, -b.im, (a - d) / 2.0])
}

fn expm2(m: &CMatrix, t: f64) -> CMatrix {
    let (c0, v) = pauli_decompose(m);
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let global = C64::from_polar(1.0, -c0 * t);
    let (c, s_over_r) = if r == 0.0 {
        (1.0, t)
    } else {
        ((r * t).cos(), (r * t).sin() / r)
    };
    let i = C64::i();
    // cos(rt) I - i sin(rt)/r (v.sigma)
    let e00 = C64::new(c, 0.0) - i * s_over_r * v[2];
    let e11 = C64::new(c, 0.0) + i * s_over_r * v[2];
    let e01 = -i * s_over_r * C64::new(v[0], -v[1]);
    let e10 = -i * s_over_r * C64::new(v[0], v[1]);
    CMatrix::from_rows(&[&[e00, e01], &[e10, e11]])
        .expect("2x2")
        .scale(global)
}

fn eigen2(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let (c0, v) = pauli_decompose(m);
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if r == 0.0 {
        return (vec![c0, c0], CMatrix::identity(2).expect("2x2"));
    }
    // Eigenvector of n.sigma with eigenvalue +1 and -1 on the Bloch sphere.
    let (nx, ny, nz) = (v[0] / r, v[1] / r, v[2] / r);
    let theta = nz.clamp(-1.0, 1.0).acos();
    let phi = ny.atan2(nx);
    let up0 = C64::new((theta / 2.0).cos(), 0.0);
    let up1 = C64::from_polar((theta / 2.0).sin(), phi);
    let dn0 = C64::new(-(theta / 2.0).sin(), 0.0);
    let dn1 = C64::from_polar((theta / 2.0).cos(), phi);
    let vecs = CMatrix::from_rows(&[&[up0, dn0], &[up1, dn1]]).expect("2x2");
    (vec![c0 + r, c0 - r], vecs)
}

/// Cyclic complex Jacobi diagonalization of a hermitian matrix.
fn jacobi_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.dim;
    let mut a = *m;
    let mut v = CMatrix::identity(n).expect("valid dimension");
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a.get(p, q).norm());
            }
        }
        if off <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let mag = apq.norm();
                if mag <= 1e-18 * scale {
                    continue;
                }
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let theta = 0.5 * (2.0 * mag).atan2(aqq - app);
                let (s, c) = theta.sin_cos();
                // phase factor that makes the (p, q) entry real before rotating
                let ph = (apq / mag).conj();
                let mut g = CMatrix::identity(n).expect("valid dimension");
                g.set(p, p, C64::new(c, 0.0));
                g.set(p, q, C64::new(s, 0.0));
                g.set(q, p, ph * -s);
                g.set(q, q, ph * c);
                a = g.adjoint() * a * g;
                a.set(p, q, ZERO);
                a.set(q, p, ZERO);
                v = v * g;
            }
        }
    }
    let vals = (0..n).map(|i| a.get(i, i).re).collect();
    (vals, v)
}

/// Spin-1/2 operators (Pauli matrices over two) and two-spin embeddings.
///
/// The two-spin basis is ordered electron first: |up,up>, |up,down>,
/// |down,up>, |down,down>.
pub mod spin {
    use super::{kron, CMatrix, C64};

    pub fn sx() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 0.5], &[0.5, 0.0]]).expect("2x2")
    }

    pub fn sy() -> CMatrix {
        let h = C64::new(0.0, 0.5);
        CMatrix::from_rows(&[&[C64::new(0.0, 0.0), -h], &[h, C64::new(0.0, 0.0)]])
            .expect("2x2")
    }

    pub fn sz() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.5, 0.0], &[0.0, -0.5]]).expect("2x2")
    }

    pub fn id2() -> CMatrix {
        CMatrix::identity(2).expect("2x2")
    }

    /// Electron operator lifted to the two-spin space.
    pub fn electron(op: &CMatrix) -> CMatrix {
        kron(op, &id2()).expect("2x2 factors")
    }

    /// Nuclear operator lifted to the two-spin space.
    pub fn nuclear(op: &CMatrix) -> CMatrix {
        kron(&id2(), op).expect("2x2 factors")
    }
}

#[cfg(test)]
mod tests {
    use super::spin::*;
    use super::*;

    fn rot_x(phi: f64) -> CMatrix {
        // exp(-i phi sigma_x / 2) written out by hand
        let c = C64::new((phi / 2.0).cos(), 0.0);
        let s = C64::new(0.0, -(phi / 2.0).sin());
        CMatrix::from_rows(&[&[c, s], &[s, c]]).unwrap()
    }

    #[test]
    fn rejects_bad_dimension() {
        assert_eq!(CMatrix::zeros(3), Err(LinalgError::BadDimension(3)));
    }

    #[test]
    fn kron_of_identities() {
        let k = kron(&id2(), &id2()).unwrap();
        assert_eq!(k, CMatrix::identity(4).unwrap());
        let big = CMatrix::identity(4).unwrap();
        assert!(matches!(kron(&big, &id2()), Err(LinalgError::KronTooLarge(4, 2))));
    }

    #[test]
    fn kron_ordering_is_electron_first() {
        let ez = electron(&sz());
        assert_eq!(ez.get(0, 0).re, 0.5);
        assert_eq!(ez.get(1, 1).re, 0.5);
        assert_eq!(ez.get(2, 2).re, -0.5);
        let nz = nuclear(&sz());
        assert_eq!(nz.get(1, 1).re, -0.5);
        assert_eq!(nz.get(2, 2).re, 0.5);
    }

    #[test]
    fn expm_of_sx_is_rotation() {
        let g = HermitianGenerator::new(sx()).unwrap();
        let u = hermitian_expm(&g, std::f64::consts::PI);
        let expected = rot_x(std::f64::consts::PI);
        assert!(u.distance(&expected) < 1e-14);
    }

    #[test]
    fn expm4_matches_kron_of_rotations() {
        // Sx on both spins commute, so exp factorizes.
        let h = electron(&sx()).scale_real(0.7) + nuclear(&sx()).scale_real(1.3);
        let g = HermitianGenerator::new(h).unwrap();
        let u = hermitian_expm(&g, 2.1);
        let expected = kron(&rot_x(0.7 * 2.1), &rot_x(1.3 * 2.1)).unwrap();
        assert!(u.distance(&expected) < 1e-13, "{}", u.distance(&expected));
        assert!(unitarity_defect(&u) < 1e-13);
    }

    #[test]
    fn jacobi_reconstructs_generator() {
        let h = electron(&sz()) * nuclear(&sx()).scale_real(0.3)
            + nuclear(&sz())
            + electron(&sy()).scale_real(0.2)
            + nuclear(&sy()).scale_real(-0.45);
        let g = HermitianGenerator::new(h).unwrap();
        let (vals, v) = g.eigen();
        let d = CMatrix::diag(&vals.iter().map(|x| C64::new(*x, 0.0)).collect::<Vec<_>>()).unwrap();
        assert!((v * d * v.adjoint()).distance(&h) < 1e-13);
        assert!(unitarity_defect(&v) < 1e-13);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(HermitianGenerator::new(m), Err(LinalgError::NotHermitian(_))));
    }

    #[test]
    fn degenerate_generator() {
        let g = HermitianGenerator::new(CMatrix::identity(4).unwrap()).unwrap();
        let u = hermitian_expm(&g, 0.5);
        let expected = CMatrix::identity(4).unwrap().scale(C64::from_polar(1.0, -0.5));
        assert!(u.distance(&expected) < 1e-15);
    }

    #[test]
    fn powi_matches_repeated_product() {
        let r = rot_x(0.3);
        let mut p = CMatrix::identity(2).unwrap();
        for _ in 0..13 {
            p = p * r;
        }
        assert!(r.powi(13).distance(&p) < 1e-14);
    }
}
