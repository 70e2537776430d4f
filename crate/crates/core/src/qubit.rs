//! Small fixed-size complex linear algebra for one and two qubits.
//!
//! Everything here is closed form: Pauli algebra, Bloch-vector states,
//! Kronecker products and 2x2 Hermitian eigenvalues. Matrices are dense,
//! row-major arrays of [`Complex`] entries.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A real 3-vector: measurement directions, Bloch vectors, and their combinations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 3]", into = "[T; 3]")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct Vector3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> From<[T; 3]> for Vector3<T> {
    fn from([x, y, z]: [T; 3]) -> Self {
        Self { x, y, z }
    }
}

impl<T: Real> From<Vector3<T>> for [T; 3] {
    fn from(v: Vector3<T>) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<T: Real> Vector3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn unit_x() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    pub fn unit_y() -> Self {
        Self::new(T::zero(), T::one(), T::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, other: &Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.x.hypot(self.y).hypot(self.z)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }
}

impl<T: Real> Add for Vector3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<T: Real> Sub for Vector3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<T: Real> Neg for Vector3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> fmt::Display for Vector3<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// A [`Vector3`] whose norm is 1 within [`Real::EXACT_TOL`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vector3<T>", into = "Vector3<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct UnitVector3<T>(Vector3<T>);

impl<T: Real> UnitVector3<T> {
    /// Accepts `v` only if it is already normalized.
    pub fn new(v: Vector3<T>) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        let norm = v.norm();
        if (norm - T::one()).abs() > T::EXACT_TOL {
            return Err(Error::NotUnit {
                norm: norm.to_f64_lossy(),
            });
        }
        Ok(Self(v))
    }

    /// Rescales `v` to unit length. Vectors shorter than [`Real::EXACT_TOL`] have no direction.
    pub fn normalize(v: Vector3<T>) -> Result<Self> {
        Self::normalize_named(v, "vector")
    }

    pub(crate) fn normalize_named(v: Vector3<T>, what: &'static str) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        let norm = v.norm();
        if norm <= T::EXACT_TOL {
            return Err(Error::DegenerateDirection(what));
        }
        Ok(Self(v.scale(norm.recip())))
    }

    pub fn x() -> Self {
        Self(Vector3::unit_x())
    }

    pub fn y() -> Self {
        Self(Vector3::unit_y())
    }

    pub fn z() -> Self {
        Self(Vector3::unit_z())
    }

    /// Direction in the xz-plane at polar angle `theta` from +z.
    pub fn polar_xz(theta: T) -> Self {
        Self(Vector3::new(theta.sin(), T::zero(), theta.cos()))
    }

    pub fn get(&self) -> Vector3<T> {
        self.0
    }

    pub fn negate(&self) -> Self {
        Self(-self.0)
    }
}

impl<T: Real> std::ops::Deref for UnitVector3<T> {
    type Target = Vector3<T>;
    fn deref(&self) -> &Vector3<T> {
        &self.0
    }
}

impl<T: Real> TryFrom<Vector3<T>> for UnitVector3<T> {
    type Error = Error;
    fn try_from(v: Vector3<T>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T: Real> From<UnitVector3<T>> for Vector3<T> {
    fn from(u: UnitVector3<T>) -> Self {
        u.0
    }
}

fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

/// Dense 2x2 complex matrix, row-major.
///
/// Serializes as four `[re, im]` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct ComplexMatrix2<T> {
    pub entries: [Complex<T>; 4],
}

impl<T: Real> ComplexMatrix2<T> {
    pub const fn new(entries: [Complex<T>; 4]) -> Self {
        Self { entries }
    }

    /// Builds a matrix from real entries `[[a, b], [c, d]]`.
    pub fn real(a: T, b: T, cc: T, d: T) -> Self {
        let z = T::zero();
        Self::new([c(a, z), c(b, z), c(cc, z), c(d, z)])
    }

    pub fn zero() -> Self {
        Self::new([Complex::new(T::zero(), T::zero()); 4])
    }

    pub fn identity() -> Self {
        Self::real(T::one(), T::zero(), T::zero(), T::one())
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        self.entries[2 * row + col]
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.entries.map(|z| z * s))
    }

    pub fn dagger(&self) -> Self {
        let e = &self.entries;
        Self::new([e[0].conj(), e[2].conj(), e[1].conj(), e[3].conj()])
    }

    pub fn trace(&self) -> Complex<T> {
        self.entries[0] + self.entries[3]
    }

    pub fn determinant(&self) -> Complex<T> {
        let e = &self.entries;
        e[0] * e[3] - e[1] * e[2]
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    /// Largest entrywise modulus of `self - self^dagger`.
    pub fn hermiticity_defect(&self) -> T {
        self.max_abs_diff(&self.dagger())
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermiticity_defect() <= tol
    }
}

impl<T: Real> Add for ComplexMatrix2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self.entries;
        for (o, r) in out.iter_mut().zip(rhs.entries) {
            *o = *o + r;
        }
        Self::new(out)
    }
}

impl<T: Real> Sub for ComplexMatrix2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self.entries;
        for (o, r) in out.iter_mut().zip(rhs.entries) {
            *o = *o - r;
        }
        Self::new(out)
    }
}

impl<T: Real> Mul for ComplexMatrix2<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let a = &self.entries;
        let b = &rhs.entries;
        Self::new([
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ])
    }
}

impl<T: Real> std::iter::Sum for ComplexMatrix2<T> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |acc, m| acc + m)
    }
}

pub fn sigma_x<T: Real>() -> ComplexMatrix2<T> {
    pauli_dot(&Vector3::unit_x())
}

pub fn sigma_y<T: Real>() -> ComplexMatrix2<T> {
    pauli_dot(&Vector3::unit_y())
}

pub fn sigma_z<T: Real>() -> ComplexMatrix2<T> {
    pauli_dot(&Vector3::unit_z())
}

/// `v.sigma = x sigma_x + y sigma_y + z sigma_z`.
pub fn pauli_dot<T: Real>(v: &Vector3<T>) -> ComplexMatrix2<T> {
    let z = T::zero();
    ComplexMatrix2::new([c(v.z, z), c(v.x, -v.y), c(v.x, v.y), c(-v.z, z)])
}

/// `(w 1 + v.sigma) / 2`, the general Hermitian 2x2 matrix in Pauli form.
pub(crate) fn half_identity_plus<T: Real>(w: T, v: &Vector3<T>) -> ComplexMatrix2<T> {
    (ComplexMatrix2::identity().scale(w) + pauli_dot(v)).scale(T::lit(0.5))
}

/// Closed-form eigenvalues of a Hermitian 2x2 matrix, ascending.
///
/// For `w 1 + v.sigma` this returns `(w - |v|, w + |v|)`.
pub fn hermitian_eigenvalues<T: Real>(mat: &ComplexMatrix2<T>) -> Result<(T, T)> {
    hermitian_eigenvalues_tol(mat, T::EXACT_TOL)
}

pub fn hermitian_eigenvalues_tol<T: Real>(mat: &ComplexMatrix2<T>, tol: T) -> Result<(T, T)> {
    let deviation = mat.hermiticity_defect();
    if deviation.is_nan() || deviation > tol {
        return Err(Error::NotHermitian {
            deviation: deviation.to_f64_lossy(),
        });
    }
    let half = T::lit(0.5);
    let a = mat.get(0, 0).re;
    let d = mat.get(1, 1).re;
    // off-diagonal averaged with the conjugate of its mirror to absorb rounding
    let b = (mat.get(0, 1) + mat.get(1, 0).conj()).scale(half);
    let mean = (a + d) * half;
    let radius = ((a - d) * half).hypot(b.norm());
    Ok((mean - radius, mean + radius))
}

/// Re Tr(obs rho). Fails if `obs` is not Hermitian within [`Real::EXACT_TOL`].
pub fn expectation<T: Real>(obs: &ComplexMatrix2<T>, state: &QubitState<T>) -> Result<T> {
    let deviation = obs.hermiticity_defect();
    if deviation.is_nan() || deviation > T::EXACT_TOL {
        return Err(Error::NotHermitian {
            deviation: deviation.to_f64_lossy(),
        });
    }
    Ok((*obs * state.rho).trace().re)
}

/// Single-qubit density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct QubitState<T> {
    rho: ComplexMatrix2<T>,
}

impl<T: Real> QubitState<T> {
    /// `rho = (1 + m.sigma) / 2`. Requires `|m| <= 1 + EXACT_TOL`.
    pub fn from_bloch(m: &Vector3<T>) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        let norm = m.norm();
        if norm > T::one() + T::EXACT_TOL {
            return Err(Error::BlochOutOfBall {
                norm: norm.to_f64_lossy(),
            });
        }
        Ok(Self {
            rho: half_identity_plus(T::one(), m),
        })
    }

    /// Validates an explicit density matrix: Hermitian, unit trace, eigenvalues >= -tol.
    pub fn from_matrix(rho: ComplexMatrix2<T>) -> Result<Self> {
        let tol = T::EXACT_TOL;
        if !rho.is_finite() {
            return Err(Error::NonFinite);
        }
        let (lo, _) =
            hermitian_eigenvalues_tol(&rho, tol).map_err(|e| Error::InvalidState(e.to_string()))?;
        let tr = rho.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidState(format!("trace {} != 1", tr)));
        }
        if lo < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {lo}")));
        }
        Ok(Self { rho })
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho: ComplexMatrix2::identity().scale(T::lit(0.5)),
        }
    }

    /// Pure state with spin up along `n`.
    pub fn spin_up(n: &UnitVector3<T>) -> Self {
        Self {
            rho: half_identity_plus(T::one(), n),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix2<T> {
        &self.rho
    }

    /// `(<sigma_x>, <sigma_y>, <sigma_z>)`.
    pub fn bloch_vector(&self) -> Vector3<T> {
        let r = &self.rho;
        let two = T::lit(2.0);
        Vector3::new(
            r.get(1, 0).re * two,
            r.get(1, 0).im * two,
            r.get(0, 0).re - r.get(1, 1).re,
        )
    }

    /// `<n.sigma>` without the hermiticity check on the observable.
    pub fn spin_expectation(&self, n: &Vector3<T>) -> T {
        (pauli_dot(n) * self.rho).trace().re
    }
}

/// Dense 4x4 complex matrix, row-major, qubit-1-major index ordering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct ComplexMatrix4<T> {
    pub entries: [Complex<T>; 16],
}

impl<T: Real> ComplexMatrix4<T> {
    pub const fn new(entries: [Complex<T>; 16]) -> Self {
        Self { entries }
    }

    pub fn zero() -> Self {
        Self::new([Complex::new(T::zero(), T::zero()); 16])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            m.entries[5 * i] = Complex::new(T::one(), T::zero());
        }
        m
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        self.entries[4 * row + col]
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn trace(&self) -> Complex<T> {
        (0..4)
            .map(|i| self.get(i, i))
            .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
    }

    pub fn dagger(&self) -> Self {
        let mut out = Self::zero();
        for r in 0..4 {
            for col in 0..4 {
                out.entries[4 * r + col] = self.get(col, r).conj();
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    pub fn hermiticity_defect(&self) -> T {
        self.max_abs_diff(&self.dagger())
    }

    /// Traces out qubit 2, leaving the qubit-1 block.
    pub fn partial_trace_second(&self) -> ComplexMatrix2<T> {
        let mut out = [Complex::new(T::zero(), T::zero()); 4];
        for i in 0..2 {
            for j in 0..2 {
                out[2 * i + j] = self.get(2 * i, 2 * j) + self.get(2 * i + 1, 2 * j + 1);
            }
        }
        ComplexMatrix2::new(out)
    }

    /// Traces out qubit 1.
    pub fn partial_trace_first(&self) -> ComplexMatrix2<T> {
        let mut out = [Complex::new(T::zero(), T::zero()); 4];
        for i in 0..2 {
            for j in 0..2 {
                out[2 * i + j] = self.get(i, j) + self.get(2 + i, 2 + j);
            }
        }
        ComplexMatrix2::new(out)
    }

    /// True if `self + tol * 1` admits a Cholesky factorization, i.e. every
    /// eigenvalue of the (Hermitian) matrix exceeds `-tol`.
    #[allow(clippy::needless_range_loop)]
    pub fn is_positive_semidefinite(&self, tol: T) -> bool {
        let mut l = [[Complex::new(T::zero(), T::zero()); 4]; 4];
        for j in 0..4 {
            let mut d = self.get(j, j).re + tol;
            for k in 0..j {
                d = d - l[j][k].norm_sqr();
            }
            if d.is_nan() || d <= T::zero() {
                return false;
            }
            let djj = d.sqrt();
            l[j][j] = Complex::new(djj, T::zero());
            for i in (j + 1)..4 {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s = s - l[i][k] * l[j][k].conj();
                }
                l[i][j] = s.unscale(djj);
            }
        }
        true
    }
}

impl<T: Real> Mul for ComplexMatrix4<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for r in 0..4 {
            for col in 0..4 {
                let mut acc = Complex::new(T::zero(), T::zero());
                for k in 0..4 {
                    acc = acc + self.get(r, k) * rhs.get(k, col);
                }
                out.entries[4 * r + col] = acc;
            }
        }
        out
    }
}

/// Kronecker product `a (x) b` with qubit-1-major ordering.
pub fn tensor2<T: Real>(a: &ComplexMatrix2<T>, b: &ComplexMatrix2<T>) -> ComplexMatrix4<T> {
    let mut out = ComplexMatrix4::zero();
    for i1 in 0..2 {
        for j1 in 0..2 {
            let aij = a.get(i1, j1);
            for i2 in 0..2 {
                for j2 in 0..2 {
                    out.entries[4 * (2 * i1 + i2) + (2 * j1 + j2)] = aij * b.get(i2, j2);
                }
            }
        }
    }
    out
}

/// Two-qubit density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct TwoQubitState<T> {
    rho4: ComplexMatrix4<T>,
}

impl<T: Real> TwoQubitState<T> {
    /// Validates Hermiticity and unit trace within `EXACT_TOL`, and
    /// eigenvalues `>= -VALIDATION_TOL`.
    pub fn new(rho4: ComplexMatrix4<T>) -> Result<Self> {
        if !rho4.is_finite() {
            return Err(Error::NonFinite);
        }
        let defect = rho4.hermiticity_defect();
        if defect.is_nan() || defect > T::EXACT_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {defect})"
            )));
        }
        let tr = rho4.trace();
        if (tr.re - T::one()).abs() > T::EXACT_TOL || tr.im.abs() > T::EXACT_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        if !rho4.is_positive_semidefinite(T::VALIDATION_TOL) {
            return Err(Error::InvalidState("negative eigenvalue".into()));
        }
        Ok(Self { rho4 })
    }

    pub fn product(first: &QubitState<T>, second: &QubitState<T>) -> Self {
        Self {
            rho4: tensor2(first.matrix(), second.matrix()),
        }
    }

    /// `|psi-><psi-|` with `|psi-> = (|+->  - |-+>) / sqrt 2` in the sigma_z basis.
    pub fn singlet() -> Self {
        let half = T::lit(0.5);
        let mut rho4 = ComplexMatrix4::zero();
        rho4.entries[4 + 1] = Complex::new(half, T::zero());
        rho4.entries[8 + 2] = Complex::new(half, T::zero());
        rho4.entries[4 + 2] = Complex::new(-half, T::zero());
        rho4.entries[8 + 1] = Complex::new(-half, T::zero());
        Self { rho4 }
    }

    pub fn matrix(&self) -> &ComplexMatrix4<T> {
        &self.rho4
    }

    pub fn reduced_first(&self) -> QubitState<T> {
        QubitState {
            rho: self.rho4.partial_trace_second(),
        }
    }

    pub fn reduced_second(&self) -> QubitState<T> {
        QubitState {
            rho: self.rho4.partial_trace_first(),
        }
    }

    /// Tr(rho^2).
    pub fn purity(&self) -> T {
        (self.rho4 * self.rho4).trace().re
    }

    /// Re Tr[(a (x) b) rho].
    pub fn expectation(&self, a: &ComplexMatrix2<T>, b: &ComplexMatrix2<T>) -> T {
        (tensor2(a, b) * self.rho4).trace().re
    }
}
