//! Exact 2x2 complex algebra for a polarization qubit.
//!
//! Basis ordering is (H, V). The Bloch vector is `(x, y, z)` with
//! `rho = (I + x X + y Y + z Z) / 2`, so that H sits at `z = +1`,
//! D = (H + V)/sqrt2 at `x = +1` and R = (H + iV)/sqrt2 at `y = +1`.
//! In Stokes language this is `(s2, s3, s1) / s0`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I_UNIT: C64 = C64::new(0.0, 1.0);

/// Hermiticity and trace tolerance for density matrices.
pub const STATE_TOL: f64 = 1e-12;
/// Eigenvalue floor accepted as positive semidefinite.
pub const PSD_FLOOR: f64 = -1e-10;
/// Bloch norms up to `1 + BLOCH_TOL` are accepted as physical.
pub const BLOCH_TOL: f64 = 1e-10;
/// Tolerance on `U^dag U = I` when validating a matrix as unitary.
pub const UNITARY_TOL: f64 = 1e-10;

/// A general 2x2 complex matrix, row-major `[m00, m01, m10, m11]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [C64; 4]);

impl Mat2 {
    pub const fn new(m00: C64, m01: C64, m10: C64, m11: C64) -> Self {
        Self([m00, m01, m10, m11])
    }

    pub const fn identity() -> Self {
        Self([ONE, ZERO, ZERO, ONE])
    }

    pub const fn zeros() -> Self {
        Self([ZERO; 4])
    }

    pub fn diag(a: C64, b: C64) -> Self {
        Self([a, ZERO, ZERO, b])
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[2 * row + col]
    }

    #[inline]
    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Self([m[0].conj(), m[2].conj(), m[1].conj(), m[3].conj()])
    }

    #[inline]
    pub fn trace(&self) -> C64 {
        self.0[0] + self.0[3]
    }

    #[inline]
    pub fn det(&self) -> C64 {
        self.0[0] * self.0[3] - self.0[1] * self.0[2]
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(self.0.map(|x| x * s))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (*self - *other).max_abs()
    }

    /// Frobenius inner product `Tr(self^dag other)`.
    pub fn inner(&self, other: &Mat2) -> C64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    #[inline]
    fn mul(self, b: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &b.0;
        Mat2([
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ])
    }
}

impl Add for Mat2 {
    type Output = Mat2;

    fn add(self, b: Mat2) -> Mat2 {
        Mat2([
            self.0[0] + b.0[0],
            self.0[1] + b.0[1],
            self.0[2] + b.0[2],
            self.0[3] + b.0[3],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;

    fn sub(self, b: Mat2) -> Mat2 {
        Mat2([
            self.0[0] - b.0[0],
            self.0[1] - b.0[1],
            self.0[2] - b.0[2],
            self.0[3] - b.0[3],
        ])
    }
}

impl Neg for Mat2 {
    type Output = Mat2;

    fn neg(self) -> Mat2 {
        Mat2(self.0.map(|x| -x))
    }
}

/// The four elements of the single-qubit Pauli group (up to phase).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> Mat2 {
        match self {
            Pauli::I => Mat2::identity(),
            Pauli::X => Mat2::new(ZERO, ONE, ONE, ZERO),
            Pauli::Y => Mat2::new(ZERO, -I_UNIT, I_UNIT, ZERO),
            Pauli::Z => Mat2::diag(ONE, -ONE),
        }
    }

    /// The three non-trivial Pauli matrices in `(X, Y, Z)` order.
    pub fn sigma() -> [Mat2; 3] {
        [Pauli::X.matrix(), Pauli::Y.matrix(), Pauli::Z.matrix()]
    }
}

/// Standard Pauli operator as an optical element.
pub fn pauli(axis: Pauli) -> Unitary {
    Unitary(axis.matrix())
}

/// A lossless optical element (or product of elements) acting on the Jones vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unitary(Mat2);

impl Unitary {
    /// Validates `m` as unitary within [`UNITARY_TOL`].
    pub fn new(m: Mat2) -> Result<Self> {
        let u = Unitary(m);
        let deviation = u.unitarity_error();
        if deviation.is_finite() && deviation <= UNITARY_TOL {
            Ok(u)
        } else {
            Err(Error::NotUnitary { deviation })
        }
    }

    /// Caller guarantees that `m` is unitary (products of unitaries, closed forms).
    pub(crate) const fn from_mat_unchecked(m: Mat2) -> Self {
        Unitary(m)
    }

    pub const fn identity() -> Self {
        Unitary(Mat2::identity())
    }

    /// `exp(-i alpha s.sigma)` for a unit axis `s`.
    pub fn exp_rotation(alpha: f64, axis: [f64; 3]) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let s = if n > 0.0 {
            [axis[0] / n, axis[1] / n, axis[2] / n]
        } else {
            [0.0, 0.0, 1.0]
        };
        let (sn, cs) = alpha.sin_cos();
        // cos a I - i sin a (sx X + sy Y + sz Z)
        Unitary(Mat2::new(
            C64::new(cs, -sn * s[2]),
            C64::new(-sn * s[1], -sn * s[0]),
            C64::new(sn * s[1], -sn * s[0]),
            C64::new(cs, sn * s[2]),
        ))
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Unitary(self.0.adjoint())
    }

    /// Global phase multiplication, e.g. to compare against `-I`.
    pub fn with_phase(&self, phase: f64) -> Self {
        Unitary(self.0.scale(C64::from_polar(1.0, phase)))
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Unitary::identity();
        let mut base = *self;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    /// Max entry of `|U^dag U - I|`.
    pub fn unitarity_error(&self) -> f64 {
        (self.0.adjoint() * self.0).max_abs_diff(&Mat2::identity())
    }

    /// Entrywise distance after removing the relative global phase.
    pub fn projective_distance(&self, other: &Unitary) -> f64 {
        let overlap = self.0.inner(&other.0);
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        self.0.scale(phase).max_abs_diff(&other.0)
    }

    /// SO(3) rotation induced on Bloch vectors: `R_ij = Tr(s_i U s_j U^dag) / 2`.
    pub fn bloch_rotation(&self) -> Matrix3<f64> {
        let sigma = Pauli::sigma();
        let ud = self.0.adjoint();
        let mut r = Matrix3::zeros();
        for j in 0..3 {
            let conj = self.0 * sigma[j] * ud;
            for i in 0..3 {
                r[(i, j)] = 0.5 * (sigma[i] * conj).trace().re;
            }
        }
        r
    }
}

impl Mul for Unitary {
    type Output = Unitary;

    #[inline]
    fn mul(self, rhs: Unitary) -> Unitary {
        Unitary(self.0 * rhs.0)
    }
}

/// Real 3-vector on or inside the Bloch (Poincare) sphere.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, o: &BlochVector) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn distance(&self, o: &BlochVector) -> f64 {
        let d = BlochVector::new(self.x - o.x, self.y - o.y, self.z - o.z);
        d.norm()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    /// Unit vector in the same direction; `None` for the origin.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0).then(|| self.scaled(1.0 / n))
    }
}

impl From<[f64; 3]> for BlochVector {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl fmt::Display for BlochVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Jones vector `(h, v)` of a fully polarized field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JonesVector {
    pub h: C64,
    pub v: C64,
}

impl JonesVector {
    /// Any non-zero pair; use [`JonesVector::normalized`] before computing overlaps.
    pub fn new(h: C64, v: C64) -> Result<Self> {
        let n = h.norm_sqr() + v.norm_sqr();
        if n > 0.0 && n.is_finite() {
            Ok(Self { h, v })
        } else {
            Err(Error::ZeroJones)
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        Self {
            h: self.h / n,
            v: self.v / n,
        }
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= STATE_TOL
    }

    pub fn horizontal() -> Self {
        Self { h: ONE, v: ZERO }
    }

    pub fn vertical() -> Self {
        Self { h: ZERO, v: ONE }
    }

    pub fn diagonal() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            h: C64::new(s, 0.0),
            v: C64::new(s, 0.0),
        }
    }

    pub fn antidiagonal() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            h: C64::new(s, 0.0),
            v: C64::new(-s, 0.0),
        }
    }

    pub fn right() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            h: C64::new(s, 0.0),
            v: C64::new(0.0, s),
        }
    }

    pub fn left() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            h: C64::new(s, 0.0),
            v: C64::new(0.0, -s),
        }
    }

    /// Pure state with the given Bloch direction (the vector is normalized).
    pub fn from_bloch(p: &BlochVector) -> Result<Self> {
        let u = p.normalized().ok_or(Error::ZeroJones)?;
        // cos(t/2) |H> + e^{i f} sin(t/2) |V>
        let theta = u.z.clamp(-1.0, 1.0).acos();
        let phi = u.y.atan2(u.x);
        Ok(Self {
            h: C64::new((theta / 2.0).cos(), 0.0),
            v: C64::from_polar((theta / 2.0).sin(), phi),
        })
    }

    pub fn bloch(&self) -> BlochVector {
        let n = self.norm_sqr();
        let c = self.h * self.v.conj();
        BlochVector::new(
            2.0 * c.re / n,
            -2.0 * c.im / n,
            (self.h.norm_sqr() - self.v.norm_sqr()) / n,
        )
    }

    pub fn apply(&self, u: &Unitary) -> Self {
        let m = u.matrix();
        Self {
            h: m.0[0] * self.h + m.0[1] * self.v,
            v: m.0[2] * self.h + m.0[3] * self.v,
        }
    }
}

/// Hermitian, unit-trace, positive semidefinite 2x2 density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarizationState {
    rho: Mat2,
}

impl PolarizationState {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(rho: Mat2) -> Result<Self> {
        let herm = rho.max_abs_diff(&rho.adjoint());
        if !(herm <= STATE_TOL) {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let state = Self { rho };
        let (lo, _) = state.eigenvalues();
        if lo < PSD_FLOOR {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {lo:e}"
            )));
        }
        Ok(state)
    }

    /// `(I + p.sigma) / 2`.
    pub fn from_bloch(p: &BlochVector) -> Result<Self> {
        let n = p.norm();
        if !(n <= 1.0 + BLOCH_TOL) {
            return Err(Error::UnphysicalBloch { norm: n });
        }
        Ok(Self::from_bloch_unchecked(p))
    }

    pub(crate) fn from_bloch_unchecked(p: &BlochVector) -> Self {
        Self {
            rho: Mat2::new(
                C64::new(0.5 * (1.0 + p.z), 0.0),
                C64::new(0.5 * p.x, -0.5 * p.y),
                C64::new(0.5 * p.x, 0.5 * p.y),
                C64::new(0.5 * (1.0 - p.z), 0.0),
            ),
        }
    }

    pub fn pure(psi: &JonesVector) -> Self {
        let p = psi.normalized();
        Self {
            rho: Mat2::new(
                p.h * p.h.conj(),
                p.h * p.v.conj(),
                p.v * p.h.conj(),
                p.v * p.v.conj(),
            ),
        }
    }

    pub fn maximally_mixed() -> Self {
        Self::from_bloch_unchecked(&BlochVector::default())
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.rho
    }

    pub fn bloch(&self) -> BlochVector {
        let r = &self.rho;
        let off = r.get(0, 1);
        BlochVector::new(2.0 * off.re, -2.0 * off.im, (r.get(0, 0) - r.get(1, 1)).re)
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.rho.inner(&self.rho).re
    }

    /// `<pi|rho|pi>` for a normalized pure reference state.
    pub fn fidelity_pure(&self, pi: &JonesVector) -> Result<f64> {
        if !pi.is_normalized() {
            return Err(Error::NotNormalized {
                norm_sqr: pi.norm_sqr(),
            });
        }
        Ok(self.expectation(pi))
    }

    /// `<pi|rho|pi> / <pi|pi>` without the normalization check.
    pub fn expectation(&self, pi: &JonesVector) -> f64 {
        let r = &self.rho;
        let (h, v) = (pi.h, pi.v);
        let val = h.conj() * (r.0[0] * h + r.0[1] * v) + v.conj() * (r.0[2] * h + r.0[3] * v);
        val.re / pi.norm_sqr()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let p = self.bloch().norm();
        let tr = self.rho.trace().re;
        (0.5 * (tr - p), 0.5 * (tr + p))
    }

    /// `U rho U^dag`.
    pub fn evolve(&self, u: &Unitary) -> Self {
        let m = u.matrix();
        Self {
            rho: *m * self.rho * m.adjoint(),
        }
    }
}

/// `rho = (I + p.sigma) / 2`; rejects `|p| > 1 + 1e-10`.
pub fn density_from_bloch(p: &BlochVector) -> Result<PolarizationState> {
    PolarizationState::from_bloch(p)
}

pub fn bloch_from_density(rho: &PolarizationState) -> BlochVector {
    rho.bloch()
}

pub fn purity(rho: &PolarizationState) -> f64 {
    rho.purity()
}

pub fn fidelity_pure(rho: &PolarizationState, pi: &JonesVector) -> Result<f64> {
    rho.fidelity_pure(pi)
}

pub fn apply_unitary(u: &Unitary, rho: &PolarizationState) -> PolarizationState {
    rho.evolve(u)
}

/// Purity from a Bloch vector, `(1 + |p|^2) / 2`.
pub fn purity_of_bloch(p: &BlochVector) -> f64 {
    0.5 * (1.0 + p.dot(p))
}

/// Fidelity of a state with Bloch vector `out` to the pure state at `input`.
pub fn fidelity_of_bloch(input: &BlochVector, out: &BlochVector) -> f64 {
    0.5 * (1.0 + input.dot(out))
}
