//! Two-level state representations.
//!
//! Basis index 0 is the excited state `|e>` and index 1 the ground state
//! `|g>`, so `sigma_z = diag(1, -1)` and the lowering operator
//! `sigma = |g><e|` has its single non-zero entry at `[1][0]`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Slack allowed on `|v| <= 1` and on the `y = 0` plane constraint.
pub const DEFAULT_PURE_TOLERANCE: f64 = 1e-9;

const DENSITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const GROUND: BlochVector = BlochVector {
        x: 0.0,
        y: 0.0,
        z: -1.0,
    };
    pub const EXCITED: BlochVector = BlochVector {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    /// True when the vector lies in the closed unit ball, up to `tolerance`.
    pub fn is_physical(&self, tolerance: f64) -> bool {
        self.norm_sqr() <= 1.0 + tolerance
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn max_abs_diff(&self, other: &BlochVector) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }
}

impl From<[f64; 3]> for BlochVector {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl Add for BlochVector {
    type Output = BlochVector;
    fn add(self, rhs: BlochVector) -> BlochVector {
        BlochVector::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for BlochVector {
    type Output = BlochVector;
    fn sub(self, rhs: BlochVector) -> BlochVector {
        BlochVector::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// A state in the x-z plane given by its Bloch angle and radius.
///
/// `theta` is measured from `+z` (the excited state) towards `+x` and kept in
/// `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarState {
    pub theta: f64,
    pub r: f64,
    /// Set when the radius is zero and the angle carries no information.
    pub degenerate: bool,
}

impl PolarState {
    pub fn new(theta: f64, r: f64) -> Self {
        Self {
            theta: wrap_angle(theta),
            r,
            degenerate: r == 0.0,
        }
    }

    pub fn pure(theta: f64) -> Self {
        Self::new(theta, 1.0)
    }
}

/// Maps an angle onto `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let w = theta - 2.0 * PI * ((theta + PI) / (2.0 * PI)).floor();
    // w is in [-pi, pi) now
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Purity of the state, `2 Tr[rho^2] - 1 = x^2 + y^2 + z^2`.
pub fn purity(v: &BlochVector) -> f64 {
    v.norm_sqr()
}

pub fn bloch_from_polar(p: &PolarState) -> BlochVector {
    let (s, c) = p.theta.sin_cos();
    BlochVector::new(p.r * s, 0.0, p.r * c)
}

pub fn polar_from_bloch(v: &BlochVector, tolerance: f64) -> Result<PolarState> {
    if v.y.abs() >= tolerance {
        return Err(Error::OutOfPlane { y: v.y });
    }
    let r = v.x.hypot(v.z);
    if r == 0.0 {
        return Ok(PolarState {
            theta: 0.0,
            r: 0.0,
            degenerate: true,
        });
    }
    Ok(PolarState {
        theta: wrap_angle(v.x.atan2(v.z)),
        r,
        degenerate: false,
    })
}

/// A plain 2x2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix2(pub [[Complex64; 2]; 2]);

impl Matrix2 {
    pub const ZERO: Matrix2 = Matrix2([[Complex64::new(0.0, 0.0); 2]; 2]);

    pub fn identity() -> Self {
        Self::real([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn real(m: [[f64; 2]; 2]) -> Self {
        Matrix2([
            [m[0][0].into(), m[0][1].into()],
            [m[1][0].into(), m[1][1].into()],
        ])
    }

    pub fn sigma_x() -> Self {
        Self::real([[0.0, 1.0], [1.0, 0.0]])
    }

    pub fn sigma_y() -> Self {
        let i = Complex64::i();
        Matrix2([[0.0.into(), -i], [i, 0.0.into()]])
    }

    pub fn sigma_z() -> Self {
        Self::real([[1.0, 0.0], [0.0, -1.0]])
    }

    /// Lowering operator `|g><e|`.
    pub fn lowering() -> Self {
        Self::real([[0.0, 0.0], [1.0, 0.0]])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Matrix2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let m = &self.0;
        Matrix2([[m[0][0] * k, m[0][1] * k], [m[1][0] * k, m[1][1] * k]])
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tolerance: f64) -> bool {
        (*self - self.adjoint()).max_abs() <= tolerance
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;
    fn add(self, rhs: Matrix2) -> Matrix2 {
        let (a, b) = (&self.0, &rhs.0);
        Matrix2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Matrix2 {
    type Output = Matrix2;
    fn sub(self, rhs: Matrix2) -> Matrix2 {
        self + rhs.scale((-1.0).into())
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;
    fn mul(self, rhs: Matrix2) -> Matrix2 {
        let (a, b) = (&self.0, &rhs.0);
        Matrix2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// A validated two-level density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Matrix2);

impl DensityMatrix {
    /// Checks hermiticity, unit trace and positivity to `1e-12`.
    pub fn new(m: Matrix2) -> Result<Self> {
        if !m.is_hermitian(DENSITY_TOLERANCE) {
            return Err(Error::InvalidDensity("not Hermitian"));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOLERANCE || tr.im.abs() > DENSITY_TOLERANCE {
            return Err(Error::InvalidDensity("trace is not 1"));
        }
        // Eigenvalues of a unit-trace Hermitian 2x2 are (1 +- |v|)/2.
        let v = bloch_components(&m);
        if 0.5 * (1.0 - v.norm()) < -DENSITY_TOLERANCE {
            return Err(Error::InvalidDensity("negative eigenvalue"));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix2 {
        &self.0
    }

    /// `|theta><theta|` with `|theta> = cos(theta/2)|e> + sin(theta/2)|g>`.
    pub fn pure_polar(theta: f64) -> Self {
        let (s, c) = (0.5 * theta).sin_cos();
        Self(Matrix2::real([[c * c, c * s], [s * c, s * s]]))
    }
}

fn bloch_components(m: &Matrix2) -> BlochVector {
    let m = &m.0;
    // rho_01 = (x - i y)/2, rho_00 - rho_11 = z
    BlochVector::new(2.0 * m[0][1].re, -2.0 * m[0][1].im, (m[0][0] - m[1][1]).re)
}

/// `rho = (I + x sigma_x + y sigma_y + z sigma_z) / 2`.
pub fn density_from_bloch(v: &BlochVector) -> DensityMatrix {
    let half = 0.5;
    DensityMatrix(Matrix2([
        [
            Complex64::new(half * (1.0 + v.z), 0.0),
            Complex64::new(half * v.x, -half * v.y),
        ],
        [
            Complex64::new(half * v.x, half * v.y),
            Complex64::new(half * (1.0 - v.z), 0.0),
        ],
    ]))
}

pub fn bloch_from_density(m: &DensityMatrix) -> BlochVector {
    bloch_components(&m.0)
}

impl TryFrom<Matrix2> for DensityMatrix {
    type Error = Error;
    fn try_from(m: Matrix2) -> Result<Self> {
        DensityMatrix::new(m)
    }
}
