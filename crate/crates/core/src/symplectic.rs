//! Small-matrix algebra for quadrature transformations.
//!
//! Single-mode transformations act on `(x, y)`; two-mode ones on
//! `(x_1, x_2, y_1, y_2)`. A 2x2 real matrix is symplectic iff its
//! determinant is one. For the two-mode ordering the symplectic form is
//! `Omega = [[0, I/2], [-I/2, 0]]`, matching `[x_i, y_i] = i/2`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::Mul;

use nalgebra::{DMatrix, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for every matrix comparison, in maximum absolute entry difference.
pub const MATRIX_TOL: f64 = 1e-9;

/// Distance (radians) from a pole of tan/cot below which a phase is singular.
pub const SINGULARITY_EPS: f64 = 1e-9;

/// A homodyne local-oscillator phase or rotator angle, in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PhaseAngle(f64);

impl PhaseAngle {
    pub const ZERO: PhaseAngle = PhaseAngle(0.0);
    pub const QUARTER_TURN: PhaseAngle = PhaseAngle(FRAC_PI_2);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(PhaseAngle(value))
        } else {
            Err(Error::Domain(format!("phase must be finite, got {value}")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// The same angle mapped into `(-pi, pi]`.
    pub fn canonical(self) -> PhaseAngle {
        PhaseAngle(canonical_angle(self.0))
    }
}

impl TryFrom<f64> for PhaseAngle {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        PhaseAngle::new(value)
    }
}

impl From<PhaseAngle> for f64 {
    fn from(p: PhaseAngle) -> f64 {
        p.0
    }
}

impl fmt::Display for PhaseAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub(crate) fn canonical_angle(value: f64) -> f64 {
    let r = value.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Common variance of the squeezed ancilla `y`-quadratures, `<dy_s^2>`.
///
/// Physical values lie strictly between zero and the vacuum variance `1/4`.
/// [`SqueezeVariance::UNIT`] is the normalisation used to express variances
/// in units of `<dy_s^2>`; it is not a physical squeeze.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SqueezeVariance(f64);

impl SqueezeVariance {
    pub const VACUUM: f64 = 0.25;
    pub const UNIT: SqueezeVariance = SqueezeVariance(1.0);
    pub const DEFAULT: SqueezeVariance = SqueezeVariance(0.05);

    pub fn new(sigma2: f64) -> Result<Self> {
        if sigma2.is_finite() && sigma2 > 0.0 && sigma2 < Self::VACUUM {
            Ok(SqueezeVariance(sigma2))
        } else {
            Err(Error::Domain(format!(
                "squeeze variance must lie in (0, 0.25), got {sigma2}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for SqueezeVariance {
    fn default() -> Self {
        Self::DEFAULT
    }
}

pub(crate) fn max_abs(m: impl IntoIterator<Item = f64>) -> f64 {
    m.into_iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub(crate) fn max_abs_diff<R, C, S1, S2>(
    a: &nalgebra::Matrix<f64, R, C, S1>,
    b: &nalgebra::Matrix<f64, R, C, S2>,
) -> f64
where
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S1: nalgebra::RawStorage<f64, R, C>,
    S2: nalgebra::RawStorage<f64, R, C>,
{
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Determinant tolerance: `MATRIX_TOL` for unit-sized entries, growing with
/// the squared entry scale because `ad - bc` cancels catastrophically.
fn det_tolerance(scale: f64) -> f64 {
    MATRIX_TOL * scale.max(1.0).powi(2)
}

/// A single-mode Gaussian transformation on `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticMatrix2(Matrix2<f64>);

impl SymplecticMatrix2 {
    pub fn try_new(m: Matrix2<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let det = m.determinant();
        let tol = det_tolerance(max_abs(m.iter().copied()));
        if (det - 1.0).abs() > tol {
            return Err(Error::NotSymplectic(format!(
                "determinant {det} differs from 1 by more than {tol:e}"
            )));
        }
        Ok(SymplecticMatrix2(m))
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Result<Self> {
        Self::try_new(Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1]))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix2<f64>) -> Self {
        SymplecticMatrix2(m)
    }

    pub fn identity() -> Self {
        SymplecticMatrix2(Matrix2::identity())
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.0
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [
            [self.0[(0, 0)], self.0[(0, 1)]],
            [self.0[(1, 0)], self.0[(1, 1)]],
        ]
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }

    /// Inverse of a determinant-one matrix: `[[d, -b], [-c, a]]`.
    pub fn inverse(&self) -> Self {
        let m = &self.0;
        SymplecticMatrix2(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs_diff(&self.0, &other.0)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }
}

impl Mul for SymplecticMatrix2 {
    type Output = SymplecticMatrix2;

    fn mul(self, rhs: Self) -> Self {
        SymplecticMatrix2(self.0 * rhs.0)
    }
}

/// A two-mode Gaussian transformation on `(x_1, x_2, y_1, y_2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticMatrix4(Matrix4<f64>);

impl SymplecticMatrix4 {
    pub fn try_new(m: Matrix4<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let dev = form_deviation(&m);
        if dev > MATRIX_TOL {
            return Err(Error::NotSymplectic(format!(
                "M Omega M^T differs from Omega by {dev:e}"
            )));
        }
        Ok(SymplecticMatrix4(m))
    }

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Result<Self> {
        Self::try_new(Matrix4::from_fn(|r, c| rows[r][c]))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix4<f64>) -> Self {
        SymplecticMatrix4(m)
    }

    pub fn identity() -> Self {
        SymplecticMatrix4(Matrix4::identity())
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn rows(&self) -> [[f64; 4]; 4] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.0[(r, c)]))
    }

    /// `max |M Omega M^T - Omega|`.
    pub fn form_deviation(&self) -> f64 {
        form_deviation(&self.0)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs_diff(&self.0, &other.0)
    }
}

impl Mul for SymplecticMatrix4 {
    type Output = SymplecticMatrix4;

    fn mul(self, rhs: Self) -> Self {
        SymplecticMatrix4(self.0 * rhs.0)
    }
}

fn form_deviation(m: &Matrix4<f64>) -> f64 {
    let omega = symplectic_form(2);
    let dm = DMatrix::from_column_slice(4, 4, m.as_slice());
    max_abs_diff(&(&dm * &omega * dm.transpose()), &omega)
}

/// The symplectic form for `n` modes in `(x_1..x_n, y_1..y_n)` ordering.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for i in 0..modes {
        omega[(i, modes + i)] = 0.5;
        omega[(modes + i, i)] = -0.5;
    }
    omega
}

/// Either dimension of transformation, for heterogeneous composition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Single(SymplecticMatrix2),
    Two(SymplecticMatrix4),
}

impl Transform {
    pub fn dim(&self) -> usize {
        match self {
            Transform::Single(_) => 2,
            Transform::Two(_) => 4,
        }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        match self {
            Transform::Single(m) => DMatrix::from_column_slice(2, 2, m.matrix().as_slice()),
            Transform::Two(m) => DMatrix::from_column_slice(4, 4, m.matrix().as_slice()),
        }
    }

    pub fn max_abs_diff(&self, other: &Transform) -> Option<f64> {
        match (self, other) {
            (Transform::Single(a), Transform::Single(b)) => Some(a.max_abs_diff(b)),
            (Transform::Two(a), Transform::Two(b)) => Some(a.max_abs_diff(b)),
            _ => None,
        }
    }
}

impl From<SymplecticMatrix2> for Transform {
    fn from(m: SymplecticMatrix2) -> Self {
        Transform::Single(m)
    }
}

impl From<SymplecticMatrix4> for Transform {
    fn from(m: SymplecticMatrix4) -> Self {
        Transform::Two(m)
    }
}

pub(crate) fn rot(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// `R(theta) = [[cos, -sin], [sin, cos]]`.
pub fn rotation(theta: PhaseAngle) -> SymplecticMatrix2 {
    SymplecticMatrix2(rot(theta.value()))
}

/// `S(r) = diag(e^-r, e^r)`.
pub fn squeeze(r: f64) -> Result<SymplecticMatrix2> {
    if !r.is_finite() {
        return Err(Error::Domain(format!(
            "squeeze parameter must be finite, got {r}"
        )));
    }
    Ok(SymplecticMatrix2(Matrix2::new(
        (-r).exp(),
        0.0,
        0.0,
        r.exp(),
    )))
}

/// `tan(theta_minus / 2)`, rejecting phases at a zero or pole of the tangent.
pub(crate) fn half_tan(theta_minus: f64) -> Result<f64> {
    let (s, c) = (0.5 * theta_minus).sin_cos();
    if s.abs() <= SINGULARITY_EPS || c.abs() <= SINGULARITY_EPS {
        return Err(Error::DegenerateSqueezePhase(s / c));
    }
    Ok(s / c)
}

/// The squeeze produced by a two-node measurement, `diag(1/t, t)` with
/// `t = tan(theta_minus / 2)`.
///
/// Equals `S(ln t)` when `t > 0`. A negative `t` is kept as a signed
/// diagonal, which is `R(pi) S(ln |t|)`.
pub fn measurement_gate(theta_minus: PhaseAngle) -> Result<SymplecticMatrix2> {
    let t = half_tan(theta_minus.value())?;
    Ok(SymplecticMatrix2(Matrix2::new(1.0 / t, 0.0, 0.0, t)))
}

/// `target = R(alpha) diag(s, 1/s) R(beta)` with `s >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerFactors {
    pub alpha: PhaseAngle,
    pub s: f64,
    pub beta: PhaseAngle,
}

impl EulerFactors {
    pub fn reconstruct(&self) -> SymplecticMatrix2 {
        let d = Matrix2::new(self.s, 0.0, 0.0, 1.0 / self.s);
        SymplecticMatrix2(rot(self.alpha.value()) * d * rot(self.beta.value()))
    }
}

/// Below this spread of singular values the matrix is a pure rotation.
const PURE_ROTATION_TOL: f64 = 1e-12;

/// Euler (polar/SVD) decomposition of a single-mode transformation.
///
/// Canonical branch: `s >= 1`; a pure rotation gets `beta = 0`; otherwise
/// the `(alpha, beta) ~ (alpha + pi, beta + pi)` ambiguity is fixed by
/// `beta in (-pi/2, pi/2]`. `alpha` is reported in `(-pi, pi]`.
pub fn euler_decompose(u: &SymplecticMatrix2) -> EulerFactors {
    let m = u.matrix();
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    // Split into a rotation part (e, h) and a reflection part (f, g).
    let e = 0.5 * (a + d);
    let f = 0.5 * (a - d);
    let g = 0.5 * (c + b);
    let h = 0.5 * (c - b);
    let q = e.hypot(h);
    let r = f.hypot(g);
    let rot_angle = h.atan2(e);

    if r <= PURE_ROTATION_TOL {
        return EulerFactors {
            alpha: PhaseAngle(canonical_angle(rot_angle)),
            s: q + r,
            beta: PhaseAngle::ZERO,
        };
    }

    let refl_angle = g.atan2(f);
    let mut alpha = 0.5 * (rot_angle + refl_angle);
    let mut beta = 0.5 * (rot_angle - refl_angle);
    if beta > FRAC_PI_2 {
        beta -= PI;
        alpha -= PI;
    } else if beta <= -FRAC_PI_2 {
        beta += PI;
        alpha += PI;
    }
    EulerFactors {
        alpha: PhaseAngle(canonical_angle(alpha)),
        s: q + r,
        beta: PhaseAngle(beta),
    }
}

/// Matrix product in listed order, so the last transformation listed acts
/// first on the quadrature vector.
pub fn compose(ms: &[Transform]) -> Result<Transform> {
    let (first, rest) = ms
        .split_first()
        .ok_or(Error::Empty("compose needs at least one matrix"))?;
    rest.iter().try_fold(*first, |acc, m| match (acc, m) {
        (Transform::Single(a), Transform::Single(b)) => Ok(Transform::Single(a * *b)),
        (Transform::Two(a), Transform::Two(b)) => Ok(Transform::Two(a * *b)),
        _ => Err(Error::DimensionMismatch {
            expected: acc.dim(),
            got: m.dim(),
        }),
    })
}
