//! Every computation scheme as a `(transformation, error map)` pair.
//!
//! The output of a scheme is `U q_in + E y_s`, where `y_s` are the squeezed
//! ancilla quadratures. Since the ancillas are independent with a common
//! variance `sigma2`, the output error variances are `sigma2 * diag(E E^T)`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2, Matrix4, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symplectic::{
    measurement_gate, rot, PhaseAngle, SqueezeVariance, SymplecticMatrix2, SymplecticMatrix4,
    Transform, SINGULARITY_EPS,
};

/// `d_1 = sqrt(5) + 3`.
pub fn d1() -> f64 {
    5f64.sqrt() + 3.0
}

/// `d_2 = sqrt(5 (5 + 2 sqrt 5))`.
pub fn d2() -> f64 {
    (5.0 * (5.0 + 2.0 * 5f64.sqrt())).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeId {
    FourNode1,
    FourNode2,
    FourNode3,
    FourNode4,
    FourNode5,
    TwoNode,
    PairTwoNodeCase1,
    PairTwoNodeCase2,
    TwoNodeRotator,
    CzFourNode,
    CzTwoNodeStretch,
    CzBeamSplitter,
}

impl SchemeId {
    pub const ALL: [SchemeId; 12] = [
        SchemeId::FourNode1,
        SchemeId::FourNode2,
        SchemeId::FourNode3,
        SchemeId::FourNode4,
        SchemeId::FourNode5,
        SchemeId::TwoNode,
        SchemeId::PairTwoNodeCase1,
        SchemeId::PairTwoNodeCase2,
        SchemeId::TwoNodeRotator,
        SchemeId::CzFourNode,
        SchemeId::CzTwoNodeStretch,
        SchemeId::CzBeamSplitter,
    ];

    pub const FOUR_NODE: [SchemeId; 5] = [
        SchemeId::FourNode1,
        SchemeId::FourNode2,
        SchemeId::FourNode3,
        SchemeId::FourNode4,
        SchemeId::FourNode5,
    ];

    /// Number of phases a scheme is parameterised by.
    pub fn arity(self) -> usize {
        use SchemeId::*;
        match self {
            FourNode1 | FourNode2 | FourNode3 | FourNode4 | FourNode5 => 4,
            TwoNode => 2,
            PairTwoNodeCase1 | PairTwoNodeCase2 => 4,
            TwoNodeRotator => 3,
            CzFourNode | CzTwoNodeStretch | CzBeamSplitter => 0,
        }
    }

    /// Number of squeezed ancilla quadratures feeding the error map.
    pub fn ancillas(self) -> usize {
        use SchemeId::*;
        match self {
            FourNode1 | FourNode2 | FourNode3 | FourNode4 | FourNode5 => 4,
            TwoNode | TwoNodeRotator => 2,
            PairTwoNodeCase1 | PairTwoNodeCase2 => 4,
            CzFourNode | CzBeamSplitter => 4,
            CzTwoNodeStretch => 6,
        }
    }

    pub fn modes(self) -> usize {
        if self.is_cz() {
            2
        } else {
            1
        }
    }

    pub fn is_cz(self) -> bool {
        matches!(
            self,
            SchemeId::CzFourNode | SchemeId::CzTwoNodeStretch | SchemeId::CzBeamSplitter
        )
    }

    /// Configuration number `1..=5` for the four-node schemes.
    pub fn four_node_index(self) -> Option<usize> {
        SchemeId::FOUR_NODE
            .iter()
            .position(|&s| s == self)
            .map(|i| i + 1)
    }

    pub fn four_node(j: usize) -> Option<SchemeId> {
        SchemeId::FOUR_NODE.get(j.checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        use SchemeId::*;
        match self {
            FourNode1 => "FourNode1",
            FourNode2 => "FourNode2",
            FourNode3 => "FourNode3",
            FourNode4 => "FourNode4",
            FourNode5 => "FourNode5",
            TwoNode => "TwoNode",
            PairTwoNodeCase1 => "PairTwoNodeCase1",
            PairTwoNodeCase2 => "PairTwoNodeCase2",
            TwoNodeRotator => "TwoNodeRotator",
            CzFourNode => "CzFourNode",
            CzTwoNodeStretch => "CzTwoNodeStretch",
            CzBeamSplitter => "CzBeamSplitter",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .iter()
            .copied()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Domain(format!("unknown scheme '{s}'")))
    }
}

/// Homodyne phases (and rotator angle) for one scheme.
///
/// Layout by scheme:
/// - four-node: `(theta_1, theta_2, theta_3, theta_4)`
/// - two-node: `(theta_plus, theta_minus)`
/// - pair schemes: `(theta_plus^1, theta_minus^1, theta_plus^2, theta_minus^2)`
/// - rotator: `(phi, theta_plus, theta_minus)`
/// - CZ schemes: none
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SchemePhases {
    theta: Vec<PhaseAngle>,
}

impl SchemePhases {
    pub fn new(values: &[f64]) -> Result<Self> {
        let theta = values
            .iter()
            .map(|&v| PhaseAngle::new(v))
            .collect::<Result<_>>()?;
        Ok(SchemePhases { theta })
    }

    pub fn none() -> Self {
        SchemePhases::default()
    }

    pub fn four_node(t1: f64, t2: f64, t3: f64, t4: f64) -> Result<Self> {
        Self::new(&[t1, t2, t3, t4])
    }

    /// Four-node phases from `theta_plus = theta_2 + theta_1` and
    /// `theta_minus = theta_2 - theta_1`.
    pub fn four_node_from_sums(plus: f64, minus: f64, t3: f64, t4: f64) -> Result<Self> {
        Self::new(&[0.5 * (plus - minus), 0.5 * (plus + minus), t3, t4])
    }

    pub fn two_node(plus: f64, minus: f64) -> Result<Self> {
        Self::new(&[plus, minus])
    }

    pub fn pair(plus1: f64, minus1: f64, plus2: f64, minus2: f64) -> Result<Self> {
        Self::new(&[plus1, minus1, plus2, minus2])
    }

    pub fn rotator(phi: f64, plus: f64, minus: f64) -> Result<Self> {
        Self::new(&[phi, plus, minus])
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.theta.iter().map(|p| p.value()).collect()
    }

    fn get(&self, i: usize) -> f64 {
        self.theta[i].value()
    }

    /// `theta_2 + theta_1` for the four-node layout.
    pub fn theta_plus(&self) -> f64 {
        self.get(1) + self.get(0)
    }

    /// `theta_2 - theta_1` for the four-node layout.
    pub fn theta_minus(&self) -> f64 {
        self.get(1) - self.get(0)
    }

    fn check_arity(&self, scheme: SchemeId) -> Result<()> {
        if self.len() != scheme.arity() {
            return Err(Error::InvalidPhases {
                scheme: scheme.name().into(),
                reason: format!("expected {} phases, got {}", scheme.arity(), self.len()),
            });
        }
        Ok(())
    }
}

/// Linear map from squeezed ancilla quadratures to additive output error.
///
/// Rows follow the scheme's output ordering, columns the ancilla slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap {
    matrix: DMatrix<f64>,
    surrogate: bool,
}

impl ErrorMap {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        ErrorMap {
            matrix,
            surrogate: false,
        }
    }

    /// A stand-in map that only reproduces the known variance vector.
    pub fn surrogate(matrix: DMatrix<f64>) -> Self {
        ErrorMap {
            matrix,
            surrogate: true,
        }
    }

    pub fn zeros(outputs: usize, ancillas: usize) -> Self {
        Self::new(DMatrix::zeros(outputs, ancillas))
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn outputs(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ancillas(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_surrogate(&self) -> bool {
        self.surrogate
    }
}

/// Per-output-quadrature error variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarianceVector(pub Vec<f64>);

impl VarianceVector {
    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Exchange the x-block and the y-block of the ordering.
    pub fn swap_xy(&self) -> VarianceVector {
        let n = self.0.len() / 2;
        let (x, y) = self.0.split_at(n);
        VarianceVector(y.iter().chain(x).copied().collect())
    }

    pub fn scaled(&self, k: f64) -> VarianceVector {
        VarianceVector(self.0.iter().map(|v| v * k).collect())
    }

    pub fn max_abs_diff(&self, other: &VarianceVector) -> f64 {
        assert_eq!(self.len(), other.len(), "variance vectors differ in length");
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

/// Scheme output as a transformation plus an error map.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRealization {
    pub scheme: SchemeId,
    pub matrix: Transform,
    pub error_map: ErrorMap,
}

impl SchemeRealization {
    pub fn variance(&self, sigma2: SqueezeVariance) -> VarianceVector {
        variance_from_error_map(&self.error_map, sigma2)
    }
}

/// `sigma2 * diag(E E^T)`.
pub fn variance_from_error_map(e: &ErrorMap, sigma2: SqueezeVariance) -> VarianceVector {
    let m = e.matrix();
    VarianceVector(
        m.row_iter()
            .map(|row| sigma2.value() * row.iter().map(|v| v * v).sum::<f64>())
            .collect(),
    )
}

fn tan_checked(theta: f64, label: &str) -> Result<f64> {
    let (s, c) = theta.sin_cos();
    if c.abs() <= SINGULARITY_EPS {
        return Err(Error::SingularPhase(format!(
            "tan({label}) diverges at {theta}"
        )));
    }
    Ok(s / c)
}

fn cot_checked(theta: f64, label: &str) -> Result<f64> {
    let (s, c) = theta.sin_cos();
    if s.abs() <= SINGULARITY_EPS {
        return Err(Error::SingularPhase(format!(
            "cot({label}) diverges at {theta}"
        )));
    }
    Ok(c / s)
}

/// The two-node core `R(-plus/2) M(minus) R(-plus/2)`.
fn two_node_core(plus: f64, minus: f64) -> Result<Matrix2<f64>> {
    let m = measurement_gate(PhaseAngle::new(minus)?)?;
    let r = rot(-0.5 * plus);
    Ok(r * m.matrix() * r)
}

fn mat2(a: f64, b: f64, c: f64, d: f64) -> Matrix2<f64> {
    Matrix2::new(a, b, c, d)
}

fn to_dynamic<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

/// Universal single-mode transformation on one of the five four-node clusters.
///
/// The matrix and error map are the configuration-specific closed forms; the
/// fixed `R(pi/2)`, `R(pi)` and `R(-pi/2)` factors are kept as they appear.
pub fn four_node_realization(j: SchemeId, phases: &SchemePhases) -> Result<SchemeRealization> {
    let index = j.four_node_index().ok_or_else(|| Error::InvalidPhases {
        scheme: j.name().into(),
        reason: "not a four-node scheme".into(),
    })?;
    phases.check_arity(j)?;
    let (t3, t4) = (phases.get(2), phases.get(3));
    let core = two_node_core(phases.theta_plus(), phases.theta_minus())?;
    let (d1, d2) = (d1(), d2());

    type M24 = SMatrix<f64, 2, 4>;
    let (lead, coeff, mix, prefactor): (Matrix2<f64>, M24, Matrix4<f64>, f64) = match index {
        1 => {
            let (ct4, tt3) = (cot_checked(t4, "theta_4")?, tan_checked(t3, "theta_3")?);
            (
                mat2(-ct4 * tt3 - 1.0, ct4, tt3, -1.0) * rot(FRAC_PI_2),
                M24::new(
                    3.0 * ct4,
                    ct4,
                    -1.0 - 2.0 * ct4 * tt3,
                    -3.0 - ct4 * tt3,
                    -2.0,
                    1.0,
                    2.0 * tt3,
                    tt3,
                ),
                Matrix4::new(
                    d1 - 1.0,
                    -1.0,
                    0.0,
                    0.0,
                    -1.0,
                    d1,
                    0.0,
                    0.0,
                    0.0,
                    0.0,
                    d1,
                    -1.0,
                    0.0,
                    0.0,
                    -1.0,
                    d1 - 1.0,
                ),
                1.0 / d2,
            )
        }
        2 => {
            let (ct3, tt4) = (cot_checked(t3, "theta_3")?, tan_checked(t4, "theta_4")?);
            (
                rot(FRAC_PI_2) * mat2(-ct3 * tt4 - 1.0, -tt4, -ct3, -1.0),
                M24::new(
                    2.0 * ct3,
                    ct3,
                    -3.0,
                    -1.0,
                    -2.0 * ct3 * tt4 - 1.0,
                    2.0 - ct3 * tt4,
                    2.0 * tt4,
                    -tt4,
                ),
                Matrix4::new(
                    d1,
                    -1.0,
                    0.0,
                    0.0,
                    -1.0,
                    d1 - 1.0,
                    0.0,
                    0.0,
                    0.0,
                    0.0,
                    d1 - 1.0,
                    -1.0,
                    0.0,
                    0.0,
                    -1.0,
                    d1,
                ),
                1.0 / d2,
            )
        }
        3 => {
            let (ct3, ct4) = (cot_checked(t3, "theta_3")?, cot_checked(t4, "theta_4")?);
            (
                mat2(ct4 * ct3 - 1.0, ct4, -ct3, -1.0) * rot(std::f64::consts::PI),
                M24::new(
                    1.0 - 2.0 * ct3 * ct4,
                    ct3,
                    3.0 * ct3,
                    -2.0 - ct3 * ct4,
                    2.0 * ct4,
                    1.0,
                    -2.0,
                    ct4,
                ),
                Matrix4::new(
                    d1,
                    0.0,
                    0.0,
                    -1.0,
                    0.0,
                    d1,
                    -1.0,
                    0.0,
                    0.0,
                    -1.0,
                    d1 - 1.0,
                    0.0,
                    -1.0,
                    0.0,
                    0.0,
                    d1 - 1.0,
                ),
                1.0 / d2,
            )
        }
        4 => {
            let (tt3, tt4) = (tan_checked(t3, "theta_3")?, tan_checked(t4, "theta_4")?);
            (
                rot(-FRAC_PI_2) * mat2(tt3 * tt4 - 1.0, -tt4, tt3, -1.0) * rot(FRAC_PI_2),
                M24::new(
                    -3.0,
                    tt3,
                    2.0 * tt3,
                    -1.0,
                    2.0 * tt4,
                    3.0 - tt3 * tt4,
                    1.0 - 2.0 * tt3 * tt4,
                    -tt4,
                ),
                Matrix4::new(
                    d1 - 1.0,
                    0.0,
                    0.0,
                    -1.0,
                    0.0,
                    d1 - 1.0,
                    -1.0,
                    0.0,
                    0.0,
                    -1.0,
                    d1,
                    0.0,
                    -1.0,
                    0.0,
                    0.0,
                    d1,
                ),
                1.0 / d2,
            )
        }
        5 => {
            let (tt3, tt4) = (tan_checked(t3, "theta_3")?, tan_checked(t4, "theta_4")?);
            (
                mat2(tt3 * tt4 - 1.0, -tt4, tt3, -1.0),
                M24::new(
                    tt3 * tt4 - 3.0,
                    2.0 * tt4,
                    3.0 * tt4,
                    -tt3 * tt4 - 2.0,
                    tt3,
                    3.0,
                    2.0,
                    -tt3,
                ),
                Matrix4::new(
                    d1, 0.0, 0.0, -2.0, 0.0, d1, -2.0, 0.0, 0.0, -2.0, d1, 0.0, -2.0, 0.0, 0.0, d1,
                ),
                1.0 / (d1 + 2.0),
            )
        }
        _ => unreachable!("four_node_index is 1..=5"),
    };

    let matrix = SymplecticMatrix2::from_matrix_unchecked(lead * core);
    let error = (coeff * mix) * prefactor;
    Ok(SchemeRealization {
        scheme: j,
        matrix: Transform::Single(matrix),
        error_map: ErrorMap::new(to_dynamic(&error)),
    })
}

/// Closed-form four-node variance in units of `sigma2`, parameterised by the
/// configuration-3 phases:
/// `(2 c3 c4 (1 + c3 c4) + 3 csc^2 theta_4, 3 + 2 c3^2)` with `ck = cot theta_k`.
pub fn four_node_variance_closed_form(
    theta3: PhaseAngle,
    theta4: PhaseAngle,
) -> Result<VarianceVector> {
    let c3 = cot_checked(theta3.value(), "theta_3")?;
    let c4 = cot_checked(theta4.value(), "theta_4")?;
    Ok(VarianceVector(closed_form_components(
        c3,
        c4,
        theta4.value(),
    )))
}

/// Unchecked closed form for grid scans, which exclude singular cells first.
pub(crate) fn closed_form_components(c3: f64, c4: f64, theta4: f64) -> Vec<f64> {
    let cc = c3 * c4;
    let s4 = theta4.sin();
    vec![2.0 * cc * (1.0 + cc) + 3.0 / (s4 * s4), 3.0 + 2.0 * c3 * c3]
}

/// Two-node cluster: `R(-plus/2) M(minus) R(-plus/2)` with error `sqrt2 I`.
pub fn two_node_realization(phases: &SchemePhases) -> Result<SchemeRealization> {
    phases.check_arity(SchemeId::TwoNode)?;
    let core = two_node_core(phases.get(0), phases.get(1))?;
    Ok(SchemeRealization {
        scheme: SchemeId::TwoNode,
        matrix: Transform::Single(SymplecticMatrix2::from_matrix_unchecked(core)),
        error_map: ErrorMap::new(DMatrix::identity(2, 2) * SQRT_2),
    })
}

/// Two two-node clusters in series, with one measurement difference fixed
/// to `pi/2` so the composite is universal.
///
/// Ancillas `(y1, y2)` belong to the first cluster and are carried through
/// the second stage; `(y3, y4)` belong to the second cluster.
pub fn pair_two_node_realization(
    case: SchemeId,
    phases: &SchemePhases,
) -> Result<SchemeRealization> {
    let fixed = match case {
        SchemeId::PairTwoNodeCase1 => 1,
        SchemeId::PairTwoNodeCase2 => 3,
        other => {
            return Err(Error::InvalidPhases {
                scheme: other.name().into(),
                reason: "not a pair-of-two-node scheme".into(),
            })
        }
    };
    phases.check_arity(case)?;
    if (phases.get(fixed) - FRAC_PI_2).abs() > SINGULARITY_EPS {
        return Err(Error::InvalidPhases {
            scheme: case.name().into(),
            reason: format!(
                "phase #{} must equal pi/2, got {}",
                fixed + 1,
                phases.get(fixed)
            ),
        });
    }
    let first = two_node_core(phases.get(0), phases.get(1))?;
    let second = two_node_core(phases.get(2), phases.get(3))?;

    let mut error = DMatrix::zeros(2, 4);
    error.view_mut((0, 0), (2, 2)).copy_from(&(second * SQRT_2));
    error
        .view_mut((0, 2), (2, 2))
        .copy_from(&(Matrix2::identity() * SQRT_2));
    Ok(SchemeRealization {
        scheme: case,
        matrix: Transform::Single(SymplecticMatrix2::from_matrix_unchecked(second * first)),
        error_map: ErrorMap::new(error),
    })
}

/// Two-node cluster followed by a noiseless quadrature rotation `R(phi)`.
pub fn rotator_realization(phases: &SchemePhases) -> Result<SchemeRealization> {
    phases.check_arity(SchemeId::TwoNodeRotator)?;
    let phi = phases.get(0);
    let core = two_node_core(phases.get(1), phases.get(2))?;
    let r = rot(phi);
    Ok(SchemeRealization {
        scheme: SchemeId::TwoNodeRotator,
        matrix: Transform::Single(SymplecticMatrix2::from_matrix_unchecked(r * core)),
        error_map: ErrorMap::new(to_dynamic(&(r * SQRT_2))),
    })
}

/// `U_CZ` on `(x1, x2, y1, y2)`: each x-quadrature is added to the other
/// mode's y-quadrature.
pub fn cz_matrix() -> SymplecticMatrix4 {
    SymplecticMatrix4::from_matrix_unchecked(Matrix4::new(
        1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0,
    ))
}

/// Symmetric 50:50 beam splitter on two modes, `(a1 + a2, a1 - a2) / sqrt2`
/// applied to both quadratures.
pub fn beam_splitter_matrix() -> SymplecticMatrix4 {
    let h = FRAC_1_SQRT_2;
    SymplecticMatrix4::from_matrix_unchecked(Matrix4::new(
        h, h, 0.0, 0.0, h, -h, 0.0, 0.0, 0.0, 0.0, h, h, 0.0, 0.0, h, -h,
    ))
}

/// Ancilla variances of the four-node CZ, `(2, 2, 3, 3)` in units of `sigma2`.
pub const CZ_FOUR_NODE_VARIANCE: [f64; 4] = [2.0, 2.0, 3.0, 3.0];

/// Linear four-node cluster CZ.
///
/// Its error map comes from the nullifier relations of the cluster, which
/// are not modelled; the returned map is the diagonal surrogate
/// `diag(sqrt2, sqrt2, sqrt3, sqrt3)`, exact only at the variance level.
pub fn cz_four_node() -> SchemeRealization {
    let diag = nalgebra::DVector::from_iterator(4, CZ_FOUR_NODE_VARIANCE.iter().map(|v| v.sqrt()));
    SchemeRealization {
        scheme: SchemeId::CzFourNode,
        matrix: Transform::Two(cz_matrix()),
        error_map: ErrorMap::surrogate(DMatrix::from_diagonal(&diag)),
    }
}

/// Measurement difference that makes a two-node cluster stretch `y` by
/// `sqrt2` and shrink `x` by the same factor: `tan(theta/2) = sqrt2`.
pub fn stretch_phase() -> f64 {
    2.0 * SQRT_2.atan()
}

/// One stage of a multi-stage CZ: a 4x4 transformation and its error map
/// over the full ancilla register.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub matrix: Matrix4<f64>,
    pub error_map: DMatrix<f64>,
}

/// The two stages of the stretch CZ over ancillas `(y1..y6)`.
///
/// Stage 1 is the two-node CZ, `diag(sqrt2, sqrt2, 1/sqrt2, 1/sqrt2) U_CZ`
/// with error `-(0, 0, y1, y2)`. Stage 2 stretches both `y`-quadratures with
/// two two-node clusters; mode 1 uses ancillas `(y3, y5)` and mode 2 uses
/// `(y4, y6)`.
pub fn cz_stretch_stages() -> Result<(Stage, Stage)> {
    let squeeze = Matrix4::from_diagonal(&nalgebra::Vector4::new(
        SQRT_2,
        SQRT_2,
        FRAC_1_SQRT_2,
        FRAC_1_SQRT_2,
    ));
    let mut e1 = DMatrix::zeros(4, 6);
    e1[(2, 0)] = -1.0;
    e1[(3, 1)] = -1.0;
    let stage1 = Stage {
        matrix: squeeze * cz_matrix().matrix(),
        error_map: e1,
    };

    let stretch = two_node_realization(&SchemePhases::two_node(0.0, stretch_phase())?)?;
    let Transform::Single(s) = stretch.matrix else {
        unreachable!("two-node realization is single-mode")
    };
    let s = s.matrix();
    let mut m2 = Matrix4::zeros();
    let mut e2 = DMatrix::zeros(4, 6);
    // (x_mode, y_mode) rows and the ancilla pair of each stretch cluster.
    for (mode, (ax, ay)) in [(0usize, (2usize, 4usize)), (1, (3, 5))] {
        let idx = [mode, mode + 2];
        for r in 0..2 {
            for c in 0..2 {
                m2[(idx[r], idx[c])] = s[(r, c)];
            }
        }
        let em = stretch.error_map.matrix();
        for r in 0..2 {
            e2[(idx[r], ax)] = em[(r, 0)];
            e2[(idx[r], ay)] = em[(r, 1)];
        }
    }
    Ok((
        stage1,
        Stage {
            matrix: m2,
            error_map: e2,
        },
    ))
}

/// CZ from a two-node CZ followed by two stretch clusters.
pub fn cz_two_node_stretch() -> Result<SchemeRealization> {
    let (s1, s2) = cz_stretch_stages()?;
    let m2 = to_dynamic(&s2.matrix);
    let error = &m2 * &s1.error_map + &s2.error_map;
    Ok(SchemeRealization {
        scheme: SchemeId::CzTwoNodeStretch,
        matrix: Transform::Two(SymplecticMatrix4::from_matrix_unchecked(
            s2.matrix * s1.matrix,
        )),
        error_map: ErrorMap::new(error),
    })
}

/// Rotator phases `(phi, theta_plus, theta_minus)` for the shear gates of the
/// beam-splitter CZ: gate A `[[1,0],[1,1]]` and gate B `[[1,0],[-1,1]]`.
pub fn cz_shear_phases() -> (SchemePhases, SchemePhases) {
    let a = 2f64.atan();
    (
        SchemePhases::rotator(FRAC_PI_2, a, a).expect("finite"),
        SchemePhases::rotator(FRAC_PI_2, -a, -a).expect("finite"),
    )
}

/// CZ from two symmetric beam splitters around the shears A (mode 1) and
/// B (mode 2), each realised by a two-node cluster with a rotator.
///
/// Error terms before the output beam splitter are `sqrt2 (y2, -y1)` for A
/// and `sqrt2 (y4, -y3)` for B.
pub fn cz_beam_splitter() -> Result<SchemeRealization> {
    let (pa, pb) = cz_shear_phases();
    let ra = rotator_realization(&pa)?;
    let rb = rotator_realization(&pb)?;
    let (Transform::Single(a), Transform::Single(b)) = (ra.matrix, rb.matrix) else {
        unreachable!("rotator realizations are single-mode")
    };
    let mut shears = Matrix4::zeros();
    for (mode, g) in [(0usize, a.matrix()), (1, b.matrix())] {
        let idx = [mode, mode + 2];
        for r in 0..2 {
            for c in 0..2 {
                shears[(idx[r], idx[c])] = g[(r, c)];
            }
        }
    }
    let bs = *beam_splitter_matrix().matrix();
    let matrix = bs * shears * bs;

    let s = SQRT_2;
    // Rows (x1, x2, y1, y2) of the shear outputs, columns (y1..y4).
    let before = Matrix4::new(
        0.0, s, 0.0, 0.0, 0.0, 0.0, 0.0, s, -s, 0.0, 0.0, 0.0, 0.0, 0.0, -s, 0.0,
    );
    Ok(SchemeRealization {
        scheme: SchemeId::CzBeamSplitter,
        matrix: Transform::Two(SymplecticMatrix4::from_matrix_unchecked(matrix)),
        error_map: ErrorMap::new(to_dynamic(&(bs * before))),
    })
}

/// Build any scheme from its identifier and phases.
pub fn realize(id: SchemeId, phases: &SchemePhases) -> Result<SchemeRealization> {
    use SchemeId::*;
    match id {
        FourNode1 | FourNode2 | FourNode3 | FourNode4 | FourNode5 => {
            four_node_realization(id, phases)
        }
        TwoNode => two_node_realization(phases),
        PairTwoNodeCase1 | PairTwoNodeCase2 => pair_two_node_realization(id, phases),
        TwoNodeRotator => rotator_realization(phases),
        CzFourNode | CzTwoNodeStretch | CzBeamSplitter => {
            phases.check_arity(id)?;
            match id {
                CzFourNode => Ok(cz_four_node()),
                CzTwoNodeStretch => cz_two_node_stretch(),
                _ => cz_beam_splitter(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{euler_decompose, rotation, MATRIX_TOL};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const UNIT: SqueezeVariance = SqueezeVariance::UNIT;

    fn single(r: &SchemeRealization) -> SymplecticMatrix2 {
        match r.matrix {
            Transform::Single(m) => m,
            Transform::Two(_) => panic!("expected single-mode"),
        }
    }

    fn two(r: &SchemeRealization) -> SymplecticMatrix4 {
        match r.matrix {
            Transform::Two(m) => m,
            Transform::Single(_) => panic!("expected two-mode"),
        }
    }

    fn sm(rows: [[f64; 2]; 2]) -> SymplecticMatrix2 {
        SymplecticMatrix2::from_rows(rows).unwrap()
    }

    fn vv(v: &[f64]) -> VarianceVector {
        VarianceVector(v.to_vec())
    }

    #[test]
    fn constants() {
        assert!((d1() - 5.23606797749979).abs() < 1e-12);
        assert!((d2() - 6.881909602355868).abs() < 1e-12);
    }

    #[test]
    fn scheme_id_metadata() {
        for id in SchemeId::ALL {
            assert_eq!(id.name().parse::<SchemeId>().unwrap(), id);
        }
        assert_eq!(SchemeId::four_node(3), Some(SchemeId::FourNode3));
        assert_eq!(SchemeId::four_node(0), None);
        assert_eq!(SchemeId::CzTwoNodeStretch.ancillas(), 6);
        assert!("FourNode9".parse::<SchemeId>().is_err());
    }

    #[test]
    fn error_map_widths_match_ancilla_counts() {
        let a = 2f64.atan();
        let phases = |id: SchemeId| match id.arity() {
            4 if id.four_node_index().is_some() => {
                SchemePhases::four_node(0.2, 0.9, 0.7, 1.1).unwrap()
            }
            4 => SchemePhases::pair(0.3, FRAC_PI_2, 0.4, FRAC_PI_2).unwrap(),
            3 => SchemePhases::rotator(0.1, a, a).unwrap(),
            2 => SchemePhases::two_node(0.3, 1.2).unwrap(),
            _ => SchemePhases::none(),
        };
        for id in SchemeId::ALL {
            let r = realize(id, &phases(id)).unwrap();
            assert_eq!(r.error_map.ancillas(), id.ancillas(), "{id}");
            assert_eq!(r.error_map.outputs(), 2 * id.modes(), "{id}");
        }
    }

    #[test]
    fn four_node_5_example() {
        let p = SchemePhases::four_node(-PI / 4.0, PI / 4.0, PI / 4.0, PI / 4.0).unwrap();
        let r = four_node_realization(SchemeId::FourNode5, &p).unwrap();
        assert!(single(&r).approx_eq(&sm([[0.0, -1.0], [1.0, -1.0]]), 1e-12));
    }

    #[test]
    fn four_node_3_identity() {
        let p = SchemePhases::four_node_from_sums(0.0, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2).unwrap();
        let r = four_node_realization(SchemeId::FourNode3, &p).unwrap();
        assert!(single(&r).approx_eq(&SymplecticMatrix2::identity(), 1e-12));
        // Hand propagation at cot = 0: rows (1,0,0,-2) and (0,1,-2,0) times
        // the d1 matrix give row sums of squares 3 d2^2 each.
        let v = variance_from_error_map(&r.error_map, UNIT);
        assert!(v.max_abs_diff(&vv(&[3.0, 3.0])) < 1e-12);
    }

    #[test]
    fn four_node_singular_phases() {
        let pole = SchemePhases::four_node(0.1, 0.4, 0.0, 1.0).unwrap();
        assert!(matches!(
            four_node_realization(SchemeId::FourNode3, &pole),
            Err(Error::SingularPhase(_))
        ));
        let pole = SchemePhases::four_node(0.1, 0.4, FRAC_PI_2, 1.0).unwrap();
        assert!(matches!(
            four_node_realization(SchemeId::FourNode5, &pole),
            Err(Error::SingularPhase(_))
        ));
        let degenerate = SchemePhases::four_node(0.3, 0.3, 1.0, 1.0).unwrap();
        assert!(matches!(
            four_node_realization(SchemeId::FourNode1, &degenerate),
            Err(Error::DegenerateSqueezePhase(_))
        ));
        let short = SchemePhases::two_node(0.1, 0.2).unwrap();
        assert!(matches!(
            four_node_realization(SchemeId::FourNode1, &short),
            Err(Error::InvalidPhases { .. })
        ));
    }

    #[test]
    fn variance_examples() {
        let e = ErrorMap::new(DMatrix::identity(2, 2) * SQRT_2);
        let v = variance_from_error_map(&e, SqueezeVariance::new(0.05).unwrap());
        assert!(v.max_abs_diff(&vv(&[0.1, 0.1])) < 1e-15);
        let z = variance_from_error_map(&ErrorMap::zeros(3, 4), UNIT);
        assert_eq!(z, vv(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn closed_form_examples() {
        let p = |v| PhaseAngle::new(v).unwrap();
        let v = four_node_variance_closed_form(p(FRAC_PI_2), p(FRAC_PI_2)).unwrap();
        assert!(v.max_abs_diff(&vv(&[3.0, 3.0])) < 1e-12);
        let v = four_node_variance_closed_form(p(PI / 4.0), p(FRAC_PI_2)).unwrap();
        assert!(v.max_abs_diff(&vv(&[3.0, 5.0])) < 1e-12);
        assert!(four_node_variance_closed_form(p(0.0), p(1.0)).is_err());
        assert!(four_node_variance_closed_form(p(1.0), p(PI)).is_err());
    }

    #[test]
    fn two_node_examples() {
        let r = two_node_realization(&SchemePhases::two_node(0.0, FRAC_PI_2).unwrap()).unwrap();
        assert!(single(&r).approx_eq(&SymplecticMatrix2::identity(), 1e-15));
        assert!(r.variance(UNIT).max_abs_diff(&vv(&[2.0, 2.0])) < 1e-12);
        let r =
            two_node_realization(&SchemePhases::two_node(0.0, stretch_phase()).unwrap()).unwrap();
        assert!(single(&r).approx_eq(&sm([[FRAC_1_SQRT_2, 0.0], [0.0, SQRT_2]]), 1e-12));
    }

    #[test]
    fn printed_stretch_phase_is_not_a_stretch() {
        // theta_minus = -2 arctan(ln 2 / 2) gives a negative tangent and a
        // signed diagonal other than diag(1/sqrt2, sqrt2).
        let tm = -2.0 * (2f64.ln() / 2.0).atan();
        let r = two_node_realization(&SchemePhases::two_node(0.0, tm).unwrap()).unwrap();
        assert!(single(&r).max_abs_diff(&sm([[FRAC_1_SQRT_2, 0.0], [0.0, SQRT_2]])) > 0.1);
    }

    #[test]
    fn pair_case2_is_four_four() {
        for p2 in [0.0, 0.7, -2.5, 3.0] {
            let p = SchemePhases::pair(0.4, 1.1, p2, FRAC_PI_2).unwrap();
            let r = pair_two_node_realization(SchemeId::PairTwoNodeCase2, &p).unwrap();
            assert!(r.variance(UNIT).max_abs_diff(&vv(&[4.0, 4.0])) < 1e-12);
        }
    }

    #[test]
    fn pair_case1_examples() {
        // (4 / sin^2 m)(1 +- cos p cos m) at p = 0, m = pi/3: (8, 8/3).
        let p = SchemePhases::pair(0.5, FRAC_PI_2, 0.0, PI / 3.0).unwrap();
        let r = pair_two_node_realization(SchemeId::PairTwoNodeCase1, &p).unwrap();
        assert!(r.variance(UNIT).max_abs_diff(&vv(&[8.0, 8.0 / 3.0])) < 1e-12);
        let p = SchemePhases::pair(0.5, FRAC_PI_2, 1.3, FRAC_PI_2).unwrap();
        let r = pair_two_node_realization(SchemeId::PairTwoNodeCase1, &p).unwrap();
        assert!(r.variance(UNIT).max_abs_diff(&vv(&[4.0, 4.0])) < 1e-12);
    }

    #[test]
    fn pair_fixed_phase_enforced() {
        let p = SchemePhases::pair(0.5, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            pair_two_node_realization(SchemeId::PairTwoNodeCase1, &p),
            Err(Error::InvalidPhases { .. })
        ));
        assert!(matches!(
            pair_two_node_realization(SchemeId::PairTwoNodeCase2, &p),
            Err(Error::InvalidPhases { .. })
        ));
    }

    #[test]
    fn pair_matrices_match_reduced_forms() {
        let (p1, m1, p2, m2) = (0.37, 1.2, -0.8, 2.1);
        let k = |plus: f64, lead: f64, minus: f64| {
            rot(-0.5 * plus - lead)
                * measurement_gate(PhaseAngle::new(minus).unwrap())
                    .unwrap()
                    .matrix()
        };
        // Case 1: R(-p2/2) M(m2) R(-p2/2 - p1).
        let r = pair_two_node_realization(
            SchemeId::PairTwoNodeCase1,
            &SchemePhases::pair(p1, FRAC_PI_2, p2, m2).unwrap(),
        )
        .unwrap();
        let expect = k(p2, 0.0, m2) * rot(-0.5 * p2 - p1);
        assert!(crate::symplectic::max_abs_diff(single(&r).matrix(), &expect) < 1e-12);
        // Case 2: R(-p2 - p1/2) M(m1) R(-p1/2).
        let r = pair_two_node_realization(
            SchemeId::PairTwoNodeCase2,
            &SchemePhases::pair(p1, m1, p2, FRAC_PI_2).unwrap(),
        )
        .unwrap();
        let expect = k(p1, p2, m1) * rot(-0.5 * p1);
        assert!(crate::symplectic::max_abs_diff(single(&r).matrix(), &expect) < 1e-12);
    }

    #[test]
    fn rotator_shears() {
        let (pa, pb) = cz_shear_phases();
        let a = rotator_realization(&pa).unwrap();
        assert!(single(&a).approx_eq(&sm([[1.0, 0.0], [1.0, 1.0]]), 1e-12));
        let b = rotator_realization(&pb).unwrap();
        assert!(single(&b).approx_eq(&sm([[1.0, 0.0], [-1.0, 1.0]]), 1e-12));
    }

    #[test]
    fn rotator_zero_phi_is_two_node() {
        let r = rotator_realization(&SchemePhases::rotator(0.0, 0.3, 1.2).unwrap()).unwrap();
        let t = two_node_realization(&SchemePhases::two_node(0.3, 1.2).unwrap()).unwrap();
        assert_eq!(r.matrix, t.matrix);
        assert_eq!(r.error_map, t.error_map);
    }

    #[test]
    fn cz_matrix_action_and_form() {
        let q = nalgebra::Vector4::new(1.0, 2.0, 0.0, 0.0);
        assert_eq!(
            cz_matrix().matrix() * q,
            nalgebra::Vector4::new(1.0, 2.0, 2.0, 1.0)
        );
        assert!(cz_matrix().form_deviation() < 1e-15);
        assert!(beam_splitter_matrix().form_deviation() < 1e-15);
    }

    #[test]
    fn cz_four_node_variance() {
        let r = cz_four_node();
        assert!(r.error_map.is_surrogate());
        let v = r.variance(SqueezeVariance::new(0.05).unwrap());
        assert!(v.max_abs_diff(&vv(&[0.1, 0.1, 0.15, 0.15])) < 1e-15);
    }

    #[test]
    fn cz_stretch() {
        let (s1, _) = cz_stretch_stages().unwrap();
        let expect = Matrix4::from_diagonal(&nalgebra::Vector4::new(
            SQRT_2,
            SQRT_2,
            FRAC_1_SQRT_2,
            FRAC_1_SQRT_2,
        )) * cz_matrix().matrix();
        assert!(crate::symplectic::max_abs_diff(&s1.matrix, &expect) < 1e-15);

        let r = cz_two_node_stretch().unwrap();
        assert!(two(&r).max_abs_diff(&cz_matrix()) < 1e-12);
        assert!(r.variance(UNIT).max_abs_diff(&vv(&[2.0, 2.0, 4.0, 4.0])) < 1e-12);
        // sqrt2 [y3; y4; y5 - y1; y6 - y2]
        let s = SQRT_2;
        let expect = DMatrix::from_row_slice(
            4,
            6,
            &[
                0.0, 0.0, s, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, s, 0.0, 0.0, -s, 0.0, 0.0, 0.0, s, 0.0,
                0.0, -s, 0.0, 0.0, 0.0, s,
            ],
        );
        assert!(crate::symplectic::max_abs_diff(r.error_map.matrix(), &expect) < 1e-12);
    }

    #[test]
    fn cz_beam_splitter_composite() {
        // Block oracle: BS = H (+) H on the x and y blocks, the shears act as
        // y += D x in the mixed basis with D = diag(1, -1), and H D H swaps
        // the modes, so the composite is y += swap(x).
        let r = cz_beam_splitter().unwrap();
        assert!(two(&r).max_abs_diff(&cz_matrix()) < 1e-12);
        assert!(r.variance(UNIT).max_abs_diff(&vv(&[2.0, 2.0, 2.0, 2.0])) < 1e-12);
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, -1.0, 0.0, -1.0, 0.0, -1.0, 0.0, 1.0, 0.0,
            ],
        );
        assert!(crate::symplectic::max_abs_diff(r.error_map.matrix(), &expect) < 1e-12);
    }

    #[test]
    fn cz_linf_ordering() {
        let linf = |r: SchemeRealization| r.variance(UNIT).0.into_iter().fold(0.0, f64::max);
        let bs = linf(cz_beam_splitter().unwrap());
        let four = linf(cz_four_node());
        let stretch = linf(cz_two_node_stretch().unwrap());
        assert!(bs < four && four < stretch);
    }

    #[test]
    fn cz_schemes_take_no_phases() {
        let p = SchemePhases::two_node(0.1, 0.2).unwrap();
        assert!(realize(SchemeId::CzBeamSplitter, &p).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn four_node_unit_determinant(
            j in 1usize..=5,
            t in proptest::array::uniform4(-PI..PI),
        ) {
            let p = SchemePhases::four_node(t[0], t[1], t[2], t[3]).unwrap();
            let id = SchemeId::four_node(j).unwrap();
            if let Ok(r) = four_node_realization(id, &p) {
                let m = single(&r);
                let scale = m.matrix().iter().fold(1.0f64, |a, v| a.max(v.abs()));
                prop_assert!((m.det() - 1.0).abs() <= MATRIX_TOL * scale * scale);
            }
        }

        #[test]
        fn two_node_rotation_angles_coincide(plus in -PI..PI, minus in 0.05..3.09f64) {
            let r = two_node_realization(&SchemePhases::two_node(plus, minus).unwrap()).unwrap();
            let f = euler_decompose(&single(&r));
            if (f.s - 1.0).abs() > 1e-6 {
                let d = (f.alpha.value() - f.beta.value()).rem_euclid(PI);
                prop_assert!(d.min(PI - d) < 1e-9, "alpha - beta = {d}");
            }
        }

        #[test]
        fn rotator_variance_is_two_two(phi in -PI..PI, plus in -PI..PI, minus in 0.05..3.09f64) {
            let r = rotator_realization(&SchemePhases::rotator(phi, plus, minus).unwrap()).unwrap();
            prop_assert!(r.variance(UNIT).max_abs_diff(&vv(&[2.0, 2.0])) < 1e-12);
            let expect = rotation(PhaseAngle::new(phi).unwrap())
                * single(&two_node_realization(&SchemePhases::two_node(plus, minus).unwrap()).unwrap());
            prop_assert!(single(&r).max_abs_diff(&expect) < 1e-12);
        }

        #[test]
        fn pair_case1_norm_at_least_four(plus in -PI..PI, minus in 0.01..3.13f64) {
            let p = SchemePhases::pair(0.0, FRAC_PI_2, plus, minus).unwrap();
            let v = pair_two_node_realization(SchemeId::PairTwoNodeCase1, &p).unwrap().variance(UNIT);
            let closed = 4.0 / minus.sin().powi(2);
            let cc = plus.cos() * minus.cos();
            prop_assert!(v.max_abs_diff(&vv(&[closed * (1.0 + cc), closed * (1.0 - cc)])) < 1e-9 * closed);
            prop_assert!(v.0[0].max(v.0[1]) >= 4.0 - 1e-12);
        }
    }
}
