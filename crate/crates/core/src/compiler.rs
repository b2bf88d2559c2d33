//! Lowering of Gaussian circuits onto minimal-error measurement schemes.
//!
//! Every single-mode gate becomes one two-node cluster followed by a
//! rotator. Every CZ becomes two symmetric beam splitters around the shears
//! A and B, each of which is again a two-node cluster with a rotator. The
//! error budget is the input-independent part of the output covariance,
//! propagated step by step in units of `sigma2`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::CovarianceMatrix;
use crate::schemes::{beam_splitter_matrix, rotator_realization, SchemePhases, VarianceVector};
use crate::symplectic::{canonical_angle, euler_decompose, SqueezeVariance, SymplecticMatrix2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Single {
        mode: usize,
        matrix: SymplecticMatrix2,
    },
    Cz {
        a: usize,
        b: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitIR {
    pub modes: usize,
    pub gates: Vec<Gate>,
}

impl CircuitIR {
    pub fn new(modes: usize, gates: Vec<Gate>) -> Result<Self> {
        let c = CircuitIR { modes, gates };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::InvalidCircuit(
                "circuit needs at least one mode".into(),
            ));
        }
        let check = |index: usize, mode: usize| {
            if mode >= self.modes {
                Err(Error::InvalidCircuit(format!(
                    "gate {index}: mode {mode} out of range for {} modes",
                    self.modes
                )))
            } else {
                Ok(())
            }
        };
        for (index, g) in self.gates.iter().enumerate() {
            match *g {
                Gate::Single { mode, .. } => check(index, mode)?,
                Gate::Cz { a, b } => {
                    check(index, a)?;
                    check(index, b)?;
                    if a == b {
                        return Err(Error::InvalidCircuit(format!(
                            "gate {index}: cz needs two distinct modes, got {a}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Product of all gates, last gate leftmost.
    pub fn composite(&self) -> DMatrix<f64> {
        let n = self.modes;
        self.gates
            .iter()
            .fold(DMatrix::identity(2 * n, 2 * n), |acc, g| {
                let u = match *g {
                    Gate::Single { mode, matrix } => embed_single(n, mode, matrix.matrix()),
                    Gate::Cz { a, b } => embed_two(n, a, b, crate::schemes::cz_matrix().matrix()),
                };
                u * acc
            })
    }
}

/// Rotator-scheme phases `(phi, theta_plus, theta_minus)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatePhases {
    pub phi: f64,
    pub theta_plus: f64,
    pub theta_minus: f64,
}

impl GatePhases {
    pub fn scheme_phases(&self) -> Result<SchemePhases> {
        SchemePhases::rotator(self.phi, self.theta_plus, self.theta_minus)
    }

    /// Transformation realised by these phases.
    pub fn realize(&self) -> Result<SymplecticMatrix2> {
        let r = rotator_realization(&self.scheme_phases()?)?;
        match r.matrix {
            crate::symplectic::Transform::Single(m) => Ok(m),
            crate::symplectic::Transform::Two(_) => unreachable!("rotator scheme is single-mode"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlanStep {
    TwoNodeGate {
        mode: usize,
        theta_plus: f64,
        theta_minus: f64,
        rotator_phi: f64,
        source: usize,
    },
    BeamSplitter {
        modes: [usize; 2],
        source: usize,
    },
}

impl PlanStep {
    fn two_node(mode: usize, p: GatePhases, source: usize) -> Self {
        PlanStep::TwoNodeGate {
            mode,
            theta_plus: p.theta_plus,
            theta_minus: p.theta_minus,
            rotator_phi: p.phi,
            source,
        }
    }

    pub fn source(&self) -> usize {
        match *self {
            PlanStep::TwoNodeGate { source, .. } | PlanStep::BeamSplitter { source, .. } => source,
        }
    }

    /// Transformation and error map of this step on `modes` modes.
    pub fn action(&self, modes: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match *self {
            PlanStep::TwoNodeGate {
                mode,
                theta_plus,
                theta_minus,
                rotator_phi,
                ..
            } => {
                let r = rotator_realization(&SchemePhases::rotator(
                    rotator_phi,
                    theta_plus,
                    theta_minus,
                )?)?;
                let u = r.matrix.to_dmatrix();
                let u = Matrix2::new(u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
                let mut e = DMatrix::zeros(2 * modes, 2);
                let em = r.error_map.matrix();
                for (k, row) in [mode, modes + mode].into_iter().enumerate() {
                    e[(row, 0)] = em[(k, 0)];
                    e[(row, 1)] = em[(k, 1)];
                }
                Ok((embed_single(modes, mode, &u), e))
            }
            PlanStep::BeamSplitter { modes: [a, b], .. } => Ok((
                embed_two(modes, a, b, beam_splitter_matrix().matrix()),
                DMatrix::zeros(2 * modes, 0),
            )),
        }
    }
}

fn embed_single(n: usize, mode: usize, g: &Matrix2<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::identity(2 * n, 2 * n);
    let idx = [mode, n + mode];
    for r in 0..2 {
        for c in 0..2 {
            m[(idx[r], idx[c])] = g[(r, c)];
        }
    }
    m
}

fn embed_two(n: usize, a: usize, b: usize, g: &nalgebra::Matrix4<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::identity(2 * n, 2 * n);
    let idx = [a, b, n + a, n + b];
    for r in 0..4 {
        for c in 0..4 {
            m[(idx[r], idx[c])] = g[(r, c)];
        }
    }
    m
}

/// Canonical rotator phases for a single-mode gate.
///
/// With `target = R(alpha) diag(s, 1/s) R(beta)`, `s >= 1`:
/// `theta_plus = -2 beta`, `theta_minus = 2 arctan(1/s)`, `phi = alpha - beta`.
pub fn decompose_single_mode_gate(target: &SymplecticMatrix2) -> GatePhases {
    let f = euler_decompose(target);
    let (alpha, beta) = (f.alpha.value(), f.beta.value());
    let theta_minus = if f.s == 1.0 {
        FRAC_PI_2
    } else {
        2.0 * (1.0 / f.s).atan()
    };
    GatePhases {
        phi: canonical_angle(alpha - beta),
        theta_plus: -2.0 * beta,
        theta_minus,
    }
}

/// Reconstruction tolerance, scaled by the target's largest entry.
fn reconstruction_tol(target: &SymplecticMatrix2) -> f64 {
    1e-9 * target.matrix().amax().max(1.0)
}

/// Accept any phase set that reproduces `target` and return the canonical
/// one.
pub fn normalize_phases(target: &SymplecticMatrix2, phases: GatePhases) -> Result<GatePhases> {
    let got = phases.realize()?;
    let dev = got.max_abs_diff(target);
    if dev > reconstruction_tol(target) {
        return Err(Error::InvalidPhases {
            scheme: "TwoNodeRotator".into(),
            reason: format!("phases do not reproduce the target (max deviation {dev:e})"),
        });
    }
    Ok(decompose_single_mode_gate(target))
}

/// Shear A `[[1,0],[1,1]]` and shear B `[[1,0],[-1,1]]`.
pub fn cz_shears() -> (SymplecticMatrix2, SymplecticMatrix2) {
    (
        SymplecticMatrix2::from_rows([[1.0, 0.0], [1.0, 1.0]]).expect("det 1"),
        SymplecticMatrix2::from_rows([[1.0, 0.0], [-1.0, 1.0]]).expect("det 1"),
    )
}

/// Beam splitter, A on mode `a`, B on mode `b`, beam splitter.
pub fn lower_cz(a: usize, b: usize, source: usize) -> Vec<PlanStep> {
    let (sa, sb) = cz_shears();
    vec![
        PlanStep::BeamSplitter {
            modes: [a, b],
            source,
        },
        PlanStep::two_node(a, decompose_single_mode_gate(&sa), source),
        PlanStep::two_node(b, decompose_single_mode_gate(&sb), source),
        PlanStep::BeamSplitter {
            modes: [a, b],
            source,
        },
    ]
}

/// Accumulated error covariance of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBudget {
    /// Covariance in units of `sigma2`.
    pub covariance: CovarianceMatrix,
    pub sigma2: SqueezeVariance,
}

impl ErrorBudget {
    /// Diagonal in units of `sigma2`.
    pub fn variance_vector(&self) -> VarianceVector {
        self.covariance.diagonal()
    }

    /// Diagonal in absolute units.
    pub fn absolute(&self) -> VarianceVector {
        self.variance_vector().scaled(self.sigma2.value())
    }
}

/// L-infinity norm of the budget, units of `sigma2`.
pub fn budget_norm(b: &ErrorBudget) -> f64 {
    b.variance_vector()
        .components()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledCircuit {
    pub modes: usize,
    pub plan: Vec<PlanStep>,
    pub budget: ErrorBudget,
}

/// Lower each gate in source order and propagate the error budget.
pub fn compile_circuit(c: &CircuitIR, sigma2: SqueezeVariance) -> Result<CompiledCircuit> {
    c.validate()?;
    let mut plan = Vec::new();
    for (index, g) in c.gates.iter().enumerate() {
        match *g {
            Gate::Single { mode, matrix } => plan.push(PlanStep::two_node(
                mode,
                decompose_single_mode_gate(&matrix),
                index,
            )),
            Gate::Cz { a, b } => plan.extend(lower_cz(a, b, index)),
        }
    }
    let budget = propagate_budget(&plan, c.modes, sigma2)?;
    Ok(CompiledCircuit {
        modes: c.modes,
        plan,
        budget,
    })
}

/// `S <- U S U^T + E E^T` over the steps, starting from zero.
pub fn propagate_budget(
    plan: &[PlanStep],
    modes: usize,
    sigma2: SqueezeVariance,
) -> Result<ErrorBudget> {
    let mut cov = CovarianceMatrix::zeros(2 * modes);
    for step in plan {
        let (u, e) = step.action(modes)?;
        cov = cov.propagate(&u, &e, 1.0)?;
    }
    Ok(ErrorBudget {
        covariance: cov,
        sigma2,
    })
}

/// Composite transformation of a plan, last step leftmost.
pub fn plan_composite(plan: &[PlanStep], modes: usize) -> Result<DMatrix<f64>> {
    plan.iter()
        .try_fold(DMatrix::identity(2 * modes, 2 * modes), |acc, s| {
            Ok(s.action(modes)?.0 * acc)
        })
}

/// All step errors carried to the output, side by side: the plan's output
/// is `U q_in + E y_s` with this `E`.
pub fn plan_error_map(plan: &[PlanStep], modes: usize) -> Result<DMatrix<f64>> {
    let dim = 2 * modes;
    let mut blocks: Vec<DMatrix<f64>> = Vec::new();
    for step in plan {
        let (u, e) = step.action(modes)?;
        for b in &mut blocks {
            *b = &u * &*b;
        }
        if e.ncols() > 0 {
            blocks.push(e);
        }
    }
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(dim, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (dim, b.ncols())).copy_from(&b);
        at += b.ncols();
    }
    Ok(out)
}
