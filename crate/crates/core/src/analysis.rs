//! Cross-scheme comparison: phase matching between the five four-node
//! configurations, L-infinity norms, the `(theta_3, theta_4)` error surface,
//! the area ratio between the four-node and pair schemes, and minimisation.
//!
//! All scans run over `(0, pi)^2`, sampled at `theta_k = pi k / (n - 1)`,
//! with cells closer than `margin` to `0` or `pi` on either axis excluded.
//! Cells are evaluated in parallel but always merged in `theta_3`-major
//! order, and reductions are integer counts or ordered minima, so the
//! output does not depend on the thread schedule.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schemes::{
    closed_form_components, four_node_realization, four_node_variance_closed_form, SchemeId,
    SchemePhases, SchemeRealization, VarianceVector,
};
use crate::symplectic::{PhaseAngle, SqueezeVariance, SINGULARITY_EPS};

/// L-infinity norm of the best pair-of-two-node scheme, `4 sigma2`.
pub const PAIR_NORM: f64 = 4.0;

/// `(theta_3, theta_4, theta_plus)` of one four-node configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfigPhases {
    pub theta3: f64,
    pub theta4: f64,
    pub theta_plus: f64,
}

/// Phases for configurations 1..=5 that target the same transformation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPhases {
    pub configs: [ConfigPhases; 5],
}

impl MatchedPhases {
    /// Phases of configuration `j` (1-based).
    pub fn config(&self, j: usize) -> ConfigPhases {
        self.configs[j - 1]
    }

    /// Full `(theta_1..theta_4)` set for configuration `j` at the given
    /// `theta_minus`.
    pub fn scheme_phases(&self, j: usize, theta_minus: f64) -> Result<SchemePhases> {
        let c = self.config(j);
        SchemePhases::four_node_from_sums(c.theta_plus, theta_minus, c.theta3, c.theta4)
    }

    /// All five realizations at `theta_minus = pi/2`.
    pub fn realizations(&self) -> Result<[SchemeRealization; 5]> {
        let r = |j: usize| {
            four_node_realization(
                SchemeId::four_node(j).unwrap(),
                &self.scheme_phases(j, FRAC_PI_2)?,
            )
        };
        Ok([r(1)?, r(2)?, r(3)?, r(4)?, r(5)?])
    }
}

/// Translate configuration-3 phases to the other four configurations:
///
/// - `theta_4^1 = theta_4^3`, `theta_3^2 = theta_3^3`
/// - `theta_3^{1,4,5} = -arctan(cot theta_3^3)`
/// - `theta_4^{2,4,5} = -arctan(cot theta_4^3)`
/// - `theta_+^{1,4} = theta_+^3 - pi/2`, `theta_+^{2,5} = pi - theta_+^3`
pub fn match_phases(
    theta3: PhaseAngle,
    theta4: PhaseAngle,
    theta_plus: PhaseAngle,
) -> Result<MatchedPhases> {
    let (t3, t4, tp) = (theta3.value(), theta4.value(), theta_plus.value());
    let cot = |t: f64, label: &str| {
        let (s, c) = t.sin_cos();
        if s.abs() <= SINGULARITY_EPS {
            Err(Error::SingularPhase(format!(
                "cot({label}) diverges at {t}"
            )))
        } else {
            Ok(c / s)
        }
    };
    let m3 = -cot(t3, "theta_3")?.atan();
    let m4 = -cot(t4, "theta_4")?.atan();
    let quarter_back = tp - FRAC_PI_2;
    let mirrored = PI - tp;
    let cp = |theta3, theta4, theta_plus| ConfigPhases {
        theta3,
        theta4,
        theta_plus,
    };
    Ok(MatchedPhases {
        configs: [
            cp(m3, t4, quarter_back),
            cp(t3, m4, mirrored),
            cp(t3, t4, tp),
            cp(m3, m4, quarter_back),
            cp(m3, m4, mirrored),
        ],
    })
}

/// Largest component.
pub fn linf_norm(v: &VarianceVector) -> Result<f64> {
    v.components()
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or(Error::Empty("variance vector has no components"))
}

/// Square grid over `(0, pi)^2` with pole exclusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    n: usize,
    margin: f64,
}

impl ScanGrid {
    pub const MIN_MARGIN: f64 = 1e-9;

    pub fn new(n: usize, margin: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!(
                "grid needs at least 2 points per axis, got {n}"
            )));
        }
        if !(margin.is_finite() && margin >= Self::MIN_MARGIN) {
            return Err(Error::Domain(format!(
                "grid margin must be >= 1e-9, got {margin}"
            )));
        }
        Ok(ScanGrid { n, margin })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn point(&self, k: usize) -> f64 {
        PI * (k as f64 / (self.n - 1) as f64)
    }

    pub fn spacing(&self) -> f64 {
        PI / (self.n - 1) as f64
    }

    pub fn is_included(&self, theta: f64) -> bool {
        theta >= self.margin && PI - theta >= self.margin
    }

    /// Included axis values, in increasing order.
    pub fn axis(&self) -> Vec<f64> {
        (0..self.n)
            .map(|k| self.point(k))
            .filter(|&t| self.is_included(t))
            .collect()
    }

    pub fn excluded_cells(&self) -> usize {
        let kept = self.axis().len();
        self.n * self.n - kept * kept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub theta3: f64,
    pub theta4: f64,
    pub norm_four_node: f64,
    pub norm_pair: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub rows: Vec<ScanRow>,
    pub excluded: usize,
}

/// L-infinity norm of the four-node closed form, units of `sigma2`.
fn four_node_norm(theta3: f64, theta4: f64) -> f64 {
    let c3 = theta3.cos() / theta3.sin();
    let c4 = theta4.cos() / theta4.sin();
    let v = closed_form_components(c3, c4, theta4);
    v[0].max(v[1])
}

/// Both error surfaces on the grid, `theta_3`-major.
pub fn scan_surface(grid: &ScanGrid) -> Scan {
    let axis = grid.axis();
    let rows = axis
        .par_iter()
        .map(|&t3| {
            axis.iter()
                .map(|&t4| ScanRow {
                    theta3: t3,
                    theta4: t4,
                    norm_four_node: four_node_norm(t3, t4),
                    norm_pair: PAIR_NORM,
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Scan {
        rows,
        excluded: grid.excluded_cells(),
    }
}

/// Cell counts behind the area ratio `S2 / S1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaRatio {
    /// Cells where the pair scheme has the smaller norm.
    pub pair_better: u64,
    /// Cells where the four-node scheme has the smaller norm.
    pub four_node_better: u64,
    /// Exact ties, counted on neither side.
    pub ties: u64,
}

impl AreaRatio {
    /// `S2 / S1`.
    pub fn ratio(&self) -> Result<f64> {
        if self.four_node_better == 0 {
            return Err(Error::ZeroDenominator);
        }
        Ok(self.pair_better as f64 / self.four_node_better as f64)
    }

    /// `S1 / S2`.
    pub fn reversed(&self) -> Result<f64> {
        if self.pair_better == 0 {
            return Err(Error::ZeroDenominator);
        }
        Ok(self.four_node_better as f64 / self.pair_better as f64)
    }
}

/// Count grid cells by which scheme has the smaller L-infinity norm.
pub fn area_counts_with<F>(grid: &ScanGrid, four_node: F, pair_norm: f64) -> AreaRatio
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let axis = grid.axis();
    let (pair_better, four_node_better, ties) = axis
        .par_iter()
        .map(|&t3| {
            axis.iter().fold((0u64, 0u64, 0u64), |(p, f, t), &t4| {
                let v = four_node(t3, t4);
                if pair_norm < v {
                    (p + 1, f, t)
                } else if v < pair_norm {
                    (p, f + 1, t)
                } else {
                    (p, f, t + 1)
                }
            })
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    AreaRatio {
        pair_better,
        four_node_better,
        ties,
    }
}

pub fn area_counts(grid: &ScanGrid) -> AreaRatio {
    area_counts_with(grid, four_node_norm, PAIR_NORM)
}

/// `S2 / S1`: cells where the pair scheme wins over cells where the
/// four-node scheme wins.
pub fn area_ratio(grid: &ScanGrid) -> Result<f64> {
    area_counts(grid).ratio()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub value: f64,
    pub at: [f64; 2],
}

/// Smallest value of `f` on the grid, first hit in `theta_3`-major order,
/// optionally polished by a bounded simplex descent from that cell.
pub fn minimize_on_grid<F>(grid: &ScanGrid, refine: bool, f: F) -> Minimum
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let axis = grid.axis();
    let best = axis
        .par_iter()
        .map(|&a| {
            axis.iter().fold(None::<Minimum>, |best, &b| {
                let v = f(a, b);
                match best {
                    Some(m) if m.value <= v => Some(m),
                    _ => Some(Minimum {
                        value: v,
                        at: [a, b],
                    }),
                }
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(None::<Minimum>, |best, m| match best {
            Some(b) if b.value <= m.value => Some(b),
            _ => Some(m),
        })
        .expect("grid has at least one included cell");
    if !refine {
        return best;
    }
    let lo = grid.margin();
    let hi = PI - grid.margin();
    let refined = nelder_mead(
        &|p: [f64; 2]| f(p[0], p[1]),
        best.at,
        grid.spacing(),
        [lo, hi],
    );
    if refined.value < best.value {
        refined
    } else {
        best
    }
}

/// Minimise one component of the four-node closed form over the grid.
pub fn minimize_variance_component(component: Component, grid: &ScanGrid, refine: bool) -> Minimum {
    let idx = match component {
        Component::X => 0,
        Component::Y => 1,
    };
    minimize_on_grid(grid, refine, |t3, t4| {
        let c3 = t3.cos() / t3.sin();
        let c4 = t4.cos() / t4.sin();
        closed_form_components(c3, c4, t4)[idx]
    })
}

/// Minimise the L-infinity norm of the pair case-1 variance over
/// `(theta_plus^2, theta_minus^2)`, with both axes taken from `grid`.
pub fn minimize_pair_case1_norm(grid: &ScanGrid, refine: bool) -> Minimum {
    minimize_on_grid(grid, refine, |plus, minus| {
        let v = pair_case1_variance(plus, minus);
        v[0].max(v[1])
    })
}

/// `(4 / sin^2 m) (1 +- cos p cos m)`, units of `sigma2`.
pub fn pair_case1_variance(theta_plus2: f64, theta_minus2: f64) -> [f64; 2] {
    let k = 4.0 / theta_minus2.sin().powi(2);
    let cc = theta_plus2.cos() * theta_minus2.cos();
    [k * (1.0 + cc), k * (1.0 - cc)]
}

const SIMPLEX_TOL: f64 = 1e-10;
const SIMPLEX_MAX_ITER: usize = 500;

/// Derivative-free simplex descent in two dimensions, with every trial
/// point clamped into `[lo, hi]^2`.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(
    f: &F,
    start: [f64; 2],
    step: f64,
    bounds: [f64; 2],
) -> Minimum {
    let clamp = |p: [f64; 2]| {
        [
            p[0].clamp(bounds[0], bounds[1]),
            p[1].clamp(bounds[0], bounds[1]),
        ]
    };
    let eval = |p: [f64; 2]| {
        let p = clamp(p);
        let v = f(p);
        (p, if v.is_nan() { f64::INFINITY } else { v })
    };
    let mut simplex = [
        eval(start),
        eval([start[0] + step, start[1]]),
        eval([start[0], start[1] + step]),
    ];
    let lerp =
        |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];

    for _ in 0..SIMPLEX_MAX_ITER {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[2].1 - simplex[0].1).abs() <= SIMPLEX_TOL {
            break;
        }
        let centroid = lerp(simplex[0].0, simplex[1].0, 0.5);
        let worst = simplex[2];
        let reflected = eval(lerp(centroid, worst.0, -1.0));
        if reflected.1 < simplex[0].1 {
            let expanded = eval(lerp(centroid, worst.0, -2.0));
            simplex[2] = if expanded.1 < reflected.1 {
                expanded
            } else {
                reflected
            };
        } else if reflected.1 < simplex[1].1 {
            simplex[2] = reflected;
        } else {
            let contracted = if reflected.1 < worst.1 {
                eval(lerp(centroid, reflected.0, 0.5))
            } else {
                eval(lerp(centroid, worst.0, 0.5))
            };
            if contracted.1 < worst.1.min(reflected.1) {
                simplex[2] = contracted;
            } else {
                let best = simplex[0].0;
                simplex[1] = eval(lerp(best, simplex[1].0, 0.5));
                simplex[2] = eval(lerp(best, simplex[2].0, 0.5));
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Minimum {
        value: simplex[0].1,
        at: simplex[0].0,
    }
}

/// Variance vectors of the five configurations at matched phases, in
/// units of `sigma2`, next to the closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedVariances {
    pub per_config: [VarianceVector; 5],
    pub closed_form: VarianceVector,
}

pub fn matched_variances(
    theta3: PhaseAngle,
    theta4: PhaseAngle,
    theta_plus: PhaseAngle,
) -> Result<MatchedVariances> {
    let m = match_phases(theta3, theta4, theta_plus)?;
    let r = m.realizations()?;
    let v = |i: usize| r[i].variance(SqueezeVariance::UNIT);
    Ok(MatchedVariances {
        per_config: [v(0), v(1), v(2), v(3), v(4)],
        closed_form: four_node_variance_closed_form(theta3, theta4)?,
    })
}
