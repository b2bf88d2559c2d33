//! Statistical oracle for the analytic error variances.
//!
//! Ancilla `y`-quadratures are drawn as i.i.d. `N(0, sigma2)` and pushed
//! through an error map. Trials are cut into fixed-size chunks; the random
//! stream of (slot, chunk) is derived from the master seed alone, and chunk
//! statistics are merged in chunk order, so results do not depend on how
//! many worker threads run.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schemes::{ErrorMap, SchemeRealization, VarianceVector};
use crate::symplectic::SqueezeVariance;

/// Trials per parallel work unit.
pub const CHUNK: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub trials: usize,
    pub seed: u64,
    pub sigma2: SqueezeVariance,
}

impl SampleConfig {
    pub fn new(trials: usize, seed: u64, sigma2: SqueezeVariance) -> Result<Self> {
        if trials == 0 {
            return Err(Error::Domain("trials must be >= 1".into()));
        }
        Ok(SampleConfig {
            trials,
            seed,
            sigma2,
        })
    }

    /// `3 sqrt(2 / trials)`: relative tolerance for a variance estimate.
    pub fn relative_tolerance(&self) -> f64 {
        3.0 * (2.0 / self.trials as f64).sqrt()
    }

    fn chunks(&self) -> usize {
        self.trials.div_ceil(CHUNK)
    }

    fn chunk_len(&self, chunk: usize) -> usize {
        CHUNK.min(self.trials - chunk * CHUNK)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn slot_rng(seed: u64, slot: usize, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(splitmix64(seed) ^ slot as u64));
    rng.set_stream(chunk as u64);
    rng
}

/// Fill `out[t]` for one slot over one chunk.
fn draw(seed: u64, slot: usize, chunk: usize, scale: f64, out: &mut [f64]) {
    let mut rng = slot_rng(seed, slot, chunk);
    for v in out {
        *v = scale * rng.sample::<f64, _>(StandardNormal);
    }
}

/// `trials x n` matrix of squeezed ancilla samples.
pub fn sample_squeezed(n: usize, cfg: &SampleConfig) -> DMatrix<f64> {
    let scale = cfg.sigma2.value().sqrt();
    let blocks: Vec<Vec<f64>> = (0..cfg.chunks())
        .into_par_iter()
        .map(|chunk| {
            let len = cfg.chunk_len(chunk);
            let mut block = vec![0.0; len * n];
            for slot in 0..n {
                draw(
                    cfg.seed,
                    slot,
                    chunk,
                    scale,
                    &mut block[slot * len..(slot + 1) * len],
                );
            }
            block
        })
        .collect();
    let mut m = DMatrix::zeros(cfg.trials, n);
    for (chunk, block) in blocks.iter().enumerate() {
        let len = cfg.chunk_len(chunk);
        for slot in 0..n {
            m.view_mut((chunk * CHUNK, slot), (len, 1))
                .copy_from_slice(&block[slot * len..(slot + 1) * len]);
        }
    }
    m
}

/// Running mean and sum of squared deviations per component.
#[derive(Debug, Clone)]
struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Moments {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1.0;
        for (i, &v) in x.iter().enumerate() {
            let d = v - self.mean[i];
            self.mean[i] += d / self.count;
            self.m2[i] += d * (v - self.mean[i]);
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        let n = self.count + other.count;
        if other.count == 0.0 {
            return self;
        }
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * other.count / n;
            self.m2[i] += other.m2[i] + d * d * self.count * other.count / n;
        }
        self.count = n;
        self
    }

    fn variance(&self) -> Vec<f64> {
        let denom = if self.count > 1.0 {
            self.count - 1.0
        } else {
            1.0
        };
        self.m2.iter().map(|m| m / denom).collect()
    }
}

/// Empirical per-output variance of `E y_s`.
pub fn estimate_variance(e: &ErrorMap, cfg: &SampleConfig) -> VarianceVector {
    let m = e.matrix();
    let (outputs, ancillas) = m.shape();
    let scale = cfg.sigma2.value().sqrt();
    let parts: Vec<Moments> = (0..cfg.chunks())
        .into_par_iter()
        .map(|chunk| {
            let len = cfg.chunk_len(chunk);
            let mut block = vec![0.0; len * ancillas];
            for slot in 0..ancillas {
                draw(
                    cfg.seed,
                    slot,
                    chunk,
                    scale,
                    &mut block[slot * len..(slot + 1) * len],
                );
            }
            let mut acc = Moments::new(outputs);
            let mut y = vec![0.0; outputs];
            for t in 0..len {
                for (r, yr) in y.iter_mut().enumerate() {
                    *yr = (0..ancillas).map(|a| m[(r, a)] * block[a * len + t]).sum();
                }
                acc.push(&y);
            }
            acc
        })
        .collect();
    let total = parts
        .iter()
        .fold(Moments::new(outputs), |acc, p| acc.merge(p));
    VarianceVector(total.variance())
}

/// Symmetric positive-semidefinite covariance over `(x1..xn, y1..yn)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(DMatrix<f64>);

impl CovarianceMatrix {
    pub const SYMMETRY_TOL: f64 = 1e-12;
    pub const EIGEN_TOL: f64 = 1e-9;

    pub fn try_new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Domain(format!(
                "covariance must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let asym = (&m - m.transpose()).amax();
        if asym > Self::SYMMETRY_TOL {
            return Err(Error::Domain(format!(
                "covariance not symmetric (max deviation {asym:e})"
            )));
        }
        if m.nrows() > 0 {
            let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
            if min < -Self::EIGEN_TOL {
                return Err(Error::Domain(format!(
                    "covariance has negative eigenvalue {min:e}"
                )));
            }
        }
        Ok(CovarianceMatrix(m))
    }

    /// `(1/4) I` on `modes` modes.
    pub fn vacuum(modes: usize) -> Self {
        CovarianceMatrix(DMatrix::identity(2 * modes, 2 * modes) * SqueezeVariance::VACUUM)
    }

    pub fn zeros(dim: usize) -> Self {
        CovarianceMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn diagonal(&self) -> VarianceVector {
        VarianceVector(self.0.diagonal().iter().copied().collect())
    }

    /// `U S U^T + sigma2 E E^T`, symmetrised.
    pub fn propagate(&self, u: &DMatrix<f64>, e: &DMatrix<f64>, sigma2: f64) -> Result<Self> {
        let d = self.dim();
        if u.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: u.nrows(),
            });
        }
        if e.nrows() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: e.nrows(),
            });
        }
        let out = u * &self.0 * u.transpose() + e * e.transpose() * sigma2;
        Ok(CovarianceMatrix((&out + out.transpose()) * 0.5))
    }
}

/// Output covariance of a scheme for a given input covariance.
pub fn output_covariance(
    r: &SchemeRealization,
    input: &CovarianceMatrix,
    sigma2: SqueezeVariance,
) -> Result<CovarianceMatrix> {
    input.propagate(&r.matrix.to_dmatrix(), r.error_map.matrix(), sigma2.value())
}

/// Sample covariance between columns of `samples`, zero-mean assumed.
pub fn sample_cross_moment(samples: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let a: DVector<f64> = samples.column(i).into();
    a.dot(&samples.column(j)) / samples.nrows() as f64
}
