//! Synthetic linear time-varying systems `x_{k+1} = A_k x_k + B_k gamma_k`
//! with `A_k = (1 + eps sin(omega k)) A` and `B_k` modulated the same way.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg::eig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LtvSpec {
    pub n: usize,
    pub l: usize,
    /// Number of snapshots.
    pub m: usize,
    pub epsilon: f64,
    /// Radians per sample.
    pub omega: f64,
    pub seed: u64,
    /// Spectral radius of the base `A`.
    pub stability_margin: f64,
}

impl Default for LtvSpec {
    fn default() -> Self {
        LtvSpec {
            n: 20,
            l: 2,
            m: 200,
            epsilon: 0.001,
            omega: 1.0,
            seed: 0,
            stability_margin: 0.95,
        }
    }
}

impl LtvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.m <= self.n {
            return Err(Error::InvalidInput(format!("need n >= 1 and m > n, got n = {}, m = {}", self.n, self.m)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite() && self.omega.is_finite()) {
            return Err(Error::InvalidInput("epsilon must be >= 0 and omega finite".into()));
        }
        if !(self.stability_margin > 0.0 && self.stability_margin.is_finite()) {
            return Err(Error::InvalidInput("stability margin must be positive".into()));
        }
        Ok(())
    }
}

/// Ground truth behind a generated dataset.
#[derive(Clone, Debug)]
pub struct LtvSystem {
    pub spec: LtvSpec,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LtvSystem {
    pub fn modulation(&self, k: usize) -> f64 {
        1.0 + self.spec.epsilon * (self.spec.omega * k as f64).sin()
    }

    pub fn a_k(&self, k: usize) -> DMatrix<f64> {
        &self.a * self.modulation(k)
    }

    pub fn b_k(&self, k: usize) -> DMatrix<f64> {
        &self.b * self.modulation(k)
    }
}

fn normal(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    // Column-major fill keeps the draw order independent of nalgebra internals.
    let mut m = DMatrix::zeros(r, c);
    for j in 0..c {
        for i in 0..r {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Simulate a trajectory of `m` snapshots. Inputs are i.i.d. standard normal
/// with one column per snapshot; the last column never drives the state.
pub fn gen_ltv(spec: &LtvSpec) -> Result<(Dataset, LtvSystem)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut a = normal(&mut rng, spec.n, spec.n);
    let radius = eig(&a)?.0[0].norm();
    if radius > 0.0 {
        a *= spec.stability_margin / radius;
    }
    let b = normal(&mut rng, spec.n, spec.l);
    let x0: DVector<f64> = normal(&mut rng, spec.n, 1).column(0).into_owned();
    let inputs = normal(&mut rng, spec.l, spec.m);
    let system = LtvSystem { spec: spec.clone(), a, b };

    let mut states = DMatrix::zeros(spec.n, spec.m);
    states.set_column(0, &x0);
    for k in 0..spec.m - 1 {
        let next = system.a_k(k) * states.column(k) + system.b_k(k) * inputs.column(k);
        states.set_column(k + 1, &next);
    }
    Ok((Dataset::new(states, Some(inputs))?, system))
}
