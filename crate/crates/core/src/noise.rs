//! Finite-rank multiplicative noise `G(y) dW = sum_k sigma_k(y) d beta_k`.
//!
//! Every coefficient has the form `sigma_k(y) = c_k s(y)` with a pointwise
//! shape `s`: the identity (linear noise) or a componentwise sine (bounded
//! noise). Both shapes are 1-Lipschitz, so the total Lipschitz constant is
//! `L = sum_k c_k^2`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TorusGrid;
use crate::spectral::PhysicalVelocity;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("invalid noise amplitudes: {0}")]
    InvalidAmplitudes(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseShape {
    Linear,
    Bounded,
}

impl NoiseShape {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            NoiseShape::Linear => v,
            NoiseShape::Bounded => v.sin(),
        }
    }
}

/// How to choose the amplitudes `c_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeSpec {
    /// `c_k` proportional to `2^{-k/2}`, scaled so that `sum c_k^2 = L`.
    Geometric {
        modes: usize,
        lipschitz: f64,
    },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    amplitudes: Vec<f64>,
    shape: NoiseShape,
    lipschitz: f64,
}

impl NoiseModel {
    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn shape(&self) -> NoiseShape {
        self.shape
    }

    pub fn modes(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn lipschitz_total(&self) -> f64 {
        self.lipschitz
    }

    /// Zero noise.
    pub fn none() -> Self {
        Self { amplitudes: Vec::new(), shape: NoiseShape::Linear, lipschitz: 0.0 }
    }

    /// `sum_k c_k d beta_k`, the scalar multiplying `s(y)` over one step.
    pub fn combined_increment(&self, inc: &WienerIncrement) -> f64 {
        self.amplitudes.iter().zip(&inc.dbeta).map(|(c, b)| c * b).sum()
    }
}

pub fn build_noise_model(spec: &AmplitudeSpec, shape: NoiseShape) -> Result<NoiseModel, NoiseError> {
    let amplitudes = match spec {
        AmplitudeSpec::Geometric { modes, lipschitz } => {
            if *modes == 0 {
                Vec::new()
            } else {
                if !(*lipschitz > 0.0 && lipschitz.is_finite()) {
                    return Err(NoiseError::InvalidAmplitudes(format!(
                        "target Lipschitz constant {lipschitz} must be positive"
                    )));
                }
                let total: f64 = (1..=*modes).map(|k| 0.5f64.powi(k as i32)).sum();
                (1..=*modes).map(|k| (lipschitz * 0.5f64.powi(k as i32) / total).sqrt()).collect()
            }
        }
        AmplitudeSpec::Explicit(c) => {
            if let Some(bad) = c.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
                return Err(NoiseError::InvalidAmplitudes(format!("amplitude {bad} must be positive and finite")));
            }
            c.clone()
        }
    };
    let lipschitz = amplitudes.iter().map(|c| c * c).sum();
    Ok(NoiseModel { amplitudes, shape, lipschitz })
}

/// Brownian increments over one step, one per noise mode.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    pub dt: f64,
    pub dbeta: Vec<f64>,
}

impl WienerIncrement {
    pub fn zero(dt: f64, modes: usize) -> Self {
        Self { dt, dbeta: vec![0.0; modes] }
    }

    /// Sum of consecutive increments over the concatenated interval.
    pub fn merge(&self, next: &Self) -> Self {
        Self { dt: self.dt + next.dt, dbeta: self.dbeta.iter().zip(&next.dbeta).map(|(a, b)| a + b).collect() }
    }
}

/// Draws `dbeta_k ~ N(0, dt)` in mode order.
pub fn sample_increments(rng: &mut impl Rng, modes: usize, dt: f64) -> WienerIncrement {
    let sd = dt.sqrt();
    WienerIncrement { dt, dbeta: (0..modes).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect() }
}

/// Grid values of `G(y) dW` before projection.
pub fn apply_diffusion(y: &PhysicalVelocity, inc: &WienerIncrement, model: &NoiseModel) -> PhysicalVelocity {
    let w = model.combined_increment(inc);
    let shape = model.shape;
    PhysicalVelocity { n: y.n, data: std::array::from_fn(|c| y.data[c].iter().map(|&v| w * shape.apply(v)).collect()) }
}

/// `sum_k ||sigma_k(y)||_2^2` by grid quadrature.
pub fn ito_trace(grid: &TorusGrid, y: &PhysicalVelocity, model: &NoiseModel) -> f64 {
    let shape = model.shape;
    let sq: f64 = y.data.iter().flatten().map(|&v| shape.apply(v).powi(2)).sum();
    model.lipschitz * grid.cell_area() * sq
}

/// Pointwise Lipschitz check: returns `(sum_k |sigma_k(l) - sigma_k(m)|^2, L |l - m|^2)`.
pub fn lipschitz_gap(lambda: [f64; 2], mu: [f64; 2], model: &NoiseModel) -> (f64, f64) {
    let shape = model.shape;
    let lhs = model
        .amplitudes
        .iter()
        .map(|c| (0..2).map(|i| (c * shape.apply(lambda[i]) - c * shape.apply(mu[i])).powi(2)).sum::<f64>())
        .sum();
    let d2 = (lambda[0] - mu[0]).powi(2) + (lambda[1] - mu[1]).powi(2);
    (lhs, model.lipschitz * d2)
}
