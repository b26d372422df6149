//! Long-time statistics: Krylov-Bogoliubov time averages, tail masses, the
//! stationary moment bounds and two ergodicity diagnostics.
//!
//! Time averages use trapezoid weights on the sampled times after burn-in.
//! Tail masses use the same weights, which makes the Chebyshev comparison an
//! inequality between two sums of termwise-ordered nonnegative numbers and
//! therefore exact in floating point.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{stationary_constant, ConstantSet, FluidParams, TorusGrid};
use crate::spectral::SpectralVelocity;
use crate::stats::{mean, pairwise_sum, standard_error};
use crate::stepper::{simulate, Integrator, StateSample, StepError, StepperConfig};

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("horizon {horizon} leaves too few samples after burn-in {burn_in}")]
    HorizonTooShort { horizon: f64, burn_in: f64 },
    #[error("observable sets differ: {0} vs {1}")]
    ObservableMismatch(String, String),
    #[error("ensemble has {found} members, at least {required} required")]
    InsufficientEnsemble { found: usize, required: usize },
    #[error(transparent)]
    Step(#[from] StepError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Observable {
    HNormSq,
    VNormSq,
    A4,
    XNorm4,
    /// `min(||y||_X^4, n^4)`.
    Truncated(u32),
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::HNormSq => "h_norm_sq".into(),
            Observable::VNormSq => "v_norm_sq".into(),
            Observable::A4 => "a4".into(),
            Observable::XNorm4 => "x_norm_4".into(),
            Observable::Truncated(n) => format!("f_{n}"),
        }
    }

    pub fn eval(&self, s: &StateSample) -> f64 {
        match self {
            Observable::HNormSq => s.energy,
            Observable::VNormSq => s.v_norm_sq(),
            Observable::A4 => s.a4,
            Observable::XNorm4 => s.x_norm_pow4,
            Observable::Truncated(n) => s.x_norm_pow4.min((*n as f64).powi(4)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableSet(pub Vec<Observable>);

impl ObservableSet {
    /// The four norms plus `F_n` for each truncation level.
    pub fn standard(truncations: &[u32]) -> Self {
        let mut v = vec![Observable::HNormSq, Observable::VNormSq, Observable::A4, Observable::XNorm4];
        v.extend(truncations.iter().map(|&n| Observable::Truncated(n)));
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableAverage {
    pub name: String,
    pub mean: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub burn_in: f64,
    pub horizon: f64,
    pub samples: usize,
    pub batches: usize,
    pub averages: Vec<ObservableAverage>,
}

impl MeasureEstimate {
    pub fn get(&self, name: &str) -> Option<&ObservableAverage> {
        self.averages.iter().find(|a| a.name == name)
    }
}

pub const DEFAULT_BATCHES: usize = 20;

/// Default burn-in: a tenth of the horizon but at least 100 steps.
pub fn default_burn_in(t_end: f64, dt: f64) -> f64 {
    (0.1 * t_end).max(100.0 * dt)
}

/// Trapezoid weights of the samples with `t >= burn_in`.
fn window(samples: &[StateSample], burn_in: f64) -> (&[StateSample], Vec<f64>) {
    let start = samples.iter().position(|s| s.t >= burn_in).unwrap_or(samples.len());
    let w = &samples[start..];
    let weights = (0..w.len())
        .map(|j| {
            let left = if j > 0 { w[j].t - w[j - 1].t } else { 0.0 };
            let right = if j + 1 < w.len() { w[j + 1].t - w[j].t } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    (w, weights)
}

fn weighted_mean(samples: &[StateSample], weights: &[f64], f: &dyn Fn(&StateSample) -> f64) -> f64 {
    let terms: Vec<f64> = samples.iter().zip(weights).map(|(s, w)| w * f(s)).collect();
    pairwise_sum(&terms) / pairwise_sum(weights)
}

/// `(1 / (T - b)) int_b^T f(y(s)) ds` for an arbitrary functional.
pub fn time_average_of(
    samples: &[StateSample],
    burn_in: f64,
    f: impl Fn(&StateSample) -> f64,
) -> Result<f64, MeasureError> {
    let (w, weights) = window(samples, burn_in);
    if w.len() < 2 {
        return Err(MeasureError::HorizonTooShort { horizon: samples.last().map_or(0.0, |s| s.t), burn_in });
    }
    Ok(weighted_mean(w, &weights, &f))
}

pub fn time_average(
    samples: &[StateSample],
    burn_in: f64,
    observables: &ObservableSet,
    batches: usize,
) -> Result<MeasureEstimate, MeasureError> {
    let horizon = samples.last().map_or(0.0, |s| s.t);
    let (w, weights) = window(samples, burn_in);
    let batches = batches.max(2);
    if w.len() < 2 * batches || horizon <= burn_in {
        return Err(MeasureError::HorizonTooShort { horizon, burn_in });
    }
    let size = w.len() / batches;
    let averages = observables
        .0
        .iter()
        .map(|o| {
            let f = |s: &StateSample| o.eval(s);
            let batch_means: Vec<f64> = (0..batches)
                .map(|b| {
                    let lo = b * size;
                    let hi = if b + 1 == batches { w.len() } else { lo + size };
                    let seg = &w[lo..hi];
                    let n = seg.len() as f64;
                    pairwise_sum(&seg.iter().map(f).collect::<Vec<_>>()) / n
                })
                .collect();
            ObservableAverage {
                name: o.name(),
                mean: weighted_mean(w, &weights, &f),
                standard_error: standard_error(&batch_means),
            }
        })
        .collect();
    Ok(MeasureEstimate { burn_in, horizon, samples: w.len(), batches, averages })
}

/// Time fraction (trapezoid weights) after burn-in with `||y||_V > R`.
pub fn tail_frequency(samples: &[StateSample], burn_in: f64, radius: f64) -> f64 {
    let (w, weights) = window(samples, burn_in);
    let r2 = radius * radius;
    let hits: Vec<f64> = w.iter().zip(&weights).map(|(s, wt)| if s.v_norm_sq() > r2 { *wt } else { 0.0 }).collect();
    pairwise_sum(&hits) / pairwise_sum(&weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChebyshevCheck {
    pub radius: f64,
    pub frequency: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Compares `R^2 mu_T(||y||_V > R)` with `<||y||_V^2>_T` term by term.
pub fn chebyshev_check(samples: &[StateSample], burn_in: f64, radius: f64) -> ChebyshevCheck {
    let (w, weights) = window(samples, burn_in);
    let r2 = radius * radius;
    let lhs: Vec<f64> = w.iter().zip(&weights).map(|(s, wt)| if s.v_norm_sq() > r2 { wt * r2 } else { 0.0 }).collect();
    let rhs: Vec<f64> = w.iter().zip(&weights).map(|(s, wt)| wt * s.v_norm_sq()).collect();
    let (l, r) = (pairwise_sum(&lhs), pairwise_sum(&rhs));
    let total = pairwise_sum(&weights);
    ChebyshevCheck { radius, frequency: tail_frequency(samples, burn_in, radius), bound: r / total / r2, holds: l <= r }
}

/// Stationary moment bounds evaluated from the constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRecord {
    pub k: f64,
    /// Bound on `int ||x||_2^2 dmu`.
    pub b2: f64,
    /// Bound on `int ||x||_X^4 dmu` with the grouping `K beta eps0 / (2 C_K^4) [..]`.
    pub b_x: f64,
    /// Same bound with the grouping `K 2 C_K^4 / (beta eps0) [..]`.
    pub b_x_alternative: f64,
    /// `(C_P + 1) / (2 nu eps0) K`: growth rate of `int_0^t E ||y||_V^2`.
    pub v_growth: f64,
    /// `(C_P + 1) / (2 nu eps0)`: coefficient of `||y0||^2` in the same bound.
    pub v_intercept_factor: f64,
}

pub fn theoretical_bounds(
    params: &FluidParams,
    constants: &ConstantSet,
    grid: &TorusGrid,
    forcing_norm: f64,
) -> BoundRecord {
    let k = stationary_constant(params, constants, grid, forcing_norm);
    let ne = 2.0 * params.nu * params.epsilon0;
    let be = params.beta * params.epsilon0;
    let ck4 = constants.korn.powi(4);
    let bracket = constants.poincare / ne + 1.0;
    BoundRecord {
        k,
        b2: k * constants.poincare / ne,
        b_x: k * be / (2.0 * ck4) * bracket,
        b_x_alternative: k * 2.0 * ck4 / be * bracket,
        v_growth: (constants.poincare + 1.0) / ne * k,
        v_intercept_factor: (constants.poincare + 1.0) / ne,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageGap {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub relative_gap: f64,
    pub combined_standard_error: f64,
    /// `|a - b| <= 3 sqrt(se_a^2 + se_b^2)`.
    pub within_three_se: bool,
}

/// Relative gaps `|a - b| / max(scale, |a|)` per observable.
pub fn ergodicity_divergence(
    a: &MeasureEstimate,
    b: &MeasureEstimate,
    scale: f64,
) -> Result<Vec<AverageGap>, MeasureError> {
    let names = |e: &MeasureEstimate| e.averages.iter().map(|x| x.name.clone()).collect::<Vec<_>>().join(",");
    if names(a) != names(b) {
        return Err(MeasureError::ObservableMismatch(names(a), names(b)));
    }
    Ok(a.averages
        .iter()
        .zip(&b.averages)
        .map(|(x, y)| {
            let diff = (x.mean - y.mean).abs();
            let se = x.standard_error.hypot(y.standard_error);
            AverageGap {
                name: x.name.clone(),
                a: x.mean,
                b: y.mean,
                relative_gap: diff / scale.max(x.mean.abs()),
                combined_standard_error: se,
                within_three_se: diff <= 3.0 * se,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FellerRow {
    pub index: usize,
    /// `||y0^n - y0||_2`.
    pub distance: f64,
    pub estimate: f64,
    pub standard_error: f64,
    pub gap: f64,
    /// Standard error of the paired difference.
    pub gap_standard_error: f64,
}

/// Monte Carlo `(P_t phi)(y0^n)` with one noise path per member shared by
/// every `n`, compared against the limit state.
#[allow(clippy::too_many_arguments)]
pub fn feller_probe(
    integrator: &Integrator<'_>,
    config: &StepperConfig,
    limit: &SpectralVelocity,
    sequence: &[SpectralVelocity],
    seed: u64,
    members: usize,
    observable: impl Fn(&StateSample) -> f64 + Sync,
) -> Result<Vec<FellerRow>, MeasureError> {
    if members < 2 {
        return Err(MeasureError::InsufficientEnsemble { found: members, required: 2 });
    }
    let ctx = integrator.ctx;
    let eval = |y0: &SpectralVelocity| -> Result<Vec<f64>, StepError> {
        (0..members as u64)
            .into_par_iter()
            .map(|m| {
                let rec = simulate(integrator, y0, config, seed, m)?;
                Ok(observable(rec.samples.last().expect("initial sample")))
            })
            .collect()
    };
    let base = eval(limit)?;
    let mut rows = Vec::with_capacity(sequence.len());
    for (index, y0) in sequence.iter().enumerate() {
        let vals = eval(y0)?;
        let diffs: Vec<f64> = vals.iter().zip(&base).map(|(a, b)| a - b).collect();
        rows.push(FellerRow {
            index,
            distance: ctx.norm(&y0.sub(limit), crate::spectral::NormKind::L2).map_err(StepError::from)?,
            estimate: mean(&vals),
            standard_error: standard_error(&vals),
            gap: mean(&diffs).abs(),
            gap_standard_error: standard_error(&diffs),
        });
    }
    Ok(rows)
}
