//! Trajectory-level checks: the energy ledger residual, the finite-horizon
//! energy inequality and the weighted twin-run stability bound.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{ConstantSet, FluidParams};
use crate::noise::sample_increments;
use crate::operators::{state_functionals, PhysicalState};
use crate::spectral::{NormKind, SpectralVelocity};
use crate::stats::{cumulative_trapezoid, mean, pairwise_sum, standard_error, trapezoid};
use crate::stepper::{
    predicted_change, trajectory_rng, Integrator, LedgerEntry, StepError, StepperConfig, TrajectoryRecord,
};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("ledger is empty")]
    EmptyLedger,
    #[error("ensemble has {found} members, at least {required} required")]
    InsufficientEnsemble { found: usize, required: usize },
    #[error("initial states live on grids of size {a} and {b}")]
    GridMismatch { a: usize, b: usize },
    #[error(transparent)]
    Step(#[from] StepError),
}

pub const MIN_ESTIMATE_ENSEMBLE: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub residuals: Vec<f64>,
    pub max_abs: f64,
    /// Mean of `|residual|` over steps.
    pub mean_abs: f64,
    /// `sum |residual| / T`: residual per unit time, first order in `dt`.
    pub mean_rate: f64,
}

/// Recomputes each step's residual from the ledger terms.
pub fn energy_residual(ledger: &[LedgerEntry], params: &FluidParams) -> Result<ResidualSummary, DiagnosticsError> {
    if ledger.is_empty() {
        return Err(DiagnosticsError::EmptyLedger);
    }
    let residuals: Vec<f64> = ledger.iter().map(|e| e.energy_change - predicted_change(e, params)).collect();
    let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    let horizon = pairwise_sum(&ledger.iter().map(|e| e.dt).collect::<Vec<_>>());
    Ok(ResidualSummary {
        max_abs: abs.iter().copied().fold(0.0, f64::max),
        mean_abs: mean(&abs),
        mean_rate: pairwise_sum(&abs) / horizon,
        residuals,
    })
}

/// Monte Carlo evaluation of the finite-horizon energy inequality
/// `E sup ||y||^2 + 2 nu eps0 E int ||grad y||^2 + beta eps0 E int int |A|^4
///  <= e^{C(L) T} (2 E ||y0||^2 + 2 C_F (beta eps0)^{-1/3} T ||F||^{4/3})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate1Report {
    pub members: usize,
    pub horizon: f64,
    pub sup_energy: f64,
    pub viscous_dissipation: f64,
    pub cubic_dissipation: f64,
    pub lhs: f64,
    pub lhs_standard_error: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Right-hand side with unit factors on both data terms.
    pub rhs_unit_factors: f64,
    pub ratio_unit_factors: f64,
    pub growth: f64,
    pub forcing_young: f64,
    pub forcing_norm: f64,
    pub pass: bool,
}

pub fn estimate1_rhs(
    params: &FluidParams,
    constants: &ConstantSet,
    horizon: f64,
    initial_energy: f64,
    forcing_norm: f64,
    factor: f64,
) -> f64 {
    let be = params.beta * params.epsilon0;
    let forcing = constants.forcing_young / be.powf(1.0 / 3.0) * horizon * forcing_norm.powf(4.0 / 3.0);
    (constants.growth * horizon).exp() * factor * (initial_energy + forcing)
}

pub fn estimate1_check(
    records: &[TrajectoryRecord],
    params: &FluidParams,
    constants: &ConstantSet,
    forcing_norm: f64,
) -> Result<Estimate1Report, DiagnosticsError> {
    if records.len() < MIN_ESTIMATE_ENSEMBLE {
        return Err(DiagnosticsError::InsufficientEnsemble { found: records.len(), required: MIN_ESTIMATE_ENSEMBLE });
    }
    let mut sup = Vec::new();
    let mut visc = Vec::new();
    let mut cubic = Vec::new();
    let mut initial = Vec::new();
    for r in records {
        let t: Vec<f64> = r.samples.iter().map(|s| s.t).collect();
        let g: Vec<f64> = r.samples.iter().map(|s| s.grad_sq).collect();
        let a: Vec<f64> = r.samples.iter().map(|s| s.a4).collect();
        sup.push(r.samples.iter().map(|s| s.energy).fold(0.0, f64::max));
        visc.push(2.0 * params.nu * params.epsilon0 * trapezoid(&t, &g));
        cubic.push(params.beta * params.epsilon0 * trapezoid(&t, &a));
        initial.push(r.samples[0].energy);
    }
    let per_member: Vec<f64> = (0..records.len()).map(|i| sup[i] + visc[i] + cubic[i]).collect();
    let horizon = records[0].samples.last().map_or(0.0, |s| s.t);
    let e0 = mean(&initial);
    let lhs = mean(&per_member);
    let rhs = estimate1_rhs(params, constants, horizon, e0, forcing_norm, 2.0);
    let rhs_unit = estimate1_rhs(params, constants, horizon, e0, forcing_norm, 1.0);
    Ok(Estimate1Report {
        members: records.len(),
        horizon,
        sup_energy: mean(&sup),
        viscous_dissipation: mean(&visc),
        cubic_dissipation: mean(&cubic),
        lhs,
        lhs_standard_error: standard_error(&per_member),
        rhs,
        ratio: lhs / rhs,
        rhs_unit_factors: rhs_unit,
        ratio_unit_factors: lhs / rhs_unit,
        growth: constants.growth,
        forcing_young: constants.forcing_young,
        forcing_norm,
        pass: lhs <= rhs,
    })
}

/// Weighted twin-run distances against the envelope `2 ||dy0||^2 e^{2 C(L) t}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    /// Ensemble mean of `sup_{r <= t} g(r) ||y_a - y_b||^2`, weight from `y_a`.
    pub weighted_sup: Vec<f64>,
    pub weighted_sup_se: Vec<f64>,
    /// Same with the weight built from `y_b`.
    pub weighted_sup_swapped: Vec<f64>,
    pub envelope: Vec<f64>,
    pub initial_gap: f64,
    /// Ensemble mean of `g(T)` by trapezoid and by composite midpoint rule.
    pub final_weight_trapezoid: f64,
    pub final_weight_midpoint: f64,
    pub violations: usize,
    pub violations_swapped: usize,
    pub weight_rate: f64,
    pub growth: f64,
    pub pass: bool,
}

struct TwinSeries {
    sup: Vec<f64>,
    sup_swapped: Vec<f64>,
    g_trap: f64,
    g_mid: f64,
}

/// `exp(-rate * int f)` using the composite midpoint rule on double-width
/// cells `[t_{2m}, t_{2m+2}]`; a trailing odd interval uses the trapezoid.
fn midpoint_weight(times: &[f64], values: &[f64], rate: f64) -> f64 {
    let mut acc = 0.0;
    let mut j = 0;
    while j + 2 < values.len() {
        acc += (times[j + 2] - times[j]) * values[j + 1];
        j += 2;
    }
    if j + 1 < values.len() {
        acc += 0.5 * (times[j + 1] - times[j]) * (values[j] + values[j + 1]);
    }
    (-rate * acc).exp()
}

fn twin_member(
    integrator: &Integrator<'_>,
    config: &StepperConfig,
    y0_a: &SpectralVelocity,
    y0_b: &SpectralVelocity,
    seed: u64,
    member: u64,
    rate: f64,
) -> Result<TwinSeries, StepError> {
    let ctx = integrator.ctx;
    let mut rng = trajectory_rng(seed, member);
    let (mut a, mut b) = (y0_a.clone(), y0_b.clone());
    let steps = config.steps() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut dist = Vec::with_capacity(steps + 1);
    let mut fa = Vec::with_capacity(steps + 1);
    let mut fb = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let t = s as f64 * config.dt;
        let sa = PhysicalState::new(ctx, &a)?;
        let sb = PhysicalState::new(ctx, &b)?;
        times.push(t);
        dist.push(ctx.norm(&a.sub(&b), NormKind::L2)?.powi(2));
        fa.push(state_functionals(ctx, &sa).grad_l3_sq);
        fb.push(state_functionals(ctx, &sb).grad_l3_sq);
        if s == steps {
            break;
        }
        let inc = sample_increments(&mut rng, integrator.noise.modes(), config.dt);
        a = integrator.advance_prepared(t, &a, &sa, &inc)?.0;
        b = integrator.advance_prepared(t, &b, &sb, &inc)?.0;
    }
    let running_sup = |g: &[f64]| {
        let mut best = 0.0f64;
        g.iter()
            .zip(&dist)
            .map(|(w, d)| {
                best = best.max((-rate * w).exp() * d);
                best
            })
            .collect::<Vec<f64>>()
    };
    let ia = cumulative_trapezoid(&times, &fa);
    let ib = cumulative_trapezoid(&times, &fb);
    Ok(TwinSeries {
        sup: running_sup(&ia),
        sup_swapped: running_sup(&ib),
        g_trap: (-rate * ia.last().copied().unwrap_or(0.0)).exp(),
        g_mid: midpoint_weight(&times, &fa, rate),
    })
}

/// Twin trajectories from `y0_a` and `y0_b` sharing each member's noise path.
pub fn stability_experiment(
    integrator: &Integrator<'_>,
    config: &StepperConfig,
    y0_a: &SpectralVelocity,
    y0_b: &SpectralVelocity,
    constants: &ConstantSet,
    seed: u64,
    members: usize,
) -> Result<StabilityReport, DiagnosticsError> {
    if y0_a.n != y0_b.n || y0_a.n != integrator.ctx.n() {
        return Err(DiagnosticsError::GridMismatch { a: y0_a.n, b: y0_b.n });
    }
    if members == 0 {
        return Err(DiagnosticsError::InsufficientEnsemble { found: 0, required: 1 });
    }
    let integrator = integrator.with_config(config);
    let p = integrator.params;
    let rate = constants.sobolev.powi(2) / (p.nu * p.epsilon0);
    let series: Vec<TwinSeries> = (0..members as u64)
        .into_par_iter()
        .map(|m| twin_member(&integrator, config, y0_a, y0_b, seed, m, rate))
        .collect::<Result<_, _>>()?;

    let steps = config.steps() as usize;
    let initial_gap = integrator.ctx.norm(&y0_a.sub(y0_b), NormKind::L2).map_err(StepError::from)?.powi(2);
    let times: Vec<f64> = (0..=steps).map(|s| s as f64 * config.dt).collect();
    let mut weighted_sup = Vec::with_capacity(steps + 1);
    let mut weighted_sup_se = Vec::with_capacity(steps + 1);
    let mut weighted_sup_swapped = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        let col: Vec<f64> = series.iter().map(|s| s.sup[j]).collect();
        let swapped: Vec<f64> = series.iter().map(|s| s.sup_swapped[j]).collect();
        weighted_sup.push(mean(&col));
        weighted_sup_se.push(if members > 1 { standard_error(&col) } else { 0.0 });
        weighted_sup_swapped.push(mean(&swapped));
    }
    let envelope: Vec<f64> = times.iter().map(|t| 2.0 * initial_gap * (2.0 * constants.growth * t).exp()).collect();
    let violations = weighted_sup.iter().zip(&envelope).filter(|(d, e)| d > e).count();
    let violations_swapped = weighted_sup_swapped.iter().zip(&envelope).filter(|(d, e)| d > e).count();
    Ok(StabilityReport {
        final_weight_trapezoid: mean(&series.iter().map(|s| s.g_trap).collect::<Vec<_>>()),
        final_weight_midpoint: mean(&series.iter().map(|s| s.g_mid).collect::<Vec<_>>()),
        times,
        weighted_sup,
        weighted_sup_se,
        weighted_sup_swapped,
        envelope,
        initial_gap,
        violations,
        violations_swapped,
        weight_rate: rate,
        growth: constants.growth,
        pass: violations == 0 && violations_swapped == 0,
    })
}
