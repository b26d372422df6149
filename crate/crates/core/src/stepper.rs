//! Integrating-factor Euler-Maruyama time stepping with an exact per-step
//! energy ledger.
//!
//! One step maps `y` to `E (y + dt theta D(y) + xi)`, where `E = exp(-nu |k|^2 dt)`
//! is applied mode by mode, `D = -B(y) + P div(alpha A^2 + beta |A|^2 A) + P F`
//! is explicit and `xi = P G(y) dW` is the noise increment. The cut-off
//! `theta` multiplies the drift only.
//!
//! For every step the ledger stores each term of the discrete energy balance
//! together with the residual `Delta ||y||^2 - predicted`, where
//!
//! ```text
//! predicted = -2 dt [nu ||grad y||^2 + theta (alpha <A^2, grad y> + beta/2 int |A|^4)]
//!             + 2 dt theta <F, y> + 2 <xi, E^2 (y + dt theta D)> + ||xi||^2.
//! ```
//!
//! The residual is `O(dt^2)` pathwise; it collects the gap between the
//! integrating factor and a first-order Euler step plus quadratic drift terms.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FluidParams, ForcingField};
use crate::noise::{sample_increments, NoiseModel, NoiseShape, WienerIncrement};
use crate::operators::{explicit_drift, state_functionals, PhysicalState};
use crate::spectral::{read_snapshot, write_snapshot, NormKind, SpectralContext, SpectralError, SpectralVelocity, C64};

/// Stiffness constant of the explicit cubic term: the spectral eigenvalue
/// bound `k_max^2 <= 4 pi^2 / (3 dx^2)` of the band, used in the CFL guard.
pub const CUBIC_STIFFNESS: f64 = 4.0 * PI * PI / 3.0;

pub const DEFAULT_CFL_SAFETY: f64 = 0.5;

#[derive(Debug, Error)]
pub enum StepError {
    #[error("time step {dt} exceeds the stability limit {dt_max:.3e} at t = {t}")]
    CflViolation { t: f64, dt: f64, dt_max: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("checkpoint is malformed: {0}")]
    MalformedCheckpoint(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    /// Cut-off level `M`; `None` disables the cut-off.
    pub cutoff: Option<f64>,
}

impl StepperConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self { dt, t_end, cfl_safety: DEFAULT_CFL_SAFETY, cutoff: None }
    }

    pub fn steps(&self) -> u64 {
        if self.dt > 0.0 {
            (self.t_end / self.dt).round() as u64
        } else {
            0
        }
    }
}

/// `kappa_M(|y|_{U'})`: one below `M`, zero above `2 M`, half-cosine between.
pub fn cutoff_weight(dual_norm: f64, level: f64) -> f64 {
    if dual_norm <= level {
        1.0
    } else if dual_norm >= 2.0 * level {
        0.0
    } else {
        0.5 * (1.0 + (PI * (dual_norm - level) / level).cos())
    }
}

/// Observables of the state at one sampled time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSample {
    pub t: f64,
    /// `||y||_2^2`.
    pub energy: f64,
    /// `||grad y||_2^2`.
    pub grad_sq: f64,
    /// `int |A|^4`.
    pub a4: f64,
    /// `||y||_X^4 = ||grad y||_4^4`.
    pub x_norm_pow4: f64,
    /// `||grad y||_3^2`.
    pub grad_l3_sq: f64,
    /// `||y||_{U'}`.
    pub dual_norm: f64,
}

impl StateSample {
    pub fn v_norm_sq(&self) -> f64 {
        self.energy + self.grad_sq
    }
}

/// Per-step entry of the energy ledger; functionals refer to the pre-step state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub theta: f64,
    pub energy: f64,
    pub grad_sq: f64,
    pub a4: f64,
    pub alpha_pairing: f64,
    pub ito_trace: f64,
    pub forcing_work: f64,
    pub noise_work: f64,
    pub noise_quadratic: f64,
    pub energy_change: f64,
    pub residual: f64,
}

impl LedgerEntry {
    pub const FIELDS: [&'static str; 14] = [
        "step",
        "t",
        "dt",
        "theta",
        "energy",
        "grad_sq",
        "a4",
        "alpha_pairing",
        "ito_trace",
        "forcing_work",
        "noise_work",
        "noise_quadratic",
        "energy_change",
        "residual",
    ];

    pub fn values(&self) -> [f64; 13] {
        [
            self.t,
            self.dt,
            self.theta,
            self.energy,
            self.grad_sq,
            self.a4,
            self.alpha_pairing,
            self.ito_trace,
            self.forcing_work,
            self.noise_work,
            self.noise_quadratic,
            self.energy_change,
            self.residual,
        ]
    }

    fn from_values(step: u64, v: &[f64]) -> Self {
        Self {
            step,
            t: v[0],
            dt: v[1],
            theta: v[2],
            energy: v[3],
            grad_sq: v[4],
            a4: v[5],
            alpha_pairing: v[6],
            ito_trace: v[7],
            forcing_work: v[8],
            noise_work: v[9],
            noise_quadratic: v[10],
            energy_change: v[11],
            residual: v[12],
        }
    }
}

/// First-order energy increment predicted from the ledger terms.
pub fn predicted_change(e: &LedgerEntry, params: &FluidParams) -> f64 {
    let dissipation = params.nu * e.grad_sq + e.theta * (params.alpha * e.alpha_pairing + 0.5 * params.beta * e.a4);
    -2.0 * e.dt * dissipation + 2.0 * e.dt * e.theta * e.forcing_work + 2.0 * e.noise_work + e.noise_quadratic
}

/// Everything needed to advance one trajectory.
#[derive(Debug, Clone, Copy)]
pub struct Integrator<'a> {
    pub ctx: &'a SpectralContext,
    pub params: FluidParams,
    pub forcing: &'a ForcingField,
    pub noise: &'a NoiseModel,
    pub cfl_safety: f64,
    pub cutoff: Option<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(
        ctx: &'a SpectralContext,
        params: FluidParams,
        forcing: &'a ForcingField,
        noise: &'a NoiseModel,
    ) -> Self {
        Self { ctx, params, forcing, noise, cfl_safety: DEFAULT_CFL_SAFETY, cutoff: None }
    }

    pub fn with_config(mut self, config: &StepperConfig) -> Self {
        self.cfl_safety = config.cfl_safety;
        self.cutoff = config.cutoff;
        self
    }

    /// Largest admissible step for a state with the given sup norms.
    pub fn dt_max(&self, velocity_sup: f64, strain_sup_sq: f64) -> f64 {
        let dx = self.ctx.grid().spacing();
        let advective = if velocity_sup > 0.0 { dx / velocity_sup } else { f64::INFINITY };
        let cubic = if strain_sup_sq > 0.0 {
            dx * dx / (CUBIC_STIFFNESS * self.params.beta * strain_sup_sq)
        } else {
            f64::INFINITY
        };
        self.cfl_safety * advective.min(cubic)
    }

    fn theta(&self, dual_norm: f64) -> f64 {
        self.cutoff.map_or(1.0, |m| cutoff_weight(dual_norm, m))
    }

    pub fn sample(&self, t: f64, y: &SpectralVelocity) -> Result<StateSample, StepError> {
        let state = PhysicalState::new(self.ctx, y)?;
        Ok(self.sample_from(t, y, &state))
    }

    fn sample_from(&self, t: f64, y: &SpectralVelocity, state: &PhysicalState) -> StateSample {
        let f = state_functionals(self.ctx, state);
        let ctx = self.ctx;
        StateSample {
            t,
            energy: ctx.norm(y, NormKind::L2).expect("same grid").powi(2),
            grad_sq: ctx.norm(y, NormKind::H1).expect("same grid").powi(2),
            a4: f.a4,
            x_norm_pow4: f.grad_l4_pow4,
            grad_l3_sq: f.grad_l3_sq,
            dual_norm: ctx.norm(y, NormKind::UDual).expect("same grid"),
        }
    }

    /// `P G(y) dW`, band-limited.
    fn noise_increment(&self, y: &SpectralVelocity, state: &PhysicalState, inc: &WienerIncrement) -> SpectralVelocity {
        let w = self.noise.combined_increment(inc);
        if w == 0.0 {
            return SpectralVelocity::zeros(y.n);
        }
        match self.noise.shape() {
            NoiseShape::Linear => y.scale(w),
            NoiseShape::Bounded => {
                let u = &state.velocity.data;
                let s0: Vec<f64> = u[0].iter().map(|v| v.sin()).collect();
                let s1: Vec<f64> = u[1].iter().map(|v| v.sin()).collect();
                let (a, b) = self.ctx.pair_to_spectral(&s0, &s1);
                let mut xi = SpectralVelocity { n: y.n, data: [a, b] };
                self.ctx.dealias_velocity(&mut xi);
                self.ctx.project_in_place(&mut xi);
                xi.scale_in_place(w);
                xi
            }
        }
    }

    /// Advances `y` from time `t` by `inc.dt`. Returns the new state, the
    /// ledger entry and the observables of the pre-step state.
    pub fn advance(
        &self,
        t: f64,
        y: &SpectralVelocity,
        inc: &WienerIncrement,
    ) -> Result<(SpectralVelocity, LedgerEntry, StateSample), StepError> {
        let state = PhysicalState::new(self.ctx, y)?;
        self.advance_prepared(t, y, &state, inc)
    }

    /// As [`advance`](Self::advance), reusing the grid values of `y`.
    pub fn advance_prepared(
        &self,
        t: f64,
        y: &SpectralVelocity,
        state: &PhysicalState,
        inc: &WienerIncrement,
    ) -> Result<(SpectralVelocity, LedgerEntry, StateSample), StepError> {
        let ctx = self.ctx;
        let f = state_functionals(ctx, state);
        let sample = self.sample_from(t, y, state);
        let dt = inc.dt;
        let dt_max = self.dt_max(f.velocity_sup, f.strain_sup_sq);
        if dt > dt_max {
            return Err(StepError::CflViolation { t, dt, dt_max });
        }
        let theta = self.theta(sample.dual_norm);

        let nonlinear = explicit_drift(ctx, state, &self.params);
        let drift = nonlinear.axpy(1.0, &self.forcing.spectral).scale(theta);
        let xi = self.noise_increment(y, state, inc);
        let base = y.axpy(dt, &drift);

        let n = y.n;
        let mut next = SpectralVelocity::zeros(n);
        let mut noise_work = 0.0;
        for idx in 0..n * n {
            let e = (-self.params.nu * ctx.wave_sq(idx) * dt).exp();
            for c in 0..2 {
                let b: C64 = base.data[c][idx];
                let x: C64 = xi.data[c][idx];
                noise_work += e * e * (x * b.conj()).re;
                next.data[c][idx] = e * (b + x);
            }
        }
        noise_work *= ctx.grid().area();
        ctx.project_in_place(&mut next);

        let new_energy = ctx.norm(&next, NormKind::L2)?.powi(2);
        if !new_energy.is_finite() {
            return Err(StepError::NonFinite { t: t + dt });
        }
        let mut entry = LedgerEntry {
            step: 0,
            t,
            dt,
            theta,
            energy: sample.energy,
            grad_sq: sample.grad_sq,
            a4: f.a4,
            alpha_pairing: f.alpha_pairing,
            ito_trace: crate::noise::ito_trace(ctx.grid(), &state.velocity, self.noise),
            forcing_work: self.forcing.work(ctx, y),
            noise_work,
            noise_quadratic: ctx.norm(&xi, NormKind::L2)?.powi(2),
            energy_change: new_energy - sample.energy,
            residual: 0.0,
        };
        entry.residual = entry.energy_change - predicted_change(&entry, &self.params);
        Ok((next, entry, sample))
    }
}

/// Single step without ledger bookkeeping.
pub fn step(
    integrator: &Integrator<'_>,
    y: &SpectralVelocity,
    inc: &WienerIncrement,
) -> Result<SpectralVelocity, StepError> {
    integrator.advance(0.0, y, inc).map(|(next, _, _)| next)
}

/// Noise generator of one trajectory: ChaCha8 seeded by the run seed, stream
/// selected by the ensemble member.
pub fn trajectory_rng(seed: u64, member: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member);
    rng
}

/// A trajectory in progress: current state, generator position and the
/// record accumulated so far. Samples hold one entry per visited time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub state: SpectralVelocity,
    pub rng: ChaCha8Rng,
    pub step: u64,
    pub dt: f64,
    pub samples: Vec<StateSample>,
    pub ledger: Vec<LedgerEntry>,
    pub stopping_time: Option<f64>,
    /// Grid values of `state`, rebuilt on demand.
    prepared: Option<PhysicalState>,
}

impl PartialEq for Trajectory {
    fn eq(&self, other: &Self) -> bool {
        self.state == other.state
            && self.rng == other.rng
            && self.step == other.step
            && self.dt == other.dt
            && self.samples == other.samples
            && self.ledger == other.ledger
            && self.stopping_time == other.stopping_time
    }
}

impl Trajectory {
    pub fn start(
        integrator: &Integrator<'_>,
        y0: SpectralVelocity,
        dt: f64,
        rng: ChaCha8Rng,
    ) -> Result<Self, StepError> {
        let prepared = PhysicalState::new(integrator.ctx, &y0)?;
        let first = integrator.sample_from(0.0, &y0, &prepared);
        let mut traj = Self {
            state: y0,
            rng,
            step: 0,
            dt,
            samples: vec![first],
            ledger: Vec::new(),
            stopping_time: None,
            prepared: Some(prepared),
        };
        traj.track_stopping(integrator, &first);
        Ok(traj)
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    fn track_stopping(&mut self, integrator: &Integrator<'_>, s: &StateSample) {
        if let Some(m) = integrator.cutoff {
            if self.stopping_time.is_none() && s.energy.sqrt() >= m {
                self.stopping_time = Some(s.t);
            }
        }
    }

    /// Takes one step with the trajectory's own noise.
    pub fn advance(&mut self, integrator: &Integrator<'_>) -> Result<(), StepError> {
        let inc = sample_increments(&mut self.rng, integrator.noise.modes(), self.dt);
        self.advance_with(integrator, &inc)
    }

    /// Takes one step with an externally supplied increment.
    pub fn advance_with(&mut self, integrator: &Integrator<'_>, inc: &WienerIncrement) -> Result<(), StepError> {
        let t = self.time();
        let state = match self.prepared.take() {
            Some(p) => p,
            None => PhysicalState::new(integrator.ctx, &self.state)?,
        };
        let (next, mut entry, _) = integrator.advance_prepared(t, &self.state, &state, inc)?;
        entry.step = self.step;
        self.state = next;
        self.step += 1;
        self.ledger.push(entry);
        let prepared = PhysicalState::new(integrator.ctx, &self.state)?;
        let sample = integrator.sample_from(self.time(), &self.state, &prepared);
        self.prepared = Some(prepared);
        self.samples.push(sample);
        self.track_stopping(integrator, &sample);
        Ok(())
    }

    pub fn run_until(&mut self, integrator: &Integrator<'_>, steps: u64) -> Result<(), StepError> {
        while self.step < steps {
            self.advance(integrator)?;
        }
        Ok(())
    }

    pub fn into_record(self, t_end: f64) -> TrajectoryRecord {
        let stopping_time = self.stopping_time.unwrap_or(t_end);
        TrajectoryRecord { samples: self.samples, ledger: self.ledger, stopping_time, final_state: self.state }
    }
}

/// Finished trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub samples: Vec<StateSample>,
    pub ledger: Vec<LedgerEntry>,
    /// First time with `||y||_2 >= M`, or the final time if never reached
    /// (or if the cut-off is disabled).
    pub stopping_time: f64,
    pub final_state: SpectralVelocity,
}

pub fn simulate(
    integrator: &Integrator<'_>,
    y0: &SpectralVelocity,
    config: &StepperConfig,
    seed: u64,
    member: u64,
) -> Result<TrajectoryRecord, StepError> {
    let integrator = integrator.with_config(config);
    let mut traj = Trajectory::start(&integrator, y0.clone(), config.dt, trajectory_rng(seed, member))?;
    traj.run_until(&integrator, config.steps())?;
    Ok(traj.into_record(config.t_end))
}

/// Independent members on streams `0..members`, collected in member order.
pub fn simulate_ensemble(
    integrator: &Integrator<'_>,
    y0: &SpectralVelocity,
    config: &StepperConfig,
    seed: u64,
    members: usize,
) -> Result<Vec<TrajectoryRecord>, StepError> {
    (0..members as u64).into_par_iter().map(|m| simulate(integrator, y0, config, seed, m)).collect()
}

/// Result of running one noise path at several resolutions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementReport {
    pub resolutions: Vec<usize>,
    /// `||y_N - y_{2N}||_{L^2(0,T;H)}` for consecutive levels.
    pub distances: Vec<f64>,
}

impl RefinementReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.distances.windows(2).map(|w| w[0] / w[1]).collect()
    }
}

/// Runs the same initial condition and noise path on each grid and measures
/// the time-integrated distance between consecutive resolutions.
/// `forcings[l]` must be built on `contexts[l]`.
pub fn galerkin_refinement(
    contexts: &[SpectralContext],
    params: FluidParams,
    forcings: &[ForcingField],
    noise: &NoiseModel,
    initial: impl Fn(&SpectralContext) -> SpectralVelocity,
    config: &StepperConfig,
    seed: u64,
) -> Result<RefinementReport, StepError> {
    let integrators: Vec<Integrator<'_>> =
        contexts.iter().zip(forcings).map(|(c, f)| Integrator::new(c, params, f, noise).with_config(config)).collect();
    let mut states: Vec<SpectralVelocity> = contexts.iter().map(&initial).collect();
    let mut rng = trajectory_rng(seed, 0);
    let levels = contexts.len();
    let gap = |states: &[SpectralVelocity], l: usize| -> f64 {
        let fine = &contexts[l + 1];
        let lifted = fine.resample(&contexts[l], &states[l]);
        fine.norm(&lifted.sub(&states[l + 1]), NormKind::L2).expect("same grid").powi(2)
    };
    let mut prev: Vec<f64> = (0..levels - 1).map(|l| gap(&states, l)).collect();
    let mut integral = vec![0.0; levels - 1];
    for s in 0..config.steps() {
        let inc = sample_increments(&mut rng, noise.modes(), config.dt);
        for (l, integ) in integrators.iter().enumerate() {
            let (next, _, _) = integ.advance(s as f64 * config.dt, &states[l], &inc)?;
            states[l] = next;
        }
        for l in 0..levels - 1 {
            let cur = gap(&states, l);
            integral[l] += 0.5 * config.dt * (prev[l] + cur);
            prev[l] = cur;
        }
    }
    Ok(RefinementReport {
        resolutions: contexts.iter().map(|c| c.n()).collect(),
        distances: integral.into_iter().map(f64::sqrt).collect(),
    })
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"TGFCKPT\0";
const CHECKPOINT_VERSION: u32 = 1;

/// Serialized trajectory: enough to continue bit-identically.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub trajectory: Trajectory,
}

fn write_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_bytes<const K: usize>(r: &mut impl Read) -> std::io::Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    Ok(u64::from_le_bytes(read_bytes(r)?))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    Ok(f64::from_le_bytes(read_bytes(r)?))
}

fn sample_values(s: &StateSample) -> [f64; 7] {
    [s.t, s.energy, s.grad_sq, s.a4, s.x_norm_pow4, s.grad_l3_sq, s.dual_norm]
}

/// Layout: magic, version, hash (length-prefixed), generator seed, stream and
/// word position, step, dt, stopping time flag and value, state snapshot,
/// then the samples and ledger as raw little-endian `f64` rows.
pub fn write_checkpoint(w: &mut impl Write, ctx: &SpectralContext, cp: &Checkpoint) -> Result<(), StepError> {
    let t = &cp.trajectory;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    write_u64(w, cp.config_hash.len() as u64)?;
    w.write_all(cp.config_hash.as_bytes())?;
    w.write_all(&t.rng.get_seed())?;
    write_u64(w, t.rng.get_stream())?;
    w.write_all(&t.rng.get_word_pos().to_le_bytes())?;
    write_u64(w, t.step)?;
    write_f64(w, t.dt)?;
    write_u64(w, t.stopping_time.is_some() as u64)?;
    write_f64(w, t.stopping_time.unwrap_or(0.0))?;
    write_snapshot(w, ctx, &t.state)?;
    write_u64(w, t.samples.len() as u64)?;
    for s in &t.samples {
        for v in sample_values(s) {
            write_f64(w, v)?;
        }
    }
    write_u64(w, t.ledger.len() as u64)?;
    for e in &t.ledger {
        write_u64(w, e.step)?;
        for v in e.values() {
            write_f64(w, v)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<(crate::model::TorusGrid, Checkpoint), StepError> {
    let bad = |m: &str| StepError::MalformedCheckpoint(m.to_string());
    if &read_bytes::<8>(r)? != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    if u32::from_le_bytes(read_bytes(r)?) != CHECKPOINT_VERSION {
        return Err(bad("unknown version"));
    }
    let len = read_u64(r)? as usize;
    if len > 1024 {
        return Err(bad("hash too long"));
    }
    let mut hash = vec![0u8; len];
    r.read_exact(&mut hash)?;
    let config_hash = String::from_utf8(hash).map_err(|_| bad("hash is not utf-8"))?;
    let seed: [u8; 32] = read_bytes(r)?;
    let stream = read_u64(r)?;
    let word_pos = u128::from_le_bytes(read_bytes(r)?);
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    let step = read_u64(r)?;
    let dt = read_f64(r)?;
    let has_stop = read_u64(r)? != 0;
    let stop = read_f64(r)?;
    let (grid, state) = read_snapshot(r)?;
    let ns = read_u64(r)? as usize;
    let mut samples = Vec::with_capacity(ns.min(1 << 24));
    for _ in 0..ns {
        let mut v = [0.0; 7];
        for x in &mut v {
            *x = read_f64(r)?;
        }
        samples.push(StateSample {
            t: v[0],
            energy: v[1],
            grad_sq: v[2],
            a4: v[3],
            x_norm_pow4: v[4],
            grad_l3_sq: v[5],
            dual_norm: v[6],
        });
    }
    let nl = read_u64(r)? as usize;
    let mut ledger = Vec::with_capacity(nl.min(1 << 24));
    for _ in 0..nl {
        let s = read_u64(r)?;
        let mut v = [0.0; 13];
        for x in &mut v {
            *x = read_f64(r)?;
        }
        ledger.push(LedgerEntry::from_values(s, &v));
    }
    let trajectory =
        Trajectory { state, rng, step, dt, samples, ledger, stopping_time: has_stop.then_some(stop), prepared: None };
    Ok((grid, Checkpoint { config_hash, trajectory }))
}
