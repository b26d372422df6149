//! Run configuration: TOML on disk, validated into a ready-to-run [`Setup`].
//!
//! Units: lengths in box units (the default box is `[0, 2 pi)^2`), time in
//! the same units as `1 / nu`, wavenumbers as integers.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tgf_core::model::{
    derived_constants, validate_params, ConstantSet, FluidParams, ForcingField, ForcingMode, ModelError,
    OracleSettings, TorusGrid, DEFAULT_DEALIAS_FRACTION,
};
use tgf_core::noise::{build_noise_model, AmplitudeSpec, NoiseModel, NoiseShape};
use tgf_core::spectral::{FieldSpectrum, NormKind, SpectralContext, SpectralVelocity};
use tgf_core::stepper::{StepperConfig, DEFAULT_CFL_SAFETY};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluidSection {
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for FluidSection {
    fn default() -> Self {
        Self { nu: 1.0, alpha: 0.5, beta: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub box_length: f64,
    pub resolution: usize,
    pub dealias_fraction: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { box_length: 2.0 * std::f64::consts::PI, resolution: 32, dealias_fraction: DEFAULT_DEALIAS_FRACTION }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub shape: NoiseShape,
    /// Number of modes for geometric amplitudes.
    pub modes: usize,
    /// Target `L = sum c_k^2` for geometric amplitudes.
    pub lipschitz: f64,
    /// Explicit amplitudes; overrides `modes` and `lipschitz`.
    pub amplitudes: Option<Vec<f64>>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { shape: NoiseShape::Linear, modes: 4, lipschitz: 0.5, amplitudes: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingSection {
    pub modes: Vec<ForcingMode>,
}

impl Default for ForcingSection {
    fn default() -> Self {
        Self { modes: vec![ForcingMode { k: [0, 1], amplitude: 0.1 }] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Zero,
    TaylorGreen,
    Shear,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub kind: InitialKind,
    /// Velocity amplitude; for `random` the `L^2` norm of the field.
    pub amplitude: f64,
    /// Seed of the `random` initial field.
    pub seed: u64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { kind: InitialKind::TaylorGreen, amplitude: 0.05, seed: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperSection {
    pub dt: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub cutoff: Option<f64>,
}

impl Default for StepperSection {
    fn default() -> Self {
        Self { dt: 1e-3, t_end: 1.0, cfl_safety: DEFAULT_CFL_SAFETY, cutoff: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSection {
    pub samples: usize,
    pub safety_factor: f64,
    pub seed: u64,
    pub bdg: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        let o = OracleSettings::default();
        Self { samples: o.samples, safety_factor: o.safety_factor, seed: o.seed, bdg: o.bdg }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub ensemble: usize,
    /// Burn-in time; defaults to a tenth of the horizon (at least 100 steps).
    pub burn_in: Option<f64>,
    pub batches: usize,
    pub radii: Vec<f64>,
    pub truncations: Vec<u32>,
    /// `||y0_a - y0_b||_2` of the stability twins.
    pub perturbation: f64,
    /// Number of property-suite cases in `verify`.
    pub verify_cases: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            ensemble: 1,
            burn_in: None,
            batches: 20,
            radii: vec![0.5, 1.0, 2.0, 4.0],
            truncations: vec![1, 2, 4, 8],
            perturbation: 1e-4,
            verify_cases: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Write a state snapshot every this many steps (0: never).
    pub snapshot_every: u64,
    /// Write a checkpoint every this many steps (0: never).
    pub checkpoint_every: u64,
    /// Keep every this many samples in observable series files.
    pub series_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { snapshot_every: 0, checkpoint_every: 0, series_every: 1 }
    }
}

/// Complete description of a run. `Default` is the reference configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub fluid: FluidSection,
    pub grid: GridSection,
    pub noise: NoiseSection,
    pub forcing: ForcingSection,
    pub initial: InitialSection,
    pub stepper: StepperSection,
    pub constants: ConstantsSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            fluid: FluidSection::default(),
            grid: GridSection::default(),
            noise: NoiseSection::default(),
            forcing: ForcingSection::default(),
            initial: InitialSection::default(),
            stepper: StepperSection::default(),
            constants: ConstantsSection::default(),
            experiment: ExperimentSection::default(),
            output: OutputSection::default(),
        }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config { path: path.to_string(), message: message.into() }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let path = e
                .span()
                .map(|s| {
                    let line = text[..s.start].lines().count().max(1);
                    format!("line {line}")
                })
                .unwrap_or_else(|| "<document>".to_string());
            CliError::Config { path, message }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(&path.display().to_string(), e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn stepper_config(&self) -> StepperConfig {
        StepperConfig {
            dt: self.stepper.dt,
            t_end: self.stepper.t_end,
            cfl_safety: self.stepper.cfl_safety,
            cutoff: self.stepper.cutoff,
        }
    }

    pub fn oracle(&self) -> OracleSettings {
        OracleSettings {
            samples: self.constants.samples,
            safety_factor: self.constants.safety_factor,
            seed: self.constants.seed,
            bdg: self.constants.bdg,
            ..OracleSettings::default()
        }
    }

    pub fn burn_in(&self) -> f64 {
        self.experiment
            .burn_in
            .unwrap_or_else(|| tgf_core::measure::default_burn_in(self.stepper.t_end, self.stepper.dt))
    }

    pub fn params(&self) -> Result<FluidParams, CliError> {
        validate_params(self.fluid.nu, self.fluid.alpha, self.fluid.beta).map_err(|e| match e {
            ModelError::NonPositiveViscosity(_) => invalid("fluid.nu", e.to_string()),
            ModelError::NonPositiveBeta(_) => invalid("fluid.beta", e.to_string()),
            _ => invalid("fluid.alpha", format!("{e} (monotonicity condition alpha^2 < 2 nu beta)")),
        })
    }

    fn validate_stepper(&self) -> Result<(), CliError> {
        let s = &self.stepper;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(invalid("stepper.dt", "must be positive"));
        }
        if !(s.t_end >= 0.0 && s.t_end.is_finite()) {
            return Err(invalid("stepper.t_end", "must be nonnegative"));
        }
        let steps = s.t_end / s.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(invalid("stepper.t_end", "must be an integer multiple of stepper.dt"));
        }
        if !(s.cfl_safety > 0.0 && s.cfl_safety <= 1.0) {
            return Err(invalid("stepper.cfl_safety", "must lie in (0, 1]"));
        }
        if let Some(m) = s.cutoff {
            if !(m > 0.0) {
                return Err(invalid("stepper.cutoff", "must be positive"));
            }
        }
        if self.output.series_every == 0 {
            return Err(invalid("output.series_every", "must be at least 1"));
        }
        if self.experiment.batches < 2 {
            return Err(invalid("experiment.batches", "must be at least 2"));
        }
        if self.constants.samples == 0 {
            return Err(invalid("constants.samples", "must be positive"));
        }
        Ok(())
    }

    /// Validates everything and builds the numerical objects.
    pub fn setup(&self) -> Result<Setup, CliError> {
        let params = self.params()?;
        self.validate_stepper()?;
        let g = &self.grid;
        let grid = TorusGrid::new(g.box_length, g.resolution, g.dealias_fraction).map_err(|e| {
            let field = match e {
                ModelError::InvalidBoxLength(_) => "grid.box_length",
                ModelError::InvalidResolution(_) => "grid.resolution",
                _ => "grid.dealias_fraction",
            };
            invalid(field, e.to_string())
        })?;
        let ctx = SpectralContext::new(grid);
        let spec = match &self.noise.amplitudes {
            Some(c) => AmplitudeSpec::Explicit(c.clone()),
            None => AmplitudeSpec::Geometric { modes: self.noise.modes, lipschitz: self.noise.lipschitz },
        };
        let noise = build_noise_model(&spec, self.noise.shape).map_err(|e| invalid("noise", e.to_string()))?;
        let forcing =
            ForcingField::from_modes(&ctx, &self.forcing.modes).map_err(|e| invalid("forcing.modes", e.to_string()))?;
        let y0 = self.initial_state(&ctx)?;
        let constants =
            derived_constants(&ctx, &noise, &self.oracle()).map_err(|e| invalid("constants", e.to_string()))?;
        Ok(Setup { config: self.clone(), hash: self.hash(), params, ctx, noise, forcing, y0, constants })
    }

    pub fn initial_state(&self, ctx: &SpectralContext) -> Result<SpectralVelocity, CliError> {
        let a = self.initial.amplitude;
        if !a.is_finite() {
            return Err(invalid("initial.amplitude", "must be finite"));
        }
        Ok(match self.initial.kind {
            InitialKind::Zero => SpectralVelocity::zeros(ctx.n()),
            InitialKind::TaylorGreen => ctx.taylor_green(a),
            InitialKind::Shear => ctx.shear(a, 1),
            InitialKind::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.initial.seed);
                normalized_random(ctx, &mut rng, a)
            }
        })
    }
}

/// Random solenoidal field rescaled to the given `L^2` norm.
pub fn normalized_random(ctx: &SpectralContext, rng: &mut ChaCha8Rng, norm: f64) -> SpectralVelocity {
    let y = ctx.random_field(rng, &FieldSpectrum::default());
    let current = ctx.norm(&y, NormKind::L2).expect("same grid");
    y.scale(norm / current)
}

/// Validated configuration plus the objects built from it.
#[derive(Debug)]
pub struct Setup {
    pub config: RunConfig,
    pub hash: String,
    pub params: FluidParams,
    pub ctx: SpectralContext,
    pub noise: NoiseModel,
    pub forcing: ForcingField,
    pub y0: SpectralVelocity,
    pub constants: ConstantSet,
}

impl Setup {
    pub fn integrator(&self) -> tgf_core::stepper::Integrator<'_> {
        tgf_core::stepper::Integrator::new(&self.ctx, self.params, &self.forcing, &self.noise)
            .with_config(&self.config.stepper_config())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c = RunConfig::from_toml("seed = 9\n[fluid]\nnu = 2.0\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.fluid.nu, 2.0);
        assert_eq!(c.fluid.beta, 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("[fluid]\nviscosity = 1.0\n"), Err(CliError::Config { .. })));
    }

    #[test]
    fn monotonicity_violation_names_alpha() {
        let mut c = RunConfig::default();
        c.fluid.alpha = 2.0;
        match c.params() {
            Err(CliError::Config { path, message }) => {
                assert_eq!(path, "fluid.alpha");
                assert!(message.contains("alpha^2 < 2 nu beta"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hash_changes_with_seed() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 2, ..RunConfig::default() };
        assert_ne!(a.hash(), b.hash());
    }
}
