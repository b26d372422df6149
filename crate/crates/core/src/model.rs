//! Physical parameters, the computational domain, body forcing and the
//! analytic constants that enter the a priori bounds.
//!
//! Constants with no closed form on the discrete band (Korn, Sobolev) are
//! estimated by a randomized maximum over band-limited solenoidal fields and
//! inflated by a safety factor, so they bound the discrete ratios from above
//! on the sampled classes.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise::NoiseModel;
use crate::operators;
use crate::spectral::{FieldSpectrum, NormKind, PhysicalVelocity, SpectralContext, SpectralVelocity};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("viscosity must be positive, got {0}")]
    NonPositiveViscosity(f64),
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("|alpha| = {alpha} must stay below sqrt(2 nu beta) = {limit}")]
    MonotonicityMarginViolated { alpha: f64, limit: f64 },
    #[error("resolution must be even and at least 8, got {0}")]
    InvalidResolution(usize),
    #[error("box length must be positive and finite, got {0}")]
    InvalidBoxLength(f64),
    #[error("dealias fraction must lie in (0, 1], got {0}")]
    InvalidDealiasFraction(f64),
    #[error("oracle for {name} did not converge: relative change {change:.3e} over the last {window} samples")]
    OracleNotConverged { name: &'static str, change: f64, window: usize },
    #[error("forcing mode {k:?} is zero or outside the retained band |k_i| <= {kmax}")]
    ForcingOutOfBand { k: [i64; 2], kmax: i64 },
}

/// Validated fluid parameters together with the monotonicity margin
/// `epsilon0 = 1 - |alpha| / sqrt(2 nu beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon0: f64,
}

pub fn validate_params(nu: f64, alpha: f64, beta: f64) -> Result<FluidParams, ModelError> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(ModelError::NonPositiveViscosity(nu));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(ModelError::NonPositiveBeta(beta));
    }
    let limit = (2.0 * nu * beta).sqrt();
    if !(alpha.abs() < limit) {
        return Err(ModelError::MonotonicityMarginViolated { alpha, limit });
    }
    Ok(FluidParams { nu, alpha, beta, epsilon0: 1.0 - alpha.abs() / limit })
}

/// The periodic square `[0, L)^2` sampled on an `N x N` grid.
///
/// The retained Fourier band is the square `|k_1|, |k_2| <= kmax`, where
/// `kmax` is the largest integer strictly below `dealias_fraction * N / 2`.
/// With the default fraction of 2/3 this gives `3 kmax < N`, so quadratic
/// products of band-limited fields are resolved without aliasing into the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    box_length: f64,
    resolution: usize,
    dealias_fraction: f64,
}

pub const DEFAULT_DEALIAS_FRACTION: f64 = 2.0 / 3.0;

impl TorusGrid {
    pub fn new(box_length: f64, resolution: usize, dealias_fraction: f64) -> Result<Self, ModelError> {
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(ModelError::InvalidBoxLength(box_length));
        }
        if resolution < 8 || resolution % 2 != 0 {
            return Err(ModelError::InvalidResolution(resolution));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(ModelError::InvalidDealiasFraction(dealias_fraction));
        }
        Ok(Self { box_length, resolution, dealias_fraction })
    }

    /// `2 pi` box at the default dealiasing fraction.
    pub fn standard(resolution: usize) -> Result<Self, ModelError> {
        Self::new(2.0 * PI, resolution, DEFAULT_DEALIAS_FRACTION)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.resolution as f64
    }

    /// `|D| = L^2`.
    pub fn area(&self) -> f64 {
        self.box_length * self.box_length
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Factor converting integer wavenumbers to physical ones.
    pub fn wave_scale(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    pub fn kmax(&self) -> i64 {
        let edge = self.dealias_fraction * self.resolution as f64 / 2.0;
        (edge - 1e-9).ceil() as i64 - 1
    }

    /// Signed integer wavenumber of FFT index `i`; the Nyquist index maps to `+N/2`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.resolution;
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    pub fn in_band(&self, k1: i64, k2: i64) -> bool {
        let kmax = self.kmax();
        k1.abs() <= kmax && k2.abs() <= kmax
    }
}

/// Analytic constants entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantSet {
    /// `||u||_2^2 <= C_P ||grad u||_2^2` on mean-zero fields.
    pub poincare: f64,
    /// `||grad u||_4 <= C_K ||A(u)||_4` on solenoidal fields.
    pub korn: f64,
    /// `||u||_6 <= C_1 ||grad u||_2`.
    pub sobolev: f64,
    /// Constant of the Young step absorbing the forcing work.
    pub forcing_young: f64,
    /// Burkholder-Davis-Gundy constant.
    pub bdg: f64,
    /// Gronwall rate `C(L) = 2 L (1 + 2 C_B^2)`.
    pub growth: f64,
    /// Total Lipschitz constant `L` of the noise.
    pub noise_lipschitz: f64,
}

/// Controls the randomized constant oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    pub samples: usize,
    pub safety_factor: f64,
    pub seed: u64,
    pub bdg: f64,
    pub window: usize,
    pub tolerance: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { samples: 5000, safety_factor: 1.2, seed: 0x5eed_c0de, bdg: 2.0, window: 100, tolerance: 0.01 }
    }
}

/// Running maximum of sampled ratios with a convergence check on the tail.
#[derive(Debug, Clone)]
struct RunningMax {
    history: Vec<f64>,
    current: f64,
}

impl RunningMax {
    fn new(capacity: usize) -> Self {
        Self { history: Vec::with_capacity(capacity), current: 0.0 }
    }

    fn push(&mut self, value: f64) {
        if value.is_finite() && value > self.current {
            self.current = value;
        }
        self.history.push(self.current);
    }

    fn finish(&self, name: &'static str, window: usize, tolerance: f64) -> Result<f64, ModelError> {
        let n = self.history.len();
        if n > window {
            let before = self.history[n - 1 - window];
            let change = (self.current - before) / self.current;
            if !(change <= tolerance) {
                return Err(ModelError::OracleNotConverged { name, change, window });
            }
        }
        Ok(self.current)
    }
}

/// Draws a random spectral shape for the oracles: slope in `[0, 3]`, a
/// cutoff anywhere in the band and a random fraction of active modes.
pub fn random_oracle_spectrum(rng: &mut impl rand::Rng, kmax: i64) -> FieldSpectrum {
    FieldSpectrum {
        slope: rng.random_range(0.0..3.0),
        cutoff: rng.random_range(1..=kmax) as f64,
        keep_fraction: rng.random_range(0.1..=1.0),
        amplitude: 1.0,
    }
}

/// Discrete Korn ratio `||grad u||_4 / ||A(u)||_4`.
pub fn korn_ratio(ctx: &SpectralContext, u: &SpectralVelocity) -> f64 {
    let grad = ctx.gradient(u).expect("field built on this grid");
    let strain = operators::strain_from_gradient(&grad);
    let cell = ctx.grid().cell_area();
    let num = grad.frobenius_power_sum(4) * cell;
    let den = strain.frobenius_power_sum(4) * cell;
    (num / den).powf(0.25)
}

/// Discrete Sobolev ratio `||u||_6 / ||grad u||_2`.
pub fn sobolev_ratio(ctx: &SpectralContext, u: &SpectralVelocity) -> f64 {
    let phys = ctx.to_physical(u).expect("field built on this grid");
    let l6 = phys.lp_norm(ctx.grid().cell_area(), 6.0);
    l6 / ctx.norm(u, NormKind::H1).expect("supported norm")
}

/// `C_F` for the Young split `<F, y> <= delta ||grad y||_4^4 + C_F delta^{-1/3} ||F||^{4/3}`
/// applied with `||grad y||_4 <= C_K ||A||_4` and `delta = beta eps0 / 2`.
pub fn forcing_young_constant(korn: f64) -> f64 {
    1.5 * korn.powf(4.0 / 3.0)
}

/// Builds the constant set: closed forms where available, randomized
/// maxima (with safety factor) otherwise.
pub fn derived_constants(
    ctx: &SpectralContext,
    noise: &NoiseModel,
    oracle: &OracleSettings,
) -> Result<ConstantSet, ModelError> {
    let grid = ctx.grid();
    let poincare = (grid.box_length() / (2.0 * PI)).powi(2);

    let mut rng = ChaCha8Rng::seed_from_u64(oracle.seed);
    let mut korn = RunningMax::new(oracle.samples);
    let mut sobolev = RunningMax::new(oracle.samples);
    for _ in 0..oracle.samples {
        let spectrum = random_oracle_spectrum(&mut rng, grid.kmax());
        let u = ctx.random_field(&mut rng, &spectrum);
        korn.push(korn_ratio(ctx, &u));
        sobolev.push(sobolev_ratio(ctx, &u));
    }
    let korn = oracle.safety_factor * korn.finish("korn", oracle.window, oracle.tolerance)?;
    let sobolev = oracle.safety_factor * sobolev.finish("sobolev", oracle.window, oracle.tolerance)?;

    let l = noise.lipschitz_total();
    Ok(ConstantSet {
        poincare,
        korn,
        sobolev,
        forcing_young: forcing_young_constant(korn),
        bdg: oracle.bdg,
        growth: 2.0 * l * (1.0 + 2.0 * oracle.bdg * oracle.bdg),
        noise_lipschitz: l,
    })
}

/// One solenoidal forcing mode `a * k_perp / |k| * sin(2 pi k.x / L)` with
/// `k_perp = (k_2, -k_1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingMode {
    pub k: [i64; 2],
    pub amplitude: f64,
}

/// Time-independent body force `F = P f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingField {
    pub modes: Vec<ForcingMode>,
    pub physical: PhysicalVelocity,
    pub spectral: SpectralVelocity,
    /// Rigorous surrogate for `||F||_{X'}`: `|D|^{1/4} ||f||_{H^{-1}}`.
    pub dual_norm: f64,
}

impl ForcingField {
    pub fn zero(ctx: &SpectralContext) -> Self {
        Self::from_modes(ctx, &[]).expect("empty mode list is valid")
    }

    pub fn from_modes(ctx: &SpectralContext, modes: &[ForcingMode]) -> Result<Self, ModelError> {
        let grid = ctx.grid();
        let n = grid.resolution();
        let h = grid.spacing();
        let scale = grid.wave_scale();
        let mut physical = PhysicalVelocity::zeros(n);
        for mode in modes {
            let [k1, k2] = mode.k;
            if (k1 == 0 && k2 == 0) || !grid.in_band(k1, k2) {
                return Err(ModelError::ForcingOutOfBand { k: mode.k, kmax: grid.kmax() });
            }
            let norm = ((k1 * k1 + k2 * k2) as f64).sqrt();
            let (p1, p2) = (k2 as f64 / norm, -(k1 as f64) / norm);
            for i in 0..n {
                for j in 0..n {
                    let phase = scale * (k1 as f64 * i as f64 * h + k2 as f64 * j as f64 * h);
                    let s = mode.amplitude * phase.sin();
                    physical.data[0][i * n + j] += p1 * s;
                    physical.data[1][i * n + j] += p2 * s;
                }
            }
        }
        let mut spectral = ctx.to_spectral(&physical).expect("same grid");
        ctx.dealias_velocity(&mut spectral);
        ctx.project_in_place(&mut spectral);
        let physical = ctx.to_physical(&spectral).expect("same grid");
        let dual_norm = grid.area().powf(0.25) * ctx.norm(&spectral, NormKind::HMinus1).expect("supported norm");
        Ok(Self { modes: modes.to_vec(), physical, spectral, dual_norm })
    }

    /// `<F, y>` in `L^2`.
    pub fn work(&self, ctx: &SpectralContext, y: &SpectralVelocity) -> f64 {
        ctx.inner(&self.spectral, y)
    }
}

/// Closed-form value `K` of the constant in the stationary bounds.
pub fn stationary_constant(params: &FluidParams, constants: &ConstantSet, grid: &TorusGrid, forcing_norm: f64) -> f64 {
    let be = params.beta * params.epsilon0;
    let lc = constants.noise_lipschitz * constants.poincare;
    lc * lc * constants.korn.powi(4) * grid.area() / (16.0 * be)
        + constants.forcing_young / be.powf(1.0 / 3.0) * forcing_norm.powf(4.0 / 3.0)
}

/// Largest coefficient magnitude.
#[cfg(test)]
fn max_abs(values: &[crate::spectral::C64]) -> f64 {
    values.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_of_reference_parameters() {
        let p = validate_params(1.0, 0.5, 1.0).unwrap();
        assert!((p.epsilon0 - (1.0 - 0.125f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn alpha_at_the_limit_is_rejected() {
        let err = validate_params(1.0, 2f64.sqrt(), 1.0).unwrap_err();
        assert!(matches!(err, ModelError::MonotonicityMarginViolated { .. }));
        assert!(matches!(validate_params(0.0, 0.0, 1.0), Err(ModelError::NonPositiveViscosity(_))));
        assert!(matches!(validate_params(1.0, 0.0, -1.0), Err(ModelError::NonPositiveBeta(_))));
    }

    #[test]
    fn band_edges() {
        for (n, k) in [(8, 2), (16, 5), (32, 10), (48, 15), (64, 21)] {
            let g = TorusGrid::standard(n).unwrap();
            assert_eq!(g.kmax(), k, "N = {n}");
            assert!(3 * g.kmax() < n as i64);
        }
        assert!(TorusGrid::standard(12).is_ok());
        assert!(TorusGrid::standard(6).is_err());
        assert!(TorusGrid::standard(17).is_err());
    }

    #[test]
    fn signed_wavenumbers() {
        let g = TorusGrid::standard(8).unwrap();
        let k: Vec<i64> = (0..8).map(|i| g.wavenumber(i)).collect();
        assert_eq!(k, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }

    #[test]
    fn running_max_flags_late_jumps() {
        let mut m = RunningMax::new(10);
        for i in 0..200 {
            m.push(if i == 190 { 2.0 } else { 1.0 });
        }
        assert!(m.finish("x", 100, 0.01).is_err());
        let mut m = RunningMax::new(10);
        for _ in 0..200 {
            m.push(1.0);
        }
        assert_eq!(m.finish("x", 100, 0.01).unwrap(), 1.0);
    }

    #[test]
    fn shear_forcing_has_expected_coefficients() {
        let ctx = SpectralContext::new(TorusGrid::standard(16).unwrap());
        let f = ForcingField::from_modes(&ctx, &[ForcingMode { k: [0, 1], amplitude: 2.0 }]).unwrap();
        // f = (2 sin x2, 0): coefficients -i and +i at k = (0, +-1).
        assert!((max_abs(&f.spectral.data[0]) - 1.0).abs() < 1e-12);
        assert!(max_abs(&f.spectral.data[1]) < 1e-12);
        // ||f||_{H^-1}^2 = |D| * 2 * 1 / 1 = 8 pi^2, times |D|^{1/4}.
        let expected = (2.0 * PI).sqrt() * (8.0 * PI * PI).sqrt();
        assert!((f.dual_norm - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn out_of_band_forcing_is_rejected() {
        let ctx = SpectralContext::new(TorusGrid::standard(16).unwrap());
        assert!(ForcingField::from_modes(&ctx, &[ForcingMode { k: [6, 0], amplitude: 1.0 }]).is_err());
        assert!(ForcingField::from_modes(&ctx, &[ForcingMode { k: [0, 0], amplitude: 1.0 }]).is_err());
    }
}
