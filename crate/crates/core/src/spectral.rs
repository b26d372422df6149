//! Fourier representation of velocity fields on the periodic square.
//!
//! Coefficients follow the Fourier-series convention
//! `u(x) = sum_k u_k exp(i 2 pi k.x / L)`, so `||u||_2^2 = |D| sum_k |u_k|^2`.
//! Arrays are `N x N`, row-major, with the first index along `x_1`.
//! The Nyquist row and column are never part of the retained band and are
//! dropped from spectral derivatives so that differentiation stays skew-adjoint.

use std::io::{self, Read, Write};
use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::model::TorusGrid;

pub type C64 = Complex<f64>;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("field has resolution {found}, grid has {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("unsupported Lebesgue exponent {0}; use 3, 4, 6 or 4/3")]
    UnsupportedExponent(f64),
    #[error("snapshot is malformed: {0}")]
    MalformedSnapshot(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Spectral coefficients of a velocity field, one array per component.
///
/// States produced by projection or by the time stepper are mean-zero,
/// Hermitian, band-limited and discretely divergence-free; raw transforms of
/// arbitrary grid data need not be.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVelocity {
    pub n: usize,
    pub data: [Vec<C64>; 2],
}

impl SpectralVelocity {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: [vec![ZERO; n * n], vec![ZERO; n * n]] }
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale_in_place(factor);
        out
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for comp in &mut self.data {
            comp.iter_mut().for_each(|c| *c *= factor);
        }
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += factor * y);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }
}

/// Grid values of a velocity field.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalVelocity {
    pub n: usize,
    pub data: [Vec<f64>; 2],
}

impl PhysicalVelocity {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: [vec![0.0; n * n], vec![0.0; n * n]] }
    }

    /// Largest pointwise Euclidean length.
    pub fn sup_norm(&self) -> f64 {
        self.data[0].iter().zip(&self.data[1]).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
    }

    /// `sum_x h^2 |u(x)|^p` raised to `1/p`.
    pub fn lp_norm(&self, cell_area: f64, p: f64) -> f64 {
        let sum: f64 = self.data[0].iter().zip(&self.data[1]).map(|(a, b)| (a * a + b * b).powf(p / 2.0)).sum();
        (cell_area * sum).powf(1.0 / p)
    }
}

/// A 2x2 tensor field on the grid. Component `(i, j)` is stored at `2 i + j`;
/// for a gradient it holds `d_j u_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub n: usize,
    pub data: [Vec<f64>; 4],
}

impl TensorField {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: std::array::from_fn(|_| vec![0.0; n * n]) }
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.data[2 * i + j]
    }

    pub fn frobenius_sq_at(&self, x: usize) -> f64 {
        self.data.iter().map(|c| c[x] * c[x]).sum()
    }

    /// `sum_x |T(x)|_F^p` (no quadrature weight).
    pub fn frobenius_power_sum(&self, p: i32) -> f64 {
        (0..self.n * self.n).map(|x| self.frobenius_sq_at(x).sqrt().powi(p)).sum()
    }

    pub fn frobenius_sup(&self) -> f64 {
        (0..self.n * self.n).map(|x| self.frobenius_sq_at(x)).fold(0.0, f64::max).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    /// `||grad u||_2`.
    H1,
    /// `(||u||_2^2 + ||grad u||_2^2)^{1/2}`.
    V,
    /// Grid `L^p` norm; `p` in `{3, 4, 6, 4/3}`.
    Lp(f64),
    /// `||grad u||_4` with the pointwise Frobenius norm.
    X,
    /// Weighted norm with weights `1 / (1 + |k|^2 + |k|^4 + |k|^6)`.
    UDual,
    /// `(|D| sum_k |u_k|^2 / |k|^2)^{1/2}`.
    HMinus1,
}

fn supported_exponent(p: f64) -> bool {
    [3.0, 4.0, 6.0, 4.0 / 3.0].iter().any(|q| (p - q).abs() < 1e-12)
}

/// Random spectral shape for band-limited test fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpectrum {
    /// Coefficient magnitudes decay like `|k|^{-slope}`.
    pub slope: f64,
    /// Only modes with `|k| <= cutoff` (integer wavenumbers) are drawn.
    pub cutoff: f64,
    /// Probability that an admissible mode is active.
    pub keep_fraction: f64,
    pub amplitude: f64,
}

impl Default for FieldSpectrum {
    fn default() -> Self {
        Self { slope: 1.0, cutoff: f64::INFINITY, keep_fraction: 1.0, amplitude: 1.0 }
    }
}

struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    fn transpose(&self, data: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            for j in i + 1..n {
                data.swap(i * n + j, j * n + i);
            }
        }
    }

    fn run(&self, data: &mut [C64], fft: &dyn Fft<f64>) {
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        self.transpose(data);
        fft.process_with_scratch(data, &mut scratch);
        self.transpose(data);
    }

    /// Unnormalized forward transform; the caller divides by `N^2`.
    fn forward(&self, data: &mut [C64]) {
        self.run(data, self.forward.as_ref());
    }

    fn inverse(&self, data: &mut [C64]) {
        self.run(data, self.inverse.as_ref());
    }
}

/// Transform plans and wavenumber tables for one grid. Cheap to share
/// between threads.
pub struct SpectralContext {
    grid: TorusGrid,
    fft: Fft2,
    /// Physical wavenumber per index with the Nyquist entry zeroed (derivatives).
    deriv: Vec<f64>,
    /// Physical wavenumber per index, Nyquist kept (norm weights).
    wave: Vec<f64>,
    band: Vec<bool>,
}

impl std::fmt::Debug for SpectralContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralContext").field("grid", &self.grid).finish()
    }
}

impl SpectralContext {
    pub fn new(grid: TorusGrid) -> Self {
        let n = grid.resolution();
        let scale = grid.wave_scale();
        let wave: Vec<f64> = (0..n).map(|i| scale * grid.wavenumber(i) as f64).collect();
        let deriv = (0..n).map(|i| if i == n / 2 { 0.0 } else { wave[i] }).collect();
        let mut band = vec![false; n * n];
        for p in 0..n {
            for q in 0..n {
                band[p * n + q] = grid.in_band(grid.wavenumber(p), grid.wavenumber(q)) && (p, q) != (0, 0);
            }
        }
        Self { grid, fft: Fft2::new(n), deriv, wave, band }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.resolution()
    }

    /// Whether flat index `idx` is a retained, nonzero mode.
    pub fn in_band(&self, idx: usize) -> bool {
        self.band[idx]
    }

    /// Signed integer wavevector of flat index `idx`.
    pub fn int_wave(&self, idx: usize) -> (i64, i64) {
        let n = self.n();
        (self.grid.wavenumber(idx / n), self.grid.wavenumber(idx % n))
    }

    /// Physical wavevector of flat index `idx`.
    pub fn wave(&self, idx: usize) -> (f64, f64) {
        let n = self.n();
        (self.wave[idx / n], self.wave[idx % n])
    }

    pub fn wave_sq(&self, idx: usize) -> f64 {
        let (a, b) = self.wave(idx);
        a * a + b * b
    }

    /// Multiplier of `d/dx_axis` at flat index `idx`.
    pub fn derivative(&self, axis: usize, idx: usize) -> C64 {
        let n = self.n();
        let k = if axis == 0 { self.deriv[idx / n] } else { self.deriv[idx % n] };
        C64::new(0.0, k)
    }

    fn index_of_negative(&self, idx: usize) -> usize {
        let n = self.n();
        let (p, q) = (idx / n, idx % n);
        ((n - p) % n) * n + (n - q) % n
    }

    fn check(&self, n: usize) -> Result<(), SpectralError> {
        if n == self.n() {
            Ok(())
        } else {
            Err(SpectralError::SizeMismatch { expected: self.n(), found: n })
        }
    }

    pub fn scalar_to_spectral(&self, values: &[f64]) -> Vec<C64> {
        let norm = 1.0 / (self.n() * self.n()) as f64;
        let mut buf: Vec<C64> = values.iter().map(|&v| C64::new(v * norm, 0.0)).collect();
        self.fft.forward(&mut buf);
        buf
    }

    pub fn scalar_to_physical(&self, coeffs: &[C64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.fft.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Transforms two real fields with one complex FFT.
    pub fn pair_to_spectral(&self, a: &[f64], b: &[f64]) -> (Vec<C64>, Vec<C64>) {
        let norm = 1.0 / (self.n() * self.n()) as f64;
        let mut buf: Vec<C64> = a.iter().zip(b).map(|(&x, &y)| C64::new(x * norm, y * norm)).collect();
        self.fft.forward(&mut buf);
        let mut ha = vec![ZERO; buf.len()];
        let mut hb = vec![ZERO; buf.len()];
        for idx in 0..buf.len() {
            let z = buf[idx];
            let zm = buf[self.index_of_negative(idx)].conj();
            ha[idx] = 0.5 * (z + zm);
            hb[idx] = C64::new(0.0, -0.5) * (z - zm);
        }
        (ha, hb)
    }

    /// Inverse of [`pair_to_spectral`] for Hermitian inputs.
    pub fn pair_to_physical(&self, a: &[C64], b: &[C64]) -> (Vec<f64>, Vec<f64>) {
        let i = C64::new(0.0, 1.0);
        let mut buf: Vec<C64> = a.iter().zip(b).map(|(&x, &y)| x + i * y).collect();
        self.fft.inverse(&mut buf);
        buf.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    pub fn to_physical(&self, y: &SpectralVelocity) -> Result<PhysicalVelocity, SpectralError> {
        self.check(y.n)?;
        let (a, b) = self.pair_to_physical(&y.data[0], &y.data[1]);
        Ok(PhysicalVelocity { n: y.n, data: [a, b] })
    }

    pub fn to_spectral(&self, y: &PhysicalVelocity) -> Result<SpectralVelocity, SpectralError> {
        self.check(y.n)?;
        let (a, b) = self.pair_to_spectral(&y.data[0], &y.data[1]);
        Ok(SpectralVelocity { n: y.n, data: [a, b] })
    }

    /// Zeroes every coefficient outside the retained band (and the mean).
    pub fn dealias_coefficients(&self, coeffs: &mut [C64]) {
        coeffs.iter_mut().zip(&self.band).for_each(|(c, &keep)| {
            if !keep {
                *c = ZERO;
            }
        });
    }

    pub fn dealias_velocity(&self, y: &mut SpectralVelocity) {
        for comp in &mut y.data {
            self.dealias_coefficients(comp);
        }
    }

    /// Removes the out-of-band content of a grid scalar.
    pub fn dealias_scalar(&self, values: &[f64]) -> Vec<f64> {
        let mut c = self.scalar_to_spectral(values);
        self.dealias_coefficients(&mut c);
        self.scalar_to_physical(&c)
    }

    pub fn dealias_tensor(&self, t: &TensorField) -> TensorField {
        TensorField { n: t.n, data: std::array::from_fn(|c| self.dealias_scalar(&t.data[c])) }
    }

    /// Leray projection `u_k - k (k.u_k) / |k|^2`, mean mode removed.
    pub fn project_in_place(&self, y: &mut SpectralVelocity) {
        let [a, b] = &mut y.data;
        for idx in 0..a.len() {
            let (k1, k2) = self.wave(idx);
            let ksq = k1 * k1 + k2 * k2;
            if ksq == 0.0 {
                a[idx] = ZERO;
                b[idx] = ZERO;
                continue;
            }
            let dot = (a[idx] * k1 + b[idx] * k2) / ksq;
            a[idx] -= dot * k1;
            b[idx] -= dot * k2;
        }
    }

    pub fn leray_project(&self, y: &SpectralVelocity) -> SpectralVelocity {
        let mut out = y.clone();
        self.project_in_place(&mut out);
        out
    }

    /// Band-limits and projects a grid field.
    pub fn project_physical(&self, y: &PhysicalVelocity) -> Result<SpectralVelocity, SpectralError> {
        let mut s = self.to_spectral(y)?;
        self.dealias_velocity(&mut s);
        self.project_in_place(&mut s);
        Ok(s)
    }

    /// Spectral velocity gradient `(d_j u_i)` on the grid.
    pub fn gradient(&self, y: &SpectralVelocity) -> Result<TensorField, SpectralError> {
        self.check(y.n)?;
        let len = y.n * y.n;
        let mut d: [Vec<C64>; 4] = std::array::from_fn(|_| vec![ZERO; len]);
        for idx in 0..len {
            for i in 0..2 {
                for j in 0..2 {
                    d[2 * i + j][idx] = self.derivative(j, idx) * y.data[i][idx];
                }
            }
        }
        let (g11, g12) = self.pair_to_physical(&d[0], &d[1]);
        let (g21, g22) = self.pair_to_physical(&d[2], &d[3]);
        Ok(TensorField { n: y.n, data: [g11, g12, g21, g22] })
    }

    /// Divergence of a symmetric grid tensor given by `(t11, t12, t22)`,
    /// returned as raw (unprojected) coefficients.
    pub fn divergence_symmetric(&self, t11: &[f64], t12: &[f64], t22: &[f64]) -> SpectralVelocity {
        let n = self.n();
        let (s11, s22) = self.pair_to_spectral(t11, t22);
        let s12 = self.scalar_to_spectral(t12);
        let mut out = SpectralVelocity::zeros(n);
        for idx in 0..n * n {
            let (d1, d2) = (self.derivative(0, idx), self.derivative(1, idx));
            out.data[0][idx] = d1 * s11[idx] + d2 * s12[idx];
            out.data[1][idx] = d1 * s12[idx] + d2 * s22[idx];
        }
        out
    }

    /// `L^2` inner product computed from coefficients.
    pub fn inner(&self, a: &SpectralVelocity, b: &SpectralVelocity) -> f64 {
        let mut sum = 0.0;
        for c in 0..2 {
            sum += a.data[c].iter().zip(&b.data[c]).map(|(x, y)| (x * y.conj()).re).sum::<f64>();
        }
        self.grid.area() * sum
    }

    fn weighted_sum(&self, y: &SpectralVelocity, weight: impl Fn(f64) -> f64) -> f64 {
        let mut sum = 0.0;
        for idx in 0..y.n * y.n {
            let m = y.data[0][idx].norm_sqr() + y.data[1][idx].norm_sqr();
            if m != 0.0 {
                sum += weight(self.wave_sq(idx)) * m;
            }
        }
        self.grid.area() * sum
    }

    pub fn norm(&self, y: &SpectralVelocity, kind: NormKind) -> Result<f64, SpectralError> {
        self.check(y.n)?;
        let value = match kind {
            NormKind::L2 => self.weighted_sum(y, |_| 1.0).sqrt(),
            NormKind::H1 => self.weighted_sum(y, |k2| k2).sqrt(),
            NormKind::V => self.weighted_sum(y, |k2| 1.0 + k2).sqrt(),
            NormKind::UDual => self.weighted_sum(y, |k2| 1.0 / (1.0 + k2 + k2 * k2 + k2 * k2 * k2)).sqrt(),
            NormKind::HMinus1 => self.weighted_sum(y, |k2| if k2 > 0.0 { 1.0 / k2 } else { 0.0 }).sqrt(),
            NormKind::Lp(p) => {
                if !supported_exponent(p) {
                    return Err(SpectralError::UnsupportedExponent(p));
                }
                self.to_physical(y)?.lp_norm(self.grid.cell_area(), p)
            }
            NormKind::X => {
                let g = self.gradient(y)?;
                (self.grid.cell_area() * g.frobenius_power_sum(4)).powf(0.25)
            }
        };
        Ok(value)
    }

    /// `max_k |k . u_k|`.
    pub fn divergence_residual(&self, y: &SpectralVelocity) -> f64 {
        (0..y.n * y.n)
            .map(|idx| {
                let (k1, k2) = self.wave(idx);
                (y.data[0][idx] * k1 + y.data[1][idx] * k2).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest violation of `u_{-k} = conj(u_k)`.
    pub fn hermitian_defect(&self, y: &SpectralVelocity) -> f64 {
        let mut worst = 0.0f64;
        for comp in &y.data {
            for idx in 0..comp.len() {
                worst = worst.max((comp[idx] - comp[self.index_of_negative(idx)].conj()).norm());
            }
        }
        worst
    }

    /// Largest coefficient outside the band, including the mean.
    pub fn out_of_band_magnitude(&self, y: &SpectralVelocity) -> f64 {
        let mut worst = 0.0f64;
        for comp in &y.data {
            for (c, &keep) in comp.iter().zip(&self.band) {
                if !keep {
                    worst = worst.max(c.norm());
                }
            }
        }
        worst
    }

    /// Copies the common modes of `y` (defined on `from`) onto this grid.
    pub fn resample(&self, from: &SpectralContext, y: &SpectralVelocity) -> SpectralVelocity {
        let n = self.n();
        let mut out = SpectralVelocity::zeros(n);
        for idx in 0..y.n * y.n {
            if !from.in_band(idx) {
                continue;
            }
            let (k1, k2) = from.int_wave(idx);
            if !self.grid.in_band(k1, k2) {
                continue;
            }
            let p = k1.rem_euclid(n as i64) as usize;
            let q = k2.rem_euclid(n as i64) as usize;
            for c in 0..2 {
                out.data[c][p * n + q] = y.data[c][idx];
            }
        }
        out
    }

    /// Random band-limited, Hermitian, solenoidal field.
    pub fn random_field(&self, rng: &mut impl Rng, spectrum: &FieldSpectrum) -> SpectralVelocity {
        let n = self.n();
        let mut y = SpectralVelocity::zeros(n);
        for idx in 0..n * n {
            if !self.band[idx] {
                continue;
            }
            let (k1, k2) = self.int_wave(idx);
            let k = ((k1 * k1 + k2 * k2) as f64).sqrt();
            let keep = rng.random::<f64>() < spectrum.keep_fraction;
            let draws: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            if k > spectrum.cutoff || !keep {
                continue;
            }
            let amp = spectrum.amplitude * k.powf(-spectrum.slope);
            y.data[0][idx] = amp * C64::new(draws[0], draws[1]);
            y.data[1][idx] = amp * C64::new(draws[2], draws[3]);
        }
        self.symmetrize(&mut y);
        self.project_in_place(&mut y);
        y
    }

    /// Replaces `u_k` by `(u_k + conj(u_{-k})) / 2`.
    pub fn symmetrize(&self, y: &mut SpectralVelocity) {
        for comp in &mut y.data {
            let orig = comp.clone();
            for idx in 0..orig.len() {
                comp[idx] = 0.5 * (orig[idx] + orig[self.index_of_negative(idx)].conj());
            }
        }
    }

    /// Grid field built from a pointwise function of the coordinates.
    pub fn sample_physical(&self, f: impl Fn(f64, f64) -> [f64; 2]) -> PhysicalVelocity {
        let n = self.n();
        let h = self.grid.spacing();
        let mut out = PhysicalVelocity::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let v = f(i as f64 * h, j as f64 * h);
                out.data[0][i * n + j] = v[0];
                out.data[1][i * n + j] = v[1];
            }
        }
        out
    }

    /// Taylor-Green vortex `a (sin x1 cos x2, -cos x1 sin x2)` with
    /// wavenumbers scaled to the box.
    pub fn taylor_green(&self, amplitude: f64) -> SpectralVelocity {
        let s = self.grid.wave_scale();
        let phys = self.sample_physical(|x1, x2| {
            [amplitude * (s * x1).sin() * (s * x2).cos(), -amplitude * (s * x1).cos() * (s * x2).sin()]
        });
        self.project_physical(&phys).expect("same grid")
    }

    /// Shear flow `a (sin(m x2), 0)`.
    pub fn shear(&self, amplitude: f64, m: i64) -> SpectralVelocity {
        let s = self.grid.wave_scale() * m as f64;
        let phys = self.sample_physical(|_, x2| [amplitude * (s * x2).sin(), 0.0]);
        self.project_physical(&phys).expect("same grid")
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"TGFSNAP\0";
const SNAPSHOT_VERSION: u32 = 1;

/// Writes the retained modes of `y` in a flat little-endian layout:
/// magic, version, `N`, box length, dealias fraction, mode count, then per
/// mode `k1: i32, k2: i32, re1, im1, re2, im2: f64`.
pub fn write_snapshot(w: &mut impl Write, ctx: &SpectralContext, y: &SpectralVelocity) -> Result<(), SpectralError> {
    ctx.check(y.n)?;
    let grid = ctx.grid();
    let modes: Vec<usize> = (0..y.n * y.n).filter(|&idx| ctx.in_band(idx)).collect();
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(grid.resolution() as u32).to_le_bytes())?;
    w.write_all(&grid.box_length().to_le_bytes())?;
    w.write_all(&grid.dealias_fraction().to_le_bytes())?;
    w.write_all(&(modes.len() as u32).to_le_bytes())?;
    for idx in modes {
        let (k1, k2) = ctx.int_wave(idx);
        w.write_all(&(k1 as i32).to_le_bytes())?;
        w.write_all(&(k2 as i32).to_le_bytes())?;
        for c in 0..2 {
            w.write_all(&y.data[c][idx].re.to_le_bytes())?;
            w.write_all(&y.data[c][idx].im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<const K: usize>(r: &mut impl Read) -> Result<[u8; K], SpectralError> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Reads a snapshot written by [`write_snapshot`], returning its grid and state.
pub fn read_snapshot(r: &mut impl Read) -> Result<(TorusGrid, SpectralVelocity), SpectralError> {
    let magic: [u8; 8] = read_array(r)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(SpectralError::MalformedSnapshot("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(r)?);
    if version != SNAPSHOT_VERSION {
        return Err(SpectralError::MalformedSnapshot(format!("unknown version {version}")));
    }
    let n = u32::from_le_bytes(read_array(r)?) as usize;
    let box_length = f64::from_le_bytes(read_array(r)?);
    let fraction = f64::from_le_bytes(read_array(r)?);
    let grid = TorusGrid::new(box_length, n, fraction).map_err(|e| SpectralError::MalformedSnapshot(e.to_string()))?;
    let count = u32::from_le_bytes(read_array(r)?) as usize;
    let mut y = SpectralVelocity::zeros(n);
    for _ in 0..count {
        let k1 = i32::from_le_bytes(read_array(r)?) as i64;
        let k2 = i32::from_le_bytes(read_array(r)?) as i64;
        if !grid.in_band(k1, k2) {
            return Err(SpectralError::MalformedSnapshot(format!("mode ({k1}, {k2}) outside band")));
        }
        let idx = k1.rem_euclid(n as i64) as usize * n + k2.rem_euclid(n as i64) as usize;
        for c in 0..2 {
            let re = f64::from_le_bytes(read_array(r)?);
            let im = f64::from_le_bytes(read_array(r)?);
            y.data[c][idx] = C64::new(re, im);
        }
    }
    Ok((grid, y))
}
