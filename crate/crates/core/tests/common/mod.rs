//! Helpers shared by the integration tests: independent oracles built from
//! direct sums over Fourier modes, never from the transforms under test.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tgf_core::model::TorusGrid;
use tgf_core::spectral::{FieldSpectrum, NormKind, SpectralContext, SpectralVelocity, C64};

pub fn ctx(n: usize) -> SpectralContext {
    SpectralContext::new(TorusGrid::standard(n).unwrap())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random solenoidal field with unit `L^2` norm.
pub fn unit_field(ctx: &SpectralContext, rng: &mut ChaCha8Rng) -> SpectralVelocity {
    let y = ctx.random_field(rng, &FieldSpectrum::default());
    let n = ctx.norm(&y, NormKind::L2).unwrap();
    y.scale(1.0 / n)
}

pub fn index(ctx: &SpectralContext, k1: i64, k2: i64) -> usize {
    let n = ctx.n() as i64;
    (k1.rem_euclid(n) * n + k2.rem_euclid(n)) as usize
}

/// Retained modes as `(k1, k2, flat index)`.
pub fn band_modes(ctx: &SpectralContext) -> Vec<(i64, i64, usize)> {
    (0..ctx.n() * ctx.n())
        .filter(|&i| ctx.in_band(i))
        .map(|i| {
            let (a, b) = ctx.int_wave(i);
            (a, b, i)
        })
        .collect()
}

/// Fourier coefficients of `a * b` on the band by direct convolution.
pub fn convolve(ctx: &SpectralContext, a: &[C64], b: &[C64]) -> Vec<C64> {
    let modes = band_modes(ctx);
    let mut out = vec![C64::new(0.0, 0.0); a.len()];
    for &(k1, k2, k) in &modes {
        let mut s = C64::new(0.0, 0.0);
        for &(p1, p2, p) in &modes {
            let (q1, q2) = (k1 - p1, k2 - p2);
            if ctx.grid().in_band(q1, q2) {
                s += a[p] * b[index(ctx, q1, q2)];
            }
        }
        out[k] = s;
    }
    out
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `d/dx_j` multiplier computed from the integer wavevector.
pub fn deriv(ctx: &SpectralContext, j: usize, idx: usize) -> C64 {
    let (k1, k2) = ctx.int_wave(idx);
    let k = if j == 0 { k1 } else { k2 };
    C64::new(0.0, ctx.grid().wave_scale() * k as f64)
}
