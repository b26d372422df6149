//! Discrete third-grade stress operator and convection.
//!
//! Nonlinear terms are formed pseudo-spectrally: pointwise products on the
//! grid, forward transform, spectral divergence, dealiasing, projection.
//! With the band `3 kmax < N`, grid quadrature of products of up to three
//! band-limited factors is exact, so the discrete pairings below inherit the
//! algebraic identities of the continuous ones up to round-off.
//!
//! In two dimensions the strain of a solenoidal field is symmetric and
//! traceless, so `A^2 = |A|^2 / 2 I` and the `alpha` stress is a pure
//! gradient. It is still assembled literally; projection removes it.

use crate::model::FluidParams;
use crate::spectral::{PhysicalVelocity, SpectralContext, SpectralError, SpectralVelocity, TensorField};

/// Grid values of a state and its gradient, shared by all nonlinear terms.
#[derive(Debug, Clone)]
pub struct PhysicalState {
    pub velocity: PhysicalVelocity,
    pub gradient: TensorField,
}

impl PhysicalState {
    pub fn new(ctx: &SpectralContext, y: &SpectralVelocity) -> Result<Self, SpectralError> {
        Ok(Self { velocity: ctx.to_physical(y)?, gradient: ctx.gradient(y)? })
    }
}

/// `A = grad u + grad u^T`.
pub fn strain_from_gradient(g: &TensorField) -> TensorField {
    let mut a = TensorField::zeros(g.n);
    for x in 0..g.n * g.n {
        let off = g.data[1][x] + g.data[2][x];
        a.data[0][x] = 2.0 * g.data[0][x];
        a.data[1][x] = off;
        a.data[2][x] = off;
        a.data[3][x] = 2.0 * g.data[3][x];
    }
    a
}

pub fn strain(ctx: &SpectralContext, y: &SpectralVelocity) -> Result<TensorField, SpectralError> {
    Ok(strain_from_gradient(&ctx.gradient(y)?))
}

/// Pointwise quantities of the strain at one node.
#[derive(Debug, Clone, Copy)]
struct StrainPoint {
    a11: f64,
    a12: f64,
    a22: f64,
}

impl StrainPoint {
    fn at(g: &TensorField, x: usize) -> Self {
        Self { a11: 2.0 * g.data[0][x], a12: g.data[1][x] + g.data[2][x], a22: 2.0 * g.data[3][x] }
    }

    fn norm_sq(&self) -> f64 {
        self.a11 * self.a11 + 2.0 * self.a12 * self.a12 + self.a22 * self.a22
    }

    /// Symmetric components of `A^2`.
    fn square(&self) -> [f64; 3] {
        [
            self.a11 * self.a11 + self.a12 * self.a12,
            self.a11 * self.a12 + self.a12 * self.a22,
            self.a12 * self.a12 + self.a22 * self.a22,
        ]
    }

    /// `alpha A^2 + beta |A|^2 A`.
    fn stress(&self, alpha: f64, beta: f64) -> [f64; 3] {
        let sq = self.square();
        let c = beta * self.norm_sq();
        [alpha * sq[0] + c * self.a11, alpha * sq[1] + c * self.a12, alpha * sq[2] + c * self.a22]
    }
}

/// Pairs a symmetric tensor with the gradient at node `x`.
fn contract(t: [f64; 3], g: &TensorField, x: usize) -> f64 {
    t[0] * g.data[0][x] + t[1] * (g.data[1][x] + g.data[2][x]) + t[2] * g.data[3][x]
}

fn finish(ctx: &SpectralContext, mut y: SpectralVelocity) -> SpectralVelocity {
    ctx.dealias_velocity(&mut y);
    ctx.project_in_place(&mut y);
    y
}

/// `P div(alpha A^2 + beta |A|^2 A)`, dealiased.
fn stress_divergence(ctx: &SpectralContext, state: &PhysicalState, params: &FluidParams) -> SpectralVelocity {
    let len = state.velocity.n * state.velocity.n;
    let mut t: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; len]);
    for x in 0..len {
        let s = StrainPoint::at(&state.gradient, x).stress(params.alpha, params.beta);
        for c in 0..3 {
            t[c][x] = s[c];
        }
    }
    finish(ctx, ctx.divergence_symmetric(&t[0], &t[1], &t[2]))
}

/// The monotone part `S(u) = -nu Lap u - alpha P div(A^2) - beta P div(|A|^2 A)`.
pub fn stress_operator(
    ctx: &SpectralContext,
    y: &SpectralVelocity,
    params: &FluidParams,
) -> Result<SpectralVelocity, SpectralError> {
    let state = PhysicalState::new(ctx, y)?;
    let div = stress_divergence(ctx, &state, params);
    let mut out = SpectralVelocity::zeros(y.n);
    for idx in 0..y.n * y.n {
        let k2 = ctx.wave_sq(idx);
        for c in 0..2 {
            out.data[c][idx] = params.nu * k2 * y.data[c][idx] - div.data[c][idx];
        }
    }
    Ok(finish(ctx, out))
}

/// `(u . grad) u` on the grid.
fn advection(state: &PhysicalState) -> [Vec<f64>; 2] {
    let u = &state.velocity.data;
    let g = &state.gradient.data;
    let len = u[0].len();
    let mut adv = [vec![0.0; len], vec![0.0; len]];
    for x in 0..len {
        adv[0][x] = u[0][x] * g[0][x] + u[1][x] * g[1][x];
        adv[1][x] = u[0][x] * g[2][x] + u[1][x] * g[3][x];
    }
    adv
}

/// Skew-symmetric convection `P [ (y.grad) y + div(y (x) y) ] / 2`, dealiased.
pub fn convection(ctx: &SpectralContext, y: &SpectralVelocity) -> Result<SpectralVelocity, SpectralError> {
    let state = PhysicalState::new(ctx, y)?;
    Ok(convection_from_state(ctx, &state))
}

pub fn convection_from_state(ctx: &SpectralContext, state: &PhysicalState) -> SpectralVelocity {
    let u = &state.velocity.data;
    let len = u[0].len();
    let adv = advection(state);
    let (p11, p12, p22): (Vec<f64>, Vec<f64>, Vec<f64>) = (
        (0..len).map(|x| u[0][x] * u[0][x]).collect(),
        (0..len).map(|x| u[0][x] * u[1][x]).collect(),
        (0..len).map(|x| u[1][x] * u[1][x]).collect(),
    );
    let div = ctx.divergence_symmetric(&p11, &p12, &p22);
    let (a1, a2) = ctx.pair_to_spectral(&adv[0], &adv[1]);
    let mut out = div;
    for idx in 0..len {
        out.data[0][idx] = 0.5 * (out.data[0][idx] + a1[idx]);
        out.data[1][idx] = 0.5 * (out.data[1][idx] + a2[idx]);
    }
    finish(ctx, out)
}

/// Direct grid quadrature of `b(y, z, phi) = int (y . grad) z . phi`.
pub fn trilinear(
    ctx: &SpectralContext,
    y: &SpectralVelocity,
    z: &SpectralVelocity,
    phi: &SpectralVelocity,
) -> Result<f64, SpectralError> {
    let yv = ctx.to_physical(y)?;
    let gz = ctx.gradient(z)?;
    let pv = ctx.to_physical(phi)?;
    let mut sum = 0.0;
    for x in 0..y.n * y.n {
        for i in 0..2 {
            let di = yv.data[0][x] * gz.data[2 * i][x] + yv.data[1][x] * gz.data[2 * i + 1][x];
            sum += di * pv.data[i][x];
        }
    }
    Ok(ctx.grid().cell_area() * sum)
}

/// `<S(u) - S(v), u - v>`.
pub fn monotonicity_gap(
    ctx: &SpectralContext,
    u: &SpectralVelocity,
    v: &SpectralVelocity,
    params: &FluidParams,
) -> Result<f64, SpectralError> {
    let su = stress_operator(ctx, u, params)?;
    let sv = stress_operator(ctx, v, params)?;
    Ok(ctx.inner(&su.sub(&sv), &u.sub(v)))
}

/// Pointwise functionals of one state. Sums carry the cell-area weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateFunctionals {
    /// `int |A|^4`.
    pub a4: f64,
    /// `int A^2 : grad y`.
    pub alpha_pairing: f64,
    /// `||grad y||_4^4`.
    pub grad_l4_pow4: f64,
    /// `||grad y||_3^2`.
    pub grad_l3_sq: f64,
    /// `max |y|`.
    pub velocity_sup: f64,
    /// `max |A|^2`.
    pub strain_sup_sq: f64,
}

pub fn state_functionals(ctx: &SpectralContext, state: &PhysicalState) -> StateFunctionals {
    let g = &state.gradient;
    let len = g.n * g.n;
    let (mut a4, mut pair, mut g4, mut g3, mut amax) = (0.0, 0.0, 0.0, 0.0, 0.0f64);
    for x in 0..len {
        let a = StrainPoint::at(g, x);
        let asq = a.norm_sq();
        a4 += asq * asq;
        amax = amax.max(asq);
        pair += contract(a.square(), g, x);
        let gsq = g.frobenius_sq_at(x);
        g4 += gsq * gsq;
        g3 += gsq * gsq.sqrt();
    }
    let cell = ctx.grid().cell_area();
    StateFunctionals {
        a4: cell * a4,
        alpha_pairing: cell * pair,
        grad_l4_pow4: cell * g4,
        grad_l3_sq: (cell * g3).powf(2.0 / 3.0),
        velocity_sup: state.velocity.sup_norm(),
        strain_sup_sq: amax,
    }
}

/// `(||grad y||_2^2, int |A|^4)`.
pub fn dissipation_functionals(ctx: &SpectralContext, y: &SpectralVelocity) -> Result<(f64, f64), SpectralError> {
    let state = PhysicalState::new(ctx, y)?;
    let h1 = ctx.norm(y, crate::spectral::NormKind::H1)?;
    Ok((h1 * h1, state_functionals(ctx, &state).a4))
}

/// Explicit nonlinear drift `-B(y) + P div(alpha A^2 + beta |A|^2 A)` in one
/// pass: the convective flux and the stress share a single symmetric tensor.
pub fn explicit_drift(ctx: &SpectralContext, state: &PhysicalState, params: &FluidParams) -> SpectralVelocity {
    let u = &state.velocity.data;
    let len = u[0].len();
    let adv = advection(state);
    let mut q: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; len]);
    for x in 0..len {
        let s = StrainPoint::at(&state.gradient, x).stress(params.alpha, params.beta);
        q[0][x] = s[0] - 0.5 * u[0][x] * u[0][x];
        q[1][x] = s[1] - 0.5 * u[0][x] * u[1][x];
        q[2][x] = s[2] - 0.5 * u[1][x] * u[1][x];
    }
    let mut out = ctx.divergence_symmetric(&q[0], &q[1], &q[2]);
    let (a1, a2) = ctx.pair_to_spectral(&adv[0], &adv[1]);
    for idx in 0..len {
        out.data[0][idx] -= 0.5 * a1[idx];
        out.data[1][idx] -= 0.5 * a2[idx];
    }
    finish(ctx, out)
}
