//! Randomized property suites behind `tgf verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use tgf_core::model::{korn_ratio, random_oracle_spectrum, sobolev_ratio, ConstantSet, FluidParams};
use tgf_core::noise::{build_noise_model, lipschitz_gap, AmplitudeSpec, NoiseShape};
use tgf_core::operators::{convection, monotonicity_gap, trilinear};
use tgf_core::spectral::{NormKind, SpectralContext, SpectralVelocity};

/// Outcome of one suite. `worst` is the statistic compared with `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub worst: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: serde_json::Value,
}

fn random_state(ctx: &SpectralContext, rng: &mut ChaCha8Rng) -> SpectralVelocity {
    let spectrum = random_oracle_spectrum(rng, ctx.grid().kmax());
    let y = ctx.random_field(rng, &spectrum);
    let norm = ctx.norm(&y, NormKind::L2).expect("same grid");
    let target = 10f64.powf(rng.random_range(-1.0..1.0));
    y.scale(target / norm)
}

/// Smallest `<S(u) - S(v), u - v> / (||u||_X + ||v||_X)^4` over random pairs.
pub fn monotonicity_suite(ctx: &SpectralContext, params: &FluidParams, cases: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..cases {
        let u = random_state(ctx, &mut rng);
        let v = if rng.random_bool(0.25) {
            // Nearby pairs probe the linearization.
            u.axpy(1e-3, &random_state(ctx, &mut rng))
        } else {
            random_state(ctx, &mut rng)
        };
        let gap = monotonicity_gap(ctx, &u, &v, params).expect("same grid");
        let scale = ctx.norm(&u, NormKind::X).unwrap() + ctx.norm(&v, NormKind::X).unwrap();
        worst = worst.min(gap / scale.powi(4));
    }
    let threshold = -1e-9;
    SuiteResult {
        name: format!("monotonicity(nu={}, alpha={}, beta={})", params.nu, params.alpha, params.beta),
        cases,
        worst,
        threshold,
        pass: worst >= threshold,
        detail: serde_json::json!({ "resolution": ctx.n() }),
    }
}

/// Largest `lhs / rhs` of the noise Lipschitz bound for both shapes, and the
/// largest relative defect from equality for the linear shape.
pub fn lipschitz_suite(modes: usize, lipschitz: f64, cases: usize, seed: u64) -> Vec<SuiteResult> {
    let spec = AmplitudeSpec::Geometric { modes, lipschitz };
    let mut out = Vec::new();
    for shape in [NoiseShape::Linear, NoiseShape::Bounded] {
        let model = build_noise_model(&spec, shape).expect("valid amplitudes");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ratio = 0.0f64;
        let mut defect = 0.0f64;
        for _ in 0..cases {
            let scale = 10f64.powf(rng.random_range(-3.0..2.0));
            let lambda = [scale * rng.random_range(-1.0..1.0), scale * rng.random_range(-1.0..1.0)];
            let mu = [scale * rng.random_range(-1.0..1.0), scale * rng.random_range(-1.0..1.0)];
            let (lhs, rhs) = lipschitz_gap(lambda, mu, &model);
            if rhs > 0.0 {
                ratio = ratio.max(lhs / rhs);
                defect = defect.max((lhs - rhs).abs() / rhs);
            }
        }
        let linear = shape == NoiseShape::Linear;
        let pass = ratio <= 1.0 + 1e-12 && (!linear || defect <= 1e-14);
        out.push(SuiteResult {
            name: format!("lipschitz({shape:?})").to_lowercase(),
            cases,
            worst: ratio,
            threshold: 1.0 + 1e-12,
            pass,
            detail: serde_json::json!({ "equality_defect": defect, "equality_threshold": if linear { 1e-14 } else { f64::NAN } }),
        });
    }
    out
}

/// Relative skew defects of the trilinear form and of `<B(y), y>`.
pub fn skew_suite(ctx: &SpectralContext, cases: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_b = 0.0f64;
    let mut worst_conv = 0.0f64;
    for _ in 0..cases {
        let y = random_state(ctx, &mut rng);
        let z = random_state(ctx, &mut rng);
        let phi = random_state(ctx, &mut rng);
        let v = |f: &SpectralVelocity| ctx.norm(f, NormKind::V).unwrap();
        let sum = trilinear(ctx, &y, &z, &phi).unwrap() + trilinear(ctx, &y, &phi, &z).unwrap();
        worst_b = worst_b.max(sum.abs() / (v(&y) * v(&z) * v(&phi)));
        let b = convection(ctx, &y).unwrap();
        let l2 = ctx.norm(&y, NormKind::L2).unwrap();
        worst_conv = worst_conv.max(ctx.inner(&b, &y).abs() / (v(&y) * l2 * l2));
    }
    let worst = worst_b.max(worst_conv);
    SuiteResult {
        name: "skew_symmetry".into(),
        cases,
        worst,
        threshold: 1e-11,
        pass: worst <= 1e-11,
        detail: serde_json::json!({ "trilinear": worst_b, "convection": worst_conv }),
    }
}

/// Korn, Poincare and Sobolev ratios against the configured constants,
/// including the shear witness for Korn and the unit mode for Poincare.
pub fn witness_suite(ctx: &SpectralContext, constants: &ConstantSet, cases: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shear = ctx.shear(1.0, 1);
    let shear_korn = korn_ratio(ctx, &shear);
    let unit_poincare = {
        let l2 = ctx.norm(&shear, NormKind::L2).unwrap();
        let h1 = ctx.norm(&shear, NormKind::H1).unwrap();
        (l2 / h1).powi(2)
    };
    let (mut korn, mut poincare, mut sobolev) = (shear_korn, unit_poincare, 0.0f64);
    for _ in 0..cases {
        let y = random_state(ctx, &mut rng);
        korn = korn.max(korn_ratio(ctx, &y));
        sobolev = sobolev.max(sobolev_ratio(ctx, &y));
        let l2 = ctx.norm(&y, NormKind::L2).unwrap();
        let h1 = ctx.norm(&y, NormKind::H1).unwrap();
        poincare = poincare.max((l2 / h1).powi(2));
    }
    // Worst ratio of observed value to constant; must not exceed one.
    let worst = (korn / constants.korn).max(poincare / constants.poincare).max(sobolev / constants.sobolev);
    SuiteResult {
        name: "functional_witnesses".into(),
        cases,
        worst,
        threshold: 1.0 + 1e-12,
        pass: worst <= 1.0 + 1e-12,
        detail: serde_json::json!({
            "korn_max": korn, "korn_constant": constants.korn, "korn_shear_witness": shear_korn,
            "poincare_max": poincare, "poincare_constant": constants.poincare,
            "sobolev_max": sobolev, "sobolev_constant": constants.sobolev,
        }),
    }
}
