mod common;

use common::*;
use tgf_core::diagnostics::{energy_residual, estimate1_check, estimate1_rhs, stability_experiment, DiagnosticsError};
use tgf_core::model::{derived_constants, validate_params, ForcingField, ForcingMode, OracleSettings};
use tgf_core::noise::{build_noise_model, AmplitudeSpec, NoiseModel, NoiseShape};
use tgf_core::spectral::SpectralVelocity;
use tgf_core::stepper::{simulate, simulate_ensemble, Integrator, StepperConfig};

#[test]
fn zero_trajectory_has_zero_residuals() {
    let ctx = ctx(16);
    let p = validate_params(1.0, 0.5, 1.0).unwrap();
    let f = ForcingField::zero(&ctx);
    let noise = build_noise_model(&AmplitudeSpec::Geometric { modes: 4, lipschitz: 0.5 }, NoiseShape::Linear).unwrap();
    let rec = simulate(
        &Integrator::new(&ctx, p, &f, &noise),
        &SpectralVelocity::zeros(16),
        &StepperConfig::new(1e-3, 0.05),
        1,
        0,
    )
    .unwrap();
    let r = energy_residual(&rec.ledger, &p).unwrap();
    assert!(r.residuals.iter().all(|&v| v == 0.0));
}

#[test]
fn stokes_residual_is_the_exponential_euler_gap() {
    let ctx = ctx(16);
    let p = tgf_core::model::FluidParams { nu: 1.0, alpha: 0.0, beta: 0.0, epsilon0: 1.0 };
    let f = ForcingField::zero(&ctx);
    let noise = NoiseModel::none();
    let y0 = ctx.shear(1.0, 1);
    let mut last = f64::INFINITY;
    for dt in [1e-2, 5e-3, 2.5e-3] {
        let rec =
            simulate(&Integrator::new(&ctx, p, &f, &noise), &y0, &StepperConfig::new(dt, 10.0 * dt), 0, 0).unwrap();
        let r = energy_residual(&rec.ledger, &p).unwrap();
        for (e, res) in rec.ledger.iter().zip(&r.residuals) {
            // e^{-2 dt} - 1 + 2 dt per unit energy, |k| = 1.
            let want = e.energy * ((-2.0 * dt).exp() - 1.0 + 2.0 * dt);
            assert!((res - want).abs() <= 1e-12 * e.energy);
        }
        assert!(r.max_abs < last);
        last = r.max_abs;
    }
}

#[test]
fn estimate1_deterministic_cases() {
    let ctx = ctx(16);
    let p = validate_params(1.0, 0.5, 1.0).unwrap();
    let f = ForcingField::zero(&ctx);
    let noise = NoiseModel::none();
    let constants = derived_constants(&ctx, &noise, &OracleSettings::default()).unwrap();
    assert_eq!(constants.growth, 0.0);
    let integ = Integrator::new(&ctx, p, &f, &noise);
    let cfg = StepperConfig::new(1e-3, 0.2);

    let zero = simulate_ensemble(&integ, &SpectralVelocity::zeros(16), &cfg, 0, 30).unwrap();
    let rep = estimate1_check(&zero, &p, &constants, 0.0).unwrap();
    assert_eq!((rep.lhs, rep.rhs), (0.0, 0.0));
    assert!(rep.pass);

    let tg = simulate_ensemble(&integ, &ctx.taylor_green(0.05), &cfg, 0, 30).unwrap();
    let rep = estimate1_check(&tg, &p, &constants, 0.0).unwrap();
    // With unit factors the bound cannot hold: the supremum alone already
    // equals ||y0||^2. Each term is at most ||y0||^2, so factor 2 suffices.
    assert!(rep.pass && rep.ratio <= 1.0);
    assert!(rep.ratio_unit_factors > 1.0 && rep.ratio_unit_factors <= 2.0);
    let rhs = estimate1_rhs(&p, &constants, 0.2, tg[0].samples[0].energy, 0.0, 2.0);
    assert!((rep.rhs - rhs).abs() <= 1e-15 * rhs);

    assert!(matches!(
        estimate1_check(&tg[..5], &p, &constants, 0.0),
        Err(DiagnosticsError::InsufficientEnsemble { .. })
    ));
}

#[test]
fn identical_twins_have_zero_distance() {
    let ctx = ctx(16);
    let p = validate_params(1.0, 0.5, 1.0).unwrap();
    let f = ForcingField::from_modes(&ctx, &[ForcingMode { k: [0, 1], amplitude: 0.1 }]).unwrap();
    let noise = build_noise_model(&AmplitudeSpec::Geometric { modes: 4, lipschitz: 0.5 }, NoiseShape::Linear).unwrap();
    let constants = derived_constants(&ctx, &noise, &OracleSettings::default()).unwrap();
    let y0 = ctx.taylor_green(0.05);
    let rep = stability_experiment(
        &Integrator::new(&ctx, p, &f, &noise),
        &StepperConfig::new(1e-3, 0.1),
        &y0,
        &y0,
        &constants,
        3,
        4,
    )
    .unwrap();
    assert!(rep.weighted_sup.iter().chain(&rep.weighted_sup_swapped).all(|&d| d == 0.0));
    assert!(rep.pass);
}

#[test]
fn deterministic_twins_stay_in_the_envelope() {
    let ctx = ctx(16);
    let p = validate_params(1.0, 0.5, 1.0).unwrap();
    let f = ForcingField::zero(&ctx);
    let noise = NoiseModel::none();
    let constants = derived_constants(&ctx, &noise, &OracleSettings::default()).unwrap();
    let y0 = ctx.taylor_green(0.05);
    let dy = unit_field(&ctx, &mut rng(1)).scale(1e-6);
    let rep = stability_experiment(
        &Integrator::new(&ctx, p, &f, &noise),
        &StepperConfig::new(1e-3, 0.2),
        &y0,
        &y0.axpy(1.0, &dy),
        &constants,
        0,
        1,
    )
    .unwrap();
    assert!((rep.initial_gap - 1e-12).abs() < 1e-24);
    assert!(rep.envelope.iter().all(|&e| (e - 2e-12).abs() < 1e-24));
    assert!(rep.pass);
}

#[test]
fn weight_quadratures_agree() {
    let ctx = ctx(16);
    let p = validate_params(1.0, 0.5, 1.0).unwrap();
    let f = ForcingField::from_modes(&ctx, &[ForcingMode { k: [0, 1], amplitude: 0.1 }]).unwrap();
    let noise = build_noise_model(&AmplitudeSpec::Geometric { modes: 4, lipschitz: 0.5 }, NoiseShape::Linear).unwrap();
    let constants = derived_constants(&ctx, &noise, &OracleSettings::default()).unwrap();
    let y0 = ctx.taylor_green(0.05);
    let dy = unit_field(&ctx, &mut rng(2)).scale(1e-4);
    let rep = stability_experiment(
        &Integrator::new(&ctx, p, &f, &noise),
        &StepperConfig::new(1e-3, 1.0),
        &y0,
        &y0.axpy(1.0, &dy),
        &constants,
        5,
        50,
    )
    .unwrap();
    let (a, b) = (rep.final_weight_trapezoid, rep.final_weight_midpoint);
    assert!((a - b).abs() <= 1e-6 * a, "{a} vs {b}");
    assert!(rep.pass);
}
