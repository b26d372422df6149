mod common;

use common::*;
use proptest::prelude::*;
use tgf_core::measure::chebyshev_check;
use tgf_core::model::validate_params;
use tgf_core::noise::{build_noise_model, ito_trace, lipschitz_gap, AmplitudeSpec, NoiseShape};
use tgf_core::spectral::NormKind;
use tgf_core::stepper::{cutoff_weight, StateSample};

fn shape() -> impl Strategy<Value = NoiseShape> {
    prop_oneof![Just(NoiseShape::Linear), Just(NoiseShape::Bounded)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accepted_parameters_satisfy_the_margin(nu in 1e-3f64..10.0, beta in 1e-3f64..10.0, frac in -1.5f64..1.5) {
        let alpha = frac * (2.0 * nu * beta).sqrt();
        match validate_params(nu, alpha, beta) {
            Ok(p) => {
                prop_assert!(alpha * alpha < 2.0 * nu * beta);
                let want = 1.0 - (alpha * alpha / (2.0 * nu * beta)).sqrt();
                prop_assert!((p.epsilon0 - want).abs() <= 1e-15);
                prop_assert!(p.epsilon0 > 0.0 && p.epsilon0 <= 1.0);
            }
            Err(_) => prop_assert!(frac.abs() >= 1.0 - 1e-12),
        }
    }

    #[test]
    fn projection_is_idempotent_and_solenoidal(seed in any::<u64>()) {
        let ctx = ctx(16);
        let y = unit_field(&ctx, &mut rng(seed));
        let p = ctx.leray_project(&y);
        prop_assert!(ctx.divergence_residual(&p) <= 1e-13);
        prop_assert!(ctx.norm(&p.sub(&y), NormKind::L2).unwrap() <= 1e-14);
        prop_assert!(ctx.hermitian_defect(&y) <= 1e-15);
    }

    #[test]
    fn cutoff_weight_is_a_monotone_profile(a in 0.0f64..10.0, b in 0.0f64..10.0, m in 0.1f64..5.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (wl, wh) = (cutoff_weight(lo, m), cutoff_weight(hi, m));
        prop_assert!((0.0..=1.0).contains(&wl) && (0.0..=1.0).contains(&wh));
        prop_assert!(wh <= wl);
    }

    #[test]
    fn noise_is_lipschitz(shape in shape(), modes in 1usize..8, l in 0.01f64..4.0,
                          lam in prop::array::uniform2(-20.0f64..20.0), mu in prop::array::uniform2(-20.0f64..20.0)) {
        let m = build_noise_model(&AmplitudeSpec::Geometric { modes, lipschitz: l }, shape).unwrap();
        let (lhs, rhs) = lipschitz_gap(lam, mu, &m);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn ito_trace_is_bounded_by_the_energy(shape in shape(), seed in any::<u64>(), scale in 0.01f64..50.0) {
        let ctx = ctx(16);
        let y = unit_field(&ctx, &mut rng(seed)).scale(scale);
        let m = build_noise_model(&AmplitudeSpec::Geometric { modes: 4, lipschitz: 0.5 }, shape).unwrap();
        let t = ito_trace(ctx.grid(), &ctx.to_physical(&y).unwrap(), &m);
        let e = ctx.norm(&y, NormKind::L2).unwrap().powi(2);
        prop_assert!(t <= 0.5 * e * (1.0 + 1e-12));
    }

    #[test]
    fn chebyshev_holds_on_arbitrary_series(values in prop::collection::vec(0.0f64..100.0, 50..200), r in 0.0f64..12.0) {
        let s: Vec<StateSample> = values.iter().enumerate().map(|(i, &v)| StateSample {
            t: i as f64 * 0.01, energy: v, grad_sq: 0.5 * v, a4: 0.0, x_norm_pow4: 0.0, grad_l3_sq: 0.0, dual_norm: 0.0,
        }).collect();
        prop_assert!(chebyshev_check(&s, 0.05, r).holds);
    }
}
