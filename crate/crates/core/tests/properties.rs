//! Randomised invariants across modules.

use nalgebra::DMatrix;
use proptest::prelude::*;

use seqtreat::data::{apply_regime, validate, History, Kind, Regime, Trajectory};
use seqtreat::gformula::{g_formula_exact, g_formula_mc, TableLaws};
use seqtreat::glm::{fit_linear, fit_logistic};
use seqtreat::simulate::{enumerate_joint, simulate, SequentialConfig, SndmScenario};
use seqtreat::sndm::{blip, blip_inverse, compute_h, h_inverse, BlipFamily, BlipSpec};
use seqtreat::stats::dkw_envelope;

fn design(rows: &[(f64, f64)]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => rows[i].0,
        _ => rows[i].1,
    })
}

fn traj(k: usize, positive: bool) -> impl Strategy<Value = Trajectory> {
    let y = if positive { 0.1f64..6.0 } else { -6.0f64..6.0 };
    (
        proptest::collection::vec(-2.0f64..2.0, k + 1),
        proptest::collection::vec(0u8..2, k + 1),
        y,
    )
        .prop_map(|(l, a, y)| Trajectory::new(l, a.into_iter().map(f64::from).collect(), y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linear_fit_score_and_vcov(
        rows in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -1.0f64..1.0), 20..80),
        beta in proptest::array::uniform3(-2.0f64..2.0),
    ) {
        let xs: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
        let y: Vec<f64> = rows.iter().map(|r| beta[0] + beta[1] * r.0 + beta[2] * r.1 + r.2).collect();
        let fit = fit_linear(&design(&xs), &y).unwrap();
        let n = y.len() as f64;
        prop_assert!(fit.score().amax() * fit.dispersion < 1e-8 * n);
        prop_assert!((&fit.vcov - fit.vcov.transpose()).amax() < 1e-12);

        // Recentring the first regressor moves only the intercept.
        let shifted: Vec<(f64, f64)> = xs.iter().map(|&(a, b)| (a - 1.7, b)).collect();
        let refit = fit_linear(&design(&shifted), &y).unwrap();
        prop_assert!((fit.coef[1] - refit.coef[1]).abs() < 1e-8);
        prop_assert!((fit.coef[2] - refit.coef[2]).abs() < 1e-8);
    }

    #[test]
    fn logistic_fit_score(
        rows in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, 0.0f64..1.0), 200..400),
        beta in proptest::array::uniform3(-0.8f64..0.8),
    ) {
        let xs: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| f64::from(u8::from(r.2 < seqtreat::glm::expit(beta[0] + beta[1] * r.0 + beta[2] * r.1))))
            .collect();
        prop_assume!(y.iter().any(|&v| v == 0.0) && y.iter().any(|&v| v == 1.0));
        let Ok(fit) = fit_logistic(&design(&xs), &y) else { return Ok(()) };
        prop_assert!(fit.score().amax() < 1e-8 * y.len() as f64);
        prop_assert!((&fit.vcov - fit.vcov.transpose()).amax() < 1e-12);
    }

    #[test]
    fn generated_data_always_validates(n in 1usize..60, seed in any::<u64>(), which in 0usize..6) {
        let d = match which {
            0 => simulate(&SequentialConfig::null_paradox_default(), n, seed),
            1 => simulate(&SequentialConfig::with_effects(1.0, -0.5, 0.7), n, seed),
            2 => simulate(&SequentialConfig::binary_toy(0.5, 1.0), n, seed),
            3 => simulate(&SequentialConfig::binary_null_trial(3), n, seed),
            4 => simulate(&SndmScenario::recovery_default(1.0), n, seed),
            _ => simulate(&SndmScenario::discrete_default(), n, seed),
        }
        .unwrap();
        prop_assert!(validate(&d).is_ok());
        prop_assert_eq!(d.n(), n);
    }

    #[test]
    fn static_regimes_ignore_history(
        plan in proptest::collection::vec(0u8..2, 3),
        l1 in proptest::collection::vec(-5.0f64..5.0, 3),
        l2 in proptest::collection::vec(-5.0f64..5.0, 3),
        m in 0usize..3,
    ) {
        let plan: Vec<f64> = plan.into_iter().map(f64::from).collect();
        let g = Regime::fixed(&plan);
        let a = &plan[..m];
        let v1 = apply_regime(&g, &History::new(m, &l1[..=m], a), &Kind::Binary).unwrap();
        let v2 = apply_regime(&g, &History::new(m, &l2[..=m], a), &Kind::Binary).unwrap();
        prop_assert_eq!(v1, v2);
        prop_assert_eq!(v1, plan[m]);
    }

    #[test]
    fn blips_are_monotone_and_invertible(t in traj(2, true), psi in proptest::array::uniform3(-0.5f64..0.5), u0 in 0.1f64..5.0, du in 0.01f64..2.0) {
        for family in [BlipFamily::Additive, BlipFamily::Multiplicative] {
            let spec = BlipSpec::treatment_history_interaction(family, psi);
            let r = compute_h(&spec, &t).unwrap();
            prop_assert!(r.jacobian > 0.0);
            let back = h_inverse(&spec, r.h, &t.l, &t.a).unwrap();
            prop_assert!((back - t.y).abs() <= 1e-12 * t.y.abs().max(1.0));
            for m in 0..t.a.len() {
                let hist = t.history(m);
                let lo = blip(&spec, u0, &hist, t.a[m]).unwrap();
                let hi = blip(&spec, u0 + du, &hist, t.a[m]).unwrap();
                prop_assert!(hi > lo);
                let inv = blip_inverse(&spec, lo, &hist, t.a[m]).unwrap();
                prop_assert!((inv - u0).abs() <= 1e-12 * u0.max(1.0));
            }
        }
    }

    #[test]
    fn additive_h_is_outcome_plus_blip_sum(t in traj(3, false), psi in proptest::array::uniform3(-4.0f64..4.0)) {
        let spec = BlipSpec::treatment_history_interaction(BlipFamily::Additive, psi);
        let mut sum = t.y;
        for m in 0..t.a.len() {
            let b = spec.basis(m, &t.l[..=m], &t.a[..=m]).unwrap();
            sum += b.iter().zip(&spec.psi).map(|(x, p)| x * p).sum::<f64>();
        }
        prop_assert!((compute_h(&spec, &t).unwrap().h - sum).abs() < 1e-12 * sum.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exact_and_mc_g_formula_agree(b0 in -1.5f64..1.5, b1 in -1.5f64..1.5, seed in any::<u64>(), dynamic in any::<bool>()) {
        let table = enumerate_joint(&SequentialConfig::binary_toy(b0, b1), None).unwrap();
        let g = if dynamic { Regime::follow_covariate() } else { Regime::fixed(&[1.0, 0.0]) };
        let exact = g_formula_exact(&table, &g).unwrap();
        let draws = 20_000;
        let mc = g_formula_mc(&TableLaws { table: &table }, &g, draws, seed).unwrap();
        for (y, s) in exact.survivor_grid() {
            prop_assert!((mc.survivor(y).unwrap() - s).abs() < dkw_envelope(draws));
        }
    }

    #[test]
    fn dynamic_copy_of_a_static_plan_is_the_same_law(b0 in -1.5f64..1.5, b1 in -1.5f64..1.5, a0 in 0u8..2, a1 in 0u8..2) {
        let table = enumerate_joint(&SequentialConfig::binary_toy(b0, b1), None).unwrap();
        let plan = [f64::from(a0), f64::from(a1)];
        let copy = Regime::dynamic("copy", move |h| plan[h.m]);
        let s = g_formula_exact(&table, &Regime::fixed(&plan)).unwrap();
        let d = g_formula_exact(&table, &copy).unwrap();
        prop_assert_eq!(s.survivor_grid(), d.survivor_grid());
    }
}
