use proptest::prelude::*;
use switchtail::spectral::{
    classify_regime, default_grid, kappa_from_generator, kappa_from_ms, random_ergodic_model, rho_ms, s1,
    sign_changes, solve_kappa, Regime, CROSS_TOL,
};
use switchtail::RngStream;

#[test]
fn twenty_random_heavy_models_agree_across_methods() {
    let mut rng = RngStream::new(2024, 0).rng();
    for k in 0..20 {
        let n = 2 + k % 5;
        let m = random_ergodic_model(&mut rng, n, true);
        let sol = solve_kappa(&m).unwrap();
        let ms = kappa_from_ms(&m, |s| rho_ms(&m, s)).unwrap();
        let gs = kappa_from_generator(&m).unwrap();
        assert!((ms - gs).abs() <= CROSS_TOL, "model {k}: {ms} vs {gs}");
        assert!(sol.kappa > 0.0 && sol.kappa < s1(&m));
    }
}

fn crossings(m: &switchtail::SwitchingModel) -> (usize, Vec<f64>) {
    let curve: Vec<(f64, f64)> = default_grid(m, 64)
        .into_iter()
        .map(|s| (s, rho_ms(m, s).unwrap() - 1.0))
        .collect();
    (sign_changes(&curve), curve.iter().map(|p| p.1).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn light_models_stay_below_one(seed in any::<u64>(), n in 2usize..=6) {
        let m = random_ergodic_model(&mut RngStream::new(seed, 0).rng(), n, false);
        prop_assert_eq!(classify_regime(&m).unwrap(), Regime::Light);
        let (changes, values) = crossings(&m);
        prop_assert_eq!(changes, 0);
        prop_assert!(values.iter().all(|v| *v < 0.0));
    }

    #[test]
    fn heavy_models_cross_once(seed in any::<u64>(), n in 2usize..=6) {
        let m = random_ergodic_model(&mut RngStream::new(seed, 0).rng(), n, true);
        prop_assert_eq!(classify_regime(&m).unwrap(), Regime::Heavy);
        prop_assert_eq!(crossings(&m).0, 1);
    }
}
