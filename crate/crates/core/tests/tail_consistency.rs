//! Full-scale stationary simulations checked against the spectral exponent.

use switchtail::montecarlo::{
    hill_estimate, hill_plateau, sample_stationary, SimulationPlan, DEFAULT_K_FRAC, PLATEAU_FRACS,
};
use switchtail::spectral::{solve_kappa, two_state_kappa};
use switchtail::SwitchingModel;

fn swap(a: [f64; 2], lambda: [f64; 2]) -> SwitchingModel {
    SwitchingModel::new(a.to_vec(), vec![1.0, 1.0], lambda.to_vec(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
}

/// Two-sample Kolmogorov statistic scaled by `sqrt(nm / (n + m))`.
fn ks_two_sample(mut x: Vec<f64>, mut y: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let t = x[i].min(y[j]);
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d * ((n * m) as f64 / (n + m) as f64).sqrt()
}

#[test]
fn recorded_law_is_stationary_one_step_later() {
    let m = swap([1.0, -2.0], [3.0, 3.0]);
    let plan = SimulationPlan::auto(&m, 100_000, 71).unwrap();
    let later = SimulationPlan {
        burn_in_steps: plan.burn_in_steps + 1,
        seed: 72,
        ..plan
    };
    let x = sample_stationary(&m, &plan).unwrap().values;
    let y = sample_stationary(&m, &later).unwrap().values;
    let stat = ks_two_sample(x, y);
    // 1.95 is the 1e-3 critical value
    assert!(stat < 1.95, "KS statistic {stat}");
}

#[test]
fn hill_recovers_spectral_exponent() {
    for (a, lambda, seed) in [([1.0, -2.0], [2.0, 2.0], 101), ([1.0, -2.0], [3.0, 3.0], 102), ([1.0, -2.0], [5.0, 5.0], 103)] {
        let m = swap(a, lambda);
        let kappa = solve_kappa(&m).unwrap().kappa;
        assert!((kappa - two_state_kappa(a, lambda)).abs() < 1e-10);
        let plan = SimulationPlan::auto(&m, 1_000_000, seed).unwrap();
        let values = sample_stationary(&m, &plan).unwrap().values;
        let est = hill_estimate(&values, DEFAULT_K_FRAC, Some(kappa)).unwrap();
        let ratio = est.kappa_hat / kappa;
        assert!((0.85..=1.15).contains(&ratio), "kappa {kappa}: estimate {}", est.kappa_hat);
        let plateau = hill_plateau(&values, &PLATEAU_FRACS).unwrap();
        assert!(plateau.passes, "kappa {kappa}: plateau {:?}", plateau.points);
        assert!(est.calibration.prefactor_ratio < 3.0 && est.calibration.prefactor_min > 0.0);
    }
}

#[test]
fn light_model_has_no_plateau() {
    let m = swap([-1.0, -2.0], [1.0, 1.0]);
    let plan = SimulationPlan::auto(&m, 1_000_000, 104).unwrap();
    let values = sample_stationary(&m, &plan).unwrap().values;
    let plateau = hill_plateau(&values, &PLATEAU_FRACS).unwrap();
    assert!(!plateau.passes && plateau.drifts_upward, "{:?}", plateau.points);
}
