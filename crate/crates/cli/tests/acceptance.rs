//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.

use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::Instant;

use switchtail::linalg::expm;
use switchtail::model::alpha_of;
use switchtail::montecarlo::{
    default_cutoff_drop, default_delta, hill_estimate, hill_plateau, moment_probe, sample_stationary,
    simulate_walk_max, tail_symmetry_check, SimulationPlan, TailEstimate, WalkPlan, DEFAULT_K_FRAC, PLATEAU_FRACS,
};
use switchtail::spectral::{
    classify_regime, default_grid, derivative_at_zero, growth_rate, kappa_from_generator, kappa_from_ms,
    monte_carlo_operator_check, random_ergodic_model, rho_ms, second_differences, semigroup_defect, sign_changes,
    solve_kappa, tilted_generator, uniform_grid, Regime,
};
use switchtail::{RngStream, SwitchingModel};

type Outcome = (bool, String);

fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model(name: &str) -> SwitchingModel {
    SwitchingModel::from_path(models_dir().join(name)).expect("model file")
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_switchtail"))
        .args(args)
        .output()
        .expect("run switchtail")
}

fn model_arg(name: &str) -> String {
    models_dir().join(name).to_string_lossy().into_owned()
}

fn analyze_json(name: &str) -> (serde_json::Value, f64) {
    let start = Instant::now();
    let out = cli(&["analyze", "--model", &model_arg(name)]);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(out.status.success(), "analyze {name} failed: {}", String::from_utf8_lossy(&out.stderr));
    (serde_json::from_slice(&out.stdout).expect("analyze JSON"), elapsed)
}

fn closed_form_kappa() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, want) in [("two_state_sixth.json", 1.0 / 6.0), ("two_state_heavy.json", 1.5)] {
        let (report, secs) = analyze_json(name);
        let kappa = report["kappa"].as_f64().unwrap_or(f64::NAN);
        let heavy = report["regime"] == "Heavy";
        let err = (kappa - want).abs();
        ok &= heavy && err <= 1e-10 && secs < 1.0;
        detail.push(format!("kappa {kappa:.12} (err {err:.1e}, {secs:.2}s)"));
    }
    (ok, detail.join("; "))
}

fn dual_method_agreement() -> Outcome {
    let mut rng = RngStream::new(20_240_601, 0).rng();
    let mut worst = 0.0f64;
    for k in 0..20 {
        let m = random_ergodic_model(&mut rng, 2 + k % 5, true);
        assert!(alpha_of(&m).unwrap() < 0.0);
        let ms = kappa_from_ms(&m, |s| rho_ms(&m, s)).expect("M_s root");
        let gs = kappa_from_generator(&m).expect("G_s root");
        worst = worst.max((ms - gs).abs());
    }
    (worst <= 1e-8, format!("max |kappa_Ms - kappa_Gs| = {worst:.2e} over 20 models"))
}

fn regime_dichotomy() -> Outcome {
    let mut rng = RngStream::new(7_007, 0).rng();
    let mut ok = true;
    let (mut light_max, mut heavy_bad) = (0.0f64, 0usize);
    for k in 0..100 {
        let heavy = k % 2 == 1;
        let m = random_ergodic_model(&mut rng, 2 + k % 5, heavy);
        let curve: Vec<(f64, f64)> = default_grid(&m, 64)
            .into_iter()
            .map(|s| (s, rho_ms(&m, s).unwrap() - 1.0))
            .collect();
        let regime = classify_regime(&m).unwrap();
        if heavy {
            let good = regime == Regime::Heavy && sign_changes(&curve) == 1;
            heavy_bad += usize::from(!good);
            ok &= good;
        } else {
            light_max = curve.iter().map(|p| p.1 + 1.0).fold(light_max, f64::max);
            ok &= regime == Regime::Light && curve.iter().all(|p| p.1 < 0.0);
        }
    }
    let (report, _) = analyze_json("two_state_light.json");
    let reported_light = report["regime"] == "Light" && report.get("kappa").is_none();
    ok &= reported_light;
    (
        ok,
        format!("light max rho(M_s) = {light_max:.4}, heavy models without a single crossing: {heavy_bad}, analyze reports Light: {reported_light}"),
    )
}

fn operator_identification() -> Outcome {
    let m = random_ergodic_model(&mut RngStream::new(31, 0).rng(), 3, true);
    let kappa = solve_kappa(&m).unwrap().kappa;
    let mut worst = 0.0f64;
    for s in [0.0, 0.7, kappa] {
        for delta in [0.25, 0.5] {
            let exact = expm(&(tilted_generator(&m, s) * delta));
            for i in 0..3 {
                let row = monte_carlo_operator_check(&m, s, delta, i, 1_000_000, 4_242);
                for j in 0..3 {
                    worst = worst.max((row.mean[j] - exact[(i, j)]).abs() / row.std_error[j]);
                }
            }
        }
    }
    (worst <= 3.0, format!("max deviation {worst:.2} SE over 54 entries, kappa = {kappa:.6}"))
}

fn semigroup_convexity_derivative() -> Outcome {
    let mut ok = true;
    let (mut defect, mut min_d2, mut deriv_err) = (0.0f64, f64::INFINITY, 0.0f64);
    for name in ["two_state_heavy.json", "three_state.json", "two_state_light.json"] {
        let m = model(name);
        let alpha = alpha_of(&m).unwrap();
        for s in [0.0, 0.5, 1.0, 1.4] {
            defect = defect.max(semigroup_defect(&m, s, 0.5, 0.25)).max(semigroup_defect(&m, s, 1.0, 1.0));
        }
        let grid = match classify_regime(&m).unwrap() {
            Regime::Heavy => default_grid(&m, 64),
            Regime::Light => uniform_grid(10.0, 64),
        };
        let curve: Vec<(f64, f64)> = grid.iter().map(|&s| (s, growth_rate(&m, s).unwrap())).collect();
        min_d2 = second_differences(&curve).into_iter().fold(min_d2, f64::min);
        for delta in [0.5, 1.0] {
            deriv_err = deriv_err.max((derivative_at_zero(&m, delta).unwrap() - delta * alpha).abs());
        }
    }
    ok &= defect <= 1e-10 && min_d2 >= -1e-9 && deriv_err <= 1e-6;
    (
        ok,
        format!("semigroup defect {defect:.1e}, min second difference {min_d2:.2e}, derivative error {deriv_err:.1e}"),
    )
}

struct HeavyRun {
    values: Vec<f64>,
    estimate: TailEstimate,
    secs: f64,
}

fn heavy_run(m: &SwitchingModel, kappa: f64, delta: f64, seed: u64) -> HeavyRun {
    let start = Instant::now();
    let plan = SimulationPlan::with_delta(m, delta, 1_000_000, seed).unwrap();
    let values = sample_stationary(m, &plan).unwrap().values;
    let estimate = hill_estimate(&values, DEFAULT_K_FRAC, Some(kappa)).unwrap();
    HeavyRun {
        values,
        estimate,
        secs: start.elapsed().as_secs_f64(),
    }
}

fn tail_exponent(run: &HeavyRun) -> Outcome {
    let e = &run.estimate;
    let plateau = hill_plateau(&run.values, &PLATEAU_FRACS).unwrap();
    let c = e.calibration;
    let ok = (1.275..=1.725).contains(&e.kappa_hat) && plateau.passes && c.prefactor_ratio < 3.0 && c.prefactor_min > 0.0;
    (
        ok,
        format!(
            "kappa_hat {:.4} (k = {}), plateau ratio {:.3}, prefactor ratio {:.3} on [{:.2}, {:.2}] min {:.3}, {:.0}s",
            e.kappa_hat, e.k_used, plateau.ratio, c.prefactor_ratio, c.t_low, c.t_high, c.prefactor_min, run.secs
        ),
    )
}

fn light_moments(heavy: &HeavyRun) -> Outcome {
    let m = model("two_state_light.json");
    let plan = SimulationPlan::auto(&m, 1_000_000, 42).unwrap();
    let values = sample_stationary(&m, &plan).unwrap().values;
    let light = &moment_probe(&values, &[8.0])[0];
    let heavy = &moment_probe(&heavy.values, &[2.0])[0];
    (
        light.stable && !heavy.stable,
        format!(
            "light order-8 ratios {:.3}/{:.3} (stable {}), heavy order-2 ratios {:.3}/{:.3} (stable {})",
            light.ratios[0], light.ratios[1], light.stable, heavy.ratios[0], heavy.ratios[1], heavy.stable
        ),
    )
}

fn tail_symmetry(run: &HeavyRun) -> Outcome {
    let points = tail_symmetry_check(&run.values, &[0.9, 0.99, 0.999]).unwrap();
    let zs: Vec<String> = points.iter().map(|p| format!("{:.2}", p.z)).collect();
    (points.iter().all(|p| p.z.abs() < 4.0), format!("z at 90/99/99.9%: {}", zs.join(", ")))
}

fn walk_maximum(m: &SwitchingModel, kappa: f64) -> Outcome {
    let start = Instant::now();
    let plan = WalkPlan {
        delta: default_delta(m),
        n_replicas: 1_000_000,
        cutoff_drop: default_cutoff_drop(kappa),
        seed: 42,
    };
    let est = simulate_walk_max(m, kappa, &plan).unwrap();
    let rows_ok = est.h_row_sums.iter().zip(&est.h_row_sum_se).all(|(s, se)| s + 3.0 * se < 1.0);
    let rho_ok = est.rho_h_hat + 3.0 * est.rho_h_se < 1.0;
    let band_ok = est.central_band_ratio <= 2.0 && est.central_floor > 0.0;
    (
        rows_ok && rho_ok && band_ok && est.truncated == 0,
        format!(
            "band ratio {:.3} floor {:.3} on t in [{:.2}, {:.2}], row sums {:?}, rho_H {:.4} +- {:.4}, {:.0}s",
            est.central_band_ratio,
            est.central_floor,
            est.central_range.0,
            est.central_range.1,
            est.h_row_sums.iter().map(|s| (s * 1e4).round() / 1e4).collect::<Vec<_>>(),
            est.rho_h_hat,
            est.rho_h_se,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn delta_independence(full: &HeavyRun, half: &HeavyRun) -> Outcome {
    let half_width = |e: &TailEstimate| 0.5 * (e.ci_high - e.ci_low);
    let diff = (full.estimate.kappa_hat - half.estimate.kappa_hat).abs();
    let allowed = half_width(&full.estimate) + half_width(&half.estimate);
    (
        diff < allowed,
        format!(
            "kappa_hat {:.4} at delta vs {:.4} at delta/2, |diff| {diff:.4} < {allowed:.4}, {:.0}s",
            full.estimate.kappa_hat, half.estimate.kappa_hat, half.secs
        ),
    )
}

fn ou_oracle() -> Outcome {
    let m = model("ou_degenerate.json");
    let plan = SimulationPlan::auto(&m, 200_000, 42).unwrap();
    let s = sample_stationary(&m, &plan).unwrap().summary();
    // Var of the sample variance for Gaussian data: 2 v^2 / (n - 1)
    let se = (2.0 * 0.25 / (s.n - 1) as f64).sqrt();
    let z = (s.variance - 0.5) / se;
    (z.abs() < 3.0, format!("variance {:.5}, {z:.2} SE from 0.5", s.variance))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let heavy = model_arg("two_state_heavy.json");
    let samples_file = path("reference.bin");
    let seeded = cli(&["simulate", "--model", &heavy, "--samples", "20000", "--seed", "7", "--format", "bin", "--out", &samples_file]);
    assert!(seeded.status.success());

    let commands: Vec<(&str, Vec<String>)> = vec![
        ("analyze", vec!["analyze".into(), "--model".into(), heavy.clone()]),
        ("simulate csv", vec!["simulate".into(), "--model".into(), heavy.clone(), "--samples".into(), "5000".into()]),
        ("simulate bin", vec!["simulate".into(), "--model".into(), heavy.clone(), "--samples".into(), "5000".into(), "--format".into(), "bin".into()]),
        ("tail", vec!["tail".into(), "--samples-file".into(), samples_file.clone(), "--model".into(), heavy.clone()]),
        ("walkmax", vec!["walkmax".into(), "--model".into(), heavy.clone(), "--replicas".into(), "20000".into()]),
        ("check", vec!["check".into(), "--model".into(), model_arg("three_state.json"), "--mc-paths".into(), "20000".into()]),
    ];
    let mut mismatched = Vec::new();
    for (label, args) in &commands {
        let mut artifacts = Vec::new();
        for (run, workers) in [(0, "1"), (1, "1"), (2, "4"), (3, "4")] {
            let out_file = path(&format!("out-{run}"));
            let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
            full.extend(["--seed", "11", "--workers", workers, "--out", &out_file]);
            let output = cli(&full);
            assert!(output.status.success(), "{label}: {}", String::from_utf8_lossy(&output.stderr));
            artifacts.push((output.stdout, std::fs::read(&out_file).unwrap()));
        }
        if artifacts.windows(2).any(|w| w[0] != w[1]) {
            mismatched.push(*label);
        }
    }
    (
        mismatched.is_empty(),
        format!("{} subcommand runs x 2 repeats x workers {{1, 4}}; mismatched: {mismatched:?}", commands.len()),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |n: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let (ok, detail) = &outcome;
        println!(
            "criterion {n:>2} {:<32} {} ({:.1}s) {detail}",
            name,
            if *ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        results.push((n, name, outcome));
    };

    record(1, "closed-form kappa", &mut closed_form_kappa);
    record(2, "dual-method agreement", &mut dual_method_agreement);
    record(3, "regime dichotomy", &mut regime_dichotomy);
    record(4, "operator identification", &mut operator_identification);
    record(5, "semigroup/convexity/derivative", &mut semigroup_convexity_derivative);

    let heavy = model("two_state_heavy.json");
    let kappa = solve_kappa(&heavy).unwrap().kappa;
    let delta = default_delta(&heavy);
    let full = heavy_run(&heavy, kappa, delta, 42);
    record(6, "tail exponent recovery", &mut || tail_exponent(&full));
    record(7, "light-tail moments", &mut || light_moments(&full));
    record(8, "tail symmetry", &mut || tail_symmetry(&full));
    record(9, "walk maximum", &mut || walk_maximum(&heavy, kappa));
    let half = heavy_run(&heavy, kappa, 0.5 * delta, 43);
    record(10, "delta independence", &mut || delta_independence(&full, &half));
    record(11, "OU degenerate oracle", &mut ou_oracle);
    record(12, "determinism", &mut determinism);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2 .0).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
