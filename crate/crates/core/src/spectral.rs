//! Tail regime and exponent.
//!
//! Two matrices carry the spectral information:
//!
//! * `M_s(i,j) = q(i,j) lambda(i) / (lambda(i) - s a(i))`, defined for
//!   `s < s1 = min{lambda(i)/a(i) : a(i) > 0}`. The exponent kappa is the
//!   unique `s` in `(0, s1)` with `rho(M_s) = 1`.
//! * the tilted generator `G_s = Q + s diag(a)`. The moment operator
//!   `A_(s,delta)(i,j) = E_i[Phi^s 1{X_delta = j}]` equals `exp(delta G_s)`,
//!   so `log rho(A_(s,delta)) = delta Lambda(s)` with `Lambda` the dominant
//!   eigenvalue of `G_s`. Kappa is also the positive zero of `Lambda`.
//!
//! Both routes are solved independently and must agree.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jump_process::{JumpTables, PathCursor};
use crate::linalg::{expm, metzler_dominant, spectral_radius, PerronPair};
use crate::model::{generator, require_ergodic, SwitchingModel};
use crate::rng::RngStream;

/// Absolute/relative tolerance on the root in `s`.
pub const ROOT_TOL: f64 = 1e-12;
/// Maximum disagreement between the two kappa routes.
pub const CROSS_TOL: f64 = 1e-8;
const MAX_BISECTIONS: usize = 200;
const MAX_BRACKET_STEPS: usize = 200;
const BRACKET_LO: f64 = 1e-8;
/// Step of the one-sided difference used for the slope of `Lambda` at 0.
pub const DERIVATIVE_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Light,
    Heavy,
}

/// `G_s = Q + s diag(a)`.
pub fn tilted_generator(model: &SwitchingModel, s: f64) -> DMatrix<f64> {
    let mut g = generator(model).q;
    for (i, a) in model.a().iter().enumerate() {
        g[(i, i)] += s * a;
    }
    g
}

/// First pole of the `M_s` entries; infinite when no drift is positive.
pub fn s1(model: &SwitchingModel) -> f64 {
    model
        .a()
        .iter()
        .zip(model.lambda())
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, l)| l / a)
        .fold(f64::INFINITY, f64::min)
}

pub fn ms_matrix(model: &SwitchingModel, s: f64) -> Result<DMatrix<f64>> {
    let pole = s1(model);
    if !(s >= 0.0 && s < pole) {
        return Err(Error::InvalidArgument(format!(
            "M_s is defined for 0 <= s < s1 = {pole}, got s = {s}"
        )));
    }
    let n = model.n_states();
    let (a, lambda, q) = (model.a(), model.lambda(), model.q());
    Ok(DMatrix::from_fn(n, n, |i, j| {
        q[i][j] * lambda[i] / (lambda[i] - s * a[i])
    }))
}

pub fn rho_ms(model: &SwitchingModel, s: f64) -> Result<f64> {
    Ok(spectral_radius(&ms_matrix(model, s)?)?.value)
}

/// Dominant eigenvalue `Lambda(s)` of the tilted generator with its vector.
pub fn dominant_eigenvalue_general(model: &SwitchingModel, s: f64) -> Result<PerronPair> {
    metzler_dominant(&tilted_generator(model, s))
}

pub fn growth_rate(model: &SwitchingModel, s: f64) -> Result<f64> {
    Ok(dominant_eigenvalue_general(model, s)?.value)
}

/// Light iff every drift is nonpositive. Requires the ergodicity condition.
pub fn classify_regime(model: &SwitchingModel) -> Result<Regime> {
    require_ergodic(model)?;
    Ok(if model.max_drift() <= 0.0 {
        Regime::Light
    } else {
        Regime::Heavy
    })
}

/// Result of the two kappa computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaSolution {
    /// Root of `rho(M_s) = 1`.
    pub kappa: f64,
    /// Positive root of `Lambda(s) = 0`, found independently.
    pub kappa_generator: f64,
    /// `|rho(M_kappa) - 1|`
    pub residual_ms: f64,
    /// `|Lambda(kappa)|`
    pub residual_gs: f64,
}

fn tol_at(s: f64) -> f64 {
    ROOT_TOL.max(ROOT_TOL * s.abs())
}

/// Bisection for an increasing-through-zero function with `f(lo) < 0 <= f(hi)`.
/// Continues past the `s` tolerance until `|f| <= ROOT_TOL` or the bracket
/// cannot shrink further.
fn bisect<F>(mut lo: f64, mut hi: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut best = (f64::INFINITY, 0.5 * (lo + hi));
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid)?;
        if v.abs() < best.0 {
            best = (v.abs(), mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol_at(mid) && best.0 <= ROOT_TOL {
            break;
        }
    }
    // the midpoint of a tight bracket, unless an evaluated point was closer
    let mid = 0.5 * (lo + hi);
    Ok(if (best.1 - mid).abs() <= tol_at(mid) { best.1 } else { mid })
}

/// Kappa from `rho(M_s) = 1` for an arbitrary `rho(M_s)` evaluator.
pub fn kappa_from_ms<F>(model: &SwitchingModel, rho: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let pole = s1(model);
    if !pole.is_finite() {
        return Err(Error::LightRegime);
    }
    let f = |s: f64| rho(s).map(|r| r - 1.0);

    let mut lo = BRACKET_LO.min(pole / 4.0);
    let mut steps = 0;
    while f(lo)? >= 0.0 {
        lo *= 10.0;
        steps += 1;
        if lo >= pole / 2.0 || steps > MAX_BRACKET_STEPS {
            return Err(Error::BracketingFailure(format!(
                "rho(M_s) >= 1 already near s = 0 (pole s1 = {pole})"
            )));
        }
    }
    let mut hi = pole / 2.0;
    let mut doublings = 0;
    while f(hi)? <= 0.0 {
        hi = pole - (pole - hi) / 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_STEPS || hi >= pole {
            return Err(Error::BracketingFailure(format!(
                "rho(M_s) stayed below 1 up to s = {hi} (pole s1 = {pole})"
            )));
        }
    }
    if lo >= hi {
        // both ends ended on the same side of the root below s1/2
        lo = BRACKET_LO;
    }
    bisect(lo, hi, f)
}

/// Kappa as the positive zero of `Lambda`, via the increasing function
/// `Lambda(s)/s`. Does not use `s1`.
pub fn kappa_from_generator(model: &SwitchingModel) -> Result<f64> {
    let f = |s: f64| growth_rate(model, s).map(|l| l / s);
    let lo = BRACKET_LO;
    if f(lo)? >= 0.0 {
        return Err(Error::BracketingFailure(
            "Lambda(s)/s is not negative near 0".into(),
        ));
    }
    let mut hi = 1.0;
    let mut steps = 0;
    while f(hi)? <= 0.0 {
        hi *= 2.0;
        steps += 1;
        if steps > MAX_BRACKET_STEPS {
            return Err(Error::BracketingFailure(
                "Lambda(s) stays negative; no positive zero".into(),
            ));
        }
    }
    bisect(lo, hi, f)
}

/// Solves for kappa by both routes and cross-checks them.
pub fn solve_kappa(model: &SwitchingModel) -> Result<KappaSolution> {
    solve_kappa_with(model, |s| rho_ms(model, s))
}

/// As [`solve_kappa`], with the `rho(M_s)` evaluator supplied by the caller.
pub fn solve_kappa_with<F>(model: &SwitchingModel, rho: F) -> Result<KappaSolution>
where
    F: Fn(f64) -> Result<f64>,
{
    if classify_regime(model)? == Regime::Light {
        return Err(Error::LightRegime);
    }
    let kappa = kappa_from_ms(model, &rho)?;
    let kappa_generator = kappa_from_generator(model)?;
    let residual_ms = (rho(kappa)? - 1.0).abs();
    let residual_gs = growth_rate(model, kappa)?.abs();
    if (kappa - kappa_generator).abs() > CROSS_TOL {
        return Err(Error::MethodDisagreement {
            ms: kappa,
            gs: kappa_generator,
        });
    }
    Ok(KappaSolution {
        kappa,
        kappa_generator,
        residual_ms,
        residual_gs,
    })
}

/// The closed form `kappa = lambda(1)/a(1) + lambda(2)/a(2)` for a
/// two-state swap kernel.
pub fn two_state_kappa(a: [f64; 2], lambda: [f64; 2]) -> f64 {
    lambda[0] / a[0] + lambda[1] / a[1]
}

/// Default tilt grid: geometric towards `s1` for heavy models, linear on
/// `(0, 10]` for light ones.
pub fn default_grid(model: &SwitchingModel, points: usize) -> Vec<f64> {
    let pole = s1(model);
    if pole.is_finite() {
        let (lo, hi) = (pole * 1e-4, pole * (1.0 - 1e-4));
        let ratio = (hi / lo).powf(1.0 / (points - 1) as f64);
        (0..points).map(|k| lo * ratio.powi(k as i32)).collect()
    } else {
        (1..=points).map(|k| 10.0 * k as f64 / points as f64).collect()
    }
}

/// Uniform grid on `(0, upper]`.
pub fn uniform_grid(upper: f64, points: usize) -> Vec<f64> {
    (1..=points).map(|k| upper * k as f64 / points as f64).collect()
}

/// Generalised second differences `2 (w f[k-1] + (1-w) f[k+1] - f[k])`,
/// which reduce to `f[k+1] - 2 f[k] + f[k-1]` on a uniform grid.
pub fn second_differences(curve: &[(f64, f64)]) -> Vec<f64> {
    curve
        .windows(3)
        .map(|w| {
            let (s0, f0) = w[0];
            let (s1, f1) = w[1];
            let (s2, f2) = w[2];
            let weight = (s2 - s1) / (s2 - s0);
            2.0 * (weight * f0 + (1.0 - weight) * f2 - f1)
        })
        .collect()
}

/// Number of sign changes of `rho(M_s) - 1` along a curve.
pub fn sign_changes(curve: &[(f64, f64)]) -> usize {
    curve
        .windows(2)
        .filter(|w| (w[0].1 - 1.0).signum() != (w[1].1 - 1.0).signum())
        .count()
}

/// `max |exp(delta G) exp(gamma G) - exp((delta + gamma) G)|`.
pub fn semigroup_defect(model: &SwitchingModel, s: f64, delta: f64, gamma: f64) -> f64 {
    let g = tilted_generator(model, s);
    let lhs = expm(&(&g * delta)) * expm(&(&g * gamma));
    let rhs = expm(&(&g * (delta + gamma)));
    (lhs - rhs).amax()
}

/// Spectral radius of `exp(delta G_s)`, computed from the matrix exponential.
pub fn operator_radius(model: &SwitchingModel, s: f64, delta: f64) -> Result<f64> {
    Ok(spectral_radius(&expm(&(tilted_generator(model, s) * delta)))?.value)
}

/// Right-hand slope of `delta Lambda(s)` at 0 by a Richardson-extrapolated
/// one-sided difference with base step [`DERIVATIVE_STEP`].
pub fn derivative_at_zero(model: &SwitchingModel, delta: f64) -> Result<f64> {
    let h = DERIVATIVE_STEP;
    let base = growth_rate(model, 0.0)?;
    let d_h = (growth_rate(model, h)? - base) / h;
    let d_half = (growth_rate(model, h / 2.0)? - base) / (h / 2.0);
    Ok(delta * (2.0 * d_half - d_h))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub alpha: f64,
    pub regime: Regime,
    /// `None` encodes an infinite pole (no positive drift).
    pub s1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_generator: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_gs: Option<f64>,
    pub delta: f64,
    pub derivative_at_zero: f64,
    pub semigroup_defect: f64,
    pub min_second_difference: f64,
    pub rho_ms_curve: Vec<(f64, f64)>,
    pub log_rho_as_curve: Vec<(f64, f64)>,
}

impl SpectralReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Regime, kappa, and the diagnostic curves on `s_grid` (default grid when
/// empty). `M_s` is only sampled at grid points below `s1`.
pub fn diagnostics(model: &SwitchingModel, delta: f64, s_grid: &[f64]) -> Result<SpectralReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let alpha = require_ergodic(model)?;
    let regime = classify_regime(model)?;
    let pole = s1(model);
    let grid: Vec<f64> = if s_grid.is_empty() {
        default_grid(model, 64)
    } else {
        s_grid.to_vec()
    };
    if grid.iter().any(|&s| s < 0.0 || !s.is_finite()) {
        return Err(Error::InvalidArgument("tilt grid must be finite and nonnegative".into()));
    }

    let solution = match regime {
        Regime::Heavy => Some(solve_kappa(model)?),
        Regime::Light => None,
    };

    let rho_ms_curve = grid
        .par_iter()
        .filter(|&&s| s < pole)
        .map(|&s| rho_ms(model, s).map(|r| (s, r)))
        .collect::<Result<Vec<_>>>()?;
    let log_rho_as_curve = grid
        .par_iter()
        .map(|&s| growth_rate(model, s).map(|l| (s, delta * l)))
        .collect::<Result<Vec<_>>>()?;
    let min_second_difference = second_differences(&log_rho_as_curve)
        .into_iter()
        .fold(f64::INFINITY, f64::min);

    let probe = solution.map(|k| k.kappa).unwrap_or(1.0);
    let semigroup_defect = semigroup_defect(model, probe, delta, 0.5 * delta);

    Ok(SpectralReport {
        alpha,
        regime,
        s1: pole.is_finite().then_some(pole),
        kappa: solution.map(|k| k.kappa),
        kappa_generator: solution.map(|k| k.kappa_generator),
        residual_ms: solution.map(|k| k.residual_ms),
        residual_gs: solution.map(|k| k.residual_gs),
        delta,
        derivative_at_zero: derivative_at_zero(model, delta)?,
        semigroup_defect,
        min_second_difference,
        rho_ms_curve,
        log_rho_as_curve,
    })
}

/// Monte Carlo estimate of one row of the moment operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorRowEstimate {
    pub start_state: usize,
    pub s: f64,
    pub delta: f64,
    pub samples: u64,
    /// Estimates of `E_i[Phi^s 1{X_delta = j}]`.
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

const OPERATOR_CHUNK: u64 = 1 << 16;

/// Estimates `E_i[Phi_1^s 1{X_delta = j}]` for every `j` from exact paths.
pub fn monte_carlo_operator_check(
    model: &SwitchingModel,
    s: f64,
    delta: f64,
    start_state: usize,
    samples: u64,
    seed: u64,
) -> OperatorRowEstimate {
    let n = model.n_states();
    let tables = JumpTables::new(model);
    let a = model.a();
    let chunks = samples.div_ceil(OPERATOR_CHUNK);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = OPERATOR_CHUNK.min(samples - c * OPERATOR_CHUNK);
            let mut rng = RngStream::for_task(seed, crate::rng::domain::OPERATOR, c).rng();
            let mut sum = vec![0.0; n];
            let mut sum_sq = vec![0.0; n];
            let mut buf = Vec::with_capacity(8);
            for _ in 0..count {
                let mut cursor = PathCursor::start(&tables, start_state, &mut rng);
                cursor.advance(delta, &mut rng, &mut buf);
                let log_phi: f64 = buf.iter().map(|seg| a[seg.state] * seg.duration).sum();
                let w = (s * log_phi).exp();
                let end = cursor.state();
                sum[end] += w;
                sum_sq[end] += w * w;
            }
            (sum, sum_sq)
        })
        .collect();
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for (s_part, sq_part) in partials {
        for j in 0..n {
            sum[j] += s_part[j];
            sum_sq[j] += sq_part[j];
        }
    }
    let m = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|x| x / m).collect();
    let std_error = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, mu)| ((sq / m - mu * mu).max(0.0) / (m - 1.0)).sqrt())
        .collect();
    OperatorRowEstimate {
        start_state,
        s,
        delta,
        samples,
        mean,
        std_error,
    }
}

/// Random irreducible model with dense kernel, for property tests and
/// cross-checks. `heavy` forces at least one positive drift.
pub fn random_ergodic_model<R: Rng + ?Sized>(rng: &mut R, n: usize, heavy: bool) -> SwitchingModel {
    loop {
        let lambda: Vec<f64> = (0..n).map(|_| 0.2 + 3.0 * rng.random::<f64>()).collect();
        let mut a: Vec<f64> = (0..n).map(|_| -3.0 + 5.0 * rng.random::<f64>()).collect();
        if !heavy {
            a.iter_mut().for_each(|x| *x = -x.abs());
        }
        let sigma: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
        let q: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let w: Vec<f64> = (0..n)
                    .map(|j| if i == j { 0.0 } else { 0.05 + rng.random::<f64>() })
                    .collect();
                let total: f64 = w.iter().sum();
                let mut row: Vec<f64> = w.iter().map(|x| x / total).collect();
                // absorb rounding into the largest off-diagonal entry
                let err = 1.0 - row.iter().sum::<f64>();
                let k = (0..n).filter(|&j| j != i).max_by(|&x, &y| row[x].total_cmp(&row[y])).unwrap();
                row[k] += err;
                row
            })
            .collect();
        let Ok(model) = SwitchingModel::new(a, sigma, lambda, q) else {
            continue;
        };
        let Ok(alpha) = crate::model::alpha_of(&model) else {
            continue;
        };
        let is_heavy = model.max_drift() > 0.0;
        if alpha < -0.05 && is_heavy == heavy {
            return model;
        }
    }
}
