//! Empirical tail statistics on stationary samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K_FRAC: f64 = 0.005;
pub const PLATEAU_FRACS: [f64; 4] = [0.002, 0.005, 0.01, 0.02];
/// Largest accepted `max/min` of Hill estimates across [`PLATEAU_FRACS`].
pub const PLATEAU_MAX_RATIO: f64 = 1.25;
pub const MIN_HILL_SAMPLES: usize = 100;
const MIN_K: usize = 10;
const CCDF_POINTS: usize = 48;
/// The calibrated decade starts at the `1 - CALIBRATION_TAIL` quantile of |R|.
pub const CALIBRATION_TAIL: f64 = 0.02;
/// Highest CCDF grid point keeps at least this many exceedances.
const CCDF_MIN_EXCEEDANCES: usize = 100;

/// Magnitudes sorted ascending.
fn sorted_abs(values: &[f64]) -> Vec<f64> {
    let mut abs: Vec<f64> = values.iter().map(|x| x.abs()).collect();
    abs.sort_by(f64::total_cmp);
    abs
}

/// Fraction of `sorted` strictly above `t`.
fn exceedance(sorted: &[f64], t: f64) -> f64 {
    let below_or_eq = sorted.partition_point(|&x| x <= t);
    (sorted.len() - below_or_eq) as f64 / sorted.len() as f64
}

/// Empirical quantile of sorted data (lower order statistic).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let idx = ((p * sorted.len() as f64).floor() as usize).min(sorted.len() - 1);
    sorted[idx]
}

/// Hill estimate from ascending magnitudes using the top `k`.
fn hill_sorted(sorted: &[f64], k: usize) -> Result<f64> {
    let n = sorted.len();
    let threshold = sorted[n - k - 1];
    if !(threshold > 0.0) {
        return Err(Error::DegenerateSample(format!(
            "threshold order statistic is {threshold}; top-k magnitudes must be positive"
        )));
    }
    let sum_log: f64 = sorted[n - k..].iter().map(|x| (x / threshold).ln()).sum();
    if !(sum_log > 0.0) {
        return Err(Error::DegenerateSample("top-k magnitudes are all equal".into()));
    }
    Ok(k as f64 / sum_log)
}

fn k_for(n: usize, k_frac: f64) -> Result<usize> {
    if n < MIN_HILL_SAMPLES {
        return Err(Error::DegenerateSample(format!(
            "{n} samples; at least {MIN_HILL_SAMPLES} are needed"
        )));
    }
    if !(k_frac > 0.0 && k_frac < 1.0) {
        return Err(Error::InvalidArgument(format!("k_frac must be in (0, 1), got {k_frac}")));
    }
    let k = MIN_K.max((k_frac * n as f64).floor() as usize);
    Ok(k.min(n - 1))
}

/// Tail estimate: Hill index, CCDF, and the prefactor track `t^kappa P(|R| > t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub n_samples: usize,
    pub k_frac: f64,
    pub kappa_hat: f64,
    pub k_used: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Exponent used in `prefactor_track`: the reference kappa when given,
    /// otherwise `kappa_hat`.
    pub track_kappa: f64,
    pub ccdf: Vec<(f64, f64)>,
    pub prefactor_track: Vec<(f64, f64)>,
    pub calibration: Calibration,
}

/// Prefactor behaviour over one decade of `t` starting at the
/// `1 - CALIBRATION_TAIL` magnitude quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub t_low: f64,
    pub t_high: f64,
    pub prefactor_min: f64,
    pub prefactor_max: f64,
    /// `prefactor_max / prefactor_min`
    pub prefactor_ratio: f64,
}

/// Hill estimator on `|values|` with `k = max(10, floor(k_frac n))`.
pub fn hill_estimate(values: &[f64], k_frac: f64, reference_kappa: Option<f64>) -> Result<TailEstimate> {
    let n = values.len();
    let k = k_for(n, k_frac)?;
    let sorted = sorted_abs(values);
    let kappa_hat = hill_sorted(&sorted, k)?;
    let half_width = 1.96 / (k as f64).sqrt();
    let track_kappa = reference_kappa.unwrap_or(kappa_hat);

    let t_start = quantile(&sorted, 0.5).max(f64::MIN_POSITIVE);
    let t_end = sorted[n.saturating_sub(CCDF_MIN_EXCEEDANCES + 1)].max(t_start * 1.0001);
    let ratio = (t_end / t_start).powf(1.0 / (CCDF_POINTS - 1) as f64);
    let ccdf: Vec<(f64, f64)> = (0..CCDF_POINTS)
        .map(|i| {
            let t = t_start * ratio.powi(i as i32);
            (t, exceedance(&sorted, t))
        })
        .collect();
    let prefactor_track: Vec<(f64, f64)> = ccdf.iter().map(|&(t, p)| (t, t.powf(track_kappa) * p)).collect();

    let t_low = quantile(&sorted, 1.0 - CALIBRATION_TAIL);
    let t_high = 10.0 * t_low;
    let decade = (0..=10).map(|i| t_low * 10f64.powf(i as f64 / 10.0));
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for t in decade {
        let v = t.powf(track_kappa) * exceedance(&sorted, t);
        lo = lo.min(v);
        hi = hi.max(v);
    }

    Ok(TailEstimate {
        n_samples: n,
        k_frac,
        kappa_hat,
        k_used: k,
        ci_low: kappa_hat * (1.0 - half_width),
        ci_high: kappa_hat * (1.0 + half_width),
        track_kappa,
        ccdf,
        prefactor_track,
        calibration: Calibration {
            t_low,
            t_high,
            prefactor_min: lo,
            prefactor_max: hi,
            prefactor_ratio: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        },
    })
}

/// Hill estimates across several `k_frac` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauDiagnostic {
    pub points: Vec<(f64, f64)>,
    /// `max / min` of the estimates.
    pub ratio: f64,
    /// Estimates increase as `k_frac` decreases at every step, the signature
    /// of a tail with no power-law index.
    pub drifts_upward: bool,
    pub passes: bool,
}

pub fn hill_plateau(values: &[f64], fracs: &[f64]) -> Result<PlateauDiagnostic> {
    let sorted = sorted_abs(values);
    let mut fracs = fracs.to_vec();
    fracs.sort_by(f64::total_cmp);
    let points = fracs
        .iter()
        .map(|&f| {
            let k = k_for(sorted.len(), f)?;
            Ok((f, hill_sorted(&sorted, k)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ratio = max / min;
    let drifts_upward = points.windows(2).all(|w| w[0].1 > w[1].1);
    Ok(PlateauDiagnostic {
        points,
        ratio,
        drifts_upward,
        passes: ratio <= PLATEAU_MAX_RATIO,
    })
}

/// Range that a moment ratio must stay in to count as stable.
pub const MOMENT_STABLE_RANGE: (f64, f64) = (0.8, 1.25);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentProbe {
    pub order: f64,
    /// Sizes of the nested prefixes used: n/4, n/2, n.
    pub sizes: [usize; 3],
    pub moments: [f64; 3],
    pub ratios: [f64; 2],
    pub stable: bool,
}

/// `E|R|^s` on the nested prefixes of size n/4, n/2 and n.
pub fn moment_probe(values: &[f64], orders: &[f64]) -> Vec<MomentProbe> {
    let n = values.len();
    let sizes = [n / 4, n / 2, n];
    orders
        .iter()
        .map(|&order| {
            let mut moments = [0.0; 3];
            let mut acc = 0.0;
            let mut done = 0;
            for (slot, &size) in sizes.iter().enumerate() {
                acc += values[done..size].iter().map(|x| x.abs().powf(order)).sum::<f64>();
                done = size;
                moments[slot] = acc / size.max(1) as f64;
            }
            let ratios = [moments[1] / moments[0], moments[2] / moments[1]];
            let (lo, hi) = MOMENT_STABLE_RANGE;
            MomentProbe {
                order,
                sizes,
                moments,
                ratios,
                stable: ratios.iter().all(|r| (lo..=hi).contains(r)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryPoint {
    pub quantile: f64,
    pub t: f64,
    pub p_upper: f64,
    pub p_lower: f64,
    /// `(n_upper - n_lower) / sqrt(n_upper + n_lower)`; standard normal
    /// under symmetry.
    pub z: f64,
}

/// Compares `P(R > t)` and `P(R < -t)` at the given quantiles of `|R|`.
pub fn tail_symmetry_check(values: &[f64], quantiles: &[f64]) -> Result<Vec<SymmetryPoint>> {
    if values.is_empty() {
        return Err(Error::DegenerateSample("no samples".into()));
    }
    let sorted = sorted_abs(values);
    let n = values.len() as f64;
    Ok(quantiles
        .iter()
        .map(|&q| {
            let t = if q <= 0.0 { 0.0 } else { quantile(&sorted, q) };
            let up = values.iter().filter(|&&x| x > t).count() as f64;
            let down = values.iter().filter(|&&x| x < -t).count() as f64;
            let z = if up + down > 0.0 { (up - down) / (up + down).sqrt() } else { 0.0 };
            SymmetryPoint {
                quantile: q,
                t,
                p_upper: up / n,
                p_lower: down / n,
                z,
            }
        })
        .collect())
}
