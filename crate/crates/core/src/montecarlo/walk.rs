//! The multiplicative random walk `S_n = sum log Phi` run backwards in time,
//! its maximum, and the first-ladder matrix `H(infinity)`.
//!
//! Walking backwards from a stationary time is simulated as the time-reversed
//! switching chain run forwards.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jump_process::{sample_initial_state, JumpTables, PathCursor};
use crate::linalg::spectral_radius;
use crate::model::{generator, invariant_law, require_ergodic, SwitchingModel};
use crate::rng::{domain, RngStream};

/// Replicas stop after this many steps even if the drop rule has not fired.
pub const MAX_WALK_STEPS: u64 = 50_000_000;
const MAX_TAIL_POINTS: usize = 40;
/// The top grid point keeps at least this many replicas above it.
const TAIL_MIN_EXCEEDANCES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkPlan {
    pub delta: f64,
    pub n_replicas: u64,
    pub cutoff_drop: f64,
    pub seed: u64,
}

/// Default stopping depth `max(30 / kappa, 20)`.
pub fn default_cutoff_drop(kappa: f64) -> f64 {
    (30.0 / kappa).max(20.0)
}

#[derive(Debug, Clone, Copy)]
struct WalkOutcome {
    start: usize,
    max: f64,
    /// State at the first ladder epoch, if one occurred.
    ladder_state: Option<usize>,
    truncated: bool,
}

fn run_walk(
    tables: &JumpTables,
    a: &[f64],
    mu: &crate::model::StationaryLaw,
    plan: &WalkPlan,
    stream: RngStream,
) -> WalkOutcome {
    let mut rng = stream.rng();
    let start = sample_initial_state(mu, &mut rng);
    let mut cursor = PathCursor::start(tables, start, &mut rng);
    let mut buf = Vec::with_capacity(8);
    let (mut s, mut max) = (0.0f64, 0.0f64);
    let mut ladder_state = None;
    for _ in 0..MAX_WALK_STEPS {
        cursor.advance(plan.delta, &mut rng, &mut buf);
        s += buf.iter().map(|seg| a[seg.state] * seg.duration).sum::<f64>();
        if s > max {
            max = s;
            if ladder_state.is_none() {
                ladder_state = Some(cursor.state());
            }
        }
        if s < max - plan.cutoff_drop {
            return WalkOutcome {
                start,
                max,
                ladder_state,
                truncated: false,
            };
        }
    }
    WalkOutcome {
        start,
        max,
        ladder_state,
        truncated: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderEstimate {
    pub kappa: f64,
    pub delta: f64,
    pub n_replicas: u64,
    pub cutoff_drop: f64,
    /// Replicas that hit [`MAX_WALK_STEPS`] before the drop rule.
    pub truncated: u64,
    /// Empirical `P(tau < inf, state at ladder = j | start = i)`.
    pub h_inf_hat: Vec<Vec<f64>>,
    pub h_row_sums: Vec<f64>,
    pub h_row_sum_se: Vec<f64>,
    pub rho_h_hat: f64,
    /// Delta-method standard error of `rho_h_hat`.
    pub rho_h_se: f64,
    /// `(t, P(M > t), e^{kappa t} P(M > t))`
    pub max_tail: Vec<(f64, f64, f64)>,
    /// `[t_lo, t_hi]` of the central part of the grid.
    pub central_range: (f64, f64),
    /// `max / min` of `e^{kappa t} P(M > t)` on the central grid.
    pub central_band_ratio: f64,
    pub central_floor: f64,
}

/// Simulates the backward walk per replica until it falls `cutoff_drop`
/// below its running maximum, then aggregates the maximum's tail and the
/// first-ladder matrix.
pub fn simulate_walk_max(model: &SwitchingModel, kappa: f64, plan: &WalkPlan) -> Result<LadderEstimate> {
    require_ergodic(model)?;
    if !(plan.delta > 0.0 && plan.cutoff_drop > 0.0 && kappa > 0.0) {
        return Err(Error::InvalidArgument("delta, cutoff drop and kappa must be positive".into()));
    }
    if plan.n_replicas < 2 * TAIL_MIN_EXCEEDANCES as u64 {
        return Err(Error::InvalidArgument(format!(
            "at least {} replicas are needed",
            2 * TAIL_MIN_EXCEEDANCES
        )));
    }
    let reversed = model.time_reversed()?;
    let mu = invariant_law(&generator(&reversed))?;
    let tables = JumpTables::new(&reversed);
    let a = reversed.a();
    let outcomes: Vec<WalkOutcome> = (0..plan.n_replicas)
        .into_par_iter()
        .map(|r| run_walk(&tables, a, &mu, plan, RngStream::for_task(plan.seed, domain::WALK, r)))
        .collect();

    let n = model.n_states();
    let mut starts = vec![0u64; n];
    let mut counts = vec![vec![0u64; n]; n];
    for o in &outcomes {
        starts[o.start] += 1;
        if let Some(j) = o.ladder_state {
            counts[o.start][j] += 1;
        }
    }
    let h: Vec<Vec<f64>> = counts
        .iter()
        .zip(&starts)
        .map(|(row, &m)| row.iter().map(|&c| c as f64 / m.max(1) as f64).collect())
        .collect();
    let h_row_sums: Vec<f64> = h.iter().map(|r| r.iter().sum()).collect();
    let h_row_sum_se: Vec<f64> = h_row_sums
        .iter()
        .zip(&starts)
        .map(|(p, &m)| (p * (1.0 - p) / m.max(1) as f64).sqrt())
        .collect();

    let h_mat = DMatrix::from_fn(n, n, |i, j| h[i][j]);
    let right = spectral_radius(&h_mat)?;
    let left = spectral_radius(&h_mat.transpose())?;
    let (u, v) = (&left.vector, &right.vector);
    let uv: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
    // Var(u^T dH v) with rows of H multinomial given the start counts
    let var: f64 = (0..n)
        .map(|i| {
            let m = starts[i].max(1) as f64;
            let first: f64 = (0..n).map(|j| h[i][j] * v[j] * v[j]).sum();
            let mean: f64 = (0..n).map(|j| h[i][j] * v[j]).sum();
            u[i] * u[i] * (first - mean * mean) / m
        })
        .sum();
    let rho_h_se = var.max(0.0).sqrt() / uv;

    let mut maxima: Vec<f64> = outcomes.iter().map(|o| o.max).collect();
    maxima.sort_by(f64::total_cmp);
    let total = maxima.len();
    let t_top = maxima[total - TAIL_MIN_EXCEEDANCES - 1];
    let max_tail: Vec<(f64, f64, f64)> = (0..MAX_TAIL_POINTS)
        .map(|k| {
            let t = t_top * k as f64 / (MAX_TAIL_POINTS - 1) as f64;
            let above = total - maxima.partition_point(|&m| m <= t);
            let p = above as f64 / total as f64;
            (t, p, (kappa * t).exp() * p)
        })
        .collect();
    let central_range = (0.25 * t_top, 0.75 * t_top);
    let central: Vec<f64> = max_tail
        .iter()
        .filter(|(t, _, _)| *t >= central_range.0 && *t <= central_range.1)
        .map(|p| p.2)
        .collect();
    let floor = central.iter().copied().fold(f64::INFINITY, f64::min);
    let ceil = central.iter().copied().fold(0.0, f64::max);

    Ok(LadderEstimate {
        kappa,
        delta: plan.delta,
        n_replicas: plan.n_replicas,
        cutoff_drop: plan.cutoff_drop,
        truncated: outcomes.iter().filter(|o| o.truncated).count() as u64,
        h_inf_hat: h,
        h_row_sums,
        h_row_sum_se,
        rho_h_hat: right.value,
        rho_h_se,
        max_tail,
        central_range,
        central_band_ratio: if floor > 0.0 { ceil / floor } else { f64::INFINITY },
        central_floor: floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_drifts_never_climb() {
        let m = SwitchingModel::new(
            vec![-1.0, -2.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let plan = WalkPlan {
            delta: 0.01,
            n_replicas: 2000,
            cutoff_drop: 1.0,
            seed: 1,
        };
        let est = simulate_walk_max(&m, 1.0, &plan).unwrap();
        assert!(est.h_row_sums.iter().all(|&s| s == 0.0));
        assert_eq!(est.rho_h_hat, 0.0);
        assert_eq!(est.truncated, 0);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = SwitchingModel::new(
            vec![1.0, -2.0],
            vec![1.0, 1.0],
            vec![3.0, 3.0],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let plan = WalkPlan {
            delta: 0.25 / 3.0,
            n_replicas: 1000,
            cutoff_drop: 20.0,
            seed: 5,
        };
        let a = simulate_walk_max(&m, 1.5, &plan).unwrap();
        let b = simulate_walk_max(&m, 1.5, &plan).unwrap();
        assert_eq!(a, b);
        assert!(a.h_row_sums.iter().all(|&s| s < 1.0));
    }
}
