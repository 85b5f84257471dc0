use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jump_process::{sample_initial_state, JumpTables, PathCursor};
use crate::model::{generator, invariant_law, require_ergodic, SwitchingModel};
use crate::path_functionals::coefficients_of;
use crate::rng::{domain, RngStream};

/// Required `burn_in_steps * delta * |alpha|`.
pub const CONTRACTION_BUDGET: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub delta: f64,
    pub burn_in_steps: u64,
    pub n_samples: u64,
    pub seed: u64,
    pub antithetic: bool,
}

/// Default step `0.25 / max lambda`, so a step holds O(1) jumps.
pub fn default_delta(model: &SwitchingModel) -> f64 {
    0.25 / model.max_intensity()
}

/// Smallest step count with `steps * delta * |alpha| >= CONTRACTION_BUDGET`.
pub fn auto_burn_in(alpha: f64, delta: f64) -> u64 {
    // the slack absorbs rounding in alpha so exact budgets are not overshot by one step
    (CONTRACTION_BUDGET / (delta * alpha.abs()) - 1e-9).ceil() as u64
}

impl SimulationPlan {
    /// Plan with the default step and automatic burn-in.
    pub fn auto(model: &SwitchingModel, n_samples: u64, seed: u64) -> Result<Self> {
        Self::with_delta(model, default_delta(model), n_samples, seed)
    }

    pub fn with_delta(model: &SwitchingModel, delta: f64, n_samples: u64, seed: u64) -> Result<Self> {
        let alpha = require_ergodic(model)?;
        Ok(Self {
            delta,
            burn_in_steps: auto_burn_in(alpha, delta),
            n_samples,
            seed,
            antithetic: false,
        })
    }

    /// `burn_in_steps * delta * |alpha|` for this plan.
    pub fn contraction(&self, alpha: f64) -> f64 {
        self.burn_in_steps as f64 * self.delta * alpha.abs()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {}", self.delta)));
        }
        if self.burn_in_steps == 0 || self.n_samples == 0 {
            return Err(Error::InvalidArgument("burn-in and sample count must be positive".into()));
        }
        Ok(())
    }
}

/// Independent draws approximating the stationary law, one per replica.
#[derive(Debug, Clone, PartialEq)]
pub struct TailSampleSet {
    pub values: Vec<f64>,
}

impl TailSampleSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn summary(&self) -> SampleSummary {
        SampleSummary::of(&self.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

impl SampleSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            n,
            mean,
            variance,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Runs one replica: X from the invariant law, Y from 0, `steps` exact
/// AR(1) steps along one continuous path.
fn run_replica(
    model: &SwitchingModel,
    tables: &JumpTables,
    mu: &crate::model::StationaryLaw,
    delta: f64,
    steps: u64,
    stream: RngStream,
    negate: bool,
) -> f64 {
    let mut rng = stream.rng();
    let (a, sigma) = (model.a(), model.sigma());
    let start = sample_initial_state(mu, &mut rng);
    let mut cursor = PathCursor::start(tables, start, &mut rng);
    let mut buf = Vec::with_capacity(8);
    let sign = if negate { -1.0 } else { 1.0 };
    let mut y = 0.0;
    for _ in 0..steps {
        cursor.advance(delta, &mut rng, &mut buf);
        let c = coefficients_of(&buf, a, sigma);
        let xi: f64 = StandardNormal.sample(&mut rng);
        y = c.phi * y + c.v.sqrt() * sign * xi;
    }
    y
}

/// Draws `plan.n_samples` values of the stationary variable. Replica `r`
/// owns stream `r` of the stationary namespace; with antithetic sampling,
/// odd replicas replay the previous stream with negated Gaussians.
pub fn sample_stationary(model: &SwitchingModel, plan: &SimulationPlan) -> Result<TailSampleSet> {
    require_ergodic(model)?;
    plan.validate()?;
    let mu = invariant_law(&generator(model))?;
    let tables = JumpTables::new(model);
    let values = (0..plan.n_samples)
        .into_par_iter()
        .map(|r| {
            let (index, negate) = if plan.antithetic { (r / 2, r % 2 == 1) } else { (r, false) };
            let stream = RngStream::for_task(plan.seed, domain::STATIONARY, index);
            run_replica(model, &tables, &mu, plan.delta, plan.burn_in_steps, stream, negate)
        })
        .collect::<Vec<f64>>();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSample("simulation produced a non-finite value".into()));
    }
    Ok(TailSampleSet { values })
}
