//! Switching model definition, validation, generator and invariant law.
//!
//! States are indexed from 0 in the API. The JSON model file carries the
//! per-state arrays `a`, `sigma`, `lambda`, the kernel `q`, and optional `names`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// Unvalidated model data as read from a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub a: Vec<f64>,
    pub sigma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

impl RawModel {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// A validated Markov-switching Ornstein-Uhlenbeck model
/// `dY = a(X) Y dt + sigma(X) dW` driven by a finite CTMC `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingModel {
    a: Vec<f64>,
    sigma: Vec<f64>,
    lambda: Vec<f64>,
    q: Vec<Vec<f64>>,
    names: Option<Vec<String>>,
}

impl SwitchingModel {
    /// Builds and validates a model from its per-state arrays.
    pub fn new(a: Vec<f64>, sigma: Vec<f64>, lambda: Vec<f64>, q: Vec<Vec<f64>>) -> Result<Self> {
        validate_model(RawModel {
            a,
            sigma,
            lambda,
            q,
            names: None,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        validate_model(RawModel::from_path(path)?)
    }

    pub fn n_states(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn q(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn max_drift(&self) -> f64 {
        self.a.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_drift(&self) -> f64 {
        self.a.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_intensity(&self) -> f64 {
        self.lambda.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_raw(&self) -> RawModel {
        RawModel {
            a: self.a.clone(),
            sigma: self.sigma.clone(),
            lambda: self.lambda.clone(),
            q: self.q.clone(),
            names: self.names.clone(),
        }
    }

    /// The stationary time reversal of the switching chain, with the same
    /// drifts and volatilities. Its generator is `mu(j) Q(j,i) / mu(i)`, so
    /// holding intensities are unchanged and the kernel becomes
    /// `q'(i,j) = mu(j) lambda(j) q(j,i) / (mu(i) lambda(i))`.
    pub fn time_reversed(&self) -> Result<Self> {
        let mu = invariant_law(&generator(self))?;
        let n = self.n_states();
        let mut q = vec![vec![0.0; n]; n];
        for (i, row) in q.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                if i != j {
                    *entry = mu.mu[j] * self.lambda[j] * self.q[j][i] / (mu.mu[i] * self.lambda[i]);
                }
            }
            // renormalise away rounding so the row-sum invariant holds exactly enough
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= sum);
        }
        validate_model(RawModel {
            a: self.a.clone(),
            sigma: self.sigma.clone(),
            lambda: self.lambda.clone(),
            q,
            names: self.names.clone(),
        })
    }
}

/// Checks every structural invariant of the model.
///
/// Models with `alpha >= 0` are accepted here; the tail analyses refuse them.
pub fn validate_model(raw: RawModel) -> Result<SwitchingModel> {
    let n = raw.a.len();
    if n < 2 {
        return Err(Error::TooFewStates(n));
    }
    for (field, len) in [
        ("sigma", raw.sigma.len()),
        ("lambda", raw.lambda.len()),
        ("q", raw.q.len()),
    ] {
        if len != n {
            return Err(Error::Shape {
                field,
                expected: n,
                got: len,
            });
        }
    }
    if let Some(names) = &raw.names {
        if names.len() != n {
            return Err(Error::Shape {
                field: "names",
                expected: n,
                got: names.len(),
            });
        }
    }
    for row in &raw.q {
        if row.len() != n {
            return Err(Error::Shape {
                field: "q",
                expected: n,
                got: row.len(),
            });
        }
    }
    if raw.a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("a"));
    }
    if raw.sigma.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("sigma"));
    }
    if raw.lambda.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("lambda"));
    }
    if raw.q.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("q"));
    }

    for (state, &value) in raw.lambda.iter().enumerate() {
        if value <= 0.0 {
            return Err(Error::ZeroIntensity { state, value });
        }
    }
    for (state, row) in raw.q.iter().enumerate() {
        if row[state] != 0.0 {
            return Err(Error::NonzeroDiagonalKernel {
                state,
                value: row[state],
            });
        }
    }
    for (row_idx, row) in raw.q.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::RowSumViolation { row: row_idx, sum });
        }
    }
    check_irreducible(&raw.q)?;
    for (state, &value) in raw.sigma.iter().enumerate() {
        if value < 0.0 {
            return Err(Error::NegativeVolatility { state, value });
        }
    }
    if raw.sigma.iter().all(|&s| s == 0.0) {
        return Err(Error::AllVolatilitiesZero);
    }

    Ok(SwitchingModel {
        a: raw.a,
        sigma: raw.sigma,
        lambda: raw.lambda,
        q: raw.q,
        names: raw.names,
    })
}

/// Boolean reachability closure (Warshall) on the support of `q`.
fn check_irreducible(q: &[Vec<f64>]) -> Result<()> {
    let n = q.len();
    let mut reach: Vec<Vec<bool>> = q
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, &x)| i == j || x > 0.0).collect())
        .collect();
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    for (from, row) in reach.iter().enumerate() {
        if let Some(to) = row.iter().position(|&r| !r) {
            return Err(Error::ReducibleKernel { from, to });
        }
    }
    Ok(())
}

/// CTMC generator `Q(i,j) = lambda(i) q(i,j)`, `Q(i,i) = -lambda(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub q: DMatrix<f64>,
}

impl Generator {
    pub fn n_states(&self) -> usize {
        self.q.nrows()
    }
}

pub fn generator(model: &SwitchingModel) -> Generator {
    let n = model.n_states();
    let q = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -model.lambda[i]
        } else {
            model.lambda[i] * model.q[i][j]
        }
    });
    Generator { q }
}

/// Invariant probability vector of the switching chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryLaw {
    pub mu: Vec<f64>,
}

/// Solves the overdetermined system `[Q^T; 1^T] mu = [0; 1]` in the
/// least-squares sense.
pub fn invariant_law(gen: &Generator) -> Result<StationaryLaw> {
    let n = gen.n_states();
    let mut system = DMatrix::zeros(n + 1, n);
    system.view_mut((0, 0), (n, n)).copy_from(&gen.q.transpose());
    system.row_mut(n).fill(1.0);
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;

    // normal equations are fine for the small N in scope, but QR keeps the
    // conditioning of the original system
    let qr = system.qr();
    let qt_b = qr.q().transpose() * rhs;
    let r = qr.r();
    let sol = r
        .solve_upper_triangular(&qt_b)
        .ok_or(Error::SingularSystem)?;
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let sum: f64 = sol.iter().sum();
    let mu: Vec<f64> = sol.iter().map(|x| x / sum).collect();
    if mu.iter().any(|&x| x <= 0.0) {
        return Err(Error::SingularSystem);
    }
    Ok(StationaryLaw { mu })
}

/// `alpha = sum_i a(i) mu(i)`; negative alpha is the ergodicity condition.
pub fn ergodicity_index(model: &SwitchingModel, mu: &StationaryLaw) -> f64 {
    model.a.iter().zip(&mu.mu).map(|(a, m)| a * m).sum()
}

/// Convenience: generator, invariant law and alpha in one call.
pub fn alpha_of(model: &SwitchingModel) -> Result<f64> {
    let mu = invariant_law(&generator(model))?;
    Ok(ergodicity_index(model, &mu))
}

/// Returns alpha, or `ErgodicityViolated` when it is not strictly negative.
pub fn require_ergodic(model: &SwitchingModel) -> Result<f64> {
    let alpha = alpha_of(model)?;
    if alpha < 0.0 {
        Ok(alpha)
    } else {
        Err(Error::ErgodicityViolated { alpha })
    }
}
