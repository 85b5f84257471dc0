//! Small dense matrix kernels: Perron roots and the matrix exponential.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dominant eigenvalue with its positive right eigenvector (sum-normalised).
#[derive(Debug, Clone, PartialEq)]
pub struct PerronPair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// `|Mv - value v|_inf / (|value| |v|_inf)`
    pub residual: f64,
}

const POWER_MAX_ITER: usize = 20_000;
const DRIFT_WINDOW: usize = 10;
const DRIFT_TOL: f64 = 1e-14;

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn normalise(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

fn residual(m: &DMatrix<f64>, value: f64, v: &[f64]) -> f64 {
    let mv = mat_vec(m, v);
    let r = mv
        .iter()
        .zip(v)
        .map(|(a, b)| (a - value * b).abs())
        .fold(0.0, f64::max);
    let vmax = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    r / (value.abs().max(f64::MIN_POSITIVE) * vmax)
}

/// Power iteration on `m + shift I`, which is primitive for irreducible
/// nonnegative `m`. Returns the dominant eigenvalue of `m` and its vector.
fn shifted_power(m: &DMatrix<f64>, shift: f64) -> Result<(f64, Vec<f64>)> {
    let n = m.nrows();
    let mut b = m.clone();
    for i in 0..n {
        b[(i, i)] += shift;
    }
    let mut v = vec![1.0 / n as f64; n];
    let mut history = [f64::NAN; DRIFT_WINDOW + 1];
    for it in 0..POWER_MAX_ITER {
        let mut w = mat_vec(&b, &v);
        let est = w.iter().sum::<f64>(); // v sums to 1
        normalise(&mut w);
        v = w;
        history[it % (DRIFT_WINDOW + 1)] = est;
        if it >= DRIFT_WINDOW {
            let old = history[(it + 1) % (DRIFT_WINDOW + 1)];
            if (est - old).abs() <= DRIFT_TOL * est.abs() {
                return Ok((est - shift, v));
            }
        }
    }
    Err(Error::NonConvergence(POWER_MAX_ITER))
}

/// Largest-real-part eigenvalue from a dense Schur decomposition.
pub fn dense_dominant_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// One inverse-iteration sweep at `shift`; `None` when the solve fails.
fn inverse_step(m: &DMatrix<f64>, shift: f64, v: &[f64]) -> Option<Vec<f64>> {
    let n = m.nrows();
    let mut shifted = m.clone();
    // offset so the factorisation is never exactly singular
    let offset = 1e-14 * shift.abs().max(f64::MIN_POSITIVE);
    for i in 0..n {
        shifted[(i, i)] -= shift + offset;
    }
    let w = shifted.lu().solve(&nalgebra::DVector::from_column_slice(v))?;
    let s: f64 = w.iter().sum();
    if s == 0.0 || !s.is_finite() {
        return None;
    }
    Some(w.iter().map(|x| x / s).collect())
}

fn rayleigh_quotient(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let mv = mat_vec(m, v);
    mv.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / v.iter().map(|x| x * x).sum::<f64>()
}

/// Rayleigh-quotient refinement of an approximate Perron pair, keeping the
/// best pair seen.
fn finish(m: &DMatrix<f64>, value: f64, v: Vec<f64>) -> PerronPair {
    let mut best = (residual(m, value, &v), value, v);
    let (mut value, mut v) = (best.1, best.2.clone());
    for _ in 0..6 {
        if best.0 <= 1e-15 {
            break;
        }
        let Some(w) = inverse_step(m, value, &v) else {
            break;
        };
        if !w.iter().all(|&x| x > 0.0) {
            break;
        }
        value = rayleigh_quotient(m, &w);
        v = w;
        let r = residual(m, value, &v);
        if r < best.0 {
            best = (r, value, v.clone());
        }
    }
    PerronPair {
        value: best.1,
        vector: best.2,
        residual: best.0,
    }
}

/// Perron root of a nonnegative irreducible matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<PerronPair> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let x = m[(i, j)];
            if x < 0.0 || !x.is_finite() {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: x,
                });
            }
        }
    }
    // shift by the max row sum, an upper bound on the spectral radius
    let shift = inf_norm(m).max(f64::MIN_POSITIVE);
    let (value, v) = match shifted_power(m, shift) {
        Ok(pair) => pair,
        Err(_) => {
            let value = dense_dominant_eigenvalue(m);
            let v0 = vec![1.0 / m.nrows() as f64; m.nrows()];
            let v = inverse_step(m, value, &v0).unwrap_or(v0);
            (value, v)
        }
    };
    Ok(finish(m, value, v))
}

/// Eigenvalue of maximal real part of a Metzler matrix (nonnegative
/// off-diagonal), computed as the Perron root of `g + cI` shifted back.
pub fn metzler_dominant(g: &DMatrix<f64>) -> Result<PerronPair> {
    let n = g.nrows();
    let c = (0..n).map(|i| g[(i, i)].abs()).fold(0.0, f64::max) + 1.0;
    let mut shifted = g.clone();
    for i in 0..n {
        shifted[(i, i)] += c;
    }
    let pair = spectral_radius(&shifted)?;
    // residual stays relative to the shifted root, since Lambda itself may be 0
    Ok(PerronPair {
        value: pair.value - c,
        ..pair
    })
}

// Padé(13) coefficients and the scaling threshold theta_13.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm = one_norm(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(squarings);
    let b = &PADE13;
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Pade denominator is nonsingular");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}
