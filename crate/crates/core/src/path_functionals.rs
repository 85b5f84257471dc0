//! Closed-form step coefficients of the exact AR(1) discretization.
//!
//! Over a window of the switching path, the diffusion satisfies
//! `Y_t = Phi * Y_s + sqrt(V) * xi` where `log Phi` is the integrated drift and
//! `V = int_s^t exp(2 int_u^t a) sigma^2 du`. Both are finite sums over the
//! segments of the window.

use crate::error::{Error, Result};
use crate::jump_process::{JumpPath, Segment};
use crate::model::SwitchingModel;

/// `(e^{c d} - 1) / c`, with the exact value `d` at `c = 0`.
#[inline]
pub fn growth_integral(c: f64, d: f64) -> f64 {
    let x = c * d;
    if x == 0.0 {
        d
    } else if x.abs() < 1e-4 {
        // Taylor remainder after x^4/120 is below 1e-22 relative here
        d * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0))))
    } else {
        d * x.exp_m1() / x
    }
}

/// Coefficients of one discretization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    pub phi: f64,
    pub v: f64,
    pub log_phi: f64,
}

/// Exact coefficients over a contiguous run of segments. One backward sweep
/// accumulates the drift integral from each segment's end to the window end.
#[inline]
pub fn coefficients_of(segments: &[Segment], a: &[f64], sigma: &[f64]) -> StepCoefficients {
    let mut after = 0.0f64;
    let mut v = 0.0;
    for seg in segments.iter().rev() {
        let ai = a[seg.state];
        let si = sigma[seg.state];
        if si != 0.0 {
            v += si * si * (2.0 * after).exp() * growth_integral(2.0 * ai, seg.duration);
        }
        after += ai * seg.duration;
    }
    StepCoefficients {
        phi: after.exp(),
        v,
        log_phi: after,
    }
}

/// The segments of `path` clipped to `[s, t)`.
pub fn window(path: &JumpPath, s: f64, t: f64) -> Result<Vec<Segment>> {
    let start = path.start_time;
    let end = path.end_time();
    let slack = 1e-12 * start.abs().max(end.abs()).max(1.0);
    if !(s <= t) || s < start - slack || t > end + slack {
        return Err(Error::IntervalOutsidePath { s, t, start, end });
    }
    let mut out = Vec::new();
    let mut seg_start = start;
    for seg in &path.segments {
        let seg_end = seg_start + seg.duration;
        let lo = seg_start.max(s);
        let hi = seg_end.min(t);
        if hi > lo {
            out.push(Segment {
                state: seg.state,
                duration: hi - lo,
            });
        }
        if seg_end >= t {
            break;
        }
        seg_start = seg_end;
    }
    Ok(out)
}

/// `Phi(s, t) = exp int_s^t a(X_u) du`.
pub fn phi_over(model: &SwitchingModel, path: &JumpPath, s: f64, t: f64) -> Result<f64> {
    let segs = window(path, s, t)?;
    Ok(segs
        .iter()
        .map(|seg| model.a()[seg.state] * seg.duration)
        .sum::<f64>()
        .exp())
}

/// `V(s, t) = int_s^t exp(2 int_u^t a(X_v) dv) sigma^2(X_u) du`.
pub fn variance_over(model: &SwitchingModel, path: &JumpPath, s: f64, t: f64) -> Result<f64> {
    let segs = window(path, s, t)?;
    Ok(coefficients_of(&segs, model.a(), model.sigma()).v)
}

pub fn step_coefficients(
    model: &SwitchingModel,
    path: &JumpPath,
    step_start: f64,
    delta: f64,
) -> Result<StepCoefficients> {
    let segs = window(path, step_start, step_start + delta)?;
    Ok(coefficients_of(&segs, model.a(), model.sigma()))
}
