//! Exact simulation of the switching chain as a list of holding segments.

use std::io::Write;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::Result;
use crate::model::{StationaryLaw, SwitchingModel};
use crate::rng::RngStream;

/// One constant stretch of the switching chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub state: usize,
    pub duration: f64,
}

/// A piecewise-constant trajectory on `[start_time, start_time + total)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath {
    pub start_time: f64,
    pub segments: Vec<Segment>,
}

impl JumpPath {
    pub fn new(start_time: f64, segments: Vec<Segment>) -> Self {
        Self {
            start_time,
            segments,
        }
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration()
    }

    pub fn n_jumps(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }

    /// State occupied at the start of the path.
    pub fn initial_state(&self) -> usize {
        self.segments[0].state
    }

    pub fn final_state(&self) -> usize {
        self.segments[self.segments.len() - 1].state
    }

    /// Segment dump with columns `segment_index,state,duration`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "segment_index,state,duration")?;
        for (k, seg) in self.segments.iter().enumerate() {
            writeln!(out, "{k},{},{}", seg.state, seg.duration)?;
        }
        Ok(())
    }
}

/// Inverse-CDF draw from a discrete law given by its cumulative sums.
fn draw_from_cumulative<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// Draws the initial state from the invariant law.
pub fn sample_initial_state<R: Rng + ?Sized>(mu: &StationaryLaw, rng: &mut R) -> usize {
    draw_from_cumulative(&cumulative(&mu.mu), rng)
}

/// Precomputed jump tables for a model.
#[derive(Debug, Clone)]
pub struct JumpTables {
    rates: Vec<f64>,
    kernel_cdf: Vec<Vec<f64>>,
}

impl JumpTables {
    pub fn new(model: &SwitchingModel) -> Self {
        Self {
            rates: model.lambda().to_vec(),
            kernel_cdf: model.q().iter().map(|row| cumulative(row)).collect(),
        }
    }

    #[inline]
    pub fn holding_time<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(Exp1);
        e / self.rates[state]
    }

    #[inline]
    pub fn next_state<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        draw_from_cumulative(&self.kernel_cdf[state], rng)
    }
}

/// Continues a single trajectory across consecutive windows, carrying the
/// residual holding clock over window boundaries.
#[derive(Debug, Clone)]
pub struct PathCursor<'a> {
    tables: &'a JumpTables,
    state: usize,
    residual: f64,
}

impl<'a> PathCursor<'a> {
    pub fn start<R: Rng + ?Sized>(tables: &'a JumpTables, state: usize, rng: &mut R) -> Self {
        let residual = tables.holding_time(state, rng);
        Self {
            tables,
            state,
            residual,
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Fills `out` with the segments covering the next `horizon` time units.
    pub fn advance<R: Rng + ?Sized>(&mut self, horizon: f64, rng: &mut R, out: &mut Vec<Segment>) {
        out.clear();
        let mut left = horizon;
        while self.residual < left {
            if self.residual > 0.0 {
                out.push(Segment {
                    state: self.state,
                    duration: self.residual,
                });
            }
            left -= self.residual;
            self.state = self.tables.next_state(self.state, rng);
            self.residual = self.tables.holding_time(self.state, rng);
        }
        out.push(Segment {
            state: self.state,
            duration: left,
        });
        self.residual -= left;
    }
}

/// Samples an exact path on `[0, horizon)` started in `initial`. The clock
/// running at the horizon is discarded.
pub fn sample_path(
    model: &SwitchingModel,
    initial: usize,
    horizon: f64,
    stream: RngStream,
) -> JumpPath {
    assert!(horizon > 0.0, "horizon must be positive");
    let tables = JumpTables::new(model);
    let mut rng = stream.rng();
    let mut cursor = PathCursor::start(&tables, initial, &mut rng);
    let mut segments = Vec::new();
    cursor.advance(horizon, &mut rng, &mut segments);
    JumpPath::new(0.0, segments)
}

/// Fraction of time spent in each of `n_states` states.
pub fn occupation_fractions(path: &JumpPath, n_states: usize) -> Vec<f64> {
    let mut frac = vec![0.0; n_states];
    for seg in &path.segments {
        frac[seg.state] += seg.duration;
    }
    let total = path.duration();
    frac.iter_mut().for_each(|f| *f /= total);
    frac
}
