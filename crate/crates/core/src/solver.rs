//! Explicit Euler integration on the union grid of base steps and arrival times.
//!
//! Between grid points the state advances by `b(t, X_t) dt + sigma(t, X_t) dB`,
//! both evaluated at the segment of the left grid point. At an arrival with mark
//! `z` the left limit `X(t-)` is recorded and `X(t) = X(t-) + gamma(t, X_{t-}, z)`,
//! with the jump coefficient evaluated at the left-limit segment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeff::{CoefficientSet, Coefficients, Equation, Shape};
use crate::noise::{NoiseRealization, Piece};
use crate::segment::{History, Segment, SegmentError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub step: f64,
    pub t0: f64,
    pub horizon: f64,
    /// Stop at the first grid time with `|X| >= radius` (Euclidean).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_radius: Option<f64>,
}

impl SolverConfig {
    pub fn new(step: f64, t0: f64, horizon: f64) -> Self {
        SolverConfig { step, t0, horizon, stop_radius: None }
    }

    pub fn with_stop_radius(mut self, radius: f64) -> Self {
        self.stop_radius = Some(radius);
        self
    }

    pub fn steps(&self) -> usize {
        ((self.horizon - self.t0) / self.step).round() as usize
    }

    fn validate(&self, shape: &Shape, noise: &NoiseRealization) -> Result<usize, SolverError> {
        let bad = |msg: String| Err(SolverError::ConfigMismatch(msg));
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        let span = self.horizon - self.t0;
        if !(span > 0.0 && span.is_finite()) {
            return bad(format!("need t0 < horizon, got [{}, {}]", self.t0, self.horizon));
        }
        let n = self.steps();
        if n == 0 || (n as f64 * self.step - span).abs() > 1e-9 * span {
            return bad(format!("step {} does not divide the horizon", self.step));
        }
        if shape.r0 > 0.0 {
            let k = (shape.r0 / self.step).round();
            if k < 1.0 || (k * self.step - shape.r0).abs() > 1e-9 * shape.r0 {
                return bad(format!("r0 = {} is not a multiple of the step {}", shape.r0, self.step));
            }
        }
        if noise.base_step() != self.step {
            return bad(format!("noise step {} differs from solver step {}", noise.base_step(), self.step));
        }
        if noise.t0() != self.t0 {
            return bad(format!("noise starts at {}, solver at {}", noise.t0(), self.t0));
        }
        if noise.steps() < n {
            return bad(format!("noise horizon {} is shorter than {}", noise.horizon(), self.horizon));
        }
        if noise.m() != shape.noise_dim {
            return bad(format!("noise has {} Brownian components, coefficients {}", noise.m(), shape.noise_dim));
        }
        if noise.n_marks() != shape.marks.len() {
            return bad(format!("noise has {} marks, coefficients {}", noise.n_marks(), shape.marks.len()));
        }
        if let Some(r) = self.stop_radius {
            if !(r > 0.0) {
                return bad(format!("stop radius must be positive, got {r}"));
            }
        }
        Ok(n)
    }
}

fn check_initial(shape: &Shape, xi: &Segment) -> Result<(), SolverError> {
    if xi.dim() != shape.dim || xi.r0() != shape.r0 {
        return Err(SolverError::ConfigMismatch(format!(
            "initial segment has d = {}, r0 = {}; coefficients need d = {}, r0 = {}",
            xi.dim(),
            xi.r0(),
            shape.dim,
            shape.r0
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: usize,
    pub pieces: usize,
    pub jumps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub history: History,
    pub stopped_at: Option<f64>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub plain: History,
    pub barred: History,
    pub stopped_at: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// Advances one equation piece by piece.
struct Stepper<'a> {
    coeffs: &'a dyn Coefficients,
    dim: usize,
    m: usize,
    history: History,
    window: Segment,
    drift: Vec<f64>,
    diffusion: Vec<f64>,
    jump: Vec<f64>,
    state: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(
        coeffs: &'a dyn Coefficients,
        shape: &Shape,
        xi: &Segment,
        t0: f64,
        resolution: f64,
    ) -> Result<Self, SolverError> {
        let history = History::from_initial(xi, t0, resolution)?;
        Ok(Stepper {
            coeffs,
            dim: shape.dim,
            m: shape.noise_dim,
            state: history.last().to_vec(),
            history,
            window: Segment::scratch(shape.dim, shape.r0),
            drift: vec![0.0; shape.dim],
            diffusion: vec![0.0; shape.dim * shape.noise_dim],
            jump: vec![0.0; shape.dim],
        })
    }

    fn advance(&mut self, piece: &Piece, db: &[f64]) -> Result<(), SolverError> {
        let t = self.history.time_of(piece.start);
        self.history.fill_window(piece.start, false, &mut self.window)?;
        self.coeffs.drift(t, &self.window, &mut self.drift);
        self.coeffs.diffusion(t, &self.window, &mut self.diffusion);
        for i in 0..self.dim {
            let row = &self.diffusion[i * self.m..(i + 1) * self.m];
            let noise: f64 = row.iter().zip(db).map(|(s, w)| s * w).sum();
            self.state[i] += self.drift[i] * piece.dt + noise;
        }
        let t_end = self.history.time_of(piece.end);
        if self.state.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteState { t: t_end });
        }
        self.history.push(piece.end, &self.state);
        if let Some(mark) = piece.mark {
            // The freshly pushed node holds X(t-), so this window is X_{t-}.
            self.history.fill_window(piece.end, true, &mut self.window)?;
            self.coeffs.jump(t_end, &self.window, mark, &mut self.jump);
            for (x, g) in self.state.iter_mut().zip(&self.jump) {
                *x += g;
            }
            if self.state.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::NonFiniteState { t: t_end });
            }
            self.history.jump_last(&self.state);
        }
        Ok(())
    }

    fn outside(&self, radius: Option<f64>) -> bool {
        radius.is_some_and(|r| self.state.iter().map(|v| v * v).sum::<f64>().sqrt() >= r)
    }
}

/// Solves one equation on `noise`.
pub fn solve_path(
    eq: &Equation,
    xi: &Segment,
    noise: &NoiseRealization,
    cfg: &SolverConfig,
) -> Result<PathResult, SolverError> {
    check_initial(&eq.shape, xi)?;
    let n = cfg.validate(&eq.shape, noise)?;
    let mut stepper = Stepper::new(eq.coeffs.as_ref(), &eq.shape, xi, cfg.t0, noise.resolution())?;
    let mut diagnostics = Diagnostics::default();
    let mut stopped_at = None;
    if stepper.outside(cfg.stop_radius) {
        stopped_at = Some(cfg.t0);
    }
    let mut cursor = noise.cursor();
    while stopped_at.is_none() {
        let Some(piece) = cursor.next_piece() else { break };
        if piece.step >= n {
            break;
        }
        stepper.advance(&piece, cursor.db())?;
        record(&mut diagnostics, &piece);
        if stepper.outside(cfg.stop_radius) {
            stopped_at = Some(stepper.history.time_of(piece.end));
        }
    }
    Ok(PathResult { history: stepper.history, stopped_at, diagnostics })
}

/// Solves both equations of `cs` on the same realization.
///
/// With a stop radius the pair stops as soon as either state leaves the ball.
pub fn solve_coupled(
    cs: &CoefficientSet,
    xi: &Segment,
    xibar: &Segment,
    noise: &NoiseRealization,
    cfg: &SolverConfig,
) -> Result<PairResult, SolverError> {
    check_initial(&cs.shape, xi)?;
    check_initial(&cs.shape, xibar)?;
    let n = cfg.validate(&cs.shape, noise)?;
    let res = noise.resolution();
    let mut plain = Stepper::new(cs.plain.as_ref(), &cs.shape, xi, cfg.t0, res)?;
    let mut barred = Stepper::new(cs.barred.as_ref(), &cs.shape, xibar, cfg.t0, res)?;
    let mut diagnostics = Diagnostics::default();
    let mut stopped_at = None;
    if plain.outside(cfg.stop_radius) || barred.outside(cfg.stop_radius) {
        stopped_at = Some(cfg.t0);
    }
    let mut cursor = noise.cursor();
    while stopped_at.is_none() {
        let Some(piece) = cursor.next_piece() else { break };
        if piece.step >= n {
            break;
        }
        plain.advance(&piece, cursor.db())?;
        barred.advance(&piece, cursor.db())?;
        record(&mut diagnostics, &piece);
        if plain.outside(cfg.stop_radius) || barred.outside(cfg.stop_radius) {
            stopped_at = Some(plain.history.time_of(piece.end));
        }
    }
    Ok(PairResult { plain: plain.history, barred: barred.history, stopped_at, diagnostics })
}

fn record(d: &mut Diagnostics, piece: &Piece) {
    d.pieces += 1;
    if piece.mark.is_some() {
        d.jumps += 1;
    }
    d.steps = piece.step + 1;
}

/// Ensemble estimate of `E sup_t |X(t)|^2` over each full history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub paths: usize,
    pub mean_sup_sq: f64,
    pub std_error: f64,
}

pub fn moment_diagnostic(paths: &[PathResult]) -> MomentSummary {
    let mut sups: Vec<f64> = paths.iter().map(|p| p.history.sup_sq_norm_from(i64::MIN)).collect();
    sups.sort_by(f64::total_cmp);
    let n = sups.len() as f64;
    let mean = sups.iter().sum::<f64>() / n;
    let var = if sups.len() > 1 { sups.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    MomentSummary { paths: sups.len(), mean_sup_sq: mean, std_error: (var / n).sqrt() }
}

/// Runs `f` for path indices `0..n` in parallel, results in index order.
pub fn par_paths<T: Send>(n: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..n as u64).into_par_iter().map(f).collect()
}
