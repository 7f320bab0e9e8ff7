//! Seeded Brownian and Poisson drivers shared by both equations of a coupled pair.
//!
//! Every realization is a pure function of its [`SeedRecord`]. Ensembles derive
//! one record per path from a master seed (`ChaCha8` stream splitting), so the
//! order in which paths are generated or reduced never changes any path.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segment::TICKS_PER_STEP;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),
    #[error("base step must be positive and finite, got {0}")]
    ZeroStep(f64),
    #[error("events must be strictly increasing in time (event {index})")]
    UnsortedEvents { index: usize },
    #[error("unknown mark `{0}`")]
    UnknownMark(String),
    #[error("event time {0} is outside the horizon")]
    EventOutOfHorizon(f64),
    #[error("invalid mark measure: {0}")]
    InvalidMeasure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub label: String,
    pub weight: f64,
    /// Numeric value bound to the symbol `z` in coefficient expressions.
    #[serde(default)]
    pub value: f64,
}

/// Finite mark space `E = {z_1..z_K}` with intensities `nu_k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Mark>", into = "Vec<Mark>")]
pub struct MarkMeasure {
    marks: Vec<Mark>,
}

impl MarkMeasure {
    pub fn new(marks: Vec<Mark>) -> Result<Self, NoiseError> {
        for (k, m) in marks.iter().enumerate() {
            if !(m.weight.is_finite() && m.weight > 0.0) {
                return Err(NoiseError::InvalidMeasure(format!("mark `{}` has weight {}", m.label, m.weight)));
            }
            if !m.value.is_finite() {
                return Err(NoiseError::InvalidMeasure(format!("mark `{}` has a non-finite value", m.label)));
            }
            if marks[..k].iter().any(|o| o.label == m.label) {
                return Err(NoiseError::InvalidMeasure(format!("duplicate mark `{}`", m.label)));
            }
        }
        Ok(MarkMeasure { marks })
    }

    pub fn empty() -> Self {
        MarkMeasure::default()
    }

    /// A single mark `z1` with intensity `weight` and value 1.
    pub fn single(weight: f64) -> Self {
        MarkMeasure::new(vec![Mark { label: "z1".into(), weight, value: 1.0 }]).expect("valid single mark")
    }

    /// Marks `z1..zK` with the given intensities and values `1..K`.
    pub fn from_weights(weights: &[f64]) -> Result<Self, NoiseError> {
        MarkMeasure::new(
            weights
                .iter()
                .enumerate()
                .map(|(k, &w)| Mark { label: format!("z{}", k + 1), weight: w, value: (k + 1) as f64 })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.marks[k].weight
    }

    pub fn total_mass(&self) -> f64 {
        self.marks.iter().map(|m| m.weight).sum()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.marks.iter().position(|m| m.label == label)
    }
}

impl TryFrom<Vec<Mark>> for MarkMeasure {
    type Error = NoiseError;

    fn try_from(marks: Vec<Mark>) -> Result<Self, Self::Error> {
        MarkMeasure::new(marks)
    }
}

impl From<MarkMeasure> for Vec<Mark> {
    fn from(m: MarkMeasure) -> Self {
        m.marks
    }
}

/// Provenance of a realization: master seed and path index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    pub path: u64,
}

impl SeedRecord {
    pub fn new(master: u64, path: u64) -> Self {
        SeedRecord { master, path }
    }

    const GAUSSIAN: u64 = 0;
    const ARRIVALS: u64 = 1;

    fn stream(&self, purpose: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.path.wrapping_mul(2).wrapping_add(purpose));
        rng
    }

    /// Independent generator keyed by `(step, j)` for Brownian-bridge splits.
    fn bridge(&self, step: usize, j: usize) -> ChaCha8Rng {
        let key = splitmix(splitmix(splitmix(self.master ^ 0x6272_6964_6765) ^ self.path) ^ step as u64)
            ^ (j as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        ChaCha8Rng::seed_from_u64(splitmix(key))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One arrival of the Poisson random measure, on the tick grid relative to `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub tick: i64,
    pub mark: usize,
}

/// Horizon, step and driver dimensions shared by every path of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub m: usize,
    pub measure: MarkMeasure,
    pub t0: f64,
    pub horizon: f64,
    pub base_step: f64,
}

impl NoiseSpec {
    fn steps(&self) -> Result<usize, NoiseError> {
        if !(self.base_step > 0.0 && self.base_step.is_finite()) {
            return Err(NoiseError::ZeroStep(self.base_step));
        }
        let span = self.horizon - self.t0;
        if !(span > 0.0 && span.is_finite() && self.t0.is_finite()) {
            return Err(NoiseError::InvalidHorizon(format!("need t0 < T, got [{}, {}]", self.t0, self.horizon)));
        }
        let n = (span / self.base_step).round();
        if n < 1.0 || (n * self.base_step - span).abs() > 1e-9 * span {
            return Err(NoiseError::InvalidHorizon(format!("step {} does not divide T - t0 = {span}", self.base_step)));
        }
        Ok(n as usize)
    }

    /// Realization for path `seed.path` of the ensemble keyed by `seed.master`.
    pub fn realize(&self, seed: SeedRecord) -> Result<NoiseRealization, NoiseError> {
        let n = self.steps()?;
        let sd = self.base_step.sqrt();
        let mut gauss = seed.stream(SeedRecord::GAUSSIAN);
        let increments: Vec<f64> = (0..n * self.m).map(|_| sd * gauss.sample::<f64, _>(StandardNormal)).collect();

        let mut events = Vec::new();
        let mass = self.measure.total_mass();
        if mass > 0.0 {
            let mut rng = seed.stream(SeedRecord::ARRIVALS);
            let gap = Exp::new(mass).expect("positive rate");
            let pick = WeightedIndex::new(self.measure.marks.iter().map(|m| m.weight)).expect("positive weights");
            let resolution = self.base_step / TICKS_PER_STEP as f64;
            let last_tick = n as i64 * TICKS_PER_STEP;
            let span = self.horizon - self.t0;
            let mut elapsed = 0.0;
            let mut prev = 0_i64;
            loop {
                elapsed += gap.sample(&mut rng);
                if elapsed > span {
                    break;
                }
                let mark = pick.sample(&mut rng);
                // Snap to the tick grid; collisions move to the next free tick.
                let tick = ((elapsed / resolution).round() as i64).max(prev + 1);
                if tick > last_tick {
                    break;
                }
                events.push(JumpEvent { tick, mark });
                prev = tick;
            }
        }
        Ok(NoiseRealization {
            m: self.m,
            t0: self.t0,
            horizon: self.horizon,
            base_step: self.base_step,
            n_marks: self.measure.len(),
            increments,
            events,
            seed,
        })
    }
}

/// Brownian increments per base step plus marked arrival times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization {
    m: usize,
    t0: f64,
    horizon: f64,
    base_step: f64,
    n_marks: usize,
    /// Row-major `steps x m`.
    increments: Vec<f64>,
    events: Vec<JumpEvent>,
    seed: SeedRecord,
}

/// Single-path realization for `seed` (path index 0).
pub fn generate(
    seed: u64,
    m: usize,
    measure: &MarkMeasure,
    t0: f64,
    horizon: f64,
    base_step: f64,
) -> Result<NoiseRealization, NoiseError> {
    NoiseSpec { m, measure: measure.clone(), t0, horizon, base_step }.realize(SeedRecord::new(seed, 0))
}

impl NoiseRealization {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn base_step(&self) -> f64 {
        self.base_step
    }

    pub fn seed(&self) -> SeedRecord {
        self.seed
    }

    pub fn n_marks(&self) -> usize {
        self.n_marks
    }

    pub fn resolution(&self) -> f64 {
        self.base_step / TICKS_PER_STEP as f64
    }

    pub fn steps(&self) -> usize {
        if self.m == 0 {
            ((self.horizon - self.t0) / self.base_step).round() as usize
        } else {
            self.increments.len() / self.m
        }
    }

    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.m..(step + 1) * self.m]
    }

    pub fn events(&self) -> &[JumpEvent] {
        &self.events
    }

    pub fn event_time(&self, e: &JumpEvent) -> f64 {
        self.t0 + e.tick as f64 * self.resolution()
    }

    /// Replaces the arrival stream with `(time, mark index)` pairs; the Gaussian stream is kept.
    pub fn inject_events(&self, events: &[(f64, usize)]) -> Result<NoiseRealization, NoiseError> {
        let res = self.resolution();
        let last_tick = self.steps() as i64 * TICKS_PER_STEP;
        let mut out = Vec::with_capacity(events.len());
        for (index, &(t, mark)) in events.iter().enumerate() {
            if mark >= self.n_marks {
                return Err(NoiseError::UnknownMark(format!("#{mark}")));
            }
            let tick = ((t - self.t0) / res).round() as i64;
            if !(t > self.t0) || tick < 1 || tick > last_tick {
                return Err(NoiseError::EventOutOfHorizon(t));
            }
            if out.last().is_some_and(|e: &JumpEvent| e.tick >= tick) {
                return Err(NoiseError::UnsortedEvents { index });
            }
            out.push(JumpEvent { tick, mark });
        }
        Ok(NoiseRealization { events: out, ..self.clone() })
    }

    /// Like [`NoiseRealization::inject_events`] with marks given by label.
    pub fn inject_labelled(
        &self,
        measure: &MarkMeasure,
        events: &[(f64, String)],
    ) -> Result<NoiseRealization, NoiseError> {
        let resolved = events
            .iter()
            .map(|(t, label)| {
                measure.index_of(label).map(|k| (*t, k)).ok_or_else(|| NoiseError::UnknownMark(label.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.inject_events(&resolved)
    }

    /// The same realization restricted to `[t0, horizon]`; `horizon` must be on the step grid.
    pub fn truncated(&self, horizon: f64) -> Result<NoiseRealization, NoiseError> {
        let spec =
            NoiseSpec { m: self.m, measure: MarkMeasure::empty(), t0: self.t0, horizon, base_step: self.base_step };
        let n = spec.steps()?;
        if n > self.steps() {
            return Err(NoiseError::InvalidHorizon(format!("{horizon} exceeds {}", self.horizon)));
        }
        let last_tick = n as i64 * TICKS_PER_STEP;
        Ok(NoiseRealization {
            horizon,
            increments: self.increments[..n * self.m].to_vec(),
            events: self.events.iter().copied().filter(|e| e.tick <= last_tick).collect(),
            ..self.clone()
        })
    }

    /// The same Brownian path sampled on a step `factor` times longer.
    ///
    /// Arrival ticks are rescaled to the coarse resolution; arrivals that collide move to the next tick.
    pub fn coarsened(&self, factor: usize) -> Result<NoiseRealization, NoiseError> {
        let n = self.steps();
        if factor == 0 || !n.is_multiple_of(factor) {
            return Err(NoiseError::InvalidHorizon(format!("{factor} does not divide {n} steps")));
        }
        let m = self.m;
        let mut increments = vec![0.0; n / factor * m];
        for k in 0..n {
            for j in 0..m {
                increments[k / factor * m + j] += self.increments[k * m + j];
            }
        }
        let f = factor as i64;
        let mut events: Vec<JumpEvent> = Vec::with_capacity(self.events.len());
        for e in &self.events {
            let mut tick = (e.tick + f / 2) / f;
            if let Some(prev) = events.last() {
                tick = tick.max(prev.tick + 1);
            }
            events.push(JumpEvent { tick: tick.max(1), mark: e.mark });
        }
        let last_tick = (n / factor) as i64 * TICKS_PER_STEP;
        events.retain(|e| e.tick <= last_tick);
        Ok(NoiseRealization { base_step: self.base_step * factor as f64, increments, events, ..self.clone() })
    }

    /// Walks the union grid of base steps and arrival times.
    pub fn cursor(&self) -> DriverCursor<'_> {
        DriverCursor {
            noise: self,
            step: 0,
            next_event: 0,
            j_in_step: 0,
            tick: 0,
            remaining: vec![0.0; self.m],
            db: vec![0.0; self.m],
            bridge_z: vec![0.0; self.m],
            fresh_step: true,
        }
    }
}

/// One sub-interval `(start, end]` of the integration grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub start: i64,
    pub end: i64,
    pub dt: f64,
    /// Arrival at `end`, if any.
    pub mark: Option<usize>,
    /// Base step containing the piece.
    pub step: usize,
}

/// Lending iterator over [`Piece`]s; [`DriverCursor::db`] holds the Brownian increment of the last piece.
///
/// A base step split by arrivals gets its sub-increments from the Brownian bridge
/// conditioned on the stored step increment, so the increments of the pieces sum
/// to the step increment.
pub struct DriverCursor<'a> {
    noise: &'a NoiseRealization,
    step: usize,
    next_event: usize,
    j_in_step: usize,
    tick: i64,
    remaining: Vec<f64>,
    db: Vec<f64>,
    bridge_z: Vec<f64>,
    fresh_step: bool,
}

impl DriverCursor<'_> {
    pub fn db(&self) -> &[f64] {
        &self.db
    }

    pub fn next_piece(&mut self) -> Option<Piece> {
        let noise = self.noise;
        if self.step >= noise.steps() {
            return None;
        }
        let step_end = (self.step as i64 + 1) * TICKS_PER_STEP;
        if self.fresh_step {
            self.remaining.copy_from_slice(noise.increment(self.step));
            self.j_in_step = 0;
            self.fresh_step = false;
        }
        let start = self.tick;
        let event = noise.events.get(self.next_event).filter(|e| e.tick <= step_end);
        let (end, mark) = match event {
            Some(e) => (e.tick, Some(e.mark)),
            None => (step_end, None),
        };
        let res = noise.resolution();
        if end == step_end {
            self.db.copy_from_slice(&self.remaining);
        } else {
            // Bridge split of the remaining increment over (start, step_end].
            let left = (end - start) as f64;
            let total = (step_end - start) as f64;
            let frac = left / total;
            let sd = (left * (total - left) / total * res).sqrt();
            let mut rng = noise.seed.bridge(self.step, self.j_in_step);
            for z in self.bridge_z.iter_mut() {
                *z = rng.sample(StandardNormal);
            }
            for ((db, rem), z) in self.db.iter_mut().zip(self.remaining.iter_mut()).zip(&self.bridge_z) {
                *db = frac * *rem + sd * z;
                *rem -= *db;
            }
        }
        let dt = if start == self.step as i64 * TICKS_PER_STEP && end == step_end {
            noise.base_step
        } else {
            (end - start) as f64 * res
        };
        let piece = Piece { start, end, dt, mark, step: self.step };
        if mark.is_some() {
            self.next_event += 1;
            self.j_in_step += 1;
        }
        self.tick = end;
        if end == step_end {
            self.step += 1;
            self.fresh_step = true;
        }
        Some(piece)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(measure: MarkMeasure, horizon: f64, step: f64) -> NoiseSpec {
        NoiseSpec { m: 1, measure, t0: 0.0, horizon, base_step: step }
    }

    #[test]
    fn no_marks_means_no_jumps() {
        let n = generate(3, 2, &MarkMeasure::empty(), 0.0, 1.0, 0.01).unwrap();
        assert!(n.events().is_empty());
        assert_eq!(n.steps(), 100);
    }

    #[test]
    fn deterministic_per_seed() {
        let mm = MarkMeasure::from_weights(&[1.0, 2.0]).unwrap();
        let a = generate(42, 2, &mm, 0.0, 5.0, 0.01).unwrap();
        let b = generate(42, 2, &mm, 0.0, 5.0, 0.01).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate(43, 2, &mm, 0.0, 5.0, 0.01).unwrap());
    }

    #[test]
    fn horizon_and_step_errors() {
        let mm = MarkMeasure::empty();
        assert!(matches!(generate(0, 1, &mm, 1.0, 1.0, 0.1), Err(NoiseError::InvalidHorizon(_))));
        assert!(matches!(generate(0, 1, &mm, 0.0, 1.0, 0.0), Err(NoiseError::ZeroStep(_))));
        assert!(matches!(generate(0, 1, &mm, 0.0, 1.0, 0.3), Err(NoiseError::InvalidHorizon(_))));
    }

    #[test]
    fn arrivals_sorted_and_in_horizon() {
        let n =
            spec(MarkMeasure::from_weights(&[5.0, 5.0]).unwrap(), 20.0, 0.1).realize(SeedRecord::new(9, 3)).unwrap();
        assert!(!n.events().is_empty());
        assert!(n.events().windows(2).all(|w| w[0].tick < w[1].tick));
        let last = n.steps() as i64 * TICKS_PER_STEP;
        assert!(n.events().iter().all(|e| e.tick >= 1 && e.tick <= last && e.mark < 2));
    }

    #[test]
    fn inject_examples() {
        let base = spec(MarkMeasure::single(1.0), 2.0, 0.1).realize(SeedRecord::new(1, 0)).unwrap();
        let none = base.inject_events(&[]).unwrap();
        assert!(none.events().is_empty());
        assert_eq!(none.increment(5), base.increment(5));
        let one = base.inject_events(&[(1.0, 0)]).unwrap();
        assert_eq!(one.events().len(), 1);
        assert_eq!(one.event_time(&one.events()[0]), 1.0);
        assert!(matches!(base.inject_events(&[(1.0, 0), (1.0, 0)]), Err(NoiseError::UnsortedEvents { index: 1 })));
        assert!(matches!(base.inject_events(&[(1.0, 3)]), Err(NoiseError::UnknownMark(_))));
        assert!(matches!(base.inject_events(&[(2.5, 0)]), Err(NoiseError::EventOutOfHorizon(_))));
        assert!(base.inject_labelled(&MarkMeasure::single(1.0), &[(0.5, "z2".to_string())]).is_err());
    }

    #[test]
    fn pieces_tile_the_horizon_and_sum_to_step_increments() {
        let n = spec(MarkMeasure::single(30.0), 1.0, 0.1).realize(SeedRecord::new(5, 0)).unwrap();
        assert!(n.events().len() > 5);
        let mut cur = n.cursor();
        let mut tick = 0;
        let mut per_step = vec![0.0; n.steps()];
        let mut jumps = 0;
        while let Some(p) = cur.next_piece() {
            assert_eq!(p.start, tick);
            assert!(p.end > p.start);
            tick = p.end;
            per_step[p.step] += cur.db()[0];
            jumps += p.mark.is_some() as usize;
        }
        assert_eq!(tick, 10 * TICKS_PER_STEP);
        assert_eq!(jumps, n.events().len());
        for (k, s) in per_step.iter().enumerate() {
            assert!((s - n.increment(k)[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn truncation_keeps_prefix() {
        let n = spec(MarkMeasure::single(4.0), 2.0, 0.1).realize(SeedRecord::new(2, 7)).unwrap();
        let t = n.truncated(1.0).unwrap();
        assert_eq!(t.steps(), 10);
        assert_eq!(t.increment(9), n.increment(9));
        assert!(t.events().iter().all(|e| n.event_time(e) <= 1.0));
        assert!(n.truncated(3.0).is_err());
    }

    #[test]
    fn json_dump_replays() {
        let n = spec(MarkMeasure::single(2.0), 1.0, 0.25).realize(SeedRecord::new(8, 1)).unwrap();
        let back: NoiseRealization = serde_json::from_str(&serde_json::to_string(&n).unwrap()).unwrap();
        assert_eq!(back, n);
    }

    #[test]
    fn measure_validation() {
        assert!(MarkMeasure::from_weights(&[1.0, 0.0]).is_err());
        assert!(MarkMeasure::from_weights(&[f64::INFINITY]).is_err());
        assert_eq!(MarkMeasure::from_weights(&[1.0, 2.5]).unwrap().total_mass(), 3.5);
    }

    #[test]
    fn coarsening_sums_increments_and_keeps_event_times() {
        let mm = MarkMeasure::single(3.0);
        let fine = spec(mm, 1.0, 0.125).realize(SeedRecord::new(9, 1)).unwrap();
        let coarse = fine.coarsened(2).unwrap();
        assert_eq!(coarse.steps(), 4);
        assert_eq!(coarse.base_step(), 0.25);
        for k in 0..4 {
            assert_eq!(coarse.increment(k)[0], fine.increment(2 * k)[0] + fine.increment(2 * k + 1)[0]);
        }
        assert_eq!(coarse.events().len(), fine.events().len());
        for (a, b) in coarse.events().iter().zip(fine.events()) {
            assert!((coarse.event_time(a) - fine.event_time(b)).abs() <= coarse.resolution());
        }
        assert!(fine.coarsened(3).is_err());
    }
}
