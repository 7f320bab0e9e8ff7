//! Cadlag path buffers.
//!
//! A [`Segment`] is a finitely generated cadlag path on `[-r0, 0]`: values at
//! strictly increasing nodes, linear interpolation in between, and optional
//! pre-jump (left-limit) values at nodes where the path is discontinuous.
//! A [`History`] is the same representation over a growing time axis
//! `[t0 - r0, T]`, stored on an integer tick grid so that jump times can be
//! inserted without float-equality ambiguity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of history ticks per solver base step.
pub const TICKS_PER_STEP: i64 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentError {
    #[error("invalid segment: {0}")]
    Invalid(String),
    #[error("skeleton mismatch: {0}")]
    SkeletonMismatch(String),
    #[error("time {t} is outside the covered range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
}

/// Location where `a <= b` fails: component (0-based) and node time.
///
/// `left_limit` is set when the failing value is a pre-jump value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderWitness {
    pub component: usize,
    pub theta: f64,
    pub left_limit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    dim: usize,
    r0: f64,
    thetas: Vec<f64>,
    /// Row-major `len x dim`.
    values: Vec<f64>,
    /// Sorted node indices carrying a pre-jump value (never the first node).
    jump_nodes: Vec<usize>,
    /// Row-major `jump_nodes.len() x dim`.
    jump_pre: Vec<f64>,
}

impl Segment {
    /// Builds a segment from `(theta, value)` nodes and `(theta, pre_jump_value)` marks.
    pub fn new(
        dim: usize,
        r0: f64,
        nodes: Vec<(f64, Vec<f64>)>,
        jumps: Vec<(f64, Vec<f64>)>,
    ) -> Result<Self, SegmentError> {
        if dim == 0 {
            return Err(SegmentError::Invalid("dimension must be positive".into()));
        }
        if !(r0.is_finite() && r0 >= 0.0) {
            return Err(SegmentError::Invalid(format!("r0 must be finite and >= 0, got {r0}")));
        }
        let mut thetas = Vec::with_capacity(nodes.len());
        let mut values = Vec::with_capacity(nodes.len() * dim);
        for (theta, v) in nodes {
            if v.len() != dim {
                return Err(SegmentError::Invalid(format!(
                    "node at {theta} has {} components, expected {dim}",
                    v.len()
                )));
            }
            thetas.push(theta);
            values.extend_from_slice(&v);
        }
        let mut jump_nodes = Vec::with_capacity(jumps.len());
        let mut jump_pre = Vec::with_capacity(jumps.len() * dim);
        let mut sorted_jumps = jumps;
        sorted_jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (theta, pre) in sorted_jumps {
            if pre.len() != dim {
                return Err(SegmentError::Invalid(format!(
                    "jump at {theta} has {} components, expected {dim}",
                    pre.len()
                )));
            }
            let k = thetas
                .iter()
                .position(|&th| th == theta)
                .ok_or_else(|| SegmentError::Invalid(format!("jump at {theta} is not a node")))?;
            if jump_nodes.last() == Some(&k) {
                return Err(SegmentError::Invalid(format!("duplicate jump at {theta}")));
            }
            jump_nodes.push(k);
            jump_pre.extend_from_slice(&pre);
        }
        let seg = Segment { dim, r0, thetas, values, jump_nodes, jump_pre };
        seg.validate()?;
        Ok(seg)
    }

    fn validate(&self) -> Result<(), SegmentError> {
        let first = *self.thetas.first().ok_or_else(|| SegmentError::Invalid("segment has no nodes".into()))?;
        if first != -self.r0 {
            return Err(SegmentError::Invalid(format!("first node {first} is not -r0 = {}", -self.r0)));
        }
        if *self.thetas.last().unwrap() != 0.0 {
            return Err(SegmentError::Invalid("last node is not 0".into()));
        }
        if self.thetas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SegmentError::Invalid("node times must be strictly increasing".into()));
        }
        if self.values.iter().chain(&self.jump_pre).any(|v| !v.is_finite()) {
            return Err(SegmentError::Invalid("non-finite value".into()));
        }
        if self.jump_nodes.first() == Some(&0) {
            return Err(SegmentError::Invalid("a jump cannot sit on the left endpoint".into()));
        }
        Ok(())
    }

    /// An empty buffer, to be filled by [`History::fill_window`] or the in-place builders.
    pub fn scratch(dim: usize, r0: f64) -> Self {
        Segment { dim, r0, thetas: Vec::new(), values: Vec::new(), jump_nodes: Vec::new(), jump_pre: Vec::new() }
    }

    pub fn constant(r0: f64, value: &[f64]) -> Self {
        let mut seg = Segment::scratch(value.len(), r0);
        if r0 > 0.0 {
            seg.thetas.push(-r0);
            seg.values.extend_from_slice(value);
        }
        seg.thetas.push(0.0);
        seg.values.extend_from_slice(value);
        seg
    }

    pub fn zero(dim: usize, r0: f64) -> Self {
        Segment::constant(r0, &vec![0.0; dim])
    }

    /// Samples `f(theta)` on `nodes + 1` equally spaced points of `[-r0, 0]`.
    pub fn from_fn(dim: usize, r0: f64, intervals: usize, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let mut seg = Segment::scratch(dim, r0);
        let intervals = if r0 > 0.0 { intervals.max(1) } else { 0 };
        let mut buf = vec![0.0; dim];
        for k in 0..=intervals {
            let theta = if k == 0 {
                -r0
            } else if k == intervals {
                0.0
            } else {
                -r0 + r0 * k as f64 / intervals as f64
            };
            f(theta, &mut buf);
            seg.thetas.push(theta);
            seg.values.extend_from_slice(&buf);
        }
        seg
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn node_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Pre-jump value at node `k`, if the path jumps there.
    pub fn pre_jump(&self, k: usize) -> Option<&[f64]> {
        self.jump_nodes.binary_search(&k).ok().map(|j| &self.jump_pre[j * self.dim..(j + 1) * self.dim])
    }

    /// `(node index, pre-jump value)` for every jump mark.
    pub fn jumps(&self) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        self.jump_nodes.iter().enumerate().map(move |(j, &k)| (k, &self.jump_pre[j * self.dim..(j + 1) * self.dim]))
    }

    /// Value at `theta = 0`.
    pub fn head(&self) -> &[f64] {
        self.node(self.len() - 1)
    }

    /// Right-continuous evaluation of component `i` at `theta`; `theta` is clamped to `[-r0, 0]`.
    pub fn eval(&self, i: usize, theta: f64) -> f64 {
        let k = self.thetas.partition_point(|&th| th <= theta);
        if k == 0 {
            return self.values[i];
        }
        if self.thetas[k - 1] == theta || k == self.len() {
            return self.values[(k - 1) * self.dim + i];
        }
        let (t0, t1) = (self.thetas[k - 1], self.thetas[k]);
        let v0 = self.values[(k - 1) * self.dim + i];
        let v1 = self.left_end(k, i);
        v0 + (v1 - v0) * (theta - t0) / (t1 - t0)
    }

    /// Left limit of component `i` at `theta` (equal to [`Segment::eval`] off jump marks).
    pub fn left_limit(&self, i: usize, theta: f64) -> f64 {
        match self.thetas.binary_search_by(|th| th.total_cmp(&theta)) {
            Ok(k) => self.left_end(k, i),
            Err(_) => self.eval(i, theta),
        }
    }

    fn left_end(&self, k: usize, i: usize) -> f64 {
        match self.jump_nodes.binary_search(&k) {
            Ok(j) => self.jump_pre[j * self.dim + i],
            Err(_) => self.values[k * self.dim + i],
        }
    }

    /// `sum_i sup_theta |x^i(theta)|`, attained at nodes or pre-jump values.
    pub fn sup_norm(&self) -> f64 {
        (0..self.dim).map(|i| self.component_sup(i)).sum()
    }

    /// `sup_theta |x^i(theta)|`.
    pub fn component_sup(&self, i: usize) -> f64 {
        let nodes = self.values.iter().skip(i).step_by(self.dim);
        let pres = self.jump_pre.iter().skip(i).step_by(self.dim);
        nodes.chain(pres).fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn same_skeleton(&self, other: &Segment) -> bool {
        self.dim == other.dim
            && self.r0 == other.r0
            && self.thetas == other.thetas
            && self.jump_nodes == other.jump_nodes
    }

    fn check_compatible(&self, other: &Segment) -> Result<(), SegmentError> {
        if self.dim != other.dim {
            return Err(SegmentError::SkeletonMismatch(format!("dimensions differ ({} vs {})", self.dim, other.dim)));
        }
        if self.r0 != other.r0 {
            return Err(SegmentError::SkeletonMismatch(format!("delay lengths differ ({} vs {})", self.r0, other.r0)));
        }
        Ok(())
    }

    /// Re-expresses the path on a superset of its nodes and jump marks.
    ///
    /// `thetas` must contain every current node; `jump_thetas` every current jump time.
    fn refined(&self, thetas: &[f64], jump_thetas: &[f64]) -> Segment {
        let mut out = Segment::scratch(self.dim, self.r0);
        for &th in thetas {
            out.thetas.push(th);
            for i in 0..self.dim {
                out.values.push(self.eval(i, th));
            }
        }
        for &th in jump_thetas {
            let k = out.thetas.binary_search_by(|x| x.total_cmp(&th)).expect("jump time is a node");
            out.jump_nodes.push(k);
            for i in 0..self.dim {
                out.jump_pre.push(self.left_limit(i, th));
            }
        }
        out
    }

    /// Refines both operands to the union of their node sets and jump marks.
    pub fn align(a: &Segment, b: &Segment) -> Result<(Segment, Segment), SegmentError> {
        a.check_compatible(b)?;
        if a.same_skeleton(b) {
            return Ok((a.clone(), b.clone()));
        }
        let thetas = sorted_union(&a.thetas, &b.thetas);
        let ja: Vec<f64> = a.jump_nodes.iter().map(|&k| a.thetas[k]).collect();
        let jb: Vec<f64> = b.jump_nodes.iter().map(|&k| b.thetas[k]).collect();
        let jumps = sorted_union(&ja, &jb);
        Ok((a.refined(&thetas, &jumps), b.refined(&thetas, &jumps)))
    }

    /// Componentwise order check over all nodes and pre-jump values.
    pub fn leq(&self, other: &Segment) -> Result<bool, SegmentError> {
        Ok(self.leq_witness(other)?.is_none())
    }

    /// `None` when `self <= other`; otherwise the first failing location.
    pub fn leq_witness(&self, other: &Segment) -> Result<Option<OrderWitness>, SegmentError> {
        let (a, b) = Segment::align(self, other)?;
        for k in 0..a.len() {
            if let (Some(pa), Some(pb)) = (a.pre_jump(k), b.pre_jump(k)) {
                if let Some(i) = (0..a.dim).find(|&i| pa[i] > pb[i]) {
                    return Ok(Some(OrderWitness { component: i, theta: a.thetas[k], left_limit: true }));
                }
            }
            let (va, vb) = (a.node(k), b.node(k));
            if let Some(i) = (0..a.dim).find(|&i| va[i] > vb[i]) {
                return Ok(Some(OrderWitness { component: i, theta: a.thetas[k], left_limit: false }));
            }
        }
        Ok(None)
    }

    fn zip_with(&self, other: &Segment, f: impl Fn(f64, f64) -> f64) -> Result<Segment, SegmentError> {
        let (mut a, b) = Segment::align(self, other)?;
        for (x, y) in a.values.iter_mut().zip(&b.values) {
            *x = f(*x, *y);
        }
        for (x, y) in a.jump_pre.iter_mut().zip(&b.jump_pre) {
            *x = f(*x, *y);
        }
        Ok(a)
    }

    /// Componentwise minimum.
    pub fn meet(&self, other: &Segment) -> Result<Segment, SegmentError> {
        self.zip_with(other, f64::min)
    }

    /// Componentwise maximum, `-((-a) meet (-b))`.
    pub fn join(&self, other: &Segment) -> Result<Segment, SegmentError> {
        self.neg().meet(&other.neg()).map(|s| s.neg())
    }

    /// `self + scale * other` on the aligned skeleton.
    pub fn add_scaled(&self, other: &Segment, scale: f64) -> Result<Segment, SegmentError> {
        self.zip_with(other, |x, y| x + scale * y)
    }

    /// Writes `self + scale * other` into `out`, reusing its buffers.
    ///
    /// Falls back to an allocating alignment when the skeletons differ.
    pub fn add_scaled_into(&self, other: &Segment, scale: f64, out: &mut Segment) -> Result<(), SegmentError> {
        if !self.same_skeleton(other) {
            *out = self.add_scaled(other, scale)?;
            return Ok(());
        }
        out.dim = self.dim;
        out.r0 = self.r0;
        out.thetas.clear();
        out.thetas.extend_from_slice(&self.thetas);
        out.jump_nodes.clear();
        out.jump_nodes.extend_from_slice(&self.jump_nodes);
        out.values.clear();
        out.values.extend(self.values.iter().zip(&other.values).map(|(x, y)| x + scale * y));
        out.jump_pre.clear();
        out.jump_pre.extend(self.jump_pre.iter().zip(&other.jump_pre).map(|(x, y)| x + scale * y));
        Ok(())
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Segment {
        let mut out = self.clone();
        out.values.iter_mut().chain(out.jump_pre.iter_mut()).for_each(|v| *v = f(*v));
        out
    }

    pub fn neg(&self) -> Segment {
        self.map_values(|v| -v)
    }

    /// Componentwise clip of every node and pre-jump value to `[lo, hi]`.
    pub fn clip(&self, lo: f64, hi: f64) -> Segment {
        self.map_values(|v| v.clamp(lo, hi))
    }

    pub fn to_literal(&self) -> SegmentLiteral {
        SegmentLiteral {
            r0: self.r0,
            d: self.dim,
            nodes: (0..self.len()).map(|k| (self.thetas[k], self.node(k).to_vec())).collect(),
            jumps: self.jumps().map(|(k, pre)| (self.thetas[k], pre.to_vec())).collect(),
        }
    }
}

/// JSON form `{r0, d, nodes: [[theta, [v..]]..], jumps: [[theta, [pre..]]..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLiteral {
    pub r0: f64,
    pub d: usize,
    pub nodes: Vec<(f64, Vec<f64>)>,
    #[serde(default)]
    pub jumps: Vec<(f64, Vec<f64>)>,
}

impl TryFrom<SegmentLiteral> for Segment {
    type Error = SegmentError;

    fn try_from(lit: SegmentLiteral) -> Result<Self, Self::Error> {
        Segment::new(lit.d, lit.r0, lit.nodes, lit.jumps)
    }
}

impl From<&Segment> for SegmentLiteral {
    fn from(seg: &Segment) -> Self {
        seg.to_literal()
    }
}

impl Serialize for Segment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_literal().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Segment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let lit = SegmentLiteral::deserialize(deserializer)?;
        Segment::try_from(lit).map_err(serde::de::Error::custom)
    }
}

fn sorted_union(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// Solution path over `[t0 - r0, T_current]` on an integer tick grid.
///
/// Absolute time of tick `k` is `t0 + k * resolution`.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    dim: usize,
    r0: f64,
    r0_ticks: i64,
    t0: f64,
    resolution: f64,
    ticks: Vec<i64>,
    values: Vec<f64>,
    jump_nodes: Vec<usize>,
    jump_pre: Vec<f64>,
}

impl History {
    /// Starts a history whose restriction to `[t0 - r0, t0]` is `initial`.
    ///
    /// Node times of `initial` must lie on the tick grid (within `1e-9` relative).
    pub fn from_initial(initial: &Segment, t0: f64, resolution: f64) -> Result<Self, SegmentError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(SegmentError::Invalid(format!("bad tick resolution {resolution}")));
        }
        let r0_ticks = snap(initial.r0, resolution)
            .ok_or_else(|| SegmentError::Invalid(format!("r0 = {} is off the tick grid", initial.r0)))?;
        let mut ticks = Vec::with_capacity(initial.len());
        for &th in &initial.thetas {
            ticks.push(
                snap(th, resolution).ok_or_else(|| SegmentError::Invalid(format!("node {th} is off the tick grid")))?,
            );
        }
        if ticks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SegmentError::Invalid("nodes collide on the tick grid".into()));
        }
        Ok(History {
            dim: initial.dim,
            r0: initial.r0,
            r0_ticks,
            t0,
            resolution,
            ticks,
            values: initial.values.clone(),
            jump_nodes: initial.jump_nodes.clone(),
            jump_pre: initial.jump_pre.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn ticks(&self) -> &[i64] {
        &self.ticks
    }

    pub fn end_tick(&self) -> i64 {
        *self.ticks.last().expect("history is never empty")
    }

    pub fn time_of(&self, tick: i64) -> f64 {
        self.t0 + tick as f64 * self.resolution
    }

    /// Nearest tick to absolute time `t`.
    pub fn tick_of(&self, t: f64) -> i64 {
        ((t - self.t0) / self.resolution).round() as i64
    }

    pub fn end_time(&self) -> f64 {
        self.time_of(self.end_tick())
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn pre_jump(&self, k: usize) -> Option<&[f64]> {
        self.jump_nodes.binary_search(&k).ok().map(|j| &self.jump_pre[j * self.dim..(j + 1) * self.dim])
    }

    /// Node indices with a pre-jump value, in time order.
    pub fn jump_nodes(&self) -> &[usize] {
        &self.jump_nodes
    }

    /// Index of the first node at or after `t0`.
    pub fn origin_index(&self) -> usize {
        self.ticks.partition_point(|&k| k < 0)
    }

    pub fn last(&self) -> &[f64] {
        self.node(self.len() - 1)
    }

    /// Appends a continuity node.
    pub fn push(&mut self, tick: i64, value: &[f64]) {
        debug_assert!(tick > self.end_tick());
        debug_assert_eq!(value.len(), self.dim);
        self.ticks.push(tick);
        self.values.extend_from_slice(value);
    }

    /// Turns the last node into a jump: its current value becomes the pre-jump value.
    pub fn jump_last(&mut self, post: &[f64]) {
        let k = self.len() - 1;
        let start = k * self.dim;
        self.jump_pre.extend_from_slice(&self.values[start..start + self.dim]);
        self.jump_nodes.push(k);
        self.values[start..start + self.dim].copy_from_slice(post);
    }

    /// Drops all nodes after `tick` (inclusive of jumps at later nodes).
    pub fn truncate_after(&mut self, tick: i64) {
        let keep = self.ticks.partition_point(|&k| k <= tick);
        self.ticks.truncate(keep);
        self.values.truncate(keep * self.dim);
        let kj = self.jump_nodes.partition_point(|&k| k < keep);
        self.jump_nodes.truncate(kj);
        self.jump_pre.truncate(kj * self.dim);
    }

    fn value_at_tick(&self, i: usize, tick: i64) -> f64 {
        let k = self.ticks.partition_point(|&x| x <= tick);
        if k == 0 {
            return self.values[i];
        }
        if self.ticks[k - 1] == tick || k == self.len() {
            return self.values[(k - 1) * self.dim + i];
        }
        let (a, b) = (self.ticks[k - 1], self.ticks[k]);
        let v0 = self.values[(k - 1) * self.dim + i];
        let v1 = match self.jump_nodes.binary_search(&k) {
            Ok(j) => self.jump_pre[j * self.dim + i],
            Err(_) => self.values[k * self.dim + i],
        };
        v0 + (v1 - v0) * ((tick - a) as f64 / (b - a) as f64)
    }

    /// Right-continuous value at absolute time `t` (snapped to the tick grid).
    pub fn value_at(&self, t: f64) -> Result<Vec<f64>, SegmentError> {
        let tick = self.tick_of(t);
        self.check_covered(t, tick, tick)?;
        Ok((0..self.dim).map(|i| self.value_at_tick(i, tick)).collect())
    }

    fn check_covered(&self, t: f64, start: i64, end: i64) -> Result<(), SegmentError> {
        if start < self.ticks[0] || end > self.end_tick() {
            return Err(SegmentError::OutOfRange { t, start: self.time_of(self.ticks[0]), end: self.end_time() });
        }
        Ok(())
    }

    /// Writes the window ending at tick `end` into `out`.
    ///
    /// With `left` set, the value at `theta = 0` is the left limit at `end`.
    pub fn fill_window(&self, end: i64, left: bool, out: &mut Segment) -> Result<(), SegmentError> {
        let start = end - self.r0_ticks;
        if start < self.ticks[0] || end > self.end_tick() {
            let t = self.time_of(end);
            return Err(SegmentError::OutOfRange {
                t,
                start: self.time_of(self.ticks[0]) + self.r0,
                end: self.end_time(),
            });
        }
        let dim = self.dim;
        out.dim = dim;
        out.r0 = self.r0;
        out.thetas.clear();
        out.values.clear();
        out.jump_nodes.clear();
        out.jump_pre.clear();
        // The window usually ends at the newest node, so scan back from there.
        let last_excl = if end == self.end_tick() { self.len() } else { self.ticks.partition_point(|&k| k <= end) };
        let mut first = last_excl;
        while first > 0 && self.ticks[first - 1] >= start {
            first -= 1;
        }
        let theta_of = |tick: i64| -> f64 {
            if tick == start {
                -self.r0
            } else if tick == end {
                0.0
            } else {
                (tick - end) as f64 * self.resolution
            }
        };
        if self.ticks[first] != start {
            out.thetas.push(-self.r0);
            for i in 0..dim {
                out.values.push(self.value_at_tick(i, start));
            }
        }
        let jfirst = self.jump_nodes.partition_point(|&k| k < first);
        let mut j = jfirst;
        for k in first..last_excl {
            let node = out.thetas.len();
            out.thetas.push(theta_of(self.ticks[k]));
            out.values.extend_from_slice(&self.values[k * dim..(k + 1) * dim]);
            if j < self.jump_nodes.len() && self.jump_nodes[j] == k {
                if node > 0 {
                    out.jump_nodes.push(node);
                    out.jump_pre.extend_from_slice(&self.jump_pre[j * dim..(j + 1) * dim]);
                }
                j += 1;
            }
        }
        if self.ticks[last_excl - 1] != end {
            out.thetas.push(0.0);
            for i in 0..dim {
                out.values.push(self.value_at_tick(i, end));
            }
        } else if left && out.jump_nodes.last() == Some(&(out.thetas.len() - 1)) {
            // X_{t-}: the value at 0 becomes the left limit and the mark disappears.
            let n = out.thetas.len() - 1;
            out.jump_nodes.pop();
            let pre: Vec<f64> = out.jump_pre.drain(out.jump_pre.len() - dim..).collect();
            out.values[n * dim..].copy_from_slice(&pre);
        } else if left && self.r0_ticks == 0 {
            if let Some(pre) = self.pre_jump(last_excl - 1) {
                out.values.copy_from_slice(pre);
            }
        }
        Ok(())
    }

    /// The segment `X_t`.
    pub fn segment_at(&self, t: f64) -> Result<Segment, SegmentError> {
        let mut out = Segment::scratch(self.dim, self.r0);
        self.fill_window(self.tick_of(t), false, &mut out)?;
        Ok(out)
    }

    /// The segment `X_{t-}`: as `X_t` but carrying the left limit at `theta = 0`.
    pub fn left_segment_at(&self, t: f64) -> Result<Segment, SegmentError> {
        let tick = self.tick_of(t);
        if tick <= 0 {
            return Err(SegmentError::OutOfRange { t, start: self.t0, end: self.end_time() });
        }
        let mut out = Segment::scratch(self.dim, self.r0);
        self.fill_window(tick, true, &mut out)?;
        Ok(out)
    }

    /// Euclidean `sup |X(t)|^2` over `[from_tick, end]`, including left limits.
    pub fn sup_sq_norm_from(&self, from_tick: i64) -> f64 {
        let first = self.ticks.partition_point(|&k| k < from_tick);
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let mut best = 0.0_f64;
        for k in first..self.len() {
            best = best.max(sq(self.node(k)));
        }
        for (j, &k) in self.jump_nodes.iter().enumerate() {
            if k > first {
                best = best.max(sq(&self.jump_pre[j * self.dim..(j + 1) * self.dim]));
            }
        }
        best
    }
}

/// `x / resolution` as an integer when it is one within `1e-9` relative.
fn snap(x: f64, resolution: f64) -> Option<i64> {
    let k = (x / resolution).round();
    let err = (k * resolution - x).abs();
    (err <= 1e-9 * x.abs().max(resolution)).then_some(k as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(r0: f64, a: f64, b: f64) -> Segment {
        Segment::new(1, r0, vec![(-r0, vec![a]), (0.0, vec![b])], vec![]).unwrap()
    }

    #[test]
    fn sup_norm_examples() {
        assert_eq!(Segment::zero(3, 2.0).sup_norm(), 0.0);
        assert_eq!(Segment::constant(1.0, &[1.0, -2.0]).sup_norm(), 3.0);
        assert_eq!(lin(1.0, -3.0, 1.0).sup_norm(), 3.0);
    }

    #[test]
    fn sup_norm_counts_pre_jump_values() {
        let s = Segment::new(
            1,
            1.0,
            vec![(-1.0, vec![0.0]), (-0.5, vec![0.5]), (0.0, vec![0.0])],
            vec![(-0.5, vec![-4.0])],
        )
        .unwrap();
        assert_eq!(s.sup_norm(), 4.0);
    }

    #[test]
    fn leq_examples() {
        let a = lin(1.0, 0.3, -0.2);
        assert!(a.leq(&a).unwrap());
        assert!(Segment::zero(1, 1.0).leq(&Segment::constant(1.0, &[1.0])).unwrap());
        let a = Segment::constant(1.5, &[0.0, 5.0]);
        let b = Segment::constant(1.5, &[1.0, 4.0]);
        let w = a.leq_witness(&b).unwrap().unwrap();
        assert_eq!(w.component, 1);
        assert_eq!(w.theta, -1.5);
    }

    #[test]
    fn binary_ops_reject_mismatched_shapes() {
        let a = Segment::zero(1, 1.0);
        assert!(matches!(a.leq(&Segment::zero(2, 1.0)), Err(SegmentError::SkeletonMismatch(_))));
        assert!(matches!(a.meet(&Segment::zero(1, 2.0)), Err(SegmentError::SkeletonMismatch(_))));
    }

    #[test]
    fn meet_examples() {
        let a = lin(1.0, 0.2, 0.7);
        assert_eq!(a.meet(&a).unwrap(), a);
        assert_eq!(Segment::zero(1, 1.0).meet(&Segment::constant(1.0, &[1.0])).unwrap(), Segment::zero(1, 1.0));
        let m = Segment::constant(0.0, &[1.0, -2.0]).meet(&Segment::constant(0.0, &[0.0, 3.0])).unwrap();
        assert_eq!(m.head(), &[0.0, -2.0]);
    }

    #[test]
    fn meet_refines_crossing_lines() {
        // Lines cross at -0.5; the union skeleton only has the endpoints, so the
        // nodewise minimum is the lower envelope at the nodes.
        let a = lin(1.0, 0.0, 1.0);
        let b = Segment::new(1, 1.0, vec![(-1.0, vec![1.0]), (-0.25, vec![0.0]), (0.0, vec![0.0])], vec![]).unwrap();
        let m = a.meet(&b).unwrap();
        assert_eq!(m.thetas(), &[-1.0, -0.25, 0.0]);
        assert_eq!(m.node(1), &[0.0]);
        assert!(m.leq(&a).unwrap() && m.leq(&b).unwrap());
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(Segment::new(1, 1.0, vec![(-0.5, vec![0.0]), (0.0, vec![0.0])], vec![]).is_err());
        assert!(Segment::new(1, 1.0, vec![(-1.0, vec![0.0]), (-1.0, vec![0.0]), (0.0, vec![0.0])], vec![]).is_err());
        assert!(Segment::new(1, 0.0, vec![(0.0, vec![f64::NAN])], vec![]).is_err());
        assert!(Segment::new(1, 1.0, vec![(-1.0, vec![0.0]), (0.0, vec![0.0])], vec![(-0.3, vec![1.0])]).is_err());
        assert!(Segment::new(1, 1.0, vec![(-1.0, vec![0.0]), (0.0, vec![0.0])], vec![(-1.0, vec![1.0])]).is_err());
    }

    #[test]
    fn eval_is_cadlag_at_jumps() {
        let s =
            Segment::new(1, 2.0, vec![(-2.0, vec![0.0]), (-1.0, vec![3.0]), (0.0, vec![3.0])], vec![(-1.0, vec![1.0])])
                .unwrap();
        assert_eq!(s.eval(0, -1.0), 3.0);
        assert_eq!(s.left_limit(0, -1.0), 1.0);
        assert_eq!(s.eval(0, -1.5), 0.5);
        assert_eq!(s.eval(0, -0.5), 3.0);
    }

    #[test]
    fn json_literal_round_trip() {
        let json = r#"{"r0":1.0,"d":1,"nodes":[[-1.0,[0.0]],[-0.5,[2.0]],[0.0,[1.0]]],"jumps":[[-0.5,[1.0]]]}"#;
        let s: Segment = serde_json::from_str(json).unwrap();
        assert_eq!(s.pre_jump(1), Some(&[1.0][..]));
        let back: Segment = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    fn one_jump_history() -> History {
        // Constant 2 on [-1, 0]; grows to 3 at t = 1, jumps to 4 there.
        let res = 0.25;
        let mut h = History::from_initial(&Segment::constant(1.0, &[2.0]), 0.0, res).unwrap();
        h.push(2, &[2.5]);
        h.push(4, &[3.0]);
        h.jump_last(&[4.0]);
        h.push(6, &[4.0]);
        h
    }

    #[test]
    fn constant_history_gives_constant_segments() {
        let mut h = History::from_initial(&Segment::constant(0.5, &[7.0]), 1.0, 0.125).unwrap();
        for k in 1..=8 {
            h.push(k, &[7.0]);
        }
        assert!(h.left_segment_at(1.0).is_err());
        for t in [1.125, 1.5, 1.75, 2.0] {
            let s = h.segment_at(t).unwrap();
            let l = h.left_segment_at(t).unwrap();
            assert_eq!(s.sup_norm(), 7.0);
            assert!(s.thetas().iter().all(|&th| s.eval(0, th) == 7.0));
            assert_eq!(s, l);
        }
    }

    #[test]
    fn segments_at_a_jump_time() {
        let h = one_jump_history();
        let s = h.segment_at(1.0).unwrap();
        let l = h.left_segment_at(1.0).unwrap();
        assert_eq!(s.head(), &[4.0]);
        assert_eq!(s.left_limit(0, 0.0), 3.0);
        assert_eq!(l.head(), &[3.0]);
        assert_eq!(l.pre_jump(l.len() - 1), None);
        // Off the jump time both coincide.
        assert_eq!(h.segment_at(1.25).unwrap(), h.left_segment_at(1.25).unwrap());
        assert_eq!(h.segment_at(0.5).unwrap(), h.left_segment_at(0.5).unwrap());
    }

    #[test]
    fn window_interpolates_off_grid_left_end() {
        let h = one_jump_history();
        let s = h.segment_at(1.25).unwrap();
        assert_eq!(s.thetas()[0], -1.0);
        assert_eq!(s.node(0), &[2.25]);
        // The jump is interior and keeps its mark.
        assert!(s.jumps().any(|(_, pre)| pre == [3.0]));
    }

    #[test]
    fn window_out_of_range() {
        let h = one_jump_history();
        assert!(matches!(h.segment_at(2.0), Err(SegmentError::OutOfRange { .. })));
        assert!(h.left_segment_at(0.0).is_err());
    }

    #[test]
    fn zero_delay_windows() {
        let mut h = History::from_initial(&Segment::constant(0.0, &[1.0]), 0.0, 0.5).unwrap();
        h.push(1, &[1.5]);
        h.jump_last(&[-1.0]);
        assert_eq!(h.segment_at(0.5).unwrap().head(), &[-1.0]);
        assert_eq!(h.left_segment_at(0.5).unwrap().head(), &[1.5]);
        assert_eq!(h.segment_at(0.5).unwrap().len(), 1);
    }

    #[test]
    fn truncate_after_drops_later_jumps() {
        let mut h = one_jump_history();
        h.truncate_after(3);
        assert_eq!(h.end_tick(), 2);
        assert!(h.jump_nodes().is_empty());
    }
}
