//! Constructive existence machinery: Bihari bounds, mollified and truncated
//! coefficients, the approximation cascade and a pathwise uniqueness check.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeff::{CoeffError, Coefficients, ControlFunction, Equation, Shape};
use crate::noise::{NoiseError, NoiseRealization, NoiseSpec, SeedRecord};
use crate::segment::{History, Segment, SegmentError};
use crate::solver::{solve_path, SolverConfig, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExistenceError {
    #[error("G^-1 argument {arg} is beyond the range of G")]
    RangeExceeded { arg: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

// ---------------------------------------------------------------------------
// Bihari

/// `G(s) = int_1^s dr / (r u(r))` and its inverse.
#[derive(Clone)]
pub struct BihariKernel {
    pub u: ControlFunction,
    tol: f64,
}

/// `ln s` beyond which `G^-1` gives up.
const LOG_LIMIT: f64 = 700.0;

impl BihariKernel {
    pub fn new(u: ControlFunction) -> Self {
        BihariKernel { u, tol: 1e-13 }
    }

    /// `G` as a function of `x = ln s`.
    fn g_log(&self, x: f64) -> f64 {
        if self.u.is_one() {
            return x;
        }
        let f = |y: f64| 1.0 / self.u.eval(y.exp());
        if x == 0.0 {
            return 0.0;
        }
        let (a, b, sign) = if x > 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
        // Split into unit pieces so the recursion sees the local scale.
        let pieces = (b - a).ceil().max(1.0) as usize;
        let w = (b - a) / pieces as f64;
        let mut total = 0.0;
        for k in 0..pieces {
            let lo = a + k as f64 * w;
            total += adaptive_simpson(&f, lo, lo + w, self.tol * w, 40);
        }
        sign * total
    }

    pub fn g(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.g_log(s.ln())
    }

    pub fn g_inv(&self, y: f64) -> Result<f64, ExistenceError> {
        if y == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        if y.is_nan() {
            return Err(ExistenceError::InvalidArgument("G^-1 of NaN".into()));
        }
        if self.u.is_one() {
            if y > LOG_LIMIT {
                return Err(ExistenceError::RangeExceeded { arg: y });
            }
            return Ok(y.exp());
        }
        // Bracket in ln s, expanding outward from 0.
        let (mut lo, mut hi) = (0.0_f64, 0.0_f64);
        let mut step = 1.0;
        if y > 0.0 {
            while self.g_log(hi) < y {
                lo = hi;
                hi += step;
                step *= 2.0;
                if hi > LOG_LIMIT {
                    return Err(ExistenceError::RangeExceeded { arg: y });
                }
            }
        } else if y < 0.0 {
            while self.g_log(lo) > y {
                hi = lo;
                lo -= step;
                step *= 2.0;
                if lo < -LOG_LIMIT {
                    return Ok(0.0);
                }
            }
        } else {
            return Ok(1.0);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.g_log(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, fa, fb, fc, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, c, fa, fc, fd, left, 0.5 * tol, depth - 1)
        + simpson_step(f, c, b, fc, fb, fe, right, 0.5 * tol, depth - 1)
}

/// `G^-1(G(a) + C t)`.
pub fn bihari_bound(k: &BihariKernel, a: f64, c: f64, t: f64) -> Result<f64, ExistenceError> {
    for (name, v) in [("a", a), ("C", c), ("t", t)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(ExistenceError::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    if c * t == 0.0 {
        return Ok(a);
    }
    k.g_inv(k.g(a) + c * t)
}

// ---------------------------------------------------------------------------
// Mollification

/// Law of `B(theta) = Btilde(r0 + 1 + theta)`, `theta in [-r0, 0]`, for a standard Brownian motion `Btilde`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifierLaw {
    pub r0: f64,
    pub samples: usize,
    pub seed: u64,
    /// Grid intervals of each sampled segment on `[-r0, 0]`.
    pub intervals: usize,
}

impl MollifierLaw {
    pub fn new(r0: f64, samples: usize, seed: u64) -> Self {
        MollifierLaw { r0, samples, seed, intervals: 16 }
    }

    /// The frozen sample set: `samples` independent `dim`-dimensional segments.
    pub fn draw(&self, dim: usize) -> Vec<Segment> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let k = if self.r0 > 0.0 { self.intervals.max(1) } else { 0 };
        let dt = if k > 0 { self.r0 / k as f64 } else { 0.0 };
        (0..self.samples)
            .map(|_| {
                let mut nodes = Vec::with_capacity(k + 1);
                let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                nodes.push((-self.r0, v.clone()));
                for j in 1..=k {
                    for x in v.iter_mut() {
                        *x += dt.sqrt() * Distribution::<f64>::sample(&StandardNormal, &mut rng);
                    }
                    let theta = if j == k { 0.0 } else { -self.r0 + j as f64 * dt };
                    nodes.push((theta, v.clone()));
                }
                Segment::new(dim, self.r0, nodes, vec![]).expect("valid Brownian segment")
            })
            .collect()
    }
}

/// Mean and standard error, per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// `b_n(t, xi) = E b(t, xi + eta / n)` over a frozen sample of `eta`, likewise `sigma_n`, `gamma_n`.
pub struct Mollified {
    base: Arc<dyn Coefficients>,
    shape: Shape,
    samples: Arc<Vec<Segment>>,
    scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Drift,
    Diffusion,
    Jump(usize),
}

impl Mollified {
    pub fn n(&self) -> f64 {
        1.0 / self.scale
    }

    pub fn samples(&self) -> usize {
        self.samples.len()
    }

    fn width(&self, part: Part) -> usize {
        match part {
            Part::Diffusion => self.shape.dim * self.shape.noise_dim,
            Part::Drift | Part::Jump(_) => self.shape.dim,
        }
    }

    fn eval_base(&self, part: Part, t: f64, x: &Segment, out: &mut [f64]) {
        match part {
            Part::Drift => self.base.drift(t, x, out),
            Part::Diffusion => self.base.diffusion(t, x, out),
            Part::Jump(k) => self.base.jump(t, x, k, out),
        }
    }

    /// Visits `f(x + eta_s / n)` for every frozen sample.
    fn for_each_shift(&self, part: Part, t: f64, x: &Segment, mut visit: impl FnMut(&[f64])) {
        let mut shifted = Segment::scratch(x.dim(), x.r0());
        let mut buf = vec![0.0; self.width(part)];
        for eta in self.samples.iter() {
            x.add_scaled_into(eta, self.scale, &mut shifted).expect("same dimension and delay");
            self.eval_base(part, t, &shifted, &mut buf);
            visit(&buf);
        }
    }

    fn mean_into(&self, part: Part, t: f64, x: &Segment, out: &mut [f64]) {
        out.fill(0.0);
        self.for_each_shift(part, t, x, |v| {
            for (o, y) in out.iter_mut().zip(v) {
                *o += y;
            }
        });
        let n = self.samples.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
    }

    /// Sample mean with its standard error.
    pub fn estimate(&self, part: Part, t: f64, x: &Segment) -> Estimate {
        let w = self.width(part);
        let (mut sum, mut sq) = (vec![0.0; w], vec![0.0; w]);
        self.for_each_shift(part, t, x, |v| {
            for i in 0..w {
                sum[i] += v[i];
                sq[i] += v[i] * v[i];
            }
        });
        let n = self.samples.len() as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std_error = mean
            .iter()
            .zip(&sq)
            .map(|(m, q)| if n > 1.0 { ((q / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt() } else { f64::INFINITY })
            .collect();
        Estimate { mean, std_error }
    }
}

impl Coefficients for Mollified {
    fn drift(&self, t: f64, x: &Segment, out: &mut [f64]) {
        self.mean_into(Part::Drift, t, x, out);
    }

    fn diffusion(&self, t: f64, x: &Segment, out: &mut [f64]) {
        self.mean_into(Part::Diffusion, t, x, out);
    }

    fn jump(&self, t: f64, x: &Segment, mark: usize, out: &mut [f64]) {
        self.mean_into(Part::Jump(mark), t, x, out);
    }
}

/// Mollifies every coefficient of `eq` at level `n`.
pub fn mollify(eq: &Equation, law: &MollifierLaw, n: u32) -> Result<Mollified, ExistenceError> {
    if n == 0 {
        return Err(ExistenceError::InvalidArgument("mollifier level must be >= 1".into()));
    }
    if law.r0 != eq.shape.r0 || law.samples == 0 {
        return Err(ExistenceError::InvalidArgument(format!(
            "mollifier law needs r0 = {} and at least one sample",
            eq.shape.r0
        )));
    }
    Ok(Mollified {
        base: eq.coeffs.clone(),
        shape: eq.shape.clone(),
        samples: Arc::new(law.draw(eq.shape.dim)),
        scale: 1.0 / f64::from(n),
    })
}

fn mollify_shared(eq: &Equation, samples: Arc<Vec<Segment>>, n: u32) -> Mollified {
    Mollified { base: eq.coeffs.clone(), shape: eq.shape.clone(), samples, scale: 1.0 / f64::from(n) }
}

// ---------------------------------------------------------------------------
// Truncation

/// `alpha_n(xi)`: every node and pre-jump value clipped to `[-n, n]`.
pub fn truncate(xi: &Segment, n: u32) -> Segment {
    let n = f64::from(n);
    xi.clip(-n, n)
}

/// `b_n(t, xi) = b(t min n, alpha_n(xi))`, likewise for `sigma` and `gamma`.
pub struct Truncated {
    base: Arc<dyn Coefficients>,
    n: f64,
}

impl Truncated {
    fn args(&self, t: f64, x: &Segment) -> (f64, Segment) {
        (t.min(self.n), x.clip(-self.n, self.n))
    }
}

impl Coefficients for Truncated {
    fn drift(&self, t: f64, x: &Segment, out: &mut [f64]) {
        let (t, x) = self.args(t, x);
        self.base.drift(t, &x, out);
    }

    fn diffusion(&self, t: f64, x: &Segment, out: &mut [f64]) {
        let (t, x) = self.args(t, x);
        self.base.diffusion(t, &x, out);
    }

    fn jump(&self, t: f64, x: &Segment, mark: usize, out: &mut [f64]) {
        let (t, x) = self.args(t, x);
        self.base.jump(t, &x, mark, out);
    }
}

pub fn truncate_coeff(eq: &Equation, n: u32) -> Equation {
    Equation::new(eq.shape.clone(), Arc::new(Truncated { base: eq.coeffs.clone(), n: f64::from(n) }))
}

// ---------------------------------------------------------------------------
// Cascade

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeGap {
    pub n: u32,
    /// Level compared against: the next listed level, or `2n` for the last one.
    pub next: u32,
    /// `sup_t |X^(n)(t) - X^(next)(t)|` over nodes and left limits at `t >= t0`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeLevel {
    pub n: u32,
    pub history: History,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeReport {
    /// Listed levels followed by the reference level.
    pub levels: Vec<CascadeLevel>,
    pub gaps: Vec<CascadeGap>,
}

impl CascadeReport {
    /// The path at the finest listed level.
    pub fn limit(&self) -> &History {
        &self.levels[self.levels.len() - 2].history
    }
}

/// Euclidean sup-distance between two histories on the same grid from `t0` on.
pub fn sup_distance(a: &History, b: &History) -> f64 {
    let (sa, sb) = (a.origin_index(), b.origin_index());
    let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    let mut best = 0.0_f64;
    for k in sa..a.len().min(b.len() - sb + sa) {
        let kb = k - sa + sb;
        best = best.max(dist(a.node(k), b.node(kb)));
        if let (Some(p), Some(q)) = (a.pre_jump(k), b.pre_jump(kb)) {
            best = best.max(dist(p, q));
        }
    }
    best
}

/// Solves the mollified equation at every level on one shared realization.
///
/// With `truncated` the base coefficients are first truncated at each level.
pub fn approximation_cascade(
    eq: &Equation,
    xi: &Segment,
    noise: &NoiseRealization,
    cfg: &SolverConfig,
    law: &MollifierLaw,
    levels: &[u32],
    truncated: bool,
) -> Result<CascadeReport, ExistenceError> {
    if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExistenceError::InvalidArgument("levels must be positive and increasing".into()));
    }
    if law.r0 != eq.shape.r0 || law.samples == 0 {
        return Err(ExistenceError::InvalidArgument("mollifier law does not match the equation".into()));
    }
    let samples = Arc::new(law.draw(eq.shape.dim));
    let mut all: Vec<u32> = levels.to_vec();
    all.push(2 * levels[levels.len() - 1]);
    let mut out = Vec::with_capacity(all.len());
    for &n in &all {
        let base = if truncated { truncate_coeff(eq, n) } else { eq.clone() };
        let m = mollify_shared(&base, samples.clone(), n);
        let level_eq = Equation::new(eq.shape.clone(), Arc::new(m));
        let path = solve_path(&level_eq, xi, noise, cfg)?;
        out.push(CascadeLevel { n, history: path.history });
    }
    let gaps = out
        .windows(2)
        .map(|w| CascadeGap { n: w[0].n, next: w[1].n, gap: sup_distance(&w[0].history, &w[1].history) })
        .collect();
    Ok(CascadeReport { levels: out, gaps })
}

// ---------------------------------------------------------------------------
// Uniqueness

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub seeds: Vec<u64>,
    pub distances: Vec<f64>,
    pub max_distance: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub const UNIQUENESS_TOLERANCE: f64 = 1e-12;

/// Solves each realization with the main driver and with [`reference_solve`]; reports sup-distances.
pub fn uniqueness_check(
    eq: &Equation,
    xi: &Segment,
    cfg: &SolverConfig,
    seeds: &[u64],
    inject: Option<&[(f64, usize)]>,
) -> Result<UniquenessReport, ExistenceError> {
    let spec = NoiseSpec {
        m: eq.shape.noise_dim,
        measure: eq.shape.marks.clone(),
        t0: cfg.t0,
        horizon: cfg.horizon,
        base_step: cfg.step,
    };
    let mut distances = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut noise = spec.realize(SeedRecord::new(seed, 0))?;
        if let Some(ev) = inject {
            noise = noise.inject_events(ev)?;
        }
        let main = solve_path(eq, xi, &noise, cfg)?;
        let reference = reference_solve(eq, xi, &noise, cfg)?;
        distances.push(sup_distance(&main.history, &reference));
    }
    let max_distance = distances.iter().copied().fold(0.0, f64::max);
    Ok(UniquenessReport {
        seeds: seeds.to_vec(),
        distances,
        max_distance,
        tolerance: UNIQUENESS_TOLERANCE,
        pass: max_distance <= UNIQUENESS_TOLERANCE,
    })
}

struct RefNode {
    tick: i64,
    value: Vec<f64>,
    pre: Option<Vec<f64>>,
}

/// Second Euler driver with its own node store and window builder.
///
/// Increments are accumulated as `x + (sigma dB + b dt)` with the noise sum taken in reverse order.
pub fn reference_solve(
    eq: &Equation,
    xi: &Segment,
    noise: &NoiseRealization,
    cfg: &SolverConfig,
) -> Result<History, ExistenceError> {
    let (d, m) = (eq.shape.dim, eq.shape.noise_dim);
    let r0 = eq.shape.r0;
    let res = noise.resolution();
    let r0_ticks = (r0 / res).round() as i64;
    let n_steps = cfg.steps();
    let mut nodes: Vec<RefNode> = Vec::new();
    for k in 0..xi.len() {
        let tick = (xi.thetas()[k] / res).round() as i64;
        nodes.push(RefNode { tick, value: xi.node(k).to_vec(), pre: xi.pre_jump(k).map(<[f64]>::to_vec) });
    }
    let window = |nodes: &[RefNode], end: i64, left: bool| -> Segment {
        let start = end - r0_ticks;
        let theta = |tick: i64| {
            if tick == start {
                -r0
            } else if tick == end {
                0.0
            } else {
                (tick - end) as f64 * res
            }
        };
        let mut pts: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut jumps: Vec<(f64, Vec<f64>)> = Vec::new();
        let first = nodes.iter().position(|nd| nd.tick >= start).expect("window inside history");
        if nodes[first].tick > start {
            let (a, b) = (&nodes[first - 1], &nodes[first]);
            let frac = (start - a.tick) as f64 / (b.tick - a.tick) as f64;
            let right = b.pre.as_ref().unwrap_or(&b.value);
            pts.push((-r0, a.value.iter().zip(right).map(|(u, v)| u + frac * (v - u)).collect()));
        }
        for nd in nodes[first..].iter().take_while(|nd| nd.tick <= end) {
            let th = theta(nd.tick);
            let mut value = nd.value.clone();
            if let Some(p) = &nd.pre {
                if nd.tick == end && left {
                    value = p.clone();
                } else if !pts.is_empty() {
                    jumps.push((th, p.clone()));
                }
            }
            pts.push((th, value));
        }
        Segment::new(d, r0, pts, jumps).expect("reference window")
    };
    let mut cursor = noise.cursor();
    let mut stopped = false;
    while let Some(piece) = cursor.next_piece() {
        if piece.step >= n_steps || stopped {
            break;
        }
        let t = cfg.t0 + piece.start as f64 * res;
        let seg = window(&nodes, piece.start, false);
        let b = eq.drift_vec(t, &seg);
        let s = eq.diffusion_vec(t, &seg);
        let db = cursor.db();
        let prev = nodes.last().expect("nonempty").value.clone();
        let mut x = vec![0.0; d];
        for i in 0..d {
            let mut noise_sum = 0.0;
            for j in (0..m).rev() {
                noise_sum += s[i * m + j] * db[j];
            }
            x[i] = prev[i] + (noise_sum + b[i] * piece.dt);
        }
        let t_end = cfg.t0 + piece.end as f64 * res;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteState { t: t_end }.into());
        }
        nodes.push(RefNode { tick: piece.end, value: x.clone(), pre: None });
        if let Some(mark) = piece.mark {
            let seg = window(&nodes, piece.end, true);
            let g = eq.jump_vec(t_end, &seg, mark);
            let post: Vec<f64> = x.iter().zip(&g).map(|(u, v)| u + v).collect();
            if post.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::NonFiniteState { t: t_end }.into());
            }
            let last = nodes.last_mut().expect("just pushed");
            last.pre = Some(x);
            last.value = post.clone();
            x = post;
        }
        if let Some(radius) = cfg.stop_radius {
            stopped = x.iter().map(|v| v * v).sum::<f64>().sqrt() >= radius;
        }
    }
    // Rebuild a History through the public API for comparison.
    let mut h = History::from_initial(xi, cfg.t0, res)?;
    for nd in nodes.iter().skip(xi.len()) {
        h.push(nd.tick, nd.pre.as_ref().unwrap_or(&nd.value));
        if nd.pre.is_some() {
            h.jump_last(&nd.value);
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{builtin, BuiltinParams, FnCoefficients};
    use crate::noise::{generate, MarkMeasure};

    #[test]
    fn bihari_examples() {
        let one = BihariKernel::new(ControlFunction::one());
        assert!((bihari_bound(&one, 1.0, 1.0, 1.0).unwrap() - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(bihari_bound(&one, 2.5, 3.0, 0.0).unwrap(), 2.5);
        let log = BihariKernel::new(ControlFunction::log());
        assert_eq!(bihari_bound(&log, 1.0, 0.0, 7.0).unwrap(), 1.0);
        assert_eq!(bihari_bound(&log, 0.0, 2.0, 7.0).unwrap(), 0.0);
        assert!(bihari_bound(&one, -1.0, 1.0, 1.0).is_err());
        assert!(matches!(bihari_bound(&one, 1.0, 1e3, 1.0), Err(ExistenceError::RangeExceeded { .. })));
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let custom = BihariKernel::new(ControlFunction::custom("unit", |_| 1.0));
        for s in [1e-6, 0.3, 1.0, 2.0, 1e6] {
            assert!((custom.g(s) - s.ln()).abs() < 1e-10 * s.ln().abs().max(1.0), "{s}");
        }
        let b = bihari_bound(&custom, 0.7, 2.0, 0.9).unwrap();
        assert!((b / (0.7 * 1.8f64.exp()) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn log_kernel_inverts() {
        let k = BihariKernel::new(ControlFunction::log());
        assert_eq!(k.g(1.0), 0.0);
        let mut prev = f64::NEG_INFINITY;
        for e in -6..=6 {
            let s = 10f64.powi(e);
            let g = k.g(s);
            assert!(g > prev);
            prev = g;
            assert!((k.g_inv(g).unwrap() / s - 1.0).abs() < 1e-8, "{s}");
        }
    }

    fn eq1(f: FnCoefficients) -> Equation {
        let shape = Shape { dim: 1, noise_dim: 1, r0: 0.0, marks: MarkMeasure::empty() };
        Equation::new(shape, f.into_arc())
    }

    #[test]
    fn mollify_examples() {
        let law = MollifierLaw::new(0.0, 10_000, 4);
        let c = mollify(&eq1(FnCoefficients::zero().with_drift(|_, _, o| o[0] = 2.5)), &law, 3).unwrap();
        let x = Segment::constant(0.0, &[0.4]);
        assert_eq!(c.estimate(Part::Drift, 0.0, &x).mean, vec![2.5]);

        let lin = mollify(&eq1(FnCoefficients::zero().with_drift(|_, x, o| o[0] = x.head()[0])), &law, 2).unwrap();
        let e = lin.estimate(Part::Drift, 0.0, &x);
        assert!((e.mean[0] - 0.4).abs() <= 3.0 * (1.0f64 / 10_000.0).sqrt() / 2.0);

        let abs = builtin("abs_drift", &BuiltinParams::default()).unwrap().plain_equation();
        for n in [1, 4] {
            let m = mollify(&abs, &law, n).unwrap();
            let e = m.estimate(Part::Drift, 0.0, &Segment::zero(1, 0.0));
            let want = (2.0 / std::f64::consts::PI).sqrt() / f64::from(n);
            assert!((e.mean[0] - want).abs() <= 3.0 * e.std_error[0]);
        }
    }

    #[test]
    fn brownian_segment_law() {
        let law = MollifierLaw { intervals: 4, ..MollifierLaw::new(2.0, 20_000, 1) };
        let s = law.draw(1);
        for (k, theta) in [-2.0, -1.5, -1.0, -0.5, 0.0].into_iter().enumerate() {
            let var = s.iter().map(|x| x.node(k)[0].powi(2)).sum::<f64>() / s.len() as f64;
            let want = 2.0 + 1.0 + theta;
            assert!((var / want - 1.0).abs() < 0.05, "{theta}: {var}");
        }
    }

    #[test]
    fn truncation_examples() {
        let x = Segment::constant(0.0, &[5.0]);
        assert_eq!(truncate(&x, 2), Segment::constant(0.0, &[2.0]));
        let y = Segment::new(1, 1.0, vec![(-1.0, vec![0.5]), (0.0, vec![-1.5])], vec![]).unwrap();
        assert_eq!(truncate(&y, 2), y);
        let base = eq1(FnCoefficients::zero().with_drift(|t, x, o| o[0] = t + x.head()[0]));
        let tr = truncate_coeff(&base, 3);
        let x = Segment::constant(0.0, &[10.0]);
        assert_eq!(tr.drift_vec(5.0, &x), vec![6.0]);
        assert_eq!(
            tr.drift_vec(1.0, &Segment::constant(0.0, &[2.0])),
            base.drift_vec(1.0, &Segment::constant(0.0, &[2.0]))
        );
    }

    #[test]
    fn cascade_of_zero_is_flat() {
        let zero = builtin("zero", &BuiltinParams::default()).unwrap().plain_equation();
        let noise = generate(1, 1, &MarkMeasure::empty(), 0.0, 1.0, 0.1).unwrap();
        let r = approximation_cascade(
            &zero,
            &Segment::constant(0.0, &[1.0]),
            &noise,
            &SolverConfig::new(0.1, 0.0, 1.0),
            &MollifierLaw::new(0.0, 50, 2),
            &[1, 2, 4],
            false,
        )
        .unwrap();
        assert_eq!(r.gaps.len(), 3);
        assert_eq!(r.gaps[2].next, 8);
        assert!(r.gaps.iter().all(|g| g.gap == 0.0));
    }

    #[test]
    fn abs_drift_cascade_halves() {
        let abs = builtin("abs_drift", &BuiltinParams::default()).unwrap().plain_equation();
        let noise = generate(1, 1, &MarkMeasure::empty(), 0.0, 1.0, 0.01).unwrap();
        let r = approximation_cascade(
            &abs,
            &Segment::zero(1, 0.0),
            &noise,
            &SolverConfig::new(0.01, 0.0, 1.0),
            &MollifierLaw::new(0.0, 2_000, 9),
            &[1, 2, 4, 8],
            false,
        )
        .unwrap();
        for w in r.gaps.windows(2) {
            assert!((w[1].gap / w[0].gap - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn reference_driver_agrees() {
        let lin = builtin("linear_drift", &BuiltinParams::default()).unwrap().plain_equation();
        let cfg = SolverConfig::new(0.01, 0.0, 1.0);
        let r = uniqueness_check(&lin, &Segment::constant(0.0, &[1.0]), &cfg, &[1, 2, 3], None).unwrap();
        assert!(r.pass, "{r:?}");

        let dd = builtin("delayed_diffusion", &BuiltinParams::default()).unwrap().plain_equation();
        let xi = Segment::new(
            1,
            1.0,
            vec![(-1.0, vec![1.0]), (-0.37, vec![2.0]), (0.0, vec![0.5])],
            vec![(-0.37, vec![3.0])],
        )
        .unwrap();
        let r = uniqueness_check(&dd, &xi, &cfg, &[4, 5], None).unwrap();
        assert!(r.pass, "{r:?}");

        let neg = builtin("negating_jump", &BuiltinParams::default()).unwrap().plain_equation();
        let r = uniqueness_check(&neg, &Segment::constant(0.0, &[1.0]), &cfg, &[6], Some(&[(0.5, 0)])).unwrap();
        assert_eq!(r.max_distance, 0.0);
    }
}
