//! Coefficient oracles `(b, sigma, gamma)` and `(b_bar, sigma_bar, gamma_bar)`, the
//! control-function class used to measure non-Lipschitz moduli, and sampled
//! validators for the Lipschitz-type and growth-at-zero assumptions.

pub mod builtin;
pub mod config;
pub mod expr;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise::MarkMeasure;
use crate::sampling::{PairSource, SamplePair};
use crate::segment::{Segment, SegmentError};

pub use builtin::{builtin, BuiltinInfo, BuiltinParams, CATALOGUE};
pub use config::CoefficientConfig;
pub use expr::{parse_expr, Expr, ExprContext};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("delay argument {theta} outside [-{r0}, 0]")]
    ThetaOutOfRange { theta: f64, r0: f64 },
    #[error("unknown builtin `{0}`")]
    UnknownName(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("non-finite {what} at t = {t}")]
    NonFiniteCoefficient { what: &'static str, t: f64 },
    #[error("invalid control function: {0}")]
    InvalidControl(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

/// Coefficients of one equation.
///
/// Outputs are written into caller buffers: `drift` and `jump` take `d` entries,
/// `diffusion` takes `d * m` entries in row-major order. Implementations must be
/// pure; they are evaluated concurrently from several threads.
pub trait Coefficients: Send + Sync {
    fn drift(&self, t: f64, x: &Segment, out: &mut [f64]);
    fn diffusion(&self, t: f64, x: &Segment, out: &mut [f64]);
    fn jump(&self, t: f64, x: &Segment, mark: usize, out: &mut [f64]);
}

/// Dimensions shared by both equations of a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub dim: usize,
    pub noise_dim: usize,
    pub r0: f64,
    pub marks: MarkMeasure,
}

/// One equation: its coefficients plus the shared shape.
#[derive(Clone)]
pub struct Equation {
    pub shape: Shape,
    pub coeffs: Arc<dyn Coefficients>,
}

impl fmt::Debug for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Equation").field("shape", &self.shape).finish_non_exhaustive()
    }
}

impl Equation {
    pub fn new(shape: Shape, coeffs: Arc<dyn Coefficients>) -> Self {
        Equation { shape, coeffs }
    }

    pub fn drift_vec(&self, t: f64, x: &Segment) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.dim];
        self.coeffs.drift(t, x, &mut out);
        out
    }

    pub fn diffusion_vec(&self, t: f64, x: &Segment) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.dim * self.shape.noise_dim];
        self.coeffs.diffusion(t, x, &mut out);
        out
    }

    pub fn jump_vec(&self, t: f64, x: &Segment, mark: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.dim];
        self.coeffs.jump(t, x, mark, &mut out);
        out
    }
}

/// The coupled pair: unbarred and barred coefficients on one shape.
#[derive(Clone)]
pub struct CoefficientSet {
    pub label: String,
    pub shape: Shape,
    pub plain: Arc<dyn Coefficients>,
    pub barred: Arc<dyn Coefficients>,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet").field("label", &self.label).field("shape", &self.shape).finish_non_exhaustive()
    }
}

impl CoefficientSet {
    pub fn new(
        label: impl Into<String>,
        shape: Shape,
        plain: Arc<dyn Coefficients>,
        barred: Arc<dyn Coefficients>,
    ) -> Self {
        CoefficientSet { label: label.into(), shape, plain, barred }
    }

    /// Both equations share the same coefficients.
    pub fn symmetric(label: impl Into<String>, shape: Shape, coeffs: Arc<dyn Coefficients>) -> Self {
        CoefficientSet::new(label, shape, coeffs.clone(), coeffs)
    }

    pub fn plain_equation(&self) -> Equation {
        Equation::new(self.shape.clone(), self.plain.clone())
    }

    pub fn barred_equation(&self) -> Equation {
        Equation::new(self.shape.clone(), self.barred.clone())
    }
}

type DriftFn = dyn Fn(f64, &Segment, &mut [f64]) + Send + Sync;
type JumpFn = dyn Fn(f64, &Segment, usize, &mut [f64]) + Send + Sync;

/// Closure-backed coefficients; missing parts are identically zero.
#[derive(Clone, Default)]
pub struct FnCoefficients {
    drift: Option<Arc<DriftFn>>,
    diffusion: Option<Arc<DriftFn>>,
    jump: Option<Arc<JumpFn>>,
}

impl FnCoefficients {
    pub fn zero() -> Self {
        FnCoefficients::default()
    }

    pub fn with_drift(mut self, f: impl Fn(f64, &Segment, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(f));
        self
    }

    pub fn with_diffusion(mut self, f: impl Fn(f64, &Segment, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.diffusion = Some(Arc::new(f));
        self
    }

    pub fn with_jump(mut self, f: impl Fn(f64, &Segment, usize, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.jump = Some(Arc::new(f));
        self
    }

    pub fn into_arc(self) -> Arc<dyn Coefficients> {
        Arc::new(self)
    }
}

impl Coefficients for FnCoefficients {
    fn drift(&self, t: f64, x: &Segment, out: &mut [f64]) {
        match &self.drift {
            Some(f) => f(t, x, out),
            None => out.fill(0.0),
        }
    }

    fn diffusion(&self, t: f64, x: &Segment, out: &mut [f64]) {
        match &self.diffusion {
            Some(f) => f(t, x, out),
            None => out.fill(0.0),
        }
    }

    fn jump(&self, t: f64, x: &Segment, mark: usize, out: &mut [f64]) {
        match &self.jump {
            Some(f) => f(t, x, mark, out),
            None => out.fill(0.0),
        }
    }
}

#[derive(Clone)]
enum ControlKind {
    One,
    Log,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// A control function `u: (0, inf) -> [1, inf)` with `s u(s)` increasing and concave.
///
/// The divergence `int_0^1 ds / (s u(s)) = inf` cannot be checked by sampling;
/// only the built-in `one` and `log` functions are known to satisfy it, custom
/// functions carry [`ControlFunction::divergence_verified`] `== false`.
#[derive(Clone)]
pub struct ControlFunction {
    tag: String,
    kind: ControlKind,
}

impl fmt::Debug for ControlFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlFunction").field("tag", &self.tag).finish()
    }
}

impl ControlFunction {
    /// `u = 1`: the Lipschitz case.
    pub fn one() -> Self {
        ControlFunction { tag: "one".into(), kind: ControlKind::One }
    }

    /// `u(s) = log(e + 1/s)`.
    pub fn log() -> Self {
        ControlFunction { tag: "log".into(), kind: ControlKind::Log }
    }

    pub fn custom(tag: impl Into<String>, u: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ControlFunction { tag: tag.into(), kind: ControlKind::Custom(Arc::new(u)) }
    }

    pub fn by_name(name: &str) -> Result<Self, CoeffError> {
        match name {
            "one" => Ok(ControlFunction::one()),
            "log" => Ok(ControlFunction::log()),
            other => Err(CoeffError::InvalidControl(format!("unknown control function `{other}`"))),
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn divergence_verified(&self) -> bool {
        !matches!(self.kind, ControlKind::Custom(_))
    }

    pub fn is_one(&self) -> bool {
        matches!(self.kind, ControlKind::One)
    }

    pub fn eval(&self, s: f64) -> f64 {
        match &self.kind {
            ControlKind::One => 1.0,
            ControlKind::Log => (std::f64::consts::E + 1.0 / s).ln(),
            ControlKind::Custom(u) => u(s),
        }
    }

    /// `s * u(s)`.
    pub fn modulus(&self, s: f64) -> f64 {
        s * self.eval(s)
    }

    /// Checks `u >= 1`, `s u(s)` nondecreasing and midpoint-concave over consecutive grid points.
    pub fn validate_on_grid(&self, grid: &[f64]) -> Result<(), CoeffError> {
        for &s in grid {
            let u = self.eval(s);
            if !(u >= 1.0) {
                return Err(CoeffError::InvalidControl(format!("u({s}) = {u} < 1")));
            }
        }
        for w in grid.windows(2) {
            let (a, c) = (w[0], w[1]);
            let (ga, gc) = (self.modulus(a), self.modulus(c));
            if gc < ga {
                return Err(CoeffError::InvalidControl(format!("s u(s) decreases between {a} and {c}")));
            }
            let mid = 0.5 * (a + c);
            if self.modulus(mid) < 0.5 * (ga + gc) {
                return Err(CoeffError::InvalidControl(format!("s u(s) not concave on [{a}, {c}]")));
            }
        }
        Ok(())
    }
}

/// `n` log-spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| match k {
            0 => lo,
            k if k + 1 == n => hi,
            k => (a + (b - a) * k as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Worst sampled configuration of the Lipschitz-type check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A1Witness {
    pub pair: SamplePair,
    pub lhs: f64,
    pub distance_sq: f64,
    pub ratio: f64,
}

/// Sampled evidence for the Lipschitz-type assumption; a pass is not a proof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A1Report {
    pub control: String,
    pub sampler: String,
    pub budget: f64,
    pub samples: usize,
    pub degenerate: usize,
    pub max_ratio: f64,
    pub worst: Option<A1Witness>,
    pub pass: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Left side of the Lipschitz-type inequality for one pair: squared drift and diffusion
/// differences of both equations, the `nu`-integral of squared jump differences, and the
/// squared `nu`-integral of absolute jump differences.
pub fn a1_lhs(cs: &CoefficientSet, t: f64, x: &Segment, y: &Segment) -> f64 {
    let mut total = 0.0;
    let mut l1 = 0.0;
    for c in [&cs.plain, &cs.barred] {
        let eq = Equation::new(cs.shape.clone(), c.clone());
        total += sq_dist(&eq.drift_vec(t, x), &eq.drift_vec(t, y));
        total += sq_dist(&eq.diffusion_vec(t, x), &eq.diffusion_vec(t, y));
        for k in 0..cs.shape.marks.len() {
            let nu = cs.shape.marks.weight(k);
            let d2 = sq_dist(&eq.jump_vec(t, x, k), &eq.jump_vec(t, y, k));
            total += nu * d2;
            l1 += nu * d2.sqrt();
        }
    }
    total + l1 * l1
}

/// Largest sampled ratio of [`a1_lhs`] to `|x - y|^2 u(|x - y|^2)`, compared with `budget`.
pub fn check_a1(
    cs: &CoefficientSet,
    u: &ControlFunction,
    sampler: &mut dyn PairSource,
    n_samples: usize,
    budget: f64,
) -> Result<A1Report, CoeffError> {
    if n_samples == 0 {
        return Err(CoeffError::BadParams("n_samples must be >= 1".into()));
    }
    let mut report = A1Report {
        control: u.tag().to_string(),
        sampler: sampler.describe(),
        budget,
        samples: n_samples,
        degenerate: 0,
        max_ratio: 0.0,
        worst: None,
        pass: true,
    };
    for _ in 0..n_samples {
        let pair = sampler.next_pair();
        let diff = pair.a.add_scaled(&pair.b, -1.0)?;
        let dist = diff.sup_norm();
        if dist == 0.0 {
            report.degenerate += 1;
            continue;
        }
        let s = dist * dist;
        let lhs = a1_lhs(cs, pair.t, &pair.a, &pair.b);
        if !lhs.is_finite() {
            return Err(CoeffError::NonFiniteCoefficient { what: "coefficient difference", t: pair.t });
        }
        let ratio = lhs / u.modulus(s);
        if report.worst.is_none() || ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.worst = Some(A1Witness { pair, lhs, distance_sq: s, ratio });
        }
    }
    report.pass = report.max_ratio <= budget;
    Ok(report)
}

/// Growth of the coefficients at the zero segment over `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2Report {
    pub horizon: f64,
    pub grid_points: usize,
    /// `sup_t (|b|^2 + |b_bar|^2 + |sigma|^2 + |sigma_bar|^2)` at the zero segment.
    pub sup_value: f64,
    /// Trapezoidal `int_0^T sum_k nu_k (|gamma(t,0,z_k)|^2 + |gamma_bar(t,0,z_k)|^2) dt`.
    pub jump_integral: f64,
    pub bound: f64,
}

pub fn check_a2(cs: &CoefficientSet, horizon: f64, grid: &[f64]) -> Result<A2Report, CoeffError> {
    if !(horizon >= 0.0) || grid.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
        return Err(CoeffError::BadParams(format!("grid must lie in [0, {horizon}]")));
    }
    let mut times: Vec<f64> = grid.iter().copied().chain([0.0, horizon]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let zero = Segment::zero(cs.shape.dim, cs.shape.r0);
    let (plain, barred) = (cs.plain_equation(), cs.barred_equation());
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let mut sup_value = 0.0_f64;
    let mut jump_rate = Vec::with_capacity(times.len());
    for &t in &times {
        let v = sq(&plain.drift_vec(t, &zero))
            + sq(&barred.drift_vec(t, &zero))
            + sq(&plain.diffusion_vec(t, &zero))
            + sq(&barred.diffusion_vec(t, &zero));
        if !v.is_finite() {
            return Err(CoeffError::NonFiniteCoefficient { what: "drift/diffusion at zero", t });
        }
        sup_value = sup_value.max(v);
        let mut j = 0.0;
        for k in 0..cs.shape.marks.len() {
            j += cs.shape.marks.weight(k) * (sq(&plain.jump_vec(t, &zero, k)) + sq(&barred.jump_vec(t, &zero, k)));
        }
        if !j.is_finite() {
            return Err(CoeffError::NonFiniteCoefficient { what: "jump at zero", t });
        }
        jump_rate.push(j);
    }
    let jump_integral =
        times.windows(2).zip(jump_rate.windows(2)).map(|(t, j)| 0.5 * (t[1] - t[0]) * (j[0] + j[1])).sum::<f64>();
    Ok(A2Report { horizon, grid_points: times.len(), sup_value, jump_integral, bound: sup_value + jump_integral })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{FixedPairs, RandomPairs, SegmentLaw};

    fn shape1(marks: MarkMeasure) -> Shape {
        Shape { dim: 1, noise_dim: 1, r0: 0.0, marks }
    }

    fn scalar_pair(x: f64, y: f64) -> SamplePair {
        SamplePair { t: 0.0, a: Segment::constant(0.0, &[x]), b: Segment::constant(0.0, &[y]) }
    }

    #[test]
    fn control_functions_on_log_grid() {
        let grid = log_grid(1e-9, 1e3, 400);
        for u in [ControlFunction::one(), ControlFunction::log()] {
            u.validate_on_grid(&grid).unwrap();
            assert!(u.divergence_verified());
        }
        let bad = ControlFunction::custom("sq", |s| 1.0 + s);
        assert!(!bad.divergence_verified());
        assert!(bad.validate_on_grid(&grid).is_err());
        assert!(ControlFunction::custom("half", |_| 0.5).validate_on_grid(&grid).is_err());
    }

    #[test]
    fn a1_linear_drift_ratio_is_four() {
        let plain = FnCoefficients::zero().with_drift(|_, x, out| out[0] = 2.0 * x.head()[0]).into_arc();
        let cs = CoefficientSet::new("2x", shape1(MarkMeasure::empty()), plain, FnCoefficients::zero().into_arc());
        let mut src = RandomPairs::new(SegmentLaw::new(1, 0.0), 11);
        let r = check_a1(&cs, &ControlFunction::one(), &mut src, 2000, 4.0 + 1e-9).unwrap();
        assert!((r.max_ratio - 4.0).abs() < 1e-9, "{}", r.max_ratio);
        assert!(r.pass);
    }

    #[test]
    fn a1_square_root_drift_fails_near_zero() {
        let plain = FnCoefficients::zero().with_drift(|_, x, out| out[0] = x.head()[0].abs().sqrt()).into_arc();
        let cs = CoefficientSet::new("sqrt", shape1(MarkMeasure::empty()), plain, FnCoefficients::zero().into_arc());
        let mut src = FixedPairs::new(vec![scalar_pair(1e-6, 0.0)]);
        let r = check_a1(&cs, &ControlFunction::log(), &mut src, 1, 1e3).unwrap();
        let expected = 1e-6 / (1e-12 * (std::f64::consts::E + 1e12).ln());
        assert!((r.max_ratio / expected - 1.0).abs() < 1e-12);
        assert!(!r.pass);
    }

    #[test]
    fn a1_log_lipschitz_cancels_on_axis_pairs() {
        let u = ControlFunction::log();
        let uu = u.clone();
        let plain = FnCoefficients::zero()
            .with_drift(move |_, x, out| {
                let v = x.head()[0];
                out[0] = if v == 0.0 { 0.0 } else { v * uu.eval(v * v).sqrt() };
            })
            .into_arc();
        let cs = CoefficientSet::new("loglip", shape1(MarkMeasure::empty()), plain, FnCoefficients::zero().into_arc());
        let pairs = [1e-8, 1e-3, 0.5, 3.0, -2.0].iter().map(|&x| scalar_pair(x, 0.0)).collect();
        let r = check_a1(&cs, &u, &mut FixedPairs::new(pairs), 5, 1.0 + 1e-9).unwrap();
        assert!((r.max_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn a1_counts_degenerate_pairs() {
        let cs = builtin("zero", &BuiltinParams::default()).unwrap();
        let r =
            check_a1(&cs, &ControlFunction::one(), &mut FixedPairs::new(vec![scalar_pair(1.0, 1.0)]), 3, 1.0).unwrap();
        assert_eq!(r.degenerate, 3);
        assert!(r.pass);
    }

    #[test]
    fn a1_jump_terms() {
        // gamma(x) = x with nu = 2 on the plain side only:
        // lhs = nu |dx|^2 + (nu |dx|)^2 = 2 + 4 = 6 per unit distance.
        let plain = FnCoefficients::zero().with_jump(|_, x, _, out| out[0] = x.head()[0]).into_arc();
        let cs =
            CoefficientSet::new("jump", shape1(MarkMeasure::single(2.0)), plain, FnCoefficients::zero().into_arc());
        let r = check_a1(&cs, &ControlFunction::one(), &mut FixedPairs::new(vec![scalar_pair(0.5, -0.5)]), 1, 10.0)
            .unwrap();
        assert!((r.max_ratio - 6.0).abs() < 1e-12);
    }

    #[test]
    fn a2_examples() {
        let zero = builtin("zero", &BuiltinParams::default()).unwrap();
        assert_eq!(check_a2(&zero, 1.0, &[0.5]).unwrap().bound, 0.0);

        let plain = FnCoefficients::zero().with_drift(|t, _, out| out[0] = t).into_arc();
        let cs = CoefficientSet::new("t", shape1(MarkMeasure::empty()), plain, FnCoefficients::zero().into_arc());
        assert_eq!(check_a2(&cs, 2.0, &[0.5, 1.0]).unwrap().sup_value, 4.0);

        let g = FnCoefficients::zero().with_jump(|_, _, _, out| out[0] = 1.0).into_arc();
        let cs = CoefficientSet::symmetric("g", shape1(MarkMeasure::single(3.0)), g);
        let r = check_a2(&cs, 1.0, &[0.25, 0.5]).unwrap();
        assert!((r.jump_integral - 6.0).abs() < 1e-12);
    }

    #[test]
    fn a2_rejects_non_finite() {
        let plain = FnCoefficients::zero().with_drift(|t, _, out| out[0] = 1.0 / t).into_arc();
        let cs = CoefficientSet::symmetric("inv", shape1(MarkMeasure::empty()), plain);
        assert!(matches!(check_a2(&cs, 1.0, &[]), Err(CoeffError::NonFiniteCoefficient { .. })));
    }
}
