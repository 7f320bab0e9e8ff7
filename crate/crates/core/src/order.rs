//! Order preservation: condition checkers, the smoothing family `psi_n`,
//! Monte-Carlo comparison of coupled solutions and generator-based probes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeff::{CoeffError, CoefficientSet, Equation};
use crate::noise::{NoiseError, NoiseSpec, SeedRecord};
use crate::sampling::SegmentLaw;
use crate::segment::{Segment, SegmentError};
use crate::solver::{par_paths, solve_coupled, PairResult, SolverConfig, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrderError {
    #[error("sampler contract broken: {0}")]
    SamplerContractBroken(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
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
// psi_n

/// `psi_n(s)`: zero on `s <= 0`, `s - 1/(2n)` on `s >= 1/n`, cubic in between.
pub fn psi(n: u32, s: f64) -> f64 {
    let n = f64::from(n);
    if s <= 0.0 {
        0.0
    } else if s <= 0.5 / n {
        2.0 / 3.0 * n * n * s * s * s
    } else if s <= 1.0 / n {
        let r = s - 1.0 / n;
        s - 0.5 / n - 2.0 / 3.0 * n * n * r * r * r
    } else {
        s - 0.5 / n
    }
}

pub fn psi_prime(n: u32, s: f64) -> f64 {
    let n = f64::from(n);
    if s <= 0.0 {
        0.0
    } else if s <= 0.5 / n {
        2.0 * n * n * s * s
    } else if s <= 1.0 / n {
        let r = s - 1.0 / n;
        1.0 - 2.0 * n * n * r * r
    } else {
        1.0
    }
}

pub fn psi_second(n: u32, s: f64) -> f64 {
    let n = f64::from(n);
    if s <= 0.0 || s >= 1.0 / n {
        0.0
    } else if s <= 0.5 / n {
        4.0 * n * n * s
    } else {
        -4.0 * n * n * (s - 1.0 / n)
    }
}

// ---------------------------------------------------------------------------
// Sampled condition checks

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Drift,
    Diffusion,
    Jump,
}

/// `(t, i, xi, xibar)` handed to a checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedSample {
    pub t: f64,
    pub component: usize,
    pub xi: Segment,
    pub xibar: Segment,
}

/// Source of inputs for the condition checkers.
pub trait OrderSource {
    /// `xi <= xibar` with `xi^i(0) = xibar^i(0)`.
    fn ordered_touching(&mut self, i: usize) -> OrderedSample;
    /// `xi <= xibar`.
    fn ordered(&mut self, i: usize) -> OrderedSample;
    /// Only `xi^i(0) = xibar^i(0)`.
    fn touching(&mut self, i: usize) -> OrderedSample;
    fn describe(&self) -> String;
}

/// `xibar = xi + delta` with `delta` a perturbation on the skeleton of `xi`.
///
/// Ordered pairs use clipped (nonnegative) Gaussian perturbations; endpoint
/// equality zeroes `delta^i(0)`.
pub struct OrderSampler {
    law: SegmentLaw,
    rng: ChaCha8Rng,
    seed: u64,
}

impl OrderSampler {
    pub fn new(law: SegmentLaw, seed: u64) -> Self {
        OrderSampler { law, rng: ChaCha8Rng::seed_from_u64(seed), seed }
    }

    pub fn for_shape(cs: &CoefficientSet, seed: u64) -> Self {
        OrderSampler::new(SegmentLaw::new(cs.shape.dim, cs.shape.r0), seed)
    }

    fn build(&mut self, i: usize, positive: bool, touch: bool) -> OrderedSample {
        let xi = self.law.draw(&mut self.rng);
        let mut delta = self.law.perturbation(&xi, positive, &mut self.rng);
        if !positive {
            // Mix small and large gaps.
            let size = 10f64.powf(-3.0 * self.rng.random::<f64>());
            delta = delta.map_values(|v| v * size);
        }
        if touch {
            let last = delta.len() - 1;
            delta.node_mut(last)[i] = 0.0;
        }
        let xibar = xi.add_scaled(&delta, 1.0).expect("same skeleton");
        OrderedSample { t: self.law.draw_time(&mut self.rng), component: i, xi, xibar }
    }
}

impl OrderSource for OrderSampler {
    fn ordered_touching(&mut self, i: usize) -> OrderedSample {
        self.build(i, true, true)
    }

    fn ordered(&mut self, i: usize) -> OrderedSample {
        self.build(i, true, false)
    }

    fn touching(&mut self, i: usize) -> OrderedSample {
        self.build(i, false, true)
    }

    fn describe(&self) -> String {
        format!(
            "gaussian segments (scale {}, {} intervals, jump prob {}), clipped gaussian gaps, t ~ U[0,{}], seed {}",
            self.law.scale, self.law.intervals, self.law.jump_probability, self.law.t_max, self.seed
        )
    }
}

/// Cycles through fixed samples; the component of each sample is kept.
pub struct FixedOrderSource {
    samples: Vec<OrderedSample>,
    next: usize,
}

impl FixedOrderSource {
    pub fn new(samples: Vec<OrderedSample>) -> Self {
        assert!(!samples.is_empty(), "FixedOrderSource needs at least one sample");
        FixedOrderSource { samples, next: 0 }
    }

    fn take(&mut self) -> OrderedSample {
        let s = self.samples[self.next % self.samples.len()].clone();
        self.next += 1;
        s
    }
}

impl OrderSource for FixedOrderSource {
    fn ordered_touching(&mut self, _: usize) -> OrderedSample {
        self.take()
    }

    fn ordered(&mut self, _: usize) -> OrderedSample {
        self.take()
    }

    fn touching(&mut self, _: usize) -> OrderedSample {
        self.take()
    }

    fn describe(&self) -> String {
        format!("fixed list of {} samples", self.samples.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionWitness {
    pub t: f64,
    /// 0-based component.
    pub component: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_component: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mark: Option<usize>,
    pub xi: Segment,
    pub xibar: Segment,
    /// Unbarred and barred side of the violated relation.
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub pass: bool,
    /// Verdicts are drawn from samples, never proved.
    pub sampled: bool,
    pub samples: usize,
    pub sampler: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<ConditionWitness>,
}

/// Both sides of condition `c` at a witness configuration, freshly evaluated.
pub fn condition_sides(cs: &CoefficientSet, c: Condition, w: &ConditionWitness) -> (f64, f64) {
    let (p, b) = (cs.plain_equation(), cs.barred_equation());
    let i = w.component;
    match c {
        Condition::Drift => (p.drift_vec(w.t, &w.xi)[i], b.drift_vec(w.t, &w.xibar)[i]),
        Condition::Diffusion => {
            let j = w.noise_component.unwrap_or(0);
            let m = cs.shape.noise_dim;
            (p.diffusion_vec(w.t, &w.xi)[i * m + j], b.diffusion_vec(w.t, &w.xibar)[i * m + j])
        }
        Condition::Jump => {
            let k = w.mark.unwrap_or(0);
            (w.xi.head()[i] + p.jump_vec(w.t, &w.xi, k)[i], w.xibar.head()[i] + b.jump_vec(w.t, &w.xibar, k)[i])
        }
    }
}

/// Whether the sides violate condition `c` (strict inequality, or inequality for the diffusion).
pub fn violates(c: Condition, lhs: f64, rhs: f64) -> bool {
    match c {
        Condition::Diffusion => lhs != rhs,
        Condition::Drift | Condition::Jump => !(lhs <= rhs),
    }
}

impl ConditionWitness {
    /// Re-evaluates the coefficients; true when the violation reproduces.
    pub fn confirms(&self, cs: &CoefficientSet, c: Condition) -> bool {
        let (l, r) = condition_sides(cs, c, self);
        violates(c, l, r)
    }
}

fn check_contract(s: &OrderedSample, ordered: bool, touching: bool, dim: usize, r0: f64) -> Result<(), OrderError> {
    let broken = |msg: &str| Err(OrderError::SamplerContractBroken(msg.to_string()));
    if s.xi.dim() != dim || s.xibar.dim() != dim || s.xi.r0() != r0 || s.xibar.r0() != r0 {
        return broken("sample shape differs from the coefficients");
    }
    if s.component >= dim {
        return broken("component out of range");
    }
    if ordered && !s.xi.leq(&s.xibar)? {
        return broken("xi <= xibar does not hold");
    }
    if touching && s.xi.head()[s.component] != s.xibar.head()[s.component] {
        return broken("xi^i(0) != xibar^i(0)");
    }
    Ok(())
}

fn run_check(
    cs: &CoefficientSet,
    c: Condition,
    source: &mut dyn OrderSource,
    n_samples: usize,
) -> Result<ConditionReport, OrderError> {
    let shape = &cs.shape;
    let (p, b) = (cs.plain_equation(), cs.barred_equation());
    let mut witness = None;
    let mut used = 0;
    let m = shape.noise_dim;
    'outer: for k in 0..n_samples {
        let i = k % shape.dim;
        let s = match c {
            Condition::Drift => source.ordered_touching(i),
            Condition::Diffusion => source.touching(i),
            Condition::Jump => source.ordered(i),
        };
        check_contract(&s, c != Condition::Diffusion, c != Condition::Jump, shape.dim, shape.r0)?;
        used += 1;
        let i = s.component;
        let mut found = |lhs: f64, rhs: f64, j: Option<usize>, mark: Option<usize>| {
            if violates(c, lhs, rhs) {
                witness = Some(ConditionWitness {
                    t: s.t,
                    component: i,
                    noise_component: j,
                    mark,
                    xi: s.xi.clone(),
                    xibar: s.xibar.clone(),
                    lhs,
                    rhs,
                });
                true
            } else {
                false
            }
        };
        match c {
            Condition::Drift => {
                if found(p.drift_vec(s.t, &s.xi)[i], b.drift_vec(s.t, &s.xibar)[i], None, None) {
                    break 'outer;
                }
            }
            Condition::Diffusion => {
                let (sp, sb) = (p.diffusion_vec(s.t, &s.xi), b.diffusion_vec(s.t, &s.xibar));
                for j in 0..m {
                    if found(sp[i * m + j], sb[i * m + j], Some(j), None) {
                        break 'outer;
                    }
                }
            }
            Condition::Jump => {
                for mark in 0..shape.marks.len() {
                    let l = s.xi.head()[i] + p.jump_vec(s.t, &s.xi, mark)[i];
                    let r = s.xibar.head()[i] + b.jump_vec(s.t, &s.xibar, mark)[i];
                    if found(l, r, None, Some(mark)) {
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(ConditionReport {
        condition: c,
        pass: witness.is_none(),
        sampled: true,
        samples: used,
        sampler: source.describe(),
        witness,
    })
}

/// `b^i(t, xi) <= bbar^i(t, xibar)` whenever `xi <= xibar`, `xi^i(0) = xibar^i(0)`.
pub fn check_cond_drift(
    cs: &CoefficientSet,
    source: &mut dyn OrderSource,
    n_samples: usize,
) -> Result<ConditionReport, OrderError> {
    run_check(cs, Condition::Drift, source, n_samples)
}

/// `sigma^{ij}(t, xi) = sigmabar^{ij}(t, xibar)` whenever `xi^i(0) = xibar^i(0)`.
pub fn check_cond_diffusion(
    cs: &CoefficientSet,
    source: &mut dyn OrderSource,
    n_samples: usize,
) -> Result<ConditionReport, OrderError> {
    run_check(cs, Condition::Diffusion, source, n_samples)
}

/// `xi^i(0) + gamma^i(t, xi, z) <= xibar^i(0) + gammabar^i(t, xibar, z)` for every mark whenever `xi <= xibar`.
pub fn check_cond_jump(
    cs: &CoefficientSet,
    source: &mut dyn OrderSource,
    n_samples: usize,
) -> Result<ConditionReport, OrderError> {
    run_check(cs, Condition::Jump, source, n_samples)
}

// ---------------------------------------------------------------------------
// Monte-Carlo order metric

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub n_paths: usize,
    pub master_seed: u64,
    /// Replaces every path's arrivals with these `(time, mark index)` events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject: Option<Vec<(f64, usize)>>,
    pub psi_levels: Vec<u32>,
}

impl McOptions {
    pub fn new(n_paths: usize, master_seed: u64) -> Self {
        McOptions { n_paths, master_seed, inject: None, psi_levels: vec![1, 4, 16, 64, 256, 1024] }
    }
}

/// Largest `X^i - Xbar^i` over nodes and left limits at `t >= t0`, floored at zero.
pub fn path_hard_sup(pair: &PairResult) -> f64 {
    let (x, y) = (&pair.plain, &pair.barred);
    let start = x.origin_index();
    let offset = y.origin_index();
    debug_assert_eq!(x.len() - start, y.len() - offset);
    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u - v).fold(0.0_f64, f64::max);
    let mut best = 0.0_f64;
    for k in start..x.len() {
        let kb = k - start + offset;
        best = best.max(gap(x.node(k), y.node(kb)));
        let pre = (x.pre_jump(k), y.pre_jump(kb));
        if let (Some(a), Some(b)) = pre {
            best = best.max(gap(a, b));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftPsi {
    pub n: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderMetric {
    pub paths: usize,
    pub failed_paths: usize,
    pub hard_sup: f64,
    pub violation_frequency: f64,
    pub soft_psi: Vec<SoftPsi>,
    /// Per-path hard sup in path order; `None` for failed paths.
    pub per_path: Vec<Option<f64>>,
}

impl OrderMetric {
    /// Reduction that does not depend on the order of `per_path`.
    pub fn from_paths(per_path: Vec<Option<f64>>, psi_levels: &[u32]) -> Self {
        let mut ok: Vec<f64> = per_path.iter().flatten().copied().collect();
        ok.sort_by(f64::total_cmp);
        let n = ok.len();
        let hard_sup = ok.last().copied().unwrap_or(0.0);
        let violations = ok.iter().filter(|&&v| v > 0.0).count();
        let soft_psi = psi_levels
            .iter()
            .map(|&lvl| {
                // psi_n is nondecreasing, so sup_t psi_n(gap) = psi_n(sup_t gap).
                let mut v: Vec<f64> = ok.iter().map(|&s| psi(lvl, s).powi(2)).collect();
                v.sort_by(f64::total_cmp);
                SoftPsi { n: lvl, value: if n == 0 { 0.0 } else { v.iter().sum::<f64>() / n as f64 } }
            })
            .collect();
        OrderMetric {
            paths: per_path.len(),
            failed_paths: per_path.len() - n,
            hard_sup,
            violation_frequency: if n == 0 { 0.0 } else { violations as f64 / n as f64 },
            soft_psi,
            per_path,
        }
    }
}

/// Solves the coupled pair on `opts.n_paths` realizations and measures order violations.
pub fn verify_order_mc(
    cs: &CoefficientSet,
    xi: &Segment,
    xibar: &Segment,
    cfg: &SolverConfig,
    opts: &McOptions,
) -> Result<OrderMetric, OrderError> {
    if !xi.leq(xibar)? {
        return Err(OrderError::Precondition("initial segments must satisfy xi <= xibar".into()));
    }
    let spec = NoiseSpec {
        m: cs.shape.noise_dim,
        measure: cs.shape.marks.clone(),
        t0: cfg.t0,
        horizon: cfg.horizon,
        base_step: cfg.step,
    };
    // Surface configuration errors once instead of per path.
    let probe = spec.realize(SeedRecord::new(opts.master_seed, 0))?;
    if let Some(ev) = &opts.inject {
        probe.inject_events(ev)?;
    }
    let per_path = par_paths(opts.n_paths, |p| {
        let mut noise = spec.realize(SeedRecord::new(opts.master_seed, p)).ok()?;
        if let Some(ev) = &opts.inject {
            noise = noise.inject_events(ev).ok()?;
        }
        solve_coupled(cs, xi, xibar, &noise, cfg).ok().map(|pair| path_hard_sup(&pair))
    });
    if per_path.iter().all(Option::is_none) && opts.n_paths > 0 {
        // Report the cause when nothing could be solved.
        let mut noise = probe;
        if let Some(ev) = &opts.inject {
            noise = noise.inject_events(ev)?;
        }
        solve_coupled(cs, xi, xibar, &noise, cfg)?;
    }
    Ok(OrderMetric::from_paths(per_path, &opts.psi_levels))
}

// ---------------------------------------------------------------------------
// Generator and necessity probe

/// Twice differentiable test function on `R^d`.
pub trait TestFunction {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Row-major `d x d`.
    fn hessian(&self, x: &[f64], out: &mut [f64]);
}

/// `h(x) = sum_i c_i x^i + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub coefficients: Vec<f64>,
    pub constant: f64,
}

impl TestFunction for Affine {
    fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    fn gradient(&self, _: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.coefficients);
    }

    fn hessian(&self, _: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

fn smoothstep(u: f64) -> f64 {
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// `h(x) = Phi(x^i - center)` where `Phi' = phi` is a smooth bump:
/// 1 on `[-eps, eps]`, 0 outside `[-2 eps, 2 eps]`, quintic in between.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpPrimitive {
    pub component: usize,
    pub center: f64,
    pub eps: f64,
}

impl BumpPrimitive {
    pub fn bump(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.eps {
            1.0
        } else if a < 2.0 * self.eps {
            1.0 - smoothstep((a - self.eps) / self.eps)
        } else {
            0.0
        }
    }

    pub fn bump_prime(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.eps || a >= 2.0 * self.eps {
            return 0.0;
        }
        let u = (a - self.eps) / self.eps;
        -s.signum() * 30.0 * u * u * (u - 1.0) * (u - 1.0) / self.eps
    }

    pub fn primitive(&self, y: f64) -> f64 {
        let a = y.abs();
        let e = self.eps;
        let v = if a <= e {
            a
        } else if a < 2.0 * e {
            let u = (a - e) / e;
            a - e * u.powi(4) * (u * u - 3.0 * u + 2.5)
        } else {
            1.5 * e
        };
        v.copysign(y)
    }
}

impl TestFunction for BumpPrimitive {
    fn value(&self, x: &[f64]) -> f64 {
        self.primitive(x[self.component] - self.center)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[self.component] = self.bump(x[self.component] - self.center);
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let d = x.len();
        out[self.component * d + self.component] = self.bump_prime(x[self.component] - self.center);
    }
}

fn finite(v: &[f64], what: &'static str, t: f64) -> Result<(), CoeffError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(CoeffError::NonFiniteCoefficient { what, t })
    }
}

/// `(Lh)(t, xi)` with the mark integral summed over the finite mark space.
#[allow(non_snake_case)]
pub fn generator_L(eq: &Equation, h: &dyn TestFunction, t: f64, xi: &Segment) -> Result<f64, CoeffError> {
    let d = eq.shape.dim;
    let m = eq.shape.noise_dim;
    let x0 = xi.head();
    let b = eq.drift_vec(t, xi);
    finite(&b, "drift", t)?;
    let s = eq.diffusion_vec(t, xi);
    finite(&s, "diffusion", t)?;
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    h.gradient(x0, &mut grad);
    h.hessian(x0, &mut hess);
    let mut total: f64 = b.iter().zip(&grad).map(|(u, v)| u * v).sum();
    for i in 0..d {
        for j in 0..d {
            let a: f64 = (0..m).map(|k| s[i * m + k] * s[j * m + k]).sum();
            total += 0.5 * a * hess[i * d + j];
        }
    }
    let base = h.value(x0);
    let mut shifted = vec![0.0; d];
    for (k, mark) in eq.shape.marks.marks().iter().enumerate() {
        let g = eq.jump_vec(t, xi, k);
        finite(&g, "jump", t)?;
        for (o, (x, gi)) in shifted.iter_mut().zip(x0.iter().zip(&g)) {
            *o = x + gi;
        }
        total += mark.weight * (h.value(&shifted) - base);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeVerdict {
    NoViolation,
    Inconclusive,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub component: usize,
    pub eps: f64,
    pub t0: f64,
    pub lh: f64,
    pub lh_bar: f64,
    pub jump_slack: f64,
    pub verdict: ProbeVerdict,
    pub notes: Vec<String>,
}

/// Compares `Lh` and `Lbar h` for the bump primitive centered at `xi^i(0)`.
pub fn necessity_probe_drift(
    cs: &CoefficientSet,
    t0: f64,
    xi: &Segment,
    xibar: &Segment,
    component: usize,
    eps: f64,
) -> Result<ProbeReport, OrderError> {
    if component >= cs.shape.dim {
        return Err(OrderError::Precondition(format!("component {component} out of range")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(OrderError::Precondition(format!("bump width must be positive, got {eps}")));
    }
    if !xi.leq(xibar)? || xi.head()[component] != xibar.head()[component] {
        return Err(OrderError::Precondition("need xi <= xibar with xi^i(0) = xibar^i(0)".into()));
    }
    let h = BumpPrimitive { component, center: xi.head()[component], eps };
    let (p, b) = (cs.plain_equation(), cs.barred_equation());
    let lh = generator_L(&p, &h, t0, xi)?;
    let lh_bar = generator_L(&b, &h, t0, xibar)?;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let jump_slack: f64 = (0..cs.shape.marks.len())
        .map(|k| {
            let g = norm(&p.jump_vec(t0, xi, k)) + norm(&b.jump_vec(t0, xibar, k));
            cs.shape.marks.weight(k) * (4.0 * eps).min(g)
        })
        .sum();
    let excess = lh - lh_bar;
    let verdict = if excess <= 0.0 {
        ProbeVerdict::NoViolation
    } else if excess <= jump_slack {
        ProbeVerdict::Inconclusive
    } else {
        ProbeVerdict::Violation
    };
    Ok(ProbeReport {
        component,
        eps,
        t0,
        lh,
        lh_bar,
        jump_slack,
        verdict,
        notes: vec![
            "condition (AB) holds automatically for a finite mark measure".into(),
            "continuity of the coefficients is assumed, not checked".into(),
        ],
    })
}
