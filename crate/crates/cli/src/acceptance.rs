//! The acceptance suite: eight criteria with pinned thresholds and their own reference values.
//!
//! Reference values here are computed independently of the library paths they check
//! (quadrature, closed-form solutions, hand-derived verdicts).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use sfde_core::coeff::{builtin, BuiltinParams, CoefficientConfig, CATALOGUE};
use sfde_core::existence::{approximation_cascade, uniqueness_check, Part};
use sfde_core::order::{
    check_cond_diffusion, check_cond_drift, check_cond_jump, necessity_probe_drift, Condition, OrderSampler,
    ProbeVerdict,
};
use sfde_core::solver::par_paths;
use sfde_core::{
    bihari_bound, mollify, psi, psi_prime, psi_second, verify_order_mc, BihariKernel, ControlFunction, MarkMeasure,
    McOptions, MollifierLaw, NoiseSpec, SeedRecord, Segment, SolverConfig,
};

pub const PSI_TOL: f64 = 1e-10;
/// Rounding allowance for `s psi''(s) <= 1`, attained at `s = 1/(2n)`.
pub const PSI_SECOND_TOL: f64 = 1e-12;
pub const BIHARI_REL_TOL: f64 = 1e-8;
pub const SUFFICIENCY_FINE_MAX: f64 = 0.1;
pub const DELAYED_DIFFUSION_MIN_FREQ: f64 = 0.25;
pub const CHECKER_SAMPLES: usize = 10_000;
pub const CASCADE_MAX_RATIO: f64 = 0.2;
/// Half-width of the confidence interval in standard errors.
pub const CI_Z: f64 = 3.0;
pub const UNIQUENESS_TOL: f64 = 1e-12;
pub const VARIANCE_REL_TOL: f64 = 0.01;
pub const SIGMA_BAND: f64 = 3.0;

/// Wall-clock budgets in seconds, by criterion.
pub const BUDGET_SECONDS: [f64; 8] = [1.0, 1.0, 120.0, 60.0, 30.0, 120.0, 60.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} {} {}: {} [{:.2}s of {}s]",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.seconds,
            self.budget_seconds
        )
    }
}

/// Runs criterion `id` (1..=8); a criterion over its time budget fails.
pub fn criterion(id: u8) -> CriterionResult {
    let start = Instant::now();
    let (title, outcome): (&'static str, Result<String, String>) = match id {
        1 => ("psi family", psi_suite()),
        2 => ("Bihari bound", bihari_suite()),
        3 => ("sufficiency", sufficiency()),
        4 => ("necessity", necessity()),
        5 => ("condition checkers", checkers()),
        6 => ("existence cascade", cascade()),
        7 => ("uniqueness and replay", uniqueness_and_replay()),
        8 => ("noise statistics", noise_statistics()),
        _ => panic!("no acceptance criterion {id}"),
    };
    let seconds = start.elapsed().as_secs_f64();
    let budget = BUDGET_SECONDS[usize::from(id) - 1];
    let (mut pass, mut detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if seconds > budget {
        pass = false;
        detail.push_str("; over time budget");
    }
    CriterionResult { id, title, pass, detail, seconds, budget_seconds: budget }
}

pub fn run_all() -> Vec<CriterionResult> {
    (1..=8).map(criterion).collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ---------------------------------------------------------------------------
// 1

/// Five-point Gauss-Legendre on `[a, b]`.
fn gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 5] =
        [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    X.iter().zip(W).map(|(x, w)| w * f(c + r * x)).sum::<f64>() * r
}

/// `int_0^s f`, split where the integrand changes polynomial piece.
fn integral(f: &dyn Fn(f64) -> f64, n: u32, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let nf = f64::from(n);
    let mut cuts = vec![0.0];
    cuts.extend([0.5 / nf, 1.0 / nf].into_iter().filter(|&c| c < s));
    cuts.push(s);
    cuts.windows(2).map(|w| gauss(f, w[0], w[1])).sum()
}

/// The hat-shaped second derivative: `4 n^2 u` rising to `2n` at `1/(2n)`, then back to 0 at `1/n`.
fn hat(n: u32, u: f64) -> f64 {
    let nf = f64::from(n);
    if u > 0.0 && u <= 0.5 / nf {
        4.0 * nf * nf * u
    } else if u > 0.5 / nf && u < 1.0 / nf {
        4.0 * nf * nf * (1.0 / nf - u)
    } else {
        0.0
    }
}

fn psi_reference(n: u32, s: f64) -> f64 {
    let first = move |r: f64| integral(&|u| hat(n, u), n, r);
    integral(&first, n, s)
}

fn psi_suite() -> Result<String, String> {
    let mut grid = vec![-1.0, 0.0];
    // 1e-6 to 10, twenty points per decade.
    grid.extend((0..=140).map(|k| 10f64.powf(-6.0 + f64::from(k) / 20.0)));
    let mut worst = 0.0_f64;
    let mut count = 0usize;
    for n in 1..=1024u32 {
        let nf = f64::from(n);
        for &s in &grid {
            let (v, d1, q) = (psi(n, s), psi_prime(n, s), s * psi_second(n, s));
            ensure(v >= 0.0 && v <= s.max(0.0), || format!("psi_{n}({s}) = {v} exceeds s+"))?;
            ensure((0.0..=1.0).contains(&d1), || format!("psi'_{n}({s}) = {d1}"))?;
            ensure((0.0..=1.0 + PSI_SECOND_TOL).contains(&q), || format!("s psi''_{n}({s}) = {q}"))?;
            if s <= 0.0 || s >= 1.0 / nf {
                ensure(q == 0.0, || format!("s psi''_{n}({s}) = {q} outside (0, 1/n)"))?;
            }
            let err = (v - psi_reference(n, s)).abs();
            worst = worst.max(err);
            ensure(err <= PSI_TOL, || format!("psi_{n}({s}) off quadrature by {err:e}"))?;
            if s >= 1.0 / nf {
                let e = (v - (s - 0.5 / nf)).abs();
                ensure(e <= PSI_TOL, || format!("psi_{n}({s}) off s - 1/(2n) by {e:e}"))?;
            }
            count += 1;
        }
    }
    Ok(format!("{count} points, max |psi - quadrature| = {worst:.1e} <= {PSI_TOL:e}"))
}

// ---------------------------------------------------------------------------
// 2

fn bihari_suite() -> Result<String, String> {
    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        (0..10).map(|k| (lo.ln() + (hi.ln() - lo.ln()) * f64::from(k) / 9.0).exp()).collect()
    };
    let closed = BihariKernel::new(ControlFunction::one());
    // Same control, but without the closed-form shortcut: quadrature and bisection.
    let quadrature = BihariKernel::new(ControlFunction::custom("one-by-quadrature", |_| 1.0));
    let mut worst = [0.0_f64; 2];
    for &a in &axis(0.1, 10.0) {
        for &c in &axis(0.1, 5.0) {
            for &t in &axis(0.1, 5.0) {
                let expected = a * (c * t).exp();
                for (k, kernel) in [&closed, &quadrature].into_iter().enumerate() {
                    let got = bihari_bound(kernel, a, c, t).map_err(|e| format!("a={a} c={c} t={t}: {e}"))?;
                    let rel = (got - expected).abs() / expected;
                    worst[k] = worst[k].max(rel);
                    ensure(rel <= BIHARI_REL_TOL, || format!("a={a} c={c} t={t}: {got} vs {expected}"))?;
                }
            }
        }
    }
    Ok(format!(
        "1000 grid points, max rel error {:.1e} closed form, {:.1e} quadrature <= {BIHARI_REL_TOL:e}",
        worst[0], worst[1]
    ))
}

// ---------------------------------------------------------------------------
// 3

fn sufficiency() -> Result<String, String> {
    let cs = builtin("shifted_drift_pair", &BuiltinParams::default()).map_err(|e| e.to_string())?;
    let zero = Segment::constant(0.0, &[0.0]);
    let mut medians = Vec::new();
    for h in [1e-2, 1e-3, 1e-4] {
        let cfg = SolverConfig::new(h, 0.0, 1.0);
        let mut sups = Vec::with_capacity(32);
        for seed in 0..32 {
            let m =
                verify_order_mc(&cs, &zero, &zero, &cfg, &McOptions::new(1_000, seed)).map_err(|e| e.to_string())?;
            ensure(m.failed_paths == 0, || format!("h={h} seed {seed}: {} failed paths", m.failed_paths))?;
            sups.push(m.hard_sup);
        }
        medians.push(median(sups));
    }
    ensure(medians.windows(2).all(|w| w[1] <= w[0]), || format!("medians not nonincreasing: {medians:?}"))?;
    ensure(medians[2] <= SUFFICIENCY_FINE_MAX, || format!("median at h=1e-4 is {}", medians[2]))?;

    let jump = builtin("constant_jump", &BuiltinParams::default()).map_err(|e| e.to_string())?;
    let half = Segment::constant(0.0, &[0.5]);
    for h in [1e-2, 1e-3, 1e-4] {
        let cfg = SolverConfig::new(h, 0.0, 1.0);
        for (upper, tag) in [(&zero, "equal"), (&half, "ordered")] {
            let m = verify_order_mc(&jump, &zero, upper, &cfg, &McOptions::new(1_000, 9)).map_err(|e| e.to_string())?;
            ensure(m.hard_sup == 0.0 && m.failed_paths == 0, || {
                format!("constant_jump {tag} h={h}: hard_sup {}", m.hard_sup)
            })?;
        }
    }
    Ok(format!(
        "shifted_drift_pair medians {:.3e}, {:.3e}, {:.3e} (nonincreasing, last <= {SUFFICIENCY_FINE_MAX}); constant_jump hard_sup 0",
        medians[0], medians[1], medians[2]
    ))
}

// ---------------------------------------------------------------------------
// 4

fn necessity() -> Result<String, String> {
    // (a) b = 1 against b_bar = 0.
    let cfg = CoefficientConfig::from_json(r#"{"d": 1, "m": 1, "b": ["1"], "barred": {"b": ["0"]}}"#)
        .and_then(|c| c.build())
        .map_err(|e| e.to_string())?;
    let zero = Segment::constant(0.0, &[0.0]);
    let probe = necessity_probe_drift(&cfg, 0.0, &zero, &zero, 0, 0.1).map_err(|e| e.to_string())?;
    // h'(x) = 1 at the bump centre, so L h - L_bar h = b - b_bar = 1.
    ensure(probe.verdict == ProbeVerdict::Violation, || format!("probe verdict {:?}", probe.verdict))?;
    ensure((probe.lh - probe.lh_bar - 1.0).abs() <= 1e-12, || format!("Lh - Lbar h = {}", probe.lh - probe.lh_bar))?;
    let m = verify_order_mc(&cfg, &zero, &zero, &SolverConfig::new(1e-3, 0.0, 1.0), &McOptions::new(1_000, 4))
        .map_err(|e| e.to_string())?;
    ensure(m.violation_frequency == 1.0, || format!("(a) violation frequency {}", m.violation_frequency))?;

    // (b) delayed diffusion, xi = 0 below xibar(theta) = -theta.
    let dd = builtin("delayed_diffusion", &BuiltinParams::default()).map_err(|e| e.to_string())?;
    let xi = Segment::constant(1.0, &[0.0]);
    let xibar = Segment::new(1, 1.0, vec![(-1.0, vec![1.0]), (0.0, vec![0.0])], vec![]).map_err(|e| e.to_string())?;
    let mb = verify_order_mc(&dd, &xi, &xibar, &SolverConfig::new(1e-3, 0.0, 1.0), &McOptions::new(1_000, 5))
        .map_err(|e| e.to_string())?;
    ensure(mb.violation_frequency >= DELAYED_DIFFUSION_MIN_FREQ, || {
        format!("(b) violation frequency {}", mb.violation_frequency)
    })?;

    // (c) one jump at t = 1/2: X goes from -2 to 0 while Xbar stays at -1.
    let nj = builtin("negating_jump", &BuiltinParams::default()).map_err(|e| e.to_string())?;
    let opts = McOptions { inject: Some(vec![(0.5, 0)]), ..McOptions::new(100, 6) };
    let (lo, hi) = (Segment::constant(0.0, &[-2.0]), Segment::constant(0.0, &[-1.0]));
    let mc = verify_order_mc(&nj, &lo, &hi, &SolverConfig::new(1e-2, 0.0, 1.0), &opts).map_err(|e| e.to_string())?;
    ensure(mc.per_path.iter().all(|v| *v == Some(1.0)), || format!("(c) per-path gaps {:?}", &mc.per_path[..3]))?;

    Ok(format!(
        "(a) probe violation, Lh - Lbar h = {}, frequency {}; (b) frequency {} >= {DELAYED_DIFFUSION_MIN_FREQ}; (c) gap 1 on all {} paths",
        probe.lh - probe.lh_bar,
        m.violation_frequency,
        mb.violation_frequency,
        mc.paths
    ))
}

// ---------------------------------------------------------------------------
// 5

/// Hand-derived verdicts `[drift, diffusion, jump]` per builtin.
const EXPECTED: &[(&str, [bool; 3])] = &[
    ("zero", [true, true, true]),
    ("linear_drift", [true, true, true]),
    ("shifted_drift_pair", [true, true, true]),
    ("delayed_drift", [true, true, true]),
    ("geometric_diffusion", [true, true, true]),
    ("delayed_diffusion", [true, false, true]),
    ("constant_jump", [true, true, true]),
    ("negating_jump", [true, true, false]),
    ("abs_drift", [true, true, true]),
    ("log_lipschitz_drift", [true, true, true]),
];

fn checkers() -> Result<String, String> {
    ensure(CATALOGUE.len() == EXPECTED.len(), || format!("catalogue has {} entries", CATALOGUE.len()))?;
    let mut violations = 0;
    for entry in CATALOGUE {
        let expected = EXPECTED
            .iter()
            .find(|(n, _)| *n == entry.name)
            .map(|(_, v)| *v)
            .ok_or_else(|| format!("no expected verdict for {}", entry.name))?;
        ensure(expected == entry.expected, || format!("{}: documented verdict differs", entry.name))?;
        let cs = builtin(entry.name, &BuiltinParams::default()).map_err(|e| e.to_string())?;
        let conditions = [Condition::Drift, Condition::Diffusion, Condition::Jump];
        for (k, c) in conditions.into_iter().enumerate() {
            let mut sampler = OrderSampler::for_shape(&cs, 100 + k as u64);
            let report = match c {
                Condition::Drift => check_cond_drift(&cs, &mut sampler, CHECKER_SAMPLES),
                Condition::Diffusion => check_cond_diffusion(&cs, &mut sampler, CHECKER_SAMPLES),
                Condition::Jump => check_cond_jump(&cs, &mut sampler, CHECKER_SAMPLES),
            }
            .map_err(|e| format!("{} {c:?}: {e}", entry.name))?;
            ensure(report.pass == expected[k], || format!("{} {c:?}: verdict {}", entry.name, report.pass))?;
            match &report.witness {
                Some(w) => {
                    ensure(w.confirms(&cs, c), || format!("{} {c:?}: witness does not re-evaluate", entry.name))?;
                    violations += 1;
                }
                None => ensure(report.pass, || format!("{} {c:?}: failure without witness", entry.name))?,
            }
        }
    }
    Ok(format!(
        "{} builtins x 3 conditions at {CHECKER_SAMPLES} samples; {violations} confirmed witnesses",
        CATALOGUE.len()
    ))
}

// ---------------------------------------------------------------------------
// 6

fn cascade() -> Result<String, String> {
    let cs = builtin("abs_drift", &BuiltinParams::default()).map_err(|e| e.to_string())?;
    let eq = cs.plain_equation();
    let levels = [1u32, 2, 4, 8, 16];
    let zero = Segment::zero(1, 0.0);
    let cfg = SolverConfig::new(0.01, 0.0, 1.0);
    let spec = NoiseSpec { m: 1, measure: MarkMeasure::empty(), t0: 0.0, horizon: 1.0, base_step: 0.01 };
    let runs = par_paths(16, |seed| -> Result<Vec<f64>, String> {
        let noise = spec.realize(SeedRecord::new(seed, 0)).map_err(|e| e.to_string())?;
        let law = MollifierLaw::new(0.0, 10_000, seed);
        let report =
            approximation_cascade(&eq, &zero, &noise, &cfg, &law, &levels, false).map_err(|e| e.to_string())?;
        Ok(report.gaps.iter().map(|g| g.gap).collect())
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let medians: Vec<f64> = (0..levels.len()).map(|k| median(runs.iter().map(|r| r[k]).collect())).collect();
    ensure(medians.windows(2).all(|w| w[1] < w[0]), || format!("gaps not decreasing: {medians:?}"))?;
    let ratio = medians[4] / medians[0];
    ensure(ratio <= CASCADE_MAX_RATIO, || format!("D(16)/D(1) = {ratio}"))?;

    // E|B(0)| / n for a standard normal B(0).
    let law = MollifierLaw::new(0.0, 10_000, 77);
    let mut worst = 0.0_f64;
    for n in levels {
        let m = mollify(&eq, &law, n).map_err(|e| e.to_string())?;
        let est = m.estimate(Part::Drift, 0.0, &zero);
        let exact = (2.0 / std::f64::consts::PI).sqrt() / f64::from(n);
        let z = (est.mean[0] - exact).abs() / est.std_error[0];
        worst = worst.max(z);
        ensure(z <= CI_Z, || format!("n={n}: {} vs {exact} ({z:.2} standard errors)", est.mean[0]))?;
    }
    Ok(format!(
        "median gaps {}; D(16)/D(1) = {ratio:.4} <= {CASCADE_MAX_RATIO}; mollified value within {worst:.2} <= {CI_Z} standard errors",
        medians.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>().join(", ")
    ))
}

// ---------------------------------------------------------------------------
// 7

fn scratch_dir(tag: &str) -> PathBuf {
    let nanos = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
    std::env::temp_dir().join(format!("sfde-acceptance-{}-{nanos}-{tag}", std::process::id()))
}

fn same_files(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> =
        fs::read_dir(a).map_err(|e| e.to_string())?.filter_map(|e| e.ok()).map(|e| e.file_name()).collect();
    names.sort();
    for name in &names {
        let x = fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = fs::read(b.join(name)).map_err(|e| format!("{}: {e}", name.to_string_lossy()))?;
        ensure(x == y, || format!("{} differs on replay", name.to_string_lossy()))?;
    }
    Ok(names.len())
}

fn uniqueness_and_replay() -> Result<String, String> {
    let cs = builtin("linear_drift", &BuiltinParams::default()).map_err(|e| e.to_string())?;
    let seeds: Vec<u64> = (0..32).collect();
    let report = uniqueness_check(
        &cs.plain_equation(),
        &Segment::constant(0.0, &[1.0]),
        &SolverConfig::new(0.01, 0.0, 1.0),
        &seeds,
        None,
    )
    .map_err(|e| e.to_string())?;
    ensure(report.max_distance <= UNIQUENESS_TOL, || format!("max sup-distance {:e}", report.max_distance))?;

    let (first, second) = (scratch_dir("run"), scratch_dir("replay"));
    let runs: [&[&str]; 3] = [
        &["simulate", "--builtin", "linear_drift", "--init-const", "1", "--paths", "8", "--seed", "3"],
        &[
            "verify-order",
            "--builtin",
            "geometric_diffusion",
            "--param",
            "s=3",
            "--init-const",
            "1",
            "--initbar-const",
            "2",
            "--paths",
            "64",
            "--step",
            "0.02",
        ],
        &["existence-cascade", "--builtin", "abs_drift", "--levels", "1,2,4", "--samples", "200"],
    ];
    let outcome = (|| -> Result<usize, String> {
        for args in runs {
            let mut argv = vec!["sfde", "--out", first.to_str().ok_or("temp path")?];
            argv.extend_from_slice(args);
            ensure(crate::run(&argv) == 0, || format!("`{}` failed", args.join(" ")))?;
            let summary = first.join(format!("{}.json", args[0]));
            let replay =
                ["sfde", "--out", second.to_str().ok_or("temp path")?, "replay", summary.to_str().ok_or("temp path")?];
            ensure(crate::run(replay) == 0, || format!("replay of {} failed", args[0]))?;
        }
        same_files(&first, &second)
    })();
    let _ = fs::remove_dir_all(&first);
    let _ = fs::remove_dir_all(&second);
    let files = outcome?;
    Ok(format!(
        "max sup-distance {:.1e} <= {UNIQUENESS_TOL:e} over 32 seeds; {files} replayed files byte-identical",
        report.max_distance
    ))
}

// ---------------------------------------------------------------------------
// 8

fn noise_statistics() -> Result<String, String> {
    let h = 0.01;
    let n = 100_000;
    let spec = NoiseSpec { m: 2, measure: MarkMeasure::empty(), t0: 0.0, horizon: n as f64 * h, base_step: h };
    let noise = spec.realize(SeedRecord::new(2024, 0)).map_err(|e| e.to_string())?;
    let mut worst_var = 0.0_f64;
    for j in 0..2 {
        let xs: Vec<f64> = (0..noise.steps()).map(|k| noise.increment(k)[j]).collect();
        let nf = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let rel = (var / h - 1.0).abs();
        worst_var = worst_var.max(rel);
        ensure(rel <= VARIANCE_REL_TOL, || format!("component {j}: variance ratio {}", var / h))?;
    }

    // Intensities 1, 1.5, 2.5 over T = 1: N_T is Poisson(5).
    let weights = [1.0, 1.5, 2.5];
    let measure = MarkMeasure::from_weights(&weights).map_err(|e| e.to_string())?;
    let total: f64 = weights.iter().sum();
    let paths = 20_000;
    let spec = NoiseSpec { m: 1, measure, t0: 0.0, horizon: 1.0, base_step: 0.1 };
    let per_path = par_paths(paths, |p| -> Result<[usize; 3], String> {
        let noise = spec.realize(SeedRecord::new(2025, p)).map_err(|e| e.to_string())?;
        let mut c = [0usize; 3];
        for e in noise.events() {
            c[e.mark] += 1;
        }
        Ok(c)
    });
    let mut counts = [0usize; 3];
    for c in per_path {
        let c = c?;
        for k in 0..3 {
            counts[k] += c[k];
        }
    }
    let arrivals: usize = counts.iter().sum();
    let mean = arrivals as f64 / paths as f64;
    let sd = (total / paths as f64).sqrt();
    ensure((mean - total).abs() <= SIGMA_BAND * sd, || format!("mean arrivals {mean} vs {total}"))?;
    ensure(arrivals >= 100_000, || format!("only {arrivals} arrivals"))?;
    for (k, w) in weights.iter().enumerate() {
        let p = w / total;
        let nf = arrivals as f64;
        let band = SIGMA_BAND * (nf * p * (1.0 - p)).sqrt();
        ensure((counts[k] as f64 - nf * p).abs() <= band, || format!("mark {k}: {} vs {}", counts[k], nf * p))?;
    }
    Ok(format!(
        "variance within {:.2}% (<= 1%); mean arrivals {mean:.4} vs {total} (+-{:.4}); {arrivals} marks within 3 sigma",
        100.0 * worst_var,
        SIGMA_BAND * sd
    ))
}
