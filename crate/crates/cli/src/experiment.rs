//! Resolved experiment configurations and their execution.
//!
//! A configuration holds everything a run depends on, with file contents inlined, so the
//! summary written by [`Experiment::execute`] is enough to repeat the run.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sfde_core::coeff::{check_a1, check_a2, CoefficientConfig};
use sfde_core::existence::{approximation_cascade, MollifierLaw};
use sfde_core::order::{
    check_cond_diffusion, check_cond_drift, check_cond_jump, necessity_probe_drift, OrderSampler, ProbeVerdict,
};
use sfde_core::sampling::{RandomPairs, SegmentLaw};
use sfde_core::solver::{moment_diagnostic, par_paths};
use sfde_core::{
    bihari_bound, psi, psi_prime, psi_second, solve_path, verify_order_mc, BihariKernel, CoefficientSet,
    ControlFunction, History, MarkMeasure, McOptions, NoiseRealization, NoiseSpec, SeedRecord, Segment, SegmentLiteral,
    SolverConfig,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub step: f64,
    pub t0: f64,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_radius: Option<f64>,
}

impl SolverSettings {
    fn config(&self) -> SolverConfig {
        let cfg = SolverConfig::new(self.step, self.t0, self.horizon);
        match self.stop_radius {
            Some(r) => cfg.with_stop_radius(r),
            None => cfg,
        }
    }

    fn noise_spec(&self, cs: &CoefficientSet) -> NoiseSpec {
        NoiseSpec {
            m: cs.shape.noise_dim,
            measure: cs.shape.marks.clone(),
            t0: self.t0,
            horizon: self.horizon,
            base_step: self.step,
        }
    }
}

/// A jump forced at time `t` with the mark labelled `mark`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedEvent {
    pub t: f64,
    pub mark: String,
}

fn resolve_events(measure: &MarkMeasure, events: &[InjectedEvent]) -> Result<Option<Vec<(f64, usize)>>, CliError> {
    if events.is_empty() {
        return Ok(None);
    }
    events
        .iter()
        .map(|e| {
            measure
                .index_of(&e.mark)
                .map(|k| (e.t, k))
                .ok_or_else(|| CliError::Usage(format!("unknown mark `{}` in injected events", e.mark)))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub coeff: CoefficientConfig,
    pub init: SegmentLiteral,
    pub seed: u64,
    pub paths: usize,
    pub solver: SolverSettings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inject: Vec<InjectedEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub coeff: CoefficientConfig,
    pub samples: usize,
    pub seed: u64,
    /// Control function for the sampled growth checks; they are skipped when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub coeff: CoefficientConfig,
    pub init: SegmentLiteral,
    pub initbar: SegmentLiteral,
    pub seed: u64,
    pub paths: usize,
    pub solver: SolverSettings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inject: Vec<InjectedEvent>,
    pub psi_levels: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub coeff: CoefficientConfig,
    pub init: SegmentLiteral,
    pub initbar: SegmentLiteral,
    pub t0: f64,
    /// Zero-based state component.
    pub component: usize,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub coeff: CoefficientConfig,
    pub init: SegmentLiteral,
    pub seed: u64,
    pub solver: SolverSettings,
    pub levels: Vec<u32>,
    pub mollifier: MollifierLaw,
    pub truncate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BihariConfig {
    pub u: String,
    pub a: f64,
    pub c: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiConfig {
    pub n: Vec<u32>,
    pub points: Vec<f64>,
}

/// A replayable run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
pub enum Experiment {
    Simulate(SimulateConfig),
    CheckConditions(CheckConfig),
    VerifyOrder(VerifyConfig),
    NecessityProbe(ProbeConfig),
    ExistenceCascade(CascadeConfig),
    Bihari(BihariConfig),
    PsiTable(PsiConfig),
}

/// Result of a run before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub result: Value,
    /// `(name, contents)`; written as `<command>_<name>.csv`.
    pub tables: Vec<(String, Vec<u8>)>,
    /// Printed to standard output.
    pub stdout: String,
    /// Whether the run found a failed condition or an order violation.
    pub check_failed: bool,
}

impl Outcome {
    fn new(result: Value) -> Self {
        Outcome { result, tables: Vec::new(), stdout: String::new(), check_failed: false }
    }
}

fn segment(lit: &SegmentLiteral) -> Result<Segment, CliError> {
    Segment::try_from(lit.clone()).map_err(|e| CliError::Usage(format!("initial segment: {e}")))
}

fn build(coeff: &CoefficientConfig) -> Result<CoefficientSet, CliError> {
    coeff.build().map_err(|e| CliError::Usage(format!("coefficients: {e}")))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable report")
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[String]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Table { writer }
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) {
        self.writer.write_record(fields.into_iter().collect::<Vec<_>>()).expect("in-memory write");
    }

    fn finish(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

/// Rows `prefix, t, x^1..x^d, jump` from `t0` on; a jump node gives its left limit first.
fn history_rows(table: &mut Table, prefix: &str, h: &History) {
    for k in h.origin_index()..h.len() {
        let t = h.time_of(h.ticks()[k]);
        let emit = |table: &mut Table, x: &[f64], flag: u8| {
            let mut fields = vec![prefix.to_string(), t.to_string()];
            fields.extend(x.iter().map(f64::to_string));
            fields.push(flag.to_string());
            table.row(fields);
        };
        match h.pre_jump(k) {
            Some(pre) => {
                emit(table, pre, 0);
                emit(table, h.node(k), 1);
            }
            None => emit(table, h.node(k), 0),
        }
    }
}

fn state_header(first: &str, d: usize) -> Vec<String> {
    let mut header = vec![first.to_string(), "t".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    header.push("jump".to_string());
    header
}

fn realize(spec: &NoiseSpec, seed: SeedRecord, inject: Option<&[(f64, usize)]>) -> Result<NoiseRealization, String> {
    let noise = spec.realize(seed).map_err(|e| e.to_string())?;
    match inject {
        Some(ev) => noise.inject_events(ev).map_err(|e| e.to_string()),
        None => Ok(noise),
    }
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate(_) => "simulate",
            Experiment::CheckConditions(_) => "check-conditions",
            Experiment::VerifyOrder(_) => "verify-order",
            Experiment::NecessityProbe(_) => "necessity-probe",
            Experiment::ExistenceCascade(_) => "existence-cascade",
            Experiment::Bihari(_) => "bihari",
            Experiment::PsiTable(_) => "psi-table",
        }
    }

    pub fn execute(&self) -> Result<Outcome, CliError> {
        match self {
            Experiment::Simulate(c) => simulate(c),
            Experiment::CheckConditions(c) => check_conditions(c),
            Experiment::VerifyOrder(c) => verify_order(c),
            Experiment::NecessityProbe(c) => probe(c),
            Experiment::ExistenceCascade(c) => cascade(c),
            Experiment::Bihari(c) => bihari(c),
            Experiment::PsiTable(c) => psi_table(c),
        }
    }
}

fn simulate(c: &SimulateConfig) -> Result<Outcome, CliError> {
    let cs = build(&c.coeff)?;
    let xi = segment(&c.init)?;
    let cfg = c.solver.config();
    let spec = c.solver.noise_spec(&cs);
    let inject = resolve_events(&cs.shape.marks, &c.inject)?;
    let eq = cs.plain_equation();
    // Configuration errors surface once, before the ensemble.
    let first = realize(&spec, SeedRecord::new(c.seed, 0), inject.as_deref()).map_err(CliError::Usage)?;
    solve_path(&eq, &xi, &first, &cfg).map_err(|e| CliError::Usage(e.to_string()))?;

    let runs = par_paths(c.paths, |p| {
        let noise = realize(&spec, SeedRecord::new(c.seed, p), inject.as_deref())?;
        solve_path(&eq, &xi, &noise, &cfg).map_err(|e| e.to_string())
    });
    let mut table = Table::new(&state_header("path", cs.shape.dim));
    let mut per_path = Vec::with_capacity(runs.len());
    let mut ok = Vec::new();
    for (p, run) in runs.into_iter().enumerate() {
        match run {
            Ok(r) => {
                history_rows(&mut table, &p.to_string(), &r.history);
                per_path.push(json!({
                    "path": p,
                    "final": r.history.last(),
                    "stopped_at": r.stopped_at,
                    "diagnostics": r.diagnostics,
                }));
                ok.push(r);
            }
            Err(e) => per_path.push(json!({ "path": p, "error": e })),
        }
    }
    let stopped = ok.iter().filter(|r| r.stopped_at.is_some()).count();
    let moment = (!ok.is_empty()).then(|| moment_diagnostic(&ok));
    let mut out = Outcome::new(json!({
        "paths": c.paths,
        "failed_paths": c.paths - ok.len(),
        "stopped_paths": stopped,
        "moment": moment,
        "per_path": per_path,
    }));
    out.tables.push(("paths".into(), table.finish()));
    Ok(out)
}

fn check_conditions(c: &CheckConfig) -> Result<Outcome, CliError> {
    let cs = build(&c.coeff)?;
    if c.samples == 0 {
        return Err(CliError::Usage("--samples must be >= 1".into()));
    }
    let fail = |e: sfde_core::OrderError| CliError::Run(e.to_string());
    let drift = check_cond_drift(&cs, &mut OrderSampler::for_shape(&cs, c.seed), c.samples).map_err(fail)?;
    let diffusion = check_cond_diffusion(&cs, &mut OrderSampler::for_shape(&cs, c.seed), c.samples).map_err(fail)?;
    let jump = check_cond_jump(&cs, &mut OrderSampler::for_shape(&cs, c.seed), c.samples).map_err(fail)?;
    let mut all_pass = drift.pass && diffusion.pass && jump.pass;
    let mut result = json!({ "drift": drift, "diffusion": diffusion, "jump": jump });
    if let Some(name) = &c.control {
        let u = ControlFunction::by_name(name).map_err(|e| CliError::Usage(e.to_string()))?;
        let law = SegmentLaw::new(cs.shape.dim, cs.shape.r0);
        let budget = c.budget.unwrap_or(f64::INFINITY);
        let a1 = check_a1(&cs, &u, &mut RandomPairs::new(law, c.seed), c.samples, budget)
            .map_err(|e| CliError::Run(e.to_string()))?;
        let grid: Vec<f64> = (0..=64).map(|k| c.horizon * f64::from(k) / 64.0).collect();
        let a2 = check_a2(&cs, c.horizon, &grid).map_err(|e| CliError::Usage(e.to_string()))?;
        all_pass &= a1.pass;
        result["lipschitz"] = to_value(&a1);
        result["growth"] = to_value(&a2);
    }
    result["all_pass"] = Value::Bool(all_pass);
    let mut out = Outcome::new(result);
    out.check_failed = !all_pass;
    Ok(out)
}

fn verify_order(c: &VerifyConfig) -> Result<Outcome, CliError> {
    let cs = build(&c.coeff)?;
    let (xi, xibar) = (segment(&c.init)?, segment(&c.initbar)?);
    let opts = McOptions {
        n_paths: c.paths,
        master_seed: c.seed,
        inject: resolve_events(&cs.shape.marks, &c.inject)?,
        psi_levels: c.psi_levels.clone(),
    };
    let metric = verify_order_mc(&cs, &xi, &xibar, &c.solver.config(), &opts).map_err(|e| match e {
        sfde_core::OrderError::Precondition(m) => CliError::Usage(m),
        other => CliError::Usage(other.to_string()),
    })?;
    let mut table = Table::new(&["path".to_string(), "hard_sup".to_string()]);
    for (p, v) in metric.per_path.iter().enumerate() {
        table.row([p.to_string(), v.map(|x| x.to_string()).unwrap_or_default()]);
    }
    let mut result = to_value(&metric);
    result.as_object_mut().expect("object").remove("per_path");
    let mut out = Outcome::new(result);
    out.check_failed = metric.hard_sup > 0.0;
    out.tables.push(("per_path".into(), table.finish()));
    Ok(out)
}

fn probe(c: &ProbeConfig) -> Result<Outcome, CliError> {
    let cs = build(&c.coeff)?;
    let (xi, xibar) = (segment(&c.init)?, segment(&c.initbar)?);
    let report = necessity_probe_drift(&cs, c.t0, &xi, &xibar, c.component, c.eps)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = Outcome::new(to_value(&report));
    out.check_failed = report.verdict == ProbeVerdict::Violation;
    Ok(out)
}

fn cascade(c: &CascadeConfig) -> Result<Outcome, CliError> {
    let cs = build(&c.coeff)?;
    let xi = segment(&c.init)?;
    let noise =
        c.solver.noise_spec(&cs).realize(SeedRecord::new(c.seed, 0)).map_err(|e| CliError::Usage(e.to_string()))?;
    let report = approximation_cascade(
        &cs.plain_equation(),
        &xi,
        &noise,
        &c.solver.config(),
        &c.mollifier,
        &c.levels,
        c.truncate,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut table = Table::new(&state_header("level", cs.shape.dim));
    for level in &report.levels {
        history_rows(&mut table, &level.n.to_string(), &level.history);
    }
    let reference = report.levels.last().map(|l| l.n);
    let mut out = Outcome::new(json!({ "gaps": report.gaps, "reference_level": reference }));
    out.tables.push(("paths".into(), table.finish()));
    Ok(out)
}

fn bihari(c: &BihariConfig) -> Result<Outcome, CliError> {
    let u = ControlFunction::by_name(&c.u).map_err(|e| CliError::Usage(e.to_string()))?;
    let bound = bihari_bound(&BihariKernel::new(u), c.a, c.c, c.t).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = Outcome::new(json!({ "bound": bound }));
    out.stdout = format!("{bound}\n");
    Ok(out)
}

fn psi_table(c: &PsiConfig) -> Result<Outcome, CliError> {
    if c.n.contains(&0) {
        return Err(CliError::Usage("--n must be >= 1".into()));
    }
    let header: Vec<String> = ["n", "s", "psi", "psi_prime", "psi_second"].map(String::from).to_vec();
    let mut table = Table::new(&header);
    for &n in &c.n {
        for &s in &c.points {
            table.row([
                n.to_string(),
                s.to_string(),
                psi(n, s).to_string(),
                psi_prime(n, s).to_string(),
                psi_second(n, s).to_string(),
            ]);
        }
    }
    let bytes = table.finish();
    let mut out = Outcome::new(json!({ "rows": c.n.len() * c.points.len() }));
    out.stdout = String::from_utf8(bytes.clone()).expect("utf-8 csv");
    out.tables.push(("table".into(), bytes));
    Ok(out)
}
