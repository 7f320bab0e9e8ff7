//! Experiment runner for `sfde-core`.
//!
//! Every run writes `<out>/<command>.json`, a summary that embeds the full resolved
//! configuration, and zero or more `<out>/<command>_<table>.csv` files. `sfde replay`
//! repeats a run from its summary.
//!
//! Exit codes: 0 success, 1 failed check (with `--expect-pass`, and always for
//! `acceptance`), 2 usage or run error.

pub mod acceptance;
pub mod experiment;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use sfde_core::coeff::{BuiltinParams, CoefficientConfig};
use sfde_core::existence::MollifierLaw;
use sfde_core::{CoefficientSet, Segment, SegmentLiteral};

use experiment::{
    BihariConfig, CascadeConfig, CheckConfig, Experiment, InjectedEvent, Outcome, ProbeConfig, PsiConfig,
    SimulateConfig, SolverSettings, VerifyConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("run failed: {0}")]
    Run(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "sfde",
    version,
    about = "Simulate and check order preservation of stochastic functional equations with jumps"
)]
struct Cli {
    /// Directory for JSON summaries and CSV tables.
    #[arg(long, global = true, env = "SFDE_OUT_DIR", default_value = "sfde-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CoeffArgs {
    /// Coefficient configuration (JSON).
    #[arg(long)]
    coeff: Option<PathBuf>,
    /// Catalogue coefficient pair, instead of --coeff.
    #[arg(long)]
    builtin: Option<String>,
    /// Builtin parameter `key=value`; `d`, `m` and `r0` set dimensions and delay.
    #[arg(long = "param")]
    params: Vec<String>,
}

#[derive(Debug, Args)]
struct InitArgs {
    /// Initial segment (JSON literal).
    #[arg(long)]
    init: Option<PathBuf>,
    /// Constant initial segment with these component values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "init")]
    init_const: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct InitBarArgs {
    /// Initial segment of the barred equation (JSON literal).
    #[arg(long)]
    initbar: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "initbar")]
    initbar_const: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t0: f64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Stop a path once the Euclidean norm of the state reaches this radius.
    #[arg(long)]
    stop_radius: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the plain equation on an ensemble of paths.
    Simulate {
        #[command(flatten)]
        coeff: CoeffArgs,
        #[command(flatten)]
        init: InitArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        paths: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// JSON list of `{"t": .., "mark": ..}` replacing every path's arrivals.
        #[arg(long)]
        inject: Option<PathBuf>,
    },
    /// Sample the drift, diffusion and jump order conditions.
    CheckConditions {
        #[command(flatten)]
        coeff: CoeffArgs,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also sample the Lipschitz-type and growth assumptions with this control (`one` or `log`).
        #[arg(long)]
        control: Option<String>,
        /// Bound on the sampled Lipschitz ratio.
        #[arg(long, requires = "control")]
        budget: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long)]
        expect_pass: bool,
    },
    /// Monte-Carlo order metric of the coupled pair.
    VerifyOrder {
        #[command(flatten)]
        coeff: CoeffArgs,
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        initbar: InitBarArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        inject: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [1u32, 4, 16, 64, 256, 1024])]
        psi_levels: Vec<u32>,
        #[arg(long)]
        expect_pass: bool,
    },
    /// Compare the generators on a bump test function at touching initial data.
    NecessityProbe {
        #[command(flatten)]
        coeff: CoeffArgs,
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        initbar: InitBarArgs,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        t0: f64,
        /// One-based state component.
        #[arg(long, default_value_t = 1)]
        component: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        expect_pass: bool,
    },
    /// Solve the mollified equations at increasing levels on shared noise.
    ExistenceCascade {
        #[command(flatten)]
        coeff: CoeffArgs,
        /// Defaults to the zero segment.
        #[command(flatten)]
        init: InitArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 4, 8, 16])]
        levels: Vec<u32>,
        /// Mollifier sample count.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Seed of the mollifier samples; defaults to --seed.
        #[arg(long)]
        law_seed: Option<u64>,
        #[arg(long, default_value_t = 16)]
        intervals: usize,
        /// Truncate the coefficients at each level before mollifying.
        #[arg(long)]
        truncate: bool,
    },
    /// Bihari bound `G^-1(G(a) + c t)`.
    Bihari {
        #[arg(long, default_value = "one")]
        u: String,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        t: f64,
    },
    /// Tabulate psi_n and its derivatives.
    PsiTable {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u32>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        points: Vec<f64>,
    },
    /// Run the acceptance suite.
    Acceptance {
        /// Criterion numbers to run; all when absent.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Repeat a run from its JSON summary.
    Replay { summary: PathBuf },
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sfde: {e}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let out = cli.out;
    let (exp, expect_pass) = match cli.command {
        Command::Acceptance { only } => return run_acceptance(&out, &only),
        Command::Replay { summary } => (load_summary(&summary)?, false),
        cmd => resolve(cmd)?,
    };
    let outcome = exp.execute()?;
    let path = write_outputs(&out, &exp, &outcome)?;
    print!("{}", outcome.stdout);
    eprintln!("wrote {}", path.display());
    Ok(if expect_pass && outcome.check_failed { 1 } else { 0 })
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn coefficients(args: &CoeffArgs) -> Result<(CoefficientConfig, CoefficientSet), CliError> {
    let config = match (&args.coeff, &args.builtin) {
        (Some(path), None) => {
            if !args.params.is_empty() {
                return Err(CliError::Usage("--param applies to --builtin only".into()));
            }
            CoefficientConfig::from_json(&read(path)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => {
            let mut params = BuiltinParams::default();
            for kv in &args.params {
                let (key, value) = kv
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("--param expects key=value, got `{kv}`")))?;
                let bad = |_| CliError::Usage(format!("bad value in --param {kv}"));
                match key {
                    "d" => params.d = Some(value.parse().map_err(|_| bad(()))?),
                    "m" => params.m = Some(value.parse().map_err(|_| bad(()))?),
                    "r0" => params.r0 = Some(value.parse().map_err(|_| bad(()))?),
                    _ => {
                        params.values.insert(key.to_string(), value.parse().map_err(|_| bad(()))?);
                    }
                }
            }
            CoefficientConfig { builtin: Some(name.clone()), params: Some(params), ..Default::default() }
        }
        _ => return Err(CliError::Usage("give exactly one of --coeff and --builtin".into())),
    };
    let cs = config.build().map_err(|e| CliError::Usage(format!("coefficients: {e}")))?;
    Ok((config, cs))
}

fn segment_from(
    file: &Option<PathBuf>,
    constant: &Option<Vec<f64>>,
    cs: &CoefficientSet,
    flag: &str,
) -> Result<Option<SegmentLiteral>, CliError> {
    let lit = match (file, constant) {
        (Some(path), _) => {
            let lit: SegmentLiteral =
                serde_json::from_str(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            Segment::try_from(lit.clone()).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            lit
        }
        (None, Some(v)) => Segment::constant(cs.shape.r0, v).to_literal(),
        (None, None) => return Ok(None),
    };
    if lit.d != cs.shape.dim || lit.r0 != cs.shape.r0 {
        return Err(CliError::Usage(format!(
            "{flag}: segment has d = {}, r0 = {}; coefficients need d = {}, r0 = {}",
            lit.d, lit.r0, cs.shape.dim, cs.shape.r0
        )));
    }
    Ok(Some(lit))
}

fn required(lit: Option<SegmentLiteral>, flag: &str) -> Result<SegmentLiteral, CliError> {
    lit.ok_or_else(|| CliError::Usage(format!("missing --{flag} or --{flag}-const")))
}

fn solver(args: &SolverArgs) -> SolverSettings {
    SolverSettings { step: args.step, t0: args.t0, horizon: args.horizon, stop_radius: args.stop_radius }
}

fn events(path: &Option<PathBuf>) -> Result<Vec<InjectedEvent>, CliError> {
    match path {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
        None => Ok(Vec::new()),
    }
}

fn resolve(cmd: Command) -> Result<(Experiment, bool), CliError> {
    Ok(match cmd {
        Command::Simulate { coeff, init, seed, paths, solver: s, inject } => {
            let (config, cs) = coefficients(&coeff)?;
            let init = required(segment_from(&init.init, &init.init_const, &cs, "init")?, "init")?;
            let exp = SimulateConfig { coeff: config, init, seed, paths, solver: solver(&s), inject: events(&inject)? };
            (Experiment::Simulate(exp), false)
        }
        Command::CheckConditions { coeff, samples, seed, control, budget, horizon, expect_pass } => {
            let (config, _) = coefficients(&coeff)?;
            (
                Experiment::CheckConditions(CheckConfig { coeff: config, samples, seed, control, budget, horizon }),
                expect_pass,
            )
        }
        Command::VerifyOrder { coeff, init, initbar, seed, paths, solver: s, inject, psi_levels, expect_pass } => {
            let (config, cs) = coefficients(&coeff)?;
            let init = required(segment_from(&init.init, &init.init_const, &cs, "init")?, "init")?;
            let initbar = required(segment_from(&initbar.initbar, &initbar.initbar_const, &cs, "initbar")?, "initbar")?;
            let exp = VerifyConfig {
                coeff: config,
                init,
                initbar,
                seed,
                paths,
                solver: solver(&s),
                inject: events(&inject)?,
                psi_levels,
            };
            (Experiment::VerifyOrder(exp), expect_pass)
        }
        Command::NecessityProbe { coeff, init, initbar, t0, component, eps, expect_pass } => {
            let (config, cs) = coefficients(&coeff)?;
            let init = required(segment_from(&init.init, &init.init_const, &cs, "init")?, "init")?;
            let initbar = required(segment_from(&initbar.initbar, &initbar.initbar_const, &cs, "initbar")?, "initbar")?;
            if component == 0 || component > cs.shape.dim {
                return Err(CliError::Usage(format!("--component must be in 1..={}", cs.shape.dim)));
            }
            let exp = ProbeConfig { coeff: config, init, initbar, t0, component: component - 1, eps };
            (Experiment::NecessityProbe(exp), expect_pass)
        }
        Command::ExistenceCascade { coeff, init, seed, solver: s, levels, samples, law_seed, intervals, truncate } => {
            let (config, cs) = coefficients(&coeff)?;
            let init = segment_from(&init.init, &init.init_const, &cs, "init")?
                .unwrap_or_else(|| Segment::zero(cs.shape.dim, cs.shape.r0).to_literal());
            let mollifier =
                MollifierLaw { intervals, ..MollifierLaw::new(cs.shape.r0, samples, law_seed.unwrap_or(seed)) };
            let exp = CascadeConfig { coeff: config, init, seed, solver: solver(&s), levels, mollifier, truncate };
            (Experiment::ExistenceCascade(exp), false)
        }
        Command::Bihari { u, a, c, t } => (Experiment::Bihari(BihariConfig { u, a, c, t }), false),
        Command::PsiTable { n, points } => (Experiment::PsiTable(PsiConfig { n, points }), false),
        Command::Acceptance { .. } | Command::Replay { .. } => unreachable!("handled by dispatch"),
    })
}

fn load_summary(path: &Path) -> Result<Experiment, CliError> {
    let value: Value =
        serde_json::from_str(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let embedded = json!({ "command": value["command"], "config": value["config"] });
    serde_json::from_value(embedded)
        .map_err(|e| CliError::Usage(format!("{} is not a replayable summary: {e}", path.display())))
}

/// JSON summary of a run; contains no timestamps, so equal runs give equal bytes.
pub fn summary_json(exp: &Experiment, outcome: &Outcome) -> String {
    let mut summary = serde_json::to_value(exp).expect("serializable config");
    let artifacts: Vec<String> = outcome.tables.iter().map(|(name, _)| format!("{}_{name}.csv", exp.name())).collect();
    summary["result"] = outcome.result.clone();
    summary["artifacts"] = json!(artifacts);
    summary["tool"] = json!({ "name": "sfde", "version": env!("CARGO_PKG_VERSION") });
    let mut text = serde_json::to_string_pretty(&summary).expect("serializable summary");
    text.push('\n');
    text
}

fn write_outputs(dir: &Path, exp: &Experiment, outcome: &Outcome) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in &outcome.tables {
        fs::write(dir.join(format!("{}_{name}.csv", exp.name())), bytes)?;
    }
    let path = dir.join(format!("{}.json", exp.name()));
    fs::write(&path, summary_json(exp, outcome))?;
    Ok(path)
}

fn run_acceptance(dir: &Path, only: &[u8]) -> Result<i32, CliError> {
    let ids: Vec<u8> = if only.is_empty() { (1..=8).collect() } else { only.to_vec() };
    if let Some(bad) = ids.iter().find(|&&i| !(1..=8).contains(&i)) {
        return Err(CliError::Usage(format!("no acceptance criterion {bad}")));
    }
    let mut results = Vec::new();
    for id in ids {
        let r = acceptance::criterion(id);
        println!("{r}");
        results.push(r);
    }
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(&results).expect("serializable results");
    text.push('\n');
    fs::write(dir.join("acceptance.json"), text)?;
    Ok(if results.iter().all(|r| r.pass) { 0 } else { 1 })
}
