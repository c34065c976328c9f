//! Command-line harness: loads or generates a model, runs the requested
//! analysis, and persists reproducible result records.
//!
//! Exit codes: 0 success; 2 invalid input or model; 3 non-convergence where
//! convergence was required; 4 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use camdp::equilibrium::{
    conditions, enumerate_value_matrix, find_nash_equilibria, value_matrix_csv,
};
use camdp::error::CamdpError;
use camdp::eval::{evaluate_exact, Aggregator};
use camdp::fixture;
use camdp::generate::{random_camdp, GeneratorSpec, REWARD_LAW, RNG_NAME, TRANSITION_LAW};
use camdp::model::{FactoredCamdp, JointPolicy};
use camdp::policy::{
    alternate_iterate, epsilon_greedy_iterate, Agent, ImprovementMode, IterationTrace, Mover,
    Outcome, SolverConfig,
};
use camdp::reduce::{constrained_best, preset, PolicyConstraint};

const SWEEP_GAMMAS: [f64; 4] = [0.5, 0.75, 0.95, 0.998];
/// Discount reproducing the case-study golden values (9.99 / 9.81 / 9.05).
const CASE_STUDY_GAMMA: f64 = 0.98;

#[derive(Parser)]
#[command(
    name = "camdp",
    about = "Cooperative adaptive MDP experiment harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run policy iteration (alternating, or exploring when --epsilon > 0)
    Solve(SolveArgs),
    /// Evaluate every joint policy into a value matrix
    Enumerate(AnalyzeArgs),
    /// Check the dominance, cooperation, and global-convergence conditions
    Conditions(AnalyzeArgs),
    /// Tabulate per-state values of two reference policies across discounts
    GammaSweep(AnalyzeArgs),
    /// Generate many models and aggregate their condition checks
    McConditions(McArgs),
    /// Reproduce the built-in case study end to end
    CaseStudy(CaseStudyArgs),
    /// Constrain one agent's policy cells and account the value loss
    Reduce(ReduceArgs),
    /// Sample random models and write them as model files
    Generate(GenerateArgs),
}

#[derive(Args, Clone)]
struct ModelOpts {
    /// Model JSON file
    #[arg(long, value_name = "PATH", conflicts_with_all = ["fixture", "generate"])]
    model: Option<PathBuf>,
    /// Built-in fixture name (paper-case-study)
    #[arg(long, value_name = "NAME", conflicts_with = "generate")]
    fixture: Option<String>,
    /// Generate the model randomly from --seed
    #[arg(long)]
    generate: bool,
}

#[derive(Args, Clone)]
struct SolverOpts {
    /// Discount factor
    #[arg(long)]
    gamma: Option<f64>,
    /// Iterative evaluation tolerance
    #[arg(long, default_value_t = 1e-6)]
    theta: f64,
    /// Exploration rate for the second agent (solve: > 0 switches to the
    /// exploring driver)
    #[arg(long)]
    epsilon: Option<f64>,
    /// Improvement acceptance threshold
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Iteration cap
    #[arg(long = "max-iter", default_value_t = 1000)]
    max_iter: usize,
    /// Initial-state aggregation for scalar policy values
    #[arg(long, value_enum, default_value_t = AggregatorArg::Max)]
    aggregator: AggregatorArg,
    /// Which agent moves first in alternating runs
    #[arg(long = "first-mover", value_enum, default_value_t = FirstMoverArg::Agent0)]
    first_mover: FirstMoverArg,
    /// Improvement information mode
    #[arg(long = "mode", value_enum, default_value_t = ModeArg::FullInfo)]
    mode: ModeArg,
    /// Seed for generation and exploration
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct OutOpts {
    /// Output directory (default: $CAMDP_OUT_DIR, else current directory)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::JsonlLike)]
    format: FormatArg,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelOpts,
    #[command(flatten)]
    solver: SolverOpts,
    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    model: ModelOpts,
    #[command(flatten)]
    solver: SolverOpts,
    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    solver: SolverOpts,
    #[command(flatten)]
    out: OutOpts,
    /// Number of models to generate and check
    #[arg(long, default_value_t = 100)]
    count: usize,
}

#[derive(Args)]
struct CaseStudyArgs {
    #[command(flatten)]
    solver: SolverOpts,
    #[command(flatten)]
    out: OutOpts,
    /// Number of exploration seeds
    #[arg(long, default_value_t = 100)]
    count: usize,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    model: ModelOpts,
    #[command(flatten)]
    solver: SolverOpts,
    #[command(flatten)]
    out: OutOpts,
    /// Named constraint preset
    #[arg(long, value_enum, conflicts_with = "classes")]
    preset: Option<PresetArg>,
    /// Explicit cell partition, classes separated by '|', cells by ','
    /// (e.g. "0,1|2,3")
    #[arg(long, value_name = "PARTITION")]
    classes: Option<String>,
    /// Agent whose policy cells the explicit partition constrains
    #[arg(long, value_enum, default_value_t = FirstMoverArg::Agent0)]
    agent: FirstMoverArg,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    solver: SolverOpts,
    #[command(flatten)]
    out: OutOpts,
    /// Number of models to write
    #[arg(long, default_value_t = 1)]
    count: usize,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum AggregatorArg {
    Max,
    Mean,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum FirstMoverArg {
    Agent0,
    Agent1,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum ModeArg {
    FullInfo,
    PartialInfo,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum FormatArg {
    Csv,
    JsonlLike,
}

// Variant names spell the CLI values s0-only/ss-only/s1-only.
#[allow(clippy::enum_variant_names)]
#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum PresetArg {
    S0Only,
    SsOnly,
    S1Only,
}

impl From<AggregatorArg> for Aggregator {
    fn from(a: AggregatorArg) -> Self {
        match a {
            AggregatorArg::Max => Aggregator::Max,
            AggregatorArg::Mean => Aggregator::Mean,
        }
    }
}

impl From<FirstMoverArg> for Agent {
    fn from(a: FirstMoverArg) -> Self {
        match a {
            FirstMoverArg::Agent0 => Agent::Agent0,
            FirstMoverArg::Agent1 => Agent::Agent1,
        }
    }
}

impl From<ModeArg> for ImprovementMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::FullInfo => ImprovementMode::FullInfo,
            ModeArg::PartialInfo => ImprovementMode::PartialInfo,
        }
    }
}

impl PresetArg {
    fn name(self) -> &'static str {
        match self {
            PresetArg::S0Only => "s0-only",
            PresetArg::SsOnly => "ss-only",
            PresetArg::S1Only => "s1-only",
        }
    }
}

/// The fully resolved run configuration, embedded in every output record.
#[derive(Serialize, Clone)]
struct ResolvedConfig {
    command: &'static str,
    model_source: String,
    gamma: f64,
    theta: f64,
    epsilon: f64,
    eta: f64,
    max_iterations: usize,
    aggregator: String,
    first_mover: String,
    improvement_mode: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transition_law: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reward_law: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rng: Option<&'static str>,
}

fn resolved_config(
    command: &'static str,
    source: &ModelSource,
    cfg: &SolverConfig,
    count: Option<usize>,
) -> ResolvedConfig {
    let generator = matches!(source, ModelSource::Generated(_)) || count.is_some();
    ResolvedConfig {
        command,
        model_source: source.describe(),
        gamma: cfg.gamma,
        theta: cfg.theta,
        epsilon: cfg.epsilon_explore,
        eta: cfg.eta,
        max_iterations: cfg.max_iterations,
        aggregator: cfg.aggregator.to_string(),
        first_mover: cfg.first_mover.to_string(),
        improvement_mode: match cfg.improvement_mode {
            ImprovementMode::FullInfo => "full-info".into(),
            ImprovementMode::PartialInfo => "partial-info".into(),
        },
        seed: cfg.seed,
        count,
        transition_law: generator.then_some(TRANSITION_LAW),
        reward_law: generator.then_some(REWARD_LAW),
        rng: generator.then_some(RNG_NAME),
    }
}

enum ModelSource {
    File(PathBuf),
    Fixture(String),
    Generated(u64),
}

impl ModelSource {
    fn describe(&self) -> String {
        match self {
            ModelSource::File(p) => format!("file:{}", p.display()),
            ModelSource::Fixture(n) => format!("fixture:{n}"),
            ModelSource::Generated(s) => format!("generated:seed={s}"),
        }
    }
}

fn resolve_model(opts: &ModelOpts, seed: u64) -> Result<(FactoredCamdp, ModelSource), CamdpError> {
    match (&opts.model, &opts.fixture, opts.generate) {
        (Some(path), None, false) => {
            Ok((FactoredCamdp::load(path)?, ModelSource::File(path.clone())))
        }
        (None, Some(name), false) => fixture::by_name(name)
            .map(|m| (m, ModelSource::Fixture(name.clone())))
            .ok_or_else(|| {
                CamdpError::Validation(format!(
                    "unknown fixture '{name}' (available: {})",
                    fixture::CASE_STUDY_NAME
                ))
            }),
        (None, None, true) => {
            let spec = GeneratorSpec {
                seed,
                ..GeneratorSpec::default()
            };
            Ok((random_camdp(&spec)?, ModelSource::Generated(seed)))
        }
        _ => Err(CamdpError::Validation(
            "exactly one of --model, --fixture, --generate is required".into(),
        )),
    }
}

fn solver_config(opts: &SolverOpts, default_gamma: f64, default_epsilon: f64) -> SolverConfig {
    SolverConfig {
        gamma: opts.gamma.unwrap_or(default_gamma),
        theta: opts.theta,
        epsilon_explore: opts.epsilon.unwrap_or(default_epsilon),
        eta: opts.eta,
        max_iterations: opts.max_iter,
        aggregator: opts.aggregator.into(),
        first_mover: opts.first_mover.into(),
        improvement_mode: opts.mode.into(),
        seed: opts.seed,
        ..SolverConfig::default()
    }
}

fn out_dir(opts: &OutOpts) -> Result<PathBuf, CamdpError> {
    let dir = opts
        .out
        .clone()
        .or_else(|| std::env::var_os("CAMDP_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_jsonl(path: &Path, records: &[serde_json::Value]) -> Result<(), CamdpError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_string());
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_csv(path: &Path, config: &ResolvedConfig, body: &str) -> Result<(), CamdpError> {
    let header = format!(
        "# config {}\n",
        serde_json::to_string(config).expect("config serializes")
    );
    std::fs::write(path, header + body)?;
    Ok(())
}

fn outcome_str(outcome: &Outcome) -> &'static str {
    match outcome {
        Outcome::Converged => "converged",
        Outcome::Oscillating => "oscillating",
        Outcome::MaxIterations => "max-iterations",
    }
}

fn mover_str(mover: Mover) -> &'static str {
    match mover {
        Mover::Agent0 => "agent0",
        Mover::Agent1 => "agent1",
        Mover::Both => "both",
    }
}

fn digits(policy: &[usize]) -> String {
    policy.iter().map(|a| a.to_string()).collect()
}

fn cell_changes(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// One record per trace step with cumulative per-agent switch counts.
fn step_records(trace: &IterationTrace) -> Vec<serde_json::Value> {
    let mut records = Vec::with_capacity(trace.steps.len());
    let mut cumulative = [0usize; 2];
    let mut prev: Option<&JointPolicy> = None;
    for (index, step) in trace.steps.iter().enumerate() {
        if let Some(p) = prev {
            cumulative[0] += cell_changes(&p.pi0, &step.policy.pi0);
            cumulative[1] += cell_changes(&p.pi1, &step.policy.pi1);
        }
        prev = Some(&step.policy);
        records.push(json!({
            "record": "step",
            "index": index,
            "mover": mover_str(step.mover),
            "pi0": step.policy.pi0,
            "pi1": step.policy.pi1,
            "scalar_value": step.scalar_value,
            "v": step.v,
            "switch_counts": cumulative,
        }));
    }
    records
}

fn step_csv(trace: &IterationTrace) -> String {
    let mut out = String::from("index,mover,pi0,pi1,scalar_value,switches0,switches1\n");
    let mut cumulative = [0usize; 2];
    let mut prev: Option<&JointPolicy> = None;
    for (index, step) in trace.steps.iter().enumerate() {
        if let Some(p) = prev {
            cumulative[0] += cell_changes(&p.pi0, &step.policy.pi0);
            cumulative[1] += cell_changes(&p.pi1, &step.policy.pi1);
        }
        prev = Some(&step.policy);
        out.push_str(&format!(
            "{index},{},{},{},{:.12},{},{}\n",
            mover_str(step.mover),
            digits(&step.policy.pi0),
            digits(&step.policy.pi1),
            step.scalar_value,
            cumulative[0],
            cumulative[1],
        ));
    }
    out
}

fn run_solve(args: &SolveArgs) -> Result<u8, CamdpError> {
    let cfg = solver_config(&args.solver, 0.9, 0.0);
    let (model, source) = resolve_model(&args.model, cfg.seed)?;
    let config = resolved_config("solve", &source, &cfg, None);
    let initial = JointPolicy::zeros(&model.dims);
    let exploring = cfg.epsilon_explore > 0.0;
    let result = if exploring {
        epsilon_greedy_iterate(&model, &initial, &cfg)
    } else {
        alternate_iterate(&model, &initial, &cfg)
    };
    let trace = match result {
        Ok(trace) => trace,
        // An improvement cycle inside one agent's best response aborts the
        // run before a trace exists; persist the visited policies instead.
        Err(CamdpError::NonConvergence {
            iterations,
            partial,
        }) => {
            let dir = out_dir(&args.out)?;
            let record = json!({
                "record": "run",
                "config": config,
                "driver": if exploring { "exploring" } else { "alternating" },
                "outcome": "non-convergence",
                "iterations": iterations,
                "visited": partial.iter().map(|(pi0, pi1)| json!({
                    "pi0": pi0, "pi1": pi1,
                })).collect::<Vec<_>>(),
            });
            let path = match args.out.format {
                FormatArg::JsonlLike => {
                    let path = dir.join("solve.jsonl");
                    write_jsonl(&path, &[record])?;
                    path
                }
                FormatArg::Csv => {
                    let mut body = String::from("# outcome non-convergence\npi0,pi1\n");
                    for (pi0, pi1) in &partial {
                        body.push_str(&format!("{},{}\n", digits(pi0), digits(pi1)));
                    }
                    let path = dir.join("solve.csv");
                    write_csv(&path, &config, &body)?;
                    path
                }
            };
            println!(
                "solve: outcome non-convergence after {iterations} improvement steps; wrote {}",
                path.display()
            );
            return Ok(3);
        }
        Err(e) => return Err(e),
    };
    let dir = out_dir(&args.out)?;
    let terminal = trace.final_policy().expect("trace has steps").clone();
    let scalar = trace.final_scalar().expect("trace has steps");
    let summary = json!({
        "record": "run",
        "config": config,
        "driver": if exploring { "exploring" } else { "alternating" },
        "outcome": outcome_str(&trace.outcome),
        "terminal_pi0": terminal.pi0,
        "terminal_pi1": terminal.pi1,
        "scalar_value": scalar,
        "switch_counts": trace.switch_counts,
        "cycle": trace.cycle.as_ref().map(|c| {
            c.iter().map(|p| p.to_string()).collect::<Vec<_>>()
        }),
    });
    let path = match args.out.format {
        FormatArg::JsonlLike => {
            let mut records = vec![summary];
            records.extend(step_records(&trace));
            let path = dir.join("solve.jsonl");
            write_jsonl(&path, &records)?;
            path
        }
        FormatArg::Csv => {
            let body = format!(
                "# outcome {}\n{}",
                outcome_str(&trace.outcome),
                step_csv(&trace)
            );
            let path = dir.join("solve.csv");
            write_csv(&path, &config, &body)?;
            path
        }
    };
    println!(
        "solve: outcome {} at {terminal} value {scalar:.6} after {} steps; wrote {}",
        outcome_str(&trace.outcome),
        trace.steps.len(),
        path.display()
    );
    if trace.outcome == Outcome::Converged || exploring {
        Ok(0)
    } else {
        Ok(3)
    }
}

fn run_enumerate(args: &AnalyzeArgs) -> Result<u8, CamdpError> {
    let cfg = solver_config(&args.solver, 0.9, 0.0);
    let (model, source) = resolve_model(&args.model, cfg.seed)?;
    let config = resolved_config("enumerate", &source, &cfg, None);
    let vm = enumerate_value_matrix(&model, &cfg)?;
    let dir = out_dir(&args.out)?;
    let path = match args.out.format {
        FormatArg::Csv => {
            let path = dir.join("value-matrix.csv");
            write_csv(&path, &config, &value_matrix_csv(&vm))?;
            path
        }
        FormatArg::JsonlLike => {
            let record = json!({
                "record": "value-matrix",
                "config": config,
                "min_gap": vm.min_gap,
                "row_policies": vm.row_policies,
                "col_policies": vm.col_policies,
                "values": vm.values,
            });
            let path = dir.join("value-matrix.jsonl");
            write_jsonl(&path, &[record])?;
            path
        }
    };
    println!(
        "enumerate: {}x{} policies, max value {:.6}, min gap {:.3e}; wrote {}",
        vm.n_rows(),
        vm.n_cols(),
        vm.max_value(),
        vm.min_gap,
        path.display()
    );
    Ok(0)
}

fn run_conditions(args: &AnalyzeArgs) -> Result<u8, CamdpError> {
    let cfg = solver_config(&args.solver, 0.9, 0.0);
    let (model, source) = resolve_model(&args.model, cfg.seed)?;
    let config = resolved_config("conditions", &source, &cfg, None);
    let report = conditions(&model, &cfg)?;
    let dir = out_dir(&args.out)?;
    let path = match args.out.format {
        FormatArg::JsonlLike => {
            let record = json!({
                "record": "conditions",
                "config": config,
                "report": report,
            });
            let path = dir.join("conditions.jsonl");
            write_jsonl(&path, &[record])?;
            path
        }
        FormatArg::Csv => {
            let body = format!(
                "cond1,cond2,cond3,n_dc,n_dr,ne_bound,ne_count,min_gap\n{},{},{},{},{},{},{},{:.12e}\n",
                report.cond1,
                report.cond2,
                report.cond3,
                report.n_dc,
                report.n_dr,
                report.ne_bound,
                report.nash_equilibria.len(),
                report.min_gap
            );
            let path = dir.join("conditions.csv");
            write_csv(&path, &config, &body)?;
            path
        }
    };
    println!(
        "conditions: cond1={} cond2={} cond3={}; {} equilibria (bound {}); wrote {}",
        report.cond1,
        report.cond2,
        report.cond3,
        report.nash_equilibria.len(),
        report.ne_bound,
        path.display()
    );
    Ok(0)
}

fn run_gamma_sweep(args: &AnalyzeArgs) -> Result<u8, CamdpError> {
    let cfg = solver_config(&args.solver, 0.9, 0.0);
    let (model, source) = resolve_model(&args.model, cfg.seed)?;
    let config = resolved_config("gamma-sweep", &source, &cfg, None);
    let zeros = JointPolicy::zeros(&model.dims);
    let ones = JointPolicy::new(vec![1; model.dims.cells0()], vec![1; model.dims.cells1()]);
    let mut columns: Vec<(String, Vec<f64>, f64)> = Vec::new();
    for (label, policy) in [("zeros", &zeros), ("ones", &ones)] {
        let dynamics = model.augment(policy)?;
        for &gamma in &SWEEP_GAMMAS {
            let result = evaluate_exact(&dynamics, gamma)?;
            let spread = (result.v.max() - result.v.min()) / result.v.mean();
            let values = result.v.as_slice().to_vec();
            columns.push((format!("{label}@{gamma}"), values, spread));
        }
    }
    let dir = out_dir(&args.out)?;
    let n_states = model.n_states();
    let path = match args.out.format {
        FormatArg::Csv => {
            let mut body = String::from("state");
            for (name, _, _) in &columns {
                body.push(',');
                body.push_str(name);
            }
            body.push('\n');
            for i in 0..n_states {
                body.push_str(&i.to_string());
                for (_, values, _) in &columns {
                    body.push_str(&format!(",{:.12}", values[i]));
                }
                body.push('\n');
            }
            body.push_str("relative_spread");
            for (_, _, spread) in &columns {
                body.push_str(&format!(",{spread:.12}"));
            }
            body.push('\n');
            let path = dir.join("gamma-sweep.csv");
            write_csv(&path, &config, &body)?;
            path
        }
        FormatArg::JsonlLike => {
            let records: Vec<serde_json::Value> = columns
                .iter()
                .map(|(name, values, spread)| {
                    json!({
                        "record": "gamma-sweep",
                        "config": config,
                        "column": name,
                        "v": values,
                        "relative_spread": spread,
                    })
                })
                .collect();
            let path = dir.join("gamma-sweep.jsonl");
            write_jsonl(&path, &records)?;
            path
        }
    };
    let final_spreads: Vec<String> = columns
        .iter()
        .filter(|(name, _, _)| name.ends_with("0.998"))
        .map(|(name, _, s)| format!("{name}: {:.4}%", s * 100.0))
        .collect();
    println!(
        "gamma-sweep: relative spread at 0.998 -> {}; wrote {}",
        final_spreads.join(", "),
        path.display()
    );
    Ok(0)
}

fn run_mc_conditions(args: &McArgs) -> Result<u8, CamdpError> {
    if args.count == 0 {
        return Err(CamdpError::Validation("--count must be at least 1".into()));
    }
    let cfg = solver_config(&args.solver, 0.9, 0.0);
    let source = ModelSource::Generated(cfg.seed);
    let config = resolved_config("mc-conditions", &source, &cfg, Some(args.count));
    let mut records = Vec::new();
    let mut csv_rows = String::from("seed,cond1,cond2,cond3,n_dc,n_dr,ne_bound,ne_count,min_gap\n");
    let mut counts = [0usize; 3];
    let mut both = 0usize;
    let mut violations = 0usize;
    let mut generated = 0usize;
    for index in 0..args.count {
        let seed = cfg.seed + index as u64;
        let spec = GeneratorSpec {
            seed,
            ..GeneratorSpec::default()
        };
        let model = match random_camdp(&spec) {
            Ok(m) => m,
            Err(e) => {
                records.push(json!({
                    "record": "generation-failure",
                    "seed": seed,
                    "error": e.to_string(),
                }));
                csv_rows.push_str(&format!("{seed},error,,,,,,,\n"));
                continue;
            }
        };
        generated += 1;
        let report = conditions(&model, &cfg)?;
        counts[0] += report.cond1 as usize;
        counts[1] += report.cond2 as usize;
        counts[2] += report.cond3 as usize;
        both += (report.cond1 && report.cond2) as usize;
        violations += (report.cond1 && report.cond2 && !report.cond3) as usize;
        records.push(json!({
            "record": "model-conditions",
            "seed": seed,
            "report": report,
        }));
        csv_rows.push_str(&format!(
            "{seed},{},{},{},{},{},{},{},{:.12e}\n",
            report.cond1,
            report.cond2,
            report.cond3,
            report.n_dc,
            report.n_dr,
            report.ne_bound,
            report.nash_equilibria.len(),
            report.min_gap
        ));
    }
    let summary = json!({
        "record": "summary",
        "config": config,
        "requested": args.count,
        "generated": generated,
        "cond1": counts[0],
        "cond2": counts[1],
        "cond3": counts[2],
        "cond1_and_cond2": both,
        "implication_violations": violations,
    });
    let dir = out_dir(&args.out)?;
    let path = match args.out.format {
        FormatArg::JsonlLike => {
            let mut all = records;
            all.push(summary);
            let path = dir.join("mc-conditions.jsonl");
            write_jsonl(&path, &all)?;
            path
        }
        FormatArg::Csv => {
            let path = dir.join("mc-conditions.csv");
            write_csv(&path, &config, &csv_rows)?;
            let summary_body = format!(
                "requested,generated,cond1,cond2,cond3,cond1_and_cond2,implication_violations\n\
                 {},{generated},{},{},{},{both},{violations}\n",
                args.count, counts[0], counts[1], counts[2]
            );
            write_csv(
                &dir.join("mc-conditions-summary.csv"),
                &config,
                &summary_body,
            )?;
            path
        }
    };
    println!(
        "mc-conditions: {generated}/{} generated; cond1={} cond2={} cond3={} \
         both={both} implication violations={violations}; wrote {}",
        args.count,
        counts[0],
        counts[1],
        counts[2],
        path.display()
    );
    Ok(0)
}

fn run_case_study(args: &CaseStudyArgs) -> Result<u8, CamdpError> {
    if args.count == 0 {
        return Err(CamdpError::Validation("--count must be at least 1".into()));
    }
    let cfg = solver_config(&args.solver, CASE_STUDY_GAMMA, 0.1);
    let model = fixture::paper_case_study();
    let source = ModelSource::Fixture(fixture::CASE_STUDY_NAME.into());
    let config = resolved_config("case-study", &source, &cfg, Some(args.count));

    let vm = enumerate_value_matrix(&model, &cfg)?;
    let equilibria = find_nash_equilibria(&vm);
    let best = &equilibria[0];
    let global = JointPolicy::new(best.pi0.clone(), best.pi1.clone());

    let initial = JointPolicy::new(vec![0, 0, 0, 0], vec![1, 0, 0, 0]);
    let deterministic_cfg = SolverConfig {
        epsilon_explore: 0.0,
        ..cfg
    };
    let trace = alternate_iterate(&model, &initial, &deterministic_cfg)?;
    let terminal = trace.final_policy().expect("trace has steps").clone();
    let terminal_value = trace.final_scalar().expect("trace has steps");

    let mut exploration_records = Vec::new();
    let mut reached = 0usize;
    for offset in 0..args.count {
        let seed = cfg.seed + offset as u64;
        let run_cfg = SolverConfig { seed, ..cfg };
        let run = epsilon_greedy_iterate(&model, &initial, &run_cfg)?;
        let first_visit = run.steps.iter().position(|s| s.policy == global);
        reached += first_visit.is_some() as usize;
        exploration_records.push(json!({
            "record": "exploration-run",
            "seed": seed,
            "reached_maximum": first_visit.is_some(),
            "first_visit_step": first_visit,
            "outcome": outcome_str(&run.outcome),
        }));
    }
    let fraction = reached as f64 / args.count as f64;

    let dir = out_dir(&args.out)?;
    let matrix_summary = json!({
        "record": "value-matrix-summary",
        "config": config,
        "max_value": vm.max_value(),
        "min_gap": vm.min_gap,
        "equilibria": equilibria.iter().map(|c| json!({
            "pi0": c.pi0, "pi1": c.pi1, "value": c.value,
        })).collect::<Vec<_>>(),
    });
    let alternating_summary = json!({
        "record": "alternating-run",
        "config": config,
        "initial_pi0": initial.pi0,
        "initial_pi1": initial.pi1,
        "outcome": outcome_str(&trace.outcome),
        "terminal_pi0": terminal.pi0,
        "terminal_pi1": terminal.pi1,
        "scalar_value": terminal_value,
        "switch_counts": trace.switch_counts,
    });
    let exploration_summary = json!({
        "record": "exploration-summary",
        "config": config,
        "seeds": args.count,
        "reached_maximum": reached,
        "fraction": fraction,
    });
    let path = match args.out.format {
        FormatArg::JsonlLike => {
            let mut records = vec![matrix_summary, alternating_summary];
            records.extend(step_records(&trace));
            records.extend(exploration_records);
            records.push(exploration_summary);
            let path = dir.join("case-study.jsonl");
            write_jsonl(&path, &records)?;
            path
        }
        FormatArg::Csv => {
            write_csv(
                &dir.join("case-study-matrix.csv"),
                &config,
                &value_matrix_csv(&vm),
            )?;
            write_csv(
                &dir.join("case-study-alternating.csv"),
                &config,
                &format!(
                    "# outcome {}\n{}",
                    outcome_str(&trace.outcome),
                    step_csv(&trace)
                ),
            )?;
            let mut expl = String::from("seed,reached_maximum,first_visit_step\n");
            for r in &exploration_records {
                expl.push_str(&format!(
                    "{},{},{}\n",
                    r["seed"],
                    r["reached_maximum"],
                    r["first_visit_step"]
                        .as_u64()
                        .map_or(String::new(), |v| v.to_string()),
                ));
            }
            let path = dir.join("case-study-exploration.csv");
            write_csv(&path, &config, &expl)?;
            path
        }
    };
    println!(
        "case-study: matrix max {:.6}; alternating terminal {terminal} value {:.6} ({}); \
         exploration epsilon={} reached the maximum in {reached}/{} seeds; wrote {}",
        vm.max_value(),
        terminal_value,
        outcome_str(&trace.outcome),
        cfg.epsilon_explore,
        args.count,
        path.display()
    );
    if trace.outcome == Outcome::Converged {
        Ok(0)
    } else {
        Ok(3)
    }
}

fn parse_partition(text: &str) -> Result<Vec<Vec<usize>>, CamdpError> {
    text.split('|')
        .map(|class| {
            class
                .split(',')
                .map(|cell| {
                    cell.trim().parse::<usize>().map_err(|_| {
                        CamdpError::Validation(format!(
                            "invalid cell '{cell}' in partition '{text}'"
                        ))
                    })
                })
                .collect()
        })
        .collect()
}

fn run_reduce(args: &ReduceArgs) -> Result<u8, CamdpError> {
    let cfg = solver_config(&args.solver, 0.9, 0.0);
    let (model, source) = resolve_model(&args.model, cfg.seed)?;
    let config = resolved_config("reduce", &source, &cfg, None);
    let constraint = match (&args.preset, &args.classes) {
        (Some(p), None) => preset(p.name(), &model.dims)?,
        (None, Some(text)) => PolicyConstraint::new(
            args.agent.into(),
            parse_partition(text)?,
            format!("custom partition {text}"),
        ),
        _ => {
            return Err(CamdpError::Validation(
                "exactly one of --preset, --classes is required".into(),
            ))
        }
    };
    let report = constrained_best(&model, &constraint, &cfg)?;
    let dir = out_dir(&args.out)?;
    let path = match args.out.format {
        FormatArg::JsonlLike => {
            let record = json!({
                "record": "reduction",
                "config": config,
                "report": report,
            });
            let path = dir.join("reduction.jsonl");
            write_jsonl(&path, &[record])?;
            path
        }
        FormatArg::Csv => {
            let body = format!(
                "label,agent,original_count,reduced_count,best_original,best_reduced,delta_v,spread\n\
                 {},{},{},{},{:.12},{:.12},{:.12},{:.12}\n",
                report.label,
                report.agent,
                report.original_count,
                report.reduced_count,
                report.best_original,
                report.best_reduced,
                report.delta_v,
                report.spread
            );
            let path = dir.join("reduction.csv");
            write_csv(&path, &config, &body)?;
            path
        }
    };
    println!(
        "reduce: '{}' {}→{} policies, best {:.6}→{:.6} (loss {:.6}, spread {:.6}); wrote {}",
        report.label,
        report.original_count,
        report.reduced_count,
        report.best_original,
        report.best_reduced,
        report.delta_v,
        report.spread,
        path.display()
    );
    Ok(0)
}

fn run_generate(args: &GenerateArgs) -> Result<u8, CamdpError> {
    if args.count == 0 {
        return Err(CamdpError::Validation("--count must be at least 1".into()));
    }
    let cfg = solver_config(&args.solver, 0.9, 0.0);
    let source = ModelSource::Generated(cfg.seed);
    let config = resolved_config("generate", &source, &cfg, Some(args.count));
    let dir = out_dir(&args.out)?;
    let mut records = Vec::new();
    let mut csv_rows = String::from("seed,file\n");
    for index in 0..args.count {
        let seed = cfg.seed + index as u64;
        let spec = GeneratorSpec {
            seed,
            ..GeneratorSpec::default()
        };
        let model = random_camdp(&spec)?;
        let name = format!("model-{seed}.json");
        model.save(&dir.join(&name))?;
        records.push(json!({
            "record": "generated-model",
            "config": config,
            "seed": seed,
            "file": name,
            "dims": model.dims,
            "reward_min": spec.reward_min,
        }));
        csv_rows.push_str(&format!("{seed},{name}\n"));
    }
    let path = match args.out.format {
        FormatArg::JsonlLike => {
            let path = dir.join("generate.jsonl");
            write_jsonl(&path, &records)?;
            path
        }
        FormatArg::Csv => {
            let path = dir.join("generate.csv");
            write_csv(&path, &config, &csv_rows)?;
            path
        }
    };
    println!(
        "generate: wrote {} model file(s) and manifest {}",
        args.count,
        path.display()
    );
    Ok(0)
}

fn exit_code_for(error: &CamdpError) -> u8 {
    match error {
        CamdpError::Io(_) => 4,
        CamdpError::NonConvergence { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Enumerate(args) => run_enumerate(args),
        Command::Conditions(args) => run_conditions(args),
        Command::GammaSweep(args) => run_gamma_sweep(args),
        Command::McConditions(args) => run_mc_conditions(args),
        Command::CaseStudy(args) => run_case_study(args),
        Command::Reduce(args) => run_reduce(args),
        Command::Generate(args) => run_generate(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
