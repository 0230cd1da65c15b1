//! Command-line planner and simulator for deceptive policies.
//!
//! Three subcommands over JSON scenario configs:
//!
//! - `plan`: solve for a policy (optimal, robust-dynamics, or
//!   robust-rewards) and write it as a JSON policy document.
//! - `simulate`: Monte-Carlo runs of a planner kind or a saved policy;
//!   writes a CSV of running-average reward statistics and optional
//!   per-run trace files.
//! - `sweep`: learning-parameter mismatch table for the cops scenario;
//!   writes a CSV of `(p_true, delta)` rows.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 infeasible
//! constraints, 3 numeric validation failure. `DECEPTIVE_PLANNER_THREADS`
//! caps internal parallelism.

mod policy_doc;

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use deceptive_planning::belief::{
    apply_forbidden_agent_states, apply_forbidden_states, ForbiddenError, ProductError,
};
use deceptive_planning::mdp::{MdpError, Policy, StateId, ValueTable};
use deceptive_planning::planners::{
    plan_optimal_deception, plan_robust_dynamics, plan_robust_rewards, KernelFamily, NoObsMode,
    RewardFamily, RobustError,
};
use deceptive_planning::scenarios::{
    build_cops_scenario, GridCell, ScenarioBundle, ScenarioConfig, ScenarioError,
};
use deceptive_planning::sim::{
    average_reward_curve, mismatch_sweep, monte_carlo, simulate_run, ControllerSpec, RunStats,
    SimError, SweepError,
};
use policy_doc::PolicyDoc;

#[derive(Parser)]
#[command(
    name = "deceptive-planner",
    version,
    about = "Plan and simulate deceptive policies on gridworld scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write the policy document.
    Plan(PlanArgs),
    /// Monte-Carlo simulation; writes running-average reward statistics.
    Simulate(SimulateArgs),
    /// Learning-parameter mismatch sweep (cops scenario).
    Sweep(SweepArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PlannerKind {
    Optimal,
    RobustDynamics,
    RobustRewards,
    NoObs,
    Nominal,
}

impl PlannerKind {
    fn label(self) -> &'static str {
        match self {
            PlannerKind::Optimal => "optimal",
            PlannerKind::RobustDynamics => "robust-dynamics",
            PlannerKind::RobustRewards => "robust-rewards",
            PlannerKind::NoObs => "no-obs",
            PlannerKind::Nominal => "nominal",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum NoObsModeArg {
    Randomized,
    WeightedArgmax,
}

impl From<NoObsModeArg> for NoObsMode {
    fn from(mode: NoObsModeArg) -> Self {
        match mode {
            NoObsModeArg::Randomized => NoObsMode::Randomized,
            NoObsModeArg::WeightedArgmax => NoObsMode::WeightedArgmax,
        }
    }
}

#[derive(Args)]
struct PlannerOpts {
    /// Forbidden grid cell "col,row"; repeat for several cells.
    #[arg(long, value_name = "COL,ROW")]
    forbidden: Vec<String>,
    /// Lower end of the learning-parameter interval (robust-dynamics).
    #[arg(long)]
    p_low: Option<f64>,
    /// Upper end of the learning-parameter interval (robust-dynamics).
    #[arg(long)]
    p_high: Option<f64>,
    /// Lower end of the goal-reward interval (robust-rewards).
    #[arg(long)]
    reward_low: Option<f64>,
    /// Upper end of the goal-reward interval (robust-rewards).
    #[arg(long)]
    reward_high: Option<f64>,
}

#[derive(Args)]
struct PlanArgs {
    /// Scenario config JSON file.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = PlannerKind::Optimal)]
    planner: PlannerKind,
    #[arg(long, default_value_t = 2000)]
    horizon: usize,
    /// Output policy document path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opts: PlannerOpts,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario config JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Plan in-process with this planner kind.
    #[arg(long, value_enum)]
    planner: Option<PlannerKind>,
    /// Simulate a previously saved policy document instead.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    horizon: usize,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output statistics CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Directory for optional per-run trace files.
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = NoObsModeArg::Randomized)]
    no_obs_mode: NoObsModeArg,
    #[command(flatten)]
    opts: PlannerOpts,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario config JSON file (cops only); its `p` is the planning
    /// parameter.
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated true learning parameters, e.g. "0.05,0.1,0.2".
    #[arg(long)]
    p_grid: String,
    #[arg(long, default_value_t = 2000)]
    horizon: usize,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output sweep CSV path.
    #[arg(long)]
    out: PathBuf,
}

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    fn infeasible(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    fn numeric(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::usage(err.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(err: ScenarioError) -> Self {
        CliError::usage(err.to_string())
    }
}

impl From<ProductError> for CliError {
    fn from(err: ProductError) -> Self {
        CliError::numeric(err.to_string())
    }
}

impl From<MdpError> for CliError {
    fn from(err: MdpError) -> Self {
        match err {
            MdpError::Invalid(_) => CliError::numeric(err.to_string()),
            _ => CliError::usage(err.to_string()),
        }
    }
}

impl From<RobustError> for CliError {
    fn from(err: RobustError) -> Self {
        match err {
            RobustError::EmptyKernelFamily | RobustError::EmptyRewardFamily => {
                CliError::usage(err.to_string())
            }
            RobustError::Plan(inner) => inner.into(),
            _ => CliError::numeric(err.to_string()),
        }
    }
}

impl From<ForbiddenError> for CliError {
    fn from(err: ForbiddenError) -> Self {
        match err {
            ForbiddenError::Infeasible { .. } => CliError::infeasible(err.to_string()),
            ForbiddenError::StateOutOfRange { .. } => CliError::usage(err.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(err: SimError) -> Self {
        CliError::usage(err.to_string())
    }
}

impl From<SweepError> for CliError {
    fn from(err: SweepError) -> Self {
        match err {
            SweepError::InvalidGridValue { .. } | SweepError::EmptyGrid => {
                CliError::usage(err.to_string())
            }
            SweepError::Scenario(inner) => inner.into(),
            SweepError::Product(inner) => inner.into(),
            SweepError::Plan(inner) => inner.into(),
            SweepError::Sim(inner) => inner.into(),
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    configure_threads();
    if let Err(err) = run(cli) {
        eprintln!("error: {}", err.message);
        std::process::exit(err.code);
    }
}

fn configure_threads() {
    if let Ok(value) = std::env::var("DECEPTIVE_PLANNER_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn load_scenario(path: &Path) -> Result<(ScenarioConfig, ScenarioBundle), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|err| CliError::usage(format!("cannot read {}: {err}", path.display())))?;
    let config: ScenarioConfig = serde_json::from_str(&text)
        .map_err(|err| CliError::usage(format!("invalid scenario config: {err}")))?;
    let bundle = config.build()?;
    Ok((config, bundle))
}

fn parse_forbidden(
    bundle: &ScenarioBundle,
    cells: &[String],
) -> Result<BTreeSet<StateId>, CliError> {
    let mut set = BTreeSet::new();
    for raw in cells {
        let parts: Vec<&str> = raw.split(',').collect();
        let cell = match parts.as_slice() {
            [col, row] => match (col.trim().parse::<usize>(), row.trim().parse::<usize>()) {
                (Ok(col), Ok(row)) => GridCell::new(col, row),
                _ => return Err(CliError::usage(format!("invalid forbidden cell `{raw}`"))),
            },
            _ => return Err(CliError::usage(format!("invalid forbidden cell `{raw}`"))),
        };
        if cell.col >= bundle.width || cell.row >= bundle.height {
            return Err(CliError::usage(format!(
                "forbidden cell ({},{}) lies outside the {}x{} grid",
                cell.col, cell.row, bundle.width, bundle.height
            )));
        }
        set.insert(bundle.state_of_cell(cell));
    }
    if set.contains(&bundle.start()) {
        return Err(CliError::infeasible(format!(
            "start cell ({},{}) is forbidden",
            bundle.start_cell.col, bundle.start_cell.row
        )));
    }
    Ok(set)
}

/// Plan with one of the policy-producing planner kinds.
fn plan_policy(
    config: &ScenarioConfig,
    bundle: &ScenarioBundle,
    planner: PlannerKind,
    horizon: usize,
    opts: &PlannerOpts,
) -> Result<(Policy, ValueTable), CliError> {
    let forbidden = parse_forbidden(bundle, &opts.forbidden)?;
    match planner {
        PlannerKind::Optimal => {
            let mut product = bundle.product()?;
            if !forbidden.is_empty() {
                product = apply_forbidden_states(&product, &forbidden)?;
            }
            Ok(plan_optimal_deception(&product, horizon)?)
        }
        PlannerKind::RobustDynamics => {
            let (low, high) = match (opts.p_low, opts.p_high) {
                (Some(low), Some(high)) if low <= high => (low, high),
                (Some(_), Some(_)) => {
                    return Err(CliError::usage("--p-low must not exceed --p-high"))
                }
                _ => {
                    return Err(CliError::usage(
                        "robust-dynamics needs --p-low and --p-high",
                    ))
                }
            };
            for p in [low, high] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(CliError::usage(format!(
                        "p interval bound {p} outside [0, 1]"
                    )));
                }
            }
            let generator_config = config.clone();
            let family =
                KernelFamily::affine_interval("p", low, high, move |p| match &generator_config {
                    ScenarioConfig::Cops(cfg) => {
                        build_cops_scenario(&cfg.clone().with_p(p))
                            .expect("parameter stays inside the validated range")
                            .kernel
                    }
                    ScenarioConfig::Camo(cfg) => {
                        deceptive_planning::scenarios::build_camo_scenario(&cfg.clone().with_p(p))
                            .expect("parameter stays inside the validated range")
                            .kernel
                    }
                })?;
            let agent = if forbidden.is_empty() {
                bundle.agent.clone()
            } else {
                apply_forbidden_agent_states(&bundle.agent, &forbidden)?
            };
            Ok(plan_robust_dynamics(
                &agent,
                &family,
                &bundle.reward,
                horizon,
            )?)
        }
        PlannerKind::RobustRewards => {
            let (low, high) = match (opts.reward_low, opts.reward_high) {
                (Some(low), Some(high)) if low <= high => (low, high),
                (Some(_), Some(_)) => {
                    return Err(CliError::usage(
                        "--reward-low must not exceed --reward-high",
                    ))
                }
                _ => {
                    return Err(CliError::usage(
                        "robust-rewards needs --reward-low and --reward-high",
                    ))
                }
            };
            let ScenarioConfig::Cops(cfg) = config else {
                return Err(CliError::usage(
                    "robust-rewards applies to the cops scenario (the goal-reward interval)",
                ));
            };
            let low_reward = build_cops_scenario(&cfg.clone().with_reward_plus(low))?.reward;
            let high_reward = build_cops_scenario(&cfg.clone().with_reward_plus(high))?.reward;
            let family = RewardFamily::Interval {
                low: low_reward,
                high: high_reward,
            };
            let agent = if forbidden.is_empty() {
                bundle.agent.clone()
            } else {
                apply_forbidden_agent_states(&bundle.agent, &forbidden)?
            };
            Ok(plan_robust_rewards(
                &agent,
                &bundle.kernel,
                &family,
                horizon,
            )?)
        }
        PlannerKind::NoObs | PlannerKind::Nominal => Err(CliError::usage(format!(
            "planner `{}` does not produce a policy file; use `simulate`",
            planner.label()
        ))),
    }
}

fn cmd_plan(args: PlanArgs) -> Result<(), CliError> {
    let (config, bundle) = load_scenario(&args.scenario)?;
    let (policy, values) = plan_policy(&config, &bundle, args.planner, args.horizon, &args.opts)?;

    let doc = PolicyDoc::from_plan(
        &bundle,
        args.planner.label(),
        args.horizon,
        &policy,
        &values,
    );
    let file = fs::File::create(&args.out)?;
    serde_json::to_writer(BufWriter::new(file), &doc)
        .map_err(|err| CliError::usage(format!("cannot write policy: {err}")))?;

    println!(
        "planned `{}` for the {} scenario, horizon {}",
        args.planner.label(),
        doc.scenario_kind,
        args.horizon
    );
    println!(
        "policy table: {} stages x {} product states -> {}",
        doc.table.len(),
        doc.product_state_count,
        args.out.display()
    );
    for (b, value) in doc.value_at_start.iter().enumerate() {
        println!("value at start, initial belief {b}: {value}");
    }
    let mean: f64 = doc.value_at_start.iter().sum::<f64>() / doc.value_at_start.len() as f64;
    println!("value at start, uniform initial belief: {mean}");
    Ok(())
}

fn write_stats_csv(path: &Path, stats: &RunStats) -> Result<(), CliError> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "t,mean_avg_reward,std_avg_reward")?;
    for (i, (mean, std)) in stats.mean.iter().zip(&stats.std).enumerate() {
        writeln!(out, "{},{},{}", i + 1, mean, std)?;
    }
    out.flush()?;
    Ok(())
}

fn write_trace_csv(
    dir: &Path,
    run: usize,
    trace: &deceptive_planning::sim::SimTrace,
) -> Result<(), CliError> {
    let file = fs::File::create(dir.join(format!("run_{run:03}.csv")))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "t,state,belief,action,reward")?;
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.t, r.state.0, r.belief.0, r.action.0, r.reward
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Owned controller ingredients; `ControllerSpec` borrows from this.
enum ResolvedController {
    Nominal,
    FullObs(Policy),
    NoObs {
        product: deceptive_planning::ProductMdp,
        policy: Policy,
        values: ValueTable,
        mode: NoObsMode,
    },
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    if args.runs == 0 {
        return Err(CliError::usage("--runs must be at least 1"));
    }
    let (config, bundle) = load_scenario(&args.scenario)?;

    let resolved = match (&args.policy, args.planner) {
        (Some(_), Some(_)) => {
            return Err(CliError::usage(
                "give either --policy or --planner, not both",
            ))
        }
        (Some(path), None) => {
            if !args.opts.forbidden.is_empty() {
                return Err(CliError::usage(
                    "--forbidden applies at planning time; it cannot modify a saved policy",
                ));
            }
            let text = fs::read_to_string(path)
                .map_err(|err| CliError::usage(format!("cannot read {}: {err}", path.display())))?;
            let doc: PolicyDoc = serde_json::from_str(&text)
                .map_err(|err| CliError::usage(format!("invalid policy file: {err}")))?;
            doc.validate_against(&bundle).map_err(CliError::usage)?;
            ResolvedController::FullObs(doc.to_policy())
        }
        (None, kind) => match kind.unwrap_or(PlannerKind::Optimal) {
            PlannerKind::Nominal => ResolvedController::Nominal,
            PlannerKind::NoObs => {
                let product = bundle.product()?;
                let (policy, values) = plan_optimal_deception(&product, args.horizon)?;
                ResolvedController::NoObs {
                    product,
                    policy,
                    values,
                    mode: args.no_obs_mode.into(),
                }
            }
            kind => {
                let (policy, _) = plan_policy(&config, &bundle, kind, args.horizon, &args.opts)?;
                ResolvedController::FullObs(policy)
            }
        },
    };
    let controller = match &resolved {
        ResolvedController::Nominal => ControllerSpec::Nominal,
        ResolvedController::FullObs(policy) => ControllerSpec::FullObs(policy),
        ResolvedController::NoObs {
            product,
            policy,
            values,
            mode,
        } => ControllerSpec::NoObs {
            product,
            policy,
            values,
            mode: *mode,
            initial: None,
        },
    };

    let stats = if let Some(dir) = &args.traces {
        fs::create_dir_all(dir)?;
        let mut curves = Vec::with_capacity(args.runs);
        for run in 0..args.runs {
            let trace = simulate_run(&bundle, &controller, args.horizon, args.seed + run as u64)?;
            write_trace_csv(dir, run, &trace)?;
            curves.push(average_reward_curve(&trace));
        }
        RunStats::from_curves(&curves)
    } else {
        monte_carlo(&bundle, &controller, args.runs, args.horizon, args.seed)?
    };

    write_stats_csv(&args.out, &stats)?;
    println!(
        "simulated {} runs over horizon {} -> {}",
        args.runs,
        args.horizon,
        args.out.display()
    );
    println!(
        "terminal running-average reward: mean {}, std {}",
        stats.terminal_mean(),
        stats.terminal_std()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    if args.runs == 0 {
        return Err(CliError::usage("--runs must be at least 1"));
    }
    let (config, _) = load_scenario(&args.scenario)?;
    let ScenarioConfig::Cops(cfg) = &config else {
        return Err(CliError::usage("sweep applies to the cops scenario"));
    };
    let grid = args
        .p_grid
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::usage(format!("invalid p-grid value `{s}`")))
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    if grid.is_empty() {
        return Err(CliError::usage("p-grid is empty"));
    }

    let table = mismatch_sweep(cfg, cfg.p, &grid, args.runs, args.horizon, args.seed)?;

    let file = fs::File::create(&args.out)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "p_true,delta")?;
    for (p_true, delta) in &table {
        writeln!(out, "{},{}", p_true, delta)?;
    }
    out.flush()?;
    println!(
        "swept {} parameter values (plan parameter {}) -> {}",
        table.len(),
        cfg.p,
        args.out.display()
    );
    for (p_true, delta) in &table {
        println!("p_true={p_true}: delta={delta}");
    }
    Ok(())
}
