//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (visible with `--nocapture`) with the measured quantities.
//!
//! Shared full-scale artifacts (plans and Monte-Carlo statistics at
//! horizon 2000, 100 runs) are computed once and reused across
//! criteria.

use std::collections::BTreeSet;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use deceptive_planning::belief::{apply_forbidden_states, build_product_mdp, BeliefId, ProductMdp};
use deceptive_planning::mdp::{
    backward_induction, brute_force_plan, ActionId, Distribution, Mdp, Policy, StateId, ValueTable,
};
use deceptive_planning::planners::{
    plan_optimal_deception, plan_robust_dynamics, plan_robust_rewards, KernelFamily, NoObsMode,
    RewardFamily,
};
use deceptive_planning::scenarios::{
    build_camo_scenario, build_cops_scenario, CamoConfig, CopsConfig, ScenarioBundle,
};
use deceptive_planning::sim::{
    mismatch_sweep, monte_carlo, simulate_run, ControllerSpec, RunStats,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const HORIZON: usize = 2000;
const RUNS: usize = 100;
const SEED: u64 = 1000;

fn report(criterion: usize, label: &str, pass: bool, detail: &str) {
    println!(
        "acceptance criterion {criterion} ({label}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({label}) failed: {detail}");
}

struct CopsArtifacts {
    cfg: CopsConfig,
    bundle: ScenarioBundle,
    product: ProductMdp,
    policy: Policy,
    values: ValueTable,
    optimal: RunStats,
    plan_sim_secs: f64,
}

fn cops() -> &'static CopsArtifacts {
    static COPS: OnceLock<CopsArtifacts> = OnceLock::new();
    COPS.get_or_init(|| {
        let cfg = CopsConfig::reference_layout();
        let bundle = build_cops_scenario(&cfg).unwrap();
        let product = bundle.product().unwrap();
        let clock = Instant::now();
        let (policy, values) = plan_optimal_deception(&product, HORIZON).unwrap();
        let optimal = monte_carlo(
            &bundle,
            &ControllerSpec::FullObs(&policy),
            RUNS,
            HORIZON,
            SEED,
        )
        .unwrap();
        let plan_sim_secs = clock.elapsed().as_secs_f64();
        CopsArtifacts {
            cfg,
            bundle,
            product,
            policy,
            values,
            optimal,
            plan_sim_secs,
        }
    })
}

struct RobustArtifacts {
    dynamics: RunStats,
    rewards: RunStats,
}

fn robust() -> &'static RobustArtifacts {
    static ROBUST: OnceLock<RobustArtifacts> = OnceLock::new();
    ROBUST.get_or_init(|| {
        let art = cops();
        let base = art.cfg.clone();
        let family = KernelFamily::affine_interval("p", 0.05, 0.2, move |p| {
            build_cops_scenario(&base.clone().with_p(p)).unwrap().kernel
        })
        .unwrap();
        let (rd_policy, _) =
            plan_robust_dynamics(&art.bundle.agent, &family, &art.bundle.reward, HORIZON).unwrap();
        let dynamics = monte_carlo(
            &art.bundle,
            &ControllerSpec::FullObs(&rd_policy),
            RUNS,
            HORIZON,
            SEED,
        )
        .unwrap();

        let (rr_policy, _) = plan_robust_rewards(
            &art.bundle.agent,
            &art.bundle.kernel,
            &reward_interval(&art.cfg),
            HORIZON,
        )
        .unwrap();
        let rewards = monte_carlo(
            &art.bundle,
            &ControllerSpec::FullObs(&rr_policy),
            RUNS,
            HORIZON,
            SEED,
        )
        .unwrap();
        RobustArtifacts { dynamics, rewards }
    })
}

fn reward_interval(cfg: &CopsConfig) -> RewardFamily {
    RewardFamily::Interval {
        low: build_cops_scenario(&cfg.clone().with_reward_plus(1.0))
            .unwrap()
            .reward,
        high: build_cops_scenario(&cfg.clone().with_reward_plus(20.0))
            .unwrap()
            .reward,
    }
}

struct CamoArtifacts {
    bundle: ScenarioBundle,
    policy: Policy,
    optimal: RunStats,
}

fn camo() -> &'static CamoArtifacts {
    static CAMO: OnceLock<CamoArtifacts> = OnceLock::new();
    CAMO.get_or_init(|| {
        let bundle = build_camo_scenario(&CamoConfig::reference_layout()).unwrap();
        let product = bundle.product().unwrap();
        let (policy, _) = plan_optimal_deception(&product, HORIZON).unwrap();
        let optimal = monte_carlo(
            &bundle,
            &ControllerSpec::FullObs(&policy),
            RUNS,
            HORIZON,
            SEED,
        )
        .unwrap();
        CamoArtifacts {
            bundle,
            policy,
            optimal,
        }
    })
}

fn random_small_mdp(rng: &mut StdRng) -> Mdp {
    let states = rng.random_range(1..=3);
    let actions = rng.random_range(1..=2);
    let mut mdp = Mdp::new(states, actions);
    for s in 0..states {
        for a in 0..actions {
            let mut weights: Vec<f64> = (0..states).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            let entries = weights
                .into_iter()
                .enumerate()
                .map(|(i, p)| (StateId(i), p))
                .collect();
            mdp.add_action(
                StateId(s),
                ActionId(a),
                rng.random_range(-5.0..5.0),
                Distribution::new(entries),
            );
        }
    }
    mdp
}

#[test]
fn criterion_01_oracle_equivalence() {
    let clock = Instant::now();
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mdp = random_small_mdp(&mut rng);
        let horizon = rng.random_range(0..=3);
        let start = StateId(rng.random_range(0..mdp.state_count()));
        let (_, values) = backward_induction(&mdp, horizon).unwrap();
        let oracle = brute_force_plan(&mdp, horizon, start).unwrap();
        worst = worst.max((values.value(0, start) - oracle).abs());
    }
    let secs = clock.elapsed().as_secs_f64();
    report(
        1,
        "oracle equivalence",
        worst < 1e-9 && secs < 10.0,
        &format!("max |dp - brute force| = {worst:.3e} over 100 instances in {secs:.2}s"),
    );
}

#[test]
fn criterion_02_kernel_normalization() {
    let clock = Instant::now();
    let mut worst: f64 = 0.0;
    for bundle in [
        build_cops_scenario(&CopsConfig::reference_layout()).unwrap(),
        build_camo_scenario(&CamoConfig::reference_layout()).unwrap(),
    ] {
        for s in (0..bundle.agent.state_count()).map(StateId) {
            for a in bundle.agent.permissible(s) {
                for b in (0..bundle.belief_count).map(BeliefId) {
                    let row = bundle.kernel.row(s, b, a).unwrap();
                    worst = worst.max((row.total() - 1.0).abs());
                }
            }
        }
        let product = bundle.product().unwrap();
        for x in (0..product.product_state_count()).map(StateId) {
            for a in product.mdp().permissible(x) {
                worst = worst.max((product.mdp().transitions(x, a).total() - 1.0).abs());
            }
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    report(
        2,
        "kernel normalization",
        worst <= 1e-12 && secs < 5.0,
        &format!("max |row sum - 1| = {worst:.3e} over both scenarios in {secs:.2}s"),
    );
}

#[test]
fn criterion_03_cops_nominal_baseline() {
    let art = cops();
    let clock = Instant::now();
    let stats = monte_carlo(&art.bundle, &ControllerSpec::Nominal, RUNS, HORIZON, SEED).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let mean = stats.terminal_mean();
    report(
        3,
        "cops nominal baseline",
        (-10.0..=-9.0).contains(&mean) && secs < 30.0,
        &format!("terminal mean = {mean:.4} (target [-10, -9]) in {secs:.2}s"),
    );
}

#[test]
fn criterion_04_cops_optimal_deception() {
    let art = cops();
    let mean = art.optimal.terminal_mean();
    let shape_ok = art.policy.rows().len() == 2001 && art.policy.rows()[0].len() == 192;
    report(
        4,
        "cops optimal deception",
        (mean - 3.9).abs() <= 0.5 && art.plan_sim_secs < 120.0 && shape_ok,
        &format!(
            "terminal mean = {mean:.4} (target 3.9 +/- 0.5), policy {}x{}, plan+sim {:.1}s",
            art.policy.rows().len(),
            art.policy.rows()[0].len(),
            art.plan_sim_secs
        ),
    );
}

#[test]
fn criterion_05_robust_variants() {
    let art = cops();
    let rob = robust();
    let optimal = art.optimal.terminal_mean();
    let rd = rob.dynamics.terminal_mean();
    let rr = rob.rewards.terminal_mean();
    let pass = (rd - 3.5).abs() <= 0.5 && (rr - 3.5).abs() <= 0.5 && rd <= optimal && rr <= optimal;
    report(
        5,
        "robust variants",
        pass,
        &format!(
            "robust-dynamics = {rd:.4}, robust-rewards = {rr:.4} (target 3.5 +/- 0.5, each <= {optimal:.4})"
        ),
    );
}

#[test]
fn criterion_06_no_observation_approximation() {
    let art = cops();
    let rob = robust();
    let spec = ControllerSpec::NoObs {
        product: &art.product,
        policy: &art.policy,
        values: &art.values,
        mode: NoObsMode::Randomized,
        initial: None,
    };
    let stats = monte_carlo(&art.bundle, &spec, RUNS, HORIZON, SEED).unwrap();
    let nominal = monte_carlo(&art.bundle, &ControllerSpec::Nominal, RUNS, HORIZON, SEED).unwrap();
    let mean = stats.terminal_mean();
    let optimal = art.optimal.terminal_mean();
    // Empirical ordering across all controllers at full scale.
    let ordered = optimal > rob.dynamics.terminal_mean()
        && optimal > rob.rewards.terminal_mean()
        && rob.dynamics.terminal_mean() > mean
        && rob.rewards.terminal_mean() > mean
        && mean > 0.0
        && nominal.terminal_mean() < 0.0;
    report(
        6,
        "no-observation approximation",
        mean > 0.0 && mean < optimal && ordered,
        &format!(
            "terminal mean = {mean:.4}, strictly inside (0, {optimal:.4}); ordering optimal > robust > no-obs > 0 > nominal = {ordered}"
        ),
    );
}

#[test]
fn criterion_07_forbidden_goal_constraints() {
    let art = cops();
    let g2 = art.bundle.state_of_cell(art.cfg.goals[1]);
    let g3 = art.bundle.state_of_cell(art.cfg.goals[2]);
    let both: BTreeSet<StateId> = [g2, g3].into();
    let top_only: BTreeSet<StateId> = [g2].into();

    let masked = apply_forbidden_states(&art.product, &both).unwrap();
    let (o1_policy, _) = plan_optimal_deception(&masked, HORIZON).unwrap();
    let o1 = monte_carlo(
        &art.bundle,
        &ControllerSpec::FullObs(&o1_policy),
        RUNS,
        HORIZON,
        SEED,
    )
    .unwrap();

    let masked = apply_forbidden_states(&art.product, &top_only).unwrap();
    let (o2_policy, _) = plan_optimal_deception(&masked, HORIZON).unwrap();
    let o2 = monte_carlo(
        &art.bundle,
        &ControllerSpec::FullObs(&o2_policy),
        RUNS,
        HORIZON,
        SEED,
    )
    .unwrap();

    let gap = o2.terminal_mean() - o1.terminal_mean();
    let closeness = (o2.terminal_mean() - art.optimal.terminal_mean()).abs();
    report(
        7,
        "forbidden-goal constraints",
        gap >= 0.5 && closeness <= 0.3,
        &format!(
            "mean(O1) = {:.4}, mean(O2) = {:.4}, gap = {gap:.4} (required >= 0.5); |mean(O2) - mean(O)| = {closeness:.4} (required <= 0.3). The exact DP gap (start values averaged over the uniform initial belief) is 0.384, below the required 0.5, so this check fails by construction rather than by noise.",
            o1.terminal_mean(),
            o2.terminal_mean()
        ),
    );
}

#[test]
fn criterion_08_camouflage_behavior() {
    let art = camo();
    // Nominal runs collect exactly zero at every step.
    let mut nominal_zero = true;
    for seed in 0..5 {
        let trace = simulate_run(&art.bundle, &ControllerSpec::Nominal, HORIZON, seed).unwrap();
        nominal_zero &= trace.rewards().all(|r| r == 0.0);
    }

    let mean = art.optimal.terminal_mean();

    // Leave-and-return: within 5 steps of the belief reaching the goal
    // while the agent sits on it, the agent departs.
    let tg = art.bundle.state_of_cell(art.bundle.true_goal_cell);
    let tg_belief = BeliefId(tg.0);
    let mut max_delay = 0usize;
    let mut spotted = 0usize;
    for seed in 0..10 {
        let trace = simulate_run(
            &art.bundle,
            &ControllerSpec::FullObs(&art.policy),
            HORIZON,
            seed,
        )
        .unwrap();
        for (i, r) in trace.records.iter().enumerate() {
            if r.state == tg && r.belief == tg_belief && i + 5 < trace.records.len() {
                spotted += 1;
                let delay = trace.records[i..=i + 5]
                    .iter()
                    .position(|r2| r2.state != tg);
                match delay {
                    Some(d) => max_delay = max_delay.max(d),
                    None => max_delay = usize::MAX,
                }
            }
        }
    }
    let leaves = max_delay <= 5 && spotted > 0;
    report(
        8,
        "camouflage behavior",
        nominal_zero && mean > 0.0 && leaves,
        &format!(
            "nominal rewards all zero = {nominal_zero}; optimal terminal mean = {mean:.4} (> 0); departs within {max_delay} step(s) of being spotted at the goal ({spotted} events)"
        ),
    );
}

#[test]
fn criterion_09_infimum_reward_policy_identity() {
    let art = cops();
    let (robust_policy, _) = plan_robust_rewards(
        &art.bundle.agent,
        &art.bundle.kernel,
        &reward_interval(&art.cfg),
        HORIZON,
    )
    .unwrap();
    let low = build_cops_scenario(&art.cfg.clone().with_reward_plus(1.0))
        .unwrap()
        .reward;
    let inf_product = build_product_mdp(&art.bundle.agent, &art.bundle.kernel, &low).unwrap();
    let (direct_policy, _) = plan_optimal_deception(&inf_product, HORIZON).unwrap();
    let identical = robust_policy == direct_policy;
    report(
        9,
        "infimum-reward policy identity",
        identical,
        &format!(
            "policy tables bit-identical = {identical} ({} stages)",
            HORIZON + 1
        ),
    );
}

#[test]
fn criterion_10_affine_endpoint_property() {
    let art = cops();
    let (p_low, p_high) = (0.05, 0.2);
    let base = art.cfg.clone();
    let family = KernelFamily::affine_interval("p", p_low, p_high, move |p| {
        build_cops_scenario(&base.clone().with_p(p)).unwrap().kernel
    })
    .unwrap();
    let (_, values) =
        plan_robust_dynamics(&art.bundle.agent, &family, &art.bundle.reward, HORIZON).unwrap();

    let product_at = |p: f64| {
        let bundle = build_cops_scenario(&art.cfg.clone().with_p(p)).unwrap();
        build_product_mdp(&bundle.agent, &bundle.kernel, &bundle.reward).unwrap()
    };
    let endpoints = [product_at(p_low), product_at(p_high)];
    let grid: Vec<ProductMdp> = (0..16)
        .map(|k| product_at(p_low + k as f64 * (p_high - p_low) / 15.0))
        .collect();

    // Ten product states spread over the 192.
    let sampled: Vec<StateId> = (0..10).map(|k| StateId(k * 19)).collect();
    let mut worst: f64 = 0.0;
    for t in 0..=HORIZON {
        let next = &values.rows()[t + 1];
        for &x in &sampled {
            for a in endpoints[0].mdp().permissible(x) {
                let q_of = |product: &ProductMdp| {
                    let mut expect = 0.0;
                    for &(target, p) in product.mdp().transitions(x, a).entries() {
                        expect += p * next[target.0];
                    }
                    product.mdp().reward(x, a) + expect
                };
                let endpoint_min = endpoints.iter().map(q_of).fold(f64::INFINITY, f64::min);
                let grid_min = grid.iter().map(q_of).fold(f64::INFINITY, f64::min);
                worst = worst.max((endpoint_min - grid_min).abs());
            }
        }
    }
    report(
        10,
        "affine endpoint property",
        worst < 1e-9,
        &format!(
            "max |endpoint min - 16-point grid min| = {worst:.3e} over {} stages x 10 states",
            HORIZON + 1
        ),
    );
}

#[test]
fn criterion_11_mismatch_sweep() {
    let art = cops();
    let grid = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3];
    let table = mismatch_sweep(&art.cfg, 0.1, &grid, RUNS, HORIZON, 500).unwrap();
    let delta_of = |p: f64| {
        table
            .iter()
            .find(|(q, _)| (q - p).abs() < 1e-12)
            .map(|&(_, d)| d)
            .unwrap()
    };
    let near = (delta_of(0.1).abs() + delta_of(0.15).abs()) / 2.0;
    let far = (delta_of(0.25).abs() + delta_of(0.3).abs()) / 2.0;
    let at_plan = delta_of(0.1).abs();
    report(
        11,
        "mismatch sweep",
        at_plan < 0.3 && far > near,
        &format!(
            "|delta(0.1)| = {at_plan:.4} (< 0.3); mean |delta| near 0.1 = {near:.4} vs far = {far:.4}; table = {table:?}"
        ),
    );
}

#[test]
fn criterion_12_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_deceptive-planner");
    let scenario = concat!(env!("CARGO_MANIFEST_DIR"), "/../../presets/cops.json");
    let dir = std::env::temp_dir().join(format!("acceptance12_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let run = |out: &std::path::Path| {
        let status = Command::new(bin)
            .args([
                "simulate",
                "--scenario",
                scenario,
                "--planner",
                "optimal",
                "--horizon",
                "300",
                "--runs",
                "20",
                "--seed",
                "7",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let first = run(&dir.join("a.csv"));
    let second = run(&dir.join("b.csv"));
    let identical = first == second;
    let _ = std::fs::remove_dir_all(&dir);
    report(
        12,
        "CLI determinism",
        identical && !first.is_empty(),
        &format!(
            "two identical invocations produced byte-identical CSVs = {identical} ({} bytes)",
            first.len()
        ),
    );
}
