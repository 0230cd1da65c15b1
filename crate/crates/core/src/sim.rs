//! Seeded Monte-Carlo execution of scenario/controller pairs,
//! running-average reward curves, and the learning-parameter mismatch
//! sweep.
//!
//! A run over horizon `T` produces `T + 1` records; the record at step
//! `t` stores the reward `L(s_t, B_t, a_t)`. Within a step the rng is
//! consumed in a fixed order: the optional belief sample of the
//! randomized no-observation controller, then the next agent state,
//! then the next belief. When the initial belief is uniform-random it
//! is drawn from the run's stream before step 0. A `(bundle,
//! controller, horizon, seed)` tuple therefore fully determines the
//! trace.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use thiserror::Error;

use crate::belief::{BeliefId, ProductMdp};
use crate::mdp::{ActionId, MdpError, Policy, StateId, ValueTable};
use crate::planners::{plan_optimal_deception, BeliefDistribution, NoObsController, NoObsMode};
use crate::scenarios::{
    build_cops_scenario, CopsConfig, InitialBelief, ScenarioBundle, ScenarioError,
};

/// One simulation step: state, belief, action, and the collected reward.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub state: StateId,
    pub belief: BeliefId,
    pub action: ActionId,
    pub reward: f64,
}

/// A realized run: `horizon + 1` records plus the seed that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub seed: u64,
    pub records: Vec<TraceRecord>,
}

impl SimTrace {
    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.reward)
    }

    /// Running average over the whole trace.
    pub fn terminal_average(&self) -> f64 {
        let n = self.records.len();
        self.rewards().sum::<f64>() / n as f64
    }
}

/// How actions are chosen during a run.
#[derive(Clone, Debug)]
pub enum ControllerSpec<'a> {
    /// Full-observation policy over product states.
    FullObs(&'a Policy),
    /// The bundle's stationary nominal policy (ignores the belief).
    Nominal,
    /// No belief observations: track a belief distribution and drive it
    /// through a full-observation plan. Each run gets a fresh
    /// controller; `initial` defaults to the uniform prior.
    NoObs {
        product: &'a ProductMdp,
        policy: &'a Policy,
        values: &'a ValueTable,
        mode: NoObsMode,
        initial: Option<BeliefDistribution>,
    },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("controller horizon {policy} is shorter than the requested horizon {requested}")]
    HorizonMismatch { policy: usize, requested: usize },
    #[error("policy covers {policy_states} states but the scenario has {expected} product states")]
    PolicyShapeMismatch {
        policy_states: usize,
        expected: usize,
    },
    #[error("controller chose impermissible action {action} at agent state {state}, step {t}")]
    ImpermissibleAction {
        state: usize,
        action: usize,
        t: usize,
    },
}

/// Simulate one run. Deterministic given the seed.
pub fn simulate_run(
    bundle: &ScenarioBundle,
    controller: &ControllerSpec,
    horizon: usize,
    seed: u64,
) -> Result<SimTrace, SimError> {
    let product_states = bundle.agent.state_count() * bundle.belief_count;
    let check_policy = |policy: &Policy| -> Result<(), SimError> {
        if policy.state_count() != product_states {
            return Err(SimError::PolicyShapeMismatch {
                policy_states: policy.state_count(),
                expected: product_states,
            });
        }
        if policy.horizon() < horizon {
            return Err(SimError::HorizonMismatch {
                policy: policy.horizon(),
                requested: horizon,
            });
        }
        Ok(())
    };

    let mut no_obs = match controller {
        ControllerSpec::FullObs(policy) => {
            check_policy(policy)?;
            None
        }
        ControllerSpec::Nominal => None,
        ControllerSpec::NoObs {
            product,
            policy,
            values,
            mode,
            initial,
        } => {
            check_policy(policy)?;
            let pr0 = initial
                .clone()
                .unwrap_or_else(|| BeliefDistribution::uniform(bundle.belief_count));
            Some(NoObsController::new(
                product,
                &bundle.kernel,
                policy,
                values,
                pr0,
                *mode,
            ))
        }
    };

    let mut rng = StdRng::seed_from_u64(seed);
    let mut state = bundle.start();
    let mut belief = match bundle.initial_belief {
        InitialBelief::Fixed(b) => BeliefId(b),
        InitialBelief::Uniform => BeliefId(rng.random_range(0..bundle.belief_count)),
    };

    let mut records = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let action = match controller {
            ControllerSpec::FullObs(policy) => {
                policy.action(t, bundle.product_index(state, belief))
            }
            ControllerSpec::Nominal => bundle.nominal[state.0],
            ControllerSpec::NoObs { .. } => no_obs.as_ref().unwrap().act(state, t, &mut rng),
        };
        if !bundle.agent.is_permissible(state, action) {
            return Err(SimError::ImpermissibleAction {
                state: state.0,
                action: action.0,
                t,
            });
        }
        let reward = bundle.reward.get(state, belief, action);
        records.push(TraceRecord {
            t,
            state,
            belief,
            action,
            reward,
        });
        if t < horizon {
            if let Some(ctrl) = no_obs.as_mut() {
                ctrl.advance(state, action);
            }
            let next_state = bundle.agent.transitions(state, action).sample(&mut rng);
            let next_belief = bundle
                .kernel
                .row(state, belief, action)
                .expect("kernel row exists for permissible actions")
                .sample(&mut rng);
            state = next_state;
            belief = next_belief;
        }
    }
    Ok(SimTrace { seed, records })
}

/// Running-average reward curve: entry `k` is the mean of the first
/// `k + 1` stage rewards, i.e. the accumulated reward after `T' = k + 1`
/// steps divided by `T'`.
pub fn average_reward_curve(trace: &SimTrace) -> Vec<f64> {
    assert!(!trace.records.is_empty(), "trace must be nonempty");
    let mut out = Vec::with_capacity(trace.records.len());
    let mut sum = 0.0;
    for (k, reward) in trace.rewards().enumerate() {
        sum += reward;
        out.push(sum / (k + 1) as f64);
    }
    out
}

/// Per-step mean and standard deviation of the running-average reward
/// across runs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunStats {
    pub runs: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl RunStats {
    /// Aggregate per-run running-average curves (population standard
    /// deviation; a single run has std 0).
    pub fn from_curves(curves: &[Vec<f64>]) -> Self {
        assert!(!curves.is_empty(), "need at least one curve");
        let len = curves[0].len();
        assert!(
            curves.iter().all(|c| c.len() == len),
            "curve length mismatch"
        );
        let n = curves.len() as f64;
        let mut mean = vec![0.0; len];
        for curve in curves {
            for (m, &v) in mean.iter_mut().zip(curve) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut std = vec![0.0; len];
        for curve in curves {
            for ((sd, &v), &m) in std.iter_mut().zip(curve).zip(&mean) {
                *sd += (v - m) * (v - m);
            }
        }
        for sd in &mut std {
            *sd = (*sd / n).sqrt();
        }
        RunStats {
            runs: curves.len(),
            mean,
            std,
        }
    }

    pub fn terminal_mean(&self) -> f64 {
        *self.mean.last().expect("stats are nonempty")
    }

    pub fn terminal_std(&self) -> f64 {
        *self.std.last().expect("stats are nonempty")
    }
}

/// Monte-Carlo aggregation: run `i` uses seed `base_seed + i`. Runs
/// execute in parallel; aggregation order is fixed by run index.
pub fn monte_carlo(
    bundle: &ScenarioBundle,
    controller: &ControllerSpec,
    runs: usize,
    horizon: usize,
    base_seed: u64,
) -> Result<RunStats, SimError> {
    assert!(runs >= 1, "need at least one run");
    let curves = (0..runs)
        .into_par_iter()
        .map(|i| {
            simulate_run(bundle, controller, horizon, base_seed + i as u64)
                .map(|trace| average_reward_curve(&trace))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunStats::from_curves(&curves))
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep grid value {p} must lie in [0, 1]")]
    InvalidGridValue { p: f64 },
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Product(#[from] crate::belief::ProductError),
    #[error(transparent)]
    Plan(#[from] MdpError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Sensitivity of the optimal deceptive policy to the learning
/// parameter: for each `p_true`, the terminal mean running-average
/// reward of the policy planned at `p_true` minus that of the policy
/// planned at `p_plan`, both simulated under `p_true`. Both sides use
/// the same seed set, so the delta at `p_true = p_plan` is exactly 0.
pub fn mismatch_sweep(
    cfg: &CopsConfig,
    p_plan: f64,
    p_true_grid: &[f64],
    runs: usize,
    horizon: usize,
    base_seed: u64,
) -> Result<Vec<(f64, f64)>, SweepError> {
    if p_true_grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    for &p in p_true_grid {
        if !(0.0..=1.0).contains(&p) {
            return Err(SweepError::InvalidGridValue { p });
        }
    }

    let plan_bundle = build_cops_scenario(&cfg.clone().with_p(p_plan))?;
    let (base_policy, _) = plan_optimal_deception(&plan_bundle.product()?, horizon)?;

    let mut out = Vec::with_capacity(p_true_grid.len());
    for &p_true in p_true_grid {
        let true_bundle = build_cops_scenario(&cfg.clone().with_p(p_true))?;
        let (tuned_policy, _) = plan_optimal_deception(&true_bundle.product()?, horizon)?;
        let tuned = monte_carlo(
            &true_bundle,
            &ControllerSpec::FullObs(&tuned_policy),
            runs,
            horizon,
            base_seed,
        )?;
        let base = monte_carlo(
            &true_bundle,
            &ControllerSpec::FullObs(&base_policy),
            runs,
            horizon,
            base_seed,
        )?;
        out.push((p_true, tuned.terminal_mean() - base.terminal_mean()));
    }
    Ok(out)
}
