//! Planning and simulation of deceptive control policies.
//!
//! An agent moves on a finite MDP while an adversary maintains a belief
//! about the agent's intentions, updated by a memoryless stochastic
//! learning rule. The stage reward depends on the agent state, the
//! adversary belief, and the action, so planning happens on the product
//! of the agent state space and the belief space. This crate provides:
//!
//! - [`mdp`]: generic finite-horizon MDPs, backward induction, exact
//!   policy evaluation, and a brute-force enumeration oracle;
//! - [`belief`]: belief kernels, belief-dependent rewards, and the
//!   product-MDP construction, plus forbidden-state masking;
//! - [`planners`]: optimal deception, planning without belief
//!   observations, and robust planning under uncertain belief dynamics
//!   or uncertain rewards;
//! - [`scenarios`]: the cops-and-deceptive-robbers and camouflage
//!   gridworld scenario builders;
//! - [`sim`]: seeded Monte-Carlo simulation, running-average reward
//!   curves, and the learning-parameter mismatch sweep.

pub mod belief;
pub mod mdp;
pub mod planners;
pub mod scenarios;
pub mod sim;

pub use belief::{
    apply_forbidden_states, build_product_mdp, BeliefId, BeliefKernel, BeliefReward, ProductMdp,
};
pub use mdp::{
    backward_induction, brute_force_plan, evaluate_policy, validate_mdp, ActionId, Distribution,
    Mdp, Policy, StateId, ValueTable,
};
pub use planners::{
    plan_optimal_deception, plan_robust_dynamics, plan_robust_rewards, update_belief_distribution,
    BeliefDistribution, KernelFamily, NoObsController, NoObsMode, RewardFamily,
};
pub use scenarios::{
    build_camo_scenario, build_cops_scenario, CamoConfig, CopsConfig, GridCell, ScenarioBundle,
    ScenarioConfig,
};
pub use sim::{
    average_reward_curve, mismatch_sweep, monte_carlo, simulate_run, ControllerSpec, RunStats,
    SimTrace,
};
