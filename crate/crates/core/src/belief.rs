//! Adversary belief space, memoryless belief kernels, and the product
//! MDP on `S x B` that the deception planners consume.
//!
//! The product state for agent state `s` and belief `b` is indexed
//! `s * belief_count + b` (s-major), so serialized policies stay
//! portable across runs.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::mdp::{
    validate_mdp, ActionId, DenseIndex, Distribution, Mdp, StateId, ValidationReport,
};

/// Tolerance for the product kernel factorization check.
pub const FACTOR_TOL: f64 = 1e-12;

/// Index into the finite belief set; valid values are `< belief_count`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeliefId(pub usize);

impl DenseIndex for BeliefId {
    fn index(self) -> usize {
        self.0
    }

    fn from_index(index: usize) -> Self {
        BeliefId(index)
    }
}

/// Memoryless learning mechanism: for each `(state, belief, action)`
/// triple, the distribution of the adversary's next belief.
///
/// Rows are only required for actions permissible at the state.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefKernel {
    state_count: usize,
    belief_count: usize,
    action_count: usize,
    rows: Vec<Option<Distribution<BeliefId>>>,
}

impl BeliefKernel {
    pub fn new(state_count: usize, belief_count: usize, action_count: usize) -> Self {
        BeliefKernel {
            state_count,
            belief_count,
            action_count,
            rows: vec![None; state_count * belief_count * action_count],
        }
    }

    /// Populate every row the closure returns `Some` for.
    pub fn from_fn(
        state_count: usize,
        belief_count: usize,
        action_count: usize,
        mut f: impl FnMut(StateId, BeliefId, ActionId) -> Option<Distribution<BeliefId>>,
    ) -> Self {
        let mut kernel = BeliefKernel::new(state_count, belief_count, action_count);
        for s in (0..state_count).map(StateId) {
            for b in (0..belief_count).map(BeliefId) {
                for a in (0..action_count).map(ActionId) {
                    if let Some(row) = f(s, b, a) {
                        kernel.set(s, b, a, row);
                    }
                }
            }
        }
        kernel
    }

    pub fn set(&mut self, s: StateId, b: BeliefId, a: ActionId, row: Distribution<BeliefId>) {
        let slot = self.slot(s, b, a);
        self.rows[slot] = Some(row);
    }

    pub fn row(&self, s: StateId, b: BeliefId, a: ActionId) -> Option<&Distribution<BeliefId>> {
        self.rows[self.slot(s, b, a)].as_ref()
    }

    fn slot(&self, s: StateId, b: BeliefId, a: ActionId) -> usize {
        assert!(s.0 < self.state_count && b.0 < self.belief_count && a.0 < self.action_count);
        (s.0 * self.belief_count + b.0) * self.action_count + a.0
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn belief_count(&self) -> usize {
        self.belief_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }
}

/// Belief-dependent stage reward `L(state, belief, action)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefReward {
    state_count: usize,
    belief_count: usize,
    action_count: usize,
    values: Vec<f64>,
}

impl BeliefReward {
    pub fn from_fn(
        state_count: usize,
        belief_count: usize,
        action_count: usize,
        mut f: impl FnMut(StateId, BeliefId, ActionId) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(state_count * belief_count * action_count);
        for s in (0..state_count).map(StateId) {
            for b in (0..belief_count).map(BeliefId) {
                for a in (0..action_count).map(ActionId) {
                    values.push(f(s, b, a));
                }
            }
        }
        BeliefReward {
            state_count,
            belief_count,
            action_count,
            values,
        }
    }

    pub fn get(&self, s: StateId, b: BeliefId, a: ActionId) -> f64 {
        assert!(s.0 < self.state_count && b.0 < self.belief_count && a.0 < self.action_count);
        self.values[(s.0 * self.belief_count + b.0) * self.action_count + a.0]
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn belief_count(&self) -> usize {
        self.belief_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    /// Pointwise minimum of two reward tables over identical dimensions.
    pub fn pointwise_min(&self, other: &BeliefReward) -> BeliefReward {
        assert_eq!(
            (self.state_count, self.belief_count, self.action_count),
            (other.state_count, other.belief_count, other.action_count),
            "reward tables must share dimensions"
        );
        BeliefReward {
            state_count: self.state_count,
            belief_count: self.belief_count,
            action_count: self.action_count,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| x.min(y))
                .collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// The derived MDP on `S x B`: transitions factor into the agent kernel
/// times the belief kernel, rewards come from the belief-induced reward,
/// and permissible sets are inherited from the agent state.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductMdp {
    mdp: Mdp,
    agent_state_count: usize,
    belief_count: usize,
}

impl ProductMdp {
    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn agent_state_count(&self) -> usize {
        self.agent_state_count
    }

    pub fn belief_count(&self) -> usize {
        self.belief_count
    }

    pub fn product_state_count(&self) -> usize {
        self.mdp.state_count()
    }

    pub fn action_count(&self) -> usize {
        self.mdp.action_count()
    }

    /// Product index of `(agent state, belief)`.
    pub fn product_index(&self, s: StateId, b: BeliefId) -> StateId {
        debug_assert!(s.0 < self.agent_state_count && b.0 < self.belief_count);
        StateId(s.0 * self.belief_count + b.0)
    }

    /// Inverse of [`ProductMdp::product_index`].
    pub fn split_index(&self, product: StateId) -> (StateId, BeliefId) {
        debug_assert!(product.0 < self.product_state_count());
        (
            StateId(product.0 / self.belief_count),
            BeliefId(product.0 % self.belief_count),
        )
    }
}

#[derive(Debug, Error)]
pub enum ProductError {
    #[error("agent MDP is invalid: {0}")]
    InvalidAgent(ValidationReport),
    #[error(
        "kernel/reward dimensions ({states} states, {beliefs} beliefs, {actions} actions) \
         do not match the agent MDP ({agent_states} states, {agent_actions} actions)"
    )]
    DimensionMismatch {
        states: usize,
        beliefs: usize,
        actions: usize,
        agent_states: usize,
        agent_actions: usize,
    },
    #[error("belief kernel has no row for state {state}, belief {belief}, action {action}")]
    MissingKernelRow {
        state: usize,
        belief: usize,
        action: usize,
    },
    #[error("reward at state {state}, belief {belief}, action {action} is not finite: {value}")]
    NonFiniteReward {
        state: usize,
        belief: usize,
        action: usize,
        value: f64,
    },
    #[error("product MDP failed validation: {0}")]
    InvalidProduct(ValidationReport),
}

/// Build the product MDP for a validated agent, a belief kernel, and a
/// belief-induced reward.
pub fn build_product_mdp(
    agent: &Mdp,
    kernel: &BeliefKernel,
    reward: &BeliefReward,
) -> Result<ProductMdp, ProductError> {
    let report = validate_mdp(agent);
    if !report.is_empty() {
        return Err(ProductError::InvalidAgent(report));
    }
    let dims_ok = kernel.state_count == agent.state_count()
        && kernel.action_count == agent.action_count()
        && reward.state_count == agent.state_count()
        && reward.action_count == agent.action_count()
        && reward.belief_count == kernel.belief_count;
    if !dims_ok {
        return Err(ProductError::DimensionMismatch {
            states: kernel.state_count,
            beliefs: kernel.belief_count,
            actions: kernel.action_count,
            agent_states: agent.state_count(),
            agent_actions: agent.action_count(),
        });
    }

    let beliefs = kernel.belief_count;
    let mut product = Mdp::new(agent.state_count() * beliefs, agent.action_count());
    for s in (0..agent.state_count()).map(StateId) {
        for a in agent.permissible(s) {
            let agent_row = agent.transitions(s, a);
            for b in (0..beliefs).map(BeliefId) {
                let belief_row = kernel.row(s, b, a).ok_or(ProductError::MissingKernelRow {
                    state: s.0,
                    belief: b.0,
                    action: a.0,
                })?;
                let value = reward.get(s, b, a);
                if !value.is_finite() {
                    return Err(ProductError::NonFiniteReward {
                        state: s.0,
                        belief: b.0,
                        action: a.0,
                        value,
                    });
                }
                let mut entries =
                    Vec::with_capacity(agent_row.entries().len() * belief_row.entries().len());
                for &(s2, p) in agent_row.entries() {
                    if p == 0.0 {
                        continue;
                    }
                    for &(b2, q) in belief_row.entries() {
                        if q == 0.0 {
                            continue;
                        }
                        entries.push((StateId(s2.0 * beliefs + b2.0), p * q));
                    }
                }
                product.add_action(
                    StateId(s.0 * beliefs + b.0),
                    a,
                    value,
                    Distribution::new(entries),
                );
            }
        }
    }

    let report = validate_mdp(&product);
    if !report.is_empty() {
        return Err(ProductError::InvalidProduct(report));
    }
    Ok(ProductMdp {
        mdp: product,
        agent_state_count: agent.state_count(),
        belief_count: beliefs,
    })
}

#[derive(Debug, Error)]
pub enum ForbiddenError {
    #[error("forbidden set names out-of-range agent state {state}")]
    StateOutOfRange { state: usize },
    #[error(
        "every action at product state {product_state} (agent state {agent_state}, belief \
         {belief}) enters a forbidden state"
    )]
    Infeasible {
        product_state: usize,
        agent_state: usize,
        belief: usize,
    },
}

/// Shrink permissible sets so no remaining action assigns positive
/// probability to entering a forbidden agent state.
///
/// Rows of forbidden states themselves are kept untouched; with the
/// start state outside the forbidden set they are unreachable. The
/// operation is idempotent. Masking that empties the permissible set of
/// a non-forbidden state is reported as infeasible, naming the state.
pub fn apply_forbidden_states(
    product: &ProductMdp,
    forbidden: &BTreeSet<StateId>,
) -> Result<ProductMdp, ForbiddenError> {
    for &s in forbidden {
        if s.0 >= product.agent_state_count {
            return Err(ForbiddenError::StateOutOfRange { state: s.0 });
        }
    }
    let enters_forbidden = |row: &Distribution| {
        row.entries().iter().any(|&(target, p)| {
            p > 0.0 && forbidden.contains(&StateId(target.0 / product.belief_count))
        })
    };

    let source = &product.mdp;
    let mut masked = Mdp::new(source.state_count(), source.action_count());
    for x in (0..source.state_count()).map(StateId) {
        let (agent_state, belief) = product.split_index(x);
        let exempt = forbidden.contains(&agent_state);
        let mut kept = 0usize;
        for a in source.permissible(x) {
            let row = source.transitions(x, a);
            if !exempt && enters_forbidden(row) {
                continue;
            }
            masked.add_action(x, a, source.reward(x, a), row.clone());
            kept += 1;
        }
        if kept == 0 && !exempt {
            return Err(ForbiddenError::Infeasible {
                product_state: x.0,
                agent_state: agent_state.0,
                belief: belief.0,
            });
        }
    }
    Ok(ProductMdp {
        mdp: masked,
        agent_state_count: product.agent_state_count,
        belief_count: product.belief_count,
    })
}

/// Agent-level variant of [`apply_forbidden_states`]: mask agent actions
/// that assign positive probability to a forbidden state. Useful before
/// robust planning, which builds its products internally.
pub fn apply_forbidden_agent_states(
    agent: &Mdp,
    forbidden: &BTreeSet<StateId>,
) -> Result<Mdp, ForbiddenError> {
    for &s in forbidden {
        if s.0 >= agent.state_count() {
            return Err(ForbiddenError::StateOutOfRange { state: s.0 });
        }
    }
    let mut masked = Mdp::new(agent.state_count(), agent.action_count());
    for s in (0..agent.state_count()).map(StateId) {
        let exempt = forbidden.contains(&s);
        let mut kept = 0usize;
        for a in agent.permissible(s) {
            let row = agent.transitions(s, a);
            let enters = row
                .entries()
                .iter()
                .any(|&(target, p)| p > 0.0 && forbidden.contains(&target));
            if !exempt && enters {
                continue;
            }
            masked.add_action(s, a, agent.reward(s, a), row.clone());
            kept += 1;
        }
        if kept == 0 && !exempt {
            return Err(ForbiddenError::Infeasible {
                product_state: s.0,
                agent_state: s.0,
                belief: 0,
            });
        }
    }
    Ok(masked)
}
