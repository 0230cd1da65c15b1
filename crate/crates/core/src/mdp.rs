//! Finite-state, finite-action, finite-horizon MDPs with exact
//! dynamic-programming planning and a brute-force enumeration oracle.
//!
//! The planning objective is the expected total reward
//! `E[sum_{t=0}^{T} R(s_t, a_t)]`: a horizon `T` run collects `T + 1`
//! stage rewards across `T` transitions. Every solver in this crate uses
//! that single timing convention.

use rand::Rng;
use thiserror::Error;

/// Tolerance used when checking that probability rows sum to one.
pub const PROB_TOL: f64 = 1e-9;

/// Tolerance for the backward-induction stationarity shortcut.
const STATIONARY_TOL: f64 = 1e-12;

/// Dense 0-based index newtypes share this conversion trait.
pub trait DenseIndex: Copy + Eq {
    fn index(self) -> usize;
    fn from_index(index: usize) -> Self;
}

macro_rules! dense_index {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub usize);

        impl DenseIndex for $name {
            fn index(self) -> usize {
                self.0
            }

            fn from_index(index: usize) -> Self {
                $name(index)
            }
        }
    };
}

dense_index!(
    /// Index into a state table; valid values are `< state_count`.
    StateId
);
dense_index!(
    /// Index into an action table; valid values are `< action_count`.
    ActionId
);

/// Sparse probability distribution over dense indices.
///
/// Entries are `(target, probability)` pairs. A well-formed distribution
/// has nonnegative probabilities summing to one within [`PROB_TOL`] and
/// no duplicate targets; [`validate_mdp`] reports violations rather than
/// rejecting them at construction time.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<I = StateId> {
    entries: Vec<(I, f64)>,
}

impl<I: DenseIndex> Distribution<I> {
    pub fn new(entries: Vec<(I, f64)>) -> Self {
        Distribution { entries }
    }

    pub fn point_mass(target: I) -> Self {
        Distribution {
            entries: vec![(target, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(I, f64)] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    /// Probability assigned to `target` (0 if absent).
    pub fn probability(&self, target: I) -> f64 {
        self.entries
            .iter()
            .filter(|&&(i, _)| i == target)
            .map(|&(_, p)| p)
            .sum()
    }

    /// Draw a target according to the entry weights, consuming one
    /// uniform variate from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> I {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(target, p) in &self.entries {
            acc += p;
            if u < acc {
                return target;
            }
        }
        // Rounding may leave acc slightly below 1; fall back to the last entry.
        self.entries
            .last()
            .map(|&(target, _)| target)
            .expect("cannot sample from an empty distribution")
    }
}

/// Finite MDP: states `0..state_count`, actions `0..action_count`, a
/// sparse stochastic kernel and a stage reward on the permissible
/// `(state, action)` pairs.
///
/// An action is permissible at a state iff a transition row was added
/// for it; states keep their permissible sets nonempty in a valid MDP.
#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    state_count: usize,
    action_count: usize,
    rows: Vec<Option<ActionRow>>,
}

#[derive(Clone, Debug, PartialEq)]
struct ActionRow {
    reward: f64,
    transitions: Distribution,
}

impl Mdp {
    /// Create an MDP with no permissible actions; populate with
    /// [`Mdp::add_action`].
    pub fn new(state_count: usize, action_count: usize) -> Self {
        Mdp {
            state_count,
            action_count,
            rows: vec![None; state_count * action_count],
        }
    }

    /// Mark `action` permissible at `state` with the given stage reward
    /// and transition distribution, replacing any previous row.
    pub fn add_action(
        &mut self,
        state: StateId,
        action: ActionId,
        reward: f64,
        transitions: Distribution,
    ) {
        let slot = self.slot(state, action);
        self.rows[slot] = Some(ActionRow {
            reward,
            transitions,
        });
    }

    fn slot(&self, state: StateId, action: ActionId) -> usize {
        assert!(state.0 < self.state_count, "state {} out of range", state.0);
        assert!(
            action.0 < self.action_count,
            "action {} out of range",
            action.0
        );
        state.0 * self.action_count + action.0
    }

    fn row(&self, state: StateId, action: ActionId) -> Option<&ActionRow> {
        self.rows[self.slot(state, action)].as_ref()
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn is_permissible(&self, state: StateId, action: ActionId) -> bool {
        self.row(state, action).is_some()
    }

    /// Permissible actions at `state` in ascending id order.
    pub fn permissible(&self, state: StateId) -> impl Iterator<Item = ActionId> + '_ {
        (0..self.action_count)
            .map(ActionId)
            .filter(move |&a| self.is_permissible(state, a))
    }

    /// Stage reward for a permissible pair; panics otherwise.
    pub fn reward(&self, state: StateId, action: ActionId) -> f64 {
        self.row(state, action)
            .unwrap_or_else(|| panic!("action {} not permissible at state {}", action.0, state.0))
            .reward
    }

    /// Transition row for a permissible pair; panics otherwise.
    pub fn transitions(&self, state: StateId, action: ActionId) -> &Distribution {
        &self
            .row(state, action)
            .unwrap_or_else(|| panic!("action {} not permissible at state {}", action.0, state.0))
            .transitions
    }
}

/// A single invariant violation found by [`validate_mdp`].
#[derive(Clone, Debug, PartialEq)]
pub enum ValidationIssue {
    RowSum {
        state: StateId,
        action: ActionId,
        sum: f64,
    },
    NegativeProbability {
        state: StateId,
        action: ActionId,
        target: StateId,
        probability: f64,
    },
    DuplicateTarget {
        state: StateId,
        action: ActionId,
        target: StateId,
    },
    TargetOutOfRange {
        state: StateId,
        action: ActionId,
        target: StateId,
    },
    NonFiniteReward {
        state: StateId,
        action: ActionId,
        reward: f64,
    },
    NoPermissibleAction {
        state: StateId,
    },
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValidationIssue::RowSum { state, action, sum } => write!(
                f,
                "transition row ({}, {}) sums to {sum} instead of 1",
                state.0, action.0
            ),
            ValidationIssue::NegativeProbability {
                state,
                action,
                target,
                probability,
            } => write!(
                f,
                "transition ({}, {}) -> {} has negative probability {probability}",
                state.0, action.0, target.0
            ),
            ValidationIssue::DuplicateTarget {
                state,
                action,
                target,
            } => write!(
                f,
                "transition row ({}, {}) lists target {} twice",
                state.0, action.0, target.0
            ),
            ValidationIssue::TargetOutOfRange {
                state,
                action,
                target,
            } => write!(
                f,
                "transition row ({}, {}) targets out-of-range state {}",
                state.0, action.0, target.0
            ),
            ValidationIssue::NonFiniteReward {
                state,
                action,
                reward,
            } => write!(
                f,
                "reward ({}, {}) is not finite: {reward}",
                state.0, action.0
            ),
            ValidationIssue::NoPermissibleAction { state } => {
                write!(f, "state {} has no permissible action", state.0)
            }
        }
    }
}

/// Violations found by [`validate_mdp`]; empty means the MDP is valid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn issues(&self) -> &[ValidationIssue] {
        &self.issues
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "no violations");
        }
        write!(f, "{} violation(s): ", self.issues.len())?;
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Check every distribution and permissibility invariant, returning the
/// violations as data.
pub fn validate_mdp(mdp: &Mdp) -> ValidationReport {
    let mut issues = Vec::new();
    for s in (0..mdp.state_count).map(StateId) {
        let mut any = false;
        for a in (0..mdp.action_count).map(ActionId) {
            let Some(row) = mdp.row(s, a) else { continue };
            any = true;
            if !row.reward.is_finite() {
                issues.push(ValidationIssue::NonFiniteReward {
                    state: s,
                    action: a,
                    reward: row.reward,
                });
            }
            let mut seen = vec![false; mdp.state_count];
            for &(target, p) in row.transitions.entries() {
                if target.0 >= mdp.state_count {
                    issues.push(ValidationIssue::TargetOutOfRange {
                        state: s,
                        action: a,
                        target,
                    });
                    continue;
                }
                if seen[target.0] {
                    issues.push(ValidationIssue::DuplicateTarget {
                        state: s,
                        action: a,
                        target,
                    });
                }
                seen[target.0] = true;
                if p < 0.0 || !p.is_finite() {
                    issues.push(ValidationIssue::NegativeProbability {
                        state: s,
                        action: a,
                        target,
                        probability: p,
                    });
                }
            }
            let sum = row.transitions.total();
            if (sum - 1.0).abs() > PROB_TOL {
                issues.push(ValidationIssue::RowSum {
                    state: s,
                    action: a,
                    sum,
                });
            }
        }
        if !any {
            issues.push(ValidationIssue::NoPermissibleAction { state: s });
        }
    }
    ValidationReport { issues }
}

/// Time-indexed deterministic policy: one action per `(t, state)` for
/// `t` in `0..=horizon`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Policy {
    table: Vec<Vec<ActionId>>,
}

impl Policy {
    /// Build from explicit rows; `rows[t][s]` is the action at stage `t`.
    pub fn from_rows(rows: Vec<Vec<ActionId>>) -> Self {
        assert!(!rows.is_empty(), "policy needs at least one stage row");
        let width = rows[0].len();
        assert!(
            rows.iter().all(|r| r.len() == width),
            "policy rows must have equal width"
        );
        Policy { table: rows }
    }

    pub fn horizon(&self) -> usize {
        self.table.len() - 1
    }

    pub fn state_count(&self) -> usize {
        self.table[0].len()
    }

    pub fn action(&self, t: usize, state: StateId) -> ActionId {
        self.table[t][state.0]
    }

    pub fn rows(&self) -> &[Vec<ActionId>] {
        &self.table
    }
}

/// Optimal values per `(t, state)` for `t` in `0..=horizon + 1`; the
/// final row is identically zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    values: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.values.len() - 2
    }

    pub fn value(&self, t: usize, state: StateId) -> f64 {
        self.values[t][state.0]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// Default enumeration budget for [`brute_force_plan`].
pub const DEFAULT_POLICY_BUDGET: u128 = 10_000_000;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("invalid MDP: {0}")]
    Invalid(ValidationReport),
    #[error("policy horizon {policy} is shorter than the requested horizon {requested}")]
    HorizonMismatch { policy: usize, requested: usize },
    #[error("policy selects impermissible action {action} at state {state}")]
    ImpermissibleAction { state: usize, action: usize },
    #[error("enumeration of {required} policies exceeds the budget {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
}

/// Exact finite-horizon planning by backward induction.
///
/// Returns the optimal policy and value table for the total-reward
/// objective over `horizon + 1` stages. Ties are broken toward the
/// lowest action id, so identical inputs produce identical tables.
pub fn backward_induction(mdp: &Mdp, horizon: usize) -> Result<(Policy, ValueTable), MdpError> {
    let report = validate_mdp(mdp);
    if !report.is_empty() {
        return Err(MdpError::Invalid(report));
    }
    Ok(plan_stages(&[mdp], horizon))
}

/// Backward induction with a stagewise worst case over several kernels.
///
/// All MDPs must share state/action counts, permissible sets, and
/// rewards; only the transition kernels may differ. With a single MDP
/// this is ordinary backward induction. If two consecutive stages agree
/// (identical policy row, value rows within 1e-12) the remaining stages
/// are filled by copying, since each stage is a deterministic function
/// of the next.
pub(crate) fn plan_stages(mdps: &[&Mdp], horizon: usize) -> (Policy, ValueTable) {
    assert!(!mdps.is_empty(), "need at least one kernel");
    let lead = mdps[0];
    let n = lead.state_count();
    debug_assert!(mdps
        .iter()
        .all(|m| m.state_count() == n && m.action_count() == lead.action_count()));

    let mut values = vec![vec![0.0; n]; horizon + 2];
    let mut policy = vec![vec![ActionId(0); n]; horizon + 1];

    for t in (0..=horizon).rev() {
        let (done, tail) = values.split_at_mut(t + 1);
        let row = &mut done[t];
        let next = &tail[0];
        for s in (0..n).map(StateId) {
            let mut best: Option<(ActionId, f64)> = None;
            for a in lead.permissible(s) {
                let reward = lead.reward(s, a);
                let mut q = f64::INFINITY;
                for mdp in mdps {
                    let mut expect = 0.0;
                    for &(target, p) in mdp.transitions(s, a).entries() {
                        expect += p * next[target.0];
                    }
                    let candidate = reward + expect;
                    if candidate < q {
                        q = candidate;
                    }
                }
                if best.is_none_or(|(_, b)| q > b) {
                    best = Some((a, q));
                }
            }
            let (a, q) = best.expect("validated MDPs have nonempty permissible sets");
            policy[t][s.0] = a;
            row[s.0] = q;
        }
        if t < horizon
            && policy[t] == policy[t + 1]
            && rows_within(&values[t], &values[t + 1], STATIONARY_TOL)
        {
            let value_row = values[t].clone();
            let policy_row = policy[t].clone();
            for t2 in 0..t {
                values[t2] = value_row.clone();
                policy[t2] = policy_row.clone();
            }
            break;
        }
    }

    (Policy::from_rows(policy), ValueTable { values })
}

fn rows_within(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Exact expected total reward of `policy` over `horizon + 1` stages by
/// forward propagation of the state distribution (no sampling).
pub fn evaluate_policy(
    mdp: &Mdp,
    policy: &Policy,
    horizon: usize,
    start: StateId,
) -> Result<f64, MdpError> {
    if policy.horizon() < horizon {
        return Err(MdpError::HorizonMismatch {
            policy: policy.horizon(),
            requested: horizon,
        });
    }
    let n = mdp.state_count();
    let mut dist = vec![0.0; n];
    dist[start.0] = 1.0;
    let mut total = 0.0;
    for t in 0..=horizon {
        let mut next = vec![0.0; n];
        for s in (0..n).map(StateId) {
            let mass = dist[s.0];
            if mass == 0.0 {
                continue;
            }
            let a = policy.action(t, s);
            if !mdp.is_permissible(s, a) {
                return Err(MdpError::ImpermissibleAction {
                    state: s.0,
                    action: a.0,
                });
            }
            total += mass * mdp.reward(s, a);
            if t < horizon {
                for &(target, p) in mdp.transitions(s, a).entries() {
                    next[target.0] += mass * p;
                }
            }
        }
        if t < horizon {
            dist = next;
        }
    }
    Ok(total)
}

/// Optimal expected total reward from `start` by exhaustive enumeration
/// of every time-dependent deterministic policy, with the default
/// budget of [`DEFAULT_POLICY_BUDGET`] policies.
pub fn brute_force_plan(mdp: &Mdp, horizon: usize, start: StateId) -> Result<f64, MdpError> {
    brute_force_plan_with_budget(mdp, horizon, start, DEFAULT_POLICY_BUDGET)
}

/// [`brute_force_plan`] with an explicit policy budget.
pub fn brute_force_plan_with_budget(
    mdp: &Mdp,
    horizon: usize,
    start: StateId,
    budget: u128,
) -> Result<f64, MdpError> {
    let report = validate_mdp(mdp);
    if !report.is_empty() {
        return Err(MdpError::Invalid(report));
    }

    let n = mdp.state_count();
    let choices: Vec<Vec<ActionId>> = (0..n)
        .map(|s| mdp.permissible(StateId(s)).collect())
        .collect();

    let mut required: u128 = 1;
    for _t in 0..=horizon {
        for options in &choices {
            required = required.saturating_mul(options.len() as u128);
        }
    }
    if required > budget {
        return Err(MdpError::BudgetExceeded { required, budget });
    }

    // Odometer over one digit per (t, state) cell.
    let cells = (horizon + 1) * n;
    let mut digits = vec![0usize; cells];
    let mut best = f64::NEG_INFINITY;
    let mut dist = vec![0.0; n];
    let mut next = vec![0.0; n];
    loop {
        dist.fill(0.0);
        dist[start.0] = 1.0;
        let mut total = 0.0;
        for t in 0..=horizon {
            next.fill(0.0);
            for s in (0..n).map(StateId) {
                let mass = dist[s.0];
                if mass == 0.0 {
                    continue;
                }
                let a = choices[s.0][digits[t * n + s.0]];
                total += mass * mdp.reward(s, a);
                if t < horizon {
                    for &(target, p) in mdp.transitions(s, a).entries() {
                        next[target.0] += mass * p;
                    }
                }
            }
            if t < horizon {
                std::mem::swap(&mut dist, &mut next);
            }
        }
        if total > best {
            best = total;
        }

        let mut cell = 0;
        loop {
            if cell == cells {
                return Ok(best);
            }
            digits[cell] += 1;
            if digits[cell] < choices[cell % n].len() {
                break;
            }
            digits[cell] = 0;
            cell += 1;
        }
    }
}
