//! Deception planners: full-knowledge optimal planning, planning
//! without belief observations, and robust planning under uncertain
//! belief dynamics or uncertain rewards.
//!
//! The robust-dynamics planner treats the adversary as free to pick a
//! different kernel from the uncertainty set at every stage, which
//! makes robust backward induction exact:
//! `V_t(x) = max_a min_{f in F} [L(x, a) + sum_y P_f(x, a, y) V_{t+1}(y)]`.
//! For interval families whose kernel entries are affine in the
//! parameter, the inner minimum is attained at an endpoint, so only the
//! two endpoint kernels are evaluated.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::belief::{
    build_product_mdp, BeliefId, BeliefKernel, BeliefReward, ProductError, ProductMdp,
};
use crate::mdp::{plan_stages, ActionId, Mdp, MdpError, Policy, StateId, ValueTable};

/// Tolerance for the three-point affinity check on interval families.
pub const AFFINE_TOL: f64 = 1e-9;

/// Tracked probability distribution over the adversary's beliefs,
/// maintained when beliefs cannot be observed.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefDistribution {
    probabilities: Vec<f64>,
}

impl BeliefDistribution {
    /// All beliefs equally likely.
    pub fn uniform(belief_count: usize) -> Self {
        assert!(belief_count > 0, "belief set must be nonempty");
        BeliefDistribution {
            probabilities: vec![1.0 / belief_count as f64; belief_count],
        }
    }

    /// Certainty that the belief is `belief`.
    pub fn point_mass(belief_count: usize, belief: BeliefId) -> Self {
        assert!(belief.0 < belief_count);
        let mut probabilities = vec![0.0; belief_count];
        probabilities[belief.0] = 1.0;
        BeliefDistribution { probabilities }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Draw a belief, consuming one uniform variate from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BeliefId {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (b, &p) in self.probabilities.iter().enumerate() {
            if p > 0.0 {
                last_positive = b;
            }
            acc += p;
            if u < acc {
                return BeliefId(b);
            }
        }
        BeliefId(last_positive)
    }

    fn normalize(&mut self) {
        let total: f64 = self.probabilities.iter().sum();
        assert!(total > 0.0, "belief distribution lost all mass");
        for p in &mut self.probabilities {
            *p /= total;
        }
    }
}

/// Advance a tracked belief distribution through the learning rule:
/// `Pr'(B) = sum_{B'} Pr(B') f(s, B', a, B)` for the state `s` occupied
/// and action `a` taken at the current step.
pub fn update_belief_distribution(
    pr: &BeliefDistribution,
    state: StateId,
    action: ActionId,
    kernel: &BeliefKernel,
) -> BeliefDistribution {
    assert_eq!(pr.len(), kernel.belief_count(), "belief count mismatch");
    let mut next = vec![0.0; pr.len()];
    for (b, &mass) in pr.probabilities.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let row = kernel
            .row(state, BeliefId(b), action)
            .expect("belief kernel row missing for a permissible action");
        for &(target, p) in row.entries() {
            next[target.0] += mass * p;
        }
    }
    let mut out = BeliefDistribution {
        probabilities: next,
    };
    out.normalize();
    out
}

/// Full-knowledge optimal deception: backward induction on the product
/// MDP. The policy is memoryless in `(state, belief, t)`.
pub fn plan_optimal_deception(
    product: &ProductMdp,
    horizon: usize,
) -> Result<(Policy, ValueTable), MdpError> {
    crate::mdp::backward_induction(product.mdp(), horizon)
}

#[derive(Debug, Error)]
pub enum RobustError {
    #[error("kernel family has no members")]
    EmptyKernelFamily,
    #[error("reward family has no members")]
    EmptyRewardFamily,
    #[error(
        "interval family is not affine in `{parameter}`: entry (state {state}, belief {belief}, \
         action {action} -> belief {target}) fails the midpoint check by {deviation}"
    )]
    NotAffine {
        parameter: String,
        state: usize,
        belief: usize,
        action: usize,
        target: usize,
        deviation: f64,
    },
    #[error(
        "interval family members disagree on row presence at (state {state}, belief {belief}, \
         action {action})"
    )]
    RowPresenceMismatch {
        state: usize,
        belief: usize,
        action: usize,
    },
    #[error(
        "reward family is unbounded below at (state {state}, belief {belief}, action {action}): \
         infimum {value}"
    )]
    UnboundedReward {
        state: usize,
        belief: usize,
        action: usize,
        value: f64,
    },
    #[error(transparent)]
    Product(#[from] ProductError),
    #[error(transparent)]
    Plan(#[from] MdpError),
}

/// Interval family of belief kernels generated from a scalar parameter,
/// with every kernel entry affine in that parameter.
#[derive(Clone)]
pub struct AffineIntervalFamily {
    parameter: String,
    low: f64,
    high: f64,
    generator: Arc<dyn Fn(f64) -> BeliefKernel + Send + Sync>,
}

impl std::fmt::Debug for AffineIntervalFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AffineIntervalFamily")
            .field("parameter", &self.parameter)
            .field("low", &self.low)
            .field("high", &self.high)
            .finish_non_exhaustive()
    }
}

impl AffineIntervalFamily {
    pub fn parameter(&self) -> &str {
        &self.parameter
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    /// Kernel at an arbitrary parameter value inside the interval.
    pub fn kernel_at(&self, value: f64) -> BeliefKernel {
        (self.generator)(value)
    }
}

/// Uncertainty set of belief kernels: either an explicit finite list or
/// a parametric interval family declared affine in its parameter.
#[derive(Clone, Debug)]
pub enum KernelFamily {
    Finite(Vec<BeliefKernel>),
    AffineInterval(AffineIntervalFamily),
}

impl KernelFamily {
    pub fn finite(members: Vec<BeliefKernel>) -> Self {
        KernelFamily::Finite(members)
    }

    /// Declare an interval family. The declaration is verified by a
    /// three-point collinearity check: every kernel entry at the
    /// midpoint must equal the mean of the endpoint entries.
    pub fn affine_interval(
        parameter: impl Into<String>,
        low: f64,
        high: f64,
        generator: impl Fn(f64) -> BeliefKernel + Send + Sync + 'static,
    ) -> Result<Self, RobustError> {
        assert!(low <= high, "interval bounds out of order");
        let family = AffineIntervalFamily {
            parameter: parameter.into(),
            low,
            high,
            generator: Arc::new(generator),
        };
        verify_affine(&family)?;
        Ok(KernelFamily::AffineInterval(family))
    }

    /// The kernels robust backward induction minimizes over: the finite
    /// members, or the two endpoint kernels of an interval family.
    pub fn member_kernels(&self) -> Result<Vec<BeliefKernel>, RobustError> {
        match self {
            KernelFamily::Finite(members) => {
                if members.is_empty() {
                    Err(RobustError::EmptyKernelFamily)
                } else {
                    Ok(members.clone())
                }
            }
            KernelFamily::AffineInterval(family) => Ok(vec![
                family.kernel_at(family.low),
                family.kernel_at(family.high),
            ]),
        }
    }
}

fn verify_affine(family: &AffineIntervalFamily) -> Result<(), RobustError> {
    let low = family.kernel_at(family.low);
    let mid = family.kernel_at(0.5 * (family.low + family.high));
    let high = family.kernel_at(family.high);
    let (sc, bc, ac) = (low.state_count(), low.belief_count(), low.action_count());
    for s in (0..sc).map(StateId) {
        for b in (0..bc).map(BeliefId) {
            for a in (0..ac).map(ActionId) {
                let rows = [low.row(s, b, a), mid.row(s, b, a), high.row(s, b, a)];
                let present = rows.iter().filter(|r| r.is_some()).count();
                if present == 0 {
                    continue;
                }
                if present != 3 {
                    return Err(RobustError::RowPresenceMismatch {
                        state: s.0,
                        belief: b.0,
                        action: a.0,
                    });
                }
                let [row_low, row_mid, row_high] = rows.map(|r| r.unwrap());
                for t in (0..bc).map(BeliefId) {
                    let expected = 0.5 * (row_low.probability(t) + row_high.probability(t));
                    let deviation = (row_mid.probability(t) - expected).abs();
                    if deviation > AFFINE_TOL {
                        return Err(RobustError::NotAffine {
                            parameter: family.parameter.clone(),
                            state: s.0,
                            belief: b.0,
                            action: a.0,
                            target: t.0,
                            deviation,
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Robust optimal deception under uncertain belief dynamics: stagewise
/// worst case over the kernel family.
pub fn plan_robust_dynamics(
    agent: &Mdp,
    family: &KernelFamily,
    reward: &BeliefReward,
    horizon: usize,
) -> Result<(Policy, ValueTable), RobustError> {
    let kernels = family.member_kernels()?;
    let products = kernels
        .iter()
        .map(|kernel| build_product_mdp(agent, kernel, reward))
        .collect::<Result<Vec<_>, _>>()?;
    let mdps: Vec<&Mdp> = products.iter().map(|p| p.mdp()).collect();
    Ok(plan_stages(&mdps, horizon))
}

/// Uncertainty set of belief-induced rewards, summarized per triple by
/// its infimum.
#[derive(Clone, Debug)]
pub enum RewardFamily {
    Finite(Vec<BeliefReward>),
    Interval {
        low: BeliefReward,
        high: BeliefReward,
    },
}

impl RewardFamily {
    /// Pointwise infimum over the family; errors if any triple is
    /// unbounded below.
    pub fn infimum(&self) -> Result<BeliefReward, RobustError> {
        let inf = match self {
            RewardFamily::Finite(members) => {
                let mut iter = members.iter();
                let first = iter.next().ok_or(RobustError::EmptyRewardFamily)?;
                iter.fold(first.clone(), |acc, member| acc.pointwise_min(member))
            }
            RewardFamily::Interval { low, .. } => low.clone(),
        };
        let (bc, ac) = (inf.belief_count(), inf.action_count());
        for (i, &value) in inf.values().iter().enumerate() {
            if !value.is_finite() {
                return Err(RobustError::UnboundedReward {
                    state: i / (bc * ac),
                    belief: (i / ac) % bc,
                    action: i % ac,
                    value,
                });
            }
        }
        Ok(inf)
    }
}

/// Robust optimal deception under uncertain rewards: plan against the
/// pointwise infimum of the reward family. The returned policy is the
/// full-knowledge optimal policy of the infimum product.
pub fn plan_robust_rewards(
    agent: &Mdp,
    kernel: &BeliefKernel,
    family: &RewardFamily,
    horizon: usize,
) -> Result<(Policy, ValueTable), RobustError> {
    let inf = family.infimum()?;
    let product = build_product_mdp(agent, kernel, &inf)?;
    Ok(plan_optimal_deception(&product, horizon)?)
}

/// Action-selection mode for [`NoObsController`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum NoObsMode {
    /// Sample a belief from the tracked distribution and play the
    /// full-observation optimal action for it (the default).
    Randomized,
    /// Play `argmax_a sum_B Pr(B) Q_t(s, B, a)` deterministically.
    WeightedArgmax,
}

/// Runtime controller for deception without belief observations.
///
/// Wraps a full-observation plan and a tracked belief distribution.
/// One controller drives one simulated run: call [`NoObsController::act`]
/// to choose the action at the current step, then
/// [`NoObsController::advance`] with the chosen action to move the
/// distribution to the next step.
#[derive(Clone, Debug)]
pub struct NoObsController<'a> {
    product: &'a ProductMdp,
    kernel: &'a BeliefKernel,
    policy: &'a Policy,
    values: &'a ValueTable,
    pr: BeliefDistribution,
    mode: NoObsMode,
}

impl<'a> NoObsController<'a> {
    pub fn new(
        product: &'a ProductMdp,
        kernel: &'a BeliefKernel,
        policy: &'a Policy,
        values: &'a ValueTable,
        initial: BeliefDistribution,
        mode: NoObsMode,
    ) -> Self {
        assert_eq!(policy.state_count(), product.product_state_count());
        assert_eq!(kernel.belief_count(), product.belief_count());
        assert_eq!(initial.len(), product.belief_count());
        NoObsController {
            product,
            kernel,
            policy,
            values,
            pr: initial,
            mode,
        }
    }

    /// Controller initialized with the uniform prior.
    pub fn uniform(
        product: &'a ProductMdp,
        kernel: &'a BeliefKernel,
        policy: &'a Policy,
        values: &'a ValueTable,
        mode: NoObsMode,
    ) -> Self {
        let initial = BeliefDistribution::uniform(product.belief_count());
        NoObsController::new(product, kernel, policy, values, initial, mode)
    }

    pub fn belief_distribution(&self) -> &BeliefDistribution {
        &self.pr
    }

    pub fn mode(&self) -> NoObsMode {
        self.mode
    }

    /// Choose the action at agent state `s` and stage `t`. Randomized
    /// mode consumes one uniform variate from `rng`; weighted-argmax
    /// mode consumes none.
    pub fn act<R: Rng + ?Sized>(&self, s: StateId, t: usize, rng: &mut R) -> ActionId {
        debug_assert!(t <= self.policy.horizon());
        match self.mode {
            NoObsMode::Randomized => {
                let b = self.pr.sample(rng);
                self.policy.action(t, self.product.product_index(s, b))
            }
            NoObsMode::WeightedArgmax => {
                let mdp = self.product.mdp();
                let next = &self.values.rows()[t + 1];
                let probe = self.product.product_index(s, BeliefId(0));
                let mut best: Option<(ActionId, f64)> = None;
                for a in mdp.permissible(probe) {
                    let mut weighted = 0.0;
                    for (b, &mass) in self.pr.probabilities().iter().enumerate() {
                        if mass == 0.0 {
                            continue;
                        }
                        let x = self.product.product_index(s, BeliefId(b));
                        let mut expect = 0.0;
                        for &(target, p) in mdp.transitions(x, a).entries() {
                            expect += p * next[target.0];
                        }
                        weighted += mass * (mdp.reward(x, a) + expect);
                    }
                    if best.is_none_or(|(_, q)| weighted > q) {
                        best = Some((a, weighted));
                    }
                }
                best.expect("product states have nonempty permissible sets")
                    .0
            }
        }
    }

    /// Advance the tracked distribution after taking `action` at agent
    /// state `state`.
    pub fn advance(&mut self, state: StateId, action: ActionId) {
        self.pr = update_belief_distribution(&self.pr, state, action, self.kernel);
    }

    /// Override for steps where the belief is actually observed: reset
    /// the distribution to the indicator of `belief`.
    pub fn observe_belief(&mut self, belief: BeliefId) {
        self.pr = BeliefDistribution::point_mass(self.pr.len(), belief);
    }
}
