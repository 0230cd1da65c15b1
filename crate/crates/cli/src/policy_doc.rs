//! Serialized policy document: a JSON file holding the horizon, the
//! product-state index maps, and the full `(t, product state) -> action`
//! table, so a planned policy can be reloaded and re-simulated.

use deceptive_planning::mdp::{ActionId, Policy, ValueTable};
use deceptive_planning::scenarios::{GridCell, GridDims, ScenarioBundle};
use deceptive_planning::BeliefId;
use serde::{Deserialize, Serialize};

pub const POLICY_FORMAT: &str = "deceptive-planner-policy-v1";
pub const PRODUCT_INDEXING: &str = "product = agent_state * belief_count + belief";

#[derive(Debug, Serialize, Deserialize)]
pub struct PolicyDoc {
    pub format: String,
    pub scenario_kind: String,
    pub planner: String,
    pub horizon: usize,
    pub grid: GridDims,
    pub belief_count: usize,
    pub product_state_count: usize,
    pub action_count: usize,
    pub actions: Vec<String>,
    pub indexing: String,
    pub product_to_agent_state: Vec<usize>,
    pub product_to_belief: Vec<usize>,
    pub start_cell: GridCell,
    /// Optimal value at the start cell for each initial belief.
    pub value_at_start: Vec<f64>,
    pub table: Vec<Vec<usize>>,
}

impl PolicyDoc {
    pub fn from_plan(
        bundle: &ScenarioBundle,
        planner: &str,
        horizon: usize,
        policy: &Policy,
        values: &ValueTable,
    ) -> Self {
        let beliefs = bundle.belief_count;
        let product_states = bundle.agent.state_count() * beliefs;
        let value_at_start = (0..beliefs)
            .map(|b| values.value(0, bundle.product_index(bundle.start(), BeliefId(b))))
            .collect();
        PolicyDoc {
            format: POLICY_FORMAT.to_string(),
            scenario_kind: bundle.kind.label().to_string(),
            planner: planner.to_string(),
            horizon,
            grid: GridDims {
                w: bundle.width,
                h: bundle.height,
            },
            belief_count: beliefs,
            product_state_count: product_states,
            action_count: bundle.agent.action_count(),
            actions: bundle.action_labels.clone(),
            indexing: PRODUCT_INDEXING.to_string(),
            product_to_agent_state: (0..product_states).map(|x| x / beliefs).collect(),
            product_to_belief: (0..product_states).map(|x| x % beliefs).collect(),
            start_cell: bundle.start_cell,
            value_at_start,
            table: policy
                .rows()
                .iter()
                .map(|row| row.iter().map(|a| a.0).collect())
                .collect(),
        }
    }

    /// Check the document against the scenario it is simulated on.
    pub fn validate_against(&self, bundle: &ScenarioBundle) -> Result<(), String> {
        if self.format != POLICY_FORMAT {
            return Err(format!("unsupported policy format `{}`", self.format));
        }
        if self.scenario_kind != bundle.kind.label() {
            return Err(format!(
                "policy was planned for a `{}` scenario, not `{}`",
                self.scenario_kind,
                bundle.kind.label()
            ));
        }
        let expected_states = bundle.agent.state_count() * bundle.belief_count;
        if self.product_state_count != expected_states
            || self.belief_count != bundle.belief_count
            || self.action_count != bundle.agent.action_count()
        {
            return Err(format!(
                "policy shape ({} product states, {} beliefs, {} actions) does not match the \
                 scenario ({} product states, {} beliefs, {} actions)",
                self.product_state_count,
                self.belief_count,
                self.action_count,
                expected_states,
                bundle.belief_count,
                bundle.agent.action_count()
            ));
        }
        if self.table.len() != self.horizon + 1 {
            return Err(format!(
                "policy table has {} rows for horizon {}",
                self.table.len(),
                self.horizon
            ));
        }
        for row in &self.table {
            if row.len() != self.product_state_count {
                return Err("policy table row width does not match the product state count".into());
            }
            if let Some(&bad) = row.iter().find(|&&a| a >= self.action_count) {
                return Err(format!("policy table names out-of-range action {bad}"));
            }
        }
        Ok(())
    }

    pub fn to_policy(&self) -> Policy {
        Policy::from_rows(
            self.table
                .iter()
                .map(|row| row.iter().map(|&a| ActionId(a)).collect())
                .collect(),
        )
    }
}
