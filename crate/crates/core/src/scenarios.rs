//! Scenario builders: cops-and-deceptive-robbers and camouflage
//! gridworlds, assembled as (agent MDP, belief kernel, belief reward,
//! nominal policy) bundles from declarative JSON-friendly configs.
//!
//! Grid cells are addressed `(col, row)` with row 0 at the bottom; cell
//! `(c, r)` maps to agent state `r * width + c`. Movement is
//! deterministic and edge moves are masked rather than penalized.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{BeliefId, BeliefKernel, BeliefReward, ProductError, ProductMdp};
use crate::mdp::{ActionId, Distribution, Mdp, Policy, StateId};

/// Grid cell. Serializes as `[col, row]`.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct GridCell {
    pub col: usize,
    pub row: usize,
}

impl GridCell {
    pub fn new(col: usize, row: usize) -> Self {
        GridCell { col, row }
    }
}

impl From<(usize, usize)> for GridCell {
    fn from((col, row): (usize, usize)) -> Self {
        GridCell { col, row }
    }
}

impl From<GridCell> for (usize, usize) {
    fn from(cell: GridCell) -> Self {
        (cell.col, cell.row)
    }
}

/// 1-norm distance between two cells.
pub fn taxicab_distance(u: GridCell, v: GridCell) -> usize {
    u.col.abs_diff(v.col) + u.row.abs_diff(v.row)
}

/// Movement component of an action. North increases the row index.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Move {
    North,
    South,
    West,
    East,
    Stay,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::North, Move::South, Move::West, Move::East, Move::Stay];

    pub fn index(self) -> usize {
        match self {
            Move::North => 0,
            Move::South => 1,
            Move::West => 2,
            Move::East => 3,
            Move::Stay => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Move::North => "north",
            Move::South => "south",
            Move::West => "west",
            Move::East => "east",
            Move::Stay => "stay",
        }
    }

    /// Destination cell, or `None` if the move leaves the grid.
    pub fn apply(self, cell: GridCell, width: usize, height: usize) -> Option<GridCell> {
        let (col, row) = (cell.col, cell.row);
        let target = match self {
            Move::North => (col, row.checked_add(1).filter(|&r| r < height)?),
            Move::South => (col, row.checked_sub(1)?),
            Move::West => (col.checked_sub(1)?, row),
            Move::East => (col.checked_add(1).filter(|&c| c < width)?, row),
            Move::Stay => (col, row),
        };
        Some(GridCell::new(target.0, target.1))
    }
}

/// Grid dimensions as they appear in scenario configs.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub w: usize,
    pub h: usize,
}

/// The adversary's belief at the start of a run.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialBelief {
    /// Drawn uniformly at random from the run's seeded stream.
    #[default]
    Uniform,
    /// A fixed belief index.
    Fixed(usize),
}

fn default_reward_plus() -> f64 {
    10.0
}

fn default_reward_minus() -> f64 {
    -10.0
}

/// Cops-and-deceptive-robbers configuration.
///
/// The adversary knows the candidate goal cells but not which one is
/// true; its belief is a goal index updated by the closer-set rule with
/// learning parameter `p`. Reaching the true goal pays `reward_plus`
/// while the adversary believes in a false goal and `reward_minus` once
/// it believes in the true one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CopsConfig {
    pub grid: GridDims,
    pub start: GridCell,
    pub goals: Vec<GridCell>,
    pub true_goal: usize,
    pub p: f64,
    #[serde(default = "default_reward_plus")]
    pub reward_plus: f64,
    #[serde(default = "default_reward_minus")]
    pub reward_minus: f64,
    #[serde(default)]
    pub initial_belief: InitialBelief,
}

impl CopsConfig {
    /// The 8x8 layout used throughout: start at the top-left corner,
    /// true goal (5,4), false goals (6,5) and (4,3).
    pub fn reference_layout() -> Self {
        CopsConfig {
            grid: GridDims { w: 8, h: 8 },
            start: GridCell::new(0, 7),
            goals: vec![
                GridCell::new(5, 4),
                GridCell::new(6, 5),
                GridCell::new(4, 3),
            ],
            true_goal: 0,
            p: 0.1,
            reward_plus: default_reward_plus(),
            reward_minus: default_reward_minus(),
            initial_belief: InitialBelief::Uniform,
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_reward_plus(mut self, reward_plus: f64) -> Self {
        self.reward_plus = reward_plus;
        self
    }

    pub fn true_goal_cell(&self) -> GridCell {
        self.goals[self.true_goal]
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        check_grid(self.grid)?;
        check_cell(self.start, self.grid)?;
        if self.goals.is_empty() {
            return Err(ScenarioError::NoGoals);
        }
        for &goal in &self.goals {
            check_cell(goal, self.grid)?;
        }
        for (i, &a) in self.goals.iter().enumerate() {
            if self.goals[i + 1..].contains(&a) {
                return Err(ScenarioError::DuplicateGoals);
            }
        }
        if self.true_goal >= self.goals.len() {
            return Err(ScenarioError::TrueGoalOutOfRange {
                index: self.true_goal,
                count: self.goals.len(),
            });
        }
        check_probability(self.p)?;
        if !self.reward_plus.is_finite() || !self.reward_minus.is_finite() {
            return Err(ScenarioError::NonFiniteReward);
        }
        if let InitialBelief::Fixed(b) = self.initial_belief {
            if b >= self.goals.len() {
                return Err(ScenarioError::InitialBeliefOutOfRange {
                    index: b,
                    count: self.goals.len(),
                });
            }
        }
        Ok(())
    }
}

fn default_radius() -> f64 {
    1.0
}

fn default_camo_cost() -> f64 {
    5.0
}

/// Camouflage configuration.
///
/// The adversary knows the goal but tracks the agent's position; its
/// belief is the last seen cell. Camouflaged moves stay hidden with
/// probability `1 - p` at cost `c`; the reward vanishes whenever the
/// adversary's estimate is within vision radius `r` of the agent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CamoConfig {
    pub grid: GridDims,
    #[serde(default)]
    pub start: GridCell,
    pub tg: GridCell,
    pub p: f64,
    #[serde(default = "default_radius")]
    pub r: f64,
    #[serde(default = "default_camo_cost")]
    pub c: f64,
}

impl CamoConfig {
    /// The 5x5 layout with the goal at (1,2).
    pub fn reference_layout() -> Self {
        CamoConfig {
            grid: GridDims { w: 5, h: 5 },
            start: GridCell::new(0, 0),
            tg: GridCell::new(1, 2),
            p: 0.1,
            r: default_radius(),
            c: default_camo_cost(),
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        check_grid(self.grid)?;
        check_cell(self.start, self.grid)?;
        check_cell(self.tg, self.grid)?;
        check_probability(self.p)?;
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(ScenarioError::InvalidRadius { r: self.r });
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(ScenarioError::InvalidCost { c: self.c });
        }
        Ok(())
    }
}

/// Tagged scenario configuration as stored in JSON files.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScenarioConfig {
    Cops(CopsConfig),
    Camo(CamoConfig),
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<ScenarioBundle, ScenarioError> {
        match self {
            ScenarioConfig::Cops(cfg) => build_cops_scenario(cfg),
            ScenarioConfig::Camo(cfg) => build_camo_scenario(cfg),
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        match self {
            ScenarioConfig::Cops(_) => ScenarioKind::Cops,
            ScenarioConfig::Camo(_) => ScenarioKind::Camo,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Cops,
    Camo,
}

impl ScenarioKind {
    pub fn label(self) -> &'static str {
        match self {
            ScenarioKind::Cops => "cops",
            ScenarioKind::Camo => "camo",
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("grid must have positive width and height")]
    EmptyGrid,
    #[error("cell ({col},{row}) lies outside the {w}x{h} grid")]
    CellOutOfBounds {
        col: usize,
        row: usize,
        w: usize,
        h: usize,
    },
    #[error("scenario needs at least one goal")]
    NoGoals,
    #[error("goal cells must be distinct")]
    DuplicateGoals,
    #[error("true_goal index {index} out of range for {count} goals")]
    TrueGoalOutOfRange { index: usize, count: usize },
    #[error("initial belief index {index} out of range for {count} beliefs")]
    InitialBeliefOutOfRange { index: usize, count: usize },
    #[error("probability {p} must lie in [0, 1]")]
    InvalidProbability { p: f64 },
    #[error("vision radius {r} must be finite and nonnegative")]
    InvalidRadius { r: f64 },
    #[error("camouflage cost {c} must be finite and nonnegative")]
    InvalidCost { c: f64 },
    #[error("rewards must be finite")]
    NonFiniteReward,
}

fn check_grid(grid: GridDims) -> Result<(), ScenarioError> {
    if grid.w == 0 || grid.h == 0 {
        Err(ScenarioError::EmptyGrid)
    } else {
        Ok(())
    }
}

fn check_cell(cell: GridCell, grid: GridDims) -> Result<(), ScenarioError> {
    if cell.col >= grid.w || cell.row >= grid.h {
        Err(ScenarioError::CellOutOfBounds {
            col: cell.col,
            row: cell.row,
            w: grid.w,
            h: grid.h,
        })
    } else {
        Ok(())
    }
}

fn check_probability(p: f64) -> Result<(), ScenarioError> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        Err(ScenarioError::InvalidProbability { p })
    } else {
        Ok(())
    }
}

/// Everything a planner or simulator needs to work a scenario.
#[derive(Clone, Debug)]
pub struct ScenarioBundle {
    pub kind: ScenarioKind,
    pub width: usize,
    pub height: usize,
    pub start_cell: GridCell,
    pub agent: Mdp,
    pub belief_count: usize,
    pub kernel: BeliefKernel,
    pub reward: BeliefReward,
    /// Stationary nominal action per agent state (shortest path to the
    /// true goal, then stay; no camouflage where that applies).
    pub nominal: Vec<ActionId>,
    pub initial_belief: InitialBelief,
    pub action_labels: Vec<String>,
    /// Goal cells (cops: all candidates in config order; camo: the goal).
    pub goal_cells: Vec<GridCell>,
    pub true_goal_cell: GridCell,
}

impl ScenarioBundle {
    pub fn state_of_cell(&self, cell: GridCell) -> StateId {
        StateId(cell.row * self.width + cell.col)
    }

    pub fn cell_of_state(&self, state: StateId) -> GridCell {
        GridCell::new(state.0 % self.width, state.0 / self.width)
    }

    pub fn start(&self) -> StateId {
        self.state_of_cell(self.start_cell)
    }

    /// Product index under the s-major convention, without building the
    /// product MDP.
    pub fn product_index(&self, state: StateId, belief: BeliefId) -> StateId {
        StateId(state.0 * self.belief_count + belief.0)
    }

    /// Build the product MDP for this bundle.
    pub fn product(&self) -> Result<ProductMdp, ProductError> {
        crate::belief::build_product_mdp(&self.agent, &self.kernel, &self.reward)
    }

    /// Materialize the stationary nominal policy over `horizon + 1`
    /// stages, as a policy on agent states.
    pub fn nominal_policy(&self, horizon: usize) -> Policy {
        Policy::from_rows(vec![self.nominal.clone(); horizon + 1])
    }
}

/// First move (in id order) that strictly shrinks the taxicab distance
/// to `goal`; `Stay` once there.
fn nominal_move(cell: GridCell, goal: GridCell, width: usize, height: usize) -> Move {
    if cell == goal {
        return Move::Stay;
    }
    let here = taxicab_distance(cell, goal);
    for mv in [Move::North, Move::South, Move::West, Move::East] {
        if let Some(next) = mv.apply(cell, width, height) {
            if taxicab_distance(next, goal) < here {
                return mv;
            }
        }
    }
    unreachable!("some move always shrinks the taxicab distance on a grid")
}

/// Next-belief distribution of the cops adversary.
///
/// With probability `1 - p` the belief stays put; the remaining `p` is
/// split evenly over the candidate goals brought strictly closer by the
/// move (or reached), and returns to the current belief when no goal
/// qualifies.
pub fn cops_belief_transition(
    s: GridCell,
    belief: BeliefId,
    mv: Move,
    goals: &[GridCell],
    p: f64,
    width: usize,
    height: usize,
) -> Distribution<BeliefId> {
    let next = mv
        .apply(s, width, height)
        .expect("move must be permissible at s");
    let closer: Vec<usize> = (0..goals.len())
        .filter(|&i| {
            taxicab_distance(next, goals[i]) < taxicab_distance(s, goals[i]) || next == goals[i]
        })
        .collect();
    let keep = 1.0 - p;
    let mut entries = Vec::new();
    for i in 0..goals.len() {
        let mut prob = if belief.0 == i { keep } else { 0.0 };
        if closer.contains(&i) {
            prob += p / closer.len() as f64;
        } else if closer.is_empty() && belief.0 == i {
            prob += p;
        }
        if prob > 0.0 {
            entries.push((BeliefId(i), prob));
        }
    }
    Distribution::new(entries)
}

/// Belief-induced stage reward of the cops scenario. The action does
/// not matter.
pub fn cops_reward(s: GridCell, belief: BeliefId, cfg: &CopsConfig) -> f64 {
    let tg = cfg.true_goal_cell();
    if s != tg {
        0.0
    } else if cfg.goals[belief.0] == tg {
        cfg.reward_minus
    } else {
        cfg.reward_plus
    }
}

/// Build the cops-and-deceptive-robbers bundle.
pub fn build_cops_scenario(cfg: &CopsConfig) -> Result<ScenarioBundle, ScenarioError> {
    cfg.validate()?;
    let (width, height) = (cfg.grid.w, cfg.grid.h);
    let states = width * height;
    let beliefs = cfg.goals.len();
    let tg = cfg.true_goal_cell();

    let cell_of = |state: StateId| GridCell::new(state.0 % width, state.0 / width);
    let state_of = |cell: GridCell| StateId(cell.row * width + cell.col);

    let mut agent = Mdp::new(states, Move::ALL.len());
    for s in (0..states).map(StateId) {
        let cell = cell_of(s);
        let nominal_reward = if cell == tg { cfg.reward_plus } else { 0.0 };
        for mv in Move::ALL {
            if let Some(next) = mv.apply(cell, width, height) {
                agent.add_action(
                    s,
                    ActionId(mv.index()),
                    nominal_reward,
                    Distribution::point_mass(state_of(next)),
                );
            }
        }
    }

    let kernel = BeliefKernel::from_fn(states, beliefs, Move::ALL.len(), |s, b, a| {
        let mv = Move::ALL[a.0];
        let cell = cell_of(s);
        mv.apply(cell, width, height)
            .map(|_| cops_belief_transition(cell, b, mv, &cfg.goals, cfg.p, width, height))
    });

    let reward = BeliefReward::from_fn(states, beliefs, Move::ALL.len(), |s, b, _| {
        cops_reward(cell_of(s), b, cfg)
    });

    let nominal = (0..states)
        .map(|s| ActionId(nominal_move(cell_of(StateId(s)), tg, width, height).index()))
        .collect();

    Ok(ScenarioBundle {
        kind: ScenarioKind::Cops,
        width,
        height,
        start_cell: cfg.start,
        agent,
        belief_count: beliefs,
        kernel,
        reward,
        nominal,
        initial_belief: cfg.initial_belief,
        action_labels: Move::ALL.iter().map(|m| m.label().to_string()).collect(),
        goal_cells: cfg.goals.clone(),
        true_goal_cell: tg,
    })
}

/// Camouflage action: a movement plus the camouflage flag. Action ids
/// interleave as `move * 2 + camo`, so the uncamouflaged variant of a
/// move sorts first.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct CamoAction {
    pub mv: Move,
    pub camo: bool,
}

impl CamoAction {
    pub fn from_id(action: ActionId) -> Self {
        CamoAction {
            mv: Move::ALL[action.0 / 2],
            camo: action.0 % 2 == 1,
        }
    }

    pub fn id(self) -> ActionId {
        ActionId(self.mv.index() * 2 + usize::from(self.camo))
    }

    pub fn label(self) -> String {
        if self.camo {
            format!("{}+camo", self.mv.label())
        } else {
            self.mv.label().to_string()
        }
    }
}

/// Next-belief distribution of the camouflage adversary. Beliefs are
/// cells, indexed like agent states.
pub fn camo_belief_transition(
    s: GridCell,
    belief_cell: GridCell,
    action: CamoAction,
    p: f64,
    width: usize,
    height: usize,
) -> Distribution<BeliefId> {
    let next = action
        .mv
        .apply(s, width, height)
        .expect("move must be permissible at s");
    let index = |cell: GridCell| BeliefId(cell.row * width + cell.col);
    if !action.camo || belief_cell == next {
        return Distribution::point_mass(index(next));
    }
    let mut entries = Vec::new();
    let seen = index(next);
    let kept = index(belief_cell);
    let (first, second) = if seen.0 <= kept.0 {
        ((seen, p), (kept, 1.0 - p))
    } else {
        ((kept, 1.0 - p), (seen, p))
    };
    for (target, prob) in [first, second] {
        if prob > 0.0 {
            entries.push((target, prob));
        }
    }
    Distribution::new(entries)
}

/// Belief-induced stage reward of the camouflage scenario: the smooth
/// goal reward when out of the adversary's sight, zero inside the
/// vision radius, minus the camouflage cost when camouflaged.
pub fn camo_reward(
    s: GridCell,
    belief_cell: GridCell,
    action: CamoAction,
    cfg: &CamoConfig,
) -> f64 {
    let cost = if action.camo { cfg.c } else { 0.0 };
    if (taxicab_distance(s, belief_cell) as f64) <= cfg.r {
        -cost
    } else {
        10.0 / (taxicab_distance(s, cfg.tg) as f64 + 1.0) - cost
    }
}

/// Build the camouflage bundle. The belief space equals the cell set,
/// and the adversary initially sees the agent at its start cell.
pub fn build_camo_scenario(cfg: &CamoConfig) -> Result<ScenarioBundle, ScenarioError> {
    cfg.validate()?;
    let (width, height) = (cfg.grid.w, cfg.grid.h);
    let states = width * height;
    let action_count = Move::ALL.len() * 2;

    let cell_of = |state: StateId| GridCell::new(state.0 % width, state.0 / width);
    let state_of = |cell: GridCell| StateId(cell.row * width + cell.col);

    let mut agent = Mdp::new(states, action_count);
    for s in (0..states).map(StateId) {
        let cell = cell_of(s);
        let nominal_reward = 10.0 / (taxicab_distance(cell, cfg.tg) as f64 + 1.0);
        for mv in Move::ALL {
            let Some(next) = mv.apply(cell, width, height) else {
                continue;
            };
            for camo in [false, true] {
                agent.add_action(
                    s,
                    CamoAction { mv, camo }.id(),
                    nominal_reward,
                    Distribution::point_mass(state_of(next)),
                );
            }
        }
    }

    let kernel = BeliefKernel::from_fn(states, states, action_count, |s, b, a| {
        let action = CamoAction::from_id(a);
        let cell = cell_of(s);
        action.mv.apply(cell, width, height).map(|_| {
            camo_belief_transition(cell, cell_of(StateId(b.0)), action, cfg.p, width, height)
        })
    });

    let reward = BeliefReward::from_fn(states, states, action_count, |s, b, a| {
        camo_reward(
            cell_of(s),
            cell_of(StateId(b.0)),
            CamoAction::from_id(a),
            cfg,
        )
    });

    let nominal = (0..states)
        .map(|s| {
            CamoAction {
                mv: nominal_move(cell_of(StateId(s)), cfg.tg, width, height),
                camo: false,
            }
            .id()
        })
        .collect();

    let action_labels = (0..action_count)
        .map(|a| CamoAction::from_id(ActionId(a)).label())
        .collect();

    Ok(ScenarioBundle {
        kind: ScenarioKind::Camo,
        width,
        height,
        start_cell: cfg.start,
        agent,
        belief_count: states,
        kernel,
        reward,
        nominal,
        initial_belief: InitialBelief::Fixed(state_of(cfg.start).0),
        action_labels,
        goal_cells: vec![cfg.tg],
        true_goal_cell: cfg.tg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::validate_mdp;

    #[test]
    fn taxicab_examples() {
        assert_eq!(
            taxicab_distance(GridCell::new(0, 0), GridCell::new(1, 2)),
            3
        );
        assert_eq!(
            taxicab_distance(GridCell::new(3, 3), GridCell::new(3, 3)),
            0
        );
        assert_eq!(
            taxicab_distance(GridCell::new(5, 4), GridCell::new(6, 5)),
            2
        );
    }

    #[test]
    fn cops_reference_layout_dimensions() {
        let bundle = build_cops_scenario(&CopsConfig::reference_layout()).unwrap();
        assert_eq!(bundle.agent.state_count(), 64);
        assert_eq!(bundle.agent.action_count(), 5);
        assert_eq!(bundle.belief_count, 3);
        assert!(validate_mdp(&bundle.agent).is_empty());
        let product = bundle.product().unwrap();
        assert_eq!(product.product_state_count(), 192);
        assert_eq!(product.action_count(), 5);
    }

    #[test]
    fn camo_reference_layout_dimensions() {
        let bundle = build_camo_scenario(&CamoConfig::reference_layout()).unwrap();
        assert_eq!(bundle.agent.state_count(), 25);
        assert_eq!(bundle.agent.action_count(), 10);
        assert_eq!(bundle.belief_count, 25);
        let product = bundle.product().unwrap();
        assert_eq!(product.product_state_count(), 625);
        assert_eq!(product.action_count(), 10);
    }

    #[test]
    fn degenerate_grid_nominal_policy_stays() {
        let cfg = CopsConfig {
            grid: GridDims { w: 1, h: 1 },
            start: GridCell::new(0, 0),
            goals: vec![GridCell::new(0, 0)],
            true_goal: 0,
            p: 0.1,
            reward_plus: 10.0,
            reward_minus: -10.0,
            initial_belief: InitialBelief::Uniform,
        };
        let bundle = build_cops_scenario(&cfg).unwrap();
        assert_eq!(bundle.nominal, vec![ActionId(Move::Stay.index())]);
    }

    #[test]
    fn nominal_path_reaches_goal_in_taxicab_distance() {
        let bundle = build_cops_scenario(&CopsConfig::reference_layout()).unwrap();
        let mut cell = bundle.start_cell;
        let mut steps = 0;
        while cell != bundle.true_goal_cell {
            let action = bundle.nominal[bundle.state_of_cell(cell).0];
            let mv = Move::ALL[action.0];
            cell = mv.apply(cell, bundle.width, bundle.height).unwrap();
            steps += 1;
            assert!(steps <= 8, "nominal path exceeded the shortest length");
        }
        assert_eq!(steps, 8);
    }

    #[test]
    fn cops_transition_splits_p_over_closer_goals() {
        // Moving east from the start brings all three candidates closer.
        let cfg = CopsConfig::reference_layout();
        let row = cops_belief_transition(
            GridCell::new(0, 7),
            BeliefId(0),
            Move::East,
            &cfg.goals,
            0.1,
            8,
            8,
        );
        assert!((row.probability(BeliefId(0)) - (0.9 + 0.1 / 3.0)).abs() < 1e-12);
        assert!((row.probability(BeliefId(1)) - 0.1 / 3.0).abs() < 1e-12);
        assert!((row.probability(BeliefId(2)) - 0.1 / 3.0).abs() < 1e-12);
        assert!((row.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cops_transition_keeps_belief_when_nothing_gets_closer() {
        let cfg = CopsConfig::reference_layout();
        // Staying at a non-goal tile leaves the closer set empty.
        let row = cops_belief_transition(
            GridCell::new(0, 0),
            BeliefId(1),
            Move::Stay,
            &cfg.goals,
            0.1,
            8,
            8,
        );
        assert_eq!(row.entries().len(), 1);
        assert!((row.probability(BeliefId(1)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cops_belief_absorbs_at_true_goal() {
        let cfg = CopsConfig::reference_layout();
        let row = cops_belief_transition(
            cfg.true_goal_cell(),
            BeliefId(0),
            Move::Stay,
            &cfg.goals,
            0.1,
            8,
            8,
        );
        assert_eq!(row.entries().len(), 1);
        assert!((row.probability(BeliefId(0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cops_reward_cases() {
        let cfg = CopsConfig::reference_layout();
        let tg = cfg.true_goal_cell();
        assert_eq!(cops_reward(tg, BeliefId(0), &cfg), -10.0);
        assert_eq!(cops_reward(tg, BeliefId(1), &cfg), 10.0);
        assert_eq!(cops_reward(GridCell::new(2, 2), BeliefId(0), &cfg), 0.0);
    }

    #[test]
    fn cops_kernel_rows_normalize_exactly() {
        for p in [0.0, 0.1, 0.37, 1.0] {
            let cfg = CopsConfig::reference_layout().with_p(p);
            let bundle = build_cops_scenario(&cfg).unwrap();
            for s in (0..bundle.agent.state_count()).map(StateId) {
                for a in bundle.agent.permissible(s) {
                    for b in (0..bundle.belief_count).map(BeliefId) {
                        let row = bundle.kernel.row(s, b, a).unwrap();
                        assert!((row.total() - 1.0).abs() < 1e-12);
                        assert!(row.entries().iter().all(|&(_, q)| q >= 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn cops_kernel_entries_affine_in_p() {
        let kernels: Vec<_> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&p| {
                build_cops_scenario(&CopsConfig::reference_layout().with_p(p))
                    .unwrap()
                    .kernel
            })
            .collect();
        for s in (0..64).map(StateId) {
            for b in (0..3).map(BeliefId) {
                for a in (0..5).map(ActionId) {
                    let rows: Vec<_> = kernels.iter().map(|k| k.row(s, b, a)).collect();
                    if rows[0].is_none() {
                        assert!(rows.iter().all(|r| r.is_none()));
                        continue;
                    }
                    for t in (0..3).map(BeliefId) {
                        let lo = rows[0].unwrap().probability(t);
                        let mid = rows[1].unwrap().probability(t);
                        let hi = rows[2].unwrap().probability(t);
                        assert!((mid - 0.5 * (lo + hi)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn camo_transition_cases() {
        let index = |c: usize, r: usize| BeliefId(r * 5 + c);
        // Without camouflage the adversary sees the next cell.
        let row = camo_belief_transition(
            GridCell::new(0, 0),
            GridCell::new(4, 4),
            CamoAction {
                mv: Move::East,
                camo: false,
            },
            0.1,
            5,
            5,
        );
        assert_eq!(row.entries(), &[(index(1, 0), 1.0)]);
        // Camouflage holds the old estimate with probability 1 - p.
        let row = camo_belief_transition(
            GridCell::new(0, 0),
            GridCell::new(4, 4),
            CamoAction {
                mv: Move::East,
                camo: true,
            },
            0.1,
            5,
            5,
        );
        assert!((row.probability(index(1, 0)) - 0.1).abs() < 1e-12);
        assert!((row.probability(index(4, 4)) - 0.9).abs() < 1e-12);
        // Camouflage is pointless when the adversary already looks at
        // the destination.
        let row = camo_belief_transition(
            GridCell::new(0, 0),
            GridCell::new(1, 0),
            CamoAction {
                mv: Move::East,
                camo: true,
            },
            0.1,
            5,
            5,
        );
        assert_eq!(row.entries(), &[(index(1, 0), 1.0)]);
    }

    #[test]
    fn camo_kernel_without_camouflage_is_deterministic() {
        for p in [0.0, 0.3, 1.0] {
            let bundle = build_camo_scenario(&CamoConfig::reference_layout().with_p(p)).unwrap();
            for s in (0..25).map(StateId) {
                for a in bundle.agent.permissible(s) {
                    if CamoAction::from_id(a).camo {
                        continue;
                    }
                    for b in (0..25).map(BeliefId) {
                        let row = bundle.kernel.row(s, b, a).unwrap();
                        assert_eq!(row.entries().len(), 1);
                        assert_eq!(row.entries()[0].1, 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn camo_reward_cases() {
        let cfg = CamoConfig::reference_layout();
        let no_camo = |mv| CamoAction { mv, camo: false };
        let camo = |mv| CamoAction { mv, camo: true };
        // At the goal, out of sight, no camouflage: the full reward.
        assert_eq!(
            camo_reward(cfg.tg, GridCell::new(4, 4), no_camo(Move::Stay), &cfg),
            10.0
        );
        // Watched within the radius, camouflaged: just the cost.
        assert_eq!(
            camo_reward(
                GridCell::new(0, 0),
                GridCell::new(0, 1),
                camo(Move::Stay),
                &cfg
            ),
            -5.0
        );
        // Far from the watcher, three cells from the goal.
        assert_eq!(
            camo_reward(
                GridCell::new(0, 0),
                GridCell::new(4, 4),
                no_camo(Move::Stay),
                &cfg
            ),
            2.5
        );
        assert_eq!(
            camo_reward(
                GridCell::new(0, 0),
                GridCell::new(4, 4),
                camo(Move::Stay),
                &cfg
            ),
            -2.5
        );
    }

    #[test]
    fn camo_zero_cost_never_reduces_reward() {
        let mut cfg = CamoConfig::reference_layout();
        cfg.c = 0.0;
        cfg.r = 0.0;
        for s in 0..25 {
            let cell = GridCell::new(s % 5, s / 5);
            for b in 0..25 {
                let watcher = GridCell::new(b % 5, b / 5);
                let plain = camo_reward(
                    cell,
                    watcher,
                    CamoAction {
                        mv: Move::Stay,
                        camo: false,
                    },
                    &cfg,
                );
                let hidden = camo_reward(
                    cell,
                    watcher,
                    CamoAction {
                        mv: Move::Stay,
                        camo: true,
                    },
                    &cfg,
                );
                assert_eq!(plain, hidden);
                assert!(plain >= 0.0);
            }
        }
    }

    #[test]
    fn camo_product_rows_normalize_exactly() {
        let bundle = build_camo_scenario(&CamoConfig::reference_layout()).unwrap();
        let product = bundle.product().unwrap();
        for x in (0..product.product_state_count()).map(StateId) {
            for a in product.mdp().permissible(x) {
                assert!((product.mdp().transitions(x, a).total() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn config_json_round_trip() {
        let json = r#"{
            "kind": "cops",
            "grid": {"w": 8, "h": 8},
            "start": [0, 7],
            "goals": [[5, 4], [6, 5], [4, 3]],
            "true_goal": 0,
            "p": 0.1
        }"#;
        let config: ScenarioConfig = serde_json::from_str(json).unwrap();
        let ScenarioConfig::Cops(cfg) = &config else {
            panic!("expected a cops config");
        };
        assert_eq!(cfg.start, GridCell::new(0, 7));
        assert_eq!(cfg.reward_plus, 10.0);
        assert_eq!(cfg.reward_minus, -10.0);
        assert_eq!(cfg.initial_belief, InitialBelief::Uniform);
        let bundle = config.build().unwrap();
        assert_eq!(bundle.kind, ScenarioKind::Cops);

        let camo_json = r#"{
            "kind": "camo",
            "grid": {"w": 5, "h": 5},
            "tg": [1, 2],
            "p": 0.1
        }"#;
        let config: ScenarioConfig = serde_json::from_str(camo_json).unwrap();
        let bundle = config.build().unwrap();
        assert_eq!(bundle.start_cell, GridCell::new(0, 0));
        assert_eq!(bundle.true_goal_cell, GridCell::new(1, 2));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = CopsConfig::reference_layout();
        cfg.true_goal = 5;
        assert!(matches!(
            build_cops_scenario(&cfg),
            Err(ScenarioError::TrueGoalOutOfRange { index: 5, count: 3 })
        ));

        let mut cfg = CopsConfig::reference_layout();
        cfg.p = 1.5;
        assert!(matches!(
            build_cops_scenario(&cfg),
            Err(ScenarioError::InvalidProbability { .. })
        ));

        let mut cfg = CopsConfig::reference_layout();
        cfg.goals.push(cfg.goals[0]);
        assert!(matches!(
            build_cops_scenario(&cfg),
            Err(ScenarioError::DuplicateGoals)
        ));

        let mut cfg = CamoConfig::reference_layout();
        cfg.tg = GridCell::new(9, 0);
        assert!(matches!(
            build_camo_scenario(&cfg),
            Err(ScenarioError::CellOutOfBounds { .. })
        ));
    }
}
