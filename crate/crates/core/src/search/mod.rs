//! Batched Monte Carlo tree search over plot actions.
//!
//! Each iteration selects a frontier of nodes, widens every frontier node by
//! `κ(k)` sampled actions (simulated into bullet steps), evaluates the new
//! children that are far enough into the story and backpropagates their
//! values. Expansion and evaluation fan out over rayon; backpropagation is
//! applied serially in node-id order so results do not depend on scheduling.

mod expand;
mod llm;
pub mod prompts;
mod select;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use expand::{apply_expansion, expand, plan_expansion, ExpansionPlan, Policies};
pub use llm::{FeatureEvaluator, PromptedPolicy, PromptedSimulator};
pub use select::{select_frontier, tie_break_key};

use crate::error::{BackendError, Error, Result};
use crate::tree::{NodeId, SearchTree, StoryConfig, StoryState};

/// Proposes candidate plot actions for a state.
pub trait ActionProposer: Send + Sync {
    fn propose(&self, state: &StoryState, n: usize) -> Result<Vec<String>, BackendError>;
}

/// Turns an action into the next `bullets_per_step` bullets.
pub trait StepSimulator: Send + Sync {
    fn simulate(&self, state: &StoryState, action: &str) -> Result<Vec<String>, BackendError>;
}

/// Scores a state in `[0, 1]`.
pub trait StateEvaluator: Send + Sync {
    fn evaluate(&self, state: &StoryState) -> Result<f64>;
}

/// Number of actions sampled per frontier node at iteration `k` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpansionSchedule {
    pub first: usize,
    pub second: usize,
    pub later: usize,
}

impl Default for ExpansionSchedule {
    fn default() -> Self {
        Self {
            first: 300,
            second: 8,
            later: 2,
        }
    }
}

impl ExpansionSchedule {
    pub fn kappa(&self, iteration: usize) -> usize {
        match iteration {
            0 | 1 => self.first,
            2 => self.second,
            _ => self.later,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub max_iterations: usize,
    /// UCB exploration constant `c`.
    pub exploration: f64,
    pub schedule: ExpansionSchedule,
    pub frontier_cap: usize,
    /// UCB descents attempted per iteration.
    pub ucb_descents: usize,
    /// Fraction of visited expandable nodes eligible as mean-Q picks.
    pub beam_top_fraction: f64,
    /// Upper bound on mean-Q picks.
    pub beam_q_picks: usize,
    /// Expandable nodes added for holding the best value in their subtree.
    pub beam_max_value_picks: usize,
    /// Children are evaluated only once `depth / D` reaches this.
    pub evaluation_threshold: f64,
    /// Share of each expansion drawn from the trained policy when present.
    pub mix_ratio: f64,
    /// Q assumed for unvisited edges when ranking mean-Q picks.
    pub unvisited_prior: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            exploration: 1.414,
            schedule: ExpansionSchedule::default(),
            frontier_cap: 100,
            ucb_descents: 32,
            beam_top_fraction: 0.05,
            beam_q_picks: 4,
            beam_max_value_picks: 4,
            evaluation_threshold: 0.5,
            mix_ratio: 0.5,
            unvisited_prior: 0.0,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1");
        }
        if !(self.exploration >= 0.0) || !self.exploration.is_finite() {
            return bad("exploration must be a non-negative finite number");
        }
        let s = self.schedule;
        if s.first == 0 || s.second == 0 || s.later == 0 {
            return bad("expansion schedule entries must be >= 1");
        }
        if self.frontier_cap == 0 {
            return bad("frontier_cap must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.beam_top_fraction) {
            return bad("beam_top_fraction must lie in [0, 1]");
        }
        if !(self.evaluation_threshold > 0.0 && self.evaluation_threshold <= 1.0) {
            return bad("evaluation_threshold must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            return bad("mix_ratio must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.unvisited_prior) {
            return bad("unvisited_prior must lie in [0, 1]");
        }
        Ok(())
    }
}

/// `Q(s,a) + c * sqrt(ln N(s) / N(s,a))`, infinite for an unvisited edge.
pub fn ucb_score(q: f64, parent_visits: u64, edge_visits: u64, exploration: f64) -> f64 {
    if edge_visits == 0 {
        return f64::INFINITY;
    }
    let n = parent_visits.max(1) as f64;
    q + exploration * (n.ln() / edge_visits as f64).sqrt()
}

/// Whether a node at `depth` is deep enough to be evaluated.
pub fn evaluation_gate(depth: usize, story: &StoryConfig, threshold: f64) -> bool {
    story.completion_fraction(depth) >= threshold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub kappa: usize,
    pub frontier_size: usize,
    pub actions_requested: usize,
    pub nodes_expanded: usize,
    /// New children created this iteration.
    pub children_added: usize,
    pub evaluations: usize,
    /// Actions lost to backend failures or unusable replies.
    pub shortfall: usize,
    pub backend_failures: usize,
    pub newly_sterile: usize,
    /// Best value among complete stories so far.
    pub v_max_final: Option<f64>,
    pub wall_time_ms: f64,
}

pub struct SearchOutcome {
    pub tree: SearchTree,
    pub reports: Vec<IterationReport>,
}

/// Runs the search from one root per prompt.
pub fn run_search(
    tree_id: &str,
    prompts: &[String],
    story: StoryConfig,
    cfg: &SearchConfig,
    policies: &Policies<'_>,
    evaluator: &dyn StateEvaluator,
) -> Result<SearchOutcome> {
    story.validate()?;
    cfg.validate()?;
    if prompts.is_empty() {
        return Err(Error::EmptyInput("prompts"));
    }
    let mut tree = SearchTree::new(story, tree_id);
    for p in prompts {
        tree.add_root(p.clone());
    }
    let mut reports = Vec::new();
    for k in 1..=cfg.max_iterations {
        let frontier = match select_frontier(&tree, cfg) {
            Ok(f) => f,
            Err(Error::SearchExhausted) => {
                log::info!("search exhausted after {} iterations", k - 1);
                break;
            }
            Err(e) => return Err(e),
        };
        let started = Instant::now();
        let report = run_iteration(&mut tree, &frontier, k, cfg, policies, evaluator)?;
        let report = IterationReport {
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
            ..report
        };
        log::debug!(
            "iteration {k}: frontier {} kappa {} children {} evaluations {}",
            report.frontier_size,
            report.kappa,
            report.children_added,
            report.evaluations
        );
        reports.push(report);
    }
    if tree.roots().iter().all(|r| {
        tree.node(*r)
            .map(|n| n.sterile && n.children().is_empty())
            .unwrap_or(true)
    }) {
        return Err(Error::AllRootsSterile);
    }
    Ok(SearchOutcome { tree, reports })
}

fn run_iteration(
    tree: &mut SearchTree,
    frontier: &[NodeId],
    k: usize,
    cfg: &SearchConfig,
    policies: &Policies<'_>,
    evaluator: &dyn StateEvaluator,
) -> Result<IterationReport> {
    let kappa = cfg.schedule.kappa(k);
    let snapshot: &SearchTree = tree;
    let plans: Vec<ExpansionPlan> = frontier
        .par_iter()
        .map(|&id| plan_expansion(snapshot, id, kappa, cfg, policies))
        .collect::<Result<_>>()?;

    let mut report = IterationReport {
        iteration: k,
        kappa,
        frontier_size: frontier.len(),
        actions_requested: kappa * frontier.len(),
        nodes_expanded: 0,
        children_added: 0,
        evaluations: 0,
        shortfall: 0,
        backend_failures: 0,
        newly_sterile: 0,
        v_max_final: None,
        wall_time_ms: 0.0,
    };
    let mut created = Vec::new();
    for plan in plans {
        report.backend_failures += plan.failures;
        report.shortfall += kappa.saturating_sub(plan.children.len());
        if plan.sterile {
            report.newly_sterile += 1;
        }
        let ids = apply_expansion(tree, plan)?;
        if !ids.is_empty() {
            report.nodes_expanded += 1;
        }
        created.extend(ids);
    }
    report.children_added = created.len();
    if report.children_added == 0 && report.backend_failures > 0 && report.newly_sterile == 0 {
        return Err(Error::Backend(BackendError::Transport {
            attempts: report.backend_failures as u32,
            message: format!("every expansion in iteration {k} failed"),
        }));
    }

    let story = *tree.config();
    let gated: Vec<StoryState> = created
        .iter()
        .filter(|id| {
            tree.node(**id)
                .map(|n| evaluation_gate(n.depth, &story, cfg.evaluation_threshold))
                .unwrap_or(false)
        })
        .map(|id| tree.state(*id))
        .collect::<Result<_>>()?;
    let values: Vec<(NodeId, Result<f64>)> = gated
        .par_iter()
        .map(|s| (s.id, evaluator.evaluate(s)))
        .collect();
    for (id, value) in values {
        match value {
            Ok(v) => {
                tree.backpropagate(id, v)?;
                report.evaluations += 1;
            }
            Err(e @ Error::Backend(_)) => {
                log::warn!("evaluation of node {id} failed: {e}");
                report.backend_failures += 1;
            }
            Err(e) => return Err(e),
        }
    }
    report.v_max_final = tree.final_values().ok().map(|f| f.v_max);
    Ok(report)
}
