use std::collections::HashSet;

use rayon::prelude::*;

use super::{ActionProposer, SearchConfig, StepSimulator};
use crate::error::{Error, Result};
use crate::tree::{NodeId, PlotAction, SearchTree, SourcePolicy, StoryState};

/// The generation side of the search: one or two action policies and the
/// simulator turning actions into bullets.
pub struct Policies<'a> {
    pub base: &'a dyn ActionProposer,
    pub trained: Option<&'a dyn ActionProposer>,
    pub simulator: &'a dyn StepSimulator,
}

/// Children computed for one frontier node, not yet inserted into the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionPlan {
    pub node: NodeId,
    pub children: Vec<(PlotAction, Vec<String>)>,
    /// Requests or simulations that failed at the backend.
    pub failures: usize,
    pub sterile: bool,
}

/// Which policy fills each of `kappa` slots: slot `i` goes to the trained
/// policy when `floor((i + 1) r) > floor(i r)`, spreading the trained share
/// evenly through the batch.
fn slot_sources(kappa: usize, ratio: f64, has_trained: bool) -> Vec<SourcePolicy> {
    (0..kappa)
        .map(|i| {
            let trained = has_trained
                && ((i + 1) as f64 * ratio + 1e-9).floor() > (i as f64 * ratio + 1e-9).floor();
            if trained {
                SourcePolicy::Trained
            } else {
                SourcePolicy::Base
            }
        })
        .collect()
}

fn propose(
    proposer: &dyn ActionProposer,
    state: &StoryState,
    n: usize,
    failures: &mut usize,
    responded: &mut bool,
) -> Vec<String> {
    if n == 0 {
        return Vec::new();
    }
    match proposer.propose(state, n) {
        Ok(actions) => {
            *responded = true;
            actions
        }
        Err(e) => {
            log::warn!("policy request for node {} failed: {e}", state.id);
            *failures += n;
            Vec::new()
        }
    }
}

/// Samples `kappa` actions for `node` and simulates each one. Reads the tree
/// only, so plans for different nodes can be computed concurrently.
pub fn plan_expansion(
    tree: &SearchTree,
    node: NodeId,
    kappa: usize,
    cfg: &SearchConfig,
    policies: &Policies<'_>,
) -> Result<ExpansionPlan> {
    if !tree.is_expandable(node) {
        return Err(Error::DepthOverflow {
            node,
            max_depth: tree.config().max_depth,
        });
    }
    let state = tree.state(node)?;
    let sources = slot_sources(kappa, cfg.mix_ratio, policies.trained.is_some());
    let n_trained = sources
        .iter()
        .filter(|s| **s == SourcePolicy::Trained)
        .count();

    let mut failures = 0;
    let mut responded = false;
    let mut base = propose(
        policies.base,
        &state,
        kappa - n_trained,
        &mut failures,
        &mut responded,
    )
    .into_iter();
    let mut trained = match policies.trained {
        Some(p) => propose(p, &state, n_trained, &mut failures, &mut responded),
        None => Vec::new(),
    }
    .into_iter();

    let mut seen: HashSet<String> = tree
        .node(node)?
        .children()
        .iter()
        .filter_map(|c| tree.node(*c).ok()?.action.as_ref().map(|a| a.text.clone()))
        .collect();
    let mut actions = Vec::new();
    for source in sources {
        let text = match source {
            SourcePolicy::Base => base.next(),
            SourcePolicy::Trained => trained.next(),
        };
        let Some(text) = text else { continue };
        let text = text.trim().to_string();
        if text.is_empty() || !seen.insert(text.clone()) {
            continue;
        }
        actions.push(PlotAction::new(text, source)?);
    }

    let bullets_per_step = tree.config().bullets_per_step;
    let simulated: Vec<(PlotAction, std::result::Result<Vec<String>, String>)> = actions
        .into_par_iter()
        .map(|a| {
            let r = policies
                .simulator
                .simulate(&state, &a.text)
                .map_err(|e| e.to_string());
            (a, r)
        })
        .collect();
    let mut children = Vec::new();
    for (action, result) in simulated {
        match result {
            Ok(bullets) if bullets.len() == bullets_per_step => children.push((action, bullets)),
            Ok(bullets) => log::warn!(
                "simulator returned {} bullets for node {node}, expected {bullets_per_step}",
                bullets.len()
            ),
            Err(e) => {
                log::warn!("simulation for node {node} failed: {e}");
                failures += 1;
            }
        }
    }
    let sterile = children.is_empty() && responded && failures == 0;
    Ok(ExpansionPlan {
        node,
        children,
        failures,
        sterile,
    })
}

/// Inserts a plan's children; returns their ids in creation order.
pub fn apply_expansion(tree: &mut SearchTree, plan: ExpansionPlan) -> Result<Vec<NodeId>> {
    if plan.sterile {
        tree.mark_sterile(plan.node)?;
    }
    plan.children
        .into_iter()
        .map(|(action, bullets)| tree.add_child(plan.node, action, bullets))
        .collect()
}

/// Plans and applies an expansion of a single node.
pub fn expand(
    tree: &mut SearchTree,
    node: NodeId,
    kappa: usize,
    cfg: &SearchConfig,
    policies: &Policies<'_>,
) -> Result<Vec<NodeId>> {
    let plan = plan_expansion(tree, node, kappa, cfg, policies)?;
    apply_expansion(tree, plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::BackendError;
    use crate::tree::StoryConfig;

    #[test]
    fn even_mix() {
        let s = slot_sources(8, 0.5, true);
        let trained = s.iter().filter(|x| **x == SourcePolicy::Trained).count();
        assert_eq!(trained, 4);
        assert_eq!(s[0], SourcePolicy::Base);
        assert_eq!(s[1], SourcePolicy::Trained);
        assert_eq!(
            slot_sources(300, 0.5, true)
                .iter()
                .filter(|x| **x == SourcePolicy::Trained)
                .count(),
            150
        );
        assert!(slot_sources(8, 0.5, false)
            .iter()
            .all(|x| *x == SourcePolicy::Base));
        assert!(slot_sources(5, 1.0, true)
            .iter()
            .all(|x| *x == SourcePolicy::Trained));
        assert!(slot_sources(5, 0.0, true)
            .iter()
            .all(|x| *x == SourcePolicy::Base));
    }

    struct Fixed(Vec<&'static str>);

    impl ActionProposer for Fixed {
        fn propose(&self, _: &StoryState, n: usize) -> Result<Vec<String>, BackendError> {
            Ok(self.0.iter().take(n).map(|s| s.to_string()).collect())
        }
    }

    struct Echo;

    impl StepSimulator for Echo {
        fn simulate(&self, _: &StoryState, action: &str) -> Result<Vec<String>, BackendError> {
            Ok(vec![format!("- {action}")])
        }
    }

    struct Down;

    impl StepSimulator for Down {
        fn simulate(&self, _: &StoryState, _: &str) -> Result<Vec<String>, BackendError> {
            Err(BackendError::Timeout { attempts: 3 })
        }
    }

    #[test]
    fn duplicates_dropped_and_sterile_marked() {
        let mut t = SearchTree::new(StoryConfig::new(1, 3).unwrap(), "t");
        let r = t.add_root("p");
        let base = Fixed(vec!["go", "go", "stay"]);
        let pol = Policies {
            base: &base,
            trained: None,
            simulator: &Echo,
        };
        let cfg = SearchConfig::default();
        let ids = expand(&mut t, r, 3, &cfg, &pol).unwrap();
        assert_eq!(ids.len(), 2);
        // the same proposals again are all duplicates of existing children
        let again = expand(&mut t, r, 3, &cfg, &pol).unwrap();
        assert!(again.is_empty());
        assert!(t.node(r).unwrap().sterile);
    }

    #[test]
    fn backend_failure_is_not_sterility() {
        let mut t = SearchTree::new(StoryConfig::new(1, 3).unwrap(), "t");
        let r = t.add_root("p");
        let base = Fixed(vec!["go"]);
        let pol = Policies {
            base: &base,
            trained: None,
            simulator: &Down,
        };
        let plan = plan_expansion(&t, r, 1, &SearchConfig::default(), &pol).unwrap();
        assert_eq!(plan.failures, 1);
        assert!(plan.children.is_empty());
        assert!(!plan.sterile);
    }
}
