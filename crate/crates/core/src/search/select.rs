use std::collections::HashSet;

use super::{ucb_score, SearchConfig};
use crate::error::{Error, Result};
use crate::hash::combine;
use crate::tree::{NodeId, SearchTree};

/// Seeded key ordering children with equal UCB scores; lower wins.
pub fn tie_break_key(seed: u64, id: NodeId) -> u64 {
    combine(seed, u64::from(id.0))
}

/// Nodes to widen this iteration, in priority order and without duplicates:
///
/// 1. UCB descents from the roots (round-robin), each ending at an expandable
///    node without children. A node picked by one descent is closed to the
///    following ones.
/// 2. Mean-Q picks: the best expandable non-root nodes by incoming `Q`.
/// 3. Max-V picks: the expandable nodes closest to the best evaluated values.
///
/// The result is truncated to `frontier_cap`.
pub fn select_frontier(tree: &SearchTree, cfg: &SearchConfig) -> Result<Vec<NodeId>> {
    let n = tree.len();
    let nodes: Vec<_> = tree.nodes().collect();
    let expandable: Vec<bool> = nodes.iter().map(|nd| tree.is_expandable(nd.id)).collect();

    // open endpoints per subtree and best evaluated value per subtree; children
    // always have larger ids than their parent
    let mut open = vec![0usize; n];
    let mut best_value: Vec<Option<f64>> = nodes.iter().map(|nd| nd.evaluated_value).collect();
    for i in (0..n).rev() {
        if expandable[i] && nodes[i].children().is_empty() {
            open[i] += 1;
        }
        if let Some(p) = nodes[i].parent {
            open[p.index()] += open[i];
            if let Some(v) = best_value[i] {
                let slot = &mut best_value[p.index()];
                *slot = Some(slot.map_or(v, |b| b.max(v)));
            }
        }
    }

    if !expandable.iter().any(|e| *e) {
        return Err(Error::SearchExhausted);
    }

    let mut frontier = Vec::new();
    let mut chosen = HashSet::new();
    let mut push = |id: NodeId, frontier: &mut Vec<NodeId>| {
        if chosen.insert(id) {
            frontier.push(id);
        }
    };

    for d in 0..cfg.ucb_descents {
        if frontier.len() >= cfg.frontier_cap {
            break;
        }
        let live: Vec<NodeId> = tree
            .roots()
            .iter()
            .copied()
            .filter(|r| open[r.index()] > 0)
            .collect();
        if live.is_empty() {
            break;
        }
        let mut cur = live[d % live.len()];
        loop {
            let node = nodes[cur.index()];
            if node.children().is_empty() {
                break;
            }
            let parent_visits = tree.node_visits(cur)?;
            let next = node
                .children()
                .iter()
                .copied()
                .filter(|c| open[c.index()] > 0)
                .map(|c| {
                    let e = &nodes[c.index()].edge;
                    let score = ucb_score(e.q_or(0.0), parent_visits, e.visits, cfg.exploration);
                    (c, score, tie_break_key(cfg.seed, c))
                })
                .reduce(|a, b| {
                    if b.1 > a.1 || (b.1 == a.1 && b.2 < a.2) {
                        b
                    } else {
                        a
                    }
                });
            match next {
                Some((c, _, _)) => cur = c,
                None => break,
            }
        }
        // close the endpoint for later descents
        for id in tree.path_to_root(cur)? {
            open[id.index()] -= 1;
        }
        push(cur, &mut frontier);
    }

    let mut by_q: Vec<(NodeId, f64)> = nodes
        .iter()
        .filter(|nd| !nd.is_root() && expandable[nd.id.index()])
        .map(|nd| (nd.id, nd.edge.q_or(cfg.unvisited_prior)))
        .collect();
    by_q.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let q_take =
        ((cfg.beam_top_fraction * by_q.len() as f64).ceil() as usize).min(cfg.beam_q_picks);
    for (id, _) in by_q.into_iter().take(q_take) {
        push(id, &mut frontier);
    }

    let mut by_v: Vec<(NodeId, f64, usize)> = nodes
        .iter()
        .filter(|nd| !nd.is_root() && expandable[nd.id.index()])
        .filter_map(|nd| best_value[nd.id.index()].map(|v| (nd.id, v, nd.depth)))
        .collect();
    by_v.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.2.cmp(&a.2)).then(a.0.cmp(&b.0)));
    for (id, _, _) in by_v.into_iter().take(cfg.beam_max_value_picks) {
        push(id, &mut frontier);
    }

    frontier.truncate(cfg.frontier_cap);
    if frontier.is_empty() {
        return Err(Error::SearchExhausted);
    }
    Ok(frontier)
}
