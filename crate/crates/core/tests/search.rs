use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plotsearch_core::analytics::v_q_correlation;
use plotsearch_core::backend::Role;
use plotsearch_core::config::Config;
use plotsearch_core::search::{
    run_search, select_frontier, tie_break_key, ucb_score, FeatureEvaluator, Policies,
    PromptedPolicy, PromptedSimulator, SearchConfig,
};
use plotsearch_core::synth::synthetic_stories;
use plotsearch_core::tree::{ExportFormat, PlotAction, SourcePolicy};
use plotsearch_core::value::corpus::featurize;
use plotsearch_core::value::pipeline::{fit_pipeline, Hyperparams};
use plotsearch_core::{NodeId, SearchTree, StoryConfig};

/// Random tree of exactly `size` nodes with random backpropagated values and
/// some sterile nodes.
fn random_tree(rng: &mut ChaCha8Rng, size: usize) -> SearchTree {
    let mut tree = SearchTree::new(StoryConfig::new(1, 5).unwrap(), "r");
    let root = tree.add_root("p");
    let mut ids = vec![root];
    while ids.len() < size {
        let parent = ids[rng.random_range(0..ids.len())];
        if !tree.is_expandable(parent) {
            continue;
        }
        let n = tree.node(parent).unwrap().children().len();
        let action = PlotAction::new(format!("a{n}"), SourcePolicy::Base).unwrap();
        ids.push(tree.add_child(parent, action, vec!["b".into()]).unwrap());
    }
    for _ in 0..rng.random_range(0..30) {
        let id = ids[rng.random_range(1..ids.len())];
        let v = f64::from(rng.random_range(0..=10u32)) / 10.0;
        tree.backpropagate(id, v).unwrap();
    }
    for &id in &ids[1..] {
        if rng.random_bool(0.1) {
            tree.mark_sterile(id).unwrap();
        }
    }
    tree
}

fn has_open_endpoint(tree: &SearchTree, id: NodeId) -> bool {
    let node = tree.node(id).unwrap();
    if node.children().is_empty() {
        return tree.is_expandable(id);
    }
    node.children().iter().any(|c| has_open_endpoint(tree, *c))
}

/// One greedy UCB descent scoring every child of every visited node.
fn brute_force_descent(tree: &SearchTree, cfg: &SearchConfig) -> Option<NodeId> {
    let root = tree.roots()[0];
    if !has_open_endpoint(tree, root) {
        return None;
    }
    let mut cur = root;
    loop {
        let node = tree.node(cur).unwrap();
        if node.children().is_empty() {
            return Some(cur);
        }
        let n = tree.node_visits(cur).unwrap();
        let mut scored: Vec<(f64, u64, NodeId)> = node
            .children()
            .iter()
            .filter(|c| has_open_endpoint(tree, **c))
            .map(|c| {
                let e = tree.node(*c).unwrap().edge;
                let s = ucb_score(e.q_or(0.0), n, e.visits, cfg.exploration);
                (s, tie_break_key(cfg.seed, *c), *c)
            })
            .collect();
        if scored.is_empty() {
            return Some(cur);
        }
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        cur = scored[0].2;
    }
}

#[test]
fn single_descent_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..300 {
        let tree = random_tree(&mut rng, 20);
        let cfg = SearchConfig {
            ucb_descents: 1,
            beam_q_picks: 0,
            beam_max_value_picks: 0,
            seed: trial,
            ..Default::default()
        };
        let got = select_frontier(&tree, &cfg).ok().map(|f| f[0]);
        assert_eq!(got, brute_force_descent(&tree, &cfg), "trial {trial}");
    }
}

#[test]
fn descents_end_on_distinct_open_endpoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for trial in 0..200 {
        let tree = random_tree(&mut rng, 20);
        let cfg = SearchConfig {
            ucb_descents: 5,
            beam_q_picks: 0,
            beam_max_value_picks: 0,
            seed: trial,
            ..Default::default()
        };
        let endpoints = tree
            .nodes()
            .filter(|n| n.children().is_empty() && tree.is_expandable(n.id))
            .count();
        match select_frontier(&tree, &cfg) {
            Ok(f) => {
                assert_eq!(f.len(), endpoints.min(5), "trial {trial}");
                for id in &f {
                    let n = tree.node(*id).unwrap();
                    assert!(n.children().is_empty() && tree.is_expandable(*id));
                }
            }
            Err(_) => assert_eq!(endpoints, 0, "trial {trial}"),
        }
    }
}

#[test]
fn mean_q_picks_match_sorted_expandable_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..200 {
        let tree = random_tree(&mut rng, 20);
        let cfg = SearchConfig {
            ucb_descents: 0,
            beam_top_fraction: 0.25,
            beam_q_picks: 3,
            beam_max_value_picks: 0,
            unvisited_prior: 0.3,
            ..Default::default()
        };
        let mut ranked: Vec<(f64, NodeId)> = tree
            .nodes()
            .filter(|n| !n.is_root() && tree.is_expandable(n.id))
            .map(|n| (n.edge.action_value.unwrap_or(0.3), n.id))
            .collect();
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let take = ((ranked.len() as f64 * 0.25).ceil() as usize).min(3);
        let want: Vec<NodeId> = ranked.into_iter().take(take).map(|(_, id)| id).collect();
        match select_frontier(&tree, &cfg) {
            Ok(f) => assert_eq!(f, want, "trial {trial}"),
            Err(_) => assert!(want.is_empty(), "trial {trial}"),
        }
    }
}

const MOCK: &str = r#"
seed = 3
[search]
max_iterations = 12
frontier_cap = 12
ucb_descents = 6
[search.schedule]
first = 10
second = 4
later = 2
"#;

fn mock_search(cfg: &Config) -> SearchTree {
    let story = cfg.story_config().unwrap();
    let scorer = cfg.mock_scorer().unwrap();
    let corpus = synthetic_stories(40, &story, &scorer, 1).unwrap();
    let samples = featurize(
        &corpus,
        cfg.scorer().unwrap().as_ref(),
        cfg.embedder().unwrap().as_ref(),
        &cfg.value.features,
    )
    .unwrap();
    let model = fit_pipeline(&samples, &Hyperparams::default(), 0).unwrap();
    let base = PromptedPolicy {
        backend: cfg.generator(Role::PolicyBase).unwrap().unwrap(),
        story,
    };
    let simulator = PromptedSimulator {
        backend: cfg.generator(Role::Simulator).unwrap().unwrap(),
        story,
    };
    let evaluator = FeatureEvaluator {
        model: Arc::new(model),
        scorer: cfg.scorer().unwrap(),
        embedder: cfg.embedder().unwrap(),
        features: cfg.value.features,
        story,
    };
    let policies = Policies {
        base: &base,
        trained: None,
        simulator: &simulator,
    };
    run_search(
        "mock",
        &["A beekeeper inherits a hive that hums at night.".to_string()],
        story,
        &cfg.search_config(),
        &policies,
        &evaluator,
    )
    .unwrap()
    .tree
}

#[test]
fn mock_search_values_track_q_and_replay() {
    let cfg = Config::from_toml(MOCK).unwrap();
    let tree = mock_search(&cfg);
    let r = v_q_correlation(&tree).unwrap();
    assert!(r >= 0.8, "V-Q correlation {r}");

    let again = mock_search(&cfg);
    assert_eq!(tree.to_json().unwrap(), again.to_json().unwrap());

    let back = SearchTree::from_json(&tree.to_json().unwrap()).unwrap();
    assert_eq!(back, tree);
    let dot = tree.export(ExportFormat::Dot).unwrap();
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches("->").count(), tree.len() - tree.roots().len());
}

#[test]
fn different_seeds_give_different_trees() {
    let a = mock_search(&Config::from_toml(MOCK).unwrap());
    let b = mock_search(&Config::from_toml(&MOCK.replace("seed = 3", "seed = 4")).unwrap());
    assert_ne!(a.to_json().unwrap(), b.to_json().unwrap());
}
