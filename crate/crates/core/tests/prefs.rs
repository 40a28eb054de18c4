use plotsearch_core::prefs::{
    export_dataset, mine_pairs, tree_digest, MinerConfig, PreferenceRecord,
    PREFERENCE_SCHEMA_VERSION,
};
use plotsearch_core::search::prompts::policy_prompt;
use plotsearch_core::tree::{PlotAction, SourcePolicy};
use plotsearch_core::value::corpus::read_jsonl;
use plotsearch_core::{NodeId, SearchTree, StoryConfig};

fn star(id: &str, qs: &[f64]) -> SearchTree {
    let mut t = SearchTree::new(StoryConfig::new(1, 2).unwrap(), id);
    let r = t.add_root("A diver finds a door on the sea floor.");
    for (i, q) in qs.iter().enumerate() {
        let a = PlotAction::new(format!("direction {i}"), SourcePolicy::Base).unwrap();
        let c = t.add_child(r, a, vec![format!("bullet {i}")]).unwrap();
        t.backpropagate(c, *q).unwrap();
    }
    t
}

#[test]
fn best_action_fills_the_parent_quota() {
    let t = star("t", &[0.9, 0.6, 0.55, 0.3]);
    let pairs = mine_pairs(&t, &MinerConfig::default()).unwrap();
    assert_eq!(pairs.len(), 3);
    assert!(pairs.iter().all(|p| p.chosen == NodeId(1)));
    let rejected: Vec<NodeId> = pairs.iter().map(|p| p.rejected).collect();
    assert_eq!(rejected, vec![NodeId(4), NodeId(3), NodeId(2)]);
    assert!(pairs.windows(2).all(|w| w[0].score >= w[1].score));
}

#[test]
fn quota_and_filters_are_configurable() {
    let t = star("t", &[0.9, 0.6, 0.55, 0.3]);
    let wide = MinerConfig {
        pairs_per_parent: 10,
        ..Default::default()
    };
    // 0.9 beats three, 0.6 and 0.55 beat 0.3; 0.6 vs 0.55 clears 0.02
    assert_eq!(mine_pairs(&t, &wide).unwrap().len(), 6);
    let strict = MinerConfig {
        min_delta_q: 0.4,
        pairs_per_parent: 10,
        ..Default::default()
    };
    // only 0.9 vs 0.3 clears a 0.4 gap
    assert_eq!(mine_pairs(&t, &strict).unwrap().len(), 1);
    let bad = MinerConfig {
        beta: 1.5,
        ..Default::default()
    };
    assert!(mine_pairs(&t, &bad).is_err());
}

#[test]
fn dataset_round_trip_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let trees = vec![star("one", &[0.9, 0.6, 0.3]), star("two", &[0.2, 0.8])];
    let cfg = MinerConfig::default();
    let (data, manifest) = (dir.path().join("p.jsonl"), dir.path().join("p.json"));
    let m = export_dataset(&trees, &cfg, &data, &manifest).unwrap();

    let records: Vec<PreferenceRecord> = read_jsonl(&data).unwrap();
    assert_eq!(records.len(), m.count);
    assert_eq!(m.count, 3 + 1);
    assert_eq!(m.config, cfg);
    assert_eq!(
        m.trees[0],
        ("one".to_string(), tree_digest(&trees[0]).unwrap())
    );
    assert_eq!(m.trees[0].1.len(), 64);

    let r = &records[0];
    assert_eq!(r.schema_version, PREFERENCE_SCHEMA_VERSION);
    assert_eq!(
        (r.chosen.as_str(), r.rejected.as_str()),
        ("direction 0", "direction 2")
    );
    let parent = trees[0].state(r.parent_id).unwrap();
    assert_eq!(r.prompt, policy_prompt(&parent, trees[0].config()));
    assert!(r.q_chosen - r.q_rejected >= cfg.min_delta_q && r.q_chosen > 0.5);
    assert_eq!(records[3].tree_id, "two");

    let text = std::fs::read_to_string(&manifest).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed["count"], 4);
    assert_eq!(parsed["config"]["pairs_per_parent"], 3);
}

#[test]
fn export_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let trees = vec![star("t", &[0.9, 0.7, 0.65, 0.1, 0.95])];
    let paths: Vec<_> = (0..2)
        .map(|i| {
            let d = dir.path().join(format!("d{i}.jsonl"));
            let m = dir.path().join(format!("m{i}.json"));
            export_dataset(&trees, &MinerConfig::default(), &d, &m).unwrap();
            (d, m)
        })
        .collect();
    for k in [0, 1] {
        let read = |i: usize| {
            let p = if k == 0 { &paths[i].0 } else { &paths[i].1 };
            std::fs::read(p).unwrap()
        };
        assert_eq!(read(0), read(1));
    }
}

#[test]
fn empty_dataset_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let trees = vec![star("flat", &[0.3, 0.31])];
    let d = dir.path().join("d.jsonl");
    let m = export_dataset(
        &trees,
        &MinerConfig::default(),
        &d,
        &dir.path().join("m.json"),
    )
    .unwrap();
    assert_eq!(m.count, 0);
    assert_eq!(std::fs::read_to_string(d).unwrap(), "");
}
