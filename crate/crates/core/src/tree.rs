//! Search-tree data model: story states, plot actions and per-edge statistics.
//!
//! Nodes live in an arena indexed by [`NodeId`]; ids are assigned in creation
//! order, so "lowest id" also means "created first". Every non-root node owns
//! the statistics of its single incoming edge, which makes the forest shape
//! structural rather than something to validate.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TREE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Shape of a story: `total_bullets = bullets_per_step * max_depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryConfig {
    pub total_bullets: usize,
    pub bullets_per_step: usize,
    pub max_depth: usize,
}

impl Default for StoryConfig {
    fn default() -> Self {
        Self {
            total_bullets: 32,
            bullets_per_step: 4,
            max_depth: 8,
        }
    }
}

impl StoryConfig {
    pub fn new(bullets_per_step: usize, max_depth: usize) -> Result<Self> {
        let cfg = Self {
            total_bullets: bullets_per_step * max_depth,
            bullets_per_step,
            max_depth,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bullets_per_step == 0 || self.max_depth == 0 {
            return Err(Error::Config(
                "bullets_per_step and max_depth must be positive".into(),
            ));
        }
        if self.total_bullets != self.bullets_per_step * self.max_depth {
            return Err(Error::Config(format!(
                "total_bullets {} != bullets_per_step {} * max_depth {}",
                self.total_bullets, self.bullets_per_step, self.max_depth
            )));
        }
        Ok(())
    }

    /// Fraction of the planned story length reached at `depth`.
    pub fn completion_fraction(&self, depth: usize) -> f64 {
        depth as f64 / self.max_depth as f64
    }
}

/// `depth / D` for a materialized state.
pub fn completion_fraction(node: &StoryState, cfg: &StoryConfig) -> f64 {
    cfg.completion_fraction(node.depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourcePolicy {
    Base,
    Trained,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotAction {
    pub text: String,
    pub source_policy: SourcePolicy,
}

impl PlotAction {
    pub fn new(text: impl Into<String>, source_policy: SourcePolicy) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::EmptyAction);
        }
        Ok(Self {
            text,
            source_policy,
        })
    }
}

/// Visit count `N`, cumulative value `W` and mean value `Q = W / N`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EdgeStats {
    pub visits: u64,
    pub cumulative_value: f64,
    /// `None` until the edge is visited.
    pub action_value: Option<f64>,
}

impl EdgeStats {
    pub fn record(&mut self, value: f64) {
        self.visits += 1;
        self.cumulative_value += value;
        self.action_value = Some(self.cumulative_value / self.visits as f64);
    }

    pub fn q_or(&self, prior: f64) -> f64 {
        self.action_value.unwrap_or(prior)
    }
}

/// Materialized view of a node: the full story prefix up to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryState {
    pub id: NodeId,
    pub prompt: String,
    pub bullets: Vec<String>,
    pub cot_history: Vec<String>,
    pub depth: usize,
    pub evaluated_value: Option<f64>,
}

impl StoryState {
    pub fn text(&self) -> String {
        self.bullets.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    /// Story prompt; set on roots only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    /// Action on the incoming edge; `None` for roots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<PlotAction>,
    /// Bullets added by this node's simulation step.
    pub bullets: Vec<String>,
    pub depth: usize,
    pub evaluated_value: Option<f64>,
    #[serde(default)]
    pub sterile: bool,
    /// Incoming edge statistics (unused on roots).
    #[serde(default)]
    pub edge: EdgeStats,
    #[serde(skip)]
    children: Vec<NodeId>,
}

impl Node {
    pub fn children(&self) -> &[NodeId] {
        &self.children
    }

    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub node: NodeId,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalValues {
    pub v_max: f64,
    pub v_min: f64,
    pub argmax: NodeId,
    pub argmin: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTree {
    pub tree_id: String,
    config: StoryConfig,
    nodes: Vec<Node>,
    roots: Vec<NodeId>,
    evaluation_log: Vec<Evaluation>,
}

#[derive(Serialize, Deserialize)]
struct TreeDocument {
    schema_version: u32,
    tree_id: String,
    config: StoryConfig,
    roots: Vec<NodeId>,
    nodes: Vec<Node>,
    evaluation_log: Vec<Evaluation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Dot,
}

impl SearchTree {
    pub fn new(config: StoryConfig, tree_id: impl Into<String>) -> Self {
        Self {
            tree_id: tree_id.into(),
            config,
            nodes: Vec::new(),
            roots: Vec::new(),
            evaluation_log: Vec::new(),
        }
    }

    pub fn config(&self) -> &StoryConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter()
    }

    pub fn evaluation_log(&self) -> &[Evaluation] {
        &self.evaluation_log
    }

    pub fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id.index()).ok_or(Error::UnknownNode(id))
    }

    fn node_mut(&mut self, id: NodeId) -> Result<&mut Node> {
        self.nodes.get_mut(id.index()).ok_or(Error::UnknownNode(id))
    }

    fn next_id(&self) -> NodeId {
        NodeId(u32::try_from(self.nodes.len()).expect("node count exceeds u32"))
    }

    pub fn add_root(&mut self, prompt: impl Into<String>) -> NodeId {
        let id = self.next_id();
        self.nodes.push(Node {
            id,
            parent: None,
            prompt: Some(prompt.into()),
            action: None,
            bullets: Vec::new(),
            depth: 0,
            evaluated_value: None,
            sterile: false,
            edge: EdgeStats::default(),
            children: Vec::new(),
        });
        self.roots.push(id);
        id
    }

    pub fn add_child(
        &mut self,
        parent: NodeId,
        action: PlotAction,
        bullets: Vec<String>,
    ) -> Result<NodeId> {
        let depth = self.node(parent)?.depth;
        if depth >= self.config.max_depth {
            return Err(Error::DepthOverflow {
                node: parent,
                max_depth: self.config.max_depth,
            });
        }
        if bullets.len() != self.config.bullets_per_step {
            return Err(Error::BulletCount {
                expected: self.config.bullets_per_step,
                got: bullets.len(),
            });
        }
        if action.text.trim().is_empty() {
            return Err(Error::EmptyAction);
        }
        let id = self.next_id();
        self.nodes.push(Node {
            id,
            parent: Some(parent),
            prompt: None,
            action: Some(action),
            bullets,
            depth: depth + 1,
            evaluated_value: None,
            sterile: false,
            edge: EdgeStats::default(),
            children: Vec::new(),
        });
        self.nodes[parent.index()].children.push(id);
        Ok(id)
    }

    pub fn mark_sterile(&mut self, id: NodeId) -> Result<()> {
        self.node_mut(id)?.sterile = true;
        Ok(())
    }

    pub fn is_expandable(&self, id: NodeId) -> bool {
        self.node(id)
            .map(|n| !n.sterile && n.depth < self.config.max_depth)
            .unwrap_or(false)
    }

    /// `N(s)`: incoming-edge visits, or the summed child visits for a root.
    pub fn node_visits(&self, id: NodeId) -> Result<u64> {
        let node = self.node(id)?;
        if node.is_root() {
            Ok(node
                .children
                .iter()
                .map(|c| self.nodes[c.index()].edge.visits)
                .sum())
        } else {
            Ok(node.edge.visits)
        }
    }

    /// Node ids from `id` up to and including its root.
    pub fn path_to_root(&self, id: NodeId) -> Result<Vec<NodeId>> {
        let mut path = vec![id];
        let mut cur = self.node(id)?;
        while let Some(p) = cur.parent {
            path.push(p);
            cur = &self.nodes[p.index()];
        }
        Ok(path)
    }

    pub fn root_of(&self, id: NodeId) -> Result<NodeId> {
        Ok(*self.path_to_root(id)?.last().expect("path is non-empty"))
    }

    pub fn state(&self, id: NodeId) -> Result<StoryState> {
        let path = self.path_to_root(id)?;
        let node = &self.nodes[id.index()];
        let mut bullets = Vec::with_capacity(node.depth * self.config.bullets_per_step);
        let mut cot_history = Vec::with_capacity(node.depth);
        let mut prompt = String::new();
        for nid in path.iter().rev() {
            let n = &self.nodes[nid.index()];
            if let Some(p) = &n.prompt {
                prompt.clone_from(p);
            }
            if let Some(a) = &n.action {
                cot_history.push(a.text.clone());
            }
            bullets.extend(n.bullets.iter().cloned());
        }
        Ok(StoryState {
            id,
            prompt,
            bullets,
            cot_history,
            depth: node.depth,
            evaluated_value: node.evaluated_value,
        })
    }

    /// Records `V(leaf)` and applies `N += 1`, `W += V`, `Q = W / N` to every
    /// edge on the root path.
    pub fn backpropagate(&mut self, leaf: NodeId, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ValueOutOfRange(value));
        }
        self.node(leaf)?;
        self.nodes[leaf.index()].evaluated_value = Some(value);
        let mut cur = leaf;
        while let Some(parent) = self.nodes[cur.index()].parent {
            self.nodes[cur.index()].edge.record(value);
            cur = parent;
        }
        self.evaluation_log.push(Evaluation { node: leaf, value });
        Ok(())
    }

    /// Edge statistics rebuilt from an empty table by replaying the log.
    pub fn replay_evaluation_log(&self) -> Vec<EdgeStats> {
        let mut stats = vec![EdgeStats::default(); self.nodes.len()];
        for ev in &self.evaluation_log {
            let mut cur = ev.node;
            while let Some(parent) = self.nodes[cur.index()].parent {
                stats[cur.index()].record(ev.value);
                cur = parent;
            }
        }
        stats
    }

    pub fn final_values(&self) -> Result<FinalValues> {
        let mut best: Option<FinalValues> = None;
        for node in &self.nodes {
            if node.depth != self.config.max_depth {
                continue;
            }
            let Some(v) = node.evaluated_value else {
                continue;
            };
            match &mut best {
                None => {
                    best = Some(FinalValues {
                        v_max: v,
                        v_min: v,
                        argmax: node.id,
                        argmin: node.id,
                    })
                }
                // nodes are visited in id order, so strict comparisons keep the lowest id on ties
                Some(fv) => {
                    if v > fv.v_max {
                        fv.v_max = v;
                        fv.argmax = node.id;
                    }
                    if v < fv.v_min {
                        fv.v_min = v;
                        fv.argmin = node.id;
                    }
                }
            }
        }
        best.ok_or(Error::NoFinalEvaluation)
    }

    pub fn export(&self, format: ExportFormat) -> Result<String> {
        match format {
            ExportFormat::Json => self.to_json(),
            ExportFormat::Dot => Ok(self.to_dot()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = TreeDocument {
            schema_version: TREE_SCHEMA_VERSION,
            tree_id: self.tree_id.clone(),
            config: self.config,
            roots: self.roots.clone(),
            nodes: self.nodes.clone(),
            evaluation_log: self.evaluation_log.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeDocument = serde_json::from_str(text)?;
        if doc.schema_version != TREE_SCHEMA_VERSION {
            return Err(Error::SchemaVersion(doc.schema_version));
        }
        doc.config.validate()?;
        let mut nodes = doc.nodes;
        for (i, node) in nodes.iter().enumerate() {
            if node.id.index() != i {
                return Err(Error::Degenerate(format!(
                    "node at position {i} has id {}",
                    node.id
                )));
            }
        }
        for i in 0..nodes.len() {
            if let Some(p) = nodes[i].parent {
                if p.index() >= i {
                    return Err(Error::Degenerate(format!(
                        "node {i} references parent {p} created after it"
                    )));
                }
                let id = nodes[i].id;
                nodes[p.index()].children.push(id);
            }
        }
        for ev in &doc.evaluation_log {
            if ev.node.index() >= nodes.len() {
                return Err(Error::UnknownNode(ev.node));
            }
        }
        Ok(Self {
            tree_id: doc.tree_id,
            config: doc.config,
            nodes,
            roots: doc.roots,
            evaluation_log: doc.evaluation_log,
        })
    }

    /// Graphviz rendering: vertices colored by incoming-edge Q bucket, with the
    /// path to the best final-depth story drawn bold.
    pub fn to_dot(&self) -> String {
        let best_path: Vec<NodeId> = self
            .final_values()
            .ok()
            .and_then(|fv| self.path_to_root(fv.argmax).ok())
            .unwrap_or_default();
        let on_best = |id: NodeId| best_path.contains(&id);

        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", escape_dot(&self.tree_id));
        let _ = writeln!(out, "  node [shape=circle, style=filled, fontsize=8];");
        for node in &self.nodes {
            let (color, q) = match node.edge.action_value {
                _ if node.is_root() => ("white", "root".to_string()),
                None => ("gray80", "Q=-".to_string()),
                Some(q) => (q_bucket_color(q), format!("Q={q:.2}")),
            };
            let pen = if on_best(node.id) { ", penwidth=3" } else { "" };
            let _ = writeln!(
                out,
                "  n{} [label=\"{}\\n{}\", fillcolor=\"{}\"{}];",
                node.id, node.id, q, color, pen
            );
        }
        for node in &self.nodes {
            if let Some(p) = node.parent {
                let attrs = if on_best(node.id) {
                    " [color=red, penwidth=3]"
                } else {
                    ""
                };
                let _ = writeln!(out, "  n{} -> n{}{};", p, node.id, attrs);
            }
        }
        out.push_str("}\n");
        out
    }
}

fn q_bucket_color(q: f64) -> &'static str {
    match q {
        q if q < 0.2 => "#d7191c",
        q if q < 0.4 => "#fdae61",
        q if q < 0.6 => "#ffffbf",
        q if q < 0.8 => "#a6d96a",
        _ => "#1a9641",
    }
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bullets(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("- event {i}")).collect()
    }

    fn action(t: &str) -> PlotAction {
        PlotAction::new(t, SourcePolicy::Base).unwrap()
    }

    #[test]
    fn add_child_from_root() {
        let mut tree = SearchTree::new(StoryConfig::default(), "t");
        let root = tree.add_root("prompt");
        let child = tree.add_child(root, action("a"), bullets(4)).unwrap();
        let node = tree.node(child).unwrap();
        assert_eq!(node.depth, 1);
        assert_eq!(node.edge.visits, 0);
        assert_eq!(node.edge.cumulative_value, 0.0);
        assert_eq!(node.edge.action_value, None);
    }

    #[test]
    fn add_child_depth_overflow() {
        let cfg = StoryConfig::new(4, 2).unwrap();
        let mut tree = SearchTree::new(cfg, "t");
        let mut cur = tree.add_root("p");
        for i in 0..2 {
            cur = tree
                .add_child(cur, action(&i.to_string()), bullets(4))
                .unwrap();
        }
        assert!(matches!(
            tree.add_child(cur, action("x"), bullets(4)),
            Err(Error::DepthOverflow { .. })
        ));
    }

    #[test]
    fn add_child_wrong_bullet_count() {
        let mut tree = SearchTree::new(StoryConfig::default(), "t");
        let root = tree.add_root("p");
        assert!(matches!(
            tree.add_child(root, action("a"), bullets(3)),
            Err(Error::BulletCount {
                expected: 4,
                got: 3
            })
        ));
        assert!(matches!(
            tree.add_child(NodeId(99), action("a"), bullets(4)),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn empty_action_rejected() {
        assert!(PlotAction::new("  ", SourcePolicy::Base).is_err());
    }

    #[test]
    fn completion_levels() {
        let cfg = StoryConfig::default();
        assert_eq!(cfg.completion_fraction(4), 0.5);
        assert_eq!(cfg.completion_fraction(5), 0.625);
        assert_eq!(cfg.completion_fraction(0), 0.0);
        assert_eq!(cfg.completion_fraction(8), 1.0);
        assert!(StoryConfig {
            total_bullets: 30,
            bullets_per_step: 4,
            max_depth: 8
        }
        .validate()
        .is_err());
    }

    #[test]
    fn state_accumulates_bullets_and_history() {
        let mut tree = SearchTree::new(StoryConfig::new(2, 3).unwrap(), "t");
        let root = tree.add_root("once");
        let a = tree
            .add_child(root, action("a1"), vec!["x".into(), "y".into()])
            .unwrap();
        let b = tree
            .add_child(a, action("a2"), vec!["z".into(), "w".into()])
            .unwrap();
        let s = tree.state(b).unwrap();
        assert_eq!(s.prompt, "once");
        assert_eq!(s.bullets, vec!["x", "y", "z", "w"]);
        assert_eq!(s.cot_history, vec!["a1", "a2"]);
        assert_eq!(s.depth, s.cot_history.len());
        assert_eq!(s.bullets.len(), s.depth * 2);
    }

    fn full_depth_tree(values: &[f64]) -> SearchTree {
        let cfg = StoryConfig::new(1, 2).unwrap();
        let mut tree = SearchTree::new(cfg, "t");
        let root = tree.add_root("p");
        let mid = tree.add_child(root, action("m"), vec!["b".into()]).unwrap();
        for (i, v) in values.iter().enumerate() {
            let leaf = tree
                .add_child(mid, action(&format!("l{i}")), vec!["c".into()])
                .unwrap();
            tree.backpropagate(leaf, *v).unwrap();
        }
        tree
    }

    #[test]
    fn final_values_max_min() {
        let tree = full_depth_tree(&[0.52, 0.64]);
        let fv = tree.final_values().unwrap();
        assert_eq!((fv.v_max, fv.v_min), (0.64, 0.52));
        assert_eq!(fv.argmax, NodeId(3));
        assert_eq!(fv.argmin, NodeId(2));

        let single = full_depth_tree(&[0.7]);
        let fv = single.final_values().unwrap();
        assert_eq!((fv.v_max, fv.v_min), (0.7, 0.7));

        let tie = full_depth_tree(&[0.5, 0.5]);
        assert_eq!(tie.final_values().unwrap().argmax, NodeId(2));

        let mut none = SearchTree::new(StoryConfig::default(), "t");
        none.add_root("p");
        assert!(matches!(none.final_values(), Err(Error::NoFinalEvaluation)));
    }

    #[test]
    fn backprop_updates_path() {
        let mut tree = SearchTree::new(StoryConfig::new(1, 2).unwrap(), "t");
        let root = tree.add_root("p");
        let a = tree.add_child(root, action("a"), vec!["x".into()]).unwrap();
        let b = tree.add_child(a, action("b"), vec!["y".into()]).unwrap();
        tree.backpropagate(b, 0.6).unwrap();
        for id in [a, b] {
            let e = tree.node(id).unwrap().edge;
            assert_eq!(
                (e.visits, e.cumulative_value, e.action_value),
                (1, 0.6, Some(0.6))
            );
        }
        tree.backpropagate(b, 0.8).unwrap();
        let e = tree.node(a).unwrap().edge;
        assert_eq!(e.visits, 2);
        assert!((e.cumulative_value - 1.4).abs() < 1e-15);
        assert!((e.action_value.unwrap() - 0.7).abs() < 1e-15);
        assert!(matches!(
            tree.backpropagate(b, 1.2),
            Err(Error::ValueOutOfRange(_))
        ));
        assert_eq!(tree.evaluation_log().len(), 2);
        assert_eq!(tree.node_visits(root).unwrap(), 2);
    }

    #[test]
    fn dot_counts() {
        let empty = SearchTree::new(StoryConfig::default(), "empty");
        let dot = empty.to_dot();
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches("->").count(), 0);
        assert_eq!(dot.matches("[label=").count(), 0);

        let mut tree = SearchTree::new(StoryConfig::default(), "chain");
        let r = tree.add_root("p");
        let a = tree.add_child(r, action("a"), bullets(4)).unwrap();
        tree.add_child(a, action("b"), bullets(4)).unwrap();
        let dot = tree.to_dot();
        assert_eq!(dot.matches("[label=").count(), 3);
        assert_eq!(dot.matches("->").count(), 2);
    }

    #[test]
    fn json_round_trip_preserves_stats() {
        let tree = full_depth_tree(&[0.1, 0.3333333333333333, 0.9]);
        let text = tree.export(ExportFormat::Json).unwrap();
        let back = SearchTree::from_json(&text).unwrap();
        assert_eq!(back, tree);
        for (a, b) in tree.nodes().zip(back.nodes()) {
            assert_eq!(a.edge, b.edge);
            assert_eq!(a.children(), b.children());
        }

        let empty = SearchTree::new(StoryConfig::default(), "e");
        let back = SearchTree::from_json(&empty.to_json().unwrap()).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn json_rejects_other_schema_version() {
        let tree = SearchTree::new(StoryConfig::default(), "e");
        let text = tree
            .to_json()
            .unwrap()
            .replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(
            SearchTree::from_json(&text),
            Err(Error::SchemaVersion(2))
        ));
    }
}
