//! Mining (chosen, rejected) action pairs from sibling edges of a finished
//! search tree, and writing them as a JSONL dataset for preference training.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::search::prompts::policy_prompt;
use crate::tree::{NodeId, SearchTree};

pub const PREFERENCE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinerConfig {
    /// Minimum `Q(chosen) - Q(rejected)`.
    pub min_delta_q: f64,
    /// `Q(chosen)` must exceed this.
    pub min_chosen_q: f64,
    /// Weight of `Q(chosen)` against the gap in the pair score.
    pub beta: f64,
    pub pairs_per_parent: usize,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            min_delta_q: 0.02,
            min_chosen_q: 0.5,
            beta: 0.5,
            pairs_per_parent: 3,
        }
    }
}

impl MinerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_delta_q >= 0.0) {
            return Err(Error::Config("min_delta_q must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config("beta must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.min_chosen_q) {
            return Err(Error::Config("min_chosen_q must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub parent: NodeId,
    pub chosen: NodeId,
    pub rejected: NodeId,
    pub q_chosen: f64,
    pub q_rejected: f64,
    pub score: f64,
}

/// `beta * Q(chosen) + (1 - beta) * delta_q`.
pub fn pair_score(q_chosen: f64, delta_q: f64, beta: f64) -> f64 {
    beta * q_chosen + (1.0 - beta) * delta_q
}

/// For every parent, the best-scoring qualifying sibling pairs. Only visited
/// edges take part. Output is ordered by parent id, then by descending score
/// with `(chosen, rejected)` ids breaking ties.
pub fn mine_pairs(tree: &SearchTree, cfg: &MinerConfig) -> Result<Vec<PreferencePair>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for parent in tree.nodes() {
        let visited: Vec<(NodeId, f64)> = parent
            .children()
            .iter()
            .filter_map(|c| {
                let q = tree.node(*c).ok()?.edge.action_value?;
                Some((*c, q))
            })
            .collect();
        let mut pairs = Vec::new();
        for &(ci, qi) in &visited {
            if qi <= cfg.min_chosen_q {
                continue;
            }
            for &(cj, qj) in &visited {
                if ci != cj && qi - qj >= cfg.min_delta_q {
                    pairs.push(PreferencePair {
                        parent: parent.id,
                        chosen: ci,
                        rejected: cj,
                        q_chosen: qi,
                        q_rejected: qj,
                        score: pair_score(qi, qi - qj, cfg.beta),
                    });
                }
            }
        }
        pairs.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.chosen.cmp(&b.chosen))
                .then(a.rejected.cmp(&b.rejected))
        });
        pairs.truncate(cfg.pairs_per_parent);
        out.extend(pairs);
    }
    Ok(out)
}

/// One line of the exported dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub schema_version: u32,
    /// Policy prompt rendered for the parent state.
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub q_chosen: f64,
    pub q_rejected: f64,
    pub score: f64,
    pub tree_id: String,
    pub parent_id: NodeId,
    pub chosen_id: NodeId,
    pub rejected_id: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub config: MinerConfig,
    pub count: usize,
    /// `(tree_id, sha256 of the tree JSON)` for every source tree.
    pub trees: Vec<(String, String)>,
}

pub fn tree_digest(tree: &SearchTree) -> Result<String> {
    Ok(hex::encode(Sha256::digest(tree.to_json()?.as_bytes())))
}

pub fn to_records(tree: &SearchTree, pairs: &[PreferencePair]) -> Result<Vec<PreferenceRecord>> {
    pairs
        .iter()
        .map(|p| {
            let action = |id: NodeId| -> Result<String> {
                Ok(tree
                    .node(id)?
                    .action
                    .as_ref()
                    .map(|a| a.text.clone())
                    .unwrap_or_default())
            };
            Ok(PreferenceRecord {
                schema_version: PREFERENCE_SCHEMA_VERSION,
                prompt: policy_prompt(&tree.state(p.parent)?, tree.config()),
                chosen: action(p.chosen)?,
                rejected: action(p.rejected)?,
                q_chosen: p.q_chosen,
                q_rejected: p.q_rejected,
                score: p.score,
                tree_id: tree.tree_id.clone(),
                parent_id: p.parent,
                chosen_id: p.chosen,
                rejected_id: p.rejected,
            })
        })
        .collect()
}

/// Mines every tree and writes `dataset` (JSONL) plus `manifest` (JSON).
pub fn export_dataset(
    trees: &[SearchTree],
    cfg: &MinerConfig,
    dataset: &Path,
    manifest: &Path,
) -> Result<DatasetManifest> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(dataset)?);
    let mut count = 0;
    let mut digests = Vec::with_capacity(trees.len());
    for tree in trees {
        let records = to_records(tree, &mine_pairs(tree, cfg)?)?;
        for r in &records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        count += records.len();
        digests.push((tree.tree_id.clone(), tree_digest(tree)?));
    }
    w.flush()?;
    let m = DatasetManifest {
        schema_version: PREFERENCE_SCHEMA_VERSION,
        config: *cfg,
        count,
        trees: digests,
    };
    std::fs::write(manifest, serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(m)
}
