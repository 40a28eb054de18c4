//! Python bindings. Structured results are returned as plain dicts and lists.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use plotsearch_core::analytics::{self, ExperimentSeries};
use plotsearch_core::backend::Role;
use plotsearch_core::config::Config;
use plotsearch_core::prefs::{self, MinerConfig};
use plotsearch_core::search::{
    self, FeatureEvaluator, Policies, PromptedPolicy, PromptedSimulator, SearchConfig,
};
use plotsearch_core::synth::OracleEnvironment;
use plotsearch_core::tree::ExportFormat;
use plotsearch_core::value::pipeline::ValueModel;
use plotsearch_core::value::surprisal::{self, CuriosityConfig, SurprisalSeries};
use plotsearch_core::SearchTree;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Interest of a token with the given surprisal (bits).
#[pyfunction]
#[pyo3(signature = (surprisal, optimal_surprisal = 4.0, spread = 0.6))]
fn interest(surprisal: f64, optimal_surprisal: f64, spread: f64) -> PyResult<f64> {
    let cfg = CuriosityConfig {
        optimal_surprisal,
        spread,
    };
    cfg.validate().map_err(err)?;
    Ok(surprisal::interest(surprisal, &cfg))
}

/// Mean interest over a surprisal series.
#[pyfunction]
#[pyo3(signature = (surprisals, optimal_surprisal = 4.0, spread = 0.6))]
fn curiosity_index(surprisals: Vec<f64>, optimal_surprisal: f64, spread: f64) -> PyResult<f64> {
    let cfg = CuriosityConfig {
        optimal_surprisal,
        spread,
    };
    cfg.validate().map_err(err)?;
    let series = SurprisalSeries::new(surprisals).map_err(err)?;
    Ok(surprisal::curiosity_index(&series, &cfg))
}

#[pyfunction]
fn ucb_score(q: f64, parent_visits: u64, edge_visits: u64, exploration: f64) -> f64 {
    search::ucb_score(q, parent_visits, edge_visits, exploration)
}

#[pyfunction]
#[pyo3(signature = (q_chosen, delta_q, beta = 0.5))]
fn pair_score(q_chosen: f64, delta_q: f64, beta: f64) -> f64 {
    prefs::pair_score(q_chosen, delta_q, beta)
}

#[pyfunction]
fn cles(d: f64) -> f64 {
    analytics::cles(d)
}

/// Paired effect sizes and Wilcoxon test for two score lists.
#[pyfunction]
fn effect_stats<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &analytics::effect_stats(&a, &b).map_err(err)?)
}

/// Log-linear fit over `{group: [(k, v_max), ...]}`.
#[pyfunction]
fn loglinear_fit<'py>(
    py: Python<'py>,
    groups: Vec<(String, Vec<(f64, f64)>)>,
) -> PyResult<Bound<'py, PyAny>> {
    let series: Vec<ExperimentSeries> = groups
        .into_iter()
        .map(|(group, points)| ExperimentSeries { group, points })
        .collect();
    to_py(py, &analytics::loglinear_fit(&series).map_err(err)?)
}

/// A search tree loaded from or produced by a search.
#[pyclass(name = "SearchTree", module = "plotsearch")]
struct PyTree {
    inner: SearchTree,
}

#[pymethods]
impl PyTree {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: SearchTree::from_json(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(err)?;
        Self::from_json(&text)
    }

    #[getter]
    fn tree_id(&self) -> String {
        self.inner.tree_id.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn to_dot(&self) -> PyResult<String> {
        self.inner.export(ExportFormat::Dot).map_err(err)
    }

    /// `(v_max, v_min, best_node, worst_node)` over complete stories.
    fn final_values(&self) -> PyResult<(f64, f64, u32, u32)> {
        let f = self.inner.final_values().map_err(err)?;
        Ok((f.v_max, f.v_min, f.argmax.0, f.argmin.0))
    }

    /// Full story text (prompt excluded) up to a node.
    fn story(&self, node: u32) -> PyResult<String> {
        Ok(self
            .inner
            .state(plotsearch_core::NodeId(node))
            .map_err(err)?
            .text())
    }

    #[pyo3(signature = (min_delta_q = 0.02, beta = 0.5, pairs_per_parent = 3))]
    fn mine_pairs<'py>(
        &self,
        py: Python<'py>,
        min_delta_q: f64,
        beta: f64,
        pairs_per_parent: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cfg = MinerConfig {
            min_delta_q,
            beta,
            pairs_per_parent,
            ..Default::default()
        };
        let pairs = prefs::mine_pairs(&self.inner, &cfg).map_err(err)?;
        to_py(py, &prefs::to_records(&self.inner, &pairs).map_err(err)?)
    }

    fn v_q_correlation(&self) -> PyResult<f64> {
        analytics::v_q_correlation(&self.inner).map_err(err)
    }

    /// True when replaying the evaluation log reproduces every edge exactly.
    fn replay_matches(&self) -> bool {
        let replayed = self.inner.replay_evaluation_log();
        self.inner.nodes().all(|n| n.edge == replayed[n.id.index()])
    }
}

/// Search a synthetic tree with known leaf values. Returns the tree and
/// whether the best leaf found is the true optimum.
#[pyfunction]
#[pyo3(signature = (branching = 3, depth = 4, iterations = 200, seed = 0, exploration = 1.0))]
fn oracle_search(
    branching: usize,
    depth: usize,
    iterations: usize,
    seed: u64,
    exploration: f64,
) -> PyResult<(PyTree, bool)> {
    let env = OracleEnvironment::new(branching, depth, seed);
    let cfg = SearchConfig {
        max_iterations: iterations,
        exploration,
        schedule: search::ExpansionSchedule {
            first: branching,
            second: branching,
            later: branching,
        },
        frontier_cap: 1,
        ucb_descents: 1,
        beam_q_picks: 0,
        beam_max_value_picks: 0,
        seed,
        ..Default::default()
    };
    let policies = Policies {
        base: &env,
        trained: None,
        simulator: &env,
    };
    let out = search::run_search(
        &format!("oracle-{seed}"),
        &["root".to_string()],
        env.story_config(),
        &cfg,
        &policies,
        &env,
    )
    .map_err(err)?;
    let best = out.tree.final_values().map_err(err)?;
    let state = out.tree.state(best.argmax).map_err(err)?;
    let found = env.leaf_index(&env.path_of(&state)) == env.optimum().0;
    Ok((PyTree { inner: out.tree }, found))
}

/// Run a search from a TOML config (same file format as the CLI). Returns
/// the tree and the per-iteration reports.
#[pyfunction]
#[pyo3(signature = (config, prompts, tree_id = "python".to_string(), seed = None))]
fn run_search<'py>(
    py: Python<'py>,
    config: PathBuf,
    prompts: Vec<String>,
    tree_id: String,
    seed: Option<u64>,
) -> PyResult<(PyTree, Bound<'py, PyAny>)> {
    let mut cfg = Config::load(&config).map_err(err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let story = cfg.story_config().map_err(err)?;
    let model_path = cfg
        .value
        .model
        .clone()
        .ok_or_else(|| err("config has no [value] model"))?;
    let model = Arc::new(ValueModel::load(&model_path).map_err(err)?);
    let generator = |role| -> PyResult<Option<Arc<dyn plotsearch_core::backend::Generator>>> {
        cfg.generator(role).map_err(err)
    };
    let base = PromptedPolicy {
        backend: generator(Role::PolicyBase)?.ok_or_else(|| err("policy_base is required"))?,
        story,
    };
    let trained = generator(Role::PolicyTrained)?.map(|backend| PromptedPolicy { backend, story });
    let simulator = PromptedSimulator {
        backend: generator(Role::Simulator)?.ok_or_else(|| err("simulator is required"))?,
        story,
    };
    let evaluator = FeatureEvaluator {
        model,
        scorer: cfg.scorer().map_err(err)?,
        embedder: cfg.embedder().map_err(err)?,
        features: cfg.value.features,
        story,
    };
    let policies = Policies {
        base: &base,
        trained: trained
            .as_ref()
            .map(|p| p as &dyn plotsearch_core::search::ActionProposer),
        simulator: &simulator,
    };
    let search_cfg = cfg.search_config();
    let out = py
        .detach(|| {
            search::run_search(
                &tree_id,
                &prompts,
                story,
                &search_cfg,
                &policies,
                &evaluator,
            )
        })
        .map_err(err)?;
    let reports = to_py(py, &out.reports)?;
    Ok((PyTree { inner: out.tree }, reports))
}

#[pymodule]
fn plotsearch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTree>()?;
    m.add_function(wrap_pyfunction!(interest, m)?)?;
    m.add_function(wrap_pyfunction!(curiosity_index, m)?)?;
    m.add_function(wrap_pyfunction!(ucb_score, m)?)?;
    m.add_function(wrap_pyfunction!(pair_score, m)?)?;
    m.add_function(wrap_pyfunction!(cles, m)?)?;
    m.add_function(wrap_pyfunction!(effect_stats, m)?)?;
    m.add_function(wrap_pyfunction!(loglinear_fit, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_search, m)?)?;
    m.add_function(wrap_pyfunction!(run_search, m)?)?;
    Ok(())
}
