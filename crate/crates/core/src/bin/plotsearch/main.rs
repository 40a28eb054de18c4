use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use plotsearch_core::analytics::{
    self, loglinear_fit, pf_days, rubric, speedup_table, trajectory, ExperimentSeries,
};
use plotsearch_core::backend::Role;
use plotsearch_core::config::Config;
use plotsearch_core::prefs::{export_dataset, MinerConfig};
use plotsearch_core::search::{
    run_search, FeatureEvaluator, IterationReport, Policies, PromptedPolicy, PromptedSimulator,
};
use plotsearch_core::synth::synthetic_stories;
use plotsearch_core::tree::{ExportFormat, SearchTree};
use plotsearch_core::value::corpus::{featurize, read_jsonl, write_jsonl, LabeledStory};
use plotsearch_core::value::cv::{cross_validate, CvConfig};
use plotsearch_core::value::features::{extract_features, FEATURE_NAMES};
use plotsearch_core::value::pipeline::{evaluate_model, fit_pipeline, Hyperparams, ValueModel};
use plotsearch_core::value::surprisal::surprisal_series;
use plotsearch_core::value::svm::Kernel;
use plotsearch_core::value::tune::{tune_curiosity, CuriositySample};

#[derive(Parser)]
#[command(
    name = "plotsearch",
    version,
    about = "Value-guided plot search for short stories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run tree search from a file of prompts (one per line).
    Search(SearchArgs),
    /// Mine preference pairs from finished trees into a JSONL dataset.
    MinePrefs(MineArgs),
    /// Scaling fits, speedups and V-Q correlation.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Rate stories with the judge backend on the nine-dimension rubric.
    Rate(RateArgs),
    /// Paired effect sizes for two score columns of a CSV file.
    Stats(StatsArgs),
    /// Train the value model on a labeled story corpus.
    TrainValue(TrainArgs),
    /// Evaluate a value model on a labeled story corpus.
    EvalValue(EvalArgs),
    /// Score one story: value and features.
    Score(ScoreArgs),
    /// Write a synthetic labeled corpus for the mock scorer.
    GenCorpus(GenCorpusArgs),
    /// Grid-search the interest curve on a labeled corpus.
    TuneCuriosity(TuneArgs),
    /// Convert a tree file to JSON or DOT.
    ExportTree(ExportArgs),
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    prompts: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Defaults to the prompt file stem.
    #[arg(long)]
    tree_id: Option<String>,
}

#[derive(Args)]
struct MineArgs {
    /// Tree JSON files.
    #[arg(long, required = true, num_args = 1..)]
    tree: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Takes the `[miner]` section; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    min_delta_q: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    pairs_per_parent: Option<usize>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Log-linear fit of V_max against ln(k), one experiment per report file.
    Fit {
        #[arg(long, required = true, num_args = 1..)]
        reports: Vec<PathBuf>,
        /// Per-iteration table with a PF-days column.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Throughput used for the PF-days column.
        #[arg(long, default_value_t = 35.0)]
        teraflops: f64,
        #[arg(long, default_value_t = 0.3)]
        utilization: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Iterations needed to beat the baseline V_max by a relative gain;
    /// speedups are relative to the first report.
    Speedup {
        #[arg(long, required = true, num_args = 1..)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.10)]
        gain: f64,
        #[arg(long, default_value_t = analytics::speedup::DEFAULT_BASELINE_K)]
        baseline_k: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pearson correlation of node values with incoming-edge Q.
    Vq {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Story text files.
    #[arg(long, required = true, num_args = 1..)]
    stories: Vec<PathBuf>,
    #[arg(long, default_value_t = 50)]
    repeats: usize,
    /// Attempts per repeat before it counts as a miss.
    #[arg(long, default_value_t = 3)]
    attempts: usize,
    /// Alternative prompt template with a `{story}` slot.
    #[arg(long)]
    template: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Linear,
    Rbf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// JSONL of labeled stories.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "rbf")]
    kernel: KernelArg,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = 8)]
    components: usize,
    /// Select C, kernel and components by group-aware cross-validation.
    #[arg(long)]
    cv: bool,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long)]
    cv_report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Plain text, one bullet per line.
    #[arg(long)]
    story: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenCorpusArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 100)]
    stories: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// `start:stop:step`, inclusive.
    #[arg(long, default_value = "2:8:0.25")]
    s0: String,
    #[arg(long, default_value = "0.2:2.0:0.2")]
    sigma: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// F1 grid as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Dot,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_tree(path: &Path) -> anyhow::Result<SearchTree> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SearchTree::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_model(cfg: &Config, flag: Option<&PathBuf>) -> anyhow::Result<ValueModel> {
    let path = flag
        .or(cfg.value.model.as_ref())
        .context("no value model: pass --model or set [value] model in the config")?;
    ValueModel::load(path).with_context(|| format!("loading value model {}", path.display()))
}

fn read_reports(path: &Path) -> anyhow::Result<Vec<IterationReport>> {
    read_jsonl(path).with_context(|| format!("reading reports {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn parse_range(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad range {spec:?}"))?;
    match parts.as_slice() {
        [v] => Ok(vec![*v]),
        [start, stop, step] if *step > 0.0 && stop >= start => {
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + i as f64 * step).collect())
        }
        _ => bail!("range must be `value` or `start:stop:step`, got {spec:?}"),
    }
}

fn cmd_search(args: SearchArgs) -> anyhow::Result<()> {
    let mut cfg = Config::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.iterations {
        cfg.search.max_iterations = n;
    }
    let story = cfg.story_config()?;
    let prompts: Vec<String> = std::fs::read_to_string(&args.prompts)
        .with_context(|| format!("reading {}", args.prompts.display()))?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let model = Arc::new(load_model(&cfg, None)?);

    let policy = |role| -> anyhow::Result<Option<PromptedPolicy>> {
        Ok(cfg
            .generator(role)?
            .map(|backend| PromptedPolicy { backend, story }))
    };
    let base = policy(Role::PolicyBase)?.context("policy_base backend is required")?;
    let trained = policy(Role::PolicyTrained)?;
    let simulator = PromptedSimulator {
        backend: cfg
            .generator(Role::Simulator)?
            .context("simulator backend is required")?,
        story,
    };
    let evaluator = FeatureEvaluator {
        model,
        scorer: cfg.scorer()?,
        embedder: cfg.embedder()?,
        features: cfg.value.features,
        story,
    };
    let policies = Policies {
        base: &base,
        trained: trained.as_ref().map(|p| p as _),
        simulator: &simulator,
    };
    let tree_id = args.tree_id.unwrap_or_else(|| stem(&args.prompts));
    let outcome = run_search(
        &tree_id,
        &prompts,
        story,
        &cfg.search_config(),
        &policies,
        &evaluator,
    )?;

    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("tree.json"), outcome.tree.to_json()?)?;
    write_jsonl(&args.out.join("reports.jsonl"), &outcome.reports)?;
    let summary = match outcome.tree.final_values() {
        Ok(fv) => {
            for (name, id) in [
                ("best_story.txt", fv.argmax),
                ("worst_story.txt", fv.argmin),
            ] {
                let state = outcome.tree.state(id)?;
                let text = format!("{}\n\n{}\n", state.prompt, state.text());
                std::fs::write(args.out.join(name), text)?;
            }
            serde_json::json!({
                "tree_id": tree_id,
                "iterations": outcome.reports.len(),
                "nodes": outcome.tree.len(),
                "evaluations": outcome.tree.evaluation_log().len(),
                "v_max_final": fv.v_max,
                "v_min_final": fv.v_min,
                "best_node": fv.argmax,
                "worst_node": fv.argmin,
            })
        }
        Err(_) => {
            log::warn!("no complete story was evaluated; no best/worst story written");
            serde_json::json!({
                "tree_id": tree_id,
                "iterations": outcome.reports.len(),
                "nodes": outcome.tree.len(),
                "evaluations": outcome.tree.evaluation_log().len(),
                "v_max_final": null,
            })
        }
    };
    emit(&summary, Some(&args.out.join("summary.json")))?;
    emit(&summary, None)
}

fn cmd_mine(args: MineArgs) -> anyhow::Result<()> {
    let mut miner = match &args.config {
        Some(p) => Config::load(p)?.miner,
        None => MinerConfig::default(),
    };
    if let Some(v) = args.min_delta_q {
        miner.min_delta_q = v;
    }
    if let Some(v) = args.beta {
        miner.beta = v;
    }
    if let Some(v) = args.pairs_per_parent {
        miner.pairs_per_parent = v;
    }
    let trees: Vec<SearchTree> = args
        .tree
        .iter()
        .map(|p| load_tree(p))
        .collect::<anyhow::Result<_>>()?;
    let manifest_path = args.manifest.unwrap_or_else(|| {
        let mut s = args.out.clone().into_os_string();
        s.push(".manifest.json");
        PathBuf::from(s)
    });
    let manifest = export_dataset(&trees, &miner, &args.out, &manifest_path)?;
    if manifest.count == 0 {
        log::warn!("no pairs passed the filters");
    }
    emit(&manifest, None)
}

fn fit_csv(
    path: &Path,
    runs: &[(String, Vec<IterationReport>)],
    teraflops: f64,
    utilization: f64,
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "group",
        "k",
        "ln_k",
        "v_max_final",
        "wall_time_s",
        "pf_days",
    ])?;
    for (group, reports) in runs {
        let mut elapsed = 0.0;
        for r in reports {
            elapsed += r.wall_time_ms / 1e3;
            let Some(v) = r.v_max_final else { continue };
            w.write_record([
                group.clone(),
                r.iteration.to_string(),
                (r.iteration as f64).ln().to_string(),
                v.to_string(),
                elapsed.to_string(),
                pf_days(elapsed, teraflops, utilization).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_analyze(cmd: AnalyzeCommand) -> anyhow::Result<()> {
    match cmd {
        AnalyzeCommand::Fit {
            reports,
            csv,
            teraflops,
            utilization,
            out,
        } => {
            let runs: Vec<(String, Vec<IterationReport>)> = reports
                .iter()
                .map(|p| Ok((stem(p), read_reports(p)?)))
                .collect::<anyhow::Result<_>>()?;
            let series: Vec<ExperimentSeries> = runs
                .iter()
                .map(|(group, reps)| ExperimentSeries {
                    group: group.clone(),
                    points: trajectory(reps)
                        .into_iter()
                        .map(|(k, v)| (k as f64, v))
                        .collect(),
                })
                .collect();
            if let Some(p) = csv {
                fit_csv(&p, &runs, teraflops, utilization)?;
            }
            emit(&loglinear_fit(&series)?, out.as_deref())
        }
        AnalyzeCommand::Speedup {
            reports,
            gain,
            baseline_k,
            out,
        } => {
            let trajectories: Vec<(String, Vec<(u64, f64)>)> = reports
                .iter()
                .map(|p| Ok((stem(p), trajectory(&read_reports(p)?))))
                .collect::<anyhow::Result<_>>()?;
            emit(
                &speedup_table(&trajectories, gain, baseline_k)?,
                out.as_deref(),
            )
        }
        AnalyzeCommand::Vq { tree, csv, out } => {
            let tree = load_tree(&tree)?;
            let pairs = analytics::vq::v_q_pairs(&tree);
            if let Some(p) = csv {
                let mut w = csv::Writer::from_path(p)?;
                w.write_record(["v", "q"])?;
                for (v, q) in &pairs {
                    w.write_record([v.to_string(), q.to_string()])?;
                }
                w.flush()?;
            }
            let r = analytics::v_q_correlation(&tree)?;
            emit(
                &serde_json::json!({ "pearson_r": r, "n": pairs.len() }),
                out.as_deref(),
            )
        }
    }
}

fn cmd_rate(args: RateArgs) -> anyhow::Result<()> {
    let cfg = Config::load(&args.config)?;
    let judge = cfg
        .generator(Role::Judge)?
        .context("judge backend is required")?;
    let template = match &args.template {
        Some(p) => std::fs::read_to_string(p)?,
        None => rubric::RUBRIC_TEMPLATE.to_string(),
    };
    let texts: Vec<String> = args
        .stories
        .iter()
        .map(|p| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
        .collect::<anyhow::Result<_>>()?;
    let results = rubric::rate_stories(
        judge.as_ref(),
        &template,
        &texts,
        args.repeats,
        args.attempts,
    );
    let mut rows = Vec::new();
    for (path, result) in args.stories.iter().zip(results) {
        let mut row = serde_json::json!({ "story": path.display().to_string() });
        match result {
            Ok(r) => {
                let dims: serde_json::Map<String, serde_json::Value> = rubric::RUBRIC_KEYS
                    .iter()
                    .zip(&r.dimension_means)
                    .map(|(k, v)| (k.to_string(), serde_json::json!(v)))
                    .collect();
                row["dimension_means"] = dims.into();
                row["overall_mean"] = r.overall_mean.into();
                row["ratings"] = r.ratings.len().into();
                row["misses"] = r.misses.into();
                row["malformed"] = r.malformed.into();
            }
            Err(e) => row["error"] = e.to_string().into(),
        }
        rows.push(row);
    }
    emit(&rows, args.out.as_deref())
}

fn cmd_stats(args: StatsArgs) -> anyhow::Result<()> {
    let mut rdr = csv::Reader::from_path(&args.csv)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("column {name:?} not in {}", args.csv.display()))
    };
    let (ia, ib) = (col(&args.a)?, col(&args.b)?);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> anyhow::Result<f64> {
            let field = rec.get(i).unwrap_or("").trim();
            field
                .parse()
                .with_context(|| format!("row {}: {field:?} is not a number", line + 2))
        };
        a.push(parse(ia)?);
        b.push(parse(ib)?);
    }
    emit(&analytics::effect_stats(&a, &b)?, args.out.as_deref())
}

fn load_corpus(path: &Path) -> anyhow::Result<Vec<LabeledStory>> {
    let corpus: Vec<LabeledStory> =
        read_jsonl(path).with_context(|| format!("reading corpus {}", path.display()))?;
    if corpus.is_empty() {
        bail!("corpus {} is empty", path.display());
    }
    Ok(corpus)
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let cfg = Config::load(&args.config)?;
    let corpus = load_corpus(&args.corpus)?;
    let (scorer, embedder) = (cfg.scorer()?, cfg.embedder()?);
    let samples = featurize(
        &corpus,
        scorer.as_ref(),
        embedder.as_ref(),
        &cfg.value.features,
    )?;
    let kernel = match args.kernel {
        KernelArg::Linear => Kernel::Linear,
        KernelArg::Rbf => Kernel::Rbf { gamma: args.gamma },
    };
    let mut hp = Hyperparams {
        c: args.c,
        kernel,
        n_components: args.components,
        ..Default::default()
    };
    let mut cv_loss = None;
    if args.cv {
        let mut grid = Vec::new();
        for c in [0.1, 1.0, 10.0] {
            for kernel in [
                Kernel::Linear,
                Kernel::Rbf { gamma: 0.05 },
                Kernel::Rbf { gamma: 0.2 },
            ] {
                for n_components in [4, 8, 14] {
                    grid.push(Hyperparams {
                        c,
                        kernel,
                        n_components,
                        ..Default::default()
                    });
                }
            }
        }
        let cv_cfg = CvConfig {
            folds: args.folds,
            repeats: args.repeats,
            seed: cfg.seed,
            ..Default::default()
        };
        let report = cross_validate(&samples, &grid, &cv_cfg)?;
        hp = report.best().hyperparams;
        cv_loss = Some(report.best().loss);
        if let Some(p) = &args.cv_report {
            emit(&report, Some(p))?;
        }
    }
    let mut model = fit_pipeline(&samples, &hp, cfg.seed)?;
    model.metadata.cv_loss = cv_loss;
    model.save(&args.out)?;
    emit(&model.metadata, None)
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let cfg = Config::load(&args.config)?;
    let model = load_model(&cfg, args.model.as_ref())?;
    let corpus = load_corpus(&args.corpus)?;
    let (scorer, embedder) = (cfg.scorer()?, cfg.embedder()?);
    let samples = featurize(
        &corpus,
        scorer.as_ref(),
        embedder.as_ref(),
        &cfg.value.features,
    )?;
    emit(&evaluate_model(&model, &samples)?, args.out.as_deref())
}

fn cmd_score(args: ScoreArgs) -> anyhow::Result<()> {
    let cfg = Config::load(&args.config)?;
    let model = load_model(&cfg, args.model.as_ref())?;
    let bullets: Vec<String> = std::fs::read_to_string(&args.story)?
        .lines()
        .map(|l| l.trim().trim_start_matches("- ").to_string())
        .filter(|l| !l.is_empty())
        .collect();
    let (scorer, embedder) = (cfg.scorer()?, cfg.embedder()?);
    let fv = extract_features(
        &bullets,
        scorer.as_ref(),
        embedder.as_ref(),
        &cfg.value.features,
    )?;
    let features: serde_json::Map<String, serde_json::Value> = FEATURE_NAMES
        .iter()
        .zip(fv.to_array())
        .map(|(k, v)| (k.to_string(), serde_json::json!(v)))
        .collect();
    let tokens = scorer
        .score_tokens(&bullets.join("\n"))
        .ok()
        .and_then(|lp| surprisal_series(&lp).ok())
        .map(|s| s.token_count());
    emit(
        &serde_json::json!({
            "value": model.predict(&fv),
            "bullets": bullets.len(),
            "tokens": tokens,
            "features": features,
        }),
        args.out.as_deref(),
    )
}

fn cmd_gen_corpus(args: GenCorpusArgs) -> anyhow::Result<()> {
    let cfg = Config::load(&args.config)?;
    let scorer = cfg.mock_scorer().context(
        "gen-corpus builds stories for the mock scorer; set [backends.scorer] kind = \"mock\"",
    )?;
    let stories = synthetic_stories(args.stories, &cfg.story_config()?, &scorer, args.seed)?;
    write_jsonl(&args.out, &stories)?;
    emit(
        &serde_json::json!({ "stories": args.stories, "records": stories.len() }),
        None,
    )
}

fn cmd_tune(args: TuneArgs) -> anyhow::Result<()> {
    let cfg = Config::load(&args.config)?;
    let corpus = load_corpus(&args.corpus)?;
    let scorer = cfg.scorer()?;
    let samples: Vec<CuriositySample> = corpus
        .iter()
        .map(|s| {
            let lp = scorer.score_tokens(&s.bullets.join("\n"))?;
            Ok(CuriositySample {
                series: surprisal_series(&lp)?,
                label: s.label,
                group: s.group.clone(),
            })
        })
        .collect::<plotsearch_core::Result<_>>()?;
    let report = tune_curiosity(
        &samples,
        &parse_range(&args.s0)?,
        &parse_range(&args.sigma)?,
        args.folds,
        args.repeats,
        args.seed,
    )?;
    if let Some(p) = &args.csv {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["s0", "sigma", "f1", "separation"])?;
        for (i, s0) in report.s0_grid.iter().enumerate() {
            for (j, sigma) in report.sigma_grid.iter().enumerate() {
                w.write_record([
                    s0.to_string(),
                    sigma.to_string(),
                    report.f1[i][j].to_string(),
                    report.separation[i][j].to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    emit(&report, args.out.as_deref())
}

fn cmd_export(args: ExportArgs) -> anyhow::Result<()> {
    let tree = load_tree(&args.tree)?;
    let format = match args.format {
        FormatArg::Json => ExportFormat::Json,
        FormatArg::Dot => ExportFormat::Dot,
    };
    let text = tree.export(format)?;
    match args.out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Search(a) => cmd_search(a),
        Command::MinePrefs(a) => cmd_mine(a),
        Command::Analyze(c) => cmd_analyze(c),
        Command::Rate(a) => cmd_rate(a),
        Command::Stats(a) => cmd_stats(a),
        Command::TrainValue(a) => cmd_train(a),
        Command::EvalValue(a) => cmd_eval(a),
        Command::Score(a) => cmd_score(a),
        Command::GenCorpus(a) => cmd_gen_corpus(a),
        Command::TuneCuriosity(a) => cmd_tune(a),
        Command::ExportTree(a) => cmd_export(a),
    }
}
