//! Experiment plans: run attack methods over seeds, write per-cell reports,
//! a summary table and plot-ready curves.
//!
//! A plan is a JSON file. Every field except `graph`, `methods`, `budget`
//! and `seeds` is optional:
//!
//! ```json
//! {
//!   "graph": {"preset": "desk", "seed": 1},
//!   "methods": ["agent", "de", "ci", "gdm", "random", "agent-random-embedding"],
//!   "budget": 10,
//!   "seeds": [1, 2, 3],
//!   "weights": {"a_e": 0.01, "a_r": 0.0001},
//!   "out_dir": "results",
//!   "embed": {"d": 32, "epochs": 200},
//!   "agent": {"episodes": 500, "gamma": 0.0, "lr": 0.03},
//!   "ci_radius": 1,
//!   "gdm": {"sample_count": 300, "positive_quantile": 0.1},
//!   "mask": {"delete_fraction": 0.1, "add_fraction": 0.1},
//!   "retrain": {"epochs": 100, "dist_weight": 0.1},
//!   "artifacts": {"embeddings": "emb.bin", "qnet": "qnet.bin"}
//! }
//! ```
//!
//! `graph` may instead be `{"file": "g.json"}`. When `mask` is set, every
//! seed also runs the frozen agent on a perturbed copy of the graph
//! (`transfer`) next to degree and collective-influence attacks on that copy
//! (`mask-de`, `mask-ci`). Artifacts listed under `artifacts` are loaded
//! instead of being trained per seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{self, AgentConfig, QNetParams};
use crate::baselines::{self, GdmConfig};
use crate::cascade::RewardWeights;
use crate::embed::{self, EmbedConfig, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::CoupledGraph;
use crate::netgen::{self, GenConfig, Preset};
use crate::report::AttackReport;
use crate::tensor_io::{self, EmbeddingArtifact, TrainedNetwork};
use crate::transfer::{self, MaskSpec, RetrainConfig};

/// Environment variable capping the number of cells run at once.
pub const THREADS_ENV: &str = "INFRA_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Preset {
        preset: Preset,
        #[serde(default = "default_graph_seed")]
        seed: u64,
    },
    File { file: PathBuf },
}

impl GraphSource {
    pub fn load(&self) -> Result<CoupledGraph> {
        match self {
            GraphSource::Preset { preset, seed } => netgen::generate(&GenConfig::preset(*preset, *seed)),
            GraphSource::File { file } => {
                if !file.exists() {
                    return Err(Error::MissingArtifact(format!(
                        "graph file {} not found (run `infravuln generate` first)",
                        file.display()
                    )));
                }
                CoupledGraph::read(file)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Agent,
    De,
    Ci,
    Gdm,
    Random,
    AgentRandomEmbedding,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Agent => "agent",
            Method::De => "de",
            Method::Ci => "ci",
            Method::Gdm => "gdm",
            Method::Random => "random",
            Method::AgentRandomEmbedding => "agent-random-embedding",
        }
    }

    fn needs_embeddings(self) -> bool {
        matches!(self, Method::Agent | Method::Gdm)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub embeddings: Option<PathBuf>,
    pub qnet: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub graph: GraphSource,
    pub methods: Vec<Method>,
    pub budget: usize,
    pub seeds: Vec<u64>,
    /// `None` normalises each reward term by its intact total.
    #[serde(default)]
    pub weights: Option<RewardWeights>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub embed: EmbedConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default = "default_radius")]
    pub ci_radius: usize,
    #[serde(default)]
    pub gdm: GdmConfig,
    #[serde(default)]
    pub mask: Option<MaskSpec>,
    #[serde(default)]
    pub retrain: RetrainConfig,
    #[serde(default)]
    pub artifacts: Artifacts,
}

fn default_graph_seed() -> u64 {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_radius() -> usize {
    1
}

impl ExperimentPlan {
    /// Desk-scale comparison of every method, with the agent settings used
    /// throughout the test suite.
    pub fn desk(seeds: Vec<u64>, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentPlan {
            graph: GraphSource::Preset {
                preset: Preset::Desk,
                seed: 1,
            },
            methods: vec![
                Method::Agent,
                Method::De,
                Method::Ci,
                Method::Gdm,
                Method::Random,
                Method::AgentRandomEmbedding,
            ],
            budget: 10,
            seeds,
            weights: None,
            out_dir: out_dir.into(),
            embed: desk_embed_config(1),
            agent: desk_agent_config(10, 1),
            ci_radius: 1,
            gdm: GdmConfig::default(),
            mask: Some(MaskSpec::default()),
            retrain: RetrainConfig::default(),
            artifacts: Artifacts::default(),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingArtifact(format!("plan file {} not found", path.display())));
        }
        let plan: ExperimentPlan = serde_json::from_str(&fs::read_to_string(path)?)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("plan lists no methods".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("plan lists no seeds".into()));
        }
        if self.ci_radius == 0 {
            return Err(Error::InvalidConfig("ci_radius must be at least 1".into()));
        }
        if let Some(w) = &self.weights {
            w.validate()?;
        }
        if let Some(m) = &self.mask {
            m.validate()?;
        }
        self.embed.validate()?;
        self.retrain.validate()?;
        AgentConfig {
            budget: self.budget.max(1),
            ..self.agent.clone()
        }
        .validate()
    }

    fn uses_agent(&self) -> bool {
        self.methods.iter().any(|m| m.needs_embeddings() || *m == Method::AgentRandomEmbedding) || self.mask.is_some()
    }
}

/// Embedding settings for desk-scale experiments.
pub fn desk_embed_config(seed: u64) -> EmbedConfig {
    EmbedConfig {
        d: 32,
        seed,
        ..EmbedConfig::default()
    }
}

/// Agent settings for desk-scale experiments. On desk graphs the pooled
/// state barely moves within an episode, so bootstrapped targets add noise;
/// immediate-reward targets with a larger step learn a sharper ranking.
pub fn desk_agent_config(budget: usize, seed: u64) -> AgentConfig {
    AgentConfig {
        budget,
        gamma: 0.0,
        lr: 0.03,
        episodes: 500,
        seed,
        ..AgentConfig::default()
    }
}

/// Mean and sample standard deviation of one summary column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub runs: usize,
    pub cum_reward: Stat,
    pub power_fraction: Stat,
    pub anc: Stat,
}

/// Aggregates reports by method, keeping the first-seen method order.
pub fn summarize(reports: &[AttackReport]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    for r in reports {
        if !order.contains(&r.method.as_str()) {
            order.push(&r.method);
        }
    }
    order
        .into_iter()
        .map(|method| {
            let group: Vec<&AttackReport> = reports.iter().filter(|r| r.method == method).collect();
            let col = |f: fn(&AttackReport) -> f64| Stat::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                method: method.to_string(),
                runs: group.len(),
                cum_reward: col(AttackReport::final_cum_reward),
                power_fraction: col(AttackReport::final_power_fraction),
                anc: col(AttackReport::final_anc),
            }
        })
        .collect()
}

pub fn write_summary(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method",
        "runs",
        "cum_reward_mean",
        "cum_reward_std",
        "power_fraction_mean",
        "power_fraction_std",
        "anc_mean",
        "anc_std",
    ])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.runs.to_string(),
            r.cum_reward.mean.to_string(),
            r.cum_reward.std.to_string(),
            r.power_fraction.mean.to_string(),
            r.power_fraction.std.to_string(),
            r.anc.mean.to_string(),
            r.anc.std.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Everything a plan run produced.
#[derive(Clone, Debug)]
pub struct PlanOutcome {
    /// Cells in seed-major order, methods in plan order within a seed.
    pub reports: Vec<(u64, AttackReport)>,
    pub summary: Vec<SummaryRow>,
}

/// File name of one (method, seed) cell.
pub fn cell_file(method: &str, seed: u64) -> String {
    format!("{method}_seed{seed}.csv")
}

struct SharedArtifacts {
    embeddings: Option<EmbeddingArtifact>,
    qnet: Option<QNetParams>,
}

fn load_artifacts(plan: &ExperimentPlan, g: &CoupledGraph) -> Result<SharedArtifacts> {
    let embeddings = match &plan.artifacts.embeddings {
        None => None,
        Some(p) if !p.exists() => {
            return Err(Error::MissingArtifact(format!(
                "embeddings {} not found (run `infravuln embed` first)",
                p.display()
            )))
        }
        Some(p) => Some(tensor_io::read_embeddings(p)?),
    };
    if let Some(e) = &embeddings {
        if e.embeddings.node_count() != g.node_count() {
            return Err(Error::Shape {
                what: "embeddings",
                expected: format!("{} nodes", g.node_count()),
                found: format!("{} nodes", e.embeddings.node_count()),
            });
        }
    }
    let qnet = match &plan.artifacts.qnet {
        None => None,
        Some(p) if !p.exists() => {
            return Err(Error::MissingArtifact(format!(
                "q-network {} not found (run `infravuln train` first)",
                p.display()
            )))
        }
        Some(_) if embeddings.is_none() => {
            return Err(Error::MissingArtifact(
                "a stored q-network needs the embeddings it was trained on (artifacts.embeddings)".into(),
            ))
        }
        Some(p) => Some(tensor_io::read_qnet(p)?),
    };
    Ok(SharedArtifacts { embeddings, qnet })
}

fn run_seed(
    plan: &ExperimentPlan,
    g: &CoupledGraph,
    shared: &SharedArtifacts,
    weights: RewardWeights,
    seed: u64,
) -> Result<Vec<AttackReport>> {
    let k = plan.budget;
    let agent_cfg = AgentConfig {
        budget: k,
        seed,
        weights: Some(weights),
        ..plan.agent.clone()
    };
    let timed = |f: &dyn Fn() -> Result<AttackReport>| -> Result<AttackReport> {
        let t = Instant::now();
        let mut r = f()?;
        r.seconds = t.elapsed().as_secs_f64();
        Ok(r)
    };

    let needs_embeddings = plan.methods.iter().any(|m| m.needs_embeddings()) || plan.mask.is_some();
    let trained: Option<EmbeddingArtifact> = match (&shared.embeddings, needs_embeddings) {
        (Some(e), _) => Some(e.clone()),
        (None, true) => {
            let out = embed::pretrain(g, &EmbedConfig { seed, ..plan.embed.clone() })?;
            Some(EmbeddingArtifact {
                embeddings: out.embeddings,
                network: Some(TrainedNetwork {
                    params: out.params,
                    features: out.features,
                }),
            })
        }
        (None, false) => None,
    };
    let needs_q = plan.methods.contains(&Method::Agent) || plan.mask.is_some();
    let qnet = match (&shared.qnet, &trained) {
        (Some(q), _) => Some(q.clone()),
        (None, Some(t)) if needs_q => {
            let (q, log) = agent::train(g, &t.embeddings, &agent_cfg)?;
            log.save_csv(plan.out_dir.join(format!("agent_train_seed{seed}.csv")))?;
            Some(q)
        }
        _ => None,
    };

    let mut reports = Vec::new();
    for &m in &plan.methods {
        let report = match m {
            Method::Agent => {
                let (t, q) = (trained.as_ref().expect("built above"), qnet.as_ref().expect("built above"));
                timed(&|| agent::greedy_attack(g, &t.embeddings, q, k, weights))?
            }
            Method::De => timed(&|| baselines::de_attack(g, k, weights))?,
            Method::Ci => timed(&|| baselines::ci_attack(g, k, plan.ci_radius, weights))?,
            Method::Gdm => {
                let t = trained.as_ref().expect("built above");
                let cfg = GdmConfig {
                    seed,
                    ..plan.gdm.clone()
                };
                timed(&|| baselines::gdm_attack(g, &t.embeddings, k, &cfg, weights))?
            }
            Method::Random => timed(&|| baselines::random_attack(g, k, seed, weights))?,
            Method::AgentRandomEmbedding => {
                let z = embed::random_embeddings(g, plan.embed.d, seed);
                let (q, _) = agent::train(g, &z, &agent_cfg)?;
                let mut r = timed(&|| agent::greedy_attack(g, &z, &q, k, weights))?;
                r.method = m.name().into();
                r
            }
        };
        reports.push(report);
    }

    if let Some(spec) = &plan.mask {
        let t = trained.as_ref().expect("built above");
        let q = qnet.as_ref().expect("built above");
        let masked = transfer::mask_graph(g, &MaskSpec { seed, ..spec.clone() })?;
        let mask_weights = plan.weights.unwrap_or_else(|| RewardWeights::normalized(&masked));
        let z_new = transfer_embeddings(&masked, t, &RetrainConfig { seed, ..plan.retrain.clone() })?;
        reports.push(timed(&|| transfer::transfer_attack(&masked, &z_new, q, k, mask_weights))?);
        let mut de = timed(&|| baselines::de_attack(&masked, k, mask_weights))?;
        de.method = "mask-de".into();
        reports.push(de);
        let mut ci = timed(&|| baselines::ci_attack(&masked, k, plan.ci_radius, mask_weights))?;
        ci.method = "mask-ci".into();
        reports.push(ci);
    }
    Ok(reports)
}

/// Retrained embeddings for a mask graph. Random embeddings have no network
/// to retrain and are reused as they are.
pub fn transfer_embeddings(
    masked: &CoupledGraph,
    artifact: &EmbeddingArtifact,
    cfg: &RetrainConfig,
) -> Result<EmbeddingMatrix> {
    match &artifact.network {
        Some(net) => Ok(transfer::retrain(masked, &net.features, Some(&net.params), cfg)?.embeddings),
        None => Ok(artifact.embeddings.clone()),
    }
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs every (method, seed) cell of `plan`, writing one CSV per cell,
/// `summary.csv`, and the curve files into `plan.out_dir`.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanOutcome> {
    plan.validate()?;
    let g = plan.graph.load()?;
    let weights = match plan.weights {
        Some(w) => w,
        None => RewardWeights::normalized(&g),
    };
    let shared = if plan.uses_agent() {
        load_artifacts(plan, &g)?
    } else {
        SharedArtifacts {
            embeddings: None,
            qnet: None,
        }
    };
    let cells = plan.out_dir.join("cells");
    fs::create_dir_all(&cells)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let per_seed: Vec<Result<Vec<AttackReport>>> = pool.install(|| {
        plan.seeds
            .par_iter()
            .map(|&seed| {
                info!("seed {seed}: running {} methods", plan.methods.len());
                let reports = run_seed(plan, &g, &shared, weights, seed)?;
                for r in &reports {
                    r.save_csv(cells.join(cell_file(&r.method, seed)))?;
                }
                Ok(reports)
            })
            .collect()
    });

    let mut reports = Vec::new();
    for (seed, res) in plan.seeds.iter().zip(per_seed) {
        reports.extend(res?.into_iter().map(|r| (*seed, r)));
    }
    let flat: Vec<AttackReport> = reports.iter().map(|(_, r)| r.clone()).collect();
    let summary = summarize(&flat);
    write_summary(&summary, plan.out_dir.join("summary.csv"))?;
    emit_curves(&mean_curves(&flat), &plan.out_dir)?;
    Ok(PlanOutcome { reports, summary })
}

/// Per-method mean of every series across seeds. Node lists are dropped.
pub fn mean_curves(reports: &[AttackReport]) -> Vec<AttackReport> {
    summarize(reports)
        .iter()
        .map(|row| {
            let group: Vec<&AttackReport> = reports.iter().filter(|r| r.method == row.method).collect();
            let n = group.len() as f64;
            let mean = |f: fn(&AttackReport) -> &Vec<f64>| -> Vec<f64> {
                (0..f(group[0]).len())
                    .map(|i| group.iter().map(|r| f(r)[i]).sum::<f64>() / n)
                    .collect()
            };
            AttackReport {
                method: row.method.clone(),
                nodes: Vec::new(),
                power: mean(|r| &r.power),
                sigma: mean(|r| &r.sigma),
                gcc: (0..group[0].gcc.len())
                    .map(|i| (group.iter().map(|r| r.gcc[i] as f64).sum::<f64>() / n).round() as usize)
                    .collect(),
                anc: mean(|r| &r.anc),
                reward: mean(|r| &r.reward),
                cum_reward: mean(|r| &r.cum_reward),
                seconds: group.iter().map(|r| r.seconds).sum::<f64>() / n,
            }
        })
        .collect()
}

pub const CURVE_METRICS: [&str; 6] = ["power", "sigma", "gcc", "anc", "reward", "cum_reward"];

fn series(r: &AttackReport, metric: &str) -> Vec<f64> {
    match metric {
        "power" => r.power.clone(),
        "sigma" => r.sigma.clone(),
        "gcc" => r.gcc.iter().map(|&x| x as f64).collect(),
        "anc" => r.anc.clone(),
        "reward" => r.reward.clone(),
        "cum_reward" => r.cum_reward.clone(),
        _ => unreachable!("unknown metric {metric}"),
    }
}

/// Writes `curves.csv` (method, step, metric, value) and one SVG line chart
/// per metric into `dir`. Returns the written paths.
pub fn emit_curves(reports: &[AttackReport], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let first = reports.first().ok_or(Error::Empty("no reports to plot"))?;
    let steps = first.power.len();
    if let Some(r) = reports.iter().find(|r| r.power.len() != steps) {
        return Err(Error::BudgetMismatch(steps - 1, r.power.len() - 1));
    }
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("curves.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["method", "step", "metric", "value"])?;
    for r in reports {
        for metric in CURVE_METRICS {
            for (k, v) in series(r, metric).iter().enumerate() {
                w.write_record([r.method.as_str(), &k.to_string(), metric, &v.to_string()])?;
            }
        }
    }
    w.flush()?;
    let mut paths = vec![csv_path];
    for metric in CURVE_METRICS {
        let path = dir.join(format!("curve_{metric}.svg"));
        fs::write(&path, render_svg(reports, metric))?;
        paths.push(path);
    }
    Ok(paths)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polylines of one metric against the number of damaged nodes.
pub fn render_svg(reports: &[AttackReport], metric: &str) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 60.0, 150.0, 30.0, 40.0);
    let data: Vec<Vec<f64>> = reports.iter().map(|r| series(r, metric)).collect();
    let steps = data.iter().map(Vec::len).max().unwrap_or(1).max(2) - 1;
    let lo = data.iter().flatten().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let mut hi = data.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        hi = lo + 1.0;
    }
    let x = |k: usize| left + (w - left - right) * k as f64 / steps as f64;
    let y = |v: f64| h - bottom - (h - top - bottom) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r##"<rect width="{w}" height="{h}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        (w - right + left) / 2.0,
        escape(metric)
    );
    let (x0, x1, y0, y1) = (left, w - right, h - bottom, top);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for k in 0..=steps {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{k}</text>"#,
            x(k),
            y0 + 14.0
        );
    }
    for v in [lo, (lo + hi) / 2.0, hi] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            y(v) + 3.0,
            format_tick(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">damaged nodes</text>"#,
        (x0 + x1) / 2.0,
        h - 6.0
    );
    for (i, (r, vals)) in reports.iter().zip(&data).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = vals.iter().enumerate().map(|(k, &v)| format!("{:.2},{:.2}", x(k), y(v))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            x1 + 10.0,
            x1 + 30.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            x1 + 35.0,
            ly + 4.0,
            escape(&r.method)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}
