use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use infravuln::agent::{self, AgentConfig};
use infravuln::baselines::{self, BaselineKind, GdmConfig};
use infravuln::cascade::RewardWeights;
use infravuln::embed::{self, Aggregator, EmbedConfig};
use infravuln::graph::CoupledGraph;
use infravuln::harness::{self, ExperimentPlan};
use infravuln::netgen::{self, GenConfig, Preset, RoadModel};
use infravuln::report::AttackRecorder;
use infravuln::tensor_io::{self, EmbeddingArtifact, TrainedNetwork};
use infravuln::transfer::{self, MaskSpec, RetrainConfig};

/// Vulnerable node detection in coupled electricity and road networks.
#[derive(Parser)]
#[command(name = "infravuln", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic coupled graph.
    Generate(GenerateArgs),
    /// Damage a fixed list of nodes and report the cascade metrics.
    Attack(AttackArgs),
    /// Pretrain node embeddings.
    Embed(EmbedArgs),
    /// Train the Q-network agent.
    Train(TrainArgs),
    /// Run a reference attack.
    Baseline(BaselineArgs),
    /// Attack an edge-perturbed copy of the graph with a frozen Q-network.
    Transfer(TransferArgs),
    /// Run an experiment plan.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    City,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoadArg {
    Grid,
    RandomPlanarLike,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "desk")]
    preset: PresetArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n_220: Option<usize>,
    /// 110kV children per 220kV station, as `min,max`.
    #[arg(long, value_parser = parse_range::<usize>)]
    fanout_110: Option<(usize, usize)>,
    /// 10kV children per 110kV station, as `min,max`.
    #[arg(long, value_parser = parse_range::<usize>)]
    fanout_10: Option<(usize, usize)>,
    #[arg(long)]
    road_nodes: Option<usize>,
    #[arg(long, value_enum)]
    road_model: Option<RoadArg>,
    #[arg(long)]
    coupling_fraction: Option<f64>,
    /// 10kV load range, as `min,max`.
    #[arg(long, value_parser = parse_range::<u32>)]
    load_range: Option<(u32, u32)>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Comma-separated node ids, damaged in order.
    #[arg(long, value_delimiter = ',')]
    nodes: Vec<usize>,
    /// Reward weights as `ae=..,ar=..`; defaults to normalised weights.
    #[arg(long, value_parser = parse_weights)]
    weights: Option<RewardWeights>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    #[arg(long, default_value_t = 1)]
    neg_ratio: usize,
    #[arg(long, value_enum, default_value = "sum-mean")]
    aggregator: AggregatorArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write random embeddings instead of training.
    #[arg(long)]
    random: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregatorArg {
    SumMean,
    Mean,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    emb: PathBuf,
    #[arg(long, default_value_t = 10)]
    budget: usize,
    #[arg(long, default_value_t = 500)]
    episodes: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 100_000)]
    buffer_size: usize,
    #[arg(long, default_value_t = 100)]
    target_sync: usize,
    #[arg(long, default_value_t = 1.0)]
    eps_start: f64,
    #[arg(long, default_value_t = 0.05)]
    eps_end: f64,
    /// Steps over which epsilon decays; defaults to half of training.
    #[arg(long)]
    eps_decay_steps: Option<usize>,
    #[arg(long, value_parser = parse_weights)]
    weights: Option<RewardWeights>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    De,
    Ci,
    Gdm,
    Random,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    emb: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    budget: usize,
    #[arg(long, default_value_t = 1)]
    radius: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    sample_count: usize,
    #[arg(long, default_value_t = 0.1)]
    positive_quantile: f64,
    #[arg(long, value_parser = parse_weights)]
    weights: Option<RewardWeights>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TransferArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    mask_delete: f64,
    #[arg(long, default_value_t = 0.1)]
    mask_add: f64,
    #[arg(long, default_value_t = 1)]
    mask_seed: u64,
    #[arg(long)]
    emb: PathBuf,
    #[arg(long)]
    qnet: PathBuf,
    #[arg(long, default_value_t = 10)]
    budget: usize,
    #[arg(long, default_value_t = 100)]
    retrain_epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    dist_weight: f64,
    #[arg(long, default_value_t = 1e-3)]
    retrain_lr: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_parser = parse_weights)]
    weights: Option<RewardWeights>,
    /// Also write the mask graph.
    #[arg(long)]
    mask_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Output directory; overrides the plan's `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range<T: std::str::FromStr>(s: &str) -> Result<(T, T), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `min,max`, got `{s}`"))?;
    let p = |x: &str| x.trim().parse::<T>().map_err(|_| format!("bad number `{x}`"));
    Ok((p(a)?, p(b)?))
}

fn parse_weights(s: &str) -> Result<RewardWeights, String> {
    let (mut ae, mut ar) = (None, None);
    for part in s.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected `key=value`, got `{part}`"))?;
        let v: f64 = v.trim().parse().map_err(|_| format!("bad number `{v}`"))?;
        match k.trim() {
            "ae" | "a_e" => ae = Some(v),
            "ar" | "a_r" => ar = Some(v),
            other => return Err(format!("unknown weight `{other}` (use ae, ar)")),
        }
    }
    match (ae, ar) {
        (Some(ae), Some(ar)) => RewardWeights::new(ae, ar).map_err(|e| e.to_string()),
        _ => Err("both ae and ar are required".into()),
    }
}

/// Fails early with the subcommand that produces a missing input.
fn require(path: &Path, producer: &str) -> anyhow::Result<()> {
    if !path.exists() {
        bail!("{} not found; create it with `infravuln {producer}`", path.display());
    }
    Ok(())
}

fn read_graph(path: &Path) -> anyhow::Result<CoupledGraph> {
    require(path, "generate")?;
    CoupledGraph::read(path).with_context(|| format!("reading graph {}", path.display()))
}

fn read_embeddings(path: &Path, g: &CoupledGraph) -> anyhow::Result<EmbeddingArtifact> {
    require(path, "embed")?;
    let art = tensor_io::read_embeddings(path).with_context(|| format!("reading embeddings {}", path.display()))?;
    if art.embeddings.node_count() != g.node_count() {
        bail!(
            "embeddings cover {} nodes but the graph has {}",
            art.embeddings.node_count(),
            g.node_count()
        );
    }
    Ok(art)
}

fn write_sidecar(path: &Path, config: &impl Serialize) -> anyhow::Result<()> {
    tensor_io::write_sidecar(path, config).with_context(|| format!("writing sidecar for {}", path.display()))
}

fn generate(a: GenerateArgs) -> anyhow::Result<()> {
    let preset = match a.preset {
        PresetArg::Desk => Preset::Desk,
        PresetArg::City => Preset::City,
    };
    let mut cfg = GenConfig::preset(preset, a.seed);
    if let Some(x) = a.n_220 {
        cfg.n_220 = x;
    }
    if let Some(x) = a.fanout_110 {
        cfg.fanout_110 = x;
    }
    if let Some(x) = a.fanout_10 {
        cfg.fanout_10 = x;
    }
    if let Some(x) = a.road_nodes {
        cfg.road_nodes = x;
    }
    if let Some(x) = a.road_model {
        cfg.road_model = match x {
            RoadArg::Grid => RoadModel::Grid,
            RoadArg::RandomPlanarLike => RoadModel::RandomPlanarLike,
        };
    }
    if let Some(x) = a.coupling_fraction {
        cfg.coupling_fraction = x;
    }
    if let Some(x) = a.load_range {
        cfg.load_range = x;
    }
    let g = netgen::generate(&cfg)?;
    g.write(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("{g}");
    Ok(())
}

fn attack(a: AttackArgs) -> anyhow::Result<()> {
    let g = read_graph(&a.graph)?;
    let weights = a.weights.unwrap_or_else(|| RewardWeights::normalized(&g));
    let mut rec = AttackRecorder::new("manual", &g, weights);
    for &v in &a.nodes {
        rec.apply(v).with_context(|| format!("damaging node {v}"))?;
    }
    rec.finish().save_csv(&a.out)?;
    Ok(())
}

fn embed_cmd(a: EmbedArgs) -> anyhow::Result<()> {
    let g = read_graph(&a.graph)?;
    let cfg = EmbedConfig {
        d: a.d,
        depth: a.depth,
        margin: a.margin,
        lambda: a.lambda,
        lr: a.lr,
        epochs: a.epochs,
        neg_ratio: a.neg_ratio,
        seed: a.seed,
        aggregator: match a.aggregator {
            AggregatorArg::SumMean => Aggregator::SumMean,
            AggregatorArg::Mean => Aggregator::Mean,
        },
        ..EmbedConfig::default()
    };
    let art = if a.random {
        EmbeddingArtifact {
            embeddings: embed::random_embeddings(&g, a.d, a.seed),
            network: None,
        }
    } else {
        let out = embed::pretrain(&g, &cfg)?;
        EmbeddingArtifact {
            embeddings: out.embeddings,
            network: Some(TrainedNetwork {
                params: out.params,
                features: out.features,
            }),
        }
    };
    tensor_io::write_embeddings(&a.out, &art)?;
    #[derive(Serialize)]
    struct Sidecar<'a> {
        graph: &'a Path,
        random: bool,
        config: &'a EmbedConfig,
    }
    write_sidecar(
        &a.out,
        &Sidecar {
            graph: &a.graph,
            random: a.random,
            config: &cfg,
        },
    )
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let g = read_graph(&a.graph)?;
    let art = read_embeddings(&a.emb, &g)?;
    let cfg = AgentConfig {
        budget: a.budget,
        gamma: a.gamma,
        eps_start: a.eps_start,
        eps_end: a.eps_end,
        eps_decay_steps: a.eps_decay_steps,
        buffer_size: a.buffer_size,
        batch_size: a.batch_size,
        target_sync: a.target_sync,
        lr: a.lr,
        episodes: a.episodes,
        seed: a.seed,
        weights: a.weights,
        ..AgentConfig::default()
    };
    let (params, log) = agent::train(&g, &art.embeddings, &cfg)?;
    tensor_io::write_qnet(&a.out, &params)?;
    if let Some(p) = &a.log {
        log.save_csv(p)?;
    }
    #[derive(Serialize)]
    struct Sidecar<'a> {
        graph: &'a Path,
        embeddings: &'a Path,
        config: &'a AgentConfig,
    }
    write_sidecar(
        &a.out,
        &Sidecar {
            graph: &a.graph,
            embeddings: &a.emb,
            config: &cfg,
        },
    )
}

fn baseline(a: BaselineArgs) -> anyhow::Result<()> {
    let g = read_graph(&a.graph)?;
    let weights = a.weights.unwrap_or_else(|| RewardWeights::normalized(&g));
    let kind = match a.kind {
        KindArg::De => BaselineKind::De,
        KindArg::Ci => BaselineKind::Ci { radius: a.radius },
        KindArg::Gdm => BaselineKind::Gdm(GdmConfig {
            sample_count: a.sample_count,
            positive_quantile: a.positive_quantile,
            seed: a.seed,
            ..GdmConfig::default()
        }),
        KindArg::Random => BaselineKind::Random { seed: a.seed },
    };
    let art = a.emb.as_deref().map(|p| read_embeddings(p, &g)).transpose()?;
    let report = baselines::run_baseline(&g, &kind, a.budget, art.as_ref().map(|x| &x.embeddings), weights)?;
    report.save_csv(&a.out)?;
    Ok(())
}

fn transfer_cmd(a: TransferArgs) -> anyhow::Result<()> {
    let g = read_graph(&a.graph)?;
    let art = read_embeddings(&a.emb, &g)?;
    require(&a.qnet, "train")?;
    let q = tensor_io::read_qnet(&a.qnet).with_context(|| format!("reading q-network {}", a.qnet.display()))?;
    let spec = MaskSpec {
        delete_fraction: a.mask_delete,
        add_fraction: a.mask_add,
        seed: a.mask_seed,
    };
    let masked = transfer::mask_graph(&g, &spec)?;
    if let Some(p) = &a.mask_out {
        masked.write(p)?;
    }
    let cfg = RetrainConfig {
        epochs: a.retrain_epochs,
        dist_weight: a.dist_weight,
        lr: a.retrain_lr,
        seed: a.seed,
        ..RetrainConfig::default()
    };
    let z_new = harness::transfer_embeddings(&masked, &art, &cfg)?;
    let weights = a.weights.unwrap_or_else(|| RewardWeights::normalized(&masked));
    transfer::transfer_attack(&masked, &z_new, &q, a.budget, weights)?.save_csv(&a.out)?;
    Ok(())
}

fn report(a: ReportArgs) -> anyhow::Result<()> {
    let mut plan = ExperimentPlan::from_file(&a.plan)?;
    if let Some(out) = a.out {
        plan.out_dir = out;
    }
    let outcome = harness::run_plan(&plan)?;
    for row in &outcome.summary {
        println!(
            "{:<24} cum_reward {:.4} ± {:.4}  power {:.4}  anc {:.4}",
            row.method, row.cum_reward.mean, row.cum_reward.std, row.power_fraction.mean, row.anc.mean
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Attack(a) => attack(a),
        Command::Embed(a) => embed_cmd(a),
        Command::Train(a) => train(a),
        Command::Baseline(a) => baseline(a),
        Command::Transfer(a) => transfer_cmd(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
