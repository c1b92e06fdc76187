use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use causal_dc::bench::{run_bench, write_outputs, ExperimentSpec};
use causal_dc::datagen::{
    edge_prob_for, gaussian_network_json, generate_dag, load_gaussian_network, sample_sem, GenConfig, NoiseFamily,
};
use causal_dc::dependence::{DependenceMeasure, MeasureKind, DEFAULT_KNN};
use causal_dc::learner::{run_pc_stable, run_pipeline, LearnConfig, RunReport};
use causal_dc::metrics::{aggregate_scores, score_skeleton, SkeletonScore};
use causal_dc::partition::{causal_expansion_depth, girvan_newman, PartitionConfig};
use causal_dc::scaffold::build_super_structure;
use causal_dc::{load_dataset, save_dataset, Skeleton, Stage};
use clap::{Args, Parser, Subcommand};

const OUT_ENV: &str = "CAUSAL_DC_OUT";

#[derive(Parser)]
#[command(name = "causal-dc", version, about = "Divide-and-conquer causal skeleton discovery")]
struct Cli {
    /// Directory for generated files and bench results.
    #[arg(long, global = true, env = OUT_ENV)]
    out_dir: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random DAG (or load a network) and write data.csv and truth.json.
    Gen(GenArgs),
    /// Maximum spanning tree of the pairwise dependence matrix.
    Scaffold(ScaffoldArgs),
    /// Girvan–Newman blocks of a scaffold, expanded by their neighbourhood.
    Partition(PartitionArgs),
    /// Full divide-and-conquer pipeline.
    Learn(LearnArgs),
    /// PC-stable skeleton search from the complete graph.
    BaselinePc(BaselineArgs),
    /// Score predicted skeletons against a truth skeleton.
    Eval(EvalArgs),
    /// Run an experiment grid from a JSON spec.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, required_unless_present = "network")]
    p: Option<usize>,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge probability of the lower-triangular Bernoulli draw.
    #[arg(long, conflicts_with = "expected_edges")]
    edge_prob: Option<f64>,
    /// Expected edge count; sets the edge probability to edges / C(p, 2).
    #[arg(long)]
    expected_edges: Option<f64>,
    /// gaussian, exponential, gamma or uniform.
    #[arg(long, default_value = "gaussian")]
    noise: NoiseFamily,
    /// Sample from this Gaussian-network JSON instead of a random DAG.
    #[arg(long, conflicts_with_all = ["p", "edge_prob", "expected_edges"])]
    network: Option<PathBuf>,
}

#[derive(Args)]
struct MeasureArgs {
    /// ce, mi, pearson or spearman.
    #[arg(long, default_value = "ce")]
    measure: MeasureKind,
    /// Neighbour count for the ce and mi estimators.
    #[arg(long, default_value_t = DEFAULT_KNN)]
    knn: usize,
}

impl MeasureArgs {
    fn measure(&self) -> DependenceMeasure {
        DependenceMeasure::with_k(self.measure, self.knn)
    }
}

#[derive(Args)]
struct ScaffoldArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    measure: MeasureArgs,
    /// Output file (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BlockArgs {
    /// Largest block before expansion (default: max(8, ceil(p/2))).
    #[arg(long)]
    max_block_size: Option<usize>,
    #[arg(long, default_value_t = 1)]
    min_blocks: usize,
    /// Scaffold hops added to each block.
    #[arg(long, default_value_t = 1)]
    expansion_depth: usize,
}

impl BlockArgs {
    fn config(&self, p: usize) -> PartitionConfig {
        let base = PartitionConfig::for_p(p);
        PartitionConfig {
            max_block_size: self.max_block_size.unwrap_or(base.max_block_size),
            min_blocks: self.min_blocks,
            expansion_depth: self.expansion_depth,
        }
    }
}

#[derive(Args)]
struct PartitionArgs {
    /// Scaffold skeleton JSON.
    #[arg(long)]
    scaffold: PathBuf,
    #[command(flatten)]
    blocks: BlockArgs,
    /// Emit the disjoint blocks before expansion.
    #[arg(long)]
    core: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, default_value_t = causal_dc::citest::DEFAULT_ALPHA)]
    alpha: f64,
    /// Largest conditioning set (default: unbounded).
    #[arg(long)]
    max_order: Option<usize>,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    measure: MeasureArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    blocks: BlockArgs,
    /// Ablation: learn over a single block.
    #[arg(long)]
    no_partition: bool,
    /// Skeleton output file (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Run report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    truth: PathBuf,
    /// Predicted skeleton JSON; repeat for several runs.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    /// Run report JSON per prediction, supplying its CI-test count.
    #[arg(long)]
    report: Vec<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment spec JSON.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long)]
    max_block_size: Option<usize>,
    /// Replaces the spec's measure list.
    #[arg(long)]
    measure: Vec<MeasureKind>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = command_name(&cli.command);
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error[{name}]: cannot configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (stage, msg) = describe(&e);
            eprintln!("error[{}]: {msg}", stage.unwrap_or(name.to_string()));
            ExitCode::FAILURE
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Gen(_) => "gen",
        Command::Scaffold(_) => "scaffold",
        Command::Partition(_) => "partition",
        Command::Learn(_) => "learn",
        Command::BaselinePc(_) => "baseline-pc",
        Command::Eval(_) => "eval",
        Command::Bench(_) => "bench",
    }
}

/// Stage tag carried by the error, if any, and a message without repeated causes.
fn describe(e: &anyhow::Error) -> (Option<String>, String) {
    let mut parts = Vec::new();
    let mut stage = None;
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<causal_dc::Error>() {
            match core {
                causal_dc::Error::Stage { stage: s, source } => {
                    stage = Some(s.to_string());
                    parts.push(source.to_string());
                }
                other => parts.push(other.to_string()),
            }
            break;
        }
        parts.push(cause.to_string());
    }
    (stage, parts.join(": "))
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Gen(a) => gen(a, &out_dir(cli)),
        Command::Scaffold(a) => scaffold(a),
        Command::Partition(a) => partition(a),
        Command::Learn(a) => learn(a),
        Command::BaselinePc(a) => baseline(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a, cli.out_dir.as_deref()),
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn emit(output: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match output {
        Some(path) => fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn read_skeleton(path: &Path) -> anyhow::Result<Skeleton> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Skeleton::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_data(path: &Path) -> anyhow::Result<causal_dc::Dataset> {
    load_dataset(path).with_context(|| format!("loading {}", path.display()))
}

fn gen(a: &GenArgs, dir: &Path) -> anyhow::Result<()> {
    let (sem, truth) = match (&a.network, a.p) {
        (Some(path), _) => {
            let sem = load_gaussian_network(path).with_context(|| format!("loading {}", path.display()))?;
            let truth = sem.skeleton();
            (sem, truth)
        }
        (None, Some(p)) => {
            let mut cfg = GenConfig::new(p, a.n, a.seed);
            cfg.noise = a.noise;
            if let Some(e) = a.edge_prob {
                cfg.edge_prob = e;
            } else if let Some(m) = a.expected_edges {
                if p < 2 {
                    bail!("p must be at least 2");
                }
                cfg.edge_prob = edge_prob_for(p, m);
            }
            let (sem, truth) = generate_dag(&cfg)?;
            (sem.with_noise(a.noise), truth)
        }
        (None, None) => unreachable!("clap requires --p or --network"),
    };
    // the data stream is seeded apart from the graph draw
    let data = sample_sem(&sem, a.n, a.seed.wrapping_add(0x9E37_79B9_7F4A_7C15))?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    save_dataset(&data, dir.join("data.csv"))?;
    fs::write(dir.join("truth.json"), format!("{}\n", truth.to_json()))?;
    if let Ok(net) = gaussian_network_json(&sem) {
        fs::write(dir.join("network.json"), format!("{net}\n"))?;
    }
    eprintln!(
        "wrote data.csv ({} x {}) and truth.json ({} edges) to {}",
        data.n(),
        data.p(),
        truth.edge_count(),
        dir.display()
    );
    Ok(())
}

fn scaffold(a: &ScaffoldArgs) -> anyhow::Result<()> {
    let data = read_data(&a.data)?;
    let tree = build_super_structure(&data, &a.measure.measure()).map_err(|e| e.at_stage(Stage::Scaffold))?;
    emit(a.output.as_deref(), &tree.to_json())
}

fn partition(a: &PartitionArgs) -> anyhow::Result<()> {
    let scaffold = read_skeleton(&a.scaffold)?;
    let cfg = a.blocks.config(scaffold.p());
    let tag = |e: causal_dc::Error| e.at_stage(Stage::Partition);
    let core = girvan_newman(&scaffold, &cfg).map_err(tag)?;
    let part = if a.core {
        core
    } else {
        causal_expansion_depth(&scaffold, &core, cfg.expansion_depth).map_err(tag)?
    };
    emit(a.output.as_deref(), &part.to_json())
}

fn write_report(path: Option<&Path>, report: &RunReport) -> anyhow::Result<()> {
    if let Some(path) = path {
        fs::write(path, format!("{}\n", report.to_json())).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn learn(a: &LearnArgs) -> anyhow::Result<()> {
    let data = read_data(&a.data)?;
    let cfg = LearnConfig {
        alpha: a.engine.alpha,
        max_order: a.engine.max_order,
        measure: a.measure.measure(),
        divide: !a.no_partition,
        partition: Some(a.blocks.config(data.p())),
        seed: 0,
    };
    let (skeleton, report) = run_pipeline(&data, &cfg)?;
    write_report(a.report.as_deref(), &report)?;
    emit(a.output.as_deref(), &skeleton.to_json())
}

fn baseline(a: &BaselineArgs) -> anyhow::Result<()> {
    let data = read_data(&a.data)?;
    let cfg = LearnConfig {
        alpha: a.engine.alpha,
        max_order: a.engine.max_order,
        ..LearnConfig::default()
    };
    let (skeleton, report) = run_pc_stable(&data, &cfg)?;
    write_report(a.report.as_deref(), &report)?;
    emit(a.output.as_deref(), &skeleton.to_json())
}

fn score_row(label: &str, s: &SkeletonScore) -> String {
    format!(
        "{label},{},{},{},{},{},{},{},{},{},{}",
        s.tp, s.fp, s.fn_, s.tn, s.precision, s.recall, s.accuracy, s.f1, s.shd, s.ci_tests
    )
}

fn eval(a: &EvalArgs) -> anyhow::Result<()> {
    if !a.report.is_empty() && a.report.len() != a.pred.len() {
        bail!("got {} --report files for {} --pred files", a.report.len(), a.pred.len());
    }
    let truth = read_skeleton(&a.truth)?;
    let mut lines = vec!["pred,tp,fp,fn,tn,precision,recall,accuracy,f1,shd,ci_tests".to_string()];
    let mut scores = Vec::new();
    for (k, path) in a.pred.iter().enumerate() {
        let pred = read_skeleton(path)?;
        let ci = match a.report.get(k) {
            Some(r) => {
                let text = fs::read_to_string(r).with_context(|| format!("reading {}", r.display()))?;
                let report: serde_json::Value =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", r.display()))?;
                report["unique_ci_tests"]
                    .as_u64()
                    .with_context(|| format!("{} has no unique_ci_tests", r.display()))? as usize
            }
            None => 0,
        };
        let s = score_skeleton(&pred, &truth, ci).with_context(|| format!("scoring {}", path.display()))?;
        lines.push(score_row(&path.display().to_string(), &s));
        scores.push(s);
    }
    let agg = aggregate_scores(&scores)?;
    lines.push(format!(
        "mean,,,,,{},{},{},{},{},{}",
        agg.precision.mean, agg.recall.mean, agg.accuracy.mean, agg.f1.mean, agg.shd.mean, agg.ci_tests.mean
    ));
    emit(a.output.as_deref(), &lines.join("\n"))
}

fn bench(a: &BenchArgs, out_dir: Option<&Path>) -> anyhow::Result<()> {
    let mut spec = ExperimentSpec::load(&a.spec).with_context(|| format!("loading {}", a.spec.display()))?;
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if let Some(v) = a.n {
        spec.n = v;
    }
    if let Some(v) = a.alpha {
        spec.alpha = v;
    }
    if let Some(v) = a.knn {
        spec.knn = v;
    }
    if let Some(v) = a.max_order {
        spec.max_order = Some(v);
    }
    if let Some(v) = a.max_block_size {
        spec.max_block_size = Some(v);
    }
    if !a.measure.is_empty() {
        spec.measures = a.measure.clone();
    }
    // network paths are relative to the spec file
    let base = a.spec.parent().unwrap_or(Path::new(""));
    for net in &mut spec.networks {
        if net.is_relative() {
            *net = base.join(&*net);
        }
    }
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| spec.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let out = run_bench(&spec)?;
    write_outputs(&out, &dir).with_context(|| format!("writing results to {}", dir.display()))?;
    for e in &out.errors {
        eprintln!(
            "cell failed: experiment={} p={} noise={} graph={} run={} seed={}: {}",
            e.experiment, e.p, e.noise, e.graph, e.run, e.seed, e.message
        );
    }
    eprintln!(
        "{} rows, {} aggregates, {} failed cells -> {}",
        out.rows.len(),
        out.aggregates.len(),
        out.errors.len(),
        dir.display()
    );
    if !out.rows.is_empty() || out.errors.is_empty() {
        Ok(())
    } else {
        bail!("every cell failed")
    }
}
