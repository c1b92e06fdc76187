//! Declarative experiment grids and their CSV result tables.
//!
//! Every dataset in a grid is identified by `(p, noise, graph, run)`. The graph
//! structure depends only on `(p, graph)`; each run samples a fresh dataset from
//! that graph. All seeds are derived by hashing the spec seed with the cell
//! coordinates, and any cell can be regenerated on its own. Output rows are
//! sorted before writing. Wall-clock timings live in `timings.csv`, apart from
//! the deterministic `results.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::citest::DEFAULT_ALPHA;
use crate::data::Dataset;
use crate::datagen::{
    default_edge_prob, edge_prob_for, generate_dag, load_gaussian_network, sample_sem, GaussianSem,
    GenConfig, NoiseFamily,
};
use crate::dependence::{DependenceMeasure, MeasureKind, DEFAULT_KNN};
use crate::error::{Error, Result};
use crate::graph::Skeleton;
use crate::learner::{run_pc_stable, run_pipeline, LearnConfig, StageTimings};
use crate::metrics::{aggregate_scores, score_skeleton, ScoreSummary, SkeletonScore};
use crate::partition::PartitionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Ablation,
    MeasureComparison,
    Benchmark,
}

impl ExperimentKind {
    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::Ablation => "ablation",
            ExperimentKind::MeasureComparison => "measure-comparison",
            ExperimentKind::Benchmark => "benchmark",
        }
    }

    fn default_variants(self) -> Vec<Variant> {
        match self {
            ExperimentKind::Ablation => vec![Variant::Pipeline, Variant::NoPartition],
            ExperimentKind::MeasureComparison => vec![Variant::Pipeline],
            ExperimentKind::Benchmark => vec![Variant::Pipeline, Variant::PcStable],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Pipeline,
    NoPartition,
    PcStable,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::Pipeline => "pipeline",
            Variant::NoPartition => "no-partition",
            Variant::PcStable => "pc-stable",
        }
    }
}

fn default_n() -> usize {
    5000
}

fn one() -> usize {
    1
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_knn() -> usize {
    DEFAULT_KNN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    /// Node counts for generated graphs; ignored when `networks` is set.
    #[serde(default)]
    pub p: Vec<usize>,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Empty means Gaussian only.
    #[serde(default)]
    pub noises: Vec<NoiseFamily>,
    /// Empty means copula entropy only.
    #[serde(default)]
    pub measures: Vec<MeasureKind>,
    /// Empty means the experiment's default variants.
    #[serde(default)]
    pub variants: Vec<Variant>,
    /// Graph instances per node count (or datasets per network).
    #[serde(default = "one")]
    pub graphs: usize,
    /// Datasets sampled per graph instance.
    #[serde(default = "one")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_knn")]
    pub knn: usize,
    #[serde(default)]
    pub max_order: Option<usize>,
    #[serde(default)]
    pub edge_prob: Option<f64>,
    #[serde(default)]
    pub expected_edges: Option<f64>,
    #[serde(default)]
    pub max_block_size: Option<usize>,
    /// Gaussian-network JSON files used instead of generated graphs.
    #[serde(default)]
    pub networks: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            p: Vec::new(),
            n: default_n(),
            noises: Vec::new(),
            measures: Vec::new(),
            variants: Vec::new(),
            graphs: 1,
            runs: 1,
            seed: 0,
            alpha: DEFAULT_ALPHA,
            knn: DEFAULT_KNN,
            max_order: None,
            edge_prob: None,
            expected_edges: None,
            max_block_size: None,
            networks: Vec::new(),
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.graphs < 1 || self.runs < 1 {
            return Err(Error::invalid("graphs and runs must be at least 1"));
        }
        if self.networks.is_empty() && self.p.is_empty() {
            return Err(Error::invalid("spec needs node counts `p` or `networks`"));
        }
        if self.p.iter().any(|&p| p < 2) {
            return Err(Error::invalid("every p must be at least 2"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        for net in &self.networks {
            if !net.exists() {
                return Err(Error::invalid(format!("network file {} not found", net.display())));
            }
        }
        Ok(())
    }

    fn noises(&self) -> Vec<NoiseFamily> {
        if self.noises.is_empty() {
            vec![NoiseFamily::Gaussian]
        } else {
            self.noises.clone()
        }
    }

    fn measures(&self) -> Vec<MeasureKind> {
        if self.measures.is_empty() {
            vec![MeasureKind::CopulaEntropy]
        } else {
            self.measures.clone()
        }
    }

    fn variants(&self) -> Vec<Variant> {
        if self.variants.is_empty() {
            self.experiment.default_variants()
        } else {
            self.variants.clone()
        }
    }

    fn edge_prob(&self, p: usize) -> f64 {
        match (self.edge_prob, self.expected_edges) {
            (Some(e), _) => e,
            (None, Some(m)) => edge_prob_for(p, m),
            (None, None) => default_edge_prob(p),
        }
    }

    /// Short hex digest of the spec (output directory excluded).
    pub fn config_hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = None;
        let json = serde_json::to_string(&canon).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Deterministic 64-bit seed from a base seed and a list of coordinates.
pub fn derive_seed(base: u64, coords: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for c in coords {
        h.update((c.len() as u64).to_le_bytes());
        h.update(c.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub p: usize,
    pub measure: String,
    pub noise: String,
    pub variant: String,
    pub graph: usize,
    pub run: usize,
    pub seed: u64,
    pub config_hash: String,
    pub score: SkeletonScore,
    pub timings: StageTimings,
}

impl ResultRow {
    fn key(&self) -> (&str, usize, &str, &str, &str, usize, usize) {
        (
            &self.experiment,
            self.p,
            &self.measure,
            &self.noise,
            &self.variant,
            self.graph,
            self.run,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub experiment: String,
    pub p: usize,
    pub noise: String,
    pub graph: usize,
    pub run: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub experiment: String,
    pub p: usize,
    pub measure: String,
    pub noise: String,
    pub variant: String,
    pub summary: ScoreSummary,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchOutput {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<AggregateRow>,
    pub errors: Vec<CellError>,
}

/// Graph source of one grid cell.
struct CellSource {
    label_p: usize,
    sem: GaussianSem,
    truth: Skeleton,
}

struct DataCell {
    p_index: usize,
    noise: NoiseFamily,
    graph: usize,
    run: usize,
}

pub fn run_bench(spec: &ExperimentSpec) -> Result<BenchOutput> {
    spec.validate()?;
    let hash = spec.config_hash();
    let exp = spec.experiment.tag();

    // graph sources, indexed by (p_index, graph)
    let mut sources: Vec<Vec<CellSource>> = Vec::new();
    if spec.networks.is_empty() {
        for &p in &spec.p {
            let mut per = Vec::with_capacity(spec.graphs);
            for g in 0..spec.graphs {
                let mut cfg = GenConfig::new(p, spec.n, derive_seed(spec.seed, &["graph", &p.to_string(), &g.to_string()]));
                cfg.edge_prob = spec.edge_prob(p);
                let (sem, truth) = generate_dag(&cfg)?;
                per.push(CellSource { label_p: p, sem, truth });
            }
            sources.push(per);
        }
    } else {
        for path in &spec.networks {
            let sem = load_gaussian_network(path)?;
            let truth = sem.skeleton();
            let per = (0..spec.graphs)
                .map(|_| CellSource {
                    label_p: sem.p(),
                    sem: sem.clone(),
                    truth: truth.clone(),
                })
                .collect();
            sources.push(per);
        }
    }

    let mut cells = Vec::new();
    for p_index in 0..sources.len() {
        for noise in spec.noises() {
            for graph in 0..spec.graphs {
                for run in 0..spec.runs {
                    cells.push(DataCell {
                        p_index,
                        noise,
                        graph,
                        run,
                    });
                }
            }
        }
    }

    let eval_cell = |cell: &DataCell| -> std::result::Result<Vec<ResultRow>, CellError> {
        let src = &sources[cell.p_index][cell.graph];
        let seed = derive_seed(
            spec.seed,
            &[
                "data",
                &cell.p_index.to_string(),
                &src.label_p.to_string(),
                cell.noise.as_str(),
                &cell.graph.to_string(),
                &cell.run.to_string(),
            ],
        );
        let fail = |e: Error| CellError {
            experiment: exp.into(),
            p: src.label_p,
            noise: cell.noise.as_str().into(),
            graph: cell.graph,
            run: cell.run,
            seed,
            message: e.to_string(),
        };
        let sem = if spec.networks.is_empty() {
            src.sem.with_noise(cell.noise)
        } else {
            src.sem.clone()
        };
        let data = sample_sem(&sem, spec.n, seed).map_err(fail)?;
        run_cell(spec, &data, &src.truth, exp, &hash, src.label_p, cell, seed).map_err(fail)
    };

    #[cfg(feature = "parallel")]
    let outcomes: Vec<_> = {
        use rayon::prelude::*;
        cells.par_iter().map(eval_cell).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<_> = cells.iter().map(eval_cell).collect();

    let mut out = BenchOutput::default();
    for o in outcomes {
        match o {
            Ok(rows) => out.rows.extend(rows),
            Err(e) => out.errors.push(e),
        }
    }
    out.rows.sort_by(|a, b| a.key().cmp(&b.key()));
    out.aggregates = aggregate_rows(&out.rows)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    spec: &ExperimentSpec,
    data: &Dataset,
    truth: &Skeleton,
    exp: &str,
    hash: &str,
    label_p: usize,
    cell: &DataCell,
    seed: u64,
) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    let row = |measure: &str, variant: Variant, skel: &Skeleton, ci: usize, timings: StageTimings| -> Result<ResultRow> {
        Ok(ResultRow {
            experiment: exp.into(),
            p: label_p,
            measure: measure.into(),
            noise: cell.noise.as_str().into(),
            variant: variant.tag().into(),
            graph: cell.graph,
            run: cell.run,
            seed,
            config_hash: hash.into(),
            score: score_skeleton(skel, truth, ci)?,
            timings,
        })
    };
    for variant in spec.variants() {
        match variant {
            Variant::Pipeline | Variant::NoPartition => {
                for kind in spec.measures() {
                    let cfg = LearnConfig {
                        alpha: spec.alpha,
                        max_order: spec.max_order,
                        measure: DependenceMeasure::with_k(kind, spec.knn),
                        divide: variant == Variant::Pipeline,
                        partition: spec.max_block_size.map(|m| PartitionConfig {
                            max_block_size: m,
                            ..PartitionConfig::for_p(data.p())
                        }),
                        seed,
                    };
                    let (skel, report) = run_pipeline(data, &cfg)?;
                    rows.push(row(kind.tag(), variant, &skel, report.unique_ci_tests, report.timings)?);
                }
            }
            Variant::PcStable => {
                let cfg = LearnConfig {
                    alpha: spec.alpha,
                    max_order: spec.max_order,
                    seed,
                    ..LearnConfig::default()
                };
                let (skel, report) = run_pc_stable(data, &cfg)?;
                rows.push(row("none", variant, &skel, report.unique_ci_tests, report.timings)?);
            }
        }
    }
    Ok(rows)
}

fn aggregate_rows(rows: &[ResultRow]) -> Result<Vec<AggregateRow>> {
    let mut groups: std::collections::BTreeMap<(String, usize, String, String, String), Vec<SkeletonScore>> =
        Default::default();
    for r in rows {
        groups
            .entry((r.experiment.clone(), r.p, r.measure.clone(), r.noise.clone(), r.variant.clone()))
            .or_default()
            .push(r.score);
    }
    groups
        .into_iter()
        .map(|((experiment, p, measure, noise, variant), scores)| {
            Ok(AggregateRow {
                experiment,
                p,
                measure,
                noise,
                variant,
                summary: aggregate_scores(&scores)?,
            })
        })
        .collect()
}

pub const RESULTS_HEADER: &str =
    "experiment,p,measure,noise,variant,graph,run,seed,config_hash,tp,fp,fn,tn,precision,recall,accuracy,f1,shd,ci_tests";

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in rows {
        let c = &r.score;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment, r.p, r.measure, r.noise, r.variant, r.graph, r.run, r.seed, r.config_hash,
            c.tp, c.fp, c.fn_, c.tn, c.precision, c.recall, c.accuracy, c.f1, c.shd, c.ci_tests
        );
    }
    s
}

pub fn timings_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from(
        "experiment,p,measure,noise,variant,graph,run,seed,wall_ms_scaffold,wall_ms_partition,wall_ms_learn,wall_ms_merge,wall_ms_total\n",
    );
    for r in rows {
        let t = &r.timings;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3}",
            r.experiment, r.p, r.measure, r.noise, r.variant, r.graph, r.run, r.seed,
            t.scaffold_ms, t.partition_ms, t.learn_ms, t.merge_ms, t.total_ms
        );
    }
    s
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = String::from("experiment,p,measure,noise,variant,runs");
    for m in ["precision", "recall", "accuracy", "f1", "shd", "ci_tests"] {
        let _ = write!(s, ",{m}_mean,{m}_std");
    }
    s.push('\n');
    for r in rows {
        let a = &r.summary;
        let _ = write!(s, "{},{},{},{},{},{}", r.experiment, r.p, r.measure, r.noise, r.variant, a.runs);
        for m in [a.precision, a.recall, a.accuracy, a.f1, a.shd, a.ci_tests] {
            let _ = write!(s, ",{},{}", m.mean, m.std);
        }
        s.push('\n');
    }
    s
}

pub fn errors_csv(errors: &[CellError]) -> String {
    let mut s = String::from("experiment,p,noise,graph,run,seed,message\n");
    for e in errors {
        let msg = e.message.replace('"', "'");
        let _ = writeln!(s, "{},{},{},{},{},{},\"{}\"", e.experiment, e.p, e.noise, e.graph, e.run, e.seed, msg);
    }
    s
}

/// Writes `results.csv`, `aggregate.csv`, `timings.csv` and, when cells failed, `errors.csv`.
pub fn write_outputs(out: &BenchOutput, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), results_csv(&out.rows))?;
    std::fs::write(dir.join("aggregate.csv"), aggregate_csv(&out.aggregates))?;
    std::fs::write(dir.join("timings.csv"), timings_csv(&out.rows))?;
    if !out.errors.is_empty() {
        std::fs::write(dir.join("errors.csv"), errors_csv(&out.errors))?;
    }
    Ok(())
}
