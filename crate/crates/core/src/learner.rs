//! Block-wise skeleton search, cross-block correction and merge, and the PC-stable baseline.
//!
//! Within a block the search starts from the induced scaffold subgraph. The
//! forward phase adds every non-adjacent pair that is marginally dependent; the
//! backward phase then removes edges PC-stable style, level by level, with
//! adjacencies frozen at the start of each level and the first independent
//! conditioning set (in lexicographic order) winning. After all blocks are
//! learned, the union of their edges is corrected by testing every pair that was
//! never tested marginally (exactly the pairs split across blocks) and by a final
//! backward pass over the whole graph.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::citest::{CiCache, CiEngine, FisherZ, DEFAULT_ALPHA};
use crate::data::Dataset;
use crate::dependence::DependenceMeasure;
use crate::error::{Error, Result, Stage};
use crate::graph::{Partition, Skeleton};
use crate::partition::{causal_expansion_depth, girvan_newman_with_trace, induce_subgraph, PartitionConfig};
use crate::scaffold::build_super_structure;

/// Separating sets keyed by global `(i, j)`, `i < j`.
pub type SepSets = BTreeMap<(usize, usize), Vec<usize>>;

pub const CORRECTION_STRATEGY: &str = "order-0 forward over never-tested pairs, then full backward";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub alpha: f64,
    /// Largest conditioning set size; `None` is unbounded.
    pub max_order: Option<usize>,
    pub measure: DependenceMeasure,
    /// `false` runs the ablation variant with a single block.
    pub divide: bool,
    /// `None` picks [`PartitionConfig::for_p`].
    pub partition: Option<PartitionConfig>,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            max_order: None,
            measure: DependenceMeasure::default(),
            divide: true,
            partition: None,
            seed: 0,
        }
    }
}

impl LearnConfig {
    pub fn partition_for(&self, p: usize) -> PartitionConfig {
        self.partition.unwrap_or_else(|| PartitionConfig::for_p(p))
    }
}

/// How the forward phase treats pairs whose marginal query is already cached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardPolicy {
    /// Use the cached verdict as if the test had just run.
    ReuseCached,
    /// Leave already-tested pairs alone; used by the cross-block correction.
    SkipTested,
}

/// Order-0 search over non-adjacent pairs of `g`, in ascending `(i, j)` order.
///
/// `vars[k]` is the global variable behind local vertex `k`.
pub fn forward_phase(
    g: &Skeleton,
    vars: &[usize],
    cache: &CiCache,
    engine: &dyn CiEngine,
    policy: ForwardPolicy,
) -> Result<Skeleton> {
    debug_assert_eq!(g.p(), vars.len());
    let mut out = g.clone();
    for i in 0..g.p() {
        for j in i + 1..g.p() {
            if g.has_edge(i, j) {
                continue;
            }
            let (gi, gj) = (vars[i], vars[j]);
            if policy == ForwardPolicy::SkipTested && cache.contains(gi, gj, &[]) {
                continue;
            }
            if !cache.test(engine, gi, gj, &[])?.independent {
                out.add_edge(i, j);
            }
        }
    }
    Ok(out)
}

/// Level-wise edge removal with frozen per-level adjacencies.
pub fn backward_phase(
    g: &Skeleton,
    vars: &[usize],
    cache: &CiCache,
    engine: &dyn CiEngine,
    max_order: Option<usize>,
) -> Result<(Skeleton, SepSets)> {
    debug_assert_eq!(g.p(), vars.len());
    let mut g = g.clone();
    let mut sepsets = SepSets::new();
    let mut level = 0usize;
    loop {
        if max_order.is_some_and(|m| level > m) {
            break;
        }
        let adj = g.adjacency();
        let edges: Vec<(usize, usize)> = g.edges().collect();
        let testable = edges
            .iter()
            .any(|&(i, j)| adj[i].len() > level || adj[j].len() > level);
        if !testable {
            break;
        }
        for (i, j) in edges {
            'sides: for (a, b) in [(i, j), (j, i)] {
                if level == 0 && a == j {
                    break;
                }
                let candidates: Vec<usize> = adj[a].iter().copied().filter(|&v| v != b).collect();
                if candidates.len() < level {
                    continue;
                }
                for subset in candidates.into_iter().combinations(level) {
                    let cond: Vec<usize> = subset.iter().map(|&v| vars[v]).collect();
                    if cache.test(engine, vars[i], vars[j], &cond)?.independent {
                        g.remove_edge(i, j);
                        let mut cond = cond;
                        cond.sort_unstable();
                        sepsets.insert((vars[i], vars[j]), cond);
                        break 'sides;
                    }
                }
            }
        }
        level += 1;
    }
    Ok((g, sepsets))
}

/// Skeleton learned inside one block, over local indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSkeleton {
    /// Global variable of each local vertex, ascending.
    pub vars: Vec<usize>,
    pub graph: Skeleton,
    pub sepsets: SepSets,
}

impl LocalSkeleton {
    /// Edges relabelled to global variable indices.
    pub fn global_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.graph.edges().map(|(a, b)| (self.vars[a], self.vars[b]))
    }
}

/// Forward then backward search inside every block, starting from the induced scaffold.
pub fn learn_subgraphs(
    blocks: &Partition,
    scaffold: &Skeleton,
    cache: &CiCache,
    engine: &dyn CiEngine,
    max_order: Option<usize>,
) -> Result<Vec<LocalSkeleton>> {
    let learn_block = |block: &Vec<usize>| -> Result<LocalSkeleton> {
        let (start, vars) = induce_subgraph(scaffold, block)?;
        let grown = forward_phase(&start, &vars, cache, engine, ForwardPolicy::ReuseCached)?;
        let (graph, sepsets) = backward_phase(&grown, &vars, cache, engine, max_order)?;
        Ok(LocalSkeleton {
            vars,
            graph,
            sepsets,
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        blocks.blocks.par_iter().map(learn_block).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        blocks.blocks.iter().map(learn_block).collect()
    }
}

/// Union of block results: an edge survives if any block containing both endpoints kept it.
pub fn union_of(p: usize, locals: &[LocalSkeleton]) -> Skeleton {
    let mut g = Skeleton::empty(p);
    for local in locals {
        for (i, j) in local.global_edges() {
            g.add_edge(i, j);
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    /// Union of local skeletons before correction.
    pub union: Skeleton,
    /// Union after the correction forward phase.
    pub augmented: Skeleton,
    /// Final corrected skeleton.
    pub skeleton: Skeleton,
    pub sepsets: SepSets,
}

pub fn merge_and_correct(
    p: usize,
    locals: &[LocalSkeleton],
    cache: &CiCache,
    engine: &dyn CiEngine,
    max_order: Option<usize>,
) -> Result<MergeOutcome> {
    let union = union_of(p, locals);
    let identity: Vec<usize> = (0..p).collect();
    let augmented = forward_phase(&union, &identity, cache, engine, ForwardPolicy::SkipTested)?;
    let (skeleton, final_seps) = backward_phase(&augmented, &identity, cache, engine, max_order)?;
    let mut sepsets = SepSets::new();
    for local in locals {
        sepsets.extend(local.sepsets.iter().map(|(k, v)| (*k, v.clone())));
    }
    sepsets.extend(final_seps);
    // pairs reinstated by the union rule and kept by the final pass have no separating set
    for (i, j) in skeleton.edges() {
        sepsets.remove(&(i, j));
    }
    Ok(MergeOutcome {
        union,
        augmented,
        skeleton,
        sepsets,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub scaffold_ms: f64,
    pub partition_ms: f64,
    pub learn_ms: f64,
    pub merge_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: String,
    pub unique_ci_tests: usize,
    pub engine: String,
    pub measure: Option<String>,
    pub alpha: f64,
    pub max_order: Option<usize>,
    pub seed: u64,
    pub scaffold_edges: Option<usize>,
    pub core_blocks: Vec<Vec<usize>>,
    pub blocks: Vec<Vec<usize>>,
    pub block_sizes: Vec<usize>,
    pub gn_removals: usize,
    pub union_edges: Option<usize>,
    pub correction_added: Option<usize>,
    pub final_edges: usize,
    pub ci_tests_after_scaffold: Option<usize>,
    pub ci_tests_after_learn: Option<usize>,
    pub correction_strategy: Option<String>,
    pub timings: StageTimings,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub skeleton: Skeleton,
    pub scaffold: Skeleton,
    pub core_blocks: Partition,
    pub blocks: Partition,
    pub locals: Vec<LocalSkeleton>,
    pub merge: MergeOutcome,
    pub report: RunReport,
}

/// Wall-clock timer that reads zero where no clock is available.
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn lap_ms(&mut self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            let now = std::time::Instant::now();
            let ms = now.duration_since(self.start).as_secs_f64() * 1e3;
            self.start = now;
            ms
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// Scaffold → divide → expand → learn → merge, with a fresh cache and Fisher-z engine.
pub fn run_pipeline(d: &Dataset, cfg: &LearnConfig) -> Result<(Skeleton, RunReport)> {
    let engine = FisherZ::new(d, cfg.alpha)?;
    let cache = CiCache::new();
    let run = run_pipeline_with(d, cfg, &engine, &cache)?;
    Ok((run.skeleton, run.report))
}

/// Pipeline over a caller-supplied engine and cache.
pub fn run_pipeline_with(
    d: &Dataset,
    cfg: &LearnConfig,
    engine: &dyn CiEngine,
    cache: &CiCache,
) -> Result<PipelineRun> {
    let p = d.p();
    let mut total = Stopwatch::start();
    let mut lap = Stopwatch::start();
    let mut timings = StageTimings::default();

    let before = cache.unique_count();
    let scaffold = build_super_structure(d, &cfg.measure).map_err(|e| e.at_stage(Stage::Scaffold))?;
    let after_scaffold = cache.unique_count();
    if after_scaffold != before {
        return Err(Error::invalid("scaffold construction issued CI tests").at_stage(Stage::Scaffold));
    }
    timings.scaffold_ms = lap.lap_ms();

    let (core_blocks, blocks, gn_removals) = if cfg.divide {
        let pcfg = cfg.partition_for(p);
        let (core, removed) =
            girvan_newman_with_trace(&scaffold, &pcfg).map_err(|e| e.at_stage(Stage::Partition))?;
        let expanded = causal_expansion_depth(&scaffold, &core, pcfg.expansion_depth)
            .map_err(|e| e.at_stage(Stage::Partition))?;
        debug_assert!(expanded.covers_vertices(p) && expanded.covers_edges(&scaffold));
        (core, expanded, removed.len())
    } else {
        (Partition::single(p), Partition::single(p), 0)
    };
    timings.partition_ms = lap.lap_ms();

    let locals = learn_subgraphs(&blocks, &scaffold, cache, engine, cfg.max_order)
        .map_err(|e| e.at_stage(Stage::Learn))?;
    let after_learn = cache.unique_count();
    timings.learn_ms = lap.lap_ms();

    let merge = merge_and_correct(p, &locals, cache, engine, cfg.max_order)
        .map_err(|e| e.at_stage(Stage::Merge))?;
    timings.merge_ms = lap.lap_ms();
    timings.total_ms = total.lap_ms();

    let correction_added = merge.augmented.edge_count() - merge.union.edge_count();
    let report = RunReport {
        variant: if cfg.divide { "pipeline" } else { "no-partition" }.into(),
        unique_ci_tests: cache.unique_count(),
        engine: engine.tag().into(),
        measure: Some(cfg.measure.kind.tag().into()),
        alpha: engine.alpha(),
        max_order: cfg.max_order,
        seed: cfg.seed,
        scaffold_edges: Some(scaffold.edge_count()),
        core_blocks: core_blocks.blocks.clone(),
        blocks: blocks.blocks.clone(),
        block_sizes: blocks.sizes(),
        gn_removals,
        union_edges: Some(merge.union.edge_count()),
        correction_added: Some(correction_added),
        final_edges: merge.skeleton.edge_count(),
        ci_tests_after_scaffold: Some(after_scaffold),
        ci_tests_after_learn: Some(after_learn),
        correction_strategy: Some(CORRECTION_STRATEGY.into()),
        timings,
    };
    Ok(PipelineRun {
        skeleton: merge.skeleton.clone(),
        scaffold,
        core_blocks,
        blocks,
        locals,
        merge,
        report,
    })
}

/// PC-stable skeleton phase from the complete graph.
pub fn pc_stable_skeleton(
    p: usize,
    cache: &CiCache,
    engine: &dyn CiEngine,
    max_order: Option<usize>,
) -> Result<(Skeleton, SepSets)> {
    let identity: Vec<usize> = (0..p).collect();
    backward_phase(&Skeleton::complete(p), &identity, cache, engine, max_order)
        .map_err(|e| e.at_stage(Stage::Baseline))
}

/// PC-stable baseline with its own fresh cache and a Fisher-z engine.
pub fn run_pc_stable(d: &Dataset, cfg: &LearnConfig) -> Result<(Skeleton, RunReport)> {
    let engine = FisherZ::new(d, cfg.alpha)?;
    let cache = CiCache::new();
    let mut sw = Stopwatch::start();
    let (skeleton, _) = pc_stable_skeleton(d.p(), &cache, &engine, cfg.max_order)?;
    let learn_ms = sw.lap_ms();
    let report = RunReport {
        variant: "pc-stable".into(),
        unique_ci_tests: cache.unique_count(),
        engine: engine.tag().into(),
        measure: None,
        alpha: cfg.alpha,
        max_order: cfg.max_order,
        seed: cfg.seed,
        scaffold_edges: None,
        core_blocks: Vec::new(),
        blocks: vec![(0..d.p()).collect()],
        block_sizes: vec![d.p()],
        gn_removals: 0,
        union_edges: None,
        correction_added: None,
        final_edges: skeleton.edge_count(),
        ci_tests_after_scaffold: None,
        ci_tests_after_learn: None,
        correction_strategy: None,
        timings: StageTimings {
            learn_ms,
            total_ms: learn_ms,
            ..StageTimings::default()
        },
    };
    Ok((skeleton, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citest::{CiQuery, CiResult};
    use std::collections::BTreeSet;

    /// Oracle engine answering from a fixed set of independences.
    struct TableEngine {
        independent: BTreeSet<(usize, usize, Vec<usize>)>,
    }

    impl CiEngine for TableEngine {
        fn tag(&self) -> &'static str {
            "table"
        }
        fn alpha(&self) -> f64 {
            0.05
        }
        fn test(&self, q: &CiQuery) -> Result<CiResult> {
            let ind = self.independent.contains(&(q.i(), q.j(), q.cond().to_vec()));
            Ok(CiResult::from_p_value(0.0, if ind { 0.5 } else { 0.0 }, 0.05))
        }
    }

    fn chain_engine() -> TableEngine {
        // 0 - 1 - 2: only 0 ⟂ 2 | 1
        TableEngine {
            independent: [(0, 2, vec![1])].into_iter().collect(),
        }
    }

    #[test]
    fn complete_graph_forward_is_noop() {
        let cache = CiCache::new();
        let g = Skeleton::complete(4);
        let out = forward_phase(&g, &[0, 1, 2, 3], &cache, &chain_engine(), ForwardPolicy::ReuseCached).unwrap();
        assert_eq!(out, g);
        assert_eq!(cache.unique_count(), 0);
    }

    #[test]
    fn edgeless_backward_is_noop() {
        let cache = CiCache::new();
        let g = Skeleton::empty(3);
        let (out, seps) = backward_phase(&g, &[0, 1, 2], &cache, &chain_engine(), None).unwrap();
        assert_eq!(out, g);
        assert!(seps.is_empty());
        assert_eq!(cache.unique_count(), 0);
    }

    #[test]
    fn backward_removes_chain_shortcut() {
        let cache = CiCache::new();
        let (out, seps) = backward_phase(&Skeleton::complete(3), &[0, 1, 2], &cache, &chain_engine(), None).unwrap();
        assert_eq!(out.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(seps.get(&(0, 2)), Some(&vec![1]));
    }

    #[test]
    fn max_order_caps_levels() {
        let cache = CiCache::new();
        let (out, _) = backward_phase(&Skeleton::complete(3), &[0, 1, 2], &cache, &chain_engine(), Some(0)).unwrap();
        assert_eq!(out, Skeleton::complete(3));
        assert!(cache.queries().iter().all(|q| q.order() == 0));
    }

    #[test]
    fn local_indices_map_to_global_queries() {
        // block {3, 5, 7} behaving like a chain 3 - 5 - 7
        let engine = TableEngine {
            independent: [(3, 7, vec![5])].into_iter().collect(),
        };
        let cache = CiCache::with_log();
        let (out, seps) = backward_phase(&Skeleton::complete(3), &[3, 5, 7], &cache, &engine, None).unwrap();
        assert_eq!(out.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(seps.get(&(3, 7)), Some(&vec![5]));
        for q in cache.issued() {
            assert!([3, 5, 7].contains(&q.x) && [3, 5, 7].contains(&q.y));
        }
    }

    #[test]
    fn skip_tested_leaves_cached_pairs() {
        let engine = TableEngine {
            independent: BTreeSet::new(),
        };
        let cache = CiCache::new();
        cache.test(&engine, 0, 1, &[]).unwrap();
        let out = forward_phase(&Skeleton::empty(3), &[0, 1, 2], &cache, &engine, ForwardPolicy::SkipTested).unwrap();
        assert_eq!(out.edges().collect::<Vec<_>>(), vec![(0, 2), (1, 2)]);
        let reuse = forward_phase(&Skeleton::empty(3), &[0, 1, 2], &cache, &engine, ForwardPolicy::ReuseCached).unwrap();
        assert_eq!(reuse, Skeleton::complete(3));
    }

    #[test]
    fn union_keeps_edge_retained_anywhere() {
        let a = LocalSkeleton {
            vars: vec![0, 1, 2],
            graph: Skeleton::from_edges(3, [(0, 1)]).unwrap(),
            sepsets: SepSets::new(),
        };
        let b = LocalSkeleton {
            vars: vec![1, 2, 3],
            graph: Skeleton::from_edges(3, [(0, 1), (1, 2)]).unwrap(),
            sepsets: SepSets::new(),
        };
        let u = union_of(4, &[a, b]);
        assert_eq!(u.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2), (2, 3)]);
    }
}
