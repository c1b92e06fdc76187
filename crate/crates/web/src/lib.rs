//! Browser demo: simulate a Gaussian DAG, then inspect its scaffold, the
//! Girvan–Newman blocks and the learned skeleton against PC-stable.
//!
//! Every exported method returns a JSON string; [`Session`] holds the same
//! logic without any JavaScript types so it can be tested natively.

use causal_dc::citest::{CiCache, FisherZ};
use causal_dc::datagen::{edge_prob_for, generate_dag, sample_sem, GenConfig, NoiseFamily};
use causal_dc::dependence::{dependency_matrix, DependenceMeasure, MeasureKind};
use causal_dc::learner::{run_pc_stable, run_pipeline_with, LearnConfig};
use causal_dc::metrics::{score_skeleton, SkeletonScore};
use causal_dc::partition::{causal_expansion_depth, girvan_newman_with_trace, PartitionConfig};
use causal_dc::scaffold::max_spanning_tree;
use causal_dc::{Dataset, Result, Skeleton};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct ScaffoldView {
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
    true_edges: usize,
}

#[derive(Serialize)]
struct PartitionView {
    core_blocks: Vec<Vec<usize>>,
    blocks: Vec<Vec<usize>>,
    removed: Vec<(usize, usize)>,
    scaffold: Vec<(usize, usize)>,
}

#[derive(Serialize)]
struct LearnView {
    edges: Vec<(usize, usize)>,
    score: SkeletonScore,
    blocks: Vec<Vec<usize>>,
    union_edges: usize,
    correction_added: usize,
    pc_edges: Vec<(usize, usize)>,
    pc_score: SkeletonScore,
}

pub struct Session {
    data: Dataset,
    truth: Skeleton,
}

fn edge_list(g: &Skeleton) -> Vec<(usize, usize)> {
    g.edges().collect()
}

impl Session {
    pub fn simulate(p: usize, n: usize, seed: u64, expected_edges: f64, noise: &str) -> Result<Self> {
        let family: NoiseFamily = noise.parse()?;
        let mut cfg = GenConfig::new(p, n, seed);
        if p >= 2 {
            cfg.edge_prob = edge_prob_for(p, expected_edges);
        }
        let (sem, truth) = generate_dag(&cfg)?;
        let data = sample_sem(&sem.with_noise(family), n, seed ^ 0x5EED)?;
        Ok(Self { data, truth })
    }

    pub fn truth_json(&self) -> String {
        self.truth.to_json()
    }

    pub fn scaffold_json(&self, measure: &str) -> Result<String> {
        let m = DependenceMeasure::new(measure.parse::<MeasureKind>()?);
        let w = dependency_matrix(&self.data, &m)?;
        let tree = max_spanning_tree(&w);
        let view = ScaffoldView {
            weights: tree.edges().map(|(i, j)| w.get(i, j)).collect(),
            true_edges: tree.edges().filter(|&(i, j)| self.truth.has_edge(i, j)).count(),
            edges: edge_list(&tree),
        };
        Ok(serde_json::to_string(&view)?)
    }

    pub fn partition_json(&self, measure: &str, max_block_size: usize) -> Result<String> {
        let tree = self.scaffold(measure)?;
        let cfg = self.partition_config(max_block_size);
        let (core, removed) = girvan_newman_with_trace(&tree, &cfg)?;
        let blocks = causal_expansion_depth(&tree, &core, cfg.expansion_depth)?;
        let view = PartitionView {
            core_blocks: core.blocks,
            blocks: blocks.blocks,
            removed,
            scaffold: edge_list(&tree),
        };
        Ok(serde_json::to_string(&view)?)
    }

    pub fn learn_json(&self, measure: &str, alpha: f64, max_block_size: usize, divide: bool) -> Result<String> {
        let cfg = LearnConfig {
            alpha,
            measure: DependenceMeasure::new(measure.parse()?),
            divide,
            partition: Some(self.partition_config(max_block_size)),
            ..LearnConfig::default()
        };
        let engine = FisherZ::new(&self.data, alpha)?;
        let cache = CiCache::new();
        let run = run_pipeline_with(&self.data, &cfg, &engine, &cache)?;
        let (pc, pc_report) = run_pc_stable(&self.data, &cfg)?;
        let view = LearnView {
            edges: edge_list(&run.skeleton),
            score: score_skeleton(&run.skeleton, &self.truth, run.report.unique_ci_tests)?,
            blocks: run.blocks.blocks,
            union_edges: run.merge.union.edge_count(),
            correction_added: run.merge.augmented.edge_count() - run.merge.union.edge_count(),
            pc_edges: edge_list(&pc),
            pc_score: score_skeleton(&pc, &self.truth, pc_report.unique_ci_tests)?,
        };
        Ok(serde_json::to_string(&view)?)
    }

    fn scaffold(&self, measure: &str) -> Result<Skeleton> {
        let m = DependenceMeasure::new(measure.parse()?);
        Ok(max_spanning_tree(&dependency_matrix(&self.data, &m)?))
    }

    fn partition_config(&self, max_block_size: usize) -> PartitionConfig {
        PartitionConfig {
            max_block_size,
            ..PartitionConfig::for_p(self.data.p())
        }
    }
}

fn js(e: causal_dc::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    inner: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(p: usize, n: usize, seed: u32, expected_edges: f64, noise: &str) -> Result<Demo, JsError> {
        Session::simulate(p, n, seed as u64, expected_edges, noise)
            .map(|inner| Demo { inner })
            .map_err(js)
    }

    pub fn truth(&self) -> String {
        self.inner.truth_json()
    }

    pub fn scaffold(&self, measure: &str) -> Result<String, JsError> {
        self.inner.scaffold_json(measure).map_err(js)
    }

    pub fn partition(&self, measure: &str, max_block_size: usize) -> Result<String, JsError> {
        self.inner.partition_json(measure, max_block_size).map_err(js)
    }

    pub fn learn(&self, measure: &str, alpha: f64, max_block_size: usize, divide: bool) -> Result<String, JsError> {
        self.inner.learn_json(measure, alpha, max_block_size, divide).map_err(js)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> Session {
        Session::simulate(16, 800, 3, 24.0, "gaussian").unwrap()
    }

    #[test]
    fn scaffold_is_a_tree() {
        let v: serde_json::Value = serde_json::from_str(&session().scaffold_json("pearson").unwrap()).unwrap();
        assert_eq!(v["edges"].as_array().unwrap().len(), 15);
        assert_eq!(v["weights"].as_array().unwrap().len(), 15);
    }

    #[test]
    fn partition_respects_block_size() {
        let v: serde_json::Value = serde_json::from_str(&session().partition_json("spearman", 5).unwrap()).unwrap();
        for b in v["core_blocks"].as_array().unwrap() {
            assert!(b.as_array().unwrap().len() <= 5);
        }
        assert!(!v["removed"].as_array().unwrap().is_empty());
    }

    #[test]
    fn learn_reports_both_methods() {
        let s = session();
        let v: serde_json::Value = serde_json::from_str(&s.learn_json("ce", 0.05, 6, true).unwrap()).unwrap();
        assert!(v["score"]["ci_tests"].as_u64().unwrap() > 0);
        assert!(v["pc_score"]["f1"].as_f64().unwrap() > 0.5);
        assert!(v["blocks"].as_array().unwrap().len() >= 2);
        let flat: serde_json::Value = serde_json::from_str(&s.learn_json("ce", 0.05, 6, false).unwrap()).unwrap();
        assert_eq!(flat["blocks"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(Session::simulate(16, 100, 1, 20.0, "cauchy").is_err());
        assert!(Session::simulate(1, 100, 1, 20.0, "gaussian").is_err());
        assert!(session().scaffold_json("kendall").is_err());
        assert!(session().partition_json("ce", 1).is_err());
    }
}
