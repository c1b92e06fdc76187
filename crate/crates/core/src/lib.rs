//! Divide-and-conquer causal skeleton discovery.
//!
//! The pipeline builds a cheap tree-shaped super-structure (the maximum spanning
//! tree of a pairwise dependence matrix, copula entropy by default), cuts it into
//! blocks with Girvan–Newman, grows each block by its scaffold neighbourhood,
//! learns a skeleton inside every block with conditional-independence tests, and
//! finally merges the blocks and corrects the pairs that no block could see.
//! Every CI query goes through a canonicalising cache whose size is the cost
//! metric reported alongside accuracy.
//!
//! ```
//! use causal_dc::datagen::{generate_dag, sample_sem, GenConfig};
//! use causal_dc::learner::{run_pipeline, LearnConfig};
//! use causal_dc::metrics::score_skeleton;
//!
//! let (sem, truth) = generate_dag(&GenConfig::new(10, 500, 7)).unwrap();
//! let data = sample_sem(&sem, 500, 8).unwrap();
//! let (skeleton, report) = run_pipeline(&data, &LearnConfig::default()).unwrap();
//! let score = score_skeleton(&skeleton, &truth, report.unique_ci_tests).unwrap();
//! assert!(score.accuracy > 0.5);
//! ```

pub mod bench;
pub mod citest;
pub mod data;
pub mod datagen;
pub mod dependence;
pub mod error;
pub mod graph;
pub mod learner;
pub mod metrics;
pub mod partition;
pub mod scaffold;

pub use data::{load_dataset, save_dataset, Dataset};
pub use error::{Error, Result, Stage};
pub use graph::{parse_skeleton, serialize_skeleton, Partition, Skeleton, WeightedGraph};
