//! Synthesis of multi-image visual questions from scene graphs.
//!
//! The pipeline enumerates rooted subgraphs of each scene, mines positive and
//! distractor images for them, instantiates question templates into
//! executable programs, balances the result and carves compositional splits.

pub mod balance;
pub mod config;
pub mod decompose;
pub mod distance;
pub mod index;
pub mod lexicon;
pub mod matching;
pub mod miner;
pub mod pipeline;
pub mod program;
pub mod question;
pub mod realize;
pub mod record;
pub mod rng;
pub mod scene;
pub mod split;
pub mod stats;
pub mod subgraph;

pub use decompose::decompose_simple;
pub use distance::edit_distance;
pub use matching::{enumerate_subgraphs, match_subgraph, Assignment, EnumerationLimits};
pub use miner::{find_distractor_images, find_positive_images, AbsenceVerifier, Corpus, ExactVerifier};
pub use realize::{describe, DescribeOptions};
pub use scene::{parse_scene_graphs, SceneError, SceneGraph};
pub use subgraph::{validate_subgraph, Subgraph};
