//! Pipeline configuration, serialized into every output header.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::matching::EnumerationLimits;
use crate::question::TemplateId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Largest object count of an enumerated subgraph.
    pub max_objects: usize,
    /// Largest node count of a source subgraph; unlimited when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_subgraph_size: Option<usize>,
    /// Source subgraphs sampled per image; all when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_subgraphs_per_image: Option<usize>,
    pub max_images: usize,
    pub templates: Vec<TemplateId>,
    /// Also emit a same-question record with a different answer.
    pub pair: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclusivity: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub categories: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plurals: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            max_objects: EnumerationLimits::default().max_objects,
            max_subgraph_size: None,
            max_subgraphs_per_image: None,
            max_images: 5,
            templates: TemplateId::ALL.to_vec(),
            pair: true,
            exclusivity: None,
            categories: None,
            plurals: None,
        }
    }
}

impl PipelineConfig {
    pub fn limits(&self) -> EnumerationLimits {
        EnumerationLimits {
            max_objects: self.max_objects,
        }
    }

    pub fn header(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
