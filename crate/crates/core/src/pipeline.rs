//! End-to-end generation: enumerate, mine, check, instantiate, pair.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::lexicon::{AttributeCategories, LexiconError, MutualExclusionLexicon, PluralTable};
use crate::miner::{mine, Corpus, ExactVerifier, Mined};
use crate::question::{pair_alternate_answer, Generator, TemplateId};
use crate::realize::Realizer;
use crate::record::ExampleRecord;
use crate::rng::stream;
use crate::subgraph::Subgraph;

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Lexicon {
        path: String,
        #[source]
        source: LexiconError,
    },
}

/// Word lists the pipeline reads.
#[derive(Debug, Clone)]
pub struct Resources {
    pub lexicon: MutualExclusionLexicon,
    pub categories: AttributeCategories,
    pub realizer: Realizer,
}

impl Default for Resources {
    fn default() -> Self {
        Resources {
            lexicon: MutualExclusionLexicon::builtin(),
            categories: AttributeCategories::builtin(),
            realizer: Realizer::new(PluralTable::builtin()),
        }
    }
}

fn load<T>(path: &Path, parse: impl Fn(&str) -> Result<T, LexiconError>) -> Result<T, ResourceError> {
    let text = std::fs::read_to_string(path).map_err(|source| ResourceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text).map_err(|source| ResourceError::Lexicon {
        path: path.display().to_string(),
        source,
    })
}

impl Resources {
    /// Built-in lists, replaced by any file the config names.
    pub fn load(config: &PipelineConfig) -> Result<Self, ResourceError> {
        let mut r = Resources::default();
        if let Some(p) = &config.exclusivity {
            r.lexicon = load(p, MutualExclusionLexicon::parse)?;
        }
        if let Some(p) = &config.categories {
            r.categories = load(p, AttributeCategories::parse)?;
        }
        if let Some(p) = &config.plurals {
            r.realizer = Realizer::new(load(p, PluralTable::parse)?);
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub subgraphs: usize,
    pub records: usize,
    pub paired: usize,
    pub by_template: BTreeMap<String, usize>,
    /// "template: reason" to count.
    pub skips: BTreeMap<String, usize>,
}

struct Job<'a> {
    scene: usize,
    index: usize,
    g: &'a Subgraph,
    mined: usize,
}

type Keyed = ((usize, usize, usize, usize), ExampleRecord, Option<(usize, usize, usize)>);

/// Source subgraphs of scene `s` after the size cap and per-image sampling.
fn sources<'a>(corpus: &'a Corpus, s: usize, config: &PipelineConfig) -> Vec<(usize, &'a Subgraph)> {
    let all: Vec<(usize, &Subgraph)> = corpus
        .index()
        .subgraphs(s)
        .iter()
        .enumerate()
        .filter(|(_, g)| config.max_subgraph_size.is_none_or(|m| g.node_count() <= m))
        .collect();
    match config.max_subgraphs_per_image {
        Some(cap) if all.len() > cap => {
            let mut rng = stream(config.seed, &format!("sources/{}", corpus.scene(s).image_id()));
            let mut picked: Vec<(usize, &Subgraph)> = all.choose_multiple(&mut rng, cap).copied().collect();
            picked.sort_by_key(|(i, _)| *i);
            picked
        }
        _ => all,
    }
}

/// Records sorted by id (`q000001`, ...), and a tally of what was skipped.
/// The output depends only on the corpus, the config and the resources.
pub fn generate(corpus: &Corpus, config: &PipelineConfig, res: &Resources) -> (Vec<ExampleRecord>, GenerateSummary) {
    let mut jobs = Vec::new();
    let mut distinct: Vec<&Subgraph> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    for s in 0..corpus.len() {
        for (index, g) in sources(corpus, s, config) {
            let key = g.canonical();
            let mined = *slot.entry(key).or_insert_with(|| {
                distinct.push(g);
                distinct.len() - 1
            });
            jobs.push(Job { scene: s, index, g, mined });
        }
    }
    let mined: Vec<Mined> = distinct
        .par_iter()
        .map(|g| mine(g, corpus, &res.lexicon, &ExactVerifier, None))
        .collect();

    let mut generator = Generator::new(corpus, &res.categories, &res.realizer);
    generator.max_images = config.max_images;
    let mut templates = config.templates.clone();
    templates.sort();
    templates.dedup();

    let results: Vec<(Vec<Keyed>, Vec<String>)> = jobs
        .par_iter()
        .map(|job| run_job(job, corpus, &generator, &mined[job.mined], &templates, config))
        .collect();

    let mut summary = GenerateSummary {
        subgraphs: jobs.len(),
        ..GenerateSummary::default()
    };
    let mut keyed: Vec<Keyed> = Vec::new();
    for (records, skips) in results {
        keyed.extend(records);
        for s in skips {
            *summary.skips.entry(s).or_default() += 1;
        }
    }
    keyed.sort_by_key(|(k, _, _)| *k);
    let mut ids: HashMap<(usize, usize, usize), String> = HashMap::new();
    let mut out = Vec::with_capacity(keyed.len());
    for (n, ((s, i, t, variant), mut r, original)) in keyed.into_iter().enumerate() {
        r.id = format!("q{:06}", n + 1);
        if variant == 0 {
            ids.insert((s, i, t), r.id.clone());
        } else {
            r.properties.alternate_of = original.and_then(|k| ids.get(&k).cloned());
            summary.paired += 1;
        }
        *summary.by_template.entry(r.template.name().to_string()).or_default() += 1;
        out.push(r);
    }
    summary.records = out.len();
    (out, summary)
}

fn run_job(
    job: &Job<'_>,
    corpus: &Corpus,
    generator: &Generator<'_>,
    mined: &Mined,
    templates: &[TemplateId],
    config: &PipelineConfig,
) -> (Vec<Keyed>, Vec<String>) {
    let source = corpus.scene(job.scene).image_id();
    let mut own = mined.clone();
    own.positives.retain(|p| p != source);
    let canonical = job.g.canonical();
    let mut records = Vec::new();
    let mut skips = Vec::new();
    for &t in templates {
        let mut rng = stream(config.seed, &format!("generate/{source}/{canonical}/{}", t.name()));
        match generator.instantiate(t, job.g, source, &own, &mut rng) {
            Ok(r) => {
                let key = (job.scene, job.index, t as usize);
                let alt = if config.pair {
                    pair_alternate_answer(&r, generator, &own, &mut rng)
                } else {
                    None
                };
                records.push(((key.0, key.1, key.2, 0), r, None));
                if let Some(a) = alt {
                    records.push(((key.0, key.1, key.2, 1), a, Some(key)));
                }
            }
            Err(e) => skips.push(format!("{}: {}", t.name(), e.reason())),
        }
    }
    (records, skips)
}
