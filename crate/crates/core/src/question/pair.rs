//! Same question, other images, other answer.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::Generator;
use crate::miner::Mined;
use crate::record::ExampleRecord;

const ATTEMPTS: usize = 64;

/// A copy of `r` over a different image set drawn from the same pools
/// (source, positives, distractors, images already shown) whose program yields a different answer.
/// `alternate_of` is left for the caller once ids are known.
pub fn pair_alternate_answer<R: Rng>(
    r: &ExampleRecord,
    generator: &Generator<'_>,
    mined: &Mined,
    rng: &mut R,
) -> Option<ExampleRecord> {
    let source = r.properties.source_image.as_str();
    let mut pool: Vec<&str> = vec![source];
    let shown = r.images.iter().map(String::as_str);
    for p in mined.positives.iter().map(String::as_str).chain(mined.distractor_images()).chain(shown) {
        if !pool.contains(&p) {
            pool.push(p);
        }
    }
    let min = r.template.spec().min_images;
    let size = r.images.len().min(pool.len());
    if size < min {
        return None;
    }
    let original: BTreeSet<&str> = r.images.iter().map(String::as_str).collect();
    for _ in 0..ATTEMPTS {
        let mut images: Vec<String> = pool.choose_multiple(rng, size).map(|s| s.to_string()).collect();
        if images.iter().map(String::as_str).collect::<BTreeSet<_>>() == original {
            continue;
        }
        images.shuffle(rng);
        let scenes: Vec<_> = images
            .iter()
            .map(|i| generator.corpus.scene_by_id(i).expect("pool images come from the corpus"))
            .collect();
        let Ok(answer) = generator.answer(&r.program, &scenes) else { continue };
        if answer == r.answer {
            continue;
        }
        let mut out = r.clone();
        out.properties.positives = images
            .iter()
            .filter(|i| i.as_str() == source || mined.positives.contains(i))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        out.images = images;
        out.answer = answer;
        return Some(out);
    }
    None
}
