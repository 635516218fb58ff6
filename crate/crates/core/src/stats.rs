//! Corpus statistics recomputable from an example file.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::program::anonymize;
use crate::question::AnswerShape;
use crate::record::ExampleRecord;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total_questions: usize,
    pub unique_questions: usize,
    pub unique_answers: usize,
    pub unique_images: usize,
    pub unique_anonymized_programs: usize,
    pub true_false: usize,
    pub x_or_y: usize,
    pub how_many: usize,
    pub open: usize,
    /// Mean number of whitespace-separated words per question.
    pub mean_question_length: f64,
    pub mean_images: f64,
}

pub fn compute_stats(records: &[ExampleRecord]) -> DatasetStats {
    let mut s = DatasetStats {
        total_questions: records.len(),
        ..DatasetStats::default()
    };
    if records.is_empty() {
        return s;
    }
    let mut questions = BTreeSet::new();
    let mut answers = BTreeSet::new();
    let mut images = BTreeSet::new();
    let mut programs = BTreeSet::new();
    let (mut words, mut shown) = (0usize, 0usize);
    for r in records {
        questions.insert(r.question.as_str());
        answers.insert(r.answer.to_string());
        images.extend(r.images.iter().map(String::as_str));
        programs.insert(anonymize(&r.program).to_string());
        words += r.question.split_whitespace().count();
        shown += r.images.len();
        match r.template.answer_shape() {
            AnswerShape::TrueFalse => s.true_false += 1,
            AnswerShape::Choice => s.x_or_y += 1,
            AnswerShape::HowMany => s.how_many += 1,
            AnswerShape::Open => s.open += 1,
        }
    }
    s.unique_questions = questions.len();
    s.unique_answers = answers.len();
    s.unique_images = images.len();
    s.unique_anonymized_programs = programs.len();
    s.mean_question_length = words as f64 / records.len() as f64;
    s.mean_images = shown as f64 / records.len() as f64;
    s
}

impl DatasetStats {
    /// `key value` per line, in field order.
    pub fn to_report(&self) -> String {
        let value = serde_json::to_value(self).expect("stats serialize");
        let mut out = String::new();
        for key in Self::FIELDS {
            let _ = writeln!(out, "{key} {}", value[key]);
        }
        out
    }

    pub const FIELDS: [&'static str; 11] = [
        "total_questions",
        "unique_questions",
        "unique_answers",
        "unique_images",
        "unique_anonymized_programs",
        "true_false",
        "x_or_y",
        "how_many",
        "open",
        "mean_question_length",
        "mean_images",
    ];
}
