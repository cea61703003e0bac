//! Dataset histograms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dsl::AnswerType;
use crate::questions::{Category, QAInstance};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: usize,
    pub videos: usize,
    pub by_category: BTreeMap<Category, usize>,
    pub by_subcategory: BTreeMap<String, usize>,
    pub by_answer_type: BTreeMap<AnswerType, usize>,
    /// category → answer type → answer → count.
    pub nested: BTreeMap<Category, BTreeMap<AnswerType, BTreeMap<String, usize>>>,
    pub by_template: BTreeMap<String, BTreeMap<String, usize>>,
    pub by_layout: BTreeMap<u32, usize>,
    pub by_scene: BTreeMap<String, usize>,
    /// Percent of all questions per category.
    pub category_share: BTreeMap<Category, f64>,
    pub answer_type_share: BTreeMap<AnswerType, f64>,
}

pub fn stats<'a>(instances: impl IntoIterator<Item = &'a QAInstance>) -> DatasetStats {
    let mut s = DatasetStats::default();
    for q in instances {
        s.total += 1;
        *s.by_category.entry(q.category).or_default() += 1;
        *s.by_subcategory.entry(q.subcategory.code().to_string()).or_default() += 1;
        *s.by_answer_type.entry(q.answer_type).or_default() += 1;
        *s.nested
            .entry(q.category)
            .or_default()
            .entry(q.answer_type)
            .or_default()
            .entry(q.answer.to_string())
            .or_default() += 1;
        *s.by_template.entry(q.template_id.clone()).or_default().entry(q.answer.to_string()).or_default() += 1;
        *s.by_layout.entry(q.layout_id).or_default() += 1;
        *s.by_scene.entry(q.scene_id.clone()).or_default() += 1;
    }
    s.videos = s.by_scene.len();
    let pct = |n: usize| if s.total == 0 { 0.0 } else { 100.0 * n as f64 / s.total as f64 };
    s.category_share = s.by_category.iter().map(|(k, v)| (*k, pct(*v))).collect();
    s.answer_type_share = s.by_answer_type.iter().map(|(k, v)| (*k, pct(*v))).collect();
    s
}
