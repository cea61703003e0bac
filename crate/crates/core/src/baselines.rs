//! Answer-prior heuristics.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{answer_vocabulary, Answer, AnswerType};
use crate::questions::QAInstance;
use crate::seed::rng_for;
use crate::seed_key;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Heuristic {
    #[serde(rename = "Random")]
    Random,
    #[serde(rename = "AT-Random")]
    AtRandom,
    #[serde(rename = "MFA")]
    Mfa,
    #[serde(rename = "AT-MFA")]
    AtMfa,
}

impl Heuristic {
    pub const ALL: [Heuristic; 4] = [Heuristic::Random, Heuristic::AtRandom, Heuristic::Mfa, Heuristic::AtMfa];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Random => "Random",
            Heuristic::AtRandom => "AT-Random",
            Heuristic::Mfa => "MFA",
            Heuristic::AtMfa => "AT-MFA",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaselineError {
    #[error("no training answers to take a most frequent answer from")]
    EmptyTrainStats,
}

/// Answer frequencies of the training split.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub answers: BTreeMap<Answer, usize>,
}

impl TrainStats {
    pub fn from_instances<'a>(train: impl IntoIterator<Item = &'a QAInstance>) -> Self {
        let mut answers = BTreeMap::new();
        for q in train {
            *answers.entry(q.answer).or_insert(0) += 1;
        }
        TrainStats { answers }
    }

    /// Most frequent answer among those accepted by `filter`; ties go to the
    /// smallest answer.
    fn modal(&self, filter: impl Fn(&Answer) -> bool) -> Option<Answer> {
        let mut best: Option<(usize, Answer)> = None;
        for (a, n) in self.answers.iter().filter(|(a, _)| filter(a)) {
            if best.is_none_or(|(bn, _)| *n > bn) {
                best = Some((*n, *a));
            }
        }
        best.map(|(_, a)| a)
    }
}

pub fn heuristic_answer<R: Rng + ?Sized>(
    answer_type: AnswerType,
    model: Heuristic,
    stats: &TrainStats,
    rng: &mut R,
) -> Result<Answer, BaselineError> {
    Ok(match model {
        Heuristic::Random => {
            let v = answer_vocabulary();
            v[rng.random_range(0..v.len())]
        }
        Heuristic::AtRandom => {
            let v = answer_type.vocabulary();
            v[rng.random_range(0..v.len())]
        }
        Heuristic::Mfa => stats.modal(|_| true).ok_or(BaselineError::EmptyTrainStats)?,
        Heuristic::AtMfa => match stats.modal(|a| a.answer_type() == answer_type) {
            Some(a) => a,
            // No training answer of this type: fall back to the first answer of the type.
            None if !stats.answers.is_empty() => answer_type.vocabulary()[0],
            None => return Err(BaselineError::EmptyTrainStats),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineScore {
    pub model: Heuristic,
    /// Mean accuracy over seeds, percent.
    pub accuracy: f64,
    pub per_seed: Vec<f64>,
    /// Mean accuracy per answer type, percent.
    pub by_answer_type: BTreeMap<AnswerType, f64>,
}

/// Scores every heuristic on `test` with one RNG stream per seed.
pub fn evaluate_baselines(
    test: &[QAInstance],
    stats: &TrainStats,
    seeds: &[u64],
) -> Result<Vec<BaselineScore>, BaselineError> {
    let mut out = Vec::new();
    for model in Heuristic::ALL {
        let mut per_seed = Vec::new();
        let mut by_type: BTreeMap<AnswerType, (f64, usize)> = BTreeMap::new();
        for &seed in seeds {
            let mut rng = rng_for(&seed_key!["baseline", model.name(), seed]);
            let mut correct = 0usize;
            for q in test {
                let hit = heuristic_answer(q.answer_type, model, stats, &mut rng)? == q.answer;
                correct += hit as usize;
                let e = by_type.entry(q.answer_type).or_default();
                e.0 += hit as usize as f64;
                e.1 += 1;
            }
            per_seed.push(if test.is_empty() { 0.0 } else { 100.0 * correct as f64 / test.len() as f64 });
        }
        let accuracy = per_seed.iter().sum::<f64>() / per_seed.len().max(1) as f64;
        let by_answer_type = by_type.into_iter().map(|(t, (c, n))| (t, 100.0 * c / n as f64)).collect();
        out.push(BaselineScore { model, accuracy, per_seed, by_answer_type });
    }
    Ok(out)
}
