//! Question/response alignment and entity-consistency checking.

use std::collections::BTreeSet;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{QaPair, QuestionSignal, ResponseSignal};
use crate::error::{Error, Result};
use crate::retrieval::{cosine, EmbeddingProvider, KnowledgeBase};

/// Pluggable semantic relevance scorer; scores live in [0, 1].
pub trait SemanticScorer {
    fn score(&self, question: &str, response: &str) -> Result<f64>;
}

impl<F> SemanticScorer for F
where
    F: Fn(&str, &str) -> f64,
{
    fn score(&self, question: &str, response: &str) -> Result<f64> {
        Ok(self(question, response))
    }
}

/// Default scorer: cosine over the shared embedding provider, clamped to
/// [0, 1] so antipodal vectors read as "irrelevant", not "negative".
pub struct EmbeddingScorer<'a> {
    provider: &'a dyn EmbeddingProvider,
}

impl<'a> EmbeddingScorer<'a> {
    pub fn new(provider: &'a dyn EmbeddingProvider) -> EmbeddingScorer<'a> {
        EmbeddingScorer { provider }
    }
}

impl SemanticScorer for EmbeddingScorer<'_> {
    fn score(&self, question: &str, response: &str) -> Result<f64> {
        let q = self.provider.embed(question)?;
        let r = self.provider.embed(response)?;
        Ok((cosine(&q, &r) as f64).clamp(0.0, 1.0))
    }
}

fn is_sorted_by_time<T, F: Fn(&T) -> Option<f64>>(items: &[T], key: F) -> bool {
    items
        .windows(2)
        .all(|w| match (key(&w[0]), key(&w[1])) {
            (Some(a), Some(b)) => a <= b,
            _ => true,
        })
}

/// Pairs each question with at most one response: among responses inside the
/// forward window with semantic score at or above `theta_sem`, the highest
/// scorer wins (ties go to the earliest). The pair is kept only when it is
/// entity-consistent against the knowledge base; everything else lands in the
/// unpaired list. One response may serve several questions.
pub fn align_qa(
    questions: &[QuestionSignal],
    responses: &[ResponseSignal],
    window: f64,
    theta_sem: f64,
    kb: &KnowledgeBase,
    scorer: &dyn SemanticScorer,
) -> Result<(Vec<QaPair>, Vec<QuestionSignal>)> {
    if !is_sorted_by_time(questions, |q: &QuestionSignal| q.timestamp) {
        return Err(Error::Precondition("questions not timestamp-sorted".into()));
    }
    if !is_sorted_by_time(responses, |r: &ResponseSignal| Some(r.timestamp)) {
        return Err(Error::Precondition("responses not timestamp-sorted".into()));
    }

    let mut pairs = Vec::new();
    let mut unpaired = Vec::new();
    for question in questions {
        let Some(t_q) = question.timestamp else {
            unpaired.push(question.clone());
            continue;
        };
        let mut best: Option<(f64, &ResponseSignal)> = None;
        for response in responses {
            let gap = response.timestamp - t_q;
            if gap < 0.0 {
                continue;
            }
            if gap > window {
                break;
            }
            let score = scorer.score(&question.text, &response.text)?;
            if score < theta_sem {
                continue;
            }
            let better = match &best {
                None => true,
                // Strictly-greater keeps the earliest response on ties.
                Some((best_score, _)) => score > *best_score,
            };
            if better {
                best = Some((score, response));
            }
        }
        match best {
            Some((score, response)) => {
                let (consistent, _) =
                    check_entity_consistency(&question.text, &response.text, kb);
                if consistent {
                    pairs.push(QaPair {
                        question: question.clone(),
                        response: response.clone(),
                        semantic_score: score,
                        time_gap: response.timestamp - t_q,
                        entity_consistent: true,
                    });
                } else {
                    unpaired.push(question.clone());
                }
            }
            None => unpaired.push(question.clone()),
        }
    }
    Ok((pairs, unpaired))
}

/// One detected inconsistency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub kind: String,
    pub detail: String,
}

fn sentences(text: &str) -> Vec<&str> {
    text.split(|c| matches!(c, '.' | '!' | '?' | ';' | '。' | '！' | '？' | '；'))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn numbers(text: &str) -> Vec<String> {
    let re = Regex::new(r"\d+(?:\.\d+)?").unwrap();
    let cleaned = text.replace(',', "");
    re.find_iter(&cleaned).map(|m| m.as_str().to_string()).collect()
}

fn lower_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Model-code-like mentions: letters immediately followed by digits, or a
/// capitalized word joined to digits. Pure numbers and unit suffixes do not
/// qualify.
fn entity_candidates(text: &str) -> Vec<String> {
    let re = Regex::new(r"\b([A-Za-z]+)([- ]?)(\d+[A-Za-z0-9]*)\b").unwrap();
    // Words that casually precede numbers without naming a product.
    const NOISE_WORDS: &[&str] = &[
        "top", "page", "step", "day", "week", "month", "year", "item", "option", "no", "number",
        "part", "turn", "stage", "around", "about", "under", "over", "at", "to", "than",
    ];
    let mut out = Vec::new();
    for cap in re.captures_iter(text) {
        let word = cap.get(1).unwrap().as_str();
        let sep = cap.get(2).unwrap().as_str();
        if !sep.is_empty() {
            let first = word.chars().next().unwrap();
            if !first.is_uppercase() || NOISE_WORDS.contains(&word.to_lowercase().as_str()) {
                continue;
            }
        } else if NOISE_WORDS.contains(&word.to_lowercase().as_str()) {
            continue;
        }
        out.push(cap.get(0).unwrap().as_str().to_string());
    }
    out
}

fn canonical_entity(text: &str) -> String {
    text.to_lowercase().replace(['-', ' '], "")
}

/// Deterministic lexicon/regex consistency check. The result is false when
/// the response names a model-like entity absent from the knowledge base, or
/// asserts a numeric value for a known (entity, attribute) that contradicts
/// the stored value. Texts with no detectable entities pass vacuously.
pub fn check_entity_consistency(
    question: &str,
    response: &str,
    kb: &KnowledgeBase,
) -> (bool, Vec<Mismatch>) {
    let mut mismatches = Vec::new();
    let known: BTreeSet<String> = kb.entities().iter().map(|e| canonical_entity(e)).collect();

    for candidate in entity_candidates(response) {
        if !known.contains(&canonical_entity(&candidate)) {
            mismatches.push(Mismatch {
                kind: "unknown entity".into(),
                detail: format!("`{candidate}` not in knowledge base"),
            });
        }
    }

    // Value claims: for each known entity named in a response sentence, any
    // number in that sentence paired with a recognizable attribute must match
    // the stored value. The question supplies attribute context for terse
    // answers that only carry the number.
    let question_tokens = lower_tokens(question);
    let question_entities: Vec<&str> = kb
        .entities()
        .into_iter()
        .filter(|e| {
            question.to_lowercase().contains(&e.to_lowercase())
        })
        .collect();
    for sentence in sentences(response) {
        let sentence_lower = sentence.to_lowercase();
        let mut named: Vec<&str> = kb
            .entities()
            .into_iter()
            .filter(|e| sentence_lower.contains(&e.to_lowercase()))
            .collect();
        if named.is_empty() && question_entities.len() == 1 {
            named = question_entities.clone();
        }
        let nums = numbers(sentence);
        if nums.is_empty() {
            continue;
        }
        let sentence_tokens = lower_tokens(sentence);
        for entity in named {
            for entry in kb.entries().iter().filter(|e| e.entity == entity) {
                let attr_tokens: Vec<String> = entry
                    .attribute
                    .split(['_', ' ', '-'])
                    .filter(|t| !t.is_empty())
                    .map(|t| t.to_lowercase())
                    .collect();
                let mentioned = attr_tokens.iter().any(|t| {
                    sentence_tokens.contains(t) || question_tokens.contains(t)
                });
                if !mentioned {
                    continue;
                }
                let stored = numbers(&entry.value);
                if stored.is_empty() {
                    continue;
                }
                let claimed_about_attr: Vec<&String> = nums.iter().collect();
                let any_match = claimed_about_attr.iter().any(|n| stored.contains(n));
                if !any_match {
                    mismatches.push(Mismatch {
                        kind: "value conflict".into(),
                        detail: format!(
                            "{entity} {}: response says {:?}, knowledge base says {}",
                            entry.attribute, nums, entry.value
                        ),
                    });
                }
            }
        }
    }

    (mismatches.is_empty(), mismatches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::KbEntry;

    fn kb() -> KnowledgeBase {
        KnowledgeBase::new(
            "kb-test",
            vec![
                KbEntry {
                    entity: "Model Y".into(),
                    attribute: "price".into(),
                    value: "263900".into(),
                    source_ref: "s1".into(),
                },
                KbEntry {
                    entity: "Model Y".into(),
                    attribute: "range_km".into(),
                    value: "688".into(),
                    source_ref: "s2".into(),
                },
            ],
        )
        .unwrap()
    }

    fn q(ts: f64, text: &str) -> QuestionSignal {
        QuestionSignal {
            text: text.into(),
            timestamp: Some(ts),
            author_hash: "h".into(),
        }
    }

    fn r(ts: f64, text: &str) -> ResponseSignal {
        ResponseSignal {
            text: text.into(),
            timestamp: ts,
            speaker: super::super::Speaker::Host,
        }
    }

    #[test]
    fn window_excludes_late_high_scoring_response() {
        let kb = kb();
        let questions = vec![q(100.0, "question about range")];
        let responses = vec![r(105.0, "answer inside window"), r(400.0, "answer outside")];
        let scorer = |_: &str, resp: &str| -> f64 {
            if resp.contains("outside") {
                0.95
            } else {
                0.90
            }
        };
        let (pairs, unpaired) =
            align_qa(&questions, &responses, 120.0, 0.75, &kb, &scorer).unwrap();
        assert_eq!(pairs.len(), 1);
        assert!(unpaired.is_empty());
        assert_eq!(pairs[0].response.timestamp, 105.0);
        assert_eq!(pairs[0].time_gap, 5.0);
    }

    #[test]
    fn question_with_no_response_in_window_is_unpaired() {
        let kb = kb();
        let questions = vec![q(100.0, "anything here?")];
        let responses = vec![r(500.0, "too late")];
        let scorer = |_: &str, _: &str| 0.99;
        let (pairs, unpaired) =
            align_qa(&questions, &responses, 120.0, 0.75, &kb, &scorer).unwrap();
        assert!(pairs.is_empty());
        assert_eq!(unpaired.len(), 1);
    }

    #[test]
    fn score_tie_selects_the_earlier_response() {
        let kb = kb();
        let questions = vec![q(10.0, "tie question")];
        let responses = vec![r(20.0, "first candidate"), r(30.0, "second candidate")];
        let scorer = |_: &str, _: &str| 0.91;
        let (pairs, _) = align_qa(&questions, &responses, 120.0, 0.75, &kb, &scorer).unwrap();
        assert_eq!(pairs[0].response.timestamp, 20.0);
    }

    #[test]
    fn below_threshold_candidates_are_ignored() {
        let kb = kb();
        let questions = vec![q(10.0, "question")];
        let responses = vec![r(20.0, "weakly related")];
        let scorer = |_: &str, _: &str| 0.5;
        let (pairs, unpaired) =
            align_qa(&questions, &responses, 120.0, 0.75, &kb, &scorer).unwrap();
        assert!(pairs.is_empty());
        assert_eq!(unpaired.len(), 1);
    }

    #[test]
    fn entity_inconsistent_best_candidate_drops_the_pair() {
        let kb = kb();
        let questions = vec![q(10.0, "how much is the Model Y?")];
        let responses = vec![r(20.0, "the Model Y price is 999999.")];
        let scorer = |_: &str, _: &str| 0.95;
        let (pairs, unpaired) =
            align_qa(&questions, &responses, 120.0, 0.75, &kb, &scorer).unwrap();
        assert!(pairs.is_empty());
        assert_eq!(unpaired.len(), 1);
    }

    #[test]
    fn one_response_may_answer_multiple_questions() {
        let kb = kb();
        let questions = vec![q(10.0, "first question"), q(12.0, "second question")];
        let responses = vec![r(20.0, "batch answer for both")];
        let scorer = |_: &str, _: &str| 0.9;
        let (pairs, _) = align_qa(&questions, &responses, 120.0, 0.75, &kb, &scorer).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].response, pairs[1].response);
    }

    #[test]
    fn unsorted_questions_are_a_precondition_error() {
        let kb = kb();
        let questions = vec![q(50.0, "later"), q(10.0, "earlier")];
        let scorer = |_: &str, _: &str| 0.9;
        assert!(align_qa(&questions, &[], 120.0, 0.75, &kb, &scorer).is_err());
    }

    #[test]
    fn untimestamped_question_goes_unpaired() {
        let kb = kb();
        let questions = vec![QuestionSignal {
            text: "static page question".into(),
            timestamp: None,
            author_hash: "h".into(),
        }];
        let responses = vec![r(5.0, "an answer")];
        let scorer = |_: &str, _: &str| 0.9;
        let (pairs, unpaired) =
            align_qa(&questions, &responses, 120.0, 0.75, &kb, &scorer).unwrap();
        assert!(pairs.is_empty());
        assert_eq!(unpaired.len(), 1);
    }

    #[test]
    fn matching_price_is_consistent() {
        let (ok, mismatches) = check_entity_consistency(
            "how much is the Model Y?",
            "The Model Y price is 263,900.",
            &kb(),
        );
        assert!(ok, "{mismatches:?}");
        assert!(mismatches.is_empty());
    }

    #[test]
    fn unknown_model_is_flagged() {
        let (ok, mismatches) =
            check_entity_consistency("any other options?", "You could look at the GLB200.", &kb());
        assert!(!ok);
        assert_eq!(mismatches[0].kind, "unknown entity");
        assert!(mismatches[0].detail.contains("GLB200"));
    }

    #[test]
    fn no_entities_is_vacuously_consistent() {
        let (ok, mismatches) =
            check_entity_consistency("when are you open?", "we open at nine tomorrow", &kb());
        assert!(ok);
        assert!(mismatches.is_empty());
    }

    #[test]
    fn wrong_price_is_a_value_conflict() {
        let (ok, mismatches) = check_entity_consistency(
            "what does the Model Y cost?",
            "Model Y price is only 199000!",
            &kb(),
        );
        assert!(!ok);
        assert_eq!(mismatches[0].kind, "value conflict");
    }

    #[test]
    fn terse_numeric_answer_uses_question_entity_context() {
        let (ok, _) = check_entity_consistency(
            "what is the range_km of the Model Y?",
            "It does 688 km on a charge.",
            &kb(),
        );
        assert!(ok);
        let (bad, mismatches) = check_entity_consistency(
            "what is the range_km of the Model Y?",
            "It does 450 km on a charge.",
            &kb(),
        );
        assert!(!bad);
        assert_eq!(mismatches[0].kind, "value conflict");
    }

    #[test]
    fn unit_suffixed_numbers_are_not_entities() {
        let (ok, mismatches) =
            check_entity_consistency("range?", "the Model Y does 688km easily", &kb());
        assert!(ok, "{mismatches:?}");
    }
}
