//! Dialogue-strategy tagging over agent responses.

use serde::{Deserialize, Serialize};

use super::{ResponseSignal, StrategyTag};
use crate::error::{Error, Result};
use crate::gateway::{Gateway, GenerationRequest, PurposeTag};

/// One taxonomy entry: a label and the case-insensitive substrings that
/// trigger it in the offline rule classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaxonomyRule {
    pub label: String,
    pub keywords: Vec<String>,
}

/// Ordered rule set; the first matching rule wins. Must contain an `other`
/// label, the fallback for unmatched and out-of-taxonomy outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyTaxonomy {
    rules: Vec<TaxonomyRule>,
}

impl StrategyTaxonomy {
    pub fn new(rules: Vec<TaxonomyRule>) -> Result<StrategyTaxonomy> {
        if rules.is_empty() {
            return Err(Error::Config("strategy taxonomy is empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for rule in &rules {
            if !seen.insert(rule.label.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate taxonomy label `{}`",
                    rule.label
                )));
            }
        }
        if !seen.contains("other") {
            return Err(Error::Config(
                "strategy taxonomy must include an `other` label".into(),
            ));
        }
        Ok(StrategyTaxonomy { rules })
    }

    pub fn labels(&self) -> Vec<&str> {
        self.rules.iter().map(|r| r.label.as_str()).collect()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.rules.iter().any(|r| r.label == label)
    }

    /// Offline classifier: first rule with a keyword hit; confidence scales
    /// with the fraction of the rule's keywords present.
    pub fn classify(&self, text: &str) -> (String, f64) {
        let lower = text.to_lowercase();
        for rule in &self.rules {
            if rule.keywords.is_empty() {
                continue;
            }
            let hits = rule
                .keywords
                .iter()
                .filter(|kw| lower.contains(&kw.to_lowercase()))
                .count();
            if hits > 0 {
                let confidence = (0.5 + 0.5 * hits as f64 / rule.keywords.len() as f64).min(1.0);
                return (rule.label.clone(), confidence);
            }
        }
        ("other".to_string(), 0.25)
    }
}

impl Default for StrategyTaxonomy {
    fn default() -> StrategyTaxonomy {
        let rule = |label: &str, keywords: &[&str]| TaxonomyRule {
            label: label.into(),
            keywords: keywords.iter().map(|k| k.to_string()).collect(),
        };
        StrategyTaxonomy::new(vec![
            rule(
                "conversion/appointment",
                &[
                    "test drive",
                    "test-drive",
                    "reserve",
                    "appointment",
                    "book",
                    "what day works",
                    "visit the store",
                ],
            ),
            rule(
                "greeting",
                &["welcome", "hello everyone", "hi everyone", "thanks for joining"],
            ),
            rule(
                "requirement_mining",
                &[
                    "what are you looking for",
                    "your budget",
                    "how do you plan",
                    "what matters most",
                    "daily use",
                ],
            ),
            rule(
                "product_presentation",
                &["equipped with", "comes with", "offers", "feature", "spec"],
            ),
            rule(
                "objection_handling",
                &["understand your concern", "no pressure", "don't worry", "compare"],
            ),
            rule("other", &[]),
        ])
        .expect("default taxonomy is valid")
    }
}

/// Labels one response. With no gateway the offline keyword rules decide; with
/// a gateway the prompt is constrained to the taxonomy, out-of-taxonomy
/// outputs get one retry, and persistent failures degrade to `other`.
pub fn tag_strategy(
    response: &ResponseSignal,
    span: &str,
    taxonomy: &StrategyTaxonomy,
    gateway: Option<&Gateway>,
) -> StrategyTag {
    let Some(gw) = gateway else {
        let (label, confidence) = taxonomy.classify(&response.text);
        return StrategyTag {
            label,
            confidence,
            span: span.to_string(),
        };
    };

    let request = GenerationRequest::new("strategy", PurposeTag::Strategy)
        .var("response", response.text.clone())
        .var("taxonomy", taxonomy.labels().join("; "));
    for attempt in 0..2 {
        let mut req = request.clone();
        req.decoding.seed = attempt;
        match gw.generate(&req) {
            Ok(output) => {
                let label = output.trim();
                if taxonomy.contains(label) {
                    return StrategyTag {
                        label: label.to_string(),
                        confidence: 0.8,
                        span: span.to_string(),
                    };
                }
                log::warn!("strategy output `{label}` not in taxonomy (attempt {attempt})");
            }
            Err(e) => {
                log::warn!("strategy tagging failed: {e}");
                return StrategyTag {
                    label: "other".into(),
                    confidence: 0.0,
                    span: span.to_string(),
                };
            }
        }
    }
    StrategyTag {
        label: "other".into(),
        confidence: 0.0,
        span: span.to_string(),
    }
}
