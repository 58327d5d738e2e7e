//! Deterministic mock synthesizer. Produces purpose-appropriate, parseable
//! outputs from the request variables plus the request fingerprint, so a
//! full pipeline run works offline and is bit-reproducible.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::{PreparedRequest, PurposeTag};

pub struct MockBackend;

impl MockBackend {
    pub fn new() -> MockBackend {
        MockBackend
    }

    pub fn complete(&self, req: &PreparedRequest<'_>) -> std::result::Result<String, String> {
        let text = match req.purpose {
            PurposeTag::Persona => {
                if req.template_id.contains("agent") {
                    agent_persona(req)
                } else {
                    user_persona(req)
                }
            }
            PurposeTag::Blueprint => blueprint(req),
            PurposeTag::Opening => opening(req),
            PurposeTag::UserTurn => user_turn(req),
            PurposeTag::AgentTurn => agent_turn(req),
            PurposeTag::Judge => judge(req),
            PurposeTag::Strategy => strategy(req),
        };
        Ok(text)
    }
}

impl Default for MockBackend {
    fn default() -> MockBackend {
        MockBackend::new()
    }
}

fn var<'a>(req: &'a PreparedRequest<'_>, key: &str) -> &'a str {
    req.variables.get(key).map(String::as_str).unwrap_or("")
}

fn lines(text: &str) -> Vec<&str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

fn semi_list(text: &str) -> Vec<&str> {
    text.split(';').map(str::trim).filter(|s| !s.is_empty()).collect()
}

/// Parses "key=value; key=value" payloads.
fn kv_map(text: &str) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for part in semi_list(text) {
        if let Some((key, value)) = part.split_once('=') {
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
    }
    map
}

/// Lowercased alphanumeric runs; non-ASCII characters become one-char tokens,
/// which keeps CJK text usable without a segmenter.
fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            if !ch.is_ascii() {
                out.push(ch.to_string());
            }
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

const STOPWORDS: &[&str] = &[
    "the", "a", "an", "is", "are", "was", "were", "do", "does", "did", "can", "could", "will",
    "would", "should", "what", "which", "who", "when", "where", "how", "much", "many", "of",
    "for", "to", "in", "on", "at", "and", "or", "it", "its", "this", "that", "these", "with",
    "about", "you", "your", "i", "my", "me", "we", "us", "there", "be", "has", "have", "had",
    "any", "more", "than", "if", "per",
];

/// Most frequent non-stopword token across the supplied lines; ties break
/// toward the lexicographically smaller token.
fn dominant_topic(lines: &[&str]) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for line in lines {
        for token in tokens(line) {
            if token.chars().count() < 2 || STOPWORDS.contains(&token.as_str()) {
                continue;
            }
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
        .map(|(token, _)| token)
        .unwrap_or_else(|| "general information".to_string())
}

/// First byte of the hex fingerprint, for small deterministic variations.
fn fp_byte(req: &PreparedRequest<'_>, index: usize) -> u8 {
    let hex = req.fingerprint.as_bytes();
    let i = (index * 2) % hex.len().max(1);
    let pair = std::str::from_utf8(&hex[i..i + 2]).unwrap_or("00");
    u8::from_str_radix(pair, 16).unwrap_or(0)
}

fn user_persona(req: &PreparedRequest<'_>) -> String {
    let question_lines = lines(var(req, "questions"));
    let topic = dominant_topic(&question_lines);
    let tiers = ["entry-level", "mid-range", "premium"];
    let tier = tiers[fp_byte(req, 0) as usize % tiers.len()];
    let mut inquiries: Vec<&str> = Vec::new();
    for q in &question_lines {
        if !inquiries.contains(q) {
            inquiries.push(q);
        }
        if inquiries.len() == 3 {
            break;
        }
    }
    let fallback = format!("What do you recommend regarding {topic}?");
    if inquiries.is_empty() {
        inquiries.push(&fallback);
    }
    let first = inquiries[0].to_string();
    let persona = json!({
        "mindset": format!("pragmatic and detail-oriented, weighing {topic} before committing"),
        "basic_information": {
            "budget": tier,
            "focus": topic,
        },
        "core_requirements": [format!("a clear answer on {topic}")],
        "primary_inquiries": inquiries,
        "potential_utterances": [
            first,
            format!("Could you walk me through {topic}?"),
            format!("What should I know about {topic} before deciding?"),
        ],
    });
    persona.to_string()
}

fn agent_persona(req: &PreparedRequest<'_>) -> String {
    let domain = var(req, "domain");
    let profile = var(req, "profile_summary");
    let certifications = semi_list(var(req, "certifications"));
    let scope_hints = semi_list(var(req, "scope_hints"));
    let top_tag = semi_list(var(req, "tag_summary"))
        .first()
        .map(|t| t.split(':').next().unwrap_or(t).trim().to_string())
        .unwrap_or_else(|| "consultative".to_string());
    let identity = if let Some(cert) = certifications.first() {
        format!("{cert} serving the {domain} domain: {profile}")
    } else {
        format!("experienced {domain} consultant: {profile}")
    };
    let boundaries: Vec<String> = if scope_hints.is_empty() {
        vec!["general consultation".to_string()]
    } else {
        scope_hints.iter().map(|s| s.to_string()).collect()
    };
    json!({
        "identity_positioning": identity.trim().trim_end_matches(':').trim(),
        "linguistic_style": format!("warm and concise, leaning on {top_tag} moves"),
        "service_boundaries": boundaries,
    })
    .to_string()
}

fn blueprint(req: &PreparedRequest<'_>) -> String {
    let mut labels: Vec<String> = Vec::new();
    for entry in semi_list(var(req, "tag_summary")) {
        let label = entry.split(':').next().unwrap_or(entry).trim().to_string();
        if !label.is_empty() && !labels.contains(&label) {
            labels.push(label);
        }
    }
    let slots: Vec<&str> = semi_list(var(req, "ontology"));
    if labels.is_empty() || slots.is_empty() {
        // Parseable but invalid; the caller's validation rejects it.
        return json!({
            "stages": [], "key_nodes": [], "scenarios": [], "edges": [], "outcomes": []
        })
        .to_string();
    }
    // One slot gates each transition, so stage count is capped by the ontology.
    labels.truncate(slots.len());
    let n = labels.len();

    let stages: Vec<Value> = labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            json!({
                "name": label,
                "goal": format!("advance the conversation through {label}"),
                "requires": slots[..i].to_vec(),
            })
        })
        .collect();

    let mut edges: Vec<Value> = Vec::new();
    for i in 0..n - 1 {
        edges.push(json!({
            "from": labels[i],
            "to": labels[i + 1],
            "label": slots[i],
        }));
    }
    edges.push(json!({
        "from": labels[n - 1],
        "to": "resolution",
        "label": slots[n - 1],
    }));

    let key_nodes: Vec<Value> = slots[..n]
        .iter()
        .map(|slot| {
            json!({
                "signal_name": slot,
                "business_meaning": format!("user has stated {slot}"),
                "trigger_value": "present",
            })
        })
        .collect();

    let scenarios: Vec<Value> = labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            json!({
                "situation": format!("user hesitates during {label}"),
                "coping_strategy": "acknowledge the concern and offer one concrete next step",
                "example_phrasing": format!(
                    "Happy to go at your pace; shall we settle {} first?",
                    slots[i.min(n - 1)]
                ),
            })
        })
        .collect();

    json!({
        "stages": stages,
        "key_nodes": key_nodes,
        "scenarios": scenarios,
        "edges": edges,
        "outcomes": ["resolution"],
    })
    .to_string()
}

fn opening(req: &PreparedRequest<'_>) -> String {
    let inquiry = var(req, "primary_inquiry");
    let info = kv_map(var(req, "basic_information"));
    let mut inform = Map::new();
    if let Some(budget) = info.get("budget") {
        inform.insert("budget".to_string(), Value::String(budget.clone()));
    }
    json!({
        "text": format!("Hi! {inquiry}"),
        "inform": Value::Object(inform),
    })
    .to_string()
}

fn user_turn(req: &PreparedRequest<'_>) -> String {
    let requested = semi_list(var(req, "requested"));
    let remaining = semi_list(var(req, "remaining_requirements"));
    let info = kv_map(var(req, "basic_information"));

    let mut inform = Map::new();
    let mut sentences: Vec<String> = Vec::new();
    for slot in &requested {
        let value = info
            .get(*slot)
            .cloned()
            .unwrap_or_else(|| "no strong preference".to_string());
        sentences.push(format!("On {slot}: {value}."));
        inform.insert(slot.to_string(), Value::String(value));
    }

    let mut raised: Vec<String> = Vec::new();
    if let Some(req_text) = remaining.first() {
        sentences.push(format!("Also, I still need {req_text}."));
        raised.push(req_text.to_string());
    }

    let satisfied = requested.is_empty() && remaining.is_empty();
    if satisfied {
        sentences.push("That covers everything I needed, thank you!".to_string());
    } else if sentences.is_empty() {
        sentences.push("Understood, please go on.".to_string());
    }

    json!({
        "text": sentences.join(" "),
        "inform": Value::Object(inform),
        "raised": raised,
        "satisfied": satisfied,
    })
    .to_string()
}

fn agent_turn(req: &PreparedRequest<'_>) -> String {
    if var(req, "closing") == "true" {
        return json!({
            "text": "My pleasure! I will get everything arranged on our side; reach out any time.",
            "request": [],
        })
        .to_string();
    }
    let kb_facts = lines(var(req, "kb_facts"));
    let request_slots: Vec<&str> = semi_list(var(req, "request_slots"));

    let mut sentences: Vec<String> = Vec::new();
    if let Some(fact) = kb_facts.first() {
        let parts: Vec<&str> = fact.split('|').map(str::trim).collect();
        if parts.len() == 3 {
            sentences.push(format!(
                "For {}, the {} comes to {}.",
                parts[0], parts[1], parts[2]
            ));
        } else {
            sentences.push(format!("Here is what I can confirm: {fact}."));
        }
    } else {
        sentences.push("Happy to help with that.".to_string());
    }
    for slot in &request_slots {
        sentences.push(format!("Could you share your {slot}?"));
    }

    json!({
        "text": sentences.join(" "),
        "request": request_slots,
    })
    .to_string()
}

fn judge(req: &PreparedRequest<'_>) -> String {
    let dims = semi_list(var(req, "dimensions"));
    let mut scores = Map::new();
    for (i, dim) in dims.iter().enumerate() {
        let score = 6 + (fp_byte(req, i) % 4) as i64;
        scores.insert(dim.to_string(), Value::Number(score.into()));
    }
    Value::Object(scores).to_string()
}

fn strategy(req: &PreparedRequest<'_>) -> String {
    let response_tokens = tokens(var(req, "response"));
    let taxonomy = semi_list(var(req, "taxonomy"));
    for label in &taxonomy {
        let label_tokens = tokens(label);
        if label_tokens
            .iter()
            .any(|lt| lt.chars().count() >= 3 && response_tokens.contains(lt))
        {
            return label.to_string();
        }
    }
    taxonomy.first().unwrap_or(&"other").to_string()
}
