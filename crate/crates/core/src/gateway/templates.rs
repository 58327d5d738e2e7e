//! Prompt templates as versioned artifacts with `{{slot}}` substitution.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};

const BUILTINS: &[(&str, &str)] = &[
    ("persona_user", include_str!("../../templates/persona_user.txt")),
    ("persona_agent", include_str!("../../templates/persona_agent.txt")),
    ("blueprint", include_str!("../../templates/blueprint.txt")),
    ("opening", include_str!("../../templates/opening.txt")),
    ("user_turn", include_str!("../../templates/user_turn.txt")),
    ("agent_turn", include_str!("../../templates/agent_turn.txt")),
    ("judge", include_str!("../../templates/judge.txt")),
    ("strategy", include_str!("../../templates/strategy.txt")),
];

/// One template: its body plus the slot names it requires.
#[derive(Debug, Clone)]
pub struct Template {
    id: String,
    body: String,
    slots: BTreeSet<String>,
}

impl Template {
    fn parse(id: &str, body: &str) -> Template {
        let mut slots = BTreeSet::new();
        let mut rest = body;
        while let Some(open) = rest.find("{{") {
            rest = &rest[open + 2..];
            if let Some(close) = rest.find("}}") {
                slots.insert(rest[..close].trim().to_string());
                rest = &rest[close + 2..];
            } else {
                break;
            }
        }
        Template {
            id: id.to_string(),
            body: body.to_string(),
            slots,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn slots(&self) -> &BTreeSet<String> {
        &self.slots
    }

    /// Fills every slot from `vars`. Extra variables are allowed; a missing
    /// one is an error naming the first uncovered slot.
    pub fn resolve(&self, vars: &BTreeMap<String, String>) -> Result<String> {
        for slot in &self.slots {
            if !vars.contains_key(slot) {
                return Err(Error::TemplateSlot {
                    template: self.id.clone(),
                    slot: slot.clone(),
                });
            }
        }
        let mut text = self.body.clone();
        for slot in &self.slots {
            let needle = format!("{{{{{slot}}}}}");
            text = text.replace(&needle, &vars[slot]);
        }
        Ok(text)
    }
}

/// Registry of templates: the compiled-in set, optionally overridden from a
/// directory of `*.txt` files (file stem = template id).
#[derive(Debug, Clone)]
pub struct TemplateStore {
    templates: BTreeMap<String, Template>,
}

impl TemplateStore {
    pub fn builtin() -> TemplateStore {
        let templates = BUILTINS
            .iter()
            .map(|(id, body)| (id.to_string(), Template::parse(id, body)))
            .collect();
        TemplateStore { templates }
    }

    /// Loads `*.txt` files from `dir` on top of the builtins.
    pub fn with_dir(dir: impl AsRef<Path>) -> Result<TemplateStore> {
        let mut store = TemplateStore::builtin();
        let dir = dir.as_ref();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::Config(format!("bad template file name {path:?}")))?
                .to_string();
            let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            store.templates.insert(id.clone(), Template::parse(&id, &body));
        }
        Ok(store)
    }

    pub fn get(&self, id: &str) -> Result<&Template> {
        self.templates
            .get(id)
            .ok_or_else(|| Error::TemplateMissing(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.templates.contains_key(id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.templates.keys().map(String::as_str).collect()
    }
}
