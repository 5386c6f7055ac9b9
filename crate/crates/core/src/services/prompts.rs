//! Templated prompt library.
//!
//! A template is plain text with `{slot}` placeholders, where a slot name is
//! `[A-Za-z_][A-Za-z0-9_]*`. Braces that do not form a placeholder are copied
//! verbatim. Substitution is single pass: bound values are never re-scanned.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ServiceError;

pub const INTENT_RECOGNITION: &str = "intent_recognition";
pub const CONTEXT_QUESTIONS: &str = "context_questions";
pub const RECIPE_GENERATION: &str = "recipe_generation";
pub const QUESTION_DETECTION: &str = "question_detection";
pub const QUESTION_ANSWER: &str = "question_answer";

const BUILTIN: &str = include_str!("../../assets/prompts.json");

pub type Bindings = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub template: String,
    pub required_slots: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn pieces(template: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let bytes = template.as_bytes();
    let mut text_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let name_start = i + 1;
            let mut j = name_start;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            let valid = j > name_start && j < bytes.len() && bytes[j] == b'}' && !bytes[name_start].is_ascii_digit();
            if valid {
                if text_start < i {
                    out.push(Piece::Text(&template[text_start..i]));
                }
                out.push(Piece::Slot(&template[name_start..j]));
                i = j + 1;
                text_start = i;
                continue;
            }
        }
        i += 1;
    }
    if text_start < template.len() {
        out.push(Piece::Text(&template[text_start..]));
    }
    out
}

/// Placeholder names appearing in `text`.
pub fn placeholders(text: &str) -> BTreeSet<String> {
    pieces(text)
        .into_iter()
        .filter_map(|p| match p {
            Piece::Slot(s) => Some(s.to_string()),
            Piece::Text(_) => None,
        })
        .collect()
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<(), ServiceError> {
        let found = placeholders(&self.template);
        if let Some(extra) = found.difference(&self.required_slots).next() {
            return Err(ServiceError::BadTemplate(format!("{}: placeholder {{{extra}}} is not declared", self.id)));
        }
        if let Some(unused) = self.required_slots.difference(&found).next() {
            return Err(ServiceError::BadTemplate(format!("{}: declared slot {unused} never appears", self.id)));
        }
        Ok(())
    }
}

/// Substitutes every placeholder of `template` from `bindings`.
pub fn render_prompt(template: &PromptTemplate, bindings: &Bindings) -> Result<String, ServiceError> {
    if let Some(missing) = template.required_slots.iter().find(|s| !bindings.contains_key(*s)) {
        return Err(ServiceError::MissingSlot(missing.clone()));
    }
    if let Some(unknown) = bindings.keys().find(|k| !template.required_slots.contains(*k)) {
        return Err(ServiceError::UnknownSlot(unknown.clone()));
    }
    let mut out = String::with_capacity(template.template.len());
    for piece in pieces(&template.template) {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot(s) => out.push_str(&bindings[s]),
        }
    }
    Ok(out)
}

/// Stable key for a binding set: the first 16 hex digits of SHA-256 over the
/// compact JSON object with sorted keys.
pub fn bindings_hash(bindings: &Bindings) -> String {
    let json = serde_json::to_string(bindings).expect("string map serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptLibrary {
    templates: BTreeMap<String, PromptTemplate>,
}

impl PromptLibrary {
    /// The five templates shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN).expect("bundled prompt library is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ServiceError> {
        let list: Vec<PromptTemplate> =
            serde_json::from_str(text).map_err(|e| ServiceError::BadTemplate(format!("prompt library: {e}")))?;
        let mut templates = BTreeMap::new();
        for t in list {
            t.validate()?;
            if templates.insert(t.id.clone(), t).is_some() {
                return Err(ServiceError::BadTemplate("duplicate template id".into()));
            }
        }
        Ok(Self { templates })
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::BadTemplate(e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn get(&self, id: &str) -> Option<&PromptTemplate> {
        self.templates.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn render(&self, id: &str, bindings: &Bindings) -> Result<String, ServiceError> {
        let t = self.get(id).ok_or_else(|| ServiceError::UnknownTemplate(id.to_string()))?;
        render_prompt(t, bindings)
    }
}
