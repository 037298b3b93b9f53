//! Sentence-pair and analogy-question generation.
//!
//! Lexical categories come from two sources: sentence templates filled with
//! word-analogy pairs ([`semantic`]), and rule-based rewrites of annotated
//! corpus sentences ([`syntactic`]). Relation categories (entailment,
//! negation) are ingested from NLI-style rows ([`relations`]). Every category
//! is then expanded into analogy questions ([`questions`]).

pub mod questions;
pub mod relations;
pub mod semantic;
pub mod syntactic;

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use questions::{category_pools, expand_questions, question_count};
pub use relations::{ingest_relation_pairs, read_relation_rows, relation_pairs, Relation, RelationRow};
pub use semantic::{fill_template, gen_nationality, gen_semantic, WordClasses};
pub use syntactic::{
    gen_comparative, gen_opposite, gen_plural, gen_verb_conjugation, inflect_3sg, load_word_map, read_word_map, Lexicon,
    WordMap,
};

pub mod category {
    pub const COMMON_CAPITAL: &str = "common_capital";
    pub const ALL_CAPITAL: &str = "all_capital";
    pub const CITY_IN_STATE: &str = "city_in_state";
    pub const CURRENCY: &str = "currency";
    pub const FAMILY: &str = "family";
    pub const COMPARATIVE: &str = "comparative";
    pub const OPPOSITE: &str = "opposite";
    pub const NATIONALITY_ADJECTIVE: &str = "nationality_adjective";
    pub const PLURAL: &str = "plural";
    pub const VERB_CONJUGATION: &str = "verb_conjugation";
    pub const ENTAILMENT: &str = "entailment";
    pub const NEGATION: &str = "negation";

    pub const SEMANTIC: [&str; 5] = [COMMON_CAPITAL, ALL_CAPITAL, CITY_IN_STATE, CURRENCY, FAMILY];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
    #[serde(rename = "both")]
    Both,
}

/// Class of the word substituted into a template slot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotClass {
    Occupation,
    Pronoun,
    #[default]
    Default,
}

impl std::str::FromStr for SlotClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "occupation" => Ok(SlotClass::Occupation),
            "pronoun" => Ok(SlotClass::Pronoun),
            "default" => Ok(SlotClass::Default),
            other => Err(Error::Config(format!("unknown slot class `{other}`"))),
        }
    }
}

/// Edit applied to the word directly before the `{W}` placeholder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Adaptation {
    ReplacePrefix { old: String, new: String },
    DropPrefix { word: String },
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptationRule {
    pub when: SlotClass,
    pub action: Adaptation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub category: String,
    pub text: String,
    pub side: Side,
    #[serde(default)]
    pub adaptation_rules: Vec<AdaptationRule>,
}

pub const PLACEHOLDER: &str = "{W}";

impl Template {
    pub fn validate(&self) -> Result<()> {
        let count = self.text.matches(PLACEHOLDER).count();
        if count != 1 {
            return Err(Error::Template(format!(
                "`{}` must contain exactly one {PLACEHOLDER}, found {count}",
                self.text
            )));
        }
        if !self.adaptation_rules.is_empty() && !self.adaptation_rules.iter().any(|r| r.when == SlotClass::Default) {
            return Err(Error::Template(format!("`{}` has adaptation rules but none for `default`", self.text)));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TemplateFile {
    Bare(Vec<Template>),
    Versioned {
        #[allow(dead_code)]
        #[serde(default)]
        version: Option<String>,
        #[allow(dead_code)]
        #[serde(default)]
        canonical: Option<bool>,
        templates: Vec<Template>,
    },
}

/// Parses a template file: either a JSON array of templates or an object
/// with a `templates` array plus version metadata.
pub fn parse_templates(json: &str) -> Result<Vec<Template>> {
    let file: TemplateFile = serde_json::from_str(json).map_err(|e| Error::Template(e.to_string()))?;
    let templates = match file {
        TemplateFile::Bare(t) => t,
        TemplateFile::Versioned { templates, .. } => templates,
    };
    for t in &templates {
        t.validate()?;
    }
    Ok(templates)
}

pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<Template>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_templates(&text)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordPair {
    pub w_a: String,
    pub w_b: String,
    pub label_a: String,
    pub label_b: String,
    pub category: String,
}

/// Reads `w_a TAB w_b TAB label_a TAB label_b` rows for one category.
pub fn read_word_pairs<R: BufRead>(reader: R, category: &str, source_name: &str) -> Result<Vec<WordPair>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        out.push(WordPair {
            w_a: fields[0].to_owned(),
            w_b: fields[1].to_owned(),
            label_a: fields[2].to_owned(),
            label_b: fields[3].to_owned(),
            category: category.to_owned(),
        });
    }
    Ok(out)
}

pub fn load_word_pairs(path: impl AsRef<Path>, category: &str) -> Result<Vec<WordPair>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_word_pairs(std::io::BufReader::new(file), category, &path.display().to_string())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: String,
    pub category: String,
    pub s_a: String,
    pub s_b: String,
    pub slot_a: String,
    pub slot_b: String,
    pub label_a: String,
    pub label_b: String,
}

impl SentencePair {
    pub fn check(&self) -> Result<()> {
        if self.s_a == self.s_b {
            return Err(Error::WordPair(format!("pair `{}` has identical sentences", self.id)));
        }
        if !self.s_a.contains(&self.slot_a) || !self.s_b.contains(&self.slot_b) {
            return Err(Error::WordPair(format!("pair `{}` does not contain its slot words", self.id)));
        }
        Ok(())
    }
}

/// Which items a question's answer is searched among.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateScope {
    /// Every distinct sentence of the question's category, both sides.
    CategoryPool,
    Explicit { items: Vec<Arc<str>> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalogyQuestion {
    pub qid: String,
    pub category: Arc<str>,
    pub a: Arc<str>,
    pub b: Arc<str>,
    pub c: Arc<str>,
    pub gold_d: Arc<str>,
    pub candidate_scope: CandidateScope,
    /// Items removed from the candidates under the constrained protocol.
    pub exclusions: Vec<Arc<str>>,
}

/// Interns strings so repeated sentence texts share one allocation.
#[derive(Debug, Default)]
pub(crate) struct Interner(HashMap<String, Arc<str>>);

impl Interner {
    pub(crate) fn get(&mut self, s: &str) -> Arc<str> {
        if let Some(a) = self.0.get(s) {
            return a.clone();
        }
        let a: Arc<str> = Arc::from(s);
        self.0.insert(s.to_owned(), a.clone());
        a
    }
}

pub(crate) fn dedup_sentence_pairs(pairs: Vec<SentencePair>) -> Vec<SentencePair> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        if seen.insert((p.category.clone(), p.s_a.clone(), p.s_b.clone())) {
            out.push(p);
        } else {
            log::info!("dropping duplicate sentence pair `{}` / `{}` in {}", p.s_a, p.s_b, p.category);
        }
    }
    out
}
