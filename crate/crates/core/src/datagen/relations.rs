//! Entailment and negation pairs extracted from NLI-style rows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotation::AnnotatedSentence;
use crate::error::{Error, Result};
use crate::jsonl;

use super::{category, SentencePair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Entailment,
    Negation,
}

impl Relation {
    pub fn category(self) -> &'static str {
        match self {
            Relation::Entailment => category::ENTAILMENT,
            Relation::Negation => category::NEGATION,
        }
    }
}

/// One input row. Annotations are optional here; distractor generation
/// needs the hypothesis annotation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationRow {
    pub premise: String,
    pub hypothesis: String,
    pub relation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premise_annotation: Option<AnnotatedSentence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis_annotation: Option<AnnotatedSentence>,
}

impl RelationRow {
    pub fn parse_relation(&self) -> Result<Relation> {
        match self.relation.trim().to_lowercase().as_str() {
            "entailment" => Ok(Relation::Entailment),
            "negation" => Ok(Relation::Negation),
            other => Err(Error::Config(format!("unknown relation `{other}`"))),
        }
    }
}

pub fn read_relation_rows<R: std::io::BufRead>(reader: R, source_name: &str) -> Result<Vec<RelationRow>> {
    jsonl::read_jsonl(reader, source_name)
}

/// Converts rows to sentence pairs, one per row and in row order within
/// each relation. The whole sentence is the slot.
pub fn relation_pairs(rows: &[RelationRow], source_name: &str) -> Result<Vec<SentencePair>> {
    let mut counters = [0usize; 2];
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let relation = row
            .parse_relation()
            .map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
        let n = &mut counters[relation as usize];
        let pair = SentencePair {
            id: format!("{}:{}", relation.category(), n),
            category: relation.category().to_owned(),
            s_a: row.premise.clone(),
            s_b: row.hypothesis.clone(),
            slot_a: row.premise.clone(),
            slot_b: row.hypothesis.clone(),
            label_a: "premise".into(),
            label_b: "hypothesis".into(),
        };
        pair.check().map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
        *n += 1;
        out.push(pair);
    }
    Ok(out)
}

pub fn ingest_relation_pairs(path: impl AsRef<Path>) -> Result<Vec<SentencePair>> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let rows = jsonl::read_jsonl_file(path)?;
    relation_pairs(&rows, &name)
}
