//! Pre-annotated sentences (POS tags and dependency parses) in the JSONL
//! interchange format produced by the external annotation step:
//!
//! ```json
//! {"tokens":[{"text":"Duke","lemma":"Duke","pos":"PROPN","tag":"NNP","dep":"nsubj","head":2}, ...]}
//! ```
//!
//! Heads are 0-based token indices within the sentence; the root token
//! points at itself.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub lemma: String,
    /// Coarse universal POS (`NOUN`, `AUX`, ...).
    pub pos: String,
    /// Fine-grained Penn tag (`NNS`, `JJR`, ...).
    pub tag: String,
    pub dep: String,
    pub head: usize,
}

impl Token {
    pub fn lower(&self) -> String {
        self.text.to_lowercase()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub tokens: Vec<Token>,
}

impl AnnotatedSentence {
    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::Annotation("sentence has no tokens".into()));
        }
        let n = self.tokens.len();
        if let Some((i, t)) = self.tokens.iter().enumerate().find(|(_, t)| t.head >= n) {
            return Err(Error::Annotation(format!(
                "token {i} (`{}`) has head {} outside 0..{n}",
                t.text, t.head
            )));
        }
        let roots = self.tokens.iter().filter(|t| t.dep.eq_ignore_ascii_case("root")).count();
        if roots != 1 {
            return Err(Error::Annotation(format!(
                "expected exactly one root in `{}`, found {roots}",
                self.text()
            )));
        }
        Ok(())
    }

    pub fn text(&self) -> String {
        detokenize(self.tokens.iter().map(|t| t.text.as_str()))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }
}

pub fn read_annotated<R: std::io::BufRead>(reader: R, source_name: &str) -> Result<Vec<AnnotatedSentence>> {
    let sentences: Vec<AnnotatedSentence> = jsonl::read_jsonl(reader, source_name)?;
    for (i, s) in sentences.iter().enumerate() {
        s.validate()
            .map_err(|e| Error::parse(source_name, i + 1, format!("record {}: {e}", i + 1)))?;
    }
    Ok(sentences)
}

pub fn load_annotated(path: impl AsRef<Path>) -> Result<Vec<AnnotatedSentence>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_annotated(std::io::BufReader::new(file), &path.display().to_string())
}

const NO_SPACE_BEFORE: &[&str] = &[
    ".", ",", "!", "?", ";", ":", "%", ")", "]", "}", "'s", "'S", "n't", "N'T", "'re", "'ve", "'m", "'ll", "'d", "'",
    "''",
];
const NO_SPACE_AFTER: &[&str] = &["(", "[", "{", "$", "``"];

/// Joins tokens into surface text, attaching punctuation and clitics.
pub fn detokenize<'a>(tokens: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    let mut glue_next = true;
    for tok in tokens {
        if !glue_next && !NO_SPACE_BEFORE.contains(&tok) {
            out.push(' ');
        }
        out.push_str(tok);
        glue_next = NO_SPACE_AFTER.contains(&tok);
    }
    out
}

pub fn is_terminal_punct(text: &str) -> bool {
    matches!(text, "." | "!" | "?")
}

/// Matches the capitalization of `template`'s first letter onto `word`.
pub(crate) fn match_case(template: &str, word: &str) -> String {
    let upper = template.chars().next().is_some_and(char::is_uppercase);
    if upper {
        capitalize(word)
    } else {
        word.to_owned()
    }
}

pub(crate) fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
