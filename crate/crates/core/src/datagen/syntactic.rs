//! Rule-based rewrites of annotated corpus sentences for the comparative,
//! opposite, plural and verb-conjugation categories.
//!
//! Each generator emits at most one pair per sentence (the first match) and
//! logs the reason for every skipped sentence at debug level.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use crate::annotation::{detokenize, is_terminal_punct, match_case, AnnotatedSentence, Token};
use crate::error::{Error, Result};

use super::{category, dedup_sentence_pairs, SentencePair};

pub type WordMap = HashMap<String, String>;

/// Reads `word TAB form` rows into a lowercase-keyed map.
pub fn read_word_map<R: BufRead>(reader: R, source_name: &str) -> Result<WordMap> {
    let mut out = WordMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(source_name, idx + 1, e.to_string()))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(source_name, idx + 1, "expected `word<TAB>form`"))?;
        out.insert(k.trim().to_lowercase(), v.trim().to_owned());
    }
    Ok(out)
}

pub fn load_word_map(path: impl AsRef<Path>) -> Result<WordMap> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_word_map(std::io::BufReader::new(file), &path.display().to_string())
}

/// Word maps consulted by the syntactic generators.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    /// comparative → base (`longer` → `long`)
    pub base_forms: WordMap,
    /// adjective → opposite
    pub antonyms: WordMap,
    /// plural noun → singular
    pub singular_forms: WordMap,
    /// base verb → third-person singular present
    pub inflections: WordMap,
}

fn finish(category: &str, pairs: Vec<SentencePair>) -> Vec<SentencePair> {
    dedup_sentence_pairs(pairs)
        .into_iter()
        .enumerate()
        .map(|(i, mut p)| {
            p.id = format!("{category}:{i}");
            p
        })
        .collect()
}

fn pair(category: &str, s_a: String, s_b: String, slots: (String, String), labels: (&str, &str)) -> Option<SentencePair> {
    let p = SentencePair {
        id: String::new(),
        category: category.to_owned(),
        s_a,
        s_b,
        slot_a: slots.0,
        slot_b: slots.1,
        label_a: labels.0.to_owned(),
        label_b: labels.1.to_owned(),
    };
    match p.check() {
        Ok(()) => Some(p),
        Err(e) => {
            log::debug!("skipping {category} rewrite: {e}");
            None
        }
    }
}

/// Lemma fallback: only useful when the annotator actually changed the form.
fn lemma_form(map: &WordMap, tok: &Token) -> Option<String> {
    if let Some(v) = map.get(&tok.lower()) {
        return Some(v.clone());
    }
    let lemma = tok.lemma.to_lowercase();
    (!lemma.is_empty() && lemma != tok.lower()).then_some(lemma)
}

/// `X was longer than Y.` → (`X was long.`, original).
pub fn gen_comparative(corpus: &[AnnotatedSentence], base_forms: &WordMap) -> Vec<SentencePair> {
    let mut out = Vec::new();
    for s in corpus {
        let toks = &s.tokens;
        let Some(i) = (0..toks.len().saturating_sub(1)).find(|&i| toks[i].tag == "JJR" && toks[i + 1].lower() == "than")
        else {
            continue;
        };
        let Some(base) = lemma_form(base_forms, &toks[i]) else {
            log::debug!("no base form for `{}` in `{}`", toks[i].text, s.text());
            continue;
        };
        let base = match_case(&toks[i].text, &base);
        let mut words: Vec<&str> = toks[..i].iter().map(|t| t.text.as_str()).collect();
        words.push(&base);
        if let Some(last) = toks.last().filter(|t| is_terminal_punct(&t.text)) {
            words.push(&last.text);
        }
        out.extend(pair(
            category::COMPARATIVE,
            detokenize(words),
            s.text(),
            (base.clone(), toks[i].text.clone()),
            ("base", "comparative"),
        ));
    }
    finish(category::COMPARATIVE, out)
}

/// Swaps the first mapped adjective for its opposite.
pub fn gen_opposite(corpus: &[AnnotatedSentence], antonyms: &WordMap) -> Vec<SentencePair> {
    let mut out = Vec::new();
    for s in corpus {
        let found = s
            .tokens
            .iter()
            .enumerate()
            .find_map(|(i, t)| (t.pos == "ADJ").then(|| antonyms.get(&t.lower()).map(|a| (i, a))).flatten());
        let Some((i, antonym)) = found else {
            continue;
        };
        let orig = &s.tokens[i].text;
        let swapped = match_case(orig, antonym);
        let words = s.tokens.iter().enumerate().map(|(j, t)| if j == i { swapped.as_str() } else { t.text.as_str() });
        out.extend(pair(
            category::OPPOSITE,
            s.text(),
            detokenize(words),
            (orig.clone(), swapped.clone()),
            ("adjective", "opposite"),
        ));
    }
    finish(category::OPPOSITE, out)
}

const NUMBER_WORDS: &[&str] = &[
    "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve", "thirteen", "fourteen",
    "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty", "thirty", "forty", "fifty", "sixty",
    "seventy", "eighty", "ninety", "hundred", "thousand", "million", "billion",
];

fn is_number_word(w: &str) -> bool {
    w.split('-').all(|p| NUMBER_WORDS.contains(&p))
}

fn is_digit_numeral(w: &str) -> bool {
    w.chars().any(|c| c.is_ascii_digit()) && w.chars().all(|c| c.is_ascii_digit() || c == ',' || c == '.')
}

fn is_one(w: &str) -> bool {
    matches!(w, "one" | "1" | "a" | "an" | "single")
}

fn indefinite_for(next: &str) -> &'static str {
    match next.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// `examined 6 cities` → `examined one city`.
pub fn gen_plural(corpus: &[AnnotatedSentence], singular_forms: &WordMap) -> Vec<SentencePair> {
    let mut out = Vec::new();
    'sent: for s in corpus {
        let toks = &s.tokens;
        for (j, noun) in toks.iter().enumerate() {
            if noun.tag != "NNS" {
                continue;
            }
            let numeral = toks.iter().enumerate().position(|(n, t)| {
                t.pos == "NUM" && n < j && (t.head == j || n + 1 == j)
            });
            let Some(n) = numeral else { continue };
            // Compound numerals (`6 million`) are left alone.
            if (n > 0 && toks[n - 1].pos == "NUM") || toks[n + 1].pos == "NUM" && n + 1 != j {
                continue;
            }
            let num = toks[n].lower();
            if is_one(&num) {
                continue;
            }
            let Some(singular) = lemma_form(singular_forms, noun) else {
                log::debug!("no singular form for `{}` in `{}`", noun.text, s.text());
                continue;
            };
            let singular = match_case(&noun.text, &singular);
            let replacement = if is_digit_numeral(&num) || is_number_word(&num) {
                "one".to_owned()
            } else {
                let next = if n + 1 == j { singular.as_str() } else { toks[n + 1].text.as_str() };
                indefinite_for(next).to_owned()
            };
            let replacement = match_case(&toks[n].text, &replacement);
            let words = toks.iter().enumerate().map(|(k, t)| match k {
                k if k == n => replacement.as_str(),
                k if k == j => singular.as_str(),
                _ => t.text.as_str(),
            });
            out.extend(pair(
                category::PLURAL,
                detokenize(words),
                s.text(),
                (singular.clone(), noun.text.clone()),
                ("singular", "plural"),
            ));
            continue 'sent;
        }
    }
    finish(category::PLURAL, out)
}

/// Third-person singular present by lexicon, then by spelling rules.
pub fn inflect_3sg(verb: &str, inflections: &WordMap) -> String {
    let lower = verb.to_lowercase();
    if let Some(v) = inflections.get(&lower) {
        return v.clone();
    }
    match lower.as_str() {
        "be" => return "is".into(),
        "have" => return "has".into(),
        "do" => return "does".into(),
        "go" => return "goes".into(),
        _ => {}
    }
    let ends = |s: &str| lower.ends_with(s);
    if ends("s") || ends("sh") || ends("ch") || ends("x") || ends("z") || ends("o") {
        return format!("{lower}es");
    }
    let mut rev = lower.chars().rev();
    if let (Some('y'), Some(prev)) = (rev.next(), rev.next()) {
        if !"aeiou".contains(prev) {
            return format!("{}ies", &lower[..lower.len() - 1]);
        }
    }
    format!("{lower}s")
}

const NON_3SG_PRONOUNS: &[&str] = &["i", "you", "we", "they"];

/// `Duke will play` → (`Duke will play`, `Duke plays`).
pub fn gen_verb_conjugation(corpus: &[AnnotatedSentence], inflections: &WordMap) -> Vec<SentencePair> {
    let mut out = Vec::new();
    for s in corpus {
        let toks = &s.tokens;
        let Some(i) = (1..toks.len().saturating_sub(1)).find(|&i| toks[i].pos == "AUX" && toks[i + 1].tag == "VB")
        else {
            continue;
        };
        let verb = i + 1;
        let subject = toks
            .iter()
            .find(|t| t.head == verb && (t.dep == "nsubj" || t.dep == "nsubjpass"));
        let Some(subject) = subject else {
            log::debug!("no subject for `{}` in `{}`", toks[verb].text, s.text());
            continue;
        };
        if matches!(subject.tag.as_str(), "NNS" | "NNPS") || NON_3SG_PRONOUNS.contains(&subject.lower().as_str()) {
            continue;
        }
        let inflected = inflect_3sg(&toks[verb].text, inflections);
        let words = toks
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .map(|(k, t)| if k == verb { inflected.as_str() } else { t.text.as_str() });
        out.extend(pair(
            category::VERB_CONJUGATION,
            s.text(),
            detokenize(words),
            (format!("{} {}", toks[i].text, toks[verb].text), inflected.clone()),
            ("auxiliary", "inflected"),
        ));
    }
    finish(category::VERB_CONJUGATION, out)
}
