//! Template-based generation for the semantic categories and nationality
//! adjectives.
//!
//! A template is either used for both words of a pair (`side: both`) or
//! belongs to one side. One-sided templates are coordinated by order: the
//! i-th `A` template of a category is combined with its i-th `B` template.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use crate::annotation::capitalize;
use crate::error::{Error, Result};

use super::{
    category, dedup_sentence_pairs, Adaptation, SentencePair, Side, SlotClass, Template, WordPair, PLACEHOLDER,
};

/// Slot-word classes; words not listed are `default`.
#[derive(Clone, Debug, Default)]
pub struct WordClasses(HashMap<String, SlotClass>);

impl WordClasses {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: &str, class: SlotClass) {
        self.0.insert(word.to_lowercase(), class);
    }

    pub fn class_of(&self, word: &str) -> SlotClass {
        self.0.get(&word.to_lowercase()).copied().unwrap_or_default()
    }

    /// Reads `word TAB class` rows.
    pub fn read<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut out = WordClasses::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::parse(source_name, idx + 1, e.to_string()))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, class) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(source_name, idx + 1, "expected `word<TAB>class`"))?;
            let class = class.parse().map_err(|e: Error| Error::parse(source_name, idx + 1, e.to_string()))?;
            out.insert(word.trim(), class);
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(file), &path.display().to_string())
    }
}

/// Substitutes `word` into the template, applying the adaptation rule for
/// its class. Returns the sentence and the slot word as it appears in it.
pub fn fill_template(template: &Template, word: &str, class: SlotClass) -> Result<(String, String)> {
    template.validate()?;
    let rule = template.adaptation_rules.iter().find(|r| r.when == class);
    let action = match (rule, class) {
        (Some(r), _) => &r.action,
        (None, SlotClass::Default) => &Adaptation::None,
        (None, other) => {
            return Err(Error::Template(format!(
                "`{}` has no adaptation rule for {other:?} word `{word}`",
                template.text
            )))
        }
    };

    let (prefix, suffix) = template.text.split_once(PLACEHOLDER).expect("validated placeholder");
    let prefix = match action {
        Adaptation::None => prefix.to_owned(),
        Adaptation::ReplacePrefix { old, new } => {
            let (head, last) = split_last_word(prefix);
            if last != old {
                return Err(Error::Template(format!(
                    "`{}`: expected `{old}` before the placeholder, found `{last}`",
                    template.text
                )));
            }
            format!("{head}{new} ")
        }
        Adaptation::DropPrefix { word: drop } => {
            let (head, last) = split_last_word(prefix);
            if last != drop {
                return Err(Error::Template(format!(
                    "`{}`: expected `{drop}` before the placeholder, found `{last}`",
                    template.text
                )));
            }
            head.to_owned()
        }
    };

    let slot = if prefix.is_empty() {
        capitalize(word)
    } else {
        word.to_owned()
    };
    Ok((format!("{prefix}{slot}{suffix}"), slot))
}

fn split_last_word(prefix: &str) -> (&str, &str) {
    let trimmed = prefix.trim_end();
    match trimmed.rfind(char::is_whitespace) {
        Some(i) => (&trimmed[..=i], &trimmed[i + 1..]),
        None => ("", trimmed),
    }
}

fn combinations<'t>(cat: &str, templates: &[&'t Template]) -> Result<Vec<(&'t Template, &'t Template)>> {
    let mut combos: Vec<(&Template, &Template)> =
        templates.iter().filter(|t| t.side == Side::Both).map(|t| (*t, *t)).collect();
    let side_a: Vec<&Template> = templates.iter().copied().filter(|t| t.side == Side::A).collect();
    let side_b: Vec<&Template> = templates.iter().copied().filter(|t| t.side == Side::B).collect();
    if side_a.len() != side_b.len() {
        return Err(Error::Template(format!(
            "category `{cat}` has {} A-side and {} B-side templates; they must pair up",
            side_a.len(),
            side_b.len()
        )));
    }
    combos.extend(side_a.into_iter().zip(side_b));
    Ok(combos)
}

/// One sentence pair per (template combination, word pair), grouped by
/// category in order of first appearance, then by pair, then combination.
pub fn gen_semantic(templates: &[Template], pairs: &[WordPair], classes: &WordClasses) -> Result<Vec<SentencePair>> {
    let mut by_category: Vec<(&str, Vec<&WordPair>)> = Vec::new();
    let mut seen_pairs = HashSet::new();
    for p in pairs {
        if p.w_a == p.w_b {
            return Err(Error::WordPair(format!("`{}` pairs a word with itself", p.w_a)));
        }
        if !seen_pairs.insert(p) {
            log::info!("dropping duplicate word pair {} / {} in {}", p.w_a, p.w_b, p.category);
            continue;
        }
        match by_category.iter_mut().find(|(c, _)| *c == p.category) {
            Some((_, v)) => v.push(p),
            None => by_category.push((&p.category, vec![p])),
        }
    }

    let mut out = Vec::new();
    for (cat, cat_pairs) in by_category {
        let cat_templates: Vec<&Template> = templates.iter().filter(|t| t.category == cat).collect();
        let combos = combinations(cat, &cat_templates)?;
        if combos.is_empty() {
            return Err(Error::Template(format!("no template for category `{cat}`")));
        }
        let mut generated = Vec::with_capacity(cat_pairs.len() * combos.len());
        for p in cat_pairs {
            for (ta, tb) in &combos {
                let (s_a, slot_a) = fill_template(ta, &p.w_a, classes.class_of(&p.w_a))?;
                let (s_b, slot_b) = fill_template(tb, &p.w_b, classes.class_of(&p.w_b))?;
                let pair = SentencePair {
                    id: String::new(),
                    category: cat.to_owned(),
                    s_a,
                    s_b,
                    slot_a,
                    slot_b,
                    label_a: p.label_a.clone(),
                    label_b: p.label_b.clone(),
                };
                if pair.s_a == pair.s_b {
                    log::warn!("skipping `{}`: both sides render identically", pair.s_a);
                    continue;
                }
                generated.push(pair);
            }
        }
        for (i, mut p) in dedup_sentence_pairs(generated).into_iter().enumerate() {
            p.id = format!("{cat}:{i}");
            out.push(p);
        }
    }
    Ok(out)
}

/// Nationality pairs: every combination must be a coordinated A/B template
/// pair (country phrase, adjective form).
pub fn gen_nationality(templates: &[Template], pairs: &[WordPair]) -> Result<Vec<SentencePair>> {
    let cat = category::NATIONALITY_ADJECTIVE;
    let own: Vec<Template> = templates.iter().filter(|t| t.category == cat).cloned().collect();
    if own.iter().any(|t| t.side == Side::Both) {
        return Err(Error::Template("nationality templates must be one-sided (A or B)".into()));
    }
    let pairs: Vec<WordPair> = pairs.iter().filter(|p| p.category == cat).cloned().collect();
    gen_semantic(&own, &pairs, &WordClasses::new())
}
