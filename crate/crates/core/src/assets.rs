//! Bundled templates, word pairs and lexicons.
//!
//! The templates are illustrative stand-ins (the file is marked
//! `"canonical": false`); the word pairs follow the public Google analogy
//! lists.

use std::io::Cursor;

use crate::datagen::{
    category, parse_templates, read_word_map, read_word_pairs, Lexicon, Template, WordClasses, WordPair,
};

pub const TEMPLATES_JSON: &str = include_str!("../assets/templates.json");
pub const WORD_CLASSES_TSV: &str = include_str!("../assets/word_classes.tsv");

const PAIRS: [(&str, &str); 6] = [
    (category::COMMON_CAPITAL, include_str!("../assets/pairs/common_capital.tsv")),
    (category::ALL_CAPITAL, include_str!("../assets/pairs/all_capital.tsv")),
    (category::CITY_IN_STATE, include_str!("../assets/pairs/city_in_state.tsv")),
    (category::CURRENCY, include_str!("../assets/pairs/currency.tsv")),
    (category::FAMILY, include_str!("../assets/pairs/family.tsv")),
    (category::NATIONALITY_ADJECTIVE, include_str!("../assets/pairs/nationality_adjective.tsv")),
];

const ANTONYMS: &str = include_str!("../assets/lexicon/antonyms.tsv");
const BASE_FORMS: &str = include_str!("../assets/lexicon/base_forms.tsv");
const SINGULAR_FORMS: &str = include_str!("../assets/lexicon/singular_forms.tsv");
const INFLECTIONS: &str = include_str!("../assets/lexicon/inflections.tsv");

pub fn templates() -> Vec<Template> {
    parse_templates(TEMPLATES_JSON).expect("bundled templates are valid")
}

/// Categories with bundled word pairs.
pub fn pair_categories() -> impl Iterator<Item = &'static str> {
    PAIRS.iter().map(|(c, _)| *c)
}

pub fn word_pairs(cat: &str) -> Option<Vec<WordPair>> {
    PAIRS
        .iter()
        .find(|(c, _)| *c == cat)
        .map(|(c, tsv)| read_word_pairs(Cursor::new(tsv), c, c).expect("bundled pairs are valid"))
}

/// Pairs of the five template-only semantic categories, in category order.
pub fn semantic_word_pairs() -> Vec<WordPair> {
    category::SEMANTIC.iter().flat_map(|c| word_pairs(c).unwrap_or_default()).collect()
}

pub fn word_classes() -> WordClasses {
    WordClasses::read(Cursor::new(WORD_CLASSES_TSV), "word_classes.tsv").expect("bundled classes are valid")
}

pub fn lexicon() -> Lexicon {
    let load = |name: &str, tsv: &str| read_word_map(Cursor::new(tsv), name).expect("bundled lexicon is valid");
    Lexicon {
        base_forms: load("base_forms.tsv", BASE_FORMS),
        antonyms: load("antonyms.tsv", ANTONYMS),
        singular_forms: load("singular_forms.tsv", SINGULAR_FORMS),
        inflections: load("inflections.tsv", INFLECTIONS),
    }
}
