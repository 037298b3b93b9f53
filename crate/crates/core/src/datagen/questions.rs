//! Expansion of sentence pairs into analogy questions.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use super::{AnalogyQuestion, CandidateScope, Interner, SentencePair};

/// Number of unordered pairs of `n` sentence pairs.
pub fn question_count(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// `{category}:{i}:{j}`; called once per question, so kept off `format!`.
fn question_id(cat: &str, i: usize, j: usize) -> String {
    let mut buf = itoa::Buffer::new();
    let mut qid = String::with_capacity(cat.len() + 12);
    qid.push_str(cat);
    qid.push(':');
    qid.push_str(buf.format(i));
    qid.push(':');
    qid.push_str(buf.format(j));
    qid
}

/// One question per unordered pair `i < j` within a category: pair `i`
/// supplies `A:B`, pair `j` supplies `C:D`. Categories keep their order of
/// first appearance; questions whose gold sentence equals one of `A`, `B`,
/// `C` are dropped with a warning.
pub fn expand_questions(pairs: &[SentencePair]) -> Vec<AnalogyQuestion> {
    let mut interner = Interner::default();
    let mut groups: Vec<(Arc<str>, Vec<&SentencePair>)> = Vec::new();
    for p in pairs {
        match groups.iter_mut().find(|(c, _)| **c == *p.category) {
            Some((_, v)) => v.push(p),
            None => groups.push((interner.get(&p.category), vec![p])),
        }
    }

    let total: u64 = groups.iter().map(|(_, v)| question_count(v.len() as u64)).sum();
    let mut out = Vec::with_capacity(total as usize);
    for (cat, members) in groups {
        if members.len() < 2 {
            log::warn!("category {cat} has {} sentence pair(s); no questions", members.len());
            continue;
        }
        let sides: Vec<(Arc<str>, Arc<str>)> =
            members.iter().map(|p| (interner.get(&p.s_a), interner.get(&p.s_b))).collect();
        let mut skipped = 0usize;
        for i in 0..sides.len() {
            let (a, b) = &sides[i];
            for (j, (c, d)) in sides.iter().enumerate().skip(i + 1) {
                // Interned, so equal text means the same allocation.
                if Arc::ptr_eq(d, a) || Arc::ptr_eq(d, b) || Arc::ptr_eq(d, c) {
                    skipped += 1;
                    continue;
                }
                out.push(AnalogyQuestion {
                    qid: question_id(&cat, i, j),
                    category: cat.clone(),
                    a: a.clone(),
                    b: b.clone(),
                    c: c.clone(),
                    gold_d: d.clone(),
                    candidate_scope: CandidateScope::CategoryPool,
                    exclusions: vec![a.clone(), b.clone(), c.clone()],
                });
            }
        }
        if skipped > 0 {
            log::warn!("category {cat}: skipped {skipped} degenerate question(s)");
        }
    }
    out
}

/// Distinct items referenced by the pool-scoped questions of each category,
/// in order of first appearance.
pub fn category_pools(questions: &[AnalogyQuestion]) -> BTreeMap<Arc<str>, Vec<Arc<str>>> {
    let mut pools: BTreeMap<Arc<str>, (HashSet<Arc<str>>, Vec<Arc<str>>)> = BTreeMap::new();
    for q in questions {
        if q.candidate_scope != CandidateScope::CategoryPool {
            continue;
        }
        let (seen, items) = pools.entry(q.category.clone()).or_default();
        for x in [&q.a, &q.b, &q.c, &q.gold_d] {
            if seen.insert(x.clone()) {
                items.push(x.clone());
            }
        }
    }
    pools.into_iter().map(|(k, (_, v))| (k, v)).collect()
}
