#![allow(dead_code)]

pub mod checks;

use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sentanalog::annotation::{load_annotated, AnnotatedSentence};
use sentanalog::datagen::{AnalogyQuestion, CandidateScope, SentencePair};
use sentanalog::solver::{AddForm, Metric, SolverConfig};
use sentanalog::store::{EmbeddingTable, TableBuilder};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn distractor_sentences() -> Vec<AnnotatedSentence> {
    load_annotated(fixture("distractor_sentences.jsonl")).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn table_from(rows: Vec<(String, Vec<f64>)>) -> EmbeddingTable {
    let mut b = TableBuilder::new(rows.first().map(|r| r.1.len()));
    for (id, v) in rows {
        b.push(id, v).unwrap();
    }
    b.finish().unwrap()
}

pub fn random_table(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddingTable {
    table_from((0..n).map(|i| (format!("s{i}"), gaussian(rng, dim))).collect())
}

/// Plain loop, no shared code with the library.
pub fn naive_cos(u: &[f64], v: &[f64]) -> f64 {
    let mut uv = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for i in 0..u.len() {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if uu == 0.0 || vv == 0.0 {
        return 0.0;
    }
    uv / (uu.sqrt() * vv.sqrt())
}

pub fn naive_score(t: &EmbeddingTable, cfg: &SolverConfig, a: usize, b: usize, c: usize, d: usize) -> f64 {
    let (va, vb, vc, vd) = (t.vector(a), t.vector(b), t.vector(c), t.vector(d));
    match (cfg.metric, cfg.add_form) {
        (Metric::CosAdd, AddForm::SumOfCosines) => naive_cos(vd, vc) + naive_cos(vd, vb) - naive_cos(vd, va),
        (Metric::CosAdd, AddForm::CosineToOffset) => {
            let off: Vec<f64> = (0..va.len()).map(|j| vb[j] - va[j] + vc[j]).collect();
            naive_cos(vd, &off)
        }
        (Metric::CosMul, _) => {
            let s = |x: f64| (x + 1.0) / 2.0;
            s(naive_cos(vd, vc)) * s(naive_cos(vd, vb)) / (s(naive_cos(vd, va)) + cfg.epsilon)
        }
    }
}

/// Brute-force argmax over candidates with lowest-index ties and the rank
/// of `gold` (1-based) when it survives exclusion.
pub fn naive_solve(
    t: &EmbeddingTable,
    cfg: &SolverConfig,
    abc: (usize, usize, usize),
    gold: usize,
    cands: &[usize],
) -> (usize, Option<usize>) {
    let (a, b, c) = abc;
    let mut scored = Vec::new();
    for (k, &d) in cands.iter().enumerate() {
        if cfg.constrained && (d == a || d == b || d == c) {
            continue;
        }
        scored.push((k, d, naive_score(t, cfg, a, b, c, d)));
    }
    let mut best = scored[0];
    for &s in &scored[1..] {
        if s.2 > best.2 {
            best = s;
        }
    }
    let rank = scored.iter().find(|s| s.1 == gold).map(|g| {
        1 + scored
            .iter()
            .filter(|s| s.2 > g.2 || (s.2 == g.2 && s.0 < g.0))
            .count()
    });
    (best.1, rank)
}

/// Orthogonal matrix as a product of random Householder reflections.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..dim.min(8) {
        let v = gaussian(rng, dim);
        let vv: f64 = v.iter().map(|x| x * x).sum();
        // Q <- Q (I - 2 v v^T / v^T v)
        for row in q.iter_mut() {
            let rv: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (x, vj) in row.iter_mut().zip(&v) {
                *x -= 2.0 * rv * vj / vv;
            }
        }
    }
    q
}

pub fn apply(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn pair(cat: &str, i: usize) -> SentencePair {
    SentencePair {
        id: format!("{cat}:{i}"),
        category: cat.into(),
        s_a: format!("{cat} a{i}"),
        s_b: format!("{cat} b{i}"),
        slot_a: format!("a{i}"),
        slot_b: format!("b{i}"),
        label_a: "left".into(),
        label_b: "right".into(),
    }
}

/// A question over explicit table ids with a category-pool scope.
pub fn question(qid: &str, ids: [&str; 4]) -> AnalogyQuestion {
    AnalogyQuestion {
        qid: qid.into(),
        category: "rand".into(),
        a: ids[0].into(),
        b: ids[1].into(),
        c: ids[2].into(),
        gold_d: ids[3].into(),
        candidate_scope: CandidateScope::CategoryPool,
        exclusions: vec![ids[0].into(), ids[1].into(), ids[2].into()],
    }
}

pub struct Instance {
    pub table: EmbeddingTable,
    pub abc: (usize, usize, usize),
    pub gold: usize,
}

fn distinct_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut picks = Vec::with_capacity(k);
    while picks.len() < k {
        let i = rng.random_range(0..n);
        if !picks.contains(&i) {
            picks.push(i);
        }
    }
    picks
}

/// Up to 50 items of dimension up to 16, sometimes with a duplicated vector.
pub fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(5..=50);
    let dim = rng.random_range(1..=16);
    let mut rows: Vec<(String, Vec<f64>)> = (0..n).map(|i| (format!("s{i}"), gaussian(rng, dim))).collect();
    if rng.random_bool(0.3) {
        let src = rng.random_range(0..n);
        let dst = rng.random_range(0..n);
        rows[dst].1 = rows[src].1.clone();
    }
    let picks = distinct_indices(rng, n, 4);
    Instance {
        table: table_from(rows),
        abc: (picks[0], picks[1], picks[2]),
        gold: picks[3],
    }
}

/// The instance as a question whose candidates are every table item.
pub fn instance_question(inst: &Instance, qid: &str) -> AnalogyQuestion {
    let id = |i: usize| inst.table.id(i).to_owned();
    let (a, b, c) = inst.abc;
    let mut q = question(qid, [&id(a), &id(b), &id(c), &id(inst.gold)]);
    q.candidate_scope = CandidateScope::Explicit {
        items: inst.table.ids().iter().map(|s| Arc::from(s.as_str())).collect(),
    };
    q
}

/// Random category-pool questions over the table, spread over `categories`.
pub fn random_questions(rng: &mut ChaCha8Rng, table: &EmbeddingTable, n: usize, categories: usize) -> Vec<AnalogyQuestion> {
    (0..n)
        .map(|i| {
            let picks = distinct_indices(rng, table.len(), 4);
            let ids: Vec<&str> = picks.iter().map(|&k| table.id(k)).collect();
            let mut q = question(&format!("q{i}"), [ids[0], ids[1], ids[2], ids[3]]);
            q.category = format!("cat{}", i % categories).into();
            q
        })
        .collect()
}
