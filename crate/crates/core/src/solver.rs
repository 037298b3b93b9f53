//! Analogy solving with 3CosAdd and 3CosMul.
//!
//! Questions sharing a candidate scope are solved together: candidates are
//! normalized once into a row-major matrix, and each distinct query item
//! (an `A`, `B` or `C` of some question) gets one row of similarities to
//! every candidate. Single-question [`Solver::solve`] runs the same kernel
//! on a one-question group, so batch and sequential results are identical
//! to the bit.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{category_pools, AnalogyQuestion, CandidateScope};
use crate::error::{Error, Result};
use crate::store::{dot, EmbeddingTable};

pub const DEFAULT_EPSILON: f64 = 0.001;

/// Upper bound on similarity entries held at once by one group.
pub const DEFAULT_ROW_BUDGET: usize = 1 << 24;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    CosAdd,
    CosMul,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::CosAdd => "3CosAdd",
            Metric::CosMul => "3CosMul",
        }
    }
}

/// How 3CosAdd is evaluated. The two agree in argmax only when every
/// vector has unit norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddForm {
    /// `cos(d,c) + cos(d,b) - cos(d,a)`
    #[default]
    SumOfCosines,
    /// `cos(d, b - a + c)`
    CosineToOffset,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub metric: Metric,
    /// Exclude `A`, `B` and `C` from the candidates.
    pub constrained: bool,
    pub epsilon: f64,
    pub tie_break: TieBreak,
    pub top_k: usize,
    pub add_form: AddForm,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            metric: Metric::CosAdd,
            constrained: true,
            epsilon: DEFAULT_EPSILON,
            tie_break: TieBreak::LowestIndex,
            top_k: 1,
            add_form: AddForm::SumOfCosines,
        }
    }
}

impl SolverConfig {
    pub fn new(metric: Metric, constrained: bool) -> Self {
        Self {
            metric,
            constrained,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        Ok(())
    }

    /// Report column name: `3CosAdd`, `3CosAdd-U`, ...
    pub fn column(&self) -> String {
        column_name(self.metric, self.constrained)
    }
}

pub fn column_name(metric: Metric, constrained: bool) -> String {
    if constrained {
        metric.label().to_owned()
    } else {
        format!("{}-U", metric.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub id: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub qid: String,
    pub category: String,
    pub predicted: String,
    pub score: f64,
    /// 1-based rank of the gold item; absent when it is not a candidate.
    pub rank_of_gold: Option<usize>,
    pub correct: bool,
    pub metric: Metric,
    pub constrained: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub top: Vec<Ranked>,
}

fn similarity(table: &EmbeddingTable, i: usize, j: usize) -> f64 {
    if table.norm(i) == 0.0 || table.norm(j) == 0.0 {
        return 0.0;
    }
    table.cosine(i, j).unwrap_or(0.0)
}

fn shifted(cos: f64) -> f64 {
    (cos + 1.0) / 2.0
}

/// `cos(d,c) + cos(d,b) - cos(d,a)`; zero-norm vectors have similarity 0.
pub fn score_cos_add(table: &EmbeddingTable, a: usize, b: usize, c: usize, d: usize) -> f64 {
    similarity(table, d, c) + similarity(table, d, b) - similarity(table, d, a)
}

/// `s(d,c) s(d,b) / (s(d,a) + eps)` with `s = (cos + 1) / 2`.
pub fn score_cos_mul(table: &EmbeddingTable, a: usize, b: usize, c: usize, d: usize, epsilon: f64) -> f64 {
    shifted(similarity(table, d, c)) * shifted(similarity(table, d, b)) / (shifted(similarity(table, d, a)) + epsilon)
}

/// `cos(d, b - a + c)`.
pub fn score_cos_offset(table: &EmbeddingTable, a: usize, b: usize, c: usize, d: usize) -> f64 {
    let (nd, nt) = (table.norm(d), offset_norm(table, a, b, c));
    if nd == 0.0 || nt == 0.0 {
        return 0.0;
    }
    let t: Vec<f64> = offset(table, a, b, c);
    (dot(table.vector(d), &t) / (nd * nt)).clamp(-1.0, 1.0)
}

fn offset(table: &EmbeddingTable, a: usize, b: usize, c: usize) -> Vec<f64> {
    let (va, vb, vc) = (table.vector(a), table.vector(b), table.vector(c));
    (0..table.dim()).map(|j| vb[j] - va[j] + vc[j]).collect()
}

fn offset_norm(table: &EmbeddingTable, a: usize, b: usize, c: usize) -> f64 {
    crate::store::l2_norm(&offset(table, a, b, c))
}

fn normalized_into(table: &EmbeddingTable, idx: usize, out: &mut [f64]) {
    let n = table.norm(idx);
    if n == 0.0 {
        out.fill(0.0);
    } else {
        for (o, x) in out.iter_mut().zip(table.vector(idx)) {
            *o = x / n;
        }
    }
}

/// Table indices of one question.
#[derive(Clone, Copy, Debug)]
struct Resolved {
    a: usize,
    b: usize,
    c: usize,
    gold: usize,
}

/// Candidates of one scope, normalized.
struct CandidateMatrix<'a> {
    ids: &'a [usize],
    dim: usize,
    rows: Vec<f64>,
    position: HashMap<usize, usize>,
}

impl<'a> CandidateMatrix<'a> {
    fn new(table: &EmbeddingTable, ids: &'a [usize]) -> Self {
        let dim = table.dim();
        let mut rows = vec![0.0; ids.len() * dim];
        rows.par_chunks_mut(dim.max(1))
            .zip(ids.par_iter())
            .for_each(|(row, &idx)| normalized_into(table, idx, row));
        let mut position = HashMap::with_capacity(ids.len());
        for (k, &idx) in ids.iter().enumerate() {
            position.entry(idx).or_insert(k);
        }
        Self { ids, dim, rows, position }
    }

    fn similarities(&self, table: &EmbeddingTable, query: usize) -> Vec<f64> {
        let mut q = vec![0.0; self.dim];
        normalized_into(table, query, &mut q);
        if self.dim == 0 {
            return vec![0.0; self.ids.len()];
        }
        self.rows.chunks_exact(self.dim).map(|r| dot(&q, r).clamp(-1.0, 1.0)).collect()
    }
}

pub struct Solver<'t> {
    table: &'t EmbeddingTable,
    cfg: SolverConfig,
    pool: Option<rayon::ThreadPool>,
    row_budget: usize,
    zero_norm: AtomicU64,
}

impl<'t> Solver<'t> {
    pub fn new(table: &'t EmbeddingTable, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            table,
            cfg,
            pool: None,
            row_budget: DEFAULT_ROW_BUDGET,
            zero_norm: AtomicU64::new(0),
        })
    }

    /// Runs batches on a dedicated pool of `threads` workers instead of the
    /// global one.
    pub fn with_threads(mut self, threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
        self.pool = Some(pool);
        Ok(self)
    }

    pub fn with_row_budget(mut self, entries: usize) -> Self {
        self.row_budget = entries.max(1);
        self
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Zero-norm query or candidate vectors met so far.
    pub fn zero_norm_count(&self) -> u64 {
        self.zero_norm.load(Ordering::Relaxed)
    }

    fn index(&self, id: &str) -> Result<usize> {
        self.table.index_of(id).ok_or_else(|| Error::UnknownItem(id.to_owned()))
    }

    fn resolve(&self, q: &AnalogyQuestion) -> Result<Resolved> {
        Ok(Resolved {
            a: self.index(&q.a)?,
            b: self.index(&q.b)?,
            c: self.index(&q.c)?,
            gold: self.index(&q.gold_d)?,
        })
    }

    fn resolve_items(&self, items: &[Arc<str>]) -> Result<Vec<usize>> {
        items.iter().map(|id| self.index(id)).collect()
    }

    /// Solves one question against explicit candidate table indices.
    pub fn solve(&self, question: &AnalogyQuestion, candidates: &[usize]) -> Result<Prediction> {
        let r = self.resolve(question)?;
        if let Some(&bad) = candidates.iter().find(|&&i| i >= self.table.len()) {
            return Err(Error::UnknownItem(format!("candidate index {bad}")));
        }
        let mut out = self.solve_group(&[(question, r)], candidates)?;
        Ok(out.pop().expect("one prediction per question"))
    }

    /// Solves every question; category-pool scopes are derived from the
    /// questions themselves.
    pub fn solve_batch(&self, questions: &[AnalogyQuestion]) -> Result<Vec<Prediction>> {
        self.solve_batch_with_pools(questions, &category_pools(questions))
    }

    pub fn solve_batch_with_pools(
        &self,
        questions: &[AnalogyQuestion],
        pools: &BTreeMap<Arc<str>, Vec<Arc<str>>>,
    ) -> Result<Vec<Prediction>> {
        match &self.pool {
            Some(p) => p.install(|| self.batch_inner(questions, pools)),
            None => self.batch_inner(questions, pools),
        }
    }

    fn batch_inner(
        &self,
        questions: &[AnalogyQuestion],
        pools: &BTreeMap<Arc<str>, Vec<Arc<str>>>,
    ) -> Result<Vec<Prediction>> {
        // Group question positions by scope, keeping first-seen group order.
        let mut group_of: HashMap<&CandidateScope, HashMap<&str, usize>> = HashMap::new();
        let mut groups: Vec<(Vec<usize>, Vec<(usize, Resolved)>)> = Vec::new();
        for (pos, q) in questions.iter().enumerate() {
            let r = self.resolve(q)?;
            let key: &str = match &q.candidate_scope {
                CandidateScope::CategoryPool => &q.category,
                CandidateScope::Explicit { .. } => "",
            };
            let by_key = group_of.entry(&q.candidate_scope).or_default();
            let g = match by_key.get(key) {
                Some(&g) => g,
                None => {
                    let items: &[Arc<str>] = match &q.candidate_scope {
                        CandidateScope::CategoryPool => pools
                            .get(&q.category)
                            .map(Vec::as_slice)
                            .ok_or_else(|| Error::EmptyCandidates(q.qid.clone()))?,
                        CandidateScope::Explicit { items } => items,
                    };
                    groups.push((self.resolve_items(items)?, Vec::new()));
                    by_key.insert(key, groups.len() - 1);
                    groups.len() - 1
                }
            };
            groups[g].1.push((pos, r));
        }

        let mut slots: Vec<Option<Prediction>> = vec![None; questions.len()];
        for (cands, members) in &groups {
            let batch: Vec<(&AnalogyQuestion, Resolved)> = members.iter().map(|&(p, r)| (&questions[p], r)).collect();
            let preds = self.solve_group(&batch, cands)?;
            for (&(p, _), pred) in members.iter().zip(preds) {
                slots[p] = Some(pred);
            }
        }
        Ok(slots.into_iter().map(|p| p.expect("every question solved")).collect())
    }

    fn solve_group(&self, batch: &[(&AnalogyQuestion, Resolved)], cands: &[usize]) -> Result<Vec<Prediction>> {
        let matrix = CandidateMatrix::new(self.table, cands);
        let zero = cands.iter().filter(|&&i| self.table.norm(i) == 0.0).count();
        self.note_zero(zero);
        let m = cands.len().max(1);
        let max_rows = (self.row_budget / m).max(3);

        let mut out = Vec::with_capacity(batch.len());
        let mut start = 0;
        while start < batch.len() {
            // Take questions until the distinct query rows would exceed the budget.
            let mut row_of: HashMap<usize, usize> = HashMap::new();
            let mut order = Vec::new();
            let mut end = start;
            while end < batch.len() {
                let r = batch[end].1;
                let new: Vec<usize> = [r.a, r.b, r.c]
                    .into_iter()
                    .filter(|i| !row_of.contains_key(i))
                    .fold(Vec::new(), |mut v, i| {
                        if !v.contains(&i) {
                            v.push(i);
                        }
                        v
                    });
                if end > start && order.len() + new.len() > max_rows {
                    break;
                }
                for i in new {
                    row_of.insert(i, order.len());
                    order.push(i);
                }
                end += 1;
            }
            let zero_q = order.iter().filter(|&&i| self.table.norm(i) == 0.0).count();
            self.note_zero(zero_q);
            let rows: Vec<Vec<f64>> = order.par_iter().map(|&i| matrix.similarities(self.table, i)).collect();
            let chunk: Result<Vec<Prediction>> = batch[start..end]
                .par_iter()
                .map(|(q, r)| {
                    let sims = [&rows[row_of[&r.a]][..], &rows[row_of[&r.b]], &rows[row_of[&r.c]]];
                    self.pick(q, *r, &matrix, sims)
                })
                .collect();
            out.extend(chunk?);
            start = end;
        }
        Ok(out)
    }

    fn note_zero(&self, n: usize) {
        if n > 0 {
            self.zero_norm.fetch_add(n as u64, Ordering::Relaxed);
            log::warn!("{n} zero-norm vector(s) scored with similarity 0");
        }
    }

    fn pick(&self, q: &AnalogyQuestion, r: Resolved, m: &CandidateMatrix<'_>, sims: [&[f64]; 3]) -> Result<Prediction> {
        let [ra, rb, rc] = sims;
        let cfg = &self.cfg;
        let (na, nb, nc) = (self.table.norm(r.a), self.table.norm(r.b), self.table.norm(r.c));
        let nt = match (cfg.metric, cfg.add_form) {
            (Metric::CosAdd, AddForm::CosineToOffset) => offset_norm(self.table, r.a, r.b, r.c),
            _ => 0.0,
        };
        let score = |k: usize| -> f64 {
            match (cfg.metric, cfg.add_form) {
                (Metric::CosAdd, AddForm::SumOfCosines) => rc[k] + rb[k] - ra[k],
                (Metric::CosAdd, AddForm::CosineToOffset) => {
                    if nt == 0.0 {
                        0.0
                    } else {
                        ((nb * rb[k] - na * ra[k] + nc * rc[k]) / nt).clamp(-1.0, 1.0)
                    }
                }
                (Metric::CosMul, _) => shifted(rc[k]) * shifted(rb[k]) / (shifted(ra[k]) + cfg.epsilon),
            }
        };
        let allowed = |k: usize| {
            let id = m.ids[k];
            !(cfg.constrained && (id == r.a || id == r.b || id == r.c))
        };

        let mut best: Option<(usize, f64)> = None;
        for k in 0..m.ids.len() {
            if !allowed(k) {
                continue;
            }
            let s = score(k);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((k, s));
            }
        }
        let (best_k, best_s) = best.ok_or_else(|| Error::EmptyCandidates(q.qid.clone()))?;

        let rank_of_gold = m.position.get(&r.gold).copied().filter(|&g| allowed(g)).map(|g| {
            let sg = score(g);
            1 + (0..m.ids.len())
                .filter(|&k| allowed(k) && k != g)
                .filter(|&k| {
                    let s = score(k);
                    s > sg || (s == sg && k < g)
                })
                .count()
        });

        let top = if cfg.top_k > 1 {
            let mut all: Vec<(usize, f64)> = (0..m.ids.len()).filter(|&k| allowed(k)).map(|k| (k, score(k))).collect();
            all.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            all.truncate(cfg.top_k);
            all.into_iter()
                .map(|(k, s)| Ranked {
                    id: self.table.id(m.ids[k]).to_owned(),
                    score: s,
                })
                .collect()
        } else {
            Vec::new()
        };

        let predicted_idx = m.ids[best_k];
        Ok(Prediction {
            qid: q.qid.clone(),
            category: q.category.to_string(),
            predicted: self.table.id(predicted_idx).to_owned(),
            score: best_s,
            rank_of_gold,
            correct: predicted_idx == r.gold,
            metric: cfg.metric,
            constrained: cfg.constrained,
            top,
        })
    }
}

/// Solves one question against explicit candidate table indices.
pub fn solve(
    question: &AnalogyQuestion,
    table: &EmbeddingTable,
    candidates: &[usize],
    cfg: &SolverConfig,
) -> Result<Prediction> {
    Solver::new(table, cfg.clone())?.solve(question, candidates)
}

/// Solves a batch in input order; `threads` picks a dedicated pool size.
pub fn solve_batch(
    questions: &[AnalogyQuestion],
    table: &EmbeddingTable,
    cfg: &SolverConfig,
    threads: Option<usize>,
) -> Result<Vec<Prediction>> {
    let mut solver = Solver::new(table, cfg.clone())?;
    if let Some(t) = threads {
        solver = solver.with_threads(t)?;
    }
    solver.solve_batch(questions)
}
