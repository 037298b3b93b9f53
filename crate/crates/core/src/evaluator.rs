//! Accuracy tables and answer-type distributions from predictions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::datagen::{AnalogyQuestion, SentencePair};
use crate::error::{Error, Result};
use crate::solver::{column_name, Metric, Prediction};

/// Column order of every table.
pub const COLUMNS: [(Metric, bool); 4] = [
    (Metric::CosAdd, false),
    (Metric::CosAdd, true),
    (Metric::CosMul, false),
    (Metric::CosMul, true),
];

pub const MICRO_ROW: &str = "ALL (micro)";
pub const MACRO_ROW: &str = "ALL (macro)";
pub const UNLABELED: &str = "unlabeled";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Constrained,
    Unconstrained,
}

impl Protocol {
    pub fn from_constrained(c: bool) -> Self {
        if c {
            Protocol::Constrained
        } else {
            Protocol::Unconstrained
        }
    }

    pub fn is_constrained(self) -> bool {
        self == Protocol::Constrained
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub category: String,
    pub metric: Metric,
    pub protocol: Protocol,
    pub column: String,
    pub correct: usize,
    pub n_questions: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub metric: Metric,
    pub protocol: Protocol,
    pub column: String,
    pub correct: usize,
    pub n_questions: usize,
    pub n_categories: usize,
    pub micro: f64,
    #[serde(rename = "macro")]
    pub macro_avg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub category: String,
    pub column: String,
    pub counts: BTreeMap<String, usize>,
    pub probabilities: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<Aggregate>,
    pub label_distribution: Vec<LabelDistribution>,
}

fn column_index(metric: Metric, constrained: bool) -> usize {
    COLUMNS.iter().position(|&c| c == (metric, constrained)).expect("all columns listed")
}

/// Questions by id with their order of first category appearance.
struct QuestionIndex<'q> {
    by_qid: HashMap<&'q str, &'q AnalogyQuestion>,
    categories: Vec<&'q str>,
}

impl<'q> QuestionIndex<'q> {
    fn new(questions: &'q [AnalogyQuestion]) -> Self {
        let mut seen = HashSet::new();
        let mut categories = Vec::new();
        let mut by_qid = HashMap::with_capacity(questions.len());
        for q in questions {
            by_qid.insert(q.qid.as_str(), q);
            if seen.insert(&*q.category) {
                categories.push(&*q.category);
            }
        }
        Self { by_qid, categories }
    }

    fn matched(&self, predictions: &[Prediction]) -> Result<Vec<(&'q AnalogyQuestion, usize, bool)>> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(predictions.len());
        for p in predictions {
            let q = *self
                .by_qid
                .get(p.qid.as_str())
                .ok_or_else(|| Error::UnmatchedPrediction(p.qid.clone()))?;
            let col = column_index(p.metric, p.constrained);
            if !seen.insert((p.qid.as_str(), col)) {
                return Err(Error::DuplicatePrediction {
                    qid: p.qid.clone(),
                    column: column_name(p.metric, p.constrained),
                });
            }
            out.push((q, col, p.predicted == *q.gold_d));
        }
        Ok(out)
    }
}

/// Exact fraction correct per (category, metric, protocol), in category
/// order of the question list and column order of [`COLUMNS`].
pub fn accuracy(predictions: &[Prediction], questions: &[AnalogyQuestion]) -> Result<Vec<ReportRow>> {
    let index = QuestionIndex::new(questions);
    let mut tally: HashMap<(&str, usize), (usize, usize)> = HashMap::new();
    for (q, col, correct) in index.matched(predictions)? {
        let e = tally.entry((&*q.category, col)).or_default();
        e.0 += usize::from(correct);
        e.1 += 1;
    }
    let mut rows = Vec::new();
    for cat in &index.categories {
        for (col, &(metric, constrained)) in COLUMNS.iter().enumerate() {
            if let Some(&(correct, n)) = tally.get(&(*cat, col)) {
                rows.push(ReportRow {
                    category: cat.to_string(),
                    metric,
                    protocol: Protocol::from_constrained(constrained),
                    column: column_name(metric, constrained),
                    correct,
                    n_questions: n,
                    accuracy: correct as f64 / n as f64,
                });
            }
        }
    }
    Ok(rows)
}

/// Micro (pooled) and macro (mean of categories) accuracy per column.
pub fn aggregate(rows: &[ReportRow]) -> Vec<Aggregate> {
    COLUMNS
        .iter()
        .filter_map(|&(metric, constrained)| {
            let protocol = Protocol::from_constrained(constrained);
            let mine: Vec<&ReportRow> = rows.iter().filter(|r| r.metric == metric && r.protocol == protocol).collect();
            if mine.is_empty() {
                return None;
            }
            let correct: usize = mine.iter().map(|r| r.correct).sum();
            let n: usize = mine.iter().map(|r| r.n_questions).sum();
            let macro_avg = mine.iter().map(|r| r.accuracy).sum::<f64>() / mine.len() as f64;
            Some(Aggregate {
                metric,
                protocol,
                column: column_name(metric, constrained),
                correct,
                n_questions: n,
                n_categories: mine.len(),
                micro: correct as f64 / n as f64,
                macro_avg,
            })
        })
        .collect()
}

/// Sentence text → slot label, first occurrence winning.
pub fn slot_labels(pairs: &[SentencePair]) -> HashMap<&str, &str> {
    let mut out = HashMap::new();
    for p in pairs {
        out.entry(p.s_a.as_str()).or_insert(p.label_a.as_str());
        out.entry(p.s_b.as_str()).or_insert(p.label_b.as_str());
    }
    out
}

/// Normalized frequency of the predicted sentences' slot labels.
pub fn label_probability(predictions: &[Prediction], pairs: &[SentencePair]) -> BTreeMap<String, f64> {
    let labels = slot_labels(pairs);
    let counts = count_labels(predictions.iter(), &labels);
    normalize(&counts)
}

fn count_labels<'a>(preds: impl Iterator<Item = &'a Prediction>, labels: &HashMap<&str, &str>) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for p in preds {
        let label = labels.get(p.predicted.as_str()).copied().unwrap_or(UNLABELED);
        *counts.entry(label.to_owned()).or_insert(0) += 1;
    }
    counts
}

fn normalize(counts: &BTreeMap<String, usize>) -> BTreeMap<String, f64> {
    let total: usize = counts.values().sum();
    counts
        .iter()
        .map(|(k, &v)| (k.clone(), v as f64 / total as f64))
        .collect()
}

/// Full report; label distributions are included when `pairs` is given.
pub fn build_report(
    predictions: &[Prediction],
    questions: &[AnalogyQuestion],
    pairs: Option<&[SentencePair]>,
) -> Result<EvaluationReport> {
    let rows = accuracy(predictions, questions)?;
    let aggregates = aggregate(&rows);
    let mut label_distribution = Vec::new();
    if let Some(pairs) = pairs {
        let labels = slot_labels(pairs);
        let index = QuestionIndex::new(questions);
        let mut grouped: HashMap<(&str, usize), Vec<&Prediction>> = HashMap::new();
        for p in predictions {
            let q = index.by_qid[p.qid.as_str()];
            grouped
                .entry((&*q.category, column_index(p.metric, p.constrained)))
                .or_default()
                .push(p);
        }
        for cat in &index.categories {
            for (col, &(metric, constrained)) in COLUMNS.iter().enumerate() {
                if let Some(preds) = grouped.get(&(*cat, col)) {
                    let counts = count_labels(preds.iter().copied(), &labels);
                    label_distribution.push(LabelDistribution {
                        category: cat.to_string(),
                        column: column_name(metric, constrained),
                        probabilities: normalize(&counts),
                        counts,
                    });
                }
            }
        }
    }
    Ok(EvaluationReport {
        rows,
        aggregates,
        label_distribution,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

pub fn format_accuracy(x: f64) -> String {
    format!("{x:.4}")
}

/// Wide table: one line per category plus the two aggregate lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub n_questions: usize,
    /// Formatted accuracies aligned with `columns`; `None` for missing cells.
    pub cells: Vec<Option<String>>,
}

impl EvaluationReport {
    /// Columns that have at least one row; all four when the report is empty.
    pub fn columns(&self) -> Vec<String> {
        let present: Vec<String> = COLUMNS
            .iter()
            .map(|&(m, c)| column_name(m, c))
            .filter(|name| self.rows.iter().any(|r| &r.column == name))
            .collect();
        if present.is_empty() {
            COLUMNS.iter().map(|&(m, c)| column_name(m, c)).collect()
        } else {
            present
        }
    }

    pub fn table(&self) -> Table {
        let columns = self.columns();
        let mut rows: Vec<TableRow> = Vec::new();
        for r in &self.rows {
            let idx = columns.iter().position(|c| *c == r.column).expect("column present");
            if rows.last().is_none_or(|last| last.label != r.category) {
                rows.push(TableRow {
                    label: r.category.clone(),
                    n_questions: 0,
                    cells: vec![None; columns.len()],
                });
            }
            let row = rows.last_mut().expect("just pushed");
            row.n_questions = row.n_questions.max(r.n_questions);
            row.cells[idx] = Some(format_accuracy(r.accuracy));
        }
        if !self.aggregates.is_empty() {
            for (label, pick) in [(MICRO_ROW, true), (MACRO_ROW, false)] {
                let mut cells = vec![None; columns.len()];
                let mut n = 0;
                for a in &self.aggregates {
                    let idx = columns.iter().position(|c| *c == a.column).expect("column present");
                    cells[idx] = Some(format_accuracy(if pick { a.micro } else { a.macro_avg }));
                    n = n.max(a.n_questions);
                }
                rows.push(TableRow {
                    label: label.to_owned(),
                    n_questions: n,
                    cells,
                });
            }
        }
        Table { columns, rows }
    }

    pub fn emit<W: Write>(&self, format: ReportFormat, writer: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(writer);
        let res = match format {
            ReportFormat::Csv => write_csv(&self.table(), &mut w),
            ReportFormat::Markdown => write_markdown(&self.table(), &mut w),
            ReportFormat::Json => {
                #[derive(Serialize)]
                struct Doc<'a> {
                    rows: &'a [ReportRow],
                    aggregates: &'a [Aggregate],
                    label_distribution: &'a [LabelDistribution],
                    table: Table,
                }
                let doc = Doc {
                    rows: &self.rows,
                    aggregates: &self.aggregates,
                    label_distribution: &self.label_distribution,
                    table: self.table(),
                };
                serde_json::to_writer_pretty(&mut w, &doc)
                    .map_err(std::io::Error::other)
                    .and_then(|_| writeln!(w))
            }
        };
        res.and_then(|_| w.flush()).map_err(|e| Error::io("<report>", e))
    }

    /// `category,column,label,count,probability` lines.
    pub fn emit_labels<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(writer);
        let res = (|| {
            writeln!(w, "category,column,label,count,probability")?;
            for d in &self.label_distribution {
                for (label, count) in &d.counts {
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        csv_field(&d.category),
                        d.column,
                        csv_field(label),
                        count,
                        format_accuracy(d.probabilities[label])
                    )?;
                }
            }
            w.flush()
        })();
        res.map_err(|e| Error::io("<labels>", e))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn write_csv<W: Write>(t: &Table, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "category,n_questions,{}", t.columns.join(","))?;
    for r in &t.rows {
        let cells: Vec<&str> = r.cells.iter().map(|c| c.as_deref().unwrap_or("")).collect();
        writeln!(w, "{},{},{}", csv_field(&r.label), r.n_questions, cells.join(","))?;
    }
    Ok(())
}

fn write_markdown<W: Write>(t: &Table, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "| category | n_questions | {} |", t.columns.join(" | "))?;
    writeln!(w, "|---|---:|{}", "---:|".repeat(t.columns.len()))?;
    for r in &t.rows {
        let cells: Vec<&str> = r.cells.iter().map(|c| c.as_deref().unwrap_or("-")).collect();
        writeln!(w, "| {} | {} | {} |", r.label.replace('|', "\\|"), r.n_questions, cells.join(" | "))?;
    }
    Ok(())
}
