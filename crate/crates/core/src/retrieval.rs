//! Step-1 and step-2 query generation and multi-step retrieval per answer option.
//!
//! Step 1 queries the index with the question stem followed by the option text,
//! stopwords removed. Step 2 takes each of the top-ranked step-1 facts and
//! queries with the symmetric difference between the (question ∪ option)
//! token set and the fact's token set, so the second hop is steered towards
//! words the first fact introduced.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{remove_stopwords, tokenize, Corpus, Fact, Question, Stoplist, TokenSeq};
use crate::error::{Error, Result};
use crate::index::{Hit, InvertedIndex};

/// Re-orders a hit list for a (question, option) pair. Implementations replace
/// `score` with their own relevance score.
pub trait Reranker: Sync {
    fn rerank(&self, stem: &str, option: &str, hits: Vec<Hit>, corpus: &Corpus) -> Vec<Hit>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    /// Number of retrieval steps, 1 or 2.
    pub steps: u8,
    /// Hits per step-1 query.
    pub k1: usize,
    /// Step-1 facts used to seed step-2 queries.
    pub top_m: usize,
    /// Hits per step-2 query.
    pub k2: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            steps: 2,
            k1: 50,
            top_m: 10,
            k2: 50,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.steps) || self.k1 == 0 || self.k2 == 0 {
            return Err(Error::InvalidConfig(format!("bad retrieval config {self:?}")));
        }
        Ok(())
    }
}

pub fn make_step1_query(stem: &str, option: &str, stoplist: &Stoplist) -> Result<TokenSeq> {
    let q = remove_stopwords(&tokenize(stem).concat(&tokenize(option)), stoplist);
    if q.is_empty() {
        Err(Error::EmptyQuery)
    } else {
        Ok(q)
    }
}

/// Symmetric difference of the (stem ∪ option) and fact token sets, rendered
/// in first-appearance order over the concatenation (stem, option, fact).
pub fn make_step2_query(stem: &str, option: &str, fact: &Fact, stoplist: &Stoplist) -> Result<TokenSeq> {
    let qa = remove_stopwords(&tokenize(stem).concat(&tokenize(option)), stoplist);
    let f = remove_stopwords(&fact.tokens, stoplist);
    symmetric_difference(&qa, &f)
}

pub(crate) fn symmetric_difference(left: &TokenSeq, right: &TokenSeq) -> Result<TokenSeq> {
    let l: HashSet<&str> = left.iter().map(String::as_str).collect();
    let r: HashSet<&str> = right.iter().map(String::as_str).collect();
    let mut emitted = HashSet::new();
    let out: TokenSeq = left
        .iter()
        .chain(right.iter())
        .map(String::as_str)
        .filter(|t| l.contains(t) != r.contains(t))
        .filter(|t| emitted.insert(*t))
        .collect();
    if out.is_empty() {
        Err(Error::EmptyQuery)
    } else {
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionTrace {
    pub label: String,
    /// `None` when the step-1 query was empty after stopword removal.
    pub step1_query: Option<TokenSeq>,
    pub f1: Vec<Hit>,
    pub step2_queries: Vec<TokenSeq>,
    pub f2: Vec<Hit>,
}

impl OptionTrace {
    /// The list a given step hands to downstream consumers: F1 after step 1,
    /// the merged F2 after step 2.
    pub fn final_list(&self, steps: u8) -> &[Hit] {
        if steps >= 2 {
            &self.f2
        } else {
            &self.f1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalTrace {
    pub question_id: String,
    pub steps: u8,
    pub options: Vec<OptionTrace>,
}

impl RetrievalTrace {
    pub fn final_lists(&self) -> Vec<&[Hit]> {
        self.options.iter().map(|o| o.final_list(self.steps)).collect()
    }
}

/// Orders hits by descending score, then ascending fact id.
pub(crate) fn sort_hits(hits: &mut [Hit]) {
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.fact_id.cmp(&b.fact_id)));
}

/// Unions hit lists, keeping the maximum score per fact id, in global rank order.
pub fn merge_hits<'a>(lists: impl IntoIterator<Item = &'a [Hit]>) -> Vec<Hit> {
    let mut best: HashMap<&str, f64> = HashMap::new();
    for list in lists {
        for h in list {
            best.entry(h.fact_id.as_str())
                .and_modify(|s| *s = s.max(h.score))
                .or_insert(h.score);
        }
    }
    let mut out: Vec<Hit> = best.into_iter().map(|(id, s)| Hit::new(id, s)).collect();
    sort_hits(&mut out);
    out
}

fn retrieve_option(
    index: &InvertedIndex,
    corpus: &Corpus,
    stoplist: &Stoplist,
    question: &Question,
    option: usize,
    ranker: Option<&dyn Reranker>,
    config: &RetrievalConfig,
) -> OptionTrace {
    let opt = &question.options[option];
    let mut trace = OptionTrace {
        label: opt.label.clone(),
        step1_query: None,
        f1: Vec::new(),
        step2_queries: Vec::new(),
        f2: Vec::new(),
    };
    let Ok(q1) = make_step1_query(&question.stem, &opt.text, stoplist) else {
        return trace;
    };
    let mut f1 = index.search(&q1, config.k1);
    if let Some(r) = ranker {
        f1 = r.rerank(&question.stem, &opt.text, f1, corpus);
    }
    trace.step1_query = Some(q1);
    trace.f1 = f1;
    if config.steps < 2 {
        return trace;
    }

    // Facts whose step-2 query comes out empty are skipped without replacement.
    let mut lists = Vec::new();
    for hit in trace.f1.iter().take(config.top_m) {
        let Some(fact) = corpus.get(&hit.fact_id) else { continue };
        let Ok(q2) = make_step2_query(&question.stem, &opt.text, fact, stoplist) else {
            continue;
        };
        lists.push(index.search(&q2, config.k2));
        trace.step2_queries.push(q2);
    }
    let mut f2 = merge_hits(lists.iter().map(Vec::as_slice));
    if let Some(r) = ranker {
        f2 = r.rerank(&question.stem, &opt.text, f2, corpus);
    }
    trace.f2 = f2;
    trace
}

pub fn retrieve(
    index: &InvertedIndex,
    corpus: &Corpus,
    stoplist: &Stoplist,
    question: &Question,
    ranker: Option<&dyn Reranker>,
    config: &RetrievalConfig,
) -> Result<RetrievalTrace> {
    config.validate()?;
    let options: Vec<OptionTrace> = (0..question.options.len())
        .into_par_iter()
        .map(|i| retrieve_option(index, corpus, stoplist, question, i, ranker, config))
        .collect();
    if options.iter().all(|o| o.step1_query.is_none()) {
        return Err(Error::RetrievalFailed);
    }
    Ok(RetrievalTrace {
        question_id: question.id.clone(),
        steps: config.steps,
        options,
    })
}

/// One JSON-lines row per (question, option).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub question_id: String,
    pub steps: u8,
    pub option_label: String,
    pub step1_query: Option<TokenSeq>,
    pub f1: Vec<Hit>,
    pub step2_queries: Vec<TokenSeq>,
    pub f2: Vec<Hit>,
}

pub fn write_traces(path: impl AsRef<Path>, traces: &[RetrievalTrace]) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for t in traces {
        for o in &t.options {
            let row = TraceRow {
                question_id: t.question_id.clone(),
                steps: t.steps,
                option_label: o.label.clone(),
                step1_query: o.step1_query.clone(),
                f1: o.f1.clone(),
                step2_queries: o.step2_queries.clone(),
                f2: o.f2.clone(),
            };
            serde_json::to_writer(&mut w, &row)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads rows back, grouping consecutive rows of the same question.
pub fn read_traces(path: impl AsRef<Path>) -> Result<Vec<RetrievalTrace>> {
    let path = path.as_ref();
    let mut out: Vec<RetrievalTrace> = Vec::new();
    for (i, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: TraceRow = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        let opt = OptionTrace {
            label: row.option_label,
            step1_query: row.step1_query,
            f1: row.f1,
            step2_queries: row.step2_queries,
            f2: row.f2,
        };
        match out.last_mut() {
            Some(t) if t.question_id == row.question_id => t.options.push(opt),
            _ => out.push(RetrievalTrace {
                question_id: row.question_id,
                steps: row.steps,
                options: vec![opt],
            }),
        }
    }
    Ok(out)
}
