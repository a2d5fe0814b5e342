//! Construction of the relevance-classification dataset for the ranker.
//!
//! Positives come from gold fact annotations (two per QASC question, one per
//! OpenBookQA question) and from SciTail `entails` rows. Negatives come from
//! SciTail `neutral` rows and from facts retrieved with wrong answer options
//! whose similarity to every gold fact stays below a threshold. Gold fact texts
//! are never emitted as negatives.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{content_id, tokenize, Corpus, Question, Stoplist, TokenSeq};
use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::retrieval::make_step1_query;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Relevant,
    Irrelevant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    QascGold,
    ObqaGold,
    ScitailEntails,
    ScitailNeutral,
    MinedWrongAnswer,
}

impl Provenance {
    pub fn label(self) -> Label {
        match self {
            Provenance::QascGold | Provenance::ObqaGold | Provenance::ScitailEntails => Label::Relevant,
            Provenance::ScitailNeutral | Provenance::MinedWrongAnswer => Label::Irrelevant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RankExample {
    pub question_id: String,
    pub question_text: String,
    pub answer_text: String,
    pub fact_text: String,
    pub label: Label,
    pub provenance: Provenance,
}

impl RankExample {
    pub fn new(
        question_id: impl Into<String>,
        question_text: impl Into<String>,
        answer_text: impl Into<String>,
        fact_text: impl Into<String>,
        provenance: Provenance,
    ) -> Self {
        RankExample {
            question_id: question_id.into(),
            question_text: question_text.into(),
            answer_text: answer_text.into(),
            fact_text: fact_text.into(),
            label: provenance.label(),
            provenance,
        }
    }

    pub fn is_relevant(&self) -> bool {
        self.label == Label::Relevant
    }
}

/// Document similarity used to keep gold-like facts out of the negatives.
pub trait DocSimilarity: Sync {
    fn similarity(&self, a: &str, b: &str) -> f64;
}

fn jaccard(a: &TokenSeq, b: &TokenSeq) -> f64 {
    let sa: HashSet<&String> = a.iter().collect();
    let sb: HashSet<&String> = b.iter().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn new(dim: usize, vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("word vector dimension must be >= 1".into()));
        }
        if let Some((t, v)) = vectors.iter().find(|(_, v)| v.len() != dim) {
            return Err(Error::InvalidConfig(format!(
                "vector for `{t}` has dimension {}, expected {dim}",
                v.len()
            )));
        }
        Ok(WordVectors { dim, vectors })
    }

    /// Reads `token v1 … vd` lines; the first line fixes `d`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut dim = 0;
        let mut vectors = HashMap::new();
        for (i, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(tok) = parts.next() else { continue };
            let v: Vec<f64> = parts
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(path, i + 1, format!("bad component: {e}")))?;
            if dim == 0 {
                dim = v.len();
            }
            if v.len() != dim || dim == 0 {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {dim} components, got {}", v.len()),
                ));
            }
            vectors.insert(tok.to_lowercase(), v);
        }
        Self::new(dim, vectors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn mean(&self, tokens: &TokenSeq) -> Option<Vec<f64>> {
        let mut acc = vec![0.0; self.dim];
        let mut n = 0usize;
        for t in tokens.iter() {
            if let Some(v) = self.vectors.get(t) {
                acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
                n += 1;
            }
        }
        (n > 0).then(|| acc.into_iter().map(|a| a / n as f64).collect())
    }
}

impl DocSimilarity for WordVectors {
    /// Cosine of mean in-vocabulary token vectors; exact-token Jaccard when
    /// either side has no in-vocabulary token.
    fn similarity(&self, a: &str, b: &str) -> f64 {
        let (ta, tb) = (tokenize(a), tokenize(b));
        match (self.mean(&ta), self.mean(&tb)) {
            (Some(va), Some(vb)) => cosine(&va, &vb),
            _ => jaccard(&ta, &tb),
        }
    }
}

/// Hermetic fallback: cosine between TF-IDF weighted bag-of-token vectors,
/// with document frequencies taken from a reference corpus.
#[derive(Debug, Clone)]
pub struct TfIdfSimilarity {
    num_docs: usize,
    doc_freq: HashMap<String, usize>,
}

impl TfIdfSimilarity {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        let mut num_docs = 0;
        for t in texts {
            num_docs += 1;
            let uniq: HashSet<String> = tokenize(t).into_inner().into_iter().collect();
            for tok in uniq {
                *doc_freq.entry(tok).or_default() += 1;
            }
        }
        TfIdfSimilarity { num_docs, doc_freq }
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::from_texts(corpus.facts().iter().map(|f| f.text.as_str()))
    }

    fn idf(&self, tok: &str) -> f64 {
        let df = self.doc_freq.get(tok).copied().unwrap_or(0) as f64;
        ((1.0 + self.num_docs as f64) / (1.0 + df)).ln() + 1.0
    }

    fn weights(&self, tokens: &TokenSeq) -> BTreeMap<String, f64> {
        let mut w: BTreeMap<String, f64> = BTreeMap::new();
        for t in tokens.iter() {
            *w.entry(t.clone()).or_default() += 1.0;
        }
        for (t, v) in w.iter_mut() {
            *v *= self.idf(t);
        }
        w
    }
}

impl DocSimilarity for TfIdfSimilarity {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        let (ta, tb) = (tokenize(a), tokenize(b));
        if ta.is_empty() || tb.is_empty() {
            return jaccard(&ta, &tb);
        }
        let (wa, wb) = (self.weights(&ta), self.weights(&tb));
        let dot: f64 = wa.iter().filter_map(|(t, x)| wb.get(t).map(|y| x * y)).sum();
        let na = wa.values().map(|x| x * x).sum::<f64>().sqrt();
        let nb = wb.values().map(|x| x * x).sum::<f64>().sqrt();
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

pub fn doc_similarity(a: &str, b: &str, sim: &dyn DocSimilarity) -> f64 {
    sim.similarity(a, b)
}

/// Retrieved facts for one wrong answer option.
#[derive(Debug, Clone, PartialEq)]
pub struct WrongAnswerHits {
    pub answer_text: String,
    pub fact_texts: Vec<String>,
}

/// Emits `(question, wrong answer, fact, irrelevant)` for every retrieved fact
/// that is not a gold fact and whose maximum similarity to the gold facts is
/// below `threshold`. Output is sorted and deduplicated, so it does not depend
/// on the order of `hits`.
pub fn mine_negatives(
    question: &Question,
    gold_facts: &[String],
    hits: &[WrongAnswerHits],
    threshold: f64,
    sim: &dyn DocSimilarity,
) -> Vec<RankExample> {
    let gold_tokens: HashSet<TokenSeq> = gold_facts.iter().map(|g| tokenize(g)).collect();
    let mut out = Vec::new();
    for h in hits {
        for fact in &h.fact_texts {
            if gold_tokens.contains(&tokenize(fact)) {
                continue;
            }
            let max_sim = gold_facts
                .iter()
                .map(|g| sim.similarity(fact, g))
                .fold(f64::NEG_INFINITY, f64::max);
            if max_sim < threshold {
                out.push(RankExample::new(
                    &question.id,
                    &question.stem,
                    &h.answer_text,
                    fact,
                    Provenance::MinedWrongAnswer,
                ));
            }
        }
    }
    out.sort_by(|a, b| (&a.answer_text, &a.fact_text).cmp(&(&b.answer_text, &b.fact_text)));
    out.dedup();
    out
}

/// Gold facts paired with the correct answer. Two gold facts mark a QASC
/// question, one an OpenBookQA question.
pub fn positives_from_annotations(questions: &[Question]) -> Vec<RankExample> {
    let mut out = Vec::new();
    for q in questions {
        let Some(ans) = q.answer_index() else {
            log::warn!("question {} has no answer key; skipped", q.id);
            continue;
        };
        if q.gold_facts.is_empty() {
            log::warn!("question {} has no gold fact annotation; skipped", q.id);
            continue;
        }
        let prov = if q.gold_facts.len() >= 2 {
            Provenance::QascGold
        } else {
            Provenance::ObqaGold
        };
        for f in &q.gold_facts {
            out.push(RankExample::new(&q.id, &q.stem, &q.options[ans].text, f, prov));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntailmentLabel {
    Entails,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SciTailRow {
    pub premise: String,
    pub question: String,
    pub answer: String,
    pub label: EntailmentLabel,
}

/// Reads SciTail rows as JSON-lines `{premise, question, answer, label}` or as
/// tab-separated `premise<TAB>question<TAB>answer<TAB>label`.
pub fn load_scitail(path: impl AsRef<Path>) -> Result<Vec<SciTailRow>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = if line.trim_start().starts_with('{') {
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?
        } else {
            let cols: Vec<&str> = line.split('\t').collect();
            let [premise, question, answer, label] = cols[..] else {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected 4 tab-separated columns, got {}", cols.len()),
                ));
            };
            let label = match label.trim() {
                "entails" => EntailmentLabel::Entails,
                "neutral" => EntailmentLabel::Neutral,
                other => return Err(Error::parse(path, i + 1, format!("unknown label `{other}`"))),
            };
            SciTailRow {
                premise: premise.into(),
                question: question.into(),
                answer: answer.into(),
                label,
            }
        };
        out.push(row);
    }
    Ok(out)
}

pub fn from_scitail(rows: &[SciTailRow]) -> Vec<RankExample> {
    rows.iter()
        .filter(|r| {
            let ok = !r.premise.trim().is_empty() && !r.question.trim().is_empty();
            if !ok {
                log::warn!("scitail row with empty premise or question skipped");
            }
            ok
        })
        .map(|r| {
            let prov = match r.label {
                EntailmentLabel::Entails => Provenance::ScitailEntails,
                EntailmentLabel::Neutral => Provenance::ScitailNeutral,
            };
            let qid = format!("scitail:{}", content_id(&r.question));
            RankExample::new(qid, &r.question, &r.answer, &r.premise, prov)
        })
        .collect()
}

/// Collapses examples sharing (question, answer, fact); a relevant copy wins
/// over an irrelevant one. First-occurrence order is kept.
pub fn dedup_examples(examples: Vec<RankExample>) -> Vec<RankExample> {
    let mut pos: HashMap<(String, String, String), usize> = HashMap::new();
    let mut out: Vec<RankExample> = Vec::new();
    for ex in examples {
        let key = (ex.question_text.clone(), ex.answer_text.clone(), ex.fact_text.clone());
        match pos.get(&key) {
            Some(&i) => {
                if ex.is_relevant() && !out[i].is_relevant() {
                    out[i] = ex;
                }
            }
            None => {
                pos.insert(key, out.len());
                out.push(ex);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankDataConfig {
    /// Similarity threshold below which a wrong-answer fact becomes a negative.
    pub threshold: f64,
    /// Hits retrieved per wrong answer option.
    pub k: usize,
    pub valid_fraction: f64,
}

impl Default for RankDataConfig {
    fn default() -> Self {
        RankDataConfig {
            threshold: 0.70,
            k: 50,
            valid_fraction: 0.1,
        }
    }
}

/// Builds the unbalanced example pool from annotated questions (plus optional
/// SciTail rows). Mining runs in parallel per question; the result is
/// deterministic.
pub fn build_rank_dataset(
    questions: &[Question],
    index: &InvertedIndex,
    corpus: &Corpus,
    stoplist: &Stoplist,
    sim: &dyn DocSimilarity,
    scitail: &[SciTailRow],
    config: &RankDataConfig,
) -> Vec<RankExample> {
    let mut all = positives_from_annotations(questions);
    all.extend(from_scitail(scitail));

    let mined: Vec<Vec<RankExample>> = questions
        .par_iter()
        .map(|q| {
            let Some(ans) = q.answer_index() else { return Vec::new() };
            if q.gold_facts.is_empty() {
                return Vec::new();
            }
            let hits: Vec<WrongAnswerHits> = q
                .options
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != ans)
                .filter_map(|(_, o)| {
                    let query = make_step1_query(&q.stem, &o.text, stoplist).ok()?;
                    let fact_texts = index
                        .search(&query, config.k)
                        .into_iter()
                        .filter_map(|h| corpus.get(&h.fact_id).map(|f| f.text.clone()))
                        .collect();
                    Some(WrongAnswerHits {
                        answer_text: o.text.clone(),
                        fact_texts,
                    })
                })
                .collect();
            mine_negatives(q, &q.gold_facts, &hits, config.threshold, sim)
        })
        .collect();
    all.extend(mined.into_iter().flatten());

    let gold: HashSet<TokenSeq> = questions
        .iter()
        .flat_map(|q| q.gold_facts.iter().map(|g| tokenize(g)))
        .collect();
    dedup_examples(all)
        .into_iter()
        .filter(|ex| ex.is_relevant() || !gold.contains(&tokenize(&ex.fact_text)))
        .collect()
}

fn balance(examples: Vec<RankExample>, rng: &mut ChaCha8Rng) -> Vec<RankExample> {
    let (rel, irr): (Vec<usize>, Vec<usize>) = (0..examples.len()).partition(|&i| examples[i].is_relevant());
    let n = rel.len().min(irr.len());
    let mut keep: Vec<usize> = Vec::with_capacity(2 * n);
    for mut group in [rel, irr] {
        group.shuffle(rng);
        group.truncate(n);
        keep.extend(group);
    }
    keep.sort_unstable();
    let mut slots: Vec<Option<RankExample>> = examples.into_iter().map(Some).collect();
    keep.into_iter()
        .map(|i| slots[i].take().expect("unique index"))
        .collect()
}

/// Splits by question id (no question appears on both sides), then balances
/// each side exactly by uniform down-sampling of its majority class.
pub fn balance_and_split(
    examples: Vec<RankExample>,
    seed: u64,
    valid_fraction: f64,
) -> Result<(Vec<RankExample>, Vec<RankExample>)> {
    let n_rel = examples.iter().filter(|e| e.is_relevant()).count();
    if n_rel == 0 || n_rel == examples.len() {
        return Err(Error::DatasetDegenerate(format!(
            "{n_rel} relevant and {} irrelevant examples",
            examples.len() - n_rel
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut qids: Vec<&str> = examples.iter().map(|e| e.question_id.as_str()).collect();
    qids.sort_unstable();
    qids.dedup();
    qids.shuffle(&mut rng);
    let n_valid = ((qids.len() as f64) * valid_fraction.clamp(0.0, 1.0)).round() as usize;
    let valid_ids: HashSet<String> = qids[..n_valid].iter().map(|s| s.to_string()).collect();

    let (valid, train): (Vec<_>, Vec<_>) = examples.into_iter().partition(|e| valid_ids.contains(&e.question_id));
    let train = balance(train, &mut rng);
    let valid = balance(valid, &mut rng);
    Ok((train, valid))
}

pub fn write_examples(path: impl AsRef<Path>, examples: &[RankExample]) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for e in examples {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_examples(path: impl AsRef<Path>) -> Result<Vec<RankExample>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: RankExample = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if ex.label != ex.provenance.label() {
            return Err(Error::parse(path, i + 1, "label contradicts provenance"));
        }
        out.push(ex);
    }
    Ok(out)
}
