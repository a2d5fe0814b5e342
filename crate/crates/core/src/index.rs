//! In-memory inverted index with Okapi BM25 scoring.
//!
//! ```text
//! score(D, Q) = Σ_{t ∈ set(Q)} idf(t) · tf(t, D)·(k1 + 1) / (tf(t, D) + k1·(1 − b + b·|D|/avgdl))
//! idf(t)      = max(0, ln(1 + (N − df(t) + 0.5) / (df(t) + 0.5)))
//! ```
//!
//! Documents are stored in ascending fact-id order, so the internal document
//! number order coincides with the id tie-break order used by [`search`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Fact, TokenSeq};
use crate::error::{Error, Result};

pub const SNAPSHOT_FORMAT: &str = "hopqa-index";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    doc: u32,
    tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub fact_id: String,
    pub score: f64,
}

impl Hit {
    pub fn new(fact_id: impl Into<String>, score: f64) -> Self {
        Hit {
            fact_id: fact_id.into(),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    params: Bm25Params,
    ids: Vec<String>,
    doc_of: HashMap<String, u32>,
    doc_len: Vec<u32>,
    avg_len: f64,
    postings: HashMap<String, Vec<Posting>>,
}

pub fn build_index(facts: &[Fact], params: Bm25Params) -> Result<InvertedIndex> {
    let mut order: Vec<&Fact> = facts.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    for w in order.windows(2) {
        if w[0].id == w[1].id {
            return Err(Error::DuplicateId(w[0].id.clone()));
        }
    }
    let docs = order.iter().map(|f| (f.id.clone(), &f.tokens));
    Ok(InvertedIndex::from_docs(docs, params))
}

impl InvertedIndex {
    fn from_docs<'a>(docs: impl Iterator<Item = (String, &'a TokenSeq)>, params: Bm25Params) -> Self {
        let mut ids = Vec::new();
        let mut doc_len = Vec::new();
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        for (doc, (id, tokens)) in docs.enumerate() {
            let doc = doc as u32;
            let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
            for t in tokens.iter() {
                *counts.entry(t.as_str()).or_default() += 1;
            }
            for (t, tf) in counts {
                postings.entry(t.to_string()).or_default().push(Posting { doc, tf });
            }
            ids.push(id);
            doc_len.push(tokens.len() as u32);
        }
        let avg_len = if doc_len.is_empty() {
            0.0
        } else {
            doc_len.iter().map(|&l| l as f64).sum::<f64>() / doc_len.len() as f64
        };
        let doc_of = ids.iter().enumerate().map(|(i, id)| (id.clone(), i as u32)).collect();
        InvertedIndex {
            params,
            ids,
            doc_of,
            doc_len,
            avg_len,
            postings,
        }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    /// Number of indexed documents.
    pub fn num_docs(&self) -> usize {
        self.ids.len()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    /// Overrides the average document length used for length normalization.
    pub fn with_avg_len(mut self, avg_len: f64) -> Self {
        self.avg_len = avg_len;
        self
    }

    pub fn fact_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, fact_id: &str) -> bool {
        self.doc_of.contains_key(fact_id)
    }

    pub fn doc_len(&self, fact_id: &str) -> Option<usize> {
        self.doc_of.get(fact_id).map(|&d| self.doc_len[d as usize] as usize)
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// `(fact id, term frequency)` pairs for `term`, in ascending id order.
    pub fn postings(&self, term: &str) -> Vec<(&str, u32)> {
        self.postings
            .get(term)
            .map(|ps| ps.iter().map(|p| (self.ids[p.doc as usize].as_str(), p.tf)).collect())
            .unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.ids.len() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln().max(0.0)
    }

    fn length_norm(&self, doc: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let avg = if self.avg_len > 0.0 { self.avg_len } else { 1.0 };
        k1 * (1.0 - b + b * self.doc_len[doc as usize] as f64 / avg)
    }

    fn term_score(&self, idf: f64, tf: u32, norm: f64) -> f64 {
        let tf = tf as f64;
        idf * tf * (self.params.k1 + 1.0) / (tf + norm)
    }

    pub fn bm25_score(&self, query: &TokenSeq, fact_id: &str) -> Result<f64> {
        let doc = *self
            .doc_of
            .get(fact_id)
            .ok_or_else(|| Error::UnknownFact(fact_id.to_string()))?;
        let norm = self.length_norm(doc);
        let mut score = 0.0;
        for term in unique_terms(query) {
            let Some(ps) = self.postings.get(term) else { continue };
            if let Ok(i) = ps.binary_search_by_key(&doc, |p| p.doc) {
                score += self.term_score(self.idf(term), ps[i].tf, norm);
            }
        }
        Ok(score)
    }

    /// Top-`k` documents containing at least one query term, by descending
    /// score and then ascending fact id.
    pub fn search(&self, query: &TokenSeq, k: usize) -> Vec<Hit> {
        let mut scores = vec![0.0f64; self.ids.len()];
        let mut seen = vec![false; self.ids.len()];
        let mut touched = Vec::new();
        for term in unique_terms(query) {
            let Some(ps) = self.postings.get(term) else { continue };
            let idf = self.idf(term);
            for p in ps {
                if !seen[p.doc as usize] {
                    seen[p.doc as usize] = true;
                    touched.push(p.doc);
                }
                scores[p.doc as usize] += self.term_score(idf, p.tf, self.length_norm(p.doc));
            }
        }
        touched.sort_by(|&a, &b| scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b)));
        touched
            .into_iter()
            .take(k)
            .map(|d| Hit::new(self.ids[d as usize].clone(), scores[d as usize]))
            .collect()
    }
}

pub fn search(index: &InvertedIndex, query: &TokenSeq, k: usize) -> Vec<Hit> {
    index.search(query, k)
}

pub fn bm25_score(index: &InvertedIndex, query: &TokenSeq, fact_id: &str) -> Result<f64> {
    index.bm25_score(query, fact_id)
}

/// Query terms with duplicates collapsed, in first-appearance order.
fn unique_terms(query: &TokenSeq) -> Vec<&str> {
    let mut seen = HashSet::new();
    query.iter().map(String::as_str).filter(|t| seen.insert(*t)).collect()
}

#[derive(Serialize, Deserialize)]
struct DocEntry {
    id: String,
    len: u32,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format: String,
    version: u32,
    params: Bm25Params,
    docs: Vec<DocEntry>,
    postings: BTreeMap<String, Vec<(String, u32)>>,
    facts: Vec<Fact>,
}

/// Writes the index and its fact store as a versioned JSON container. Terms
/// and postings are emitted in sorted order, so equal indexes serialize to
/// identical bytes.
pub fn save_snapshot(path: impl AsRef<Path>, index: &InvertedIndex, facts: &[Fact]) -> Result<()> {
    let mut facts: Vec<Fact> = facts.to_vec();
    facts.sort_by(|a, b| a.id.cmp(&b.id));
    let snap = Snapshot {
        format: SNAPSHOT_FORMAT.to_string(),
        version: SNAPSHOT_VERSION,
        params: index.params,
        docs: index
            .ids
            .iter()
            .zip(&index.doc_len)
            .map(|(id, &len)| DocEntry { id: id.clone(), len })
            .collect(),
        postings: index
            .postings
            .iter()
            .map(|(t, ps)| {
                let list = ps.iter().map(|p| (index.ids[p.doc as usize].clone(), p.tf)).collect();
                (t.clone(), list)
            })
            .collect(),
        facts,
    };
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer(&mut w, &snap)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<(InvertedIndex, Vec<Fact>)> {
    let snap: Snapshot = serde_json::from_slice(&fs::read(path)?)?;
    if snap.format != SNAPSHOT_FORMAT || snap.version != SNAPSHOT_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported index snapshot {} v{}",
            snap.format, snap.version
        )));
    }
    let ids: Vec<String> = snap.docs.iter().map(|d| d.id.clone()).collect();
    let doc_len: Vec<u32> = snap.docs.iter().map(|d| d.len).collect();
    let doc_of: HashMap<String, u32> = ids.iter().enumerate().map(|(i, id)| (id.clone(), i as u32)).collect();
    if doc_of.len() != ids.len() {
        return Err(Error::InvalidConfig("duplicate document id in snapshot".into()));
    }
    let mut postings = HashMap::new();
    for (term, list) in snap.postings {
        let mut ps = Vec::with_capacity(list.len());
        for (id, tf) in list {
            let doc = *doc_of.get(&id).ok_or(Error::UnknownFact(id))?;
            ps.push(Posting { doc, tf });
        }
        postings.insert(term, ps);
    }
    let avg_len = if doc_len.is_empty() {
        0.0
    } else {
        doc_len.iter().map(|&l| l as f64).sum::<f64>() / doc_len.len() as f64
    };
    let index = InvertedIndex {
        params: snap.params,
        ids,
        doc_of,
        doc_len,
        avg_len,
        postings,
    };
    Ok((index, snap.facts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, FactSource};
    use proptest::prelude::*;

    fn fact(id: &str, text: &str) -> Fact {
        Fact::new(id, text, FactSource::Other)
    }

    fn toy() -> Vec<Fact> {
        vec![
            fact("a", "heat rises up"),
            fact("b", "cold air sinks"),
            fact("c", "heat heat moves"),
        ]
    }

    #[test]
    fn empty_index() {
        let idx = build_index(&[], Bm25Params::default()).unwrap();
        assert_eq!(idx.num_docs(), 0);
        assert!(idx.search(&tokenize("heat"), 5).is_empty());
    }

    #[test]
    fn postings_by_hand() {
        let idx = build_index(&toy(), Bm25Params::default()).unwrap();
        assert_eq!(idx.postings("heat"), vec![("a", 1), ("c", 2)]);
        assert_eq!(idx.postings("sinks"), vec![("b", 1)]);
        assert_eq!(idx.postings("nothing"), vec![]);
        assert_eq!(idx.doc_len("c"), Some(3));
        assert_eq!(idx.avg_len(), 3.0);
        assert_eq!(idx.terms().count(), 7);
    }

    #[test]
    fn single_term_by_hand() {
        // N=3, df(heat)=2: idf = ln(1 + 1.5/2.5) = ln 1.6; all docs have length 3 = avgdl.
        let idx = build_index(&toy(), Bm25Params::default()).unwrap();
        let idf = 1.6f64.ln();
        let expect_c = idf * 2.0 * 2.2 / (2.0 + 1.2);
        let expect_a = idf * 1.0 * 2.2 / (1.0 + 1.2);
        let q = tokenize("heat");
        assert!((idx.bm25_score(&q, "c").unwrap() - expect_c).abs() < 1e-12);
        assert!((idx.bm25_score(&q, "a").unwrap() - expect_a).abs() < 1e-12);
        assert_eq!(idx.bm25_score(&q, "b").unwrap(), 0.0);
        assert_eq!(idx.bm25_score(&TokenSeq::default(), "a").unwrap(), 0.0);
        assert!(matches!(idx.bm25_score(&q, "zz"), Err(Error::UnknownFact(_))));
    }

    #[test]
    fn repeated_query_terms_count_once() {
        let idx = build_index(&toy(), Bm25Params::default()).unwrap();
        let once = idx.bm25_score(&tokenize("heat"), "c").unwrap();
        let twice = idx.bm25_score(&tokenize("heat heat"), "c").unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn search_ties_and_short_lists() {
        let facts = vec![fact("z", "owls hunt"), fact("m", "owls hunt"), fact("q", "mice run")];
        let idx = build_index(&facts, Bm25Params::default()).unwrap();
        let hits = idx.search(&tokenize("owls"), 10);
        let ids: Vec<_> = hits.iter().map(|h| h.fact_id.as_str()).collect();
        assert_eq!(ids, vec!["m", "z"]);
        assert_eq!(hits[0].score, hits[1].score);
        assert_eq!(idx.search(&tokenize("owls"), 1).len(), 1);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let facts = vec![fact("a", "x"), fact("a", "y")];
        assert!(matches!(
            build_index(&facts, Bm25Params::default()),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn rebuild_is_identical_and_order_free() {
        let mut facts = toy();
        let a = build_index(&facts, Bm25Params::default()).unwrap();
        facts.reverse();
        let b = build_index(&facts, Bm25Params::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("idx.json");
        let facts = toy();
        let idx = build_index(&facts, Bm25Params { k1: 0.9, b: 0.4 }).unwrap();
        save_snapshot(&p, &idx, &facts).unwrap();
        let bytes = fs::read(&p).unwrap();
        let (back, back_facts) = load_snapshot(&p).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back_facts, facts);
        save_snapshot(&p, &back, &back_facts).unwrap();
        assert_eq!(fs::read(&p).unwrap(), bytes);
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["a", "b", "c", "d", "e", "f", "g"]).prop_map(String::from)
    }

    proptest! {
        // Adding a document with a disjoint vocabulary changes N (hence idf by a
        // common factor per term) but, with avg_len pinned, never the order of
        // single-term results.
        #[test]
        fn disjoint_document_keeps_order(
            docs in prop::collection::vec(prop::collection::vec(word(), 1..6), 1..12),
            term in word(),
        ) {
            let facts: Vec<Fact> = docs
                .iter()
                .enumerate()
                .map(|(i, d)| fact(&format!("d{i:02}"), &d.join(" ")))
                .collect();
            let base = build_index(&facts, Bm25Params::default()).unwrap();
            let pinned = base.avg_len();
            let mut more = facts.clone();
            more.push(fact("zz", "xylophone quartz"));
            let grown = build_index(&more, Bm25Params::default()).unwrap().with_avg_len(pinned);
            let q = TokenSeq::new(vec![term]);
            let ids = |hs: Vec<Hit>| hs.into_iter().map(|h| h.fact_id).collect::<Vec<_>>();
            prop_assert_eq!(ids(base.search(&q, 100)), ids(grown.search(&q, 100)));
        }
    }
}
