//! Independent reference implementations shared by integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use hopqa::corpus::{remove_stopwords, tokenize, Fact, Stoplist};
use hopqa::encoder::Params;
use hopqa::index::Hit;

/// Scores every fact independently with classic BM25 and a non-negative
/// Lucene IDF, then keeps the `k` best matching facts by descending score and
/// ascending id.
pub fn brute_force_bm25(facts: &[Fact], query: &[String], k1: f64, b: f64, k: usize) -> Vec<(String, f64)> {
    let n = facts.len() as f64;
    let total: usize = facts.iter().map(|f| f.tokens.len()).sum();
    let avg = if facts.is_empty() || total == 0 {
        1.0
    } else {
        total as f64 / n
    };
    let mut terms: Vec<&String> = Vec::new();
    for t in query {
        if !terms.contains(&t) {
            terms.push(t);
        }
    }
    let mut out = Vec::new();
    for f in facts {
        let mut score = 0.0;
        let mut matched = false;
        for t in &terms {
            let tf = f.tokens.iter().filter(|x| x == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            matched = true;
            let df = facts.iter().filter(|g| g.tokens.iter().any(|x| x == *t)).count() as f64;
            let idf = f64::max(0.0, (1.0 + (n - df + 0.5) / (df + 0.5)).ln());
            let norm = k1 * (1.0 - b + b * f.tokens.len() as f64 / avg);
            score += idf * tf * (k1 + 1.0) / (tf + norm);
        }
        if matched {
            out.push((f.id.clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out.truncate(k);
    out
}

/// Token set of (stem + option) xor token set of fact, after stopword removal.
pub fn symmetric_difference_oracle(stem: &str, option: &str, fact: &str, stoplist: &Stoplist) -> HashSet<String> {
    let qa: HashSet<String> = remove_stopwords(&tokenize(stem).concat(&tokenize(option)), stoplist)
        .into_inner()
        .into_iter()
        .collect();
    let f: HashSet<String> = remove_stopwords(&tokenize(fact), stoplist)
        .into_inner()
        .into_iter()
        .collect();
    qa.symmetric_difference(&f).cloned().collect()
}

/// Common facts are those in at least two lists, scored by list count times
/// the maximum score; every other fact stays in its own list.
pub fn split_oracle(lists: &[Vec<Hit>]) -> (Vec<(String, f64)>, Vec<Vec<String>>) {
    let mut stats: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for list in lists {
        let distinct: HashSet<&str> = list.iter().map(|h| h.fact_id.as_str()).collect();
        for id in distinct {
            let best = list
                .iter()
                .filter(|h| h.fact_id == id)
                .map(|h| h.score)
                .fold(f64::NEG_INFINITY, f64::max);
            let e = stats.entry(id.to_string()).or_insert((0, f64::NEG_INFINITY));
            e.0 += 1;
            e.1 = e.1.max(best);
        }
    }
    let mut common: Vec<(String, f64)> = stats
        .iter()
        .filter(|(_, (c, _))| *c >= 2)
        .map(|(id, (c, m))| (id.clone(), *c as f64 * m))
        .collect();
    common.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let shared: HashSet<&str> = common.iter().map(|(id, _)| id.as_str()).collect();
    let unique = lists
        .iter()
        .map(|l| {
            l.iter()
                .map(|h| h.fact_id.clone())
                .filter(|id| !shared.contains(id.as_str()))
                .collect()
        })
        .collect();
    (common, unique)
}

/// Worst relative error between `analytic` and central finite differences of
/// `loss` over every parameter. Entries whose magnitudes are both below
/// `floor` are compared on an absolute scale of `floor`.
pub fn max_grad_rel_error<P: Params>(
    params: &P,
    analytic: &P,
    h: f64,
    floor: f64,
    loss: impl Fn(&P) -> f64,
) -> (f64, usize) {
    let base = params.to_flat();
    let grad = analytic.to_flat();
    let mut probe = params.clone();
    let mut worst = (0.0f64, 0usize);
    for i in 0..base.len() {
        probe.set_flat(i, base[i] + h);
        let up = loss(&probe);
        probe.set_flat(i, base[i] - h);
        let down = loss(&probe);
        probe.set_flat(i, base[i]);
        let numeric = (up - down) / (2.0 * h);
        let denom = grad[i].abs().max(numeric.abs()).max(floor);
        let rel = (grad[i] - numeric).abs() / denom;
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    worst
}

/// Multiplicity of each item.
pub fn counts<T: std::hash::Hash + Eq + Clone>(items: &[T]) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for t in items {
        *m.entry(t.clone()).or_insert(0) += 1;
    }
    m
}
