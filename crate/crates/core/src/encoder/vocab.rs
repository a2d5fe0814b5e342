use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::TokenSeq;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const CLS: usize = 2;
pub const SEP: usize = 3;

const SPECIALS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];

/// Word-level vocabulary. Ids are dense from 0; the four special tokens take
/// ids 0..4 and regular tokens follow in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from token sequences, keeping tokens seen at least
    /// `min_count` times.
    pub fn build<'a>(seqs: impl IntoIterator<Item = &'a TokenSeq>, min_count: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in seqs {
            for t in s.iter() {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let tokens = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(
                counts
                    .into_iter()
                    .filter(|&(_, c)| c >= min_count)
                    .map(|(t, _)| t.to_string()),
            )
            .collect::<Vec<_>>();
        Vocab::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn ids(&self, seq: &TokenSeq) -> Vec<usize> {
        seq.iter().map(|t| self.id(t)).collect()
    }
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, ids }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

/// Token ids with a parallel attention mask (`true` = attend).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncInput {
    pub ids: Vec<usize>,
    pub mask: Vec<bool>,
}

impl EncInput {
    pub fn new(ids: Vec<usize>) -> Self {
        let mask = vec![true; ids.len()];
        EncInput { ids, mask }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Appends `n` masked padding positions.
    pub fn padded(&self, n: usize) -> Self {
        let mut out = self.clone();
        out.ids.extend(std::iter::repeat_n(PAD, n));
        out.mask.extend(std::iter::repeat_n(false, n));
        out
    }
}
