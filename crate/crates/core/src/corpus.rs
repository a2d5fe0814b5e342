//! Fact corpora, question sets, tokenization and stopwords.
//!
//! Tokenizer rules, applied to the lowercased input:
//!
//! - a token is a maximal run of alphanumeric characters;
//! - `:` and `.` are kept inside a token only when both neighbours are
//!   ASCII digits, so `2:00` and `3.5` survive while `e.g.` splits;
//! - every other character is a boundary and is dropped.
//!
//! ARC normalization keeps ASCII letters, digits and whitespace, plus commas,
//! a `.` that ends a sentence or sits between digits, a `-` between two
//! alphanumerics and a `:` between digits. Non-ASCII characters are deleted,
//! other punctuation becomes a space, and whitespace is collapsed.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Ordered sequence of lowercase, non-empty tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| !t.is_empty()));
        TokenSeq(tokens)
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    /// Renders the tokens back to a single space-separated string.
    pub fn to_text(&self) -> String {
        self.0.join(" ")
    }

    /// Concatenation, preserving order.
    pub fn concat(&self, other: &TokenSeq) -> TokenSeq {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        TokenSeq(v)
    }
}

impl Deref for TokenSeq {
    type Target = [String];
    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSeq(iter.into_iter().map(Into::into).collect())
    }
}

pub fn tokenize(text: &str) -> TokenSeq {
    let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            cur.push(c);
            continue;
        }
        let numeral_joint = (c == ':' || c == '.')
            && i > 0
            && chars[i - 1].is_ascii_digit()
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if numeral_joint && !cur.is_empty() {
            cur.push(c);
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    TokenSeq(tokens)
}

/// A set of tokens to drop from queries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist(HashSet<String>);

impl Stoplist {
    pub fn empty() -> Self {
        Stoplist(HashSet::new())
    }

    /// The stoplist shipped with the crate (NLTK English ∪ `stop-words` English,
    /// without `am`, which marks times of day in science questions).
    pub fn default_english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    /// One entry per line; entries are run through [`tokenize`], so `don't`
    /// contributes `don` and `t`.
    pub fn parse(text: &str) -> Self {
        Stoplist(text.lines().flat_map(|l| tokenize(l).into_inner()).collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stoplist {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stoplist(iter.into_iter().map(Into::into).collect())
    }
}

pub fn remove_stopwords(seq: &TokenSeq, stoplist: &Stoplist) -> TokenSeq {
    TokenSeq(seq.iter().filter(|t| !stoplist.contains(t)).cloned().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactSource {
    Openbook,
    Qasc,
    Arc,
    Other,
}

impl std::str::FromStr for FactSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "openbook" | "obqa" => Ok(FactSource::Openbook),
            "qasc" => Ok(FactSource::Qasc),
            "arc" => Ok(FactSource::Arc),
            "other" => Ok(FactSource::Other),
            _ => Err(Error::InvalidConfig(format!("unknown fact source `{s}`"))),
        }
    }
}

/// How fact ids are assigned when the input does not carry them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdMode {
    /// `f` + first 16 hex digits of SHA-256 over the normalized text.
    #[default]
    ContentHash,
    /// `L` + zero-padded 1-based line number.
    LineNumber,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub id: String,
    pub text: String,
    pub tokens: TokenSeq,
    pub source: FactSource,
}

impl Fact {
    pub fn new(id: impl Into<String>, text: impl Into<String>, source: FactSource) -> Self {
        let text = text.into();
        Fact {
            id: id.into(),
            tokens: tokenize(&text),
            text,
            source,
        }
    }
}

pub fn content_id(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    format!("f{}", &hex::encode(digest)[..16])
}

fn strip_arc(text: &str) -> String {
    let chars: Vec<char> = text.chars().filter(char::is_ascii).collect();
    let mut out = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        let prev = i.checked_sub(1).map(|j| chars[j]);
        let next = chars.get(i + 1).copied();
        let digits_around = prev.is_some_and(|p| p.is_ascii_digit()) && next.is_some_and(|n| n.is_ascii_digit());
        let keep = match c {
            c if c.is_ascii_alphanumeric() || c.is_ascii_whitespace() => true,
            ',' => true,
            '.' => digits_around || next.is_none_or(|n| n.is_ascii_whitespace()),
            '-' => prev.is_some_and(|p| p.is_ascii_alphanumeric()) && next.is_some_and(|n| n.is_ascii_alphanumeric()),
            ':' => digits_around,
            _ => false,
        };
        out.push(if keep { c } else { ' ' });
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalizes one raw fact line. ARC text is stripped; other sources are only
/// trimmed. The id is the content hash of the normalized text.
pub fn normalize_fact(text: &str, source: FactSource) -> Result<Fact> {
    let text = match source {
        FactSource::Arc => strip_arc(text),
        _ => text.trim().to_string(),
    };
    if text.is_empty() {
        return Err(Error::EmptyFact);
    }
    Ok(Fact::new(content_id(&text), text, source))
}

/// A fact collection with lookup by id and by exact text.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    facts: Vec<Fact>,
    by_id: HashMap<String, usize>,
    by_text: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids unless both entries carry the
    /// same text (content-hash dedup across sources), in which case the first
    /// one wins.
    pub fn from_facts(facts: impl IntoIterator<Item = Fact>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for f in facts {
            corpus.insert(f)?;
        }
        Ok(corpus)
    }

    pub fn insert(&mut self, fact: Fact) -> Result<bool> {
        if let Some(&i) = self.by_id.get(&fact.id) {
            if self.facts[i].text == fact.text {
                return Ok(false);
            }
            return Err(Error::DuplicateId(fact.id));
        }
        let i = self.facts.len();
        self.by_id.insert(fact.id.clone(), i);
        self.by_text.entry(fact.text.clone()).or_insert(i);
        self.facts.push(fact);
        Ok(true)
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Fact> {
        self.by_id.get(id).map(|&i| &self.facts[i])
    }

    pub fn find_text(&self, text: &str) -> Option<&Fact> {
        self.by_text.get(text.trim()).map(|&i| &self.facts[i])
    }

    /// Resolves a gold annotation to a fact id: exact text lookup first, then
    /// the content hash of the trimmed text.
    pub fn resolve_id(&self, text: &str) -> String {
        self.find_text(text)
            .map(|f| f.id.clone())
            .unwrap_or_else(|| content_id(text.trim()))
    }
}

#[derive(Deserialize)]
struct FactRow {
    #[serde(default)]
    id: Option<String>,
    text: String,
    #[serde(default)]
    source: Option<FactSource>,
}

#[derive(Serialize)]
struct FactRowOut<'a> {
    id: &'a str,
    text: &'a str,
    source: FactSource,
}

fn is_jsonl(path: &Path, first_line: Option<&str>) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl") | Some("json"))
        || first_line.is_some_and(|l| l.trim_start().starts_with('{'))
}

/// Loads facts from a plain-text file (one fact per line) or JSON-lines with
/// `{"id","text"}` fields. Blank lines are skipped. Explicit or line-number ids
/// must be unique; content-hash ids deduplicate silently.
pub fn load_corpus(path: impl AsRef<Path>, source: FactSource, id_mode: IdMode) -> Result<Vec<Fact>> {
    let path = path.as_ref();
    let lines: Vec<String> = BufReader::new(fs::File::open(path)?)
        .lines()
        .collect::<std::io::Result<_>>()?;
    let jsonl = is_jsonl(path, lines.iter().find(|l| !l.trim().is_empty()).map(String::as_str));

    let mut out = Vec::new();
    let mut seen: HashMap<String, String> = HashMap::new();
    for (i, line) in lines.iter().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (explicit_id, raw, src) = if jsonl {
            let row: FactRow = serde_json::from_str(line).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
            (row.id, row.text, row.source.unwrap_or(source))
        } else {
            (None, line.clone(), source)
        };
        let mut fact = normalize_fact(&raw, src).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        let strict = match (explicit_id, id_mode) {
            (Some(id), _) => {
                fact.id = id;
                true
            }
            (None, IdMode::LineNumber) => {
                fact.id = format!("L{line_no:07}");
                true
            }
            (None, IdMode::ContentHash) => false,
        };
        match seen.get(&fact.id) {
            Some(_) if strict => return Err(Error::parse(path, line_no, format!("duplicate id `{}`", fact.id))),
            Some(_) => continue,
            None => {
                seen.insert(fact.id.clone(), fact.text.clone());
                out.push(fact);
            }
        }
    }
    Ok(out)
}

pub fn write_corpus(path: impl AsRef<Path>, facts: &[Fact]) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for f in facts {
        let row = FactRowOut {
            id: &f.id,
            text: &f.text,
            source: f.source,
        };
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub id: String,
    pub stem: String,
    pub options: Vec<AnswerOption>,
    pub answer_key: Option<String>,
    /// Annotated supporting fact texts, in order (fact1, fact2).
    pub gold_facts: Vec<String>,
}

impl Question {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.options.len();
        if !(2..=26).contains(&n) {
            return Err(format!("question `{}` has {n} options, expected 2..=26", self.id));
        }
        let mut labels = HashSet::new();
        for o in &self.options {
            if !labels.insert(o.label.as_str()) {
                return Err(format!("question `{}` repeats option label `{}`", self.id, o.label));
            }
        }
        if let Some(k) = &self.answer_key {
            if !labels.contains(k.as_str()) {
                return Err(format!("question `{}` answer key `{k}` matches no option", self.id));
            }
        }
        Ok(())
    }

    pub fn answer_index(&self) -> Option<usize> {
        let key = self.answer_key.as_ref()?;
        self.options.iter().position(|o| &o.label == key)
    }

    pub fn option_texts(&self) -> Vec<&str> {
        self.options.iter().map(|o| o.text.as_str()).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct StemWire {
    stem: String,
    choices: Vec<AnswerOption>,
}

#[derive(Serialize, Deserialize)]
struct QuestionWire {
    id: String,
    question: StemWire,
    #[serde(rename = "answerKey", default, skip_serializing_if = "Option::is_none")]
    answer_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fact1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fact2: Option<String>,
}

impl From<QuestionWire> for Question {
    fn from(w: QuestionWire) -> Self {
        Question {
            id: w.id,
            stem: w.question.stem,
            options: w.question.choices,
            answer_key: w.answer_key.filter(|k| !k.is_empty()),
            gold_facts: [w.fact1, w.fact2]
                .into_iter()
                .flatten()
                .filter(|f| !f.trim().is_empty())
                .collect(),
        }
    }
}

impl From<&Question> for QuestionWire {
    fn from(q: &Question) -> Self {
        QuestionWire {
            id: q.id.clone(),
            question: StemWire {
                stem: q.stem.clone(),
                choices: q.options.clone(),
            },
            answer_key: q.answer_key.clone(),
            fact1: q.gold_facts.first().cloned(),
            fact2: q.gold_facts.get(1).cloned(),
        }
    }
}

pub fn parse_question_line(line: &str) -> std::result::Result<Question, String> {
    let wire: QuestionWire = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let q = Question::from(wire);
    q.validate()?;
    Ok(q)
}

pub fn question_to_json(q: &Question) -> String {
    serde_json::to_string(&QuestionWire::from(q)).expect("question serializes")
}

pub fn load_questions(path: impl AsRef<Path>) -> Result<Vec<Question>> {
    let path = path.as_ref();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let q = parse_question_line(&line).map_err(|m| Error::parse(path, i + 1, m))?;
        if !ids.insert(q.id.clone()) {
            return Err(Error::parse(path, i + 1, format!("duplicate id `{}`", q.id)));
        }
        out.push(q);
    }
    Ok(out)
}

pub fn write_questions(path: impl AsRef<Path>, questions: &[Question]) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for q in questions {
        writeln!(w, "{}", question_to_json(q))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(v: &[&str]) -> TokenSeq {
        v.iter().copied().collect()
    }

    #[test]
    fn tokenize_question() {
        assert_eq!(
            tokenize("Owls are likely to hunt at?"),
            toks(&["owls", "are", "likely", "to", "hunt", "at"])
        );
        assert_eq!(tokenize(""), TokenSeq::default());
        assert_eq!(tokenize("2:00 AM"), toks(&["2:00", "am"]));
    }

    #[test]
    fn tokenize_numeral_rules() {
        assert_eq!(tokenize("pH 3.5, e.g. x:y"), toks(&["ph", "3.5", "e", "g", "x", "y"]));
        assert_eq!(tokenize("ends at 10."), toks(&["ends", "at", "10"]));
        assert_eq!(tokenize(":5 don't"), toks(&["5", "don", "t"]));
    }

    #[test]
    fn stopword_removal() {
        let stop: Stoplist = ["are", "to", "at"].into_iter().collect();
        let seq = toks(&["owls", "are", "likely", "to", "hunt", "at"]);
        assert_eq!(remove_stopwords(&seq, &stop), toks(&["owls", "likely", "hunt"]));
        assert_eq!(remove_stopwords(&TokenSeq::default(), &stop), TokenSeq::default());
        let clean = toks(&["owls", "hunt"]);
        assert_eq!(remove_stopwords(&clean, &stop), clean);
    }

    #[test]
    fn shipped_stoplist() {
        let s = Stoplist::default_english();
        for w in ["are", "to", "at", "the", "of", "don", "t", "would"] {
            assert!(s.contains(w), "{w}");
        }
        for w in ["am", "owls", "hunt", "likely"] {
            assert!(!s.contains(w), "{w}");
        }
    }

    #[test]
    fn normalize_sources() {
        let f = normalize_fact("a radio is used for communication.", FactSource::Qasc).unwrap();
        assert_eq!(f.text, "a radio is used for communication.");
        let f = normalize_fact("café — heat rises ™", FactSource::Arc).unwrap();
        assert_eq!(f.text, "caf heat rises");
        assert!(matches!(normalize_fact("", FactSource::Arc), Err(Error::EmptyFact)));
        assert!(matches!(normalize_fact("™ — ", FactSource::Arc), Err(Error::EmptyFact)));
    }

    #[test]
    fn arc_keeps_structural_punctuation() {
        let f = normalize_fact("At 2:00, well-known (sic) facts; pH 3.5 end.", FactSource::Arc).unwrap();
        assert_eq!(f.text, "At 2:00, well-known sic facts pH 3.5 end.");
    }

    #[test]
    fn content_ids_dedupe() {
        let a = normalize_fact("heat rises", FactSource::Qasc).unwrap();
        let b = normalize_fact("  heat rises ", FactSource::Openbook).unwrap();
        assert_eq!(a.id, b.id);
        let c = Corpus::from_facts([a, b]).unwrap();
        assert_eq!(c.len(), 1);
        let clash = Fact::new("x", "one", FactSource::Other);
        let clash2 = Fact::new("x", "two", FactSource::Other);
        assert!(matches!(
            Corpus::from_facts([clash, clash2]),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn load_plain_and_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("facts.txt");
        fs::write(&p, "heat rises\n\nowls hunt at night\nheat rises\n").unwrap();
        let facts = load_corpus(&p, FactSource::Openbook, IdMode::ContentHash).unwrap();
        assert_eq!(facts.len(), 2);
        let err = load_corpus(&p, FactSource::Openbook, IdMode::LineNumber).unwrap();
        assert_eq!(err.len(), 3);
        assert_eq!(err[1].id, "L0000003");

        let j = dir.path().join("facts.jsonl");
        fs::write(&j, "{\"id\":\"a\",\"text\":\"one\"}\n{\"id\":\"a\",\"text\":\"two\"}\n").unwrap();
        match load_corpus(&j, FactSource::Other, IdMode::ContentHash) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        fs::write(&j, "{\"id\":\"a\",\"text\":\"one\"}\n{\"id\":\"b\"\n").unwrap();
        match load_corpus(&j, FactSource::Other, IdMode::ContentHash) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn corpus_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("facts.jsonl");
        let facts = vec![
            Fact::new("a", "heat rises", FactSource::Qasc),
            Fact::new("b", "owls hunt at night", FactSource::Openbook),
        ];
        write_corpus(&p, &facts).unwrap();
        let back = load_corpus(&p, FactSource::Other, IdMode::ContentHash).unwrap();
        assert_eq!(back, facts);
    }

    #[test]
    fn question_round_trip() {
        let line = r#"{"id":"q1","question":{"stem":"Owls are likely to hunt at?","choices":[{"label":"A","text":"3:00 PM"},{"label":"B","text":"2:00 AM"}]},"answerKey":"B","fact1":"owls hunt at night"}"#;
        let q = parse_question_line(line).unwrap();
        assert_eq!(q.answer_index(), Some(1));
        assert_eq!(q.gold_facts, vec!["owls hunt at night".to_string()]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.jsonl");
        write_questions(&p, std::slice::from_ref(&q)).unwrap();
        let back = load_questions(&p).unwrap();
        assert_eq!(back, vec![q.clone()]);
        write_questions(&p, &back).unwrap();
        assert_eq!(load_questions(&p).unwrap(), back);
    }

    #[test]
    fn question_validation() {
        let bad_key = r#"{"id":"q","question":{"stem":"s","choices":[{"label":"A","text":"x"},{"label":"B","text":"y"}]},"answerKey":"C"}"#;
        assert!(parse_question_line(bad_key).is_err());
        let dup = r#"{"id":"q","question":{"stem":"s","choices":[{"label":"A","text":"x"},{"label":"A","text":"y"}]}}"#;
        assert!(parse_question_line(dup).is_err());
        let one = r#"{"id":"q","question":{"stem":"s","choices":[{"label":"A","text":"x"}]}}"#;
        assert!(parse_question_line(one).is_err());
    }

    proptest! {
        #[test]
        fn tokenize_idempotent(s in "[a-zA-Z0-9 :.,?!'-]{0,40}") {
            let t = tokenize(&s);
            prop_assert_eq!(tokenize(&t.to_text()), t.clone());
            prop_assert!(t.iter().all(|x| !x.is_empty()));
        }

        #[test]
        fn stopwords_preserve_order(
            seq in proptest::collection::vec("[a-e]{1,2}", 0..30),
            stop in proptest::collection::hash_set("[a-e]{1,2}", 0..8),
        ) {
            let seq: TokenSeq = seq.into_iter().collect();
            let stoplist: Stoplist = stop.iter().cloned().collect();
            prop_assert_eq!(remove_stopwords(&seq, &Stoplist::empty()), seq.clone());
            let out = remove_stopwords(&seq, &stoplist);
            // survivors form a subsequence of the input
            let mut it = seq.iter();
            for t in out.iter() {
                prop_assert!(!stoplist.contains(t));
                prop_assert!(it.any(|s| s == t));
            }
            prop_assert_eq!(out.len(), seq.iter().filter(|t| !stoplist.contains(t)).count());
        }
    }
}
