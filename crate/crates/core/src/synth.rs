//! Seeded synthetic datasets with known structure, used by tests, the
//! acceptance suite and CLI smoke runs.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AnswerOption, Corpus, Fact, FactSource, Question};
use crate::error::Result;
use crate::fusion::QaExample;
use crate::index::Hit;
use crate::rankdata::{Provenance, RankExample};

const CATEGORIES: [&str; 12] = [
    "animal", "plant", "metal", "mineral", "gas", "liquid", "tool", "planet", "fungus", "insect", "fish", "bird",
];

const MARKERS: [&str; 4] = ["red", "blue", "green", "yellow"];

const FILLER: [&str; 16] = [
    "water", "light", "energy", "heat", "soil", "rock", "cell", "sound", "force", "motion", "salt", "air", "ice",
    "wind", "seed", "food",
];

/// A made-up word, distinct for distinct `(prefix, n)`.
fn word(prefix: &str, n: usize) -> String {
    format!("{prefix}{n}x")
}

fn label(i: usize) -> String {
    ((b'A' + i as u8) as char).to_string()
}

/// Ranking pairs separable by one keyword: relevant facts contain `keyword`,
/// irrelevant ones do not. Half of the `n` examples are relevant.
pub fn keyword_pairs(n: usize, seed: u64) -> Vec<RankExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut fact: Vec<&str> = FILLER.choose_multiple(&mut rng, 4).copied().collect();
            let relevant = i % 2 == 0;
            if relevant {
                let pos = rng.random_range(0..=fact.len());
                fact.insert(pos, "keyword");
            }
            let question: Vec<&str> = FILLER.choose_multiple(&mut rng, 3).copied().collect();
            let prov = if relevant {
                Provenance::QascGold
            } else {
                Provenance::MinedWrongAnswer
            };
            RankExample::new(format!("kw{i}"), question.join(" "), "answer", fact.join(" "), prov)
        })
        .collect()
}

/// Questions with per-option ranked fact lists over a shared corpus.
#[derive(Debug, Clone)]
pub struct SynthQa {
    pub questions: Vec<Question>,
    pub corpus: Corpus,
    pub lists: Vec<Vec<Vec<Hit>>>,
}

impl SynthQa {
    pub fn examples(&self) -> Result<Vec<QaExample>> {
        self.questions
            .iter()
            .zip(&self.lists)
            .map(|(q, l)| QaExample::new(q, l.clone(), &self.corpus))
            .collect()
    }
}

/// "Which of these is a kind of {category}?" over `n_options` made-up items of
/// distinct categories. The option text alone carries no information: each
/// item word is fresh, and only the option's fact `"{item} is a kind of
/// {category}"` links it to its category. Every option list also contains
/// one fact shared by all options. The gold position is uniform.
pub fn category_task(n_questions: usize, n_options: usize, item_prefix: &str, seed: u64) -> SynthQa {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared = Fact::new("shared", "every thing is a kind of thing", FactSource::Other);
    let mut facts = vec![shared.clone()];
    let mut questions = Vec::with_capacity(n_questions);
    let mut lists = Vec::with_capacity(n_questions);
    for qi in 0..n_questions {
        let cats: Vec<&str> = CATEGORIES.choose_multiple(&mut rng, n_options).copied().collect();
        let gold = rng.random_range(0..n_options);
        let mut options = Vec::with_capacity(n_options);
        let mut option_lists = Vec::with_capacity(n_options);
        for (oi, cat) in cats.iter().enumerate() {
            let item = word(item_prefix, qi * n_options + oi);
            let id = format!("{item_prefix}-q{qi}-o{oi}");
            facts.push(Fact::new(&id, format!("{item} is a kind of {cat}"), FactSource::Other));
            options.push(AnswerOption {
                label: label(oi),
                text: item,
            });
            option_lists.push(vec![Hit::new(id, 2.0), Hit::new(&shared.id, 1.0)]);
        }
        questions.push(Question {
            id: format!("{item_prefix}-q{qi}"),
            stem: format!("which of these is a kind of {}?", cats[gold]),
            options,
            answer_key: Some(label(gold)),
            gold_facts: vec![],
        });
        lists.push(option_lists);
    }
    SynthQa {
        questions,
        corpus: Corpus::from_facts(facts).expect("distinct fact ids"),
        lists,
    }
}

/// Odd-one-out questions: options are `"{item} {marker}"`, all but one
/// sharing a marker. The answer depends only on how an option relates to the
/// others, so no single option is informative on its own. No facts.
pub fn odd_one_out_task(n_questions: usize, n_options: usize, item_prefix: &str, seed: u64) -> SynthQa {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut questions = Vec::with_capacity(n_questions);
    for qi in 0..n_questions {
        let pair: Vec<&str> = MARKERS.choose_multiple(&mut rng, 2).copied().collect();
        let (common, odd) = (pair[0], pair[1]);
        let gold = rng.random_range(0..n_options);
        let options = (0..n_options)
            .map(|oi| AnswerOption {
                label: label(oi),
                text: format!(
                    "{} {}",
                    word(item_prefix, qi * n_options + oi),
                    if oi == gold { odd } else { common }
                ),
            })
            .collect();
        questions.push(Question {
            id: format!("{item_prefix}-q{qi}"),
            stem: "which one is not like the others?".into(),
            options,
            answer_key: Some(label(gold)),
            gold_facts: vec![],
        });
    }
    SynthQa {
        lists: vec![vec![Vec::new(); n_options]; n_questions],
        questions,
        corpus: Corpus::default(),
    }
}

/// A corpus for two-hop retrieval. For each question the gold first fact
/// shares words with the question and answer and introduces two bridge
/// words; the gold second fact contains the bridge words but shares no token
/// with the question or any option. Distractor facts repeat question words.
pub fn bridge_task(n_questions: usize, n_distractors: usize, seed: u64) -> (Vec<Question>, Corpus) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut facts = Vec::new();
    let mut questions = Vec::new();
    for qi in 0..n_questions {
        let w = |k: &str, j: usize| word(&format!("{k}{qi}q"), j);
        let (q1, q2, q3) = (w("s", 1), w("s", 2), w("s", 3));
        let answer = w("ans", 0);
        let (b1, b2) = (w("br", 1), w("br", 2));
        let (z1, z2) = (w("far", 1), w("far", 2));
        let fact1 = format!("{q1} {answer} {b1} {b2}");
        let fact2 = format!("{b1} {b2} {z1} {z2}");
        facts.push(Fact::new(format!("g{qi}a"), &fact1, FactSource::Other));
        facts.push(Fact::new(format!("g{qi}b"), &fact2, FactSource::Other));
        for d in 0..n_distractors {
            let mut words = vec![if d % 2 == 0 { q2.clone() } else { q3.clone() }];
            words.extend(FILLER.choose_multiple(&mut rng, 3).map(|s| s.to_string()));
            words.shuffle(&mut rng);
            facts.push(Fact::new(format!("d{qi}-{d}"), words.join(" "), FactSource::Other));
        }
        let mut options: Vec<String> = (1..4).map(|j| w("wrong", j)).collect();
        let gold = rng.random_range(0..4);
        options.insert(gold, answer);
        questions.push(Question {
            id: format!("bridge{qi}"),
            stem: format!("{q1} {q2} {q3}?"),
            options: options
                .into_iter()
                .enumerate()
                .map(|(i, text)| AnswerOption { label: label(i), text })
                .collect(),
            answer_key: Some(label(gold)),
            gold_facts: vec![fact1, fact2],
        });
    }
    (questions, Corpus::from_facts(facts).expect("distinct fact ids"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use std::collections::HashSet;

    #[test]
    fn keyword_pairs_are_balanced_and_separable() {
        let ex = keyword_pairs(20, 1);
        assert_eq!(ex.iter().filter(|e| e.is_relevant()).count(), 10);
        for e in &ex {
            assert_eq!(tokenize(&e.fact_text).contains(&"keyword".to_string()), e.is_relevant());
        }
        assert_eq!(ex, keyword_pairs(20, 1));
    }

    #[test]
    fn category_task_shape() {
        let t = category_task(30, 4, "it", 3);
        let ex = t.examples().unwrap();
        assert_eq!(ex.len(), 30);
        for (q, e) in t.questions.iter().zip(&ex) {
            let gold = q.answer_index().unwrap();
            let cat = tokenize(&q.stem).into_inner().pop().unwrap();
            let fact = &e.fact_tokens[&e.facts[gold][0].fact_id];
            assert_eq!(fact.last(), Some(&cat));
            assert_eq!(
                e.facts
                    .iter()
                    .filter(|l| e.fact_tokens[&l[0].fact_id].last() == Some(&cat))
                    .count(),
                1
            );
        }
    }

    #[test]
    fn odd_one_out_has_one_odd_marker() {
        let t = odd_one_out_task(20, 4, "oo", 5);
        for q in &t.questions {
            let markers: Vec<String> = q.options.iter().map(|o| tokenize(&o.text)[1].clone()).collect();
            let gold = q.answer_index().unwrap();
            let distinct: HashSet<_> = markers.iter().collect();
            assert_eq!(distinct.len(), 2);
            assert_eq!(markers.iter().filter(|m| **m == markers[gold]).count(), 1);
        }
    }

    #[test]
    fn bridge_fact_is_disjoint_from_question() {
        let (qs, corpus) = bridge_task(5, 10, 2);
        for q in &qs {
            let mut qa: HashSet<String> = tokenize(&q.stem).into_inner().into_iter().collect();
            for o in &q.options {
                qa.extend(tokenize(&o.text).into_inner());
            }
            let f2 = tokenize(&q.gold_facts[1]);
            assert!(f2.iter().all(|t| !qa.contains(t)));
            assert!(corpus.find_text(&q.gold_facts[1]).is_some());
        }
    }
}
