mod common;

use std::collections::HashSet;

use proptest::prelude::*;

use hopqa::corpus::{Fact, FactSource, Stoplist, TokenSeq};
use hopqa::index::{build_index, Bm25Params};
use hopqa::retrieval::{make_step2_query, retrieve, RetrievalConfig};
use hopqa::synth::bridge_task;

use common::{brute_force_bm25, symmetric_difference_oracle};

fn word() -> impl Strategy<Value = String> {
    (0usize..12).prop_map(|i| format!("t{i}"))
}

fn corpus() -> impl Strategy<Value = Vec<Fact>> {
    prop::collection::vec(prop::collection::vec(word(), 1..8), 1..25).prop_map(|docs| {
        docs.into_iter()
            .enumerate()
            .map(|(i, words)| Fact::new(format!("d{:02}", (i * 7) % 25), words.join(" "), FactSource::Other))
            .collect::<Vec<_>>()
    })
}

fn unique_ids(facts: Vec<Fact>) -> Vec<Fact> {
    let mut seen = HashSet::new();
    facts.into_iter().filter(|f| seen.insert(f.id.clone())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn search_equals_score_all_and_sort(
        facts in corpus().prop_map(unique_ids),
        query in prop::collection::vec(word(), 1..5),
        k in 1usize..30,
        k1 in 0.5f64..2.0,
        b in 0.0f64..1.0,
    ) {
        let index = build_index(&facts, Bm25Params { k1, b }).unwrap();
        let got = index.search(&TokenSeq::new(query.clone()), k);
        let want = brute_force_bm25(&facts, &query, k1, b, k);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert_eq!(&g.fact_id, &w.0);
            prop_assert!((g.score - w.1).abs() <= 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn step2_query_is_symmetric_in_its_operands(
        qa in prop::collection::vec(prop::sample::select(vec!["the", "sun", "heat", "of", "water", "rock"]), 1..6),
        fact in prop::collection::vec(prop::sample::select(vec!["a", "sun", "ice", "rock", "salt"]), 1..6),
    ) {
        let stop = Stoplist::default_english();
        let qa = qa.join(" ");
        let fact = fact.join(" ");
        let forward = make_step2_query(&qa, "", &Fact::new("f", &fact, FactSource::Other), &stop);
        let backward = make_step2_query(&fact, "", &Fact::new("g", &qa, FactSource::Other), &stop);
        let as_set = |r: hopqa::Result<TokenSeq>| r.map(|q| q.into_inner().into_iter().collect::<HashSet<_>>()).ok();
        let forward = as_set(forward);
        prop_assert_eq!(&forward, &as_set(backward));
        let oracle = symmetric_difference_oracle(&qa, "", &fact, &stop);
        prop_assert_eq!(forward.unwrap_or_default(), oracle);
    }

    #[test]
    fn retrieved_lists_are_distinct_known_facts(seed in 0u64..1000, n_distractors in 1usize..12, steps in 1u8..=2) {
        let (questions, corpus) = bridge_task(3, n_distractors, seed);
        let index = build_index(corpus.facts(), Bm25Params::default()).unwrap();
        let stop = Stoplist::default_english();
        let config = RetrievalConfig { steps, k1: 5, top_m: 3, k2: 5 };
        for q in &questions {
            let trace = retrieve(&index, &corpus, &stop, q, None, &config).unwrap();
            for opt in &trace.options {
                for list in [&opt.f1, &opt.f2] {
                    let ids: HashSet<&str> = list.iter().map(|h| h.fact_id.as_str()).collect();
                    prop_assert_eq!(ids.len(), list.len());
                    prop_assert!(ids.iter().all(|id| corpus.get(id).is_some()));
                }
                prop_assert!(opt.f1.len() <= config.k1);
                if steps == 1 {
                    prop_assert!(opt.f2.is_empty());
                }
            }
        }
    }
}
