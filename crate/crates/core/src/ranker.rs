//! Cross-encoder relevance classifier for (question, answer, fact) triples.
//!
//! The input is `[CLS] Q A [SEP] fact [SEP]`; a linear head on the CLS vector
//! gives two logits (irrelevant, relevant) and the softmax probability of the
//! relevant class is the ranking score.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Corpus, TokenSeq};
use crate::encoder::checkpoint::{load_checkpoint, save_checkpoint};
use crate::encoder::math::{cross_entropy, softmax};
use crate::encoder::optim::{fit, EpochStats, TrainConfig};
use crate::encoder::{
    backward, cls_grad, forward, init_params, normal_matrix, EncInput, EncoderConfig, EncoderParams, Params, Vocab,
    CLS, SEP,
};
use crate::error::{Error, Result};
use crate::index::Hit;
use crate::rankdata::RankExample;
use crate::retrieval::Reranker;

const IRRELEVANT: usize = 0;
const RELEVANT: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RankerParams {
    pub encoder: EncoderParams,
    /// `d_model × 2` classifier weights; column 1 is the relevant class.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Params for RankerParams {
    fn arrays(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut v: Vec<_> = self
            .encoder
            .arrays()
            .into_iter()
            .map(|(n, a)| (format!("encoder.{n}"), a))
            .collect();
        v.push(("head.w".into(), self.w.view().into_dyn()));
        v.push(("head.b".into(), self.b.view().into_dyn()));
        v
    }

    fn arrays_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut v: Vec<_> = self
            .encoder
            .arrays_mut()
            .into_iter()
            .map(|(n, a)| (format!("encoder.{n}"), a))
            .collect();
        v.push(("head.w".into(), self.w.view_mut().into_dyn()));
        v.push(("head.b".into(), self.b.view_mut().into_dyn()));
        v
    }
}

impl RankerParams {
    pub fn init(config: &EncoderConfig) -> Result<Self> {
        let encoder = init_params(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5241_4e4b);
        Ok(RankerParams {
            encoder,
            w: normal_matrix(&mut rng, config.d_model, 2, config.init_std),
            b: Array1::zeros(2),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankerConfig {
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    /// Tokens seen fewer times in the training data map to UNK.
    pub min_count: usize,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig {
            encoder: EncoderConfig {
                max_len: 128,
                ..EncoderConfig::default()
            },
            train: TrainConfig::default(),
            min_count: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankerModel {
    pub vocab: Vocab,
    pub params: RankerParams,
}

/// Truncates to fit `max_len` special tokens included: the fact tail goes
/// first, then the question tail. The answer is cut only if it cannot fit on
/// its own.
pub fn pair_tokens(
    max_len: usize,
    question: &TokenSeq,
    answer: &TokenSeq,
    fact: &TokenSeq,
) -> (Vec<String>, Vec<String>) {
    let budget = max_len.saturating_sub(3);
    let a_len = answer.len().min(budget);
    let q_len = question.len().min(budget - a_len);
    let f_len = fact.len().min(budget - a_len - q_len);
    let mut first: Vec<String> = question[..q_len].to_vec();
    first.extend_from_slice(&answer[..a_len]);
    (first, fact[..f_len].to_vec())
}

/// `[CLS] tokens(Q)+tokens(A) [SEP] tokens(fact) [SEP]` as vocabulary ids.
pub fn build_rank_input(vocab: &Vocab, max_len: usize, question: &str, answer: &str, fact: &str) -> EncInput {
    let (first, second) = pair_tokens(max_len, &tokenize(question), &tokenize(answer), &tokenize(fact));
    let mut ids = Vec::with_capacity(first.len() + second.len() + 3);
    ids.push(CLS);
    ids.extend(first.iter().map(|t| vocab.id(t)));
    ids.push(SEP);
    ids.extend(second.iter().map(|t| vocab.id(t)));
    ids.push(SEP);
    EncInput::new(ids)
}

pub fn ranker_logits(params: &RankerParams, input: &EncInput) -> Result<[f64; 2]> {
    let (out, _) = forward(&params.encoder, input)?;
    let l = out.cls.dot(&params.w) + &params.b;
    Ok([l[0], l[1]])
}

/// Cross-entropy of one labelled input and its gradient for every parameter.
pub fn ranker_loss_and_grad(params: &RankerParams, input: &EncInput, relevant: bool) -> Result<(f64, RankerParams)> {
    let (out, trace) = forward(&params.encoder, input)?;
    let logits = out.cls.dot(&params.w) + &params.b;
    let target = if relevant { RELEVANT } else { IRRELEVANT };
    let (loss, dlogits) = cross_entropy(logits.as_slice().expect("contiguous"), target);
    if !loss.is_finite() {
        return Err(Error::NonFinite("ranker loss".into()));
    }
    let dlogits = Array1::from(dlogits);
    let mut g = params.zeros_like();
    g.w = out
        .cls
        .view()
        .insert_axis(ndarray::Axis(1))
        .dot(&dlogits.view().insert_axis(ndarray::Axis(0)));
    g.b = dlogits.clone();
    let d_cls = params.w.dot(&dlogits);
    backward(&params.encoder, &trace, &cls_grad(input.len(), &d_cls), &mut g.encoder);
    Ok((loss, g))
}

impl RankerModel {
    pub fn max_len(&self) -> usize {
        self.params.encoder.config.max_len
    }

    pub fn input(&self, question: &str, answer: &str, fact: &str) -> EncInput {
        build_rank_input(&self.vocab, self.max_len(), question, answer, fact)
    }

    /// `[P(irrelevant), P(relevant)]`.
    pub fn probabilities(&self, input: &EncInput) -> Result<[f64; 2]> {
        let p = softmax(&ranker_logits(&self.params, input)?);
        Ok([p[0], p[1]])
    }

    /// P(relevant) for one triple.
    pub fn rel_score(&self, question: &str, answer: &str, fact: &str) -> Result<f64> {
        Ok(self.probabilities(&self.input(question, answer, fact))?[RELEVANT])
    }

    pub fn predict_relevant(&self, example: &RankExample) -> Result<bool> {
        let p = self.rel_score(&example.question_text, &example.answer_text, &example.fact_text)?;
        Ok(p > 0.5)
    }

    /// Hits with scores replaced by P(relevant), sorted by [`sort_by_score`].
    pub fn rerank_hits(&self, question: &str, answer: &str, hits: Vec<Hit>, corpus: &Corpus) -> Result<Vec<Hit>> {
        let scored = hits
            .into_iter()
            .map(|h| {
                let text = corpus.get(&h.fact_id).map(|f| f.text.as_str()).unwrap_or("");
                Ok(Hit::new(h.fact_id, self.rel_score(question, answer, text)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(sort_by_score(scored))
    }
}

/// Descending score; equal scores keep their incoming order.
pub fn sort_by_score(mut hits: Vec<Hit>) -> Vec<Hit> {
    hits.sort_by(|a, b| b.score.total_cmp(&a.score));
    hits
}

impl Reranker for RankerModel {
    fn rerank(&self, stem: &str, option: &str, hits: Vec<Hit>, corpus: &Corpus) -> Vec<Hit> {
        match self.rerank_hits(stem, option, hits.clone(), corpus) {
            Ok(h) => h,
            Err(e) => {
                log::warn!("reranking failed, keeping retrieval order: {e}");
                hits
            }
        }
    }
}

fn example_tokens(e: &RankExample) -> [TokenSeq; 3] {
    [
        tokenize(&e.question_text),
        tokenize(&e.answer_text),
        tokenize(&e.fact_text),
    ]
}

/// Trains a ranker from scratch. `on_epoch` sees the model after every epoch
/// and returns `false` to stop.
pub fn train_ranker_with<C>(
    examples: &[RankExample],
    config: &RankerConfig,
    mut on_epoch: C,
) -> Result<(RankerModel, Vec<EpochStats>)>
where
    C: FnMut(&RankerModel, EpochStats) -> bool,
{
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let toks: Vec<[TokenSeq; 3]> = examples.iter().map(example_tokens).collect();
    let vocab = Vocab::build(toks.iter().flatten(), config.min_count);
    let enc_cfg = EncoderConfig {
        vocab_size: vocab.len(),
        ..config.encoder
    };
    let params = RankerParams::init(&enc_cfg)?;
    let inputs: Vec<(EncInput, bool)> = examples
        .iter()
        .map(|e| {
            let input = build_rank_input(&vocab, enc_cfg.max_len, &e.question_text, &e.answer_text, &e.fact_text);
            (input, e.is_relevant())
        })
        .collect();
    let mut model = RankerModel { vocab, params };
    let mut params = model.params.clone();
    let vocab = model.vocab.clone();
    let history = fit(
        &mut params,
        inputs.len(),
        &config.train,
        |p, i| ranker_loss_and_grad(p, &inputs[i].0, inputs[i].1),
        |p, stats| {
            on_epoch(
                &RankerModel {
                    vocab: vocab.clone(),
                    params: p.clone(),
                },
                stats,
            )
        },
    )?;
    model.params = params;
    Ok((model, history))
}

pub fn train_ranker(examples: &[RankExample], config: &RankerConfig) -> Result<RankerModel> {
    train_ranker_with(examples, config, |_, _| true).map(|(m, _)| m)
}

/// Fraction of examples whose predicted class (relevant iff P > 0.5) matches
/// the label.
pub fn eval_ranker(model: &RankerModel, examples: &[RankExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for e in examples {
        if model.predict_relevant(e)? == e.is_relevant() {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

#[derive(Serialize, Deserialize)]
struct RankerMeta {
    kind: String,
    encoder: EncoderConfig,
    vocab: Vocab,
}

pub fn save_ranker(path: impl AsRef<Path>, model: &RankerModel) -> Result<()> {
    let meta = RankerMeta {
        kind: "ranker".into(),
        encoder: model.params.encoder.config,
        vocab: model.vocab.clone(),
    };
    save_checkpoint(path.as_ref(), &serde_json::to_value(meta)?, &model.params)
}

pub fn load_ranker(path: impl AsRef<Path>) -> Result<RankerModel> {
    let raw = load_checkpoint(path.as_ref())?;
    let meta: RankerMeta = serde_json::from_value(raw.meta.clone())?;
    if meta.kind != "ranker" {
        return Err(Error::Checkpoint(format!(
            "expected a ranker checkpoint, found {}",
            meta.kind
        )));
    }
    let mut params = RankerParams::init(&EncoderConfig {
        init_std: 0.0,
        ..meta.encoder
    })?;
    raw.fill(&mut params)?;
    Ok(RankerModel {
        vocab: meta.vocab,
        params,
    })
}

/// One line of the score-file mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub question: String,
    pub answer: String,
    pub fact: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
}

/// Reads `{question, answer, fact}` lines and writes them back with
/// `probability` = P(relevant).
pub fn score_file(model: &RankerModel, input: impl AsRef<Path>, output: impl AsRef<Path>) -> Result<usize> {
    let path = input.as_ref();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = std::io::BufWriter::new(fs::File::create(output)?);
    let mut n = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row: ScoreRow = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        row.probability = Some(model.rel_score(&row.question, &row.answer, &row.fact)?);
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}
