//! Knowledge-fusion multiple-choice reader.
//!
//! Retrieved facts are split into a common set C (facts retrieved for two or
//! more options) and per-option unique sets U_i. Each option gets its own
//! input `[CLS] U_i Q [SEP] A_i [SEP]`, and one shared input
//! `[CLS] Q [SEP] A_1 [SEP] … A_n [SEP] C [SEP]` sees every option at once.
//! Option i is scored from the concatenation of the two CLS vectors:
//!
//! ```text
//! logit_i = FF2(LN(gelu(FF1([CLS_Ai ; CLS_C]))))
//! ```
//!
//! and the option distribution is the softmax over the n logits. With
//! knowledge fusion disabled the options keep their raw fact lists and CLS_C
//! is the zero vector.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Corpus, Question, TokenSeq};
use crate::encoder::checkpoint::{load_checkpoint, save_checkpoint};
use crate::encoder::math::{cross_entropy, gelu, gelu_grad, layer_norm, layer_norm_backward, linear, softmax};
use crate::encoder::optim::{fit, EpochStats, TrainConfig};
use crate::encoder::{
    backward, cls_grad, forward, init_params, normal_matrix, EncInput, EncodeTrace, EncoderConfig, EncoderParams,
    Params, Vocab, CLS, SEP,
};
use crate::error::{Error, Result};
use crate::index::Hit;
use crate::retrieval::RetrievalTrace;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeSplit {
    /// Facts retrieved for at least two options, by combined score.
    pub common: Vec<Hit>,
    /// Per option, facts retrieved for that option only, in rank order.
    pub unique: Vec<Vec<Hit>>,
}

/// A fact shared by several option lists scores `count × max score`; the
/// common list is sorted by that score descending, then by fact id.
pub fn split_common_unique(lists: &[Vec<Hit>]) -> KnowledgeSplit {
    let mut stats: HashMap<&str, (usize, f64)> = HashMap::new();
    let deduped: Vec<Vec<&Hit>> = lists
        .iter()
        .map(|l| {
            let mut seen = std::collections::HashSet::new();
            l.iter().filter(|h| seen.insert(h.fact_id.as_str())).collect()
        })
        .collect();
    for l in &deduped {
        for h in l {
            let e = stats.entry(h.fact_id.as_str()).or_insert((0, f64::NEG_INFINITY));
            e.0 += 1;
            e.1 = e.1.max(h.score);
        }
    }
    let mut common: Vec<Hit> = stats
        .iter()
        .filter(|(_, &(c, _))| c >= 2)
        .map(|(&id, &(c, m))| Hit::new(id, c as f64 * m))
        .collect();
    common.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.fact_id.cmp(&b.fact_id)));
    let unique = deduped
        .iter()
        .map(|l| {
            l.iter()
                .filter(|h| stats[h.fact_id.as_str()].0 == 1)
                .map(|&h| h.clone())
                .collect()
        })
        .collect();
    KnowledgeSplit { common, unique }
}

/// Keeps facts in order while they fit in `budget` tokens. If even the first
/// does not fit, its tail is cut instead.
fn fit_facts<'a>(facts: impl IntoIterator<Item = &'a TokenSeq>, budget: usize) -> Vec<&'a str> {
    let mut out = Vec::new();
    for (i, f) in facts.into_iter().enumerate() {
        if out.len() + f.len() <= budget {
            out.extend(f.iter().map(String::as_str));
        } else {
            if i == 0 {
                out.extend(f.iter().take(budget).map(String::as_str));
            }
            break;
        }
    }
    out
}

/// `[CLS] facts Q [SEP] A [SEP]`, facts concatenated in rank order.
pub fn build_per_answer_input(
    vocab: &Vocab,
    max_len: usize,
    facts: &[TokenSeq],
    question: &TokenSeq,
    answer: &TokenSeq,
) -> Result<EncInput> {
    let fixed = question.len() + answer.len() + 3;
    if fixed > max_len {
        return Err(Error::InputTooLong { len: fixed, max_len });
    }
    let knowledge = fit_facts(facts, max_len - fixed);
    let mut ids = Vec::with_capacity(fixed + knowledge.len());
    ids.push(CLS);
    ids.extend(knowledge.iter().map(|t| vocab.id(t)));
    ids.extend(vocab.ids(question));
    ids.push(SEP);
    ids.extend(vocab.ids(answer));
    ids.push(SEP);
    Ok(EncInput::new(ids))
}

/// `[CLS] Q [SEP] A_1 [SEP] … A_n [SEP] C [SEP]`.
pub fn build_common_input(
    vocab: &Vocab,
    max_len: usize,
    question: &TokenSeq,
    options: &[TokenSeq],
    common: &[TokenSeq],
) -> Result<EncInput> {
    let fixed = 3 + question.len() + options.iter().map(|o| o.len() + 1).sum::<usize>();
    if fixed > max_len {
        return Err(Error::InputTooLong { len: fixed, max_len });
    }
    let knowledge = fit_facts(common, max_len - fixed);
    let mut ids = Vec::with_capacity(fixed + knowledge.len());
    ids.push(CLS);
    ids.extend(vocab.ids(question));
    ids.push(SEP);
    for o in options {
        ids.extend(vocab.ids(o));
        ids.push(SEP);
    }
    ids.extend(knowledge.iter().map(|t| vocab.id(t)));
    ids.push(SEP);
    Ok(EncInput::new(ids))
}

/// A multiple-choice question with its per-option ranked knowledge.
#[derive(Debug, Clone, PartialEq)]
pub struct QaExample {
    pub id: String,
    pub question: TokenSeq,
    pub labels: Vec<String>,
    pub options: Vec<TokenSeq>,
    /// Per option, ranked hits; scores feed the common-set ordering.
    pub facts: Vec<Vec<Hit>>,
    /// Tokens of every fact referenced in `facts`.
    pub fact_tokens: HashMap<String, TokenSeq>,
    pub answer: Option<usize>,
}

impl QaExample {
    /// Builds an example from per-option hit lists, resolving fact texts in
    /// `corpus`. Hits whose id is not in the corpus are dropped.
    pub fn new(question: &Question, facts: Vec<Vec<Hit>>, corpus: &Corpus) -> Result<Self> {
        if facts.len() != question.options.len() {
            return Err(Error::IdMismatch(format!(
                "{}: {} fact lists for {} options",
                question.id,
                facts.len(),
                question.options.len()
            )));
        }
        let mut fact_tokens = HashMap::new();
        let facts = facts
            .into_iter()
            .map(|l| {
                l.into_iter()
                    .filter(|h| match corpus.get(&h.fact_id) {
                        Some(f) => {
                            fact_tokens.entry(h.fact_id.clone()).or_insert_with(|| f.tokens.clone());
                            true
                        }
                        None => false,
                    })
                    .collect()
            })
            .collect();
        Ok(QaExample {
            id: question.id.clone(),
            question: tokenize(&question.stem),
            labels: question.options.iter().map(|o| o.label.clone()).collect(),
            options: question.options.iter().map(|o| tokenize(&o.text)).collect(),
            facts,
            fact_tokens,
            answer: question.answer_index(),
        })
    }

    pub fn from_trace(question: &Question, trace: &RetrievalTrace, corpus: &Corpus) -> Result<Self> {
        if trace.question_id != question.id {
            return Err(Error::IdMismatch(format!(
                "trace {} for question {}",
                trace.question_id, question.id
            )));
        }
        let lists = trace.final_lists().into_iter().map(<[Hit]>::to_vec).collect();
        Self::new(question, lists, corpus)
    }

    /// Same question with every fact list emptied.
    pub fn without_knowledge(&self) -> Self {
        QaExample {
            facts: vec![Vec::new(); self.options.len()],
            fact_tokens: HashMap::new(),
            ..self.clone()
        }
    }

    pub fn num_options(&self) -> usize {
        self.options.len()
    }

    fn tokens_of<'a>(&'a self, hits: &'a [Hit]) -> Vec<&'a TokenSeq> {
        hits.iter().filter_map(|h| self.fact_tokens.get(&h.fact_id)).collect()
    }

    fn all_tokens(&self) -> impl Iterator<Item = &TokenSeq> {
        std::iter::once(&self.question)
            .chain(&self.options)
            .chain(self.fact_tokens.values())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub encoder: EncoderParams,
    /// `2·d_model × d_model`.
    pub ff1_w: Array2<f64>,
    pub ff1_b: Array1<f64>,
    pub ln_g: Array1<f64>,
    pub ln_b: Array1<f64>,
    /// `d_model × 1`.
    pub ff2_w: Array2<f64>,
    pub ff2_b: Array1<f64>,
}

impl Params for FusionParams {
    fn arrays(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut v: Vec<_> = self
            .encoder
            .arrays()
            .into_iter()
            .map(|(n, a)| (format!("encoder.{n}"), a))
            .collect();
        v.extend([
            ("ff1.w".to_string(), self.ff1_w.view().into_dyn()),
            ("ff1.b".to_string(), self.ff1_b.view().into_dyn()),
            ("ln.g".to_string(), self.ln_g.view().into_dyn()),
            ("ln.b".to_string(), self.ln_b.view().into_dyn()),
            ("ff2.w".to_string(), self.ff2_w.view().into_dyn()),
            ("ff2.b".to_string(), self.ff2_b.view().into_dyn()),
        ]);
        v
    }

    fn arrays_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut v: Vec<_> = self
            .encoder
            .arrays_mut()
            .into_iter()
            .map(|(n, a)| (format!("encoder.{n}"), a))
            .collect();
        v.extend([
            ("ff1.w".to_string(), self.ff1_w.view_mut().into_dyn()),
            ("ff1.b".to_string(), self.ff1_b.view_mut().into_dyn()),
            ("ln.g".to_string(), self.ln_g.view_mut().into_dyn()),
            ("ln.b".to_string(), self.ln_b.view_mut().into_dyn()),
            ("ff2.w".to_string(), self.ff2_w.view_mut().into_dyn()),
            ("ff2.b".to_string(), self.ff2_b.view_mut().into_dyn()),
        ]);
        v
    }
}

impl FusionParams {
    pub fn init(config: &EncoderConfig) -> Result<Self> {
        let encoder = init_params(config)?;
        let d = config.d_model;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x4655_5345);
        Ok(FusionParams {
            encoder,
            ff1_w: normal_matrix(&mut rng, 2 * d, d, config.init_std),
            ff1_b: Array1::zeros(d),
            ln_g: Array1::ones(d),
            ln_b: Array1::zeros(d),
            ff2_w: normal_matrix(&mut rng, d, 1, config.init_std),
            ff2_b: Array1::zeros(1),
        })
    }

    pub fn d_model(&self) -> usize {
        self.encoder.config.d_model
    }
}

/// Encoder inputs for one question: one per option plus the optional shared
/// common input.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionInputs {
    pub per_answer: Vec<EncInput>,
    pub common: Option<EncInput>,
}

impl FusionInputs {
    /// Encoder passes needed to score the question.
    pub fn num_passes(&self) -> usize {
        self.per_answer.len() + usize::from(self.common.is_some())
    }
}

/// Builds the encoder inputs for `example` using at most `k` facts per input.
/// With `use_kf` the top-k lists are split into common and unique facts; without
/// it each option keeps its own top-k list and there is no common input.
pub fn prepare_inputs(
    vocab: &Vocab,
    max_len: usize,
    example: &QaExample,
    k: usize,
    use_kf: bool,
) -> Result<FusionInputs> {
    let top: Vec<Vec<Hit>> = example
        .facts
        .iter()
        .map(|l| l.iter().take(k).cloned().collect())
        .collect();
    let (per_option, common) = if use_kf {
        let split = split_common_unique(&top);
        let unique = split
            .unique
            .into_iter()
            .map(|u| u.into_iter().take(k).collect())
            .collect();
        (unique, Some(split.common.into_iter().take(k).collect::<Vec<_>>()))
    } else {
        (top, None)
    };
    let per_answer = per_option
        .iter()
        .zip(&example.options)
        .map(|(facts, opt)| {
            let toks: Vec<TokenSeq> = example.tokens_of(facts).into_iter().cloned().collect();
            build_per_answer_input(vocab, max_len, &toks, &example.question, opt)
        })
        .collect::<Result<Vec<_>>>()?;
    let common = common
        .map(|c| {
            let toks: Vec<TokenSeq> = example.tokens_of(&c).into_iter().cloned().collect();
            build_common_input(vocab, max_len, &example.question, &example.options, &toks)
        })
        .transpose()?;
    Ok(FusionInputs { per_answer, common })
}

struct HeadCache {
    v: Array2<f64>,
    pre: Array2<f64>,
    ln: crate::encoder::math::LnCache,
    z: Array2<f64>,
}

struct FusionForward {
    logits: Vec<f64>,
    answer_traces: Vec<EncodeTrace>,
    common_trace: Option<EncodeTrace>,
    head: HeadCache,
}

fn fusion_forward(params: &FusionParams, inputs: &FusionInputs) -> Result<FusionForward> {
    let d = params.d_model();
    let n = inputs.per_answer.len();
    let (cls_c, common_trace) = match &inputs.common {
        Some(c) => {
            let (out, trace) = forward(&params.encoder, c)?;
            (out.cls, Some(trace))
        }
        None => (Array1::zeros(d), None),
    };
    let mut v = Array2::zeros((n, 2 * d));
    let mut answer_traces = Vec::with_capacity(n);
    for (i, input) in inputs.per_answer.iter().enumerate() {
        let (out, trace) = forward(&params.encoder, input)?;
        v.slice_mut(s![i, ..d]).assign(&out.cls);
        v.slice_mut(s![i, d..]).assign(&cls_c);
        answer_traces.push(trace);
    }
    let pre = linear(&v.view(), &params.ff1_w, &params.ff1_b);
    let (z, ln) = layer_norm(&pre.mapv(gelu), &params.ln_g, &params.ln_b);
    let logits = linear(&z.view(), &params.ff2_w, &params.ff2_b).column(0).to_vec();
    Ok(FusionForward {
        logits,
        answer_traces,
        common_trace,
        head: HeadCache { v, pre, ln, z },
    })
}

/// Per-option logits.
pub fn fusion_logits(params: &FusionParams, inputs: &FusionInputs) -> Result<Vec<f64>> {
    Ok(fusion_forward(params, inputs)?.logits)
}

/// Cross-entropy against the gold option and the gradient of every
/// parameter. The shared CLS_C receives the sum of its gradients from all n
/// option rows.
pub fn fusion_loss_and_grad(
    params: &FusionParams,
    inputs: &FusionInputs,
    target: usize,
) -> Result<(f64, FusionParams)> {
    let fwd = fusion_forward(params, inputs)?;
    let n = fwd.logits.len();
    if target >= n {
        return Err(Error::InvalidConfig(format!(
            "target {target} out of range for {n} options"
        )));
    }
    let (loss, dlogits) = cross_entropy(&fwd.logits, target);
    if !loss.is_finite() {
        return Err(Error::NonFinite("fusion loss".into()));
    }
    let d = params.d_model();
    let h = &fwd.head;
    let mut g = params.zeros_like();
    let dl = Array2::from_shape_vec((n, 1), dlogits).expect("n logits");
    let dz = crate::encoder::math::linear_backward(&h.z.view(), &params.ff2_w, &dl, &mut g.ff2_w, &mut g.ff2_b);
    let mut dact = layer_norm_backward(&dz, &h.ln, &params.ln_g, &mut g.ln_g, &mut g.ln_b);
    dact.zip_mut_with(&h.pre, |d, &x| *d *= gelu_grad(x));
    let dv = crate::encoder::math::linear_backward(&h.v.view(), &params.ff1_w, &dact, &mut g.ff1_w, &mut g.ff1_b);
    for (i, trace) in fwd.answer_traces.iter().enumerate() {
        let d_cls = dv.slice(s![i, ..d]).to_owned();
        backward(
            &params.encoder,
            trace,
            &cls_grad(inputs.per_answer[i].len(), &d_cls),
            &mut g.encoder,
        );
    }
    if let (Some(trace), Some(c)) = (&fwd.common_trace, &inputs.common) {
        let d_cls = dv.slice(s![.., d..]).sum_axis(Axis(0));
        backward(&params.encoder, trace, &cls_grad(c.len(), &d_cls), &mut g.encoder);
    }
    Ok((loss, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaConfig {
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub min_count: usize,
    /// Facts per encoder input (top-k of each option's list, and cap on U_i and C).
    pub facts_per_input: usize,
    /// Split knowledge into common/unique sets and add the common input.
    pub use_kf: bool,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            min_count: 1,
            facts_per_input: 10,
            use_kf: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub vocab: Vocab,
    pub params: FusionParams,
    pub facts_per_input: usize,
    pub use_kf: bool,
}

/// Option probabilities for one question and the encoder passes it took.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionScores {
    pub probs: Vec<f64>,
    pub encoder_passes: usize,
}

impl OptionScores {
    /// Index of the most probable option; ties go to the earliest.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

impl FusionModel {
    pub fn max_len(&self) -> usize {
        self.params.encoder.config.max_len
    }

    pub fn prepare(&self, example: &QaExample, k: usize) -> Result<FusionInputs> {
        prepare_inputs(&self.vocab, self.max_len(), example, k, self.use_kf)
    }

    pub fn score_inputs(&self, inputs: &FusionInputs) -> Result<OptionScores> {
        Ok(OptionScores {
            probs: softmax(&fusion_logits(&self.params, inputs)?),
            encoder_passes: inputs.num_passes(),
        })
    }

    /// Scores with the model's own `facts_per_input`.
    pub fn score_options(&self, example: &QaExample) -> Result<OptionScores> {
        self.score_with_k(example, self.facts_per_input)
    }

    pub fn score_with_k(&self, example: &QaExample, k: usize) -> Result<OptionScores> {
        self.score_inputs(&self.prepare(example, k)?)
    }

    pub fn predict(&self, example: &QaExample) -> Result<Prediction> {
        let scores = self.score_options(example)?;
        Ok(Prediction::new(example, scores))
    }
}

/// Trains a fusion model from scratch on examples that all carry an answer.
pub fn train_qa_with<C>(
    examples: &[QaExample],
    config: &QaConfig,
    mut on_epoch: C,
) -> Result<(FusionModel, Vec<EpochStats>)>
where
    C: FnMut(&FusionModel, EpochStats) -> bool,
{
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let targets = examples
        .iter()
        .map(|e| e.answer.ok_or_else(|| Error::MissingAnswerKey(e.id.clone())))
        .collect::<Result<Vec<_>>>()?;
    let vocab = Vocab::build(examples.iter().flat_map(QaExample::all_tokens), config.min_count);
    let enc_cfg = EncoderConfig {
        vocab_size: vocab.len(),
        ..config.encoder
    };
    let mut model = FusionModel {
        vocab,
        params: FusionParams::init(&enc_cfg)?,
        facts_per_input: config.facts_per_input,
        use_kf: config.use_kf,
    };
    let inputs = examples
        .iter()
        .map(|e| model.prepare(e, config.facts_per_input))
        .collect::<Result<Vec<_>>>()?;
    let mut params = model.params.clone();
    let shell = FusionModel {
        params: params.clone(),
        ..model.clone()
    };
    let history = fit(
        &mut params,
        inputs.len(),
        &config.train,
        |p, i| fusion_loss_and_grad(p, &inputs[i], targets[i]),
        |p, stats| {
            let m = FusionModel {
                params: p.clone(),
                ..shell.clone()
            };
            on_epoch(&m, stats)
        },
    )?;
    model.params = params;
    Ok((model, history))
}

pub fn train_qa(examples: &[QaExample], config: &QaConfig) -> Result<FusionModel> {
    train_qa_with(examples, config, |_, _| true).map(|(m, _)| m)
}

/// An untrained model whose vocabulary covers `examples`.
pub fn init_qa(examples: &[QaExample], config: &QaConfig) -> Result<FusionModel> {
    let vocab = Vocab::build(examples.iter().flat_map(QaExample::all_tokens), config.min_count);
    let enc_cfg = EncoderConfig {
        vocab_size: vocab.len(),
        ..config.encoder
    };
    Ok(FusionModel {
        vocab,
        params: FusionParams::init(&enc_cfg)?,
        facts_per_input: config.facts_per_input,
        use_kf: config.use_kf,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
    pub predicted: String,
    pub confidence: f64,
}

impl Prediction {
    pub fn new(example: &QaExample, scores: OptionScores) -> Self {
        let best = scores.argmax();
        Prediction {
            question_id: example.id.clone(),
            labels: example.labels.clone(),
            predicted: example.labels[best].clone(),
            confidence: scores.probs[best],
            probs: scores.probs,
        }
    }
}

pub fn predict_all(model: &FusionModel, examples: &[QaExample], k: usize) -> Result<Vec<Prediction>> {
    use rayon::prelude::*;
    examples
        .par_iter()
        .map(|e| Ok(Prediction::new(e, model.score_with_k(e, k)?)))
        .collect()
}

pub fn write_predictions(path: impl AsRef<Path>, predictions: &[Prediction]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for p in predictions {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct FusionMeta {
    kind: String,
    encoder: EncoderConfig,
    facts_per_input: usize,
    use_kf: bool,
    vocab: Vocab,
}

pub fn save_qa(path: impl AsRef<Path>, model: &FusionModel) -> Result<()> {
    let meta = FusionMeta {
        kind: "fusion".into(),
        encoder: model.params.encoder.config,
        facts_per_input: model.facts_per_input,
        use_kf: model.use_kf,
        vocab: model.vocab.clone(),
    };
    save_checkpoint(path.as_ref(), &serde_json::to_value(meta)?, &model.params)
}

pub fn load_qa(path: impl AsRef<Path>) -> Result<FusionModel> {
    let raw = load_checkpoint(path.as_ref())?;
    let meta: FusionMeta = serde_json::from_value(raw.meta.clone())?;
    if meta.kind != "fusion" {
        return Err(Error::Checkpoint(format!(
            "expected a fusion checkpoint, found {}",
            meta.kind
        )));
    }
    let mut params = FusionParams::init(&EncoderConfig {
        init_std: 0.0,
        ..meta.encoder
    })?;
    raw.fill(&mut params)?;
    Ok(FusionModel {
        vocab: meta.vocab,
        params,
        facts_per_input: meta.facts_per_input,
        use_kf: meta.use_kf,
    })
}
