//! Retrieval recall, QA accuracy, confidence histograms, the pipeline
//! configuration, ablation runs and the facts-per-input sweep.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_corpus, Corpus, FactSource, IdMode, Question, Stoplist};
use crate::error::{Error, Result};
use crate::fusion::{predict_all, train_qa, FusionModel, Prediction, QaConfig, QaExample};
use crate::index::{Bm25Params, Hit, InvertedIndex};
use crate::rankdata::RankDataConfig;
use crate::ranker::{RankerConfig, RankerModel};
use crate::retrieval::{retrieve, Reranker, RetrievalConfig, RetrievalTrace};

/// 1 if `gold` is among the first `n` ids.
pub fn recall_at_n<S: AsRef<str>>(ranked: &[S], gold: &str, n: usize) -> u8 {
    u8::from(ranked.iter().take(n).any(|id| id.as_ref() == gold))
}

/// 1 if every gold id is among the first `n`.
pub fn all_in_top<S: AsRef<str>>(ranked: &[S], gold: &[&str], n: usize) -> u8 {
    u8::from(gold.iter().all(|g| recall_at_n(ranked, g, n) == 1))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Recall of the gold facts in one step's final list for the correct option.
/// F2 figures are `None` when no evaluated question has a second gold fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecall {
    pub step: u8,
    pub f1_r5: Option<f64>,
    pub f1_r10: Option<f64>,
    pub f2_r5: Option<f64>,
    pub f2_r10: Option<f64>,
    pub both_r10: Option<f64>,
    /// Questions contributing to the F1 figures.
    pub evaluated: usize,
    /// Questions skipped for lacking an answer key, gold facts or a trace.
    pub excluded: usize,
}

/// Recall@5/10 per step for each trace's correct option. Gold fact texts are
/// resolved to ids through `corpus`.
pub fn retrieval_recall(questions: &[Question], traces: &[RetrievalTrace], corpus: &Corpus) -> Vec<StepRecall> {
    let by_id: HashMap<&str, &RetrievalTrace> = traces.iter().map(|t| (t.question_id.as_str(), t)).collect();
    let max_step = traces.iter().map(|t| t.steps).max().unwrap_or(1);
    (1..=max_step)
        .map(|step| {
            let (mut f1_5, mut f1_10, mut f2_5, mut f2_10, mut both) = (vec![], vec![], vec![], vec![], vec![]);
            let mut excluded = 0;
            for q in questions {
                let (Some(ans), Some(trace)) = (q.answer_index(), by_id.get(q.id.as_str())) else {
                    excluded += 1;
                    continue;
                };
                if q.gold_facts.is_empty() || trace.steps < step || ans >= trace.options.len() {
                    excluded += 1;
                    continue;
                }
                let ids: Vec<&str> = trace.options[ans]
                    .final_list(step)
                    .iter()
                    .map(|h| h.fact_id.as_str())
                    .collect();
                let gold: Vec<String> = q.gold_facts.iter().map(|g| corpus.resolve_id(g)).collect();
                f1_5.push(recall_at_n(&ids, &gold[0], 5) as f64);
                f1_10.push(recall_at_n(&ids, &gold[0], 10) as f64);
                if let Some(g2) = gold.get(1) {
                    f2_5.push(recall_at_n(&ids, g2, 5) as f64);
                    f2_10.push(recall_at_n(&ids, g2, 10) as f64);
                    both.push(all_in_top(&ids, &[&gold[0], g2], 10) as f64);
                }
            }
            StepRecall {
                step,
                f1_r5: mean(&f1_5),
                f1_r10: mean(&f1_10),
                f2_r5: mean(&f2_5),
                f2_r10: mean(&f2_10),
                both_r10: mean(&both),
                evaluated: f1_5.len(),
                excluded,
            }
        })
        .collect()
}

fn gold_labels<'a>(predictions: &[Prediction], questions: &'a [Question]) -> Result<Vec<&'a str>> {
    let by_id: HashMap<&str, &Question> = questions.iter().map(|q| (q.id.as_str(), q)).collect();
    predictions
        .iter()
        .map(|p| {
            let q = by_id
                .get(p.question_id.as_str())
                .ok_or_else(|| Error::IdMismatch(format!("prediction for unknown question {}", p.question_id)))?;
            q.answer_key
                .as_deref()
                .ok_or_else(|| Error::MissingAnswerKey(q.id.clone()))
        })
        .collect()
}

/// Fraction of predictions whose label equals the question's answer key.
pub fn qa_accuracy(predictions: &[Prediction], questions: &[Question]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let gold = gold_labels(predictions, questions)?;
    let correct = predictions
        .iter()
        .zip(&gold)
        .filter(|(p, g)| p.predicted == **g)
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub correct_count: usize,
    pub incorrect_count: usize,
}

/// Uniform bins on [0, 1] over each prediction's confidence, split by
/// correctness. A confidence of exactly 1 falls in the last bin.
pub fn confidence_histogram(
    predictions: &[Prediction],
    questions: &[Question],
    bins: usize,
) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    let gold = gold_labels(predictions, questions)?;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            bin_low: i as f64 / bins as f64,
            bin_high: (i + 1) as f64 / bins as f64,
            correct_count: 0,
            incorrect_count: 0,
        })
        .collect();
    for (p, g) in predictions.iter().zip(gold) {
        let b = ((p.confidence * bins as f64).floor() as usize).min(bins - 1);
        if p.predicted == g {
            out[b].correct_count += 1;
        } else {
            out[b].incorrect_count += 1;
        }
    }
    Ok(out)
}

pub fn write_histogram_csv(path: impl AsRef<Path>, bins: &[HistogramBin]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "bin_low,bin_high,correct_count,incorrect_count")?;
    for b in bins {
        writeln!(
            out,
            "{},{},{},{}",
            b.bin_low, b.bin_high, b.correct_count, b.incorrect_count
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Left-aligned text table with a dashed rule under the header.
pub fn format_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let s: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        s.join("  ").trim_end().to_string()
    };
    let mut out = line(headers.to_vec());
    out.push('\n');
    out.push_str(&line(
        widths
            .iter()
            .map(|&w| "-".repeat(w))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str)
            .collect(),
    ));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |v| format!("{v:.4}"))
}

/// One fact file: plain text (one fact per line) or JSON lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub path: PathBuf,
    #[serde(default = "other_source")]
    pub source: FactSource,
    #[serde(default)]
    pub id_mode: IdMode,
}

fn other_source() -> FactSource {
    FactSource::Other
}

/// Loads and merges every corpus file. A fact id seen twice with different
/// text is an error.
pub fn load_corpora(specs: &[CorpusSpec]) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for s in specs {
        for f in load_corpus(&s.path, s.source, s.id_mode)? {
            corpus.insert(f)?;
        }
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub corpus: Vec<CorpusSpec>,
    pub train_questions: Option<PathBuf>,
    pub eval_questions: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub scitail: Option<PathBuf>,
    pub word_vectors: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationFlags {
    pub use_step2: bool,
    pub use_skr: bool,
    pub use_kf: bool,
}

/// The single declarative configuration for every CLI command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub bm25: Bm25Params,
    pub retrieval: RetrievalConfig,
    pub rankdata: RankDataConfig,
    pub ranker: RankerConfig,
    pub qa: QaConfig,
    pub use_step2: bool,
    pub use_skr: bool,
    pub use_kf: bool,
    pub facts_per_input: usize,
    /// Fact counts evaluated by the sweep.
    pub sweep_counts: Vec<usize>,
    pub histogram_bins: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            paths: Paths::default(),
            bm25: Bm25Params::default(),
            retrieval: RetrievalConfig::default(),
            rankdata: RankDataConfig::default(),
            ranker: RankerConfig::default(),
            qa: QaConfig::default(),
            use_step2: true,
            use_skr: true,
            use_kf: true,
            facts_per_input: 10,
            sweep_counts: vec![0, 1, 2, 5, 10, 15, 20],
            histogram_bins: 20,
        }
    }
}

impl PipelineConfig {
    /// Copies the top-level seed, flags and fact count into the component
    /// configurations.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.ranker.encoder.seed = self.seed;
        c.ranker.train.seed = self.seed;
        c.qa.encoder.seed = self.seed;
        c.qa.train.seed = self.seed;
        c.qa.use_kf = self.use_kf;
        c.qa.facts_per_input = self.facts_per_input;
        c.retrieval.steps = if self.use_step2 { 2 } else { 1 };
        c
    }

    pub fn flags(&self) -> AblationFlags {
        AblationFlags {
            use_step2: self.use_step2,
            use_skr: self.use_skr,
            use_kf: self.use_kf,
        }
    }

    pub fn with_flags(&self, flags: AblationFlags) -> Self {
        PipelineConfig {
            use_step2: flags.use_step2,
            use_skr: flags.use_skr,
            use_kf: flags.use_kf,
            ..self.clone()
        }
        .resolved()
    }

    pub fn validate(&self) -> Result<()> {
        self.retrieval.validate()?;
        self.ranker.encoder.validate()?;
        self.ranker.train.validate()?;
        self.qa.encoder.validate()?;
        self.qa.train.validate()?;
        if self.histogram_bins == 0 {
            return Err(Error::InvalidConfig("histogram_bins must be positive".into()));
        }
        Ok(())
    }
}

/// Everything an ablation leg reads but never changes.
pub struct AblationData<'a> {
    pub corpus: &'a Corpus,
    pub index: &'a InvertedIndex,
    pub stoplist: &'a Stoplist,
    pub train: &'a [Question],
    pub eval: &'a [Question],
    /// Needed by legs with `use_skr`.
    pub ranker: Option<&'a RankerModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub use_step2: bool,
    pub use_skr: bool,
    pub use_kf: bool,
    pub facts_per_input: usize,
    pub accuracy: f64,
}

/// Every combination of the three flags, in a fixed order.
pub fn full_grid() -> Vec<AblationFlags> {
    let mut out = Vec::new();
    for use_step2 in [false, true] {
        for use_skr in [false, true] {
            for use_kf in [false, true] {
                out.push(AblationFlags {
                    use_step2,
                    use_skr,
                    use_kf,
                });
            }
        }
    }
    out
}

pub fn flags_name(f: AblationFlags) -> String {
    let mut name = String::from(if f.use_step2 { "Step 2" } else { "Step 1" });
    if f.use_skr {
        name.push_str(" + SKR");
    }
    if f.use_kf {
        name.push_str(" + KF");
    }
    name
}

/// Retrieves knowledge for each question and pairs it with the question.
pub fn retrieve_examples(
    data: &AblationData,
    questions: &[Question],
    retrieval: &RetrievalConfig,
    ranker: Option<&dyn Reranker>,
) -> Result<(Vec<QaExample>, Vec<RetrievalTrace>)> {
    let mut examples = Vec::with_capacity(questions.len());
    let mut traces = Vec::with_capacity(questions.len());
    for q in questions {
        let trace = match retrieve(data.index, data.corpus, data.stoplist, q, ranker, retrieval) {
            Ok(t) => t,
            Err(Error::RetrievalFailed) => {
                log::warn!("no knowledge retrieved for {}", q.id);
                RetrievalTrace {
                    question_id: q.id.clone(),
                    steps: retrieval.steps,
                    options: Vec::new(),
                }
            }
            Err(e) => return Err(e),
        };
        let lists: Vec<Vec<Hit>> = if trace.options.is_empty() {
            vec![Vec::new(); q.options.len()]
        } else {
            trace.final_lists().into_iter().map(<[Hit]>::to_vec).collect()
        };
        examples.push(QaExample::new(q, lists, data.corpus)?);
        traces.push(trace);
    }
    Ok((examples, traces))
}

/// Accuracy of a model on examples using `k` facts per input.
pub fn accuracy_with_k(model: &FusionModel, examples: &[QaExample], k: usize) -> Result<f64> {
    let preds = predict_all(model, examples, k)?;
    example_accuracy(&preds, examples)
}

pub fn example_accuracy(predictions: &[Prediction], examples: &[QaExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0;
    for (p, e) in predictions.iter().zip(examples) {
        if p.question_id != e.id {
            return Err(Error::IdMismatch(format!("{} vs {}", p.question_id, e.id)));
        }
        let gold = e.answer.ok_or_else(|| Error::MissingAnswerKey(e.id.clone()))?;
        if p.predicted == e.labels[gold] {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

/// Trains and evaluates one leg. `facts_per_input = 0` gives the
/// no-knowledge configuration regardless of the flags.
pub fn run_leg(data: &AblationData, config: &PipelineConfig) -> Result<AblationRow> {
    let config = config.resolved();
    let ranker: Option<&dyn Reranker> = match (config.use_skr, data.ranker) {
        (false, _) => None,
        (true, Some(r)) => Some(r),
        (true, None) => return Err(Error::InvalidConfig("use_skr requires a trained ranker".into())),
    };
    let (train, _) = retrieve_examples(data, data.train, &config.retrieval, ranker)?;
    let (eval, _) = retrieve_examples(data, data.eval, &config.retrieval, ranker)?;
    let model = train_qa(&train, &config.qa)?;
    let accuracy = accuracy_with_k(&model, &eval, config.facts_per_input)?;
    let flags = config.flags();
    Ok(AblationRow {
        name: if config.facts_per_input == 0 {
            "No Knowledge".into()
        } else {
            flags_name(flags)
        },
        use_step2: flags.use_step2,
        use_skr: flags.use_skr,
        use_kf: flags.use_kf,
        facts_per_input: config.facts_per_input,
        accuracy,
    })
}

/// One row per flag combination plus a leading no-knowledge baseline. Each
/// finished row is passed to `on_row` before the next leg starts, so a failing
/// leg leaves the earlier rows persisted.
pub fn run_ablation(
    data: &AblationData,
    config: &PipelineConfig,
    grid: &[AblationFlags],
    mut on_row: impl FnMut(&AblationRow) -> Result<()>,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(grid.len() + 1);
    let baseline = PipelineConfig {
        facts_per_input: 0,
        use_step2: false,
        use_skr: false,
        use_kf: false,
        ..config.clone()
    };
    let mut legs = vec![baseline];
    legs.extend(grid.iter().map(|&f| config.with_flags(f)));
    for leg in &legs {
        let row = run_leg(data, leg)?;
        log::info!("{}: {:.4}", row.name, row.accuracy);
        on_row(&row)?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.use_step2.to_string(),
                r.use_skr.to_string(),
                r.use_kf.to_string(),
                r.facts_per_input.to_string(),
                format!("{:.4}", r.accuracy),
            ]
        })
        .collect();
    format_table(&["setting", "step2", "skr", "kf", "facts", "accuracy"], &body)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub facts: usize,
    pub accuracy: f64,
}

/// Accuracy of one trained model for each fact count.
pub fn facts_sweep(model: &FusionModel, examples: &[QaExample], counts: &[usize]) -> Result<Vec<SweepPoint>> {
    counts
        .iter()
        .map(|&k| {
            Ok(SweepPoint {
                facts: k,
                accuracy: accuracy_with_k(model, examples, k)?,
            })
        })
        .collect()
}

/// Both tables of a full evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub recall: Vec<StepRecall>,
    pub ranker_accuracy: Option<f64>,
    pub qa_accuracy: Option<f64>,
    pub histogram: Vec<HistogramBin>,
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .recall
            .iter()
            .map(|r| {
                vec![
                    r.step.to_string(),
                    fmt_opt(r.f1_r5),
                    fmt_opt(r.f1_r10),
                    fmt_opt(r.f2_r5),
                    fmt_opt(r.f2_r10),
                    fmt_opt(r.both_r10),
                    r.evaluated.to_string(),
                    r.excluded.to_string(),
                ]
            })
            .collect();
        let mut out = format_table(
            &[
                "step",
                "F1 R@5",
                "F1 R@10",
                "F2 R@5",
                "F2 R@10",
                "both@10",
                "evaluated",
                "excluded",
            ],
            &rows,
        );
        out.push('\n');
        out.push_str(&format_table(
            &["metric", "value"],
            &[
                vec!["ranker accuracy".into(), fmt_opt(self.ranker_accuracy)],
                vec!["qa accuracy".into(), fmt_opt(self.qa_accuracy)],
            ],
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AnswerOption;

    fn q(id: &str, key: &str) -> Question {
        Question {
            id: id.into(),
            stem: "s".into(),
            options: ["A", "B", "C", "D"]
                .iter()
                .map(|l| AnswerOption {
                    label: l.to_string(),
                    text: l.to_lowercase(),
                })
                .collect(),
            answer_key: Some(key.into()),
            gold_facts: vec![],
        }
    }

    fn pred(id: &str, label: &str, conf: f64) -> Prediction {
        Prediction {
            question_id: id.into(),
            labels: vec!["A".into(), "B".into(), "C".into(), "D".into()],
            probs: vec![],
            predicted: label.into(),
            confidence: conf,
        }
    }

    #[test]
    fn recall_basics() {
        let ranked = ["a", "b", "g", "c"];
        assert_eq!(recall_at_n(&ranked, "g", 5), 1);
        assert_eq!(recall_at_n(&ranked, "g", 2), 0);
        assert_eq!(recall_at_n(&ranked, "zz", 100), 0);
        assert_eq!(all_in_top(&ranked, &["a", "c"], 4), 1);
        assert_eq!(all_in_top(&ranked, &["a", "c"], 3), 0);
    }

    #[test]
    fn accuracy_and_histogram() {
        let qs = [q("1", "A"), q("2", "B"), q("3", "C")];
        let preds = [pred("1", "A", 0.9), pred("2", "C", 0.42), pred("3", "C", 1.0)];
        assert!((qa_accuracy(&preds, &qs).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let h = confidence_histogram(&preds, &qs, 20).unwrap();
        assert_eq!(h.len(), 20);
        assert_eq!((h[8].correct_count, h[8].incorrect_count), (0, 1));
        assert_eq!((h[18].correct_count, h[19].correct_count), (1, 1));
        assert_eq!(h.iter().map(|b| b.correct_count + b.incorrect_count).sum::<usize>(), 3);
        assert!(matches!(
            qa_accuracy(&[pred("9", "A", 0.5)], &qs),
            Err(Error::IdMismatch(_))
        ));
    }

    #[test]
    fn table_is_aligned() {
        let t = format_table(&["a", "long"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "a    long\n---  ----\nxyz  1\n");
    }

    #[test]
    fn config_round_trips_through_toml_defaults() {
        let c: PipelineConfig = serde_json::from_str("{\"seed\": 7}").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.facts_per_input, 10);
        let r = c.resolved();
        assert_eq!(r.qa.train.seed, 7);
        assert_eq!(r.ranker.encoder.seed, 7);
        assert_eq!(full_grid().len(), 8);
        assert_eq!(flags_name(full_grid()[7]), "Step 2 + SKR + KF");
    }
}
