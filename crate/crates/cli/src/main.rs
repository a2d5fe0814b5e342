use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use hopqa::corpus::{load_questions, Corpus, Question, Stoplist};
use hopqa::eval::{
    ablation_table, confidence_histogram, facts_sweep, format_table, full_grid, load_corpora, qa_accuracy,
    retrieval_recall, retrieve_examples, run_ablation, write_histogram_csv, AblationData, AblationFlags, EvalReport,
    PipelineConfig,
};
use hopqa::fusion::{load_qa, predict_all, save_qa, train_qa_with, write_predictions};
use hopqa::index::{build_index, load_snapshot, save_snapshot, InvertedIndex};
use hopqa::rankdata::{
    balance_and_split, build_rank_dataset, load_scitail, read_examples, write_examples, DocSimilarity, TfIdfSimilarity,
    WordVectors,
};
use hopqa::ranker::{eval_ranker, load_ranker, save_ranker, score_file, train_ranker_with, RankerModel};
use hopqa::retrieval::{write_traces, Reranker};

#[derive(Parser)]
#[command(
    name = "hopqa",
    version,
    about = "Two-step retrieval, knowledge ranking and fusion QA"
)]
struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for all artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the BM25 index over the configured corpora.
    Index,
    /// Run step-1/step-2 retrieval for a question file.
    Retrieve {
        #[arg(long)]
        questions: Option<PathBuf>,
        #[arg(long)]
        ranker: Option<PathBuf>,
    },
    /// Mine the relevant/irrelevant fact dataset for the ranker.
    BuildRankdata {
        #[arg(long)]
        questions: Option<PathBuf>,
    },
    /// Train the fact ranker on the mined dataset.
    TrainRanker {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        valid: Option<PathBuf>,
    },
    /// Score (question, answer, fact) JSON lines with a trained ranker.
    Rank {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        ranker: Option<PathBuf>,
    },
    /// Retrieve knowledge for the training questions and train the QA model.
    TrainQa {
        #[arg(long)]
        questions: Option<PathBuf>,
        #[arg(long)]
        ranker: Option<PathBuf>,
    },
    /// Predict answers for a question file.
    Answer {
        #[arg(long)]
        questions: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        ranker: Option<PathBuf>,
    },
    /// Retrieval recall, ranker accuracy, QA accuracy and the confidence histogram.
    Eval {
        #[arg(long)]
        questions: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        ranker: Option<PathBuf>,
    },
    /// Train and evaluate one QA model per flag combination.
    Ablate {
        /// `full` (all eight flag combinations) or `step-skr` (step × ranker, KF as configured).
        #[arg(long, default_value = "full")]
        grid: String,
        #[arg(long)]
        ranker: Option<PathBuf>,
    },
    /// Accuracy of a trained QA model as the facts per input vary.
    Sweep {
        #[arg(long)]
        questions: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        ranker: Option<PathBuf>,
        /// Comma-separated fact counts; defaults to the configured list.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
    },
}

struct Ctx {
    config: PipelineConfig,
    out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn stoplist(&self) -> Result<Stoplist> {
        Ok(match &self.config.paths.stopwords {
            Some(p) => Stoplist::load(p).with_context(|| format!("loading stopwords {}", p.display()))?,
            None => Stoplist::default_english(),
        })
    }

    fn index(&self) -> Result<(InvertedIndex, Corpus)> {
        let path = self.path("index.json");
        let (index, facts) =
            load_snapshot(&path).with_context(|| format!("loading {} (run `hopqa index` first)", path.display()))?;
        Ok((index, Corpus::from_facts(facts)?))
    }

    fn questions(&self, explicit: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<Vec<Question>> {
        let path = explicit
            .as_ref()
            .or(configured.as_ref())
            .with_context(|| format!("no {what} question file given"))?;
        load_questions(path).with_context(|| format!("loading {}", path.display()))
    }

    fn train_questions(&self, explicit: &Option<PathBuf>) -> Result<Vec<Question>> {
        self.questions(explicit, &self.config.paths.train_questions, "training")
    }

    fn eval_questions(&self, explicit: &Option<PathBuf>) -> Result<Vec<Question>> {
        self.questions(explicit, &self.config.paths.eval_questions, "evaluation")
    }

    /// The ranker when the configuration asks for one.
    fn ranker(&self, explicit: &Option<PathBuf>) -> Result<Option<RankerModel>> {
        if !self.config.use_skr {
            return Ok(None);
        }
        let path = explicit.clone().unwrap_or_else(|| self.path("ranker.ckpt"));
        if !path.exists() {
            bail!(
                "use_skr is set but no ranker at {} (run `hopqa train-ranker` or set use_skr = false)",
                path.display()
            );
        }
        Ok(Some(load_ranker(&path)?))
    }

    fn model_path(&self, explicit: &Option<PathBuf>) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.path("qa.ckpt"))
    }
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    print!("{text}");
    Ok(())
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let config = config.resolved();
    config.validate()?;
    Ok(config)
}

fn cmd_index(ctx: &Ctx) -> Result<()> {
    if ctx.config.paths.corpus.is_empty() {
        bail!("no corpus files configured (paths.corpus)");
    }
    let corpus = load_corpora(&ctx.config.paths.corpus)?;
    let index = build_index(corpus.facts(), ctx.config.bm25)?;
    save_snapshot(ctx.path("index.json"), &index, corpus.facts())?;
    println!(
        "indexed {} facts, {} terms, average length {:.2}",
        index.num_docs(),
        index.terms().count(),
        index.avg_len()
    );
    Ok(())
}

fn cmd_retrieve(ctx: &Ctx, questions: &Option<PathBuf>, ranker: &Option<PathBuf>) -> Result<()> {
    let (index, corpus) = ctx.index()?;
    let stoplist = ctx.stoplist()?;
    let questions = ctx.eval_questions(questions)?;
    let ranker = ctx.ranker(ranker)?;
    let data = AblationData {
        corpus: &corpus,
        index: &index,
        stoplist: &stoplist,
        train: &[],
        eval: &questions,
        ranker: ranker.as_ref(),
    };
    let (_, traces) = retrieve_examples(
        &data,
        &questions,
        &ctx.config.retrieval,
        ranker.as_ref().map(|r| r as &dyn Reranker),
    )?;
    write_traces(ctx.path("traces.jsonl"), &traces)?;
    let report = EvalReport {
        recall: retrieval_recall(&questions, &traces, &corpus),
        ranker_accuracy: None,
        qa_accuracy: None,
        histogram: Vec::new(),
    };
    print!("{}", report.to_table());
    Ok(())
}

fn cmd_build_rankdata(ctx: &Ctx, questions: &Option<PathBuf>) -> Result<()> {
    let (index, corpus) = ctx.index()?;
    let stoplist = ctx.stoplist()?;
    let questions = ctx.train_questions(questions)?;
    let sim: Box<dyn DocSimilarity> = match &ctx.config.paths.word_vectors {
        Some(p) => Box::new(WordVectors::load(p)?),
        None => Box::new(TfIdfSimilarity::from_corpus(&corpus)),
    };
    let scitail = match &ctx.config.paths.scitail {
        Some(p) => load_scitail(p)?,
        None => Vec::new(),
    };
    let pool = build_rank_dataset(
        &questions,
        &index,
        &corpus,
        &stoplist,
        sim.as_ref(),
        &scitail,
        &ctx.config.rankdata,
    );
    let (train, valid) = balance_and_split(pool, ctx.config.seed, ctx.config.rankdata.valid_fraction)?;
    write_examples(ctx.path("rank_train.jsonl"), &train)?;
    write_examples(ctx.path("rank_valid.jsonl"), &valid)?;
    print!(
        "{}",
        format_table(
            &["split", "examples", "relevant"],
            &[
                vec!["train".into(), train.len().to_string(), (train.len() / 2).to_string()],
                vec!["valid".into(), valid.len().to_string(), (valid.len() / 2).to_string()],
            ],
        )
    );
    Ok(())
}

fn cmd_train_ranker(ctx: &Ctx, train: &Option<PathBuf>, valid: &Option<PathBuf>) -> Result<()> {
    let train_path = train.clone().unwrap_or_else(|| ctx.path("rank_train.jsonl"));
    let train = read_examples(&train_path).with_context(|| format!("loading {}", train_path.display()))?;
    let valid_path = valid.clone().unwrap_or_else(|| ctx.path("rank_valid.jsonl"));
    let valid = if valid_path.exists() {
        read_examples(&valid_path)?
    } else {
        Vec::new()
    };
    let (model, history) = train_ranker_with(&train, &ctx.config.ranker, |_, s| {
        log::info!("ranker epoch {} loss {:.5}", s.epoch, s.mean_loss);
        true
    })?;
    save_ranker(ctx.path("ranker.ckpt"), &model)?;
    write_jsonl(
        &ctx.path("ranker_history.jsonl"),
        &history
            .iter()
            .map(|s| serde_json::json!({"epoch": s.epoch, "mean_loss": s.mean_loss}))
            .collect::<Vec<_>>(),
    )?;
    let mut rows = vec![vec![
        "train".to_string(),
        format!("{:.4}", eval_ranker(&model, &train)?),
    ]];
    if !valid.is_empty() {
        rows.push(vec!["valid".into(), format!("{:.4}", eval_ranker(&model, &valid)?)]);
    }
    write_text(&ctx.path("ranker.txt"), &format_table(&["split", "accuracy"], &rows))
}

fn cmd_rank(ctx: &Ctx, input: &Path, ranker: &Option<PathBuf>) -> Result<()> {
    let path = ranker.clone().unwrap_or_else(|| ctx.path("ranker.ckpt"));
    let model = load_ranker(&path).with_context(|| format!("loading {}", path.display()))?;
    let n = score_file(&model, input, ctx.path("scores.jsonl"))?;
    println!("scored {n} rows");
    Ok(())
}

fn cmd_train_qa(ctx: &Ctx, questions: &Option<PathBuf>, ranker: &Option<PathBuf>) -> Result<()> {
    let (index, corpus) = ctx.index()?;
    let stoplist = ctx.stoplist()?;
    let questions = ctx.train_questions(questions)?;
    let ranker = ctx.ranker(ranker)?;
    let data = AblationData {
        corpus: &corpus,
        index: &index,
        stoplist: &stoplist,
        train: &questions,
        eval: &[],
        ranker: ranker.as_ref(),
    };
    let (examples, _) = retrieve_examples(
        &data,
        &questions,
        &ctx.config.retrieval,
        ranker.as_ref().map(|r| r as &dyn Reranker),
    )?;
    let (model, history) = train_qa_with(&examples, &ctx.config.qa, |_, s| {
        log::info!("qa epoch {} loss {:.5}", s.epoch, s.mean_loss);
        true
    })?;
    save_qa(ctx.path("qa.ckpt"), &model)?;
    write_jsonl(
        &ctx.path("qa_history.jsonl"),
        &history
            .iter()
            .map(|s| serde_json::json!({"epoch": s.epoch, "mean_loss": s.mean_loss}))
            .collect::<Vec<_>>(),
    )?;
    println!(
        "trained on {} questions, final loss {:.5}",
        examples.len(),
        history.last().map_or(f64::NAN, |s| s.mean_loss)
    );
    Ok(())
}

struct Answered {
    questions: Vec<Question>,
    predictions: Vec<hopqa::fusion::Prediction>,
    traces: Vec<hopqa::retrieval::RetrievalTrace>,
    corpus: Corpus,
}

fn answer(
    ctx: &Ctx,
    questions: &Option<PathBuf>,
    model: &Option<PathBuf>,
    ranker: &Option<PathBuf>,
) -> Result<Answered> {
    let (index, corpus) = ctx.index()?;
    let stoplist = ctx.stoplist()?;
    let questions = ctx.eval_questions(questions)?;
    let ranker = ctx.ranker(ranker)?;
    let path = ctx.model_path(model);
    let model = load_qa(&path).with_context(|| format!("loading {}", path.display()))?;
    let data = AblationData {
        corpus: &corpus,
        index: &index,
        stoplist: &stoplist,
        train: &[],
        eval: &questions,
        ranker: ranker.as_ref(),
    };
    let (examples, traces) = retrieve_examples(
        &data,
        &questions,
        &ctx.config.retrieval,
        ranker.as_ref().map(|r| r as &dyn Reranker),
    )?;
    let predictions = predict_all(&model, &examples, model.facts_per_input)?;
    Ok(Answered {
        questions,
        predictions,
        traces,
        corpus,
    })
}

fn keyed(questions: &[Question]) -> bool {
    !questions.is_empty() && questions.iter().all(|q| q.answer_key.is_some())
}

fn cmd_answer(ctx: &Ctx, questions: &Option<PathBuf>, model: &Option<PathBuf>, ranker: &Option<PathBuf>) -> Result<()> {
    let a = answer(ctx, questions, model, ranker)?;
    write_predictions(ctx.path("predictions.jsonl"), &a.predictions)?;
    if keyed(&a.questions) {
        let hist = confidence_histogram(&a.predictions, &a.questions, ctx.config.histogram_bins)?;
        write_histogram_csv(ctx.path("histogram.csv"), &hist)?;
        println!("accuracy {:.4}", qa_accuracy(&a.predictions, &a.questions)?);
    }
    println!("answered {} questions", a.predictions.len());
    Ok(())
}

fn cmd_eval(ctx: &Ctx, questions: &Option<PathBuf>, model: &Option<PathBuf>, ranker: &Option<PathBuf>) -> Result<()> {
    let a = answer(ctx, questions, model, ranker)?;
    let ranker_accuracy = {
        let valid = ctx.path("rank_valid.jsonl");
        match ctx.ranker(ranker)? {
            Some(r) if valid.exists() => {
                let ex = read_examples(&valid)?;
                (!ex.is_empty()).then(|| eval_ranker(&r, &ex)).transpose()?
            }
            _ => None,
        }
    };
    let (qa, histogram) = if keyed(&a.questions) {
        (
            Some(qa_accuracy(&a.predictions, &a.questions)?),
            confidence_histogram(&a.predictions, &a.questions, ctx.config.histogram_bins)?,
        )
    } else {
        (None, Vec::new())
    };
    let report = EvalReport {
        recall: retrieval_recall(&a.questions, &a.traces, &a.corpus),
        ranker_accuracy,
        qa_accuracy: qa,
        histogram,
    };
    write_predictions(ctx.path("predictions.jsonl"), &a.predictions)?;
    write_histogram_csv(ctx.path("histogram.csv"), &report.histogram)?;
    fs::write(ctx.path("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    write_text(&ctx.path("report.txt"), &report.to_table())
}

fn cmd_ablate(ctx: &Ctx, grid: &str, ranker: &Option<PathBuf>) -> Result<()> {
    let grid: Vec<AblationFlags> = match grid {
        "full" => full_grid(),
        "step-skr" => full_grid()
            .into_iter()
            .filter(|f| f.use_kf == ctx.config.use_kf)
            .collect(),
        other => bail!("unknown grid `{other}` (expected `full` or `step-skr`)"),
    };
    let (index, corpus) = ctx.index()?;
    let stoplist = ctx.stoplist()?;
    let train = ctx.train_questions(&None)?;
    let eval = ctx.eval_questions(&None)?;
    let needs_ranker = grid.iter().any(|f| f.use_skr);
    let ranker = if needs_ranker {
        let path = ranker.clone().unwrap_or_else(|| ctx.path("ranker.ckpt"));
        if !path.exists() {
            bail!(
                "the grid has ranker legs but no ranker at {} (run `hopqa train-ranker`)",
                path.display()
            );
        }
        Some(load_ranker(&path)?)
    } else {
        None
    };
    let data = AblationData {
        corpus: &corpus,
        index: &index,
        stoplist: &stoplist,
        train: &train,
        eval: &eval,
        ranker: ranker.as_ref(),
    };
    let jsonl = ctx.path("ablation.jsonl");
    let mut sink = std::io::BufWriter::new(fs::File::create(&jsonl)?);
    let rows = run_ablation(&data, &ctx.config, &grid, |row| {
        serde_json::to_writer(&mut sink, row)?;
        sink.write_all(b"\n")?;
        sink.flush()?;
        Ok(())
    })
    .with_context(|| format!("ablation aborted; finished rows are in {}", jsonl.display()))?;
    write_text(&ctx.path("ablation.txt"), &ablation_table(&rows))
}

fn cmd_sweep(
    ctx: &Ctx,
    questions: &Option<PathBuf>,
    model: &Option<PathBuf>,
    ranker: &Option<PathBuf>,
    counts: &Option<Vec<usize>>,
) -> Result<()> {
    let (index, corpus) = ctx.index()?;
    let stoplist = ctx.stoplist()?;
    let questions = ctx.eval_questions(questions)?;
    let ranker = ctx.ranker(ranker)?;
    let path = ctx.model_path(model);
    let model = load_qa(&path).with_context(|| format!("loading {}", path.display()))?;
    let data = AblationData {
        corpus: &corpus,
        index: &index,
        stoplist: &stoplist,
        train: &[],
        eval: &questions,
        ranker: ranker.as_ref(),
    };
    let (examples, _) = retrieve_examples(
        &data,
        &questions,
        &ctx.config.retrieval,
        ranker.as_ref().map(|r| r as &dyn Reranker),
    )?;
    let counts = counts.clone().unwrap_or_else(|| ctx.config.sweep_counts.clone());
    let points = facts_sweep(&model, &examples, &counts)?;
    write_jsonl(&ctx.path("sweep.jsonl"), &points)?;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![p.facts.to_string(), format!("{:.4}", p.accuracy)])
        .collect();
    write_text(&ctx.path("sweep.txt"), &format_table(&["facts", "accuracy"], &rows))
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let ctx = Ctx { config, out: cli.out };
    match &cli.command {
        Command::Index => cmd_index(&ctx),
        Command::Retrieve { questions, ranker } => cmd_retrieve(&ctx, questions, ranker),
        Command::BuildRankdata { questions } => cmd_build_rankdata(&ctx, questions),
        Command::TrainRanker { train, valid } => cmd_train_ranker(&ctx, train, valid),
        Command::Rank { input, ranker } => cmd_rank(&ctx, input, ranker),
        Command::TrainQa { questions, ranker } => cmd_train_qa(&ctx, questions, ranker),
        Command::Answer {
            questions,
            model,
            ranker,
        } => cmd_answer(&ctx, questions, model, ranker),
        Command::Eval {
            questions,
            model,
            ranker,
        } => cmd_eval(&ctx, questions, model, ranker),
        Command::Ablate { grid, ranker } => cmd_ablate(&ctx, grid, ranker),
        Command::Sweep {
            questions,
            model,
            ranker,
            counts,
        } => cmd_sweep(&ctx, questions, model, ranker, counts),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
