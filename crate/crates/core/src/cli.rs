//! Command-line front end. Each subcommand reads and writes the file formats
//! of the module it wraps, so pipeline stages can be run and inspected one
//! at a time.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::aligner::{format_aligned_lines, pair_line, parse_aligned_lines, save_aligner, train_aligner_on, AlignerConfig};
use crate::chunker::{format_examples, make_examples_with, parse_examples, ChunkConfig, ChunkExample, MAX_CHUNK};
use crate::corpus::{
    default_lexicon, format_tokenized_pairs, generate_synthetic_corpus, load_corpus, parse_tokenized_pairs,
    preprocess_corpus, split_train_test, RewriteRule, RewriteTable, TokenizedPair,
};
use crate::eval::{
    evaluate_baseline, evaluate_system, format_report_kv, format_report_table, run_experiment_matrix,
    ExperimentConfig,
};
use crate::model::{load_model, normalize_tokens, save_model, train_model, ModelConfig, Optimizer, DEFAULT_SEED};

#[derive(Debug, Parser)]
#[command(name = "dialekt", version, about = "Normalize dialectal Finland Swedish transcripts")]
pub struct Cli {
    /// Seed for every random choice (split, initialisation, batching, dropout).
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads. Computation is single-threaded, so any value gives
    /// bit-identical results.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: u32,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean and tokenize a corpus TSV into tokenized pairs.
    Preprocess(PreprocessArgs),
    /// Word-align tokenized pairs into per-token dialect:normalized pairs.
    Align(AlignArgs),
    /// Turn aligned lines into character-level source/target examples.
    Chunk(ChunkArgs),
    /// Train a normalization model on chunk examples.
    Train(TrainArgs),
    /// Normalize text from standard input, one line at a time.
    Normalize(NormalizeArgs),
    /// Score a model (and the no-normalization baseline) on tokenized pairs.
    Evaluate(EvaluateArgs),
    /// Split, align, train one model per chunk size and score them all.
    Experiment(ExperimentArgs),
    /// Generate a synthetic parallel corpus from standard→dialect rules.
    Synth(SynthArgs),
}

fn chunk_size(s: &str) -> Result<usize, String> {
    let k: usize = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (1..=MAX_CHUNK).contains(&k) {
        Ok(k)
    } else {
        Err(format!("chunk size must be in 1..={MAX_CHUNK}"))
    }
}

fn ratio(s: &str) -> Result<f64, String> {
    let r: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if r > 0.0 && r < 1.0 {
        Ok(r)
    } else {
        Err("ratio must be strictly between 0 and 1".into())
    }
}

/// Optional train/test split written next to the full output.
#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Fraction of lines in the training side.
    #[arg(long, default_value = "0.7", value_parser = ratio)]
    pub ratio: f64,
    #[arg(long, requires = "test_out")]
    pub train_out: Option<PathBuf>,
    #[arg(long, requires = "train_out")]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Corpus TSV with a `region<TAB>dialect<TAB>normalized` header.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Rewrite table (`surface<TAB>replacement` per line).
    #[arg(long)]
    pub rewrites: Option<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Where to write the cleanliness report; standard error otherwise.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Args)]
pub struct AlignerArgs {
    #[arg(long, default_value_t = AlignerConfig::default().lambda)]
    pub lambda: f64,
    #[arg(long, default_value_t = AlignerConfig::default().p_null)]
    pub p_null: f64,
    #[arg(long, default_value_t = AlignerConfig::default().smoothing_alpha)]
    pub smoothing_alpha: f64,
    #[arg(long, default_value_t = AlignerConfig::default().em_iterations)]
    pub em_iterations: usize,
}

impl AlignerArgs {
    fn config(&self) -> AlignerConfig {
        AlignerConfig {
            lambda: self.lambda,
            p_null: self.p_null,
            smoothing_alpha: self.smoothing_alpha,
            em_iterations: self.em_iterations,
        }
    }
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Tokenized pairs to align.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Further tokenized pairs used only as aligner training data.
    #[arg(long)]
    pub extra: Vec<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Also save the trained translation tables.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
    #[command(flatten)]
    pub aligner: AlignerArgs,
}

#[derive(Debug, Args)]
pub struct ChunkArgs {
    /// Aligned lines from `align`.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short = 'k', value_parser = chunk_size)]
    pub chunk_size: usize,
    /// Distance between window starts; defaults to the chunk size.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub source_out: PathBuf,
    #[arg(long)]
    pub target_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub train_steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub optimizer: Option<Optimizer>,
    #[arg(long)]
    pub beam_width: Option<usize>,
    /// Any other model setting, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub settings: Vec<String>,
}

impl ModelArgs {
    fn config(&self, seed: u64) -> Result<ModelConfig> {
        let mut c = ModelConfig { seed, ..Default::default() };
        for kv in &self.settings {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set {kv:?}: expected KEY=VALUE"))?;
            c.set(k.trim(), v.trim())?;
        }
        if let Some(v) = self.embedding_dim {
            c.embedding_dim = v;
        }
        if let Some(v) = self.hidden_dim {
            c.hidden_dim = v;
        }
        if let Some(v) = self.layers {
            c.encoder_layers = v;
            c.decoder_layers = v;
        }
        if let Some(v) = self.dropout {
            c.dropout = v;
        }
        if let Some(v) = self.train_steps {
            c.train_steps = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.optimizer {
            c.optimizer = v;
        }
        if let Some(v) = self.beam_width {
            c.beam_width = v;
        }
        c.seed = seed;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Source side from `chunk`.
    #[arg(long)]
    pub source: PathBuf,
    /// Target side from `chunk`.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, short = 'k', value_parser = chunk_size)]
    pub chunk_size: usize,
    /// Output model file.
    #[arg(long, short)]
    pub model: PathBuf,
    /// Write the sampled `(step, loss)` curve here.
    #[arg(long)]
    pub loss_log: Option<PathBuf>,
    #[command(flatten)]
    pub model_args: ModelArgs,
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    #[arg(long)]
    pub beam_width: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    /// Tokenized pairs to score against.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Results table; standard output otherwise.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Machine-readable key=value report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Tokenized pairs; split into train and test by `--ratio` and `--seed`.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, default_value = "0.7", value_parser = ratio)]
    pub ratio: f64,
    /// Chunk sizes to train, e.g. `1,2,3`.
    #[arg(long, short = 'k', value_delimiter = ',', default_value = "1,2,3,4,5", value_parser = chunk_size)]
    pub chunk_size: Vec<usize>,
    /// Results table; standard output otherwise.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Machine-readable key=value report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Directory to save each trained model in as `model-k<k>.bin`.
    #[arg(long)]
    pub save_models: Option<PathBuf>,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[command(flatten)]
    pub aligner: AlignerArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub lines: usize,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Add a rule joining `sådana här` into the single dialect token
    /// `såhäna` with this per-line probability.
    #[arg(long)]
    pub join_probability: Option<f64>,
    #[command(flatten)]
    pub split: SplitArgs,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_pairs(path: &Path) -> Result<Vec<TokenizedPair>> {
    parse_tokenized_pairs(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn write_split(pairs: &[TokenizedPair], split: &SplitArgs, seed: u64) -> Result<()> {
    if let (Some(train), Some(test)) = (&split.train_out, &split.test_out) {
        let s = split_train_test(pairs, split.ratio, seed)?;
        write(train, &format_tokenized_pairs(&s.train))?;
        write(test, &format_tokenized_pairs(&s.test))?;
    }
    Ok(())
}

pub fn cmd_preprocess(args: &PreprocessArgs, seed: u64) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let table = match &args.rewrites {
        Some(p) => RewriteTable::load(p)?,
        None => RewriteTable::default(),
    };
    let report = preprocess_corpus(&corpus, &table);
    let mut text = format!(
        "lines {}\nkept {}\nrewritten {}\nrejected {}\n",
        corpus.len(),
        report.pairs.len(),
        report.rewritten.len(),
        report.rejected.len()
    );
    for (region, n) in corpus.lines_per_region() {
        text.push_str(&format!("region\t{region}\t{n}\n"));
    }
    for (id, side, before, after) in &report.rewritten {
        text.push_str(&format!("rewritten\t{id}\t{side}\t{before}\t{after}\n"));
    }
    for (id, reason) in &report.rejected {
        text.push_str(&format!("rejected\t{id}\t{reason}\n"));
    }
    match &args.report {
        Some(p) => write(p, &text)?,
        None => eprint!("{text}"),
    }
    if !report.rejected.is_empty() {
        let ids: Vec<&str> = report.rejected.iter().map(|(id, _)| id.as_str()).collect();
        bail!("{} row(s) failed cleaning (line ids {}); extend the rewrite table", ids.len(), ids.join(", "));
    }
    write(&args.output, &format_tokenized_pairs(&report.pairs))?;
    write_split(&report.pairs, &args.split, seed)
}

pub fn cmd_align(args: &AlignArgs) -> Result<()> {
    let pairs = read_pairs(&args.input)?;
    let mut training: Vec<TokenizedPair> = pairs.clone();
    for p in &args.extra {
        training.extend(read_pairs(p)?);
    }
    training.retain(|p| !p.dialect_tokens.is_empty() && !p.normalized_tokens.is_empty());
    let model = train_aligner_on(&training, &args.aligner.config())?;
    if let Some(p) = &args.save_model {
        save_aligner(&model, p)?;
    }
    let lines: Vec<_> = pairs.iter().map(|p| pair_line(p, &model)).collect();
    write(&args.output, &format_aligned_lines(&lines))
}

pub fn cmd_chunk(args: &ChunkArgs) -> Result<()> {
    let lines = parse_aligned_lines(&read(&args.input)?)?;
    let config = ChunkConfig { k: args.chunk_size, stride: args.stride.unwrap_or(args.chunk_size) };
    let mut examples = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        examples.extend(make_examples_with(line, config).with_context(|| format!("aligned line {}", i + 1))?);
    }
    let (src, tgt) = format_examples(&examples);
    write(&args.source_out, &src)?;
    write(&args.target_out, &tgt)
}

fn read_examples(source: &Path, target: &Path, k: usize) -> Result<Vec<ChunkExample>> {
    Ok(parse_examples(&read(source)?, &read(target)?, k)?)
}

pub fn cmd_train(args: &TrainArgs, seed: u64) -> Result<()> {
    let examples = read_examples(&args.source, &args.target, args.chunk_size)?;
    let config = args.model_args.config(seed)?;
    let (model, report) = train_model(&examples, &config)?;
    save_model(&model, &args.model)?;
    if let Some(p) = &args.loss_log {
        let text: String = report.loss_curve.iter().map(|(s, l)| format!("{s}\t{l:.6}\n")).collect();
        write(p, &text)?;
    }
    eprintln!(
        "trained {} steps on {} examples; final training loss {:.4} nats/symbol; learning rate {}",
        report.steps_run,
        examples.len(),
        report.final_training_loss,
        report.final_learning_rate
    );
    Ok(())
}

pub fn cmd_normalize<R: BufRead, W: Write>(args: &NormalizeArgs, input: R, mut output: W) -> Result<()> {
    let mut model = load_model(&args.model)?;
    if let Some(w) = args.beam_width {
        model.config.beam_width = w.max(1);
    }
    for line in input.lines() {
        let line = line.context("reading input")?;
        let tokens: Vec<String> = line.to_lowercase().split_whitespace().map(str::to_string).collect();
        writeln!(output, "{}", normalize_tokens(&model, &tokens).join(" "))?;
    }
    output.flush()?;
    Ok(())
}

fn emit_reports(reports: &[crate::eval::EvalReport], output: &Option<PathBuf>, kv: &Option<PathBuf>) -> Result<()> {
    let table = format_report_table(reports);
    match output {
        Some(p) => write(p, &table)?,
        None => print!("{table}"),
    }
    if let Some(p) = kv {
        write(p, &format_report_kv(reports))?;
    }
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let pairs = read_pairs(&args.input)?;
    let label = crate::eval::chunk_label(model.chunk_size);
    let reports = vec![
        evaluate_baseline(&pairs)?,
        evaluate_system(&label, &pairs, |d| normalize_tokens(&model, d))?,
    ];
    emit_reports(&reports, &args.output, &args.report)
}

pub fn cmd_experiment(args: &ExperimentArgs, seed: u64) -> Result<()> {
    let pairs = read_pairs(&args.input)?;
    let split = split_train_test(&pairs, args.ratio, seed)?;
    let config = ExperimentConfig {
        chunk_sizes: args.chunk_size.clone(),
        model: args.model_args.config(seed)?,
        aligner: args.aligner.config(),
    };
    let result = run_experiment_matrix(&split.train, &split.test, &config)?;
    for (k, r) in &result.training {
        eprintln!("k={k}: {} steps, final training loss {:.4}", r.steps_run, r.final_training_loss);
    }
    if let Some(dir) = &args.save_models {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for model in &result.models {
            save_model(model, &dir.join(format!("model-k{}.bin", model.chunk_size)))?;
        }
    }
    emit_reports(&result.reports, &args.output, &args.report)
}

pub fn cmd_synth(args: &SynthArgs, seed: u64) -> Result<()> {
    let mut rules = RewriteRule::default_set();
    if let Some(p) = args.join_probability {
        if !(0.0..=1.0).contains(&p) {
            bail!("--join-probability must be in [0, 1]");
        }
        rules.push(RewriteRule::JoinPhrase {
            standard: vec!["sådana".into(), "här".into()],
            dialect: "såhäna".into(),
            probability: p,
        });
    }
    let pairs = generate_synthetic_corpus(&rules, &default_lexicon(), args.lines, seed)?;
    write(&args.output, &format_tokenized_pairs(&pairs))?;
    write_split(&pairs, &args.split, seed)
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Preprocess(a) => cmd_preprocess(a, seed),
        Command::Align(a) => cmd_align(a),
        Command::Chunk(a) => cmd_chunk(a),
        Command::Train(a) => cmd_train(a, seed),
        Command::Normalize(a) => cmd_normalize(a, io::stdin().lock(), io::stdout().lock()),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Experiment(a) => cmd_experiment(a, seed),
        Command::Synth(a) => cmd_synth(a, seed),
    }
}
