//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use icred_core::corpus::{
    corpus_stats, payload_position, split_dataset, synth_generate, BuildOptions, ContextInstance, GenericFilter,
    Vocabulary,
};
use icred_core::metrics::{
    ablation_table, bucket_rows, split_tokens, AblationRow, Bucket, EvalReport, NounLexicon, Outcome,
};
use icred_core::model::{GenerateOptions, Model, ModelConfig, RoleSource, Search};
use icred_core::trainer::{TrainState, Trainer};

use crate::checkpoint::{self, LOSS_CSV, VOCAB};
use crate::config::{existing, required, RunConfig};
use crate::error::{IcredError, Result};
use crate::executor::ThreadedExecutor;
use crate::io::{read_jsonl, read_text, read_vocab, write_jsonl, write_text, write_vocab};
use crate::pipeline::{self, AblationSetup, ABLATIONS};

/// Default noun list used for the `#Noun` column.
pub const DEFAULT_NOUNS: &str = include_str!("../resources/nouns.txt");
/// Default generic-response patterns used by `ingest`.
pub const DEFAULT_GENERIC: &str = include_str!("../resources/generic_responses.txt");

const AFTER_HELP: &str = "Settings resolve as: dedicated flag, then --set, then the --config file, then the built-in default.\n\
Verbosity follows ICRED_LOG (error, warn, info, debug). Exit codes: 0 success, 2 bad configuration or input, 3 numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "icred", version, about = "Interlocutor-aware response generation for multi-party chat", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file of `key = value` lines
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for initialization, batching, splitting and synthesis
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Which utterance the decoder attends over
    #[arg(long, global = true, value_name = "TYPE", value_parser = ["addressee", "all", "latest", "speaker", "none"])]
    pub memory_type: Option<String>,
    /// Zero the responding speaker's interlocutor vector in the decoder
    #[arg(long, global = true)]
    pub no_speaker_vector: bool,
    /// Zero the target addressee's interlocutor vector in the decoder
    #[arg(long, global = true)]
    pub no_addressee_vector: bool,
    /// Train the speaker and addressee prediction head jointly
    #[arg(long, global = true)]
    pub joint_prediction: bool,
    /// Beam width; 1 decodes greedily
    #[arg(long, global = true, value_name = "N")]
    pub beam: Option<usize>,
    /// Worker threads
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Set any configuration key, e.g. --set lr=0.005 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a raw tab-separated chat log into a JSON-lines corpus
    Ingest(IngestArgs),
    /// Write a synthetic addressee-copy corpus split into train/dev/test
    Synth(SynthArgs),
    /// Train a model and write a checkpoint directory
    Train(TrainArgs),
    /// Generate one response per input instance
    Generate(GenerateArgs),
    /// Score generated (or given) responses against the references
    Evaluate(EvaluateArgs),
    /// Train and score several model variants under one protocol
    Ablate(AblateArgs),
    /// Predict the responding speaker and target addressee
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw log: time<TAB>speaker<TAB>utterance, blank line between conversations
    pub input: PathBuf,
    /// Output corpus (JSON lines)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Generic-response patterns, one per line
    #[arg(long, value_name = "PATH")]
    pub rules: Option<PathBuf>,
    /// Preceding turns kept as context
    #[arg(long, value_name = "N")]
    pub window: Option<usize>,
    /// Also write the statistics as JSON
    #[arg(long, value_name = "PATH")]
    pub stats_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for train.jsonl, dev.jsonl and test.jsonl
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Number of instances before splitting
    #[arg(long, value_name = "N")]
    pub instances: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "PATH")]
    pub train: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub dev: Option<PathBuf>,
    /// Checkpoint directory
    #[arg(long, value_name = "DIR")]
    pub checkpoint: Option<PathBuf>,
    /// Fixed vocabulary file instead of one built from the training split
    #[arg(long, value_name = "PATH")]
    pub vocab: Option<PathBuf>,
    /// Pre-trained `word v1 v2 ...` vectors for the embedding table
    #[arg(long, value_name = "PATH")]
    pub word_vectors: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub max_steps: Option<usize>,
    /// Continue the run saved in the checkpoint directory
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_name = "DIR")]
    pub checkpoint: Option<PathBuf>,
    /// Corpus whose instances get responses (responses present are ignored)
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Output file; standard output when absent
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Condition on predicted instead of gold roles (joint models)
    #[arg(long)]
    pub predicted_roles: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "DIR")]
    pub checkpoint: Option<PathBuf>,
    /// Corpus with reference responses
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Score these responses (one per line) instead of generating
    #[arg(long, value_name = "PATH")]
    pub candidates: Option<PathBuf>,
    /// Noun list for the `#Noun` column
    #[arg(long, value_name = "PATH")]
    pub lexicon: Option<PathBuf>,
    /// Write the full report as JSON
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Response position checked for payload accuracy (synthetic corpora)
    #[arg(long, value_name = "N")]
    pub payload_position: Option<usize>,
    /// Condition on predicted roles and add the prediction buckets
    #[arg(long)]
    pub predicted_roles: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, value_name = "PATH")]
    pub train: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub dev: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub test: Option<PathBuf>,
    /// Comma-separated variants: full, "w/o Adr_Mem", "w/o Ctx_Spk_Vec",
    /// "w/o Ctx_Adr_Vec" or memory=<type>
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub variants: Vec<String>,
    #[arg(long, value_name = "PATH")]
    pub lexicon: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub payload_position: Option<usize>,
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "DIR")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Output file of JSON lines; standard output when absent
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

impl Common {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut run = RunConfig::default();
        if let Some(path) = &self.config {
            run.merge_file(path)?;
        }
        for pair in &self.set {
            let Some((k, v)) = pair.split_once('=') else {
                return Err(IcredError::Config(format!("--set expects KEY=VALUE, got {pair:?}")));
            };
            run.set(k.trim(), v.trim())?;
        }
        if let Some(seed) = self.seed {
            run.train.seed = seed;
        }
        if let Some(t) = &self.memory_type {
            run.model.memory_type = t.parse()?;
        }
        if self.no_speaker_vector {
            run.model.use_speaker_vector = false;
        }
        if self.no_addressee_vector {
            run.model.use_addressee_vector = false;
        }
        if self.joint_prediction {
            run.model.joint_prediction = true;
        }
        if let Some(b) = self.beam {
            run.beam = b;
        }
        if let Some(t) = self.threads {
            run.threads = t;
        }
        run.validate()?;
        Ok(run)
    }

    fn touches_model(&self) -> bool {
        self.memory_type.is_some() || self.no_speaker_vector || self.no_addressee_vector || self.joint_prediction
    }
}

fn override_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if flag.is_some() {
        slot.clone_from(flag);
    }
}

fn stdout_err(e: std::io::Error) -> IcredError {
    IcredError::io("<stdout>", e)
}

fn search(run: &RunConfig) -> Search {
    if run.beam == 1 {
        Search::Greedy
    } else {
        Search::Beam(run.beam)
    }
}

fn lexicon(path: Option<&Path>) -> Result<NounLexicon> {
    Ok(match path {
        Some(p) => NounLexicon::parse(&read_text(p)?),
        None => NounLexicon::parse(DEFAULT_NOUNS),
    })
}

fn nonempty(instances: Vec<ContextInstance>, path: &Path) -> Result<Vec<ContextInstance>> {
    if instances.is_empty() {
        return Err(IcredError::format(path, "corpus has no instances"));
    }
    Ok(instances)
}

/// A trained checkpoint with its vocabulary.
fn load_checkpoint(dir: &Path) -> Result<(Model, Vocabulary)> {
    let model = checkpoint::load_model(dir)?;
    let vocab = read_vocab(&dir.join(VOCAB))?;
    if vocab.len() != model.config.vocab_size {
        return Err(IcredError::format(
            dir.join(VOCAB),
            format!("{} entries but the model has {}", vocab.len(), model.config.vocab_size),
        ));
    }
    Ok((model, vocab))
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let mut run = cli.common.resolve()?;
    match &cli.command {
        Command::Ingest(a) => ingest(&mut run, a, out),
        Command::Synth(a) => synth(&mut run, a, out),
        Command::Train(a) => train(&mut run, a, out),
        Command::Generate(a) => {
            warn_model_flags(&cli.common);
            generate(&mut run, a, out)
        }
        Command::Evaluate(a) => {
            warn_model_flags(&cli.common);
            evaluate(&mut run, a, out)
        }
        Command::Ablate(a) => ablate(&mut run, a, out),
        Command::Predict(a) => {
            warn_model_flags(&cli.common);
            predict(&mut run, a, out)
        }
    }
}

fn warn_model_flags(common: &Common) {
    if common.touches_model() {
        log::warn!("model flags are ignored here; the checkpoint's model.cfg decides the architecture");
    }
}

fn ingest(run: &mut RunConfig, a: &IngestArgs, out: &mut dyn Write) -> Result<()> {
    override_path(&mut run.paths.output, &a.out);
    override_path(&mut run.paths.generic_rules, &a.rules);
    if let Some(w) = a.window {
        run.data.window = w;
    }
    run.validate()?;
    let output = required(&run.paths.output, "output")?.to_path_buf();
    let rules = match &run.paths.generic_rules {
        Some(_) => read_text(existing(&run.paths.generic_rules, "generic_rules")?)?,
        None => DEFAULT_GENERIC.to_string(),
    };
    let text = read_text(&a.input)?;
    let options = BuildOptions {
        window: run.data.window,
        ..Default::default()
    };
    let ingested = pipeline::ingest(&text, &options, &GenericFilter::parse_rules(&rules));
    for r in &ingested.rejects {
        log::warn!("{}:{}: {} ({:?})", a.input.display(), r.line, r.reason, r.content);
    }
    if ingested.instances.is_empty() {
        return Err(IcredError::format(
            &a.input,
            "no instances could be built from this log",
        ));
    }
    let stats = corpus_stats(&ingested.instances)?;
    write_jsonl(&output, &ingested.instances)?;
    if let Some(p) = &a.stats_json {
        write_text(
            p,
            &(serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n"),
        )?;
    }
    write!(
        out,
        "{}\n{}",
        pipeline::format_build_report(&ingested.report, ingested.rejects.len()),
        pipeline::format_stats(&stats)
    )
    .map_err(stdout_err)
}

fn synth(run: &mut RunConfig, a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    if let Some(n) = a.instances {
        run.synth.instances = n;
    }
    run.validate()?;
    let corpus = synth_generate(&run.synth, run.train.seed)?;
    let stats = corpus_stats(&corpus)?;
    let split = split_dataset(corpus, (8, 1, 1), run.train.seed)?;
    for (name, part) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
        write_jsonl(&a.out_dir.join(format!("{name}.jsonl")), part)?;
    }
    write!(
        out,
        "{}payload position       {:>8}\nsplit (train/dev/test) {:>8}\n",
        pipeline::format_stats(&stats),
        payload_position(&run.synth),
        format!("{}/{}/{}", split.train.len(), split.dev.len(), split.test.len())
    )
    .map_err(stdout_err)
}

fn train(run: &mut RunConfig, a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    override_path(&mut run.paths.train_corpus, &a.train);
    override_path(&mut run.paths.dev_corpus, &a.dev);
    override_path(&mut run.paths.checkpoint, &a.checkpoint);
    override_path(&mut run.paths.vocab, &a.vocab);
    override_path(&mut run.paths.word_vectors, &a.word_vectors);
    if let Some(n) = a.max_steps {
        run.train.max_steps = n;
    }
    run.validate()?;
    let train_path = existing(&run.paths.train_corpus, "train_corpus")?;
    let dev_path = existing(&run.paths.dev_corpus, "dev_corpus")?;
    let dir = required(&run.paths.checkpoint, "checkpoint")?.to_path_buf();
    if run.paths.vocab.is_some() {
        existing(&run.paths.vocab, "vocab")?;
    }
    if run.paths.word_vectors.is_some() {
        existing(&run.paths.word_vectors, "word_vectors")?;
    }
    let train_raw = nonempty(read_jsonl(train_path)?, train_path)?;
    let dev_raw = nonempty(read_jsonl(dev_path)?, dev_path)?;

    let (mut model, mut state, train_config, vocab) = if a.resume {
        let vocab = read_vocab(&dir.join(VOCAB))?;
        let config = checkpoint::load_model_config(&dir)?;
        let (model, state, mut saved) = checkpoint::load_training(&dir, &config)?;
        if let Some(n) = a.max_steps {
            saved.max_steps = n;
        }
        log::info!("resuming at step {}", state.step);
        (model, state, saved, vocab)
    } else {
        let vocab = match &run.paths.vocab {
            Some(p) => read_vocab(p)?,
            None => Vocabulary::build(&train_raw, run.data.min_count, run.data.max_vocab),
        };
        let config = ModelConfig {
            vocab_size: vocab.len(),
            ..run.model.clone()
        };
        let mut model = Model::new(config, run.train.seed)?;
        if let Some(p) = &run.paths.word_vectors {
            let n = crate::io::load_word_vectors(p, &vocab, &mut model)?;
            log::info!("loaded {n} pre-trained word vectors");
        }
        let state = TrainState::new(&run.train, &model.params);
        (model, state, run.train.clone(), vocab)
    };
    let train_set = pipeline::encode_all(&model, &train_raw, &vocab)?;
    let dev_set = pipeline::encode_all(&model, &dev_raw, &vocab)?;
    let executor = ThreadedExecutor::new(run.threads);
    let trainer = Trainer::new(train_config.clone(), &train_set, &dev_set, executor)?;
    trainer.run(&mut model, &mut state, |_| {})?;

    write_vocab(&dir.join(VOCAB), &vocab)?;
    checkpoint::save_training(&dir, &model, &state, &train_config)?;
    Trainer::<ThreadedExecutor>::restore_best(&mut model, &state);
    checkpoint::save_model(&dir, &model)?;
    write_text(&dir.join(LOSS_CSV), &pipeline::loss_csv(&state.curve))?;
    writeln!(
        out,
        "steps {}  best dev nll {}  at step {}  early stop {}\ncheckpoint {}",
        state.step,
        state.best_dev.map_or_else(|| "-".into(), |d| format!("{d:.6}")),
        state.best_step.map_or_else(|| "-".into(), |s| s.to_string()),
        state.stopped_early,
        dir.display()
    )
    .map_err(stdout_err)
}

fn role_source(predicted: bool) -> RoleSource {
    if predicted {
        RoleSource::Predicted
    } else {
        RoleSource::Gold
    }
}

fn generate(run: &mut RunConfig, a: &GenerateArgs, out: &mut dyn Write) -> Result<()> {
    override_path(&mut run.paths.checkpoint, &a.checkpoint);
    override_path(&mut run.paths.output, &a.output);
    let dir = existing(&run.paths.checkpoint, "checkpoint")?.to_path_buf();
    let (model, vocab) = load_checkpoint(&dir)?;
    let raw = nonempty(read_jsonl(&a.input)?, &a.input)?;
    let encoded = pipeline::encode_all(&model, &raw, &vocab)?;
    let options = GenerateOptions {
        search: search(run),
        roles: role_source(a.predicted_roles),
        max_len: None,
    };
    let generations = pipeline::generate_all(&model, &encoded, &options, &ThreadedExecutor::new(run.threads))?;
    let mut text = String::new();
    for g in &generations {
        text.push_str(&pipeline::decode(&vocab, &g.tokens).join(" "));
        text.push('\n');
    }
    match &run.paths.output {
        Some(p) => write_text(p, &text),
        None => out.write_all(text.as_bytes()).map_err(stdout_err),
    }
}

fn evaluate(run: &mut RunConfig, a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    override_path(&mut run.paths.checkpoint, &a.checkpoint);
    override_path(&mut run.paths.lexicon, &a.lexicon);
    override_path(&mut run.paths.output, &a.json);
    let lex_path = match &run.paths.lexicon {
        Some(_) => Some(existing(&run.paths.lexicon, "lexicon")?),
        None => None,
    };
    let lex = lexicon(lex_path)?;
    let raw = nonempty(read_jsonl(&a.input)?, &a.input)?;
    let outcomes: Vec<Outcome> = match &a.candidates {
        Some(path) => {
            let lines: Vec<String> = read_text(path)?.lines().map(String::from).collect();
            if lines.len() != raw.len() {
                return Err(IcredError::format(
                    path,
                    format!("{} candidate lines for {} instances", lines.len(), raw.len()),
                ));
            }
            lines
                .iter()
                .zip(&raw)
                .map(|(line, inst)| Outcome {
                    candidate: split_tokens(line),
                    reference: inst.response.clone(),
                    ..Default::default()
                })
                .collect()
        }
        None => {
            let dir = existing(&run.paths.checkpoint, "checkpoint")?.to_path_buf();
            let (model, vocab) = load_checkpoint(&dir)?;
            let encoded = pipeline::encode_all(&model, &raw, &vocab)?;
            let roles = role_source(a.predicted_roles);
            let options = GenerateOptions {
                search: search(run),
                roles,
                max_len: None,
            };
            let gens = pipeline::generate_all(&model, &encoded, &options, &ThreadedExecutor::new(run.threads))?;
            pipeline::outcomes(&raw, &encoded, &gens, &vocab, roles, model.config.max_response_len)
        }
    };
    let report = EvalReport::evaluate(&outcomes, &lex, a.payload_position)?;
    let buckets = if a.predicted_roles && a.candidates.is_none() {
        Some(bucket_rows(&report, &Bucket::TABLE)?)
    } else {
        None
    };
    let text = ablation_table(&[AblationRow {
        variant: "evaluation".into(),
        summary: report.summary.clone(),
        buckets,
    }]);
    if let Some(p) = &run.paths.output {
        write_text(
            p,
            &(serde_json::to_string_pretty(&report).expect("reports serialize") + "\n"),
        )?;
    }
    writeln!(out, "{text}empty-memory instances: {}", report.empty_memory.len()).map_err(stdout_err)
}

fn ablate(run: &mut RunConfig, a: &AblateArgs, out: &mut dyn Write) -> Result<()> {
    override_path(&mut run.paths.train_corpus, &a.train);
    override_path(&mut run.paths.dev_corpus, &a.dev);
    override_path(&mut run.paths.test_corpus, &a.test);
    override_path(&mut run.paths.lexicon, &a.lexicon);
    override_path(&mut run.paths.output, &a.json);
    let train_path = existing(&run.paths.train_corpus, "train_corpus")?;
    let dev_path = existing(&run.paths.dev_corpus, "dev_corpus")?;
    let test_path = existing(&run.paths.test_corpus, "test_corpus")?;
    let lex_path = match &run.paths.lexicon {
        Some(_) => Some(existing(&run.paths.lexicon, "lexicon")?),
        None => None,
    };
    let variants: Vec<String> = if a.variants.is_empty() {
        ABLATIONS.iter().map(|s| s.to_string()).collect()
    } else {
        a.variants.iter().map(|s| s.trim().to_string()).collect()
    };
    // check every name before any training starts
    let configs = variants
        .iter()
        .map(|v| pipeline::variant_config(&run.model, v))
        .collect::<Result<Vec<_>>>()?;
    let lex = lexicon(lex_path)?;
    let train_raw = nonempty(read_jsonl(train_path)?, train_path)?;
    let dev_raw = nonempty(read_jsonl(dev_path)?, dev_path)?;
    let test_raw = nonempty(read_jsonl(test_path)?, test_path)?;
    let vocab = Vocabulary::build(&train_raw, run.data.min_count, run.data.max_vocab);
    let setup = AblationSetup {
        vocab: &vocab,
        train: &train_raw,
        dev: &dev_raw,
        test: &test_raw,
        train_config: &run.train,
        model_seed: run.train.seed,
        search: search(run),
        lexicon: &lex,
        payload_position: a.payload_position,
    };
    let executor = ThreadedExecutor::new(run.threads);
    let mut rows: Vec<AblationRow> = Vec::new();
    let mut done: Vec<(ModelConfig, AblationRow)> = Vec::new();
    for (name, config) in variants.iter().zip(configs) {
        // variants that resolve to the same configuration share one run
        let row = match done.iter().find(|(c, _)| *c == config) {
            Some((_, row)) => AblationRow {
                variant: name.clone(),
                ..row.clone()
            },
            None => {
                let r = pipeline::run_variant(name, config.clone(), &setup, &executor)?;
                done.push((config, r.row.clone()));
                r.row
            }
        };
        rows.push(row);
    }
    if let Some(p) = &run.paths.output {
        write_text(
            p,
            &(serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n"),
        )?;
    }
    out.write_all(ablation_table(&rows).as_bytes()).map_err(stdout_err)
}

fn predict(run: &mut RunConfig, a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    override_path(&mut run.paths.checkpoint, &a.checkpoint);
    override_path(&mut run.paths.output, &a.output);
    let dir = existing(&run.paths.checkpoint, "checkpoint")?.to_path_buf();
    let (model, vocab) = load_checkpoint(&dir)?;
    if !model.config.joint_prediction {
        return Err(IcredError::Config(format!(
            "checkpoint {} was trained without --joint-prediction",
            dir.display()
        )));
    }
    let raw = nonempty(read_jsonl(&a.input)?, &a.input)?;
    let encoded = pipeline::encode_all(&model, &raw, &vocab)?;
    let mut text = String::new();
    for (i, inst) in encoded.iter().enumerate() {
        let p = model.predict_interlocutors(inst)?;
        let record = pipeline::prediction_record(i, inst, &p);
        text.push_str(&serde_json::to_string(&record).expect("records serialize"));
        text.push('\n');
    }
    match &run.paths.output {
        Some(p) => write_text(p, &text),
        None => out.write_all(text.as_bytes()).map_err(stdout_err),
    }
}
