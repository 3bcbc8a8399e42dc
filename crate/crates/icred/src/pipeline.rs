//! End-to-end operations shared by the command line and the test suites.

use std::fmt::Write as _;

use icred_core::corpus::{
    build_contexts, conversation_turns, parse_raw_log, BuildOptions, BuildReport, ContextInstance, CorpusStats,
    GenericFilter, RejectedLine, Vocabulary,
};
use icred_core::metrics::{bucket_rows, AblationRow, Bucket, EvalReport, NounLexicon, Outcome};
use icred_core::model::{
    EncodedInstance, GenerateOptions, Generation, InterlocutorPrediction, MemoryType, Model, ModelConfig, RoleSource,
};
use icred_core::trainer::{CurvePoint, Executor, TrainConfig, TrainState, Trainer};
use icred_core::Error;
use serde::Serialize;

use crate::error::{IcredError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ingested {
    pub instances: Vec<ContextInstance>,
    pub report: BuildReport,
    pub rejects: Vec<RejectedLine>,
}

/// Raw log text to context instances, conversation by conversation.
pub fn ingest(text: &str, options: &BuildOptions, filter: &GenericFilter) -> Ingested {
    let raw = parse_raw_log(text);
    let mut report = BuildReport::default();
    let mut instances = Vec::new();
    for conversation in &raw.conversations {
        let turns = conversation_turns(conversation, options, &mut report);
        instances.extend(build_contexts(&turns, options, filter, &mut report));
    }
    Ingested {
        instances,
        report,
        rejects: raw.rejects,
    }
}

/// Aligned statistics table.
pub fn format_stats(stats: &CorpusStats) -> String {
    let rows = [
        ("# Contexts", stats.contexts.to_string()),
        ("# Speakers", stats.speakers.to_string()),
        ("# Addressees", stats.addressees.to_string()),
        ("Vocab", stats.vocab.to_string()),
        ("# Tokens", stats.tokens.to_string()),
        ("Avg. Tok/Ctx", format!("{:.2}", stats.avg_tokens_per_context)),
        ("Avg. Tok/Res", format!("{:.2}", stats.avg_tokens_per_response)),
        ("Target never spoke", stats.target_never_spoke.to_string()),
    ];
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<20} {v:>10}");
    }
    out
}

pub fn format_build_report(report: &BuildReport, rejects: usize) -> String {
    let mut out = String::new();
    for (k, v) in [
        ("conversations", report.conversations),
        ("turns", report.turns),
        ("malformed lines", rejects),
        ("mention-only turns", report.empty_turns),
        ("truncated utterances", report.truncated_utterances),
        ("addressed turns", report.candidates),
        ("skipped: no context", report.skipped_no_context),
        ("skipped: absent role", report.skipped_absent_interlocutor),
        ("skipped: generic", report.skipped_generic),
        ("instances", report.emitted),
    ] {
        let _ = writeln!(out, "{k:<22} {v:>8}");
    }
    out
}

/// Encodes a split; errors name the offending instance.
pub fn encode_all(model: &Model, instances: &[ContextInstance], vocab: &Vocabulary) -> Result<Vec<EncodedInstance>> {
    instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            model.encode_instance(inst, vocab).map_err(|e| match e {
                Error::Contract(m) => Error::Contract(format!("instance {i}: {m}")),
                Error::Domain(m) => Error::Domain(format!("instance {i}: {m}")),
                other => other,
            })
        })
        .collect::<Result<_, _>>()
        .map_err(IcredError::from)
}

/// Runs (or continues) training and leaves the best dev weights in `model`.
pub fn train<E: Executor>(
    model: &mut Model,
    state: &mut TrainState,
    config: &TrainConfig,
    train: &[EncodedInstance],
    dev: &[EncodedInstance],
    executor: E,
    on_point: impl FnMut(&CurvePoint),
) -> Result<()> {
    let trainer = Trainer::new(config.clone(), train, dev, executor)?;
    trainer.run(model, state, on_point)?;
    Trainer::<E>::restore_best(model, state);
    Ok(())
}

pub fn loss_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("step,train_loss,dev_nll\n");
    for p in curve {
        let dev = p.dev_nll.map_or_else(String::new, |d| format!("{d:?}"));
        let _ = writeln!(out, "{},{:?},{dev}", p.step, p.train_loss);
    }
    out
}

pub fn generate_all<E: Executor>(
    model: &Model,
    instances: &[EncodedInstance],
    options: &GenerateOptions,
    executor: &E,
) -> Result<Vec<Generation>> {
    executor
        .map(instances.len(), &|i| model.generate(&instances[i], options))
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(IcredError::from)
}

pub fn decode(vocab: &Vocabulary, tokens: &[usize]) -> Vec<String> {
    tokens.iter().map(|&t| vocab.decode(t).to_string()).collect()
}

/// Pairs generations with their references. Prediction correctness is
/// recorded when the roles came from the prediction head.
pub fn outcomes(
    raw: &[ContextInstance],
    encoded: &[EncodedInstance],
    generations: &[Generation],
    vocab: &Vocabulary,
    roles: RoleSource,
    max_response_len: usize,
) -> Vec<Outcome> {
    raw.iter()
        .zip(encoded)
        .zip(generations)
        .map(|((inst, enc), g)| {
            let predicted = roles == RoleSource::Predicted;
            Outcome {
                candidate: decode(vocab, &g.tokens),
                reference: inst.response.iter().take(max_response_len).cloned().collect(),
                empty_memory: g.memory_flag.is_fallback(),
                speaker_correct: predicted.then_some(g.roles.responding == enc.roles.responding),
                addressee_correct: predicted.then_some(g.roles.target == enc.roles.target),
            }
        })
        .collect()
}

/// Named model variants for ablation runs.
pub const ABLATIONS: [&str; 4] = ["full", "w/o Adr_Mem", "w/o Ctx_Spk_Vec", "w/o Ctx_Adr_Vec"];

/// Applies a variant name to `base`: one of [`ABLATIONS`] or
/// `memory=<type>`.
pub fn variant_config(base: &ModelConfig, name: &str) -> Result<ModelConfig> {
    let mut c = base.clone();
    match name {
        "full" => {}
        "w/o Adr_Mem" => c.memory_type = MemoryType::None,
        "w/o Ctx_Spk_Vec" => c.use_speaker_vector = false,
        "w/o Ctx_Adr_Vec" => c.use_addressee_vector = false,
        other => match other.strip_prefix("memory=") {
            Some(t) => c.memory_type = t.parse()?,
            None => return Err(IcredError::Config(format!("unknown variant `{other}`"))),
        },
    }
    Ok(c)
}

/// Data and settings shared by every variant of an ablation run.
pub struct AblationSetup<'a> {
    pub vocab: &'a Vocabulary,
    pub train: &'a [ContextInstance],
    pub dev: &'a [ContextInstance],
    pub test: &'a [ContextInstance],
    pub train_config: &'a TrainConfig,
    pub model_seed: u64,
    pub search: icred_core::model::Search,
    pub lexicon: &'a NounLexicon,
    pub payload_position: Option<usize>,
}

/// Result of one trained variant.
pub struct VariantRun {
    pub name: String,
    pub model: Model,
    pub state: TrainState,
    pub report: EvalReport,
    pub row: AblationRow,
}

/// Trains `config` under the shared protocol and scores it on the test
/// split. Joint models generate with predicted roles and get bucket rows.
pub fn run_variant<E: Executor + Clone>(
    name: &str,
    config: ModelConfig,
    setup: &AblationSetup<'_>,
    executor: &E,
) -> Result<VariantRun> {
    let config = ModelConfig {
        vocab_size: setup.vocab.len(),
        ..config
    };
    let mut model = Model::new(config, setup.model_seed)?;
    let train_set = encode_all(&model, setup.train, setup.vocab)?;
    let dev_set = encode_all(&model, setup.dev, setup.vocab)?;
    let test_set = encode_all(&model, setup.test, setup.vocab)?;
    let mut state = TrainState::new(setup.train_config, &model.params);
    log::info!("training variant `{name}`");
    train(
        &mut model,
        &mut state,
        setup.train_config,
        &train_set,
        &dev_set,
        executor.clone(),
        |_| {},
    )?;
    let roles = if model.config.joint_prediction {
        RoleSource::Predicted
    } else {
        RoleSource::Gold
    };
    let options = GenerateOptions {
        search: setup.search,
        roles,
        max_len: None,
    };
    let generations = generate_all(&model, &test_set, &options, executor)?;
    let outs = outcomes(
        setup.test,
        &test_set,
        &generations,
        setup.vocab,
        roles,
        model.config.max_response_len,
    );
    let report = EvalReport::evaluate(&outs, setup.lexicon, setup.payload_position)?;
    let buckets = match roles {
        RoleSource::Predicted => Some(bucket_rows(&report, &Bucket::TABLE)?),
        RoleSource::Gold => None,
    };
    let row = AblationRow {
        variant: name.to_string(),
        summary: report.summary.clone(),
        buckets,
    };
    Ok(VariantRun {
        name: name.to_string(),
        model,
        state,
        report,
        row,
    })
}

/// One predicted instance, serialized as a JSON line by `predict`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRecord {
    pub index: usize,
    pub interlocutors: Vec<String>,
    pub speaker: String,
    pub addressee: String,
    pub speaker_probs: Vec<f64>,
    pub addressee_probs: Vec<f64>,
    pub gold_speaker: String,
    pub gold_addressee: String,
    pub degenerate: bool,
}

pub fn prediction_record(index: usize, inst: &EncodedInstance, p: &InterlocutorPrediction) -> PredictionRecord {
    let roles = p.roles();
    PredictionRecord {
        index,
        interlocutors: inst.interlocutors.clone(),
        speaker: inst.interlocutors[roles.responding].clone(),
        addressee: inst.interlocutors[roles.target].clone(),
        speaker_probs: p.speaker.clone(),
        addressee_probs: p.addressee.clone(),
        gold_speaker: inst.interlocutors[inst.roles.responding].clone(),
        gold_addressee: inst.interlocutors[inst.roles.target].clone(),
        degenerate: p.degenerate,
    }
}
