//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run everything with `cargo test -p icred --test acceptance`, or a subset
//! by number: `cargo test -p icred --test acceptance -- 3 7`.

mod oracles;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use icred::cli::DEFAULT_GENERIC;
use icred::executor::ThreadedExecutor;
use icred::io::{parse_jsonl, read_text, to_jsonl};
use icred::pipeline::{self, AblationSetup, ABLATIONS};
use icred_core::corpus::{
    corpus_stats, payload_position, split_dataset, synth_generate, BuildOptions, ContextInstance, GenericFilter,
    SynthConfig, Vocabulary,
};
use icred_core::gradcheck::{grad_check, GradCheckConfig};
use icred_core::metrics::{bleu, lcs_len, partition_counts, rouge_l, Bucket, EvalReport, NounLexicon};
use icred_core::model::{
    EncodedInstance, EncodedTurn, GenerateOptions, MemoryType, Model, ModelConfig, RoleSource, Roles, Search,
};
use icred_core::tape::Tape;
use icred_core::tensor::{GradStore, ParamStore};
use icred_core::trainer::{evaluate_loss, Sequential, TrainConfig, TrainState, Trainer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn fixture_log() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/three_conversations.log")
}

fn encode(model: &Model, raw: &[ContextInstance], vocab: &Vocabulary) -> Result<Vec<EncodedInstance>, String> {
    pipeline::encode_all(model, raw, vocab).map_err(fail)
}

// 1 ------------------------------------------------------------------------

const GRAD_TOLERANCE: f64 = 1e-4;
const GRAD_TIME_LIMIT: Duration = Duration::from_secs(60);

fn gradient_correctness() -> Verdict {
    let start = Instant::now();
    let synth = SynthConfig {
        instances: 4,
        interlocutors: 4,
        content_words: 8,
        filler_words: 3,
        turns: 3,
        min_fillers: 1,
        max_fillers: 2,
        ..Default::default()
    };
    let raw = synth_generate(&synth, 21).map_err(fail)?;
    let vocab = Vocabulary::build(&raw, 1, None);
    if vocab.len() > 20 {
        return Err(format!("micro vocabulary has {} entries", vocab.len()));
    }
    let config = GradCheckConfig {
        step: 1e-5,
        tolerance: GRAD_TOLERANCE,
        floor: 1e-5,
        max_coords_per_param: None,
    };
    let micro = ModelConfig {
        word_dim: 5,
        hidden_dim: 6,
        interlocutor_dim: 4,
        decoder_dim: 7,
        vocab_size: vocab.len(),
        l2_weight: 1e-3,
        ..ModelConfig::default()
    };
    let mut variants = Vec::new();
    for memory_type in MemoryType::ALL {
        for (spk, adr) in [(true, true), (false, true), (true, false), (false, false)] {
            variants.push((
                ModelConfig {
                    memory_type,
                    use_speaker_vector: spk,
                    use_addressee_vector: adr,
                    ..micro.clone()
                },
                false,
            ));
        }
        variants.push((
            ModelConfig {
                memory_type,
                joint_prediction: true,
                ..micro.clone()
            },
            true,
        ));
    }
    let (mut coords, mut worst) = (0usize, 0.0f64);
    for (i, (cfg, joint)) in variants.iter().enumerate() {
        let model = Model::new(cfg.clone(), 100 + i as u64).map_err(fail)?;
        let data = encode(&model, &raw[..2], &vocab)?;
        let loss = |p: &ParamStore| {
            let mut m = model.clone();
            m.params = p.clone();
            let mut total = 0.0;
            for inst in &data {
                total += if *joint {
                    m.joint_loss(inst)?.total
                } else {
                    m.forward_loss(inst)?.total
                };
            }
            Ok(total)
        };
        let grads = |p: &ParamStore| {
            let mut g = GradStore::zeros_like(p);
            for inst in &data {
                model.loss_and_grads_with(inst, *joint, &mut g)?;
            }
            Ok(g)
        };
        let report = grad_check(&model.params, loss, grads, &config).map_err(fail)?;
        if !report.passed() {
            return Err(format!(
                "{} joint={joint}: {} coordinates flagged, first {:?}",
                cfg.variant_name(),
                report.flagged.len(),
                report.flagged[0]
            ));
        }
        coords += report.coordinates_checked;
        worst = worst.max(report.max_relative_error());
    }
    let elapsed = start.elapsed();
    ensure(
        elapsed < GRAD_TIME_LIMIT,
        format!(
            "{} variants, {coords} coordinates, max rel. error {worst:.2e} (tol {GRAD_TOLERANCE:e}), {:.1} s (limit {} s)",
            variants.len(),
            elapsed.as_secs_f64(),
            GRAD_TIME_LIMIT.as_secs()
        ),
    )
}

// 2 ------------------------------------------------------------------------

const OVERFIT_NLL: f64 = 0.1;
const OVERFIT_EXACT: f64 = 0.95;
const OVERFIT_TIME_LIMIT: Duration = Duration::from_secs(300);

fn overfit_sanity() -> Verdict {
    let start = Instant::now();
    let raw = synth_generate(
        &SynthConfig {
            instances: 50,
            ..Default::default()
        },
        2,
    )
    .map_err(fail)?;
    let vocab = Vocabulary::build(&raw, 1, None);
    let mut model = Model::new(ModelConfig::uniform(64, vocab.len()), 2).map_err(fail)?;
    let data = encode(&model, &raw, &vocab)?;
    let cfg = TrainConfig {
        batch_size: 10,
        max_steps: 2000,
        lr: 5e-3,
        eval_every: 500,
        patience: usize::MAX,
        seed: 2,
        max_grad_norm: None,
    };
    let mut state = TrainState::new(&cfg, &model.params);
    // one core: everything on the calling thread
    Trainer::new(cfg.clone(), &data, &data, Sequential)
        .map_err(fail)?
        .run(&mut model, &mut state, |_| {})
        .map_err(fail)?;
    let nll = evaluate_loss(&model, &data, &Sequential).map_err(fail)?;
    let mut exact = 0;
    for inst in &data {
        if model.generate(inst, &GenerateOptions::default()).map_err(fail)?.tokens == inst.response {
            exact += 1;
        }
    }
    let rate = exact as f64 / data.len() as f64;
    let elapsed = start.elapsed();
    ensure(
        nll < OVERFIT_NLL && rate >= OVERFIT_EXACT && elapsed < OVERFIT_TIME_LIMIT,
        format!(
            "{} steps: NLL {nll:.5} (< {OVERFIT_NLL}), exact {exact}/{} = {:.0}% (>= {:.0}%), {:.1} s (limit {} s)",
            cfg.max_steps,
            data.len(),
            100.0 * rate,
            100.0 * OVERFIT_EXACT,
            elapsed.as_secs_f64(),
            OVERFIT_TIME_LIMIT.as_secs()
        ),
    )
}

// shared synthetic protocol for 3 and 7 -------------------------------------

struct Protocol {
    synth: SynthConfig,
    vocab: Vocabulary,
    train: Vec<ContextInstance>,
    dev: Vec<ContextInstance>,
    test: Vec<ContextInstance>,
    train_config: TrainConfig,
    base: ModelConfig,
}

fn protocol() -> Result<Protocol, String> {
    let synth = SynthConfig::default();
    let corpus = synth_generate(&synth, 3).map_err(fail)?;
    let split = split_dataset(corpus, (8, 1, 1), 3).map_err(fail)?;
    let vocab = Vocabulary::build(&split.train, 1, None);
    // every variant trains until dev NLL stops improving, or 1500 steps
    let train_config = TrainConfig {
        batch_size: 16,
        max_steps: 1500,
        lr: 5e-3,
        eval_every: 100,
        patience: 5,
        seed: 3,
        max_grad_norm: None,
    };
    Ok(Protocol {
        base: ModelConfig::uniform(32, vocab.len()),
        synth,
        vocab,
        train: split.train,
        dev: split.dev,
        test: split.test,
        train_config,
    })
}

fn setup<'a>(p: &'a Protocol, lexicon: &'a NounLexicon) -> AblationSetup<'a> {
    AblationSetup {
        vocab: &p.vocab,
        train: &p.train,
        dev: &p.dev,
        test: &p.test,
        train_config: &p.train_config,
        model_seed: 3,
        search: Search::Greedy,
        lexicon,
        payload_position: Some(payload_position(&p.synth)),
    }
}

// 3 ------------------------------------------------------------------------

const FULL_PAYLOAD_MIN: f64 = 0.90;
const ABLATED_CHANCE_MULTIPLE: f64 = 2.0;

fn interlocutor_sensitivity() -> Verdict {
    let p = protocol()?;
    let lexicon = NounLexicon::default();
    let setup = setup(&p, &lexicon);
    let executor = ThreadedExecutor::new(threads());
    let chance = 1.0 / p.synth.content_words as f64;
    let names: Vec<String> = ABLATIONS
        .iter()
        .map(|s| s.to_string())
        .chain(["memory=none".to_string()])
        .collect();
    let mut runs: Vec<(ModelConfig, String, f64, f64, usize)> = Vec::new();
    let mut rows = Vec::new();
    for name in &names {
        let config = pipeline::variant_config(&p.base, name).map_err(fail)?;
        let (payload, token, steps) = match runs.iter().find(|r| r.0 == config) {
            Some(r) => (r.2, r.3, r.4),
            None => {
                let run = pipeline::run_variant(name, config.clone(), &setup, &executor).map_err(fail)?;
                let s = &run.report.summary;
                let out = (s.payload_accuracy.unwrap_or(0.0), s.token_accuracy, run.state.step);
                runs.push((config, name.clone(), out.0, out.1, out.2));
                out
            }
        };
        rows.push((name.clone(), payload, token, steps));
    }
    let get = |n: &str| rows.iter().find(|r| r.0 == n).expect("variant ran");
    let full = get("full").1;
    let no_mem = get("w/o Adr_Mem").1;
    let none = get("memory=none").1;
    let ceiling = ABLATED_CHANCE_MULTIPLE * chance;
    let table: Vec<String> = rows
        .iter()
        .map(|(n, pay, tok, steps)| {
            format!(
                "{n}: payload {:.1}% tok {:.1}% ({steps} steps)",
                100.0 * pay,
                100.0 * tok
            )
        })
        .collect();
    let full_first = rows.iter().all(|r| r.2 <= get("full").2);
    ensure(
        full >= FULL_PAYLOAD_MIN && no_mem < ceiling && none < ceiling,
        format!(
            "need full >= {:.0}%, ablated < {:.0}% (2x chance {:.0}%); {}; full first on token accuracy: {full_first}",
            100.0 * FULL_PAYLOAD_MIN,
            100.0 * ceiling,
            100.0 * chance,
            table.join("; ")
        ),
    )
}

// 4 ------------------------------------------------------------------------

const SYMMETRY_INSTANCES: usize = 1200;

fn role_history(inst: &EncodedInstance, i: usize) -> Vec<u8> {
    inst.turns
        .iter()
        .map(|t| match (t.speaker == i, t.addressee == Some(i)) {
            (true, _) => 0,
            (_, true) => 1,
            _ => 2,
        })
        .collect()
}

fn observer_symmetry() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vocab = 16;
    let models: Vec<Model> = (0..4)
        .map(|s| {
            Model::new(
                ModelConfig {
                    word_dim: 5,
                    hidden_dim: 6,
                    interlocutor_dim: 4,
                    decoder_dim: 7,
                    vocab_size: vocab,
                    ..ModelConfig::default()
                },
                40 + s,
            )
        })
        .collect::<Result<_, _>>()
        .map_err(fail)?;
    let (mut pairs, mut instances) = (0usize, 0usize);
    for n in 0..SYMMETRY_INSTANCES {
        let k = rng.gen_range(2..=6);
        let turns: Vec<EncodedTurn> = (0..rng.gen_range(1..=6))
            .map(|_| {
                let speaker = rng.gen_range(0..k);
                let addressee = rng.gen_bool(0.7).then(|| rng.gen_range(0..k)).filter(|&a| a != speaker);
                let len = rng.gen_range(1..=5);
                EncodedTurn {
                    speaker,
                    addressee,
                    tokens: (0..len).map(|_| rng.gen_range(4..vocab)).collect(),
                }
            })
            .collect();
        let inst = EncodedInstance {
            roles: Roles {
                responding: turns[0].speaker,
                target: (turns[0].speaker + 1) % k,
            },
            turns,
            interlocutors: (0..k).map(|i| format!("a{i}")).collect(),
            response: vec![4],
        };
        let model = &models[n % models.len()];
        let mut tape = Tape::new(&model.params);
        let ctx = model.encode_context(&mut tape, &inst).map_err(fail)?;
        instances += 1;
        for i in 0..k {
            for j in i + 1..k {
                if role_history(&inst, i) != role_history(&inst, j) {
                    continue;
                }
                pairs += 1;
                let a = tape.value(ctx.interlocutors.columns[i]);
                let b = tape.value(ctx.interlocutors.columns[j]);
                if !a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()) {
                    return Err(format!(
                        "instance {n}: interlocutors {i} and {j} share a history but differ"
                    ));
                }
            }
        }
    }
    ensure(
        instances >= 1000 && pairs > 0,
        format!("{instances} random instances, {pairs} same-history pairs, all bit-identical"),
    )
}

// 5 ------------------------------------------------------------------------

const METRIC_TOLERANCE: f64 = 1e-9;

fn metric_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let n = rng.gen_range(1..=5);
        let alphabet = rng.gen_range(2..=6);
        let mut side = || -> Vec<Vec<u8>> {
            (0..n)
                .map(|_| (0..rng.gen_range(0..=10)).map(|_| rng.gen_range(0..alphabet)).collect())
                .collect()
        };
        let (cands, refs) = (side(), side());
        for max_n in [1, 2, 4] {
            let got = bleu(&cands, &refs, max_n).map_err(fail)?;
            let want = oracles::bleu(&cands, &refs, max_n);
            worst = worst.max((got - want).abs());
            if (got - want).abs() > METRIC_TOLERANCE {
                return Err(format!("case {case} BLEU-{max_n}: {got} vs oracle {want}"));
            }
        }
        let got = rouge_l(&cands, &refs).map_err(fail)?;
        let want = oracles::rouge_l(&cands, &refs);
        worst = worst.max((got - want).abs());
        if (got - want).abs() > METRIC_TOLERANCE {
            return Err(format!("case {case} ROUGE-L: {got} vs oracle {want}"));
        }
        for (c, r) in cands.iter().zip(&refs) {
            if lcs_len(c, r) != oracles::lcs(c, r) {
                return Err(format!("case {case}: LCS mismatch"));
            }
        }
    }
    // identity on every corpus at hand
    let fixture = pipeline::ingest(
        &read_text(&fixture_log()).map_err(fail)?,
        &BuildOptions::default(),
        &GenericFilter::parse_rules(DEFAULT_GENERIC),
    )
    .instances;
    let synth = synth_generate(&SynthConfig::default(), 5).map_err(fail)?;
    for (name, corpus) in [("fixture", &fixture), ("synthetic", &synth)] {
        let responses: Vec<&[String]> = corpus.iter().map(|i| &i.response[..]).collect();
        let contexts: Vec<Vec<String>> = corpus
            .iter()
            .map(|i| i.turns.iter().flat_map(|t| t.tokens.clone()).collect())
            .collect();
        for (what, c) in [
            ("responses", responses.iter().map(|r| r.to_vec()).collect::<Vec<_>>()),
            ("contexts", contexts),
        ] {
            let b = bleu(&c, &c, 4).map_err(fail)?;
            let r = rouge_l(&c, &c).map_err(fail)?;
            if b != 100.0 || r != 100.0 {
                return Err(format!("{name} {what}: BLEU(c,c) {b}, ROUGE-L(c,c) {r}"));
            }
        }
    }
    Ok(format!(
        "20 random cases x BLEU-1/2/4 + ROUGE-L within {METRIC_TOLERANCE:e} (worst {worst:.1e}); self-scores 100 on fixture and synthetic corpora"
    ))
}

// 6 ------------------------------------------------------------------------

const CALIBRATION_TOLERANCE: f64 = 1e-10;

fn loss_calibration() -> Verdict {
    let fixture = pipeline::ingest(
        &read_text(&fixture_log()).map_err(fail)?,
        &BuildOptions::default(),
        &GenericFilter::parse_rules(DEFAULT_GENERIC),
    )
    .instances;
    let synth = synth_generate(&SynthConfig::default(), 6).map_err(fail)?;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for corpus in [&fixture, &synth[..200].to_vec()] {
        let vocab = Vocabulary::build(corpus, 1, None);
        for memory_type in MemoryType::ALL {
            let model = Model::zeros(ModelConfig {
                memory_type,
                ..ModelConfig::uniform(8, vocab.len())
            })
            .map_err(fail)?;
            let ln_v = (vocab.len() as f64).ln();
            let data = encode(&model, corpus, &vocab)?;
            for inst in &data {
                let nll = model.forward_loss(inst).map_err(fail)?.nll;
                worst = worst.max((nll - ln_v).abs());
                checked += 1;
            }
            let mean = evaluate_loss(&model, &data, &Sequential).map_err(fail)?;
            worst = worst.max((mean - ln_v).abs());
        }
    }
    ensure(
        worst <= CALIBRATION_TOLERANCE,
        format!("{checked} instance losses, max |NLL - ln V| = {worst:.1e} (tol {CALIBRATION_TOLERANCE:e})"),
    )
}

// 7 ------------------------------------------------------------------------

fn joint_prediction_consistency() -> Verdict {
    let p = protocol()?;
    let lexicon = NounLexicon::default();
    let setup = setup(&p, &lexicon);
    let executor = ThreadedExecutor::new(threads());
    let config = ModelConfig {
        joint_prediction: true,
        ..p.base.clone()
    };
    let run = pipeline::run_variant("full + joint", config, &setup, &executor).map_err(fail)?;
    let buckets = run.row.buckets.as_ref().ok_or("no bucket rows")?;
    let labels: Vec<&str> = buckets.iter().map(|b| b.label.as_str()).collect();
    let expected: Vec<&str> = Bucket::TABLE.iter().map(|b| b.label()).collect();
    if labels != expected {
        return Err(format!("bucket rows {labels:?}"));
    }
    let n = run.report.records.len();
    let [tt, tf, ft, ff] = partition_counts(&run.report.records).map_err(fail)?;
    for r in &run.report.records {
        let (s, a) = (
            r.speaker_correct.ok_or("missing outcome")?,
            r.addressee_correct.ok_or("missing outcome")?,
        );
        let hits = Bucket::PARTITION.iter().filter(|b| b.contains(s, a)).count();
        if hits != 1 {
            return Err(format!("record {} falls in {hits} partition buckets", r.index));
        }
    }
    let count = |b: Bucket| buckets.iter().find(|r| r.bucket == b).map_or(0, |r| r.count);
    let consistent = tt + tf + ft + ff == n
        && count(Bucket::TrueTrue) == tt
        && count(Bucket::TrueAny) == tt + tf
        && count(Bucket::AnyTrue) == tt + ft
        && count(Bucket::FalseFalse) == ff
        && count(Bucket::AnyAny) == n;
    if !consistent {
        return Err(format!(
            "counts tt {tt} tf {tf} ft {ft} ff {ff} of {n} disagree with {buckets:?}"
        ));
    }

    // the predict path reports a distribution per instance
    let test = encode(&run.model, &p.test, &p.vocab)?;
    for (i, inst) in test.iter().enumerate() {
        let pred = run.model.predict_interlocutors(inst).map_err(fail)?;
        let rec = pipeline::prediction_record(i, inst, &pred);
        for probs in [&rec.speaker_probs, &rec.addressee_probs] {
            if (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(format!("instance {i}: probabilities do not sum to 1"));
            }
        }
    }

    let summary = |b: Bucket| buckets.iter().find(|r| r.bucket == b).and_then(|r| r.summary.clone());
    let (Some(good), Some(bad)) = (summary(Bucket::TrueTrue), summary(Bucket::FalseFalse)) else {
        return Err(format!("an extreme bucket is empty: tt {tt} ff {ff}"));
    };
    ensure(
        good.bleu >= bad.bleu && good.rouge_l >= bad.rouge_l,
        format!(
            "partition {tt}/{tf}/{ft}/{ff} of {n}; True/True BLEU {:.2} ROUGE-L {:.2} vs False/False BLEU {:.2} ROUGE-L {:.2}",
            good.bleu, good.rouge_l, bad.bleu, bad.rouge_l
        ),
    )
}

// 8 ------------------------------------------------------------------------

fn ingestion_fidelity() -> Verdict {
    let text = read_text(&fixture_log()).map_err(fail)?;
    let out = pipeline::ingest(
        &text,
        &BuildOptions::default(),
        &GenericFilter::parse_rules(DEFAULT_GENERIC),
    );
    let r = &out.report;
    let counts = [
        ("conversations", r.conversations, 3),
        ("turns", r.turns, 13),
        ("malformed lines", out.rejects.len(), 1),
        ("mention-only turns", r.empty_turns, 1),
        ("truncated utterances", r.truncated_utterances, 1),
        ("addressed turns", r.candidates, 12),
        ("no context", r.skipped_no_context, 2),
        ("absent role", r.skipped_absent_interlocutor, 3),
        ("generic", r.skipped_generic, 1),
        ("instances", r.emitted, 6),
    ];
    for (what, got, want) in counts {
        if got != want {
            return Err(format!("{what}: {got}, hand count {want}"));
        }
    }
    let s = corpus_stats(&out.instances).map_err(fail)?;
    let stats = [
        ("# Contexts", s.contexts, 6),
        ("# Speakers", s.speakers, 8),
        ("# Addressees", s.addressees, 8),
        ("Vocab", s.vocab, 57),
        ("# Tokens", s.tokens, 106),
        ("Target never spoke", s.target_never_spoke, 1),
    ];
    for (what, got, want) in stats {
        if got != want {
            return Err(format!("{what}: {got}, hand count {want}"));
        }
    }
    if s.avg_tokens_per_context != 65.0 / 6.0 || s.avg_tokens_per_response != 41.0 / 6.0 {
        return Err(format!(
            "averages {} / {}",
            s.avg_tokens_per_context, s.avg_tokens_per_response
        ));
    }
    let roles: Vec<(&str, &str)> = out
        .instances
        .iter()
        .map(|i| (i.responding_speaker.as_str(), i.target_addressee.as_str()))
        .collect();
    let want = [
        ("ann", "bob"),
        ("bob", "cat"),
        ("eve", "dan"),
        ("dan", "fay"),
        ("gus", "ivy"),
        ("ivy", "gus"),
    ];
    if roles != want {
        return Err(format!("roles {roles:?}"));
    }
    let addressees: Vec<Option<&str>> = out.instances[1].turns.iter().map(|t| t.addressee.as_deref()).collect();
    if addressees != [None, Some("ann"), Some("bob"), Some("ann"), Some("cat")] {
        return Err(format!("context addressees {addressees:?}"));
    }
    if out.instances[2].response != ["works", "for", "me"] {
        return Err(format!("mention not stripped: {:?}", out.instances[2].response));
    }

    let synth = synth_generate(&SynthConfig::default(), 8).map_err(fail)?;
    let here = std::path::Path::new("<memory>");
    for (name, corpus) in [("fixture", &out.instances), ("synthetic", &synth)] {
        let text = to_jsonl(corpus);
        let back = parse_jsonl(&text, here).map_err(fail)?;
        if &back != corpus || to_jsonl(&back) != text {
            return Err(format!("{name} corpus does not round-trip"));
        }
    }
    Ok("10 build counts, 8 statistics, roles and addressees match hand counts; JSONL round-trips byte for byte".into())
}

// 9 ------------------------------------------------------------------------

fn determinism() -> Verdict {
    let run = || -> Result<(Model, TrainState, Vec<String>, String), String> {
        let raw = synth_generate(
            &SynthConfig {
                instances: 200,
                ..Default::default()
            },
            9,
        )
        .map_err(fail)?;
        let split = split_dataset(raw, (8, 1, 1), 9).map_err(fail)?;
        let vocab = Vocabulary::build(&split.train, 1, None);
        let mut model = Model::new(ModelConfig::uniform(16, vocab.len()), 9).map_err(fail)?;
        let (train, dev, test) = (
            encode(&model, &split.train, &vocab)?,
            encode(&model, &split.dev, &vocab)?,
            encode(&model, &split.test, &vocab)?,
        );
        let cfg = TrainConfig {
            batch_size: 8,
            max_steps: 150,
            lr: 5e-3,
            eval_every: 25,
            patience: 100,
            seed: 9,
            max_grad_norm: Some(5.0),
        };
        let executor = ThreadedExecutor::new(threads().max(2));
        let mut state = TrainState::new(&cfg, &model.params);
        pipeline::train(&mut model, &mut state, &cfg, &train, &dev, executor, |_| {}).map_err(fail)?;
        let options = GenerateOptions {
            search: Search::Beam(3),
            roles: RoleSource::Gold,
            max_len: None,
        };
        let gens = pipeline::generate_all(&model, &test, &options, &executor).map_err(fail)?;
        let lines = gens
            .iter()
            .map(|g| pipeline::decode(&vocab, &g.tokens).join(" "))
            .collect();
        let outs = pipeline::outcomes(
            &split.test,
            &test,
            &gens,
            &vocab,
            RoleSource::Gold,
            model.config.max_response_len,
        );
        let report = EvalReport::evaluate(&outs, &NounLexicon::default(), Some(2)).map_err(fail)?;
        let json = serde_json::to_string(&report).map_err(fail)?;
        Ok((model, state, lines, json))
    };
    let (m1, s1, g1, r1) = run()?;
    let (m2, s2, g2, r2) = run()?;
    let curve_same = s1.curve.len() == s2.curve.len()
        && s1.curve.iter().zip(&s2.curve).all(|(a, b)| {
            a.step == b.step
                && a.train_loss.to_bits() == b.train_loss.to_bits()
                && a.dev_nll.map(f64::to_bits) == b.dev_nll.map(f64::to_bits)
        });
    let checks = [
        ("training curve", curve_same),
        ("parameters", m1.params == m2.params),
        ("training state", s1 == s2),
        ("generations", g1 == g2),
        ("report", r1 == r2),
    ];
    let differing: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    ensure(
        differing.is_empty(),
        if differing.is_empty() {
            format!(
                "two runs agree bit for bit: {} curve points, {} generations, report",
                s1.curve.len(),
                g1.len()
            )
        } else {
            format!("runs differ in {}", differing.join(", "))
        },
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient correctness", gradient_correctness),
        ("overfit sanity", overfit_sanity),
        ("interlocutor-sensitivity ablation", interlocutor_sensitivity),
        ("observer symmetry", observer_symmetry),
        ("metric oracles", metric_oracles),
        ("loss calibration", loss_calibration),
        ("joint-prediction consistency", joint_prediction_consistency),
        ("ingestion fidelity", ingestion_fidelity),
        ("determinism", determinism),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !wanted.is_empty() && !wanted.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS {number} {name} [{secs:.1} s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {number} {name} [{secs:.1} s]: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
