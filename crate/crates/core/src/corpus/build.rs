use alloc::string::String;
use alloc::vec::Vec;

use super::{
    extract_addressee, AddresseeRule, ContextInstance, DialogueTurn, GenericFilter, RawConversation, DEFAULT_WINDOW,
    MAX_UTTERANCE_TOKENS,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildOptions {
    pub window: usize,
    pub max_utterance_tokens: usize,
    pub max_response_tokens: usize,
    pub addressee_rule: AddresseeRule,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            window: DEFAULT_WINDOW,
            max_utterance_tokens: MAX_UTTERANCE_TOKENS,
            max_response_tokens: MAX_UTTERANCE_TOKENS,
            addressee_rule: AddresseeRule::default(),
        }
    }
}

/// Counters for everything ingestion skipped or flagged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub conversations: usize,
    pub turns: usize,
    /// Turns whose text was only an addressee mention.
    pub empty_turns: usize,
    pub truncated_utterances: usize,
    /// Turns with an explicit addressee, i.e. candidate responses.
    pub candidates: usize,
    pub skipped_no_context: usize,
    pub skipped_absent_interlocutor: usize,
    pub skipped_generic: usize,
    pub emitted: usize,
    /// Emitted instances whose target addressee never speaks in the context.
    pub target_never_spoke: usize,
}

impl BuildReport {
    pub fn merge(&mut self, other: &BuildReport) {
        self.conversations += other.conversations;
        self.turns += other.turns;
        self.empty_turns += other.empty_turns;
        self.truncated_utterances += other.truncated_utterances;
        self.candidates += other.candidates;
        self.skipped_no_context += other.skipped_no_context;
        self.skipped_absent_interlocutor += other.skipped_absent_interlocutor;
        self.skipped_generic += other.skipped_generic;
        self.emitted += other.emitted;
        self.target_never_spoke += other.target_never_spoke;
    }
}

/// Resolves addressees and tokenizes one raw conversation. The known
/// interlocutors are all speakers of the conversation. Self-mentions are not
/// addressees; turns left without tokens are dropped.
pub fn conversation_turns(
    conversation: &RawConversation,
    options: &BuildOptions,
    report: &mut BuildReport,
) -> Vec<DialogueTurn> {
    let mut known: Vec<&str> = Vec::new();
    for line in conversation {
        if !known.contains(&line.speaker.as_str()) {
            known.push(&line.speaker);
        }
    }
    let mut turns = Vec::with_capacity(conversation.len());
    for line in conversation {
        let (mut addressee, mut tokens) = extract_addressee(&line.text, &known, &options.addressee_rule);
        if addressee.as_deref() == Some(line.speaker.as_str()) {
            addressee = None;
            tokens = super::tokenize(&line.text);
        }
        if tokens.is_empty() {
            report.empty_turns += 1;
            continue;
        }
        if tokens.len() > options.max_utterance_tokens {
            tokens.truncate(options.max_utterance_tokens);
            report.truncated_utterances += 1;
        }
        turns.push(DialogueTurn {
            speaker: line.speaker.clone(),
            addressee,
            tokens,
        });
    }
    report.conversations += 1;
    report.turns += turns.len();
    turns
}

/// Emits one instance per addressed turn whose speaker and addressee both
/// appear (as speaker or addressee) in the preceding `window` turns, unless
/// the response is generic.
pub fn build_contexts(
    turns: &[DialogueTurn],
    options: &BuildOptions,
    filter: &GenericFilter,
    report: &mut BuildReport,
) -> Vec<ContextInstance> {
    let mut out = Vec::new();
    for (t, turn) in turns.iter().enumerate() {
        let Some(target) = &turn.addressee else {
            continue;
        };
        report.candidates += 1;
        if t == 0 || options.window == 0 {
            report.skipped_no_context += 1;
            continue;
        }
        let context = &turns[t.saturating_sub(options.window)..t];
        let appears = |who: &String| {
            context
                .iter()
                .any(|c| &c.speaker == who || c.addressee.as_ref() == Some(who))
        };
        if !appears(&turn.speaker) || !appears(target) {
            report.skipped_absent_interlocutor += 1;
            continue;
        }
        if !filter.keep(&turn.tokens) {
            report.skipped_generic += 1;
            continue;
        }
        let mut response = turn.tokens.clone();
        response.truncate(options.max_response_tokens);
        if !context.iter().any(|c| &c.speaker == target) {
            report.target_never_spoke += 1;
        }
        report.emitted += 1;
        out.push(ContextInstance {
            turns: context.to_vec(),
            responding_speaker: turn.speaker.clone(),
            target_addressee: target.clone(),
            response,
        });
    }
    out
}
