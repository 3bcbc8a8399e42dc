use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawLine {
    pub speaker: String,
    pub text: String,
}

pub type RawConversation = Vec<RawLine>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedLine {
    /// 1-based line number in the input.
    pub line: usize,
    pub content: String,
    pub reason: &'static str,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawLog {
    pub conversations: Vec<RawConversation>,
    pub rejects: Vec<RejectedLine>,
}

/// Parses `time<TAB>speaker<TAB>utterance` lines. Blank lines separate
/// conversations; file order is kept and timestamps are discarded.
/// Malformed lines are reported and skipped.
pub fn parse_raw_log(text: &str) -> RawLog {
    let mut log = RawLog::default();
    let mut current: RawConversation = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            if !current.is_empty() {
                log.conversations.push(core::mem::take(&mut current));
            }
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let (_time, speaker, text) = match (fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(s), Some(u)) => (t, s.trim(), u.trim()),
            _ => {
                log.rejects.push(RejectedLine {
                    line: n + 1,
                    content: line.to_string(),
                    reason: "expected three tab-separated fields",
                });
                continue;
            }
        };
        let reason = if speaker.is_empty() {
            Some("empty speaker")
        } else if speaker.contains(char::is_whitespace) {
            Some("speaker contains whitespace")
        } else if text.is_empty() {
            Some("empty utterance")
        } else {
            None
        };
        if let Some(reason) = reason {
            log.rejects.push(RejectedLine {
                line: n + 1,
                content: line.to_string(),
                reason,
            });
            continue;
        }
        current.push(RawLine {
            speaker: speaker.to_string(),
            text: text.to_string(),
        });
    }
    if !current.is_empty() {
        log.conversations.push(current);
    }
    log
}
