use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Lowercases and splits on whitespace, then peels leading and trailing
/// punctuation off each chunk as separate one-character tokens. Punctuation
/// inside a word is kept (`don't`, `apt-get`, `10.04`); a chunk made only of
/// punctuation stays whole (`...`, `:)`).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chunk = chunk.to_lowercase();
        if !chunk.chars().any(char::is_alphanumeric) {
            out.push(chunk);
            continue;
        }
        let start = chunk.find(char::is_alphanumeric).unwrap_or(0);
        let end = chunk
            .rfind(char::is_alphanumeric)
            .map(|i| i + chunk[i..].chars().next().map_or(1, char::len_utf8))
            .unwrap_or(chunk.len());
        out.extend(chunk[..start].chars().map(|c| c.to_string()));
        out.push(chunk[start..end].to_string());
        out.extend(chunk[end..].chars().map(|c| c.to_string()));
    }
    out
}

/// How an explicit addressee mention is recognized: the first
/// whitespace-separated chunk names a known interlocutor, optionally followed
/// by one separator character (attached or as its own chunk).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddresseeRule {
    pub separators: Vec<char>,
}

impl Default for AddresseeRule {
    fn default() -> Self {
        AddresseeRule {
            separators: alloc::vec![':', ','],
        }
    }
}

/// Splits a leading addressee mention off `text`. `known` holds the
/// conversation's speakers; names match case-insensitively and the returned
/// addressee is the entry from `known`.
pub fn extract_addressee<S: AsRef<str>>(
    text: &str,
    known: &[S],
    rule: &AddresseeRule,
) -> (Option<String>, Vec<String>) {
    let trimmed = text.trim_start();
    let (first, rest) = match trimmed.find(char::is_whitespace) {
        Some(i) => (&trimmed[..i], &trimmed[i..]),
        None => (trimmed, ""),
    };
    let name = match first.chars().last() {
        Some(c) if rule.separators.contains(&c) => &first[..first.len() - c.len_utf8()],
        _ => first,
    };
    let matched = (!name.is_empty())
        .then(|| known.iter().find(|k| k.as_ref().to_lowercase() == name.to_lowercase()))
        .flatten();
    match matched {
        Some(who) => {
            let mut rest = rest.trim_start();
            if name.len() == first.len() {
                // "alan : hi" - a detached separator
                let mut chars = rest.chars();
                if let Some(c) = chars.next() {
                    if rule.separators.contains(&c) && chars.next().is_none_or(char::is_whitespace) {
                        rest = &rest[c.len_utf8()..];
                    }
                }
            }
            (Some(who.as_ref().to_string()), tokenize(rest))
        }
        None => (None, tokenize(text)),
    }
}
