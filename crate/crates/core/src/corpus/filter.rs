use alloc::string::String;
use alloc::vec::Vec;

/// Drops generic responses by lowercase substring match on the
/// space-joined tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenericFilter {
    patterns: Vec<String>,
}

impl GenericFilter {
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<str>>(patterns: I) -> Self {
        GenericFilter {
            patterns: patterns
                .into_iter()
                .map(|p| p.as_ref().trim().to_lowercase())
                .filter(|p| !p.is_empty())
                .collect(),
        }
    }

    /// One pattern per line; blank lines and `#` comments are ignored.
    pub fn parse_rules(text: &str) -> Self {
        GenericFilter::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    /// `true` keeps the response, `false` drops it.
    pub fn keep<S: AsRef<str>>(&self, response: &[S]) -> bool {
        let joined = response
            .iter()
            .map(|t| t.as_ref().to_lowercase())
            .collect::<Vec<_>>()
            .join(" ");
        !self.patterns.iter().any(|p| joined.contains(p.as_str()))
    }
}
