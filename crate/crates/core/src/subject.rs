use std::cmp::Ordering;
use std::fmt;

/// Subject identifier. Ordering is "natural": digit runs compare by value, so
/// `S2 < S10` and `5 < 42`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubjectId(pub String);

impl SubjectId {
    pub fn new(id: impl Into<String>) -> Self {
        SubjectId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SubjectId {
    fn from(s: &str) -> Self {
        SubjectId(s.to_string())
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum Chunk<'a> {
    Number(u128, usize),
    Text(&'a str),
}

fn chunks(s: &str) -> Vec<Chunk<'_>> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let digit = bytes[i].is_ascii_digit();
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() == digit {
            i += 1;
        }
        let part = &s[start..i];
        out.push(match part.parse::<u128>() {
            Ok(n) if digit => Chunk::Number(n, part.len()),
            _ => Chunk::Text(part),
        });
    }
    out
}

impl Ord for SubjectId {
    fn cmp(&self, other: &Self) -> Ordering {
        chunks(&self.0)
            .cmp(&chunks(&other.0))
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for SubjectId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
