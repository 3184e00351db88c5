//! Tokenization shared by retrieval, mining and extraction.
//!
//! Text is split on every character that is not alphanumeric, so whitespace
//! and punctuation both separate tokens. Tokens are case-folded; byte offsets
//! into the original text are retained.

/// A case-folded token and its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if current.is_none() {
                current = Some(i);
            }
        } else if let Some(start) = current.take() {
            tokens.push(make_token(text, start, i));
        }
    }
    if let Some(start) = current {
        tokens.push(make_token(text, start, text.len()));
    }
    tokens
}

fn make_token(text: &str, start: usize, end: usize) -> Token {
    Token {
        text: text[start..end].to_lowercase(),
        start,
        end,
    }
}

/// Case-folded token strings only.
pub fn token_strings(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text).collect()
}

/// Concatenation of the case-folded tokens: punctuation and spaces removed.
pub fn normalize(text: &str) -> String {
    token_strings(text).concat()
}

/// Start indices of every occurrence of `needle` as a contiguous run in `haystack`.
pub fn find_all<S: AsRef<str>, N: AsRef<str>>(haystack: &[S], needle: &[N]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return Vec::new();
    }
    (0..=haystack.len() - needle.len())
        .filter(|&i| {
            needle
                .iter()
                .zip(&haystack[i..])
                .all(|(n, h)| n.as_ref() == h.as_ref())
        })
        .collect()
}

/// Half-open token interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end);
        Span { start, end }
    }

    pub fn at(pos: usize) -> Self {
        Span {
            start: pos,
            end: pos + 1,
        }
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Token-index gap between two spans: 0 when they overlap, 1 when adjacent.
    pub fn gap(&self, other: &Span) -> usize {
        if self.overlaps(other) {
            0
        } else if self.start >= other.end {
            self.start - (other.end - 1)
        } else {
            other.start - (self.end - 1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation_and_folds_case() {
        assert_eq!(
            token_strings("Wheaton, IL; Schindler's List 1964-1966"),
            ["wheaton", "il", "schindler", "s", "list", "1964", "1966"]
        );
        let toks = tokenize("Get  WheatonFieldHouse");
        assert_eq!(toks[1].start, 5);
        assert_eq!(toks[1].end, 22);
    }

    #[test]
    fn normalized_form_drops_separators() {
        assert_eq!(normalize("Wheaton, IL"), "wheatonil");
        assert_eq!(normalize("WheatonIL"), "wheatonil");
    }

    #[test]
    fn finds_token_runs() {
        let hay = token_strings("a b c a b");
        assert_eq!(find_all(&hay, &["a", "b"]), vec![0, 3]);
        assert!(find_all(&hay, &[] as &[&str]).is_empty());
    }

    #[test]
    fn span_gap() {
        assert_eq!(Span::at(10).gap(&Span::at(8)), 2);
        assert_eq!(Span::at(5).gap(&Span::at(6)), 1);
        assert_eq!(Span::new(3, 6).gap(&Span::new(7, 9)), 2);
        assert_eq!(Span::new(3, 6).gap(&Span::new(5, 9)), 0);
    }
}
