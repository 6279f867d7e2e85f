//! Tokenization and token sequences.
//!
//! The built-in tokenizer lowercases, splits on Unicode whitespace, and strips
//! leading/trailing non-alphanumeric characters from each piece. Character
//! offsets always refer to the original (pre-lowercasing) text and count
//! Unicode scalar values, not bytes. External encoders may supply their own
//! tokenization through the exchange protocol; sequences built from protocol
//! responses are validated against the same invariants.

use crate::error::{Error, Result};

/// A single token with its character span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

/// An ordered sequence of tokens with strictly increasing, non-overlapping
/// character intervals.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    tokens: Vec<Token>,
}

impl TokenSequence {
    /// Builds a sequence, validating the ordering and non-empty-text invariants.
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        let mut prev_end = 0usize;
        for (i, tok) in tokens.iter().enumerate() {
            if tok.text.is_empty() {
                return Err(Error::InvalidTokens(format!("token {i} has empty text")));
            }
            if tok.char_start >= tok.char_end {
                return Err(Error::InvalidTokens(format!(
                    "token {i} has empty char interval [{}, {})",
                    tok.char_start, tok.char_end
                )));
            }
            if i > 0 && tok.char_start < prev_end {
                return Err(Error::InvalidTokens(format!(
                    "token {i} starts at {} before previous token ends at {prev_end}",
                    tok.char_start
                )));
            }
            prev_end = tok.char_end;
        }
        Ok(Self { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Token> {
        self.tokens.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.tokens.iter()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }

    /// Character interval covered by the half-open token range `[start, end)`.
    pub fn char_span(&self, start: usize, end: usize) -> Result<(usize, usize)> {
        if start >= end {
            return Err(Error::EmptySpan { start, end });
        }
        if end > self.tokens.len() {
            return Err(Error::SpanOutOfBounds {
                start,
                end,
                len: self.tokens.len(),
            });
        }
        Ok((self.tokens[start].char_start, self.tokens[end - 1].char_end))
    }
}

impl std::ops::Index<usize> for TokenSequence {
    type Output = Token;

    fn index(&self, i: usize) -> &Token {
        &self.tokens[i]
    }
}

/// Lowercase whitespace tokenizer with edge punctuation stripping.
///
/// Each whitespace-separated piece is trimmed of leading and trailing
/// non-alphanumeric characters; pieces that become empty (pure punctuation)
/// are dropped. Interior punctuation such as hyphens survives, so
/// `"in mid-air flight."` tokenizes to `["in", "mid-air", "flight"]`.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut piece: Vec<char> = Vec::new();
    let mut piece_start = 0usize;

    let flush = |piece: &mut Vec<char>, piece_start: usize, tokens: &mut Vec<Token>| {
        if piece.is_empty() {
            return;
        }
        let lead = piece.iter().take_while(|c| !c.is_alphanumeric()).count();
        let trail = piece
            .iter()
            .rev()
            .take_while(|c| !c.is_alphanumeric())
            .count();
        if lead + trail < piece.len() {
            let kept = &piece[lead..piece.len() - trail];
            let text: String = kept.iter().collect::<String>().to_lowercase();
            tokens.push(Token {
                text,
                char_start: piece_start + lead,
                char_end: piece_start + piece.len() - trail,
            });
        }
        piece.clear();
    };

    for (i, ch) in text.chars().enumerate() {
        if ch.is_whitespace() {
            flush(&mut piece, piece_start, &mut tokens);
        } else {
            if piece.is_empty() {
                piece_start = i;
            }
            piece.push(ch);
        }
    }
    flush(&mut piece, piece_start, &mut tokens);

    TokenSequence { tokens }
}

/// Extracts the substring covered by a character interval (Unicode scalar
/// indices, half-open).
pub fn char_slice(text: &str, char_start: usize, char_end: usize) -> String {
    text.chars()
        .skip(char_start)
        .take(char_end.saturating_sub(char_start))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_empty_sequence() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t\n").is_empty());
    }

    #[test]
    fn whitespace_split_with_offsets() {
        let seq = tokenize("A group of men");
        let got: Vec<_> = seq
            .iter()
            .map(|t| (t.text.as_str(), t.char_start, t.char_end))
            .collect();
        assert_eq!(
            got,
            vec![("a", 0, 1), ("group", 2, 7), ("of", 8, 10), ("men", 11, 14)]
        );
    }

    #[test]
    fn edge_punctuation_stripped_interior_kept() {
        let seq = tokenize("in mid-air flight.");
        let texts: Vec<_> = seq.texts().collect();
        assert_eq!(texts, vec!["in", "mid-air", "flight"]);
        // "flight." spans chars 11..18; the trailing dot is stripped.
        assert_eq!(seq[2].char_start, 11);
        assert_eq!(seq[2].char_end, 17);
    }

    #[test]
    fn pure_punctuation_tokens_dropped() {
        let seq = tokenize("yes -- no ...");
        let texts: Vec<_> = seq.texts().collect();
        assert_eq!(texts, vec!["yes", "no"]);
    }

    #[test]
    fn offsets_count_chars_not_bytes() {
        let seq = tokenize("héllo wörld");
        assert_eq!(seq[1].char_start, 6);
        assert_eq!(seq[1].char_end, 11);
        assert_eq!(char_slice("héllo wörld", 6, 11), "wörld");
    }

    #[test]
    fn lowercasing_applies_to_token_text_only() {
        let seq = tokenize("Blue and RED");
        let texts: Vec<_> = seq.texts().collect();
        assert_eq!(texts, vec!["blue", "and", "red"]);
        assert_eq!(seq[2].char_start, 9);
    }

    #[test]
    fn sequence_validation_rejects_overlap() {
        let bad = vec![
            Token {
                text: "a".into(),
                char_start: 0,
                char_end: 3,
            },
            Token {
                text: "b".into(),
                char_start: 2,
                char_end: 4,
            },
        ];
        assert!(TokenSequence::new(bad).is_err());
    }

    #[test]
    fn sequence_validation_rejects_empty_text() {
        let bad = vec![Token {
            text: String::new(),
            char_start: 0,
            char_end: 1,
        }];
        assert!(TokenSequence::new(bad).is_err());
    }

    #[test]
    fn char_span_resolves_token_ranges() {
        let seq = tokenize("a group of men");
        assert_eq!(seq.char_span(1, 3).unwrap(), (2, 10));
        assert!(seq.char_span(1, 1).is_err());
        assert!(seq.char_span(0, 9).is_err());
    }
}
