//! Word counting, embedding-token counting and stable hashing.

use sha2::{Digest, Sha256};

/// Whitespace-token word count. All length bands in the crate use this.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Byte spans of embedding-encoder tokens.
///
/// A token is a maximal run of alphanumeric characters, or a single
/// punctuation/symbol character. This approximates a BPE text encoder from
/// below for English prose, which is all the token budget needs.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if run_start.is_none() {
                run_start = Some(i);
            }
            continue;
        }
        if let Some(s) = run_start.take() {
            spans.push((s, i));
        }
        if !ch.is_whitespace() {
            spans.push((i, i + ch.len_utf8()));
        }
    }
    if let Some(s) = run_start {
        spans.push((s, text.len()));
    }
    spans
}

pub fn count_tokens(text: &str) -> usize {
    token_spans(text).len()
}

/// Returns the longest prefix of `text` holding at most `budget` tokens, and
/// whether anything was cut.
pub fn truncate_to_tokens(text: &str, budget: usize) -> (&str, bool) {
    let spans = token_spans(text);
    if spans.len() <= budget {
        return (text, false);
    }
    if budget == 0 {
        return ("", true);
    }
    let end = spans[budget - 1].1;
    (&text[..end], true)
}

/// Hex SHA-256 of the concatenated parts, each length-prefixed so that
/// `("ab", "c")` and `("a", "bc")` hash differently.
pub fn content_hash(parts: &[&[u8]]) -> String {
    hex::encode(digest(parts))
}

/// A 64-bit seed derived from the parts; stable across platforms and builds.
pub fn stable_seed(parts: &[&[u8]]) -> u64 {
    let d = digest(parts);
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b)
}

fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_are_whitespace_tokens() {
        assert_eq!(word_count("  A fox,  ran.\n\nIt hid. "), 5);
        assert_eq!(word_count(""), 0);
    }

    #[test]
    fn tokens_split_punctuation() {
        assert_eq!(count_tokens("Luna's map, 3 keys!"), 8);
    }

    #[test]
    fn truncation_keeps_whole_tokens() {
        let (t, cut) = truncate_to_tokens("one two three four", 2);
        assert_eq!(t, "one two");
        assert!(cut);
        let (t, cut) = truncate_to_tokens("one two", 5);
        assert_eq!(t, "one two");
        assert!(!cut);
    }

    #[test]
    fn hash_is_length_prefixed() {
        assert_ne!(content_hash(&[b"ab", b"c"]), content_hash(&[b"a", b"bc"]));
        assert_eq!(stable_seed(&[b"x"]), stable_seed(&[b"x"]));
    }
}
