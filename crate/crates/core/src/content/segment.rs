use serde::{Deserialize, Serialize};

/// One sentence of a story body. `start..end` is a byte span; consecutive
/// spans tile the body exactly, so inter-sentence whitespace belongs to the
/// preceding sentence. `text` is the trimmed span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub start: usize,
    pub end: usize,
}

const ABBREVIATIONS: &[&str] = &[
    "Mr", "Mrs", "Ms", "Dr", "Prof", "Sr", "Jr", "St", "Mt", "Capt", "Col", "Gen", "Lt", "Sgt", "Rev", "Hon", "vs",
    "etc", "e.g", "i.e", "No", "Fig", "Jan", "Feb", "Aug", "Sept", "Oct", "Nov", "Dec",
];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201D}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201C}' | '\u{2018}')
}

/// Splits `body` into sentences.
///
/// A sentence ends at a run of `.`, `!` or `?` (plus any closing quotes or
/// brackets) followed by whitespace and an uppercase letter, or by the end
/// of the text. A single `.` ending a known abbreviation or an initial does
/// not end a sentence. Text with no terminator is one sentence.
pub fn segment_sentences(body: &str) -> Vec<Sentence> {
    if body.is_empty() {
        return Vec::new();
    }
    let chars: Vec<(usize, char)> = body.char_indices().collect();
    let mut starts = vec![0usize];
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminator(chars[j].1) {
            j += 1;
        }
        let single_period = c == '.' && j == i + 1;
        while j < chars.len() && is_closer(chars[j].1) {
            j += 1;
        }
        if single_period && ends_abbreviation(&body[..pos]) {
            i = j;
            continue;
        }
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        if k == chars.len() {
            break;
        }
        if k > j {
            let mut m = k;
            while m < chars.len() && is_opener(chars[m].1) {
                m += 1;
            }
            if m < chars.len() && chars[m].1.is_uppercase() {
                starts.push(chars[k].0);
            }
        }
        i = j.max(i + 1);
    }

    let mut out = Vec::with_capacity(starts.len());
    for (n, &s) in starts.iter().enumerate() {
        let e = starts.get(n + 1).copied().unwrap_or(body.len());
        out.push(Sentence { index: n, text: body[s..e].trim().to_string(), start: s, end: e });
    }
    out
}

fn ends_abbreviation(before: &str) -> bool {
    let word = before
        .rsplit(|c: char| c.is_whitespace())
        .next()
        .unwrap_or("")
        .trim_start_matches(is_opener);
    if word.is_empty() {
        return false;
    }
    let mut cs = word.chars();
    if let (Some(first), None) = (cs.next(), cs.next()) {
        if first.is_uppercase() {
            return true;
        }
    }
    ABBREVIATIONS.contains(&word)
}
