//! Tweet text normalization.
//!
//! The rules are deliberately small and deterministic: lowercase everything,
//! collapse URLs and user mentions into placeholder tokens, strip the `#`
//! from hashtags (remembering the bare tag), and split ASCII punctuation off
//! into separate tokens. Re-tokenizing the space-join of an output yields the
//! same output, which lets generated corpora round-trip through the TSV
//! loader token for token.

use std::collections::BTreeSet;

/// Placeholder emitted for URLs.
pub const URL_TOKEN: &str = "<url>";
/// Placeholder emitted for @-mentions.
pub const USER_TOKEN: &str = "<user>";

/// Normalize raw tweet text into a token sequence.
///
/// An empty result is allowed; callers decide whether that is an error.
pub fn normalize_and_tokenize(raw_text: &str) -> Vec<String> {
    tokenize_with_hashtags(raw_text).0
}

/// Hashtags of `raw_text` under the tokenizer's hashtag rule: lowercased,
/// without the `#` prefix.
pub fn extract_hashtags(raw_text: &str) -> BTreeSet<String> {
    tokenize_with_hashtags(raw_text).1
}

/// Tokenize and collect hashtags in one pass.
pub fn tokenize_with_hashtags(raw_text: &str) -> (Vec<String>, BTreeSet<String>) {
    let mut tokens = Vec::new();
    let mut hashtags = BTreeSet::new();
    for piece in raw_text.split_whitespace() {
        let piece = piece.to_lowercase();
        process_piece(&piece, &mut tokens, &mut hashtags);
    }
    (tokens, hashtags)
}

fn is_url_shaped(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://") || s.starts_with("www.")
}

fn is_mention_shaped(s: &str) -> bool {
    s.starts_with('@') && s[1..].chars().any(char::is_alphanumeric)
}

/// Split trailing ASCII punctuation off a piece. Returns (core, trailing run).
fn split_trailing_punct(s: &str) -> (&str, &str) {
    let core_end = s
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_ascii_punctuation())
        .last()
        .map_or(s.len(), |(i, _)| i);
    s.split_at(core_end)
}

fn push_punct_chars(s: &str, tokens: &mut Vec<String>) {
    for c in s.chars() {
        tokens.push(c.to_string());
    }
}

fn process_piece(mut piece: &str, tokens: &mut Vec<String>, hashtags: &mut BTreeSet<String>) {
    loop {
        if piece.is_empty() {
            return;
        }
        if piece == URL_TOKEN || piece == USER_TOKEN {
            tokens.push(piece.to_string());
            return;
        }
        if is_url_shaped(piece) {
            tokens.push(URL_TOKEN.to_string());
            return;
        }
        if is_mention_shaped(piece) {
            tokens.push(USER_TOKEN.to_string());
            return;
        }
        if let Some(rest) = piece.strip_prefix('#') {
            let rest = rest.trim_start_matches('#');
            if rest.chars().any(char::is_alphanumeric) {
                // Hashtag: peel punctuation on both sides of the tag word.
                // Only a word directly behind the '#' counts as a hashtag,
                // so that "#<tag>" always appears verbatim in the raw text.
                let lead_end = rest
                    .char_indices()
                    .find(|(_, c)| !c.is_ascii_punctuation())
                    .map_or(rest.len(), |(i, _)| i);
                let (lead, remainder) = rest.split_at(lead_end);
                let (core, trail) = split_trailing_punct(remainder);
                push_punct_chars(lead, tokens);
                if is_url_shaped(core) || is_mention_shaped(core) {
                    process_piece(core, tokens, hashtags);
                } else if !core.is_empty() {
                    tokens.push(core.to_string());
                    if lead.is_empty() {
                        hashtags.insert(core.to_string());
                    }
                }
                push_punct_chars(trail, tokens);
            } else {
                // "#", "#!!" and friends: plain punctuation.
                push_punct_chars(piece, tokens);
            }
            return;
        }
        let mut chars = piece.chars();
        let first = chars.next().expect("piece is non-empty");
        if first.is_ascii_punctuation() {
            tokens.push(first.to_string());
            piece = chars.as_str();
            continue;
        }
        let (core, trail) = split_trailing_punct(piece);
        tokens.push(core.to_string());
        push_punct_chars(trail, tokens);
        return;
    }
}
