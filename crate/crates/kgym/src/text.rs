//! Answer-text normalization shared by scoring, classification, and the
//! knowledge-graph reachability check.

use once_cell::sync::Lazy;
use regex::Regex;

// Unicode general-category P, plus the ASCII punctuation characters that
// Unicode files under Symbol ($ + < = > ^ ` | ~).
static PUNCT: Lazy<Regex> = Lazy::new(|| Regex::new(r"[\p{P}$+<=>^\x60|~]").unwrap());
static ARTICLE: Lazy<Regex> = Lazy::new(|| Regex::new(r"\b(?:a|an|the)\b").unwrap());

/// Canonical answer form: lowercase, punctuation deleted, the articles
/// "a"/"an"/"the" dropped as whole words anywhere, whitespace collapsed.
///
/// Idempotent: `normalize(normalize(x)) == normalize(x)`.
pub fn normalize(text: &str) -> String {
    let lower = text.to_lowercase();
    let no_punct = PUNCT.replace_all(&lower, "");
    let no_articles = ARTICLE.replace_all(&no_punct, " ");
    no_articles.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace tokens of an already-normalized string.
pub fn tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Length of the longest common subsequence of two token slices.
pub fn lcs_len(a: &[&str], b: &[&str]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &ta in a {
        for (j, &tb) in b.iter().enumerate() {
            cur[j + 1] = if ta == tb {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
