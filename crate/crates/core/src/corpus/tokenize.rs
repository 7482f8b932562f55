/// Splits raw report text into lowercase word and punctuation tokens.
///
/// Whitespace separates candidate tokens. Leading and trailing
/// non-alphanumeric characters are detached one per token, and hyphens inside
/// a word become tokens of their own. Other inner characters stay in place,
/// so `3mm`, `1.5cm` and `don't` are kept whole.
pub fn tokenize(raw_text: &str) -> Vec<String> {
    let lowered = raw_text.to_lowercase();
    let mut out = Vec::new();
    for chunk in lowered.split_whitespace() {
        split_chunk(chunk, &mut out);
    }
    out
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut start = 0;
    let mut end = chars.len();
    while start < end && is_punct(chars[start]) {
        out.push(chars[start].to_string());
        start += 1;
    }
    let mut trailing = Vec::new();
    while end > start && is_punct(chars[end - 1]) {
        trailing.push(chars[end - 1].to_string());
        end -= 1;
    }
    let inner: String = chars[start..end].iter().collect();
    if inner.contains('-') {
        for (i, piece) in inner.split('-').enumerate() {
            if i > 0 {
                out.push("-".to_string());
            }
            split_chunk(piece, out);
        }
    } else if !inner.is_empty() {
        out.push(inner);
    }
    out.extend(trailing.into_iter().rev());
}
