/// Heuristic token count: `ceil(bytes / 4)`.
///
/// Close for ASCII-dominant text. Subadditive up to rounding:
/// `estimate(a + b) <= estimate(a) + estimate(b)`.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}
