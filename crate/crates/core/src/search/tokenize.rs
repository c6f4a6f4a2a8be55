/// Splits text into lowercase maximal runs of letters and digits.
///
/// No stemming and no stop-word removal; punctuation and whitespace are
/// separators.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|run| !run.is_empty())
        .map(str::to_lowercase)
        .collect()
}
