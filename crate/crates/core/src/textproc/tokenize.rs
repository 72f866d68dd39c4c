use serde::{Deserialize, Serialize};

/// Ordered word tokens of one caption; the unit every perturbation acts on.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(pub Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        Self(tokens)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

/// Languages written without spaces between words.
const CHARACTER_LANGS: &[&str] = &["ja", "zh", "th"];

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF       // hiragana, katakana
        | 0x3400..=0x4DBF     // CJK ext A
        | 0x4E00..=0x9FFF     // CJK unified
        | 0xF900..=0xFAFF     // compatibility ideographs
        | 0xFF66..=0xFF9F     // halfwidth katakana
        | 0xAC00..=0xD7AF     // hangul syllables
        | 0x20000..=0x2FA1F)
}

/// Whether `text` is segmented one token per codepoint.
///
/// True for the no-space languages, or for any text with no internal
/// whitespace that contains at least one CJK codepoint.
pub fn is_character_tokenized(text: &str, lang: &str) -> bool {
    if CHARACTER_LANGS.contains(&lang) {
        return true;
    }
    let trimmed = text.trim();
    !trimmed.chars().any(char::is_whitespace) && trimmed.chars().any(is_cjk)
}

pub fn tokenize(text: &str, lang: &str) -> TokenSequence {
    if is_character_tokenized(text, lang) {
        text.chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect()
    } else {
        text.split_whitespace().collect()
    }
}

/// Inverse of [`tokenize`]: single spaces for whitespace languages, plain
/// concatenation for character-tokenized ones.
pub fn detokenize(tokens: &TokenSequence, lang: &str) -> String {
    if CHARACTER_LANGS.contains(&lang) {
        return tokens.0.concat();
    }
    let joined = tokens.0.join(" ");
    // A character-tokenized caption in a whitespace language tag must round-trip
    // without gaining spaces.
    let concat = tokens.0.concat();
    if !tokens.is_empty()
        && is_character_tokenized(&concat, lang)
        && tokens.iter().all(|t| t.chars().count() == 1)
    {
        concat
    } else {
        joined
    }
}
