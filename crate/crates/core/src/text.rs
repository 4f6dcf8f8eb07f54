//! Whitespace tokenizer with sentence tracking.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Token with surrounding punctuation removed. Internal apostrophes stay.
    pub word: String,
    /// Punctuation that followed the word, including any punctuation-only
    /// tokens folded into it.
    pub trailing: String,
    pub sentence: usize,
    pub sentence_start: bool,
}

impl Token {
    pub fn lower(&self) -> String {
        self.word.to_lowercase()
    }

    pub fn ends_sentence(&self) -> bool {
        self.trailing.contains(['.', '!', '?', '…'])
    }

    pub fn has_comma(&self) -> bool {
        self.trailing.contains(',')
    }

    /// First letter uppercase and only letters and apostrophes,
    /// excluding all-caps words longer than one letter.
    pub fn is_capitalized(&self) -> bool {
        let mut chars = self.word.chars();
        let Some(first) = chars.next() else {
            return false;
        };
        if !first.is_uppercase() {
            return false;
        }
        if !self.word.chars().all(|c| c.is_alphabetic() || is_apostrophe(c)) {
            return false;
        }
        let letters: Vec<char> = self.word.chars().filter(|c| c.is_alphabetic()).collect();
        letters.len() == 1 || letters.iter().any(|c| c.is_lowercase())
    }
}

pub fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '’'
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Splits on whitespace, strips punctuation and tracks sentence boundaries
/// on `.`, `!`, `?` and `…`. Punctuation-only pieces attach to the previous
/// token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens: Vec<Token> = Vec::new();
    let mut sentence = 0;
    let mut at_start = true;
    for piece in text.split_whitespace() {
        let Some(first) = piece.find(is_word_char) else {
            if let Some(prev) = tokens.last_mut() {
                prev.trailing.push_str(piece);
                if prev.ends_sentence() && !at_start {
                    sentence += 1;
                    at_start = true;
                }
            }
            continue;
        };
        let last = piece
            .char_indices()
            .filter(|(_, c)| is_word_char(*c))
            .map(|(i, c)| i + c.len_utf8())
            .next_back()
            .unwrap_or(piece.len());
        let word = piece[first..last].to_string();
        let trailing = piece[last..].to_string();
        let token = Token {
            word: word.replace('’', "'"),
            trailing,
            sentence,
            sentence_start: at_start,
        };
        at_start = false;
        if token.ends_sentence() {
            sentence += 1;
            at_start = true;
        }
        tokens.push(token);
    }
    tokens
}

/// Lowercased alphanumeric words, as used for the tf-idf vocabulary.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    tokenize(text).into_iter().map(|t| t.lower())
}
