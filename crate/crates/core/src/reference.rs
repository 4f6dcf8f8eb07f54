//! Rule-based first/second/third person reference classification.

use crate::names::NameMention;
use crate::srt::SubtitleSegment;
use crate::text::{tokenize, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RefType {
    First,
    Second,
    Third,
}

impl RefType {
    pub fn as_str(self) -> &'static str {
        match self {
            RefType::First => "first",
            RefType::Second => "second",
            RefType::Third => "third",
        }
    }
}

pub const DEFAULT_SELF_TRIGGERS: &[&str] = &["i'm", "i am", "my name is", "name's", "call me", "it's me,"];

pub const DEFAULT_VOCATIVE_TRIGGERS: &[&str] = &[
    "hey",
    "hi",
    "hello",
    "oh",
    "look",
    "listen",
    "thanks",
    "thank you",
    "please",
    "sorry",
    "excuse me",
    "goodbye",
    "bye",
];

/// Self-introductions may end this many tokens before the mention.
const SELF_TRIGGER_REACH: usize = 3;

/// A trigger phrase as lowercase words. A trailing comma in the written
/// phrase requires a comma after its last word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trigger {
    words: Vec<String>,
    comma: bool,
}

impl Trigger {
    pub fn parse(phrase: &str) -> Self {
        let phrase = phrase.trim().to_lowercase().replace('’', "'");
        let comma = phrase.ends_with(',');
        let words = phrase
            .trim_end_matches(',')
            .split_whitespace()
            .map(String::from)
            .collect();
        Self { words, comma }
    }

    /// Whether the trigger ends exactly at `tokens[end - 1]`, inside `sentence`.
    fn ends_at(&self, tokens: &[Token], end: usize, sentence: usize) -> bool {
        let len = self.words.len();
        if len == 0 || end < len {
            return false;
        }
        let window = &tokens[end - len..end];
        let last = &window[len - 1];
        window.iter().all(|t| t.sentence == sentence)
            && window.iter().zip(&self.words).all(|(t, w)| t.lower() == *w)
            && window[..len - 1].iter().all(|t| t.trailing.is_empty())
            && (!self.comma || last.has_comma())
    }
}

/// Trigger lists used by [`ReferenceRules::classify`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceRules {
    pub self_triggers: Vec<Trigger>,
    pub vocative_triggers: Vec<Trigger>,
}

impl Default for ReferenceRules {
    fn default() -> Self {
        Self::new(DEFAULT_SELF_TRIGGERS, DEFAULT_VOCATIVE_TRIGGERS)
    }
}

impl ReferenceRules {
    pub fn new<S: AsRef<str>>(self_triggers: &[S], vocative_triggers: &[S]) -> Self {
        Self {
            self_triggers: self_triggers.iter().map(|s| Trigger::parse(s.as_ref())).collect(),
            vocative_triggers: vocative_triggers.iter().map(|s| Trigger::parse(s.as_ref())).collect(),
        }
    }

    pub fn classify(&self, segment_text: &str, mention: &NameMention) -> RefType {
        let tokens = tokenize(segment_text);
        let (start, end) = mention.token_span;
        if start >= end || end > tokens.len() {
            return RefType::Third;
        }
        let sentence = tokens[start].sentence;

        let reach = start.saturating_sub(SELF_TRIGGER_REACH);
        let introduced = (reach + 1..=start).any(|trigger_end| {
            self.self_triggers
                .iter()
                .any(|t| t.ends_at(&tokens, trigger_end, sentence))
        });
        if introduced {
            return RefType::First;
        }

        let first = &tokens[start];
        let last = &tokens[end - 1];
        let sentence_start = first.sentence_start;
        let sentence_end = end == tokens.len() || tokens[end].sentence != sentence;

        if sentence_start && last.has_comma() {
            return RefType::Second;
        }
        if start > 0 && tokens[start - 1].sentence == sentence {
            let prev = &tokens[start - 1];
            if prev.has_comma() {
                return RefType::Second;
            }
            if self
                .vocative_triggers
                .iter()
                .any(|t| t.ends_at(&tokens, start, sentence) && prev.trailing.is_empty())
            {
                return RefType::Second;
            }
        }
        let bare = last.trailing.chars().all(|c| c == '!' || c == '?');
        if sentence_start && sentence_end && bare {
            return RefType::Second;
        }
        RefType::Third
    }
}

/// Classifies with the default trigger lists.
pub fn classify_reference(segment_text: &str, mention: &NameMention) -> RefType {
    ReferenceRules::default().classify(segment_text, mention)
}

/// Fills `ref_type` on every mention.
pub fn classify_all(
    segments: &[SubtitleSegment],
    mentions: &[NameMention],
    rules: &ReferenceRules,
) -> Vec<NameMention> {
    mentions
        .iter()
        .map(|m| {
            let text = segments.get(m.segment_pos).map_or("", |s| s.clean_text.as_str());
            NameMention {
                ref_type: Some(rules.classify(text, m)),
                ..m.clone()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classify(text: &str, surface: &str) -> RefType {
        let tokens = tokenize(text);
        let words: Vec<&str> = surface.split_whitespace().collect();
        let start = (0..tokens.len())
            .find(|&i| {
                i + words.len() <= tokens.len()
                    && tokens[i..i + words.len()].iter().zip(&words).all(|(t, w)| t.word == *w)
            })
            .expect("surface present");
        let mention = NameMention {
            segment_pos: 0,
            surface: surface.to_string(),
            token_span: (start, start + words.len()),
            ref_type: None,
        };
        classify_reference(text, &mention)
    }

    #[test]
    fn canonical_examples() {
        assert_eq!(classify("I'm Sheldon", "Sheldon"), RefType::First);
        assert_eq!(classify("Oh, hi, Penny", "Penny"), RefType::Second);
        assert_eq!(classify("So how did it go with Leslie?", "Leslie"), RefType::Third);
    }

    #[test]
    fn self_introductions() {
        assert_eq!(classify("My name is Kevin Lomax.", "Kevin Lomax"), RefType::First);
        assert_eq!(classify("Hello, I am actually Kevin.", "Kevin"), RefType::First);
        assert_eq!(classify("It's me, Kevin.", "Kevin"), RefType::First);
        assert_eq!(classify("Just call me Kev!", "Kev"), RefType::First);
        assert_eq!(classify("I’m Sheldon.", "Sheldon"), RefType::First);
        // Trigger in a previous sentence does not count.
        assert_eq!(classify("I'm tired. Leslie left.", "Leslie"), RefType::Third);
        // "it's me" without the comma is not a self-introduction.
        assert_eq!(classify("It's me Kevin wants.", "Kevin"), RefType::Third);
    }

    #[test]
    fn vocatives() {
        assert_eq!(classify("Penny, come here.", "Penny"), RefType::Second);
        assert_eq!(classify("Hey Penny, wait.", "Penny"), RefType::Second);
        assert_eq!(classify("Thank you Penny.", "Penny"), RefType::Second);
        assert_eq!(classify("Where are you going, Penny?", "Penny"), RefType::Second);
        assert_eq!(classify("Penny!", "Penny"), RefType::Second);
        assert_eq!(classify("We lost. Penny?", "Penny"), RefType::Second);
        assert_eq!(classify("Penny", "Penny"), RefType::Second);
    }

    #[test]
    fn third_person() {
        assert_eq!(classify("Penny left early.", "Penny"), RefType::Third);
        assert_eq!(classify("Penny.", "Penny"), RefType::Third);
        assert_eq!(classify("Have you seen Penny today?", "Penny"), RefType::Third);
        assert_eq!(classify("Oh. Penny left.", "Penny"), RefType::Third);
    }

    #[test]
    fn invalid_span_defaults_to_third() {
        let mention = NameMention {
            segment_pos: 0,
            surface: "X".into(),
            token_span: (4, 9),
            ref_type: None,
        };
        assert_eq!(classify_reference("short text", &mention), RefType::Third);
    }

    #[test]
    fn custom_triggers() {
        let rules = ReferenceRules::new(&["they call me"], &["yo"]);
        let text = "Yo Penny. They call me Sheldon.";
        let mk = |s, e| NameMention {
            segment_pos: 0,
            surface: String::new(),
            token_span: (s, e),
            ref_type: None,
        };
        assert_eq!(rules.classify(text, &mk(1, 2)), RefType::Second);
        assert_eq!(rules.classify(text, &mk(5, 6)), RefType::First);
        assert_eq!(rules.classify("Hey Penny.", &mk(1, 2)), RefType::Third);
    }

    #[test]
    fn deterministic() {
        let text = "Oh, hi, Penny";
        let a = classify(text, "Penny");
        for _ in 0..10 {
            assert_eq!(classify(text, "Penny"), a);
        }
    }
}
