//! Language-aware analysis: tokenization, normalization, stop words and
//! light stemming.

mod stem;

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};
use unicode_normalization::UnicodeNormalization;
use unicode_segmentation::UnicodeSegmentation;

use crate::corpus::Language;

pub use stem::{
    light_stem_arabic, light_stem_spanish, normalize_arabic, Anchor, Rule, RuleError, RuleTable,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub term: String,
    /// Token index in the field before stop-word removal.
    pub position: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Unicode word segmentation.
    Words,
    /// One token per Han character, alphanumeric runs otherwise.
    HanCharacters,
    /// NFKC followed by lowercasing.
    Normalize,
    StopFilter,
    PorterStem,
    SpanishLightStem,
    ArabicLightStem,
}

pub struct Analyzer {
    language: Language,
    stopwords: HashSet<String>,
    pipeline: Vec<Stage>,
    porter: Option<Stemmer>,
}

impl fmt::Debug for Analyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Analyzer")
            .field("language", &self.language)
            .field("stopwords", &self.stopwords.len())
            .field("pipeline", &self.pipeline)
            .finish()
    }
}

fn load_stopwords(data: &str) -> HashSet<String> {
    data.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.nfkc().collect::<String>().to_lowercase())
        .collect()
}

/// The embedded stop list for a language (empty for Mandarin).
pub fn stopwords(language: Language) -> &'static HashSet<String> {
    static LISTS: [OnceLock<HashSet<String>>; 4] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let (slot, data) = match language {
        Language::En => (0, include_str!("../../data/stop_en.txt")),
        Language::Es => (1, include_str!("../../data/stop_es.txt")),
        Language::Ar => (2, include_str!("../../data/stop_ar.txt")),
        Language::Zh => (3, ""),
    };
    LISTS[slot].get_or_init(|| load_stopwords(data))
}

impl Analyzer {
    pub fn for_language(language: Language) -> Self {
        use Stage::*;
        let pipeline = match language {
            Language::En => vec![Words, Normalize, StopFilter, PorterStem],
            Language::Es => vec![Words, Normalize, StopFilter, SpanishLightStem],
            Language::Ar => vec![Words, Normalize, StopFilter, ArabicLightStem],
            Language::Zh => vec![HanCharacters, Normalize],
        };
        Self::with_pipeline(language, stopwords(language).clone(), pipeline)
    }

    pub fn with_pipeline(language: Language, stopwords: HashSet<String>, pipeline: Vec<Stage>) -> Self {
        let porter = pipeline
            .contains(&Stage::PorterStem)
            .then(|| Stemmer::create(Algorithm::English));
        Self {
            language,
            stopwords,
            pipeline,
            porter,
        }
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    pub fn pipeline(&self) -> &[Stage] {
        &self.pipeline
    }

    pub fn is_stopword(&self, term: &str) -> bool {
        self.stopwords.contains(term)
    }

    fn stem(&self, stage: Stage, term: String) -> String {
        match stage {
            Stage::PorterStem => match &self.porter {
                Some(s) => s.stem(&term).into_owned(),
                None => term,
            },
            Stage::SpanishLightStem => light_stem_spanish(&term),
            Stage::ArabicLightStem => light_stem_arabic(&term),
            _ => term,
        }
    }

    pub fn analyze(&self, text: &str) -> Vec<Token> {
        let mut tokens: Vec<Token> = Vec::new();
        let mut started = false;
        for &stage in &self.pipeline {
            match stage {
                Stage::Words => {
                    tokens = text
                        .unicode_words()
                        .enumerate()
                        .map(|(i, w)| Token {
                            term: w.to_string(),
                            position: i as u32,
                        })
                        .collect();
                    started = true;
                }
                Stage::HanCharacters => {
                    tokens = segment_cjk(text);
                    started = true;
                }
                Stage::Normalize => {
                    for t in &mut tokens {
                        t.term = t.term.nfkc().collect::<String>().to_lowercase();
                    }
                }
                Stage::StopFilter => tokens.retain(|t| !self.stopwords.contains(&t.term)),
                Stage::PorterStem | Stage::SpanishLightStem | Stage::ArabicLightStem => {
                    for t in &mut tokens {
                        let term = std::mem::take(&mut t.term);
                        t.term = self.stem(stage, term);
                    }
                }
            }
        }
        if !started {
            tokens = vec![];
        }
        // stems that collapse onto a stop word, or onto nothing, are dropped too
        tokens.retain(|t| !t.term.is_empty() && !self.stopwords.contains(&t.term));
        tokens
    }

    pub fn terms(&self, text: &str) -> Vec<String> {
        self.analyze(text).into_iter().map(|t| t.term).collect()
    }
}

pub fn is_han(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0x2F800..=0x2FA1F
        | 0x30000..=0x3134F)
}

/// Each Han character becomes its own token; runs of other alphanumeric
/// characters form one token; everything else separates tokens.
pub fn segment_cjk(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut run = String::new();
    let push = |term: String, out: &mut Vec<Token>| {
        let position = out.len() as u32;
        out.push(Token { term, position });
    };
    for c in text.chars() {
        if is_han(c) {
            if !run.is_empty() {
                push(std::mem::take(&mut run), &mut out);
            }
            push(c.to_string(), &mut out);
        } else if c.is_alphanumeric() {
            run.push(c);
        } else if !run.is_empty() {
            push(std::mem::take(&mut run), &mut out);
        }
    }
    if !run.is_empty() {
        push(run, &mut out);
    }
    out
}
