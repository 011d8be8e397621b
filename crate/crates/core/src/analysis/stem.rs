//! Table-driven light stemmers for Spanish and Arabic.
//!
//! Rule files hold one rule per line, `suffix→replacement,minlen`, with a
//! leading `^` for prefix rules. A rule fires only when the word has at
//! least `minlen` characters. Rules are applied first-match-wins and the
//! stemmer repeats until no rule fires, so every stem is a fixed point.

use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("rule table line {line}: {message}")]
pub struct RuleError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Prefix,
    Suffix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub anchor: Anchor,
    pub affix: Vec<char>,
    pub replacement: Vec<char>,
    pub min_len: usize,
}

impl Rule {
    fn apply(&self, word: &mut Vec<char>) -> bool {
        if word.len() < self.min_len || word.len() < self.affix.len() {
            return false;
        }
        match self.anchor {
            Anchor::Suffix => {
                let cut = word.len() - self.affix.len();
                if word[cut..] != self.affix[..] {
                    return false;
                }
                word.truncate(cut);
                word.extend_from_slice(&self.replacement);
            }
            Anchor::Prefix => {
                if word[..self.affix.len()] != self.affix[..] {
                    return false;
                }
                word.splice(..self.affix.len(), self.replacement.iter().copied());
            }
        }
        true
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleTable {
    pub rules: Vec<Rule>,
}

impl RuleTable {
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| RuleError {
                line: i + 1,
                message: message.to_string(),
            };
            let (lhs, rhs) = line.split_once('→').ok_or_else(|| err("missing '→'"))?;
            let (replacement, min_len) = rhs.rsplit_once(',').ok_or_else(|| err("missing ',minlen'"))?;
            let min_len: usize = min_len
                .trim()
                .parse()
                .map_err(|_| err("minlen is not an integer"))?;
            let (anchor, affix) = match lhs.strip_prefix('^') {
                Some(a) => (Anchor::Prefix, a),
                None => (Anchor::Suffix, lhs),
            };
            if affix.is_empty() {
                return Err(err("empty affix"));
            }
            let affix: Vec<char> = affix.chars().collect();
            let replacement: Vec<char> = replacement.chars().collect();
            if replacement.len() >= affix.len() {
                return Err(err("replacement must be shorter than the affix"));
            }
            rules.push(Rule {
                anchor,
                affix,
                replacement,
                min_len,
            });
        }
        Ok(Self { rules })
    }

    /// Applies the first matching rule of each anchor kind until nothing fires.
    pub fn stem_chars(&self, word: &mut Vec<char>) {
        // every rule strictly shortens the word, so this terminates
        loop {
            let mut fired = false;
            for anchor in [Anchor::Prefix, Anchor::Suffix] {
                if let Some(rule) = self.rules.iter().filter(|r| r.anchor == anchor).find(|r| {
                    let mut probe = word.clone();
                    r.apply(&mut probe)
                }) {
                    rule.apply(word);
                    fired = true;
                }
            }
            if !fired {
                break;
            }
        }
    }
}

pub(crate) fn spanish_rules() -> &'static RuleTable {
    static RULES: OnceLock<RuleTable> = OnceLock::new();
    RULES.get_or_init(|| {
        RuleTable::parse(include_str!("../../data/stem_es.rules")).expect("embedded Spanish rules")
    })
}

pub(crate) fn arabic_rules() -> &'static RuleTable {
    static RULES: OnceLock<RuleTable> = OnceLock::new();
    RULES.get_or_init(|| {
        RuleTable::parse(include_str!("../../data/stem_ar.rules")).expect("embedded Arabic rules")
    })
}

const SPANISH_MIN_LEN: usize = 5;

fn fold_spanish_accent(c: char) -> char {
    match c {
        'à' | 'á' | 'â' | 'ä' => 'a',
        'ò' | 'ó' | 'ô' | 'ö' => 'o',
        'è' | 'é' | 'ê' | 'ë' => 'e',
        'ù' | 'ú' | 'û' | 'ü' => 'u',
        'ì' | 'í' | 'î' | 'ï' => 'i',
        c => c,
    }
}

/// Light Spanish stemming: words of 5+ characters lose their accents and
/// their plural/gender endings.
pub fn light_stem_spanish(term: &str) -> String {
    let mut word: Vec<char> = term.chars().collect();
    if word.len() < SPANISH_MIN_LEN {
        return term.to_string();
    }
    loop {
        for c in word.iter_mut() {
            *c = fold_spanish_accent(*c);
        }
        let before = word.len();
        if let Some(rule) = spanish_rules().rules.iter().find(|r| {
            let mut probe = word.clone();
            r.apply(&mut probe)
        }) {
            rule.apply(&mut word);
        }
        if word.len() == before || word.len() < SPANISH_MIN_LEN {
            break;
        }
    }
    word.into_iter().collect()
}

const TATWEEL: char = '\u{0640}';

/// Arabic orthographic normalization: drops harakat and tatweel, folds
/// hamza-seated alefs to bare alef, alef maksura to yeh and teh marbuta to heh.
pub fn normalize_arabic(term: &str) -> String {
    term.chars()
        .filter_map(|c| match c {
            '\u{064B}'..='\u{0652}' | TATWEEL => None,
            '\u{0622}' | '\u{0623}' | '\u{0625}' => Some('\u{0627}'),
            '\u{0649}' => Some('\u{064A}'),
            '\u{0629}' => Some('\u{0647}'),
            c => Some(c),
        })
        .collect()
}

pub fn light_stem_arabic(term: &str) -> String {
    let mut word: Vec<char> = normalize_arabic(term).chars().collect();
    arabic_rules().stem_chars(&mut word);
    word.into_iter().collect()
}
