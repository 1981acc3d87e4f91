//! Rule-based questioning-pattern classifier over eleven classes. The paper
//! pattern inventory was annotated by hand; here a keyword cascade stands in,
//! shipped as an editable config file.

use std::fmt;
use std::path::Path;

use crate::corpus::TypeLexicons;
use crate::error::{Error, Result};
use crate::fsio;

/// The eleven questioning-pattern classes, in histogram order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternClass {
    YesNo,
    How,
    Why,
    What,
    When,
    Who,
    Where,
    Which,
    HowMany,
    Alternative,
    Other,
}

pub const PATTERN_CLASS_COUNT: usize = 11;

impl PatternClass {
    pub const ALL: [PatternClass; PATTERN_CLASS_COUNT] = [
        PatternClass::YesNo,
        PatternClass::How,
        PatternClass::Why,
        PatternClass::What,
        PatternClass::When,
        PatternClass::Who,
        PatternClass::Where,
        PatternClass::Which,
        PatternClass::HowMany,
        PatternClass::Alternative,
        PatternClass::Other,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            PatternClass::YesNo => "Yes-No",
            PatternClass::How => "How",
            PatternClass::Why => "Why",
            PatternClass::What => "What",
            PatternClass::When => "When",
            PatternClass::Who => "Who",
            PatternClass::Where => "Where",
            PatternClass::Which => "Which",
            PatternClass::HowMany => "How-many",
            PatternClass::Alternative => "Alternative",
            PatternClass::Other => "Other",
        }
    }

    fn parse(s: &str) -> Option<PatternClass> {
        Self::ALL.iter().copied().find(|c| c.name() == s)
    }
}

impl fmt::Display for PatternClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Keyword cascade: scanning is leftmost-first over the question, the
/// longest keyword wins at a position, file order breaks ties.
#[derive(Debug, Clone)]
pub struct PatternRules {
    rules: Vec<(PatternClass, Vec<Vec<String>>)>,
}

const BUNDLED: &str = include_str!("../../assets/patterns.tsv");

impl PatternRules {
    pub fn bundled() -> PatternRules {
        Self::from_str_cfg(BUNDLED).expect("bundled pattern rules parse")
    }

    pub fn from_file(path: &Path) -> Result<PatternRules> {
        Self::from_str_cfg(&fsio::read_to_string(path)?)
    }

    pub fn from_str_cfg(text: &str) -> Result<PatternRules> {
        let mut rules = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (class, keywords) = line.split_once('\t').ok_or_else(|| {
                Error::Format(format!("pattern rules line {}: expected class<TAB>keywords", ln + 1))
            })?;
            let class = PatternClass::parse(class.trim()).ok_or_else(|| {
                Error::Format(format!("pattern rules line {}: unknown class '{class}'", ln + 1))
            })?;
            let keywords: Vec<Vec<String>> = keywords
                .split(',')
                .map(|k| k.split_whitespace().map(str::to_string).collect::<Vec<_>>())
                .filter(|k: &Vec<String>| !k.is_empty())
                .collect();
            rules.push((class, keywords));
        }
        Ok(PatternRules { rules })
    }

    /// Longest keyword match starting at `tokens[at]`, file order on ties.
    fn match_at(&self, tokens: &[String], at: usize) -> Option<(PatternClass, usize)> {
        let mut best: Option<(PatternClass, usize)> = None;
        for (class, keywords) in &self.rules {
            for kw in keywords {
                if kw.len() <= tokens.len() - at
                    && kw.iter().zip(&tokens[at..]).all(|(a, b)| a == b)
                    && best.map(|(_, len)| kw.len() > len).unwrap_or(true)
                {
                    best = Some((*class, kw.len()));
                }
            }
        }
        best
    }
}

/// Total, deterministic pattern classification. Keyword hit wins; otherwise
/// a trailing question mark or an interrogative template lead makes it a
/// yes-no question, and anything else is Other.
pub fn classify_pattern(
    question: &[String],
    rules: &PatternRules,
    lex: &TypeLexicons,
) -> PatternClass {
    for at in 0..question.len() {
        if let Some((class, _)) = rules.match_at(question, at) {
            return class;
        }
    }
    if question.last().map(String::as_str) == Some("?") || lex.has_interrogative_lead(question) {
        PatternClass::YesNo
    } else {
        PatternClass::Other
    }
}

/// Counts per class over a set of questions.
pub fn pattern_histogram(
    questions: &[Vec<String>],
    rules: &PatternRules,
    lex: &TypeLexicons,
) -> [u64; PATTERN_CLASS_COUNT] {
    let mut hist = [0u64; PATTERN_CLASS_COUNT];
    for q in questions {
        hist[classify_pattern(q, rules, lex).index()] += 1;
    }
    hist
}
