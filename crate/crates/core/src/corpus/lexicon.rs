use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio;

/// Part-of-speech flags from the content lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PosFlags {
    pub noun: bool,
    pub verb: bool,
}

/// The two word lists driving type tagging: a small interrogative
/// dictionary (single tokens plus multiword spans such as "how many") and a
/// content lexicon flagging nouns and verbs. Both are plain editable files;
/// the bundled versions are a reconstruction, not ground truth.
#[derive(Debug, Clone)]
pub struct TypeLexicons {
    singles: BTreeSet<String>,
    /// Multiword forms as token sequences, longest first.
    multis: Vec<Vec<String>>,
    content: BTreeMap<String, PosFlags>,
}

const INTERROGATIVES: &str = include_str!("../../assets/interrogatives.txt");
const CONTENT: &str = include_str!("../../assets/content_lexicon.tsv");

impl TypeLexicons {
    /// The lexicons bundled with the crate.
    pub fn bundled() -> Self {
        Self::from_strs(INTERROGATIVES, CONTENT).expect("bundled lexicons parse")
    }

    pub fn from_files(interrogatives: &Path, content: &Path) -> Result<Self> {
        Self::from_strs(&fsio::read_to_string(interrogatives)?, &fsio::read_to_string(content)?)
    }

    pub fn from_strs(interrogatives: &str, content: &str) -> Result<Self> {
        let mut singles = BTreeSet::new();
        let mut multis: Vec<Vec<String>> = Vec::new();
        for line in interrogatives.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if toks.len() == 1 {
                singles.insert(toks.into_iter().next().unwrap());
            } else {
                multis.push(toks);
            }
        }
        multis.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));

        let mut content_map = BTreeMap::new();
        for (ln, line) in content.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, flags) = line.split_once('\t').ok_or_else(|| {
                Error::Format(format!("content lexicon line {}: expected token<TAB>flags", ln + 1))
            })?;
            let mut pos = PosFlags { noun: false, verb: false };
            for ch in flags.trim().chars() {
                match ch {
                    'n' => pos.noun = true,
                    'v' => pos.verb = true,
                    other => {
                        return Err(Error::Format(format!(
                            "content lexicon line {}: unknown flag '{other}'",
                            ln + 1
                        )))
                    }
                }
            }
            content_map.insert(token.trim().to_string(), pos);
        }
        Ok(TypeLexicons { singles, multis, content: content_map })
    }

    pub fn empty() -> Self {
        TypeLexicons { singles: BTreeSet::new(), multis: Vec::new(), content: BTreeMap::new() }
    }

    pub fn with_interrogatives<I: IntoIterator<Item = S>, S: Into<String>>(
        mut self,
        forms: I,
    ) -> Self {
        for f in forms {
            let f = f.into();
            let toks: Vec<String> = f.split_whitespace().map(str::to_string).collect();
            if toks.len() == 1 {
                self.singles.insert(f);
            } else {
                self.multis.push(toks);
            }
        }
        self.multis.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        self
    }

    pub fn with_content<I: IntoIterator<Item = (S, PosFlags)>, S: Into<String>>(
        mut self,
        entries: I,
    ) -> Self {
        for (tok, flags) in entries {
            self.content.insert(tok.into(), flags);
        }
        self
    }

    pub fn is_interrogative_token(&self, token: &str) -> bool {
        self.singles.contains(token)
    }

    pub fn content_flags(&self, token: &str) -> Option<PosFlags> {
        self.content.get(token).copied()
    }

    pub fn is_content_word(&self, token: &str) -> bool {
        self.content_flags(token).map(|f| f.noun || f.verb).unwrap_or(false)
    }

    /// Single-token interrogative forms, sorted (for vocabulary partitions).
    pub fn interrogative_singles(&self) -> impl Iterator<Item = &str> {
        self.singles.iter().map(String::as_str)
    }

    /// Does any interrogative form (longest first) start at `tokens[at]`?
    /// Returns the matched span length.
    pub fn interrogative_span_at(&self, tokens: &[String], at: usize) -> Option<usize> {
        for form in &self.multis {
            if tokens.len() - at >= form.len()
                && form.iter().zip(&tokens[at..]).all(|(a, b)| a == b)
            {
                return Some(form.len());
            }
        }
        if self.singles.contains(tokens[at].as_str()) {
            Some(1)
        } else {
            None
        }
    }

    /// Template-lead test: does the sentence open with an interrogative form?
    pub fn has_interrogative_lead(&self, tokens: &[String]) -> bool {
        !tokens.is_empty() && self.interrogative_span_at(tokens, 0).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_parse_and_lookup() {
        let lex = TypeLexicons::bundled();
        assert!(lex.is_interrogative_token("what"));
        assert!(lex.is_interrogative_token("?"));
        assert!(!lex.is_interrogative_token("sushi"));
        assert_eq!(lex.content_flags("effect"), Some(PosFlags { noun: true, verb: false }));
        assert!(lex.content_flags("the").is_none());
    }

    #[test]
    fn multiword_spans_match_longest_first() {
        let lex = TypeLexicons::bundled();
        let toks: Vec<String> =
            ["how", "many", "people"].iter().map(|s| s.to_string()).collect();
        assert_eq!(lex.interrogative_span_at(&toks, 0), Some(2));
        let toks: Vec<String> = ["how", "often"].iter().map(|s| s.to_string()).collect();
        assert_eq!(lex.interrogative_span_at(&toks, 0), Some(1));
    }
}
