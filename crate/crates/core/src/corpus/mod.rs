//! Corpus ingestion and distillation: post-response pairs, question
//! filtering, universal-response removal, word-type tagging, vocabulary.

mod lexicon;
mod synth;

pub use lexicon::{PosFlags, TypeLexicons};
pub use synth::{synth_corpus, write_pairs_tsv};

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Hard cap on post/response length, end markers included.
pub const MAX_LEN: usize = 30;

/// The three word types. A question is a composition of interrogatives
/// (questioning pattern), topic words (key content) and ordinary words
/// (syntax and grammar).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WordType {
    Interrogative,
    Topic,
    Ordinary,
}

impl WordType {
    pub const COUNT: usize = 3;
    pub const ALL: [WordType; 3] = [WordType::Interrogative, WordType::Topic, WordType::Ordinary];

    pub fn code(self) -> usize {
        match self {
            WordType::Interrogative => 0,
            WordType::Topic => 1,
            WordType::Ordinary => 2,
        }
    }

    pub fn from_code(code: usize) -> Option<WordType> {
        Self::ALL.get(code).copied()
    }
}

impl fmt::Display for WordType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WordType::Interrogative => "interrogative",
            WordType::Topic => "topic",
            WordType::Ordinary => "ordinary",
        };
        f.write_str(s)
    }
}

/// An untyped post-response pair, straight from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPair {
    pub post: Vec<String>,
    pub response: Vec<String>,
}

/// A distilled pair with a reference type per response token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPair {
    pub post: Vec<String>,
    pub response: Vec<String>,
    pub response_types: Vec<WordType>,
}

impl CorpusPair {
    pub fn from_raw(raw: RawPair, lex: &TypeLexicons) -> CorpusPair {
        let response_types = tag_types(&raw.response, lex);
        CorpusPair { post: raw.post, response: raw.response, response_types }
    }
}

/// Anything with post and response token views; distillation runs before
/// tagging so it has to work on both raw and typed pairs.
pub trait PairLike {
    fn post_tokens(&self) -> &[String];
    fn response_tokens(&self) -> &[String];
}

impl PairLike for RawPair {
    fn post_tokens(&self) -> &[String] {
        &self.post
    }
    fn response_tokens(&self) -> &[String] {
        &self.response
    }
}

impl PairLike for CorpusPair {
    fn post_tokens(&self) -> &[String] {
        &self.post
    }
    fn response_tokens(&self) -> &[String] {
        &self.response
    }
}

/// Result of reading a pairs file: kept pairs plus skip counters.
#[derive(Debug)]
pub struct LoadedPairs {
    pub pairs: Vec<RawPair>,
    pub blank_lines: usize,
    pub malformed_lines: usize,
}

impl LoadedPairs {
    pub fn warnings(&self) -> usize {
        self.blank_lines + self.malformed_lines
    }
}

/// Read a UTF-8 TSV of `post<TAB>response` lines with space-separated
/// tokens. Blank and malformed lines are skipped and counted; more than 10%
/// malformed (of the non-blank lines) fails the whole file.
pub fn load_pairs(path: &Path) -> Result<LoadedPairs> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = LoadedPairs { pairs: Vec::new(), blank_lines: 0, malformed_lines: 0 };
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            out.blank_lines += 1;
            continue;
        }
        match parse_pair_line(&line) {
            Some(pair) => out.pairs.push(pair),
            None => out.malformed_lines += 1,
        }
    }
    let considered = out.pairs.len() + out.malformed_lines;
    if considered > 0 && out.malformed_lines * 10 > considered {
        return Err(Error::Format(format!(
            "{} of {} non-blank lines malformed in {}",
            out.malformed_lines,
            considered,
            path.display()
        )));
    }
    Ok(out)
}

fn parse_pair_line(line: &str) -> Option<RawPair> {
    let mut fields = line.split('\t');
    let post_str = fields.next()?;
    let resp_str = fields.next()?;
    if fields.next().is_some() {
        return None;
    }
    let post: Vec<String> = post_str.split_whitespace().map(str::to_string).collect();
    let response: Vec<String> = resp_str.split_whitespace().map(str::to_string).collect();
    if post.is_empty() || response.is_empty() || post.len() > MAX_LEN || response.len() > MAX_LEN {
        return None;
    }
    Some(RawPair { post, response })
}

/// Question-form template test: an interrogative lead (first token or first
/// span, e.g. "how many ...") or a trailing question mark.
pub fn is_question(response: &[String], lex: &TypeLexicons) -> bool {
    if response.is_empty() {
        return false;
    }
    if response.last().map(String::as_str) == Some("?") {
        return true;
    }
    lex.has_interrogative_lead(response)
}

/// Drop universal responses: any pair whose exact response string co-occurs
/// with more than `threshold` distinct post strings in the input. Idempotent.
pub fn filter_universal<P: PairLike>(pairs: Vec<P>, threshold: usize) -> Vec<P> {
    debug_assert!(threshold >= 2, "meaningless universal-response threshold {threshold}");
    let mut distinct_posts: HashMap<String, Vec<String>> = HashMap::new();
    for p in &pairs {
        let resp = p.response_tokens().join(" ");
        let post = p.post_tokens().join(" ");
        let posts = distinct_posts.entry(resp).or_default();
        if !posts.contains(&post) {
            posts.push(post);
        }
    }
    pairs
        .into_iter()
        .filter(|p| {
            distinct_posts
                .get(&p.response_tokens().join(" "))
                .map(|posts| posts.len() <= threshold)
                .unwrap_or(true)
        })
        .collect()
}

/// Assign a type to every response token. Priority per token: interrogative
/// dictionary membership (including multiword spans), then noun/verb flag in
/// the content lexicon, otherwise ordinary. End markers land on the ordinary
/// fallback.
pub fn tag_types(response: &[String], lex: &TypeLexicons) -> Vec<WordType> {
    let mut types = vec![WordType::Ordinary; response.len()];
    let mut i = 0;
    while i < response.len() {
        if let Some(span) = lex.interrogative_span_at(response, i) {
            for t in types.iter_mut().skip(i).take(span) {
                *t = WordType::Interrogative;
            }
            i += span;
        } else {
            if lex.is_content_word(&response[i]) {
                types[i] = WordType::Topic;
            }
            i += 1;
        }
    }
    types
}

// ── Vocabulary ───────────────────────────────────────────────────────

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;

pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Frequency-ranked token <-> id bijection with four reserved symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, u32>,
}

impl Vocabulary {
    /// Most frequent `cap` tokens across posts and responses, ids assigned
    /// in (frequency desc, token asc) order after the reserved block.
    pub fn build<P: PairLike>(pairs: &[P], cap: usize) -> Result<Vocabulary> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("cannot build a vocabulary from zero pairs".into()));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for p in pairs {
            for tok in p.post_tokens().iter().chain(p.response_tokens()) {
                if RESERVED.contains(&tok.as_str()) {
                    continue;
                }
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(cap);

        Ok(Self::from_tokens(ranked.into_iter().map(|(t, _)| t.to_string())))
    }

    /// Rebuild from an ordered non-reserved token list (checkpoint load).
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Vocabulary {
        let mut id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(tokens);
        let token_to_id =
            id_to_token.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocabulary { id_to_token, token_to_id }
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> u32 {
        self.id_of(token).unwrap_or(UNK)
    }

    pub fn token_of(&self, id: u32) -> &str {
        &self.id_to_token[id as usize]
    }

    /// Non-reserved tokens in id order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.id_to_token.iter().skip(RESERVED.len()).map(String::as_str)
    }
}
