//! Pointwise-mutual-information statistics over post-response pairs, used
//! to predict topic words for a post at inference time.

mod io;

use std::collections::BTreeMap;

use crate::corpus::{PairLike, TypeLexicons};
use crate::error::{Error, Result};

/// Co-occurrence counts with document-frequency semantics: a token counts
/// once per post (or response) however often it repeats, and a (post token,
/// response token) pair counts once per pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmiTable {
    n_pairs: u64,
    min_count: u64,
    post_doc_count: BTreeMap<String, u64>,
    resp_doc_count: BTreeMap<String, u64>,
    joint_count: BTreeMap<(String, String), u64>,
}

/// Ranked topic candidates for one post.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicPrediction {
    pub post: Vec<String>,
    /// (token, relevance) sorted by relevance descending, token ascending on
    /// ties; at most the requested count, only strictly positive scores.
    pub topics: Vec<(String, f64)>,
}

impl TopicPrediction {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.topics.iter().map(|(t, _)| t.as_str())
    }
}

pub const DEFAULT_TOPIC_COUNT: usize = 20;

impl PmiTable {
    /// Count co-occurrences over the pairs; entries below `min_count` are
    /// dropped from every section.
    pub fn build<P: PairLike>(pairs: &[P], min_count: u64) -> Result<PmiTable> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("cannot build a PMI table from zero pairs".into()));
        }
        if min_count < 1 {
            return Err(Error::InvalidInput("min_count must be at least 1".into()));
        }
        let mut table = PmiTable {
            n_pairs: pairs.len() as u64,
            min_count,
            post_doc_count: BTreeMap::new(),
            resp_doc_count: BTreeMap::new(),
            joint_count: BTreeMap::new(),
        };
        for p in pairs {
            let post: std::collections::BTreeSet<&String> = p.post_tokens().iter().collect();
            let resp: std::collections::BTreeSet<&String> = p.response_tokens().iter().collect();
            for &x in &post {
                *table.post_doc_count.entry(x.clone()).or_insert(0) += 1;
            }
            for &y in &resp {
                *table.resp_doc_count.entry(y.clone()).or_insert(0) += 1;
            }
            for &x in &post {
                for &y in &resp {
                    *table.joint_count.entry((x.clone(), y.clone())).or_insert(0) += 1;
                }
            }
        }
        table.post_doc_count.retain(|_, c| *c >= min_count);
        table.resp_doc_count.retain(|_, c| *c >= min_count);
        table.joint_count.retain(|_, c| *c >= min_count);
        Ok(table)
    }

    pub fn n_pairs(&self) -> u64 {
        self.n_pairs
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn post_count(&self, token: &str) -> Option<u64> {
        self.post_doc_count.get(token).copied()
    }

    pub fn resp_count(&self, token: &str) -> Option<u64> {
        self.resp_doc_count.get(token).copied()
    }

    pub fn joint(&self, x: &str, y: &str) -> Option<u64> {
        self.joint_count.get(&(x.to_string(), y.to_string())).copied()
    }

    /// `log( p(x,y) / (p1(x) * p2(y)) )`, natural log. Pairs with a missing
    /// marginal or zero joint count are undefined, not negative infinity.
    pub fn pmi(&self, w_x: &str, w_y: &str) -> Result<f64> {
        let undefined = || Error::UndefinedPair { x: w_x.to_string(), y: w_y.to_string() };
        let px = self.post_count(w_x).filter(|&c| c > 0).ok_or_else(undefined)?;
        let py = self.resp_count(w_y).filter(|&c| c > 0).ok_or_else(undefined)?;
        let j = self.joint(w_x, w_y).filter(|&c| c > 0).ok_or_else(undefined)?;
        let n = self.n_pairs as f64;
        let p_joint = j as f64 / n;
        let p1 = px as f64 / n;
        let p2 = py as f64 / n;
        Ok((p_joint / (p1 * p2)).ln())
    }

    /// Relevance of candidate `k` to a post: the sum of `e^PMI(w, k)` over
    /// the distinct post tokens (first-occurrence order). Undefined pairs
    /// contribute zero.
    pub fn rel(&self, k: &str, post: &[String]) -> f64 {
        let mut seen: Vec<&str> = Vec::new();
        let mut total = 0.0;
        for w in post {
            if seen.contains(&w.as_str()) {
                continue;
            }
            seen.push(w);
            if let Ok(v) = self.pmi(w, k) {
                total += v.exp();
            }
        }
        total
    }

    /// Rank response-side content words (nouns/verbs in the lexicon) by
    /// relevance to the post. At most `n` topics, positive scores only.
    pub fn predict_topics(
        &self,
        post: &[String],
        n: usize,
        lex: &TypeLexicons,
    ) -> TopicPrediction {
        debug_assert!(n >= 1);
        let mut scored: Vec<(String, f64)> = self
            .resp_doc_count
            .keys()
            .filter(|t| lex.is_content_word(t))
            .map(|t| (t.clone(), self.rel(t, post)))
            .filter(|(_, r)| *r > 0.0)
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored.truncate(n);
        TopicPrediction { post: post.to_vec(), topics: scored }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RawPair;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn pairs(spec: &[(&str, &str)]) -> Vec<RawPair> {
        spec.iter().map(|(p, r)| RawPair { post: toks(p), response: toks(r) }).collect()
    }

    #[test]
    fn document_frequency_counting() {
        let t = PmiTable::build(&pairs(&[("a", "x"), ("a", "y")]), 1).unwrap();
        assert_eq!(t.post_count("a"), Some(2));
        assert_eq!(t.joint("a", "x"), Some(1));

        // Repetition inside one post still counts once.
        let t = PmiTable::build(&pairs(&[("b b b", "x")]), 1).unwrap();
        assert_eq!(t.post_count("b"), Some(1));
    }

    #[test]
    fn min_count_drops_rare_entries() {
        let t = PmiTable::build(&pairs(&[("a", "x"), ("a", "y")]), 2).unwrap();
        assert_eq!(t.post_count("a"), Some(2));
        assert_eq!(t.joint("a", "x"), None);
        assert!(t.pmi("a", "x").is_err());
    }

    #[test]
    fn pmi_hand_values() {
        let t = PmiTable::build(&pairs(&[("a", "x"), ("b", "y")]), 1).unwrap();
        assert_eq!(t.pmi("a", "x").unwrap(), 2.0f64.ln());
        match t.pmi("a", "y") {
            Err(crate::error::Error::UndefinedPair { .. }) => {}
            other => panic!("expected undefined pair, got {other:?}"),
        }
    }

    #[test]
    fn pmi_zero_at_independence_baseline() {
        // A token in every post and every response: p = p1 * p2 = 1.
        let t = PmiTable::build(&pairs(&[("t a", "t x"), ("t b", "t y"), ("t c", "t z")]), 1)
            .unwrap();
        assert_eq!(t.pmi("t", "t").unwrap(), 0.0);
    }

    #[test]
    fn pmi_is_not_symmetric_in_general() {
        let t = PmiTable::build(&pairs(&[("a", "b"), ("a", "c"), ("b", "a")]), 1).unwrap();
        let ab = t.pmi("a", "b").unwrap();
        let ba = t.pmi("b", "a").unwrap();
        assert!((ab - 1.5f64.ln()).abs() < 1e-15);
        assert!((ba - 3.0f64.ln()).abs() < 1e-15);
        assert_ne!(ab, ba);
    }

    #[test]
    fn duplicating_the_corpus_leaves_pmi_unchanged() {
        let base = pairs(&[("a b", "x"), ("a", "y x"), ("c", "x z")]);
        let t1 = PmiTable::build(&base, 1).unwrap();
        let mut tripled = Vec::new();
        for _ in 0..3 {
            tripled.extend(base.clone());
        }
        let t3 = PmiTable::build(&tripled, 1).unwrap();
        for (x, y) in [("a", "x"), ("a", "y"), ("c", "z"), ("b", "x")] {
            assert_eq!(t1.pmi(x, y).unwrap(), t3.pmi(x, y).unwrap());
        }
    }

    #[test]
    fn rel_examples() {
        let t = PmiTable::build(&pairs(&[("a", "x"), ("b", "y")]), 1).unwrap();
        // Single-token post with pmi = ln 2 contributes e^{ln 2} = 2.
        assert!((t.rel("x", &toks("a")) - 2.0).abs() < 1e-12);
        // No defined pair at all.
        assert_eq!(t.rel("x", &toks("q r")), 0.0);
        // Duplicates in the post are ignored.
        assert_eq!(t.rel("x", &toks("a a a")), t.rel("x", &toks("a")));
    }

    #[test]
    fn predict_topics_is_ranked_and_bounded() {
        use crate::corpus::PosFlags;
        let lex = TypeLexicons::empty().with_content([
            ("x", PosFlags { noun: true, verb: false }),
            ("y", PosFlags { noun: false, verb: true }),
            ("z", PosFlags { noun: true, verb: false }),
        ]);
        let corpus = pairs(&[("a", "x"), ("a", "x z"), ("a", "y"), ("b", "y")]);
        let t = PmiTable::build(&corpus, 1).unwrap();

        let pred = t.predict_topics(&toks("a"), 20, &lex);
        // Brute force over all response-side content tokens.
        let mut expect: Vec<(String, f64)> = ["x", "y", "z"]
            .iter()
            .map(|k| (k.to_string(), t.rel(k, &toks("a"))))
            .filter(|(_, r)| *r > 0.0)
            .collect();
        expect.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        assert_eq!(pred.topics, expect);

        let pred1 = t.predict_topics(&toks("a"), 1, &lex);
        assert_eq!(pred1.topics.len(), 1);
        assert_eq!(pred1.topics[0].0, pred.topics[0].0);

        // A post with no scoring candidates yields the empty list.
        let none = t.predict_topics(&toks("nothing known"), 20, &lex);
        assert!(none.topics.is_empty());
    }

    #[test]
    fn empty_input_is_rejected() {
        let empty: Vec<RawPair> = Vec::new();
        assert!(PmiTable::build(&empty, 1).is_err());
    }
}
