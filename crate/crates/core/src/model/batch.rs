//! Padded, time-major training batches.

use crate::corpus::{CorpusPair, Vocabulary, WordType, BOS, EOS, PAD, UNK};
use crate::error::{Error, Result};
use crate::model::decode::{make_partition, TypePartition};

/// One padded batch. Sequences are laid out time-major: `post_steps[t][b]`
/// is the id for batch row `b` at encoder step `t`. Targets carry the end
/// marker; `out_mask` zeroes every padded slot out of the loss.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    pub post_steps: Vec<Vec<u32>>,
    pub post_mask: Vec<Vec<f64>>,
    pub dec_inputs: Vec<Vec<u32>>,
    pub targets: Vec<Vec<u32>>,
    pub target_types: Vec<Vec<usize>>,
    pub out_mask: Vec<Vec<f64>>,
    /// Per-row dynamic vocabulary partitions (hard typed decoder only).
    pub partitions: Option<Vec<TypePartition>>,
    /// Count of real (unpadded) target tokens.
    pub n_tokens: usize,
}

impl Batch {
    /// Build a batch. When `htd_interrogative_ids` is given, each row also
    /// gets a training-time partition: topic ids come from the reference
    /// response's topic-tagged tokens, interrogatives from the dictionary,
    /// and the rest of the vocabulary is ordinary.
    pub fn build(
        pairs: &[&CorpusPair],
        vocab: &Vocabulary,
        htd_interrogative_ids: Option<&[u32]>,
    ) -> Result<Batch> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("cannot build an empty batch".into()));
        }
        for p in pairs.iter() {
            if p.post.is_empty() || p.response.is_empty() {
                return Err(Error::InvalidInput("empty sequence in batch".into()));
            }
            if p.response_types.len() != p.response.len() {
                return Err(Error::InvalidInput("response/type length mismatch".into()));
            }
        }
        let size = pairs.len();
        let post_len = pairs.iter().map(|p| p.post.len()).max().unwrap();
        // +1 for the end marker every target sequence carries.
        let resp_len = pairs.iter().map(|p| p.response.len()).max().unwrap() + 1;

        let mut post_steps = vec![vec![PAD; size]; post_len];
        let mut post_mask = vec![vec![0.0; size]; post_len];
        for (b, p) in pairs.iter().enumerate() {
            for (t, tok) in p.post.iter().enumerate() {
                post_steps[t][b] = vocab.id_or_unk(tok);
                post_mask[t][b] = 1.0;
            }
        }

        let mut dec_inputs = vec![vec![PAD; size]; resp_len];
        let mut targets = vec![vec![PAD; size]; resp_len];
        let mut target_types = vec![vec![WordType::Ordinary.code(); size]; resp_len];
        let mut out_mask = vec![vec![0.0; size]; resp_len];
        let mut n_tokens = 0usize;
        for (b, p) in pairs.iter().enumerate() {
            let ids: Vec<u32> = p.response.iter().map(|t| vocab.id_or_unk(t)).collect();
            for t in 0..=ids.len() {
                dec_inputs[t][b] = if t == 0 { BOS } else { ids[t - 1] };
                if t < ids.len() {
                    targets[t][b] = ids[t];
                    // Out-of-vocabulary tokens collapse to UNK, typed ordinary.
                    target_types[t][b] = if ids[t] == UNK {
                        WordType::Ordinary.code()
                    } else {
                        p.response_types[t].code()
                    };
                } else {
                    targets[t][b] = EOS;
                    target_types[t][b] = WordType::Ordinary.code();
                }
                out_mask[t][b] = 1.0;
                n_tokens += 1;
            }
        }

        let partitions = htd_interrogative_ids.map(|interrogatives| {
            pairs
                .iter()
                .map(|p| {
                    let topic_ids: Vec<u32> = p
                        .response
                        .iter()
                        .zip(&p.response_types)
                        .filter(|(_, ty)| **ty == WordType::Topic)
                        .map(|(tok, _)| vocab.id_or_unk(tok))
                        .filter(|&id| id != UNK)
                        .collect();
                    make_partition(vocab.size(), interrogatives, &topic_ids)
                })
                .collect()
        });

        Ok(Batch {
            size,
            post_steps,
            post_mask,
            dec_inputs,
            targets,
            target_types,
            out_mask,
            partitions,
            n_tokens,
        })
    }

    pub fn post_len(&self) -> usize {
        self.post_steps.len()
    }

    pub fn resp_len(&self) -> usize {
        self.targets.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tag_types, TypeLexicons};

    fn pair(post: &str, resp: &str) -> CorpusPair {
        let lex = TypeLexicons::bundled();
        let post: Vec<String> = post.split_whitespace().map(str::to_string).collect();
        let response: Vec<String> = resp.split_whitespace().map(str::to_string).collect();
        let response_types = tag_types(&response, &lex);
        CorpusPair { post, response, response_types }
    }

    #[test]
    fn padding_and_masks_line_up() {
        let a = pair("i sang the karaoke", "who chose the songs ?");
        let b = pair("we读 nonsense", "what ?");
        let pairs = vec![pair("i sang", "was it good ?"), a, b];
        let refs: Vec<&CorpusPair> = pairs.iter().collect();
        let vocab = Vocabulary::build(&pairs, 100).unwrap();
        let batch = Batch::build(&refs, &vocab, None).unwrap();

        assert_eq!(batch.size, 3);
        assert_eq!(batch.post_len(), 4);
        assert_eq!(batch.resp_len(), 6);
        // Row 2's response is "what ?" + EOS = 3 real steps.
        let real: f64 = (0..batch.resp_len()).map(|t| batch.out_mask[t][2]).sum();
        assert_eq!(real, 3.0);
        assert_eq!(batch.targets[2][2], EOS);
        assert_eq!(batch.dec_inputs[0][2], BOS);
        assert_eq!(batch.n_tokens, 5 + 6 + 3);
    }

    #[test]
    fn htd_partitions_follow_reference_topics() {
        let p = pair("i sang the karaoke", "who chose the songs ?");
        let pairs = vec![p];
        let refs: Vec<&CorpusPair> = pairs.iter().collect();
        let vocab = Vocabulary::build(&pairs, 100).unwrap();
        let lex = TypeLexicons::bundled();
        let inter = crate::model::interrogative_ids(&vocab, &lex);
        let batch = Batch::build(&refs, &vocab, Some(&inter)).unwrap();
        let part = &batch.partitions.as_ref().unwrap()[0];
        assert_eq!(part.type_of(vocab.id_of("songs").unwrap()), WordType::Topic);
        assert_eq!(part.type_of(vocab.id_of("chose").unwrap()), WordType::Topic);
        assert_eq!(part.type_of(vocab.id_of("who").unwrap()), WordType::Interrogative);
        assert_eq!(part.type_of(vocab.id_of("the").unwrap()), WordType::Ordinary);
        assert_eq!(part.type_of(EOS), WordType::Ordinary);
    }
}
