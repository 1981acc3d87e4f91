//! Forward passes shared by training and inference: encoding, attention,
//! the per-step head distributions, dynamic vocabulary partitions and the
//! Gumbel-Softmax type mask.

use crate::autodiff::{Tape, Var};
use crate::corpus::{TypeLexicons, Vocabulary, WordType};
use crate::error::{Error, Result};
use crate::model::rnn::{gru_stack, masked_carry};
use crate::model::{BoundHead, BoundParams, BoundProjection, HeadParams, ModelParams, TYPE_COUNT};

/// Score for padded attention slots; exp(-1e9) underflows to zero weight.
const ATTN_MASK_SCORE: f64 = -1e9;

/// Renormalization guard: all generation mass masked away.
const MASS_FLOOR: f64 = 1e-12;

/// Floor for `log(pi)` inside Gumbel-Softmax.
const PI_FLOOR: f64 = 1e-12;

// ── Dynamic vocabulary partition ─────────────────────────────────────

/// A word type for every vocabulary id (hard typed decoder).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypePartition {
    types: Vec<WordType>,
}

impl TypePartition {
    pub fn type_of(&self, id: u32) -> WordType {
        self.types[id as usize]
    }

    pub fn vocab_size(&self) -> usize {
        self.types.len()
    }

    pub fn counts(&self) -> [usize; TYPE_COUNT] {
        let mut c = [0; TYPE_COUNT];
        for t in &self.types {
            c[t.code()] += 1;
        }
        c
    }

    pub fn codes(&self) -> impl Iterator<Item = usize> + '_ {
        self.types.iter().map(|t| t.code())
    }
}

/// Classify the whole vocabulary for one post. Priority on overlap:
/// interrogative over topic over ordinary.
pub fn make_partition(
    vocab_size: usize,
    interrogative_ids: &[u32],
    topic_ids: &[u32],
) -> TypePartition {
    let mut types = vec![WordType::Ordinary; vocab_size];
    for &id in topic_ids {
        types[id as usize] = WordType::Topic;
    }
    for &id in interrogative_ids {
        types[id as usize] = WordType::Interrogative;
    }
    TypePartition { types }
}

/// Vocabulary ids of the single-token interrogative dictionary forms.
pub fn interrogative_ids(vocab: &Vocabulary, lex: &TypeLexicons) -> Vec<u32> {
    lex.interrogative_singles().filter_map(|form| vocab.id_of(form)).collect()
}

// ── Gumbel-Softmax ───────────────────────────────────────────────────

/// `GS(pi)_i = exp((log pi_i + g_i)/tau) / sum_j exp((log pi_j + g_j)/tau)`,
/// with zero entries of `pi` clamped (and counted) before the log.
pub fn gumbel_softmax(tape: &mut Tape, pi: Var, tau: f64, noise: Var) -> Result<Var> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("gumbel-softmax tau {tau} must be > 0")));
    }
    let log_pi = tape.log_floored(pi, PI_FLOOR)?;
    let shifted = tape.add(log_pi, noise)?;
    let scaled = tape.scalar_mul(1.0 / tau, shifted)?;
    tape.softmax(scaled)
}

/// Plain-vector Gumbel-Softmax for callers outside a tape.
pub fn gumbel_softmax_vec(pi: &[f64], tau: f64, g: &[f64]) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("gumbel-softmax tau {tau} must be > 0")));
    }
    if pi.len() != g.len() {
        return Err(Error::InvalidInput("pi and noise lengths differ".into()));
    }
    let logits: Vec<f64> =
        pi.iter().zip(g).map(|(&p, &gi)| (p.max(PI_FLOOR).ln() + gi) / tau).collect();
    crate::autodiff::softmax(&logits)
}

// ── Encoder and attention ────────────────────────────────────────────

/// Encoder outputs bound on a tape: top-layer states per step, projected
/// attention keys, final per-layer states, and the padded-slot score mask.
pub struct Encoded {
    pub top_states: Vec<Var>,
    pub keys: Vec<Var>,
    pub finals: Vec<Var>,
    pub score_mask: Option<Var>,
}

/// Run the encoder GRU stack over a time-major id layout, freezing state on
/// padded steps, then project the attention keys.
pub fn encode_batch(
    tape: &mut Tape,
    bound: &BoundParams,
    d_hidden: usize,
    post_steps: &[Vec<u32>],
    post_mask: Option<&[Vec<f64>]>,
) -> Result<Encoded> {
    let m = post_steps.len();
    if m == 0 || m > crate::corpus::MAX_LEN {
        return Err(Error::InvalidInput(format!("encoder input length {m} out of range")));
    }
    let batch = post_steps[0].len();
    let zero = tape.constant(vec![batch, d_hidden], vec![0.0; batch * d_hidden]);
    let mut states: Vec<Var> = vec![zero; bound.encoder.len()];
    let mut top_states = Vec::with_capacity(m);

    for (t, ids) in post_steps.iter().enumerate() {
        let idx: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        let emb = tape.gather(bound.embedding, &idx)?;
        let prev = states.clone();
        let top = gru_stack(tape, &bound.encoder, emb, &mut states)?;
        let top = if let Some(masks) = post_mask {
            let mask_mat = mask_matrix(tape, &masks[t], d_hidden);
            for (l, old) in prev.into_iter().enumerate() {
                states[l] = masked_carry(tape, mask_mat, states[l], old)?;
            }
            states[bound.encoder.len() - 1]
        } else {
            top
        };
        top_states.push(top);
    }

    let keys = top_states
        .iter()
        .map(|&h| tape.matmul(h, bound.attn_u_keys))
        .collect::<Result<Vec<_>>>()?;

    let score_mask = match post_mask {
        Some(masks) => {
            let mut data = vec![0.0; batch * m];
            for (t, col) in masks.iter().enumerate() {
                for (b, &mv) in col.iter().enumerate() {
                    if mv == 0.0 {
                        data[b * m + t] = ATTN_MASK_SCORE;
                    }
                }
            }
            Some(tape.constant(vec![batch, m], data))
        }
        None => None,
    };

    Ok(Encoded { top_states, keys, finals: states, score_mask })
}

/// Replicate a per-row 0/1 mask across `width` columns as a constant.
fn mask_matrix(tape: &mut Tape, row_mask: &[f64], width: usize) -> Var {
    let mut data = Vec::with_capacity(row_mask.len() * width);
    for &mv in row_mask {
        data.extend(std::iter::repeat(mv).take(width));
    }
    tape.constant(vec![row_mask.len(), width], data)
}

/// Attentive read: scores `v^T tanh(W s_prev + U h_i)`, softmax weights,
/// context as the weighted state sum. Returns (context, weights).
pub fn attend(tape: &mut Tape, bound: &BoundParams, s_prev: Var, enc: &Encoded) -> Result<(Var, Var)> {
    let query = tape.matmul(s_prev, bound.attn_w_query)?;
    let mut scores = Vec::with_capacity(enc.keys.len());
    for &key in &enc.keys {
        let pre = tape.add(query, key)?;
        let act = tape.tanh(pre)?;
        scores.push(tape.matmul(act, bound.attn_score)?);
    }
    let mut score_mat = tape.concat(1, &scores)?;
    if let Some(mask) = enc.score_mask {
        score_mat = tape.add(score_mat, mask)?;
    }
    let alpha = tape.softmax(score_mat)?;

    let width = tape.shape(enc.top_states[0])[1];
    let mut ctx: Option<Var> = None;
    for (i, &h) in enc.top_states.iter().enumerate() {
        let w_col = tape.select_col(alpha, i)?;
        let w_mat = tape.broadcast_col(w_col, width)?;
        let term = tape.mul(w_mat, h)?;
        ctx = Some(match ctx {
            Some(acc) => tape.add(acc, term)?,
            None => term,
        });
    }
    Ok((ctx.unwrap(), alpha))
}

// ── Head distributions ───────────────────────────────────────────────

/// Per-row type indicator constants: `indicators[j][b, v] = 1` iff word `v`
/// has type `j` in row `b`'s partition.
pub fn partition_indicators(
    tape: &mut Tape,
    partitions: &[TypePartition],
) -> [Var; TYPE_COUNT] {
    let batch = partitions.len();
    let vocab = partitions[0].vocab_size();
    let mut data = [(); TYPE_COUNT].map(|_| vec![0.0; batch * vocab]);
    for (b, part) in partitions.iter().enumerate() {
        for (v, code) in part.codes().enumerate() {
            data[code][b * vocab + v] = 1.0;
        }
    }
    data.map(|d| tape.constant(vec![batch, vocab], d))
}

/// Hard-typed-decoder inputs for one step.
pub struct HtdContext<'a> {
    pub indicators: &'a [Var; TYPE_COUNT],
    pub tau: f64,
    /// Gumbel noise, `batch x TYPE_COUNT`; zeros for deterministic decoding.
    pub noise: Var,
}

/// One head evaluation on decoder state `s`.
pub struct HeadStep {
    /// Plain/soft: the final generation distribution. Hard: the pre-mask
    /// generation softmax.
    pub gen: Var,
    /// Type distribution (soft Eq.-style mixture weights or hard head).
    pub type_dist: Option<Var>,
    /// Hard decoder only: modulated, unnormalized `P'`.
    pub modulated: Option<Var>,
}

fn softmax_proj(tape: &mut Tape, proj: &BoundProjection, s: Var) -> Result<Var> {
    let logits = tape.affine(s, proj.w, proj.b)?;
    tape.softmax(logits)
}

/// Evaluate the active head on state `s`. `htd` must be given exactly for
/// the hard variant.
pub fn head_step(
    tape: &mut Tape,
    head: &BoundHead,
    s: Var,
    htd: Option<&HtdContext>,
) -> Result<HeadStep> {
    match head {
        BoundHead::Plain { gen } => {
            let p = softmax_proj(tape, gen, s)?;
            Ok(HeadStep { gen: p, type_dist: None, modulated: None })
        }
        BoundHead::Std { type_proj, gen } => {
            let pi = softmax_proj(tape, type_proj, s)?;
            let vocab = tape.shape(gen[0].w)[1];
            let mut mix: Option<Var> = None;
            for (i, proj) in gen.iter().enumerate() {
                let comp = softmax_proj(tape, proj, s)?;
                let weight = tape.select_col(pi, i)?;
                let weight_mat = tape.broadcast_col(weight, vocab)?;
                let term = tape.mul(weight_mat, comp)?;
                mix = Some(match mix {
                    Some(acc) => tape.add(acc, term)?,
                    None => term,
                });
            }
            Ok(HeadStep { gen: mix.unwrap(), type_dist: Some(pi), modulated: None })
        }
        BoundHead::Htd { gen, type_proj } => {
            let ctx = htd.ok_or_else(|| {
                Error::State("hard typed decoder step without partition context".into())
            })?;
            let p = softmax_proj(tape, gen, s)?;
            let pi = softmax_proj(tape, type_proj, s)?;
            let gs = gumbel_softmax(tape, pi, ctx.tau, ctx.noise)?;
            let vocab = tape.shape(gen.w)[1];
            let mut mask: Option<Var> = None;
            for (j, &indicator) in ctx.indicators.iter().enumerate() {
                let gs_col = tape.select_col(gs, j)?;
                let gs_mat = tape.broadcast_col(gs_col, vocab)?;
                let term = tape.mul(gs_mat, indicator)?;
                mask = Some(match mask {
                    Some(acc) => tape.add(acc, term)?,
                    None => term,
                });
            }
            let modulated = tape.mul(p, mask.unwrap())?;
            Ok(HeadStep { gen: p, type_dist: Some(pi), modulated: Some(modulated) })
        }
    }
}

// ── Single-sequence decoding session ─────────────────────────────────

/// Distributions produced by one decode step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Final generation distribution (renormalized `P*` for the hard head).
    pub dist: Vec<f64>,
    pub type_dist: Option<[f64; TYPE_COUNT]>,
}

/// A greedy/sampled decoding session over one post. Owns its private tape,
/// state and trace inputs; parameters are only read.
pub struct DecodeState {
    tape: Tape,
    bound: BoundParams,
    enc: Encoded,
    states: Vec<Var>,
    indicators: Option<[Var; TYPE_COUNT]>,
    tau: f64,
    step: usize,
}

impl ModelParams {
    /// Encode a post and set up a decoding session. The hard variant needs
    /// the per-post partition; soft/plain ignore it.
    pub fn start_decode(
        &self,
        post_ids: &[u32],
        partition: Option<&TypePartition>,
        tau: f64,
    ) -> Result<DecodeState> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let steps: Vec<Vec<u32>> = post_ids.iter().map(|&id| vec![id]).collect();
        let enc = encode_batch(&mut tape, &bound, self.hp.d_hidden, &steps, None)?;
        let states = enc.finals.clone();
        let indicators = match (&self.head, partition) {
            (HeadParams::Htd { .. }, Some(part)) => {
                Some(partition_indicators(&mut tape, std::slice::from_ref(part)))
            }
            (HeadParams::Htd { .. }, None) => {
                return Err(Error::State("hard typed decoding needs a partition".into()))
            }
            _ => None,
        };
        Ok(DecodeState { tape, bound, enc, states, indicators, tau, step: 0 })
    }
}

impl DecodeState {
    /// Advance one step conditioned on the previously emitted token.
    /// `noise` enables sampled Gumbel masks; `None` decodes with zeros.
    pub fn step(&mut self, y_prev: u32, noise: Option<[f64; TYPE_COUNT]>) -> Result<StepOutput> {
        let tape = &mut self.tape;
        let emb = tape.gather(self.bound.embedding, &[y_prev as usize])?;
        let s_top = *self.states.last().unwrap();
        let (ctx, _alpha) = attend(tape, &self.bound, s_top, &self.enc)?;
        let x = tape.concat(1, &[emb, ctx])?;
        let top = gru_stack(tape, &self.bound.decoder, x, &mut self.states)?;

        let htd_ctx = self.indicators.as_ref().map(|ind| HtdContext {
            indicators: ind,
            tau: self.tau,
            noise: {
                let g = noise.map(|n| n.to_vec()).unwrap_or_else(|| vec![0.0; TYPE_COUNT]);
                tape.constant(vec![1, TYPE_COUNT], g)
            },
        });
        // The noise constant must exist before head_step borrows the tape.
        let htd_ctx = match (self.indicators.as_ref(), htd_ctx) {
            (Some(_), Some(c)) => Some(c),
            _ => None,
        };
        let out = head_step(tape, &self.bound.head, top, htd_ctx.as_ref())?;
        self.step += 1;

        let type_dist = out.type_dist.map(|v| {
            let vals = tape.value(v);
            [vals[0], vals[1], vals[2]]
        });
        let dist = match out.modulated {
            Some(modulated) => {
                let raw = tape.value(modulated);
                let z: f64 = raw.iter().sum();
                if z < MASS_FLOOR {
                    return Err(Error::Numeric(format!(
                        "decode step {}: generation mass {z:.3e} entirely masked away",
                        self.step
                    )));
                }
                raw.iter().map(|v| v / z).collect()
            }
            None => tape.value(out.gen).to_vec(),
        };
        Ok(StepOutput { dist, type_dist })
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }
}

/// Greedy argmax with lowest-index tie-break.
pub fn argmax(dist: &[f64]) -> u32 {
    let mut best = 0usize;
    for (i, &v) in dist.iter().enumerate() {
        if v > dist[best] {
            best = i;
        }
    }
    best as u32
}

/// The explicit argmax cascade the Gumbel mask approximates: keep only the
/// words of the maximum-probability type, renormalized.
pub fn hard_cascade_dist(
    gen: &[f64],
    type_dist: &[f64; TYPE_COUNT],
    partition: &TypePartition,
) -> Result<Vec<f64>> {
    let c_star = argmax(type_dist) as usize;
    let mut masked: Vec<f64> = gen
        .iter()
        .enumerate()
        .map(|(v, &p)| if partition.type_of(v as u32).code() == c_star { p } else { 0.0 })
        .collect();
    let z: f64 = masked.iter().sum();
    if z < MASS_FLOOR {
        return Err(Error::Numeric("argmax cascade: no mass on selected type".into()));
    }
    for v in masked.iter_mut() {
        *v /= z;
    }
    Ok(masked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    #[test]
    fn partition_arithmetic_and_priority() {
        let part = make_partition(10, &[0, 1], &[1, 2, 3]);
        assert_eq!(part.counts(), [2, 2, 6]);
        // Overlap on id 1 resolves to interrogative.
        assert_eq!(part.type_of(1), WordType::Interrogative);

        let empty_topics = make_partition(10, &[0, 1], &[]);
        assert_eq!(empty_topics.counts(), [2, 0, 8]);
    }

    #[test]
    fn gumbel_softmax_identity_at_tau_one() {
        let pi = [0.5, 0.3, 0.2];
        let out = gumbel_softmax_vec(&pi, 1.0, &[0.0; 3]).unwrap();
        for (a, b) in out.iter().zip(&pi) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }

        let mut tape = Tape::new();
        let pi_var = tape.constant(vec![1, 3], pi.to_vec());
        let noise = tape.constant(vec![1, 3], vec![0.0; 3]);
        let gs = gumbel_softmax(&mut tape, pi_var, 1.0, noise).unwrap();
        for (a, b) in tape.value(gs).iter().zip(&pi) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gumbel_softmax_flattens_at_high_tau() {
        let pi = [0.7, 0.2, 0.1];
        let g = [0.31, -0.42, 1.1];
        let out = gumbel_softmax_vec(&pi, 100.0, &g).unwrap();
        let max = out.iter().cloned().fold(f64::MIN, f64::max);
        let min = out.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max - min < 0.02, "spread {}", max - min);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gumbel_softmax_rejects_bad_tau() {
        assert!(gumbel_softmax_vec(&[0.5, 0.5], 0.0, &[0.0, 0.0]).is_err());
        assert!(gumbel_softmax_vec(&[0.5, 0.5], -1.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn attention_singleton_and_uniform() {
        use crate::model::{HParams, ModelParams, Variant};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let hp = HParams { variant: Variant::Plain, vocab: 8, d_emb: 4, d_hidden: 5, layers: 1 };
        let p = ModelParams::init(hp, &mut rng).unwrap();

        // Single encoder state: weight 1, context equals the state.
        let mut tape = Tape::new();
        let bound = p.bind(&mut tape);
        let enc = encode_batch(&mut tape, &bound, 5, &[vec![2, 4]], None).unwrap();
        let single = Encoded {
            top_states: vec![enc.top_states[0]],
            keys: vec![enc.keys[0]],
            finals: enc.finals.clone(),
            score_mask: None,
        };
        let s = tape.param(&Tensor::uniform(vec![2, 5], 0.5, &mut rng));
        let (ctx, alpha) = attend(&mut tape, &bound, s, &single).unwrap();
        assert_eq!(tape.value(alpha), &[1.0, 1.0]);
        assert_eq!(tape.value(ctx), tape.value(enc.top_states[0]));

        // Identical states at every position: uniform weights.
        let dup = Encoded {
            top_states: vec![enc.top_states[0]; 3],
            keys: vec![enc.keys[0]; 3],
            finals: enc.finals.clone(),
            score_mask: None,
        };
        let (_, alpha) = attend(&mut tape, &bound, s, &dup).unwrap();
        for &w in tape.value(alpha) {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
        // Weights always sum to one per row.
        let sums: Vec<f64> = tape.value(alpha).chunks(3).map(|r| r.iter().sum()).collect();
        for s in sums {
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn encoder_shape_contract_and_range_errors() {
        use crate::model::{HParams, ModelParams, Variant};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let hp = HParams { variant: Variant::Plain, vocab: 8, d_emb: 4, d_hidden: 5, layers: 2 };
        let p = ModelParams::init(hp, &mut rng).unwrap();
        let mut tape = Tape::new();
        let bound = p.bind(&mut tape);
        let steps: Vec<Vec<u32>> = vec![vec![1], vec![2], vec![3], vec![4], vec![5]];
        let enc = encode_batch(&mut tape, &bound, 5, &steps, None).unwrap();
        assert_eq!(enc.top_states.len(), 5);
        assert_eq!(enc.finals.len(), 2);

        let mut tape = Tape::new();
        let bound = p.bind(&mut tape);
        let bad = encode_batch(&mut tape, &bound, 5, &[vec![99]], None);
        assert!(bad.is_err(), "out-of-range id must fail");
    }

    #[test]
    fn zero_weight_encoder_keeps_states_zero() {
        use crate::model::{HParams, ModelParams, Variant};
        let hp = HParams { variant: Variant::Plain, vocab: 8, d_emb: 4, d_hidden: 5, layers: 2 };
        let p = ModelParams::zeroed(hp).unwrap();
        let mut tape = Tape::new();
        let bound = p.bind(&mut tape);
        let enc = encode_batch(&mut tape, &bound, 5, &[vec![1], vec![2]], None).unwrap();
        for s in &enc.top_states {
            assert_eq!(tape.value(*s), &[0.0; 5]);
        }
    }
}
