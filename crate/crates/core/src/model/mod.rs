//! The GRU encoder-decoder with attention and the typed decoders.
//!
//! Three head variants share the encoder/attention trunk:
//! - `Plain`: a single softmax over the vocabulary (typing disabled).
//! - `Std`: a soft typed decoder; the generation distribution is a mixture
//!   of three type-specific softmaxes weighted by the type distribution.
//! - `Htd`: a hard typed decoder; a Gumbel-Softmax-reshaped type
//!   distribution modulates one generation softmax over a per-post dynamic
//!   vocabulary partition, then renormalizes.

mod batch;
mod decode;
mod loss;
mod rnn;

pub use batch::Batch;
pub use decode::{
    argmax, attend, encode_batch, gumbel_softmax, gumbel_softmax_vec, hard_cascade_dist,
    head_step, interrogative_ids, make_partition, partition_indicators, DecodeState, Encoded,
    HeadStep, HtdContext, StepOutput, TypePartition,
};
pub use loss::{batch_loss, LossBreakdown};
pub use rnn::gru_step;

use rand::Rng;

use crate::autodiff::{Tape, Tensor, Var};
use crate::corpus::WordType;
use crate::error::{Error, Result};

/// Number of word types (interrogative / topic / ordinary).
pub const TYPE_COUNT: usize = WordType::COUNT;

/// Which decoder head a model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Variant {
    /// Typing-disabled ablation: one softmax, no type loss.
    Plain,
    /// Soft typed decoder.
    Std,
    /// Hard typed decoder.
    Htd,
}

impl Variant {
    pub fn tag(self) -> u8 {
        match self {
            Variant::Plain => 0,
            Variant::Std => 1,
            Variant::Htd => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Variant> {
        match tag {
            0 => Some(Variant::Plain),
            1 => Some(Variant::Std),
            2 => Some(Variant::Htd),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Std => "std",
            Variant::Htd => "htd",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Variant> {
        match s {
            "plain" => Ok(Variant::Plain),
            "std" => Ok(Variant::Std),
            "htd" => Ok(Variant::Htd),
            other => Err(Error::InvalidInput(format!("unknown variant '{other}'"))),
        }
    }
}

/// Model hyperparameters. The defaults are desk-scale; paper-scale values
/// stay reachable through configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct HParams {
    pub variant: Variant,
    /// Vocabulary size including the four reserved ids.
    pub vocab: usize,
    pub d_emb: usize,
    pub d_hidden: usize,
    pub layers: usize,
}

impl HParams {
    pub fn desk(variant: Variant, vocab: usize) -> HParams {
        HParams { variant, vocab, d_emb: 64, d_hidden: 128, layers: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab < 5 || self.d_emb == 0 || self.d_hidden == 0 || self.layers == 0 {
            return Err(Error::InvalidInput(format!("degenerate hyperparameters {self:?}")));
        }
        Ok(())
    }
}

/// One GRU layer. `w_*` act on the input, `u_*` on the previous state,
/// shapes `(in, h)`, `(h, h)` and `(1, h)` in row-vector convention.
#[derive(Debug, Clone)]
pub struct GruLayer {
    pub w_r: Tensor,
    pub u_r: Tensor,
    pub b_r: Tensor,
    pub w_z: Tensor,
    pub u_z: Tensor,
    pub b_z: Tensor,
    pub w_h: Tensor,
    pub u_h: Tensor,
    pub b_h: Tensor,
}

impl GruLayer {
    fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> GruLayer {
        fn w<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Tensor {
            Tensor::uniform(vec![input, hidden], 1.0 / (input as f64).sqrt(), rng).param()
        }
        fn u<R: Rng>(hidden: usize, rng: &mut R) -> Tensor {
            Tensor::uniform(vec![hidden, hidden], 1.0 / (hidden as f64).sqrt(), rng).param()
        }
        let b = || Tensor::zeros(vec![1, hidden]).param();
        GruLayer {
            w_r: w(input, hidden, rng),
            u_r: u(hidden, rng),
            b_r: b(),
            w_z: w(input, hidden, rng),
            u_z: u(hidden, rng),
            b_z: b(),
            w_h: w(input, hidden, rng),
            u_h: u(hidden, rng),
            b_h: b(),
        }
    }

    fn zeroed(input: usize, hidden: usize) -> GruLayer {
        let w = || Tensor::zeros(vec![input, hidden]).param();
        let u = || Tensor::zeros(vec![hidden, hidden]).param();
        let b = || Tensor::zeros(vec![1, hidden]).param();
        GruLayer { w_r: w(), u_r: u(), b_r: b(), w_z: w(), u_z: u(), b_z: b(), w_h: w(), u_h: u(), b_h: b() }
    }
}

/// Additive attention scorer: `v^T tanh(W s_prev + U h_i)`.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub w_query: Tensor,
    pub u_keys: Tensor,
    pub score: Tensor,
}

/// A linear projection to vocabulary or type logits.
#[derive(Debug, Clone)]
pub struct Projection {
    pub w: Tensor,
    pub b: Tensor,
}

impl Projection {
    fn init(input: usize, output: usize, rng: &mut impl Rng) -> Projection {
        Projection {
            w: Tensor::uniform(vec![input, output], 1.0 / (input as f64).sqrt(), rng).param(),
            b: Tensor::zeros(vec![1, output]).param(),
        }
    }

    fn zeroed(input: usize, output: usize) -> Projection {
        Projection {
            w: Tensor::zeros(vec![input, output]).param(),
            b: Tensor::zeros(vec![1, output]).param(),
        }
    }
}

/// The decoder output head; exactly one variant is active per model.
#[derive(Debug, Clone)]
pub enum HeadParams {
    Plain { gen: Projection },
    Std { type_proj: Projection, gen: [Projection; 3] },
    Htd { gen: Projection, type_proj: Projection },
}

/// All trainable weights.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub hp: HParams,
    pub embedding: Tensor,
    pub encoder: Vec<GruLayer>,
    pub decoder: Vec<GruLayer>,
    pub attention: AttentionParams,
    pub head: HeadParams,
}

impl ModelParams {
    pub fn init(hp: HParams, rng: &mut impl Rng) -> Result<ModelParams> {
        hp.validate()?;
        let (v, e, h) = (hp.vocab, hp.d_emb, hp.d_hidden);
        let embedding = Tensor::uniform(vec![v, e], 1.0 / (e as f64).sqrt(), rng).param();
        let encoder = (0..hp.layers)
            .map(|l| GruLayer::init(if l == 0 { e } else { h }, h, rng))
            .collect();
        // The decoder GRU has its own parameters; its first layer consumes
        // the concatenation of the previous word embedding and the context.
        let decoder = (0..hp.layers)
            .map(|l| GruLayer::init(if l == 0 { e + h } else { h }, h, rng))
            .collect();
        let attention = AttentionParams {
            w_query: Tensor::uniform(vec![h, h], 1.0 / (h as f64).sqrt(), rng).param(),
            u_keys: Tensor::uniform(vec![h, h], 1.0 / (h as f64).sqrt(), rng).param(),
            score: Tensor::uniform(vec![h, 1], 1.0 / (h as f64).sqrt(), rng).param(),
        };
        let head = match hp.variant {
            Variant::Plain => HeadParams::Plain { gen: Projection::init(h, v, rng) },
            Variant::Std => HeadParams::Std {
                type_proj: Projection::init(h, TYPE_COUNT, rng),
                gen: [
                    Projection::init(h, v, rng),
                    Projection::init(h, v, rng),
                    Projection::init(h, v, rng),
                ],
            },
            Variant::Htd => HeadParams::Htd {
                gen: Projection::init(h, v, rng),
                type_proj: Projection::init(h, TYPE_COUNT, rng),
            },
        };
        Ok(ModelParams { hp, embedding, encoder, decoder, attention, head })
    }

    /// All-zero weights, mostly for shape and fixed-point tests.
    pub fn zeroed(hp: HParams) -> Result<ModelParams> {
        hp.validate()?;
        let (v, e, h) = (hp.vocab, hp.d_emb, hp.d_hidden);
        let encoder =
            (0..hp.layers).map(|l| GruLayer::zeroed(if l == 0 { e } else { h }, h)).collect();
        let decoder =
            (0..hp.layers).map(|l| GruLayer::zeroed(if l == 0 { e + h } else { h }, h)).collect();
        let head = match hp.variant {
            Variant::Plain => HeadParams::Plain { gen: Projection::zeroed(h, v) },
            Variant::Std => HeadParams::Std {
                type_proj: Projection::zeroed(h, TYPE_COUNT),
                gen: [Projection::zeroed(h, v), Projection::zeroed(h, v), Projection::zeroed(h, v)],
            },
            Variant::Htd => HeadParams::Htd {
                gen: Projection::zeroed(h, v),
                type_proj: Projection::zeroed(h, TYPE_COUNT),
            },
        };
        Ok(ModelParams {
            hp,
            embedding: Tensor::zeros(vec![v, e]).param(),
            encoder,
            decoder,
            attention: AttentionParams {
                w_query: Tensor::zeros(vec![h, h]).param(),
                u_keys: Tensor::zeros(vec![h, h]).param(),
                score: Tensor::zeros(vec![h, 1]).param(),
            },
            head,
        })
    }

    /// Canonical (name, tensor) walk; checkpointing, binding and the
    /// optimizer all rely on this single ordering.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        fn gru<'a>(prefix: &str, layers: &'a [GruLayer], out: &mut Vec<(String, &'a Tensor)>) {
            for (i, l) in layers.iter().enumerate() {
                out.push((format!("{prefix}{i}.w_r"), &l.w_r));
                out.push((format!("{prefix}{i}.u_r"), &l.u_r));
                out.push((format!("{prefix}{i}.b_r"), &l.b_r));
                out.push((format!("{prefix}{i}.w_z"), &l.w_z));
                out.push((format!("{prefix}{i}.u_z"), &l.u_z));
                out.push((format!("{prefix}{i}.b_z"), &l.b_z));
                out.push((format!("{prefix}{i}.w_h"), &l.w_h));
                out.push((format!("{prefix}{i}.u_h"), &l.u_h));
                out.push((format!("{prefix}{i}.b_h"), &l.b_h));
            }
        }
        let mut out: Vec<(String, &Tensor)> = vec![("embedding".into(), &self.embedding)];
        gru("enc", &self.encoder, &mut out);
        gru("dec", &self.decoder, &mut out);
        out.push(("attn.w_query".into(), &self.attention.w_query));
        out.push(("attn.u_keys".into(), &self.attention.u_keys));
        out.push(("attn.score".into(), &self.attention.score));
        match &self.head {
            HeadParams::Plain { gen } => {
                out.push(("head.gen.w".into(), &gen.w));
                out.push(("head.gen.b".into(), &gen.b));
            }
            HeadParams::Std { type_proj, gen } => {
                out.push(("head.type.w".into(), &type_proj.w));
                out.push(("head.type.b".into(), &type_proj.b));
                for (i, p) in gen.iter().enumerate() {
                    out.push((format!("head.gen{i}.w"), &p.w));
                    out.push((format!("head.gen{i}.b"), &p.b));
                }
            }
            HeadParams::Htd { gen, type_proj } => {
                out.push(("head.gen.w".into(), &gen.w));
                out.push(("head.gen.b".into(), &gen.b));
                out.push(("head.type.w".into(), &type_proj.w));
                out.push(("head.type.b".into(), &type_proj.b));
            }
        }
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        fn gru<'a>(
            prefix: &str,
            layers: &'a mut [GruLayer],
            out: &mut Vec<(String, &'a mut Tensor)>,
        ) {
            for (i, l) in layers.iter_mut().enumerate() {
                out.push((format!("{prefix}{i}.w_r"), &mut l.w_r));
                out.push((format!("{prefix}{i}.u_r"), &mut l.u_r));
                out.push((format!("{prefix}{i}.b_r"), &mut l.b_r));
                out.push((format!("{prefix}{i}.w_z"), &mut l.w_z));
                out.push((format!("{prefix}{i}.u_z"), &mut l.u_z));
                out.push((format!("{prefix}{i}.b_z"), &mut l.b_z));
                out.push((format!("{prefix}{i}.w_h"), &mut l.w_h));
                out.push((format!("{prefix}{i}.u_h"), &mut l.u_h));
                out.push((format!("{prefix}{i}.b_h"), &mut l.b_h));
            }
        }
        let mut out: Vec<(String, &mut Tensor)> =
            vec![("embedding".into(), &mut self.embedding)];
        gru("enc", &mut self.encoder, &mut out);
        gru("dec", &mut self.decoder, &mut out);
        out.push(("attn.w_query".into(), &mut self.attention.w_query));
        out.push(("attn.u_keys".into(), &mut self.attention.u_keys));
        out.push(("attn.score".into(), &mut self.attention.score));
        match &mut self.head {
            HeadParams::Plain { gen } => {
                out.push(("head.gen.w".into(), &mut gen.w));
                out.push(("head.gen.b".into(), &mut gen.b));
            }
            HeadParams::Std { type_proj, gen } => {
                out.push(("head.type.w".into(), &mut type_proj.w));
                out.push(("head.type.b".into(), &mut type_proj.b));
                for (i, p) in gen.iter_mut().enumerate() {
                    out.push((format!("head.gen{i}.w"), &mut p.w));
                    out.push((format!("head.gen{i}.b"), &mut p.b));
                }
            }
            HeadParams::Htd { gen, type_proj } => {
                out.push(("head.gen.w".into(), &mut gen.w));
                out.push(("head.gen.b".into(), &mut gen.b));
                out.push(("head.type.w".into(), &mut type_proj.w));
                out.push(("head.type.b".into(), &mut type_proj.b));
            }
        }
        out
    }

    /// Bind every tensor onto a tape, in `named_tensors` order.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let ordered: Vec<Var> = self.named_tensors().iter().map(|(_, t)| tape.param(t)).collect();
        BoundParams::from_ordered(self, ordered)
    }

    /// Pull gradients off a tape back into the tensors (additively).
    pub fn absorb_grads(&mut self, tape: &Tape, bound: &BoundParams) {
        for ((_, tensor), &var) in self.named_tensors_mut().into_iter().zip(&bound.ordered) {
            if let Some(g) = tape.grad(var) {
                tensor.accumulate_grad(g);
            }
        }
    }
}

/// Tape-bound GRU layer vars.
#[derive(Debug, Clone, Copy)]
pub struct BoundGru {
    pub w_r: Var,
    pub u_r: Var,
    pub b_r: Var,
    pub w_z: Var,
    pub u_z: Var,
    pub b_z: Var,
    pub w_h: Var,
    pub u_h: Var,
    pub b_h: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundProjection {
    pub w: Var,
    pub b: Var,
}

#[derive(Debug, Clone)]
pub enum BoundHead {
    Plain { gen: BoundProjection },
    Std { type_proj: BoundProjection, gen: [BoundProjection; 3] },
    Htd { gen: BoundProjection, type_proj: BoundProjection },
}

/// The whole parameter set as tape vars, mirroring [`ModelParams`].
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub embedding: Var,
    pub encoder: Vec<BoundGru>,
    pub decoder: Vec<BoundGru>,
    pub attn_w_query: Var,
    pub attn_u_keys: Var,
    pub attn_score: Var,
    pub head: BoundHead,
    ordered: Vec<Var>,
}

impl BoundParams {
    /// Rebuild a bound view from vars laid out in `named_tensors` order;
    /// this is how `gradient_check` closures reconstitute the model.
    pub fn from_vars(params: &ModelParams, ordered: Vec<Var>) -> BoundParams {
        Self::from_ordered(params, ordered)
    }

    fn from_ordered(params: &ModelParams, ordered: Vec<Var>) -> BoundParams {
        let mut it = ordered.iter().copied();
        let embedding = it.next().unwrap();
        let take_gru = |it: &mut dyn Iterator<Item = Var>| BoundGru {
            w_r: it.next().unwrap(),
            u_r: it.next().unwrap(),
            b_r: it.next().unwrap(),
            w_z: it.next().unwrap(),
            u_z: it.next().unwrap(),
            b_z: it.next().unwrap(),
            w_h: it.next().unwrap(),
            u_h: it.next().unwrap(),
            b_h: it.next().unwrap(),
        };
        let encoder = (0..params.encoder.len()).map(|_| take_gru(&mut it)).collect();
        let decoder = (0..params.decoder.len()).map(|_| take_gru(&mut it)).collect();
        let attn_w_query = it.next().unwrap();
        let attn_u_keys = it.next().unwrap();
        let attn_score = it.next().unwrap();
        let head = match &params.head {
            HeadParams::Plain { .. } => BoundHead::Plain {
                gen: BoundProjection { w: it.next().unwrap(), b: it.next().unwrap() },
            },
            HeadParams::Std { .. } => BoundHead::Std {
                type_proj: BoundProjection { w: it.next().unwrap(), b: it.next().unwrap() },
                gen: [
                    BoundProjection { w: it.next().unwrap(), b: it.next().unwrap() },
                    BoundProjection { w: it.next().unwrap(), b: it.next().unwrap() },
                    BoundProjection { w: it.next().unwrap(), b: it.next().unwrap() },
                ],
            },
            HeadParams::Htd { .. } => BoundHead::Htd {
                gen: BoundProjection { w: it.next().unwrap(), b: it.next().unwrap() },
                type_proj: BoundProjection { w: it.next().unwrap(), b: it.next().unwrap() },
            },
        };
        assert!(it.next().is_none(), "bind order drifted from named_tensors");
        BoundParams {
            embedding,
            encoder,
            decoder,
            attn_w_query,
            attn_u_keys,
            attn_score,
            head,
            ordered,
        }
    }
}
