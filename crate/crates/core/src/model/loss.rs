//! Teacher-forced loss: token negative log-likelihood plus type supervision,
//! `phi = phi1 + lambda * phi2`, summed over real (unpadded) positions.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::model::decode::{
    attend, encode_batch, head_step, partition_indicators, HtdContext,
};
use crate::model::rnn::gru_stack;
use crate::model::{Batch, BoundParams, HParams, TYPE_COUNT};

/// Evaluated loss plus the tape var to run backward on.
pub struct LossBreakdown {
    pub phi: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub n_tokens: usize,
    pub phi_var: Var,
}

fn onehot(tape: &mut Tape, ids: &[u32], width: usize) -> Var {
    let mut data = vec![0.0; ids.len() * width];
    for (r, &id) in ids.iter().enumerate() {
        data[r * width + id as usize] = 1.0;
    }
    tape.constant(vec![ids.len(), width], data)
}

fn onehot_usize(tape: &mut Tape, ids: &[usize], width: usize) -> Var {
    let mut data = vec![0.0; ids.len() * width];
    for (r, &id) in ids.iter().enumerate() {
        data[r * width + id] = 1.0;
    }
    tape.constant(vec![ids.len(), width], data)
}

/// Masked sum of the log of the picked entries: `sum_b mask_b * log(pick_b)`
/// where `pick` selects one column per row via the one-hot.
fn masked_log_pick(tape: &mut Tape, dist: Var, pick: Var, mask: Var) -> Result<Var> {
    let picked = tape.mul(dist, pick)?;
    let per_row = tape.row_sum(picked)?;
    let logged = tape.log(per_row)?;
    let masked = tape.mul(logged, mask)?;
    tape.sum(masked)
}

/// Teacher-forced loss over one padded batch.
///
/// For the hard variant `gumbel_noise` supplies the per-step mask noise laid
/// out `[step][row][type]`; `None` decodes the mask noiselessly. Training
/// passes freshly drawn noise, evaluation and gradient checking pass either
/// zeros or a frozen draw.
pub fn batch_loss(
    tape: &mut Tape,
    bound: &BoundParams,
    hp: &HParams,
    batch: &Batch,
    lambda: f64,
    tau: f64,
    gumbel_noise: Option<&[f64]>,
) -> Result<LossBreakdown> {
    if lambda < 0.0 {
        return Err(Error::InvalidInput(format!("lambda {lambda} must be >= 0")));
    }
    let b = batch.size;
    let enc =
        encode_batch(tape, bound, hp.d_hidden, &batch.post_steps, Some(&batch.post_mask))?;
    let indicators = batch.partitions.as_deref().map(|parts| partition_indicators(tape, parts));
    if let Some(noise) = gumbel_noise {
        let expected = batch.resp_len() * b * TYPE_COUNT;
        if noise.len() != expected {
            return Err(Error::InvalidInput(format!(
                "gumbel noise length {} != {expected}",
                noise.len()
            )));
        }
    }

    let mut states = enc.finals.clone();
    let mut phi1: Option<Var> = None;
    let mut phi2: Option<Var> = None;

    for t in 0..batch.resp_len() {
        let idx: Vec<usize> = batch.dec_inputs[t].iter().map(|&i| i as usize).collect();
        let emb = tape.gather(bound.embedding, &idx)?;
        let s_top = *states.last().unwrap();
        let (ctx, _alpha) = attend(tape, bound, s_top, &enc)?;
        let x = tape.concat(1, &[emb, ctx])?;
        let top = gru_stack(tape, &bound.decoder, x, &mut states)?;

        let htd_ctx = indicators.as_ref().map(|ind| {
            let g = match gumbel_noise {
                Some(noise) => {
                    noise[t * b * TYPE_COUNT..(t + 1) * b * TYPE_COUNT].to_vec()
                }
                None => vec![0.0; b * TYPE_COUNT],
            };
            HtdContext { indicators: ind, tau, noise: tape.constant(vec![b, TYPE_COUNT], g) }
        });
        let out = head_step(tape, &bound.head, top, htd_ctx.as_ref())?;

        let mask = tape.constant(vec![b, 1], batch.out_mask[t].clone());
        let target_pick = onehot(tape, &batch.targets[t], hp.vocab);

        // phi1 term. Hard head: -log P* = log Z - log P'(ref).
        let step_phi1 = match out.modulated {
            Some(modulated) => {
                let z = tape.row_sum(modulated)?;
                for (row, &zv) in tape.value(z).iter().enumerate() {
                    if batch.out_mask[t][row] > 0.0 && zv < 1e-12 {
                        return Err(Error::Numeric(format!(
                            "loss step {t}: generation mass {zv:.3e} entirely masked away"
                        )));
                    }
                }
                let logged_z = tape.log(z)?;
                let masked_z = tape.mul(logged_z, mask)?;
                let z_term = tape.sum(masked_z)?;
                let pick_term = masked_log_pick(tape, modulated, target_pick, mask)?;
                let neg_pick = tape.scalar_mul(-1.0, pick_term)?;
                tape.add(z_term, neg_pick)?
            }
            None => {
                let pick_term = masked_log_pick(tape, out.gen, target_pick, mask)?;
                tape.scalar_mul(-1.0, pick_term)?
            }
        };
        phi1 = Some(match phi1 {
            Some(acc) => tape.add(acc, step_phi1)?,
            None => step_phi1,
        });

        // phi2 term: type supervision, absent on the plain head.
        if let Some(pi) = out.type_dist {
            let type_pick = onehot_usize(tape, &batch.target_types[t], TYPE_COUNT);
            let pick_term = masked_log_pick(tape, pi, type_pick, mask)?;
            let step_phi2 = tape.scalar_mul(-1.0, pick_term)?;
            phi2 = Some(match phi2 {
                Some(acc) => tape.add(acc, step_phi2)?,
                None => step_phi2,
            });
        }
    }

    let phi1 = phi1.expect("at least one decode step");
    let phi2 = match phi2 {
        Some(v) => v,
        None => tape.constant_scalar(0.0),
    };
    let weighted = tape.scalar_mul(lambda, phi2)?;
    let phi = tape.add(phi1, weighted)?;

    let value = tape.value_scalar(phi);
    if !value.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {value}")));
    }
    Ok(LossBreakdown {
        phi: value,
        phi1: tape.value_scalar(phi1),
        phi2: tape.value_scalar(phi2),
        n_tokens: batch.n_tokens,
        phi_var: phi,
    })
}
