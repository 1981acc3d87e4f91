//! GRU recurrence on the tape.

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::model::BoundGru;

/// `1 - x` elementwise, via a ones constant.
pub(crate) fn one_minus(tape: &mut Tape, x: Var) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    let ones = tape.ones(shape);
    let neg = tape.scalar_mul(-1.0, x)?;
    tape.add(ones, neg)
}

/// One GRU step: reset gate `r`, update gate `z`, tanh candidate, then
/// `h' = (1 - z) .* h + z .* candidate`.
pub fn gru_step(tape: &mut Tape, layer: &BoundGru, x: Var, h: Var) -> Result<Var> {
    let r = {
        let xa = tape.affine(x, layer.w_r, layer.b_r)?;
        let hu = tape.matmul(h, layer.u_r)?;
        let pre = tape.add(xa, hu)?;
        tape.sigmoid(pre)?
    };
    let z = {
        let xa = tape.affine(x, layer.w_z, layer.b_z)?;
        let hu = tape.matmul(h, layer.u_z)?;
        let pre = tape.add(xa, hu)?;
        tape.sigmoid(pre)?
    };
    let candidate = {
        let xa = tape.affine(x, layer.w_h, layer.b_h)?;
        let rh = tape.mul(r, h)?;
        let rhu = tape.matmul(rh, layer.u_h)?;
        let pre = tape.add(xa, rhu)?;
        tape.tanh(pre)?
    };
    let keep = one_minus(tape, z)?;
    let kept = tape.mul(keep, h)?;
    let fresh = tape.mul(z, candidate)?;
    tape.add(kept, fresh)
}

/// Run the layer stack one step; `states[l]` is replaced by the new state of
/// layer `l`. Returns the top-layer state.
pub fn gru_stack(
    tape: &mut Tape,
    layers: &[BoundGru],
    input: Var,
    states: &mut [Var],
) -> Result<Var> {
    debug_assert_eq!(layers.len(), states.len());
    let mut x = input;
    for (layer, state) in layers.iter().zip(states.iter_mut()) {
        let next = gru_step(tape, layer, x, *state)?;
        *state = next;
        x = next;
    }
    Ok(x)
}

/// Padding-aware state carry: `mask .* fresh + (1 - mask) .* previous`,
/// where `mask` is a 0/1 constant matching the state shape.
pub fn masked_carry(tape: &mut Tape, mask: Var, fresh: Var, previous: Var) -> Result<Var> {
    let keep_new = tape.mul(mask, fresh)?;
    let inv = one_minus(tape, mask)?;
    let keep_old = tape.mul(inv, previous)?;
    tape.add(keep_new, keep_old)
}
