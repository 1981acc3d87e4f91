use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

/// Central finite-difference check of a scalar objective.
///
/// `f` rebuilds the computation on a fresh tape from the bound parameter
/// vars, in the same order as `params`. Returns the maximum over all
/// parameter entries of `|analytic - numeric| / max(1, |analytic| + |numeric|)`.
///
/// `f` must be deterministic: any sampling inside it has to come from fixed
/// inputs, not a live RNG.
pub fn gradient_check<F>(f: F, params: &mut [Tensor], epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::InvalidInput(format!("epsilon {epsilon} outside (0, 1e-2]")));
    }
    for p in params.iter_mut() {
        p.requires_grad = true;
    }

    let eval = |params: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p)).collect();
        let loss = f(&mut tape, &vars)?;
        if tape.value(loss).len() != 1 {
            return Err(Error::InvalidInput(format!(
                "gradient_check objective must be scalar, got shape {:?}",
                tape.shape(loss)
            )));
        }
        Ok(tape.value_scalar(loss))
    };

    // Analytic pass.
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p)).collect();
    let loss = f(&mut tape, &vars)?;
    if tape.value(loss).len() != 1 {
        return Err(Error::InvalidInput(format!(
            "gradient_check objective must be scalar, got shape {:?}",
            tape.shape(loss)
        )));
    }
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(params.iter())
        .map(|(&v, p)| tape.grad(v).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();
    drop(tape);

    // Numeric pass, one entry at a time.
    let mut worst = 0.0f64;
    for pi in 0..params.len() {
        for ei in 0..params[pi].numel() {
            let orig = params[pi].data()[ei];
            params[pi].data_mut()[ei] = orig + epsilon;
            let plus = eval(params)?;
            params[pi].data_mut()[ei] = orig - epsilon;
            let minus = eval(params)?;
            params[pi].data_mut()[ei] = orig;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[pi][ei];
            let rel = (a - numeric).abs() / 1.0f64.max(a.abs() + numeric.abs());
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_is_essentially_exact() {
        // y = W x, objective sum(y): FD on a linear map has no truncation error.
        let w = Tensor::new(vec![3, 2], vec![0.3, -1.2, 0.7, 2.0, -0.5, 0.1]).unwrap();
        let mut params = vec![w];
        let err = gradient_check(
            |tape, vars| {
                let x = tape.constant(vec![2, 1], vec![0.4, -1.5]);
                let wx = tape.matmul(vars[0], x)?;
                tape.sum(wx)
            },
            &mut params,
            1e-4,
        )
        .unwrap();
        assert!(err < 1e-8, "linear gradient check error {err}");
    }

    #[test]
    fn rejects_bad_epsilon_and_non_scalar() {
        let mut params = vec![Tensor::new(vec![2], vec![1.0, 2.0]).unwrap()];
        assert!(gradient_check(|t, v| t.sum(v[0]), &mut params, 0.0).is_err());
        assert!(gradient_check(|t, v| t.sum(v[0]), &mut params, 0.5).is_err());
        let res = gradient_check(|_t, v| Ok(v[0]), &mut params, 1e-4);
        match res {
            Err(Error::InvalidInput(_)) => {}
            other => panic!("expected invalid-input, got {other:?}"),
        }
    }
}
