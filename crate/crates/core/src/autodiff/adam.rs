use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Adam with global-norm gradient clipping. Moment buffers are allocated on
/// the first step and stay shape-congruent with their parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub clip_norm: f64,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(learning_rate: f64, clip_norm: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("learning rate {learning_rate} must be > 0")));
        }
        Ok(AdamState {
            learning_rate,
            clip_norm,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over every parameter: clip by global norm, apply Adam,
    /// zero the gradients. Every parameter must have a populated gradient.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            self.second_moment = self.first_moment.clone();
        } else if self.first_moment.len() != params.len() {
            return Err(Error::State(format!(
                "optimizer tracks {} parameters, got {}",
                self.first_moment.len(),
                params.len()
            )));
        }

        let mut sq_norm = 0.0;
        for (i, p) in params.iter().enumerate() {
            let g = p.grad.as_ref().ok_or_else(|| {
                Error::State(format!("parameter {i} has no gradient before optimizer step"))
            })?;
            if g.len() != self.first_moment[i].len() {
                return Err(Error::State(format!(
                    "parameter {i} changed size ({} vs {})",
                    g.len(),
                    self.first_moment[i].len()
                )));
            }
            sq_norm += g.iter().map(|v| v * v).sum::<f64>();
        }
        let norm = sq_norm.sqrt();
        let scale = if norm > self.clip_norm { self.clip_norm / norm } else { 1.0 };

        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - BETA1.powi(t);
        let bias2 = 1.0 - BETA2.powi(t);

        for (i, p) in params.iter_mut().enumerate() {
            let g = p.grad.take().expect("checked above");
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            for ((w, (mi, vi)), gi) in
                p.data_mut().iter_mut().zip(m.iter_mut().zip(v.iter_mut())).zip(&g)
            {
                let gc = gi * scale;
                *mi = BETA1 * *mi + (1.0 - BETA1) * gc;
                *vi = BETA2 * *vi + (1.0 - BETA2) * gc * gc;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                *w -= self.learning_rate * m_hat / (v_hat.sqrt() + EPS);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> Tensor {
        Tensor::new(vec![1], vec![v]).unwrap().param()
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut w = scalar_param(1.5);
        w.grad = Some(vec![0.0]);
        let mut opt = AdamState::new(0.1, 5.0).unwrap();
        opt.step(&mut [&mut w]).unwrap();
        assert_eq!(w.data()[0], 1.5);
    }

    #[test]
    fn positive_gradient_decreases_parameter() {
        let mut w = scalar_param(1.0);
        w.grad = Some(vec![1.0]);
        let mut opt = AdamState::new(0.1, 5.0).unwrap();
        opt.step(&mut [&mut w]).unwrap();
        assert!(w.data()[0] < 1.0);
        assert!(w.grad.is_none(), "gradients must be cleared after the step");
    }

    #[test]
    fn missing_gradient_is_state_error() {
        let mut w = scalar_param(1.0);
        let mut opt = AdamState::new(0.1, 5.0).unwrap();
        match opt.step(&mut [&mut w]) {
            Err(Error::State(_)) => {}
            other => panic!("expected state error, got {other:?}"),
        }
    }

    #[test]
    fn converges_on_quadratic() {
        // Closed-loop oracle: minimize (w - 3)^2 from w = 0.
        let mut w = scalar_param(0.0);
        let mut opt = AdamState::new(0.1, 5.0).unwrap();
        for _ in 0..100 {
            let wv = w.data()[0];
            w.grad = Some(vec![2.0 * (wv - 3.0)]);
            opt.step(&mut [&mut w]).unwrap();
        }
        let wv = w.data()[0];
        assert!((wv - 3.0).abs() < 0.1, "ended at {wv}");
        assert_eq!(opt.step_count(), 100);
    }

    #[test]
    fn rejects_nonpositive_learning_rate() {
        assert!(AdamState::new(0.0, 5.0).is_err());
        assert!(AdamState::new(-1.0, 5.0).is_err());
    }
}
