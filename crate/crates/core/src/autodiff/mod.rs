//! Minimal dense-tensor arithmetic with reverse-mode automatic
//! differentiation, a finite-difference oracle, and an Adam optimizer.
//!
//! The primitive set is exactly what the sequence model needs: matmul, add,
//! elementwise-mul, concat, tanh, sigmoid, softmax, log, row-gather, sum and
//! scalar-mul. Everything runs in f64, row-major, on a per-step tape.

mod adam;
mod check;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use check::gradient_check;
pub use tape::{softmax, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod fd_tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-3;
    const EPS: f64 = 1e-4;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        Tensor::new(shape, data).unwrap()
    }

    /// Runs `build` under the FD oracle for `seeds` random draws of 3x3-ish
    /// inputs and asserts the worst relative error stays under tolerance.
    fn check_many<F>(seeds: u64, shapes: &[Vec<usize>], build: F)
    where
        F: Fn(&mut Tape, &[Var]) -> crate::error::Result<Var>,
    {
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut params: Vec<Tensor> =
                shapes.iter().map(|s| rand_tensor(&mut rng, s.clone())).collect();
            let err = gradient_check(&build, &mut params, EPS).unwrap();
            assert!(err < TOL, "seed {seed}: fd error {err}");
        }
    }

    #[test]
    fn fd_matmul() {
        check_many(100, &[vec![3, 3], vec![3, 3]], |t, v| {
            let y = t.matmul(v[0], v[1])?;
            t.sum(y)
        });
    }

    #[test]
    fn fd_add_mul_scalar_mul() {
        check_many(100, &[vec![3, 3], vec![3, 3]], |t, v| {
            let a = t.add(v[0], v[1])?;
            let b = t.mul(a, v[0])?;
            let c = t.scalar_mul(0.7, b)?;
            t.sum(c)
        });
    }

    #[test]
    fn fd_tanh_sigmoid() {
        check_many(100, &[vec![3, 3]], |t, v| {
            let a = t.tanh(v[0])?;
            let b = t.sigmoid(a)?;
            t.sum(b)
        });
    }

    #[test]
    fn fd_softmax_log() {
        // Weighted so the objective is not constant under softmax.
        check_many(100, &[vec![3, 3]], |t, v| {
            let p = t.softmax(v[0])?;
            let w = t.constant(vec![3, 3], (0..9).map(|i| 0.1 * i as f64 + 0.1).collect());
            let pw = t.mul(p, w)?;
            let lp = t.log(pw)?;
            t.sum(lp)
        });
    }

    #[test]
    fn fd_gather_concat() {
        check_many(100, &[vec![4, 3], vec![2, 3]], |t, v| {
            let g = t.gather(v[0], &[1, 3, 1])?;
            let c = t.concat(0, &[g, v[1]])?;
            let sq = t.mul(c, c)?;
            t.sum(sq)
        });
    }

    #[test]
    fn fd_composite_broadcast_affine() {
        check_many(100, &[vec![2, 3], vec![3, 2], vec![1, 2]], |t, v| {
            let y = t.affine(v[0], v[1], v[2])?;
            let s = t.sigmoid(y)?;
            t.sum(s)
        });
    }
}
