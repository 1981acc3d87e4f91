use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};

/// Dense row-major f64 tensor. Plain value type: a tensor that is not bound
/// to a tape is immutable from the tape's point of view and freely shareable.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    pub requires_grad: bool,
    /// Populated by absorbing tape gradients; same length as `data`.
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidInput(format!(
                "tensor dimensions must be positive, got {shape:?}"
            )));
        }
        if expected != data.len() {
            return Err(Error::InvalidInput(format!(
                "shape {shape:?} implies {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value {bad} in tensor data")));
        }
        Ok(Tensor { shape, data, requires_grad: false, grad: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n], requires_grad: false, grad: None }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![1], data: vec![v], requires_grad: false, grad: None }
    }

    /// Uniform init in (-scale, scale), deterministic under the given RNG.
    pub fn uniform(shape: Vec<usize>, scale: f64, rng: &mut impl Rng) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        Tensor { shape, data, requires_grad: false, grad: None }
    }

    pub fn param(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Accumulate a gradient slice into `grad`, allocating zeros on first use.
    pub fn accumulate_grad(&mut self, g: &[f64]) {
        debug_assert_eq!(g.len(), self.data.len());
        let grad = self.grad.get_or_insert_with(|| vec![0.0; self.data.len()]);
        for (dst, src) in grad.iter_mut().zip(g) {
            *dst += src;
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    /// Binary layout: u32 rank, then u64 per dimension, then f64 values.
    /// Everything little-endian. Embedded inside checkpoint files.
    pub fn write_le(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&(self.shape.len() as u32).to_le_bytes())?;
        for &d in &self.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_le(r: &mut impl Read) -> Result<Self> {
        let rank = read_u32(r)? as usize;
        if rank > 8 {
            return Err(Error::Format(format!("implausible tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(r)? as usize);
        }
        let n: usize = shape.iter().product();
        if n > (1 << 32) {
            return Err(Error::Format(format!("implausible tensor size for shape {shape:?}")));
        }
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf).map_err(|_| Error::Format("truncated tensor block".into()))?;
            data.push(f64::from_le_bytes(buf));
        }
        Tensor::new(shape, data)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| Error::Format("truncated tensor header".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|_| Error::Format("truncated tensor header".into()))?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_shape_mismatch() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert!(Tensor::new(vec![2], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let t = Tensor::new(vec![2, 3], vec![0.1, -2.5, 3e-9, 4.0, 5.5, -0.0]).unwrap();
        let mut buf = Vec::new();
        t.write_le(&mut buf).unwrap();
        let back = Tensor::read_le(&mut buf.as_slice()).unwrap();
        assert_eq!(back.shape(), t.shape());
        for (a, b) in back.data().iter().zip(t.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_read_is_format_error() {
        let t = Tensor::new(vec![4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        t.write_le(&mut buf).unwrap();
        buf.pop();
        match Tensor::read_le(&mut buf.as_slice()) {
            Err(Error::Format(_)) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
