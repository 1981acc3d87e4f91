use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`]. Only valid for the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Floor applied by [`Tape::log`] so a literal zero never reaches `ln`.
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Concat { parts: Vec<Var>, axis: usize, sizes: Vec<usize> },
    Tanh { x: Var },
    Sigmoid { x: Var },
    Softmax { x: Var, rows: usize, cols: usize },
    Log { x: Var, floor: f64 },
    Gather { x: Var, indices: Vec<usize>, row: usize },
    Sum { x: Var },
    ScalarMul { x: Var, c: f64 },
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    data: Vec<f64>,
    needs_grad: bool,
}

/// Define-by-run Wengert tape. Records once per forward pass, replays in
/// reverse for gradients, and is dropped afterwards. Single-threaded.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    backward_done: bool,
    log_clamped: usize,
}

/// Numerically stable softmax of a non-empty finite vector (max-subtraction).
pub fn softmax(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::InvalidInput("softmax of empty vector".into()));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("softmax of non-finite input {bad}")));
    }
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.iter().map(|e| e / sum).collect())
}

fn softmax_rows(x: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(x.len());
    for r in 0..rows {
        out.extend(softmax(&x[r * cols..(r + 1) * cols])?);
    }
    Ok(out)
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// How many times a `log` input got clamped to its floor (log(0) guard).
    pub fn log_clamp_count(&self) -> usize {
        self.log_clamped
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].data
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value_scalar(&self, v: Var) -> f64 {
        debug_assert_eq!(self.nodes[v.0].data.len(), 1);
        self.nodes[v.0].data[0]
    }

    /// Gradient of the last `backward` target w.r.t. `v`, if any flowed.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, data: Vec<f64>, needs_grad: bool) -> Var {
        self.nodes.push(Node { op, shape, data, needs_grad });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn check_finite(&self, op: &'static str, data: &[f64]) -> Result<()> {
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("{op} produced non-finite value {bad}")));
        }
        Ok(())
    }

    // ── Leaves ───────────────────────────────────────────────────────

    /// Constant leaf; gradients never flow into it.
    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.push(Op::Leaf, shape, data, false)
    }

    pub fn constant_scalar(&mut self, v: f64) -> Var {
        self.constant(vec![1], vec![v])
    }

    pub fn ones(&mut self, shape: Vec<usize>) -> Var {
        let n = shape.iter().product();
        self.constant(shape, vec![1.0; n])
    }

    /// Bind a tensor as a leaf. Copies the data in; gradient flows iff the
    /// tensor has `requires_grad` set. Read the gradient back with
    /// [`Tape::grad`] after `backward`.
    pub fn param(&mut self, t: &Tensor) -> Var {
        self.push(Op::Leaf, t.shape().to_vec(), t.data().to_vec(), t.requires_grad)
    }

    // ── Primitives ───────────────────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Shape {
                op: "matmul",
                detail: format!("{sa:?} x {sb:?}"),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        matmul_into(&self.nodes[a.0].data, &self.nodes[b.0].data, &mut out, m, k, n);
        self.check_finite("matmul", &out)?;
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        Ok(self.push(Op::Matmul { a, b, m, k, n }, vec![m, n], out, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op("add", a, b, |x, y| x + y, |a, b| Op::Add { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op("elementwise-mul", a, b, |x, y| x * y, |a, b| Op::Mul { a, b })
    }

    fn zip_op(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: impl Fn(Var, Var) -> Op,
    ) -> Result<Var> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(Error::Shape {
                op: name,
                detail: format!("{:?} vs {:?}", self.nodes[a.0].shape, self.nodes[b.0].shape),
            });
        }
        let data: Vec<f64> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.check_finite(name, &data)?;
        let shape = self.nodes[a.0].shape.clone();
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        Ok(self.push(op(a, b), shape, data, ng))
    }

    /// Concatenate along `axis` (0 or 1). All parts must agree on the other
    /// axis and on rank.
    pub fn concat(&mut self, axis: usize, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() || axis > 1 {
            return Err(Error::Shape { op: "concat", detail: format!("axis {axis}, {} parts", parts.len()) });
        }
        let rank = self.nodes[parts[0].0].shape.len();
        if axis >= rank {
            return Err(Error::Shape { op: "concat", detail: format!("axis {axis} on rank {rank}") });
        }
        let mut sizes = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = &self.nodes[p.0].shape;
            if s.len() != rank || (rank == 2 && s[1 - axis] != self.nodes[parts[0].0].shape[1 - axis]) {
                return Err(Error::Shape {
                    op: "concat",
                    detail: format!("{:?} vs {:?}", s, self.nodes[parts[0].0].shape),
                });
            }
            sizes.push(s[axis]);
        }
        let total: usize = sizes.iter().sum();
        let mut shape = self.nodes[parts[0].0].shape.clone();
        shape[axis] = total;
        let data = if axis == 0 {
            let mut d = Vec::with_capacity(shape.iter().product());
            for &p in parts {
                d.extend_from_slice(&self.nodes[p.0].data);
            }
            d
        } else {
            let rows = shape[0];
            let mut d = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for (&p, &w) in parts.iter().zip(&sizes) {
                    d.extend_from_slice(&self.nodes[p.0].data[r * w..(r + 1) * w]);
                }
            }
            d
        };
        let ng = parts.iter().any(|p| self.nodes[p.0].needs_grad);
        Ok(self.push(Op::Concat { parts: parts.to_vec(), axis, sizes }, shape, data, ng))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let data: Vec<f64> = self.nodes[x.0].data.iter().map(|v| v.tanh()).collect();
        self.check_finite("tanh", &data)?;
        let (shape, ng) = (self.nodes[x.0].shape.clone(), self.nodes[x.0].needs_grad);
        Ok(self.push(Op::Tanh { x }, shape, data, ng))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let data: Vec<f64> = self.nodes[x.0].data.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
        self.check_finite("sigmoid", &data)?;
        let (shape, ng) = (self.nodes[x.0].shape.clone(), self.nodes[x.0].needs_grad);
        Ok(self.push(Op::Sigmoid { x }, shape, data, ng))
    }

    /// Row-wise softmax: a vector is one row, a matrix is softmaxed per row.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let shape = self.nodes[x.0].shape.clone();
        let (rows, cols) = match shape.len() {
            1 => (1, shape[0]),
            2 => (shape[0], shape[1]),
            _ => return Err(Error::Shape { op: "softmax", detail: format!("{shape:?}") }),
        };
        let data = softmax_rows(&self.nodes[x.0].data, rows, cols)?;
        let ng = self.nodes[x.0].needs_grad;
        Ok(self.push(Op::Softmax { x, rows, cols }, shape, data, ng))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.log_floored(x, LOG_FLOOR)
    }

    /// `ln(max(x, floor))` elementwise; clamps are counted for diagnostics.
    pub fn log_floored(&mut self, x: Var, floor: f64) -> Result<Var> {
        let mut clamps = 0usize;
        let data: Vec<f64> = self.nodes[x.0]
            .data
            .iter()
            .map(|&v| {
                if v < floor {
                    clamps += 1;
                    floor.ln()
                } else {
                    v.ln()
                }
            })
            .collect();
        self.check_finite("log", &data)?;
        self.log_clamped += clamps;
        let (shape, ng) = (self.nodes[x.0].shape.clone(), self.nodes[x.0].needs_grad);
        Ok(self.push(Op::Log { x, floor }, shape, data, ng))
    }

    /// Row gather over axis 0: picks `indices` rows of a matrix (embedding
    /// lookup) or `indices` elements of a vector. Duplicates allowed.
    pub fn gather(&mut self, x: Var, indices: &[usize]) -> Result<Var> {
        let shape = self.nodes[x.0].shape.clone();
        let (rows, row) = match shape.len() {
            1 => (shape[0], 1),
            2 => (shape[0], shape[1]),
            _ => return Err(Error::Shape { op: "row-gather", detail: format!("{shape:?}") }),
        };
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::Shape {
                op: "row-gather",
                detail: format!("index {bad} out of {rows} rows"),
            });
        }
        let mut data = Vec::with_capacity(indices.len() * row);
        for &i in indices {
            data.extend_from_slice(&self.nodes[x.0].data[i * row..i * row + row]);
        }
        let out_shape = match shape.len() {
            1 => vec![indices.len()],
            _ => vec![indices.len(), row],
        };
        let ng = self.nodes[x.0].needs_grad;
        Ok(self.push(Op::Gather { x, indices: indices.to_vec(), row }, out_shape, data, ng))
    }

    /// Full reduction to a scalar of shape `[1]`.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s: f64 = self.nodes[x.0].data.iter().sum();
        self.check_finite("sum", &[s])?;
        let ng = self.nodes[x.0].needs_grad;
        Ok(self.push(Op::Sum { x }, vec![1], vec![s], ng))
    }

    pub fn scalar_mul(&mut self, c: f64, x: Var) -> Result<Var> {
        if !c.is_finite() {
            return Err(Error::InvalidInput(format!("scalar-mul by non-finite {c}")));
        }
        let data: Vec<f64> = self.nodes[x.0].data.iter().map(|v| c * v).collect();
        self.check_finite("scalar-mul", &data)?;
        let (shape, ng) = (self.nodes[x.0].shape.clone(), self.nodes[x.0].needs_grad);
        Ok(self.push(Op::ScalarMul { x, c }, shape, data, ng))
    }

    // ── Composites (built purely from the primitives above) ──────────

    /// Tile a `1 x n` row vector down `rows` rows via `ones(rows,1) @ v`.
    pub fn broadcast_row(&mut self, v: Var, rows: usize) -> Result<Var> {
        let ones = self.ones(vec![rows, 1]);
        self.matmul(ones, v)
    }

    /// Tile a `rows x 1` column across `cols` columns via `v @ ones(1,cols)`.
    pub fn broadcast_col(&mut self, v: Var, cols: usize) -> Result<Var> {
        let ones = self.ones(vec![1, cols]);
        self.matmul(v, ones)
    }

    /// `x @ w + b` with `b` a `1 x n` row broadcast over the batch.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        let rows = self.shape(y)[0];
        let bb = self.broadcast_row(b, rows)?;
        self.add(y, bb)
    }

    /// Per-row sum of a matrix as a `rows x 1` column: `x @ ones(cols,1)`.
    pub fn row_sum(&mut self, x: Var) -> Result<Var> {
        let cols = *self.shape(x).last().unwrap();
        let ones = self.ones(vec![cols, 1]);
        self.matmul(x, ones)
    }

    /// Column `j` of a matrix as `rows x 1`, via a selector matmul.
    pub fn select_col(&mut self, x: Var, j: usize) -> Result<Var> {
        let cols = *self.shape(x).last().unwrap();
        let mut sel = vec![0.0; cols];
        sel[j] = 1.0;
        let sel = self.constant(vec![cols, 1], sel);
        self.matmul(x, sel)
    }

    // ── Backward ─────────────────────────────────────────────────────

    /// Reverse pass from a scalar loss. Touches each node exactly once;
    /// gradients accumulate additively across fan-out.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::State("backward on an empty tape".into()));
        }
        if self.backward_done {
            return Err(Error::State("backward called twice without tape reset".into()));
        }
        if self.nodes[loss.0].data.len() != 1 {
            return Err(Error::InvalidInput(format!(
                "backward target must be scalar, got shape {:?}",
                self.nodes[loss.0].shape
            )));
        }
        self.backward_done = true;
        self.grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(dout) = self.grads[i].take() else { continue };
            self.step_back(i, &dout);
            self.grads[i] = Some(dout);
        }
        Ok(())
    }

    fn accum(&mut self, v: Var, g: &[f64]) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(existing) => {
                for (dst, src) in existing.iter_mut().zip(g) {
                    *dst += src;
                }
            }
            None => self.grads[v.0] = Some(g.to_vec()),
        }
    }

    fn step_back(&mut self, i: usize, dout: &[f64]) {
        let op = self.nodes[i].op.clone();
        match op {
            Op::Leaf => {}
            Op::Matmul { a, b, m, k, n } => {
                // dA = dC @ B^T
                if self.nodes[a.0].needs_grad {
                    let bt = transpose(&self.nodes[b.0].data, k, n);
                    let mut da = vec![0.0; m * k];
                    matmul_into(dout, &bt, &mut da, m, n, k);
                    self.accum(a, &da);
                }
                // dB = A^T @ dC
                if self.nodes[b.0].needs_grad {
                    let at = transpose(&self.nodes[a.0].data, m, k);
                    let mut db = vec![0.0; k * n];
                    matmul_into(&at, dout, &mut db, k, m, n);
                    self.accum(b, &db);
                }
            }
            Op::Add { a, b } => {
                self.accum(a, dout);
                self.accum(b, dout);
            }
            Op::Mul { a, b } => {
                if self.nodes[a.0].needs_grad {
                    let da: Vec<f64> =
                        dout.iter().zip(&self.nodes[b.0].data).map(|(&d, &y)| d * y).collect();
                    self.accum(a, &da);
                }
                if self.nodes[b.0].needs_grad {
                    let db: Vec<f64> =
                        dout.iter().zip(&self.nodes[a.0].data).map(|(&d, &x)| d * x).collect();
                    self.accum(b, &db);
                }
            }
            Op::Concat { parts, axis, sizes } => {
                if axis == 0 {
                    let mut off = 0;
                    for (&p, &sz) in parts.iter().zip(&sizes) {
                        let len = self.nodes[p.0].data.len();
                        self.accum(p, &dout[off..off + len]);
                        off += len;
                        debug_assert!(sz > 0);
                    }
                } else {
                    let rows = self.nodes[i].shape[0];
                    let total: usize = sizes.iter().sum();
                    for (pi, &p) in parts.iter().enumerate() {
                        if !self.nodes[p.0].needs_grad {
                            continue;
                        }
                        let w = sizes[pi];
                        let start: usize = sizes[..pi].iter().sum();
                        let mut dp = vec![0.0; rows * w];
                        for r in 0..rows {
                            dp[r * w..(r + 1) * w]
                                .copy_from_slice(&dout[r * total + start..r * total + start + w]);
                        }
                        self.accum(p, &dp);
                    }
                }
            }
            Op::Tanh { x } => {
                let dx: Vec<f64> = dout
                    .iter()
                    .zip(&self.nodes[i].data)
                    .map(|(&d, &y)| d * (1.0 - y * y))
                    .collect();
                self.accum(x, &dx);
            }
            Op::Sigmoid { x } => {
                let dx: Vec<f64> = dout
                    .iter()
                    .zip(&self.nodes[i].data)
                    .map(|(&d, &y)| d * y * (1.0 - y))
                    .collect();
                self.accum(x, &dx);
            }
            Op::Softmax { x, rows, cols } => {
                let y = &self.nodes[i].data;
                let mut dx = vec![0.0; y.len()];
                for r in 0..rows {
                    let base = r * cols;
                    let dot: f64 =
                        (0..cols).map(|c| dout[base + c] * y[base + c]).sum();
                    for c in 0..cols {
                        dx[base + c] = y[base + c] * (dout[base + c] - dot);
                    }
                }
                self.accum(x, &dx);
            }
            Op::Log { x, floor } => {
                let dx: Vec<f64> = dout
                    .iter()
                    .zip(&self.nodes[x.0].data)
                    .map(|(&d, &v)| if v < floor { 0.0 } else { d / v })
                    .collect();
                self.accum(x, &dx);
            }
            Op::Gather { x, indices, row } => {
                let mut dx = vec![0.0; self.nodes[x.0].data.len()];
                for (slot, &idx) in indices.iter().enumerate() {
                    for c in 0..row {
                        dx[idx * row + c] += dout[slot * row + c];
                    }
                }
                self.accum(x, &dx);
            }
            Op::Sum { x } => {
                let dx = vec![dout[0]; self.nodes[x.0].data.len()];
                self.accum(x, &dx);
            }
            Op::ScalarMul { x, c } => {
                let dx: Vec<f64> = dout.iter().map(|&d| c * d).collect();
                self.accum(x, &dx);
            }
        }
    }
}

/// `c += a @ b` with a `[m,k]`, b `[k,n]`. Inner loop is contiguous in `b`
/// and `c` so it vectorizes.
fn matmul_into(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (kk, &aik) in a_row.iter().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += aik * bv;
            }
        }
    }
}

fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn softmax_symmetry_and_shift() {
        let u = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for v in &u {
            assert!(close(*v, 1.0 / 3.0, 1e-15));
        }
        let a = softmax(&[1.0, 2.0, 3.0]).unwrap();
        let b = softmax(&[1001.0, 1002.0, 1003.0]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(close(*x, *y, 1e-12), "shift invariance broke: {x} vs {y}");
        }
        assert!(close(a.iter().sum::<f64>(), 1.0, 1e-9));
    }

    #[test]
    fn softmax_reference_values() {
        // e^{x_i} / sum, evaluated independently at high precision.
        let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
        assert!(close(p[0], 0.09003, 1e-4));
        assert!(close(p[1], 0.24473, 1e-4));
        assert!(close(p[2], 0.66524, 1e-4));
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(softmax(&[]).is_err());
        assert!(softmax(&[1.0, f64::NAN]).is_err());
        assert!(softmax(&[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn matmul_shape_contract() {
        let mut t = Tape::new();
        let a = t.constant(vec![2, 3], vec![1.0; 6]);
        let b = t.constant(vec![3, 1], vec![1.0; 3]);
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.shape(c), &[2, 1]);
        assert_eq!(t.value(c), &[3.0, 3.0]);

        let bad = t.constant(vec![2, 2], vec![1.0; 4]);
        match t.matmul(a, bad) {
            Err(Error::Shape { op: "matmul", .. }) => {}
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn tanh_zero_fixed_point_and_gather() {
        let mut t = Tape::new();
        let x = t.constant(vec![2, 2], vec![0.0; 4]);
        let y = t.tanh(x).unwrap();
        assert_eq!(t.value(y), &[0.0; 4]);

        let e = t.constant(vec![5, 4], (0..20).map(|v| v as f64).collect());
        let row = t.gather(e, &[2]).unwrap();
        assert_eq!(t.value(row), &[8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn backward_sum_gives_ones() {
        let mut t = Tape::new();
        let x = t.param(&Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap().param());
        let s = t.sum(x).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn backward_square_sum() {
        let mut t = Tape::new();
        let x = t.param(&Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap().param());
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn backward_twice_is_state_error() {
        let mut t = Tape::new();
        let x = t.param(&Tensor::new(vec![1], vec![2.0]).unwrap().param());
        let s = t.sum(x).unwrap();
        t.backward(s).unwrap();
        match t.backward(s) {
            Err(Error::State(_)) => {}
            other => panic!("expected state error, got {other:?}"),
        }
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let x = t.param(&Tensor::new(vec![2], vec![1.0, 2.0]).unwrap().param());
        match t.backward(x) {
            Err(Error::InvalidInput(_)) => {}
            other => panic!("expected invalid-input, got {other:?}"),
        }
    }

    #[test]
    fn fanout_accumulates_like_unrolled_copy() {
        // loss = sum(x*x) + sum(x): x used by two consumers.
        let tensor = Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap().param();
        let mut t = Tape::new();
        let x = t.param(&tensor);
        let sq = t.mul(x, x).unwrap();
        let s1 = t.sum(sq).unwrap();
        let s2 = t.sum(x).unwrap();
        let loss = t.add(s1, s2).unwrap();
        t.backward(loss).unwrap();
        let shared = t.grad(x).unwrap().to_vec();

        // Unrolled duplicate-input construction: separate leaves per path.
        let mut t2 = Tape::new();
        let xa = t2.param(&tensor);
        let xb = t2.param(&tensor);
        let sq = t2.mul(xa, xa).unwrap();
        let s1 = t2.sum(sq).unwrap();
        let s2 = t2.sum(xb).unwrap();
        let loss = t2.add(s1, s2).unwrap();
        t2.backward(loss).unwrap();
        let summed: Vec<f64> = t2
            .grad(xa)
            .unwrap()
            .iter()
            .zip(t2.grad(xb).unwrap())
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(shared, summed);
    }

    #[test]
    fn log_floor_clamps_and_counts() {
        let mut t = Tape::new();
        let x = t.constant(vec![2], vec![0.0, 1.0]);
        let y = t.log_floored(x, 1e-12).unwrap();
        assert!(close(t.value(y)[0], (1e-12f64).ln(), 1e-9));
        assert_eq!(t.value(y)[1], 0.0);
        assert_eq!(t.log_clamp_count(), 1);
    }

    #[test]
    fn concat_axis1_roundtrip() {
        let mut t = Tape::new();
        let a = t.param(&Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap().param());
        let b = t.param(&Tensor::new(vec![2, 1], vec![5.0, 6.0]).unwrap().param());
        let c = t.concat(1, &[a, b]).unwrap();
        assert_eq!(t.value(c), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let s = t.sum(c).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(a).unwrap(), &[1.0; 4]);
        assert_eq!(t.grad(b).unwrap(), &[1.0; 2]);
    }
}
