//! Tape-based reverse-mode differentiation over small dense tensors.
//!
//! Operations append nodes to a [`Tape`]; each node holds its forward value
//! and the operation that produced it. [`Tape::backward`] walks the nodes in
//! reverse creation order, which is a valid reverse topological order since
//! a node can only reference earlier nodes.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<S> {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, S),
    AddConst(Var),
    MulConst(Var, Tensor<S>),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Huber(Var, S),
    Min(Var, Var),
    Clamp(Var, S, S),
    LogSoftmax(Var),
    Softmax(Var),
    SumAll(Var),
    MeanAll(Var),
    SumRows(Var),
    Gather(Var, Vec<usize>),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    SelectRows(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    LayerNorm(Var, S),
    Reshape(Var),
}

#[derive(Debug, Clone)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    needs_grad: bool,
}

/// Gradients of one scalar loss with respect to every node that needs one.
#[derive(Debug, Clone)]
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient for `v`, or `None` when no path from `v` reaches the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor<S>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

fn shape_err(what: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Shape(format!("{what}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1))
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Trainable leaf.
    pub fn leaf(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul_nt(self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::MatMulNt(a, b), ng))
    }

    /// Adds the single row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.0 != 1 || sb.1 != sa.1 {
            return Err(shape_err("add_row", sa, sb));
        }
        let mut value = self.value(a).clone();
        let brow = self.value(b).data().to_vec();
        for r in 0..sa.0 {
            for (x, &y) in value.row_mut(r).iter_mut().zip(&brow) {
                *x += y;
            }
        }
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::AddRow(a, b), ng))
    }

    /// Multiplies every row of `a` elementwise by the single row `b`.
    pub fn mul_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.0 != 1 || sb.1 != sa.1 {
            return Err(shape_err("mul_row", sa, sb));
        }
        let mut value = self.value(a).clone();
        let brow = self.value(b).data().to_vec();
        for r in 0..sa.0 {
            for (x, &y) in value.row_mut(r).iter_mut().zip(&brow) {
                *x *= y;
            }
        }
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::MulRow(a, b), ng))
    }

    fn binary(&mut self, a: Var, b: Var, what: &str, f: impl Fn(S, S) -> S) -> Result<Tensor<S>> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(what, sa, sb));
        }
        Ok(self.value(a).zip_map(self.value(b), f))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary(a, b, "add", |x, y| x + y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary(a, b, "sub", |x, y| x - y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary(a, b, "mul", |x, y| x * y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::Mul(a, b), ng))
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary(a, b, "min", |x, y| if x <= y { x } else { y })?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::Min(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, s: S) -> Var {
        let value = self.value(a).map(|x| x * s);
        let ng = self.ng(a);
        self.push(value, Op::Scale(a, s), ng)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -S::one())
    }

    pub fn add_scalar(&mut self, a: Var, s: S) -> Var {
        let value = self.value(a).map(|x| x + s);
        let ng = self.ng(a);
        self.push(value, Op::AddConst(a), ng)
    }

    pub fn add_const(&mut self, a: Var, k: &Tensor<S>) -> Result<Var> {
        if self.shape(a) != k.shape() {
            return Err(shape_err("add_const", self.shape(a), k.shape()));
        }
        let value = self.value(a).zip_map(k, |x, y| x + y);
        let ng = self.ng(a);
        Ok(self.push(value, Op::AddConst(a), ng))
    }

    pub fn mul_const(&mut self, a: Var, k: Tensor<S>) -> Result<Var> {
        if self.shape(a) != k.shape() {
            return Err(shape_err("mul_const", self.shape(a), k.shape()));
        }
        let value = self.value(a).zip_map(&k, |x, y| x * y);
        let ng = self.ng(a);
        Ok(self.push(value, Op::MulConst(a, k), ng))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > S::zero() { x } else { S::zero() });
        let ng = self.ng(a);
        self.push(value, Op::Relu(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(S::tanh);
        let ng = self.ng(a);
        self.push(value, Op::Tanh(a), ng)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(S::exp);
        let ng = self.ng(a);
        self.push(value, Op::Exp(a), ng)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).map(S::ln);
        let ng = self.ng(a);
        self.push(value, Op::Log(a), ng)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x * x);
        let ng = self.ng(a);
        self.push(value, Op::Square(a), ng)
    }

    /// Elementwise Huber loss with threshold `delta`.
    pub fn huber(&mut self, a: Var, delta: S) -> Var {
        let half = S::of(0.5);
        let value = self.value(a).map(|x| {
            if x.abs() <= delta {
                half * x * x
            } else {
                delta * (x.abs() - half * delta)
            }
        });
        let ng = self.ng(a);
        self.push(value, Op::Huber(a, delta), ng)
    }

    /// Elementwise clamp into `[lo, hi]`; the gradient passes only inside.
    pub fn clamp(&mut self, a: Var, lo: S, hi: S) -> Var {
        let value = self.value(a).map(|x| x.max(lo).min(hi));
        let ng = self.ng(a);
        self.push(value, Op::Clamp(a, lo, hi), ng)
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut value = x.clone();
        for r in 0..x.rows() {
            let row = value.row_mut(r);
            let max = row.iter().copied().fold(S::neg_infinity(), S::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<S>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        let ng = self.ng(a);
        self.push(value, Op::LogSoftmax(a), ng)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut value = x.clone();
        for r in 0..x.rows() {
            let row = value.row_mut(r);
            let max = row.iter().copied().fold(S::neg_infinity(), S::max);
            let mut total = S::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        let ng = self.ng(a);
        self.push(value, Op::Softmax(a), ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).data().iter().copied().sum());
        let ng = self.ng(a);
        self.push(value, Op::SumAll(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let value = Tensor::scalar(x.data().iter().copied().sum::<S>() / S::of_usize(x.len()));
        let ng = self.ng(a);
        self.push(value, Op::MeanAll(a), ng)
    }

    /// `m x n -> m x 1` row sums.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let data = (0..x.rows()).map(|r| x.row(r).iter().copied().sum()).collect();
        let value = Tensor::from_vec(x.rows(), 1, data).expect("row sums");
        let ng = self.ng(a);
        self.push(value, Op::SumRows(a), ng)
    }

    /// Picks column `idx[r]` of each row `r`: `m x n -> m x 1`.
    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if idx.len() != x.rows() {
            return Err(Error::Shape(format!("gather {} indices for {} rows", idx.len(), x.rows())));
        }
        let mut data = Vec::with_capacity(idx.len());
        for (r, &c) in idx.iter().enumerate() {
            if c >= x.cols() {
                return Err(Error::Index {
                    index: c,
                    len: x.cols(),
                });
            }
            data.push(x.get(r, c));
        }
        let value = Tensor::from_vec(idx.len(), 1, data)?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::Gather(a, idx.to_vec()), ng))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        if start + len > x.cols() {
            return Err(Error::Shape(format!(
                "slice_cols {start}..{} of {}",
                start + len,
                x.cols()
            )));
        }
        let mut data = Vec::with_capacity(x.rows() * len);
        for r in 0..x.rows() {
            data.extend_from_slice(&x.row(r)[start..start + len]);
        }
        let value = Tensor::from_vec(x.rows(), len, data)?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::SliceCols(a, start), ng))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&p| self.shape(p).0)
            .ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        if parts.iter().any(|&p| self.shape(p).0 != rows) {
            return Err(Error::Shape("concat_cols row mismatch".into()));
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::from_vec(rows, cols, data)?;
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), ng))
    }

    /// Row `i` of the output is row `idx[i]` of `a`.
    pub fn select_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let x = self.value(a);
        let mut data = Vec::with_capacity(idx.len() * x.cols());
        for &r in idx {
            if r >= x.rows() {
                return Err(Error::Index {
                    index: r,
                    len: x.rows(),
                });
            }
            data.extend_from_slice(x.row(r));
        }
        let value = Tensor::from_vec(idx.len(), x.cols(), data)?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::SelectRows(a, idx.to_vec()), ng))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts
            .first()
            .map(|&p| self.shape(p).1)
            .ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        if parts.iter().any(|&p| self.shape(p).1 != cols) {
            return Err(Error::Shape("concat_rows column mismatch".into()));
        }
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
            rows += self.shape(p).0;
        }
        let value = Tensor::from_vec(rows, cols, data)?;
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(value, Op::ConcatRows(parts.to_vec()), ng))
    }

    /// Normalizes each row to zero mean and unit variance.
    pub fn layer_norm(&mut self, a: Var, eps: S) -> Var {
        let x = self.value(a);
        let n = S::of_usize(x.cols());
        let mut value = x.clone();
        for r in 0..x.rows() {
            let row = value.row_mut(r);
            let mu = row.iter().copied().sum::<S>() / n;
            let var = row.iter().map(|&v| (v - mu) * (v - mu)).sum::<S>() / n;
            let inv = S::one() / (var + eps).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mu) * inv;
            }
        }
        let ng = self.ng(a);
        self.push(value, Op::LayerNorm(a, eps), ng)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let value = Tensor::from_vec(rows, cols, self.value(a).data().to_vec())?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::Reshape(a), ng))
    }

    /// Reverse pass from the `1 x 1` node `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>> {
        if self.nodes.is_empty() {
            return Err(Error::State("backward called before any forward pass".into()));
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::State("loss node is not on this tape".into()));
        }
        if self.shape(loss) != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(Error::Shape(format!("loss must be 1x1, got {r}x{c}")));
        }
        let mut grads: Vec<Option<Tensor<S>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(S::one()));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.needs_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        grads.resize(self.nodes.len(), None);
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<S>, g: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) {
        let mut acc = |v: Var, d: Tensor<S>| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(t) => t.add_assign(&d),
                slot => *slot = Some(d),
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                acc(*a, g.matmul_nt(val(*b)).expect("matmul grad"));
                acc(*b, val(*a).matmul_tn(g).expect("matmul grad"));
            }
            Op::MatMulNt(a, b) => {
                acc(*a, g.matmul(val(*b)).expect("matmul_nt grad"));
                acc(*b, g.matmul_tn(val(*a)).expect("matmul_nt grad"));
            }
            Op::AddRow(a, b) => {
                acc(*a, g.clone());
                acc(*b, col_sums(g));
            }
            Op::MulRow(a, b) => {
                let brow = val(*b).data();
                let mut da = g.clone();
                for r in 0..da.rows() {
                    for (x, &w) in da.row_mut(r).iter_mut().zip(brow) {
                        *x *= w;
                    }
                }
                acc(*a, da);
                acc(*b, col_sums(&g.zip_map(val(*a), |x, y| x * y)));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                acc(*a, g.zip_map(val(*b), |x, y| x * y));
                acc(*b, g.zip_map(val(*a), |x, y| x * y));
            }
            Op::Scale(a, s) => acc(*a, g.map(|x| x * *s)),
            Op::AddConst(a) | Op::Reshape(a) => {
                let (r, c) = val(*a).shape();
                acc(*a, Tensor::from_vec(r, c, g.data().to_vec()).expect("same size"));
            }
            Op::MulConst(a, k) => acc(*a, g.zip_map(k, |x, y| x * y)),
            Op::Relu(a) => acc(
                *a,
                g.zip_map(val(*a), |x, v| if v > S::zero() { x } else { S::zero() }),
            ),
            Op::Tanh(a) => acc(*a, g.zip_map(y, |x, t| x * (S::one() - t * t))),
            Op::Exp(a) => acc(*a, g.zip_map(y, |x, e| x * e)),
            Op::Log(a) => acc(*a, g.zip_map(val(*a), |x, v| x / v)),
            Op::Square(a) => acc(*a, g.zip_map(val(*a), |x, v| S::of(2.0) * v * x)),
            Op::Huber(a, delta) => acc(
                *a,
                g.zip_map(val(*a), |x, v| {
                    if v.abs() <= *delta {
                        x * v
                    } else {
                        x * *delta * v.signum()
                    }
                }),
            ),
            Op::Min(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let mut da = Tensor::zeros(va.rows(), va.cols());
                let mut db = Tensor::zeros(va.rows(), va.cols());
                for i in 0..va.len() {
                    if va.data()[i] <= vb.data()[i] {
                        da.data_mut()[i] = g.data()[i];
                    } else {
                        db.data_mut()[i] = g.data()[i];
                    }
                }
                acc(*a, da);
                acc(*b, db);
            }
            Op::Clamp(a, lo, hi) => acc(
                *a,
                g.zip_map(val(*a), |x, v| {
                    if v >= *lo && v <= *hi {
                        x
                    } else {
                        S::zero()
                    }
                }),
            ),
            Op::LogSoftmax(a) => {
                let mut da = g.clone();
                for r in 0..da.rows() {
                    let gsum: S = g.row(r).iter().copied().sum();
                    for (d, &lp) in da.row_mut(r).iter_mut().zip(y.row(r)) {
                        *d -= lp.exp() * gsum;
                    }
                }
                acc(*a, da);
            }
            Op::Softmax(a) => {
                let mut da = g.clone();
                for r in 0..da.rows() {
                    let dot: S = g.row(r).iter().zip(y.row(r)).map(|(&x, &p)| x * p).sum();
                    for (d, &p) in da.row_mut(r).iter_mut().zip(y.row(r)) {
                        *d = p * (*d - dot);
                    }
                }
                acc(*a, da);
            }
            Op::SumAll(a) => {
                let (r, c) = val(*a).shape();
                acc(*a, Tensor::filled(r, c, g.item()));
            }
            Op::MeanAll(a) => {
                let (r, c) = val(*a).shape();
                acc(*a, Tensor::filled(r, c, g.item() / S::of_usize(r * c)));
            }
            Op::SumRows(a) => {
                let (r, c) = val(*a).shape();
                let mut da = Tensor::zeros(r, c);
                for i in 0..r {
                    da.row_mut(i).fill(g.get(i, 0));
                }
                acc(*a, da);
            }
            Op::Gather(a, idx) => {
                let (r, c) = val(*a).shape();
                let mut da = Tensor::zeros(r, c);
                for (i, &j) in idx.iter().enumerate() {
                    da.set(i, j, g.get(i, 0));
                }
                acc(*a, da);
            }
            Op::SliceCols(a, start) => {
                let (r, c) = val(*a).shape();
                let mut da = Tensor::zeros(r, c);
                for i in 0..r {
                    da.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                }
                acc(*a, da);
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let (r, c) = val(p).shape();
                    let mut dp = Tensor::zeros(r, c);
                    for i in 0..r {
                        dp.row_mut(i).copy_from_slice(&g.row(i)[start..start + c]);
                    }
                    start += c;
                    acc(p, dp);
                }
            }
            Op::SelectRows(a, idx) => {
                let (r, c) = val(*a).shape();
                let mut da = Tensor::zeros(r, c);
                for (i, &src) in idx.iter().enumerate() {
                    for (d, &x) in da.row_mut(src).iter_mut().zip(g.row(i)) {
                        *d += x;
                    }
                }
                acc(*a, da);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = val(p).shape();
                    let dp = Tensor::from_vec(r, c, g.data()[offset..offset + r * c].to_vec())
                        .expect("concat_rows grad");
                    offset += r * c;
                    acc(p, dp);
                }
            }
            Op::LayerNorm(a, eps) => {
                let x = val(*a);
                let n = S::of_usize(x.cols());
                let mut da = Tensor::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    let row = x.row(r);
                    let mu = row.iter().copied().sum::<S>() / n;
                    let var = row.iter().map(|&v| (v - mu) * (v - mu)).sum::<S>() / n;
                    let inv = S::one() / (var + *eps).sqrt();
                    let (gr, yr) = (g.row(r), y.row(r));
                    let gmean = gr.iter().copied().sum::<S>() / n;
                    let gy = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum::<S>() / n;
                    for (j, d) in da.row_mut(r).iter_mut().enumerate() {
                        *d = inv * (gr[j] - gmean - yr[j] * gy);
                    }
                }
                acc(*a, da);
            }
        }
    }
}

fn col_sums<S: Scalar>(g: &Tensor<S>) -> Tensor<S> {
    let mut out = vec![S::zero(); g.cols()];
    for r in 0..g.rows() {
        for (o, &x) in out.iter_mut().zip(g.row(r)) {
            *o += x;
        }
    }
    Tensor::row_vector(out)
}
