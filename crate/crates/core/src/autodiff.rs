//! Tape-based reverse-mode differentiation over dense vectors.
//!
//! Every forward primitive appends a node to a [`Tape`] and returns a [`Var`]
//! handle. Calling [`Tape::backward`] on a scalar node walks the tape in
//! reverse and accumulates `d root / d node` for every node that depends on a
//! parameter. Nodes are stored in creation order, so the tape is acyclic by
//! construction.
//!
//! ```
//! use tsc_spoiler_core::autodiff::Tape;
//!
//! let mut tape = Tape::new();
//! let x = tape.param(vec![2.0]);
//! let y = tape.param(vec![3.0]);
//! let z = tape.mul(x, y).unwrap();
//! let grads = tape.backward(z).unwrap();
//! assert_eq!(grads.get(x), Some(&[3.0][..]));
//! assert_eq!(grads.get(y), Some(&[2.0][..]));
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, Var),
    ScaleConst(Var, f64),
    AddConst(Var),
    MatVec(Var, Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Stack(Vec<Var>),
    Index(Var, usize),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Ln(Var, f64),
    Recip(Var),
    Softmax(Var),
    Dot(Var, Var),
    Norm(Var),
    Sum(Var),
    Mean(Var),
    Variance(Var),
    Cosine { a: Var, b: Var, eps: f64 },
    Max(Var, usize),
    WeightedSum { weights: Var, items: Vec<Var> },
    MeanOf(Vec<Var>),
}

#[derive(Clone, Debug)]
struct Node {
    value: Vec<f64>,
    rows: usize,
    cols: usize,
    op: Op,
    requires_grad: bool,
}

/// Arena of recorded operations for one forward/backward pass.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Vec<f64>>,
}

impl Gradients {
    /// Gradient of the root with respect to `var`, or `None` when `var` does
    /// not depend on any parameter or does not reach the root.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads
            .get(var.0)
            .filter(|g| !g.is_empty())
            .map(|g| g.as_slice())
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Tape {
            nodes: Vec::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, rows: usize, cols: usize, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            value,
            rows,
            cols,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable vector leaf.
    pub fn param(&mut self, value: Vec<f64>) -> Var {
        let n = value.len();
        self.push(value, n, 1, Op::Leaf, true)
    }

    /// Trainable matrix leaf.
    pub fn param_matrix(&mut self, m: &Matrix) -> Var {
        self.push(m.data.clone(), m.rows, m.cols, Op::Leaf, true)
    }

    /// Vector leaf that receives no gradient.
    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        let n = value.len();
        self.push(value, n, 1, Op::Leaf, false)
    }

    pub fn constant_matrix(&mut self, m: &Matrix) -> Var {
        self.push(m.data.clone(), m.rows, m.cols, Op::Leaf, false)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.constant(vec![value])
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    /// First element of a node's value; the value of a scalar node.
    pub fn item(&self, v: Var) -> f64 {
        self.node(v).value[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = self.node(v);
        (n.rows, n.cols)
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    fn vec_len(&self, op: &'static str, v: Var) -> Result<usize> {
        let n = self.node(v);
        if n.cols != 1 {
            return Err(Error::ShapeMismatch {
                op,
                left: (n.rows, n.cols),
                right: (n.rows * n.cols, 1),
            });
        }
        Ok(n.rows)
    }

    fn same_len(&self, op: &'static str, a: Var, b: Var) -> Result<usize> {
        let la = self.vec_len(op, a)?;
        let lb = self.vec_len(op, b)?;
        if la != lb {
            return Err(Error::ShapeMismatch {
                op,
                left: (la, 1),
                right: (lb, 1),
            });
        }
        Ok(la)
    }

    fn scalar_check(&self, op: &'static str, v: Var) -> Result<()> {
        let n = self.node(v);
        if n.value.len() != 1 {
            return Err(Error::ShapeMismatch {
                op,
                left: (n.rows, n.cols),
                right: (1, 1),
            });
        }
        Ok(())
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let n = self.node(x);
        let (rows, cols) = (n.rows, n.cols);
        let value = n.value.iter().map(|&v| f(v)).collect();
        let rg = n.requires_grad;
        self.push(value, rows, cols, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let n = self.same_len("add", a, b)?;
        let value = (0..n).map(|i| self.value(a)[i] + self.value(b)[i]).collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, n, 1, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let n = self.same_len("sub", a, b)?;
        let value = (0..n).map(|i| self.value(a)[i] - self.value(b)[i]).collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, n, 1, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let n = self.same_len("mul", a, b)?;
        let value = (0..n).map(|i| self.value(a)[i] * self.value(b)[i]).collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, n, 1, Op::Mul(a, b), rg))
    }

    /// Scalar node times vector node.
    pub fn scale(&mut self, s: Var, v: Var) -> Result<Var> {
        self.scalar_check("scale", s)?;
        let n = self.vec_len("scale", v)?;
        let k = self.item(s);
        let value = self.value(v).iter().map(|x| k * x).collect();
        let rg = self.rg(s) || self.rg(v);
        Ok(self.push(value, n, 1, Op::Scale(s, v), rg))
    }

    pub fn scale_const(&mut self, v: Var, k: f64) -> Var {
        self.unary(v, Op::ScaleConst(v, k), |x| k * x)
    }

    pub fn add_const(&mut self, v: Var, k: f64) -> Var {
        self.unary(v, Op::AddConst(v), |x| x + k)
    }

    /// Matrix-vector product `m · x`.
    pub fn matvec(&mut self, m: Var, x: Var) -> Result<Var> {
        let (rows, cols) = self.shape(m);
        let n = self.vec_len("matvec", x)?;
        if n != cols {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                left: (rows, cols),
                right: (n, 1),
            });
        }
        let md = self.value(m);
        let xd = self.value(x);
        let value = (0..rows).map(|r| math::dot(&md[r * cols..(r + 1) * cols], xd)).collect();
        let rg = self.rg(m) || self.rg(x);
        Ok(self.push(value, rows, 1, Op::MatVec(m, x), rg))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Empty("concat"));
        }
        let mut value = Vec::new();
        for &p in parts {
            self.vec_len("concat", p)?;
            value.extend_from_slice(self.value(p));
        }
        let n = value.len();
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(value, n, 1, Op::Concat(parts.to_vec()), rg))
    }

    /// Contiguous sub-vector `x[start..start + len]`.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.vec_len("slice", x)?;
        if start + len > n {
            return Err(Error::OutOfRange {
                index: start + len,
                len: n,
            });
        }
        let value = self.value(x)[start..start + len].to_vec();
        let rg = self.rg(x);
        Ok(self.push(value, len, 1, Op::Slice(x, start), rg))
    }

    /// Collects scalar nodes into one vector.
    pub fn stack(&mut self, scalars: &[Var]) -> Result<Var> {
        if scalars.is_empty() {
            return Err(Error::Empty("stack"));
        }
        let mut value = Vec::with_capacity(scalars.len());
        for &s in scalars {
            self.scalar_check("stack", s)?;
            value.push(self.item(s));
        }
        let rg = scalars.iter().any(|&s| self.rg(s));
        Ok(self.push(value, scalars.len(), 1, Op::Stack(scalars.to_vec()), rg))
    }

    /// Scalar node holding `x[i]`.
    pub fn index(&mut self, x: Var, i: usize) -> Result<Var> {
        let n = self.vec_len("index", x)?;
        if i >= n {
            return Err(Error::OutOfRange { index: i, len: n });
        }
        let value = vec![self.value(x)[i]];
        let rg = self.rg(x);
        Ok(self.push(value, 1, 1, Op::Index(x, i), rg))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), libm::tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x), math::sigmoid)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), libm::exp)
    }

    /// Natural log with the argument clamped below at `floor`.
    pub fn ln(&mut self, x: Var, floor: f64) -> Var {
        self.unary(x, Op::Ln(x, floor), |v| libm::log(v.max(floor)))
    }

    pub fn recip(&mut self, x: Var) -> Var {
        self.unary(x, Op::Recip(x), |v| 1.0 / v)
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let n = self.vec_len("softmax", x)?;
        if n == 0 {
            return Err(Error::Empty("softmax"));
        }
        let value = math::softmax(self.value(x));
        let rg = self.rg(x);
        Ok(self.push(value, n, 1, Op::Softmax(x), rg))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len("dot", a, b)?;
        let value = vec![math::dot(self.value(a), self.value(b))];
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, 1, 1, Op::Dot(a, b), rg))
    }

    /// Euclidean norm.
    pub fn norm(&mut self, x: Var) -> Result<Var> {
        self.vec_len("norm", x)?;
        let value = vec![math::norm(self.value(x))];
        let rg = self.rg(x);
        Ok(self.push(value, 1, 1, Op::Norm(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.vec_len("sum", x)?;
        let value = vec![self.value(x).iter().sum()];
        let rg = self.rg(x);
        Ok(self.push(value, 1, 1, Op::Sum(x), rg))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.vec_len("mean", x)?;
        if n == 0 {
            return Err(Error::Empty("mean"));
        }
        let value = vec![math::mean(self.value(x))];
        let rg = self.rg(x);
        Ok(self.push(value, 1, 1, Op::Mean(x), rg))
    }

    /// Population variance `(1/n) Σ (x_i - mean)^2`.
    pub fn variance(&mut self, x: Var) -> Result<Var> {
        let n = self.vec_len("variance", x)?;
        if n == 0 {
            return Err(Error::Empty("variance"));
        }
        let value = vec![math::variance(self.value(x))];
        let rg = self.rg(x);
        Ok(self.push(value, 1, 1, Op::Variance(x), rg))
    }

    /// `a·b / ((|a| + eps)(|b| + eps))`. Fails when the denominator is zero.
    pub fn cosine_sim(&mut self, a: Var, b: Var, eps: f64) -> Result<Var> {
        self.same_len("cosine_sim", a, b)?;
        let value = vec![math::cosine(self.value(a), self.value(b), eps)?];
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, 1, 1, Op::Cosine { a, b, eps }, rg))
    }

    /// Maximum element as a scalar. Ties resolve to the lowest index, which is
    /// also the only element that receives gradient.
    pub fn max_index_select(&mut self, x: Var) -> Result<Var> {
        self.vec_len("max", x)?;
        let idx = math::argmax(self.value(x)).ok_or(Error::Empty("max"))?;
        let value = vec![self.value(x)[idx]];
        let rg = self.rg(x);
        Ok(self.push(value, 1, 1, Op::Max(x, idx), rg))
    }

    /// Index chosen by a [`Tape::max_index_select`] node.
    pub fn selected_index(&self, v: Var) -> Option<usize> {
        match self.node(v).op {
            Op::Max(_, idx) => Some(idx),
            _ => None,
        }
    }

    /// `Σ_k weights[k] · items[k]`.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Result<Var> {
        let k = self.vec_len("weighted_sum", weights)?;
        if k != items.len() {
            return Err(Error::ShapeMismatch {
                op: "weighted_sum",
                left: (k, 1),
                right: (items.len(), 1),
            });
        }
        if items.is_empty() {
            return Err(Error::Empty("weighted_sum"));
        }
        let d = self.vec_len("weighted_sum", items[0])?;
        let mut value = vec![0.0; d];
        for (j, &it) in items.iter().enumerate() {
            if self.vec_len("weighted_sum", it)? != d {
                return Err(Error::ShapeMismatch {
                    op: "weighted_sum",
                    left: (d, 1),
                    right: (self.node(it).rows, 1),
                });
            }
            let w = self.value(weights)[j];
            for (acc, x) in value.iter_mut().zip(self.value(it)) {
                *acc += w * x;
            }
        }
        let rg = self.rg(weights) || items.iter().any(|&i| self.rg(i));
        Ok(self.push(
            value,
            d,
            1,
            Op::WeightedSum {
                weights,
                items: items.to_vec(),
            },
            rg,
        ))
    }

    /// Arithmetic mean of several equal-length vectors.
    pub fn mean_of(&mut self, items: &[Var]) -> Result<Var> {
        if items.is_empty() {
            return Err(Error::Empty("mean_of"));
        }
        let d = self.vec_len("mean_of", items[0])?;
        let mut value = vec![0.0; d];
        for &it in items {
            if self.vec_len("mean_of", it)? != d {
                return Err(Error::ShapeMismatch {
                    op: "mean_of",
                    left: (d, 1),
                    right: (self.node(it).rows, 1),
                });
            }
            for (acc, x) in value.iter_mut().zip(self.value(it)) {
                *acc += x;
            }
        }
        let n = items.len() as f64;
        for v in value.iter_mut() {
            *v /= n;
        }
        let rg = items.iter().any(|&i| self.rg(i));
        Ok(self.push(value, d, 1, Op::MeanOf(items.to_vec()), rg))
    }

    /// Reverse pass from a scalar `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rn = self.node(root);
        if rn.value.len() != 1 {
            return Err(Error::NonScalarRoot(rn.value.len()));
        }
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); root.0 + 1];
        if !rn.requires_grad {
            return Ok(Gradients { grads });
        }
        grads[root.0] = vec![1.0];
        for i in (0..=root.0).rev() {
            if grads[i].is_empty() || !self.nodes[i].requires_grad {
                continue;
            }
            let g = core::mem::take(&mut grads[i]);
            self.propagate(i, &g, &mut grads);
            grads[i] = g;
        }
        Ok(Gradients { grads })
    }

    fn slot<'a>(&self, grads: &'a mut [Vec<f64>], v: Var) -> Option<&'a mut Vec<f64>> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        let g = &mut grads[v.0];
        if g.is_empty() {
            *g = vec![0.0; node.value.len()];
        }
        Some(g)
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Vec<f64>]) {
        let node = &self.nodes[i];
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(s) = self.slot(grads, v) {
                        s.iter_mut().zip(g).for_each(|(s, g)| *s += g);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(s) = self.slot(grads, *a) {
                    s.iter_mut().zip(g).for_each(|(s, g)| *s += g);
                }
                if let Some(s) = self.slot(grads, *b) {
                    s.iter_mut().zip(g).for_each(|(s, g)| *s -= g);
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(s) = self.slot(grads, *a) {
                    for k in 0..g.len() {
                        s[k] += g[k] * bv[k];
                    }
                }
                if let Some(s) = self.slot(grads, *b) {
                    for k in 0..g.len() {
                        s[k] += g[k] * av[k];
                    }
                }
            }
            Op::Scale(sc, v) => {
                let k = self.item(*sc);
                let vv = self.value(*v);
                if let Some(s) = self.slot(grads, *sc) {
                    s[0] += math::dot(g, vv);
                }
                if let Some(s) = self.slot(grads, *v) {
                    s.iter_mut().zip(g).for_each(|(s, g)| *s += k * g);
                }
            }
            Op::ScaleConst(v, k) => {
                if let Some(s) = self.slot(grads, *v) {
                    s.iter_mut().zip(g).for_each(|(s, g)| *s += k * g);
                }
            }
            Op::AddConst(v) => {
                if let Some(s) = self.slot(grads, *v) {
                    s.iter_mut().zip(g).for_each(|(s, g)| *s += g);
                }
            }
            Op::MatVec(m, x) => {
                let (rows, cols) = self.shape(*m);
                let xv = self.value(*x);
                let mv = self.value(*m);
                if let Some(s) = self.slot(grads, *m) {
                    for r in 0..rows {
                        let gr = g[r];
                        if gr != 0.0 {
                            let row = &mut s[r * cols..(r + 1) * cols];
                            row.iter_mut().zip(xv).for_each(|(s, x)| *s += gr * x);
                        }
                    }
                }
                if let Some(s) = self.slot(grads, *x) {
                    for r in 0..rows {
                        let gr = g[r];
                        if gr != 0.0 {
                            let row = &mv[r * cols..(r + 1) * cols];
                            s.iter_mut().zip(row).for_each(|(s, m)| *s += gr * m);
                        }
                    }
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.node(p).value.len();
                    if let Some(s) = self.slot(grads, p) {
                        s.iter_mut().zip(&g[off..off + n]).for_each(|(s, g)| *s += g);
                    }
                    off += n;
                }
            }
            Op::Slice(x, start) => {
                if let Some(s) = self.slot(grads, *x) {
                    s[*start..*start + g.len()]
                        .iter_mut()
                        .zip(g)
                        .for_each(|(s, g)| *s += g);
                }
            }
            Op::Stack(items) => {
                for (k, &it) in items.iter().enumerate() {
                    if let Some(s) = self.slot(grads, it) {
                        s[0] += g[k];
                    }
                }
            }
            Op::Index(x, idx) => {
                if let Some(s) = self.slot(grads, *x) {
                    s[*idx] += g[0];
                }
            }
            Op::Tanh(x) => {
                if let Some(s) = self.slot(grads, *x) {
                    for k in 0..g.len() {
                        s[k] += g[k] * (1.0 - y[k] * y[k]);
                    }
                }
            }
            Op::Sigmoid(x) => {
                if let Some(s) = self.slot(grads, *x) {
                    for k in 0..g.len() {
                        s[k] += g[k] * y[k] * (1.0 - y[k]);
                    }
                }
            }
            Op::Exp(x) => {
                if let Some(s) = self.slot(grads, *x) {
                    for k in 0..g.len() {
                        s[k] += g[k] * y[k];
                    }
                }
            }
            Op::Ln(x, floor) => {
                let xv = self.value(*x);
                if let Some(s) = self.slot(grads, *x) {
                    for k in 0..g.len() {
                        if xv[k] > *floor {
                            s[k] += g[k] / xv[k];
                        }
                    }
                }
            }
            Op::Recip(x) => {
                let xv = self.value(*x);
                if let Some(s) = self.slot(grads, *x) {
                    for k in 0..g.len() {
                        s[k] -= g[k] / (xv[k] * xv[k]);
                    }
                }
            }
            Op::Softmax(x) => {
                if let Some(s) = self.slot(grads, *x) {
                    let gy = math::dot(g, y);
                    for k in 0..g.len() {
                        s[k] += y[k] * (g[k] - gy);
                    }
                }
            }
            Op::Dot(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(s) = self.slot(grads, *a) {
                    s.iter_mut().zip(bv).for_each(|(s, b)| *s += g[0] * b);
                }
                if let Some(s) = self.slot(grads, *b) {
                    s.iter_mut().zip(av).for_each(|(s, a)| *s += g[0] * a);
                }
            }
            Op::Norm(x) => {
                let n = y[0];
                if n > 0.0 {
                    let xv = self.value(*x);
                    if let Some(s) = self.slot(grads, *x) {
                        s.iter_mut().zip(xv).for_each(|(s, x)| *s += g[0] * x / n);
                    }
                }
            }
            Op::Sum(x) => {
                if let Some(s) = self.slot(grads, *x) {
                    s.iter_mut().for_each(|s| *s += g[0]);
                }
            }
            Op::Mean(x) => {
                if let Some(s) = self.slot(grads, *x) {
                    let n = s.len() as f64;
                    s.iter_mut().for_each(|s| *s += g[0] / n);
                }
            }
            Op::Variance(x) => {
                let xv = self.value(*x);
                let m = math::mean(xv);
                let n = xv.len() as f64;
                if let Some(s) = self.slot(grads, *x) {
                    for k in 0..s.len() {
                        s[k] += g[0] * 2.0 * (xv[k] - m) / n;
                    }
                }
            }
            Op::Cosine { a, b, eps } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let na = math::norm(av);
                let nb = math::norm(bv);
                let (da, db) = (na + eps, nb + eps);
                let denom = da * db;
                let d = math::dot(av, bv);
                if let Some(s) = self.slot(grads, *a) {
                    for k in 0..s.len() {
                        let mut v = bv[k] / denom;
                        if na > 0.0 {
                            v -= d / (denom * da) * av[k] / na;
                        }
                        s[k] += g[0] * v;
                    }
                }
                if let Some(s) = self.slot(grads, *b) {
                    for k in 0..s.len() {
                        let mut v = av[k] / denom;
                        if nb > 0.0 {
                            v -= d / (denom * db) * bv[k] / nb;
                        }
                        s[k] += g[0] * v;
                    }
                }
            }
            Op::Max(x, idx) => {
                if let Some(s) = self.slot(grads, *x) {
                    s[*idx] += g[0];
                }
            }
            Op::WeightedSum { weights, items } => {
                if let Some(s) = self.slot(grads, *weights) {
                    for (k, &it) in items.iter().enumerate() {
                        s[k] += math::dot(g, self.value(it));
                    }
                }
                let wv = self.value(*weights);
                for (k, &it) in items.iter().enumerate() {
                    let w = wv[k];
                    if let Some(s) = self.slot(grads, it) {
                        s.iter_mut().zip(g).for_each(|(s, g)| *s += w * g);
                    }
                }
            }
            Op::MeanOf(items) => {
                let n = items.len() as f64;
                for &it in items {
                    if let Some(s) = self.slot(grads, it) {
                        s.iter_mut().zip(g).for_each(|(s, g)| *s += g / n);
                    }
                }
            }
        }
    }
}
