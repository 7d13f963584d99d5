//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every primitive applied during one forward pass. Calling
//! [`Graph::backward`] on a scalar walks the tape in reverse and returns the
//! adjoint of every node; [`Adjoints::accumulate_into`] then adds the parameter
//! adjoints to a [`ParamStore`]'s gradients.

use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param { store: u64, id: usize },
    EmbedRow { store: u64, id: usize, row: usize },
    MatVec(Var, Var),
    VecMat(Var, Var),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    Stack(Vec<Var>),
    Slice(Var, usize),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Softmax(Var),
    LogSoftmax(Var),
    MeanAxis(Var, usize),
    Sum(Var),
    Dot(Var, Var),
    Pick(Var, usize),
    Dropout(Var, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    training: bool,
}

impl Graph {
    /// `training` switches dropout on.
    pub fn new(training: bool) -> Self {
        Graph {
            nodes: Vec::with_capacity(1024),
            training,
        }
    }

    pub fn training(&self) -> bool {
        self.training
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// Same value, no gradient path back through it.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let value = store.value(id).clone();
        self.push(
            value,
            Op::Param {
                store: store.tag(),
                id: id.0,
            },
        )
    }

    /// Row `row` of a 2-D parameter, as a vector. Only that row receives gradient.
    pub fn embedding_lookup(&mut self, store: &ParamStore, id: ParamId, row: usize) -> Result<Var> {
        let table = store.value(id);
        if table.rank() != 2 || row >= table.rows() {
            return Err(Error::shape("embedding_lookup", table.shape(), &[row]));
        }
        let value = Tensor::vector(table.row(row).to_vec());
        Ok(self.push(
            value,
            Op::EmbedRow {
                store: store.tag(),
                id: id.0,
                row,
            },
        ))
    }

    /// `[r, c] x [c] -> [r]`
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (ws, xs) = (self.shape(w), self.shape(x));
        if ws.len() != 2 || xs.len() != 1 || ws[1] != xs[0] {
            return Err(Error::shape("matvec", ws, xs));
        }
        let (r, c) = (ws[0], ws[1]);
        let (wd, xd) = (self.data(w), self.data(x));
        let out: Vec<f64> = (0..r)
            .map(|i| dot(&wd[i * c..(i + 1) * c], xd))
            .collect();
        Ok(self.push(Tensor::vector(out), Op::MatVec(w, x)))
    }

    /// `[n] x [n, c] -> [c]`
    pub fn vecmat(&mut self, a: Var, m: Var) -> Result<Var> {
        let (as_, ms) = (self.shape(a), self.shape(m));
        if as_.len() != 1 || ms.len() != 2 || as_[0] != ms[0] {
            return Err(Error::shape("vecmat", as_, ms));
        }
        let (n, c) = (ms[0], ms[1]);
        let (ad, md) = (self.data(a), self.data(m));
        let mut out = vec![0.0; c];
        for i in 0..n {
            axpy(ad[i], &md[i * c..(i + 1) * c], &mut out);
        }
        Ok(self.push(Tensor::vector(out), Op::VecMat(a, m)))
    }

    /// `[r, k] x [k, c] -> [r, c]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (as_, bs) = (self.shape(a), self.shape(b));
        if as_.len() != 2 || bs.len() != 2 || as_[1] != bs[0] {
            return Err(Error::shape("matmul", as_, bs));
        }
        let (r, k, c) = (as_[0], as_[1], bs[1]);
        let (ad, bd) = (self.data(a), self.data(b));
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for p in 0..k {
                axpy(ad[i * k + p], &bd[p * c..(p + 1) * c], &mut out[i * c..(i + 1) * c]);
            }
        }
        let value = Tensor::matrix(r, c, out)?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(self.shape(a).to_vec(), data).expect("shape preserved")
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let data = self.data(a).iter().map(|&x| f(x)).collect();
        Tensor::new(self.shape(a).to_vec(), data).expect("shape preserved")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.zip_with(a, b, |x, y| x + y);
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.zip_with(a, b, |x, y| x - y);
        Ok(self.push(v, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.zip_with(a, b, |x, y| x * y);
        Ok(self.push(v, Op::Mul(a, b)))
    }

    /// Adds vector `v` to every row of matrix `m`.
    pub fn add_row(&mut self, m: Var, v: Var) -> Result<Var> {
        let (ms, vs) = (self.shape(m), self.shape(v));
        if ms.len() != 2 || vs.len() != 1 || ms[1] != vs[0] {
            return Err(Error::shape("add_row", ms, vs));
        }
        let c = ms[1];
        let vd = self.data(v).to_vec();
        let data = self
            .data(m)
            .iter()
            .enumerate()
            .map(|(i, &x)| x + vd[i % c])
            .collect();
        let value = Tensor::new(ms.to_vec(), data)?;
        Ok(self.push(value, Op::AddRow(m, v)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let v = self.map(a, |x| x * factor);
        self.push(v, Op::Scale(a, factor))
    }

    /// Concatenates vectors (or scalars) end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() > 1 {
                return Err(Error::shape("concat", self.shape(p), &[]));
            }
            out.extend_from_slice(self.data(p));
        }
        if out.is_empty() {
            return Err(Error::Numerics("concat of nothing".into()));
        }
        Ok(self.push(Tensor::vector(out), Op::Concat(parts.to_vec())))
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Numerics("stack of nothing".into()))?;
        let width = self.shape(*first).to_vec();
        let mut out = Vec::with_capacity(width.iter().product::<usize>() * rows.len());
        for &r in rows {
            if self.shape(r) != width.as_slice() || width.len() != 1 {
                return Err(Error::shape("stack", &width, self.shape(r)));
            }
            out.extend_from_slice(self.data(r));
        }
        let value = Tensor::matrix(rows.len(), width[0], out)?;
        Ok(self.push(value, Op::Stack(rows.to_vec())))
    }

    /// Elements `start..start + len` of a vector.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(a);
        if s.len() != 1 || start + len > s[0] || len == 0 {
            return Err(Error::shape("slice", s, &[start, len]));
        }
        let v = Tensor::vector(self.data(a)[start..start + len].to_vec());
        Ok(self.push(v, Op::Slice(a, start)))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.map(a, f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.map(a, sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.map(a, f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        if self.shape(a).len() != 1 {
            return Err(Error::shape("softmax", self.shape(a), &[]));
        }
        let v = Tensor::vector(softmax(self.data(a)));
        Ok(self.push(v, Op::Softmax(a)))
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        if self.shape(a).len() != 1 {
            return Err(Error::shape("log_softmax", self.shape(a), &[]));
        }
        let v = Tensor::vector(log_softmax(self.data(a)));
        Ok(self.push(v, Op::LogSoftmax(a)))
    }

    /// Mean of a matrix over `axis` (0: over rows, giving one value per column).
    pub fn mean_over_axis(&mut self, m: Var, axis: usize) -> Result<Var> {
        let s = self.shape(m);
        if s.len() != 2 || axis > 1 {
            return Err(Error::shape("mean_over_axis", s, &[axis]));
        }
        let (r, c) = (s[0], s[1]);
        let d = self.data(m);
        let out = if axis == 0 {
            let mut acc = vec![0.0; c];
            for i in 0..r {
                axpy(1.0, &d[i * c..(i + 1) * c], &mut acc);
            }
            acc.iter().map(|x| x / r as f64).collect()
        } else {
            (0..r)
                .map(|i| d[i * c..(i + 1) * c].iter().sum::<f64>() / c as f64)
                .collect()
        };
        Ok(self.push(Tensor::vector(out), Op::MeanAxis(m, axis)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.data(a).iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Inner product of two vectors, as a scalar.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("dot", a, b)?;
        let s = dot(self.data(a), self.data(b));
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b)))
    }

    /// Element `index` of a vector, as a scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        if self.shape(a).len() != 1 || index >= self.shape(a)[0] {
            return Err(Error::shape("pick", self.shape(a), &[index]));
        }
        let v = self.data(a)[index];
        Ok(self.push(Tensor::scalar(v), Op::Pick(a, index)))
    }

    /// Inverted dropout: in training mode zeroes each entry with probability
    /// `p` and scales survivors by `1/(1-p)`; identity otherwise.
    pub fn dropout(&mut self, a: Var, p: f64, rng: &mut impl Rng) -> Var {
        if !self.training || p <= 0.0 {
            return a;
        }
        let keep = 1.0 - p;
        let mask: Vec<f64> = (0..self.data(a).len())
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        self.masked_dropout(a, mask)
    }

    /// Multiplies by a fixed mask; the mask is part of the op, not a variable.
    pub fn masked_dropout(&mut self, a: Var, mask: Vec<f64>) -> Var {
        assert_eq!(mask.len(), self.data(a).len(), "dropout mask length");
        let data = self.data(a).iter().zip(&mask).map(|(x, m)| x * m).collect();
        let v = Tensor::new(self.shape(a).to_vec(), data).expect("shape preserved");
        self.push(v, Op::Dropout(a, mask))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Adjoints<'_>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Numerics(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            self.propagate(i, &g, &mut adj);
            adj[i] = Some(g);
        }
        Ok(Adjoints { adj, graph: self })
    }

    fn propagate(&self, i: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let y = node.value.data();
        match &node.op {
            Op::Constant | Op::Param { .. } | Op::EmbedRow { .. } => {}
            Op::MatVec(w, x) => {
                let (r, c) = (self.shape(*w)[0], self.shape(*w)[1]);
                let (wd, xd) = (self.data(*w), self.data(*x));
                let gw = slot(adj, *w, r * c);
                for k in 0..r {
                    axpy(g[k], xd, &mut gw[k * c..(k + 1) * c]);
                }
                let gx = slot(adj, *x, c);
                for k in 0..r {
                    axpy(g[k], &wd[k * c..(k + 1) * c], gx);
                }
            }
            Op::VecMat(a, m) => {
                let (n, c) = (self.shape(*m)[0], self.shape(*m)[1]);
                let (ad, md) = (self.data(*a), self.data(*m));
                let ga = slot(adj, *a, n);
                for k in 0..n {
                    ga[k] += dot(&md[k * c..(k + 1) * c], g);
                }
                let gm = slot(adj, *m, n * c);
                for k in 0..n {
                    axpy(ad[k], g, &mut gm[k * c..(k + 1) * c]);
                }
            }
            Op::MatMul(a, b) => {
                let (r, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let c = self.shape(*b)[1];
                let (ad, bd) = (self.data(*a), self.data(*b));
                let ga = slot(adj, *a, r * k);
                for i in 0..r {
                    for p in 0..k {
                        ga[i * k + p] += dot(&g[i * c..(i + 1) * c], &bd[p * c..(p + 1) * c]);
                    }
                }
                let gb = slot(adj, *b, k * c);
                for i in 0..r {
                    for p in 0..k {
                        axpy(ad[i * k + p], &g[i * c..(i + 1) * c], &mut gb[p * c..(p + 1) * c]);
                    }
                }
            }
            Op::Add(a, b) => {
                axpy(1.0, g, slot(adj, *a, g.len()));
                axpy(1.0, g, slot(adj, *b, g.len()));
            }
            Op::Sub(a, b) => {
                axpy(1.0, g, slot(adj, *a, g.len()));
                axpy(-1.0, g, slot(adj, *b, g.len()));
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.data(*a), self.data(*b));
                let ga = slot(adj, *a, g.len());
                for k in 0..g.len() {
                    ga[k] += g[k] * bd[k];
                }
                let gb = slot(adj, *b, g.len());
                for k in 0..g.len() {
                    gb[k] += g[k] * ad[k];
                }
            }
            Op::AddRow(m, v) => {
                let c = self.shape(*v)[0];
                axpy(1.0, g, slot(adj, *m, g.len()));
                let gv = slot(adj, *v, c);
                for row in g.chunks(c) {
                    axpy(1.0, row, gv);
                }
            }
            Op::Scale(a, f) => axpy(*f, g, slot(adj, *a, g.len())),
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let n = self.data(*p).len();
                    axpy(1.0, &g[off..off + n], slot(adj, *p, n));
                    off += n;
                }
            }
            Op::Stack(rows) => {
                let c = self.shape(rows[0])[0];
                for (k, r) in rows.iter().enumerate() {
                    axpy(1.0, &g[k * c..(k + 1) * c], slot(adj, *r, c));
                }
            }
            Op::Slice(a, start) => {
                let n = self.data(*a).len();
                let ga = slot(adj, *a, n);
                axpy(1.0, g, &mut ga[*start..*start + g.len()]);
            }
            Op::Tanh(a) => {
                let ga = slot(adj, *a, g.len());
                for k in 0..g.len() {
                    ga[k] += g[k] * (1.0 - y[k] * y[k]);
                }
            }
            Op::Sigmoid(a) => {
                let ga = slot(adj, *a, g.len());
                for k in 0..g.len() {
                    ga[k] += g[k] * y[k] * (1.0 - y[k]);
                }
            }
            Op::Exp(a) => {
                let ga = slot(adj, *a, g.len());
                for k in 0..g.len() {
                    ga[k] += g[k] * y[k];
                }
            }
            Op::Softmax(a) => {
                let gy = dot(g, y);
                let ga = slot(adj, *a, g.len());
                for k in 0..g.len() {
                    ga[k] += y[k] * (g[k] - gy);
                }
            }
            Op::LogSoftmax(a) => {
                let total: f64 = g.iter().sum();
                let ga = slot(adj, *a, g.len());
                for k in 0..g.len() {
                    ga[k] += g[k] - y[k].exp() * total;
                }
            }
            Op::MeanAxis(m, axis) => {
                let (r, c) = (self.shape(*m)[0], self.shape(*m)[1]);
                let gm = slot(adj, *m, r * c);
                if *axis == 0 {
                    for i in 0..r {
                        axpy(1.0 / r as f64, g, &mut gm[i * c..(i + 1) * c]);
                    }
                } else {
                    for i in 0..r {
                        for v in &mut gm[i * c..(i + 1) * c] {
                            *v += g[i] / c as f64;
                        }
                    }
                }
            }
            Op::Sum(a) => {
                let n = self.data(*a).len();
                for v in slot(adj, *a, n) {
                    *v += g[0];
                }
            }
            Op::Dot(a, b) => {
                let (ad, bd) = (self.data(*a), self.data(*b));
                axpy(g[0], bd, slot(adj, *a, ad.len()));
                axpy(g[0], ad, slot(adj, *b, bd.len()));
            }
            Op::Pick(a, index) => {
                let n = self.data(*a).len();
                slot(adj, *a, n)[*index] += g[0];
            }
            Op::Dropout(a, mask) => {
                let ga = slot(adj, *a, g.len());
                for k in 0..g.len() {
                    ga[k] += g[k] * mask[k];
                }
            }
        }
    }
}

fn slot(adj: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    adj[v.0].get_or_insert_with(|| vec![0.0; len])
}

/// Node adjoints from one reverse sweep.
pub struct Adjoints<'g> {
    adj: Vec<Option<Vec<f64>>>,
    graph: &'g Graph,
}

impl Adjoints<'_> {
    /// d(loss)/d(v); zeros when `v` does not influence the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        let shape = self.graph.shape(v).to_vec();
        match self.adj.get(v.0).and_then(|a| a.as_ref()) {
            Some(a) => Tensor::new(shape, a.clone()).expect("adjoint shape"),
            None => Tensor::zeros(&shape),
        }
    }

    /// Adds parameter adjoints to `store`'s gradients. Nodes owned by other
    /// stores are skipped.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        let tag = store.tag();
        for (i, node) in self.graph.nodes.iter().enumerate() {
            let Some(Some(g)) = self.adj.get(i) else { continue };
            match node.op {
                Op::Param { store: s, id } if s == tag => {
                    axpy(1.0, g, store.get_mut(ParamId(id)).grad.data_mut());
                }
                Op::EmbedRow { store: s, id, row } if s == tag => {
                    let grad = &mut store.get_mut(ParamId(id)).grad;
                    let c = grad.cols();
                    axpy(1.0, g, &mut grad.data_mut()[row * c..(row + 1) * c]);
                }
                _ => {}
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}
