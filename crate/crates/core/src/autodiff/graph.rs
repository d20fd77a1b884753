//! Eager reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Graph`] records every operation as it is evaluated. Nodes are stored
//! in creation order, so inputs always precede their consumers and the
//! backward sweep is a single reverse pass over the node list.
//!
//! ```
//! use vigan::autodiff::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let x = g.param(Tensor::vector(vec![1.0, 2.0]).unwrap());
//! let sq = g.mul(x, x).unwrap();
//! let loss = g.sum(sq);
//! g.backward(loss).unwrap();
//! assert_eq!(g.grad(x).unwrap().data(), &[2.0, 4.0]);
//! ```

use super::tensor::Tensor;
use crate::error::{Result, ViganError};

/// Clamp applied to discriminator outputs before taking logarithms.
pub const LOG_EPS: f64 = 1e-7;

/// Handle to a node inside one [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    /// `a[m×n] + b[n]` broadcast over rows.
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine {
        src: Var,
        scale: f64,
    },
    Concat {
        a: Var,
        b: Var,
        outer: usize,
        chunk_a: usize,
        chunk_b: usize,
    },
    Slice {
        src: Var,
        outer: usize,
        chunk_src: usize,
        offset: usize,
        chunk_out: usize,
    },
    Relu(Var),
    Sigmoid(Var),
    Log(Var),
    Clamp {
        src: Var,
        lo: f64,
        hi: f64,
    },
    Sum(Var),
    Mean(Var),
    SqDiff {
        a: Var,
        b: Var,
        scale: f64,
    },
    AbsDiff {
        a: Var,
        b: Var,
        scale: f64,
    },
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    /// Some requires_grad leaf is reachable through this node's inputs.
    tracks: bool,
}

/// Operation record for one computation. Built eagerly per minibatch and
/// dropped after the gradients have been read.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad, requires_grad)
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Leaf that does not receive a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Smallest distance from the input of any non-smooth operation that
    /// depends on a trainable leaf to the point where it is not
    /// differentiable. Infinite when there is none.
    ///
    /// A finite-difference step much smaller than this stays on one side of
    /// every kink.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in self.nodes.iter().filter(|n| n.tracks) {
            match node.op {
                Op::Relu(src) => {
                    for &z in self.value(src).data() {
                        margin = margin.min(z.abs());
                    }
                }
                Op::Clamp { src, lo, hi } => {
                    for &z in self.value(src).data() {
                        margin = margin.min((z - lo).abs()).min((z - hi).abs());
                    }
                }
                Op::AbsDiff { a, b, .. } => {
                    for (p, q) in self.value(a).data().iter().zip(self.value(b).data()) {
                        margin = margin.min((p - q).abs());
                    }
                }
                _ => {}
            }
        }
        margin
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn scalar(&self, v: Var) -> Option<f64> {
        self.nodes[v.0].value.item()
    }

    /// Accumulated gradient of a `requires_grad` leaf, or `None` if no
    /// backward pass has reached it.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let node = &self.nodes[v.0];
        self.grads[v.0]
            .as_ref()
            .map(|g| Tensor::from_parts(node.value.shape().to_vec(), g.clone()))
    }

    /// Gradient of a leaf, zeros if backward never reached it.
    pub fn grad_or_zero(&self, v: Var) -> Tensor {
        self.grad(v).unwrap_or_else(|| {
            let shape = self.shape(v).to_vec();
            let n = self.value(v).len();
            Tensor::from_parts(shape, vec![0.0; n])
        })
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool, tracks: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            tracks,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn unary(&mut self, src: Var, value: Tensor, op: Op) -> Var {
        let tracks = self.nodes[src.0].tracks;
        self.push(value, op, false, tracks)
    }

    fn binary(&mut self, a: Var, b: Var, value: Tensor, op: Op) -> Var {
        let tracks = self.nodes[a.0].tracks || self.nodes[b.0].tracks;
        self.push(value, op, false, tracks)
    }

    fn tracks(&self, v: Var) -> bool {
        self.nodes[v.0].tracks
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(ViganError::shape("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        matmul_into(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
        );
        let value = Tensor::from_parts(vec![m, n], out);
        Ok(self.binary(a, b, value, Op::MatMul(a, b)))
    }

    fn zip_same(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(ViganError::shape(op, ta.shape(), tb.shape()));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(Tensor::from_parts(ta.shape().to_vec(), data))
    }

    /// Elementwise sum; `b` may also be a row vector broadcast over the
    /// leading axis of a matrix `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) == self.shape(b) {
            let value = self.zip_same("add", a, b, |x, y| x + y)?;
            return Ok(self.binary(a, b, value, Op::Add(a, b)));
        }
        let (sa, sb) = (self.shape(a), self.shape(b));
        let row_like = match sb {
            [n] => sa.len() == 2 && *n == sa[1],
            [1, n] => sa.len() == 2 && *n == sa[1],
            _ => false,
        };
        if !row_like {
            return Err(ViganError::shape("add", sa, sb));
        }
        let cols = sa[1];
        let bias = self.value(b).data();
        let data = self
            .value(a)
            .data()
            .chunks_exact(cols)
            .flat_map(|row| row.iter().zip(bias).map(|(x, y)| x + y))
            .collect();
        let value = Tensor::from_parts(sa.to_vec(), data);
        Ok(self.binary(a, b, value, Op::AddRow(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same("sub", a, b, |x, y| x - y)?;
        Ok(self.binary(a, b, value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same("mul", a, b, |x, y| x * y)?;
        Ok(self.binary(a, b, value, Op::Mul(a, b)))
    }

    /// `scale * src + shift`, elementwise.
    pub fn affine(&mut self, src: Var, scale: f64, shift: f64) -> Var {
        let t = self.value(src);
        let data = t.data().iter().map(|&x| scale * x + shift).collect();
        let value = Tensor::from_parts(t.shape().to_vec(), data);
        self.unary(src, value, Op::Affine { src, scale })
    }

    pub fn scale(&mut self, src: Var, factor: f64) -> Var {
        self.affine(src, factor, 0.0)
    }

    pub fn neg(&mut self, src: Var) -> Var {
        self.affine(src, -1.0, 0.0)
    }

    /// `1 - src`.
    pub fn one_minus(&mut self, src: Var) -> Var {
        self.affine(src, -1.0, 1.0)
    }

    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let compatible = sa.len() == sb.len()
            && axis < sa.len()
            && sa
                .iter()
                .zip(&sb)
                .enumerate()
                .all(|(i, (x, y))| i == axis || x == y);
        if !compatible {
            return Err(ViganError::shape("concat", &sa, &sb));
        }
        let outer: usize = sa[..axis].iter().product();
        let inner: usize = sa[axis + 1..].iter().product();
        let chunk_a = sa[axis] * inner;
        let chunk_b = sb[axis] * inner;
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(da.len() + db.len());
        for o in 0..outer {
            data.extend_from_slice(&da[o * chunk_a..(o + 1) * chunk_a]);
            data.extend_from_slice(&db[o * chunk_b..(o + 1) * chunk_b]);
        }
        let mut shape = sa;
        shape[axis] += sb[axis];
        let value = Tensor::from_parts(shape, data);
        Ok(self.binary(
            a,
            b,
            value,
            Op::Concat {
                a,
                b,
                outer,
                chunk_a,
                chunk_b,
            },
        ))
    }

    /// Contiguous range `start..end` along `axis`.
    pub fn slice(&mut self, src: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let shape = self.shape(src).to_vec();
        if axis >= shape.len() || start >= end || end > shape[axis] {
            return Err(ViganError::invalid(format!(
                "slice {start}..{end} on axis {axis} out of bounds for shape {shape:?}"
            )));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let chunk_src = shape[axis] * inner;
        let chunk_out = (end - start) * inner;
        let offset = start * inner;
        let d = self.value(src).data();
        let mut data = Vec::with_capacity(outer * chunk_out);
        for o in 0..outer {
            let base = o * chunk_src + offset;
            data.extend_from_slice(&d[base..base + chunk_out]);
        }
        let mut out_shape = shape;
        out_shape[axis] = end - start;
        let value = Tensor::from_parts(out_shape, data);
        Ok(self.unary(
            src,
            value,
            Op::Slice {
                src,
                outer,
                chunk_src,
                offset,
                chunk_out,
            },
        ))
    }

    fn map(&mut self, src: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(src);
        let data = t.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::from_parts(t.shape().to_vec(), data);
        self.unary(src, value, op)
    }

    pub fn relu(&mut self, src: Var) -> Var {
        self.map(src, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu(src))
    }

    pub fn sigmoid(&mut self, src: Var) -> Var {
        self.map(src, sigmoid, Op::Sigmoid(src))
    }

    /// Natural logarithm. Inputs must be strictly positive.
    pub fn log(&mut self, src: Var) -> Result<Var> {
        if let Some(bad) = self
            .value(src)
            .data()
            .iter()
            .find(|&&x| x.is_nan() || x <= 0.0)
        {
            return Err(ViganError::invalid(format!(
                "log of non-positive value {bad}"
            )));
        }
        Ok(self.map(src, f64::ln, Op::Log(src)))
    }

    pub fn clamp(&mut self, src: Var, lo: f64, hi: f64) -> Var {
        self.map(src, |x| x.clamp(lo, hi), Op::Clamp { src, lo, hi })
    }

    /// `log(clamp(src, LOG_EPS, 1 - LOG_EPS))`.
    pub fn log_prob(&mut self, src: Var) -> Var {
        let c = self.clamp(src, LOG_EPS, 1.0 - LOG_EPS);
        self.map(c, f64::ln, Op::Log(c))
    }

    pub fn sum(&mut self, src: Var) -> Var {
        let total = self.value(src).data().iter().sum();
        self.unary(src, Tensor::scalar(total), Op::Sum(src))
    }

    pub fn mean(&mut self, src: Var) -> Var {
        let t = self.value(src);
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        self.unary(src, Tensor::scalar(m), Op::Mean(src))
    }

    fn reduce_diff(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        scale: f64,
        square: bool,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(ViganError::shape(op, ta.shape(), tb.shape()));
        }
        let total: f64 = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| {
                if square {
                    (x - y) * (x - y)
                } else {
                    (x - y).abs()
                }
            })
            .sum();
        let value = Tensor::scalar(scale * total);
        let op = if square {
            Op::SqDiff { a, b, scale }
        } else {
            Op::AbsDiff { a, b, scale }
        };
        Ok(self.binary(a, b, value, op))
    }

    /// Mean of squared differences over all entries.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let n = self.value(pred).len() as f64;
        self.reduce_diff("mse_loss", pred, target, 1.0 / n, true)
    }

    /// Mean of absolute differences over all entries.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let n = self.value(pred).len() as f64;
        self.reduce_diff("l1_loss", pred, target, 1.0 / n, false)
    }

    /// Squared Euclidean distance per row, averaged over rows.
    pub fn row_sq_dist_mean(&mut self, pred: Var, target: Var) -> Result<Var> {
        let rows = self.value(pred).rows() as f64;
        self.reduce_diff("row_sq_dist_mean", pred, target, 1.0 / rows, true)
    }

    /// L1 distance per row, averaged over rows.
    pub fn row_l1_dist_mean(&mut self, pred: Var, target: Var) -> Result<Var> {
        let rows = self.value(pred).rows() as f64;
        self.reduce_diff("row_l1_dist_mean", pred, target, 1.0 / rows, false)
    }

    /// Propagates `d loss / d node` to every `requires_grad` leaf reachable
    /// from `loss`, adding into the existing accumulators.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(ViganError::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut local: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        local[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(upstream) = local[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.tracks {
                continue;
            }
            if node.requires_grad {
                match &mut self.grads[idx] {
                    Some(acc) => acc.iter_mut().zip(&upstream).for_each(|(a, g)| *a += g),
                    slot @ None => *slot = Some(upstream.clone()),
                }
            }
            self.propagate(idx, &upstream, &mut local);
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f64], local: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let out = node.value.data();
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(a), self.shape(b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                if self.tracks(a) {
                    let bd = self.value(b).data();
                    accumulate(local, a, self.value(a).len(), |da| {
                        // da = g · bᵀ
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            let drow = &mut da[i * k..(i + 1) * k];
                            for (p, d) in drow.iter_mut().enumerate() {
                                let brow = &bd[p * n..(p + 1) * n];
                                *d += dot(grow, brow);
                            }
                        }
                    });
                }
                if self.tracks(b) {
                    let ad = self.value(a).data();
                    accumulate(local, b, self.value(b).len(), |db| {
                        // db = aᵀ · g
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let s = ad[i * k + p];
                                if s == 0.0 {
                                    continue;
                                }
                                let drow = &mut db[p * n..(p + 1) * n];
                                drow.iter_mut().zip(grow).for_each(|(d, gv)| *d += s * gv);
                            }
                        }
                    });
                }
            }
            Op::Add(a, b) => {
                self.pass(local, a, g, 1.0);
                self.pass(local, b, g, 1.0);
            }
            Op::AddRow(a, b) => {
                self.pass(local, a, g, 1.0);
                if self.tracks(b) {
                    let cols = self.value(b).len();
                    accumulate(local, b, cols, |db| {
                        for row in g.chunks_exact(cols) {
                            db.iter_mut().zip(row).for_each(|(d, gv)| *d += gv);
                        }
                    });
                }
            }
            Op::Sub(a, b) => {
                self.pass(local, a, g, 1.0);
                self.pass(local, b, g, -1.0);
            }
            Op::Mul(a, b) => {
                if self.tracks(a) {
                    let bd = self.value(b).data();
                    accumulate(local, a, g.len(), |da| {
                        da.iter_mut()
                            .zip(g)
                            .zip(bd)
                            .for_each(|((d, gv), y)| *d += gv * y);
                    });
                }
                if self.tracks(b) {
                    let ad = self.value(a).data();
                    accumulate(local, b, g.len(), |db| {
                        db.iter_mut()
                            .zip(g)
                            .zip(ad)
                            .for_each(|((d, gv), x)| *d += gv * x);
                    });
                }
            }
            Op::Affine { src, scale } => self.pass(local, src, g, scale),
            Op::Concat {
                a,
                b,
                outer,
                chunk_a,
                chunk_b,
            } => {
                let width = chunk_a + chunk_b;
                if self.tracks(a) {
                    accumulate(local, a, outer * chunk_a, |da| {
                        for o in 0..outer {
                            let src = &g[o * width..o * width + chunk_a];
                            add_into(&mut da[o * chunk_a..(o + 1) * chunk_a], src);
                        }
                    });
                }
                if self.tracks(b) {
                    accumulate(local, b, outer * chunk_b, |db| {
                        for o in 0..outer {
                            let src = &g[o * width + chunk_a..(o + 1) * width];
                            add_into(&mut db[o * chunk_b..(o + 1) * chunk_b], src);
                        }
                    });
                }
            }
            Op::Slice {
                src,
                outer,
                chunk_src,
                offset,
                chunk_out,
            } => {
                if self.tracks(src) {
                    accumulate(local, src, outer * chunk_src, |ds| {
                        for o in 0..outer {
                            let base = o * chunk_src + offset;
                            add_into(
                                &mut ds[base..base + chunk_out],
                                &g[o * chunk_out..(o + 1) * chunk_out],
                            );
                        }
                    });
                }
            }
            Op::Relu(src) => {
                if self.tracks(src) {
                    let x = self.value(src).data();
                    accumulate(local, src, g.len(), |d| {
                        for ((d, gv), &xv) in d.iter_mut().zip(g).zip(x) {
                            if xv > 0.0 {
                                *d += gv;
                            }
                        }
                    });
                }
            }
            Op::Sigmoid(src) => {
                if self.tracks(src) {
                    accumulate(local, src, g.len(), |d| {
                        for ((d, gv), s) in d.iter_mut().zip(g).zip(out) {
                            *d += gv * s * (1.0 - s);
                        }
                    });
                }
            }
            Op::Log(src) => {
                if self.tracks(src) {
                    let x = self.value(src).data();
                    accumulate(local, src, g.len(), |d| {
                        d.iter_mut()
                            .zip(g)
                            .zip(x)
                            .for_each(|((d, gv), xv)| *d += gv / xv);
                    });
                }
            }
            Op::Clamp { src, lo, hi } => {
                if self.tracks(src) {
                    let x = self.value(src).data();
                    accumulate(local, src, g.len(), |d| {
                        for ((d, gv), &xv) in d.iter_mut().zip(g).zip(x) {
                            if (lo..=hi).contains(&xv) {
                                *d += gv;
                            }
                        }
                    });
                }
            }
            Op::Sum(src) => {
                if self.tracks(src) {
                    let n = self.value(src).len();
                    accumulate(local, src, n, |d| d.iter_mut().for_each(|v| *v += g[0]));
                }
            }
            Op::Mean(src) => {
                if self.tracks(src) {
                    let n = self.value(src).len();
                    let s = g[0] / n as f64;
                    accumulate(local, src, n, |d| d.iter_mut().for_each(|v| *v += s));
                }
            }
            Op::SqDiff { a, b, scale } => {
                let c = 2.0 * scale * g[0];
                self.diff_grad(local, a, b, |x, y| c * (x - y));
            }
            Op::AbsDiff { a, b, scale } => {
                let c = scale * g[0];
                self.diff_grad(local, a, b, |x, y| c * sign(x - y));
            }
        }
    }

    fn pass(&self, local: &mut [Option<Vec<f64>>], to: Var, g: &[f64], factor: f64) {
        if !self.tracks(to) {
            return;
        }
        accumulate(local, to, g.len(), |d| {
            if factor == 1.0 {
                add_into(d, g);
            } else {
                d.iter_mut().zip(g).for_each(|(d, gv)| *d += factor * gv);
            }
        });
    }

    fn diff_grad(
        &self,
        local: &mut [Option<Vec<f64>>],
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) {
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let n = ad.len();
        if self.tracks(a) {
            accumulate(local, a, n, |d| {
                for ((d, x), y) in d.iter_mut().zip(ad).zip(bd) {
                    *d += f(*x, *y);
                }
            });
        }
        if self.tracks(b) {
            accumulate(local, b, n, |d| {
                for ((d, x), y) in d.iter_mut().zip(ad).zip(bd) {
                    *d -= f(*x, *y);
                }
            });
        }
    }
}

fn accumulate(local: &mut [Option<Vec<f64>>], to: Var, len: usize, f: impl FnOnce(&mut [f64])) {
    let slot = local[to.0].get_or_insert_with(|| vec![0.0; len]);
    f(slot);
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += a[m×k] · b[k×n]`, row-major.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let s = a[i * k + p];
            if s == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            orow.iter_mut().zip(brow).for_each(|(o, bv)| *o += s * bv);
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn scalar_matmul_and_gradient() {
        let mut g = Graph::new();
        let a = g.param(t(&[1, 1], &[2.0]));
        let b = g.param(t(&[1, 1], &[3.0]));
        let out = g.matmul(a, b).unwrap();
        assert_eq!(g.value(out).data(), &[6.0]);
        g.backward(out).unwrap();
        assert_eq!(g.grad(a).unwrap().data(), &[3.0]);
        assert_eq!(g.grad(b).unwrap().data(), &[2.0]);
    }

    #[test]
    fn kink_margin_tracks_only_parameter_paths() {
        let mut g = Graph::new();
        let c = g.constant(t(&[2], &[0.0, 1e-9]));
        g.relu(c);
        assert_eq!(g.kink_margin(), f64::INFINITY);
        let p = g.param(t(&[2], &[0.3, -0.05]));
        let r = g.relu(p);
        assert_eq!(g.kink_margin(), 0.05);
        let target = g.constant(t(&[2], &[0.31, 0.5]));
        g.l1_loss(r, target).unwrap();
        assert!((g.kink_margin() - 0.01).abs() < 1e-12);
        g.clamp(p, 0.0, 0.299);
        assert!((g.kink_margin() - 0.001).abs() < 1e-12);
    }

    #[test]
    fn identity_matmul_is_noop() {
        let m: Vec<f64> = (0..9).map(|i| i as f64 * 0.7 - 2.0).collect();
        let mut g = Graph::new();
        let i3 = g.constant(Tensor::identity(3).unwrap());
        let mm = g.constant(t(&[3, 3], &m));
        let out = g.matmul(i3, mm).unwrap();
        assert_eq!(g.value(out).data(), m.as_slice());
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(t(&[2, 3], &[0.0; 6]));
        let b = g.constant(t(&[2, 3], &[0.0; 6]));
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn concat_slice_round_trip() {
        let mut g = Graph::new();
        let a = g.constant(t(&[2], &[1.0, 2.0]));
        let b = g.constant(t(&[1], &[3.0]));
        let c = g.concat(a, b, 0).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 2.0, 3.0]);
        let s = g.slice(c, 0, 0, 2).unwrap();
        assert_eq!(g.value(s).data(), &[1.0, 2.0]);
    }

    #[test]
    fn concat_along_columns() {
        let mut g = Graph::new();
        let a = g.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let b = g.constant(t(&[2, 1], &[5.0, 6.0]));
        let c = g.concat(a, b, 1).unwrap();
        assert_eq!(g.shape(c), &[2, 3]);
        assert_eq!(g.value(c).data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let back = g.slice(c, 1, 0, 2).unwrap();
        assert_eq!(g.value(back), g.value(a));
        assert!(g.slice(c, 1, 2, 4).is_err());
        assert!(g.concat(a, b, 0).is_err());
    }

    #[test]
    fn self_subtraction_is_zero() {
        let mut g = Graph::new();
        let a = g.constant(t(&[3], &[1.5, -2.0, 7.0]));
        let d = g.sub(a, a).unwrap();
        assert!(g.value(d).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_and_sigmoid_values() {
        let mut g = Graph::new();
        let x = g.param(t(&[3], &[-1.0, 2.0, 0.0]));
        let r = g.relu(x);
        assert_eq!(g.value(r).data(), &[0.0, 2.0, 0.0]);
        let s = g.sigmoid(x);
        assert_eq!(g.value(s).data()[2], 0.5);
        // subgradient at zero
        let loss = g.sum(r);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[0.0, 1.0, 0.0]);

        let mut g = Graph::new();
        let z = g.param(Tensor::scalar(0.0));
        let s = g.sigmoid(z);
        g.backward(s).unwrap();
        assert_eq!(g.grad(z).unwrap().data(), &[0.25]);
    }

    #[test]
    fn losses_by_hand() {
        let mut g = Graph::new();
        let v = g.constant(t(&[2], &[0.3, -0.8]));
        let mse = g.mse_loss(v, v).unwrap();
        assert_eq!(g.scalar(mse), Some(0.0));

        let p = g.param(t(&[2], &[1.0, -1.0]));
        let z = g.constant(t(&[2], &[0.0, 0.0]));
        let l1 = g.l1_loss(p, z).unwrap();
        assert_eq!(g.scalar(l1), Some(1.0));

        let half = g.constant(t(&[2], &[0.5, 0.5]));
        let lg = g.log(half).unwrap();
        let total = g.sum(lg);
        assert!((g.scalar(total).unwrap() + 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn l1_sign_at_zero_is_zero() {
        let mut g = Graph::new();
        let p = g.param(t(&[2], &[0.0, 1.0]));
        let z = g.constant(t(&[2], &[0.0, 0.0]));
        let l1 = g.l1_loss(p, z).unwrap();
        g.backward(l1).unwrap();
        assert_eq!(g.grad(p).unwrap().data(), &[0.0, 0.5]);
    }

    #[test]
    fn log_rejects_non_positive() {
        let mut g = Graph::new();
        let x = g.constant(t(&[2], &[0.5, 0.0]));
        assert!(g.log(x).is_err());
        let safe = g.log_prob(x);
        assert!(g.value(safe).is_finite());
    }

    #[test]
    fn backward_identity_and_square() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(4.0));
        g.backward(x).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[1.0]);

        let mut g = Graph::new();
        let x = g.param(t(&[2], &[1.0, 2.0]));
        let sq = g.mul(x, x).unwrap();
        let loss = g.sum(sq);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn backward_twice_doubles_then_resets() {
        let mut g = Graph::new();
        let x = g.param(t(&[2], &[1.0, 2.0]));
        let sq = g.mul(x, x).unwrap();
        let loss = g.sum(sq);
        g.backward(loss).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[4.0, 8.0]);
        g.zero_grad();
        assert!(g.grad(x).is_none());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let x = g.param(t(&[2], &[1.0, 2.0]));
        assert!(g.backward(x).is_err());
    }

    #[test]
    fn bias_broadcast_gradient_sums_rows() {
        let mut g = Graph::new();
        let a = g.param(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let b = g.param(t(&[2], &[10.0, 20.0]));
        let s = g.add(a, b).unwrap();
        assert_eq!(g.value(s).data(), &[11.0, 22.0, 13.0, 24.0]);
        let loss = g.sum(s);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(b).unwrap().data(), &[2.0, 2.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut g = Graph::new();
        let c = g.constant(Tensor::scalar(3.0));
        let x = g.param(Tensor::scalar(2.0));
        let y = g.mul(c, x).unwrap();
        g.backward(y).unwrap();
        assert!(g.grad(c).is_none());
        assert_eq!(g.grad(x).unwrap().data(), &[3.0]);
    }
}
