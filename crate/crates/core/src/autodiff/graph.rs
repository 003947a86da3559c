//! Gradient tape.
//!
//! Every primitive appends a node holding its forward value; nodes are
//! therefore stored in topological order and `backward` is a single reverse
//! sweep. A graph is built per mini-batch and dropped afterwards.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use super::tensor::Tensor;
use crate::error::{Error, Result};

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// Identifies a trainable tensor: which parameter set it belongs to and its
/// position inside that set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamKey {
    pub set: u32,
    pub index: usize,
}

/// Handle to a node on a specific graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    graph: u64,
    idx: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// `x[B, in] · w[out, in]ᵀ (+ b[out])`
    Affine {
        x: usize,
        w: usize,
        b: Option<usize>,
    },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// Elementwise product with a constant of the same shape.
    MulConst(usize, Vec<f64>),
    Scale(usize, f64),
    Shift(usize),
    Gelu(usize),
    Sigmoid(usize),
    /// `[B, G·P] -> [B, G]`, mean over each contiguous group of `P` entries.
    GroupMean { a: usize, groups: usize },
    /// `a[B, G·P] ⊙ g[B, G]`, `g` broadcast across each group.
    GroupScale { a: usize, g: usize, groups: usize },
    /// Mean absolute deviation from a constant target; scalar output.
    L1 { a: usize, target: Vec<f64> },
    Sum(usize),
    Mean(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
    param: Option<ParamKey>,
}

/// Gradients keyed by parameter, in deterministic key order.
pub type Gradients = BTreeMap<ParamKey, Tensor>;

#[derive(Debug)]
pub struct Graph {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_K * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * GELU_K * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Subgradient of `|r|` with `sign(0) = 0`.
fn l1_sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four independent accumulators, fixed summation order
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Forward pass of an affine map on raw buffers; shared with inference paths
/// that do not need a tape.
pub fn affine_forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Tensor {
    let (rows, input) = (x.rows(), x.cols());
    let (out, w_in) = (w.rows(), w.cols());
    assert_eq!(input, w_in, "affine: input width {input} vs weight {w_in}");
    let mut y = vec![0.0; rows * out];
    let xv = x.values();
    let wv = w.values();
    for r in 0..rows {
        let xr = &xv[r * input..(r + 1) * input];
        let yr = &mut y[r * out..(r + 1) * out];
        for (o, yo) in yr.iter_mut().enumerate() {
            *yo = dot(xr, &wv[o * input..(o + 1) * input]);
        }
        if let Some(b) = b {
            for (yo, bo) in yr.iter_mut().zip(b.values()) {
                *yo += bo;
            }
        }
    }
    Tensor::matrix(rows, out, y).expect("affine output shape")
}

impl Graph {
    pub fn new() -> Self {
        Self {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            param: None,
        });
        Var {
            graph: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    fn idx(&self, v: Var) -> usize {
        assert_eq!(v.graph, self.id, "variable belongs to a different graph");
        v.idx
    }

    fn needs(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    /// Constant input; never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Trainable leaf whose gradient is reported under `key`.
    pub fn param(&mut self, value: Tensor, key: ParamKey) -> Var {
        let v = self.push(value, Op::Leaf, true);
        self.nodes[v.idx].param = Some(key);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[self.idx(v)].value
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let (xi, wi) = (self.idx(x), self.idx(w));
        let bi = b.map(|b| self.idx(b));
        let value = affine_forward(
            &self.nodes[xi].value,
            &self.nodes[wi].value,
            bi.map(|b| &self.nodes[b].value),
        );
        let needs = self.needs(xi) || self.needs(wi) || bi.is_some_and(|b| self.needs(b));
        self.push(value, Op::Affine { x: xi, w: wi, b: bi }, needs)
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> (usize, usize, Tensor) {
        let (ai, bi) = (self.idx(a), self.idx(b));
        let (av, bv) = (&self.nodes[ai].value, &self.nodes[bi].value);
        assert!(
            av.same_shape(bv),
            "elementwise op on shapes {:?} and {:?}",
            av.shape(),
            bv.shape()
        );
        let values = av
            .values()
            .iter()
            .zip(bv.values())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::new(av.shape().to_vec(), values).expect("binary op shape");
        (ai, bi, t)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (ai, bi, t) = self.binary(a, b, |x, y| x + y);
        let needs = self.needs(ai) || self.needs(bi);
        self.push(t, Op::Add(ai, bi), needs)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (ai, bi, t) = self.binary(a, b, |x, y| x - y);
        let needs = self.needs(ai) || self.needs(bi);
        self.push(t, Op::Sub(ai, bi), needs)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (ai, bi, t) = self.binary(a, b, |x, y| x * y);
        let needs = self.needs(ai) || self.needs(bi);
        self.push(t, Op::Mul(ai, bi), needs)
    }

    /// Elementwise product with a constant tensor (masks).
    pub fn mul_const(&mut self, a: Var, c: &Tensor) -> Var {
        let ai = self.idx(a);
        let av = &self.nodes[ai].value;
        assert!(av.same_shape(c), "mask shape {:?} vs {:?}", c.shape(), av.shape());
        let values = av.values().iter().zip(c.values()).map(|(x, m)| x * m).collect();
        let t = Tensor::new(av.shape().to_vec(), values).expect("mask shape");
        let needs = self.needs(ai);
        self.push(t, Op::MulConst(ai, c.values().to_vec()), needs)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let ai = self.idx(a);
        let t = self.nodes[ai].value.map(|x| x * k);
        let needs = self.needs(ai);
        self.push(t, Op::Scale(ai, k), needs)
    }

    pub fn shift(&mut self, a: Var, k: f64) -> Var {
        let ai = self.idx(a);
        let t = self.nodes[ai].value.map(|x| x + k);
        let needs = self.needs(ai);
        self.push(t, Op::Shift(ai), needs)
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let ai = self.idx(a);
        let t = self.nodes[ai].value.map(gelu);
        let needs = self.needs(ai);
        self.push(t, Op::Gelu(ai), needs)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let ai = self.idx(a);
        let t = self.nodes[ai].value.map(sigmoid);
        let needs = self.needs(ai);
        self.push(t, Op::Sigmoid(ai), needs)
    }

    pub fn group_mean(&mut self, a: Var, groups: usize) -> Var {
        let ai = self.idx(a);
        let av = &self.nodes[ai].value;
        let (rows, width) = (av.rows(), av.cols());
        assert!(groups > 0 && width % groups == 0, "width {width} not divisible into {groups} groups");
        let per = width / groups;
        let mut out = vec![0.0; rows * groups];
        for r in 0..rows {
            let row = av.row(r);
            for g in 0..groups {
                out[r * groups + g] = row[g * per..(g + 1) * per].iter().sum::<f64>() / per as f64;
            }
        }
        let t = Tensor::matrix(rows, groups, out).expect("group mean shape");
        let needs = self.needs(ai);
        self.push(t, Op::GroupMean { a: ai, groups }, needs)
    }

    pub fn group_scale(&mut self, a: Var, gate: Var, groups: usize) -> Var {
        let (ai, gi) = (self.idx(a), self.idx(gate));
        let (av, gv) = (&self.nodes[ai].value, &self.nodes[gi].value);
        let (rows, width) = (av.rows(), av.cols());
        assert_eq!(gv.rows(), rows, "gate rows");
        assert_eq!(gv.cols(), groups, "gate width");
        assert!(width % groups == 0, "width {width} not divisible into {groups} groups");
        let per = width / groups;
        let mut out = av.values().to_vec();
        for r in 0..rows {
            for g in 0..groups {
                let k = gv.values()[r * groups + g];
                for v in &mut out[r * width + g * per..r * width + (g + 1) * per] {
                    *v *= k;
                }
            }
        }
        let t = Tensor::new(av.shape().to_vec(), out).expect("group scale shape");
        let needs = self.needs(ai) || self.needs(gi);
        self.push(t, Op::GroupScale { a: ai, g: gi, groups }, needs)
    }

    /// `mean(|a - target|)` over every entry.
    pub fn l1_loss(&mut self, a: Var, target: &Tensor) -> Var {
        let ai = self.idx(a);
        let av = &self.nodes[ai].value;
        assert!(av.same_shape(target), "l1 target {:?} vs {:?}", target.shape(), av.shape());
        let n = av.len().max(1) as f64;
        let s: f64 = av.values().iter().zip(target.values()).map(|(x, t)| (x - t).abs()).sum();
        let needs = self.needs(ai);
        self.push(
            Tensor::scalar(s / n),
            Op::L1 {
                a: ai,
                target: target.values().to_vec(),
            },
            needs,
        )
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let ai = self.idx(a);
        let s = self.nodes[ai].value.values().iter().sum();
        let needs = self.needs(ai);
        self.push(Tensor::scalar(s), Op::Sum(ai), needs)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let ai = self.idx(a);
        let v = &self.nodes[ai].value;
        let s = v.values().iter().sum::<f64>() / v.len().max(1) as f64;
        let needs = self.needs(ai);
        self.push(Tensor::scalar(s), Op::Mean(ai), needs)
    }

    /// Reverse sweep from a scalar loss; returns `∂loss/∂θ` for every
    /// parameter leaf that the loss depends on.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.graph != self.id {
            return Err(Error::Structural(
                "loss variable was recorded on a different graph".into(),
            ));
        }
        let root = loss.idx;
        if root >= self.nodes.len() {
            return Err(Error::Structural("loss index outside tape".into()));
        }
        if !self.nodes[root].value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[root].value.shape()
            )));
        }

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root + 1];
        grads[root] = Some(vec![1.0]);

        for i in (0..=root).rev() {
            let Some(gy) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(gy);
                }
                Op::Affine { x, w, b } => {
                    let xv = &self.nodes[*x].value;
                    let wv = &self.nodes[*w].value;
                    let (rows, input, out) = (xv.rows(), xv.cols(), wv.rows());
                    if self.needs(*x) {
                        let mut gx = vec![0.0; rows * input];
                        for r in 0..rows {
                            let gxr = &mut gx[r * input..(r + 1) * input];
                            for o in 0..out {
                                let g = gy[r * out + o];
                                if g != 0.0 {
                                    axpy(g, &wv.values()[o * input..(o + 1) * input], gxr);
                                }
                            }
                        }
                        accumulate(&mut grads, *x, gx);
                    }
                    if self.needs(*w) {
                        let mut gw = vec![0.0; out * input];
                        for r in 0..rows {
                            let xr = xv.row(r);
                            for o in 0..out {
                                let g = gy[r * out + o];
                                if g != 0.0 {
                                    axpy(g, xr, &mut gw[o * input..(o + 1) * input]);
                                }
                            }
                        }
                        accumulate(&mut grads, *w, gw);
                    }
                    if let Some(b) = b {
                        if self.needs(*b) {
                            let mut gb = vec![0.0; out];
                            for r in 0..rows {
                                for o in 0..out {
                                    gb[o] += gy[r * out + o];
                                }
                            }
                            accumulate(&mut grads, *b, gb);
                        }
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, gy.clone());
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, gy);
                    }
                }
                Op::Sub(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, gy.clone());
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, gy.iter().map(|g| -g).collect());
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.nodes[*a].value.values(), self.nodes[*b].value.values());
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, gy.iter().zip(bv).map(|(g, y)| g * y).collect());
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, gy.iter().zip(av).map(|(g, x)| g * x).collect());
                    }
                }
                Op::MulConst(a, c) => {
                    accumulate(&mut grads, *a, gy.iter().zip(c).map(|(g, m)| g * m).collect());
                }
                Op::Scale(a, k) => {
                    accumulate(&mut grads, *a, gy.iter().map(|g| g * k).collect());
                }
                Op::Shift(a) => {
                    accumulate(&mut grads, *a, gy);
                }
                Op::Gelu(a) => {
                    let av = self.nodes[*a].value.values();
                    accumulate(&mut grads, *a, gy.iter().zip(av).map(|(g, &x)| g * gelu_grad(x)).collect());
                }
                Op::Sigmoid(a) => {
                    let yv = node.value.values();
                    accumulate(&mut grads, *a, gy.iter().zip(yv).map(|(g, &s)| g * s * (1.0 - s)).collect());
                }
                Op::GroupMean { a, groups } => {
                    let av = &self.nodes[*a].value;
                    let (rows, width) = (av.rows(), av.cols());
                    let per = width / groups;
                    let inv = 1.0 / per as f64;
                    let mut ga = vec![0.0; rows * width];
                    for r in 0..rows {
                        for g in 0..*groups {
                            let v = gy[r * groups + g] * inv;
                            for e in &mut ga[r * width + g * per..r * width + (g + 1) * per] {
                                *e = v;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::GroupScale { a, g, groups } => {
                    let av = &self.nodes[*a].value;
                    let gv = self.nodes[*g].value.values();
                    let (rows, width) = (av.rows(), av.cols());
                    let per = width / groups;
                    if self.needs(*a) {
                        let mut ga = gy.clone();
                        for r in 0..rows {
                            for k in 0..*groups {
                                let s = gv[r * groups + k];
                                for e in &mut ga[r * width + k * per..r * width + (k + 1) * per] {
                                    *e *= s;
                                }
                            }
                        }
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.needs(*g) {
                        let mut gg = vec![0.0; rows * groups];
                        for r in 0..rows {
                            for k in 0..*groups {
                                let lo = r * width + k * per;
                                gg[r * groups + k] = dot(&gy[lo..lo + per], &av.values()[lo..lo + per]);
                            }
                        }
                        accumulate(&mut grads, *g, gg);
                    }
                }
                Op::L1 { a, target } => {
                    let av = self.nodes[*a].value.values();
                    let scale = gy[0] / av.len().max(1) as f64;
                    accumulate(
                        &mut grads,
                        *a,
                        av.iter().zip(target).map(|(x, t)| scale * l1_sign(x - t)).collect(),
                    );
                }
                Op::Sum(a) => {
                    let n = self.nodes[*a].value.len();
                    accumulate(&mut grads, *a, vec![gy[0]; n]);
                }
                Op::Mean(a) => {
                    let n = self.nodes[*a].value.len();
                    accumulate(&mut grads, *a, vec![gy[0] / n.max(1) as f64; n]);
                }
            }
        }

        let mut out = Gradients::new();
        for (i, node) in self.nodes.iter().enumerate().take(root + 1) {
            if let (Some(key), Some(g)) = (node.param, grads[i].take()) {
                let t = Tensor::new(node.value.shape().to_vec(), g)?;
                match out.get_mut(&key) {
                    // the same parameter bound twice on one tape
                    Some(existing) => {
                        for (e, v) in existing.values_mut().iter_mut().zip(t.values()) {
                            *e += v;
                        }
                    }
                    None => {
                        out.insert(key, t);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], i: usize, g: Vec<f64>) {
    match &mut grads[i] {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(&g) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
