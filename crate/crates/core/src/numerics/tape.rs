use std::cell::RefCell;

use rand::Rng;

use super::kernels::{matmul_acc, matmul_nt_acc, matmul_tn_acc, transpose};
use super::tensor::{broadcast_shape, split_axis, BroadcastMap};
use super::{Scalar, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
    Maximum,
}

#[derive(Clone, Copy, Debug)]
enum Unary {
    Exp,
    Log,
    Sqrt,
    Relu,
    Sigmoid,
    Tanh,
}

enum Op<T> {
    Leaf,
    Binary {
        kind: Binary,
        a: usize,
        b: usize,
        map_a: BroadcastMap,
        map_b: BroadcastMap,
    },
    Unary {
        kind: Unary,
        x: usize,
    },
    Affine {
        x: usize,
        scale: T,
    },
    MatMul {
        a: usize,
        b: usize,
    },
    Transpose {
        x: usize,
    },
    Reshape {
        x: usize,
    },
    Broadcast {
        x: usize,
        map: BroadcastMap,
    },
    SumAxis {
        x: usize,
        axis: usize,
        mean: bool,
    },
    SumAll {
        x: usize,
        mean: bool,
    },
    MaxAxis {
        x: usize,
        argmax: Vec<usize>,
    },
    Concat {
        xs: Vec<usize>,
        axis: usize,
    },
    Slice {
        x: usize,
        axis: usize,
        start: usize,
    },
    Softmax {
        x: usize,
        axis: usize,
    },
    LayerNorm {
        x: usize,
        axis: usize,
        inv_std: Vec<T>,
    },
    Mask {
        x: usize,
        mask: Vec<T>,
    },
    PairwiseDistance {
        x: usize,
        eps: T,
    },
    TripletHinge {
        d: usize,
        labels: Vec<i64>,
        margin: T,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Records operations for one forward pass.
pub struct Tape<T: Scalar> {
    nodes: RefCell<Vec<Node<T>>>,
    check_finite: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Scalar> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T: Scalar> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

impl<T: Scalar> Tape<T> {
    /// New tape; non-finite checks are on in debug builds.
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            check_finite: cfg!(debug_assertions),
        }
    }

    pub fn with_finite_checks(mut self, on: bool) -> Self {
        self.check_finite = on;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Constant input; no gradient is tracked.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(value, Op::Leaf, false)
    }

    /// Differentiable input.
    pub fn param(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(value, Op::Leaf, true)
    }

    pub fn scalar(&self, value: T) -> Var<'_, T> {
        self.constant(Tensor::scalar(value))
    }

    fn push(&self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var<'_, T> {
        if self.check_finite {
            assert!(value.is_finite(), "non-finite value produced by {:?}", op_name(&op));
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, needs_grad });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn needs(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].needs_grad)
    }

    /// Concatenation along `axis`; all other dimensions must agree.
    pub fn concat<'t>(&'t self, xs: &[Var<'t, T>], axis: usize) -> Result<Var<'t, T>> {
        let first = xs
            .first()
            .ok_or_else(|| Error::Validation("concat of nothing".into()))?;
        let base = first.shape();
        if axis >= base.len() {
            return Err(Error::shape("concat", &base, &[axis]));
        }
        let value = {
            let nodes = self.nodes.borrow();
            let mut total = 0;
            for x in xs {
                let s = nodes[x.id].value.shape();
                if s.len() != base.len() || s.iter().zip(&base).enumerate().any(|(d, (a, b))| d != axis && a != b) {
                    return Err(Error::shape("concat", &base, s));
                }
                total += s[axis];
            }
            let mut shape = base.clone();
            shape[axis] = total;
            let (outer, _, inner) = split_axis(&shape, axis);
            let mut data = Vec::with_capacity(shape.iter().product());
            for o in 0..outer {
                for x in xs {
                    let v = &nodes[x.id].value;
                    let chunk = v.shape()[axis] * inner;
                    data.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
                }
            }
            Tensor::new(shape, data)?
        };
        let ids: Vec<usize> = xs.iter().map(|x| x.id).collect();
        let needs = self.needs(&ids);
        Ok(self.push(value, Op::Concat { xs: ids, axis }, needs))
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self, output: Var<'_, T>) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let out = output.id;
        if nodes[out].value.len() != 1 {
            return Err(Error::shape("backward", nodes[out].value.shape(), &[1]));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[out] = Some(vec![T::one()]);
        for id in (0..=out).rev() {
            let node = &nodes[id];
            if !node.needs_grad {
                grads[id] = None;
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            backprop(&nodes, id, &g, &mut grads);
        }
        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn op_name<T>(op: &Op<T>) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Binary { .. } => "binary",
        Op::Unary { .. } => "unary",
        Op::Affine { .. } => "affine",
        Op::MatMul { .. } => "matmul",
        Op::Transpose { .. } => "transpose",
        Op::Reshape { .. } => "reshape",
        Op::Broadcast { .. } => "broadcast",
        Op::SumAxis { .. } => "sum_axis",
        Op::SumAll { .. } => "sum",
        Op::MaxAxis { .. } => "max_axis",
        Op::Concat { .. } => "concat",
        Op::Slice { .. } => "slice",
        Op::Softmax { .. } => "softmax",
        Op::LayerNorm { .. } => "layer_norm",
        Op::Mask { .. } => "dropout",
        Op::PairwiseDistance { .. } => "pairwise_distance",
        Op::TripletHinge { .. } => "triplet_hinge",
    }
}

/// Adds `f`'s contribution into the gradient slot of `id`.
fn acc<T: Scalar>(nodes: &[Node<T>], grads: &mut [Option<Vec<T>>], id: usize, f: impl FnOnce(&mut [T])) {
    if !nodes[id].needs_grad {
        return;
    }
    let slot = grads[id].get_or_insert_with(|| vec![T::zero(); nodes[id].value.len()]);
    f(slot);
}

fn backprop<T: Scalar>(nodes: &[Node<T>], id: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
    let node = &nodes[id];
    let y = node.value.data();
    match &node.op {
        Op::Leaf => {}
        Op::Binary {
            kind,
            a,
            b,
            map_a,
            map_b,
        } => {
            let av = nodes[*a].value.data();
            let bv = nodes[*b].value.data();
            let kind = *kind;
            acc(nodes, grads, *a, |ga| {
                for (i, &gi) in g.iter().enumerate() {
                    let (ia, ib) = (map_a.index(i), map_b.index(i));
                    let d = match kind {
                        Binary::Add | Binary::Sub => gi,
                        Binary::Mul => gi * bv[ib],
                        Binary::Div => gi / bv[ib],
                        Binary::Maximum => {
                            if av[ia] >= bv[ib] {
                                gi
                            } else {
                                T::zero()
                            }
                        }
                    };
                    ga[ia] = ga[ia] + d;
                }
            });
            acc(nodes, grads, *b, |gb| {
                for (i, &gi) in g.iter().enumerate() {
                    let (ia, ib) = (map_a.index(i), map_b.index(i));
                    let d = match kind {
                        Binary::Add => gi,
                        Binary::Sub => -gi,
                        Binary::Mul => gi * av[ia],
                        Binary::Div => -gi * av[ia] / (bv[ib] * bv[ib]),
                        Binary::Maximum => {
                            if av[ia] >= bv[ib] {
                                T::zero()
                            } else {
                                gi
                            }
                        }
                    };
                    gb[ib] = gb[ib] + d;
                }
            });
        }
        Op::Unary { kind, x } => {
            let xv = nodes[*x].value.data();
            let kind = *kind;
            acc(nodes, grads, *x, |gx| {
                for i in 0..g.len() {
                    let d = match kind {
                        Unary::Exp => y[i],
                        Unary::Log => T::one() / xv[i],
                        Unary::Sqrt => T::of(0.5) / y[i],
                        Unary::Relu => {
                            if xv[i] > T::zero() {
                                T::one()
                            } else {
                                T::zero()
                            }
                        }
                        Unary::Sigmoid => y[i] * (T::one() - y[i]),
                        Unary::Tanh => T::one() - y[i] * y[i],
                    };
                    gx[i] = gx[i] + g[i] * d;
                }
            });
        }
        Op::Affine { x, scale } => acc(nodes, grads, *x, |gx| {
            for (gx, &gi) in gx.iter_mut().zip(g) {
                *gx = *gx + gi * *scale;
            }
        }),
        Op::MatMul { a, b } => {
            let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
            let (m, k, n) = (av.rows(), av.cols(), bv.cols());
            acc(nodes, grads, *a, |ga| matmul_nt_acc(g, bv.data(), ga, m, n, k));
            acc(nodes, grads, *b, |gb| matmul_tn_acc(av.data(), g, gb, m, k, n));
        }
        Op::Transpose { x } => {
            let s = node.value.shape();
            let gt = transpose(g, s[0], s[1]);
            acc(nodes, grads, *x, |gx| add_into(gx, &gt));
        }
        Op::Reshape { x } => acc(nodes, grads, *x, |gx| add_into(gx, g)),
        Op::Broadcast { x, map } => acc(nodes, grads, *x, |gx| {
            for (i, &gi) in g.iter().enumerate() {
                let j = map.index(i);
                gx[j] = gx[j] + gi;
            }
        }),
        Op::SumAxis { x, axis, mean } => {
            let (outer, dim, inner) = split_axis(nodes[*x].value.shape(), *axis);
            let k = if *mean { T::one() / T::of(dim as f64) } else { T::one() };
            acc(nodes, grads, *x, |gx| {
                for o in 0..outer {
                    for d in 0..dim {
                        for i in 0..inner {
                            let gi = &mut gx[(o * dim + d) * inner + i];
                            *gi = *gi + g[o * inner + i] * k;
                        }
                    }
                }
            });
        }
        Op::SumAll { x, mean } => {
            let len = nodes[*x].value.len();
            let k = if *mean { g[0] / T::of(len as f64) } else { g[0] };
            acc(nodes, grads, *x, |gx| gx.iter_mut().for_each(|v| *v = *v + k));
        }
        Op::MaxAxis { x, argmax } => acc(nodes, grads, *x, |gx| {
            for (&src, &gi) in argmax.iter().zip(g) {
                gx[src] = gx[src] + gi;
            }
        }),
        Op::Concat { xs, axis } => {
            let (outer, total, inner) = split_axis(node.value.shape(), *axis);
            let mut offset = 0;
            for &x in xs {
                let dim = nodes[x].value.shape()[*axis];
                acc(nodes, grads, x, |gx| {
                    for o in 0..outer {
                        let src = &g[(o * total + offset) * inner..(o * total + offset + dim) * inner];
                        add_into(&mut gx[o * dim * inner..(o + 1) * dim * inner], src);
                    }
                });
                offset += dim;
            }
        }
        Op::Slice { x, axis, start } => {
            let (outer, full, inner) = split_axis(nodes[*x].value.shape(), *axis);
            let len = node.value.shape()[*axis];
            acc(nodes, grads, *x, |gx| {
                for o in 0..outer {
                    let dst = &mut gx[(o * full + start) * inner..(o * full + start + len) * inner];
                    add_into(dst, &g[o * len * inner..(o + 1) * len * inner]);
                }
            });
        }
        Op::Softmax { x, axis } => {
            let x = *x;
            let (outer, dim, inner) = split_axis(node.value.shape(), *axis);
            acc(nodes, grads, x, |gx| {
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |d: usize| (o * dim + d) * inner + i;
                        let s: T = (0..dim).map(|d| g[at(d)] * y[at(d)]).sum();
                        for d in 0..dim {
                            let j = at(d);
                            gx[j] = gx[j] + y[j] * (g[j] - s);
                        }
                    }
                }
            });
        }
        Op::LayerNorm { x, axis, inv_std } => {
            let (outer, dim, inner) = split_axis(node.value.shape(), *axis);
            let nd = T::of(dim as f64);
            acc(nodes, grads, *x, |gx| {
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |d: usize| (o * dim + d) * inner + i;
                        let r = inv_std[o * inner + i];
                        let mean_g: T = (0..dim).map(|d| g[at(d)]).sum::<T>() / nd;
                        let mean_gy: T = (0..dim).map(|d| g[at(d)] * y[at(d)]).sum::<T>() / nd;
                        for d in 0..dim {
                            let j = at(d);
                            gx[j] = gx[j] + r * (g[j] - mean_g - y[j] * mean_gy);
                        }
                    }
                }
            });
        }
        Op::Mask { x, mask } => acc(nodes, grads, *x, |gx| {
            for i in 0..g.len() {
                gx[i] = gx[i] + g[i] * mask[i];
            }
        }),
        Op::PairwiseDistance { x, eps } => {
            let xv = &nodes[*x].value;
            let (n, d) = (xv.rows(), xv.cols());
            acc(nodes, grads, *x, |gx| {
                for i in 0..n {
                    for j in (i + 1)..n {
                        let dist = y[i * n + j];
                        let coef = (g[i * n + j] + g[j * n + i]) / dist.max(*eps);
                        if coef == T::zero() {
                            continue;
                        }
                        for c in 0..d {
                            let diff = (xv.data()[i * d + c] - xv.data()[j * d + c]) * coef;
                            gx[i * d + c] = gx[i * d + c] + diff;
                            gx[j * d + c] = gx[j * d + c] - diff;
                        }
                    }
                }
            });
        }
        Op::TripletHinge { d, labels, margin } => {
            let dv = nodes[*d].value.data();
            let n = labels.len();
            let g0 = g[0];
            acc(nodes, grads, *d, |gd| {
                for i in 0..n {
                    for j in 0..n {
                        if j == i || labels[j] != labels[i] {
                            continue;
                        }
                        let base = dv[i * n + j] + *margin;
                        for k in 0..n {
                            if labels[k] == labels[i] {
                                continue;
                            }
                            if base - dv[i * n + k] > T::zero() {
                                gd[i * n + j] = gd[i * n + j] + g0;
                                gd[i * n + k] = gd[i * n + k] - g0;
                            }
                        }
                    }
                }
            });
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

/// Gradients of one backward pass, looked up by the [`Var`] they belong to.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var<'_, T>) -> Option<&[T]> {
        self.grads.get(var.id).and_then(|g| g.as_deref())
    }

    /// Gradient as a tensor shaped like `var`; zeros when `var` did not
    /// influence the output.
    pub fn wrt(&self, var: Var<'_, T>) -> Tensor<T> {
        let shape = self.shapes[var.id].clone();
        match self.get(var) {
            Some(g) => Tensor::new(shape, g.to_vec()).expect("gradient shape"),
            None => Tensor::zeros(shape),
        }
    }
}

// Fallible shape-checked ops, so not the std operator traits.
#[allow(clippy::should_implement_trait)]
impl<'t, T: Scalar> Var<'t, T> {
    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn value(&self) -> Tensor<T> {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor<T>) -> R) -> R {
        f(&self.tape.nodes.borrow()[self.id].value)
    }

    /// First element; the value of a scalar.
    pub fn item(&self) -> T {
        self.with_value(|v| v.item())
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].needs_grad
    }

    fn same_tape(&self, other: &Var<'t, T>) {
        assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
    }

    fn binary(self, other: Var<'t, T>, kind: Binary, name: &'static str) -> Result<Self> {
        self.same_tape(&other);
        let (value, map_a, map_b) = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
            let shape =
                broadcast_shape(a.shape(), b.shape()).ok_or_else(|| Error::shape(name, a.shape(), b.shape()))?;
            let map_a = BroadcastMap::new(a.shape(), &shape);
            let map_b = BroadcastMap::new(b.shape(), &shape);
            let len: usize = shape.iter().product();
            let (ad, bd) = (a.data(), b.data());
            let data: Vec<T> = (0..len)
                .map(|i| {
                    let (x, y) = (ad[map_a.index(i)], bd[map_b.index(i)]);
                    match kind {
                        Binary::Add => x + y,
                        Binary::Sub => x - y,
                        Binary::Mul => x * y,
                        Binary::Div => x / y,
                        Binary::Maximum => {
                            if x >= y {
                                x
                            } else {
                                y
                            }
                        }
                    }
                })
                .collect();
            (Tensor::new(shape, data)?, map_a, map_b)
        };
        let needs = self.tape.needs(&[self.id, other.id]);
        Ok(self.tape.push(
            value,
            Op::Binary {
                kind,
                a: self.id,
                b: other.id,
                map_a,
                map_b,
            },
            needs,
        ))
    }

    pub fn add(self, other: Var<'t, T>) -> Result<Self> {
        self.binary(other, Binary::Add, "add")
    }

    pub fn sub(self, other: Var<'t, T>) -> Result<Self> {
        self.binary(other, Binary::Sub, "sub")
    }

    pub fn mul(self, other: Var<'t, T>) -> Result<Self> {
        self.binary(other, Binary::Mul, "mul")
    }

    pub fn div(self, other: Var<'t, T>) -> Result<Self> {
        self.binary(other, Binary::Div, "div")
    }

    /// Elementwise maximum; ties send the gradient to `self`.
    pub fn maximum(self, other: Var<'t, T>) -> Result<Self> {
        self.binary(other, Binary::Maximum, "maximum")
    }

    fn unary(self, kind: Unary) -> Self {
        let value = self.with_value(|v| {
            let data = v
                .data()
                .iter()
                .map(|&x| match kind {
                    Unary::Exp => x.exp(),
                    Unary::Log => x.ln(),
                    Unary::Sqrt => x.sqrt(),
                    Unary::Relu => x.max(T::zero()),
                    Unary::Sigmoid => T::one() / (T::one() + (-x).exp()),
                    Unary::Tanh => x.tanh(),
                })
                .collect();
            Tensor::new(v.shape().to_vec(), data).expect("same shape")
        });
        let needs = self.requires_grad();
        self.tape.push(value, Op::Unary { kind, x: self.id }, needs)
    }

    pub fn exp(self) -> Self {
        self.unary(Unary::Exp)
    }

    pub fn log(self) -> Self {
        self.unary(Unary::Log)
    }

    pub fn sqrt(self) -> Self {
        self.unary(Unary::Sqrt)
    }

    pub fn relu(self) -> Self {
        self.unary(Unary::Relu)
    }

    pub fn sigmoid(self) -> Self {
        self.unary(Unary::Sigmoid)
    }

    pub fn tanh(self) -> Self {
        self.unary(Unary::Tanh)
    }

    /// `scale * x + offset`.
    pub fn affine(self, scale: T, offset: T) -> Self {
        let value = self.with_value(|v| {
            let data = v.data().iter().map(|&x| scale * x + offset).collect();
            Tensor::new(v.shape().to_vec(), data).expect("same shape")
        });
        let needs = self.requires_grad();
        self.tape.push(value, Op::Affine { x: self.id, scale }, needs)
    }

    pub fn scale(self, k: T) -> Self {
        self.affine(k, T::zero())
    }

    pub fn add_scalar(self, k: T) -> Self {
        self.affine(T::one(), k)
    }

    pub fn neg(self) -> Self {
        self.affine(-T::one(), T::zero())
    }

    /// Matrix product of `[m, k]` and `[k, n]`.
    pub fn matmul(self, other: Var<'t, T>) -> Result<Self> {
        self.same_tape(&other);
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
            if a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows() {
                return Err(Error::shape("matmul", a.shape(), b.shape()));
            }
            let (m, k, n) = (a.rows(), a.cols(), b.cols());
            let mut c = vec![T::zero(); m * n];
            matmul_acc(a.data(), b.data(), &mut c, m, k, n);
            Tensor::new(vec![m, n], c)?
        };
        let needs = self.tape.needs(&[self.id, other.id]);
        Ok(self.tape.push(
            value,
            Op::MatMul {
                a: self.id,
                b: other.id,
            },
            needs,
        ))
    }

    /// Transpose of a matrix.
    pub fn transpose(self) -> Result<Self> {
        let value = self.with_value(|v| {
            if v.rank() != 2 {
                return Err(Error::shape("transpose", v.shape(), &[2]));
            }
            Tensor::new(vec![v.cols(), v.rows()], transpose(v.data(), v.rows(), v.cols()))
        })?;
        let needs = self.requires_grad();
        Ok(self.tape.push(value, Op::Transpose { x: self.id }, needs))
    }

    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let value = self.value().reshaped(shape)?;
        let needs = self.requires_grad();
        Ok(self.tape.push(value, Op::Reshape { x: self.id }, needs))
    }

    pub fn broadcast_to(self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        let (value, map) = self.with_value(|v| {
            match broadcast_shape(v.shape(), &shape) {
                Some(s) if s == shape => {}
                _ => return Err(Error::shape("broadcast", v.shape(), &shape)),
            }
            let map = BroadcastMap::new(v.shape(), &shape);
            let len: usize = shape.iter().product();
            let data = (0..len).map(|i| v.data()[map.index(i)]).collect();
            Ok((Tensor::new(shape.clone(), data)?, map))
        })?;
        let needs = self.requires_grad();
        Ok(self.tape.push(value, Op::Broadcast { x: self.id, map }, needs))
    }

    fn check_axis(&self, axis: usize, op: &'static str) -> Result<Vec<usize>> {
        let shape = self.shape();
        if axis >= shape.len() {
            return Err(Error::shape(op, &shape, &[axis]));
        }
        Ok(shape)
    }

    fn reduce_axis(self, axis: usize, mean: bool) -> Result<Self> {
        let shape = self.check_axis(axis, "sum_axis")?;
        let (outer, dim, inner) = split_axis(&shape, axis);
        let value = self.with_value(|v| {
            let x = v.data();
            let mut out = vec![T::zero(); outer * inner];
            for o in 0..outer {
                for d in 0..dim {
                    for i in 0..inner {
                        out[o * inner + i] = out[o * inner + i] + x[(o * dim + d) * inner + i];
                    }
                }
            }
            if mean {
                let k = T::one() / T::of(dim as f64);
                out.iter_mut().for_each(|v| *v = *v * k);
            }
            let mut s = shape.clone();
            s.remove(axis);
            Tensor::new(s, out)
        })?;
        let needs = self.requires_grad();
        Ok(self.tape.push(value, Op::SumAxis { x: self.id, axis, mean }, needs))
    }

    /// Sum over `axis`, removing it.
    pub fn sum_axis(self, axis: usize) -> Result<Self> {
        self.reduce_axis(axis, false)
    }

    pub fn mean_axis(self, axis: usize) -> Result<Self> {
        self.reduce_axis(axis, true)
    }

    fn reduce_all(self, mean: bool) -> Self {
        let value = self.with_value(|v| {
            let s: T = v.data().iter().copied().sum();
            let s = if mean && !v.is_empty() {
                s / T::of(v.len() as f64)
            } else {
                s
            };
            Tensor::scalar(s)
        });
        let needs = self.requires_grad();
        self.tape.push(value, Op::SumAll { x: self.id, mean }, needs)
    }

    pub fn sum(self) -> Self {
        self.reduce_all(false)
    }

    pub fn mean(self) -> Self {
        self.reduce_all(true)
    }

    /// Maximum over `axis`, removing it; the first maximal element takes the
    /// gradient.
    pub fn max_axis(self, axis: usize) -> Result<Self> {
        let shape = self.check_axis(axis, "max_axis")?;
        if shape[axis] == 0 {
            return Err(Error::shape("max_axis", &shape, &[axis]));
        }
        let (outer, dim, inner) = split_axis(&shape, axis);
        let (value, argmax) = self.with_value(|v| {
            let x = v.data();
            let mut out = Vec::with_capacity(outer * inner);
            let mut arg = Vec::with_capacity(outer * inner);
            for o in 0..outer {
                for i in 0..inner {
                    let mut best = (o * dim) * inner + i;
                    for d in 1..dim {
                        let j = (o * dim + d) * inner + i;
                        if x[j] > x[best] {
                            best = j;
                        }
                    }
                    out.push(x[best]);
                    arg.push(best);
                }
            }
            let mut s = shape.clone();
            s.remove(axis);
            Ok::<_, Error>((Tensor::new(s, out)?, arg))
        })?;
        let needs = self.requires_grad();
        Ok(self.tape.push(value, Op::MaxAxis { x: self.id, argmax }, needs))
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn slice(self, axis: usize, start: usize, len: usize) -> Result<Self> {
        let shape = self.check_axis(axis, "slice")?;
        if start + len > shape[axis] {
            return Err(Error::shape("slice", &shape, &[start, start + len]));
        }
        let (outer, full, inner) = split_axis(&shape, axis);
        let value = self.with_value(|v| {
            let mut data = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                data.extend_from_slice(&v.data()[(o * full + start) * inner..(o * full + start + len) * inner]);
            }
            let mut s = shape.clone();
            s[axis] = len;
            Tensor::new(s, data)
        })?;
        let needs = self.requires_grad();
        Ok(self.tape.push(
            value,
            Op::Slice {
                x: self.id,
                axis,
                start,
            },
            needs,
        ))
    }

    /// Softmax along `axis`, stabilized by subtracting the maximum.
    pub fn softmax(self, axis: usize) -> Result<Self> {
        let shape = self.check_axis(axis, "softmax")?;
        let (outer, dim, inner) = split_axis(&shape, axis);
        let value = self.with_value(|v| {
            let x = v.data();
            let mut out = vec![T::zero(); x.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let at = |d: usize| (o * dim + d) * inner + i;
                    let m = (0..dim).map(|d| x[at(d)]).fold(T::neg_infinity(), T::max);
                    let mut s = T::zero();
                    for d in 0..dim {
                        let e = (x[at(d)] - m).exp();
                        out[at(d)] = e;
                        s = s + e;
                    }
                    for d in 0..dim {
                        out[at(d)] = out[at(d)] / s;
                    }
                }
            }
            Tensor::new(shape.clone(), out)
        })?;
        let needs = self.requires_grad();
        Ok(self.tape.push(value, Op::Softmax { x: self.id, axis }, needs))
    }

    /// Normalizes to zero mean and unit variance along `axis` (biased
    /// variance, `eps` added inside the square root). No affine part.
    pub fn layer_norm(self, axis: usize, eps: T) -> Result<Self> {
        let shape = self.check_axis(axis, "layer_norm")?;
        let (outer, dim, inner) = split_axis(&shape, axis);
        let nd = T::of(dim as f64);
        let (value, inv_std) = self.with_value(|v| {
            let x = v.data();
            let mut out = vec![T::zero(); x.len()];
            let mut inv = Vec::with_capacity(outer * inner);
            for o in 0..outer {
                for i in 0..inner {
                    let at = |d: usize| (o * dim + d) * inner + i;
                    let mean = (0..dim).map(|d| x[at(d)]).sum::<T>() / nd;
                    let var = (0..dim).map(|d| (x[at(d)] - mean).powi(2)).sum::<T>() / nd;
                    let r = T::one() / (var + eps).sqrt();
                    for d in 0..dim {
                        out[at(d)] = (x[at(d)] - mean) * r;
                    }
                    inv.push(r);
                }
            }
            Ok::<_, Error>((Tensor::new(shape.clone(), out)?, inv))
        })?;
        let needs = self.requires_grad();
        Ok(self.tape.push(
            value,
            Op::LayerNorm {
                x: self.id,
                axis,
                inv_std,
            },
            needs,
        ))
    }

    /// Inverted dropout. Identity when `p == 0` or outside training.
    pub fn dropout<R: Rng + ?Sized>(self, p: f64, train: bool, rng: &mut R) -> Self {
        if !train || p <= 0.0 {
            return self;
        }
        let keep = T::of(1.0 / (1.0 - p));
        let len = self.with_value(|v| v.len());
        let mask: Vec<T> = (0..len)
            .map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep })
            .collect();
        let value = self.with_value(|v| {
            let data = v.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
            Tensor::new(v.shape().to_vec(), data).expect("same shape")
        });
        let needs = self.requires_grad();
        self.tape.push(value, Op::Mask { x: self.id, mask }, needs)
    }

    /// Euclidean distances between the rows of an `[n, d]` matrix. The
    /// derivative divides by `max(d_ij, eps)`, so coincident rows get a zero
    /// gradient instead of a singular one.
    pub fn pairwise_distances(self, eps: T) -> Result<Self> {
        let value = self.with_value(|v| {
            if v.rank() != 2 {
                return Err(Error::shape("pairwise_distances", v.shape(), &[2]));
            }
            let (n, d) = (v.rows(), v.cols());
            let x = v.data();
            let mut out = vec![T::zero(); n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut s = T::zero();
                    for c in 0..d {
                        let diff = x[i * d + c] - x[j * d + c];
                        s = s + diff * diff;
                    }
                    let dist = s.sqrt();
                    out[i * n + j] = dist;
                    out[j * n + i] = dist;
                }
            }
            Tensor::new(vec![n, n], out)
        })?;
        let needs = self.requires_grad();
        Ok(self.tape.push(value, Op::PairwiseDistance { x: self.id, eps }, needs))
    }

    /// Sum of the triplet hinge `d_ij - d_ik + margin` over every non-easy
    /// triplet of the `[n, n]` distance matrix: `i ~ j`, `i != j`, `i !~ k`
    /// and `d_ij + margin >= d_ik`. Returns the sum and the number of such
    /// triplets. Triplets sitting exactly on the hinge count but pass no
    /// gradient.
    pub fn triplet_hinge_sum(self, labels: &[i64], margin: T) -> Result<(Self, usize)> {
        let (value, count) = self.with_value(|v| {
            let n = labels.len();
            if v.shape() != [n, n] {
                return Err(Error::shape("triplet_hinge_sum", v.shape(), &[n, n]));
            }
            let (sum, count) = hinge_sum(v.data(), labels, margin);
            Ok((Tensor::scalar(sum), count))
        })?;
        let needs = self.requires_grad();
        let var = self.tape.push(
            value,
            Op::TripletHinge {
                d: self.id,
                labels: labels.to_vec(),
                margin,
            },
            needs,
        );
        Ok((var, count))
    }

    /// Row `i` of a matrix as a `[1, cols]` matrix.
    pub fn row(self, i: usize) -> Result<Self> {
        self.slice(0, i, 1)
    }

    /// Dot product of two equal-length vectors; convenience over mul + sum.
    pub fn dot(self, other: Var<'t, T>) -> Result<Self> {
        let same = self.shape() == other.shape();
        if !same {
            return Err(Error::shape("dot", &self.shape(), &other.shape()));
        }
        Ok(self.mul(other)?.sum())
    }
}

pub(crate) fn hinge_sum<T: Scalar>(d: &[T], labels: &[i64], margin: T) -> (T, usize) {
    let n = labels.len();
    let mut sum = T::zero();
    let mut count = 0;
    let negatives: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&k| labels[k] != labels[i]).collect())
        .collect();
    for i in 0..n {
        let row = &d[i * n..(i + 1) * n];
        for j in 0..n {
            if j == i || labels[j] != labels[i] {
                continue;
            }
            let base = row[j] + margin;
            for &k in &negatives[i] {
                let v = base - row[k];
                if v >= T::zero() {
                    sum = sum + v;
                    count += 1;
                }
            }
        }
    }
    (sum, count)
}
