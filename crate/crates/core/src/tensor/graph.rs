//! Dynamic reverse-mode tape.
//!
//! Every operation appends one node holding its output value and the rule to
//! push an upstream gradient back onto its operands. A fresh [`Graph`] is built
//! for each forward pass; [`Graph::backward`] sweeps the nodes in reverse
//! recording order, visiting each one once, and accumulates into the gradient
//! slots of leaves that require gradients.

use super::{Shape, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    Ln(Var),
    Abs(Var),
    Clamp(Var, f64, f64),
    Softmax(Var, usize),
    Sum(Var),
    Concat(Vec<Var>, usize),
    Reshape(Var),
    Select { x: Var, axis: usize, index: usize },
    Stack(Vec<Var>, usize),
    Repeat { x: Var, axis: usize, times: usize },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    /// Accumulated gradient; only kept for leaves.
    grad: Option<Vec<f64>>,
}

/// Append-only record of one forward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A leaf whose gradient is tracked.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf treated as a constant.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn dims(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.dims()
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let node = &self.nodes[v.0];
        node.grad
            .as_ref()
            .map(|g| Tensor::from_parts(node.value.shape().clone(), g.clone()))
    }

    /// Gradient of a leaf, zeros when no backward pass reached it.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor {
        self.grad(v).unwrap_or_else(|| {
            let shape = self.nodes[v.0].value.shape().clone();
            let n = shape.numel();
            Tensor::from_parts(shape, vec![0.0; n])
        })
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    // ---------------------------------------------------------------- ops

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ad, bd) = (self.dims(a), self.dims(b));
        if ad.len() != 2 || bd.len() != 2 || ad[1] != bd[0] {
            return Err(Error::dim("matmul", ad, bd));
        }
        let (m, n, p) = (ad[0], ad[1], bd[1]);
        let out = matmul_raw(self.value(a).data(), self.value(b).data(), m, n, p);
        let value = Tensor::from_parts(Shape::new(vec![m, p])?, out);
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    fn binary_shapes(&self, op: &'static str, a: Var, b: Var) -> Result<Shape> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa == sb || sb.is_scalar() {
            Ok(sa.clone())
        } else if sa.is_scalar() {
            Ok(sb.clone())
        } else {
            Err(Error::dim(op, sa.dims(), sb.dims()))
        }
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let shape = self.binary_shapes(name, a, b)?;
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        let n = shape.numel();
        let data = (0..n)
            .map(|i| f(va[broadcast_index(va, i)], vb[broadcast_index(vb, i)]))
            .collect();
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::from_parts(shape, data), op, rg))
    }

    /// Elementwise sum; a one-element operand is broadcast.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product; a one-element operand is broadcast.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(x);
        let data = value.data().iter().map(|&v| f(v)).collect();
        let out = Tensor::from_parts(value.shape().clone(), data);
        let rg = self.needs(&[x]);
        self.push(out, op, rg)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |v| v * c, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |v| v + c, Op::AddScalar(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    /// Natural logarithm.
    pub fn ln(&mut self, x: Var) -> Var {
        self.unary(x, f64::ln, Op::Ln(x))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, f64::abs, Op::Abs(x))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.unary(x, |v| v.clamp(lo, hi), Op::Clamp(x, lo, hi))
    }

    /// Softmax along `axis`, with the slice maximum subtracted before
    /// exponentiation.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let value = self.value(x);
        value.shape().check_axis("softmax", axis)?;
        if !value.is_finite() {
            return Err(Error::Numeric("softmax input is not finite".into()));
        }
        let (outer, len, inner) = value.shape().split_at_axis(axis);
        let src = value.data();
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |a: usize| o * len * inner + a * inner + i;
                let max = (0..len).map(|a| src[at(a)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for a in 0..len {
                    let e = (src[at(a)] - max).exp();
                    out[at(a)] = e;
                    total += e;
                }
                for a in 0..len {
                    out[at(a)] /= total;
                }
            }
        }
        let out = Tensor::from_parts(value.shape().clone(), out);
        let rg = self.needs(&[x]);
        Ok(self.push(out, Op::Softmax(x, axis), rg))
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().sum();
        let rg = self.needs(&[x]);
        self.push(Tensor::scalar(total), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).len() as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    /// Concatenates along an existing axis; all other extents must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat of empty list".into()))?;
        let base = self.value(first).shape().clone();
        base.check_axis("concat", axis)?;
        let mut total = 0;
        for &p in parts {
            let d = self.dims(p);
            let compatible = d.len() == base.rank()
                && d.iter()
                    .zip(base.dims())
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::dim("concat", base.dims(), d));
            }
            total += d[axis];
        }
        let mut dims = base.dims().to_vec();
        dims[axis] = total;
        let shape = Shape::new(dims)?;
        let (outer, _, inner) = shape.split_at_axis(axis);
        let mut data = Vec::with_capacity(shape.numel());
        for o in 0..outer {
            for &p in parts {
                let len = self.dims(p)[axis];
                let block = len * inner;
                data.extend_from_slice(&self.value(p).data()[o * block..(o + 1) * block]);
            }
        }
        let rg = self.needs(parts);
        Ok(self.push(Tensor::from_parts(shape, data), Op::Concat(parts.to_vec(), axis), rg))
    }

    pub fn reshape(&mut self, x: Var, dims: impl Into<Vec<usize>>) -> Result<Var> {
        let value = self.value(x).clone().reshape(dims)?;
        let rg = self.needs(&[x]);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// Rank-1 view of `x` in row-major order.
    pub fn flatten(&mut self, x: Var) -> Var {
        let n = self.value(x).len();
        self.reshape(x, vec![n]).expect("same element count")
    }

    /// Takes slice `index` along `axis`, dropping that axis.
    pub fn select(&mut self, x: Var, axis: usize, index: usize) -> Result<Var> {
        let shape = self.value(x).shape().clone();
        shape.check_axis("select", axis)?;
        let (outer, len, inner) = shape.split_at_axis(axis);
        if index >= len {
            return Err(Error::Contract(format!(
                "select: index {index} out of range for axis {axis} of {:?}",
                shape.dims()
            )));
        }
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let start = o * len * inner + index * inner;
            data.extend_from_slice(&src[start..start + inner]);
        }
        let mut dims = shape.dims().to_vec();
        dims.remove(axis);
        if dims.is_empty() {
            dims.push(1);
        }
        let rg = self.needs(&[x]);
        Ok(self.push(
            Tensor::from_parts(Shape::new(dims)?, data),
            Op::Select { x, axis, index },
            rg,
        ))
    }

    /// Stacks equal-shaped tensors along a new axis inserted at `axis`.
    pub fn stack(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("stack of empty list".into()))?;
        let base = self.value(first).shape().clone();
        if axis > base.rank() {
            return Err(Error::Contract(format!("stack: axis {axis} out of range")));
        }
        for &p in parts {
            if self.value(p).shape() != &base {
                return Err(Error::dim("stack", base.dims(), self.dims(p)));
            }
        }
        let outer: usize = base.dims()[..axis].iter().product();
        let inner: usize = base.dims()[axis..].iter().product();
        let mut data = Vec::with_capacity(outer * parts.len() * inner);
        for o in 0..outer {
            for &p in parts {
                data.extend_from_slice(&self.value(p).data()[o * inner..(o + 1) * inner]);
            }
        }
        let mut dims = base.dims().to_vec();
        dims.insert(axis, parts.len());
        let rg = self.needs(parts);
        Ok(self.push(
            Tensor::from_parts(Shape::new(dims)?, data),
            Op::Stack(parts.to_vec(), axis),
            rg,
        ))
    }

    /// Inserts a new axis of extent `times` at `axis`, copying `x` along it.
    /// This is the explicit replacement for broadcasting.
    pub fn repeat(&mut self, x: Var, axis: usize, times: usize) -> Result<Var> {
        let base = self.value(x).shape().clone();
        if axis > base.rank() || times == 0 {
            return Err(Error::Contract(format!(
                "repeat: axis {axis} times {times} invalid for {:?}",
                base.dims()
            )));
        }
        let outer: usize = base.dims()[..axis].iter().product();
        let inner: usize = base.dims()[axis..].iter().product();
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(outer * times * inner);
        for o in 0..outer {
            let block = &src[o * inner..(o + 1) * inner];
            for _ in 0..times {
                data.extend_from_slice(block);
            }
        }
        let mut dims = base.dims().to_vec();
        dims.insert(axis, times);
        let rg = self.needs(&[x]);
        Ok(self.push(
            Tensor::from_parts(Shape::new(dims)?, data),
            Op::Repeat { x, axis, times },
            rg,
        ))
    }

    // ----------------------------------------------------------- backward

    /// Backpropagates from a scalar loss, accumulating into leaf gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).shape().is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.dims(loss)
            )));
        }
        self.backward_seeded(&[(loss, Tensor::scalar(1.0))])
    }

    /// Backpropagates the given upstream gradients (vector-Jacobian product).
    /// Each seed must match the shape of its node.
    pub fn backward_seeded(&mut self, seeds: &[(Var, Tensor)]) -> Result<()> {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let mut last = 0;
        for (v, g) in seeds {
            if self.value(*v).shape() != g.shape() {
                return Err(Error::dim("backward seed", self.dims(*v), g.dims()));
            }
            if !g.is_finite() {
                return Err(Error::Numeric("non-finite backward seed".into()));
            }
            accumulate(&mut grads[v.0], g.data());
            last = last.max(v.0 + 1);
        }
        for i in (0..last).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                let slot = &mut self.nodes[i].grad;
                accumulate(slot, &g);
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let out = node.value.data();
        let wants = |v: &Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ad, bd) = (self.dims(*a), self.dims(*b));
                let (m, n, p) = (ad[0], ad[1], bd[1]);
                if wants(a) {
                    // g[m×p] · bᵀ[p×n]
                    let bv = self.value(*b).data();
                    let mut ga = vec![0.0; m * n];
                    for r in 0..m {
                        for k in 0..n {
                            let mut acc = 0.0;
                            for c in 0..p {
                                acc += g[r * p + c] * bv[k * p + c];
                            }
                            ga[r * n + k] = acc;
                        }
                    }
                    accumulate(&mut grads[a.0], &ga);
                }
                if wants(b) {
                    // aᵀ[n×m] · g[m×p]
                    let av = self.value(*a).data();
                    let mut gb = vec![0.0; n * p];
                    for r in 0..m {
                        for k in 0..n {
                            let s = av[r * n + k];
                            for c in 0..p {
                                gb[k * p + c] += s * g[r * p + c];
                            }
                        }
                    }
                    accumulate(&mut grads[b.0], &gb);
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if wants(a) {
                    self.reduce_into(*a, g.to_vec(), grads);
                }
                if wants(b) {
                    self.reduce_into(*b, g.iter().map(|v| sign * v).collect(), grads);
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                if wants(a) {
                    let ga = (0..g.len())
                        .map(|j| g[j] * vb[broadcast_index(vb, j)])
                        .collect();
                    self.reduce_into(*a, ga, grads);
                }
                if wants(b) {
                    let gb = (0..g.len())
                        .map(|j| g[j] * va[broadcast_index(va, j)])
                        .collect();
                    self.reduce_into(*b, gb, grads);
                }
            }
            Op::Scale(x, c) => {
                let gx: Vec<f64> = g.iter().map(|v| v * c).collect();
                accumulate(&mut grads[x.0], &gx);
            }
            Op::AddScalar(x) | Op::Reshape(x) => accumulate(&mut grads[x.0], g),
            Op::Tanh(x) => {
                let gx: Vec<f64> = g.iter().zip(out).map(|(g, y)| g * (1.0 - y * y)).collect();
                accumulate(&mut grads[x.0], &gx);
            }
            Op::Sigmoid(x) => {
                let gx: Vec<f64> = g.iter().zip(out).map(|(g, y)| g * y * (1.0 - y)).collect();
                accumulate(&mut grads[x.0], &gx);
            }
            Op::Ln(x) => {
                let xv = self.value(*x).data();
                let gx: Vec<f64> = g.iter().zip(xv).map(|(g, v)| g / v).collect();
                accumulate(&mut grads[x.0], &gx);
            }
            Op::Abs(x) => {
                let xv = self.value(*x).data();
                let gx: Vec<f64> = g
                    .iter()
                    .zip(xv)
                    .map(|(g, v)| if *v == 0.0 { 0.0 } else { g * v.signum() })
                    .collect();
                accumulate(&mut grads[x.0], &gx);
            }
            Op::Clamp(x, lo, hi) => {
                let xv = self.value(*x).data();
                let gx: Vec<f64> = g
                    .iter()
                    .zip(xv)
                    .map(|(g, v)| if v > lo && v < hi { *g } else { 0.0 })
                    .collect();
                accumulate(&mut grads[x.0], &gx);
            }
            Op::Softmax(x, axis) => {
                let (outer, len, inner) = node.value.shape().split_at_axis(*axis);
                let mut gx = vec![0.0; g.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |a: usize| o * len * inner + a * inner + i;
                        let dot: f64 = (0..len).map(|a| g[at(a)] * out[at(a)]).sum();
                        for a in 0..len {
                            gx[at(a)] = out[at(a)] * (g[at(a)] - dot);
                        }
                    }
                }
                accumulate(&mut grads[x.0], &gx);
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                accumulate(&mut grads[x.0], &vec![g[0]; n]);
            }
            Op::Concat(parts, axis) => {
                let (outer, total, inner) = node.value.shape().split_at_axis(*axis);
                let mut offset = 0;
                for p in parts {
                    let len = self.dims(*p)[*axis];
                    if wants(p) {
                        let mut gp = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let start = o * total * inner + offset * inner;
                            gp.extend_from_slice(&g[start..start + len * inner]);
                        }
                        accumulate(&mut grads[p.0], &gp);
                    }
                    offset += len;
                }
            }
            Op::Select { x, axis, index } => {
                let (outer, len, inner) = self.value(*x).shape().split_at_axis(*axis);
                let slot = grads[x.0].get_or_insert_with(|| vec![0.0; outer * len * inner]);
                for o in 0..outer {
                    let start = o * len * inner + index * inner;
                    for (d, s) in slot[start..start + inner]
                        .iter_mut()
                        .zip(&g[o * inner..(o + 1) * inner])
                    {
                        *d += s;
                    }
                }
            }
            Op::Stack(parts, axis) => {
                let base = self.value(parts[0]).dims();
                let outer: usize = base[..*axis].iter().product();
                let inner: usize = base[*axis..].iter().product();
                let n = parts.len();
                for (k, p) in parts.iter().enumerate() {
                    if !wants(p) {
                        continue;
                    }
                    let mut gp = Vec::with_capacity(outer * inner);
                    for o in 0..outer {
                        let start = (o * n + k) * inner;
                        gp.extend_from_slice(&g[start..start + inner]);
                    }
                    accumulate(&mut grads[p.0], &gp);
                }
            }
            Op::Repeat { x, axis, times } => {
                let base = self.dims(*x);
                let outer: usize = base[..*axis].iter().product();
                let inner: usize = base[*axis..].iter().product();
                let mut gx = vec![0.0; outer * inner];
                for o in 0..outer {
                    for r in 0..*times {
                        let start = (o * times + r) * inner;
                        for (d, s) in gx[o * inner..(o + 1) * inner]
                            .iter_mut()
                            .zip(&g[start..start + inner])
                        {
                            *d += s;
                        }
                    }
                }
                accumulate(&mut grads[x.0], &gx);
            }
        }
    }

    /// Routes an output-shaped gradient to operand `v`, summing it down when
    /// `v` was a broadcast scalar.
    fn reduce_into(&self, v: Var, g: Vec<f64>, grads: &mut [Option<Vec<f64>>]) {
        if self.value(v).len() == g.len() {
            accumulate(&mut grads[v.0], &g);
        } else {
            accumulate(&mut grads[v.0], &[g.iter().sum()]);
        }
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: &[f64]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g.to_vec()),
    }
}

#[inline]
fn broadcast_index(data: &[f64], i: usize) -> usize {
    if data.len() == 1 {
        0
    } else {
        i
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `a[m×n] · b[n×p]`, summing each output in ascending inner index from 0.0.
pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, n: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        let row = &mut out[i * p..(i + 1) * p];
        for k in 0..n {
            let s = a[i * n + k];
            for (o, bv) in row.iter_mut().zip(&b[k * p..(k + 1) * p]) {
                *o += s * bv;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(dims: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(dims.to_vec(), data.to_vec()).unwrap()
    }

    /// Triple-loop product, independent of `matmul_raw`.
    fn naive_matmul(a: &Tensor, b: &Tensor) -> Vec<f64> {
        let (m, n, p) = (a.dims()[0], a.dims()[1], b.dims()[1]);
        let mut out = Vec::new();
        for i in 0..m {
            for j in 0..p {
                let mut s = 0.0;
                for k in 0..n {
                    s += a.at(&[i, k]) * b.at(&[k, j]);
                }
                out.push(s);
            }
        }
        out
    }

    #[test]
    fn matmul_examples() {
        let mut g = Graph::new();
        let a = g.constant(t(&[2, 2], &[1., 2., 3., 4.]));
        let eye = g.constant(t(&[2, 2], &[1., 0., 0., 1.]));
        let col = g.constant(t(&[2, 1], &[5., 7.]));
        let ai = g.matmul(a, eye).unwrap();
        assert_eq!(g.value(ai).data(), &[1., 2., 3., 4.]);
        let ic = g.matmul(eye, col).unwrap();
        assert_eq!(g.value(ic).data(), &[5., 7.]);
        let ac = g.matmul(a, col).unwrap();
        assert_eq!(g.value(ac).data(), &[19., 43.]);
        assert_eq!(
            naive_matmul(g.value(a), g.value(col)),
            g.value(ac).data().to_vec()
        );
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(vec![2, 3]).unwrap());
        let b = g.constant(Tensor::zeros(vec![2, 3]).unwrap());
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn softmax_examples() {
        let mut g = Graph::new();
        let z = g.constant(t(&[3], &[0., 0., 0.]));
        let s = g.softmax(z, 0).unwrap();
        for v in g.value(s).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let big = g.constant(t(&[3], &[1000., 0., 0.]));
        let s = g.softmax(big, 0).unwrap();
        let d = g.value(s).data();
        assert!((d[0] - 1.0).abs() < 1e-12 && d[1] < 1e-12 && d[2] < 1e-12);
        let x = g.constant(t(&[3], &[1., 2., 3.]));
        let s = g.softmax(x, 0).unwrap();
        let expected = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219];
        for (v, e) in g.value(s).data().iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rejects_non_finite() {
        let mut g = Graph::new();
        let x = g.constant(t(&[2], &[f64::NAN, 0.]));
        assert!(matches!(g.softmax(x, 0), Err(Error::Numeric(_))));
    }

    #[test]
    fn elementwise_examples() {
        let mut g = Graph::new();
        let z = g.constant(t(&[1], &[0.]));
        let th = g.tanh(z);
        assert_eq!(g.value(th).data(), &[0.0]);
        let a = g.constant(t(&[3], &[1., 2., 3.]));
        let zero = g.constant(t(&[3], &[0., 0., 0.]));
        let p = g.mul(a, zero).unwrap();
        assert_eq!(g.value(p).data(), &[0., 0., 0.]);
        let wrong = g.constant(t(&[2], &[0., 0.]));
        assert!(g.add(a, wrong).is_err());
    }

    #[test]
    fn concat_and_flatten_layout() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(vec![2, 3]).unwrap());
        let b = g.constant(Tensor::full(vec![2, 5], 1.0).unwrap());
        let c = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.dims(c), &[2, 8]);
        assert_eq!(&g.value(c).data()[..8], &[0., 0., 0., 1., 1., 1., 1., 1.]);

        let data: Vec<f64> = (0..120).map(f64::from).collect();
        let x = g.constant(t(&[4, 5, 6], &data));
        let f = g.flatten(x);
        assert_eq!(g.dims(f), &[120]);
        for i in 0..4 {
            for j in 0..5 {
                for k in 0..6 {
                    assert_eq!(g.value(f).data()[i * 30 + j * 6 + k], g.value(x).at(&[i, j, k]));
                }
            }
        }
    }

    #[test]
    fn backward_examples() {
        let mut g = Graph::new();
        let x = g.param(t(&[3], &[1., 2., 3.]));
        let s = g.sum(x);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[1., 1., 1.]);

        let mut g = Graph::new();
        let x = g.param(t(&[3], &[1., 2., 3.]));
        let sq = g.mul(x, x).unwrap();
        let s = g.sum(sq);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[2., 4., 6.]);
    }

    #[test]
    fn backward_accumulates_until_zero_grad() {
        let mut g = Graph::new();
        let x = g.param(t(&[2], &[1., 2.]));
        let s = g.sum(x);
        g.backward(s).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[2., 2.]);
        g.zero_grad();
        assert!(g.grad(x).is_none());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let x = g.param(t(&[2], &[1., 2.]));
        let y = g.tanh(x);
        assert!(matches!(g.backward(y), Err(Error::Contract(_))));
    }

    #[test]
    fn select_stack_repeat_shapes() {
        let mut g = Graph::new();
        let data: Vec<f64> = (0..24).map(f64::from).collect();
        let x = g.constant(t(&[2, 3, 4], &data));
        let s = g.select(x, 1, 2).unwrap();
        assert_eq!(g.dims(s), &[2, 4]);
        assert_eq!(g.value(s).data(), &[8., 9., 10., 11., 20., 21., 22., 23.]);
        let parts: Vec<Var> = (0..3).map(|i| g.select(x, 1, i).unwrap()).collect();
        let back = g.stack(&parts, 1).unwrap();
        assert_eq!(g.value(back), g.value(x));
        let a = g.constant(t(&[2, 2], &[1., 2., 3., 4.]));
        let r = g.repeat(a, 2, 3).unwrap();
        assert_eq!(g.dims(r), &[2, 2, 3]);
        assert_eq!(&g.value(r).data()[..6], &[1., 1., 1., 2., 2., 2.]);
    }
}
