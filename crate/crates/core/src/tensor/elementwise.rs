//! Pointwise ops, reductions to a scalar, bias broadcast and softmax.

use super::graph::{BackwardCtx, BackwardOp, Graph, Var};
use super::{shape_str, Tensor};
use crate::error::{Error, Result};

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor {
        shape: t.shape.clone(),
        data: t.data.iter().map(|&v| f(v)).collect(),
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    }
}

struct Add;
impl BackwardOp for Add {
    fn name(&self) -> &'static str {
        "add"
    }
    fn backward(&self, _: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        vec![Some(g.clone()), Some(g.clone())]
    }
}

struct Sub;
impl BackwardOp for Sub {
    fn name(&self) -> &'static str {
        "sub"
    }
    fn backward(&self, _: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        vec![Some(g.clone()), Some(map(g, |v| -v))]
    }
}

struct Mul;
impl BackwardOp for Mul {
    fn name(&self) -> &'static str {
        "mul"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let (a, b) = (ctx.input(0), ctx.input(1));
        vec![
            ctx.needs_grad(0).then(|| zip(g, b, |g, b| g * b)),
            ctx.needs_grad(1).then(|| zip(g, a, |g, a| g * a)),
        ]
    }
}

struct Scale(f64);
impl BackwardOp for Scale {
    fn name(&self) -> &'static str {
        "scale"
    }
    fn backward(&self, _: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        vec![Some(map(g, |v| v * self.0))]
    }
}

struct AddBias;
impl BackwardOp for AddBias {
    fn name(&self) -> &'static str {
        "add_bias"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let n = ctx.input(1).len();
        let db = ctx.needs_grad(1).then(|| {
            let mut d = vec![0.0; n];
            for row in g.data.chunks(n) {
                for (acc, v) in d.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            Tensor::new(vec![n], d).unwrap()
        });
        vec![Some(g.clone()), db]
    }
}

struct LeakyRelu(f64);
impl BackwardOp for LeakyRelu {
    fn name(&self) -> &'static str {
        "leaky_relu"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let slope = self.0;
        vec![Some(zip(g, ctx.input(0), |g, x| if x >= 0.0 { g } else { g * slope }))]
    }
}

struct Sigmoid;
impl BackwardOp for Sigmoid {
    fn name(&self) -> &'static str {
        "sigmoid"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        vec![Some(zip(g, ctx.output(), |g, s| g * s * (1.0 - s)))]
    }
}

struct Sum;
impl BackwardOp for Sum {
    fn name(&self) -> &'static str {
        "sum"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        vec![Some(Tensor::full(ctx.input(0).shape(), g.data[0]))]
    }
}

/// Geometry of an axis reduction: `outer × axis × inner` view of a shape.
#[derive(Clone, Copy)]
pub(super) struct AxisView {
    pub outer: usize,
    pub len: usize,
    pub inner: usize,
}

impl AxisView {
    pub fn new(shape: &[usize], axis: usize) -> Self {
        Self {
            outer: shape[..axis].iter().product(),
            len: shape[axis],
            inner: shape[axis + 1..].iter().product(),
        }
    }

    pub fn index(&self, o: usize, k: usize, i: usize) -> usize {
        (o * self.len + k) * self.inner + i
    }
}

struct Softmax {
    axis: usize,
}
impl BackwardOp for Softmax {
    fn name(&self) -> &'static str {
        "softmax"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let y = ctx.output();
        let v = AxisView::new(y.shape(), self.axis);
        let mut dx = Tensor::zeros(y.shape());
        for o in 0..v.outer {
            for i in 0..v.inner {
                let dot: f64 = (0..v.len)
                    .map(|k| {
                        let j = v.index(o, k, i);
                        g.data[j] * y.data[j]
                    })
                    .sum();
                for k in 0..v.len {
                    let j = v.index(o, k, i);
                    dx.data[j] = y.data[j] * (g.data[j] - dot);
                }
            }
        }
        vec![Some(dx)]
    }
}

impl Graph {
    fn same_shape(&self, op: &str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(format!(
                "{op}: {} vs {}",
                shape_str(self.shape(a)),
                shape_str(self.shape(b))
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = zip(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.record(&[a, b], out, Add))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = zip(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.record(&[a, b], out, Sub))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = zip(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.record(&[a, b], out, Mul))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = map(self.value(a), |x| x * s);
        self.record(&[a], out, Scale(s))
    }

    /// Adds `bias: [n]` along the last axis of `x: [..., n]`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (sx, sb) = (self.shape(x), self.shape(bias));
        if sb.len() != 1 || sx.last() != Some(&sb[0]) {
            return Err(Error::dim(format!(
                "add_bias: {} + {}",
                shape_str(sx),
                shape_str(sb)
            )));
        }
        let n = sb[0];
        let mut out = self.value(x).clone();
        let b = self.value(bias).data();
        for row in out.data.chunks_mut(n) {
            for (v, bb) in row.iter_mut().zip(b) {
                *v += bb;
            }
        }
        Ok(self.record(&[x, bias], out, AddBias))
    }

    /// `x` for `x ≥ 0`, `slope·x` otherwise. The derivative at 0 is taken as 1.
    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let out = map(self.value(x), |v| if v >= 0.0 { v } else { slope * v });
        self.record(&[x], out, LeakyRelu(slope))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = map(self.value(x), |v| {
            if v >= 0.0 {
                1.0 / (1.0 + (-v).exp())
            } else {
                let e = v.exp();
                e / (1.0 + e)
            }
        });
        self.record(&[x], out, Sigmoid)
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data.iter().sum();
        self.record(&[x], Tensor::scalar(s), Sum)
    }

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::dim(format!(
                "softmax axis {axis} for shape {}",
                shape_str(&shape)
            )));
        }
        let out = softmax_values(self.value(x), axis);
        Ok(self.record(&[x], out, Softmax { axis }))
    }
}

pub(super) fn softmax_values(x: &Tensor, axis: usize) -> Tensor {
    let v = AxisView::new(x.shape(), axis);
    let mut out = Tensor::zeros(x.shape());
    for o in 0..v.outer {
        for i in 0..v.inner {
            let max = (0..v.len)
                .map(|k| x.data[v.index(o, k, i)])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for k in 0..v.len {
                let j = v.index(o, k, i);
                let e = (x.data[j] - max).exp();
                out.data[j] = e;
                total += e;
            }
            for k in 0..v.len {
                out.data[v.index(o, k, i)] /= total;
            }
        }
    }
    out
}
