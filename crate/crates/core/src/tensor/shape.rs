//! Reshape, permute, slicing and mean reductions.

use super::elementwise::AxisView;
use super::graph::{BackwardCtx, BackwardOp, Graph, Var};
use super::{shape_str, Tensor};
use crate::error::{Error, Result};

struct Reshape;
impl BackwardOp for Reshape {
    fn name(&self) -> &'static str {
        "reshape"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        vec![Some(g.clone().reshaped(ctx.input(0).shape()).unwrap())]
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Output element `j` of the permuted tensor reads input element `src[j]`.
fn permute_values(x: &Tensor, axes: &[usize]) -> Tensor {
    let in_strides = strides(x.shape());
    let out_shape: Vec<usize> = axes.iter().map(|&a| x.shape()[a]).collect();
    let gather: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let n = x.len();
    let mut data = Vec::with_capacity(n);
    let mut idx = vec![0usize; out_shape.len()];
    let mut src = 0usize;
    for _ in 0..n {
        data.push(x.data[src]);
        for d in (0..out_shape.len()).rev() {
            idx[d] += 1;
            src += gather[d];
            if idx[d] < out_shape[d] {
                break;
            }
            src -= gather[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    Tensor {
        shape: out_shape,
        data,
    }
}

struct Permute {
    inverse: Vec<usize>,
}
impl BackwardOp for Permute {
    fn name(&self) -> &'static str {
        "permute"
    }
    fn backward(&self, _: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        vec![Some(permute_values(g, &self.inverse))]
    }
}

struct Narrow {
    axis: usize,
    start: usize,
}
impl BackwardOp for Narrow {
    fn name(&self) -> &'static str {
        "narrow"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let x = ctx.input(0);
        let vi = AxisView::new(x.shape(), self.axis);
        let vo = AxisView::new(g.shape(), self.axis);
        let mut dx = Tensor::zeros(x.shape());
        for o in 0..vo.outer {
            for k in 0..vo.len {
                let si = vi.index(o, k + self.start, 0);
                let so = vo.index(o, k, 0);
                dx.data[si..si + vi.inner].copy_from_slice(&g.data[so..so + vo.inner]);
            }
        }
        vec![Some(dx)]
    }
}

struct MeanAxis {
    axis: usize,
}
impl BackwardOp for MeanAxis {
    fn name(&self) -> &'static str {
        "mean_axis"
    }
    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let x = ctx.input(0);
        let v = AxisView::new(x.shape(), self.axis);
        let scale = 1.0 / v.len as f64;
        let mut dx = Tensor::zeros(x.shape());
        for o in 0..v.outer {
            for k in 0..v.len {
                for i in 0..v.inner {
                    dx.data[v.index(o, k, i)] = g.data[o * v.inner + i] * scale;
                }
            }
        }
        vec![Some(dx)]
    }
}

impl Graph {
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshaped(shape)?;
        Ok(self.record(&[x], out, Reshape))
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let nd = self.shape(x).len();
        let mut seen = vec![false; nd];
        if axes.len() != nd || axes.iter().any(|&a| a >= nd || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::dim(format!(
                "permute {axes:?} for shape {}",
                shape_str(self.shape(x))
            )));
        }
        let mut inverse = vec![0; nd];
        for (i, &a) in axes.iter().enumerate() {
            inverse[a] = i;
        }
        let out = permute_values(self.value(x), axes);
        Ok(self.record(&[x], out, Permute { inverse }))
    }

    /// Swaps the two axes of a matrix.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        if self.shape(x).len() != 2 {
            return Err(Error::dim(format!(
                "transpose needs a matrix, got {}",
                shape_str(self.shape(x))
            )));
        }
        self.permute(x, &[1, 0])
    }

    /// Slice `start..start+len` along `axis`.
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::dim(format!(
                "narrow axis {axis} [{start}, {}) of {}",
                start + len,
                shape_str(&shape)
            )));
        }
        let vi = AxisView::new(&shape, axis);
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let vo = AxisView::new(&out_shape, axis);
        let src = self.value(x);
        let mut data = vec![0.0; out_shape.iter().product()];
        for o in 0..vo.outer {
            for k in 0..len {
                let si = vi.index(o, k + start, 0);
                let so = vo.index(o, k, 0);
                data[so..so + vo.inner].copy_from_slice(&src.data[si..si + vi.inner]);
            }
        }
        let out = Tensor::new(out_shape, data)?;
        Ok(self.record(&[x], out, Narrow { axis, start }))
    }

    /// Mean over `axis`, which is removed from the shape.
    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::dim(format!(
                "mean over axis {axis} of {}",
                shape_str(&shape)
            )));
        }
        let v = AxisView::new(&shape, axis);
        let src = self.value(x);
        let mut data = vec![0.0; v.outer * v.inner];
        for o in 0..v.outer {
            for k in 0..v.len {
                for i in 0..v.inner {
                    data[o * v.inner + i] += src.data[v.index(o, k, i)];
                }
            }
        }
        let inv = 1.0 / v.len as f64;
        data.iter_mut().for_each(|d| *d *= inv);
        let mut out_shape = shape;
        out_shape.remove(axis);
        let out = Tensor {
            shape: out_shape,
            data,
        };
        Ok(self.record(&[x], out, MeanAxis { axis }))
    }

    /// `[B,C,H,W] → [B,C]`, the mean over each plane.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 {
            return Err(Error::dim(format!(
                "global_avg_pool needs [B,C,H,W], got {}",
                shape_str(&s)
            )));
        }
        let flat = self.reshape(x, &[s[0], s[1], s[2] * s[3]])?;
        self.mean_axis(flat, 2)
    }
}
