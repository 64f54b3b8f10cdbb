//! Stride-1 2-D cross-correlation and non-overlapping max pooling.
//!
//! Convolution lowers each sample to an im2col matrix and runs one GEMM per
//! sample. Samples are processed in parallel; weight and bias gradients are
//! summed over samples in index order.

use super::graph::{BackwardCtx, BackwardOp, Graph, Var};
use super::linalg::gemm;
use super::{shape_str, Tensor};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn col_rows(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn plane_out(&self) -> usize {
        self.oh * self.ow
    }

    fn sample_in(&self) -> usize {
        self.cin * self.h * self.w
    }

    fn sample_out(&self) -> usize {
        self.cout * self.plane_out()
    }
}

/// Row `(c, ky, kx)`, column `(y, x)` of the patch matrix.
fn im2col(x: &[f64], g: &ConvGeom) -> Vec<f64> {
    let mut cols = vec![0.0; g.col_rows() * g.plane_out()];
    for c in 0..g.cin {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let dst = &mut cols[row * g.plane_out()..(row + 1) * g.plane_out()];
                for oy in 0..g.oh {
                    let iy = oy as isize + ky as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let src_row = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let dst_row = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    let shift = kx as isize - g.pad as isize;
                    let lo = (-shift).max(0) as usize;
                    let hi = ((g.w as isize - shift).min(g.ow as isize)).max(0) as usize;
                    if lo < hi {
                        let s0 = (lo as isize + shift) as usize;
                        dst_row[lo..hi].copy_from_slice(&src_row[s0..s0 + (hi - lo)]);
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], g: &ConvGeom) -> Vec<f64> {
    let mut x = vec![0.0; g.sample_in()];
    for c in 0..g.cin {
        let plane = &mut x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let src = &cols[row * g.plane_out()..(row + 1) * g.plane_out()];
                for oy in 0..g.oh {
                    let iy = oy as isize + ky as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let src_row = &src[oy * g.ow..(oy + 1) * g.ow];
                    let shift = kx as isize - g.pad as isize;
                    let lo = (-shift).max(0) as usize;
                    let hi = ((g.w as isize - shift).min(g.ow as isize)).max(0) as usize;
                    for ox in lo..hi {
                        dst_row[(ox as isize + shift) as usize] += src_row[ox];
                    }
                }
            }
        }
    }
    x
}

struct Conv2d {
    geom: ConvGeom,
    cols: Vec<Vec<f64>>,
}

impl BackwardOp for Conv2d {
    fn name(&self) -> &'static str {
        "conv2d"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>, grad: &Tensor) -> Vec<Option<Tensor>> {
        let g = self.geom;
        let w = ctx.input(1);
        let batch = grad.shape()[0];
        let (need_x, need_w, need_b) = (ctx.needs_grad(0), ctx.needs_grad(1), ctx.needs_grad(2));
        let per_sample = par::map_indexed(batch, |b| {
            let gy = &grad.data()[b * g.sample_out()..(b + 1) * g.sample_out()];
            let dx = need_x.then(|| {
                let mut dcols = vec![0.0; g.col_rows() * g.plane_out()];
                gemm(
                    g.col_rows(),
                    g.cout,
                    g.plane_out(),
                    w.data(),
                    true,
                    gy,
                    false,
                    0.0,
                    &mut dcols,
                );
                col2im(&dcols, &g)
            });
            let dw = need_w.then(|| {
                let mut d = vec![0.0; g.cout * g.col_rows()];
                gemm(
                    g.cout,
                    g.plane_out(),
                    g.col_rows(),
                    gy,
                    false,
                    &self.cols[b],
                    true,
                    0.0,
                    &mut d,
                );
                d
            });
            (dx, dw)
        });

        let mut dx = need_x.then(|| Vec::with_capacity(batch * g.sample_in()));
        let mut dw = need_w.then(|| vec![0.0; g.cout * g.col_rows()]);
        for (sx, sw) in per_sample {
            if let (Some(acc), Some(sx)) = (dx.as_mut(), sx) {
                acc.extend_from_slice(&sx);
            }
            if let (Some(acc), Some(sw)) = (dw.as_mut(), sw) {
                acc.iter_mut().zip(&sw).for_each(|(a, v)| *a += v);
            }
        }
        let db = need_b.then(|| {
            let mut d = vec![0.0; g.cout];
            for b in 0..batch {
                for (o, acc) in d.iter_mut().enumerate() {
                    let s = (b * g.cout + o) * g.plane_out();
                    *acc += grad.data()[s..s + g.plane_out()].iter().sum::<f64>();
                }
            }
            Tensor::new(vec![g.cout], d).unwrap()
        });
        vec![
            dx.map(|d| Tensor::new(ctx.input(0).shape().to_vec(), d).unwrap()),
            dw.map(|d| Tensor::new(w.shape().to_vec(), d).unwrap()),
            db,
        ]
    }
}

struct MaxPool {
    /// Flat input index chosen by each output element.
    argmax: Vec<usize>,
}

impl BackwardOp for MaxPool {
    fn name(&self) -> &'static str {
        "maxpool2d"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let mut dx = Tensor::zeros(ctx.input(0).shape());
        for (o, &src) in self.argmax.iter().enumerate() {
            dx.data[src] += g.data[o];
        }
        vec![Some(dx)]
    }
}

impl Graph {
    /// Cross-correlation (no kernel flip), stride 1, zero padding `pad`.
    ///
    /// `x: [B,Cin,H,W]`, `w: [Cout,Cin,kh,kw]`, `bias: [Cout]`.
    pub fn conv2d(&mut self, x: Var, w: Var, bias: Var, pad: usize) -> Result<Var> {
        let (sx, sw, sb) = (self.shape(x), self.shape(w), self.shape(bias));
        if sx.len() != 4 || sw.len() != 4 || sx[1] != sw[1] || sb != [sw[0]] {
            return Err(Error::dim(format!(
                "conv2d input {} weight {} bias {}",
                shape_str(sx),
                shape_str(sw),
                shape_str(sb)
            )));
        }
        let (h, wd) = (sx[2] + 2 * pad, sx[3] + 2 * pad);
        if h < sw[2] || wd < sw[3] {
            return Err(Error::dim(format!(
                "conv2d kernel {} larger than padded input {}",
                shape_str(sw),
                shape_str(sx)
            )));
        }
        let geom = ConvGeom {
            cin: sx[1],
            h: sx[2],
            w: sx[3],
            cout: sw[0],
            kh: sw[2],
            kw: sw[3],
            pad,
            oh: h - sw[2] + 1,
            ow: wd - sw[3] + 1,
        };
        let batch = sx[0];
        let save = self.any_requires_grad(&[w]);
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(bias));
        let per_sample = par::map_indexed(batch, |b| {
            let cols = im2col(&xv.data()[b * geom.sample_in()..(b + 1) * geom.sample_in()], &geom);
            let mut out = vec![0.0; geom.sample_out()];
            for (o, chunk) in out.chunks_mut(geom.plane_out()).enumerate() {
                chunk.fill(bv.data()[o]);
            }
            gemm(
                geom.cout,
                geom.col_rows(),
                geom.plane_out(),
                wv.data(),
                false,
                &cols,
                false,
                1.0,
                &mut out,
            );
            (out, cols)
        });
        let mut data = Vec::with_capacity(batch * geom.sample_out());
        let mut saved = Vec::new();
        for (out, cols) in per_sample {
            data.extend_from_slice(&out);
            if save {
                saved.push(cols);
            }
        }
        let out = Tensor::new(vec![batch, geom.cout, geom.oh, geom.ow], data)?;
        Ok(self.record(&[x, w, bias], out, Conv2d { geom, cols: saved }))
    }

    /// Non-overlapping `window × window` max pooling.
    ///
    /// Ties go to the first element in row-major order within the window,
    /// which is also where the gradient is routed.
    pub fn maxpool2d(&mut self, x: Var, window: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 || window == 0 || s[2] % window != 0 || s[3] % window != 0 {
            return Err(Error::dim(format!(
                "maxpool2d window {window} on {}",
                shape_str(&s)
            )));
        }
        let (planes, h, w) = (s[0] * s[1], s[2], s[3]);
        let (oh, ow) = (h / window, w / window);
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(planes * oh * ow);
        let mut argmax = Vec::with_capacity(planes * oh * ow);
        for p in 0..planes {
            let base = p * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + oy * window * w + ox * window;
                    for dy in 0..window {
                        for dx in 0..window {
                            let i = base + (oy * window + dy) * w + ox * window + dx;
                            if src[i] > src[best] {
                                best = i;
                            }
                        }
                    }
                    data.push(src[best]);
                    argmax.push(best);
                }
            }
        }
        let out = Tensor::new(vec![s[0], s[1], oh, ow], data)?;
        Ok(self.record(&[x], out, MaxPool { argmax }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::tensor::grad_check;

    fn direct_conv(x: &Tensor, w: &Tensor, b: &Tensor, pad: usize) -> Tensor {
        let (bn, cin, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (cout, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
        let (oh, ow) = (h + 2 * pad - kh + 1, wd + 2 * pad - kw + 1);
        let mut out = Tensor::zeros(&[bn, cout, oh, ow]);
        for n in 0..bn {
            for o in 0..cout {
                for y in 0..oh {
                    for xx in 0..ow {
                        let mut s = b.data()[o];
                        for c in 0..cin {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let iy = y as isize + ky as isize - pad as isize;
                                    let ix = xx as isize + kx as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                        continue;
                                    }
                                    s += x.data()[((n * cin + c) * h + iy as usize) * wd + ix as usize]
                                        * w.data()[((o * cin + c) * kh + ky) * kw + kx];
                                }
                            }
                        }
                        out.data_mut()[((n * cout + o) * oh + y) * ow + xx] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut rng = Rng::new(1);
        let x = Tensor::from_fn(&[1, 1, 5, 5], |_| rng.uniform());
        let mut k = Tensor::zeros(&[1, 1, 3, 3]);
        k.data_mut()[4] = 1.0;
        let mut g = Graph::new();
        let (xv, kv, bv) = (g.constant(x.clone()), g.constant(k), g.constant(Tensor::zeros(&[1])));
        let y = g.conv2d(xv, kv, bv, 1).unwrap();
        assert_eq!(g.value(y), &x);
    }

    #[test]
    fn ones_kernel_counts_neighbours() {
        let mut g = Graph::new();
        let xv = g.constant(Tensor::full(&[1, 1, 5, 5], 1.0));
        let kv = g.constant(Tensor::full(&[1, 1, 3, 3], 1.0));
        let bv = g.constant(Tensor::zeros(&[1]));
        let y = g.conv2d(xv, kv, bv, 1).unwrap();
        let d = g.value(y).data();
        assert_eq!(d[2 * 5 + 2], 9.0);
        assert_eq!(d[6], 9.0);
        for corner in [0, 4, 20, 24] {
            assert_eq!(d[corner], 4.0);
        }
        assert_eq!(d[2], 6.0);
    }

    #[test]
    fn random_conv_matches_direct_sum() {
        let mut rng = Rng::new(2);
        let x = Tensor::from_fn(&[2, 3, 8, 8], |_| rng.uniform_range(-1.0, 1.0));
        let w = Tensor::from_fn(&[6, 3, 3, 3], |_| rng.uniform_range(-1.0, 1.0));
        let b = Tensor::from_fn(&[6], |_| rng.uniform_range(-1.0, 1.0));
        let mut g = Graph::new();
        let (xv, wv, bv) = (g.constant(x.clone()), g.constant(w.clone()), g.constant(b.clone()));
        let y = g.conv2d(xv, wv, bv, 1).unwrap();
        assert!(g.value(y).max_abs_diff(&direct_conv(&x, &w, &b, 1)) <= 1e-10);
    }

    #[test]
    fn channel_mismatch_is_dimension_error() {
        let mut g = Graph::new();
        let xv = g.constant(Tensor::zeros(&[1, 2, 4, 4]));
        let wv = g.constant(Tensor::zeros(&[3, 1, 3, 3]));
        let bv = g.constant(Tensor::zeros(&[3]));
        assert!(matches!(g.conv2d(xv, wv, bv, 1), Err(Error::Dimension(_))));
    }

    #[test]
    fn conv_gradients_all_inputs() {
        let mut rng = Rng::new(3);
        let x = Tensor::from_fn(&[2, 2, 5, 5], |_| rng.uniform_range(-1.0, 1.0));
        let w = Tensor::from_fn(&[3, 2, 3, 3], |_| rng.uniform_range(-1.0, 1.0));
        let b = Tensor::from_fn(&[3], |_| rng.uniform_range(-1.0, 1.0));
        let f = |g: &mut Graph, x: Var, w: Var, b: Var| -> Result<Var> {
            let y = g.conv2d(x, w, b, 1)?;
            let s = g.sigmoid(y);
            Ok(g.sum(s))
        };
        let (wc, bc, xc) = (w.clone(), b.clone(), x.clone());
        let ex = grad_check(
            |g, v| {
                let (w, b) = (g.constant(wc.clone()), g.constant(bc.clone()));
                f(g, v, w, b)
            },
            &x,
            1e-5,
        )
        .unwrap();
        let ew = grad_check(
            |g, v| {
                let (x, b) = (g.constant(xc.clone()), g.constant(bc.clone()));
                f(g, x, v, b)
            },
            &w,
            1e-5,
        )
        .unwrap();
        let eb = grad_check(
            |g, v| {
                let (x, w) = (g.constant(xc.clone()), g.constant(wc.clone()));
                f(g, x, w, v)
            },
            &b,
            1e-5,
        )
        .unwrap();
        assert!(ex < 1e-8 && ew < 1e-8 && eb < 1e-8, "{ex} {ew} {eb}");
    }

    #[test]
    fn maxpool_single_window_and_ties() {
        let mut g = Graph::new();
        let x = g.param(Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let y = g.maxpool2d(x, 2).unwrap();
        assert_eq!(g.value(y).data(), &[4.0]);

        let c = g.param(Tensor::full(&[1, 1, 4, 4], 0.5));
        let y = g.maxpool2d(c, 2).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.5));
        let s = g.sum(y);
        g.backward(s).unwrap();
        let grad = g.grad(c).unwrap().data();
        let hot: Vec<usize> = (0..16).filter(|&i| grad[i] != 0.0).collect();
        assert_eq!(hot, vec![0, 2, 8, 10]);
    }

    #[test]
    fn maxpool_rejects_odd_dims() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[1, 1, 3, 4]));
        assert!(matches!(g.maxpool2d(x, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn maxpool_matches_window_scan() {
        let mut rng = Rng::new(4);
        let x = Tensor::from_fn(&[1, 1, 8, 8], |_| rng.uniform_range(-1.0, 1.0));
        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let y = g.maxpool2d(xv, 2).unwrap();
        for oy in 0..4 {
            for ox in 0..4 {
                let m = [(0, 0), (0, 1), (1, 0), (1, 1)]
                    .iter()
                    .map(|(dy, dx)| x.data()[(2 * oy + dy) * 8 + 2 * ox + dx])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((g.value(y).data()[oy * 4 + ox] - m).abs() <= 1e-10);
            }
        }
    }
}
