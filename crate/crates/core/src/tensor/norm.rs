//! Batch normalisation and dropout.

use super::graph::{BackwardCtx, BackwardOp, Graph, Var};
use super::{shape_str, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Running statistics of one batchnorm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNormState {
    pub fn new(channels: usize) -> Self {
        Self {
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }
}

/// Input viewed as `[B, C, S]` with `S` the product of trailing dims.
fn bn_dims(shape: &[usize]) -> (usize, usize, usize) {
    (shape[0], shape[1], shape[2..].iter().product())
}

struct BatchNorm {
    /// Normalised input x̂.
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    train: bool,
}

impl BackwardOp for BatchNorm {
    fn name(&self) -> &'static str {
        "batchnorm"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let gamma = ctx.input(1).data();
        let (b, c, s) = bn_dims(g.shape());
        let n = (b * s) as f64;
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        for bi in 0..b {
            for ci in 0..c {
                let off = (bi * c + ci) * s;
                for k in off..off + s {
                    dgamma[ci] += g.data[k] * self.xhat[k];
                    dbeta[ci] += g.data[k];
                }
            }
        }
        let dx = ctx.needs_grad(0).then(|| {
            let mut dx = Tensor::zeros(g.shape());
            for bi in 0..b {
                for ci in 0..c {
                    let off = (bi * c + ci) * s;
                    let scale = gamma[ci] * self.inv_std[ci];
                    for k in off..off + s {
                        dx.data[k] = if self.train {
                            scale / n * (n * g.data[k] - dbeta[ci] - self.xhat[k] * dgamma[ci])
                        } else {
                            scale * g.data[k]
                        };
                    }
                }
            }
            dx
        });
        vec![
            dx,
            Some(Tensor::new(vec![c], dgamma).unwrap()),
            Some(Tensor::new(vec![c], dbeta).unwrap()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutKind {
    /// Independent mask per element.
    Element,
    /// One mask value per `(sample, channel)` plane.
    Channel,
}

struct Dropout {
    mask: Vec<f64>,
    plane: usize,
}

impl BackwardOp for Dropout {
    fn name(&self) -> &'static str {
        "dropout"
    }

    fn backward(&self, _: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let mut dx = g.clone();
        for (chunk, &m) in dx.data.chunks_mut(self.plane).zip(&self.mask) {
            chunk.iter_mut().for_each(|v| *v *= m);
        }
        vec![Some(dx)]
    }
}

impl Graph {
    /// Per-channel batch normalisation over `[B,C]` or `[B,C,H,W]` inputs.
    ///
    /// Train mode normalises with the biased batch variance and folds the
    /// batch statistics into `state` (running variance uses the unbiased
    /// estimate). Eval mode uses the running statistics unchanged.
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        state: &mut BatchNormState,
        mode: Mode,
    ) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 {
            return Err(Error::dim(format!("batchnorm input {}", shape_str(&shape))));
        }
        let (b, c, s) = bn_dims(&shape);
        if self.shape(gamma) != [c] || self.shape(beta) != [c] || state.channels() != c {
            return Err(Error::dim(format!(
                "batchnorm over {c} channels with gamma {} beta {} state {}",
                shape_str(self.shape(gamma)),
                shape_str(self.shape(beta)),
                state.channels()
            )));
        }
        let train = mode == Mode::Train;
        if train && b * s < 2 {
            return Err(Error::config(
                "batchnorm in train mode needs more than one value per channel (batch of 1)",
            ));
        }
        let xv = self.value(x).data();
        let n = (b * s) as f64;
        let (mean, var) = if train {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for bi in 0..b {
                for ci in 0..c {
                    let off = (bi * c + ci) * s;
                    mean[ci] += xv[off..off + s].iter().sum::<f64>();
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            for bi in 0..b {
                for ci in 0..c {
                    let off = (bi * c + ci) * s;
                    var[ci] += xv[off..off + s]
                        .iter()
                        .map(|v| (v - mean[ci]).powi(2))
                        .sum::<f64>();
                }
            }
            var.iter_mut().for_each(|v| *v /= n);
            (mean, var)
        } else {
            (state.running_mean.clone(), state.running_var.clone())
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + state.eps).sqrt()).collect();
        let (gv, bv) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![0.0; xv.len()];
        let mut out = vec![0.0; xv.len()];
        for bi in 0..b {
            for ci in 0..c {
                let off = (bi * c + ci) * s;
                for k in off..off + s {
                    xhat[k] = (xv[k] - mean[ci]) * inv_std[ci];
                    out[k] = xhat[k] * gv[ci] + bv[ci];
                }
            }
        }
        if train {
            let m = state.momentum;
            let unbias = n / (n - 1.0);
            for ci in 0..c {
                state.running_mean[ci] = (1.0 - m) * state.running_mean[ci] + m * mean[ci];
                state.running_var[ci] = (1.0 - m) * state.running_var[ci] + m * var[ci] * unbias;
            }
        }
        let out = Tensor::new(shape, out)?;
        Ok(self.record(
            &[x, gamma, beta],
            out,
            BatchNorm {
                xhat,
                inv_std,
                train,
            },
        ))
    }

    /// Inverted dropout: survivors are scaled by `1/(1-p)`.
    ///
    /// Identity in eval mode or when `p == 0`. The mask is drawn from `rng`
    /// in row-major order over elements (or `(sample, channel)` planes).
    pub fn dropout(
        &mut self,
        x: Var,
        p: f64,
        kind: DropoutKind,
        rng: &mut Rng,
        mode: Mode,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::config(format!("dropout probability {p} outside [0, 1)")));
        }
        if mode == Mode::Eval || p == 0.0 {
            return Ok(x);
        }
        let shape = self.shape(x).to_vec();
        let plane = match kind {
            DropoutKind::Element => 1,
            DropoutKind::Channel => {
                if shape.len() < 3 {
                    return Err(Error::dim(format!(
                        "channel dropout needs [B,C,...], got {}",
                        shape_str(&shape)
                    )));
                }
                shape[2..].iter().product()
            }
        };
        let keep = 1.0 / (1.0 - p);
        let count = self.value(x).len() / plane;
        let mask: Vec<f64> = (0..count)
            .map(|_| if rng.bernoulli(p) { 0.0 } else { keep })
            .collect();
        let mut out = self.value(x).clone();
        for (chunk, &m) in out.data.chunks_mut(plane).zip(&mask) {
            chunk.iter_mut().for_each(|v| *v *= m);
        }
        Ok(self.record(&[x], out, Dropout { mask, plane }))
    }
}
