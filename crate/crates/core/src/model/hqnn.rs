//! Forward pass of the hybrid network.
//!
//! Dataflow: CNN → 4-head self-attention over spatial tokens (mean-pooled)
//! → cross-attention against the quantum embedding → quantum-input map →
//! positional encoding → sigmoid gate against a projection of the
//! self-attention features → first `n_qubits` coordinates as RX angles →
//! circuit (or the ablation's linear map) → classifier head.

use std::collections::BTreeMap;

use super::config::ModelConfig;
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::qsim::{Circuit, QuantumLayer};
use crate::rng::Rng;
use crate::tensor::{shape_str, BatchNormState, DropoutKind, Graph, Mode, Tensor, Var};

/// Parameter tensors placed on a graph.
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
    names: BTreeMap<String, Var>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| Error::contract(format!("parameter {name} is not bound")))
    }

    /// Vars in parameter-layout order.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Gradients of every trainable tensor, zero where none reached it.
    pub fn grads(&self, g: &Graph, params: &ModelParams) -> Vec<Tensor> {
        params
            .trainable_indices()
            .into_iter()
            .map(|i| match g.grad(self.vars[i]) {
                Some(t) => t.clone(),
                None => Tensor::zeros(params.values()[i].shape()),
            })
            .collect()
    }
}

pub struct ForwardOutput {
    pub logits: Var,
    /// Gated quantum-aware features `[B, quantum_input_dim]`.
    pub gated: Var,
    /// Circuit expectations (or ablation outputs) `[B, n_qubits]`.
    pub expectations: Var,
    /// Updated running statistics, keyed by batchnorm prefix.
    pub bn_updates: Vec<(String, BatchNormState)>,
}

impl ForwardOutput {
    pub fn apply_bn_updates(&self, params: &mut ModelParams) -> Result<()> {
        for (prefix, st) in &self.bn_updates {
            params.store_bn_state(prefix, st)?;
        }
        Ok(())
    }
}

/// `PE(pos, 2i) = sin(pos / 10000^(2i/c))`, `PE(pos, 2i+1) = cos(...)`,
/// flattened as `pos * c + channel`.
pub fn positional_encoding(positions: usize, channels: usize) -> Tensor {
    Tensor::from_fn(&[positions * channels], |k| {
        let (pos, ch) = ((k / channels) as f64, k % channels);
        let freq = 10000f64.powf((ch - ch % 2) as f64 / channels as f64);
        if ch % 2 == 0 {
            (pos / freq).sin()
        } else {
            (pos / freq).cos()
        }
    })
}

#[derive(Debug, Clone)]
pub struct Hqnn {
    config: ModelConfig,
    quantum: Option<QuantumLayer>,
    pe: Tensor,
}

impl Hqnn {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let quantum = if config.quantum_enabled {
            let c = Circuit::new(config.n_qubits, config.n_layers, config.connectivity)?;
            Some(QuantumLayer::new(c, config.grad_method))
        } else {
            None
        };
        let pe = positional_encoding(config.n_qubits, config.quantum_input_dim / config.n_qubits);
        Ok(Self { config, quantum, pe })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn quantum_layer(&self) -> Option<&QuantumLayer> {
        self.quantum.as_ref()
    }

    /// Places all parameters on `g`; trainable ones require grad iff `grad`.
    pub fn bind(&self, g: &mut Graph, params: &ModelParams, grad: bool) -> Bound {
        let mut names = BTreeMap::new();
        let vars = params
            .specs()
            .iter()
            .zip(params.values())
            .map(|(s, t)| {
                let v = g.leaf(t.clone(), grad && s.trainable);
                names.insert(s.name.clone(), v);
                v
            })
            .collect();
        Bound { vars, names }
    }

    fn linear(&self, g: &mut Graph, b: &Bound, x: Var, prefix: &str) -> Result<Var> {
        let (w, bias) = (b.var(&format!("{prefix}.weight"))?, b.var(&format!("{prefix}.bias"))?);
        g.linear(x, w, Some(bias))
    }

    fn batchnorm(
        &self,
        g: &mut Graph,
        b: &Bound,
        params: &ModelParams,
        x: Var,
        prefix: &str,
        mode: Mode,
        updates: &mut Vec<(String, BatchNormState)>,
    ) -> Result<Var> {
        let mut st = params.bn_state(prefix)?;
        let (gamma, beta) = (b.var(&format!("{prefix}.gamma"))?, b.var(&format!("{prefix}.beta"))?);
        let y = g.batchnorm(x, gamma, beta, &mut st, mode)?;
        if mode == Mode::Train {
            updates.push((prefix.to_string(), st));
        }
        Ok(y)
    }

    /// `[B, C, S, S] → [B, C_last, S/2^k, S/2^k]`.
    #[allow(clippy::too_many_arguments)]
    pub fn cnn_extract(
        &self,
        g: &mut Graph,
        b: &Bound,
        params: &ModelParams,
        x: Var,
        mode: Mode,
        rng: &mut Rng,
        updates: &mut Vec<(String, BatchNormState)>,
    ) -> Result<Var> {
        let c = &self.config;
        let s = g.shape(x);
        if s.len() != 4 || s[1] != c.in_channels || s[2] != c.image_size || s[3] != c.image_size {
            return Err(Error::dim(format!(
                "model input {}, expected [B, {}, {}, {}]",
                shape_str(s),
                c.in_channels,
                c.image_size,
                c.image_size
            )));
        }
        let mut h = x;
        for (i, &p) in c.conv_dropout.iter().enumerate() {
            let (w, bias) = (b.var(&format!("conv{i}.weight"))?, b.var(&format!("conv{i}.bias"))?);
            h = g.conv2d(h, w, bias, 1)?;
            h = self.batchnorm(g, b, params, h, &format!("bn{i}"), mode, updates)?;
            h = g.leaky_relu(h, c.leaky_slope);
            h = g.maxpool2d(h, 2)?;
            h = g.dropout(h, p, DropoutKind::Channel, rng, mode)?;
        }
        Ok(h)
    }

    /// Multi-head self-attention over `tokens: [B, T, D]`, mean over tokens.
    /// Returns the pooled `[B, D]` output and weights `[B·heads, T, T]`.
    pub fn self_attend(&self, g: &mut Graph, b: &Bound, tokens: Var) -> Result<(Var, Var)> {
        let s = g.shape(tokens).to_vec();
        let (d, heads) = (self.config.model_dim(), self.config.attention_heads);
        if heads == 0 || d % heads != 0 {
            return Err(Error::config(format!("{heads} heads do not divide width {d}")));
        }
        if s.len() != 3 || s[2] != d {
            return Err(Error::dim(format!("attention tokens {}, width {d}", shape_str(&s))));
        }
        let (bsz, t, dk) = (s[0], s[1], d / heads);
        let flat = g.reshape(tokens, &[bsz * t, d])?;
        let split = |g: &mut Graph, name: &str| -> Result<Var> {
            let p = self.linear(g, b, flat, name)?;
            let p = g.reshape(p, &[bsz, t, heads, dk])?;
            let p = g.permute(p, &[0, 2, 1, 3])?;
            g.reshape(p, &[bsz * heads, t, dk])
        };
        let q = split(g, "attn.q")?;
        let k = split(g, "attn.k")?;
        let v = split(g, "attn.v")?;
        let scores = g.bmm(q, k, true)?;
        let scores = g.scale(scores, 1.0 / (dk as f64).sqrt());
        let weights = g.softmax(scores, 2)?;
        let ctx = g.bmm(weights, v, false)?;
        let ctx = g.reshape(ctx, &[bsz, heads, t, dk])?;
        let ctx = g.permute(ctx, &[0, 2, 1, 3])?;
        let ctx = g.reshape(ctx, &[bsz * t, d])?;
        let out = self.linear(g, b, ctx, "attn.out")?;
        let out = g.reshape(out, &[bsz, t, d])?;
        Ok((g.mean_axis(out, 1)?, weights))
    }

    /// Single-head attention with `f: [B, D]` as queries and the embedding
    /// rows as keys and values. Returns `[B, E]` and weights `[B, n_qubits]`.
    pub fn cross_attend(&self, g: &mut Graph, b: &Bound, f: Var) -> Result<(Var, Var)> {
        let emb = b.var("embedding")?;
        let q = self.linear(g, b, f, "cross.q")?;
        let k = self.linear(g, b, emb, "cross.k")?;
        let v = self.linear(g, b, emb, "cross.v")?;
        let kt = g.transpose(k)?;
        let scores = g.matmul(q, kt)?;
        let scale = 1.0 / (self.config.embedding_dim as f64).sqrt();
        let scores = g.scale(scores, scale);
        let weights = g.softmax(scores, 1)?;
        Ok((g.matmul(weights, v)?, weights))
    }

    pub fn positional_encode(&self, g: &mut Graph, q: Var) -> Result<Var> {
        let pe = g.constant(self.pe.clone());
        g.add_bias(q, pe)
    }

    /// `σ(W_g f_q + b_g) ⊙ f_q + (1 − σ(·)) ⊙ f_orig`.
    pub fn gate_fuse(&self, g: &mut Graph, fq: Var, forig: Var, wg: Var, bg: Var) -> Result<Var> {
        if g.shape(fq) != g.shape(forig) {
            return Err(Error::dim(format!(
                "gate inputs {} and {}",
                shape_str(g.shape(fq)),
                shape_str(g.shape(forig))
            )));
        }
        let pre = g.linear(fq, wg, Some(bg))?;
        let gate = g.sigmoid(pre);
        let diff = g.sub(fq, forig)?;
        let mixed = g.mul(gate, diff)?;
        g.add(forig, mixed)
    }

    fn head(
        &self,
        g: &mut Graph,
        b: &Bound,
        params: &ModelParams,
        e: Var,
        mode: Mode,
        rng: &mut Rng,
        updates: &mut Vec<(String, BatchNormState)>,
    ) -> Result<Var> {
        let h = self.linear(g, b, e, "head.fc1")?;
        let h = self.batchnorm(g, b, params, h, "head.bn", mode, updates)?;
        let h = g.leaky_relu(h, self.config.leaky_slope);
        let h = g.dropout(h, self.config.head_dropout, DropoutKind::Element, rng, mode)?;
        self.linear(g, b, h, "head.fc2")
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        b: &Bound,
        params: &ModelParams,
        x: Var,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<ForwardOutput> {
        let c = &self.config;
        let mut updates = Vec::new();
        let fmap = self.cnn_extract(g, b, params, x, mode, rng, &mut updates)?;
        let s = g.shape(fmap).to_vec();
        let (bsz, d, t) = (s[0], s[1], s[2] * s[3]);
        let tokens = g.reshape(fmap, &[bsz, d, t])?;
        let tokens = g.permute(tokens, &[0, 2, 1])?;
        let (fsa, _) = self.self_attend(g, b, tokens)?;
        let (fq, _) = self.cross_attend(g, b, fsa)?;
        let fq = self.linear(g, b, fq, "qin")?;
        let fq = self.positional_encode(g, fq)?;
        let forig = self.linear(g, b, fsa, "orig")?;
        let gated = self.gate_fuse(g, fq, forig, b.var("gate.weight")?, b.var("gate.bias")?)?;
        let expectations = match &self.quantum {
            Some(layer) => {
                let angles = g.narrow(gated, 1, 0, c.n_qubits)?;
                layer.forward(g, angles, b.var("theta")?)?
            }
            None => self.linear(g, b, gated, "ablation")?,
        };
        let logits = self.head(g, b, params, expectations, mode, rng, &mut updates)?;
        Ok(ForwardOutput { logits, gated, expectations, bn_updates: updates })
    }

    /// Eval-mode outputs without gradients: `(logits, gated, expectations)`.
    pub fn predict(&self, params: &ModelParams, x: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let mut g = Graph::new();
        let b = self.bind(&mut g, params, false);
        let xv = g.constant(x.clone());
        // eval mode never draws from the generator
        let mut rng = Rng::new(0);
        let out = self.forward(&mut g, &b, params, xv, Mode::Eval, &mut rng)?;
        Ok((
            g.value(out.logits).clone(),
            g.value(out.gated).clone(),
            g.value(out.expectations).clone(),
        ))
    }
}
