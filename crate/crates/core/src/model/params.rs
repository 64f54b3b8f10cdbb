//! Named parameter storage with a layout derived purely from the config.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{shape_str, BatchNormState, Tensor};

/// Architectural component a parameter belongs to, for itemized counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Component {
    Cnn,
    SelfAttention,
    CrossAttention,
    QuantumEmbedding,
    QuantumInput,
    OriginalProjection,
    Gate,
    QuantumCircuit,
    AblationMap,
    Head,
}

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Component::Cnn => "cnn",
            Component::SelfAttention => "self_attention",
            Component::CrossAttention => "cross_attention",
            Component::QuantumEmbedding => "quantum_embedding",
            Component::QuantumInput => "quantum_input",
            Component::OriginalProjection => "original_projection",
            Component::Gate => "gate",
            Component::QuantumCircuit => "quantum_circuit",
            Component::AblationMap => "ablation_map",
            Component::Head => "head",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Init {
    /// U(−b, b) with b = √(6 / ((1 + a²)·fan_in)) and a = √5, which is
    /// b = 1/√fan_in (the usual default for conv and linear layers).
    KaimingUniform { fan_in: usize },
    Zeros,
    Ones,
    UniformTau,
    Normal { std: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub component: Component,
    /// Buffers (batchnorm running statistics) are stored but not optimised.
    pub trainable: bool,
    pub(crate) init: Init,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

fn spec(name: String, shape: &[usize], component: Component, init: Init) -> ParamSpec {
    ParamSpec { name, shape: shape.to_vec(), component, trainable: true, init }
}

fn linear_specs(out: &mut Vec<ParamSpec>, prefix: &str, i: usize, o: usize, c: Component) {
    out.push(spec(format!("{prefix}.weight"), &[o, i], c, Init::KaimingUniform { fan_in: i }));
    out.push(spec(format!("{prefix}.bias"), &[o], c, Init::Zeros));
}

fn bn_specs(out: &mut Vec<ParamSpec>, prefix: &str, ch: usize, c: Component) {
    out.push(spec(format!("{prefix}.gamma"), &[ch], c, Init::Ones));
    out.push(spec(format!("{prefix}.beta"), &[ch], c, Init::Zeros));
    for (stat, init) in [("running_mean", Init::Zeros), ("running_var", Init::Ones)] {
        let mut s = spec(format!("{prefix}.{stat}"), &[ch], c, init);
        s.trainable = false;
        out.push(s);
    }
}

/// Full ordered layout of parameters and buffers for `config`.
pub(crate) fn layout(config: &ModelConfig) -> Vec<ParamSpec> {
    use Component::*;
    let mut out = Vec::new();
    let mut cin = config.in_channels;
    for (i, &cout) in config.conv_channels.iter().enumerate() {
        out.push(spec(
            format!("conv{i}.weight"),
            &[cout, cin, 3, 3],
            Cnn,
            Init::KaimingUniform { fan_in: cin * 9 },
        ));
        out.push(spec(format!("conv{i}.bias"), &[cout], Cnn, Init::Zeros));
        bn_specs(&mut out, &format!("bn{i}"), cout, Cnn);
        cin = cout;
    }
    let d = config.model_dim();
    for p in ["q", "k", "v", "out"] {
        linear_specs(&mut out, &format!("attn.{p}"), d, d, SelfAttention);
    }
    let (nq, e, qd) = (config.n_qubits, config.embedding_dim, config.quantum_input_dim);
    out.push(spec("embedding".into(), &[nq, e], QuantumEmbedding, Init::Normal { std: 0.02 }));
    linear_specs(&mut out, "cross.q", d, e, CrossAttention);
    linear_specs(&mut out, "cross.k", e, e, CrossAttention);
    linear_specs(&mut out, "cross.v", e, e, CrossAttention);
    linear_specs(&mut out, "qin", e, qd, QuantumInput);
    linear_specs(&mut out, "orig", d, qd, OriginalProjection);
    linear_specs(&mut out, "gate", qd, qd, Gate);
    if config.quantum_enabled {
        out.push(spec("theta".into(), &[config.n_layers, nq, 3], QuantumCircuit, Init::UniformTau));
    } else {
        linear_specs(&mut out, "ablation", qd, nq, AblationMap);
    }
    linear_specs(&mut out, "head.fc1", nq, config.head_hidden, Head);
    bn_specs(&mut out, "head.bn", config.head_hidden, Head);
    linear_specs(&mut out, "head.fc2", config.head_hidden, config.classes, Head);
    out
}

/// Itemized trainable-scalar count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamCount {
    pub by_component: BTreeMap<Component, usize>,
    pub total: usize,
}

impl ParamCount {
    pub fn get(&self, c: Component) -> usize {
        self.by_component.get(&c).copied().unwrap_or(0)
    }
}

impl fmt::Display for ParamCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, n) in &self.by_component {
            writeln!(f, "{:<20} {n:>9}", c.name())?;
        }
        write!(f, "{:<20} {:>9}", "total", self.total)
    }
}

pub fn count_params(config: &ModelConfig) -> Result<ParamCount> {
    config.validate()?;
    let mut by_component = BTreeMap::new();
    for s in layout(config).iter().filter(|s| s.trainable) {
        *by_component.entry(s.component).or_insert(0) += s.numel();
    }
    let total = by_component.values().sum();
    Ok(ParamCount { by_component, total })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    specs: Vec<ParamSpec>,
    values: Vec<Tensor>,
    index: BTreeMap<String, usize>,
}

impl ModelParams {
    /// Draws initial values; each tensor has its own rng substream so the
    /// layout can grow without reshuffling earlier draws.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let specs = layout(config);
        let values = specs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut rng = Rng::substream(seed, &[INIT_TAG, i as u64]);
                let n = s.numel();
                let data: Vec<f64> = match s.init {
                    Init::KaimingUniform { fan_in } => {
                        let b = 1.0 / (fan_in as f64).sqrt();
                        (0..n).map(|_| rng.uniform_range(-b, b)).collect()
                    }
                    Init::Zeros => vec![0.0; n],
                    Init::Ones => vec![1.0; n],
                    Init::UniformTau => (0..n).map(|_| rng.uniform_range(0.0, TAU)).collect(),
                    Init::Normal { std } => (0..n).map(|_| std * rng.normal()).collect(),
                };
                Tensor::new(s.shape.clone(), data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(specs, values))
    }

    fn assemble(specs: Vec<ParamSpec>, values: Vec<Tensor>) -> Self {
        let index = specs.iter().enumerate().map(|(i, s)| (s.name.clone(), i)).collect();
        Self { specs, values, index }
    }

    /// Rebuilds from stored values, checking names and shapes against `config`.
    pub fn from_named(config: &ModelConfig, named: Vec<(String, Tensor)>) -> Result<Self> {
        let specs = layout(config);
        if named.len() != specs.len() {
            return Err(Error::contract(format!(
                "expected {} parameter arrays, found {}",
                specs.len(),
                named.len()
            )));
        }
        let mut values = Vec::with_capacity(specs.len());
        for (s, (name, t)) in specs.iter().zip(named) {
            if s.name != name || s.shape != t.shape() {
                return Err(Error::contract(format!(
                    "parameter {name} {} does not match layout entry {} {}",
                    shape_str(t.shape()),
                    s.name,
                    shape_str(&s.shape)
                )));
            }
            values.push(t);
        }
        Ok(Self::assemble(specs, values))
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.position(name)
            .map(|i| &self.values[i])
            .ok_or_else(|| Error::contract(format!("no parameter named {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        match self.position(name) {
            Some(i) => Ok(&mut self.values[i]),
            None => Err(Error::contract(format!("no parameter named {name}"))),
        }
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.values[i]
    }

    /// Mutable views of the optimised tensors, in layout order.
    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor> {
        self.specs
            .iter()
            .zip(self.values.iter_mut())
            .filter(|(s, _)| s.trainable)
            .map(|(_, t)| t)
            .collect()
    }

    /// Indices of optimised tensors, in layout order.
    pub fn trainable_indices(&self) -> Vec<usize> {
        (0..self.specs.len()).filter(|&i| self.specs[i].trainable).collect()
    }

    pub fn trainable_count(&self) -> usize {
        self.trainable_indices().iter().map(|&i| self.values[i].len()).sum()
    }

    pub(crate) fn bn_state(&self, prefix: &str) -> Result<BatchNormState> {
        let mut st = BatchNormState::new(self.get(&format!("{prefix}.running_mean"))?.len());
        st.running_mean = self.get(&format!("{prefix}.running_mean"))?.data().to_vec();
        st.running_var = self.get(&format!("{prefix}.running_var"))?.data().to_vec();
        Ok(st)
    }

    pub(crate) fn store_bn_state(&mut self, prefix: &str, st: &BatchNormState) -> Result<()> {
        self.get_mut(&format!("{prefix}.running_mean"))?
            .data_mut()
            .copy_from_slice(&st.running_mean);
        self.get_mut(&format!("{prefix}.running_var"))?
            .data_mut()
            .copy_from_slice(&st.running_var);
        Ok(())
    }
}

const INIT_TAG: u64 = 0x696e_6974; // "init"
