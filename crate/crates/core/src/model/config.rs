use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{Connectivity, GradMethod, MAX_QUBITS};

/// Architecture hyperparameters. Defaults reproduce the published network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub image_size: usize,
    pub in_channels: usize,
    pub conv_channels: Vec<usize>,
    pub conv_dropout: Vec<f64>,
    pub leaky_slope: f64,
    pub attention_heads: usize,
    pub n_qubits: usize,
    pub n_layers: usize,
    /// Width of each row of the learnable quantum embedding.
    pub embedding_dim: usize,
    /// Width of the gated quantum-aware feature vector.
    pub quantum_input_dim: usize,
    pub head_hidden: usize,
    pub head_dropout: f64,
    pub classes: usize,
    pub connectivity: Connectivity,
    pub quantum_enabled: bool,
    pub grad_method: GradMethod,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            image_size: 64,
            in_channels: 3,
            conv_channels: vec![32, 64, 128],
            conv_dropout: vec![0.3, 0.3, 0.2],
            leaky_slope: 0.1,
            attention_heads: 4,
            n_qubits: 4,
            n_layers: 2,
            embedding_dim: 64,
            quantum_input_dim: 64,
            head_hidden: 64,
            head_dropout: 0.5,
            classes: 2,
            connectivity: Connectivity::Ring,
            quantum_enabled: true,
            grad_method: GradMethod::Adjoint,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if self.conv_channels.is_empty() || self.conv_channels.len() != self.conv_dropout.len() {
            return bad(format!(
                "conv_channels {:?} and conv_dropout {:?} must be non-empty and equally long",
                self.conv_channels, self.conv_dropout
            ));
        }
        let shrink = 1usize << self.conv_channels.len();
        if self.image_size == 0 || self.image_size % shrink != 0 {
            return bad(format!(
                "image_size {} must be divisible by {shrink}",
                self.image_size
            ));
        }
        let d = self.model_dim();
        if self.attention_heads == 0 || d % self.attention_heads != 0 {
            return bad(format!(
                "attention_heads {} must divide model dimension {d}",
                self.attention_heads
            ));
        }
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return bad(format!("n_qubits {} outside 1..={MAX_QUBITS}", self.n_qubits));
        }
        if self.quantum_input_dim != self.n_qubits * 16 {
            return bad(format!(
                "quantum_input_dim {} must equal n_qubits × 16 = {}",
                self.quantum_input_dim,
                self.n_qubits * 16
            ));
        }
        if self.n_layers == 0 {
            return bad("n_layers must be at least 1".into());
        }
        for &p in self.conv_dropout.iter().chain([&self.head_dropout]) {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("dropout probability {p} outside [0, 1)"));
            }
        }
        if self.classes < 2 || self.head_hidden == 0 || self.embedding_dim == 0 || self.in_channels == 0 {
            return bad("classes ≥ 2 and positive head/embedding/input widths required".into());
        }
        Ok(())
    }

    /// Channel width of the CNN output, which is also the attention width.
    pub fn model_dim(&self) -> usize {
        *self.conv_channels.last().unwrap_or(&0)
    }

    /// Number of spatial tokens after the CNN.
    pub fn tokens(&self) -> usize {
        let side = self.image_size >> self.conv_channels.len();
        side * side
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim() / self.attention_heads
    }

    /// Names of fields whose values differ, for mismatch diagnostics.
    pub fn diff(&self, other: &ModelConfig) -> Vec<String> {
        let (a, b) = (
            toml::Table::try_from(self).expect("config serialises"),
            toml::Table::try_from(other).expect("config serialises"),
        );
        a.iter()
            .filter(|(k, v)| b.get(*k) != Some(v))
            .map(|(k, v)| {
                format!(
                    "{k} ({} vs {})",
                    v,
                    b.get(k).map_or("missing".to_string(), |x| x.to_string())
                )
            })
            .collect()
    }
}
