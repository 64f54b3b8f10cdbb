use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::gates::{apply_rotation, Gate, Pauli};
use super::state::{StateVector, MAX_QUBITS};
use crate::error::{Error, Result};

/// CNOT pattern closing each entangling layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Connectivity {
    /// `0→1, 1→2, …, (n−2)→(n−1)`.
    Linear,
    /// Linear plus `(n−1)→0`.
    #[default]
    Ring,
    /// `i→j` for every `i < j`, lexicographic.
    AllToAll,
}

impl Connectivity {
    pub fn pairs(self, n: usize) -> Vec<(usize, usize)> {
        let linear = (0..n.saturating_sub(1)).map(|i| (i, i + 1));
        match self {
            Connectivity::Linear => linear.collect(),
            Connectivity::Ring => {
                let mut p: Vec<_> = linear.collect();
                if n > 1 {
                    p.push((n - 1, 0));
                }
                p
            }
            Connectivity::AllToAll => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
        }
    }

    pub const ALL: [Connectivity; 3] = [
        Connectivity::Linear,
        Connectivity::Ring,
        Connectivity::AllToAll,
    ];
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connectivity::Linear => "linear",
            Connectivity::Ring => "ring",
            Connectivity::AllToAll => "all-to-all",
        })
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Connectivity::Linear),
            "ring" => Ok(Connectivity::Ring),
            "all-to-all" | "all_to_all" | "alltoall" | "full" => Ok(Connectivity::AllToAll),
            other => Err(Error::config(format!(
                "unknown connectivity '{other}' (expected linear, ring or all-to-all)"
            ))),
        }
    }
}

/// Variational parameters `θ[layer][qubit][k]`, stored flat in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumLayerParams {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub theta: Vec<f64>,
    pub connectivity: Connectivity,
}

impl QuantumLayerParams {
    pub fn new(
        n_qubits: usize,
        n_layers: usize,
        theta: Vec<f64>,
        connectivity: Connectivity,
    ) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        if theta.len() != n_layers * n_qubits * 3 {
            return Err(Error::dim(format!(
                "theta has {} values, expected ({n_layers}, {n_qubits}, 3)",
                theta.len()
            )));
        }
        Ok(Self {
            n_qubits,
            n_layers,
            theta,
            connectivity,
        })
    }

    pub fn zeros(n_qubits: usize, n_layers: usize, connectivity: Connectivity) -> Result<Self> {
        Self::new(
            n_qubits,
            n_layers,
            vec![0.0; n_layers * n_qubits * 3],
            connectivity,
        )
    }

    pub fn theta_index(&self, layer: usize, qubit: usize, k: usize) -> usize {
        (layer * self.n_qubits + qubit) * 3 + k
    }
}

/// Which input feeds a rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSlot {
    Angle(usize),
    Theta(usize),
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum PrimKind {
    Rotation { axis: Pauli, qubit: usize },
    Cnot { control: usize, target: usize },
}

/// A single Pauli rotation or CNOT after lowering `Rot` gates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Prim {
    pub kind: PrimKind,
    pub slot: Option<ParamSlot>,
}

/// Gate template of the encoding + entangling circuit, lowered once.
#[derive(Debug, Clone)]
pub struct Circuit {
    n_qubits: usize,
    n_layers: usize,
    connectivity: Connectivity,
    prims: Vec<Prim>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_layers: usize, connectivity: Connectivity) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let mut prims = Vec::new();
        for q in 0..n_qubits {
            prims.push(Prim {
                kind: PrimKind::Rotation {
                    axis: Pauli::X,
                    qubit: q,
                },
                slot: Some(ParamSlot::Angle(q)),
            });
        }
        prims.extend(variational_prims(n_qubits, n_layers, connectivity));
        Ok(Self {
            n_qubits,
            n_layers,
            connectivity,
            prims,
        })
    }

    pub fn for_params(params: &QuantumLayerParams) -> Result<Self> {
        Self::new(params.n_qubits, params.n_layers, params.connectivity)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn theta_len(&self) -> usize {
        self.n_layers * self.n_qubits * 3
    }

    pub(crate) fn prims(&self) -> &[Prim] {
        &self.prims
    }

    pub(crate) fn check_inputs(&self, angles: &[f64], theta: &[f64]) -> Result<()> {
        if angles.len() != self.n_qubits {
            return Err(Error::dim(format!(
                "{} encoding angles for {} qubits",
                angles.len(),
                self.n_qubits
            )));
        }
        if theta.len() != self.theta_len() {
            return Err(Error::dim(format!(
                "theta has {} values, expected ({}, {}, 3)",
                theta.len(),
                self.n_layers,
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// Ordered high-level gate list for the given inputs.
    pub fn gates(&self, angles: &[f64], theta: &[f64]) -> Result<Vec<Gate>> {
        self.check_inputs(angles, theta)?;
        let mut out: Vec<Gate> = (0..self.n_qubits)
            .map(|q| Gate::RX {
                qubit: q,
                angle: angles[q],
            })
            .collect();
        for l in 0..self.n_layers {
            for q in 0..self.n_qubits {
                let i = (l * self.n_qubits + q) * 3;
                out.push(Gate::Rot {
                    qubit: q,
                    angles: [theta[i], theta[i + 1], theta[i + 2]],
                });
            }
            for (c, t) in self.connectivity.pairs(self.n_qubits) {
                out.push(Gate::CNOT { control: c, target: t });
            }
        }
        Ok(out)
    }

    pub(crate) fn slot_value(slot: ParamSlot, angles: &[f64], theta: &[f64]) -> f64 {
        match slot {
            ParamSlot::Angle(i) => angles[i],
            ParamSlot::Theta(i) => theta[i],
        }
    }

    pub(crate) fn apply_prim(state: &mut StateVector, p: &Prim, value: f64) {
        match p.kind {
            PrimKind::Rotation { axis, qubit } => {
                state.apply_single(qubit, super::gates::rotation_matrix(axis, value))
            }
            PrimKind::Cnot { control, target } => state.apply_cnot(control, target),
        }
    }

    /// Final state `U(θ)·RX(φ)|0…0⟩`.
    pub fn run(&self, angles: &[f64], theta: &[f64]) -> Result<StateVector> {
        self.check_inputs(angles, theta)?;
        let mut state = StateVector::zero(self.n_qubits)?;
        for p in &self.prims {
            let v = p.slot.map_or(0.0, |s| Self::slot_value(s, angles, theta));
            Self::apply_prim(&mut state, p, v);
        }
        Ok(state)
    }

    pub fn expectations(&self, angles: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        Ok(expect_z(&self.run(angles, theta)?))
    }
}

fn variational_prims(n: usize, layers: usize, connectivity: Connectivity) -> Vec<Prim> {
    let mut prims = Vec::new();
    let pairs = connectivity.pairs(n);
    for l in 0..layers {
        for q in 0..n {
            let base = (l * n + q) * 3;
            for (k, axis) in [Pauli::Z, Pauli::Y, Pauli::Z].into_iter().enumerate() {
                prims.push(Prim {
                    kind: PrimKind::Rotation { axis, qubit: q },
                    slot: Some(ParamSlot::Theta(base + k)),
                });
            }
        }
        for &(c, t) in &pairs {
            prims.push(Prim {
                kind: PrimKind::Cnot {
                    control: c,
                    target: t,
                },
                slot: None,
            });
        }
    }
    prims
}

/// Applies `RX(φ_i)` to qubit `i` for every `i`.
pub fn angle_encode(state: &mut StateVector, angles: &[f64]) -> Result<()> {
    if angles.len() != state.n_qubits() {
        return Err(Error::dim(format!(
            "{} encoding angles for {} qubits",
            angles.len(),
            state.n_qubits()
        )));
    }
    for (q, &a) in angles.iter().enumerate() {
        apply_rotation(state, Pauli::X, q, a)?;
    }
    Ok(())
}

/// Applies the `L` strongly entangling layers described by `params`.
pub fn entangling_layers(state: &mut StateVector, params: &QuantumLayerParams) -> Result<()> {
    if params.n_qubits != state.n_qubits() {
        return Err(Error::dim(format!(
            "layer params for {} qubits on a {}-qubit state",
            params.n_qubits,
            state.n_qubits()
        )));
    }
    for p in variational_prims(params.n_qubits, params.n_layers, params.connectivity) {
        let v = p.slot.map_or(0.0, |s| Circuit::slot_value(s, &[], &params.theta));
        Circuit::apply_prim(state, &p, v);
    }
    Ok(())
}

/// `⟨Z_i⟩ = Σ_b (±1)|a_b|²`, `+1` when bit `i` of `b` is clear.
pub fn expect_z(state: &StateVector) -> Vec<f64> {
    let n = state.n_qubits();
    let mut out = vec![0.0; n];
    for (b, a) in state.amplitudes().iter().enumerate() {
        let p = a.norm_sqr();
        for (q, o) in out.iter_mut().enumerate() {
            if b >> q & 1 == 0 {
                *o += p;
            } else {
                *o -= p;
            }
        }
    }
    out
}

/// Encode → entangle → measure, from a fresh register.
pub fn circuit_forward(angles: &[f64], params: &QuantumLayerParams) -> Result<Vec<f64>> {
    Circuit::for_params(params)?.expectations(angles, &params.theta)
}
