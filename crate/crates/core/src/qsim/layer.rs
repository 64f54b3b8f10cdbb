//! The circuit as a node of the autodiff graph.

use super::circuit::Circuit;
use super::gradient::{circuit_gradient, GradMethod};
use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{BackwardCtx, BackwardOp, Graph, Tensor, Var};

/// Batched circuit evaluation: angles `[B, n]` and θ `[L, n, 3]` to
/// expectations `[B, n]`. Samples are simulated independently.
#[derive(Debug, Clone)]
pub struct QuantumLayer {
    circuit: Circuit,
    method: GradMethod,
}

impl QuantumLayer {
    pub fn new(circuit: Circuit, method: GradMethod) -> Self {
        Self { circuit, method }
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn method(&self) -> GradMethod {
        self.method
    }

    pub fn forward(&self, graph: &mut Graph, angles: Var, theta: Var) -> Result<Var> {
        let n = self.circuit.n_qubits();
        let (sa, st) = (graph.shape(angles).to_vec(), graph.shape(theta).to_vec());
        if sa.len() != 2 || sa[1] != n || st != [self.circuit.n_layers(), n, 3] {
            return Err(Error::dim(format!(
                "quantum layer angles {sa:?} theta {st:?} for {n} qubits, {} layers",
                self.circuit.n_layers()
            )));
        }
        let batch = sa[0];
        let (av, tv) = (graph.value(angles).data(), graph.value(theta).data());
        let rows = par::map_indexed(batch, |b| {
            self.circuit.expectations(&av[b * n..(b + 1) * n], tv)
        });
        let mut data = Vec::with_capacity(batch * n);
        for r in rows {
            data.extend(r?);
        }
        let out = Tensor::new(vec![batch, n], data)?;
        Ok(graph.record(&[angles, theta], out, QuantumBackward(self.clone())))
    }
}

struct QuantumBackward(QuantumLayer);

impl BackwardOp for QuantumBackward {
    fn name(&self) -> &'static str {
        "quantum_layer"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let layer = &self.0;
        let n = layer.circuit.n_qubits();
        let (angles, theta) = (ctx.input(0), ctx.input(1));
        let batch = angles.shape()[0];
        let grads = par::map_indexed(batch, |b| {
            circuit_gradient(
                &layer.circuit,
                &angles.data()[b * n..(b + 1) * n],
                theta.data(),
                &g.data()[b * n..(b + 1) * n],
                layer.method,
            )
            .expect("inputs validated in forward")
        });
        let mut da = Vec::with_capacity(batch * n);
        let mut dt = vec![0.0; theta.len()];
        for cg in grads {
            da.extend_from_slice(&cg.d_angles);
            dt.iter_mut().zip(&cg.d_theta).for_each(|(a, v)| *a += v);
        }
        vec![
            ctx.needs_grad(0)
                .then(|| Tensor::new(angles.shape().to_vec(), da).unwrap()),
            ctx.needs_grad(1)
                .then(|| Tensor::new(theta.shape().to_vec(), dt).unwrap()),
        ]
    }
}
