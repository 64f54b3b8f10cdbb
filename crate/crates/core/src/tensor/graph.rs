use std::fmt;

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule of a recorded op.
///
/// `backward` receives the cotangent of the op's output and returns one
/// entry per input, in input order. `None` means "no gradient", which is
/// fine for inputs that do not require one.
pub trait BackwardOp: Send + Sync {
    fn name(&self) -> &'static str;
    fn backward(&self, ctx: &BackwardCtx<'_>, grad_out: &Tensor) -> Vec<Option<Tensor>>;
}

/// Read access to an op's inputs and output during the backward sweep.
pub struct BackwardCtx<'a> {
    graph: &'a Graph,
    inputs: &'a [Var],
    output: Var,
}

impl BackwardCtx<'_> {
    pub fn input(&self, i: usize) -> &Tensor {
        self.graph.value(self.inputs[i])
    }

    pub fn output(&self) -> &Tensor {
        self.graph.value(self.output)
    }

    pub fn needs_grad(&self, i: usize) -> bool {
        self.graph.requires_grad(self.inputs[i])
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }
}

struct Node {
    value: Tensor,
    requires_grad: bool,
    inputs: Vec<Var>,
    op: Option<Box<dyn BackwardOp>>,
    grad: Option<Tensor>,
}

/// Append-only computation graph. Node creation order is a topological order.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("nodes", &self.nodes.len())
            .finish()
    }
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

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            inputs: Vec::new(),
            op: None,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf: receives a gradient on `backward`.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn any_requires_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|&v| self.requires_grad(v))
    }

    /// Accumulated gradient of a tracked leaf, if any has been computed.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    /// Name of the op that produced `v`, or `"leaf"`.
    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.as_ref().map_or("leaf", |op| op.name())
    }

    /// Appends an op node. The backward rule is dropped when no input is tracked.
    pub fn record<O: BackwardOp + 'static>(&mut self, inputs: &[Var], value: Tensor, op: O) -> Var {
        let requires_grad = self.any_requires_grad(inputs);
        self.nodes.push(Node {
            value,
            requires_grad,
            inputs: inputs.to_vec(),
            op: requires_grad.then(|| Box::new(op) as Box<dyn BackwardOp>),
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Clears every accumulated leaf gradient.
    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    /// Propagates `d loss / d leaf` into every tracked leaf reachable from `loss`.
    ///
    /// Gradients add onto whatever earlier calls left behind.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let mut pending: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        pending[loss.0] = Some(Tensor::full(lv.shape(), 1.0));
        let mut leaf_grads = Vec::new();

        for i in (0..=loss.0).rev() {
            let Some(g) = pending[i].take() else { continue };
            let node = &self.nodes[i];
            let Some(op) = node.op.as_ref() else {
                if node.requires_grad {
                    leaf_grads.push((i, g));
                }
                continue;
            };
            let ctx = BackwardCtx {
                graph: self,
                inputs: &node.inputs,
                output: Var(i),
            };
            let input_grads = op.backward(&ctx, &g);
            debug_assert_eq!(input_grads.len(), node.inputs.len(), "{}", op.name());
            for (inp, ig) in node.inputs.iter().zip(input_grads) {
                let Some(ig) = ig else { continue };
                if !self.nodes[inp.0].requires_grad {
                    continue;
                }
                debug_assert_eq!(
                    ig.shape(),
                    self.nodes[inp.0].value.shape(),
                    "gradient shape from {}",
                    op.name()
                );
                match &mut pending[inp.0] {
                    Some(acc) => acc.add_assign(&ig),
                    slot @ None => *slot = Some(ig),
                }
            }
        }

        for (i, g) in leaf_grads {
            match &mut self.nodes[i].grad {
                Some(acc) => acc.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }
}
