use super::elementwise::softmax_values;
use super::graph::{BackwardCtx, BackwardOp, Graph, Var};
use super::{shape_str, Tensor};
use crate::error::{Error, Result};

struct CrossEntropy {
    probs: Tensor,
    labels: Vec<usize>,
}

impl BackwardOp for CrossEntropy {
    fn name(&self) -> &'static str {
        "cross_entropy"
    }

    fn backward(&self, _: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let (b, c) = (self.probs.shape()[0], self.probs.shape()[1]);
        let scale = g.data()[0] / b as f64;
        let mut d = self.probs.clone();
        for (i, &l) in self.labels.iter().enumerate() {
            d.data_mut()[i * c + l] -= 1.0;
        }
        d.data_mut().iter_mut().for_each(|v| *v *= scale);
        vec![Some(d)]
    }
}

impl Graph {
    /// Mean negative log-likelihood of `labels` under `softmax(logits)`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let s = self.shape(logits);
        if s.len() != 2 || s[0] != labels.len() {
            return Err(Error::dim(format!(
                "cross_entropy logits {} with {} labels",
                shape_str(s),
                labels.len()
            )));
        }
        let (b, c) = (s[0], s[1]);
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::data(format!("label {bad} out of range for {c} classes")));
        }
        let x = self.value(logits);
        let mut total = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            let row = &x.data()[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[l];
        }
        let probs = softmax_values(x, 1);
        let out = Tensor::scalar(total / b as f64);
        Ok(self.record(
            &[logits],
            out,
            CrossEntropy {
                probs,
                labels: labels.to_vec(),
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::tensor::grad_check;

    #[test]
    fn symmetric_logits_give_ln2() {
        let mut g = Graph::new();
        let l = g.constant(Tensor::zeros(&[1, 2]));
        let ce = g.cross_entropy(l, &[0]).unwrap();
        assert!((g.value(ce).item().unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_is_near_zero() {
        let mut g = Graph::new();
        let l = g.constant(Tensor::new(vec![1, 2], vec![20.0, -20.0]).unwrap());
        let ce = g.cross_entropy(l, &[0]).unwrap();
        assert!(g.value(ce).item().unwrap() <= 1e-8);
    }

    #[test]
    fn out_of_range_label_is_data_error() {
        let mut g = Graph::new();
        let l = g.constant(Tensor::zeros(&[2, 2]));
        assert!(matches!(g.cross_entropy(l, &[0, 2]), Err(Error::Data(_))));
    }

    #[test]
    fn matches_softmax_log_composition_and_gradient() {
        let mut rng = Rng::new(7);
        let x = Tensor::from_fn(&[6, 2], |_| rng.uniform_range(-3.0, 3.0));
        let labels = [0, 1, 1, 0, 1, 0];
        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let ce = g.cross_entropy(xv, &labels).unwrap();
        let mut oracle = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            let (a, b) = (x.data()[2 * i], x.data()[2 * i + 1]);
            let p = [a.exp() / (a.exp() + b.exp()), b.exp() / (a.exp() + b.exp())];
            oracle -= p[l].ln();
        }
        oracle /= 6.0;
        assert!((g.value(ce).item().unwrap() - oracle).abs() < 1e-12);

        let e = grad_check(|g, v| g.cross_entropy(v, &labels), &x, 1e-5).unwrap();
        assert!(e < 1e-9, "{e}");
    }
}
