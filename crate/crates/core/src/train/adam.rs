//! Bias-corrected Adam.

use crate::error::{Error, Result};
use crate::model::OptimizerState;
use crate::tensor::{shape_str, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One update: `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
/// `p ← p − lr·m̂/(√v̂ + ε)` with `m̂ = m/(1−β₁ᵗ)`, `v̂ = v/(1−β₂ᵗ)`.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut OptimizerState,
    lr: f64,
    hp: AdamHyper,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || state.m.len() != state.v.len() {
        return Err(Error::contract(format!(
            "adam: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(Error::contract(format!(
                "adam: param {} with grad {}",
                shape_str(p.shape()),
                shape_str(g.shape())
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (c1, c2) = (1.0 - hp.beta1.powi(t), 1.0 - hp.beta2.powi(t));
    for (i, p) in params.iter_mut().enumerate() {
        let (m, v, g) = (state.m[i].data_mut(), state.v[i].data_mut(), grads[i].data());
        for (k, w) in p.data_mut().iter_mut().enumerate() {
            m[k] = hp.beta1 * m[k] + (1.0 - hp.beta1) * g[k];
            v[k] = hp.beta2 * v[k] + (1.0 - hp.beta2) * g[k] * g[k];
            *w -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + hp.eps);
        }
    }
    Ok(())
}

/// Adam bound to a fixed list of parameter shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub hyper: AdamHyper,
    pub state: OptimizerState,
}

impl Adam {
    pub fn new(shapes: &[&[usize]], hyper: AdamHyper) -> Self {
        let zeros = || shapes.iter().map(|s| Tensor::zeros(s)).collect::<Vec<_>>();
        Self { hyper, state: OptimizerState { step: 0, m: zeros(), v: zeros() } }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
        adam_step(params, grads, &mut self.state, lr, self.hyper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_signed_lr() {
        let mut p = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let g = Tensor::new(vec![3], vec![0.3, -4.0, 1e-3]).unwrap();
        let mut adam = Adam::new(&[&[3]], AdamHyper::default());
        adam.step(&mut [&mut p], &[g.clone()], 1e-3).unwrap();
        for (k, (&after, before)) in p.data().iter().zip([1.0, -2.0, 0.5]).enumerate() {
            let gk = g.data()[k];
            let want = before - 1e-3 * gk / (gk.abs() + 1e-8);
            assert!((after - want).abs() < 1e-14);
            assert!((after - (before - 1e-3 * gk.signum())).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_gradient_never_moves() {
        let mut p = Tensor::new(vec![2], vec![0.7, -0.1]).unwrap();
        let mut adam = Adam::new(&[&[2]], AdamHyper::default());
        for _ in 0..10 {
            adam.step(&mut [&mut p], &[Tensor::zeros(&[2])], 1e-2).unwrap();
        }
        assert_eq!(p.data(), [0.7, -0.1]);
    }

    #[test]
    fn matches_hand_recurrence() {
        let hp = AdamHyper::default();
        let mut p = Tensor::new(vec![3], vec![0.1, 0.2, 0.3]).unwrap();
        let gs = [[0.5, -0.25, 1.0], [0.1, 0.4, -2.0]];
        let mut adam = Adam::new(&[&[3]], hp);
        for g in gs {
            adam.step(&mut [&mut p], &[Tensor::new(vec![3], g.to_vec()).unwrap()], 0.01).unwrap();
        }
        for k in 0..3 {
            let (mut w, mut m, mut v) = ([0.1, 0.2, 0.3][k], 0.0, 0.0);
            for (t, g) in gs.iter().enumerate() {
                let t = t as i32 + 1;
                m = 0.9 * m + 0.1 * g[k];
                v = 0.999 * v + 0.001 * g[k] * g[k];
                w -= 0.01 * (m / (1.0 - 0.9f64.powi(t))) / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
            }
            assert!((p.data()[k] - w).abs() < 1e-12);
        }
        assert_eq!(adam.state.step, 2);
    }

    #[test]
    fn shape_mismatch_is_contract_error() {
        let mut p = Tensor::zeros(&[2]);
        let mut adam = Adam::new(&[&[2]], AdamHyper::default());
        assert!(matches!(adam.step(&mut [&mut p], &[Tensor::zeros(&[3])], 0.1), Err(Error::Contract(_))));
        assert!(matches!(adam.step(&mut [&mut p], &[], 0.1), Err(Error::Contract(_))));
    }
}
