//! Central finite-difference checks of reverse-mode gradients.

use super::graph::{Graph, Var};
use super::Tensor;
use crate::error::Result;

/// Central differences `(f(x+εe_i) − f(x−εe_i)) / 2ε` at the given coordinates.
pub fn finite_difference<F>(mut f: F, x: &Tensor, coords: &[usize], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    let mut probe = x.clone();
    coords
        .iter()
        .map(|&i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + eps;
            let up = f(&probe)?;
            probe.data_mut()[i] = orig - eps;
            let down = f(&probe)?;
            probe.data_mut()[i] = orig;
            Ok((up - down) / (2.0 * eps))
        })
        .collect()
}

/// `max_i |a_i − n_i| / max(1, |a_i|)`.
pub fn relative_error(autodiff: &[f64], numeric: &[f64]) -> f64 {
    autodiff
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Compares the autodiff gradient of the scalar `f(x)` against central
/// differences over every coordinate of `x` and returns the maximum
/// relative error.
///
/// `f` must be deterministic: no training-mode dropout, fixed batchnorm mode.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let mut g = Graph::new();
    let xv = g.param(x.clone());
    let loss = f(&mut g, xv)?;
    g.backward(loss)?;
    let auto = g
        .grad(xv)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(x.shape()));
    let coords: Vec<usize> = (0..x.len()).collect();
    let numeric = finite_difference(
        |probe| {
            let mut g = Graph::new();
            let v = g.constant(probe.clone());
            let l = f(&mut g, v)?;
            g.value(l).item()
        },
        x,
        &coords,
        eps,
    )?;
    Ok(relative_error(auto.data(), &numeric))
}
