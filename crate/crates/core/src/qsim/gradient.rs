//! Gradients of `Σ_j u_j ⟨Z_j⟩` with respect to encoding angles and θ.
//!
//! Every parameterised gate is `exp(−ip P/2)` for a Pauli `P`, so both the
//! two-term parameter-shift rule and the adjoint (reverse-sweep) method
//! are exact.

use std::f64::consts::FRAC_PI_2;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::circuit::{Circuit, ParamSlot, PrimKind};
use super::gates::rotation_matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradMethod {
    ParameterShift,
    #[default]
    Adjoint,
}

impl FromStr for GradMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "parameter-shift" | "parameter_shift" | "shift" => Ok(GradMethod::ParameterShift),
            "adjoint" | "statevector-adjoint" => Ok(GradMethod::Adjoint),
            other => Err(Error::config(format!(
                "unknown gradient method '{other}' (expected parameter-shift or adjoint)"
            ))),
        }
    }
}

impl std::fmt::Display for GradMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GradMethod::ParameterShift => "parameter-shift",
            GradMethod::Adjoint => "adjoint",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGrad {
    pub d_angles: Vec<f64>,
    pub d_theta: Vec<f64>,
}

impl CircuitGrad {
    fn zeros(n: usize, t: usize) -> Self {
        Self {
            d_angles: vec![0.0; n],
            d_theta: vec![0.0; t],
        }
    }

    fn slot_mut(&mut self, slot: ParamSlot) -> &mut f64 {
        match slot {
            ParamSlot::Angle(i) => &mut self.d_angles[i],
            ParamSlot::Theta(i) => &mut self.d_theta[i],
        }
    }

    pub fn max_abs_diff(&self, other: &CircuitGrad) -> f64 {
        self.d_angles
            .iter()
            .zip(&other.d_angles)
            .chain(self.d_theta.iter().zip(&other.d_theta))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Vector-Jacobian product of the circuit for cotangent `upstream`.
pub fn circuit_gradient(
    circuit: &Circuit,
    angles: &[f64],
    theta: &[f64],
    upstream: &[f64],
    method: GradMethod,
) -> Result<CircuitGrad> {
    circuit.check_inputs(angles, theta)?;
    if upstream.len() != circuit.n_qubits() {
        return Err(Error::dim(format!(
            "upstream cotangent of length {} for {} qubits",
            upstream.len(),
            circuit.n_qubits()
        )));
    }
    match method {
        GradMethod::ParameterShift => parameter_shift(circuit, angles, theta, upstream),
        GradMethod::Adjoint => adjoint(circuit, angles, theta, upstream),
    }
}

fn weighted(exps: &[f64], upstream: &[f64]) -> f64 {
    exps.iter().zip(upstream).map(|(e, u)| e * u).sum()
}

fn parameter_shift(
    circuit: &Circuit,
    angles: &[f64],
    theta: &[f64],
    upstream: &[f64],
) -> Result<CircuitGrad> {
    let mut grad = CircuitGrad::zeros(angles.len(), theta.len());
    let (mut a, mut t) = (angles.to_vec(), theta.to_vec());
    let slots = (0..angles.len())
        .map(ParamSlot::Angle)
        .chain((0..theta.len()).map(ParamSlot::Theta));
    for slot in slots {
        let shifted = |a: &mut Vec<f64>, t: &mut Vec<f64>, delta: f64| -> Result<f64> {
            let cell = match slot {
                ParamSlot::Angle(i) => &mut a[i],
                ParamSlot::Theta(i) => &mut t[i],
            };
            let orig = *cell;
            *cell = orig + delta;
            let e = circuit.expectations(a, t);
            match slot {
                ParamSlot::Angle(i) => a[i] = orig,
                ParamSlot::Theta(i) => t[i] = orig,
            }
            Ok(weighted(&e?, upstream))
        };
        let plus = shifted(&mut a, &mut t, FRAC_PI_2)?;
        let minus = shifted(&mut a, &mut t, -FRAC_PI_2)?;
        *grad.slot_mut(slot) += (plus - minus) / 2.0;
    }
    Ok(grad)
}

fn adjoint(
    circuit: &Circuit,
    angles: &[f64],
    theta: &[f64],
    upstream: &[f64],
) -> Result<CircuitGrad> {
    let mut grad = CircuitGrad::zeros(angles.len(), theta.len());
    let mut psi = circuit.run(angles, theta)?;
    // λ = H|ψ⟩ with H = Σ_j u_j Z_j, diagonal in the computational basis.
    let mut lambda = psi.clone();
    for (b, amp) in lambda.amplitudes_mut().iter_mut().enumerate() {
        let h: f64 = upstream
            .iter()
            .enumerate()
            .map(|(q, u)| if b >> q & 1 == 0 { *u } else { -*u })
            .sum();
        *amp *= h;
    }
    let mut scratch = psi.clone();
    for p in circuit.prims().iter().rev() {
        match p.kind {
            PrimKind::Rotation { axis, qubit } => {
                let value = Circuit::slot_value(p.slot.expect("rotations are parameterised"), angles, theta);
                // dC/dp = 2 Re⟨λ|(−iP/2)ψ⟩ = Im⟨λ|Pψ⟩
                scratch.amplitudes_mut().copy_from_slice(psi.amplitudes());
                axis.apply(&mut scratch, qubit);
                let overlap: Complex64 = lambda.inner(&scratch);
                if let Some(slot) = p.slot {
                    *grad.slot_mut(slot) += overlap.im;
                }
                let inv = rotation_matrix(axis, -value);
                psi.apply_single(qubit, inv);
                lambda.apply_single(qubit, inv);
            }
            PrimKind::Cnot { control, target } => {
                psi.apply_cnot(control, target);
                lambda.apply_cnot(control, target);
            }
        }
    }
    Ok(grad)
}

/// Central-difference reference, used by the verification commands.
pub fn finite_difference_gradient(
    circuit: &Circuit,
    angles: &[f64],
    theta: &[f64],
    upstream: &[f64],
    eps: f64,
) -> Result<CircuitGrad> {
    circuit.check_inputs(angles, theta)?;
    let mut grad = CircuitGrad::zeros(angles.len(), theta.len());
    let f = |a: &[f64], t: &[f64]| -> Result<f64> { Ok(weighted(&circuit.expectations(a, t)?, upstream)) };
    let mut a = angles.to_vec();
    for i in 0..a.len() {
        let o = a[i];
        a[i] = o + eps;
        let up = f(&a, theta)?;
        a[i] = o - eps;
        let down = f(&a, theta)?;
        a[i] = o;
        grad.d_angles[i] = (up - down) / (2.0 * eps);
    }
    let mut t = theta.to_vec();
    for i in 0..t.len() {
        let o = t[i];
        t[i] = o + eps;
        let up = f(angles, &t)?;
        t[i] = o - eps;
        let down = f(angles, &t)?;
        t[i] = o;
        grad.d_theta[i] = (up - down) / (2.0 * eps);
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::Connectivity;
    use crate::rng::Rng;
    use std::f64::consts::PI;

    #[test]
    fn ry_only_circuit_derivative_is_minus_sine() {
        // One qubit, no encoding (φ = 0), Rot(0, θ, 0) = RY(θ).
        let c = Circuit::new(1, 1, Connectivity::Linear).unwrap();
        let theta = [0.0, PI / 3.0, 0.0];
        for method in [GradMethod::Adjoint, GradMethod::ParameterShift] {
            let g = circuit_gradient(&c, &[0.0], &theta, &[1.0], method).unwrap();
            assert!((g.d_theta[1] + (PI / 3.0).sin()).abs() < 1e-12);
            assert!((g.d_theta[1] + 0.866025).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_point_is_stationary() {
        let c = Circuit::new(4, 2, Connectivity::Ring).unwrap();
        for method in [GradMethod::Adjoint, GradMethod::ParameterShift] {
            let g = circuit_gradient(&c, &[0.0; 4], &[0.0; 24], &[1.0, -0.5, 2.0, 0.3], method)
                .unwrap();
            assert!(g.d_theta.iter().chain(&g.d_angles).all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn three_way_agreement_on_random_instances() {
        let mut rng = Rng::new(77);
        for conn in Connectivity::ALL {
            let c = Circuit::new(4, 2, conn).unwrap();
            for _ in 0..5 {
                let a: Vec<f64> = (0..4).map(|_| rng.uniform_range(-PI, PI)).collect();
                let t: Vec<f64> = (0..24).map(|_| rng.uniform_range(0.0, 2.0 * PI)).collect();
                let u: Vec<f64> = (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
                let ps = circuit_gradient(&c, &a, &t, &u, GradMethod::ParameterShift).unwrap();
                let adj = circuit_gradient(&c, &a, &t, &u, GradMethod::Adjoint).unwrap();
                let fd = finite_difference_gradient(&c, &a, &t, &u, 1e-5).unwrap();
                assert!(ps.max_abs_diff(&adj) < 1e-10);
                assert!(ps.max_abs_diff(&fd) < 1e-6);
            }
        }
    }

    #[test]
    fn method_parse_and_upstream_length() {
        assert_eq!("adjoint".parse::<GradMethod>().unwrap(), GradMethod::Adjoint);
        assert_eq!(
            "parameter-shift".parse::<GradMethod>().unwrap(),
            GradMethod::ParameterShift
        );
        assert!(matches!("backprop".parse::<GradMethod>(), Err(Error::Config(_))));
        let c = Circuit::new(2, 1, Connectivity::Ring).unwrap();
        assert!(circuit_gradient(&c, &[0.0; 2], &[0.0; 6], &[1.0], GradMethod::Adjoint).is_err());
    }
}
