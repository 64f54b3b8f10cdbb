use std::fmt;

use num_complex::Complex64;

use super::state::StateVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// Applies the Pauli matrix itself (not a rotation) to qubit `q`.
    pub(crate) fn apply(self, state: &mut StateVector, q: usize) {
        let (o, z, i) = (
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 1.0),
        );
        let m = match self {
            Pauli::X => [[z, o], [o, z]],
            Pauli::Y => [[z, -i], [i, z]],
            Pauli::Z => [[o, z], [z, -o]],
        };
        state.apply_single(q, m);
    }
}

/// Gate set of the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    RX { qubit: usize, angle: f64 },
    RY { qubit: usize, angle: f64 },
    RZ { qubit: usize, angle: f64 },
    /// `RZ(γ)·RY(β)·RZ(α)`, i.e. `RZ(α)` acts first.
    Rot { qubit: usize, angles: [f64; 3] },
    CNOT { control: usize, target: usize },
}

/// `exp(−iφP/2)` as a 2×2 matrix.
pub(crate) fn rotation_matrix(axis: Pauli, angle: f64) -> [[Complex64; 2]; 2] {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let re = |v: f64| Complex64::new(v, 0.0);
    match axis {
        Pauli::X => [
            [re(c), Complex64::new(0.0, -s)],
            [Complex64::new(0.0, -s), re(c)],
        ],
        Pauli::Y => [[re(c), re(-s)], [re(s), re(c)]],
        Pauli::Z => [
            [Complex64::new(c, -s), re(0.0)],
            [re(0.0), Complex64::new(c, s)],
        ],
    }
}

impl Gate {
    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        match *self {
            Gate::RX { qubit, angle } => apply_rotation(state, Pauli::X, qubit, angle),
            Gate::RY { qubit, angle } => apply_rotation(state, Pauli::Y, qubit, angle),
            Gate::RZ { qubit, angle } => apply_rotation(state, Pauli::Z, qubit, angle),
            Gate::Rot { qubit, angles } => {
                apply_rotation(state, Pauli::Z, qubit, angles[0])?;
                apply_rotation(state, Pauli::Y, qubit, angles[1])?;
                apply_rotation(state, Pauli::Z, qubit, angles[2])
            }
            Gate::CNOT { control, target } => {
                state.check_qubit(control)?;
                state.check_qubit(target)?;
                if control == target {
                    return Err(Error::dim(format!(
                        "CNOT control and target are both qubit {control}"
                    )));
                }
                state.apply_cnot(control, target);
                Ok(())
            }
        }
    }
}

pub(crate) fn apply_rotation(
    state: &mut StateVector,
    axis: Pauli,
    qubit: usize,
    angle: f64,
) -> Result<()> {
    state.check_qubit(qubit)?;
    state.apply_single(qubit, rotation_matrix(axis, angle));
    Ok(())
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::RX { qubit, angle } => write!(f, "RX q{qubit} {angle:.6}"),
            Gate::RY { qubit, angle } => write!(f, "RY q{qubit} {angle:.6}"),
            Gate::RZ { qubit, angle } => write!(f, "RZ q{qubit} {angle:.6}"),
            Gate::Rot { qubit, angles } => write!(
                f,
                "Rot q{qubit} {:.6} {:.6} {:.6}",
                angles[0], angles[1], angles[2]
            ),
            Gate::CNOT { control, target } => write!(f, "CNOT q{control} q{target}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn rx_pi_is_minus_i_x() {
        let mut s = StateVector::zero(1).unwrap();
        Gate::RX { qubit: 0, angle: PI }.apply(&mut s).unwrap();
        assert!(close(s.amplitudes()[0], Complex64::new(0.0, 0.0)));
        assert!(close(s.amplitudes()[1], Complex64::new(0.0, -1.0)));
    }

    #[test]
    fn ry_half_pi() {
        let mut s = StateVector::zero(1).unwrap();
        Gate::RY { qubit: 0, angle: PI / 2.0 }.apply(&mut s).unwrap();
        let h = (PI / 4.0).cos();
        assert!(close(s.amplitudes()[0], Complex64::new(h, 0.0)));
        assert!(close(s.amplitudes()[1], Complex64::new((PI / 4.0).sin(), 0.0)));
        assert!((s.amplitudes()[0].re - 0.70711).abs() < 1e-5);
    }

    #[test]
    fn cnot_truth_table() {
        // qubit 0 set: index 1 (|01⟩ in big-endian ket notation)
        let mut s = StateVector::basis(2, 0b01).unwrap();
        Gate::CNOT { control: 0, target: 1 }.apply(&mut s).unwrap();
        assert_eq!(s.amplitudes()[0b11], Complex64::new(1.0, 0.0));
        let mut s = StateVector::basis(2, 0b10).unwrap();
        Gate::CNOT { control: 0, target: 1 }.apply(&mut s).unwrap();
        assert_eq!(s.amplitudes()[0b10], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn bad_indices_are_dimension_errors() {
        let mut s = StateVector::zero(2).unwrap();
        assert!(matches!(
            Gate::RX { qubit: 2, angle: 0.1 }.apply(&mut s),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            Gate::CNOT { control: 1, target: 1 }.apply(&mut s),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            Gate::CNOT { control: 0, target: 5 }.apply(&mut s),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rot_matches_its_decomposition() {
        let angles = [0.3, -1.1, 2.2];
        let mut a = StateVector::zero(2).unwrap();
        Gate::RY { qubit: 0, angle: 0.7 }.apply(&mut a).unwrap();
        let mut b = a.clone();
        Gate::Rot { qubit: 0, angles }.apply(&mut a).unwrap();
        for g in [
            Gate::RZ { qubit: 0, angle: angles[0] },
            Gate::RY { qubit: 0, angle: angles[1] },
            Gate::RZ { qubit: 0, angle: angles[2] },
        ] {
            g.apply(&mut b).unwrap();
        }
        assert_eq!(a, b);
    }
}
