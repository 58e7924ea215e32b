//! Dense statevector simulation of the generator circuits.
//!
//! Qubit 0 is the most significant bit of an amplitude index: in an `n`-qubit
//! state, qubit `q` is bit `n - 1 - q` of the index. Bitstrings are written
//! with qubit 0 first. Rotations use `R_a(t) = exp(-i t a / 2)` for a Pauli
//! axis `a`, so `R_x(z)|0>` has `<Z> = cos z` and the `pi/2` shift rule is
//! exact for every trainable gate.

mod ansatz;
mod gradient;
mod state;

pub use ansatz::{
    apply_circuit, build_ansatz, identity_block_init, random_init, Angle, Ansatz, AnsatzLayout, Axis,
    BasisAssignment, CircuitKind, GateOp, InitStrategy,
};
pub use gradient::{
    circuit_expectations, jacobian_forward_diff, jacobian_param_shift, Jacobian, Readout, Wrt,
    DEFAULT_FD_STEP,
};
pub use state::{
    expect_z_analytic, expect_z_from_sample, prepare_latent_state, sample_bitstrings, sample_z_expectations,
    QubitState, ShotSample, MAX_QUBITS,
};
