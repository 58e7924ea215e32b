use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::QubitState;
use crate::error::{ensure_arg, Error, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Matrix of `exp(-i angle P / 2)` for this Pauli axis.
    pub fn rotation_matrix(self, angle: f64) -> [[Complex64; 2]; 2] {
        let (s, c) = (angle / 2.0).sin_cos();
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Axis::X => [
                [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
            ],
            Axis::Y => [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ],
            Axis::Z => [[Complex64::new(c, -s), zero], [zero, Complex64::new(c, s)]],
        }
    }
}

/// The four circuit families.
///
/// - `C1`: random-basis rotation per qubit, then a CNOT chain `i -> i+1`.
/// - `C2`: random-basis rotation per qubit, then the reversed chain `i+1 -> i`.
/// - `C3`: `R_x R_y R_z` on every qubit, then the `C1` chain.
/// - `C4`: random-basis rotations only, no entanglers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CircuitKind {
    C1,
    C2,
    C3,
    C4,
}

impl CircuitKind {
    pub const ALL: [CircuitKind; 4] = [CircuitKind::C1, CircuitKind::C2, CircuitKind::C3, CircuitKind::C4];
}

impl fmt::Display for CircuitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CircuitKind::C1 => "C1",
            CircuitKind::C2 => "C2",
            CircuitKind::C3 => "C3",
            CircuitKind::C4 => "C4",
        };
        f.write_str(s)
    }
}

impl FromStr for CircuitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C1" | "1" => Ok(CircuitKind::C1),
            "C2" | "2" => Ok(CircuitKind::C2),
            "C3" | "3" => Ok(CircuitKind::C3),
            "C4" | "4" => Ok(CircuitKind::C4),
            other => Err(Error::invalid(format!("unknown circuit kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    #[default]
    Random,
    IdentityBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    /// Trainable angle `theta[slot]`; its axis is `bases[slot]`.
    Slot(usize),
    Fixed {
        axis: Axis,
        radians: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GateOp {
    Rotation { qubit: usize, angle: Angle },
    Cnot { control: usize, target: usize },
}

impl GateOp {
    fn trainable(qubit: usize, slot: usize) -> Self {
        GateOp::Rotation { qubit, angle: Angle::Slot(slot) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzLayout {
    pub n_qubits: usize,
    pub depth: usize,
    pub kind: CircuitKind,
    /// Gates grouped by layer, applied layer by layer in list order.
    pub layers: Vec<Vec<GateOp>>,
    pub n_params: usize,
}

impl AnsatzLayout {
    pub fn gates(&self) -> impl Iterator<Item = &GateOp> {
        self.layers.iter().flatten()
    }

    pub fn cnot_count(&self) -> usize {
        self.gates().filter(|g| matches!(g, GateOp::Cnot { .. })).count()
    }

    /// Checks qubit ranges, CNOT operands and that every slot is used once.
    pub fn validate(&self) -> Result<()> {
        ensure_arg!(self.n_qubits >= 1, "layout has no qubits");
        let mut seen = vec![false; self.n_params];
        for gate in self.gates() {
            match *gate {
                GateOp::Rotation { qubit, angle } => {
                    ensure_arg!(qubit < self.n_qubits, "rotation qubit {qubit} out of range");
                    if let Angle::Slot(slot) = angle {
                        ensure_arg!(slot < self.n_params, "slot {slot} out of range");
                        ensure_arg!(!seen[slot], "slot {slot} used twice");
                        seen[slot] = true;
                    }
                }
                GateOp::Cnot { control, target } => {
                    ensure_arg!(
                        control < self.n_qubits && target < self.n_qubits,
                        "CNOT operand out of range"
                    );
                    ensure_arg!(control != target, "CNOT control equals target");
                }
            }
        }
        ensure_arg!(seen.iter().all(|&s| s), "some parameter slots are unused");
        Ok(())
    }
}

/// Rotation axis per trainable slot, fixed for the lifetime of a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisAssignment {
    bases: Vec<Axis>,
}

impl BasisAssignment {
    pub fn new(bases: Vec<Axis>) -> Self {
        Self { bases }
    }

    pub fn as_slice(&self) -> &[Axis] {
        &self.bases
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn axis(&self, slot: usize) -> Axis {
        self.bases[slot]
    }
}

/// A circuit layout together with its basis assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ansatz {
    pub layout: AnsatzLayout,
    pub bases: BasisAssignment,
}

impl Ansatz {
    pub fn n_qubits(&self) -> usize {
        self.layout.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_params
    }
}

fn entanglers(kind: CircuitKind, n: usize) -> Vec<GateOp> {
    match kind {
        CircuitKind::C1 | CircuitKind::C3 => {
            (0..n.saturating_sub(1)).map(|i| GateOp::Cnot { control: i, target: i + 1 }).collect()
        }
        CircuitKind::C2 => {
            (0..n.saturating_sub(1)).map(|i| GateOp::Cnot { control: i + 1, target: i }).collect()
        }
        CircuitKind::C4 => Vec::new(),
    }
}

/// Builds the layered circuit and draws its rotation bases.
///
/// A pure function of its arguments.
pub fn build_ansatz(kind: CircuitKind, n_qubits: usize, depth: usize, seed: u64) -> Result<Ansatz> {
    ensure_arg!(n_qubits >= 1, "need at least one qubit");
    ensure_arg!(n_qubits <= super::MAX_QUBITS, "at most {} qubits supported", super::MAX_QUBITS);
    ensure_arg!(depth >= 1, "depth must be at least 1");

    let mut rng = stream(seed, Stream::Basis);
    let mut layers = Vec::with_capacity(depth);
    let mut bases = Vec::new();
    for _ in 0..depth {
        let mut layer = Vec::new();
        for q in 0..n_qubits {
            match kind {
                CircuitKind::C3 => {
                    for axis in Axis::ALL {
                        layer.push(GateOp::trainable(q, bases.len()));
                        bases.push(axis);
                    }
                }
                _ => {
                    layer.push(GateOp::trainable(q, bases.len()));
                    bases.push(Axis::ALL[rng.random_range(0..3)]);
                }
            }
        }
        layer.extend(entanglers(kind, n_qubits));
        layers.push(layer);
    }
    let layout = AnsatzLayout { n_qubits, depth, kind, layers, n_params: bases.len() };
    layout.validate()?;
    Ok(Ansatz { layout, bases: BasisAssignment::new(bases) })
}

/// Applies `layout` to `state` in place.
pub(crate) fn apply_in_place(
    state: &mut QubitState,
    layout: &AnsatzLayout,
    bases: &BasisAssignment,
    theta: &[f64],
) -> Result<()> {
    ensure_arg!(
        theta.len() == layout.n_params,
        "expected {} circuit parameters, got {}",
        layout.n_params,
        theta.len()
    );
    ensure_arg!(
        bases.len() == layout.n_params,
        "basis assignment has {} entries for {} slots",
        bases.len(),
        layout.n_params
    );
    ensure_arg!(
        state.n_qubits() == layout.n_qubits,
        "state has {} qubits, layout expects {}",
        state.n_qubits(),
        layout.n_qubits
    );
    for gate in layout.gates() {
        match *gate {
            GateOp::Rotation { qubit, angle: Angle::Slot(slot) } => {
                state.apply_rotation(bases.axis(slot), qubit, theta[slot]);
            }
            GateOp::Rotation { qubit, angle: Angle::Fixed { axis, radians } } => {
                state.apply_rotation(axis, qubit, radians);
            }
            GateOp::Cnot { control, target } => state.apply_cnot(control, target),
        }
    }
    Ok(())
}

/// `U_nu(theta)|state>`.
pub fn apply_circuit(
    state: &QubitState,
    layout: &AnsatzLayout,
    bases: &BasisAssignment,
    theta: &[f64],
) -> Result<QubitState> {
    let mut out = state.clone();
    apply_in_place(&mut out, layout, bases, theta)?;
    Ok(out)
}

fn uniform_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // (-pi, pi]
    PI - 2.0 * PI * rng.random::<f64>()
}

/// Independent `U(-pi, pi]` angles for every slot.
pub fn random_init(ansatz: &Ansatz, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Stream::Init);
    (0..ansatz.n_params()).map(|_| uniform_angle(&mut rng)).collect()
}

/// Identity-block initialization with blocks of one layer.
///
/// Layers are paired `(0, 1), (2, 3), ...`. The first layer of each pair keeps
/// its gates and gets random angles; the second is rebuilt as the adjoint of
/// the first: the same gates in reverse order, copying the bases, with negated
/// angles. Every pair is therefore exactly the identity at initialization and
/// all mirrored angles remain independent trainable slots. With odd depth the
/// last layer is left as built and initialized randomly.
///
/// Returns the rewritten ansatz and its initial angles.
pub fn identity_block_init(ansatz: &Ansatz, seed: u64) -> Result<(Ansatz, Vec<f64>)> {
    ansatz.layout.validate()?;
    let mut rng = stream(seed, Stream::Init);
    let old = &ansatz.layout;

    let mut layers = Vec::with_capacity(old.layers.len());
    let mut bases = Vec::with_capacity(old.n_params);
    let mut theta = Vec::with_capacity(old.n_params);

    let mut push_random_layer = |gates: &[GateOp],
                                 layers: &mut Vec<Vec<GateOp>>,
                                 bases: &mut Vec<Axis>,
                                 theta: &mut Vec<f64>|
     -> Vec<(usize, f64)> {
        // Returns (new slot, angle) for every trainable gate, in gate order.
        let mut slots = Vec::new();
        let layer = gates
            .iter()
            .map(|g| match *g {
                GateOp::Rotation { qubit, angle: Angle::Slot(old_slot) } => {
                    let slot = bases.len();
                    let angle = uniform_angle(&mut rng);
                    bases.push(ansatz.bases.axis(old_slot));
                    theta.push(angle);
                    slots.push((slot, angle));
                    GateOp::trainable(qubit, slot)
                }
                other => other,
            })
            .collect();
        layers.push(layer);
        slots
    };

    let mut chunks = old.layers.chunks_exact(2);
    for pair in &mut chunks {
        let first = &pair[0];
        let angles = push_random_layer(first, &mut layers, &mut bases, &mut theta);
        let mut angles = angles.into_iter().rev();
        let mut mirror = Vec::with_capacity(first.len());
        for gate in first.iter().rev() {
            match *gate {
                GateOp::Rotation { qubit, angle: Angle::Slot(old_slot) } => {
                    let (_, angle) =
                        angles.next().ok_or_else(|| Error::contract("mirror slot bookkeeping"))?;
                    let slot = bases.len();
                    bases.push(ansatz.bases.axis(old_slot));
                    theta.push(-angle);
                    mirror.push(GateOp::trainable(qubit, slot));
                }
                GateOp::Rotation { qubit, angle: Angle::Fixed { axis, radians } } => {
                    mirror.push(GateOp::Rotation { qubit, angle: Angle::Fixed { axis, radians: -radians } });
                }
                // CNOT is self-inverse; reversing the order inverts the block.
                cnot @ GateOp::Cnot { .. } => mirror.push(cnot),
            }
        }
        layers.push(mirror);
    }
    if let [last] = chunks.remainder() {
        push_random_layer(last, &mut layers, &mut bases, &mut theta);
    }

    let layout = AnsatzLayout {
        n_qubits: old.n_qubits,
        depth: old.depth,
        kind: old.kind,
        layers,
        n_params: bases.len(),
    };
    layout.validate()?;
    Ok((Ansatz { layout, bases: BasisAssignment::new(bases) }, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{expect_z_analytic, prepare_latent_state};

    fn count_slots(layout: &AnsatzLayout) -> usize {
        layout.gates().filter(|g| matches!(g, GateOp::Rotation { angle: Angle::Slot(_), .. })).count()
    }

    #[test]
    fn c4_has_no_entanglers() {
        let a = build_ansatz(CircuitKind::C4, 4, 3, 0).unwrap();
        assert_eq!(a.n_params(), 12);
        assert_eq!(count_slots(&a.layout), 12);
        assert_eq!(a.layout.cnot_count(), 0);
    }

    #[test]
    fn c3_full_rotations() {
        let a = build_ansatz(CircuitKind::C3, 3, 2, 0).unwrap();
        assert_eq!(a.n_params(), 18);
        for (i, axis) in a.bases.as_slice().iter().enumerate() {
            assert_eq!(*axis, Axis::ALL[i % 3]);
        }
    }

    #[test]
    fn c1_chain_counts() {
        let a = build_ansatz(CircuitKind::C1, 3, 2, 0).unwrap();
        assert_eq!(a.n_params(), 6);
        assert_eq!(a.layout.cnot_count(), 4);
        let b = build_ansatz(CircuitKind::C2, 3, 2, 0).unwrap();
        assert_eq!(b.layout.cnot_count(), 4);
        assert!(b.layout.gates().any(|g| *g == GateOp::Cnot { control: 1, target: 0 }));
    }

    #[test]
    fn build_is_pure() {
        let a = build_ansatz(CircuitKind::C1, 5, 3, 42).unwrap();
        let b = build_ansatz(CircuitKind::C1, 5, 3, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn build_rejects_bad_shape_and_kind() {
        assert!(build_ansatz(CircuitKind::C1, 0, 1, 0).is_err());
        assert!(build_ansatz(CircuitKind::C1, 2, 0, 0).is_err());
        assert!("C5".parse::<CircuitKind>().is_err());
        assert_eq!("c3".parse::<CircuitKind>().unwrap(), CircuitKind::C3);
    }

    #[test]
    fn zero_angles_on_c4_leave_state_unchanged() {
        let a = build_ansatz(CircuitKind::C4, 3, 2, 9).unwrap();
        let s = prepare_latent_state(&[0.4, -1.0, 2.5]).unwrap();
        let out = apply_circuit(&s, &a.layout, &a.bases, &vec![0.0; a.n_params()]).unwrap();
        for (x, y) in s.amplitudes().iter().zip(out.amplitudes()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn apply_checks_parameter_count() {
        let a = build_ansatz(CircuitKind::C1, 2, 1, 0).unwrap();
        let s = QubitState::zero(2).unwrap();
        assert!(apply_circuit(&s, &a.layout, &a.bases, &[0.0]).is_err());
        let s3 = QubitState::zero(3).unwrap();
        assert!(apply_circuit(&s3, &a.layout, &a.bases, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn depth_one_identity_init_is_random_layer() {
        let a = build_ansatz(CircuitKind::C1, 3, 1, 2).unwrap();
        let (b, theta) = identity_block_init(&a, 5).unwrap();
        assert_eq!(b.layout, a.layout);
        assert!(theta.iter().all(|t| *t > -PI && *t <= PI));
        assert!(theta.iter().any(|t| t.abs() > 1e-3));
    }

    #[test]
    fn identity_blocks_cancel_for_every_kind() {
        for kind in CircuitKind::ALL {
            for depth in [2, 4] {
                let a = build_ansatz(kind, 3, depth, 11).unwrap();
                let (b, theta) = identity_block_init(&a, 3).unwrap();
                assert_eq!(b.n_params(), a.n_params());
                let z = [0.7, -2.1, 1.3];
                let s = prepare_latent_state(&z).unwrap();
                let e = expect_z_analytic(&apply_circuit(&s, &b.layout, &b.bases, &theta).unwrap());
                for (ei, zi) in e.iter().zip(z) {
                    assert!((ei - zi.cos()).abs() < 1e-10, "{kind} depth {depth}");
                }
            }
        }
    }

    #[test]
    fn odd_depth_identity_init_keeps_last_layer_random() {
        let a = build_ansatz(CircuitKind::C1, 2, 3, 4).unwrap();
        let (b, theta) = identity_block_init(&a, 8).unwrap();
        assert_eq!(b.layout.layers[2], a.layout.layers[2]);
        // mirrored slots are the negation of the first layer, in reverse order
        assert!((theta[2] + theta[1]).abs() < 1e-15);
        assert!((theta[3] + theta[0]).abs() < 1e-15);
    }
}
