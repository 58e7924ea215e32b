use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::Axis;
use crate::error::{ensure_arg, Error, Result};

pub const MAX_QUBITS: usize = 20;

/// A pure state of `n_qubits` qubits stored as `2^n` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl QubitState {
    /// `|0...0>`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        ensure_arg!(
            (1..=MAX_QUBITS).contains(&n_qubits),
            "qubit count must be in 1..={MAX_QUBITS}, got {n_qubits}"
        );
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// Computational basis state; `bits[q]` is the value of qubit `q`.
    pub fn basis(bits: &[bool]) -> Result<Self> {
        let mut state = Self::zero(bits.len())?;
        state.amplitudes[0] = Complex64::new(0.0, 0.0);
        let idx = state.index_of(bits);
        state.amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(state)
    }

    /// Wraps raw amplitudes after checking length and normalization.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        ensure_arg!(
            len >= 2 && len.is_power_of_two(),
            "amplitude count must be a power of two >= 2, got {len}"
        );
        let n_qubits = len.trailing_zeros() as usize;
        ensure_arg!(n_qubits <= MAX_QUBITS, "at most {MAX_QUBITS} qubits supported");
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        ensure_arg!((norm - 1.0).abs() < 1e-10, "state is not normalized (norm^2 = {norm})");
        Ok(Self { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    fn index_of(&self, bits: &[bool]) -> usize {
        bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
    }

    #[inline]
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Applies a 2x2 unitary `[[a, b], [c, d]]` to `qubit`.
    pub(crate) fn apply_single(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let stride = self.mask(qubit);
        let block = stride << 1;
        for base in (0..self.amplitudes.len()).step_by(block) {
            for i0 in base..base + stride {
                let i1 = i0 + stride;
                let a0 = self.amplitudes[i0];
                let a1 = self.amplitudes[i1];
                self.amplitudes[i0] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i1] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    pub(crate) fn apply_rotation(&mut self, axis: Axis, qubit: usize, angle: f64) {
        self.apply_single(qubit, axis.rotation_matrix(angle));
    }

    pub(crate) fn apply_cnot(&mut self, control: usize, target: usize) {
        let cmask = self.mask(control);
        let tmask = self.mask(target);
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
    }
}

/// `S(z)|0>`: an `R_x(z_i)` on every qubit `i`.
pub fn prepare_latent_state(z: &[f64]) -> Result<QubitState> {
    ensure_arg!(!z.is_empty(), "latent vector is empty");
    ensure_arg!(z.iter().all(|v| v.is_finite()), "latent angles must be finite");
    let mut state = QubitState::zero(z.len())?;
    for (q, &angle) in z.iter().enumerate() {
        state.apply_rotation(Axis::X, q, angle);
    }
    Ok(state)
}

/// Exact `<Z_i>` for every qubit.
pub fn expect_z_analytic(state: &QubitState) -> Vec<f64> {
    let n = state.n_qubits;
    let mut out = vec![0.0; n];
    for (idx, amp) in state.amplitudes.iter().enumerate() {
        let p = amp.norm_sqr();
        if p == 0.0 {
            continue;
        }
        for (q, e) in out.iter_mut().enumerate() {
            if idx & (1 << (n - 1 - q)) == 0 {
                *e += p;
            } else {
                *e -= p;
            }
        }
    }
    out
}

/// Measurement record of `shots` computational-basis measurements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotSample {
    n_qubits: usize,
    outcomes: Vec<usize>,
}

impl ShotSample {
    /// Builds a sample from strings such as `"01"` (qubit 0 first).
    pub fn from_bitstrings<S: AsRef<str>>(bitstrings: &[S]) -> Result<Self> {
        let first = bitstrings.first().ok_or_else(|| Error::invalid("empty sample"))?;
        let n_qubits = first.as_ref().len();
        ensure_arg!(n_qubits >= 1, "bitstrings must be non-empty");
        let mut outcomes = Vec::with_capacity(bitstrings.len());
        for s in bitstrings {
            let s = s.as_ref();
            ensure_arg!(s.len() == n_qubits, "bitstring {s:?} has the wrong length");
            let mut idx = 0;
            for c in s.chars() {
                idx = (idx << 1)
                    | match c {
                        '0' => 0,
                        '1' => 1,
                        _ => return Err(Error::invalid(format!("invalid bitstring {s:?}"))),
                    };
            }
            outcomes.push(idx);
        }
        Ok(Self { n_qubits, outcomes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn shots(&self) -> usize {
        self.outcomes.len()
    }

    pub fn bit(&self, shot: usize, qubit: usize) -> bool {
        self.outcomes[shot] & (1 << (self.n_qubits - 1 - qubit)) != 0
    }

    pub fn bitstring(&self, shot: usize) -> String {
        (0..self.n_qubits).map(|q| if self.bit(shot, q) { '1' } else { '0' }).collect()
    }
}

/// Draws `shots` i.i.d. bitstrings from the Born distribution of `state`.
pub fn sample_bitstrings<R: Rng + ?Sized>(
    state: &QubitState,
    shots: usize,
    rng: &mut R,
) -> Result<ShotSample> {
    ensure_arg!(shots >= 1, "sample size must be at least 1");
    let mut cumulative = Vec::with_capacity(state.amplitudes.len());
    let mut acc = 0.0;
    for a in &state.amplitudes {
        acc += a.norm_sqr();
        cumulative.push(acc);
    }
    let last = cumulative.len() - 1;
    let outcomes = (0..shots)
        .map(|_| {
            let r = rng.random::<f64>() * acc;
            cumulative.partition_point(|&c| c <= r).min(last)
        })
        .collect();
    Ok(ShotSample { n_qubits: state.n_qubits, outcomes })
}

/// `(#0 - #1) / S` for each qubit.
pub fn expect_z_from_sample(sample: &ShotSample) -> Result<Vec<f64>> {
    ensure_arg!(!sample.outcomes.is_empty(), "empty sample");
    let n = sample.n_qubits;
    let mut ones = vec![0usize; n];
    for &idx in &sample.outcomes {
        for (q, count) in ones.iter_mut().enumerate() {
            if idx & (1 << (n - 1 - q)) != 0 {
                *count += 1;
            }
        }
    }
    let s = sample.outcomes.len() as f64;
    Ok(ones.into_iter().map(|c| (s - 2.0 * c as f64) / s).collect())
}

/// Shot-estimated `<Z_i>` without materializing individual bitstrings.
///
/// The outcome histogram of `shots` i.i.d. measurements is multinomial, so it
/// is drawn directly as a chain of conditional binomials. The estimate has the
/// same distribution as `expect_z_from_sample(sample_bitstrings(..))`.
pub fn sample_z_expectations<R: Rng + ?Sized>(
    state: &QubitState,
    shots: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    ensure_arg!(shots >= 1, "sample size must be at least 1");
    let n = state.n_qubits;
    let mut remaining = shots as u64;
    let mut mass = state.norm_sqr();
    let mut ones = vec![0u64; n];
    let len = state.amplitudes.len();
    for (idx, amp) in state.amplitudes.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = amp.norm_sqr();
        let count = if idx + 1 == len {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            let binom = Binomial::new(remaining, q)
                .map_err(|e| Error::invalid(format!("binomial draw failed: {e}")))?;
            binom.sample(rng)
        };
        remaining -= count;
        mass -= p;
        if count > 0 {
            for (q, o) in ones.iter_mut().enumerate() {
                if idx & (1 << (n - 1 - q)) != 0 {
                    *o += count;
                }
            }
        }
    }
    let s = shots as f64;
    Ok(ones.into_iter().map(|c| (s - 2.0 * c as f64) / s).collect())
}
