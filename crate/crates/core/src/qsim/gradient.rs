use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ansatz::apply_in_place;
use super::{expect_z_analytic, prepare_latent_state, sample_z_expectations, Ansatz, QubitState};
use crate::error::{ensure_arg, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// How `<Z_i>` is read out of a simulated state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Readout {
    #[default]
    Analytic,
    /// Estimate from this many measurement shots, freshly drawn on every call.
    Shots(usize),
}

/// Which argument of `g_q(z; theta)` a Jacobian is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrt {
    /// The trainable circuit angles `theta`.
    Params,
    /// The state-preparation angles `z`.
    Latent,
}

/// Row-major `n_outputs x n_inputs` matrix of partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Jacobian {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.cols + col] = v;
    }

    /// `J^T v`: pulls an output-space gradient back to the inputs.
    pub fn vjp(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "vjp length mismatch");
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            if vr == 0.0 {
                continue;
            }
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, &j) in out.iter_mut().zip(row) {
                *o += vr * j;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Jacobian) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `g_q(z; theta, nu)`: Pauli-Z expectations of `U_nu(theta) S(z)|0>`.
pub fn circuit_expectations<R: Rng + ?Sized>(
    ansatz: &Ansatz,
    theta: &[f64],
    z: &[f64],
    readout: Readout,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let state = final_state(ansatz, theta, z)?;
    match readout {
        Readout::Analytic => Ok(expect_z_analytic(&state)),
        Readout::Shots(shots) => sample_z_expectations(&state, shots, rng),
    }
}

fn final_state(ansatz: &Ansatz, theta: &[f64], z: &[f64]) -> Result<QubitState> {
    ensure_arg!(
        z.len() == ansatz.n_qubits(),
        "latent vector has length {}, circuit has {} qubits",
        z.len(),
        ansatz.n_qubits()
    );
    let mut state = prepare_latent_state(z)?;
    apply_in_place(&mut state, &ansatz.layout, &ansatz.bases, theta)?;
    Ok(state)
}

fn analytic(ansatz: &Ansatz, theta: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    Ok(expect_z_analytic(&final_state(ansatz, theta, z)?))
}

/// Forward-difference Jacobian of the analytic expectations with step `h`.
pub fn jacobian_forward_diff(
    ansatz: &Ansatz,
    theta: &[f64],
    z: &[f64],
    h: f64,
    wrt: Wrt,
) -> Result<Jacobian> {
    ensure_arg!(h > 0.0 && h.is_finite(), "finite-difference step must be positive, got {h}");
    let base = analytic(ansatz, theta, z)?;
    let n_in = match wrt {
        Wrt::Params => theta.len(),
        Wrt::Latent => z.len(),
    };
    let mut jac = Jacobian::zeros(base.len(), n_in);
    let mut theta_buf = theta.to_vec();
    let mut z_buf = z.to_vec();
    for m in 0..n_in {
        let shifted = match wrt {
            Wrt::Params => {
                theta_buf[m] += h;
                let e = analytic(ansatz, &theta_buf, z)?;
                theta_buf[m] = theta[m];
                e
            }
            Wrt::Latent => {
                z_buf[m] += h;
                let e = analytic(ansatz, theta, &z_buf)?;
                z_buf[m] = z[m];
                e
            }
        };
        for (i, (s, b)) in shifted.iter().zip(&base).enumerate() {
            jac.set(i, m, (s - b) / h);
        }
    }
    Ok(jac)
}

/// Parameter-shift Jacobian: `[g(x + pi/2 e_m) - g(x - pi/2 e_m)] / 2`.
///
/// Exact for analytic readout because every shifted angle drives a single
/// Pauli rotation. With shot readout each shifted evaluation draws its own
/// sample.
pub fn jacobian_param_shift<R: Rng + ?Sized>(
    ansatz: &Ansatz,
    theta: &[f64],
    z: &[f64],
    readout: Readout,
    wrt: Wrt,
    rng: &mut R,
) -> Result<Jacobian> {
    let n_out = ansatz.n_qubits();
    ensure_arg!(
        theta.len() == ansatz.n_params(),
        "expected {} circuit parameters, got {}",
        ansatz.n_params(),
        theta.len()
    );
    let n_in = match wrt {
        Wrt::Params => theta.len(),
        Wrt::Latent => z.len(),
    };
    let mut jac = Jacobian::zeros(n_out, n_in);
    let mut theta_buf = theta.to_vec();
    let mut z_buf = z.to_vec();
    for m in 0..n_in {
        let mut eval = |delta: f64, rng: &mut R| -> Result<Vec<f64>> {
            match wrt {
                Wrt::Params => {
                    theta_buf[m] = theta[m] + delta;
                    let e = circuit_expectations(ansatz, &theta_buf, z, readout, rng);
                    theta_buf[m] = theta[m];
                    e
                }
                Wrt::Latent => {
                    z_buf[m] = z[m] + delta;
                    let e = circuit_expectations(ansatz, theta, &z_buf, readout, rng);
                    z_buf[m] = z[m];
                    e
                }
            }
        };
        let plus = eval(FRAC_PI_2, rng)?;
        let minus = eval(-FRAC_PI_2, rng)?;
        for (i, (p, q)) in plus.iter().zip(&minus).enumerate() {
            jac.set(i, m, (p - q) / 2.0);
        }
    }
    Ok(jac)
}
