// SPDX-License-Identifier: Apache-2.0

//! A bias-free GRU cell:
//!
//! ```text
//! z_t = σ(W_z x_t + U_z h_{t-1})
//! r_t = σ(W_r x_t + U_r h_{t-1})
//! ĥ_t = tanh(W x_t + U (r_t ∗ h_{t-1}))
//! h_t = (1 - z_t) ∗ h_{t-1} + z_t ∗ ĥ_t
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{sigmoid, Matrix};
use super::Seq2SeqError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCellParams {
    pub w_z: Matrix,
    pub u_z: Matrix,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub w: Matrix,
    pub u: Matrix,
}

impl GruCellParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> GruCellParams {
        GruCellParams {
            w_z: Matrix::zeros(hidden_dim, input_dim),
            u_z: Matrix::zeros(hidden_dim, hidden_dim),
            w_r: Matrix::zeros(hidden_dim, input_dim),
            u_r: Matrix::zeros(hidden_dim, hidden_dim),
            w: Matrix::zeros(hidden_dim, input_dim),
            u: Matrix::zeros(hidden_dim, hidden_dim),
        }
    }

    pub fn uniform<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        scale: f64,
        rng: &mut R,
    ) -> GruCellParams {
        GruCellParams {
            w_z: Matrix::uniform(hidden_dim, input_dim, scale, rng),
            u_z: Matrix::uniform(hidden_dim, hidden_dim, scale, rng),
            w_r: Matrix::uniform(hidden_dim, input_dim, scale, rng),
            u_r: Matrix::uniform(hidden_dim, hidden_dim, scale, rng),
            w: Matrix::uniform(hidden_dim, input_dim, scale, rng),
            u: Matrix::uniform(hidden_dim, hidden_dim, scale, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols
    }

    pub fn hidden_dim(&self) -> usize {
        self.w.rows
    }

    /// Matrices in a fixed order: `w_z, u_z, w_r, u_r, w, u`.
    pub fn matrices(&self) -> [&Matrix; 6] {
        [&self.w_z, &self.u_z, &self.w_r, &self.u_r, &self.w, &self.u]
    }

    pub fn matrices_mut(&mut self) -> [&mut Matrix; 6] {
        [
            &mut self.w_z,
            &mut self.u_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.w,
            &mut self.u,
        ]
    }

    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        let (i, h) = (self.input_dim(), self.hidden_dim());
        for (k, m) in self.matrices().iter().enumerate() {
            let cols = if k % 2 == 0 { i } else { h };
            if m.rows != h || m.cols != cols || m.data.len() != h * cols {
                return Err(Seq2SeqError::Dimension(format!(
                    "gru matrix {k} is {}x{}, expected {h}x{cols}",
                    m.rows, m.cols
                )));
            }
            if !m.is_finite() {
                return Err(Seq2SeqError::Argument(format!(
                    "gru matrix {k} has non-finite entries"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruState {
    pub h: Vec<f64>,
}

impl GruState {
    pub fn zeros(hidden_dim: usize) -> GruState {
        GruState {
            h: vec![0.0; hidden_dim],
        }
    }
}

/// Intermediate values of one step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    /// Candidate state ĥ_t.
    pub candidate: Vec<f64>,
    /// r_t ∗ h_{t-1}
    pub reset_h: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn step_cached(p: &GruCellParams, x: &[f64], h_prev: &[f64]) -> StepCache {
    let mut z = p.w_z.matvec(x);
    p.u_z.matvec_add(h_prev, &mut z);
    z.iter_mut().for_each(|v| *v = sigmoid(*v));

    let mut r = p.w_r.matvec(x);
    p.u_r.matvec_add(h_prev, &mut r);
    r.iter_mut().for_each(|v| *v = sigmoid(*v));

    let reset_h: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let mut candidate = p.w.matvec(x);
    p.u.matvec_add(&reset_h, &mut candidate);
    candidate.iter_mut().for_each(|v| *v = v.tanh());

    let h = (0..h_prev.len())
        .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * candidate[i])
        .collect();
    StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        candidate,
        reset_h,
        h,
    }
}

/// One cell step with dimension checks; returns every gate value.
pub fn gru_cell_trace(
    params: &GruCellParams,
    x_t: &[f64],
    h_prev: &GruState,
) -> Result<StepCache, Seq2SeqError> {
    if x_t.len() != params.input_dim() {
        return Err(Seq2SeqError::Dimension(format!(
            "input has length {}, cell expects {}",
            x_t.len(),
            params.input_dim()
        )));
    }
    if h_prev.h.len() != params.hidden_dim() {
        return Err(Seq2SeqError::Dimension(format!(
            "state has length {}, cell expects {}",
            h_prev.h.len(),
            params.hidden_dim()
        )));
    }
    Ok(step_cached(params, x_t, &h_prev.h))
}

pub fn gru_cell_step(
    params: &GruCellParams,
    x_t: &[f64],
    h_prev: &GruState,
) -> Result<GruState, Seq2SeqError> {
    gru_cell_trace(params, x_t, h_prev).map(|c| GruState { h: c.h })
}

/// Backpropagates `dh` (gradient w.r.t. `h_t`) through one step.
/// Accumulates parameter gradients into `grad`, adds the input gradient into
/// `dx`, and returns the gradient w.r.t. `h_{t-1}`.
pub(crate) fn step_backward(
    p: &GruCellParams,
    c: &StepCache,
    dh: &[f64],
    grad: &mut GruCellParams,
    dx: &mut [f64],
) -> Vec<f64> {
    let n = dh.len();
    let mut dh_prev = vec![0.0; n];
    let mut da_z = vec![0.0; n];
    let mut da_n = vec![0.0; n];
    for i in 0..n {
        let dz = dh[i] * (c.candidate[i] - c.h_prev[i]);
        let dn = dh[i] * c.z[i];
        dh_prev[i] = dh[i] * (1.0 - c.z[i]);
        da_z[i] = dz * c.z[i] * (1.0 - c.z[i]);
        da_n[i] = dn * (1.0 - c.candidate[i] * c.candidate[i]);
    }

    grad.w.add_outer(&da_n, &c.x);
    grad.u.add_outer(&da_n, &c.reset_h);
    p.w.matvec_t_add(&da_n, dx);
    let mut d_reset_h = vec![0.0; n];
    p.u.matvec_t_add(&da_n, &mut d_reset_h);

    let mut da_r = vec![0.0; n];
    for i in 0..n {
        dh_prev[i] += d_reset_h[i] * c.r[i];
        let dr = d_reset_h[i] * c.h_prev[i];
        da_r[i] = dr * c.r[i] * (1.0 - c.r[i]);
    }

    grad.w_r.add_outer(&da_r, &c.x);
    grad.u_r.add_outer(&da_r, &c.h_prev);
    p.w_r.matvec_t_add(&da_r, dx);
    p.u_r.matvec_t_add(&da_r, &mut dh_prev);

    grad.w_z.add_outer(&da_z, &c.x);
    grad.u_z.add_outer(&da_z, &c.h_prev);
    p.w_z.matvec_t_add(&da_z, dx);
    p.u_z.matvec_t_add(&da_z, &mut dh_prev);

    dh_prev
}
