//! Sampled characteristic functions of quantized distributions and the
//! equivalent spatial-domain blur kernels.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::grid::{EmpiricalDistribution, QuantGrid};
use crate::error::{Error, Result};

/// Sampled characteristic-function data for one observation.
#[derive(Debug, Clone)]
pub struct CfSet {
    pub grid: QuantGrid,
    pub nf: usize,
    /// Frequency step `1 / (delta * nf)`.
    pub freq_step: f64,
    pub sigma_q: f64,
    /// Sampled CF of the observation, `nf x nf`.
    pub l_mat: DMatrix<Complex64>,
    /// Noise CF samples, `nf x nf`, entries in `(0, 1]`.
    pub r_q: DMatrix<f64>,
    /// Grid phase/scale factors, `nf x nf`.
    pub r_v: DMatrix<Complex64>,
    /// Partial DFT matrix, `nf x bins`.
    pub f_dft: DMatrix<Complex64>,
}

/// Signed frequency index for DFT bin `k`: bins above `nf/2` alias to
/// negative frequencies.
pub fn signed_index(k: usize, nf: usize) -> f64 {
    if 2 * k <= nf {
        k as f64
    } else {
        k as f64 - nf as f64
    }
}

/// One-axis Gaussian noise CF profile `r(k) = exp(-2 sigma^2 pi^2 k^2 f^2)`.
/// The 2-D noise CF is `r(k1) * r(k2)`.
pub fn noise_profile(nf: usize, freq_step: f64, sigma_q: f64) -> Vec<f64> {
    (0..nf)
        .map(|k| {
            let kk = signed_index(k, nf) * freq_step;
            (-2.0 * sigma_q * sigma_q * PI * PI * kk * kk).exp()
        })
        .collect()
}

/// Inverse DFT of a real, even profile: the circular convolution kernel
/// whose DFT is `profile`.
pub fn circular_kernel(profile: &[f64]) -> Vec<f64> {
    let nf = profile.len();
    let mut cos_table = Vec::with_capacity(nf);
    for m in 0..nf {
        cos_table.push((2.0 * PI * m as f64 / nf as f64).cos());
    }
    (0..nf)
        .map(|j| {
            let s: f64 = profile
                .iter()
                .enumerate()
                .map(|(k, r)| r * cos_table[(k * j) % nf])
                .sum();
            s / nf as f64
        })
        .collect()
}

/// Leading `bins x bins` block of the circulant matrix built from `kernel`.
pub fn toeplitz_block(kernel: &[f64], bins: usize) -> DMatrix<f64> {
    let nf = kernel.len();
    DMatrix::from_fn(bins, bins, |i, j| kernel[(i + nf - j) % nf])
}

pub fn dft_matrix(nf: usize, bins: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(nf, bins, |k, j| {
        Complex64::from_polar(1.0, -2.0 * PI * ((k * j) % nf) as f64 / nf as f64)
    })
}

pub fn cf_matrices(dist: &EmpiricalDistribution, nf: usize, sigma_q: f64) -> Result<CfSet> {
    let grid = dist.grid;
    let nb = grid.bins();
    if nf < nb {
        return Err(Error::Config(format!(
            "frequency samples nf = {nf} must be at least the bin count {nb}"
        )));
    }
    if !(sigma_q >= 0.0 && sigma_q.is_finite()) {
        return Err(Error::Config(format!("invalid noise deviation {sigma_q}")));
    }
    let delta = grid.delta();
    let freq_step = 1.0 / (delta * nf as f64);
    let d1 = grid.half_width();

    let f_dft = dft_matrix(nf, nb);
    let pi_c = dist.weights.map(|w| Complex64::new(w, 0.0));
    let spectrum = &f_dft * pi_c * f_dft.transpose();

    let r_v = DMatrix::from_fn(nf, nf, |k1, k2| {
        let phase = 2.0 * PI * (k1 + k2) as f64 * freq_step * d1;
        Complex64::from_polar(delta * delta, phase)
    });
    let profile = noise_profile(nf, freq_step, sigma_q);
    let r_q = DMatrix::from_fn(nf, nf, |k1, k2| profile[k1] * profile[k2]);
    let l_mat = r_v.component_mul(&spectrum);

    Ok(CfSet {
        grid,
        nf,
        freq_step,
        sigma_q,
        l_mat,
        r_q,
        r_v,
        f_dft,
    })
}

impl CfSet {
    /// Model CF `R_Q . R_V . (F X F^T)` for a candidate distribution `x`.
    pub fn model(&self, x: &DMatrix<f64>) -> DMatrix<Complex64> {
        let xc = x.map(|w| Complex64::new(w, 0.0));
        let spec = &self.f_dft * xc * self.f_dft.transpose();
        let rq = self.r_q.map(|r| Complex64::new(r, 0.0));
        spec.component_mul(&self.r_v).component_mul(&rq)
    }

    /// Squared Frobenius residual `|L - R_Q . R_V . (F X F^T)|^2`, evaluated
    /// directly in the frequency domain.
    pub fn residual(&self, x: &DMatrix<f64>) -> f64 {
        (&self.l_mat - self.model(x)).norm_squared()
    }

    /// Recovers the quantized observation histogram from `l_mat`. Exact
    /// because `F` has orthogonal columns whenever `nf >= bins`.
    pub fn observed_histogram(&self) -> DMatrix<f64> {
        let spectrum = self.l_mat.component_div(&self.r_v);
        let fh = self.f_dft.adjoint();
        let back = &fh * spectrum * self.f_dft.conjugate();
        let scale = 1.0 / (self.nf * self.nf) as f64;
        back.map(|z| z.re * scale)
    }

    /// One-axis noise profile read back from `r_q`.
    pub fn profile(&self) -> Vec<f64> {
        (0..self.nf).map(|k| self.r_q[(k, 0)] / self.r_q[(0, 0)].sqrt()).collect()
    }
}
