//! Alphabet extraction from noisy observations.
//!
//! The observation is quantized onto a square grid, its characteristic
//! function is divided by the known Gaussian noise CF through a
//! simplex-constrained least-squares fit, and the local maxima of the
//! recovered distribution are reported as the source alphabet.

mod cf;
mod grid;
mod peaks;
mod qp;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use cf::{cf_matrices, circular_kernel, noise_profile, signed_index, toeplitz_block, CfSet};
pub use grid::{empirical_distribution, EmpiricalDistribution, QuantGrid, GRID_HEADROOM};
pub use peaks::{extract_alphabet, Alphabet, PeakOptions};
pub use qp::{project_simplex, BlurQp, QpSolution, SolverOptions};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractorParams {
    pub bins: usize,
    pub nf: usize,
    pub peaks: PeakOptions,
    pub solver: SolverOptions,
    pub min_n: usize,
}

impl Default for ExtractorParams {
    fn default() -> Self {
        Self {
            bins: 64,
            nf: 128,
            peaks: PeakOptions::default(),
            solver: SolverOptions::default(),
            min_n: 1,
        }
    }
}

impl ExtractorParams {
    pub fn with_bins(mut self, bins: usize) -> Self {
        self.bins = bins;
        self.nf = self.nf.max(2 * bins);
        self
    }
}

/// Deconvolved distribution together with solver diagnostics.
#[derive(Debug, Clone)]
pub struct Deconvolution {
    pub distribution: EmpiricalDistribution,
    /// `|L - R_Q . R_V . (F X F^T)|^2` at the returned point.
    pub objective: f64,
    /// Same residual after each accepted solver iteration.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Output of the full extractor with diagnostics.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub alphabet: Alphabet,
    pub deconvolution: Deconvolution,
    pub dropped_fraction: f64,
}

fn blur_qp(observed: &DMatrix<f64>, profile: &[f64]) -> BlurQp {
    let bins = observed.nrows();
    let squared: Vec<f64> = profile.iter().map(|r| r * r).collect();
    let k1 = toeplitz_block(&circular_kernel(profile), bins);
    let k2 = toeplitz_block(&circular_kernel(&squared), bins);
    BlurQp::new(&k1, k2, observed)
}

fn finish(grid: QuantGrid, nf: usize, sol: QpSolution) -> Deconvolution {
    // spatial residual 0.5|Ax-b|^2 -> frequency-domain residual (Parseval)
    let scale = 2.0 * grid.delta().powi(4) * (nf * nf) as f64;
    Deconvolution {
        distribution: EmpiricalDistribution {
            grid,
            weights: sol.x,
            dropped: 0,
            total: 0,
        },
        objective: sol.objective * scale,
        history: sol.history.into_iter().map(|f| f * scale).collect(),
        iterations: sol.iterations,
        converged: sol.converged,
    }
}

/// Fits a distribution whose noisy CF best matches `cfs.l_mat`.
pub fn deconvolve(cfs: &CfSet, opts: &SolverOptions) -> Deconvolution {
    let observed = cfs.observed_histogram();
    let qp = blur_qp(&observed, &cfs.profile());
    let sol = qp.solve(&observed, opts);
    finish(cfs.grid, cfs.nf, sol)
}

/// Same fit as [`deconvolve`] but built straight from the histogram,
/// skipping the `nf x nf` spectra.
pub fn deconvolve_histogram(
    dist: &EmpiricalDistribution,
    nf: usize,
    sigma_q: f64,
    opts: &SolverOptions,
) -> Result<Deconvolution> {
    let bins = dist.grid.bins();
    if nf < bins {
        return Err(Error::Config(format!(
            "frequency samples nf = {nf} must be at least the bin count {bins}"
        )));
    }
    let freq_step = 1.0 / (dist.grid.delta() * nf as f64);
    let profile = noise_profile(nf, freq_step, sigma_q);
    let qp = blur_qp(&dist.weights, &profile);
    let sol = qp.solve(&dist.weights, opts);
    Ok(finish(dist.grid, nf, sol))
}

pub fn extract(sequence: &[Complex64], sigma_q: f64, params: &ExtractorParams) -> Result<Extraction> {
    if sequence.len() < params.min_n.max(1) {
        return Err(Error::EmptyInput("sequence shorter than the extractor minimum"));
    }
    let grid = QuantGrid::for_sequence(sequence, params.bins)?;
    let hist = empirical_distribution(sequence, &grid);
    let deconvolution = deconvolve_histogram(&hist, params.nf, sigma_q, &params.solver)?;
    let alphabet = extract_alphabet(&deconvolution.distribution.weights, &grid, &params.peaks)?;
    Ok(Extraction {
        alphabet,
        deconvolution,
        dropped_fraction: hist.dropped_fraction(),
    })
}

/// Estimated source alphabet of `sequence` observed through complex
/// Gaussian noise with per-axis standard deviation `sigma_q`.
pub fn extractor_f(sequence: &[Complex64], sigma_q: f64, params: &ExtractorParams) -> Result<Alphabet> {
    extract(sequence, sigma_q, params).map(|e| e.alphabet)
}
