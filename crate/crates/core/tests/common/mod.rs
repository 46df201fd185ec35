//! Shared fixtures for the integration suites.

#![allow(dead_code)]

use irs_bss::model::CMatrix;
use irs_bss::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn bpsk<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| c(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0)).collect()
}

/// Adds complex Gaussian noise with per-axis standard deviation `sigma`.
pub fn add_noise<R: Rng>(rng: &mut R, seq: &[Complex64], sigma: f64) -> Vec<Complex64> {
    seq.iter()
        .map(|z| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            z + c(sigma * re, sigma * im)
        })
        .collect()
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// `K x n` matrix of independent BPSK rows.
pub fn bpsk_sources<R: Rng>(rng: &mut R, k: usize, n: usize) -> CMatrix {
    CMatrix::from_fn(k, n, |_, _| c(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0))
}

/// Distance from `z` to the nearest of `points`.
pub fn nearest(z: Complex64, points: &[Complex64]) -> f64 {
    points.iter().map(|p| (p - z).norm()).fold(f64::INFINITY, f64::min)
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Noiseless row `r + c s` whose residual `r` mixes one or two BPSK streams.
pub struct RowInstance {
    pub row: Vec<Complex64>,
    pub s: Vec<Complex64>,
    pub coef: Complex64,
}

fn polar<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Complex64 {
    Complex64::from_polar(rng.random_range(lo..hi), rng.random_range(0.0..std::f64::consts::TAU))
}

/// Draws an instance whose row alphabet points are well separated on the
/// extractor grid.
pub fn row_instance<R: Rng>(rng: &mut R, n: usize, residual_streams: usize) -> RowInstance {
    loop {
        let coef = polar(rng, 0.3, 1.0);
        let gains: Vec<Complex64> = (0..residual_streams).map(|_| polar(rng, 0.2, 1.0)).collect();
        let mut points = Vec::new();
        for signs in 0..(1usize << (residual_streams + 1)) {
            let sign = |b: usize| if signs >> b & 1 == 1 { -1.0 } else { 1.0 };
            let mut z = coef * sign(residual_streams);
            for (k, g) in gains.iter().enumerate() {
                z += g * sign(k);
            }
            points.push(z);
        }
        let span = points.iter().map(|p| p.re.abs().max(p.im.abs())).fold(0.0, f64::max);
        let min_gap = (0..points.len())
            .flat_map(|i| (i + 1..points.len()).map(move |j| (i, j)))
            .map(|(i, j)| (points[i] - points[j]).norm())
            .fold(f64::INFINITY, f64::min);
        if min_gap < 0.15 * span {
            continue;
        }
        let sources = bpsk_sources(rng, residual_streams + 1, n);
        let s: Vec<Complex64> = sources.row(residual_streams).iter().copied().collect();
        let row = (0..n)
            .map(|t| {
                let mut z = coef * s[t];
                for (k, g) in gains.iter().enumerate() {
                    z += g * sources[(k, t)];
                }
                z
            })
            .collect();
        return RowInstance { row, s, coef };
    }
}

pub fn noisy_bpsk<R: Rng>(rng: &mut R, n: usize, sigma: f64) -> Vec<Complex64> {
    let clean = bpsk(rng, n);
    add_noise(rng, &clean, sigma)
}
