//! Uplink system model: Rayleigh channels, BPSK users, randomly flipping
//! IRS reflections and the received pilot/data blocks.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// All parameters of one simulated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// BS antennas.
    pub antennas: usize,
    /// Legitimate users, each shadowed by one malicious IRS.
    pub users: usize,
    /// Reflecting elements per IRS.
    pub elements: usize,
    /// Data-phase block length.
    pub block_len: usize,
    pub pilot_len: usize,
    /// Data transmit power (linear).
    pub power: f64,
    /// Pilot symbol power (linear).
    pub pilot_power: f64,
    /// Noise variance per complex sample.
    pub sigma2: f64,
    /// `reflect_prob[j][w]`: probability that element `w` of IRS `j`
    /// reflects with phase 0 (otherwise pi).
    pub reflect_prob: Vec<Vec<f64>>,
    /// Variance of cascaded channel entries, per IRS.
    pub path_loss: Vec<f64>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            antennas: 32,
            users: 1,
            elements: 1,
            block_len: 2000,
            pilot_len: 8,
            power: 1.0,
            pilot_power: 1.0,
            sigma2: 0.1,
            reflect_prob: vec![vec![0.8]],
            path_loss: vec![1.0],
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Number of separable streams: LUs plus reflected streams.
    pub fn streams(&self) -> usize {
        self.users + self.users * self.elements
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.antennas == 0 {
            return bad("antenna count must be positive".into());
        }
        if self.antennas < self.streams() {
            return bad(format!(
                "{} antennas cannot separate {} streams",
                self.antennas,
                self.streams()
            ));
        }
        if self.block_len == 0 {
            return bad("block length must be at least one".into());
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return bad(format!("transmit power {} must be positive", self.power));
        }
        if !(self.pilot_power > 0.0 && self.pilot_power.is_finite()) {
            return bad(format!("pilot power {} must be positive", self.pilot_power));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return bad(format!("noise variance {} must be nonnegative", self.sigma2));
        }
        if self.reflect_prob.len() != self.users {
            return bad(format!(
                "reflection table has {} rows for {} users",
                self.reflect_prob.len(),
                self.users
            ));
        }
        for (j, row) in self.reflect_prob.iter().enumerate() {
            if row.len() != self.elements {
                return bad(format!(
                    "reflection row {j} has {} entries for {} elements",
                    row.len(),
                    self.elements
                ));
            }
            check_probabilities(row)?;
        }
        if self.path_loss.len() != self.users {
            return bad(format!(
                "{} path losses given for {} users",
                self.path_loss.len(),
                self.users
            ));
        }
        if let Some(pl) = self.path_loss.iter().find(|&&pl| !(pl > 0.0 && pl <= 1.0)) {
            return bad(format!("path loss {pl} outside (0, 1]"));
        }
        Ok(())
    }

    /// SNR in dB, `10 log10(P / sigma^2)`.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.power / self.sigma2).log10()
    }

    /// Sets the noise variance for a target SNR at the current power.
    pub fn set_snr_db(&mut self, snr_db: f64) {
        self.sigma2 = self.power / 10f64.powf(snr_db / 10.0);
    }

    /// Uses the same reflection probability `(rho + 1) / 2` on every element.
    pub fn set_correlation(&mut self, rho: f64) {
        let p = (rho + 1.0) / 2.0;
        self.reflect_prob = vec![vec![p; self.elements]; self.users];
    }

    /// Owning user of reflected stream `k` (user-major, element-minor).
    pub fn owner_of(&self, reflected: usize) -> usize {
        reflected / self.elements.max(1)
    }
}

fn check_probabilities(row: &[f64]) -> Result<()> {
    match row.iter().find(|&&p| !(0.0..=1.0).contains(&p)) {
        Some(p) => Err(Error::Config(format!("reflection probability {p} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Legitimate channels `h`, cascaded IRS channels `g` and `C = [H, G]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: CMatrix,
    pub g: CMatrix,
    pub c: CMatrix,
}

/// Data-phase signals of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBlock {
    /// LU symbols, `users x n`, entries +-1.
    pub a: CMatrix,
    /// IRS phases, `(users * elements) x n`, entries 0 or pi.
    pub phi: DMatrix<f64>,
    /// Reflected streams, `(users * elements) x n`.
    pub b: CMatrix,
    /// `sqrt(P) [A; B]`.
    pub s: CMatrix,
}

/// Received data block and the noise that went into it.
#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    pub y: CMatrix,
    pub noise: CMatrix,
}

/// Circularly symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: &dyn Fn(usize) -> f64) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        let v = variance(j);
        for i in 0..rows {
            m[(i, j)] = complex_gaussian(rng, v);
        }
    }
    m
}

/// Draws i.i.d. Rayleigh channels; cascaded entries have variance equal to
/// the owning IRS's path loss.
pub fn draw_channels<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<ChannelSet> {
    cfg.validate()?;
    let m = cfg.antennas;
    let h = gaussian_matrix(rng, m, cfg.users, &|_| 1.0);
    let g = gaussian_matrix(rng, m, cfg.users * cfg.elements, &|k| cfg.path_loss[cfg.owner_of(k)]);
    let mut c = CMatrix::zeros(m, cfg.streams());
    c.columns_mut(0, cfg.users).copy_from(&h);
    c.columns_mut(cfg.users, g.ncols()).copy_from(&g);
    Ok(ChannelSet { h, g, c })
}

/// Maps a bit to a BPSK symbol: 0 -> +1, 1 -> -1.
pub fn bpsk(bit: bool) -> f64 {
    if bit {
        -1.0
    } else {
        1.0
    }
}

pub fn draw_lu_symbols<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> CMatrix {
    let mut a = CMatrix::zeros(cfg.users, cfg.block_len);
    for j in 0..cfg.users {
        for t in 0..cfg.block_len {
            a[(j, t)] = Complex64::new(bpsk(rng.random::<bool>()), 0.0);
        }
    }
    a
}

/// Random IRS phases: element `(j, w)` keeps phase 0 with probability
/// `reflect_prob[j][w]`, otherwise flips by pi. Returns `(phi, B)`.
pub fn apply_reflection<R: Rng + ?Sized>(
    a: &CMatrix,
    reflect_prob: &[Vec<f64>],
    rng: &mut R,
) -> Result<(DMatrix<f64>, CMatrix)> {
    if reflect_prob.len() != a.nrows() {
        return Err(Error::Dimension(format!(
            "{} reflection rows for {} users",
            reflect_prob.len(),
            a.nrows()
        )));
    }
    for row in reflect_prob {
        check_probabilities(row)?;
    }
    let rows: usize = reflect_prob.iter().map(Vec::len).sum();
    let n = a.ncols();
    let mut phi = DMatrix::<f64>::zeros(rows, n);
    let mut b = CMatrix::zeros(rows, n);
    let mut k = 0;
    for (j, probs) in reflect_prob.iter().enumerate() {
        for &p in probs {
            for t in 0..n {
                let u: f64 = rng.random();
                let flip = u >= p;
                phi[(k, t)] = if flip { PI } else { 0.0 };
                // e^{i pi} = -1 exactly
                b[(k, t)] = if flip { -a[(j, t)] } else { a[(j, t)] };
            }
            k += 1;
        }
    }
    Ok((phi, b))
}

/// Draws LU symbols and IRS reflections for one data block.
pub fn draw_signals<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<SignalBlock> {
    cfg.validate()?;
    let a = draw_lu_symbols(cfg, rng);
    let (phi, b) = apply_reflection(&a, &cfg.reflect_prob, rng)?;
    let mut s = CMatrix::zeros(cfg.streams(), cfg.block_len);
    let amp = cfg.power.sqrt();
    s.rows_mut(0, cfg.users).copy_from(&(&a * Complex64::new(amp, 0.0)));
    s.rows_mut(cfg.users, b.nrows()).copy_from(&(&b * Complex64::new(amp, 0.0)));
    Ok(SignalBlock { a, phi, b, s })
}

/// `Y = C S + N` with `N ~ CN(0, sigma^2)`. Noise is drawn at unit variance
/// and scaled, so one stream gives coupled draws across noise levels.
pub fn synthesize_rx<R: Rng + ?Sized>(
    channels: &ChannelSet,
    block: &SignalBlock,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<Reception> {
    if channels.c.ncols() != block.s.nrows() {
        return Err(Error::Dimension(format!(
            "channel matrix has {} columns, signal block {} rows",
            channels.c.ncols(),
            block.s.nrows()
        )));
    }
    let (m, n) = (channels.c.nrows(), block.s.ncols());
    let sigma = cfg.sigma2.sqrt();
    let mut noise = CMatrix::zeros(m, n);
    for t in 0..n {
        for i in 0..m {
            noise[(i, t)] = complex_gaussian(rng, 1.0) * sigma;
        }
    }
    let y = &channels.c * &block.s + &noise;
    Ok(Reception { y, noise })
}

/// Rows of the unitary `L_p`-point DFT, truncated to `users` rows.
pub fn pilot_codebook(pilot_len: usize, users: usize) -> Result<CMatrix> {
    if pilot_len < users {
        return Err(Error::PilotTooShort { pilot_len, users });
    }
    let scale = 1.0 / (pilot_len as f64).sqrt();
    Ok(CMatrix::from_fn(users, pilot_len, |j, l| {
        Complex64::from_polar(scale, -2.0 * PI * ((j * l) % pilot_len) as f64 / pilot_len as f64)
    }))
}

/// Least-squares pilot estimate `Y_p X^H` while every IRS reflects the
/// pilots unchanged. Column `j` converges to `h_j + sum_w g_{j_w}`.
pub fn pilot_phase_estimate<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    rng: &mut R,
) -> Result<CMatrix> {
    let x = pilot_codebook(cfg.pilot_len, cfg.users)?;
    let m = cfg.antennas;
    let mut composite = channels.h.clone();
    for k in 0..channels.g.ncols() {
        let j = cfg.owner_of(k);
        let col = composite.column(j) + channels.g.column(k);
        composite.set_column(j, &col);
    }
    let amp = cfg.pilot_power.sqrt();
    let sigma = cfg.sigma2.sqrt();
    let mut yp = &composite * &x * Complex64::new(amp, 0.0);
    for l in 0..cfg.pilot_len {
        for i in 0..m {
            yp[(i, l)] += complex_gaussian(rng, 1.0) * sigma;
        }
    }
    Ok(yp * x.adjoint() / Complex64::new(amp, 0.0))
}

/// Correlation coefficient between a BPSK stream and its reflection when
/// the IRS keeps phase 0 with probability `p`.
pub fn correlation_theoretical(p: f64) -> f64 {
    2.0 * p - 1.0
}

/// Sample correlation coefficient (Pearson, real parts).
pub fn empirical_correlation(a: &[Complex64], b: &[Complex64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().map(|z| z.re).sum::<f64>() / n;
    let mb = b.iter().map(|z| z.re).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x.re - ma, y.re - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

/// Limit of `S S^H / (n P)` for BPSK users under random reflection.
pub fn source_covariance(cfg: &ScenarioConfig) -> DMatrix<f64> {
    let k = cfg.streams();
    let mut r = DMatrix::<f64>::identity(k, k);
    let base = cfg.users;
    for j in 0..cfg.users {
        let rho: Vec<f64> = cfg.reflect_prob[j].iter().map(|&p| correlation_theoretical(p)).collect();
        for (w, &rw) in rho.iter().enumerate() {
            let bw = base + j * cfg.elements + w;
            r[(j, bw)] = rw;
            r[(bw, j)] = rw;
            for (v, &rv) in rho.iter().enumerate() {
                if v != w {
                    r[(bw, base + j * cfg.elements + v)] = rw * rv;
                }
            }
        }
    }
    r
}
