//! Blind separation by perimeter minimization: one stream per round is
//! extracted, its channel estimated row by row, and its contribution
//! deflated from the observation.

mod channel;
mod contrast;
mod extraction;

use num_complex::Complex64;
use rand::Rng;

pub use channel::{
    candidate_set, deflate, estimate_channel, estimate_channel_row, BlockNoise, ChannelEstimate, RowEstimate,
    RowFlag, RowNoise,
};
pub use contrast::{canonical_phase, denoised_alphabet, Contrast, Evaluation, Resolution};
pub use extraction::{
    extract_signal, extract_vector, reduce_dimension, sorted_eigen, CVector, ExtractionResult, NoiseMix, Reduction,
};

use crate::error::{Error, Result};
use crate::model::{CMatrix, ScenarioConfig};
use crate::par::Execution;

#[derive(Debug, Clone, PartialEq)]
pub struct BssParams {
    pub contrast: Contrast,
    /// Gradient iterations per extraction.
    pub max_iter: usize,
    /// Stop once the relative perimeter decrease falls below this.
    pub rel_tol: f64,
    /// Random restarts after a collapsed extraction.
    pub max_restarts: usize,
    /// Step halvings tried before declaring a stationary point.
    pub backtracks: usize,
    /// Longest step `mu |g|` taken on the unit sphere.
    pub max_step: f64,
    /// Continue the descent on the full extractor grid after the coarse one.
    pub polish: bool,
    /// Candidate deduplication radius.
    pub candidate_tol: f64,
    /// Candidates kept from the coarse screen for full-grid scoring
    /// (0 scores everything on the full grid).
    pub screen_keep: usize,
    pub exec: Execution,
}

impl Default for BssParams {
    fn default() -> Self {
        Self {
            contrast: Contrast::denoised(),
            max_iter: 100,
            rel_tol: 1e-4,
            max_restarts: 3,
            backtracks: 8,
            max_step: 0.5,
            polish: true,
            candidate_tol: 1e-6,
            screen_keep: 3,
            exec: Execution::default(),
        }
    }
}

impl BssParams {
    /// Plain bounded component analysis on raw samples.
    pub fn bca() -> Self {
        Self {
            contrast: Contrast::raw(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct StreamEstimate {
    pub s: CVector,
    pub c_hat: CVector,
    /// Lifted extraction vector acting on the residual block of its round.
    pub u: CVector,
    pub perimeter_history: Vec<f64>,
    pub converged: bool,
    pub restarts: usize,
    pub flagged_rows: usize,
}

/// Estimate-to-truth mapping produced by [`resolve_ambiguity`].
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// True column matched to each estimated stream.
    pub assignment: Vec<Option<usize>>,
    /// Scale applied to each channel estimate (and divided out of its stream).
    pub scales: Vec<Complex64>,
}

#[derive(Debug, Clone, Default)]
pub struct EstimateSet {
    pub streams: Vec<StreamEstimate>,
    pub alignment: Option<Alignment>,
    /// Set when a round failed; `streams` then holds the completed rounds.
    pub aborted: Option<String>,
}

impl EstimateSet {
    /// Channel estimate matched to true column `col`, if any.
    pub fn for_column(&self, col: usize) -> Option<&StreamEstimate> {
        let al = self.alignment.as_ref()?;
        al.assignment.iter().position(|a| *a == Some(col)).map(|i| &self.streams[i])
    }
}

/// Runs `N + W N` extraction rounds on `y`.
pub fn run_bss<R: Rng + ?Sized>(y: &CMatrix, cfg: &ScenarioConfig, params: &BssParams, rng: &mut R) -> Result<EstimateSet> {
    let k = cfg.streams();
    let (m, _) = y.shape();
    if m != cfg.antennas {
        return Err(Error::Dimension(format!("block has {m} rows, config {} antennas", cfg.antennas)));
    }
    if k > m {
        return Err(Error::Dimension(format!("{k} streams exceed {m} antennas")));
    }
    let mut out = EstimateSet::default();
    let mut cur = y.clone();
    let mut mix = CMatrix::identity(m, m);
    for round in 0..k {
        match run_round(&cur, &mix, k - round, cfg.sigma2, params, rng) {
            Ok(stream) => {
                let v = mix.tr_mul(&stream.u);
                cur = deflate(&cur, &stream.c_hat, &stream.s);
                mix -= &stream.c_hat * v.transpose();
                out.streams.push(stream);
            }
            Err(e) => {
                out.aborted = Some(format!("round {round}: {e}"));
                break;
            }
        }
    }
    Ok(out)
}

fn run_round<R: Rng + ?Sized>(
    cur: &CMatrix,
    mix: &CMatrix,
    remaining: usize,
    sigma2: f64,
    params: &BssParams,
    rng: &mut R,
) -> Result<StreamEstimate> {
    let red = reduce_dimension(cur, remaining)?;
    let mix_red = red.back_map.adjoint() * mix;
    let noise = NoiseMix {
        sigma2,
        mix: Some(&mix_red),
    };
    let start = red.start_vector();
    let ext = extract_vector(&red.y_red, start.as_ref(), &noise, params, rng)?;
    let u = red.back_map.conjugate() * &ext.u;
    let s = extract_signal(&u, cur);
    let block_noise = BlockNoise {
        sigma2,
        mix: Some(mix),
        stream: mix.tr_mul(&u),
    };
    let ch = estimate_channel(cur, &s, &block_noise, params)?;
    Ok(StreamEstimate {
        flagged_rows: ch.flagged_rows(),
        c_hat: ch.c_hat,
        s,
        u,
        perimeter_history: ext.perimeter_history,
        converged: ext.converged,
        restarts: ext.restarts,
    })
}

/// Complex scale `a` minimizing `|a c_hat - c|`.
pub fn alignment_scale(c_hat: &CVector, c: &CVector) -> Complex64 {
    let den = c_hat.norm_squared();
    if den == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    c_hat.dotc(c) / den
}

fn abs_correlation(a: &CVector, b: &CVector) -> f64 {
    let den = a.norm() * b.norm();
    if den == 0.0 {
        0.0
    } else {
        a.dotc(b).norm() / den
    }
}

/// Oracle alignment: greedily pairs estimates with the true columns of
/// `c_true` by largest absolute correlation, then rescales each pair.
pub fn resolve_ambiguity(est: &EstimateSet, c_true: &CMatrix) -> EstimateSet {
    let cols: Vec<CVector> = c_true.column_iter().map(|c| c.into_owned()).collect();
    let ne = est.streams.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(ne * cols.len());
    for (i, st) in est.streams.iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            pairs.push((abs_correlation(&st.c_hat, c), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assignment = vec![None; ne];
    let mut taken = vec![false; cols.len()];
    for (_, i, j) in pairs {
        if assignment[i].is_none() && !taken[j] {
            assignment[i] = Some(j);
            taken[j] = true;
        }
    }
    let mut out = est.clone();
    let mut scales = vec![Complex64::new(1.0, 0.0); ne];
    for (i, st) in out.streams.iter_mut().enumerate() {
        let Some(j) = assignment[i] else { continue };
        let a = alignment_scale(&st.c_hat, &cols[j]);
        scales[i] = a;
        st.c_hat *= a;
        if a.norm() > 0.0 {
            st.s /= a;
        }
    }
    out.alignment = Some(Alignment { assignment, scales });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(c: CVector) -> StreamEstimate {
        StreamEstimate {
            s: CVector::from_element(3, Complex64::new(1.0, 0.0)),
            c_hat: c,
            u: CVector::zeros(1),
            perimeter_history: vec![],
            converged: true,
            restarts: 0,
            flagged_rows: 0,
        }
    }

    #[test]
    fn scale_closed_form() {
        let c = CVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.0)]);
        let a = alignment_scale(&(&c * Complex64::new(2.0, 0.0)), &c);
        assert!((a - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn permutation_and_phase_are_undone() {
        let c = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.2, 0.1),
                Complex64::new(0.1, 0.0),
                Complex64::new(1.0, -1.0),
            ],
        );
        let ph = Complex64::from_polar(1.0, 0.7);
        let est = EstimateSet {
            streams: vec![stream(c.column(1) * ph), stream(c.column(0) * ph.conj())],
            ..Default::default()
        };
        let al = resolve_ambiguity(&est, &c);
        let a = al.alignment.as_ref().unwrap();
        assert_eq!(a.assignment, vec![Some(1), Some(0)]);
        assert!((&al.streams[0].c_hat - c.column(1)).norm() < 1e-12);
        assert!((&al.streams[1].c_hat - c.column(0)).norm() < 1e-12);
        assert!((al.streams[0].s[0] - ph).norm() < 1e-12);
    }

    #[test]
    fn no_streams_no_rounds() {
        let cfg = ScenarioConfig {
            users: 0,
            reflect_prob: vec![],
            path_loss: vec![],
            ..Default::default()
        };
        let y = CMatrix::zeros(cfg.antennas, 10);
        let mut rng = rand::rng();
        let est = run_bss(&y, &cfg, &BssParams::default(), &mut rng).unwrap();
        assert!(est.streams.is_empty());
    }
}
