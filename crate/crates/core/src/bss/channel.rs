//! Discrete-candidate channel estimation and deflation.

use std::cmp::Ordering;

use num_complex::Complex64;

use super::contrast::{Contrast, Resolution};
use super::extraction::CVector;
use super::BssParams;
use crate::error::{Error, Result};
use crate::extractor::Alphabet;
use crate::model::CMatrix;
use crate::par::map_indexed;

/// Quotients `(y - y') / (z - z')` over distinct pairs, deduplicated within
/// `tol`, with `0` appended.
pub fn candidate_set(ya: &Alphabet, za: &Alphabet, tol: f64) -> Result<Vec<Complex64>> {
    if za.len() < 2 {
        return Err(Error::DegenerateAlphabet(za.len()));
    }
    let mut out: Vec<Complex64> = Vec::new();
    let mut push = |q: Complex64| {
        if q.is_finite() && !out.iter().any(|p| (p - q).norm() <= tol) {
            out.push(q);
        }
    };
    for (i, y) in ya.points.iter().enumerate() {
        for (j, y2) in ya.points.iter().enumerate() {
            if i == j || y == y2 {
                continue;
            }
            for (k, z) in za.points.iter().enumerate() {
                for (l, z2) in za.points.iter().enumerate() {
                    if k == l || z == z2 {
                        continue;
                    }
                    push((y - y2) / (z - z2));
                }
            }
        }
    }
    push(Complex64::new(0.0, 0.0));
    Ok(out)
}

/// Noise model for one row of `Y` and the extracted stream.
#[derive(Debug, Clone)]
pub enum RowNoise {
    /// Same per-axis standard deviation for every sequence.
    Constant(f64),
    /// `row = T_m n`, `s = v n` for white noise `n` of variance `sigma2`.
    Tracked { sigma2: f64, row: CVector, stream: CVector },
}

impl RowNoise {
    pub fn row_sigma(&self) -> f64 {
        match self {
            RowNoise::Constant(s) => *s,
            RowNoise::Tracked { sigma2, row, .. } => (0.5 * sigma2 * row.norm_squared()).sqrt(),
        }
    }

    pub fn stream_sigma(&self) -> f64 {
        match self {
            RowNoise::Constant(s) => *s,
            RowNoise::Tracked { sigma2, stream, .. } => (0.5 * sigma2 * stream.norm_squared()).sqrt(),
        }
    }

    /// Per-axis deviation of `row - c s`.
    pub fn residual_sigma(&self, c: Complex64) -> f64 {
        match self {
            RowNoise::Constant(s) => *s,
            RowNoise::Tracked { sigma2, row, stream } => {
                let var: f64 = row.iter().zip(stream.iter()).map(|(r, v)| (r - c * v).norm_sqr()).sum();
                (0.5 * sigma2 * var).sqrt()
            }
        }
    }
}

/// Why a row coefficient fell back to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowFlag {
    DegenerateAlphabet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowEstimate {
    pub coef: Complex64,
    pub objective: f64,
    pub candidates: usize,
    pub flag: Option<RowFlag>,
}

impl RowEstimate {
    fn flagged() -> Self {
        Self {
            coef: Complex64::new(0.0, 0.0),
            objective: f64::NAN,
            candidates: 0,
            flag: Some(RowFlag::DegenerateAlphabet),
        }
    }
}

fn residual(row: &[Complex64], s: &[Complex64], c: Complex64) -> Vec<Complex64> {
    row.iter().zip(s).map(|(y, z)| y - c * z).collect()
}

/// Orders `(score, |c|, position)` with a relative tolerance on the score.
fn better(a: (f64, Complex64, usize), b: (f64, Complex64, usize)) -> Ordering {
    let tol = 1e-12 * a.0.abs().max(b.0.abs());
    if (a.0 - b.0).abs() > tol {
        return a.0.total_cmp(&b.0);
    }
    a.1.norm()
        .total_cmp(&b.1.norm())
        .then(a.2.cmp(&b.2))
}

fn score_all(
    contrast: &Contrast,
    row: &[Complex64],
    s: &[Complex64],
    noise: &RowNoise,
    cands: &[(usize, Complex64)],
    res: Resolution,
) -> Result<Vec<(f64, Complex64, usize)>> {
    cands
        .iter()
        .map(|&(pos, c)| {
            let r = residual(row, s, c);
            let e = contrast.evaluate(&r, noise.residual_sigma(c), res)?;
            Ok((e.perimeter, c, pos))
        })
        .collect()
}

/// Coefficient `c` minimizing the contrast of `row - c s` over the
/// discrete candidate set.
pub fn estimate_channel_row(row: &[Complex64], s: &[Complex64], noise: &RowNoise, params: &BssParams) -> Result<RowEstimate> {
    if row.len() != s.len() {
        return Err(Error::Dimension(format!("row has {} samples, stream {}", row.len(), s.len())));
    }
    let za = params.contrast.candidate_alphabet(s, noise.stream_sigma())?;
    estimate_with_stream_alphabet(row, s, &za, noise, params)
}

fn estimate_with_stream_alphabet(
    row: &[Complex64],
    s: &[Complex64],
    za: &Alphabet,
    noise: &RowNoise,
    params: &BssParams,
) -> Result<RowEstimate> {
    let contrast = &params.contrast;
    let ya = contrast.candidate_alphabet(row, noise.row_sigma())?;
    let cands = match candidate_set(&ya, za, params.candidate_tol) {
        Ok(c) => c,
        Err(Error::DegenerateAlphabet(_)) => return Ok(RowEstimate::flagged()),
        Err(e) => return Err(e),
    };
    let indexed: Vec<(usize, Complex64)> = cands.iter().copied().enumerate().collect();
    let finalists = if params.screen_keep > 0 && contrast.is_denoised() && indexed.len() > params.screen_keep {
        let mut coarse = score_all(contrast, row, s, noise, &indexed, Resolution::Coarse)?;
        coarse.sort_by(|a, b| better(*a, *b));
        coarse.truncate(params.screen_keep);
        coarse.into_iter().map(|(_, c, pos)| (pos, c)).collect()
    } else {
        indexed
    };
    let scored = score_all(contrast, row, s, noise, &finalists, Resolution::Full)?;
    let best = scored
        .into_iter()
        .min_by(|a, b| better(*a, *b))
        .expect("candidate set always holds zero");
    Ok(RowEstimate {
        coef: best.1,
        objective: best.0,
        candidates: cands.len(),
        flag: None,
    })
}

/// Per-row noise description for a whole block.
#[derive(Debug, Clone)]
pub struct BlockNoise<'a> {
    pub sigma2: f64,
    /// `M x M` map from raw noise to the rows of the current block;
    /// `None` means identity.
    pub mix: Option<&'a CMatrix>,
    /// Noise map of the extracted stream (length `M`).
    pub stream: CVector,
}

impl BlockNoise<'_> {
    pub fn row(&self, m: usize) -> RowNoise {
        let row = match self.mix {
            Some(t) => t.row(m).transpose(),
            None => {
                let mut e = CVector::zeros(self.stream.len());
                e[m] = Complex64::new(1.0, 0.0);
                e
            }
        };
        RowNoise::Tracked {
            sigma2: self.sigma2,
            row,
            stream: self.stream.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub c_hat: CVector,
    pub rows: Vec<RowEstimate>,
}

impl ChannelEstimate {
    pub fn flagged_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.flag.is_some()).count()
    }
}

pub fn estimate_channel(y: &CMatrix, s: &CVector, noise: &BlockNoise, params: &BssParams) -> Result<ChannelEstimate> {
    let (m, n) = y.shape();
    if s.len() != n {
        return Err(Error::Dimension(format!("block has {n} samples, stream {}", s.len())));
    }
    let stream_sigma = RowNoise::Tracked {
        sigma2: noise.sigma2,
        row: noise.stream.clone(),
        stream: noise.stream.clone(),
    }
    .row_sigma();
    let za = params.contrast.candidate_alphabet(s.as_slice(), stream_sigma)?;
    let rows: Vec<Result<RowEstimate>> = map_indexed(params.exec, m, |r| {
        let row: Vec<Complex64> = y.row(r).iter().copied().collect();
        estimate_with_stream_alphabet(&row, s.as_slice(), &za, &noise.row(r), params)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let c_hat = CVector::from_iterator(m, rows.iter().map(|r| r.coef));
    Ok(ChannelEstimate { c_hat, rows })
}

/// `Y - c s` with `s` read as a row.
pub fn deflate(y: &CMatrix, c: &CVector, s: &CVector) -> CMatrix {
    y - c * s.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn candidates_contain_true_coefficient() {
        let ya = Alphabet::uniform(vec![re(1.5), re(0.5), re(-0.5), re(-1.5)]);
        let za = Alphabet::uniform(vec![re(1.0), re(-1.0)]);
        let q = candidate_set(&ya, &za, 1e-6).unwrap();
        assert!(q.iter().any(|c| (c - re(1.0)).norm() < 1e-12));
        assert!(q.contains(&re(0.0)));
        assert!(q.len() <= 4 * 3 * 2 + 1);
    }

    #[test]
    fn degenerate_stream_alphabet_rejected() {
        let ya = Alphabet::uniform(vec![re(1.0), re(-1.0)]);
        let za = Alphabet::uniform(vec![re(1.0)]);
        assert!(matches!(candidate_set(&ya, &za, 1e-6), Err(Error::DegenerateAlphabet(1))));
    }

    #[test]
    fn tie_prefers_smaller_magnitude_then_order() {
        let a = (1.0, re(2.0), 0);
        let b = (1.0, re(0.5), 1);
        assert_eq!(better(a, b), Ordering::Greater);
        let c = (1.0, re(-0.5), 2);
        assert_eq!(better(b, c), Ordering::Less);
    }

    #[test]
    fn deflate_by_zero_is_identity() {
        let y = CMatrix::from_fn(2, 3, |r, t| Complex64::new(r as f64, t as f64));
        let out = deflate(&y, &CVector::zeros(2), &CVector::from_element(3, re(1.0)));
        assert_eq!(out, y);
    }

    #[test]
    fn tracked_residual_noise() {
        let noise = RowNoise::Tracked {
            sigma2: 2.0,
            row: CVector::from_vec(vec![re(1.0), re(0.0)]),
            stream: CVector::from_vec(vec![re(0.0), re(1.0)]),
        };
        // var = 2 * (1 + |c|^2), per axis half of that
        assert!((noise.residual_sigma(re(1.0)) - 2.0f64.sqrt()).abs() < 1e-12);
        assert!((noise.row_sigma() - 1.0).abs() < 1e-12);
    }
}
