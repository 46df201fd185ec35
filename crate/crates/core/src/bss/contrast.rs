//! Perimeter contrasts: convex perimeter of the extracted alphabet
//! (denoised) or of the raw samples (plain BCA).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::extractor::{extractor_f, Alphabet, ExtractorParams};
use crate::geometry::convex_hull;

/// Grid resolution requested from the extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Coarse,
    Full,
}

/// How a sequence is turned into the point set whose perimeter is scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contrast {
    /// Alphabet recovered by the extractor, with a cheaper grid for the
    /// inner gradient loop.
    Denoised {
        full: ExtractorParams,
        coarse: ExtractorParams,
        /// Heaviest points kept from each candidate alphabet.
        alphabet_cap: usize,
    },
    /// Raw samples; candidate alphabets keep at most `vertex_cap` hull
    /// vertices.
    Raw { vertex_cap: usize },
}

impl Contrast {
    pub fn denoised() -> Self {
        // odd bin counts put a bin center on the origin
        let mut full = ExtractorParams::default().with_bins(65);
        full.peaks.refine = true;
        full.peaks.theta = 0.01;
        full.solver.max_iter = 100;
        let coarse = full.with_bins(33);
        Contrast::Denoised {
            full,
            coarse,
            alphabet_cap: 6,
        }
    }

    pub fn raw() -> Self {
        Contrast::Raw { vertex_cap: 6 }
    }

    pub fn is_denoised(&self) -> bool {
        matches!(self, Contrast::Denoised { .. })
    }

    /// Scores `seq`: returns the perimeter, the hull vertices of the scored
    /// point set (counter-clockwise) and the alphabet they came from.
    pub fn evaluate(&self, seq: &[Complex64], sigma_q: f64, res: Resolution) -> Result<Evaluation> {
        match self {
            Contrast::Denoised { full, coarse, .. } => {
                let params = match res {
                    Resolution::Full => full,
                    Resolution::Coarse => coarse,
                };
                let alphabet = denoised_alphabet(seq, sigma_q, params)?;
                let hull = convex_hull(&alphabet.points)?;
                let vertices = hull.vertex_indices.iter().map(|&k| alphabet.points[k]).collect();
                Ok(Evaluation {
                    perimeter: hull.perimeter,
                    vertices,
                    sample_indices: None,
                    alphabet_len: alphabet.len(),
                })
            }
            Contrast::Raw { .. } => {
                let hull = convex_hull(seq)?;
                let vertices = hull.vertex_indices.iter().map(|&k| seq[k]).collect();
                Ok(Evaluation {
                    perimeter: hull.perimeter,
                    vertices,
                    sample_indices: Some(hull.vertex_indices.clone()),
                    alphabet_len: hull.vertex_indices.len(),
                })
            }
        }
    }

    /// Alphabet feeding the discrete candidate set.
    pub fn candidate_alphabet(&self, seq: &[Complex64], sigma_q: f64) -> Result<Alphabet> {
        match self {
            Contrast::Denoised { full, alphabet_cap, .. } => {
                denoised_alphabet(seq, sigma_q, full).map(|a| a.heaviest(*alphabet_cap))
            }
            Contrast::Raw { vertex_cap } => {
                let hull = convex_hull(seq)?;
                let v = &hull.vertex_indices;
                let keep = (*vertex_cap).max(2).min(v.len());
                // evenly spaced along the hull cycle
                let points = (0..keep).map(|i| seq[v[i * v.len() / keep]]).collect();
                Ok(Alphabet::uniform(points))
            }
        }
    }
}

/// Result of scoring one sequence.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub perimeter: f64,
    pub vertices: Vec<Complex64>,
    /// For raw contrasts the hull vertices are samples; their indices.
    pub sample_indices: Option<Vec<usize>>,
    pub alphabet_len: usize,
}

/// Phase that rotates the second moment of `seq` onto the positive real
/// axis. Rotating the input by `e^{i theta}` shifts it by `theta` (mod pi).
pub fn canonical_phase(seq: &[Complex64]) -> f64 {
    let m2: Complex64 = seq.iter().map(|z| z * z).sum();
    0.5 * m2.arg()
}

/// Extractor applied in a canonical orientation, so that a common phase
/// rotation of the input rotates the alphabet and nothing else.
pub fn denoised_alphabet(seq: &[Complex64], sigma_q: f64, params: &ExtractorParams) -> Result<Alphabet> {
    if seq.is_empty() {
        return Err(Error::EmptyInput("sequence"));
    }
    if seq.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        return Ok(Alphabet::new(vec![Complex64::new(0.0, 0.0)], vec![1.0]));
    }
    let phase = canonical_phase(seq);
    let back = Complex64::from_polar(1.0, phase);
    let fwd = back.conj();
    let rotated: Vec<Complex64> = seq.iter().map(|z| z * fwd).collect();
    let mut alphabet = extractor_f(&rotated, sigma_q, params)?;
    if sigma_q == 0.0 {
        snap_to_samples(&mut alphabet, &rotated);
    }
    alphabet.points.iter_mut().for_each(|p| *p *= back);
    Ok(alphabet)
}

/// Moves each point to the mean of the samples nearest to it. Without noise
/// this replaces bin centers by the exact symbol values.
fn snap_to_samples(alphabet: &mut Alphabet, seq: &[Complex64]) {
    let k = alphabet.len();
    let mut sums = vec![Complex64::new(0.0, 0.0); k];
    let mut counts = vec![0usize; k];
    for z in seq {
        let (best, _) = alphabet
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - z).norm_sqr()))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        sums[best] += z;
        counts[best] += 1;
    }
    for i in 0..k {
        if counts[i] > 0 {
            alphabet.points[i] = sums[i] / counts[i] as f64;
        }
    }
}
