//! Per-user NMSE, zero-forcing SINR and BER, plus mean/min/max
//! aggregation across users.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::CMatrix;

/// Rank cut-off relative to the largest singular value.
const RANK_TOL: f64 = 1e-10;

pub fn nmse(h_hat: &DVector<Complex64>, h: &DVector<Complex64>) -> Result<f64> {
    if h_hat.len() != h.len() {
        return Err(Error::Dimension(format!("estimate length {} vs channel {}", h_hat.len(), h.len())));
    }
    let den = h.norm_squared();
    if den == 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok((h_hat - h).norm_squared() / den)
}

/// Zero-forcing rows `pinv(C_hat)`; errors when `C_hat` loses column rank.
pub fn zf_filter(c_hat: &CMatrix) -> Result<CMatrix> {
    let k = c_hat.ncols();
    if k == 0 || c_hat.nrows() < k {
        return Err(Error::RankDeficient(format!("{}x{k} channel estimate", c_hat.nrows())));
    }
    let svd = c_hat.clone().svd(true, true);
    let top = svd.singular_values.max();
    if top == 0.0 || svd.singular_values.min() <= RANK_TOL * top {
        return Err(Error::RankDeficient("channel estimate is rank deficient".into()));
    }
    svd.pseudo_inverse(0.0).map_err(|e| Error::RankDeficient(e.to_string()))
}

/// SINR in dB of each estimated column `j` (paired with true column `j`),
/// treating every other true column as interference.
pub fn zf_sinr(c_hat: &CMatrix, c: &CMatrix, power: f64, sigma2: f64) -> Result<Vec<f64>> {
    if c_hat.nrows() != c.nrows() || c_hat.ncols() > c.ncols() {
        return Err(Error::Dimension(format!(
            "estimate {}x{} vs channels {}x{}",
            c_hat.nrows(),
            c_hat.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    let w = zf_filter(c_hat)?;
    let gains = &w * c;
    Ok((0..c_hat.ncols())
        .map(|j| {
            let row = gains.row(j);
            let signal = power * row[j].norm_sqr();
            let interference: f64 = (0..c.ncols()).filter(|&k| k != j).map(|k| power * row[k].norm_sqr()).sum();
            let noise = sigma2 * w.row(j).norm_squared();
            10.0 * (signal / (interference + noise)).log10()
        })
        .collect())
}

/// Fraction of sign disagreements between the real parts.
pub fn ber(s_hat: &[Complex64], a: &[Complex64]) -> Result<f64> {
    if s_hat.len() != a.len() {
        return Err(Error::Dimension(format!("{} detected vs {} sent symbols", s_hat.len(), a.len())));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("symbol sequence"));
    }
    let errors = s_hat
        .iter()
        .zip(a)
        .filter(|(s, x)| (s.re >= 0.0) != (x.re >= 0.0))
        .count();
    Ok(errors as f64 / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserMetrics {
    pub nmse: f64,
    pub sinr_db: f64,
    pub ber: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// Summary over the finite entries; all-NaN when none are finite.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let finite: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return Self {
                mean: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        Self {
            mean: finite.iter().sum::<f64>() / finite.len() as f64,
            min: finite.iter().copied().fold(f64::INFINITY, f64::min),
            max: finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Per-user metrics with their aggregates. NMSE and BER are averaged in
/// linear units, SINR in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub per_user: Vec<UserMetrics>,
    pub nmse: Summary,
    pub sinr_db: Summary,
    pub ber: Summary,
}

pub fn aggregate(per_user: &[UserMetrics]) -> Result<TrialMetrics> {
    if per_user.is_empty() {
        return Err(Error::EmptyInput("per-user metrics"));
    }
    Ok(TrialMetrics {
        per_user: per_user.to_vec(),
        nmse: Summary::of(per_user.iter().map(|u| u.nmse)),
        sinr_db: Summary::of(per_user.iter().map(|u| u.sinr_db)),
        ber: Summary::of(per_user.iter().map(|u| u.ber)),
    })
}
