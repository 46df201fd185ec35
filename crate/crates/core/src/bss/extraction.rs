//! Dimension reduction and the perimeter-descent search for an
//! extraction vector.

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use super::contrast::{Evaluation, Resolution};
use super::BssParams;
use crate::error::{Error, Result};
use crate::geometry::hull_support_map;
use crate::model::{complex_gaussian, CMatrix};

pub type CVector = DVector<Complex64>;

/// Principal-subspace projection of an observation block.
#[derive(Debug, Clone)]
pub struct Reduction {
    /// `K x n` coordinates in the principal subspace.
    pub y_red: CMatrix,
    /// `M x K`, orthonormal columns; `back_map * y_red` approximates `Y`.
    pub back_map: CMatrix,
    /// All eigenvalues of `Y Y^H / n`, descending.
    pub eigenvalues: Vec<f64>,
}

impl Reduction {
    /// Selection of the first row, `e_1`, expressed in subspace
    /// coordinates and normalized; `None` if `e_1` is orthogonal to it.
    pub fn start_vector(&self) -> Option<CVector> {
        let v = self.back_map.row(0).transpose();
        let norm = v.norm();
        (norm > 1e-12).then(|| v.unscale(norm))
    }
}

/// Eigenpairs of a Hermitian matrix sorted by descending eigenvalue.
pub fn sorted_eigen(cov: CMatrix) -> (Vec<f64>, CMatrix) {
    let m = cov.nrows();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn reduce_dimension(y: &CMatrix, k: usize) -> Result<Reduction> {
    let (m, n) = y.shape();
    if k > m {
        return Err(Error::Dimension(format!("cannot keep {k} components of {m} rows")));
    }
    if n == 0 {
        return Err(Error::EmptyInput("observation block"));
    }
    let cov = (y * y.adjoint()).unscale(n as f64);
    let (eigenvalues, vectors) = sorted_eigen(cov);
    let back_map = vectors.columns(0, k).into_owned();
    let y_red = back_map.adjoint() * y;
    Ok(Reduction {
        y_red,
        back_map,
        eigenvalues,
    })
}

/// `s = u Y` with `u` read as a row vector.
pub fn extract_signal(u: &CVector, y: &CMatrix) -> CVector {
    y.tr_mul(u)
}

/// Outcome of one extraction-vector search.
#[derive(Debug, Clone)]
pub struct ExtractionResult {
    /// Unit-norm extraction vector in the coordinates of the input block.
    pub u: CVector,
    /// `u Y` for the input block.
    pub s: CVector,
    /// Objective after initialization and each accepted step.
    pub perimeter_history: Vec<f64>,
    pub converged: bool,
    pub restarts: usize,
}

/// Noise seen by `u Y`: `sigma2 * |u mix|^2` per complex sample.
#[derive(Debug, Clone)]
pub struct NoiseMix<'a> {
    pub sigma2: f64,
    /// `K x M` map from the raw noise to the rows of the block, or `None`
    /// for white unit-gain rows.
    pub mix: Option<&'a CMatrix>,
}

impl NoiseMix<'_> {
    pub fn white(sigma2: f64) -> NoiseMix<'static> {
        NoiseMix { sigma2, mix: None }
    }

    /// Per-axis standard deviation of the noise on `u Y`.
    pub fn sigma_q(&self, u: &CVector) -> f64 {
        let gain = match self.mix {
            Some(mix) => mix.tr_mul(u).norm_squared(),
            None => u.norm_squared(),
        };
        (0.5 * self.sigma2 * gain).sqrt()
    }
}

struct Scored {
    eval: Evaluation,
    /// Samples nearest to each hull vertex, in hull order.
    support: Vec<usize>,
}

fn score(
    y: &CMatrix,
    u: &CVector,
    noise: &NoiseMix,
    scale: f64,
    res: Resolution,
    params: &BssParams,
) -> Result<Option<Scored>> {
    let s = extract_signal(u, y);
    let sigma_q = noise.sigma_q(u) * scale;
    let eval = params.contrast.evaluate(s.as_slice(), sigma_q, res)?;
    if eval.alphabet_len < 2 {
        return Ok(None);
    }
    let support = match &eval.sample_indices {
        Some(idx) => idx.clone(),
        None => hull_support_map(&eval.vertices, s.as_slice()),
    };
    Ok(Some(Scored { eval, support }))
}

/// Tangent component of `(Wp u / 2 - u L) / |u|`, with `Wp` the
/// support-weighted outer-product sum over hull edges.
fn gradient(y: &CMatrix, u: &CVector, scored: &Scored) -> CVector {
    let k = y.nrows();
    let v = &scored.eval.vertices;
    let p = &scored.support;
    let mut acc = CVector::zeros(k);
    let len = p.len();
    if len >= 2 {
        for i in 0..len {
            let prev = (i + len - 1) % len;
            let edge = (v[i] - v[prev]).norm();
            if edge == 0.0 {
                continue;
            }
            let d = y.column(p[i]) - y.column(p[prev]);
            let proj = u.dot(&d);
            acc.zip_apply(&d, |a, di| *a += di.conj() * proj / edge);
        }
    }
    let perimeter = scored.eval.perimeter;
    let norm = u.norm();
    let g = (acc * Complex64::new(0.5, 0.0) - u * Complex64::new(perimeter, 0.0)) / Complex64::new(norm, 0.0);
    // the radial part is undone by renormalization; keep the tangent part
    let radial = u.dotc(&g) / Complex64::new(norm * norm, 0.0);
    g - u * radial
}

fn random_unit<R: Rng + ?Sized>(k: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(k, |_, _| complex_gaussian(rng, 1.0));
        let norm = v.norm();
        if norm > 0.0 {
            return v.unscale(norm);
        }
    }
}

fn first_unit(k: usize) -> CVector {
    let mut u = CVector::zeros(k);
    u[0] = Complex64::new(1.0, 0.0);
    u
}

/// Searches for a unit vector `u` minimizing the contrast of `u Y`,
/// starting from `start` (default `e_1`).
pub fn extract_vector<R: Rng + ?Sized>(
    y_red: &CMatrix,
    start: Option<&CVector>,
    noise: &NoiseMix,
    params: &BssParams,
    rng: &mut R,
) -> Result<ExtractionResult> {
    let (k, n) = y_red.shape();
    if k == 0 || n == 0 {
        return Err(Error::EmptyInput("reduced observation block"));
    }
    let power = y_red.norm_squared() / (k * n) as f64;
    if power == 0.0 || !power.is_finite() {
        return Err(Error::ExtractionCollapsed { restarts: 0 });
    }
    // unit average power keeps step sizes comparable across SNRs
    let scale = power.sqrt().recip();
    let yn = y_red * Complex64::new(scale, 0.0);

    let mut u = start.cloned().unwrap_or_else(|| first_unit(k));
    for restart in 0..=params.max_restarts {
        if restart > 0 {
            u = random_unit(k, rng);
        }
        let Some((u_c, mut history, mut converged)) = descend(&yn, u.clone(), noise, scale, Resolution::Coarse, params)?
        else {
            continue;
        };
        let mut u_opt = u_c;
        if params.polish && params.contrast.is_denoised() {
            if let Some((u_f, h_f, c_f)) = descend(&yn, u_opt.clone(), noise, scale, Resolution::Full, params)? {
                u_opt = u_f;
                history.extend(h_f);
                converged = c_f;
            }
        }
        {
            let s = extract_signal(&u_opt, y_red);
            return Ok(ExtractionResult {
                u: u_opt,
                s,
                perimeter_history: history,
                converged,
                restarts: restart,
            });
        }
    }
    Err(Error::ExtractionCollapsed {
        restarts: params.max_restarts,
    })
}

type Descent = (CVector, Vec<f64>, bool);

fn descend(
    y: &CMatrix,
    mut u: CVector,
    noise: &NoiseMix,
    scale: f64,
    res: Resolution,
    params: &BssParams,
) -> Result<Option<Descent>> {
    let Some(mut cur) = score(y, &u, noise, scale, res, params)? else {
        return Ok(None);
    };
    let mut history = vec![cur.eval.perimeter];
    let mut converged = false;
    for _ in 0..params.max_iter {
        let g = gradient(y, &u, &cur);
        let gnorm2 = g.norm_squared();
        if gnorm2 == 0.0 || !gnorm2.is_finite() {
            converged = true;
            break;
        }
        let mut mu = (0.5 / gnorm2).min(params.max_step / gnorm2.sqrt());
        let mut next = None;
        for _ in 0..=params.backtracks {
            let mut cand = &u - &g * Complex64::new(mu, 0.0);
            let norm = cand.norm();
            if norm > 0.0 {
                cand.unscale_mut(norm);
                if let Some(sc) = score(y, &cand, noise, scale, res, params)? {
                    if sc.eval.perimeter <= cur.eval.perimeter {
                        next = Some((cand, sc));
                        break;
                    }
                }
            }
            mu *= 0.5;
        }
        let Some((cand, sc)) = next else {
            converged = true;
            break;
        };
        let prev = cur.eval.perimeter;
        u = cand;
        cur = sc;
        history.push(cur.eval.perimeter);
        let rel = if prev > 0.0 { (prev - cur.eval.perimeter) / prev } else { 0.0 };
        if rel < params.rel_tol {
            converged = true;
            break;
        }
    }
    Ok(Some((u, history, converged)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn reduction_is_exact_for_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = CMatrix::from_fn(4, 2, |_, _| complex_gaussian(&mut rng, 1.0));
        let s = CMatrix::from_fn(2, 30, |_, _| complex_gaussian(&mut rng, 1.0));
        let y = &a * &s;
        let red = reduce_dimension(&y, 2).unwrap();
        let back = &red.back_map * &red.y_red;
        assert!((back - &y).norm() < 1e-9 * y.norm());
        let gram = red.back_map.adjoint() * &red.back_map;
        assert!((gram - CMatrix::identity(2, 2)).norm() < 1e-10);
        assert!(red.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn too_many_components_rejected() {
        let y = CMatrix::zeros(2, 5);
        assert!(reduce_dimension(&y, 3).is_err());
    }

    #[test]
    fn extract_signal_reads_rows() {
        let y = CMatrix::from_fn(3, 4, |r, t| c(r as f64, t as f64));
        let s = extract_signal(&first_unit(3), &y);
        for t in 0..4 {
            assert_eq!(s[t], y[(0, t)]);
        }
    }

    #[test]
    fn white_noise_sigma() {
        let u = first_unit(3);
        assert!((NoiseMix::white(0.5).sigma_q(&u) - 0.5).abs() < 1e-15);
    }
}
