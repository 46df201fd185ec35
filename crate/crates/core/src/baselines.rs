//! Reference methods: eigenvector channel estimation that relies on a power
//! gap between legitimate and reflected streams, the matching subspace
//! diagnostics, and bounded component analysis on raw samples.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::bss::{run_bss, sorted_eigen, BssParams, EstimateSet};
use crate::error::{Error, Result};
use crate::model::{CMatrix, ScenarioConfig};

/// `Y Y^H / (M n)`.
pub fn sample_covariance(y: &CMatrix) -> Result<CMatrix> {
    let (m, n) = y.shape();
    if m == 0 || n == 0 {
        return Err(Error::EmptyInput("observation block"));
    }
    Ok((y * y.adjoint()).unscale((m * n) as f64))
}

/// Eigenvector estimates of the legitimate channels.
#[derive(Debug, Clone)]
pub struct EvdEstimate {
    /// `M x N`, column `j` estimates `h_j`.
    pub h_hat: CMatrix,
    /// Eigenvalues of the sample covariance, descending.
    pub eigenvalues: Vec<f64>,
}

/// Takes the `N` strongest eigenvectors of the sample covariance as the
/// legitimate channel directions, scales them by the signal part of their
/// eigenvalue and fixes phase and user order against the pilot-phase
/// estimates (`M x N`).
pub fn evd_estimate(y: &CMatrix, cfg: &ScenarioConfig, pilot: &CMatrix) -> Result<EvdEstimate> {
    let m = y.nrows();
    let users = cfg.users;
    if m != cfg.antennas || pilot.nrows() != m || pilot.ncols() != users {
        return Err(Error::Dimension(format!(
            "block {m} rows, pilot estimate {}x{}, config {} antennas x {users} users",
            pilot.nrows(),
            pilot.ncols(),
            cfg.antennas
        )));
    }
    let (values, vectors) = sorted_eigen(sample_covariance(y)?);
    let mf = m as f64;
    let strong = values.iter().take_while(|&&l| mf * l > cfg.sigma2).count();
    if strong < users {
        return Err(Error::RankDeficient(format!(
            "{strong} eigenvalues above the noise floor, {users} users"
        )));
    }
    // greedy pairing of eigenvectors with users by pilot correlation
    let mut pairs = Vec::with_capacity(users * users);
    for e in 0..users {
        for j in 0..users {
            let corr = vectors.column(e).dotc(&pilot.column(j)).norm();
            pairs.push((corr, e, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut owner = vec![None; users];
    let mut used = vec![false; users];
    for (_, e, j) in pairs {
        if owner[j].is_none() && !used[e] {
            owner[j] = Some(e);
            used[e] = true;
        }
    }
    let mut h_hat = CMatrix::zeros(m, users);
    for (j, e) in owner.into_iter().enumerate() {
        let e = e.expect("square assignment");
        let v = vectors.column(e);
        let amp = ((mf * values[e] - cfg.sigma2).max(0.0) / cfg.power).sqrt();
        let inner = v.dotc(&pilot.column(j));
        let phase = if inner.norm() > 0.0 {
            inner / inner.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        h_hat.set_column(j, &(v * (phase * amp)));
    }
    Ok(EvdEstimate {
        h_hat,
        eigenvalues: values,
    })
}

/// Sample eigenvalues and principal angles against a reference subspace.
#[derive(Debug, Clone)]
pub struct SubspaceReport {
    pub eigenvalues: Vec<f64>,
    /// Radians, ascending, one per reference dimension.
    pub principal_angles: Vec<f64>,
}

impl SubspaceReport {
    pub fn largest_angle(&self) -> f64 {
        self.principal_angles.last().copied().unwrap_or(0.0)
    }
}

/// Orthonormal basis for the column space of `a` (full column rank assumed).
fn orthonormal_basis(a: &CMatrix) -> CMatrix {
    a.clone().qr().q()
}

/// Principal angles between the column spaces of `a` and `b`.
pub fn principal_angles(a: &CMatrix, b: &CMatrix) -> Vec<f64> {
    let qa = orthonormal_basis(a);
    let qb = orthonormal_basis(b);
    let sv = (qa.adjoint() * qb).singular_values();
    let mut angles: Vec<f64> = sv.iter().map(|&s| s.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    angles
}

/// Reference space `col(C R^{-1/2} U_s)` with `R = diag(|c_k|^2 / M)` and
/// `R^{1/2} R_s R^{1/2} = U_s Lambda U_s^H`.
pub fn reference_subspace(c: &CMatrix, r_s: &DMatrix<f64>) -> Result<CMatrix> {
    let (m, k) = c.shape();
    if r_s.nrows() != k || r_s.ncols() != k {
        return Err(Error::Dimension(format!("{k} channels, source covariance {}x{}", r_s.nrows(), r_s.ncols())));
    }
    let r: Vec<f64> = c.column_iter().map(|col| col.norm_squared() / m as f64).collect();
    if r.iter().any(|&x| x <= 0.0) {
        return Err(Error::ZeroChannel);
    }
    let half = DVector::from_iterator(k, r.iter().map(|x| x.sqrt()));
    let scaled = DMatrix::from_fn(k, k, |i, j| half[i] * r_s[(i, j)] * half[j]);
    let scaled = scaled.map(|x| Complex64::new(x, 0.0));
    let (_, u_s) = sorted_eigen(scaled);
    let inv_half = CMatrix::from_diagonal(&half.map(|x| Complex64::new(1.0 / x, 0.0)));
    Ok(c * inv_half * u_s)
}

/// Compares the top `K` sample eigenvectors of `y` with the reference
/// subspace built from the true channels and source covariance.
pub fn subspace_check(y: &CMatrix, c: &CMatrix, r_s: &DMatrix<f64>, _sigma2: f64) -> Result<SubspaceReport> {
    let k = c.ncols();
    let (eigenvalues, vectors) = sorted_eigen(sample_covariance(y)?);
    if k > vectors.ncols() {
        return Err(Error::Dimension(format!("{k} streams exceed {} antennas", vectors.ncols())));
    }
    let top = vectors.columns(0, k).into_owned();
    let reference = reference_subspace(c, r_s)?;
    Ok(SubspaceReport {
        eigenvalues,
        principal_angles: principal_angles(&top, &reference),
    })
}

/// Perimeter-minimizing separation on raw samples.
pub fn bca_run<R: Rng + ?Sized>(y: &CMatrix, cfg: &ScenarioConfig, params: &BssParams, rng: &mut R) -> Result<EstimateSet> {
    let params = BssParams {
        contrast: BssParams::bca().contrast,
        ..params.clone()
    };
    run_bss(y, cfg, &params, rng)
}
