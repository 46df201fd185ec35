//! Simplex-constrained quadratic program behind the deconvolution step.
//!
//! Minimizes `0.5 * |A x - b|^2` over distributions `x` (nonnegative, unit
//! mass), where `A` blurs a `bins x bins` table with a separable circular
//! kernel. `A^T A` and `A^T b` reduce to two-sided products with small
//! Toeplitz blocks, so each iteration costs four `bins^3` products.

use nalgebra::DMatrix;

/// Stopping rule for the projected-gradient solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DMatrix<f64>,
    /// Final value of `0.5 * |A x - b|^2`.
    pub objective: f64,
    /// Objective after every accepted iteration, starting with the initial point.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Quadratic data `0.5 <x, K2 x K2> - <x, C> + 0.5 |b|^2`.
#[derive(Debug, Clone)]
pub struct BlurQp {
    /// Block of the squared blur kernel (`A^T A` factor), symmetric.
    k2: DMatrix<f64>,
    /// `A^T b`.
    linear: DMatrix<f64>,
    /// `|b|^2`.
    b_norm2: f64,
    /// Whether the blur is the identity (zero noise).
    identity: bool,
}

impl BlurQp {
    /// `k1` is the blur block, `k2` the block of the blur applied twice and
    /// `observed` the histogram `b`.
    pub fn new(k1: &DMatrix<f64>, k2: DMatrix<f64>, observed: &DMatrix<f64>) -> Self {
        let identity = is_identity(k1) && is_identity(&k2);
        let linear = if identity {
            observed.clone()
        } else {
            k1 * observed * k1
        };
        Self {
            k2,
            linear,
            b_norm2: observed.norm_squared(),
            identity,
        }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        if self.identity {
            x.clone()
        } else {
            &self.k2 * x * &self.k2
        }
    }

    fn value(&self, x: &DMatrix<f64>, qx: &DMatrix<f64>) -> f64 {
        let v = 0.5 * x.dot(qx) - x.dot(&self.linear) + 0.5 * self.b_norm2;
        v.max(0.0)
    }

    pub fn objective(&self, x: &DMatrix<f64>) -> f64 {
        self.value(x, &self.apply(x))
    }

    /// Accelerated projected gradient with function-value restarts. Only
    /// iterations that do not increase the objective are accepted.
    pub fn solve(&self, start: &DMatrix<f64>, opts: &SolverOptions) -> QpSolution {
        // |A| <= 1 because every noise CF sample is at most one.
        let step = 1.0;
        let mut scratch = Vec::new();

        let mut x = start.clone();
        project_simplex(x.as_mut_slice(), 1.0, &mut scratch);
        let mut qx = self.apply(&x);
        let mut fx = self.value(&x, &qx);
        let mut history = vec![fx];

        let mut y = x.clone();
        let mut qy = qx.clone();
        let mut t = 1.0f64;
        let mut momentum = false;
        let mut converged = false;
        let mut iterations = 0;

        while iterations < opts.max_iter {
            iterations += 1;
            let mut x_new = &y - (&qy - &self.linear) * step;
            project_simplex(x_new.as_mut_slice(), 1.0, &mut scratch);
            let qx_new = self.apply(&x_new);
            let f_new = self.value(&x_new, &qx_new);

            if f_new > fx {
                if momentum {
                    // restart from the last accepted point
                    t = 1.0;
                    y.copy_from(&x);
                    qy.copy_from(&qx);
                    momentum = false;
                    continue;
                }
                // a plain step cannot ascend; only rounding gets here
                converged = true;
                break;
            }

            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_new;
            y = &x_new + (&x_new - &x) * beta;
            qy = &qx_new + (&qx_new - &qx) * beta;
            momentum = beta > 0.0;

            let change = fx - f_new;
            x = x_new;
            qx = qx_new;
            fx = f_new;
            t = t_new;
            history.push(fx);

            if change <= opts.rel_tol * fx.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }

        QpSolution {
            x,
            objective: fx,
            history,
            iterations,
            converged,
        }
    }
}

fn is_identity(m: &DMatrix<f64>) -> bool {
    m.iter().enumerate().all(|(idx, &v)| {
        let (i, j) = (idx % m.nrows(), idx / m.nrows());
        if i == j {
            (v - 1.0).abs() < 1e-12
        } else {
            v.abs() < 1e-12
        }
    })
}

/// Euclidean projection onto `{x >= 0, sum x = mass}` (Michelot's pivoting).
pub fn project_simplex(v: &mut [f64], mass: f64, scratch: &mut Vec<f64>) {
    if v.is_empty() {
        return;
    }
    scratch.clear();
    scratch.extend_from_slice(v);
    let mut sum: f64 = scratch.iter().sum();
    let mut tau = (sum - mass) / scratch.len() as f64;
    loop {
        let before = scratch.len();
        scratch.retain(|&e| e > tau);
        if scratch.is_empty() {
            // all entries tie; fall back to the uniform point
            let u = mass / v.len() as f64;
            v.iter_mut().for_each(|e| *e = u);
            return;
        }
        if scratch.len() == before {
            break;
        }
        sum = scratch.iter().sum();
        tau = (sum - mass) / scratch.len() as f64;
    }
    for e in v.iter_mut() {
        *e = (*e - tau).max(0.0);
    }
}
