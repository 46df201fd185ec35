use nalgebra::DMatrix;
use num_complex::Complex64;

use super::grid::QuantGrid;
use crate::error::{Error, Result};

/// Finite set of constellation points with probability masses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Alphabet {
    pub points: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl Alphabet {
    pub fn new(points: Vec<Complex64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(points.len(), weights.len());
        Self { points, weights }
    }

    /// Equal-weight alphabet, handy for tests and for the raw-hull baseline.
    pub fn uniform(points: Vec<Complex64>) -> Self {
        let w = if points.is_empty() {
            0.0
        } else {
            1.0 / points.len() as f64
        };
        let weights = vec![w; points.len()];
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// The `k` heaviest points in their original order; ties keep the
    /// earlier point.
    pub fn heaviest(&self, k: usize) -> Self {
        if self.len() <= k {
            return self.clone();
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        order.truncate(k);
        order.sort_unstable();
        Self {
            points: order.iter().map(|&i| self.points[i]).collect(),
            weights: order.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Peak-picking rule applied to a deconvolved distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    /// Relative threshold against the heaviest peak.
    pub theta: f64,
    /// Peaks within this many bins (Chebyshev distance) are merged.
    pub merge_bins: usize,
    /// Report centroids of the mass around each peak instead of the
    /// centroid of the peak bins alone.
    pub refine: bool,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            theta: 0.1,
            merge_bins: 1,
            refine: false,
        }
    }
}

struct Peak {
    r: usize,
    i: usize,
    mass: f64,
}

fn window(c: usize, n: usize) -> std::ops::RangeInclusive<usize> {
    c.saturating_sub(1)..=(c + 1).min(n - 1)
}

/// Local maxima of `dist` over their 8-neighbourhood, each weighted by the
/// mass of its 3x3 window, thresholded at `theta` times the largest window
/// mass and merged when closer than `merge_bins` bins.
pub fn extract_alphabet(dist: &DMatrix<f64>, grid: &QuantGrid, opts: &PeakOptions) -> Result<Alphabet> {
    let nb = dist.nrows();
    let mut peaks = Vec::new();
    for i in 0..nb {
        for r in 0..nb {
            let w = dist[(r, i)];
            if w <= 0.0 {
                continue;
            }
            let mut is_max = true;
            let mut mass = 0.0;
            'scan: for ii in window(i, nb) {
                for rr in window(r, nb) {
                    let v = dist[(rr, ii)];
                    if v > w {
                        is_max = false;
                        break 'scan;
                    }
                    mass += v;
                }
            }
            if is_max {
                peaks.push(Peak { r, i, mass });
            }
        }
    }
    let heaviest = peaks.iter().map(|p| p.mass).fold(0.0, f64::max);
    if heaviest <= 0.0 {
        return Err(Error::EmptyAlphabet);
    }
    let cut = opts.theta * heaviest;
    peaks.retain(|p| p.mass >= cut);

    // single-linkage clusters of nearby peaks
    let mut parent: Vec<usize> = (0..peaks.len()).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for a in 0..peaks.len() {
        for b in (a + 1)..peaks.len() {
            let dr = peaks[a].r.abs_diff(peaks[b].r);
            let di = peaks[a].i.abs_diff(peaks[b].i);
            if dr.max(di) <= opts.merge_bins {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[rb] = ra;
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; peaks.len()];
    for a in 0..peaks.len() {
        let root = find(&mut parent, a);
        if slot[root] == usize::MAX {
            slot[root] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[slot[root]].push(a);
    }
    clusters.sort_by(|a, b| {
        let ma: f64 = a.iter().map(|&k| peaks[k].mass).sum();
        let mb: f64 = b.iter().map(|&k| peaks[k].mass).sum();
        mb.total_cmp(&ma)
    });

    let mut claimed = DMatrix::<bool>::from_element(nb, nb, false);
    let mut points = Vec::with_capacity(clusters.len());
    let mut weights = Vec::with_capacity(clusters.len());
    for members in clusters {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut mass = 0.0;
        let mut peak_acc = Complex64::new(0.0, 0.0);
        let mut peak_mass = 0.0;
        for &k in &members {
            let p = &peaks[k];
            let w = dist[(p.r, p.i)];
            peak_acc += grid.center_point(p.r, p.i) * w;
            peak_mass += w;
            for ii in window(p.i, nb) {
                for rr in window(p.r, nb) {
                    if claimed[(rr, ii)] {
                        continue;
                    }
                    claimed[(rr, ii)] = true;
                    let v = dist[(rr, ii)];
                    acc += grid.center_point(rr, ii) * v;
                    mass += v;
                }
            }
        }
        let point = if opts.refine && mass > 0.0 {
            acc / mass
        } else {
            peak_acc / peak_mass
        };
        points.push(point);
        weights.push(mass);
    }
    Ok(Alphabet { points, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> QuantGrid {
        QuantGrid::new(16, 1.6).unwrap()
    }

    #[test]
    fn two_isolated_peaks() {
        let g = grid();
        let mut d = DMatrix::<f64>::zeros(16, 16);
        d[(2, 8)] = 0.5;
        d[(13, 8)] = 0.5;
        let a = extract_alphabet(&d, &g, &PeakOptions::default()).unwrap();
        assert_eq!(a.len(), 2);
        let mut re: Vec<f64> = a.points.iter().map(|p| p.re).collect();
        re.sort_by(f64::total_cmp);
        assert_eq!(re, vec![g.center(2), g.center(13)]);
        assert!(a.points.iter().all(|p| p.im == g.center(8)));
    }

    #[test]
    fn adjacent_bins_merge() {
        let g = grid();
        let mut d = DMatrix::<f64>::zeros(16, 16);
        d[(5, 5)] = 0.5;
        d[(6, 5)] = 0.5;
        let a = extract_alphabet(&d, &g, &PeakOptions::default()).unwrap();
        assert_eq!(a.len(), 1);
        let mid = 0.5 * (g.center(5) + g.center(6));
        assert!((a.points[0].re - mid).abs() < 1e-12);
        assert!((a.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_peak_below_threshold() {
        let g = grid();
        let mut d = DMatrix::<f64>::zeros(16, 16);
        d[(2, 2)] = 0.5;
        d[(12, 12)] = 0.475;
        d[(7, 13)] = 0.025; // 0.05 of the max
        let a = extract_alphabet(&d, &g, &PeakOptions::default()).unwrap();
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn empty_distribution_errors() {
        let d = DMatrix::<f64>::zeros(16, 16);
        assert_eq!(
            extract_alphabet(&d, &grid(), &PeakOptions::default()),
            Err(Error::EmptyAlphabet)
        );
    }

    #[test]
    fn refined_point_is_window_centroid() {
        let g = grid();
        let mut d = DMatrix::<f64>::zeros(16, 16);
        d[(8, 8)] = 0.6;
        d[(9, 8)] = 0.4;
        let opts = PeakOptions {
            refine: true,
            ..Default::default()
        };
        let a = extract_alphabet(&d, &g, &opts).unwrap();
        assert_eq!(a.len(), 1);
        let expected = 0.6 * g.center(8) + 0.4 * g.center(9);
        assert!((a.points[0].re - expected).abs() < 1e-12);
    }
}
