//! Planar convex hulls of complex sequences.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Points closer than this are treated as one before building a hull.
pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HullResult {
    /// Indices into the input, counter-clockwise. A collinear input keeps
    /// only its two extreme points; a single distinct point keeps one.
    pub vertex_indices: Vec<usize>,
    /// Length of the closed cycle through the vertices.
    pub perimeter: f64,
}

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Convex hull by Andrew's monotone chain; real parts are the abscissae.
pub fn convex_hull(points: &[Complex64]) -> Result<HullResult> {
    if points.is_empty() {
        return Err(Error::EmptyInput("points"));
    }
    if let Some(bad) = points.iter().position(|p| !(p.re.is_finite() && p.im.is_finite())) {
        return Err(Error::Dimension(format!("point {bad} is not finite")));
    }

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points[a], points[b]);
        pa.re
            .total_cmp(&pb.re)
            .then(pa.im.total_cmp(&pb.im))
            .then(a.cmp(&b))
    });
    // drop near-coincident points, keeping the lowest index of each group
    let mut uniq: Vec<usize> = Vec::with_capacity(order.len());
    for &i in &order {
        match uniq.iter().rev().take_while(|&&j| points[i].re - points[j].re <= DEDUP_TOL).position(|&j| (points[i] - points[j]).norm() <= DEDUP_TOL) {
            Some(pos) => {
                let slot = uniq.len() - 1 - pos;
                if i < uniq[slot] {
                    uniq[slot] = i;
                }
            }
            None => uniq.push(i),
        }
    }

    if uniq.len() == 1 {
        return Ok(HullResult {
            vertex_indices: uniq,
            perimeter: 0.0,
        });
    }

    let mut hull: Vec<usize> = Vec::with_capacity(2 * uniq.len());
    for &i in &uniq {
        while hull.len() >= 2
            && cross(points[hull[hull.len() - 2]], points[hull[hull.len() - 1]], points[i]) <= 0.0
        {
            hull.pop();
        }
        hull.push(i);
    }
    let lower = hull.len() + 1;
    for &i in uniq.iter().rev().skip(1) {
        while hull.len() >= lower
            && cross(points[hull[hull.len() - 2]], points[hull[hull.len() - 1]], points[i]) <= 0.0
        {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();

    let perimeter = cycle_length(points, &hull);
    Ok(HullResult {
        vertex_indices: hull,
        perimeter,
    })
}

fn cycle_length(points: &[Complex64], cycle: &[usize]) -> f64 {
    if cycle.len() < 2 {
        return 0.0;
    }
    cycle
        .iter()
        .zip(cycle.iter().cycle().skip(1))
        .map(|(&a, &b)| (points[a] - points[b]).norm())
        .sum()
}

/// Convex perimeter of a point set.
pub fn perimeter_of(points: &[Complex64]) -> Result<f64> {
    convex_hull(points).map(|h| h.perimeter)
}

/// For every target point, the index of the nearest sample in `samples`
/// (lowest index on ties).
pub fn hull_support_map(targets: &[Complex64], samples: &[Complex64]) -> Vec<usize> {
    targets
        .iter()
        .map(|t| {
            let mut best = (f64::INFINITY, 0usize);
            for (k, s) in samples.iter().enumerate() {
                let d = (s - t).norm_sqr();
                if d < best.0 {
                    best = (d, k);
                }
            }
            best.1
        })
        .collect()
}
