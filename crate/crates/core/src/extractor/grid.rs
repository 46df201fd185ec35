use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Headroom applied to the largest coordinate magnitude when sizing a grid.
pub const GRID_HEADROOM: f64 = 1.1;

/// Square quantization grid over `[-d, d]^2` with `bins` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantGrid {
    bins: usize,
    half_width: f64,
    delta: f64,
}

impl QuantGrid {
    pub fn new(bins: usize, half_width: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::Config("grid needs at least one bin per axis".into()));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::DegenerateGrid);
        }
        Ok(Self {
            bins,
            half_width,
            delta: 2.0 * half_width / bins as f64,
        })
    }

    /// Sizes the grid so every sample of `sequence` lands inside it.
    pub fn for_sequence(sequence: &[Complex64], bins: usize) -> Result<Self> {
        if sequence.is_empty() {
            return Err(Error::EmptyInput("sequence"));
        }
        let max = sequence
            .iter()
            .fold(0.0f64, |acc, z| acc.max(z.re.abs()).max(z.im.abs()));
        if max == 0.0 {
            return Err(Error::DegenerateGrid);
        }
        Self::new(bins, GRID_HEADROOM * max)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Center of bin `k` along either axis.
    pub fn center(&self, k: usize) -> f64 {
        -self.half_width + (k as f64 + 0.5) * self.delta
    }

    pub fn center_point(&self, re_bin: usize, im_bin: usize) -> Complex64 {
        Complex64::new(self.center(re_bin), self.center(im_bin))
    }

    /// Bin index of a coordinate, or `None` when it falls outside the grid.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let pos = (x + self.half_width) / self.delta;
        if !(pos >= 0.0) {
            return None;
        }
        let k = pos.floor() as usize;
        if k < self.bins {
            Some(k)
        } else if pos == self.bins as f64 {
            // right edge is closed
            Some(self.bins - 1)
        } else {
            None
        }
    }
}

/// Quantized empirical distribution of a complex sequence.
///
/// `weights[(r, i)]` holds the fraction of samples whose real part falls in
/// bin `r` and imaginary part in bin `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    pub grid: QuantGrid,
    pub weights: DMatrix<f64>,
    /// Samples that fell outside the grid and were dropped.
    pub dropped: usize,
    pub total: usize,
}

impl EmpiricalDistribution {
    pub fn dropped_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.dropped as f64 / self.total as f64
        }
    }

    pub fn mass(&self) -> f64 {
        self.weights.sum()
    }
}

pub fn empirical_distribution(sequence: &[Complex64], grid: &QuantGrid) -> EmpiricalDistribution {
    let nb = grid.bins();
    let mut counts = DMatrix::<u32>::zeros(nb, nb);
    let mut dropped = 0usize;
    for z in sequence {
        match (grid.bin_of(z.re), grid.bin_of(z.im)) {
            (Some(r), Some(i)) => counts[(r, i)] += 1,
            _ => dropped += 1,
        }
    }
    let n = sequence.len().max(1) as f64;
    let weights = counts.map(|c| c as f64 / n);
    EmpiricalDistribution {
        grid: *grid,
        weights,
        dropped,
        total: sequence.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpsk_grid_formula() {
        let seq = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let g = QuantGrid::for_sequence(&seq, 64).unwrap();
        assert!((g.half_width() - 1.1).abs() < 1e-15);
        assert!((g.delta() - 2.2 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn zero_sequence_is_degenerate() {
        let seq = [Complex64::new(0.0, 0.0); 5];
        assert_eq!(QuantGrid::for_sequence(&seq, 64), Err(Error::DegenerateGrid));
        assert!(matches!(
            QuantGrid::for_sequence(&[], 8),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn grid_scales_with_sequence() {
        let seq = [Complex64::new(0.3, -0.7), Complex64::new(-0.2, 0.1)];
        let g1 = QuantGrid::for_sequence(&seq, 32).unwrap();
        let doubled: Vec<_> = seq.iter().map(|z| z * 2.0).collect();
        let g2 = QuantGrid::for_sequence(&doubled, 32).unwrap();
        assert!((g2.half_width() - 2.0 * g1.half_width()).abs() < 1e-14);
        assert!((g2.delta() - 2.0 * g1.delta()).abs() < 1e-14);
    }

    #[test]
    fn point_mass_histogram() {
        let g = QuantGrid::new(16, 1.0).unwrap();
        let p = g.center_point(3, 11);
        let seq = vec![p; 40];
        let d = empirical_distribution(&seq, &g);
        assert_eq!(d.weights[(3, 11)], 1.0);
        assert!((d.mass() - 1.0).abs() < 1e-12);
        assert_eq!(d.dropped, 0);
    }

    #[test]
    fn out_of_range_samples_are_dropped() {
        let g = QuantGrid::new(4, 1.0).unwrap();
        let seq = [
            Complex64::new(0.1, 0.1),
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, -1.5),
            Complex64::new(1.0, -1.0),
        ];
        let d = empirical_distribution(&seq, &g);
        assert_eq!(d.dropped, 2);
        assert!((d.mass() - 0.5).abs() < 1e-12);
        assert!((d.dropped_fraction() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn edges_map_inside() {
        let g = QuantGrid::new(8, 2.0).unwrap();
        assert_eq!(g.bin_of(-2.0), Some(0));
        assert_eq!(g.bin_of(2.0), Some(7));
        assert_eq!(g.bin_of(2.0 + 1e-9), None);
        assert_eq!(g.bin_of(f64::NAN), None);
    }
}
