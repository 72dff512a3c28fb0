//! Periodic cell, odd regular grid and the reduced frequency lattice.
//!
//! The cell is `Y = [-Y_1, Y_1] x ... x [-Y_d, Y_d]`, discretized by `N_alpha`
//! points per axis with spacing `h_alpha = 2 Y_alpha / N_alpha`. Only odd
//! `N_alpha` are accepted, which makes the grid symmetric with respect to the
//! origin: grid points are `x^k = (k_alpha h_alpha)` for `k` in the reduced
//! lattice `-N_alpha/2 <= k_alpha < N_alpha/2`.
//!
//! # Storage order
//!
//! Every grid-shaped array in this crate (grid values and Fourier
//! coefficients alike) is stored row-major over the axes in declared order,
//! last axis fastest. Along each axis the centered index `k` is stored at slot
//! `k mod N` (the usual FFT layout): slot `0` holds `k = 0`, slots
//! `1..=(N-1)/2` hold the positive indices and the remaining slots hold
//! `-(N-1)/2..=-1` in increasing order. [`slot_to_index`] and
//! [`index_to_slot`] implement this bijection.

use crate::error::{Error, Result};

/// Centered lattice index stored at `slot` of an axis of length `n`.
#[inline]
pub fn slot_to_index(slot: usize, n: usize) -> i64 {
    if slot <= (n - 1) / 2 {
        slot as i64
    } else {
        slot as i64 - n as i64
    }
}

/// Storage slot of the (possibly unreduced) index `k` on an axis of length `n`.
#[inline]
pub fn index_to_slot(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// A multi-index `k` of the frequency lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FreqIndex(pub Vec<i64>);

impl FreqIndex {
    pub fn new(k: impl Into<Vec<i64>>) -> Self {
        FreqIndex(k.into())
    }

    pub fn zero(dim: usize) -> Self {
        FreqIndex(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }

    pub fn neg(&self) -> Self {
        FreqIndex(self.0.iter().map(|k| -k).collect())
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for FreqIndex {
    fn from(k: Vec<i64>) -> Self {
        FreqIndex(k)
    }
}

/// Geometry of the periodic cell and its odd regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    half_periods: Vec<f64>,
    shape: Vec<usize>,
    spacings: Vec<f64>,
    total: usize,
}

impl GridSpec {
    /// Builds a grid; fails unless every `N_alpha` is odd and every
    /// `Y_alpha` is positive and finite.
    pub fn new(half_periods: &[f64], shape: &[usize]) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Domain("grid dimension must be at least 1".into()));
        }
        if half_periods.len() != shape.len() {
            return Err(Error::Domain(format!(
                "{} half-periods given for a {}-dimensional grid",
                half_periods.len(),
                shape.len()
            )));
        }
        for (axis, &n) in shape.iter().enumerate() {
            if n == 0 || n % 2 == 0 {
                return Err(Error::EvenGrid { axis, n });
            }
        }
        for (axis, &y) in half_periods.iter().enumerate() {
            if !(y.is_finite() && y > 0.0) {
                return Err(Error::Domain(format!(
                    "half-period along axis {axis} must be positive and finite, got {y}"
                )));
            }
        }
        let spacings = half_periods
            .iter()
            .zip(shape)
            .map(|(&y, &n)| 2.0 * y / n as f64)
            .collect();
        Ok(GridSpec {
            half_periods: half_periods.to_vec(),
            shape: shape.to_vec(),
            spacings,
            total: shape.iter().product(),
        })
    }

    /// Grid on the cell `[-1, 1]^d`.
    pub fn unit(shape: &[usize]) -> Result<Self> {
        Self::new(&vec![1.0; shape.len()], shape)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn half_periods(&self) -> &[f64] {
        &self.half_periods
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    /// Number of grid points `|N|`.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Smallest spacing `c_h`.
    pub fn min_spacing(&self) -> f64 {
        self.spacings.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest spacing `C_h`; the discretization parameter of all rates.
    pub fn max_spacing(&self) -> f64 {
        self.spacings.iter().copied().fold(0.0, f64::max)
    }

    /// `rho_h = C_h / c_h`.
    pub fn spacing_ratio(&self) -> f64 {
        self.max_spacing() / self.min_spacing()
    }

    /// Whether `k` lies in the reduced lattice of this grid.
    pub fn contains(&self, k: &FreqIndex) -> bool {
        k.dim() == self.dim()
            && k.0.iter().zip(&self.shape).all(|(&k, &n)| {
                let half = (n as i64 - 1) / 2;
                (-half..=half).contains(&k)
            })
    }

    fn check_member(&self, k: &FreqIndex) -> Result<()> {
        if self.contains(k) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "index {:?} is outside the reduced lattice of shape {:?}",
                k.0, self.shape
            )))
        }
    }

    /// Position of `k` in the flat storage order.
    pub fn linear_index(&self, k: &FreqIndex) -> Result<usize> {
        self.check_member(k)?;
        Ok(self.linear_index_unchecked(k.as_slice()))
    }

    /// Flat position of an index that may be unreduced; components are
    /// wrapped modulo `N_alpha`.
    pub fn linear_index_unchecked(&self, k: &[i64]) -> usize {
        k.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&k, &n)| acc * n + index_to_slot(k, n))
    }

    /// Inverse of [`GridSpec::linear_index`].
    pub fn freq_index(&self, mut linear: usize) -> FreqIndex {
        let mut k = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            let n = self.shape[axis];
            k[axis] = slot_to_index(linear % n, n);
            linear /= n;
        }
        FreqIndex(k)
    }

    /// Grid point `x^k = (k_alpha h_alpha)_alpha`.
    pub fn grid_point(&self, k: &FreqIndex) -> Result<Vec<f64>> {
        self.check_member(k)?;
        Ok(k.0.iter().zip(&self.spacings).map(|(&k, &h)| k as f64 * h).collect())
    }

    /// Frequency vector `xi(k) = (k_alpha / Y_alpha)_alpha`; defined for any
    /// integer vector, reduced or not.
    pub fn frequency(&self, k: &FreqIndex) -> Vec<f64> {
        k.0.iter().zip(&self.half_periods).map(|(&k, &y)| k as f64 / y).collect()
    }

    /// Like [`GridSpec::frequency`] but returns the all-ones vector at `k = 0`.
    /// Used as the weight of the mean mode in Sobolev norms.
    pub fn underlined_frequency(&self, k: &FreqIndex) -> Vec<f64> {
        if k.is_zero() {
            vec![1.0; self.dim()]
        } else {
            self.frequency(k)
        }
    }

    /// Centered lattice index per storage slot along `axis`.
    pub fn axis_indices(&self, axis: usize) -> Vec<i64> {
        let n = self.shape[axis];
        (0..n).map(|s| slot_to_index(s, n)).collect()
    }

    /// `xi_alpha` per storage slot along `axis`.
    pub fn axis_frequencies(&self, axis: usize) -> Vec<f64> {
        let y = self.half_periods[axis];
        self.axis_indices(axis).into_iter().map(|k| k as f64 / y).collect()
    }

    /// Enumerates the reduced lattice in storage order.
    pub fn iter_lattice(&self) -> impl Iterator<Item = FreqIndex> + '_ {
        (0..self.total).map(move |i| self.freq_index(i))
    }

    /// Grid points in storage order, flattened point-major (`d` reals each).
    pub fn grid_points(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(self.total * d);
        for k in self.iter_lattice() {
            out.extend(k.0.iter().zip(&self.spacings).map(|(&k, &h)| k as f64 * h));
        }
        out
    }

    /// Same half-periods with a different shape.
    pub fn with_shape(&self, shape: &[usize]) -> Result<Self> {
        Self::new(&self.half_periods, shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn rejects_even_shapes() {
        assert!(matches!(
            GridSpec::unit(&[3, 4]),
            Err(Error::EvenGrid { axis: 1, n: 4 })
        ));
        assert!(GridSpec::unit(&[0]).is_err());
        assert!(GridSpec::unit(&[]).is_err());
        assert!(GridSpec::new(&[1.0, -1.0], &[3, 3]).is_err());
        assert!(GridSpec::new(&[1.0], &[3, 3]).is_err());
    }

    #[test]
    fn grid_points() {
        let g = GridSpec::unit(&[3]).unwrap();
        assert_eq!(g.grid_point(&FreqIndex::new([0])).unwrap(), vec![0.0]);
        assert_eq!(g.grid_point(&FreqIndex::new([1])).unwrap(), vec![2.0 / 3.0]);

        let g = GridSpec::new(&[1.0, 2.0], &[3, 5]).unwrap();
        let x = g.grid_point(&FreqIndex::new([-1, 2])).unwrap();
        assert_eq!(x, vec![-2.0 / 3.0, 8.0 / 5.0]);

        assert!(g.grid_point(&FreqIndex::new([2, 0])).is_err());
        assert!(g.grid_point(&FreqIndex::new([0, 3])).is_err());
        assert!(g.grid_point(&FreqIndex::new([0])).is_err());
    }

    #[test]
    fn frequencies() {
        let g = GridSpec::unit(&[3, 3]).unwrap();
        assert_eq!(g.frequency(&FreqIndex::new([1, 0])), vec![1.0, 0.0]);
        assert_eq!(g.underlined_frequency(&FreqIndex::new([0, 0])), vec![1.0, 1.0]);
        assert_eq!(g.underlined_frequency(&FreqIndex::new([0, 1])), vec![0.0, 1.0]);

        let g = GridSpec::new(&[2.0, 1.0], &[3, 3]).unwrap();
        assert_eq!(g.frequency(&FreqIndex::new([1, 3])), vec![0.5, 3.0]);
    }

    #[test]
    fn spacing_statistics() {
        let g = GridSpec::new(&[1.0, 3.0], &[5, 5]).unwrap();
        assert_eq!(g.min_spacing(), 0.4);
        assert_eq!(g.max_spacing(), 1.2);
        assert!((g.spacing_ratio() - 3.0).abs() < 1e-15);
        for (n, y) in [(3usize, 1.0f64), (5, 2.0), (81, 1.0), (243, 0.5), (255, 1.0), (99, 7.0)] {
            let g = GridSpec::new(&[y], &[n]).unwrap();
            assert_eq!(g.spacings()[0] * n as f64, 2.0 * y);
        }
    }

    #[test]
    fn lattice_order() {
        let g = GridSpec::unit(&[3]).unwrap();
        let ks: Vec<i64> = g.iter_lattice().map(|k| k.0[0]).collect();
        assert_eq!(ks, vec![0, 1, -1]);

        let g = GridSpec::unit(&[5]).unwrap();
        let mut ks: Vec<i64> = g.iter_lattice().map(|k| k.0[0]).collect();
        assert_eq!(ks, vec![0, 1, 2, -2, -1]);
        ks.sort();
        assert_eq!(ks, vec![-2, -1, 0, 1, 2]);

        let g = GridSpec::unit(&[3, 3]).unwrap();
        let all: HashSet<FreqIndex> = g.iter_lattice().collect();
        assert_eq!(all.len(), 9);
        // last axis fastest
        let first: Vec<FreqIndex> = g.iter_lattice().take(3).collect();
        assert_eq!(first[1], FreqIndex::new([0, 1]));
    }

    #[test]
    fn linear_index_round_trip() {
        let g = GridSpec::unit(&[3, 5, 7]).unwrap();
        for (i, k) in g.iter_lattice().enumerate() {
            assert!(g.contains(&k));
            assert_eq!(g.linear_index(&k).unwrap(), i);
        }
        assert_eq!(g.linear_index_unchecked(&[3, 5, 7]), 0);
    }

    #[test]
    fn lattice_symmetry() {
        for shape in [vec![1], vec![7], vec![3, 5], vec![5, 3, 3]] {
            let g = GridSpec::unit(&shape).unwrap();
            assert_eq!(g.iter_lattice().count(), g.total());
            for k in g.iter_lattice() {
                let nk = k.neg();
                assert!(g.contains(&nk));
                let x = g.grid_point(&k).unwrap();
                let nx = g.grid_point(&nk).unwrap();
                assert!(x.iter().zip(&nx).all(|(a, b)| *a == -*b));
            }
        }
    }
}
