//! Periodic hypercubic lattice geometry and site enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A periodic lattice in `d` dimensions with `L` sites per axis and spacing `a`.
///
/// Sites are enumerated row-major with the first coordinate slowest, so for
/// `d = 2, L = 4` the coordinates `(1, 2)` map to flat index `6`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    dimension: usize,
    sites_per_axis: usize,
    spacing: f64,
}

impl LatticeSpec {
    pub fn new(dimension: usize, sites_per_axis: usize, spacing: f64) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::InvalidLattice(format!(
                "dimension must be 1, 2 or 3, got {dimension}"
            )));
        }
        if sites_per_axis < 2 {
            return Err(Error::InvalidLattice(format!(
                "need at least 2 sites per axis, got {sites_per_axis}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidLattice(format!(
                "spacing must be positive and finite, got {spacing}"
            )));
        }
        Ok(Self {
            dimension,
            sites_per_axis,
            spacing,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn sites_per_axis(&self) -> usize {
        self.sites_per_axis
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of sites, `L^d`.
    pub fn site_count(&self) -> usize {
        self.sites_per_axis.pow(self.dimension as u32)
    }

    /// Flat index of a coordinate tuple (row-major, first coordinate slowest).
    pub fn site_index(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: coords.len(),
            });
        }
        let mut index = 0;
        for (axis, &c) in coords.iter().enumerate() {
            if c >= self.sites_per_axis {
                return Err(Error::CoordinateOutOfRange {
                    coord: c,
                    axis,
                    len: self.sites_per_axis,
                });
            }
            index = index * self.sites_per_axis + c;
        }
        Ok(index)
    }

    /// Coordinate tuple of a flat index; inverse of [`site_index`](Self::site_index).
    pub fn index_site(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.site_count() {
            return Err(Error::SiteOutOfRange {
                index,
                count: self.site_count(),
            });
        }
        let mut rem = index;
        let mut coords = vec![0usize; self.dimension];
        for axis in (0..self.dimension).rev() {
            coords[axis] = rem % self.sites_per_axis;
            rem /= self.sites_per_axis;
        }
        Ok(coords)
    }

    /// Neighbor of `site` one step along `axis` in direction `dir` (+1 or -1),
    /// with periodic wrap.
    pub fn neighbor(&self, site: usize, axis: usize, dir: i8) -> usize {
        debug_assert!(axis < self.dimension);
        let l = self.sites_per_axis;
        // stride of `axis` in the row-major enumeration
        let stride = l.pow((self.dimension - 1 - axis) as u32);
        let coord = (site / stride) % l;
        let next = match dir {
            1 => (coord + 1) % l,
            -1 => (coord + l - 1) % l,
            _ => panic!("direction must be +1 or -1"),
        };
        site - coord * stride + next * stride
    }

    /// Physical position of a site, `coords * a`.
    pub fn position(&self, site: usize) -> Vec<f64> {
        self.index_site(site)
            .expect("site in range")
            .into_iter()
            .map(|c| c as f64 * self.spacing)
            .collect()
    }
}
