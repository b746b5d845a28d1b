//! Real-valued functions on the grid with cached norms.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use std::sync::{Arc, OnceLock};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// A function on the sites of one grid. Norms are computed lazily and the
/// cache is dropped on any mutable access, so they are always consistent
/// with the values.
#[derive(Debug)]
pub struct GridFunction {
    grid: Arc<GridSpec>,
    values: Vec<f64>,
    norms: OnceLock<Norms>,
}

impl Clone for GridFunction {
    fn clone(&self) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.clone(),
            norms: self.norms.clone(),
        }
    }
}

impl GridFunction {
    pub fn new(grid: Arc<GridSpec>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_sites() {
            return Err(Error::DimensionMismatch(values.len(), grid.num_sites()));
        }
        Ok(GridFunction { grid, values, norms: OnceLock::new() })
    }

    pub fn zeros(grid: Arc<GridSpec>) -> Self {
        let n = grid.num_sites();
        GridFunction { grid, values: vec![0.0; n], norms: OnceLock::new() }
    }

    /// Indicator of a single site.
    pub fn delta(grid: Arc<GridSpec>, site: usize) -> Self {
        let mut f = Self::zeros(grid);
        f.values[site] = 1.0;
        f.norms = OnceLock::new();
        f
    }

    /// Sample a pointwise map `x -> value` at the site positions.
    pub fn from_fn(grid: Arc<GridSpec>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..grid.num_sites()).map(|s| f(&grid.position(s))).collect();
        GridFunction { grid, values, norms: OnceLock::new() }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.norms = OnceLock::new();
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn value(&self, site: usize) -> f64 {
        self.values[site]
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn norms(&self) -> Norms {
        *self.norms.get_or_init(|| {
            let mut l1 = 0.0;
            let mut l2 = 0.0;
            let mut linf = 0.0f64;
            for &v in &self.values {
                l1 += v.abs();
                l2 += v * v;
                linf = linf.max(v.abs());
            }
            Norms { l1, l2: l2.sqrt(), linf }
        })
    }

    pub fn norm_l1(&self) -> f64 {
        self.norms().l1
    }

    pub fn norm_l2(&self) -> f64 {
        self.norms().l2
    }

    pub fn norm_linf(&self) -> f64 {
        self.norms().linf
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Inner product on the grid (plain site sum, no eps^d weight).
    pub fn dot(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    /// Sum of values with Neumaier compensation; used by the conservation
    /// checks where plain summation order would dominate the result.
    pub fn sum_compensated(&self) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for &v in &self.values {
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }

    /// Density-scaled values `eps^-d * f`.
    pub fn density_values(&self) -> Vec<f64> {
        let scale = self.grid.epsilon().powi(-(self.grid.dim() as i32));
        self.values.iter().map(|v| v * scale).collect()
    }
}
