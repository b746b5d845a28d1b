//! The truncated epsilon-grid: site indexing, jump directions, and the
//! tie-breaking total order used by `argmax*`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::sync::Arc;

/// Geometry of the truncated grid `(eps Z)^d ∩ [-L, L]^d`.
///
/// Jumps that would leave the box are suppressed (reflecting truncation),
/// which preserves particle number and density mass exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    epsilon: f64,
    dim: usize,
    half_width: f64,
    /// `half_width / epsilon`, the coordinate bound.
    radius: i64,
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.epsilon == other.epsilon && self.dim == other.dim && self.radius == other.radius
    }
}
impl Eq for GridSpec {}

impl GridSpec {
    /// `epsilon` in (0, 1); `half_width / epsilon` must be an integer so the
    /// box faces align with sites.
    pub fn new(epsilon: f64, dim: usize, half_width: f64) -> Result<Arc<Self>> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dim must be positive".into()));
        }
        if half_width <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "half_width must be positive, got {half_width}"
            )));
        }
        let ratio = half_width / epsilon;
        let radius = ratio.round();
        if (ratio - radius).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "half_width/epsilon = {ratio} is not an integer"
            )));
        }
        let radius = radius as i64;
        let side = 2 * radius + 1;
        // Keep the site count addressable; per-axis sides beyond u32 are
        // far outside anything this engine is meant for anyway.
        let mut total: u128 = 1;
        for _ in 0..dim {
            total = total.saturating_mul(side as u128);
        }
        if total > u32::MAX as u128 {
            return Err(Error::InvalidParameter(format!(
                "grid has {total} sites, too many to index"
            )));
        }
        Ok(Arc::new(GridSpec { epsilon, dim, half_width, radius }))
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Coordinate bound `L / eps`; coordinates live in `[-radius, radius]`.
    pub fn radius(&self) -> i64 {
        self.radius
    }

    /// Sites per axis, `2 L / eps + 1`.
    pub fn side(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    /// Total number of sites, `side^dim`.
    pub fn num_sites(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    /// Number of jump directions, `2 d`.
    pub fn num_directions(&self) -> usize {
        2 * self.dim
    }

    /// Linear index of a site. The mixed-radix encoding (first coordinate
    /// most significant) makes index order coincide with the lexicographic
    /// total order `<=_to`.
    pub fn index_of(&self, site: &SiteId) -> Result<usize> {
        if site.coords.len() != self.dim {
            return Err(Error::DimensionMismatch(site.coords.len(), self.dim));
        }
        let side = self.side();
        let mut idx = 0usize;
        for &c in &site.coords {
            if c < -self.radius || c > self.radius {
                return Err(Error::InvalidParameter(format!(
                    "coordinate {c} outside [-{r}, {r}]",
                    r = self.radius
                )));
            }
            idx = idx * side + (c + self.radius) as usize;
        }
        Ok(idx)
    }

    /// Inverse of `index_of`.
    pub fn site_at(&self, mut index: usize) -> SiteId {
        let side = self.side();
        let mut coords = vec![0i64; self.dim];
        for slot in coords.iter_mut().rev() {
            *slot = (index % side) as i64 - self.radius;
            index /= side;
        }
        SiteId { coords }
    }

    /// Euclidean position of the site with linear index `index`.
    pub fn position(&self, index: usize) -> Vec<f64> {
        self.site_at(index).coords.iter().map(|&c| c as f64 * self.epsilon).collect()
    }

    /// Neighbor in direction `dir`, or `None` when the step exits the box.
    pub fn neighbor(&self, site: &SiteId, dir: Direction) -> Option<SiteId> {
        let axis = dir.axis(self.dim);
        let step = dir.sign(self.dim);
        let c = site.coords[axis] + step;
        if c < -self.radius || c > self.radius {
            return None;
        }
        let mut coords = site.coords.clone();
        coords[axis] = c;
        Some(SiteId { coords })
    }

    /// Index-level neighbor lookup used by the hot loops.
    pub fn neighbor_index(&self, index: usize, dir: Direction) -> Option<usize> {
        let axis = dir.axis(self.dim);
        let step = dir.sign(self.dim);
        let side = self.side();
        let stride = side.pow((self.dim - 1 - axis) as u32);
        let digit = (index / stride) % side;
        let next = digit as i64 + step;
        if next < 0 || next >= side as i64 {
            return None;
        }
        Some((index as i64 + step * stride as i64) as usize)
    }

    /// True when every direction stays inside the box.
    pub fn is_interior(&self, index: usize) -> bool {
        let side = self.side();
        let mut rest = index;
        for _ in 0..self.dim {
            let digit = rest % side;
            if digit == 0 || digit == side - 1 {
                return false;
            }
            rest /= side;
        }
        true
    }

    pub fn directions(&self) -> impl Iterator<Item = Direction> {
        (0..self.num_directions()).map(Direction)
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> {
        0..self.num_sites()
    }
}

/// A grid site given by its integer coordinates; the point is `eps * coords`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteId {
    pub coords: Vec<i64>,
}

impl SiteId {
    pub fn new(coords: Vec<i64>) -> Self {
        SiteId { coords }
    }

    pub fn origin(dim: usize) -> Self {
        SiteId { coords: vec![0; dim] }
    }
}

/// Lexicographic comparison of coordinate vectors, first coordinate most
/// significant: the concrete total order behind `argmax*` tie-breaking.
pub fn total_order_cmp(a: &SiteId, b: &SiteId) -> Result<Ordering> {
    if a.coords.len() != b.coords.len() {
        return Err(Error::DimensionMismatch(a.coords.len(), b.coords.len()));
    }
    Ok(a.coords.cmp(&b.coords))
}

/// Jump direction, zero-based: `0..d` step `+e_axis`, `d..2d` step `-e_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Direction(pub usize);

impl Direction {
    pub fn axis(self, dim: usize) -> usize {
        if self.0 < dim {
            self.0
        } else {
            self.0 - dim
        }
    }

    pub fn sign(self, dim: usize) -> i64 {
        if self.0 < dim {
            1
        } else {
            -1
        }
    }

    /// The involution `i*` with `k_{i*} = -k_i`.
    pub fn reverse(self, dim: usize) -> Direction {
        if self.0 < dim {
            Direction(self.0 + dim)
        } else {
            Direction(self.0 - dim)
        }
    }

    /// The unit step vector `k_i`.
    pub fn step(self, dim: usize) -> Vec<i64> {
        let mut v = vec![0i64; dim];
        v[self.axis(dim)] = self.sign(dim);
        v
    }
}
