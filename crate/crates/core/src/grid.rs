//! Structured node-collocated grids on rectangular domains.
//!
//! Nodes are laid out row-major with `x` varying fastest: the node at
//! integer coordinates `(i, j)` lives at flat index `j * nx + i` and at
//! physical position `(i * hx, j * hy)`. All fields in this crate share
//! this layout.

use serde::{Deserialize, Serialize};

/// Uniform rectangular grid: `nx x ny` nodes spanning `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid {
    /// A grid needs at least three nodes per axis so that one-sided
    /// boundary stencils have enough support.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, GridError> {
        if nx < 3 || ny < 3 {
            return Err(GridError::TooFewNodes { nx, ny });
        }
        if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return Err(GridError::BadExtent { lx, ly });
        }
        Ok(Grid { nx, ny, lx, ly })
    }

    /// Square grid on `[0, l]^2`.
    pub fn square(n: usize, l: f64) -> Result<Self, GridError> {
        Grid::new(n, n, l, l)
    }

    pub fn hx(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx(), j as f64 * self.hy())
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    /// Trapezoidal quadrature weight per node: `hx * hy` in the interior,
    /// halved on edges, quartered at corners. Sums to `lx * ly`.
    pub fn lumped_weights(&self) -> Vec<f64> {
        let (hx, hy) = (self.hx(), self.hy());
        let mut w = vec![0.0; self.len()];
        for j in 0..self.ny {
            let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
            for i in 0..self.nx {
                let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
                w[self.idx(i, j)] = hx * hy * wx * wy;
            }
        }
        w
    }

    /// Mask of nodes further than `margin` (physical units) from the
    /// domain boundary. A floor of two grid cells is always applied so
    /// the masked set stays clear of boundary stencils and of elements
    /// touching constrained nodes.
    pub fn interior_mask(&self, margin: f64) -> NodeMask {
        let m = margin.max(1.5 * self.hx().max(self.hy()));
        self.mask_where(|x, y| {
            x > m && y > m && x < self.lx - m && y < self.ly - m
        })
    }

    pub fn mask_where<F: Fn(f64, f64) -> bool>(&self, pred: F) -> NodeMask {
        let mut inside = vec![false; self.len()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let (x, y) = self.coords(i, j);
                inside[self.idx(i, j)] = pred(x, y);
            }
        }
        NodeMask { nx: self.nx, ny: self.ny, inside }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("grid needs at least 3 nodes per axis, got {nx} x {ny}")]
    TooFewNodes { nx: usize, ny: usize },
    #[error("grid extents must be positive and finite, got {lx} x {ly}")]
    BadExtent { lx: f64, ly: f64 },
}

/// Subset of grid nodes, used for interior masks, noise regions and
/// error regions.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMask {
    pub nx: usize,
    pub ny: usize,
    inside: Vec<bool>,
}

impl NodeMask {
    pub fn full(grid: &Grid) -> Self {
        NodeMask { nx: grid.nx, ny: grid.ny, inside: vec![true; grid.len()] }
    }

    /// Mask from an index predicate over `(i, j)` node coordinates.
    pub fn from_fn<F: Fn(usize, usize) -> bool>(grid: &Grid, pred: F) -> Self {
        let mut inside = vec![false; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                inside[grid.idx(i, j)] = pred(i, j);
            }
        }
        NodeMask { nx: grid.nx, ny: grid.ny, inside }
    }

    pub fn empty(grid: &Grid) -> Self {
        NodeMask { nx: grid.nx, ny: grid.ny, inside: vec![false; grid.len()] }
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.inside[idx]
    }

    pub fn len(&self) -> usize {
        self.inside.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inside.is_empty()
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|b| **b).count()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.inside.iter().enumerate().filter(|(_, b)| **b).map(|(k, _)| k)
    }

    pub fn intersect(&self, other: &NodeMask) -> NodeMask {
        assert_eq!((self.nx, self.ny), (other.nx, other.ny));
        NodeMask {
            nx: self.nx,
            ny: self.ny,
            inside: self
                .inside
                .iter()
                .zip(&other.inside)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }
}

/// Role of each node in the boundary-value problem. Every boundary node
/// carries exactly one of the two boundary labels; where a node sits on
/// the closure of both parts, the Dirichlet label wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    Interior,
    Dirichlet,
    /// Traction-free boundary; imposed weakly, so it carries no data.
    Traction,
}

/// Dirichlet/traction split of the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPartition {
    roles: Vec<NodeRole>,
}

impl BoundaryPartition {
    /// Dirichlet on the bottom edge (y = 0) including its corners,
    /// traction-free on the remaining three sides.
    pub fn bottom_dirichlet(grid: &Grid) -> Self {
        Self::from_edges(grid, [true, false, false, false])
    }

    /// Dirichlet on the entire boundary.
    pub fn all_dirichlet(grid: &Grid) -> Self {
        Self::from_edges(grid, [true, true, true, true])
    }

    /// Edge order: bottom, top, left, right. Corners shared between a
    /// Dirichlet edge and a traction edge become Dirichlet.
    pub fn from_edges(grid: &Grid, dirichlet: [bool; 4]) -> Self {
        let mut roles = vec![NodeRole::Interior; grid.len()];
        let (nx, ny) = (grid.nx, grid.ny);
        for j in 0..ny {
            for i in 0..nx {
                if !grid.is_boundary(i, j) {
                    continue;
                }
                let on = [j == 0, j == ny - 1, i == 0, i == nx - 1];
                let is_dirichlet = on.iter().zip(&dirichlet).any(|(o, d)| *o && *d);
                roles[grid.idx(i, j)] = if is_dirichlet {
                    NodeRole::Dirichlet
                } else {
                    NodeRole::Traction
                };
            }
        }
        BoundaryPartition { roles }
    }

    #[inline]
    pub fn role(&self, idx: usize) -> NodeRole {
        self.roles[idx]
    }

    pub fn dirichlet_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == NodeRole::Dirichlet)
            .map(|(k, _)| k)
    }

    pub fn has_traction(&self) -> bool {
        self.roles.iter().any(|r| *r == NodeRole::Traction)
    }

    /// Every boundary node must carry exactly one boundary label and no
    /// interior node may carry one.
    pub fn is_consistent(&self, grid: &Grid) -> bool {
        if self.roles.len() != grid.len() {
            return false;
        }
        (0..grid.ny).all(|j| {
            (0..grid.nx).all(|i| {
                let boundary = grid.is_boundary(i, j);
                let role = self.roles[grid.idx(i, j)];
                boundary == (role != NodeRole::Interior)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_area() {
        let g = Grid::new(9, 5, 10.0, 4.0).unwrap();
        let total: f64 = g.lumped_weights().iter().sum();
        assert!((total - 40.0).abs() < 1e-12);
    }

    #[test]
    fn bottom_partition_labels() {
        let g = Grid::square(5, 1.0).unwrap();
        let p = BoundaryPartition::bottom_dirichlet(&g);
        assert!(p.is_consistent(&g));
        assert_eq!(p.role(g.idx(2, 0)), NodeRole::Dirichlet);
        assert_eq!(p.role(g.idx(0, 0)), NodeRole::Dirichlet);
        assert_eq!(p.role(g.idx(0, 1)), NodeRole::Traction);
        assert_eq!(p.role(g.idx(2, 4)), NodeRole::Traction);
        assert_eq!(p.role(g.idx(2, 2)), NodeRole::Interior);
        assert_eq!(p.dirichlet_indices().count(), 5);
    }

    #[test]
    fn interior_mask_keeps_margin() {
        let g = Grid::square(11, 10.0).unwrap();
        let m = g.interior_mask(2.0);
        assert!(!m.contains(g.idx(1, 5)));
        assert!(m.contains(g.idx(5, 5)));
        assert_eq!(m.count(), 5 * 5);
    }
}
