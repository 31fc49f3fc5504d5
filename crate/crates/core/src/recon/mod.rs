//! Modulus recovery from interior displacement data.
//!
//! Four routes into the same unknown pair `(mu, eta_mu)`:
//!
//! * [`algebraic`]: pointwise inversion of the shear wave equation,
//!   cheap and local but blind near strain nodes and interfaces;
//! * [`hybrid`]: a one-step guess that splits the stress into potential
//!   and rotational parts, good at outlining interfaces;
//! * [`descent`]: projected gradient descent on the data misfit with
//!   adjoint-computed gradients, the accurate but iterative route;
//! * [`local`]: the descent loop restricted to a subdomain, using the
//!   measured trace as boundary data so the rest of the domain drops
//!   out of the problem.

pub mod algebraic;
pub mod descent;
pub mod hybrid;
pub mod local;

use crate::field::VectorField;
use crate::grid::{BoundaryPartition, Grid, NodeMask};
use crate::material::MaterialError;
use crate::pde::{shear_sensitivity_density, PdeError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("field grid does not match the problem grid")]
    GridMismatch,
    #[error("direction vector must be nonzero")]
    ZeroDirection,
    #[error("subdomain does not fit the grid or is too small")]
    BadSubdomain,
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Material(#[from] MaterialError),
}

/// Fixed experimental context shared by every solve in a
/// reconstruction: drive frequency, density, boundary split and the
/// discretization knobs.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub omega: f64,
    pub rho: f64,
    pub partition: BoundaryPartition,
    pub stabilization: f64,
    pub solver_tol: f64,
}

impl Experiment {
    pub fn new(omega: f64, rho: f64, partition: BoundaryPartition) -> Self {
        Experiment { omega, rho, partition, stabilization: 0.1, solver_tol: 1e-8 }
    }
}

/// Data misfit `1/2 sum_k w_k |u_k - um_k|^2` with the lumped area
/// weights, both components.
pub fn misfit(u: &VectorField, um: &VectorField) -> Result<f64, ReconError> {
    if u.grid != um.grid {
        return Err(ReconError::GridMismatch);
    }
    let w = u.grid.lumped_weights();
    let mut acc = 0.0;
    for c in 0..2 {
        let (a, b) = (u.comp(c), um.comp(c));
        for k in 0..a.len() {
            acc += w[k] * (a[k] - b[k]).norm_sqr();
        }
    }
    Ok(0.5 * acc)
}

/// Misfit gradient with respect to the nodal parameter pair, zero
/// outside the support mask.
#[derive(Debug, Clone)]
pub struct GradientPair {
    pub grid: Grid,
    pub d_mu: Vec<f64>,
    pub d_eta: Vec<f64>,
}

impl GradientPair {
    /// Weighted squared norm `sum_k w_k (d_mu^2 + d_eta^2)`, the
    /// decrease predicted by a unit step along the negative gradient.
    pub fn weighted_norm_sqr(&self) -> f64 {
        let w = self.grid.lumped_weights();
        let mut acc = 0.0;
        for k in 0..self.d_mu.len() {
            acc += w[k] * (self.d_mu[k] * self.d_mu[k] + self.d_eta[k] * self.d_eta[k]);
        }
        acc
    }

    pub fn zero_outside(&mut self, mask: &NodeMask) {
        for k in 0..self.d_mu.len() {
            if !mask.contains(k) {
                self.d_mu[k] = 0.0;
                self.d_eta[k] = 0.0;
            }
        }
    }

    /// Truncated Gaussian blur of both components, kernel radius three
    /// standard deviations, renormalized where the stencil leaves the
    /// grid. A zero or negative sigma is a no-op.
    pub fn smooth(&mut self, sigma: f64) {
        if sigma <= 0.0 {
            return;
        }
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let r = (3.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-r..=r)
            .map(|t| (-((t * t) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let blur = |v: &mut Vec<f64>| {
            let mut tmp = vec![0.0f64; v.len()];
            for j in 0..ny {
                for i in 0..nx {
                    let (mut acc, mut wsum) = (0.0, 0.0);
                    for (t, kw) in kernel.iter().enumerate() {
                        let ii = i as isize + t as isize - r;
                        if ii >= 0 && (ii as usize) < nx {
                            acc += kw * v[j * nx + ii as usize];
                            wsum += kw;
                        }
                    }
                    tmp[j * nx + i] = acc / wsum;
                }
            }
            for i in 0..nx {
                for j in 0..ny {
                    let (mut acc, mut wsum) = (0.0, 0.0);
                    for (t, kw) in kernel.iter().enumerate() {
                        let jj = j as isize + t as isize - r;
                        if jj >= 0 && (jj as usize) < ny {
                            acc += kw * tmp[jj as usize * nx + i];
                            wsum += kw;
                        }
                    }
                    v[j * nx + i] = acc / wsum;
                }
            }
        };
        blur(&mut self.d_mu);
        blur(&mut self.d_eta);
    }
}

/// Gradient of the misfit at the current iterate from one forward and
/// one adjoint solution: with `z` the strain sensitivity density, the
/// modulus direction is `Re z` and the viscosity direction is
/// `-omega Im z`, masked to the support.
pub fn frechet_gradient(
    u0: &VectorField,
    v: &VectorField,
    omega: f64,
    support: &NodeMask,
) -> Result<GradientPair, ReconError> {
    if u0.grid != v.grid {
        return Err(ReconError::GridMismatch);
    }
    let grid = u0.grid;
    if support.len() != grid.len() {
        return Err(ReconError::GridMismatch);
    }
    let z = shear_sensitivity_density(&grid, u0, v)?;
    let mut d_mu = Vec::with_capacity(grid.len());
    let mut d_eta = Vec::with_capacity(grid.len());
    for (k, zv) in z.values().iter().enumerate() {
        if support.contains(k) {
            d_mu.push(zv.re);
            d_eta.push(-omega * zv.im);
        } else {
            d_mu.push(0.0);
            d_eta.push(0.0);
        }
    }
    Ok(GradientPair { grid, d_mu, d_eta })
}

/// Relative nodal L2 distance between two parameter fields over a
/// region, `||a - b|| / ||b||`.
pub fn relative_error_masked(a: &[f64], b: &[f64], mask: &NodeMask) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in mask.indices() {
        let d = a[k] - b[k];
        num += d * d;
        den += b[k] * b[k];
    }
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).sqrt()
}
