//! Misfit descent restricted to a rectangular subdomain.
//!
//! The measured displacement trace on the subdomain boundary serves as
//! Dirichlet data, which closes the local problem without any knowledge
//! of the medium outside. Useful when part of the data is corrupted:
//! reconstructing a clean subdomain locally keeps the corruption from
//! bleeding across the whole image. The returned map differs from the
//! base map only at nodes strictly inside the subdomain.

use super::descent::{reconstruct, IterationTrace, OptimizerConfig};
use super::{Experiment, ReconError};
use crate::field::VectorField;
use crate::grid::{BoundaryPartition, Grid, NodeMask};
use crate::material::MaterialMap;

/// Node-index aligned rectangle inside the global grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subdomain {
    pub i0: usize,
    pub j0: usize,
    pub nx: usize,
    pub ny: usize,
}

impl Subdomain {
    pub fn validate(&self, grid: &Grid) -> Result<(), ReconError> {
        let fits = self.i0 + self.nx <= grid.nx && self.j0 + self.ny <= grid.ny;
        if !fits || self.nx < 3 || self.ny < 3 {
            return Err(ReconError::BadSubdomain);
        }
        Ok(())
    }

    fn local_grid(&self, grid: &Grid) -> Result<Grid, ReconError> {
        Grid::new(
            self.nx,
            self.ny,
            (self.nx - 1) as f64 * grid.hx(),
            (self.ny - 1) as f64 * grid.hy(),
        )
        .map_err(|_| ReconError::BadSubdomain)
    }

    fn global_idx(&self, grid: &Grid, i: usize, j: usize) -> usize {
        grid.idx(self.i0 + i, self.j0 + j)
    }
}

fn restrict_vector(um: &VectorField, sub: &Subdomain, local: Grid, grid: &Grid) -> VectorField {
    let mut out = VectorField::zeros(local);
    for j in 0..sub.ny {
        for i in 0..sub.nx {
            let g = sub.global_idx(grid, i, j);
            out.set(i, j, [um.comp(0)[g], um.comp(1)[g]]);
        }
    }
    out
}

fn restrict_map(
    base: &MaterialMap,
    sub: &Subdomain,
    local: Grid,
    grid: &Grid,
) -> Result<MaterialMap, ReconError> {
    let mut mu = Vec::with_capacity(local.len());
    let mut eta = Vec::with_capacity(local.len());
    for j in 0..sub.ny {
        for i in 0..sub.nx {
            let g = sub.global_idx(grid, i, j);
            mu.push(base.mu()[g]);
            eta.push(base.eta()[g]);
        }
    }
    let support = NodeMask::from_fn(&local, |i, j| {
        base.support.contains(sub.global_idx(grid, i, j))
    });
    Ok(MaterialMap::from_values(
        local,
        mu,
        eta,
        base.mu0,
        base.eta0,
        support,
        Some((base.c1, base.c2)),
    )?)
}

/// Runs the descent on the subdomain alone, with the measured trace as
/// boundary data, and embeds the result back into a copy of `base`.
pub fn reconstruct_local(
    um: &VectorField,
    base: &MaterialMap,
    sub: &Subdomain,
    exp: &Experiment,
    cfg: &OptimizerConfig,
    truth: Option<&MaterialMap>,
) -> Result<(MaterialMap, IterationTrace), ReconError> {
    let grid = base.grid;
    if um.grid != grid {
        return Err(ReconError::GridMismatch);
    }
    sub.validate(&grid)?;
    let local = sub.local_grid(&grid)?;

    let um_local = restrict_vector(um, sub, local, &grid);
    let init_local = restrict_map(base, sub, local, &grid)?;
    let truth_local = match truth {
        Some(t) => Some(restrict_map(t, sub, local, &grid)?),
        None => None,
    };

    let local_exp = Experiment {
        omega: exp.omega,
        rho: exp.rho,
        partition: BoundaryPartition::all_dirichlet(&local),
        stabilization: exp.stabilization,
        solver_tol: exp.solver_tol,
    };

    let (rec, trace) = reconstruct(&um_local, &init_local, &local_exp, cfg, truth_local.as_ref())?;

    let mut updates = Vec::new();
    for j in 1..sub.ny - 1 {
        for i in 1..sub.nx - 1 {
            let l = local.idx(i, j);
            updates.push((sub.global_idx(&grid, i, j), rec.mu()[l], rec.eta()[l]));
        }
    }
    Ok((base.patched(updates), trace))
}
