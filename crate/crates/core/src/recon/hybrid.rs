//! One-step modulus guess from a Helmholtz split of the stress.
//!
//! Each row of `c sym_grad u` splits into a gradient plus a rotated
//! gradient. The potential part follows from the momentum balance:
//! `lap f_j = -(rho omega^2 / 2) u_j`, with the background normal
//! stress as Neumann data, shifted by a constant per component so the
//! data stays compatible with the volume source. The rotational part
//! solves `lap w_j = -curl(row_j)` with `w_j = 0` on the boundary,
//! using a coefficient guess in place of `c`; the curl source is
//! assembled in weak form, so only stress values enter. Contracting
//! the rebuilt rows against the conjugate strain and dividing by the
//! strain magnitude yields the modulus.
//!
//! The curl equation runs once with the potential-part coefficient and
//! once with the algebraic inversion coefficient; the two results are
//! averaged. Nodes below a relative strain floor keep the background.
//! Refinement passes feed the estimate back into the curl equation.

use super::algebraic::algebraic_inversion;
use super::ReconError;
use crate::field::{ScalarField, TensorField, VectorField};
use crate::grid::{Grid, NodeMask};
use crate::material::MaterialMap;
use crate::ops;
use crate::pde::{solve_poisson_rotational, solve_poisson_vector, PoissonVectorBc};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct HybridConfig {
    /// Relative strain magnitude floor below which nodes keep the
    /// background value.
    pub floor: f64,
    /// Probe direction for the algebraic inversion branch.
    pub direction: [f64; 2],
    /// Extra passes feeding the estimate back into the curl equation.
    pub refine_passes: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig { floor: 1e-3, direction: [1.0, 0.0], refine_passes: 8 }
    }
}

/// Squared pointwise magnitude of a symmetric tensor field.
fn strain_magnitude_sqr(strain: &TensorField) -> Vec<f64> {
    (0..strain.xx.len())
        .map(|k| {
            strain.xx[k].norm_sqr() + strain.yy[k].norm_sqr() + 2.0 * strain.xy[k].norm_sqr()
        })
        .collect()
}

/// Rows of `coeff * strain` as vector fields.
fn stress_rows(strain: &TensorField, coeff: &ScalarField) -> [VectorField; 2] {
    let grid = coeff.grid;
    let stress = strain.scale_by(coeff);
    let row = |a: &[Complex64], b: &[Complex64]| {
        VectorField::from_components(
            ScalarField::from_values(grid, a.to_vec()).expect("finite"),
            ScalarField::from_values(grid, b.to_vec()).expect("finite"),
        )
        .expect("same grid")
    };
    [row(&stress.xx, &stress.xy), row(&stress.xy, &stress.yy)]
}

/// Boundary values of `(c0 sym_grad u) n` per component, outward
/// normal, corner nodes averaging their two edge normals, plus a
/// constant per component on the boundary balancing the volume source.
fn background_normal_stress(
    grid: &Grid,
    strain: &TensorField,
    c0: Complex64,
    rhs: &VectorField,
) -> VectorField {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut flux = VectorField::zeros(*grid);
    for j in 0..ny {
        for i in 0..nx {
            if !grid.is_boundary(i, j) {
                continue;
            }
            let k = grid.idx(i, j);
            let mut n = [0.0f64; 2];
            let mut sides = 0.0;
            if i == 0 {
                n[0] -= 1.0;
                sides += 1.0;
            }
            if i == nx - 1 {
                n[0] += 1.0;
                sides += 1.0;
            }
            if j == 0 {
                n[1] -= 1.0;
                sides += 1.0;
            }
            if j == ny - 1 {
                n[1] += 1.0;
                sides += 1.0;
            }
            let (n0, n1) = (n[0] / sides, n[1] / sides);
            let row1 = strain.xx[k] * n0 + strain.xy[k] * n1;
            let row2 = strain.xy[k] * n0 + strain.yy[k] * n1;
            flux.set(i, j, [c0 * row1, c0 * row2]);
        }
    }

    let weights = grid.lumped_weights();
    let perimeter = 2.0 * (grid.lx + grid.ly);
    for c in 0..2 {
        let volume: Complex64 =
            rhs.comp(c).iter().zip(&weights).map(|(v, w)| v * *w).sum();
        let mut boundary = Complex64::default();
        {
            let fv = flux.comp(c);
            let mut edge = |a: usize, b: usize, len: f64| {
                boundary += 0.5 * len * (fv[a] + fv[b]);
            };
            for i in 0..nx - 1 {
                edge(grid.idx(i, 0), grid.idx(i + 1, 0), grid.hx());
                edge(grid.idx(i, ny - 1), grid.idx(i + 1, ny - 1), grid.hx());
            }
            for j in 0..ny - 1 {
                edge(grid.idx(0, j), grid.idx(0, j + 1), grid.hy());
                edge(grid.idx(nx - 1, j), grid.idx(nx - 1, j + 1), grid.hy());
            }
        }
        let shift = (volume - boundary) / perimeter;
        let vals = flux.comp_mut(c);
        for j in 0..ny {
            for i in 0..nx {
                if grid.is_boundary(i, j) {
                    vals[grid.idx(i, j)] += shift;
                }
            }
        }
    }
    flux
}

/// Solves the two curl equations for a given stress coefficient and
/// returns the rotated gradients of the potentials, row by row.
fn rotational_part(
    grid: &Grid,
    strain: &TensorField,
    coeff: &ScalarField,
) -> Result<[VectorField; 2], ReconError> {
    let rows = stress_rows(strain, coeff);
    let mut out = Vec::with_capacity(2);
    for row in &rows {
        let (w, _) = solve_poisson_rotational(grid, row, None)?;
        out.push(ops::curl2d_scalar(&w));
    }
    Ok([out.remove(0), out.remove(0)])
}

/// Contraction of per-row vector fields against the conjugate strain,
/// `sum_j q_j . conj(row_j(strain))`.
fn contract_rows(strain: &TensorField, rows: &[VectorField; 2]) -> Vec<Complex64> {
    (0..strain.xx.len())
        .map(|k| {
            rows[0].comp(0)[k] * strain.xx[k].conj()
                + rows[0].comp(1)[k] * strain.xy[k].conj()
                + rows[1].comp(0)[k] * strain.xy[k].conj()
                + rows[1].comp(1)[k] * strain.yy[k].conj()
        })
        .collect()
}

/// One-step modulus estimate from the measured displacement field.
pub fn hybrid_initial_guess(
    um: &VectorField,
    omega: f64,
    rho: f64,
    mu0: f64,
    eta0: f64,
    support: NodeMask,
    cfg: &HybridConfig,
) -> Result<MaterialMap, ReconError> {
    let grid = um.grid;
    if support.len() != grid.len() {
        return Err(ReconError::GridMismatch);
    }
    let c0 = Complex64::new(mu0, omega * eta0);
    let strain = ops::sym_gradient(um);
    let mag2 = strain_magnitude_sqr(&strain);
    let mmax = mag2.iter().copied().fold(0.0f64, f64::max);
    let cut = cfg.floor * mmax;
    let trusted: Vec<bool> = mag2.iter().map(|&m| m > cut).collect();

    let potential_rhs = um.scale(Complex64::new(-0.5 * rho * omega * omega, 0.0));
    let flux = background_normal_stress(&grid, &strain, c0, &potential_rhs);
    let (f_pot, _) = solve_poisson_vector(&grid, &potential_rhs, PoissonVectorBc::Neumann(&flux))?;
    let grad_rows = [ops::gradient(&f_pot.component(0)), ops::gradient(&f_pot.component(1))];
    let potential_term = contract_rows(&strain, &grad_rows);

    let masked_ratio = |num: &[Complex64]| -> ScalarField {
        let values = (0..grid.len())
            .map(|k| if trusted[k] { num[k] / mag2[k] } else { c0 })
            .collect();
        ScalarField::from_values(grid, values).expect("finite")
    };

    let coeff_potential = masked_ratio(&potential_term);
    let (coeff_algebraic, _) =
        algebraic_inversion(um, cfg.direction, omega, rho, cfg.floor, c0)?;

    let rows_a = rotational_part(&grid, &strain, &coeff_potential)?;
    let rows_b = rotational_part(&grid, &strain, &coeff_algebraic)?;
    let curl_a = contract_rows(&strain, &rows_a);
    let curl_b = contract_rows(&strain, &rows_b);

    let combine = |curl_term: &[Complex64]| -> Vec<Complex64> {
        (0..grid.len())
            .map(|k| {
                if trusted[k] {
                    (potential_term[k] + curl_term[k]) / mag2[k]
                } else {
                    c0
                }
            })
            .collect()
    };

    let averaged: Vec<Complex64> =
        (0..grid.len()).map(|k| 0.5 * (curl_a[k] + curl_b[k])).collect();
    let mut estimate = combine(&averaged);

    for _ in 0..cfg.refine_passes {
        let coeff = ScalarField::from_values(grid, estimate.clone()).expect("finite");
        let rows = rotational_part(&grid, &strain, &coeff)?;
        let curl_term = contract_rows(&strain, &rows);
        estimate = combine(&curl_term);
    }

    let field = ScalarField::from_values(grid, estimate).expect("finite");
    Ok(MaterialMap::from_complex_modulus(&field, omega, mu0, eta0, support, None)?)
}
