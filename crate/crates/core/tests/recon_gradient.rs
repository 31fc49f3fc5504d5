//! Finite-difference validation of the misfit gradient.
//!
//! The gradient pair claims that perturbing the parameters by
//! `t (dmu, deta)` changes the misfit by `t sum_k w_k (d_mu dmu +
//! d_eta deta) + O(t^2)`. Both sides are computed independently here:
//! the left from two full forward solves at `c +- t delta`, the right
//! from one adjoint solve.

use elastoscope_core::grid::{BoundaryPartition, Grid, NodeMask};
use elastoscope_core::material::MaterialMap;
use elastoscope_core::pde::{solve_adjoint, solve_forward, BodyLoad, ForwardProblem};
use elastoscope_core::phantom::{generate_data, DriveConfig, Phantom, PhantomId};
use elastoscope_core::recon::{frechet_gradient, misfit, GradientPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Setup {
    grid: Grid,
    um: elastoscope_core::VectorField,
    init: MaterialMap,
    mask: NodeMask,
    omega: f64,
    rho: f64,
}

fn setup() -> Setup {
    let grid = Grid::square(21, 10.0).unwrap();
    let drive = DriveConfig { refine: 1, ..DriveConfig::default() };
    let omega = drive.omega();
    let phantom = Phantom::catalog(PhantomId::Model1, omega);
    let data = generate_data(&phantom, grid, &drive).unwrap();
    let mask = grid.interior_mask(0.5);
    let init = MaterialMap::homogeneous(grid, phantom.mu0, phantom.eta0, mask.clone()).unwrap();
    Setup { grid, um: data.um, init, mask, omega, rho: drive.rho }
}

fn problem_for(s: &Setup, map: &MaterialMap) -> ForwardProblem {
    ForwardProblem {
        grid: s.grid,
        modulus: map.complex_modulus(s.omega),
        omega: s.omega,
        rho: s.rho,
        partition: BoundaryPartition::bottom_dirichlet(&s.grid),
        dirichlet: s.um.clone(),
        load: BodyLoad::None,
        stabilization: 0.1,
        solver_tol: 1e-8,
    }
}

fn misfit_at(s: &Setup, map: &MaterialMap) -> f64 {
    let sol = solve_forward(&problem_for(s, map)).unwrap();
    misfit(&sol.u, &s.um).unwrap()
}

/// Smooth random direction pair supported on the mask, scaled so both
/// parameters move at commensurate relative size.
fn random_direction(s: &Setup, rng: &mut ChaCha8Rng) -> GradientPair {
    let n = s.grid.len();
    let mut pair = GradientPair {
        grid: s.grid,
        d_mu: (0..n).map(|_| rng.gen_range(-1.0..1.0) * s.init.mu0).collect(),
        d_eta: (0..n).map(|_| rng.gen_range(-1.0..1.0) * s.init.eta0).collect(),
    };
    pair.smooth(1.0);
    pair.zero_outside(&s.mask);
    pair
}

#[test]
fn gradient_matches_centered_differences() {
    let s = setup();
    let sol0 = solve_forward(&problem_for(&s, &s.init)).unwrap();
    let residual = sol0.u.sub(&s.um).unwrap();
    let adj = solve_adjoint(&problem_for(&s, &s.init), &residual).unwrap();
    let grad = frechet_gradient(&sol0.u, &adj.u, s.omega, &s.mask).unwrap();

    for k in 0..s.grid.len() {
        if !s.mask.contains(k) {
            assert_eq!(grad.d_mu[k], 0.0);
            assert_eq!(grad.d_eta[k], 0.0);
        }
    }

    let w = s.grid.lumped_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t = 1e-4;
    for trial in 0..5 {
        let dir = random_direction(&s, &mut rng);
        let mut predicted = 0.0;
        for k in 0..s.grid.len() {
            predicted += w[k] * (grad.d_mu[k] * dir.d_mu[k] + grad.d_eta[k] * dir.d_eta[k]);
        }
        let plus = misfit_at(&s, &s.init.stepped(&dir.d_mu, &dir.d_eta, -t));
        let minus = misfit_at(&s, &s.init.stepped(&dir.d_mu, &dir.d_eta, t));
        let observed = (plus - minus) / (2.0 * t);
        let rel = (observed - predicted).abs() / predicted.abs().max(1e-300);
        assert!(
            rel <= 1e-3,
            "direction {trial}: adjoint {predicted:.6e} vs differences {observed:.6e}, rel {rel:.2e}"
        );
    }
}
