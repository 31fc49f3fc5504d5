//! Oracle tests for the forward solver built on a manufactured solution.
//!
//! The exact velocity is divergence free by construction:
//!   u* = curl(psi),  psi = sin(pi x / L) sin(pi y / L)
//! and the exact pressure is zero. With a constant modulus the momentum
//! operator reduces to c * lap(u) + rho omega^2 u, so the body force
//! that makes u* exact is available in closed form.

use num_complex::Complex64;

use elastoscope_core::ops;
use elastoscope_core::pde::{solve_forward, BodyLoad, ForwardProblem};
use elastoscope_core::{BoundaryPartition, Grid, ScalarField, VectorField};

const L: f64 = 10.0;
const OMEGA: f64 = 2.0 * std::f64::consts::PI * 70.0;
const RHO: f64 = 1.0;
const MODULUS: Complex64 = Complex64::new(4.0e4, 6.0e3);

fn wave_number() -> f64 {
    std::f64::consts::PI / L
}

fn exact_velocity(x: f64, y: f64) -> [Complex64; 2] {
    let s = wave_number();
    [
        Complex64::from(s * (s * x).sin() * (s * y).cos()),
        Complex64::from(-s * (s * x).cos() * (s * y).sin()),
    ]
}

fn body_force(x: f64, y: f64) -> [Complex64; 2] {
    let s = wave_number();
    let u = exact_velocity(x, y);
    let lap = -2.0 * s * s;
    [
        MODULUS * lap * u[0] + RHO * OMEGA * OMEGA * u[0],
        MODULUS * lap * u[1] + RHO * OMEGA * OMEGA * u[1],
    ]
}

fn manufactured_problem(n: usize) -> ForwardProblem {
    let grid = Grid::square(n, L).unwrap();
    ForwardProblem {
        grid,
        modulus: ScalarField::constant(grid, MODULUS),
        omega: OMEGA,
        rho: RHO,
        partition: BoundaryPartition::all_dirichlet(&grid),
        dirichlet: VectorField::from_fn(grid, exact_velocity),
        load: BodyLoad::Field(VectorField::from_fn(grid, body_force)),
        stabilization: 0.1,
        solver_tol: 1e-8,
    }
}

fn velocity_error(n: usize) -> (f64, f64) {
    let problem = manufactured_problem(n);
    let sol = solve_forward(&problem).unwrap();
    assert!(
        sol.continuity_residual <= 1e-8,
        "continuity rows left a residual of {:.3e} at n = {n}",
        sol.continuity_residual
    );
    let exact = VectorField::from_fn(problem.grid, exact_velocity);
    let err = sol.u.sub(&exact).unwrap();
    let div = ops::divergence(&sol.u).l2();
    (err.linf() / exact.linf(), div)
}

/// The refinement study is shared between tests so the large solves run
/// once, and strictly one at a time.
fn refinement_study() -> &'static [(f64, f64); 3] {
    static STUDY: std::sync::OnceLock<[(f64, f64); 3]> = std::sync::OnceLock::new();
    STUDY.get_or_init(|| [velocity_error(33), velocity_error(65), velocity_error(129)])
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let [(e33, _), (e65, _), (e129, _)] = *refinement_study();
    let order_a = (e33 / e65).log2();
    let order_b = (e65 / e129).log2();
    assert!(
        order_a > 1.8 && order_b > 1.8,
        "orders {order_a:.2}, {order_b:.2} from errors {e33:.3e}, {e65:.3e}, {e129:.3e}"
    );
    assert!(
        order_a < 2.6 && order_b < 2.6,
        "suspiciously fast convergence: {order_a:.2}, {order_b:.2}"
    );
}

#[test]
fn discrete_divergence_shrinks_under_refinement() {
    let [(_, d33), (_, d65), (_, d129)] = *refinement_study();
    assert!(
        d65 < d33 / 2.0 && d129 < d65 / 2.0,
        "divergence norms {d33:.3e}, {d65:.3e}, {d129:.3e} do not shrink"
    );
}

#[test]
fn response_is_linear_in_boundary_data() {
    let grid = Grid::square(25, L).unwrap();
    let drive = |scale: f64| ForwardProblem {
        grid,
        modulus: ScalarField::constant(grid, MODULUS),
        omega: OMEGA,
        rho: RHO,
        partition: BoundaryPartition::bottom_dirichlet(&grid),
        dirichlet: VectorField::from_fn(grid, |_, _| {
            [Complex64::from(0.3 * scale), Complex64::from(0.3 * scale)]
        }),
        load: BodyLoad::None,
        stabilization: 0.1,
        solver_tol: 1e-8,
    };
    let once = solve_forward(&drive(1.0)).unwrap();
    let twice = solve_forward(&drive(2.0)).unwrap();
    let gap = twice.u.sub(&once.u.scale(Complex64::from(2.0))).unwrap();
    assert!(
        gap.linf() <= 1e-10 * twice.u.linf(),
        "doubling the drive changed the shape of the response by {:.3e}",
        gap.linf() / twice.u.linf()
    );
}

#[test]
fn pinned_pressure_reports_mass_defect() {
    let problem = manufactured_problem(33);
    let sol = solve_forward(&problem).unwrap();
    let defect = sol.mean_defect.expect("all-Dirichlet runs pin the pressure mean");
    assert!(
        defect.norm() < 1e-6,
        "compatible boundary data produced a mass defect of {:.3e}",
        defect.norm()
    );

    let grid = problem.grid;
    let mut leaky = problem.clone();
    leaky.load = BodyLoad::None;
    leaky.dirichlet = VectorField::from_fn(grid, |x, _| [Complex64::from(x / L), Complex64::default()]);
    let sol = solve_forward(&leaky).unwrap();
    let defect = sol.mean_defect.unwrap().norm();
    assert!(
        defect > 1e-4,
        "boundary data with net outflow should show up in the multiplier, got {defect:.3e}"
    );
}
