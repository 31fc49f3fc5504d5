//! Behavioral checks on the descent loop: fixed points, monotone
//! misfit, determinism, and agreement between the local and global
//! variants when the subdomain covers the whole interior.

use elastoscope_core::grid::{BoundaryPartition, Grid};
use elastoscope_core::material::MaterialMap;
use elastoscope_core::phantom::{generate_data, DriveConfig, Phantom, PhantomId};
use elastoscope_core::recon::descent::{reconstruct, OptimizerConfig, Termination};
use elastoscope_core::recon::local::{reconstruct_local, Subdomain};
use elastoscope_core::recon::{relative_error_masked, Experiment};
use elastoscope_core::VectorField;
use num_complex::Complex64;

struct Lab {
    grid: Grid,
    um: VectorField,
    truth: MaterialMap,
    exp: Experiment,
}

fn lab(n: usize) -> Lab {
    let grid = Grid::square(n, 10.0).unwrap();
    let drive = DriveConfig { refine: 1, ..DriveConfig::default() };
    let omega = drive.omega();
    let phantom = Phantom::catalog(PhantomId::Model1, omega);
    let data = generate_data(&phantom, grid, &drive).unwrap();
    let truth = phantom.sample(grid, grid.interior_mask(drive.collar)).unwrap();
    let exp = Experiment::new(omega, drive.rho, BoundaryPartition::bottom_dirichlet(&grid));
    Lab { grid, um: data.um, truth, exp }
}

#[test]
fn truth_is_a_fixed_point_of_matching_data() {
    let l = lab(17);
    let cfg = OptimizerConfig { max_iter: 3, ..OptimizerConfig::default() };
    let (rec, trace) = reconstruct(&l.um, &l.truth, &l.exp, &cfg, Some(&l.truth)).unwrap();
    assert!(trace.rows[0].j < 1e-18, "misfit at truth should vanish, got {}", trace.rows[0].j);
    let err = relative_error_masked(rec.mu(), l.truth.mu(), &l.truth.support);
    assert!(err < 1e-10, "iterate moved away from the truth by {err:.2e}");
}

#[test]
fn misfit_decreases_monotonically_from_homogeneous_start() {
    let l = lab(17);
    let init =
        MaterialMap::homogeneous(l.grid, l.truth.mu0, l.truth.eta0, l.truth.support.clone())
            .unwrap();
    let cfg = OptimizerConfig { max_iter: 12, ..OptimizerConfig::default() };
    let (_, trace) = reconstruct(&l.um, &init, &l.exp, &cfg, Some(&l.truth)).unwrap();
    assert!(matches!(trace.status, Termination::IterationCap | Termination::Converged));
    for pair in trace.rows.windows(2) {
        assert!(
            pair[1].j <= pair[0].j,
            "misfit rose from {} to {} at iteration {}",
            pair[0].j,
            pair[1].j,
            pair[1].iter
        );
    }
    let first = trace.rows.first().unwrap().j;
    let last = trace.rows.last().unwrap().j;
    assert!(last < first, "misfit did not decrease: {first} -> {last}");
}

#[test]
fn traces_are_bitwise_reproducible() {
    let l = lab(13);
    let init =
        MaterialMap::homogeneous(l.grid, l.truth.mu0, l.truth.eta0, l.truth.support.clone())
            .unwrap();
    let cfg = OptimizerConfig { max_iter: 5, ..OptimizerConfig::default() };
    let (rec_a, trace_a) = reconstruct(&l.um, &init, &l.exp, &cfg, Some(&l.truth)).unwrap();
    let (rec_b, trace_b) = reconstruct(&l.um, &init, &l.exp, &cfg, Some(&l.truth)).unwrap();
    assert_eq!(trace_a.to_csv_string(), trace_b.to_csv_string());
    for k in 0..l.grid.len() {
        assert_eq!(rec_a.mu()[k].to_bits(), rec_b.mu()[k].to_bits());
        assert_eq!(rec_a.eta()[k].to_bits(), rec_b.eta()[k].to_bits());
    }
}

#[test]
fn local_on_full_interior_tracks_global_reconstruction() {
    let l = lab(17);
    let init =
        MaterialMap::homogeneous(l.grid, l.truth.mu0, l.truth.eta0, l.truth.support.clone())
            .unwrap();
    let cfg = OptimizerConfig { max_iter: 30, ..OptimizerConfig::default() };
    let (global, _) = reconstruct(&l.um, &init, &l.exp, &cfg, None).unwrap();

    let sub = Subdomain { i0: 1, j0: 1, nx: l.grid.nx - 2, ny: l.grid.ny - 2 };
    let (local, trace) = reconstruct_local(&l.um, &init, &sub, &l.exp, &cfg, None).unwrap();
    assert!(!matches!(trace.status, Termination::SolverFailure));

    let region = l.truth.support.intersect(&l.grid.interior_mask(1.3));
    let diff = relative_error_masked(local.mu(), global.mu(), &region);
    assert!(diff <= 0.02, "local and global modulus maps differ by {diff:.3}");
}

#[test]
fn leaky_boundary_trace_is_flagged() {
    let l = lab(13);
    let um = VectorField::from_fn(l.grid, |x, _| {
        [Complex64::new(0.05 * x, 0.0), Complex64::default()]
    });
    let init =
        MaterialMap::homogeneous(l.grid, l.truth.mu0, l.truth.eta0, l.truth.support.clone())
            .unwrap();
    let cfg = OptimizerConfig { max_iter: 1, ..OptimizerConfig::default() };
    let sub = Subdomain { i0: 2, j0: 2, nx: 8, ny: 8 };
    let (_, trace) = reconstruct_local(&um, &init, &sub, &l.exp, &cfg, None).unwrap();
    assert!(
        trace.warnings.iter().any(|w| w.contains("net flux")),
        "expected a net flux warning, got {:?}",
        trace.warnings
    );
}
