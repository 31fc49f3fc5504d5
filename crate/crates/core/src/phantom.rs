//! Piecewise-constant test media, synthetic data and error metrics.
//!
//! The catalog holds three inclusion layouts over a common soft tissue
//! background (shear speed 200 cm/s, loss tangent 0.15): one centered
//! circle, a pair of circles with different contrasts, and a pair of
//! tilted-axis ellipses. Data generation drives the bottom edge with a
//! constant displacement at 70 Hz and can run on a refined grid before
//! restricting to the measurement nodes, so reconstruction tests do not
//! see the same discretization twice.

use crate::field::{ScalarField, VectorField};
use crate::grid::{BoundaryPartition, Grid, NodeMask};
use crate::linsys::SolveReport;
use crate::material::{MaterialError, MaterialMap};
use crate::pde::{solve_forward, BodyLoad, ForwardProblem, PdeError};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("field grid does not match")]
    GridMismatch,
    #[error("noise level must lie in [0, 1), got {0}")]
    BadNoiseLevel(f64),
    #[error("truth field has zero norm over the region")]
    ZeroNormTruth,
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Material(#[from] MaterialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomId {
    Homogeneous,
    Model1,
    Model2,
    Model3,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Inclusion {
    Circle { center: [f64; 2], radius: f64, mu_factor: f64, eta_factor: f64 },
    Ellipse { center: [f64; 2], semi_axes: [f64; 2], mu_factor: f64, eta_factor: f64 },
}

impl Inclusion {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Inclusion::Circle { center, radius, .. } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                dx * dx + dy * dy <= radius * radius
            }
            Inclusion::Ellipse { center, semi_axes, .. } => {
                let (dx, dy) = ((x - center[0]) / semi_axes[0], (y - center[1]) / semi_axes[1]);
                dx * dx + dy * dy <= 1.0
            }
        }
    }

    pub fn factors(&self) -> (f64, f64) {
        match self {
            Inclusion::Circle { mu_factor, eta_factor, .. }
            | Inclusion::Ellipse { mu_factor, eta_factor, .. } => (*mu_factor, *eta_factor),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Inclusion::Circle { radius, .. } => std::f64::consts::PI * radius * radius,
            Inclusion::Ellipse { semi_axes, .. } => {
                std::f64::consts::PI * semi_axes[0] * semi_axes[1]
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Phantom {
    pub id: PhantomId,
    /// Background shear modulus, dyn per square cm.
    pub mu0: f64,
    /// Background viscosity, dyn second per square cm.
    pub eta0: f64,
    pub inclusions: Vec<Inclusion>,
}

impl Phantom {
    /// Catalog entry for the given layout. The viscosity follows from
    /// the background loss tangent `omega eta0 / mu0 = 0.15`.
    pub fn catalog(id: PhantomId, omega: f64) -> Phantom {
        let mu0 = 4.0e4;
        let eta0 = 0.15 * mu0 / omega;
        let circle = |center: [f64; 2], radius: f64, mu_factor: f64, eta_factor: f64| {
            Inclusion::Circle { center, radius, mu_factor, eta_factor }
        };
        let ellipse = |center: [f64; 2], semi_axes: [f64; 2], mu_factor: f64, eta_factor: f64| {
            Inclusion::Ellipse { center, semi_axes, mu_factor, eta_factor }
        };
        let inclusions = match id {
            PhantomId::Homogeneous => vec![],
            PhantomId::Model1 => vec![circle([5.0, 5.0], 1.5, 3.0, 2.0)],
            PhantomId::Model2 => vec![
                circle([3.0, 6.5], 1.2, 2.0, 2.0),
                circle([7.0, 3.5], 1.5, 4.0, 3.0),
            ],
            PhantomId::Model3 => vec![
                ellipse([3.2, 3.2], [1.6, 0.9], 2.5, 1.5),
                ellipse([6.8, 6.8], [0.9, 1.6], 4.0, 3.0),
            ],
        };
        Phantom { id, mu0, eta0, inclusions }
    }

    /// Samples the layout at the grid nodes. Nodes covered by several
    /// inclusions take the last one in catalog order.
    pub fn sample(&self, grid: Grid, support: NodeMask) -> Result<MaterialMap, PhantomError> {
        let mut mu = vec![self.mu0; grid.len()];
        let mut eta = vec![self.eta0; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.coords(i, j);
                for inc in &self.inclusions {
                    if inc.contains(x, y) {
                        let (fm, fe) = inc.factors();
                        mu[grid.idx(i, j)] = fm * self.mu0;
                        eta[grid.idx(i, j)] = fe * self.eta0;
                    }
                }
            }
        }
        Ok(MaterialMap::from_values(grid, mu, eta, self.mu0, self.eta0, support, None)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("phantom serializes")
    }
}

/// Builds the truth map for a catalog layout with the default interior
/// collar.
pub fn build_phantom(
    id: PhantomId,
    grid: Grid,
    omega: f64,
    collar: f64,
) -> Result<MaterialMap, PhantomError> {
    Phantom::catalog(id, omega).sample(grid, grid.interior_mask(collar))
}

#[derive(Debug, Clone)]
pub struct DriveConfig {
    pub frequency_hz: f64,
    pub rho: f64,
    /// Constant Dirichlet displacement on the bottom edge.
    pub amplitude: [f64; 2],
    /// Data generation grid refinement; 2 solves on a grid twice as
    /// fine and restricts, 1 solves on the measurement grid itself.
    pub refine: usize,
    /// Interior collar width (physical units) for the truth support.
    pub collar: f64,
    pub stabilization: f64,
    pub solver_tol: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig {
            frequency_hz: 70.0,
            rho: 1.0,
            amplitude: [0.3, 0.3],
            refine: 2,
            collar: 0.5,
            stabilization: 0.1,
            solver_tol: 1e-8,
        }
    }
}

impl DriveConfig {
    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency_hz
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedData {
    /// Displacement at the measurement nodes.
    pub um: VectorField,
    /// Pressure at the measurement nodes.
    pub pressure: ScalarField,
    /// Continuity residual of the generating solve.
    pub continuity_residual: f64,
    /// Linear solver report of the generating solve.
    pub report: SolveReport,
}

/// Solves the forward problem for a catalog phantom and restricts the
/// solution to the measurement grid.
pub fn generate_data(
    phantom: &Phantom,
    grid: Grid,
    drive: &DriveConfig,
) -> Result<GeneratedData, PhantomError> {
    let refine = drive.refine.max(1);
    let fine = Grid::new(
        (grid.nx - 1) * refine + 1,
        (grid.ny - 1) * refine + 1,
        grid.lx,
        grid.ly,
    )
    .map_err(|_| PhantomError::GridMismatch)?;
    let truth = phantom.sample(fine, fine.interior_mask(drive.collar))?;
    let omega = drive.omega();
    let g = VectorField::from_fn(fine, |_, _| {
        [
            Complex64::new(drive.amplitude[0], 0.0),
            Complex64::new(drive.amplitude[1], 0.0),
        ]
    });
    let problem = ForwardProblem {
        grid: fine,
        modulus: truth.complex_modulus(omega),
        omega,
        rho: drive.rho,
        partition: BoundaryPartition::bottom_dirichlet(&fine),
        dirichlet: g,
        load: BodyLoad::None,
        stabilization: drive.stabilization,
        solver_tol: drive.solver_tol,
    };
    let sol = solve_forward(&problem)?;

    let mut um = VectorField::zeros(grid);
    let mut pressure = ScalarField::zeros(grid);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = fine.idx(i * refine, j * refine);
            um.set(i, j, [sol.u.comp(0)[k], sol.u.comp(1)[k]]);
            pressure.set(i, j, sol.p.values()[k]);
        }
    }
    Ok(GeneratedData {
        um,
        pressure,
        continuity_residual: sol.continuity_residual,
        report: sol.report,
    })
}

#[derive(Debug, Clone)]
pub struct NoiseSpec {
    /// Noise amplitude as a fraction of the regional RMS.
    pub level: f64,
    pub region: NodeMask,
    pub seed: u64,
}

/// Adds seeded complex Gaussian noise inside the region, scaled by the
/// RMS of the field over that region. Nodes outside the region are
/// returned bit-identical.
pub fn add_noise(um: &VectorField, spec: &NoiseSpec) -> Result<VectorField, PhantomError> {
    if !(spec.level >= 0.0 && spec.level < 1.0) {
        return Err(PhantomError::BadNoiseLevel(spec.level));
    }
    if spec.region.len() != um.grid.len() {
        return Err(PhantomError::GridMismatch);
    }
    if spec.level == 0.0 || spec.region.count() == 0 {
        return Ok(um.clone());
    }
    let mut acc = 0.0;
    for k in spec.region.indices() {
        acc += um.comp(0)[k].norm_sqr() + um.comp(1)[k].norm_sqr();
    }
    let rms = (acc / (2.0 * spec.region.count() as f64)).sqrt();
    let amp = spec.level * rms / 2f64.sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = um.clone();
    for k in 0..um.grid.len() {
        if !spec.region.contains(k) {
            continue;
        }
        for c in 0..2 {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            out.comp_mut(c)[k] += amp * Complex64::new(re, im);
        }
    }
    Ok(out)
}

/// Relative nodal L2 errors of the parameter pair over a region,
/// `(||mu - mu*|| / ||mu*||, ||eta - eta*|| / ||eta*||)`.
pub fn relative_error(
    rec: &MaterialMap,
    truth: &MaterialMap,
    region: &NodeMask,
) -> Result<(f64, f64), PhantomError> {
    if rec.grid != truth.grid || region.len() != rec.grid.len() {
        return Err(PhantomError::GridMismatch);
    }
    let one = |a: &[f64], b: &[f64]| -> Result<f64, PhantomError> {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in region.indices() {
            let d = a[k] - b[k];
            num += d * d;
            den += b[k] * b[k];
        }
        if den == 0.0 {
            return Err(PhantomError::ZeroNormTruth);
        }
        Ok((num / den).sqrt())
    };
    Ok((one(rec.mu(), truth.mu())?, one(rec.eta(), truth.eta())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_deterministic_and_region_confined() {
        let g = Grid::square(17, 10.0).unwrap();
        let um = VectorField::from_fn(g, |x, y| {
            [Complex64::new(x * 0.01, y * 0.01), Complex64::new(0.3, -0.2)]
        });
        let region = g.mask_where(|x, y| x >= 5.0 && y >= 5.0);
        let spec = NoiseSpec { level: 0.03, region: region.clone(), seed: 42 };
        let a = add_noise(&um, &spec).unwrap();
        let b = add_noise(&um, &spec).unwrap();
        for c in 0..2 {
            for k in 0..g.len() {
                assert_eq!(a.comp(c)[k], b.comp(c)[k]);
                if !region.contains(k) {
                    assert_eq!(a.comp(c)[k], um.comp(c)[k]);
                } else {
                    assert_ne!(a.comp(c)[k], um.comp(c)[k]);
                }
            }
        }
    }

    #[test]
    fn zero_level_is_identity() {
        let g = Grid::square(9, 10.0).unwrap();
        let um = VectorField::from_fn(g, |x, _| [Complex64::new(x, 1.0), Complex64::default()]);
        let spec = NoiseSpec { level: 0.0, region: NodeMask::full(&g), seed: 1 };
        let out = add_noise(&um, &spec).unwrap();
        for c in 0..2 {
            assert_eq!(out.comp(c), um.comp(c));
        }
    }

    #[test]
    fn inclusion_node_area_tracks_analytic_area() {
        for id in [PhantomId::Model1, PhantomId::Model3] {
            let p = Phantom::catalog(id, 440.0);
            let analytic: f64 = p.inclusions.iter().map(Inclusion::area).sum();
            for n in [33usize, 65, 129] {
                let g = Grid::square(n, 10.0).unwrap();
                let h = g.lx / (g.nx - 1) as f64;
                let mut covered = 0usize;
                for j in 0..n {
                    for i in 0..n {
                        let (x, y) = g.coords(i, j);
                        if p.inclusions.iter().any(|inc| inc.contains(x, y)) {
                            covered += 1;
                        }
                    }
                }
                let err = (covered as f64 * h * h - analytic).abs();
                assert!(
                    err <= 2.0 * h,
                    "{id:?} n={n}: nodal area off by {err:.4}, h={h:.4}"
                );
            }
        }
    }

    #[test]
    fn noise_rms_matches_requested_level() {
        let g = Grid::square(65, 10.0).unwrap();
        let omega = 2.0 * std::f64::consts::PI * 70.0;
        let k = (omega * omega / 4.0e4).sqrt();
        let um = VectorField::from_fn(g, |x, y| {
            [
                Complex64::new((k * x).cos(), (k * y).sin()),
                Complex64::new(0.4, -0.1) * (Complex64::i() * k * y).exp(),
            ]
        });
        let region = NodeMask::full(&g);
        let spec = NoiseSpec { level: 0.03, region: region.clone(), seed: 7 };
        let noisy = add_noise(&um, &spec).unwrap();
        let mut clean = 0.0;
        let mut delta = 0.0;
        for k in region.indices() {
            for c in 0..2 {
                clean += um.comp(c)[k].norm_sqr();
                delta += (noisy.comp(c)[k] - um.comp(c)[k]).norm_sqr();
            }
        }
        let empirical = (delta / clean).sqrt();
        assert!(
            (empirical / spec.level - 1.0).abs() <= 0.10,
            "empirical noise level {empirical:.5} vs requested {:.5}",
            spec.level
        );
    }

    #[test]
    fn relative_error_matches_scaling_oracle() {
        let g = Grid::square(9, 10.0).unwrap();
        let omega = 440.0;
        let truth = build_phantom(PhantomId::Model1, g, omega, 0.5).unwrap();
        let scaled = MaterialMap::from_values(
            g,
            truth.mu().iter().map(|v| 1.1 * v).collect(),
            truth.eta().iter().map(|v| 1.1 * v).collect(),
            truth.mu0,
            truth.eta0,
            NodeMask::full(&g),
            Some((truth.c1, truth.c2 * 2.0)),
        )
        .unwrap();
        let (e_mu, e_eta) = relative_error(&scaled, &truth, &NodeMask::full(&g)).unwrap();
        assert!((e_mu - 0.1).abs() < 1e-12);
        assert!((e_eta - 0.1).abs() < 1e-12);
    }

    #[test]
    fn exact_reconstruction_has_zero_error() {
        let g = Grid::square(9, 10.0).unwrap();
        let truth = build_phantom(PhantomId::Model2, g, 440.0, 0.5).unwrap();
        let (e_mu, e_eta) = relative_error(&truth, &truth, &NodeMask::full(&g)).unwrap();
        assert_eq!((e_mu, e_eta), (0.0, 0.0));
    }

    #[test]
    fn catalog_json_round_trips() {
        let p = Phantom::catalog(PhantomId::Model3, 440.0);
        let text = p.to_json();
        let back: Phantom = serde_json::from_str(&text).unwrap();
        assert_eq!(back.id, p.id);
        assert_eq!(back.inclusions.len(), 2);
    }
}
