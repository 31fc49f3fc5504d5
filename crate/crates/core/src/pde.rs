//! Discrete forward, adjoint and Poisson problems.
//!
//! The displacement-pressure system is the time-harmonic incompressible
//! viscoelastic model
//!
//! ```text
//! 2 div( (mu + i omega eta) sym_grad u ) + grad p + rho omega^2 u = f
//! div u = 0
//! ```
//!
//! with `u = g` on the Dirichlet part of the boundary and the
//! traction-free condition `2 (mu + i omega eta) sym_grad u . n + p n = 0`
//! on the rest. Discretization is equal-order bilinear elements for
//! both `u` and `p` on the structured grid, with the pressure Laplacian
//! stabilization `beta h^2 (grad p, grad q)` added to the continuity
//! equation so the equal-order pair is solvable. The traction condition
//! is natural for this weak form and needs no surface terms.
//!
//! When the whole boundary is Dirichlet, the pressure is only
//! determined up to a constant and the boundary data may carry a net
//! mass flux that the continuity rows cannot balance. Summing those
//! rows shows a mean-pinning Lagrange multiplier would take the value
//! `-flux / area`, so the multiplier is eliminated analytically: the
//! flux of the boundary data is spread over the continuity right-hand
//! side with the lumped area weights, one pressure node is grounded to
//! make the matrix invertible, and the solved pressure is shifted to
//! zero area-weighted mean afterwards. A dense multiplier row would
//! otherwise ruin the sparse factorization.
//!
//! The adjoint problem is the same assembly with the conjugated modulus
//! and homogeneous Dirichlet data, driven by the misfit residual tested
//! with lumped weights. Keeping that pairing identical to the one used
//! in the misfit functional is what makes adjoint gradients match
//! finite differences of the discrete misfit to solver precision, so
//! change one only together with the other.

use crate::field::{ScalarField, VectorField};
use crate::grid::{BoundaryPartition, Grid};
use crate::linsys::{
    apply_constraints, solve_with_cache, ConstraintSet, FactorizationCache, LinSysError,
    SolveReport, SparseMatrix,
};
use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum PdeError {
    #[error("field grid does not match problem grid")]
    GridMismatch,
    #[error("boundary partition inconsistent with grid")]
    BadPartition,
    #[error(transparent)]
    Assembly(#[from] LinSysError),
    #[error("solve did not reach tolerance (relative residual {rel_residual:.3e}); the system may be near a resonance")]
    NearResonance { rel_residual: f64 },
}

/// Body force options. `ModulusPerturbation` realizes the load
/// `-2 div( dc sym_grad u_ref )` in weak form; it exists so tests can
/// drive the linearized (sensitivity) problem exactly.
#[derive(Debug, Clone)]
pub enum BodyLoad {
    None,
    Field(VectorField),
    ModulusPerturbation { coeff: ScalarField, reference: VectorField },
}

#[derive(Debug, Clone)]
pub struct ForwardProblem {
    pub grid: Grid,
    /// Complex shear modulus `mu + i omega eta` at the nodes.
    pub modulus: ScalarField,
    pub omega: f64,
    pub rho: f64,
    pub partition: BoundaryPartition,
    /// Dirichlet data; only values at Dirichlet nodes are read.
    pub dirichlet: VectorField,
    pub load: BodyLoad,
    /// Pressure stabilization coefficient `beta`.
    pub stabilization: f64,
    pub solver_tol: f64,
}

impl ForwardProblem {
    pub fn validate(&self) -> Result<(), PdeError> {
        if self.modulus.grid != self.grid || self.dirichlet.grid != self.grid {
            return Err(PdeError::GridMismatch);
        }
        if !self.partition.is_consistent(&self.grid) {
            return Err(PdeError::BadPartition);
        }
        match &self.load {
            BodyLoad::Field(f) if f.grid != self.grid => Err(PdeError::GridMismatch),
            BodyLoad::ModulusPerturbation { coeff, reference }
                if coeff.grid != self.grid || reference.grid != self.grid =>
            {
                Err(PdeError::GridMismatch)
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub u: VectorField,
    pub p: ScalarField,
    pub report: SolveReport,
    /// Residual of the continuity rows of the solved system, relative
    /// to the right-hand side norm.
    pub continuity_residual: f64,
    /// Multiplier value when the pressure mean is pinned; measures the
    /// mass defect of the boundary data.
    pub mean_defect: Option<Complex64>,
}

/// Bilinear basis data at one quadrature point.
struct QPoint {
    w: f64,
    n: [f64; 4],
    dndx: [f64; 4],
    dndy: [f64; 4],
}

fn quad_points(hx: f64, hy: f64) -> [QPoint; 4] {
    let g = 1.0 / 3f64.sqrt();
    let mut out: [QPoint; 4] = [(); 4].map(|_| QPoint {
        w: 0.0,
        n: [0.0; 4],
        dndx: [0.0; 4],
        dndy: [0.0; 4],
    });
    let pts = [(-g, -g), (g, -g), (g, g), (-g, g)];
    for (q, (xi, et)) in pts.into_iter().enumerate() {
        let n = [
            0.25 * (1.0 - xi) * (1.0 - et),
            0.25 * (1.0 + xi) * (1.0 - et),
            0.25 * (1.0 + xi) * (1.0 + et),
            0.25 * (1.0 - xi) * (1.0 + et),
        ];
        let dxi = [
            -0.25 * (1.0 - et),
            0.25 * (1.0 - et),
            0.25 * (1.0 + et),
            -0.25 * (1.0 + et),
        ];
        let det = [
            -0.25 * (1.0 - xi),
            -0.25 * (1.0 + xi),
            0.25 * (1.0 + xi),
            0.25 * (1.0 - xi),
        ];
        out[q] = QPoint {
            w: hx * hy / 4.0,
            n,
            dndx: dxi.map(|d| d * 2.0 / hx),
            dndy: det.map(|d| d * 2.0 / hy),
        };
    }
    out
}

fn element_nodes(grid: &Grid, ei: usize, ej: usize) -> [usize; 4] {
    [
        grid.idx(ei, ej),
        grid.idx(ei + 1, ej),
        grid.idx(ei + 1, ej + 1),
        grid.idx(ei, ej + 1),
    ]
}

enum RhsKind<'a> {
    FromLoad(&'a BodyLoad),
    /// Lumped-weight pairing with a nodal field (adjoint drive).
    Weighted(&'a VectorField),
}

/// Assemble the displacement-pressure system. Dof layout: `u1` at
/// `[0, n)`, `u2` at `[n, 2n)`, `p` at `[2n, 3n)`. The third return
/// value is the area-normalized mass defect of the boundary data when
/// the pressure had to be grounded, `None` otherwise.
fn assemble_stokes(
    problem: &ForwardProblem,
    conjugate_modulus: bool,
    dirichlet: &VectorField,
    rhs_kind: RhsKind,
) -> Result<(SparseMatrix, Vec<Complex64>, Option<Complex64>), PdeError> {
    let grid = problem.grid;
    let n = grid.len();
    let pin_pressure = !problem.partition.has_traction();
    let ndof = 3 * n;
    let mut mat = SparseMatrix::new(ndof);
    let mut rhs = vec![Complex64::default(); ndof];

    let (hx, hy) = (grid.hx(), grid.hy());
    let qp = quad_points(hx, hy);
    let rw2 = problem.rho * problem.omega * problem.omega;
    let beta_h2 = problem.stabilization * hx * hy;
    let cvals = problem.modulus.values();

    let mut local = [[Complex64::default(); 12]; 12];
    let mut local_rhs = [Complex64::default(); 8];

    for ej in 0..grid.ny - 1 {
        for ei in 0..grid.nx - 1 {
            let nodes = element_nodes(&grid, ei, ej);
            for row in local.iter_mut() {
                row.fill(Complex64::default());
            }
            local_rhs.fill(Complex64::default());

            for q in &qp {
                let mut c_q = Complex64::default();
                for a in 0..4 {
                    c_q += cvals[nodes[a]] * q.n[a];
                }
                if conjugate_modulus {
                    c_q = c_q.conj();
                }
                let visc = -2.0 * c_q * q.w;
                let mass = rw2 * q.w;

                for a in 0..4 {
                    let (nax, nay, na) = (q.dndx[a], q.dndy[a], q.n[a]);
                    for b in 0..4 {
                        let (nbx, nby, nb) = (q.dndx[b], q.dndy[b], q.n[b]);
                        // u-u coupling through the strain pairing plus inertia
                        local[a][b] += visc * (nax * nbx + 0.5 * nay * nby) + mass * na * nb;
                        local[a][4 + b] += visc * 0.5 * nay * nbx;
                        local[4 + a][b] += visc * 0.5 * nax * nby;
                        local[4 + a][4 + b] +=
                            visc * (nay * nby + 0.5 * nax * nbx) + mass * na * nb;
                        // pressure gradient on the momentum rows
                        local[a][8 + b] -= Complex64::from(q.w * nb * nax);
                        local[4 + a][8 + b] -= Complex64::from(q.w * nb * nay);
                        // continuity rows
                        local[8 + a][b] += Complex64::from(q.w * na * nbx);
                        local[8 + a][4 + b] += Complex64::from(q.w * na * nby);
                        // pressure stabilization
                        local[8 + a][8 + b] -= Complex64::from(beta_h2 * q.w * (nax * nbx + nay * nby));
                    }
                }

                match rhs_kind {
                    RhsKind::FromLoad(BodyLoad::Field(f)) => {
                        let mut f_q = [Complex64::default(); 2];
                        for b in 0..4 {
                            f_q[0] += f.comp(0)[nodes[b]] * q.n[b];
                            f_q[1] += f.comp(1)[nodes[b]] * q.n[b];
                        }
                        for a in 0..4 {
                            local_rhs[a] += f_q[0] * q.n[a] * q.w;
                            local_rhs[4 + a] += f_q[1] * q.n[a] * q.w;
                        }
                    }
                    RhsKind::FromLoad(BodyLoad::ModulusPerturbation { coeff, reference }) => {
                        let dc = coeff.values();
                        let (r1, r2) = (reference.comp(0), reference.comp(1));
                        let mut dc_q = Complex64::default();
                        let (mut exx, mut eyy, mut exy) = (
                            Complex64::default(),
                            Complex64::default(),
                            Complex64::default(),
                        );
                        for b in 0..4 {
                            dc_q += dc[nodes[b]] * q.n[b];
                            exx += r1[nodes[b]] * q.dndx[b];
                            eyy += r2[nodes[b]] * q.dndy[b];
                            exy += 0.5 * (r1[nodes[b]] * q.dndy[b] + r2[nodes[b]] * q.dndx[b]);
                        }
                        let s = 2.0 * dc_q * q.w;
                        for a in 0..4 {
                            local_rhs[a] += s * (exx * q.dndx[a] + exy * q.dndy[a]);
                            local_rhs[4 + a] += s * (eyy * q.dndy[a] + exy * q.dndx[a]);
                        }
                    }
                    _ => {}
                }
            }

            for a in 0..4 {
                let ga = [nodes[a], n + nodes[a], 2 * n + nodes[a]];
                for b in 0..4 {
                    let gb = [nodes[b], n + nodes[b], 2 * n + nodes[b]];
                    for (la, ra) in [(a, 0), (4 + a, 1), (8 + a, 2)] {
                        for (lb, cb) in [(b, 0), (4 + b, 1), (8 + b, 2)] {
                            let v = local[la][lb];
                            if v != Complex64::default() {
                                mat.push(ga[ra], gb[cb], v)?;
                            }
                        }
                    }
                }
                rhs[nodes[a]] += local_rhs[a];
                rhs[n + nodes[a]] += local_rhs[4 + a];
            }
        }
    }

    if let RhsKind::Weighted(r) = rhs_kind {
        if r.grid != grid {
            return Err(PdeError::GridMismatch);
        }
        let w = grid.lumped_weights();
        for k in 0..n {
            rhs[k] = w[k] * r.comp(0)[k];
            rhs[n + k] = w[k] * r.comp(1)[k];
        }
    }

    let mut defect = None;
    if pin_pressure {
        // Net flux of the boundary data, computed from the element
        // integrals of div(g) with g zeroed away from Dirichlet nodes
        // so interior contributions cancel exactly.
        let mut g1 = vec![Complex64::default(); n];
        let mut g2 = vec![Complex64::default(); n];
        for k in problem.partition.dirichlet_indices() {
            g1[k] = dirichlet.comp(0)[k];
            g2[k] = dirichlet.comp(1)[k];
        }
        let mut flux = Complex64::default();
        for ej in 0..grid.ny - 1 {
            for ei in 0..grid.nx - 1 {
                let nodes = element_nodes(&grid, ei, ej);
                for q in &qp {
                    for b in 0..4 {
                        flux += q.w * (g1[nodes[b]] * q.dndx[b] + g2[nodes[b]] * q.dndy[b]);
                    }
                }
            }
        }
        let area = grid.lx * grid.ly;
        let w = grid.lumped_weights();
        for (k, wk) in w.iter().enumerate() {
            rhs[2 * n + k] += flux * (*wk / area);
        }
        defect = Some(-flux / area);
    }

    let mut constraints = ConstraintSet::new();
    for k in problem.partition.dirichlet_indices() {
        constraints.insert(k, dirichlet.comp(0)[k])?;
        constraints.insert(n + k, dirichlet.comp(1)[k])?;
    }
    if pin_pressure {
        constraints.insert(2 * n, Complex64::default())?;
    }
    apply_constraints(&mut mat, &mut rhs, &constraints)?;
    mat.finalize();
    Ok((mat, rhs, defect))
}

fn run_solve(
    grid: Grid,
    mat: &SparseMatrix,
    rhs: &[Complex64],
    tol: f64,
    defect: Option<Complex64>,
    cache: &mut FactorizationCache,
) -> Result<ForwardSolution, PdeError> {
    let (x, report) = solve_with_cache(mat, rhs, tol, cache)?;
    if !report.converged {
        return Err(PdeError::NearResonance { rel_residual: report.rel_residual });
    }
    let n = grid.len();
    let ax = mat.matvec(&x)?;
    let b_norm = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    let cont: f64 = (2 * n..3 * n)
        .map(|k| (ax[k] - rhs[k]).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / b_norm;

    let u = VectorField::from_components(
        ScalarField::from_values(grid, x[0..n].to_vec()).map_err(|_| PdeError::GridMismatch)?,
        ScalarField::from_values(grid, x[n..2 * n].to_vec())
            .map_err(|_| PdeError::GridMismatch)?,
    )
    .map_err(|_| PdeError::GridMismatch)?;
    let mut pvals = x[2 * n..3 * n].to_vec();
    if defect.is_some() {
        let w = grid.lumped_weights();
        let area = grid.lx * grid.ly;
        let mean = pvals
            .iter()
            .zip(&w)
            .map(|(v, wk)| v * *wk)
            .sum::<Complex64>()
            / area;
        for v in &mut pvals {
            *v -= mean;
        }
    }
    let p = ScalarField::from_values(grid, pvals).map_err(|_| PdeError::GridMismatch)?;
    Ok(ForwardSolution {
        u,
        p,
        report,
        continuity_residual: cont,
        mean_defect: defect,
    })
}

pub fn solve_forward_cached(
    problem: &ForwardProblem,
    cache: &mut FactorizationCache,
) -> Result<ForwardSolution, PdeError> {
    problem.validate()?;
    let (mat, rhs, defect) =
        assemble_stokes(problem, false, &problem.dirichlet, RhsKind::FromLoad(&problem.load))?;
    run_solve(problem.grid, &mat, &rhs, problem.solver_tol, defect, cache)
}

pub fn solve_forward(problem: &ForwardProblem) -> Result<ForwardSolution, PdeError> {
    solve_forward_cached(problem, &mut FactorizationCache::new())
}

/// Adjoint solve: conjugated modulus, homogeneous Dirichlet data, and
/// the given residual as a lumped-weight drive on the momentum rows.
pub fn solve_adjoint_cached(
    problem: &ForwardProblem,
    residual: &VectorField,
    cache: &mut FactorizationCache,
) -> Result<ForwardSolution, PdeError> {
    problem.validate()?;
    let zero = VectorField::zeros(problem.grid);
    let (mat, rhs, defect) = assemble_stokes(problem, true, &zero, RhsKind::Weighted(residual))?;
    run_solve(problem.grid, &mat, &rhs, problem.solver_tol, defect, cache)
}

pub fn solve_adjoint(
    problem: &ForwardProblem,
    residual: &VectorField,
) -> Result<ForwardSolution, PdeError> {
    solve_adjoint_cached(problem, residual, &mut FactorizationCache::new())
}

/// Assembled matrices for both orientations of the operator, exposed
/// for structural checks (operator equality for lossless media and the
/// discrete transpose identity between forward and adjoint).
pub fn assembled_pair(
    problem: &ForwardProblem,
) -> Result<(SparseMatrix, SparseMatrix, bool), PdeError> {
    problem.validate()?;
    let zero = VectorField::zeros(problem.grid);
    let (fwd, _, defect) =
        assemble_stokes(problem, false, &zero, RhsKind::FromLoad(&BodyLoad::None))?;
    let (adj, _, _) = assemble_stokes(problem, true, &zero, RhsKind::FromLoad(&BodyLoad::None))?;
    Ok((fwd, adj, defect.is_some()))
}

/// Nodal density `(2 / w_k) * integral N_k sym_grad u : sym_grad
/// conj(v)`, the exact derivative of element-assembled strain energies
/// with respect to the nodal modulus value. Dividing by the lumped
/// weight turns the assembled derivative back into a pointwise density.
pub fn shear_sensitivity_density(
    grid: &Grid,
    u: &VectorField,
    v: &VectorField,
) -> Result<ScalarField, PdeError> {
    if u.grid != *grid || v.grid != *grid {
        return Err(PdeError::GridMismatch);
    }
    let qp = quad_points(grid.hx(), grid.hy());
    let mut acc = vec![Complex64::default(); grid.len()];
    let (u1, u2) = (u.comp(0), u.comp(1));
    let (v1, v2) = (v.comp(0), v.comp(1));
    for ej in 0..grid.ny - 1 {
        for ei in 0..grid.nx - 1 {
            let nodes = element_nodes(grid, ei, ej);
            for q in &qp {
                let (mut uxx, mut uyy, mut uxy) = (
                    Complex64::default(),
                    Complex64::default(),
                    Complex64::default(),
                );
                let (mut vxx, mut vyy, mut vxy) = (
                    Complex64::default(),
                    Complex64::default(),
                    Complex64::default(),
                );
                for b in 0..4 {
                    let k = nodes[b];
                    uxx += u1[k] * q.dndx[b];
                    uyy += u2[k] * q.dndy[b];
                    uxy += 0.5 * (u1[k] * q.dndy[b] + u2[k] * q.dndx[b]);
                    vxx += v1[k] * q.dndx[b];
                    vyy += v2[k] * q.dndy[b];
                    vxy += 0.5 * (v1[k] * q.dndy[b] + v2[k] * q.dndx[b]);
                }
                let pairing = uxx * vxx.conj() + uyy * vyy.conj() + 2.0 * uxy * vxy.conj();
                for a in 0..4 {
                    acc[nodes[a]] += 2.0 * q.w * q.n[a] * pairing;
                }
            }
        }
    }
    let w = grid.lumped_weights();
    for (a, wk) in acc.iter_mut().zip(&w) {
        *a /= *wk;
    }
    ScalarField::from_values(*grid, acc).map_err(|_| PdeError::GridMismatch)
}

/// Scalar Poisson boundary conditions.
pub enum PoissonBc<'a> {
    /// Solution prescribed on every boundary node.
    Dirichlet(&'a ScalarField),
    /// Outward normal derivative prescribed on the boundary. The
    /// right-hand side is shifted by a constant to meet the
    /// compatibility condition and the solution mean is pinned to zero.
    Neumann(&'a ScalarField),
}

pub fn solve_poisson_scalar(
    grid: &Grid,
    rhs_field: &ScalarField,
    bc: PoissonBc,
) -> Result<(ScalarField, SolveReport), PdeError> {
    if rhs_field.grid != *grid {
        return Err(PdeError::GridMismatch);
    }
    let n = grid.len();
    let neumann = matches!(bc, PoissonBc::Neumann(_));
    let mut mat = SparseMatrix::new(n);
    let mut rhs = vec![Complex64::default(); n];
    let qp = quad_points(grid.hx(), grid.hy());
    let f = rhs_field.values();

    for ej in 0..grid.ny - 1 {
        for ei in 0..grid.nx - 1 {
            let nodes = element_nodes(grid, ei, ej);
            let mut local = [[0.0f64; 4]; 4];
            let mut lrhs = [Complex64::default(); 4];
            for q in &qp {
                let mut f_q = Complex64::default();
                for b in 0..4 {
                    f_q += f[nodes[b]] * q.n[b];
                }
                for a in 0..4 {
                    for b in 0..4 {
                        local[a][b] += q.w * (q.dndx[a] * q.dndx[b] + q.dndy[a] * q.dndy[b]);
                    }
                    lrhs[a] -= f_q * q.n[a] * q.w;
                }
            }
            for a in 0..4 {
                for b in 0..4 {
                    mat.push(nodes[a], nodes[b], Complex64::from(local[a][b]))?;
                }
                rhs[nodes[a]] += lrhs[a];
            }
        }
    }

    match bc {
        PoissonBc::Dirichlet(values) => {
            if values.grid != *grid {
                return Err(PdeError::GridMismatch);
            }
            let mut cs = ConstraintSet::new();
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    if grid.is_boundary(i, j) {
                        cs.insert(grid.idx(i, j), values.at(i, j))?;
                    }
                }
            }
            apply_constraints(&mut mat, &mut rhs, &cs)?;
        }
        PoissonBc::Neumann(flux) => {
            if flux.grid != *grid {
                return Err(PdeError::GridMismatch);
            }
            // trapezoid rule along each boundary edge
            let fv = flux.values();
            let mut add_edge = |a: usize, b: usize, len: f64| {
                rhs[a] += 0.5 * len * fv[a];
                rhs[b] += 0.5 * len * fv[b];
            };
            for i in 0..grid.nx - 1 {
                add_edge(grid.idx(i, 0), grid.idx(i + 1, 0), grid.hx());
                add_edge(grid.idx(i, grid.ny - 1), grid.idx(i + 1, grid.ny - 1), grid.hx());
            }
            for j in 0..grid.ny - 1 {
                add_edge(grid.idx(0, j), grid.idx(0, j + 1), grid.hy());
                add_edge(grid.idx(grid.nx - 1, j), grid.idx(grid.nx - 1, j + 1), grid.hy());
            }
            // compatibility shift spread with the area weights; after
            // it the mean-pinning multiplier would be zero, so the
            // nullspace is removed by grounding one node instead and
            // shifting the solved field to zero weighted mean
            let w = grid.lumped_weights();
            let total: Complex64 = rhs[..n].iter().sum();
            let area = grid.lx * grid.ly;
            for k in 0..n {
                rhs[k] -= total * (w[k] / area);
            }
            let mut cs = ConstraintSet::new();
            cs.insert(0, Complex64::default())?;
            apply_constraints(&mut mat, &mut rhs, &cs)?;
        }
    }
    mat.finalize();
    let (mut x, report) = crate::linsys::solve(&mat, &rhs, 1e-10)?;
    if !report.converged {
        return Err(PdeError::NearResonance { rel_residual: report.rel_residual });
    }
    if neumann {
        let w = grid.lumped_weights();
        let area = grid.lx * grid.ly;
        let mean: Complex64 =
            x.iter().zip(&w).map(|(v, wk)| v * *wk).sum::<Complex64>() / area;
        for v in x.iter_mut() {
            *v -= mean;
        }
    }
    let field = ScalarField::from_values(*grid, x[..n].to_vec())
        .map_err(|_| PdeError::GridMismatch)?;
    Ok((field, report))
}

pub enum PoissonVectorBc<'a> {
    Dirichlet(&'a VectorField),
    Neumann(&'a VectorField),
}

/// Componentwise scalar Poisson solve for a vector right-hand side.
pub fn solve_poisson_vector(
    grid: &Grid,
    rhs: &VectorField,
    bc: PoissonVectorBc,
) -> Result<(VectorField, [SolveReport; 2]), PdeError> {
    let solve_one = |k: usize| match &bc {
        PoissonVectorBc::Dirichlet(v) => {
            let data = v.component(k);
            solve_poisson_scalar(grid, &rhs.component(k), PoissonBc::Dirichlet(&data))
        }
        PoissonVectorBc::Neumann(v) => {
            let data = v.component(k);
            solve_poisson_scalar(grid, &rhs.component(k), PoissonBc::Neumann(&data))
        }
    };
    let (f0, r0) = solve_one(0)?;
    let (f1, r1) = solve_one(1)?;
    let field = VectorField::from_components(f0, f1).map_err(|_| PdeError::GridMismatch)?;
    Ok((field, [r0, r1]))
}

/// Solves `lap w = -curl(f)` with prescribed boundary values, zero when
/// `boundary` is `None`. The curl is integrated by parts onto the test
/// functions, so only values of `f` enter the assembly. A `boundary`
/// slice must cover the whole grid; only boundary entries are read.
pub fn solve_poisson_rotational(
    grid: &Grid,
    f: &VectorField,
    boundary: Option<&[Complex64]>,
) -> Result<(ScalarField, SolveReport), PdeError> {
    if f.grid != *grid {
        return Err(PdeError::GridMismatch);
    }
    if let Some(b) = boundary {
        if b.len() != grid.len() {
            return Err(PdeError::GridMismatch);
        }
    }
    let n = grid.len();
    let mut mat = SparseMatrix::new(n);
    let mut rhs = vec![Complex64::default(); n];
    let qp = quad_points(grid.hx(), grid.hy());
    let (f1, f2) = (f.comp(0), f.comp(1));

    for ej in 0..grid.ny - 1 {
        for ei in 0..grid.nx - 1 {
            let nodes = element_nodes(grid, ei, ej);
            let mut local = [[0.0f64; 4]; 4];
            let mut lrhs = [Complex64::default(); 4];
            for q in &qp {
                let mut f1_q = Complex64::default();
                let mut f2_q = Complex64::default();
                for b in 0..4 {
                    f1_q += f1[nodes[b]] * q.n[b];
                    f2_q += f2[nodes[b]] * q.n[b];
                }
                for a in 0..4 {
                    for b in 0..4 {
                        local[a][b] += q.w * (q.dndx[a] * q.dndx[b] + q.dndy[a] * q.dndy[b]);
                    }
                    lrhs[a] += q.w * (f1_q * q.dndy[a] - f2_q * q.dndx[a]);
                }
            }
            for a in 0..4 {
                for b in 0..4 {
                    mat.push(nodes[a], nodes[b], Complex64::from(local[a][b]))?;
                }
                rhs[nodes[a]] += lrhs[a];
            }
        }
    }

    let mut cs = ConstraintSet::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if grid.is_boundary(i, j) {
                let k = grid.idx(i, j);
                let val = boundary.map_or(Complex64::default(), |b| b[k]);
                cs.insert(k, val)?;
            }
        }
    }
    apply_constraints(&mut mat, &mut rhs, &cs)?;
    mat.finalize();
    let (x, report) = crate::linsys::solve(&mat, &rhs, 1e-10)?;
    if !report.converged {
        return Err(PdeError::NearResonance { rel_residual: report.rel_residual });
    }
    let field =
        ScalarField::from_values(*grid, x).map_err(|_| PdeError::GridMismatch)?;
    Ok((field, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_problem(g: Grid) -> ForwardProblem {
        ForwardProblem {
            grid: g,
            modulus: ScalarField::constant(g, Complex64::new(4.0e4, 6.0e3)),
            omega: 2.0 * std::f64::consts::PI * 70.0,
            rho: 1.0,
            partition: BoundaryPartition::bottom_dirichlet(&g),
            dirichlet: VectorField::zeros(g),
            load: BodyLoad::None,
            stabilization: 0.1,
            solver_tol: 1e-10,
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let g = Grid::square(9, 10.0).unwrap();
        let sol = solve_forward(&tiny_problem(g)).unwrap();
        assert!(sol.u.linf() < 1e-12);
        assert!(sol.p.linf() < 1e-9);
    }

    #[test]
    fn zero_residual_gives_zero_adjoint() {
        let g = Grid::square(9, 10.0).unwrap();
        let p = tiny_problem(g);
        let sol = solve_adjoint(&p, &VectorField::zeros(g)).unwrap();
        assert!(sol.u.linf() < 1e-12);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let g = Grid::square(9, 10.0).unwrap();
        let other = Grid::square(7, 10.0).unwrap();
        let mut p = tiny_problem(g);
        p.modulus = ScalarField::zeros(other);
        assert!(matches!(solve_forward(&p), Err(PdeError::GridMismatch)));
    }
}
