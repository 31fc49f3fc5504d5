//! Projected gradient descent on the displacement misfit.
//!
//! Each iteration solves the forward problem at the current parameter
//! pair, drives the adjoint problem with the data residual, reads the
//! descent direction off the strain sensitivity density, and takes an
//! Armijo backtracking step projected onto the admissible box and the
//! support mask. The step seed doubles after every accepted step and
//! halves on rejection, so the search recovers the useful step scale on
//! its own regardless of the parameter magnitudes.

use super::{frechet_gradient, misfit, relative_error_masked, Experiment, ReconError};
use crate::field::VectorField;
use crate::material::MaterialMap;
use crate::pde::{solve_adjoint_cached, solve_forward_cached, BodyLoad, ForwardProblem};
use crate::linsys::FactorizationCache;
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Stop when both relative parameter updates fall below this.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Armijo sufficient decrease constant.
    pub armijo_c: f64,
    /// Step seed for the first iteration.
    pub delta_init: f64,
    /// Line search failure threshold.
    pub delta_min: f64,
    /// Gaussian blur width for the gradient, in cells. Zero disables.
    pub smooth_sigma: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            epsilon: 1e-4,
            max_iter: 200,
            armijo_c: 1e-4,
            delta_init: 1.0,
            delta_min: 1e-12,
            smooth_sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Both relative updates fell below epsilon, or the gradient
    /// vanished exactly.
    Converged,
    IterationCap,
    /// No step down to `delta_min` satisfied the sufficient decrease
    /// test.
    LineSearchFailed,
    /// A forward or adjoint solve failed mid-iteration; the trace and
    /// the last accepted iterate are preserved.
    SolverFailure,
}

#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iter: usize,
    pub j: f64,
    pub delta: f64,
    /// Relative L2 norm of the accepted modulus update.
    pub dmu_norm: f64,
    /// Relative L2 norm of the accepted viscosity update.
    pub deta_norm: f64,
    pub err_mu: Option<f64>,
    pub err_eta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    pub status: Termination,
    pub warnings: Vec<String>,
}

impl IterationTrace {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("iter,J,delta,dmu_norm,deta_norm,err_mu,err_eta\n");
        for r in &self.rows {
            let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iter,
                r.j,
                r.delta,
                r.dmu_norm,
                r.deta_norm,
                fmt_opt(r.err_mu),
                fmt_opt(r.err_eta)
            )
            .expect("string write");
        }
        out
    }

    pub fn final_j(&self) -> Option<f64> {
        self.rows.last().map(|r| r.j)
    }
}

fn rel_update(new: &[f64], old: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..new.len() {
        let d = new[k] - old[k];
        num += d * d;
        den += old[k] * old[k];
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

fn error_row(m: &MaterialMap, truth: Option<&MaterialMap>) -> (Option<f64>, Option<f64>) {
    match truth {
        Some(t) => (
            Some(relative_error_masked(m.mu(), t.mu(), &m.support)),
            Some(relative_error_masked(m.eta(), t.eta(), &m.support)),
        ),
        None => (None, None),
    }
}

/// Reconstructs the parameter pair from measured displacements by
/// misfit descent starting at `init`. The measured trace supplies the
/// Dirichlet data, so `um` must cover the Dirichlet part of the
/// boundary. Returns the final iterate and the per-iteration trace.
pub fn reconstruct(
    um: &VectorField,
    init: &MaterialMap,
    exp: &Experiment,
    cfg: &OptimizerConfig,
    truth: Option<&MaterialMap>,
) -> Result<(MaterialMap, IterationTrace), ReconError> {
    if um.grid != init.grid {
        return Err(ReconError::GridMismatch);
    }
    let mut cache = FactorizationCache::new();
    let mut current = init.clone();
    current.enforce();

    let mut prob = ForwardProblem {
        grid: init.grid,
        modulus: current.complex_modulus(exp.omega),
        omega: exp.omega,
        rho: exp.rho,
        partition: exp.partition.clone(),
        dirichlet: um.clone(),
        load: BodyLoad::None,
        stabilization: exp.stabilization,
        solver_tol: exp.solver_tol,
    };

    let mut warnings = Vec::new();
    let first = solve_forward_cached(&prob, &mut cache)?;
    if let Some(defect) = first.mean_defect {
        let area = prob.grid.lx * prob.grid.ly;
        let perimeter = 2.0 * (prob.grid.lx + prob.grid.ly);
        let scale = perimeter * um.linf();
        if scale > 0.0 && defect.norm() * area / scale > 1e-3 {
            warnings.push(format!(
                "boundary trace carries net flux (relative defect {:.3e}); \
                 solving against its compatible part",
                defect.norm() * area / scale
            ));
        }
    }
    let mut u = first.u;
    let mut j = misfit(&u, um)?;

    let (e_mu, e_eta) = error_row(&current, truth);
    let mut rows = vec![TraceRow {
        iter: 0,
        j,
        delta: 0.0,
        dmu_norm: 0.0,
        deta_norm: 0.0,
        err_mu: e_mu,
        err_eta: e_eta,
    }];

    let mut status = Termination::IterationCap;
    let mut delta_seed = cfg.delta_init;

    for iter in 1..=cfg.max_iter {
        let residual = u.sub(um).map_err(|_| ReconError::GridMismatch)?;
        let adj = match solve_adjoint_cached(&prob, &residual, &mut cache) {
            Ok(s) => s,
            Err(e) => {
                warnings.push(format!("iteration {iter}: adjoint solve failed: {e}"));
                status = Termination::SolverFailure;
                break;
            }
        };
        let mut grad = frechet_gradient(&u, &adj.u, exp.omega, &current.support)?;
        if cfg.smooth_sigma > 0.0 {
            grad.smooth(cfg.smooth_sigma);
            grad.zero_outside(&current.support);
        }
        let gnorm2 = grad.weighted_norm_sqr();
        if gnorm2 == 0.0 {
            status = Termination::Converged;
            break;
        }

        let mut delta = delta_seed;
        let mut accepted = None;
        loop {
            let trial = current.stepped(&grad.d_mu, &grad.d_eta, delta);
            prob.modulus = trial.complex_modulus(exp.omega);
            match solve_forward_cached(&prob, &mut cache) {
                Ok(sol) => {
                    let jt = misfit(&sol.u, um)?;
                    if jt <= j - cfg.armijo_c * delta * gnorm2 {
                        accepted = Some((trial, sol.u, jt));
                        break;
                    }
                }
                Err(e) => {
                    warnings.push(format!("iteration {iter}: forward solve failed: {e}"));
                    status = Termination::SolverFailure;
                    break;
                }
            }
            delta *= 0.5;
            if delta < cfg.delta_min {
                status = Termination::LineSearchFailed;
                break;
            }
        }
        let Some((trial, ut, jt)) = accepted else {
            break;
        };

        let dmu_norm = rel_update(trial.mu(), current.mu());
        let deta_norm = rel_update(trial.eta(), current.eta());
        current = trial;
        u = ut;
        j = jt;
        delta_seed = 2.0 * delta;

        let (e_mu, e_eta) = error_row(&current, truth);
        rows.push(TraceRow { iter, j, delta, dmu_norm, deta_norm, err_mu: e_mu, err_eta: e_eta });

        if dmu_norm <= cfg.epsilon && deta_norm <= cfg.epsilon {
            status = Termination::Converged;
            break;
        }
    }

    Ok((current, IterationTrace { rows, status, warnings }))
}
