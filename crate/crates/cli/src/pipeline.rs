//! Named experiment pipelines and their artifact sets.
//!
//! `run` executes one configuration end to end: acquire measured data
//! (solve a catalog phantom or load a field file), optionally inject
//! seeded noise, hand the data to the named pipeline, and write every
//! artifact plus a checksummed manifest into the output directory. A
//! solver failure still leaves the artifacts produced so far and a
//! manifest with a failure status on disk.

use crate::config::{ExperimentConfig, InitMethod, Pipeline};
use crate::image;
use crate::manifest::{sha256_hex, ArtifactEntry, RunManifest, SolveSummary};
use crate::metrics::edge_response_width;
use elastoscope_core::field::{ScalarField, VectorField};
use elastoscope_core::grid::{BoundaryPartition, Grid, NodeMask};
use elastoscope_core::material::MaterialMap;
use elastoscope_core::pde::{solve_adjoint, solve_forward, BodyLoad, ForwardProblem};
use elastoscope_core::phantom::{
    add_noise, generate_data, relative_error, DriveConfig, NoiseSpec, Phantom,
};
use elastoscope_core::recon::algebraic::algebraic_inversion;
use elastoscope_core::recon::descent::{reconstruct, IterationTrace};
use elastoscope_core::recon::hybrid::hybrid_initial_guess;
use elastoscope_core::recon::local::{reconstruct_local, Subdomain};
use elastoscope_core::recon::{frechet_gradient, misfit, Experiment, GradientPair};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Run(String),
    #[error("assertion failed: {0}")]
    Assert(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 3,
            CliError::Assert(_) => 4,
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Collects artifact files as they are written so the manifest can list
/// them with checksums.
struct Artifacts {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl Artifacts {
    fn new(dir: &Path) -> Self {
        Artifacts { dir: dir.to_path_buf(), entries: Vec::new() }
    }

    fn put_bytes(
        &mut self,
        name: &str,
        kind: &str,
        bytes: &[u8],
        range: Option<(f64, f64)>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))?;
        self.entries.push(ArtifactEntry {
            file: name.to_string(),
            kind: kind.to_string(),
            sha256: sha256_hex(bytes),
            min: range.map(|r| r.0),
            max: range.map(|r| r.1),
        });
        Ok(())
    }

    fn scalar_csv(&mut self, name: &str, field: &ScalarField) -> Result<(), CliError> {
        self.put_bytes(name, "csv", field.to_csv_string().as_bytes(), None)
    }

    fn vector_csv(&mut self, name: &str, field: &VectorField) -> Result<(), CliError> {
        self.put_bytes(name, "csv", field.to_csv_string().as_bytes(), None)
    }

    fn real_csv(&mut self, name: &str, grid: Grid, values: &[f64]) -> Result<(), CliError> {
        let field = ScalarField::from_real(grid, values)
            .map_err(|e| CliError::Run(format!("{name}: {e}")))?;
        self.scalar_csv(name, &field)
    }

    fn pgm(&mut self, name: &str, grid: Grid, values: &[f64]) -> Result<(), CliError> {
        let r = image::render_pgm(grid.nx, grid.ny, values);
        self.put_bytes(name, "pgm", &r.bytes.clone(), Some((r.min, r.max)))
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Run(format!("{name}: {e}")))?;
        self.put_bytes(name, "json", text.as_bytes(), None)
    }
}

struct RunContext {
    arts: Artifacts,
    timings: BTreeMap<String, f64>,
    solves: Vec<SolveSummary>,
    warnings: Vec<String>,
    metrics: Map<String, Value>,
}

impl RunContext {
    fn metric_f(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.to_string(), json!(v));
    }

    fn metric_u(&mut self, key: &str, v: usize) {
        self.metrics.insert(key.to_string(), json!(v));
    }

    fn metric_s(&mut self, key: &str, v: &str) {
        self.metrics.insert(key.to_string(), json!(v));
    }
}

struct Acquired {
    um: VectorField,
    pressure: Option<ScalarField>,
    truth: Option<MaterialMap>,
    phantom: Option<Phantom>,
    mu0: f64,
    eta0: f64,
}

struct ExecOutcome {
    method: String,
    assert: Option<String>,
}

fn re_parts(values: &[Complex64]) -> Vec<f64> {
    values.iter().map(|v| v.re).collect()
}

fn im_parts(values: &[Complex64]) -> Vec<f64> {
    values.iter().map(|v| v.im).collect()
}

/// Runs one configured experiment and writes its artifacts. `out` and
/// `seed` override the corresponding config fields when given.
pub fn run(
    cfg_in: &ExperimentConfig,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<RunManifest, CliError> {
    let mut cfg = cfg_in.clone();
    if let Some(dir) = out {
        cfg.output_dir = dir.to_path_buf();
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| {
        CliError::Run(format!("cannot create {}: {e}", cfg.output_dir.display()))
    })?;

    let start = Instant::now();
    let mut ctx = RunContext {
        arts: Artifacts::new(&cfg.output_dir),
        timings: BTreeMap::new(),
        solves: Vec::new(),
        warnings: Vec::new(),
        metrics: Map::new(),
    };

    let outcome = execute(&cfg, grid, &mut ctx);
    ctx.timings.insert("total".into(), start.elapsed().as_secs_f64());

    let (method, status, failure) = match &outcome {
        Ok(o) => match &o.assert {
            None => (o.method.clone(), "ok".to_string(), None),
            Some(msg) => (
                o.method.clone(),
                format!("assert-failed: {msg}"),
                Some(CliError::Assert(msg.clone())),
            ),
        },
        Err(e) => (
            cfg.pipeline.name().to_string(),
            format!("failed: {e}"),
            None,
        ),
    };

    ctx.arts.json("metrics.json", &ctx.metrics)?;
    let manifest = RunManifest {
        pipeline: cfg.pipeline.name().to_string(),
        method,
        grid: cfg.grid,
        phantom_id: cfg
            .phantom
            .id
            .map(|id| serde_json::to_value(id).expect("id serializes"))
            .and_then(|v| v.as_str().map(str::to_string)),
        seed: cfg.seed,
        status,
        config: serde_json::to_value(&cfg).expect("config serializes"),
        timings_s: ctx.timings,
        solves: ctx.solves,
        warnings: ctx.warnings,
        metrics: ctx.metrics,
        artifacts: ctx.arts.entries,
    };
    manifest
        .write(&cfg.output_dir)
        .map_err(|e| CliError::Run(format!("cannot write manifest: {e}")))?;

    match outcome {
        Ok(_) => match failure {
            None => Ok(manifest),
            Some(e) => Err(e),
        },
        Err(e) => Err(e),
    }
}

fn execute(
    cfg: &ExperimentConfig,
    grid: Grid,
    ctx: &mut RunContext,
) -> Result<ExecOutcome, CliError> {
    let omega = cfg.omega();
    let t_data = Instant::now();
    let acquired = acquire(cfg, grid, ctx)?;
    let um = match &cfg.noise {
        Some(n) if n.level > 0.0 => {
            let r = &n.region;
            let region = grid
                .mask_where(|x, y| x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1);
            let spec = NoiseSpec {
                level: n.level,
                region,
                seed: n.seed.unwrap_or(cfg.seed),
            };
            add_noise(&acquired.um, &spec).map_err(|e| CliError::Run(e.to_string()))?
        }
        _ => acquired.um.clone(),
    };
    ctx.arts.vector_csv("um.csv", &um)?;
    ctx.timings.insert("data".into(), t_data.elapsed().as_secs_f64());

    let support = grid.interior_mask(cfg.phantom.collar);
    let t_pipe = Instant::now();
    let outcome = match cfg.pipeline {
        Pipeline::Forward => forward_pipeline(ctx, grid, &um, &acquired),
        Pipeline::InvertAlgebraic | Pipeline::InvertHybrid => {
            one_step_pipeline(cfg, ctx, grid, &um, &acquired, &support, omega)
        }
        Pipeline::InvertAdjoint => {
            adjoint_pipeline(cfg, ctx, grid, &um, &acquired, &support, omega)
        }
        Pipeline::InvertLocal => {
            local_pipeline(cfg, ctx, grid, &um, &acquired, &support, omega)
        }
        Pipeline::GradientCheck => {
            gradient_check_pipeline(cfg, ctx, grid, &um, &acquired, &support, omega)
        }
    };
    ctx.timings.insert("pipeline".into(), t_pipe.elapsed().as_secs_f64());
    outcome
}

fn acquire(
    cfg: &ExperimentConfig,
    grid: Grid,
    ctx: &mut RunContext,
) -> Result<Acquired, CliError> {
    let support = grid.interior_mask(cfg.phantom.collar);
    if let Some(id) = cfg.phantom.id {
        let phantom = Phantom::catalog(id, cfg.omega());
        let drive = DriveConfig {
            frequency_hz: cfg.frequency_hz,
            rho: cfg.rho,
            amplitude: cfg.phantom.amplitude,
            refine: cfg.phantom.refine,
            collar: cfg.phantom.collar,
            ..DriveConfig::default()
        };
        let data = generate_data(&phantom, grid, &drive)
            .map_err(|e| CliError::Run(format!("data generation: {e}")))?;
        ctx.solves.push(SolveSummary {
            stage: "forward-data".into(),
            converged: data.report.converged,
            iterations: data.report.iterations,
            rel_residual: data.report.rel_residual,
        });
        ctx.metric_f("continuity_residual", data.continuity_residual);
        let truth = phantom
            .sample(grid, support)
            .map_err(|e| CliError::Run(format!("phantom sampling: {e}")))?;
        ctx.arts
            .put_bytes("phantom.json", "json", phantom.to_json().as_bytes(), None)?;
        Ok(Acquired {
            um: data.um,
            pressure: Some(data.pressure),
            mu0: phantom.mu0,
            eta0: phantom.eta0,
            truth: Some(truth),
            phantom: Some(phantom),
        })
    } else {
        let path = cfg.phantom.input.as_ref().expect("validated source");
        let um = VectorField::read_csv(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if um.grid != grid {
            return Err(CliError::Config(format!(
                "{}: field grid {}x{} does not match configured {}x{}",
                path.display(),
                um.grid.nx,
                um.grid.ny,
                grid.nx,
                grid.ny
            )));
        }
        let bg = cfg.background.expect("validated background");
        Ok(Acquired {
            um,
            pressure: None,
            mu0: bg.mu,
            eta0: bg.eta,
            truth: None,
            phantom: None,
        })
    }
}

fn forward_pipeline(
    ctx: &mut RunContext,
    grid: Grid,
    um: &VectorField,
    acquired: &Acquired,
) -> Result<ExecOutcome, CliError> {
    ctx.arts.pgm("u1_re.pgm", grid, &re_parts(um.comp(0)))?;
    ctx.arts.pgm("u1_im.pgm", grid, &im_parts(um.comp(0)))?;
    ctx.arts.pgm("u2_re.pgm", grid, &re_parts(um.comp(1)))?;
    ctx.arts.pgm("u2_im.pgm", grid, &im_parts(um.comp(1)))?;
    if let Some(p) = &acquired.pressure {
        ctx.arts.scalar_csv("pressure.csv", p)?;
    }
    if let Some(truth) = &acquired.truth {
        ctx.arts.real_csv("mu_true.csv", grid, truth.mu())?;
        ctx.arts.real_csv("eta_true.csv", grid, truth.eta())?;
        ctx.arts.pgm("mu_true.pgm", grid, truth.mu())?;
        ctx.arts.pgm("eta_true.pgm", grid, truth.eta())?;
    }
    Ok(ExecOutcome { method: "forward".into(), assert: None })
}

fn one_step_map(
    method: InitMethod,
    cfg: &ExperimentConfig,
    um: &VectorField,
    acquired: &Acquired,
    support: &NodeMask,
    omega: f64,
) -> Result<MaterialMap, CliError> {
    let opts = &cfg.init_options;
    let (mu0, eta0) = (acquired.mu0, acquired.eta0);
    let map = match method {
        InitMethod::Constant => MaterialMap::from_values(
            um.grid,
            vec![mu0; um.grid.len()],
            vec![eta0; um.grid.len()],
            mu0,
            eta0,
            support.clone(),
            cfg.optimizer.bounds(),
        )
        .map_err(|e| CliError::Run(e.to_string()))?,
        InitMethod::Algebraic => {
            let c0 = Complex64::new(mu0, omega * eta0);
            let (field, _) = algebraic_inversion(
                um,
                opts.direction,
                omega,
                cfg.rho,
                opts.floor,
                c0,
            )
            .map_err(|e| CliError::Run(e.to_string()))?;
            MaterialMap::from_complex_modulus(
                &field,
                omega,
                mu0,
                eta0,
                support.clone(),
                cfg.optimizer.bounds(),
            )
            .map_err(|e| CliError::Run(e.to_string()))?
        }
        InitMethod::Hybrid => {
            let guess = hybrid_initial_guess(
                um,
                omega,
                cfg.rho,
                mu0,
                eta0,
                support.clone(),
                &opts.to_hybrid(),
            )
            .map_err(|e| CliError::Run(e.to_string()))?;
            match cfg.optimizer.bounds() {
                None => guess,
                Some(b) => MaterialMap::from_values(
                    um.grid,
                    guess.mu().to_vec(),
                    guess.eta().to_vec(),
                    mu0,
                    eta0,
                    support.clone(),
                    Some(b),
                )
                .map_err(|e| CliError::Run(e.to_string()))?,
            }
        }
    };
    Ok(map)
}

fn record_errors(
    ctx: &mut RunContext,
    rec: &MaterialMap,
    truth: Option<&MaterialMap>,
    region: &NodeMask,
    prefix: &str,
) -> Result<(), CliError> {
    if let Some(t) = truth {
        let (e_mu, e_eta) =
            relative_error(rec, t, region).map_err(|e| CliError::Run(e.to_string()))?;
        ctx.metric_f(&format!("err_mu{prefix}"), e_mu);
        ctx.metric_f(&format!("err_eta{prefix}"), e_eta);
    }
    Ok(())
}

fn one_step_pipeline(
    cfg: &ExperimentConfig,
    ctx: &mut RunContext,
    grid: Grid,
    um: &VectorField,
    acquired: &Acquired,
    support: &NodeMask,
    omega: f64,
) -> Result<ExecOutcome, CliError> {
    let method = match cfg.pipeline {
        Pipeline::InvertAlgebraic => InitMethod::Algebraic,
        _ => InitMethod::Hybrid,
    };
    if method == InitMethod::Algebraic {
        let c0 = Complex64::new(acquired.mu0, omega * acquired.eta0);
        let (_, trusted) = algebraic_inversion(
            um,
            cfg.init_options.direction,
            omega,
            cfg.rho,
            cfg.init_options.floor,
            c0,
        )
        .map_err(|e| CliError::Run(e.to_string()))?;
        ctx.metric_f(
            "trusted_fraction",
            trusted.count() as f64 / grid.len() as f64,
        );
    }
    let rec = one_step_map(method, cfg, um, acquired, support, omega)?;
    ctx.arts.real_csv("mu.csv", grid, rec.mu())?;
    ctx.arts.real_csv("eta.csv", grid, rec.eta())?;
    ctx.arts.pgm("mu.pgm", grid, rec.mu())?;
    ctx.arts.pgm("eta.pgm", grid, rec.eta())?;
    record_errors(ctx, &rec, acquired.truth.as_ref(), support, "")?;
    if let Some(ph) = &acquired.phantom {
        if let Some(w) = edge_response_width(&rec, ph) {
            ctx.metric_f("edge_response_width_cm", w);
        }
    }
    Ok(ExecOutcome { method: method.name().to_string(), assert: None })
}

fn trace_metrics(ctx: &mut RunContext, trace: &IterationTrace) {
    if let Some(first) = trace.rows.first() {
        ctx.metric_f("j_initial", first.j);
        if let Some(e) = first.err_mu {
            ctx.metric_f("err_mu_initial", e);
        }
        if let Some(e) = first.err_eta {
            ctx.metric_f("err_eta_initial", e);
        }
    }
    if let Some(last) = trace.rows.last() {
        ctx.metric_f("j_final", last.j);
        ctx.metric_u("iterations", last.iter);
        if let Some(e) = last.err_mu {
            ctx.metric_f("err_mu_final", e);
        }
        if let Some(e) = last.err_eta {
            ctx.metric_f("err_eta_final", e);
        }
    }
    if let (Some(f), Some(l)) = (trace.rows.first(), trace.rows.last()) {
        if l.j > 0.0 {
            ctx.metric_f("j_reduction", f.j / l.j);
        }
    }
    ctx.metric_s("termination", &format!("{:?}", trace.status));
    ctx.warnings.extend(trace.warnings.iter().cloned());
}

fn adjoint_pipeline(
    cfg: &ExperimentConfig,
    ctx: &mut RunContext,
    grid: Grid,
    um: &VectorField,
    acquired: &Acquired,
    support: &NodeMask,
    omega: f64,
) -> Result<ExecOutcome, CliError> {
    let init = one_step_map(cfg.init, cfg, um, acquired, support, omega)?;
    ctx.arts.real_csv("mu_init.csv", grid, init.mu())?;
    ctx.arts.real_csv("eta_init.csv", grid, init.eta())?;
    ctx.arts.pgm("mu_init.pgm", grid, init.mu())?;
    ctx.arts.pgm("eta_init.pgm", grid, init.eta())?;

    let exp = Experiment::new(omega, cfg.rho, BoundaryPartition::bottom_dirichlet(&grid));
    let (rec, trace) = reconstruct(
        um,
        &init,
        &exp,
        &cfg.optimizer.to_core(),
        acquired.truth.as_ref(),
    )
    .map_err(|e| CliError::Run(e.to_string()))?;

    ctx.arts
        .put_bytes("trace.csv", "csv", trace.to_csv_string().as_bytes(), None)?;
    ctx.arts.real_csv("mu_final.csv", grid, rec.mu())?;
    ctx.arts.real_csv("eta_final.csv", grid, rec.eta())?;
    ctx.arts.pgm("mu_final.pgm", grid, rec.mu())?;
    ctx.arts.pgm("eta_final.pgm", grid, rec.eta())?;
    trace_metrics(ctx, &trace);
    if let Some(ph) = &acquired.phantom {
        if let Some(w) = edge_response_width(&rec, ph) {
            ctx.metric_f("edge_response_width_cm", w);
        }
    }
    Ok(ExecOutcome {
        method: format!("adjoint-{}", cfg.init.name()),
        assert: None,
    })
}

fn local_pipeline(
    cfg: &ExperimentConfig,
    ctx: &mut RunContext,
    grid: Grid,
    um: &VectorField,
    acquired: &Acquired,
    support: &NodeMask,
    omega: f64,
) -> Result<ExecOutcome, CliError> {
    let block = cfg.subdomain.expect("validated subdomain");
    let sub = Subdomain {
        i0: block.i0,
        j0: block.j0,
        nx: block.nx,
        ny: block.ny,
    };
    let init = one_step_map(cfg.init, cfg, um, acquired, support, omega)?;
    ctx.arts.real_csv("mu_init.csv", grid, init.mu())?;
    ctx.arts.real_csv("eta_init.csv", grid, init.eta())?;

    let exp = Experiment::new(omega, cfg.rho, BoundaryPartition::bottom_dirichlet(&grid));
    let (rec, trace) = reconstruct_local(
        um,
        &init,
        &sub,
        &exp,
        &cfg.optimizer.to_core(),
        acquired.truth.as_ref(),
    )
    .map_err(|e| CliError::Run(e.to_string()))?;

    ctx.arts
        .put_bytes("trace.csv", "csv", trace.to_csv_string().as_bytes(), None)?;
    ctx.arts.real_csv("mu_final.csv", grid, rec.mu())?;
    ctx.arts.real_csv("eta_final.csv", grid, rec.eta())?;
    ctx.arts.pgm("mu_final.pgm", grid, rec.mu())?;
    ctx.arts.pgm("eta_final.pgm", grid, rec.eta())?;
    trace_metrics(ctx, &trace);

    let inner = NodeMask::from_fn(&grid, |i, j| {
        i > block.i0
            && i + 1 < block.i0 + block.nx
            && j > block.j0
            && j + 1 < block.j0 + block.ny
            && support.contains(grid.idx(i, j))
    });
    if inner.count() > 0 {
        record_errors(ctx, &rec, acquired.truth.as_ref(), &inner, "_final")?;
    }
    Ok(ExecOutcome {
        method: format!("local-{}", cfg.init.name()),
        assert: None,
    })
}

fn gradient_check_pipeline(
    cfg: &ExperimentConfig,
    ctx: &mut RunContext,
    grid: Grid,
    um: &VectorField,
    acquired: &Acquired,
    support: &NodeMask,
    omega: f64,
) -> Result<ExecOutcome, CliError> {
    let block = cfg.gradient_check.unwrap_or_default();
    let init = one_step_map(cfg.init, cfg, um, acquired, support, omega)?;
    let problem_at = |map: &MaterialMap| ForwardProblem {
        grid,
        modulus: map.complex_modulus(omega),
        omega,
        rho: cfg.rho,
        partition: BoundaryPartition::bottom_dirichlet(&grid),
        dirichlet: um.clone(),
        load: BodyLoad::None,
        stabilization: 0.1,
        solver_tol: 1e-8,
    };
    let misfit_at = |map: &MaterialMap| -> Result<f64, CliError> {
        let sol = solve_forward(&problem_at(map)).map_err(|e| CliError::Run(e.to_string()))?;
        misfit(&sol.u, um).map_err(|e| CliError::Run(e.to_string()))
    };

    let base = solve_forward(&problem_at(&init)).map_err(|e| CliError::Run(e.to_string()))?;
    ctx.solves.push(SolveSummary {
        stage: "forward-base".into(),
        converged: base.report.converged,
        iterations: base.report.iterations,
        rel_residual: base.report.rel_residual,
    });
    let residual = base.u.sub(um).map_err(|e| CliError::Run(e.to_string()))?;
    let adj = solve_adjoint(&problem_at(&init), &residual)
        .map_err(|e| CliError::Run(e.to_string()))?;
    ctx.solves.push(SolveSummary {
        stage: "adjoint-base".into(),
        converged: adj.report.converged,
        iterations: adj.report.iterations,
        rel_residual: adj.report.rel_residual,
    });
    let grad =
        frechet_gradient(&base.u, &adj.u, omega, support).map_err(|e| CliError::Run(e.to_string()))?;

    let weights = grid.lumped_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let t = block.step;
    let mut rel_errors = Vec::with_capacity(block.directions);
    for _ in 0..block.directions {
        let mut dir = GradientPair {
            grid,
            d_mu: (0..grid.len())
                .map(|_| rng.gen_range(-1.0..1.0) * acquired.mu0)
                .collect(),
            d_eta: (0..grid.len())
                .map(|_| rng.gen_range(-1.0..1.0) * acquired.eta0)
                .collect(),
        };
        dir.smooth(1.0);
        dir.zero_outside(support);
        let mut predicted = 0.0;
        for k in 0..grid.len() {
            predicted += weights[k] * (grad.d_mu[k] * dir.d_mu[k] + grad.d_eta[k] * dir.d_eta[k]);
        }
        let plus = misfit_at(&init.stepped(&dir.d_mu, &dir.d_eta, -t))?;
        let minus = misfit_at(&init.stepped(&dir.d_mu, &dir.d_eta, t))?;
        let observed = (plus - minus) / (2.0 * t);
        let rel = (observed - predicted).abs() / predicted.abs().max(f64::MIN_POSITIVE);
        rel_errors.push(rel);
    }
    let max_rel = rel_errors.iter().copied().fold(0.0f64, f64::max);
    ctx.metrics
        .insert("rel_errors".into(), json!(rel_errors));
    ctx.metric_f("max_rel_error", max_rel);
    ctx.metric_u("directions", block.directions);
    ctx.metric_f("step", t);
    ctx.metric_f("tolerance", block.tolerance);

    let assert = if max_rel <= block.tolerance {
        None
    } else {
        Some(format!(
            "max relative gradient error {max_rel:.3e} exceeds {:.1e}",
            block.tolerance
        ))
    };
    Ok(ExecOutcome { method: "gradient-check".into(), assert })
}
