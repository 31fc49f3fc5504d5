//! Side-by-side comparison of finished runs.

use crate::manifest::RunManifest;
use crate::pipeline::CliError;
use std::path::PathBuf;

/// Builds a CSV table comparing runs on the same phantom and grid,
/// sorted by final shear modulus error. Needs at least two run
/// directories, each holding a manifest written by `run`.
pub fn compare(dirs: &[PathBuf]) -> Result<String, CliError> {
    if dirs.len() < 2 {
        return Err(CliError::Config(
            "compare needs at least two run directories".into(),
        ));
    }
    let mut manifests = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let m = RunManifest::read(dir)
            .map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
        manifests.push((dir.clone(), m));
    }
    let (first_dir, first) = &manifests[0];
    for (dir, m) in &manifests[1..] {
        if m.grid != first.grid {
            return Err(CliError::Config(format!(
                "{} and {} ran on different grids",
                first_dir.display(),
                dir.display()
            )));
        }
        if m.phantom_id != first.phantom_id {
            return Err(CliError::Config(format!(
                "{} and {} ran on different phantoms",
                first_dir.display(),
                dir.display()
            )));
        }
    }

    struct Row {
        method: String,
        err_mu: Option<f64>,
        err_eta: Option<f64>,
        iterations: Option<f64>,
        wall: Option<f64>,
        edge: Option<f64>,
    }
    let mut rows: Vec<Row> = manifests
        .iter()
        .map(|(_, m)| Row {
            method: m.method.clone(),
            err_mu: m.metric("err_mu_final").or_else(|| m.metric("err_mu")),
            err_eta: m.metric("err_eta_final").or_else(|| m.metric("err_eta")),
            iterations: m.metric("iterations"),
            wall: m.timings_s.get("total").copied(),
            edge: m.metric("edge_response_width_cm"),
        })
        .collect();
    rows.sort_by(|a, b| {
        let ka = a.err_mu.unwrap_or(f64::INFINITY);
        let kb = b.err_mu.unwrap_or(f64::INFINITY);
        ka.partial_cmp(&kb)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.method.cmp(&b.method))
    });

    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    let int = |v: Option<f64>| v.map(|x| format!("{}", x as u64)).unwrap_or_default();
    let mut out = String::from("method,err_mu,err_eta,iterations,wall_time_s,edge_response_width_cm\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method,
            opt(r.err_mu),
            opt(r.err_eta),
            int(r.iterations),
            opt(r.wall),
            opt(r.edge)
        ));
    }
    Ok(out)
}
