//! The `solve`, `sweep`, `spectrum` and `validate` commands.

use std::io::Write;
use std::path::{Path, PathBuf};

use bloch_core::solvers::solve;
use bloch_core::spectral::{collision_spectrum, eigendecompose, odd_sector_max};
use bloch_core::transport::{relaxation_time, sweep, temperature_grid, write_phi_csv, FailureCategory};
use bloch_core::validation::{self, ValidationConfig};
use bloch_core::Assembly;
use serde_json::json;

use crate::config::{Format, RunConfig};
use crate::CliError;

fn io_err(e: std::io::Error) -> CliError {
    CliError::Usage(format!("i/o error: {e}"))
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("invalid output path {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let res = std::fs::write(&tmp, bytes).and_then(|_| std::fs::rename(&tmp, path));
    if let Err(e) = res {
        let _ = std::fs::remove_file(&tmp);
        return Err(CliError::Usage(format!(
            "cannot write {}: {e}",
            path.display()
        )));
    }
    Ok(())
}

fn json_bytes(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s.into_bytes()
}

fn metadata(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "spec": cfg.spec.as_str(),
        "alpha": cfg.alpha,
        "beta": cfg.beta,
        "gap": cfg.gap,
        "ef_ratio": cfg.ef_ratio,
        "grid_n": cfg.grid_n,
        "grid_xmax": cfg.grid_xmax,
        "method": cfg.method.as_str(),
        "include_k1": cfg.include_k1,
    })
}

pub fn cmd_solve(cfg: &RunConfig, out: &mut dyn Write, _err: &mut dyn Write) -> Result<(), CliError> {
    let spec = cfg.spectrum()?;
    let grid = cfg.grid()?;
    let assembly = Assembly::new(&grid, &spec, cfg.temp, cfg.allow_high_temperature)?;
    let phi = solve(cfg.method, &assembly, &cfg.solver_options())?;
    let tau = relaxation_time(&phi, &grid)?;
    let sigma = tau;
    if let Some(path) = &cfg.out {
        let bytes = match cfg.format {
            Format::Csv => {
                let mut buf = Vec::new();
                write_phi_csv(&phi, &grid, &mut buf)?;
                buf
            }
            Format::Json => json_bytes(&json!({
                "metadata": metadata(cfg),
                "T": cfg.temp,
                "tau": tau,
                "sigma": sigma,
                "residual": phi.residual,
                "x": grid.nodes(),
                "phi": phi.phi,
                "phi_even": phi.phi_even,
                "phi_odd": phi.phi_odd,
            })),
        };
        write_atomic(path, &bytes)?;
    }
    writeln!(
        out,
        "T = {:e}  tau = {:e}  sigma = {:e}  method = {}  residual = {:e}",
        cfg.temp, tau, sigma, cfg.method, phi.residual
    )
    .map_err(io_err)
}

/// Path of the JSON written next to a CSV sweep.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn cmd_sweep(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let spec = cfg.spectrum()?;
    let grid = cfg.grid()?;
    let temps = temperature_grid(cfg.tmin, cfg.tmax, cfg.npoints, cfg.log_spacing)?;
    let result = sweep(&spec, cfg.method, &temps, &grid, &cfg.solver_options())?;

    for f in &result.failures {
        writeln!(err, "warning: T = {:e} skipped: {}", f.t, f.error).map_err(io_err)?;
    }
    if result.points.is_empty() {
        let first = &result.failures[0];
        let msg = format!("no temperature could be solved; first failure: {}", first.error);
        return Err(match first.category {
            FailureCategory::Regime => CliError::Regime(msg),
            FailureCategory::Numerical => CliError::Numerical(msg),
            FailureCategory::Other => CliError::Usage(msg),
        });
    }

    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    let doc = json!({
        "metadata": metadata(cfg),
        "points": result.points,
        "failures": result.failures,
        "fit": result.fit,
    });
    match (&cfg.out, cfg.format) {
        (Some(path), Format::Csv) => {
            write_atomic(path, &csv)?;
            write_atomic(&sidecar_path(path), &json_bytes(&doc))?;
        }
        (Some(path), Format::Json) => write_atomic(path, &json_bytes(&doc))?,
        (None, Format::Csv) => out.write_all(&csv).map_err(io_err)?,
        (None, Format::Json) => out.write_all(&json_bytes(&doc)).map_err(io_err)?,
    }

    let summary: &mut dyn Write = if cfg.out.is_some() { out } else { err };
    match &result.fit {
        Some(f) => writeln!(
            summary,
            "exponent = {:.6} ± {:.2e} ({} points, method {})",
            f.exponent, f.stderr, f.points, cfg.method
        ),
        None => writeln!(
            summary,
            "no power-law fit ({} points solved, at least 5 spanning half a decade needed)",
            result.points.len()
        ),
    }
    .map_err(io_err)
}

pub fn cmd_spectrum(cfg: &RunConfig, out: &mut dyn Write, _err: &mut dyn Write) -> Result<(), CliError> {
    let spec = cfg.spectrum()?;
    let grid = cfg.grid()?;
    let assembly = Assembly::new(&grid, &spec, cfg.temp, cfg.allow_high_temperature)?;
    let measure = assembly.measure();
    let result = eigendecompose(&assembly.symmetrized()?, &measure)?;
    let coll = collision_spectrum(&result);
    let lambda_star = 1.0 - result.gap;
    let lambda_odd = odd_sector_max(&result, &measure, |i| grid.mirror(i));

    if let Some(path) = &cfg.out {
        let bytes = match cfg.format {
            Format::Csv => {
                let mut s = String::from("index,eigenvalue\n");
                for (i, l) in result.eigenvalues.iter().enumerate() {
                    s.push_str(&format!("{i},{l:.16e}\n"));
                }
                s.into_bytes()
            }
            Format::Json => json_bytes(&json!({
                "metadata": metadata(cfg),
                "T": cfg.temp,
                "eigenvalues": result.eigenvalues,
                "gap": result.gap,
                "hs_norm": result.hs_norm,
                "frobenius_norm": result.frobenius_norm,
            })),
        };
        write_atomic(path, &bytes)?;
    }

    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(io_err);
    w(out, format!("lambda0 = {:.6}", result.eigenvalues[0]))?;
    w(out, format!("lambda* = {lambda_star:.6} (odd sector {lambda_odd:.6})"))?;
    w(out, format!("spectral gap = {:.6}", result.gap))?;
    w(
        out,
        format!(
            "multiplicity of eigenvalue 1: {} ({})",
            coll.near_zero_count,
            if coll.near_zero_count == 1 { "ok" } else { "FAIL" }
        ),
    )?;
    w(out, format!("hilbert-schmidt norm = {:.10}", result.hs_norm))?;
    if coll.passes() {
        Ok(())
    } else {
        Err(CliError::Verification(
            "collision spectrum is not of the expected form".into(),
        ))
    }
}

pub fn cmd_validate(cfg: &RunConfig, out: &mut dyn Write, _err: &mut dyn Write) -> Result<(), CliError> {
    let vc = ValidationConfig {
        spectrum: cfg.spectrum()?,
        grid: cfg.grid()?,
        t: cfg.temp,
        options: cfg.solver_options(),
        tolerance_override: cfg.tolerance,
    };
    let report = validation::run(&vc)?;
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    writeln!(out, "{:width$}  {:>10}  {:>10}  result", "check", "value", "tolerance").map_err(io_err)?;
    for c in &report.checks {
        writeln!(
            out,
            "{:width$}  {:>10.2e}  {:>10.2e}  {}",
            c.name,
            c.value,
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" }
        )
        .map_err(io_err)?;
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} of {} checks passed", report.checks.len() - failed, report.checks.len())
        .map_err(io_err)?;
    if let Some(path) = &cfg.out {
        write_atomic(path, &json_bytes(&serde_json::to_value(&report).expect("serializable")))?;
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Verification(format!("{failed} check(s) failed")))
    }
}
