//! Relaxation time, conductivity and temperature sweeps.
//!
//! `τ(T) = ½ ∑ q_i w(x_i) φ(x_i)`. With `n`, `e` and `m` set to one the Drude
//! conductivity is `σ = τ`.

use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::RateTable;
use crate::operators::Assembly;
use crate::quadrature::Grid;
use crate::solvers::{relaxation_time_of, solve, Method, SolutionPhi, SolverOptions};
use crate::spectra::ExcitationSpectrum;

/// Points needed for a power-law fit.
pub const MIN_FIT_POINTS: usize = 5;
/// Minimum `log₁₀(T_max/T_min)` spanned by a fit.
pub const MIN_FIT_DECADES: f64 = 0.5;

pub fn relaxation_time(phi: &SolutionPhi, grid: &Grid) -> Result<f64> {
    relaxation_time_of(&phi.phi, grid)
}

pub fn conductivity(phi: &SolutionPhi, grid: &Grid) -> Result<f64> {
    relaxation_time(phi, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportPoint {
    pub t: f64,
    pub tau: f64,
    pub sigma: f64,
    pub method: Method,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureCategory {
    Regime,
    Numerical,
    Other,
}

impl From<&Error> for FailureCategory {
    fn from(e: &Error) -> Self {
        match e {
            Error::Regime(_) | Error::InfraredDivergence(_) => FailureCategory::Regime,
            e if e.is_numerical() => FailureCategory::Numerical,
            _ => FailureCategory::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub t: f64,
    pub category: FailureCategory,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub stderr: f64,
    /// `ln` of the prefactor `A` in `τ = A T^k`.
    pub log_prefactor: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub spectrum: ExcitationSpectrum,
    pub method: Method,
    pub grid_n: usize,
    pub grid_x_max: f64,
    pub include_k1: bool,
    pub points: Vec<TransportPoint>,
    pub failures: Vec<SweepFailure>,
    pub fit: Option<PowerLawFit>,
}

/// Solves at one temperature.
pub fn solve_point(
    spec: &ExcitationSpectrum,
    method: Method,
    t: f64,
    grid: &Grid,
    opts: &SolverOptions,
) -> Result<(TransportPoint, SolutionPhi)> {
    let assembly = Assembly::new(grid, spec, t, opts.allow_high_temperature)?;
    point_from_assembly(&assembly, method, opts)
}

fn point_from_assembly(
    assembly: &Assembly,
    method: Method,
    opts: &SolverOptions,
) -> Result<(TransportPoint, SolutionPhi)> {
    let phi = solve(method, assembly, opts)?;
    let tau = relaxation_time(&phi, assembly.grid())?;
    if !tau.is_finite() {
        return Err(Error::Singular);
    }
    Ok((
        TransportPoint {
            t: assembly.t(),
            tau,
            sigma: tau,
            method,
            residual: phi.residual,
        },
        phi,
    ))
}

/// `n` temperatures between `t_min` and `t_max`, log-spaced if `log` is set.
pub fn temperature_grid(t_min: f64, t_max: f64, n: usize, log: bool) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max >= t_min && t_min.is_finite() && t_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "temperature range must satisfy 0 < tmin <= tmax, got [{t_min}, {t_max}]"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sweep needs at least one point".into()));
    }
    if n == 1 {
        return Ok(vec![t_min]);
    }
    Ok((0..n)
        .map(|k| {
            let f = k as f64 / (n - 1) as f64;
            if k == 0 {
                t_min
            } else if k == n - 1 {
                t_max
            } else if log {
                (t_min.ln() + f * (t_max / t_min).ln()).exp()
            } else {
                t_min + f * (t_max - t_min)
            }
        })
        .collect())
}

/// Solves at every temperature in parallel. Points that fail are recorded in
/// `failures`; the rest are sorted by `T`. The fit is attempted when enough
/// points succeeded.
pub fn sweep(
    spec: &ExcitationSpectrum,
    method: Method,
    temperatures: &[f64],
    grid: &Grid,
    opts: &SolverOptions,
) -> Result<SweepResult> {
    // Gapless spectra are scale free: one rate table serves every T.
    let shared = if spec.is_gapped() {
        None
    } else {
        temperatures
            .iter()
            .find(|t| spec.check_temperature(**t, opts.allow_high_temperature).is_ok())
            .map(|&t| RateTable::build(grid, spec, t))
            .transpose()?
    };

    let outcomes: Vec<(f64, Result<TransportPoint>)> = temperatures
        .par_iter()
        .map(|&t| {
            let run = || -> Result<TransportPoint> {
                spec.check_temperature(t, opts.allow_high_temperature)?;
                let assembly = match &shared {
                    Some(table) => Assembly::from_rates(table.at_temperature(t)?)?,
                    None => Assembly::new(grid, spec, t, opts.allow_high_temperature)?,
                };
                Ok(point_from_assembly(&assembly, method, opts)?.0)
            };
            (t, run())
        })
        .collect();

    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (t, r) in outcomes {
        match r {
            Ok(p) => points.push(p),
            Err(e) => {
                warn!("sweep point T = {t} failed: {e}");
                failures.push(SweepFailure {
                    t,
                    category: FailureCategory::from(&e),
                    error: e.to_string(),
                });
            }
        }
    }
    points.sort_by(|a, b| a.t.total_cmp(&b.t));
    failures.sort_by(|a, b| a.t.total_cmp(&b.t));
    let fit = if points.len() >= MIN_FIT_POINTS {
        match fit_power_law(&points) {
            Ok(f) => Some(f),
            Err(e) => {
                warn!("power-law fit skipped: {e}");
                None
            }
        }
    } else {
        None
    };
    Ok(SweepResult {
        spectrum: *spec,
        method,
        grid_n: grid.len(),
        grid_x_max: grid.x_max(),
        include_k1: opts.include_k1,
        points,
        failures,
        fit,
    })
}

/// Least squares `ln τ = ln A + k ln T`.
pub fn fit_power_law(points: &[TransportPoint]) -> Result<PowerLawFit> {
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.t, p.tau)).collect();
    fit_log_log(&xy)
}

/// Least squares fit of `ln y` against `ln x`.
pub fn fit_log_log(xy: &[(f64, f64)]) -> Result<PowerLawFit> {
    if xy.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints {
            needed: MIN_FIT_POINTS,
            got: xy.len(),
        });
    }
    for &(x, y) in xy {
        if x.is_nan() || x <= 0.0 {
            return Err(Error::NonPositive(x));
        }
        if y.is_nan() || y <= 0.0 {
            return Err(Error::NonPositive(y));
        }
    }
    let (lo, hi) = xy
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), p| (l.min(p.0), h.max(p.0)));
    if (hi / lo).log10() < MIN_FIT_DECADES {
        return Err(Error::InvalidArgument(format!(
            "fit range [{lo}, {hi}] spans less than {MIN_FIT_DECADES} decades"
        )));
    }
    let n = xy.len() as f64;
    let lx: Vec<f64> = xy.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = xy.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let stderr = (ss_res / (n - 2.0) / sxx).sqrt();
    Ok(PowerLawFit {
        exponent: slope,
        stderr,
        log_prefactor: intercept,
        points: xy.len(),
    })
}

impl SweepResult {
    /// `T,tau,sigma,method,residual`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "T,tau,sigma,method,residual")?;
        for p in &self.points {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{},{:.16e}",
                p.t, p.tau, p.sigma, p.method, p.residual
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// `x,phi,phi_even,phi_odd`.
pub fn write_phi_csv<W: Write>(phi: &SolutionPhi, grid: &Grid, mut out: W) -> Result<()> {
    writeln!(out, "x,phi,phi_even,phi_odd")?;
    for i in 0..grid.len() {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            grid.nodes()[i],
            phi.phi[i],
            phi.phi_even[i],
            phi.phi_odd[i]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::PhysicalScales;

    #[test]
    fn exact_power_law_fit() {
        let xy: Vec<(f64, f64)> = (0..8)
            .map(|k| {
                let t = 0.002 * 10f64.powf(k as f64 / 7.0);
                (t, 3.5 * t.powi(-5))
            })
            .collect();
        let f = fit_log_log(&xy).unwrap();
        assert!((f.exponent + 5.0).abs() < 1e-10);
        assert!(f.stderr < 1e-10);
        assert!((f.log_prefactor - 3.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let few = vec![(0.01, 1.0), (0.02, 2.0), (0.03, 3.0), (0.04, 4.0)];
        assert_eq!(
            fit_log_log(&few),
            Err(Error::InsufficientPoints { needed: 5, got: 4 })
        );
        let neg = vec![(0.01, 1.0), (0.02, -2.0), (0.03, 3.0), (0.04, 4.0), (0.1, 1.0)];
        assert_eq!(fit_log_log(&neg), Err(Error::NonPositive(-2.0)));
        let narrow: Vec<(f64, f64)> = (0..6).map(|k| (0.01 + 0.001 * k as f64, 1.0)).collect();
        assert!(matches!(fit_log_log(&narrow), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn temperature_grid_endpoints() {
        let t = temperature_grid(0.002, 0.02, 8, true).unwrap();
        assert_eq!(t.len(), 8);
        assert_eq!(t[0], 0.002);
        assert_eq!(t[7], 0.02);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!(temperature_grid(0.0, 1.0, 3, true).is_err());
    }

    #[test]
    fn sweep_records_regime_failures() {
        let s = ExcitationSpectrum::phonon(PhysicalScales::with_ef_ratio(100.0).unwrap());
        let g = Grid::build(64, 30.0).unwrap();
        let r = sweep(
            &s,
            Method::Averaged,
            &[0.05, 0.01, 0.2],
            &g,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(r.points.len(), 2);
        assert!(r.points[0].t < r.points[1].t);
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].t, 0.2);
        assert_eq!(r.failures[0].category, FailureCategory::Regime);
        assert!(r.fit.is_none());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        let v: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, r.points[0].tau);
    }
}
