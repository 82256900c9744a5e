//! Built-in self checks: structural identities of the kernels, operators and
//! spectrum, plus agreement between independent solution routes.

use serde::Serialize;

use crate::error::Result;
use crate::kernels::{gamma_nu, kbar_nu};
use crate::operators::Assembly;
use crate::quadrature::{weight_w, Grid};
use crate::solvers::{mu0_second_order, solve_direct, solve_leading_order, SolverOptions};
use crate::spectra::{ExcitationKind, ExcitationSpectrum, KernelIndex};
use crate::spectral::{asymmetry, collision_spectrum, eigendecompose};

pub const ZETA3: f64 = 1.202_056_903_159_594_2;
pub const ZETA5: f64 = 1.036_927_755_143_37;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// Measured error (zero is exact).
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone)]
pub struct ValidationConfig {
    pub spectrum: ExcitationSpectrum,
    pub grid: Grid,
    pub t: f64,
    pub options: SolverOptions,
    /// Replaces every built-in tolerance.
    pub tolerance_override: Option<f64>,
}

struct Collector {
    checks: Vec<CheckResult>,
    tol_override: Option<f64>,
}

impl Collector {
    fn push(&mut self, name: &str, value: f64, tol: f64) {
        let tolerance = self.tol_override.unwrap_or(tol);
        self.checks.push(CheckResult {
            name: name.to_string(),
            value,
            tolerance,
            passed: value.is_finite() && value <= tolerance,
        });
    }
}

pub fn run(cfg: &ValidationConfig) -> Result<ValidationReport> {
    let spec = &cfg.spectrum;
    let grid = &cfg.grid;
    let t = cfg.t;
    let mut c = Collector {
        checks: Vec::new(),
        tol_override: cfg.tolerance_override,
    };

    let w = grid.thermal_weights();
    c.push("grid.weight_normalization", (grid.integrate(&w)? - 1.0).abs(), 1e-8);
    let xw: Vec<f64> = grid.nodes().iter().zip(&w).map(|(x, w)| x * w).collect();
    c.push("grid.odd_moment", grid.integrate(&xw)?.abs(), 1e-14);

    let mut bal = 0.0f64;
    let mut anti = 0.0f64;
    for a in [-7.3, -1.1, 0.4, 2.9, 11.0] {
        for b in [-5.2, -0.3, 1.7, 6.6] {
            let (e, u) = (a * t, b * t);
            let l0 = weight_w(a) * kbar_nu(KernelIndex::Zero, e, u, t, spec);
            let r0 = weight_w(b) * kbar_nu(KernelIndex::Zero, u, e, t, spec);
            if l0 != 0.0 {
                bal = bal.max(((l0 - r0) / l0).abs());
            }
            let l1 = weight_w(a) * kbar_nu(KernelIndex::One, e, u, t, spec);
            let r1 = weight_w(b) * kbar_nu(KernelIndex::One, u, e, t, spec);
            if l1 != 0.0 {
                anti = anti.max(((l1 + r1) / l1).abs());
            }
        }
    }
    c.push("kernel.detailed_balance", bal, 1e-12);
    c.push("kernel.k1_antibalance", anti, 1e-12);

    if spec.kind() == ExcitationKind::Phonon {
        let g0 = gamma_nu(KernelIndex::Zero, 0.0, spec, t)?;
        c.push("rates.gamma0_at_zero", (g0 / (7.0 * ZETA3) - 1.0).abs(), 1e-8);
        let g1 = gamma_nu(KernelIndex::One, 0.0, spec, t)?;
        c.push("rates.gamma1_at_zero", g1.abs(), 1e-10);
        let g2 = gamma_nu(KernelIndex::Two, 0.0, spec, t)?;
        c.push("rates.gamma2_at_zero", (g2 / (93.0 * ZETA5) - 1.0).abs(), 1e-8);
    }

    let assembly = Assembly::new(grid, spec, t, cfg.options.allow_high_temperature)?;
    let g1 = assembly.rates().gamma1();
    let g1_scale = g1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    c.push(
        "rates.gamma1_average",
        grid.weighted_average(g1)?.abs() / g1_scale.max(f64::MIN_POSITIVE),
        1e-12,
    );

    let k0 = assembly.kernel(KernelIndex::Zero);
    let rows = k0
        .row_sums()
        .iter()
        .fold(0.0f64, |m, r| m.max((r - 1.0).abs()));
    c.push("operator.k0_row_sums", rows, 1e-12);

    let sym = assembly.symmetrized()?;
    c.push("operator.k0_self_adjoint", asymmetry(&sym.matrix), 1e-12);

    let measure = assembly.measure();
    let k1 = assembly.kernel(KernelIndex::One);
    let n = grid.len();
    let u: Vec<f64> = (0..n).map(|i| (0.37 * i as f64).sin()).collect();
    let v: Vec<f64> = (0..n).map(|i| (0.11 * i as f64).cos() + 0.2).collect();
    let lhs = measure.inner(&u, &k1.apply(&v)?)?;
    let rhs = measure.inner(&k1.apply(&u)?, &v)?;
    let scale = measure.norm(&u)? * measure.norm(&v)? * k1.matrix().amax();
    c.push("operator.k1_skew_adjoint", (lhs + rhs).abs() / scale, 1e-12);

    let spectrum = eigendecompose(&sym, &measure)?;
    let coll = collision_spectrum(&spectrum);
    c.push("spectrum.top_eigenvalue", coll.values[0].abs(), 1e-8);
    c.push(
        "spectrum.zero_mode_multiplicity",
        (coll.near_zero_count as f64 - 1.0).abs(),
        0.0,
    );
    let out_of_range = coll
        .values
        .iter()
        .skip(1)
        .map(|&l| l.max(-2.0 - l).max(0.0))
        .fold(0.0, f64::max);
    c.push("spectrum.range", out_of_range, 0.0);

    let direct = solve_direct(&assembly, &cfg.options)?;
    c.push("solver.direct_residual", direct.residual, 1e-10);

    let lead = solve_leading_order(&assembly, &cfg.options)?;
    let mu = mu0_second_order(&assembly, &spectrum, cfg.options.include_k1)?;
    c.push(
        "solver.leading_vs_spectral_mu0",
        (lead.phi_even[0] * -mu.total - 1.0).abs(),
        1e-8,
    );

    Ok(ValidationReport { checks: c.checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::PhysicalScales;

    fn cfg(tol: Option<f64>) -> ValidationConfig {
        ValidationConfig {
            spectrum: ExcitationSpectrum::phonon(PhysicalScales::with_ef_ratio(100.0).unwrap()),
            grid: Grid::build(160, 40.0).unwrap(),
            t: 0.01,
            options: SolverOptions::default(),
            tolerance_override: tol,
        }
    }

    #[test]
    fn phonon_suite_passes() {
        let r = run(&cfg(None)).unwrap();
        for c in &r.checks {
            assert!(c.passed, "{} = {:e} > {:e}", c.name, c.value, c.tolerance);
        }
    }

    #[test]
    fn impossible_tolerance_fails() {
        let r = run(&cfg(Some(1e-30))).unwrap();
        assert!(!r.all_passed());
    }
}
