//! Scattering kernels `K̄_ν(ε, u)` and relaxation rates `Γ_ν(ε)`.
//!
//! The occupation factor `n₀(y) + f₀(x + y)` is always evaluated in the form
//! `√(w(x+y)/w(x)) / (2 sinh(y/2))`, which stays accurate for every `x` on the
//! grid while the naive sum cancels catastrophically once `x + y ≪ 0`.
//!
//! For a spectrum with `vbar0(u) = sgn u |u/ω₀|^p` the kernel factorizes as
//! `K̄₀(ε, u) = (T/ω₀)^p k̄₀(ε/T, (u−ε)/T)` with the reduced kernel
//! `k̄₀(x, y) = [n₀(y) + f₀(x+y)] sgn y |y|^p` (zero inside a gap), and
//!
//! ```text
//! Γ₀ = T (T/ω₀)^p γ₀(x)                  γ₀(x) = ∫dy k̄₀(x, y)
//! Γ₁ = T (T/ω₀)^p (T/2ε_F) γ₁(x)         γ₁(x) = ∫dy y k̄₀(x, y)
//! Γ₂ = T (T/ω₀)^p c₂ (T/ω₀)^s γ₂(x)      γ₂(x) = ∫dy |y|^s k̄₀(x, y)
//! ```
//!
//! where `s` and `c₂` come from [`ExcitationSpectrum::vbar2_extra_exponent`]
//! and [`ExcitationSpectrum::vbar2_factor`]. For phonons `p = s = 2`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, ln_weight, Grid};
use crate::spectra::{ExcitationSpectrum, KernelIndex};

/// Half-width of the energy-transfer window beyond the thermal shell.
pub const Y_TAIL: f64 = 60.0;

/// Requested relative accuracy of the rate integrals.
pub const RATE_REL_TOL: f64 = 1e-10;

/// `n₀(y) + f₀(x + y)` via `√(w(x+y)/w(x)) / (2 sinh(y/2))`.
pub fn stable_combo(x: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Err(Error::BosePole);
    }
    Ok(combo_unchecked(x, y))
}

#[inline]
fn combo_unchecked(x: f64, y: f64) -> f64 {
    let ratio = (0.5 * (ln_weight(x + y) - ln_weight(x))).exp();
    ratio / (2.0 * (0.5 * y).sinh())
}

/// Phonon reduced kernel `k̄₀(x, y) = [n₀(y) + f₀(y+x)] y² sgn y`; zero at `y = 0`.
pub fn kbar0_reduced(x: f64, y: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let ay = y.abs();
    combo_unchecked(x, y) * (ay * ay) * y.signum()
}

/// Reduced kernel `k̄₀(x, y)` for a given spectrum at temperature `t`.
#[derive(Debug, Clone, Copy)]
pub struct ReducedKernel {
    power: f64,
    gap: f64,
    moment2_power: f64,
}

impl ReducedKernel {
    pub fn new(spec: &ExcitationSpectrum, t: f64) -> Self {
        Self {
            power: spec.vbar0_exponent(),
            gap: spec.gap() / t,
            moment2_power: spec.vbar2_extra_exponent(),
        }
    }

    /// Value at `y ≠ 0`; at `y = 0` returns 0 (the diagonal is handled by
    /// callers).
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        if y == 0.0 || y.abs() < self.gap {
            return 0.0;
        }
        let ay = y.abs();
        let mag = if self.power == 2.0 {
            ay * ay
        } else if self.power == 1.0 {
            ay
        } else if self.power == 0.0 {
            1.0
        } else {
            ay.powf(self.power)
        };
        combo_unchecked(x, y) * mag * y.signum()
    }

    /// `y^ν`-type moment weight for `γ_ν`.
    #[inline]
    pub fn moment(&self, nu: KernelIndex, y: f64) -> f64 {
        match nu {
            KernelIndex::Zero => 1.0,
            KernelIndex::One => y,
            KernelIndex::Two => {
                let s = self.moment2_power;
                if s == 2.0 {
                    y * y
                } else if s == 0.0 {
                    1.0
                } else {
                    y.abs().powf(s)
                }
            }
        }
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }
}

/// Physical kernel `K̄_ν(ε, u) = [n₀((u−ε)/T) + f₀(u/T)] V̄″_ν(u − ε)`.
pub fn kbar_nu(nu: KernelIndex, eps: f64, u: f64, t: f64, spec: &ExcitationSpectrum) -> f64 {
    let y = (u - eps) / t;
    if y == 0.0 {
        return 0.0;
    }
    let v = spec.vbar(nu, u - eps);
    if v == 0.0 {
        return 0.0;
    }
    combo_unchecked(eps / t, y) * v
}

/// Prefactor `P_ν(T)` with `Γ_ν(ε) = P_ν(T) γ_ν(ε/T)`.
pub fn rate_prefactor(nu: KernelIndex, spec: &ExcitationSpectrum, t: f64) -> f64 {
    let t_hat = t / spec.omega0();
    let base = t * t_hat.powf(spec.vbar0_exponent());
    match nu {
        KernelIndex::Zero => base,
        KernelIndex::One => base * t / (2.0 * spec.eps_f()),
        KernelIndex::Two => {
            base * spec.vbar2_factor() * t_hat.powf(spec.vbar2_extra_exponent())
        }
    }
}

fn breakpoints(x: f64, gap: f64) -> Vec<f64> {
    let lo = (-x).min(0.0) - Y_TAIL;
    let hi = (-x).max(0.0) + Y_TAIL;
    let mut pts = vec![lo, -x, 0.0, hi];
    if gap > 0.0 {
        pts.push(gap);
        pts.push(-gap);
    }
    pts.retain(|p| *p >= lo && *p <= hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn gamma_integral(kernel: &ReducedKernel, nu: KernelIndex, x: f64) -> Result<f64> {
    let f = |y: f64| kernel.moment(nu, y) * kernel.eval(x, y);
    let pts = breakpoints(x, kernel.gap);
    Ok(integrate_adaptive(f, &pts, RATE_REL_TOL, 0.0)?.value)
}

fn check_finite_rate(nu: KernelIndex, spec: &ExcitationSpectrum) -> Result<()> {
    if spec.is_gapped() {
        return Ok(());
    }
    let p = spec.vbar0_exponent();
    let divergent = match nu {
        KernelIndex::Zero => p <= 0.0,
        KernelIndex::One => p <= -1.0,
        KernelIndex::Two => p + spec.vbar2_extra_exponent() <= 0.0,
    };
    if divergent {
        return Err(Error::InfraredDivergence(format!(
            "gamma_{} of a gapless spectrum with vbar0 exponent {p}",
            nu.as_usize()
        )));
    }
    Ok(())
}

/// Dimensionless rate `γ_ν(x) = Γ_ν(T x) / P_ν(T)`.
pub fn gamma_nu(nu: KernelIndex, x: f64, spec: &ExcitationSpectrum, t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Regime(format!("temperature must be positive, got {t}")));
    }
    if spec.is_gapped() && t <= spec.gap() {
        return Err(Error::Regime(format!(
            "T = {t} is not above the spectral gap {}",
            spec.gap()
        )));
    }
    check_finite_rate(nu, spec)?;
    gamma_integral(&ReducedKernel::new(spec, t), nu, x)
}

/// Physical rate `Γ_ν(ε)`.
pub fn big_gamma_nu(
    nu: KernelIndex,
    eps: f64,
    spec: &ExcitationSpectrum,
    t: f64,
) -> Result<f64> {
    Ok(rate_prefactor(nu, spec, t) * gamma_nu(nu, eps / t, spec, t)?)
}

/// How the `γ₀` column of a [`RateTable`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gamma0Source {
    /// Adaptive quadrature of the convergent rate integral.
    Quadrature,
    /// The integral diverges at small energy transfer; the node sum
    /// `∑_{j≠i} k̄₀(x_i, x_j − x_i) q_j` on the grid is used instead.
    GridRegularized,
}

/// `γ₀, γ₁, γ₂` tabulated on the grid nodes at one temperature.
#[derive(Debug, Clone)]
pub struct RateTable {
    grid: Grid,
    spec: ExcitationSpectrum,
    t: f64,
    gamma: [Vec<f64>; 3],
    gamma0_source: Gamma0Source,
}

impl RateTable {
    /// Tabulates the rates. Only the nodes with `x > 0` are integrated; the
    /// rest follow from `γ₀, γ₂` even and `γ₁` odd.
    pub fn build(grid: &Grid, spec: &ExcitationSpectrum, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Regime(format!("temperature must be positive, got {t}")));
        }
        if spec.is_gapped() && t <= spec.gap() {
            return Err(Error::Regime(format!(
                "T = {t} is not above the spectral gap {}",
                spec.gap()
            )));
        }
        grid.check_symmetric()?;
        check_finite_rate(KernelIndex::One, spec)?;
        check_finite_rate(KernelIndex::Two, spec)?;
        let kernel = ReducedKernel::new(spec, t);
        let n = grid.len();
        let half = n / 2;
        let x = grid.nodes();

        let gamma0_source = if spec.is_infrared_divergent() {
            Gamma0Source::GridRegularized
        } else {
            Gamma0Source::Quadrature
        };

        let rows: Vec<[f64; 3]> = (half..n)
            .into_par_iter()
            .map(|i| -> Result<[f64; 3]> {
                let g0 = match gamma0_source {
                    Gamma0Source::Quadrature => gamma_integral(&kernel, KernelIndex::Zero, x[i])?,
                    Gamma0Source::GridRegularized => grid_row_sum(&kernel, grid, i),
                };
                let g1 = gamma_integral(&kernel, KernelIndex::One, x[i])?;
                let g2 = gamma_integral(&kernel, KernelIndex::Two, x[i])?;
                Ok([g0, g1, g2])
            })
            .collect::<Result<_>>()?;

        let mut gamma = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (k, row) in rows.iter().enumerate() {
            let i = half + k;
            let j = grid.mirror(i);
            gamma[0][i] = row[0];
            gamma[0][j] = row[0];
            gamma[1][i] = row[1];
            gamma[1][j] = -row[1];
            gamma[2][i] = row[2];
            gamma[2][j] = row[2];
        }
        Ok(Self {
            grid: grid.clone(),
            spec: *spec,
            t,
            gamma,
            gamma0_source,
        })
    }

    /// The same table at another temperature. Gapless spectra are scale free,
    /// so the dimensionless rates are reused; gapped ones are rebuilt.
    pub fn at_temperature(&self, t: f64) -> Result<Self> {
        if self.spec.is_gapped() {
            return Self::build(&self.grid, &self.spec, t);
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Regime(format!("temperature must be positive, got {t}")));
        }
        Ok(Self { t, ..self.clone() })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spec(&self) -> &ExcitationSpectrum {
        &self.spec
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn t_over_omega0(&self) -> f64 {
        self.t / self.spec.omega0()
    }

    pub fn gamma0_source(&self) -> Gamma0Source {
        self.gamma0_source
    }

    /// Dimensionless `γ_ν(x_i)`.
    pub fn gamma(&self, nu: KernelIndex) -> &[f64] {
        &self.gamma[nu.as_usize()]
    }

    pub fn gamma0(&self) -> &[f64] {
        &self.gamma[0]
    }

    pub fn gamma1(&self) -> &[f64] {
        &self.gamma[1]
    }

    pub fn gamma2(&self) -> &[f64] {
        &self.gamma[2]
    }

    /// Physical `Γ_ν(T x_i)`.
    pub fn big_gamma(&self, nu: KernelIndex) -> Vec<f64> {
        let p = rate_prefactor(nu, &self.spec, self.t);
        self.gamma(nu).iter().map(|g| p * g).collect()
    }
}

fn grid_row_sum(kernel: &ReducedKernel, grid: &Grid, i: usize) -> f64 {
    let x = grid.nodes();
    let q = grid.weights();
    (0..grid.len())
        .filter(|&j| j != i)
        .fold(0.0, |acc, j| acc + kernel.eval(x[i], x[j] - x[i]) * q[j])
}
