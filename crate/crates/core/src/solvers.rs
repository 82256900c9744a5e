//! Solvers for `(1 − K₀ − K₁ + K₂) φ = 1/Γ₀`.
//!
//! * `Direct`: dense LU of the full discretized operator.
//! * `LeadingOrder`: `φ ≈ φ₊ (𝟙 + s)` with `s = (1 − K₀)⁻¹ K₁𝟙` on the odd
//!   sector (summed as a Neumann series) and
//!   `φ₊ = 1 / (⟨Γ₂⟩_w + ⟨Γ₁ s⟩_w)`.
//! * `Averaged`: `φ = 1/⟨Γ₂⟩_w`, the same formula with the `K₁` term dropped.

use std::fmt;
use std::str::FromStr;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{odd_part, Assembly, MeasureWeights};
use crate::quadrature::Grid;
use crate::spectra::KernelIndex;
use crate::spectral::{eigendecompose, odd_sector_max, SpectrumResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    #[serde(rename = "leading")]
    LeadingOrder,
    Averaged,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::LeadingOrder => "leading",
            Method::Averaged => "averaged",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Method::Direct),
            "leading" | "leading_order" | "leading-order" => Ok(Method::LeadingOrder),
            "averaged" | "average" => Ok(Method::Averaged),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?} (expected direct, leading or averaged)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Keep the `K₁` (particle–hole asymmetry) term.
    pub include_k1: bool,
    /// Allow phonon runs above `ω₀/10`.
    pub allow_high_temperature: bool,
    /// Relative stopping threshold of the Neumann series, before scaling by
    /// the spectral gap of the odd sector.
    pub neumann_tol: f64,
    pub max_neumann_terms: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            include_k1: true,
            allow_high_temperature: false,
            neumann_tol: 1e-12,
            max_neumann_terms: 200_000,
        }
    }
}

/// Scattering amplitude `φ(x_i)` in units of `1/ω₀`.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionPhi {
    pub method: Method,
    pub t: f64,
    pub phi: Vec<f64>,
    pub phi_even: Vec<f64>,
    pub phi_odd: Vec<f64>,
    /// Relative residual of the equation the method actually solves.
    pub residual: f64,
    /// Neumann terms used (leading order only).
    pub neumann_terms: Option<usize>,
}

pub fn solve(method: Method, assembly: &Assembly, opts: &SolverOptions) -> Result<SolutionPhi> {
    match method {
        Method::Direct => solve_direct(assembly, opts),
        Method::LeadingOrder => solve_leading_order(assembly, opts),
        Method::Averaged => solve_averaged(assembly),
    }
}

/// `1 − K₀ − K₁ + K₂` (without `K₁` if `include_k1` is off).
pub fn full_operator(assembly: &Assembly, include_k1: bool) -> DMatrix<f64> {
    let n = assembly.grid().len();
    let mut a = DMatrix::identity(n, n);
    a -= assembly.kernel(KernelIndex::Zero).matrix();
    if include_k1 {
        a -= assembly.kernel(KernelIndex::One).matrix();
    }
    a += assembly.kernel(KernelIndex::Two).matrix();
    a
}

pub fn solve_direct(assembly: &Assembly, opts: &SolverOptions) -> Result<SolutionPhi> {
    let a = full_operator(assembly, opts.include_k1);
    let b = DVector::from_iterator(
        a.nrows(),
        assembly.big_gamma0().iter().map(|g| 1.0 / g),
    );
    let lu = a.clone().lu();
    let phi = lu.solve(&b).ok_or(Error::Singular)?;
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    if let Some(inv) = lu.try_inverse() {
        let cond = one_norm(&a) * one_norm(&inv);
        debug!("direct solve: 1-norm condition number {cond:.3e}");
        if cond > 1e12 {
            warn!("direct solve is ill-conditioned (cond ≈ {cond:.3e})");
        }
    }
    let r = &a * &phi - &b;
    let residual = r.amax() / b.amax();
    finish(Method::Direct, assembly, phi.iter().copied().collect(), residual, None)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Output of the odd-sector Neumann series.
#[derive(Debug, Clone)]
pub struct OddResponse {
    /// `f = odd(K₁𝟙)`.
    pub source: Vec<f64>,
    /// `s = ∑_k K₀^k f`.
    pub response: Vec<f64>,
    pub terms: usize,
    /// Largest `|λ|` of `K₀` on the odd sector.
    pub lambda_star: f64,
    /// `‖(1 − K₀)s − f‖_m / ‖f‖_m`.
    pub residual: f64,
}

/// Sums `s = ∑ K₀^k f` for `f = odd(K₁𝟙)`, stopping once the increment drops
/// below `tol (1 − λ*) ‖s‖_m`.
pub fn odd_response(
    assembly: &Assembly,
    spectrum: &SpectrumResult,
    opts: &SolverOptions,
) -> Result<OddResponse> {
    let grid = assembly.grid();
    let n = grid.len();
    let measure = assembly.measure();
    let k0 = DMatrix::clone(assembly.kernel(KernelIndex::Zero).matrix());
    let lambda_star = odd_sector_max(spectrum, &measure, |i| grid.mirror(i));
    let f = odd_part(&assembly.kernel(KernelIndex::One).row_sums(), grid)?;
    let mut s = f.clone();
    let f_norm = measure.norm(&f)?;
    if f_norm == 0.0 {
        return Ok(OddResponse {
            source: f,
            response: s,
            terms: 0,
            lambda_star,
            residual: 0.0,
        });
    }
    let threshold = opts.neumann_tol * (1.0 - lambda_star).max(f64::EPSILON);
    let mut inc = DVector::from_vec(f.clone());
    let mut terms = 1;
    loop {
        let next = &k0 * &inc;
        let next = odd_part(next.as_slice(), grid)?;
        for (si, ni) in s.iter_mut().zip(&next) {
            *si += ni;
        }
        terms += 1;
        let inc_norm = measure.norm(&next)?;
        if !inc_norm.is_finite() {
            return Err(Error::NeumannNonConvergence { terms });
        }
        if inc_norm <= threshold * measure.norm(&s)? {
            break;
        }
        if terms >= opts.max_neumann_terms {
            return Err(Error::NeumannNonConvergence { terms });
        }
        inc = DVector::from_vec(next);
    }
    let ks = &k0 * DVector::from_column_slice(&s);
    let r: Vec<f64> = (0..n).map(|i| s[i] - ks[i] - f[i]).collect();
    let residual = measure.norm(&r)? / f_norm;
    debug!("Neumann series: {terms} terms, lambda* = {lambda_star:.6}, residual {residual:.3e}");
    Ok(OddResponse {
        source: f,
        response: s,
        terms,
        lambda_star,
        residual,
    })
}

pub fn solve_leading_order(assembly: &Assembly, opts: &SolverOptions) -> Result<SolutionPhi> {
    if !opts.include_k1 {
        let mut sol = solve_averaged(assembly)?;
        sol.method = Method::LeadingOrder;
        return Ok(sol);
    }
    let spectrum = eigendecompose(&assembly.symmetrized()?, &assembly.measure())?;
    let odd = odd_response(assembly, &spectrum, opts)?;
    let c = phi_plus(assembly, Some((&odd.source, &odd.response)))?;
    let phi: Vec<f64> = odd.response.iter().map(|s| c * (1.0 + s)).collect();
    finish(Method::LeadingOrder, assembly, phi, odd.residual, Some(odd.terms))
}

pub fn solve_averaged(assembly: &Assembly) -> Result<SolutionPhi> {
    let c = phi_plus(assembly, None)?;
    let phi = vec![c; assembly.grid().len()];
    finish(Method::Averaged, assembly, phi, 0.0, None)
}

/// `1 / (⟨Γ₂⟩_w + ⟨Γ₁ s⟩_w)` with `Γ₁ = Γ₀ f`; the second term is omitted
/// when `odd` is `None`.
fn phi_plus(assembly: &Assembly, odd: Option<(&[f64], &[f64])>) -> Result<f64> {
    let grid = assembly.grid();
    let g0 = assembly.big_gamma0();
    let k2_rows = assembly.kernel(KernelIndex::Two).row_sums();
    let g2: Vec<f64> = g0.iter().zip(&k2_rows).map(|(a, b)| a * b).collect();
    let mut denom = grid.weighted_average(&g2)?;
    if let Some((f, s)) = odd {
        let g1s: Vec<f64> = (0..g0.len()).map(|i| g0[i] * f[i] * s[i]).collect();
        denom += grid.weighted_average(&g1s)?;
    }
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::Singular);
    }
    Ok(1.0 / denom)
}

fn finish(
    method: Method,
    assembly: &Assembly,
    phi: Vec<f64>,
    residual: f64,
    neumann_terms: Option<usize>,
) -> Result<SolutionPhi> {
    let (phi_even, phi_odd) = crate::operators::even_odd_project(&phi, assembly.grid())?;
    Ok(SolutionPhi {
        method,
        t: assembly.t(),
        phi,
        phi_even,
        phi_odd,
        residual,
        neumann_terms,
    })
}

/// The two contributions to the slowest collision eigenvalue
/// `μ₀ ≈ −(first + second)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Mu0SecondOrder {
    /// `⟨𝟙|K₂𝟙⟩_m` scaled to a rate.
    pub first: f64,
    /// `∑_{n≥1} ⟨e_n|K₁𝟙⟩_m² / (1 − λ_n)` scaled to a rate.
    pub second: f64,
    pub total: f64,
}

/// Second-order eigenvalue of the slowest mode computed from the eigenbasis
/// of `K₀`.
pub fn mu0_second_order(
    assembly: &Assembly,
    spectrum: &SpectrumResult,
    include_k1: bool,
) -> Result<Mu0SecondOrder> {
    let grid = assembly.grid();
    let measure = assembly.measure();
    let rates = assembly.rates();
    let p0 = crate::kernels::rate_prefactor(KernelIndex::Zero, rates.spec(), rates.t());
    let z = grid.integrate(&grid.thermal_weights())?;

    let k2 = assembly.kernel(KernelIndex::Two);
    let n = grid.len();
    let m = measure.values();
    let mut first = 0.0;
    for (i, mi) in m.iter().enumerate() {
        let row = (0..n).fold(0.0, |acc, j| acc + k2.matrix()[(i, j)]);
        first += mi * row;
    }
    first *= p0 / z;

    let second = if include_k1 {
        let f = odd_part(&assembly.kernel(KernelIndex::One).row_sums(), grid)?;
        spectral_sum(spectrum, &measure, &f)? * p0 / z
    } else {
        0.0
    };
    Ok(Mu0SecondOrder {
        first,
        second,
        total: -(first + second),
    })
}

fn spectral_sum(spectrum: &SpectrumResult, measure: &MeasureWeights, f: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for k in 1..spectrum.eigenvalues.len() {
        let e: Vec<f64> = spectrum.eigenvectors.column(k).iter().copied().collect();
        let c = measure.inner(&e, f)?;
        acc += c * c / (1.0 - spectrum.eigenvalues[k]);
    }
    Ok(acc)
}

/// `τ = ½ ∑ q_i w_i φ_i`.
pub fn relaxation_time_of(phi: &[f64], grid: &Grid) -> Result<f64> {
    let w = grid.thermal_weights();
    let v: Vec<f64> = phi.iter().zip(&w).map(|(a, b)| a * b).collect();
    Ok(0.5 * grid.integrate(&v)?)
}
