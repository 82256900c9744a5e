//! Excitation spectra and the angular-averaged potential spectra V̄″₀, V̄″₁, V̄″₂.
//!
//! Every spectrum is a monomial in the energy transfer `u` with unit prefactor:
//!
//! * `vbar0(u) = sgn(u) |u/ω₀|^(2/α + β − 1)`, zero inside a spectral gap,
//! * `vbar1(u) = u / (2 ε_F) · vbar0(u)`,
//! * `vbar2(u) = ½ |u/ω₀|^(2/α) · vbar0(u)` for particle-like excitations and
//!   `vbar2 = vbar0` for the Coulomb preset.
//!
//! Overall numerical prefactors of order unity are dropped, so results built on
//! these functions are meaningful up to one overall constant; exponents, ratios
//! and cross-method comparisons are prefactor independent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energy scales of the problem. Energies everywhere are measured in the same
/// unit as `omega0`; the convention used throughout the crate is `omega0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalScales {
    omega0: f64,
    eps_f: f64,
}

impl PhysicalScales {
    pub const MIN_RECOMMENDED_RATIO: f64 = 10.0;

    pub fn new(omega0: f64, eps_f: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "omega0 must be positive, got {omega0}"
            )));
        }
        if !(eps_f.is_finite() && eps_f > omega0) {
            return Err(Error::InvalidArgument(format!(
                "eps_f must exceed omega0, got eps_f = {eps_f}, omega0 = {omega0}"
            )));
        }
        if eps_f / omega0 < Self::MIN_RECOMMENDED_RATIO {
            log::warn!(
                "eps_f/omega0 = {} is below {}; the low-temperature expansion assumes omega0 << eps_f",
                eps_f / omega0,
                Self::MIN_RECOMMENDED_RATIO
            );
        }
        Ok(Self { omega0, eps_f })
    }

    /// Scales with `omega0 = 1` and the given Fermi energy ratio.
    pub fn with_ef_ratio(ef_ratio: f64) -> Result<Self> {
        Self::new(1.0, ef_ratio)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn eps_f(&self) -> f64 {
        self.eps_f
    }

    pub fn ef_ratio(&self) -> f64 {
        self.eps_f / self.omega0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcitationKind {
    Phonon,
    Magnon,
    Coulomb,
    Custom,
}

impl ExcitationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExcitationKind::Phonon => "phonon",
            ExcitationKind::Magnon => "magnon",
            ExcitationKind::Coulomb => "coulomb",
            ExcitationKind::Custom => "custom",
        }
    }
}

impl std::fmt::Display for ExcitationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExcitationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phonon" => Ok(ExcitationKind::Phonon),
            "magnon" => Ok(ExcitationKind::Magnon),
            "coulomb" => Ok(ExcitationKind::Coulomb),
            "custom" => Ok(ExcitationKind::Custom),
            other => Err(Error::InvalidArgument(format!(
                "unknown excitation kind '{other}'"
            ))),
        }
    }
}

/// A bosonic excitation spectrum with dispersion `ω_q ∝ |q|^α` and coupling
/// `V″ ∝ ω^β`, optionally gapped below `gap`.
///
/// The Coulomb preset is not particle-like; it carries the nominal exponents
/// `(α, β) = (1, 0)`, which reproduce `V̄″₀(u) ∝ u`, and uses `V̄″₂ = V̄″₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpectrum {
    kind: ExcitationKind,
    alpha: f64,
    beta: f64,
    gap: f64,
    scales: PhysicalScales,
}

impl ExcitationSpectrum {
    pub fn phonon(scales: PhysicalScales) -> Self {
        Self {
            kind: ExcitationKind::Phonon,
            alpha: 1.0,
            beta: 1.0,
            gap: 0.0,
            scales,
        }
    }

    /// Ferromagnetic magnons with exchange gap `gap` (same units as `omega0`).
    pub fn magnon(gap: f64, scales: PhysicalScales) -> Result<Self> {
        check_gap(gap)?;
        Ok(Self {
            kind: ExcitationKind::Magnon,
            alpha: 2.0,
            beta: 0.0,
            gap,
            scales,
        })
    }

    pub fn coulomb(scales: PhysicalScales) -> Self {
        Self {
            kind: ExcitationKind::Coulomb,
            alpha: 1.0,
            beta: 0.0,
            gap: 0.0,
            scales,
        }
    }

    pub fn custom(alpha: f64, beta: f64, gap: f64, scales: PhysicalScales) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must be non-negative, got {beta}"
            )));
        }
        check_gap(gap)?;
        Ok(Self {
            kind: ExcitationKind::Custom,
            alpha,
            beta,
            gap,
            scales,
        })
    }

    pub fn kind(&self) -> ExcitationKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn scales(&self) -> PhysicalScales {
        self.scales
    }

    pub fn omega0(&self) -> f64 {
        self.scales.omega0
    }

    pub fn eps_f(&self) -> f64 {
        self.scales.eps_f
    }

    pub fn is_gapped(&self) -> bool {
        self.gap > 0.0
    }

    /// Power of `|u/ω₀|` in `vbar0`: `2/α + β − 1`.
    pub fn vbar0_exponent(&self) -> f64 {
        2.0 / self.alpha + self.beta - 1.0
    }

    /// Extra power of `|u/ω₀|` carried by `vbar2` relative to `vbar0`.
    pub fn vbar2_extra_exponent(&self) -> f64 {
        match self.kind {
            ExcitationKind::Coulomb => 0.0,
            _ => 2.0 / self.alpha,
        }
    }

    /// Constant factor of `vbar2` relative to `|u/ω₀|^s · vbar0`.
    pub fn vbar2_factor(&self) -> f64 {
        match self.kind {
            ExcitationKind::Coulomb => 1.0,
            _ => 0.5,
        }
    }

    /// Without a gap, `Γ₀ = ∫du K̄₀` diverges at small energy transfer when
    /// `vbar0` does not vanish at least linearly.
    pub fn is_infrared_divergent(&self) -> bool {
        !self.is_gapped() && self.vbar0_exponent() <= 0.0
    }

    /// Limit of the symmetric reduced kernel `sgn y |y|^p / (2 sinh(y/2))` as
    /// `y → 0`: zero for `p > 1` or a gap, one for `p = 1`, unbounded below.
    pub(crate) fn diagonal_limit(&self) -> f64 {
        let p = self.vbar0_exponent();
        if self.is_gapped() || p > 1.0 {
            0.0
        } else if p == 1.0 {
            // combo(x, y) * y -> 1 as y -> 0
            1.0
        } else {
            f64::INFINITY
        }
    }

    /// Nominal temperature exponents of `(Γ₀, Γ₁, Γ₂)` for a gapless spectrum.
    pub fn rate_exponents(&self) -> [f64; 3] {
        let p = self.vbar0_exponent();
        [p + 1.0, p + 2.0, p + 1.0 + self.vbar2_extra_exponent()]
    }

    pub fn vbar0(&self, u: f64) -> f64 {
        if u == 0.0 || u.abs() < self.gap {
            return 0.0;
        }
        let p = self.vbar0_exponent();
        u.signum() * (u.abs() / self.scales.omega0).powf(p)
    }

    pub fn vbar1(&self, u: f64) -> f64 {
        u / (2.0 * self.scales.eps_f) * self.vbar0(u)
    }

    pub fn vbar2(&self, u: f64) -> f64 {
        let s = self.vbar2_extra_exponent();
        let extra = if s == 0.0 {
            1.0
        } else {
            (u.abs() / self.scales.omega0).powf(s)
        };
        self.vbar2_factor() * extra * self.vbar0(u)
    }

    pub fn vbar(&self, nu: KernelIndex, u: f64) -> f64 {
        match nu {
            KernelIndex::Zero => self.vbar0(u),
            KernelIndex::One => self.vbar1(u),
            KernelIndex::Two => self.vbar2(u),
        }
    }

    /// Check that temperature `t` (units of `omega0`) lies in the regime the
    /// engine supports. Phonon runs are limited to `t ≤ ω₀/10` unless
    /// `allow_high_t` is set; gapped spectra require `t > gap`.
    pub fn check_temperature(&self, t: f64, allow_high_t: bool) -> Result<()> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Regime(format!(
                "temperature must be positive, got {t}"
            )));
        }
        if self.kind == ExcitationKind::Phonon && !allow_high_t && t > 0.1 * self.omega0() {
            return Err(Error::Regime(format!(
                "phonon runs require T <= omega0/10 (got T = {t}); exponentially small terms are dropped"
            )));
        }
        if self.is_gapped() && t <= self.gap {
            return Err(Error::Regime(format!(
                "T = {t} is not above the spectral gap {}; the gapped regime is not supported",
                self.gap
            )));
        }
        Ok(())
    }
}

fn check_gap(gap: f64) -> Result<()> {
    if !(gap.is_finite() && gap >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gap must be non-negative, got {gap}"
        )));
    }
    Ok(())
}

/// Which of the three kernels K₀, K₁, K₂.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelIndex {
    Zero,
    One,
    Two,
}

impl KernelIndex {
    pub const ALL: [KernelIndex; 3] = [KernelIndex::Zero, KernelIndex::One, KernelIndex::Two];

    pub fn as_usize(&self) -> usize {
        match self {
            KernelIndex::Zero => 0,
            KernelIndex::One => 1,
            KernelIndex::Two => 2,
        }
    }
}

impl TryFrom<usize> for KernelIndex {
    type Error = Error;

    fn try_from(nu: usize) -> Result<Self> {
        match nu {
            0 => Ok(KernelIndex::Zero),
            1 => Ok(KernelIndex::One),
            2 => Ok(KernelIndex::Two),
            _ => Err(Error::InvalidArgument(format!(
                "kernel index must be 0, 1 or 2, got {nu}"
            ))),
        }
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn presets() -> Vec<ExcitationSpectrum> {
        let sc = PhysicalScales::with_ef_ratio(50.0).unwrap();
        vec![
            ExcitationSpectrum::phonon(sc),
            ExcitationSpectrum::magnon(0.1, sc).unwrap(),
            ExcitationSpectrum::coulomb(sc),
            ExcitationSpectrum::custom(0.5, 1.0, 0.0, sc).unwrap(),
            ExcitationSpectrum::custom(2.0, 1.0, 0.0, sc).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn parity_of_spectra(u in -20.0f64..20.0) {
            for s in presets() {
                prop_assert_eq!(s.vbar0(-u), -s.vbar0(u));
                prop_assert_eq!(s.vbar2(-u), -s.vbar2(u));
                prop_assert_eq!(s.vbar1(-u), s.vbar1(u));
            }
        }

        #[test]
        fn vbar0_nonnegative_for_positive_u(u in 0.0f64..20.0) {
            for s in presets() {
                prop_assert!(s.vbar0(u) >= 0.0);
            }
        }

        #[test]
        fn phonon_ratio(u in 0.01f64..20.0) {
            let s = ExcitationSpectrum::phonon(PhysicalScales::with_ef_ratio(100.0).unwrap());
            let r = s.vbar2(u) / s.vbar0(u);
            prop_assert!((r - 0.5 * u * u).abs() <= 1e-13 * (0.5 * u * u));
        }
    }
}
