//! Numerical engine for the linearized electron–boson collision integral at
//! low temperature: kernels, rates, a Nyström discretization of the integral
//! equation for the scattering amplitude `φ`, spectral diagnostics of the
//! collision operator and the resulting transport coefficients.
//!
//! Energies are measured in units of the boson scale `ω₀`; the Fermi energy
//! enters only through the ratio `ε_F/ω₀` held in [`PhysicalScales`].

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "{} vs {} (tol {})", a, b, tol);
    }};
}

pub mod error;
pub mod kernels;
pub mod operators;
pub mod quadrature;
pub mod solvers;
pub mod spectra;
pub mod spectral;
pub mod transport;
pub mod validation;

pub use error::{Error, Result};
pub use kernels::{Gamma0Source, RateTable};
pub use operators::{Assembly, DiscretizedKernel, MeasureWeights, SymmetrizedKernel};
pub use quadrature::Grid;
pub use solvers::{Method, SolutionPhi, SolverOptions};
pub use spectra::{ExcitationKind, ExcitationSpectrum, KernelIndex, PhysicalScales};
pub use spectral::SpectrumResult;
pub use transport::{PowerLawFit, SweepResult, TransportPoint};
