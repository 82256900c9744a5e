//! Fixtures shared by the benchmarks.

use bloch_core::{Assembly, ExcitationSpectrum, Grid, PhysicalScales};

/// Phonon spectrum at `ε_F/ω₀ = 100`.
pub fn phonon() -> ExcitationSpectrum {
    ExcitationSpectrum::phonon(PhysicalScales::with_ef_ratio(100.0).expect("valid scales"))
}

/// Phonon assembly on an `n`-point grid at `T = 0.01 ω₀`.
pub fn phonon_assembly(n: usize) -> Assembly {
    let grid = Grid::build(n, Grid::DEFAULT_X_MAX).expect("valid grid");
    Assembly::new(&grid, &phonon(), 0.01, false).expect("in regime")
}
