use bloch_core::transport::{
    conductivity, relaxation_time, solve_point, sweep, temperature_grid, FailureCategory,
};
use bloch_core::{ExcitationSpectrum, Grid, Method, PhysicalScales, SolverOptions};

fn scales() -> PhysicalScales {
    PhysicalScales::with_ef_ratio(100.0).unwrap()
}

fn exponent(s: &ExcitationSpectrum, t_min: f64, t_max: f64) -> f64 {
    let grid = Grid::build(200, 40.0).unwrap();
    let temps = temperature_grid(t_min, t_max, 6, true).unwrap();
    let r = sweep(s, Method::LeadingOrder, &temps, &grid, &SolverOptions::default()).unwrap();
    assert!(r.failures.is_empty(), "{:?}", r.failures);
    r.fit.unwrap().exponent
}

#[test]
fn exponent_dichotomy_in_alpha() {
    // α > 1: −(4/α + β); α < 1: −(2/α + β + 2), the latter once T ≪ ω₀²/ε_F.
    let cases = [
        (2.0, 0.0, 0.002, 0.02, -2.0),
        (2.0, 1.0, 0.002, 0.02, -3.0),
        (0.5, 0.0, 1e-5, 1e-4, -6.0),
        (0.5, 1.0, 1e-5, 1e-4, -7.0),
    ];
    for (alpha, beta, lo, hi, want) in cases {
        let s = ExcitationSpectrum::custom(alpha, beta, 0.0, scales()).unwrap();
        let k = exponent(&s, lo, hi);
        assert!((k - want).abs() <= 0.1, "alpha={alpha} beta={beta}: {k} vs {want}");
    }
}

#[test]
fn averaged_method_misses_k1_dominance() {
    // Without the K₁ route the α = ½ spectrum follows Γ₂ alone: −(4/α + β).
    let s = ExcitationSpectrum::custom(0.5, 1.0, 0.0, scales()).unwrap();
    let grid = Grid::build(120, 40.0).unwrap();
    let temps = temperature_grid(1e-5, 1e-4, 5, true).unwrap();
    let r = sweep(&s, Method::Averaged, &temps, &grid, &SolverOptions::default()).unwrap();
    assert!((r.fit.unwrap().exponent + 9.0).abs() < 1e-6);
}

#[test]
fn magnon_point_below_gap_is_reported() {
    let s = ExcitationSpectrum::magnon(0.01, scales()).unwrap();
    let grid = Grid::build(120, 40.0).unwrap();
    let temps = [0.005, 0.02, 0.05, 0.1];
    let r = sweep(&s, Method::LeadingOrder, &temps, &grid, &SolverOptions::default()).unwrap();
    assert_eq!(r.points.len(), 3);
    assert_eq!(r.failures.len(), 1);
    assert_eq!(r.failures[0].t, 0.005);
    assert_eq!(r.failures[0].category, FailureCategory::Regime);
}

#[test]
fn phonon_default_sweep_is_clean() {
    let s = ExcitationSpectrum::phonon(scales());
    let grid = Grid::build(200, 40.0).unwrap();
    let temps = temperature_grid(0.002, 0.02, 8, true).unwrap();
    let r = sweep(&s, Method::LeadingOrder, &temps, &grid, &SolverOptions::default()).unwrap();
    assert_eq!(r.points.len(), 8);
    assert!(r.points.iter().all(|p| p.residual < 1e-9 && p.sigma == p.tau));
}

#[test]
fn sigma_equals_tau() {
    let s = ExcitationSpectrum::phonon(scales());
    let grid = Grid::build(96, 40.0).unwrap();
    let (_, phi) = solve_point(&s, Method::Direct, 0.01, &grid, &SolverOptions::default()).unwrap();
    assert_eq!(
        conductivity(&phi, &grid).unwrap(),
        relaxation_time(&phi, &grid).unwrap()
    );
}
