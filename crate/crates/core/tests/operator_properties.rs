use bloch_core::operators::{even_odd_project, parity_blocks};
use bloch_core::spectral::{collision_spectrum, eigendecompose};
use bloch_core::{Assembly, ExcitationSpectrum, Grid, KernelIndex, PhysicalScales};
use proptest::prelude::*;

fn preset(idx: usize, ef: f64) -> ExcitationSpectrum {
    let sc = PhysicalScales::with_ef_ratio(ef).unwrap();
    match idx {
        0 => ExcitationSpectrum::phonon(sc),
        1 => ExcitationSpectrum::magnon(0.001, sc).unwrap(),
        2 => ExcitationSpectrum::coulomb(sc),
        3 => ExcitationSpectrum::custom(0.5, 1.0, 0.0, sc).unwrap(),
        _ => ExcitationSpectrum::custom(2.0, 0.0, 0.0, sc).unwrap(),
    }
}

fn max_abs(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constants_are_fixed_points(idx in 0usize..5, t in 0.002f64..0.05, ef in 20.0f64..500.0) {
        let g = Grid::build(48, 30.0).unwrap();
        let a = Assembly::new(&g, &preset(idx, ef), t, false).unwrap();
        for r in a.kernel(KernelIndex::Zero).row_sums() {
            prop_assert!((r - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn adjointness(idx in 0usize..5, t in 0.002f64..0.05, seed in 0u64..1000) {
        let g = Grid::build(48, 30.0).unwrap();
        let a = Assembly::new(&g, &preset(idx, 100.0), t, false).unwrap();
        let m = a.measure();
        let n = g.len();
        let u: Vec<f64> = (0..n).map(|i| ((seed as f64 + 1.0) * 0.13 * i as f64).sin()).collect();
        let v: Vec<f64> = (0..n).map(|i| ((seed as f64 + 3.0) * 0.07 * i as f64).cos()).collect();
        for nu in KernelIndex::ALL {
            let k = a.kernel(nu);
            let lhs = m.inner(&u, &k.apply(&v).unwrap()).unwrap();
            let rhs = m.inner(&k.apply(&u).unwrap(), &v).unwrap();
            let scale = m.norm(&u).unwrap() * m.norm(&v).unwrap() * max_abs(k.matrix());
            let sign = if nu == KernelIndex::One { -1.0 } else { 1.0 };
            prop_assert!((lhs - sign * rhs).abs() <= 1e-12 * scale, "{:?}", nu);
        }
    }

    #[test]
    fn parity_of_kernels(idx in 0usize..5, t in 0.002f64..0.05) {
        let g = Grid::build(48, 30.0).unwrap();
        let a = Assembly::new(&g, &preset(idx, 100.0), t, false).unwrap();
        for nu in KernelIndex::ALL {
            let k = a.kernel(nu);
            let b = parity_blocks(k.matrix(), &g).unwrap();
            let norm = max_abs(k.matrix());
            let (mixed, same) = (
                max_abs(&b.even_odd).max(max_abs(&b.odd_even)),
                max_abs(&b.even_even).max(max_abs(&b.odd_odd)),
            );
            if nu == KernelIndex::One {
                prop_assert!(same <= 1e-10 * norm);
            } else {
                prop_assert!(mixed <= 1e-10 * norm);
            }
        }
    }

    #[test]
    fn projections_are_idempotent(vals in proptest::collection::vec(-1e3f64..1e3, 32)) {
        let g = Grid::build(32, 10.0).unwrap();
        let (e, o) = even_odd_project(&vals, &g).unwrap();
        let (ee, eo) = even_odd_project(&e, &g).unwrap();
        let (oe, oo) = even_odd_project(&o, &g).unwrap();
        prop_assert_eq!(ee, e);
        prop_assert_eq!(oo, o);
        prop_assert!(eo.iter().chain(&oe).all(|v| *v == 0.0));
    }
}

#[test]
fn collision_spectrum_for_every_preset() {
    let g = Grid::build(96, 30.0).unwrap();
    for idx in 0..5 {
        let s = preset(idx, 100.0);
        let t = if s.is_gapped() { 0.02 } else { 0.01 };
        let a = Assembly::new(&g, &s, t, false).unwrap();
        let spec = eigendecompose(&a.symmetrized().unwrap(), &a.measure()).unwrap();
        let c = collision_spectrum(&spec);
        assert!(c.passes(), "preset {idx}: {:?}", &c.values[..3]);
    }
}

#[test]
fn spectral_reconstruction_of_k0() {
    let g = Grid::build(64, 30.0).unwrap();
    let a = Assembly::new(&g, &preset(0, 100.0), 0.01, false).unwrap();
    let spec = eigendecompose(&a.symmetrized().unwrap(), &a.measure()).unwrap();
    let m = a.measure();
    // K₀ v = ∑ λ_n e_n ⟨e_n|v⟩_m
    let v: Vec<f64> = g.nodes().iter().map(|x| (0.2 * x).tanh() + 0.3).collect();
    let direct = a.kernel(KernelIndex::Zero).apply(&v).unwrap();
    let mut recon = vec![0.0; g.len()];
    for k in 0..g.len() {
        let e: Vec<f64> = spec.eigenvectors.column(k).iter().copied().collect();
        let c = spec.eigenvalues[k] * m.inner(&e, &v).unwrap();
        for i in 0..g.len() {
            recon[i] += c * e[i];
        }
    }
    let diff: Vec<f64> = direct.iter().zip(&recon).map(|(a, b)| a - b).collect();
    assert!(m.norm(&diff).unwrap() < 1e-10 * m.norm(&v).unwrap());
}

#[test]
fn odd_sector_is_coercive() {
    // (1 − K̂₀) restricted to odd vectors has smallest singular value ≥ 1 − λ*.
    let g = Grid::build(96, 30.0).unwrap();
    let a = Assembly::new(&g, &preset(0, 100.0), 0.01, false).unwrap();
    let sym = a.symmetrized().unwrap();
    let spec = eigendecompose(&sym, &a.measure()).unwrap();
    let n = g.len();
    let half = n / 2;
    let basis = nalgebra::DMatrix::from_fn(n, half, |i, k| {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        if i == k {
            s
        } else if i == g.mirror(k) {
            -s
        } else {
            0.0
        }
    });
    let op = nalgebra::DMatrix::identity(n, n) - &sym.matrix;
    let restricted = basis.transpose() * op * &basis;
    let smin = restricted
        .singular_values()
        .iter()
        .fold(f64::INFINITY, |a, v| a.min(*v));
    assert!(smin >= spec.gap - 1e-12, "{smin} < {}", spec.gap);
}
