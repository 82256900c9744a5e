//! Eigen-decomposition of the symmetrized `K₀` and the derived collision
//! spectrum `K₀ − 1`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::{MeasureWeights, SymmetrizedKernel};

/// Largest relative asymmetry accepted before decomposing.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Sorted by decreasing `|λ|`.
    pub eigenvalues: Vec<f64>,
    /// Column `k` holds `e_k = v_k / √m`, normalized in `⟨·|·⟩_m`. `e₀` has a
    /// positive mean; every other vector has its largest component positive.
    pub eigenvectors: DMatrix<f64>,
    /// `1 − max_{n≥1} |λ_n|`.
    pub gap: f64,
    /// Nyström estimate of `(∫∫ K̂² dx dy)^{1/2}` for the continuous kernel.
    pub hs_norm: f64,
    /// Frobenius norm of the symmetrized matrix, `(∑ λ²)^{1/2}`.
    pub frobenius_norm: f64,
}

/// `max |S − Sᵀ| / max |S|`.
pub fn asymmetry(s: &DMatrix<f64>) -> f64 {
    let scale = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..s.nrows() {
        for j in i + 1..s.ncols() {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn eigendecompose(sym: &SymmetrizedKernel, measure: &MeasureWeights) -> Result<SpectrumResult> {
    let s = &sym.matrix;
    let n = s.nrows();
    if s.ncols() != n || measure.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: measure.len(),
        });
    }
    let asym = asymmetry(s);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let avg = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(avg.clone());

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        lb.abs().total_cmp(&la.abs()).then(lb.total_cmp(&la))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();

    let root_m: Vec<f64> = measure.values().iter().map(|m| m.sqrt()).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let mut e: Vec<f64> = (0..n).map(|i| v[i] / root_m[i]).collect();
        let flip = if col == 0 {
            e.iter().sum::<f64>() < 0.0
        } else {
            let big = (0..n)
                .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
                .unwrap_or(0);
            v[big] < 0.0
        };
        if flip {
            e.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..n {
            vectors[(i, col)] = e[i];
        }
    }

    let mut hs = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                hs += avg[(i, j)] * avg[(i, j)];
            }
        }
    }
    hs += sym.kernel_diagonal.iter().map(|d| d * d).sum::<f64>();
    let frob = avg.iter().map(|v| v * v).sum::<f64>().sqrt();

    let gap = 1.0 - eigenvalues.iter().skip(1).fold(0.0f64, |a, l| a.max(l.abs()));
    Ok(SpectrumResult {
        eigenvalues,
        eigenvectors: vectors,
        gap,
        hs_norm: hs.sqrt(),
        frobenius_norm: frob,
    })
}

/// `1 − max_{n≥1} |λ_n|`.
pub fn spectral_gap(spec: &SpectrumResult) -> f64 {
    spec.gap
}

/// Spectrum of the collision operator `C₀ = K₀ − 1`.
#[derive(Debug, Clone, Serialize)]
pub struct CollisionSpectrum {
    /// `λ_n − 1` in the order of the source spectrum.
    pub values: Vec<f64>,
    /// Number of values with `|λ̃| < ZERO_TOL`.
    pub near_zero_count: usize,
    pub top_is_zero: bool,
    pub others_in_range: bool,
}

impl CollisionSpectrum {
    pub const ZERO_TOL: f64 = 1e-4;
    pub const TOP_TOL: f64 = 1e-8;

    pub fn passes(&self) -> bool {
        self.top_is_zero && self.near_zero_count == 1 && self.others_in_range
    }
}

pub fn collision_spectrum(spec: &SpectrumResult) -> CollisionSpectrum {
    let values: Vec<f64> = spec.eigenvalues.iter().map(|l| l - 1.0).collect();
    let near_zero_count = values
        .iter()
        .filter(|v| v.abs() < CollisionSpectrum::ZERO_TOL)
        .count();
    let top_is_zero = values
        .first()
        .map(|v| v.abs() < CollisionSpectrum::TOP_TOL)
        .unwrap_or(false);
    let others_in_range = values.iter().skip(1).all(|&v| (-2.0..0.0).contains(&v));
    CollisionSpectrum {
        values,
        near_zero_count,
        top_is_zero,
        others_in_range,
    }
}

/// Largest `|λ_n|` over `n ≥ 1` whose eigenvector is odd under `x → −x`,
/// identified by `⟨e_n|R e_n⟩_m < 0`.
pub fn odd_sector_max(spec: &SpectrumResult, measure: &MeasureWeights, mirror: impl Fn(usize) -> usize) -> f64 {
    let n = spec.eigenvalues.len();
    let m = measure.values();
    let mut worst = 0.0f64;
    for k in 0..n {
        let e = spec.eigenvectors.column(k);
        let parity: f64 = (0..n).map(|i| m[i] * e[i] * e[mirror(i)]).sum();
        if parity < 0.0 {
            worst = worst.max(spec.eigenvalues[k].abs());
        }
    }
    worst
}
