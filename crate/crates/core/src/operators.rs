//! Nyström discretization of the normalized kernels `K_ν = K̄_ν / Γ₀`.
//!
//! On the grid `(x_i, q_i)` the off-diagonal entries are
//! `(K_ν)_ij = T K̄_ν(Tx_i, Tx_j) q_j / Γ₀(Tx_i)`. The kernels are singular or
//! kinked on the diagonal `x_i = x_j`, where plain Nyström is inaccurate, so
//! the diagonal is set by singularity subtraction instead: it carries the
//! difference between the exact row integral (from the rate table) and the
//! discrete off-diagonal sum. For `K₀` this makes `K₀𝟙 = 𝟙` hold to rounding,
//! for `K₂` it makes `K₂𝟙 = Γ₂/Γ₀`. `K₁` keeps a zero diagonal so it stays
//! skew-adjoint.
//!
//! The inner product `⟨a|b⟩_m = ∑ m_i a_i b_i` with `m_i = w(x_i) γ₀(x_i) q_i`
//! makes the discrete `K₀` and `K₂` self-adjoint and `K₁` skew-adjoint.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{RateTable, ReducedKernel};
use crate::quadrature::{weight_w, Grid};
use crate::spectra::{ExcitationSpectrum, KernelIndex};

/// Kernel values and rates for one `(spectrum, grid, T)`, from which the three
/// discretized operators are built.
#[derive(Debug, Clone)]
pub struct Assembly {
    rates: RateTable,
    /// `k̄₀(x_i, x_j − x_i)`, zero on the diagonal.
    kbar: DMatrix<f64>,
}

impl Assembly {
    pub fn new(
        grid: &Grid,
        spec: &ExcitationSpectrum,
        t: f64,
        allow_high_temperature: bool,
    ) -> Result<Self> {
        spec.check_temperature(t, allow_high_temperature)?;
        Self::from_rates(RateTable::build(grid, spec, t)?)
    }

    /// Builds the kernel matrix for an existing rate table. The table's
    /// temperature is taken as already validated.
    pub fn from_rates(rates: RateTable) -> Result<Self> {
        let grid = rates.grid();
        let n = grid.len();
        let kernel = ReducedKernel::new(rates.spec(), rates.t());
        let x = grid.nodes();
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                (0..n).map(move |j| if i == j { 0.0 } else { kernel.eval(x[i], x[j] - x[i]) })
            })
            .collect();
        let kbar = DMatrix::from_row_slice(n, n, &rows);
        if rates.gamma0().iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::Singular);
        }
        Ok(Self { rates, kbar })
    }

    pub fn rates(&self) -> &RateTable {
        &self.rates
    }

    pub fn grid(&self) -> &Grid {
        self.rates.grid()
    }

    pub fn spec(&self) -> &ExcitationSpectrum {
        self.rates.spec()
    }

    pub fn t(&self) -> f64 {
        self.rates.t()
    }

    /// Raw reduced kernel values `k̄₀(x_i, x_j − x_i)` (zero diagonal).
    pub fn reduced_kernel_matrix(&self) -> &DMatrix<f64> {
        &self.kbar
    }

    /// Discretized `K_ν`.
    pub fn kernel(&self, nu: KernelIndex) -> DiscretizedKernel {
        let grid = self.grid();
        let n = grid.len();
        let x = grid.nodes();
        let q = grid.weights();
        let g0 = self.rates.gamma0();
        let t_hat = self.rates.t_over_omega0();
        let spec = self.spec();
        let s = spec.vbar2_extra_exponent();
        let c2 = spec.vbar2_factor() * t_hat.powf(s);
        let c1 = self.t() / (2.0 * spec.eps_f());

        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut off = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let base = self.kbar[(i, j)] * q[j] / g0[i];
                let y = x[j] - x[i];
                let v = match nu {
                    KernelIndex::Zero => base,
                    KernelIndex::One => c1 * y * base,
                    KernelIndex::Two => {
                        let ys = if s == 2.0 {
                            y * y
                        } else if s == 0.0 {
                            1.0
                        } else {
                            y.abs().powf(s)
                        };
                        c2 * ys * base
                    }
                };
                m[(i, j)] = v;
                off += v;
            }
            m[(i, i)] = match nu {
                KernelIndex::Zero => 1.0 - off,
                KernelIndex::One => 0.0,
                KernelIndex::Two => c2 * self.rates.gamma2()[i] / g0[i] - off,
            };
        }
        DiscretizedKernel {
            nu,
            matrix: m,
            x_max: grid.x_max(),
            t: self.t(),
        }
    }

    pub fn measure(&self) -> MeasureWeights {
        let grid = self.grid();
        let values = grid
            .nodes()
            .iter()
            .zip(grid.weights())
            .zip(self.rates.gamma0())
            .map(|((&x, &q), &g)| weight_w(x) * g * q)
            .collect();
        MeasureWeights { values }
    }

    /// `Ŝ = D^{1/2} K₀ D^{-1/2}` with `D = diag(m)`, together with the
    /// continuous kernel's diagonal values needed for its Hilbert–Schmidt norm.
    pub fn symmetrized(&self) -> Result<SymmetrizedKernel> {
        let k0 = self.kernel(KernelIndex::Zero);
        let measure = self.measure();
        let matrix = symmetrize(&k0, &measure)?;
        let limit = self.spec().diagonal_limit();
        let q = self.grid().weights();
        let kernel_diagonal = if limit.is_finite() {
            q.iter()
                .zip(self.rates.gamma0())
                .map(|(&qi, &g)| limit * qi / g)
                .collect()
        } else {
            vec![0.0; q.len()]
        };
        Ok(SymmetrizedKernel {
            matrix,
            kernel_diagonal,
            diagonal_is_singular: !limit.is_finite(),
        })
    }

    /// Physical `Γ₀(T x_i)`.
    pub fn big_gamma0(&self) -> Vec<f64> {
        self.rates.big_gamma(KernelIndex::Zero)
    }
}

/// Convenience wrapper: assemble `K_ν` for one temperature.
pub fn assemble(
    nu: KernelIndex,
    grid: &Grid,
    spec: &ExcitationSpectrum,
    t: f64,
) -> Result<DiscretizedKernel> {
    Ok(Assembly::new(grid, spec, t, false)?.kernel(nu))
}

/// A discretized `K_ν` as an `n × n` matrix acting on nodal values.
#[derive(Debug, Clone)]
pub struct DiscretizedKernel {
    nu: KernelIndex,
    matrix: DMatrix<f64>,
    x_max: f64,
    t: f64,
}

impl DiscretizedKernel {
    pub fn nu(&self) -> KernelIndex {
        self.nu
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: v.len(),
            });
        }
        let n = self.len();
        Ok((0..n)
            .map(|i| (0..n).fold(0.0, |acc, j| acc + self.matrix[(i, j)] * v[j]))
            .collect())
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.apply(&vec![1.0; self.len()]).expect("length matches")
    }

    /// Writes `n,x_max,nu,T` followed by the matrix, one row per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,x_max,nu,T")?;
        writeln!(
            out,
            "{},{:.17e},{},{:.17e}",
            self.len(),
            self.x_max,
            self.nu.as_usize(),
            self.t
        )?;
        for i in 0..self.len() {
            let row: Vec<String> = (0..self.len())
                .map(|j| format!("{:.17e}", self.matrix[(i, j)]))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// The discrete measure `m_i = w(x_i) γ₀(x_i) q_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureWeights {
    values: Vec<f64>,
}

impl MeasureWeights {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != self.len() || b.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: if a.len() != self.len() { a.len() } else { b.len() },
            });
        }
        Ok((0..self.len()).fold(0.0, |acc, i| acc + self.values[i] * a[i] * b[i]))
    }

    pub fn norm(&self, a: &[f64]) -> Result<f64> {
        Ok(self.inner(a, a)?.sqrt())
    }
}

/// Symmetrized `K₀` in the `m`-orthonormal basis.
#[derive(Debug, Clone)]
pub struct SymmetrizedKernel {
    pub matrix: DMatrix<f64>,
    /// `√(q_i q_i) K̂(x_i, x_i)`: Nyström weight times the continuous
    /// symmetric kernel on the diagonal. Zero where the kernel vanishes there.
    pub kernel_diagonal: Vec<f64>,
    /// The continuous kernel is unbounded on the diagonal.
    pub diagonal_is_singular: bool,
}

/// `Ŝ_ij = √m_i K_ij / √m_j`.
pub fn symmetrize(kernel: &DiscretizedKernel, measure: &MeasureWeights) -> Result<DMatrix<f64>> {
    let n = kernel.len();
    if measure.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: measure.len(),
        });
    }
    let r: Vec<f64> = measure.values().iter().map(|m| m.sqrt()).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| r[i] * kernel.matrix()[(i, j)] / r[j]))
}

/// Even and odd parts under `x → −x`.
pub fn even_odd_project(v: &[f64], grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
    if v.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: v.len(),
        });
    }
    let n = v.len();
    let even = (0..n).map(|i| 0.5 * (v[i] + v[grid.mirror(i)])).collect();
    let odd = (0..n).map(|i| 0.5 * (v[i] - v[grid.mirror(i)])).collect();
    Ok((even, odd))
}

/// The odd part only.
pub fn odd_part(v: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    Ok(even_odd_project(v, grid)?.1)
}

/// `P_a K P_b` for the parity projectors `P_± = (1 ± R)/2`.
#[derive(Debug, Clone)]
pub struct ParityBlocks {
    pub even_even: DMatrix<f64>,
    pub even_odd: DMatrix<f64>,
    pub odd_even: DMatrix<f64>,
    pub odd_odd: DMatrix<f64>,
}

pub fn parity_blocks(matrix: &DMatrix<f64>, grid: &Grid) -> Result<ParityBlocks> {
    let n = grid.len();
    if matrix.nrows() != n || matrix.ncols() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: matrix.nrows(),
        });
    }
    let block = |sa: f64, sb: f64| {
        DMatrix::from_fn(n, n, |i, j| {
            let (mi, mj) = (grid.mirror(i), grid.mirror(j));
            0.25 * (matrix[(i, j)]
                + sa * matrix[(mi, j)]
                + sb * matrix[(i, mj)]
                + sa * sb * matrix[(mi, mj)])
        })
    };
    Ok(ParityBlocks {
        even_even: block(1.0, 1.0),
        even_odd: block(1.0, -1.0),
        odd_even: block(-1.0, 1.0),
        odd_odd: block(-1.0, -1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::PhysicalScales;

    fn phonon_assembly(n: usize, t: f64) -> Assembly {
        let g = Grid::build(n, 40.0).unwrap();
        let s = ExcitationSpectrum::phonon(PhysicalScales::with_ef_ratio(100.0).unwrap());
        Assembly::new(&g, &s, t, false).unwrap()
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    #[test]
    fn k0_rows_sum_to_one() {
        let a = phonon_assembly(160, 0.01);
        for r in a.kernel(KernelIndex::Zero).row_sums() {
            assert!((r - 1.0).abs() < 1e-13, "{r}");
        }
    }

    #[test]
    fn off_diagonal_entries_nonnegative_and_diagonal_small() {
        let a = phonon_assembly(400, 0.01);
        let k0 = a.kernel(KernelIndex::Zero);
        let m = k0.matrix();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if i != j {
                    assert!(m[(i, j)] >= 0.0);
                }
            }
            assert!(m[(i, i)].abs() < 1e-2, "diag {i}: {}", m[(i, i)]);
        }
    }

    #[test]
    fn k2_rows_reproduce_rate_ratio() {
        let a = phonon_assembly(160, 0.02);
        let k2 = a.kernel(KernelIndex::Two);
        let g0 = a.rates().big_gamma(KernelIndex::Zero);
        let g2 = a.rates().big_gamma(KernelIndex::Two);
        for (i, r) in k2.row_sums().iter().enumerate() {
            let want = g2[i] / g0[i];
            assert!((r - want).abs() <= 1e-12 * want, "{r} vs {want}");
        }
    }

    #[test]
    fn adjointness_in_measure() {
        let a = phonon_assembly(120, 0.01);
        let m = a.measure();
        let n = a.grid().len();
        let u: Vec<f64> = (0..n).map(|i| (0.37 * i as f64).sin()).collect();
        let v: Vec<f64> = (0..n).map(|i| (0.11 * i as f64).cos() + 0.2).collect();
        for nu in KernelIndex::ALL {
            let k = a.kernel(nu);
            let lhs = m.inner(&u, &k.apply(&v).unwrap()).unwrap();
            let rhs = m.inner(&k.apply(&u).unwrap(), &v).unwrap();
            let scale = m.norm(&u).unwrap() * m.norm(&v).unwrap();
            if nu == KernelIndex::One {
                assert!((lhs + rhs).abs() <= 1e-12 * scale, "{nu:?}");
            } else {
                assert!((lhs - rhs).abs() <= 1e-12 * scale, "{nu:?}");
            }
        }
    }

    #[test]
    fn symmetrized_is_symmetric() {
        let a = phonon_assembly(200, 0.01);
        let s = a.symmetrized().unwrap();
        let asym = max_abs(&(&s.matrix - s.matrix.transpose()));
        assert!(asym <= 1e-12 * max_abs(&s.matrix), "{asym}");
        assert!(s.kernel_diagonal.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn parity_structure() {
        let a = phonon_assembly(120, 0.01);
        let g = a.grid().clone();
        let k0 = parity_blocks(a.kernel(KernelIndex::Zero).matrix(), &g).unwrap();
        let norm0 = max_abs(a.kernel(KernelIndex::Zero).matrix());
        assert!(max_abs(&k0.even_odd) <= 1e-12 * norm0);
        assert!(max_abs(&k0.odd_even) <= 1e-12 * norm0);
        let k1m = a.kernel(KernelIndex::One);
        let k1 = parity_blocks(k1m.matrix(), &g).unwrap();
        let norm1 = max_abs(k1m.matrix());
        assert!(max_abs(&k1.even_even) <= 1e-10 * norm1);
        assert!(max_abs(&k1.odd_odd) <= 1e-10 * norm1);
        assert!(max_abs(&k1.even_odd) > 0.1 * norm1);
    }

    #[test]
    fn projection_roundtrip() {
        let g = Grid::build(64, 10.0).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|x| (x * 0.3).exp() + x.sin()).collect();
        let (e, o) = even_odd_project(&v, &g).unwrap();
        for i in 0..v.len() {
            let scale = v[i].abs().max(v[g.mirror(i)].abs());
            assert!((e[i] + o[i] - v[i]).abs() <= 2.0 * f64::EPSILON * scale);
            assert_eq!(e[i], e[g.mirror(i)]);
            assert_eq!(o[i], -o[g.mirror(i)]);
        }
        assert!(matches!(
            even_odd_project(&v[1..], &g),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn csv_dump_roundtrip() {
        let a = phonon_assembly(32, 0.01);
        let k = a.kernel(KernelIndex::One);
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,x_max,nu,T"));
        let meta: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(meta[0], "32");
        assert_eq!(meta[2], "1");
        let rows: Vec<Vec<f64>> = lines
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 32);
        for i in 0..32 {
            for j in 0..32 {
                assert_eq!(rows[i][j], k.matrix()[(i, j)]);
            }
        }
    }

    #[test]
    fn coulomb_kernel_diagonal() {
        let g = Grid::build(96, 30.0).unwrap();
        let s = ExcitationSpectrum::coulomb(PhysicalScales::with_ef_ratio(100.0).unwrap());
        let a = Assembly::new(&g, &s, 0.01, false).unwrap();
        let sym = a.symmetrized().unwrap();
        assert!(!sym.diagonal_is_singular);
        for (i, d) in sym.kernel_diagonal.iter().enumerate() {
            assert_close!(*d, g.weights()[i] / a.rates().gamma0()[i], 1e-15);
        }
        // K₂ = K₀ for this spectrum
        let diff = a.kernel(KernelIndex::Two).matrix() - a.kernel(KernelIndex::Zero).matrix();
        assert!(max_abs(&diff) < 1e-12);
    }
}
