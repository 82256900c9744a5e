//! Thermal weight, Fermi/Bose occupations, the symmetric energy grid, and
//! adaptive Gauss–Kronrod integration.
//!
//! All energies here are dimensionless, `x = ε/T`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Beyond this |x| the weight is below the smallest subnormal double.
const WEIGHT_CUTOFF: f64 = 1400.0;

/// `w(x) = 1/(4 cosh²(x/2)) = f₀(x) (1 − f₀(x))`.
pub fn weight_w(x: f64) -> f64 {
    let ax = x.abs();
    if ax > WEIGHT_CUTOFF {
        return 0.0;
    }
    let e = (-ax).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// `ln w(x)`, finite for every finite `x`.
pub fn ln_weight(x: f64) -> f64 {
    let ax = x.abs();
    -ax - 2.0 * (-ax).exp().ln_1p()
}

/// Fermi function `1/(eˣ + 1)`.
pub fn fermi(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Bose function `1/(eˣ − 1)`; pole at zero.
pub fn bose(x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::BosePole);
    }
    Ok(1.0 / x.exp_m1())
}

/// Gauss–Legendre nodes and weights on [−1, 1], ascending, exactly symmetric.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let m = order;
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        // Newton iteration from the Tricomi initial guess, largest root first.
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, t);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        nodes[m - 1 - i] = t;
        nodes[i] = -t;
        weights[m - 1 - i] = w;
        weights[i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Symmetric composite Gauss–Legendre grid on `[−x_max, x_max]`.
///
/// Nodes are ascending and exactly closed under negation: node `i` and node
/// `n − 1 − i` are negatives of each other, with identical weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    x_max: f64,
    panel_order: usize,
}

impl Grid {
    pub const DEFAULT_N: usize = 400;
    pub const DEFAULT_X_MAX: f64 = 40.0;
    pub const PREFERRED_PANEL_ORDER: usize = 16;

    /// Builds the grid with `n` nodes. Panels use 16 points when `n` is a
    /// multiple of 16, otherwise the largest divisor of `n` below 16.
    pub fn build(n: usize, x_max: f64) -> Result<Self> {
        if n < 16 || !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "grid size must be even and at least 16, got {n}"
            )));
        }
        if !(x_max.is_finite() && x_max >= 10.0) {
            return Err(Error::InvalidArgument(format!(
                "grid cutoff must be at least 10, got {x_max}"
            )));
        }
        let panel_order = (2..=Self::PREFERRED_PANEL_ORDER)
            .rev()
            .find(|m| n.is_multiple_of(*m))
            .expect("n is even");
        let panels = n / panel_order;
        let (t, tw) = gauss_legendre(panel_order);
        let h = 2.0 * x_max / panels as f64;

        let mut positive: Vec<(f64, f64)> = Vec::with_capacity(n / 2);
        for k in 0..panels {
            let centre = -x_max + (k as f64 + 0.5) * h;
            for (tj, wj) in t.iter().zip(&tw) {
                let x = centre + 0.5 * h * tj;
                if x > 0.0 {
                    positive.push((x, 0.5 * h * wj));
                }
            }
        }
        debug_assert_eq!(positive.len(), n / 2);
        positive.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for &(x, w) in positive.iter().rev() {
            nodes.push(-x);
            weights.push(w);
        }
        for &(x, w) in &positive {
            nodes.push(x);
            weights.push(w);
        }
        Ok(Self {
            nodes,
            weights,
            x_max,
            panel_order,
        })
    }

    pub fn default_grid() -> Self {
        Self::build(Self::DEFAULT_N, Self::DEFAULT_X_MAX).expect("default grid is valid")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panel_order(&self) -> usize {
        self.panel_order
    }

    /// Index of the node at `−x_i`.
    pub fn mirror(&self, i: usize) -> usize {
        self.nodes.len() - 1 - i
    }

    /// Verifies the node set is closed under negation with matching weights.
    pub fn check_symmetric(&self) -> Result<()> {
        let n = self.len();
        if !n.is_multiple_of(2) {
            return Err(Error::AsymmetricGrid);
        }
        for i in 0..n / 2 {
            let j = self.mirror(i);
            if self.nodes[i] != -self.nodes[j] || self.weights[i] != self.weights[j] {
                return Err(Error::AsymmetricGrid);
            }
        }
        Ok(())
    }

    /// `∑ q_i v_i`. Summation runs over mirror pairs `(i, n−1−i)` with `i`
    /// ascending, each pair added as `q_i v_i + q_{n−1−i} v_{n−1−i}`, so odd
    /// sequences integrate to exactly zero and the result is reproducible.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        let q = &self.weights;
        Ok((0..self.len() / 2).fold(0.0, |acc, i| {
            let j = self.mirror(i);
            acc + (q[i] * values[i] + q[j] * values[j])
        }))
    }

    /// Thermal weights `w(x_i)` at the nodes.
    pub fn thermal_weights(&self) -> Vec<f64> {
        self.nodes.iter().map(|&x| weight_w(x)).collect()
    }

    /// `q_i w(x_i)` normalized so the entries sum to one: the discrete `⟨·⟩_w`.
    pub fn average_weights(&self) -> Vec<f64> {
        let raw: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &q)| q * weight_w(x))
            .collect();
        let z = raw.iter().fold(0.0, |a, b| a + b);
        raw.into_iter().map(|v| v / z).collect()
    }

    /// `⟨f⟩_w = ∑ q_i w_i f_i / ∑ q_i w_i`.
    pub fn weighted_average(&self, values: &[f64]) -> Result<f64> {
        let w = self.thermal_weights();
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        let wf: Vec<f64> = w.iter().zip(values).map(|(a, b)| a * b).collect();
        Ok(self.integrate(&wf)? / self.integrate(&w)?)
    }
}

/// `∑ q_i v_i` on `grid`.
pub fn integrate(values: &[f64], grid: &Grid) -> Result<f64> {
    grid.integrate(values)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    let err = ((kronrod - gauss) * h).abs();
    (value, err)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) over the intervals delimited by
/// `breakpoints` (sorted, at least two). Stops when the summed error estimate
/// is below `abs_tol` or `rel_tol` times the larger of `|I|` and `∑|I_k|`
/// over the current pieces; the latter keeps integrals that cancel to zero
/// from refining forever.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Integral> {
    const MAX_PIECES: usize = 4000;
    if breakpoints.len() < 2 {
        return Err(Error::InvalidArgument(
            "adaptive integration needs at least two breakpoints".into(),
        ));
    }
    let mut heap = BinaryHeap::new();
    for win in breakpoints.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b > a {
            let (value, error) = gk15(&f, a, b);
            heap.push(Piece { a, b, value, error });
        }
    }
    loop {
        let (total, mass, err) = heap.iter().fold((0.0, 0.0, 0.0), |(v, m, e), p| {
            (v + p.value, m + p.value.abs(), e + p.error)
        });
        if err <= abs_tol.max(rel_tol * total.abs().max(mass)) {
            return Ok(Integral {
                value: ordered_sum(&heap),
                error: err,
            });
        }
        if heap.len() >= MAX_PIECES {
            return Err(Error::QuadratureNonConvergence {
                achieved: err / total.abs().max(f64::MIN_POSITIVE),
                requested: rel_tol,
            });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further; accept what we have.
            heap.push(Piece { error: 0.0, ..worst });
            continue;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
    }
}

fn ordered_sum(heap: &BinaryHeap<Piece>) -> f64 {
    let mut pieces: Vec<(f64, f64)> = heap.iter().map(|p| (p.a, p.value)).collect();
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    pieces.iter().fold(0.0, |acc, p| acc + p.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn weight_values() {
        assert_eq!(weight_w(0.0), 0.25);
        assert_close!(weight_w(2.0), 0.104_993_585_403_506_78, 1e-15);
        assert_eq!(weight_w(1500.0), 0.0);
        assert_eq!(weight_w(-2.0), weight_w(2.0));
    }

    #[test]
    fn weight_integrates_to_one() {
        // antiderivative ½ tanh(x/2)
        let exact = (20.0f64).tanh();
        let res = integrate_adaptive(weight_w, &[-40.0, 0.0, 40.0], 1e-13, 0.0).unwrap();
        assert_close!(res.value, exact, 1e-13);
    }

    #[test]
    fn fermi_and_bose_values() {
        assert_eq!(fermi(0.0), 0.5);
        assert_close!(bose(1.0).unwrap(), 1.0 / (std::f64::consts::E - 1.0), 1e-15);
        assert_close!(bose(1.0).unwrap(), 0.581_976_706_869_326_4, 1e-15);
        assert_close!(fermi(1.0) + bose(1.0).unwrap(), 1.0 / 1.0f64.sinh(), 1e-15);
        assert_eq!(bose(0.0), Err(Error::BosePole));
        assert!(bose(-2.0).unwrap() < -1.0);
        assert!(fermi(800.0) >= 0.0 && fermi(-800.0) <= 1.0);
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (t, w) = gauss_legendre(16);
        // exact for polynomials up to degree 31
        for k in 0..32 {
            let s: f64 = t.iter().zip(&w).map(|(x, q)| q * x.powi(k)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert_close!(s, exact, 1e-14);
        }
        let (t5, _) = gauss_legendre(5);
        assert_eq!(t5[2], 0.0);
        assert_eq!(t5[0], -t5[4]);
    }

    #[test]
    fn grid_moments() {
        let g = Grid::build(400, 40.0).unwrap();
        assert_eq!(g.len(), 400);
        assert_eq!(g.panel_order(), 16);
        g.check_symmetric().unwrap();
        let w = g.thermal_weights();
        assert_close!(g.integrate(&w).unwrap(), 1.0, 1e-10);
        let xw: Vec<f64> = g.nodes().iter().zip(&w).map(|(x, w)| x * w).collect();
        assert_eq!(g.integrate(&xw).unwrap(), 0.0);
        let x2w: Vec<f64> = g.nodes().iter().zip(&w).map(|(x, w)| x * x * w).collect();
        assert_close!(g.integrate(&x2w).unwrap(), PI * PI / 3.0, 1e-8);
        let ones = vec![1.0; 400];
        assert_close!(g.integrate(&ones).unwrap(), 80.0, 1e-11);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::build(15, 40.0).is_err());
        assert!(Grid::build(17, 40.0).is_err());
        assert!(Grid::build(400, 5.0).is_err());
        let g = Grid::build(34, 20.0).unwrap();
        assert_eq!(g.panel_order(), 2);
        g.check_symmetric().unwrap();
        let g = Grid::build(18, 10.0).unwrap();
        assert_eq!(g.panel_order(), 9);
        g.check_symmetric().unwrap();
    }

    #[test]
    fn integrate_length_mismatch() {
        let g = Grid::build(16, 10.0).unwrap();
        assert_eq!(
            g.integrate(&[1.0; 3]),
            Err(Error::LengthMismatch { expected: 16, got: 3 })
        );
    }

    #[test]
    fn refinement_converges() {
        let exact = PI * PI / 3.0;
        let err = |n: usize| {
            let g = Grid::build(n, 40.0).unwrap();
            let v: Vec<f64> = g.nodes().iter().map(|&x| x * x * weight_w(x)).collect();
            (g.integrate(&v).unwrap() - exact).abs()
        };
        for &n in &[112usize, 160, 208, 400] {
            assert!(err(2 * n) <= err(n) + 1e-15, "n = {n}");
        }
    }

    #[test]
    fn adaptive_handles_kinks() {
        let res = integrate_adaptive(|x: f64| x.abs(), &[-1.0, 0.3], 1e-12, 0.0).unwrap();
        assert_close!(res.value, 0.5 + 0.045, 1e-12);
        let res = integrate_adaptive(|x: f64| x.abs().sqrt(), &[0.0, 1.0], 1e-10, 0.0).unwrap();
        assert_close!(res.value, 2.0 / 3.0, 1e-9);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn weight_is_fermi_product(x in -30.0f64..30.0) {
            // 1 − f₀(x) = f₀(−x)
            let w = weight_w(x);
            let prod = fermi(x) * fermi(-x);
            prop_assert!((w - prod).abs() <= 1e-12 * w);
            prop_assert!((fermi(x) + fermi(-x) - 1.0).abs() <= 1e-15);
            prop_assert!((ln_weight(x).exp() - w).abs() <= 1e-13 * w);
        }

        #[test]
        fn odd_sequences_integrate_to_zero(seed in proptest::collection::vec(-1e3f64..1e3, 200)) {
            let g = Grid::build(400, 40.0).unwrap();
            let mut v = vec![0.0; 400];
            for i in 0..200 {
                v[i] = seed[i];
                v[g.mirror(i)] = -seed[i];
            }
            prop_assert_eq!(g.integrate(&v).unwrap(), 0.0);
        }
    }
}
