//! Periodic trigonometric eigenbasis on the unit torus `[0, 1)`.
//!
//! The basis diagonalizes the negative Laplacian under periodic boundary
//! conditions:
//!
//! ```text
//! e_1(x) = 1,
//! e_j(x) = cos((j-1) π x)   for odd  j ≥ 3,
//! e_j(x) = sin(j π x)       for even j ≥ 2,
//! -e_j'' = ᾱ_j e_j,   ᾱ_j = ((j-1)π)² (odd j),  (jπ)² (even j).
//! ```
//!
//! Even/odd indices pair up as `e_{2m} = sin(2πmx)`, `e_{2m+1} = cos(2πmx)`,
//! both with eigenvalue `(2πm)²`. The basis is intentionally kept
//! *unnormalized* (raw cosines and sines): the measurement and injection
//! matrices downstream assume these raw values, so the squared `L²` norms
//! `‖e_1‖² = 1`, `‖e_j‖² = 1/2 (j ≥ 2)` are carried explicitly instead.
//!
//! The fourth-order operator driving the dynamics is `A = ν₂(-Δ + 1)²` with
//! eigenvalues `ν₂ α_j`, `α_j = (ᾱ_j + 1)²`. Three norms are induced:
//!
//! ```text
//! ‖y‖²_H    = Σ c_j² ‖e_j‖²,
//! ‖y‖²_V    = ν₂  Σ α_j  c_j² ‖e_j‖²   (= ν₂ ‖(-Δ+1) y‖²_H),
//! ‖y‖²_D(A) = ν₂² Σ α_j² c_j² ‖e_j‖²   (= ‖A y‖²_H).
//! ```
//!
//! Projections onto the span of the first `N` modes are computed by uniform
//! rectangle quadrature, which is exact for periodic trigonometric integrands
//! below the aliasing limit (`2·max frequency < M` grid points).

use crate::{Error, Result};
use std::f64::consts::PI;

/// Frequency index (in full cycles over the torus) of mode `j ≥ 1`.
fn cycles(j: usize) -> usize {
    if j % 2 == 0 {
        j / 2
    } else {
        (j - 1) / 2
    }
}

/// Value of the `j`-th eigenfunction at torus coordinate `x`.
pub fn eigenfunction_value(j: usize, x: f64) -> Result<f64> {
    if j < 1 {
        return Err(Error::Domain(format!("mode index must be ≥ 1, got {j}")));
    }
    let m = cycles(j) as f64;
    Ok(if j % 2 == 0 {
        (2.0 * PI * m * x).sin()
    } else {
        (2.0 * PI * m * x).cos()
    })
}

/// Value of `e_j'` at torus coordinate `x`.
///
/// Differentiation swaps the sine/cosine pair within a frequency:
/// `e_{2m}' = 2πm e_{2m+1}`, `e_{2m+1}' = -2πm e_{2m}`, `e_1' = 0`.
pub fn eigenfunction_derivative(j: usize, x: f64) -> Result<f64> {
    if j < 1 {
        return Err(Error::Domain(format!("mode index must be ≥ 1, got {j}")));
    }
    let m = cycles(j) as f64;
    let w = 2.0 * PI * m;
    Ok(if j % 2 == 0 {
        w * (w * x).cos()
    } else {
        -w * (w * x).sin()
    })
}

/// Eigenvalue `ᾱ_j` of the negative Laplacian on mode `j`.
pub fn laplacian_eigenvalue(j: usize) -> Result<f64> {
    if j < 1 {
        return Err(Error::Domain(format!("mode index must be ≥ 1, got {j}")));
    }
    let m = cycles(j) as f64;
    Ok((2.0 * PI * m).powi(2))
}

/// Squared `H`-norm of the raw basis element `e_j`.
pub fn basis_h_norm_sq(j: usize) -> f64 {
    if j == 1 {
        1.0
    } else {
        0.5
    }
}

/// Spectrum of the shifted bi-Laplacian `A = ν₂(-Δ+1)²` on the first `N` modes.
#[derive(Debug, Clone)]
pub struct SpectrumTable {
    n_modes: usize,
    lap_eig: Vec<f64>,
    a0_eig: Vec<f64>,
    nu2: f64,
}

impl SpectrumTable {
    pub fn new(n_modes: usize, nu2: f64) -> Self {
        let lap_eig: Vec<f64> = (1..=n_modes)
            .map(|j| laplacian_eigenvalue(j).expect("j >= 1"))
            .collect();
        let a0_eig = lap_eig.iter().map(|a| (a + 1.0).powi(2)).collect();
        Self {
            n_modes,
            lap_eig,
            a0_eig,
            nu2,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn nu2(&self) -> f64 {
        self.nu2
    }

    /// `ᾱ_j`, 1-based.
    pub fn lap(&self, j: usize) -> f64 {
        self.lap_eig[j - 1]
    }

    /// `α_j = (ᾱ_j + 1)²`, 1-based.
    pub fn alpha(&self, j: usize) -> f64 {
        self.a0_eig[j - 1]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.a0_eig
    }

    /// `‖e_j‖_{D(A)} = ν₂ α_j ‖e_j‖_H`, 1-based.
    pub fn da_norm(&self, j: usize) -> f64 {
        self.nu2 * self.alpha(j) * basis_h_norm_sq(j).sqrt()
    }
}

/// A truncated spectral expansion `y(x) = Σ_{n=1}^N c_n e_n(x)` plus a time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub coeffs: Vec<f64>,
    pub t: f64,
}

impl SpectralState {
    pub fn new(coeffs: Vec<f64>, t: f64) -> Self {
        Self { coeffs, t }
    }

    pub fn zero(n_modes: usize) -> Self {
        Self {
            coeffs: vec![0.0; n_modes],
            t: 0.0,
        }
    }

    /// State with the given `(mode, coefficient)` entries and zeros elsewhere.
    pub fn from_modes(n_modes: usize, entries: &[(usize, f64)]) -> Result<Self> {
        let mut coeffs = vec![0.0; n_modes];
        for &(j, c) in entries {
            if j < 1 || j > n_modes {
                return Err(Error::Domain(format!(
                    "mode {j} outside 1..={n_modes}"
                )));
            }
            coeffs[j - 1] = c;
        }
        Ok(Self { coeffs, t: 0.0 })
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    /// Pointwise value at a torus coordinate.
    pub fn value_at(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * eigenfunction_value(i + 1, x).expect("i+1 >= 1"))
            .sum()
    }
}

/// Uniform periodic quadrature grid: `x_i = (i-1)/M`, weights `1/M`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
}

impl QuadratureGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 nodes, got {m}")));
        }
        let nodes = (0..m).map(|i| i as f64 / m as f64).collect();
        Ok(Self { nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.nodes.len() as f64
    }
}

/// Cached evaluation tables of the first `N` modes (and their derivatives) on
/// a quadrature grid. Columns are stored mode-major so synthesis/analysis
/// stream through memory.
#[derive(Debug, Clone)]
pub struct GridBasis {
    m: usize,
    n_modes: usize,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl GridBasis {
    pub fn new(grid: &QuadratureGrid, n_modes: usize) -> Self {
        let m = grid.len();
        let mut values = vec![0.0; m * n_modes];
        let mut derivs = vec![0.0; m * n_modes];
        for j in 1..=n_modes {
            let col = (j - 1) * m;
            for (i, &x) in grid.nodes().iter().enumerate() {
                values[col + i] = eigenfunction_value(j, x).expect("j >= 1");
                derivs[col + i] = eigenfunction_derivative(j, x).expect("j >= 1");
            }
        }
        Self {
            m,
            n_modes,
            values,
            derivs,
        }
    }

    pub fn grid_len(&self) -> usize {
        self.m
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    fn synth(&self, table: &[f64], coeffs: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (j, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let col = &table[j * self.m..(j + 1) * self.m];
            for (o, v) in out.iter_mut().zip(col) {
                *o += c * v;
            }
        }
    }

    /// Samples of `Σ c_j e_j` on the grid.
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        self.synth(&self.values, coeffs, out);
    }

    /// Samples of `Σ c_j e_j'` on the grid.
    pub fn synthesize_derivative(&self, coeffs: &[f64], out: &mut [f64]) {
        self.synth(&self.derivs, coeffs, out);
    }

    /// Quadrature projection coefficients: `c_j = (Σ_i s_i e_j(x_i) / M) / ‖e_j‖²`.
    pub fn analyze(&self, samples: &[f64], out: &mut [f64]) {
        let w = 1.0 / self.m as f64;
        for (j, o) in out.iter_mut().enumerate().take(self.n_modes) {
            let col = &self.values[j * self.m..(j + 1) * self.m];
            let dot: f64 = col.iter().zip(samples).map(|(a, b)| a * b).sum();
            *o = dot * w / basis_h_norm_sq(j + 1);
        }
    }
}

/// Samples of a spectral state on a quadrature grid.
pub fn evaluate_on_grid(state: &SpectralState, grid: &QuadratureGrid) -> Vec<f64> {
    let gb = GridBasis::new(grid, state.n_modes());
    let mut out = vec![0.0; grid.len()];
    gb.synthesize(&state.coeffs, &mut out);
    out
}

/// `L²`-orthogonal projection of grid samples onto the span of the first
/// `n_modes` eigenfunctions, in the quadrature approximation.
///
/// Rejects grids with `M ≤ n_modes`, where the quadrature aliases.
pub fn project(samples: &[f64], grid: &QuadratureGrid, n_modes: usize) -> Result<SpectralState> {
    if samples.len() != grid.len() {
        return Err(Error::Dimension {
            what: "grid samples",
            expected: grid.len(),
            got: samples.len(),
        });
    }
    if grid.len() <= n_modes {
        return Err(Error::Domain(format!(
            "projection onto {n_modes} modes from {} samples would alias; need M > N",
            grid.len()
        )));
    }
    let gb = GridBasis::new(grid, n_modes);
    let mut coeffs = vec![0.0; n_modes];
    gb.analyze(samples, &mut coeffs);
    Ok(SpectralState::new(coeffs, 0.0))
}

/// Which norm to take of a spectral state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `L²` norm.
    H,
    /// `ν₂^{1/2} ‖(-Δ+1)·‖_H`, the graph norm of `A^{1/2}`.
    V,
    /// `‖A·‖_H`, the graph norm of the domain of `A`.
    DomainA,
}

/// Norm of a spectral state with respect to the spectrum table's `ν₂`.
pub fn norm(state: &SpectralState, kind: NormKind, table: &SpectrumTable) -> Result<f64> {
    if state.n_modes() != table.n_modes() {
        return Err(Error::Dimension {
            what: "state coefficients vs spectrum table",
            expected: table.n_modes(),
            got: state.n_modes(),
        });
    }
    let mut acc = 0.0;
    for (i, &c) in state.coeffs.iter().enumerate() {
        let j = i + 1;
        let h2 = basis_h_norm_sq(j);
        let w = match kind {
            NormKind::H => 1.0,
            NormKind::V => table.nu2() * table.alpha(j),
            NormKind::DomainA => (table.nu2() * table.alpha(j)).powi(2),
        };
        acc += w * c * c * h2;
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn quadrature_integral(f: impl Fn(f64) -> f64, m: usize) -> f64 {
        (0..m).map(|i| f(i as f64 / m as f64)).sum::<f64>() / m as f64
    }

    #[test]
    fn eigenfunction_values_match_direct_substitution() {
        assert_eq!(eigenfunction_value(1, 0.37).unwrap(), 1.0);
        assert!((eigenfunction_value(2, 0.25).unwrap() - 1.0).abs() < 1e-15);
        assert!((eigenfunction_value(3, 0.5).unwrap() + 1.0).abs() < 1e-15);
        assert!(eigenfunction_value(0, 0.0).is_err());
    }

    #[test]
    fn laplacian_eigenvalues() {
        assert_eq!(laplacian_eigenvalue(1).unwrap(), 0.0);
        let four_pi_sq = 4.0 * PI * PI;
        assert!((laplacian_eigenvalue(2).unwrap() - four_pi_sq).abs() < 1e-12);
        assert!((laplacian_eigenvalue(3).unwrap() - four_pi_sq).abs() < 1e-12);
        assert!(laplacian_eigenvalue(0).is_err());
    }

    #[test]
    fn eigenvalue_table_invariants() {
        let table = SpectrumTable::new(64, 1e-6);
        assert_eq!(table.lap(1), 0.0);
        for j in 1..=64 {
            // parity formula: ᾱ_j = 4π²((j-1)/2)² for odd j, 4π²(j/2)² for even j
            let m = if j % 2 == 0 { j / 2 } else { (j - 1) / 2 };
            let expect = 4.0 * PI * PI * (m * m) as f64;
            assert!((table.lap(j) - expect).abs() <= 1e-9 * expect.max(1.0));
            assert!(table.alpha(j) >= 1.0);
            if j == 1 {
                assert_eq!(table.alpha(j), 1.0);
            } else {
                assert!(table.alpha(j) > 1.0);
            }
        }
        // nondecreasing within each parity class
        for j in 3..=64 {
            assert!(table.lap(j) >= table.lap(j - 2));
        }
    }

    #[test]
    fn derivative_is_exact_for_pairs() {
        // e_4 = sin(4πx), derivative 4π cos(4πx) = 4π e_5
        for &x in &[0.0, 0.13, 0.5, 0.99] {
            let d = eigenfunction_derivative(4, x).unwrap();
            let expect = 4.0 * PI * eigenfunction_value(5, x).unwrap();
            assert!((d - expect).abs() < 1e-12);
            let d3 = eigenfunction_derivative(3, x).unwrap();
            let expect3 = -2.0 * PI * eigenfunction_value(2, x).unwrap();
            assert!((d3 - expect3).abs() < 1e-12);
        }
        assert_eq!(eigenfunction_derivative(1, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn constant_state_evaluates_to_one() {
        let grid = QuadratureGrid::new(16).unwrap();
        let state = SpectralState::from_modes(8, &[(1, 1.0)]).unwrap();
        for v in evaluate_on_grid(&state, &grid) {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sine_on_quarter_grid() {
        let grid = QuadratureGrid::new(4).unwrap();
        let state = SpectralState::from_modes(2, &[(2, 1.0)]).unwrap();
        let samples = evaluate_on_grid(&state, &grid);
        let expect = [0.0, 1.0, 0.0, -1.0];
        for (s, e) in samples.iter().zip(expect) {
            assert!((s - e).abs() < 1e-14);
        }
    }

    #[test]
    fn project_recovers_single_modes() {
        let grid = QuadratureGrid::new(64).unwrap();
        let e2 = SpectralState::from_modes(8, &[(2, 1.0)]).unwrap();
        let proj = project(&evaluate_on_grid(&e2, &grid), &grid, 8).unwrap();
        for (j, c) in proj.coeffs.iter().enumerate() {
            let expect = if j == 1 { 1.0 } else { 0.0 };
            assert!((c - expect).abs() < 1e-12, "mode {}: {c}", j + 1);
        }
    }

    #[test]
    fn project_resolves_one_plus_sin4pi() {
        // 1 + sin(4πx) = e_1 + e_4
        let grid = QuadratureGrid::new(64).unwrap();
        let samples: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x| 1.0 + (4.0 * PI * x).sin())
            .collect();
        let proj = project(&samples, &grid, 8).unwrap();
        for (j, c) in proj.coeffs.iter().enumerate() {
            let expect = if j == 0 || j == 3 { 1.0 } else { 0.0 };
            assert!((c - expect).abs() < 1e-12, "mode {}: {c}", j + 1);
        }
    }

    #[test]
    fn project_sin_squared_splits_into_constant_and_cos4pi() {
        // sin²(2πx) = 1/2 - cos(4πx)/2 = e_1/2 - e_5/2.
        // Cross-checked against brute-force quadrature of the integrals.
        let grid = QuadratureGrid::new(64).unwrap();
        let samples: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x| (2.0 * PI * x).sin().powi(2))
            .collect();
        let proj = project(&samples, &grid, 8).unwrap();
        for (j, c) in proj.coeffs.iter().enumerate() {
            let oracle = quadrature_integral(
                |x| (2.0 * PI * x).sin().powi(2) * eigenfunction_value(j + 1, x).unwrap(),
                4096,
            ) / basis_h_norm_sq(j + 1);
            assert!((c - oracle).abs() < 1e-12);
            let expect = match j {
                0 => 0.5,
                4 => -0.5,
                _ => 0.0,
            };
            assert!((c - expect).abs() < 1e-12, "mode {}: {c}", j + 1);
        }
    }

    #[test]
    fn project_rejects_aliasing_grid() {
        let grid = QuadratureGrid::new(8).unwrap();
        let samples = vec![0.0; 8];
        assert!(project(&samples, &grid, 8).is_err());
    }

    #[test]
    fn round_trip_is_identity_below_aliasing() {
        let n = 16;
        let grid = QuadratureGrid::new(4 * n).unwrap();
        let mut rng = SplitMix64::new(42);
        let coeffs = rng.vector(n);
        let state = SpectralState::new(coeffs.clone(), 0.0);
        let back = project(&evaluate_on_grid(&state, &grid), &grid, n).unwrap();
        let scale: f64 = coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max);
        for (a, b) in coeffs.iter().zip(&back.coeffs) {
            assert!((a - b).abs() < 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn discrete_inner_products_match_exact_values() {
        // Uniform-grid quadrature integrates e_j e_k exactly while the
        // combined frequency stays below the grid size.
        let m = 64;
        for j in 1..=12usize {
            for k in 1..=12usize {
                let q = quadrature_integral(
                    |x| {
                        eigenfunction_value(j, x).unwrap() * eigenfunction_value(k, x).unwrap()
                    },
                    m,
                );
                let exact = if j == k { basis_h_norm_sq(j) } else { 0.0 };
                assert!(
                    (q - exact).abs() < 1e-12,
                    "({j},{k}): quadrature {q}, exact {exact}"
                );
            }
        }
    }

    #[test]
    fn norms_of_basis_elements() {
        let table = SpectrumTable::new(8, 1e-6);
        let e1 = SpectralState::from_modes(8, &[(1, 1.0)]).unwrap();
        assert!((norm(&e1, NormKind::H, &table).unwrap() - 1.0).abs() < 1e-15);

        // V-norm of e_2 at ν₂ = 1e-6: direct formula cross-checked by
        // fine-grid quadrature of ν₂ ‖(-Δ+1) e_2‖²_H.
        let e2 = SpectralState::from_modes(8, &[(2, 1.0)]).unwrap();
        let v = norm(&e2, NormKind::V, &table).unwrap();
        let fac = 4.0 * PI * PI + 1.0;
        let oracle = (1e-6
            * quadrature_integral(|x| (fac * (2.0 * PI * x).sin()).powi(2), 8192))
        .sqrt();
        assert!((v - oracle).abs() < 1e-12 * oracle);
        assert!((v - (1e-6f64 * fac * fac * 0.5).sqrt()).abs() < 1e-15);

        let zero = SpectralState::zero(8);
        for kind in [NormKind::H, NormKind::V, NormKind::DomainA] {
            assert_eq!(norm(&zero, kind, &table).unwrap(), 0.0);
        }
    }

    #[test]
    fn norm_scale_ordering() {
        // α_j ≥ 1 forces ‖y‖²_V ≥ ν₂ ‖y‖²_H and ‖y‖²_DA ≥ ν₂ ‖y‖²_V.
        let nu2 = 1e-6;
        let table = SpectrumTable::new(24, nu2);
        let mut rng = SplitMix64::new(9);
        for _ in 0..50 {
            let state = SpectralState::new(rng.vector(24), 0.0);
            let h = norm(&state, NormKind::H, &table).unwrap();
            let v = norm(&state, NormKind::V, &table).unwrap();
            let da = norm(&state, NormKind::DomainA, &table).unwrap();
            assert!(v * v >= nu2 * h * h * (1.0 - 1e-12));
            assert!(da * da >= nu2 * v * v * (1.0 - 1e-12));
        }
    }

    #[test]
    fn norm_rejects_mismatched_table() {
        let table = SpectrumTable::new(8, 1e-6);
        let state = SpectralState::zero(9);
        assert!(norm(&state, NormKind::H, &table).is_err());
    }
}
