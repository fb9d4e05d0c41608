//! Sensor placement, the point-measurement output operator, and the
//! projection constants attached to a sensor family.
//!
//! A sensor family is built in two stages. A *reference set* of `#M_d` points
//! (4 points for the line, 10 for the plane, 20 in three dimensions — the
//! number of monomials of degree ≤ 3) fixes the pattern inside one cell; it is
//! admissible when no nonzero cubic polynomial vanishes on all of its points,
//! which reduces to a monomial evaluation matrix having full rank. Refinement
//! level `S` then tiles the torus with `S` rescaled copies of the pattern,
//! giving `S_σ = 4S` measurement points on the line:
//!
//! ```text
//! x^{S, 4(k-1)+s} = (k-1)/S + x^{1,s}/S,   k = 1..S,  s = 1..4.
//! ```
//!
//! Measuring a spectral state is evaluation at those points; in coordinates
//! this is the `S_σ × N` matrix `E_plain` with entries `e_c(x^{S,r})`. The
//! weighted variant `E_weighted` carries an extra `α_c^{-1}` per column and
//! appears inside the output-injection operator.

use crate::basis::{basis_h_norm_sq, eigenfunction_value, SpectralState, SpectrumTable};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Number of monomials in `m` variables of degree at most `p`:
/// `(m+p)! / (m! p!)`, computed without intermediate factorials.
pub fn monomial_count(m: u64, p: u64) -> Result<u64> {
    if m < 1 {
        return Err(Error::Domain(format!("need m ≥ 1 variables, got {m}")));
    }
    // (m+p choose p) via incremental products, checked for overflow.
    let mut acc: u64 = 1;
    for k in 1..=p {
        acc = acc
            .checked_mul(m + k)
            .ok_or_else(|| Error::Domain(format!("monomial count overflows u64 for m={m}, p={p}")))?
            / k;
    }
    Ok(acc)
}

/// Number of monomials in `m` variables of degree exactly `k`:
/// `(m+k-1)! / (k! (m-1)!)`.
pub fn monomial_count_exact_degree(m: u64, k: u64) -> Result<u64> {
    if m < 1 {
        return Err(Error::Domain(format!("need m ≥ 1 variables, got {m}")));
    }
    let mut acc: u64 = 1;
    for i in 1..=k {
        acc = acc
            .checked_mul(m + i - 1)
            .ok_or_else(|| Error::Domain(format!("monomial count overflows u64 for m={m}, k={k}")))?
            / i;
    }
    Ok(acc)
}

/// Exponent tuples `κ ∈ {0,..,3}^d` with `|κ| ≤ 3`, in lexicographic order.
fn cubic_exponents(dim: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    loop {
        if current.iter().sum::<u32>() <= 3 {
            out.push(current.clone());
        }
        // odometer increment over {0,1,2,3}^d
        let mut i = 0;
        loop {
            if i == dim {
                return out;
            }
            if current[i] < 3 {
                current[i] += 1;
                break;
            }
            current[i] = 0;
            i += 1;
        }
    }
}

/// Verdict of the reference-set admissibility test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admissibility {
    Admissible,
    RankDeficient,
}

/// A reference set of `#M_d` points in the `d`-torus, the level-1 pattern
/// from which all sensor families are refined.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl ReferenceSet {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Domain(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        let expected = monomial_count(dim as u64, 3)? as usize;
        if points.len() != expected {
            return Err(Error::Domain(format!(
                "reference set in dimension {dim} needs {expected} points, got {}",
                points.len()
            )));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::Domain(format!(
                    "point has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
        }
        Ok(Self { dim, points })
    }

    /// 1-D reference set from 4 torus coordinates.
    pub fn line(points: [f64; 4]) -> Self {
        Self {
            dim: 1,
            points: points.iter().map(|&x| vec![x]).collect(),
        }
    }

    /// The quarter-spaced set `{0, 1/4, 1/2, 3/4}`.
    pub fn quarters() -> Self {
        Self::line([0.0, 0.25, 0.5, 0.75])
    }

    /// The offset uniform set `{1/8, 3/8, 5/8, 7/8}`.
    pub fn offset_eighths() -> Self {
        Self::line([0.125, 0.375, 0.625, 0.875])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// 1-D coordinates, for `dim == 1` sets.
    pub fn line_points(&self) -> Result<Vec<f64>> {
        if self.dim != 1 {
            return Err(Error::Domain(format!(
                "line_points on a {}-dimensional reference set",
                self.dim
            )));
        }
        Ok(self.points.iter().map(|p| p[0]).collect())
    }
}

/// Tests whether the cubic monomial evaluation matrix of the reference set has
/// full rank (pivoted elimination, tolerance `1e-10` relative to the largest
/// row norm).
pub fn validate_reference_set(reference: &ReferenceSet) -> Admissibility {
    let exps = cubic_exponents(reference.dim());
    let n = exps.len();
    debug_assert_eq!(n, reference.points().len());
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (i, p) in reference.points().iter().enumerate() {
        for (j, kappa) in exps.iter().enumerate() {
            let mut v = 1.0;
            for (c, &e) in p.iter().zip(kappa.iter()) {
                v *= c.powi(e as i32);
            }
            m[(i, j)] = v;
        }
    }
    let max_row_norm = (0..n)
        .map(|i| m.row(i).norm())
        .fold(0.0_f64, f64::max);
    let tol = 1e-10 * max_row_norm.max(f64::MIN_POSITIVE);

    // Gaussian elimination with partial pivoting; rank deficiency is a pivot
    // below tolerance.
    let mut a = m;
    for col in 0..n {
        let (pivot_row, pivot_val) = (col..n)
            .map(|r| (r, a[(r, col)].abs()))
            .fold((col, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_val < tol {
            return Admissibility::RankDeficient;
        }
        a.swap_rows(col, pivot_row);
        for r in col + 1..n {
            let f = a[(r, col)] / a[(col, col)];
            for c in col..n {
                a[(r, c)] -= f * a[(col, c)];
            }
        }
    }
    Admissibility::Admissible
}

/// An ordered family of measurement points on the torus: `S` rescaled copies
/// of a 1-D reference pattern, `S_σ = 4S` points in total.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSet {
    level: usize,
    points: Vec<f64>,
    reference: Vec<f64>,
}

impl SensorSet {
    /// Refine an admissible 1-D reference set to level `S`.
    pub fn from_reference(reference: &ReferenceSet, level: usize) -> Result<Self> {
        if level < 1 {
            return Err(Error::Domain("refinement level must be ≥ 1".into()));
        }
        let base = reference.line_points()?;
        if validate_reference_set(reference) == Admissibility::RankDeficient {
            return Err(Error::Inadmissible(
                "reference set fails the monomial full-rank test".into(),
            ));
        }
        let s = level as f64;
        let mut points = Vec::with_capacity(4 * level);
        for k in 0..level {
            for &x in &base {
                points.push(k as f64 / s + x / s);
            }
        }
        Ok(Self {
            level,
            points,
            reference: base,
        })
    }

    /// A sensor set from explicit points (used for subset experiments and
    /// custom placements; no refinement structure is implied).
    pub fn from_points(level: usize, points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("sensor set needs at least one point".into()));
        }
        for w in 0..points.len() {
            for v in w + 1..points.len() {
                if (points[w] - points[v]).abs() < 1e-14 {
                    return Err(Error::Inadmissible(format!(
                        "sensor points {w} and {v} coincide at x = {}",
                        points[w]
                    )));
                }
            }
        }
        Ok(Self {
            level,
            points,
            reference: Vec::new(),
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// `S_σ`, the number of measurement points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn reference_points(&self) -> &[f64] {
        &self.reference
    }
}

/// Point measurements of a spectral state: `w_j = y(x^{S,j})`.
pub fn measure(state: &SpectralState, sensors: &SensorSet) -> Vec<f64> {
    sensors
        .points()
        .iter()
        .map(|&x| state.value_at(x))
        .collect()
}

/// The `S_σ × n_modes` evaluation matrix with entries `e_c(x^{S,r})`.
pub fn mode_evaluation_matrix(sensors: &SensorSet, n_modes: usize) -> DMatrix<f64> {
    DMatrix::from_fn(sensors.len(), n_modes, |r, c| {
        eigenfunction_value(c + 1, sensors.points()[r]).expect("c+1 >= 1")
    })
}

/// Output matrices of a sensor family against the first `N` modes.
#[derive(Debug, Clone)]
pub struct OutputMatrices {
    /// `S_σ × N`, entry `(r, c) = e_c(x^{S,r})`; the measurement map on
    /// Galerkin coordinates.
    pub e_plain: DMatrix<f64>,
    /// `S_σ × N`, entry `(r, c) = α_c^{-1} e_c(x^{S,r})`.
    pub e_weighted: DMatrix<f64>,
    /// Diagonal of `D_α`: `α_1, ..., α_N`.
    pub d_alpha: Vec<f64>,
}

impl OutputMatrices {
    pub fn build(sensors: &SensorSet, table: &SpectrumTable) -> Self {
        let e_plain = mode_evaluation_matrix(sensors, table.n_modes());
        let mut e_weighted = e_plain.clone();
        for c in 0..table.n_modes() {
            let inv_alpha = 1.0 / table.alpha(c + 1);
            for r in 0..sensors.len() {
                e_weighted[(r, c)] *= inv_alpha;
            }
        }
        let d_alpha = table.alphas().to_vec();
        Self {
            e_plain,
            e_weighted,
            d_alpha,
        }
    }

    pub fn s_sigma(&self) -> usize {
        self.e_plain.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.e_plain.ncols()
    }
}

/// Conventional closed-form value for the projection constant of the
/// offset-eighths sensor family: `ν₂ (16 S² π² + 1)² (2S)^{-1/2}`.
///
/// The exact operator norm, returned by [`cps_numeric`], is **half** this
/// value for S ≤ 6: the convention behind the closed form weighs the top
/// sampling row as `2S` where the offset grid actually yields `4S`, and takes
/// unit basis norms where the raw basis carries `1/2`. Both values are kept
/// so the discrepancy stays visible (`cps-verify` reports it).
pub fn cps_closed_form(level: usize, nu2: f64) -> f64 {
    let s = level as f64;
    nu2 * (16.0 * s * s * PI * PI + 1.0).powi(2) / (2.0 * s).sqrt()
}

/// Gram matrix `𝔈ᵀ𝔈` of the square evaluation block (first `S_σ` modes at the
/// `S_σ` sensor points).
pub fn sensor_mode_gram(sensors: &SensorSet) -> DMatrix<f64> {
    let e = mode_evaluation_matrix(sensors, sensors.len());
    e.transpose() * e
}

/// Numerically computed oblique-projection constant of a sensor family: the
/// operator norm of `v ↦ Ψ 𝔈^{-1} v` from output space into `D(A)`, where `Ψ`
/// spans the first `S_σ` eigenfunctions.
///
/// Scaling each column of `𝔈` by `‖e_j‖_{D(A)}^{-1}` turns that norm into the
/// reciprocal of the smallest singular value of the scaled matrix, which is
/// what is returned. Independent of any closed form.
pub fn cps_numeric(sensors: &SensorSet, table: &SpectrumTable) -> Result<f64> {
    let s_sigma = sensors.len();
    if table.n_modes() < s_sigma {
        return Err(Error::Dimension {
            what: "spectrum table modes vs sensor count",
            expected: s_sigma,
            got: table.n_modes(),
        });
    }
    let mut ebar = mode_evaluation_matrix(sensors, s_sigma);
    for j in 0..s_sigma {
        let scale = 1.0 / table.da_norm(j + 1);
        for r in 0..s_sigma {
            ebar[(r, j)] *= scale;
        }
    }
    let svd = ebar.svd(false, false);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let smax = svd
        .singular_values
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    if !(smin > smax * 1e-14) {
        return Err(Error::Inadmissible(
            "evaluation matrix of the first S_σ modes at the sensor points is singular".into(),
        ));
    }
    Ok(1.0 / smin)
}

/// Oblique projection of a state onto the span of the first `S_σ`
/// eigenfunctions along the measurement null space: `P h = Ψ 𝔈^{-1} Z_S h`.
pub fn oblique_project(state: &SpectralState, sensors: &SensorSet) -> Result<SpectralState> {
    let s_sigma = sensors.len();
    if state.n_modes() < s_sigma {
        return Err(Error::Dimension {
            what: "state modes vs sensor count",
            expected: s_sigma,
            got: state.n_modes(),
        });
    }
    let e = mode_evaluation_matrix(sensors, s_sigma);
    let w = DVector::from_vec(measure(state, sensors));
    let lu = e.lu();
    let v = lu.solve(&w).ok_or_else(|| {
        Error::Inadmissible("singular evaluation block; oblique projection undefined".into())
    })?;
    let mut coeffs = vec![0.0; state.n_modes()];
    coeffs[..s_sigma].copy_from_slice(v.as_slice());
    Ok(SpectralState::new(coeffs, state.t))
}

/// Numerical lower estimate of the Poincaré-like constant of a sensor family:
/// the minimum of `‖Θ‖²_{D(A)} / ‖Θ‖²_V` over the measurement null space
/// intersected with the span of the first `n_modes` eigenfunctions.
///
/// A Galerkin truncation of the true infimum, so an upper-bound estimate of
/// it; useful for trend checks in the refinement level.
pub fn poincare_estimate(
    sensors: &SensorSet,
    n_modes: usize,
    table: &SpectrumTable,
) -> Result<f64> {
    let s_sigma = sensors.len();
    if n_modes <= s_sigma {
        return Err(Error::Domain(format!(
            "null space is empty for n_modes = {n_modes} ≤ S_σ = {s_sigma}"
        )));
    }
    if table.n_modes() < n_modes {
        return Err(Error::Dimension {
            what: "spectrum table modes",
            expected: n_modes,
            got: table.n_modes(),
        });
    }
    let e = mode_evaluation_matrix(sensors, n_modes);
    // Null space of E via the spectral decomposition of EᵀE.
    let gram = e.transpose() * &e;
    let se = nalgebra::SymmetricEigen::new(gram);
    let lam_max = se
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = 1e-12 * lam_max;
    let null_cols: Vec<usize> = (0..n_modes)
        .filter(|&i| se.eigenvalues[i] <= tol)
        .collect();
    if null_cols.is_empty() {
        return Err(Error::Domain(
            "no measurement null space found in the resolved modes".into(),
        ));
    }
    let mut basis = DMatrix::<f64>::zeros(n_modes, null_cols.len());
    for (k, &i) in null_cols.iter().enumerate() {
        basis.set_column(k, &se.eigenvectors.column(i));
    }

    // Rayleigh quotient weights in coordinates.
    let w_da: Vec<f64> = (1..=n_modes)
        .map(|j| (table.nu2() * table.alpha(j)).powi(2) * basis_h_norm_sq(j))
        .collect();
    let w_v: Vec<f64> = (1..=n_modes)
        .map(|j| table.nu2() * table.alpha(j) * basis_h_norm_sq(j))
        .collect();
    let weighted = |weights: &[f64]| -> DMatrix<f64> {
        let mut scaled = basis.clone();
        for r in 0..n_modes {
            for c in 0..scaled.ncols() {
                scaled[(r, c)] *= weights[r];
            }
        }
        basis.transpose() * scaled
    };
    let a = weighted(&w_da);
    let b = weighted(&w_v);

    // Generalized symmetric eigenproblem A u = β B u via Cholesky of B.
    let chol = nalgebra::Cholesky::new(b).ok_or_else(|| {
        Error::Domain("V-norm Gram matrix on the null space is not positive definite".into())
    })?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&a)
        .ok_or_else(|| Error::Domain("singular triangular factor".into()))?;
    let t = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Domain("singular triangular factor".into()))?;
    let sym = (&t + t.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    Ok(eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min))
}
