//! The output-injection operator that drives the observer.
//!
//! Given an output error `ω = Z_S y_e − Z_S y_r ∈ R^{S_σ}`, the injected
//! forcing has Galerkin coordinates
//!
//! ```text
//! I = -(λ/ν₂) D_α^{-1} E_plainᵀ Λ ω ∈ R^N,
//! ```
//!
//! where `D_α = diag(α_1, ..., α_N)` and `Λ ∈ R^{S_σ×S_σ}` is a weighting
//! matrix normalized so that the smallest eigenvalue of `Λ + Λᵀ` is exactly 1.
//! That normalization is the monotonicity property `ωᵀΛω ≥ ½‖ω‖²` in disguise.
//!
//! The weighting is built from the leading square block `E̲` of the
//! measurement matrix as `Λ̄ = E̲^{-ᵀ} D̲_α E̲ᵀ`, then rescaled by the smallest
//! eigenvalue of `Λ̄ + Λ̄ᵀ`. Two consequences make the construction auditable:
//!
//! * `Λ̄` is similar to `D̲_α`, so its eigenvalues are exactly `α_1, ..., α_{S_σ}`;
//! * on the first `S_σ` coordinates the injection collapses to
//!   `I(1..S_σ) = -(λ/ν₂) · scale · E̲ᵀ ω` with `scale = 1/eig(Λ̄+Λ̄ᵀ, 1)`,
//!   which is why this choice spreads comparable forcing magnitudes across
//!   the resolved modes.
//!
//! The construction needs `E̲` invertible. That is a real restriction: sensor
//! families that place all points on the uniform grid `k/S_σ` annihilate the
//! mode `sin(S_σ π x)` and are rejected here as numerically inadmissible.

use crate::sensing::OutputMatrices;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Condition-number guard for the leading evaluation block.
const COND_LIMIT: f64 = 1e12;

/// A fully built output-injection operator.
#[derive(Debug, Clone)]
pub struct InjectionOperator {
    lambda_gain: f64,
    nu2: f64,
    lambda_mat: DMatrix<f64>,
    scale: f64,
    e_plain: DMatrix<f64>,
    d_alpha: Vec<f64>,
}

impl InjectionOperator {
    /// Build the operator with the square-block weighting `Λ`.
    ///
    /// `nu2` must match the spectrum table used to build `matrices`.
    pub fn build(matrices: &OutputMatrices, lambda_gain: f64, nu2: f64) -> Result<Self> {
        if lambda_gain < 0.0 {
            return Err(Error::Domain(format!(
                "injection gain must be ≥ 0, got {lambda_gain}"
            )));
        }
        let s_sigma = matrices.s_sigma();
        if matrices.n_modes() < s_sigma {
            return Err(Error::Dimension {
                what: "output matrix columns vs sensor count",
                expected: s_sigma,
                got: matrices.n_modes(),
            });
        }
        let e_block = matrices.e_plain.columns(0, s_sigma).into_owned();

        let svd = e_block.clone().svd(false, false);
        let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        let smin = svd
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if !(smin > 0.0) || smax / smin > COND_LIMIT {
            return Err(Error::Inadmissible(format!(
                "leading {s_sigma}×{s_sigma} evaluation block has condition number {:.3e}; \
                 sensor set is numerically inadmissible for this basis ordering",
                if smin > 0.0 { smax / smin } else { f64::INFINITY }
            )));
        }

        // Λ̄ = E̲^{-ᵀ} D̲_α E̲ᵀ, via one LU solve against E̲ᵀ.
        let mut rhs = e_block.transpose();
        for r in 0..s_sigma {
            let a = matrices.d_alpha[r];
            for c in 0..s_sigma {
                rhs[(r, c)] *= a;
            }
        }
        let lu = e_block.transpose().lu();
        let lambda_bar = lu.solve(&rhs).ok_or_else(|| {
            Error::Inadmissible("leading evaluation block is singular".into())
        })?;

        let sym = &lambda_bar + lambda_bar.transpose();
        let eig = nalgebra::SymmetricEigen::new(sym);
        let eigmin = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if !(eigmin > 0.0) {
            return Err(Error::Inadmissible(format!(
                "Λ̄ + Λ̄ᵀ is not positive definite (smallest eigenvalue {eigmin:.3e})"
            )));
        }
        let lambda_mat = lambda_bar / eigmin;

        Ok(Self {
            lambda_gain,
            nu2,
            lambda_mat,
            scale: 1.0 / eigmin,
            e_plain: matrices.e_plain.clone(),
            d_alpha: matrices.d_alpha.clone(),
        })
    }

    /// Operator with an explicit weighting matrix (for example the identity).
    /// The matrix must already satisfy `eig(Λ+Λᵀ, 1) ≥ 1` up to roundoff.
    pub fn with_matrix(
        matrices: &OutputMatrices,
        lambda_gain: f64,
        nu2: f64,
        lambda_mat: DMatrix<f64>,
    ) -> Result<Self> {
        let s_sigma = matrices.s_sigma();
        if lambda_mat.nrows() != s_sigma || lambda_mat.ncols() != s_sigma {
            return Err(Error::Dimension {
                what: "weighting matrix",
                expected: s_sigma,
                got: lambda_mat.nrows(),
            });
        }
        let sym = &lambda_mat + lambda_mat.transpose();
        let eig = nalgebra::SymmetricEigen::new(sym);
        let eigmin = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if eigmin < 1.0 - 1e-9 {
            return Err(Error::Domain(format!(
                "weighting matrix violates eig(Λ+Λᵀ,1) ≥ 1: got {eigmin}"
            )));
        }
        Ok(Self {
            lambda_gain,
            nu2,
            lambda_mat,
            scale: 1.0,
            e_plain: matrices.e_plain.clone(),
            d_alpha: matrices.d_alpha.clone(),
        })
    }

    /// Replace the gain, keeping the built matrices.
    pub fn with_gain(mut self, lambda_gain: f64) -> Self {
        self.lambda_gain = lambda_gain;
        self
    }

    pub fn lambda_gain(&self) -> f64 {
        self.lambda_gain
    }

    pub fn nu2(&self) -> f64 {
        self.nu2
    }

    pub fn s_sigma(&self) -> usize {
        self.lambda_mat.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.e_plain.ncols()
    }

    /// The normalized weighting matrix `Λ`.
    pub fn lambda_matrix(&self) -> &DMatrix<f64> {
        &self.lambda_mat
    }

    /// Recorded normalizer `1 / eig(Λ̄+Λ̄ᵀ, 1)`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Galerkin coordinates of the injected forcing for an output error `ω`:
    /// `I = -(λ/ν₂) D_α^{-1} E_plainᵀ Λ ω`.
    pub fn coefficients(&self, omega: &[f64]) -> Result<Vec<f64>> {
        if omega.len() != self.s_sigma() {
            return Err(Error::Dimension {
                what: "output error vector",
                expected: self.s_sigma(),
                got: omega.len(),
            });
        }
        let w = DVector::from_column_slice(omega);
        let lw = &self.lambda_mat * w;
        let et_lw = self.e_plain.transpose() * lw;
        let factor = -self.lambda_gain / self.nu2;
        Ok((0..self.n_modes())
            .map(|i| factor * et_lw[i] / self.d_alpha[i])
            .collect())
    }

    /// Monotonicity margin `ωᵀΛω − ½‖ω‖²`; nonnegative (up to roundoff) by
    /// the smallest-eigenvalue normalization.
    pub fn monotonicity_gap(&self, omega: &[f64]) -> Result<f64> {
        if omega.len() != self.s_sigma() {
            return Err(Error::Dimension {
                what: "output error vector",
                expected: self.s_sigma(),
                got: omega.len(),
            });
        }
        let w = DVector::from_column_slice(omega);
        let quad = w.dot(&(&self.lambda_mat * &w));
        Ok(quad - 0.5 * w.norm_squared())
    }
}
