//! Nominal Kuramoto–Sivashinsky dynamics (flame and fluid variants), the
//! observer coupling, and the IMEX time integrator.
//!
//! In Galerkin coordinates the n-th mode of either variant evolves as
//!
//! ```text
//! ẏ_n = 𝔞_n y_n + F_n,        𝔞_n = -ν₂ ᾱ_n² + ν₁ ᾱ_n,
//! ```
//!
//! where `F` collects the projected nonlinearity (flame: `-ν₀ P(½ (∂_x y)²)`,
//! fluid: `-ν₀ P(y ∂_x y)`) plus, for the observer, the output-injection
//! forcing. Time stepping is Crank–Nicolson on the stiff linear part and a
//! two-step Adams–Bashforth extrapolation of `F`:
//!
//! ```text
//! y^{k+1}_n (1 - dt/2 𝔞_n) = y^k_n (1 + dt/2 𝔞_n) + dt (3/2 F^k_n - 1/2 F^{k-1}_n),
//! ```
//!
//! bootstrapped with one explicit-Euler treatment of `F` on the first step.
//!
//! Nonlinear terms are evaluated pseudospectrally: spectral differentiation
//! (exact, swapping each sine/cosine pair), pointwise products on a uniform
//! grid wide enough that the product frequencies stay below the sampling
//! limit, and quadrature projection back onto the resolved modes. With the
//! dealiasing guard `M ≥ 4N` the projected nonlinearity is exact to roundoff,
//! which is what makes the conservation checks on the constant mode sharp.
//!
//! Free KS dynamics may blow up in finite time — that is a property of the
//! equation class, not a solver bug — so the loop watches for non-finite or
//! absurdly large coefficients and reports time and magnitude instead of
//! propagating NaNs.

use crate::basis::{
    basis_h_norm_sq, GridBasis, NormKind, QuadratureGrid, SpectralState, SpectrumTable,
};
use crate::injection::InjectionOperator;
use crate::sensing::{mode_evaluation_matrix, SensorSet};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Coefficient magnitude beyond which a trajectory counts as blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

/// Which Kuramoto–Sivashinsky nonlinearity to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `ν₀ ½ (∂_x y)²` — flame propagation form.
    Flame,
    /// `ν₀ y ∂_x y` — fluid flow form.
    Fluid,
}

/// Viscosity-like coefficients and the model variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub nu2: f64,
    pub nu1: f64,
    pub nu0: f64,
    pub variant: Variant,
}

impl ModelParams {
    /// Flame-variant parameters used throughout the experiments:
    /// `ν₂ = 10⁻⁶, ν₁ = 10⁻², ν₀ = 10⁻²`.
    pub fn flame() -> Self {
        Self {
            nu2: 1e-6,
            nu1: 1e-2,
            nu0: 1e-2,
            variant: Variant::Flame,
        }
    }

    /// Fluid-variant parameters: same `ν₂, ν₁`, with `ν₀ = 1`.
    pub fn fluid() -> Self {
        Self {
            nu2: 1e-6,
            nu1: 1e-2,
            nu0: 1.0,
            variant: Variant::Fluid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("nu2", self.nu2), ("nu1", self.nu1), ("nu0", self.nu0)] {
            if !(v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Linear growth/decay rate `𝔞_n = -ν₂ ᾱ_n² + ν₁ ᾱ_n` of mode `n`.
pub fn linear_coefficient(n: usize, params: &ModelParams) -> f64 {
    let a = crate::basis::laplacian_eigenvalue(n).expect("n >= 1");
    -params.nu2 * a * a + params.nu1 * a
}

/// Number of non-damped modes (`𝔞_n ≥ 0`) among the first `n_modes`.
pub fn unstable_mode_count(params: &ModelParams, n_modes: usize) -> usize {
    (1..=n_modes)
        .filter(|&n| linear_coefficient(n, params) >= 0.0)
        .count()
}

/// Galerkin coordinates of the projected flame nonlinearity `P(½ ν₀ (∂_x y)²)`.
pub fn flame_nonlinearity(
    state: &SpectralState,
    grid: &QuadratureGrid,
    params: &ModelParams,
) -> Result<SpectralState> {
    nonlinearity(state, grid, params, Variant::Flame)
}

/// Galerkin coordinates of the projected fluid nonlinearity `P(ν₀ y ∂_x y)`.
pub fn fluid_nonlinearity(
    state: &SpectralState,
    grid: &QuadratureGrid,
    params: &ModelParams,
) -> Result<SpectralState> {
    nonlinearity(state, grid, params, Variant::Fluid)
}

fn nonlinearity(
    state: &SpectralState,
    grid: &QuadratureGrid,
    params: &ModelParams,
    variant: Variant,
) -> Result<SpectralState> {
    let n = state.n_modes();
    check_dealiased(grid.len(), n)?;
    let gb = GridBasis::new(grid, n);
    let mut work = Workspace::new(grid.len(), n);
    let coeffs = apply_nonlinearity(&gb, &state.coeffs, params, variant, &mut work);
    Ok(SpectralState::new(coeffs, state.t))
}

fn check_dealiased(m: usize, n: usize) -> Result<()> {
    if m < 4 * n {
        return Err(Error::Domain(format!(
            "grid of {m} nodes is not dealiased for {n} modes; need M ≥ 4N"
        )));
    }
    Ok(())
}

struct Workspace {
    samples: Vec<f64>,
    dsamples: Vec<f64>,
    coeffs: Vec<f64>,
}

impl Workspace {
    fn new(m: usize, n: usize) -> Self {
        Self {
            samples: vec![0.0; m],
            dsamples: vec![0.0; m],
            coeffs: vec![0.0; n],
        }
    }
}

fn apply_nonlinearity(
    gb: &GridBasis,
    coeffs: &[f64],
    params: &ModelParams,
    variant: Variant,
    work: &mut Workspace,
) -> Vec<f64> {
    gb.synthesize_derivative(coeffs, &mut work.dsamples);
    match variant {
        Variant::Flame => {
            for q in work.dsamples.iter_mut() {
                *q = 0.5 * params.nu0 * *q * *q;
            }
        }
        Variant::Fluid => {
            gb.synthesize(coeffs, &mut work.samples);
            for (q, y) in work.dsamples.iter_mut().zip(&work.samples) {
                *q *= params.nu0 * *y;
            }
        }
    }
    gb.analyze(&work.dsamples, &mut work.coeffs);
    work.coeffs.clone()
}

/// One IMEX step: Crank–Nicolson on the linear coefficients, Adams–Bashforth
/// (or explicit Euler when no history exists) on the explicit term.
pub fn imex_step(
    y: &[f64],
    f_k: &[f64],
    f_km1: Option<&[f64]>,
    dt: f64,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    let n = y.len();
    if f_k.len() != n || f_km1.is_some_and(|f| f.len() != n) {
        return Err(Error::Dimension {
            what: "explicit term",
            expected: n,
            got: f_k.len(),
        });
    }
    let mut out = vec![0.0; n];
    for i in 0..n {
        let a = linear_coefficient(i + 1, params);
        let den = 1.0 - 0.5 * dt * a;
        if den.abs() < 1e-14 {
            return Err(Error::StepSize(format!(
                "Crank–Nicolson denominator vanishes for mode {} at dt = {dt}",
                i + 1
            )));
        }
        let explicit = match f_km1 {
            Some(prev) => 1.5 * f_k[i] - 0.5 * prev[i],
            None => f_k[i],
        };
        out[i] = ((1.0 + 0.5 * dt * a) * y[i] + dt * explicit) / den;
    }
    Ok(out)
}

/// Everything a coupled nominal/observer run needs.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub params: ModelParams,
    pub n_modes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub grid_m: usize,
    pub sensors: SensorSet,
    pub lambda_gain: f64,
    pub initial_nominal: SpectralState,
    pub initial_estimate: SpectralState,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if self.t_end < self.dt {
            return Err(Error::Domain(format!(
                "t_end = {} shorter than one step dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.n_modes > self.grid_m / 4 {
            return Err(Error::Domain(format!(
                "need n_modes ≤ grid_m/4 for dealiasing: {} > {}/4",
                self.n_modes, self.grid_m
            )));
        }
        if self.lambda_gain < 0.0 {
            return Err(Error::Domain("lambda must be ≥ 0".into()));
        }
        for (name, state) in [
            ("initial_nominal", &self.initial_nominal),
            ("initial_estimate", &self.initial_estimate),
        ] {
            if state.n_modes() != self.n_modes {
                return Err(Error::Dimension {
                    what: match name {
                        "initial_nominal" => "initial nominal state",
                        _ => "initial estimate state",
                    },
                    expected: self.n_modes,
                    got: state.n_modes(),
                });
            }
        }
        Ok(())
    }

    /// Number of time steps, so `records = steps + 1`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }
}

/// Per-step records of a coupled run.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub nominal: Vec<Vec<f64>>,
    pub estimate: Vec<Vec<f64>>,
    pub err_h: Vec<f64>,
    pub err_v: Vec<f64>,
    pub output_err: Vec<Vec<f64>>,
    s_sigma: usize,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn s_sigma(&self) -> usize {
        self.s_sigma
    }

    pub fn empty(s_sigma: usize) -> Self {
        Self {
            times: Vec::new(),
            nominal: Vec::new(),
            estimate: Vec::new(),
            err_h: Vec::new(),
            err_v: Vec::new(),
            output_err: Vec::new(),
            s_sigma,
        }
    }
}

/// Co-evolve the nominal state and the observer estimate.
///
/// The nominal system never sees the injection; the observer's explicit term
/// is the nonlinearity plus the injected forcing computed from the current
/// output error `ω_k = Z_S y_e − Z_S y_r`. Passing `None` (or a zero gain)
/// runs the free estimate.
pub fn simulate(
    config: &SimulationConfig,
    injection: Option<&InjectionOperator>,
) -> Result<TimeSeries> {
    config.validate()?;
    let n = config.n_modes;
    if let Some(op) = injection {
        if op.s_sigma() != config.sensors.len() {
            return Err(Error::Dimension {
                what: "injection operator sensor count",
                expected: config.sensors.len(),
                got: op.s_sigma(),
            });
        }
        if op.n_modes() < n {
            return Err(Error::Dimension {
                what: "injection operator mode count",
                expected: n,
                got: op.n_modes(),
            });
        }
    }

    let table = SpectrumTable::new(n, config.params.nu2);
    let grid = QuadratureGrid::new(config.grid_m)?;
    let gb = GridBasis::new(&grid, n);
    let sensor_matrix = mode_evaluation_matrix(&config.sensors, n);
    let s_sigma = config.sensors.len();
    let steps = config.steps();

    // Precomputed Crank–Nicolson factors.
    let mut cn_num = vec![0.0; n];
    let mut cn_inv_den = vec![0.0; n];
    for i in 0..n {
        let a = linear_coefficient(i + 1, &config.params);
        let den = 1.0 - 0.5 * config.dt * a;
        if den.abs() < 1e-14 {
            return Err(Error::StepSize(format!(
                "Crank–Nicolson denominator vanishes for mode {}",
                i + 1
            )));
        }
        cn_num[i] = 1.0 + 0.5 * config.dt * a;
        cn_inv_den[i] = 1.0 / den;
    }

    let mut y_r = config.initial_nominal.coeffs.clone();
    let mut y_e = config.initial_estimate.coeffs.clone();
    let mut work = Workspace::new(config.grid_m, n);

    let mut ts = TimeSeries::empty(s_sigma);
    ts.times.reserve(steps + 1);

    let measure_with = |matrix: &DMatrix<f64>, coeffs: &[f64]| -> Vec<f64> {
        (matrix * DVector::from_column_slice(coeffs))
            .iter()
            .cloned()
            .collect()
    };

    let explicit_term = |coeffs: &[f64],
                         omega: Option<&[f64]>,
                         work: &mut Workspace|
     -> Result<Vec<f64>> {
        let nl = apply_nonlinearity(&gb, coeffs, &config.params, config.params.variant, work);
        let mut f: Vec<f64> = nl.iter().map(|v| -v).collect();
        if let (Some(op), Some(omega)) = (injection, omega) {
            if op.lambda_gain() != 0.0 {
                let inj = op.coefficients(omega)?;
                for (fi, ii) in f.iter_mut().zip(&inj) {
                    *fi += ii;
                }
            }
        }
        Ok(f)
    };

    let record = |ts: &mut TimeSeries, t: f64, y_r: &[f64], y_e: &[f64]| -> Result<()> {
        let z = SpectralState::new(
            y_e.iter().zip(y_r).map(|(a, b)| a - b).collect(),
            t,
        );
        ts.times.push(t);
        ts.err_h.push(crate::basis::norm(&z, NormKind::H, &table)?);
        ts.err_v.push(crate::basis::norm(&z, NormKind::V, &table)?);
        let w_r = measure_with(&sensor_matrix, y_r);
        let w_e = measure_with(&sensor_matrix, y_e);
        ts.output_err
            .push(w_e.iter().zip(&w_r).map(|(a, b)| a - b).collect());
        ts.nominal.push(y_r.to_vec());
        ts.estimate.push(y_e.to_vec());
        Ok(())
    };

    let mut f_r_prev: Option<Vec<f64>> = None;
    let mut f_e_prev: Option<Vec<f64>> = None;

    for k in 0..=steps {
        let t = k as f64 * config.dt;
        record(&mut ts, t, &y_r, &y_e)?;
        if k == steps {
            break;
        }

        let omega: Vec<f64> = ts.output_err.last().expect("just recorded").clone();
        let f_r = explicit_term(&y_r, None, &mut work)?;
        let f_e = explicit_term(&y_e, Some(&omega), &mut work)?;

        step_in_place(&mut y_r, &f_r, f_r_prev.as_deref(), config.dt, &cn_num, &cn_inv_den);
        step_in_place(&mut y_e, &f_e, f_e_prev.as_deref(), config.dt, &cn_num, &cn_inv_den);

        let t_next = (k + 1) as f64 * config.dt;
        check_finite(&y_r, t_next)?;
        check_finite(&y_e, t_next)?;

        f_r_prev = Some(f_r);
        f_e_prev = Some(f_e);
    }
    Ok(ts)
}

fn step_in_place(
    y: &mut [f64],
    f_k: &[f64],
    f_km1: Option<&[f64]>,
    dt: f64,
    cn_num: &[f64],
    cn_inv_den: &[f64],
) {
    match f_km1 {
        Some(prev) => {
            for i in 0..y.len() {
                y[i] = (cn_num[i] * y[i] + dt * (1.5 * f_k[i] - 0.5 * prev[i])) * cn_inv_den[i];
            }
        }
        None => {
            for i in 0..y.len() {
                y[i] = (cn_num[i] * y[i] + dt * f_k[i]) * cn_inv_den[i];
            }
        }
    }
}

fn check_finite(coeffs: &[f64], t: f64) -> Result<()> {
    let mut sup = 0.0_f64;
    for &c in coeffs {
        if !c.is_finite() {
            return Err(Error::BlowUp {
                time: t,
                sup_norm: f64::INFINITY,
            });
        }
        sup = sup.max(c.abs());
    }
    if sup > BLOW_UP_THRESHOLD {
        return Err(Error::BlowUp { time: t, sup_norm: sup });
    }
    Ok(())
}

/// Mean of `(∂_x y)²` over the torus, the quantity that drags the flame
/// variant's constant mode downward.
pub fn mean_gradient_square(state: &SpectralState) -> f64 {
    // Parseval: ∫ (Σ c_j e_j')² = Σ over frequency pairs of the squared
    // derivative coefficients times the basis norms.
    let mut acc = 0.0;
    for (i, &c) in state.coeffs.iter().enumerate() {
        let j = i + 1;
        let lap = crate::basis::laplacian_eigenvalue(j).expect("j >= 1");
        acc += lap * c * c * basis_h_norm_sq(j);
    }
    acc
}
