//! Error-norm time series, exponential decay-rate fitting, and CSV export.
//!
//! The observer target is `‖z(t)‖ ≤ ϱ e^{-μ(t-s)} ‖z(s)‖`; a least-squares
//! line through `(t, log ‖z(t)‖)` quantifies the realized rate `μ̂` and the
//! transient bound `ϱ̂` on a chosen window.

use crate::dynamics::TimeSeries;
use crate::{Error, Result};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Which recorded error norm to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    H,
    V,
}

/// `(t_k, ‖z(t_k)‖)` pairs of the requested norm.
pub fn error_norm_series(ts: &TimeSeries, kind: ErrorNorm) -> Vec<(f64, f64)> {
    let norms = match kind {
        ErrorNorm::H => &ts.err_h,
        ErrorNorm::V => &ts.err_v,
    };
    ts.times.iter().cloned().zip(norms.iter().cloned()).collect()
}

/// Result of an exponential decay fit on a window.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// Fitted rate `μ̂ = -slope` of the log-norm line; positive means decay.
    pub rate: f64,
    /// Fitted log-amplitude at `t = 0`.
    pub intercept: f64,
    /// Goodness of fit of the log-linear model, in `[0, 1]`.
    pub rsq: f64,
    /// The `(t_start, t_end)` window the fit used.
    pub window: (f64, f64),
    /// Transient bound estimate: max over the window of
    /// `norm(t) / (e^{-μ̂ (t-t₀)} norm(t₀))`.
    pub transient_bound: f64,
}

/// Least-squares fit of `log norm` against `t` over `window` (inclusive).
///
/// Requires at least 10 samples in the window, all strictly positive.
pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (w0, w1) = window;
    if !(w1 > w0) {
        return Err(Error::Fit(format!("empty window ({w0}, {w1})")));
    }
    let selected: Vec<(f64, f64)> = series
        .iter()
        .cloned()
        .filter(|&(t, _)| t >= w0 && t <= w1)
        .collect();
    if selected.len() < 10 {
        return Err(Error::Fit(format!(
            "need ≥ 10 samples in the window, found {}",
            selected.len()
        )));
    }
    if let Some(&(t, v)) = selected.iter().find(|&&(_, v)| !(v > 0.0)) {
        return Err(Error::Fit(format!(
            "nonpositive norm {v} at t = {t}; the log-linear model is undefined there"
        )));
    }

    let n = selected.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &(t, v) in &selected {
        let y = v.ln();
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let denom = n * stt - st * st;
    if denom.abs() < 1e-300 {
        return Err(Error::Fit("degenerate time axis in window".into()));
    }
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;

    let mean_y = sy / n;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for &(t, v) in &selected {
        let y = v.ln();
        let fit = intercept + slope * t;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    // A residual at roundoff scale is a perfect fit even when the data are
    // (nearly) constant and ss_tot itself sits at roundoff.
    let rsq = if ss_res <= 1e-20 * n {
        1.0
    } else if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };

    let rate = -slope;
    let (t0, v0) = selected[0];
    let transient_bound = selected
        .iter()
        .map(|&(t, v)| v / ((-rate * (t - t0)).exp() * v0))
        .fold(0.0_f64, f64::max);

    Ok(DecayFit {
        rate,
        intercept,
        rsq,
        window,
        transient_bound,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a run's time series: header `t,norm_H,norm_V,out_err_1,...`, one row
/// per record, full double precision (17 significant digits).
pub fn export_csv(ts: &TimeSeries, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let mut w = BufWriter::new(file);
    let mut header = String::from("t,norm_H,norm_V");
    for j in 1..=ts.s_sigma() {
        header.push_str(&format!(",out_err_{j}"));
    }
    writeln!(w, "{header}")?;
    for k in 0..ts.len() {
        let mut row = format!(
            "{},{},{}",
            fmt(ts.times[k]),
            fmt(ts.err_h[k]),
            fmt(ts.err_v[k])
        );
        for v in &ts.output_err[k] {
            row.push(',');
            row.push_str(&fmt(*v));
        }
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a sweep summary.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub lambda: f64,
    pub rate: f64,
    pub rsq: f64,
    pub final_over_initial: f64,
}

/// Write a sweep summary: `lambda,rate,rsq,final_over_initial`.
pub fn export_sweep_summary(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "lambda,rate,rsq,final_over_initial")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            fmt(r.lambda),
            fmt(r.rate),
            fmt(r.rsq),
            fmt(r.final_over_initial)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Write a dense matrix as `r,c,value` rows (row-major), for audit.
pub fn export_matrix_csv(mat: &nalgebra::DMatrix<f64>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "r,c,value")?;
    for r in 0..mat.nrows() {
        for c in 0..mat.ncols() {
            writeln!(w, "{},{},{}", r + 1, c + 1, fmt(mat[(r, c)]))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{norm, NormKind, SpectralState, SpectrumTable};
    use crate::dynamics::{simulate, ModelParams, SimulationConfig};
    use crate::sensing::{ReferenceSet, SensorSet};

    fn short_run() -> (SimulationConfig, TimeSeries) {
        let n = 24;
        let config = SimulationConfig {
            params: ModelParams::flame(),
            n_modes: n,
            dt: 1e-3,
            t_end: 0.1,
            grid_m: 4 * n,
            sensors: SensorSet::from_reference(&ReferenceSet::offset_eighths(), 1).unwrap(),
            lambda_gain: 0.0,
            initial_nominal: SpectralState::from_modes(n, &[(1, 1.0), (4, 1.0)]).unwrap(),
            initial_estimate: SpectralState::from_modes(n, &[(3, 1.0), (4, 0.5)]).unwrap(),
        };
        let ts = simulate(&config, None).unwrap();
        (config, ts)
    }

    #[test]
    fn series_matches_recomputation_from_coefficients() {
        let (config, ts) = short_run();
        let table = SpectrumTable::new(config.n_modes, config.params.nu2);
        let series = error_norm_series(&ts, ErrorNorm::V);
        assert_eq!(series.len(), ts.len());
        for (k, &(t, v)) in series.iter().enumerate() {
            let z = SpectralState::new(
                ts.estimate[k]
                    .iter()
                    .zip(&ts.nominal[k])
                    .map(|(a, b)| a - b)
                    .collect(),
                t,
            );
            let recomputed = norm(&z, NormKind::V, &table).unwrap();
            assert!((v - recomputed).abs() <= 1e-12 * recomputed.max(1e-300));
        }
    }

    #[test]
    fn zero_error_run_gives_zero_series() {
        let (config, _) = short_run();
        let mut config = config;
        config.initial_estimate = config.initial_nominal.clone();
        let ts = simulate(&config, None).unwrap();
        assert!(error_norm_series(&ts, ErrorNorm::H)
            .iter()
            .all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn exact_exponential_is_fit_exactly() {
        let series: Vec<(f64, f64)> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.01;
                (t, 3.0 * (-2.0 * t).exp())
            })
            .collect();
        let fit = fit_decay_rate(&series, (0.0, 2.0)).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-9);
        assert!((fit.intercept - 3.0_f64.ln()).abs() < 1e-9);
        assert!((fit.rsq - 1.0).abs() < 1e-12);
        assert!(fit.transient_bound <= 1.0 + 1e-9);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let series: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 0.1, 4.0)).collect();
        let fit = fit_decay_rate(&series, (0.0, 5.0)).unwrap();
        assert!(fit.rate.abs() < 1e-12);
        assert_eq!(fit.rsq, 1.0);
    }

    #[test]
    fn perturbed_exponential_fits_close() {
        let series: Vec<(f64, f64)> = (0..2000)
            .map(|k| {
                let t = k as f64 * 0.005;
                (t, 3.0 * (-2.0 * t).exp() * (1.0 + 0.01 * t.sin()))
            })
            .collect();
        let fit = fit_decay_rate(&series, (0.0, 10.0)).unwrap();
        assert!((fit.rate - 2.0).abs() < 0.02, "rate {}", fit.rate);
    }

    #[test]
    fn fit_is_invariant_under_norm_scaling() {
        let series: Vec<(f64, f64)> = (0..100)
            .map(|k| {
                let t = k as f64 * 0.02;
                (t, (-1.3 * t).exp() * (1.0 + 0.002 * (7.0 * t).cos()))
            })
            .collect();
        let scaled: Vec<(f64, f64)> = series.iter().map(|&(t, v)| (t, 250.0 * v)).collect();
        let f1 = fit_decay_rate(&series, (0.0, 2.0)).unwrap();
        let f2 = fit_decay_rate(&scaled, (0.0, 2.0)).unwrap();
        assert!((f1.rate - f2.rate).abs() < 1e-10);
        assert!((f2.intercept - f1.intercept - 250.0_f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn nonpositive_norms_are_rejected_with_explanation() {
        let mut series: Vec<(f64, f64)> =
            (0..50).map(|k| (k as f64 * 0.1, 1.0)).collect();
        series[20].1 = 0.0;
        match fit_decay_rate(&series, (0.0, 5.0)) {
            Err(Error::Fit(msg)) => assert!(msg.contains("nonpositive")),
            other => panic!("expected fit error, got {other:?}"),
        }
        assert!(fit_decay_rate(&series[..5], (0.0, 0.4)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let (_, ts) = short_run();
        let dir = std::env::temp_dir().join("ks_observer_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.csv");
        export_csv(&ts, &path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("t,norm_H,norm_V,out_err_1"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), ts.len());
        for (k, row) in rows.iter().enumerate() {
            let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
            assert_eq!(fields.len(), 3 + ts.s_sigma());
            assert!((fields[0] - ts.times[k]).abs() < 1e-15);
            assert!((fields[1] - ts.err_h[k]).abs() <= 1e-15 * ts.err_h[k].max(1.0));
            assert!((fields[2] - ts.err_v[k]).abs() <= 1e-15 * ts.err_v[k].max(1.0));
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn empty_series_writes_header_only() {
        let ts = TimeSeries::empty(4);
        let dir = std::env::temp_dir().join("ks_observer_csv_empty");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.csv");
        export_csv(&ts, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.trim(), "t,norm_H,norm_V,out_err_1,out_err_2,out_err_3,out_err_4");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn io_failure_reports_path() {
        let (_, ts) = short_run();
        let path = Path::new("/nonexistent-dir-for-sure/run.csv");
        match export_csv(&ts, path) {
            Err(Error::Io(e)) => assert!(e.to_string().contains("nonexistent-dir-for-sure")),
            other => panic!("expected io error, got {other:?}"),
        }
    }
}
