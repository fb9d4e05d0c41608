//! Configuration parsing and scenario orchestration for the `ks-observer`
//! command-line tool.
//!
//! Configs are flat `key = value` documents (`#` starts a comment). Every key
//! has a default except `scenario`, which must be given explicitly:
//!
//! ```text
//! scenario = observe          # free | observe | sweep-lambda | sweep-s |
//!                             # cps-verify | validate-sensors
//! variant = flame             # flame | fluid
//! nu2 = 1e-6
//! nu1 = 1e-2
//! nu0 = 1e-2                  # defaults to 1.0 when variant = fluid
//! n_modes = 200
//! dt = 1e-3
//! t_end = 20
//! grid_m = 2048
//! reference = 0, 0.25, 0.5, 0.75
//! s = 9                       # refinement level; S_sigma = 4*s is computed
//! lambda = 1e-7
//! lambda_list = 0, 1e-8, 1e-7 # sweep-lambda only
//! s_list = 1, 2, 3            # sweep-s / cps-verify
//! seed = 0
//! fit_start = 10              # decay-fit window; defaults to [t_end/2, t_end]
//! fit_end = 20
//! initial_nominal = 1:1, 4:1  # mode:coefficient pairs
//! initial_estimate = 3:1, 4:0.5
//! export_matrices = false     # also write E_plain / E_weighted / Lambda CSVs
//! out_dir = out
//! ```
//!
//! Scenario outputs land in `out_dir`: single runs write `series.csv` (schema
//! `t,norm_H,norm_V,out_err_1,...`) plus a one-row `summary.csv`; sweeps write
//! one series CSV per member plus a summary row per member; `cps-verify` and
//! `validate-sensors` write verdict tables. All floats are emitted with 17
//! significant digits so reruns can be diffed byte-for-byte.

use crate::analysis::{
    error_norm_series, export_csv, export_matrix_csv, export_sweep_summary, fit_decay_rate,
    DecayFit, ErrorNorm, SweepRow,
};
use crate::basis::{SpectralState, SpectrumTable};
use crate::dynamics::{simulate, ModelParams, SimulationConfig, TimeSeries, Variant};
use crate::injection::InjectionOperator;
use crate::sensing::{
    cps_closed_form, cps_numeric, validate_reference_set, Admissibility, OutputMatrices,
    ReferenceSet, SensorSet,
};
use crate::{Error, Result};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Environment variable limiting sweep worker threads.
pub const WORKERS_ENV: &str = "KS_OBSERVER_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Free,
    Observe,
    SweepLambda,
    SweepS,
    CpsVerify,
    ValidateSensors,
}

impl Scenario {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "free" => Scenario::Free,
            "observe" => Scenario::Observe,
            "sweep-lambda" => Scenario::SweepLambda,
            "sweep-s" => Scenario::SweepS,
            "cps-verify" => Scenario::CpsVerify,
            "validate-sensors" | "sensors-validate" => Scenario::ValidateSensors,
            other => {
                return Err(Error::Config(format!(
                    "unknown scenario '{other}' (expected free, observe, sweep-lambda, \
                     sweep-s, cps-verify or validate-sensors)"
                )))
            }
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scenario::Free => "free",
            Scenario::Observe => "observe",
            Scenario::SweepLambda => "sweep-lambda",
            Scenario::SweepS => "sweep-s",
            Scenario::CpsVerify => "cps-verify",
            Scenario::ValidateSensors => "validate-sensors",
        };
        f.write_str(s)
    }
}

/// A fully resolved run request.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub scenario: Scenario,
    pub params: ModelParams,
    pub n_modes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub grid_m: usize,
    pub reference: [f64; 4],
    pub s_level: usize,
    pub lambda: f64,
    pub lambda_list: Vec<f64>,
    pub s_list: Vec<usize>,
    pub seed: u64,
    pub fit_start: Option<f64>,
    pub fit_end: Option<f64>,
    pub initial_nominal: Vec<(usize, f64)>,
    pub initial_estimate: Vec<(usize, f64)>,
    pub export_matrices: bool,
    pub out_dir: PathBuf,
}

impl RunSpec {
    pub fn fit_window(&self) -> (f64, f64) {
        (
            self.fit_start.unwrap_or(self.t_end / 2.0),
            self.fit_end.unwrap_or(self.t_end),
        )
    }
}

/// Partially parsed config; defaults are resolved in [`Draft::finish`].
#[derive(Debug, Clone, Default)]
struct Draft {
    scenario: Option<Scenario>,
    variant: Option<Variant>,
    nu2: Option<f64>,
    nu1: Option<f64>,
    nu0: Option<f64>,
    n_modes: Option<usize>,
    dt: Option<f64>,
    t_end: Option<f64>,
    grid_m: Option<usize>,
    reference: Option<[f64; 4]>,
    s_level: Option<usize>,
    lambda: Option<f64>,
    lambda_list: Option<Vec<f64>>,
    s_list: Option<Vec<usize>>,
    seed: Option<u64>,
    fit_start: Option<f64>,
    fit_end: Option<f64>,
    initial_nominal: Option<Vec<(usize, f64)>>,
    initial_estimate: Option<Vec<(usize, f64)>>,
    export_matrices: Option<bool>,
    out_dir: Option<PathBuf>,
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{v}' as a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{v}' as an integer")))
}

fn parse_f64_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|p| parse_f64(key, p)).collect()
}

fn parse_usize_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|p| parse_usize(key, p)).collect()
}

fn parse_mode_list(key: &str, v: &str) -> Result<Vec<(usize, f64)>> {
    v.split(',')
        .map(|pair| {
            let mut it = pair.splitn(2, ':');
            let mode = it
                .next()
                .ok_or_else(|| Error::Config(format!("key '{key}': empty entry")))?;
            let coeff = it.next().ok_or_else(|| {
                Error::Config(format!(
                    "key '{key}': entry '{pair}' is not of the form mode:coefficient"
                ))
            })?;
            Ok((parse_usize(key, mode)?, parse_f64(key, coeff)?))
        })
        .collect()
}

impl Draft {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scenario" => self.scenario = Some(Scenario::parse(value.trim())?),
            "variant" => {
                self.variant = Some(match value.trim() {
                    "flame" => Variant::Flame,
                    "fluid" => Variant::Fluid,
                    other => {
                        return Err(Error::Config(format!(
                            "key 'variant': expected flame or fluid, got '{other}'"
                        )))
                    }
                })
            }
            "nu2" => self.nu2 = Some(parse_f64(key, value)?),
            "nu1" => self.nu1 = Some(parse_f64(key, value)?),
            "nu0" => self.nu0 = Some(parse_f64(key, value)?),
            "n_modes" => self.n_modes = Some(parse_usize(key, value)?),
            "dt" => self.dt = Some(parse_f64(key, value)?),
            "t_end" => self.t_end = Some(parse_f64(key, value)?),
            "grid_m" => self.grid_m = Some(parse_usize(key, value)?),
            "reference" => {
                let pts = parse_f64_list(key, value)?;
                if pts.len() != 4 {
                    return Err(Error::Config(format!(
                        "key 'reference': need exactly 4 torus points, got {}",
                        pts.len()
                    )));
                }
                self.reference = Some([pts[0], pts[1], pts[2], pts[3]]);
            }
            "s" => self.s_level = Some(parse_usize(key, value)?),
            "s_sigma" => {
                return Err(Error::Config(
                    "key 's_sigma' is computed as 4·s and is not user-settable".into(),
                ))
            }
            "lambda" => self.lambda = Some(parse_f64(key, value)?),
            "lambda_list" => self.lambda_list = Some(parse_f64_list(key, value)?),
            "s_list" => self.s_list = Some(parse_usize_list(key, value)?),
            "seed" => {
                self.seed = Some(value.trim().parse().map_err(|_| {
                    Error::Config(format!("key 'seed': cannot parse '{value}' as u64"))
                })?)
            }
            "fit_start" => self.fit_start = Some(parse_f64(key, value)?),
            "fit_end" => self.fit_end = Some(parse_f64(key, value)?),
            "initial_nominal" => self.initial_nominal = Some(parse_mode_list(key, value)?),
            "initial_estimate" => self.initial_estimate = Some(parse_mode_list(key, value)?),
            "export_matrices" => {
                self.export_matrices = Some(match value.trim() {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(Error::Config(format!(
                            "key 'export_matrices': expected true or false, got '{other}'"
                        )))
                    }
                })
            }
            "out_dir" => self.out_dir = Some(PathBuf::from(value.trim())),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    fn finish(self) -> Result<RunSpec> {
        let scenario = self
            .scenario
            .ok_or_else(|| Error::Config("scenario required".into()))?;
        let variant = self.variant.unwrap_or(Variant::Flame);
        let nu0_default = match variant {
            Variant::Flame => 1e-2,
            Variant::Fluid => 1.0,
        };
        let params = ModelParams {
            nu2: self.nu2.unwrap_or(1e-6),
            nu1: self.nu1.unwrap_or(1e-2),
            nu0: self.nu0.unwrap_or(nu0_default),
            variant,
        };
        params.validate().map_err(|e| Error::Config(e.to_string()))?;

        let t_end = self.t_end.unwrap_or(20.0);
        let spec = RunSpec {
            scenario,
            params,
            n_modes: self.n_modes.unwrap_or(200),
            dt: self.dt.unwrap_or(1e-3),
            t_end,
            grid_m: self.grid_m.unwrap_or(2048),
            reference: self.reference.unwrap_or([0.0, 0.25, 0.5, 0.75]),
            s_level: self.s_level.unwrap_or(9),
            lambda: self.lambda.unwrap_or(1e-7),
            lambda_list: self.lambda_list.unwrap_or_default(),
            s_list: self.s_list.unwrap_or_default(),
            seed: self.seed.unwrap_or(0),
            fit_start: self.fit_start,
            fit_end: self.fit_end,
            initial_nominal: self
                .initial_nominal
                .unwrap_or_else(|| vec![(1, 1.0), (4, 1.0)]),
            initial_estimate: self
                .initial_estimate
                .unwrap_or_else(|| vec![(3, 1.0), (4, 0.5)]),
            export_matrices: self.export_matrices.unwrap_or(false),
            out_dir: self.out_dir.unwrap_or_else(|| PathBuf::from("out")),
        };

        if spec.scenario == Scenario::SweepLambda && spec.lambda_list.is_empty() {
            return Err(Error::Config(
                "scenario sweep-lambda needs a nonempty lambda_list".into(),
            ));
        }
        if spec.scenario == Scenario::SweepS && spec.s_list.is_empty() {
            return Err(Error::Config(
                "scenario sweep-s needs a nonempty s_list".into(),
            ));
        }
        if spec.n_modes < 4 * spec.s_level {
            return Err(Error::Config(format!(
                "n_modes = {} cannot resolve S_sigma = {} sensors; need n_modes ≥ 4·s",
                spec.n_modes,
                4 * spec.s_level
            )));
        }
        Ok(spec)
    }
}

/// Parse a config document into a validated [`RunSpec`], with `overrides`
/// (from `--set key=value` flags) applied on top.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<RunSpec> {
    let mut draft = Draft::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.splitn(2, '=');
        let key = it.next().unwrap_or("").trim();
        let value = it
            .next()
            .ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?
            .trim();
        draft.set(key, value)?;
    }
    for (key, value) in overrides {
        draft.set(key, value)?;
    }
    draft.finish()
}

/// What a scenario produced, for logging and tests.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    pub messages: Vec<String>,
}

impl RunOutcome {
    fn push_artifact(&mut self, p: PathBuf) {
        self.artifacts.push(p);
    }

    fn log(&mut self, msg: String) {
        self.messages.push(msg);
    }
}

fn build_sensors(spec: &RunSpec, level: usize) -> Result<SensorSet> {
    let reference = ReferenceSet::line(spec.reference);
    SensorSet::from_reference(&reference, level)
}

fn build_sim_config(spec: &RunSpec, lambda: f64, level: usize) -> Result<SimulationConfig> {
    let sensors = build_sensors(spec, level)?;
    Ok(SimulationConfig {
        params: spec.params,
        n_modes: spec.n_modes,
        dt: spec.dt,
        t_end: spec.t_end,
        grid_m: spec.grid_m,
        sensors,
        lambda_gain: lambda,
        initial_nominal: SpectralState::from_modes(spec.n_modes, &spec.initial_nominal)?,
        initial_estimate: SpectralState::from_modes(spec.n_modes, &spec.initial_estimate)?,
    })
}

/// Summary statistics of one run.
struct RunStats {
    fit: Option<DecayFit>,
    final_over_initial: f64,
    decayed: bool,
}

fn summarize(spec: &RunSpec, ts: &TimeSeries) -> RunStats {
    let series = error_norm_series(ts, ErrorNorm::V);
    let first = series.first().map(|&(_, v)| v).unwrap_or(f64::NAN);
    let last = series.last().map(|&(_, v)| v).unwrap_or(f64::NAN);
    let final_over_initial = if first > 0.0 { last / first } else { f64::NAN };
    let fit = fit_decay_rate(&series, spec.fit_window()).ok();
    let decayed = final_over_initial < 1e-3 && fit.is_some_and(|f| f.rate > 0.0);
    RunStats {
        fit,
        final_over_initial,
        decayed,
    }
}

fn write_single_summary(path: &Path, lambda: f64, stats: &RunStats) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "lambda,rate,rsq,final_over_initial,decayed")?;
    let (rate, rsq) = stats
        .fit
        .map(|f| (f.rate, f.rsq))
        .unwrap_or((f64::NAN, f64::NAN));
    writeln!(
        w,
        "{:.16e},{:.16e},{:.16e},{:.16e},{}",
        lambda, rate, rsq, stats.final_over_initial, stats.decayed
    )?;
    Ok(())
}

fn single_run(spec: &RunSpec, lambda: f64, out: &mut RunOutcome) -> Result<()> {
    let config = build_sim_config(spec, lambda, spec.s_level)?;
    let injection = if lambda > 0.0 {
        let table = SpectrumTable::new(spec.n_modes, spec.params.nu2);
        let matrices = OutputMatrices::build(&config.sensors, &table);
        let op = InjectionOperator::build(&matrices, lambda, spec.params.nu2)?;
        if spec.export_matrices {
            let dir = &spec.out_dir;
            for (name, mat) in [
                ("e_plain.csv", &matrices.e_plain),
                ("e_weighted.csv", &matrices.e_weighted),
            ] {
                let p = dir.join(name);
                export_matrix_csv(mat, &p)?;
                out.push_artifact(p);
            }
            let p = dir.join("lambda_matrix.csv");
            export_matrix_csv(op.lambda_matrix(), &p)?;
            out.push_artifact(p);
        }
        Some(op)
    } else {
        None
    };

    let ts = simulate(&config, injection.as_ref())?;
    let series_path = spec.out_dir.join("series.csv");
    export_csv(&ts, &series_path)?;
    out.push_artifact(series_path);

    let stats = summarize(spec, &ts);
    let summary_path = spec.out_dir.join("summary.csv");
    write_single_summary(&summary_path, lambda, &stats)?;
    out.push_artifact(summary_path);

    match (&stats.fit, stats.decayed) {
        (Some(f), true) => out.log(format!(
            "decay: rate = {:.4e}, rsq = {:.4}, final/initial = {:.3e}",
            f.rate, f.rsq, stats.final_over_initial
        )),
        (Some(f), false) => out.log(format!(
            "no decay: rate = {:.4e}, rsq = {:.4}, final/initial = {:.3e}",
            f.rate, f.rsq, stats.final_over_initial
        )),
        (None, _) => out.log("no decay: fit unavailable (norms hit zero or window too short)".into()),
    }
    Ok(())
}

fn worker_count(jobs: usize) -> usize {
    let default = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(default)
        .min(jobs.max(1))
}

/// Run independent jobs on a small worker pool; results keep input order.
fn run_parallel<T: Send>(
    jobs: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Vec<Result<T>> {
    let workers = worker_count(jobs);
    let results: Vec<Mutex<Option<Result<T>>>> =
        (0..jobs).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let r = f(i);
                *results[i].lock().expect("poisoned job slot") = Some(r);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().expect("poisoned").expect("job ran"))
        .collect()
}

fn lambda_sweep(spec: &RunSpec, out: &mut RunOutcome) -> Result<()> {
    let jobs = spec.lambda_list.len();
    let results = run_parallel(jobs, |i| {
        let lambda = spec.lambda_list[i];
        let config = build_sim_config(spec, lambda, spec.s_level)?;
        let injection = if lambda > 0.0 {
            let table = SpectrumTable::new(spec.n_modes, spec.params.nu2);
            let matrices = OutputMatrices::build(&config.sensors, &table);
            Some(InjectionOperator::build(&matrices, lambda, spec.params.nu2)?)
        } else {
            None
        };
        let ts = simulate(&config, injection.as_ref())?;
        Ok((lambda, ts))
    });

    let mut rows = Vec::with_capacity(jobs);
    for (i, res) in results.into_iter().enumerate() {
        let (lambda, ts) = res?;
        let path = spec.out_dir.join(format!("run_{i:03}_lambda_{lambda:e}.csv"));
        export_csv(&ts, &path)?;
        out.push_artifact(path);
        let stats = summarize(spec, &ts);
        let (rate, rsq) = stats
            .fit
            .map(|f| (f.rate, f.rsq))
            .unwrap_or((f64::NAN, f64::NAN));
        rows.push(SweepRow {
            lambda,
            rate,
            rsq,
            final_over_initial: stats.final_over_initial,
        });
        out.log(format!(
            "lambda = {lambda:e}: rate = {rate:.4e}, final/initial = {:.3e}",
            stats.final_over_initial
        ));
    }
    let summary = spec.out_dir.join("summary.csv");
    export_sweep_summary(&rows, &summary)?;
    out.push_artifact(summary);
    Ok(())
}

fn s_sweep(spec: &RunSpec, out: &mut RunOutcome) -> Result<()> {
    let jobs = spec.s_list.len();
    let results = run_parallel(jobs, |i| {
        let level = spec.s_list[i];
        if spec.n_modes < 4 * level {
            return Err(Error::Config(format!(
                "n_modes = {} cannot resolve S = {level} (needs ≥ {})",
                spec.n_modes,
                4 * level
            )));
        }
        let config = build_sim_config(spec, spec.lambda, level)?;
        let injection = if spec.lambda > 0.0 {
            let table = SpectrumTable::new(spec.n_modes, spec.params.nu2);
            let matrices = OutputMatrices::build(&config.sensors, &table);
            Some(InjectionOperator::build(&matrices, spec.lambda, spec.params.nu2)?)
        } else {
            None
        };
        let ts = simulate(&config, injection.as_ref())?;
        Ok((level, ts))
    });

    use std::io::Write;
    let summary_path = spec.out_dir.join("summary.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&summary_path)?);
    writeln!(w, "s,rate,rsq,final_over_initial")?;
    for (i, res) in results.into_iter().enumerate() {
        let (level, ts) = res?;
        let path = spec.out_dir.join(format!("run_{i:03}_s_{level}.csv"));
        export_csv(&ts, &path)?;
        out.push_artifact(path);
        let stats = summarize(spec, &ts);
        let (rate, rsq) = stats
            .fit
            .map(|f| (f.rate, f.rsq))
            .unwrap_or((f64::NAN, f64::NAN));
        writeln!(
            w,
            "{level},{rate:.16e},{rsq:.16e},{:.16e}",
            stats.final_over_initial
        )?;
        out.log(format!(
            "S = {level}: rate = {rate:.4e}, final/initial = {:.3e}",
            stats.final_over_initial
        ));
    }
    w.flush()?;
    drop(w);
    out.push_artifact(summary_path);
    Ok(())
}

fn cps_verify(spec: &RunSpec, out: &mut RunOutcome) -> Result<()> {
    // The closed form is specific to the offset-eighths reference family, so
    // this scenario always uses it regardless of the configured reference.
    let levels = if spec.s_list.is_empty() {
        vec![1, 2, 3]
    } else {
        spec.s_list.clone()
    };
    use std::io::Write;
    let path = spec.out_dir.join("cps.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "s,closed_form,numeric,rel_err")?;
    let mut worst: f64 = 0.0;
    for &s in &levels {
        let sensors = SensorSet::from_reference(&ReferenceSet::offset_eighths(), s)?;
        let table = SpectrumTable::new(4 * s, spec.params.nu2);
        let closed = cps_closed_form(s, spec.params.nu2);
        let numeric = cps_numeric(&sensors, &table)?;
        let rel = (numeric - closed).abs() / closed;
        worst = worst.max(rel);
        writeln!(w, "{s},{closed:.16e},{numeric:.16e},{rel:.16e}")?;
        out.log(format!(
            "S = {s}: closed form {closed:.6e}, numeric {numeric:.6e}, rel err {rel:.3e}"
        ));
    }
    w.flush()?;
    drop(w);
    out.push_artifact(path);
    if worst >= 1e-6 {
        return Err(Error::Verification(format!(
            "projection-constant mismatch: worst relative error {worst:.3e} ≥ 1e-6 \
             (numeric value is the exact operator norm; see cps.csv)"
        )));
    }
    Ok(())
}

fn sensors_validate(spec: &RunSpec, out: &mut RunOutcome) -> Result<()> {
    use std::io::Write;
    let path = spec.out_dir.join("sensors.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "check,verdict,detail")?;

    let reference = ReferenceSet::line(spec.reference);
    let monomial = validate_reference_set(&reference);
    let admissible = monomial == Admissibility::Admissible;
    writeln!(
        w,
        "monomial-rank,{},degree-3 evaluation matrix at the 4 reference points",
        if admissible { "admissible" } else { "rank-deficient" }
    )?;
    out.log(format!(
        "monomial-rank: {}",
        if admissible { "admissible" } else { "rank-deficient" }
    ));

    let mut injection_ok = false;
    let detail;
    if admissible {
        match SensorSet::from_reference(&reference, spec.s_level) {
            Ok(sensors) => {
                let table = SpectrumTable::new(4 * spec.s_level, spec.params.nu2);
                let matrices = OutputMatrices::build(&sensors, &table);
                match InjectionOperator::build(&matrices, 0.0, spec.params.nu2) {
                    Ok(_) => {
                        injection_ok = true;
                        detail = format!("S = {} evaluation block is well conditioned", spec.s_level);
                    }
                    Err(e) => detail = e.to_string().replace(',', ";"),
                }
            }
            Err(e) => detail = e.to_string().replace(',', ";"),
        }
    } else {
        detail = "skipped: reference set already rank-deficient".into();
    }
    writeln!(
        w,
        "injection-block,{},{detail}",
        if injection_ok { "admissible" } else { "inadmissible" }
    )?;
    out.log(format!(
        "injection-block: {} ({detail})",
        if injection_ok { "admissible" } else { "inadmissible" }
    ));
    w.flush()?;
    drop(w);
    out.push_artifact(path);

    if !admissible || !injection_ok {
        return Err(Error::Verification(
            "sensor-set validation failed; see sensors.csv".into(),
        ));
    }
    Ok(())
}

/// Execute a run spec. Artifacts are written under `spec.out_dir`, which is
/// created if absent.
pub fn run(spec: &RunSpec) -> Result<RunOutcome> {
    std::fs::create_dir_all(&spec.out_dir)?;
    let mut out = RunOutcome::default();
    out.log(format!("scenario: {}", spec.scenario));
    match spec.scenario {
        Scenario::Free => single_run(spec, 0.0, &mut out)?,
        Scenario::Observe => single_run(spec, spec.lambda, &mut out)?,
        Scenario::SweepLambda => lambda_sweep(spec, &mut out)?,
        Scenario::SweepS => s_sweep(spec, &mut out)?,
        Scenario::CpsVerify => cps_verify(spec, &mut out)?,
        Scenario::ValidateSensors => sensors_validate(spec, &mut out)?,
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_requires_scenario() {
        match parse_config("", &[]) {
            Err(Error::Config(msg)) => assert!(msg.contains("scenario required")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_mirror_the_experiment_setup() {
        let spec = parse_config("scenario = free\n", &[]).unwrap();
        assert_eq!(spec.n_modes, 200);
        assert_eq!(spec.grid_m, 2048);
        assert!((spec.dt - 1e-3).abs() < 1e-18);
        assert_eq!(spec.s_level, 9);
        assert_eq!(spec.reference, [0.0, 0.25, 0.5, 0.75]);
        assert_eq!(spec.params.variant, Variant::Flame);
        assert!((spec.params.nu0 - 1e-2).abs() < 1e-18);
        assert_eq!(spec.initial_nominal, vec![(1, 1.0), (4, 1.0)]);
        assert_eq!(spec.initial_estimate, vec![(3, 1.0), (4, 0.5)]);
    }

    #[test]
    fn fluid_variant_switches_nu0_default() {
        let spec = parse_config("scenario = free\nvariant = fluid\n", &[]).unwrap();
        assert!((spec.params.nu0 - 1.0).abs() < 1e-18);
        // explicit nu0 wins regardless of ordering
        let spec = parse_config("nu0 = 0.5\nscenario = free\nvariant = fluid\n", &[]).unwrap();
        assert!((spec.params.nu0 - 0.5).abs() < 1e-18);
    }

    #[test]
    fn s_sigma_is_not_settable() {
        match parse_config("scenario = free\ns_sigma = 36\n", &[]) {
            Err(Error::Config(msg)) => assert!(msg.contains("s_sigma")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_named() {
        match parse_config("scenario = free\nnu_3 = 1\n", &[]) {
            Err(Error::Config(msg)) => assert!(msg.contains("nu_3")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn type_mismatches_are_named() {
        match parse_config("scenario = free\ndt = fast\n", &[]) {
            Err(Error::Config(msg)) => assert!(msg.contains("dt")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn overrides_apply_after_file() {
        let spec = parse_config(
            "scenario = free\nn_modes = 100\n",
            &[("n_modes".into(), "64".into())],
        )
        .unwrap();
        assert_eq!(spec.n_modes, 64);
    }

    #[test]
    fn sweep_scenarios_need_their_lists() {
        assert!(matches!(
            parse_config("scenario = sweep-lambda\n", &[]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            parse_config("scenario = sweep-s\n", &[]),
            Err(Error::Config(_))
        ));
        assert!(parse_config("scenario = sweep-lambda\nlambda_list = 0, 1e-7\n", &[]).is_ok());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a comment\n\nscenario = free  # trailing\n   \n";
        assert!(parse_config(text, &[]).is_ok());
    }
}
