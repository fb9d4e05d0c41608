//! Cross-module trend checks that need full-scale (but short) runs.

use ks_observer::analysis::{error_norm_series, fit_decay_rate, ErrorNorm};
use ks_observer::basis::{SpectralState, SpectrumTable};
use ks_observer::dynamics::{simulate, ModelParams, SimulationConfig};
use ks_observer::injection::InjectionOperator;
use ks_observer::sensing::{OutputMatrices, ReferenceSet, SensorSet};

fn flame_rate(lambda: f64, t_end: f64, window: (f64, f64)) -> f64 {
    let n = 200;
    let sensors = SensorSet::from_reference(&ReferenceSet::offset_eighths(), 9).unwrap();
    let config = SimulationConfig {
        params: ModelParams::flame(),
        n_modes: n,
        dt: 1e-3,
        t_end,
        grid_m: 1024,
        sensors,
        lambda_gain: lambda,
        initial_nominal: SpectralState::from_modes(n, &[(1, 1.0), (4, 1.0)]).unwrap(),
        initial_estimate: SpectralState::from_modes(n, &[(3, 1.0), (4, 0.5)]).unwrap(),
    };
    let table = SpectrumTable::new(n, config.params.nu2);
    let matrices = OutputMatrices::build(&config.sensors, &table);
    let op = InjectionOperator::build(&matrices, lambda, config.params.nu2).unwrap();
    let ts = simulate(&config, Some(&op)).unwrap();
    let series = error_norm_series(&ts, ErrorNorm::V);
    fit_decay_rate(&series, window).unwrap().rate
}

#[test]
fn fitted_decay_rate_grows_with_gain_in_the_stable_range() {
    // Three gains above the synchronization threshold, fit on the early
    // decay phase (before the error reaches the numerical floor). Adjacent
    // comparisons allow 5% tolerance.
    let rates: Vec<f64> = [1e-6, 2e-6, 3e-6]
        .iter()
        .map(|&l| flame_rate(l, 2.0, (0.25, 2.0)))
        .collect();
    for pair in rates.windows(2) {
        assert!(
            pair[1] >= pair[0] * (1.0 - 0.05),
            "rates not nondecreasing: {rates:?}"
        );
    }
    assert!(rates[0] > 0.0, "smallest gain already decays: {rates:?}");
}
