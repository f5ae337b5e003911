mod common;

use ckm_beamforming::experiments::{
    draw_location_error, rayleigh_scale, run_experiment, summarize, write_csv, ExperimentConfig, ExperimentError,
    Method, TrialRecord, CSV_HEADER,
};
use ckm_beamforming::hybrid::pre_log;
use common::*;
use rand::Rng;

fn small_config(extra: &str) -> ExperimentConfig {
    let text = format!(
        r#"
master_seed = 11
trials = 6
block_length = 1200
snr_db = 100.0
methods = ["optimal", "cam", "bim", "ls", "location"]
{extra}

[arrays]
tx = [[4, 4]]
rx = [2, 2]
m_t_rf = 2
m_r_rf = 2

[ckm]
l_hat = 10
tx_candidates = 8
rx_candidates = 4
samples = 300
grid = [45, 90]
"#
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

fn record(method: Method, trial: usize, eff: f64) -> TrialRecord {
    TrialRecord {
        method,
        m_t: 64,
        trial,
        raw_rate: eff,
        n_tr: 0,
        effective_rate: eff,
        loc_error_m: 0.0,
        seed: 0,
    }
}

#[test]
fn rayleigh_error_mean() {
    assert!((rayleigh_scale(3.0) - 2.3937).abs() < 1e-4);
    let mut g = rng(1);
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let e = draw_location_error(3.0, &mut g);
        assert_eq!(e[2], 0.0);
        sum += (e[0] * e[0] + e[1] * e[1]).sqrt();
    }
    let mean = sum / n as f64;
    assert!((2.97..=3.03).contains(&mean), "{mean}");
    assert_eq!(draw_location_error(0.0, &mut g), [0.0, 0.0, 0.0]);
}

#[test]
fn summarize_single_and_equal_records() {
    let one = summarize(&[record(Method::Cam, 0, 4.5)]);
    assert_eq!(one.len(), 1);
    assert_eq!((one[0].trials, one[0].mean_effective_rate, one[0].std_error), (1, 4.5, 0.0));
    let two = summarize(&[record(Method::Cam, 0, 2.0), record(Method::Cam, 1, 2.0)]);
    assert_eq!((two[0].mean_effective_rate, two[0].std_error), (2.0, 0.0));
}

#[test]
fn summarize_matches_independent_sum() {
    let mut g = rng(2);
    let methods = [Method::Cam, Method::Bim, Method::Ls];
    let records: Vec<TrialRecord> = (0..300)
        .map(|t| record(methods[t % 3], t / 3, g.random_range(0.0..20.0)))
        .collect();
    let rows = summarize(&records);
    assert_eq!(rows.iter().map(|r| r.method).collect::<Vec<_>>(), methods);
    for row in rows {
        let vals: Vec<f64> = records.iter().filter(|r| r.method == row.method).map(|r| r.effective_rate).collect();
        let mut acc = 0.0;
        for v in &vals {
            acc += v;
        }
        let mean = acc / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64;
        assert_eq!(row.trials, 100);
        assert!((row.mean_effective_rate - mean).abs() < 1e-12);
        assert!((row.std_error - (var / 100.0).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn records_follow_overhead_identity() {
    let cfg = small_config("");
    let records = run_experiment(&cfg, Some(2)).unwrap();
    assert_eq!(records.len(), cfg.trials * cfg.methods.len());
    for r in &records {
        assert!(r.raw_rate.is_finite() && r.raw_rate >= 0.0);
        assert!((r.effective_rate - r.raw_rate * pre_log(r.n_tr, cfg.block_length)).abs() < 1e-12);
        match r.method {
            Method::Optimal => {
                assert_eq!(r.n_tr, 0);
                assert_eq!(r.effective_rate, r.raw_rate);
            }
            Method::Ls => assert_eq!(r.n_tr, 16 * 4 / 2),
            _ => assert!(r.n_tr > 0),
        }
    }
    // Exhaustive design on the true channel bounds every codebook-based method.
    for chunk in records.chunks(cfg.methods.len()) {
        let opt = chunk[0].raw_rate;
        assert!(opt > 0.0);
        assert!(chunk.iter().all(|r| r.raw_rate <= opt + 1e-9), "{chunk:?}");
    }
    // Ordering: trial-major, methods in config order.
    let order: Vec<Method> = records[..cfg.methods.len()].iter().map(|r| r.method).collect();
    assert_eq!(order, cfg.methods);
}

#[test]
fn same_seed_same_csv() {
    let cfg = small_config("location_error_m = 2.0");
    let csv = |threads| {
        let mut buf = Vec::new();
        write_csv(&run_experiment(&cfg, Some(threads)).unwrap(), &mut buf).unwrap();
        buf
    };
    let a = csv(1);
    let b = csv(4);
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
}

#[test]
fn ls_overhead_at_large_array() {
    let text = r#"
master_seed = 3
trials = 1
block_length = 1200
snr_db = 20.0
methods = ["ls"]
[arrays]
tx = [[16, 16]]
rx = [4, 4]
m_t_rf = 4
m_r_rf = 4
"#;
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    let r = run_experiment(&cfg, None).unwrap();
    assert_eq!(r[0].n_tr, 1024);
}

#[test]
fn config_errors_name_the_field() {
    let base = r#"
master_seed = 1
trials = 1
block_length = 100
snr_db = 10.0
methods = ["cam"]
[arrays]
tx = [[4, 4]]
rx = [2, 2]
m_t_rf = 2
m_r_rf = 2
"#;
    assert!(ExperimentConfig::from_toml(base).is_ok());
    let field = |text: &str| match ExperimentConfig::from_toml(text) {
        Err(ExperimentError::Invalid { field, .. }) => field,
        other => panic!("expected a field error, got {other:?}"),
    };
    assert_eq!(field(&base.replace("trials = 1", "trials = 0")), "trials");
    assert_eq!(field(&base.replace("methods = [\"cam\"]", "methods = []")), "methods");
    assert_eq!(
        field(&base.replace("snr_db = 10.0", "snr_db = 10.0\nlocation_error_m = -1.0")),
        "location_error_m"
    );
    assert_eq!(field(&base.replace("m_r_rf = 2", "m_r_rf = 3")), "arrays");
    // Transmit SNR has no default.
    assert!(matches!(
        ExperimentConfig::from_toml(&base.replace("snr_db = 10.0", "")),
        Err(ExperimentError::Config(_))
    ));
    assert!(matches!(
        ExperimentConfig::from_toml(&base.replace("methods = [\"cam\"]", "methods = [\"magic\"]")),
        Err(ExperimentError::Config(_))
    ));
}

#[test]
fn bim_not_worse_than_location_on_average() {
    let cfg = small_config("noisy_training = false");
    let cfg = ExperimentConfig {
        trials: 100,
        methods: vec![Method::Bim, Method::Location],
        ..cfg
    };
    let rows = summarize(&run_experiment(&cfg, None).unwrap());
    let mean = |m: Method| rows.iter().find(|r| r.method == m).unwrap().mean_raw_rate;
    assert!(mean(Method::Location) > 0.0);
    assert!(mean(Method::Bim) >= mean(Method::Location), "{rows:?}");
}
