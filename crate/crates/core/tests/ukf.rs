use npmon_core::data::{gen_independent, Range};
use npmon_core::models::{by_name, parse_linear_system, HybridState};
use npmon_core::rng::seeded;
use npmon_core::ukf::{relative_error, ukf_estimate, UkfConfig};
use rand::Rng;

const OSCILLATOR: &str = "\
dim 2
dt 0.1
past_horizon 20
future_horizon 1
observe 0
noise_std 0
unsafe 0 >= 10
A
0 1
-1 -0.2
";

#[test]
fn noiseless_linear_system_is_recovered() {
    let spec = parse_linear_system("osc", OSCILLATOR).unwrap();
    let ranges = [Range { min: -2.0, max: 2.0 }; 2];
    let cfg = UkfConfig::for_spec(&spec, &ranges);
    let mut rng = seeded(1);
    for _ in 0..20 {
        let s0 = HybridState::new(vec![rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)], 0);
        let traj = spec.simulate(&s0, 20).unwrap();
        let obs: Vec<Vec<f64>> = traj.states.iter().map(|s| spec.observe_mean(s)).collect();
        let est = ukf_estimate(&spec, &obs, &cfg).unwrap();
        for (t, (e, s)) in est.iter().zip(&traj.states).enumerate().skip(10) {
            let err = e.iter().zip(&s.v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-3, "step {t}: {err}");
        }
    }
}

#[test]
fn water_tank_estimates_stay_near_the_levels() {
    let spec = by_name("twt").unwrap().with_noise_scale(0.01);
    let sigma = spec.noise_std[0];
    let mut ds = gen_independent(&spec, 50, 32, 2).unwrap();
    ds.fit_scaler();
    let cfg = UkfConfig::for_spec(&spec, &ds.scaler().unwrap().states);
    for s in &ds.samples {
        let obs: Vec<Vec<f64>> = s
            .obs
            .chunks(spec.obs_dim)
            .map(|c| c.iter().map(|&x| f64::from(x)).collect())
            .collect();
        let est = ukf_estimate(&spec, &obs, &cfg).unwrap();
        for (t, e) in est.iter().enumerate() {
            let truth = s.state_at(t, spec.state_dim).v;
            let rms = (e.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / e.len() as f64).sqrt();
            assert!(rms < 3.0 * sigma, "step {t}: rms {rms} vs noise {sigma}");
        }
    }
}

#[test]
fn filter_is_deterministic() {
    let spec = by_name("ip").unwrap();
    let mut ds = gen_independent(&spec, 5, 32, 3).unwrap();
    ds.fit_scaler();
    let cfg = UkfConfig::for_spec(&spec, &ds.scaler().unwrap().states);
    for s in &ds.samples {
        let obs: Vec<Vec<f64>> = s.obs.iter().map(|&x| vec![f64::from(x)]).collect();
        let a = ukf_estimate(&spec, &obs, &cfg).unwrap();
        let b = ukf_estimate(&spec, &obs, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), ds.window);
    }
}

#[test]
fn mismatched_configuration_is_refused() {
    let spec = by_name("ip").unwrap();
    let mut cfg = UkfConfig::for_spec(&spec, &[Range { min: 0.0, max: 1.0 }; 2]);
    assert!(ukf_estimate(&spec, &[vec![0.0, 0.0]], &cfg).is_err());
    cfg.initial_mean.pop();
    assert!(ukf_estimate(&spec, &[vec![0.0]], &cfg).is_err());
}

#[test]
fn relative_error_is_zero_only_on_equal_sequences() {
    let mut rng = seeded(4);
    for _ in 0..100 {
        let a: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let mut b = a.clone();
        assert_eq!(relative_error(&a, &b, &[1.0, 2.0]).unwrap(), 0.0);
        b[rng.gen_range(0..5)][rng.gen_range(0..2)] += 0.1;
        assert!(relative_error(&a, &b, &[1.0, 2.0]).unwrap() > 0.0);
    }
}
