use std::time::Instant;

use npmon_core::data::{self, gen_independent, gen_sequential, split, DEFAULT_SEQ_LEN};
use npmon_core::models::{by_name, HybridState, MODEL_NAMES};
use npmon_core::reach::{reach_label, ReachLabel};
use npmon_core::Error;

#[test]
fn stored_labels_match_recomputed_labels() {
    for name in MODEL_NAMES {
        let spec = by_name(name).unwrap();
        let ds = gen_independent(&spec, 200, DEFAULT_SEQ_LEN, 21).unwrap();
        for s in &ds.samples {
            let last = s.last_state(ds.state_dim);
            assert_eq!(reach_label(&spec, &last).unwrap(), s.label, "{name}");
        }
    }
}

#[test]
fn observation_noise_has_configured_spread() {
    for name in MODEL_NAMES {
        let spec = by_name(name).unwrap();
        let ds = gen_independent(&spec, 10_000, DEFAULT_SEQ_LEN, 31).unwrap();
        let mut sum = vec![0.0; spec.obs_dim];
        let mut sq = vec![0.0; spec.obs_dim];
        let mut n = 0.0;
        for s in &ds.samples {
            let t = ds.window - 1;
            let mu = spec.observe_mean(&s.state_at(t, ds.state_dim));
            for c in 0..spec.obs_dim {
                let r = f64::from(s.obs[t * ds.obs_dim + c]) - mu[c];
                sum[c] += r;
                sq[c] += r * r;
            }
            n += 1.0;
        }
        for c in 0..spec.obs_dim {
            let mean = sum[c] / n;
            let std = (sq[c] / n - mean * mean).sqrt();
            let want = spec.noise_std[c];
            assert!((std - want).abs() < 0.05 * want, "{name}[{c}]: {std} vs {want}");
        }
    }
}

/// Future of a stored TWT state, recomputed by stepping forward and checking
/// the level bounds directly.
fn twt_oracle(spec: &npmon_core::models::HybridSystemSpec, s: &HybridState) -> ReachLabel {
    let bad = |s: &HybridState| s.v.iter().any(|&x| !(4.5..=5.5).contains(&x));
    let mut cur = s.clone();
    let mut hit = bad(&cur);
    for _ in 0..spec.future_horizon {
        cur = spec.step(&cur).unwrap();
        hit |= bad(&cur);
    }
    ReachLabel::from_bool(hit)
}

#[test]
fn sequential_labels_follow_the_trajectory() {
    let spec = by_name("twt").unwrap();
    let (n_init, windows) = (50, 100);
    let ds = gen_sequential(&spec, n_init, windows, DEFAULT_SEQ_LEN, 17).unwrap();
    assert_eq!(ds.len(), 5000);
    for j in [0usize, 13, 49] {
        let traj = data::sequential_trajectory(&spec, windows, DEFAULT_SEQ_LEN, 17, j).unwrap();
        for k in 0..windows {
            let sample = &ds.samples[j * windows + k];
            assert_eq!(sample.last_state(3), traj[k + DEFAULT_SEQ_LEN - 1]);
            assert_eq!(sample.label, twt_oracle(&spec, &traj[k + DEFAULT_SEQ_LEN - 1]));
        }
    }
}

#[test]
fn paper_split_sizes_are_accepted() {
    let spec = by_name("ip").unwrap();
    let ds = gen_independent(&spec, 68_500, DEFAULT_SEQ_LEN, 1).unwrap();
    let (a, b, c) = split(&ds, 50_000, 8_500, 10_000, 2).unwrap();
    assert_eq!((a.len(), b.len(), c.len()), (50_000, 8_500, 10_000));
}

#[test]
fn save_load_round_trip_is_bitwise() {
    let spec = by_name("sn").unwrap();
    let mut ds = gen_sequential(&spec, 3, 4, DEFAULT_SEQ_LEN, 9).unwrap();
    ds.fit_scaler();
    let tmp = tempfile::tempdir().unwrap();
    data::save(&ds, tmp.path()).unwrap();
    let back = data::load(tmp.path()).unwrap();
    assert_eq!(back, ds);
    for (a, b) in back.samples.iter().zip(&ds.samples) {
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.obs), bits(&b.obs));
        assert_eq!(bits(&a.states), bits(&b.states));
    }
}

#[test]
fn truncated_dataset_fails_integrity() {
    let spec = by_name("ip").unwrap();
    let ds = gen_independent(&spec, 20, DEFAULT_SEQ_LEN, 9).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    data::save(&ds, tmp.path()).unwrap();
    let path = tmp.path().join("observations.bin");
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(data::load(tmp.path()), Err(Error::Integrity { .. })));
}

#[test]
fn ten_thousand_samples_round_trip_quickly() {
    let spec = by_name("ip").unwrap();
    let ds = gen_independent(&spec, 10_000, DEFAULT_SEQ_LEN, 4).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    data::save(&ds, tmp.path()).unwrap();
    let back = data::load(tmp.path()).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(back.len(), 10_000);
    assert!(elapsed.as_secs_f64() < 1.0, "{elapsed:?}");
}

#[test]
fn training_scaler_maps_training_data_into_unit_box() {
    let spec = by_name("cvdp").unwrap();
    let ds = gen_independent(&spec, 500, DEFAULT_SEQ_LEN, 6).unwrap();
    let (mut train, _, _) = split(&ds, 300, 100, 100, 1).unwrap();
    train.fit_scaler();
    let sc = train.scaler().unwrap();
    for s in &train.samples {
        for y in sc.scale_obs(&s.obs).into_iter().chain(sc.scale_states(&s.states)) {
            assert!((-1.0..=1.0).contains(&y));
        }
        let back = sc.unscale_states(&sc.scale_states(&s.states));
        for (a, b) in back.iter().zip(&s.states) {
            assert!((a - f64::from(*b)).abs() < 1e-12);
        }
    }
}
