use std::f64::consts::PI;

use npmon_core::models::{by_name, load_linear_system, HybridState, MODEL_NAMES};
use npmon_core::reach::{label_window, reach_label, reach_label_within, ReachLabel};
use npmon_core::rng::seeded;
use proptest::prelude::*;

/// Laub-Loomis right-hand side written out independently of the crate.
fn lalo_rhs(s: &[f64; 7]) -> [f64; 7] {
    [
        1.4 * s[2] - 0.9 * s[0],
        2.5 * s[4] - 1.5 * s[1],
        0.6 * s[6] - 0.8 * s[1] * s[2],
        2.0 - 1.3 * s[2] * s[3],
        0.7 * s[0] - s[3] * s[4],
        0.3 * s[0] - 3.1 * s[5],
        1.8 * s[5] - 1.5 * s[1] * s[6],
    ]
}

fn rk4_oracle<const N: usize>(f: impl Fn(&[f64; N]) -> [f64; N], mut x: [f64; N], h: f64, n: usize) -> [f64; N] {
    let axpy = |x: &[f64; N], k: &[f64; N], a: f64| -> [f64; N] { std::array::from_fn(|i| x[i] + a * k[i]) };
    for _ in 0..n {
        let k1 = f(&x);
        let k2 = f(&axpy(&x, &k1, h / 2.0));
        let k3 = f(&axpy(&x, &k2, h / 2.0));
        let k4 = f(&axpy(&x, &k3, h));
        x = std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    x
}

#[test]
fn lalo_step_matches_fine_reference() {
    let spec = by_name("lalo").unwrap();
    let next = spec.step(&HybridState::new(vec![1.0; 7], 0)).unwrap();
    let reference = rk4_oracle(lalo_rhs, [1.0; 7], spec.dt / 10.0, 10);
    for (a, b) in next.v.iter().zip(reference) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn twt_stays_contained_from_midpoint() {
    let spec = by_name("twt").unwrap();
    let s0 = HybridState::new(vec![5.0; 3], spec.plant().initial_mode(&[5.0; 3]));
    for substeps in [spec.substeps, 10 * spec.substeps] {
        let traj = spec.with_substeps(substeps).simulate(&s0, 20).unwrap();
        for s in &traj.states {
            assert!(s.v.iter().all(|x| (4.5..=5.5).contains(x)), "{:?}", s.v);
        }
    }
}

#[test]
fn ip_equilibrium_is_fixed() {
    let spec = by_name("ip").unwrap();
    let s0 = HybridState::new(vec![0.0, 0.0], 0);
    let traj = spec.simulate(&s0, 10).unwrap();
    assert_eq!(traj.len(), 11);
    assert!(traj.states.iter().all(|s| s == &s0));
}

#[test]
fn sampling_boxes() {
    let mut rng = seeded(11);
    let ip = by_name("ip").unwrap();
    let mut mean = 0.0;
    for _ in 0..10_000 {
        let s = ip.sample_initial(&mut rng);
        assert!(s.v[0].abs() <= PI / 4.0 && s.v[1].abs() <= 1.5);
        mean += s.v[0] / 10_000.0;
    }
    assert!(mean.abs() < 0.02, "{mean}");

    let twt = by_name("twt").unwrap();
    for _ in 0..1000 {
        let s = twt.sample_initial(&mut rng);
        assert!(s.v.iter().all(|x| (4.5..=5.5).contains(x)));
        for (i, level) in s.v.iter().enumerate() {
            assert_eq!((s.q >> i) & 1 == 1, *level < 5.0);
        }
    }
}

/// Doubling the number of RK4 sub-steps per control period moves the end
/// point of a 20-step run by less than 1e-3 for every continuous benchmark.
#[test]
fn refinement_changes_endpoints_little() {
    for name in ["ip", "sn", "cvdp", "lalo"] {
        let spec = by_name(name).unwrap();
        let fine = spec.with_substeps(2 * spec.substeps);
        let mut rng = seeded(3);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let s0 = spec.sample_initial(&mut rng);
            let a = spec.simulate(&s0, 20).unwrap();
            let b = fine.simulate(&s0, 20).unwrap();
            let (a, b) = (a.last(), b.last());
            assert_eq!(a.q, b.q);
            let d = a.v.iter().zip(&b.v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            worst = worst.max(d);
        }
        assert!(worst < 1e-3, "{name}: {worst}");
    }
}

#[test]
fn sn_post_jump_potential_is_reset_value() {
    let spec = by_name("sn").unwrap();
    let mut rng = seeded(5);
    let mut jumps = 0;
    for _ in 0..50 {
        let s0 = spec.sample_initial(&mut rng);
        let traj = spec.simulate(&s0, 100).unwrap();
        for w in traj.states.windows(2) {
            if w[1].v[1] > w[0].v[1] + 4.0 {
                assert_eq!(w[1].v[0], -65.0);
                jumps += 1;
            }
        }
    }
    assert!(jumps > 0);
}

#[test]
fn linear_loader_from_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("decay.txt");
    std::fs::write(
        &path,
        "dim 1\ndt 0.1\npast_horizon 2\nfuture_horizon 3\nobserve 0\nnoise_std 0\nunsafe 0 <= 0\nA\n-1\n",
    )
    .unwrap();
    let spec = load_linear_system(&path).unwrap();
    assert_eq!(spec.name, "linear:decay");
    let next = spec.step(&HybridState::new(vec![1.0], 0)).unwrap();
    assert!((next.v[0] - 0.904_837_5).abs() < 1e-6);
    assert!(spec.is_unsafe(&HybridState::new(vec![0.0], 0)));
    assert!(!spec.is_unsafe(&HybridState::new(vec![1e-9], 0)));
    let registry = by_name(&format!("linear:{}", path.display())).unwrap();
    assert_eq!(registry.state_dim, 1);
}

#[test]
fn reach_examples() {
    let ip = by_name("ip").unwrap();
    assert_eq!(
        reach_label(&ip, &HybridState::new(vec![0.6, 0.0], 0)).unwrap(),
        ReachLabel::Unsafe
    );
    assert_eq!(
        reach_label(&ip, &HybridState::new(vec![0.0, 0.0], 0)).unwrap(),
        ReachLabel::Safe
    );
    let twt = by_name("twt").unwrap();
    assert_eq!(
        reach_label(&twt, &HybridState::new(vec![4.0, 5.0, 5.0], 0)).unwrap(),
        ReachLabel::Unsafe
    );
}

#[test]
fn window_label_is_last_state_label() {
    for name in MODEL_NAMES {
        let spec = by_name(name).unwrap();
        let mut rng = seeded(8);
        for _ in 0..1000 / MODEL_NAMES.len() {
            let s0 = spec.sample_initial(&mut rng);
            let traj = spec.simulate(&s0, spec.past_horizon).unwrap();
            assert_eq!(
                label_window(&spec, &traj.states).unwrap(),
                reach_label(&spec, traj.last()).unwrap()
            );
        }
        assert!(label_window(&spec, &[spec.sample_initial(&mut rng)]).is_err() || spec.window() == 1);
    }
}

fn arb_model() -> impl Strategy<Value = &'static str> {
    prop::sample::select(MODEL_NAMES.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reachability_grows_with_horizon(name in arb_model(), seed in any::<u64>()) {
        let spec = by_name(name).unwrap();
        let s = spec.sample_initial(&mut seeded(seed));
        let mut previous = ReachLabel::Safe;
        for h in 0..=spec.future_horizon {
            let l = reach_label_within(&spec, &s, h).unwrap();
            prop_assert!(!(previous == ReachLabel::Unsafe && l == ReachLabel::Safe));
            previous = l;
        }
        if spec.is_unsafe(&s) {
            prop_assert_eq!(reach_label(&spec, &s).unwrap(), ReachLabel::Unsafe);
        }
    }

    #[test]
    fn step_is_pure(name in arb_model(), seed in any::<u64>()) {
        let spec = by_name(name).unwrap();
        let s = spec.sample_initial(&mut seeded(seed));
        let a = spec.step(&s).unwrap();
        let b = spec.step(&s).unwrap();
        prop_assert_eq!(a.q, b.q);
        for (x, y) in a.v.iter().zip(&b.v) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn zero_noise_observation_is_mean(name in arb_model(), seed in any::<u64>()) {
        let spec = by_name(name).unwrap().with_noise_scale(0.0);
        let mut rng = seeded(seed);
        let s = spec.sample_initial(&mut rng);
        prop_assert_eq!(spec.observe(&s, &mut rng), spec.observe_mean(&s));
    }
}
