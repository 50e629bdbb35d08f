use npmon_core::conformal::*;
use npmon_core::rng::seeded;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Direct recount, one score at a time.
fn brute_p_value(scores: &[f64], score: f64, theta: f64) -> f64 {
    let mut greater = 0usize;
    let mut equal = 0usize;
    for &a in scores {
        if a > score {
            greater += 1;
        } else if a == score {
            equal += 1;
        }
    }
    (greater as f64 + theta * (equal as f64 + 1.0)) / (scores.len() as f64 + 1.0)
}

#[test]
fn p_values_match_a_recount() {
    let mut rng = seeded(1);
    for _ in 0..1000 {
        let n = rng.gen_range(1..200);
        // Coarse grid so ties are common.
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..20u8)) / 20.0).collect();
        let score = f64::from(rng.gen_range(0..21u8)) / 20.0;
        let theta: f64 = rng.gen();
        let calib = CalibrationSet::new(scores.clone()).unwrap();
        assert_eq!(
            calib.p_value(score, theta).to_bits(),
            brute_p_value(&scores, score, theta).to_bits()
        );
    }
}

#[test]
fn regression_score_matches_norm_recomputation() {
    let mut rng = seeded(2);
    for _ in 0..100 {
        let n = rng.gen_range(1..50);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let oracle = d.iter().fold(0.0f64, |acc, x| acc.hypot(*x));
        assert!((ncf_regression(&a, &b).unwrap() - oracle).abs() < 1e-12);
    }
}

#[test]
fn region_between_uncertainties_is_the_predicted_singleton() {
    let mut rng = seeded(3);
    for _ in 0..1000 {
        let p: [f64; 2] = [rng.gen(), rng.gen()];
        if p[0] == p[1] {
            continue;
        }
        let u = confidence_credibility(p);
        let gamma = 1.0 - u.confidence;
        let predicted = usize::from(p[1] > p[0]);
        for k in 0..=20 {
            let eps = gamma + (u.credibility - gamma) * f64::from(k) / 21.0;
            if eps < gamma || eps >= u.credibility {
                continue;
            }
            assert_eq!(classify_region(p, eps), LabelRegion::singleton(predicted));
        }
        assert!(u.credibility >= gamma);
    }
}

#[test]
fn regression_coverage_on_exchangeable_data() {
    let mut rng = seeded(4);
    let mut draw = || {
        let z: f64 = StandardNormal.sample(&mut rng);
        z.abs()
    };
    let calib = CalibrationSet::new((0..10_000).map(|_| draw()).collect()).unwrap();
    let region = regress_region(&[0.0], &calib, 0.1).unwrap();
    let truths: Vec<Vec<f64>> = (0..100_000).map(|_| vec![draw()]).collect();
    let regions = vec![region; truths.len()];
    let cov = coverage_regression(&regions, &truths).unwrap();
    assert!((0.89..=0.91).contains(&cov), "coverage {cov}");
    assert!(efficiency_regression(&regions[..1]).unwrap() > 0.0);
}

/// Likelihoods of a noisy synthetic classifier, and the true label.
fn synthetic_point(rng: &mut impl Rng) -> ([f64; 2], usize) {
    let label = usize::from(rng.gen_bool(0.4));
    let noise: f64 = StandardNormal.sample(rng);
    let margin = if label == 1 { 1.0 } else { -1.0 } + 1.2 * noise;
    let p1 = 1.0 / (1.0 + (-2.0 * margin).exp());
    ([1.0 - p1, p1], label)
}

#[test]
fn classification_coverage_on_exchangeable_data() {
    for (seed, eps) in [(5, 0.05), (6, 0.1)] {
        let mut rng = seeded(seed);
        let scores: Vec<f64> = (0..2000)
            .map(|_| {
                let (lik, l) = synthetic_point(&mut rng);
                ncf_classification(&lik, l).unwrap()
            })
            .collect();
        let calib = CalibrationSet::new(scores).unwrap();
        let mut regions = Vec::new();
        let mut truths = Vec::new();
        for _ in 0..2000 {
            let (lik, l) = synthetic_point(&mut rng);
            let p = class_p_values(&calib, lik, rng.gen()).unwrap();
            regions.push(classify_region(p, eps));
            truths.push(l);
        }
        let cov = coverage(&regions, &truths).unwrap();
        assert!((cov - (1.0 - eps)).abs() <= 0.02, "eps {eps}: coverage {cov}");
    }
}

#[test]
fn p_values_of_exchangeable_points_are_uniform() {
    let mut rng = seeded(7);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let calib = CalibrationSet::new((0..5000).map(|_| draw()).collect()).unwrap();
    let mut rng = seeded(8);
    let mut p: Vec<f64> = (0..10_000)
        .map(|_| {
            let s: f64 = StandardNormal.sample(&mut rng);
            calib.p_value(s, rng.gen())
        })
        .collect();
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    assert!((0.48..=0.52).contains(&mean), "mean {mean}");
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    let ks = p
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 0.03, "KS {ks}");
}

proptest! {
    #[test]
    fn label_regions_shrink_as_significance_grows(
        p0 in 0.0f64..=1.0,
        p1 in 0.0f64..=1.0,
        i in 1usize..99,
        j in 1usize..99,
    ) {
        let (lo, hi) = (i.min(j) as f64 / 100.0, i.max(j) as f64 / 100.0);
        prop_assert!(classify_region([p0, p1], hi).is_subset_of(&classify_region([p0, p1], lo)));
    }

    #[test]
    fn regression_regions_shrink_as_significance_grows(
        scores in prop::collection::vec(0.0f64..10.0, 1..300),
        i in 1usize..99,
        j in 1usize..99,
    ) {
        let calib = CalibrationSet::new(scores).unwrap();
        let (lo, hi) = (i.min(j) as f64 / 100.0, i.max(j) as f64 / 100.0);
        let wide = regress_region(&[0.0], &calib, lo).unwrap();
        let narrow = regress_region(&[0.0], &calib, hi).unwrap();
        prop_assert!(narrow.width() <= wide.width());
    }

    #[test]
    fn credibility_dominates_the_second_p_value(p0 in 0.0f64..=1.0, p1 in 0.0f64..=1.0) {
        let u = confidence_credibility([p0, p1]);
        prop_assert!(u.credibility >= 1.0 - u.confidence);
        prop_assert!((0.0..=1.0).contains(&u.confidence) && (0.0..=1.0).contains(&u.credibility));
    }

    #[test]
    fn p_values_lie_in_the_unit_interval(
        scores in prop::collection::vec(0.0f64..1.0, 1..100),
        score in 0.0f64..1.0,
        theta in 0.0f64..=1.0,
    ) {
        let p = CalibrationSet::new(scores).unwrap().p_value(score, theta);
        prop_assert!((0.0..=1.0).contains(&p));
    }
}
