use plhmm_core::generator::{default_max_length, DurationSampler};
use plhmm_core::synth::random_left_to_right;
use plhmm_core::*;

fn two_state_fixed() -> Model {
    Model::left_to_right(
        vec![
            DurationModel::Discrete(DiscreteDuration::point(2).unwrap()),
            DurationModel::Discrete(DiscreteDuration::point(3).unwrap()),
        ],
        vec![
            EmissionParams::new(vec![1.0, 0.5], 1e12).unwrap(),
            EmissionParams::new(vec![-1.0, 0.2, 0.3], 1e12).unwrap(),
        ],
        BasisConfig::default(),
        1.0,
    )
    .unwrap()
}

#[test]
fn deterministic_durations_fix_the_path() {
    let m = two_state_fixed();
    for seed in 0..20 {
        let p = sample(&m, seed, 100).unwrap();
        assert_eq!(p.series.len(), 5);
        assert_eq!(
            p.segmentation.segments,
            vec![
                Segment {
                    state: 0,
                    start: 0,
                    duration: 2
                },
                Segment {
                    state: 1,
                    start: 2,
                    duration: 3
                }
            ]
        );
    }
}

#[test]
fn near_noiseless_samples_follow_the_curve() {
    let m = two_state_fixed();
    let p = sample(&m, 9, 100).unwrap();
    for seg in &p.segmentation.segments {
        let em = &m.emissions[seg.state];
        for k in 0..seg.duration {
            let phi = basis_eval(&m.basis, em.order(), k, seg.duration).unwrap();
            assert!((p.series.values[seg.start + k] - em.mean(&phi)).abs() < 1e-4);
        }
    }
}

#[test]
fn same_seed_same_bits() {
    let mut rng = SampleRng::seed(4);
    let m =
        random_left_to_right(&mut rng, &[10, 20, 15], 0.3, DurationFamily::Gamma, 20.0).unwrap();
    let a = sample(&m, 77, 500).unwrap();
    let b = sample(&m, 77, 500).unwrap();
    assert_eq!(a, b);
    let bits = |p: &SamplePath| {
        p.series
            .values
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(bits(&a), bits(&sample(&m, 78, 500).unwrap()));
}

#[test]
fn segments_are_never_truncated() {
    let m = two_state_fixed();
    let p = sample(&m, 1, 4).unwrap();
    assert_eq!(p.series.len(), 2);
    assert!(matches!(sample(&m, 1, 1), Err(Error::Infeasible(_))));
    assert_eq!(default_max_length(&m), 50);
}

#[test]
fn gamma_duration_mean_matches_pmf_sum() {
    let g = GammaDuration::new(4.0, 0.5, 200).unwrap();
    let dm = DurationModel::Gamma(g);
    let exact: f64 = (1..=200).map(|d| d as f64 * gamma_pmf(&g, d)).sum();
    let var: f64 = (1..=200)
        .map(|d| (d as f64 - exact).powi(2) * gamma_pmf(&g, d))
        .sum();
    let sampler = DurationSampler::new(&dm);
    let mut rng = SampleRng::seed(2024);
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| sampler.draw(&mut rng) as f64).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!(
        (mean - exact).abs() <= 3.0 * sd / (n as f64).sqrt(),
        "{mean} vs {exact}"
    );
    assert!((sd * sd - var).abs() / var < 0.05);
}

use plhmm_core::duration::gamma_pmf;

#[test]
fn duration_histograms_match_pmfs() {
    let models = [
        DurationModel::Discrete(
            DiscreteDuration::new(3, 7, vec![0.1, 0.4, 0.2, 0.2, 0.1]).unwrap(),
        ),
        DurationModel::Gamma(GammaDuration::new(2.5, 0.3, 40).unwrap()),
    ];
    for dm in &models {
        let (lo, hi) = dm.support();
        let sampler = DurationSampler::new(dm);
        let mut rng = SampleRng::seed(8);
        let n = 100_000;
        let mut hist = vec![0usize; hi + 1];
        for _ in 0..n {
            hist[sampler.draw(&mut rng)] += 1;
        }
        let tv: f64 = (lo..=hi)
            .map(|d| (hist[d] as f64 / n as f64 - dm.pmf(d)).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.02, "{tv}");
    }
}

#[test]
fn initial_state_frequencies_match_pi() {
    let mut m = two_state_fixed();
    m.pi = vec![0.3, 0.7];
    m.trans = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    m.topology_mask = vec![vec![false, true], vec![true, false]];
    let n = 10_000;
    let firsts = (0..n)
        .filter(|&s| sample(&m, s, 3).unwrap().segmentation.segments[0].state == 0)
        .count();
    let p = firsts as f64 / n as f64;
    let sigma = (0.3f64 * 0.7 / n as f64).sqrt();
    assert!((p - 0.3).abs() <= 4.0 * sigma, "{p}");
}

#[test]
fn path_log_joint_matches_enumerated_density() {
    let mut rng = SampleRng::seed(21);
    let m = random_left_to_right(&mut rng, &[3, 2, 3], 0.4, DurationFamily::Discrete, 4.0).unwrap();
    for seed in 0..20 {
        let p = sample(&m, seed, 12).unwrap();
        if p.series.len() > 12 {
            continue;
        }
        let all = plhmm_core::enumeration::enumerate_segmentations(&m, &p.series).unwrap();
        let listed = all
            .iter()
            .find(|s| s.segments == p.segmentation.segments)
            .unwrap();
        assert!((listed.log_joint - p.segmentation.log_joint).abs() < 1e-9);
    }
}

#[test]
fn viterbi_recovers_sampled_boundaries() {
    let mut hits = 0;
    let mut total = 0;
    for seed in 0..10 {
        let mut rng = SampleRng::seed(seed);
        let m = random_left_to_right(
            &mut rng,
            &[30, 40, 25],
            0.1,
            DurationFamily::Discrete,
            400.0,
        )
        .unwrap();
        let p = sample(&m, seed, 1000).unwrap();
        assert!(log_likelihood(&m, &p.series).unwrap().is_finite());
        let path = viterbi(&m, &p.series).unwrap();
        for (truth, got) in p.segmentation.segments.iter().zip(&path.segments) {
            total += 1;
            if truth.state == got.state
                && truth.start.abs_diff(got.start) <= 1
                && truth.duration.abs_diff(got.duration) <= 2
            {
                hits += 1;
            }
        }
    }
    assert!(hits as f64 >= 0.9 * total as f64, "{hits}/{total}");
}
