//! Acceptance checks, one PASS/FAIL line per criterion.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use plhmm_core::bench::{run_bench, BenchMode, BenchSpec};
use plhmm_core::logspace::logsumexp;
use plhmm_core::regression::weighted_least_squares;
use plhmm_core::special::{digamma, invert_digamma};
use plhmm_core::synth::{
    beat, beat_strip, noise_series, random_left_to_right, random_small_model, BeatShape,
};
use plhmm_core::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn small_instances(count: usize) -> Vec<(Model, Series)> {
    let mut rng = SampleRng::seed(2024);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.int(1, 3);
        let family = if out.len() % 2 == 0 {
            DurationFamily::Discrete
        } else {
            DurationFamily::Gamma
        };
        let model = random_small_model(&mut rng, n, family, 4).unwrap();
        let len = rng.int(1, 8);
        let series = noise_series(&mut rng, len).unwrap();
        if brute_force_loglik(&model, &series).unwrap() > f64::NEG_INFINITY {
            out.push((model, series));
        }
    }
    out
}

fn oracle_equivalence() -> Outcome {
    let clock = Instant::now();
    let instances = small_instances(400);
    let mut worst = 0.0f64;
    for (model, series) in &instances {
        let fwd = forward(model, series).unwrap().log_likelihood;
        let bf = brute_force_loglik(model, series).unwrap();
        worst = worst.max((fwd - bf).abs() / bf.abs());
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs <= 5.0,
        format!(
            "{} instances, max rel err {worst:.2e}, {secs:.2} s",
            instances.len()
        ),
    )
}

fn identities() -> Outcome {
    let instances = small_instances(400);
    let mut beta_ok = true;
    let mut worst = 0.0f64;
    for (model, series) in &instances {
        let lat = forward_backward(model, series).unwrap();
        let t = series.len();
        beta_ok &= (0..model.n_states).all(|i| lat.beta(t, i) == 0.0);
        let terminal: Vec<f64> = (0..model.n_states).map(|j| lat.alpha(t, j)).collect();
        worst = worst.max((logsumexp(&terminal) - lat.log_likelihood).abs());
    }
    outcome(
        beta_ok && worst <= 1e-12,
        format!("terminal beta all zero: {beta_ok}, max |lse(alpha_T) - loglik| {worst:.2e}"),
    )
}

fn em_monotonicity() -> Outcome {
    let clock = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for family in [DurationFamily::Discrete, DurationFamily::Gamma] {
        for seed in 0..25u64 {
            let mut rng = SampleRng::seed(1000 + seed);
            let truth = random_left_to_right(&mut rng, &[60, 80, 60], 0.2, family, 25.0).unwrap();
            let series = sample(&truth, seed, 10_000).unwrap().series;
            let mut cfg = TrainConfig::new(vec![2, 2, 2], family);
            cfg.max_iters = 10;
            cfg.loglik_tol = 0.0;
            match fit(&series, &cfg) {
                Ok((_, trace)) => {
                    let drop = trace.worst_drop();
                    worst = worst.max(drop);
                    if drop > 1e-8 {
                        failures.push(format!("{family:?}/{seed}: drop {drop:.2e}"));
                    }
                }
                Err(e) => failures.push(format!("{family:?}/{seed}: {e}")),
            }
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs <= 60.0,
        format!(
            "50 fits, worst decrease {worst:.2e}, {secs:.1} s{}",
            failures
                .iter()
                .map(|f| format!("; {f}"))
                .collect::<String>()
        ),
    )
}

fn critical_point() -> Outcome {
    let mut rng = SampleRng::seed(3);
    let lengths = [7usize, 11, 5];
    let orders = [2usize, 3, 1];
    let values: Vec<f64> = (0..23).map(|_| rng.normal()).collect();
    let basis = BasisConfig {
        max_order: 3,
        ..BasisConfig::default()
    };
    let mut start = 0;
    let mut durations = Vec::new();
    let mut emissions = Vec::new();
    for (&l, &o) in lengths.iter().zip(&orders) {
        let fit = weighted_least_squares(&[(&values[start..start + l], 1.0)], &basis, o).unwrap();
        emissions.push(EmissionParams::new(fit.weights, fit.precision).unwrap());
        durations.push(DurationModel::Discrete(DiscreteDuration::point(l).unwrap()));
        start += l;
    }
    let model = Model::left_to_right(durations, emissions, basis, 1.0).unwrap();
    let series = Series::new(values, 1.0).unwrap();
    let cfg = TrainConfig::new(orders.to_vec(), DurationFamily::Discrete);
    let (next, _) = em_step(&model, &series, &cfg).unwrap();
    let mut diff = 0.0f64;
    for (a, b) in next.pi.iter().zip(&model.pi) {
        diff = diff.max((a - b).abs());
    }
    for (ra, rb) in next.trans.iter().zip(&model.trans) {
        for (a, b) in ra.iter().zip(rb) {
            diff = diff.max((a - b).abs());
        }
    }
    for (a, b) in next.durations.iter().zip(&model.durations) {
        for d in 1..=23 {
            diff = diff.max((a.pmf(d) - b.pmf(d)).abs());
        }
    }
    for (a, b) in next.emissions.iter().zip(&model.emissions) {
        for (x, y) in a.weights.iter().zip(&b.weights) {
            diff = diff.max((x - y).abs());
        }
        diff = diff.max((a.precision - b.precision).abs() / b.precision);
    }
    outcome(diff <= 1e-9, format!("max parameter change {diff:.2e}"))
}

fn digamma_inversion() -> Outcome {
    let lo = digamma(1e-3).unwrap();
    let hi = digamma(1e3).unwrap();
    let mut worst = 0.0f64;
    let (mut below, mut above) = (false, false);
    for k in 0..1000 {
        let x = lo + (hi - lo) * k as f64 / 999.0;
        below |= x < -2.22;
        above |= x >= -2.22;
        let y = invert_digamma(x).unwrap();
        worst = worst.max((digamma(y).unwrap() - x).abs());
    }
    outcome(
        worst <= 1e-10 && below && above,
        format!(
            "1000 points on [{lo:.3}, {hi:.3}], max residual {worst:.2e}, straddles -2.22: {}",
            below && above
        ),
    )
}

fn gamma_discretization() -> Outcome {
    let mut worst_exp = 0.0f64;
    for &(rate, horizon) in &[(0.1, 50usize), (0.5, 20), (1.3, 10), (0.02, 300), (2.0, 5)] {
        let g = GammaDuration::new(1.0, rate, horizon).unwrap();
        let dm = DurationModel::Gamma(g);
        let norm = 1.0 - (-rate * horizon as f64).exp();
        for d in 1..=horizon {
            let closed = (-rate * (d - 1) as f64).exp() * (1.0 - (-rate).exp()) / norm;
            worst_exp = worst_exp.max((dm.pmf(d) - closed).abs());
        }
    }
    let mut rng = SampleRng::seed(6);
    let mut worst_sum = 0.0f64;
    for _ in 0..100 {
        let shape = (rng.range(-2.0, 4.0) as f64).exp();
        let rate = (rng.range(-4.0, 1.5) as f64).exp();
        let horizon = rng.int(1, 400);
        let g = GammaDuration::new(shape, rate, horizon).unwrap();
        let sum: f64 = g.log_pmf_table().iter().map(|l| l.exp()).sum();
        worst_sum = worst_sum.max((sum - 1.0).abs());
    }
    outcome(
        worst_exp <= 1e-12 && worst_sum <= 1e-10,
        format!(
            "exponential case max err {worst_exp:.2e}, 100 random pmfs max |sum-1| {worst_sum:.2e}"
        ),
    )
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn parameter_recovery() -> Outcome {
    let clock = Instant::now();
    let bounds = [(27usize, 33usize), (36, 44), (22, 28)];
    let weights = [
        vec![1.0, 0.5, -0.3],
        vec![-1.0, 0.8, 0.2],
        vec![0.5, -0.7, 0.4],
    ];
    let durations = bounds
        .iter()
        .map(|&(lo, hi)| DurationModel::Discrete(DiscreteDuration::uniform(lo, hi).unwrap()))
        .collect();
    let emissions = weights
        .iter()
        .map(|w| EmissionParams::new(w.clone(), 100.0).unwrap())
        .collect();
    let truth = Model::left_to_right(durations, emissions, BasisConfig::default(), 1.0).unwrap();
    let (mut dur_err, mut cos) = (Vec::new(), Vec::new());
    for seed in 0..10 {
        let series = sample(&truth, seed, 1000).unwrap().series;
        let cfg =
            TrainConfig::new(vec![2, 2, 2], DurationFamily::Discrete).with_bounds(bounds.to_vec());
        let (model, _) = fit(&series, &cfg).unwrap();
        let mut e = 0.0f64;
        let mut c = 1.0f64;
        for j in 0..3 {
            let want = truth.durations[j].mean();
            e = e.max((model.durations[j].mean() - want).abs() / want);
            c = c.min(cosine(&model.emissions[j].weights, &weights[j]));
        }
        dur_err.push(e);
        cos.push(c);
    }
    let (e, c) = (median(dur_err), median(cos));
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        e <= 0.15 && c >= 0.95 && secs <= 120.0,
        format!(
            "median worst duration-mean error {:.1}%, median worst cosine {c:.4}, {secs:.1} s",
            100.0 * e
        ),
    )
}

struct Separation {
    auc_perfect: bool,
    gap: f64,
}

/// Per-beat peaks within `tol` of each beat start; background windows lie
/// more than a quarter beat from every start.
fn separation(
    model: &Model,
    strip: &Series,
    starts: &[usize],
    shapes: &[BeatShape],
    len: usize,
) -> Separation {
    let track = score_windows(model, strip, len, 1).unwrap();
    let tol = 3;
    let peak = |s: usize| {
        (s.saturating_sub(tol)..=(s + tol).min(track.len() - 1))
            .map(|k| track.scores[k])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let a: Vec<f64> = starts
        .iter()
        .zip(shapes)
        .filter(|(_, &s)| s == BeatShape::Normal)
        .map(|(&s, _)| peak(s))
        .collect();
    let b: Vec<f64> = starts
        .iter()
        .zip(shapes)
        .filter(|(_, &s)| s == BeatShape::Ventricular)
        .map(|(&s, _)| peak(s))
        .collect();
    let background = (0..track.len())
        .filter(|&k| starts.iter().all(|&s| s.abs_diff(k) > len / 4))
        .map(|k| track.scores[k])
        .fold(f64::NEG_INFINITY, f64::max);
    let min_a = a.iter().copied().fold(f64::INFINITY, f64::min);
    let max_b = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Separation {
        auc_perfect: min_a > max_b,
        gap: min_a - background,
    }
}

fn recognition_separation() -> Outcome {
    let len = 90;
    let n = 7;
    let orders = vec![3, 5, 1, 6, 1, 5, 3];
    let bounds = plhmm_core::bench::default_bounds(len, n);
    let mut shapes = vec![BeatShape::Normal; 9];
    shapes.push(BeatShape::Ventricular);
    let mut all_auc = true;
    let mut ranking_ok = true;
    let mut gaps = Vec::new();
    for seed in 0..5u64 {
        let mut rng = SampleRng::seed(500 + seed);
        let (exemplar, _) = beat_strip(&[BeatShape::Normal], len, 0.02, &mut rng).unwrap();
        let (strip, starts) = beat_strip(&shapes, len, 0.02, &mut rng).unwrap();
        let mut seps = Vec::new();
        for family in [DurationFamily::Discrete, DurationFamily::Gamma] {
            let cfg = TrainConfig::new(orders.clone(), family).with_bounds(bounds.clone());
            let (model, _) = fit(&exemplar, &cfg).unwrap();
            seps.push(separation(&model, &strip, &starts, &shapes, len));
        }
        all_auc &= seps[0].auc_perfect;
        ranking_ok &= seps[0].gap >= seps[1].gap;
        gaps.push(format!("{:.0}/{:.0}", seps[0].gap, seps[1].gap));
    }
    outcome(
        all_auc && ranking_ok,
        format!(
            "discrete AUC = 1 on all seeds: {all_auc}; gap discrete/gamma per seed: {}",
            gaps.join(", ")
        ),
    )
}

fn training_time_ordering() -> Outcome {
    let mut rng = SampleRng::seed(9);
    let values: Vec<f64> = beat(BeatShape::Normal, 300)
        .iter()
        .map(|v| v + 0.02 * rng.normal())
        .collect();
    let series = Series::new(values, 1.0 / 360.0).unwrap();
    let spec = BenchSpec::new(vec![3, 5, 1, 6, 1, 5, 3]);
    let report = run_bench(&[("synthetic".to_string(), series)], &spec);
    let unbounded = report.cell("synthetic", BenchMode::Discrete).unwrap();
    let bounded = report
        .cell("synthetic", BenchMode::DiscreteBounded)
        .unwrap();
    let gamma = report.cell("synthetic", BenchMode::Gamma).unwrap();
    let all_ok = report.cells.iter().all(|c| c.outcome.is_ok());
    let ratio = unbounded.millis / bounded.millis;
    let table = report.table_csv();
    let mut lines = table.lines();
    let header_ok = lines.next() == Some("series,discrete,discrete_bounded,gamma");
    let row: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let hms = |s: &str| {
        let p: Vec<&str> = s.split(':').collect();
        p.len() == 3 && p[1].len() == 2 && p[2].len() == 6 && p[2].as_bytes()[2] == b'.'
    };
    let layout_ok =
        header_ok && row.len() == 4 && row[0] == "synthetic" && row[1..].iter().all(|c| hms(c));
    let iters_equal = unbounded.iterations == bounded.iterations;
    outcome(
        all_ok && ratio >= 2.0 && layout_ok && iters_equal,
        format!(
            "unbounded {:.0} ms vs bounded {:.0} ms ({ratio:.1}x, {} iterations each), gamma {:.0} ms, row `{}`",
            unbounded.millis,
            bounded.millis,
            bounded.iterations,
            gamma.millis,
            row.join(",")
        ),
    )
}

fn run(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_plhmm"))
        .args(args)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn same_bytes(a: &Path, b: &Path) -> bool {
    match (std::fs::read(a), std::fs::read(b)) {
        (Ok(x), Ok(y)) => !x.is_empty() && x == y,
        _ => false,
    }
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let s = |name: &str| p(name).to_string_lossy().into_owned();
    let mut rng = SampleRng::seed(12);
    let (exemplar, _) = beat_strip(&[BeatShape::Normal], 80, 0.02, &mut rng).unwrap();
    let (strip, _) = beat_strip(
        &[BeatShape::Normal, BeatShape::Ventricular, BeatShape::Normal],
        80,
        0.02,
        &mut rng,
    )
    .unwrap();
    plhmm_core::io::save_series(&exemplar, &p("beat.csv")).unwrap();
    plhmm_core::io::save_series(&strip, &p("strip.csv")).unwrap();
    let mut ok = true;
    for k in 1..=2 {
        let model = s(&format!("model{k}.json"));
        ok &= run(&[
            "train",
            "--input",
            &s("beat.csv"),
            "--states",
            "7",
            "--orders",
            "3,5,1,6,1,5,3",
            "--duration",
            "discrete",
            "--dmin",
            "6,6,6,6,6,6,6",
            "--dmax",
            "17,17,17,17,17,17,17",
            "--mode",
            "soft",
            "--iters",
            "4",
            "--seed",
            "42",
            "--out",
            &model,
        ]);
        ok &= run(&[
            "sample",
            "--model",
            &s("model1.json"),
            "--seed",
            "42",
            "--max-length",
            "500",
            "--out",
            &s(&format!("sample{k}.csv")),
        ]);
        ok &= run(&[
            "score",
            "--model",
            &s("model1.json"),
            "--input",
            &s("strip.csv"),
            "--width",
            "80",
            "--stride",
            "1",
            "--out",
            &s(&format!("track{k}.csv")),
        ]);
    }
    let model_same = same_bytes(&p("model1.json"), &p("model2.json"));
    let sample_same = same_bytes(&p("sample1.csv"), &p("sample2.csv"));
    let track_same = same_bytes(&p("track1.csv"), &p("track2.csv"));
    outcome(
        ok && model_same && sample_same && track_same,
        format!("commands ok: {ok}; identical model: {model_same}, sample: {sample_same}, track: {track_same}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("lattice identities", identities),
        ("soft EM monotonicity", em_monotonicity),
        ("critical-point fixed point", critical_point),
        ("digamma inversion", digamma_inversion),
        ("gamma discretization", gamma_discretization),
        ("parameter recovery", parameter_recovery),
        ("recognition separation", recognition_separation),
        ("training-time ordering", training_time_ordering),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {name} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
