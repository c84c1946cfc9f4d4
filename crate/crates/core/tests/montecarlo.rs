use disac::montecarlo::{
    apply_test_channel, sample_sources, simulate_schedule, NormalStream, SimConfig, SimResult,
};
use disac::{plan_schedule, DistortionSchedule, SourceModel};

const N: u64 = 1_000_000;

fn model(rho: f64) -> SourceModel {
    SourceModel::new(rho).unwrap()
}

fn schedule(d1: f64, d2: f64, d3: f64) -> DistortionSchedule {
    DistortionSchedule::new(d1, d2, d3).unwrap()
}

/// Mean of `values` and the standard error of that mean.
fn mean_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        s += v;
        s2 += v * v;
    }
    let mean = s / n;
    let var = (s2 - s * mean) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Consistency check with the documented flaky-test budget: one rerun with a
/// seed derived from the original.
fn simulate_within(config: SimConfig, k: f64) -> SimResult {
    let r = simulate_schedule(&config).unwrap();
    if r.all_within(k) {
        return r;
    }
    let retry = SimConfig {
        seed: config.seed ^ 0x9E37_79B9_7F4A_7C15,
        ..config
    };
    let r2 = simulate_schedule(&retry).unwrap();
    assert!(
        r2.all_within(k),
        "first {:?}\nretry {:?}",
        r.z_scores(),
        r2.z_scores()
    );
    r2
}

#[test]
fn independent_sources_are_uncorrelated() {
    let (c, se) = mean_se(sample_sources(&model(0.0), N, 1).map(|(x, y)| x * y));
    assert!(c.abs() <= 4.0 / (N as f64).sqrt(), "{c} (se {se})");
}

#[test]
fn sample_covariance_matches_model() {
    let samples: Vec<(f64, f64)> = sample_sources(&model(0.6), N, 42).collect();
    for (f, expected) in [
        (
            Box::new(|(x, _): (f64, f64)| x * x) as Box<dyn Fn((f64, f64)) -> f64>,
            1.0,
        ),
        (Box::new(|(x, y): (f64, f64)| x * y), 0.6),
        (Box::new(|(_, y): (f64, f64)| y * y), 1.0),
    ] {
        let (m, se) = mean_se(samples.iter().map(|&s| f(s)));
        assert!(
            (m - expected).abs() <= 4.0 * se,
            "{m} vs {expected} (se {se})"
        );
    }
    let (mx, se) = mean_se(samples.iter().map(|s| s.0));
    assert!(mx.abs() <= 4.0 * se);
}

#[test]
fn test_channel_backward_law() {
    let mut g = NormalStream::new(3, 99, 0);
    let input: Vec<f64> = (0..N).map(|_| g.next_normal()).collect();
    let out = apply_test_channel(&input, 1.0, 0.5, 3, 7).unwrap();
    let err = || input.iter().zip(&out).map(|(i, o)| i - o);

    let (d, se) = mean_se(err().map(|e| e * e));
    assert!((d - 0.5).abs() <= 4.0 * se, "{d} (se {se})");
    let (c, se) = mean_se(err().zip(&out).map(|(e, o)| e * o));
    assert!(c.abs() <= 4.0 * se, "{c} (se {se})");
    let (v, se) = mean_se(out.iter().map(|o| o * o));
    assert!((v - 0.5).abs() <= 4.0 * se);

    // Conditional spread does not depend on the output value.
    for (lo, hi) in [(f64::NEG_INFINITY, -0.5), (-0.5, 0.5), (0.5, f64::INFINITY)] {
        let (d, se) = mean_se(
            err()
                .zip(&out)
                .filter(|(_, o)| **o >= lo && **o < hi)
                .map(|(e, _)| e * e),
        );
        assert!(
            (d - 0.5).abs() <= 4.0 * se,
            "bin [{lo},{hi}): {d} (se {se})"
        );
    }
}

#[test]
fn zero_rate_schedule_leaves_priors() {
    let m = model(0.6);
    let plan = plan_schedule(&m, &schedule(1.0, 1.0, 1.0)).unwrap();
    assert_eq!(plan.sigma1_sq(), 1.0);
    let cfg = SimConfig::new(
        m,
        schedule(1.0, plan.sigma1_sq(), plan.sigma2_sq()),
        200_000,
        5,
    )
    .unwrap();
    let r = simulate_schedule(&cfg).unwrap();
    for k in 0..6 {
        assert_eq!(r.analytic[k], 1.0);
        assert!(
            (r.empirical[k] - 1.0).abs() <= 4.0 * r.std_err[k],
            "{k}: {r:?}"
        );
    }
}

#[test]
fn reference_schedule_matches_analytic() {
    let m = model(0.6);
    let cfg = SimConfig::new(m, schedule(0.5, 0.4, 0.3), N, 7).unwrap();
    let r = simulate_within(cfg, 3.0);
    let plan = plan_schedule(&m, &cfg.schedule).unwrap();
    assert_eq!(r.analytic[0], 0.5);
    assert!((r.analytic[1] - 0.82).abs() < 1e-15);
    assert_eq!(r.analytic[2], plan.sigma2_sq());
    assert_eq!(r.analytic[3], 0.4);
    assert_eq!(r.analytic[4], 0.3);
    assert_eq!(r.analytic[5], plan.sigma3_sq());
    assert!(r.std_err.iter().all(|s| *s > 0.0));
    assert!(
        r.orthogonality_within(4.0).iter().all(|b| *b),
        "{:?}",
        r.orthogonality
    );
}

#[test]
fn independent_y_is_never_refined() {
    let cfg = SimConfig::new(model(0.0), schedule(0.5, 1.0, 0.25), 200_000, 3).unwrap();
    let r = simulate_within(cfg, 3.0);
    for k in [1, 3, 5] {
        assert_eq!(r.analytic[k], 1.0);
    }
}

#[test]
fn orthogonality_holds_across_schedules() {
    for (rho, s) in [
        (0.9, schedule(0.3, 0.3, 0.1)),
        (-0.5, schedule(0.8, 0.2, 0.15)),
    ] {
        let r = simulate_schedule(&SimConfig::new(model(rho), s, 200_000, 17).unwrap()).unwrap();
        let ok = r.orthogonality_within(4.0);
        assert!(
            ok.iter().all(|b| *b),
            "rho={rho}: {:?} / {:?}",
            r.orthogonality,
            r.orthogonality_std_err
        );
    }
}

#[test]
fn repeated_runs_are_identical() {
    let cfg = SimConfig::new(model(0.6), schedule(0.5, 0.4, 0.3), 50_000, 42).unwrap();
    assert_eq!(
        simulate_schedule(&cfg).unwrap(),
        simulate_schedule(&cfg).unwrap()
    );
}

#[test]
fn error_shrinks_as_inverse_root_n() {
    let m = model(0.6);
    let sizes = [1_000u64, 10_000, 100_000, 1_000_000];
    let seeds = 8u64;
    let gaps: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let mut total = 0.0;
            for seed in 0..seeds {
                let cfg = SimConfig::new(m, schedule(0.5, 0.4, 0.3), n, 1000 + seed).unwrap();
                let r = simulate_schedule(&cfg).unwrap();
                total += (0..6)
                    .map(|k| (r.empirical[k] - r.analytic[k]).abs())
                    .sum::<f64>();
            }
            total / (6 * seeds) as f64
        })
        .collect();
    // Least-squares slope of log(gap) against log(n).
    let xs: Vec<f64> = sizes.iter().map(|n| (*n as f64).ln()).collect();
    let ys: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!(
        (-0.65..=-0.35).contains(&slope),
        "slope {slope}, gaps {gaps:?}"
    );
}
