use proptest::prelude::*;

use lgmem::analysis::{distinction_ratio, efficiency, write_histogram_csv, WindowSpec};
use lgmem::counting::{accumulate, expected_counts, simulate, CountHistogram, DetectorParams, IntensityTrace};
use lgmem::experiment::{with_workers, RunOptions};
use lgmem::Error;

/// A two-bump per-trial mean profile, `n_bins` bins of 10 ns from t = 0.
fn profile(n_bins: usize, scale: f64) -> Vec<f64> {
    (0..n_bins)
        .map(|k| {
            let x = k as f64 / n_bins as f64;
            scale * ((-((x - 0.3) / 0.08).powi(2)).exp() + 0.4 * (-((x - 0.7) / 0.05).powi(2)).exp()) + 1e-4
        })
        .collect()
}

#[test]
fn bins_and_totals_match_analytic_means() {
    let trials = 500_000;
    let m0 = profile(100, 0.02);
    let m1 = profile(100, 0.002);
    let h = simulate([&m0, &m1], 0.0, 10e-9, trials, 42).unwrap();
    assert_eq!(h.trials, trials);
    for (ch, m) in [&m0, &m1].into_iter().enumerate() {
        for (k, &mu) in m.iter().enumerate() {
            let want = mu * trials as f64;
            let z = (h.counts[ch][k] as f64 - want) / want.sqrt();
            assert!(z.abs() < 5.0, "channel {ch} bin {k}: {z:.2} sigma");
        }
        let want: f64 = m.iter().sum::<f64>() * trials as f64;
        let z = (h.total(ch) as f64 - want) / want.sqrt();
        assert!(z.abs() < 3.0, "channel {ch} total: {z:.2} sigma");
    }
}

#[test]
fn simulation_ignores_worker_count() {
    let m0 = profile(64, 0.05);
    let m1 = profile(64, 0.01);
    let run = |w: usize| {
        with_workers(RunOptions { workers: Some(w) }, || {
            simulate([&m0, &m1], -1e-6, 10e-9, 30_000, 9)
        })
        .unwrap()
        .unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
    assert_ne!(one, simulate([&m0, &m1], -1e-6, 10e-9, 30_000, 10).unwrap());
}

#[test]
fn trial_prefixes_are_stable() {
    // the first trials of a longer run are the same draws as a shorter run
    let m = profile(16, 0.3);
    let short = simulate([&m, &m], 0.0, 10e-9, 5000, 3).unwrap();
    let long = simulate([&m, &m], 0.0, 10e-9, 10000, 3).unwrap();
    assert!(long.total(0) >= short.total(0));
    assert!(long.counts[0].iter().zip(&short.counts[0]).all(|(l, s)| l >= s));
}

#[test]
fn accumulate_adds_counts_and_trials() {
    let m = profile(20, 0.2);
    let a = simulate([&m, &m], 0.0, 10e-9, 1000, 1).unwrap();
    let b = simulate([&m, &m], 0.0, 10e-9, 3000, 2).unwrap();
    let s = accumulate(&a, &[&b]).unwrap();
    assert_eq!(s.trials, 4000);
    for ch in 0..2 {
        assert_eq!(s.total(ch), a.total(ch) + b.total(ch));
    }
    let shifted = simulate([&m, &m], 10e-9, 10e-9, 10, 1).unwrap();
    assert!(matches!(accumulate(&a, &[&shifted]), Err(Error::LayoutMismatch(_))));
    let coarse = a.rebin(2).unwrap();
    assert!(matches!(accumulate(&a, &[&coarse]), Err(Error::LayoutMismatch(_))));
}

#[test]
fn expected_counts_include_efficiency_and_dark_rate() {
    let det = DetectorParams {
        quantum_efficiency: 0.5,
        dark_rate: 100.0,
        bin_width: 10e-9,
    };
    let tr = IntensityTrace {
        t0: 0.0,
        dt: 1e-9,
        values: vec![1e7; 40],
    };
    let m = expected_counts(&tr, &det).unwrap();
    assert_eq!(m.len(), 4);
    for v in m {
        assert!((v - (0.5 * 1e7 * 10e-9 + 100.0 * 10e-9)).abs() < 1e-15);
    }
}

fn histogram(t0: f64, counts: [Vec<u64>; 2], trials: u64) -> CountHistogram {
    let mut h = CountHistogram::empty(t0, 10e-9, counts[0].len());
    h.counts = counts;
    h.trials = trials;
    h
}

fn windows() -> WindowSpec {
    WindowSpec {
        input: (0.0, 1e-6),
        retrieval: (2e-6, 3e-6),
    }
}

#[test]
fn efficiency_of_a_shifted_copy_is_one() {
    // 300 bins from 0 to 3 µs; the memory run is the reference moved by 2 µs
    let pattern = |k: u64, a: u64, b: u64| if (10..90).contains(&k) { (k * a) % b } else { 0 };
    let r = [(37, 101), (11, 13)].map(|(a, b)| (0..300).map(|k| pattern(k, a, b)).collect::<Vec<u64>>());
    let m = [0, 1].map(|ch| {
        let mut v = vec![0u64; 300];
        v[200..].copy_from_slice(&r[ch][..100]);
        v
    });
    let e = efficiency(&histogram(0.0, m, 777), &histogram(0.0, r, 777), &windows()).unwrap();
    assert!((e.value - 1.0).abs() < 1e-15);
    assert!(e.stderr > 0.0);
}

proptest! {
    #[test]
    fn efficiency_is_invariant_under_joint_scaling(
        counts in prop::collection::vec(1u64..50, 300),
        factor in 1u64..20,
    ) {
        let r = [counts.clone(), counts.iter().map(|c| c / 2).collect()];
        let m = [counts.iter().rev().cloned().collect(), counts.iter().map(|c| c % 7).collect()];
        let win = windows();
        let base = efficiency(&histogram(0.0, m.clone(), 100), &histogram(0.0, r.clone(), 40), &win).unwrap();
        let scale = |h: &[Vec<u64>; 2]| [0, 1].map(|ch| h[ch].iter().map(|c| c * factor).collect::<Vec<_>>());
        let scaled = efficiency(&histogram(0.0, scale(&m), 100 * factor), &histogram(0.0, scale(&r), 40 * factor), &win).unwrap();
        prop_assert!((base.value - scaled.value).abs() <= 1e-12 * base.value.max(1.0));
    }

    #[test]
    fn window_sums_partition_the_total(counts in prop::collection::vec(0u64..1000, 1..200), cut in 0usize..200) {
        let n = counts.len();
        let h = histogram(0.0, [counts.clone(), counts], 1);
        let edge = (cut.min(n)) as f64 * 10e-9;
        let below = h.window_sum(0, (-1.0, edge));
        let above = h.window_sum(0, (edge, 1.0));
        prop_assert_eq!(below + above, h.total(0));
    }
}

#[test]
fn empty_reference_is_reported() {
    let z = histogram(0.0, [vec![0; 300], vec![0; 300]], 10);
    let m = histogram(0.0, [vec![1; 300], vec![1; 300]], 10);
    assert!(matches!(efficiency(&m, &z, &windows()), Err(Error::ZeroReference)));
    assert!(distinction_ratio(0.0, 0.0).is_nan());
}

#[test]
fn histogram_csv_has_one_row_per_bin_and_channel() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    let h = histogram(-1.5e-6, [vec![3; 17], vec![5; 17]], 2);
    write_histogram_csv(&h, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time_s,channel,counts"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 34);
    assert_eq!(rows[0][1], "1");
    assert_eq!(rows[17][1], "-1");
    let t: f64 = rows[1][0].parse().unwrap();
    assert!((t - (-1.49e-6)).abs() < 1e-15);
    let sum: u64 = rows.iter().map(|r| r[2].parse::<u64>().unwrap()).sum();
    assert_eq!(sum, 3 * 17 + 5 * 17);
}
