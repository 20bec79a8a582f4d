use crs::metrics::{self, compute_v_eps, compute_v_fid, compute_v_klub, compute_v_x, MomentTrajectory, RateEstimate, VxConfig};
use crs::toy::{PointDataset, PosteriorMean};

fn value_and_se(est: &RateEstimate, alpha: f64) -> (f64, f64) {
    let i = est
        .table
        .alphas()
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - alpha).abs().total_cmp(&(b.1 - alpha).abs()))
        .unwrap()
        .0;
    (est.table.values()[i], est.std_errors[i])
}

fn agree_within(a: &RateEstimate, b: &RateEstimate, alphas: &[f64], k: f64) {
    for &alpha in alphas {
        let (va, sa) = value_and_se(a, alpha);
        let (vb, sb) = value_and_se(b, alpha);
        let z = (va - vb).abs() / (sa * sa + sb * sb).sqrt();
        assert!(z <= k, "alpha {alpha}: {va} vs {vb}, {z:.2} standard errors");
    }
}

#[test]
fn exact_moments_of_a_single_point() {
    let p = 0.8;
    let ds = PointDataset::from_scalars(&[p]).unwrap();
    let alphas = [0.9, 0.5, 0.1];
    let m = MomentTrajectory::exact(&ds, &alphas);
    for (t, a) in alphas.iter().enumerate() {
        assert!((m.means[t][0] - a * p).abs() < 1e-15);
        assert!((m.covs[t][0] - (1.0 - a * a)).abs() < 1e-15);
    }
}

#[test]
fn simulated_fid_rate_of_a_single_point_matches_closed_form() {
    let p = 0.8;
    let ds = PointDataset::from_scalars(&[p]).unwrap();
    let alphas: Vec<f64> = (0..=10).map(|i| 0.95 - 0.09 * i as f64).collect();
    let est = compute_v_fid(&ds, &alphas, 100_000, 5, None).unwrap();
    let sigma = |a: f64| (1.0 - a * a).sqrt();
    for t in 0..10 {
        let (a0, a1) = (alphas[t], alphas[t + 1]);
        // Gaussians differing in mean and scale only
        let fd = ((a0 - a1) * p).powi(2) + (sigma(a0) - sigma(a1)).powi(2);
        let exact = fd / (a0 - a1);
        let got = est.table.eval(a0);
        assert!((got / exact - 1.0).abs() <= 0.05, "alpha {a0}: {got} vs {exact}");
    }
    let exact_path = MomentTrajectory::exact(&ds, &alphas).fid_rates().unwrap();
    assert!((exact_path[0] - est.table.eval(0.95)).abs() / exact_path[0] <= 0.05);
}

#[test]
fn fid_rate_of_two_points_is_positive_inside() {
    let ds = PointDataset::builtin("two-point").unwrap();
    let cfg = VxConfig::default();
    let est = compute_v_fid(&ds, &cfg.grid(), cfg.samples, 2, None).unwrap();
    assert_eq!(est.table.len(), 1001);
    let n = est.table.len();
    assert!(est.table.values()[1..n - 1].iter().all(|&v| v > 0.0));
}

#[test]
fn fid_rate_accepts_a_feature_map() {
    let ds = PointDataset::builtin("grid-mixture:2").unwrap();
    let alphas = [0.9, 0.7, 0.5];
    let squares = |x: &[f64]| x.iter().map(|v| v * v).collect::<Vec<_>>();
    let raw = compute_v_fid(&ds, &alphas, 4096, 1, None).unwrap();
    let mapped = compute_v_fid(&ds, &alphas, 4096, 1, Some(&squares)).unwrap();
    assert_ne!(raw.table, mapped.table);
    assert!(mapped.table.values().iter().all(|v| v.is_finite() && *v >= 0.0));
}

#[test]
fn noise_rate_is_invariant_under_negation() {
    let ds = PointDataset::builtin("toy3").unwrap();
    let neg = ds.negated();
    let cfg = VxConfig::default();
    let a = compute_v_eps(&ds, &PosteriorMean::new(ds.clone()), &cfg, 1).unwrap();
    let b = compute_v_eps(&neg, &PosteriorMean::new(neg.clone()), &cfg, 2).unwrap();
    agree_within(&a, &b, &[0.2, 0.5, 0.8], 3.0);
}

#[test]
fn rates_are_invariant_under_rotation() {
    let ds = PointDataset::builtin("grid-mixture:2").unwrap();
    let (c, s) = (0.5f64.cos(), 0.5f64.sin());
    let rotated = ds.transformed(&[c, -s, s, c]).unwrap();
    let cfg = VxConfig::default();
    let pa = PosteriorMean::new(ds.clone());
    let pb = PosteriorMean::new(rotated.clone());
    let alphas = [0.3, 0.6, 0.9];
    agree_within(&compute_v_x(&ds, &pa, &cfg, 3).unwrap(), &compute_v_x(&rotated, &pb, &cfg, 4).unwrap(), &alphas, 3.0);
    agree_within(&compute_v_eps(&ds, &pa, &cfg, 3).unwrap(), &compute_v_eps(&rotated, &pb, &cfg, 4).unwrap(), &alphas, 3.0);
}

#[test]
fn two_point_data_rate_peaks_inside() {
    let ds = PointDataset::builtin("two-point").unwrap();
    let est = compute_v_x(&ds, &PosteriorMean::new(ds.clone()), &VxConfig::default(), 8).unwrap();
    // 20 block means of 50 knots each
    let v = est.table.values();
    let blocks: Vec<f64> = (0..20).map(|b| v[b * 50..(b + 1) * 50].iter().sum::<f64>() / 50.0).collect();
    let peak = blocks.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(peak > 0 && peak < 19, "peak block {peak}");
    let se = est.std_errors.iter().cloned().fold(0.0, f64::max) / 50f64.sqrt();
    for w in blocks[..=peak].windows(2) {
        assert!(w[1] >= w[0] - 3.0 * se, "{blocks:?}");
    }
    for w in blocks[peak..].windows(2) {
        assert!(w[1] <= w[0] + 3.0 * se, "{blocks:?}");
    }
}

#[test]
fn klub_table_stops_below_unit_alpha() {
    let ds = PointDataset::builtin("toy3").unwrap();
    let cfg = VxConfig { steps: 100, samples: 500, ..Default::default() };
    let est = compute_v_klub(&ds, &PosteriorMean::new(ds.clone()), &cfg, 0).unwrap();
    assert_eq!(est.table.len(), 100);
    assert!(est.table.domain().1 < 1.0);
    assert!((metrics::klub_weight(0.5) - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn tables_do_not_depend_on_thread_count() {
    let ds = PointDataset::builtin("toy3").unwrap();
    let p = PosteriorMean::new(ds.clone());
    let cfg = VxConfig { steps: 200, samples: 3000, ..Default::default() };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            (
                compute_v_x(&ds, &p, &cfg, 6).unwrap(),
                compute_v_fid(&ds, &cfg.grid(), cfg.samples, 6, None).unwrap(),
            )
        })
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}
