use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::model::GeoPoint;
use crate::spatial::CovariateSurface;

fn lattice(side: usize) -> Vec<GeoPoint> {
    (0..side * side)
        .map(|i| GeoPoint::new(32.0 + (i / side) as f64 * 0.05, -84.0 + (i % side) as f64 * 0.05))
        .collect()
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn standardize(v: Vec<f64>) -> Vec<f64> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    v.into_iter().map(|x| (x - m) / sd).collect()
}

fn small_basis() -> SvcmOptions {
    SvcmOptions {
        basis: BasisSpec::tensor(6),
        ..SvcmOptions::default()
    }
}

#[test]
fn noiseless_linear_truth_recovered() {
    let sites = lattice(20);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x1 = standardize(normals(&mut rng, sites.len()));
    let x2 = standardize(normals(&mut rng, sites.len()));
    let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 2.0 * a - b).collect();
    let cov = [CovariateSurface::new("x1", x1), CovariateSurface::new("x2", x2)];
    let fit = fit_svcm(&y, &cov, &sites, &SvcmOptions::default()).unwrap();
    assert!(fit.converged, "trace {:?}", fit.trace);
    let b1 = &fit.surface("x1").unwrap().estimate;
    let b2 = &fit.surface("x2").unwrap().estimate;
    let b0 = &fit.surface(INTERCEPT).unwrap().estimate;
    assert!(b1.iter().all(|b| (b - 2.0).abs() <= 0.01), "{:?}", b1.iter().cloned().fold(0.0f64, f64::max));
    assert!(b2.iter().all(|b| (b + 1.0).abs() <= 0.01));
    assert!(b0.iter().all(|b| b.abs() <= 0.01));
    assert!(fit.aic.is_finite());
}

#[test]
fn residuals_and_evaluator_identities() {
    let sites = lattice(10);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = normals(&mut rng, 100);
    let e = normals(&mut rng, 100);
    let y: Vec<f64> = (0..100).map(|i| (1.0 + sites[i].lat - 32.0) * x[i] + 0.3 * e[i]).collect();
    let fit = fit_svcm(&y, &[CovariateSurface::new("x", x)], &sites, &small_basis()).unwrap();
    for i in 0..100 {
        assert!((fit.residuals[i] - (fit.y[i] - fit.fitted[i])).abs() < 1e-12);
    }
    for r in 0..fit.surfaces.len() {
        let product = fit.design_product(r);
        for (i, p) in fit.sites.iter().enumerate() {
            assert!((fit.evaluate(r, p) - product[i]).abs() < 1e-12);
            assert!((fit.surfaces[r].estimate[i] - product[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn backfitting_reaches_fixed_point() {
    let sites = lattice(12);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = sites.len();
    let x1 = normals(&mut rng, n);
    let x2 = normals(&mut rng, n);
    let e = normals(&mut rng, n);
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let u = (sites[i].lon + 84.0) * 4.0;
            (1.0 + u.sin()) * x1[i] - 0.5 * x2[i] + 0.2 * e[i]
        })
        .collect();
    let cov = [CovariateSurface::new("x1", x1), CovariateSurface::new("x2", x2)];
    let fit = fit_svcm(&y, &cov, &sites, &small_basis()).unwrap();
    assert!(fit.converged);
    let extra = fit.extra_cycle_change();
    assert!(extra < 1e-6, "extra {extra} lambdas {:?} trace {:?}", fit.surfaces.iter().map(|s| s.lambda).collect::<Vec<_>>(), fit.trace);
    // The joint solve at the chosen smoothing parameters is the same point.
    let joint = fit.refit_surfaces(&nalgebra::DVector::from_column_slice(&fit.y));
    for (r, s) in fit.surfaces.iter().enumerate() {
        let gap = s.estimate.iter().zip(joint[r].iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-9, "term {r} gap {gap}");
    }
}

#[test]
fn constant_covariate_is_plain_smoothing() {
    let sites = lattice(9);
    let n = sites.len();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let e = normals(&mut rng, n);
    let y: Vec<f64> = (0..n).map(|i| (sites[i].lat - 32.0) * 3.0 + 0.1 * e[i]).collect();
    let opts = SvcmOptions {
        intercept: false,
        ..small_basis()
    };
    let fit = fit_svcm(&y, &[CovariateSurface::new("one", vec![1.0; n])], &sites, &opts).unwrap();
    let alone = fit_svcm(&y, &[], &sites, &small_basis()).unwrap();
    assert_eq!(fit.cycles, 1);
    for (a, b) in fit.fitted.iter().zip(&alone.fitted) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn rows_with_missing_values_are_dropped() {
    let sites = lattice(6);
    let mut y: Vec<f64> = (0..36).map(|i| i as f64 * 0.1).collect();
    let mut x: Vec<f64> = (0..36).map(|i| ((i * 7) % 5) as f64).collect();
    y[3] = f64::NAN;
    x[10] = f64::NAN;
    let fit = fit_svcm(&y, &[CovariateSurface::new("x", x)], &sites, &small_basis()).unwrap();
    assert_eq!(fit.dropped, 2);
    assert_eq!(fit.kept.len(), 34);
    assert!(!fit.kept.contains(&3) && !fit.kept.contains(&10));
}

#[test]
fn input_errors() {
    let sites = lattice(3);
    assert!(matches!(
        fit_svcm(&[1.0; 8], &[], &sites, &SvcmOptions::default()),
        Err(SvcmError::LengthMismatch(_))
    ));
    let opts = SvcmOptions {
        intercept: false,
        ..SvcmOptions::default()
    };
    assert!(matches!(fit_svcm(&[1.0; 9], &[], &sites, &opts), Err(SvcmError::NoTerms)));
    let fit = fit_svcm(&[1.0; 9], &[], &sites, &small_basis()).unwrap();
    assert!(matches!(
        simultaneous_band(&fit, 0, 0.05, 50, 1),
        Err(SvcmError::TooFewBootstrap { n_boot: 50, .. })
    ));
    assert!(matches!(simultaneous_band(&fit, 0, 1.5, 200, 1), Err(SvcmError::BadAlpha(_))));
}

#[test]
fn noiseless_band_collapses_on_truth() {
    let sites = lattice(12);
    let n = sites.len();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = standardize(normals(&mut rng, n));
    let y: Vec<f64> = x.iter().map(|v| 1.5 * v).collect();
    let fit = fit_svcm(&y, &[CovariateSurface::new("x", x)], &sites, &small_basis()).unwrap();
    let band = simultaneous_band(&fit, 1, 0.05, 100, 9).unwrap();
    let width = band.lower.iter().zip(&band.upper).map(|(l, u)| u - l).fold(0.0, f64::max);
    assert!(width < 1e-6, "width {width}");
    assert!(band.lower.iter().all(|&l| l <= 1.5 + 1e-6));
    assert!(band.upper.iter().all(|&u| u >= 1.5 - 1e-6));
}

#[test]
fn band_is_wider_than_pointwise_interval() {
    let sites = lattice(12);
    let n = sites.len();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = normals(&mut rng, n);
    let e = normals(&mut rng, n);
    let y: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * e[i]).collect();
    let fit = fit_svcm(&y, &[CovariateSurface::new("x", x)], &sites, &small_basis()).unwrap();
    let band = simultaneous_band(&fit, 1, 0.05, 200, 3).unwrap();
    assert!(band.critical_value > 1.96);
    for i in 0..n {
        assert!(band.lower[i] <= band.estimate[i] && band.estimate[i] <= band.upper[i]);
        assert!(band.upper[i] - band.lower[i] > 2.0 * 1.96 * band.se[i]);
    }
    let again = simultaneous_band(&fit, 1, 0.05, 200, 3).unwrap();
    assert_eq!(band, again);
}

#[test]
fn identical_measures_give_empty_difference_map() {
    let sites = lattice(7);
    let m: Vec<f64> = (0..49).map(|i| (i as f64).sqrt()).collect();
    let opts = InferenceOptions {
        fit: small_basis(),
        ..InferenceOptions::default()
    };
    let map = difference_test(&m, &m, &sites, &opts).unwrap();
    assert_eq!(map.count(Sign::None), 49);
    assert!(difference_test(&m, &m[..48], &sites, &opts).is_err());
}

#[test]
fn constant_shift_flags_every_tract() {
    let sites = lattice(10);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let noise = normals(&mut rng, 100);
    let m: Vec<f64> = noise.iter().map(|e| 3.0 + 0.05 * e).collect();
    let o = vec![0.0; 100];
    let opts = InferenceOptions {
        fit: small_basis(),
        ..InferenceOptions::default()
    };
    let map = difference_test(&m, &o, &sites, &opts).unwrap();
    assert_eq!(map.count(Sign::Positive), 100);
    let neg = difference_test(&o, &m, &sites, &opts).unwrap();
    assert_eq!(neg.count(Sign::Negative), 100);
}

#[test]
fn planted_cluster_is_flagged() {
    let side = 14;
    let sites = lattice(side);
    let n = sites.len();
    let in_cluster = |i: usize| (3..7).contains(&(i / side)) && (3..7).contains(&(i % side));
    let opts = InferenceOptions {
        fit: small_basis(),
        ..InferenceOptions::default()
    };
    let mut hits = 0;
    for rep in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + rep);
        let e = normals(&mut rng, n);
        let m: Vec<f64> = (0..n).map(|i| if in_cluster(i) { 5.0 } else { 0.0 } + 0.3 * e[i]).collect();
        let map = difference_test(&m, &vec![0.0; n], &sites, &InferenceOptions { seed: rep, ..opts.clone() }).unwrap();
        let core = [4 * side + 4, 4 * side + 5, 5 * side + 4, 5 * side + 5];
        if core.iter().all(|&i| map.signs()[i] == Sign::Positive) {
            hits += 1;
        }
        let far = n - 1;
        assert_ne!(map.signs()[far], Sign::Positive);
    }
    assert!(hits >= 9, "cluster core flagged in {hits}/10");
}

#[test]
fn location_test_thresholds() {
    let sites = lattice(8);
    let n = sites.len();
    let opts = InferenceOptions {
        fit: small_basis(),
        ..InferenceOptions::default()
    };
    let flat = vec![7.25; n];
    let weights: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
    let map = location_test(&flat, None, Some(&weights), &sites, &opts).unwrap();
    assert_eq!(map.count(Sign::None), n);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let y: Vec<f64> = normals(&mut rng, n).iter().map(|e| 10.0 + 0.2 * e).collect();
    let lowest = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let map = location_test(&y, Some(lowest - 1.0), None, &sites, &opts).unwrap();
    assert_eq!(map.count(Sign::Positive), n);
}

#[test]
fn rural_high_travel_cost_flagged_positive() {
    let side = 12;
    let sites = lattice(side);
    let n = sites.len();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let e = normals(&mut rng, n);
    // Urban core in the lower-left corner, cost rising toward the far edge.
    let tc: Vec<f64> = (0..n)
        .map(|i| {
            let d = (((i / side) as f64).powi(2) + ((i % side) as f64).powi(2)).sqrt();
            3.0 + 1.2 * d + 0.5 * e[i]
        })
        .collect();
    let opts = InferenceOptions {
        fit: small_basis(),
        ..InferenceOptions::default()
    };
    let map = location_test(&tc, None, None, &sites, &opts).unwrap();
    assert_eq!(map.signs()[n - 1], Sign::Positive);
    assert_eq!(map.signs()[0], Sign::Negative);
}

#[test]
fn singleton_candidate_is_retained() {
    let sites = lattice(8);
    let n = sites.len();
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let cov: Vec<CovariateSurface> = (0..4)
        .map(|k| CovariateSurface::new(format!("x{k}"), normals(&mut rng, n)))
        .collect();
    let e = normals(&mut rng, n);
    let y: Vec<f64> = (0..n).map(|i| cov[0].values[i] + e[i]).collect();
    let opts = EvaluateOptions {
        inference: InferenceOptions {
            fit: SvcmOptions {
                basis: BasisSpec::tensor(4),
                ..SvcmOptions::default()
            },
            n_boot: 100,
            ..InferenceOptions::default()
        },
        ..EvaluateOptions::default()
    };
    let table = evaluate_models(&[vec![0, 1, 2, 3]], &y, &cov, &sites, &opts).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert!(table.rows[0].retained);
    assert_eq!(table.rows[0].verdicts.len(), 4);
    assert_eq!(table.consistency.len(), 4);
    assert!(matches!(
        evaluate_models(&[vec![0, 1]], &y, &cov, &sites, &opts),
        Err(SvcmError::BadCandidate(_))
    ));
}

#[test]
fn shuffled_order_reaches_same_fit() {
    let sites = lattice(10);
    let n = sites.len();
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let x1 = normals(&mut rng, n);
    let x2 = normals(&mut rng, n);
    let e = normals(&mut rng, n);
    let y: Vec<f64> = (0..n).map(|i| x1[i] - 2.0 * x2[i] + 0.3 * e[i]).collect();
    let cov = [CovariateSurface::new("x1", x1), CovariateSurface::new("x2", x2)];
    let a = fit_svcm(&y, &cov, &sites, &small_basis()).unwrap();
    let b = fit_svcm(&y, &cov, &sites, &SvcmOptions { order_seed: Some(3), ..small_basis() }).unwrap();
    for (p, q) in a.fitted.iter().zip(&b.fitted) {
        assert!((p - q).abs() < 1e-3);
    }
}

#[test]
fn edf_falls_as_penalty_grows() {
    let sites = lattice(10);
    let n = sites.len();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let y = normals(&mut rng, n);
    let edf: Vec<f64> = (-4..=6)
        .map(|e| {
            let opts = SvcmOptions {
                fixed_lambda: Some(10f64.powi(e)),
                ..small_basis()
            };
            fit_svcm(&y, &[], &sites, &opts).unwrap().edf
        })
        .collect();
    assert!(edf.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{edf:?}");
    assert!(edf[0] > 25.0, "{edf:?}");
    assert!(*edf.last().unwrap() < 4.5);
}

#[test]
fn thin_plate_basis_fits() {
    let sites = lattice(10);
    let n = sites.len();
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let e = normals(&mut rng, n);
    let y: Vec<f64> = (0..n).map(|i| (sites[i].lat - 32.0) * 2.0 + 0.05 * e[i]).collect();
    let opts = SvcmOptions {
        basis: BasisSpec {
            kind: BasisKind::ThinPlateRadial,
            knots_per_dim: 5,
            penalty_order: 2,
        },
        ..SvcmOptions::default()
    };
    let fit = fit_svcm(&y, &[], &sites, &opts).unwrap();
    let rmse = (fit.residuals.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    assert!(rmse < 0.08, "rmse {rmse}");
}

#[test]
fn exports_write_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let sites = lattice(6);
    let n = sites.len();
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let x = normals(&mut rng, n);
    let y: Vec<f64> = x.iter().zip(normals(&mut rng, n)).map(|(a, e)| a + 0.1 * e).collect();
    let mut fit = fit_svcm(&y, &[CovariateSurface::new("x", x)], &sites, &small_basis()).unwrap();
    attach_bands(&mut fit, 0.05, 100, 1).unwrap();
    let ids: Vec<i64> = (0..n as i64).map(|i| 1000 + i).collect();
    let csv_path = dir.path().join("coefficients.csv");
    write_coefficients_csv(&fit, &ids, &csv_path).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("tract_id,covariate,estimate,lower,upper,sign"));
    assert_eq!(text.lines().count(), 1 + 2 * n);
    assert!(text.contains("1000,intercept,"));
    write_fit_json(&fit, &dir.path().join("fit.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert_eq!(json["covariates"][1], "x");
    let map = significance_map(&fit).unwrap();
    write_significance_geojson(&map, &ids, &dir.path().join("sig.geojson")).unwrap();
    let geo: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("sig.geojson")).unwrap()).unwrap();
    assert_eq!(geo["features"].as_array().unwrap().len(), n);
    assert!(geo["features"][0]["properties"]["x_sign"].is_string());
}
