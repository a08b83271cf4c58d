mod common;

use common::*;
use maximin::data::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn moments(v: &DVector<f64>) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.sum() / n;
    (mean, v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n)
}

fn noise_sample(noise: Noise) -> DVector<f64> {
    generate(&GeneratorSpec {
        m: 100_000,
        n: 1,
        x_scale: XScale::Unit,
        noise,
        seed: 17,
    })
    .unwrap()
    .truth
    .e
}

#[test]
fn gaussian_noise_moments() {
    let (mean, var) = moments(&noise_sample(Noise::Gaussian { sigma: 0.3 }));
    assert!(mean.abs() < 0.005);
    assert!((var / 0.09 - 1.0).abs() < 0.02);
}

#[test]
fn laplace_noise_moments() {
    let e = noise_sample(Noise::Laplace { scale: 0.5 });
    let (mean, var) = moments(&e);
    assert!(mean.abs() < 0.01);
    assert!((var / (2.0 * 0.25) - 1.0).abs() < 0.03);
    let mad = e.iter().map(|v| v.abs()).sum::<f64>() / e.len() as f64;
    assert!((mad / 0.5 - 1.0).abs() < 0.02);
}

#[test]
fn sparse_outliers_hit_exactly_floor_pm_rows() {
    let inst = generate(&GeneratorSpec {
        m: 163,
        n: 4,
        x_scale: XScale::Unit,
        noise: Noise::SparseOutliers {
            fraction: 0.25,
            magnitude: 1e3,
        },
        seed: 3,
    })
    .unwrap();
    let mask = inst.truth.outlier_mask.clone().unwrap();
    assert_eq!(mask.iter().filter(|&&b| b).count(), 40);
    for (i, &b) in mask.iter().enumerate() {
        assert_eq!(inst.truth.e[i].abs(), if b { 1e3 } else { 0.0 });
    }
    let resid = &inst.y - &inst.x * &inst.truth.w_star;
    assert!((resid - &inst.truth.e).amax() < 1e-9);
}

#[test]
fn inverse_n_columns_have_variance_one_over_n() {
    let n = 25;
    let inst = generate(&GeneratorSpec {
        m: 4000,
        n,
        x_scale: XScale::InvN,
        noise: Noise::Gaussian { sigma: 0.0 },
        seed: 5,
    })
    .unwrap();
    let mean_var: f64 = (0..n).map(|j| moments(&inst.x.column(j).clone_owned()).1).sum::<f64>() / n as f64;
    assert!((mean_var * n as f64 - 1.0).abs() < 0.02);
    assert_eq!(inst.y, &inst.x * &inst.truth.w_star);
}

#[test]
fn generator_rejects_invalid_specs() {
    let base = GeneratorSpec {
        m: 10,
        n: 2,
        x_scale: XScale::Unit,
        noise: Noise::Gaussian { sigma: 0.1 },
        seed: 0,
    };
    assert!(generate(&GeneratorSpec { m: 0, ..base }).is_err());
    assert!(generate(&GeneratorSpec { noise: Noise::Gaussian { sigma: -1.0 }, ..base }).is_err());
    assert!(generate(&GeneratorSpec { noise: Noise::SparseOutliers { fraction: 0.5, magnitude: 1.0 }, ..base }).is_err());
    assert!(generate(&GeneratorSpec { noise: Noise::SparseOutliers { fraction: 0.1, magnitude: 0.0 }, ..base }).is_err());
}

#[test]
fn generation_is_deterministic_per_seed() {
    let spec = GeneratorSpec {
        m: 20,
        n: 5,
        x_scale: XScale::InvN,
        noise: Noise::Laplace { scale: 0.2 },
        seed: 99,
    };
    assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    assert_ne!(generate(&spec).unwrap().x, generate(&GeneratorSpec { seed: 100, ..spec }).unwrap().x);
}

#[test]
fn parses_whitespace_and_headers() {
    let text = "# comment\na b target\n\n1 2 3\n4 5 6\n";
    let opts = TableOptions {
        target: TargetColumn::Name("a".into()),
        header: true,
    };
    let t = parse_table(text, &opts).unwrap();
    assert_eq!(t.y.as_slice(), &[1.0, 4.0]);
    assert_eq!(t.x, DMatrix::from_row_slice(2, 2, &[2.0, 3.0, 5.0, 6.0]));
    assert_eq!(t.feature_names.unwrap(), vec!["b".to_string(), "target".to_string()]);
}

#[test]
fn parse_errors_point_at_the_cell() {
    match parse_table("1,2\n3,x\n", &TableOptions::default()) {
        Err(maximin::Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
        other => panic!("{other:?}"),
    }
    assert!(parse_table("1,2\n3\n", &TableOptions::default()).is_err());
    assert!(parse_table("", &TableOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tables_round_trip(seed in any::<u64>(), m in 1usize..12, n in 1usize..5) {
        let mut rng = rng(seed);
        let x = gaussian_matrix(&mut rng, m, n) * 1e3;
        let y = gaussian_vector(&mut rng, m, 1e-3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_table(&path, &x, &y).unwrap();
        let t = load_table(&path, &TableOptions::default()).unwrap();
        prop_assert_eq!(t.x, x);
        prop_assert_eq!(t.y, y);
    }

    #[test]
    fn splits_partition_the_rows(seed in any::<u64>(), m in 2usize..60, frac in 0.05f64..0.95, outliers in 0.0f64..0.5, bias in any::<bool>()) {
        let mut rng = rng(seed);
        let x = gaussian_matrix(&mut rng, m, 3);
        let y = gaussian_vector(&mut rng, m, 1.0);
        let opts = SplitOptions { train_frac: frac, outlier_frac: outliers, bias, seed, ..Default::default() };
        let s = split_and_corrupt(&x, &y, &opts).unwrap();
        let mut all: Vec<usize> = s.train_rows.iter().chain(&s.test_rows).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..m).collect::<Vec<_>>());
        prop_assert!(!s.train_rows.is_empty() && !s.test_rows.is_empty());
        prop_assert_eq!(s.corrupted.len(), (outliers * s.train_rows.len() as f64).floor() as usize);
        prop_assert_eq!(s.x_train.ncols(), 3 + bias as usize);
        for (i, &r) in s.test_rows.iter().enumerate() {
            prop_assert_eq!(s.y_test[i], y[r]);
        }
        for (i, &r) in s.train_rows.iter().enumerate() {
            prop_assert_eq!(s.y_train[i] != y[r], s.corrupted.contains(&i));
        }
        prop_assert_eq!(&s, &split_and_corrupt(&x, &y, &opts).unwrap());
    }
}

#[test]
fn normalization_uses_train_statistics_only() {
    let mut rng = rng(61);
    let x = gaussian_matrix(&mut rng, 50, 2) * 4.0 + DMatrix::from_element(50, 2, 7.0);
    let y = gaussian_vector(&mut rng, 50, 3.0);
    let s = split_and_corrupt(
        &x,
        &y,
        &SplitOptions {
            normalize: true,
            ..Default::default()
        },
    )
    .unwrap();
    for j in 0..2 {
        let (mean, var) = moments(&s.x_train.column(j).clone_owned());
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        let (test_mean, _) = moments(&s.x_test.column(j).clone_owned());
        assert!(test_mean.abs() > 1e-6);
    }
    let (mean, var) = moments(&s.y_train);
    assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
}

#[test]
fn derived_seeds_are_distinct() {
    let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|s| derive_seed(42, s)).collect();
    assert_eq!(seeds.len(), 1000);
    assert_eq!(derive_seed(1, 2), derive_seed(1, 2));
}
