mod common;

use ldplab_core::densities::sigma_p_squared;
use ldplab_core::linalg::{ColumnList, DenseMatrix};
use ldplab_core::projections::{
    characteristic_function, compare_ball_vs_product, levy_prokhorov, project_lp_ball,
    project_product, sample_projected_law, EmpiricalMeasure, ProductLaw, ProjectedLaw,
};
use ldplab_core::samplers::{gaussian_vector, haar_stiefel, PGaussianParams};
use ldplab_core::stats::mean_variance;
use ldplab_core::SeededRng;
use rand::Rng;

use common::random_contraction;

/// Checks every entry of the sample covariance against `want` within three
/// standard errors of the entrywise product.
fn assert_covariance(cloud: &EmpiricalMeasure, want: &DenseMatrix) {
    let k = cloud.dim();
    let cov = cloud.covariance();
    for i in 0..k {
        for j in 0..k {
            let prods: Vec<f64> = cloud.points().iter().map(|x| x[i] * x[j]).collect();
            let (_, v) = mean_variance(&prods);
            let se = (v / prods.len() as f64).sqrt();
            assert!(
                (cov.get(i, j) - want.get(i, j)).abs() < 3.0 * se,
                "entry ({i},{j}): {} vs {}",
                cov.get(i, j),
                want.get(i, j)
            );
        }
    }
}

#[test]
fn projected_law_covariance() {
    let mut rng = SeededRng::new(51, 0);
    let cols = random_contraction(&mut rng, 2, 3, 0.8)
        .to_column_list()
        .unwrap();
    let law = ProductLaw::PGaussian(PGaussianParams::new(1.0).unwrap());
    let sigma2 = 0.7;
    let projected = ProjectedLaw::new(cols.clone(), sigma2, law).unwrap();
    let cloud = sample_projected_law(&mut rng, &projected, 200_000).unwrap();
    let aa = cols.gram().unwrap().to_dense();
    let vy = law.variance().unwrap();
    let want = DenseMatrix::new(
        2,
        2,
        (0..4)
            .map(|e| {
                let (i, j) = (e / 2, e % 2);
                let id = if i == j { 1.0 } else { 0.0 };
                vy * aa.get(i, j) + sigma2 * (id - aa.get(i, j))
            })
            .collect(),
    )
    .unwrap();
    assert_covariance(&cloud, &want);
}

#[test]
fn product_projection_covariance() {
    let mut rng = SeededRng::new(52, 0);
    let v = haar_stiefel(&mut rng, 3, 12).unwrap();
    for params in [
        PGaussianParams::new(1.5).unwrap(),
        PGaussianParams::uniform(),
    ] {
        let cloud = project_product(&mut rng, &v, params, 100_000).unwrap();
        let variance = if params.is_uniform() {
            1.0 / 3.0
        } else {
            sigma_p_squared(params.p()).unwrap()
        };
        assert_covariance(&cloud, &DenseMatrix::identity(3).scaled(variance));
    }
}

#[test]
fn lp_ball_projection_variance_near_limit() {
    let mut rng = SeededRng::new(53, 0);
    let v = haar_stiefel(&mut rng, 1, 500).unwrap();
    let cloud = project_lp_ball(&mut rng, &v, 1.0, 20_000).unwrap();
    let (_, var) = mean_variance(&cloud.coordinate(0));
    assert!(
        (var / sigma_p_squared(1.0).unwrap() - 1.0).abs() < 0.05,
        "{var}"
    );
}

#[test]
fn lp_ball_projection_fills_disc() {
    let mut rng = SeededRng::new(54, 0);
    let cloud = project_lp_ball(&mut rng, &DenseMatrix::identity(2), 2.0, 20_000).unwrap();
    let radius = cloud
        .points()
        .iter()
        .map(|x| x[0].hypot(x[1]))
        .fold(0.0, f64::max);
    assert!(radius <= 2f64.sqrt() && radius > 0.99 * 2f64.sqrt());
}

#[test]
fn gaussian_clouds_are_close() {
    let mut rng = SeededRng::new(55, 0);
    let cloud = |rng: &mut SeededRng| {
        EmpiricalMeasure::new(1, (0..10_000).map(|_| gaussian_vector(rng, 1)).collect()).unwrap()
    };
    let (a, b) = (cloud(&mut rng), cloud(&mut rng));
    let d = levy_prokhorov(&a, &b, 64).unwrap();
    assert!(d <= 0.05, "{d}");
    let (a2, b2) = (
        EmpiricalMeasure::new(
            2,
            (0..5_000).map(|_| gaussian_vector(&mut rng, 2)).collect(),
        )
        .unwrap(),
        EmpiricalMeasure::new(
            2,
            (0..5_000).map(|_| gaussian_vector(&mut rng, 2)).collect(),
        )
        .unwrap(),
    );
    assert!(levy_prokhorov(&a2, &b2, 64).unwrap() <= 0.05);
    assert_eq!(levy_prokhorov(&a, &a, 64).unwrap(), 0.0);
}

#[test]
fn empirical_cf_matches_analytic() {
    let mut rng = SeededRng::new(56, 0);
    let count = 40_000;
    let bound = 3.0 / (count as f64).sqrt();
    for &(k, m) in &[(1usize, 2usize), (2, 3), (3, 4)] {
        for law in [
            ProductLaw::PGaussian(PGaussianParams::uniform()),
            ProductLaw::PGaussian(PGaussianParams::new(1.0).unwrap()),
            ProductLaw::Rademacher,
        ] {
            let projected = ProjectedLaw::new(
                random_contraction(&mut rng, k, m, 0.9)
                    .to_column_list()
                    .unwrap(),
                1.0,
                law,
            )
            .unwrap();
            let cloud = sample_projected_law(&mut rng, &projected, count).unwrap();
            for _ in 0..20 {
                let t: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
                let want = characteristic_function(&projected, &t).unwrap();
                let got = cloud.empirical_cf(&t).unwrap();
                assert!((want - got).norm() < bound, "k={k} {law:?} t={t:?}");
            }
        }
    }
}

#[test]
fn cf_invariant_under_signed_permutation() {
    let mut rng = SeededRng::new(57, 0);
    let cols = random_contraction(&mut rng, 2, 3, 0.95)
        .to_column_list()
        .unwrap();
    let mut moved: Vec<Vec<f64>> = cols.columns().iter().rev().cloned().collect();
    moved[0].iter_mut().for_each(|x| *x = -*x);
    let moved = ColumnList::new(2, moved).unwrap();
    let law = ProductLaw::PGaussian(PGaussianParams::new(1.0).unwrap());
    let a = ProjectedLaw::new(cols, 2.0, law).unwrap();
    let b = ProjectedLaw::new(moved, 2.0, law).unwrap();
    let count = 40_000;
    let ca = sample_projected_law(&mut rng, &a, count).unwrap();
    let cb = sample_projected_law(&mut rng, &b, count).unwrap();
    for _ in 0..20 {
        let t = vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
        let (fa, fb) = (
            characteristic_function(&a, &t).unwrap(),
            characteristic_function(&b, &t).unwrap(),
        );
        assert!((fa - fb).norm() < 1e-12);
        let d = (ca.empirical_cf(&t).unwrap() - cb.empirical_cf(&t).unwrap()).norm();
        assert!(d < 3.0 / (count as f64).sqrt(), "{d}");
    }
}

#[test]
fn compare_is_deterministic() {
    let run =
        || compare_ball_vs_product(&mut SeededRng::new(58, 0), 1, 1.0, &[10, 40], 2_000).unwrap();
    let first = run();
    assert_eq!(first.len(), 2);
    assert_eq!(first.iter().map(|p| p.0).collect::<Vec<_>>(), vec![10, 40]);
    assert_eq!(first, run());
}
