//! Acceptance suite. One line per criterion; exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ldplab_core::configurations::{identify_equivalent, power_sums, recover_from_power_sums, Atom};
use ldplab_core::densities::{
    log_corner_density, log_inverted_t_density, log_p_gaussian_density, log_pth_power_density,
    log_wishart_density, sigma_p_squared,
};
use ldplab_core::linalg::{gram, log_det_complement, ColumnList, DenseMatrix, SymmetricPSD};
use ldplab_core::projections::{
    characteristic_function, compare_ball_vs_product, sample_projected_law, ProductLaw,
    ProjectedLaw,
};
use ldplab_core::quadrature::{integrate, integrate_to_infinity};
use ldplab_core::rates::rate_finite;
use ldplab_core::samplers::{haar_stiefel, p_gaussian, PGaussianParams};
use ldplab_core::stats::{ks_one_sample, mean_variance};
use ldplab_core::verify::{
    run_clt_check, run_dickey_check, run_dickey_check_with_dof, run_ldp_configuration,
    run_ldp_corner,
};
use ldplab_core::{LdpExperiment, Method, PointConfiguration, SeededRng};
use rand::Rng;

use common::{
    brute_force_equivalent, corner_cdf, identify_instance, ks_critical_1pct,
    random_contraction_below, separated_sequence,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn fail(detail: String) -> Outcome {
    Outcome {
        pass: false,
        detail,
    }
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// `-½ log(1 - x²)` at the point of `[0.25, 0.35]` closest to zero.
fn corner_rate_reference() -> f64 {
    -0.5 * (1.0 - 0.25f64 * 0.25).ln()
}

fn corner_experiment(n_values: Vec<usize>, method: Method, samples: usize) -> LdpExperiment {
    LdpExperiment {
        k: 1,
        ell: 1,
        target: vec![vec![0.3]],
        radius: 0.05,
        n_values,
        samples_per_n: samples,
        method,
    }
}

fn stiefel_orthonormality() -> Outcome {
    let mut rng = SeededRng::new(1001, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=64usize);
        let k = rng.random_range(1..=n.min(8));
        let v = haar_stiefel(&mut rng, k, n).unwrap();
        let err = gram(&v)
            .to_dense()
            .sub(&DenseMatrix::identity(k))
            .unwrap()
            .frobenius_norm();
        worst = worst.max(err);
    }
    check(worst <= 1e-10, format!("worst ‖VV* - Id‖_F = {worst:.2e}"))
}

fn corner_exactness() -> Outcome {
    let mut rng = SeededRng::new(1002, 0);
    let count = 100_000;
    let critical = ks_critical_1pct(count);
    let mut stats = Vec::new();
    for n in [5usize, 10, 50] {
        let xs: Vec<f64> = (0..count)
            .map(|_| haar_stiefel(&mut rng, 1, n).unwrap().get(0, 0))
            .collect();
        stats.push((
            n,
            ks_one_sample(&xs, |x| corner_cdf(x, n)).unwrap().statistic,
        ));
    }
    let ok = stats.iter().all(|s| s.1 < critical);
    let list: Vec<String> = stats
        .iter()
        .map(|(n, d)| format!("n={n}: D={d:.5}"))
        .collect();
    check(ok, format!("{} (critical {critical:.5})", list.join(", ")))
}

/// Integral over `(-1, 1)` after `x = sin u`, which absorbs inverse
/// square-root singularities at the endpoints.
fn interval(f: impl Fn(f64) -> f64) -> f64 {
    let half = std::f64::consts::FRAC_PI_2;
    integrate(|u: f64| f(u.sin()) * u.cos(), -half, half, 1e-12, 1e-12)
        .unwrap()
        .value
}

/// Integral over the unit disc in polar coordinates with `r = sin u`.
fn disc(f: impl Fn(f64, f64) -> f64) -> f64 {
    let tau = std::f64::consts::TAU;
    integrate(
        |u: f64| {
            let r = u.sin();
            let ring = integrate(|t| f(r * t.cos(), r * t.sin()), 0.0, tau, 1e-12, 1e-12)
                .unwrap()
                .value;
            ring * r * u.cos()
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        1e-11,
        1e-11,
    )
    .unwrap()
    .value
}

fn density_normalization() -> Outcome {
    let row = |v: &[f64]| DenseMatrix::from_rows(&[v.to_vec()]).unwrap();
    let mut totals: Vec<(String, f64)> = Vec::new();
    for dof in [1usize, 3, 8] {
        let t = interval(|x| log_inverted_t_density(&row(&[x]), dof).unwrap().density());
        totals.push((format!("inverted t 1x1 N={dof}"), t));
    }
    for dof in [1usize, 4] {
        let t = disc(|x, y| {
            log_inverted_t_density(&row(&[x, y]), dof)
                .unwrap()
                .density()
        });
        totals.push((format!("inverted t 1x2 N={dof}"), t));
    }
    for n in [4usize, 10, 50] {
        let t = interval(|x| log_corner_density(&row(&[x]), 1, 1, n).unwrap().density());
        totals.push((format!("corner l=1 n={n}"), t));
        let t = disc(|x, y| {
            log_corner_density(&row(&[x, y]), 1, 2, n)
                .unwrap()
                .density()
        });
        totals.push((format!("corner l=2 n={n}"), t));
    }
    for n in [1usize, 3, 6] {
        let f = |x: f64| {
            let s = SymmetricPSD::from_matrix(&DenseMatrix::diagonal(&[x])).unwrap();
            log_wishart_density(&s, 1, n).unwrap().density()
        };
        // The n = 1 density has an integrable singularity at the origin.
        let t = integrate_to_infinity(f, 0.0, 1e-12, 1e-12).unwrap().value;
        totals.push((format!("wishart k=1 n={n}"), t));
    }
    for p in [1.0, 1.5, 2.0, 3.0] {
        let t = 2.0
            * integrate_to_infinity(
                |x| log_p_gaussian_density(x, p).unwrap().exp(),
                0.0,
                1e-13,
                1e-13,
            )
            .unwrap()
            .value;
        totals.push((format!("p-gaussian p={p}"), t));
        let t = integrate_to_infinity(
            |x| log_pth_power_density(x, p).unwrap().exp(),
            0.0,
            1e-13,
            1e-13,
        )
        .unwrap()
        .value;
        totals.push((format!("pth power p={p}"), t));
    }
    let (name, worst) = totals
        .iter()
        .map(|(n, t)| (n.clone(), (t - 1.0).abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    check(
        worst <= 1e-6,
        format!(
            "{} densities, worst |∫-1| = {worst:.2e} ({name})",
            totals.len()
        ),
    )
}

fn quadrature_slope() -> Outcome {
    let n_values: Vec<usize> = (0..7).map(|i| 500 + 250 * i).collect();
    let report = run_ldp_corner(
        &mut SeededRng::new(1, 0),
        &corner_experiment(n_values, Method::Quadrature, 0),
    )
    .unwrap();
    let reference = corner_rate_reference();
    let gap = (report.fitted_slope - reference).abs() / reference;
    check(
        gap < 0.02,
        format!(
            "slope {:.6} vs {reference:.6}, relative gap {:.4}",
            report.fitted_slope, gap
        ),
    )
}

fn monte_carlo_slope() -> Outcome {
    let n_values: Vec<usize> = (0..7).map(|i| 40 + 20 * i).collect();
    let exact = run_ldp_corner(
        &mut SeededRng::new(1, 0),
        &corner_experiment(n_values.clone(), Method::Quadrature, 0),
    )
    .unwrap();
    let mc = match run_ldp_corner(
        &mut SeededRng::new(1005, 0),
        &corner_experiment(n_values, Method::MonteCarlo, 1_000_000),
    ) {
        Ok(r) => r,
        Err(e) => return fail(format!("{e}")),
    };
    let gap = (mc.fitted_slope - exact.fitted_slope).abs() / exact.fitted_slope;
    check(
        gap < 0.15,
        format!(
            "MC slope {:.6} vs quadrature {:.6}, relative gap {gap:.4}",
            mc.fitted_slope, exact.fitted_slope
        ),
    )
}

fn configuration_slope() -> Outcome {
    let target = PointConfiguration::new(1, vec![Atom::new(vec![0.4], 1)]).unwrap();
    let reference = -0.5 * (1.0 - 0.16f64).ln();
    let n_values: Vec<usize> = (0..7).map(|i| 30 + 15 * i).collect();
    match run_ldp_configuration(
        &mut SeededRng::new(1006, 0),
        1,
        &target,
        0.1,
        0.05,
        &n_values,
        1_000_000,
    ) {
        Ok(report) => {
            let gap = (report.fitted_slope - reference).abs() / reference;
            check(
                gap < 0.25,
                format!(
                    "slope {:.5} vs {reference:.5}, relative gap {gap:.4}",
                    report.fitted_slope
                ),
            )
        }
        Err(e) => fail(format!("{e}")),
    }
}

fn property_suites() -> Outcome {
    let mut rng = SeededRng::new(1007, 0);
    let slack = 1e-12;
    let mut violations = [0usize; 3];
    for _ in 0..10_000 {
        let k = rng.random_range(1..=4usize);
        let m = rng.random_range(1..=8usize);
        let a = random_contraction_below(&mut rng, k, m, 0.999);
        // More columns never increase log det(Id - A_l A_l*).
        let mut prev = 0.0;
        for l in 1..=m {
            let ld = log_det_complement(&gram(&a.leading_cols(l).unwrap()));
            if ld > prev + slack {
                violations[0] += 1;
                break;
            }
            prev = ld;
        }
        // Nor do more rows of a square contraction.
        let n = rng.random_range(1..=6usize);
        let sq = random_contraction_below(&mut rng, n, n, 0.999);
        let mut prev = f64::INFINITY;
        for r in 1..=n {
            let ld = log_det_complement(&gram(&sq.leading_rows(r).unwrap()));
            if ld > prev + slack {
                violations[1] += 1;
                break;
            }
            prev = ld;
        }
        // Midpoint convexity of the rate.
        let b = random_contraction_below(&mut rng, k, m, 0.999);
        let mid = DenseMatrix::new(
            k,
            m,
            a.as_slice()
                .iter()
                .zip(b.as_slice())
                .map(|(x, y)| 0.5 * (x + y))
                .collect(),
        )
        .unwrap();
        let lhs = rate_finite(&mid).value();
        let rhs = 0.5 * (rate_finite(&a).value() + rate_finite(&b).value());
        if lhs > rhs + slack {
            violations[2] += 1;
        }
    }
    check(
        violations.iter().all(|&v| v == 0),
        format!(
            "violations: columns {}, rows {}, convexity {} (10^4 instances each)",
            violations[0], violations[1], violations[2]
        ),
    )
}

fn dickey_relation() -> Outcome {
    let mut rng = SeededRng::new(1008, 0);
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, m, n) in [(1usize, 1usize, 10usize), (2, 2, 20)] {
        let r = run_dickey_check(&mut rng, k, m, n, 100_000).unwrap();
        ok &= r.min_p_value() > 0.01;
        parts.push(format!("({k},{m},{n}) min p {:.3}", r.min_p_value()));
    }
    let control =
        run_dickey_check_with_dof(&mut rng, 1, 1, 10, 10 - 1 - 1 + 1 + 5, 100_000).unwrap();
    ok &= control.min_p_value() < 0.01;
    parts.push(format!("control min p {:.1e}", control.min_p_value()));
    check(ok, parts.join(", "))
}

fn variance_and_clt() -> Outcome {
    let mut rng = SeededRng::new(1009, 0);
    let count = 1_000_000;
    let mut ok = true;
    let mut parts = Vec::new();
    for params in [
        PGaussianParams::new(1.0).unwrap(),
        PGaussianParams::new(1.5).unwrap(),
        PGaussianParams::new(2.0).unwrap(),
        PGaussianParams::new(4.0).unwrap(),
        PGaussianParams::uniform(),
    ] {
        let squares: Vec<f64> = p_gaussian(&mut rng, params, count)
            .iter()
            .map(|x| x * x)
            .collect();
        let (m, v) = mean_variance(&squares);
        let target = sigma_p_squared(params.p()).unwrap();
        let z = (m - target).abs() / (v / count as f64).sqrt();
        ok &= z < 3.0;
        parts.push(format!("p={} z={z:.2}", params.p()));
    }
    for p in [1.0, 4.0, f64::INFINITY] {
        let r = run_clt_check(&mut rng, 1, p, 500, 10_000).unwrap();
        ok &= r.min_p_value() > 0.01;
        parts.push(format!("clt p={p} KS p {:.3}", r.min_p_value()));
    }
    ok &= (sigma_p_squared(f64::INFINITY).unwrap() - 1.0 / 3.0).abs() < 1e-15;
    check(ok, parts.join(", "))
}

fn cf_agreement() -> Outcome {
    let mut rng = SeededRng::new(1010, 0);
    let count = 40_000;
    let bound = 3.0 / (count as f64).sqrt();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let k = rng.random_range(1..=3usize);
        let m = rng.random_range(1..=5usize);
        let law = if i % 2 == 0 {
            ProductLaw::PGaussian(PGaussianParams::uniform())
        } else {
            ProductLaw::PGaussian(PGaussianParams::new(1.0).unwrap())
        };
        let columns: ColumnList = random_contraction_below(&mut rng, k, m, 1.0)
            .to_column_list()
            .unwrap();
        let sigma2 = rng.random_range(0.2..2.0);
        let projected = ProjectedLaw::new(columns, sigma2, law).unwrap();
        let cloud = sample_projected_law(&mut rng, &projected, count).unwrap();
        for _ in 0..20 {
            let t: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let d = (characteristic_function(&projected, &t).unwrap()
                - cloud.empirical_cf(&t).unwrap())
            .norm();
            worst = worst.max(d);
        }
    }
    check(
        worst < bound,
        format!("worst |φ - φ̂| = {worst:.5} (bound {bound:.5})"),
    )
}

fn ball_vs_product_trend() -> Outcome {
    let count = 20_000;
    let level = (2.0 / count as f64).sqrt();
    let estimates =
        compare_ball_vs_product(&mut SeededRng::new(1011, 0), 1, 1.0, &[20, 80, 320], count)
            .unwrap();
    let mut inversions = 0;
    let mut large = false;
    for w in estimates.windows(2) {
        if w[1].1 > w[0].1 {
            inversions += 1;
            large |= w[1].1 - w[0].1 > level;
        }
    }
    let list: Vec<String> = estimates
        .iter()
        .map(|(n, d)| format!("n={n}: {d:.4}"))
        .collect();
    check(
        inversions <= 1 && !large,
        format!(
            "{} ({inversions} inversion(s), stderr level {level:.4})",
            list.join(", ")
        ),
    )
}

fn power_sum_identification() -> Outcome {
    let mut rng = SeededRng::new(1012, 0);
    let bound = 6;
    let mut recovery_failures = 0;
    for _ in 0..200 {
        let alpha = separated_sequence(&mut rng);
        let sums = power_sums(&alpha, 3, 3 * bound + 20).unwrap();
        let ok = match recover_from_power_sums(&sums, bound, 1e-3) {
            Ok(r) => {
                r.atoms.len() == alpha.len()
                    && r.atoms
                        .iter()
                        .zip(&alpha)
                        .all(|(a, b)| (a - b).abs() < 1e-3)
            }
            Err(_) => false,
        };
        recovery_failures += !ok as usize;
    }
    let mut disagreements = 0;
    for _ in 0..500 {
        let (k, p, q) = identify_instance(&mut rng);
        let want = brute_force_equivalent(&p, &q, 1e-6);
        let got = identify_equivalent(
            &ColumnList::new(k, p).unwrap(),
            &ColumnList::new(k, q).unwrap(),
            12,
            1e-6,
        )
        .unwrap();
        disagreements += (want != got) as usize;
    }
    check(
        recovery_failures == 0 && disagreements == 0,
        format!("recovery failures {recovery_failures}/200, identification disagreements {disagreements}/500"),
    )
}

fn main() -> ExitCode {
    type Criterion = (u32, &'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 12] = [
        (1, "Stiefel orthonormality", 10, stiefel_orthonormality),
        (2, "corner density exactness", 30, corner_exactness),
        (3, "density normalization", 20, density_normalization),
        (4, "LDP slope, quadrature", 10, quadrature_slope),
        (5, "LDP slope, Monte Carlo", 600, monte_carlo_slope),
        (6, "configuration LDP slope", 900, configuration_slope),
        (7, "monotonicity and convexity", 30, property_suites),
        (8, "Dickey relation", 120, dickey_relation),
        (9, "p-Gaussian variance and CLT", 120, variance_and_clt),
        (10, "characteristic functions", 60, cf_agreement),
        (11, "ball vs product trend", 120, ball_vs_product_trend),
        (12, "power-sum identification", 60, power_sum_identification),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        if elapsed > Duration::from_secs(budget) {
            outcome.pass = false;
            outcome
                .detail
                .push_str(&format!("; over the {budget} s budget"));
        }
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {verdict}  {name}: {} [{:.2} s]",
            outcome.detail,
            elapsed.as_secs_f64()
        );
        failed += !outcome.pass as usize;
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
