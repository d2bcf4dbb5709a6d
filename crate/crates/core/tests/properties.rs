//! Invariants checked over randomly generated inputs.

use bigsample::integration::{dr_estimator, ols_fit, rivers_estimator, rivers_impute, RiversOptions};
use bigsample::inverse_sampling::{max_feasible_n, second_phase_design, SamplingMethod};
use bigsample::population::{error_decomposition, population_mean, indicator_below};
use bigsample::propensity::{fit_pseudo_mle, ps_estimator, PropensityOptions};
use bigsample::tilting::{solve_calibration, tilted_estimator, TiltingOptions};
use bigsample::{BigDataSample, Covariates, FinitePopulation, ProbabilitySample};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn rows_strategy(min: usize, max: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec(prop::array::uniform2(-3.0f64..3.0), min..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_identity(y in prop::collection::vec(-100.0f64..100.0, 2..60), picks in prop::collection::vec(any::<bool>(), 60)) {
        let n = y.len();
        let pop = FinitePopulation::with_sequential_ids(Covariates::from_row_major(vec![0.0; n], n, 1).unwrap(), y).unwrap();
        let mut rows: Vec<usize> = (0..n).filter(|&i| picks[i]).collect();
        if rows.is_empty() { rows.push(0); }
        let dec = error_decomposition(&pop, &pop.subsample(&rows).unwrap()).unwrap();
        prop_assert!(close(dec.error, dec.error_from_covariance(), 1e-10));
        if let Some(sq) = dec.squared_error_from_ddi() {
            prop_assert!((dec.error * dec.error - sq).abs() <= 1e-10 * sq.max(dec.sigma2));
        }
        let share = population_mean(&pop, Some(&indicator_below(0.0)));
        prop_assert!((0.0..=1.0).contains(&share));
    }

    #[test]
    fn tilting_is_shift_equivariant(rows in rows_strategy(8, 60), shift in prop::array::uniform2(-10.0f64..10.0), t in prop::array::uniform2(-0.3f64..0.3)) {
        let x = Covariates::from_rows(&rows).unwrap();
        let m = x.column_means();
        let target = [m[0] + t[0], m[1] + t[1]];
        let Ok(base) = solve_calibration(&x, &target, &TiltingOptions::default()) else { return Ok(()) };
        let moved_rows: Vec<[f64; 2]> = rows.iter().map(|r| [r[0] + shift[0], r[1] + shift[1]]).collect();
        let moved = solve_calibration(
            &Covariates::from_rows(&moved_rows).unwrap(),
            &[target[0] + shift[0], target[1] + shift[1]],
            &TiltingOptions::default(),
        ).unwrap();
        for (a, b) in base.weights().iter().zip(moved.weights()) {
            prop_assert!((a - b).abs() <= 1e-8 * a.max(1e-3));
        }
        prop_assert!(base.potential_trace().windows(2).all(|w| w[1] <= w[0] + 8.0 * f64::EPSILON * w[0].abs().max(1.0)));
        let total: f64 = base.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tilted_mean_reproduces_linear_outcomes(rows in rows_strategy(8, 60), coef in prop::array::uniform3(-2.0f64..2.0), t in prop::array::uniform2(-0.2f64..0.2)) {
        let x = Covariates::from_rows(&rows).unwrap();
        let m = x.column_means();
        let target = [m[0] + t[0], m[1] + t[1]];
        let Ok(sol) = solve_calibration(&x, &target, &TiltingOptions::default()) else { return Ok(()) };
        let y: Vec<f64> = rows.iter().map(|r| coef[0] + coef[1] * r[0] + coef[2] * r[1]).collect();
        let want = coef[0] + coef[1] * target[0] + coef[2] * target[1];
        prop_assert!(close(tilted_estimator(&sol, &y).unwrap(), want, 1e-9));
    }

    #[test]
    fn systematic_pps_draws_exactly_n(rows in rows_strategy(20, 120), seed in any::<u64>(), frac in 0.05f64..1.0) {
        let x = Covariates::from_rows(&rows).unwrap();
        let m = x.column_means();
        let Ok(sol) = solve_calibration(&x, &[m[0] + 0.1, m[1] - 0.1], &TiltingOptions::default()) else { return Ok(()) };
        let cap = max_feasible_n(&sol);
        let n = ((cap as f64 * frac) as usize).max(1);
        let design = second_phase_design(&sol, n, SamplingMethod::SystematicPps).unwrap();
        let pi_total: f64 = design.pi().iter().sum();
        prop_assert!((pi_total - n as f64).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = design.draw(&mut rng);
        prop_assert_eq!(s.realized_size(), n);
        prop_assert!(s.indices().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn propensity_fit_ignores_weight_scale(
        rows in prop::collection::vec((-2.0f64..2.0, any::<bool>(), 1.0f64..20.0), 12..80),
        scale in 0.01f64..100.0,
    ) {
        let build = |s: f64| ProbabilitySample::new(
            (1..=rows.len() as u64).collect(),
            Covariates::from_rows(&rows.iter().map(|r| [r.0]).collect::<Vec<_>>()).unwrap(),
            rows.iter().map(|r| r.2 * s).collect(),
            rows.iter().map(|r| r.1).collect(),
            None,
        ).unwrap();
        let opts = PropensityOptions::default();
        let (Ok(a), Ok(b)) = (fit_pseudo_mle(&build(1.0), &[0], &opts), fit_pseudo_mle(&build(scale), &[0], &opts)) else {
            return Ok(());
        };
        for (u, v) in a.lambda().iter().zip(b.lambda()) {
            prop_assert!((u - v).abs() < 1e-7);
        }
    }

    #[test]
    fn ps_estimate_within_observed_range(
        y in prop::collection::vec(-10.0f64..10.0, 2..50),
        slope in -2.0f64..2.0,
    ) {
        let n = y.len();
        let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let b = BigDataSample::new((1..=n as u64).collect(), Covariates::from_columns(&[&x]).unwrap(), y.clone(), 10 * n).unwrap();
        let fit = bigsample::propensity::PropensityFit::from_coefficients(vec![-0.5, slope], vec![0]).unwrap();
        let theta = ps_estimator(&b, &fit).unwrap().theta;
        let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, c), &v| (a.min(v), c.max(v)));
        prop_assert!(theta >= lo - 1e-12 && theta <= hi + 1e-12);
    }

    #[test]
    fn dr_decomposes_and_collapses_on_exact_fit(
        b_rows in rows_strategy(6, 40),
        a_rows in rows_strategy(3, 20),
        coef in prop::array::uniform3(-2.0f64..2.0),
        noise in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let nb = b_rows.len();
        let na = a_rows.len();
        let n_pop = 10 * (nb + na);
        let lin = |r: &[f64; 2]| coef[0] + coef[1] * r[0] + coef[2] * r[1];
        let a = ProbabilitySample::new(
            (1000..1000 + na as u64).collect(),
            Covariates::from_rows(&a_rows).unwrap(),
            vec![n_pop as f64 / na as f64; na],
            (0..na).map(|i| i % 2 == 0).collect(),
            None,
        ).unwrap();
        let ps = bigsample::propensity::PropensityFit::from_coefficients(vec![0.2, 0.3], vec![1]).unwrap();
        for with_noise in [false, true] {
            let y: Vec<f64> = b_rows.iter().enumerate().map(|(i, r)| lin(r) + if with_noise { noise[i] } else { 0.0 }).collect();
            let b = BigDataSample::new((1..=nb as u64).collect(), Covariates::from_rows(&b_rows).unwrap(), y, n_pop).unwrap();
            let Ok(reg) = ols_fit(&b) else { return Ok(()) };
            let dr = dr_estimator(&a, &b, &ps, &reg, n_pop).unwrap();
            prop_assert!(close(dr.theta, dr.theta_reg + dr.correction_term, 1e-12));
            if !with_noise {
                prop_assert!(dr.correction_term.abs() < 1e-8);
                let direct: f64 = a_rows.iter().map(lin).sum::<f64>() / na as f64;
                prop_assert!(close(dr.theta, direct, 1e-8));
            }
        }
    }

    #[test]
    fn rivers_tree_matches_scan_and_self_matches(b_rows in rows_strategy(2, 300), picks in prop::collection::vec(0usize..300, 1..30)) {
        let nb = b_rows.len();
        let y: Vec<f64> = (0..nb).map(|i| i as f64).collect();
        let b = BigDataSample::new((1..=nb as u64).collect(), Covariates::from_rows(&b_rows).unwrap(), y, 10 * nb).unwrap();
        let a_rows: Vec<[f64; 2]> = picks.iter().map(|&p| b_rows[p % nb]).collect();
        let a = ProbabilitySample::new(
            (1..=a_rows.len() as u64).collect(),
            Covariates::from_rows(&a_rows).unwrap(),
            vec![2.0; a_rows.len()],
            vec![false; a_rows.len()],
            None,
        ).unwrap();
        let tree = rivers_impute(&a, &b, &RiversOptions::default()).unwrap();
        let scan = rivers_impute(&a, &b, &RiversOptions { brute_force: true, ..Default::default() }).unwrap();
        prop_assert_eq!(&tree, &scan);
        for (k, &p) in picks.iter().enumerate() {
            // a duplicated location resolves to its first (smallest id) copy
            let first = b_rows.iter().position(|r| *r == b_rows[p % nb]).unwrap();
            prop_assert_eq!(tree[k], first as f64);
        }
        let est = rivers_estimator(&a, &tree, 10 * nb).unwrap();
        prop_assert!(est.var_hat >= 0.0);
    }
}

#[test]
fn simulation_replications_are_reproducible() {
    use bigsample::sim::study1::run_study1_replication;
    use bigsample::sim::study2::run_study2_replication;
    use bigsample::sim::{Study1Config, Study2Config};
    let c1 = Study1Config { population_size: 3000, n: 50, seed: 77, ..Default::default() };
    assert_eq!(run_study1_replication(&c1, 5).unwrap(), run_study1_replication(&c1, 5).unwrap());
    assert_ne!(run_study1_replication(&c1, 5).unwrap(), run_study1_replication(&c1, 6).unwrap());
    let c2 = Study2Config { population_size: 3000, n: 50, seed: 77, ..Default::default() };
    assert_eq!(run_study2_replication(&c2, 2).unwrap(), run_study2_replication(&c2, 2).unwrap());
}
