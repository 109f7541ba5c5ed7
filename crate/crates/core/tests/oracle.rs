use std::io::Cursor;

use rank1_phase::amp::{generate_instance, Instance};
use rank1_phase::oracle::{exact_posterior, finite_size_mmse_curve, mc_mmse, nishimori_check};
use rank1_phase::potential::matrix_mmse;
use rank1_phase::{Model, Prior};

fn instance_from_text(text: &str) -> Instance {
    Instance::read_text(Cursor::new(text)).unwrap()
}

#[test]
fn dirac_posterior_ignores_the_data() {
    let prior = Prior::dirac(0.7);
    let inst = generate_instance(&prior, 6, 0.3, 2).unwrap();
    let post = exact_posterior(&inst, &prior).unwrap();
    assert!(post.means.iter().all(|&m| (m - 0.7).abs() < 1e-15));
    assert!(post.pair_means.iter().all(|&m| (m - 0.49).abs() < 1e-15));
    assert!(post.matrix_error < 1e-28 && post.vector_error < 1e-28);
}

#[test]
fn rademacher_without_data_is_uncorrelated() {
    let text = "4 0.5 0\n1 -1 1 1\n0 0 0 0\n0 0 0\n0 0\n0\n";
    let post = exact_posterior(&instance_from_text(text), &Prior::rademacher()).unwrap();
    for i in 0..4 {
        assert!(post.means[i].abs() < 1e-15);
        for j in 0..4 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((post.pair_mean(i, j) - want).abs() < 1e-15);
        }
    }
    assert!(post.normalisation_error.abs() <= 1e-10);
}

#[test]
fn two_variables_match_the_four_term_sum() {
    let (w11, w12, w22, delta) = (0.3, -0.2, 1.1, 0.5);
    let text = format!("2 {delta} 0\n1 0\n{w11} {w12}\n{w22}\n");
    let prior = Prior::bernoulli(0.5).unwrap();
    let post = exact_posterior(&instance_from_text(&text), &prior).unwrap();

    let r = 2f64.sqrt();
    let like = |x1: f64, x2: f64| {
        0.25 * (-((w11 - x1 * x1 / r).powi(2) + (w12 - x1 * x2 / r).powi(2) + (w22 - x2 * x2 / r).powi(2))
            / (2.0 * delta))
            .exp()
    };
    let (z00, z01, z10, z11) = (like(0.0, 0.0), like(0.0, 1.0), like(1.0, 0.0), like(1.0, 1.0));
    let z = z00 + z01 + z10 + z11;
    let m1 = (z10 + z11) / z;
    let m2 = (z01 + z11) / z;
    let m12 = z11 / z;
    assert!((post.means[0] - m1).abs() <= 1e-12);
    assert!((post.means[1] - m2).abs() <= 1e-12);
    assert!((post.pair_mean(0, 1) - m12).abs() <= 1e-12);
    assert!((post.pair_mean(1, 0) - m12).abs() <= 1e-12);
    assert!((post.pair_mean(0, 0) - m1).abs() <= 1e-12);
    assert!((post.log_partition - z.ln()).abs() <= 1e-12);
    let me = ((1.0 - post.pair_mean(0, 0)).powi(2)
        + 2.0 * post.pair_mean(0, 1).powi(2)
        + post.pair_mean(1, 1).powi(2))
        / 4.0;
    assert!((post.matrix_error - me).abs() <= 1e-12);
}

#[test]
fn posterior_means_stay_in_the_convex_hull() {
    let prior = Prior::new(vec![-1.0, 0.5, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
    let inst = generate_instance(&prior, 7, 0.4, 12).unwrap();
    let post = exact_posterior(&inst, &prior).unwrap();
    assert!(post.means.iter().all(|&m| (-1.0..=2.0).contains(&m)));
    for i in 0..7 {
        for j in 0..7 {
            assert_eq!(post.pair_mean(i, j), post.pair_mean(j, i));
        }
    }
    assert!(post.normalisation_error.abs() <= 1e-10);
}

#[test]
fn monte_carlo_mmse_limits() {
    let d = mc_mmse(&Prior::dirac(2.0), 3.0, 5000, 1).unwrap();
    assert_eq!((d.estimate, d.stderr), (0.0, 0.0));
    let prior = Prior::bernoulli(0.3).unwrap();
    let z = mc_mmse(&prior, 0.0, 100_000, 2).unwrap();
    assert!((z.estimate - prior.variance()).abs() <= 3.0 * z.stderr, "{z:?}");
    assert!(mc_mmse(&prior, 1.0, 999, 0).is_err());
}

#[test]
fn monte_carlo_agrees_with_quadrature() {
    let prior = Prior::community(0.1).unwrap();
    let model = Model::new(prior.clone());
    let mut z = Vec::new();
    for (k, snr) in [0.1, 0.5, 1.0, 2.0, 5.0, 8.0].into_iter().enumerate() {
        let mc = mc_mmse(&prior, snr, 200_000, k as u64).unwrap();
        z.push((mc.estimate - model.mmse(snr).unwrap()) / mc.stderr);
    }
    assert!(z.iter().all(|x| x.abs() <= 3.0), "{z:?}");
}

#[test]
fn nishimori_identity() {
    let a = 1.5f64;
    let d = nishimori_check(&Prior::dirac(a), 5, 0.7, 20, 3).unwrap();
    assert!((d.lhs - a.powi(4)).abs() < 1e-12 && (d.rhs - a.powi(4)).abs() < 1e-12);
    let c = nishimori_check(&Prior::community(0.3).unwrap(), 7, 0.8, 400, 4).unwrap();
    assert!(c.within(3.0), "{c:?}");
    // with no usable data both sides reduce to the prior's own pair moments
    let prior = Prior::bernoulli(0.5).unwrap();
    let far = nishimori_check(&prior, 4, 1e8, 200, 5).unwrap();
    let v = prior.second_moment();
    let m2 = prior.mean().powi(2);
    let prior_value = (4.0 * v * v + 12.0 * m2 * m2) / 16.0;
    assert!((far.rhs - prior_value).abs() < 1e-6, "{far:?}");
    assert!(far.within(3.0), "{far:?}");
}

#[test]
fn finite_size_errors_approach_the_replica_formula() {
    let prior = Prior::bernoulli(0.5).unwrap();
    let model = Model::new(prior.clone());
    let v = model.v();
    let deltas = [0.05, 0.1, 0.2];
    let curves: Vec<_> =
        [6, 9, 12].into_iter().map(|n| finite_size_mmse_curve(&prior, n, &deltas, 1000, 7).unwrap()).collect();
    for (k, &delta) in deltas.iter().enumerate() {
        let replica = matrix_mmse(&model, delta).unwrap().value;
        let gaps: Vec<f64> = curves.iter().map(|c| (c[k].matrix_mmse.estimate - replica).abs()).collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "delta = {delta}: gaps {gaps:?}");
        for c in &curves {
            let p = &c[k];
            let bound = v * v - (v - p.vector_mmse.estimate).powi(2);
            assert!(p.matrix_mmse.estimate <= bound + 3.0 * p.matrix_mmse.stderr, "{p:?}");
        }
    }
    let tiny = finite_size_mmse_curve(&prior, 8, &[1e-4], 50, 9).unwrap();
    assert!(tiny[0].matrix_mmse.estimate < 1e-6 && tiny[0].vector_mmse.estimate < 1e-6);
}
