use rank1_phase::amp::{
    amp_run, block_vector_mse, generate_coupled_instance, generate_instance, matrix_mse, overlap, spectral_estimate,
    AmpOptions, SpectralOptions,
};
use rank1_phase::potential::stationary_points;
use rank1_phase::state_evolution::{coupled_se_run, se_run, SeOptions};
use rank1_phase::{Model, Prior};

#[test]
fn dirac_signal_is_recovered_in_one_step() {
    let prior = Prior::dirac(1.3);
    let inst = generate_instance(&prior, 200, 0.7, 4).unwrap();
    let st = amp_run(&inst, &prior, AmpOptions::default()).unwrap();
    assert_eq!(st.mse_trace[1], 0.0);
    assert!(st.converged);
}

#[test]
fn nearly_noiseless_recovery() {
    let prior = Prior::new(vec![-1.0, 0.0, 2.0], vec![0.3, 0.4, 0.3]).unwrap();
    let inst = generate_instance(&prior, 500, 1e-8, 9).unwrap();
    let st = amp_run(&inst, &prior, AmpOptions::default()).unwrap();
    let mse = *st.mse_trace.last().unwrap();
    assert!(mse <= 1e-6, "final mse {mse:e} after {} iterations", st.iterations);

    // a centred prior is recovered up to the global sign
    let prior = Prior::new(vec![-1.0, 0.0, 1.0], vec![0.3, 0.4, 0.3]).unwrap();
    let inst = generate_instance(&prior, 500, 1e-8, 9).unwrap();
    let st = amp_run(&inst, &prior, AmpOptions::default()).unwrap();
    assert!(matrix_mse(&st.estimate, &inst.signal).unwrap() <= 1e-6);
}

#[test]
fn runs_are_reproducible() {
    let prior = Prior::bernoulli(0.2).unwrap();
    let a = generate_instance(&prior, 300, 0.05, 21).unwrap();
    let b = generate_instance(&prior, 300, 0.05, 21).unwrap();
    let c = generate_instance(&prior, 300, 0.05, 22).unwrap();
    assert_eq!(a.signal, b.signal);
    assert_ne!(a.signal, c.signal);
    let opts = AmpOptions { max_iter: 30, ..AmpOptions::default() };
    let (ra, rb) = (amp_run(&a, &prior, opts).unwrap(), amp_run(&b, &prior, opts).unwrap());
    assert_eq!(ra.estimate, rb.estimate);
    assert_eq!(ra.mse_trace, rb.mse_trace);
}

#[test]
fn signal_density_matches_the_prior() {
    let (rho, n) = (0.02, 4000);
    let prior = Prior::bernoulli(rho).unwrap();
    let sd = (n as f64 * rho * (1.0 - rho)).sqrt();
    for seed in 0..5 {
        let inst = generate_instance(&prior, n, 1.0, seed).unwrap();
        let ones = inst.signal.iter().filter(|&&s| s == 1.0).count() as f64;
        assert!((ones - rho * n as f64).abs() <= 3.0 * sd, "seed {seed}: {ones} nonzeros");
    }
}

#[test]
fn amp_matches_state_evolution_on_a_dense_prior() {
    let prior = Prior::bernoulli(0.5).unwrap();
    let model = Model::new(prior.clone());
    let delta = 0.1;
    let se = se_run(&model, delta, SeOptions::default()).unwrap();
    let inst = generate_instance(&prior, 2000, delta, 3).unwrap();
    let st = amp_run(&inst, &prior, AmpOptions::default()).unwrap();
    let mse = *st.mse_trace.last().unwrap();
    assert!((mse - se.fixed_point).abs() <= 0.1 * se.fixed_point, "{mse} vs {}", se.fixed_point);
    let v = model.v();
    let predicted = v * v - (v - se.fixed_point).powi(2);
    let got = matrix_mse(&st.estimate, &inst.signal).unwrap();
    assert!((got - predicted).abs() <= 0.1 * predicted, "matrix mse {got} vs {predicted}");
}

#[test]
fn uncoupled_window_gives_independent_blocks() {
    let prior = Prior::rademacher();
    let (b, l) = (8, 4);
    let inst = generate_coupled_instance(&prior, b, l, 0, 0.5, 2).unwrap();
    let mut x = vec![0.0; inst.n];
    x[..b].iter_mut().for_each(|z| *z = 1.0);
    let y = inst.apply(&x).unwrap();
    assert!(y[b..].iter().all(|&z| z == 0.0));
    assert!(y[..b].iter().any(|&z| z != 0.0));
}

#[test]
fn blocks_outside_the_window_carry_no_signal() {
    let prior = Prior::dirac(1.0);
    let inst = generate_coupled_instance(&prior, 6, 8, 2, 0.0, 5).unwrap();
    assert!(inst.w_matrix.block(0, 4).iter().all(|&z| z == 0.0));
    assert!(inst.w_matrix.block(0, 2).iter().all(|&z| z > 0.0));
    // regeneration is deterministic and consistent with the transpose
    let noisy = generate_coupled_instance(&prior, 6, 8, 2, 1.0, 5).unwrap();
    assert_eq!(noisy.w_matrix.block(1, 5), noisy.w_matrix.block(1, 5));
    assert_eq!(noisy.w_matrix.entry(8, 31), noisy.w_matrix.entry(31, 8));
}

#[test]
fn noiseless_spectral_estimate_is_exact() {
    let prior = Prior::community(0.2).unwrap();
    let inst = generate_instance(&prior, 500, 0.0, 8).unwrap();
    let sp = spectral_estimate(&inst, &prior, SpectralOptions::default()).unwrap();
    assert!(sp.overlap >= 1.0 - 1e-6, "overlap {}", sp.overlap);
    assert!(sp.converged);
}

#[test]
fn spatial_coupling_rescues_amp_in_the_hard_phase() {
    let prior = Prior::community(0.05).unwrap();
    let model = Model::new(prior.clone());
    let delta = 1.2;
    let e_good = stationary_points(&model, delta).unwrap().points[0].e;

    let flat = generate_instance(&prior, 4000, delta, 1).unwrap();
    let plain = amp_run(&flat, &prior, AmpOptions::default()).unwrap();
    let plain_mse = *plain.mse_trace.last().unwrap();
    assert!(plain_mse > 0.8, "uncoupled AMP unexpectedly succeeded: {plain_mse}");
    assert!(overlap(&plain.estimate, &flat.signal).unwrap() < 0.2);

    let (l, w, b) = (16, 2, 300);
    let inst = generate_coupled_instance(&prior, b, l, w, delta, 1).unwrap();
    let st = amp_run(&inst, &prior, AmpOptions::default()).unwrap();
    let per_block = block_vector_mse(&st.estimate, &inst).unwrap();
    let seeds = &inst.coupling.as_ref().unwrap().seeds;
    let bulk: Vec<f64> = per_block.iter().zip(seeds).filter(|(_, &s)| !s).map(|(e, _)| *e).collect();
    let mean = bulk.iter().sum::<f64>() / bulk.len() as f64;
    assert!(mean <= 2.0 * e_good, "coupled bulk mse {mean} vs E_good {e_good}");

    let se = coupled_se_run(&model, l, w, delta, SeOptions::default()).unwrap();
    assert!(se.profile.max_interior() <= e_good + 1e-4);
}
