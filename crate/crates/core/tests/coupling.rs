use rank1_phase::potential::stationary_points;
use rank1_phase::state_evolution::{
    coupled_se_run, shift_diagnostic, triangle_coupling, SeOptions, SATURATION_TABLE,
};
use rank1_phase::{Model, Prior};

#[test]
fn shift_of_the_saturated_profile_telescopes() {
    let model = Model::new(Prior::bernoulli(0.02).unwrap());
    // above Δ_RS but below the end of the good branch
    let delta = 0.00125;
    let e_good = stationary_points(&model, delta).unwrap().points[0].e;
    let opts = SeOptions { mmse_table: Some(SATURATION_TABLE), max_iter: 200_000, ..SeOptions::default() };
    let mut rem = Vec::new();
    for w in [4usize, 8, 16] {
        let l = 50 * w;
        let run = coupled_se_run(&model, l, w, delta, opts).unwrap();
        assert!(run.converged, "w = {w}");
        let lambda = triangle_coupling(l, w).unwrap();
        let d = shift_diagnostic(&model, &run.profile, &lambda, delta, e_good).unwrap().expect("profile rises");
        assert!((d.direct - d.telescoped).abs() <= 1e-10 * d.telescoped.abs(), "w = {w}: {d:?}");
        rem.push((w as f64, d.remainder.abs()));
    }
    // remainder ≈ C/w with C fitted by least squares in 1/w
    let c = rem.iter().map(|(w, r)| r / w).sum::<f64>() / rem.iter().map(|(w, _)| w.powi(-2)).sum::<f64>();
    for &(w, r) in &rem {
        let ratio = r * w / c;
        assert!((1.0 / 1.5..=1.5).contains(&ratio), "w = {w}: remainder {r:e}, C = {c:e}");
    }
    assert!(rem[2].1 < 0.5 * rem[0].1, "{rem:?}");
}
