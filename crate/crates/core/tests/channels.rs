use rank1_phase::amp::{amp_run, generate_instance, overlap, AmpOptions};
use rank1_phase::channels::{
    community_detection_prior, effective_noise, effective_noise_mc, generate_community_graph, BernoulliEdgeChannel,
    GainChannel, GaussianChannel,
};

#[test]
fn gaussian_channel_both_paths() {
    let g = GaussianChannel { variance: 0.8 };
    assert_eq!(effective_noise(&g).unwrap().delta, 0.8);
    // the sampling path with the analytic score
    let mc = effective_noise_mc(&g, 200_000, 3).unwrap();
    let se = mc.stderr.unwrap();
    assert!((mc.delta - 0.8).abs() <= 3.0 * se, "{} ± {se}", mc.delta);
}

#[test]
fn edge_channel_matches_the_community_formula() {
    let (p, mu) = (0.1, 0.05);
    let e = effective_noise(&BernoulliEdgeChannel { p, mu }).unwrap();
    assert!((e.delta - p * (1.0 - p) / (mu * mu)).abs() <= 1e-12 * e.delta);
}

#[test]
fn scaled_output_goes_through_monte_carlo() {
    let (c, d0) = (0.6, 0.3);
    let e = effective_noise(&GainChannel { gain: c, variance: d0 }).unwrap();
    let se = e.stderr.expect("Monte Carlo estimate");
    let exact = d0 / (c * c);
    assert!((e.delta - exact).abs() <= 3.0 * se, "{} vs {exact} (se {se})", e.delta);
    assert!(se < 0.01 * exact);
}

#[test]
fn community_prior_is_standardised() {
    for rho in [0.01, 0.05, 0.2, 0.5, 0.77] {
        let p = community_detection_prior(rho).unwrap();
        assert!(p.mean().abs() <= 1e-12);
        assert!((p.second_moment() - 1.0).abs() <= 1e-12);
    }
    let p = community_detection_prior(0.05).unwrap();
    let mut s = p.support().to_vec();
    s.sort_by(f64::total_cmp);
    assert!((s[1] - 19f64.sqrt()).abs() < 1e-12);
    assert!((s[0] + (1.0f64 / 19.0).sqrt()).abs() < 1e-12);
    let half = community_detection_prior(0.5).unwrap();
    assert_eq!(half.weights(), &[0.5, 0.5]);
    assert!(community_detection_prior(1.0).is_err());
}

#[test]
fn no_signal_gives_a_homogeneous_graph() {
    let (n, p) = (600, 0.2);
    let g = generate_community_graph(0.3, p, 0.0, n, 4).unwrap();
    assert!(g.equivalent.delta.is_infinite());
    let pairs = (n * (n - 1) / 2) as f64;
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += g.equivalent.w_matrix.entry(i, j);
        }
    }
    let mean = sum / pairs;
    assert!(mean.abs() <= 3.0 / (n as f64 * n as f64 / 2.0).sqrt(), "centred mean {mean}");
    assert!((g.edges.len() as f64 - p * pairs).abs() <= 3.0 * (pairs * p * (1.0 - p)).sqrt());
}

#[test]
fn both_groups_have_mean_degree_pn() {
    let (rho, p, mu, n) = (0.2, 0.05, 0.3, 3000);
    let g = generate_community_graph(rho, p, mu, n, 6).unwrap();
    let deg = g.degrees();
    let hi = community_detection_prior(rho).unwrap().max_support();
    for first in [true, false] {
        let d: Vec<f64> = deg
            .iter()
            .zip(&g.equivalent.signal)
            .filter(|(_, &s)| (s == hi) == first)
            .map(|(&d, _)| d as f64)
            .collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let sd = (p * (1.0 - p) * n as f64 / d.len() as f64).sqrt();
        assert!((mean - p * n as f64).abs() <= 3.0 * sd + 1.0, "group {first}: mean degree {mean}");
    }
    let mut buf = Vec::new();
    g.write_edge_list(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), g.edges.len());
}

/// AMP overlaps on the graph and on a Gaussian instance with the same
/// signal and the same effective noise.
fn paired_overlaps(n: usize, seed: u64) -> (f64, f64) {
    let (rho, p, delta) = (0.5, 0.3, 0.5f64);
    let mu = (p * (1.0 - p) / delta).sqrt();
    let prior = community_detection_prior(rho).unwrap();
    let g = generate_community_graph(rho, p, mu, n, seed).unwrap();
    assert!((g.equivalent.delta - delta).abs() < 1e-12);
    let direct = generate_instance(&prior, n, delta, seed).unwrap();
    assert_eq!(direct.signal, g.equivalent.signal);
    let run = |inst| {
        let st = amp_run(inst, &prior, AmpOptions::default()).unwrap();
        overlap(&st.estimate, &inst.signal).unwrap()
    };
    (run(&g.equivalent), run(&direct))
}

#[test]
fn graph_and_gaussian_observations_behave_alike() {
    let (graph, gauss) = paired_overlaps(4000, 1);
    assert!(gauss > 0.5, "AMP failed on the Gaussian instance: {gauss}");
    assert!((graph - gauss).abs() <= 0.15 * gauss, "graph {graph} vs gaussian {gauss}");

    let gap = |n: usize| {
        (0..8)
            .map(|s| {
                let (a, b) = paired_overlaps(n, 10 + s);
                (a - b).abs()
            })
            .sum::<f64>()
            / 8.0
    };
    let gaps: Vec<f64> = [500, 2000, 8000].into_iter().map(gap).collect();
    assert!(gaps[0] >= gaps[1] && gaps[1] >= gaps[2], "overlap gaps {gaps:?}");
}
