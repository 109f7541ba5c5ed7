use anyhow::{bail, Context, Result};
use rank1_phase::amp::{
    amp_run, block_vector_mse, generate_coupled_instance, generate_instance, matrix_mse, overlap, spectral_estimate,
    vector_mse, AmpOptions, Instance, SpectralOptions,
};
use rank1_phase::channels::{
    community_detection_prior, effective_noise, generate_community_graph, BernoulliEdgeChannel,
};
use rank1_phase::oracle::{derive_seed, finite_size_mmse_curve, mc_mmse, nishimori_check};
use rank1_phase::phase::{first_order_boundary, phase_diagram, small_rho_probe};
use rank1_phase::potential::{
    matrix_mmse, mutual_information, potential_curve, stationary_points, thresholds, vector_mmse, StationaryPoints,
};
use rank1_phase::state_evolution::{
    coupled_se_run, se_run, threshold_saturation_experiment, SaturationOptions, SeOptions, SATURATION_TABLE,
};
use rank1_phase::{Prior, PriorRecord};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Config, OracleCheck};
use crate::output::{label, num, Output};

/// Per-point failures of a sweep that otherwise ran to the end.
pub type Failures = Vec<String>;

const COUPLED_MAX_ITER: usize = 200_000;

pub fn potential(cfg: &Config, out: &Output) -> Result<Failures> {
    let model = cfg.model()?;
    let deltas = cfg.grid.delta.resolve("grid.delta")?;
    let results = deltas
        .par_iter()
        .map(|&d| Ok((potential_curve(&model, d, cfg.run.points)?, stationary_points(&model, d)?)))
        .collect::<Result<Vec<_>, rank1_phase::Error>>()?;

    let mut curve = out.csv("potential.csv", &["delta", "e", "i_rs"])?;
    for (c, _) in &results {
        for (e, i) in &c.grid {
            curve.row(&[&c.delta, e, i])?;
        }
    }
    curve.finish()?;

    let mut sp = out.csv("stationary_points.csv", &["delta", "e", "i_rs", "kind", "branch", "global_minimum"])?;
    for (_, s) in &results {
        let best = s.global_minimum().e;
        for p in &s.points {
            let branch = p.branch.map(|b| label(&b));
            sp.row(&[&s.delta, &p.e, &p.potential, &label(&p.kind), &branch, &(p.e == best)])?;
        }
    }
    sp.finish()?;
    Ok(Vec::new())
}

pub fn thresholds_cmd(cfg: &Config, out: &Output) -> Result<Failures> {
    let model = cfg.model()?;
    let th = thresholds(&model)?;
    out.json(
        "thresholds.json",
        json!({
            "prior": PriorRecord::from(&model.prior),
            "v": model.v(),
            "delta_amp": num(th.delta_amp),
            "delta_rs": num(th.delta_rs),
            "delta_opt": num(th.delta_opt),
            "delta_spectral": num(th.delta_spectral),
            "delta_good_end": num(th.delta_good_end),
            "order": label(&th.order),
            "notes": th.notes,
        }),
    )?;
    Ok(Vec::new())
}

pub fn phase_diagram_cmd(
    cfg: &Config,
    out: &Output,
    small_rho: Option<usize>,
    boundary: Option<(f64, f64)>,
) -> Result<Failures> {
    let family = cfg.grid.family;
    let rhos = cfg.grid.rho.resolve("grid.rho")?;
    if let Some(bad) = rhos.iter().find(|&&r| r >= 1.0) {
        bail!("grid.rho: densities must lie in (0, 1), got {bad}");
    }
    let rows = phase_diagram(family, &rhos);
    let mut failures = Vec::new();
    let mut t = out.csv(
        "phase_diagram.csv",
        &["rho", "delta_amp", "delta_rs", "delta_spectral", "order", "first_order", "error"],
    )?;
    for r in &rows {
        let order = r.order.map(|o| label(&o));
        let first = r.order.map(|_| r.delta_amp < r.delta_rs);
        t.row(&[&r.rho, &r.delta_amp, &r.delta_rs, &r.delta_spectral, &order, &first, &r.error.as_deref()])?;
        if let Some(e) = &r.error {
            failures.push(format!("rho = {}: {e}", r.rho));
        }
    }
    t.finish()?;

    if let Some((lo, hi)) = boundary {
        let tol = cfg.tol(1e-6);
        match first_order_boundary(family, lo, hi, tol) {
            Ok(rho) => out.json(
                "boundary.json",
                json!({ "family": family, "lo": lo, "hi": hi, "tol": tol, "rho": rho }),
            )?,
            Err(e) => failures.push(format!("boundary on [{lo}, {hi}]: {e}")),
        }
    }

    if let Some(points) = small_rho {
        let rows = small_rho_probe(1e-2, 1e-4, points)?;
        let mut t = out.csv("small_rho.csv", &["rho", "delta_opt", "scaled"])?;
        for r in &rows {
            t.row(&[&r.rho, &r.delta_opt, &r.scaled])?;
        }
        t.finish()?;
    }
    Ok(failures)
}

fn se_options(cfg: &Config, max_iter: Option<usize>, table: Option<usize>) -> SeOptions<f64> {
    let d = SeOptions::<f64>::default();
    SeOptions {
        tol: cfg.tol(d.tol),
        max_iter: cfg.run.max_iter.or(max_iter).unwrap_or(d.max_iter),
        mmse_table: table,
    }
}

/// The stationary point within `1e-6` of `e`, if any.
fn branch_at(sp: &StationaryPoints<f64>, e: f64) -> Option<String> {
    sp.points.iter().find(|p| (p.e - e).abs() <= 1e-6).and_then(|p| p.branch).map(|b| label(&b))
}

pub fn se(cfg: &Config, out: &Output) -> Result<Failures> {
    let model = cfg.model()?;
    let deltas = cfg.grid.delta.resolve("grid.delta")?;
    let opts = se_options(cfg, None, None);
    let runs = deltas
        .par_iter()
        .map(|&d| {
            let run = se_run(&model, d, opts)?;
            let sp = stationary_points(&model, d)?;
            let mi = mutual_information(&model, d)?;
            Ok((run, sp, mi.argmin))
        })
        .collect::<Result<Vec<_>, rank1_phase::Error>>()?;

    let mut t = out.csv("se.csv", &["delta", "t", "e"])?;
    for (run, _, _) in &runs {
        for (k, e) in run.iterates.iter().enumerate() {
            t.row(&[&run.delta, &k, e])?;
        }
    }
    t.finish()?;

    let mut t = out.csv(
        "se_fixed_points.csv",
        &["delta", "fixed_point", "iterations", "converged", "branch", "argmin_i_rs"],
    )?;
    for (run, sp, argmin) in &runs {
        let iters = run.iterates.len().saturating_sub(1);
        t.row(&[&run.delta, &run.fixed_point, &iters, &run.converged, &branch_at(sp, run.fixed_point), argmin])?;
    }
    t.finish()?;
    Ok(Vec::new())
}

pub fn coupled_se(cfg: &Config, out: &Output, saturation: bool) -> Result<Failures> {
    let model = cfg.model()?;
    let deltas = cfg.grid.delta.resolve("grid.delta")?;
    let Some((l, w)) = cfg.geometry.coupling()? else {
        bail!("coupled-se needs geometry.l and geometry.w");
    };
    let opts = se_options(cfg, Some(COUPLED_MAX_ITER), Some(SATURATION_TABLE));
    let runs = deltas
        .par_iter()
        .map(|&d| coupled_se_run(&model, l, w, d, opts))
        .collect::<Result<Vec<_>, _>>()?;

    let mut t = out.csv("coupled_profiles.csv", &["delta", "block", "e", "seed"])?;
    for (d, run) in deltas.iter().zip(&runs) {
        for (k, (e, s)) in run.profile.values.iter().zip(&run.profile.seeds).enumerate() {
            t.row(&[d, &k, e, s])?;
        }
    }
    t.finish()?;

    let mut t = out.csv(
        "coupled_summary.csv",
        &["delta", "l", "w", "max_interior", "interior_local_maxima", "iterations", "converged", "propagating"],
    )?;
    for (d, run) in deltas.iter().zip(&runs) {
        let p = &run.profile;
        t.row(&[
            d,
            &l,
            &w,
            &p.max_interior(),
            &p.interior_local_maxima(),
            &run.iterations,
            &run.converged,
            &run.propagating,
        ])?;
    }
    t.finish()?;

    if saturation {
        let sopts = SaturationOptions { se: opts, ..SaturationOptions::default() };
        let rep = threshold_saturation_experiment(&model, w, l, &deltas, sopts)?;
        let mut t = out.csv(
            "saturation.csv",
            &["delta", "max_interior", "e_good", "saturated", "iterations", "converged", "propagating"],
        )?;
        for p in &rep.points {
            t.row(&[&p.delta, &p.max_interior, &p.e_good, &p.saturated, &p.iterations, &p.converged, &p.propagating])?;
        }
        t.finish()?;
        let delta_rs = thresholds(&model)?.delta_rs;
        out.json(
            "saturation.json",
            json!({
                "l": l,
                "w": w,
                "delta_amp_wl": num(rep.delta_amp_wl),
                "delta_rs": num(delta_rs),
                "ratio": num(rep.delta_amp_wl / delta_rs),
                "bracket": [num(rep.bracket.0), num(rep.bracket.1)],
                "notes": rep.notes,
            }),
        )?;
    }
    Ok(Vec::new())
}

/// `(grid index, delta, instance, seed)` for every run of a sweep, in grid order.
fn runs(cfg: &Config, deltas: &[f64]) -> Result<Vec<(usize, f64, usize, u64)>> {
    let k = cfg.run.instances;
    if k == 0 {
        bail!("run.instances must be at least 1");
    }
    Ok(deltas
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| (0..k).map(move |j| (i, d, j, derive_seed(cfg.run.seed, (i * k + j) as u64))))
        .collect())
}

fn amp_options(cfg: &Config) -> AmpOptions {
    let d = AmpOptions::default();
    AmpOptions {
        max_iter: cfg.run.max_iter.unwrap_or(d.max_iter),
        tol: cfg.tol(d.tol),
        damping: cfg.run.damping,
        schedule: cfg.run.schedule,
    }
}

fn instance(cfg: &Config, prior: &Prior, delta: f64, seed: u64) -> Result<Instance> {
    let n = cfg.geometry.n;
    Ok(match cfg.geometry.coupling()? {
        Some((l, w)) => generate_coupled_instance(prior, n, l, w, delta, seed)?,
        None => generate_instance(prior, n, delta, seed)?,
    })
}

pub fn amp(cfg: &Config, out: &Output) -> Result<Failures> {
    let model = cfg.model()?;
    let deltas = cfg.grid.delta.resolve("grid.delta")?;
    let coupled = cfg.geometry.coupling()?.is_some();
    let opts = amp_options(cfg);
    let plan = runs(cfg, &deltas)?;
    // AMP at iteration t is tracked by the state-evolution iterate t + 1
    let predictions = if coupled {
        vec![None; deltas.len()]
    } else {
        let se = se_options(cfg, None, None);
        deltas.par_iter().map(|&d| se_run(&model, d, se).map(Some)).collect::<Result<Vec<_>, _>>()?
    };
    let results = plan
        .par_iter()
        .map(|&(_, d, _, seed)| -> Result<_> {
            let inst = instance(cfg, &model.prior, d, seed)?;
            let st = amp_run(&inst, &model.prior, opts)?;
            let blocks = if coupled { block_vector_mse(&st.estimate, &inst)? } else { Vec::new() };
            let summary = (
                vector_mse(&st.estimate, &inst.signal)?,
                matrix_mse(&st.estimate, &inst.signal)?,
                overlap(&st.estimate, &inst.signal)?,
            );
            Ok((st, blocks, summary))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut t = out.csv("amp_trace.csv", &["delta", "instance", "seed", "t", "mse", "se_prediction"])?;
    for (&(i, d, j, seed), (st, _, _)) in plan.iter().zip(&results) {
        let pred = predictions[i].as_ref();
        for (k, mse) in st.mse_trace.iter().enumerate() {
            let p = pred.map(|r| r.iterates.get(k + 1).copied().unwrap_or(r.fixed_point));
            t.row(&[&d, &j, &seed, &k, mse, &p])?;
        }
    }
    t.finish()?;

    let mut t = out.csv(
        "amp_summary.csv",
        &["delta", "instance", "seed", "iterations", "converged", "diverged", "vector_mse", "matrix_mse", "overlap"],
    )?;
    for (&(_, d, j, seed), (st, _, (vm, mm, ov))) in plan.iter().zip(&results) {
        t.row(&[&d, &j, &seed, &st.iterations, &st.converged, &st.diverged, vm, mm, ov])?;
    }
    t.finish()?;

    if coupled {
        let mut t = out.csv("amp_blocks.csv", &["delta", "instance", "block", "mse"])?;
        for (&(_, d, j, _), (_, blocks, _)) in plan.iter().zip(&results) {
            for (b, m) in blocks.iter().enumerate() {
                t.row(&[&d, &j, &b, m])?;
            }
        }
        t.finish()?;
    }
    Ok(Vec::new())
}

pub fn spectral(cfg: &Config, out: &Output) -> Result<Failures> {
    let prior = cfg.prior.build()?;
    let v = prior.second_moment();
    let deltas = cfg.grid.delta.resolve("grid.delta")?;
    let plan = runs(cfg, &deltas)?;
    let opts = SpectralOptions { tol: cfg.tol(SpectralOptions::default().tol), ..SpectralOptions::default() };
    let results = plan
        .par_iter()
        .map(|&(_, d, _, seed)| -> Result<_> {
            let inst = generate_instance(&prior, cfg.geometry.n, d, seed)?;
            Ok(spectral_estimate(&inst, &prior, opts)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = out.csv(
        "spectral.csv",
        &["delta", "instance", "seed", "eigenvalue", "overlap", "predicted_overlap", "residual", "steps", "converged"],
    )?;
    for (&(_, d, j, seed), s) in plan.iter().zip(&results) {
        let predicted = (1.0 - d / (v * v)).max(0.0).sqrt();
        t.row(&[&d, &j, &seed, &s.eigenvalue, &s.overlap, &predicted, &s.residual, &s.steps, &s.converged])?;
    }
    t.finish()?;
    Ok(Vec::new())
}

pub fn community(cfg: &Config, out: &Output) -> Result<Failures> {
    let c = &cfg.community;
    let mu = c.mu()?;
    let n = cfg.geometry.n;
    let prior = community_detection_prior(c.rho)?;
    let noise = effective_noise(&BernoulliEdgeChannel { p: c.p, mu })?;
    let k = cfg.run.instances.max(1);
    let amp_opts = amp_options(cfg);
    let sp_opts = SpectralOptions { tol: cfg.tol(SpectralOptions::default().tol), ..SpectralOptions::default() };

    let results = (0..k)
        .into_par_iter()
        .map(|j| -> Result<_> {
            let seed = derive_seed(cfg.run.seed, j as u64);
            let g = generate_community_graph(c.rho, c.p, mu, n, seed)?;
            let inst = &g.equivalent;
            let a = amp_run(inst, &prior, amp_opts)?;
            let s = spectral_estimate(inst, &prior, sp_opts)?;
            let gauss = generate_instance(&prior, n, inst.delta, seed)?;
            let ga = amp_run(&gauss, &prior, amp_opts)?;
            let ov = (overlap(&a.estimate, &inst.signal)?, s.overlap, overlap(&ga.estimate, &gauss.signal)?);
            Ok((seed, g, ov))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut t = out.csv(
        "community.csv",
        &["instance", "seed", "n", "edges", "mean_degree", "amp_overlap", "spectral_overlap", "gaussian_amp_overlap"],
    )?;
    for (j, (seed, g, (a, s, ga))) in results.iter().enumerate() {
        let mean_degree = 2.0 * g.edges.len() as f64 / n as f64;
        t.row(&[&j, seed, &n, &g.edges.len(), &mean_degree, a, s, ga])?;
        let mut f = out.text(&format!("edges_{j}.txt"))?;
        use std::io::Write;
        writeln!(f, "# columns: i j")?;
        g.write_edge_list(&mut f)?;
        f.flush()?;
    }
    t.finish()?;

    out.json(
        "community.json",
        json!({
            "rho": c.rho,
            "p": c.p,
            "mu": mu,
            "n": n,
            "effective_delta": num(noise.delta),
            "effective_delta_stderr": noise.stderr,
            "note": noise.note,
            "delta_spectral": 1.0,
        }),
    )?;
    Ok(Vec::new())
}

pub fn oracle(cfg: &Config, out: &Output, check: OracleCheck) -> Result<Failures> {
    let o = &cfg.oracle;
    let model = cfg.model()?;
    let prior = &model.prior;
    let seed = cfg.run.seed;
    let all = check == OracleCheck::All;

    if all || check == OracleCheck::Mmse {
        let snrs = o.snr.resolve("oracle.snr")?;
        let rows = snrs
            .par_iter()
            .enumerate()
            .map(|(k, &snr)| Ok((model.mmse(snr)?, mc_mmse(prior, snr, o.samples, derive_seed(seed, k as u64))?)))
            .collect::<Result<Vec<_>, rank1_phase::Error>>()?;
        let mut t = out.csv(
            "oracle_mmse.csv",
            &["snr", "quadrature", "mc_estimate", "mc_stderr", "z", "within_3sigma"],
        )?;
        for (snr, (q, mc)) in snrs.iter().zip(&rows) {
            let diff = mc.estimate - q;
            let z = if diff == 0.0 { 0.0 } else { diff / mc.stderr };
            t.row(&[snr, q, &mc.estimate, &mc.stderr, &z, &(z.abs() <= 3.0)])?;
        }
        t.finish()?;
    }

    let deltas = || o.delta.resolve("oracle.delta");
    if all || check == OracleCheck::Nishimori {
        let deltas = deltas()?;
        let rows = deltas
            .iter()
            .enumerate()
            .map(|(k, &d)| nishimori_check(prior, o.n, d, o.instances, derive_seed(seed, k as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut t = out.csv(
            "oracle_nishimori.csv",
            &["delta", "n", "instances", "lhs", "rhs", "difference", "stderr", "within_3sigma"],
        )?;
        for (d, r) in deltas.iter().zip(&rows) {
            t.row(&[d, &o.n, &r.instances, &r.lhs, &r.rhs, &(r.lhs - r.rhs), &r.stderr, &r.within(3.0)])?;
        }
        t.finish()?;
    }

    if all || check == OracleCheck::FiniteSize {
        let deltas = deltas()?;
        if o.sizes.is_empty() {
            bail!("oracle.sizes: empty list");
        }
        let replica = deltas
            .iter()
            .map(|&d| Ok((matrix_mmse(&model, d)?.value, vector_mmse(&model, d)?.value)))
            .collect::<Result<Vec<_>, rank1_phase::Error>>()?;
        let mut t = out.csv(
            "oracle_finite_size.csv",
            &[
                "n",
                "delta",
                "matrix_mmse",
                "matrix_stderr",
                "vector_mmse",
                "vector_stderr",
                "replica_matrix_mmse",
                "replica_vector_mmse",
            ],
        )?;
        for &n in &o.sizes {
            let curve = finite_size_mmse_curve(prior, n, &deltas, o.instances, derive_seed(seed, n as u64))
                .with_context(|| format!("finite-size curve at n = {n}"))?;
            for (p, (rm, rv)) in curve.iter().zip(&replica) {
                t.row(&[
                    &n,
                    &p.delta,
                    &p.matrix_mmse.estimate,
                    &p.matrix_mmse.stderr,
                    &p.vector_mmse.estimate,
                    &p.vector_mmse.stderr,
                    rm,
                    rv,
                ])?;
            }
        }
        t.finish()?;
    }
    Ok(Vec::new())
}
