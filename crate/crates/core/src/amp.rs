//! Synthetic spiked-Wigner instances (plain and spatially coupled), AMP with
//! Onsager correction, a spectral baseline and error metrics.
//!
//! Everything here works in `f64`: the instances are random data, and the
//! analytic side (state evolution) is evaluated at `f64` as well.

use std::borrow::Cow;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::{DiscretePrior, ScalarModel};
use crate::state_evolution::{seed_mask, triangle_coupling, CouplingMatrix};

/// Relative size of the random perturbation added to the AMP starting point.
pub const INIT_PERTURBATION: f64 = 1e-3;

/// Block structure of a coupled instance: `L + 1` blocks of `block_size`
/// variables on a ring, a triangle kernel and the seed blocks.
#[derive(Debug, Clone, Serialize)]
pub struct Coupling {
    pub l: usize,
    pub w: usize,
    pub block_size: usize,
    pub lambda: CouplingMatrix<f64>,
    pub seeds: Vec<bool>,
}

/// Symmetric observation matrix stored by blocks.
///
/// Diagonal blocks are packed upper triangles, off-diagonal blocks with
/// `μ < ν` are stored densely. Blocks farther apart than the coupling
/// window carry pure noise; they are not kept in memory and
/// [`block`](Self::block) regenerates them from their own random stream.
#[derive(Debug, Clone)]
pub struct ObservationMatrix {
    block_size: usize,
    blocks: usize,
    delta: f64,
    seed: u64,
    data: Vec<Option<Vec<f64>>>,
}

impl ObservationMatrix {
    pub fn dim(&self) -> usize {
        self.block_size * self.blocks
    }

    fn ring_distance(&self, mu: usize, nu: usize) -> usize {
        let d = mu.abs_diff(nu);
        d.min(self.blocks - d)
    }

    fn stored(&self, mu: usize, nu: usize) -> Option<&[f64]> {
        self.data[mu * self.blocks + nu].as_deref()
    }

    /// Dense row-major copy of block `(μ, ν)`.
    pub fn block(&self, mu: usize, nu: usize) -> Cow<'_, [f64]> {
        let b = self.block_size;
        let (lo, hi) = (mu.min(nu), mu.max(nu));
        let raw: Vec<f64> = match self.stored(lo, hi) {
            Some(d) if lo == hi => {
                let mut out = vec![0.0; b * b];
                for r in 0..b {
                    let off = packed_offset(b, r);
                    for c in r..b {
                        out[r * b + c] = d[off + c - r];
                        out[c * b + r] = d[off + c - r];
                    }
                }
                out
            }
            Some(d) => {
                if mu <= nu {
                    return Cow::Borrowed(d);
                }
                d.to_vec()
            }
            None => noise_block(self.seed, self.blocks, lo, hi, b, self.delta),
        };
        if mu > nu && lo != hi {
            let mut t = vec![0.0; b * b];
            for r in 0..b {
                for c in 0..b {
                    t[c * b + r] = raw[r * b + c];
                }
            }
            return Cow::Owned(t);
        }
        Cow::Owned(raw)
    }

    /// Single entry `w_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let b = self.block_size;
        let (mu, nu) = (i / b, j / b);
        let (r, c) = (i % b, j % b);
        if mu == nu {
            let d = self.stored(mu, mu).expect("diagonal blocks are stored");
            let (r, c) = (r.min(c), r.max(c));
            return d[packed_offset(b, r) + c - r];
        }
        self.block(mu, nu)[r * b + c]
    }

    /// `y_i = Σ_j c_{μ(i)ν(j)} w_ij x_j` with a per-block-pair scale `c`.
    fn scaled_product(&self, x: &[f64], scale: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let b = self.block_size;
        let mut y = vec![0.0; self.dim()];
        for mu in 0..self.blocks {
            for nu in mu..self.blocks {
                let Some(d) = self.stored(mu, nu) else { continue };
                let c = scale(mu, nu);
                if c == 0.0 {
                    continue;
                }
                let (xm, xn) = (&x[mu * b..(mu + 1) * b], &x[nu * b..(nu + 1) * b]);
                if mu == nu {
                    let (_, rest) = y.split_at_mut(mu * b);
                    let ym = &mut rest[..b];
                    for r in 0..b {
                        let row = &d[packed_offset(b, r)..packed_offset(b, r) + b - r];
                        let xr = c * xm[r];
                        let mut acc = row[0] * xm[r];
                        for (k, &a) in row.iter().enumerate().skip(1) {
                            acc += a * xm[r + k];
                            ym[r + k] += a * xr;
                        }
                        ym[r] += c * acc;
                    }
                } else {
                    let (head, tail) = y.split_at_mut(nu * b);
                    let ym = &mut head[mu * b..(mu + 1) * b];
                    let yn = &mut tail[..b];
                    for r in 0..b {
                        let row = &d[r * b..(r + 1) * b];
                        let xr = c * xm[r];
                        let mut acc = 0.0;
                        for (k, &a) in row.iter().enumerate() {
                            acc += a * xn[k];
                            yn[k] += a * xr;
                        }
                        ym[r] += c * acc;
                    }
                }
            }
        }
        y
    }
}

fn packed_offset(b: usize, r: usize) -> usize {
    r * b - r * r.saturating_sub(1) / 2
}

fn block_stream(blocks: usize, mu: usize, nu: usize) -> u64 {
    1 + (mu * blocks + nu) as u64
}

fn noise_block(seed: u64, blocks: usize, mu: usize, nu: usize, b: usize, delta: f64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(block_stream(blocks, mu, nu));
    let sd = delta.sqrt();
    (0..b * b).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// One observation `W` of a rank-one spike plus symmetric Gaussian noise.
#[derive(Debug, Clone)]
pub struct Instance {
    /// Total number of variables.
    pub n: usize,
    pub delta: f64,
    pub signal: Vec<f64>,
    pub w_matrix: ObservationMatrix,
    pub coupling: Option<Coupling>,
    pub seed: u64,
}

impl Instance {
    /// Number of variables per block (`n` for an uncoupled instance).
    pub fn block_size(&self) -> usize {
        self.w_matrix.block_size
    }

    pub fn blocks(&self) -> usize {
        self.w_matrix.blocks
    }

    fn lambda(&self, mu: usize, nu: usize) -> f64 {
        self.coupling.as_ref().map_or(1.0, |c| c.lambda.entry(mu, nu))
    }

    fn is_seed_block(&self, mu: usize) -> bool {
        self.coupling.as_ref().is_some_and(|c| c.seeds[mu])
    }

    /// The operator AMP and the spectral method act on: `W/√n` for a plain
    /// instance, `√(Λ_{μν}/n)·w` blockwise for a coupled one.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let inv = (self.block_size() as f64).sqrt().recip();
        Ok(self.w_matrix.scaled_product(x, |mu, nu| self.lambda(mu, nu).sqrt() * inv))
    }

    /// Plain instance from the packed upper triangle of `W`.
    pub(crate) fn from_packed(n: usize, delta: f64, signal: Vec<f64>, packed: Vec<f64>, seed: u64) -> Result<Self> {
        if signal.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: signal.len() });
        }
        if packed.len() != n * (n + 1) / 2 {
            return Err(Error::DimensionMismatch { expected: n * (n + 1) / 2, got: packed.len() });
        }
        let w_matrix = ObservationMatrix { block_size: n, blocks: 1, delta, seed, data: vec![Some(packed)] };
        Ok(Self { n, delta, signal, w_matrix, coupling: None, seed })
    }

    /// Writes a plain instance as text: `n delta` on the first line, the
    /// signal on the second, then row `i` of the upper triangle `w_ij, j ≥ i`
    /// on each following line.
    pub fn write_text(&self, out: &mut impl Write) -> Result<()> {
        if self.coupling.is_some() {
            return Err(Error::InvalidArgument("text dump supports uncoupled instances only".into()));
        }
        let io = |e: std::io::Error| Error::Internal(e.to_string());
        writeln!(out, "{} {} {}", self.n, self.delta, self.seed).map_err(io)?;
        write_row(out, &self.signal).map_err(io)?;
        let d = self.w_matrix.stored(0, 0).expect("diagonal block");
        for r in 0..self.n {
            let off = packed_offset(self.n, r);
            write_row(out, &d[off..off + self.n - r]).map_err(io)?;
        }
        Ok(())
    }

    /// Inverse of [`write_text`](Self::write_text).
    pub fn read_text(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = || -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidArgument("truncated instance file".into()))?
                .map_err(|e| Error::Internal(e.to_string()))?;
            Ok(line.split_whitespace().map(str::to_owned).collect())
        };
        let head = next()?;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("{s}: {e}")));
        if head.len() != 3 {
            return Err(Error::InvalidArgument("header must be `n delta seed`".into()));
        }
        let n: usize = head[0].parse().map_err(|e| Error::InvalidArgument(format!("n: {e}")))?;
        let delta = parse(&head[1])?;
        let seed: u64 = head[2].parse().map_err(|e| Error::InvalidArgument(format!("seed: {e}")))?;
        let signal = next()?.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
        if signal.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: signal.len() });
        }
        let mut packed = Vec::with_capacity(n * (n + 1) / 2);
        for r in 0..n {
            let row = next()?.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
            if row.len() != n - r {
                return Err(Error::DimensionMismatch { expected: n - r, got: row.len() });
            }
            packed.extend(row);
        }
        Self::from_packed(n, delta, signal, packed, seed)
    }
}

fn write_row(out: &mut impl Write, xs: &[f64]) -> std::io::Result<()> {
    let mut first = true;
    for x in xs {
        if !first {
            out.write_all(b" ")?;
        }
        write!(out, "{x:e}")?;
        first = false;
    }
    out.write_all(b"\n")
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 0.0) || delta.is_infinite() {
        return Err(Error::InvalidArgument(format!("noise variance {delta} must be finite and >= 0")));
    }
    Ok(())
}

/// `w_ij = s_i s_j/√n + z_ij √Δ` with i.i.d. `s_i ~ P_0`; the noise is drawn
/// for `i ≤ j` and mirrored.
pub fn generate_instance(prior: &DiscretePrior<f64>, n: usize, delta: f64, seed: u64) -> Result<Instance> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("dimension n = {n} must be at least 2")));
    }
    check_delta(delta)?;
    build(prior, n, 1, None, delta, seed)
}

/// Coupled instance on a ring of `L + 1` blocks of `n` variables each:
/// `w = s_i s_j √(Λ_{μν}/n) + z √Δ`. The seed blocks are recorded in
/// [`Coupling::seeds`]; their signal values are known to the estimators.
pub fn generate_coupled_instance(
    prior: &DiscretePrior<f64>,
    n: usize,
    l: usize,
    w: usize,
    delta: f64,
    seed: u64,
) -> Result<Instance> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("block size n = {n} must be at least 2")));
    }
    check_delta(delta)?;
    let lambda = triangle_coupling::<f64>(l, w)?;
    let coupling = Coupling { l, w, block_size: n, lambda, seeds: seed_mask(l, w) };
    build(prior, n, l + 1, Some(coupling), delta, seed)
}

fn build(
    prior: &DiscretePrior<f64>,
    b: usize,
    blocks: usize,
    coupling: Option<Coupling>,
    delta: f64,
    seed: u64,
) -> Result<Instance> {
    let n = b * blocks;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let signal: Vec<f64> = (0..n).map(|_| prior.sample(&mut rng)).collect();
    let window = coupling.as_ref().map_or(0, |c| c.w);
    let sd = delta.sqrt();
    let inv = (b as f64).sqrt().recip();
    let mut m = ObservationMatrix { block_size: b, blocks, delta, seed, data: vec![None; blocks * blocks] };
    for mu in 0..blocks {
        for nu in mu..blocks {
            if m.ring_distance(mu, nu) > window {
                continue;
            }
            let lam = coupling.as_ref().map_or(1.0, |c| c.lambda.entry(mu, nu));
            let c = lam.sqrt() * inv;
            let (sm, sn) = (&signal[mu * b..(mu + 1) * b], &signal[nu * b..(nu + 1) * b]);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(block_stream(blocks, mu, nu));
            let mut z = || sd * rng.sample::<f64, _>(StandardNormal);
            let data = if mu == nu {
                let mut d = Vec::with_capacity(b * (b + 1) / 2);
                for r in 0..b {
                    for k in r..b {
                        d.push(c * sm[r] * sm[k] + z());
                    }
                }
                d
            } else {
                let mut d = Vec::with_capacity(b * b);
                for r in 0..b {
                    for k in 0..b {
                        d.push(c * sm[r] * sn[k] + z());
                    }
                }
                d
            };
            m.data[mu * blocks + nu] = Some(data);
        }
    }
    Ok(Instance { n, delta, signal, w_matrix: m, coupling, seed })
}

/// How the denoiser's signal-to-noise ratio is set at each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseSchedule {
    /// Deterministic: `q ← v − mmse(q/Δ)` from the power of the start. At
    /// finite `n` the iterate can drift away from this schedule, and the
    /// mismatch then feeds on itself; centred priors never leave `q = 0`.
    StateEvolution,
    /// `q = ‖x^t‖²/n` from the current iterate.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmpOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Weight of the previous estimate, in `[0, 1)`.
    pub damping: f64,
    pub schedule: NoiseSchedule,
}

impl Default for AmpOptions {
    fn default() -> Self {
        Self { max_iter: 500, tol: 1e-9, damping: 0.0, schedule: NoiseSchedule::Empirical }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AmpState {
    pub estimate: Vec<f64>,
    pub previous: Vec<f64>,
    /// `Σ_μ²` used at each iteration, per block.
    pub effective_noise: Vec<Vec<f64>>,
    /// Vector-MSE of `x⁰, x¹, …`; `x^t` is tracked by the state-evolution
    /// iterate `E^{t+1}`.
    pub mse_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// A non-finite iterate appeared; the trace stops before it.
    pub diverged: bool,
}

/// Symmetric rank-one AMP in natural parameters:
/// `B^t = [M x^t − b_t x^{t−1}]/Δ`, `A_μ^t = Σ_ν Λ_{μν} q_ν^t/Δ`,
/// `x^{t+1} = E[X | A, B]`, with `b_t` the block-averaged posterior variance.
pub fn amp_run(instance: &Instance, prior: &DiscretePrior<f64>, opts: AmpOptions) -> Result<AmpState> {
    if !(instance.delta > 0.0) {
        return Err(Error::InvalidArgument("AMP needs a positive noise variance".into()));
    }
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(Error::InvalidArgument(format!("damping {} outside [0, 1)", opts.damping)));
    }
    if let Some(bad) = instance.signal.iter().find(|&&s| !prior.contains(s)) {
        return Err(Error::InvalidArgument(format!("signal value {bad} is outside the prior support")));
    }
    let (n, b, nb, delta) = (instance.n, instance.block_size(), instance.blocks(), instance.delta);
    let v = prior.second_moment();
    let model = ScalarModel::new(prior.clone());
    let seeds: Vec<bool> = (0..nb).map(|mu| instance.is_seed_block(mu)).collect();

    let mut rng = ChaCha20Rng::seed_from_u64(instance.seed);
    rng.set_stream(u64::MAX);
    let amp = INIT_PERTURBATION * v.sqrt();
    let mut x: Vec<f64> = (0..n).map(|_| prior.mean() + amp * rng.random_range(-1.0..1.0)).collect();
    let mut var = vec![0.0; n];
    for mu in (0..nb).filter(|&mu| seeds[mu]) {
        x[mu * b..(mu + 1) * b].copy_from_slice(&instance.signal[mu * b..(mu + 1) * b]);
    }
    let mut x_prev = vec![0.0; n];
    let mut q = block_power(&x, b, nb);
    for mu in (0..nb).filter(|&mu| seeds[mu]) {
        q[mu] = v;
    }

    let mut state = AmpState {
        estimate: Vec::new(),
        previous: Vec::new(),
        effective_noise: Vec::new(),
        mse_trace: vec![vector_mse(&x, &instance.signal)?],
        iterations: 0,
        converged: false,
        diverged: false,
    };
    for _ in 0..opts.max_iter {
        if opts.schedule == NoiseSchedule::Empirical {
            q = block_power(&x, b, nb);
        }
        let mix = |vals: &[f64], mu: usize| (0..nb).map(|nu| instance.lambda(mu, nu) * vals[nu]).sum::<f64>();
        let mean_var = block_mean(&var, b, nb);
        let a: Vec<f64> = (0..nb).map(|mu| mix(&q, mu) / delta).collect();
        let onsager: Vec<f64> = (0..nb).map(|mu| mix(&mean_var, mu)).collect();
        let mut u = instance.apply(&x)?;
        for i in 0..n {
            u[i] -= onsager[i / b] * x_prev[i];
        }

        let mut next = vec![0.0; n];
        let mut next_var = vec![0.0; n];
        for i in 0..n {
            let mu = i / b;
            if seeds[mu] {
                next[i] = instance.signal[i];
                continue;
            }
            let (m, s2) = prior.denoise(a[mu].max(0.0), u[i] / delta);
            next[i] = opts.damping * x[i] + (1.0 - opts.damping) * m;
            next_var[i] = opts.damping * var[i] + (1.0 - opts.damping) * s2;
        }
        if next.iter().any(|z| !z.is_finite()) {
            state.diverged = true;
            break;
        }
        let change = (x.iter().zip(&next).map(|(p, c)| (p - c) * (p - c)).sum::<f64>() / n as f64).sqrt();
        state.effective_noise.push(a.iter().map(|&ai| ai.recip()).collect());
        state.mse_trace.push(vector_mse(&next, &instance.signal)?);
        state.iterations += 1;
        x_prev = std::mem::replace(&mut x, next);
        var = next_var;
        if opts.schedule == NoiseSchedule::StateEvolution {
            for mu in 0..nb {
                q[mu] = if seeds[mu] { v } else { (v - model.mmse_fast(a[mu].max(0.0))).max(0.0) };
            }
        }
        if change < opts.tol {
            state.converged = true;
            break;
        }
    }
    state.estimate = x;
    state.previous = x_prev;
    Ok(state)
}

fn block_power(x: &[f64], b: usize, nb: usize) -> Vec<f64> {
    (0..nb).map(|mu| x[mu * b..(mu + 1) * b].iter().map(|z| z * z).sum::<f64>() / b as f64).collect()
}

fn block_mean(x: &[f64], b: usize, nb: usize) -> Vec<f64> {
    (0..nb).map(|mu| x[mu * b..(mu + 1) * b].iter().sum::<f64>() / b as f64).collect()
}

/// Vector-MSE of each block.
pub fn block_vector_mse(estimate: &[f64], instance: &Instance) -> Result<Vec<f64>> {
    if estimate.len() != instance.n {
        return Err(Error::DimensionMismatch { expected: instance.n, got: estimate.len() });
    }
    let b = instance.block_size();
    (0..instance.blocks())
        .map(|mu| vector_mse(&estimate[mu * b..(mu + 1) * b], &instance.signal[mu * b..(mu + 1) * b]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralOptions {
    pub tol: f64,
    /// Budget of operator applications.
    pub max_steps: usize,
    /// Krylov dimension before an explicit restart.
    pub krylov: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_steps: 10_000, krylov: 400 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralEstimate {
    /// Top eigenvector rescaled to `‖x‖² = n·E[S²]`.
    pub estimate: Vec<f64>,
    pub eigenvalue: f64,
    pub overlap: f64,
    /// `‖Mx − λx‖` of the unit eigenvector.
    pub residual: f64,
    pub steps: usize,
    pub converged: bool,
}

/// Leading eigenvector of the instance operator by restarted Lanczos with
/// full reorthogonalisation.
pub fn spectral_estimate(
    instance: &Instance,
    prior: &DiscretePrior<f64>,
    opts: SpectralOptions,
) -> Result<SpectralEstimate> {
    let n = instance.n;
    if n < 2 {
        return Err(Error::InvalidArgument("spectral estimate needs n >= 2".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(instance.seed);
    rng.set_stream(u64::MAX - 1);
    let mut start: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    normalise(&mut start);
    let krylov = opts.krylov.clamp(2, n);
    let mut steps = 0;
    let (mut lambda, mut vec, mut residual) = (0.0, start.clone(), f64::INFINITY);
    while steps < opts.max_steps {
        let budget = krylov.min(opts.max_steps - steps).max(2);
        let out = lanczos(instance, &start, budget, opts.tol)?;
        steps += out.steps;
        lambda = out.eigenvalue;
        vec = out.vector;
        let mv = instance.apply(&vec)?;
        steps += 1;
        residual = mv.iter().zip(&vec).map(|(a, x)| (a - lambda * x).powi(2)).sum::<f64>().sqrt();
        if residual <= opts.tol * lambda.abs().max(1.0) || out.invariant {
            break;
        }
        start = vec.clone();
    }
    let converged = residual <= opts.tol * lambda.abs().max(1.0);
    let overlap = overlap(&vec, &instance.signal)?;
    let scale = (n as f64 * prior.second_moment()).sqrt();
    let estimate = vec.iter().map(|x| x * scale).collect();
    Ok(SpectralEstimate { estimate, eigenvalue: lambda, overlap, residual, steps, converged })
}

struct LanczosOutcome {
    eigenvalue: f64,
    vector: Vec<f64>,
    steps: usize,
    /// The Krylov space became invariant, so the Ritz pair is exact.
    invariant: bool,
}

fn lanczos(instance: &Instance, start: &[f64], max_dim: usize, tol: f64) -> Result<LanczosOutcome> {
    let mut basis: Vec<Vec<f64>> = vec![start.to_vec()];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut invariant = false;
    let mut best = (0.0, Vec::new());
    for k in 0..max_dim {
        let mut w = instance.apply(&basis[k])?;
        alpha.push(dot(&w, &basis[k]));
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let b = dot(&w, &w).sqrt();
        let m = k + 1;
        if m == max_dim || b < 1e-14 || m % 10 == 0 {
            let (theta, y) = top_ritz(&alpha, &beta);
            invariant = b < 1e-14;
            let done = invariant || m == max_dim || b * y[m - 1].abs() <= 0.1 * tol * theta.abs().max(1.0);
            best = (theta, y);
            if done {
                break;
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    let (theta, y) = best;
    let n = start.len();
    let mut vector = vec![0.0; n];
    for (q, &c) in basis.iter().zip(&y) {
        vector.iter_mut().zip(q).for_each(|(x, qi)| *x += c * qi);
    }
    normalise(&mut vector);
    Ok(LanczosOutcome { eigenvalue: theta, vector, steps: alpha.len(), invariant })
}

fn top_ritz(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (idx, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty tridiagonal");
    (theta, eig.eigenvectors.column(idx).iter().copied().collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalise(x: &mut [f64]) {
    let s = dot(x, x).sqrt();
    if s > 0.0 {
        x.iter_mut().for_each(|z| *z /= s);
    }
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: b.len(), got: a.len() });
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty vectors".into()));
    }
    Ok(())
}

/// `|⟨x, s⟩|/(‖x‖‖s‖)`, zero when either vector vanishes.
pub fn overlap(estimate: &[f64], signal: &[f64]) -> Result<f64> {
    check_len(estimate, signal)?;
    let d = (dot(estimate, estimate) * dot(signal, signal)).sqrt();
    Ok(if d > 0.0 { dot(estimate, signal).abs() / d } else { 0.0 })
}

/// `‖ssᵀ − x̂x̂ᵀ‖_F²/n²`, computed from inner products in `O(n)`.
pub fn matrix_mse(estimate: &[f64], signal: &[f64]) -> Result<f64> {
    check_len(estimate, signal)?;
    let n2 = (signal.len() as f64).powi(2);
    let (ss, xx, sx) = (dot(signal, signal), dot(estimate, estimate), dot(signal, estimate));
    Ok(((ss * ss - 2.0 * sx * sx + xx * xx) / n2).max(0.0))
}

/// `‖s − x̂‖²/n`.
pub fn vector_mse(estimate: &[f64], signal: &[f64]) -> Result<f64> {
    check_len(estimate, signal)?;
    Ok(estimate.iter().zip(signal).map(|(x, s)| (x - s) * (x - s)).sum::<f64>() / signal.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(inst: &Instance) -> Vec<f64> {
        let n = inst.n;
        (0..n * n).map(|k| inst.w_matrix.entry(k / n, k % n)).collect()
    }

    #[test]
    fn packed_offsets_are_contiguous() {
        let b = 7;
        let mut expect = 0;
        for r in 0..b {
            assert_eq!(packed_offset(b, r), expect);
            expect += b - r;
        }
    }

    #[test]
    fn noiseless_instance_is_rank_one() {
        let p = DiscretePrior::bernoulli(0.3).unwrap();
        let inst = generate_instance(&p, 9, 0.0, 3).unwrap();
        let n = inst.n as f64;
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(inst.w_matrix.entry(i, j), inst.signal[i] * inst.signal[j] / n.sqrt());
            }
        }
    }

    #[test]
    fn operator_matches_dense_product() {
        let p = DiscretePrior::rademacher();
        let inst = generate_coupled_instance(&p, 5, 6, 2, 0.7, 11).unwrap();
        let n = inst.n;
        let full = dense(&inst);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = inst.apply(&x).unwrap();
        let b = inst.block_size();
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                let lam = inst.coupling.as_ref().unwrap().lambda.entry(i / b, j / b);
                acc += (lam / b as f64).sqrt() * full[i * n + j] * x[j];
            }
            assert!((acc - y[i]).abs() < 1e-12, "{i}: {acc} vs {}", y[i]);
        }
        for i in 0..n {
            for j in 0..n {
                assert_eq!(full[i * n + j], full[j * n + i]);
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let p = DiscretePrior::bernoulli(0.5).unwrap();
        let inst = generate_instance(&p, 6, 0.25, 8).unwrap();
        let mut buf = Vec::new();
        inst.write_text(&mut buf).unwrap();
        let back = Instance::read_text(buf.as_slice()).unwrap();
        assert_eq!(back.signal, inst.signal);
        assert_eq!(dense(&back), dense(&inst));
        assert_eq!(back.delta, inst.delta);
    }

    #[test]
    fn metrics_special_cases() {
        let s = vec![1.0, -1.0, 1.0, 1.0];
        assert_eq!(matrix_mse(&s, &s).unwrap(), 0.0);
        assert_eq!(vector_mse(&s, &s).unwrap(), 0.0);
        let zero = vec![0.0; 4];
        assert_eq!(matrix_mse(&zero, &s).unwrap(), 1.0);
        assert_eq!(vector_mse(&zero, &s).unwrap(), 1.0);
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        assert_eq!(matrix_mse(&neg, &s).unwrap(), 0.0);
        assert_eq!(vector_mse(&neg, &s).unwrap(), 4.0);
        assert!(matches!(vector_mse(&s[..3], &s), Err(Error::DimensionMismatch { .. })));
    }
}
