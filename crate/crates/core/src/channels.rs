//! Element-wise output channels, their Fisher-information effective noise,
//! and the balanced two-group community-detection model.

use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::amp::Instance;
use crate::error::{Error, Result};
use crate::prior::DiscretePrior;

/// Samples used by the Monte Carlo Fisher estimate.
pub const FISHER_SAMPLES: usize = 1_000_000;
/// Central-difference step for the score.
pub const SCORE_STEP: f64 = 1e-5;

/// `P_out(w | y)` for a scalar observation `w` of `y = s_i s_j/√n`.
pub trait OutputChannel: Sync {
    /// `ln P_out(w | y)`.
    fn log_likelihood(&self, w: f64, y: f64) -> f64;

    fn sample(&self, y: f64, rng: &mut dyn RngCore) -> f64;

    /// `E_{P_out(w|0)}[(∂_y ln P_out(w|y)|_{y=0})²]` when known in closed form.
    fn fisher_information(&self) -> Option<f64> {
        None
    }

    /// Analytic score at `y = 0`, if available.
    fn score(&self, _w: f64) -> Option<f64> {
        None
    }
}

/// `w = y + √Δ₀ z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianChannel {
    pub variance: f64,
}

impl OutputChannel for GaussianChannel {
    fn log_likelihood(&self, w: f64, y: f64) -> f64 {
        -(w - y).powi(2) / (2.0 * self.variance) - 0.5 * (2.0 * std::f64::consts::PI * self.variance).ln()
    }

    fn sample(&self, y: f64, rng: &mut dyn RngCore) -> f64 {
        y + self.variance.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }

    fn fisher_information(&self) -> Option<f64> {
        Some(self.variance.recip())
    }

    fn score(&self, w: f64) -> Option<f64> {
        Some(w / self.variance)
    }
}

/// `w = c·y + √Δ₀ z`; the closed form `c²/Δ₀` is deliberately not exposed,
/// so the effective noise goes through Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainChannel {
    pub gain: f64,
    pub variance: f64,
}

impl OutputChannel for GainChannel {
    fn log_likelihood(&self, w: f64, y: f64) -> f64 {
        -(w - self.gain * y).powi(2) / (2.0 * self.variance)
            - 0.5 * (2.0 * std::f64::consts::PI * self.variance).ln()
    }

    fn sample(&self, y: f64, rng: &mut dyn RngCore) -> f64 {
        self.gain * y + self.variance.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }
}

/// Edge indicator with `P(w = 1 | y) = p + μ·y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BernoulliEdgeChannel {
    pub p: f64,
    pub mu: f64,
}

impl OutputChannel for BernoulliEdgeChannel {
    fn log_likelihood(&self, w: f64, y: f64) -> f64 {
        let q = self.p + self.mu * y;
        if w > 0.5 {
            q.ln()
        } else {
            (1.0 - q).ln()
        }
    }

    fn sample(&self, y: f64, rng: &mut dyn RngCore) -> f64 {
        let q = self.p + self.mu * y;
        if rng.random::<f64>() < q {
            1.0
        } else {
            0.0
        }
    }

    fn fisher_information(&self) -> Option<f64> {
        Some(self.mu * self.mu / (self.p * (1.0 - self.p)))
    }

    fn score(&self, w: f64) -> Option<f64> {
        Some(if w > 0.5 { self.mu / self.p } else { -self.mu / (1.0 - self.p) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveNoise {
    pub delta: f64,
    /// Standard error of a Monte Carlo estimate; absent for closed forms.
    pub stderr: Option<f64>,
    pub note: Option<String>,
}

/// Inverse Fisher information at `y = 0`: closed form when the channel has
/// one, otherwise [`FISHER_SAMPLES`] Monte Carlo draws with seed 0.
pub fn effective_noise(channel: &dyn OutputChannel) -> Result<EffectiveNoise> {
    match channel.fisher_information() {
        Some(f) => Ok(from_fisher(f, None)),
        None => effective_noise_mc(channel, FISHER_SAMPLES, 0),
    }
}

/// Monte Carlo inverse Fisher information. The score is the channel's own
/// when given, else a central difference with step [`SCORE_STEP`]; the
/// standard error is propagated to `1/F` by the delta method.
pub fn effective_noise_mc(channel: &dyn OutputChannel, samples: usize, seed: u64) -> Result<EffectiveNoise> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    const CHUNK: usize = 1 << 14;
    let chunks = samples.div_ceil(CHUNK);
    let (s1, s2) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            let (mut a, mut b) = (0.0, 0.0);
            for _ in 0..len {
                let w = channel.sample(0.0, &mut rng);
                let g = channel.score(w).unwrap_or_else(|| {
                    (channel.log_likelihood(w, SCORE_STEP) - channel.log_likelihood(w, -SCORE_STEP))
                        / (2.0 * SCORE_STEP)
                });
                a += g * g;
                b += g.powi(4);
            }
            (a, b)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
    let n = samples as f64;
    let f = s1 / n;
    let var = (s2 / n - f * f).max(0.0) * n / (n - 1.0);
    let se_f = (var / n).sqrt();
    Ok(from_fisher(f, Some(se_f)))
}

fn from_fisher(f: f64, se_f: Option<f64>) -> EffectiveNoise {
    if !(f > 0.0) {
        return EffectiveNoise {
            delta: f64::INFINITY,
            stderr: se_f.map(|_| f64::INFINITY),
            note: Some("non-informative channel".into()),
        };
    }
    EffectiveNoise { delta: f.recip(), stderr: se_f.map(|s| s / (f * f)), note: None }
}

/// Two-group prior with zero mean and unit variance.
pub fn community_detection_prior(rho: f64) -> Result<DiscretePrior<f64>> {
    DiscretePrior::community(rho)
}

/// A sampled graph together with its Gaussian-equivalent observation.
#[derive(Debug, Clone)]
pub struct CommunityGraph {
    pub rho: f64,
    pub p: f64,
    pub mu: f64,
    /// `i < j` pairs joined by an edge.
    pub edges: Vec<(u32, u32)>,
    /// `w_ij = (a_ij − p)/μ` with zero diagonal; its noise variance is
    /// `Δ = p(1−p)/μ²`, recorded as the instance's `delta` (`∞` at `μ = 0`).
    pub equivalent: Instance,
}

impl CommunityGraph {
    /// Degree of every node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.equivalent.n];
        for &(i, j) in &self.edges {
            d[i as usize] += 1;
            d[j as usize] += 1;
        }
        d
    }

    /// One `i j` pair per line.
    pub fn write_edge_list(&self, out: &mut impl Write) -> Result<()> {
        for &(i, j) in &self.edges {
            writeln!(out, "{i} {j}").map_err(|e| Error::Internal(e.to_string()))?;
        }
        Ok(())
    }
}

/// Balanced two-group graph: a pair in the first group links with
/// probability `p + μ(1−ρ)/(ρ√n)`, in the second with `p + μρ/((1−ρ)√n)`,
/// across groups with `p − μ/√n`; equivalently `p + μ s_i s_j/√n` with
/// `s` drawn from [`community_detection_prior`]. No self-loops.
pub fn generate_community_graph(rho: f64, p: f64, mu: f64, n: usize, seed: u64) -> Result<CommunityGraph> {
    let prior = community_detection_prior(rho)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("graph needs n >= 2, got {n}")));
    }
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("signal strength mu = {mu} must be finite and >= 0")));
    }
    let sq = (n as f64).sqrt();
    let probs = [
        ("first group", p + mu * (1.0 - rho) / (rho * sq)),
        ("second group", p + mu * rho / ((1.0 - rho) * sq)),
        ("across groups", p - mu / sq),
    ];
    for (which, value) in probs {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::ProbabilityOutOfRange { which, value });
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let signal: Vec<f64> = (0..n).map(|_| prior.sample(&mut rng)).collect();
    let hi = prior.max_support();
    let mut edges = Vec::new();
    let mut packed = Vec::with_capacity(n * (n + 1) / 2);
    // with no signal the centred adjacency itself is returned
    let inv_mu = if mu > 0.0 { mu.recip() } else { 1.0 };
    rng.set_stream(1);
    for i in 0..n {
        packed.push(0.0);
        for j in i + 1..n {
            let prob = match (signal[i] == hi, signal[j] == hi) {
                (true, true) => probs[0].1,
                (false, false) => probs[1].1,
                _ => probs[2].1,
            };
            let a = if rng.random::<f64>() < prob { 1.0 } else { 0.0 };
            if a > 0.0 {
                edges.push((i as u32, j as u32));
            }
            packed.push((a - p) * inv_mu);
        }
    }
    let delta = if mu > 0.0 { p * (1.0 - p) / (mu * mu) } else { f64::INFINITY };
    let equivalent = Instance::from_packed(n, delta, signal, packed, seed)?;
    Ok(CommunityGraph { rho, p, mu, edges, equivalent })
}
