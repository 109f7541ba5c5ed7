//! Brute-force references: exact posterior enumeration for small `n`,
//! Monte Carlo mmse, the Nishimori identity and finite-size error curves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::amp::{generate_instance, Instance};
use crate::error::{Error, Result};
use crate::prior::DiscretePrior;
use crate::scalar::log_sum_exp;

/// Largest number of configurations [`exact_posterior`] will sum over.
pub const MAX_STATES: usize = 200_000;

#[derive(Debug, Clone, Serialize)]
pub struct EnumerationResult {
    pub n: usize,
    /// `E[X_i | W]`.
    pub means: Vec<f64>,
    /// `E[X_i X_j | W]`, row-major `n × n`.
    pub pair_means: Vec<f64>,
    /// `‖ssᵀ − E[XXᵀ|W]‖_F²/n²`.
    pub matrix_error: f64,
    /// `‖s − E[X|W]‖²/n`.
    pub vector_error: f64,
    /// `ln Σ_x P_0(x) exp(−Σ_{i≤j}(w_ij − x_i x_j/√n)²/(2Δ))`.
    pub log_partition: f64,
    /// `ln Σ` of the normalised posterior weights; zero up to rounding.
    pub normalisation_error: f64,
    pub states: usize,
}

impl EnumerationResult {
    pub fn pair_mean(&self, i: usize, j: usize) -> f64 {
        self.pair_means[i * self.n + j]
    }
}

fn state_count(prior: &DiscretePrior<f64>, n: usize) -> Result<usize> {
    let k = prior.len();
    let states = (k as f64).powi(n as i32);
    if states > MAX_STATES as f64 {
        return Err(Error::StateSpaceTooLarge { states, limit: MAX_STATES });
    }
    Ok(k.pow(n as u32))
}

/// Exact posterior of a plain instance by enumerating all `|supp P_0|^n`
/// signals in mixed-radix order, with log-sum-exp normalisation.
pub fn exact_posterior(instance: &Instance, prior: &DiscretePrior<f64>) -> Result<EnumerationResult> {
    if instance.coupling.is_some() {
        return Err(Error::InvalidArgument("enumeration supports uncoupled instances only".into()));
    }
    if !(instance.delta > 0.0) {
        return Err(Error::InvalidArgument("enumeration needs a positive noise variance".into()));
    }
    let n = instance.n;
    let states = state_count(prior, n)?;
    let k = prior.len();
    let (support, logp): (Vec<f64>, Vec<f64>) =
        prior.support().iter().zip(prior.weights()).map(|(&a, &p)| (a, p.ln())).unzip();
    let inv_sqrt = (n as f64).sqrt().recip();
    let two_delta = 2.0 * instance.delta;
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            w[i * n + j] = instance.w_matrix.entry(i, j);
        }
    }
    let decode = |mut idx: usize, digits: &mut [usize]| {
        for d in digits.iter_mut() {
            *d = idx % k;
            idx /= k;
        }
    };
    let log_weights: Vec<f64> = (0..states)
        .into_par_iter()
        .map_init(
            || (vec![0usize; n], vec![0.0; n]),
            |(digits, x), idx| {
                decode(idx, digits);
                let mut acc = 0.0;
                for i in 0..n {
                    x[i] = support[digits[i]];
                    acc += logp[digits[i]];
                }
                for i in 0..n {
                    for j in i..n {
                        let r = w[i * n + j] - x[i] * x[j] * inv_sqrt;
                        acc -= r * r / two_delta;
                    }
                }
                acc
            },
        )
        .collect();
    let log_partition = log_sum_exp(&log_weights);
    let (s1, s2, total) = log_weights
        .par_iter()
        .enumerate()
        .fold(
            || (vec![0.0; n], vec![0.0; n * n], 0.0, vec![0usize; n], vec![0.0; n]),
            |(mut s1, mut s2, mut total, mut digits, mut x), (idx, &lw)| {
                let p = (lw - log_partition).exp();
                decode(idx, &mut digits);
                for i in 0..n {
                    x[i] = support[digits[i]];
                    s1[i] += p * x[i];
                }
                for i in 0..n {
                    for j in i..n {
                        s2[i * n + j] += p * x[i] * x[j];
                    }
                }
                total += p;
                (s1, s2, total, digits, x)
            },
        )
        .map(|(s1, s2, total, _, _)| (s1, s2, total))
        .reduce(
            || (vec![0.0; n], vec![0.0; n * n], 0.0),
            |mut a, b| {
                a.0.iter_mut().zip(&b.0).for_each(|(x, y)| *x += y);
                a.1.iter_mut().zip(&b.1).for_each(|(x, y)| *x += y);
                (a.0, a.1, a.2 + b.2)
            },
        );
    let mut pair_means = s2;
    for i in 0..n {
        for j in 0..i {
            pair_means[i * n + j] = pair_means[j * n + i];
        }
    }
    let s = &instance.signal;
    let matrix_error = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (s[i] * s[j] - pair_means[i * n + j]).powi(2))
        .sum::<f64>()
        / (n * n) as f64;
    let vector_error = s.iter().zip(&s1).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
    Ok(EnumerationResult {
        n,
        means: s1,
        pair_means,
        matrix_error,
        vector_error,
        log_partition,
        normalisation_error: total.ln(),
        states,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

fn mean_and_stderr(sum: f64, sum_sq: f64, count: usize) -> McEstimate {
    let n = count as f64;
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    McEstimate { estimate: mean, stderr: (var / n).sqrt() }
}

/// SplitMix64 step; turns a master seed and a counter into a stream seed.
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    let mut z = master.wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Monte Carlo estimate of `E[(S − E[X | S + Z/√snr])²]`.
pub fn mc_mmse(prior: &DiscretePrior<f64>, snr: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    if samples < 1000 {
        return Err(Error::InvalidArgument(format!("need at least 1000 samples, got {samples}")));
    }
    if !(snr >= 0.0) {
        return Err(Error::InvalidArgument(format!("snr {snr} must be nonnegative")));
    }
    const CHUNK: usize = 1 << 15;
    let sigma = if snr > 0.0 { snr.sqrt().recip() } else { f64::INFINITY };
    let sigma2 = sigma * sigma;
    let chunks = samples.div_ceil(CHUNK);
    let (s1, s2) = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<(f64, f64)> {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let (mut a, mut b) = (0.0, 0.0);
            for _ in 0..CHUNK.min(samples - c * CHUNK) {
                let s = prior.sample(&mut rng);
                let est = if sigma.is_finite() {
                    let y = s + sigma * rng.sample::<f64, _>(StandardNormal);
                    prior.posterior_mean(y, sigma2)?
                } else {
                    prior.mean()
                };
                let e = (s - est) * (s - est);
                a += e;
                b += e * e;
            }
            Ok((a, b))
        })
        .try_reduce(|| (0.0, 0.0), |x, y| Ok((x.0 + y.0, x.1 + y.1)))?;
    Ok(mean_and_stderr(s1, s2, samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NishimoriCheck {
    /// Mean of `n⁻² Σ_ij s_i s_j E[X_iX_j|W]`.
    pub lhs: f64,
    /// Mean of `n⁻² Σ_ij E[X_iX_j|W]²`.
    pub rhs: f64,
    /// Standard error of the mean difference.
    pub stderr: f64,
    pub instances: usize,
}

impl NishimoriCheck {
    pub fn within(&self, sigmas: f64) -> bool {
        (self.lhs - self.rhs).abs() <= sigmas * self.stderr
    }
}

/// Both sides of `E[S_iS_j E[X_iX_j|W]] = E[E[X_iX_j|W]²]` averaged over
/// fresh instances, each from its own derived seed.
pub fn nishimori_check(
    prior: &DiscretePrior<f64>,
    n: usize,
    delta: f64,
    num_instances: usize,
    seed: u64,
) -> Result<NishimoriCheck> {
    if num_instances < 2 {
        return Err(Error::InvalidArgument("need at least two instances".into()));
    }
    state_count(prior, n)?;
    let rows = (0..num_instances)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let inst = generate_instance(prior, n, delta, derive_seed(seed, k as u64))?;
            let post = exact_posterior(&inst, prior)?;
            let s = &inst.signal;
            let (mut l, mut r) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let m = post.pair_mean(i, j);
                    l += s[i] * s[j] * m;
                    r += m * m;
                }
            }
            let nn = (n * n) as f64;
            Ok((l / nn, r / nn))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = rows.len() as f64;
    let lhs = rows.iter().map(|r| r.0).sum::<f64>() / m;
    let rhs = rows.iter().map(|r| r.1).sum::<f64>() / m;
    let (d1, d2) = rows.iter().fold((0.0, 0.0), |(a, b), r| (a + r.0 - r.1, b + (r.0 - r.1).powi(2)));
    let stderr = mean_and_stderr(d1, d2, rows.len()).stderr;
    Ok(NishimoriCheck { lhs, rhs, stderr, instances: rows.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteSizePoint {
    pub delta: f64,
    pub matrix_mmse: McEstimate,
    pub vector_mmse: McEstimate,
}

/// Exact per-instance posterior errors averaged over instances, for every
/// `Δ` of the grid. Instance `k` uses the same derived seed at every `Δ`.
pub fn finite_size_mmse_curve(
    prior: &DiscretePrior<f64>,
    n: usize,
    delta_grid: &[f64],
    num_instances: usize,
    seed: u64,
) -> Result<Vec<FiniteSizePoint>> {
    if num_instances < 2 {
        return Err(Error::InvalidArgument("need at least two instances".into()));
    }
    state_count(prior, n)?;
    delta_grid
        .iter()
        .map(|&delta| {
            let errs = (0..num_instances)
                .into_par_iter()
                .map(|k| -> Result<(f64, f64)> {
                    let inst = generate_instance(prior, n, delta, derive_seed(seed, k as u64))?;
                    let post = exact_posterior(&inst, prior)?;
                    Ok((post.matrix_error, post.vector_error))
                })
                .collect::<Result<Vec<_>>>()?;
            let stats = |f: fn(&(f64, f64)) -> f64| {
                let (a, b) = errs.iter().fold((0.0, 0.0), |(a, b), e| (a + f(e), b + f(e) * f(e)));
                mean_and_stderr(a, b, errs.len())
            };
            Ok(FiniteSizePoint { delta, matrix_mmse: stats(|e| e.0), vector_mmse: stats(|e| e.1) })
        })
        .collect()
}
