//! Uncoupled and spatially coupled state evolution, the triangle coupling
//! kernel, the coupled replica potential and the threshold-saturation
//! experiment.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{stationary_points, thresholds, Branch};
use crate::prior::ScalarModel;
use crate::scalar::Real;

/// Sup-norm tolerance used when none is given.
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Relative mean shift applied to centred priors to start the recursion.
pub const ZERO_MEAN_BIAS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    /// Coupled runs only: evaluate the mmse from a cubic interpolation table
    /// with this many intervals on `[0, v/Δ]` instead of by quadrature.
    pub mmse_table: Option<usize>,
}

impl<T: Real> Default for SeOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(DEFAULT_TOL), max_iter: DEFAULT_MAX_ITER, mmse_table: None }
    }
}

/// Intervals of the mmse table used by the saturation experiment.
pub const SATURATION_TABLE: usize = 16_384;

/// `mmse(s)` on a uniform grid of `[0, s_max]` with four-point Lagrange
/// interpolation; the error is `O(h⁴)`.
#[derive(Debug, Clone)]
pub struct MmseTable<T> {
    step: T,
    values: Vec<T>,
}

impl<T: Real> MmseTable<T> {
    pub fn new(model: &ScalarModel<T>, s_max: T, intervals: usize) -> Result<Self> {
        if intervals < 4 || !(s_max > T::zero()) || s_max.is_infinite() {
            return Err(Error::InvalidArgument("mmse table needs >= 4 intervals on a finite range".into()));
        }
        let step = s_max / T::from_usize_lossy(intervals);
        let values = (0..=intervals)
            .into_par_iter()
            .map(|k| model.mmse_fast(step * T::from_usize_lossy(k)))
            .collect();
        Ok(Self { step, values })
    }

    pub fn eval(&self, s: T) -> T {
        let n = self.values.len() - 1;
        let x = (s / self.step).max(T::zero());
        let k = x.floor().to_f64_lossy() as usize;
        if k >= n {
            return self.values[n];
        }
        let i0 = k.saturating_sub(1).min(n - 3);
        let t = x - T::from_usize_lossy(i0);
        let y = &self.values[i0..i0 + 4];
        let (one, two, three, six) = (T::one(), T::lit(2.0), T::lit(3.0), T::lit(6.0));
        let l0 = -(t - one) * (t - two) * (t - three) / six;
        let l1 = t * (t - two) * (t - three) / two;
        let l2 = -t * (t - one) * (t - three) / two;
        let l3 = t * (t - one) * (t - two) / six;
        (l0 * y[0] + l1 * y[1] + l2 * y[2] + l3 * y[3]).max(T::zero())
    }
}

enum MmseEval<'a, T> {
    Exact(&'a ScalarModel<T>),
    Table(MmseTable<T>),
}

impl<'a, T: Real> MmseEval<'a, T> {
    fn new(model: &'a ScalarModel<T>, delta: T, table: Option<usize>) -> Result<Self> {
        Ok(match table {
            None => Self::Exact(model),
            Some(n) => Self::Table(MmseTable::new(model, model.v() / delta, n)?),
        })
    }

    fn values(&self, snrs: &[T], seeds: &[bool]) -> Vec<T> {
        match self {
            Self::Exact(m) => snrs
                .par_iter()
                .zip(seeds.par_iter())
                .map(|(&s, &seed)| if seed { T::zero() } else { m.mmse_fast(s) })
                .collect(),
            Self::Table(t) => snrs
                .iter()
                .zip(seeds)
                .map(|(&s, &seed)| if seed { T::zero() } else { t.eval(s) })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeTrajectory<T> {
    pub delta: T,
    /// `E⁰ = v, E¹, …`
    pub iterates: Vec<T>,
    pub converged: bool,
    pub fixed_point: T,
}

/// One step `E ↦ mmse((v − E)/Δ)`.
pub fn se_step<T: Real>(model: &ScalarModel<T>, e: T, delta: T) -> Result<T> {
    check_delta(delta)?;
    let v = model.v();
    if !(e >= T::zero() && e <= v) {
        return Err(Error::InvalidArgument(format!("E = {e} outside [0, {v}]")));
    }
    Ok(model.mmse_fast((v - e) / delta))
}

/// Runs the recursion from `E⁰ = v`.
///
/// For centred priors `E = v` is an exact fixed point, so the map is applied
/// with `v` replaced by `v + ε²v` (the second moment of the prior shifted by
/// `ε√v`; the mmse itself is shift invariant) until it settles, after which
/// the unbiased map polishes the fixed point.
///
/// The run stops once a step is below `tol`, is not growing, and the
/// geometric extrapolation of the remaining distance is also below `tol`.
pub fn se_run<T: Real>(model: &ScalarModel<T>, delta: T, opts: SeOptions<T>) -> Result<SeTrajectory<T>> {
    check_delta(delta)?;
    if !(opts.tol > T::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let v = model.v();
    let bias = if model.prior.is_centered() { T::lit(ZERO_MEAN_BIAS * ZERO_MEAN_BIAS) * v } else { T::zero() };
    let mut iterates = vec![v];
    let biased = iterate(model, v + bias, v, delta, opts, true, &mut iterates);
    let mut converged = biased;
    if bias > T::zero() {
        let start = *iterates.last().expect("nonempty");
        let mut polish = vec![start];
        converged = iterate(model, v, start, delta, opts, false, &mut polish) && biased;
        let fp = *polish.last().expect("nonempty");
        let fixed_point = fp.min(v);
        return Ok(SeTrajectory { delta, iterates, converged, fixed_point });
    }
    let fixed_point = *iterates.last().expect("nonempty");
    Ok(SeTrajectory { delta, iterates, converged, fixed_point })
}

fn iterate<T: Real>(
    model: &ScalarModel<T>,
    v_eff: T,
    start: T,
    delta: T,
    opts: SeOptions<T>,
    monotone: bool,
    out: &mut Vec<T>,
) -> bool {
    let mut e = start;
    let mut prev_step = T::infinity();
    for _ in 0..opts.max_iter {
        let mut next = model.mmse_fast(((v_eff - e) / delta).max(T::zero()));
        if monotone {
            next = next.min(e);
        }
        let step = (e - next).abs();
        out.push(next);
        e = next;
        if step < opts.tol && step <= prev_step && (prev_step.is_finite() || step == T::zero()) {
            let r = if prev_step > T::zero() { step / prev_step } else { T::zero() };
            if step == T::zero() || (r < T::one() && step * r / (T::one() - r) < opts.tol) {
                return true;
            }
        }
        prev_step = step;
    }
    false
}

/// Circulant coupling matrix of a ring of `size = L + 1` blocks, stored by its
/// first row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingMatrix<T> {
    pub size: usize,
    pub w: usize,
    row: Vec<T>,
}

impl<T: Real> CouplingMatrix<T> {
    pub fn entry(&self, mu: usize, nu: usize) -> T {
        let n = self.size;
        self.row[(nu + n - mu % n) % n]
    }

    /// First row `Λ_{0ν}`.
    pub fn row(&self) -> &[T] {
        &self.row
    }

    /// `(ΛE)_μ` for every block.
    pub fn apply(&self, e: &[T]) -> Vec<T> {
        let n = self.size;
        let w = self.w;
        (0..n)
            .map(|mu| {
                let mut acc = self.row[0] * e[mu];
                for d in 1..=w {
                    acc = acc + self.row[d] * (e[(mu + d) % n] + e[(mu + n - d) % n]);
                }
                acc
            })
            .collect()
    }

    /// Largest deviation of a row or column sum from one.
    pub fn stochasticity_error(&self) -> T {
        let n = self.size;
        (0..n)
            .flat_map(|i| {
                let r = (0..n).fold(T::zero(), |s, j| s + self.entry(i, j));
                let c = (0..n).fold(T::zero(), |s, j| s + self.entry(j, i));
                [(r - T::one()).abs(), (c - T::one()).abs()]
            })
            .fold(T::zero(), T::max)
    }

    /// `max |Λ_{μν} − Λ_{μ+1,ν}|`.
    pub fn smoothness(&self) -> T {
        let n = self.size;
        (0..n)
            .flat_map(|mu| (0..n).map(move |nu| (mu, nu)))
            .map(|(mu, nu)| (self.entry(mu, nu) - self.entry((mu + 1) % n, nu)).abs())
            .fold(T::zero(), T::max)
    }

    /// Discrete Fourier transform of the first row as `(re, im)` pairs.
    pub fn fourier_transform(&self) -> Vec<(T, T)> {
        let n = self.size;
        let two_pi = T::lit(2.0) * T::PI();
        (0..n)
            .map(|k| {
                self.row.iter().enumerate().fold((T::zero(), T::zero()), |(re, im), (j, &x)| {
                    let ang = two_pi * T::from_usize_lossy((k * j) % n) / T::from_usize_lossy(n);
                    (re + x * ang.cos(), im - x * ang.sin())
                })
            })
            .collect()
    }

    /// Circular distance between blocks.
    pub fn distance(&self, mu: usize, nu: usize) -> usize {
        let d = mu.abs_diff(nu) % self.size;
        d.min(self.size - d)
    }
}

/// Triangle kernel `Λ_{μν} = (1 − d/(w+1))/(w+1)` for circular distance
/// `d ≤ w` on a ring of `L + 1` blocks.
pub fn triangle_coupling<T: Real>(l: usize, w: usize) -> Result<CouplingMatrix<T>> {
    if l % 2 != 0 || l == 0 {
        return Err(Error::InvalidGeometry(format!("ring length L = {l} must be even and positive")));
    }
    if w > l / 2 {
        return Err(Error::InvalidGeometry(format!("window w = {w} exceeds L/2 = {}", l / 2)));
    }
    let n = l + 1;
    let h = T::from_usize_lossy(w + 1);
    let mut row = vec![T::zero(); n];
    for d in 0..=w {
        let val = (T::one() - T::from_usize_lossy(d) / h) / h;
        row[d] = val;
        row[(n - d) % n] = val;
    }
    Ok(CouplingMatrix { size: n, w, row })
}

/// Seed set `B = {0, …, w−1} ∪ {L−w, …, L}`.
pub fn seed_mask(l: usize, w: usize) -> Vec<bool> {
    (0..=l).map(|mu| mu < w || mu + w >= l).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledProfile<T> {
    pub values: Vec<T>,
    pub seeds: Vec<bool>,
}

impl<T: Real> CoupledProfile<T> {
    /// `E_μ = v` off the seed, `0` on it.
    pub fn initial(v: T, l: usize, w: usize) -> Self {
        let seeds = seed_mask(l, w);
        let values = seeds.iter().map(|&s| if s { T::zero() } else { v }).collect();
        Self { values, seeds }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest value off the seed (0 if every block is seeded).
    pub fn max_interior(&self) -> T {
        self.values
            .iter()
            .zip(&self.seeds)
            .filter(|(_, &s)| !s)
            .map(|(&e, _)| e)
            .fold(T::zero(), T::max)
    }

    /// Number of strict local maxima among non-seed blocks, indices taken
    /// circularly.
    pub fn interior_local_maxima(&self) -> usize {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| !self.seeds[i]).collect();
        let vals: Vec<T> = idx.iter().map(|&i| self.values[i]).collect();
        // collapse plateaus, then count peaks
        let mut runs: Vec<T> = Vec::new();
        for &x in &vals {
            if runs.last().is_none_or(|&l| l != x) {
                runs.push(x);
            }
        }
        if runs.len() < 2 {
            return usize::from(!runs.is_empty());
        }
        let m = runs.len();
        let contiguous = idx.windows(2).all(|p| p[1] == p[0] + 1);
        (0..m)
            .filter(|&k| {
                let left = if k > 0 { Some(runs[k - 1]) } else if !contiguous { None } else { Some(runs[m - 1]) };
                let right = if k + 1 < m { Some(runs[k + 1]) } else if !contiguous { None } else { Some(runs[0]) };
                left.is_none_or(|l| runs[k] > l) && right.is_none_or(|r| runs[k] > r)
            })
            .count()
    }
}

fn check_lengths<T: Real>(profile: &CoupledProfile<T>, lambda: &CouplingMatrix<T>) -> Result<()> {
    if profile.values.len() != lambda.size || profile.seeds.len() != lambda.size {
        return Err(Error::DimensionMismatch { expected: lambda.size, got: profile.values.len() });
    }
    Ok(())
}

/// Per-block effective signal-to-noise ratios `(v − (ΛE)_μ)/Δ`.
fn block_snrs<T: Real>(model: &ScalarModel<T>, values: &[T], lambda: &CouplingMatrix<T>, delta: T) -> Vec<T> {
    let v = model.v();
    lambda.apply(values).into_iter().map(|m| ((v - m) / delta).max(T::zero())).collect()
}

/// One coupled update; seed blocks stay at zero.
pub fn coupled_se_step<T: Real>(
    model: &ScalarModel<T>,
    profile: &CoupledProfile<T>,
    lambda: &CouplingMatrix<T>,
    delta: T,
) -> Result<CoupledProfile<T>> {
    check_delta(delta)?;
    check_lengths(profile, lambda)?;
    Ok(step_unchecked(model, &MmseEval::Exact(model), profile, lambda, delta))
}

fn step_unchecked<T: Real>(
    model: &ScalarModel<T>,
    mmse: &MmseEval<'_, T>,
    profile: &CoupledProfile<T>,
    lambda: &CouplingMatrix<T>,
    delta: T,
) -> CoupledProfile<T> {
    let snrs = block_snrs(model, &profile.values, lambda, delta);
    let values = mmse.values(&snrs, &profile.seeds);
    CoupledProfile { values, seeds: profile.seeds.clone() }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoupledRun<T> {
    pub profile: CoupledProfile<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Unconverged runs only: the profile was still lowering at a steady rate
    /// when the iteration budget ran out, i.e. a front was still travelling.
    pub propagating: bool,
}

/// Coupled recursion from `E_μ⁰ = v` off the seed.
pub fn coupled_se_run<T: Real>(
    model: &ScalarModel<T>,
    l: usize,
    w: usize,
    delta: T,
    opts: SeOptions<T>,
) -> Result<CoupledRun<T>> {
    let lambda = triangle_coupling(l, w)?;
    let start = CoupledProfile::initial(model.v(), l, w);
    coupled_se_run_from(model, &lambda, start, delta, opts)
}

/// Coupled recursion from an arbitrary starting profile. Any profile lying
/// above the target fixed point and mapped below itself (for instance an
/// iterate or fixed point at a larger `Δ`) converges to the same limit as the
/// start `E⁰ = v`, by monotonicity.
pub fn coupled_se_run_from<T: Real>(
    model: &ScalarModel<T>,
    lambda: &CouplingMatrix<T>,
    start: CoupledProfile<T>,
    delta: T,
    opts: SeOptions<T>,
) -> Result<CoupledRun<T>> {
    run_coupled(model, lambda, start, delta, opts, None)
}

/// `front_level`: blocks at or below it count as invaded by the good phase;
/// used to tell a travelling front from a pinned one when the budget runs out.
fn run_coupled<T: Real>(
    model: &ScalarModel<T>,
    lambda: &CouplingMatrix<T>,
    start: CoupledProfile<T>,
    delta: T,
    opts: SeOptions<T>,
    front_level: Option<T>,
) -> Result<CoupledRun<T>> {
    check_delta(delta)?;
    check_lengths(&start, lambda)?;
    let mut profile = start;
    for (mu, s) in profile.seeds.iter().enumerate() {
        if *s {
            profile.values[mu] = T::zero();
        }
    }
    let mmse = MmseEval::new(model, delta, opts.mmse_table)?;
    let invaded = |p: &CoupledProfile<T>| match front_level {
        Some(level) => p.values.iter().zip(&p.seeds).filter(|(&x, &s)| !s && x <= level).count(),
        None => 0,
    };
    let mut counts = Vec::with_capacity(opts.max_iter + 1);
    counts.push(invaded(&profile));
    let mut prev_step = T::infinity();
    for it in 1..=opts.max_iter {
        let mut next = step_unchecked(model, &mmse, &profile, lambda, delta);
        // iterates are non-increasing; clamp away round-off upticks
        for (n, &o) in next.values.iter_mut().zip(&profile.values) {
            *n = n.min(o);
        }
        let step = next
            .values
            .iter()
            .zip(&profile.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max);
        profile = next;
        counts.push(invaded(&profile));
        if step < opts.tol && step <= prev_step && (prev_step.is_finite() || step == T::zero()) {
            let r = if prev_step > T::zero() { step / prev_step } else { T::zero() };
            if step == T::zero() || (r < T::one() && step * r / (T::one() - r) < opts.tol) {
                return Ok(CoupledRun { profile, iterations: it, converged: true, propagating: false });
            }
        }
        prev_step = step;
    }
    let propagating = front_level.is_some() && still_advancing(&counts);
    Ok(CoupledRun { profile, iterations: opts.max_iter, converged: false, propagating })
}

/// The invaded region grew by at least two blocks over the last fifth of the
/// run and by at least one over the fifth before.
fn still_advancing(counts: &[usize]) -> bool {
    let n = counts.len();
    let k = n / 5;
    if k < 10 {
        return false;
    }
    let last = counts[n - 1].saturating_sub(counts[n - 1 - k]);
    let prev = counts[n - 1 - k].saturating_sub(counts[n - 1 - 2 * k]);
    last >= 2 && prev >= 1
}

/// Coupled replica potential
/// `Σ_μ [Σ_ν Λ_{μν}(v − E_μ)(v − E_ν)/(4Δ) − φ(snr_μ)]`, without the
/// additive constant `(2w+1)Lv²/(4Δ)`.
pub fn coupled_potential<T: Real>(
    model: &ScalarModel<T>,
    profile: &CoupledProfile<T>,
    lambda: &CouplingMatrix<T>,
    delta: T,
) -> Result<T> {
    check_delta(delta)?;
    check_lengths(profile, lambda)?;
    let v = model.v();
    let four = T::lit(4.0);
    let gaps: Vec<T> = profile.values.iter().map(|&e| v - e).collect();
    let lg = lambda.apply(&gaps);
    let snrs = block_snrs(model, &profile.values, lambda, delta);
    Ok(gaps
        .iter()
        .zip(&lg)
        .zip(&snrs)
        .fold(T::zero(), |acc, ((&g, &lgm), &s)| acc + g * lgm / (four * delta) - model.free_entropy_fast(s)))
}

/// `∂ i_{w,L}/∂E_κ = Σ_ν Λ_{κν}(E_ν − mmse(snr_ν))/(2Δ)`.
pub fn coupled_potential_gradient<T: Real>(
    model: &ScalarModel<T>,
    profile: &CoupledProfile<T>,
    lambda: &CouplingMatrix<T>,
    delta: T,
) -> Result<Vec<T>> {
    check_delta(delta)?;
    check_lengths(profile, lambda)?;
    let snrs = block_snrs(model, &profile.values, lambda, delta);
    let resid: Vec<T> = profile.values.iter().zip(&snrs).map(|(&e, &s)| e - model.mmse_fast(s)).collect();
    let two_delta = T::lit(2.0) * delta;
    Ok(lambda.apply(&resid).into_iter().map(|x| x / two_delta).collect())
}

/// Shift-operator test on the saturated profile built from a fixed point.
#[derive(Debug, Clone, Serialize)]
pub struct ShiftDiagnostic<T> {
    pub e_good: T,
    pub e_max: T,
    /// `i(S(E^s)) − i(E^s)` evaluated directly.
    pub direct: T,
    /// `i_RS(E_good) − i_RS(E_max)`, its telescoped value.
    pub telescoped: T,
    /// `∇i(E^s)·(S(E^s) − E^s)`.
    pub first_order: T,
    /// `direct − first_order`.
    pub remainder: T,
}

/// Builds the saturated profile `E^s` on a line: `E_good` up to the first
/// interior block exceeding it, the fixed-point values up to the interior
/// maximum, then `E_max` onwards, and compares the potential of the
/// one-block shift `[S(E^s)]_μ = E^s_{μ−1}` with that of `E^s`.
///
/// Returns `None` when the profile never exceeds `E_good`.
pub fn shift_diagnostic<T: Real>(
    model: &ScalarModel<T>,
    fixed_point: &CoupledProfile<T>,
    lambda: &CouplingMatrix<T>,
    delta: T,
    e_good: T,
) -> Result<Option<ShiftDiagnostic<T>>> {
    check_delta(delta)?;
    check_lengths(fixed_point, lambda)?;
    let w = lambda.w;
    let interior: Vec<usize> = (0..fixed_point.len()).filter(|&i| !fixed_point.seeds[i]).collect();
    let Some(&mu_max) = interior
        .iter()
        .max_by(|&&a, &&b| fixed_point.values[a].partial_cmp(&fixed_point.values[b]).expect("finite"))
    else {
        return Ok(None);
    };
    let e_max = fixed_point.values[mu_max];
    if e_max <= e_good {
        return Ok(None);
    }
    let first = interior
        .iter()
        .copied()
        .find(|&i| fixed_point.values[i] > e_good)
        .expect("some block exceeds e_good");
    let pad = 2 * w + 2;
    let mut p: Vec<T> = vec![e_good; pad];
    if first < mu_max {
        p.extend_from_slice(&fixed_point.values[first..mu_max]);
    }
    p.extend(std::iter::repeat_n(e_max, pad));
    let mut s = Vec::with_capacity(p.len());
    s.push(e_good);
    s.extend_from_slice(&p[..p.len() - 1]);

    let kernel: Vec<T> = (0..=w).map(|d| lambda.row()[d]).collect();
    let direct = line_potential(model, &s, &kernel, delta) - line_potential(model, &p, &kernel, delta);
    let grad = line_gradient(model, &p, &kernel, delta);
    let first_order = grad
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (k, &g)| match g {
            Some(g) => acc + g * (s[k] - p[k]),
            None => acc,
        });
    let telescoped = crate::potential::i_rs_unchecked(model, e_good, delta)
        - crate::potential::i_rs_unchecked(model, e_max, delta);
    Ok(Some(ShiftDiagnostic { e_good, e_max, direct, telescoped, first_order, remainder: direct - first_order }))
}

fn line_apply<T: Real>(e: &[T], kernel: &[T], mu: usize) -> T {
    let w = kernel.len() - 1;
    let mut acc = kernel[0] * e[mu];
    for d in 1..=w {
        acc = acc + kernel[d] * (e[mu + d] + e[mu - d]);
    }
    acc
}

/// Sum of per-block terms over blocks whose whole window lies on the line.
fn line_potential<T: Real>(model: &ScalarModel<T>, e: &[T], kernel: &[T], delta: T) -> T {
    let v = model.v();
    let w = kernel.len() - 1;
    let gaps: Vec<T> = e.iter().map(|&x| v - x).collect();
    let four = T::lit(4.0);
    (w..e.len() - w).fold(T::zero(), |acc, mu| {
        let lg = line_apply(&gaps, kernel, mu);
        let snr = (lg / delta).max(T::zero());
        acc + gaps[mu] * lg / (four * delta) - model.free_entropy_fast(snr)
    })
}

/// Gradient of [`line_potential`] at coordinates whose `2w`-neighbourhood lies
/// on the line (`None` elsewhere).
fn line_gradient<T: Real>(model: &ScalarModel<T>, e: &[T], kernel: &[T], delta: T) -> Vec<Option<T>> {
    let v = model.v();
    let w = kernel.len() - 1;
    let n = e.len();
    let gaps: Vec<T> = e.iter().map(|&x| v - x).collect();
    let resid: Vec<Option<T>> = (0..n)
        .map(|mu| {
            (mu >= w && mu + w < n).then(|| {
                let snr = (line_apply(&gaps, kernel, mu) / delta).max(T::zero());
                e[mu] - model.mmse_fast(snr)
            })
        })
        .collect();
    let two_delta = T::lit(2.0) * delta;
    (0..n)
        .map(|k| {
            if k < 2 * w || k + 2 * w >= n {
                return None;
            }
            let mut acc = kernel[0] * resid[k].expect("inside");
            for d in 1..=w {
                acc = acc + kernel[d] * (resid[k + d].expect("inside") + resid[k - d].expect("inside"));
            }
            Some(acc / two_delta)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SaturationPoint<T> {
    pub delta: T,
    pub max_interior: T,
    /// `E_good(Δ)`, absent once the good branch has disappeared.
    pub e_good: Option<T>,
    pub saturated: bool,
    pub iterations: usize,
    pub converged: bool,
    pub propagating: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SaturationReport<T> {
    pub w: usize,
    pub l: usize,
    pub points: Vec<SaturationPoint<T>>,
    /// Largest `Δ` found with every non-seed block at or below `E_good(Δ) + tol`.
    pub delta_amp_wl: T,
    /// Bracket `(saturated, not saturated)` that was refined.
    pub bracket: (T, T),
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SaturationOptions<T> {
    pub se: SeOptions<T>,
    /// Slack on `E_good` in the saturation predicate.
    pub tol: T,
    /// Relative width at which the bisection stops.
    pub rel_width: T,
}

impl<T: Real> Default for SaturationOptions<T> {
    fn default() -> Self {
        let se = SeOptions { mmse_table: Some(SATURATION_TABLE), ..SeOptions::default() };
        Self { se, tol: T::lit(1e-6), rel_width: T::lit(1e-6) }
    }
}

/// Evaluates the saturation predicate on `delta_grid` and refines the largest
/// `Δ` at which coupled state evolution still reaches the good branch.
pub fn threshold_saturation_experiment<T: Real>(
    model: &ScalarModel<T>,
    w: usize,
    l: usize,
    delta_grid: &[T],
    opts: SaturationOptions<T>,
) -> Result<SaturationReport<T>> {
    if delta_grid.is_empty() {
        return Err(Error::InvalidArgument("empty delta grid".into()));
    }
    let th = thresholds(model)?;
    let lambda = triangle_coupling(l, w)?;
    let mut grid: Vec<T> = delta_grid.to_vec();
    for &d in &grid {
        check_delta(d)?;
    }
    grid.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    grid.dedup();

    // warm starts: profiles at larger Δ, kept with their Δ
    let mut warm: Vec<(T, CoupledProfile<T>)> = Vec::new();
    let eval = |delta: T, warm: &mut Vec<(T, CoupledProfile<T>)>| -> Result<SaturationPoint<T>> {
        let start = warm
            .iter()
            .filter(|(d, _)| *d >= delta)
            .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"))
            .map(|(_, p)| p.clone())
            .unwrap_or_else(|| CoupledProfile::initial(model.v(), l, w));
        let sp = stationary_points(model, delta)?;
        let e_good = if delta < th.delta_good_end { sp.points.first().map(|p| p.e) } else { None };
        let level = match (e_good, sp.branch(Branch::Unstable)) {
            (Some(_), Some(u)) => Some(u.e),
            (Some(g), None) => Some(T::lit(0.5) * (g + model.v())),
            _ => None,
        };
        let run = run_coupled(model, &lambda, start, delta, opts.se, level)?;
        let max_interior = run.profile.max_interior();
        let saturated = e_good.is_some_and(|g| max_interior <= g + opts.tol || run.propagating);
        warm.push((delta, run.profile));
        Ok(SaturationPoint {
            delta,
            max_interior,
            e_good,
            saturated,
            iterations: run.iterations,
            converged: run.converged,
            propagating: run.propagating,
        })
    };

    let mut points = Vec::with_capacity(grid.len());
    for &d in &grid {
        points.push(eval(d, &mut warm)?);
    }
    points.reverse();
    let mut notes = Vec::new();
    // largest saturated grid point followed by an unsaturated one
    let last_true = points.iter().rposition(|p| p.saturated);
    let (delta_amp_wl, bracket) = match last_true {
        None => {
            notes.push("no grid point saturates; reporting the lowest grid value".into());
            (points[0].delta, (points[0].delta, points[0].delta))
        }
        Some(k) if k + 1 == points.len() => {
            notes.push("every grid point above the crossing saturates; reporting the top of the grid".into());
            (points[k].delta, (points[k].delta, points[k].delta))
        }
        Some(k) => {
            let (mut lo, mut hi) = (points[k].delta, points[k + 1].delta);
            while hi - lo > opts.rel_width * hi {
                let mid = lo + (hi - lo) * T::lit(0.5);
                let p = eval(mid, &mut warm)?;
                if p.saturated {
                    lo = mid;
                } else {
                    hi = mid;
                }
                points.push(p);
            }
            (lo, (lo, hi))
        }
    };
    points.sort_by(|a, b| a.delta.partial_cmp(&b.delta).expect("finite"));
    Ok(SaturationReport { w, l, points, delta_amp_wl, bracket, notes })
}

fn check_delta<T: Real>(delta: T) -> Result<()> {
    if !(delta > T::zero()) || delta.is_infinite() {
        return Err(Error::InvalidArgument(format!("noise variance {delta} must be positive and finite")));
    }
    Ok(())
}
