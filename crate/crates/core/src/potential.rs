//! The replica-symmetric potential `i_RS(E;Δ)`, its stationary points, the
//! single-letter mutual information and the thresholds `Δ_AMP`, `Δ_RS`.
//!
//! Writing `s = (v − E)/Δ` for the effective scalar signal-to-noise ratio,
//!
//! ```text
//! i_RS(E;Δ) = ((v − E)² + v²)/(4Δ) − φ(s) = E²/(4Δ) − ψ(s),
//! ```
//!
//! where `φ` is the scalar free entropy and `ψ(s) = φ(s) − v s/2` its bounded
//! excess. The second form is what we evaluate: it has no cancellation at
//! small `Δ`. Since `∂i_RS/∂E = (E − mmse(s))/(2Δ)`, stationary points are the
//! fixed points of `E = mmse((v − E)/Δ)`.
//!
//! Thresholds are read off the *fixed-point curve* `Δ(s) = (v − mmse(s))/s`:
//! every solution of `Δ(s) = Δ` is an interior stationary point, so the number
//! of stationary points changes exactly at the local extrema of this curve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{bisect, geomspace, golden_section};
use crate::prior::ScalarModel;
use crate::scalar::Real;

/// Uniform cells in the sign-change scan of `g(E)`.
pub const SCAN_CELLS: usize = 4096;
/// Subdivision factor applied around each sign change.
pub const SCAN_REFINE: usize = 8;
/// Samples of the fixed-point curve used for threshold location.
pub const CURVE_POINTS: usize = 8192;

/// `(E, i_RS(E;Δ))` on a uniform grid of `[0, v]`.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialCurve<T> {
    pub delta: T,
    pub grid: Vec<(T, T)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StationaryKind {
    Minimum,
    Maximum,
    Inflexion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Good,
    Unstable,
    Bad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryPoint<T> {
    pub e: T,
    pub potential: T,
    pub kind: StationaryKind,
    pub branch: Option<Branch>,
}

/// Stationary points of `i_RS(·;Δ)` in increasing `E`.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryPoints<T> {
    pub delta: T,
    pub points: Vec<StationaryPoint<T>>,
}

impl<T: Real> StationaryPoints<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn branch(&self, b: Branch) -> Option<&StationaryPoint<T>> {
        self.points.iter().find(|p| p.branch == Some(b))
    }

    /// Stationary point of lowest potential (first one on exact ties).
    pub fn global_minimum(&self) -> &StationaryPoint<T> {
        self.points
            .iter()
            .fold(None::<&StationaryPoint<T>>, |best, p| match best {
                Some(b) if b.potential <= p.potential => Some(b),
                _ => Some(p),
            })
            .expect("at least one stationary point")
    }
}

/// `min_E i_RS(E;Δ)` and its minimiser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MutualInformation<T> {
    pub value: T,
    pub argmin: T,
    /// A second minimiser when two minima tie to numerical precision.
    pub tie: Option<T>,
}

/// Matrix-MMSE `v² − (v − E*)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixMmse<T> {
    pub value: T,
    /// The value at the other minimiser when `Δ` sits on `Δ_RS`.
    pub alternative: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Validity {
    Proven,
    Conjectured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VectorMmse<T> {
    pub value: T,
    pub validity: Validity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionOrder {
    /// `min i_RS` is analytic in `Δ`.
    None,
    /// Coexistence region `(Δ_AMP, Δ_RS)` with a jump of the MMSE at `Δ_RS`.
    FirstOrder,
    /// Continuous transition at `Δ_AMP = Δ_RS < ∞`.
    HigherOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds<T> {
    pub delta_amp: T,
    pub delta_rs: T,
    pub delta_opt: T,
    pub delta_spectral: T,
    /// Largest `Δ` at which the good branch still exists (`∞` if it always does).
    pub delta_good_end: T,
    pub order: TransitionOrder,
    pub notes: Vec<String>,
}

/// `i_RS(E;Δ)` with input validation.
pub fn i_rs<T: Real>(model: &ScalarModel<T>, e: T, delta: T) -> Result<T> {
    check_delta(delta)?;
    let v = model.v();
    if !(e >= T::zero() && e <= v) {
        return Err(Error::InvalidArgument(format!("E = {e} outside [0, {v}]")));
    }
    Ok(i_rs_unchecked(model, e, delta))
}

pub(crate) fn i_rs_unchecked<T: Real>(model: &ScalarModel<T>, e: T, delta: T) -> T {
    let v = model.v();
    let s = ((v - e) / delta).max(T::zero());
    e * e / (T::lit(4.0) * delta) - model.terms(s).excess
}

/// `g(E) = E − mmse((v − E)/Δ)`; `∂i_RS/∂E = g/(2Δ)`.
pub fn fixed_point_residual<T: Real>(model: &ScalarModel<T>, e: T, delta: T) -> T {
    let s = ((model.v() - e) / delta).max(T::zero());
    e - model.mmse_fast(s)
}

/// `i_RS` sampled at `points` uniform values of `E` in `[0, v]`.
pub fn potential_curve<T: Real>(
    model: &ScalarModel<T>,
    delta: T,
    points: usize,
) -> Result<PotentialCurve<T>> {
    check_delta(delta)?;
    if points < 2 {
        return Err(Error::InvalidArgument("a potential curve needs at least 2 points".into()));
    }
    let v = model.v();
    let last = T::from_usize_lossy(points - 1);
    let grid = (0..points)
        .map(|k| {
            let e = if k == points - 1 { v } else { v * T::from_usize_lossy(k) / last };
            (e, i_rs_unchecked(model, e, delta))
        })
        .collect();
    Ok(PotentialCurve { delta, grid })
}

/// Roots of `g` on `[0, v]`, classified and labelled.
pub fn stationary_points<T: Real>(model: &ScalarModel<T>, delta: T) -> Result<StationaryPoints<T>> {
    check_delta(delta)?;
    let v = model.v();
    if v == T::zero() || model.prior.variance() <= T::zero() {
        let e = T::zero();
        let point = StationaryPoint {
            e,
            potential: i_rs_unchecked(model, e, delta),
            kind: StationaryKind::Minimum,
            branch: None,
        };
        return Ok(StationaryPoints { delta, points: vec![point] });
    }
    let g = |e: T| fixed_point_residual(model, e, delta);
    let eps4 = T::lit(4.0) * T::epsilon();
    let is_zero = |e: T, ge: T| ge.abs() <= eps4 * (e + (e - ge)).abs();
    let sign = |e: T, ge: T| if is_zero(e, ge) { 0 } else if ge > T::zero() { 1 } else { -1 };

    let n = SCAN_CELLS;
    let es: Vec<T> = (0..=n)
        .map(|k| if k == n { v } else { v * T::from_usize_lossy(k) / T::from_usize_lossy(n) })
        .collect();
    let gs: Vec<T> = es.iter().map(|&e| g(e)).collect();
    let signs: Vec<i8> = es.iter().zip(&gs).map(|(&e, &ge)| sign(e, ge)).collect();

    // Cells touching a sign change (or a zero) are subdivided.
    let mut flagged = vec![false; n];
    for k in 0..n {
        if signs[k] == 0 || signs[k + 1] == 0 || signs[k] != signs[k + 1] {
            for j in k.saturating_sub(1)..=(k + 1).min(n - 1) {
                flagged[j] = true;
            }
        }
    }
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    for k in 0..n {
        xs.push(es[k]);
        ys.push(gs[k]);
        if flagged[k] {
            for j in 1..SCAN_REFINE {
                let e = es[k] + (es[k + 1] - es[k]) * T::from_usize_lossy(j) / T::from_usize_lossy(SCAN_REFINE);
                xs.push(e);
                ys.push(g(e));
            }
        }
    }
    xs.push(es[n]);
    ys.push(gs[n]);
    let ss: Vec<i8> = xs.iter().zip(&ys).map(|(&e, &ge)| sign(e, ge)).collect();

    // (E, sign of g just left, sign just right); 0 marks a missing side.
    let tol = T::lit(1e-13) * v;
    let mut roots: Vec<(T, i8, i8)> = Vec::new();
    let m = xs.len();
    let mut k = 0;
    while k < m {
        if ss[k] == 0 {
            // a run of exact zeros counts once, at the point of smallest |g|
            let start = k;
            while k + 1 < m && ss[k + 1] == 0 {
                k += 1;
            }
            let best = (start..=k)
                .min_by(|&a, &b| ys[a].abs().partial_cmp(&ys[b].abs()).expect("finite"))
                .expect("nonempty run");
            let left = if start > 0 { ss[start - 1] } else { 0 };
            let right = if k + 1 < m { ss[k + 1] } else { 0 };
            roots.push((xs[best], left, right));
        } else if k + 1 < m && ss[k + 1] != 0 && ss[k + 1] != ss[k] {
            let e = bisect(xs[k], xs[k + 1], tol, &g);
            roots.push((e, ss[k], ss[k + 1]));
        }
        k += 1;
    }

    if roots.is_empty() {
        return Err(Error::Internal(format!("no stationary point found at delta = {delta}")));
    }
    if roots.len() > 3 {
        return Err(Error::TooManyStationaryPoints {
            delta: delta.to_f64_lossy(),
            roots: roots.iter().map(|r| r.0.to_f64_lossy()).collect(),
        });
    }
    let three = roots.len() == 3;
    let labels = [Branch::Good, Branch::Unstable, Branch::Bad];
    let points = roots
        .iter()
        .enumerate()
        .map(|(idx, &(e, left, right))| StationaryPoint {
            e,
            potential: i_rs_unchecked(model, e, delta),
            kind: classify(left, right),
            branch: three.then(|| labels[idx]),
        })
        .collect();
    Ok(StationaryPoints { delta, points })
}

/// `∂i_RS/∂E` has the sign of `g`: − then + is a minimum. At an endpoint only
/// one side exists and the boundary value is an extremum of the restriction.
fn classify(left: i8, right: i8) -> StationaryKind {
    match (left, right) {
        (-1, 1) | (0, 1) | (-1, 0) => StationaryKind::Minimum,
        (1, -1) | (0, -1) | (1, 0) => StationaryKind::Maximum,
        _ => StationaryKind::Inflexion,
    }
}

/// Single-letter mutual information `min_E i_RS(E;Δ)`.
pub fn mutual_information<T: Real>(model: &ScalarModel<T>, delta: T) -> Result<MutualInformation<T>> {
    let sp = stationary_points(model, delta)?;
    Ok(minimise_over(model, delta, &sp))
}

pub(crate) fn minimise_over<T: Real>(
    model: &ScalarModel<T>,
    delta: T,
    sp: &StationaryPoints<T>,
) -> MutualInformation<T> {
    let v = model.v();
    let mut cands: Vec<(T, T)> = sp.points.iter().map(|p| (p.e, p.potential)).collect();
    for e in [T::zero(), v] {
        if cands.iter().all(|c| c.0 != e) {
            cands.push((e, i_rs_unchecked(model, e, delta)));
        }
    }
    cands.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite potential"));
    let (argmin, value) = cands[0];
    let tie_tol = T::lit(1e-11) * value.abs().max(T::one());
    let sep = T::lit(1e-6) * v;
    let tie = cands[1..]
        .iter()
        .find(|c| (c.1 - value).abs() <= tie_tol && (c.0 - argmin).abs() > sep)
        .map(|c| c.0);
    MutualInformation { value, argmin, tie }
}

/// `v² − (v − E*)²`, with the other one-sided value at a tie.
pub fn matrix_mmse<T: Real>(model: &ScalarModel<T>, delta: T) -> Result<MatrixMmse<T>> {
    let mi = mutual_information(model, delta)?;
    let v = model.v();
    let f = |e: T| v * v - (v - e) * (v - e);
    Ok(MatrixMmse { value: f(mi.argmin), alternative: mi.tie.map(f) })
}

/// `E*`, flagged as conjectured inside `[Δ_AMP, Δ_RS]`.
pub fn vector_mmse<T: Real>(model: &ScalarModel<T>, delta: T) -> Result<VectorMmse<T>> {
    let th = thresholds(model)?;
    vector_mmse_with(model, delta, &th)
}

pub fn vector_mmse_with<T: Real>(
    model: &ScalarModel<T>,
    delta: T,
    th: &Thresholds<T>,
) -> Result<VectorMmse<T>> {
    let mi = mutual_information(model, delta)?;
    let inside = th.order == TransitionOrder::FirstOrder && delta >= th.delta_amp && delta <= th.delta_rs;
    let validity = if inside { Validity::Conjectured } else { Validity::Proven };
    Ok(VectorMmse { value: mi.argmin, validity })
}

/// Samples of `Δ(s) = (v − mmse(s))/s` on a geometric grid of `s`.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointCurve<T> {
    pub snr: Vec<T>,
    pub delta: Vec<T>,
    /// `lim_{s→0} Δ(s)`: `v²` for centred priors, `∞` otherwise.
    pub delta_at_zero: T,
}

/// A local extremum of the fixed-point curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurningPoint<T> {
    pub snr: T,
    pub delta: T,
    pub is_max: bool,
}

impl<T: Real> FixedPointCurve<T> {
    pub fn new(model: &ScalarModel<T>, points: usize) -> Result<Self> {
        if points < 16 {
            return Err(Error::InvalidArgument("fixed-point curve needs at least 16 points".into()));
        }
        let v = model.v();
        if model.prior.variance() <= T::zero() {
            return Err(Error::InvalidArgument("degenerate prior has no fixed-point curve".into()));
        }
        let (lo, hi) = snr_range(model);
        let snr = geomspace(lo, hi, points);
        let delta = snr.iter().map(|&s| curve_value(model, s)).collect();
        let delta_at_zero = if model.prior.is_centered() { v * v } else { T::infinity() };
        Ok(Self { snr, delta, delta_at_zero })
    }

    /// Significant local extrema in increasing `s`, located on the grid and
    /// refined by golden section. Reversals smaller than a relative `1e-9` are
    /// treated as quadrature noise.
    pub fn turning_points(&self, model: &ScalarModel<T>) -> Vec<TurningPoint<T>> {
        let d = &self.delta;
        let rel = T::lit(1e-9);
        let mut raw: Vec<(usize, bool)> = Vec::new();
        let mut dir = 0i8;
        let mut ext = 0usize;
        for k in 1..d.len() {
            match dir {
                0 => {
                    if d[k] > d[0] * (T::one() + rel) {
                        dir = 1;
                        ext = k;
                    } else if d[k] < d[0] * (T::one() - rel) {
                        dir = -1;
                        ext = k;
                    }
                }
                1 => {
                    if d[k] >= d[ext] {
                        ext = k;
                    } else if d[k] < d[ext] * (T::one() - rel) {
                        raw.push((ext, true));
                        dir = -1;
                        ext = k;
                    }
                }
                _ => {
                    if d[k] <= d[ext] {
                        ext = k;
                    } else if d[k] > d[ext] * (T::one() + rel) {
                        raw.push((ext, false));
                        dir = 1;
                        ext = k;
                    }
                }
            }
        }
        raw.into_iter()
            .map(|(k, is_max)| {
                let a = self.snr[k.saturating_sub(1)].ln();
                let b = self.snr[(k + 1).min(d.len() - 1)].ln();
                let (x, val) = golden_section(a, b, T::lit(1e-12), is_max, |ls| curve_value(model, ls.exp()));
                let (snr, delta) = if (is_max && val >= d[k]) || (!is_max && val <= d[k]) {
                    (x.exp(), val)
                } else {
                    (self.snr[k], d[k])
                };
                TurningPoint { snr, delta, is_max }
            })
            .collect()
    }
}

/// `Δ(s) = E[η²]/s` for `s > 0`.
pub fn curve_value<T: Real>(model: &ScalarModel<T>, s: T) -> T {
    model.terms(s).power / s
}

/// Geometric `s` range covering the default `Δ` bracket: from far below the
/// scale where the centred curve leaves `v²` up to saturation of the mmse.
fn snr_range<T: Real>(model: &ScalarModel<T>) -> (T, T) {
    let v = model.v();
    let gap = model.prior.min_gap();
    let lo = T::lit(1e-10) / v;
    let sat = T::lit(6400.0) / (gap * gap);
    let hi = sat.max(T::lit(1e7) / v);
    (lo, hi)
}

/// Solve `Δ(s) = delta` for `s` in a bracket where the curve is monotone.
fn solve_branch<T: Real>(model: &ScalarModel<T>, delta: T, s_lo: T, s_hi: T) -> T {
    let ls = bisect(s_lo.ln(), s_hi.ln(), T::lit(1e-15), |ls| curve_value(model, ls.exp()) - delta);
    ls.exp()
}

/// Default `Δ` search bracket `[1e-6·v², 1e3·v²]`.
pub fn default_bracket<T: Real>(model: &ScalarModel<T>) -> (T, T) {
    let v2 = model.v() * model.v();
    (T::lit(1e-6) * v2, T::lit(1e3) * v2)
}

/// `Δ_AMP`, `Δ_RS` and the order of the transition.
pub fn thresholds<T: Real>(model: &ScalarModel<T>) -> Result<Thresholds<T>> {
    thresholds_with(model, CURVE_POINTS)
}

pub fn thresholds_with<T: Real>(model: &ScalarModel<T>, points: usize) -> Result<Thresholds<T>> {
    let v = model.v();
    let v2 = v * v;
    let inf = T::infinity();
    if model.prior.variance() <= T::zero() {
        return Ok(Thresholds {
            delta_amp: inf,
            delta_rs: inf,
            delta_opt: inf,
            delta_spectral: v2,
            delta_good_end: inf,
            order: TransitionOrder::None,
            notes: vec!["degenerate prior: the fixed point is unique for every noise level".into()],
        });
    }
    let curve = FixedPointCurve::new(model, points)?;
    let tps = curve.turning_points(model);
    let centered = model.prior.is_centered();
    let mut notes = Vec::new();
    let shape: Vec<bool> = tps.iter().map(|t| t.is_max).collect();

    let too_many = |tps: &[TurningPoint<T>]| {
        let probe = tps.iter().map(|t| t.delta).fold(T::zero(), |a, b| a + b) / T::from_usize_lossy(tps.len());
        let roots = branch_roots(model, &curve, probe);
        Error::TooManyStationaryPoints {
            delta: probe.to_f64_lossy(),
            roots: roots.iter().map(|e| e.to_f64_lossy()).collect(),
        }
    };

    let (delta_amp, good_end, bad_end_snr) = match (centered, shape.as_slice()) {
        (false, []) => {
            notes.push("no transition detected: the fixed point is unique for every noise level".into());
            return Ok(Thresholds {
                delta_amp: inf,
                delta_rs: inf,
                delta_opt: inf,
                delta_spectral: v2,
                delta_good_end: inf,
                order: TransitionOrder::None,
                notes,
            });
        }
        (true, []) => {
            notes.push("continuous transition at delta = v^2".into());
            return Ok(Thresholds {
                delta_amp: v2,
                delta_rs: v2,
                delta_opt: v2,
                delta_spectral: v2,
                delta_good_end: v2,
                order: TransitionOrder::HigherOrder,
                notes,
            });
        }
        (false, [false, true]) => (tps[0].delta, tps[1], Some(tps[0].snr)),
        (true, [true]) => (v2, tps[0], None),
        _ => return Err(too_many(&tps)),
    };

    // i_RS(E_good) − i_RS(E_bad) on (Δ_AMP, Δ_good_end): negative at the left end,
    // positive at the right end.
    let s_max = *curve.snr.last().expect("nonempty");
    let s_min = curve.snr[0];
    let diff = |delta: T| {
        let s_good = solve_branch(model, delta, good_end.snr, s_max);
        let e_good = model.mmse_fast(s_good);
        let i_good = i_rs_unchecked(model, e_good, delta);
        let i_bad = match bad_end_snr {
            Some(s_b) => {
                let s_bad = solve_branch(model, delta, s_min, s_b);
                i_rs_unchecked(model, model.mmse_fast(s_bad), delta)
            }
            None => v2 / (T::lit(4.0) * delta),
        };
        i_good - i_bad
    };
    let lo = delta_amp;
    let hi = good_end.delta;
    let shrink = T::lit(1e-12);
    let (f_lo, f_hi) = (diff(lo * (T::one() + shrink)), diff(hi * (T::one() - shrink)));
    let delta_rs = if f_lo >= T::zero() {
        notes.push("branches already cross at the spinodal; delta_rs set to delta_amp".into());
        lo
    } else if f_hi <= T::zero() {
        notes.push("good branch never loses global optimality inside the coexistence region".into());
        hi
    } else {
        bisect(lo, hi, T::lit(1e-13) * hi, diff)
    };
    Ok(Thresholds {
        delta_amp,
        delta_rs,
        delta_opt: delta_rs,
        delta_spectral: v2,
        delta_good_end: good_end.delta,
        order: TransitionOrder::FirstOrder,
        notes,
    })
}

/// Interior stationary points `E = mmse(s)` with `Δ(s) = delta`, found from
/// sign changes on the sampled curve, in increasing `E`.
pub fn branch_roots<T: Real>(model: &ScalarModel<T>, curve: &FixedPointCurve<T>, delta: T) -> Vec<T> {
    let mut es = Vec::new();
    for k in 0..curve.snr.len() - 1 {
        let (a, b) = (curve.delta[k] - delta, curve.delta[k + 1] - delta);
        if (a < T::zero()) != (b < T::zero()) {
            let s = solve_branch(model, delta, curve.snr[k], curve.snr[k + 1]);
            es.push(model.mmse_fast(s));
        }
    }
    es.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    es
}

/// Whether a coexistence region exists (`Δ_AMP < Δ_RS`).
pub fn is_first_order<T: Real>(model: &ScalarModel<T>, points: usize) -> Result<bool> {
    if model.prior.variance() <= T::zero() {
        return Ok(false);
    }
    let curve = FixedPointCurve::new(model, points)?;
    Ok(!curve.turning_points(model).is_empty())
}

/// `E_good(Δ)`: the smallest stationary point while the good branch exists.
pub fn good_fixed_point<T: Real>(model: &ScalarModel<T>, delta: T, th: &Thresholds<T>) -> Result<Option<T>> {
    if delta >= th.delta_good_end {
        return Ok(None);
    }
    let sp = stationary_points(model, delta)?;
    Ok(sp.points.first().map(|p| p.e))
}

/// `Δ_AMP` if it lies in `interval`, otherwise `+∞` (no transition detected there).
pub fn find_delta_amp<T: Real>(model: &ScalarModel<T>, interval: (T, T)) -> Result<T> {
    let (lo, hi) = interval;
    if !(lo > T::zero() && hi > lo) {
        return Err(Error::InvalidArgument(format!("invalid search interval ({lo}, {hi})")));
    }
    let t = thresholds(model)?;
    Ok(if t.delta_amp >= lo && t.delta_amp <= hi { t.delta_amp } else { T::infinity() })
}

/// `Δ_RS` (the higher-order transition point when there is no coexistence).
pub fn find_delta_rs<T: Real>(model: &ScalarModel<T>) -> Result<T> {
    Ok(thresholds(model)?.delta_rs)
}

fn check_delta<T: Real>(delta: T) -> Result<()> {
    if !(delta > T::zero()) || delta.is_infinite() {
        return Err(Error::InvalidArgument(format!("noise variance {delta} must be positive and finite")));
    }
    Ok(())
}
