//! Discrete signal priors and the scalar Gaussian channel built on them.
//!
//! Everything here is a finite sum over the support times a Gaussian
//! expectation evaluated with a [`QuadratureRule`]. Log-weights always go
//! through log-sum-exp so large signal-to-noise ratios do not overflow.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::quadrature::{GaussianQuadrature, QuadratureRule, DEFAULT_ORDER};
use crate::scalar::{clipped_exp, Real};

/// Finite-alphabet distribution `Σ_α p_α δ(s − a_α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePrior<T> {
    support: Vec<T>,
    weights: Vec<T>,
    log_weights: Vec<T>,
    mean: T,
    second_moment: T,
    entropy: T,
}

impl<T: Real> DiscretePrior<T> {
    /// Builds a prior from support points and positive weights; weights are
    /// normalised to sum to one.
    pub fn new(support: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidPrior("empty support".into()));
        }
        if support.len() != weights.len() {
            return Err(Error::InvalidPrior(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if let Some(a) = support.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidPrior(format!("non-finite support point {a}")));
        }
        if let Some(p) = weights.iter().find(|p| !p.is_finite() || **p <= T::zero()) {
            return Err(Error::InvalidPrior(format!("weight {p} is not a positive finite number")));
        }
        for (i, a) in support.iter().enumerate() {
            if support[..i].contains(a) {
                return Err(Error::InvalidPrior(format!("duplicate support point {a}")));
            }
        }
        let total = weights.iter().fold(T::zero(), |s, &p| s + p);
        let weights: Vec<T> = weights.into_iter().map(|p| p / total).collect();
        let log_weights = weights.iter().map(|p| p.ln()).collect::<Vec<_>>();
        let mean = dot(&weights, support.iter().copied());
        let second_moment = dot(&weights, support.iter().map(|&a| a * a));
        let entropy = -weights
            .iter()
            .zip(&log_weights)
            .fold(T::zero(), |s, (&p, &lp)| s + p * lp);
        Ok(Self { support, weights, log_weights, mean, second_moment, entropy })
    }

    pub fn dirac(a: T) -> Self {
        Self::new(vec![a], vec![T::one()]).expect("valid dirac")
    }

    /// `(1 − ρ) δ(s) + ρ δ(s − 1)`, the sparse spiked-Wigner signal.
    pub fn bernoulli(rho: T) -> Result<Self> {
        if !(rho > T::zero() && rho < T::one()) {
            return Err(Error::InvalidPrior(format!("bernoulli density {rho} outside (0, 1)")));
        }
        Self::new(vec![T::zero(), T::one()], vec![T::one() - rho, rho])
    }

    /// Uniform `±1`.
    pub fn rademacher() -> Self {
        let half = T::lit(0.5);
        Self::new(vec![-T::one(), T::one()], vec![half, half]).expect("valid rademacher")
    }

    /// Two communities of relative sizes `ρ` and `1 − ρ`, centred with unit
    /// second moment: `ρ δ(s − √((1−ρ)/ρ)) + (1 − ρ) δ(s + √(ρ/(1−ρ)))`.
    pub fn community(rho: T) -> Result<Self> {
        if !(rho > T::zero() && rho < T::one()) {
            return Err(Error::InvalidPrior(format!("community fraction {rho} outside (0, 1)")));
        }
        let q = T::one() - rho;
        Self::new(vec![(q / rho).sqrt(), -(rho / q).sqrt()], vec![rho, q])
    }

    pub fn support(&self) -> &[T] {
        &self.support
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    /// `v = E[S²]`.
    pub fn second_moment(&self) -> T {
        self.second_moment
    }

    pub fn variance(&self) -> T {
        (self.second_moment - self.mean * self.mean).max(T::zero())
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> T {
        self.entropy
    }

    pub fn min_support(&self) -> T {
        self.support.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_support(&self) -> T {
        self.support.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// `max a_α − min a_α`.
    pub fn spread(&self) -> T {
        self.max_support() - self.min_support()
    }

    /// True when `E[S] = 0` up to rounding, in which case `E = v` is a
    /// stationary point of the potential.
    pub fn is_centered(&self) -> bool {
        self.mean.abs() <= T::lit(1e-12) * self.second_moment.sqrt().max(T::one())
    }

    /// Same weights with every support point moved by `eps·√v`.
    pub fn with_mean_shift(&self, eps: T) -> Self {
        let shift = eps * self.second_moment.sqrt();
        Self::new(self.support.iter().map(|&a| a + shift).collect(), self.weights.clone())
            .expect("shifted support stays valid")
    }

    /// Posterior mean and variance of `X ~ P_0` under the tilt `exp(b·x − a·x²/2)`.
    ///
    /// This is the natural-parameter form of the scalar channel: observing
    /// `y = S + σZ` corresponds to `a = 1/σ²`, `b = y/σ²`.
    pub fn denoise(&self, a: T, b: T) -> (T, T) {
        let half = T::lit(0.5);
        let mut max = T::neg_infinity();
        for (&x, &lp) in self.support.iter().zip(&self.log_weights) {
            max = max.max(lp + b * x - half * a * x * x);
        }
        let mut z = T::zero();
        let mut m1 = T::zero();
        for (&x, &lp) in self.support.iter().zip(&self.log_weights) {
            let w = clipped_exp(lp + b * x - half * a * x * x - max);
            z = z + w;
            m1 = m1 + w * x;
        }
        let mean = m1 / z;
        let mut var = T::zero();
        for (&x, &lp) in self.support.iter().zip(&self.log_weights) {
            let w = clipped_exp(lp + b * x - half * a * x * x - max);
            var = var + w * (x - mean) * (x - mean);
        }
        (mean, var / z)
    }

    /// `E[X | S + σZ = y]` with `sigma2 = σ²`. `sigma2 = +∞` returns the prior mean.
    pub fn posterior_mean(&self, y: T, sigma2: T) -> Result<T> {
        if !y.is_finite() {
            return Err(Error::InvalidArgument(format!("observation {y} is not finite")));
        }
        if sigma2.is_nan() || sigma2 <= T::zero() {
            return Err(Error::InvalidArgument(format!("noise variance {sigma2} must be positive")));
        }
        if sigma2.is_infinite() {
            return Ok(self.mean);
        }
        let a = sigma2.recip();
        let (m, _) = self.denoise(a, y * a);
        // keep inside the convex hull when rounding drifts
        Ok(m.max(self.min_support()).min(self.max_support()))
    }

    /// Derivative of [`posterior_mean`](Self::posterior_mean) with respect to `y`:
    /// `Var[X | y] / σ²`.
    pub fn posterior_mean_derivative(&self, y: T, sigma2: T) -> Result<T> {
        if !y.is_finite() || sigma2.is_nan() || sigma2 <= T::zero() {
            return Err(Error::InvalidArgument("invalid observation or noise variance".into()));
        }
        if sigma2.is_infinite() {
            return Ok(T::zero());
        }
        let a = sigma2.recip();
        let (_, var) = self.denoise(a, y * a);
        Ok(var * a)
    }

    /// Scalar mmse at signal-to-noise ratio `snr = Σ⁻²`.
    pub fn mmse(&self, snr: T, rule: &QuadratureRule<T>) -> Result<T> {
        check_snr(snr)?;
        Ok(self.mmse_unchecked(snr, rule))
    }

    pub(crate) fn mmse_unchecked(&self, snr: T, rule: &QuadratureRule<T>) -> T {
        self.channel_terms(snr, rule).mmse
    }

    /// `E[E[X | Y]²] = v − mmse(snr)`, computed without the cancellation of
    /// subtracting two nearly equal numbers at small `snr`.
    pub fn posterior_power(&self, snr: T, rule: &QuadratureRule<T>) -> Result<T> {
        check_snr(snr)?;
        Ok(self.posterior_power_unchecked(snr, rule))
    }

    pub(crate) fn posterior_power_unchecked(&self, snr: T, rule: &QuadratureRule<T>) -> T {
        self.channel_terms(snr, rule).power
    }

    /// `E_{S,Z} ln Σ_α p_α exp(−a_α² snr/2 + a_α (S snr + Z √snr))`, the
    /// log-partition (free entropy) of the scalar channel.
    pub fn free_entropy(&self, snr: T, rule: &QuadratureRule<T>) -> Result<T> {
        check_snr(snr)?;
        Ok(self.free_entropy_unchecked(snr, rule))
    }

    pub(crate) fn free_entropy_unchecked(&self, snr: T, rule: &QuadratureRule<T>) -> T {
        if snr.is_infinite() {
            return T::infinity();
        }
        T::lit(0.5) * self.second_moment * snr + self.channel_terms(snr, rule).excess
    }

    /// Free entropy minus its leading term `v·snr/2`; lies in `[−H(S), 0]`.
    pub fn excess_free_entropy(&self, snr: T, rule: &QuadratureRule<T>) -> Result<T> {
        check_snr(snr)?;
        Ok(self.channel_terms(snr, rule).excess)
    }

    /// One pass over `(S, Z)` for mmse, `E[η²]` and the excess free entropy.
    ///
    /// Writing `y = a_β + z/√snr`, the posterior log-weight of `a_α` is
    /// `ln p_α − snr d²/2 − √snr z d` with `d = a_β − a_α`, up to a constant
    /// that cancels from the mmse and contributes exactly `v·snr/2` to the
    /// free entropy.
    pub(crate) fn channel_terms(&self, snr: T, rule: &QuadratureRule<T>) -> ChannelTerms<T> {
        let n = self.support.len();
        if snr == T::zero() {
            return ChannelTerms { mmse: self.variance(), power: self.mean * self.mean, excess: T::zero() };
        }
        if snr.is_infinite() || n == 1 {
            return ChannelTerms { mmse: T::zero(), power: self.second_moment, excess: -self.entropy };
        }
        let half = T::lit(0.5);
        let root = snr.sqrt();
        let mut buf = vec![T::zero(); n];
        let (mut mmse, mut power, mut excess) = (T::zero(), T::zero(), T::zero());
        for (&ab, &pb) in self.support.iter().zip(&self.weights) {
            let (mut e2, mut m2, mut lz) = (T::zero(), T::zero(), T::zero());
            for (z, wz) in rule.iter() {
                let mut max = T::neg_infinity();
                for alpha in 0..n {
                    let d = ab - self.support[alpha];
                    let l = self.log_weights[alpha] - half * snr * d * d - root * z * d;
                    buf[alpha] = l;
                    max = max.max(l);
                }
                let (mut zsum, mut err, mut m) = (T::zero(), T::zero(), T::zero());
                for alpha in 0..n {
                    let w = clipped_exp(buf[alpha] - max);
                    zsum = zsum + w;
                    err = err + w * (ab - self.support[alpha]);
                    m = m + w * self.support[alpha];
                }
                let e = err / zsum;
                let eta = m / zsum;
                e2 = e2 + wz * e * e;
                m2 = m2 + wz * eta * eta;
                lz = lz + wz * (max + zsum.ln());
            }
            mmse = mmse + pb * e2;
            power = power + pb * m2;
            excess = excess + pb * lz;
        }
        ChannelTerms {
            mmse: mmse.max(T::zero()).min(self.variance()),
            power: power.max(T::zero()).min(self.second_moment),
            excess: excess.min(T::zero()).max(-self.entropy),
        }
    }

    /// Smallest distance between two support points (`∞` for a Dirac).
    pub fn min_gap(&self) -> T {
        let mut xs = self.support.clone();
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite support"));
        xs.windows(2).map(|w| w[1] - w[0]).fold(T::infinity(), T::min)
    }

    /// Draws one value by inverting the cumulative weights.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u = T::lit(rng.random::<f64>());
        let mut acc = T::zero();
        for (&x, &p) in self.support.iter().zip(&self.weights) {
            acc = acc + p;
            if u < acc {
                return x;
            }
        }
        *self.support.last().expect("nonempty support")
    }

    /// Whether `x` is a support point up to relative rounding.
    pub fn contains(&self, x: T) -> bool {
        let scale = self.max_support().abs().max(self.min_support().abs()).max(T::one());
        self.support.iter().any(|&a| (a - x).abs() <= T::lit(1e-12) * scale)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ChannelTerms<T> {
    pub mmse: T,
    pub power: T,
    pub excess: T,
}

fn check_snr<T: Real>(snr: T) -> Result<()> {
    if snr.is_nan() || snr < T::zero() {
        return Err(Error::InvalidArgument(format!("snr {snr} must be nonnegative")));
    }
    Ok(())
}

fn dot<T: Real>(w: &[T], xs: impl Iterator<Item = T>) -> T {
    w.iter().zip(xs).fold(T::zero(), |s, (&p, x)| s + p * x)
}

/// A prior paired with the rule used for its Gaussian expectations.
#[derive(Debug, Clone)]
pub struct ScalarModel<T> {
    pub prior: DiscretePrior<T>,
    pub quadrature: GaussianQuadrature<T>,
}

impl<T: Real> ScalarModel<T> {
    /// Adaptive trapezoid quadrature with the default baseline node count.
    pub fn new(prior: DiscretePrior<T>) -> Self {
        Self {
            prior,
            quadrature: GaussianQuadrature::adaptive(DEFAULT_ORDER).expect("valid default"),
        }
    }

    /// Fixed Gauss–Hermite rule of the given order for every evaluation.
    pub fn with_hermite(prior: DiscretePrior<T>, order: usize) -> Result<Self> {
        Ok(Self { prior, quadrature: GaussianQuadrature::hermite(order)? })
    }

    pub fn with_quadrature(prior: DiscretePrior<T>, quadrature: GaussianQuadrature<T>) -> Self {
        Self { prior, quadrature }
    }

    /// `v = E[S²]`.
    pub fn v(&self) -> T {
        self.prior.second_moment()
    }

    fn rule(&self, snr: T) -> std::borrow::Cow<'_, QuadratureRule<T>> {
        let sharpness = if snr.is_finite() { self.prior.spread() * snr.sqrt() } else { T::zero() };
        self.quadrature.rule_for(sharpness)
    }

    pub(crate) fn terms(&self, snr: T) -> ChannelTerms<T> {
        let gap = self.prior.min_gap();
        // beyond this every posterior is a point mass to within e^{-800}
        if snr.is_infinite() || snr * gap * gap > T::lit(6400.0) {
            return self.prior.channel_terms(T::infinity(), &QuadratureRule::empty());
        }
        if snr == T::zero() {
            return self.prior.channel_terms(snr, &QuadratureRule::empty());
        }
        self.prior.channel_terms(snr, &self.rule(snr))
    }

    pub fn mmse(&self, snr: T) -> Result<T> {
        check_snr(snr)?;
        Ok(self.mmse_fast(snr))
    }

    pub fn free_entropy(&self, snr: T) -> Result<T> {
        check_snr(snr)?;
        Ok(self.free_entropy_fast(snr))
    }

    /// `v − mmse(snr)`.
    pub fn posterior_power(&self, snr: T) -> Result<T> {
        check_snr(snr)?;
        Ok(self.terms(snr).power)
    }

    /// Free entropy minus `v·snr/2`.
    pub fn excess_free_entropy(&self, snr: T) -> Result<T> {
        check_snr(snr)?;
        Ok(self.terms(snr).excess)
    }

    pub(crate) fn mmse_fast(&self, snr: T) -> T {
        self.terms(snr).mmse
    }

    pub(crate) fn free_entropy_fast(&self, snr: T) -> T {
        if snr.is_infinite() {
            return T::infinity();
        }
        T::lit(0.5) * self.v() * snr + self.terms(snr).excess
    }

    /// Same quadrature, prior support shifted by `eps·√v`.
    pub fn with_mean_shift(&self, eps: T) -> Self {
        Self { prior: self.prior.with_mean_shift(eps), quadrature: self.quadrature.clone() }
    }
}

/// Key-value form `{support: [...], weights: [...]}` used by config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorRecord {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

impl<T: Real> From<&DiscretePrior<T>> for PriorRecord {
    fn from(p: &DiscretePrior<T>) -> Self {
        Self {
            support: p.support.iter().map(|x| x.to_f64_lossy()).collect(),
            weights: p.weights.iter().map(|x| x.to_f64_lossy()).collect(),
        }
    }
}

impl<T: Real> TryFrom<PriorRecord> for DiscretePrior<T> {
    type Error = Error;

    fn try_from(r: PriorRecord) -> Result<Self> {
        Self::new(
            r.support.into_iter().map(T::lit).collect(),
            r.weights.into_iter().map(T::lit).collect(),
        )
    }
}

impl<T: Real> Serialize for DiscretePrior<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PriorRecord::from(self).serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for DiscretePrior<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PriorRecord::deserialize(d)?;
        Self::try_from(r).map_err(serde::de::Error::custom)
    }
}
