//! Quadrature rules for expectations under the standard normal.

use std::borrow::Cow;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default number of nodes used for every `E_Z[...]` in the crate.
pub const DEFAULT_ORDER: usize = 61;

/// Nodes and weights such that `Σ w_k f(z_k) ≈ E[f(Z)]`, `Z ~ N(0, 1)`.
///
/// Weights are normalised to sum to one and nodes are exactly symmetric about 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
    order: usize,
}

impl<T: Real> QuadratureRule<T> {
    /// Gauss–Hermite rule of the given order (number of nodes), exact for
    /// polynomials of degree up to `2·order − 1`.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("quadrature order must be >= 1".into()));
        }
        let (x, w) = hermite_physicists(order);
        // Physicists' weight e^{-x²} → standard normal: z = √2·x, w / √π.
        let sqrt2 = std::f64::consts::SQRT_2;
        let total: f64 = w.iter().sum();
        let nodes = x.iter().map(|&xi| T::lit(xi * sqrt2)).collect();
        let weights = w.iter().map(|&wi| T::lit(wi / total)).collect();
        Ok(Self { nodes, weights, order })
    }

    /// Trapezoid rule on the uniform grid `{−W, −W + h, …, W}` with Gaussian
    /// weights, normalised to sum to one.
    ///
    /// For integrands analytic in a strip of half-width `d` around the real axis
    /// the error decays like `exp(−2πd/h)`, which makes this the better choice
    /// when the integrand has sharp (but smooth) transitions.
    pub fn trapezoid(spacing: T, half_width: T) -> Result<Self> {
        if !(spacing > T::zero() && spacing.is_finite() && half_width > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "trapezoid spacing {spacing} / half width {half_width} must be positive"
            )));
        }
        let k = (half_width / spacing).ceil().to_f64_lossy() as usize;
        let h = half_width / T::from_usize_lossy(k.max(1));
        let half = T::lit(0.5);
        let mut nodes = Vec::with_capacity(2 * k + 1);
        let mut weights = Vec::with_capacity(2 * k + 1);
        for j in 0..=2 * k {
            let z = h * (T::from_usize_lossy(j) - T::from_usize_lossy(k));
            nodes.push(z);
            weights.push((-half * z * z).exp());
        }
        nodes[k] = T::zero();
        let total = weights.iter().fold(T::zero(), |s, &w| s + w);
        for w in &mut weights {
            *w = *w / total;
        }
        let order = nodes.len();
        Ok(Self { nodes, weights, order })
    }

    /// Rule with no nodes, for code paths that never integrate.
    pub(crate) fn empty() -> Self {
        Self { nodes: Vec::new(), weights: Vec::new(), order: 0 }
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `E[f(Z)]` for `Z ~ N(0, 1)`.
    #[inline]
    pub fn expect<F: FnMut(T) -> T>(&self, mut f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&z, &w)| acc + w * f(z))
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// How a [`ScalarModel`](crate::ScalarModel) evaluates Gaussian expectations.
#[derive(Debug, Clone)]
pub enum GaussianQuadrature<T> {
    /// A fixed rule used for every signal-to-noise ratio.
    Fixed(QuadratureRule<T>),
    /// Trapezoid rule on `[−10, 10]` whose spacing shrinks with the sharpness
    /// `spread·√snr` of the integrand; at low sharpness it uses `base_nodes`
    /// points. Spacings come from a geometric ladder so rules can be cached.
    Adaptive(AdaptiveRules<T>),
}

/// Lazily built trapezoid rules with spacings `base·2^{−k/4}`.
#[derive(Debug, Clone)]
pub struct AdaptiveRules<T> {
    base_nodes: usize,
    cache: Arc<Vec<OnceLock<QuadratureRule<T>>>>,
}

/// Half width of the adaptive grid; `φ(10) ≈ 7.7e-23`.
pub const ADAPTIVE_HALF_WIDTH: f64 = 10.0;

/// Largest `sharpness × spacing` product: keeps the strip-width error term
/// `exp(−2π²/(sharpness·h))` below double-precision rounding.
const MAX_SHARPNESS_SPACING: f64 = 0.5;

const LADDER_LEVELS: usize = 96;

impl<T: Real> GaussianQuadrature<T> {
    pub fn hermite(order: usize) -> Result<Self> {
        Ok(Self::Fixed(QuadratureRule::gauss_hermite(order)?))
    }

    pub fn adaptive(base_nodes: usize) -> Result<Self> {
        if base_nodes < 3 {
            return Err(Error::InvalidArgument("adaptive quadrature needs >= 3 base nodes".into()));
        }
        let cache = Arc::new((0..LADDER_LEVELS).map(|_| OnceLock::new()).collect());
        Ok(Self::Adaptive(AdaptiveRules { base_nodes, cache }))
    }

    /// Rule to use for an integrand whose log-odds change at rate `sharpness`
    /// per unit of `Z`.
    pub fn rule_for(&self, sharpness: T) -> Cow<'_, QuadratureRule<T>> {
        let rules = match self {
            Self::Fixed(rule) => return Cow::Borrowed(rule),
            Self::Adaptive(rules) => rules,
        };
        let width = T::lit(ADAPTIVE_HALF_WIDTH);
        let base = T::lit(2.0) * width / T::from_usize_lossy(rules.base_nodes - 1);
        let target = if sharpness > T::zero() {
            T::lit(MAX_SHARPNESS_SPACING) / sharpness
        } else {
            T::infinity()
        };
        let level = if target >= base {
            0
        } else {
            (T::lit(4.0) * (base / target).log2()).ceil().to_f64_lossy() as usize
        };
        let spacing = |k: usize| base * T::lit(2f64.powf(-(k as f64) / 4.0));
        match rules.cache.get(level) {
            Some(cell) => Cow::Borrowed(
                cell.get_or_init(|| QuadratureRule::trapezoid(spacing(level), width).expect("positive spacing")),
            ),
            None => Cow::Owned(QuadratureRule::trapezoid(target, width).expect("positive spacing")),
        }
    }

    /// Baseline node count (the Gauss–Hermite order for fixed rules).
    pub fn order(&self) -> usize {
        match self {
            Self::Fixed(rule) => rule.order(),
            Self::Adaptive(rules) => rules.base_nodes,
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, Self::Adaptive(_))
    }
}

/// Nodes (ascending) and weights of the physicists' Gauss–Hermite rule.
///
/// Newton iteration on the orthonormal Hermite recurrence, started from the
/// Golub–Welsch nodes.
fn hermite_physicists(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    const MAXIT: usize = 100;
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    // Starting points from the eigenvalues of the Jacobi matrix: always
    // distinct, so Newton cannot land two starts on the same root.
    let jacobi = nalgebra::DMatrix::from_fn(n, n, |r, c| {
        if r.abs_diff(c) == 1 {
            (r.max(c) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut guess: Vec<f64> = nalgebra::SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    guess.sort_by(|a, b| b.total_cmp(a));
    for i in 0..m {
        let mut z = guess[i];
        let mut pp = 0.0;
        for _ in 0..MAXIT {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / (pp * pp);
    }
    // Exact symmetry; middle node of an odd rule is exactly zero.
    if n % 2 == 1 {
        x[m - 1] = 0.0;
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..m {
        nodes[n - 1 - i] = x[i];
        nodes[i] = -x[i];
        weights[n - 1 - i] = w[i];
        weights[i] = w[i];
    }
    if n % 2 == 1 {
        nodes[m - 1] = 0.0;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moment(rule: &QuadratureRule<f64>, k: i32) -> f64 {
        rule.expect(|z| z.powi(k))
    }

    #[test]
    fn order_one_is_a_single_node_at_zero() {
        let r = QuadratureRule::<f64>::gauss_hermite(1).unwrap();
        assert_eq!(r.nodes(), &[0.0]);
        assert_eq!(r.weights(), &[1.0]);
    }

    #[test]
    fn order_zero_rejected() {
        assert!(QuadratureRule::<f64>::gauss_hermite(0).is_err());
    }

    #[test]
    fn second_moment_exact_from_order_two() {
        for n in 2..80 {
            let r = QuadratureRule::<f64>::gauss_hermite(n).unwrap();
            assert!((moment(&r, 2) - 1.0).abs() < 1e-12, "order {n}");
            assert!(moment(&r, 1).abs() < 1e-13);
        }
    }

    #[test]
    fn tenth_moment_at_default_order() {
        let r = QuadratureRule::<f64>::gauss_hermite(61).unwrap();
        // E[Z^10] = 9!! = 945
        assert!((moment(&r, 10) - 945.0).abs() / 945.0 < 1e-10);
    }

    #[test]
    fn exact_up_to_degree_2n_minus_1() {
        let n = 8;
        let r = QuadratureRule::<f64>::gauss_hermite(n).unwrap();
        let mut dfact = 1.0;
        for k in (2..=2 * n as i32 - 2).step_by(2) {
            dfact *= (k - 1) as f64;
            assert!((moment(&r, k) - dfact).abs() / dfact < 1e-11, "k={k}");
        }
        let odd = moment(&r, 2 * n as i32 - 1);
        assert!(odd.abs() < 1e-8);
    }

    #[test]
    fn high_orders_keep_every_root() {
        for n in [150, 200, 300] {
            let r = QuadratureRule::<f64>::gauss_hermite(n).unwrap();
            assert!(r.nodes().windows(2).all(|p| p[1] > p[0]), "n={n}");
            assert!((moment(&r, 2) - 1.0).abs() < 1e-12, "n={n}");
            assert!((moment(&r, 4) - 3.0).abs() < 1e-11, "n={n}");
        }
    }

    #[test]
    fn symmetric_and_normalised() {
        for n in [2, 5, 30, 61, 100] {
            let r = QuadratureRule::<f64>::gauss_hermite(n).unwrap();
            let s: f64 = r.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            for i in 0..n {
                assert_eq!(r.nodes()[i], -r.nodes()[n - 1 - i]);
                assert!(r.weights()[i] > 0.0);
            }
        }
    }

    #[test]
    fn trapezoid_moments() {
        let r = QuadratureRule::<f64>::trapezoid(0.4, 10.0).unwrap();
        assert!((moment(&r, 2) - 1.0).abs() < 1e-14);
        assert!((moment(&r, 10) - 945.0).abs() < 1e-9);
        assert_eq!(r.nodes().len(), 51);
    }

    #[test]
    fn adaptive_rule_refines_with_sharpness() {
        let q = GaussianQuadrature::<f64>::adaptive(61).unwrap();
        let coarse = q.rule_for(0.1).nodes().len();
        let fine = q.rule_for(40.0).nodes().len();
        assert_eq!(coarse, 61);
        assert!(fine > 1500);
        assert!(matches!(q.rule_for(40.0), Cow::Borrowed(_)));
        // a steep logistic integrand: E[σ(kZ + c)], reference from a very fine grid
        let k = 30.0;
        let f = |z: f64| 1.0 / (1.0 + (-(k * z - 20.0)).exp());
        let reference = QuadratureRule::<f64>::trapezoid(1e-4, 12.0).unwrap().expect(f);
        let adaptive = q.rule_for(k).expect(f);
        assert!((adaptive - reference).abs() < 1e-14, "{adaptive} vs {reference}");
    }

    #[test]
    fn single_precision_rule() {
        let r = QuadratureRule::<f32>::gauss_hermite(20).unwrap();
        assert!((r.expect(|z| z * z * z * z) - 3.0).abs() < 1e-4);
    }
}
