//! Small one-dimensional root finding and optimisation helpers.

use crate::scalar::Real;

/// Bisection for a sign change of `f` on `[lo, hi]`; `f(lo)` and `f(hi)` must
/// have opposite signs (or one of them vanish). Stops when the bracket is
/// narrower than `tol` or after 300 halvings.
pub fn bisect<T: Real>(mut lo: T, mut hi: T, tol: T, mut f: impl FnMut(T) -> T) -> T {
    let mut flo = f(lo);
    if flo == T::zero() {
        return lo;
    }
    let half = T::lit(0.5);
    for _ in 0..300 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = lo + half * (hi - lo);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == T::zero() {
            return mid;
        }
        if (fm < T::zero()) == (flo < T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    lo + half * (hi - lo)
}

/// Golden-section search for a local extremum of `f` on `[a, b]`.
/// Returns `(argext, value)`; `maximise` selects the direction.
pub fn golden_section<T: Real>(
    mut a: T,
    mut b: T,
    tol: T,
    maximise: bool,
    mut f: impl FnMut(T) -> T,
) -> (T, T) {
    let sign = if maximise { -T::one() } else { T::one() };
    let mut g = |x: T| sign * f(x);
    let r = T::lit(0.618_033_988_749_894_8);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d);
        }
    }
    let (x, fx) = if fc < fd { (c, fc) } else { (d, fd) };
    (x, sign * fx)
}

/// `n` points spaced geometrically from `lo` to `hi` inclusive.
pub fn geomspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    assert!(n >= 2 && lo > T::zero() && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    let last = T::from_usize_lossy(n - 1);
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                (a + (b - a) * T::from_usize_lossy(k) / last).exp()
            }
        })
        .collect()
}
