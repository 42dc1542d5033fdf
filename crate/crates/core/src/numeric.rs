//! Scalar numerics shared by the pricing and distribution code: adaptive
//! Simpson quadrature, bisection and golden-section search.

/// Default absolute tolerance for quadrature.
pub const QUAD_TOL: f64 = 1e-9;

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Quadrature over `[a, b]` split at every breakpoint strictly inside the
/// interval. Integrands with jumps at declared breakpoints stay accurate.
pub fn integrate_split<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    let pieces = cuts.len() + 1;
    let mut lo = a;
    let mut total = 0.0;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        total += adaptive_simpson(f, lo, hi, tol / pieces as f64);
        lo = hi;
    }
    total
}

/// Bisection on a sign change of `f` between `lo` and `hi`. Returns the
/// midpoint of the final bracket once it is narrower than `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    if f(hi) == 0.0 {
        return hi;
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bisection on a boolean predicate that is `false` at `lo` and `true` at
/// `hi`. Returns the bracket `(last_false, first_true)`.
pub fn bisect_predicate<P: Fn(f64) -> bool>(pred: &P, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
/// Returns `(argmax, max)`; the endpoints are also considered.
pub fn golden_max<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 || (fx == best.1 && x < best.0) {
            best = (x, fx);
        }
    }
    best
}

/// `n + 1` evenly spaced points on `[lo, hi]`, endpoints exact.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![lo];
    }
    let step = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| if i == n { hi } else { lo + step * i as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_polynomials() {
        let v = adaptive_simpson(&|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((v - 0.0).abs() < 1e-10);
        let v = adaptive_simpson(&|x: f64| 1.0 / (1.0 + x), 0.0, 2.0, 1e-12);
        assert!((v - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn split_quadrature_handles_jump() {
        let step = |x: f64| if x <= 1.0 { 1.0 } else { 5.0 };
        let v = integrate_split(&step, 0.0, 2.0, &[1.0], 1e-12);
        assert!((v - 6.0).abs() < 1e-10);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(&|x: f64| x * x - 2.0, 0.0, 2.0, 1e-12);
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_max(&|x: f64| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-7);
        assert!(fx.abs() < 1e-12);
    }

    #[test]
    fn predicate_bisection_brackets_threshold() {
        let (lo, hi) = bisect_predicate(&|x: f64| x >= 0.25, 0.0, 1.0, 1e-9);
        assert!(lo < 0.25 && hi >= 0.25 && hi - lo <= 1e-9);
    }

    #[test]
    fn linspace_endpoints() {
        let xs = linspace(0.0, 1.0, 4);
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
