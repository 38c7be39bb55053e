//! One-dimensional minimization: Brent's method, optionally preceded by a
//! coarse grid scan that brackets the global minimum of a multimodal
//! function.
//!
//! The Brent routine follows the classic formulation (Brent 1973; Numerical
//! Recipes `brent`): parabolic interpolation through the three best points,
//! falling back to golden-section steps whenever the parabola is not
//! trustworthy.

/// Golden-section ratio `(3 - sqrt(5)) / 2`.
const CGOLD: f64 = 0.381_966_011_250_105_1;
/// Protects the convergence test when the minimizer sits at zero.
const ZEPS: f64 = 1e-11;

/// Minimizes `f` on `[a, b]` with Brent's method.
///
/// `tol` is a relative tolerance on the abscissa (an absolute floor of
/// [`ZEPS`] applies near zero). Returns the best `(x, f(x))` found; on a
/// unimodal function `x` is within about `2 * tol * |x|` of the minimizer.
pub fn brent_minimize<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_iter: u32,
) -> (f64, f64) {
    let (mut a, mut b) = if a < b { (a, b) } else { (b, a) };
    let mut x = a + CGOLD * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    // `d` is the last step, `e` the one before it; a parabolic step is
    // accepted only if it is smaller than half of `e`.
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + ZEPS;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return (x, fx);
        }
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x) {
                e = if x >= xm { a - x } else { b - x };
                d = CGOLD * e;
            } else {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
            }
        } else {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            w = x;
            x = u;
            fv = fw;
            fw = fx;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                w = u;
                fv = fw;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

/// Evaluates `f` on a uniform `scan_points`-point grid over `[lo, hi]`, then
/// refines around the grid minimizer with [`brent_minimize`] restricted to
/// the two neighboring grid cells.
///
/// Returns the better of the refined point and the grid minimizer, so a flat
/// or pathological objective still yields a well-defined answer.
pub fn prescan_brent<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    scan_points: usize,
    tol: f64,
    max_iter: u32,
) -> (f64, f64) {
    let n = scan_points.max(2);
    let step = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut best = 0;
    for i in 1..n {
        if fs[i] < fs[best] {
            best = i;
        }
    }
    let a = xs[best.saturating_sub(1)];
    let b = xs[(best + 1).min(n - 1)];
    let (x, fx) = brent_minimize(&mut f, a, b, tol, max_iter);
    if fs[best] < fx {
        (xs[best], fs[best])
    } else {
        (x, fx)
    }
}
