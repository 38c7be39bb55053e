//! Adaptive Simpson quadrature for smooth one-dimensional integrands.
//!
//! The classic recursive scheme: a segment is accepted when the two-panel
//! refinement changes the Simpson estimate by at most `15 * tol`, in which
//! case the Richardson-corrected value `S2 + (S2 - S1) / 15` is used. The
//! tolerance is halved on each split so the accepted per-segment errors sum
//! to at most the requested tolerance.

use crate::error::{Error, Result};

/// Tolerance and recursion budget for [`adaptive_simpson`].
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    /// Absolute tolerance on the integral.
    pub tol: f64,
    /// Maximum number of interval halvings.
    pub max_depth: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_depth: 48,
        }
    }
}

impl QuadConfig {
    /// Configuration with the given absolute tolerance and the default depth.
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// One Simpson panel over `[a, b]` given the endpoint values. Returns the
/// midpoint, the integrand value there, and the panel estimate.
fn simpson_panel<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    let est = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    (m, fm, est)
}

/// Recursively refines `[a, b]` whose whole-panel estimate is `whole`.
/// `unresolved` accumulates the error estimates of segments that hit the
/// depth limit before meeting their share of the tolerance.
#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    unresolved: &mut f64,
) -> f64 {
    let (ml, fml, left) = simpson_panel(f, a, fa, m, fm);
    let (mr, fmr, right) = simpson_panel(f, m, fm, b, fb);
    let eps = left + right - whole;
    // A non-finite estimate cannot be refined away; poison the run so the
    // caller reports it instead of walking the full refinement tree.
    if !eps.is_finite() {
        *unresolved = f64::INFINITY;
        return left + right;
    }
    if eps.abs() <= 15.0 * tol {
        return left + right + eps / 15.0;
    }
    // Refinement cannot push the error below the roundoff of the panel
    // sums; stopping there keeps unreachable tolerances from exploding the
    // tree. The residual is recorded so the caller sees the shortfall.
    let noise = f64::EPSILON * (left.abs() + right.abs() + whole.abs());
    if depth == 0 || eps.abs() <= 4.0 * noise {
        *unresolved += eps.abs() / 15.0;
        return left + right + eps / 15.0;
    }
    let half_tol = 0.5 * tol;
    refine(f, a, fa, ml, fml, m, fm, left, half_tol, depth - 1, unresolved)
        + refine(f, m, fm, mr, fmr, b, fb, right, half_tol, depth - 1, unresolved)
}

/// Integrates `f` over `[a, b]` to the absolute tolerance in `cfg`.
///
/// Bounds may be given in either order; the usual orientation sign applies.
/// Fails with [`Error::QuadratureDidNotConverge`] when the depth budget is
/// exhausted with more than `cfg.tol` of estimated error outstanding, and
/// with [`Error::NonFinite`] when the bounds or the result are not finite.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: QuadConfig) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite {
            what: "integration bound",
        });
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            requirement: "> 0",
            value: cfg.tol,
        });
    }
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let flo = f(lo);
    let fhi = f(hi);
    let (m, fm, whole) = simpson_panel(&f, lo, flo, hi, fhi);
    let mut unresolved = 0.0;
    let value = refine(
        &f,
        lo,
        flo,
        m,
        fm,
        hi,
        fhi,
        whole,
        cfg.tol,
        cfg.max_depth,
        &mut unresolved,
    );
    if !value.is_finite() {
        return Err(Error::NonFinite {
            what: "integrand value",
        });
    }
    if unresolved > cfg.tol {
        return Err(Error::QuadratureDidNotConverge {
            achieved: unresolved,
            requested: cfg.tol,
        });
    }
    Ok(sign * value)
}
